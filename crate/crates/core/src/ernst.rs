//! The Ernst potential built from theta functions on the spectral curve.
//!
//! At a world point `(ρ, ζ)` the potential is
//! `E = e^{−πi Σ p_j} · Θ_pq(∫_ξ^{∞⁺}) / Θ_pq(∫_ξ^{∞⁻})` over the period
//! matrix of the curve at `ξ = ζ + iρ`. The characteristics obey reality
//! conditions tied to the branch-pair kinds; the phase factor is forced by
//! the lattice shift in the conjugation identity and can be disabled to
//! demonstrate that necessity. Alongside the potential the module evaluates
//! the conjugation identity, the Fay reduction of the real part, the Ernst
//! equation residual by centered finite differences through the whole
//! pipeline, and the line integrals for the metric functions `A` and `k`.

use num_complex::Complex64;
use thiserror::Error;

use crate::surface::{
    surface_analysis, BranchPair, PairKind, RiemannMatrix, SpectralData, SurfaceError,
    SurfaceParams,
};
use crate::theta::{Characteristics, ThetaContext, ThetaError};

#[derive(Debug, Error)]
pub enum ErnstError {
    #[error("theta denominator vanishes at (ρ={rho}, ζ={zeta}): theta divisor hit")]
    ThetaDivisorHit { rho: f64, zeta: f64 },
    #[error("stencil point (ρ={rho}, ζ={zeta}) failed: {detail}")]
    StencilDegenerate { rho: f64, zeta: f64, detail: String },
    #[error("path increment {index} differs from its neighbor by more than 50%")]
    PathTooCoarse { index: usize },
    #[error("invalid solution spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Theta(#[from] ThetaError),
}

/// Which form of the potential to evaluate: the plain one, or the
/// equivalent shifted form whose theta arguments carry `Δ/2 = diag(Re B)/2`
/// and whose reality condition is `Re(q) + R·p = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    #[default]
    Standard,
    Shifted,
}

/// Solution parameters: branch pairs, characteristics and flags.
#[derive(Debug, Clone)]
pub struct SolutionSpec {
    pairs: Vec<BranchPair>,
    p: Vec<f64>,
    q_im: Vec<f64>,
    q_re_override: Option<Vec<f64>>,
    enforce_reality: bool,
    include_phase: bool,
    variant: Variant,
}

impl SolutionSpec {
    pub fn new(pairs: Vec<BranchPair>, p: Vec<f64>, q_im: Vec<f64>) -> Result<Self, ErnstError> {
        if pairs.is_empty() {
            return Err(ErnstError::InvalidSpec("no branch pairs".into()));
        }
        if p.len() != pairs.len() || q_im.len() != pairs.len() {
            return Err(ErnstError::InvalidSpec(format!(
                "p and q_im must have length {} (the genus)",
                pairs.len()
            )));
        }
        if !p.iter().chain(q_im.iter()).all(|x| x.is_finite()) {
            return Err(ErnstError::InvalidSpec("non-finite characteristics".into()));
        }
        Ok(Self {
            pairs,
            p,
            q_im,
            q_re_override: None,
            enforce_reality: true,
            include_phase: true,
            variant: Variant::Standard,
        })
    }

    /// Disables the reality conditions and fixes Re(q) explicitly; the
    /// negative controls use this to break the conjugation identity on
    /// purpose.
    pub fn with_re_q_override(mut self, q_re: Vec<f64>) -> Result<Self, ErnstError> {
        if q_re.len() != self.genus() {
            return Err(ErnstError::InvalidSpec(
                "Re(q) override length must equal the genus".into(),
            ));
        }
        self.q_re_override = Some(q_re);
        self.enforce_reality = false;
        Ok(self)
    }

    pub fn with_phase(mut self, include_phase: bool) -> Self {
        self.include_phase = include_phase;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn genus(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[BranchPair] {
        &self.pairs
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn include_phase(&self) -> bool {
        self.include_phase
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn enforce_reality(&self) -> bool {
        self.enforce_reality
    }
}

/// A point in Weyl coordinates, off the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPoint {
    pub rho: f64,
    pub zeta: f64,
}

impl WorldPoint {
    pub fn new(rho: f64, zeta: f64) -> Self {
        Self { rho, zeta }
    }

    pub fn xi(&self) -> Complex64 {
        Complex64::new(self.zeta, self.rho)
    }
}

/// Evaluation knobs shared by all operations.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub quad_order: usize,
    pub series_eps: f64,
    /// Finite-difference step; `None` picks `1e-3·max(1, |ξ|)`.
    pub fd_step: Option<f64>,
    /// Relative floor under which a theta denominator counts as a divisor
    /// hit.
    pub eps_div: f64,
    /// Also compute the identity residual diagnostics per evaluation.
    pub with_diagnostics: bool,
    pub surface: SurfaceParams,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            quad_order: 64,
            series_eps: 1e-12,
            fd_step: None,
            eps_div: 1e-10,
            with_diagnostics: false,
            surface: SurfaceParams::default(),
        }
    }
}

impl EvalOptions {
    /// The step actually used at a point: the explicit one, or
    /// `1e-3·max(1, |ξ|)`.
    pub fn fd_step_at(&self, pt: &WorldPoint) -> f64 {
        self.fd_step.unwrap_or(1e-3 * pt.xi().norm().max(1.0))
    }
}

/// Characteristics with the reality conditions of the chosen variant baked
/// into Re(q): for the standard form, `(1/2)Σ_{k≠j} p_k` on conjugate pairs
/// and `−1/4 + (1/2)Σ_k p_k` on real pairs; for the shifted form,
/// `Re(q) = −R·p`.
pub fn build_characteristics(spec: &SolutionSpec) -> Characteristics {
    let g = spec.genus();
    let p_sum: f64 = spec.p.iter().sum();
    let q_re: Vec<f64> = if spec.enforce_reality {
        (0..g)
            .map(|j| match (spec.variant, spec.pairs[j].kind()) {
                (Variant::Standard, PairKind::Conjugate) => 0.5 * (p_sum - spec.p[j]),
                (Variant::Standard, PairKind::RealPair) => -0.25 + 0.5 * p_sum,
                (Variant::Shifted, PairKind::Conjugate) => 0.5 * (p_sum - spec.p[j]),
                (Variant::Shifted, PairKind::RealPair) => 0.5 * p_sum,
            })
            .collect()
    } else {
        spec.q_re_override
            .clone()
            .unwrap_or_else(|| vec![0.0; g])
    };
    let q: Vec<Complex64> = q_re
        .iter()
        .zip(&spec.q_im)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    Characteristics::new(spec.p.clone(), q)
}

/// Everything needed to evaluate thetas at one world point.
struct PointContext {
    ctx: ThetaContext,
    u: Vec<Complex64>,
    half: Vec<f64>,
    /// Δ/2 for the shifted variant, zero otherwise.
    arg_shift: Vec<f64>,
    phase: Complex64,
    pt: WorldPoint,
    eps_div: f64,
}

impl PointContext {
    fn build(spec: &SolutionSpec, pt: &WorldPoint, opts: &EvalOptions) -> Result<Self, ErnstError> {
        let sd = SpectralData::new(pt.zeta, pt.rho, spec.pairs.to_vec(), opts.surface.clone())?;
        let analysis = surface_analysis(&sd, opts.quad_order)?;
        let (rm, abel) = (analysis.rm, analysis.abel);
        let arg_shift = match spec.variant {
            Variant::Standard => vec![0.0; rm.genus()],
            Variant::Shifted => rm.delta().iter().map(|d| 0.5 * d).collect(),
        };
        let chars = build_characteristics(spec);
        let ctx = ThetaContext::new(rm, chars, opts.series_eps)?;
        let phase = if spec.include_phase {
            let s: f64 = spec.p.iter().sum();
            (Complex64::new(0.0, -std::f64::consts::PI * s)).exp()
        } else {
            Complex64::new(1.0, 0.0)
        };
        Ok(Self {
            ctx,
            u: abel.to_inf_plus,
            half: abel.half_lattice,
            arg_shift,
            phase,
            pt: *pt,
            eps_div: opts.eps_div,
        })
    }

    fn rm(&self) -> &RiemannMatrix {
        self.ctx.riemann_matrix()
    }

    /// Theta argument with the variant shift applied.
    fn arg(&self, base: &[Complex64]) -> Vec<Complex64> {
        base.iter()
            .zip(&self.arg_shift)
            .map(|(b, s)| b + s)
            .collect()
    }

    fn u_neg(&self) -> Vec<Complex64> {
        self.u.iter().map(|z| -z).collect()
    }

    fn half_plus_u(&self, sign: f64) -> Vec<Complex64> {
        self.u
            .iter()
            .zip(&self.half)
            .map(|(u, h)| h + sign * u)
            .collect()
    }

    fn ratio(
        &self,
        num_arg: &[Complex64],
        den_arg: &[Complex64],
    ) -> Result<Complex64, ErnstError> {
        let num = self.ctx.theta(&self.arg(num_arg))?;
        let (den, den_scale) = self.ctx.theta_with_scale(&self.arg(den_arg))?;
        if den.norm() < self.eps_div * num.norm().max(den_scale) {
            return Err(ErnstError::ThetaDivisorHit {
                rho: self.pt.rho,
                zeta: self.pt.zeta,
            });
        }
        Ok(num / den)
    }

    /// `E = phase · Θ(u) / Θ(−u)` (arguments carrying the variant shift).
    fn potential(&self) -> Result<Complex64, ErnstError> {
        Ok(self.phase * self.ratio(&self.u, &self.u_neg())?)
    }

    /// Right side of the conjugation identity:
    /// `phase · Θ(∫_{ξ̄}^{∞⁺}) / Θ(∫_{ξ̄}^{∞⁻})` with
    /// `∫_{ξ̄}^{∞±} = (1/2,…,1/2) ± u`.
    fn conjugate_formula(&self) -> Result<Complex64, ErnstError> {
        Ok(self.phase * self.ratio(&self.half_plus_u(1.0), &self.half_plus_u(-1.0))?)
    }

    /// Fay reduction of the real part (complex before projection).
    fn real_part_formula(&self) -> Result<Complex64, ErnstError> {
        let g = self.ctx.genus();
        let zero_chars = Characteristics::zero(g);
        let ctx0 = ThetaContext::new(self.rm().clone(), zero_chars, self.ctx.eps())?;
        let zero = vec![Complex64::new(0.0, 0.0); g];
        let minus_u = self.u_neg();
        let half_minus_u = self.half_plus_u(-1.0);
        let half: Vec<Complex64> = self.half.iter().map(|&h| Complex64::new(h, 0.0)).collect();

        // Q from the p = q = 0 normalization, plain arguments.
        let q_num = ctx0.theta(&minus_u)? * ctx0.theta(&half_minus_u)?;
        let (q_den1, s1) = ctx0.theta_with_scale(&zero)?;
        let (q_den2, s2) = ctx0.theta_with_scale(&half)?;
        if q_den1.norm() < self.eps_div * s1 || q_den2.norm() < self.eps_div * s2 {
            return Err(ErnstError::ThetaDivisorHit {
                rho: self.pt.rho,
                zeta: self.pt.zeta,
            });
        }
        let q_factor = q_num / (q_den1 * q_den2);

        let num = self.ctx.theta(&self.arg(&zero))? * self.ctx.theta(&self.arg(&half))?;
        let (den1, ds1) = self.ctx.theta_with_scale(&self.arg(&minus_u))?;
        let (den2, ds2) = self.ctx.theta_with_scale(&self.arg(&half_minus_u))?;
        if den1.norm() < self.eps_div * ds1 || den2.norm() < self.eps_div * ds2 {
            return Err(ErnstError::ThetaDivisorHit {
                rho: self.pt.rho,
                zeta: self.pt.zeta,
            });
        }
        Ok(q_factor * self.phase * num / (den1 * den2))
    }
}

/// Potential value with diagnostics at one world point.
#[derive(Debug, Clone)]
pub struct ErnstEvaluation {
    pub value: Complex64,
    /// `f = Re(E)`, the metric norm function.
    pub f: f64,
    pub phase: Complex64,
    /// Relative residual of the conjugation identity, when requested.
    pub conj_residual: Option<f64>,
    /// Relative residual of the Fay real-part reduction, when requested.
    pub realpart_residual: Option<f64>,
    /// The two theta arguments (numerator, denominator).
    pub theta_args: (Vec<Complex64>, Vec<Complex64>),
}

/// Evaluates the potential at a world point.
pub fn ernst_potential(
    spec: &SolutionSpec,
    pt: &WorldPoint,
    opts: &EvalOptions,
) -> Result<ErnstEvaluation, ErnstError> {
    let pc = PointContext::build(spec, pt, opts)?;
    let value = pc.potential()?;
    let (conj_residual, realpart_residual) = if opts.with_diagnostics {
        let conj = pc.conjugate_formula()?;
        let fay = pc.real_part_formula()?;
        let scale = value.norm().max(opts.series_eps);
        (
            Some((conj - value.conj()).norm() / scale),
            Some((fay.re - value.re).abs() / scale),
        )
    } else {
        (None, None)
    };
    Ok(ErnstEvaluation {
        value,
        f: value.re,
        phase: pc.phase,
        conj_residual,
        realpart_residual,
        theta_args: (pc.arg(&pc.u), pc.arg(&pc.u_neg())),
    })
}

/// Complex conjugate of the potential through the conjugation identity
/// (same period matrix, arguments based at ξ̄), rather than by conjugating
/// the value.
pub fn conjugate_via_formula(
    spec: &SolutionSpec,
    pt: &WorldPoint,
    opts: &EvalOptions,
) -> Result<Complex64, ErnstError> {
    let pc = PointContext::build(spec, pt, opts)?;
    pc.conjugate_formula()
}

/// Real part of the potential through the Fay reduction. The returned value
/// is the real projection of the reduced expression; with the phase factor
/// disabled and Σp half-integer the reduction genuinely disagrees with
/// Re(E), which is the point of the phase-necessity control.
pub fn real_part_via_fay(
    spec: &SolutionSpec,
    pt: &WorldPoint,
    opts: &EvalOptions,
) -> Result<f64, ErnstError> {
    let pc = PointContext::build(spec, pt, opts)?;
    Ok(pc.real_part_formula()?.re)
}

/// Residuals of the Ernst equation by centered finite differences.
#[derive(Debug, Clone)]
pub struct PdeResidual {
    /// LHS − RHS of the complex-coordinate form.
    pub absolute: Complex64,
    /// |LHS − RHS| / max(|LHS|, |RHS|, eps).
    pub relative: f64,
    /// LHS − RHS of the Laplacian form `(E+Ē)ΔE − 8 E_ξ E_ξ̄`; the two
    /// forms are algebraically identical up to the factor 4.
    pub alt_absolute: Complex64,
}

/// Evaluates the PDE residual at `pt` with step `h` through the whole
/// pipeline (curve, periods, theta) at the five stencil points.
pub fn pde_residual(
    spec: &SolutionSpec,
    pt: &WorldPoint,
    h: f64,
    opts: &EvalOptions,
) -> Result<PdeResidual, ErnstError> {
    if h.is_nan() || h <= 0.0 || h > 1e-2 {
        return Err(ErnstError::InvalidSpec(format!(
            "finite-difference step {h} outside (0, 1e-2]"
        )));
    }
    if pt.rho <= 2.0 * h + opts.surface.rho_min {
        return Err(ErnstError::InvalidSpec(format!(
            "point at ρ = {} is within 2h of the axis exclusion zone",
            pt.rho
        )));
    }
    let eval = |rho: f64, zeta: f64| -> Result<Complex64, ErnstError> {
        let p = WorldPoint::new(rho, zeta);
        match PointContext::build(spec, &p, opts) {
            Ok(pc) => pc.potential(),
            Err(e) => Err(ErnstError::StencilDegenerate {
                rho,
                zeta,
                detail: e.to_string(),
            }),
        }
    };
    let e0 = eval(pt.rho, pt.zeta)?;
    let ez_p = eval(pt.rho, pt.zeta + h)?;
    let ez_m = eval(pt.rho, pt.zeta - h)?;
    let er_p = eval(pt.rho + h, pt.zeta)?;
    let er_m = eval(pt.rho - h, pt.zeta)?;

    let e_z = (ez_p - ez_m) / (2.0 * h);
    let e_r = (er_p - er_m) / (2.0 * h);
    let e_zz = (ez_p - 2.0 * e0 + ez_m) / (h * h);
    let e_rr = (er_p - 2.0 * e0 + er_m) / (h * h);

    let i = Complex64::new(0.0, 1.0);
    let e_xi = 0.5 * (e_z - i * e_r);
    let e_xibar = 0.5 * (e_z + i * e_r);
    let e_xixibar = 0.25 * (e_zz + e_rr);

    let two_f = e0 + e0.conj();
    let xi = pt.xi();
    let xibar_minus_xi = xi.conj() - xi;
    let lhs = two_f * (e_xixibar - (e_xibar - e_xi) / (2.0 * xibar_minus_xi));
    let rhs = 2.0 * e_xi * e_xibar;
    let absolute = lhs - rhs;
    let relative = absolute.norm() / lhs.norm().max(rhs.norm()).max(opts.series_eps);

    let laplacian = e_rr + e_zz + e_r / pt.rho;
    let alt_absolute = two_f * laplacian - 8.0 * e_xi * e_xibar;

    Ok(PdeResidual {
        absolute,
        relative,
        alt_absolute,
    })
}

/// Metric functions along a path, gauged to zero at the first vertex.
#[derive(Debug, Clone)]
pub struct MetricFields {
    pub point: WorldPoint,
    pub a_field: f64,
    pub k_field: f64,
    /// `f = Re(E)` at the vertex.
    pub f: f64,
}

/// Integrates `dA = 2·Re(A_ξ dξ)` and `dk = 2·Re(k_ξ dξ)` along the
/// polyline by the trapezoid rule, with `A_ξ = 2ρ (E−Ē)_ξ / (E+Ē)²` and
/// `k_ξ = 2iρ E_ξ E_ξ̄ / (E+Ē)²` from the same centered stencils as the PDE
/// residual.
pub fn metric_quadratures(
    spec: &SolutionSpec,
    path: &[WorldPoint],
    h: f64,
    opts: &EvalOptions,
) -> Result<Vec<MetricFields>, ErnstError> {
    if path.is_empty() {
        return Err(ErnstError::InvalidSpec("empty path".into()));
    }
    if h.is_nan() || h <= 0.0 || h > 1e-2 {
        return Err(ErnstError::InvalidSpec(format!(
            "finite-difference step {h} outside (0, 1e-2]"
        )));
    }
    for (k, win) in path.windows(2).enumerate() {
        let d = (win[1].xi() - win[0].xi()).norm();
        if d > 10.0 * h {
            return Err(ErnstError::InvalidSpec(format!(
                "path vertices {k} and {} are {d:.3e} apart, more than 10·h",
                k + 1
            )));
        }
    }

    struct VertexData {
        e0: Complex64,
        a_xi: Complex64,
        k_xi: Complex64,
    }
    let mut vertices = Vec::with_capacity(path.len());
    for pt in path {
        if pt.rho <= 2.0 * h + opts.surface.rho_min {
            return Err(ErnstError::InvalidSpec(format!(
                "path vertex at ρ = {} is within 2h of the axis",
                pt.rho
            )));
        }
        let eval = |rho: f64, zeta: f64| -> Result<Complex64, ErnstError> {
            let p = WorldPoint::new(rho, zeta);
            PointContext::build(spec, &p, opts)?.potential()
        };
        let e0 = eval(pt.rho, pt.zeta)?;
        let e_z = (eval(pt.rho, pt.zeta + h)? - eval(pt.rho, pt.zeta - h)?) / (2.0 * h);
        let e_r = (eval(pt.rho + h, pt.zeta)? - eval(pt.rho - h, pt.zeta)?) / (2.0 * h);
        let i = Complex64::new(0.0, 1.0);
        let e_xi = 0.5 * (e_z - i * e_r);
        let e_xibar = 0.5 * (e_z + i * e_r);
        let two_f = e0 + e0.conj();
        let denom = two_f * two_f;
        // Derivatives of the conjugate field: Ē_ξ = conj(E_ξ̄).
        let a_xi = 2.0 * pt.rho * (e_xi - e_xibar.conj()) / denom;
        let k_xi = 2.0 * i * pt.rho * e_xi * e_xibar.conj() / denom;
        vertices.push(VertexData { e0, a_xi, k_xi });
    }

    // Trapezoid increments first; the coarseness check compares neighbors
    // against the increment scale of the whole path, only within runs of a
    // consistent travel direction (corners jump by design), and ignores
    // roundoff-sized increments.
    let mut inc = Vec::with_capacity(path.len().saturating_sub(1));
    let mut dxis = Vec::with_capacity(path.len().saturating_sub(1));
    for n in 1..path.len() {
        let dxi = path[n].xi() - path[n - 1].xi();
        let da = 2.0 * (0.5 * (vertices[n - 1].a_xi + vertices[n].a_xi) * dxi).re;
        let dk = 2.0 * (0.5 * (vertices[n - 1].k_xi + vertices[n].k_xi) * dxi).re;
        inc.push((da, dk));
        dxis.push(dxi);
    }
    let scale_a = inc.iter().map(|(a, _)| a.abs()).fold(0.0, f64::max);
    let scale_k = inc.iter().map(|(_, k)| k.abs()).fold(0.0, f64::max);
    for (n, win) in inc.windows(2).enumerate() {
        let straight = {
            let (u, v) = (dxis[n], dxis[n + 1]);
            (u * v.conj()).re > 0.95 * u.norm() * v.norm()
        };
        if !straight {
            continue;
        }
        let ((pa, pk), (da, dk)) = (win[0], win[1]);
        let sig_a = da.abs().max(pa.abs());
        let sig_k = dk.abs().max(pk.abs());
        let jump_a = sig_a > 1e-12 + 0.1 * scale_a && (da - pa).abs() > 0.5 * sig_a;
        let jump_k = sig_k > 1e-12 + 0.1 * scale_k && (dk - pk).abs() > 0.5 * sig_k;
        if jump_a || jump_k {
            return Err(ErnstError::PathTooCoarse { index: n + 1 });
        }
    }

    let mut out = Vec::with_capacity(path.len());
    let mut a = 0.0f64;
    let mut k_val = 0.0f64;
    out.push(MetricFields {
        point: path[0],
        a_field: 0.0,
        k_field: 0.0,
        f: vertices[0].e0.re,
    });
    for (n, (da, dk)) in inc.into_iter().enumerate() {
        a += da;
        k_val += dk;
        out.push(MetricFields {
            point: path[n + 1],
            a_field: a,
            k_field: k_val,
            f: vertices[n + 1].e0.re,
        });
    }
    Ok(out)
}
