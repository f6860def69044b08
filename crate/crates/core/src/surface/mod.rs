//! The hyperelliptic curve family `y² = (x−ξ)(x−ξ̄)·Π (x−E_j)(x−F_j)`
//! parametrized by a spacetime point `ξ = ζ + iρ`, its normalized period
//! matrix, and the Abel vectors to the two points above infinity.
//!
//! Homology convention: `a_j` encircles the branch cut `[E_j, F_j]`
//! counterclockwise; `b_j` passes through the spectral cut `[ξ̄, ξ]` and the
//! cut `[E_j, F_j]`, realized as twice the integral along a routed path from
//! `ξ` to `E_j` that travels above all branch points. With this choice the
//! real part of the normalized period matrix is the constant half-integer
//! pattern (0 on conjugate-pair diagonal entries, −1/2 elsewhere) and the
//! Abel vector to `∞⁺` has real part (1/4, …, 1/4); both facts are enforced
//! at run time and never silently repaired, since a deviation signals a
//! homology realization inconsistent with everything built on top.

mod geom;
mod integrate;

use num_complex::Complex64;
use thiserror::Error;

use crate::numeric::{
    cholesky_spd, quadrature_nodes, ComplexMatrix, NumericError, QuadKind, QuadratureRule,
    RealMatrix,
};
use geom::{Obstacle, Router, Seg};
use integrate::{
    integrate_cut_loop, integrate_into_branch, integrate_plain, integrate_tail, poly_eval,
    track_route, CutParam,
};

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("branch continuation ambiguous at sample {index}; path too coarsely sampled")]
    BranchJumpDetected { index: usize },
    #[error("path sample {index} is within {dist:.3e} of a branch point")]
    SampleNearRoot { index: usize, dist: f64 },
    #[error("invalid spectral data: {0}")]
    InvalidData(String),
    #[error("contour cannot be routed with the required clearance: {0}")]
    ContourCollision(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("normalized period matrix is not symmetric (defect {defect:.3e})")]
    NotSymmetric { defect: f64 },
    #[error("imaginary part of the period matrix is not positive definite")]
    ImaginaryPartNotPositive,
    #[error(
        "real part of the period matrix deviates from the half-integer pattern \
         by {max_dev:.3e}:\n{dump}"
    )]
    RealPartMismatch { max_dev: f64, dump: String },
    #[error(
        "no integer shift brings Re(Abel vector) to (1/4,…,1/4); raw real parts {parts:?} \
         (path or sheet inconsistency)"
    )]
    AbelRealPartUnresolvable { parts: Vec<f64> },
}

/// Tolerances and safety margins for the curve machinery.
#[derive(Debug, Clone)]
pub struct SurfaceParams {
    /// Smallest admissible ρ; the curve degenerates on the axis.
    pub rho_min: f64,
    /// Hard floor for distances between branch points and from paths to
    /// branch points.
    pub sep_min: f64,
    /// Routing clearance as a fraction of the configuration scale.
    pub clearance_frac: f64,
    /// Allowed residual of the a-period normalization.
    pub tol_period: f64,
    /// Allowed symmetry defect of the period matrix.
    pub tol_sym: f64,
    /// Allowed deviation of Re(B) from the half-integer pattern.
    pub tol_real: f64,
    /// Allowed deviation of Re(Abel vector) from (1/4,…,1/4).
    pub tol_abel: f64,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        Self {
            rho_min: 1e-3,
            sep_min: 1e-6,
            clearance_frac: 0.05,
            tol_period: 1e-9,
            tol_sym: 1e-8,
            tol_real: 1e-8,
            tol_abel: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// `F = conj(E)`, branch cut vertical through the real axis.
    Conjugate,
    /// `E < F` both real, branch cut on the real axis.
    RealPair,
}

/// One pair of branch points `(E_j, F_j)`.
#[derive(Debug, Clone, Copy)]
pub struct BranchPair {
    e: Complex64,
    f: Complex64,
    kind: PairKind,
}

impl BranchPair {
    /// Conjugate pair from its upper point (`Im e > 0`).
    pub fn conjugate(e: Complex64) -> Result<Self, SurfaceError> {
        if e.im.is_nan() || e.im <= 0.0 || !e.re.is_finite() || !e.im.is_finite() {
            return Err(SurfaceError::InvalidData(format!(
                "conjugate pair needs Im(e) > 0, got {e}"
            )));
        }
        Ok(Self {
            e,
            f: e.conj(),
            kind: PairKind::Conjugate,
        })
    }

    /// Real pair `e < f`.
    pub fn real_pair(e: f64, f: f64) -> Result<Self, SurfaceError> {
        if e.is_nan() || f.is_nan() || e >= f || !e.is_finite() || !f.is_finite() {
            return Err(SurfaceError::InvalidData(format!(
                "real pair needs e < f, got ({e}, {f})"
            )));
        }
        Ok(Self {
            e: Complex64::new(e, 0.0),
            f: Complex64::new(f, 0.0),
            kind: PairKind::RealPair,
        })
    }

    pub fn e(&self) -> Complex64 {
        self.e
    }

    pub fn f(&self) -> Complex64 {
        self.f
    }

    pub fn kind(&self) -> PairKind {
        self.kind
    }

    /// σ_j = 1 for conjugate pairs, 0 for real pairs.
    pub fn sigma(&self) -> u8 {
        match self.kind {
            PairKind::Conjugate => 1,
            PairKind::RealPair => 0,
        }
    }
}

/// The spacetime point together with the `g` branch pairs: everything that
/// determines the curve.
#[derive(Debug, Clone)]
pub struct SpectralData {
    zeta: f64,
    rho: f64,
    pairs: Vec<BranchPair>,
    params: SurfaceParams,
    // Derived geometry.
    points: Vec<Complex64>,
    scale: f64,
    altitude: f64,
    far_radius: f64,
    tail_radius: f64,
    clearance: f64,
}

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

impl SpectralData {
    pub fn new(
        zeta: f64,
        rho: f64,
        pairs: Vec<BranchPair>,
        params: SurfaceParams,
    ) -> Result<Self, SurfaceError> {
        if !zeta.is_finite() || !rho.is_finite() {
            return Err(SurfaceError::InvalidData("non-finite world point".into()));
        }
        if rho < params.rho_min {
            return Err(SurfaceError::InvalidData(format!(
                "rho = {rho} below rho_min = {}",
                params.rho_min
            )));
        }
        if pairs.is_empty() {
            return Err(SurfaceError::InvalidData("at least one branch pair".into()));
        }
        let xi = Complex64::new(zeta, rho);
        let mut points = vec![xi, xi.conj()];
        for p in &pairs {
            points.push(p.e);
            points.push(p.f);
        }
        // Pairwise separation.
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let d = (points[i] - points[j]).norm();
                if d < params.sep_min {
                    return Err(SurfaceError::InvalidData(format!(
                        "branch points {} and {} are {d:.3e} apart (min {:.3e})",
                        points[i], points[j], params.sep_min
                    )));
                }
            }
        }
        // Every branch point must stay clear of every other pair's cut;
        // transversal cut crossings are fine, points on foreign cuts are not.
        let mut segments = vec![(xi.conj(), xi)];
        segments.extend(pairs.iter().map(|p| (p.e, p.f)));
        for (si, &(a, b)) in segments.iter().enumerate() {
            for (k, &p) in points.iter().enumerate() {
                let own = match si {
                    0 => k < 2,
                    j => k == 2 * j || k == 2 * j + 1,
                };
                if own {
                    continue;
                }
                let d = point_segment_distance(p, a, b);
                if d < params.sep_min {
                    return Err(SurfaceError::InvalidData(format!(
                        "branch point {p} lies within {d:.3e} of a foreign branch cut"
                    )));
                }
            }
        }

        let max_abs = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let max_im = points.iter().map(|p| p.im.abs()).fold(0.0, f64::max);
        let mut scale = 0.0f64;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                scale = scale.max((points[i] - points[j]).norm());
            }
        }
        let altitude = 1.25 * max_im + 0.5 * scale;
        let far_radius = 2.0 * max_abs + 0.5 * scale;
        let tail_radius = (2.0 * max_abs).max(1.5 * altitude);
        let clearance = params.clearance_frac * scale;

        Ok(Self {
            zeta,
            rho,
            pairs,
            params,
            points,
            scale,
            altitude,
            far_radius,
            tail_radius,
            clearance,
        })
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn xi(&self) -> Complex64 {
        Complex64::new(self.zeta, self.rho)
    }

    pub fn genus(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[BranchPair] {
        &self.pairs
    }

    /// All 2g+2 branch points, ordered `[ξ, ξ̄, E₁, F₁, …]`.
    pub fn branch_points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn params(&self) -> &SurfaceParams {
        &self.params
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn floor(&self) -> f64 {
        0.5 * self.params.sep_min
    }

    fn cut_param(&self, j: usize) -> CutParam {
        let p = &self.pairs[j];
        let mid = 0.5 * (p.e + p.f);
        let v = match p.kind {
            PairKind::Conjugate => p.e - mid,
            PairKind::RealPair => 0.5 * (p.f - p.e),
        };
        CutParam { mid, v }
    }

    /// Branch points other than pair `j`'s.
    fn foreign_of_pair(&self, j: usize) -> Vec<Complex64> {
        self.points
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != 2 * j + 2 && *k != 2 * j + 3)
            .map(|(_, p)| *p)
            .collect()
    }

    fn points_without(&self, exclude: Complex64) -> Vec<Complex64> {
        self.points
            .iter()
            .copied()
            .filter(|p| (p - exclude).norm() > 0.0)
            .collect()
    }

    /// Branch points with the directions of their attached cuts, for the
    /// router.
    fn obstacles(&self) -> Vec<Obstacle> {
        let down = -std::f64::consts::FRAC_PI_2;
        let up = std::f64::consts::FRAC_PI_2;
        let mut out = vec![
            Obstacle {
                position: self.xi(),
                cut_dir: Some(down),
            },
            Obstacle {
                position: self.xi().conj(),
                cut_dir: Some(up),
            },
        ];
        for p in &self.pairs {
            match p.kind {
                PairKind::Conjugate => {
                    out.push(Obstacle {
                        position: p.e,
                        cut_dir: Some(down),
                    });
                    out.push(Obstacle {
                        position: p.f,
                        cut_dir: Some(up),
                    });
                }
                PairKind::RealPair => {
                    out.push(Obstacle {
                        position: p.e,
                        cut_dir: Some(0.0),
                    });
                    out.push(Obstacle {
                        position: p.f,
                        cut_dir: Some(std::f64::consts::PI),
                    });
                }
            }
        }
        out
    }

    fn obstacles_without(&self, exclude: Complex64) -> Vec<Obstacle> {
        self.obstacles()
            .into_iter()
            .filter(|o| (o.position - exclude).norm() > 0.0)
            .collect()
    }

    fn obstacles_without_pair(&self, j: usize) -> Vec<Obstacle> {
        self.obstacles()
            .into_iter()
            .enumerate()
            .filter(|(k, _)| *k != 2 * j + 2 && *k != 2 * j + 3)
            .map(|(_, o)| o)
            .collect()
    }

    /// Real-axis abscissas of vertical cuts crossing the open interval
    /// (lo, hi); used to keep seed points of real cuts on a stable side.
    fn vertical_anchors_inside(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut xs: Vec<f64> = std::iter::once(self.zeta)
            .chain(
                self.pairs
                    .iter()
                    .filter(|p| p.kind == PairKind::Conjugate)
                    .map(|p| p.e.re),
            )
            .filter(|&x| x > lo && x < hi)
            .collect();
        xs.sort_by(f64::total_cmp);
        xs
    }
}

/// Continuous square-root values `y` with `y² = Π (x − root)` along a sampled
/// path. The first value is the product of principal square roots of the
/// individual factors at the first sample; every following value is the
/// branch nearest its predecessor.
pub fn track_sqrt(
    poly_roots: &[Complex64],
    path_samples: &[Complex64],
) -> Result<Vec<Complex64>, SurfaceError> {
    if path_samples.is_empty() {
        return Ok(Vec::new());
    }
    let sep = SurfaceParams::default().sep_min;
    for (index, s) in path_samples.iter().enumerate() {
        let dist = poly_roots
            .iter()
            .map(|r| (s - r).norm())
            .fold(f64::INFINITY, f64::min);
        if dist < sep {
            return Err(SurfaceError::SampleNearRoot { index, dist });
        }
    }
    let seed: Complex64 = poly_roots
        .iter()
        .map(|r| (path_samples[0] - r).sqrt())
        .product();
    let sq: Vec<Complex64> = path_samples
        .iter()
        .map(|&x| poly_eval(poly_roots, x))
        .collect();
    geom::continue_sqrt(&sq, seed)
}

// ---------------------------------------------------------------------------
// Periods and Abel vectors
// ---------------------------------------------------------------------------

/// Raw (unnormalized) period matrices of the monomial differentials
/// `x^{m-1} dx / y`: row `j` holds the `a_j`- resp. `b_j`-periods.
#[derive(Debug, Clone)]
pub struct RawPeriods {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
}

/// Coefficients `C` of the a-normalized differentials `ω_k = Σ_m C_{km}
/// x^{m-1} dx / y`.
#[derive(Debug, Clone)]
pub struct DifferentialBasis {
    coeffs: ComplexMatrix,
}

impl DifferentialBasis {
    pub fn coeffs(&self) -> &ComplexMatrix {
        &self.coeffs
    }

    /// Applies the normalization to a vector of raw monomial integrals.
    pub fn normalize(&self, raw: &[Complex64]) -> Vec<Complex64> {
        self.coeffs.mul_vec(raw)
    }
}

/// Normalized period matrix with its constant real part and the Cholesky
/// factor of its imaginary part.
#[derive(Debug, Clone)]
pub struct RiemannMatrix {
    b: ComplexMatrix,
    r: RealMatrix,
    chol_im: RealMatrix,
    delta: Vec<f64>,
}

impl RiemannMatrix {
    /// Wraps a complex symmetric matrix with positive definite imaginary
    /// part. The half-integer structure of the real part is a property of
    /// the curve pipeline and is checked there, not here.
    pub fn from_matrix(b: ComplexMatrix, tol_sym: f64) -> Result<Self, SurfaceError> {
        if b.rows() != b.cols() || b.rows() == 0 {
            return Err(SurfaceError::InvalidData(
                "period matrix must be square and non-empty".into(),
            ));
        }
        if !b.is_finite() {
            return Err(SurfaceError::InvalidData(
                "period matrix has non-finite entries".into(),
            ));
        }
        let mut defect = 0.0f64;
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                defect = defect.max((b[(i, j)] - b[(j, i)]).norm());
            }
        }
        if defect > tol_sym {
            return Err(SurfaceError::NotSymmetric { defect });
        }
        // The symmetry defect was accepted above at tol_sym; hand the
        // factorization the exactly symmetric part.
        let im_raw = b.imag_part();
        let mut im = RealMatrix::zeros(b.rows(), b.cols());
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                im[(i, j)] = 0.5 * (im_raw[(i, j)] + im_raw[(j, i)]);
            }
        }
        let chol_im =
            cholesky_spd(&im).map_err(|_| SurfaceError::ImaginaryPartNotPositive)?;
        let r = b.real_part();
        let delta = (0..b.rows()).map(|i| r[(i, i)]).collect();
        Ok(Self {
            b,
            r,
            chol_im,
            delta,
        })
    }

    pub fn genus(&self) -> usize {
        self.b.rows()
    }

    pub fn b(&self) -> &ComplexMatrix {
        &self.b
    }

    pub fn r(&self) -> &RealMatrix {
        &self.r
    }

    pub fn chol_im(&self) -> &RealMatrix {
        &self.chol_im
    }

    /// Diagonal of Re(B).
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }
}

/// Abel vectors to the points above infinity, in the path class with
/// `Re ∫_ξ^{∞⁺} = (1/4,…,1/4)`, plus the constant `∫_{ξ̄}^{ξ} = (1/2,…,1/2)`.
#[derive(Debug, Clone)]
pub struct AbelData {
    pub to_inf_plus: Vec<Complex64>,
    pub to_inf_minus: Vec<Complex64>,
    pub half_lattice: Vec<f64>,
}

/// Named points on the curve whose Abel vectors (base point ξ) are available
/// in closed form from the period data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfacePoint {
    Xi,
    XiBar,
    InfPlus,
    InfMinus,
    BranchE(usize),
    BranchF(usize),
}

/// Abel vector of a named surface point with base point ξ, consistent with
/// the representatives used by `AbelData`. The b-path target endpoints (the
/// top point of a conjugate cut, the right point of a real cut) carry their
/// honest corridor integrals; the partner endpoint differs by half an
/// a-period, a valid representative since the two half-shifts differ by a
/// full lattice vector.
pub fn abel_vector(
    sd: &SpectralData,
    analysis: &SurfaceAnalysis,
    pt: SurfacePoint,
) -> Vec<Complex64> {
    let g = analysis.rm.genus();
    let target = |j: usize| analysis.target_abel[j].clone();
    let with_half_step = |j: usize| -> Vec<Complex64> {
        let mut v = analysis.target_abel[j].clone();
        v[j] += 0.5;
        v
    };
    match pt {
        SurfacePoint::Xi => vec![Complex64::new(0.0, 0.0); g],
        SurfacePoint::XiBar => vec![Complex64::new(-0.5, 0.0); g],
        SurfacePoint::InfPlus => analysis.abel.to_inf_plus.clone(),
        SurfacePoint::InfMinus => analysis.abel.to_inf_minus.clone(),
        SurfacePoint::BranchE(j) => match sd.pairs[j].kind {
            PairKind::Conjugate => target(j),
            PairKind::RealPair => with_half_step(j),
        },
        SurfacePoint::BranchF(j) => match sd.pairs[j].kind {
            PairKind::Conjugate => with_half_step(j),
            PairKind::RealPair => target(j),
        },
    }
}

struct Workspace<'a> {
    sd: &'a SpectralData,
    g: usize,
    gl: QuadratureRule,
    cheb: QuadratureRule,
    top: Complex64,
    y_top: Complex64,
    trunk_down: Vec<Complex64>,
}

fn make_workspace(sd: &SpectralData, order: usize) -> Result<Workspace<'_>, SurfaceError> {
    if order < 16 {
        return Err(SurfaceError::InvalidData(format!(
            "quadrature order {order} below the minimum of 16"
        )));
    }
    let g = sd.genus();
    let gl = quadrature_nodes(QuadKind::GaussLegendre, order);
    let cheb = quadrature_nodes(QuadKind::GaussChebyshev, order);
    let floor = sd.floor();
    let points = sd.branch_points();
    let top = Complex64::new(sd.zeta, sd.altitude);

    // Sheet anchor far on the positive real axis: there the branch with
    // y ~ +x^{g+1} is the product of principal square roots.
    let anchor = Complex64::new(sd.far_radius, 0.0);
    let seed: Complex64 = points.iter().map(|r| (anchor - r).sqrt()).product();
    let all_obstacles = sd.obstacles();
    let router = Router {
        obstacles: &all_obstacles,
        clearance: sd.clearance,
        floor,
    };
    let umbilical = router.corridor(&[
        anchor,
        Complex64::new(sd.far_radius, sd.altitude),
        top,
    ])?;
    let y_top = track_route(&umbilical, points, seed, floor)?;

    // Trunk: from the corridor altitude straight down into ξ.
    let xi = sd.xi();
    let obstacles = sd.obstacles_without(xi);
    let router = Router {
        obstacles: &obstacles,
        clearance: sd.clearance,
        floor,
    };
    let legs = router.corridor(&[top, xi])?;
    let sub_roots = sd.points_without(xi);
    let trunk_down = integrate_chain(&legs, xi, points, &sub_roots, g, &gl, y_top, floor)?;

    Ok(Workspace {
        sd,
        g,
        gl,
        cheb,
        top,
        y_top,
        trunk_down,
    })
}

/// Integrates a routed chain of legs whose final leg ends at the branch
/// point `target`; all earlier legs are regular.
#[allow(clippy::too_many_arguments)]
fn integrate_chain(
    legs: &[Seg],
    target: Complex64,
    all_roots: &[Complex64],
    sub_roots: &[Complex64],
    g: usize,
    gl: &QuadratureRule,
    y_start: Complex64,
    floor: f64,
) -> Result<Vec<Complex64>, SurfaceError> {
    assert!(!legs.is_empty());
    let mut total = vec![Complex64::new(0.0, 0.0); g];
    let mut y = y_start;
    for seg in &legs[..legs.len() - 1] {
        let part = integrate_plain(seg, all_roots, g, gl, y, floor)?;
        for (t, p) in total.iter_mut().zip(&part.moments) {
            *t += p;
        }
        y = part.y_end;
    }
    let last = legs.last().unwrap();
    let from = match last {
        Seg::Line { a, .. } => *a,
        Seg::Arc { .. } => {
            return Err(SurfaceError::ContourCollision(
                "final approach to a branch point must be straight".into(),
            ))
        }
    };
    debug_assert!((last.end() - target).norm() < 1e-12);
    let part = integrate_into_branch(target, from, sub_roots, g, gl, y, floor)?;
    for (t, p) in total.iter_mut().zip(&part) {
        *t += p;
    }
    Ok(total)
}

/// Row `j` of the raw a-period matrix.
fn a_cycle_row(ws: &Workspace<'_>, j: usize) -> Result<Vec<Complex64>, SurfaceError> {
    let sd = ws.sd;
    let floor = sd.floor();
    let pair = &sd.pairs[j];
    let cut = sd.cut_param(j);
    let foreign = sd.foreign_of_pair(j);

    let dist_foreign = foreign
        .iter()
        .map(|p| point_segment_distance(*p, pair.e, pair.f))
        .fold(f64::INFINITY, f64::min);

    let (waypoints, t_seed, under): (Vec<Complex64>, f64, bool) = match pair.kind {
        PairKind::Conjugate => {
            // Land on the west side of the cut, halfway up to E.
            let off = 0.45 * sd.clearance.min(dist_foreign);
            let c = pair.e.re;
            let h = pair.e.im;
            let seed = Complex64::new(c, 0.5 * h);
            (
                vec![
                    ws.top,
                    Complex64::new(c - off, sd.altitude),
                    Complex64::new(c - off, 0.5 * h),
                    seed,
                ],
                0.5,
                false,
            )
        }
        PairKind::RealPair => {
            // Land from above, inside the crossing-free subinterval next to
            // the endpoint the b-path targets (F), so that the a-lift and
            // the b-lift stay on the same side of any cut crossing and the
            // seed side is stable under deformations of ξ.
            let e = pair.e.re;
            let f = pair.f.re;
            let crossings = sd.vertical_anchors_inside(e, f);
            let seed_x = match crossings.last() {
                Some(&x) => 0.5 * (x + f),
                None => 0.5 * (e + f),
            };
            let t_seed = (seed_x - cut.mid.re) / cut.v.re;
            (
                vec![
                    ws.top,
                    Complex64::new(seed_x, sd.altitude),
                    Complex64::new(seed_x, 0.0),
                ],
                t_seed,
                true,
            )
        }
    };

    let foreign_obstacles = sd.obstacles_without_pair(j);
    let router = Router {
        obstacles: &foreign_obstacles,
        clearance: sd.clearance,
        floor,
    };
    let legs = router.corridor(&waypoints)?;
    let y_land = track_route(&legs, sd.branch_points(), ws.y_top, floor)?;
    // The counterclockwise loop runs E→F on the under side of a real cut
    // (the tracked approach from above gives the over side) and on the west
    // side of a conjugate cut (where the approach already lands).
    let y_seed = if under { -y_land } else { y_land };
    let travel_sign = match pair.kind {
        PairKind::Conjugate => -1.0,
        PairKind::RealPair => 1.0,
    };
    integrate_cut_loop(
        &cut,
        &foreign,
        ws.g,
        &ws.cheb,
        t_seed,
        y_seed,
        travel_sign,
        floor,
    )
}

/// Corridor integral from the trunk top into one endpoint of cut `j`;
/// combined with the trunk this realizes half the `b_j`-period. The
/// endpoint — the top point of a conjugate cut, the right point of a real
/// cut — is the choice that lands Re(B) on the half-integer pattern.
fn b_rest(ws: &Workspace<'_>, j: usize) -> Result<Vec<Complex64>, SurfaceError> {
    let sd = ws.sd;
    let floor = sd.floor();
    let target = match sd.pairs[j].kind {
        PairKind::Conjugate => sd.pairs[j].e,
        PairKind::RealPair => sd.pairs[j].f,
    };
    let x_t = target.re;
    let lambda = 0.4
        * sd.points_without(target)
            .iter()
            .map(|p| (p - target).norm())
            .fold(f64::INFINITY, f64::min);
    let approach = target + Complex64::new(0.0, lambda);
    let obstacles = sd.obstacles_without(target);
    let router = Router {
        obstacles: &obstacles,
        clearance: sd.clearance,
        floor,
    };
    let mut legs = router.corridor(&[
        ws.top,
        Complex64::new(x_t, sd.altitude),
        approach,
    ])?;
    legs.push(Seg::Line {
        a: approach,
        b: target,
    });
    let sub_roots = sd.points_without(target);
    integrate_chain(
        &legs,
        target,
        sd.branch_points(),
        &sub_roots,
        ws.g,
        &ws.gl,
        ws.y_top,
        floor,
    )
}

/// Abscissa of the endpoint the b-path of pair `j` targets.
fn target_abscissa(sd: &SpectralData, j: usize) -> f64 {
    match sd.pairs[j].kind {
        PairKind::Conjugate => sd.pairs[j].e.re,
        PairKind::RealPair => sd.pairs[j].f.re,
    }
}

/// Handle orientation: cuts east of ζ carry the opposite orientation of
/// both their cycles. Without the side dependence, configurations with cuts
/// on both sides of the spectral cut admit no Abel path class with real
/// part (1/4,…,1/4) at all.
fn handle_sign(sd: &SpectralData, j: usize) -> f64 {
    if target_abscissa(sd, j) > sd.zeta {
        -1.0
    } else {
        1.0
    }
}

/// Periods of the corridor cycles before orientation and class corrections:
/// a-loops, the ξ→cut dumbbells, and the ξ→target half-dumbbell path
/// integrals (for Abel vectors of branch points).
struct CorridorPeriods {
    a_rows: Vec<Vec<Complex64>>,
    dumbbell_rows: Vec<Vec<Complex64>>,
}

fn compute_corridors(ws: &Workspace<'_>) -> Result<CorridorPeriods, SurfaceError> {
    let g = ws.g;
    let mut a_rows = Vec::with_capacity(g);
    let mut dumbbell_rows = Vec::with_capacity(g);
    for j in 0..g {
        a_rows.push(a_cycle_row(ws, j)?);
        let rest = b_rest(ws, j)?;
        let row: Vec<Complex64> = rest
            .iter()
            .zip(&ws.trunk_down)
            .map(|(r, t)| 2.0 * (r - t))
            .collect();
        dumbbell_rows.push(row);
    }
    Ok(CorridorPeriods {
        a_rows,
        dumbbell_rows,
    })
}

/// Everything the normalization yields at once.
struct NormalizedPeriods {
    raw: RawPeriods,
    basis: DifferentialBasis,
    rm: RiemannMatrix,
    /// Abel vectors ∫_ξ^{T_j} of the b-path targets, in the final basis.
    target_abel: Vec<Vec<Complex64>>,
}

fn normalize_periods(
    sd: &SpectralData,
    cp: &CorridorPeriods,
) -> Result<NormalizedPeriods, SurfaceError> {
    let g = sd.genus();
    let flips: Vec<f64> = (0..g).map(|j| handle_sign(sd, j)).collect();
    let a_final: Vec<Vec<Complex64>> = cp
        .a_rows
        .iter()
        .zip(&flips)
        .map(|(row, &s)| row.iter().map(|z| s * z).collect())
        .collect();
    let a = ComplexMatrix::from_rows(&a_final);
    let coeffs = a.transpose().solve(&ComplexMatrix::identity(g))?;
    // a-periods of the normalized basis must reproduce the identity.
    let mut check = coeffs.mul(&a.transpose());
    for i in 0..g {
        check[(i, i)] -= 1.0;
    }
    if check.max_norm() > sd.params.tol_period.max(1e-12) {
        return Err(SurfaceError::InvalidData(format!(
            "a-period normalization residual {:.3e} exceeds tolerance",
            check.max_norm()
        )));
    }

    let d_final: Vec<Vec<Complex64>> = cp
        .dumbbell_rows
        .iter()
        .zip(&flips)
        .map(|(row, &s)| row.iter().map(|z| s * z).collect())
        .collect();
    let b_pre = ComplexMatrix::from_rows(&d_final).mul(&coeffs.transpose());

    // The corridor dumbbells realize each b_j only up to integer multiples
    // of a-cycles, which show up as integer offsets of Re(B). Choosing the
    // representative is part of the construction; fractional deviations
    // still fail hard below.
    let pattern = real_pattern(&sd.pairs);
    let mut shift = RealMatrix::zeros(g, g);
    let mut b = b_pre.clone();
    for i in 0..g {
        for j in 0..g {
            let s = (b_pre[(i, j)].re - pattern[(i, j)]).round();
            shift[(i, j)] = s;
            b[(i, j)] -= s;
        }
    }
    let rm = RiemannMatrix::from_matrix(b, sd.params.tol_sym)?;

    let mut max_dev = 0.0f64;
    for i in 0..g {
        for j in 0..g {
            max_dev = max_dev.max((rm.r()[(i, j)] - pattern[(i, j)]).abs());
        }
    }
    if max_dev > sd.params.tol_real {
        let dump = format!(
            "Re(B) =\n{}\nexpected =\n{}",
            fmt_real_matrix(rm.r()),
            fmt_real_matrix(&pattern)
        );
        return Err(SurfaceError::RealPartMismatch { max_dev, dump });
    }

    // Raw b-periods of the final cycles: flipped dumbbells minus the integer
    // a-combination picked above.
    let mut b_raw_rows = d_final;
    for j in 0..g {
        for k in 0..g {
            let s = shift[(j, k)];
            if s != 0.0 {
                for m in 0..g {
                    b_raw_rows[j][m] -= s * a_final[k][m];
                }
            }
        }
    }

    // Abel vectors of the corridor targets (honest path integrals, no
    // cycle bookkeeping).
    let target_abel: Vec<Vec<Complex64>> = cp
        .dumbbell_rows
        .iter()
        .map(|row| {
            let half: Vec<Complex64> = row.iter().map(|z| 0.5 * z).collect();
            coeffs.mul_vec(&half)
        })
        .collect();

    Ok(NormalizedPeriods {
        raw: RawPeriods {
            a,
            b: ComplexMatrix::from_rows(&b_raw_rows),
        },
        basis: DifferentialBasis { coeffs },
        rm,
        target_abel,
    })
}

/// Raw a- and b-periods of the monomial differentials over the realized
/// homology basis.
pub fn raw_periods(sd: &SpectralData, order: usize) -> Result<RawPeriods, SurfaceError> {
    let ws = make_workspace(sd, order)?;
    let cp = compute_corridors(&ws)?;
    Ok(normalize_periods(sd, &cp)?.raw)
}

fn real_pattern(pairs: &[BranchPair]) -> RealMatrix {
    let g = pairs.len();
    let mut r = RealMatrix::zeros(g, g);
    for i in 0..g {
        for j in 0..g {
            r[(i, j)] = if i == j && pairs[i].kind == PairKind::Conjugate {
                0.0
            } else {
                -0.5
            };
        }
    }
    r
}

fn fmt_real_matrix(m: &RealMatrix) -> String {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| format!("{:+.6}", m[(i, j)]))
                .collect::<Vec<_>>()
                .join("  ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Normalized period matrix and the differential basis that produced it.
pub fn riemann_matrix(
    sd: &SpectralData,
    order: usize,
) -> Result<(DifferentialBasis, RiemannMatrix), SurfaceError> {
    let ws = make_workspace(sd, order)?;
    let cp = compute_corridors(&ws)?;
    let np = normalize_periods(sd, &cp)?;
    Ok((np.basis, np.rm))
}

fn compute_abel_raw(ws: &Workspace<'_>) -> Result<Vec<Complex64>, SurfaceError> {
    let sd = ws.sd;
    let exit_x = sd.zeta;
    let floor = sd.floor();
    let points = sd.branch_points();
    let exit = Complex64::new(exit_x, sd.tail_radius);
    let all_obstacles = sd.obstacles();
    let router = Router {
        obstacles: &all_obstacles,
        clearance: sd.clearance,
        floor,
    };
    let legs = router.corridor(&[ws.top, Complex64::new(exit_x, sd.altitude), exit])?;
    let mut total: Vec<Complex64> = ws.trunk_down.iter().map(|t| -t).collect();
    let mut y = ws.y_top;
    for seg in &legs {
        let part = integrate_plain(seg, points, ws.g, &ws.gl, y, floor)?;
        for (t, p) in total.iter_mut().zip(&part.moments) {
            *t += p;
        }
        y = part.y_end;
    }
    let tail = integrate_tail(exit_x, sd.tail_radius, points, ws.g, &ws.gl, y, floor)?;
    for (t, p) in total.iter_mut().zip(&tail) {
        *t += p;
    }
    Ok(total)
}

fn fix_quarter(u: &[Complex64], tol: f64) -> Option<Vec<Complex64>> {
    let mut out = u.to_vec();
    for z in &mut out {
        let k = (z.re - 0.25).round();
        if (z.re - 0.25 - k).abs() > tol {
            return None;
        }
        z.re -= k;
    }
    Some(out)
}

fn normalize_abel(
    sd: &SpectralData,
    basis: &DifferentialBasis,
    v_raw: &[Complex64],
) -> Result<AbelData, SurfaceError> {
    let u_raw = basis.normalize(v_raw);
    let tol = sd.params.tol_abel;
    // The raw integral lands on one of the two points above infinity; the
    // real-part normalization identifies which, and an integer shift fixes
    // the a-cycle ambiguity of the path.
    let neg: Vec<Complex64> = u_raw.iter().map(|z| -z).collect();
    let to_inf_plus = fix_quarter(&u_raw, tol)
        .or_else(|| fix_quarter(&neg, tol))
        .ok_or_else(|| SurfaceError::AbelRealPartUnresolvable {
            parts: u_raw.iter().map(|z| z.re).collect(),
        })?;
    let to_inf_minus = to_inf_plus.iter().map(|z| -z).collect();
    let half_lattice = vec![0.5; sd.genus()];
    Ok(AbelData {
        to_inf_plus,
        to_inf_minus,
        half_lattice,
    })
}

/// Abel vectors `∫_ξ^{∞±}` of the normalized differentials, adjusted by an
/// integer vector into the class with real part (1/4,…,1/4).
pub fn abel_to_infinity(
    sd: &SpectralData,
    basis: &DifferentialBasis,
    order: usize,
) -> Result<AbelData, SurfaceError> {
    let ws = make_workspace(sd, order)?;
    let v_raw = compute_abel_raw(&ws)?;
    normalize_abel(sd, basis, &v_raw)
}

/// Full curve analysis over one set of routed contours.
#[derive(Debug, Clone)]
pub struct SurfaceAnalysis {
    pub basis: DifferentialBasis,
    pub rm: RiemannMatrix,
    pub abel: AbelData,
    /// Abel vectors ∫_ξ^{T_j} of the b-path target endpoints.
    target_abel: Vec<Vec<Complex64>>,
}

/// Computes the differential basis, period matrix and Abel data sharing one
/// workspace of routed contours.
pub fn surface_analysis(sd: &SpectralData, order: usize) -> Result<SurfaceAnalysis, SurfaceError> {
    let ws = make_workspace(sd, order)?;
    let cp = compute_corridors(&ws)?;
    let np = normalize_periods(sd, &cp)?;
    let v_raw = compute_abel_raw(&ws)?;
    let abel = normalize_abel(sd, &np.basis, &v_raw)?;
    Ok(SurfaceAnalysis {
        basis: np.basis,
        rm: np.rm,
        abel,
        target_abel: np.target_abel,
    })
}
