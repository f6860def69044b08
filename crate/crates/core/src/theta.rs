//! Multi-dimensional theta functions with characteristics.
//!
//! `Θ_pq(z, B) = Σ_{n∈ℤ^g} exp(πi⟨n+p, B(n+p)⟩ + 2πi⟨n+p, z+q⟩)`, summed
//! over the lattice points inside an ellipsoid chosen from the Cholesky
//! factor of Im(B). The truncation is certified at run time: the outermost
//! unit shell of the ellipsoid must contribute less than a fraction of the
//! target tolerance, otherwise the radius grows and the sum is repeated.
//!
//! On top of the plain series the module provides the quasi-periodicity
//! check, the conjugation constancy that holds when 2·Re(B) is integer, odd
//! half-integer characteristics with their nonsingularity certificate, and
//! the Fay cross-ratio residual in the spinor-cancelled form.

use num_complex::Complex64;
use thiserror::Error;

use crate::numeric::solve_with_cholesky;
use crate::surface::RiemannMatrix;

#[derive(Debug, Error)]
pub enum ThetaError {
    #[error("truncation ellipsoid would contain more than {max} lattice points")]
    RadiusOverflow { max: usize },
    #[error("2·Re(B) must have integer entries for the conjugation identity (entry ({i},{j}) = {value})")]
    PreconditionRealPart { i: usize, j: usize, value: f64 },
    #[error("all probe points landed on near-zeros of theta")]
    DegenerateProbe,
    #[error("no nonsingular odd half-integer characteristic found")]
    NoneFound,
    #[error("all Fay terms are below the working tolerance")]
    DegenerateConfiguration,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

const MAX_LATTICE_POINTS: usize = 100_000_000;

/// Characteristics `p ∈ ℝ^g`, `q ∈ ℂ^g`. Reality constraints live with the
/// Ernst assembly so that deliberately violated characteristics can be used
/// as negative controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristics {
    pub p: Vec<f64>,
    pub q: Vec<Complex64>,
}

impl Characteristics {
    pub fn new(p: Vec<f64>, q: Vec<Complex64>) -> Self {
        assert_eq!(p.len(), q.len(), "p and q must have equal length");
        Self { p, q }
    }

    pub fn zero(g: usize) -> Self {
        Self {
            p: vec![0.0; g],
            q: vec![Complex64::new(0.0, 0.0); g],
        }
    }

    pub fn genus(&self) -> usize {
        self.p.len()
    }
}

/// A period matrix with characteristics and a certified truncation radius.
#[derive(Debug, Clone)]
pub struct ThetaContext {
    rm: RiemannMatrix,
    chars: Characteristics,
    eps: f64,
    radius: f64,
}

impl ThetaContext {
    pub fn new(
        rm: RiemannMatrix,
        chars: Characteristics,
        eps: f64,
    ) -> Result<Self, ThetaError> {
        if chars.genus() != rm.genus() {
            return Err(ThetaError::DimensionMismatch(format!(
                "characteristics of length {} against genus {}",
                chars.genus(),
                rm.genus()
            )));
        }
        let eps = eps.max(1e-15);
        let g = rm.genus() as f64;
        // Conservative closed form in the Cholesky metric; the shell
        // certificate in the summation enforces correctness regardless.
        let radius = ((eps.recip().ln() + g * 10f64.ln()) / std::f64::consts::PI).sqrt() + 2.0;
        Ok(Self {
            rm,
            chars,
            eps,
            radius: radius.max(1.0),
        })
    }

    pub fn genus(&self) -> usize {
        self.rm.genus()
    }

    pub fn riemann_matrix(&self) -> &RiemannMatrix {
        &self.rm
    }

    pub fn characteristics(&self) -> &Characteristics {
        &self.chars
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Series value at `z`.
    pub fn theta(&self, z: &[Complex64]) -> Result<Complex64, ThetaError> {
        Ok(self.sum(z, false)?.value)
    }

    /// Term-wise differentiated series (∂/∂z_k) at `z`.
    pub fn theta_gradient(&self, z: &[Complex64]) -> Result<Vec<Complex64>, ThetaError> {
        Ok(self.sum(z, true)?.gradient)
    }

    /// Value together with the magnitude of the largest series term, the
    /// natural scale for zero certificates.
    pub fn theta_with_scale(&self, z: &[Complex64]) -> Result<(Complex64, f64), ThetaError> {
        let s = self.sum(z, false)?;
        Ok((s.value, s.term_scale))
    }

    /// Quasi-periodicity residual
    /// `|Θ(z+m) − e^{2πi⟨p,m⟩}Θ(z)| / (|Θ(z)| + eps)` for an integer shift.
    pub fn lattice_shift_check(&self, z: &[Complex64], m: &[i64]) -> Result<f64, ThetaError> {
        if m.len() != self.genus() {
            return Err(ThetaError::DimensionMismatch(
                "shift vector length".into(),
            ));
        }
        let shifted: Vec<Complex64> = z
            .iter()
            .zip(m)
            .map(|(zi, &mi)| zi + mi as f64)
            .collect();
        let lhs = self.theta(&shifted)?;
        let base = self.theta(z)?;
        let phase: f64 = self
            .chars
            .p
            .iter()
            .zip(m)
            .map(|(pi, &mi)| pi * mi as f64)
            .sum();
        let mult = (Complex64::new(0.0, 2.0 * std::f64::consts::PI * phase)).exp();
        Ok((lhs - mult * base).norm() / (base.norm() + self.eps))
    }

    /// Constant `α` with `conj Θ(z) = α·Θ(−z̄ − 2Re(q + Bp) + diag Re B)`,
    /// valid when `2·Re(B)` is integer, together with the maximal relative
    /// deviation over a deterministic set of probe points.
    pub fn conjugation_constant(&self) -> Result<(Complex64, f64), ThetaError> {
        let g = self.genus();
        let r = self.rm.r();
        for i in 0..g {
            for j in 0..g {
                let twice = 2.0 * r[(i, j)];
                if (twice - twice.round()).abs() > 1e-8 {
                    return Err(ThetaError::PreconditionRealPart {
                        i,
                        j,
                        value: r[(i, j)],
                    });
                }
            }
        }
        // w = −2·Re(q + B·p) + diag(Re B)
        let bp = self.rm.b().mul_vec(
            &self
                .chars
                .p
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect::<Vec<_>>(),
        );
        let w: Vec<Complex64> = (0..g)
            .map(|j| Complex64::new(-2.0 * (self.chars.q[j].re + bp[j].re) + r[(j, j)], 0.0))
            .collect();
        let arg_of = |z: &[Complex64]| -> Vec<Complex64> {
            z.iter().zip(&w).map(|(zi, wi)| -zi.conj() + wi).collect()
        };

        let probes = probe_points(g, 12);
        let zero = vec![Complex64::new(0.0, 0.0); g];
        let mut alpha = None;
        for z in std::iter::once(&zero).chain(probes.iter()) {
            let (num, scale_n) = self.theta_with_scale(z)?;
            let (den, scale_d) = self.theta_with_scale(&arg_of(z))?;
            if den.norm() > self.eps * scale_d.max(1.0) && num.norm() > self.eps * scale_n.max(1.0)
            {
                alpha = Some(num.conj() / den);
                break;
            }
        }
        let alpha = alpha.ok_or(ThetaError::DegenerateProbe)?;

        let mut max_dev = 0.0f64;
        for z in &probes {
            let lhs = self.theta(z)?.conj();
            let rhs = alpha * self.theta(&arg_of(z))?;
            let denom = lhs.norm().max(rhs.norm()).max(self.eps);
            max_dev = max_dev.max((lhs - rhs).norm() / denom);
        }
        Ok((alpha, max_dev))
    }

    fn sum(&self, z: &[Complex64], want_gradient: bool) -> Result<SumResult, ThetaError> {
        let g = self.genus();
        if z.len() != g {
            return Err(ThetaError::DimensionMismatch(format!(
                "argument of length {} against genus {g}",
                z.len()
            )));
        }
        // Ellipsoid center: n ≈ −p − (Im B)⁻¹ Im(z+q).
        let v: Vec<f64> = (0..g).map(|j| z[j].im + self.chars.q[j].im).collect();
        let c = solve_with_cholesky(self.rm.chol_im(), &v);
        let center: Vec<f64> = (0..g).map(|j| self.chars.p[j] + c[j]).collect();

        let mut radius = self.radius;
        for _ in 0..6 {
            let points = enumerate_ellipsoid(self.rm.chol_im(), &center, radius + 1.0)?;
            let mut exponents: Vec<(Complex64, f64)> = Vec::with_capacity(points.len());
            let mut max_re = f64::NEG_INFINITY;
            for (n, norm_val) in &points {
                let e = self.exponent(n, z);
                max_re = max_re.max(e.re);
                exponents.push((e, *norm_val));
            }
            if exponents.is_empty() {
                return Err(ThetaError::RadiusOverflow {
                    max: MAX_LATTICE_POINTS,
                });
            }

            let mut value = Complex64::new(0.0, 0.0);
            let mut gradient = vec![Complex64::new(0.0, 0.0); if want_gradient { g } else { 0 }];
            let mut shell_abs = 0.0f64;
            for ((e, norm_val), (n, _)) in exponents.iter().zip(points.iter()) {
                let t = (e - max_re).exp();
                if *norm_val <= radius {
                    value += t;
                    if want_gradient {
                        for k in 0..g {
                            let w = n[k] as f64 + self.chars.p[k];
                            gradient[k] +=
                                t * Complex64::new(0.0, 2.0 * std::f64::consts::PI * w);
                        }
                    }
                } else {
                    shell_abs += t.norm();
                }
            }
            // Shell certificate: the outermost unit shell must be negligible
            // against the result, otherwise the Gaussian decay has not set in
            // at this radius.
            if shell_abs <= 0.25 * self.eps * (value.norm() + (-max_re).exp()) {
                let scale = max_re.exp();
                return Ok(SumResult {
                    value: value * scale,
                    gradient: gradient.into_iter().map(|v| v * scale).collect(),
                    term_scale: scale,
                });
            }
            radius += 1.0 + 0.25 * radius;
        }
        Err(ThetaError::RadiusOverflow {
            max: MAX_LATTICE_POINTS,
        })
    }

    fn exponent(&self, n: &[i64], z: &[Complex64]) -> Complex64 {
        let g = self.genus();
        let b = self.rm.b();
        let mut quad = Complex64::new(0.0, 0.0);
        let mut lin = Complex64::new(0.0, 0.0);
        for i in 0..g {
            let wi = n[i] as f64 + self.chars.p[i];
            let mut bw = Complex64::new(0.0, 0.0);
            for j in 0..g {
                let wj = n[j] as f64 + self.chars.p[j];
                bw += b[(i, j)] * wj;
            }
            quad += wi * bw;
            lin += wi * (z[i] + self.chars.q[i]);
        }
        Complex64::new(0.0, std::f64::consts::PI) * quad
            + Complex64::new(0.0, 2.0 * std::f64::consts::PI) * lin
    }
}

struct SumResult {
    value: Complex64,
    gradient: Vec<Complex64>,
    term_scale: f64,
}

/// Integer points with `‖Lᵀ(n + center)‖ ≤ radius`, found by the standard
/// backward recursion on the upper-triangular factor. Returns each point
/// with its ellipsoid norm.
fn enumerate_ellipsoid(
    chol_lower: &crate::numeric::RealMatrix,
    center: &[f64],
    radius: f64,
) -> Result<Vec<(Vec<i64>, f64)>, ThetaError> {
    let g = center.len();
    // U = Lᵀ: row i has entries U[i][j] = L[j][i] for j ≥ i.
    let u = |i: usize, j: usize| chol_lower[(j, i)];
    let mut out: Vec<(Vec<i64>, f64)> = Vec::new();
    let mut n = vec![0i64; g];
    // rows i+1..g already fixed contribute partial[i+1] = Σ of squares;
    // linear term s_i = Σ_{j>i} U[i][j]·(n_j + center_j).
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        g: usize,
        i: isize,
        u: &dyn Fn(usize, usize) -> f64,
        center: &[f64],
        radius: f64,
        n: &mut Vec<i64>,
        sq_above: f64,
        out: &mut Vec<(Vec<i64>, f64)>,
    ) -> Result<(), ThetaError> {
        if i < 0 {
            out.push((n.clone(), (sq_above).sqrt()));
            if out.len() > MAX_LATTICE_POINTS {
                return Err(ThetaError::RadiusOverflow {
                    max: MAX_LATTICE_POINTS,
                });
            }
            return Ok(());
        }
        let i = i as usize;
        let mut s = 0.0;
        for j in (i + 1)..g {
            s += u(i, j) * (n[j] as f64 + center[j]);
        }
        let remaining = radius * radius - sq_above;
        if remaining < 0.0 {
            return Ok(());
        }
        let t = remaining.sqrt();
        let uii = u(i, i);
        let lo = ((-t - s) / uii - center[i]).ceil() as i64;
        let hi = ((t - s) / uii - center[i]).floor() as i64;
        for ni in lo..=hi {
            n[i] = ni;
            let row = uii * (ni as f64 + center[i]) + s;
            recurse(
                g,
                i as isize - 1,
                u,
                center,
                radius,
                n,
                sq_above + row * row,
                out,
            )?;
        }
        Ok(())
    }
    recurse(
        g,
        g as isize - 1,
        &u,
        center,
        radius,
        &mut n,
        0.0,
        &mut out,
    )?;
    Ok(out)
}

/// Van der Corput / Halton low-discrepancy value.
fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index + 1;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Deterministic probe points in a complex polydisc around the origin.
fn probe_points(g: usize, count: usize) -> Vec<Vec<Complex64>> {
    const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    (0..count)
        .map(|k| {
            (0..g)
                .map(|j| {
                    let re = halton(k, PRIMES[(2 * j) % PRIMES.len()]) - 0.5;
                    let im = 0.5 * (halton(k, PRIMES[(2 * j + 1) % PRIMES.len()]) - 0.5);
                    Complex64::new(re, im)
                })
                .collect()
        })
        .collect()
}

/// An odd half-integer characteristic whose theta gradient does not vanish
/// at the origin. Produced by [`find_odd_characteristic`].
#[derive(Debug, Clone, PartialEq)]
pub struct HalfIntegerCharacteristic {
    p_star: Vec<f64>,
    q_star: Vec<f64>,
}

impl HalfIntegerCharacteristic {
    pub fn p_star(&self) -> &[f64] {
        &self.p_star
    }

    pub fn q_star(&self) -> &[f64] {
        &self.q_star
    }

    /// 4⟨p*, q*⟩ mod 2; odd characteristics have parity 1.
    pub fn parity(&self) -> u8 {
        let s: f64 = self
            .p_star
            .iter()
            .zip(&self.q_star)
            .map(|(p, q)| 4.0 * p * q)
            .sum();
        (s.round() as i64).rem_euclid(2) as u8
    }

    pub fn characteristics(&self) -> Characteristics {
        Characteristics::new(
            self.p_star.clone(),
            self.q_star.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }
}

/// First (lexicographic) odd half-integer characteristic that certifies as
/// nonsingular for the given period matrix: `Θ(0)` vanishes against the
/// largest series term while `∇Θ(0)` does not.
pub fn find_odd_characteristic(
    rm: &RiemannMatrix,
    eps: f64,
) -> Result<HalfIntegerCharacteristic, ThetaError> {
    let g = rm.genus();
    for p_bits in 0u32..(1 << g) {
        for q_bits in 0u32..(1 << g) {
            if (p_bits & q_bits).count_ones() % 2 == 0 {
                continue;
            }
            let bit = |bits: u32, j: usize| {
                if bits & (1 << (g - 1 - j)) != 0 {
                    0.5
                } else {
                    0.0
                }
            };
            let cand = HalfIntegerCharacteristic {
                p_star: (0..g).map(|j| bit(p_bits, j)).collect(),
                q_star: (0..g).map(|j| bit(q_bits, j)).collect(),
            };
            let ctx = ThetaContext::new(rm.clone(), cand.characteristics(), eps)?;
            let zero = vec![Complex64::new(0.0, 0.0); g];
            let (value, scale) = ctx.theta_with_scale(&zero)?;
            let grad = ctx.theta_gradient(&zero)?;
            let grad_norm = grad.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if value.norm() <= 1e-10 * scale && grad_norm >= 1e-6 * scale {
                return Ok(cand);
            }
        }
    }
    Err(ThetaError::NoneFound)
}

/// Relative residual of Fay's trisecant identity on four points given by
/// their Abel vectors (one consistent base point), with every prime form
/// `E(x,y)` replaced by `e(x,y) = Θ_{p*q*}(A_x − A_y)`: the spinor factors
/// appear identically in all three terms and cancel in the cross-ratio.
#[allow(clippy::too_many_arguments)]
pub fn fay_residual(
    ctx: &ThetaContext,
    odd: &HalfIntegerCharacteristic,
    a_a: &[Complex64],
    a_b: &[Complex64],
    a_c: &[Complex64],
    a_d: &[Complex64],
    z: &[Complex64],
) -> Result<f64, ThetaError> {
    let g = ctx.genus();
    for v in [a_a, a_b, a_c, a_d, z] {
        if v.len() != g {
            return Err(ThetaError::DimensionMismatch(
                "Abel vector length against genus".into(),
            ));
        }
    }
    let odd_ctx = ThetaContext::new(
        ctx.riemann_matrix().clone(),
        odd.characteristics(),
        ctx.eps(),
    )?;
    let diff = |x: &[Complex64], y: &[Complex64]| -> Vec<Complex64> {
        x.iter().zip(y).map(|(a, b)| a - b).collect()
    };
    let add = |x: &[Complex64], y: &[Complex64]| -> Vec<Complex64> {
        x.iter().zip(y).map(|(a, b)| a + b).collect()
    };

    // A prime-form factor that nearly vanishes at distinct points marks the
    // spinor divisor of the odd characteristic (which passes through g−1
    // branch points): the cross-ratio is a 0/0 there and the cancellation
    // budget is gone. Exactly coincident points are fine — the identity
    // collapses term by term.
    let gate = 100.0 * ctx.eps().sqrt();
    let mut degenerate = false;
    let mut e = |x: &[Complex64], y: &[Complex64]| -> Result<Complex64, ThetaError> {
        let arg = diff(x, y);
        let (value, scale) = odd_ctx.theta_with_scale(&arg)?;
        let arg_zero = arg.iter().map(|v| v.norm()).sum::<f64>() < 1e-13;
        if !arg_zero && value.norm() < gate * scale {
            degenerate = true;
        }
        Ok(value)
    };

    let e_ca = e(a_c, a_a)?;
    let e_db = e(a_d, a_b)?;
    let e_cb = e(a_c, a_b)?;
    let e_ad = e(a_a, a_d)?;
    let e_cd = e(a_c, a_d)?;
    let e_ab = e(a_a, a_b)?;
    if degenerate {
        return Err(ThetaError::DegenerateConfiguration);
    }

    let t1 = e_ca
        * e_db
        * ctx.theta(&add(z, &diff(a_c, a_b)))?
        * ctx.theta(&add(z, &diff(a_d, a_a)))?;
    let t2 = e_cb
        * e_ad
        * ctx.theta(&add(z, &diff(a_c, a_a)))?
        * ctx.theta(&add(z, &diff(a_d, a_b)))?;
    let cross = add(&diff(a_d, a_a), &diff(a_c, a_b));
    let t3 = e_cd * e_ab * ctx.theta(z)? * ctx.theta(&add(z, &cross))?;

    let scale = t1.norm().max(t2.norm()).max(t3.norm());
    if scale < ctx.eps() {
        return Err(ThetaError::DegenerateConfiguration);
    }
    Ok((t1 + t2 - t3).norm() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ComplexMatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rm_from(entries: &[Vec<Complex64>]) -> RiemannMatrix {
        RiemannMatrix::from_matrix(ComplexMatrix::from_rows(entries), 1e-8).unwrap()
    }

    fn rm_i() -> RiemannMatrix {
        rm_from(&[vec![c(0.0, 1.0)]])
    }

    /// Plain box sum over |n| ≤ 20 per component, the independent oracle.
    fn theta_box(p: &[f64], q: &[Complex64], b: &ComplexMatrix, z: &[Complex64]) -> Complex64 {
        let g = p.len();
        let mut idx = vec![-20i64; g];
        let mut total = c(0.0, 0.0);
        loop {
            let w: Vec<f64> = (0..g).map(|j| idx[j] as f64 + p[j]).collect();
            let mut quad = c(0.0, 0.0);
            let mut lin = c(0.0, 0.0);
            for i in 0..g {
                for j in 0..g {
                    quad += b[(i, j)] * w[i] * w[j];
                }
                lin += (z[i] + q[i]) * w[i];
            }
            total += (c(0.0, std::f64::consts::PI) * quad
                + c(0.0, 2.0 * std::f64::consts::PI) * lin)
                .exp();
            let mut k = 0;
            loop {
                if k == g {
                    return total;
                }
                idx[k] += 1;
                if idx[k] <= 20 {
                    break;
                }
                idx[k] = -20;
                k += 1;
            }
        }
    }

    #[test]
    fn genus_one_value_matches_box_sum() {
        let ctx = ThetaContext::new(rm_i(), Characteristics::zero(1), 1e-12).unwrap();
        let z = [c(0.0, 0.0)];
        let val = ctx.theta(&z).unwrap();
        let oracle = theta_box(&[0.0], &[c(0.0, 0.0)], ctx.riemann_matrix().b(), &z);
        assert!((val - oracle).norm() < 1e-12);
        assert!((val.re - 1.0864348112).abs() < 1e-9);
        assert!(val.im.abs() < 1e-13);
    }

    #[test]
    fn odd_characteristic_vanishes_at_origin() {
        for b in [c(-0.5, 1.0), c(0.0, 0.7), c(0.3, 2.0)] {
            let ctx = ThetaContext::new(
                rm_from(&[vec![b]]),
                Characteristics::new(vec![0.5], vec![c(0.5, 0.0)]),
                1e-12,
            )
            .unwrap();
            let v = ctx.theta(&[c(0.0, 0.0)]).unwrap();
            assert!(v.norm() < 1e-12, "Θ(0) = {v} for B = {b}");
        }
    }

    #[test]
    fn block_diagonal_theta_factorizes() {
        let b2 = rm_from(&[
            vec![c(0.0, 1.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 2.0)],
        ]);
        let ctx = ThetaContext::new(b2, Characteristics::zero(2), 1e-12).unwrap();
        let val = ctx.theta(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let f1 = theta_box(
            &[0.0],
            &[c(0.0, 0.0)],
            &ComplexMatrix::from_rows(&[vec![c(0.0, 1.0)]]),
            &[c(0.0, 0.0)],
        );
        let f2 = theta_box(
            &[0.0],
            &[c(0.0, 0.0)],
            &ComplexMatrix::from_rows(&[vec![c(0.0, 2.0)]]),
            &[c(0.0, 0.0)],
        );
        assert!((val - f1 * f2).norm() < 1e-12);
    }

    #[test]
    fn radius_doubling_changes_nothing() {
        let ctx = ThetaContext::new(
            rm_from(&[vec![c(-0.5, 0.8)]]),
            Characteristics::new(vec![0.3], vec![c(0.1, 0.2)]),
            1e-12,
        )
        .unwrap();
        let mut wide = ctx.clone();
        wide.radius *= 2.0;
        let z = [c(0.3, -0.4)];
        let v1 = ctx.theta(&z).unwrap();
        let v2 = wide.theta(&z).unwrap();
        assert!((v1 - v2).norm() <= 1e-12 * (v1.norm() + 1.0));
    }

    #[test]
    fn gradient_vanishes_for_even_series() {
        let ctx = ThetaContext::new(rm_i(), Characteristics::zero(1), 1e-12).unwrap();
        let grad = ctx.theta_gradient(&[c(0.0, 0.0)]).unwrap();
        assert!(grad[0].norm() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cases = [
            (rm_i(), Characteristics::new(vec![0.5], vec![c(0.5, 0.0)])),
            (
                rm_from(&[vec![c(-0.5, 1.3)]]),
                Characteristics::new(vec![0.2], vec![c(0.1, -0.3)]),
            ),
        ];
        for (rm, chars) in cases {
            let ctx = ThetaContext::new(rm, chars, 1e-12).unwrap();
            for z0 in [c(0.0, 0.0), c(0.17, 0.05)] {
                let grad = ctx.theta_gradient(&[z0]).unwrap();
                let h = 1e-6;
                let fd = (ctx.theta(&[z0 + h]).unwrap() - ctx.theta(&[z0 - h]).unwrap())
                    / (2.0 * h);
                let scale = grad[0].norm().max(fd.norm()).max(1e-12);
                assert!(
                    (grad[0] - fd).norm() / scale < 1e-6,
                    "grad {} vs fd {fd}",
                    grad[0]
                );
            }
        }
    }

    #[test]
    fn lattice_shift_identity_and_half_phase() {
        let ctx = ThetaContext::new(
            rm_from(&[vec![c(-0.5, 0.9)]]),
            Characteristics::new(vec![0.5], vec![c(0.25, 0.1)]),
            1e-12,
        )
        .unwrap();
        let z = [c(0.2, -0.1)];
        assert!(ctx.lattice_shift_check(&z, &[0]).unwrap() < 1e-15);
        // p = 1/2, m = 1: the multiplier is e^{πi} = −1.
        let shifted = [z[0] + 1.0];
        let lhs = ctx.theta(&shifted).unwrap();
        let rhs = -ctx.theta(&z).unwrap();
        assert!((lhs - rhs).norm() / rhs.norm() < 1e-10);
        assert!(ctx.lattice_shift_check(&z, &[1]).unwrap() < 1e-10);
    }

    #[test]
    fn lattice_shift_genus_two() {
        let b2 = rm_from(&[
            vec![c(0.0, 1.1), c(-0.5, 0.3)],
            vec![c(-0.5, 0.3), c(-0.5, 0.9)],
        ]);
        let ctx = ThetaContext::new(
            b2,
            Characteristics::new(vec![0.3, -0.2], vec![c(0.1, 0.0), c(0.0, 0.15)]),
            1e-12,
        )
        .unwrap();
        let z = [c(0.05, 0.1), c(-0.3, 0.02)];
        assert!(ctx.lattice_shift_check(&z, &[1, -2]).unwrap() < 1e-10);
    }

    #[test]
    fn conjugation_constant_trivial_for_imaginary_matrix() {
        let ctx = ThetaContext::new(rm_i(), Characteristics::zero(1), 1e-12).unwrap();
        let (alpha, dev) = ctx.conjugation_constant().unwrap();
        assert!((alpha - c(1.0, 0.0)).norm() < 1e-12);
        assert!(dev < 1e-12);
    }

    #[test]
    fn conjugation_constant_half_integer_real_part() {
        // Re(B) = −1/2 is the real-pair pattern; the matching reality
        // condition for p = 1/2 gives Re(q) = 0.
        let ctx = ThetaContext::new(
            rm_from(&[vec![c(-0.5, 1.0)]]),
            Characteristics::new(vec![0.5], vec![c(0.0, 0.2)]),
            1e-12,
        )
        .unwrap();
        let (_, dev) = ctx.conjugation_constant().unwrap();
        assert!(dev < 1e-10, "deviation {dev}");
    }

    #[test]
    fn conjugation_constant_requires_half_integer_real_part() {
        let ctx = ThetaContext::new(
            rm_from(&[vec![c(0.3, 1.0)]]),
            Characteristics::zero(1),
            1e-12,
        )
        .unwrap();
        assert!(matches!(
            ctx.conjugation_constant(),
            Err(ThetaError::PreconditionRealPart { .. })
        ));
    }

    #[test]
    fn odd_characteristic_search_genus_one() {
        let odd = find_odd_characteristic(&rm_i(), 1e-12).unwrap();
        assert_eq!(odd.p_star(), &[0.5]);
        assert_eq!(odd.q_star(), &[0.5]);
        assert_eq!(odd.parity(), 1);
    }

    #[test]
    fn odd_characteristics_genus_two_count() {
        // Enumeration oracle: 6 of the 16 half-integer characteristics are
        // odd in genus 2.
        let mut odd_count = 0;
        for pb in 0u32..4 {
            for qb in 0u32..4 {
                if (pb & qb).count_ones() % 2 == 1 {
                    odd_count += 1;
                }
            }
        }
        assert_eq!(odd_count, 6);

        let b2 = rm_from(&[
            vec![c(0.0, 1.0), c(0.0, 0.2)],
            vec![c(0.0, 0.2), c(0.0, 1.5)],
        ]);
        let odd = find_odd_characteristic(&b2, 1e-12).unwrap();
        assert_eq!(odd.parity(), 1);
        let ctx = ThetaContext::new(b2, odd.characteristics(), 1e-12).unwrap();
        let zero = [c(0.0, 0.0), c(0.0, 0.0)];
        let (v, scale) = ctx.theta_with_scale(&zero).unwrap();
        assert!(v.norm() <= 1e-10 * scale);
        let grad = ctx.theta_gradient(&zero).unwrap();
        assert!(grad.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() >= 1e-6 * scale);
    }

    #[test]
    fn fay_collapses_for_coincident_points() {
        let rm = rm_from(&[vec![c(-0.5, 1.2)]]);
        let odd = find_odd_characteristic(&rm, 1e-12).unwrap();
        let ctx = ThetaContext::new(rm, Characteristics::new(vec![0.2], vec![c(0.1, 0.0)]), 1e-12)
            .unwrap();
        let a = [c(0.12, 0.03)];
        let b = a;
        let cc = [c(-0.4, 0.1)];
        let d = [c(0.3, -0.2)];
        let z = [c(0.05, 0.02)];
        let r = fay_residual(&ctx, &odd, &a, &b, &cc, &d, &z).unwrap();
        assert!(r < 1e-10, "coincident a=b residual {r}");

        // c = a: the surviving terms coincide identically.
        let r2 = fay_residual(&ctx, &odd, &a, &d, &a, &cc, &z).unwrap();
        assert!(r2 < 1e-10, "coincident c=a residual {r2}");
    }
}
