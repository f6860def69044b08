//! Leg integrators for the holomorphic differentials `x^{m-1} dx / y`.
//!
//! Square-root endpoint singularities at branch points are removed either by
//! the substitution `x = P + d·u²` (paths ending at a branch point P) or by
//! Gauss–Chebyshev weights (integrals along a straight branch cut). All
//! integrands carry a branch-tracked square-root factor seeded from a single
//! anchor value per curve, so every integral lives on one consistent sheet.

use num_complex::Complex64;

use super::geom::{continue_sqrt, refine_params, Seg};
use super::SurfaceError;
use crate::numeric::QuadratureRule;

pub(crate) fn poly_eval(roots: &[Complex64], x: Complex64) -> Complex64 {
    roots.iter().map(|r| x - r).product()
}

/// Monomial values 1, x, …, x^{g-1}.
fn monomials(x: Complex64, g: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(g);
    let mut p = Complex64::new(1.0, 0.0);
    for _ in 0..g {
        out.push(p);
        p *= x;
    }
    out
}

/// Evaluates squared values along `x_of` at `params` and tracks the root.
fn track_curve(
    x_of: &dyn Fn(f64) -> Complex64,
    sq_of: &dyn Fn(Complex64) -> Complex64,
    params: &[f64],
    seed: Complex64,
) -> Result<Vec<Complex64>, SurfaceError> {
    let sq: Vec<Complex64> = params.iter().map(|&t| sq_of(x_of(t))).collect();
    continue_sqrt(&sq, seed)
}

fn lookup(params: &[f64], t: f64) -> usize {
    params
        .binary_search_by(|p| p.total_cmp(&t))
        .expect("quadrature node missing from parameter set")
}

pub(crate) struct LegIntegral {
    pub moments: Vec<Complex64>,
    pub y_end: Complex64,
}

/// Tracks `y = sqrt(Q)` along a route without integrating, returning the end
/// value. Used to carry the sheet from the anchor to seed points.
pub(crate) fn track_route(
    segs: &[Seg],
    roots: &[Complex64],
    seed: Complex64,
    floor: f64,
) -> Result<Complex64, SurfaceError> {
    let mut y = seed;
    for seg in segs {
        let x_of = |t: f64| seg.at(t);
        let params = refine_params(&x_of, roots, &[], 0.0, 1.0, floor)?;
        let tracked = track_curve(&x_of, &|x| poly_eval(roots, x), &params, y)?;
        y = *tracked.last().unwrap();
    }
    Ok(y)
}

/// `∫ x^{m-1} dx / y` along a regular seg, `y` tracked from `y_start` at t=0.
pub(crate) fn integrate_plain(
    seg: &Seg,
    roots: &[Complex64],
    g: usize,
    gl: &QuadratureRule,
    y_start: Complex64,
    floor: f64,
) -> Result<LegIntegral, SurfaceError> {
    let x_of = |t: f64| seg.at(t);
    let nodes01: Vec<f64> = gl.nodes.iter().map(|&x| 0.5 * (x + 1.0)).collect();
    let params = refine_params(&x_of, roots, &nodes01, 0.0, 1.0, floor)?;
    let tracked = track_curve(&x_of, &|x| poly_eval(roots, x), &params, y_start)?;

    let mut moments = vec![Complex64::new(0.0, 0.0); g];
    for (k, &t) in nodes01.iter().enumerate() {
        let idx = lookup(&params, t);
        let x = seg.at(t);
        let y = tracked[idx];
        let w = 0.5 * gl.weights[k];
        let jac = seg.deriv(t);
        let base = jac / y * w;
        for (m, p) in monomials(x, g).into_iter().enumerate() {
            moments[m] += base * p;
        }
    }
    Ok(LegIntegral {
        moments,
        y_end: *tracked.last().unwrap(),
    })
}

/// `∫ x^{m-1} dx / y` from `from` into the branch point `branch`, under
/// `x = branch + d·u²`. `sub_roots` excludes `branch`; `y_from` is the
/// tracked value of y at `from`.
pub(crate) fn integrate_into_branch(
    branch: Complex64,
    from: Complex64,
    sub_roots: &[Complex64],
    g: usize,
    gl: &QuadratureRule,
    y_from: Complex64,
    floor: f64,
) -> Result<Vec<Complex64>, SurfaceError> {
    let d = from - branch;
    let x_of = |u: f64| branch + d * (u * u);
    let nodes01: Vec<f64> = gl.nodes.iter().map(|&x| 0.5 * (x + 1.0)).collect();
    let params = refine_params(&x_of, sub_roots, &nodes01, 0.0, 1.0, floor)?;

    // Track w with w² = d·S(x), descending from u = 1 where w = y(from).
    let mut rev = params.clone();
    rev.reverse();
    let sq_of = |x: Complex64| d * poly_eval(sub_roots, x);
    let tracked_rev = track_curve(&x_of, &sq_of, &rev, y_from)?;
    let mut tracked = tracked_rev;
    tracked.reverse();

    // Travel direction is from → branch, i.e. u from 1 to 0.
    let mut moments = vec![Complex64::new(0.0, 0.0); g];
    for (k, &u) in nodes01.iter().enumerate() {
        let idx = lookup(&params, u);
        let x = x_of(u);
        let w = 0.5 * gl.weights[k];
        let base = -2.0 * d / tracked[idx] * w;
        for (m, p) in monomials(x, g).into_iter().enumerate() {
            moments[m] += base * p;
        }
    }
    Ok(moments)
}

/// Tail `∫ x^{m-1} dx / y` from `ζ + i·r_t` out to infinity along the
/// vertical ray, under `x = ζ + i·r_t / t`.
pub(crate) fn integrate_tail(
    zeta: f64,
    r_t: f64,
    roots: &[Complex64],
    g: usize,
    gl: &QuadratureRule,
    y_start: Complex64,
    floor: f64,
) -> Result<Vec<Complex64>, SurfaceError> {
    let x_of = |t: f64| Complex64::new(zeta, r_t / t);
    let nodes01: Vec<f64> = gl.nodes.iter().map(|&x| 0.5 * (x + 1.0)).collect();
    let lo = 0.5 * nodes01[0];
    let params = refine_params(&x_of, roots, &nodes01, lo, 1.0, floor)?;

    let mut rev = params.clone();
    rev.reverse();
    let tracked_rev = track_curve(&x_of, &|x| poly_eval(roots, x), &rev, y_start)?;
    let mut tracked = tracked_rev;
    tracked.reverse();

    let mut moments = vec![Complex64::new(0.0, 0.0); g];
    for (k, &t) in nodes01.iter().enumerate() {
        let idx = lookup(&params, t);
        let x = x_of(t);
        let w = 0.5 * gl.weights[k];
        let jac = Complex64::new(0.0, r_t / (t * t));
        let base = jac / tracked[idx] * w;
        for (m, p) in monomials(x, g).into_iter().enumerate() {
            moments[m] += base * p;
        }
    }
    Ok(moments)
}

/// A straight branch cut `x(t) = mid + v·t`, endpoints at t = ±1.
pub(crate) struct CutParam {
    pub mid: Complex64,
    pub v: Complex64,
}

impl CutParam {
    pub fn at(&self, t: f64) -> Complex64 {
        self.mid + self.v * t
    }
}

/// Loop integral around a straight cut: `2 × ∫ x^{m-1} v dt / (c(t)·√(1-t²))`
/// summed with Gauss–Chebyshev weights, where `y = c(t)·√(1-t²)` and
/// `c² = -v²·S(x)` carries the analytic remainder over the foreign branch
/// points. `y_seed` is the tracked boundary value of y at `t_seed` on the
/// side the loop traverses in its E→F half, and `travel_sign` translates the
/// E→F traversal into increasing t.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_cut_loop(
    cut: &CutParam,
    foreign: &[Complex64],
    g: usize,
    cheb: &QuadratureRule,
    t_seed: f64,
    y_seed: Complex64,
    travel_sign: f64,
    floor: f64,
) -> Result<Vec<Complex64>, SurfaceError> {
    let x_of = |t: f64| cut.at(t);
    let mut include: Vec<f64> = cheb.nodes.clone();
    include.push(t_seed);
    let params = refine_params(&x_of, foreign, &include, -1.0, 1.0, floor)?;

    let sq_of = |x: Complex64| -cut.v * cut.v * poly_eval(foreign, x);
    let seed_idx = lookup(&params, t_seed);
    let c_seed = y_seed / (1.0 - t_seed * t_seed).sqrt();

    // Track outward from the seed in both directions.
    let fwd: Vec<f64> = params[seed_idx..].to_vec();
    let bwd: Vec<f64> = params[..=seed_idx].iter().rev().copied().collect();
    let fwd_vals = track_curve(&x_of, &sq_of, &fwd, c_seed)?;
    let bwd_vals = track_curve(&x_of, &sq_of, &bwd, c_seed)?;
    let mut c_vals = vec![Complex64::new(0.0, 0.0); params.len()];
    for (k, v) in bwd_vals.into_iter().enumerate() {
        c_vals[seed_idx - k] = v;
    }
    for (k, v) in fwd_vals.into_iter().enumerate() {
        c_vals[seed_idx + k] = v;
    }

    let mut moments = vec![Complex64::new(0.0, 0.0); g];
    for (k, &t) in cheb.nodes.iter().enumerate() {
        let idx = lookup(&params, t);
        let x = cut.at(t);
        let base = cut.v / c_vals[idx] * cheb.weights[k];
        for (m, p) in monomials(x, g).into_iter().enumerate() {
            moments[m] += base * p;
        }
    }
    for m in &mut moments {
        *m *= 2.0 * travel_sign;
    }
    Ok(moments)
}
