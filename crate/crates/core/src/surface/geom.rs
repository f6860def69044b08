//! Contour geometry: path segments, obstacle-avoiding routing, adaptive
//! sampling, and continuous square-root branch tracking along sampled paths.

use num_complex::Complex64;

use super::SurfaceError;

const TAU: f64 = std::f64::consts::TAU;

/// One piece of an integration contour.
#[derive(Debug, Clone)]
pub(crate) enum Seg {
    Line {
        a: Complex64,
        b: Complex64,
    },
    /// Circular arc around `center`; the sweep from `th0` to `th1` is signed
    /// (negative sweep runs clockwise).
    Arc {
        center: Complex64,
        radius: f64,
        th0: f64,
        th1: f64,
    },
}

impl Seg {
    pub fn at(&self, t: f64) -> Complex64 {
        match *self {
            Seg::Line { a, b } => a + (b - a) * t,
            Seg::Arc {
                center,
                radius,
                th0,
                th1,
            } => {
                let th = th0 + (th1 - th0) * t;
                center + Complex64::new(radius * th.cos(), radius * th.sin())
            }
        }
    }

    pub fn deriv(&self, t: f64) -> Complex64 {
        match *self {
            Seg::Line { a, b } => b - a,
            Seg::Arc {
                center: _,
                radius,
                th0,
                th1,
            } => {
                let th = th0 + (th1 - th0) * t;
                Complex64::new(0.0, th1 - th0) * Complex64::new(radius * th.cos(), radius * th.sin())
            }
        }
    }

    pub fn end(&self) -> Complex64 {
        self.at(1.0)
    }
}

fn nearest_root_distance(roots: &[Complex64], x: Complex64) -> f64 {
    roots
        .iter()
        .map(|r| (x - r).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Adaptive parameter set on [lo, hi] for a curve `x_of`, fine enough that
/// consecutive samples satisfy the branch-tracking continuity contract
/// (the accumulated argument change of the defining polynomial stays well
/// below π between samples). `include` values are kept exactly.
pub(crate) fn refine_params(
    x_of: &dyn Fn(f64) -> Complex64,
    roots: &[Complex64],
    include: &[f64],
    lo: f64,
    hi: f64,
    floor: f64,
) -> Result<Vec<f64>, SurfaceError> {
    let mut base: Vec<f64> = Vec::with_capacity(include.len() + 2);
    base.push(lo);
    base.extend(include.iter().copied().filter(|t| *t > lo && *t < hi));
    base.push(hi);
    base.sort_by(f64::total_cmp);
    base.dedup();

    let mut out = vec![base[0]];
    for win in base.windows(2) {
        refine_into(x_of, roots, win[0], win[1], floor, &mut out, 0)?;
    }
    Ok(out)
}

fn refine_into(
    x_of: &dyn Fn(f64) -> Complex64,
    roots: &[Complex64],
    t0: f64,
    t1: f64,
    floor: f64,
    out: &mut Vec<f64>,
    depth: u32,
) -> Result<(), SurfaceError> {
    let x0 = x_of(t0);
    let x1 = x_of(t1);
    let d = nearest_root_distance(roots, x0).min(nearest_root_distance(roots, x1));
    if d < floor {
        return Err(SurfaceError::ContourCollision(format!(
            "path passes within {d:.3e} of a branch point (floor {floor:.3e})"
        )));
    }
    let limit = 0.5 * d / roots.len().max(1) as f64;
    if (x1 - x0).norm() <= limit {
        out.push(t1);
        return Ok(());
    }
    if depth >= 48 || out.len() > 400_000 {
        return Err(SurfaceError::ContourCollision(
            "path refinement budget exceeded".into(),
        ));
    }
    let tm = 0.5 * (t0 + t1);
    refine_into(x_of, roots, t0, tm, floor, out, depth + 1)?;
    refine_into(x_of, roots, tm, t1, floor, out, depth + 1)
}

/// Continues a square root along pre-evaluated squared values.
///
/// `seed` is the root of `sq[0]`; each following value picks the square root
/// closer to its predecessor and fails if the two choices are not clearly
/// separated (the path was sampled too coarsely).
pub(crate) fn continue_sqrt(
    sq: &[Complex64],
    seed: Complex64,
) -> Result<Vec<Complex64>, SurfaceError> {
    let mut out = Vec::with_capacity(sq.len());
    out.push(seed);
    let mut prev = seed;
    for (index, &q) in sq.iter().enumerate().skip(1) {
        let s = q.sqrt();
        let (near, far) = if (s - prev).norm() <= (-s - prev).norm() {
            (s, -s)
        } else {
            (-s, s)
        };
        let d_near = (near - prev).norm();
        let d_far = (far - prev).norm();
        if d_near.is_nan() || d_near >= 0.95 * d_far {
            return Err(SurfaceError::BranchJumpDetected { index });
        }
        out.push(near);
        prev = near;
    }
    Ok(out)
}

/// A branch point a contour must keep clear of. `cut_dir` is the direction
/// (angle) in which its branch cut leaves the point, when it has one; a
/// detour arc must not sweep across that ray, or the tracked sheet flips
/// against every other contour.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Obstacle {
    pub position: Complex64,
    pub cut_dir: Option<f64>,
}

/// Routes straight legs between consecutive waypoints, bulging around
/// obstacles that come within `clearance` of a leg. The detour arc avoids
/// the obstacle's attached branch cut; free points get the side left of the
/// travel direction.
pub(crate) struct Router<'a> {
    pub obstacles: &'a [Obstacle],
    pub clearance: f64,
    pub floor: f64,
}

impl Router<'_> {
    pub fn corridor(&self, waypoints: &[Complex64]) -> Result<Vec<Seg>, SurfaceError> {
        let mut segs = Vec::new();
        for win in waypoints.windows(2) {
            if (win[1] - win[0]).norm() == 0.0 {
                continue;
            }
            segs.extend(self.leg(win[0], win[1])?);
        }
        Ok(segs)
    }

    fn leg(&self, a: Complex64, b: Complex64) -> Result<Vec<Seg>, SurfaceError> {
        let dir = b - a;
        let len = dir.norm();
        let u = dir / len;

        // (t_entry, t_exit, obstacle, radius)
        let mut hits: Vec<(f64, f64, Obstacle, f64)> = Vec::new();
        for &o in self.obstacles {
            let p = o.position;
            let da = (p - a).norm();
            let db = (p - b).norm();
            if da < self.floor || db < self.floor {
                // The obstacle is one of the leg's own endpoints.
                continue;
            }
            let s = ((p - a) * u.conj()).re;
            let d = (p - (a + u * s)).norm();
            let r_eff = self.clearance.min(0.45 * da).min(0.45 * db);
            if s <= -r_eff || s >= len + r_eff {
                continue;
            }
            if d >= r_eff {
                if d < self.floor && s > 0.0 && s < len {
                    return Err(SurfaceError::ContourCollision(format!(
                        "leg passes within {d:.3e} of a branch point"
                    )));
                }
                continue;
            }
            let half = (r_eff * r_eff - d * d).sqrt();
            let t_in = (s - half) / len;
            let t_out = (s + half) / len;
            if t_out <= 0.0 || t_in >= 1.0 {
                continue;
            }
            if t_in < 0.0 || t_out > 1.0 {
                return Err(SurfaceError::ContourCollision(
                    "obstacle detour would overrun a leg endpoint".into(),
                ));
            }
            hits.push((t_in, t_out, o, r_eff));
        }
        hits.sort_by(|x, y| x.0.total_cmp(&y.0));
        for win in hits.windows(2) {
            if win[0].1 >= win[1].0 {
                return Err(SurfaceError::ContourCollision(
                    "overlapping obstacle detours".into(),
                ));
            }
        }

        let mut segs = Vec::new();
        let mut cursor = a;
        let th_left = (Complex64::new(0.0, 1.0) * u).arg();
        for (t_in, t_out, o, r) in hits {
            let entry = a + dir * t_in;
            let exit = a + dir * t_out;
            if (entry - cursor).norm() > 0.0 {
                segs.push(Seg::Line { a: cursor, b: entry });
            }
            let th_in = (entry - o.position).arg();
            let th_out = (exit - o.position).arg();
            let ccw = (th_out - th_in).rem_euclid(TAU);
            let contains = |sweep: f64, phi: f64| -> bool {
                let rel = (phi - th_in).rem_euclid(TAU);
                if sweep >= 0.0 {
                    rel <= sweep
                } else {
                    rel >= TAU + sweep
                }
            };
            let sweep = match o.cut_dir {
                Some(phi) => {
                    let margin = 1e-9;
                    let rel = (phi - th_in).rem_euclid(TAU);
                    if rel < margin || (TAU - rel) < margin || (rel - ccw).abs() < margin {
                        return Err(SurfaceError::ContourCollision(
                            "detour arc grazes a branch cut".into(),
                        ));
                    }
                    if contains(ccw, phi) {
                        ccw - TAU
                    } else {
                        ccw
                    }
                }
                None => {
                    let rel_left = (th_left - th_in).rem_euclid(TAU);
                    if rel_left <= ccw {
                        ccw
                    } else {
                        ccw - TAU
                    }
                }
            };
            segs.push(Seg::Arc {
                center: o.position,
                radius: r,
                th0: th_in,
                th1: th_in + sweep,
            });
            cursor = exit;
        }
        if (b - cursor).norm() > 0.0 {
            segs.push(Seg::Line { a: cursor, b });
        }
        Ok(segs)
    }
}
