//! Shared test support: a deterministic generator for randomized sweeps and
//! an independent genus-1 oracle built from the arithmetic-geometric mean,
//! composite-Simpson integrals and scalar theta sums.
#![allow(dead_code)]

use ernstkit::ernst::SolutionSpec;
use ernstkit::surface::{BranchPair, SpectralData, SurfaceParams};
use ernstkit::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---------------------------------------------------------------------------
// Deterministic pseudo-random numbers (SplitMix64)
// ---------------------------------------------------------------------------

pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn flag(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }

    pub fn pick(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

// ---------------------------------------------------------------------------
// Sweep generation
// ---------------------------------------------------------------------------

/// Branch pairs with comfortable mutual clearances, anchors kept away from
/// the band |Re| < 1.05 so that world points with ζ ∈ [−0.75, 0.75] never
/// crowd a cut.
pub fn random_pairs(rng: &mut Rng, genus: usize) -> Vec<BranchPair> {
    'outer: loop {
        let mut pairs = Vec::with_capacity(genus);
        let mut spans: Vec<(f64, f64)> = Vec::new();
        for _ in 0..genus {
            let side = if rng.flag() { 1.0 } else { -1.0 };
            let (pair, span) = if rng.flag() {
                let cx = side * rng.range(1.2, 3.2);
                let h = rng.range(0.5, 1.8);
                (
                    BranchPair::conjugate(c(cx, h)).unwrap(),
                    (cx - 0.01, cx + 0.01),
                )
            } else {
                let center = side * rng.range(1.6, 3.0);
                let w = rng.range(0.25, (center.abs() - 1.1).min(0.7));
                (
                    BranchPair::real_pair(center - w, center + w).unwrap(),
                    (center - w, center + w),
                )
            };
            // Mutual horizontal clearance of 0.35 between cut extents.
            for &(lo, hi) in &spans {
                if span.0 < hi + 0.35 && lo < span.1 + 0.35 {
                    continue 'outer;
                }
            }
            spans.push(span);
            pairs.push(pair);
        }
        // Vertical-point clearance between conjugate tops and everything.
        let mut flat: Vec<Complex64> = Vec::new();
        for p in &pairs {
            flat.push(p.e());
            flat.push(p.f());
        }
        let mut ok = true;
        for i in 0..flat.len() {
            for j in (i + 1)..flat.len() {
                if (flat[i] - flat[j]).norm() < 0.35 {
                    ok = false;
                }
            }
        }
        if ok {
            return pairs;
        }
    }
}

pub fn random_world(rng: &mut Rng) -> (f64, f64) {
    (rng.range(0.7, 1.6), rng.range(-0.75, 0.75))
}

pub fn spectral_at(pairs: &[BranchPair], zeta: f64, rho: f64) -> SpectralData {
    SpectralData::new(zeta, rho, pairs.to_vec(), SurfaceParams::default()).unwrap()
}

pub fn random_spectral(rng: &mut Rng, genus: usize) -> SpectralData {
    let pairs = random_pairs(rng, genus);
    let (rho, zeta) = random_world(rng);
    spectral_at(&pairs, zeta, rho)
}

/// Random characteristics: p mixes integers, half-integers and generic
/// reals; q_im stays small so the theta arguments remain well-conditioned.
pub fn random_characteristics(rng: &mut Rng, genus: usize) -> (Vec<f64>, Vec<f64>) {
    let p = (0..genus)
        .map(|_| match rng.pick(4) {
            0 => 0.0,
            1 => 0.5,
            2 => -0.5,
            _ => rng.range(-0.8, 0.8),
        })
        .collect();
    let q_im = (0..genus).map(|_| rng.range(-0.3, 0.3)).collect();
    (p, q_im)
}

pub fn random_solution(rng: &mut Rng, genus: usize) -> SolutionSpec {
    let pairs = random_pairs(rng, genus);
    let (p, q_im) = random_characteristics(rng, genus);
    SolutionSpec::new(pairs, p, q_im).unwrap()
}

// ---------------------------------------------------------------------------
// Complete elliptic integral by the AGM
// ---------------------------------------------------------------------------

/// K(m) with the parameter convention m = k².
pub fn ellipk(m: f64) -> f64 {
    assert!((0.0..1.0).contains(&m));
    let mut a = 1.0f64;
    let mut b = (1.0 - m).sqrt();
    for _ in 0..60 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        if (an - bn).abs() < 1e-17 * an {
            a = an;
            break;
        }
        a = an;
        b = bn;
    }
    std::f64::consts::FRAC_PI_2 / a
}

// ---------------------------------------------------------------------------
// Genus-1 closed forms via a real Möbius biquadratization
// ---------------------------------------------------------------------------

/// The genus-1 curve `y² = (x−ξ)(x−ξ̄)(x−E)(x−F)` admits a unique Möbius
/// involution swapping the two pairs; sending its (real) fixed points to
/// 0 and ∞ puts both pairs in opposition, where the cycle integrals are
/// classical complete elliptic integrals.
pub struct Genus1Oracle {
    /// |∮ dx/y| around the cut [E, F].
    pub a_period_mag: f64,
    /// Im(B₁₁) of the normalized matrix.
    pub im_b: f64,
}

pub fn genus1_oracle(zeta: f64, rho: f64, pair: &BranchPair) -> Genus1Oracle {
    let xi = c(zeta, rho);
    let (sp, pp) = (2.0 * zeta, xi.norm_sqr());
    let (e, f) = (pair.e(), pair.f());
    let (sq, pq) = ((e + f).re, (e * f).re);

    // Involution ι(z) = (αz + β)/(γz − α) swapping the pairs.
    let alpha = pp - pq;
    let gamma = sp - sq;
    let beta = pq * sp - pp * sq;

    let (w1, w2, jac_scale) = if gamma.abs() > 1e-9 {
        // Fixed points of the involution; send the one with Q > 0 (outside
        // every cut) to infinity.
        let disc = alpha * alpha + gamma * beta;
        assert!(disc > 0.0, "involution fixed points must be real");
        let quartic = |x: f64| ((x - xi) * (x - xi.conj()) * (c(x, 0.0) - e) * (c(x, 0.0) - f)).re;
        let mut u = (alpha + disc.sqrt()) / gamma;
        let mut v = (alpha - disc.sqrt()) / gamma;
        if quartic(v) <= 0.0 {
            std::mem::swap(&mut u, &mut v);
        }
        let qv = quartic(v);
        assert!(qv > 0.0, "no fixed point clear of the cuts");
        let t = |x: Complex64| (x - u) / (x - v);
        (t(xi), t(e), (u - v).abs() / qv.sqrt())
    } else {
        // Equal pair centers: a shift already opposes both pairs.
        let shift = 0.5 * sp;
        (xi - shift, e - shift, 1.0)
    };

    assert!(w1.re.abs() < 1e-9 * w1.norm(), "spectral image not imaginary");
    let kappa1 = w1.im.abs();

    match pair.kind() {
        ernstkit::surface::PairKind::Conjugate => {
            assert!(w2.re.abs() < 1e-9 * w2.norm());
            let kappa2 = w2.im.abs();
            let (mu, nu) = (kappa1.min(kappa2), kappa1.max(kappa2));
            let m = (mu / nu) * (mu / nu);
            Genus1Oracle {
                a_period_mag: jac_scale * 4.0 / nu * ellipk(m),
                im_b: ellipk(1.0 - m) / (2.0 * ellipk(m)),
            }
        }
        ernstkit::surface::PairKind::RealPair => {
            assert!(w2.im.abs() < 1e-9 * w2.norm(), "real image not real");
            let lambda = w2.re.abs();
            let denom = (lambda * lambda + kappa1 * kappa1).sqrt();
            let m_pair = lambda * lambda / (denom * denom);
            let m_spec = kappa1 * kappa1 / (denom * denom);
            Genus1Oracle {
                a_period_mag: jac_scale * 4.0 / denom * ellipk(m_pair),
                im_b: ellipk(m_spec) / (2.0 * ellipk(m_pair)),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Independent scalar genus-1 pipeline (Simpson + scalar theta)
// ---------------------------------------------------------------------------

/// Composite Simpson on [0, 1] with 2n panels, evaluating strictly in
/// order so branch-tracking integrands stay continuous.
fn simpson01(f: &mut dyn FnMut(f64) -> Complex64, n: usize) -> Complex64 {
    let m = 2 * n;
    let h = 1.0 / m as f64;
    let mut total = c(0.0, 0.0);
    for k in 0..=m {
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * f(k as f64 * h);
    }
    total * (h / 3.0)
}

/// Continuous 1-D branch of sqrt(scale·Π(x−root)) along a parametrized
/// path, stepping fine enough that the nearest root stays well resolved.
struct Tracker1D {
    roots: Vec<Complex64>,
    scale: Complex64,
    prev: Complex64,
}

impl Tracker1D {
    fn new(roots: Vec<Complex64>, x0: Complex64) -> Self {
        Self::with_scale(roots, x0, c(1.0, 0.0))
    }

    fn with_scale(roots: Vec<Complex64>, x0: Complex64, scale: Complex64) -> Self {
        let seed: Complex64 =
            scale.sqrt() * roots.iter().map(|r| (x0 - r).sqrt()).product::<Complex64>();
        Tracker1D { roots, scale, prev: seed }
    }

    /// Value at `x`, assuming successive calls walk a continuous path.
    fn advance(&mut self, x: Complex64) -> Complex64 {
        let q: Complex64 = self.scale * self.roots.iter().map(|r| x - r).product::<Complex64>();
        let s = q.sqrt();
        let v = if (s - self.prev).norm() <= (-s - self.prev).norm() {
            s
        } else {
            -s
        };
        self.prev = v;
        v
    }
}

/// Scalar theta sum Σ exp(iπ(n+p)²b + 2πi(n+p)(z+q)).
pub fn scalar_theta(p: f64, q: Complex64, b: Complex64, z: Complex64) -> Complex64 {
    let mut total = c(0.0, 0.0);
    for n in -40i64..=40 {
        let w = n as f64 + p;
        let exponent = c(0.0, std::f64::consts::PI) * (b * w * w)
            + c(0.0, 2.0 * std::f64::consts::PI) * (w * (z + q));
        total += exponent.exp();
    }
    total
}

/// Full genus-1 potential for one conjugate pair, built independently:
/// Im(B) from the AGM, Re(B) from the constant pattern, the Abel vector from
/// Simpson integrals along explicit parametrizations, and scalar theta sums.
pub fn genus1_scalar_ernst(
    zeta: f64,
    rho: f64,
    pair_e: Complex64,
    p: f64,
    q_im: f64,
    include_phase: bool,
) -> Complex64 {
    let xi = c(zeta, rho);
    let roots = vec![xi, xi.conj(), pair_e, pair_e.conj()];
    let pair = BranchPair::conjugate(pair_e).unwrap();
    let oracle = genus1_oracle(zeta, rho, &pair);
    let b = c(0.0, oracle.im_b);

    // a-period along the vertical cut x = Re(e) + i·h·sin θ. With
    // y = w·cos θ, where w² = h²·S(x) carries only the spectral-pair
    // factors, the integrand i·h/w is regular through both endpoints.
    let cx = pair_e.re;
    let h = pair_e.im;
    let n_steps = 4000usize;
    let spectral = vec![xi, xi.conj()];
    let integrate_half = |sign: f64| -> Complex64 {
        let mut tr = Tracker1D::with_scale(spectral.clone(), c(cx, 0.0), c(h * h, 0.0));
        let mut f = |s: f64| -> Complex64 {
            let th = s * std::f64::consts::FRAC_PI_2;
            let x = c(cx, h * th.sin() * sign);
            let w = tr.advance(x);
            c(0.0, h * sign) / w * std::f64::consts::FRAC_PI_2
        };
        simpson01(&mut f, n_steps)
    };
    let a_signed = 2.0 * (integrate_half(1.0) - integrate_half(-1.0));

    // Exit integral from ξ straight up under x = ζ + i(ρ + (s_max−ρ)u²):
    // with y = u·w and w² = i(s_max−ρ)·S(x) over the non-ξ roots, the
    // integrand 2(s_max−ρ)/w is regular at the branch point.
    let s_max = 6.0 * (1.0 + xi.norm() + pair_e.norm());
    let others = vec![xi.conj(), pair_e, pair_e.conj()];
    let dh = s_max - rho;
    let mut tr_up = Tracker1D::with_scale(others, c(zeta, rho), c(0.0, dh));
    let mut w_last = c(0.0, 0.0);
    let mut f_up = |s: f64| -> Complex64 {
        let x = c(zeta, rho + dh * s * s);
        let w = tr_up.advance(x);
        w_last = w;
        c(0.0, 2.0 * dh) / w
    };
    let v_main = simpson01(&mut f_up, n_steps);

    let mut tr_tail = Tracker1D::new(roots.clone(), c(zeta, s_max));
    tr_tail.prev = w_last;
    let t0 = 1e-9;
    let mut f_tail = |w: f64| -> Complex64 {
        let tau = 1.0 - (1.0 - t0) * w;
        let x = c(zeta, s_max / tau);
        let y = tr_tail.advance(x);
        c(0.0, s_max / (tau * tau)) / y * (1.0 - t0)
    };
    let v_tail = simpson01(&mut f_tail, n_steps);
    let v = v_main + v_tail;

    let mut u_abel = v / a_signed;
    // Land on the (1/4, …) class: integer shift, then the other infinity.
    let fix = |z: Complex64| -> Option<Complex64> {
        let k = (z.re - 0.25).round();
        ((z.re - 0.25 - k).abs() < 1e-6).then(|| z - k)
    };
    u_abel = fix(u_abel).or_else(|| fix(-u_abel)).unwrap_or_else(|| {
        panic!("oracle Abel vector {u_abel} off the quarter class");
    });

    // Reality condition for a single conjugate pair: Re(q) = 0.
    let q = c(0.0, q_im);
    let phase = if include_phase {
        (c(0.0, -std::f64::consts::PI) * p).exp()
    } else {
        c(1.0, 0.0)
    };
    phase * scalar_theta(p, q, b, u_abel) / scalar_theta(p, q, b, -u_abel)
}
