//! Identity sweeps for the assembled potential: the conjugation identity,
//! the Fay reduction of the real part, the PDE residual with its
//! convergence order, the phase-factor necessity, the shifted form and the
//! metric quadratures.

mod common;

use common::{c, random_pairs, random_solution, Rng};
use ernstkit::ernst::{
    conjugate_via_formula, ernst_potential, metric_quadratures, pde_residual,
    real_part_via_fay, EvalOptions, SolutionSpec, Variant, WorldPoint,
};
use ernstkit::surface::BranchPair;

fn world_points(rng: &mut Rng, n: usize) -> Vec<WorldPoint> {
    (0..n)
        .map(|_| WorldPoint::new(rng.range(0.7, 1.5), rng.range(-0.6, 0.6)))
        .collect()
}

#[test]
fn conjugation_and_real_part_identities_across_the_sweep() {
    let mut rng = Rng::new(0xE425_7001);
    let opts = EvalOptions::default();
    for genus in 1..=3 {
        for _ in 0..6 {
            let spec = random_solution(&mut rng, genus);
            for pt in world_points(&mut rng, 2) {
                let e = ernst_potential(&spec, &pt, &opts).unwrap().value;
                let via = conjugate_via_formula(&spec, &pt, &opts).unwrap();
                let conj_res = (via - e.conj()).norm() / e.norm();
                assert!(
                    conj_res <= 1e-8,
                    "conjugation residual {conj_res:.3e} at genus {genus}"
                );
                let fay = real_part_via_fay(&spec, &pt, &opts).unwrap();
                let fay_res = (fay - e.re).abs() / e.norm();
                assert!(
                    fay_res <= 1e-8,
                    "real-part residual {fay_res:.3e} at genus {genus}"
                );
            }
        }
    }
}

#[test]
fn diagnostics_are_populated_on_request() {
    let mut rng = Rng::new(0xE425_7002);
    let spec = random_solution(&mut rng, 2);
    let pt = WorldPoint::new(1.1, 0.2);
    let opts = EvalOptions {
        with_diagnostics: true,
        ..EvalOptions::default()
    };
    let ev = ernst_potential(&spec, &pt, &opts).unwrap();
    assert!(ev.conj_residual.unwrap() <= 1e-8);
    assert!(ev.realpart_residual.unwrap() <= 1e-8);
    assert_eq!(ev.f, ev.value.re);
}

#[test]
fn pde_residual_small_and_second_order() {
    let mut rng = Rng::new(0xE425_7003);
    let opts = EvalOptions::default();
    for genus in 1..=2 {
        let spec = random_solution(&mut rng, genus);
        let pt = WorldPoint::new(1.0, 0.25);
        let r1 = pde_residual(&spec, &pt, 1e-3, &opts).unwrap();
        assert!(
            r1.relative <= 1e-4,
            "relative PDE residual {:.3e} at genus {genus}",
            r1.relative
        );
        // The two algebraic forms agree to roundoff when built from the
        // same stencil values.
        assert!(
            (r1.absolute - r1.alt_absolute / 4.0).norm() <= 1e-10,
            "form disagreement"
        );
        // ~h² convergence while truncation dominates.
        let r2 = pde_residual(&spec, &pt, 2e-3, &opts).unwrap();
        let r4 = pde_residual(&spec, &pt, 4e-3, &opts).unwrap();
        let ratio_a = r4.relative / r2.relative;
        let ratio_b = r2.relative / r1.relative;
        assert!(
            (2.0..8.0).contains(&ratio_a) && (2.0..8.0).contains(&ratio_b),
            "convergence ratios {ratio_a:.2} {ratio_b:.2} at genus {genus}"
        );
    }
}

#[test]
fn phase_factor_is_necessary_for_half_integer_sums() {
    let mut rng = Rng::new(0xE425_7004);
    let opts = EvalOptions::default();
    // Σp = 1/2 on a genus-2 spec.
    let pairs = random_pairs(&mut rng, 2);
    let base = SolutionSpec::new(pairs.clone(), vec![0.5, 0.0], vec![0.1, -0.05]).unwrap();
    let pt = WorldPoint::new(1.0, 0.15);

    let without = base.clone().with_phase(false);
    let e = ernst_potential(&without, &pt, &opts).unwrap().value;
    let fay = real_part_via_fay(&without, &pt, &opts).unwrap();
    let gap = (fay - e.re).abs() / e.norm().max(1.0);
    assert!(gap >= 1e-3, "reduction should fail without the phase: {gap:.3e}");

    let e = ernst_potential(&base, &pt, &opts).unwrap().value;
    let fay = real_part_via_fay(&base, &pt, &opts).unwrap();
    assert!((fay - e.re).abs() / e.norm() <= 1e-8);

    // Integer Σp: the phase is ±1, so enabling it only flips the sign.
    let int_spec = SolutionSpec::new(pairs, vec![1.0, 0.0], vec![0.1, -0.05]).unwrap();
    let on = ernst_potential(&int_spec, &pt, &opts).unwrap().value;
    let off = ernst_potential(&int_spec.clone().with_phase(false), &pt, &opts)
        .unwrap()
        .value;
    assert!(((on + off).norm().min((on - off).norm())) <= 1e-10 * on.norm());
    assert!((on.norm() - off.norm()).abs() <= 1e-10 * on.norm());
}

#[test]
fn shifted_variant_satisfies_the_same_identities() {
    let mut rng = Rng::new(0xE425_7005);
    let opts = EvalOptions::default();
    for genus in 1..=2 {
        let spec = random_solution(&mut rng, genus).with_variant(Variant::Shifted);
        let pt = WorldPoint::new(0.95, -0.2);
        let e = ernst_potential(&spec, &pt, &opts).unwrap().value;
        let via = conjugate_via_formula(&spec, &pt, &opts).unwrap();
        assert!((via - e.conj()).norm() / e.norm() <= 1e-8);
        let fay = real_part_via_fay(&spec, &pt, &opts).unwrap();
        assert!((fay - e.re).abs() / e.norm() <= 1e-8);
        let r = pde_residual(&spec, &pt, 1e-3, &opts).unwrap();
        assert!(r.relative <= 1e-4, "shifted PDE residual {:.3e}", r.relative);
    }
}

#[test]
fn reality_violation_is_detected() {
    let opts = EvalOptions::default();
    let spec = SolutionSpec::new(
        vec![
            BranchPair::conjugate(c(-1.4, 1.1)).unwrap(),
            BranchPair::real_pair(1.6, 2.4).unwrap(),
        ],
        vec![0.3, -0.1],
        vec![0.05, 0.1],
    )
    .unwrap();
    let pt = WorldPoint::new(1.0, 0.1);
    // Perturb Re(q) by 0.1 in the first component.
    let good = ernstkit::ernst::build_characteristics(&spec);
    let broken = spec
        .clone()
        .with_re_q_override(vec![good.q[0].re + 0.1, good.q[1].re])
        .unwrap();
    let e = ernst_potential(&broken, &pt, &opts).unwrap().value;
    let via = conjugate_via_formula(&broken, &pt, &opts).unwrap();
    let residual = (via - e.conj()).norm() / e.norm();
    assert!(residual >= 1e-3, "violation went undetected: {residual:.3e}");
}

#[test]
fn metric_quadratures_close_and_are_path_independent() {
    let opts = EvalOptions::default();
    let spec = SolutionSpec::new(
        vec![BranchPair::conjugate(c(1.3, 1.8)).unwrap()],
        vec![0.25],
        vec![0.05],
    )
    .unwrap();
    let h = 1e-3;
    let step = 0.004;

    // Two homotopic L-shaped paths between the same endpoints.
    let a = WorldPoint::new(1.0, -0.1);
    let b = WorldPoint::new(1.12, 0.1);
    let path_over: Vec<WorldPoint> = {
        let mut v: Vec<WorldPoint> = (0..=30)
            .map(|k| WorldPoint::new(1.0 + step * k as f64, a.zeta))
            .collect();
        v.extend((1..=50).map(|k| WorldPoint::new(b.rho, a.zeta + step * k as f64)));
        v
    };
    let path_under: Vec<WorldPoint> = {
        let mut v: Vec<WorldPoint> = (0..=50)
            .map(|k| WorldPoint::new(a.rho, a.zeta + step * k as f64))
            .collect();
        v.extend((1..=30).map(|k| WorldPoint::new(1.0 + step * k as f64, b.zeta)));
        v
    };
    let over = metric_quadratures(&spec, &path_over, h, &opts).unwrap();
    let under = metric_quadratures(&spec, &path_under, h, &opts).unwrap();
    let (o, u) = (over.last().unwrap(), under.last().unwrap());
    assert!(
        (o.a_field - u.a_field).abs() <= 1e-5,
        "A path dependence: {} vs {}",
        o.a_field,
        u.a_field
    );
    assert!(
        (o.k_field - u.k_field).abs() <= 1e-5,
        "k path dependence: {} vs {}",
        o.k_field,
        u.k_field
    );

    // f equals Re(E) vertex-wise.
    for v in over.iter().step_by(10) {
        let e = ernst_potential(&spec, &v.point, &opts).unwrap().value;
        assert!((v.f - e.re).abs() <= 1e-12);
    }
}

#[test]
fn straddling_real_pair_satisfies_everything() {
    // The spectral cut sits inside the real cut (ζ ∈ (E, F)); the cuts
    // cross transversally and the homology realization must still land in
    // the involution-adapted class.
    let opts = EvalOptions::default();
    let spec = SolutionSpec::new(
        vec![BranchPair::real_pair(-1.0, 1.0).unwrap()],
        vec![0.35],
        vec![0.08],
    )
    .unwrap();
    let pt = WorldPoint::new(1.0, 0.0);
    let e = ernst_potential(&spec, &pt, &opts).unwrap().value;
    let via = conjugate_via_formula(&spec, &pt, &opts).unwrap();
    assert!((via - e.conj()).norm() / e.norm() < 1e-8);
    let fay = real_part_via_fay(&spec, &pt, &opts).unwrap();
    assert!((fay - e.re).abs() / e.norm() < 1e-8);
    let r = pde_residual(&spec, &pt, 1e-3, &opts).unwrap();
    assert!(r.relative < 1e-4, "pde {}", r.relative);
}
