//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};

use ernstkit::ernst::{
    ernst_potential, metric_quadratures, pde_residual, ErnstError, EvalOptions, SolutionSpec,
    WorldPoint,
};
use ernstkit::surface::{abel_vector, surface_analysis, PairKind, SurfacePoint};
use ernstkit::theta::{fay_residual, find_odd_characteristic, ThetaContext};
use ernstkit::Complex64;
use rayon::prelude::*;

use crate::config::{self, Loaded};
use crate::output::{self, EvalRecord, MetricRecord};
use crate::CommonArgs;

fn writer(common: &CommonArgs) -> Result<Box<dyn Write>, String> {
    match &common.output {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn chosen_format(common: &CommonArgs, configured: &str) -> String {
    common
        .format
        .clone()
        .unwrap_or_else(|| configured.to_string())
}

/// Minimal deterministic generator for verification draws.
struct Mix(u64);

impl Mix {
    fn next_unit(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    fn pick(&mut self, n: usize) -> usize {
        (self.next_unit() * n as f64) as usize % n
    }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

pub fn run_eval(common: &CommonArgs, with_residuals: bool) -> Result<u8, String> {
    let Loaded { config, spec } = config::load(&common.config)?;
    let grid = config
        .grid
        .as_ref()
        .ok_or_else(|| "eval needs a grid section".to_string())?;
    let points = config::grid_points(grid);
    let opts = config::eval_options(&config, common.quad_order, common.fd_step, with_residuals);
    let fd_step = opts.fd_step.unwrap_or(1e-3);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.max(1))
        .build()
        .map_err(|e| e.to_string())?;
    let records: Vec<EvalRecord> = pool.install(|| {
        points
            .par_iter()
            .map(|&(rho, zeta)| evaluate_cell(&spec, rho, zeta, &opts, with_residuals, fd_step))
            .collect()
    });

    let mut out = writer(common)?;
    match chosen_format(common, &config.output_format).as_str() {
        "csv" => output::eval_csv(&records, with_residuals, &mut out).map_err(|e| e.to_string())?,
        "json" => output::json(&records, &mut out).map_err(|e| e.to_string())?,
        other => return Err(format!("unknown format {other:?}")),
    }
    Ok(0)
}

fn evaluate_cell(
    spec: &SolutionSpec,
    rho: f64,
    zeta: f64,
    opts: &EvalOptions,
    with_residuals: bool,
    fd_step: f64,
) -> EvalRecord {
    let pt = WorldPoint::new(rho, zeta);
    let masked = EvalRecord {
        rho,
        zeta,
        re_e: None,
        im_e: None,
        f: None,
        conj_res: None,
        pde_res: None,
        mask: 1,
    };
    match ernst_potential(spec, &pt, opts) {
        Ok(ev) => {
            let pde = if with_residuals {
                match pde_residual(spec, &pt, fd_step, opts) {
                    Ok(r) => Some(r.relative),
                    Err(_) => None,
                }
            } else {
                None
            };
            EvalRecord {
                rho,
                zeta,
                re_e: Some(ev.value.re),
                im_e: Some(ev.value.im),
                f: Some(ev.f),
                conj_res: ev.conj_residual,
                pde_res: pde,
                mask: 0,
            }
        }
        Err(ErnstError::ThetaDivisorHit { .. }) => masked,
        Err(_) => masked,
    }
}

// ---------------------------------------------------------------------------
// metric
// ---------------------------------------------------------------------------

pub fn run_metric(common: &CommonArgs) -> Result<u8, String> {
    let Loaded { config, spec } = config::load(&common.config)?;
    let path = config
        .path
        .as_ref()
        .ok_or_else(|| "metric needs a path section".to_string())?;
    let vertices: Vec<WorldPoint> = path
        .iter()
        .map(|&[rho, zeta]| WorldPoint::new(rho, zeta))
        .collect();
    let opts = config::eval_options(&config, common.quad_order, common.fd_step, false);
    let fd_step = opts.fd_step.unwrap_or(1e-3);
    let fields = match metric_quadratures(&spec, &vertices, fd_step, &opts) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("metric quadrature failed: {e}");
            return Ok(1);
        }
    };
    let records: Vec<MetricRecord> = fields
        .iter()
        .map(|v| MetricRecord {
            rho: v.point.rho,
            zeta: v.point.zeta,
            a: v.a_field,
            k: v.k_field,
            f: v.f,
        })
        .collect();
    let mut out = writer(common)?;
    match chosen_format(common, &config.output_format).as_str() {
        "csv" => output::metric_csv(&records, &mut out).map_err(|e| e.to_string())?,
        "json" => output::json(&records, &mut out).map_err(|e| e.to_string())?,
        other => return Err(format!("unknown format {other:?}")),
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct Table {
    rows: Vec<(String, f64, f64, bool)>,
}

impl Table {
    fn push(&mut self, name: &str, measured: f64, tolerance: f64) {
        self.rows.push((name.into(), measured, tolerance, measured <= tolerance));
    }

    fn push_lower_bound(&mut self, name: &str, measured: f64, bound: f64) {
        self.rows
            .push((format!("{name} (≥)"), measured, bound, measured >= bound));
    }

    fn print(&self, out: &mut dyn Write) -> std::io::Result<bool> {
        let mut all = true;
        writeln!(out, "{:<44} {:>12} {:>12}  result", "check", "measured", "tolerance")?;
        for (name, measured, tol, pass) in &self.rows {
            all &= pass;
            writeln!(
                out,
                "{:<44} {:>12.3e} {:>12.3e}  {}",
                name,
                measured,
                tol,
                if *pass { "pass" } else { "FAIL" }
            )?;
        }
        Ok(all)
    }
}

pub fn run_verify(common: &CommonArgs) -> Result<u8, String> {
    let Loaded { config, spec } = config::load(&common.config)?;
    let opts = config::eval_options(&config, common.quad_order, common.fd_step, true);
    let fd_step = opts.fd_step.unwrap_or(1e-3);
    let tol = &config.tolerances;
    let mut table = Table { rows: Vec::new() };
    let mut rng = Mix(0x0ECC_5EED);

    // Sample world points: grid corners and center when a grid is given.
    let sample_points: Vec<WorldPoint> = match &config.grid {
        Some(g) => {
            let mut pts = vec![
                (g.rho_min, g.zeta_min),
                (g.rho_min, g.zeta_max),
                (g.rho_max, g.zeta_min),
                (g.rho_max, g.zeta_max),
                (0.5 * (g.rho_min + g.rho_max), 0.5 * (g.zeta_min + g.zeta_max)),
            ];
            pts.dedup_by(|a, b| a == b);
            pts.into_iter().map(|(r, z)| WorldPoint::new(r, z)).collect()
        }
        None => vec![WorldPoint::new(1.0, 0.0), WorldPoint::new(0.9, 0.3)],
    };

    // Curve structure and Abel classes at each sample point.
    let mut max_pattern = 0.0f64;
    let mut max_abel = 0.0f64;
    let mut analyses = Vec::new();
    for pt in &sample_points {
        let sd = ernstkit::surface::SpectralData::new(
            pt.zeta,
            pt.rho,
            spec.pairs().to_vec(),
            opts.surface.clone(),
        )
        .map_err(|e| e.to_string())?;
        let analysis = match surface_analysis(&sd, opts.quad_order) {
            Ok(a) => a,
            Err(e) => {
                eprintln!("curve analysis failed at (ρ={}, ζ={}): {e}", pt.rho, pt.zeta);
                return Ok(1);
            }
        };
        let g = spec.genus();
        for i in 0..g {
            for j in 0..g {
                let expect = if i == j && spec.pairs()[i].kind() == PairKind::Conjugate {
                    0.0
                } else {
                    -0.5
                };
                max_pattern = max_pattern.max((analysis.rm.r()[(i, j)] - expect).abs());
            }
        }
        for u in &analysis.abel.to_inf_plus {
            max_abel = max_abel.max((u.re - 0.25).abs());
        }
        analyses.push((sd, analysis));
    }
    table.push("Re(B) half-integer pattern", max_pattern, 1e-8);
    table.push("Abel real parts at 1/4", max_abel, 1e-8);

    // Theta identities at the first sample point.
    let (sd0, analysis0) = &analyses[0];
    let chars = ernstkit::ernst::build_characteristics(&spec);
    let ctx = ThetaContext::new(analysis0.rm.clone(), chars, tol.series_eps)
        .map_err(|e| e.to_string())?;
    let g = spec.genus();
    let mut max_shift = 0.0f64;
    for _ in 0..20 {
        let z: Vec<Complex64> = (0..g)
            .map(|_| Complex64::new(rng.range(-0.5, 0.5), rng.range(-0.25, 0.25)))
            .collect();
        let m: Vec<i64> = (0..g).map(|_| rng.pick(5) as i64 - 2).collect();
        max_shift = max_shift.max(ctx.lattice_shift_check(&z, &m).map_err(|e| e.to_string())?);
    }
    table.push("theta quasi-periodicity", max_shift, 1e-10);

    let (_, constancy) = ctx.conjugation_constant().map_err(|e| e.to_string())?;
    table.push("theta conjugation constancy", constancy, tol.identity_tol);

    // Fay cross-ratio on named points.
    let odd = find_odd_characteristic(&analysis0.rm, tol.series_eps).map_err(|e| e.to_string())?;
    let mut points = vec![
        SurfacePoint::Xi,
        SurfacePoint::XiBar,
        SurfacePoint::InfPlus,
        SurfacePoint::InfMinus,
    ];
    for j in 0..g {
        points.push(SurfacePoint::BranchE(j));
        points.push(SurfacePoint::BranchF(j));
    }
    let vectors: Vec<Vec<Complex64>> = points
        .iter()
        .map(|&pt| abel_vector(sd0, analysis0, pt))
        .collect();
    let mut max_fay = 0.0f64;
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 10 && attempts < 200 {
        attempts += 1;
        let idx: Vec<usize> = (0..4).map(|_| rng.pick(vectors.len())).collect();
        if idx[0] == idx[1] || idx[2] == idx[3] || idx[0] == idx[3] || idx[1] == idx[2] {
            continue;
        }
        let z: Vec<Complex64> = (0..g)
            .map(|_| Complex64::new(rng.range(-0.3, 0.3), rng.range(-0.15, 0.15)))
            .collect();
        if let Ok(res) = fay_residual(
            &ctx,
            &odd,
            &vectors[idx[0]],
            &vectors[idx[1]],
            &vectors[idx[2]],
            &vectors[idx[3]],
            &z,
        ) {
            max_fay = max_fay.max(res);
            checked += 1;
        }
    }
    table.push("Fay cross-ratio residual", max_fay, tol.identity_tol);

    // Potential identities and PDE residual at the sample points.
    let mut max_conj = 0.0f64;
    let mut max_real = 0.0f64;
    let mut max_pde = 0.0f64;
    let mut divisor_hits = 0usize;
    for pt in &sample_points {
        let magnitude = match ernst_potential(&spec, pt, &opts) {
            Ok(ev) => {
                max_conj = max_conj.max(ev.conj_residual.unwrap_or(0.0));
                max_real = max_real.max(ev.realpart_residual.unwrap_or(0.0));
                ev.value.norm()
            }
            Err(ErnstError::ThetaDivisorHit { .. }) => {
                divisor_hits += 1;
                continue;
            }
            Err(e) => {
                eprintln!("evaluation failed at (ρ={}, ζ={}): {e}", pt.rho, pt.zeta);
                return Ok(1);
            }
        };
        if pt.rho > 2.0 * fd_step + opts.surface.rho_min {
            if let Ok(r) = pde_residual(&spec, pt, fd_step, &opts) {
                // For near-constant fields both sides of the equation sit at
                // the finite-difference noise level and the plain relative
                // residual degenerates to 0/0; measure against that floor.
                let noise =
                    8.0 * opts.series_eps * (1.0 + magnitude).powi(2) / (fd_step * fd_step);
                let denom = if r.relative > 0.0 {
                    (r.absolute.norm() / r.relative).max(noise)
                } else {
                    noise
                };
                max_pde = max_pde.max(r.absolute.norm() / denom);
            }
        }
    }
    if divisor_hits > 0 {
        eprintln!("note: {divisor_hits} sample point(s) sit on the theta divisor");
    }
    table.push("conjugation identity", max_conj, tol.identity_tol);
    table.push("real-part reduction", max_real, tol.identity_tol);
    table.push("Ernst equation residual", max_pde, tol.pde_tol);

    // Negative control: with Σp = 1/2 and the phase disabled, the
    // reduction must fail by a measurable margin.
    let mut control_p = vec![0.0; g];
    control_p[0] = 0.5;
    let control =
        SolutionSpec::new(spec.pairs().to_vec(), control_p, vec![0.0; g])
            .map_err(|e| e.to_string())?
            .with_phase(false);
    let pt = sample_points[0];
    let e = ernst_potential(&control, &pt, &opts).map_err(|e| e.to_string())?;
    let fay = ernstkit::ernst::real_part_via_fay(&control, &pt, &opts)
        .map_err(|e| e.to_string())?;
    let gap = (fay - e.value.re).abs() / e.value.norm().max(1.0);
    table.push_lower_bound("phase-necessity control gap", gap, 1e-3);

    // E ≡ 1 whenever the trivial characteristics are admissible.
    let trivial = spec.p().iter().all(|&x| x == 0.0)
        && spec.enforce_reality()
        && spec
            .pairs()
            .iter()
            .all(|p| p.kind() == PairKind::Conjugate);
    if trivial {
        let mut max_dev = 0.0f64;
        for pt in &sample_points {
            let ev = ernst_potential(&spec, pt, &opts).map_err(|e| e.to_string())?;
            max_dev = max_dev.max((ev.value - Complex64::new(1.0, 0.0)).norm());
        }
        table.push("constant solution |E - 1|", max_dev, 1e-9);
    }

    let mut out = writer(common)?;
    let all_pass = table.print(&mut out).map_err(|e| e.to_string())?;
    Ok(if all_pass { 0 } else { 1 })
}
