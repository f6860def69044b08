//! JSON configuration schema. Complex numbers are two-element arrays
//! `[re, im]`; branch pairs carry an explicit `kind` tag so validation
//! stays explicit.

use std::path::Path;

use ernstkit::ernst::{EvalOptions, SolutionSpec, Variant};
use ernstkit::surface::BranchPair;
use ernstkit::Complex64;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub spec: SpecConfig,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    /// Polyline of `[rho, zeta]` vertices for the metric quadratures.
    #[serde(default)]
    pub path: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
    #[serde(default = "default_format")]
    pub output_format: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub pairs: Vec<PairConfig>,
    pub p: Vec<f64>,
    pub q_im: Vec<f64>,
    /// Explicit Re(q); turns the reality conditions off (negative
    /// controls).
    #[serde(default)]
    pub q_re: Option<Vec<f64>>,
    #[serde(default = "default_true")]
    pub enforce_reality: bool,
    #[serde(default = "default_true")]
    pub include_phase: bool,
    #[serde(default = "default_variant")]
    pub variant: String,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PairConfig {
    /// `F = conj(E)`; `e = [re, im]` with `im > 0`.
    Conjugate { e: [f64; 2] },
    /// Both real with `e < f`.
    Real { e: f64, f: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub n_rho: usize,
    pub n_zeta: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_series_eps")]
    pub series_eps: f64,
    #[serde(default = "default_identity_tol")]
    pub identity_tol: f64,
    #[serde(default = "default_pde_tol")]
    pub pde_tol: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            series_eps: default_series_eps(),
            identity_tol: default_identity_tol(),
            pde_tol: default_pde_tol(),
            fd_step: default_fd_step(),
        }
    }
}

fn default_true() -> bool {
    true
}
fn default_variant() -> String {
    "standard".into()
}
fn default_quad_order() -> usize {
    64
}
fn default_format() -> String {
    "csv".into()
}
fn default_series_eps() -> f64 {
    1e-12
}
fn default_identity_tol() -> f64 {
    1e-8
}
fn default_pde_tol() -> f64 {
    1e-4
}
fn default_fd_step() -> f64 {
    1e-3
}

pub struct Loaded {
    pub config: ConfigFile,
    pub spec: SolutionSpec,
}

pub fn load(path: &Path) -> Result<Loaded, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let config: ConfigFile =
        serde_json::from_str(&text).map_err(|e| format!("invalid configuration: {e}"))?;
    let spec = build_spec(&config.spec)?;
    validate(&config)?;
    Ok(Loaded { config, spec })
}

fn build_spec(sc: &SpecConfig) -> Result<SolutionSpec, String> {
    let mut pairs = Vec::with_capacity(sc.pairs.len());
    for p in &sc.pairs {
        let pair = match *p {
            PairConfig::Conjugate { e } => BranchPair::conjugate(Complex64::new(e[0], e[1])),
            PairConfig::Real { e, f } => BranchPair::real_pair(e, f),
        }
        .map_err(|e| e.to_string())?;
        pairs.push(pair);
    }
    let mut spec = SolutionSpec::new(pairs, sc.p.clone(), sc.q_im.clone())
        .map_err(|e| e.to_string())?;
    if let Some(q_re) = &sc.q_re {
        if sc.enforce_reality {
            return Err("q_re requires enforce_reality = false".into());
        }
        spec = spec.with_re_q_override(q_re.clone()).map_err(|e| e.to_string())?;
    } else if !sc.enforce_reality {
        return Err("enforce_reality = false requires an explicit q_re".into());
    }
    spec = spec.with_phase(sc.include_phase);
    spec = match sc.variant.as_str() {
        "standard" => spec.with_variant(Variant::Standard),
        "shifted" => spec.with_variant(Variant::Shifted),
        other => return Err(format!("unknown variant {other:?}")),
    };
    Ok(spec)
}

fn validate(config: &ConfigFile) -> Result<(), String> {
    if let Some(grid) = &config.grid {
        if grid.n_rho == 0 || grid.n_zeta == 0 {
            return Err("grid counts must be at least 1".into());
        }
        if grid.rho_min.is_nan() || grid.rho_min <= 0.0 || grid.rho_max < grid.rho_min {
            return Err("grid needs 0 < rho_min <= rho_max".into());
        }
        if grid.zeta_max < grid.zeta_min {
            return Err("grid needs zeta_min <= zeta_max".into());
        }
    }
    let t = &config.tolerances;
    let positive = |x: f64| x > 0.0;
    if !positive(t.series_eps) || !positive(t.identity_tol) || !positive(t.pde_tol) || !positive(t.fd_step)
    {
        return Err("tolerances must be positive".into());
    }
    if config.quad_order < 16 {
        return Err("quad_order must be at least 16".into());
    }
    Ok(())
}

/// Grid points in row-major order (rho outer, zeta inner).
pub fn grid_points(grid: &GridConfig) -> Vec<(f64, f64)> {
    let step = |lo: f64, hi: f64, n: usize, k: usize| {
        if n <= 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(grid.n_rho * grid.n_zeta);
    for i in 0..grid.n_rho {
        for j in 0..grid.n_zeta {
            out.push((
                step(grid.rho_min, grid.rho_max, grid.n_rho, i),
                step(grid.zeta_min, grid.zeta_max, grid.n_zeta, j),
            ));
        }
    }
    out
}

/// Evaluation options assembled from the configuration plus CLI overrides.
pub fn eval_options(
    config: &ConfigFile,
    quad_order: Option<usize>,
    fd_step: Option<f64>,
    with_diagnostics: bool,
) -> EvalOptions {
    EvalOptions {
        quad_order: quad_order.unwrap_or(config.quad_order),
        series_eps: config.tolerances.series_eps,
        fd_step: Some(fd_step.unwrap_or(config.tolerances.fd_step)),
        with_diagnostics,
        ..EvalOptions::default()
    }
}
