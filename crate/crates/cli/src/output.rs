//! CSV and JSON serialization of grid and path records. Floating-point
//! values are written with 17 significant digits so the text round-trips
//! to the same f64.

use std::io::Write;

use serde::Serialize;

/// One grid cell; `None` fields mark cells masked by a theta-divisor hit.
#[derive(Debug, Clone, Serialize)]
pub struct EvalRecord {
    pub rho: f64,
    pub zeta: f64,
    pub re_e: Option<f64>,
    pub im_e: Option<f64>,
    pub f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conj_res: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pde_res: Option<f64>,
    pub mask: u8,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricRecord {
    pub rho: f64,
    pub zeta: f64,
    pub a: f64,
    pub k: f64,
    pub f: f64,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

pub fn eval_csv(records: &[EvalRecord], with_residuals: bool, out: &mut dyn Write) -> std::io::Result<()> {
    if with_residuals {
        writeln!(out, "rho,zeta,re_E,im_E,f,conj_res,pde_res,mask")?;
    } else {
        writeln!(out, "rho,zeta,re_E,im_E,f,mask")?;
    }
    for r in records {
        if with_residuals {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt(r.rho),
                fmt(r.zeta),
                fmt_opt(r.re_e),
                fmt_opt(r.im_e),
                fmt_opt(r.f),
                fmt_opt(r.conj_res),
                fmt_opt(r.pde_res),
                r.mask
            )?;
        } else {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt(r.rho),
                fmt(r.zeta),
                fmt_opt(r.re_e),
                fmt_opt(r.im_e),
                fmt_opt(r.f),
                r.mask
            )?;
        }
    }
    Ok(())
}

pub fn metric_csv(records: &[MetricRecord], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "rho,zeta,A,k,f")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt(r.rho),
            fmt(r.zeta),
            fmt(r.a),
            fmt(r.k),
            fmt(r.f)
        )?;
    }
    Ok(())
}

pub fn json<T: Serialize>(records: &[T], out: &mut dyn Write) -> std::io::Result<()> {
    let body = serde_json::json!({ "records": records });
    writeln!(out, "{}", serde_json::to_string_pretty(&body)?)
}
