//! CSV emission. Floats are written with 17 significant digits.

use std::io::Write;

use super::{ReplicateSummary, TableRow};
use crate::error::{Error, Result};
use crate::smc::FilterTrace;

pub(crate) fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub(crate) fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

/// `step,resampled,ess_norm,alpha,rmse,log_marginal,mu_1..mu_d,sigma_trace`.
///
/// `rmse` may be shorter than the trace (e.g. empty when no truth is
/// known); missing values are written as `NaN`.
pub fn write_trace_csv<W: Write>(w: W, trace: &FilterTrace, rmse: &[f64]) -> Result<()> {
    let mut out = writer(w);
    let d = trace.steps.first().map_or(0, |s| s.diagnostics.estimate.dim());
    let mut header: Vec<String> =
        ["step", "resampled", "ess_norm", "alpha", "rmse", "log_marginal"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=d).map(|i| format!("mu_{i}")));
    header.push("sigma_trace".into());
    out.write_record(&header).map_err(csv_err)?;
    for (k, s) in trace.steps.iter().enumerate() {
        let diag = &s.diagnostics;
        let mut row = vec![
            s.step.to_string(),
            u8::from(diag.resampled).to_string(),
            float(diag.ess / trace.n_particles as f64),
            float(diag.alpha_used),
            float(rmse.get(k).copied().unwrap_or(f64::NAN)),
            float(s.log_marginal),
        ];
        row.extend(diag.estimate.mean.iter().map(|&m| float(m)));
        row.push(float(diag.estimate.cov.trace()));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `step,rmse_mean,rmse_std,ess_mean`.
pub fn write_summary_csv<W: Write>(w: W, summary: &ReplicateSummary) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["step", "rmse_mean", "rmse_std", "ess_mean"]).map_err(csv_err)?;
    for r in &summary.rows {
        out.write_record([r.step.to_string(), float(r.rmse_mean), float(r.rmse_std), float(r.ess_mean)])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `method,parameter,statistic,value,std`.
pub fn write_table_csv<W: Write>(w: W, rows: &[TableRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["method", "parameter", "statistic", "value", "std"]).map_err(csv_err)?;
    for r in rows {
        out.write_record([
            r.method.as_str(),
            r.parameter.as_str(),
            r.statistic.as_str(),
            &float(r.value),
            &float(r.std),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a header and rows of floats (the first column is an integer step).
pub(crate) fn write_rows<W: Write>(w: W, header: &[&str], rows: impl Iterator<Item = (usize, Vec<f64>)>) -> Result<()> {
    let mut out = writer(w);
    out.write_record(header).map_err(csv_err)?;
    for (step, values) in rows {
        let mut row = vec![step.to_string()];
        row.extend(values.into_iter().map(float));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
