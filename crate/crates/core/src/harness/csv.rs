use super::runner::MethodResult;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub const CSV_HEADER: &str = "experiment,method,grid_param,grid_value,fdr,fdr_se,power,power_se,trials,seed";

/// Renders rows in the order given. Floats use Rust's shortest round-trip
/// form, so identical results give identical bytes.
pub fn render_csv(results: &[MethodResult]) -> Result<String> {
    if results.is_empty() {
        return Err(Error::InvalidInput("no results to write".into()));
    }
    let mut out = String::with_capacity(64 * (results.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.experiment, r.method, r.grid_param, r.grid_value, r.fdr, r.fdr_se, r.power, r.power_se, r.trials, r.seed
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Writes the CSV to `path`. Nothing is created when `results` is empty.
pub fn emit_csv(results: &[MethodResult], path: &Path) -> Result<()> {
    let text = render_csv(results)?;
    std::fs::write(path, text)?;
    Ok(())
}
