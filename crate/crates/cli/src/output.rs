use std::path::Path;

use serde::Serialize;

use crate::CliError;

fn write_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| write_error(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| write_error(&path, e))
}

/// Writes `header` then `rows` as CSV.
pub fn write_csv<R, I>(dir: &Path, name: &str, header: &[String], rows: I) -> Result<(), CliError>
where
    R: IntoIterator<Item = String>,
    I: IntoIterator<Item = R>,
{
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| write_error(&path, e))?;
    w.write_record(header).map_err(|e| write_error(&path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| write_error(&path, e))?;
    }
    w.flush().map_err(|e| write_error(&path, e))
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Empty cell for missing values so plotting tools read them as NaN.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn join_thresholds(t: &[usize]) -> String {
    t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}
