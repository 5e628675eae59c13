//! File emission: trajectory CSV, JSON sidecars, and reading observed data.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cpt_core::sweep::{SCHEMA_VERSION, TOOL_VERSION};
use cpt_core::{Axis, Series};
use serde::Serialize;

use crate::exit::CliError;

/// Creates `dir` if needed.
pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::input(e.to_string()))?;
    s.push('\n');
    write_bytes(dir, name, s.as_bytes())
}

/// Writes with a closure that produces CSV into a buffer.
pub fn write_with<F>(dir: &Path, name: &str, f: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> cpt_core::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_bytes(dir, name, &buf)
}

/// `#` header lines shared by every CSV the tool writes.
pub fn csv_header<W: Write, P: Serialize>(w: &mut W, seed: u64, params: &P) -> std::io::Result<()> {
    let json = serde_json::to_string(params).map_err(std::io::Error::other)?;
    writeln!(w, "# schema_version={SCHEMA_VERSION}")?;
    writeln!(w, "# tool={TOOL_VERSION}")?;
    writeln!(w, "# rng_seed={seed}")?;
    writeln!(w, "# params={json}")
}

/// Trajectory CSV: `t_ns,p0,p1,p2,p3`.
pub fn write_trajectory_csv<W: Write, P: Serialize>(
    mut w: W,
    rows: &[(f64, [f64; 4])],
    seed: u64,
    params: &P,
) -> std::io::Result<()> {
    csv_header(&mut w, seed, params)?;
    writeln!(w, "t_ns,p0,p1,p2,p3")?;
    for (t, p) in rows {
        writeln!(w, "{t},{},{},{},{}", p[0], p[1], p[2], p[3])?;
    }
    Ok(())
}

/// Reads the `t_ns` and `p2` columns of a trajectory CSV.
pub fn read_observed(path: &Path) -> Result<Series, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .clone();
    if headers.is_empty() {
        return Err(CliError::input(format!("{}: empty file, expected columns t_ns,p2", path.display())));
    }
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::input(format!(
                "{}: missing column `{name}` (trajectory schema is t_ns,p0,p1,p2,p3)",
                path.display()
            ))
        })
    };
    let (it, ip) = (col("t_ns")?, col("p2")?);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let num = |i: usize| -> Result<f64, CliError> {
            let field = rec.get(i).unwrap_or("");
            field.parse().map_err(|_| {
                CliError::input(format!("{}: data row {}: `{field}` is not a number", path.display(), k + 1))
            })
        };
        x.push(num(it)?);
        y.push(num(ip)?);
    }
    if x.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    Series::new(Axis::T0, x, y).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}
