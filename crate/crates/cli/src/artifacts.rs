//! CSV tables that later stages read back.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use ttchaos::pce::MultiIndexSet;
use ttchaos::pipeline::alpha_label;

use crate::error::CliError;

fn format_err(path: &Path, line: usize, what: &str) -> CliError {
    CliError::Artifact {
        path: path.to_path_buf(),
        source: ttchaos::Error::Format(format!("line {line}: {what}")),
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::artifact(path)(e.into()))
}

/// Writes `columns` of `m` indexed by `set`, header `alpha,<row>,value`.
pub fn write_indexed(path: &Path, row: &str, m: &DMatrix<f64>, set: &MultiIndexSet) -> Result<(), CliError> {
    let mut out = create(path)?;
    let io = |e: std::io::Error| CliError::artifact(path)(e.into());
    writeln!(out, "alpha,{row},value").map_err(io)?;
    for (j, alpha) in set.iter().enumerate() {
        let label = alpha_label(&alpha);
        for x in 0..m.nrows() {
            writeln!(out, "{label},{x},{:e}", m[(x, j)]).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Reads a table written by [`write_indexed`] back into `rows x #set`.
pub fn read_indexed(path: &Path, rows: usize, set: &MultiIndexSet) -> Result<DMatrix<f64>, CliError> {
    let file = File::open(path).map_err(|e| CliError::artifact(path)(e.into()))?;
    let mut m = DMatrix::from_element(rows, set.len(), f64::NAN);
    for (n, line) in BufReader::new(file).lines().enumerate().skip(1) {
        let line = line.map_err(|e| CliError::artifact(path)(e.into()))?;
        let f: Vec<&str> = line.split(',').collect();
        let [alpha, x, v] = f[..] else {
            return Err(format_err(path, n + 1, "expected 3 fields"));
        };
        let alpha: Vec<usize> = alpha
            .split(' ')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| format_err(path, n + 1, "bad multi-index"))?;
        let j = set
            .position(&alpha)
            .ok_or_else(|| format_err(path, n + 1, "multi-index outside the configured set"))?;
        let x: usize = x.parse().map_err(|_| format_err(path, n + 1, "bad row"))?;
        if x >= rows {
            return Err(format_err(path, n + 1, "row out of range"));
        }
        m[(x, j)] = v.parse().map_err(|_| format_err(path, n + 1, "bad value"))?;
    }
    if m.iter().any(|v| v.is_nan()) {
        return Err(format_err(path, 0, "table is incomplete"));
    }
    Ok(m)
}

/// Header `row,value`.
pub fn write_vector(path: &Path, v: &[f64]) -> Result<(), CliError> {
    let mut out = create(path)?;
    let io = |e: std::io::Error| CliError::artifact(path)(e.into());
    writeln!(out, "row,value").map_err(io)?;
    for (i, x) in v.iter().enumerate() {
        writeln!(out, "{i},{x:e}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let file = File::open(path).map_err(|e| CliError::artifact(path)(e.into()))?;
    let mut v = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate().skip(1) {
        let line = line.map_err(|e| CliError::artifact(path)(e.into()))?;
        let (i, x) = line.split_once(',').ok_or_else(|| format_err(path, n + 1, "expected 2 fields"))?;
        if i.parse::<usize>().ok() != Some(v.len()) {
            return Err(format_err(path, n + 1, "rows out of order"));
        }
        v.push(x.parse().map_err(|_| format_err(path, n + 1, "bad value"))?);
    }
    Ok(v)
}

/// Writes a header line and rows of already formatted fields.
pub fn write_table(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut out = create(path)?;
    let io = |e: std::io::Error| CliError::artifact(path)(e.into());
    writeln!(out, "{header}").map_err(io)?;
    for r in rows {
        writeln!(out, "{}", r.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Runs a writer into a buffered file, attaching the path to any error.
pub fn with_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> ttchaos::Result<()>) -> Result<(), CliError> {
    let mut out = create(path)?;
    f(&mut out).map_err(CliError::artifact(path))?;
    out.flush().map_err(|e| CliError::artifact(path)(e.into()))
}
