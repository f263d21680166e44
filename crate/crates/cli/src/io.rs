//! File formats.
//!
//! Square matrices: a `p,<dim>` line followed by `p` rows of `p` values.
//! Rectangular matrices: `rows,<n>,cols,<m>` then `n` rows of `m` values.
//! Samples: a `y1,...,yp` header then one sample per row.
//! Every value is written with 17 significant digits so doubles round-trip.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use l0fa::admm::IterDiag;
use l0fa::SymMatrix;

use crate::error::CliError;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn reader(path: &Path) -> Result<csv::Reader<File>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(file))
}

fn parse_err(path: &Path, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::input(format!("{}:{line}: {msg}", path.display()))
}

fn records(path: &Path) -> Result<Vec<(u64, Vec<String>)>, CliError> {
    let mut out = Vec::new();
    for rec in reader(path)?.records() {
        let rec = rec.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn parse_row(path: &Path, line: u64, fields: &[String], expect: usize) -> Result<Vec<f64>, CliError> {
    if fields.len() != expect {
        return Err(parse_err(path, line, format!("expected {expect} values, found {}", fields.len())));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| parse_err(path, line, format!("not a number: {f:?}")))
        })
        .collect()
}

fn header_usize(path: &Path, line: u64, key: &str, field: Option<(&String, &String)>) -> Result<usize, CliError> {
    match field {
        Some((k, v)) if k == key => v
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad {key} value {v:?}"))),
        _ => Err(parse_err(path, line, format!("expected header field {key:?}"))),
    }
}

pub fn read_dense(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let recs = records(path)?;
    let Some((line, head)) = recs.first() else {
        return Err(CliError::input(format!("{}: empty file", path.display())));
    };
    let (rows, cols) = match head.len() {
        2 => {
            let p = header_usize(path, *line, "p", Some((&head[0], &head[1])))?;
            (p, p)
        }
        4 => (
            header_usize(path, *line, "rows", Some((&head[0], &head[1])))?,
            header_usize(path, *line, "cols", Some((&head[2], &head[3])))?,
        ),
        _ => return Err(parse_err(path, *line, "expected a \"p,<dim>\" or \"rows,<n>,cols,<m>\" header")),
    };
    if rows == 0 || cols == 0 {
        return Err(parse_err(path, *line, "matrix dimensions must be positive"));
    }
    let body = &recs[1..];
    if body.len() != rows {
        let at = body.last().map_or(*line, |r| r.0);
        return Err(parse_err(path, at, format!("expected {rows} rows, found {}", body.len())));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (i, (line, fields)) in body.iter().enumerate() {
        for (j, v) in parse_row(path, *line, fields, cols)?.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<SymMatrix, CliError> {
    let m = read_dense(path)?;
    if m.nrows() != m.ncols() {
        return Err(CliError::input(format!("{}: expected a square matrix", path.display())));
    }
    SymMatrix::new(m).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_rows(w: &mut csv::Writer<File>, m: &DMatrix<f64>, path: &Path) -> Result<(), CliError> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_matrix(path: &Path, m: &SymMatrix) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["p".to_string(), m.dim().to_string()])
        .map_err(|e| CliError::io(path, e))?;
    write_rows(&mut w, m.as_matrix(), path)
}

pub fn write_rect(path: &Path, m: &DMatrix<f64>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["rows".to_string(), m.nrows().to_string(), "cols".into(), m.ncols().to_string()])
        .map_err(|e| CliError::io(path, e))?;
    write_rows(&mut w, m, path)
}

pub fn write_samples(path: &Path, y: &DMatrix<f64>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let head: Vec<String> = (1..=y.ncols()).map(|j| format!("y{j}")).collect();
    w.write_record(&head).map_err(|e| CliError::io(path, e))?;
    write_rows(&mut w, y, path)
}

pub fn read_samples(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let recs = records(path)?;
    let Some((line, head)) = recs.first() else {
        return Err(CliError::input(format!("{}: empty file", path.display())));
    };
    let p = head.len();
    for (j, name) in head.iter().enumerate() {
        if *name != format!("y{}", j + 1) {
            return Err(parse_err(path, *line, format!("expected header y1..y{p}, found {name:?}")));
        }
    }
    let body = &recs[1..];
    if body.is_empty() {
        return Err(parse_err(path, *line, "no samples"));
    }
    let mut y = DMatrix::zeros(body.len(), p);
    for (i, (line, fields)) in body.iter().enumerate() {
        for (j, v) in parse_row(path, *line, fields, p)?.into_iter().enumerate() {
            y[(i, j)] = v;
        }
    }
    Ok(y)
}

pub fn write_diagnostics(path: &Path, diags: &[IterDiag]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "k", "beta1", "beta2", "beta3", "beta4", "beta5", "beta6", "lagrangian", "f_val", "s_l0",
    ])
    .map_err(|e| CliError::io(path, e))?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for d in diags {
        let mut row = vec![d.k.to_string()];
        row.extend(d.betas.iter().map(|b| fmt_f64(*b)));
        row.push(opt(d.lagrangian));
        row.push(opt(d.f_val));
        row.push(d.s_l0.to_string());
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Header plus rows of already formatted fields.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    file.write_all(text.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| CliError::io(path, e))
}
