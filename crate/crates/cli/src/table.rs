//! CSV tables: design points keyed by variable name, output columns, and
//! generic numeric tables.

use std::fs::File;
use std::path::Path;

use mixkrig::DesignSpace;

use crate::error::CliError;

fn open(path: &Path) -> Result<csv::Reader<File>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        CliError::Io(format!("{}: {e}", path.display()))
    } else {
        CliError::Usage(format!("{}: {e}", path.display()))
    }
}

/// Reads a design-point CSV whose header names every variable of `space`,
/// in any order. Returns stored values in space order.
pub fn read_points(space: &DesignSpace, path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = open(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut columns = Vec::with_capacity(space.n_vars());
    for var in space.variables() {
        let col = header.iter().position(|h| h == var.name).ok_or_else(|| {
            CliError::Usage(format!("{}: missing column '{}'", path.display(), var.name))
        })?;
        columns.push(col);
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let fields: Vec<&str> = columns.iter().map(|&c| record.get(c).unwrap_or("")).collect();
        let values = space
            .parse_point(&fields)
            .map_err(|e| CliError::Usage(format!("{} row {}: {e}", path.display(), line + 1)))?;
        rows.push(values);
    }
    Ok(rows)
}

/// Reads a one-column numeric CSV (any header).
pub fn read_column(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = open(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() != 1 {
        return Err(CliError::Usage(format!(
            "{}: expected a single column, found {}",
            path.display(),
            header.len()
        )));
    }
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let v: f64 = record[0].parse().map_err(|_| {
            CliError::Usage(format!("{} row {}: '{}' is not a number", path.display(), line + 1, &record[0]))
        })?;
        if !v.is_finite() {
            return Err(CliError::Usage(format!("{} row {}: non-finite value", path.display(), line + 1)));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    let io = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(io)?;
    writer.write_record(header).map_err(io)?;
    for row in rows {
        writer.write_record(row).map_err(io)?;
    }
    writer.flush().map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn variable_header(space: &DesignSpace) -> Vec<String> {
    space.variables().iter().map(|v| v.name.clone()).collect()
}

pub fn write_points(space: &DesignSpace, path: &Path, points: &[Vec<f64>]) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = points.iter().map(|p| space.format_point(p)).collect();
    write_table(path, &variable_header(space), &rows)
}

pub fn write_column(path: &Path, name: &str, values: &[f64]) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = values.iter().map(|v| vec![v.to_string()]).collect();
    write_table(path, &[name.to_string()], &rows)
}
