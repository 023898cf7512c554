//! CSV matrix input, rounded JSON and CSV output.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use crate::error::CliError;

/// Row-major numeric table with an optional header.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub data: DMatrix<f64>,
}

impl Table {
    pub fn column_names(&self) -> Vec<String> {
        match &self.header {
            Some(h) => h.clone(),
            None => (0..self.data.ncols()).map(|c| format!("x{c}")).collect(),
        }
    }

    /// Resolves a column by header name or zero-based index.
    pub fn column_index(&self, key: &str) -> Result<usize, CliError> {
        if let Some(h) = &self.header {
            if let Some(i) = h.iter().position(|name| name == key) {
                return Ok(i);
            }
        }
        match key.parse::<usize>() {
            Ok(i) if i < self.data.ncols() => Ok(i),
            _ => Err(CliError::Validation(format!("no column `{key}`"))),
        }
    }
}

/// Reads a comma-separated matrix. The first row is a header when any of its
/// fields is not a number.
pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        records.push(rec);
    }
    let mut header = None;
    if let Some(first) = records.first() {
        if first.iter().any(|f| f.parse::<f64>().is_err()) {
            header = Some(first.iter().map(str::to_string).collect::<Vec<_>>());
            records.remove(0);
        }
    }
    if records.is_empty() {
        return Err(CliError::Parse(format!("{}: no numeric rows", path.display())));
    }
    let cols = records[0].len();
    if let Some(h) = &header {
        if h.len() != cols {
            return Err(CliError::Parse(format!(
                "{}: header has {} fields, rows have {cols}",
                path.display(),
                h.len()
            )));
        }
    }
    let mut values = Vec::with_capacity(records.len() * cols);
    for (r, rec) in records.iter().enumerate() {
        if rec.len() != cols {
            return Err(CliError::Parse(format!(
                "{}: row {} has {} fields, expected {cols}",
                path.display(),
                r + 1,
                rec.len()
            )));
        }
        for field in rec.iter() {
            let x: f64 = field.parse().map_err(|_| {
                CliError::Parse(format!("{}: row {}: `{field}` is not a number", path.display(), r + 1))
            })?;
            values.push(x);
        }
    }
    Ok(Table {
        header,
        data: DMatrix::from_row_slice(records.len(), cols, &values),
    })
}

/// A single row or column of numbers.
pub fn read_vector(path: &Path) -> Result<DVector<f64>, CliError> {
    let t = read_table(path)?;
    if t.data.nrows() != 1 && t.data.ncols() != 1 {
        return Err(CliError::Parse(format!(
            "{}: expected a single row or column, got {}x{}",
            path.display(),
            t.data.nrows(),
            t.data.ncols()
        )));
    }
    Ok(DVector::from_iterator(t.data.len(), t.data.transpose().iter().copied()))
}

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn num(x: f64) -> Value {
    Value::from(round12(x))
}

pub fn vector(v: &DVector<f64>) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

pub fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| Value::Array(r.iter().map(|&x| num(x)).collect())).collect())
}

/// Nested JSON rows back into a matrix.
pub fn matrix_from_json(v: &Value, what: &str) -> Result<DMatrix<f64>, CliError> {
    let rows = v
        .as_array()
        .ok_or_else(|| CliError::Parse(format!("`{what}` is not an array of rows")))?;
    let n = rows.len();
    let mut values = Vec::with_capacity(n * n);
    let mut cols = None;
    for row in rows {
        let row = row
            .as_array()
            .ok_or_else(|| CliError::Parse(format!("`{what}` row is not an array")))?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(CliError::Parse(format!("`{what}` rows differ in length")));
        }
        for x in row {
            values.push(
                x.as_f64()
                    .ok_or_else(|| CliError::Parse(format!("`{what}` holds a non-number")))?,
            );
        }
    }
    Ok(DMatrix::from_row_slice(n, cols.unwrap_or(0), &values))
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

pub fn write_json(path: Option<&Path>, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_output(path, &text)
}

/// Header plus rows of numbers, 12 significant digits.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(file);
    let io_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| round12(x).to_string())).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_is_detected() {
        let f = temp_csv("a, b\n1, 2\n3, 4\n");
        let t = read_table(f.path()).unwrap();
        assert_eq!(t.header.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
        assert_eq!(t.data, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(t.column_index("b").unwrap(), 1);
        assert_eq!(t.column_index("0").unwrap(), 0);
        assert!(t.column_index("c").is_err());
    }

    #[test]
    fn headerless_and_scientific() {
        let f = temp_csv("1e-3,-2\n\n3,4.5\n");
        let t = read_table(f.path()).unwrap();
        assert!(t.header.is_none());
        assert_eq!(t.data[(0, 0)], 1e-3);
        assert_eq!(t.column_names(), vec!["x0", "x1"]);
    }

    #[test]
    fn ragged_and_bad_cells_fail() {
        assert!(matches!(read_table(temp_csv("1,2\n3\n").path()), Err(CliError::Parse(_))));
        assert!(matches!(read_table(temp_csv("1,2\n3,x\n").path()), Err(CliError::Parse(_))));
        assert!(matches!(read_table(temp_csv("a,b\n").path()), Err(CliError::Parse(_))));
    }

    #[test]
    fn vectors_from_row_or_column() {
        assert_eq!(read_vector(temp_csv("1,2,3\n").path()).unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(read_vector(temp_csv("1\n2\n3\n").path()).unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        assert!(read_vector(temp_csv("1,2\n3,4\n").path()).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round12(std::f64::consts::PI), 3.14159265359);
        assert_eq!(round12(-1.0 / 3.0), -0.333333333333);
        assert_eq!(round12(0.0), 0.0);
        assert_eq!(round12(1e-300 / 3.0), 3.33333333333e-301);
    }
}
