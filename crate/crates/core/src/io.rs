//! CSV ingestion and export of samples.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Sample;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetOptions {
    /// Response column; `y` when unset.
    pub y_column: Option<String>,
    /// Covariate columns; every other column when unset.
    pub covariates: Option<Vec<String>>,
    /// Observations live on `(a, b)` and are mapped to `(y − a)/(b − a)`.
    pub rescale: Option<(f64, f64)>,
}

fn parse_field(field: &str, line: usize, column: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("column '{column}': cannot parse '{field}' as a number"),
    })
}

fn check_rescale(rescale: Option<(f64, f64)>) -> Result<()> {
    if let Some((a, b)) = rescale {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::Request(format!("rescale interval ({a}, {b}) is not valid")));
        }
    }
    Ok(())
}

/// Reads a headed CSV holding the response and optional covariates.
pub fn read_dataset(path: &Path, opts: &DatasetOptions) -> Result<Sample> {
    check_rescale(opts.rescale)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let y_name = opts.y_column.clone().unwrap_or_else(|| "y".to_string());
    let y_idx = headers.iter().position(|h| h == y_name).ok_or_else(|| Error::Parse {
        line: 1,
        message: format!("no column named '{y_name}'"),
    })?;
    let cov_names: Vec<String> = match &opts.covariates {
        Some(names) => names.clone(),
        None => headers.iter().enumerate().filter(|&(i, _)| i != y_idx).map(|(_, h)| h.to_string()).collect(),
    };
    let cov_idx: Vec<usize> = cov_names
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("no column named '{name}'"),
            })
        })
        .collect::<Result<_>>()?;

    let mut y = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw = parse_field(&record[y_idx], line, &y_name)?;
        let value = match opts.rescale {
            Some((a, b)) => (raw - a) / (b - a),
            None => raw,
        };
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::Parse {
                line,
                message: format!("response {raw} is not inside the unit interval after rescaling"),
            });
        }
        y.push(value);
        let row = cov_idx
            .iter()
            .zip(&cov_names)
            .map(|(&i, name)| parse_field(&record[i], line, name))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if cov_idx.is_empty() {
        rows.clear();
    }
    Sample::new(y, rows)
}

/// Reads a headed all-numeric CSV as rows.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .zip(headers.iter())
            .map(|(f, h)| parse_field(f, line, h))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Writes `y` plus `x1..xl` columns, optionally mapping `y` to `a + (b − a) y`.
pub fn write_sample(path: &Path, sample: &Sample, rescale: Option<(f64, f64)>) -> Result<()> {
    check_rescale(rescale)?;
    let mut w = csv::Writer::from_path(path)?;
    let l = sample.covariate_count();
    let mut header = vec!["y".to_string()];
    header.extend((1..=l).map(|s| format!("x{s}")));
    w.write_record(&header)?;
    for (i, &y) in sample.y().iter().enumerate() {
        let v = match rescale {
            Some((a, b)) => a + (b - a) * y,
            None => y,
        };
        let mut rec = vec![v.to_string()];
        rec.extend(sample.x_row(i).iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
