//! CSV panels: rows are time points, columns are series.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use varfdr::model::PanelData;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    pub header: bool,
    pub delimiter: u8,
    pub demean: bool,
    /// Implies demeaning; divides by the sample standard deviation.
    pub standardize: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            header: true,
            delimiter: b',',
            demean: true,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub panel: PanelData,
    pub names: Vec<String>,
    /// Series as read after preprocessing, `N x (K + T)`.
    pub series: DMatrix<f64>,
}

/// Reads a numeric table into an `N x rows` matrix and its series names.
pub fn read_table(path: &Path, options: &IngestOptions) -> CliResult<(DMatrix<f64>, Vec<String>)> {
    let data_err = |message: String| CliError::Data {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.header)
        .delimiter(options.delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => data_err(format!("{other:?}")),
        })?;
    let mut names: Option<Vec<String>> = if options.header {
        let h = reader.headers().map_err(|e| data_err(e.to_string()))?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data_err(format!("ragged or unreadable row: {e}")))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| data_err(format!("non-numeric cell {cell:?} at data row {}, column {}", r + 1, c + 1)))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    let width = match (&names, rows.first()) {
        (Some(n), _) => n.len(),
        (None, Some(r)) => r.len(),
        (None, None) => 0,
    };
    if rows.is_empty() || width == 0 {
        return Err(data_err("no data rows".into()));
    }
    let names = names
        .take()
        .unwrap_or_else(|| (1..=width).map(|i| format!("y{i}")).collect());
    let values = DMatrix::from_fn(width, rows.len(), |i, t| rows[t][i]);
    Ok((values, names))
}

/// Reads, preprocesses and stacks a panel with `lag_order` lags. The first
/// `lag_order` rows become initial conditions.
pub fn ingest_csv(path: &Path, lag_order: usize, options: &IngestOptions) -> CliResult<Ingested> {
    let (mut series, names) = read_table(path, options)?;
    preprocess(&mut series, &names, options).map_err(|message| CliError::Data {
        path: path.to_path_buf(),
        message,
    })?;
    if series.ncols() <= lag_order {
        return Err(CliError::Data {
            path: path.to_path_buf(),
            message: format!("{} rows cannot support {lag_order} lags", series.ncols()),
        });
    }
    let panel = PanelData::from_series(&series, lag_order)?;
    Ok(Ingested { panel, names, series })
}

/// Demeans and optionally standardizes each series in place.
pub fn preprocess(series: &mut DMatrix<f64>, names: &[String], options: &IngestOptions) -> Result<(), String> {
    if !(options.demean || options.standardize) {
        return Ok(());
    }
    let t = series.ncols();
    for (i, mut row) in series.row_iter_mut().enumerate() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
        if options.standardize {
            let sd = if t > 1 { (row.norm_squared() / (t - 1) as f64).sqrt() } else { 0.0 };
            if !(sd > 0.0) {
                return Err(format!("series {:?} has zero variance and cannot be standardized", names[i]));
            }
            row /= sd;
        }
    }
    Ok(())
}

/// Writes `series` (`N x rows`) with one row per time point. Values use the
/// shortest representation that parses back exactly.
pub fn write_table(path: &Path, series: &DMatrix<f64>, names: &[String], header_comment: Option<&str>) -> CliResult<()> {
    let mut out = Vec::new();
    if let Some(c) = header_comment {
        for line in c.lines() {
            writeln!(out, "# {line}").expect("write to memory");
        }
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(names).map_err(|e| CliError::io(path, e.into()))?;
        for t in 0..series.ncols() {
            w.write_record(series.column(t).iter().map(|v| format!("{v:?}")))
                .map_err(|e| CliError::io(path, e.into()))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    std::fs::write(path, out).map_err(|e| CliError::io(path, e))
}
