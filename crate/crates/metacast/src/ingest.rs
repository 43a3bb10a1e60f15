//! Dataset, base-forecast and prediction file I/O, plus the canonical
//! base-model lexicon that fixes forecast-matrix column order.
//!
//! Formats:
//! - series CSV: header row, then `id,v1,v2,...` with ragged rows allowed
//!   (trailing empty cells are dropped);
//! - external forecast CSV: `series_id,model_id,t1..th`;
//! - prediction CSV: `series_id,t1..th`.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::core::{FrequencyClass, TimeSeries};
use crate::error::{Error, Result};

/// Canonical base-model ids, in forecast-matrix column order. The plain
/// naive method is deliberately absent: after the log transform its
/// forecast column is identically zero and carries no information.
pub const BASE_MODEL_LEXICON: [&str; 8] = [
    "rwdrift", "snaive", "theta", "arima", "ets", "tbats", "stlmar", "nnetar",
];

/// Whether `id` belongs to the lexicon.
pub fn is_base_model(id: &str) -> bool {
    BASE_MODEL_LEXICON.contains(&id)
}

/// Paths and filters describing one dataset.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub train_path: PathBuf,
    pub test_path: Option<PathBuf>,
    pub frequency: FrequencyClass,
    pub id_prefix_filter: Option<String>,
}

impl DatasetManifest {
    /// Loads the training series and, when present, the test actuals.
    /// Every test id must appear in the training file and every test row
    /// must hold exactly one horizon of values.
    pub fn load(&self) -> Result<(Vec<TimeSeries>, Option<BTreeMap<String, Vec<f64>>>)> {
        let mut train = load_series_csv(&self.train_path, self.frequency)?;
        if let Some(prefix) = &self.id_prefix_filter {
            train.retain(|s| s.id().starts_with(prefix.as_str()));
        }
        let test = match &self.test_path {
            None => None,
            Some(path) => {
                let h = self.frequency.horizon();
                let rows = load_series_csv(path, self.frequency)?;
                let train_ids: HashSet<&str> = train.iter().map(|s| s.id()).collect();
                let mut map = BTreeMap::new();
                for row in rows {
                    if let Some(prefix) = &self.id_prefix_filter {
                        if !row.id().starts_with(prefix.as_str()) {
                            continue;
                        }
                    }
                    if !train_ids.contains(row.id()) {
                        return Err(Error::Data(format!(
                            "test id {} not present in training file",
                            row.id()
                        )));
                    }
                    if row.len() != h {
                        return Err(Error::Data(format!(
                            "test series {} has {} values, expected horizon {h}",
                            row.id(),
                            row.len()
                        )));
                    }
                    map.insert(row.id().to_string(), row.values().to_vec());
                }
                Some(map)
            }
        };
        Ok((train, test))
    }
}

fn open_csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file))
}

/// Reads a series CSV; row order is preserved and ids must be unique.
pub fn load_series_csv(path: impl AsRef<Path>, frequency: FrequencyClass) -> Result<Vec<TimeSeries>> {
    let path = path.as_ref();
    let mut reader = open_csv_reader(path)?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row,
            col: 0,
            msg: e.to_string(),
        })?;
        let mut fields: Vec<&str> = record.iter().map(str::trim).collect();
        while fields.len() > 1 && fields.last() == Some(&"") {
            fields.pop();
        }
        if fields.is_empty() || fields[0].is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                col: 1,
                msg: "missing series id".into(),
            });
        }
        let id = fields[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let mut values = Vec::with_capacity(fields.len() - 1);
        for (j, cell) in fields[1..].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                col: j + 2,
                msg: format!("non-numeric cell '{cell}'"),
            })?;
            values.push(v);
        }
        out.push(TimeSeries::new(id, frequency, values, None)?);
    }
    Ok(out)
}

/// External per-model forecast columns keyed by series id.
pub type ExternalForecasts = BTreeMap<String, Vec<(String, Vec<f64>)>>;

/// Reads `series_id,model_id,t1..th` rows. Every row must carry exactly
/// `horizon` values, a known model id and finite entries.
pub fn load_external_forecasts(path: impl AsRef<Path>, horizon: usize) -> Result<ExternalForecasts> {
    let path = path.as_ref();
    let mut reader = open_csv_reader(path)?;
    let mut out: ExternalForecasts = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2;
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row,
            col: 0,
            msg: e.to_string(),
        })?;
        if record.len() != horizon + 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                col: record.len(),
                msg: format!(
                    "expected {} cells (series_id, model_id, {horizon} values), got {}",
                    horizon + 2,
                    record.len()
                ),
            });
        }
        let series_id = record[0].trim().to_string();
        let model_id = record[1].trim().to_string();
        if !is_base_model(&model_id) {
            return Err(Error::UnknownModel(model_id));
        }
        let mut values = Vec::with_capacity(horizon);
        for j in 0..horizon {
            let cell = record[j + 2].trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                col: j + 3,
                msg: format!("non-numeric cell '{cell}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    col: j + 3,
                    msg: "non-finite forecast entry".into(),
                });
            }
            values.push(v);
        }
        let columns = out.entry(series_id.clone()).or_default();
        if columns.iter().any(|(m, _)| *m == model_id) {
            return Err(Error::Data(format!(
                "duplicate external column {series_id}/{model_id}"
            )));
        }
        columns.push((model_id, values));
    }
    Ok(out)
}

/// Writes `series_id,t1..th` rows in id order. Values print in Rust's
/// shortest exact decimal form, so reading them back is lossless.
pub fn write_forecast_csv(
    path: impl AsRef<Path>,
    forecasts: &BTreeMap<String, Vec<f64>>,
) -> Result<()> {
    let path = path.as_ref();
    for (id, vals) in forecasts {
        if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "refusing to write non-finite forecast {v} for series {id}"
            )));
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let h = forecasts.values().map(Vec::len).max().unwrap_or(0);
    let header: Vec<String> = std::iter::once("series_id".to_string())
        .chain((1..=h).map(|i| format!("t{i}")))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for (id, vals) in forecasts {
        let mut line = id.clone();
        for v in vals {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes re-ingestable `series_id,model_id,t1..th` rows.
pub fn write_external_forecast_csv(
    path: impl AsRef<Path>,
    rows: &[(String, String, Vec<f64>)],
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let h = rows.iter().map(|(_, _, v)| v.len()).max().unwrap_or(0);
    let header: Vec<String> = ["series_id".to_string(), "model_id".to_string()]
        .into_iter()
        .chain((1..=h).map(|i| format!("t{i}")))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for (series_id, model_id, vals) in rows {
        if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "refusing to write non-finite forecast {v} for {series_id}/{model_id}"
            )));
        }
        let mut line = format!("{series_id},{model_id}");
        for v in vals {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a prediction CSV written by [`write_forecast_csv`].
pub fn load_prediction_csv(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<f64>>> {
    let path = path.as_ref();
    let mut reader = open_csv_reader(path)?;
    let mut out = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2;
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row,
            col: 0,
            msg: e.to_string(),
        })?;
        let mut fields: Vec<&str> = record.iter().map(str::trim).collect();
        while fields.len() > 1 && fields.last() == Some(&"") {
            fields.pop();
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                col: 1,
                msg: "prediction row needs an id and at least one value".into(),
            });
        }
        let id = fields[0].to_string();
        let mut values = Vec::with_capacity(fields.len() - 1);
        for (j, cell) in fields[1..].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                col: j + 2,
                msg: format!("non-numeric cell '{cell}'"),
            })?;
            values.push(v);
        }
        if out.insert(id.clone(), values).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }
    Ok(out)
}
