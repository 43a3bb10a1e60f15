//! Domain types shared by every other module: frequency classes, series,
//! forecast matrices and the transformed samples fed to the combiners.
//!
//! Everything here is immutable after construction and safe to share across
//! worker threads.

use crate::error::{Error, Result};

/// The six series frequencies with their fixed forecast horizons and
/// seasonal periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrequencyClass {
    Yearly,
    Quarterly,
    Monthly,
    Weekly,
    Daily,
    Hourly,
}

impl FrequencyClass {
    pub const ALL: [FrequencyClass; 6] = [
        FrequencyClass::Yearly,
        FrequencyClass::Quarterly,
        FrequencyClass::Monthly,
        FrequencyClass::Weekly,
        FrequencyClass::Daily,
        FrequencyClass::Hourly,
    ];

    /// Number of steps to forecast for this class.
    pub fn horizon(self) -> usize {
        match self {
            FrequencyClass::Yearly => 6,
            FrequencyClass::Quarterly => 8,
            FrequencyClass::Monthly => 18,
            FrequencyClass::Weekly => 13,
            FrequencyClass::Daily => 14,
            FrequencyClass::Hourly => 48,
        }
    }

    /// Seasonal period used by the seasonal-difference scaling and the
    /// seasonally adjusted benchmark. 1 means non-seasonal.
    pub fn seasonal_period(self) -> usize {
        match self {
            FrequencyClass::Yearly => 1,
            FrequencyClass::Quarterly => 4,
            FrequencyClass::Monthly => 12,
            FrequencyClass::Weekly => 1,
            FrequencyClass::Daily => 1,
            FrequencyClass::Hourly => 24,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrequencyClass::Yearly => "yearly",
            FrequencyClass::Quarterly => "quarterly",
            FrequencyClass::Monthly => "monthly",
            FrequencyClass::Weekly => "weekly",
            FrequencyClass::Daily => "daily",
            FrequencyClass::Hourly => "hourly",
        }
    }

    /// Case-insensitive parse of a class name.
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "yearly" => Ok(FrequencyClass::Yearly),
            "quarterly" => Ok(FrequencyClass::Quarterly),
            "monthly" => Ok(FrequencyClass::Monthly),
            "weekly" => Ok(FrequencyClass::Weekly),
            "daily" => Ok(FrequencyClass::Daily),
            "hourly" => Ok(FrequencyClass::Hourly),
            other => Err(Error::Data(format!("unknown frequency class '{other}'"))),
        }
    }
}

impl std::fmt::Display for FrequencyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One univariate series. Values are ordered oldest to newest; the last
/// observation sits at forecast time t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    id: String,
    frequency: FrequencyClass,
    values: Vec<f64>,
    domain_tag: Option<String>,
}

impl TimeSeries {
    /// Builds a series, rejecting empty, non-finite or length-1 inputs.
    pub fn new(
        id: impl Into<String>,
        frequency: FrequencyClass,
        values: Vec<f64>,
        domain_tag: Option<String>,
    ) -> Result<Self> {
        let id = id.into();
        if values.len() < 2 {
            return Err(Error::Series {
                id,
                msg: format!("length {} < 2", values.len()),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Series {
                id,
                msg: format!("non-finite value at position {pos}"),
            });
        }
        Ok(TimeSeries {
            id,
            frequency,
            values,
            domain_tag,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn frequency(&self) -> FrequencyClass {
        self.frequency
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("non-empty by construction")
    }

    pub fn domain_tag(&self) -> Option<&str> {
        self.domain_tag.as_deref()
    }

    /// The same series with only its first `n` observations.
    pub fn truncated(&self, n: usize) -> Result<TimeSeries> {
        if n > self.values.len() {
            return Err(Error::Series {
                id: self.id.clone(),
                msg: format!("cannot truncate to {n} > length {}", self.values.len()),
            });
        }
        TimeSeries::new(
            self.id.clone(),
            self.frequency,
            self.values[..n].to_vec(),
            self.domain_tag.clone(),
        )
    }
}

/// Dense row-major matrix of f64, used for forecast matrices and
/// transformed feature blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Data(format!(
                "matrix data length {} != {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix column by column.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::Data(format!(
                    "column {j} has length {} != {rows}",
                    c.len()
                )));
            }
        }
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                data[i * cols + j] = *v;
            }
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Elementwise map into a new matrix.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// The h x M block of base-model forecasts for one series: element (i, j)
/// is model j's forecast at step t = i + 1. Columns follow the canonical
/// base-model order.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastMatrix {
    series_id: String,
    model_ids: Vec<String>,
    values: Matrix,
}

impl ForecastMatrix {
    pub fn new(series_id: impl Into<String>, model_ids: Vec<String>, values: Matrix) -> Result<Self> {
        let series_id = series_id.into();
        if values.cols() != model_ids.len() {
            return Err(Error::Data(format!(
                "forecast matrix for {series_id}: {} columns but {} model ids",
                values.cols(),
                model_ids.len()
            )));
        }
        for (k, id) in model_ids.iter().enumerate() {
            if model_ids[..k].contains(id) {
                return Err(Error::Data(format!(
                    "forecast matrix for {series_id}: duplicate model id {id}"
                )));
            }
        }
        if let Some(pos) = values.data().iter().position(|v| !v.is_finite()) {
            let (i, j) = (pos / values.cols(), pos % values.cols());
            return Err(Error::Numeric(format!(
                "forecast matrix for {series_id}: non-finite entry at step {}, model {}",
                i + 1,
                model_ids[j]
            )));
        }
        Ok(ForecastMatrix {
            series_id,
            model_ids,
            values,
        })
    }

    pub fn series_id(&self) -> &str {
        &self.series_id
    }

    pub fn horizon(&self) -> usize {
        self.values.rows()
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// Forecast column of one base model; fails for ids outside the lexicon.
    pub fn column(&self, model_id: &str) -> Result<Vec<f64>> {
        let j = self
            .model_ids
            .iter()
            .position(|m| m == model_id)
            .ok_or_else(|| Error::UnknownModel(model_id.to_string()))?;
        Ok(self.values.column(j))
    }
}

/// How raw units map into combiner space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformMode {
    /// Clip at the floor, divide by the last in-sample observation, log.
    LastObsLog,
    /// Divide by the mean absolute in-sample seasonal difference; no log.
    MaseScale,
}

impl TransformMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "last_obs_log" | "lastobslog" | "log" => Ok(TransformMode::LastObsLog),
            "mase_scale" | "masescale" | "mase" => Ok(TransformMode::MaseScale),
            other => Err(Error::Config(format!("unknown transform mode '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformMode::LastObsLog => "last_obs_log",
            TransformMode::MaseScale => "mase_scale",
        }
    }
}

/// Per-series scaling record that makes the transform invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleRecord {
    series_id: String,
    normalizer: f64,
    mode: TransformMode,
}

impl ScaleRecord {
    pub fn new(series_id: impl Into<String>, normalizer: f64, mode: TransformMode) -> Result<Self> {
        let series_id = series_id.into();
        if !normalizer.is_finite() || normalizer <= 0.0 {
            return Err(Error::Series {
                id: series_id,
                msg: format!("scale normalizer must be positive and finite, got {normalizer}"),
            });
        }
        Ok(ScaleRecord {
            series_id,
            normalizer,
            mode,
        })
    }

    pub fn series_id(&self) -> &str {
        &self.series_id
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn mode(&self) -> TransformMode {
        self.mode
    }
}

/// One combiner sample: transformed base forecasts plus, for training,
/// the transformed held-out actuals.
#[derive(Debug, Clone)]
pub struct TransformedSample {
    pub features: Matrix,
    pub label: Option<Vec<f64>>,
    pub scale: ScaleRecord,
    pub frequency: FrequencyClass,
}

impl TransformedSample {
    pub fn horizon(&self) -> usize {
        self.features.rows()
    }

    pub fn series_id(&self) -> &str {
        self.scale.series_id()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_table_is_closed() {
        let expected = [
            (FrequencyClass::Yearly, 6, 1),
            (FrequencyClass::Quarterly, 8, 4),
            (FrequencyClass::Monthly, 18, 12),
            (FrequencyClass::Weekly, 13, 1),
            (FrequencyClass::Daily, 14, 1),
            (FrequencyClass::Hourly, 48, 24),
        ];
        assert_eq!(FrequencyClass::ALL.len(), expected.len());
        for (class, h, p) in expected {
            assert_eq!(class.horizon(), h);
            assert_eq!(class.seasonal_period(), p);
            assert_eq!(FrequencyClass::parse(class.name()).unwrap(), class);
        }
        assert!(FrequencyClass::parse("biweekly").is_err());
    }

    #[test]
    fn series_rejects_short_and_non_finite() {
        assert!(TimeSeries::new("a", FrequencyClass::Yearly, vec![1.0], None).is_err());
        assert!(TimeSeries::new("a", FrequencyClass::Yearly, vec![], None).is_err());
        assert!(
            TimeSeries::new("a", FrequencyClass::Yearly, vec![1.0, f64::NAN], None).is_err()
        );
        let ts = TimeSeries::new("a", FrequencyClass::Yearly, vec![1.0, 2.0], None).unwrap();
        assert_eq!(ts.last(), 2.0);
    }

    #[test]
    fn truncation_keeps_identity() {
        let ts =
            TimeSeries::new("q1", FrequencyClass::Quarterly, vec![1.0, 2.0, 3.0, 4.0], None)
                .unwrap();
        let cut = ts.truncated(2).unwrap();
        assert_eq!(cut.id(), "q1");
        assert_eq!(cut.values(), &[1.0, 2.0]);
        assert!(ts.truncated(1).is_err());
        assert!(ts.truncated(9).is_err());
    }

    #[test]
    fn forecast_matrix_column_lookup() {
        let m = Matrix::from_columns(2, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let fm = ForecastMatrix::new("s", vec!["a".into(), "b".into()], m).unwrap();
        assert_eq!(fm.column("b").unwrap(), vec![3.0, 4.0]);
        assert!(matches!(fm.column("zzz"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn forecast_matrix_rejects_bad_shapes() {
        let m = Matrix::zeros(2, 2);
        assert!(ForecastMatrix::new("s", vec!["a".into()], m.clone()).is_err());
        assert!(ForecastMatrix::new("s", vec!["a".into(), "a".into()], m).is_err());
        let bad = Matrix::new(1, 1, vec![f64::INFINITY]).unwrap();
        assert!(ForecastMatrix::new("s", vec!["a".into()], bad).is_err());
    }

    #[test]
    fn scale_record_requires_positive_normalizer() {
        assert!(ScaleRecord::new("s", 0.0, TransformMode::LastObsLog).is_err());
        assert!(ScaleRecord::new("s", -1.0, TransformMode::MaseScale).is_err());
        assert!(ScaleRecord::new("s", f64::NAN, TransformMode::LastObsLog).is_err());
        assert!(ScaleRecord::new("s", 200.0, TransformMode::LastObsLog).is_ok());
    }
}
