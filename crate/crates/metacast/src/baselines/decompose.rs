//! Classical moving-average seasonal decomposition and the ACF-based
//! seasonality test shared by the seasonally adjusted benchmark, the theta
//! forecaster and the deseasonalized AR forecaster.

use crate::error::{Error, Result};

/// Multiplicative seasonal split of one series.
///
/// `seasonal_indices[s]` is the factor for season `s`; position `j` of the
/// series belongs to season `j % p`. Indices are normalized so their mean
/// is 1, and are all 1 when `is_seasonal` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalDecomposition {
    seasonal_indices: Vec<f64>,
    deseasonalized: Vec<f64>,
    is_seasonal: bool,
}

impl SeasonalDecomposition {
    /// Tests for seasonality and, when present, removes it
    /// multiplicatively. Series that fail the test (or that contain
    /// non-positive values, where ratio indices are undefined) pass
    /// through unchanged.
    pub fn compute(values: &[f64], p: usize) -> Self {
        if classify_seasonal(values, p) && values.iter().all(|&v| v > 0.0) {
            if let Ok(indices) = multiplicative_indices(values, p) {
                let deseasonalized = values
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| v / indices[j % p])
                    .collect();
                return SeasonalDecomposition {
                    seasonal_indices: indices,
                    deseasonalized,
                    is_seasonal: true,
                };
            }
        }
        SeasonalDecomposition {
            seasonal_indices: vec![1.0; p.max(1)],
            deseasonalized: values.to_vec(),
            is_seasonal: false,
        }
    }

    pub fn seasonal_indices(&self) -> &[f64] {
        &self.seasonal_indices
    }

    pub fn deseasonalized(&self) -> &[f64] {
        &self.deseasonalized
    }

    pub fn is_seasonal(&self) -> bool {
        self.is_seasonal
    }

    /// Scales a forecast back into seasonal units. `series_len` is the
    /// length of the series the decomposition was computed from, so the
    /// forecast at step i (1-based) belongs to season
    /// `(series_len + i - 1) % p`.
    pub fn reseasonalize(&self, forecast: &[f64], series_len: usize) -> Vec<f64> {
        let p = self.seasonal_indices.len();
        forecast
            .iter()
            .enumerate()
            .map(|(i, &v)| v * self.seasonal_indices[(series_len + i) % p])
            .collect()
    }
}

/// 90%-significance autocorrelation test at lag `p`. Always false for
/// `p = 1` or series shorter than `3 p`.
pub fn classify_seasonal(values: &[f64], p: usize) -> bool {
    let l = values.len();
    if p <= 1 || l < 3 * p {
        return false;
    }
    let mean = values.iter().sum::<f64>() / l as f64;
    let denom: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    if denom <= 0.0 {
        return false;
    }
    let acf = |lag: usize| -> f64 {
        values[lag..]
            .iter()
            .zip(values)
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / denom
    };
    let sum_sq: f64 = (1..p).map(|i| acf(i).powi(2)).sum();
    let crit = 1.645 * ((1.0 + 2.0 * sum_sq) / l as f64).sqrt();
    acf(p).abs() > crit
}

/// Centered moving average of order `p`, aligned with the input; positions
/// near the edges are `None`.
fn centered_ma(values: &[f64], p: usize) -> Vec<Option<f64>> {
    let l = values.len();
    let mut out = vec![None; l];
    if p % 2 == 1 {
        let half = (p - 1) / 2;
        for j in half..l.saturating_sub(half) {
            if j + half >= l {
                break;
            }
            let s: f64 = values[j - half..=j + half].iter().sum();
            out[j] = Some(s / p as f64);
        }
    } else {
        let half = p / 2;
        for j in half..l.saturating_sub(half) {
            if j + half >= l {
                break;
            }
            let mut s = 0.5 * values[j - half] + 0.5 * values[j + half];
            s += values[j - half + 1..j + half].iter().sum::<f64>();
            out[j] = Some(s / p as f64);
        }
    }
    out
}

/// Ratio-to-moving-average seasonal indices, normalized to mean 1.
pub(crate) fn multiplicative_indices(values: &[f64], p: usize) -> Result<Vec<f64>> {
    index_means(values, p, |x, ma| {
        if ma <= 0.0 {
            None
        } else {
            Some(x / ma)
        }
    })
    .map(|mut idx| {
        let mean = idx.iter().sum::<f64>() / p as f64;
        for v in &mut idx {
            *v /= mean;
        }
        idx
    })
}

/// Difference-from-moving-average seasonal offsets, normalized to mean 0.
pub(crate) fn additive_offsets(values: &[f64], p: usize) -> Result<Vec<f64>> {
    index_means(values, p, |x, ma| Some(x - ma)).map(|mut idx| {
        let mean = idx.iter().sum::<f64>() / p as f64;
        for v in &mut idx {
            *v -= mean;
        }
        idx
    })
}

fn index_means(
    values: &[f64],
    p: usize,
    detrend: impl Fn(f64, f64) -> Option<f64>,
) -> Result<Vec<f64>> {
    let l = values.len();
    if p < 2 || l < 2 * p {
        return Err(Error::Data(format!(
            "seasonal decomposition needs p >= 2 and length >= 2p, got p={p}, length={l}"
        )));
    }
    let ma = centered_ma(values, p);
    let mut sums = vec![0.0; p];
    let mut counts = vec![0usize; p];
    for (j, m) in ma.iter().enumerate() {
        if let Some(m) = m {
            if let Some(r) = detrend(values[j], *m) {
                sums[j % p] += r;
                counts[j % p] += 1;
            }
        }
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::Data(
            "seasonal decomposition: some seasons have no detrended observations".into(),
        ));
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect())
}
