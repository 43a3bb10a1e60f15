//! The transform pipeline between raw units and combiner space: clipping,
//! normalization, log transform, sample assembly and stretching-window
//! augmentation.

use crate::baselines::{forecast_all, ExternalColumns};
use crate::core::{ForecastMatrix, Matrix, ScaleRecord, TimeSeries, TransformMode, TransformedSample};
use crate::error::{Error, Result};

/// Floor applied to base-model forecasts before the log transform; the
/// training corpus convention is that no observation sits below 10.
pub const DEFAULT_CLIP_FLOOR: f64 = 10.0;

/// Returns `max(x, 10)`.
pub fn clip_floor(x: f64) -> f64 {
    x.max(DEFAULT_CLIP_FLOOR)
}

/// Configurable clipping rule. The default floors every forecast at 10;
/// `negatives_only` switches to the literal reading where only negative
/// forecasts are raised to the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipPolicy {
    pub floor: f64,
    pub negatives_only: bool,
}

impl Default for ClipPolicy {
    fn default() -> Self {
        ClipPolicy {
            floor: DEFAULT_CLIP_FLOOR,
            negatives_only: false,
        }
    }
}

impl ClipPolicy {
    pub fn apply(&self, x: f64) -> f64 {
        if self.negatives_only {
            if x < 0.0 {
                self.floor
            } else {
                x
            }
        } else {
            x.max(self.floor)
        }
    }
}

fn transform_value(x: f64, scale: &ScaleRecord, clip: &ClipPolicy) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Numeric(format!(
            "cannot transform non-finite value for series {}",
            scale.series_id()
        )));
    }
    match scale.mode() {
        TransformMode::LastObsLog => {
            let clipped = clip.apply(x);
            if clipped <= 0.0 {
                return Err(Error::Numeric(format!(
                    "series {}: value {clipped} not positive after clipping, log undefined",
                    scale.series_id()
                )));
            }
            Ok((clipped / scale.normalizer()).ln())
        }
        TransformMode::MaseScale => Ok(x / scale.normalizer()),
    }
}

/// Maps raw forecast values into combiner space.
pub fn transform_vec(raw: &[f64], scale: &ScaleRecord, clip: &ClipPolicy) -> Result<Vec<f64>> {
    raw.iter().map(|&x| transform_value(x, scale, clip)).collect()
}

/// Matrix counterpart of [`transform_vec`].
pub fn transform_matrix(raw: &Matrix, scale: &ScaleRecord, clip: &ClipPolicy) -> Result<Matrix> {
    let data = raw
        .data()
        .iter()
        .map(|&x| transform_value(x, scale, clip))
        .collect::<Result<Vec<f64>>>()?;
    Matrix::new(raw.rows(), raw.cols(), data)
}

/// Maps combiner outputs back to raw units. In log mode a magnitude above
/// 700 would overflow `exp` and signals a diverged model.
pub fn inverse_transform_vec(y: &[f64], scale: &ScaleRecord) -> Result<Vec<f64>> {
    y.iter()
        .map(|&v| {
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "series {}: non-finite combiner output",
                    scale.series_id()
                )));
            }
            match scale.mode() {
                TransformMode::LastObsLog => {
                    if v.abs() > 700.0 {
                        Err(Error::Numeric(format!(
                            "series {}: combiner output {v} overflows the inverse transform",
                            scale.series_id()
                        )))
                    } else {
                        Ok(scale.normalizer() * v.exp())
                    }
                }
                TransformMode::MaseScale => Ok(scale.normalizer() * v),
            }
        })
        .collect()
}

/// Mean absolute seasonal difference of the in-sample values: the scaled
/// error denominator, reused here as the alternative normalizer.
pub fn mase_denominator(values: &[f64], p: usize) -> f64 {
    let l = values.len();
    if p == 0 || l <= p {
        return 0.0;
    }
    values[p..]
        .iter()
        .zip(values)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / (l - p) as f64
}

fn scale_for(chopped: &[f64], series_id: &str, p: usize, mode: TransformMode) -> Result<ScaleRecord> {
    let normalizer = match mode {
        TransformMode::LastObsLog => *chopped.last().expect("non-empty by construction"),
        TransformMode::MaseScale => mase_denominator(chopped, p),
    };
    ScaleRecord::new(series_id, normalizer, mode)
}

fn label_for(actuals: &[f64], scale: &ScaleRecord, clip: &ClipPolicy) -> Result<Vec<f64>> {
    // Labels are actual observations: never clipped, only normalized
    // (and logged in log mode).
    match scale.mode() {
        TransformMode::LastObsLog => actuals
            .iter()
            .map(|&a| {
                if a <= 0.0 {
                    return Err(Error::Numeric(format!(
                        "series {}: non-positive actual {a} cannot be log transformed",
                        scale.series_id()
                    )));
                }
                if a < clip.floor {
                    log::warn!(
                        "series {}: actual {a} below the clip floor {}",
                        scale.series_id(),
                        clip.floor
                    );
                }
                Ok((a / scale.normalizer()).ln())
            })
            .collect(),
        TransformMode::MaseScale => Ok(actuals.iter().map(|&a| a / scale.normalizer()).collect()),
    }
}

/// Builds one training sample: features from base forecasts of the series
/// with its last `h` observations removed, label from those observations.
/// `base` must be the forecast matrix computed on the chopped series.
pub fn make_training_sample(
    series: &TimeSeries,
    h: usize,
    p: usize,
    base: &ForecastMatrix,
    mode: TransformMode,
    clip: &ClipPolicy,
) -> Result<TransformedSample> {
    let l = series.len();
    if l < h + 2 {
        return Err(Error::Series {
            id: series.id().to_string(),
            msg: format!("length {l} leaves fewer than 2 observations after removing {h}"),
        });
    }
    if base.horizon() != h || base.series_id() != series.id() {
        return Err(Error::Data(format!(
            "base forecasts for {} (h={}) do not match series {} (h={h})",
            base.series_id(),
            base.horizon(),
            series.id()
        )));
    }
    let chopped = &series.values()[..l - h];
    let actuals = &series.values()[l - h..];
    let scale = scale_for(chopped, series.id(), p, mode)?;
    let features = transform_matrix(base.values(), &scale, clip)?;
    let label = label_for(actuals, &scale, clip)?;
    Ok(TransformedSample {
        features,
        label: Some(label),
        scale,
        frequency: series.frequency(),
    })
}

/// Builds the inference sample for a complete series; `base` must be the
/// forecast matrix computed on the full series.
pub fn make_inference_sample(
    series: &TimeSeries,
    h: usize,
    p: usize,
    base: &ForecastMatrix,
    mode: TransformMode,
    clip: &ClipPolicy,
) -> Result<TransformedSample> {
    if base.horizon() != h || base.series_id() != series.id() {
        return Err(Error::Data(format!(
            "base forecasts for {} (h={}) do not match series {} (h={h})",
            base.series_id(),
            base.horizon(),
            series.id()
        )));
    }
    let scale = scale_for(series.values(), series.id(), p, mode)?;
    let features = transform_matrix(base.values(), &scale, clip)?;
    Ok(TransformedSample {
        features,
        label: None,
        scale,
        frequency: series.frequency(),
    })
}

/// Stretching-window augmentation: sample k is built on the first
/// `l - h - k` observations with the following `h` as label, for
/// k = 0..=k_max while at least 2 observations remain. External columns,
/// when given, apply to the k = 0 sample only (they were produced for the
/// chopped series). Infeasible k are skipped silently.
#[allow(clippy::too_many_arguments)]
pub fn stretch_window_samples(
    series: &TimeSeries,
    h: usize,
    p: usize,
    k_max: usize,
    mode: TransformMode,
    clip: &ClipPolicy,
    external_k0: Option<&ExternalColumns>,
    prefer_external: bool,
) -> Result<Vec<TransformedSample>> {
    let l = series.len();
    let mut out = Vec::new();
    for k in 0..=k_max {
        if l < h + k + 2 {
            break;
        }
        let n = l - h - k;
        let sub = series.truncated(l - k)?;
        let external = if k == 0 { external_k0 } else { None };
        let base = forecast_all(series.id(), &series.values()[..n], h, p, external, prefer_external)?;
        out.push(make_training_sample(&sub, h, p, &base, mode, clip)?);
    }
    Ok(out)
}
