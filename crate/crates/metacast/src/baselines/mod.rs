//! Native base forecasters and the seasonally adjusted benchmark. Every
//! forecaster maps a value slice to a length-h vector; [`forecast_all`]
//! assembles the full forecast matrix in canonical column order, applying
//! the seasonal-naive fallback whenever a model reports an error.

mod ar;
mod decompose;
mod smoothing;
mod theta;

pub use ar::forecast_stlm_ar;
pub use decompose::{classify_seasonal, SeasonalDecomposition};
pub use smoothing::forecast_ets;
pub use theta::forecast_theta;

use crate::core::{ForecastMatrix, Matrix};
use crate::error::{Error, Result};
use crate::ingest::BASE_MODEL_LEXICON;

/// Last observation repeated h times.
pub fn forecast_naive(values: &[f64], h: usize) -> Result<Vec<f64>> {
    match values.last() {
        Some(&last) => Ok(vec![last; h]),
        None => Err(Error::Data("naive forecast of an empty series".into())),
    }
}

/// Most recent same-season observation for each step.
pub fn forecast_snaive(values: &[f64], h: usize, p: usize) -> Result<Vec<f64>> {
    let l = values.len();
    if p == 0 || l < p {
        return Err(Error::Data(format!(
            "seasonal naive needs at least p={p} observations, got {l}"
        )));
    }
    Ok((0..h).map(|i| values[l - p + i % p]).collect())
}

/// Straight line through the first and last observations, extended.
pub fn forecast_rwdrift(values: &[f64], h: usize) -> Result<Vec<f64>> {
    let l = values.len();
    if l < 2 {
        return Err(Error::Data(format!(
            "random walk with drift needs at least 2 observations, got {l}"
        )));
    }
    let last = values[l - 1];
    let drift = (last - values[0]) / (l - 1) as f64;
    Ok((1..=h).map(|i| last + i as f64 * drift).collect())
}

/// Naive forecast applied to the seasonally adjusted series: the
/// benchmark every accuracy ratio is measured against.
pub fn forecast_naive2(values: &[f64], h: usize, p: usize) -> Result<Vec<f64>> {
    let l = values.len();
    if l < 2.max(p) {
        return Err(Error::Data(format!(
            "naive2 needs at least max(2, p) observations, got {l}"
        )));
    }
    let dec = SeasonalDecomposition::compute(values, p);
    let last = *dec
        .deseasonalized()
        .last()
        .expect("non-empty by precondition");
    Ok(dec.reseasonalize(&vec![last; h], l))
}

/// External forecast columns for one series: (model id, h values).
pub type ExternalColumns = [(String, Vec<f64>)];

fn native_forecast(model_id: &str, values: &[f64], h: usize, p: usize) -> Option<Result<Vec<f64>>> {
    match model_id {
        "rwdrift" => Some(forecast_rwdrift(values, h)),
        "snaive" => Some(forecast_snaive(values, h, p)),
        "theta" => Some(forecast_theta(values, h, p)),
        "ets" => Some(forecast_ets(values, h, p)),
        "stlmar" => Some(forecast_stlm_ar(values, h, p)),
        // No native implementation; filled from external files or fallback.
        "arima" | "tbats" | "nnetar" => None,
        _ => Some(Err(Error::UnknownModel(model_id.to_string()))),
    }
}

fn fallback(values: &[f64], h: usize, p: usize) -> Result<Vec<f64>> {
    forecast_snaive(values, h, p).or_else(|_| forecast_naive(values, h))
}

/// Builds the h x M forecast matrix for one series, one column per
/// lexicon model. External columns replace the natively missing models;
/// they override native ones only when `prefer_external` is set. Any
/// model error (or non-finite output) is replaced by the seasonal-naive
/// fallback.
pub fn forecast_all(
    series_id: &str,
    values: &[f64],
    h: usize,
    p: usize,
    external: Option<&ExternalColumns>,
    prefer_external: bool,
) -> Result<ForecastMatrix> {
    let external_col = |model_id: &str| -> Option<&Vec<f64>> {
        external.and_then(|cols| {
            cols.iter()
                .find(|(id, _)| id == model_id)
                .map(|(_, vals)| vals)
        })
    };
    let mut columns = Vec::with_capacity(BASE_MODEL_LEXICON.len());
    for model_id in BASE_MODEL_LEXICON {
        let native = native_forecast(model_id, values, h, p);
        let ext = external_col(model_id).filter(|vals| {
            if vals.len() != h {
                log::warn!("{series_id}/{model_id}: external column has wrong length, ignored");
                return false;
            }
            true
        });
        let column = match (native, ext) {
            (None, Some(vals)) => vals.clone(),
            (Some(_), Some(vals)) if prefer_external => vals.clone(),
            (None, None) => fallback(values, h, p)?,
            (Some(result), _) => match result {
                Ok(fc) if fc.iter().all(|v| v.is_finite()) => fc,
                Ok(_) => {
                    log::warn!("{series_id}/{model_id}: non-finite forecast, using fallback");
                    fallback(values, h, p)?
                }
                Err(err) => {
                    log::warn!("{series_id}/{model_id}: {err}, using fallback");
                    fallback(values, h, p)?
                }
            },
        };
        columns.push(column);
    }
    let matrix = Matrix::from_columns(h, &columns)?;
    ForecastMatrix::new(
        series_id,
        BASE_MODEL_LEXICON.iter().map(|s| s.to_string()).collect(),
        matrix,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_repeats_last() {
        assert_eq!(forecast_naive(&[3.0, 7.0, 5.0], 2).unwrap(), vec![5.0, 5.0]);
        assert_eq!(forecast_naive(&[10.0], 6).unwrap(), vec![10.0; 6]);
        assert!(forecast_naive(&[], 2).is_err());
    }

    #[test]
    fn snaive_cycles_last_season() {
        let fc = forecast_snaive(&[1.0, 2.0, 3.0, 4.0], 8, 4).unwrap();
        assert_eq!(fc, vec![1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn snaive_p1_equals_naive() {
        let values = [2.0, 9.0, 4.0];
        assert_eq!(
            forecast_snaive(&values, 5, 1).unwrap(),
            forecast_naive(&values, 5).unwrap()
        );
    }

    #[test]
    fn snaive_short_series_errors() {
        assert!(forecast_snaive(&[5.0, 6.0], 4, 4).is_err());
    }

    #[test]
    fn rwdrift_hand_values() {
        assert_eq!(
            forecast_rwdrift(&[0.0, 10.0], 3).unwrap(),
            vec![20.0, 30.0, 40.0]
        );
        assert_eq!(
            forecast_rwdrift(&[10.0, 0.0], 2).unwrap(),
            vec![-10.0, -20.0]
        );
        let c = forecast_rwdrift(&[4.0, 4.0, 4.0], 3).unwrap();
        assert_eq!(c, vec![4.0; 3]);
        assert!(forecast_rwdrift(&[1.0], 2).is_err());
    }

    #[test]
    fn naive2_p1_equals_naive() {
        let values = [1.0, 5.0, 2.0, 8.0];
        assert_eq!(
            forecast_naive2(&values, 3, 1).unwrap(),
            forecast_naive(&values, 3).unwrap()
        );
    }

    #[test]
    fn naive2_alternating_series_hand_result() {
        let values: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 10.0 } else { 20.0 }).collect();
        let fc = forecast_naive2(&values, 4, 2).unwrap();
        for (got, want) in fc.iter().zip(&[10.0, 20.0, 10.0, 20.0]) {
            assert!((got - want).abs() < 1e-9, "{fc:?}");
        }
    }

    #[test]
    fn naive2_on_aseasonal_series_repeats_last() {
        // Trend-only series fails the seasonality test.
        let values: Vec<f64> = (0..30).map(|i| 5.0 + 2.0 * i as f64).collect();
        let fc = forecast_naive2(&values, 4, 4).unwrap();
        assert_eq!(fc, vec![63.0; 4]);
    }

    #[test]
    fn forecast_all_constant_series_is_constant_everywhere() {
        let fm = forecast_all("c", &[50.0; 20], 8, 4, None, false).unwrap();
        assert_eq!(fm.n_models(), 8);
        assert_eq!(fm.horizon(), 8);
        for v in fm.values().data() {
            assert!((v - 50.0).abs() < 1e-6);
        }
    }

    #[test]
    fn forecast_all_uses_external_columns() {
        let external = vec![("arima".to_string(), vec![9.0; 8])];
        let fm = forecast_all("q", &[50.0; 20], 8, 4, Some(&external), false).unwrap();
        assert_eq!(fm.column("arima").unwrap(), vec![9.0; 8]);
        // Other external-only models fall back to seasonal naive.
        assert_eq!(fm.column("tbats").unwrap(), vec![50.0; 8]);
    }

    #[test]
    fn external_native_precedence() {
        let external = vec![("snaive".to_string(), vec![1.0; 8])];
        let values = [50.0; 20];
        let keep_native = forecast_all("q", &values, 8, 4, Some(&external), false).unwrap();
        assert_eq!(keep_native.column("snaive").unwrap(), vec![50.0; 8]);
        let prefer_ext = forecast_all("q", &values, 8, 4, Some(&external), true).unwrap();
        assert_eq!(prefer_ext.column("snaive").unwrap(), vec![1.0; 8]);
    }

    #[test]
    fn forecast_all_falls_back_on_short_series() {
        // Length 3 with p=4: snaive fails, chain ends at plain naive.
        let fm = forecast_all("s", &[5.0, 6.0, 7.0], 8, 4, None, false).unwrap();
        assert_eq!(fm.column("snaive").unwrap(), vec![7.0; 8]);
        assert_eq!(fm.column("stlmar").unwrap(), vec![7.0; 8]);
        assert!(fm.values().data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn shift_equivariance_of_simple_models() {
        let values = [3.0, 8.0, 2.0, 9.0, 4.0, 7.0, 5.0, 1.0];
        let shifted: Vec<f64> = values.iter().map(|v| v + 13.0).collect();
        let pairs = [
            (
                forecast_naive(&values, 4).unwrap(),
                forecast_naive(&shifted, 4).unwrap(),
            ),
            (
                forecast_snaive(&values, 4, 4).unwrap(),
                forecast_snaive(&shifted, 4, 4).unwrap(),
            ),
            (
                forecast_rwdrift(&values, 4).unwrap(),
                forecast_rwdrift(&shifted, 4).unwrap(),
            ),
        ];
        for (base, moved) in pairs {
            for (b, m) in base.iter().zip(&moved) {
                assert!((m - (b + 13.0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scale_equivariance_of_forecasters() {
        let values: Vec<f64> = (0..24)
            .map(|t| 40.0 + 2.0 * t as f64 + [5.0, -3.0, 1.0, -2.0][t % 4])
            .collect();
        let scaled: Vec<f64> = values.iter().map(|v| v * 3.5).collect();
        let cases: Vec<(Vec<f64>, Vec<f64>, f64)> = vec![
            (
                forecast_naive(&values, 6).unwrap(),
                forecast_naive(&scaled, 6).unwrap(),
                1e-9,
            ),
            (
                forecast_snaive(&values, 6, 4).unwrap(),
                forecast_snaive(&scaled, 6, 4).unwrap(),
                1e-9,
            ),
            (
                forecast_rwdrift(&values, 6).unwrap(),
                forecast_rwdrift(&scaled, 6).unwrap(),
                1e-9,
            ),
            (
                forecast_theta(&values, 6, 4).unwrap(),
                forecast_theta(&scaled, 6, 4).unwrap(),
                1e-9,
            ),
            (
                forecast_naive2(&values, 6, 4).unwrap(),
                forecast_naive2(&scaled, 6, 4).unwrap(),
                1e-9,
            ),
            (
                forecast_ets(&values, 6, 4).unwrap(),
                forecast_ets(&scaled, 6, 4).unwrap(),
                1e-6,
            ),
        ];
        for (base, scaled_fc, tol) in cases {
            for (b, s) in base.iter().zip(&scaled_fc) {
                assert!(
                    (s - 3.5 * b).abs() / (3.5 * b.abs()).max(1.0) < tol,
                    "scale equivariance violated: {b} -> {s}"
                );
            }
        }
    }
}
