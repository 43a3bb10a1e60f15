//! Two-theta-lines forecaster: the average of a straight-line fit and a
//! smoothed double-curvature line, seasonally adjusted when needed.

use crate::error::{Error, Result};

use super::decompose::SeasonalDecomposition;
use super::smoothing::ses_fit;

pub fn forecast_theta(values: &[f64], h: usize, p: usize) -> Result<Vec<f64>> {
    let l = values.len();
    if l < 3 {
        return Err(Error::Data(format!(
            "theta needs at least 3 observations, got {l}"
        )));
    }
    let dec = SeasonalDecomposition::compute(values, p);
    let x = dec.deseasonalized();

    // theta(0): least-squares line through the adjusted series.
    let n = l as f64;
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, &v) in x.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (v - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let intercept = x_mean - slope * t_mean;

    // theta(2): double the deviations from the line, then smooth flat.
    let theta2: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(t, &v)| 2.0 * v - (intercept + slope * t as f64))
        .collect();
    let (level, _alpha) = ses_fit(&theta2);

    let combined: Vec<f64> = (1..=h)
        .map(|i| {
            let line = intercept + slope * (l - 1 + i) as f64;
            0.5 * (line + level)
        })
        .collect();
    Ok(dec.reseasonalize(&combined, l))
}
