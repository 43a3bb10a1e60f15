//! Autoregression on seasonally adjusted series: Yule-Walker estimation
//! with the order chosen by AIC, recursive multi-step forecasts, then
//! reseasonalization.

use crate::error::{Error, Result};

use super::decompose::{additive_offsets, multiplicative_indices};

/// AR coefficients fitted by Levinson-Durbin on sample autocovariances,
/// order picked by AIC over 0..=max_order. Returns (coefficients, mean).
pub(crate) fn fit_ar_yule_walker(values: &[f64], max_order: usize) -> (Vec<f64>, f64) {
    let l = values.len();
    let mean = values.iter().sum::<f64>() / l as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let max_order = max_order.min(l.saturating_sub(1));
    let mut autocov = vec![0.0; max_order + 1];
    for (k, c) in autocov.iter_mut().enumerate() {
        *c = centered[k..]
            .iter()
            .zip(&centered)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / l as f64;
    }
    if autocov[0] <= f64::MIN_POSITIVE {
        return (vec![], mean); // constant series: white-noise model
    }

    let aic = |var: f64, order: usize| l as f64 * var.max(f64::MIN_POSITIVE).ln() + 2.0 * order as f64;
    let mut best_coeffs: Vec<f64> = vec![];
    let mut best_aic = aic(autocov[0], 0);

    // Levinson-Durbin recursion.
    let mut coeffs: Vec<f64> = vec![];
    let mut var = autocov[0];
    for m in 1..=max_order {
        let mut acc = autocov[m];
        for (i, &c) in coeffs.iter().enumerate() {
            acc -= c * autocov[m - 1 - i];
        }
        let reflection = acc / var;
        let mut next = coeffs.clone();
        next.push(0.0);
        for i in 0..m {
            next[i] = if i < m - 1 {
                coeffs[i] - reflection * coeffs[m - 2 - i]
            } else {
                reflection
            };
        }
        var *= 1.0 - reflection * reflection;
        coeffs = next;
        if var <= 0.0 {
            break;
        }
        let score = aic(var, m);
        if score < best_aic {
            best_aic = score;
            best_coeffs = coeffs.clone();
        }
    }
    (best_coeffs, mean)
}

fn ar_forecast(values: &[f64], coeffs: &[f64], mean: f64, h: usize) -> Vec<f64> {
    let mut history: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let next: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * history[history.len() - 1 - i])
            .sum();
        history.push(next);
        out.push(next + mean);
    }
    out
}

/// Forecast by classical decomposition plus an AR model on the adjusted
/// series. Falls back to additive decomposition when the series has
/// non-positive values.
pub fn forecast_stlm_ar(values: &[f64], h: usize, p: usize) -> Result<Vec<f64>> {
    let l = values.len();
    if p < 2 || l < 2 * p {
        return Err(Error::Data(format!(
            "deseasonalized ar needs p >= 2 and length >= 2p, got p={p}, length={l}"
        )));
    }
    let multiplicative = values.iter().all(|&v| v > 0.0);
    let (adjusted, reseasonalize): (Vec<f64>, Box<dyn Fn(&[f64]) -> Vec<f64>>) = if multiplicative
    {
        let idx = multiplicative_indices(values, p)?;
        let adj = values
            .iter()
            .enumerate()
            .map(|(j, &v)| v / idx[j % p])
            .collect();
        (
            adj,
            Box::new(move |fc: &[f64]| {
                fc.iter()
                    .enumerate()
                    .map(|(i, &v)| v * idx[(l + i) % p])
                    .collect()
            }),
        )
    } else {
        let off = additive_offsets(values, p)?;
        let adj = values
            .iter()
            .enumerate()
            .map(|(j, &v)| v - off[j % p])
            .collect();
        (
            adj,
            Box::new(move |fc: &[f64]| {
                fc.iter()
                    .enumerate()
                    .map(|(i, &v)| v + off[(l + i) % p])
                    .collect()
            }),
        )
    };
    let max_order = (l / 5).clamp(1, 10);
    let (coeffs, mean) = fit_ar_yule_walker(&adjusted, max_order);
    let fc = ar_forecast(&adjusted, &coeffs, mean, h);
    Ok(reseasonalize(&fc))
}
