//! Synthetic corpora for demos and evaluation: positive series with a
//! random linear trend, a multiplicative seasonal pattern and relative
//! noise, plus a helper that splits off the last horizon as test actuals.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::core::{FrequencyClass, TimeSeries};

/// Shape of a generated corpus.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_series: usize,
    pub frequency: FrequencyClass,
    /// In-sample length range (the horizon is appended on top).
    pub min_length: usize,
    pub max_length: usize,
    pub level_range: (f64, f64),
    pub slope_range: (f64, f64),
    pub seasonal_amplitude: (f64, f64),
    pub noise_sd: (f64, f64),
}

impl SynthSpec {
    /// Quarterly-flavored defaults: moderate trend, period-4 seasonality,
    /// a few percent of relative noise.
    pub fn quarterly(n_series: usize) -> Self {
        SynthSpec {
            n_series,
            frequency: FrequencyClass::Quarterly,
            min_length: 40,
            max_length: 64,
            level_range: (80.0, 160.0),
            slope_range: (0.0, 1.5),
            seasonal_amplitude: (0.05, 0.30),
            noise_sd: (0.01, 0.04),
        }
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generates `n_series` series of `in-sample length + horizon` values.
/// Ids are `S0001`, `S0002`, ... prefixed with the frequency initial.
pub fn generate(spec: &SynthSpec, seed: u64) -> Vec<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = spec.frequency.seasonal_period().max(2);
    let h = spec.frequency.horizon();
    let prefix = spec
        .frequency
        .name()
        .chars()
        .next()
        .unwrap_or('s')
        .to_ascii_uppercase();
    (0..spec.n_series)
        .map(|k| {
            let length = rng.random_range(spec.min_length..=spec.max_length) + h;
            let level = rng.random_range(spec.level_range.0..spec.level_range.1);
            let slope = rng.random_range(spec.slope_range.0..spec.slope_range.1);
            let amplitude =
                rng.random_range(spec.seasonal_amplitude.0..spec.seasonal_amplitude.1);
            let phase = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            let sd = rng.random_range(spec.noise_sd.0..spec.noise_sd.1);
            let values: Vec<f64> = (0..length)
                .map(|t| {
                    let season = 1.0
                        + amplitude
                            * (2.0 * std::f64::consts::PI * (t % p) as f64 / p as f64 + phase)
                                .sin();
                    let noise = 1.0 + sd * gaussian(&mut rng);
                    ((level + slope * t as f64) * season * noise).max(10.0)
                })
                .collect();
            TimeSeries::new(
                format!("{prefix}{:04}", k + 1),
                spec.frequency,
                values,
                None,
            )
            .expect("generated series is valid")
        })
        .collect()
}

/// Splits each series into an in-sample part and its last horizon of
/// actuals. Returns (training series, test actuals by id).
pub fn split_train_test(series: &[TimeSeries]) -> (Vec<TimeSeries>, BTreeMap<String, Vec<f64>>) {
    let mut train = Vec::with_capacity(series.len());
    let mut test = BTreeMap::new();
    for s in series {
        let h = s.frequency().horizon();
        let cut = s.len() - h;
        train.push(s.truncated(cut).expect("long enough by construction"));
        test.insert(s.id().to_string(), s.values()[cut..].to_vec());
    }
    (train, test)
}
