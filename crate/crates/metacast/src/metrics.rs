//! Accuracy measures and report aggregation: symmetric MAPE, mean absolute
//! scaled error, and their overall weighted average against the
//! seasonally adjusted naive benchmark.

use std::collections::BTreeMap;
use std::io::Write;

use crate::core::FrequencyClass;
use crate::error::{Error, Result};

/// Symmetric mean absolute percentage error, in percent:
/// `(2/h) * sum |a - f| / (|a| + |f|) * 100`.
pub fn smape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    if actual.len() != forecast.len() || actual.is_empty() {
        return Err(Error::Data(format!(
            "smape needs equal non-empty vectors, got {} and {}",
            actual.len(),
            forecast.len()
        )));
    }
    let mut sum = 0.0;
    for (t, (a, f)) in actual.iter().zip(forecast).enumerate() {
        let denom = a.abs() + f.abs();
        if denom == 0.0 {
            return Err(Error::Numeric(format!(
                "smape undefined at step {}: |actual| + |forecast| is zero",
                t + 1
            )));
        }
        sum += (a - f).abs() / denom;
    }
    Ok(200.0 * sum / actual.len() as f64)
}

/// Mean absolute scaled error: forecast MAE over the mean absolute
/// in-sample difference at lag `p`.
pub fn mase(actual: &[f64], forecast: &[f64], insample: &[f64], p: usize) -> Result<f64> {
    if actual.len() != forecast.len() || actual.is_empty() {
        return Err(Error::Data(format!(
            "mase needs equal non-empty vectors, got {} and {}",
            actual.len(),
            forecast.len()
        )));
    }
    let l = insample.len();
    if p == 0 || l <= p {
        return Err(Error::Data(format!(
            "mase needs in-sample length > p, got length {l} with p = {p}"
        )));
    }
    let denom = insample[p..]
        .iter()
        .zip(insample)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / (l - p) as f64;
    if denom == 0.0 {
        return Err(Error::Numeric(
            "mase undefined: constant in-sample series (zero seasonal difference)".into(),
        ));
    }
    let num = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| (a - f).abs())
        .sum::<f64>()
        / actual.len() as f64;
    Ok(num / denom)
}

/// Overall weighted average of the two accuracy ratios against the
/// benchmark: `0.5 * (smape/smape_ref + mase/mase_ref)`.
pub fn owa(smape: f64, mase: f64, ref_smape: f64, ref_mase: f64) -> Result<f64> {
    if ref_smape <= 0.0 || ref_mase <= 0.0 {
        return Err(Error::Numeric(format!(
            "owa reference values must be positive, got smape {ref_smape}, mase {ref_mase}"
        )));
    }
    Ok(0.5 * (smape / ref_smape + mase / ref_mase))
}

/// Per-series accuracy of one forecaster. A `None` scaled error marks a
/// series whose denominator was zero; aggregation drops it with a warning.
#[derive(Debug, Clone)]
pub struct SeriesScore {
    pub series_id: String,
    pub frequency: FrequencyClass,
    pub smape: f64,
    pub mase: Option<f64>,
}

/// Aggregated accuracy for one frequency (or the total row).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMetrics {
    pub n: usize,
    pub smape: f64,
    pub mase: f64,
    /// Present only when benchmark references were supplied.
    pub owa: Option<f64>,
}

/// Per-frequency and total accuracy. The ratio for the overall weighted
/// average is taken on aggregated means, not averaged per series.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub per_frequency: BTreeMap<FrequencyClass, FrequencyMetrics>,
    pub total: FrequencyMetrics,
}

struct Accumulator {
    n: usize,
    smape: f64,
    mase: f64,
    ref_smape: f64,
    ref_mase: f64,
}

impl Accumulator {
    fn new() -> Self {
        Accumulator {
            n: 0,
            smape: 0.0,
            mase: 0.0,
            ref_smape: 0.0,
            ref_mase: 0.0,
        }
    }

    fn push(&mut self, smape: f64, mase: f64, reference: Option<(f64, f64)>) {
        self.n += 1;
        self.smape += smape;
        self.mase += mase;
        if let Some((rs, rm)) = reference {
            self.ref_smape += rs;
            self.ref_mase += rm;
        }
    }

    fn finish(&self, with_reference: bool) -> Result<FrequencyMetrics> {
        let n = self.n as f64;
        let smape_mean = self.smape / n;
        let mase_mean = self.mase / n;
        let owa_value = if with_reference {
            Some(owa(
                smape_mean,
                mase_mean,
                self.ref_smape / n,
                self.ref_mase / n,
            )?)
        } else {
            None
        };
        Ok(FrequencyMetrics {
            n: self.n,
            smape: smape_mean,
            mase: mase_mean,
            owa: owa_value,
        })
    }
}

/// Folds per-series scores into a report. When `naive2` scores are given
/// (matched by series id), per-frequency and total ratios are included.
/// Series without a usable scaled error are excluded entirely.
pub fn aggregate(scores: &[SeriesScore], naive2: Option<&[SeriesScore]>) -> Result<MetricsReport> {
    if scores.is_empty() {
        return Err(Error::Data("cannot aggregate zero series".into()));
    }
    let reference: Option<BTreeMap<&str, &SeriesScore>> = naive2.map(|refs| {
        refs.iter()
            .map(|s| (s.series_id.as_str(), s))
            .collect()
    });
    let mut by_freq: BTreeMap<FrequencyClass, Accumulator> = BTreeMap::new();
    let mut total = Accumulator::new();
    for score in scores {
        let Some(mase_value) = score.mase else {
            log::warn!(
                "series {}: excluded from the report (scaled-error denominator is zero)",
                score.series_id
            );
            continue;
        };
        let ref_pair = match &reference {
            None => None,
            Some(map) => {
                let Some(r) = map.get(score.series_id.as_str()) else {
                    return Err(Error::Data(format!(
                        "no benchmark score for series {}",
                        score.series_id
                    )));
                };
                let Some(rm) = r.mase else {
                    log::warn!(
                        "series {}: excluded from the report (benchmark scaled error undefined)",
                        score.series_id
                    );
                    continue;
                };
                Some((r.smape, rm))
            }
        };
        by_freq
            .entry(score.frequency)
            .or_insert_with(Accumulator::new)
            .push(score.smape, mase_value, ref_pair);
        total.push(score.smape, mase_value, ref_pair);
    }
    if total.n == 0 {
        return Err(Error::Data(
            "every series was excluded; nothing to aggregate".into(),
        ));
    }
    let with_reference = reference.is_some();
    let mut per_frequency = BTreeMap::new();
    for (freq, acc) in by_freq {
        per_frequency.insert(freq, acc.finish(with_reference)?);
    }
    Ok(MetricsReport {
        per_frequency,
        total: total.finish(with_reference)?,
    })
}

impl MetricsReport {
    /// Plain-text table with one row per frequency plus a total row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>8} {:>10} {:>10} {:>10}\n",
            "frequency", "n", "smape", "mase", "owa"
        ));
        let mut write_row = |name: &str, m: &FrequencyMetrics| {
            let owa = m
                .owa
                .map(|v| format!("{v:>10.4}"))
                .unwrap_or_else(|| format!("{:>10}", "-"));
            out.push_str(&format!(
                "{:<12} {:>8} {:>10.4} {:>10.4} {owa}\n",
                name, m.n, m.smape, m.mase
            ));
        };
        for (freq, m) in &self.per_frequency {
            write_row(freq.name(), m);
        }
        write_row("total", &self.total);
        out
    }

    /// CSV rows `frequency,n,smape,mase,owa`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let emit = |w: &mut W, name: &str, m: &FrequencyMetrics| -> std::io::Result<()> {
            let owa = m.owa.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{name},{},{},{},{owa}", m.n, m.smape, m.mase)
        };
        (|| -> std::io::Result<()> {
            writeln!(w, "frequency,n,smape,mase,owa")?;
            for (freq, m) in &self.per_frequency {
                emit(w, freq.name(), m)?;
            }
            emit(w, "total", &self.total)
        })()
        .map_err(|e| Error::Data(format!("report write failure: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smape_hand_fixtures() {
        assert_eq!(smape(&[5.0, 6.0], &[5.0, 6.0]).unwrap(), 0.0);
        let v = smape(&[100.0, 200.0], &[110.0, 180.0]).unwrap();
        let expected = 100.0 * (10.0 / 210.0 + 20.0 / 380.0);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 10.025062656641603).abs() < 1e-9);
        let v = smape(&[100.0], &[50.0]).unwrap();
        assert!((v - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn smape_zero_denominator_names_step() {
        let err = smape(&[1.0, 0.0], &[1.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("step 2"), "{err}");
    }

    #[test]
    fn smape_is_symmetric_and_bounded() {
        let a = [3.0, 9.0, 2.0];
        let f = [5.0, 1.0, 8.0];
        assert_eq!(smape(&a, &f).unwrap(), smape(&f, &a).unwrap());
        let extreme = smape(&[1.0], &[-1.0]).unwrap();
        assert!((extreme - 200.0).abs() < 1e-12);
    }

    #[test]
    fn mase_hand_fixture() {
        let v = mase(&[18.0, 20.0], &[17.0, 21.0], &[10.0, 12.0, 14.0, 16.0], 1).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let zero = mase(&[18.0, 20.0], &[18.0, 20.0], &[10.0, 12.0, 14.0, 16.0], 1).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn mase_constant_insample_is_error() {
        assert!(mase(&[1.0], &[2.0], &[5.0, 5.0, 5.0], 1).is_err());
        // Strictly periodic in-sample with matching lag: zero denominator.
        assert!(mase(&[1.0], &[2.0], &[1.0, 2.0, 1.0, 2.0], 2).is_err());
    }

    #[test]
    fn mase_is_scale_invariant() {
        let a = [18.0, 20.0];
        let f = [17.0, 21.0];
        let ins = [10.0, 12.0, 14.0, 16.0];
        let base = mase(&a, &f, &ins, 1).unwrap();
        let k = 3.7;
        let ak: Vec<f64> = a.iter().map(|v| v * k).collect();
        let fk: Vec<f64> = f.iter().map(|v| v * k).collect();
        let insk: Vec<f64> = ins.iter().map(|v| v * k).collect();
        let scaled = mase(&ak, &fk, &insk, 1).unwrap();
        assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn owa_fixtures() {
        assert_eq!(owa(11.0, 1.4, 11.0, 1.4).unwrap(), 1.0);
        assert_eq!(owa(5.5, 0.7, 11.0, 1.4).unwrap(), 0.5);
        assert!(owa(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn owa_matches_published_quarterly_ensemble() {
        // Competition benchmark references for quarterly series.
        let (ref_smape, ref_mase) = (11.012, 1.371);
        let v = owa(9.6610, 1.1051, ref_smape, ref_mase).unwrap();
        assert!((v - 0.8417).abs() < 5e-5, "owa {v}");
    }

    fn score(id: &str, freq: FrequencyClass, smape: f64, mase: f64) -> SeriesScore {
        SeriesScore {
            series_id: id.into(),
            frequency: freq,
            smape,
            mase: Some(mase),
        }
    }

    #[test]
    fn aggregate_single_series_is_identity() {
        let s = [score("a", FrequencyClass::Quarterly, 12.0, 1.5)];
        let report = aggregate(&s, None).unwrap();
        assert_eq!(report.total.n, 1);
        assert_eq!(report.total.smape, 12.0);
        assert_eq!(report.total.mase, 1.5);
        assert!(report.total.owa.is_none());
    }

    #[test]
    fn aggregate_means_within_frequency() {
        let s = [
            score("a", FrequencyClass::Quarterly, 10.0, 1.0),
            score("b", FrequencyClass::Quarterly, 20.0, 2.0),
        ];
        let report = aggregate(&s, None).unwrap();
        let q = &report.per_frequency[&FrequencyClass::Quarterly];
        assert_eq!(q.smape, 15.0);
        assert_eq!(q.mase, 1.5);
    }

    #[test]
    fn owa_uses_ratio_of_means_not_mean_of_ratios() {
        let model = [
            score("a", FrequencyClass::Quarterly, 10.0, 1.0),
            score("b", FrequencyClass::Quarterly, 30.0, 3.0),
        ];
        let bench = [
            score("a", FrequencyClass::Quarterly, 5.0, 0.5),
            score("b", FrequencyClass::Quarterly, 60.0, 6.0),
        ];
        let report = aggregate(&model, Some(&bench)).unwrap();
        // Ratio of means: smape 40/65, mase 4/6.5 -> owa = 40/65.
        let expected = 40.0 / 65.0;
        let got = report.total.owa.unwrap();
        assert!((got - expected).abs() < 1e-12);
        // Mean of per-series ratios would be 0.5 * (2 + 0.5) / ... != expected.
        let mean_of_ratios = 0.5
            * (owa(10.0, 1.0, 5.0, 0.5).unwrap() + owa(30.0, 3.0, 60.0, 6.0).unwrap());
        assert!((got - mean_of_ratios).abs() > 1e-3);
    }

    #[test]
    fn excluded_series_do_not_count() {
        let s = [
            score("a", FrequencyClass::Quarterly, 10.0, 1.0),
            SeriesScore {
                series_id: "b".into(),
                frequency: FrequencyClass::Quarterly,
                smape: 99.0,
                mase: None,
            },
        ];
        let report = aggregate(&s, None).unwrap();
        assert_eq!(report.total.n, 1);
        assert_eq!(report.total.smape, 10.0);
    }

    #[test]
    fn report_renders_table_and_csv() {
        let s = [
            score("a", FrequencyClass::Yearly, 13.0, 3.0),
            score("b", FrequencyClass::Quarterly, 10.0, 1.1),
        ];
        let bench = [
            score("a", FrequencyClass::Yearly, 16.0, 3.9),
            score("b", FrequencyClass::Quarterly, 11.0, 1.4),
        ];
        let report = aggregate(&s, Some(&bench)).unwrap();
        let table = report.to_table();
        assert!(table.contains("yearly"));
        assert!(table.contains("total"));
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("frequency,n,smape,mase,owa"));
        assert_eq!(text.lines().count(), 4);
    }
}
