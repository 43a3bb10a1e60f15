//! Command implementations behind the thin binary: base-forecast caching,
//! training, prediction and evaluation, all file-driven and reproducible
//! from flags plus a seed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::baselines::forecast_all;
use crate::config::{load_run_config, ModelKind, RunConfig};
use crate::core::{FrequencyClass, TimeSeries};
use crate::error::{Error, Result};
use crate::ingest::{
    load_external_forecasts, load_prediction_csv, load_series_csv, write_external_forecast_csv,
    write_forecast_csv, DatasetManifest,
};
use crate::preprocess::make_inference_sample;
use crate::trainer::{
    ensemble_predict, evaluate_predictions, split_holdout, train_instance, EpochStats, MetaModel,
    ModelFile,
};

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => load_run_config(p),
        None => Ok(RunConfig::default()),
    }
}

/// `base-forecast`: computes per-series, per-model base forecasts and
/// writes them in the re-ingestable external format.
#[derive(Debug, Clone)]
pub struct BaseForecastArgs {
    pub train: PathBuf,
    pub freq: FrequencyClass,
    pub external: Option<PathBuf>,
    pub out: PathBuf,
    /// Remove the last horizon first (training-sample mode).
    pub chop: bool,
    pub config: Option<PathBuf>,
}

pub fn cmd_base_forecast(args: &BaseForecastArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let series = load_series_csv(&args.train, args.freq)?;
    let h = args.freq.horizon();
    let p = config.seasonal_period_for(args.freq);
    let external = args
        .external
        .as_ref()
        .map(|path| load_external_forecasts(path, h))
        .transpose()?;
    let mut rows = Vec::new();
    for s in &series {
        let values = if args.chop {
            if s.len() < h + 2 {
                log::warn!(
                    "series {}: length {} leaves fewer than 2 observations after chopping, skipped",
                    s.id(),
                    s.len()
                );
                continue;
            }
            &s.values()[..s.len() - h]
        } else {
            s.values()
        };
        let ext = external
            .as_ref()
            .and_then(|m| m.get(s.id()))
            .map(|v| v.as_slice());
        let matrix = forecast_all(s.id(), values, h, p, ext, config.prefer_external)?;
        for model_id in matrix.model_ids() {
            rows.push((s.id().to_string(), model_id.clone(), matrix.column(model_id)?));
        }
    }
    write_external_forecast_csv(&args.out, &rows)
}

/// `train`: builds training samples from chopped series and trains the
/// configured number of fresh instances, writing model and log files.
#[derive(Debug, Clone)]
pub struct TrainArgs {
    /// (series file, frequency) pairs; exactly one unless `all_freqs`.
    pub datasets: Vec<(PathBuf, FrequencyClass)>,
    pub all_freqs: bool,
    pub model: ModelKind,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub external: Option<PathBuf>,
}

fn write_log_csv(path: &Path, log: &[EpochStats], with_val: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        if with_val {
            writeln!(w, "epoch,train_mae,val_mae")?;
        } else {
            writeln!(w, "epoch,train_mae")?;
        }
        for entry in log {
            if with_val {
                let val = entry
                    .val_mae
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                writeln!(w, "{},{},{val}", entry.epoch, entry.train_mae)?;
            } else {
                writeln!(w, "{},{}", entry.epoch, entry.train_mae)?;
            }
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut config = load_config(&args.config)?;
    config.model_kind = args.model;
    config.all_frequencies = args.all_freqs;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.all_freqs && args.model == ModelKind::Cnn {
        return Err(Error::Usage(
            "--all-freqs requires --model rnn: the convolutional combiner fixes the horizon, \
             so one model has to be built per frequency"
                .into(),
        ));
    }
    if args.datasets.is_empty() {
        return Err(Error::Usage("no --train/--freq pair given".into()));
    }
    if !args.all_freqs && args.datasets.len() != 1 {
        return Err(Error::Usage(
            "multiple --train files need --all-freqs (and --model rnn)".into(),
        ));
    }

    let mut train: Vec<TimeSeries> = Vec::new();
    for (path, freq) in &args.datasets {
        train.extend(load_series_csv(path, *freq)?);
    }
    let external = match &args.external {
        None => None,
        Some(path) => {
            if args.datasets.len() != 1 {
                return Err(Error::Usage(
                    "--external applies to a single-frequency run".into(),
                ));
            }
            Some(load_external_forecasts(path, args.datasets[0].1.horizon())?)
        }
    };

    let data = crate::trainer::ExperimentData {
        train,
        test: None,
        external_chopped: external,
        external_full: None,
    };
    let clip = config.clip_policy();
    let (samples, skipped) = crate::trainer::build_training_samples(&data, &config, &clip)?;
    for id in &skipped {
        log::warn!("series {id} contributed no training sample");
    }

    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;

    // Tuning pass against the holdout, logged for hyperparameter reading.
    if config.holdout_fraction > 0.0 {
        let (train_idx, val_idx) = split_holdout(&samples, config.holdout_fraction, config.seed)?;
        if !val_idx.is_empty() {
            let train_part: Vec<_> = train_idx.iter().map(|&i| samples[i].clone()).collect();
            let val_part: Vec<_> = val_idx.iter().map(|&i| samples[i].clone()).collect();
            let probe_seed = config.seed + config.n_instances as u64;
            let probe = train_instance(&train_part, &val_part, &config, probe_seed)?;
            write_log_csv(&args.out_dir.join("tuning_log.csv"), &probe.log, true)?;
        }
    }

    let frequency = if args.all_freqs {
        None
    } else {
        Some(args.datasets[0].1)
    };
    use rayon::prelude::*;
    let instances: Vec<crate::trainer::TrainedInstance> = (0..config.n_instances)
        .into_par_iter()
        .map(|i| train_instance(&samples, &[], &config, config.seed + i as u64))
        .collect::<Result<Vec<_>>>()?;
    for (i, instance) in instances.iter().enumerate() {
        let model_file = ModelFile {
            model: instance.model.clone(),
            frequency,
            mode: config.mode,
        };
        model_file.save(args.out_dir.join(format!("instance_{i}.model")))?;
        write_log_csv(
            &args.out_dir.join(format!("instance_{i}_log.csv")),
            &instance.log,
            false,
        )?;
    }
    Ok(())
}

/// `predict`: ensembles saved instances over complete series and writes
/// original-unit forecasts.
#[derive(Debug, Clone)]
pub struct PredictArgs {
    pub train: PathBuf,
    pub models: PathBuf,
    pub external: Option<PathBuf>,
    pub out: PathBuf,
    /// Alternative horizon; recurrent models only.
    pub horizon: Option<usize>,
    /// Series frequency; needed when the models were trained on all
    /// frequencies, otherwise read from the model files.
    pub freq: Option<FrequencyClass>,
    pub config: Option<PathBuf>,
}

/// Loads every `instance_*.model` file in the directory, sorted by name.
pub fn load_model_dir(dir: &Path) -> Result<Vec<ModelFile>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("instance_") && n.ends_with(".model"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!(
            "no instance_*.model files in {}",
            dir.display()
        )));
    }
    paths.iter().map(ModelFile::load).collect()
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let files = load_model_dir(&args.models)?;
    let first = &files[0];
    for f in &files[1..] {
        if f.mode != first.mode
            || f.frequency != first.frequency
            || f.model.kind() != first.model.kind()
        {
            return Err(Error::Data(
                "instance files disagree on kind, frequency or preprocessing mode".into(),
            ));
        }
    }
    if args.horizon.is_some() && first.model.kind() == ModelKind::Cnn {
        return Err(Error::Usage(
            "--horizon is only legal for rnn models: the convolutional combiner \
             fixes its horizon at training time"
                .into(),
        ));
    }
    let freq = match (args.freq, first.frequency) {
        (Some(f), _) => f,
        (None, Some(f)) => f,
        (None, None) => {
            return Err(Error::Usage(
                "these models were trained on all frequencies; pass --freq for the input file"
                    .into(),
            ))
        }
    };
    let h = args.horizon.unwrap_or_else(|| freq.horizon());
    if h == 0 {
        return Err(Error::Usage("--horizon must be positive".into()));
    }
    let p = config.seasonal_period_for(freq);
    let series = load_series_csv(&args.train, freq)?;
    let external = args
        .external
        .as_ref()
        .map(|path| load_external_forecasts(path, h))
        .transpose()?;
    let mode = first.mode;
    let models: Vec<MetaModel> = files.into_iter().map(|f| f.model).collect();
    let clip = config.clip_policy();

    let mut predictions: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in &series {
        let ext = external
            .as_ref()
            .and_then(|m| m.get(s.id()))
            .map(|v| v.as_slice());
        let base = forecast_all(s.id(), s.values(), h, p, ext, config.prefer_external)?;
        let sample = make_inference_sample(s, h, p, &base, mode, &clip)?;
        let forecast = ensemble_predict(&models, &sample, config.ensemble_transformed)?;
        predictions.insert(s.id().to_string(), forecast);
    }
    write_forecast_csv(&args.out, &predictions)
}

/// `evaluate`: scores a prediction file against test actuals, with the
/// benchmark computed from the training file.
#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub train: PathBuf,
    pub test: PathBuf,
    pub pred: PathBuf,
    pub freq: FrequencyClass,
    pub report: Option<PathBuf>,
    pub config: Option<PathBuf>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String> {
    let config = load_config(&args.config)?;
    let manifest = DatasetManifest {
        train_path: args.train.clone(),
        test_path: Some(args.test.clone()),
        frequency: args.freq,
        id_prefix_filter: None,
    };
    let (train, test) = manifest.load()?;
    let test = test.expect("manifest had a test path");
    let predictions = load_prediction_csv(&args.pred)?;

    let missing: Vec<&String> = test.keys().filter(|id| !predictions.contains_key(*id)).collect();
    let extra: Vec<&String> = predictions
        .keys()
        .filter(|id| !test.contains_key(*id))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Data(format!(
            "prediction/test id mismatch: missing predictions for {:?}, unexpected ids {:?}",
            missing, extra
        )));
    }

    let evaluation = evaluate_predictions(&train, &test, &predictions, None, &config)?;
    let table = evaluation.report.to_table();
    if let Some(path) = &args.report {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        evaluation.report.write_csv(&mut w)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, split_train_test, SynthSpec};
    use std::collections::BTreeMap;

    fn write_series_csv(path: &Path, series: &[TimeSeries]) {
        let mut text = String::from("id,values\n");
        for s in series {
            text.push_str(s.id());
            for v in s.values() {
                text.push(',');
                text.push_str(&v.to_string());
            }
            text.push('\n');
        }
        std::fs::write(path, text).unwrap();
    }

    fn write_test_csv(path: &Path, test: &BTreeMap<String, Vec<f64>>) {
        let mut text = String::from("id,values\n");
        for (id, vals) in test {
            text.push_str(id);
            for v in vals {
                text.push(',');
                text.push_str(&v.to_string());
            }
            text.push('\n');
        }
        std::fs::write(path, text).unwrap();
    }

    #[test]
    fn base_forecast_output_reingests_within_tolerance() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec::quarterly(3);
        let series = generate(&spec, 5);
        let train_path = dir.path().join("train.csv");
        write_series_csv(&train_path, &series);
        let out_path = dir.path().join("base.csv");
        cmd_base_forecast(&BaseForecastArgs {
            train: train_path,
            freq: FrequencyClass::Quarterly,
            external: None,
            out: out_path.clone(),
            chop: false,
            config: None,
        })
        .unwrap();
        let reloaded = load_external_forecasts(&out_path, 8).unwrap();
        assert_eq!(reloaded.len(), 3);
        for s in &series {
            let columns = &reloaded[s.id()];
            assert_eq!(columns.len(), 8);
            let direct = forecast_all(s.id(), s.values(), 8, 4, None, false).unwrap();
            for (model_id, values) in columns {
                let want = direct.column(model_id).unwrap();
                for (a, b) in values.iter().zip(&want) {
                    assert!((a - b).abs() / b.abs().max(1.0) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn chop_skips_series_at_the_boundary() {
        let dir = tempfile::tempdir().unwrap();
        // Quarterly horizon is 8: a length-9 series must be skipped.
        let series = vec![
            TimeSeries::new("A", FrequencyClass::Quarterly, vec![50.0; 9], None).unwrap(),
            TimeSeries::new("B", FrequencyClass::Quarterly, vec![50.0; 20], None).unwrap(),
        ];
        let train_path = dir.path().join("train.csv");
        write_series_csv(&train_path, &series);
        let out_path = dir.path().join("base.csv");
        cmd_base_forecast(&BaseForecastArgs {
            train: train_path,
            freq: FrequencyClass::Quarterly,
            external: None,
            out: out_path.clone(),
            chop: true,
            config: None,
        })
        .unwrap();
        let reloaded = load_external_forecasts(&out_path, 8).unwrap();
        assert!(!reloaded.contains_key("A"));
        assert!(reloaded.contains_key("B"));
    }

    #[test]
    fn train_rejects_all_freqs_cnn() {
        let err = cmd_train(&TrainArgs {
            datasets: vec![(PathBuf::from("x.csv"), FrequencyClass::Quarterly)],
            all_freqs: true,
            model: ModelKind::Cnn,
            config: None,
            seed: None,
            out_dir: PathBuf::from("out"),
            external: None,
        })
        .unwrap_err();
        assert_eq!(err.code(), "usage");
        assert!(err.to_string().contains("horizon"));
    }

    #[test]
    fn train_predict_evaluate_smoke() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec::quarterly(12);
        let all = generate(&spec, 9);
        let (train, test) = split_train_test(&all);
        let train_path = dir.path().join("train.csv");
        let test_path = dir.path().join("test.csv");
        write_series_csv(&train_path, &train);
        write_test_csv(&test_path, &test);

        let config_path = dir.path().join("run.conf");
        std::fs::write(
            &config_path,
            "epochs = 3\ninstances = 2\nminibatches = 2\nholdout_fraction = 0.25\n",
        )
        .unwrap();

        let models_dir = dir.path().join("models");
        cmd_train(&TrainArgs {
            datasets: vec![(train_path.clone(), FrequencyClass::Quarterly)],
            all_freqs: false,
            model: ModelKind::Rnn,
            config: Some(config_path.clone()),
            seed: Some(11),
            out_dir: models_dir.clone(),
            external: None,
        })
        .unwrap();
        assert!(models_dir.join("instance_0.model").exists());
        assert!(models_dir.join("instance_1.model").exists());
        assert!(models_dir.join("instance_0_log.csv").exists());
        assert!(models_dir.join("tuning_log.csv").exists());
        let log = std::fs::read_to_string(models_dir.join("instance_0_log.csv")).unwrap();
        assert_eq!(log.lines().count(), 4); // header + 3 epochs

        let pred_path = dir.path().join("pred.csv");
        cmd_predict(&PredictArgs {
            train: train_path.clone(),
            models: models_dir,
            external: None,
            out: pred_path.clone(),
            horizon: None,
            freq: None,
            config: Some(config_path.clone()),
        })
        .unwrap();
        let predictions = load_prediction_csv(&pred_path).unwrap();
        assert_eq!(predictions.len(), 12);
        assert!(predictions.values().all(|v| v.len() == 8));

        let table = cmd_evaluate(&EvaluateArgs {
            train: train_path,
            test: test_path,
            pred: pred_path,
            freq: FrequencyClass::Quarterly,
            report: Some(dir.path().join("report.csv")),
            config: Some(config_path),
        })
        .unwrap();
        assert!(table.contains("quarterly"));
        assert!(table.contains("total"));
        let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert!(report.starts_with("frequency,n,smape,mase,owa"));
    }

    #[test]
    fn evaluate_lists_id_offenders() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec::quarterly(3);
        let all = generate(&spec, 2);
        let (train, test) = split_train_test(&all);
        let train_path = dir.path().join("train.csv");
        let test_path = dir.path().join("test.csv");
        write_series_csv(&train_path, &train);
        write_test_csv(&test_path, &test);
        // Prediction file missing one id and containing a stranger.
        let mut predictions = BTreeMap::new();
        let ids: Vec<&String> = test.keys().collect();
        predictions.insert(ids[0].clone(), vec![50.0; 8]);
        predictions.insert("ZZZ".to_string(), vec![50.0; 8]);
        let pred_path = dir.path().join("pred.csv");
        write_forecast_csv(&pred_path, &predictions).unwrap();
        let err = cmd_evaluate(&EvaluateArgs {
            train: train_path,
            test: test_path,
            pred: pred_path,
            freq: FrequencyClass::Quarterly,
            report: None,
            config: None,
        })
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ZZZ"), "{msg}");
        assert!(msg.contains(ids[1].as_str()), "{msg}");
    }

    #[test]
    fn predict_self_consistency_naive_degeneration() {
        // Zero-parameter rnn instances: the pipeline must yield the last
        // observation repeated, for every series.
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec::quarterly(4);
        let all = generate(&spec, 3);
        let (train, _) = split_train_test(&all);
        let train_path = dir.path().join("train.csv");
        write_series_csv(&train_path, &train);
        let models_dir = dir.path().join("models");
        std::fs::create_dir_all(&models_dir).unwrap();
        let zero = crate::rnn::RnnModel::zeroed(crate::rnn::RnnConfig::new(8, 4)).unwrap();
        ModelFile {
            model: MetaModel::Rnn(zero),
            frequency: Some(FrequencyClass::Quarterly),
            mode: crate::core::TransformMode::LastObsLog,
        }
        .save(models_dir.join("instance_0.model"))
        .unwrap();
        let pred_path = dir.path().join("pred.csv");
        cmd_predict(&PredictArgs {
            train: train_path,
            models: models_dir,
            external: None,
            out: pred_path.clone(),
            horizon: None,
            freq: None,
            config: None,
        })
        .unwrap();
        let predictions = load_prediction_csv(&pred_path).unwrap();
        for s in &train {
            let last = s.last();
            for v in &predictions[s.id()] {
                assert!((v - last).abs() < 1e-9, "{} vs {last}", v);
            }
        }
    }

    #[test]
    fn predict_rejects_horizon_for_cnn() {
        let dir = tempfile::tempdir().unwrap();
        let models_dir = dir.path().join("models");
        std::fs::create_dir_all(&models_dir).unwrap();
        let cnn = crate::cnn::CnnModel::zeroed(crate::cnn::CnnConfig::new(8, 8)).unwrap();
        ModelFile {
            model: MetaModel::Cnn(cnn),
            frequency: Some(FrequencyClass::Quarterly),
            mode: crate::core::TransformMode::LastObsLog,
        }
        .save(models_dir.join("instance_0.model"))
        .unwrap();
        let err = cmd_predict(&PredictArgs {
            train: dir.path().join("missing.csv"),
            models: models_dir,
            external: None,
            out: dir.path().join("pred.csv"),
            horizon: Some(12),
            freq: None,
            config: None,
        })
        .unwrap_err();
        assert_eq!(err.code(), "usage");
    }
}
