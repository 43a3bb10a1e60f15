//! Training protocol: holdout splitting, mini-batch MAE training with
//! Adam, multi-instance ensembling, and the end-to-end experiment that
//! chops series, trains, forecasts and evaluates.
//!
//! Instances train in parallel with private state and per-instance RNG
//! streams seeded `base_seed + index`; every aggregation is an ordered
//! fold, so thread count never changes the results.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, read_tensors, write_tensors, AdamHyper, AdamState, Tape, Tensor, Var};
use crate::baselines::{forecast_all, forecast_naive2};
use crate::cnn::{CnnConfig, CnnModel};
use crate::config::{ModelKind, RunConfig};
use crate::core::{FrequencyClass, Matrix, TimeSeries, TransformMode, TransformedSample};
use crate::error::{Error, Result};
use crate::ingest::ExternalForecasts;
use crate::metrics::{aggregate, mase, smape, MetricsReport, SeriesScore};
use crate::preprocess::{
    inverse_transform_vec, make_inference_sample, stretch_window_samples, ClipPolicy,
};
use crate::rnn::{RnnConfig, RnnModel};

/// A trained combiner of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum MetaModel {
    Cnn(CnnModel),
    Rnn(RnnModel),
}

impl MetaModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            MetaModel::Cnn(_) => ModelKind::Cnn,
            MetaModel::Rnn(_) => ModelKind::Rnn,
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        match self {
            MetaModel::Cnn(m) => m.bind(tape),
            MetaModel::Rnn(m) => m.bind(tape),
        }
    }

    pub fn forward_bound(&self, tape: &mut Tape, params: &[Var], features: &Matrix) -> Result<Var> {
        match self {
            MetaModel::Cnn(m) => m.forward_bound(tape, params, features),
            MetaModel::Rnn(m) => m.forward_bound(tape, params, features),
        }
    }

    pub fn predict(&self, features: &Matrix) -> Result<Vec<f64>> {
        match self {
            MetaModel::Cnn(m) => m.predict(features),
            MetaModel::Rnn(m) => m.predict(features),
        }
    }

    pub fn params(&self) -> Vec<(String, &Tensor)> {
        match self {
            MetaModel::Cnn(m) => m.params(),
            MetaModel::Rnn(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            MetaModel::Cnn(m) => m.params_mut(),
            MetaModel::Rnn(m) => m.params_mut(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFileHeader {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    cnn: Option<CnnConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    rnn: Option<RnnConfig>,
    frequency: Option<String>,
    mode: TransformMode,
}

/// One serialized combiner instance plus the run metadata needed to use
/// it: the training frequency (absent for an all-frequency model) and the
/// preprocessing mode.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub model: MetaModel,
    pub frequency: Option<FrequencyClass>,
    pub mode: TransformMode,
}

impl ModelFile {
    /// Writes a one-line JSON header followed by the parameter tensors.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let header = ModelFileHeader {
            kind: self.model.kind().name().to_string(),
            cnn: match &self.model {
                MetaModel::Cnn(m) => Some(*m.config()),
                MetaModel::Rnn(_) => None,
            },
            rnn: match &self.model {
                MetaModel::Rnn(m) => Some(*m.config()),
                MetaModel::Cnn(_) => None,
            },
            frequency: self.frequency.map(|f| f.name().to_string()),
            mode: self.mode,
        };
        let json = serde_json::to_string(&header)
            .map_err(|e| Error::Data(format!("model header: {e}")))?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "#model {json}").map_err(|e| Error::io(path, e))?;
        let named: Vec<(String, &Tensor)> = self.model.params();
        write_tensors(&mut w, &named)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut first = String::new();
        reader
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        let json = first
            .strip_prefix("#model ")
            .ok_or_else(|| Error::Data(format!("{}: missing model header", path.display())))?;
        let header: ModelFileHeader = serde_json::from_str(json.trim())
            .map_err(|e| Error::Data(format!("{}: bad model header: {e}", path.display())))?;
        let tensors = read_tensors(&mut reader)?;
        let model = match header.kind.as_str() {
            "cnn" => {
                let config = header
                    .cnn
                    .ok_or_else(|| Error::Data("cnn header without config".into()))?;
                let mut m = CnnModel::zeroed(config)?;
                m.load_params(&tensors)?;
                MetaModel::Cnn(m)
            }
            "rnn" => {
                let config = header
                    .rnn
                    .ok_or_else(|| Error::Data("rnn header without config".into()))?;
                let mut m = RnnModel::zeroed(config)?;
                m.load_params(&tensors)?;
                MetaModel::Rnn(m)
            }
            other => return Err(Error::Data(format!("unknown model kind '{other}'"))),
        };
        let frequency = header
            .frequency
            .map(|name| FrequencyClass::parse(&name))
            .transpose()?;
        Ok(ModelFile {
            model,
            frequency,
            mode: header.mode,
        })
    }
}

/// Deterministic by-series partition: all samples of one series land on
/// the same side. Returns (train, validation) index lists.
pub fn split_holdout(
    samples: &[TransformedSample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if samples.is_empty() {
        return Err(Error::Data("cannot split zero samples".into()));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Data(format!(
            "holdout fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let mut ids: Vec<&str> = Vec::new();
    for s in samples {
        if !ids.contains(&s.series_id()) {
            ids.push(s.series_id());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = ids.clone();
    shuffled.shuffle(&mut rng);
    let n_val = (shuffled.len() as f64 * fraction).round() as usize;
    let n_val = n_val.min(shuffled.len().saturating_sub(1));
    let val_ids: std::collections::HashSet<&str> = shuffled[..n_val].iter().copied().collect();
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        if val_ids.contains(s.series_id()) {
            val.push(i);
        } else {
            train.push(i);
        }
    }
    if train.is_empty() {
        return Err(Error::Data(
            "holdout fraction leaves an empty training set".into(),
        ));
    }
    Ok((train, val))
}

/// Builds a fresh combiner matching the samples' shape: the model count
/// from the feature columns, the horizon (one per frequency for the
/// convolutional kind), and the cell-state size from the config.
pub fn init_model(config: &RunConfig, samples: &[TransformedSample], seed: u64) -> Result<MetaModel> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Data("cannot initialize a model from zero samples".into()))?;
    let m = first.features.cols();
    if let Some(bad) = samples.iter().find(|s| s.features.cols() != m) {
        return Err(Error::Data(format!(
            "series {} has {} feature columns, expected {m}",
            bad.series_id(),
            bad.features.cols()
        )));
    }
    let mut frequencies: Vec<FrequencyClass> = samples.iter().map(|s| s.frequency).collect();
    frequencies.sort();
    frequencies.dedup();
    match config.model_kind {
        ModelKind::Cnn => {
            if frequencies.len() > 1 {
                return Err(Error::Usage(
                    "the convolutional combiner fixes the horizon; train one model per frequency"
                        .into(),
                ));
            }
            let h = first.horizon();
            let cnn_config = CnnConfig {
                horizon: h,
                n_models: m,
                n_conv_layers: config.conv_layers,
                conv_channels: config.conv_channels,
                head: config.head,
            };
            Ok(MetaModel::Cnn(CnnModel::init(cnn_config, seed)?))
        }
        ModelKind::Rnn => {
            let freq = if frequencies.len() == 1 {
                Some(frequencies[0])
            } else {
                None
            };
            let rnn_config = RnnConfig {
                n_models: m,
                state_size: config.state_size_for(freq),
                readout_from_cell: config.rnn_readout_cell,
            };
            Ok(MetaModel::Rnn(RnnModel::init(rnn_config, seed)?))
        }
    }
}

fn batch_loss(
    model: &MetaModel,
    tape: &mut Tape,
    params: &[Var],
    batch: &[&TransformedSample],
) -> Result<Var> {
    let mut deviations = Vec::with_capacity(batch.len());
    for sample in batch {
        let label = sample.label.as_ref().ok_or_else(|| {
            Error::Data(format!(
                "series {}: training sample has no label",
                sample.series_id()
            ))
        })?;
        let out = model.forward_bound(tape, params, &sample.features)?;
        let target = tape.leaf(Tensor::vector(label), false);
        let diff = tape.sub(out, target)?;
        deviations.push(tape.abs(diff));
    }
    let all = tape.concat(&deviations)?;
    Ok(tape.mean(all))
}

/// Mean absolute error of the model on labeled samples, in transformed
/// space; used for validation logging.
pub fn evaluate_mae(model: &MetaModel, samples: &[&TransformedSample]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for sample in samples {
        let label = sample
            .label
            .as_ref()
            .ok_or_else(|| Error::Data("validation sample has no label".into()))?;
        let out = model.predict(&sample.features)?;
        for (o, l) in out.iter().zip(label) {
            sum += (o - l).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Data("no validation values".into()));
    }
    Ok(sum / count as f64)
}

/// One full pass: shuffle, partition into frequency-homogeneous
/// mini-batches, and take one Adam step per batch. Returns the
/// sample-weighted mean batch MAE.
pub fn train_epoch(
    model: &mut MetaModel,
    adam: &mut AdamState,
    samples: &[&TransformedSample],
    config: &RunConfig,
    hyper: &AdamHyper,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut groups: BTreeMap<FrequencyClass, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        groups.entry(s.frequency).or_default().push(i);
    }
    if groups.len() > 1 && model.kind() == ModelKind::Cnn {
        return Err(Error::Usage(
            "mixed frequencies reached a convolutional trainer".into(),
        ));
    }
    let mut batches: Vec<Vec<usize>> = Vec::new();
    for indices in groups.values() {
        let mut shuffled = indices.clone();
        shuffled.shuffle(rng);
        let n_batches = config.n_minibatches.min(shuffled.len()).max(1);
        let base = shuffled.len() / n_batches;
        let rem = shuffled.len() % n_batches;
        let mut offset = 0;
        for b in 0..n_batches {
            let size = base + usize::from(b < rem);
            if size == 0 {
                continue;
            }
            batches.push(shuffled[offset..offset + size].to_vec());
            offset += size;
        }
    }
    batches.shuffle(rng);

    let mut weighted = 0.0;
    let mut total = 0usize;
    for batch_indices in &batches {
        let batch: Vec<&TransformedSample> =
            batch_indices.iter().map(|&i| samples[i]).collect();
        // Mini-batches must stay frequency-homogeneous: sequence lengths
        // differ across frequencies.
        let h0 = batch[0].horizon();
        if batch.iter().any(|s| s.horizon() != h0) {
            return Err(Error::Data(
                "mini-batch mixes frequencies with different horizons".into(),
            ));
        }
        let mut tape = Tape::new();
        let params = model.bind(&mut tape);
        let loss = batch_loss(model, &mut tape, &params, &batch)?;
        let loss_value = tape.value(loss).item()?;
        if !loss_value.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss diverged (batch of {} samples)",
                batch.len()
            )));
        }
        let grads = tape.backward(loss)?;
        let grad_refs: Vec<Option<&Tensor>> = params.iter().map(|v| grads.get(*v)).collect();
        let mut param_refs = model.params_mut();
        adam_step(&mut param_refs, &grad_refs, adam, hyper)?;
        let elems: usize = batch.iter().map(|s| s.horizon()).sum();
        weighted += loss_value * elems as f64;
        total += elems;
    }
    if total == 0 {
        return Err(Error::Data("epoch saw no samples".into()));
    }
    Ok(weighted / total as f64)
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: Option<f64>,
}

/// A model trained from one fresh start, with its epoch log.
#[derive(Debug)]
pub struct TrainedInstance {
    pub model: MetaModel,
    pub log: Vec<EpochStats>,
}

/// Trains one fresh instance for the configured number of epochs. No
/// early stopping: the epoch count is the protocol. Validation MAE is
/// logged every `val_log_every` epochs when a validation set exists.
pub fn train_instance(
    samples: &[TransformedSample],
    validation: &[TransformedSample],
    config: &RunConfig,
    instance_seed: u64,
) -> Result<TrainedInstance> {
    let mut model = init_model(config, samples, instance_seed)?;
    let param_refs: Vec<&Tensor> = model.params().into_iter().map(|(_, t)| t).collect();
    let mut adam = AdamState::new(&param_refs);
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
    let sample_refs: Vec<&TransformedSample> = samples.iter().collect();
    let val_refs: Vec<&TransformedSample> = validation.iter().collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut hyper = config.adam;
    for epoch in 1..=config.epochs {
        let train_mae = train_epoch(&mut model, &mut adam, &sample_refs, config, &hyper, &mut rng)?;
        hyper.lr *= config.lr_decay;
        let val_mae = if !val_refs.is_empty() && epoch % config.val_log_every == 0 {
            Some(evaluate_mae(&model, &val_refs)?)
        } else {
            None
        };
        log.push(EpochStats {
            epoch,
            train_mae,
            val_mae,
        });
    }
    Ok(TrainedInstance { model, log })
}

/// Averages the instances' forecasts for one series. Each instance's
/// output is mapped back to original units first (unless
/// `transformed_space` is set, which averages before inverting). An
/// instance whose inverse transform overflows is dropped with a warning;
/// if every instance is dropped the ensemble fails.
pub fn ensemble_predict(
    models: &[MetaModel],
    sample: &TransformedSample,
    transformed_space: bool,
) -> Result<Vec<f64>> {
    let per_instance = instance_predictions(models, sample, transformed_space)?;
    let h = sample.horizon();
    let mut mean = vec![0.0; h];
    for prediction in &per_instance {
        for (m, v) in mean.iter_mut().zip(prediction) {
            *m += v / per_instance.len() as f64;
        }
    }
    Ok(mean)
}

/// Original-unit forecasts per usable instance (see [`ensemble_predict`]).
pub fn instance_predictions(
    models: &[MetaModel],
    sample: &TransformedSample,
    transformed_space: bool,
) -> Result<Vec<Vec<f64>>> {
    if models.is_empty() {
        return Err(Error::Data("ensemble of zero models".into()));
    }
    if transformed_space {
        let h = sample.horizon();
        let mut mean = vec![0.0; h];
        for model in models {
            let out = model.predict(&sample.features)?;
            for (m, v) in mean.iter_mut().zip(&out) {
                *m += v / models.len() as f64;
            }
        }
        let inverted = inverse_transform_vec(&mean, &sample.scale)?;
        return Ok(vec![inverted; models.len()]);
    }
    let mut predictions = Vec::with_capacity(models.len());
    for (i, model) in models.iter().enumerate() {
        let out = model.predict(&sample.features)?;
        match inverse_transform_vec(&out, &sample.scale) {
            Ok(values) => predictions.push(values),
            Err(err) => {
                log::warn!(
                    "series {}: instance {i} excluded from the ensemble: {err}",
                    sample.series_id()
                );
            }
        }
    }
    if predictions.is_empty() {
        return Err(Error::Numeric(format!(
            "series {}: every ensemble instance diverged",
            sample.series_id()
        )));
    }
    Ok(predictions)
}

/// In-memory dataset for one experiment run.
#[derive(Debug, Clone, Default)]
pub struct ExperimentData {
    pub train: Vec<TimeSeries>,
    /// Held-out actuals per series id (evaluation mode).
    pub test: Option<BTreeMap<String, Vec<f64>>>,
    /// Base forecasts computed elsewhere for the chopped series.
    pub external_chopped: Option<ExternalForecasts>,
    /// Base forecasts computed elsewhere for the complete series.
    pub external_full: Option<ExternalForecasts>,
}

/// Everything a run produces.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub predictions: BTreeMap<String, Vec<f64>>,
    pub report: Option<MetricsReport>,
    /// Total symmetric error of each instance alone (evaluation mode).
    pub per_instance_smape: Option<Vec<f64>>,
    pub instance_logs: Vec<Vec<EpochStats>>,
    pub tuning_log: Option<Vec<EpochStats>>,
    pub models: Vec<MetaModel>,
    pub skipped_series: Vec<String>,
}

pub(crate) fn build_training_samples(
    data: &ExperimentData,
    config: &RunConfig,
    clip: &ClipPolicy,
) -> Result<(Vec<TransformedSample>, Vec<String>)> {
    let results: Vec<Result<Vec<TransformedSample>>> = data
        .train
        .par_iter()
        .map(|series| {
            let h = series.frequency().horizon();
            let p = config.seasonal_period_for(series.frequency());
            let external = data
                .external_chopped
                .as_ref()
                .and_then(|m| m.get(series.id()))
                .map(|v| v.as_slice());
            stretch_window_samples(
                series,
                h,
                p,
                config.stretch_k_max,
                config.mode,
                clip,
                external,
                config.prefer_external,
            )
        })
        .collect();
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for (series, result) in data.train.iter().zip(results) {
        match result {
            Ok(mut list) if !list.is_empty() => samples.append(&mut list),
            Ok(_) => {
                log::warn!(
                    "series {}: too short for a training sample, skipped",
                    series.id()
                );
                skipped.push(series.id().to_string());
            }
            Err(err) => {
                log::warn!("series {}: {err}, skipped", series.id());
                skipped.push(series.id().to_string());
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::Data(
            "no series produced a usable training sample".into(),
        ));
    }
    Ok((samples, skipped))
}

/// The full protocol: build samples from chopped series, optionally run a
/// tuning pass against a holdout, retrain every instance on all samples,
/// forecast from complete series, and evaluate when test actuals exist.
pub fn run_experiment(data: &ExperimentData, config: &RunConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let clip = config.clip_policy();
    let (samples, mut skipped) = build_training_samples(data, config, &clip)?;

    let tuning_log = if config.holdout_fraction > 0.0 {
        let (train_idx, val_idx) = split_holdout(&samples, config.holdout_fraction, config.seed)?;
        if val_idx.is_empty() {
            None
        } else {
            let train: Vec<TransformedSample> =
                train_idx.iter().map(|&i| samples[i].clone()).collect();
            let val: Vec<TransformedSample> =
                val_idx.iter().map(|&i| samples[i].clone()).collect();
            let probe_seed = config.seed + config.n_instances as u64;
            let probe = train_instance(&train, &val, config, probe_seed)?;
            Some(probe.log)
        }
    } else {
        None
    };

    // Retrain on everything: the holdout exists for hyperparameter
    // reading, never for the final models.
    let instances: Vec<TrainedInstance> = (0..config.n_instances)
        .into_par_iter()
        .map(|i| train_instance(&samples, &[], config, config.seed + i as u64))
        .collect::<Result<Vec<_>>>()?;
    let models: Vec<MetaModel> = instances.iter().map(|t| t.model.clone()).collect();
    let instance_logs: Vec<Vec<EpochStats>> = instances.into_iter().map(|t| t.log).collect();

    // Inference samples come from the complete series.
    let inference: Vec<Result<TransformedSample>> = data
        .train
        .par_iter()
        .map(|series| {
            let h = series.frequency().horizon();
            let p = config.seasonal_period_for(series.frequency());
            let external = data
                .external_full
                .as_ref()
                .and_then(|m| m.get(series.id()))
                .map(|v| v.as_slice());
            let base = forecast_all(
                series.id(),
                series.values(),
                h,
                p,
                external,
                config.prefer_external,
            )?;
            make_inference_sample(series, h, p, &base, config.mode, &clip)
        })
        .collect();

    let mut predictions: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut per_series_instance: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (series, sample) in data.train.iter().zip(inference) {
        match sample.and_then(|s| {
            instance_predictions(&models, &s, config.ensemble_transformed).map(|p| (s, p))
        }) {
            Ok((sample, per_instance)) => {
                let h = sample.horizon();
                let mut mean = vec![0.0; h];
                for prediction in &per_instance {
                    for (m, v) in mean.iter_mut().zip(prediction) {
                        *m += v / per_instance.len() as f64;
                    }
                }
                predictions.insert(series.id().to_string(), mean);
                per_series_instance.insert(series.id().to_string(), per_instance);
            }
            Err(err) => {
                log::warn!("series {}: no prediction: {err}", series.id());
                skipped.push(series.id().to_string());
            }
        }
    }
    if predictions.is_empty() {
        return Err(Error::Data("no series produced a prediction".into()));
    }

    let (report, per_instance_smape) = match &data.test {
        None => (None, None),
        Some(test) => {
            let evaluation = evaluate_predictions(
                &data.train,
                test,
                &predictions,
                Some(&per_series_instance),
                config,
            )?;
            (Some(evaluation.report), evaluation.per_instance_smape)
        }
    };

    Ok(ExperimentOutcome {
        predictions,
        report,
        per_instance_smape,
        instance_logs,
        tuning_log,
        models,
        skipped_series: skipped,
    })
}

pub(crate) struct Evaluation {
    pub report: MetricsReport,
    pub per_instance_smape: Option<Vec<f64>>,
}

/// Scores predictions against test actuals, with the seasonally adjusted
/// naive benchmark computed from the same in-sample data.
pub(crate) fn evaluate_predictions(
    train: &[TimeSeries],
    test: &BTreeMap<String, Vec<f64>>,
    predictions: &BTreeMap<String, Vec<f64>>,
    per_series_instance: Option<&BTreeMap<String, Vec<Vec<f64>>>>,
    config: &RunConfig,
) -> Result<Evaluation> {
    let mut model_scores = Vec::new();
    let mut bench_scores = Vec::new();
    let mut instance_sums: Vec<(f64, usize)> = Vec::new();
    for series in train {
        let Some(actual) = test.get(series.id()) else {
            continue;
        };
        let Some(pred) = predictions.get(series.id()) else {
            continue;
        };
        if actual.len() != pred.len() {
            return Err(Error::Data(format!(
                "series {}: prediction has {} steps, test has {}",
                series.id(),
                pred.len(),
                actual.len()
            )));
        }
        let p = config.seasonal_period_for(series.frequency());
        let h = actual.len();
        let model_smape = smape(actual, pred)?;
        let model_mase = match mase(actual, pred, series.values(), p) {
            Ok(v) => Some(v),
            Err(err) => {
                log::warn!("series {}: {err}", series.id());
                None
            }
        };
        model_scores.push(SeriesScore {
            series_id: series.id().to_string(),
            frequency: series.frequency(),
            smape: model_smape,
            mase: model_mase,
        });
        let naive2 = forecast_naive2(series.values(), h, p)?;
        let bench_smape = smape(actual, &naive2)?;
        let bench_mase = mase(actual, &naive2, series.values(), p).ok();
        bench_scores.push(SeriesScore {
            series_id: series.id().to_string(),
            frequency: series.frequency(),
            smape: bench_smape,
            mase: bench_mase,
        });
        if let Some(map) = per_series_instance {
            if let Some(per_instance) = map.get(series.id()) {
                if instance_sums.is_empty() {
                    instance_sums = vec![(0.0, 0); per_instance.len()];
                }
                for (k, prediction) in per_instance.iter().enumerate() {
                    if k < instance_sums.len() {
                        instance_sums[k].0 += smape(actual, prediction)?;
                        instance_sums[k].1 += 1;
                    }
                }
            }
        }
    }
    if model_scores.is_empty() {
        return Err(Error::Data(
            "no series had both a prediction and test actuals".into(),
        ));
    }
    let report = aggregate(&model_scores, Some(&bench_scores))?;
    let per_instance_smape = if instance_sums.is_empty() {
        None
    } else {
        Some(
            instance_sums
                .into_iter()
                .map(|(sum, n)| sum / n.max(1) as f64)
                .collect(),
        )
    };
    Ok(Evaluation {
        report,
        per_instance_smape,
    })
}
