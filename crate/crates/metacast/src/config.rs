//! Run configuration: training protocol knobs with their defaults, parsed
//! from `key = value` files with `#` comments. Unknown keys are rejected.

use std::path::Path;

use crate::autodiff::AdamHyper;
use crate::cnn::CnnHead;
use crate::core::{FrequencyClass, TransformMode};
use crate::error::{Error, Result};

/// Which combiner architecture to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Cnn,
    Rnn,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(ModelKind::Cnn),
            "rnn" => Ok(ModelKind::Rnn),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Rnn => "rnn",
        }
    }
}

/// Everything the trainer needs to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub epochs: usize,
    pub n_minibatches: usize,
    pub n_instances: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub model_kind: ModelKind,
    pub all_frequencies: bool,
    pub mode: TransformMode,
    pub adam: AdamHyper,
    /// Per-epoch learning-rate multiplier; 1.0 leaves the rate fixed.
    pub lr_decay: f64,
    pub stretch_k_max: usize,
    /// Cell-state size; `None` picks the per-frequency default.
    pub state_size: Option<usize>,
    pub conv_layers: usize,
    pub conv_channels: usize,
    pub head: CnnHead,
    pub clip_floor: f64,
    pub clip_negatives_only: bool,
    pub prefer_external: bool,
    pub val_log_every: usize,
    /// Overrides the per-frequency seasonal period.
    pub seasonal_period: Option<usize>,
    /// Average instance outputs in transformed space instead of original
    /// units.
    pub ensemble_transformed: bool,
    pub rnn_readout_cell: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epochs: 2000,
            n_minibatches: 10,
            n_instances: 8,
            holdout_fraction: 1.0 / 3.0,
            seed: 0,
            model_kind: ModelKind::Rnn,
            all_frequencies: false,
            mode: TransformMode::LastObsLog,
            adam: AdamHyper::default(),
            lr_decay: 1.0,
            stretch_k_max: 0,
            state_size: None,
            conv_layers: 4,
            conv_channels: 8,
            head: CnnHead::FullyConnected,
            clip_floor: 10.0,
            clip_negatives_only: false,
            prefer_external: false,
            val_log_every: 50,
            seasonal_period: None,
            ensemble_transformed: false,
            rnn_readout_cell: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config(format!(
                "holdout_fraction must lie in [0, 1), got {}",
                self.holdout_fraction
            )));
        }
        if self.n_minibatches == 0 {
            return Err(Error::Config("minibatches must be at least 1".into()));
        }
        if self.n_instances == 0 {
            return Err(Error::Config("instances must be at least 1".into()));
        }
        if self.lr_decay <= 0.0 || self.lr_decay > 1.0 {
            return Err(Error::Config(format!(
                "lr_decay must lie in (0, 1], got {}",
                self.lr_decay
            )));
        }
        Ok(())
    }

    /// Cell-state size for one frequency: the configured override, or the
    /// per-frequency defaults (3 yearly, 4 quarterly, 6 monthly, 4 for the
    /// short-horizon classes), or 9 when one model serves all frequencies.
    pub fn state_size_for(&self, frequency: Option<FrequencyClass>) -> usize {
        if let Some(s) = self.state_size {
            return s;
        }
        match frequency {
            None => 9,
            Some(FrequencyClass::Yearly) => 3,
            Some(FrequencyClass::Quarterly) => 4,
            Some(FrequencyClass::Monthly) => 6,
            Some(_) => 4,
        }
    }

    /// Seasonal period for one frequency, honoring the override.
    pub fn seasonal_period_for(&self, frequency: FrequencyClass) -> usize {
        self.seasonal_period
            .unwrap_or_else(|| frequency.seasonal_period())
    }

    pub fn clip_policy(&self) -> crate::preprocess::ClipPolicy {
        crate::preprocess::ClipPolicy {
            floor: self.clip_floor,
            negatives_only: self.clip_negatives_only,
        }
    }

    /// Parses `key = value` lines; later lines override earlier ones.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            config.set(key, value).map_err(|e| {
                Error::Config(format!("line {}: {e}", lineno + 1))
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{value}'")))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                _ => Err(Error::Config(format!(
                    "key '{key}': expected a boolean, got '{value}'"
                ))),
            }
        }
        match key {
            "epochs" => self.epochs = num(key, value)?,
            "minibatches" => self.n_minibatches = num(key, value)?,
            "instances" => self.n_instances = num(key, value)?,
            "holdout_fraction" => self.holdout_fraction = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "model" => self.model_kind = ModelKind::parse(value)?,
            "all_frequencies" => self.all_frequencies = flag(key, value)?,
            "mode" => self.mode = TransformMode::parse(value)?,
            "lr" => self.adam.lr = num(key, value)?,
            "beta1" => self.adam.beta1 = num(key, value)?,
            "beta2" => self.adam.beta2 = num(key, value)?,
            "eps" => self.adam.eps = num(key, value)?,
            "lr_decay" => self.lr_decay = num(key, value)?,
            "stretch_k_max" => self.stretch_k_max = num(key, value)?,
            "state_size" => self.state_size = Some(num(key, value)?),
            "conv_layers" => self.conv_layers = num(key, value)?,
            "conv_channels" => self.conv_channels = num(key, value)?,
            "head" => self.head = CnnHead::parse(value)?,
            "clip_floor" => self.clip_floor = num(key, value)?,
            "clip_negatives_only" => self.clip_negatives_only = flag(key, value)?,
            "prefer_external" => self.prefer_external = flag(key, value)?,
            "val_log_every" => self.val_log_every = num::<usize>(key, value)?.max(1),
            "seasonal_period" => self.seasonal_period = Some(num(key, value)?),
            "ensemble_transformed" => self.ensemble_transformed = flag(key, value)?,
            "rnn_readout_cell" => self.rnn_readout_cell = flag(key, value)?,
            other => {
                return Err(Error::Config(format!("unknown key '{other}'")));
            }
        }
        Ok(())
    }
}

/// Reads a run configuration file.
pub fn load_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::parse_str(&text)
}
