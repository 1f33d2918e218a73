//! Run configuration: defaults, then a TOML file, then flags, then the
//! environment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trajair::dataset::HorizonConfig;
use trajair::geo::FrameConfig;
use trajair::model::ModelConfig;
use trajair::provenance::{config_hash, CODE_VERSION};
use trajair::synth::PatternSpec;
use trajair::train::TrainConfig;

use crate::error::CliError;

/// Overrides the data root from flags and config files.
pub const DATA_ROOT_ENV: &str = "TRAJAIR_DATA_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds training, sampling and synthesis. Replaces `train.seed`.
    pub seed: u64,
    pub data_root: Option<PathBuf>,
    /// Empty means every day but the last.
    pub train_days: Vec<String>,
    /// Empty means the last day.
    pub test_days: Vec<String>,
    /// Samples per window for best-of-N.
    pub n_samples: usize,
    /// Window stride for eval and predict; `horizon.stride` when unset.
    pub eval_stride: Option<usize>,
    pub frame: FrameConfig,
    pub horizon: HorizonConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: PatternSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            data_root: None,
            train_days: Vec::new(),
            test_days: Vec::new(),
            n_samples: 5,
            eval_stride: None,
            frame: FrameConfig::default(),
            horizon: HorizonConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            synth: PatternSpec::default(),
        }
    }
}

/// Flag values that override the file. `None` leaves the file value.
#[derive(Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub data_root: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub max_steps: Option<usize>,
    pub n_samples: Option<usize>,
    pub min_agents: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))
    }

    /// Merge flags and environment, tie the model horizon to the window
    /// horizon and validate.
    pub fn resolve(mut self, o: Overrides) -> Result<RunConfig, CliError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = o.data_root {
            self.data_root = Some(d);
        }
        if let Some(e) = o.epochs {
            self.train.epochs = e;
        }
        if let Some(m) = o.max_steps {
            self.train.max_steps = Some(m);
        }
        if let Some(n) = o.n_samples {
            self.n_samples = n;
        }
        if let Some(m) = o.min_agents {
            self.horizon.min_agents = m;
        }
        if let Some(d) = std::env::var_os(DATA_ROOT_ENV).filter(|v| !v.is_empty()) {
            self.data_root = Some(PathBuf::from(d));
        }
        self.train.seed = self.seed;
        self.model.t_obs = self.horizon.t_obs;
        self.model.t_pred = self.horizon.t_pred;
        self.horizon.validate().map_err(|e| CliError::config(e.to_string()))?;
        self.model.validate().map_err(|e| CliError::config(e.to_string()))?;
        self.frame.validate().map_err(|e| CliError::config(e.to_string()))?;
        if self.n_samples == 0 {
            return Err(CliError::config("n_samples must be >= 1"));
        }
        if self.eval_stride == Some(0) {
            return Err(CliError::config("eval_stride must be >= 1"));
        }
        Ok(self)
    }

    pub fn data_root(&self) -> Result<&Path, CliError> {
        self.data_root
            .as_deref()
            .ok_or_else(|| CliError::usage(format!("no data root: pass --data or set {DATA_ROOT_ENV}")))
    }

    pub fn eval_horizon(&self) -> HorizonConfig {
        HorizonConfig {
            stride: self.eval_stride.unwrap_or(self.horizon.stride),
            ..self.horizon.clone()
        }
    }

    pub fn stamp(&self) -> Stamp {
        Stamp {
            code_version: CODE_VERSION.to_string(),
            config_hash: config_hash(self),
            config: self.clone(),
        }
    }
}

/// Attached to every artifact so it can be traced to the run that made it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub code_version: String,
    pub config_hash: String,
    pub config: RunConfig,
}

impl Stamp {
    /// Recompute the hash from the embedded config.
    pub fn verify(&self) -> bool {
        config_hash(&self.config) == self.config_hash
    }
}
