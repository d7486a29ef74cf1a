//! Experiment configuration: one JSON document, defaults materialized into
//! the report so every run is self-describing.

use crate::CliError;
use serde::{Deserialize, Serialize};
use spamrec::model::SynthSpec;
use spamrec::oracle::NoiseModel;
use spamrec::pipeline::{ModelParams, ParamOptions, SolverKind};
use std::path::Path;

/// Where the target function comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    /// Synthesize a fresh model per trial (trial `t` uses `seed + t`).
    Synth(SynthSpec),
    /// Load a fixed model file.
    ModelFile(String),
    /// External oracle endpoint: `cmd:<shell command>` or `tcp:<host:port>`,
    /// or the literal string `env` to read `SPAMREC_ORACLE`.
    Oracle(String),
}

/// Per-order manual overrides applied after parameter selection.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OrderOverride {
    pub order: usize,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_resample: Option<usize>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub solver: Option<SolverKind>,
}

fn default_trials() -> usize {
    1
}
fn default_floor() -> f64 {
    1.0
}
fn default_calibration_reps() -> usize {
    24
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    /// Required for external oracles; derived from the synth spec or model
    /// file otherwise (explicit values win).
    #[serde(default)]
    pub model_params: Option<ModelParams>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    /// Exit status reflects whether the full-exact success rate met this.
    #[serde(default = "default_floor")]
    pub success_floor: f64,
    #[serde(default)]
    pub calibrate: bool,
    #[serde(default = "default_calibration_reps")]
    pub calibration_reps: usize,
    /// Run trials concurrently (per-trial results stay deterministic; only
    /// wall time varies).
    #[serde(default)]
    pub parallel_trials: bool,
    #[serde(default)]
    pub options: ParamOptions,
    #[serde(default)]
    pub overrides: Vec<OrderOverride>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials < 1 {
            return Err(CliError::Config("trial count must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.success_floor) {
            return Err(CliError::Config("success_floor must lie in [0,1]".into()));
        }
        if matches!(self.target, TargetSpec::Oracle(_)) && self.model_params.is_none() {
            return Err(CliError::Config(
                "external oracles need an explicit model_params block".into(),
            ));
        }
        Ok(())
    }
}
