//! Experiment runner, query audits and the reference oracle server.
//!
//! The CLI front end drives batches of recovery trials from a single JSON
//! configuration, writes a self-describing `report.json` plus a flat
//! `results.csv` (`trial,order,exact_match,queries,seconds`), audits measured
//! query counts against the closed-form plan, and exposes the anchored-ANOVA
//! decomposition and a reference external-oracle server for loopback tests.
//!
//! Reports are byte-reproducible given (config, seed): all randomness is
//! seeded, trial `t` derives its seed as `seed + t`, and wall-clock timing is
//! confined to the CSV.

pub mod config;
pub mod experiment;
pub mod serve;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Pipeline(#[from] spamrec::pipeline::PipelineError),
    #[error(transparent)]
    Model(#[from] spamrec::model::ModelError),
    #[error(transparent)]
    Oracle(#[from] spamrec::oracle::OracleError),
    #[error("success floor missed: rate {rate:.4} < floor {floor:.4}")]
    FloorMissed { rate: f64, floor: f64 },
}

impl CliError {
    /// Exit code contract: 0 success, 1 floor missed, 2 usage/config,
    /// 3 transport.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::FloorMissed { .. } => 1,
            CliError::Oracle(e) => match e {
                spamrec::oracle::OracleError::Model(_) => 2,
                _ => 3,
            },
            CliError::Pipeline(spamrec::pipeline::PipelineError::Oracle(e)) => match e {
                spamrec::oracle::OracleError::Model(_) => 2,
                _ => 3,
            },
            _ => 2,
        }
    }
}
