//! Black-box query interface with noise injection and exact accounting.
//!
//! An [`OracleSession`] wraps either an in-process [`SpamModel`] or an
//! external process speaking the newline-delimited JSON protocol (see
//! [`external`]). Every scalar evaluation bumps the session counter by one;
//! a resampled-averaged query of `N` repeats bumps it by `N`.
//!
//! Noise is injected on the library side (also for external targets, which
//! return clean values, unless that is switched off): either bounded noise
//! with `|eta| <= theta` — uniform by default, worst-case patterns via
//! [`NoisePattern::ConstantPlus`] or an adversary callback — or i.i.d.
//! Gaussian noise of variance `sigma^2` per evaluation.
//!
//! Reproducibility: draws are organized in numbered streams derived from the
//! session seed, so a fixed assignment of work to stream ids yields
//! bit-identical results regardless of thread schedule. The convenience
//! [`OracleSession::query`] uses one shared stream under a lock; its draw
//! order is the arrival order, reproducible only single-threaded.

pub mod external;

use crate::model::{ModelError, SpamModel};
use crate::split_seed;
use external::ExternalOracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("transport failure (request id {id}): {detail}")]
    Transport { id: u64, detail: String },
    #[error("protocol violation at line {line}: {detail}")]
    Protocol { line: u64, detail: String },
    #[error("remote error for request id {id}: {message}")]
    Remote { id: u64, message: String },
    #[error("timeout waiting for request id {id}")]
    Timeout { id: u64 },
}

/// Bounded-noise pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoisePattern {
    /// Uniform on `[-theta, theta]`.
    #[default]
    Uniform,
    /// Always `+theta`; the simplest adversarial pattern.
    ConstantPlus,
}

/// Noise model applied per scalar evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    Noiseless,
    Bounded {
        theta: f64,
        #[serde(default)]
        pattern: NoisePattern,
    },
    Gaussian {
        sigma: f64,
    },
}

/// Arbitrary bounded-noise source for tests; the returned value is clamped
/// to `[-theta, theta]`.
pub type Adversary = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

enum Target {
    Model(Arc<SpamModel>),
    External(Arc<ExternalOracle>),
}

/// A query session over one target function.
pub struct OracleSession {
    target: Target,
    noise: NoiseModel,
    adversary: Option<Adversary>,
    /// Noise applies to external targets too unless cleared.
    noise_on_external: bool,
    seed: u64,
    counter: AtomicU64,
    default_stream: Mutex<ChaCha8Rng>,
    dim: usize,
}

impl OracleSession {
    pub fn new_model(model: Arc<SpamModel>, noise: NoiseModel, seed: u64) -> Self {
        let dim = model.d;
        OracleSession {
            target: Target::Model(model),
            noise,
            adversary: None,
            noise_on_external: true,
            seed,
            counter: AtomicU64::new(0),
            default_stream: Mutex::new(ChaCha8Rng::seed_from_u64(split_seed(seed, 0))),
            dim,
        }
    }

    pub fn new_external(
        oracle: Arc<ExternalOracle>,
        dim: usize,
        noise: NoiseModel,
        seed: u64,
    ) -> Self {
        OracleSession {
            target: Target::External(oracle),
            noise,
            adversary: None,
            noise_on_external: true,
            seed,
            counter: AtomicU64::new(0),
            default_stream: Mutex::new(ChaCha8Rng::seed_from_u64(split_seed(seed, 0))),
            dim,
        }
    }

    /// Installs a worst-case bounded-noise source (clamped to the configured
    /// theta). Only meaningful with [`NoiseModel::Bounded`].
    pub fn set_adversary(&mut self, adversary: Adversary) {
        self.adversary = Some(adversary);
    }

    /// Disables library-side noise for external targets.
    pub fn trust_external_noise(&mut self) {
        self.noise_on_external = false;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    /// Total scalar evaluations so far.
    pub fn query_count(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.counter.store(0, Ordering::Relaxed);
    }

    /// A deterministic noise stream; distinct ids give independent streams.
    /// Id 0 is reserved for the shared default stream.
    pub fn stream(&self, id: u64) -> OracleStream<'_> {
        OracleStream {
            session: self,
            rng: ChaCha8Rng::seed_from_u64(split_seed(self.seed, id)),
        }
    }

    /// Resampled-averaged query on the shared default stream (arrival
    /// order; reproducible single-threaded).
    pub fn query(&self, x: &[f64], n_resample: usize) -> Result<f64, OracleError> {
        let clean = self.clean_value(x)?;
        let mut rng = self.default_stream.lock().unwrap();
        Ok(self.finish_query(x, clean, n_resample, &mut rng))
    }

    fn clean_value(&self, x: &[f64]) -> Result<f64, OracleError> {
        match &self.target {
            Target::Model(m) => Ok(m.evaluate(x)?),
            Target::External(e) => e.query_one(x),
        }
    }

    fn noise_active(&self) -> bool {
        match &self.target {
            Target::Model(_) => true,
            Target::External(_) => self.noise_on_external,
        }
    }

    #[inline]
    fn finish_query(&self, x: &[f64], clean: f64, n_resample: usize, rng: &mut ChaCha8Rng) -> f64 {
        let n = n_resample.max(1) as u64;
        self.counter.fetch_add(n, Ordering::Relaxed);
        if !self.noise_active() {
            return clean;
        }
        match self.noise {
            NoiseModel::Noiseless => clean,
            NoiseModel::Bounded { theta, pattern } => {
                let mut acc = 0.0;
                for _ in 0..n {
                    let eta = match (&self.adversary, pattern) {
                        (Some(adv), _) => adv(x).clamp(-theta, theta),
                        (None, NoisePattern::Uniform) => rng.gen_range(-theta..=theta),
                        (None, NoisePattern::ConstantPlus) => theta,
                    };
                    acc += clean + eta;
                }
                acc / n as f64
            }
            NoiseModel::Gaussian { sigma } => {
                let mut acc = 0.0;
                for _ in 0..n {
                    let g: f64 = rng.sample(StandardNormal);
                    acc += clean + sigma * g;
                }
                acc / n as f64
            }
        }
    }

    /// Batched query of an external target (values aligned with `points`),
    /// with library-side noise and counting as `|points| * n_resample`
    /// evaluations. Also works for in-process targets, for loopback tests.
    pub fn query_batch(
        &self,
        points: &[Vec<f64>],
        n_resample: usize,
    ) -> Result<Vec<f64>, OracleError> {
        let cleans: Vec<f64> = match &self.target {
            Target::External(e) => e.query_batch(points)?,
            Target::Model(m) => points
                .iter()
                .map(|x| m.evaluate(x).map_err(OracleError::from))
                .collect::<Result<_, _>>()?,
        };
        let mut rng = self.default_stream.lock().unwrap();
        Ok(points
            .iter()
            .zip(cleans)
            .map(|(x, clean)| self.finish_query(x, clean, n_resample, &mut rng))
            .collect())
    }
}

/// A handle drawing noise from one numbered stream of the session.
pub struct OracleStream<'a> {
    session: &'a OracleSession,
    rng: ChaCha8Rng,
}

impl OracleStream<'_> {
    /// Resampled-averaged query; bumps the session counter by `n_resample`.
    pub fn query(&mut self, x: &[f64], n_resample: usize) -> Result<f64, OracleError> {
        let clean = self.session.clean_value(x)?;
        Ok(self
            .session
            .finish_query(x, clean, n_resample, &mut self.rng))
    }
}
