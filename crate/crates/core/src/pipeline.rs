//! Top-down recovery of the interaction supports.
//!
//! For `i = r0, r0-1, ..., 1` over a shrinking active set `P`: draw `n_i`
//! sign vectors, build a verified `(P, i)`-hash family, and for every member
//! `h` and every grid point `x` of `chi(h)` assemble the measurement system,
//! solve the order-`i` recovery program and keep the tuples whose estimate
//! exceeds the threshold `eps_i`. Variables of the recovered tuples leave
//! the active set before the next order runs.
//!
//! Parameter selection follows the theory: grid half-resolution
//! `m_i >= sqrt(i) (3L/D_i)^(1/alpha)`, measurement counts from the
//! order-specific sampling bounds (with unknowable universal constants
//! replaced by calibration knobs, optionally refined by a planted self-test),
//! noise radii from the six bounded/Gaussian formulas, and thresholds
//! defaulting to the boundary rule `eps_i = D_i / 3`.

use crate::hashing::{build_hash_family, make_grid, prune_family, HashError, HashFamily, HashFn};
use crate::index::{binomial, IndexTuple, SupportSets};
use crate::oracle::{OracleError, OracleSession};
use crate::sampling::{
    full_columns, injective_columns, measure_y, ColumnMode, ColumnSet, MeasureOperator,
    RademacherVector, SamplingError,
};
use crate::sparse_recovery::{
    iht, noise_radius, solve_p1, solve_p2, IhtOptions, NoiseCase, RecoveryProblem,
};
use crate::{oracle::NoiseModel, split_seed};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("calibration failed for order {order}: n grew past {limit}")]
    Calibration { order: usize, limit: usize },
}

/// Known (or assumed) problem parameters of the target function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub r0: usize,
    pub holder_l: f64,
    pub alpha: f64,
    /// Margins `D_1..D_r0`.
    pub margins: Vec<f64>,
    /// Sparsity upper bounds `|S_1|..|S_r0|`.
    pub sparsities: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    P1,
    P2,
    Iht,
}

/// How thresholds `eps_i` are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// The scale-free boundary rule `eps_i = D_i / 3`.
    #[default]
    MarginThird,
    /// Noise-driven thresholds from the theorems, using the calibrated
    /// stand-ins for the universal constants.
    TheoremNoise,
}

/// Per-order knobs of the recovery run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderParams {
    pub order: usize,
    /// Grid half-resolution `m_i`.
    pub m: usize,
    /// Measurement count `n_i`.
    pub n: usize,
    /// Resampling factor `N_i`.
    pub n_resample: usize,
    /// Threshold `eps_i`.
    pub eps: f64,
    /// Noise radius `nu_i`.
    pub nu: f64,
    /// Sparsity upper bound (used by IHT and the calibration self-test).
    pub sparsity: usize,
    pub solver: SolverKind,
}

/// Complete configuration of a recovery run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub d: usize,
    pub r0: usize,
    /// Indexed by `order - 1`.
    pub orders: Vec<OrderParams>,
    pub noise: NoiseModel,
    /// Gaussian concentration slack `epsilon` in (0,1).
    pub slack: f64,
    /// Hash-family construction constant `C1 > 1`.
    pub hash_c1: f64,
    /// Greedily minimize the verified family before use.
    pub hash_pruning: bool,
    pub column_mode: ColumnMode,
    pub threshold_rule: ThresholdRule,
    /// Calibrated stand-ins for the paper's `C2`, `C4` and the sampling
    /// bound constants.
    pub c2_hat: f64,
    pub c4_hat: f64,
    pub c_tilde: f64,
    /// Draw fresh sign vectors at every grid point instead of once per
    /// order.
    pub refresh_betas_per_point: bool,
    /// Process grid points of one hash concurrently.
    pub parallel_grid: bool,
    pub seed: u64,
}

/// Options controlling [`choose_parameters`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamOptions {
    pub c1: f64,
    pub c2_hat: f64,
    pub c4_hat: f64,
    pub c_tilde: f64,
    pub slack: f64,
    pub threshold_rule: ThresholdRule,
    pub column_mode: ColumnMode,
    pub hash_pruning: bool,
    pub refresh_betas_per_point: bool,
    pub parallel_grid: bool,
}

impl Default for ParamOptions {
    fn default() -> Self {
        ParamOptions {
            c1: 2.0,
            c2_hat: 1.0,
            c4_hat: 1.0,
            c_tilde: 1.0,
            slack: 0.5,
            threshold_rule: ThresholdRule::MarginThird,
            column_mode: ColumnMode::Injective,
            hash_pruning: false,
            refresh_betas_per_point: false,
            parallel_grid: false,
        }
    }
}

/// Bounded-noise ceiling
/// `min{ min_{i>=3} D_i/(2^i 3 C2), D_2/(12 C4), D_1/(6 C2) }`
/// with the calibrated constants.
pub fn theta_ceiling(params: &ModelParams, c2_hat: f64, c4_hat: f64) -> f64 {
    let mut ceiling = f64::INFINITY;
    for i in 1..=params.r0 {
        let d_i = params.margins[i - 1];
        let bound = match i {
            1 => d_i / (6.0 * c2_hat),
            2 => d_i / (12.0 * c4_hat),
            _ => d_i / ((1u64 << i) as f64 * 3.0 * c2_hat),
        };
        ceiling = ceiling.min(bound);
    }
    ceiling
}

/// Populates every per-order parameter from the theory formulas. Returns the
/// configuration plus human-readable warnings (noise above the bounded
/// ceiling, thresholds past the boundary rule).
pub fn choose_parameters(
    params: &ModelParams,
    noise: NoiseModel,
    opts: &ParamOptions,
    seed: u64,
) -> Result<(RecoveryConfig, Vec<String>), PipelineError> {
    if params.margins.len() != params.r0 || params.sparsities.len() != params.r0 {
        return Err(PipelineError::Config(format!(
            "margins/sparsities must have r0 = {} entries",
            params.r0
        )));
    }
    if !(0.0 < params.alpha && params.alpha <= 1.0) {
        return Err(PipelineError::Config("alpha must lie in (0,1]".into()));
    }
    if params.margins.iter().any(|&d| d <= 0.0) || params.holder_l <= 0.0 {
        return Err(PipelineError::Config("margins and L must be positive".into()));
    }
    let mut warnings = Vec::new();

    if let NoiseModel::Bounded { theta, .. } = noise {
        let ceiling = theta_ceiling(params, opts.c2_hat, opts.c4_hat);
        if theta >= ceiling {
            warnings.push(format!(
                "bounded noise theta = {theta} exceeds the guarantee ceiling {ceiling:.6}; \
                 the run proceeds but exact recovery is not guaranteed"
            ));
        } else {
            warnings.push(format!(
                "bounded noise headroom: theta = {theta} vs ceiling {ceiling:.6} \
                 ({:.1}% used)",
                100.0 * theta / ceiling
            ));
        }
    }

    // active-set size estimate at each order: higher orders removed first
    let mut active_est = vec![params.d; params.r0 + 1];
    for i in (1..=params.r0).rev() {
        let removed: usize = (i..=params.r0).map(|l| l * params.sparsities[l - 1]).sum();
        active_est[i - 1] = params.d.saturating_sub(removed).max(1);
    }

    let mut orders = Vec::with_capacity(params.r0);
    for i in 1..=params.r0 {
        let d_i = params.margins[i - 1];
        let k_i = params.sparsities[i - 1].max(1);
        let p_i = active_est[i]; // |P_i|: ambient minus the higher orders
        let m = ((i as f64).sqrt() * (3.0 * params.holder_l / d_i).powf(1.0 / params.alpha))
            .ceil()
            .max(1.0) as usize;
        let n_formula = match i {
            1 => opts.c_tilde * k_i as f64 * (p_i as f64 / k_i as f64).ln(),
            2 => opts.c_tilde * k_i as f64 * ((p_i as f64).powi(2) / k_i as f64).ln(),
            _ => {
                opts.c_tilde
                    * (k_i as f64).powi(2)
                    * (binomial(p_i, i).max(2) as f64).ln()
            }
        };
        let n = (n_formula.ceil() as usize).max(2);
        let n_resample = match noise {
            NoiseModel::Gaussian { sigma } => {
                let s = (1.0 + opts.slack) * sigma;
                let v = match i {
                    1 => 18.0 * opts.c2_hat.powi(2) * s * s / (d_i * d_i),
                    2 => 72.0 * opts.c4_hat.powi(2) * s * s
                        / (std::f64::consts::PI * d_i * d_i),
                    _ => 9.0 * opts.c2_hat.powi(2) * (1u64 << i) as f64 * s * s / (d_i * d_i),
                };
                v.floor() as usize + 1
            }
            _ => 1,
        };
        let nu = noise_radius(noise_case(noise, opts.slack), i, n, n_resample);
        let eps = match opts.threshold_rule {
            ThresholdRule::MarginThird => d_i / 3.0,
            ThresholdRule::TheoremNoise => match noise {
                NoiseModel::Noiseless => d_i / 3.0,
                NoiseModel::Bounded { theta, .. } => {
                    if i == 2 {
                        4.0 * opts.c4_hat * theta
                    } else {
                        (1u64 << i) as f64 * opts.c2_hat * theta
                    }
                }
                NoiseModel::Gaussian { sigma } => {
                    let rs = (n_resample as f64).sqrt();
                    if i == 2 {
                        2.0 * (2.0 / std::f64::consts::PI).sqrt()
                            * opts.c4_hat
                            * (1.0 + opts.slack)
                            * 2.0
                            * sigma
                            / rs
                    } else {
                        (2f64).powf(i as f64 / 2.0) * opts.c2_hat * (1.0 + opts.slack) * sigma
                            / rs
                    }
                }
            },
        };
        if eps > d_i / 3.0 {
            warnings.push(format!(
                "order {i}: threshold eps = {eps:.6} exceeds the D_i/3 boundary {:.6}",
                d_i / 3.0
            ));
        }
        let solver = if i == 2 { SolverKind::P2 } else { SolverKind::P1 };
        orders.push(OrderParams {
            order: i,
            m,
            n,
            n_resample,
            eps,
            nu,
            sparsity: params.sparsities[i - 1],
            solver,
        });
    }

    Ok((
        RecoveryConfig {
            d: params.d,
            r0: params.r0,
            orders,
            noise,
            slack: opts.slack,
            hash_c1: opts.c1,
            hash_pruning: opts.hash_pruning,
            column_mode: opts.column_mode,
            threshold_rule: opts.threshold_rule,
            c2_hat: opts.c2_hat,
            c4_hat: opts.c4_hat,
            c_tilde: opts.c_tilde,
            refresh_betas_per_point: opts.refresh_betas_per_point,
            parallel_grid: opts.parallel_grid,
            seed,
        },
        warnings,
    ))
}

fn noise_case(noise: NoiseModel, slack: f64) -> NoiseCase {
    match noise {
        NoiseModel::Noiseless => NoiseCase::Noiseless,
        NoiseModel::Bounded { theta, .. } => NoiseCase::Bounded { theta },
        NoiseModel::Gaussian { sigma } => NoiseCase::Gaussian { sigma, slack },
    }
}

/// Grows each `n_i` geometrically (x1.5) until a noiseless planted self-test
/// recovers `reps` instances in a row, then keeps that count. The self-test
/// plants `k_i` tuples with values between `2 D_i / 3` and `D_i` among the
/// full column set expected at order `i` and checks exact thresholded
/// recovery with fresh sign vectors per repetition.
pub fn calibrate_measurements(
    cfg: &mut RecoveryConfig,
    params: &ModelParams,
    reps: usize,
    seed: u64,
) -> Result<(), PipelineError> {
    for i in (1..=params.r0).rev() {
        let removed: usize = ((i + 1)..=params.r0)
            .map(|l| l * params.sparsities[l - 1])
            .sum();
        let p_i = params.d.saturating_sub(removed).max(i);
        let active: Arc<Vec<usize>> = Arc::new((0..p_i).collect());
        let columns = full_columns(&active, i);
        let colset = Arc::new(ColumnSet::new(active.clone(), columns, i));
        let cols = colset.len();
        let k_i = params.sparsities[i - 1].max(1);
        let d_i = params.margins[i - 1];
        let op = &cfg.orders[i - 1];
        let (eps, solver) = (op.eps, op.solver);
        let mut n = op.n;
        let limit = (4 * cols).max(64);
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 0x300 + i as u64));
        loop {
            let mut all_ok = true;
            for _ in 0..reps {
                let betas = (0..n)
                    .map(|_| RademacherVector::draw(active.clone(), &mut rng))
                    .collect::<Vec<_>>();
                let operator = Arc::new(MeasureOperator::new(betas, colset.clone()));
                let mut z_true = DVector::zeros(cols);
                let mut planted = Vec::new();
                while planted.len() < k_i.min(cols) {
                    let c = rng.gen_range(0..cols);
                    if !planted.contains(&c) {
                        planted.push(c);
                        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        z_true[c] = sign * rng.gen_range(2.0 * d_i / 3.0..=d_i);
                    }
                }
                let y = operator.apply(&z_true);
                let problem = RecoveryProblem::new(operator, y, 0.0).with_sparsity(k_i);
                let z = match solver {
                    SolverKind::P1 => solve_p1(&problem),
                    SolverKind::P2 => solve_p2(&problem),
                    SolverKind::Iht => iht(&problem, IhtOptions::default()),
                };
                let ok = match z {
                    Ok(z) => (0..cols).all(|c| (z[c].abs() > eps) == (z_true[c] != 0.0)),
                    Err(_) => false,
                };
                if !ok {
                    all_ok = false;
                    break;
                }
            }
            if all_ok {
                break;
            }
            n = ((n as f64 * 1.5).ceil() as usize).max(n + 1);
            if n > limit {
                return Err(PipelineError::Calibration { order: i, limit });
            }
        }
        cfg.orders[i - 1].n = n;
        // keep the noise radius consistent with the calibrated n
        cfg.orders[i - 1].nu = noise_radius(noise_case(cfg.noise, cfg.slack), i, n, cfg.orders[i - 1].n_resample);
    }
    Ok(())
}

/// One failed solve, with its location.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverFailure {
    pub order: usize,
    pub hash_index: usize,
    pub grid_index: usize,
    pub message: String,
}

/// Per-order outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderReport {
    pub order: usize,
    pub support: Vec<IndexTuple>,
    /// Active set at entry.
    pub active: Vec<usize>,
    pub family_size: usize,
    pub grid_points_per_hash: usize,
    pub queries: u64,
    pub n: usize,
    pub m: usize,
    pub n_resample: usize,
    pub eps: f64,
    pub nu: f64,
    pub solver_failures: Vec<SolverFailure>,
}

/// Result of a full top-down run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub supports: SupportSets,
    pub per_order: Vec<OrderReport>,
    pub total_queries: u64,
    pub elapsed_secs: f64,
}

impl RecoveryResult {
    /// The closed-form query count `sum_i N_i 2^i (2m_i+1)^i n_i |H_i|`
    /// with the realized family sizes.
    pub fn expected_queries(&self) -> u64 {
        self.per_order.iter().map(order_query_formula).sum()
    }
}

/// `N_i * 2^i * (2m_i+1)^i * n_i * |H_i|` for one order report.
pub fn order_query_formula(report: &OrderReport) -> u64 {
    report.n_resample as u64
        * (1u64 << report.order)
        * ((2 * report.m + 1) as u64).pow(report.order as u32)
        * report.n as u64
        * report.family_size as u64
}

/// Runs the full top-down loop: orders `r0` down to `1`, shrinking the
/// active set by the variables of each recovered support.
pub fn recover_all(
    session: &OracleSession,
    cfg: &RecoveryConfig,
) -> Result<RecoveryResult, PipelineError> {
    let start = std::time::Instant::now();
    let mut active: Vec<usize> = (0..cfg.d).collect();
    let mut per_order = Vec::with_capacity(cfg.r0);
    for i in (1..=cfg.r0).rev() {
        let report = recover_order(session, &active, i, cfg)?;
        let recovered_vars: std::collections::BTreeSet<usize> = report
            .support
            .iter()
            .flat_map(|t| t.vars().iter().copied())
            .collect();
        active.retain(|v| !recovered_vars.contains(v));
        per_order.push(report);
    }
    per_order.reverse();
    let supports = SupportSets::new_unchecked(
        per_order.iter().flat_map(|r| r.support.iter().cloned()),
    );
    let total_queries = per_order.iter().map(|r| r.queries).sum();
    Ok(RecoveryResult {
        supports,
        per_order,
        total_queries,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Recovers the order-`i` support over the given active set: for each hash
/// of a verified family and each grid point, assemble, solve, threshold and
/// accumulate. Solver failures skip the grid point and are reported.
pub fn recover_order(
    session: &OracleSession,
    active: &[usize],
    order: usize,
    cfg: &RecoveryConfig,
) -> Result<OrderReport, PipelineError> {
    let op = cfg
        .orders
        .get(order - 1)
        .ok_or_else(|| PipelineError::Config(format!("no parameters for order {order}")))?;
    let mut report = OrderReport {
        order,
        support: Vec::new(),
        active: active.to_vec(),
        family_size: 0,
        grid_points_per_hash: 0,
        queries: 0,
        n: op.n,
        m: op.m,
        n_resample: op.n_resample,
        eps: op.eps,
        nu: op.nu,
        solver_failures: Vec::new(),
    };
    if active.len() < order || active.is_empty() {
        return Ok(report);
    }

    let active_arc: Arc<Vec<usize>> = Arc::new(active.to_vec());
    let betas = RademacherVector::draw_n(
        &active_arc,
        op.n,
        split_seed(cfg.seed, 0x100 + order as u64),
    );

    let family = if order == 1 {
        build_hash_family(active, 1, cfg.hash_c1.max(1.5), split_seed(cfg.seed, 0x200))?
    } else {
        let f = build_hash_family(
            active,
            order,
            cfg.hash_c1,
            split_seed(cfg.seed, 0x200 + order as u64),
        )?;
        if cfg.hash_pruning {
            prune_family(&f)
        } else {
            f
        }
    };
    report.family_size = family.functions.len();
    report.grid_points_per_hash = (2 * op.m + 1).pow(order as u32);

    let mut survivors: std::collections::BTreeSet<IndexTuple> = Default::default();
    for (hi, h) in family.functions.iter().enumerate() {
        let (tuples, queries, mut failures) = process_hash(
            session, h, hi, order, op, cfg, &active_arc, &betas, &family,
        )?;
        report.queries += queries;
        report.solver_failures.append(&mut failures);
        survivors.extend(tuples);
    }
    report.support = survivors.into_iter().collect();
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn process_hash(
    session: &OracleSession,
    h: &HashFn,
    hash_index: usize,
    order: usize,
    op: &OrderParams,
    cfg: &RecoveryConfig,
    active: &Arc<Vec<usize>>,
    betas: &[RademacherVector],
    family: &HashFamily,
) -> Result<(Vec<IndexTuple>, u64, Vec<SolverFailure>), PipelineError> {
    let _ = family;
    let grid = make_grid(h, op.m, order);
    let tuples = match cfg.column_mode {
        ColumnMode::Full => full_columns(active, order),
        ColumnMode::Injective => injective_columns(h, order),
    };
    let colset = Arc::new(ColumnSet::new(active.clone(), tuples, order));
    let operator = if colset.is_empty() {
        None
    } else if cfg.refresh_betas_per_point {
        None // built per point below
    } else {
        Some(Arc::new(MeasureOperator::new(betas.to_vec(), colset.clone())))
    };

    let run_point = |g: usize| -> Result<(Vec<IndexTuple>, u64, Option<SolverFailure>), PipelineError> {
        let mut x = vec![0.0; cfg.d];
        grid.write_point(g, &mut x);
        let stream_id = ((order as u64) << 56) | ((hash_index as u64) << 28) | g as u64;
        let mut stream = session.stream(stream_id);
        let point_betas;
        let (betas_here, operator_here): (&[RademacherVector], Option<Arc<MeasureOperator>>) =
            if cfg.refresh_betas_per_point {
                let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, stream_id ^ 0xBEBE));
                point_betas = (0..op.n)
                    .map(|_| RademacherVector::draw(active.clone(), &mut rng))
                    .collect::<Vec<_>>();
                let oper = (!colset.is_empty())
                    .then(|| Arc::new(MeasureOperator::new(point_betas.clone(), colset.clone())));
                (&point_betas, oper)
            } else {
                (betas, operator.clone())
            };

        let (y, queries) = measure_y(
            &mut |p: &[f64], n: usize| stream.query(p, n),
            &x,
            betas_here,
            h,
            order,
            active,
            op.n_resample,
        )?;
        let Some(operator_here) = operator_here else {
            return Ok((Vec::new(), queries, None));
        };
        // signed sums that cancel in exact arithmetic leave rounding residue
        // of order 2^i eps_mach; estimates from such observations stay
        // orders of magnitude below any threshold, so skip the solve
        if y.amax() <= op.eps * 1e-6 {
            return Ok((Vec::new(), queries, None));
        }
        // a feasible estimate with some |z_j| > eps needs
        // ||y||_2 >= (1 - delta) sqrt(n) eps - nu; skip observations too
        // small to cross the threshold even at delta = 0.75
        if op.solver != SolverKind::Iht
            && y.norm() + op.nu < 0.25 * (betas_here.len() as f64).sqrt() * op.eps
        {
            return Ok((Vec::new(), queries, None));
        }
        let problem = RecoveryProblem::new(operator_here, y, op.nu).with_sparsity(op.sparsity);
        let solved = match op.solver {
            SolverKind::P1 => solve_p1(&problem),
            SolverKind::P2 => solve_p2(&problem),
            SolverKind::Iht => iht(&problem, IhtOptions::default()),
        };
        match solved {
            Ok(z) => {
                let mut found = Vec::new();
                for (c, tuple) in colset.tuples.iter().enumerate() {
                    if z[c].abs() > op.eps {
                        found.push(tuple.clone());
                    }
                }
                Ok((found, queries, None))
            }
            Err(e) => Ok((
                Vec::new(),
                queries,
                Some(SolverFailure {
                    order,
                    hash_index,
                    grid_index: g,
                    message: e.to_string(),
                }),
            )),
        }
    };

    let point_results: Vec<(Vec<IndexTuple>, u64, Option<SolverFailure>)> = if cfg.parallel_grid {
        (0..grid.len())
            .into_par_iter()
            .map(run_point)
            .collect::<Result<_, _>>()?
    } else {
        (0..grid.len())
            .map(run_point)
            .collect::<Result<_, _>>()?
    };

    let mut tuples = Vec::new();
    let mut queries = 0;
    let mut failures = Vec::new();
    for (t, q, f) in point_results {
        tuples.extend(t);
        queries += q;
        failures.extend(f);
    }
    Ok((tuples, queries, failures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{synth_spam, FactorProfile, SpamModel, SynthSpec};
    use crate::model::{Component, Factor};
    use crate::oracle::NoiseModel;

    fn params_for(model: &SpamModel, sparsities: Vec<usize>) -> ModelParams {
        ModelParams {
            d: model.d,
            r0: model.r0,
            holder_l: model.holder_l,
            alpha: model.alpha,
            margins: model.margins.clone(),
            sparsities,
        }
    }

    #[test]
    fn grid_resolution_formulas() {
        // L=1, alpha=1, D1=0.3, r0=1 -> m = ceil(3/0.3) = 10
        let p = ModelParams {
            d: 20,
            r0: 1,
            holder_l: 1.0,
            alpha: 1.0,
            margins: vec![0.3],
            sparsities: vec![2],
        };
        let (cfg, _) =
            choose_parameters(&p, NoiseModel::Noiseless, &ParamOptions::default(), 1).unwrap();
        assert_eq!(cfg.orders[0].m, 10);
        assert!((cfg.orders[0].eps - 0.1).abs() < 1e-15);
        assert_eq!(cfg.orders[0].nu, 0.0);
        assert_eq!(cfg.orders[0].n_resample, 1);

        // r0=3, i=3, L=1, alpha=1, D3=0.5 -> m3 = ceil(sqrt(3) * 6) = 11
        let p3 = ModelParams {
            d: 30,
            r0: 3,
            holder_l: 1.0,
            alpha: 1.0,
            margins: vec![0.3, 0.4, 0.5],
            sparsities: vec![3, 2, 1],
        };
        let (cfg3, _) =
            choose_parameters(&p3, NoiseModel::Noiseless, &ParamOptions::default(), 1).unwrap();
        assert_eq!(cfg3.orders[2].m, 11);
    }

    #[test]
    fn gaussian_resample_formula() {
        // sigma=0.1, slack=0.5, C2=1, D1=0.3, i=1 -> N1 = floor(4.5) + 1 = 5
        let p = ModelParams {
            d: 10,
            r0: 1,
            holder_l: 1.0,
            alpha: 1.0,
            margins: vec![0.3],
            sparsities: vec![1],
        };
        let (cfg, _) = choose_parameters(
            &p,
            NoiseModel::Gaussian { sigma: 0.1 },
            &ParamOptions::default(),
            1,
        )
        .unwrap();
        assert_eq!(cfg.orders[0].n_resample, 5);
    }

    #[test]
    fn bounded_ceiling_warning() {
        let p = ModelParams {
            d: 10,
            r0: 1,
            holder_l: 1.0,
            alpha: 1.0,
            margins: vec![0.3],
            sparsities: vec![1],
        };
        assert!((theta_ceiling(&p, 1.0, 1.0) - 0.05).abs() < 1e-12);
        let (_, warnings) = choose_parameters(
            &p,
            NoiseModel::Bounded {
                theta: 0.2,
                pattern: Default::default(),
            },
            &ParamOptions::default(),
            1,
        )
        .unwrap();
        assert!(warnings.iter().any(|w| w.contains("exceeds")));
    }

    #[test]
    fn zero_function_recovers_nothing() {
        let model = Arc::new(
            SpamModel::new(8, 0.0, 1.0, 1.0, vec![0.3, 0.3], SupportSets::default(), vec![])
                .unwrap(),
        );
        let p = ModelParams {
            d: 8,
            r0: 2,
            holder_l: 1.0,
            alpha: 1.0,
            margins: vec![0.3, 0.3],
            sparsities: vec![1, 1],
        };
        let (cfg, _) =
            choose_parameters(&p, NoiseModel::Noiseless, &ParamOptions::default(), 3).unwrap();
        let session = OracleSession::new_model(model, NoiseModel::Noiseless, 3);
        let result = recover_all(&session, &cfg).unwrap();
        assert_eq!(result.supports.all().count(), 0);
        // query accounting stays exact even with empty recoveries
        assert_eq!(session.query_count(), result.expected_queries());
        assert_eq!(result.total_queries, result.expected_queries());
    }

    #[test]
    fn univariate_noiseless_exact() {
        let spec = SynthSpec {
            d: 20,
            r0: 1,
            sparsities: vec![3],
            holder_l: 1.0,
            alpha: 1.0,
            margins: vec![0.55],
            mu: 0.4,
            seed: 77,
            profile: FactorProfile::default(),
        };
        let model = Arc::new(synth_spam(&spec).unwrap());
        let p = params_for(&model, vec![3]);
        let (mut cfg, _) =
            choose_parameters(&p, NoiseModel::Noiseless, &ParamOptions::default(), 7).unwrap();
        calibrate_measurements(&mut cfg, &p, 12, 99).unwrap();
        let session = OracleSession::new_model(model.clone(), NoiseModel::Noiseless, 7);
        let result = recover_all(&session, &cfg).unwrap();
        let got: Vec<_> = result.supports.order(1).cloned().collect();
        let want: Vec<_> = model.supports.order(1).cloned().collect();
        assert_eq!(got, want);
        assert_eq!(session.query_count(), result.expected_queries());
    }

    /// Hand-built trivariate model with corner-peaking components so a
    /// small grid suffices; exercises the full three-order loop fast.
    #[test]
    fn trivariate_hand_model_exact() {
        let t = |v: &[usize]| IndexTuple::new(v.to_vec()).unwrap();
        let lin = Factor::linear;
        let comps = vec![
            Component {
                tuple: t(&[1]),
                amplitude: 1.0,
                factors: vec![lin()],
            },
            Component {
                tuple: t(&[4, 7]),
                amplitude: 1.0,
                factors: vec![lin(), lin()],
            },
            Component {
                tuple: t(&[2, 8, 10]),
                amplitude: 1.0,
                factors: vec![lin(), lin(), lin()],
            },
        ];
        let supports =
            SupportSets::new(vec![t(&[1]), t(&[4, 7]), t(&[2, 8, 10])]).unwrap();
        let model = Arc::new(
            SpamModel::new(12, 0.25, 2.0, 1.0, vec![0.9, 0.9, 0.9], supports, comps).unwrap(),
        );
        let mut orders = Vec::new();
        for i in 1..=3 {
            orders.push(OrderParams {
                order: i,
                m: 1,
                n: if i == 1 { 14 } else { 20 },
                n_resample: 1,
                eps: 0.3,
                nu: 0.0,
                sparsity: 1,
                solver: if i == 2 { SolverKind::P2 } else { SolverKind::P1 },
            });
        }
        let cfg = RecoveryConfig {
            d: 12,
            r0: 3,
            orders,
            noise: NoiseModel::Noiseless,
            slack: 0.5,
            hash_c1: 2.0,
            hash_pruning: true,
            column_mode: ColumnMode::Injective,
            threshold_rule: ThresholdRule::MarginThird,
            c2_hat: 1.0,
            c4_hat: 1.0,
            c_tilde: 1.0,
            refresh_betas_per_point: false,
            parallel_grid: false,
            seed: 12345,
        };
        let session = OracleSession::new_model(model.clone(), NoiseModel::Noiseless, 5);
        let result = recover_all(&session, &cfg).unwrap();
        assert_eq!(
            result.supports.order(3).cloned().collect::<Vec<_>>(),
            vec![t(&[2, 8, 10])]
        );
        assert_eq!(
            result.supports.order(2).cloned().collect::<Vec<_>>(),
            vec![t(&[4, 7])]
        );
        assert_eq!(
            result.supports.order(1).cloned().collect::<Vec<_>>(),
            vec![t(&[1])]
        );
        assert_eq!(session.query_count(), result.expected_queries());
        // active sets shrink exactly by the recovered variables
        assert_eq!(result.per_order[2].active.len(), 12);
        assert_eq!(result.per_order[1].active.len(), 9);
        assert_eq!(result.per_order[0].active.len(), 7);
    }

    #[test]
    fn beta_refresh_option_still_recovers() {
        let spec = SynthSpec {
            d: 10,
            r0: 1,
            sparsities: vec![2],
            holder_l: 1.0,
            alpha: 1.0,
            margins: vec![0.5],
            mu: 0.1,
            seed: 8,
            profile: FactorProfile::default(),
        };
        let model = Arc::new(synth_spam(&spec).unwrap());
        let p = params_for(&model, vec![2]);
        let (mut cfg, _) =
            choose_parameters(&p, NoiseModel::Noiseless, &ParamOptions::default(), 31).unwrap();
        cfg.orders[0].n = 20;
        cfg.refresh_betas_per_point = true;
        let session = OracleSession::new_model(model.clone(), NoiseModel::Noiseless, 31);
        let result = recover_all(&session, &cfg).unwrap();
        assert_eq!(
            result.supports.order(1).cloned().collect::<Vec<_>>(),
            model.supports.order(1).cloned().collect::<Vec<_>>()
        );
        // the query plan is unchanged by refreshing
        assert_eq!(session.query_count(), result.expected_queries());
    }

    #[test]
    fn parallel_grid_matches_sequential() {
        let spec = SynthSpec {
            d: 10,
            r0: 1,
            sparsities: vec![2],
            holder_l: 1.0,
            alpha: 1.0,
            margins: vec![0.5],
            mu: 0.0,
            seed: 3,
            profile: FactorProfile::default(),
        };
        let model = Arc::new(synth_spam(&spec).unwrap());
        let p = params_for(&model, vec![2]);
        let (mut cfg, _) = choose_parameters(
            &p,
            NoiseModel::Gaussian { sigma: 0.02 },
            &ParamOptions::default(),
            21,
        )
        .unwrap();
        cfg.orders[0].n = 24;
        let run = |parallel: bool| {
            let mut cfg = cfg.clone();
            cfg.parallel_grid = parallel;
            let session =
                OracleSession::new_model(model.clone(), NoiseModel::Gaussian { sigma: 0.02 }, 21);
            let r = recover_all(&session, &cfg).unwrap();
            (
                r.supports.order(1).cloned().collect::<Vec<_>>(),
                session.query_count(),
            )
        };
        assert_eq!(run(false), run(true));
    }
}
