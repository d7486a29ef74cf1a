//! Sparse additive models in anchored canonical form.
//!
//! A model is `f(x) = mu + sum_j phi_j(x_j)` over tuples `j` drawn from the
//! support sets plus optional lower-order tuples induced by them. The
//! canonical form requires `mu = f(0)`, every component to vanish when any
//! of its arguments is zero, and the per-order variable sets to be disjoint;
//! under these conditions the representation is unique.
//!
//! Components are products of univariate factors
//! `g(x) = w x + s sin(pi omega x) + c ((x^2 + delta^2)^(1/2) - delta)^alpha + b`,
//! which are anchored whenever `b = 0`. The synthetic generator rescales each
//! product so its maximum on a verification grid exceeds the per-order
//! identifiability margin while the Hoelder constant stays within budget.

use crate::index::{IndexError, IndexTuple, SupportSets};
use crate::split_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::convert::Infallible;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("point has dimension {got}, model expects {want}")]
    DimMismatch { got: usize, want: usize },
    #[error("coordinate {index} = {value} outside [-1, 1]")]
    OutOfDomain { index: usize, value: f64 },
    #[error("anchored ANOVA subset has {0} variables, limit is 20")]
    SubsetTooLarge(usize),
    #[error("tuple {0} is not in the recovered support closure")]
    OutsideClosure(IndexTuple),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("sparsities need {need} variables, only {have} available")]
    InfeasibleSparsity { need: usize, have: usize },
    #[error("sparsity list has {got} orders, expected r0 = {want}")]
    SparsityLength { got: usize, want: usize },
    #[error("margin D_{order} = {margin} unreachable for tuple {tuple} (achievable {achievable:.4})")]
    MarginUnreachable {
        order: usize,
        margin: f64,
        tuple: IndexTuple,
        achievable: f64,
    },
    #[error("{0}")]
    BadParameter(String),
}

/// One univariate factor of a component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    #[serde(default)]
    pub linear: f64,
    #[serde(default)]
    pub sin: f64,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub bump: f64,
    #[serde(default)]
    pub delta: f64,
    /// Non-zero bias breaks anchoring; only test fixtures set it.
    #[serde(default)]
    pub bias: f64,
}

impl Factor {
    pub fn linear() -> Self {
        Factor {
            linear: 1.0,
            ..Factor::zero()
        }
    }

    pub fn sine(amplitude: f64, omega: f64) -> Self {
        Factor {
            sin: amplitude,
            omega,
            ..Factor::zero()
        }
    }

    fn zero() -> Self {
        Factor {
            linear: 0.0,
            sin: 0.0,
            omega: 0.0,
            bump: 0.0,
            delta: 0.0,
            bias: 0.0,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, alpha: f64) -> f64 {
        let mut v = self.bias + self.linear * x;
        if self.sin != 0.0 {
            v += self.sin * (std::f64::consts::PI * self.omega * x).sin();
        }
        if self.bump != 0.0 {
            let r = (x * x + self.delta * self.delta).sqrt() - self.delta;
            v += if alpha == 1.0 {
                self.bump * r
            } else {
                self.bump * r.powf(alpha)
            };
        }
        v
    }

    /// |g'(x)|, used for the analytic Lipschitz bound of products.
    fn slope(&self, x: f64, alpha: f64) -> f64 {
        let mut v = self.linear;
        if self.sin != 0.0 {
            let w = std::f64::consts::PI * self.omega;
            v += self.sin * w * (w * x).cos();
        }
        if self.bump != 0.0 {
            let root = (x * x + self.delta * self.delta).sqrt();
            let r = root - self.delta;
            let base = if alpha == 1.0 { 1.0 } else { alpha * r.powf(alpha - 1.0) };
            if base.is_finite() {
                v += self.bump * base * x / root;
            }
        }
        v.abs()
    }
}

/// One additive component `phi_j = amplitude * prod_l g_l(x_{j_l})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub tuple: IndexTuple,
    pub amplitude: f64,
    pub factors: Vec<Factor>,
}

impl Component {
    /// Evaluates on the restriction `x_j` (length = order).
    pub fn eval_restricted(&self, xj: &[f64], alpha: f64) -> f64 {
        let mut prod = self.amplitude;
        for (factor, &v) in self.factors.iter().zip(xj) {
            if v == 0.0 && factor.bias == 0.0 {
                return 0.0; // anchored factors vanish exactly at zero
            }
            prod *= factor.eval(v, alpha);
        }
        prod
    }

    /// Evaluates on a full point.
    #[inline]
    pub fn eval(&self, x: &[f64], alpha: f64) -> f64 {
        let mut prod = self.amplitude;
        for (factor, &var) in self.factors.iter().zip(self.tuple.vars()) {
            let v = x[var];
            if v == 0.0 && factor.bias == 0.0 {
                return 0.0;
            }
            prod *= factor.eval(v, alpha);
        }
        prod
    }
}

/// A sparse additive model in anchored canonical form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpamModel {
    pub d: usize,
    pub r0: usize,
    pub mu: f64,
    /// Hoelder constant bound shared by all components.
    pub holder_l: f64,
    /// Hoelder exponent in (0, 1].
    pub alpha: f64,
    /// Identifiability margins `D_1..D_r0`.
    pub margins: Vec<f64>,
    /// The genuine interaction supports `S_1..S_r0`.
    pub supports: SupportSets,
    /// Components keyed by tuple; includes the support tuples and possibly
    /// tuples induced by higher-order supports. Sorted by tuple.
    pub components: Vec<Component>,
}

impl SpamModel {
    /// Builds a model and validates structure (dimensions, sorted component
    /// list, disjoint supports).
    pub fn new(
        d: usize,
        mu: f64,
        holder_l: f64,
        alpha: f64,
        margins: Vec<f64>,
        supports: SupportSets,
        mut components: Vec<Component>,
    ) -> Result<Self, ModelError> {
        if !(0.0 < alpha && alpha <= 1.0) {
            return Err(ModelError::BadParameter(format!(
                "alpha must lie in (0,1], got {alpha}"
            )));
        }
        supports.check_disjoint()?;
        for t in supports.all() {
            t.check_dim(d)?;
        }
        for c in &components {
            c.tuple.check_dim(d)?;
            if c.factors.len() != c.tuple.order() {
                return Err(ModelError::BadParameter(format!(
                    "component {} has {} factors",
                    c.tuple,
                    c.factors.len()
                )));
            }
        }
        components.sort_by(|a, b| a.tuple.cmp(&b.tuple));
        let r0 = supports.max_order();
        Ok(SpamModel {
            d,
            r0,
            mu,
            holder_l,
            alpha,
            margins,
            supports,
            components,
        })
    }

    /// Builds without any validation; for deliberately ill-formed fixtures.
    pub fn new_unchecked(
        d: usize,
        mu: f64,
        holder_l: f64,
        alpha: f64,
        margins: Vec<f64>,
        supports: SupportSets,
        components: Vec<Component>,
    ) -> Self {
        let r0 = supports.max_order();
        SpamModel {
            d,
            r0,
            mu,
            holder_l,
            alpha,
            margins,
            supports,
            components,
        }
    }

    pub fn component(&self, tuple: &IndexTuple) -> Option<&Component> {
        self.components
            .binary_search_by(|c| c.tuple.cmp(tuple))
            .ok()
            .map(|i| &self.components[i])
    }

    /// Checks the point and evaluates `mu + sum_j phi_j(x_j)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.d {
            return Err(ModelError::DimMismatch {
                got: x.len(),
                want: self.d,
            });
        }
        for (i, &v) in x.iter().enumerate() {
            if !(-1.0..=1.0).contains(&v) {
                return Err(ModelError::OutOfDomain { index: i, value: v });
            }
        }
        Ok(self.evaluate_unchecked(x))
    }

    /// Evaluation without domain checks; the query hot path.
    #[inline]
    pub fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        let mut acc = self.mu;
        for c in &self.components {
            acc += c.eval(x, self.alpha);
        }
        acc
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Anchored-ANOVA component `f_U(x_U)` of a black-box function, computed from
/// `2^|U|` queries as `sum_{V subseteq U} (-1)^(|U|-|V|) f(Pi_V(x))`.
/// Subsets are enumerated in bitmask order.
pub fn anchored_anova_with<E>(
    mut oracle: impl FnMut(&[f64]) -> Result<f64, E>,
    u: &[usize],
    x: &[f64],
) -> Result<f64, AnovaError<E>> {
    if u.len() > 20 {
        return Err(AnovaError::SubsetTooLarge(u.len()));
    }
    debug_assert!(u.windows(2).all(|w| w[0] < w[1]), "U must be sorted");
    let mut proj = vec![0.0; x.len()];
    let mut acc = 0.0;
    for mask in 0u32..(1u32 << u.len()) {
        proj.fill(0.0);
        for (b, &var) in u.iter().enumerate() {
            if mask >> b & 1 == 1 {
                proj[var] = x[var];
            }
        }
        let sign = if (u.len() as u32 - mask.count_ones()) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        acc += sign * oracle(&proj).map_err(AnovaError::Oracle)?;
    }
    Ok(acc)
}

/// Infallible-oracle convenience wrapper around [`anchored_anova_with`].
pub fn anchored_anova(
    mut oracle: impl FnMut(&[f64]) -> f64,
    u: &[usize],
    x: &[f64],
) -> Result<f64, AnovaError<Infallible>> {
    anchored_anova_with(|p| Ok::<_, Infallible>(oracle(p)), u, x)
}

#[derive(Debug, Error)]
pub enum AnovaError<E> {
    #[error("anchored ANOVA subset has {0} variables, limit is 20")]
    SubsetTooLarge(usize),
    #[error("oracle failure: {0}")]
    Oracle(#[source] E),
}

/// Samples the component `phi_j` of a black-box in canonical form at the
/// given points of `[-1,1]^|j|`, using `2^|j|` queries per point via
/// `sum_{i subseteq j} (-1)^(|j|-|i|) f(Pi_i(x))`. The tuple must lie in the
/// subset closure of the recovered supports.
pub fn extract_component_with<E>(
    mut oracle: impl FnMut(&[f64]) -> Result<f64, E>,
    d: usize,
    tuple: &IndexTuple,
    eval_points: &[Vec<f64>],
    recovered: &SupportSets,
) -> Result<Vec<f64>, ExtractError<E>> {
    if !recovered.closure().contains(tuple) {
        return Err(ExtractError::OutsideClosure(tuple.clone()));
    }
    let mut out = Vec::with_capacity(eval_points.len());
    let mut x = vec![0.0; d];
    for point in eval_points {
        x.fill(0.0);
        for (l, &var) in tuple.vars().iter().enumerate() {
            x[var] = point[l];
        }
        let value = anchored_anova_with(&mut oracle, tuple.vars(), &x)
            .map_err(|e| match e {
                AnovaError::SubsetTooLarge(n) => ExtractError::OrderTooLarge(n),
                AnovaError::Oracle(e) => ExtractError::Oracle(e),
            })?;
        out.push(value);
    }
    Ok(out)
}

pub fn extract_component(
    mut oracle: impl FnMut(&[f64]) -> f64,
    d: usize,
    tuple: &IndexTuple,
    eval_points: &[Vec<f64>],
    recovered: &SupportSets,
) -> Result<Vec<f64>, ExtractError<Infallible>> {
    extract_component_with(
        |p| Ok::<_, Infallible>(oracle(p)),
        d,
        tuple,
        eval_points,
        recovered,
    )
}

#[derive(Debug, Error)]
pub enum ExtractError<E> {
    #[error("tuple {0} is not in the recovered support closure")]
    OutsideClosure(IndexTuple),
    #[error("tuple order {0} exceeds the 20-variable query limit")]
    OrderTooLarge(usize),
    #[error("oracle failure: {0}")]
    Oracle(#[source] E),
}

/// One violated canonical-form condition, with a witness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CanonicalViolation {
    /// `mu != f(0)`.
    MeanMismatch { f_at_zero: f64, mu: f64 },
    /// A component fails to vanish with one argument zeroed.
    Anchoring {
        tuple: IndexTuple,
        witness: Vec<f64>,
        value: f64,
    },
    /// Two orders share a variable.
    Disjointness { var: usize, orders: (usize, usize) },
    /// A component tuple lies outside the support closure.
    StrayComponent { tuple: IndexTuple },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CanonicalReport {
    pub violations: Vec<CanonicalViolation>,
}

impl CanonicalReport {
    pub fn is_canonical(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verifies the canonical-form conditions on a finite grid: the anchored
/// mean, anchoring of every component (each argument zeroed in turn, the
/// remaining arguments swept over `grid_points_per_axis` values), and
/// disjointness of the per-order variable sets.
pub fn canonical_form_check(model: &SpamModel, grid_points_per_axis: usize) -> CanonicalReport {
    let mut violations = Vec::new();
    let g = grid_points_per_axis.max(2);

    let zero = vec![0.0; model.d];
    let f0 = model.evaluate_unchecked(&zero);
    if (f0 - model.mu).abs() > 1e-10 * (1.0 + model.mu.abs()) {
        violations.push(CanonicalViolation::MeanMismatch {
            f_at_zero: f0,
            mu: model.mu,
        });
    }

    'comp: for c in &model.components {
        let r = c.tuple.order();
        for zero_slot in 0..r {
            // sweep the other r-1 arguments over the grid
            let sweep = r - 1;
            let total = g.pow(sweep as u32);
            let mut xj = vec![0.0; r];
            for idx in 0..total {
                let mut rem = idx;
                let mut k = 0;
                for slot in 0..r {
                    if slot == zero_slot {
                        xj[slot] = 0.0;
                    } else {
                        let step = rem % g;
                        rem /= g;
                        xj[slot] = -1.0 + 2.0 * step as f64 / (g - 1) as f64;
                        k += 1;
                    }
                }
                debug_assert_eq!(k, sweep);
                let v = c.eval_restricted(&xj, model.alpha);
                if v.abs() > 1e-10 * (1.0 + c.amplitude.abs()) {
                    violations.push(CanonicalViolation::Anchoring {
                        tuple: c.tuple.clone(),
                        witness: xj.clone(),
                        value: v,
                    });
                    continue 'comp;
                }
            }
        }
    }

    if let Err(IndexError::DisjointnessViolation { var, a, b }) = model.supports.check_disjoint() {
        violations.push(CanonicalViolation::Disjointness { var, orders: (a, b) });
    }

    let closure = model.supports.closure();
    for c in &model.components {
        if !closure.contains(&c.tuple) {
            violations.push(CanonicalViolation::StrayComponent {
                tuple: c.tuple.clone(),
            });
        }
    }

    CanonicalReport { violations }
}

/// Empirical Hoelder estimate of a component over `pairs` random pairs:
/// `max |phi(x)-phi(y)| / ||x-y||_2^alpha`.
pub fn empirical_holder(component: &Component, alpha: f64, pairs: usize, seed: u64) -> f64 {
    let r = component.tuple.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut x = vec![0.0; r];
    let mut y = vec![0.0; r];
    for _ in 0..pairs {
        for v in x.iter_mut().chain(y.iter_mut()) {
            *v = rng.gen_range(-1.0..=1.0);
        }
        let dist: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist < 1e-9 {
            continue;
        }
        let diff = (component.eval_restricted(&x, alpha) - component.eval_restricted(&y, alpha))
            .abs();
        worst = worst.max(diff / dist.powf(alpha));
    }
    worst
}

/// Maximum of `|phi|` over the margin-verification grid (41 points per axis
/// up to trivariate components, coarser above).
pub fn grid_max(component: &Component, alpha: f64) -> f64 {
    let r = component.tuple.order();
    let g = grid_points_for_order(r);
    let total = g.pow(r as u32);
    let mut xj = vec![0.0; r];
    let mut best: f64 = 0.0;
    for idx in 0..total {
        let mut rem = idx;
        for slot in 0..r {
            let step = rem % g;
            rem /= g;
            xj[slot] = -1.0 + 2.0 * step as f64 / (g - 1) as f64;
        }
        best = best.max(component.eval_restricted(&xj, alpha).abs());
    }
    best
}

fn grid_points_for_order(r: usize) -> usize {
    match r {
        0..=3 => 41,
        4 => 11,
        _ => 5,
    }
}

/// Factor randomization ranges used by [`synth_spam`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorProfile {
    pub omega_range: (f64, f64),
    pub sin_weight: (f64, f64),
    pub bump_weight: (f64, f64),
    pub bump_delta: f64,
    /// Probability of adding one induced lower-order component per
    /// multivariate support tuple.
    pub induced_prob: f64,
}

impl Default for FactorProfile {
    fn default() -> Self {
        FactorProfile {
            omega_range: (0.25, 0.5),
            sin_weight: (0.15, 0.6),
            bump_weight: (0.5, 1.0),
            bump_delta: 0.05,
            induced_prob: 0.25,
        }
    }
}

/// Inputs of the synthetic model generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub d: usize,
    pub r0: usize,
    /// `sparsities[i-1] = |S_i|`.
    pub sparsities: Vec<usize>,
    pub holder_l: f64,
    pub alpha: f64,
    /// Margins `D_1..D_r0`.
    pub margins: Vec<f64>,
    pub mu: f64,
    pub seed: u64,
    #[serde(default)]
    pub profile: FactorProfile,
}

/// Draws a canonical SPAM: supports uniformly at random subject to
/// disjointness, components from the anchored factor family with amplitudes
/// rescaled so the grid maximum strictly exceeds the margin while the
/// analytic Hoelder bound stays within `holder_l`. Deterministic given the
/// seed.
pub fn synth_spam(spec: &SynthSpec) -> Result<SpamModel, ModelError> {
    if spec.sparsities.len() != spec.r0 {
        return Err(ModelError::SparsityLength {
            got: spec.sparsities.len(),
            want: spec.r0,
        });
    }
    if spec.margins.len() != spec.r0 {
        return Err(ModelError::BadParameter(format!(
            "margins list has {} entries, expected {}",
            spec.margins.len(),
            spec.r0
        )));
    }
    if !(0.0 < spec.alpha && spec.alpha <= 1.0) {
        return Err(ModelError::BadParameter(format!(
            "alpha must lie in (0,1], got {}",
            spec.alpha
        )));
    }
    let need: usize = spec
        .sparsities
        .iter()
        .enumerate()
        .map(|(i, k)| (i + 1) * k)
        .sum();
    if need > spec.d {
        return Err(ModelError::InfeasibleSparsity {
            need,
            have: spec.d,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(spec.seed, 0xA));

    // draw disjoint supports from a shuffled variable pool, top order first
    let mut pool: Vec<usize> = (0..spec.d).collect();
    for i in (1..pool.len()).rev() {
        let j = rng.gen_range(0..=i);
        pool.swap(i, j);
    }
    let mut cursor = 0;
    let mut tuples: Vec<IndexTuple> = Vec::new();
    for order in (1..=spec.r0).rev() {
        for _ in 0..spec.sparsities[order - 1] {
            let mut vars: Vec<usize> = pool[cursor..cursor + order].to_vec();
            cursor += order;
            vars.sort_unstable();
            tuples.push(IndexTuple::new(vars)?);
        }
    }
    let supports = SupportSets::new(tuples.clone())?;

    let mut components = Vec::new();
    for tuple in &tuples {
        let order = tuple.order();
        let margin = spec.margins[order - 1];
        let comp = draw_component(tuple.clone(), margin, spec, &mut rng)?;
        // induced lower-order component on a proper subtuple, margin-free
        if order >= 2 && rng.gen_range(0.0..1.0) < spec.profile.induced_prob {
            let subs: Vec<IndexTuple> = tuple
                .subtuples()
                .into_iter()
                .filter(|s| s.order() < order)
                .collect();
            let sub = subs[rng.gen_range(0..subs.len())].clone();
            if !components
                .iter()
                .any(|c: &Component| c.tuple == sub)
                && !supports.contains(&sub)
            {
                let induced = draw_component(sub, 0.0, spec, &mut rng)?;
                components.push(induced);
            }
        }
        components.push(comp);
    }

    SpamModel::new(
        spec.d,
        spec.mu,
        spec.holder_l,
        spec.alpha,
        spec.margins.clone(),
        supports,
        components,
    )
}

fn draw_component(
    tuple: IndexTuple,
    margin: f64,
    spec: &SynthSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Component, ModelError> {
    let order = tuple.order();
    let p = &spec.profile;
    let mut last_achievable = 0.0;
    for _attempt in 0..64 {
        let factors: Vec<Factor> = (0..order)
            .map(|_| {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                Factor {
                    linear: 0.0,
                    sin: sign * rng.gen_range(p.sin_weight.0..=p.sin_weight.1),
                    omega: rng.gen_range(p.omega_range.0..=p.omega_range.1),
                    bump: sign * rng.gen_range(p.bump_weight.0..=p.bump_weight.1),
                    delta: p.bump_delta,
                    bias: 0.0,
                }
            })
            .collect();

        // per-factor sup and slope on a fine 1d grid
        let mut sups = vec![0.0f64; order];
        let mut slopes = vec![0.0f64; order];
        for (l, factor) in factors.iter().enumerate() {
            for k in 0..=4000 {
                let x = -1.0 + 2.0 * k as f64 / 4000.0;
                sups[l] = sups[l].max(factor.eval(x, spec.alpha).abs());
                slopes[l] = slopes[l].max(factor.slope(x, spec.alpha));
            }
        }
        // Lipschitz bound of the unit product, converted to a Hoelder-alpha
        // bound through the domain diameter.
        let lip: f64 = (0..order)
            .map(|l| {
                let others: f64 = (0..order).filter(|&k| k != l).map(|k| sups[k]).product();
                (slopes[l] * others).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        let diam = 2.0 * (order as f64).sqrt();
        let holder_bound = lip * diam.powf(1.0 - spec.alpha);
        if holder_bound <= 0.0 {
            continue;
        }
        let amplitude_cap = 0.98 * spec.holder_l / holder_bound;
        let unit = Component {
            tuple: tuple.clone(),
            amplitude: 1.0,
            factors: factors.clone(),
        };
        let peak = grid_max(&unit, spec.alpha);
        let achievable = amplitude_cap * peak;
        last_achievable = f64::max(last_achievable, achievable);
        if achievable > margin * 1.02 {
            let amplitude = if margin > 0.0 {
                // uniform between the smallest margin-attaining amplitude and
                // the Hoelder cap
                let lo = margin * 1.02 / peak;
                lo * rng.gen_range(1.0..=(amplitude_cap / lo).max(1.0))
            } else {
                amplitude_cap * rng.gen_range(0.3..=0.8)
            };
            return Ok(Component {
                tuple,
                amplitude,
                factors,
            });
        }
    }
    Err(ModelError::MarginUnreachable {
        order,
        margin,
        tuple,
        achievable: last_achievable,
    })
}

/// Verifies that every support component attains its margin on the grid.
pub fn check_margins(model: &SpamModel) -> Result<(), ModelError> {
    for tuple in model.supports.all() {
        let order = tuple.order();
        let margin = model.margins.get(order - 1).copied().unwrap_or(0.0);
        let comp = model
            .component(tuple)
            .ok_or_else(|| ModelError::BadParameter(format!("support {tuple} has no component")))?;
        let peak = grid_max(comp, model.alpha);
        if peak <= margin {
            return Err(ModelError::MarginUnreachable {
                order,
                margin,
                tuple: tuple.clone(),
                achievable: peak,
            });
        }
    }
    Ok(())
}

/// Verifies the empirical Hoelder bound (10^4 random pairs per component).
pub fn check_holder(model: &SpamModel, seed: u64) -> Result<(), ModelError> {
    for (i, c) in model.components.iter().enumerate() {
        let h = empirical_holder(c, model.alpha, 10_000, split_seed(seed, i as u64));
        if h > model.holder_l * (1.0 + 1e-9) {
            return Err(ModelError::BadParameter(format!(
                "component {} has empirical Hoelder constant {h:.4} > L = {}",
                c.tuple, model.holder_l
            )));
        }
    }
    Ok(())
}
