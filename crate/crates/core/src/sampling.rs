//! Signed query batches and the multilinear measurement systems they induce.
//!
//! For a base point `x`, a sign vector `beta` and a hash `h` into `i`
//! buckets, the batch holds the `2^i` points
//!
//! ```text
//! (x_z)_l = x_l   if beta_l = (-1)^digit(z-1, h(l)-1) and l active, else 0
//! ```
//!
//! and the signed sum `sum_z (-1)^digit(z-1) f(x_z)` equals one Rademacher
//! measurement `<beta^(i), z*(x)>` of the order-`i` component vector: the
//! mean and every lower-order component cancel. Repeating over `n`
//! independent sign vectors yields the linear system `y = B z*(x; A) + eta`
//! whose rows are the induced sign products `beta^(i)_j = beta_{j1}...beta_{ji}`.

use crate::hashing::HashFn;
use crate::index::{binomial, for_each_combination, IndexTuple};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("signed sum needs a power-of-two value count, got {0}")]
    NotPowerOfTwo(usize),
    #[error("hash maps into {got} buckets but order is {want}")]
    HashRangeMismatch { got: usize, want: usize },
    #[error("oracle failure at measurement row {row}: {source}")]
    Oracle {
        row: usize,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

/// Bit `b` of the dyadic decomposition of `a`.
#[inline]
pub fn digit(a: u64, b: u32) -> u8 {
    ((a >> b) & 1) as u8
}

/// Digit sum (popcount) of `a`.
#[inline]
pub fn digit_sum(a: u64) -> u32 {
    a.count_ones()
}

/// Sign `(-1)^digit(z)`.
#[inline]
pub fn parity_sign(z: u64) -> f64 {
    if digit_sum(z) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Independent random signs over an active variable set, one per slot of
/// `active` (sorted variable ids).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RademacherVector {
    pub active: Arc<Vec<usize>>,
    /// `+1`/`-1` per active slot.
    pub signs: Vec<i8>,
}

impl RademacherVector {
    pub fn draw(active: Arc<Vec<usize>>, rng: &mut impl Rng) -> Self {
        let signs = (0..active.len())
            .map(|_| if rng.gen_bool(0.5) { 1 } else { -1 })
            .collect();
        RademacherVector { active, signs }
    }

    pub fn draw_n(active: &Arc<Vec<usize>>, n: usize, seed: u64) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Self::draw(active.clone(), &mut rng)).collect()
    }

    /// Induced sign product over tuple slots: `beta_{j1} ... beta_{ji}`.
    #[inline]
    pub fn product_over_slots(&self, slots: &[u32]) -> f64 {
        let mut neg = false;
        for &s in slots {
            neg ^= self.signs[s as usize] < 0;
        }
        if neg {
            -1.0
        } else {
            1.0
        }
    }
}

/// The `2^i` query points generated from `(x, beta, h)`, with their signs.
#[derive(Debug, Clone)]
pub struct QueryBatch {
    pub order: usize,
    pub base: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub signs: Vec<f64>,
}

/// Builds the query batch. `x` is a full-dimension point; coordinates outside
/// `active` are forced to zero. The hash must map the active set into
/// `0..order` buckets.
pub fn build_query_points(
    x: &[f64],
    beta: &RademacherVector,
    h: &HashFn,
    order: usize,
    active: &[usize],
) -> Result<QueryBatch, SamplingError> {
    if h.t != order {
        return Err(SamplingError::HashRangeMismatch {
            got: h.t,
            want: order,
        });
    }
    debug_assert_eq!(&*beta.active, active, "beta must be drawn on the active set");
    let mut points = Vec::with_capacity(1 << order);
    let mut signs = Vec::with_capacity(1 << order);
    let mut scratch = vec![0.0; x.len()];
    for_each_query_point(x, beta, h, order, active, &mut scratch, |z0, point| {
        points.push(point.to_vec());
        signs.push(parity_sign(z0));
        Ok::<(), SamplingError>(())
    })?;
    Ok(QueryBatch {
        order,
        base: x.to_vec(),
        points,
        signs,
    })
}

/// Streams the `2^order` query points into `visit(z-1, point)` without
/// materializing them. `scratch` must be zeroed outside the active set on
/// entry and is reused across calls.
pub fn for_each_query_point<E>(
    x: &[f64],
    beta: &RademacherVector,
    h: &HashFn,
    order: usize,
    active: &[usize],
    scratch: &mut [f64],
    mut visit: impl FnMut(u64, &[f64]) -> Result<(), E>,
) -> Result<(), E> {
    debug_assert_eq!(h.domain, active);
    for z0 in 0..(1u64 << order) {
        for (slot, &var) in active.iter().enumerate() {
            let want_negative = digit(z0, h.buckets[slot] as u32) == 1;
            let is_negative = beta.signs[slot] < 0;
            scratch[var] = if want_negative == is_negative { x[var] } else { 0.0 };
        }
        visit(z0, scratch)?;
    }
    Ok(())
}

/// `sum_z (-1)^digit(z-1) values_z`; the value count must be `2^i`.
pub fn signed_sum(values: &[f64]) -> Result<f64, SamplingError> {
    if !values.len().is_power_of_two() {
        return Err(SamplingError::NotPowerOfTwo(values.len()));
    }
    Ok(values
        .iter()
        .enumerate()
        .map(|(z0, v)| parity_sign(z0 as u64) * v)
        .sum())
}

/// All strictly increasing `order`-tuples over `active` (sorted variable
/// ids), in lexicographic order: the full column index set.
pub fn full_columns(active: &[usize], order: usize) -> Vec<IndexTuple> {
    let mut out = Vec::new();
    for_each_combination(active, order, |vars| {
        out.push(IndexTuple::new(vars.to_vec()).expect("combinations are increasing"));
    });
    out
}

/// The injective column set `A(h)`: tuples on which `h` separates buckets.
pub fn injective_columns(h: &HashFn, order: usize) -> Vec<IndexTuple> {
    full_columns(&h.domain, order)
        .into_iter()
        .filter(|t| h.injective_on(t))
        .collect()
}

/// Lexicographic rank of an increasing tuple among all `order`-tuples over
/// `0..n` (tuple entries are slot positions).
pub fn rank_tuple(slots: &[usize], n: usize) -> u64 {
    let r = slots.len();
    let mut rank = 0u64;
    let mut prev = 0usize;
    for (pos, &s) in slots.iter().enumerate() {
        for v in prev..s {
            rank += binomial(n - v - 1, r - pos - 1);
        }
        prev = s + 1;
    }
    rank
}

/// Inverse of [`rank_tuple`].
pub fn unrank_tuple(mut rank: u64, n: usize, order: usize) -> Vec<usize> {
    let mut slots = Vec::with_capacity(order);
    let mut v = 0usize;
    for pos in 0..order {
        loop {
            let block = binomial(n - v - 1, order - pos - 1);
            if rank < block {
                slots.push(v);
                v += 1;
                break;
            }
            rank -= block;
            v += 1;
        }
    }
    slots
}

/// Column labels resolved to slot positions in the active set, stored
/// flattened with stride `order`.
#[derive(Debug, Clone)]
pub struct ColumnSet {
    pub order: usize,
    pub active: Arc<Vec<usize>>,
    pub tuples: Vec<IndexTuple>,
    pub slots: Vec<u32>,
}

impl ColumnSet {
    pub fn new(active: Arc<Vec<usize>>, tuples: Vec<IndexTuple>, order: usize) -> Self {
        let mut slots = Vec::with_capacity(tuples.len() * order);
        for t in &tuples {
            for &v in t.vars() {
                let s = active.binary_search(&v).expect("column variable outside active set");
                slots.push(s as u32);
            }
        }
        ColumnSet {
            order,
            active,
            tuples,
            slots,
        }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn slots_of(&self, col: usize) -> &[u32] {
        &self.slots[col * self.order..(col + 1) * self.order]
    }
}

/// Which tuples label the measurement columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnMode {
    /// All `C(|active|, i)` tuples, mirroring the paper's full system.
    Full,
    /// Only the tuples hashed injectively, where `z*(x; A)` lives.
    Injective,
}

/// The implicit measurement matrix: row `u`, column `j` holds
/// `prod_{l in j} beta_{u,l}`. Materialized densely only while small.
#[derive(Debug, Clone)]
pub enum MeasureOperator {
    Dense(DMatrix<f64>),
    Implicit {
        betas: Vec<RademacherVector>,
        columns: Arc<ColumnSet>,
    },
}

/// Entry budget under which the sign matrix is materialized.
pub const DENSE_ENTRY_LIMIT: usize = 2_000_000;

impl MeasureOperator {
    pub fn new(betas: Vec<RademacherVector>, columns: Arc<ColumnSet>) -> Self {
        let entries = betas.len() * columns.len();
        if entries <= DENSE_ENTRY_LIMIT {
            MeasureOperator::Dense(build_sign_matrix(&betas, &columns))
        } else {
            MeasureOperator::Implicit { betas, columns }
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            MeasureOperator::Dense(b) => b.nrows(),
            MeasureOperator::Implicit { betas, .. } => betas.len(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            MeasureOperator::Dense(b) => b.ncols(),
            MeasureOperator::Implicit { columns, .. } => columns.len(),
        }
    }

    /// `B z`.
    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            MeasureOperator::Dense(b) => b * z,
            MeasureOperator::Implicit { betas, columns } => {
                let mut out = DVector::zeros(betas.len());
                for (u, beta) in betas.iter().enumerate() {
                    let mut acc = 0.0;
                    for c in 0..columns.len() {
                        if z[c] != 0.0 {
                            acc += beta.product_over_slots(columns.slots_of(c)) * z[c];
                        }
                    }
                    out[u] = acc;
                }
                out
            }
        }
    }

    /// `B^T w`.
    pub fn apply_transpose(&self, w: &DVector<f64>) -> DVector<f64> {
        match self {
            MeasureOperator::Dense(b) => b.transpose() * w,
            MeasureOperator::Implicit { betas, columns } => {
                let mut out = DVector::zeros(columns.len());
                for c in 0..columns.len() {
                    let slots = columns.slots_of(c);
                    let mut acc = 0.0;
                    for (u, beta) in betas.iter().enumerate() {
                        acc += beta.product_over_slots(slots) * w[u];
                    }
                    out[c] = acc;
                }
                out
            }
        }
    }

    pub fn as_dense(&self) -> DMatrix<f64> {
        match self {
            MeasureOperator::Dense(b) => b.clone(),
            MeasureOperator::Implicit { betas, columns } => build_sign_matrix(betas, columns),
        }
    }
}

/// Materializes the `n x |columns|` sign matrix.
pub fn build_sign_matrix(betas: &[RademacherVector], columns: &ColumnSet) -> DMatrix<f64> {
    let n = betas.len();
    let mut b = DMatrix::zeros(n, columns.len());
    for c in 0..columns.len() {
        let slots = columns.slots_of(c);
        for (u, beta) in betas.iter().enumerate() {
            b[(u, c)] = beta.product_over_slots(slots);
        }
    }
    b
}

/// One assembled linear system `y = B z*(x; A) + eta`.
#[derive(Debug, Clone)]
pub struct MeasurementSystem {
    pub order: usize,
    pub y: DVector<f64>,
    pub operator: MeasureOperator,
    pub columns: Arc<ColumnSet>,
    /// Noise radius for the downstream recovery program.
    pub nu: f64,
    /// Scalar oracle evaluations consumed: `n * 2^order * n_resample`.
    pub queries: u64,
}

/// Assembles the measurement system at base point `x`: row `u` is the signed
/// sum of the (resampled-averaged) oracle values over the query batch of
/// `beta_u`. The oracle receives `(point, n_resample)` and returns the
/// averaged value.
#[allow(clippy::too_many_arguments)]
pub fn assemble_system<E: std::error::Error + Send + Sync + 'static>(
    mut oracle: impl FnMut(&[f64], usize) -> Result<f64, E>,
    x: &[f64],
    betas: &[RademacherVector],
    h: &HashFn,
    order: usize,
    active: &Arc<Vec<usize>>,
    n_resample: usize,
    mode: ColumnMode,
    nu: f64,
) -> Result<MeasurementSystem, SamplingError> {
    if h.t != order {
        return Err(SamplingError::HashRangeMismatch {
            got: h.t,
            want: order,
        });
    }
    let tuples = match mode {
        ColumnMode::Full => full_columns(active, order),
        ColumnMode::Injective => injective_columns(h, order),
    };
    let columns = Arc::new(ColumnSet::new(active.clone(), tuples, order));
    let (y, queries) = measure_y(&mut oracle, x, betas, h, order, active, n_resample)?;
    let operator = MeasureOperator::new(betas.to_vec(), columns.clone());
    Ok(MeasurementSystem {
        order,
        y,
        operator,
        columns,
        nu,
        queries,
    })
}

/// The observation side of [`assemble_system`]; reusable across grid points
/// that share betas and columns.
pub fn measure_y<E: std::error::Error + Send + Sync + 'static>(
    oracle: &mut impl FnMut(&[f64], usize) -> Result<f64, E>,
    x: &[f64],
    betas: &[RademacherVector],
    h: &HashFn,
    order: usize,
    active: &[usize],
    n_resample: usize,
) -> Result<(DVector<f64>, u64), SamplingError> {
    let mut y = DVector::zeros(betas.len());
    let mut scratch = vec![0.0; x.len()];
    let mut queries = 0u64;
    for (u, beta) in betas.iter().enumerate() {
        let mut acc = 0.0;
        for_each_query_point(x, beta, h, order, active, &mut scratch, |z0, point| {
            let v = oracle(point, n_resample).map_err(|e| SamplingError::Oracle {
                row: u,
                source: Box::new(e),
            })?;
            queries += n_resample as u64;
            acc += parity_sign(z0) * v;
            Ok(())
        })?;
        y[u] = acc;
    }
    Ok((y, queries))
}
