//! Index tuples and support sets.
//!
//! Variables are 0-based indices into the ambient dimension `d`. An
//! [`IndexTuple`] is a strictly increasing tuple of variables; the order-`r`
//! support set `S_r` is a set of such tuples. Tuples double as column labels
//! of the multilinear measurement systems, with columns sorted
//! lexicographically.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("tuple {0:?} is not strictly increasing")]
    NotIncreasing(Vec<usize>),
    #[error("tuple {tuple:?} has variable {var} outside dimension {dim}")]
    OutOfRange {
        tuple: Vec<usize>,
        var: usize,
        dim: usize,
    },
    #[error("empty tuple")]
    Empty,
    #[error("variable {var} occurs in supports of orders {a} and {b}")]
    DisjointnessViolation { var: usize, a: usize, b: usize },
}

/// A strictly increasing tuple of coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexTuple(Vec<usize>);

impl IndexTuple {
    pub fn new(vars: Vec<usize>) -> Result<Self, IndexError> {
        if vars.is_empty() {
            return Err(IndexError::Empty);
        }
        if vars.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IndexError::NotIncreasing(vars));
        }
        Ok(IndexTuple(vars))
    }

    /// Checks membership of every variable in `0..dim`.
    pub fn check_dim(&self, dim: usize) -> Result<(), IndexError> {
        match self.0.iter().find(|&&v| v >= dim) {
            Some(&var) => Err(IndexError::OutOfRange {
                tuple: self.0.clone(),
                var,
                dim,
            }),
            None => Ok(()),
        }
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn vars(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, var: usize) -> bool {
        self.0.binary_search(&var).is_ok()
    }

    /// Restriction `x_j` of a full point to this tuple.
    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&v| x[v]).collect()
    }

    /// All non-empty subtuples, ordered by (order, lexicographic).
    pub fn subtuples(&self) -> Vec<IndexTuple> {
        let mut out = Vec::new();
        for mask in 1u32..(1 << self.0.len()) {
            let vars: Vec<usize> = (0..self.0.len())
                .filter(|&b| mask >> b & 1 == 1)
                .map(|b| self.0[b])
                .collect();
            out.push(IndexTuple(vars));
        }
        out.sort_by(|a, b| (a.order(), &a.0).cmp(&(b.order(), &b.0)));
        out
    }
}

impl fmt::Display for IndexTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl From<IndexTuple> for Vec<usize> {
    fn from(t: IndexTuple) -> Self {
        t.0
    }
}

/// Visits every strictly increasing `r`-combination drawn from `items`
/// (assumed sorted), in lexicographic order, without allocating per item.
pub fn for_each_combination<T: Copy>(items: &[T], r: usize, mut visit: impl FnMut(&[T])) {
    if r == 0 || r > items.len() {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    let mut buf: Vec<T> = idx.iter().map(|&i| items[i]).collect();
    loop {
        visit(&buf);
        // advance the rightmost index that still has room
        let mut p = r;
        loop {
            if p == 0 {
                return;
            }
            p -= 1;
            if idx[p] + (r - p) < items.len() {
                break;
            }
        }
        idx[p] += 1;
        for q in p + 1..r {
            idx[q] = idx[q - 1] + 1;
        }
        for q in p..r {
            buf[q] = items[idx[q]];
        }
    }
}

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        let num = (n - i) as u64;
        let den = (i + 1) as u64;
        match acc.checked_mul(num) {
            Some(v) => acc = v / den,
            None => {
                // fall back to floating point; exactness only matters for
                // small inputs, large ones are only compared against limits
                let approx = (acc as f64) * (num as f64) / (den as f64);
                return if approx >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    approx as u64
                };
            }
        }
    }
    acc
}

/// The per-order support sets `S_1, ..., S_r0`, with disjointness of the
/// per-order variable sets enforced on construction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSets {
    by_order: BTreeMap<usize, BTreeSet<IndexTuple>>,
}

impl SupportSets {
    pub fn new(tuples: impl IntoIterator<Item = IndexTuple>) -> Result<Self, IndexError> {
        let sets = Self::new_unchecked(tuples);
        sets.check_disjoint()?;
        Ok(sets)
    }

    /// Builds without the disjointness check; used to construct deliberately
    /// ill-formed models in tests and by the canonical-form checker.
    pub fn new_unchecked(tuples: impl IntoIterator<Item = IndexTuple>) -> Self {
        let mut by_order: BTreeMap<usize, BTreeSet<IndexTuple>> = BTreeMap::new();
        for t in tuples {
            by_order.entry(t.order()).or_default().insert(t);
        }
        SupportSets { by_order }
    }

    pub fn check_disjoint(&self) -> Result<(), IndexError> {
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new(); // var -> order
        for (&order, set) in &self.by_order {
            for var in set.iter().flat_map(|t| t.vars().iter().copied()) {
                if let Some(&other) = seen.get(&var) {
                    if other != order {
                        return Err(IndexError::DisjointnessViolation {
                            var,
                            a: other,
                            b: order,
                        });
                    }
                } else {
                    seen.insert(var, order);
                }
            }
        }
        Ok(())
    }

    pub fn max_order(&self) -> usize {
        self.by_order.keys().next_back().copied().unwrap_or(0)
    }

    pub fn order(&self, r: usize) -> impl Iterator<Item = &IndexTuple> {
        self.by_order.get(&r).into_iter().flatten()
    }

    pub fn orders(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_order.keys().copied()
    }

    pub fn all(&self) -> impl Iterator<Item = &IndexTuple> {
        self.by_order.values().flatten()
    }

    pub fn len_of_order(&self, r: usize) -> usize {
        self.by_order.get(&r).map_or(0, |s| s.len())
    }

    pub fn contains(&self, t: &IndexTuple) -> bool {
        self.by_order
            .get(&t.order())
            .is_some_and(|s| s.contains(t))
    }

    /// The variable set `S_r^{(1)}` of one order.
    pub fn vars_of_order(&self, r: usize) -> BTreeSet<usize> {
        self.order(r)
            .flat_map(|t| t.vars().iter().copied())
            .collect()
    }

    /// The induced tuple sets `S_r^{(i)}`: all `i`-subsets of `S_r^{(1)}`.
    pub fn induced(&self, r: usize, i: usize) -> BTreeSet<IndexTuple> {
        let vars: Vec<usize> = self.vars_of_order(r).into_iter().collect();
        let mut out = BTreeSet::new();
        for_each_combination(&vars, i, |c| {
            out.insert(IndexTuple(c.to_vec()));
        });
        out
    }

    /// Subset closure of all support tuples: every `U` on which the anchored
    /// ANOVA of a canonical model may be non-zero.
    pub fn closure(&self) -> BTreeSet<IndexTuple> {
        let mut out = BTreeSet::new();
        for t in self.all() {
            out.extend(t.subtuples());
        }
        out
    }
}
