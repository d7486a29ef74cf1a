//! Perfect hash families over the active variables and per-hash grids.
//!
//! A `(P, t)`-hash family is a list of maps `h: P -> {0,..,t-1}` such that
//! every `t`-subset of `P` is hashed injectively by at least one member. The
//! probabilistic construction draws each member uniformly and reaches the
//! perfect property with probability at least `1 - d^{-C1 t}` at size
//! `ceil((C1+1) t e^t ln d)`.
//!
//! Each hash `h` induces buckets `A_1,..,A_t` and a uniform grid of base
//! points `x = sum_b c_b e_b(h)` with coefficients `c_b = k/m`,
//! `k = -m..m`. For any target in `[-1,1]^t` and any tuple on which `h` is
//! injective, some grid point is within `1/m` per coordinate of the target.

use crate::index::{binomial, for_each_combination, IndexTuple};
use crate::split_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HashError {
    #[error("domain has {domain} variables, smaller than range size t={t}")]
    DomainTooSmall { domain: usize, t: usize },
    #[error("construction parameter C1 must exceed 1, got {0}")]
    BadC1(f64),
    #[error("no perfect family found after {attempts} attempts (last counterexample {witness})")]
    ConstructionFailed { attempts: usize, witness: IndexTuple },
}

/// One hash function `h: domain -> {0,..,t-1}`, stored per domain slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashFn {
    /// Sorted variable ids making up the domain `P`.
    pub domain: Vec<usize>,
    /// Bucket of `domain[slot]`, in `0..t`.
    pub buckets: Vec<u8>,
    pub t: usize,
}

impl HashFn {
    /// Bucket of a variable; the variable must belong to the domain.
    pub fn bucket_of(&self, var: usize) -> Option<u8> {
        self.domain
            .binary_search(&var)
            .ok()
            .map(|slot| self.buckets[slot])
    }

    /// True when the tuple's variables land in pairwise distinct buckets.
    pub fn injective_on(&self, tuple: &IndexTuple) -> bool {
        let mut seen = 0u32;
        for &v in tuple.vars() {
            let Some(b) = self.bucket_of(v) else {
                return false;
            };
            let bit = 1u32 << b;
            if seen & bit != 0 {
                return false;
            }
            seen |= bit;
        }
        true
    }

    /// Injectivity check on domain slots (positions in `domain`), used by the
    /// exhaustive verifier to avoid repeated binary searches.
    fn injective_on_slots(&self, slots: &[usize]) -> bool {
        let mut seen = 0u32;
        for &s in slots {
            let bit = 1u32 << self.buckets[s];
            if seen & bit != 0 {
                return false;
            }
            seen |= bit;
        }
        true
    }
}

/// Result of a perfect-hash verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VerifyOutcome {
    /// Every `t`-subset checked is separated by some member.
    Ok {
        exhaustive: bool,
        subsets_checked: u64,
    },
    /// First subset separated by no member.
    Counterexample(IndexTuple),
}

impl VerifyOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, VerifyOutcome::Ok { .. })
    }
}

/// A `(P, t)`-hash family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HashFamily {
    pub domain: Vec<usize>,
    pub t: usize,
    pub c1: f64,
    pub functions: Vec<HashFn>,
    /// Number of rebuild attempts the construction needed.
    pub attempts: usize,
}

/// Family size of the probabilistic construction: `ceil((C1+1) t e^t ln d)`.
/// Natural logarithm; for `t = 1` the single constant map suffices.
pub fn family_size(d: usize, t: usize, c1: f64) -> usize {
    if t == 1 {
        return 1;
    }
    let d = d as f64;
    let t_f = t as f64;
    ((c1 + 1.0) * t_f * t_f.exp() * d.ln()).ceil() as usize
}

/// Builds a `(domain, t)`-hash family by the probabilistic construction,
/// verifying the perfect property and redrawing (up to 5 attempts) on
/// failure. Deterministic given `seed`.
pub fn build_hash_family(
    domain: &[usize],
    t: usize,
    c1: f64,
    seed: u64,
) -> Result<HashFamily, HashError> {
    assert!(t >= 1, "order t must be at least 1");
    if domain.len() < t {
        return Err(HashError::DomainTooSmall {
            domain: domain.len(),
            t,
        });
    }
    if t > 1 && c1 <= 1.0 {
        return Err(HashError::BadC1(c1));
    }
    let mut domain = domain.to_vec();
    domain.sort_unstable();
    domain.dedup();

    if t == 1 {
        let functions = vec![HashFn {
            domain: domain.clone(),
            buckets: vec![0; domain.len()],
            t: 1,
        }];
        return Ok(HashFamily {
            domain,
            t,
            c1,
            functions,
            attempts: 1,
        });
    }

    let size = family_size(domain.len(), t, c1);
    let mut last_witness = None;
    for attempt in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, attempt as u64));
        let functions: Vec<HashFn> = (0..size)
            .map(|_| HashFn {
                domain: domain.clone(),
                buckets: (0..domain.len()).map(|_| rng.gen_range(0..t) as u8).collect(),
                t,
            })
            .collect();
        let family = HashFamily {
            domain: domain.clone(),
            t,
            c1,
            functions,
            attempts: attempt + 1,
        };
        match verify_perfect(&family, None) {
            VerifyOutcome::Ok { .. } => return Ok(family),
            VerifyOutcome::Counterexample(w) => last_witness = Some(w),
        }
    }
    Err(HashError::ConstructionFailed {
        attempts: 5,
        witness: last_witness.expect("failed attempts produce a witness"),
    })
}

/// Exhaustive budget for [`verify_perfect`]: above this many `t`-subsets the
/// verifier switches to sampling.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;

/// Verifies the perfect-hash property. Exhausts all `C(|P|, t)` subsets when
/// that count is within [`EXHAUSTIVE_LIMIT`], otherwise samples
/// `sample_count` random subsets (default `10^5`). Returns the first
/// uncovered subset found.
pub fn verify_perfect(family: &HashFamily, sample_count: Option<u64>) -> VerifyOutcome {
    let n = family.domain.len();
    let t = family.t;
    let total = binomial(n, t);
    if total <= EXHAUSTIVE_LIMIT {
        let slots: Vec<usize> = (0..n).collect();
        let mut witness = None;
        let mut checked = 0u64;
        for_each_combination(&slots, t, |subset| {
            if witness.is_some() {
                return;
            }
            checked += 1;
            if !family.functions.iter().any(|h| h.injective_on_slots(subset)) {
                let vars = subset.iter().map(|&s| family.domain[s]).collect();
                witness = Some(IndexTuple::new(vars).expect("slots are increasing"));
            }
        });
        match witness {
            Some(w) => VerifyOutcome::Counterexample(w),
            None => VerifyOutcome::Ok {
                exhaustive: true,
                subsets_checked: checked,
            },
        }
    } else {
        let samples = sample_count.unwrap_or(100_000);
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15);
        for _ in 0..samples {
            let mut subset: Vec<usize> = Vec::with_capacity(t);
            while subset.len() < t {
                let s = rng.gen_range(0..n);
                if !subset.contains(&s) {
                    subset.push(s);
                }
            }
            subset.sort_unstable();
            if !family.functions.iter().any(|h| h.injective_on_slots(&subset)) {
                let vars = subset.iter().map(|&s| family.domain[s]).collect();
                return VerifyOutcome::Counterexample(IndexTuple::new(vars).unwrap());
            }
        }
        VerifyOutcome::Ok {
            exhaustive: false,
            subsets_checked: samples,
        }
    }
}

/// Greedily drops members whose removal keeps the family perfect, returning a
/// (typically much smaller) verified family. Requires the exhaustive regime.
///
/// The covering semantics are unchanged — every `t`-subset stays separated by
/// some member — so downstream consumers quantified over "a verified hash
/// family" are unaffected; only the query count shrinks.
pub fn prune_family(family: &HashFamily) -> HashFamily {
    let n = family.domain.len();
    let t = family.t;
    if t == 1 || binomial(n, t) > EXHAUSTIVE_LIMIT {
        return family.clone();
    }
    let slots: Vec<usize> = (0..n).collect();
    // cover[s] = indices of members injective on subset #s
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for_each_combination(&slots, t, |subset| {
        subsets.push(subset.to_vec());
    });
    let mut cover_count: Vec<usize> = vec![0; subsets.len()];
    let mut covers: Vec<Vec<u32>> = vec![Vec::new(); family.functions.len()];
    for (hi, h) in family.functions.iter().enumerate() {
        for (si, subset) in subsets.iter().enumerate() {
            if h.injective_on_slots(subset) {
                cover_count[si] += 1;
                covers[hi].push(si as u32);
            }
        }
    }
    let mut keep = vec![true; family.functions.len()];
    for hi in (0..family.functions.len()).rev() {
        if covers[hi].iter().all(|&si| cover_count[si as usize] > 1) {
            keep[hi] = false;
            for &si in &covers[hi] {
                cover_count[si as usize] -= 1;
            }
        }
    }
    let functions: Vec<HashFn> = family
        .functions
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(h, _)| h.clone())
        .collect();
    HashFamily {
        domain: family.domain.clone(),
        t,
        c1: family.c1,
        functions,
        attempts: family.attempts,
    }
}

/// The grid `chi(h)` of base points for one hash function: all
/// `(2m+1)^t` choices of per-bucket coefficients `c_b = k/m`, `k = -m..m`.
/// Coefficients are kept as integer numerators over the common denominator
/// `m` so point placement is bit-reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub hash: HashFn,
    pub m: usize,
    pub t: usize,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        (2 * self.m + 1).pow(self.t as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-bucket numerators of grid point `g`, each in `-m..=m`
    /// (coefficient value `k/m`). Bucket 0 is the least significant digit.
    pub fn numerators(&self, g: usize) -> Vec<i64> {
        let base = 2 * self.m + 1;
        let mut rem = g;
        (0..self.t)
            .map(|_| {
                let k = rem % base;
                rem /= base;
                k as i64 - self.m as i64
            })
            .collect()
    }

    /// Bucket coefficient values of grid point `g`.
    pub fn coefficients(&self, g: usize) -> Vec<f64> {
        self.numerators(g)
            .into_iter()
            .map(|k| k as f64 / self.m as f64)
            .collect()
    }

    /// Writes grid point `g` into `x` (dense over the ambient dimension):
    /// every domain variable receives its bucket's coefficient, coordinates
    /// outside the domain are zeroed.
    pub fn write_point(&self, g: usize, x: &mut [f64]) {
        let coeff = self.coefficients(g);
        x.fill(0.0);
        for (slot, &var) in self.hash.domain.iter().enumerate() {
            x[var] = coeff[self.hash.buckets[slot] as usize];
        }
    }

    /// Materializes grid point `g` in ambient dimension `d`.
    pub fn point(&self, g: usize, d: usize) -> Vec<f64> {
        let mut x = vec![0.0; d];
        self.write_point(g, &mut x);
        x
    }
}

/// Builds the grid for `h` with half-resolution `m` and order `t`. For
/// `t = 1` this is the diagonal grid over the domain.
pub fn make_grid(h: &HashFn, m: usize, t: usize) -> GridSpec {
    assert!(m >= 1, "grid half-resolution m must be at least 1");
    assert_eq!(h.t, t, "hash range does not match grid order");
    GridSpec {
        hash: h.clone(),
        m,
        t,
    }
}
