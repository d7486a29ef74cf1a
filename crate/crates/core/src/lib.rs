//! Recovery of interaction supports in sparse additive models (SPAMs) from
//! black-box point queries.
//!
//! A SPAM over the cube `[-1,1]^d` is a sum of a mean and a small number of
//! low-dimensional anchored components,
//!
//! ```text
//! f(x) = mu + sum_r sum_{j in S_r} phi_j(x_{j1}, ..., x_{jr}),
//! ```
//!
//! where each support set `S_r` holds a few strictly increasing `r`-tuples of
//! coordinates. This crate identifies the unknown `S_1, ..., S_r0` exactly by
//! querying `f` at carefully constructed points:
//!
//! * [`model`] — SPAM construction, anchored-ANOVA decomposition, canonical
//!   form checks, synthetic model generation and component extraction;
//! * [`hashing`] — perfect hash families over the active variables and the
//!   per-hash uniform grids of base points;
//! * [`sampling`] — signed query batches and the implicit multilinear
//!   measurement systems they induce;
//! * [`sparse_recovery`] — the `(P1)`/`(P2)` l1 programs, iterative hard
//!   thresholding and empirical RIP verifiers;
//! * [`oracle`] — the black-box query interface (in-process or external
//!   process/TCP), noise injection and exact query accounting;
//! * [`pipeline`] — the top-down recovery loop with parameter selection.
//!
//! The `reference` module holds brute-force oracles (exhaustive support
//! search, a dense simplex, ISTA on the Lagrangian path) used by the test
//! suites; production code never calls into it.

pub mod hashing;
pub mod index;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod reference;
pub mod sampling;
pub mod sparse_recovery;

pub use index::{IndexTuple, SupportSets};
pub use model::SpamModel;
pub use oracle::OracleSession;
pub use pipeline::{RecoveryConfig, RecoveryResult};

/// Splitmix64 step, used to derive independent RNG streams from a base seed.
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
