//! Estimate a fixed model's average loss on an unlabeled target dataset by
//! importance-weighting a labeled source dataset.
//!
//! The weights come from a density-ratio model over user-provided *slicing
//! functions*: cheap binary annotators (with abstention) that capture the
//! axes along which the two datasets differ. Because slicing functions are
//! noisy, the ratio is estimated for the *latent* slice labels: a log-linear
//! model with per-slice noise couplings and a matching of pairwise
//! dependencies, combined with per-slice correction tables that say how
//! often each slicing function is right. The KLIEP density-ratio objective
//! is adapted to this latent setting by replacing each source log-ratio with
//! the log of its conditional expectation under the correction model, which
//! keeps the objective concave and exactly recovers ordinary log-linear
//! KLIEP when the corrections are the identity.
//!
//! Module map:
//! * [`slices`] — slice matrices, dependency graphs, validation, edge
//!   inference from pooled correlations.
//! * [`correction`] — per-slice correction tables p(latent | observed).
//! * [`model`] — the joint latent/observed model: enumeration,
//!   closed-form marginalization to a log-linear latent model, and exact
//!   sampling.
//! * [`kliep`] — the noise-aware ratio objective, its gradient, and weight
//!   extraction, over deduplicated slice patterns.
//! * [`opt`] — a small L-BFGS maximizer with backtracking line search.
//! * [`estimator`] — weighted performance estimates, effective sample size,
//!   and the finite-sample error bound.
//! * [`baselines`] — classifier-based, kernel-mean-matching, least-squares,
//!   and raw-frequency weighting baselines on real-valued features.
//! * [`synthetics`] — seeded benchmark generators with ground truth.
//! * [`io`] — CSV/JSON readers and writers for all of the above.

/// Crate version, for embedding in run manifests and reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod baselines;
pub mod correction;
pub mod error;
pub mod estimator;
pub mod io;
pub mod kliep;
pub mod math;
pub mod model;
pub mod opt;
pub mod slices;
pub mod synthetics;
pub mod weights;

pub use correction::{CorrectionBundle, CorrectionMatrix};
pub use error::{Error, Result};
pub use estimator::{relative_error, weighted_estimate, Estimate};
pub use kliep::{RatioProblem, SolveResult, SolverConfig};
pub use model::{marginalize, sample_joint, JointModelParams, MarginalParams, PotentialMap};
pub use slices::{DependencyGraph, LossVector, SliceMatrix, SliceRows};
pub use weights::WeightVector;
