//! Robust estimation when every sample carries its own, known corruption
//! probability.
//!
//! Sample `i` is replaced by an arbitrary outlier with probability `λ_i`.
//! The crate provides
//!
//! * [`profile`]: corruption profiles, the rate functional
//!   `f(λ, k) = min_t k / N(t) + t²` and the lower-bound certificate `δ*`;
//! * [`weights`]: the exact reweighting that minimizes `‖w‖² + c (wᵀλ)²`,
//!   threshold weightings, and an independent projected-gradient oracle;
//! * [`estimators`]: weighted mean, weighted Tukey depth / median, weighted
//!   regression depth / coefficient, and classical baselines;
//! * [`adversary`]: contamination scenarios, including the two-point and
//!   max-density adversaries that make samples uninformative;
//! * [`experiment`]: a seeded Monte-Carlo harness and rate overlays;
//! * [`io`]: CSV / JSON formats shared with the command line tool.

// Comparisons written as `!(a <= b)` are meant to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod io;
pub mod numeric;
pub mod profile;
pub mod seed;
pub mod weights;

pub use adversary::{AdversarySpec, CleanSpec, ProfileSource, Scenario};
pub use error::{Error, Result};
pub use estimators::{Dataset, DepthQuery, EstimateResult, Method, SearchBudget};
pub use experiment::{ExperimentConfig, TrialReport};
pub use profile::{CorruptionProfile, DeltaStarCertificate, RateValue, ThresholdMap};
pub use weights::{solve_optimal_weights, threshold_weights, WeightVector};
