//! Domain-feature reward modeling and offline policy optimization.
//!
//! The crate trains a small feed-forward reward model over bounded domain
//! features from pairwise preferences, analyzes per-feature influence via
//! averaged symmetric finite differences, and optimizes a KL-regularized
//! candidate-selection policy over offline candidate pools. A synthetic
//! latent-reward generator makes every stage verifiable against a known
//! ground truth.

pub mod baselines;
pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod influence;
pub mod io;
pub mod net;
pub mod policy;
pub mod records;
pub mod reward;
pub mod schema;
pub mod scorer;
pub mod synth;

pub use error::{Error, Result};
pub use records::{CandidatePool, CandidateRef, PoolCandidate, PreferencePair, QualityTier};
pub use schema::{validate_feature_vector, FeatureDef, FeatureSchema, FeatureVector, Violation};
