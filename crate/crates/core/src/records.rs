//! Preference-dataset and candidate-pool records.

use crate::error::{Error, Result};
use crate::schema::{validate_feature_vector, violations_to_string, FeatureSchema, FeatureVector};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Reference to a candidate summary. The text is optional provenance only;
/// nothing downstream reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRef {
    pub candidate_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl CandidateRef {
    pub fn new(candidate_id: impl Into<String>) -> Self {
        CandidateRef {
            candidate_id: candidate_id.into(),
            text: None,
        }
    }
}

/// One human (or synthetic) preference: winner over loser for a context,
/// with the precomputed feature vectors for both candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub context_id: String,
    pub winner: CandidateRef,
    pub loser: CandidateRef,
    pub winner_features: FeatureVector,
    pub loser_features: FeatureVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_id: Option<String>,
}

impl PreferencePair {
    /// Checks record invariants against the active schema.
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        if self.winner.candidate_id.is_empty() || self.loser.candidate_id.is_empty() {
            return Err(Error::Validation("empty candidate_id".into()));
        }
        if self.winner.candidate_id == self.loser.candidate_id {
            return Err(Error::Validation(format!(
                "winner and loser are the same candidate '{}'",
                self.winner.candidate_id
            )));
        }
        validate_feature_vector(&self.winner_features, schema).map_err(|v| {
            Error::Validation(format!("winner_features: {}", violations_to_string(&v)))
        })?;
        validate_feature_vector(&self.loser_features, schema).map_err(|v| {
            Error::Validation(format!("loser_features: {}", violations_to_string(&v)))
        })?;
        Ok(())
    }
}

/// Generation quality tier of a pool candidate. Ordering is the implicit
/// preference ranking: `Good > SBad > VBad`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QualityTier {
    VBad,
    SBad,
    Good,
}

impl QualityTier {
    pub const ALL_DESCENDING: [QualityTier; 3] =
        [QualityTier::Good, QualityTier::SBad, QualityTier::VBad];

    pub fn as_str(&self) -> &'static str {
        match self {
            QualityTier::Good => "GOOD",
            QualityTier::SBad => "SBAD",
            QualityTier::VBad => "VBAD",
        }
    }
}

impl std::str::FromStr for QualityTier {
    type Err = Error;

    /// Case-insensitive. Unknown labels are hard errors.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GOOD" => Ok(QualityTier::Good),
            "SBAD" => Ok(QualityTier::SBad),
            "VBAD" => Ok(QualityTier::VBad),
            other => Err(Error::Validation(format!("unknown tier label '{other}'"))),
        }
    }
}

impl std::fmt::Display for QualityTier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for QualityTier {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for QualityTier {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One candidate inside a pool: tier label, feature vector, and the
/// unnormalized reference log-score used to derive the reference policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolCandidate {
    pub candidate_id: String,
    pub tier: QualityTier,
    pub features: FeatureVector,
    pub sft_logprob: f64,
}

/// Per-context offline candidate set (the limited-trajectory buffer element).
///
/// `sft_logprob` values are unnormalized; the reference distribution is their
/// softmax, see [`CandidatePool::reference_distribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub context_id: String,
    pub candidates: Vec<PoolCandidate>,
}

impl CandidatePool {
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        if self.candidates.len() < 2 {
            return Err(Error::Validation(format!(
                "pool '{}' too small: {} candidate(s), need at least 2",
                self.context_id,
                self.candidates.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &self.candidates {
            if c.candidate_id.is_empty() {
                return Err(Error::Validation(format!(
                    "pool '{}': empty candidate_id",
                    self.context_id
                )));
            }
            if !seen.insert(c.candidate_id.as_str()) {
                return Err(Error::Validation(format!(
                    "pool '{}': duplicate candidate_id '{}'",
                    self.context_id, c.candidate_id
                )));
            }
            if !c.sft_logprob.is_finite() {
                return Err(Error::Validation(format!(
                    "pool '{}' candidate '{}': non-finite sft_logprob",
                    self.context_id, c.candidate_id
                )));
            }
            validate_feature_vector(&c.features, schema).map_err(|v| {
                Error::Validation(format!(
                    "pool '{}' candidate '{}': {}",
                    self.context_id,
                    c.candidate_id,
                    violations_to_string(&v)
                ))
            })?;
        }
        Ok(())
    }

    /// Softmax of the stored `sft_logprob` values: the reference policy over
    /// this pool's candidates.
    pub fn reference_distribution(&self) -> Vec<f64> {
        crate::net::softmax(
            &self
                .candidates
                .iter()
                .map(|c| c.sft_logprob)
                .collect::<Vec<_>>(),
        )
    }

    /// Candidates of one tier, in pool order.
    pub fn tier_members(&self, tier: QualityTier) -> Vec<&PoolCandidate> {
        self.candidates.iter().filter(|c| c.tier == tier).collect()
    }
}
