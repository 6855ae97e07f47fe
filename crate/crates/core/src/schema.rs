//! Feature schema and feature vectors.
//!
//! A [`FeatureSchema`] is an ordered list of named, bounded features. The
//! default schema carries the seven opinion-summarization features, each
//! scored on a 0 to 5 scale. All downstream components (scoring, reward
//! modeling, influence analysis) are generic over the schema so the library
//! is not tied to that feature set.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Names of the default features, in schema order.
pub const DEFAULT_FEATURE_NAMES: [&str; 7] = [
    "aspect-coverage",
    "opinion-faithfulness",
    "opinion-coverage",
    "conciseness",
    "relevance",
    "hallucination",
    "language-correctness",
];

/// One feature definition: a unique name plus inclusive value bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl FeatureDef {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// Ordered, validated list of feature definitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    features: Vec<FeatureDef>,
}

impl TryFrom<RawSchema> for FeatureSchema {
    type Error = Error;
    fn try_from(raw: RawSchema) -> Result<Self> {
        FeatureSchema::new(raw.features)
    }
}

impl From<FeatureSchema> for RawSchema {
    fn from(schema: FeatureSchema) -> Self {
        RawSchema {
            features: schema.features,
        }
    }
}

impl FeatureSchema {
    /// Builds a schema, enforcing unique non-empty names and `min < max`.
    pub fn new(features: Vec<FeatureDef>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Validation("schema has no features".into()));
        }
        for (i, f) in features.iter().enumerate() {
            if f.name.trim().is_empty() {
                return Err(Error::Validation(format!("feature {i} has an empty name")));
            }
            if !f.min.is_finite() || !f.max.is_finite() || f.min >= f.max {
                return Err(Error::Validation(format!(
                    "feature '{}' has invalid bounds [{}, {}]",
                    f.name, f.min, f.max
                )));
            }
            if features[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::Validation(format!(
                    "duplicate feature name '{}'",
                    f.name
                )));
            }
        }
        Ok(FeatureSchema { features })
    }

    /// Uniform bounds for `n` anonymous features; used for control models.
    pub fn uniform(n: usize, min: f64, max: f64, prefix: &str) -> Result<Self> {
        let features = (0..n)
            .map(|i| FeatureDef {
                name: format!("{prefix}{i}"),
                min,
                max,
            })
            .collect();
        Self::new(features)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &FeatureDef {
        &self.features[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Smallest `max - min` across features.
    pub fn min_range(&self) -> f64 {
        self.features
            .iter()
            .map(FeatureDef::range)
            .fold(f64::INFINITY, f64::min)
    }

    /// Content hash of the canonical schema serialization. Stored in
    /// checkpoints so a model is never applied to a mismatched schema.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for f in &self.features {
            hasher.update(f.name.as_bytes());
            hasher.update(f.min.to_le_bytes());
            hasher.update(f.max.to_le_bytes());
        }
        hex_digest(&hasher.finalize())
    }

    /// Maps raw feature values affinely into `[0, 1]` per feature.
    pub fn normalize(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.len());
        self.features
            .iter()
            .zip(values)
            .map(|(f, &v)| (v - f.min) / f.range())
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Validation(format!("schema file {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("schema serializes");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

impl Default for FeatureSchema {
    /// The seven opinion-summary features, each bounded `[0, 5]`.
    fn default() -> Self {
        let features = DEFAULT_FEATURE_NAMES
            .iter()
            .map(|&name| FeatureDef {
                name: name.to_string(),
                min: 0.0,
                max: 5.0,
            })
            .collect();
        FeatureSchema::new(features).expect("default schema is valid")
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Feature scores for one (context, candidate) pair, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }
}

/// One failed check from [`validate_feature_vector`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Offending feature index, when the problem is value-specific.
    pub feature: Option<usize>,
    pub reason: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.feature {
            Some(i) => write!(f, "feature {i}: {}", self.reason),
            None => write!(f, "{}", self.reason),
        }
    }
}

/// Checks a feature vector against a schema: length, finiteness, bounds.
///
/// Returns `Ok(())` when every invariant holds, otherwise the full list of
/// violations (not just the first).
pub fn validate_feature_vector(v: &FeatureVector, schema: &FeatureSchema) -> StdResult {
    let mut violations = Vec::new();
    if v.len() != schema.len() {
        violations.push(Violation {
            feature: None,
            reason: format!(
                "length mismatch: expected {}, got {}",
                schema.len(),
                v.len()
            ),
        });
        return Err(violations);
    }
    for (i, (&value, def)) in v.values().iter().zip(schema.features()).enumerate() {
        if !value.is_finite() {
            violations.push(Violation {
                feature: Some(i),
                reason: format!("non-finite value {value}"),
            });
        } else if value < def.min {
            violations.push(Violation {
                feature: Some(i),
                reason: format!("value {value} below min {}", def.min),
            });
        } else if value > def.max {
            violations.push(Violation {
                feature: Some(i),
                reason: format!("value {value} exceeds max {}", def.max),
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

type StdResult = std::result::Result<(), Vec<Violation>>;

pub(crate) fn violations_to_string(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_order_and_bounds() {
        let schema = FeatureSchema::default();
        assert_eq!(schema.len(), 7);
        for (def, name) in schema.features().iter().zip(DEFAULT_FEATURE_NAMES) {
            assert_eq!(def.name, name);
            assert_eq!(def.min, 0.0);
            assert_eq!(def.max, 5.0);
        }
    }

    #[test]
    fn rejects_duplicate_names() {
        let features = vec![
            FeatureDef {
                name: "a".into(),
                min: 0.0,
                max: 1.0,
            },
            FeatureDef {
                name: "a".into(),
                min: 0.0,
                max: 1.0,
            },
        ];
        assert!(FeatureSchema::new(features).is_err());
    }

    #[test]
    fn rejects_inverted_bounds() {
        let features = vec![FeatureDef {
            name: "a".into(),
            min: 2.0,
            max: 1.0,
        }];
        assert!(FeatureSchema::new(features).is_err());
    }

    #[test]
    fn validate_accepts_in_range_values() {
        // Magnitudes of a realistic scored summary.
        let schema = FeatureSchema::default();
        let v = FeatureVector::new(vec![3.6, 3.9, 3.8, 4.0, 4.1, 4.1, 4.6]);
        assert!(validate_feature_vector(&v, &schema).is_ok());
    }

    #[test]
    fn validate_accepts_lower_bound() {
        let schema = FeatureSchema::default();
        let v = FeatureVector::new(vec![0.0; 7]);
        assert!(validate_feature_vector(&v, &schema).is_ok());
    }

    #[test]
    fn validate_flags_out_of_bounds_value() {
        let schema = FeatureSchema::default();
        let v = FeatureVector::new(vec![5.1, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0]);
        let violations = validate_feature_vector(&v, &schema).unwrap_err();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].feature, Some(0));
        assert!(violations[0].reason.contains("exceeds max 5"));
    }

    #[test]
    fn validate_flags_length_mismatch_and_nan() {
        let schema = FeatureSchema::default();
        let short = FeatureVector::new(vec![1.0; 6]);
        let violations = validate_feature_vector(&short, &schema).unwrap_err();
        assert!(violations[0].reason.contains("length mismatch"));

        let nan = FeatureVector::new(vec![f64::NAN, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0]);
        let violations = validate_feature_vector(&nan, &schema).unwrap_err();
        assert_eq!(violations[0].feature, Some(0));
        assert!(violations[0].reason.contains("non-finite"));
    }

    #[test]
    fn normalize_maps_bounds_to_unit_interval() {
        let schema = FeatureSchema::default();
        let lo = schema.normalize(&[0.0; 7]);
        let hi = schema.normalize(&[5.0; 7]);
        assert!(lo.iter().all(|&x| x == 0.0));
        assert!(hi.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn fingerprint_stable_and_sensitive() {
        let a = FeatureSchema::default();
        let b = FeatureSchema::default();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = FeatureSchema::uniform(7, 0.0, 5.0, "f").unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
