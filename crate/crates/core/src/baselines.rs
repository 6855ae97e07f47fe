//! Non-preference baselines: the naive feature-mean reward and implicit
//! preference pairs derived from quality tiers.

use crate::error::{Error, Result};
use crate::records::{CandidatePool, CandidateRef, PreferencePair, QualityTier};
use crate::schema::{validate_feature_vector, violations_to_string, FeatureSchema, FeatureVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Arithmetic mean of the raw (unnormalized) feature values.
pub fn naive_mean_reward(features: &FeatureVector, schema: &FeatureSchema) -> Result<f64> {
    validate_feature_vector(features, schema)
        .map_err(|v| Error::Validation(violations_to_string(&v)))?;
    Ok(features.values().iter().sum::<f64>() / features.len() as f64)
}

/// How cross-tier pairs are formed. The tier ranking is always
/// `GOOD > SBAD > VBAD`; within-tier pairs are never emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pairing {
    /// Every (higher tier, lower tier) candidate pair.
    AllCrossTier,
    /// Only GOODxSBAD and SBADxVBAD pairs.
    AdjacentTierOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicitPairPolicy {
    pub pairing: Pairing,
    /// Per-pool cap; pairs beyond it are subsampled with `seed`.
    pub max_pairs_per_pool: Option<usize>,
    pub seed: u64,
}

impl Default for ImplicitPairPolicy {
    fn default() -> Self {
        ImplicitPairPolicy {
            pairing: Pairing::AllCrossTier,
            max_pairs_per_pool: None,
            seed: 0,
        }
    }
}

/// Derives winner/loser pairs from tier labels: the winner always comes
/// from the strictly higher tier. Emitted records carry
/// `annotator_id = "implicit"`. A pool with a single populated tier yields
/// no pairs.
pub fn derive_implicit_pairs(
    pools: &[CandidatePool],
    policy: &ImplicitPairPolicy,
) -> Vec<PreferencePair> {
    if let Some(cap) = policy.max_pairs_per_pool {
        if cap == 0 {
            return Vec::new();
        }
    }
    let tier_pairs: &[(QualityTier, QualityTier)] = match policy.pairing {
        Pairing::AllCrossTier => &[
            (QualityTier::Good, QualityTier::SBad),
            (QualityTier::Good, QualityTier::VBad),
            (QualityTier::SBad, QualityTier::VBad),
        ],
        Pairing::AdjacentTierOnly => &[
            (QualityTier::Good, QualityTier::SBad),
            (QualityTier::SBad, QualityTier::VBad),
        ],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut out = Vec::new();
    for pool in pools {
        let mut pool_pairs = Vec::new();
        for &(win_tier, lose_tier) in tier_pairs {
            for winner in pool.tier_members(win_tier) {
                for loser in pool.tier_members(lose_tier) {
                    pool_pairs.push(PreferencePair {
                        context_id: pool.context_id.clone(),
                        winner: CandidateRef::new(winner.candidate_id.clone()),
                        loser: CandidateRef::new(loser.candidate_id.clone()),
                        winner_features: winner.features.clone(),
                        loser_features: loser.features.clone(),
                        annotator_id: Some("implicit".into()),
                    });
                }
            }
        }
        if let Some(cap) = policy.max_pairs_per_pool {
            if pool_pairs.len() > cap {
                let mut keep: Vec<usize> = sample(&mut rng, pool_pairs.len(), cap).into_vec();
                keep.sort_unstable();
                pool_pairs = keep.into_iter().map(|i| pool_pairs[i].clone()).collect();
            }
        }
        out.extend(pool_pairs);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::PoolCandidate;

    fn tiered_pool(good: usize, sbad: usize, vbad: usize) -> CandidatePool {
        let mut candidates = Vec::new();
        let mut push = |tier: QualityTier, n: usize, base: f64| {
            for i in 0..n {
                candidates.push(PoolCandidate {
                    candidate_id: format!("{}{i}", tier.as_str().to_lowercase()),
                    tier,
                    features: FeatureVector::new(vec![base; 7]),
                    sft_logprob: 0.0,
                });
            }
        };
        push(QualityTier::Good, good, 4.0);
        push(QualityTier::SBad, sbad, 2.5);
        push(QualityTier::VBad, vbad, 1.0);
        CandidatePool {
            context_id: "pool".into(),
            candidates,
        }
    }

    #[test]
    fn mean_of_all_fives_is_five() {
        let schema = FeatureSchema::default();
        let v = FeatureVector::new(vec![5.0; 7]);
        assert_eq!(naive_mean_reward(&v, &schema).unwrap(), 5.0);
        let z = FeatureVector::new(vec![0.0; 7]);
        assert_eq!(naive_mean_reward(&z, &schema).unwrap(), 0.0);
    }

    #[test]
    fn mean_matches_hand_computed_value() {
        // Mean of (3.69, 4.02, 3.92, 4.05, 4.10, 3.99, 4.50) = 28.27 / 7.
        let schema = FeatureSchema::default();
        let v = FeatureVector::new(vec![3.69, 4.02, 3.92, 4.05, 4.10, 3.99, 4.50]);
        let mean = naive_mean_reward(&v, &schema).unwrap();
        assert!((mean - 28.27 / 7.0).abs() < 1e-12);
        assert_eq!(format!("{mean:.4}"), "4.0386");
    }

    #[test]
    fn mean_is_permutation_invariant_and_affine() {
        let schema = FeatureSchema::default();
        let v = FeatureVector::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 2.0]);
        let mut rev: Vec<f64> = v.values().to_vec();
        rev.reverse();
        let a = naive_mean_reward(&v, &schema).unwrap();
        let b = naive_mean_reward(&FeatureVector::new(rev), &schema).unwrap();
        assert!((a - b).abs() < 1e-12);

        // Affine in each coordinate: bumping feature i by d moves the mean by d/7.
        let mut bumped: Vec<f64> = v.values().to_vec();
        bumped[2] += 0.7;
        let c = naive_mean_reward(&FeatureVector::new(bumped), &schema).unwrap();
        assert!((c - a - 0.1).abs() < 1e-12);
    }

    #[test]
    fn all_cross_tier_count_on_3_3_3_pool() {
        let pools = vec![tiered_pool(3, 3, 3)];
        let pairs = derive_implicit_pairs(&pools, &ImplicitPairPolicy::default());
        assert_eq!(pairs.len(), 27);
    }

    #[test]
    fn adjacent_tier_count_on_3_3_3_pool() {
        let pools = vec![tiered_pool(3, 3, 3)];
        let policy = ImplicitPairPolicy {
            pairing: Pairing::AdjacentTierOnly,
            ..ImplicitPairPolicy::default()
        };
        let pairs = derive_implicit_pairs(&pools, &policy);
        assert_eq!(pairs.len(), 18);
    }

    #[test]
    fn single_tier_pool_yields_no_pairs() {
        let pools = vec![tiered_pool(4, 0, 0)];
        let pairs = derive_implicit_pairs(&pools, &ImplicitPairPolicy::default());
        assert!(pairs.is_empty());
    }

    #[test]
    fn winners_always_come_from_strictly_higher_tiers() {
        let pools = vec![tiered_pool(2, 3, 2), tiered_pool(1, 1, 4)];
        let pairs = derive_implicit_pairs(&pools, &ImplicitPairPolicy::default());
        let tier_of = |id: &str| -> QualityTier {
            if id.starts_with("good") {
                QualityTier::Good
            } else if id.starts_with("sbad") {
                QualityTier::SBad
            } else {
                QualityTier::VBad
            }
        };
        assert!(!pairs.is_empty());
        for p in &pairs {
            assert!(tier_of(&p.winner.candidate_id) > tier_of(&p.loser.candidate_id));
            assert_eq!(p.annotator_id.as_deref(), Some("implicit"));
        }
    }

    #[test]
    fn subsampling_is_capped_and_deterministic() {
        let pools = vec![tiered_pool(3, 3, 3)];
        let policy = ImplicitPairPolicy {
            pairing: Pairing::AllCrossTier,
            max_pairs_per_pool: Some(10),
            seed: 42,
        };
        let a = derive_implicit_pairs(&pools, &policy);
        let b = derive_implicit_pairs(&pools, &policy);
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
    }
}
