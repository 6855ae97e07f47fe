//! Implicit-preference pipeline: tiered pools -> cross-tier pairs ->
//! trained reward model that separates fresh GOOD from fresh VBAD
//! candidates.

use featrm_core::baselines::{derive_implicit_pairs, ImplicitPairPolicy};
use featrm_core::eval::feature_gap_report;
use featrm_core::net::Activation;
use featrm_core::records::QualityTier;
use featrm_core::reward::{train_reward, TrainConfig};
use featrm_core::schema::FeatureSchema;
use featrm_core::synth::{gen_candidate_pools, sample_preferences, LatentOracle, LatentRewardSpec};

const LATENT_WEIGHTS: [f64; 7] = [0.28, 0.22, 0.17, 0.12, 0.09, 0.07, 0.05];

#[test]
fn implicit_pairs_train_a_good_vs_vbad_ranker() {
    let schema = FeatureSchema::default();
    let oracle = LatentOracle::new(
        LatentRewardSpec::linear(LATENT_WEIGHTS.to_vec(), 0.0),
        schema.clone(),
    )
    .unwrap();
    let train_pools = gen_candidate_pools(&oracle, 60, 3, 11).unwrap();
    let pairs = derive_implicit_pairs(&train_pools, &ImplicitPairPolicy::default());
    assert_eq!(pairs.len(), 60 * 27);

    let config = TrainConfig {
        batch_size: 128,
        ..TrainConfig::default()
    };
    let outcome = train_reward(&pairs, &schema, &[16, 16], Activation::Tanh, &config, 5).unwrap();

    // Fresh pools the model never saw; count GOOD-vs-VBAD orderings.
    let eval_pools = gen_candidate_pools(&oracle, 40, 3, 12).unwrap();
    let mut correct = 0usize;
    let mut total = 0usize;
    for pool in &eval_pools {
        for good in pool.tier_members(QualityTier::Good) {
            for vbad in pool.tier_members(QualityTier::VBad) {
                let rg = outcome.model.forward(&good.features).unwrap();
                let rv = outcome.model.forward(&vbad.features).unwrap();
                total += 1;
                if rg > rv {
                    correct += 1;
                }
            }
        }
    }
    let accuracy = correct as f64 / total as f64;
    assert!(accuracy >= 0.90, "GOOD-vs-VBAD accuracy {accuracy}");
}

#[test]
fn feature_gap_is_nonnegative_for_positive_latent_weights() {
    // With every latent weight positive and noiseless labels, winners must
    // average at least as high as losers on every feature.
    let schema = FeatureSchema::default();
    let oracle = LatentOracle::new(
        LatentRewardSpec::linear(LATENT_WEIGHTS.to_vec(), 0.0),
        schema,
    )
    .unwrap();
    let dataset = sample_preferences(&oracle, 4000, 21);
    let report = feature_gap_report(&dataset).unwrap();
    for (i, gap) in report.gap().iter().enumerate() {
        assert!(*gap >= 0.0, "feature {i} gap {gap}");
    }
}
