//! Feature-based reward model: a small feed-forward network scoring a
//! feature vector, trained on pairwise preferences.
//!
//! The training loss for a pair is `-log sigmoid(r_w - r_l)` (the standard
//! Bradley-Terry orientation), averaged over the batch. Feature values are
//! mapped into `[0, 1]` by the schema bounds before the first layer, which
//! keeps the large learning rates of the default sweep range stable.

use crate::error::{Error, Result};
use crate::net::{sigmoid, softplus, warmup_cosine_lr, Activation, AdamW, Mlp, Trace};
use crate::records::PreferencePair;
use crate::schema::{validate_feature_vector, violations_to_string, FeatureSchema, FeatureVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_HIDDEN_DIMS: [usize; 2] = [16, 16];

/// Reward model: network plus the schema describing its input space.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardNet {
    schema: FeatureSchema,
    net: Mlp,
}

impl RewardNet {
    /// Glorot-initialized model with `hidden` layer widths.
    pub fn new(
        schema: FeatureSchema,
        hidden: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(schema.len());
        dims.extend_from_slice(hidden);
        dims.push(1);
        Ok(RewardNet {
            net: Mlp::glorot(&dims, activation, seed)?,
            schema,
        })
    }

    /// Zero-parameter model, useful as a neutral baseline.
    pub fn zeros(schema: FeatureSchema, hidden: &[usize], activation: Activation) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(schema.len());
        dims.extend_from_slice(hidden);
        dims.push(1);
        Ok(RewardNet {
            net: Mlp::zeros(&dims, activation)?,
            schema,
        })
    }

    pub fn from_parts(schema: FeatureSchema, net: Mlp) -> Result<Self> {
        if net.input_dim() != schema.len() {
            return Err(Error::Config(format!(
                "network input dim {} does not match schema length {}",
                net.input_dim(),
                schema.len()
            )));
        }
        Ok(RewardNet { schema, net })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    /// Scalar reward for a feature vector. Validates the vector first.
    pub fn forward(&self, features: &FeatureVector) -> Result<f64> {
        validate_feature_vector(features, &self.schema)
            .map_err(|v| Error::Validation(violations_to_string(&v)))?;
        Ok(self.forward_unchecked(features.values()))
    }

    /// Forward pass without bounds validation (values are still normalized).
    pub fn forward_unchecked(&self, values: &[f64]) -> f64 {
        if values.len() != self.schema.len() {
            // Dimension mismatch is a programmer error on this path.
            panic!(
                "feature length {} does not match schema length {}",
                values.len(),
                self.schema.len()
            );
        }
        self.net.forward(&self.schema.normalize(values))
    }
}

/// Mean pairwise preference loss `-log sigmoid(r_w - r_l)` over a batch.
pub fn elo_loss(model: &RewardNet, batch: &[PreferencePair]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Validation("empty batch".into()));
    }
    let mut sum = 0.0;
    for pair in batch {
        let rw = model.forward_unchecked(pair.winner_features.values());
        let rl = model.forward_unchecked(pair.loser_features.values());
        sum += softplus(rl - rw);
    }
    Ok(sum / batch.len() as f64)
}

/// Loss and its analytic gradient with respect to every network parameter.
///
/// For one pair with gap `z = r_w - r_l`, `dL/dz = -sigmoid(-z)`; the pair's
/// contribution is backpropagated through both forward passes.
pub fn elo_loss_grad(model: &RewardNet, batch: &[PreferencePair]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Validation("empty batch".into()));
    }
    let n = batch.len() as f64;
    let mut grads = vec![0.0; model.net.param_count()];
    let mut sum = 0.0;
    let mut trace_w = Trace::default();
    let mut trace_l = Trace::default();
    for pair in batch {
        let xw = model.schema.normalize(pair.winner_features.values());
        let xl = model.schema.normalize(pair.loser_features.values());
        let rw = model.net.forward_traced(&xw, &mut trace_w);
        let rl = model.net.forward_traced(&xl, &mut trace_l);
        let z = rw - rl;
        sum += softplus(-z);
        let dz = -sigmoid(-z) / n;
        model.net.backward(&trace_w, dz, &mut grads);
        model.net.backward(&trace_l, -dz, &mut grads);
    }
    Ok((sum / n, grads))
}

/// Fraction of pairs ranked correctly; exact reward ties count one half.
pub fn preference_accuracy(model: &RewardNet, dataset: &[PreferencePair]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Validation("empty dataset".into()));
    }
    let mut score = 0.0;
    for pair in dataset {
        let rw = model.forward_unchecked(pair.winner_features.values());
        let rl = model.forward_unchecked(pair.loser_features.values());
        if rw > rl {
            score += 1.0;
        } else if rw == rl {
            score += 0.5;
        }
    }
    Ok(score / dataset.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Decoupled AdamW weight decay.
    pub weight_decay: f64,
    /// Fraction of total steps spent in linear warmup, in `[0, 1)`.
    pub warmup_fraction: f64,
    pub total_epochs: usize,
    /// Seed for the shuffle/split stream.
    pub seed: u64,
    /// Fraction of the shuffled dataset held out for evaluation, in `[0, 1)`.
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 0.005,
            weight_decay: 0.05,
            warmup_fraction: 0.1,
            total_epochs: 80,
            seed: 0,
            holdout_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config("warmup_fraction must be in [0, 1)".into()));
        }
        if self.total_epochs == 0 {
            return Err(Error::Config("total_epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config("holdout_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Loss over the full training split at the end of the epoch.
    pub train_loss: f64,
    pub holdout_loss: Option<f64>,
    pub holdout_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub train_size: usize,
    pub holdout_size: usize,
    pub wall_clock_secs: f64,
}

impl TrainReport {
    pub fn final_train_loss(&self) -> f64 {
        self.epochs.last().map(|e| e.train_loss).unwrap_or(f64::NAN)
    }

    /// CSV with columns epoch, train_loss, holdout_loss, holdout_acc.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,holdout_loss,holdout_acc\n");
        for e in &self.epochs {
            let hl = e.holdout_loss.map(|v| v.to_string()).unwrap_or_default();
            let ha = e
                .holdout_accuracy
                .map(|v| v.to_string())
                .unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, hl, ha));
        }
        out
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: RewardNet,
    pub report: TrainReport,
}

/// Trains a reward model with AdamW under a warmup+cosine schedule.
///
/// The dataset is shuffled once with `config.seed`; the last
/// `holdout_fraction` of the shuffle becomes the holdout split. Runs are
/// bit-reproducible given identical inputs, config, and `init_seed`.
pub fn train_reward(
    dataset: &[PreferencePair],
    schema: &FeatureSchema,
    hidden: &[usize],
    activation: Activation,
    config: &TrainConfig,
    init_seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Validation("empty dataset".into()));
    }
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let holdout_len = (dataset.len() as f64 * config.holdout_fraction).floor() as usize;
    let train_len = dataset.len() - holdout_len;
    if train_len == 0 {
        return Err(Error::Config(
            "holdout_fraction leaves no training data".into(),
        ));
    }
    if config.batch_size > train_len {
        return Err(Error::Config(format!(
            "batch_size {} exceeds training split size {train_len}",
            config.batch_size
        )));
    }
    let (train_idx, holdout_idx) = order.split_at(train_len);
    let train: Vec<PreferencePair> = train_idx.iter().map(|&i| dataset[i].clone()).collect();
    let holdout: Vec<PreferencePair> = holdout_idx.iter().map(|&i| dataset[i].clone()).collect();

    let mut model = RewardNet::new(schema.clone(), hidden, activation, init_seed)?;
    let batches_per_epoch = train.len().div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.total_epochs;
    let warmup_steps = (total_steps as f64 * config.warmup_fraction).floor() as usize;
    let mut optimizer = AdamW::new(model.net.param_count(), config.weight_decay);

    let mut epochs = Vec::with_capacity(config.total_epochs);
    let mut step = 0usize;
    let mut train_order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..config.total_epochs {
        train_order.shuffle(&mut rng);
        for chunk in train_order.chunks(config.batch_size) {
            let batch: Vec<PreferencePair> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (loss, grads) = elo_loss_grad(&model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training diverged at step {step} (epoch {epoch}): loss {loss}"
                )));
            }
            let lr = warmup_cosine_lr(step, total_steps, warmup_steps, config.learning_rate);
            optimizer.step(model.net.params_mut(), &grads, lr);
            step += 1;
        }
        // Full-split loss at the epoch's final parameters; mid-epoch
        // minibatch losses are evaluated at moving parameters and noisy.
        let train_loss = elo_loss(&model, &train)?;
        let (holdout_loss, holdout_accuracy) = if holdout.is_empty() {
            (None, None)
        } else {
            (
                Some(elo_loss(&model, &holdout)?),
                Some(preference_accuracy(&model, &holdout)?),
            )
        };
        epochs.push(EpochStats {
            epoch,
            train_loss,
            holdout_loss,
            holdout_accuracy,
        });
    }

    Ok(TrainOutcome {
        model,
        report: TrainReport {
            epochs,
            train_size: train.len(),
            holdout_size: holdout.len(),
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::CandidateRef;
    use rand::Rng;

    fn schema() -> FeatureSchema {
        FeatureSchema::default()
    }

    fn pair_from(w: Vec<f64>, l: Vec<f64>) -> PreferencePair {
        PreferencePair {
            context_id: "ctx".into(),
            winner: CandidateRef::new("w"),
            loser: CandidateRef::new("l"),
            winner_features: FeatureVector::new(w),
            loser_features: FeatureVector::new(l),
            annotator_id: None,
        }
    }

    fn random_pairs(n: usize, seed: u64) -> Vec<PreferencePair> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..7).map(|_| rng.gen_range(0.0..5.0)).collect();
                let l: Vec<f64> = (0..7).map(|_| rng.gen_range(0.0..5.0)).collect();
                pair_from(w, l)
            })
            .collect()
    }

    #[test]
    fn zero_net_loss_is_ln2() {
        let model = RewardNet::zeros(schema(), &[16, 16], Activation::Tanh).unwrap();
        let batch = random_pairs(32, 5);
        let loss = elo_loss(&model, &batch).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn unit_gap_loss_matches_closed_form() {
        // Model output = first normalized feature: gap of 1.0 between
        // all-5s winner and all-0s loser (one weight of 1 on feature 0).
        let mut model = RewardNet::zeros(schema(), &[], Activation::Tanh).unwrap();
        let idx = model.net().weight_index(0, 0, 0);
        model.net_mut().params_mut()[idx] = 1.0;
        let mut w = vec![0.0; 7];
        w[0] = 5.0;
        let batch = vec![pair_from(w, vec![0.0; 7])];
        let loss = elo_loss(&model, &batch).unwrap();
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-9);
        assert!((expected - 0.313262).abs() < 1e-6);
    }

    #[test]
    fn saturated_gap_loss_vanishes() {
        let mut model = RewardNet::zeros(schema(), &[], Activation::Tanh).unwrap();
        let idx = model.net().weight_index(0, 0, 0);
        model.net_mut().params_mut()[idx] = 20.0;
        let mut w = vec![0.0; 7];
        w[0] = 5.0;
        let batch = vec![pair_from(w, vec![0.0; 7])];
        let loss = elo_loss(&model, &batch).unwrap();
        assert!(loss < 1e-8);
        assert!(loss > 0.0);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let model = RewardNet::zeros(schema(), &[], Activation::Tanh).unwrap();
        assert!(elo_loss(&model, &[]).is_err());
        assert!(elo_loss_grad(&model, &[]).is_err());
        assert!(preference_accuracy(&model, &[]).is_err());
    }

    #[test]
    fn loss_invariant_under_batch_permutation() {
        let model = RewardNet::new(schema(), &[16], Activation::Tanh, 11).unwrap();
        let mut batch = random_pairs(64, 12);
        let a = elo_loss(&model, &batch).unwrap();
        batch.reverse();
        let b = elo_loss(&model, &batch).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn output_bias_shift_leaves_loss_and_accuracy_unchanged() {
        let model = RewardNet::new(schema(), &[16], Activation::Tanh, 3).unwrap();
        let batch = random_pairs(50, 4);
        let loss = elo_loss(&model, &batch).unwrap();
        let acc = preference_accuracy(&model, &batch).unwrap();

        let mut shifted = model.clone();
        let last = shifted.net().layer_count() - 1;
        let idx = shifted.net().bias_index(last, 0);
        shifted.net_mut().params_mut()[idx] += 3.5;
        assert!((elo_loss(&shifted, &batch).unwrap() - loss).abs() < 1e-12);
        assert_eq!(preference_accuracy(&shifted, &batch).unwrap(), acc);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = RewardNet::new(schema(), &[16, 16], Activation::Tanh, 7).unwrap();
        let batch = random_pairs(8, 8);
        let (_, grads) = elo_loss_grad(&model, &batch).unwrap();
        let h = 1e-5;
        for k in 0..model.net().param_count() {
            let mut plus = model.clone();
            plus.net_mut().params_mut()[k] += h;
            let mut minus = model.clone();
            minus.net_mut().params_mut()[k] -= h;
            let fd =
                (elo_loss(&plus, &batch).unwrap() - elo_loss(&minus, &batch).unwrap()) / (2.0 * h);
            let denom = fd.abs().max(grads[k].abs()).max(1e-8);
            assert!(
                (fd - grads[k]).abs() / denom < 1e-4,
                "param {k}: analytic {} vs fd {fd}",
                grads[k]
            );
        }
    }

    #[test]
    fn linear_gradient_matches_hand_derivation() {
        // Single pair, linear 7 -> 1 net: dL/dw_i = -sigmoid(-(r_w - r_l)) *
        // (x_w,i - x_l,i) in normalized coordinates.
        let model = RewardNet::new(schema(), &[], Activation::Tanh, 21).unwrap();
        let batch = random_pairs(1, 22);
        let (_, grads) = elo_loss_grad(&model, &batch).unwrap();
        let xw = schema().normalize(batch[0].winner_features.values());
        let xl = schema().normalize(batch[0].loser_features.values());
        let rw = model.forward_unchecked(batch[0].winner_features.values());
        let rl = model.forward_unchecked(batch[0].loser_features.values());
        let coeff = -sigmoid(-(rw - rl));
        for i in 0..7 {
            let expected = coeff * (xw[i] - xl[i]);
            let got = grads[model.net().weight_index(0, 0, i)];
            assert!((expected - got).abs() < 1e-12, "w{i}: {expected} vs {got}");
        }
        // Bias gradient cancels between winner and loser passes.
        assert!(grads[model.net().bias_index(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn symmetric_batch_has_zero_gradient_at_zero_init() {
        // Two pairs with winner/loser features swapped: contributions cancel
        // exactly when the model scores both sides equally.
        let model = RewardNet::zeros(schema(), &[16], Activation::Tanh).unwrap();
        let a = vec![4.0, 1.0, 3.0, 2.0, 5.0, 0.0, 2.5];
        let b = vec![1.0, 4.0, 2.0, 3.0, 0.0, 5.0, 2.5];
        let batch = vec![pair_from(a.clone(), b.clone()), pair_from(b, a)];
        let (loss, grads) = elo_loss_grad(&model, &batch).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(grads.iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn accuracy_counts_wins_and_ties() {
        let model = RewardNet::zeros(schema(), &[], Activation::Tanh).unwrap();
        let batch = random_pairs(10, 2);
        // Zero net: every pair ties.
        assert_eq!(preference_accuracy(&model, &batch).unwrap(), 0.5);
    }

    #[test]
    fn accuracy_matches_brute_force_recount() {
        let model = RewardNet::new(schema(), &[16], Activation::Tanh, 3).unwrap();
        let batch = random_pairs(1000, 4);
        let got = preference_accuracy(&model, &batch).unwrap();
        let mut wins = 0usize;
        let mut ties = 0usize;
        for p in &batch {
            let rw = model.forward(&p.winner_features).unwrap();
            let rl = model.forward(&p.loser_features).unwrap();
            if rw > rl {
                wins += 1;
            } else if rw == rl {
                ties += 1;
            }
        }
        let want = (wins as f64 + 0.5 * ties as f64) / batch.len() as f64;
        assert_eq!(got, want);
    }

    #[test]
    fn single_pair_descent_reduces_loss() {
        let dataset = random_pairs(1, 33);
        let config = TrainConfig {
            batch_size: 1,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            warmup_fraction: 0.0,
            total_epochs: 1,
            seed: 1,
            holdout_fraction: 0.0,
        };
        let before = {
            let model = RewardNet::new(schema(), &[16, 16], Activation::Tanh, 5).unwrap();
            elo_loss(&model, &dataset).unwrap()
        };
        let outcome =
            train_reward(&dataset, &schema(), &[16, 16], Activation::Tanh, &config, 5).unwrap();
        let after = elo_loss(&outcome.model, &dataset).unwrap();
        assert!(after < before, "loss {after} not below {before}");
    }

    #[test]
    fn training_is_bit_reproducible() {
        let dataset = random_pairs(64, 9);
        let config = TrainConfig {
            total_epochs: 3,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let a = train_reward(&dataset, &schema(), &[16], Activation::Tanh, &config, 7).unwrap();
        let b = train_reward(&dataset, &schema(), &[16], Activation::Tanh, &config, 7).unwrap();
        assert_eq!(a.model.net().params(), b.model.net().params());
        assert_eq!(a.report.epochs, b.report.epochs);
    }

    #[test]
    fn divergence_aborts_with_step_index() {
        // An absurd learning rate overflows the forward pass within a few
        // steps; training must stop with a numerical error, not NaN output.
        let dataset = random_pairs(32, 13);
        let config = TrainConfig {
            batch_size: 8,
            learning_rate: 1e300,
            warmup_fraction: 0.0,
            total_epochs: 3,
            holdout_fraction: 0.0,
            ..TrainConfig::default()
        };
        let err = train_reward(&dataset, &schema(), &[16], Activation::Tanh, &config, 1)
            .unwrap_err()
            .to_string();
        assert!(err.contains("diverged at step"), "{err}");
    }

    #[test]
    fn exact_latent_model_scores_perfectly_on_its_own_labels() {
        // A reward model that IS the labeling function ranks every
        // noiseless pair correctly.
        let schema = schema();
        let weights = [0.28, 0.22, 0.17, 0.12, 0.09, 0.07, 0.05];
        let mut model = RewardNet::zeros(schema.clone(), &[], Activation::Tanh).unwrap();
        for (i, &w) in weights.iter().enumerate() {
            let idx = model.net().weight_index(0, 0, i);
            model.net_mut().params_mut()[idx] = w * schema.feature(i).range();
        }
        let oracle = crate::synth::LatentOracle::new(
            crate::synth::LatentRewardSpec::linear(weights.to_vec(), 0.0),
            schema,
        )
        .unwrap();
        let pairs = crate::synth::sample_preferences(&oracle, 500, 77);
        assert_eq!(preference_accuracy(&model, &pairs).unwrap(), 1.0);
    }

    #[test]
    fn batch_size_larger_than_train_split_is_rejected() {
        let dataset = random_pairs(10, 1);
        let config = TrainConfig {
            batch_size: 10,
            holdout_fraction: 0.2,
            ..TrainConfig::default()
        };
        let err = train_reward(&dataset, &schema(), &[], Activation::Tanh, &config, 0)
            .unwrap_err()
            .to_string();
        assert!(err.contains("batch_size"), "{err}");
    }
}
