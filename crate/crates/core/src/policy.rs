//! Offline candidate-selection policy trained against a frozen reward model
//! under a KL penalty towards the pool's reference distribution.
//!
//! Each pool is a finite action set, so the policy is a softmax over a small
//! scoring network's per-candidate logits and every expectation is computed
//! exactly. The minimized objective per pool is
//!
//! ```text
//! L = -E_{s ~ pi}[ reward(s) - beta * (log pi(s) - log q(s)) ]
//! ```
//!
//! averaged over pools, where `q` is the softmax of the stored reference
//! log-scores. A clipped-ratio variant with per-epoch policy snapshots is
//! available for comparison.

use crate::error::{Error, Result};
use crate::net::{log_softmax, Activation, AdamW, Mlp, Trace};
use crate::records::CandidatePool;
use crate::reward::RewardNet;
use crate::schema::FeatureSchema;
use serde::{Deserialize, Serialize};

pub const DEFAULT_HIDDEN_DIMS: [usize; 2] = [16, 16];

/// Candidate-selection policy: per-pool softmax over scoring-net logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySelector {
    schema: FeatureSchema,
    net: Mlp,
}

impl PolicySelector {
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
        Ok(PolicySelector {
            net: Mlp::glorot(&dims, activation, seed)?,
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
        Ok(PolicySelector { schema, net })
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

    fn logits(&self, pool: &CandidatePool) -> Vec<f64> {
        pool.candidates
            .iter()
            .map(|c| {
                self.net
                    .forward(&self.schema.normalize(c.features.values()))
            })
            .collect()
    }
}

/// Selection probabilities of `policy` over one pool's candidates.
pub fn policy_distribution(policy: &PolicySelector, pool: &CandidatePool) -> Result<Vec<f64>> {
    pool.validate(policy.schema())?;
    let logits = policy.logits(pool);
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numeric("non-finite policy logit".into()));
    }
    Ok(crate::net::softmax(&logits))
}

/// Rewards of every candidate in a pool under the frozen reward model.
fn pool_rewards(reward: &RewardNet, pool: &CandidatePool) -> Result<Vec<f64>> {
    pool.candidates
        .iter()
        .map(|c| reward.forward(&c.features))
        .collect()
}

fn check_schemas(policy_schema: &FeatureSchema, reward: &RewardNet) -> Result<()> {
    if policy_schema != reward.schema() {
        return Err(Error::Config(
            "policy and reward model use different schemas".into(),
        ));
    }
    Ok(())
}

/// Exact-expectation objective (lower is better), averaged over pools.
pub fn policy_objective(
    policy: &PolicySelector,
    pools: &[CandidatePool],
    reward: &RewardNet,
    beta: f64,
) -> Result<f64> {
    check_schemas(policy.schema(), reward)?;
    if pools.is_empty() {
        return Err(Error::Validation("no pools".into()));
    }
    let mut total = 0.0;
    for pool in pools {
        let rewards = pool_rewards(reward, pool)?;
        let log_q = log_softmax(
            &pool
                .candidates
                .iter()
                .map(|c| c.sft_logprob)
                .collect::<Vec<_>>(),
        );
        let logits = policy.logits(pool);
        let log_pi = log_softmax(&logits);
        let mut expectation = 0.0;
        for ((lp, lq), r) in log_pi.iter().zip(&log_q).zip(&rewards) {
            expectation += lp.exp() * (r - beta * (lp - lq));
        }
        total -= expectation;
    }
    Ok(total / pools.len() as f64)
}

/// Objective plus its gradient with respect to the policy parameters.
///
/// With `a_s = r_s - beta (log pi_s - log q_s)` and per-pool expectation
/// `J = sum_s pi_s a_s`, the logit gradient is `dJ/dz_k = pi_k (a_k - J)`;
/// the beta term through `log pi` cancels exactly.
pub fn policy_objective_grad(
    policy: &PolicySelector,
    pools: &[CandidatePool],
    reward: &RewardNet,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    check_schemas(policy.schema(), reward)?;
    if pools.is_empty() {
        return Err(Error::Validation("no pools".into()));
    }
    let n_pools = pools.len() as f64;
    let mut grads = vec![0.0; policy.net.param_count()];
    let mut total = 0.0;
    let mut trace = Trace::default();
    for pool in pools {
        let rewards = pool_rewards(reward, pool)?;
        let log_q = log_softmax(
            &pool
                .candidates
                .iter()
                .map(|c| c.sft_logprob)
                .collect::<Vec<_>>(),
        );
        let inputs: Vec<Vec<f64>> = pool
            .candidates
            .iter()
            .map(|c| policy.schema.normalize(c.features.values()))
            .collect();
        let logits: Vec<f64> = inputs.iter().map(|x| policy.net.forward(x)).collect();
        let log_pi = log_softmax(&logits);
        let pi: Vec<f64> = log_pi.iter().map(|lp| lp.exp()).collect();
        let adv: Vec<f64> = (0..pi.len())
            .map(|s| rewards[s] - beta * (log_pi[s] - log_q[s]))
            .collect();
        let expectation: f64 = pi.iter().zip(&adv).map(|(p, a)| p * a).sum();
        total -= expectation;
        for k in 0..pi.len() {
            let upstream = -pi[k] * (adv[k] - expectation) / n_pools;
            policy.net.forward_traced(&inputs[k], &mut trace);
            policy.net.backward(&trace, upstream, &mut grads);
        }
    }
    Ok((total / n_pools, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObjectiveVariant {
    /// Direct gradient descent on the exact per-pool expectation.
    ExactExpectation,
    /// Clipped-ratio surrogate with a frozen policy snapshot per epoch.
    ClippedRatio { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOptConfig {
    /// KL penalty coefficient.
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub variant: ObjectiveVariant,
}

impl PolicyOptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta < 0.0 || !self.beta.is_finite() {
            return Err(Error::Config("beta must be non-negative and finite".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if let ObjectiveVariant::ClippedRatio { epsilon } = self.variant {
            if !(0.0 < epsilon && epsilon < 1.0) {
                return Err(Error::Config("epsilon must be in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

impl Default for PolicyOptConfig {
    fn default() -> Self {
        PolicyOptConfig {
            beta: 0.1,
            learning_rate: 0.05,
            epochs: 400,
            seed: 0,
            variant: ObjectiveVariant::ExactExpectation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEpochStats {
    pub epoch: usize,
    pub objective: f64,
    /// Expected reward under the current policy, averaged over pools.
    pub mean_reward: f64,
    /// KL(pi || reference), averaged over pools.
    pub mean_kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTrainReport {
    pub epochs: Vec<PolicyEpochStats>,
    pub wall_clock_secs: f64,
}

impl PolicyTrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,objective,mean_reward,mean_kl\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.objective, e.mean_reward, e.mean_kl
            ));
        }
        out
    }
}

#[derive(Debug)]
pub struct PolicyTrainOutcome {
    pub policy: PolicySelector,
    pub report: PolicyTrainReport,
}

/// Mean expected reward and mean KL to the reference, over pools.
pub fn policy_diagnostics(
    policy: &PolicySelector,
    pools: &[CandidatePool],
    reward: &RewardNet,
) -> Result<(f64, f64)> {
    check_schemas(policy.schema(), reward)?;
    if pools.is_empty() {
        return Err(Error::Validation("no pools".into()));
    }
    let mut mean_reward = 0.0;
    let mut mean_kl = 0.0;
    for pool in pools {
        let rewards = pool_rewards(reward, pool)?;
        let log_q = log_softmax(
            &pool
                .candidates
                .iter()
                .map(|c| c.sft_logprob)
                .collect::<Vec<_>>(),
        );
        let log_pi = log_softmax(&policy.logits(pool));
        for ((lp, lq), r) in log_pi.iter().zip(&log_q).zip(&rewards) {
            let p = lp.exp();
            mean_reward += p * r;
            mean_kl += p * (lp - lq);
        }
    }
    let n = pools.len() as f64;
    Ok((mean_reward / n, mean_kl / n))
}

/// Trains a selection policy against a frozen reward model.
///
/// Full-batch Adam steps, one per epoch for the exact objective; the clipped
/// variant refreshes its old-policy snapshot each epoch and takes a few
/// inner steps against it. Deterministic given `config.seed` and `init_seed`.
pub fn train_policy(
    pools: &[CandidatePool],
    reward: &RewardNet,
    hidden: &[usize],
    activation: Activation,
    config: &PolicyOptConfig,
    init_seed: u64,
) -> Result<PolicyTrainOutcome> {
    config.validate()?;
    if pools.is_empty() {
        return Err(Error::Validation("no pools".into()));
    }
    for pool in pools {
        pool.validate(reward.schema())?;
    }
    let started = std::time::Instant::now();
    let mut policy = PolicySelector::new(reward.schema().clone(), hidden, activation, init_seed)?;
    let mut optimizer = AdamW::new(policy.net.param_count(), 0.0);
    let mut epochs = Vec::with_capacity(config.epochs);

    const CLIPPED_INNER_STEPS: usize = 4;
    for epoch in 0..config.epochs {
        let objective = match config.variant {
            ObjectiveVariant::ExactExpectation => {
                let (objective, grads) =
                    policy_objective_grad(&policy, pools, reward, config.beta)?;
                if !objective.is_finite() {
                    return Err(Error::Numeric(format!(
                        "policy training diverged at epoch {epoch}: objective {objective}"
                    )));
                }
                optimizer.step(policy.net.params_mut(), &grads, config.learning_rate);
                objective
            }
            ObjectiveVariant::ClippedRatio { epsilon } => {
                let snapshot = policy.clone();
                for _ in 0..CLIPPED_INNER_STEPS {
                    let grads = clipped_surrogate_grad(
                        &policy,
                        &snapshot,
                        pools,
                        reward,
                        config.beta,
                        epsilon,
                    )?;
                    optimizer.step(policy.net.params_mut(), &grads, config.learning_rate);
                }
                let objective = policy_objective(&policy, pools, reward, config.beta)?;
                if !objective.is_finite() {
                    return Err(Error::Numeric(format!(
                        "policy training diverged at epoch {epoch}: objective {objective}"
                    )));
                }
                objective
            }
        };
        let (mean_reward, mean_kl) = policy_diagnostics(&policy, pools, reward)?;
        epochs.push(PolicyEpochStats {
            epoch,
            objective,
            mean_reward,
            mean_kl,
        });
    }

    Ok(PolicyTrainOutcome {
        policy,
        report: PolicyTrainReport {
            epochs,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    })
}

/// Gradient of the clipped-ratio surrogate against a frozen snapshot.
///
/// The KL-penalized reward `r - beta log(pi_old/q)` is centered per pool to
/// form advantages; the expectation is taken under the snapshot policy.
fn clipped_surrogate_grad(
    policy: &PolicySelector,
    old: &PolicySelector,
    pools: &[CandidatePool],
    reward: &RewardNet,
    beta: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let n_pools = pools.len() as f64;
    let mut grads = vec![0.0; policy.net.param_count()];
    let mut trace = Trace::default();
    for pool in pools {
        let rewards = pool_rewards(reward, pool)?;
        let log_q = log_softmax(
            &pool
                .candidates
                .iter()
                .map(|c| c.sft_logprob)
                .collect::<Vec<_>>(),
        );
        let inputs: Vec<Vec<f64>> = pool
            .candidates
            .iter()
            .map(|c| policy.schema.normalize(c.features.values()))
            .collect();
        let log_pi_old = log_softmax(&old.logits(pool));
        let pi_old: Vec<f64> = log_pi_old.iter().map(|lp| lp.exp()).collect();
        let penalized: Vec<f64> = (0..pi_old.len())
            .map(|s| rewards[s] - beta * (log_pi_old[s] - log_q[s]))
            .collect();
        let mean = penalized.iter().sum::<f64>() / penalized.len() as f64;
        let adv: Vec<f64> = penalized.iter().map(|r| r - mean).collect();

        let logits: Vec<f64> = inputs.iter().map(|x| policy.net.forward(x)).collect();
        let log_pi = log_softmax(&logits);
        let pi: Vec<f64> = log_pi.iter().map(|lp| lp.exp()).collect();
        let ratio: Vec<f64> = (0..pi.len())
            .map(|s| (log_pi[s] - log_pi_old[s]).exp())
            .collect();

        // d(surrogate)/d(ratio_s): advantage when the unclipped branch is
        // the minimum, zero once clipping is strictly active.
        let mut dval_drho = vec![0.0; pi.len()];
        for s in 0..pi.len() {
            let unclipped = ratio[s] * adv[s];
            let clipped = ratio[s].clamp(1.0 - epsilon, 1.0 + epsilon) * adv[s];
            if unclipped <= clipped {
                dval_drho[s] = adv[s];
            }
        }
        // dL/dz_k = -sum_s pi_old_s * dval_s/drho_s * rho_s * (delta_sk - pi_k)
        for k in 0..pi.len() {
            let mut upstream = 0.0;
            for s in 0..pi.len() {
                let indicator = if s == k { 1.0 } else { 0.0 };
                upstream -= pi_old[s] * dval_drho[s] * ratio[s] * (indicator - pi[k]);
            }
            upstream /= n_pools;
            policy.net.forward_traced(&inputs[k], &mut trace);
            policy.net.backward(&trace, upstream, &mut grads);
        }
    }
    Ok(grads)
}
