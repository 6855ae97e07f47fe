//! Self-describing JSON checkpoints for reward models and policies.

use crate::error::{Error, Result};
use crate::net::{Activation, Mlp};
use crate::policy::{ObjectiveVariant, PolicySelector};
use crate::reward::{RewardNet, TrainConfig};
use crate::schema::FeatureSchema;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const REWARD_FORMAT: &str = "featrm.reward.v1";
pub const POLICY_FORMAT: &str = "featrm.policy.v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardCheckpoint {
    pub format: String,
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    /// Flattened parameters: per layer, row-major weights then biases.
    pub params: Vec<f64>,
    pub schema: FeatureSchema,
    pub schema_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
}

pub fn save_reward_checkpoint(
    path: &Path,
    model: &RewardNet,
    train_config: Option<&TrainConfig>,
) -> Result<()> {
    let ckpt = RewardCheckpoint {
        format: REWARD_FORMAT.to_string(),
        layer_dims: model.net().dims().to_vec(),
        activation: model.net().activation(),
        params: model.net().params().to_vec(),
        schema: model.schema().clone(),
        schema_fingerprint: model.schema().fingerprint(),
        train_config: train_config.cloned(),
    };
    let text = serde_json::to_string(&ckpt).expect("checkpoint serializes");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_reward_checkpoint(path: &Path) -> Result<(RewardNet, Option<TrainConfig>)> {
    let text = std::fs::read_to_string(path)?;
    let ckpt: RewardCheckpoint = serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("checkpoint {}: {e}", path.display())))?;
    if ckpt.format != REWARD_FORMAT {
        return Err(Error::Validation(format!(
            "unsupported checkpoint format '{}'",
            ckpt.format
        )));
    }
    if ckpt.schema.fingerprint() != ckpt.schema_fingerprint {
        return Err(Error::Validation(
            "schema fingerprint mismatch: checkpoint is corrupt or edited".into(),
        ));
    }
    let net = Mlp::from_params(&ckpt.layer_dims, ckpt.activation, ckpt.params)?;
    Ok((RewardNet::from_parts(ckpt.schema, net)?, ckpt.train_config))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub format: String,
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
    pub schema: FeatureSchema,
    pub schema_fingerprint: String,
    pub beta: f64,
    pub objective_variant: ObjectiveVariant,
}

pub fn save_policy_checkpoint(
    path: &Path,
    policy: &PolicySelector,
    beta: f64,
    variant: &ObjectiveVariant,
) -> Result<()> {
    let ckpt = PolicyCheckpoint {
        format: POLICY_FORMAT.to_string(),
        layer_dims: policy.net().dims().to_vec(),
        activation: policy.net().activation(),
        params: policy.net().params().to_vec(),
        schema: policy.schema().clone(),
        schema_fingerprint: policy.schema().fingerprint(),
        beta,
        objective_variant: variant.clone(),
    };
    let text = serde_json::to_string(&ckpt).expect("checkpoint serializes");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_policy_checkpoint(path: &Path) -> Result<(PolicySelector, f64, ObjectiveVariant)> {
    let text = std::fs::read_to_string(path)?;
    let ckpt: PolicyCheckpoint = serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("checkpoint {}: {e}", path.display())))?;
    if ckpt.format != POLICY_FORMAT {
        return Err(Error::Validation(format!(
            "unsupported checkpoint format '{}'",
            ckpt.format
        )));
    }
    if ckpt.schema.fingerprint() != ckpt.schema_fingerprint {
        return Err(Error::Validation(
            "schema fingerprint mismatch: checkpoint is corrupt or edited".into(),
        ));
    }
    let net = Mlp::from_params(&ckpt.layer_dims, ckpt.activation, ckpt.params)?;
    Ok((
        PolicySelector::from_parts(ckpt.schema, net)?,
        ckpt.beta,
        ckpt.objective_variant,
    ))
}
