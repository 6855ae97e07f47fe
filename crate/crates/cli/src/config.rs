//! Optional config file with per-command sections. Precedence is
//! flags > config file > built-in defaults.

use anyhow::{Context, Result};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub train_reward: TrainRewardSection,
    #[serde(default)]
    pub train_policy: TrainPolicySection,
    #[serde(default)]
    pub influence: InfluenceSection,
    #[serde(default)]
    pub score: ScoreSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRewardSection {
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub warmup_fraction: Option<f64>,
    pub total_epochs: Option<usize>,
    pub seed: Option<u64>,
    pub holdout_fraction: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub activation: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainPolicySection {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub hidden: Option<Vec<usize>>,
    pub activation: Option<String>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfluenceSection {
    pub delta: Option<f64>,
    pub sample_count: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSection {
    pub endpoint: Option<String>,
    pub cache: Option<String>,
    pub retries: Option<usize>,
    pub threads: Option<usize>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("file not found: {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("invalid config file {}", path.display()))
        }
    }
}
