//! Subcommand implementations.

use crate::annotate::{load_items, run_annotation, AnnotateOptions};
use crate::config::FileConfig;
use crate::manifest::ManifestBuilder;
use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use featrm_core::baselines::{
    derive_implicit_pairs, naive_mean_reward, ImplicitPairPolicy, Pairing,
};
use featrm_core::checkpoint::{
    load_policy_checkpoint, load_reward_checkpoint, save_policy_checkpoint, save_reward_checkpoint,
};
use featrm_core::eval::{feature_gap_report, fleiss_kappa, pairwise_wtl};
use featrm_core::influence::{feature_influence, InfluenceConfig, Sampling};
use featrm_core::io::{
    load_candidate_pools, load_preference_dataset, load_ranking_records, save_candidate_pools,
    save_preference_dataset,
};
use featrm_core::net::Activation;
use featrm_core::policy::{
    policy_diagnostics, policy_distribution, train_policy, ObjectiveVariant, PolicyOptConfig,
};
use featrm_core::records::{CandidatePool, PoolCandidate, QualityTier};
use featrm_core::reward::{elo_loss, preference_accuracy, train_reward, TrainConfig};
use featrm_core::schema::FeatureSchema;
use featrm_core::scorer::{default_templates, Backend, HttpTransport, Scorer, ScorerConfig};
use featrm_core::synth::{
    gen_candidate_pools, sample_preferences, LatentKind, LatentOracle, LatentRewardSpec,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub struct CommandContext {
    pub argv: Vec<String>,
    pub schema: FeatureSchema,
    pub file_config: FileConfig,
    pub print_config: bool,
}

impl CommandContext {
    /// When `--print-config` is set, dumps the effective config and tells
    /// the caller to stop without executing.
    fn maybe_print_config<T: Serialize>(&self, effective: &T) -> Result<bool> {
        if self.print_config {
            println!("{}", serde_json::to_string_pretty(effective)?);
        }
        Ok(self.print_config)
    }
}

fn parse_hidden(raw: &str) -> Result<Vec<usize>> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| featrm_core::Error::Config(format!("bad hidden dims '{raw}'")).into())
        })
        .collect()
}

fn parse_activation(raw: &str) -> Result<Activation> {
    match raw.to_ascii_lowercase().as_str() {
        "tanh" => Ok(Activation::Tanh),
        "relu" => Ok(Activation::Relu),
        other => Err(featrm_core::Error::Config(format!("unknown activation '{other}'")).into()),
    }
}

// ---------------------------------------------------------------------------
// synth-gen
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SynthGenArgs {
    /// Number of preference pairs to generate.
    #[arg(long, conflicts_with = "pools")]
    pub pairs: Option<usize>,
    /// Number of candidate pools to generate.
    #[arg(long)]
    pub pools: Option<usize>,
    /// Candidates per quality tier in each pool.
    #[arg(long, default_value_t = 3)]
    pub per_tier: usize,
    /// Bradley-Terry noise temperature (0 = noiseless labels).
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    /// Latent reward: "linear:uniform", "linear:w1,...,wn", or "mlp:h1,h2@seed".
    #[arg(long, default_value = "linear:uniform")]
    pub latent: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSONL path; a .latent.json sidecar and a manifest are written
    /// next to it.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_latent(raw: &str, temperature: f64, schema: &FeatureSchema) -> Result<LatentRewardSpec> {
    let (kind, rest) = raw.split_once(':').ok_or_else(|| {
        anyhow!(featrm_core::Error::Config(format!(
            "bad latent spec '{raw}'"
        )))
    })?;
    let kind = match kind {
        "linear" => {
            let weights = if rest == "uniform" {
                vec![1.0 / schema.len() as f64; schema.len()]
            } else {
                rest.split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| {
                        anyhow!(featrm_core::Error::Config(format!(
                            "bad latent weights '{rest}'"
                        )))
                    })?
            };
            LatentKind::Linear { weights }
        }
        "mlp" => {
            let (dims, seed) = rest.split_once('@').ok_or_else(|| {
                anyhow!(featrm_core::Error::Config(format!(
                    "mlp latent needs 'mlp:h1,h2@seed', got '{raw}'"
                )))
            })?;
            LatentKind::RandomMlp {
                hidden_dims: parse_hidden(dims)?,
                seed: seed.parse().map_err(|_| {
                    anyhow!(featrm_core::Error::Config(format!(
                        "bad latent seed '{seed}'"
                    )))
                })?,
            }
        }
        other => {
            bail!(featrm_core::Error::Config(format!(
                "unknown latent kind '{other}'"
            )))
        }
    };
    let spec = LatentRewardSpec {
        kind,
        noise_temperature: temperature,
    };
    spec.validate(schema)?;
    Ok(spec)
}

pub fn synth_gen(ctx: &CommandContext, args: &SynthGenArgs) -> Result<()> {
    let spec = parse_latent(&args.latent, args.temperature, &ctx.schema)?;
    #[derive(Serialize)]
    struct Effective<'a> {
        pairs: Option<usize>,
        pools: Option<usize>,
        per_tier: usize,
        seed: u64,
        latent: &'a LatentRewardSpec,
    }
    if ctx.maybe_print_config(&Effective {
        pairs: args.pairs,
        pools: args.pools,
        per_tier: args.per_tier,
        seed: args.seed,
        latent: &spec,
    })? {
        return Ok(());
    }

    let oracle = LatentOracle::new(spec.clone(), ctx.schema.clone())?;
    let mut manifest = ManifestBuilder::new(ctx.argv.clone());
    manifest.config(&spec).seed("seed", args.seed);

    match (args.pairs, args.pools) {
        (Some(n), None) => {
            let pairs = sample_preferences(&oracle, n, args.seed);
            save_preference_dataset(&args.out, &pairs)?;
            println!(
                "wrote {} preference pairs to {}",
                pairs.len(),
                args.out.display()
            );
        }
        (None, Some(n)) => {
            let pools = gen_candidate_pools(&oracle, n, args.per_tier, args.seed)?;
            save_candidate_pools(&args.out, &pools)?;
            println!(
                "wrote {} candidate pools to {}",
                pools.len(),
                args.out.display()
            );
        }
        _ => bail!(featrm_core::Error::Config(
            "exactly one of --pairs or --pools is required".into()
        )),
    }

    let sidecar = args.out.with_extension("latent.json");
    spec.save(&sidecar)?;
    manifest.output(&args.out).output(&sidecar);
    manifest.write()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// JSONL of contexts with candidate texts (see README for the schema).
    #[arg(long)]
    pub input: PathBuf,
    /// Output pool JSONL with computed feature vectors.
    #[arg(long)]
    pub out: PathBuf,
    /// Scoring backend.
    #[arg(long, default_value = "rule")]
    pub backend: String,
    /// Remote judge endpoint (required for --backend remote).
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Directory of per-feature prompt templates named `<feature>.txt`.
    #[arg(long)]
    pub templates_dir: Option<PathBuf>,
    /// Persistent score cache path.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Retries per remote call after the first attempt.
    #[arg(long)]
    pub retries: Option<usize>,
    /// Maximum concurrent scoring requests.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct RawCandidate {
    candidate_id: String,
    text: String,
    tier: QualityTier,
    #[serde(default)]
    sft_logprob: f64,
}

#[derive(Debug, Deserialize)]
struct RawPoolItem {
    context_id: String,
    context: String,
    candidates: Vec<RawCandidate>,
}

fn load_raw_pools(path: &Path) -> Result<Vec<RawPoolItem>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("file not found: {}", path.display()))?;
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: RawPoolItem = serde_json::from_str(line).map_err(|e| {
            anyhow!(featrm_core::Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })
        })?;
        items.push(item);
    }
    if items.is_empty() {
        bail!(featrm_core::Error::Parse {
            line: 0,
            message: "empty input".into()
        });
    }
    Ok(items)
}

pub fn score(ctx: &CommandContext, args: &ScoreArgs) -> Result<()> {
    let backend = match args.backend.to_ascii_lowercase().as_str() {
        "rule" | "rule-based" => Backend::RuleBased,
        "remote" => Backend::Remote,
        other => bail!(featrm_core::Error::Config(format!(
            "unknown backend '{other}'"
        ))),
    };
    let section = &ctx.file_config.score;
    let endpoint = args.endpoint.clone().or_else(|| section.endpoint.clone());
    let cache_path = args
        .cache
        .clone()
        .or_else(|| section.cache.as_ref().map(PathBuf::from));
    let retries = args.retries.or(section.retries).unwrap_or(2);
    let threads = args.threads.or(section.threads).unwrap_or(match backend {
        Backend::RuleBased => 1,
        Backend::Remote => 4,
    });

    let mut templates = default_templates(&ctx.schema);
    if let Some(dir) = &args.templates_dir {
        for (i, def) in ctx.schema.features().iter().enumerate() {
            let path = dir.join(format!("{}.txt", def.name));
            if path.exists() {
                templates[i] = std::fs::read_to_string(&path)?;
            }
        }
    }
    let config = ScorerConfig {
        backend,
        remote_endpoint: endpoint,
        prompt_templates: templates,
        cache_path,
        max_parallel_requests: threads.max(1),
        retry_limit: retries,
    };

    #[derive(Serialize)]
    struct Effective<'a> {
        backend: &'a str,
        endpoint: Option<&'a String>,
        cache: Option<&'a PathBuf>,
        retries: usize,
        threads: usize,
    }
    if ctx.maybe_print_config(&Effective {
        backend: &args.backend,
        endpoint: config.remote_endpoint.as_ref(),
        cache: config.cache_path.as_ref(),
        retries: config.retry_limit,
        threads: config.max_parallel_requests,
    })? {
        return Ok(());
    }

    let mut manifest = ManifestBuilder::new(ctx.argv.clone());
    manifest.input(&args.input)?;

    // Judge credentials come from the environment and are never logged.
    let token = std::env::var("FEATRM_JUDGE_TOKEN").ok();
    let transport = Arc::new(HttpTransport::default().with_bearer_token(token));
    let scorer = Scorer::with_transport(config, ctx.schema.clone(), transport)?;

    let raw = load_raw_pools(&args.input)?;
    let items: Vec<(String, String)> = raw
        .iter()
        .flat_map(|pool| {
            pool.candidates
                .iter()
                .map(|c| (pool.context.clone(), c.text.clone()))
        })
        .collect();
    let vectors = scorer.score_batch(&items)?;

    let mut cursor = 0;
    let mut pools = Vec::with_capacity(raw.len());
    for item in &raw {
        let candidates = item
            .candidates
            .iter()
            .map(|c| {
                let features = vectors[cursor].clone();
                cursor += 1;
                PoolCandidate {
                    candidate_id: c.candidate_id.clone(),
                    tier: c.tier,
                    features,
                    sft_logprob: c.sft_logprob,
                }
            })
            .collect();
        let pool = CandidatePool {
            context_id: item.context_id.clone(),
            candidates,
        };
        pool.validate(&ctx.schema)?;
        pools.push(pool);
    }
    save_candidate_pools(&args.out, &pools)?;
    println!(
        "scored {} candidates across {} pools -> {}",
        items.len(),
        pools.len(),
        args.out.display()
    );
    manifest.output(&args.out);
    manifest.write()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// train-reward / eval-reward
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TrainRewardArgs {
    /// Preference dataset (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch metrics CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Hidden layer widths, comma separated (empty for linear).
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub warmup: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Shuffle/split seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parameter initialization seed.
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
    #[arg(long)]
    pub holdout: Option<f64>,
}

#[derive(Serialize)]
struct EffectiveTrainReward {
    #[serde(flatten)]
    config: TrainConfig,
    hidden: Vec<usize>,
    activation: Activation,
    init_seed: u64,
}

fn effective_train_reward(
    ctx: &CommandContext,
    args: &TrainRewardArgs,
) -> Result<EffectiveTrainReward> {
    let defaults = TrainConfig::default();
    let section = &ctx.file_config.train_reward;
    let config = TrainConfig {
        batch_size: args
            .batch_size
            .or(section.batch_size)
            .unwrap_or(defaults.batch_size),
        learning_rate: args
            .lr
            .or(section.learning_rate)
            .unwrap_or(defaults.learning_rate),
        weight_decay: args
            .weight_decay
            .or(section.weight_decay)
            .unwrap_or(defaults.weight_decay),
        warmup_fraction: args
            .warmup
            .or(section.warmup_fraction)
            .unwrap_or(defaults.warmup_fraction),
        total_epochs: args
            .epochs
            .or(section.total_epochs)
            .unwrap_or(defaults.total_epochs),
        seed: args.seed.or(section.seed).unwrap_or(defaults.seed),
        holdout_fraction: args
            .holdout
            .or(section.holdout_fraction)
            .unwrap_or(defaults.holdout_fraction),
    };
    let hidden = match &args.hidden {
        Some(raw) => parse_hidden(raw)?,
        None => section
            .hidden
            .clone()
            .unwrap_or_else(|| featrm_core::reward::DEFAULT_HIDDEN_DIMS.to_vec()),
    };
    let activation = match &args.activation {
        Some(raw) => parse_activation(raw)?,
        None => match &section.activation {
            Some(raw) => parse_activation(raw)?,
            None => Activation::Tanh,
        },
    };
    Ok(EffectiveTrainReward {
        config,
        hidden,
        activation,
        init_seed: args.init_seed,
    })
}

pub fn train_reward_cmd(ctx: &CommandContext, args: &TrainRewardArgs) -> Result<()> {
    let effective = effective_train_reward(ctx, args)?;
    if ctx.maybe_print_config(&effective)? {
        return Ok(());
    }
    let mut manifest = ManifestBuilder::new(ctx.argv.clone());
    manifest
        .input(&args.data)?
        .config(&effective)
        .seed("seed", effective.config.seed)
        .seed("init_seed", effective.init_seed);

    let dataset = load_preference_dataset(&args.data, &ctx.schema)?;
    println!(
        "loaded {} preference pairs from {}",
        dataset.len(),
        args.data.display()
    );
    let outcome = train_reward(
        &dataset,
        &ctx.schema,
        &effective.hidden,
        effective.activation,
        &effective.config,
        effective.init_seed,
    )?;
    save_reward_checkpoint(&args.out, &outcome.model, Some(&effective.config))?;
    manifest.output(&args.out);

    let last = outcome.report.epochs.last().expect("at least one epoch");
    println!(
        "trained {} epochs on {} pairs ({} held out): final train loss {:.6}",
        effective.config.total_epochs,
        outcome.report.train_size,
        outcome.report.holdout_size,
        last.train_loss
    );
    if let (Some(loss), Some(acc)) = (last.holdout_loss, last.holdout_accuracy) {
        println!("holdout loss {loss:.6}, holdout preference accuracy {acc:.4}");
    }
    if let Some(report_path) = &args.report {
        std::fs::write(report_path, outcome.report.to_csv())?;
        manifest.output(report_path);
    }
    println!("checkpoint written to {}", args.out.display());
    manifest.write()?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalRewardArgs {
    /// Reward checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Preference dataset to evaluate on.
    #[arg(long)]
    pub data: PathBuf,
    /// Also report the naive feature-mean baseline on the same data.
    #[arg(long, default_value_t = false)]
    pub with_naive_mean: bool,
}

pub fn eval_reward_cmd(ctx: &CommandContext, args: &EvalRewardArgs) -> Result<()> {
    if ctx.maybe_print_config(&serde_json::json!({
        "model": args.model.display().to_string(),
        "data": args.data.display().to_string(),
    }))? {
        return Ok(());
    }
    let (model, _) = load_reward_checkpoint(&args.model)?;
    if model.schema() != &ctx.schema && ctx.schema != FeatureSchema::default() {
        bail!(featrm_core::Error::Validation(
            "checkpoint schema differs from --schema".into()
        ));
    }
    let dataset = load_preference_dataset(&args.data, model.schema())?;
    let loss = elo_loss(&model, &dataset)?;
    let accuracy = preference_accuracy(&model, &dataset)?;
    println!("pairs: {}", dataset.len());
    println!("mean preference loss: {loss:.6}");
    println!("preference accuracy: {accuracy:.4}");
    if args.with_naive_mean {
        let mut score = 0.0;
        for pair in &dataset {
            let w = naive_mean_reward(&pair.winner_features, model.schema())?;
            let l = naive_mean_reward(&pair.loser_features, model.schema())?;
            if w > l {
                score += 1.0;
            } else if w == l {
                score += 0.5;
            }
        }
        println!(
            "naive feature-mean accuracy: {:.4}",
            score / dataset.len() as f64
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze-influence
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct InfluenceArgs {
    /// Reward checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Use a full grid with this many points per axis instead of sampling.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn analyze_influence(ctx: &CommandContext, args: &InfluenceArgs) -> Result<()> {
    let section = &ctx.file_config.influence;
    let defaults = InfluenceConfig::default();
    let config = InfluenceConfig {
        delta: args.delta.or(section.delta).unwrap_or(defaults.delta),
        sample_count: args
            .samples
            .or(section.sample_count)
            .unwrap_or(defaults.sample_count),
        sampling: match args.grid {
            Some(points_per_axis) => Sampling::FullGrid { points_per_axis },
            None => Sampling::MonteCarloUniform,
        },
        seed: args.seed.or(section.seed).unwrap_or(defaults.seed),
    };
    if ctx.maybe_print_config(&config)? {
        return Ok(());
    }
    let (model, _) = load_reward_checkpoint(&args.model)?;
    let report = feature_influence(&model, &config)?;

    let names: Vec<String> = model
        .schema()
        .features()
        .iter()
        .map(|f| f.name.clone())
        .collect();
    let width = names.iter().map(String::len).max().unwrap_or(0);
    println!(
        "feature influence over {} evaluation points:",
        report.sample_count
    );
    let max_abs = report
        .normalized
        .iter()
        .map(|v| v.abs())
        .fold(f64::EPSILON, f64::max);
    for (name, share) in names.iter().zip(&report.normalized) {
        let bar_len = (share.abs() / max_abs * 40.0).round() as usize;
        let bar = "#".repeat(bar_len);
        let sign = if *share < 0.0 { "-" } else { " " };
        println!("{name:width$} {sign}{share:7.4} {bar}");
    }

    if let Some(out) = &args.out {
        let mut manifest = ManifestBuilder::new(ctx.argv.clone());
        manifest
            .input(&args.model)?
            .config(&config)
            .seed("seed", config.seed)
            .output(out);
        std::fs::write(out, report.to_csv(&names))?;
        manifest.write()?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// derive-implicit
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct DeriveImplicitArgs {
    /// Candidate pool JSONL.
    #[arg(long)]
    pub pools: PathBuf,
    /// Output preference JSONL.
    #[arg(long)]
    pub out: PathBuf,
    /// Pairing mode: all | adjacent.
    #[arg(long, default_value = "all")]
    pub pairing: String,
    #[arg(long)]
    pub max_pairs_per_pool: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn derive_implicit(ctx: &CommandContext, args: &DeriveImplicitArgs) -> Result<()> {
    let pairing = match args.pairing.to_ascii_lowercase().as_str() {
        "all" | "all-cross-tier" => Pairing::AllCrossTier,
        "adjacent" | "adjacent-tier-only" => Pairing::AdjacentTierOnly,
        other => bail!(featrm_core::Error::Config(format!(
            "unknown pairing '{other}'"
        ))),
    };
    let policy = ImplicitPairPolicy {
        pairing,
        max_pairs_per_pool: args.max_pairs_per_pool,
        seed: args.seed,
    };
    if ctx.maybe_print_config(&policy)? {
        return Ok(());
    }
    let mut manifest = ManifestBuilder::new(ctx.argv.clone());
    manifest
        .input(&args.pools)?
        .config(&policy)
        .seed("seed", args.seed);
    let pools = load_candidate_pools(&args.pools, &ctx.schema)?;
    let pairs = derive_implicit_pairs(&pools, &policy);
    save_preference_dataset(&args.out, &pairs)?;
    println!(
        "derived {} implicit pairs from {} pools -> {}",
        pairs.len(),
        pools.len(),
        args.out.display()
    );
    manifest.output(&args.out);
    manifest.write()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// train-policy / eval-policy
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TrainPolicyArgs {
    /// Candidate pool JSONL (the offline buffer).
    #[arg(long)]
    pub pools: PathBuf,
    /// Frozen reward checkpoint.
    #[arg(long)]
    pub reward_model: PathBuf,
    /// KL penalty coefficient (no default: choose deliberately).
    #[arg(long)]
    pub beta: f64,
    /// Policy checkpoint output.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch metrics CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub activation: Option<String>,
    /// Objective: exact | clipped.
    #[arg(long, default_value = "exact")]
    pub variant: String,
    /// Clipping width for --variant clipped.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

pub fn train_policy_cmd(ctx: &CommandContext, args: &TrainPolicyArgs) -> Result<()> {
    let section = &ctx.file_config.train_policy;
    let defaults = PolicyOptConfig::default();
    let variant = match args.variant.to_ascii_lowercase().as_str() {
        "exact" | "exact-expectation" => ObjectiveVariant::ExactExpectation,
        "clipped" | "clipped-ratio" => ObjectiveVariant::ClippedRatio {
            epsilon: args.epsilon.or(section.epsilon).unwrap_or(0.2),
        },
        other => bail!(featrm_core::Error::Config(format!(
            "unknown objective variant '{other}'"
        ))),
    };
    let config = PolicyOptConfig {
        beta: args.beta,
        learning_rate: args
            .lr
            .or(section.learning_rate)
            .unwrap_or(defaults.learning_rate),
        epochs: args.epochs.or(section.epochs).unwrap_or(defaults.epochs),
        seed: args.seed.or(section.seed).unwrap_or(defaults.seed),
        variant,
    };
    let hidden = match &args.hidden {
        Some(raw) => parse_hidden(raw)?,
        None => section
            .hidden
            .clone()
            .unwrap_or_else(|| featrm_core::policy::DEFAULT_HIDDEN_DIMS.to_vec()),
    };
    let activation = match &args.activation {
        Some(raw) => parse_activation(raw)?,
        None => match &section.activation {
            Some(raw) => parse_activation(raw)?,
            None => Activation::Tanh,
        },
    };
    #[derive(Serialize)]
    struct Effective {
        #[serde(flatten)]
        config: PolicyOptConfig,
        hidden: Vec<usize>,
        activation: Activation,
        init_seed: u64,
    }
    let effective = Effective {
        config: config.clone(),
        hidden: hidden.clone(),
        activation,
        init_seed: args.init_seed,
    };
    if ctx.maybe_print_config(&effective)? {
        return Ok(());
    }

    let mut manifest = ManifestBuilder::new(ctx.argv.clone());
    manifest
        .input(&args.pools)?
        .input(&args.reward_model)?
        .config(&effective)
        .seed("seed", config.seed)
        .seed("init_seed", args.init_seed);

    let (reward, _) = load_reward_checkpoint(&args.reward_model)?;
    let pools = load_candidate_pools(&args.pools, reward.schema())?;
    let outcome = train_policy(
        &pools,
        &reward,
        &hidden,
        activation,
        &config,
        args.init_seed,
    )?;
    save_policy_checkpoint(&args.out, &outcome.policy, config.beta, &config.variant)?;
    manifest.output(&args.out);

    let last = outcome.report.epochs.last().expect("at least one epoch");
    println!(
        "trained policy for {} epochs over {} pools (beta {})",
        config.epochs,
        pools.len(),
        config.beta
    );
    println!(
        "final objective {:.6}, mean reward {:.4}, mean KL {:.6}",
        last.objective, last.mean_reward, last.mean_kl
    );
    if let Some(report_path) = &args.report {
        std::fs::write(report_path, outcome.report.to_csv())?;
        manifest.output(report_path);
    }
    println!("policy checkpoint written to {}", args.out.display());
    manifest.write()?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalPolicyArgs {
    /// Policy checkpoint.
    #[arg(long)]
    pub policy: PathBuf,
    /// Candidate pool JSONL.
    #[arg(long)]
    pub pools: PathBuf,
    /// Reward checkpoint used for scoring.
    #[arg(long)]
    pub reward_model: PathBuf,
}

pub fn eval_policy_cmd(ctx: &CommandContext, args: &EvalPolicyArgs) -> Result<()> {
    if ctx.maybe_print_config(&serde_json::json!({
        "policy": args.policy.display().to_string(),
        "pools": args.pools.display().to_string(),
        "reward_model": args.reward_model.display().to_string(),
    }))? {
        return Ok(());
    }
    let (policy, beta, variant) = load_policy_checkpoint(&args.policy)?;
    let (reward, _) = load_reward_checkpoint(&args.reward_model)?;
    let pools = load_candidate_pools(&args.pools, reward.schema())?;
    let (mean_reward, mean_kl) = policy_diagnostics(&policy, &pools, &reward)?;

    // How much probability the policy puts on each pool's best candidate.
    let mut argmax_mass = 0.0;
    for pool in &pools {
        let rewards: Vec<f64> = pool
            .candidates
            .iter()
            .map(|c| reward.forward(&c.features))
            .collect::<featrm_core::Result<_>>()?;
        let best = rewards
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite rewards"))
            .map(|(i, _)| i)
            .expect("non-empty pool");
        argmax_mass += policy_distribution(&policy, pool)?[best];
    }
    println!("pools: {}", pools.len());
    println!("trained with beta {beta}, variant {variant:?}");
    println!("mean reward under policy: {mean_reward:.4}");
    println!("mean KL(policy || reference): {mean_kl:.6}");
    println!(
        "mean probability on argmax-reward candidate: {:.4}",
        argmax_mass / pools.len() as f64
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// wtl / kappa / feature-gap
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct WtlArgs {
    /// Rankings JSONL.
    #[arg(long)]
    pub rankings: PathBuf,
    /// Optional CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn wtl_cmd(ctx: &CommandContext, args: &WtlArgs) -> Result<()> {
    if ctx.maybe_print_config(&serde_json::json!({
        "rankings": args.rankings.display().to_string()
    }))? {
        return Ok(());
    }
    let records = load_ranking_records(&args.rankings)?;
    let matrix = pairwise_wtl(&records)?;
    println!(
        "win/tie/loss fractions over {} records (row vs column):",
        records.len()
    );
    print!("{}", matrix.to_text_table());
    if let Some(out) = &args.out {
        let mut manifest = ManifestBuilder::new(ctx.argv.clone());
        manifest.input(&args.rankings)?.output(out);
        std::fs::write(out, matrix.to_csv())?;
        manifest.write()?;
        println!("matrix written to {}", out.display());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    /// CSV of per-item category counts (rows = items, columns = categories).
    #[arg(long)]
    pub table: PathBuf,
}

pub fn kappa_cmd(ctx: &CommandContext, args: &KappaArgs) -> Result<()> {
    if ctx.maybe_print_config(&serde_json::json!({
        "table": args.table.display().to_string()
    }))? {
        return Ok(());
    }
    let text = std::fs::read_to_string(&args.table)
        .with_context(|| format!("file not found: {}", args.table.display()))?;
    let mut table: Vec<Vec<u64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<u64> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<u64>().map_err(|_| {
                    anyhow!(featrm_core::Error::Parse {
                        line: idx + 1,
                        message: format!("bad count '{}'", cell.trim()),
                    })
                })
            })
            .collect::<Result<_>>()?;
        table.push(row);
    }
    let kappa = fleiss_kappa(&table)?;
    println!("items: {}", table.len());
    println!("raters per item: {}", table[0].iter().sum::<u64>());
    println!("fleiss kappa: {kappa:.6}");
    Ok(())
}

#[derive(Debug, Args)]
pub struct FeatureGapArgs {
    /// Preference dataset (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    /// Optional CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn feature_gap_cmd(ctx: &CommandContext, args: &FeatureGapArgs) -> Result<()> {
    if ctx.maybe_print_config(&serde_json::json!({
        "data": args.data.display().to_string()
    }))? {
        return Ok(());
    }
    let dataset = load_preference_dataset(&args.data, &ctx.schema)?;
    let report = feature_gap_report(&dataset)?;
    let names: Vec<String> = ctx
        .schema
        .features()
        .iter()
        .map(|f| f.name.clone())
        .collect();
    let width = names.iter().map(String::len).max().unwrap_or(0);
    println!("{:width$}  winner_mean  loser_mean   gap", "feature");
    for (i, name) in names.iter().enumerate() {
        println!(
            "{name:width$}  {:>11.4}  {:>10.4}  {:>+6.4}",
            report.winner_mean[i],
            report.loser_mean[i],
            report.winner_mean[i] - report.loser_mean[i]
        );
    }
    if let Some(out) = &args.out {
        let mut manifest = ManifestBuilder::new(ctx.argv.clone());
        manifest.input(&args.data)?.output(out);
        std::fs::write(out, report.to_csv(&names))?;
        manifest.write()?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// annotate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// JSONL of contexts with two candidates each (see README).
    #[arg(long)]
    pub source: PathBuf,
    /// Preference JSONL to append to (resumable).
    #[arg(long)]
    pub out: PathBuf,
    /// Annotator identifier stored in each record.
    #[arg(long)]
    pub annotator: String,
    /// Seed for the A/B presentation order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scripted answers (comma separated a|b|skip|quit); test hook for
    /// non-interactive runs.
    #[arg(long)]
    pub batch_answers: Option<String>,
}

pub fn annotate_cmd(ctx: &CommandContext, args: &AnnotateArgs) -> Result<()> {
    if ctx.maybe_print_config(&serde_json::json!({
        "source": args.source.display().to_string(),
        "annotator": args.annotator,
        "seed": args.seed,
    }))? {
        return Ok(());
    }
    let items = load_items(&args.source, &ctx.schema)?;
    let options = AnnotateOptions {
        annotator_id: args.annotator.clone(),
        seed: args.seed,
        batch_answers: args
            .batch_answers
            .as_ref()
            .map(|raw| raw.split(',').map(|s| s.trim().to_string()).collect()),
    };
    let summary = run_annotation(&items, &args.out, &options)?;
    let mut manifest = ManifestBuilder::new(ctx.argv.clone());
    manifest
        .input(&args.source)?
        .seed("seed", args.seed)
        .config(&serde_json::json!({
            "annotator": args.annotator,
            "recorded": summary.recorded,
            "skipped": summary.skipped,
        }))
        .output(&args.out);
    manifest.write()?;
    Ok(())
}
