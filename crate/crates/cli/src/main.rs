//! `featrm` command line: synthetic data generation, feature scoring,
//! reward-model training and analysis, offline policy optimization, and
//! evaluation utilities.

mod annotate;
mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};
use commands::*;
use featrm_core::schema::FeatureSchema;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_REMOTE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "featrm",
    version,
    about = "Feature-based reward modeling and offline policy optimization",
    propagate_version = true
)]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Feature schema file (defaults to the built-in 7-feature schema).
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// Print the effective configuration and exit without running.
    #[arg(long, global = true, default_value_t = false)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic preference pairs or candidate pools from a known
    /// latent reward.
    SynthGen(SynthGenArgs),
    /// Compute feature vectors for candidate texts (rule-based or remote
    /// judge).
    Score(ScoreArgs),
    /// Train a reward model on pairwise preferences.
    TrainReward(TrainRewardArgs),
    /// Evaluate a reward checkpoint on a preference dataset.
    EvalReward(EvalRewardArgs),
    /// Per-feature influence of a trained reward model.
    AnalyzeInfluence(InfluenceArgs),
    /// Derive implicit preference pairs from quality tiers.
    DeriveImplicit(DeriveImplicitArgs),
    /// Train a candidate-selection policy against a frozen reward model.
    TrainPolicy(TrainPolicyArgs),
    /// Evaluate a policy checkpoint over candidate pools.
    EvalPolicy(EvalPolicyArgs),
    /// Pairwise win/tie/loss matrix from ranking records.
    Wtl(WtlArgs),
    /// Fleiss' kappa over an item-by-category count table.
    Kappa(KappaArgs),
    /// Winner-vs-loser feature means over a preference dataset.
    FeatureGap(FeatureGapArgs),
    /// Interactively annotate pairwise preferences.
    Annotate(AnnotateArgs),
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path with code 0.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(EXIT_USAGE);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<featrm_core::Error>() {
            return match core {
                featrm_core::Error::Config(_) => EXIT_USAGE,
                featrm_core::Error::Validation(_)
                | featrm_core::Error::Parse { .. }
                | featrm_core::Error::Io(_) => EXIT_DATA,
                featrm_core::Error::Numeric(_) => EXIT_NUMERIC,
                featrm_core::Error::Remote(_) => EXIT_REMOTE,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_DATA;
        }
    }
    EXIT_DATA
}

fn run(cli: Cli, argv: Vec<String>) -> anyhow::Result<()> {
    let schema = match &cli.schema {
        Some(path) => FeatureSchema::load(path)?,
        None => FeatureSchema::default(),
    };
    let file_config = config::load_file_config(cli.config.as_deref())?;
    let ctx = CommandContext {
        argv: argv.into_iter().skip(1).collect(),
        schema,
        file_config,
        print_config: cli.print_config,
    };
    match &cli.command {
        Command::SynthGen(args) => synth_gen(&ctx, args),
        Command::Score(args) => score(&ctx, args),
        Command::TrainReward(args) => train_reward_cmd(&ctx, args),
        Command::EvalReward(args) => eval_reward_cmd(&ctx, args),
        Command::AnalyzeInfluence(args) => analyze_influence(&ctx, args),
        Command::DeriveImplicit(args) => derive_implicit(&ctx, args),
        Command::TrainPolicy(args) => train_policy_cmd(&ctx, args),
        Command::EvalPolicy(args) => eval_policy_cmd(&ctx, args),
        Command::Wtl(args) => wtl_cmd(&ctx, args),
        Command::Kappa(args) => kappa_cmd(&ctx, args),
        Command::FeatureGap(args) => feature_gap_cmd(&ctx, args),
        Command::Annotate(args) => annotate_cmd(&ctx, args),
    }
}
