//! `styleprint` command-line pipeline: each stage is a subcommand reading
//! and writing artifacts in one output directory.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod stages;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::PipelineConfig;
pub use error::CliError;
pub use pipeline::{Context, Stage};

#[derive(Debug, Parser)]
#[command(name = "styleprint", version, about = "Speaker style profiles from text embeddings")]
pub struct Cli {
    /// JSON pipeline configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Root seed; overrides the config.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Input artifact as ROLE=PATH, or a PATH whose file name is a default
    /// artifact name (e.g. embeddings.jsonl).
    #[arg(long = "input", global = true, value_name = "[ROLE=]PATH", num_args = 1..)]
    pub inputs: Vec<String>,

    /// Directory for all artifacts and manifests.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub output: PathBuf,

    /// Clustering radius threshold; overrides the config.
    #[arg(long, global = true)]
    pub max_radius: Option<f64>,

    #[arg(long, short, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus, its embeddings and the truth table.
    Synth,
    /// Embed corpus.jsonl with the configured provider.
    Embed,
    /// Agglomerative clustering of the embeddings.
    Cluster,
    /// Keep speaker-bearing clusters and their best external items.
    Augment,
    /// Build contrastive pairs and train/validation/test splits.
    Pairs,
    /// Train the Siamese encoder.
    TrainSnn,
    /// Train the random forest on encoded pairs.
    TrainRfc,
    /// Build speaker style profiles.
    Profile,
    /// Rank candidate texts against a profile.
    Rank,
    /// Forest metrics on the validation and test splits.
    Eval,
    /// Run every stage in order.
    Pipeline,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Synth => Stage::Synth,
            Command::Embed => Stage::Embed,
            Command::Cluster => Stage::Cluster,
            Command::Augment => Stage::Augment,
            Command::Pairs => Stage::Pairs,
            Command::TrainSnn => Stage::TrainSnn,
            Command::TrainRfc => Stage::TrainRfc,
            Command::Profile => Stage::Profile,
            Command::Rank => Stage::Rank,
            Command::Eval => Stage::Eval,
            Command::Pipeline => return None,
        })
    }
}

fn parse_input(arg: &str) -> Result<(String, PathBuf), CliError> {
    if let Some((role, path)) = arg.split_once('=') {
        if pipeline::default_file(role).is_some() {
            return Ok((role.to_string(), PathBuf::from(path)));
        }
    }
    let path = PathBuf::from(arg);
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    match pipeline::role_for_file(name) {
        Some(role) => Ok((role.to_string(), path)),
        None => Err(CliError::Usage(format!(
            "cannot infer the role of input `{arg}`; use ROLE=PATH with one of: {}",
            pipeline::ARTIFACTS.iter().map(|(r, _)| *r).collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Applies command-line overrides to the configuration.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = cli.max_radius {
        cfg.cluster.max_radius = r;
    }
    for arg in &cli.inputs {
        let (role, path) = parse_input(arg)?;
        cfg.inputs.insert(role, path);
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    let ctx = Context::new(cfg, &cli.output);
    match cli.command.stage() {
        Some(stage) => ctx.run(stage),
        None => ctx.run_pipeline(),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("styleprint: {e}");
            e.exit_code()
        }
    }
}

/// Convenience for callers holding paths: runs `command` with the given
/// config file, seed and output directory.
pub fn run_command(command: &str, config: Option<&Path>, seed: u64, output: &Path) -> i32 {
    let mut args: Vec<OsString> = vec!["styleprint".into(), command.into(), "--seed".into(), seed.to_string().into()];
    if let Some(c) = config {
        args.push("--config".into());
        args.push(c.into());
    }
    args.push("--output".into());
    args.push(output.into());
    run(args)
}
