//! `relaxbc`: boundary construction, Kreiss certification, compatibility, asymptotics,
//! stiff solves and convergence studies from one JSON config.
//!
//! Exit codes: 0 success or PASS, 1 FAIL, 2 INCONCLUSIVE, 3 configuration error.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relaxbc::bc::Family;
use relaxbc::harness::{PresetId, ProblemSpec};

use config::RunConfig;
use stages::{Ctx, Outcome, Stage};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Stage(&'static str, relaxbc::Error),
    Io(String, std::io::Error),
}

impl CliError {
    fn stage(stage: Stage, e: relaxbc::Error) -> Self {
        CliError::Stage(stage.name(), e)
    }

    fn exit_code(&self) -> u8 {
        use relaxbc::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(..) => 3,
            CliError::Stage(_, e) => match e {
                E::ConfigError(_)
                | E::DimensionMismatch(_)
                | E::InvalidGivenBC(_)
                | E::InvalidLayerDatum(_)
                | E::InvalidRelaxationSpeed { .. }
                | E::NonCharacteristicViolation { .. }
                | E::OrderingError
                | E::Json(_)
                | E::Io(_) => 3,
                E::InconclusiveStudy => 2,
                _ => 1,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Stage(s, e) => write!(f, "[{s}] {e}"),
            CliError::Io(p, e) => write!(f, "{p}: {e}"),
        }
    }
}

impl From<relaxbc::Error> for CliError {
    fn from(e: relaxbc::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "relaxbc", version, about = "Boundary conditions for linear relaxation systems")]
struct Cli {
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "relaxbc-out")]
    out: PathBuf,
    /// Seed for randomized sampling; overrides `gkc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the boundary families and built-in problems.
    PresetList,
    /// Print the config of a built-in problem.
    PresetConfig { preset: String },
    /// Build the boundary matrix and datum.
    ConstructBc { config: PathBuf },
    /// Certify the Kreiss condition numerically.
    VerifyGkc {
        config: PathBuf,
        /// Also write the sampled ratio field as CSV.
        #[arg(long)]
        field: bool,
    },
    /// Make the data compatible and report every identity.
    CompatCheck { config: PathBuf },
    /// Write initial data and boundary signals.
    BuildData { config: PathBuf },
    /// Sample the matched asymptotic solution.
    RunAsymptotic { config: PathBuf },
    /// Solve the relaxation system on a grid.
    RunStiff { config: PathBuf },
    /// Convergence study against the asymptotic solution.
    Converge { config: PathBuf },
    /// All stages in order, stopping at the first FAIL; finished stages are reused.
    Pipeline { config: PathBuf },
}

fn load(cli: &Cli, path: &PathBuf) -> Result<Ctx, CliError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.gkc.seed = Some(seed);
    }
    Ok(Ctx::new(cfg, cli.out.clone()))
}

fn report(stage: Stage, outcome: Outcome, reused: bool) {
    let note = if reused { " (reused)" } else { "" };
    println!("{:<15} {outcome}{note}", stage.name());
}

fn single(cli: &Cli, path: &PathBuf, stage: Stage, gkc_field: bool) -> Result<Outcome, CliError> {
    let mut ctx = load(cli, path)?;
    ctx.gkc_field = gkc_field;
    let outcome = ctx.run(stage)?;
    report(stage, outcome, false);
    Ok(outcome)
}

fn pipeline(cli: &Cli, path: &PathBuf) -> Result<Outcome, CliError> {
    let ctx = load(cli, path)?;
    let mut last = Outcome::Pass;
    for stage in Stage::PIPELINE {
        let skip_missing = match stage {
            Stage::Asymptotic => ctx.cfg.asymptotic.is_none(),
            Stage::Stiff => ctx.cfg.stiff.is_none(),
            Stage::Converge => ctx.cfg.experiment.is_none(),
            _ => false,
        };
        if skip_missing {
            println!("{:<15} skipped (no config section)", stage.name());
            continue;
        }
        let (outcome, reused) = match ctx.reusable(stage) {
            Some(o) => (o, true),
            None => (ctx.run(stage)?, false),
        };
        report(stage, outcome, reused);
        match outcome {
            Outcome::Fail => return Ok(Outcome::Fail),
            Outcome::Inconclusive => last = Outcome::Inconclusive,
            Outcome::Pass => {}
        }
    }
    Ok(last)
}

fn preset_list() {
    println!("Boundary families:");
    for f in Family::ALL {
        println!("  {:<16} {}", f.name(), f.describe());
    }
    println!("Built-in problems:");
    for id in PresetId::ALL {
        println!("  {}", preset_name(id));
    }
}

fn preset_name(id: PresetId) -> String {
    serde_json::to_value(id).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn preset_config(name: &str) -> Result<Outcome, CliError> {
    let id = PresetId::ALL
        .into_iter()
        .find(|&id| preset_name(id) == name)
        .ok_or_else(|| CliError::Config(format!("unknown preset {name}")))?;
    let spec: ProblemSpec = ProblemSpec::preset(id);
    let doc = serde_json::json!({ "problem": { "inline": spec } });
    println!("{}", serde_json::to_string_pretty(&doc).map_err(relaxbc::Error::from)?);
    Ok(Outcome::Pass)
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(k) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {k} workers: {e}")))?;
    }
    match &cli.command {
        Command::PresetList => {
            preset_list();
            Ok(Outcome::Pass)
        }
        Command::PresetConfig { preset } => preset_config(preset),
        Command::ConstructBc { config } => single(cli, config, Stage::Construct, false),
        Command::VerifyGkc { config, field } => single(cli, config, Stage::Certify, *field),
        Command::CompatCheck { config } => single(cli, config, Stage::Compat, false),
        Command::BuildData { config } => {
            load(cli, config)?.build_data()?;
            println!("{:<15} {}", "build-data", Outcome::Pass);
            Ok(Outcome::Pass)
        }
        Command::RunAsymptotic { config } => single(cli, config, Stage::Asymptotic, false),
        Command::RunStiff { config } => single(cli, config, Stage::Stiff, false),
        Command::Converge { config } => single(cli, config, Stage::Converge, false),
        Command::Pipeline { config } => pipeline(cli, config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Ok(Outcome::Inconclusive) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
