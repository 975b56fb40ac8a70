mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::{ConfigFile, Effective};
use crate::error::CliError;
use crate::output::OutDir;

#[derive(Parser)]
#[command(name = "convlab", version, about = "Convention-emergence experiments on simulated and model-backed agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one population and write its trajectory.
    Simulate(Common),
    /// Tally consensus winners over independent runs.
    BiasAssay(Common),
    /// Sample first choices of a fresh agent.
    ProbeIndividual(Common),
    /// Sweep the committed-minority fraction.
    TippingScan(Common),
    /// Consensus time across population sizes.
    ScalingScan(Common),
    /// Ask a model how it reads the game.
    MetaProbe(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `population.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out` in the file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Simulate(c) => ("simulate", c),
            Command::BiasAssay(c) => ("bias-assay", c),
            Command::ProbeIndividual(c) => ("probe-individual", c),
            Command::TippingScan(c) => ("tipping-scan", c),
            Command::ScalingScan(c) => ("scaling-scan", c),
            Command::MetaProbe(c) => ("meta-probe", c),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common) = cli.command.parts();
    let file = ConfigFile::load(&common.config)?;
    let seed = common.seed.unwrap_or(file.population.seed);
    let effective = Effective::new(name, &file, seed);
    let dir = common
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let out = OutDir::create(&dir, &effective.config_hash)?;
    out.json("effective_config.json", &effective)?;
    let ctx = Context { file, effective, out };

    let dispatch = || match cli.command {
        Command::Simulate(_) => commands::simulate(&ctx),
        Command::BiasAssay(_) => commands::bias(&ctx),
        Command::ProbeIndividual(_) => commands::probe_individual(&ctx),
        Command::TippingScan(_) => commands::tipping(&ctx),
        Command::ScalingScan(_) => commands::scaling(&ctx),
        Command::MetaProbe(_) => commands::probe_meta(&ctx),
    };
    match common.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(dispatch),
        None => dispatch(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("convlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
