//! Argument handling, configuration merging and exit codes.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::commands::{run_energy, run_graze, run_simulate, run_solve, run_sweep};
use crate::config::{Format, RunConfig, ScenarioKind};
use crate::error::{CliError, CliResult};
use crate::output::Output;
use crate::recipes::Recipe;

/// Environment variable that overrides `--jobs`.
pub const JOBS_ENV: &str = "IMPACT_HARVEST_JOBS";

#[derive(Debug, Parser)]
#[command(
    name = "impact-harvest",
    version,
    about = "Periodic motions, stability and grazing of an inclined impact harvester"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Table format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub svg: bool,

    /// Worker threads; IMPACT_HARVEST_JOBS takes precedence.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Cold-start the solver from its seed grid.
    #[arg(long, global = true)]
    pub seed_grid: bool,

    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate from an initial impact and classify the steady pattern.
    Simulate,
    /// Solve for a 1:1 or 2:1 periodic orbit and its stability.
    Solve,
    /// Continue an orbit family in d, locate critical points and stable windows.
    Sweep,
    /// Hysteresis scan in d for a pattern transition.
    Graze,
    /// Per-impact outputs and averaged outputs of a simulated motion.
    Energy,
    /// Run a named reproduction recipe.
    Reproduce {
        /// fig2, fig3, fig4-beta{90,60,45,30}, fig5, fig6 or fig7.
        name: String,
    },
}

impl Command {
    fn scenario(&self) -> ScenarioKind {
        match self {
            Command::Simulate => ScenarioKind::Simulate,
            Command::Solve => ScenarioKind::Solve,
            Command::Sweep => ScenarioKind::Sweep,
            Command::Graze => ScenarioKind::Graze,
            Command::Energy => ScenarioKind::Energy,
            Command::Reproduce { .. } => ScenarioKind::Reproduce,
        }
    }
}

fn jobs_from_env() -> CliResult<Option<usize>> {
    match std::env::var(JOBS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => v.trim().parse::<usize>().map(Some).map_err(|_| {
            CliError::Config(format!("{JOBS_ENV} must be a positive integer, got `{v}`"))
        }),
        Err(_) => Ok(None),
    }
}

/// Loads the config file and folds the command line and environment in.
pub fn effective_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.scenario = cli.command.scenario();
    if let Command::Reproduce { name } = &cli.command {
        cfg.recipe = Some(name.clone());
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(format) = cli.format {
        cfg.output.format = format;
    }
    cfg.output.svg |= cli.svg;
    cfg.solve.seed_grid |= cli.seed_grid;
    if let Some(j) = cli.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(j) = jobs_from_env()? {
        cfg.jobs = Some(j);
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(feature = "parallel")]
fn configure_threads(jobs: Option<usize>) -> CliResult<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} worker threads: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_jobs: Option<usize>) -> CliResult<()> {
    Ok(())
}

/// Runs the configured scenario and writes `config.json` and `summary.json`.
pub fn execute(cfg: &RunConfig) -> CliResult<PathBuf> {
    let out = Output::new(&cfg.output)?;
    out.json("config.json", cfg)?;
    let summary = match cfg.scenario {
        ScenarioKind::Simulate => run_simulate(cfg, &out)?,
        ScenarioKind::Solve => run_solve(cfg, &out)?,
        ScenarioKind::Sweep => run_sweep(cfg, &out)?,
        ScenarioKind::Graze => run_graze(cfg, &out)?,
        ScenarioKind::Energy => run_energy(cfg, &out)?,
        ScenarioKind::Reproduce => {
            let name = cfg.recipe.as_deref().unwrap_or_default();
            Recipe::parse(name)?.run(cfg, &out)?
        }
    };
    out.json("summary.json", &summary)
}

/// Full command-line behaviour; returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let cfg = match effective_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if cli.dump_config {
        println!("{}", cfg.to_json());
        return 0;
    }
    if let Err(e) = configure_threads(cfg.jobs) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match execute(&cfg) {
        Ok(summary) => {
            println!("{}", summary.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Numerical { message, context } = &e {
                let report = json!({ "error": message, "context": context, "config": cfg });
                match Output::diagnostics(&cfg.output.dir, &report) {
                    Ok(path) => eprintln!("diagnostics written to {}", path.display()),
                    Err(io) => eprintln!("could not write diagnostics: {io}"),
                }
            }
            e.exit_code()
        }
    }
}
