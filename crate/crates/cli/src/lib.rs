//! Configuration-driven driver of the electrode optimization pipeline.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutputDir;

/// Environment variable holding the worker thread count.
pub const THREADS_VAR: &str = "GUNOPT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gunopt", version, about = "Shape optimization and beam tracking for DC electron-gun electrodes")]
pub struct Cli {
    /// JSON run configuration; defaults apply when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// override a config key, e.g. --set optimizer.local.max_evals=200
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// output directory (overrides the `output` key)
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Least-squares spline fit of an electrode profile
    Fit {
        /// CSV with rho,z[,t] rows; the flat design of the configured gun when omitted
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long, default_value_t = 1)]
        intervals: usize,
    },
    /// Solve the field and write profiles, critical fields, and the fieldmap
    Solve {
        /// model JSON to solve instead of building one
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Two-stage electrode optimization with a resumable trace
    Optimize {
        /// continue from the trace in the output directory
        #[arg(long)]
        resume: bool,
        /// run the local stage only
        #[arg(long)]
        skip_global: bool,
    },
    /// Optimize along nested knot-halving and degree-elevation sequences
    RefineStudy {
        /// starting model JSON, e.g. an optimized design
        #[arg(long)]
        start: Option<PathBuf>,
    },
    /// Track the bunch through the gun field with self-convergence levels
    Track {
        /// model JSON whose field is tracked, e.g. model_optimized.json
        #[arg(long)]
        model: Option<PathBuf>,
        /// track through this fieldmap once instead of solving
        #[arg(long, conflicts_with = "model")]
        fieldmap: Option<PathBuf>,
        /// run the first refinement level only
        #[arg(long)]
        no_study: bool,
    },
    /// Consolidate a run directory into report.json and report.txt
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit { .. } => "fit",
            Command::Solve { .. } => "solve",
            Command::Optimize { .. } => "optimize",
            Command::RefineStudy { .. } => "refine_study",
            Command::Track { .. } => "track",
            Command::Report { .. } => "report",
        }
    }
}

/// Sizes the global worker pool from the environment, once per process.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_VAR} must be a positive integer, got '{v}'")))?;
    // a pool built earlier in the process wins; that is not an error
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    if let Command::Report { run_dir } = &cli.command {
        let report = commands::cmd_report(run_dir)?;
        eprintln!("report written to {} ({} evaluations)", run_dir.display(), report.evaluations.global + report.evaluations.local);
        return Ok(());
    }
    let mut overrides = cli.overrides.clone();
    if let Command::Optimize { skip_global: true, .. } = cli.command {
        overrides.push("optimizer.skip_global=true".into());
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let root = cli.output.clone().unwrap_or_else(|| cfg.output.clone());
    let out = OutputDir::acquire(&root, cfg.provenance())?;
    out.write_json(&format!("config_{}.json", cli.command.name()), &cfg)?;
    match cli.command {
        Command::Fit { input, degree, intervals } => {
            let r = commands::cmd_fit(&cfg, &out, input.as_deref(), degree, intervals)?;
            eprintln!("fit: degree {} residual {:e} max error {:e}", r.degree, r.residual, r.max_error);
        }
        Command::Solve { model } => {
            let r = commands::cmd_solve(&cfg, &out, model.as_deref())?;
            let m = r.fields.max_field;
            eprintln!("solve: max |E| {:e} V/m at ({:e}, {:e})", m.value, m.point[0], m.point[1]);
        }
        Command::Optimize { resume, .. } => {
            let o = commands::cmd_optimize(&cfg, &out, resume)?;
            let r = &o.report;
            eprintln!(
                "optimize: f {:e} -> {:e} ({:.2}% reduction, {} evaluations)",
                r.initial_final.f,
                r.best_final.f,
                100.0 * r.reduction,
                r.evaluations
            );
        }
        Command::RefineStudy { start } => {
            let r = commands::cmd_refine_study(&cfg, &out, start.as_deref())?;
            eprintln!("refine-study: {} steps", r.rows.len());
        }
        Command::Track { model, fieldmap, no_study } => {
            let o = commands::cmd_track(&cfg, &out, model.as_deref(), fieldmap.as_deref(), !no_study)?;
            if let Some(c) = &o.report.convergence {
                eprintln!("track: refined vs reference max deviation {:.2}%", 100.0 * c.refined_vs_reference.max());
            }
        }
        Command::Report { .. } => unreachable!("handled above"),
    }
    Ok(())
}
