use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conecoord::config::{self, InstanceSpec};
use conecoord::error::{CliError, CliResult};
use conecoord::experiment::{run_experiment, thread_cap};
use conecoord_core::instances::{gen_ensvm, preset, PRESETS};
use conecoord_core::selfcheck;

#[derive(Parser)]
#[command(
    name = "conecoord",
    version,
    about = "Block-coordinate primal-dual solvers for convex cone programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Run this single seed instead of the configured list.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Validate the config and print the resolved plan.
        #[arg(long)]
        dry_run: bool,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an EN-SVM instance file from a preset.
    Gen {
        preset: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Block count, defaulting to the preset's first.
        #[arg(long)]
        blocks: Option<usize>,
    },
    /// Run the built-in invariant checks.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed_override,
            dry_run,
            out,
        } => run(config, seed_override, dry_run, out),
        Command::Gen {
            preset,
            seed,
            out,
            blocks,
        } => gen(&preset, seed, out, blocks),
        Command::Check => check(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(
    path: PathBuf,
    seed_override: Option<u64>,
    dry_run: bool,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let threads = thread_cap()?;
    let mut plan = config::load(&path)?;
    if let Some(s) = seed_override {
        plan.seeds = vec![s];
    }
    if let Some(dir) = out {
        plan.output_dir = dir;
    }
    if dry_run {
        let text =
            serde_json::to_string_pretty(&plan).map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("{text}");
        println!(
            "{} run(s), {} iteration(s) each; nothing computed",
            plan.jobs(),
            plan.iterations
        );
        return Ok(());
    }
    let summaries = run_experiment(&plan, threads)?;
    for s in &summaries {
        let label = if s.report.suboptimality_is_raw {
            "objective"
        } else {
            "suboptimality"
        };
        println!(
            "blocks={} seed={} iterations={} {label}={:e} feasibility={:e} time={:.2}s",
            s.blocks,
            s.seed,
            s.iterations,
            s.report.suboptimality,
            s.report.feasibility,
            s.wall_seconds
        );
    }
    println!("outputs in {}", plan.output_dir.display());
    Ok(())
}

fn gen(name: &str, seed: u64, out: PathBuf, blocks: Option<usize>) -> CliResult<()> {
    let p = preset(name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        CliError::Config(format!(
            "unknown preset {name:?}; known: {}",
            known.join(", ")
        ))
    })?;
    let blocks = blocks.unwrap_or(p.blocks[0]);
    let inst = gen_ensvm(p.m, p.n, p.s, p.lambda, seed)?.with_blocks(blocks)?;
    std::fs::write(&out, inst.to_json()).map_err(|e| CliError::io(&out, e))?;
    let spec = InstanceSpec::Ensvm {
        preset: Some(name.to_string()),
        m: p.m,
        n: p.n,
        s: p.s,
        lambda: p.lambda,
        seed: Some(seed),
    };
    println!(
        "{} (blocks={blocks}, delta={}) -> {}",
        serde_json::to_string(&spec).unwrap_or_default(),
        inst.delta,
        out.display()
    );
    Ok(())
}

fn check() -> CliResult<()> {
    let outcomes = selfcheck::run_all();
    let mut failed = 0;
    for o in &outcomes {
        println!(
            "{} {}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
        if !o.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!(
            "{failed} of {} checks failed",
            outcomes.len()
        )));
    }
    println!("all {} checks passed", outcomes.len());
    Ok(())
}
