//! Experiment CLI: run presets or config files, compute and cache loss
//! oracles, and execute the statistical check suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adaptive_sgd::checks::{run_checks, CheckSizes};
use adaptive_sgd::env::{build_env_spec, OracleContext};
use adaptive_sgd::harness::presets::{find_preset, presets};
use adaptive_sgd::harness::{run_and_write, ExperimentConfig, HarnessError, RunOptions};

#[derive(Parser)]
#[command(
    name = "adaptive-sgd",
    about = "SGD with adaptively generated Markovian data: experiments, oracles, checks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bundled preset or a JSON experiment config.
    Run(RunArgs),
    /// Compute (and cache) an environment's certified optimum.
    Oracle(OracleArgs),
    /// Execute the property/invariant suite and print a pass/fail table.
    Check(CheckArgs),
    /// Enumerate bundled presets (or export one as editable JSON).
    ListPresets(ListArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Bundled preset name (see `list-presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Path to a JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV/SVG files and the oracle cache.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications (default: logical cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Accept oracle optima that sit on the feasible boundary.
    #[arg(long)]
    allow_boundary: bool,
    /// Shrink horizons and replication counts for a smoke run.
    #[arg(long)]
    fast: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Environment name: inventory | queue | rl.
    #[arg(long)]
    env: Option<String>,
    /// Take the environment block from this preset.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    allow_boundary: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// Only run checks whose name starts with this prefix (e.g. `rl`).
    #[arg(long)]
    env: Option<String>,
    /// Scaled-down sample sizes.
    #[arg(long)]
    fast: bool,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ListArgs {
    /// Print the full JSON of one preset instead of the table.
    #[arg(long)]
    export: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Check(args) => cmd_check(args),
        Command::ListPresets(args) => cmd_list(args),
    }
}

fn exit_code_for(err: &HarnessError) -> ExitCode {
    match err {
        HarnessError::Build(_) | HarnessError::Config(_) | HarnessError::Oracle(_) => {
            ExitCode::from(2)
        }
        _ => ExitCode::from(1),
    }
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let mut experiments: Vec<ExperimentConfig> = match (&args.preset, &args.config) {
        (Some(name), None) => match find_preset(name) {
            Some(p) => p.experiments,
            None => {
                eprintln!("unknown preset `{name}`; see `list-presets`");
                return ExitCode::from(2);
            }
        },
        (None, Some(path)) => match std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|body| ExperimentConfig::from_json(&body).map_err(|e| e.to_string()))
        {
            Ok(cfg) => vec![cfg],
            Err(e) => {
                eprintln!("cannot load config {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        _ => {
            eprintln!("exactly one of --preset or --config is required");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        for cfg in experiments.iter_mut() {
            cfg.seed = seed;
        }
    }

    let opts = RunOptions {
        jobs: args.jobs,
        cache_dir: Some(args.out.join("oracle-cache")),
        allow_boundary: args.allow_boundary,
        fast: args.fast,
    };
    for cfg in &experiments {
        eprintln!("running {} ...", cfg.id);
        match run_and_write(cfg, &opts, &args.out) {
            Ok(result) => {
                println!("{}", result.optimum_report);
                for w in &result.warnings {
                    eprintln!("  warning: {w}");
                }
                for b in &result.per_batch {
                    match &b.fit {
                        Ok(fit) => println!(
                            "  {} B={:<4} slope {:+.3} (R^2 {:.3}), diverged {}/{}",
                            cfg.id,
                            b.batch,
                            fit.slope,
                            fit.r_squared,
                            b.diverged_count,
                            b.replications.len()
                        ),
                        Err(e) => println!("  {} B={:<4} fit unavailable: {e}", cfg.id, b.batch),
                    }
                }
                println!(
                    "  wrote {}/{}.csv and .svg",
                    args.out.display(),
                    cfg.id
                );
            }
            Err(e) => {
                eprintln!("{}: {e}", cfg.id);
                return exit_code_for(&e);
            }
        }
    }
    ExitCode::SUCCESS
}

fn cmd_oracle(args: OracleArgs) -> ExitCode {
    let (name, params) = match (&args.env, &args.preset) {
        (_, Some(preset_name)) => match find_preset(preset_name) {
            Some(p) => {
                let env = &p.experiments[0].environment;
                if let Some(want) = &args.env {
                    if want != &env.name {
                        eprintln!(
                            "preset `{preset_name}` uses environment `{}`, not `{want}`",
                            env.name
                        );
                        return ExitCode::from(2);
                    }
                }
                (env.name.clone(), env.params.clone())
            }
            None => {
                eprintln!("unknown preset `{preset_name}`");
                return ExitCode::from(2);
            }
        },
        (Some(env), None) => (env.clone(), serde_json::json!({})),
        (None, None) => {
            eprintln!("need --env or --preset");
            return ExitCode::from(2);
        }
    };

    let spec = match build_env_spec(&name, &params) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let ctx = OracleContext {
        cache_dir: Some(args.out.join("oracle-cache")),
        allow_boundary: args.allow_boundary,
    };
    match spec.prepare(&ctx) {
        Ok(()) => {
            println!("{}", spec.optimum_report());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("oracle failed: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_check(args: CheckArgs) -> ExitCode {
    if let Some(jobs) = args.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let sizes = if args.fast { CheckSizes::fast() } else { CheckSizes::full() };
    let outcomes = run_checks(args.env.as_deref(), &sizes);
    if outcomes.is_empty() {
        eprintln!("no checks match the given filter");
        return ExitCode::from(2);
    }
    let mut failed = 0usize;
    for o in &outcomes {
        println!(
            "{:<28} {}  {}",
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.passed {
            failed += 1;
        }
    }
    println!("{} checks, {} failed", outcomes.len(), failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) }
}

fn cmd_list(args: ListArgs) -> ExitCode {
    match args.export {
        Some(name) => match find_preset(&name) {
            Some(p) => {
                let docs: Vec<_> = p
                    .experiments
                    .iter()
                    .map(|c| serde_json::to_value(c).expect("config serializes"))
                    .collect();
                println!("{}", serde_json::to_string_pretty(&docs).unwrap());
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("unknown preset `{name}`");
                ExitCode::from(2)
            }
        },
        None => {
            for p in presets() {
                let ids: Vec<_> = p.experiments.iter().map(|e| e.id.as_str()).collect();
                println!("{:<20} {}  [{}]", p.name, p.summary, ids.join(", "));
            }
            ExitCode::SUCCESS
        }
    }
}
