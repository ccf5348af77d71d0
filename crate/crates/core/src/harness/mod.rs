//! Configuration-driven experiment runner: batch-size sweeps across seeded
//! replications, gap evaluation against the environment oracle at log-spaced
//! checkpoints, and CSV/SVG output with fitted rate lines.

pub mod csv;
pub mod presets;
pub mod svg;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::env::{build_env_spec, BuildError, EnvSpec, LossOracle, OracleContext, OracleError};
use crate::oracles::rates::{default_fit_window, fit_rate, LossCurve, RateFit};
use crate::sgd::{
    log_checkpoints, replication_seed, run_sgd, RunConfig, RunError, ScheduleFamily, StepSchedule,
};

/// Environment selection: registry name plus its parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentConfig {
    pub name: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub family: ScheduleFamily,
    pub eta0: f64,
}

/// One experiment: an environment, a step-size schedule, and the sweep over
/// batch sizes, replicated and averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub environment: EnvironmentConfig,
    pub schedule: ScheduleConfig,
    pub batches: Vec<u64>,
    pub horizon: u64,
    pub replications: u32,
    pub averaging: bool,
    pub projection: bool,
    pub seed: u64,
    /// Slope of the dotted reference line drawn in the figure.
    pub reference_slope: f64,
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Runner options coming from the CLI.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub cache_dir: Option<std::path::PathBuf>,
    pub allow_boundary: bool,
    /// Shrink horizons/replications for smoke runs.
    pub fast: bool,
}

/// Outcome of one replication, reduced to its gap trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepSummary {
    pub gaps: Vec<f64>,
    pub diverged_at: Option<u64>,
    pub max_gap: f64,
    pub final_gap: f64,
    /// Checkpoints whose loss was undefined (carried forward instead).
    pub undefined_evals: usize,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub batch: u64,
    pub curve: LossCurve,
    pub fit: Result<RateFit, String>,
    pub diverged_count: u32,
    pub replications: Vec<RepSummary>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub checkpoints: Vec<u64>,
    pub per_batch: Vec<BatchResult>,
    pub optimum_report: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("replication {rep} failed: {source}")]
    Replication {
        rep: u32,
        #[source]
        source: RunError,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub fn validate_config(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    if cfg.batches.is_empty() {
        return Err(HarnessError::Config("no batch sizes listed".into()));
    }
    for &b in &cfg.batches {
        if b == 0 || b > cfg.horizon {
            return Err(HarnessError::Config(format!(
                "batch {b} incompatible with horizon {}",
                cfg.horizon
            )));
        }
    }
    if cfg.replications == 0 {
        return Err(HarnessError::Config("need at least one replication".into()));
    }
    if cfg.schedule.eta0 <= 0.0 {
        return Err(HarnessError::Config("eta0 must be positive".into()));
    }
    Ok(())
}

/// Execute one experiment: every batch size, every replication, gaps at the
/// shared log-spaced checkpoint grid.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<ExperimentResult, HarnessError> {
    let mut cfg = cfg.clone();
    if opts.fast {
        cfg.horizon = (cfg.horizon / 20).max(200);
        cfg.replications = cfg.replications.min(8);
        cfg.batches.retain(|&b| b <= cfg.horizon);
    }
    validate_config(&cfg)?;

    let spec = build_env_spec(&cfg.environment.name, &cfg.environment.params)?;
    let ctx = OracleContext {
        cache_dir: opts.cache_dir.clone(),
        allow_boundary: opts.allow_boundary,
    };
    spec.prepare(&ctx)?;

    let mut warnings = Vec::new();
    if cfg.projection && spec.default_projection().is_none() {
        warnings.push(format!(
            "environment `{}` has no feasible box; running unprojected",
            spec.name()
        ));
    }

    let checkpoints = log_checkpoints(cfg.horizon);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let mut per_batch = Vec::with_capacity(cfg.batches.len());
    for &batch in &cfg.batches {
        let batch_seed = replication_seed(cfg.seed, 1_000_000 + batch);
        let schedule = StepSchedule::new(cfg.schedule.family, cfg.schedule.eta0)
            .with_batch_scale(batch as f64);

        let reps: Result<Vec<RepSummary>, HarnessError> = pool.install(|| {
            (0..cfg.replications)
                .into_par_iter()
                .map(|rep| run_replication(spec.as_ref(), &cfg, &schedule, batch, batch_seed, rep, &checkpoints))
                .collect()
        });
        let replications = reps?;

        let curve = aggregate(&checkpoints, &replications);
        let fit = fit_rate(&curve, default_fit_window(cfg.horizon)).map_err(|e| e.to_string());
        let diverged_count = replications.iter().filter(|r| r.diverged_at.is_some()).count() as u32;
        for idx in curve.negative_gap_flags() {
            warnings.push(format!(
                "B={batch}: mean gap at sample {} is negative beyond tolerance",
                curve.sample_counts[idx]
            ));
        }
        per_batch.push(BatchResult { batch, curve, fit, diverged_count, replications });
    }

    Ok(ExperimentResult {
        optimum_report: spec.optimum_report(),
        config: cfg,
        checkpoints,
        per_batch,
        warnings,
    })
}

fn run_replication(
    spec: &dyn EnvSpec,
    cfg: &ExperimentConfig,
    schedule: &StepSchedule,
    batch: u64,
    batch_seed: u64,
    rep: u32,
    checkpoints: &[u64],
) -> Result<RepSummary, HarnessError> {
    let (mut env, oracle) = spec.replication(rep);
    let mut run_cfg = RunConfig::new(cfg.horizon, batch, replication_seed(batch_seed, rep as u64))
        .with_averaging(cfg.averaging)
        .with_checkpoints(checkpoints.to_vec());
    if cfg.projection {
        run_cfg.projection = spec.default_projection();
    }
    let record = run_sgd(env.as_mut(), &run_cfg, schedule)
        .map_err(|source| HarnessError::Replication { rep, source })?;
    Ok(evaluate_gaps(&record, cfg.averaging, oracle.as_ref(), &env.theta0()))
}

/// Turn a recorded trajectory into a gap trace. Checkpoints where the loss
/// is undefined (an unstable configuration mid-excursion) carry the last
/// defined value forward, starting from the initial decision's gap.
fn evaluate_gaps(
    record: &crate::sgd::RunRecord,
    averaging: bool,
    oracle: &dyn LossOracle,
    theta0: &crate::sgd::ThetaVector,
) -> RepSummary {
    let mut last = oracle
        .gap(theta0)
        .expect("initial decision must have a defined loss");
    let mut gaps = Vec::with_capacity(record.sample_index.len());
    let mut undefined = 0usize;
    let selected = if averaging { &record.theta_bar } else { &record.theta };
    for theta in selected {
        match oracle.gap(theta) {
            Some(g) => last = g,
            None => undefined += 1,
        }
        gaps.push(last);
    }
    let max_gap = gaps.iter().cloned().fold(0.0f64, f64::max);
    let final_gap = *gaps.last().unwrap_or(&last);
    RepSummary {
        gaps,
        diverged_at: record.diverged_at,
        max_gap,
        final_gap,
        undefined_evals: undefined,
    }
}

fn aggregate(checkpoints: &[u64], reps: &[RepSummary]) -> LossCurve {
    let n = checkpoints.len();
    let r = reps.len() as f64;
    let mut mean = vec![0.0; n];
    for rep in reps {
        for (m, g) in mean.iter_mut().zip(&rep.gaps) {
            *m += g;
        }
    }
    for m in mean.iter_mut() {
        *m /= r;
    }
    let mut stderr = vec![0.0; n];
    if reps.len() > 1 {
        for rep in reps {
            for (s, (g, m)) in stderr.iter_mut().zip(rep.gaps.iter().zip(&mean)) {
                *s += (g - m) * (g - m);
            }
        }
        for s in stderr.iter_mut() {
            *s = (*s / (r - 1.0) / r).sqrt();
        }
    }
    LossCurve {
        sample_counts: checkpoints.to_vec(),
        mean_gap: mean,
        stderr,
    }
}

/// Run an experiment and write `<id>.csv` and `<id>.svg` under `out_dir`.
pub fn run_and_write(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    out_dir: &std::path::Path,
) -> Result<ExperimentResult, HarnessError> {
    let result = run_experiment(cfg, opts)?;
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{}.csv", result.config.id));
    std::fs::write(&csv_path, csv::render_csv(&result))?;
    let svg_path = out_dir.join(format!("{}.svg", result.config.id));
    match svg::render_experiment_svg(&result) {
        Ok(doc) => std::fs::write(&svg_path, doc)?,
        Err(e) => eprintln!("skipping {}: {e}", svg_path.display()),
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            id: "tiny-queue".into(),
            environment: EnvironmentConfig {
                name: "queue".into(),
                params: serde_json::json!({}),
            },
            schedule: ScheduleConfig { family: ScheduleFamily::InverseT, eta0: 1.0 },
            batches: vec![1, 10],
            horizon: 500,
            replications: 3,
            averaging: false,
            projection: true,
            seed: 7,
            reference_slope: -1.0,
        }
    }

    #[test]
    fn experiment_runs_and_aggregates() {
        let result = run_experiment(&tiny_config(), &RunOptions::default()).unwrap();
        assert_eq!(result.per_batch.len(), 2);
        for b in &result.per_batch {
            assert_eq!(b.curve.sample_counts, result.checkpoints);
            assert_eq!(b.replications.len(), 3);
            assert!(b.curve.mean_gap.iter().all(|&g| g.is_finite() && g >= 0.0));
        }
        assert!(*result.checkpoints.last().unwrap() == 500);
    }

    #[test]
    fn identical_configs_give_identical_results() {
        let a = run_experiment(&tiny_config(), &RunOptions::default()).unwrap();
        let b = run_experiment(&tiny_config(), &RunOptions::default()).unwrap();
        for (x, y) in a.per_batch.iter().zip(&b.per_batch) {
            assert_eq!(x.curve, y.curve);
            assert_eq!(x.replications, y.replications);
        }
        assert_eq!(csv::render_csv(&a), csv::render_csv(&b));
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = tiny_config();
        cfg.batches = vec![1000];
        assert!(matches!(
            run_experiment(&cfg, &RunOptions::default()),
            Err(HarnessError::Config(_))
        ));
        let mut cfg = tiny_config();
        cfg.environment.name = "nope".into();
        assert!(matches!(
            run_experiment(&cfg, &RunOptions::default()),
            Err(HarnessError::Build(_))
        ));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = tiny_config();
        let parsed = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, parsed);
    }
}
