//! Replication orchestration for simulated and semi-synthetic experiments.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::config::{method_specs, ExperimentConfig};
use super::output;
use crate::confound::{generate_dataset, solve_scenario, Dataset, ScenarioParams, ScenarioSpec};
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate_replications, cross_validate, estimation_errors, pauc, precision_curve, CvOptions, MethodSpec,
    MetricsSummary, PcHandling, ReplicationRecord, PAUC_LIMIT,
};
use crate::rng::replication_seed;
use crate::solvers::LassoOptions;

/// Thread count: explicit value, else `DECONF_THREADS`, else all cores.
pub fn resolve_threads(explicit: Option<usize>) -> Result<usize> {
    if let Some(t) = explicit {
        return if t == 0 { Err(Error::Config("threads must be at least 1".into())) } else { Ok(t) };
    }
    match std::env::var("DECONF_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => Err(Error::Config(format!("DECONF_THREADS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Evaluation settings shared by every replication.
#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub folds: usize,
    pub pc_handling: PcHandling,
    pub lasso: LassoOptions,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { folds: 10, pc_handling: PcHandling::WithinFold, lasso: LassoOptions::default() }
    }
}

/// Fit, cross-validate and score each method on one dataset with known truth.
/// All methods share the fold assignment derived from `seed`.
pub fn evaluate_dataset(
    data: &Dataset,
    methods: &[MethodSpec],
    replication: usize,
    seed: u64,
    settings: &EvalSettings,
) -> Result<Vec<ReplicationRecord>> {
    let truth = data.truth.as_ref().ok_or(Error::EmptySupport)?;
    let opts = CvOptions { n_folds: settings.folds, seed, lasso: settings.lasso.clone(), pc_handling: settings.pc_handling };
    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        let fit = cross_validate(m, &data.x, &data.y, &opts)?;
        let curve = precision_curve(&fit.fit.path, &truth.support)?;
        let (se2, ae) = estimation_errors(&fit.selected_coefs(), &truth.beta)?;
        let size = fit.model_size();
        out.push(ReplicationRecord {
            method: m.label(),
            replication,
            seed,
            lambda_min: fit.lambda_min(),
            model_size: size,
            se2,
            ae,
            pauc50: pauc(&curve, PAUC_LIMIT),
            precision_cv: (size > 0).then(|| curve.at(size)),
            pe: fit.prediction_error(),
            curve: curve.filled(PAUC_LIMIT),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub index: usize,
    pub params: ScenarioParams,
    pub methods: Vec<MethodSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub scenario: usize,
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub scenarios: Vec<ScenarioResult>,
    /// (scenario index, record), sorted by scenario, replication, method order.
    pub records: Vec<(usize, ReplicationRecord)>,
    pub failures: Vec<Failure>,
    pub threads: usize,
}

impl ExperimentResult {
    pub fn summaries(&self) -> Result<BTreeMap<usize, MetricsSummary>> {
        summarize(&self.records)
    }
}

pub fn summarize(records: &[(usize, ReplicationRecord)]) -> Result<BTreeMap<usize, MetricsSummary>> {
    let mut by: BTreeMap<usize, Vec<ReplicationRecord>> = BTreeMap::new();
    for (s, r) in records {
        by.entry(*s).or_default().push(r.clone());
    }
    by.into_iter().map(|(s, rs)| Ok((s, aggregate_replications(&rs)?))).collect()
}

/// Solve every grid point up front, so an unreachable target fails before
/// any replication runs.
pub fn solve_grid(cfg: &ExperimentConfig) -> Result<Vec<ScenarioResult>> {
    cfg.validate()?;
    cfg.grid
        .scenarios()
        .into_iter()
        .enumerate()
        .map(|(index, spec)| {
            let params = solve_scenario(&spec)?;
            let methods = method_specs(&cfg.methods, &cfg.grid.k, &spec);
            Ok(ScenarioResult { index, params, methods })
        })
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let threads = resolve_threads(cfg.threads)?;
    run_experiment_with(cfg, threads, &EvalSettings { folds: cfg.folds, pc_handling: cfg.pc_handling, ..Default::default() })
}

pub fn run_experiment_with(cfg: &ExperimentConfig, threads: usize, settings: &EvalSettings) -> Result<ExperimentResult> {
    let scenarios = solve_grid(cfg)?;
    let tasks: Vec<(usize, usize)> =
        (0..scenarios.len()).flat_map(|s| (0..cfg.replications).map(move |r| (s, r))).collect();
    log::info!("{}: {} scenarios x {} replications on {threads} threads", cfg.name, scenarios.len(), cfg.replications);
    let outcomes: Vec<Result<Vec<ReplicationRecord>>> = with_pool(threads, || {
        tasks
            .par_iter()
            .map(|&(s, r)| {
                let sc = &scenarios[s];
                let spec: &ScenarioSpec = &sc.params.spec;
                let seed = replication_seed(cfg.base_seed, r);
                let data = generate_dataset(&sc.params, spec.n, spec.s, spec.sigma_e, seed)?;
                evaluate_dataset(&data, &sc.methods, r, seed, settings)
            })
            .collect()
    })?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (&(s, r), out) in tasks.iter().zip(outcomes) {
        match out {
            Ok(rs) => records.extend(rs.into_iter().map(|rec| (s, rec))),
            Err(e) => {
                log::warn!("scenario {s} replication {r} failed: {e}");
                failures.push(Failure { scenario: s, replication: r, message: e.to_string() });
            }
        }
    }
    Ok(ExperimentResult { scenarios, records, failures, threads })
}

/// Run and write every output file into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentResult> {
    let started = std::time::SystemTime::now();
    let result = run_experiment(cfg)?;
    output::write_experiment(dir, &result)?;
    output::write_log(dir, cfg, &result, started)?;
    Ok(result)
}
