//! Semi-synthetic runs: real features, simulated outcome driven by a
//! categorical confounder.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::experiment::{evaluate_dataset, summarize, with_pool, EvalSettings, Failure};
use super::output::{write_failures, write_records, write_summaries};
use crate::confound::{encode_levels, generate_semisynthetic};
use crate::error::{Error, Result};
use crate::evaluation::{MethodSpec, MetricsSummary, ReplicationRecord};
use crate::rng::replication_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SemisynthConfig {
    pub g_values: Vec<f64>,
    pub s: usize,
    pub sigma_e: f64,
    pub replications: usize,
    pub base_seed: u64,
    pub methods: Vec<MethodSpec>,
    pub folds: usize,
}

impl Default for SemisynthConfig {
    fn default() -> Self {
        SemisynthConfig {
            g_values: vec![0.0, 0.5, 1.0, 2.0],
            s: 5,
            sigma_e: 1.0,
            replications: 100,
            base_seed: 1,
            methods: vec![MethodSpec::Lasso, MethodSpec::PcLasso { k: 10 }, MethodSpec::Plmm],
            folds: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SemisynthResult {
    pub g_values: Vec<f64>,
    /// (index into `g_values`, record).
    pub records: Vec<(usize, ReplicationRecord)>,
    pub failures: Vec<Failure>,
}

impl SemisynthResult {
    pub fn summaries(&self) -> Result<BTreeMap<usize, MetricsSummary>> {
        summarize(&self.records)
    }
}

/// `x` should already be standardized. Replication `r` uses seed
/// `base_seed + r` for every g, so the support and noise are shared across g.
pub fn run_semisynth(x: &DMatrix<f64>, labels: &[String], cfg: &SemisynthConfig, threads: usize) -> Result<SemisynthResult> {
    if cfg.g_values.is_empty() || cfg.replications == 0 || cfg.methods.is_empty() {
        return Err(Error::Config("need g values, replications >= 1 and at least one method".into()));
    }
    encode_levels(labels)?;
    let settings = EvalSettings { folds: cfg.folds, ..Default::default() };
    let tasks: Vec<(usize, usize)> =
        (0..cfg.g_values.len()).flat_map(|gi| (0..cfg.replications).map(move |r| (gi, r))).collect();
    let outcomes: Vec<Result<Vec<ReplicationRecord>>> = with_pool(threads, || {
        tasks
            .par_iter()
            .map(|&(gi, r)| {
                let seed = replication_seed(cfg.base_seed, r);
                let data = generate_semisynthetic(x, labels, cfg.g_values[gi], cfg.s, cfg.sigma_e, seed)?;
                evaluate_dataset(&data, &cfg.methods, r, seed, &settings)
            })
            .collect()
    })?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (&(gi, r), out) in tasks.iter().zip(outcomes) {
        match out {
            Ok(rs) => records.extend(rs.into_iter().map(|rec| (gi, rec))),
            Err(e) => failures.push(Failure { scenario: gi, replication: r, message: e.to_string() }),
        }
    }
    Ok(SemisynthResult { g_values: cfg.g_values.clone(), records, failures })
}

pub fn write_semisynth(dir: &Path, result: &SemisynthResult) -> Result<BTreeMap<usize, MetricsSummary>> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("scenarios.csv"))?;
    w.write_record(["scenario", "g"])?;
    for (i, g) in result.g_values.iter().enumerate() {
        w.write_record([i.to_string(), g.to_string()])?;
    }
    w.flush()?;
    write_records(dir, &result.records)?;
    write_failures(dir, &result.failures)?;
    let summaries = write_summaries(dir, &result.records, &BTreeMap::new())?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(["g", "method", "relative_mse", "relative_mae", "pauc50", "model_size"])?;
    for (&gi, s) in &summaries {
        for m in &s.methods {
            let o = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
            w.write_record([
                result.g_values[gi].to_string(),
                m.method.clone(),
                o(m.relative_mse),
                o(m.relative_mae),
                m.pauc50.to_string(),
                m.model_size.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(summaries)
}

/// Text table with one column per g: relative MSE and MAE of the adjusted
/// methods, then pAUC and model size of every method.
pub fn format_summary_table(g_values: &[f64], summaries: &BTreeMap<usize, MetricsSummary>) -> String {
    let methods: Vec<String> = summaries
        .values()
        .next()
        .map(|s| s.methods.iter().map(|m| m.method.clone()).collect())
        .unwrap_or_default();
    let mut out = String::new();
    let _ = write!(out, "{:<22}", "g");
    for g in g_values {
        let _ = write!(out, "{g:>10}");
    }
    out.push('\n');
    type Getter = fn(&crate::evaluation::MethodSummary) -> Option<f64>;
    let blocks: [(&str, Getter, bool); 4] = [
        ("Relative MSE to LASSO", |m| m.relative_mse, true),
        ("Relative MAE to LASSO", |m| m.relative_mae, true),
        ("pAUC at model size 50", |m| Some(m.pauc50), false),
        ("Model size", |m| Some(m.model_size), false),
    ];
    for (title, get, skip_lasso) in blocks {
        out.push_str(title);
        out.push('\n');
        for name in &methods {
            if skip_lasso && name == "lasso" {
                continue;
            }
            let _ = write!(out, "  {name:<20}");
            for gi in 0..g_values.len() {
                let v = summaries.get(&gi).and_then(|s| s.get(name)).and_then(get);
                match v {
                    Some(v) => {
                        let _ = write!(out, "{v:>10.2}");
                    }
                    None => {
                        let _ = write!(out, "{:>10}", "-");
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}
