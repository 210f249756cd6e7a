//! Result files: per-replication rows, precision curves, aggregates and
//! plot-ready tables. Everything here is deterministic given the records;
//! timestamps go only to `run.log`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::SystemTime;

use super::config::ExperimentConfig;
use super::experiment::{summarize, ExperimentResult, Failure};
use super::io::Table;
use crate::error::{Error, Result};
use crate::evaluation::{MetricsSummary, ReplicationRecord};

pub const SCENARIOS_FILE: &str = "scenarios.csv";
pub const REPLICATIONS_FILE: &str = "replications.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const FAILURES_FILE: &str = "failures.csv";

const SCENARIO_HEADER: [&str; 17] = [
    "scenario", "p", "n", "q", "factors", "s", "snr", "bnr", "bsr", "convention", "block_signs", "a", "r", "g", "b",
    "rho", "var_psi",
];
const REPLICATION_HEADER: [&str; 11] =
    ["scenario", "method", "replication", "seed", "lambda_min", "model_size", "se2", "ae", "pauc50", "precision_cv", "pe"];
/// Scenario columns repeated in plot tables.
const KEY_COLUMNS: [&str; 6] = ["p", "n", "q", "factors", "snr", "bnr"];

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(SCENARIOS_FILE))?;
    w.write_record(SCENARIO_HEADER)?;
    for sc in &result.scenarios {
        let (pr, sp) = (&sc.params, &sc.params.spec);
        w.write_record([
            sc.index.to_string(),
            sp.p.to_string(),
            sp.n.to_string(),
            sp.q.to_string(),
            sp.factors().to_string(),
            sp.s.to_string(),
            sp.snr.to_string(),
            sp.bnr.to_string(),
            sp.bsr().to_string(),
            sp.convention.name().to_string(),
            format!("{:?}", sp.block_signs).to_lowercase(),
            pr.a.to_string(),
            pr.r.to_string(),
            pr.g.to_string(),
            pr.b.to_string(),
            pr.rho.to_string(),
            pr.var_psi.to_string(),
        ])?;
    }
    w.flush()?;
    write_records(dir, &result.records)?;
    write_failures(dir, &result.failures)?;
    let keys = scenario_keys(&Table::read(&dir.join(SCENARIOS_FILE))?)?;
    write_summaries(dir, &result.records, &keys)?;
    Ok(())
}

pub fn write_records(dir: &Path, records: &[(usize, ReplicationRecord)]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(REPLICATIONS_FILE))?;
    w.write_record(REPLICATION_HEADER)?;
    for (s, r) in records {
        w.write_record([
            s.to_string(),
            r.method.clone(),
            r.replication.to_string(),
            r.seed.to_string(),
            r.lambda_min.to_string(),
            r.model_size.to_string(),
            r.se2.to_string(),
            r.ae.to_string(),
            r.pauc50.to_string(),
            opt(r.precision_cv),
            r.pe.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join(CURVES_FILE))?;
    w.write_record(["scenario", "method", "replication", "size", "precision"])?;
    for (s, r) in records {
        for (i, v) in r.curve.iter().enumerate() {
            w.write_record([s.to_string(), r.method.clone(), r.replication.to_string(), (i + 1).to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_failures(dir: &Path, failures: &[Failure]) -> Result<()> {
    let path = dir.join(FAILURES_FILE);
    if failures.is_empty() {
        if path.exists() {
            std::fs::remove_file(path)?;
        }
        return Ok(());
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scenario", "replication", "error"])?;
    for f in failures {
        w.write_record([f.scenario.to_string(), f.replication.to_string(), f.message.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Scenario index -> values of the key columns, from a scenarios table.
pub fn scenario_keys(t: &Table) -> Result<BTreeMap<usize, Vec<String>>> {
    let idx = t.column_index("scenario")?;
    let cols = KEY_COLUMNS.iter().map(|c| t.column_index(c)).collect::<Result<Vec<_>>>()?;
    let mut out = BTreeMap::new();
    for (i, row) in t.rows.iter().enumerate() {
        let s: usize =
            row[idx].parse().map_err(|_| Error::Parse { line: i + 2, message: "bad scenario index".into() })?;
        out.insert(s, cols.iter().map(|&c| row[c].clone()).collect());
    }
    Ok(out)
}

fn keyed_header(extra: &[&str]) -> Vec<String> {
    std::iter::once("scenario").chain(KEY_COLUMNS).chain(extra.iter().copied()).map(String::from).collect()
}

fn keyed_row(s: usize, keys: &BTreeMap<usize, Vec<String>>, extra: Vec<String>) -> Vec<String> {
    let mut row = vec![s.to_string()];
    row.extend(keys.get(&s).cloned().unwrap_or_else(|| vec![String::new(); KEY_COLUMNS.len()]));
    row.extend(extra);
    row
}

/// `aggregate.csv` and the plot tables.
pub fn write_summaries(
    dir: &Path,
    records: &[(usize, ReplicationRecord)],
    keys: &BTreeMap<usize, Vec<String>>,
) -> Result<BTreeMap<usize, MetricsSummary>> {
    let summaries = if records.is_empty() { BTreeMap::new() } else { summarize(records)? };
    let mut agg = csv::Writer::from_path(dir.join(AGGREGATE_FILE))?;
    agg.write_record([
        "scenario", "method", "replications", "mse", "mae", "relative_mse", "relative_mae", "model_size",
        "model_size_q10", "model_size_q25", "model_size_q50", "model_size_q75", "model_size_q90", "pauc50",
        "precision_cv", "pe",
    ])?;
    let mut prec = csv::Writer::from_path(dir.join("plot_precision.csv"))?;
    prec.write_record(keyed_header(&["method", "size", "precision"]))?;
    let mut size = csv::Writer::from_path(dir.join("plot_model_size.csv"))?;
    size.write_record(keyed_header(&["method", "mean", "q10", "q25", "q50", "q75", "q90"]))?;
    let mut rel = csv::Writer::from_path(dir.join("plot_relative_error.csv"))?;
    rel.write_record(keyed_header(&["method", "relative_mse", "relative_mae", "pauc50"]))?;
    for (&s, sum) in &summaries {
        for m in &sum.methods {
            let q = m.model_size_quantiles.map(|v| v.to_string());
            let mut row = vec![
                s.to_string(),
                m.method.clone(),
                m.replications.to_string(),
                m.mse.to_string(),
                m.mae.to_string(),
                opt(m.relative_mse),
                opt(m.relative_mae),
                m.model_size.to_string(),
            ];
            row.extend(q.iter().cloned());
            row.extend([m.pauc50.to_string(), opt(m.precision_at_cv_size), m.pe.to_string()]);
            agg.write_record(row)?;
            for (i, v) in m.precision_curve.iter().enumerate() {
                prec.write_record(keyed_row(s, keys, vec![m.method.clone(), (i + 1).to_string(), v.to_string()]))?;
            }
            let mut extra = vec![m.method.clone(), m.model_size.to_string()];
            extra.extend(q.iter().cloned());
            size.write_record(keyed_row(s, keys, extra))?;
            rel.write_record(keyed_row(
                s,
                keys,
                vec![m.method.clone(), opt(m.relative_mse), opt(m.relative_mae), m.pauc50.to_string()],
            ))?;
        }
    }
    for w in [&mut agg, &mut prec, &mut size, &mut rel] {
        w.flush()?;
    }
    Ok(summaries)
}

fn field<T: std::str::FromStr>(t: &Table, row: usize, col: usize) -> Result<T> {
    t.rows[row][col].trim().parse().map_err(|_| Error::Parse {
        line: row + 2,
        message: format!("bad value '{}' in column '{}'", t.rows[row][col], t.header[col]),
    })
}

/// Read back `replications.csv` and `curves.csv`.
pub fn read_records(dir: &Path) -> Result<Vec<(usize, ReplicationRecord)>> {
    let t = Table::read(&dir.join(REPLICATIONS_FILE))?;
    let c: Vec<usize> = REPLICATION_HEADER.iter().map(|h| t.column_index(h)).collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(t.rows.len());
    let mut index = BTreeMap::new();
    for i in 0..t.rows.len() {
        let s: usize = field(&t, i, c[0])?;
        let raw_prec = t.rows[i][c[9]].trim();
        let rec = ReplicationRecord {
            method: t.rows[i][c[1]].clone(),
            replication: field(&t, i, c[2])?,
            seed: field(&t, i, c[3])?,
            lambda_min: field(&t, i, c[4])?,
            model_size: field(&t, i, c[5])?,
            se2: field(&t, i, c[6])?,
            ae: field(&t, i, c[7])?,
            pauc50: field(&t, i, c[8])?,
            precision_cv: if raw_prec.is_empty() { None } else { Some(field(&t, i, c[9])?) },
            pe: field(&t, i, c[10])?,
            curve: Vec::new(),
        };
        index.insert((s, rec.method.clone(), rec.replication), records.len());
        records.push((s, rec));
    }
    let path = dir.join(CURVES_FILE);
    if path.exists() {
        let t = Table::read(&path)?;
        let c: Vec<usize> = ["scenario", "method", "replication", "size", "precision"]
            .iter()
            .map(|h| t.column_index(h))
            .collect::<Result<_>>()?;
        for i in 0..t.rows.len() {
            let key = (field::<usize>(&t, i, c[0])?, t.rows[i][c[1]].clone(), field::<usize>(&t, i, c[2])?);
            let size: usize = field(&t, i, c[3])?;
            let v: f64 = field(&t, i, c[4])?;
            let &r = index.get(&key).ok_or(Error::Parse { line: i + 2, message: "curve row without a replication".into() })?;
            let curve = &mut records[r].1.curve;
            if size != curve.len() + 1 {
                return Err(Error::Parse { line: i + 2, message: "curve sizes must be consecutive from 1".into() });
            }
            curve.push(v);
        }
    }
    Ok(records)
}

/// Recompute `aggregate.csv` and the plot tables from a result directory.
pub fn report(dir: &Path) -> Result<BTreeMap<usize, MetricsSummary>> {
    let records = read_records(dir)?;
    let keys = match Table::read(&dir.join(SCENARIOS_FILE)) {
        Ok(t) => scenario_keys(&t)?,
        Err(Error::Io(_)) => BTreeMap::new(),
        Err(e) => return Err(e),
    };
    write_summaries(dir, &records, &keys)
}

pub fn write_log(dir: &Path, cfg: &ExperimentConfig, result: &ExperimentResult, started: SystemTime) -> Result<()> {
    let secs = |t: SystemTime| t.duration_since(SystemTime::UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let finished = SystemTime::now();
    let mut f = std::fs::File::create(dir.join("run.log"))?;
    writeln!(f, "experiment: {}", cfg.name)?;
    writeln!(f, "started_unix: {}", secs(started))?;
    writeln!(f, "finished_unix: {}", secs(finished))?;
    writeln!(f, "elapsed_s: {:.3}", finished.duration_since(started).map_or(0.0, |d| d.as_secs_f64()))?;
    writeln!(f, "threads: {}", result.threads)?;
    writeln!(f, "scenarios: {}", result.scenarios.len())?;
    writeln!(f, "replications: {}", cfg.replications)?;
    writeln!(f, "failures: {}", result.failures.len())?;
    for fl in &result.failures {
        writeln!(f, "  scenario {} replication {}: {}", fl.scenario, fl.replication, fl.message)?;
    }
    Ok(())
}
