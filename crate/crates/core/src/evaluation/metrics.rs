//! Selection and estimation metrics, and their aggregation over replications.

use std::collections::{BTreeMap, HashSet};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::solvers::lasso::LassoPath;

pub const PAUC_LIMIT: usize = 50;
pub const QUANTILE_PROBS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Precision of the selected set at each model size visited along a path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecisionCurve {
    pub visited: BTreeMap<usize, f64>,
}

impl PrecisionCurve {
    /// Precision at `size`, carrying the last visited size forward. Sizes
    /// below the first visited size take its value; an empty curve is 0.
    pub fn at(&self, size: usize) -> f64 {
        if let Some((_, &v)) = self.visited.range(..=size).next_back() {
            return v;
        }
        self.visited.values().next().copied().unwrap_or(0.0)
    }

    /// Filled values for sizes 1..=limit.
    pub fn filled(&self, limit: usize) -> Vec<f64> {
        (1..=limit).map(|s| self.at(s)).collect()
    }
}

pub fn precision_curve(path: &LassoPath, support: &[usize]) -> Result<PrecisionCurve> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let truth: HashSet<usize> = support.iter().copied().collect();
    let mut curve = PrecisionCurve::default();
    for l in 0..path.len() {
        let active = path.active_set(l);
        if active.is_empty() || curve.visited.contains_key(&active.len()) {
            continue;
        }
        let tp = active.iter().filter(|j| truth.contains(j)).count();
        curve.visited.insert(active.len(), tp as f64 / active.len() as f64);
    }
    Ok(curve)
}

/// Unit-width step area under the filled curve on sizes 1..=limit.
pub fn pauc(curve: &PrecisionCurve, limit: usize) -> f64 {
    pauc_values(&curve.filled(limit))
}

/// Step area of an already filled curve.
pub fn pauc_values(filled: &[f64]) -> f64 {
    filled.iter().sum()
}

/// Squared l2 and l1 estimation errors.
pub fn estimation_errors(beta_hat: &DVector<f64>, beta: &DVector<f64>) -> Result<(f64, f64)> {
    if beta_hat.len() != beta.len() {
        return Err(Error::Dimension(format!("beta_hat has {} entries, beta has {}", beta_hat.len(), beta.len())));
    }
    let d = beta_hat - beta;
    Ok((d.norm_squared(), d.lp_norm(1)))
}

/// Outcome of one method on one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub method: String,
    pub replication: usize,
    pub seed: u64,
    pub lambda_min: f64,
    pub model_size: usize,
    pub se2: f64,
    pub ae: f64,
    pub pauc50: f64,
    pub precision_cv: Option<f64>,
    pub pe: f64,
    /// Filled precision curve on sizes 1..=50.
    pub curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub replications: usize,
    pub mse: f64,
    pub mae: f64,
    pub relative_mse: Option<f64>,
    pub relative_mae: Option<f64>,
    pub model_size: f64,
    pub model_size_quantiles: [f64; 5],
    pub pauc50: f64,
    pub precision_at_cv_size: Option<f64>,
    pub pe: f64,
    pub precision_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub methods: Vec<MethodSummary>,
}

impl MetricsSummary {
    pub fn get(&self, method: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Type-7 sample quantile of sorted data.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0, 0usize);
    for v in values {
        s += v;
        c += 1;
    }
    s / c as f64
}

/// Averages per method. Records are summed in replication order, so the
/// result does not depend on the order they were produced. Relative metrics
/// divide by the "lasso" means when present.
pub fn aggregate_replications(records: &[ReplicationRecord]) -> Result<MetricsSummary> {
    if records.is_empty() {
        return Err(Error::EmptyInput("replication records"));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&ReplicationRecord>> = BTreeMap::new();
    for r in records {
        if !groups.contains_key(r.method.as_str()) {
            order.push(&r.method);
        }
        groups.entry(&r.method).or_default().push(r);
    }
    let mut methods = Vec::with_capacity(order.len());
    for name in order {
        let mut rs = groups.remove(name).unwrap_or_default();
        rs.sort_by_key(|r| r.replication);
        let mut sizes: Vec<f64> = rs.iter().map(|r| r.model_size as f64).collect();
        sizes.sort_by(f64::total_cmp);
        let width = rs.iter().map(|r| r.curve.len()).max().unwrap_or(0);
        let precision_curve = (0..width)
            .map(|i| mean_of(rs.iter().map(|r| r.curve.get(i).copied().unwrap_or(0.0))))
            .collect();
        let prec: Vec<f64> = rs.iter().filter_map(|r| r.precision_cv).collect();
        methods.push(MethodSummary {
            method: name.to_string(),
            replications: rs.len(),
            mse: mean_of(rs.iter().map(|r| r.se2)),
            mae: mean_of(rs.iter().map(|r| r.ae)),
            relative_mse: None,
            relative_mae: None,
            model_size: mean_of(rs.iter().map(|r| r.model_size as f64)),
            model_size_quantiles: QUANTILE_PROBS.map(|p| quantile(&sizes, p)),
            pauc50: mean_of(rs.iter().map(|r| r.pauc50)),
            precision_at_cv_size: (!prec.is_empty()).then(|| mean_of(prec.iter().copied())),
            pe: mean_of(rs.iter().map(|r| r.pe)),
            precision_curve,
        });
    }
    if let Some(base) = methods.iter().find(|m| m.method == "lasso").map(|m| (m.mse, m.mae)) {
        for m in &mut methods {
            m.relative_mse = Some(m.mse / base.0);
            m.relative_mae = Some(m.mae / base.1);
        }
    }
    Ok(MetricsSummary { methods })
}
