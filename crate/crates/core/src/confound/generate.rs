use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::scenario::{exact_signal_size, ScenarioParams};
use crate::error::{Error, Result};
use crate::linalg::standardize_columns;
use crate::rng::seeded;

/// Ground truth carried by generated data.
#[derive(Debug, Clone)]
pub struct Truth {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    /// Sorted indices of the nonzero entries of `beta`.
    pub support: Vec<usize>,
    /// Population bias; unknown for semi-synthetic data.
    pub tau: Option<DVector<f64>>,
    pub z: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub truth: Option<Truth>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// How the per-signal effect size is set at generation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignalScaling {
    /// Use the solved `params.b`.
    #[default]
    Diagonal,
    /// Re-solve `b` so `beta' Var(x) beta` matches the SNR for the drawn support.
    Exact,
}

pub fn generate_dataset(params: &ScenarioParams, n: usize, s: usize, sigma_e: f64, seed: u64) -> Result<Dataset> {
    generate_dataset_with(params, n, s, sigma_e, seed, SignalScaling::Diagonal)
}

/// Draw `n` rows from the linear confounding model.
///
/// Draw order: the support first, then row by row `z` (factors), `d` (p),
/// `eps`. Features are `x = S(d + Az)`, the outcome is
/// `y = x'beta + z'gamma + eps`, and the feature matrix is finally
/// re-standardized empirically.
pub fn generate_dataset_with(
    params: &ScenarioParams,
    n: usize,
    s: usize,
    sigma_e: f64,
    seed: u64,
    scaling: SignalScaling,
) -> Result<Dataset> {
    let design = &params.design;
    let (p, f) = (design.p, design.q);
    if n < 2 {
        return Err(Error::Dimension("need at least 2 rows".into()));
    }
    if s > p {
        return Err(Error::Dimension(format!("s = {s} exceeds p = {p}")));
    }
    if !(sigma_e >= 0.0) {
        return Err(Error::Domain("sigma_e must be nonnegative".into()));
    }
    let mut rng = seeded(seed);
    let mut support = sample(&mut rng, p, s).into_vec();
    support.sort_unstable();
    let b = match scaling {
        SignalScaling::Diagonal => params.b,
        SignalScaling::Exact => exact_signal_size(params, &support)?,
    };
    let mut beta = DVector::zeros(p);
    for &j in &support {
        beta[j] = b;
    }

    // nonzero loadings per row, so a row of x costs O(nnz) instead of O(q)
    let loads: Vec<Vec<(usize, f64)>> = (0..p)
        .map(|j| {
            (0..f)
                .filter_map(|c| {
                    let v = design.loadings[(j, c)];
                    (v != 0.0).then_some((c, v))
                })
                .collect()
        })
        .collect();

    let mut x = DMatrix::zeros(n, p);
    let mut z = DMatrix::zeros(n, f);
    let mut y = DVector::zeros(n);
    let mut zi = vec![0.0; f];
    for i in 0..n {
        for c in 0..f {
            zi[c] = rng.sample(StandardNormal);
            z[(i, c)] = zi[c];
        }
        let mut yi = 0.0;
        for j in 0..p {
            let d: f64 = rng.sample(StandardNormal);
            let az: f64 = loads[j].iter().map(|&(c, v)| v * zi[c]).sum();
            let xij = design.scale[j] * (d + az);
            x[(i, j)] = xij;
            yi += xij * beta[j];
        }
        let eps: f64 = rng.sample(StandardNormal);
        yi += zi.iter().zip(params.gamma.iter()).map(|(a, b)| a * b).sum::<f64>();
        y[i] = yi + sigma_e * eps;
    }
    let (x, _) = standardize_columns(&x, None)?;
    Ok(Dataset {
        x,
        y,
        truth: Some(Truth {
            beta,
            gamma: params.gamma.clone(),
            support,
            tau: Some(params.tau.clone()),
            z,
        }),
    })
}

/// Confounder levels in sorted order and the per-row level index.
pub fn encode_levels(labels: &[String]) -> Result<(Vec<String>, Vec<usize>)> {
    let mut levels: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        let t = l.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("na") {
            return Err(Error::MissingLabel(i + 1));
        }
        levels.entry(t).or_insert(0);
    }
    for (k, v) in levels.iter_mut().enumerate() {
        *v.1 = k;
    }
    let codes = labels.iter().map(|l| levels[l.trim()]).collect();
    Ok((levels.keys().map(|s| s.to_string()).collect(), codes))
}

/// Simulate an outcome for a fixed feature matrix with a categorical
/// confounder: `y = X beta + Z gamma + eps` with `beta` set to 1 on `s`
/// random features and `gamma = (-g, ..., -g, g, ..., g)` (first `ceil(L/2)`
/// levels negative). `x` is returned unchanged.
pub fn generate_semisynthetic(
    x: &DMatrix<f64>,
    labels: &[String],
    g: f64,
    s: usize,
    sigma_e: f64,
    seed: u64,
) -> Result<Dataset> {
    let (n, p) = x.shape();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} rows", labels.len())));
    }
    if s > p {
        return Err(Error::Dimension(format!("s = {s} exceeds p = {p}")));
    }
    if !(g >= 0.0) || !(sigma_e >= 0.0) {
        return Err(Error::Domain("g and sigma_e must be nonnegative".into()));
    }
    let (levels, codes) = encode_levels(labels)?;
    let l = levels.len();
    if l < 2 {
        return Err(Error::LevelCount(l));
    }
    let gamma = DVector::from_fn(l, |c, _| if c < l.div_ceil(2) { -g } else { g });
    let mut z = DMatrix::zeros(n, l);
    for (i, &c) in codes.iter().enumerate() {
        z[(i, c)] = 1.0;
    }
    let mut rng = seeded(seed);
    let mut support = sample(&mut rng, p, s).into_vec();
    support.sort_unstable();
    let mut beta = DVector::zeros(p);
    for &j in &support {
        beta[j] = 1.0;
    }
    let mut y = x * &beta;
    for i in 0..n {
        let eps: f64 = rng.sample(StandardNormal);
        y[i] += gamma[codes[i]] + sigma_e * eps;
    }
    Ok(Dataset {
        x: x.clone(),
        y,
        truth: Some(Truth { beta, gamma, support, tau: None, z }),
    })
}
