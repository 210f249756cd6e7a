//! Coordinate-descent LASSO path with an optional unpenalized block.
//!
//! The unpenalized columns `U` (intercept, principal components, rotated
//! intercept) are profiled out exactly: the penalized problem is solved on
//! `(I - P_U) X` and `(I - P_U) y`, and `alpha` is recovered by least squares
//! of `y - X beta` on `U` at every lambda. KKT conditions of the reduced
//! problem coincide with those of the full objective.

use nalgebra::{DMatrix, DVector};

use super::chol::{Append, GramCholesky};
use crate::error::{Error, Result};
use crate::linalg::{ensure_finite_matrix, ensure_finite_vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Lasso,
    PcLasso,
    Plmm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lasso => "lasso",
            Method::PcLasso => "pc_lasso",
            Method::Plmm => "plmm",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "lasso" => Ok(Method::Lasso),
            "pc_lasso" | "pclasso" => Ok(Method::PcLasso),
            "plmm" => Ok(Method::Plmm),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CdStrategy {
    /// Covariance updates when p > 500, residual updates otherwise.
    #[default]
    Auto,
    Naive,
    Covariance,
}

#[derive(Debug, Clone)]
pub struct LassoOptions {
    /// Explicit, strictly decreasing lambda grid.
    pub lambdas: Option<Vec<f64>>,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub penalty_factor: Option<Vec<f64>>,
    /// Sweeps stop once the largest coefficient change is below `tol * sd(y)`.
    pub tol: f64,
    pub max_sweeps: usize,
    pub strategy: CdStrategy,
    /// Record the objective after every sweep (costs O(np) per sweep).
    pub track_objective: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            lambdas: None,
            n_lambda: 100,
            lambda_min_ratio: 1e-3,
            penalty_factor: None,
            tol: 1e-9,
            max_sweeps: 100_000,
            strategy: CdStrategy::Auto,
            track_objective: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LassoPath {
    pub method: Method,
    pub lambdas: Vec<f64>,
    /// p x L penalized coefficients.
    pub coefs: DMatrix<f64>,
    pub intercepts: Vec<f64>,
    /// k x L unpenalized coefficients besides the intercept.
    pub unpenalized_coefs: DMatrix<f64>,
    /// Sweeps used at each lambda.
    pub n_iters: Vec<usize>,
    pub model_sizes: Vec<usize>,
    /// Objective after each sweep, per lambda, when tracking was requested.
    pub objective_trace: Option<Vec<Vec<f64>>>,
}

impl LassoPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn coef(&self, l: usize) -> DVector<f64> {
        self.coefs.column(l).into_owned()
    }

    pub fn active_set(&self, l: usize) -> Vec<usize> {
        self.coefs
            .column(l)
            .iter()
            .enumerate()
            .filter_map(|(j, v)| (*v != 0.0).then_some(j))
            .collect()
    }

    /// Intercept followed by the other unpenalized coefficients.
    pub fn unpenalized_vector(&self, l: usize) -> DVector<f64> {
        let k = self.unpenalized_coefs.nrows();
        DVector::from_fn(k + 1, |i, _| {
            if i == 0 {
                self.intercepts[l]
            } else {
                self.unpenalized_coefs[(i - 1, l)]
            }
        })
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// LASSO path with an unpenalized intercept.
pub fn lasso_path(x: &DMatrix<f64>, y: &DVector<f64>, opts: &LassoOptions) -> Result<LassoPath> {
    fit_path(x, y, None, true, Method::Lasso, opts)
}

/// LASSO path with an intercept plus extra unpenalized columns.
pub fn lasso_path_with_unpenalized(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    unpenalized: &DMatrix<f64>,
    opts: &LassoOptions,
) -> Result<LassoPath> {
    fit_path(x, y, Some(unpenalized), true, Method::Lasso, opts)
}

/// Largest lambda of the default grid, `max_j |x_j' y| / (n pf_j)` after
/// profiling out the unpenalized block.
pub fn lambda_max(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    unpenalized: Option<&DMatrix<f64>>,
    intercept: bool,
    penalty_factor: Option<&[f64]>,
) -> Result<f64> {
    let red = Reduced::new(x, y, unpenalized, intercept)?;
    let pf = penalty_factors(penalty_factor, x.ncols())?;
    Ok(red.lambda_max(&pf))
}

fn penalty_factors(pf: Option<&[f64]>, p: usize) -> Result<Vec<f64>> {
    match pf {
        None => Ok(vec![1.0; p]),
        Some(v) => {
            if v.len() != p {
                return Err(Error::Dimension("penalty_factor length must equal p".into()));
            }
            if v.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
                return Err(Error::Domain("penalty factors must be finite and >= 0".into()));
            }
            Ok(v.to_vec())
        }
    }
}

/// Problem with the unpenalized span projected out.
struct Reduced {
    n: usize,
    x: DMatrix<f64>,
    y: DVector<f64>,
    /// Thin QR of the unpenalized block.
    qr: Option<(DMatrix<f64>, DMatrix<f64>)>,
    col_ms: Vec<f64>,
}

impl Reduced {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>, unpenalized: Option<&DMatrix<f64>>, intercept: bool) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::Dimension(format!("X has {n} rows but y has length {}", y.len())));
        }
        if n == 0 || p == 0 {
            return Err(Error::Dimension("empty design".into()));
        }
        ensure_finite_matrix(x, "X")?;
        ensure_finite_vector(y, "y")?;
        let extra = unpenalized.map_or(0, |u| u.ncols());
        if let Some(u) = unpenalized {
            if u.nrows() != n {
                return Err(Error::Dimension("unpenalized block must have n rows".into()));
            }
            ensure_finite_matrix(u, "unpenalized block")?;
        }
        let k = extra + usize::from(intercept);
        let qr = if k == 0 {
            None
        } else {
            if k >= n {
                return Err(Error::Rank(format!("{k} unpenalized columns for {n} rows")));
            }
            let mut u = DMatrix::zeros(n, k);
            let mut c = 0;
            if intercept {
                u.column_mut(0).fill(1.0);
                c = 1;
            }
            if let Some(up) = unpenalized {
                u.columns_mut(c, extra).copy_from(up);
            }
            let qr = u.qr();
            let (q, r) = (qr.q(), qr.r());
            let rmax = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
            if (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * rmax.max(1e-300)) {
                return Err(Error::Rank("unpenalized block is rank deficient".into()));
            }
            Some((q, r))
        };
        let (xr, mut yr) = match &qr {
            None => (x.clone(), y.clone()),
            Some((q, _)) => (x - q * q.tr_mul(x), y - q * q.tr_mul(y)),
        };
        // an outcome fully explained by the unpenalized block has nothing left
        if yr.norm() <= 1e-10 * y.norm() {
            yr.fill(0.0);
        }
        let col_ms = (0..p).map(|j| xr.column(j).norm_squared() / n as f64).collect();
        Ok(Reduced { n, x: xr, y: yr, qr, col_ms })
    }

    fn lambda_max(&self, pf: &[f64]) -> f64 {
        let g = self.x.tr_mul(&self.y) / self.n as f64;
        g.iter()
            .zip(pf)
            .filter(|(_, f)| **f > 0.0)
            .map(|(g, f)| g.abs() / f)
            .fold(0.0, f64::max)
    }

    /// Least-squares unpenalized coefficients given penalized `beta`.
    fn alpha(&self, x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, active: &[usize]) -> DVector<f64> {
        match &self.qr {
            None => DVector::zeros(0),
            Some((q, r)) => {
                let mut res = y.clone();
                for &j in active {
                    res.axpy(-beta[j], &x.column(j), 1.0);
                }
                let rhs = q.tr_mul(&res);
                r.solve_upper_triangular(&rhs).expect("checked full rank")
            }
        }
    }
}

enum State {
    Naive { resid: DVector<f64> },
    Covariance { grad: DVector<f64> },
}

struct Solver<'a> {
    red: &'a Reduced,
    pf: &'a [f64],
    beta: DVector<f64>,
    state: State,
    active: Vec<usize>,
    in_active: Vec<bool>,
    /// Lazily computed columns of X^T X / n.
    gram: Vec<Option<DVector<f64>>>,
    xty: DVector<f64>,
    factor: GramCholesky,
}

impl<'a> Solver<'a> {
    fn new(red: &'a Reduced, pf: &'a [f64], covariance: bool) -> Self {
        let p = red.x.ncols();
        let xty = red.x.tr_mul(&red.y) / red.n as f64;
        let state = if covariance {
            State::Covariance { grad: xty.clone() }
        } else {
            State::Naive { resid: red.y.clone() }
        };
        Solver {
            red,
            pf,
            beta: DVector::zeros(p),
            state,
            active: Vec::new(),
            in_active: vec![false; p],
            gram: vec![None; p],
            xty,
            factor: GramCholesky::default(),
        }
    }

    fn coordinate(&mut self, j: usize, lambda: f64) -> f64 {
        let v = self.red.col_ms[j];
        if v <= 0.0 {
            return 0.0;
        }
        let n = self.red.n as f64;
        let grad = match &self.state {
            State::Naive { resid } => self.red.x.column(j).dot(resid) / n,
            State::Covariance { grad, .. } => grad[j],
        };
        let old = self.beta[j];
        let new = soft_threshold(grad + v * old, lambda * self.pf[j]) / v;
        let delta = new - old;
        if delta == 0.0 {
            return 0.0;
        }
        self.beta[j] = new;
        if !self.in_active[j] {
            self.in_active[j] = true;
            let pos = self.active.partition_point(|&k| k < j);
            self.active.insert(pos, j);
        }
        match &mut self.state {
            State::Naive { resid } => resid.axpy(-delta, &self.red.x.column(j), 1.0),
            State::Covariance { grad } => {
                if self.gram[j].is_none() {
                    self.gram[j] = Some(self.red.x.tr_mul(&self.red.x.column(j)) / n);
                }
                grad.axpy(-delta, self.gram[j].as_ref().expect("just computed"), 1.0);
            }
        }
        delta.abs()
    }

    fn sweep_all(&mut self, lambda: f64) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.beta.len() {
            worst = worst.max(self.coordinate(j, lambda));
        }
        worst
    }

    fn sweep_active(&mut self, lambda: f64) -> f64 {
        let mut worst = 0.0f64;
        let mut i = 0;
        while i < self.active.len() {
            let j = self.active[i];
            worst = worst.max(self.coordinate(j, lambda));
            i += 1;
        }
        worst
    }

    fn objective(&self, lambda: f64) -> f64 {
        let resid = match &self.state {
            State::Naive { resid } => resid.clone(),
            State::Covariance { .. } => &self.red.y - &self.red.x * &self.beta,
        };
        let pen: f64 = self.beta.iter().zip(self.pf).map(|(b, f)| f * b.abs()).sum();
        resid.norm_squared() / (2.0 * self.red.n as f64) + lambda * pen
    }

    fn objective_exact(&self, lambda: f64) -> f64 {
        let mut resid = self.red.y.clone();
        let mut pen = 0.0;
        for &j in &self.active {
            if self.beta[j] != 0.0 {
                resid.axpy(-self.beta[j], &self.red.x.column(j), 1.0);
                pen += self.pf[j] * self.beta[j].abs();
            }
        }
        resid.norm_squared() / (2.0 * self.red.n as f64) + lambda * pen
    }

    fn ensure_gram(&mut self, j: usize) {
        if self.gram[j].is_none() {
            self.gram[j] = Some(self.red.x.tr_mul(&self.red.x.column(j)) / self.red.n as f64);
        }
    }

    /// Active-set step. On the current support and sign pattern the objective
    /// is a convex quadratic; move toward its minimizer (or, if the support is
    /// rank deficient, along a null direction that does not raise the
    /// penalty), stop where a coefficient first reaches zero, drop it and
    /// repeat. Returns whether the coefficients changed.
    fn polish(&mut self, lambda: f64) -> bool {
        let before = self.objective_exact(lambda);
        let saved = self.beta.clone();
        let mut moved = false;
        for _ in 0..=self.beta.len() {
            for pos in (0..self.factor.len()).rev() {
                if self.beta[self.factor.cols[pos]] == 0.0 {
                    self.factor.remove(pos);
                }
            }
            let support: Vec<usize> = self.active.iter().copied().filter(|&j| self.beta[j] != 0.0).collect();
            if support.is_empty() {
                break;
            }
            let mut dependent = None;
            for &j in &support {
                if self.factor.position(j).is_some() {
                    continue;
                }
                self.ensure_gram(j);
                let col = self.gram[j].as_ref().expect("computed above");
                let g: Vec<f64> = self.factor.cols.iter().map(|&i| col[i]).collect();
                if let Append::Dependent(v) = self.factor.append(j, &g, col[j], DEPENDENCE_TOL) {
                    dependent = Some((j, v));
                    break;
                }
            }
            let mut idx = self.factor.cols.clone();
            let (direction, full_step) = match dependent {
                Some((j, v)) => {
                    idx.push(j);
                    let mut d = v.push(-1.0);
                    let slope: f64 = idx.iter().zip(d.iter()).map(|(&i, di)| self.pf[i] * self.beta[i].signum() * di).sum();
                    if slope > 0.0 {
                        d = -d;
                    }
                    (d, f64::INFINITY)
                }
                None => {
                    let rhs: Vec<f64> = idx
                        .iter()
                        .map(|&c| {
                            let fit: f64 = idx.iter().map(|&m| self.gram[m].as_ref().map_or(0.0, |g| g[c]) * self.beta[m]).sum();
                            self.xty[c] - fit - lambda * self.pf[c] * self.beta[c].signum()
                        })
                        .collect();
                    (self.factor.solve(&rhs), 1.0)
                }
            };
            if !direction.iter().all(|v| v.is_finite()) {
                break;
            }
            let mut step = full_step;
            let mut blocking = None;
            for (c, &j) in idx.iter().enumerate() {
                if self.beta[j].signum() * direction[c] < 0.0 {
                    let t = -self.beta[j] / direction[c];
                    if t < step {
                        step = t;
                        blocking = Some(j);
                    }
                }
            }
            if !step.is_finite() {
                break;
            }
            for (c, &j) in idx.iter().enumerate() {
                self.beta[j] += step * direction[c];
            }
            moved = true;
            match blocking {
                None => break,
                Some(j) => self.beta[j] = 0.0,
            }
        }
        if !moved {
            return false;
        }
        if self.objective_exact(lambda) > before {
            self.beta = saved;
            return false;
        }
        let n = self.red.n as f64;
        let mut resid = self.red.y.clone();
        for &j in &self.active {
            if self.beta[j] != 0.0 {
                resid.axpy(-self.beta[j], &self.red.x.column(j), 1.0);
            }
        }
        match &mut self.state {
            State::Naive { resid: r } => *r = resid,
            State::Covariance { grad } => *grad = self.red.x.tr_mul(&resid) / n,
        }
        true
    }

    /// Solve at one lambda, warm-started from the current state. Returns sweeps.
    fn solve(&mut self, lambda: f64, tol: f64, max_sweeps: usize, trace: Option<&mut Vec<f64>>, lambda_index: usize) -> Result<usize> {
        let mut sweeps = 0;
        let mut trace = trace;
        loop {
            let change = self.sweep_all(lambda);
            sweeps += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective(lambda));
            }
            if change < tol {
                return Ok(sweeps);
            }
            let mut inner = 0;
            loop {
                if sweeps >= max_sweeps {
                    return Err(Error::NonConvergence { lambda_index, sweeps });
                }
                let change = self.sweep_active(lambda);
                sweeps += 1;
                inner += 1;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(self.objective(lambda));
                }
                if change < tol {
                    break;
                }
                if inner % POLISH_EVERY == 0 && self.polish(lambda) {
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(self.objective(lambda));
                    }
                    break;
                }
            }
            if sweeps >= max_sweeps {
                return Err(Error::NonConvergence { lambda_index, sweeps });
            }
        }
    }
}

/// Active-set sweeps between attempts at an exact support solve.
const POLISH_EVERY: usize = 2;

/// Relative pivot below which a support column counts as linearly dependent.
const DEPENDENCE_TOL: f64 = 1e-10;

pub(crate) fn validate_lambdas(l: &[f64]) -> Result<()> {
    if l.is_empty() {
        return Err(Error::Domain("lambda grid is empty".into()));
    }
    if l.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("lambdas must be positive and finite".into()));
    }
    if l.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("lambdas must be strictly decreasing".into()));
    }
    Ok(())
}

/// Default log-spaced grid from `lambda_max` down to `ratio * lambda_max`.
pub fn default_lambdas(lambda_max: f64, n_lambda: usize, ratio: f64) -> Vec<f64> {
    let top = if lambda_max > 0.0 && lambda_max.is_finite() { lambda_max } else { 1.0 };
    if n_lambda == 1 {
        return vec![top];
    }
    let (lo, hi) = ((top * ratio).ln(), top.ln());
    (0..n_lambda)
        .map(|i| {
            if i == 0 {
                top
            } else {
                (hi + (lo - hi) * i as f64 / (n_lambda - 1) as f64).exp()
            }
        })
        .collect()
}

/// Core path fit. `unpenalized` columns and (optionally) a column of ones are
/// left unpenalized; the intercept is the coefficient of the first of them.
pub(crate) fn fit_path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    unpenalized: Option<&DMatrix<f64>>,
    intercept: bool,
    method: Method,
    opts: &LassoOptions,
) -> Result<LassoPath> {
    let red = Reduced::new(x, y, unpenalized, intercept)?;
    let p = x.ncols();
    let pf = penalty_factors(opts.penalty_factor.as_deref(), p)?;
    let lambdas = match &opts.lambdas {
        Some(l) => l.clone(),
        None => {
            if opts.n_lambda == 0 || !(opts.lambda_min_ratio > 0.0 && opts.lambda_min_ratio < 1.0) {
                return Err(Error::Domain("need n_lambda >= 1 and 0 < lambda_min_ratio < 1".into()));
            }
            default_lambdas(red.lambda_max(&pf), opts.n_lambda, opts.lambda_min_ratio)
        }
    };
    validate_lambdas(&lambdas)?;
    let covariance = match opts.strategy {
        CdStrategy::Auto => p > 500,
        CdStrategy::Naive => false,
        CdStrategy::Covariance => true,
    };
    let sd_y = (red.y.norm_squared() / red.n as f64).sqrt();
    let tol = opts.tol * if sd_y > 0.0 { sd_y } else { 1.0 };

    let n_l = lambdas.len();
    let k_total = red.qr.as_ref().map_or(0, |(q, _)| q.ncols());
    let k_extra = k_total.saturating_sub(1);
    let mut coefs = DMatrix::zeros(p, n_l);
    let mut intercepts = vec![0.0; n_l];
    let mut unpen = DMatrix::zeros(k_extra, n_l);
    let mut n_iters = vec![0; n_l];
    let mut sizes = vec![0; n_l];
    let mut traces = opts.track_objective.then(Vec::new);

    let mut solver = Solver::new(&red, &pf, covariance);
    for (l, &lambda) in lambdas.iter().enumerate() {
        let mut trace = opts.track_objective.then(Vec::new);
        n_iters[l] = solver.solve(lambda, tol, opts.max_sweeps, trace.as_mut(), l)?;
        if let (Some(all), Some(t)) = (traces.as_mut(), trace) {
            all.push(t);
        }
        coefs.set_column(l, &solver.beta);
        let nz: Vec<usize> = solver.active.iter().copied().filter(|&j| solver.beta[j] != 0.0).collect();
        sizes[l] = nz.len();
        let alpha = red.alpha(x, y, &solver.beta, &nz);
        if k_total > 0 {
            intercepts[l] = alpha[0];
            for i in 0..k_extra {
                unpen[(i, l)] = alpha[i + 1];
            }
        }
    }
    Ok(LassoPath {
        method,
        lambdas,
        coefs,
        intercepts,
        unpenalized_coefs: unpen,
        n_iters,
        model_sizes: sizes,
        objective_trace: traces,
    })
}

/// `U alpha + X beta` at lambda index `l`; `u` holds the intercept column
/// first, then the other unpenalized columns.
pub fn fitted_values(x: &DMatrix<f64>, u: &DMatrix<f64>, path: &LassoPath, l: usize) -> DVector<f64> {
    x * path.coefs.column(l) + u * path.unpenalized_vector(l)
}

/// Objective `(1/2n)||y - U alpha - X beta||^2 + lambda sum pf_j |beta_j|`.
pub fn lasso_objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    u: &DMatrix<f64>,
    path: &LassoPath,
    l: usize,
    penalty_factor: Option<&[f64]>,
) -> f64 {
    let r = y - fitted_values(x, u, path, l);
    let pen: f64 = path
        .coefs
        .column(l)
        .iter()
        .enumerate()
        .map(|(j, b)| penalty_factor.map_or(1.0, |f| f[j]) * b.abs())
        .sum();
    r.norm_squared() / (2.0 * x.nrows() as f64) + path.lambdas[l] * pen
}

/// Largest violation of the LASSO optimality conditions at lambda index `l`:
/// `|x_j'r/n| <= lambda pf_j` for inactive `j`, `x_j'r/n = lambda pf_j sign(beta_j)`
/// for active `j`, and `U'r = 0` for the unpenalized block.
pub fn kkt_violation(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    u: &DMatrix<f64>,
    path: &LassoPath,
    l: usize,
    penalty_factor: Option<&[f64]>,
) -> f64 {
    let n = x.nrows() as f64;
    let r = y - fitted_values(x, u, path, l);
    let g = x.tr_mul(&r) / n;
    let lambda = path.lambdas[l];
    let mut worst = (u.tr_mul(&r) / n).amax();
    for j in 0..x.ncols() {
        let t = lambda * penalty_factor.map_or(1.0, |f| f[j]);
        let b = path.coefs[(j, l)];
        let v = if b == 0.0 {
            (g[j].abs() - t).max(0.0)
        } else {
            (g[j] - t * b.signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Design with a leading column of ones followed by `extra`.
pub fn with_intercept_column(n: usize, extra: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let k = extra.map_or(0, |e| e.ncols());
    let mut u = DMatrix::from_element(n, k + 1, 1.0);
    if let Some(e) = extra {
        u.columns_mut(1, k).copy_from(e);
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standardize_columns;
    use crate::rng::seeded;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn random_problem(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = seeded(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (x, _) = standardize_columns(&x, None).unwrap();
        let beta = DVector::from_fn(p, |j, _| if j < 3 { 1.0 - j as f64 * 0.4 } else { 0.0 });
        let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &x * beta + noise.add_scalar(2.0);
        (x, y)
    }

    #[test]
    fn lambda_max_gives_empty_model() {
        let (x, y) = random_problem(40, 15, 1);
        let path = lasso_path(&x, &y, &LassoOptions::default()).unwrap();
        assert_eq!(path.model_sizes[0], 0);
        assert!(path.coefs.column(0).iter().all(|&b| b == 0.0));
        assert!((path.intercepts[0] - y.mean()).abs() < 1e-12);
        assert!(path.lambdas.windows(2).all(|w| w[1] < w[0]));
        assert!((path.lambdas[99] / path.lambdas[0] - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn single_feature_soft_threshold() {
        let (x, y) = random_problem(30, 1, 2);
        let path = lasso_path(&x, &y, &LassoOptions { tol: 1e-12, ..LassoOptions::default() }).unwrap();
        let n = 30.0;
        let yc = y.add_scalar(-y.mean());
        let z = x.column(0).dot(&yc) / n;
        for (l, &lam) in path.lambdas.iter().enumerate() {
            let expected = z.signum() * (z.abs() - lam).max(0.0);
            assert!((path.coefs[(0, l)] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn kkt_and_monotone_objective() {
        let (x, y) = random_problem(50, 80, 3);
        let opts = LassoOptions { track_objective: true, ..LassoOptions::default() };
        let path = lasso_path(&x, &y, &opts).unwrap();
        let u = with_intercept_column(50, None);
        for l in 0..path.len() {
            assert!(kkt_violation(&x, &y, &u, &path, l, None) < 1e-6);
        }
        for t in path.objective_trace.as_ref().unwrap() {
            for w in t.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
            }
        }
    }

    #[test]
    fn strategies_agree() {
        let (x, y) = random_problem(40, 60, 4);
        let tight = LassoOptions { tol: 1e-11, ..LassoOptions::default() };
        let a = lasso_path(&x, &y, &LassoOptions { strategy: CdStrategy::Naive, ..tight.clone() }).unwrap();
        let b = lasso_path(&x, &y, &LassoOptions { strategy: CdStrategy::Covariance, ..tight }).unwrap();
        assert!((a.coefs - b.coefs).amax() < 1e-8);
        assert_eq!(a.model_sizes, b.model_sizes);
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let (x, y) = random_problem(40, 30, 5);
        let path = lasso_path(&x, &y, &LassoOptions::default()).unwrap();
        for &l in &[10usize, 40, 75, 99] {
            let cold = lasso_path(
                &x,
                &y,
                &LassoOptions { lambdas: Some(vec![path.lambdas[l]]), ..LassoOptions::default() },
            )
            .unwrap();
            assert!((cold.coef(0) - path.coef(l)).amax() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let (x, mut y) = random_problem(20, 5, 6);
        let bad = LassoOptions { lambdas: Some(vec![0.1, 0.2]), ..LassoOptions::default() };
        assert!(matches!(lasso_path(&x, &y, &bad), Err(Error::Domain(_))));
        y[3] = f64::NAN;
        assert!(matches!(lasso_path(&x, &y, &LassoOptions::default()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn non_convergence_reports_lambda_index() {
        let (x, y) = random_problem(30, 40, 7);
        let opts = LassoOptions { max_sweeps: 2, tol: 1e-15, ..LassoOptions::default() };
        match lasso_path(&x, &y, &opts) {
            Err(Error::NonConvergence { lambda_index, .. }) => assert!(lambda_index > 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_outcome_selects_nothing() {
        let (x, _) = random_problem(20, 5, 8);
        let y = DVector::from_element(20, 3.0);
        let path = lasso_path(&x, &y, &LassoOptions::default()).unwrap();
        assert!(path.model_sizes.iter().all(|&s| s == 0));
        assert!(path.intercepts.iter().all(|&b| (b - 3.0).abs() < 1e-12));
    }

    #[test]
    fn zero_penalty_factor_keeps_feature() {
        let (x, y) = random_problem(40, 10, 9);
        let mut pf = vec![1.0; 10];
        pf[7] = 0.0;
        let opts = LassoOptions { penalty_factor: Some(pf.clone()), tol: 1e-10, ..LassoOptions::default() };
        let path = lasso_path(&x, &y, &opts).unwrap();
        assert!(path.coefs[(7, 0)] != 0.0);
        let u = with_intercept_column(40, None);
        for l in 0..path.len() {
            assert!(kkt_violation(&x, &y, &u, &path, l, Some(&pf)) < 1e-6);
        }
    }
}
