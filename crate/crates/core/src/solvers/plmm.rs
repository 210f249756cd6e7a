//! Penalized linear mixed model: kinship, null-model variance components,
//! whitening and BLUP prediction.

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::lasso::{fit_path, LassoOptions, LassoPath, Method};
use crate::error::{Error, Result};
use crate::linalg::{asymmetry, ensure_finite_matrix, ensure_finite_vector, sorted_symmetric_eigen};

pub const ETA_BOUNDS: (f64, f64) = (0.01, 0.99);
const GRID_POINTS: usize = 100;
const GOLDEN_TOL: f64 = 1e-6;
const EIGEN_FLOOR: f64 = 1e-10;

/// `K = XX'/p`, the instance-by-instance similarity of standardized features.
pub fn estimate_kinship(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite_matrix(x, "X")?;
    let p = x.ncols();
    if p == 0 {
        return Err(Error::Dimension("X has no columns".into()));
    }
    let mut k = x * x.transpose() / p as f64;
    // exact symmetry
    let n = k.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComponents {
    /// `sigma_s^2 / (sigma_s^2 + sigma_e^2)`.
    pub eta: f64,
    pub sigma_s2: f64,
    pub sigma_e2: f64,
    pub loglik: f64,
    /// The profile likelihood is flat over the eta grid (e.g. `K = cI`);
    /// only the total variance is identified.
    pub flat: bool,
    pub at_boundary: bool,
}

impl VarianceComponents {
    pub fn total(&self) -> f64 {
        self.sigma_s2 + self.sigma_e2
    }
}

/// Profile log-likelihood of rotated, centered outcomes `yr` with covariance
/// `sigma^2 (eta d + 1 - eta)`; returns `(loglik, sigma^2)`.
fn profile(yr: &DVector<f64>, d: &DVector<f64>, eta: f64) -> (f64, f64) {
    let n = yr.len() as f64;
    let mut quad = 0.0;
    let mut logdet = 0.0;
    for (y, di) in yr.iter().zip(d.iter()) {
        let w = eta * di + (1.0 - eta);
        quad += y * y / w;
        logdet += w.ln();
    }
    let s2 = quad / n;
    let ll = -0.5 * n * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0) - 0.5 * logdet;
    (ll, s2)
}

fn clamp_eigenvalues(vals: &DVector<f64>) -> DVector<f64> {
    vals.map(|v| if v < EIGEN_FLOOR { 0.0 } else { v })
}

/// Maximum-likelihood variance components of the intercept-only null model,
/// `y ~ N(mu 1, sigma_s^2 K + sigma_e^2 I)`, over `eta` in `[0.01, 0.99]`.
pub fn fit_null_variance_components(y: &DVector<f64>, kinship: &DMatrix<f64>) -> Result<VarianceComponents> {
    check_kinship(kinship, y.len())?;
    let (vals, vecs) = sorted_symmetric_eigen(kinship);
    fit_null_from_eigen(y, &clamp_eigenvalues(&vals), &vecs)
}

fn check_kinship(k: &DMatrix<f64>, n: usize) -> Result<()> {
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::Dimension(format!("kinship must be {n} x {n}")));
    }
    ensure_finite_matrix(k, "kinship")?;
    if asymmetry(k) > 1e-10 * k.amax().max(1.0) {
        return Err(Error::Domain("kinship is not symmetric".into()));
    }
    Ok(())
}

fn fit_null_from_eigen(y: &DVector<f64>, d: &DVector<f64>, u: &DMatrix<f64>) -> Result<VarianceComponents> {
    ensure_finite_vector(y, "y")?;
    if d.iter().any(|v| *v < -1e-10) {
        return Err(Error::Domain("kinship has negative eigenvalues".into()));
    }
    let yc = y.add_scalar(-y.mean());
    let yr = u.tr_mul(&yc);
    let (lo, hi) = ETA_BOUNDS;
    if yr.norm_squared() == 0.0 {
        warn!("outcome has zero variance; variance components are zero");
        return Ok(VarianceComponents {
            eta: lo,
            sigma_s2: 0.0,
            sigma_e2: 0.0,
            loglik: f64::INFINITY,
            flat: true,
            at_boundary: true,
        });
    }
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let lls: Vec<f64> = grid.iter().map(|&e| profile(&yr, d, e).0).collect();
    let best_ll = lls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let worst_ll = lls.iter().cloned().fold(f64::INFINITY, f64::min);
    // smallest eta attaining the maximum
    let best = lls.iter().position(|&v| v >= best_ll - 1e-9).unwrap_or(0);
    let flat = best_ll - worst_ll <= 1e-9 * best_ll.abs().max(1.0);

    let mut eta = grid[best];
    if flat {
        warn!("null-model likelihood is flat in eta; only the total variance is identified");
    } else {
        let mut a = grid[best.saturating_sub(1)];
        let mut b = grid[(best + 1).min(GRID_POINTS - 1)];
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - ratio * (b - a);
        let mut e = a + ratio * (b - a);
        let mut fc = profile(&yr, d, c).0;
        let mut fe = profile(&yr, d, e).0;
        while b - a > GOLDEN_TOL {
            if fc >= fe {
                b = e;
                e = c;
                fe = fc;
                c = b - ratio * (b - a);
                fc = profile(&yr, d, c).0;
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + ratio * (b - a);
                fe = profile(&yr, d, e).0;
            }
        }
        let refined = 0.5 * (a + b);
        if profile(&yr, d, refined).0 >= best_ll {
            eta = refined;
        }
    }
    let (loglik, s2) = profile(&yr, d, eta);
    let at_boundary = eta - lo < GOLDEN_TOL || hi - eta < GOLDEN_TOL;
    if at_boundary && !flat {
        warn!("eta estimate {eta:.4} is at the boundary of [{lo}, {hi}]");
    }
    Ok(VarianceComponents {
        eta,
        sigma_s2: s2 * eta,
        sigma_e2: s2 * (1.0 - eta),
        loglik,
        flat,
        at_boundary,
    })
}

/// Kinship eigendecomposition with fitted variance components.
#[derive(Debug, Clone)]
pub struct PlmmDecomposition {
    pub kinship: DMatrix<f64>,
    /// Descending, clamped at zero.
    pub eigvals: DVector<f64>,
    pub eigvecs: DMatrix<f64>,
    pub components: VarianceComponents,
}

impl PlmmDecomposition {
    /// Eigendecompose `kinship` and fit the null model to `y`.
    pub fn fit(kinship: DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        check_kinship(&kinship, y.len())?;
        let (vals, vecs) = sorted_symmetric_eigen(&kinship);
        let vals = clamp_eigenvalues(&vals);
        let components = fit_null_from_eigen(y, &vals, &vecs)?;
        Ok(PlmmDecomposition { kinship, eigvals: vals, eigvecs: vecs, components })
    }

    /// Decomposition with fixed variance components.
    pub fn with_components(kinship: DMatrix<f64>, eta: f64, total: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) || !(total >= 0.0) {
            return Err(Error::Domain("eta must lie in [0, 1] and total variance be >= 0".into()));
        }
        let n = kinship.nrows();
        check_kinship(&kinship, n)?;
        let (vals, vecs) = sorted_symmetric_eigen(&kinship);
        Ok(PlmmDecomposition {
            kinship,
            eigvals: clamp_eigenvalues(&vals),
            eigvecs: vecs,
            components: VarianceComponents {
                eta,
                sigma_s2: total * eta,
                sigma_e2: total * (1.0 - eta),
                loglik: f64::NAN,
                flat: false,
                at_boundary: false,
            },
        })
    }

    pub fn eta(&self) -> f64 {
        self.components.eta
    }

    /// `sigma_s^2 K + sigma_e^2 I`.
    pub fn sigma(&self) -> DMatrix<f64> {
        let n = self.kinship.nrows();
        &self.kinship * self.components.sigma_s2 + DMatrix::identity(n, n) * self.components.sigma_e2
    }

    /// `Sigma` rebuilt from the eigendecomposition.
    pub fn sigma_from_eigen(&self) -> DMatrix<f64> {
        let c = &self.components;
        let d = self.eigvals.map(|v| c.sigma_s2 * v + c.sigma_e2);
        &self.eigvecs * DMatrix::from_diagonal(&d) * self.eigvecs.transpose()
    }

    /// `U diag(eta d + 1 - eta)^{-1/2} U'`, i.e. `Sigma^{-1/2}` up to a
    /// positive scalar.
    pub fn whitening(&self) -> Result<DMatrix<f64>> {
        let eta = self.components.eta;
        let mut w = DVector::zeros(self.eigvals.len());
        for (i, &d) in self.eigvals.iter().enumerate() {
            let v = eta * d + (1.0 - eta);
            if v <= 1e-12 {
                return Err(Error::Singular(format!("eta d + 1 - eta = {v:e} at eigenvalue {i}")));
            }
            w[i] = v.sqrt().recip();
        }
        let mut scaled = self.eigvecs.clone();
        for (i, mut col) in scaled.column_iter_mut().enumerate() {
            col *= w[i];
        }
        Ok(scaled * self.eigvecs.transpose())
    }
}

/// Rotated features, outcome and intercept column.
#[derive(Debug, Clone)]
pub struct Rotated {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub intercept: DVector<f64>,
}

pub fn rotate(x: &DMatrix<f64>, y: &DVector<f64>, decomp: &PlmmDecomposition) -> Result<Rotated> {
    let n = decomp.kinship.nrows();
    if x.nrows() != n || y.len() != n {
        return Err(Error::Dimension("rotation needs the instances the decomposition was fitted on".into()));
    }
    let w = decomp.whitening()?;
    Ok(Rotated {
        x: &w * x,
        y: &w * y,
        intercept: w.column_sum(),
    })
}

#[derive(Debug, Clone)]
pub struct PlmmFit {
    pub path: LassoPath,
    pub decomp: PlmmDecomposition,
}

pub fn plmm_fit(x: &DMatrix<f64>, y: &DVector<f64>, opts: &LassoOptions) -> Result<PlmmFit> {
    let decomp = PlmmDecomposition::fit(estimate_kinship(x)?, y)?;
    plmm_fit_with(x, y, decomp, opts)
}

/// LASSO on the whitened data with the rotated intercept left unpenalized.
/// Rotated columns are not re-standardized.
pub fn plmm_fit_with(x: &DMatrix<f64>, y: &DVector<f64>, decomp: PlmmDecomposition, opts: &LassoOptions) -> Result<PlmmFit> {
    let rot = rotate(x, y, &decomp)?;
    let icol = DMatrix::from_column_slice(rot.intercept.len(), 1, rot.intercept.as_slice());
    let path = fit_path(&rot.x, &rot.y, Some(&icol), false, Method::Plmm, opts)?;
    Ok(PlmmFit { path, decomp })
}

pub fn plmm_path(x: &DMatrix<f64>, y: &DVector<f64>, opts: &LassoOptions) -> Result<LassoPath> {
    plmm_fit(x, y, opts).map(|f| f.path)
}

/// Best linear unbiased prediction
/// `mu + X_new beta + Sigma_21 Sigma_11^{-1} (y_old - mu - X_old beta)`,
/// where `kinship_joint` is the kinship of the stacked rows `[X_old; X_new]`,
/// `Sigma_11 = sigma_s^2 K_11 + sigma_e^2 I` and `Sigma_21 = sigma_s^2 K_21`.
pub fn blup_predict(
    beta: &DVector<f64>,
    intercept: f64,
    x_new: &DMatrix<f64>,
    x_old: &DMatrix<f64>,
    y_old: &DVector<f64>,
    kinship_joint: &DMatrix<f64>,
    components: &VarianceComponents,
) -> Result<DVector<f64>> {
    let (n_old, n_new) = (x_old.nrows(), x_new.nrows());
    if kinship_joint.nrows() != n_old + n_new || kinship_joint.ncols() != n_old + n_new {
        return Err(Error::Dimension("joint kinship must cover old and new rows".into()));
    }
    if y_old.len() != n_old || beta.len() != x_old.ncols() || x_new.ncols() != x_old.ncols() {
        return Err(Error::Dimension("inconsistent BLUP inputs".into()));
    }
    let mut pred = (x_new * beta).add_scalar(intercept);
    let resid = y_old - (x_old * beta).add_scalar(intercept);
    if resid.iter().all(|v| *v == 0.0) || components.sigma_s2 == 0.0 {
        return Ok(pred);
    }
    let s11 = kinship_joint.view((0, 0), (n_old, n_old)) * components.sigma_s2
        + DMatrix::identity(n_old, n_old) * components.sigma_e2;
    let chol = s11
        .cholesky()
        .ok_or_else(|| Error::Singular("Sigma_11 is not positive definite".into()))?;
    let weights = chol.solve(&resid);
    let k21 = kinship_joint.view((n_old, 0), (n_new, n_old));
    pred += k21 * weights * components.sigma_s2;
    Ok(pred)
}

/// [`blup_predict`] with the joint kinship computed from the stacked rows.
pub fn blup_predict_stacked(
    beta: &DVector<f64>,
    intercept: f64,
    x_new: &DMatrix<f64>,
    x_old: &DMatrix<f64>,
    y_old: &DVector<f64>,
    components: &VarianceComponents,
) -> Result<DVector<f64>> {
    let (n_old, n_new, p) = (x_old.nrows(), x_new.nrows(), x_old.ncols());
    let mut stacked = DMatrix::zeros(n_old + n_new, p);
    stacked.rows_mut(0, n_old).copy_from(x_old);
    stacked.rows_mut(n_old, n_new).copy_from(x_new);
    let k = estimate_kinship(&stacked)?;
    blup_predict(beta, intercept, x_new, x_old, y_old, &k, components)
}
