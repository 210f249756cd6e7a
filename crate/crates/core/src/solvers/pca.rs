//! Principal-component scores and PC-LASSO.

use nalgebra::{DMatrix, DVector};

use super::lasso::{fit_path, LassoOptions, LassoPath, Method};
use crate::error::{Error, Result};
use crate::linalg::sorted_symmetric_eigen;

/// Leading principal components of a feature matrix.
///
/// Score columns are scaled to unit (population) standard deviation; new rows
/// are mapped with [`PcBasis::project`] using the same centering and scaling.
#[derive(Debug, Clone)]
pub struct PcBasis {
    pub scores: DMatrix<f64>,
    /// p x k orthonormal directions.
    pub loadings: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub center: DVector<f64>,
    pub score_scale: Vec<f64>,
}

impl PcBasis {
    pub fn k(&self) -> usize {
        self.loadings.ncols()
    }

    /// Scores of new rows in the scaled basis.
    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut xc = x.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.center[j]);
        }
        let mut s = xc * &self.loadings;
        for (c, mut col) in s.column_iter_mut().enumerate() {
            col *= self.score_scale[c];
        }
        s
    }

    /// Variance of each raw (unscaled) score column, `d_i^2 / n`.
    pub fn explained_variance(&self) -> Vec<f64> {
        let n = self.scores.nrows() as f64;
        self.singular_values.iter().map(|d| d * d / n).collect()
    }
}

pub fn compute_pcs(x: &DMatrix<f64>, k: usize) -> Result<PcBasis> {
    let (n, p) = x.shape();
    if k == 0 || k > (n.saturating_sub(1)).min(p) {
        return Err(Error::Rank(format!("k = {k} must lie in 1..=min(n - 1, p) = {}", (n.saturating_sub(1)).min(p))));
    }
    let center = DVector::from_fn(p, |j, _| x.column(j).mean());
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-center[j]);
    }
    // eigendecompose the smaller Gram matrix
    let (vals, loadings) = if n <= p {
        let (vals, u) = sorted_symmetric_eigen(&(&xc * xc.transpose()));
        let mut v = DMatrix::zeros(p, k);
        for i in 0..k {
            let d = vals[i].max(0.0).sqrt();
            if d > 0.0 {
                v.set_column(i, &(xc.tr_mul(&u.column(i)) / d));
            }
        }
        (vals, v)
    } else {
        let (vals, v) = sorted_symmetric_eigen(&xc.tr_mul(&xc));
        (vals, v.columns(0, k).into_owned())
    };
    let top = vals[0].max(0.0);
    if vals[k - 1] <= 1e-10 * top || top == 0.0 {
        return Err(Error::Rank(format!("k = {k} exceeds the numerical rank of X")));
    }
    let mut loadings = loadings;
    for mut col in loadings.column_iter_mut() {
        let (imax, _) = col.iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        let norm = col.norm();
        col /= norm;
    }
    let singular_values: Vec<f64> = (0..k).map(|i| vals[i].sqrt()).collect();
    let score_scale: Vec<f64> = singular_values.iter().map(|d| (n as f64).sqrt() / d).collect();
    let mut scores = &xc * &loadings;
    for (c, mut col) in scores.column_iter_mut().enumerate() {
        col *= score_scale[c];
    }
    Ok(PcBasis { scores, loadings, singular_values, center, score_scale })
}

/// PC-LASSO fit together with the basis used.
#[derive(Debug, Clone)]
pub struct PcLassoFit {
    pub path: LassoPath,
    pub basis: Option<PcBasis>,
}

/// LASSO with the leading `k` principal-component scores as unpenalized
/// covariates. `k = 0` is the plain LASSO.
pub fn pc_lasso_fit(x: &DMatrix<f64>, y: &DVector<f64>, k: usize, opts: &LassoOptions) -> Result<PcLassoFit> {
    if k == 0 {
        let path = fit_path(x, y, None, true, Method::PcLasso, opts)?;
        return Ok(PcLassoFit { path, basis: None });
    }
    let basis = compute_pcs(x, k)?;
    let path = fit_path(x, y, Some(&basis.scores), true, Method::PcLasso, opts)?;
    Ok(PcLassoFit { path, basis: Some(basis) })
}

pub fn pc_lasso_path(x: &DMatrix<f64>, y: &DVector<f64>, k: usize, opts: &LassoOptions) -> Result<LassoPath> {
    pc_lasso_fit(x, y, k, opts).map(|f| f.path)
}
