//! K-fold cross-validation with method-appropriate prediction.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{select_entries, select_rows};
use crate::rng::{seeded, sub_seed};
use crate::solvers::lasso::{fit_path, LassoOptions, LassoPath, Method};
use crate::solvers::pca::{compute_pcs, PcBasis};
use crate::solvers::plmm::{blup_predict, estimate_kinship, plmm_fit_with, PlmmDecomposition};

/// A method together with its tuning (number of PCs for PC-LASSO).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodSpec {
    Lasso,
    PcLasso { k: usize },
    Plmm,
}

impl MethodSpec {
    pub fn method(self) -> Method {
        match self {
            MethodSpec::Lasso => Method::Lasso,
            MethodSpec::PcLasso { .. } => Method::PcLasso,
            MethodSpec::Plmm => Method::Plmm,
        }
    }

    pub fn label(self) -> String {
        match self {
            MethodSpec::Lasso => "lasso".into(),
            MethodSpec::PcLasso { k } => format!("pc_lasso_k{k}"),
            MethodSpec::Plmm => "plmm".into(),
        }
    }
}

/// Where PC-LASSO computes its components during cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcHandling {
    /// Loadings from the training rows; test rows are projected.
    #[default]
    WithinFold,
    /// Components of the full matrix, split by rows.
    FullData,
}

#[derive(Debug, Clone)]
pub struct CvOptions {
    pub n_folds: usize,
    pub seed: u64,
    pub lasso: LassoOptions,
    pub pc_handling: PcHandling,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { n_folds: 10, seed: 0, lasso: LassoOptions::default(), pc_handling: PcHandling::WithinFold }
    }
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// Mean squared prediction error per lambda over all held-out rows.
    pub cve: Vec<f64>,
    pub lambda_min_index: usize,
    pub fold_assignment: Vec<usize>,
    /// Held-out error of the training-mean predictor on the same folds.
    pub null_cve: f64,
}

#[derive(Debug, Clone)]
pub enum FitDetail {
    None,
    Pcs(PcBasis),
    Plmm(Box<PlmmDecomposition>),
}

#[derive(Debug, Clone)]
pub struct MethodFit {
    pub spec: MethodSpec,
    pub path: LassoPath,
    pub detail: FitDetail,
}

/// Full-data fit plus its cross-validation.
#[derive(Debug, Clone)]
pub struct CvFit {
    pub fit: MethodFit,
    pub cv: CvResult,
}

impl CvFit {
    pub fn lambda_min(&self) -> f64 {
        self.cv.lambdas[self.cv.lambda_min_index]
    }

    pub fn selected_coefs(&self) -> DVector<f64> {
        self.fit.path.coef(self.cv.lambda_min_index)
    }

    pub fn model_size(&self) -> usize {
        self.fit.path.model_sizes[self.cv.lambda_min_index]
    }

    /// Cross-validated prediction error at the selected lambda.
    pub fn prediction_error(&self) -> f64 {
        self.cv.cve[self.cv.lambda_min_index]
    }
}

/// Fit a method on all rows.
pub fn fit_method(spec: MethodSpec, x: &DMatrix<f64>, y: &DVector<f64>, opts: &LassoOptions) -> Result<MethodFit> {
    fit_method_inner(spec, x, y, opts, None)
}

fn fit_method_inner(
    spec: MethodSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    opts: &LassoOptions,
    kinship: Option<DMatrix<f64>>,
) -> Result<MethodFit> {
    match spec {
        MethodSpec::Lasso => Ok(MethodFit {
            spec,
            path: fit_path(x, y, None, true, Method::Lasso, opts)?,
            detail: FitDetail::None,
        }),
        MethodSpec::PcLasso { k: 0 } => Ok(MethodFit {
            spec,
            path: fit_path(x, y, None, true, Method::PcLasso, opts)?,
            detail: FitDetail::None,
        }),
        MethodSpec::PcLasso { k } => {
            let basis = compute_pcs(x, k)?;
            let path = fit_path(x, y, Some(&basis.scores), true, Method::PcLasso, opts)?;
            Ok(MethodFit { spec, path, detail: FitDetail::Pcs(basis) })
        }
        MethodSpec::Plmm => {
            let k = match kinship {
                Some(k) => k,
                None => estimate_kinship(x)?,
            };
            let decomp = PlmmDecomposition::fit(k, y)?;
            let fit = plmm_fit_with(x, y, decomp, opts)?;
            Ok(MethodFit { spec, path: fit.path, detail: FitDetail::Plmm(Box::new(fit.decomp)) })
        }
    }
}

/// Seeded fold labels: a random permutation dealt round-robin, so fold sizes
/// differ by at most one.
pub fn assign_folds(n: usize, n_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if n_folds < 2 {
        return Err(Error::Domain(format!("need at least 2 folds, got {n_folds}")));
    }
    if n < 3 * n_folds {
        return Err(Error::FoldTooSmall { n, folds: n_folds });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded(sub_seed(seed, 0)));
    let mut folds = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos % n_folds;
    }
    Ok(folds)
}

struct FoldOutcome {
    sq_err: Vec<f64>,
    null_sq_err: f64,
}

pub fn cross_validate(spec: MethodSpec, x: &DMatrix<f64>, y: &DVector<f64>, opts: &CvOptions) -> Result<CvFit> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::Dimension("X and y row counts differ".into()));
    }
    let folds = assign_folds(n, opts.n_folds, opts.seed)?;
    cross_validate_with_folds(spec, x, y, &folds, opts)
}

/// Cross-validation over given fold labels `0..K`; `opts.n_folds` and
/// `opts.seed` are ignored.
pub fn cross_validate_with_folds(
    spec: MethodSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    folds: &[usize],
    opts: &CvOptions,
) -> Result<CvFit> {
    let n = x.nrows();
    if y.len() != n || folds.len() != n {
        return Err(Error::Dimension("X, y and fold labels must have the same rows".into()));
    }
    let n_folds = folds.iter().max().map_or(0, |m| m + 1);
    if n_folds < 2 {
        return Err(Error::Domain(format!("need at least 2 folds, got {n_folds}")));
    }
    if (0..n_folds).any(|f| !folds.contains(&f)) {
        return Err(Error::Domain("fold labels must cover 0..K without gaps".into()));
    }
    let folds = folds.to_vec();
    let kinship = match spec {
        MethodSpec::Plmm => Some(estimate_kinship(x)?),
        _ => None,
    };
    let full = fit_method_inner(spec, x, y, &opts.lasso, kinship.clone())?;
    let lambdas = full.path.lambdas.clone();
    let fold_opts = LassoOptions { lambdas: Some(lambdas.clone()), ..opts.lasso.clone() };
    let full_pcs = match (&full.detail, opts.pc_handling) {
        (FitDetail::Pcs(b), PcHandling::FullData) => Some(b.scores.clone()),
        _ => None,
    };

    let outcomes: Vec<Result<FoldOutcome>> = (0..n_folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            fold_errors(spec, x, y, &train, &test, &fold_opts, kinship.as_ref(), full_pcs.as_ref())
        })
        .collect();

    let mut sq = vec![0.0; lambdas.len()];
    let mut null_sq = 0.0;
    for out in outcomes {
        let out = out?;
        for (acc, v) in sq.iter_mut().zip(&out.sq_err) {
            *acc += v;
        }
        null_sq += out.null_sq_err;
    }
    let cve: Vec<f64> = sq.iter().map(|v| v / n as f64).collect();
    let mut best = 0;
    for (l, &v) in cve.iter().enumerate() {
        if v < cve[best] {
            best = l;
        }
    }
    Ok(CvFit {
        fit: full,
        cv: CvResult {
            lambdas,
            cve,
            lambda_min_index: best,
            fold_assignment: folds,
            null_cve: null_sq / n as f64,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn fold_errors(
    spec: MethodSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    train: &[usize],
    test: &[usize],
    opts: &LassoOptions,
    kinship: Option<&DMatrix<f64>>,
    full_pcs: Option<&DMatrix<f64>>,
) -> Result<FoldOutcome> {
    let (x_tr, y_tr) = (select_rows(x, train), select_entries(y, train));
    let (x_te, y_te) = (select_rows(x, test), select_entries(y, test));
    let n_l = opts.lambdas.as_ref().map_or(0, |l| l.len());
    let mut sq_err = vec![0.0; n_l];
    let mut add = |l: usize, pred: &DVector<f64>| {
        sq_err[l] += (&y_te - pred).norm_squared();
    };
    match spec {
        MethodSpec::Lasso | MethodSpec::PcLasso { k: 0 } => {
            let path = fit_path(&x_tr, &y_tr, None, true, spec.method(), opts)?;
            for l in 0..path.len() {
                add(l, &(&x_te * path.coefs.column(l)).add_scalar(path.intercepts[l]));
            }
        }
        MethodSpec::PcLasso { k } => {
            let (c_tr, c_te) = match full_pcs {
                Some(c) => (select_rows(c, train), select_rows(c, test)),
                None => {
                    let basis = compute_pcs(&x_tr, k)?;
                    let c_te = basis.project(&x_te);
                    (basis.scores, c_te)
                }
            };
            let path = fit_path(&x_tr, &y_tr, Some(&c_tr), true, Method::PcLasso, opts)?;
            for l in 0..path.len() {
                let pred = (&x_te * path.coefs.column(l) + &c_te * path.unpenalized_coefs.column(l))
                    .add_scalar(path.intercepts[l]);
                add(l, &pred);
            }
        }
        MethodSpec::Plmm => {
            let k = kinship.expect("kinship computed for PLMM");
            let order: Vec<usize> = train.iter().chain(test).copied().collect();
            let joint = DMatrix::from_fn(order.len(), order.len(), |i, j| k[(order[i], order[j])]);
            let k_tr = joint.view((0, 0), (train.len(), train.len())).into_owned();
            let decomp = PlmmDecomposition::fit(k_tr, &y_tr)?;
            let comps = decomp.components;
            let fit = plmm_fit_with(&x_tr, &y_tr, decomp, opts)?;
            for l in 0..fit.path.len() {
                let beta = fit.path.coef(l);
                let pred = blup_predict(&beta, fit.path.intercepts[l], &x_te, &x_tr, &y_tr, &joint, &comps)?;
                add(l, &pred);
            }
        }
    }
    let mean_tr = y_tr.mean();
    let null_sq_err = y_te.iter().map(|v| (v - mean_tr).powi(2)).sum();
    Ok(FoldOutcome { sq_err, null_sq_err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced_and_seeded() {
        let f = assign_folds(103, 10, 5).unwrap();
        let mut counts = [0usize; 10];
        for &k in &f {
            counts[k] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1);
        assert_eq!(f, assign_folds(103, 10, 5).unwrap());
        assert_ne!(f, assign_folds(103, 10, 6).unwrap());
    }

    #[test]
    fn fold_errors_reported() {
        assert!(matches!(assign_folds(25, 10, 0), Err(Error::FoldTooSmall { .. })));
        assert!(matches!(assign_folds(25, 1, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn labels() {
        assert_eq!(MethodSpec::PcLasso { k: 10 }.label(), "pc_lasso_k10");
        assert_eq!(MethodSpec::Plmm.label(), "plmm");
    }
}
