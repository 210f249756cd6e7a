//! LASSO, PC-LASSO and PLMM estimators.

mod chol;
pub mod lasso;
pub mod pca;
pub mod plmm;

pub use lasso::{
    default_lambdas, fitted_values, kkt_violation, lambda_max, lasso_objective, lasso_path, lasso_path_with_unpenalized,
    with_intercept_column, CdStrategy, LassoOptions, LassoPath, Method,
};
pub use pca::{compute_pcs, pc_lasso_fit, pc_lasso_path, PcBasis, PcLassoFit};
pub use plmm::{
    blup_predict, blup_predict_stacked, estimate_kinship, fit_null_variance_components, plmm_fit, plmm_fit_with, plmm_path,
    rotate, PlmmDecomposition, PlmmFit, Rotated, VarianceComponents, ETA_BOUNDS,
};
