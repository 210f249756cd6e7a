//! Cross-validation and the selection/estimation metrics.

pub mod cv;
pub mod metrics;

pub use cv::{
    assign_folds, cross_validate, cross_validate_with_folds, fit_method, CvFit, CvOptions, CvResult, FitDetail, MethodFit, MethodSpec, PcHandling,
};
pub use metrics::{
    aggregate_replications, estimation_errors, pauc, pauc_values, precision_curve, quantile, MethodSummary,
    MetricsSummary, PrecisionCurve, ReplicationRecord, PAUC_LIMIT, QUANTILE_PROBS,
};
