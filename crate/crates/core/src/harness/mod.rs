//! Configuration, ingestion, experiment orchestration and result files.

pub mod config;
pub mod experiment;
pub mod fit;
pub mod io;
pub mod output;
pub mod semisynth;

pub use config::{method_specs, ExperimentConfig, Grid, KValue, MethodKind};
pub use experiment::{
    evaluate_dataset, resolve_threads, run_experiment, run_experiment_with, run_to_dir, solve_grid, EvalSettings,
    ExperimentResult, Failure, ScenarioResult,
};
pub use fit::{fit_report, format_fit_table, write_fit_report, FitReport, FitRow};
pub use io::{load_matrix, read_cache, write_cache, write_dataset, write_matrix_csv, write_path_csv, Table};
pub use output::{read_records, report};
pub use semisynth::{format_summary_table, run_semisynth, write_semisynth, SemisynthConfig, SemisynthResult};
