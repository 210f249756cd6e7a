//! The linear confounding model `x = S(d + Az)`, `y = x'beta + z'gamma + eps`.

pub mod decomposition;
pub mod design;
pub mod generate;
pub mod scenario;

pub use decomposition::{absorb_z_covariance, compute_ratios, compute_tau, compute_var_psi, tau_norm_closed_form, Ratios};
pub use design::{build_design, build_design_with, BlockSigns, ConfoundingDesign};
pub use generate::{encode_levels, generate_dataset, generate_dataset_with, generate_semisynthetic, Dataset, SignalScaling, Truth};
pub use scenario::{exact_signal_size, solve_scenario, Convention, ScenarioParams, ScenarioSpec};
