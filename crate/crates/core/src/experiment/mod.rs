//! Experiment harness: named targets, initialization strategies, seeded data,
//! parallel sweeps, and convergence-rate fits.

pub mod basis;
pub mod data;
pub mod init;
pub mod sweep;
pub mod targets;

pub use basis::{direction_pairs, plan_equidistant, projection_range, BasisPlan};
pub use data::{generate_data, test_data, training_data};
pub use init::{build_net, initialize, InitStrategy, ALL_STRATEGIES};
pub use sweep::{
    config_hash, dim_defaults, fit_rate, load_results, median_sup_by_n, paper_dim_defaults,
    run_cell, run_sweep, CellResult, DimDefaults, SweepConfig, SweepResult,
};
pub use targets::{by_name, TargetFunction, REGISTRY};
