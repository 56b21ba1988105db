//! Permutation-trained shallow ReLU networks.
//!
//! This crate provides, end to end:
//!
//! * a shallow network type whose first layer is frozen at initialization and
//!   whose output weights are trained only up to permutation of their initial
//!   values ([`net`]);
//! * constructive builders that, given a continuous 1-D target and an accuracy
//!   budget, emit a network whose output weights are exactly a rearrangement
//!   of the paired initialization — with a trained-scale variant, a
//!   fixed-scale variant, and a randomized-initialization variant
//!   ([`construct`]);
//! * the training loop: Adam on the output layer plus a periodic rank-match
//!   projection back onto the initial weight multiset ([`train`]);
//! * a tracer that records which weight positions each projection actually
//!   moves ([`trace`]);
//! * an experiment harness with named targets, initialization strategies,
//!   deterministic data generation, parallel sweeps, and log-log rate fits
//!   ([`experiment`]).

pub mod construct;
pub mod data;
pub mod error;
pub mod experiment;
pub mod net;
pub mod trace;
pub mod train;

pub use data::DataSet;
pub use error::{Error, Result};
pub use net::{
    same_multiset, linspace, unit_grid, unit_loc, Activation, Basis, EvalGrid, Gradients, ReluNet,
};
pub use trace::{trace_training, TraceLog};
pub use train::{laperm_train, permute_to_initial, train_free, TrainConfig, TrainReport};
