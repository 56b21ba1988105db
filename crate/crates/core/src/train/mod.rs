//! Permutation-constrained training.
//!
//! [`adam`] supplies the optimizer step, [`project`] the rank-matching
//! projection onto the initial coefficient multiset, and [`laperm`] the
//! training loop that alternates free minibatch descent with periodic
//! projection.

pub mod adam;
pub mod laperm;
pub mod project;

pub use adam::{adam_step, AdamParams, AdamState};
pub use laperm::{
    laperm_train, laperm_train_with, moved_count, train_free, EpochRecord, PermutationEvent,
    TrainConfig, TrainReport,
};
pub use project::permute_to_initial;
