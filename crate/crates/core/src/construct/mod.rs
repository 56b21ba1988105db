//! Constructive network builders.
//!
//! Everything here turns a continuous 1-D target and an accuracy budget into
//! a paired-initialization network whose output weights are exactly a
//! rearrangement of their initial values. The pipeline: decompose the target
//! into a staircase ([`pwc`]), realize each jump with a four-pair coefficient
//! gadget ([`fourpair`]), cancel the unused pairs ([`signs`]), and assemble
//! ([`theorem1`], [`theorem2`], [`random`]). [`rates`] carries the
//! closed-form L2 error of a single window.

pub mod common;
pub mod fourpair;
pub mod ledger;
pub mod pwc;
pub mod random;
pub mod rates;
pub mod signs;
pub mod theorem1;
pub mod theorem2;

pub use common::{validate_eps, BuildOptions, ThetaSink};
pub use fourpair::{
    constant_matching, linear_piece_sup, linear_reorganize, step_matching, validate_window,
    FourPairAssignment, FourPairKind,
};
pub use ledger::{
    rle_signs, ConstantBlock, ConstructionLedger, DomainMap, ErrorBudget, IndexWindow,
};
pub use pwc::{decompose_target, decompose_with_jump, PiecewiseConstant, Step};
pub use random::{
    build_random, match_probability, match_subnetwork, simulate_match_probability, SubnetMatch,
};
pub use rates::{pseudo_copy_error_l2, step_error_l2, step_error_l2_quadrature};
pub use signs::{
    annihilate_pairs, annihilate_remainder, sign_assignment, Annihilation, RetiredPair,
    SignChoice,
};
pub use theorem1::build_theorem1;
pub use theorem2::build_theorem2;
