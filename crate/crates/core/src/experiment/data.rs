//! Deterministic train/test data generation for registered targets.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use super::targets::TargetFunction;
use crate::data::DataSet;
use crate::error::{Error, Result};

/// Training points: `n_train` inputs uniform over the target's box under the
/// given seed, coordinates drawn point-major.
pub fn training_data(target: &TargetFunction, n_train: usize, seed: u64) -> Result<DataSet> {
    if n_train == 0 {
        return Err(Error::validation("data: need at least one training point"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n_train * target.dim);
    let mut ys = Vec::with_capacity(n_train);
    let mut point = vec![0.0; target.dim];
    for _ in 0..n_train {
        for (slot, &(lo, hi)) in point.iter_mut().zip(target.domain) {
            *slot = rng.random_range(lo..hi);
        }
        xs.extend_from_slice(&point);
        ys.push(target.eval(&point));
    }
    DataSet::new(target.dim, xs, ys)
}

/// Test points: an equidistant grid including the box edges. In one dimension
/// the grid has exactly `n_test` points; in higher dimensions each axis gets
/// `floor(n_test^(1/dim))` points (at least two), so the actual size is the
/// largest full grid not exceeding `n_test`.
pub fn test_data(target: &TargetFunction, n_test: usize) -> Result<DataSet> {
    let side = if target.dim == 1 {
        n_test
    } else {
        let mut s = (n_test as f64).powf(1.0 / target.dim as f64).floor() as usize;
        // Floating-point roundoff can land one below the true root.
        while (s + 1).pow(target.dim as u32) <= n_test {
            s += 1;
        }
        s
    };
    if side < 2 {
        return Err(Error::validation(format!(
            "data: {n_test} test points cannot fill a {}-dimensional grid with two points per axis",
            target.dim
        )));
    }

    let axes: Vec<Vec<f64>> = target
        .domain
        .iter()
        .map(|&(lo, hi)| {
            (0..side)
                .map(|k| lo + (hi - lo) * k as f64 / (side - 1) as f64)
                .collect()
        })
        .collect();
    let total = side.pow(target.dim as u32);
    let mut xs = Vec::with_capacity(total * target.dim);
    let mut ys = Vec::with_capacity(total);
    let mut point = vec![0.0; target.dim];
    for flat in 0..total {
        let mut rest = flat;
        // Last coordinate varies fastest.
        for d in (0..target.dim).rev() {
            point[d] = axes[d][rest % side];
            rest /= side;
        }
        xs.extend_from_slice(&point);
        ys.push(target.eval(&point));
    }
    DataSet::new(target.dim, xs, ys)
}

/// Training and test sets in one call.
pub fn generate_data(
    target: &TargetFunction,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(DataSet, DataSet)> {
    Ok((training_data(target, n_train, seed)?, test_data(target, n_test)?))
}
