//! Rank-matching projection of free coefficients onto a fixed value multiset.

use crate::error::{Error, Result};

/// Rearrange the values of `w_init` so that their ranks match the ranks of
/// `theta_free`: the i-th smallest initial value lands at the position held by
/// the i-th smallest free coefficient. Ties in `theta_free` are broken by
/// ascending position, so equal free values keep their relative order.
///
/// Among all rearrangements of `w_init`, the returned one minimizes the
/// squared distance to `theta_free`.
pub fn permute_to_initial(theta_free: &[f64], w_init: &[f64]) -> Result<Vec<f64>> {
    if theta_free.len() != w_init.len() {
        return Err(Error::validation(format!(
            "projection: {} free coefficients vs {} initial values",
            theta_free.len(),
            w_init.len()
        )));
    }
    if theta_free.iter().any(|v| v.is_nan()) || w_init.iter().any(|v| v.is_nan()) {
        return Err(Error::validation("projection: values must not be NaN"));
    }

    let mut order: Vec<usize> = (0..theta_free.len()).collect();
    order.sort_by(|&a, &b| theta_free[a].total_cmp(&theta_free[b]).then(a.cmp(&b)));

    let mut sorted_init = w_init.to_vec();
    sorted_init.sort_by(f64::total_cmp);

    let mut out = vec![0.0; w_init.len()];
    for (rank, &pos) in order.iter().enumerate() {
        out[pos] = sorted_init[rank];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::same_multiset;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn matches_ranks_on_a_small_example() {
        let w = [0.5, -0.2, 0.9];
        let theta = [0.1, 0.7, -0.3];
        // Free ranks: position 2 smallest, then 0, then 1. Initial values in
        // ascending order are -0.2, 0.5, 0.9.
        assert_eq!(permute_to_initial(&theta, &w).unwrap(), vec![0.5, 0.9, -0.2]);
    }

    #[test]
    fn is_the_identity_when_ranks_already_agree() {
        let w = [-1.0, -0.5, 0.0, 0.25, 2.0];
        let theta = [-3.0, -0.1, 0.2, 0.9, 5.0];
        assert_eq!(permute_to_initial(&theta, &w).unwrap(), w.to_vec());
    }

    #[test]
    fn output_is_always_a_rearrangement_of_the_initial_values() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let out = permute_to_initial(&theta, &w).unwrap();
            assert!(same_multiset(&out, &w));
        }
    }

    #[test]
    fn is_idempotent_over_repeated_projection() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..20 {
            let n = rng.random_range(2..30);
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let once = permute_to_initial(&theta, &w).unwrap();
            let twice = permute_to_initial(&once, &w).unwrap();
            // Projecting the projected values changes nothing: they already
            // carry the target ranks.
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn preserves_signed_zero_bits_from_the_initial_multiset() {
        let w = [0.0, -0.0, 1.0];
        let theta = [0.3, 0.1, 9.0];
        let out = permute_to_initial(&theta, &w).unwrap();
        // -0.0 sorts below +0.0 under total order, so the smaller free value
        // receives the negative zero bit pattern.
        assert!(out[1].is_sign_negative() && out[1] == 0.0);
        assert!(out[0].is_sign_positive() && out[0] == 0.0);
        assert_eq!(out[2], 1.0);
    }

    /// Visit every permutation of `0..n` (Heap's algorithm).
    fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut c = vec![0usize; n];
        visit(&idx);
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    idx.swap(0, i);
                } else {
                    idx.swap(c[i], i);
                }
                visit(&idx);
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn beats_or_ties_every_permutation_in_squared_distance() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for trial in 0..120 {
            let n = rng.random_range(1..=6);
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let out = permute_to_initial(&theta, &w).unwrap();
            let cost =
                |cand: &[f64]| -> f64 { cand.iter().zip(&theta).map(|(a, b)| (a - b) * (a - b)).sum() };
            let ours = cost(&out);
            let mut best = f64::INFINITY;
            for_each_permutation(n, |perm| {
                let cand: Vec<f64> = perm.iter().map(|&j| w[j]).collect();
                best = best.min(cost(&cand));
            });
            assert!(
                ours <= best + 1e-12,
                "trial {trial}: rank matching scored {ours}, exhaustive best {best}"
            );
        }
    }

    #[test]
    fn rejects_mismatched_lengths_and_nan() {
        assert!(permute_to_initial(&[0.0], &[0.0, 1.0]).is_err());
        assert!(permute_to_initial(&[f64::NAN], &[0.0]).is_err());
        assert!(permute_to_initial(&[0.0], &[f64::NAN]).is_err());
    }
}
