//! Balanced sign assignment and remainder annihilation.
//!
//! Given an even count of nonnegative values, [`sign_assignment`] picks signs
//! `m_i` in `{+1, -1}` so the signed sum lands in `[0, Delta_c]`, where
//! `Delta_c` is the largest gap between consecutive values in sorted order.
//! The algorithm pairs adjacent values after sorting descending, takes the
//! pair differences, sorts those descending, and signs them alternately
//! starting positive; the alternating partial sums telescope into the bound.
//!
//! [`annihilate_remainder`] applies this to leftover paired weights: each
//! unused pair at location `b` becomes the linear piece `m b (x - b)`, so the
//! leftovers sum to a line whose slope is the signed sum (small by the bound)
//! and whose intercept is compensated exactly by the constant `c_eta`.

use crate::construct::fourpair::linear_reorganize;
use crate::error::{Error, Result};

/// Result of [`sign_assignment`].
#[derive(Debug, Clone, PartialEq)]
pub struct SignChoice {
    /// Chosen sign per input index.
    pub m: Vec<i8>,
    /// Signed sum `sum_i m_i c_i` (recomputed in input order, compensated).
    pub sum: f64,
    /// Largest adjacent gap of the sorted inputs; the signed sum is
    /// guaranteed inside `[0, bound]` up to float rounding.
    pub bound: f64,
}

/// Choose signs for an even-length list of nonnegative values so the signed
/// sum is small and nonnegative.
pub fn sign_assignment(c: &[f64]) -> Result<SignChoice> {
    if c.len() % 2 != 0 {
        return Err(Error::validation(format!(
            "sign assignment: need an even count, got {}",
            c.len()
        )));
    }
    for (i, &v) in c.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::validation(format!(
                "sign assignment: entry {i} must be finite and nonnegative, got {v}"
            )));
        }
    }
    if c.is_empty() {
        return Ok(SignChoice { m: Vec::new(), sum: 0.0, bound: 0.0 });
    }

    // Sort indices by value descending, ties by original index (stable).
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));

    // Adjacent pairs in that order; differences are nonnegative floats.
    let halves = c.len() / 2;
    let mut pairs: Vec<(f64, usize)> = (0..halves)
        .map(|j| (c[order[2 * j]] - c[order[2 * j + 1]], j))
        .collect();
    // Largest differences first, ties by pair position (stable).
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut m = vec![0i8; c.len()];
    for (rank, &(_, j)) in pairs.iter().enumerate() {
        let lambda: i8 = if rank % 2 == 0 { 1 } else { -1 };
        m[order[2 * j]] = lambda;
        m[order[2 * j + 1]] = -lambda;
    }

    // Recompute the signed sum in input order with compensation.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (i, &v) in c.iter().enumerate() {
        let term = m[i] as f64 * v;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    let sum = sum;

    // Largest adjacent gap of the sorted values.
    let mut sorted: Vec<f64> = c.to_vec();
    sorted.sort_by(f64::total_cmp);
    let bound = sorted.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);

    Ok(SignChoice { m, sum, bound })
}

/// One retired pair when the leftover count is odd.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetiredPair {
    /// Index into the input slice.
    pub index: usize,
    /// Weight magnitude of the retired pair.
    pub value: f64,
}

/// How a set of leftover paired weights is folded into a nearly-zero residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Annihilation {
    /// Sign per input pair (`+1` for every retired pair).
    pub m: Vec<i8>,
    /// Total slope `sum m_i v_i` of the leftover lines.
    pub slope: f64,
    /// Total intercept `-sum m_i v_i b_i` of the leftover lines.
    pub eta: f64,
    /// Constant that cancels the intercept exactly: `c_eta = -eta`.
    pub c_eta: f64,
    /// Bound on `sup_[0,1] |residual + c_eta|`: the sign-assignment bound
    /// plus any retired value.
    pub sup_bound: f64,
    /// Present when the input count was odd.
    pub retired: Option<RetiredPair>,
}

/// Fold leftover pairs with weight magnitudes `values` at basis locations
/// `locs` into a compensated near-zero residual. With signs `m` from
/// [`sign_assignment`] on the values, pair `i` contributes the line
/// `m_i v_i (x - b_i)`; the slopes sum into `[0, bound]` and the constant
/// `c_eta` cancels the summed intercept. An odd count retires the
/// smallest-value pair first (sign `+1`), adding its value to the bound.
pub fn annihilate_pairs(values: &[f64], locs: &[f64]) -> Result<Annihilation> {
    if values.len() != locs.len() {
        return Err(Error::validation("annihilate: values and locations must align"));
    }
    if locs.iter().any(|b| !b.is_finite()) {
        return Err(Error::validation("annihilate: locations must be finite"));
    }

    let mut retired = None;
    let mut active: Vec<usize> = (0..values.len()).collect();
    if values.len() % 2 != 0 {
        let r = active
            .iter()
            .copied()
            .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
            .expect("nonempty");
        retired = Some(RetiredPair { index: r, value: values[r] });
        active.retain(|&i| i != r);
    }

    let sub: Vec<f64> = active.iter().map(|&i| values[i]).collect();
    let choice = sign_assignment(&sub)?;

    let mut m = vec![0i8; values.len()];
    for (k, &i) in active.iter().enumerate() {
        m[i] = choice.m[k];
    }
    let mut sup_bound = choice.bound;
    if let Some(r) = retired {
        m[r.index] = 1;
        sup_bound += r.value;
    }

    // Slope and intercept accumulated over all pairs (compensated).
    let mut slope = 0.0f64;
    let mut sc = 0.0f64;
    let mut eta = 0.0f64;
    let mut ec = 0.0f64;
    for i in 0..values.len() {
        let (s, t) = linear_reorganize_signed(values[i], locs[i], m[i])?;
        kahan(&mut slope, &mut sc, s);
        kahan(&mut eta, &mut ec, t);
    }

    Ok(Annihilation { m, slope, eta, c_eta: -eta, sup_bound, retired })
}

/// Specialization where the weight magnitude of each pair is its own
/// location (the paired-initialization case).
pub fn annihilate_remainder(locations: &[f64]) -> Result<Annihilation> {
    for (i, &b) in locations.iter().enumerate() {
        if !b.is_finite() || b < 0.0 {
            return Err(Error::validation(format!(
                "annihilate: location {i} must be finite and nonnegative, got {b}"
            )));
        }
    }
    annihilate_pairs(locations, locations)
}

/// Line `(slope, intercept)` contributed by the pair with magnitude `v` at
/// location `b` under sign `m`: `m v (x - b)`.
fn linear_reorganize_signed(v: f64, b: f64, m: i8) -> Result<(f64, f64)> {
    if v == b {
        // Exact specialization used by the paired case.
        return linear_reorganize(b, m);
    }
    let slope = m as f64 * v;
    Ok((slope, -slope * b))
}

#[inline]
fn kahan(sum: &mut f64, comp: &mut f64, term: f64) {
    let y = term - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_pair_gets_opposite_signs_and_zero_sum() {
        let s = sign_assignment(&[1.0, 1.0]).unwrap();
        assert_eq!(s.m, vec![1, -1]);
        assert_eq!(s.sum, 0.0);
        assert_eq!(s.bound, 0.0);
    }

    #[test]
    fn descending_run_matches_pinned_signs() {
        let s = sign_assignment(&[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.m, vec![1, -1, -1, 1]);
        assert_eq!(s.sum, 0.0);
        assert_eq!(s.bound, 1.0);
    }

    #[test]
    fn two_values_attain_the_bound_exactly() {
        let s = sign_assignment(&[0.7, 0.3]).unwrap();
        assert_eq!(s.m, vec![1, -1]);
        assert!((s.sum - 0.4).abs() < 1e-15);
        assert!((s.bound - 0.4).abs() < 1e-15);
        assert!(s.sum <= s.bound + 1e-12);
    }

    #[test]
    fn empty_input_is_trivial() {
        let s = sign_assignment(&[]).unwrap();
        assert!(s.m.is_empty());
        assert_eq!(s.sum, 0.0);
        assert_eq!(s.bound, 0.0);
    }

    #[test]
    fn validation_rejects_odd_negative_and_non_finite() {
        assert!(sign_assignment(&[1.0]).is_err());
        assert!(sign_assignment(&[1.0, -0.5]).is_err());
        assert!(sign_assignment(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn adjacent_gap_bound_holds_on_adversarial_input() {
        // Max-of-min-pairwise-distance reasoning would give a much smaller
        // number here; the largest adjacent gap is what the construction
        // actually guarantees.
        let c = [1.0, 0.99, 0.61, 0.11, 0.10, 0.09];
        let s = sign_assignment(&c).unwrap();
        assert!(s.sum >= -1e-12);
        assert!(s.sum <= s.bound + 1e-12, "sum {} vs bound {}", s.sum, s.bound);
        assert!((s.bound - 0.5).abs() < 1e-15, "largest adjacent gap is 0.61 - 0.11");
    }

    #[test]
    fn randomized_inputs_stay_within_bound() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        for trial in 0..300 {
            let len = 2 * rng.random_range(1..=60);
            let c: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
            let s = sign_assignment(&c).unwrap();
            assert!(s.sum >= -1e-12, "trial {trial}: sum {}", s.sum);
            assert!(s.sum <= s.bound + 1e-12, "trial {trial}: sum {} bound {}", s.sum, s.bound);
            // The reported sum matches a plain recomputation.
            let direct: f64 = c.iter().zip(&s.m).map(|(&v, &m)| m as f64 * v).sum();
            assert!((s.sum - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_remainder_bound_is_twice_the_spacing() {
        // Multiples of 0.01 up to 1.0 with eight values removed: the largest
        // adjacent gap doubles to 0.02 where a value is missing.
        let mut locs: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        for &gone in [97usize, 80, 63, 41, 22, 10, 5, 2].iter() {
            locs.retain(|&b| (b - gone as f64 / 100.0).abs() > 1e-12);
        }
        assert_eq!(locs.len(), 93);
        // Odd count: one pair is retired (the smallest location, 0.0, which
        // costs nothing).
        let a = annihilate_remainder(&locs).unwrap();
        let r = a.retired.unwrap();
        assert_eq!(r.value, 0.0);
        assert!(a.sup_bound <= 0.02 + 1e-12, "bound {}", a.sup_bound);
        assert!(a.slope >= -1e-12 && a.slope <= a.sup_bound + 1e-12);
    }

    #[test]
    fn two_equal_locations_annihilate_exactly() {
        let a = annihilate_remainder(&[0.4, 0.4]).unwrap();
        assert_eq!(a.slope, 0.0);
        assert_eq!(a.eta, 0.0);
        assert_eq!(a.c_eta, -0.0);
        assert_eq!(a.sup_bound, 0.0);
        // The realized residual is identically zero.
        for t in 0..=10 {
            let x = t as f64 / 10.0;
            let resid: f64 = a
                .m
                .iter()
                .zip([0.4, 0.4])
                .map(|(&m, b)| m as f64 * b * (x - b))
                .sum();
            assert_eq!(resid, 0.0);
        }
    }

    #[test]
    fn compensated_residual_stays_below_bound() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(123);
        for _ in 0..50 {
            let len = rng.random_range(2..40);
            let locs: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
            let a = annihilate_remainder(&locs).unwrap();
            for t in 0..=100 {
                let x = t as f64 / 100.0;
                let resid: f64 = a
                    .m
                    .iter()
                    .zip(&locs)
                    .map(|(&m, &b)| m as f64 * b * (x - b))
                    .sum::<f64>()
                    + a.c_eta;
                assert!(
                    resid.abs() <= a.sup_bound + 1e-9,
                    "x={x}: residual {resid} vs bound {}",
                    a.sup_bound
                );
            }
        }
    }

    #[test]
    fn value_location_split_computes_slope_and_intercept() {
        // Two pairs, distinct values and locations.
        let values = [0.8, 0.2];
        let locs = [0.1, 0.9];
        let a = annihilate_pairs(&values, &locs).unwrap();
        assert_eq!(a.m, vec![1, -1]);
        let slope = 0.8 - 0.2;
        let eta = -(0.8 * 0.1) + (0.2 * 0.9);
        assert!((a.slope - slope).abs() < 1e-15);
        assert!((a.eta - eta).abs() < 1e-15);
        assert!((a.c_eta + eta).abs() < 1e-15);
    }
}
