//! Frozen first-layer layouts: ridge directions and equidistant offsets.
//!
//! Basis functions come in mirrored pairs `act(d . x - b)`, `act(-(d . x - b))`
//! sharing a direction `d` and an offset `b`. In one dimension the only
//! direction is `x` itself; in higher dimensions every nonzero vector with
//! components in `{-1, 0, 1}` appears, grouped into `(d, -d)` pairs. Each
//! direction pair gets the same number of offsets, equidistant over the range
//! that `d . x` sweeps on the domain box, widened by a margin factor so kinks
//! can sit outside the box.

use crate::error::{Error, Result};
use crate::net::Basis;

/// One direction representative per `(d, -d)` pair, in a fixed order: every
/// nonzero `{-1, 0, 1}` vector of length `dim` whose first nonzero component
/// is positive. One-dimensional layouts have a single representative, two
/// dimensions have four, three dimensions have thirteen.
pub fn direction_pairs(dim: usize) -> Result<Vec<Vec<i8>>> {
    if dim == 0 || dim > 3 {
        return Err(Error::validation(format!(
            "basis: supported input dimensions are 1 through 3, got {dim}"
        )));
    }
    let mut reps = Vec::new();
    let count = 3usize.pow(dim as u32);
    for code in 0..count {
        let mut c = code;
        let mut d = vec![0i8; dim];
        for slot in d.iter_mut() {
            *slot = [0i8, 1, -1][c % 3];
            c /= 3;
        }
        let first_nonzero = d.iter().find(|&&v| v != 0);
        if first_nonzero == Some(&1) {
            reps.push(d);
        }
    }
    Ok(reps)
}

/// Range `[lo, hi]` of `d . x` as `x` sweeps the box.
pub fn projection_range(dir: &[i8], domain: &[(f64, f64)]) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for (&d, &(a, b)) in dir.iter().zip(domain) {
        match d {
            1 => {
                lo += a;
                hi += b;
            }
            -1 => {
                lo -= b;
                hi -= a;
            }
            _ => {}
        }
    }
    (lo, hi)
}

/// A frozen first layer: the direction table and the basis slots, plus the
/// offset assigned to each mirrored pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisPlan {
    /// Direction table; entry `2g` is representative `g`, entry `2g + 1` its
    /// negation.
    pub directions: Vec<Vec<i8>>,
    /// Basis slots; pair `k` occupies slots `2k` (forward) and `2k + 1`
    /// (mirrored).
    pub basis: Vec<Basis>,
    /// Offset of pair `k` along its representative direction.
    pub pair_locs: Vec<f64>,
    /// Offset range used for each direction pair, after widening.
    pub spans: Vec<(f64, f64)>,
}

impl BasisPlan {
    /// Number of mirrored pairs (half the number of slots).
    pub fn pairs(&self) -> usize {
        self.pair_locs.len()
    }
}

/// Lay out `n` equidistant offsets per direction pair over the widened
/// projection range. `margin` widens each range symmetrically by that fraction
/// of its half-width, so `margin = 0.75` on a symmetric box reaches 1.75 times
/// as far as the box itself.
pub fn plan_equidistant(
    dim: usize,
    n: usize,
    margin: f64,
    domain: &[(f64, f64)],
) -> Result<BasisPlan> {
    if n < 2 {
        return Err(Error::validation("basis: need at least two offsets per direction"));
    }
    if !(margin >= 0.0) || !margin.is_finite() {
        return Err(Error::validation(format!(
            "basis: widening margin must be finite and nonnegative, got {margin}"
        )));
    }
    if domain.len() != dim {
        return Err(Error::validation(format!(
            "basis: domain has {} coordinates for dimension {dim}",
            domain.len()
        )));
    }
    let reps = direction_pairs(dim)?;
    let mut directions = Vec::with_capacity(2 * reps.len());
    let mut spans = Vec::with_capacity(reps.len());
    for rep in &reps {
        let neg: Vec<i8> = rep.iter().map(|&v| -v).collect();
        directions.push(rep.clone());
        directions.push(neg);
        let (lo, hi) = projection_range(rep, domain);
        let pad = margin * 0.5 * (hi - lo);
        spans.push((lo - pad, hi + pad));
    }

    let mut basis = Vec::with_capacity(2 * reps.len() * n);
    let mut pair_locs = Vec::with_capacity(reps.len() * n);
    for (g, &(lo, hi)) in spans.iter().enumerate() {
        for k in 0..n {
            let b = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            basis.push(Basis { dir: (2 * g) as u16, loc: b });
            basis.push(Basis { dir: (2 * g + 1) as u16, loc: -b });
            pair_locs.push(b);
        }
    }
    Ok(BasisPlan { directions, basis, pair_locs, spans })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_pair_counts_match_the_dimension() {
        assert_eq!(direction_pairs(1).unwrap(), vec![vec![1]]);
        assert_eq!(direction_pairs(2).unwrap().len(), 4);
        assert_eq!(direction_pairs(3).unwrap().len(), 13);
        assert!(direction_pairs(0).is_err());
        assert!(direction_pairs(4).is_err());
    }

    #[test]
    fn representatives_cover_all_nonzero_patterns_up_to_sign() {
        for dim in 1..=3usize {
            let reps = direction_pairs(dim).unwrap();
            // Each representative starts with a positive component and no two
            // representatives are equal or negations of each other.
            for (i, r) in reps.iter().enumerate() {
                assert_eq!(*r.iter().find(|&&v| v != 0).unwrap(), 1);
                for s in &reps[i + 1..] {
                    assert_ne!(r, s);
                    let neg: Vec<i8> = s.iter().map(|&v| -v).collect();
                    assert_ne!(*r, neg);
                }
            }
            assert_eq!(2 * reps.len() + 1, 3usize.pow(dim as u32));
        }
    }

    #[test]
    fn projection_ranges_on_the_symmetric_box() {
        let dom2 = [(-1.0, 1.0); 2];
        assert_eq!(projection_range(&[1, 0], &dom2), (-1.0, 1.0));
        assert_eq!(projection_range(&[1, -1], &dom2), (-2.0, 2.0));
        let dom = [(0.0, 1.0)];
        assert_eq!(projection_range(&[1], &dom), (0.0, 1.0));
        assert_eq!(projection_range(&[-1], &dom), (-1.0, 0.0));
    }

    #[test]
    fn one_dimensional_plan_reproduces_the_paired_layout() {
        let plan = plan_equidistant(1, 3, 0.0, &[(0.0, 1.0)]).unwrap();
        assert_eq!(plan.directions, vec![vec![1], vec![-1]]);
        assert_eq!(plan.pair_locs, vec![0.0, 0.5, 1.0]);
        assert_eq!(plan.basis.len(), 6);
        assert_eq!(plan.basis[0], Basis { dir: 0, loc: 0.0 });
        assert_eq!(plan.basis[1], Basis { dir: 1, loc: -0.0 });
        assert_eq!(plan.basis[4], Basis { dir: 0, loc: 1.0 });
        assert_eq!(plan.basis[5], Basis { dir: 1, loc: -1.0 });
    }

    #[test]
    fn widening_stretches_every_span_proportionally() {
        let plan = plan_equidistant(2, 2, 0.75, &[(-1.0, 1.0); 2]).unwrap();
        assert_eq!(plan.spans[0], (-1.75, 1.75));
        // Diagonal directions sweep twice as far and widen accordingly.
        assert_eq!(plan.spans[2], (-3.5, 3.5));
        assert_eq!(plan.basis.len(), 2 * 4 * 2);
        assert_eq!(plan.pairs(), 8);
    }

    #[test]
    fn three_dimensional_plan_has_twenty_six_ridge_groups() {
        let n = 4;
        let plan = plan_equidistant(3, n, 0.75, &[(-1.0, 1.0); 3]).unwrap();
        assert_eq!(plan.directions.len(), 26);
        assert_eq!(plan.basis.len(), 26 * n);
        assert_eq!(plan.pairs(), 13 * n);
    }

    #[test]
    fn rejects_degenerate_requests() {
        assert!(plan_equidistant(1, 1, 0.0, &[(0.0, 1.0)]).is_err());
        assert!(plan_equidistant(1, 2, -0.1, &[(0.0, 1.0)]).is_err());
        assert!(plan_equidistant(2, 2, 0.0, &[(0.0, 1.0)]).is_err());
    }
}
