//! Coefficient assignments over four paired basis locations.
//!
//! Four locations `b1 <= b2 <= b3 <= b4` with mirrored inner spacing
//! (`b2 - b1 == b4 - b3`) support two exact reusable gadgets, each consuming
//! the eight paired weights `{+-b1, +-b2, +-b3, +-b4}` exactly once:
//!
//! * **step matching** — a monotone sigmoid-like profile that is constant
//!   outside `[b1, b4]`, rising by `h = 4 (b2 - b1)(b4 - b2)` across the
//!   window, from `2 b1 b4 - 2 b2 b3` on the left to
//!   `b1^2 - b2^2 - b3^2 + b4^2` on the right;
//! * **constant matching** — an exactly constant function of value
//!   `sign * (b1^2 - b2^2 - b3^2 + b4^2)` (that is `sign * h / 2`) with zero
//!   slope everywhere, independent of where the window sits.
//!
//! A third helper reassigns a single pair at location `b` into the linear
//! piece `m * b * (x - b)`.

use crate::error::{Error, Result};

/// Relative tolerance for the mirrored-spacing precondition.
const SYMMETRY_TOL: f64 = 1e-12;

/// What a four-pair assignment realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FourPairKind {
    /// Monotone step profile of height `h`.
    Step,
    /// Constant `+h/2`.
    ConstantPlus,
    /// Constant `-h/2`.
    ConstantMinus,
}

/// Coefficients for the eight weights over four paired locations. Index `i`
/// covers the pair at `locs[i]`: `p[i]` multiplies `relu(x - locs[i])` and
/// `q[i]` multiplies `relu(locs[i] - x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourPairAssignment {
    pub locs: [f64; 4],
    pub p: [f64; 4],
    pub q: [f64; 4],
    pub kind: FourPairKind,
}

impl FourPairAssignment {
    /// Inner spacing `b2 - b1` (equal to `b4 - b3` by the precondition).
    #[inline]
    pub fn d(&self) -> f64 {
        self.locs[1] - self.locs[0]
    }

    /// Step height `h = 4 (b2 - b1)(b4 - b2)`.
    #[inline]
    pub fn h(&self) -> f64 {
        4.0 * self.d() * (self.locs[3] - self.locs[1])
    }

    /// Half inner-window width `(b3 - b2) / 2`.
    #[inline]
    pub fn k1(&self) -> f64 {
        0.5 * (self.locs[2] - self.locs[1])
    }

    /// Half outer-window width `(b4 - b1) / 2`.
    #[inline]
    pub fn k2(&self) -> f64 {
        0.5 * (self.locs[3] - self.locs[0])
    }

    /// Window midpoint `(b2 + b3) / 2`.
    #[inline]
    pub fn mid(&self) -> f64 {
        0.5 * (self.locs[1] + self.locs[2])
    }

    /// Plateau value left of `b1` for a step assignment.
    #[inline]
    pub fn lower_value(&self) -> f64 {
        2.0 * self.locs[0] * self.locs[3] - 2.0 * self.locs[1] * self.locs[2]
    }

    /// Plateau value right of `b4` for a step assignment (equal to `h/2` up
    /// to the sign carried by the coefficients).
    #[inline]
    pub fn upper_value(&self) -> f64 {
        let [b1, b2, b3, b4] = self.locs;
        b1 * b1 - b2 * b2 - b3 * b3 + b4 * b4
    }

    /// Evaluate the assignment's contribution at `x` (ReLU activation).
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..4 {
            let b = self.locs[i];
            if x > b {
                acc += self.p[i] * (x - b);
            } else if x < b {
                acc += self.q[i] * (b - x);
            }
        }
        acc
    }

    /// Flip the sign of every coefficient (used for downward jumps); the
    /// consumed weight multiset `{+-b_i}` is unchanged.
    pub fn negated(&self) -> FourPairAssignment {
        let mut out = self.clone();
        for i in 0..4 {
            out.p[i] = -out.p[i];
            out.q[i] = -out.q[i];
        }
        out.kind = match self.kind {
            FourPairKind::Step => FourPairKind::Step,
            FourPairKind::ConstantPlus => FourPairKind::ConstantMinus,
            FourPairKind::ConstantMinus => FourPairKind::ConstantPlus,
        };
        out
    }

    /// The multiset of weights consumed by this assignment (all eight
    /// coefficients).
    pub fn consumed(&self) -> [f64; 8] {
        [
            self.p[0], self.q[0], self.p[1], self.q[1], self.p[2], self.q[2], self.p[3],
            self.q[3],
        ]
    }
}

/// Check ordering, finiteness, and mirrored spacing of a location quadruple.
pub fn validate_window(locs: &[f64; 4]) -> Result<()> {
    if locs.iter().any(|b| !b.is_finite()) {
        return Err(Error::validation("four-pair window: locations must be finite"));
    }
    if !(locs[0] <= locs[1] && locs[1] <= locs[2] && locs[2] <= locs[3]) {
        return Err(Error::validation(format!(
            "four-pair window: locations must be ascending, got {locs:?}"
        )));
    }
    let d_lo = locs[1] - locs[0];
    let d_hi = locs[3] - locs[2];
    let scale = locs[3].abs().max(1.0);
    if (d_lo - d_hi).abs() > SYMMETRY_TOL * scale {
        return Err(Error::validation(format!(
            "four-pair window: inner spacings differ ({d_lo} vs {d_hi})"
        )));
    }
    Ok(())
}

/// Step-matching coefficients: `p = (-b1, b2, b3, -b4)` on the forward slots
/// and `q = (b4, -b3, -b2, b1)` on the mirrored slots.
pub fn step_matching(locs: [f64; 4]) -> Result<FourPairAssignment> {
    validate_window(&locs)?;
    let [b1, b2, b3, b4] = locs;
    Ok(FourPairAssignment {
        locs,
        p: [-b1, b2, b3, -b4],
        q: [b4, -b3, -b2, b1],
        kind: FourPairKind::Step,
    })
}

/// Constant-matching coefficients: per-index mirrored pairs `q_i = -p_i`,
/// which cancel every slope change and leave the constant `sign * h / 2`.
pub fn constant_matching(locs: [f64; 4], sign: i8) -> Result<FourPairAssignment> {
    validate_window(&locs)?;
    if !matches!(sign, -1 | 1) {
        return Err(Error::validation(format!("constant matching: sign must be +-1, got {sign}")));
    }
    let s = sign as f64;
    let [b1, b2, b3, b4] = locs;
    Ok(FourPairAssignment {
        locs,
        p: [-s * b1, s * b2, s * b3, -s * b4],
        q: [s * b1, -s * b2, -s * b3, s * b4],
        kind: if sign > 0 { FourPairKind::ConstantPlus } else { FourPairKind::ConstantMinus },
    })
}

/// Reassign the pair at location `b` into the linear piece `m * b * (x - b)`
/// by giving its forward weight `m * b` and its mirrored weight `-(m * b)`.
/// Returns the realized `(slope, intercept) = (m b, -m b^2)`.
pub fn linear_reorganize(b: f64, m: i8) -> Result<(f64, f64)> {
    if !b.is_finite() {
        return Err(Error::validation("linear reorganize: location must be finite"));
    }
    if !matches!(m, -1 | 1) {
        return Err(Error::validation(format!("linear reorganize: sign must be +-1, got {m}")));
    }
    let slope = m as f64 * b;
    Ok((slope, -slope * b))
}

/// Largest value over `[0, 1]` of `|m b (x - b)|` for `b` in `[0, 1]`: the
/// worst case sits at whichever endpoint is farther from `b`.
pub fn linear_piece_sup(b: f64) -> f64 {
    b.abs() * b.abs().max((1.0 - b).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: [f64; 4] = [0.1, 0.2, 0.3, 0.4];

    #[test]
    fn step_matching_pins_exact_coefficients() {
        let a = step_matching(W).unwrap();
        assert_eq!(a.p, [-0.1, 0.2, 0.3, -0.4]);
        assert_eq!(a.q, [0.4, -0.3, -0.2, 0.1]);
        assert!((a.h() - 0.08).abs() < 1e-15);
    }

    #[test]
    fn step_profile_has_pinned_plateaus_and_height() {
        let a = step_matching(W).unwrap();
        assert!((a.eval(0.05) - (-0.04)).abs() < 1e-15);
        assert!((a.eval(0.0) - (-0.04)).abs() < 1e-15);
        assert!((a.eval(0.95) - 0.04).abs() < 1e-15);
        assert!((a.lower_value() - (-0.04)).abs() < 1e-15);
        assert!((a.upper_value() - 0.04).abs() < 1e-15);
        // Height between the plateaus is h.
        assert!((a.upper_value() - a.lower_value() - a.h()).abs() < 1e-15);
    }

    #[test]
    fn step_profile_segment_slopes() {
        let a = step_matching(W).unwrap();
        let slope = |x0: f64, x1: f64| (a.eval(x1) - a.eval(x0)) / (x1 - x0);
        let b41 = W[3] - W[0];
        assert!((slope(0.11, 0.19) - b41).abs() < 1e-12, "outer-left slope");
        assert!((slope(0.21, 0.29) - 2.0 * (W[1] - W[0])).abs() < 1e-12, "inner slope");
        assert!((slope(0.31, 0.39) - b41).abs() < 1e-12, "outer-right slope");
        assert!(slope(-0.5, 0.05).abs() < 1e-12, "flat left of window");
        assert!(slope(0.45, 1.5).abs() < 1e-12, "flat right of window");
    }

    #[test]
    fn step_profile_is_monotone_on_window() {
        let a = step_matching(W).unwrap();
        let mut prev = a.eval(0.1);
        for t in 1..=300 {
            let x = 0.1 + 0.3 * t as f64 / 300.0;
            let v = a.eval(x);
            assert!(v >= prev - 1e-15, "not monotone at {x}");
            prev = v;
        }
    }

    #[test]
    fn negated_step_flips_values_and_keeps_multiset() {
        let a = step_matching(W).unwrap();
        let n = a.negated();
        for t in 0..=100 {
            let x = t as f64 / 100.0;
            assert!((n.eval(x) + a.eval(x)).abs() < 1e-15);
        }
        let mut c1: Vec<f64> = a.consumed().to_vec();
        let mut c2: Vec<f64> = n.consumed().to_vec();
        c1.sort_by(f64::total_cmp);
        c2.sort_by(f64::total_cmp);
        // Same values up to sign-of-zero bookkeeping: compare as numbers.
        for (x, y) in c1.iter().zip(&c2) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn consumed_weights_are_the_paired_multiset() {
        let a = step_matching(W).unwrap();
        let mut got: Vec<f64> = a.consumed().to_vec();
        let mut want = vec![0.1, -0.1, 0.2, -0.2, 0.3, -0.3, 0.4, -0.4];
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        assert_eq!(got, want);
        let c = constant_matching(W, -1).unwrap();
        let mut got: Vec<f64> = c.consumed().to_vec();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, want);
    }

    #[test]
    fn constant_matching_is_flat_everywhere() {
        let a = constant_matching(W, 1).unwrap();
        let expect = 0.04;
        for t in 0..=10_000 {
            let x = t as f64 / 10_000.0;
            assert!((a.eval(x) - expect).abs() < 1e-12, "deviation at {x}: {}", a.eval(x));
        }
        let m = constant_matching(W, -1).unwrap();
        for t in 0..=100 {
            let x = t as f64 / 100.0;
            assert!((m.eval(x) + expect).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_constants_cancel() {
        let p = constant_matching(W, 1).unwrap();
        let m = constant_matching(W, -1).unwrap();
        for t in 0..=1000 {
            let x = -0.2 + 1.4 * t as f64 / 1000.0;
            assert!((p.eval(x) + m.eval(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_value_is_independent_of_window_position() {
        // Same spacing pattern, different centers: same constant.
        let a = constant_matching([0.1, 0.2, 0.3, 0.4], 1).unwrap();
        let b = constant_matching([0.5, 0.6, 0.7, 0.8], 1).unwrap();
        assert!((a.eval(0.0) - b.eval(0.0)).abs() < 1e-12);
        assert!((a.h() - b.h()).abs() < 1e-15);
    }

    #[test]
    fn adjacent_equidistant_window_height() {
        // Four consecutive grid locations with spacing d: h = 8 d^2.
        let d = 0.01;
        let locs = [0.30, 0.30 + d, 0.30 + 2.0 * d, 0.30 + 3.0 * d];
        let a = step_matching(locs).unwrap();
        assert!((a.h() - 8.0 * d * d).abs() < 1e-15);
    }

    #[test]
    fn linear_reorganize_examples() {
        assert_eq!(linear_reorganize(0.0, 1).unwrap(), (0.0, -0.0));
        assert_eq!(linear_reorganize(0.5, 1).unwrap(), (0.5, -0.25));
        assert_eq!(linear_reorganize(1.0, -1).unwrap(), (-1.0, 1.0));
        assert!(linear_reorganize(f64::NAN, 1).is_err());
        assert!(linear_reorganize(0.5, 0).is_err());
    }

    #[test]
    fn linear_piece_sup_is_exact() {
        assert_eq!(linear_piece_sup(0.0), 0.0);
        // For b <= 1/2 the far endpoint is 1: sup = b (1 - b).
        assert!((linear_piece_sup(0.25) - 0.25 * 0.75).abs() < 1e-15);
        // For b >= 1/2 the far endpoint is 0: sup = b^2.
        assert!((linear_piece_sup(0.75) - 0.5625).abs() < 1e-15);
        assert!((linear_piece_sup(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn window_validation_rejects_asymmetry_and_disorder() {
        assert!(validate_window(&[0.1, 0.2, 0.3, 0.45]).is_err());
        assert!(validate_window(&[0.2, 0.1, 0.3, 0.4]).is_err());
        assert!(validate_window(&[0.1, 0.2, 0.3, f64::NAN]).is_err());
        assert!(validate_window(&[0.1, 0.2, 0.3, 0.4]).is_ok());
        // Degenerate but mirrored windows are allowed.
        assert!(validate_window(&[0.3, 0.3, 0.3, 0.3]).is_ok());
        assert!(constant_matching(W, 2).is_err());
    }
}
