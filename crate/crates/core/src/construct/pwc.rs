//! Staircase (piecewise-constant) decomposition of a continuous target.
//!
//! A continuous function on the unit interval is approximated by a resting
//! level plus unit steps of a fixed height `delta_h`: the decomposition tracks
//! which half-level band `(k - 1/2, k + 1/2] * delta_h` the target occupies
//! and records a signed jump each time it crosses into the next band. The
//! resulting staircase stays within `delta_h / 2` of the target (up to the
//! crossing-location tolerance).
//!
//! The scan samples the target at 100,001 equidistant points and refines each
//! detected crossing by bisection to an interval of 1e-10, so the target must
//! be continuous; discontinuous inputs silently produce a staircase for the
//! sampled values only.

use crate::error::{Error, Result};
use crate::net::unit_loc;

/// Number of scan samples across the unit interval.
const SCAN_SAMPLES: usize = 100_001;
/// Bisection stops once the bracketing interval is this narrow.
const BISECT_TOL: f64 = 1e-10;

/// One signed unit jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    /// Crossing location in `[0, 1]`.
    pub loc: f64,
    /// `+1` for an upward jump, `-1` for a downward jump.
    pub sign: i8,
}

/// A staircase `g(x) = base + delta_h * sum_{loc_j <= x} sign_j`, with jump
/// locations strictly increasing. A step counts at its own location
/// (`g` is right-continuous).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    /// Common height of every jump.
    pub delta_h: f64,
    /// Resting level `g(x)` before the first jump.
    pub base: f64,
    /// Signed jumps, locations strictly increasing.
    pub steps: Vec<Step>,
}

impl PiecewiseConstant {
    /// Staircase value at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let mut level: i64 = 0;
        for s in &self.steps {
            if s.loc <= x {
                level += s.sign as i64;
            } else {
                break;
            }
        }
        self.base + self.delta_h * level as f64
    }

    /// Number of jumps.
    #[inline]
    pub fn j(&self) -> usize {
        self.steps.len()
    }

    /// Net signed jump count (final level minus resting level, in units of
    /// `delta_h`).
    pub fn j_prime(&self) -> i64 {
        self.steps.iter().map(|s| s.sign as i64).sum()
    }

    /// Smallest gap between consecutive jump locations; `None` with fewer
    /// than two jumps.
    pub fn min_gap(&self) -> Option<f64> {
        self.steps
            .windows(2)
            .map(|w| w[1].loc - w[0].loc)
            .min_by(f64::total_cmp)
    }

    /// Largest deviation `|g(x) - f(x)|` over `samples` equidistant points.
    pub fn sup_deviation(&self, f: impl Fn(f64) -> f64, samples: usize) -> f64 {
        (0..samples)
            .map(|t| {
                let x = unit_loc(t, samples);
                (self.eval(x) - f(x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Decompose `f` on `[0, 1]` into a staircase with the given jump height.
///
/// The resting level is the nearest multiple of `delta_h` to `f(0)`; a jump is
/// recorded whenever the target crosses a half-level boundary
/// `(k +- 1/2) * delta_h`, with the crossing located by bisection.
pub fn decompose_with_jump(
    f: impl Fn(f64) -> f64,
    delta_h: f64,
) -> Result<PiecewiseConstant> {
    if !(delta_h > 0.0) || !delta_h.is_finite() {
        return Err(Error::validation(format!("decompose: jump height must be positive, got {delta_h}")));
    }
    let f0 = f(0.0);
    if !f0.is_finite() {
        return Err(Error::validation("decompose: target is non-finite at 0"));
    }
    let k0 = (f0 / delta_h).round() as i64;
    let mut level = k0;
    let mut steps: Vec<Step> = Vec::new();
    let mut prev_x = 0.0;
    for t in 1..SCAN_SAMPLES {
        let x = unit_loc(t, SCAN_SAMPLES);
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::validation(format!("decompose: target is non-finite at {x}")));
        }
        // The target may cross several half-level boundaries inside one scan
        // interval; emit one jump per boundary, in crossing order.
        while fx > (level as f64 + 0.5) * delta_h {
            let boundary = (level as f64 + 0.5) * delta_h;
            let loc = bisect(&f, prev_x, x, boundary, true);
            push_step(&mut steps, loc, 1)?;
            level += 1;
        }
        while fx < (level as f64 - 0.5) * delta_h {
            let boundary = (level as f64 - 0.5) * delta_h;
            let loc = bisect(&f, prev_x, x, boundary, false);
            push_step(&mut steps, loc, -1)?;
            level -= 1;
        }
        prev_x = x;
    }
    Ok(PiecewiseConstant { delta_h, base: k0 as f64 * delta_h, steps })
}

/// Decompose with the jump height tied to the accuracy budget (`eps / 4`).
pub fn decompose_target(f: impl Fn(f64) -> f64, eps: f64) -> Result<PiecewiseConstant> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::validation(format!("decompose: accuracy must be positive, got {eps}")));
    }
    decompose_with_jump(f, eps / 4.0)
}

fn push_step(steps: &mut Vec<Step>, loc: f64, sign: i8) -> Result<()> {
    if let Some(last) = steps.last() {
        if loc <= last.loc {
            return Err(Error::construction(format!(
                "decompose: jump at {loc} does not advance past previous jump at {} \
                 (crossings too close to separate)",
                last.loc
            )));
        }
    }
    steps.push(Step { loc, sign });
    Ok(())
}

/// Locate `f(x) = boundary` inside `[a, b]`. For a rising crossing
/// `f(a) <= boundary < f(b)`; for a falling one the bracket is mirrored.
fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, boundary: f64, rising: bool) -> f64 {
    while b - a > BISECT_TOL {
        let mid = 0.5 * (a + b);
        let above = f(mid) > boundary;
        if above == rising {
            b = mid;
        } else {
            a = mid;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = std::f64::consts::TAU;

    #[test]
    fn ramp_decomposes_into_ten_upward_steps() {
        let g = decompose_target(|x| x, 0.4).unwrap();
        assert_eq!(g.delta_h, 0.1);
        assert_eq!(g.base, 0.0);
        assert_eq!(g.j(), 10);
        assert_eq!(g.j_prime(), 10);
        for (k, s) in g.steps.iter().enumerate() {
            assert_eq!(s.sign, 1);
            let expect = 0.05 + 0.1 * k as f64;
            assert!((s.loc - expect).abs() < 1e-9, "step {k} at {} vs {expect}", s.loc);
        }
        assert!(g.sup_deviation(|x| x, 10_001) <= 0.05 + 1e-9);
    }

    #[test]
    fn near_zero_constant_has_no_steps() {
        let g = decompose_target(|_| 0.03, 0.4).unwrap();
        assert_eq!(g.j(), 0);
        assert_eq!(g.base, 0.0);
        assert_eq!(g.eval(0.7), 0.0);
    }

    #[test]
    fn constant_snaps_to_nearest_level() {
        let g = decompose_with_jump(|_| 0.26, 0.1).unwrap();
        assert_eq!(g.j(), 0);
        assert!((g.base - 0.3).abs() < 1e-15);
        assert!(g.sup_deviation(|_| 0.26, 101) <= 0.05 + 1e-12);
    }

    #[test]
    fn offset_ramp_keeps_resting_level() {
        let g = decompose_target(|x| x + 5.0, 0.4).unwrap();
        assert!((g.base - 5.0).abs() < 1e-12);
        assert_eq!(g.j(), 10);
        assert!(g.sup_deviation(|x| x + 5.0, 10_001) <= 0.05 + 1e-9);
    }

    #[test]
    fn sine_period_signs_split_into_up_down_up_runs() {
        let g = decompose_target(|x| (TAU * x).sin(), 0.25).unwrap();
        assert_eq!(g.delta_h, 0.0625);
        assert_eq!(g.j(), 64);
        assert_eq!(g.j_prime(), 0);
        let signs: Vec<i8> = g.steps.iter().map(|s| s.sign).collect();
        assert!(signs[..16].iter().all(|&s| s == 1), "first quarter rises");
        assert!(signs[16..48].iter().all(|&s| s == -1), "middle half falls");
        assert!(signs[48..].iter().all(|&s| s == 1), "last quarter rises");
        // Tightest spacing sits where the sine is steepest (slope 2 pi).
        let gap = g.min_gap().unwrap();
        assert!(gap > 0.0095 && gap < 0.0105, "min gap {gap}");
        assert!(g.sup_deviation(|x| (TAU * x).sin(), 10_001) <= 0.03125 + 1e-8);
    }

    #[test]
    fn staircase_tracks_multiple_crossings_per_scan_interval() {
        // Steep ramp crosses many levels between consecutive samples.
        let g = decompose_with_jump(|x| 40.0 * x, 0.01).unwrap();
        assert_eq!(g.j(), 4000);
        assert!(g.sup_deviation(|x| 40.0 * x, 20_001) <= 0.005 + 1e-7);
    }

    #[test]
    fn eval_counts_a_jump_at_its_own_location() {
        let g = PiecewiseConstant {
            delta_h: 1.0,
            base: 0.0,
            steps: vec![Step { loc: 0.5, sign: 1 }],
        };
        assert_eq!(g.eval(0.499), 0.0);
        assert_eq!(g.eval(0.5), 1.0);
        assert_eq!(g.eval(0.501), 1.0);
    }

    #[test]
    fn validation_rejects_bad_input() {
        assert!(decompose_target(|x| x, 0.0).is_err());
        assert!(decompose_target(|x| x, -1.0).is_err());
        assert!(decompose_target(|x| x, f64::NAN).is_err());
        assert!(decompose_with_jump(|_| f64::NAN, 0.1).is_err());
        assert!(decompose_with_jump(|x| if x > 0.5 { f64::INFINITY } else { 0.0 }, 0.1).is_err());
    }

    #[test]
    fn j_prime_nets_out_signed_jumps() {
        let g = decompose_target(|x| (TAU * x).sin(), 0.25).unwrap();
        assert_eq!(g.j_prime(), 0);
        let g = decompose_target(|x| x, 0.4).unwrap();
        assert_eq!(g.j_prime(), 10);
        let g = decompose_with_jump(|x| 1.0 - x, 0.1).unwrap();
        assert_eq!(g.j_prime(), -10);
    }
}
