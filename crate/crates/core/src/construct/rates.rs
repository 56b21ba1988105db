//! Closed-form L2 error of a step-matched window against an ideal step.
//!
//! A step-matched four-pair window with half-widths `k1 = (b3 - b2)/2` and
//! `k2 = (b4 - b1)/2` approximates a centered ideal step of height
//! `gamma * h`. Shifting everything by half the height and integrating the
//! squared difference over the window gives
//!
//! `e^2 = gamma^2 * (8/3) * (k1 - k2)^2 * (k1^3 + 3 k1^2 k2 + 2 k1 k2^2 + k2^3)`.
//!
//! When the ideal step sits off-center by `delta_s` (a pseudo-copy inside a
//! stacked window, with `|delta_s| <= k1` so the jump stays inside the inner
//! flat segment), the bracket gains `3 delta_s^2 (k1 + k2)`.
//!
//! [`step_error_l2_quadrature`] integrates the same quantity numerically and
//! exists so tests and acceptance checks can confirm the closed forms.

use crate::construct::fourpair::{step_matching, validate_window};
use crate::error::{Error, Result};

fn half_widths(locs: &[f64; 4]) -> (f64, f64) {
    (0.5 * (locs[2] - locs[1]), 0.5 * (locs[3] - locs[0]))
}

fn bracket(k1: f64, k2: f64) -> f64 {
    k1 * k1 * k1 + 3.0 * k1 * k1 * k2 + 2.0 * k1 * k2 * k2 + k2 * k2 * k2
}

/// L2 distance between the scaled, half-height-shifted window profile and the
/// centered ideal step of height `gamma * h`.
pub fn step_error_l2(locs: [f64; 4], gamma: f64) -> Result<f64> {
    validate_window(&locs)?;
    if !gamma.is_finite() {
        return Err(Error::validation("step error: gamma must be finite"));
    }
    let (k1, k2) = half_widths(&locs);
    let diff = k1 - k2;
    Ok((gamma * gamma * (8.0 / 3.0) * diff * diff * bracket(k1, k2)).sqrt())
}

/// L2 distance for a unit-scale window whose ideal step is shifted by
/// `delta_s` from the window midpoint. Requires `|delta_s| <= k1`.
pub fn pseudo_copy_error_l2(locs: [f64; 4], delta_s: f64) -> Result<f64> {
    validate_window(&locs)?;
    if !delta_s.is_finite() {
        return Err(Error::validation("pseudo-copy error: shift must be finite"));
    }
    let (k1, k2) = half_widths(&locs);
    if delta_s.abs() > k1 + 1e-12 {
        return Err(Error::validation(format!(
            "pseudo-copy error: shift {delta_s} exceeds inner half-width {k1}"
        )));
    }
    let diff = k1 - k2;
    let br = bracket(k1, k2) + 3.0 * delta_s * delta_s * (k1 + k2);
    Ok(((8.0 / 3.0) * diff * diff * br).sqrt())
}

/// Trapezoid-rule version of the same integral: the window profile is shifted
/// up by `h/2`, scaled by `gamma`, and compared with the ideal step of height
/// `gamma * h` that jumps at `mid + delta_s`. Integration runs over
/// `[b1, b4]`; the integrand vanishes identically outside.
pub fn step_error_l2_quadrature(
    locs: [f64; 4],
    gamma: f64,
    delta_s: f64,
    samples: usize,
) -> Result<f64> {
    let assignment = step_matching(locs)?;
    if samples < 2 {
        return Err(Error::validation("quadrature: need at least two samples"));
    }
    let h = assignment.h();
    let s = assignment.mid() + delta_s;
    let (a, b) = (locs[0], locs[3]);
    let integrand = |x: f64| {
        let step = if x >= s { h } else { 0.0 };
        let diff = gamma * (assignment.eval(x) + 0.5 * h) - gamma * step;
        diff * diff
    };
    let dx = (b - a) / (samples - 1) as f64;
    let mut acc = 0.5 * (integrand(a) + integrand(b));
    for t in 1..samples - 1 {
        acc += integrand(a + dx * t as f64);
    }
    Ok((acc * dx).sqrt())
}
