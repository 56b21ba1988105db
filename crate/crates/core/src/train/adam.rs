//! Adam optimizer with bias-corrected moment estimates.

use crate::error::{Error, Result};

/// Moment-decay hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    /// First-moment decay rate.
    pub beta1: f64,
    /// Second-moment decay rate.
    pub beta2: f64,
    /// Denominator stabilizer.
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> AdamParams {
        AdamParams { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamParams {
    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::validation("adam: decay rates must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::validation("adam: eps must be positive and finite"));
        }
        Ok(())
    }
}

/// Per-parameter running moments plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    /// First moments.
    pub m: Vec<f64>,
    /// Second moments.
    pub v: Vec<f64>,
    /// Completed steps.
    pub t: u64,
}

impl AdamState {
    /// Fresh zeroed state for `len` parameters.
    pub fn new(len: usize) -> AdamState {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// Apply one Adam update to `params` in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    hp: &AdamParams,
) -> Result<()> {
    hp.validate()?;
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::validation("adam: learning rate must be positive and finite"));
    }
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::validation(format!(
            "adam: mismatched lengths (params {}, grads {}, state {})",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }

    state.t += 1;
    let bc1 = 1.0 - hp.beta1.powi(state.t.min(i32::MAX as u64) as i32);
    let bc2 = 1.0 - hp.beta2.powi(state.t.min(i32::MAX as u64) as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + hp.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_fixed() {
        let mut p = vec![1.5, -2.0];
        let mut st = AdamState::new(2);
        st.m = vec![0.8, -0.3];
        st.v = vec![0.5, 0.1];
        let before_m = st.m.clone();
        adam_step(&mut p, &[0.0, 0.0], &mut st, 1e-3, &AdamParams::default()).unwrap();
        // Parameters barely move (only via decayed stale momentum), and both
        // moments decay toward zero.
        assert!(st.m[0] < before_m[0] && st.m[1] > before_m[1]);
        for i in 0..2 {
            assert!(st.m[i].abs() < before_m[i].abs());
        }
        let mut fresh = vec![1.5, -2.0];
        let mut fresh_st = AdamState::new(2);
        adam_step(&mut fresh, &[0.0, 0.0], &mut fresh_st, 1e-3, &AdamParams::default()).unwrap();
        assert_eq!(fresh, vec![1.5, -2.0]);
        assert_eq!(fresh_st.m, vec![0.0, 0.0]);
        assert_eq!(fresh_st.v, vec![0.0, 0.0]);
    }

    #[test]
    fn first_step_moves_by_roughly_lr_against_the_gradient_sign() {
        // With bias correction the very first update is lr * g / (|g| + eps'),
        // i.e. close to lr * sign(g), independent of the gradient magnitude.
        for &g in &[1e-4, 0.3, 7.0, -2.5] {
            let mut p = vec![0.0];
            let mut st = AdamState::new(1);
            adam_step(&mut p, &[g], &mut st, 1e-2, &AdamParams::default()).unwrap();
            assert!(
                (p[0] + 1e-2 * g.signum()).abs() < 1e-6,
                "g = {g} moved to {}",
                p[0]
            );
        }
    }

    #[test]
    fn minimizes_a_one_dimensional_quadratic() {
        // f(p) = (p - 2)^2, gradient 2 (p - 2).
        let mut p = vec![1.0];
        let mut st = AdamState::new(1);
        let hp = AdamParams::default();
        for _ in 0..2000 {
            let g = 2.0 * (p[0] - 2.0);
            adam_step(&mut p, &[g], &mut st, 1e-2, &hp).unwrap();
        }
        assert!((p[0] - 2.0).abs() < 1e-4, "ended at {}", p[0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut p = vec![0.0];
        let mut st = AdamState::new(1);
        let hp = AdamParams::default();
        assert!(adam_step(&mut p, &[0.0, 0.0], &mut st, 1e-3, &hp).is_err());
        assert!(adam_step(&mut p, &[0.0], &mut st, 0.0, &hp).is_err());
        assert!(adam_step(&mut p, &[0.0], &mut st, f64::NAN, &hp).is_err());
        let bad = AdamParams { beta1: 1.0, ..AdamParams::default() };
        assert!(adam_step(&mut p, &[0.0], &mut st, 1e-3, &bad).is_err());
    }
}
