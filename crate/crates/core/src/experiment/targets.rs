//! Named target functions for construction and training runs.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A scalar-valued target on an axis-aligned box, addressable by name.
#[derive(Clone, Copy)]
pub struct TargetFunction {
    /// Registry name.
    pub name: &'static str,
    /// Input dimension.
    pub dim: usize,
    /// Approximation box, one `(lo, hi)` pair per coordinate.
    pub domain: &'static [(f64, f64)],
    eval: fn(&[f64]) -> f64,
}

impl std::fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetFunction")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .finish()
    }
}

impl TargetFunction {
    /// Target value at `x` (length must equal `dim`).
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (self.eval)(x)
    }

    /// Convenience wrapper for one-dimensional targets.
    #[inline]
    pub fn eval_1d(&self, x: f64) -> f64 {
        (self.eval)(std::slice::from_ref(&x))
    }
}

const UNIT: [(f64, f64); 1] = [(0.0, 1.0)];
const SYM1: [(f64, f64); 1] = [(-1.0, 1.0)];
const SYM2: [(f64, f64); 2] = [(-1.0, 1.0); 2];
const SYM3: [(f64, f64); 3] = [(-1.0, 1.0); 3];

fn sin2pi(x: &[f64]) -> f64 {
    (2.0 * PI * x[0]).sin()
}

fn sin1d(x: &[f64]) -> f64 {
    -(2.0 * PI * x[0]).sin()
}

fn legendre3(x: &[f64]) -> f64 {
    let t = x[0];
    0.5 * (5.0 * t * t * t - 3.0 * t)
}

fn kperiod1d(x: &[f64]) -> f64 {
    let t = x[0];
    0.5 + 1.0 * (PI * t).sin() + 0.5 * (2.0 * PI * t).cos() + 0.3 * (3.0 * PI * t).sin()
}

fn sinxy2d(x: &[f64]) -> f64 {
    -(PI * x[0] * x[1]).sin()
}

fn sincos3d(x: &[f64]) -> f64 {
    (3.0 * x[0]).sin() * x[1].cos() * (2.0 * x[2]).sin()
}

fn const03(_: &[f64]) -> f64 {
    0.03
}

/// Every registered target.
pub const REGISTRY: [TargetFunction; 7] = [
    TargetFunction { name: "sin2pi", dim: 1, domain: &UNIT, eval: sin2pi },
    TargetFunction { name: "sin1d", dim: 1, domain: &SYM1, eval: sin1d },
    TargetFunction { name: "legendre3", dim: 1, domain: &SYM1, eval: legendre3 },
    TargetFunction { name: "kperiod1d", dim: 1, domain: &SYM1, eval: kperiod1d },
    TargetFunction { name: "sinxy2d", dim: 2, domain: &SYM2, eval: sinxy2d },
    TargetFunction { name: "sincos3d", dim: 3, domain: &SYM3, eval: sincos3d },
    // Constant smoke-test target: any budget at or above its magnitude is met
    // by a jump-free staircase.
    TargetFunction { name: "const", dim: 1, domain: &UNIT, eval: const03 },
];

/// Look a target up by registry name; unknown names report every valid one.
pub fn by_name(name: &str) -> Result<&'static TargetFunction> {
    REGISTRY.iter().find(|t| t.name == name).ok_or_else(|| {
        let names: Vec<&str> = REGISTRY.iter().map(|t| t.name).collect();
        Error::validation(format!(
            "unknown target {name:?}; valid targets: {}",
            names.join(", ")
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_resolve_and_unknown_names_list_the_valid_set() {
        for t in &REGISTRY {
            let found = by_name(t.name).unwrap();
            assert_eq!(found.dim, t.dim);
            assert_eq!(found.domain.len(), t.dim);
        }
        let err = by_name("nope").unwrap_err().to_string();
        for t in &REGISTRY {
            assert!(err.contains(t.name), "{err}");
        }
    }

    #[test]
    fn pinned_target_values() {
        assert!(by_name("sin2pi").unwrap().eval_1d(0.25) - 1.0 == 0.0);
        assert!((by_name("sin1d").unwrap().eval_1d(0.25) + 1.0).abs() < 1e-15);
        // Cubic polynomial at its argument extremes and a midpoint.
        let leg = by_name("legendre3").unwrap();
        assert_eq!(leg.eval_1d(1.0), 1.0);
        assert_eq!(leg.eval_1d(-1.0), -1.0);
        assert_eq!(leg.eval_1d(0.0), 0.0);
        assert!((leg.eval_1d(0.5) - 0.5 * (0.625 - 1.5)).abs() < 1e-15);
        // Mixed-period 1-D target at zero: 0.5 + 0 + 0.5 + 0.
        assert!((by_name("kperiod1d").unwrap().eval_1d(0.0) - 1.0).abs() < 1e-15);
        // Product structure in higher dimensions.
        let f2 = by_name("sinxy2d").unwrap();
        assert_eq!(f2.eval(&[0.0, 0.7]), -0.0);
        assert!((f2.eval(&[0.5, 1.0]) + (0.5 * PI).sin()).abs() < 1e-15);
        let f3 = by_name("sincos3d").unwrap();
        assert_eq!(f3.eval(&[0.0, 0.3, 0.9]), 0.0);
        assert!((f3.eval(&[1.0, 0.0, 1.0]) - 3.0f64.sin() * 2.0f64.sin()).abs() < 1e-15);
        assert_eq!(by_name("const").unwrap().eval_1d(0.42), 0.03);
    }

    #[test]
    fn domains_are_well_formed() {
        for t in &REGISTRY {
            for &(lo, hi) in t.domain {
                assert!(lo < hi);
            }
        }
    }
}
