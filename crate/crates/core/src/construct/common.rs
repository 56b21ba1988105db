//! Shared plumbing for the three network builders.

use crate::construct::fourpair::FourPairAssignment;
use crate::construct::ledger::{ConstructionLedger, DomainMap};
use crate::error::{Error, Result};
use crate::net::{EvalGrid, ReluNet};

/// Construction knobs common to all builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Interval to approximate on; the builder maps it affinely onto the
    /// unit interval internally.
    pub domain: (f64, f64),
    /// Hard ceiling on the number of paired locations.
    pub width_cap: usize,
    /// Verification grid resolution over the original interval.
    pub grid_points: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { domain: (0.0, 1.0), width_cap: 1_000_000, grid_points: 10_001 }
    }
}

impl BuildOptions {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.domain;
        if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
            return Err(Error::validation(format!("build: empty or non-finite domain [{lo}, {hi}]")));
        }
        if self.width_cap < 8 {
            return Err(Error::validation("build: width cap must be at least 8"));
        }
        if self.grid_points < 16 {
            return Err(Error::validation("build: verification grid needs at least 16 points"));
        }
        Ok(())
    }
}

/// Validate the requested accuracy.
pub fn validate_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::validation(format!("build: accuracy must be positive, got {eps}")));
    }
    Ok(())
}

/// Write-once sink for the output weights: each paired location's forward
/// and mirrored slots must be assigned exactly once.
pub struct ThetaSink {
    theta: Vec<f64>,
    assigned: Vec<bool>,
}

impl ThetaSink {
    /// Sink for `n` paired locations (`2n` weights).
    pub fn new(n: usize) -> ThetaSink {
        ThetaSink { theta: vec![0.0; 2 * n], assigned: vec![false; n] }
    }

    /// Assign the weight pair of location index `idx`.
    pub fn assign(&mut self, idx: usize, forward: f64, mirrored: f64) -> Result<()> {
        if self.assigned[idx] {
            return Err(Error::construction(format!(
                "internal layout bug: location {idx} assigned twice"
            )));
        }
        self.assigned[idx] = true;
        self.theta[2 * idx] = forward;
        self.theta[2 * idx + 1] = mirrored;
        Ok(())
    }

    /// Assign a four-pair gadget at the four location indices.
    pub fn assign_quad(&mut self, idx: [usize; 4], a: &FourPairAssignment) -> Result<()> {
        for k in 0..4 {
            self.assign(idx[k], a.p[k], a.q[k])?;
        }
        Ok(())
    }

    /// Check completeness and hand back the weights.
    pub fn finish(self) -> Result<Vec<f64>> {
        if let Some(idx) = self.assigned.iter().position(|&a| !a) {
            return Err(Error::construction(format!(
                "internal layout bug: location {idx} never assigned"
            )));
        }
        Ok(self.theta)
    }
}

/// Evaluate the finished network against the target over the original
/// interval and record the outcome in the ledger. Errors if the realized
/// deviation exceeds the requested accuracy or the weight multiset broke.
pub fn verify_and_record(
    net: &ReluNet,
    f: &dyn Fn(f64) -> f64,
    eps: f64,
    map: DomainMap,
    grid_points: usize,
    ledger: &mut ConstructionLedger,
) -> Result<()> {
    let xs_orig = crate::net::linspace(map.lo, map.hi, grid_points);
    let xs_unit: Vec<f64> = xs_orig.iter().map(|&x| map.to_unit(x)).collect();
    let values = net.eval_grid(&xs_unit);
    let grid = EvalGrid::new(xs_orig.clone(), values)
        .map_err(|e| Error::construction(format!("verification grid invalid: {e}")))?;
    ledger.realized_sup = grid.sup_error(|x| f(x));
    ledger.realized_l2 = grid.l2_error(|x| f(x));
    ledger.multiset_ok = net.multiset_intact();
    if !ledger.multiset_ok {
        return Err(Error::construction(
            "internal bug: assembled weights are not a rearrangement of the paired initialization"
                .to_string(),
        ));
    }
    if ledger.realized_sup > eps {
        let (at, dev) = grid.sup_error_argmax(|x| f(x));
        return Err(Error::construction(format!(
            "verification failed: deviation {dev:.6e} at x = {at:.6} exceeds requested {eps}"
        )));
    }
    Ok(())
}
