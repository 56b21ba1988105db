//! Trained-scale constructive builder over an equidistant paired grid.
//!
//! Pipeline for a continuous target `f` on an interval and accuracy `eps`:
//!
//! 1. map the interval onto `[0, 1]` and decompose the target into a
//!    staircase with jump height `delta_h = eps / 4`;
//! 2. choose a coarse grid fine enough that every jump gets its own window
//!    of four coarse locations, then refine it by an integer factor `L` so
//!    the window height `h = 8 (L / (n-1))^2` matches the spacing bound that
//!    keeps leftover cancellation below one jump height;
//! 3. realize each jump with a step-matched four-pair gadget over its window
//!    (all coefficients negated for downward jumps);
//! 4. fold every unused pair into near-zero lines via balanced signs; their
//!    summed intercept is cancelled through the output offset;
//! 5. set `gamma = delta_h / h`, `alpha = base + delta_h * J' / 2 +
//!    gamma * c_eta`, and verify the realized deviation on a grid.
//!
//! The refinement factor is `L = ceil((n_hat - 1) / 4)`: exactly large
//! enough that the largest unused-location gap `2 / (n - 1)` stays below the
//! window height `h`, which keeps the leftover bound at one jump height and
//! the whole budget at `2.5 * delta_h = 0.625 * eps`.

use crate::construct::common::{validate_eps, verify_and_record, BuildOptions, ThetaSink};
use crate::construct::fourpair::step_matching;
use crate::construct::ledger::{
    rle_signs, ConstructionLedger, DomainMap, ErrorBudget, IndexWindow,
};
use crate::construct::pwc::decompose_with_jump;
use crate::construct::signs::annihilate_pairs;
use crate::error::{Error, Result};
use crate::net::{unit_grid, unit_loc, ReluNet};

/// Build a trained-scale network approximating `f` on `opts.domain` to
/// within `eps` everywhere.
pub fn build_theorem1(
    f: impl Fn(f64) -> f64,
    eps: f64,
    opts: &BuildOptions,
) -> Result<(ReluNet, ConstructionLedger)> {
    let started = std::time::Instant::now();
    validate_eps(eps)?;
    opts.validate()?;
    let map = DomainMap::new(opts.domain.0, opts.domain.1);
    let fu = |u: f64| f(map.from_unit(u));

    let delta_h = eps / 4.0;
    let stair = decompose_with_jump(&fu, delta_h)?;
    let j = stair.j();

    // Coarse grid: four locations per jump window, spacing below a quarter of
    // the tightest jump gap, and enough resolution that one jump height of
    // leftover slope fits the budget.
    let mut n_hat_f: f64 = (4 * j) as f64;
    if let Some(gap) = stair.min_gap() {
        n_hat_f = n_hat_f.max(8.0 / gap + 1.0);
    }
    n_hat_f = n_hat_f.max(2.0 / delta_h);
    let n_hat = (n_hat_f.ceil() as usize + 1).max(5);

    let refine = ((n_hat - 1) + 3) / 4; // ceil((n_hat - 1) / 4), at least 1
    let n = refine * (n_hat - 1) + 1;
    if n > opts.width_cap {
        return Err(Error::WidthCap { required: n, cap: opts.width_cap });
    }

    let mut ledger = ConstructionLedger::new("equidistant", eps, map);
    ledger.delta_h = delta_h;
    ledger.base_level = stair.base;
    ledger.j_steps = j;
    ledger.j_prime = stair.j_prime();
    ledger.min_step_gap = stair.min_gap();
    ledger.coarse_width = Some(n_hat);
    ledger.copies = Some(refine);
    ledger.n_locations = n;
    ledger.step_locations = stair.steps.iter().map(|s| s.loc).collect();
    ledger.step_signs = rle_signs(stair.steps.iter().map(|s| s.sign));

    // Window placement on the coarse grid: each jump takes four consecutive
    // coarse locations starting one left of the jump, clamped to stay in
    // range and disjoint from the previous window.
    let d_coarse = 1.0 / (n_hat - 1) as f64;
    let mut sink = ThetaSink::new(n);
    let mut used = vec![false; n];
    let mut prev_coarse: i64 = -4;
    for step in &stair.steps {
        let pref = (step.loc / d_coarse).floor() as i64 - 1;
        let c = pref.max(prev_coarse + 4).min((n_hat - 4) as i64);
        if c < prev_coarse + 4 {
            return Err(Error::construction(format!(
                "window for jump at {} cannot stay disjoint from its predecessor",
                step.loc
            )));
        }
        prev_coarse = c;
        let start = c as usize * refine;
        let idx = [start, start + refine, start + 2 * refine, start + 3 * refine];
        let locs = [
            unit_loc(idx[0], n),
            unit_loc(idx[1], n),
            unit_loc(idx[2], n),
            unit_loc(idx[3], n),
        ];
        if !(locs[0] <= step.loc && step.loc <= locs[3]) {
            return Err(Error::construction(format!(
                "jump at {} escaped its window [{}, {}]",
                step.loc, locs[0], locs[3]
            )));
        }
        let mut gadget = step_matching(locs)?;
        if step.sign < 0 {
            gadget = gadget.negated();
        }
        sink.assign_quad(idx, &gadget)?;
        for &i in &idx {
            used[i] = true;
        }
        ledger.windows.push(IndexWindow { start, stride: refine, count: 4, sign: step.sign });
    }

    // Fold every unused pair into compensated near-zero lines.
    let unused: Vec<usize> = (0..n).filter(|&i| !used[i]).collect();
    let unused_locs: Vec<f64> = unused.iter().map(|&i| unit_loc(i, n)).collect();
    let fold = annihilate_pairs(&unused_locs, &unused_locs)?;
    for (k, &i) in unused.iter().enumerate() {
        let b = unused_locs[k];
        let m = fold.m[k] as f64;
        sink.assign(i, m * b, -(m * b))?;
    }
    ledger.leftover_pairs = unused.len();
    ledger.leftover_signs = rle_signs(fold.m.iter().copied());
    ledger.residual_slope = fold.slope;
    ledger.shift_constant = fold.c_eta;
    ledger.retired = fold.retired.map(|r| (unused[r.index], r.value));

    // Scale and offset.
    let d_window = refine as f64 / (n - 1) as f64;
    let h = 8.0 * d_window * d_window;
    let gamma = delta_h / h;
    let alpha = stair.base + delta_h * (stair.j_prime() as f64) / 2.0 + gamma * fold.c_eta;
    ledger.gamma = gamma;
    ledger.alpha = alpha;

    let mut net = ReluNet::paired_1d(&unit_grid(n), (0.0, 1.0))?;
    net.theta = sink.finish()?;
    net.alpha = alpha;
    net.gamma = gamma;

    ledger.budget = {
        let staircase = 0.5 * delta_h + 1e-9;
        let windows = delta_h;
        let leftover = gamma * fold.sup_bound;
        let numeric_dust = 1e-12 * (1.0 + gamma);
        ErrorBudget {
            staircase,
            windows,
            leftover,
            numeric_dust,
            total: staircase + windows + leftover + numeric_dust,
        }
    };

    verify_and_record(&net, &|x| f(x), eps, map, opts.grid_points, &mut ledger)?;
    ledger.build_millis = started.elapsed().as_millis() as u64;
    Ok((net, ledger))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = std::f64::consts::TAU;

    #[test]
    fn constant_target_folds_into_offset() {
        let (net, ledger) =
            build_theorem1(|_| 0.3, 0.1, &BuildOptions::default()).unwrap();
        assert_eq!(ledger.j_steps, 0);
        assert!(ledger.realized_sup <= 0.1);
        assert!(net.multiset_intact());
        // The staircase sits on the nearest jump-height multiple of 0.3.
        assert!((ledger.base_level - 0.3).abs() < 0.0126);
    }

    #[test]
    fn ramp_target_meets_budget() {
        let (net, ledger) = build_theorem1(|x| x, 0.4, &BuildOptions::default()).unwrap();
        assert_eq!(ledger.j_steps, 10);
        assert_eq!(ledger.j_prime, 10);
        assert!(ledger.realized_sup <= 0.4, "sup {}", ledger.realized_sup);
        assert!(ledger.realized_sup <= ledger.budget.total + 1e-12);
        assert!(net.multiset_intact());
        assert_eq!(ledger.windows.len(), 10);
    }

    #[test]
    fn sine_target_meets_pinned_accuracy() {
        let (net, ledger) =
            build_theorem1(|x| (TAU * x).sin(), 0.25, &BuildOptions::default()).unwrap();
        assert_eq!(ledger.j_steps, 64);
        assert_eq!(ledger.j_prime, 0);
        assert!(ledger.realized_sup <= 0.25, "sup {}", ledger.realized_sup);
        assert!(net.multiset_intact());
        assert!(ledger.n_locations <= 1_000_000);
        // Budget promises no more than 0.625 * eps plus leftovers.
        assert!(ledger.budget.total <= 0.25, "budget {}", ledger.budget.total);
    }

    #[test]
    fn mapped_domain_builds_and_verifies_in_original_coordinates() {
        let opts = BuildOptions { domain: (-1.0, 1.0), ..BuildOptions::default() };
        let (net, ledger) = build_theorem1(|x| -(TAU * x).sin() / 2.0, 0.3, &opts).unwrap();
        assert!(ledger.realized_sup <= 0.3);
        assert!(!ledger.domain.is_identity());
        // Check one point by hand through the map.
        let x = 0.3;
        let u = ledger.domain.to_unit(x);
        let want = -(TAU * x).sin() / 2.0;
        assert!((net.forward_1d(u) - want).abs() <= 0.3 + 1e-12);
    }

    #[test]
    fn width_cap_is_reported() {
        let opts = BuildOptions { width_cap: 100, ..BuildOptions::default() };
        let err = build_theorem1(|x| (TAU * x).sin(), 0.25, &opts).unwrap_err();
        match err {
            Error::WidthCap { required, cap } => {
                assert!(required > 100);
                assert_eq!(cap, 100);
            }
            other => panic!("expected width cap error, got {other}"),
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(build_theorem1(|x| x, 0.0, &BuildOptions::default()).is_err());
        assert!(build_theorem1(|x| x, f64::NAN, &BuildOptions::default()).is_err());
        let opts = BuildOptions { domain: (1.0, 0.0), ..BuildOptions::default() };
        assert!(build_theorem1(|x| x, 0.4, &opts).is_err());
    }

    #[test]
    fn windows_are_disjoint_and_jumps_contained() {
        let (_, ledger) =
            build_theorem1(|x| (TAU * x).sin(), 0.25, &BuildOptions::default()).unwrap();
        let mut prev_end = 0usize;
        for (w, s) in ledger.windows.iter().zip(&ledger.step_locations) {
            assert!(w.start >= prev_end, "windows overlap");
            prev_end = w.start + w.stride * (w.count - 1) + 1;
            let n = ledger.n_locations;
            let lo = unit_loc(w.start, n);
            let hi = unit_loc(w.start + w.stride * 3, n);
            assert!(lo <= *s && *s <= hi, "jump {s} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn gamma_matches_height_ratio_and_alpha_composition() {
        let (net, ledger) = build_theorem1(|x| x, 0.4, &BuildOptions::default()).unwrap();
        let n = ledger.n_locations;
        let l = ledger.copies.unwrap() as f64;
        let h = 8.0 * (l / (n - 1) as f64).powi(2);
        assert!((net.gamma - 0.1 / h).abs() < 1e-12 * net.gamma.abs());
        let want_alpha = ledger.base_level
            + ledger.delta_h * ledger.j_prime as f64 / 2.0
            + net.gamma * ledger.shift_constant;
        assert!((net.alpha - want_alpha).abs() < 1e-12 * want_alpha.abs().max(1.0));
    }
}
