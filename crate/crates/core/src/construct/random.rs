//! Random-initialization construction: carve an accurate subnetwork out of
//! i.i.d. uniform basis locations and pairwise-mirrored uniform weights.
//!
//! The equidistant builders place basis pairs wherever the staircase needs
//! them. Here the basis locations and the output-weight magnitudes are drawn
//! uniformly at random instead, and the builder only *selects*: it lays out
//! an ideal template (one four-pair step window per staircase jump), finds a
//! random location and a random magnitude within a small radius `delta_r` of
//! every template entry ([`match_subnetwork`]), seats the window coefficient
//! pattern on those matches, and folds every unmatched pair into compensated
//! near-zero lines exactly as the equidistant builders fold unused grid
//! locations.
//!
//! Two tail bounds size the draw `n` before any sampling happens:
//!
//! * the matching bound — the chance that every template entry finds a
//!   neighbor within `delta_r` in both pools ([`match_probability`]) must
//!   reach `sqrt(1 - delta)`;
//! * the leftover bound — the chance that the slope of the folded lines,
//!   which the balanced sign choice keeps below the largest adjacent gap of
//!   the unmatched magnitudes, stays within its error allowance must also
//!   reach `sqrt(1 - delta)`.
//!
//! The matching radius itself comes from a measured sensitivity: the window
//! template is perturbed at a tiny reference scale a few dozen times, the
//! worst response per unit of perturbation (`kappa`) is recorded, and
//! `delta_r` is capped so a full set of radius-sized perturbations moves the
//! output by at most a quarter of `eps`. Every produced network is verified
//! on a grid before it is returned; a draw that matched but verifies above
//! `eps` comes back as [`Error::Retry`], so the per-seed success rate can be
//! compared honestly against the modeled probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::construct::common::{validate_eps, verify_and_record, BuildOptions, ThetaSink};
use crate::construct::fourpair::{step_matching, FourPairAssignment};
use crate::construct::ledger::{rle_signs, ConstructionLedger, DomainMap, ErrorBudget};
use crate::construct::pwc::{decompose_with_jump, PiecewiseConstant};
use crate::construct::signs::annihilate_pairs;
use crate::error::{Error, Result};
use crate::net::{linspace, ReluNet};

/// Offsets of the four window locations around a jump, in units of the
/// window spacing.
const WINDOW_OFFSETS: [f64; 4] = [-1.5, -0.5, 0.5, 1.5];
/// Window spacing as a fraction of the tightest usable gap around the jumps.
const SPACING_FRACTION: f64 = 0.3;
/// Number of random perturbation draws used to measure template sensitivity.
const PROBE_DRAWS: usize = 64;
/// Grid resolution for the sensitivity probe.
const PROBE_GRID: usize = 2001;
/// Fixed seed for the sensitivity probe, so the chosen draw width depends
/// only on the target, the accuracy, and the failure budget.
const PROBE_SEED: u64 = 0x5eed_ca11;

/// Index mapping produced by [`match_subnetwork`]: entry `k` gives the pool
/// index matched to target `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubnetMatch {
    /// For each target, the index into the location pool.
    pub loc_index: Vec<usize>,
    /// For each target, the index into the weight-magnitude pool.
    pub weight_index: Vec<usize>,
}

fn validate_radius(n_hat: usize, delta_r: f64) -> Result<()> {
    if !delta_r.is_finite() || delta_r < 0.0 {
        return Err(Error::validation(format!(
            "match radius must be finite and nonnegative, got {delta_r}"
        )));
    }
    if 2.0 * n_hat as f64 * delta_r > 1.0 {
        return Err(Error::validation(format!(
            "match radius {delta_r} is too large for {n_hat} disjoint intervals in [0, 1]"
        )));
    }
    Ok(())
}

/// Probability that `n` i.i.d. uniform points on `[0, 1]` cover all `n_hat`
/// disjoint intervals of half-width `delta_r`, squared — i.e. the chance
/// that *both* independent pools (locations and weight magnitudes) offer a
/// neighbor within `delta_r` of every template entry.
///
/// The single-pool miss chance is the inclusion–exclusion sum
/// `sum_{k=1}^{n_hat} (-1)^{k+1} C(n_hat, k) (1 - 2 k delta_r)^n` over sets
/// of `k` simultaneously-empty intervals; terms with `1 - 2 k delta_r <= 0`
/// vanish. Binomial coefficients are accumulated in log space and the
/// alternating sum is compensated.
pub fn match_probability(n_hat: usize, n: usize, delta_r: f64) -> Result<f64> {
    validate_radius(n_hat, delta_r)?;
    if n_hat == 0 {
        return Ok(1.0);
    }

    let mut miss = 0.0f64;
    let mut comp = 0.0f64;
    let mut ln_binom = 0.0f64;
    for k in 1..=n_hat {
        ln_binom += ((n_hat - k + 1) as f64).ln() - (k as f64).ln();
        let shrink = -2.0 * k as f64 * delta_r;
        if shrink <= -1.0 {
            break;
        }
        let term = (ln_binom + n as f64 * shrink.ln_1p()).exp()
            * if k % 2 == 1 { 1.0 } else { -1.0 };
        let y = term - comp;
        let t = miss + y;
        comp = (t - miss) - y;
        miss = t;
    }
    let per_pool = (1.0 - miss).clamp(0.0, 1.0);
    Ok(per_pool * per_pool)
}

/// Monte-Carlo estimate of [`match_probability`] with the targets placed at
/// the canonical midpoints `(2k + 1) / (2 n_hat)`. Each trial draws two
/// independent pools of `n` uniforms and succeeds when every interval of
/// half-width `delta_r` around a target captures at least one point in both
/// pools.
pub fn simulate_match_probability(
    n_hat: usize,
    n: usize,
    delta_r: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    validate_radius(n_hat, delta_r)?;
    if trials == 0 {
        return Err(Error::validation("simulation needs at least one trial"));
    }
    if n_hat == 0 {
        return Ok(1.0);
    }

    let nh = n_hat as f64;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut hit = vec![false; n_hat];
    let mut ok = 0usize;
    for _ in 0..trials {
        let mut both = true;
        for _pool in 0..2 {
            hit.fill(false);
            let mut remaining = n_hat;
            for _ in 0..n {
                let x: f64 = rng.random_range(0.0..1.0);
                let k = ((x * nh) as usize).min(n_hat - 1);
                let target = (2 * k + 1) as f64 / (2.0 * nh);
                if (x - target).abs() <= delta_r && !hit[k] {
                    hit[k] = true;
                    remaining -= 1;
                    if remaining == 0 {
                        break;
                    }
                }
            }
            if remaining != 0 {
                both = false;
                break;
            }
        }
        if both {
            ok += 1;
        }
    }
    Ok(ok as f64 / trials as f64)
}

/// Claim, for each target in ascending order, the nearest still-unclaimed
/// pool entry within `delta_r`. Returns one `Option<usize>` pool index per
/// target.
fn claim_pool(pool: &[f64], targets: &[f64], delta_r: f64) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_unstable_by(|&a, &b| pool[a].total_cmp(&pool[b]).then(a.cmp(&b)));
    let mut claimed = vec![false; pool.len()];

    let mut picks = Vec::with_capacity(targets.len());
    for &target in targets {
        let split = order.partition_point(|&i| pool[i] < target);
        let mut right = split;
        while right < order.len() && claimed[right] {
            right += 1;
        }
        let mut left = split as isize - 1;
        while left >= 0 && claimed[left as usize] {
            left -= 1;
        }
        let d_right = if right < order.len() {
            pool[order[right]] - target
        } else {
            f64::INFINITY
        };
        let d_left = if left >= 0 {
            target - pool[order[left as usize]]
        } else {
            f64::INFINITY
        };
        let (dist, pos) = if d_left <= d_right {
            (d_left, left as usize)
        } else {
            (d_right, right)
        };
        if dist <= delta_r {
            claimed[pos] = true;
            picks.push(Some(order[pos]));
        } else {
            picks.push(None);
        }
    }
    picks
}

/// Find, for every template entry, a random basis location and a random
/// weight magnitude within `delta_r`. Targets are visited in ascending
/// order; each pool entry is claimed at most once, nearest first.
///
/// `targets` must be strictly increasing (the template serves as target list
/// for both pools, because the window coefficient pattern reuses the window
/// locations as magnitudes). On failure the error lists every unmatched
/// target: indices `0..targets.len()` for the location pool, then the same
/// indices offset by `targets.len()` for the weight pool.
pub fn match_subnetwork(
    locs: &[f64],
    weights: &[f64],
    targets: &[f64],
    delta_r: f64,
) -> Result<SubnetMatch> {
    if !delta_r.is_finite() || delta_r < 0.0 {
        return Err(Error::validation(format!(
            "match radius must be finite and nonnegative, got {delta_r}"
        )));
    }
    for (name, pool) in [("locations", locs), ("weights", weights)] {
        if pool.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!("{name} pool must be finite")));
        }
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::validation("targets must be finite"));
    }
    if targets.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::validation("targets must be strictly increasing"));
    }

    let loc_picks = claim_pool(locs, targets, delta_r);
    let weight_picks = claim_pool(weights, targets, delta_r);

    let mut unmatched = Vec::new();
    for (k, pick) in loc_picks.iter().enumerate() {
        if pick.is_none() {
            unmatched.push(k);
        }
    }
    for (k, pick) in weight_picks.iter().enumerate() {
        if pick.is_none() {
            unmatched.push(targets.len() + k);
        }
    }
    if !unmatched.is_empty() {
        return Err(Error::MatchNotFound { unmatched, total: 2 * targets.len() });
    }
    Ok(SubnetMatch {
        loc_index: loc_picks.into_iter().map(|p| p.expect("checked")).collect(),
        weight_index: weight_picks.into_iter().map(|p| p.expect("checked")).collect(),
    })
}

/// Ideal window template for a staircase: four locations around each jump
/// and the matching step gadget (negated for downward jumps).
fn window_template(stair: &PiecewiseConstant, d_hat: f64) -> Result<(Vec<f64>, Vec<FourPairAssignment>)> {
    let mut targets = Vec::with_capacity(4 * stair.j());
    let mut gadgets = Vec::with_capacity(stair.j());
    for step in &stair.steps {
        let locs = [
            step.loc + WINDOW_OFFSETS[0] * d_hat,
            step.loc + WINDOW_OFFSETS[1] * d_hat,
            step.loc + WINDOW_OFFSETS[2] * d_hat,
            step.loc + WINDOW_OFFSETS[3] * d_hat,
        ];
        let mut gadget = step_matching(locs)?;
        if step.sign < 0 {
            gadget = gadget.negated();
        }
        targets.extend_from_slice(&locs);
        gadgets.push(gadget);
    }
    if targets.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::construction(
            "window template is not strictly increasing; jumps are too crowded".to_string(),
        ));
    }
    Ok((targets, gadgets))
}

/// Worst observed output change per unit of perturbation when every window
/// location and every magnitude in the template moves independently by up to
/// a tiny reference amount.
fn probe_sensitivity(gadgets: &[FourPairAssignment], gamma: f64, d_hat: f64) -> f64 {
    let xs = linspace(0.0, 1.0, PROBE_GRID);
    let ideal: Vec<f64> = xs
        .iter()
        .map(|&x| gamma * gadgets.iter().map(|g| g.eval(x)).sum::<f64>())
        .collect();

    let dp = (d_hat * 1e-2).min(1e-4);
    let mut rng = ChaCha12Rng::seed_from_u64(PROBE_SEED);
    let mut kappa = 0.0f64;
    for _ in 0..PROBE_DRAWS {
        let perturbed: Vec<FourPairAssignment> = gadgets
            .iter()
            .map(|g| {
                let mut locs = g.locs;
                let mut mags = [0.0f64; 4];
                for c in 0..4 {
                    locs[c] += rng.random_range(-1.0..1.0) * dp;
                    mags[c] = g.p[c].abs() + rng.random_range(-1.0..1.0) * dp;
                }
                let mut p = [0.0f64; 4];
                let mut q = [0.0f64; 4];
                for c in 0..4 {
                    p[c] = g.p[c].signum() * mags[c];
                    q[c] = g.q[c].signum() * mags[3 - c];
                }
                FourPairAssignment { locs, p, q, kind: g.kind }
            })
            .collect();
        let sup = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let v: f64 = perturbed.iter().map(|g| g.eval(x)).sum();
                (gamma * v - ideal[i]).abs()
            })
            .fold(0.0f64, f64::max);
        kappa = kappa.max(sup / dp);
    }
    kappa
}

/// True when the chance that the largest adjacent gap of `m` uniform order
/// statistics exceeds the slope allowance `t` is within `fail_budget`,
/// using the union bound `(m + 1) (1 - t)^m`.
fn leftover_gap_ok(m: usize, t: f64, fail_budget: f64) -> bool {
    if t >= 1.0 || m == 0 {
        return true;
    }
    if t <= 0.0 {
        return false;
    }
    (m + 1) as f64 * (m as f64 * (-t).ln_1p()).exp() <= fail_budget
}

/// Build a network approximating `f` on `opts.domain` to within `eps` from a
/// seeded random initialization: locations i.i.d. uniform, output weights
/// pairwise `(+p_i, -p_i)` with uniform magnitudes. The assembled weights
/// are a rearrangement of exactly that initialization.
///
/// The draw width is sized so the modeled chance of success is at least
/// `1 - delta`; a draw that fails to match the template or verifies above
/// `eps` returns [`Error::Retry`] with diagnostics, which callers should
/// count against `delta` when retrying with a fresh seed.
pub fn build_random(
    f: impl Fn(f64) -> f64,
    eps: f64,
    delta: f64,
    seed: u64,
    opts: &BuildOptions,
) -> Result<(ReluNet, ConstructionLedger)> {
    let started = std::time::Instant::now();
    validate_eps(eps)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::validation(format!(
            "failure budget delta must lie in (0, 1), got {delta}"
        )));
    }
    opts.validate()?;
    let map = DomainMap::new(opts.domain.0, opts.domain.1);
    let fu = |u: f64| f(map.from_unit(u));

    let delta_h = eps / 3.0;
    let stair = decompose_with_jump(&fu, delta_h)?;
    let j = stair.j();
    let n_hat = 4 * j;

    let mut ledger = ConstructionLedger::new("random_init", eps, map);
    ledger.delta_h = delta_h;
    ledger.base_level = stair.base;
    ledger.j_steps = j;
    ledger.j_prime = stair.j_prime();
    ledger.min_step_gap = stair.min_gap();
    ledger.coarse_width = Some(n_hat);
    ledger.step_locations = stair.steps.iter().map(|s| s.loc).collect();
    ledger.step_signs = rle_signs(stair.steps.iter().map(|s| s.sign));
    ledger.seed = Some(seed);

    // Template, output scale, and matching radius. A constant-enough target
    // needs no windows at all: everything is folded into lines and the
    // offset, and only the leftover bound sizes the draw.
    let (targets, gadgets, gamma, delta_r) = if j == 0 {
        (Vec::new(), Vec::new(), 1.0, 0.0)
    } else {
        let first = stair.steps.first().expect("j > 0").loc;
        let last = stair.steps.last().expect("j > 0").loc;
        let base_gap = stair
            .min_gap()
            .unwrap_or(0.5)
            .min(2.0 * first)
            .min(2.0 * (1.0 - last))
            .min(0.5);
        if !(base_gap > 0.0) {
            return Err(Error::construction(
                "jumps sit on the domain boundary; no room for windows".to_string(),
            ));
        }

        let mut d_hat = SPACING_FRACTION * base_gap;
        let mut shrink_rounds = 0;
        loop {
            let (targets, gadgets) = window_template(&stair, d_hat)?;
            let gamma = delta_h / (8.0 * d_hat * d_hat);
            let kappa = probe_sensitivity(&gadgets, gamma, d_hat);
            let r0 = if kappa > 0.0 { eps / (4.0 * kappa) } else { f64::INFINITY };
            let min_target_gap = targets
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            let delta_r = 0.999
                * r0.min(0.5 * min_target_gap)
                    .min(1.0 / (2.0 * n_hat as f64));
            if !(delta_r > 0.0) {
                return Err(Error::construction(
                    "matching radius collapsed to zero".to_string(),
                ));
            }
            let inside = targets[0] - delta_r >= 0.0
                && targets[targets.len() - 1] + delta_r <= 1.0;
            if inside {
                ledger.probe_sensitivity = Some(kappa);
                break (targets, gadgets, gamma, delta_r);
            }
            shrink_rounds += 1;
            if shrink_rounds > 8 {
                return Err(Error::construction(
                    "window template cannot keep its match intervals inside the domain"
                        .to_string(),
                ));
            }
            d_hat *= 0.5;
        }
    };

    // Size the draw: smallest even width meeting both tail bounds.
    let target_p = (1.0 - delta).sqrt();
    let fail_budget = 1.0 - target_p;
    let t_slope = eps / (4.0 * gamma);
    let passes = |n: usize| -> Result<bool> {
        if n <= n_hat {
            return Ok(false);
        }
        if n_hat > 0 && match_probability(n_hat, n, delta_r)? < target_p {
            return Ok(false);
        }
        Ok(leftover_gap_ok(n - n_hat, t_slope, fail_budget))
    };
    let mut hi = (2 * n_hat).max(64);
    let mut doublings = 0;
    while !passes(hi)? {
        doublings += 1;
        if doublings > 40 {
            return Err(Error::construction(
                "no draw width satisfies the matching and leftover bounds".to_string(),
            ));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 2 {
        let mid = (lo + (hi - lo) / 2) & !1;
        if mid > lo && passes(mid)? {
            hi = mid;
        } else if mid > lo {
            lo = mid;
        } else {
            break;
        }
    }
    let n = hi;
    if n > opts.width_cap {
        return Err(Error::WidthCap { required: n, cap: opts.width_cap });
    }
    ledger.n_locations = n;
    ledger.match_radius = (n_hat > 0).then_some(delta_r);
    ledger.success_probability = {
        let mp = if n_hat > 0 { match_probability(n_hat, n, delta_r)? } else { 1.0 };
        let gap_fail = if t_slope >= 1.0 || n == n_hat {
            0.0
        } else {
            let m = n - n_hat;
            ((m + 1) as f64 * (m as f64 * (-t_slope).ln_1p()).exp()).min(1.0)
        };
        Some(mp * (1.0 - gap_fail))
    };

    // Draw both pools for this seed.
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut locs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    locs.sort_unstable_by(f64::total_cmp);
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();

    let mm = if n_hat > 0 {
        match match_subnetwork(&locs, &weights, &targets, delta_r) {
            Ok(m) => Some(m),
            Err(Error::MatchNotFound { unmatched, total }) => {
                return Err(Error::Retry {
                    reason: format!(
                        "seed {seed}: {} of {total} template entries found no neighbor \
                         within radius {delta_r:.3e}",
                        unmatched.len()
                    ),
                });
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    // Seat the window coefficient pattern on the matched entries. Slot `c`
    // of window `j` puts the matched magnitude for slot `c` on the forward
    // weight and the matched magnitude for slot `3 - c` on the mirrored
    // weight, with the signs of the ideal gadget; each magnitude is consumed
    // exactly once with each sign.
    let mut sink = ThetaSink::new(n);
    let mut loc_used = vec![false; n];
    let mut weight_used = vec![false; n];
    if let Some(mm) = &mm {
        for (w, gadget) in gadgets.iter().enumerate() {
            for c in 0..4 {
                let i = mm.loc_index[4 * w + c];
                let v_fwd = weights[mm.weight_index[4 * w + c]];
                let v_mir = weights[mm.weight_index[4 * w + (3 - c)]];
                sink.assign(i, gadget.p[c].signum() * v_fwd, gadget.q[c].signum() * v_mir)?;
                loc_used[i] = true;
                weight_used[mm.weight_index[4 * w + c]] = true;
            }
        }
    }

    // Fold every unmatched pair into near-zero lines: the k-th smallest
    // unmatched magnitude rides on the k-th smallest unmatched location.
    let spare_locs: Vec<usize> = (0..n).filter(|&i| !loc_used[i]).collect();
    let mut spare_weights: Vec<usize> = (0..n).filter(|&i| !weight_used[i]).collect();
    spare_weights.sort_unstable_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)));
    let spare_vals: Vec<f64> = spare_weights.iter().map(|&i| weights[i]).collect();
    let spare_locs_vals: Vec<f64> = spare_locs.iter().map(|&i| locs[i]).collect();
    let fold = annihilate_pairs(&spare_vals, &spare_locs_vals)?;
    for (k, &i) in spare_locs.iter().enumerate() {
        let v = spare_vals[k];
        let m = fold.m[k] as f64;
        sink.assign(i, m * v, -(m * v))?;
    }
    ledger.leftover_pairs = spare_locs.len();
    ledger.leftover_signs = rle_signs(fold.m.iter().copied());
    ledger.residual_slope = fold.slope;
    ledger.shift_constant = fold.c_eta;
    ledger.retired = fold.retired.map(|r| (spare_locs[r.index], r.value));

    let alpha = stair.base + delta_h * (stair.j_prime() as f64) / 2.0 + gamma * fold.c_eta;
    ledger.gamma = gamma;
    ledger.alpha = alpha;

    let mut net = ReluNet::paired_1d(&locs, (0.0, 1.0))?;
    net.theta = sink.finish()?;
    net.alpha = alpha;
    net.gamma = gamma;
    let mut multiset = Vec::with_capacity(2 * n);
    for &w in &weights {
        multiset.push(w);
        multiset.push(-w);
    }
    net.initial_multiset = multiset;

    ledger.budget = {
        let staircase = 0.5 * delta_h + 1e-9;
        let windows = if n_hat > 0 { delta_h + 0.25 * eps } else { 0.0 };
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

    match verify_and_record(&net, &|x| f(x), eps, map, opts.grid_points, &mut ledger) {
        Ok(()) => {}
        Err(e) if net.multiset_intact() => {
            return Err(Error::Retry { reason: format!("seed {seed}: {e}") });
        }
        Err(e) => return Err(e),
    }
    ledger.build_millis = started.elapsed().as_millis() as u64;
    Ok((net, ledger))
}
