//! Fixed-scale constructive builder: output scale pinned to one and output
//! offset pinned to zero, so every magnitude in the approximation must come
//! out of the paired weights themselves.
//!
//! The target is decomposed into a staircase with jump height
//! `delta_h = eps / 3`. Each jump is realized by `L` stacked pseudo-copies
//! of the step gadget over a contiguous window of `4 L` locations (copy `t`
//! uses locations `ps + t, ps + L + t, ps + 2L + t, ps + 3L + t`), which
//! multiplies the per-copy height `8 (L d)^2` into an exact window height
//! `8 L^3 d^2` with `d` the grid spacing. Choosing `n` so that
//! `8 L^3 / (n-1)^2` lands at or just under the requested jump height makes
//! the window height the realized jump height.
//!
//! The staircase's resting level `k0 * delta_h` plus the `delta_h J' / 2`
//! centering of the step gadgets form a global constant. In units of
//! `2 d^2` that constant is the exact integer `2 L^3 (2 k0 + J')`, realized
//! by constant-matching blocks: a block of `width` four-tuples over two free
//! runs at `a1` and `a3` contributes exactly `width^2 (a3 - a1)` units, and
//! the first 128 locations are reserved for width-one singles that finish
//! the remainder down to zero (a `+3`/`-2` pair covers a final unit).
//! Remaining free eight-location chunks are cancelled by equal-and-opposite
//! constant quads; remaining single locations pair into alternating
//! near-zero lines whose exact residual `A x + B` is carried in the budget.

use crate::construct::common::{validate_eps, verify_and_record, BuildOptions, ThetaSink};
use crate::construct::fourpair::{constant_matching, step_matching};
use crate::construct::ledger::{
    rle_signs, ConstantBlock, ConstructionLedger, DomainMap, ErrorBudget, IndexWindow,
};
use crate::construct::pwc::{decompose_with_jump, PiecewiseConstant};
use crate::error::{Error, Result};
use crate::net::{unit_grid, unit_loc, ReluNet};

/// Locations kept free of windows and wide blocks so small remainders can
/// always be finished; also the smallest index any window may occupy.
const RESERVE: usize = 128;
/// Give up growing the copy count after this many layout attempts.
const MAX_ATTEMPTS: usize = 60;
/// Abort a layout whose block realization degenerates into tiny pieces.
const MAX_BLOCKS: usize = 4096;

/// Build a network with `gamma == 1` and `alpha == 0` exactly that
/// approximates `f` on `opts.domain` to within `eps` everywhere.
pub fn build_theorem2(
    f: impl Fn(f64) -> f64,
    eps: f64,
    opts: &BuildOptions,
) -> Result<(ReluNet, ConstructionLedger)> {
    let started = std::time::Instant::now();
    validate_eps(eps)?;
    opts.validate()?;
    let map = DomainMap::new(opts.domain.0, opts.domain.1);
    let fu = |u: f64| f(map.from_unit(u));

    let delta_t = eps / 3.0;
    let stair = decompose_with_jump(&fu, delta_t)?;
    let j = stair.j();
    let k0 = (stair.base / delta_t).round() as i64;
    let jp = stair.j_prime();

    // Copy count: windows must be narrower than the tightest jump gap
    // (width in x is sqrt(2 delta_h / L), so this is a lower bound), and the
    // grid must clear the reserve plus all windows.
    let mut l = 4usize;
    if let Some(gap) = stair.min_gap() {
        l = l.max(even_ceil(2.0 * delta_t / (0.81 * gap * gap)));
    }
    while n_for(l, delta_t) < 4 * j * l + 2 * RESERVE {
        l += 2;
    }

    let mut attempts = 0;
    let (n, plan) = loop {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(Error::construction(format!(
                "fixed-scale layout found no feasible copy count (reached L = {l})"
            )));
        }
        let n = n_for(l, delta_t);
        if n > opts.width_cap {
            return Err(Error::WidthCap { required: n, cap: opts.width_cap });
        }
        match plan_layout(&stair, k0, jp, l, n) {
            Some(plan) => break (n, plan),
            None => l += ((l / 5) & !1).max(2),
        }
    };

    let d = 1.0 / (n - 1) as f64;
    let delta_e = 8.0 * (l as f64).powi(3) * d * d;
    // Realized levels use delta_e, the decomposition used delta_t; the
    // mismatch scales with the deepest level the staircase visits.
    let mut level = k0;
    let mut max_level = k0.abs();
    for s in &stair.steps {
        level += s.sign as i64;
        max_level = max_level.max(level.abs());
    }
    let drift = max_level as f64 * (delta_t - delta_e);

    let mut sink = ThetaSink::new(n);
    for (step, &ps) in stair.steps.iter().zip(&plan.windows) {
        for copy in 0..l {
            let idx = [ps + copy, ps + l + copy, ps + 2 * l + copy, ps + 3 * l + copy];
            let locs = idx.map(|i| unit_loc(i, n));
            let mut gadget = step_matching(locs)?;
            if step.sign < 0 {
                gadget = gadget.negated();
            }
            sink.assign_quad(idx, &gadget)?;
        }
    }
    for block in &plan.blocks {
        for t in 0..block.width {
            let idx = [
                block.a1 + t,
                block.a1 + block.width + t,
                block.a3 + t,
                block.a3 + block.width + t,
            ];
            let locs = idx.map(|i| unit_loc(i, n));
            sink.assign_quad(idx, &constant_matching(locs, block.sign)?)?;
        }
    }
    for &a in &plan.cancel_chunks {
        for (off, sign) in [(0usize, 1i8), (2, -1)] {
            let idx = [a + off, a + off + 1, a + off + 4, a + off + 5];
            let locs = idx.map(|i| unit_loc(i, n));
            sink.assign_quad(idx, &constant_matching(locs, sign)?)?;
        }
    }
    let mut line_a = 0.0;
    let mut line_b = 0.0;
    let mut pair_signs = Vec::with_capacity(plan.leftover.len() / 2);
    for (t, pair) in plan.leftover.chunks_exact(2).enumerate() {
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        let (bu, bv) = (unit_loc(pair[0], n), unit_loc(pair[1], n));
        sink.assign(pair[0], sign * bu, -(sign * bu))?;
        sink.assign(pair[1], -(sign * bv), sign * bv)?;
        line_a += sign * (bu - bv);
        line_b -= sign * (bu * bu - bv * bv);
        pair_signs.push(if t % 2 == 0 { 1i8 } else { -1 });
    }
    let leftover_sup = line_b.abs().max((line_a + line_b).abs());

    let mut net = ReluNet::paired_1d(&unit_grid(n), (0.0, 1.0))?;
    net.theta = sink.finish()?;
    net.alpha = 0.0;
    net.gamma = 1.0;

    let mut ledger = ConstructionLedger::new("fixed_scale", eps, map);
    ledger.delta_h = delta_e;
    ledger.base_level = stair.base;
    ledger.j_steps = j;
    ledger.j_prime = jp;
    ledger.min_step_gap = stair.min_gap();
    ledger.copies = Some(l);
    ledger.n_locations = n;
    ledger.step_locations = stair.steps.iter().map(|s| s.loc).collect();
    ledger.step_signs = rle_signs(stair.steps.iter().map(|s| s.sign));
    ledger.windows = stair
        .steps
        .iter()
        .zip(&plan.windows)
        .map(|(s, &ps)| IndexWindow { start: ps, stride: 1, count: 4 * l, sign: s.sign })
        .collect();
    ledger.constant_blocks = plan.blocks.clone();
    ledger.cancelled_chunks = plan.cancel_chunks.len();
    ledger.leftover_pairs = plan.leftover.len() / 2;
    ledger.leftover_signs = rle_signs(pair_signs);
    ledger.residual_slope = line_a;
    ledger.shift_constant = plan.t_units as f64 * 2.0 * d * d;
    ledger.gamma = 1.0;
    ledger.alpha = 0.0;
    ledger.budget = {
        let staircase = 0.5 * delta_t + drift + 1e-9;
        let windows = delta_e;
        let numeric_dust = 1e-15 * n as f64;
        ErrorBudget {
            staircase,
            windows,
            leftover: leftover_sup,
            numeric_dust,
            total: staircase + windows + leftover_sup + numeric_dust,
        }
    };

    verify_and_record(&net, &|x| f(x), eps, map, opts.grid_points, &mut ledger)?;
    ledger.build_millis = started.elapsed().as_millis() as u64;
    Ok((net, ledger))
}

/// Grid size realizing a window height at or just under `delta_t` for `l`
/// copies; kept even so the off-chunk tail stays pairable.
fn n_for(l: usize, delta_t: f64) -> usize {
    let nf = (8.0 * (l as f64).powi(3) / delta_t).sqrt().ceil() as usize + 1;
    nf + (nf & 1)
}

fn even_ceil(x: f64) -> usize {
    let c = x.ceil().max(0.0) as usize;
    c + (c & 1)
}

/// A feasible spend of all `n` locations at the given copy count.
struct Plan {
    /// Window start per staircase jump.
    windows: Vec<usize>,
    /// Constant blocks realizing the global offset (wide blocks and
    /// width-one reserve singles).
    blocks: Vec<ConstantBlock>,
    /// Free chunk starts cancelled as `+`/`-` constant quads.
    cancel_chunks: Vec<usize>,
    /// Indices folded into alternating near-zero line pairs (even count).
    leftover: Vec<usize>,
    /// Offset realized by the blocks, in units of twice the squared spacing.
    t_units: i128,
}

fn plan_layout(
    stair: &PiecewiseConstant,
    k0: i64,
    jp: i64,
    l: usize,
    n: usize,
) -> Option<Plan> {
    let tail = n - (n % 8);
    if tail <= RESERVE + 4 * l {
        return None;
    }
    let nchunks = tail / 8;

    // Windows: preferred start centers the reference quad on the jump,
    // rounded to a chunk boundary, clamped clear of the reserve, the
    // previous window, and the tail. Containment of the jump in the
    // reference span is required except when squeezed against a boundary,
    // where transitioning early/late still costs at most one jump height.
    let mut windows = Vec::with_capacity(stair.j());
    let mut prev_end = RESERVE as i64;
    let hi = (tail - 4 * l) as i64;
    for step in &stair.steps {
        let idxf = step.loc * (n - 1) as f64;
        let pref = (((idxf - 1.5 * l as f64) / 8.0).round() as i64) * 8;
        if prev_end > hi {
            return None;
        }
        let ps = pref.clamp(prev_end, hi);
        let contained_lo = unit_loc(ps as usize, n) <= step.loc;
        let contained_hi = step.loc <= unit_loc(ps as usize + 3 * l, n);
        let ok = (contained_lo || (ps as usize == RESERVE && pref < prev_end))
            && (contained_hi || (ps == hi && pref > hi));
        if !ok {
            return None;
        }
        windows.push(ps as usize);
        prev_end = ps + 4 * l as i64;
    }

    let mut free = vec![true; nchunks];
    for c in free.iter_mut().take(RESERVE / 8) {
        *c = false;
    }
    for &ps in &windows {
        for c in ps / 8..(ps + 4 * l) / 8 {
            free[c] = false;
        }
    }

    let t_units = 2 * (l as i128).pow(3) * (2 * k0 + jp) as i128;
    let sign: i8 = if t_units >= 0 { 1 } else { -1 };
    let mut remaining = t_units.unsigned_abs();
    let mut blocks = realize_blocks(&mut free, &mut remaining, sign)?;
    if remaining >= 1024 {
        return None;
    }
    let mut reserve_free = [true; RESERVE];
    blocks.extend(realize_reserve(&mut reserve_free, remaining as i64, sign)?);

    let cancel_chunks: Vec<usize> =
        (0..nchunks).filter(|&c| free[c]).map(|c| 8 * c).collect();
    let mut leftover: Vec<usize> =
        (0..RESERVE).filter(|&i| reserve_free[i]).collect();
    leftover.extend(tail..n);
    debug_assert_eq!(leftover.len() % 2, 0);

    Some(Plan { windows, blocks, cancel_chunks, leftover, t_units })
}

/// Spend free chunks on constant blocks until the remainder fits the
/// reserve. Tier widths descend from the widest run pair the layout offers;
/// within a tier, blocks pair the outermost runs while a full-value block
/// still fits, then chase the exact remainder by searching run pairs at the
/// wanted distance.
fn realize_blocks(
    free: &mut [bool],
    remaining: &mut u128,
    sign: i8,
) -> Option<Vec<ConstantBlock>> {
    let mut blocks = Vec::new();
    if *remaining == 0 {
        return Some(blocks);
    }
    let mut w = widest_tier(free)?;
    loop {
        let min_block = 2 * (w as u128).pow(3);
        while *remaining >= min_block {
            if blocks.len() > MAX_BLOCKS {
                return None;
            }
            let starts = run_starts(free, 2 * w);
            let Some((&a1, &a3_max)) = starts.first().zip(starts.last()) else { break };
            if a3_max < a1 + 2 * w {
                break;
            }
            let full = (w as u128 * w as u128) * (a3_max - a1) as u128;
            let (a1, a3) = if full <= *remaining {
                (a1, a3_max)
            } else {
                let want = (*remaining / (w as u128 * w as u128)) as usize & !7;
                match pair_at_distance(&starts, a1 + 2 * w, want) {
                    Some(pair) => pair,
                    None => break,
                }
            };
            *remaining -= (w as u128 * w as u128) * (a3 - a1) as u128;
            consume(free, a1, 2 * w);
            consume(free, a3, 2 * w);
            blocks.push(ConstantBlock { a1, a3, width: w, sign });
        }
        if w == 8 {
            break;
        }
        w = ((w / 2) & !7).max(8);
    }
    Some(blocks)
}

/// Widest block the current free runs can host: either two runs inside the
/// longest free stretch or one in each of the two longest.
fn widest_tier(free: &[bool]) -> Option<usize> {
    let mut longest = 0usize;
    let mut second = 0usize;
    let mut run = 0usize;
    for (i, &f) in free.iter().enumerate() {
        run = if f { run + 1 } else { 0 };
        if run > longest {
            second = second.max(longest.min(run - 1));
            longest = run;
        } else if run > second {
            second = run;
        }
        let _ = i;
    }
    let w = (2 * longest).max(4 * second) & !7;
    if w >= 8 {
        Some(w)
    } else {
        None
    }
}

/// All chunk-aligned starts of `width`-index free runs, ascending.
fn run_starts(free: &[bool], width: usize) -> Vec<usize> {
    let chunks = width / 8;
    let mut starts = Vec::new();
    let mut run = 0usize;
    for (c, &f) in free.iter().enumerate() {
        run = if f { run + 1 } else { 0 };
        if run >= chunks {
            starts.push(8 * (c + 1 - chunks));
        }
    }
    starts
}

/// Find run starts `a1 < a3 = a1 + distance` for the largest distance at or
/// under `want`; probes a bounded number of distances before giving up.
fn pair_at_distance(starts: &[usize], min_a3: usize, want: usize) -> Option<(usize, usize)> {
    if starts.len() < 2 || want < min_a3 - starts[0] {
        let lowest = min_a3 - starts[0];
        if want < lowest {
            return None;
        }
    }
    let set: std::collections::HashSet<usize> = starts.iter().copied().collect();
    let mut dist = want;
    for _ in 0..64 {
        if dist < 8 {
            return None;
        }
        for &a1 in starts {
            if a1 + dist >= min_a3.max(a1 + 8) && set.contains(&(a1 + dist)) {
                let a3 = a1 + dist;
                if a3 >= min_a3 || a3 >= a1 + (min_a3 - starts[0]) {
                    return Some((a1, a3));
                }
            }
        }
        dist -= 8;
    }
    None
}

fn consume(free: &mut [bool], start: usize, width: usize) {
    for c in start / 8..(start + width) / 8 {
        free[c] = false;
    }
}

/// Finish a remainder under 1024 units with width-one singles in the
/// reserve: `{i, i+1, i+j, i+j+1}` is worth `j` units, and a final unit is
/// a `+3` single against a `-2` single.
fn realize_reserve(
    reserve_free: &mut [bool; RESERVE],
    mut remaining: i64,
    sign: i8,
) -> Option<Vec<ConstantBlock>> {
    let mut singles = Vec::new();
    while remaining > 0 {
        if remaining == 1 {
            let i = place_single(reserve_free, 3)?;
            singles.push(ConstantBlock { a1: i, a3: i + 3, width: 1, sign });
            let i = place_single(reserve_free, 2)?;
            singles.push(ConstantBlock { a1: i, a3: i + 2, width: 1, sign: -sign });
            remaining = 0;
            continue;
        }
        let cap = remaining.min(126) as usize;
        let j = (2..=cap)
            .rev()
            .filter(|&j| j as i64 != remaining - 1)
            .find(|&j| probe_single(reserve_free, j).is_some())?;
        let i = place_single(reserve_free, j)?;
        singles.push(ConstantBlock { a1: i, a3: i + j, width: 1, sign });
        remaining -= j as i64;
    }
    Some(singles)
}

fn probe_single(reserve_free: &[bool; RESERVE], j: usize) -> Option<usize> {
    (0..RESERVE.checked_sub(j + 2)? + 1).find(|&i| {
        reserve_free[i] && reserve_free[i + 1] && reserve_free[i + j] && reserve_free[i + j + 1]
    })
}

fn place_single(reserve_free: &mut [bool; RESERVE], j: usize) -> Option<usize> {
    let i = probe_single(reserve_free, j)?;
    for k in [i, i + 1, i + j, i + j + 1] {
        reserve_free[k] = false;
    }
    Some(i)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = std::f64::consts::TAU;

    #[test]
    fn sine_holds_exact_scale_and_offset() {
        let (net, ledger) =
            build_theorem2(|x| (TAU * x).sin(), 0.5, &BuildOptions::default()).unwrap();
        assert_eq!(net.alpha, 0.0);
        assert_eq!(net.gamma, 1.0);
        assert!(net.multiset_intact());
        assert!(ledger.realized_sup <= 0.5, "sup {}", ledger.realized_sup);
        assert_eq!(ledger.j_steps, 24);
        assert_eq!(ledger.j_prime, 0);
        // Zero start level and balanced jumps need no offset blocks at all.
        assert!(ledger.constant_blocks.is_empty());
        assert_eq!(ledger.shift_constant, 0.0);
        let l = ledger.copies.unwrap();
        assert!((400..=800).contains(&l), "copies {l}");
        assert!((60_000..=160_000).contains(&ledger.n_locations));
    }

    #[test]
    fn ramp_realizes_its_offset_through_blocks() {
        let (net, ledger) = build_theorem2(|x| x, 0.4, &BuildOptions::default()).unwrap();
        assert_eq!(net.alpha, 0.0);
        assert_eq!(net.gamma, 1.0);
        assert!(net.multiset_intact());
        assert!(ledger.realized_sup <= 0.4, "sup {}", ledger.realized_sup);
        assert!((7..=8).contains(&ledger.j_steps));
        assert_eq!(ledger.j_prime, ledger.j_steps as i64);
        assert!(!ledger.constant_blocks.is_empty());
        assert!(ledger.shift_constant > 0.0);
        // Block accounting is exact: value recomputed from the ledger.
        let units: i128 = ledger
            .constant_blocks
            .iter()
            .map(|b| {
                b.sign as i128 * (b.width * b.width) as i128 * (b.a3 - b.a1) as i128
            })
            .sum();
        let l = ledger.copies.unwrap() as i128;
        assert_eq!(units, 2 * l.pow(3) * ledger.j_prime as i128);
    }

    #[test]
    fn constant_targets_become_pure_shifts() {
        let (net, ledger) =
            build_theorem2(|_| 0.5, 0.3, &BuildOptions::default()).unwrap();
        assert!(ledger.windows.is_empty());
        assert!(!ledger.constant_blocks.is_empty());
        // The resting level hits 0.5 exactly, so the only deviation left is
        // the slightly-under jump height and dust.
        assert!(ledger.realized_sup < 0.02, "sup {}", ledger.realized_sup);
        assert!(net.multiset_intact());

        let (net2, ledger2) =
            build_theorem2(|_| -0.4, 0.3, &BuildOptions::default()).unwrap();
        assert!(ledger2.shift_constant < 0.0);
        assert!(ledger2.realized_sup < 0.02);
        assert!(net2.multiset_intact());
    }

    #[test]
    fn zero_target_spends_everything_on_cancellation() {
        let (net, ledger) = build_theorem2(|_| 0.0, 0.3, &BuildOptions::default()).unwrap();
        assert!(ledger.constant_blocks.is_empty());
        assert!(ledger.cancelled_chunks > 0);
        // Only the alternating leftover lines remain; their intercept
        // residual is a few hundred squared spacings.
        assert!(ledger.realized_sup < 0.01, "sup {}", ledger.realized_sup);
        assert!(ledger.realized_sup <= ledger.budget.total);
        assert!(net.multiset_intact());
    }

    #[test]
    fn mapped_domain_keeps_the_guarantee() {
        let opts = BuildOptions { domain: (-2.0, 2.0), ..BuildOptions::default() };
        let (net, ledger) =
            build_theorem2(|x| 0.25 * x + 0.1, 0.45, &opts).unwrap();
        assert_eq!(net.alpha, 0.0);
        assert_eq!(net.gamma, 1.0);
        assert!(ledger.realized_sup <= 0.45);
        assert!(!ledger.domain.is_identity());
    }

    #[test]
    fn width_cap_is_honored() {
        let opts = BuildOptions { width_cap: 2_000, ..BuildOptions::default() };
        let err = build_theorem2(|x| (TAU * x).sin(), 0.5, &opts).unwrap_err();
        match err {
            Error::WidthCap { required, cap } => {
                assert!(required > cap);
                assert_eq!(cap, 2_000);
            }
            other => panic!("expected width cap error, got {other}"),
        }
    }

    #[test]
    fn reserve_singles_finish_any_small_remainder() {
        for r in [1i64, 2, 3, 125, 126, 127, 128, 511, 512, 1023] {
            let mut reserve_free = [true; RESERVE];
            let singles = realize_reserve(&mut reserve_free, r, 1)
                .unwrap_or_else(|| panic!("remainder {r} unplaceable"));
            let sum: i64 = singles
                .iter()
                .map(|b| b.sign as i64 * (b.a3 - b.a1) as i64)
                .sum();
            assert_eq!(sum, r, "remainder {r}");
            // Pattern indices stay inside the reserve and never collide.
            let mut seen = [false; RESERVE];
            for b in &singles {
                for i in [b.a1, b.a1 + 1, b.a3, b.a3 + 1] {
                    assert!(i < RESERVE);
                    assert!(!seen[i], "slot {i} reused for remainder {r}");
                    seen[i] = true;
                }
            }
        }
    }

    #[test]
    fn tail_and_reserve_leftovers_pair_evenly() {
        let (_, ledger) = build_theorem2(|x| x, 0.4, &BuildOptions::default()).unwrap();
        // Residual lines were actually folded and bounded.
        assert!(ledger.budget.leftover < 0.05);
        assert!(ledger.budget.total < 0.4);
    }
}
