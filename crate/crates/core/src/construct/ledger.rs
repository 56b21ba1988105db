//! Bookkeeping emitted alongside every constructed network.
//!
//! A construction run records exactly how the paired weights were spent —
//! which index windows realize staircase jumps, which blocks realize
//! constants, how leftovers were cancelled — plus the error budget it
//! guarantees and the deviation it actually realized on the verification
//! grid. The ledger serializes to JSON next to the network file.

use serde::Serialize;

/// Affine map between an original interval and the unit interval the
/// construction works on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainMap {
    pub lo: f64,
    pub hi: f64,
}

impl DomainMap {
    pub fn new(lo: f64, hi: f64) -> DomainMap {
        DomainMap { lo, hi }
    }

    /// Original coordinate to unit coordinate.
    #[inline]
    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.lo) / (self.hi - self.lo)
    }

    /// Unit coordinate back to the original interval.
    #[inline]
    pub fn from_unit(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }

    /// True for the identity map on `[0, 1]`.
    pub fn is_identity(&self) -> bool {
        self.lo == 0.0 && self.hi == 1.0
    }
}

/// A window of location indices `start, start + stride, ...` (`count` of
/// them) consumed by one staircase jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexWindow {
    pub start: usize,
    pub stride: usize,
    pub count: usize,
    /// Jump direction this window realizes.
    pub sign: i8,
}

/// A constant-valued block: `width` four-tuples with starts
/// `a1 + t, a1 + width + t, a3 + t, a3 + width + t` for `t < width`
/// (`width == 1` lists the four indices directly via `a1, a1+1, a3, a3+1`
/// semantics only when `gap` is used; see the builder). Realizes the value
/// `sign * width^2 * (a3 - a1)` in units of twice the squared grid spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantBlock {
    pub a1: usize,
    pub a3: usize,
    pub width: usize,
    pub sign: i8,
}

/// Guaranteed error budget, all terms in the target's own scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct ErrorBudget {
    /// Staircase-versus-target bound.
    pub staircase: f64,
    /// Worst in-window deviation of the realized jumps.
    pub windows: f64,
    /// Leftover-cancellation bound (after constant compensation).
    pub leftover: f64,
    /// Float dust from summing many realized constants.
    pub numeric_dust: f64,
    /// Sum of the above; the construction promises at most this.
    pub total: f64,
}

/// Full record of one construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionLedger {
    /// Which builder produced this ("equidistant", "fixed_scale",
    /// "random_init").
    pub kind: String,
    /// Requested accuracy.
    pub eps: f64,
    /// Realized staircase jump height.
    pub delta_h: f64,
    /// Staircase resting level.
    pub base_level: f64,
    /// Jump count.
    pub j_steps: usize,
    /// Net signed jump count.
    pub j_prime: i64,
    /// Smallest gap between jump locations (absent below two jumps).
    pub min_step_gap: Option<f64>,
    /// Coarse location count before refinement (absent where not used).
    pub coarse_width: Option<usize>,
    /// Per-jump copy count (absent where not used).
    pub copies: Option<usize>,
    /// Final location count; the network has twice as many basis functions.
    pub n_locations: usize,
    /// Output scale written into the network.
    pub gamma: f64,
    /// Output offset written into the network.
    pub alpha: f64,
    /// Original approximation interval; locations live on the unit interval
    /// through the affine map.
    pub domain: DomainMap,
    /// Jump locations in unit coordinates.
    pub step_locations: Vec<f64>,
    /// Jump signs, run-length encoded (e.g. "+16-32+16").
    pub step_signs: String,
    /// Index windows realizing the jumps, aligned with `step_locations`.
    pub windows: Vec<IndexWindow>,
    /// Constant blocks realizing the global offset (fixed-scale builder).
    pub constant_blocks: Vec<ConstantBlock>,
    /// Free 8-index chunks cancelled as paired +/- constants.
    pub cancelled_chunks: usize,
    /// Count of leftover pairs folded into near-zero lines.
    pub leftover_pairs: usize,
    /// Signs chosen for the leftover pairs, run-length encoded.
    pub leftover_signs: String,
    /// Summed slope of the leftover lines.
    pub residual_slope: f64,
    /// Constant compensating the leftover intercepts (scaled into `alpha`
    /// where the builder has one).
    pub shift_constant: f64,
    /// Retired pair (input index, weight value) when leftovers were odd.
    pub retired: Option<(usize, f64)>,
    /// Guaranteed budget.
    pub budget: ErrorBudget,
    /// Largest deviation measured on the verification grid.
    pub realized_sup: f64,
    /// L2 deviation measured on the verification grid.
    pub realized_l2: f64,
    /// Whether the final weights are a bit-exact rearrangement of the paired
    /// initialization (always true on success; recorded for audit).
    pub multiset_ok: bool,
    /// Wall-clock build time.
    pub build_millis: u64,
    /// Randomized builder only: matching radius.
    pub match_radius: Option<f64>,
    /// Randomized builder only: probed sensitivity of the template.
    pub probe_sensitivity: Option<f64>,
    /// Randomized builder only: modeled per-seed success probability.
    pub success_probability: Option<f64>,
    /// Randomized builder only: seed used.
    pub seed: Option<u64>,
}

impl ConstructionLedger {
    /// Empty ledger for the given builder kind; builders fill it in.
    pub fn new(kind: &str, eps: f64, domain: DomainMap) -> ConstructionLedger {
        ConstructionLedger {
            kind: kind.to_string(),
            eps,
            delta_h: 0.0,
            base_level: 0.0,
            j_steps: 0,
            j_prime: 0,
            min_step_gap: None,
            coarse_width: None,
            copies: None,
            n_locations: 0,
            gamma: 1.0,
            alpha: 0.0,
            domain,
            step_locations: Vec::new(),
            step_signs: String::new(),
            windows: Vec::new(),
            constant_blocks: Vec::new(),
            cancelled_chunks: 0,
            leftover_pairs: 0,
            leftover_signs: String::new(),
            residual_slope: 0.0,
            shift_constant: 0.0,
            retired: None,
            budget: ErrorBudget::default(),
            realized_sup: 0.0,
            realized_l2: 0.0,
            multiset_ok: false,
            build_millis: 0,
            match_radius: None,
            probe_sensitivity: None,
            success_probability: None,
            seed: None,
        }
    }
}

/// Run-length encode a sign sequence: `[1, 1, -1, -1, -1, 1]` becomes
/// "+2-3+1".
pub fn rle_signs(signs: impl IntoIterator<Item = i8>) -> String {
    let mut out = String::new();
    let mut current: Option<(i8, usize)> = None;
    for s in signs {
        match current {
            Some((c, count)) if c == s => current = Some((c, count + 1)),
            Some((c, count)) => {
                push_run(&mut out, c, count);
                current = Some((s, 1));
            }
            None => current = Some((s, 1)),
        }
    }
    if let Some((c, count)) = current {
        push_run(&mut out, c, count);
    }
    out
}

fn push_run(out: &mut String, sign: i8, count: usize) {
    out.push(if sign >= 0 { '+' } else { '-' });
    out.push_str(&count.to_string());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_map_round_trips() {
        let m = DomainMap::new(-1.0, 3.0);
        assert_eq!(m.to_unit(-1.0), 0.0);
        assert_eq!(m.to_unit(3.0), 1.0);
        assert!((m.from_unit(m.to_unit(0.7)) - 0.7).abs() < 1e-15);
        assert!(DomainMap::new(0.0, 1.0).is_identity());
        assert!(!m.is_identity());
    }

    #[test]
    fn sign_runs_encode_compactly() {
        assert_eq!(rle_signs([1, 1, -1, -1, -1, 1]), "+2-3+1");
        assert_eq!(rle_signs([]), "");
        assert_eq!(rle_signs([-1]), "-1");
        assert_eq!(rle_signs(std::iter::repeat(1i8).take(16)), "+16");
    }
}
