//! Initialization strategies: how offsets and output weights get their
//! starting values.
//!
//! Every strategy fills the same mirrored-pair layout (see
//! [`super::basis::plan_equidistant`]); they differ in whether offsets are
//! equidistant or drawn at random, and in whether output weights copy the
//! offsets, are drawn as mirrored `(+p, -p)` pairs, or are drawn freely. Draw
//! order is fixed — all offsets first, then all weights — so two strategies
//! sharing a rule consume identical random values for that rule.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::basis::plan_equidistant;
use super::targets::TargetFunction;
use crate::error::{Error, Result};
use crate::net::{Activation, ReluNet};

/// How a network's offsets (`B`) and output weights (`W`) are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InitStrategy {
    /// Equidistant offsets, weights `(+b, -b)` copying each offset.
    #[serde(rename = "equidistant")]
    Equidistant,
    /// Uniform offsets over the same range, weights as mirrored uniform
    /// `(+p, -p)` pairs.
    #[serde(rename = "pairwise_random")]
    PairwiseRandom,
    /// Uniform offsets, weights drawn freely from `[-1, 1]` with no pairing.
    #[serde(rename = "total_random")]
    TotalRandom,
    /// Uniform offsets, weights still copying them as `(+b, -b)`.
    #[serde(rename = "B_only_random")]
    BOnlyRandom,
    /// Equidistant offsets, weights as mirrored uniform pairs.
    #[serde(rename = "W_only_random")]
    WOnlyRandom,
    /// Offsets and weights all uniform in `[-a, a]` with
    /// `a = sqrt(6 / (1 + 2n))` (fan-in 1, fan-out `2n`).
    #[serde(rename = "xavier_uniform_all")]
    XavierUniformAll,
    /// Offsets and weights all normal with variance `2 / (2n)`.
    #[serde(rename = "he_normal_all")]
    HeNormalAll,
    /// Uniform offsets over the span, weights uniform in the Xavier range.
    #[serde(rename = "xavier_W_only")]
    XavierWOnly,
    /// Uniform offsets over the span, normal weights with variance
    /// `2 / (2n)`.
    #[serde(rename = "he_W_only")]
    HeWOnly,
}

/// Every strategy, in a stable order.
pub const ALL_STRATEGIES: [InitStrategy; 9] = [
    InitStrategy::Equidistant,
    InitStrategy::PairwiseRandom,
    InitStrategy::TotalRandom,
    InitStrategy::BOnlyRandom,
    InitStrategy::WOnlyRandom,
    InitStrategy::XavierUniformAll,
    InitStrategy::HeNormalAll,
    InitStrategy::XavierWOnly,
    InitStrategy::HeWOnly,
];

impl InitStrategy {
    /// Stable name used in configs, CSV rows, and the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            InitStrategy::Equidistant => "equidistant",
            InitStrategy::PairwiseRandom => "pairwise_random",
            InitStrategy::TotalRandom => "total_random",
            InitStrategy::BOnlyRandom => "B_only_random",
            InitStrategy::WOnlyRandom => "W_only_random",
            InitStrategy::XavierUniformAll => "xavier_uniform_all",
            InitStrategy::HeNormalAll => "he_normal_all",
            InitStrategy::XavierWOnly => "xavier_W_only",
            InitStrategy::HeWOnly => "he_W_only",
        }
    }

    /// Strategies that keep their offsets equidistant. The scaled `W`-only
    /// variants do not: they hold uniform offsets over the span and apply the
    /// named initializer to the weights alone.
    pub fn keeps_equidistant_offsets(self) -> bool {
        matches!(self, InitStrategy::Equidistant | InitStrategy::WOnlyRandom)
    }

    /// Strategies defined for inputs of any supported dimension; the rest are
    /// one-dimensional only.
    pub fn supports_dim(self, dim: usize) -> bool {
        dim == 1 || matches!(self, InitStrategy::Equidistant | InitStrategy::PairwiseRandom)
    }
}

impl std::fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<InitStrategy> {
        ALL_STRATEGIES
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ALL_STRATEGIES.iter().map(|k| k.as_str()).collect();
                Error::validation(format!(
                    "unknown initialization strategy {s:?}; valid strategies: {}",
                    names.join(", ")
                ))
            })
    }
}

fn xavier_bound(n: usize) -> f64 {
    (6.0 / (1.0 + 2.0 * n as f64)).sqrt()
}

fn he_sigma(n: usize) -> f64 {
    (2.0 / (2.0 * n as f64)).sqrt()
}

/// Draw the offsets for one direction group over `span`, honoring the
/// strategy's offset rule.
fn draw_offsets<R: Rng>(
    strategy: InitStrategy,
    n: usize,
    span: (f64, f64),
    equidistant: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    match strategy {
        InitStrategy::Equidistant | InitStrategy::WOnlyRandom => Ok(equidistant.to_vec()),
        InitStrategy::PairwiseRandom
        | InitStrategy::TotalRandom
        | InitStrategy::BOnlyRandom
        | InitStrategy::XavierWOnly
        | InitStrategy::HeWOnly => {
            Ok((0..n).map(|_| rng.random_range(span.0..span.1)).collect())
        }
        InitStrategy::XavierUniformAll => {
            let a = xavier_bound(n);
            Ok((0..n).map(|_| rng.random_range(-a..a)).collect())
        }
        InitStrategy::HeNormalAll => {
            let normal = Normal::new(0.0, he_sigma(n))
                .map_err(|e| Error::validation(format!("init: bad normal parameters: {e}")))?;
            Ok((0..n).map(|_| normal.sample(rng)).collect())
        }
    }
}

/// Draw the `2 * pairs` output weights, honoring the strategy's weight rule.
/// `offsets` lists the offset of each pair in slot order.
fn draw_weights<R: Rng>(
    strategy: InitStrategy,
    n: usize,
    offsets: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let pairs = offsets.len();
    let mut w = Vec::with_capacity(2 * pairs);
    match strategy {
        InitStrategy::Equidistant | InitStrategy::BOnlyRandom => {
            for &b in offsets {
                w.push(b);
                w.push(-b);
            }
        }
        InitStrategy::PairwiseRandom | InitStrategy::WOnlyRandom => {
            for _ in 0..pairs {
                let p: f64 = rng.random_range(0.0..1.0);
                w.push(p);
                w.push(-p);
            }
        }
        InitStrategy::TotalRandom => {
            for _ in 0..2 * pairs {
                w.push(rng.random_range(-1.0..1.0));
            }
        }
        InitStrategy::XavierUniformAll | InitStrategy::XavierWOnly => {
            let a = xavier_bound(n);
            for _ in 0..2 * pairs {
                w.push(rng.random_range(-a..a));
            }
        }
        InitStrategy::HeNormalAll | InitStrategy::HeWOnly => {
            let normal = Normal::new(0.0, he_sigma(n))
                .map_err(|e| Error::validation(format!("init: bad normal parameters: {e}")))?;
            for _ in 0..2 * pairs {
                w.push(normal.sample(rng));
            }
        }
    }
    Ok(w)
}

/// Initialize a one-dimensional layer of `n` pairs on the unit interval:
/// returns the offsets `B` and the `2n` output weights `W` in slot order.
/// With the equidistant strategy and `n = 3` this yields
/// `B = (0, 0.5, 1)` and `W = (0, -0, 0.5, -0.5, 1, -1)`, negative zero
/// included.
pub fn initialize<R: Rng>(
    strategy: InitStrategy,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::validation("init: need at least two pairs"));
    }
    let equidistant: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let b = draw_offsets(strategy, n, (0.0, 1.0), &equidistant, rng)?;
    let w = draw_weights(strategy, n, &b, rng)?;
    Ok((b, w))
}

/// Build a network for `target` with `n` offsets per direction pair, the
/// given offset-widening margin, and the strategy's draw rules under the
/// given seed.
pub fn build_net(
    strategy: InitStrategy,
    target: &TargetFunction,
    n: usize,
    margin: f64,
    seed: u64,
) -> Result<ReluNet> {
    if !strategy.supports_dim(target.dim) {
        let supported: Vec<&str> = ALL_STRATEGIES
            .iter()
            .filter(|k| k.supports_dim(target.dim))
            .map(|k| k.as_str())
            .collect();
        return Err(Error::validation(format!(
            "strategy {strategy} is one-dimensional only; strategies for dimension {}: {}",
            target.dim,
            supported.join(", ")
        )));
    }
    let plan = plan_equidistant(target.dim, n, margin, target.domain)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // All offsets first (group by group), then all weights, so the weight
    // stream is unaffected by how many offsets were random.
    let groups = plan.spans.len();
    let mut offsets = Vec::with_capacity(groups * n);
    for (g, &span) in plan.spans.iter().enumerate() {
        let equidistant = &plan.pair_locs[g * n..(g + 1) * n];
        offsets.extend(draw_offsets(strategy, n, span, equidistant, &mut rng)?);
    }
    let weights = draw_weights(strategy, n, &offsets, &mut rng)?;

    let mut basis = Vec::with_capacity(2 * offsets.len());
    for g in 0..groups {
        for k in 0..n {
            let b = offsets[g * n + k];
            basis.push(crate::net::Basis { dir: (2 * g) as u16, loc: b });
            basis.push(crate::net::Basis { dir: (2 * g + 1) as u16, loc: -b });
        }
    }

    Ok(ReluNet {
        dim: target.dim,
        domain: target.domain.to_vec(),
        activation: Activation::Relu,
        directions: plan.directions,
        basis,
        theta: weights.clone(),
        alpha: 0.0,
        gamma: 1.0,
        initial_multiset: weights,
    })
}
