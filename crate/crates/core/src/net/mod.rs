//! Shallow ReLU network with a frozen first layer and trainable output weights.
//!
//! A network computes `f(x) = alpha + gamma * sum_i theta[i] * act(d_i . x - c_i)`
//! where each basis function is a ridge `act(d . x - c)` with a direction `d`
//! drawn from a small per-network table of integer vectors and a scalar offset
//! `c`. Directions and offsets are fixed at initialization; training moves only
//! `theta` (and optionally `alpha`, `gamma`). The initial output-weight values
//! are kept as a reference multiset so that permutation training can verify at
//! any time that `theta` is still a rearrangement of them.
//!
//! One-dimensional networks built from paired basis functions
//! (`act(x - b), act(-(x - b))` per location `b`) get a sorted prefix-sum fast
//! path for grid evaluation; everything else evaluates naively. The naive path
//! is used below [`FAST_EVAL_MIN_BASIS`] so small-network grid evaluation is
//! bitwise identical to [`ReluNet::forward`].

pub mod serialize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Basis-function nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    /// `max(z, 0)`.
    Relu,
    /// `z` for positive inputs, `slope * z` otherwise.
    LeakyRelu { slope: f64 },
}

impl Activation {
    /// Activation value at `z`.
    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
        }
    }

    /// Derivative at `z`. At the kink (`z == 0`) this returns 0 for ReLU and
    /// the leaky slope for leaky ReLU (the limit from below in both cases).
    #[inline]
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }

    /// Slope on the negative side: 0 for ReLU, `slope` for leaky.
    #[inline]
    pub fn negative_slope(self) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::LeakyRelu { slope } => slope,
        }
    }
}

/// One ridge basis function: `act(d . x - loc)` where `d` is row `dir` of the
/// owning network's direction table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    /// Index into [`ReluNet::directions`].
    pub dir: u16,
    /// Scalar offset subtracted from the directional projection.
    pub loc: f64,
}

/// Direction-table index of `act(x - b)` in one-dimensional paired layouts.
pub const DIR_PLUS: u16 = 0;
/// Direction-table index of `act(-x - c)` in one-dimensional paired layouts.
pub const DIR_MINUS: u16 = 1;

/// Grid evaluation switches from the naive per-point loop to the sorted
/// prefix-sum path once a 1-D network has at least this many basis functions.
pub const FAST_EVAL_MIN_BASIS: usize = 4097;

/// Shallow network with frozen basis functions and trainable output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNet {
    /// Input dimension.
    pub dim: usize,
    /// Axis-aligned box the network is meant to approximate on; one
    /// `(lo, hi)` pair per input coordinate.
    pub domain: Vec<(f64, f64)>,
    /// Shared nonlinearity for every basis function.
    pub activation: Activation,
    /// Direction table; entries are short integer vectors of length `dim`
    /// with components in `{-1, 0, 1}`.
    pub directions: Vec<Vec<i8>>,
    /// Basis functions, indexed in lockstep with `theta`.
    pub basis: Vec<Basis>,
    /// Trainable output weights, one per basis function.
    pub theta: Vec<f64>,
    /// Output offset.
    pub alpha: f64,
    /// Output scale.
    pub gamma: f64,
    /// The output weights at initialization. Permutation training keeps
    /// `theta` a rearrangement of exactly these values.
    pub initial_multiset: Vec<f64>,
}

/// Gradients of the mean-squared error with respect to the trainable
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
}

impl Gradients {
    /// All-zero gradient buffer for a network with `n_basis` basis functions.
    pub fn zeros(n_basis: usize) -> Self {
        Gradients { theta: vec![0.0; n_basis], alpha: 0.0, gamma: 0.0 }
    }
}

impl ReluNet {
    /// Build a 1-D network from paired basis functions: location `b` yields
    /// `act(x - b)` at even index `2k` and `act(-(x - b))` at odd index
    /// `2k + 1`, with output weights `(+b, -b)` per pair. `theta` starts as a
    /// copy of those weights, `alpha = 0`, `gamma = 1`.
    ///
    /// For `b == 0.0` the odd-slot weight is the IEEE negative zero, which the
    /// multiset bookkeeping preserves bit-for-bit.
    pub fn paired_1d(locs: &[f64], domain: (f64, f64)) -> Result<ReluNet> {
        if locs.is_empty() {
            return Err(Error::validation("paired_1d: need at least one location"));
        }
        if locs.iter().any(|b| !b.is_finite()) {
            return Err(Error::validation("paired_1d: locations must be finite"));
        }
        if !(domain.0 < domain.1) {
            return Err(Error::validation(format!(
                "paired_1d: empty domain [{}, {}]",
                domain.0, domain.1
            )));
        }
        let mut basis = Vec::with_capacity(2 * locs.len());
        let mut weights = Vec::with_capacity(2 * locs.len());
        for &b in locs {
            basis.push(Basis { dir: DIR_PLUS, loc: b });
            basis.push(Basis { dir: DIR_MINUS, loc: -b });
            weights.push(b);
            weights.push(-b);
        }
        Ok(ReluNet {
            dim: 1,
            domain: vec![domain],
            activation: Activation::Relu,
            directions: vec![vec![1], vec![-1]],
            basis,
            theta: weights.clone(),
            alpha: 0.0,
            gamma: 1.0,
            initial_multiset: weights,
        })
    }

    /// Number of basis functions (and output weights).
    #[inline]
    pub fn width(&self) -> usize {
        self.basis.len()
    }

    /// Argument `d . x - loc` of basis function `i` at input `x`.
    #[inline]
    pub fn basis_arg(&self, i: usize, x: &[f64]) -> f64 {
        let b = &self.basis[i];
        let d = &self.directions[b.dir as usize];
        let mut dot = 0.0;
        for (di, xi) in d.iter().zip(x) {
            match di {
                1 => dot += xi,
                -1 => dot -= xi,
                _ => {}
            }
        }
        dot - b.loc
    }

    /// Value of basis function `i` at input `x`.
    #[inline]
    pub fn basis_value(&self, i: usize, x: &[f64]) -> f64 {
        self.activation.value(self.basis_arg(i, x))
    }

    /// Network output at a single input point.
    pub fn forward(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "forward: input has wrong dimension");
        let mut sum = 0.0;
        for i in 0..self.basis.len() {
            sum += self.theta[i] * self.basis_value(i, x);
        }
        self.alpha + self.gamma * sum
    }

    /// Convenience wrapper for 1-D networks.
    #[inline]
    pub fn forward_1d(&self, x: f64) -> f64 {
        self.forward(std::slice::from_ref(&x))
    }

    /// Mean-squared error over a flat batch (`xs.len() == ys.len() * dim`).
    pub fn mse(&self, xs: &[f64], ys: &[f64]) -> f64 {
        assert_eq!(xs.len(), ys.len() * self.dim, "mse: batch shape mismatch");
        if ys.is_empty() {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut comp = 0.0;
        for (x, &y) in xs.chunks_exact(self.dim).zip(ys) {
            let r = self.forward(x) - y;
            let term = r * r;
            let t = acc + term;
            comp += if acc.abs() >= term.abs() { (acc - t) + term } else { (term - t) + acc };
            acc = t;
        }
        (acc + comp) / ys.len() as f64
    }

    /// Gradients of the batch mean-squared error with respect to `theta`,
    /// `alpha`, and `gamma`, written into `out`. Basis arguments exactly at a
    /// kink contribute through the activation value only; offsets and
    /// directions are frozen, so no activation derivative enters here.
    pub fn gradients_into(&self, xs: &[f64], ys: &[f64], out: &mut Gradients) {
        assert_eq!(xs.len(), ys.len() * self.dim, "gradients: batch shape mismatch");
        assert_eq!(out.theta.len(), self.basis.len(), "gradients: buffer size mismatch");
        out.theta.fill(0.0);
        out.alpha = 0.0;
        out.gamma = 0.0;
        if ys.is_empty() {
            return;
        }
        let scale = 2.0 / ys.len() as f64;
        let mut phi = vec![0.0; self.basis.len()];
        for (x, &y) in xs.chunks_exact(self.dim).zip(ys) {
            let mut s = 0.0;
            for i in 0..self.basis.len() {
                let v = self.basis_value(i, x);
                phi[i] = v;
                s += self.theta[i] * v;
            }
            let r = (self.alpha + self.gamma * s) - y;
            let w = scale * r;
            for i in 0..self.basis.len() {
                out.theta[i] += w * self.gamma * phi[i];
            }
            out.alpha += w;
            out.gamma += w * s;
        }
    }

    /// Allocating wrapper around [`ReluNet::gradients_into`].
    pub fn gradients(&self, xs: &[f64], ys: &[f64]) -> Gradients {
        let mut out = Gradients::zeros(self.basis.len());
        self.gradients_into(xs, ys, &mut out);
        out
    }

    /// Evaluate at many points of arbitrary dimension (`xs` flat, row-major).
    pub fn eval_points(&self, xs: &[f64]) -> Vec<f64> {
        assert_eq!(xs.len() % self.dim, 0, "eval_points: flat length not a multiple of dim");
        xs.chunks_exact(self.dim).map(|x| self.forward(x)).collect()
    }

    /// Evaluate a 1-D network at each point of `points`.
    ///
    /// Below [`FAST_EVAL_MIN_BASIS`] basis functions this is a per-point loop,
    /// bitwise identical to [`ReluNet::forward`]. At or above it, and when the
    /// direction table is the standard paired `[+1], [-1]`, evaluation uses
    /// sorted prefix sums with Kahan compensation; results then agree with the
    /// naive loop to roughly 1e-12 relative error rather than exactly.
    pub fn eval_grid(&self, points: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, 1, "eval_grid: 1-D networks only");
        if self.basis.len() < FAST_EVAL_MIN_BASIS || !self.has_paired_directions() {
            return points.iter().map(|&x| self.forward_1d(x)).collect();
        }
        let prefix = Prefix1d::build(self);
        points.iter().map(|&x| prefix.eval(x)).collect()
    }

    /// True when the direction table is exactly `[[1], [-1]]`.
    fn has_paired_directions(&self) -> bool {
        self.dim == 1
            && self.directions.len() == 2
            && self.directions[0] == [1]
            && self.directions[1] == [-1]
    }

    /// Kink hyperplane positions of a 1-D network: the input `x` where each
    /// basis argument crosses zero.
    pub fn kinks_1d(&self) -> Vec<f64> {
        assert_eq!(self.dim, 1, "kinks_1d: 1-D networks only");
        self.basis
            .iter()
            .map(|b| {
                let d = self.directions[b.dir as usize][0];
                b.loc / d as f64
            })
            .collect()
    }

    /// True while `theta` is a rearrangement of the initial output weights,
    /// compared bit-for-bit after sorting (so `-0.0` and `0.0` are distinct).
    pub fn multiset_intact(&self) -> bool {
        same_multiset(&self.theta, &self.initial_multiset)
    }
}

/// Compare two slices as multisets of f64 bit patterns. Sorting uses total
/// order, so `-0.0 < 0.0` and NaN payloads participate; two slices match only
/// if they hold exactly the same values with the same multiplicities.
pub fn same_multiset(a: &[f64], b: &[f64]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut sa: Vec<f64> = a.to_vec();
    let mut sb: Vec<f64> = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    sa.iter().zip(&sb).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Sorted prefix-sum evaluator for 1-D paired networks. Splits the activation
/// into a global linear part (the leaky slope times the raw argument) plus a
/// pure ReLU part; the ReLU part of each direction group reduces to two
/// prefix sums over offsets sorted ascending.
struct Prefix1d {
    alpha: f64,
    gamma: f64,
    neg_slope: f64,
    /// Coefficients of the global linear part: `sum theta*d` and `sum theta*loc`.
    lin_a: f64,
    lin_b: f64,
    /// Per direction sign (+1 frame then -1 frame): sorted offsets, prefix
    /// sums of theta and of theta*offset.
    groups: [PrefixGroup; 2],
}

struct PrefixGroup {
    locs: Vec<f64>,
    sum_theta: Vec<f64>,
    sum_theta_loc: Vec<f64>,
}

impl PrefixGroup {
    fn build(mut pairs: Vec<(f64, f64)>) -> PrefixGroup {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut locs = Vec::with_capacity(pairs.len());
        let mut sum_theta = Vec::with_capacity(pairs.len() + 1);
        let mut sum_theta_loc = Vec::with_capacity(pairs.len() + 1);
        sum_theta.push(0.0);
        sum_theta_loc.push(0.0);
        let (mut s1, mut c1) = (0.0f64, 0.0f64);
        let (mut s2, mut c2) = (0.0f64, 0.0f64);
        for &(loc, theta) in &pairs {
            locs.push(loc);
            kahan_add(&mut s1, &mut c1, theta);
            kahan_add(&mut s2, &mut c2, theta * loc);
            sum_theta.push(s1 + c1);
            sum_theta_loc.push(s2 + c2);
        }
        PrefixGroup { locs, sum_theta, sum_theta_loc }
    }

    /// Sum of `theta * (t - loc)` over entries with `loc < t`.
    #[inline]
    fn relu_sum(&self, t: f64) -> f64 {
        let m = self.locs.partition_point(|&c| c < t);
        self.sum_theta[m] * t - self.sum_theta_loc[m]
    }
}

#[inline]
fn kahan_add(sum: &mut f64, comp: &mut f64, term: f64) {
    let y = term - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

impl Prefix1d {
    fn build(net: &ReluNet) -> Prefix1d {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        let (mut la, mut lca) = (0.0f64, 0.0f64);
        let (mut lb, mut lcb) = (0.0f64, 0.0f64);
        for (b, &theta) in net.basis.iter().zip(&net.theta) {
            let d = net.directions[b.dir as usize][0] as f64;
            kahan_add(&mut la, &mut lca, theta * d);
            kahan_add(&mut lb, &mut lcb, theta * b.loc);
            if d > 0.0 {
                plus.push((b.loc, theta));
            } else {
                minus.push((b.loc, theta));
            }
        }
        Prefix1d {
            alpha: net.alpha,
            gamma: net.gamma,
            neg_slope: net.activation.negative_slope(),
            lin_a: la + lca,
            lin_b: lb + lcb,
            groups: [PrefixGroup::build(plus), PrefixGroup::build(minus)],
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let relu = self.groups[0].relu_sum(x) + self.groups[1].relu_sum(-x);
        let s = self.neg_slope;
        let mut total = (1.0 - s) * relu;
        if s != 0.0 {
            total += s * (self.lin_a * x - self.lin_b);
        }
        self.alpha + self.gamma * total
    }
}

/// Network values sampled on a strictly increasing 1-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
}

impl EvalGrid {
    /// Validate and wrap a sampled grid.
    pub fn new(points: Vec<f64>, values: Vec<f64>) -> Result<EvalGrid> {
        if points.len() != values.len() {
            return Err(Error::validation("EvalGrid: points/values length mismatch"));
        }
        if points.is_empty() {
            return Err(Error::validation("EvalGrid: empty grid"));
        }
        if points.iter().any(|p| !p.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("EvalGrid: non-finite entry"));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::validation("EvalGrid: points must be strictly increasing"));
        }
        Ok(EvalGrid { points, values })
    }

    /// Sample a 1-D network on `points`.
    pub fn sample(net: &ReluNet, points: Vec<f64>) -> Result<EvalGrid> {
        let values = net.eval_grid(&points);
        EvalGrid::new(points, values)
    }

    /// Largest absolute deviation from `target` over the grid.
    pub fn sup_error(&self, target: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| (v - target(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Grid point attaining [`EvalGrid::sup_error`].
    pub fn sup_error_argmax(&self, target: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut best = (self.points[0], 0.0);
        for (&x, &v) in self.points.iter().zip(&self.values) {
            let e = (v - target(x)).abs();
            if e > best.1 {
                best = (x, e);
            }
        }
        best
    }

    /// L2 distance to `target`: the square root of the trapezoid-rule
    /// integral of the squared deviation over the grid span.
    pub fn l2_error(&self, target: impl Fn(f64) -> f64) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let sq: Vec<f64> = self
            .points
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| {
                let d = v - target(x);
                d * d
            })
            .collect();
        let mut acc = 0.0;
        for i in 1..self.points.len() {
            let w = self.points[i] - self.points[i - 1];
            acc += 0.5 * w * (sq[i] + sq[i - 1]);
        }
        acc.sqrt()
    }
}

/// `count >= 2` evenly spaced points from `lo` to `hi` with exact endpoints.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "linspace: need at least two points");
    assert!(lo < hi, "linspace: lo must be below hi");
    let last = count - 1;
    (0..count)
        .map(|k| {
            if k == last {
                hi
            } else {
                lo + (hi - lo) * (k as f64 / last as f64)
            }
        })
        .collect()
}

/// The `k`-th of `n` equidistant locations on the unit interval, `k / (n-1)`.
/// Every construction that places locations on the unit grid goes through this
/// so identical indices produce identical floats.
#[inline]
pub fn unit_loc(k: usize, n: usize) -> f64 {
    debug_assert!(n >= 2 && k < n);
    k as f64 / (n - 1) as f64
}

/// All `n` equidistant unit-interval locations.
pub fn unit_grid(n: usize) -> Vec<f64> {
    assert!(n >= 2, "unit_grid: need at least two locations");
    (0..n).map(|k| unit_loc(k, n)).collect()
}
