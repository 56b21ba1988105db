//! Parallel training sweeps over targets, strategies, widths, and seeds.
//!
//! A sweep enumerates its cells in a fixed canonical order (target, then
//! strategy, then width, then seed), trains each cell independently, and
//! optionally persists rows to `results.csv` as cells complete — always in
//! canonical order, so identical configurations produce byte-identical files.
//! A `manifest.json` ties the rows to a hash of the configuration; rerunning
//! a sweep into the same directory skips cells that already have rows, and
//! refuses to mix rows from different configurations.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::data::generate_data;
use super::init::{build_net, InitStrategy};
use super::targets::by_name;
use crate::error::{Error, Result};
use crate::train::{laperm_train, TrainConfig};

/// What to sweep and how to train each cell. Fields left as `None` fall back
/// to per-dimension defaults (see [`dim_defaults`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Registered target names.
    pub targets: Vec<String>,
    /// Initialization strategies.
    pub strategies: Vec<InitStrategy>,
    /// Offsets per direction pair.
    pub n_list: Vec<usize>,
    /// Training seeds, one cell per seed.
    pub seeds: Vec<u64>,
    /// Seed for training-data sampling (shared by every cell of a target).
    pub data_seed: u64,
    /// Epochs per cell.
    pub epochs: usize,
    /// Initial learning rate.
    pub lr: f64,
    /// Per-epoch learning-rate multiplier.
    pub lr_decay: f64,
    /// Projection period; default depends on the target dimension.
    pub k: Option<usize>,
    /// Per-epoch projection-period multiplier.
    pub k_growth: f64,
    /// Minibatch size; default depends on the target dimension.
    pub batch: Option<usize>,
    /// Training points; default depends on the target dimension.
    pub n_train: Option<usize>,
    /// Test-grid size; default depends on the target dimension.
    pub n_test: Option<usize>,
    /// Offset-range widening margin; default depends on the target dimension.
    pub margin: Option<f64>,
    /// Double the projection period after harmful projections.
    pub adaptive_k: bool,
    /// Use full-size per-dimension dataset defaults instead of the quick desk
    /// sizes.
    pub paper_scale: bool,
}

impl Default for SweepConfig {
    fn default() -> SweepConfig {
        SweepConfig {
            targets: vec!["sin1d".to_string()],
            strategies: vec![InitStrategy::Equidistant],
            n_list: vec![10, 20, 40, 80, 160, 320],
            seeds: vec![2022, 3022, 4022],
            data_seed: 2022,
            epochs: 2000,
            lr: 1e-3,
            lr_decay: 0.998,
            k: None,
            k_growth: 1.002f64.powf(0.1),
            batch: None,
            n_train: None,
            n_test: None,
            margin: None,
            adaptive_k: false,
            paper_scale: false,
        }
    }
}

/// Training knobs that depend only on the input dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimDefaults {
    /// Minibatch size.
    pub batch: usize,
    /// Projection period.
    pub k: usize,
    /// Training points.
    pub n_train: usize,
    /// Test-grid size.
    pub n_test: usize,
    /// Offset-range widening margin.
    pub margin: f64,
}

/// Defaults per input dimension, sized for quick desk runs.
pub fn dim_defaults(dim: usize) -> DimDefaults {
    match dim {
        1 => DimDefaults { batch: 16, k: 5, n_train: 1600, n_test: 400, margin: 0.0 },
        2 => DimDefaults { batch: 128, k: 5, n_train: 6400, n_test: 1089, margin: 0.75 },
        _ => DimDefaults { batch: 640, k: 20, n_train: 8000, n_test: 1000, margin: 0.75 },
    }
}

/// Full-size per-dimension defaults; higher-dimensional targets use much
/// larger datasets here.
pub fn paper_dim_defaults(dim: usize) -> DimDefaults {
    match dim {
        1 => DimDefaults { batch: 16, k: 5, n_train: 1600, n_test: 400, margin: 0.0 },
        2 => DimDefaults { batch: 128, k: 5, n_train: 51200, n_test: 12800, margin: 0.75 },
        _ => DimDefaults { batch: 640, k: 20, n_train: 51200, n_test: 12800, margin: 0.75 },
    }
}

fn effective_defaults(cfg: &SweepConfig, dim: usize) -> DimDefaults {
    if cfg.paper_scale {
        paper_dim_defaults(dim)
    } else {
        dim_defaults(dim)
    }
}

/// One trained cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    /// Target name.
    pub target: String,
    /// Initialization strategy.
    pub strategy: InitStrategy,
    /// Offsets per direction pair.
    pub n: usize,
    /// Training seed.
    pub seed: u64,
    /// Largest absolute deviation on the test grid.
    pub sup_error: f64,
    /// Root-mean-square deviation on the test grid.
    pub l2_error: f64,
    /// Training loss of the returned network.
    pub final_loss: f64,
    /// Epochs actually run.
    pub epochs: usize,
    /// Wall-clock training time.
    pub wall_millis: u64,
}

/// Everything a finished sweep produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// All cells in canonical order, including ones loaded from a previous
    /// partial run.
    pub cells: Vec<CellResult>,
    /// Number of cells trained by this invocation (the rest were loaded).
    pub freshly_run: usize,
    /// Where rows were persisted, when an output directory was given.
    pub csv_path: Option<PathBuf>,
    /// Where the manifest was written.
    pub manifest_path: Option<PathBuf>,
}

const RESULTS_FILE: &str = "results.csv";
const MANIFEST_FILE: &str = "manifest.json";
const CSV_HEADER: &str = "target,strategy,n,seed,sup_error,l2_error,final_loss,epochs,wall_millis";

/// Hex SHA-256 of the canonical JSON serialization of a sweep configuration.
pub fn config_hash(cfg: &SweepConfig) -> Result<String> {
    let json = serde_json::to_string(cfg)?;
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(2 * digest.len());
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: SweepConfig,
    config_sha256: String,
    version: String,
    cells_total: usize,
    cells_completed: usize,
    wall_millis: u64,
}

fn validate(cfg: &SweepConfig) -> Result<()> {
    if cfg.targets.is_empty() || cfg.strategies.is_empty() || cfg.n_list.is_empty()
        || cfg.seeds.is_empty()
    {
        return Err(Error::validation(
            "sweep: targets, strategies, widths, and seeds must all be nonempty",
        ));
    }
    for name in &cfg.targets {
        by_name(name)?;
    }
    for &n in &cfg.n_list {
        if n < 2 {
            return Err(Error::validation(format!(
                "sweep: width {n} is too small; need at least two offsets per direction"
            )));
        }
    }
    for target in &cfg.targets {
        let dim = by_name(target)?.dim;
        for &strategy in &cfg.strategies {
            if !strategy.supports_dim(dim) {
                return Err(Error::validation(format!(
                    "sweep: strategy {strategy} does not support the {dim}-dimensional target {target}"
                )));
            }
        }
    }
    Ok(())
}

fn cell_train_config(cfg: &SweepConfig, dim: usize, seed: u64) -> TrainConfig {
    let defaults = effective_defaults(cfg, dim);
    TrainConfig {
        lr: cfg.lr,
        k: cfg.k.unwrap_or(defaults.k),
        k_growth: cfg.k_growth,
        lr_decay: cfg.lr_decay,
        epochs: cfg.epochs,
        batch_size: cfg.batch.unwrap_or(defaults.batch),
        seed,
        adaptive_k: cfg.adaptive_k,
        ..TrainConfig::default()
    }
}

/// Train one cell of a sweep.
pub fn run_cell(
    cfg: &SweepConfig,
    target_name: &str,
    strategy: InitStrategy,
    n: usize,
    seed: u64,
) -> Result<CellResult> {
    let target = by_name(target_name)?;
    let defaults = effective_defaults(cfg, target.dim);
    let n_train = cfg.n_train.unwrap_or(defaults.n_train);
    let n_test = cfg.n_test.unwrap_or(defaults.n_test);
    let margin = cfg.margin.unwrap_or(defaults.margin);

    let (train_set, test_set) = generate_data(target, n_train, n_test, cfg.data_seed)?;
    let net = build_net(strategy, target, n, margin, seed)?;
    let train_cfg = cell_train_config(cfg, target.dim, seed);
    let report = laperm_train(net, &train_set, &train_cfg)?;

    let mut sup = 0.0f64;
    for i in 0..test_set.len() {
        let d = (report.net.forward(test_set.point(i)) - test_set.ys[i]).abs();
        sup = sup.max(d);
    }
    let l2 = report.net.mse(&test_set.xs, &test_set.ys).sqrt();

    Ok(CellResult {
        target: target_name.to_string(),
        strategy,
        n,
        seed,
        sup_error: sup,
        l2_error: l2,
        final_loss: report.final_loss,
        epochs: report.epochs.len(),
        wall_millis: report.wall_millis,
    })
}

type CellKey = (String, InitStrategy, usize, u64);

fn enumerate_cells(cfg: &SweepConfig) -> Vec<CellKey> {
    let mut cells = Vec::new();
    for target in &cfg.targets {
        for &strategy in &cfg.strategies {
            for &n in &cfg.n_list {
                for &seed in &cfg.seeds {
                    cells.push((target.clone(), strategy, n, seed));
                }
            }
        }
    }
    cells
}

fn format_row(r: &CellResult) -> String {
    format!(
        "{},{},{},{},{:.16e},{:.16e},{:.16e},{},{}",
        r.target,
        r.strategy,
        r.n,
        r.seed,
        r.sup_error,
        r.l2_error,
        r.final_loss,
        r.epochs,
        r.wall_millis
    )
}

fn parse_row(line: &str) -> Result<CellResult> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 9 {
        return Err(Error::validation(format!(
            "sweep: malformed results row with {} fields: {line:?}",
            fields.len()
        )));
    }
    let bad = |what: &str| Error::validation(format!("sweep: bad {what} in results row {line:?}"));
    Ok(CellResult {
        target: fields[0].to_string(),
        strategy: fields[1].parse()?,
        n: fields[2].parse().map_err(|_| bad("width"))?,
        seed: fields[3].parse().map_err(|_| bad("seed"))?,
        sup_error: fields[4].parse().map_err(|_| bad("sup error"))?,
        l2_error: fields[5].parse().map_err(|_| bad("l2 error"))?,
        final_loss: fields[6].parse().map_err(|_| bad("final loss"))?,
        epochs: fields[7].parse().map_err(|_| bad("epoch count"))?,
        wall_millis: fields[8].parse().map_err(|_| bad("wall time"))?,
    })
}

/// Read persisted sweep rows back from a results file.
pub fn load_results(path: &Path) -> Result<Vec<CellResult>> {
    let mut rows = Vec::new();
    for line in fs::read_to_string(path)?.lines() {
        if line.starts_with('#') || line == CSV_HEADER || line.is_empty() {
            continue;
        }
        rows.push(parse_row(line)?);
    }
    Ok(rows)
}

fn load_existing(dir: &Path, cfg: &SweepConfig) -> Result<HashMap<CellKey, CellResult>> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        let expected = config_hash(cfg)?;
        if manifest.config_sha256 != expected {
            return Err(Error::validation(format!(
                "sweep: output directory {} holds results for a different configuration \
                 (manifest hash {}, this configuration hashes to {expected})",
                dir.display(),
                manifest.config_sha256
            )));
        }
    }
    let csv_path = dir.join(RESULTS_FILE);
    let mut existing = HashMap::new();
    if csv_path.exists() {
        for line in fs::read_to_string(&csv_path)?.lines() {
            if line.starts_with('#') || line == CSV_HEADER || line.is_empty() {
                continue;
            }
            let row = parse_row(line)?;
            existing.insert((row.target.clone(), row.strategy, row.n, row.seed), row);
        }
    }
    Ok(existing)
}

/// Run every cell of a sweep, in parallel, skipping cells already persisted in
/// `out_dir`. `jobs` caps worker threads; `None` uses all cores.
pub fn run_sweep(
    cfg: &SweepConfig,
    out_dir: Option<&Path>,
    jobs: Option<usize>,
) -> Result<SweepResult> {
    validate(cfg)?;
    let start = Instant::now();
    let cells = enumerate_cells(cfg);

    let mut existing = HashMap::new();
    let mut writer = None;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        existing = load_existing(dir, cfg)?;
        let csv_path = dir.join(RESULTS_FILE);
        let fresh_file = !csv_path.exists();
        let file = fs::OpenOptions::new().create(true).append(true).open(&csv_path)?;
        let mut w = BufWriter::new(file);
        if fresh_file {
            writeln!(w, "# permutrain sweep v1")?;
            writeln!(w, "{CSV_HEADER}")?;
            w.flush()?;
        }
        writer = Some(w);
    }

    let pending: Vec<(usize, &CellKey)> = cells
        .iter()
        .enumerate()
        .filter(|(_, key)| !existing.contains_key(*key))
        .collect();
    let freshly_run = pending.len();

    let mut fresh: HashMap<usize, CellResult> = HashMap::new();
    if !pending.is_empty() {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.unwrap_or(0))
            .build()
            .map_err(|e| Error::validation(format!("sweep: cannot build thread pool: {e}")))?;
        let (tx, rx) = mpsc::channel::<(usize, Result<CellResult>)>();
        std::thread::scope(|scope| -> Result<()> {
            scope.spawn(|| {
                pool.install(|| {
                    pending.par_iter().for_each_with(tx, |tx, &(idx, key)| {
                        let (target, strategy, n, seed) = key;
                        let row = run_cell(cfg, target, *strategy, *n, *seed);
                        // The receiver only disappears after an error abort.
                        let _ = tx.send((idx, row));
                    });
                });
            });

            // Receive results and persist them in canonical order.
            let mut next_write = 0usize;
            let mut first_err = None;
            for (idx, outcome) in rx {
                match outcome {
                    Ok(row) => {
                        fresh.insert(idx, row);
                        if let Some(w) = writer.as_mut() {
                            while next_write < cells.len() {
                                let flushable = if let Some(r) = fresh.get(&next_write) {
                                    Some(format_row(r))
                                } else if let Some(r) = existing.get(&cells[next_write]) {
                                    Some(format_row(r))
                                } else {
                                    None
                                };
                                match flushable {
                                    Some(line) => {
                                        writeln!(w, "{line}")?;
                                        w.flush()?;
                                        next_write += 1;
                                    }
                                    None => break,
                                }
                            }
                        }
                    }
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            match first_err {
                Some(e) => Err(e),
                None => Ok(()),
            }
        })?;
    }

    let mut results = Vec::with_capacity(cells.len());
    for (idx, key) in cells.iter().enumerate() {
        if let Some(r) = fresh.remove(&idx) {
            results.push(r);
        } else if let Some(r) = existing.remove(key) {
            results.push(r);
        } else {
            return Err(Error::construction(format!(
                "sweep: cell {key:?} finished without a result"
            )));
        }
    }

    let mut csv_path = None;
    let mut manifest_path = None;
    if let Some(dir) = out_dir {
        csv_path = Some(dir.join(RESULTS_FILE));
        let path = dir.join(MANIFEST_FILE);
        let manifest = Manifest {
            config: cfg.clone(),
            config_sha256: config_hash(cfg)?,
            version: env!("CARGO_PKG_VERSION").to_string(),
            cells_total: cells.len(),
            cells_completed: results.len(),
            wall_millis: start.elapsed().as_millis() as u64,
        };
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        manifest_path = Some(path);
    }

    Ok(SweepResult { cells: results, freshly_run, csv_path, manifest_path })
}

/// Median of `values` (mean of the middle two for even counts).
fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Per-width median sup error for one target and strategy, in ascending
/// width order.
pub fn median_sup_by_n(
    cells: &[CellResult],
    target: &str,
    strategy: InitStrategy,
) -> Vec<(usize, f64)> {
    let mut by_n: HashMap<usize, Vec<f64>> = HashMap::new();
    for c in cells {
        if c.target == target && c.strategy == strategy {
            by_n.entry(c.n).or_default().push(c.sup_error);
        }
    }
    let mut out: Vec<(usize, f64)> = by_n
        .into_iter()
        .map(|(n, mut v)| (n, median(&mut v)))
        .collect();
    out.sort_by_key(|&(n, _)| n);
    out
}

/// Least-squares fit of `log e` against `log n` over `(n, e)` pairs. Returns
/// the slope and its standard error (zero when only two sizes are fitted).
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pairs.len() < 2 {
        return Err(Error::validation(format!(
            "rate: need at least two (size, error) pairs, got {}",
            pairs.len()
        )));
    }
    for &(n, e) in pairs {
        if !(n > 0.0) || !(e > 0.0) || !n.is_finite() || !e.is_finite() {
            return Err(Error::validation(format!(
                "rate: sizes and errors must be positive and finite, got ({n}, {e})"
            )));
        }
    }
    let logs: Vec<(f64, f64)> = pairs.iter().map(|&(n, e)| (n.ln(), e.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::validation("rate: need at least two distinct sizes"));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if logs.len() > 2 {
        let ssr: f64 = logs
            .iter()
            .map(|p| {
                let r = p.1 - (intercept + slope * p.0);
                r * r
            })
            .sum();
        (ssr / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, stderr))
}
