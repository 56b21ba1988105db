//! `permutrain`: build, train, sweep, rate-fit, and trace permutation-trained
//! shallow ReLU networks.
//!
//! Subcommands mirror the library layers: `construct` runs the accuracy-
//! guaranteed builders, `train` fits one network, `sweep` runs a grid of
//! training cells in parallel with resumable CSV output, `rate` fits a
//! log-log convergence slope to sweep results, and `trace` records which
//! coefficient positions each projection moves.
//!
//! Exit codes: 0 on success, 2 for validation errors (including usage
//! errors), 3 when a construction exceeds its width cap, 4 when every seed of
//! a randomized construction failed, 1 for anything else.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use permutrain_core::construct::{
    build_random, build_theorem1, build_theorem2, BuildOptions, ConstructionLedger,
};
use permutrain_core::experiment::{
    build_net, by_name, dim_defaults, fit_rate, load_results, median_sup_by_n, run_sweep,
    InitStrategy, SweepConfig, TargetFunction,
};
use permutrain_core::net::serialize as net_io;
use permutrain_core::trace::trace_training;
use permutrain_core::train::{laperm_train, train_free, TrainConfig, TrainReport};
use permutrain_core::{DataSet, Error, ReluNet, Result};

#[derive(Parser)]
#[command(
    name = "permutrain",
    version,
    about = "Permutation-trained shallow ReLU networks: constructions, training, experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a network for a named target with a guaranteed accuracy budget.
    Construct(ConstructArgs),
    /// Train one network with periodic projection onto its initial weights.
    Train(TrainArgs),
    /// Train a grid of cells (targets x strategies x widths x seeds).
    Sweep(SweepArgs),
    /// Fit a log-log convergence slope to sweep results.
    Rate(RateArgs),
    /// Record which weight positions each projection moves.
    Trace(TraceArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Validation(_) => 2u8,
                Error::WidthCap { .. } => 3,
                Error::Retry { .. } => 4,
                _ => 1,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Construct(args) => cmd_construct(args),
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Rate(args) => cmd_rate(args),
        Command::Trace(args) => cmd_trace(args),
    }
}

// ---------------------------------------------------------------------------
// shared plumbing

/// Read a config file, deserializing by extension (`.json`, `.toml`) or by
/// trying both formats.
fn load_file<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(p) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(p)
        .map_err(|e| Error::validation(format!("config {}: {e}", p.display())))?;
    let bad = |what: String| Error::validation(format!("config {}: {what}", p.display()));
    match p.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "json" => serde_json::from_str(&text).map_err(|e| bad(e.to_string())),
        "toml" => toml::from_str(&text).map_err(|e| bad(e.to_string())),
        _ => serde_json::from_str(&text).or_else(|json_err| {
            toml::from_str(&text)
                .map_err(|toml_err| bad(format!("not JSON ({json_err}) nor TOML ({toml_err})")))
        }),
    }
}

/// Parse a comma-separated list.
fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Result<Vec<T>> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|e| Error::validation(format!("bad {what} entry {t:?}: {e}")))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(Error::validation(format!("empty {what} list")));
    }
    Ok(items)
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    config: &'a T,
    config_sha256: String,
    version: &'a str,
    wall_millis: u64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(2 * digest.len());
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

fn write_manifest<T: Serialize>(
    path: &Path,
    command: &str,
    config: &T,
    wall_millis: u64,
) -> Result<()> {
    let config_json = serde_json::to_string(config)?;
    let manifest = Manifest {
        command,
        config,
        config_sha256: sha256_hex(config_json.as_bytes()),
        version: env!("CARGO_PKG_VERSION"),
        wall_millis,
    };
    fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn one_dimensional(target: &TargetFunction) -> Result<()> {
    if target.dim != 1 {
        return Err(Error::validation(format!(
            "target {} has dimension {}; constructions handle one-dimensional targets only",
            target.name, target.dim
        )));
    }
    Ok(())
}

/// Sup and root-mean-square deviation of a network over a dataset.
fn test_errors(net: &ReluNet, data: &DataSet) -> (f64, f64) {
    let mut sup = 0.0f64;
    for i in 0..data.len() {
        sup = sup.max((net.forward(data.point(i)) - data.ys[i]).abs());
    }
    (sup, net.mse(&data.xs, &data.ys).sqrt())
}

// ---------------------------------------------------------------------------
// construct

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Theorem {
    /// Equidistant construction with a trained output scale.
    #[value(name = "1")]
    TrainedScale,
    /// Fixed-scale construction: offset 0 and scale 1 exactly.
    #[value(name = "2")]
    FixedScale,
    /// Randomized-initialization construction.
    #[value(name = "random")]
    Random,
}

impl Theorem {
    fn as_str(self) -> &'static str {
        match self {
            Theorem::TrainedScale => "1",
            Theorem::FixedScale => "2",
            Theorem::Random => "random",
        }
    }

    fn parse(s: &str) -> Result<Theorem> {
        match s {
            "1" => Ok(Theorem::TrainedScale),
            "2" => Ok(Theorem::FixedScale),
            "random" => Ok(Theorem::Random),
            other => Err(Error::validation(format!(
                "unknown construction {other:?}; use 1, 2, or random"
            ))),
        }
    }
}

#[derive(Args)]
struct ConstructArgs {
    /// Load defaults from a JSON or TOML config file; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Target function name (must be one-dimensional).
    #[arg(long)]
    target: Option<String>,
    /// Accuracy budget for the sup deviation.
    #[arg(long)]
    eps: Option<f64>,
    /// Which construction to run: 1 (trained scale), 2 (fixed scale), or
    /// random [default: 1].
    #[arg(long, value_enum)]
    theorem: Option<Theorem>,
    /// Failure budget of the randomized construction [default: 0.2].
    #[arg(long)]
    delta: Option<f64>,
    /// First seed for the randomized construction [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Consecutive seeds to try before giving up [default: 8].
    #[arg(long)]
    retries: Option<u32>,
    /// Verification grid resolution [default: 10001].
    #[arg(long)]
    grid_points: Option<usize>,
    /// Hard ceiling on paired locations [default: 1000000].
    #[arg(long)]
    width_cap: Option<usize>,
    /// Directory for network.json, ledger.json, report.json, manifest.json.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConstructFile {
    target: Option<String>,
    eps: Option<f64>,
    theorem: Option<String>,
    delta: Option<f64>,
    seed: Option<u64>,
    retries: Option<u32>,
    grid_points: Option<usize>,
    width_cap: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ConstructConfig {
    target: String,
    eps: f64,
    theorem: String,
    delta: f64,
    seed: u64,
    retries: u32,
    grid_points: usize,
    width_cap: usize,
}

#[derive(Serialize)]
struct ConstructReport {
    target: String,
    theorem: String,
    eps: f64,
    width: usize,
    n_locations: usize,
    alpha: f64,
    gamma: f64,
    realized_sup: f64,
    realized_l2: f64,
    within_budget: bool,
    exact_permutation: bool,
    attempts: u32,
    seed_used: Option<u64>,
    wall_millis: u64,
}

fn cmd_construct(args: ConstructArgs) -> Result<()> {
    let file: ConstructFile = load_file(args.config.as_deref())?;
    let theorem = match (args.theorem, file.theorem) {
        (Some(t), _) => t,
        (None, Some(s)) => Theorem::parse(&s)?,
        (None, None) => Theorem::TrainedScale,
    };
    let cfg = ConstructConfig {
        target: args
            .target
            .or(file.target)
            .ok_or_else(|| Error::validation("construct: --target is required"))?,
        eps: args
            .eps
            .or(file.eps)
            .ok_or_else(|| Error::validation("construct: --eps is required"))?,
        theorem: theorem.as_str().to_string(),
        delta: args.delta.or(file.delta).unwrap_or(0.2),
        seed: args.seed.or(file.seed).unwrap_or(0),
        retries: args.retries.or(file.retries).unwrap_or(8).max(1),
        grid_points: args.grid_points.or(file.grid_points).unwrap_or(10_001),
        width_cap: args.width_cap.or(file.width_cap).unwrap_or(1_000_000),
    };
    let out = args.out.or(file.out);

    let target = by_name(&cfg.target)?;
    one_dimensional(target)?;
    let opts = BuildOptions {
        domain: target.domain[0],
        width_cap: cfg.width_cap,
        grid_points: cfg.grid_points,
    };
    let f = |x: f64| target.eval_1d(x);

    let started = Instant::now();
    let (net, ledger, attempts, seed_used): (ReluNet, ConstructionLedger, u32, Option<u64>) =
        match theorem {
            Theorem::TrainedScale => {
                let (net, ledger) = build_theorem1(f, cfg.eps, &opts)?;
                (net, ledger, 1, None)
            }
            Theorem::FixedScale => {
                let (net, ledger) = build_theorem2(f, cfg.eps, &opts)?;
                (net, ledger, 1, None)
            }
            Theorem::Random => {
                let mut last_failure = None;
                let mut found = None;
                for attempt in 0..cfg.retries {
                    let seed = cfg.seed + attempt as u64;
                    match build_random(&f, cfg.eps, cfg.delta, seed, &opts) {
                        Ok((net, ledger)) => {
                            found = Some((net, ledger, attempt + 1, Some(seed)));
                            break;
                        }
                        Err(e @ Error::Retry { .. }) => {
                            eprintln!("attempt {} failed: {e}", attempt + 1);
                            last_failure = Some(e);
                        }
                        Err(e) => return Err(e),
                    }
                }
                match found {
                    Some(hit) => hit,
                    None => {
                        return Err(last_failure.unwrap_or(Error::Retry {
                            reason: "no seeds were attempted".to_string(),
                        }))
                    }
                }
            }
        };
    let wall_millis = started.elapsed().as_millis() as u64;

    let report = ConstructReport {
        target: cfg.target.clone(),
        theorem: cfg.theorem.clone(),
        eps: cfg.eps,
        width: net.width(),
        n_locations: ledger.n_locations,
        alpha: net.alpha,
        gamma: net.gamma,
        realized_sup: ledger.realized_sup,
        realized_l2: ledger.realized_l2,
        within_budget: ledger.realized_sup <= cfg.eps,
        exact_permutation: net.multiset_intact(),
        attempts,
        seed_used,
        wall_millis,
    };
    println!(
        "construct {} ({}): width {}, sup {:.3e} within budget {:.3e}, {} ms",
        report.target, report.theorem, report.width, report.realized_sup, report.eps, wall_millis
    );

    if let Some(dir) = out {
        fs::create_dir_all(&dir)?;
        net_io::save(&net, &dir.join("network.json"))?;
        fs::write(dir.join("ledger.json"), serde_json::to_string_pretty(&ledger)?)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        write_manifest(&dir.join("manifest.json"), "construct", &cfg, wall_millis)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train

#[derive(Args)]
struct TrainArgs {
    /// Load defaults from a JSON or TOML config file; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Target function name.
    #[arg(long)]
    target: Option<String>,
    /// Initialization strategy [default: equidistant].
    #[arg(long)]
    strategy: Option<String>,
    /// Offsets per direction pair (2n weights per direction pair).
    #[arg(long)]
    n: Option<usize>,
    /// Training epochs [default: 2000; the full-scale runs used 6400].
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial learning rate [default: 0.001].
    #[arg(long)]
    lr: Option<f64>,
    /// Per-epoch learning-rate decay [default: 0.998].
    #[arg(long)]
    lr_decay: Option<f64>,
    /// Projection period in epochs [default: 5 for 1-D and 2-D targets, 20
    /// for 3-D].
    #[arg(long)]
    k: Option<usize>,
    /// Per-epoch projection-period growth [default: 1.002^(1/10)].
    #[arg(long)]
    k_growth: Option<f64>,
    /// Minibatch size [default: 16 for 1-D targets, 128 for 2-D, 640 for
    /// 3-D].
    #[arg(long)]
    batch: Option<usize>,
    /// Training seed [default: 2022].
    #[arg(long)]
    seed: Option<u64>,
    /// Training-data sampling seed [default: 2022].
    #[arg(long)]
    data_seed: Option<u64>,
    /// Training points [default: 1600 for 1-D, 6400 for 2-D, 8000 for 3-D;
    /// full scale used 51200 beyond 1-D].
    #[arg(long)]
    n_train: Option<usize>,
    /// Test-grid size [default: 400 for 1-D, 1089 for 2-D, 1000 for 3-D;
    /// full scale used 12800 beyond 1-D].
    #[arg(long)]
    n_test: Option<usize>,
    /// Offset-range widening margin [default: 0 for 1-D, 0.75 beyond].
    #[arg(long)]
    margin: Option<f64>,
    /// Double the projection period after harmful projections.
    #[arg(long)]
    adaptive_k: bool,
    /// Hold the output offset and scale at their initial values.
    #[arg(long)]
    freeze_scale: bool,
    /// Skip every projection (unconstrained baseline).
    #[arg(long)]
    free: bool,
    /// Directory for network.json, epochs.csv, events.csv, report.json,
    /// manifest.json.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    target: Option<String>,
    strategy: Option<String>,
    n: Option<usize>,
    epochs: Option<usize>,
    lr: Option<f64>,
    lr_decay: Option<f64>,
    k: Option<usize>,
    k_growth: Option<f64>,
    batch: Option<usize>,
    seed: Option<u64>,
    data_seed: Option<u64>,
    n_train: Option<usize>,
    n_test: Option<usize>,
    margin: Option<f64>,
    adaptive_k: Option<bool>,
    freeze_scale: Option<bool>,
    free: Option<bool>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrainRunConfig {
    target: String,
    strategy: InitStrategy,
    n: usize,
    epochs: usize,
    lr: f64,
    lr_decay: f64,
    k: usize,
    k_growth: f64,
    batch: usize,
    seed: u64,
    data_seed: u64,
    n_train: usize,
    n_test: usize,
    margin: f64,
    adaptive_k: bool,
    freeze_scale: bool,
    free: bool,
}

#[derive(Serialize)]
struct TrainRunReport {
    final_loss: f64,
    sup_error: f64,
    l2_error: f64,
    epochs: usize,
    projections: usize,
    multiset_intact: bool,
    wall_millis: u64,
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let file: TrainFile = load_file(args.config.as_deref())?;
    let target_name = args
        .target
        .or(file.target)
        .ok_or_else(|| Error::validation("train: --target is required"))?;
    let target = by_name(&target_name)?;
    let defaults = dim_defaults(target.dim);
    let strategy: InitStrategy = args
        .strategy
        .or(file.strategy)
        .unwrap_or_else(|| "equidistant".to_string())
        .parse()?;
    let cfg = TrainRunConfig {
        target: target_name,
        strategy,
        n: args
            .n
            .or(file.n)
            .ok_or_else(|| Error::validation("train: --n is required"))?,
        epochs: args.epochs.or(file.epochs).unwrap_or(2000),
        lr: args.lr.or(file.lr).unwrap_or(1e-3),
        lr_decay: args.lr_decay.or(file.lr_decay).unwrap_or(0.998),
        k: args.k.or(file.k).unwrap_or(defaults.k),
        k_growth: args.k_growth.or(file.k_growth).unwrap_or(1.002f64.powf(0.1)),
        batch: args.batch.or(file.batch).unwrap_or(defaults.batch),
        seed: args.seed.or(file.seed).unwrap_or(2022),
        data_seed: args.data_seed.or(file.data_seed).unwrap_or(2022),
        n_train: args.n_train.or(file.n_train).unwrap_or(defaults.n_train),
        n_test: args.n_test.or(file.n_test).unwrap_or(defaults.n_test),
        margin: args.margin.or(file.margin).unwrap_or(defaults.margin),
        adaptive_k: args.adaptive_k || file.adaptive_k.unwrap_or(false),
        freeze_scale: args.freeze_scale || file.freeze_scale.unwrap_or(false),
        free: args.free || file.free.unwrap_or(false),
    };

    let (train_set, test_set) = permutrain_core::experiment::generate_data(
        target,
        cfg.n_train,
        cfg.n_test,
        cfg.data_seed,
    )?;
    let net = build_net(cfg.strategy, target, cfg.n, cfg.margin, cfg.seed)?;
    let train_cfg = TrainConfig {
        lr: cfg.lr,
        k: cfg.k,
        k_growth: cfg.k_growth,
        lr_decay: cfg.lr_decay,
        epochs: cfg.epochs,
        batch_size: cfg.batch,
        seed: cfg.seed,
        freeze_scale: cfg.freeze_scale,
        adaptive_k: cfg.adaptive_k,
        ..TrainConfig::default()
    };
    let report: TrainReport = if cfg.free {
        train_free(net, &train_set, &train_cfg)?
    } else {
        laperm_train(net, &train_set, &train_cfg)?
    };
    let (sup, l2) = test_errors(&report.net, &test_set);
    let summary = TrainRunReport {
        final_loss: report.final_loss,
        sup_error: sup,
        l2_error: l2,
        epochs: report.epochs.len(),
        projections: report.events.len(),
        multiset_intact: report.net.multiset_intact(),
        wall_millis: report.wall_millis,
    };
    println!(
        "train {} {} n={} seed={}: loss {:.3e}, test sup {:.3e}, l2 {:.3e}, {} projections, {} ms",
        cfg.target,
        cfg.strategy,
        cfg.n,
        cfg.seed,
        summary.final_loss,
        summary.sup_error,
        summary.l2_error,
        summary.projections,
        summary.wall_millis
    );

    if let Some(dir) = args.out.or(file.out) {
        fs::create_dir_all(&dir)?;
        net_io::save(&report.net, &dir.join("network.json"))?;
        let mut epochs_csv = String::from("# permutrain train v1\nepoch,loss,lr,k_live,projected\n");
        for e in &report.epochs {
            epochs_csv.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{}\n",
                e.epoch, e.loss, e.lr, e.k_live, e.projected
            ));
        }
        fs::write(dir.join("epochs.csv"), epochs_csv)?;
        let mut events_csv =
            String::from("# permutrain events v1\nepoch,moved,loss_before,loss_after\n");
        for e in &report.events {
            events_csv.push_str(&format!(
                "{},{},{:.16e},{:.16e}\n",
                e.epoch, e.moved, e.loss_before, e.loss_after
            ));
        }
        fs::write(dir.join("events.csv"), events_csv)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&summary)?)?;
        write_manifest(&dir.join("manifest.json"), "train", &cfg, summary.wall_millis)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Args)]
struct SweepArgs {
    /// Load a JSON or TOML sweep config; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Comma-separated target names [default: sin1d].
    #[arg(long)]
    targets: Option<String>,
    /// Comma-separated strategies [default: equidistant].
    #[arg(long)]
    strategies: Option<String>,
    /// Comma-separated widths [default: 10,20,40,80,160,320].
    #[arg(long)]
    n_list: Option<String>,
    /// Comma-separated training seeds [default: 2022,3022,4022; paper scale
    /// uses ten seeds 2022..11022].
    #[arg(long)]
    seeds: Option<String>,
    /// Training-data sampling seed [default: 2022].
    #[arg(long)]
    data_seed: Option<u64>,
    /// Epochs per cell [default: 2000; 6400 at paper scale].
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial learning rate [default: 0.001].
    #[arg(long)]
    lr: Option<f64>,
    /// Per-epoch learning-rate decay [default: 0.998].
    #[arg(long)]
    lr_decay: Option<f64>,
    /// Projection period [default: 5 for 1-D/2-D, 20 for 3-D].
    #[arg(long)]
    k: Option<usize>,
    /// Per-epoch projection-period growth [default: 1.002^(1/10)].
    #[arg(long)]
    k_growth: Option<f64>,
    /// Minibatch size [default: 16/128/640 by dimension].
    #[arg(long)]
    batch: Option<usize>,
    /// Training points per cell [default: 1600/6400/8000 by dimension].
    #[arg(long)]
    n_train: Option<usize>,
    /// Test-grid size [default: 400/1089/1000 by dimension].
    #[arg(long)]
    n_test: Option<usize>,
    /// Offset-range widening margin [default: 0 for 1-D, 0.75 beyond].
    #[arg(long)]
    margin: Option<f64>,
    /// Double the projection period after harmful projections.
    #[arg(long)]
    adaptive_k: bool,
    /// Full-scale settings: 6400 epochs, ten seeds, large datasets.
    #[arg(long)]
    paper_scale: bool,
    /// Output directory [default: sweep-out].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads [default: all logical cores].
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepFile {
    targets: Option<Vec<String>>,
    strategies: Option<Vec<String>>,
    n_list: Option<Vec<usize>>,
    seeds: Option<Vec<u64>>,
    data_seed: Option<u64>,
    epochs: Option<usize>,
    lr: Option<f64>,
    lr_decay: Option<f64>,
    k: Option<usize>,
    k_growth: Option<f64>,
    batch: Option<usize>,
    n_train: Option<usize>,
    n_test: Option<usize>,
    margin: Option<f64>,
    adaptive_k: Option<bool>,
    paper_scale: Option<bool>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let file: SweepFile = load_file(args.config.as_deref())?;
    let paper_scale = args.paper_scale || file.paper_scale.unwrap_or(false);

    let mut cfg = SweepConfig { paper_scale, ..SweepConfig::default() };
    if let Some(t) = &args.targets {
        cfg.targets = parse_list(t, "target")?;
    } else if let Some(t) = file.targets {
        cfg.targets = t;
    }
    if let Some(s) = &args.strategies {
        cfg.strategies = parse_list(s, "strategy")?;
    } else if let Some(s) = file.strategies {
        cfg.strategies = s
            .iter()
            .map(|name| name.parse())
            .collect::<Result<Vec<InitStrategy>>>()?;
    }
    if let Some(n) = &args.n_list {
        cfg.n_list = parse_list(n, "width")?;
    } else if let Some(n) = file.n_list {
        cfg.n_list = n;
    }
    match (&args.seeds, file.seeds) {
        (Some(s), _) => cfg.seeds = parse_list(s, "seed")?,
        (None, Some(s)) => cfg.seeds = s,
        (None, None) if paper_scale => {
            cfg.seeds = (0..10).map(|i| 2022 + 1000 * i).collect();
        }
        (None, None) => {}
    }
    match (args.epochs, file.epochs) {
        (Some(e), _) => cfg.epochs = e,
        (None, Some(e)) => cfg.epochs = e,
        (None, None) if paper_scale => cfg.epochs = 6400,
        (None, None) => {}
    }
    if let Some(v) = args.data_seed.or(file.data_seed) {
        cfg.data_seed = v;
    }
    if let Some(v) = args.lr.or(file.lr) {
        cfg.lr = v;
    }
    if let Some(v) = args.lr_decay.or(file.lr_decay) {
        cfg.lr_decay = v;
    }
    if let Some(v) = args.k_growth.or(file.k_growth) {
        cfg.k_growth = v;
    }
    cfg.k = args.k.or(file.k).or(cfg.k);
    cfg.batch = args.batch.or(file.batch).or(cfg.batch);
    cfg.n_train = args.n_train.or(file.n_train).or(cfg.n_train);
    cfg.n_test = args.n_test.or(file.n_test).or(cfg.n_test);
    cfg.margin = args.margin.or(file.margin).or(cfg.margin);
    cfg.adaptive_k = args.adaptive_k || file.adaptive_k.unwrap_or(false);

    let out = args
        .out
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("sweep-out"));
    let jobs = args.jobs.or(file.jobs);

    let result = run_sweep(&cfg, Some(&out), jobs)?;
    println!(
        "sweep: {} cells ({} freshly trained), results in {}",
        result.cells.len(),
        result.freshly_run,
        out.display()
    );
    for target in &cfg.targets {
        for &strategy in &cfg.strategies {
            let medians = median_sup_by_n(&result.cells, target, strategy);
            let rendered: Vec<String> = medians
                .iter()
                .map(|(n, e)| format!("n={n}: {e:.3e}"))
                .collect();
            print!("  {target} {strategy}: {}", rendered.join(", "));
            if medians.len() >= 2 {
                let pairs: Vec<(f64, f64)> =
                    medians.iter().map(|&(n, e)| (n as f64, e)).collect();
                if let Ok((slope, stderr)) = fit_rate(&pairs) {
                    print!(" | slope {slope:.3} (stderr {stderr:.3})");
                }
            }
            println!();
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// rate

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RateMetric {
    /// Largest absolute test deviation.
    Sup,
    /// Root-mean-square test deviation.
    L2,
}

#[derive(Args)]
struct RateArgs {
    /// Sweep results file (results.csv).
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Target to fit.
    #[arg(long)]
    target: String,
    /// Strategy to fit [default: equidistant].
    #[arg(long, default_value = "equidistant")]
    strategy: String,
    /// Which error column to fit [default: sup].
    #[arg(long, value_enum, default_value_t = RateMetric::Sup)]
    metric: RateMetric,
    /// Write the fit as JSON here as well.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RateReport {
    target: String,
    strategy: InitStrategy,
    metric: &'static str,
    medians: Vec<(usize, f64)>,
    slope: f64,
    stderr: f64,
}

fn cmd_rate(args: RateArgs) -> Result<()> {
    let strategy: InitStrategy = args.strategy.parse()?;
    let rows = load_results(&args.input)?;
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in &rows {
        if r.target == args.target && r.strategy == strategy {
            let value = match args.metric {
                RateMetric::Sup => r.sup_error,
                RateMetric::L2 => r.l2_error,
            };
            by_n.entry(r.n).or_default().push(value);
        }
    }
    if by_n.is_empty() {
        return Err(Error::validation(format!(
            "rate: {} has no rows for target {} with strategy {}",
            args.input.display(),
            args.target,
            strategy
        )));
    }
    let medians: Vec<(usize, f64)> = by_n
        .into_iter()
        .map(|(n, mut v)| {
            v.sort_by(f64::total_cmp);
            let m = v.len();
            let med = if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) };
            (n, med)
        })
        .collect();
    let pairs: Vec<(f64, f64)> = medians.iter().map(|&(n, e)| (n as f64, e)).collect();
    let (slope, stderr) = fit_rate(&pairs)?;
    let report = RateReport {
        target: args.target,
        strategy,
        metric: match args.metric {
            RateMetric::Sup => "sup",
            RateMetric::L2 => "l2",
        },
        medians,
        slope,
        stderr,
    };
    println!(
        "rate {} {} ({}): slope {:.4} stderr {:.4} over {} widths",
        report.target,
        report.strategy,
        report.metric,
        report.slope,
        report.stderr,
        report.medians.len()
    );
    for (n, e) in &report.medians {
        println!("  n={n}: {e:.6e}");
    }
    if let Some(path) = args.out {
        fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// trace

#[derive(Args)]
struct TraceArgs {
    /// Target function name [default: sin1d].
    #[arg(long, default_value = "sin1d")]
    target: String,
    /// Initialization strategy [default: equidistant].
    #[arg(long, default_value = "equidistant")]
    strategy: String,
    /// Offsets per direction pair [default: 640].
    #[arg(long, default_value_t = 640)]
    n: usize,
    /// Projection events to record [default: 400].
    #[arg(long, default_value_t = 400)]
    events: usize,
    /// Projection period in epochs; the run lasts events * k epochs
    /// [default: 5].
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Training seed [default: 2022].
    #[arg(long, default_value_t = 2022)]
    seed: u64,
    /// Training-data sampling seed [default: 2022].
    #[arg(long, default_value_t = 2022)]
    data_seed: u64,
    /// Initial learning rate [default: 0.001].
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Per-epoch learning-rate decay [default: 0.998].
    #[arg(long, default_value_t = 0.998)]
    lr_decay: f64,
    /// Training points [default: per-dimension sweep default].
    #[arg(long)]
    n_train: Option<usize>,
    /// Events per summary window [default: 10].
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Trace CSV path; the summary and manifest land next to it.
    #[arg(long, value_name = "FILE", default_value = "trace.csv")]
    out: PathBuf,
}

#[derive(Serialize)]
struct TraceConfig {
    target: String,
    strategy: InitStrategy,
    n: usize,
    events: usize,
    k: usize,
    seed: u64,
    data_seed: u64,
    lr: f64,
    lr_decay: f64,
    n_train: usize,
    window: usize,
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trace");
    path.with_file_name(format!("{stem}-{name}"))
}

fn cmd_trace(args: TraceArgs) -> Result<()> {
    if args.events == 0 {
        return Err(Error::validation("trace: need at least one event"));
    }
    let target = by_name(&args.target)?;
    let strategy: InitStrategy = args.strategy.parse()?;
    let defaults = dim_defaults(target.dim);
    let cfg = TraceConfig {
        target: args.target.clone(),
        strategy,
        n: args.n,
        events: args.events,
        k: args.k.max(1),
        seed: args.seed,
        data_seed: args.data_seed,
        lr: args.lr,
        lr_decay: args.lr_decay,
        n_train: args.n_train.unwrap_or(defaults.n_train),
        window: args.window,
    };

    let data = permutrain_core::experiment::training_data(target, cfg.n_train, cfg.data_seed)?;
    let net = build_net(strategy, target, cfg.n, defaults.margin, cfg.seed)?;
    let train_cfg = TrainConfig {
        lr: cfg.lr,
        lr_decay: cfg.lr_decay,
        k: cfg.k,
        // A fixed period makes the event count exact: events * k epochs.
        k_growth: 1.0,
        epochs: cfg.events * cfg.k,
        batch_size: defaults.batch,
        seed: cfg.seed,
        ..TrainConfig::default()
    };
    let (report, log) = trace_training(net, &data, &train_cfg, strategy.as_str(), &args.target)?;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut csv = Vec::new();
    log.export_csv(&mut csv)?;
    fs::write(&args.out, csv)?;
    let windows = log.summarize(cfg.window)?;
    fs::write(
        sibling(&args.out, "summary.json"),
        serde_json::to_string_pretty(&windows)?,
    )?;
    write_manifest(
        &sibling(&args.out, "manifest.json"),
        "trace",
        &cfg,
        report.wall_millis,
    )?;

    let first = windows.first();
    let last = windows.last();
    println!(
        "trace {} {} n={}: {} events over {} epochs, mean moved {} (first window) -> {} (last), final loss {:.3e}",
        cfg.target,
        cfg.strategy,
        cfg.n,
        log.events.len(),
        report.epochs.len(),
        first.map_or(0.0, |w| w.mean_moved),
        last.map_or(0.0, |w| w.mean_moved),
        report.final_loss
    );
    println!("wrote {}", args.out.display());
    Ok(())
}
