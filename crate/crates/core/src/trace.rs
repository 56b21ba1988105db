//! Projection-activity tracing.
//!
//! During permutation-constrained training, each projection rearranges the
//! coefficient vector. A [`TraceLog`] records, per projection, which positions
//! received a different value than the previous projection left there. The
//! comparison is by value, so `0.0` and `-0.0` count as the same value and a
//! position only shows as active when its value actually changed.

use std::io::Write;

use serde::Serialize;

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::net::ReluNet;
use crate::train::{laperm_train_with, TrainConfig, TrainReport};

/// Identification of the run a trace belongs to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMeta {
    /// Number of traced coefficient positions.
    pub width: usize,
    /// Initialization strategy label.
    pub strategy: String,
    /// Training seed.
    pub seed: u64,
    /// Target function label.
    pub target: String,
}

/// One projection: which positions changed value, and the loss around it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    /// Epoch of the projection (1-based).
    pub epoch: usize,
    /// Per-position activity: `true` where the value changed since the
    /// previous projection.
    pub mask: Vec<bool>,
    /// Number of `true` entries in `mask`.
    pub moved: usize,
    /// Full-dataset loss just before the projection.
    pub loss_before: f64,
    /// Full-dataset loss just after.
    pub loss_after: f64,
}

/// All projections of one training run, in order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceLog {
    /// Run identification.
    pub meta: TraceMeta,
    /// Events in epoch order.
    pub events: Vec<TraceEvent>,
}

/// Aggregates over a contiguous block of events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSummary {
    /// Index of the first event in the block.
    pub first_event: usize,
    /// Number of events aggregated.
    pub events: usize,
    /// Epoch of the first event.
    pub first_epoch: usize,
    /// Epoch of the last event.
    pub last_epoch: usize,
    /// Mean number of positions that changed value per event.
    pub mean_moved: f64,
    /// Least-squares slope of post-projection loss against epoch; zero when
    /// the block holds a single event.
    pub loss_slope: f64,
}

/// Positions whose value differs between two coefficient vectors.
pub fn activity_mask(prev: &[f64], next: &[f64]) -> Vec<bool> {
    assert_eq!(prev.len(), next.len(), "trace: coefficient vectors differ in length");
    prev.iter().zip(next).map(|(a, b)| a != b).collect()
}

/// Render an activity mask as alternating signed run lengths, `+` for active
/// positions and `-` for inactive ones, e.g. `-2+3` for `[F, F, T, T, T]`.
pub fn mask_rle(mask: &[bool]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < mask.len() {
        let run_val = mask[i];
        let mut j = i + 1;
        while j < mask.len() && mask[j] == run_val {
            j += 1;
        }
        out.push(if run_val { '+' } else { '-' });
        out.push_str(&(j - i).to_string());
        i = j;
    }
    out
}

/// Inverse of [`mask_rle`]; the decoded mask must have exactly `width`
/// positions.
pub fn parse_mask_rle(s: &str, width: usize) -> Result<Vec<bool>> {
    let mut mask = Vec::with_capacity(width);
    let mut chars = s.chars().peekable();
    while let Some(sign) = chars.next() {
        let active = match sign {
            '+' => true,
            '-' => false,
            other => {
                return Err(Error::validation(format!(
                    "trace: run must start with '+' or '-', found {other:?}"
                )))
            }
        };
        let mut digits = String::new();
        while let Some(c) = chars.peek().filter(|c| c.is_ascii_digit()) {
            digits.push(*c);
            chars.next();
        }
        let len: usize = digits
            .parse()
            .map_err(|_| Error::validation(format!("trace: bad run length {digits:?}")))?;
        if len == 0 {
            return Err(Error::validation("trace: run length must be positive"));
        }
        mask.extend(std::iter::repeat(active).take(len));
    }
    if mask.len() != width {
        return Err(Error::validation(format!(
            "trace: mask decodes to {} positions, expected {width}",
            mask.len()
        )));
    }
    Ok(mask)
}

impl TraceLog {
    /// Empty log for a run of the given shape.
    pub fn new(meta: TraceMeta) -> TraceLog {
        TraceLog { meta, events: Vec::new() }
    }

    /// Append the projection that replaced `prev` with `next` at `epoch`.
    pub fn record(
        &mut self,
        epoch: usize,
        prev: &[f64],
        next: &[f64],
        loss_before: f64,
        loss_after: f64,
    ) {
        assert_eq!(prev.len(), self.meta.width, "trace: event width mismatch");
        let mask = activity_mask(prev, next);
        let moved = mask.iter().filter(|&&m| m).count();
        self.events.push(TraceEvent { epoch, mask, moved, loss_before, loss_after });
    }

    /// Aggregate events into consecutive blocks of `window` events (the last
    /// block may be shorter).
    pub fn summarize(&self, window: usize) -> Result<Vec<WindowSummary>> {
        if window == 0 {
            return Err(Error::validation("trace: summary window must be at least 1"));
        }
        let mut out = Vec::new();
        for (b, block) in self.events.chunks(window).enumerate() {
            let mean_moved =
                block.iter().map(|e| e.moved as f64).sum::<f64>() / block.len() as f64;
            let pairs: Vec<(f64, f64)> = block
                .iter()
                .map(|e| (e.epoch as f64, e.loss_after))
                .collect();
            out.push(WindowSummary {
                first_event: b * window,
                events: block.len(),
                first_epoch: block.first().map_or(0, |e| e.epoch),
                last_epoch: block.last().map_or(0, |e| e.epoch),
                mean_moved,
                loss_slope: slope(&pairs),
            });
        }
        Ok(out)
    }

    /// Write the log as CSV: one row per event, the mask as signed run
    /// lengths.
    pub fn export_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# permutrain trace v1")?;
        writeln!(
            w,
            "# width={} strategy={} seed={} target={}",
            self.meta.width, self.meta.strategy, self.meta.seed, self.meta.target
        )?;
        writeln!(w, "epoch,moved,loss_before,loss_after,mask")?;
        for e in &self.events {
            writeln!(
                w,
                "{},{},{:.16e},{:.16e},{}",
                e.epoch,
                e.moved,
                e.loss_before,
                e.loss_after,
                mask_rle(&e.mask)
            )?;
        }
        Ok(())
    }
}

/// Run permutation-constrained training while logging every projection.
pub fn trace_training(
    net: ReluNet,
    data: &DataSet,
    cfg: &TrainConfig,
    strategy: &str,
    target: &str,
) -> Result<(TrainReport, TraceLog)> {
    let mut log = TraceLog::new(TraceMeta {
        width: net.width(),
        strategy: strategy.to_string(),
        seed: cfg.seed,
        target: target.to_string(),
    });
    let report = laperm_train_with(net, data, cfg, |epoch, prev, next, before, after| {
        log.record(epoch, prev, next, before, after);
    })?;
    Ok((report, log))
}

fn slope(pairs: &[(f64, f64)]) -> f64 {
    if pairs.len() < 2 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn meta(width: usize) -> TraceMeta {
        TraceMeta {
            width,
            strategy: "equidistant".to_string(),
            seed: 0,
            target: "sin1d".to_string(),
        }
    }

    #[test]
    fn activity_is_by_value_not_bit_pattern() {
        assert_eq!(activity_mask(&[1.0, -0.0], &[1.0, 0.0]), vec![false, false]);
        assert_eq!(activity_mask(&[1.0, 2.0], &[1.0, 2.5]), vec![false, true]);
    }

    #[test]
    fn unchanged_and_reversed_vectors_bound_the_moved_count() {
        let v: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut log = TraceLog::new(meta(10));
        log.record(1, &v, &v, 0.5, 0.5);
        let mut rev = v.clone();
        rev.reverse();
        log.record(2, &v, &rev, 0.5, 0.4);
        assert_eq!(log.events[0].moved, 0);
        assert!(log.events[0].mask.iter().all(|&m| !m));
        assert_eq!(log.events[1].moved, 10);
        assert!(log.events[1].mask.iter().all(|&m| m));
    }

    #[test]
    fn swapping_equal_values_registers_no_activity() {
        let prev = [0.25, 0.25, -1.0];
        let next = [0.25, 0.25, -1.0];
        let mut log = TraceLog::new(meta(3));
        log.record(1, &prev, &next, 0.1, 0.1);
        assert_eq!(log.events[0].moved, 0);
    }

    #[test]
    fn run_length_encoding_round_trips() {
        assert_eq!(mask_rle(&[false, false, true, true, true]), "-2+3");
        assert_eq!(mask_rle(&[]), "");
        assert_eq!(mask_rle(&[true; 5]), "+5");
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let w = rng.random_range(0..64);
            let mask: Vec<bool> = (0..w).map(|_| rng.random_bool(0.3)).collect();
            let enc = mask_rle(&mask);
            assert_eq!(parse_mask_rle(&enc, w).unwrap(), mask, "mask {enc}");
        }
        assert!(parse_mask_rle("+0", 0).is_err());
        assert!(parse_mask_rle("x3", 3).is_err());
        assert!(parse_mask_rle("+2", 3).is_err());
    }

    #[test]
    fn summaries_average_movement_and_fit_the_loss_trend() {
        let mut log = TraceLog::new(meta(4));
        // Losses fall linearly with epoch at rate -0.01 per epoch.
        for i in 0..25usize {
            let epoch = 5 * (i + 1);
            let moved = if i < 10 { 4 } else { 0 };
            let loss = 1.0 - 0.01 * epoch as f64;
            let prev = [0.0, 1.0, 2.0, 3.0];
            let next = if moved > 0 { [9.0, 8.0, 7.0, 6.0] } else { prev };
            log.record(epoch, &prev, &next, loss + 0.001, loss);
        }
        let windows = log.summarize(10).unwrap();
        assert_eq!(windows.len(), 3);
        assert_eq!(windows[0].events, 10);
        assert_eq!(windows[2].events, 5);
        assert!((windows[0].mean_moved - 4.0).abs() < 1e-12);
        assert!((windows[2].mean_moved - 0.0).abs() < 1e-12);
        for w in &windows {
            assert!((w.loss_slope + 0.01).abs() < 1e-12, "slope {}", w.loss_slope);
        }
        assert_eq!(windows[1].first_event, 10);
        assert_eq!(windows[1].first_epoch, 55);
        assert!(log.summarize(0).is_err());
    }

    #[test]
    fn csv_export_round_trips_through_the_rle_masks() {
        let mut log = TraceLog::new(meta(3));
        log.record(2, &[0.0, 1.0, 2.0], &[0.0, 2.0, 1.0], 0.75, 0.5);
        log.record(4, &[0.0, 2.0, 1.0], &[0.0, 2.0, 1.0], 0.5, 0.5);
        let mut buf = Vec::new();
        log.export_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# permutrain trace v1");
        assert!(lines.next().unwrap().contains("strategy=equidistant"));
        assert_eq!(lines.next().unwrap(), "epoch,moved,loss_before,loss_after,mask");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "2");
        assert_eq!(row[1], "2");
        assert_eq!(parse_mask_rle(row[4], 3).unwrap(), vec![false, true, true]);
        let row2: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row2[4], "-3");
    }

    #[test]
    fn traced_training_keeps_inactive_positions_at_their_original_values() {
        use crate::net::ReluNet;

        let n = 12;
        let locs: Vec<f64> = (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect();
        let net = ReluNet::paired_1d(&locs, (-1.0, 1.0)).unwrap();
        let theta0 = net.theta.clone();
        let mut rng = ChaCha12Rng::seed_from_u64(2022);
        let xs: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| (std::f64::consts::PI * x).sin()).collect();
        let data = DataSet::new(1, xs, ys).unwrap();
        let cfg = TrainConfig { epochs: 40, k: 5, seed: 8, ..TrainConfig::default() };
        let (report, log) = trace_training(net, &data, &cfg, "equidistant", "demo").unwrap();

        assert_eq!(log.events.len(), report.events.len());
        for (ev, tev) in report.events.iter().zip(&log.events) {
            assert_eq!(ev.moved, tev.moved);
            assert_eq!(ev.epoch, tev.epoch);
        }
        // A position that never shows activity still holds its starting
        // value in the trained network.
        for i in 0..2 * n {
            let ever_active = log.events.iter().any(|e| e.mask[i]);
            if !ever_active {
                assert!(
                    report.net.theta[i] == theta0[i],
                    "position {i} drifted from {} to {}",
                    theta0[i],
                    report.net.theta[i]
                );
            }
        }
    }
}
