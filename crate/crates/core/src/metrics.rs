//! Aggregation of per-slot records into the evaluation artifacts: empirical
//! CDFs, joint delay/drop bound tables, pairing ratios and file exports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Scheduling-slot mean delay bounds, ms, loosest first.
    pub delay_bounds_ms: Vec<f64>,
    /// Scheduling-slot drop ratio bounds, loosest first.
    pub drop_bounds: Vec<f64>,
    /// Grid points of the exported CDFs.
    pub cdf_points: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            delay_bounds_ms: vec![0.1, 0.075, 0.05, 0.025, 0.01],
            drop_bounds: vec![0.1, 0.01, 0.001, 0.0001, 0.00001],
            cdf_points: 200,
        }
    }
}

impl ReportConfig {
    pub fn validate(&self) -> Result<()> {
        let descending = |v: &[f64]| v.windows(2).all(|w| w[0] >= w[1]);
        if !descending(&self.delay_bounds_ms) || !descending(&self.drop_bounds) {
            return Err(Error::Config("report bounds must be sorted loosest first".into()));
        }
        if self.cdf_points < 2 {
            return Err(Error::Config("report.cdf_points must be >= 2".into()));
        }
        Ok(())
    }
}

/// Delay and drop ratio of one link over one scheduling slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedPoint {
    pub slot: u64,
    pub tx: u32,
    pub rx: u32,
    /// Mean of the per-slot mean delays; 0 when nothing was delivered.
    pub mean_delay_ms: f64,
    pub drop_ratio: f64,
    pub arrivals: u32,
    pub delivered: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub arrivals: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Packets still queued when their transmitter left the segment.
    pub flushed: u64,
    /// Packets queued at the end of the run.
    pub residual: u64,
    /// Slot-boundary queue checks where arrivals != delivered + dropped + queued.
    pub conservation_violations: u64,
    pub max_delay_ms: f64,
    /// Learned matchings scanned for blocking pairs.
    pub stability_checks: u64,
    /// Blocking pairs found by those scans.
    pub blocking_pairs: u64,
}

impl Counters {
    fn absorb(&mut self, o: &Counters) {
        self.arrivals += o.arrivals;
        self.delivered += o.delivered;
        self.dropped += o.dropped;
        self.flushed += o.flushed;
        self.residual += o.residual;
        self.conservation_violations += o.conservation_violations;
        self.max_delay_ms = self.max_delay_ms.max(o.max_delay_ms);
        self.stability_checks += o.stability_checks;
        self.blocking_pairs += o.blocking_pairs;
    }

    /// Delivered over delivered plus dropped; 1 when nothing was decided.
    pub fn success_ratio(&self) -> f64 {
        let decided = self.delivered + self.dropped;
        if decided == 0 {
            1.0
        } else {
            self.delivered as f64 / decided as f64
        }
    }
}

/// Everything a run records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub method: String,
    pub deadline_ms: f64,
    pub slots: u64,
    pub scheduling_events: u64,
    /// Rate of every active link in every transmission slot, bits/s.
    pub rate_samples_bps: Vec<f64>,
    /// Delay of every delivered packet, ms.
    pub delays_ms: Vec<f64>,
    pub points: Vec<SchedPoint>,
    /// Fraction of transmitters matched, per scheduling slot.
    pub pairing: Vec<f64>,
    /// Global-best fitness per iteration of every swarm run.
    pub pso_traces: Vec<Vec<f64>>,
    pub counters: Counters,
}

impl MetricsBundle {
    /// Concatenates the samples of several bundles.
    pub fn merge(bundles: &[MetricsBundle]) -> MetricsBundle {
        let mut out = MetricsBundle::default();
        for (k, b) in bundles.iter().enumerate() {
            if k == 0 {
                out.config_hash.clone_from(&b.config_hash);
                out.method.clone_from(&b.method);
                out.deadline_ms = b.deadline_ms;
            } else if out.config_hash != b.config_hash {
                out.config_hash = "mixed".into();
            }
            out.seeds.extend(&b.seeds);
            out.slots += b.slots;
            out.scheduling_events += b.scheduling_events;
            out.rate_samples_bps.extend(&b.rate_samples_bps);
            out.delays_ms.extend(&b.delays_ms);
            out.points.extend(&b.points);
            out.pairing.extend(&b.pairing);
            out.pso_traces.extend(b.pso_traces.iter().cloned());
            out.counters.absorb(&b.counters);
        }
        out
    }

    pub fn pairing_ratio(&self) -> f64 {
        pairing_ratio(&self.pairing)
    }

    pub fn joint_table(&self, cfg: &ReportConfig) -> JointTable {
        let pts: Vec<(f64, f64)> = self.points.iter().map(|p| (p.mean_delay_ms, p.drop_ratio)).collect();
        joint_bound_table(&pts, &cfg.delay_bounds_ms, &cfg.drop_bounds)
    }

    /// Mean per-point success ratio over scheduling slots.
    pub fn mean_point_success(&self) -> f64 {
        if self.points.is_empty() {
            return 1.0;
        }
        self.points.iter().map(|p| 1.0 - p.drop_ratio).sum::<f64>() / self.points.len() as f64
    }

    pub fn summary(&self, cfg: &ReportConfig) -> Summary {
        Summary {
            config_hash: self.config_hash.clone(),
            seeds: self.seeds.clone(),
            method: self.method.clone(),
            slots: self.slots,
            scheduling_events: self.scheduling_events,
            deadline_ms: self.deadline_ms,
            rate_bps: Stats::of(&self.rate_samples_bps),
            delay_ms: Stats::of(&self.delays_ms),
            success_ratio: self.counters.success_ratio(),
            mean_link_success_ratio: self.mean_point_success(),
            pairing_ratio: self.pairing_ratio(),
            counters: self.counters.clone(),
            joint_bounds: self.joint_table(cfg).rounded(),
        }
    }

    /// Writes every export into `dir`, creating it if needed.
    pub fn write_outputs(&self, dir: &Path, cfg: &ReportConfig) -> Result<()> {
        fs::create_dir_all(dir)?;
        let header = format!("# config_hash={}\n# seeds={:?}\n", self.config_hash, self.seeds);
        for (name, samples) in [("cdf_rate.csv", &self.rate_samples_bps), ("cdf_delay.csv", &self.delays_ms)] {
            let mut s = header.clone();
            s.push_str("value,cdf\n");
            if !samples.is_empty() {
                for (v, f) in cdf(samples, &linear_grid(samples, cfg.cdf_points))? {
                    writeln!(s, "{v},{f}").unwrap();
                }
            }
            fs::write(dir.join(name), s)?;
        }
        let mut s = header;
        s.push_str("slot,tx,rx,mean_delay_ms,drop_ratio,arrivals,delivered\n");
        for p in &self.points {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                p.slot, p.tx, p.rx, p.mean_delay_ms, p.drop_ratio, p.arrivals, p.delivered
            )
            .unwrap();
        }
        fs::write(dir.join("scatter_delay_drop.csv"), s)?;
        let table = TableExport {
            config_hash: self.config_hash.clone(),
            seeds: self.seeds.clone(),
            table: self.joint_table(cfg).rounded(),
        };
        fs::write(dir.join("table_joint_bounds.json"), serde_json::to_string_pretty(&table)? + "\n")?;
        fs::write(dir.join("summary.json"), self.summary(cfg).to_json()?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableExport {
    config_hash: String,
    seeds: Vec<u64>,
    table: JointTable,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub p05: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(samples: &[f64]) -> Stats {
        if samples.is_empty() {
            return Stats::default();
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        Stats {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p05: quantile(&v, 0.05),
            p50: quantile(&v, 0.5),
            p95: quantile(&v, 0.95),
            max: v[v.len() - 1],
        }
    }
}

/// Nearest-rank quantile of sorted samples.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub method: String,
    pub slots: u64,
    pub scheduling_events: u64,
    pub deadline_ms: f64,
    pub rate_bps: Stats,
    pub delay_ms: Stats,
    pub success_ratio: f64,
    pub mean_link_success_ratio: f64,
    pub pairing_ratio: f64,
    pub counters: Counters,
    pub joint_bounds: JointTable,
}

impl Summary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Right-continuous empirical CDF of `samples` at each grid value.
pub fn cdf(samples: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("cdf samples"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(grid
        .iter()
        .map(|&g| (g, v.partition_point(|&x| x <= g) as f64 / n))
        .collect())
}

/// `points` evenly spaced values spanning the sample range.
pub fn linear_grid(samples: &[f64], points: usize) -> Vec<f64> {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Vec::new();
    }
    if points < 2 || lo == hi {
        return vec![lo];
    }
    let mut g: Vec<f64> = (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect();
    g[points - 1] = hi;
    g
}

/// Share of scheduling slots meeting each (delay, drop) bound pair, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    pub delay_bounds_ms: Vec<f64>,
    pub drop_bounds: Vec<f64>,
    /// `cells[d][g]` for delay bound `d` and drop bound `g`.
    pub cells: Vec<Vec<f64>>,
    pub points: usize,
}

impl JointTable {
    /// Cells rounded to two decimals.
    pub fn rounded(mut self) -> Self {
        for row in &mut self.cells {
            for c in row {
                *c = (*c * 100.0).round() / 100.0;
            }
        }
        self
    }
}

pub fn joint_bound_table(points: &[(f64, f64)], delay_bounds: &[f64], drop_bounds: &[f64]) -> JointTable {
    let cells = delay_bounds
        .iter()
        .map(|&d| {
            drop_bounds
                .iter()
                .map(|&g| {
                    if points.is_empty() {
                        return 0.0;
                    }
                    let n = points.iter().filter(|&&(pd, pg)| pd <= d && pg <= g).count();
                    100.0 * n as f64 / points.len() as f64
                })
                .collect()
        })
        .collect();
    JointTable {
        delay_bounds_ms: delay_bounds.to_vec(),
        drop_bounds: drop_bounds.to_vec(),
        cells,
        points: points.len(),
    }
}

/// Time average of the per-scheduling-slot matched fractions.
pub fn pairing_ratio(fractions: &[f64]) -> f64 {
    if fractions.is_empty() {
        0.0
    } else {
        fractions.iter().sum::<f64>() / fractions.len() as f64
    }
}
