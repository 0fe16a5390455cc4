//! Discrete-event engine running a whole network in either MAC mode, plus
//! the four-cell mode × interference comparison.

mod engine;
pub mod event;
pub mod reception;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{mean, median, MetricsRecord, Summary};
use crate::scenario::ScenarioConfig;
use crate::tschmac::MacMode;
use crate::types::NodeId;

/// One row of `events.csv`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub t_us: u64,
    pub node: NodeId,
    pub event: &'static str,
    pub detail: String,
}

/// One node's view of one flood.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FloodRow {
    pub flood_idx: u64,
    pub node: NodeId,
    pub reached: bool,
    pub first_rx_uslot: Option<u32>,
    pub relay_cnt: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DaoRow {
    pub node: NodeId,
    pub event: &'static str,
    pub t_us: u64,
    pub hops: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSummary {
    pub node: NodeId,
    /// Hop distance from the coordinator.
    pub hops: Option<u32>,
    pub drift_ppb: i64,
    pub association_latency_us: Option<u64>,
    pub dao_delta_us: Option<u64>,
    pub delivered: u32,
    pub lost: u32,
    pub max_sync_error_ns: i64,
    pub desyncs: u32,
    pub parent: Option<NodeId>,
    pub rank: Option<u16>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub trace: Vec<TraceRow>,
    pub floods: Vec<FloodRow>,
    pub dao: Vec<DaoRow>,
    pub nodes: Vec<NodeSummary>,
    pub metrics: MetricsRecord,
}

impl RunResult {
    pub fn summary(&self) -> Summary {
        self.metrics.summary()
    }

    /// Largest |sync error| seen by any node, in microseconds.
    pub fn max_sync_error_us(&self) -> f64 {
        self.nodes.iter().map(|n| n.max_sync_error_ns).max().unwrap_or(0) as f64 / 1_000.0
    }

    pub fn first_desync_us(&self) -> Option<u64> {
        self.trace.iter().find(|r| r.event == "desync").map(|r| r.t_us)
    }
}

/// Runs one scenario to completion. The config is validated first.
pub fn run(cfg: &ScenarioConfig) -> Result<RunResult> {
    let topo = cfg.validate()?;
    engine::Engine::new(cfg, topo)?.run()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixRow {
    pub mode: MacMode,
    pub jam: bool,
    pub seed: u64,
    pub reliability_pct: f64,
    pub mean_latency_ms: Option<f64>,
    pub median_latency_ms: Option<f64>,
}

/// Across-seed aggregate of one (mode, jam) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixCell {
    pub mode: MacMode,
    pub jam: bool,
    pub runs: usize,
    pub reliability_pct: f64,
    pub mean_latency_ms: Option<f64>,
    pub median_latency_ms: Option<f64>,
    pub latency_sd_ms: Option<f64>,
}

pub const MATRIX_CELLS: [(MacMode, bool); 4] = [
    (MacMode::SixPp, false),
    (MacMode::Baseline6TischMinimal, false),
    (MacMode::SixPp, true),
    (MacMode::Baseline6TischMinimal, true),
];

/// Runs every (mode, jam, seed) cell in parallel. Rows come back in cell
/// order, then seed order, independent of scheduling.
pub fn run_matrix(base: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<MatrixRow>> {
    if seeds.is_empty() {
        return Err(Error::NoSeeds);
    }
    let jobs: Vec<(MacMode, bool, u64)> = MATRIX_CELLS
        .iter()
        .flat_map(|&(m, j)| seeds.iter().map(move |&s| (m, j, s)))
        .collect();
    jobs.par_iter()
        .map(|&(mode, jam, seed)| {
            let mut cfg = base.clone();
            cfg.run.mode = mode;
            cfg.run.seed = seed;
            cfg.jammer.enabled = jam;
            let r = run(&cfg)?;
            let s = r.summary();
            Ok(MatrixRow {
                mode,
                jam,
                seed,
                reliability_pct: s.reliability_pct.unwrap_or(0.0),
                mean_latency_ms: s.latency_ms.as_ref().map(|l| l.mean),
                median_latency_ms: s.latency_ms.as_ref().map(|l| l.median),
            })
        })
        .collect()
}

pub fn summarize_matrix(rows: &[MatrixRow]) -> Vec<MatrixCell> {
    MATRIX_CELLS
        .iter()
        .filter_map(|&(mode, jam)| {
            let cell: Vec<&MatrixRow> = rows.iter().filter(|r| r.mode == mode && r.jam == jam).collect();
            if cell.is_empty() {
                return None;
            }
            let rel: Vec<f64> = cell.iter().map(|r| r.reliability_pct).collect();
            let means: Vec<f64> = cell.iter().filter_map(|r| r.mean_latency_ms).collect();
            let medians: Vec<f64> = cell.iter().filter_map(|r| r.median_latency_ms).collect();
            let sd = mean(&means).filter(|_| means.len() > 1).map(|m| {
                (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
            });
            Some(MatrixCell {
                mode,
                jam,
                runs: cell.len(),
                reliability_pct: mean(&rel).unwrap_or(0.0),
                mean_latency_ms: mean(&means),
                median_latency_ms: median(&medians),
                latency_sd_ms: sd,
            })
        })
        .collect()
}
