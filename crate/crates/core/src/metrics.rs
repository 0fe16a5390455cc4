//! Per-run metric records and their aggregation.

use std::collections::BTreeMap;

use crate::types::{FrameKind, NodeId, SimTime};

/// Fate of one DATA message at one destination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub app_seq: u32,
    pub dest: NodeId,
    pub generated_at: SimTime,
    pub delivered_at: Option<SimTime>,
}

impl Delivery {
    pub fn latency_us(&self) -> Option<u64> {
        self.delivered_at.map(|t| t.since(self.generated_at))
    }
}

/// Frames that occupied a shared slot, per kind.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ControlCounts {
    pub shared: BTreeMap<FrameKind, u64>,
    pub floods: u64,
}

impl ControlCounts {
    pub fn count(&mut self, kind: FrameKind) {
        *self.shared.entry(kind).or_default() += 1;
    }

    pub fn get(&self, kind: FrameKind) -> u64 {
        self.shared.get(&kind).copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsRecord {
    /// Indexed by node id; `None` for the coordinator and unassociated nodes.
    pub association_latency_us: Vec<Option<u64>>,
    pub dao_delta_us: Vec<Option<u64>>,
    pub deliveries: Vec<Delivery>,
    pub control: ControlCounts,
}

impl MetricsRecord {
    pub fn new(node_count: usize) -> Self {
        MetricsRecord {
            association_latency_us: vec![None; node_count],
            dao_delta_us: vec![None; node_count],
            ..Default::default()
        }
    }

    /// Records the first association only.
    pub fn record_association(&mut self, node: NodeId, latency_us: u64) -> bool {
        let slot = &mut self.association_latency_us[node.index()];
        if slot.is_some() {
            return false;
        }
        *slot = Some(latency_us);
        true
    }

    pub fn record_dao_delta(&mut self, node: NodeId, delta_us: u64) {
        self.dao_delta_us[node.index()].get_or_insert(delta_us);
    }

    pub fn delivered(&self) -> usize {
        self.deliveries.iter().filter(|d| d.delivered_at.is_some()).count()
    }

    pub fn summary(&self) -> Summary {
        let lat: Vec<f64> = self
            .deliveries
            .iter()
            .filter_map(|d| d.latency_us())
            .map(|us| us as f64 / 1_000.0)
            .collect();
        aggregate(&lat, self.deliveries.len(), &self.control)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatencyStats {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    /// `None` is the empty-summary marker: nothing was delivered.
    pub latency_ms: Option<LatencyStats>,
    pub expected: usize,
    pub delivered: usize,
    /// `None` when nothing was expected.
    pub reliability_pct: Option<f64>,
    pub control: ControlCounts,
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    quantiles(xs).map(|(m, _)| m)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Median (mid-pair average) and nearest-rank p95.
fn quantiles(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let v = sorted(xs);
    let n = v.len();
    let med = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    let rank = (0.95 * n as f64).ceil() as usize;
    Some((med, v[rank.clamp(1, n) - 1]))
}

/// Latency statistics over delivered messages, reliability over all
/// expected (message, destination) pairs.
pub fn aggregate(latencies_ms: &[f64], expected: usize, control: &ControlCounts) -> Summary {
    let latency_ms = quantiles(latencies_ms).map(|(median, p95)| LatencyStats {
        mean: mean(latencies_ms).unwrap_or(0.0),
        median,
        p95,
    });
    Summary {
        latency_ms,
        expected,
        delivered: latencies_ms.len(),
        reliability_pct: (expected > 0).then(|| 100.0 * latencies_ms.len() as f64 / expected as f64),
        control: control.clone(),
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with tied ranks averaged. `None` if either
/// side is constant or the inputs are shorter than two.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "spearman inputs differ in length");
    if x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}
