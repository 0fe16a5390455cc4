//! Probabilistic reception for both MAC planes, with capture and a
//! narrowband jammer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Channel, Frame, NodeId, SimTime};

/// Success multiplier γ(k) for `k` concurrent CT transmitters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaptureModel {
    /// γ(k) = 1 for k <= threshold, `low` beyond.
    Step { threshold: u32, low: f64 },
    Constant { gamma: f64 },
}

impl Default for CaptureModel {
    fn default() -> Self {
        CaptureModel::Step { threshold: 3, low: 0.9 }
    }
}

impl CaptureModel {
    pub fn gamma(&self, k: usize) -> f64 {
        match *self {
            CaptureModel::Step { threshold, low } => {
                if k <= threshold as usize {
                    1.0
                } else {
                    low
                }
            }
            CaptureModel::Constant { gamma } => gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = match *self {
            CaptureModel::Step { low, .. } => low,
            CaptureModel::Constant { gamma } => gamma,
        };
        if (0.0..=1.0).contains(&g) {
            Ok(())
        } else {
            Err(Error::Config(format!("capture gamma {g} outside [0,1]")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JammerConfig {
    pub channels: Vec<Channel>,
    pub jam_loss: f64,
    /// Active `[start, end)` windows in microseconds; empty means always on.
    #[serde(default)]
    pub windows_us: Vec<(u64, u64)>,
}

impl Default for JammerConfig {
    /// Two of the sixteen TSCH channels and one of the three CT channels.
    fn default() -> Self {
        JammerConfig {
            channels: vec![15, 20, 38],
            jam_loss: 1.0,
            windows_us: Vec::new(),
        }
    }
}

impl JammerConfig {
    pub fn is_active(&self, t: SimTime) -> bool {
        self.windows_us.is_empty() || self.windows_us.iter().any(|&(s, e)| s <= t.0 && t.0 < e)
    }

    /// Multiplier applied to the success probability on `ch` at `t`.
    pub fn factor(&self, ch: Channel, t: SimTime) -> f64 {
        if self.channels.contains(&ch) && self.is_active(t) {
            1.0 - self.jam_loss
        } else {
            1.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.jam_loss) {
            return Err(Error::Config(format!("jam_loss {} outside [0,1]", self.jam_loss)));
        }
        if self.windows_us.iter().any(|&(s, e)| s >= e) {
            return Err(Error::Config("jammer window with start >= end".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReceptionModel {
    pub capture: CaptureModel,
    pub jammer: Option<JammerConfig>,
}

impl ReceptionModel {
    pub fn jam_factor(&self, ch: Channel, t: SimTime) -> f64 {
        self.jammer.as_ref().map_or(1.0, |j| j.factor(ch, t))
    }

    /// `γ(|S|) * (1 - Π(1 - PRR_t)) * jam`.
    pub fn ct_probability(&self, prrs: &[f64], ch: Channel, t: SimTime) -> f64 {
        if prrs.is_empty() {
            return 0.0;
        }
        let miss: f64 = prrs.iter().map(|p| 1.0 - p).product();
        self.capture.gamma(prrs.len()) * (1.0 - miss) * self.jam_factor(ch, t)
    }

    /// CT plane: all heard transmitters must carry the same frame. `u` is the
    /// receiver's uniform draw for this micro-slot.
    pub fn resolve_ct(
        &self,
        receiver: NodeId,
        frames: &[&Frame],
        prrs: &[f64],
        ch: Channel,
        t: SimTime,
        u: f64,
    ) -> Result<bool> {
        if frames.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::DivergentPayload { receiver });
        }
        Ok(u < self.ct_probability(prrs, ch, t))
    }

    /// TSCH plane: two or more in-range transmitters always collide. Returns
    /// the index of the decoded transmitter. `draw` is called only when there
    /// is exactly one candidate.
    pub fn resolve_tsch(
        &self,
        prrs: &[f64],
        ch: Channel,
        t: SimTime,
        draw: impl FnOnce() -> f64,
    ) -> Option<usize> {
        match prrs {
            [p] if draw() < p * self.jam_factor(ch, t) => Some(0),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FrameMeta;

    fn f(seq: u32) -> Frame {
        Frame::new(NodeId(0), NodeId::BROADCAST, seq, SimTime::ZERO, FrameMeta::Data { app_seq: seq })
    }

    #[test]
    fn ct_single_perfect_link() {
        let m = ReceptionModel::default();
        let fr = f(1);
        for u in [0.0, 0.5, 0.999_999] {
            assert!(m.resolve_ct(NodeId(1), &[&fr], &[1.0], 37, SimTime::ZERO, u).unwrap());
        }
    }

    #[test]
    fn ct_two_transmitters() {
        let m = ReceptionModel::default();
        let p = m.ct_probability(&[0.8, 0.8], 37, SimTime::ZERO);
        assert!((p - 0.96).abs() < 1e-12);
        // four transmitters fall under the capture penalty
        let p4 = m.ct_probability(&[1.0; 4], 37, SimTime::ZERO);
        assert!((p4 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn ct_divergent_payload() {
        let m = ReceptionModel::default();
        let (a, b) = (f(1), f(2));
        assert!(matches!(
            m.resolve_ct(NodeId(3), &[&a, &b], &[1.0, 1.0], 37, SimTime::ZERO, 0.1),
            Err(Error::DivergentPayload { .. })
        ));
    }

    #[test]
    fn tsch_collision() {
        let m = ReceptionModel::default();
        let mut drawn = false;
        assert_eq!(m.resolve_tsch(&[1.0, 1.0], 11, SimTime::ZERO, || { drawn = true; 0.0 }), None);
        assert!(!drawn);
        assert_eq!(m.resolve_tsch(&[1.0], 11, SimTime::ZERO, || 0.3), Some(0));
        assert_eq!(m.resolve_tsch(&[], 11, SimTime::ZERO, || 0.3), None);
    }

    #[test]
    fn jammer_windows() {
        let j = JammerConfig {
            channels: vec![38],
            jam_loss: 1.0,
            windows_us: vec![(1_000, 2_000)],
        };
        let m = ReceptionModel { jammer: Some(j), ..Default::default() };
        assert_eq!(m.ct_probability(&[1.0], 38, SimTime(1_500)), 0.0);
        assert_eq!(m.ct_probability(&[1.0], 38, SimTime(2_000)), 1.0);
        assert_eq!(m.ct_probability(&[1.0], 37, SimTime(1_500)), 1.0);
    }

    #[test]
    fn gamma_bounds() {
        assert!(CaptureModel::Constant { gamma: 1.2 }.validate().is_err());
        let g = CaptureModel::default();
        assert!((1..10).all(|k| g.gamma(k) >= g.gamma(k + 1)));
    }
}
