//! Scenario files: flat `key = value` sections (TOML), validated before a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{CtTiming, PhyMode};
use crate::rpl::RplConfig;
use crate::schedule::{build_layout, CtWindow, HoppingConfig, SlotframeLayout, DEFAULT_SLOT_US};
use crate::sim::reception::{CaptureModel, JammerConfig, ReceptionModel};
use crate::topology::{make_grid_topology, make_line_topology, make_random_geometric_topology, Topology};
use crate::tschmac::{MacConfig, MacMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub run: RunSection,
    pub topology: TopologySpec,
    #[serde(default)]
    pub slotframe: SlotframeSection,
    #[serde(default)]
    pub ct: CtSection,
    #[serde(default)]
    pub hopping: HoppingConfig,
    #[serde(default)]
    pub mac: MacConfig,
    #[serde(default)]
    pub rpl: RplConfig,
    #[serde(default)]
    pub app: AppSection,
    #[serde(default)]
    pub reception: ReceptionSection,
    #[serde(default)]
    pub clock: ClockSection,
    #[serde(default)]
    pub jammer: JammerSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: MacMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub duration_s: u64,
    /// Relative paths resolve against the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Record one row per node per flood.
    #[serde(default)]
    pub flood_trace: bool,
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Line {
        nodes: usize,
        prr: f64,
    },
    Grid {
        rows: usize,
        cols: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
        #[serde(default)]
        diagonal: bool,
        prr: f64,
    },
    /// Random geometric graph in the unit square.
    Rgg {
        nodes: usize,
        radius: f64,
        prr: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_diameter: Option<u32>,
        #[serde(default = "default_seed")]
        topo_seed: u64,
    },
    /// Directed `src dst prr` edge list.
    Edges { path: PathBuf },
}

impl TopologySpec {
    pub fn build(&self) -> Result<Topology> {
        match self {
            TopologySpec::Line { nodes, prr } => make_line_topology(*nodes, *prr),
            TopologySpec::Grid { rows, cols, count, diagonal, prr } => {
                make_grid_topology(*rows, *cols, *count, *diagonal, *prr)
            }
            TopologySpec::Rgg { nodes, radius, prr, max_diameter, topo_seed } => {
                make_random_geometric_topology(*nodes, *radius, *prr, *max_diameter, *topo_seed)
            }
            TopologySpec::Edges { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("edge list {}: {e}", path.display())))?;
                Topology::from_edge_list(&text)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlotframeSection {
    /// 6PP slotframe length; the baseline uses `mac.baseline_slotframe`.
    pub slots: u64,
    pub slot_us: u64,
}

impl Default for SlotframeSection {
    fn default() -> Self {
        SlotframeSection { slots: 101, slot_us: DEFAULT_SLOT_US }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CtSection {
    pub phy: PhyMode,
    pub n_tx: u32,
    pub n_h: u32,
    pub floods_per_frame: u32,
    pub ramp_up_us: u64,
    pub overhead_bytes: u32,
    pub payload_bytes: u32,
    /// Floods that carry each DATA message.
    pub data_repeats: u32,
}

impl Default for CtSection {
    fn default() -> Self {
        let t = CtTiming::default();
        CtSection {
            phy: t.phy,
            n_tx: 2,
            n_h: 11,
            floods_per_frame: 1,
            ramp_up_us: t.ramp_up_us,
            overhead_bytes: t.overhead_bytes,
            payload_bytes: t.payload_bytes,
            data_repeats: 1,
        }
    }
}

impl CtSection {
    pub fn timing(&self) -> CtTiming {
        CtTiming {
            phy: self.phy,
            ramp_up_us: self.ramp_up_us,
            overhead_bytes: self.overhead_bytes,
            payload_bytes: self.payload_bytes,
        }
    }

    pub fn window(&self) -> CtWindow {
        CtWindow::new(self.n_tx, self.n_h, &self.timing(), self.floods_per_frame)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppSection {
    pub period_ms: u64,
    pub start_s: u64,
    /// Last generation instant; defaults to the end of the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_s: Option<u64>,
    pub enabled: bool,
}

impl Default for AppSection {
    fn default() -> Self {
        AppSection { period_ms: 5_000, start_s: 0, stop_s: None, enabled: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceptionSection {
    /// γ(k) = 1 up to this many concurrent transmitters, `capture_gamma` beyond.
    pub capture_threshold: u32,
    pub capture_gamma: f64,
}

impl Default for ReceptionSection {
    fn default() -> Self {
        ReceptionSection { capture_threshold: 3, capture_gamma: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClockSection {
    /// Each node draws its drift uniformly from `±drift_ppm`.
    pub drift_ppm: f64,
    /// Off: nodes keep the timing taken at association and drift until they
    /// desync. On: 6PP resyncs on every flood, the baseline on exchanges with
    /// its time source.
    pub resync: bool,
}

impl Default for ClockSection {
    fn default() -> Self {
        ClockSection { drift_ppm: 40.0, resync: true }
    }
}

impl ReceptionSection {
    pub fn capture(&self) -> CaptureModel {
        CaptureModel::Step { threshold: self.capture_threshold, low: self.capture_gamma }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JammerSection {
    pub enabled: bool,
    pub channels: Vec<u8>,
    pub jam_loss: f64,
    pub windows_us: Vec<(u64, u64)>,
}

impl Default for JammerSection {
    fn default() -> Self {
        let j = JammerConfig::default();
        JammerSection { enabled: false, channels: j.channels, jam_loss: j.jam_loss, windows_us: j.windows_us }
    }
}

impl JammerSection {
    pub fn config(&self) -> Option<JammerConfig> {
        self.enabled.then(|| JammerConfig {
            channels: self.channels.clone(),
            jam_loss: self.jam_loss,
            windows_us: self.windows_us.clone(),
        })
    }
}

impl ScenarioConfig {
    /// A short lossless line, handy as a starting point.
    pub fn minimal(mode: MacMode, nodes: usize) -> Self {
        ScenarioConfig {
            run: RunSection { mode, seed: 1, duration_s: 60, out_dir: None, flood_trace: false },
            topology: TopologySpec::Line { nodes, prr: 1.0 },
            slotframe: SlotframeSection::default(),
            ct: CtSection::default(),
            hopping: HoppingConfig::default(),
            mac: MacConfig::default(),
            rpl: RplConfig::default(),
            app: AppSection::default(),
            reception: ReceptionSection::default(),
            clock: ClockSection::default(),
            jammer: JammerSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        // edge lists are looked up next to the scenario file
        if let TopologySpec::Edges { path: p } = &mut cfg.topology {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn reception_model(&self) -> ReceptionModel {
        ReceptionModel { capture: self.reception.capture(), jammer: self.jammer.config() }
    }

    /// Active layout: the CT-headed slotframe in 6PP, one shared slot of a
    /// `baseline_slotframe`-slot frame otherwise.
    pub fn layout(&self) -> Result<SlotframeLayout> {
        match self.run.mode {
            MacMode::SixPp => build_layout(self.slotframe.slots, self.ct.window(), self.slotframe.slot_us),
            MacMode::Baseline6TischMinimal => {
                build_layout(self.mac.baseline_slotframe, CtWindow::disabled(), self.slotframe.slot_us)
            }
        }
    }

    pub fn app_stop_us(&self) -> u64 {
        self.app.stop_s.unwrap_or(self.run.duration_s) * 1_000_000
    }

    /// Checks everything a run depends on and builds the topology.
    pub fn validate(&self) -> Result<Topology> {
        let bad = |m: String| Err(Error::Config(m));
        if self.run.duration_s == 0 {
            return bad("run.duration_s must be positive".into());
        }
        if self.slotframe.slot_us == 0 || self.slotframe.slots == 0 || self.mac.baseline_slotframe == 0 {
            return bad("slotframe lengths must be positive".into());
        }
        if self.ct.n_tx == 0 || self.ct.n_h == 0 {
            return bad("ct.n_tx and ct.n_h must be at least 1".into());
        }
        if self.run.mode == MacMode::SixPp && (self.ct.floods_per_frame == 0 || self.ct.data_repeats == 0) {
            return bad("6pp needs ct.floods_per_frame and ct.data_repeats >= 1".into());
        }
        if self.app.enabled && self.app.period_ms == 0 {
            return bad("app.period_ms must be positive".into());
        }
        if self.mac.eb_period_ms == 0 || self.mac.ka_period_ms == 0 || self.mac.eb_jitter_pct >= 100 {
            return bad("mac periods must be positive and eb_jitter_pct below 100".into());
        }
        if self.mac.min_be == 0 || self.mac.min_be > self.mac.max_be || self.mac.max_be > 16 {
            return bad("need 1 <= mac.min_be <= mac.max_be <= 16".into());
        }
        if self.rpl.dao_timeout_ms == 0 || self.rpl.parent_check_ms == 0 {
            return bad("rpl timers must be positive".into());
        }
        if !(0.0..=200.0).contains(&self.clock.drift_ppm) {
            return bad(format!("drift_ppm {} outside [0, 200]", self.clock.drift_ppm));
        }
        self.hopping.validate()?;
        self.reception.capture().validate()?;
        if let Some(j) = self.jammer.config() {
            j.validate()?;
        }
        self.layout()?;
        let topo = self.topology.build()?;
        if topo.node_count() < 2 {
            return bad("topology needs at least two nodes".into());
        }
        Ok(topo)
    }
}
