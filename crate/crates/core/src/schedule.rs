//! Slotframe layout with a CT-reserved head region, and channel hopping for
//! both the TSCH and the CT plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{ct_micro_slot_duration, messages_per_slotframe, CtTiming};
use crate::types::{Asn, Channel, SimTime};

pub const DEFAULT_SLOT_US: u64 = 10_000;

/// CT floods reserved at the head of each slotframe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CtWindow {
    pub n_tx: u32,
    pub n_h: u32,
    pub micro_slot_us: u64,
    /// Zero disables the CT plane entirely.
    pub floods_per_frame: u32,
}

impl CtWindow {
    pub fn new(n_tx: u32, n_h: u32, timing: &CtTiming, floods_per_frame: u32) -> Self {
        CtWindow {
            n_tx,
            n_h,
            micro_slot_us: ct_micro_slot_duration(timing),
            floods_per_frame,
        }
    }

    pub fn disabled() -> Self {
        CtWindow {
            n_tx: 1,
            n_h: 1,
            micro_slot_us: 0,
            floods_per_frame: 0,
        }
    }

    pub fn micro_slots_per_flood(&self) -> u32 {
        self.n_tx + self.n_h
    }

    pub fn flood_duration_us(&self) -> u64 {
        self.micro_slot_us * self.micro_slots_per_flood() as u64
    }

    /// Total span of the CT region, Δ_CT.
    pub fn delta_us(&self) -> u64 {
        self.flood_duration_us() * self.floods_per_frame as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SlotRole {
    Ct,
    Shared,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotframeLayout {
    pub slot_duration_us: u64,
    pub total_slots: u64,
    pub ct_reserved_slots: u64,
    pub shared_slots: u64,
    pub ct_window: CtWindow,
}

impl SlotframeLayout {
    /// Slotframe duration τ_SF; the CT flooding period equals it.
    pub fn tau_sf_us(&self) -> u64 {
        self.total_slots * self.slot_duration_us
    }

    pub fn slot_index(&self, asn: Asn) -> u64 {
        asn.0 % self.total_slots
    }

    pub fn slot_start(&self, asn: Asn) -> SimTime {
        SimTime(asn.0 * self.slot_duration_us)
    }

    /// Index of the slotframe containing `asn`.
    pub fn frame_index(&self, asn: Asn) -> u64 {
        asn.0 / self.total_slots
    }

    pub fn has_ct(&self) -> bool {
        self.ct_reserved_slots > 0 && self.ct_window.floods_per_frame > 0
    }
}

fn reserved_slots(delta_us: u64, slot_duration_us: u64) -> u64 {
    delta_us.div_ceil(slot_duration_us)
}

/// Lays out a slotframe of `total_slots` with the CT window at its head and
/// shared slots filling the remainder.
pub fn build_layout(total_slots: u64, ct_window: CtWindow, slot_duration_us: u64) -> Result<SlotframeLayout> {
    if total_slots == 0 || slot_duration_us == 0 {
        return Err(Error::Config("slotframe needs at least one slot of non-zero length".into()));
    }
    let delta = ct_window.delta_us();
    let needed = reserved_slots(delta, slot_duration_us);
    if needed > total_slots {
        return Err(Error::WindowTooLarge {
            window_us: delta,
            needed,
            total: total_slots,
        });
    }
    if ct_window.floods_per_frame > 0 && ct_window.flood_duration_us() > 0 {
        // floods_per_frame never exceeds the capacity of the reserved span
        debug_assert!(
            ct_window.floods_per_frame as u64 <= needed * slot_duration_us / ct_window.flood_duration_us()
        );
    }
    Ok(SlotframeLayout {
        slot_duration_us,
        total_slots,
        ct_reserved_slots: needed,
        shared_slots: total_slots - needed,
        ct_window,
    })
}

/// Checks a window against the capacity bound for the time it reserves.
pub fn window_fits(window: &CtWindow, timing: &CtTiming, reserved_us: u64) -> bool {
    window.floods_per_frame == 0
        || window.floods_per_frame as u64 <= messages_per_slotframe(reserved_us, timing, window.n_tx, window.n_h)
}

pub fn slot_role(layout: &SlotframeLayout, asn: Asn) -> SlotRole {
    if layout.slot_index(asn) < layout.ct_reserved_slots {
        SlotRole::Ct
    } else {
        SlotRole::Shared
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoppingConfig {
    pub tsch_channels: Vec<Channel>,
    pub ct_channels: Vec<Channel>,
    pub tsch_offset: u64,
    pub ct_offset: u64,
}

impl Default for HoppingConfig {
    fn default() -> Self {
        HoppingConfig {
            tsch_channels: (11..=26).collect(),
            ct_channels: vec![37, 38, 39],
            tsch_offset: 0,
            ct_offset: 0,
        }
    }
}

impl HoppingConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, list) in [("tsch_channels", &self.tsch_channels), ("ct_channels", &self.ct_channels)] {
            if list.is_empty() {
                return Err(Error::Config(format!("{name} is empty")));
            }
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != list.len() {
                return Err(Error::Config(format!("{name} has duplicates")));
            }
        }
        Ok(())
    }
}

pub fn tsch_channel(cfg: &HoppingConfig, asn: Asn) -> Channel {
    let n = cfg.tsch_channels.len() as u64;
    cfg.tsch_channels[((asn.0 + cfg.tsch_offset) % n) as usize]
}

/// Channel of flood `flood_index`; constant across that flood's micro-slots.
pub fn ct_channel(cfg: &HoppingConfig, flood_index: u64) -> Channel {
    let n = cfg.ct_channels.len() as u64;
    cfg.ct_channels[((flood_index + cfg.ct_offset) % n) as usize]
}
