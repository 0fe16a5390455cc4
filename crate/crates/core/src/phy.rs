//! Multi-PHY timing and the per-slotframe CT message capacity.
//!
//! A CT flood of one message occupies `n_tx + n_h` back-to-back micro-slots,
//! each one radio ramp-up plus the on-air time of payload and CT overhead.
//! The number of distinct messages a slotframe of length `T_SF` can carry is
//! `floor(T_SF / (T_slot * (n_tx + n_h)))`, computed in integer microseconds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PhyMode {
    #[serde(rename = "LE_2M")]
    Le2M,
    #[serde(rename = "LE_1M")]
    Le1M,
    #[serde(rename = "LE_CODED_500K")]
    LeCoded500K,
    #[serde(rename = "LE_CODED_125K")]
    LeCoded125K,
    #[serde(rename = "IEEE802154_250K")]
    Ieee802154,
}

impl PhyMode {
    pub const ALL: [PhyMode; 5] = [
        PhyMode::Le2M,
        PhyMode::Le1M,
        PhyMode::LeCoded500K,
        PhyMode::LeCoded125K,
        PhyMode::Ieee802154,
    ];

    /// Data rate in bits per second.
    pub fn data_rate(self) -> u64 {
        match self {
            PhyMode::Le2M => 2_000_000,
            PhyMode::Le1M => 1_000_000,
            PhyMode::LeCoded500K => 500_000,
            PhyMode::LeCoded125K => 125_000,
            PhyMode::Ieee802154 => 250_000,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhyMode::Le2M => "LE_2M",
            PhyMode::Le1M => "LE_1M",
            PhyMode::LeCoded500K => "LE_CODED_500K",
            PhyMode::LeCoded125K => "LE_CODED_125K",
            PhyMode::Ieee802154 => "IEEE802154_250K",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|p| p.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for PhyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownPhy(pub String);

impl fmt::Display for UnknownPhy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown PHY `{}` (valid: {})", self.0, PhyMode::valid_names())
    }
}

impl std::error::Error for UnknownPhy {}

impl FromStr for PhyMode {
    type Err = UnknownPhy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PhyMode::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownPhy(s.to_string()))
    }
}

/// Timing parameters of one CT micro-slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtTiming {
    pub phy: PhyMode,
    pub ramp_up_us: u64,
    pub overhead_bytes: u32,
    pub payload_bytes: u32,
}

impl Default for CtTiming {
    fn default() -> Self {
        CtTiming {
            phy: PhyMode::Le2M,
            ramp_up_us: 40,
            overhead_bytes: 6,
            payload_bytes: 64,
        }
    }
}

impl CtTiming {
    pub fn new(phy: PhyMode) -> Self {
        CtTiming {
            phy,
            ..Default::default()
        }
    }

    pub fn with_payload(mut self, payload_bytes: u32) -> Self {
        self.payload_bytes = payload_bytes;
        self
    }

    pub fn micro_slot_us(&self) -> u64 {
        ct_micro_slot_duration(self)
    }
}

/// On-air time in whole microseconds, rounded up.
pub fn on_air_time(phy: PhyMode, total_bytes: u64) -> u64 {
    (total_bytes * 8 * 1_000_000).div_ceil(phy.data_rate())
}

/// Duration of one CT micro-slot: ramp-up plus airtime of payload and overhead.
pub fn ct_micro_slot_duration(timing: &CtTiming) -> u64 {
    timing.ramp_up_us
        + on_air_time(
            timing.phy,
            timing.payload_bytes as u64 + timing.overhead_bytes as u64,
        )
}

/// Distinct messages that fit in a slotframe of `t_sf_us`.
///
/// # Panics
/// If `n_tx` or `n_h` is zero, or the micro-slot duration is zero.
pub fn messages_per_slotframe(t_sf_us: u64, timing: &CtTiming, n_tx: u32, n_h: u32) -> u64 {
    assert!(n_tx >= 1 && n_h >= 1, "n_tx and n_h must be at least 1");
    let per_flood = ct_micro_slot_duration(timing) * (n_tx as u64 + n_h as u64);
    assert!(per_flood > 0, "zero-length flood");
    t_sf_us / per_flood
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CapacityRow {
    pub phy: PhyMode,
    pub n_tx: u32,
    pub n_h: u32,
    pub payload_bytes: u32,
    pub t_slot_us: u64,
    pub messages: u64,
}

/// One row per (phy, n_tx, n_h) combination, PHYs in the order given.
pub fn capacity_sweep(
    t_sf_us: u64,
    base: &CtTiming,
    phys: &[PhyMode],
    n_tx_range: std::ops::RangeInclusive<u32>,
    n_h_range: std::ops::RangeInclusive<u32>,
) -> Vec<CapacityRow> {
    let mut rows = Vec::new();
    for &phy in phys {
        let timing = CtTiming { phy, ..*base };
        let t_slot_us = ct_micro_slot_duration(&timing);
        for n_tx in n_tx_range.clone() {
            for n_h in n_h_range.clone() {
                rows.push(CapacityRow {
                    phy,
                    n_tx,
                    n_h,
                    payload_bytes: timing.payload_bytes,
                    t_slot_us,
                    messages: messages_per_slotframe(t_sf_us, &timing, n_tx, n_h),
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Places floods of `n_tx + n_h` micro-slots one after another until the
    /// next one would overrun the slotframe.
    fn packer(t_sf: u64, t_slot: u64, n_tx: u32, n_h: u32) -> u64 {
        let mut cursor = 0;
        let mut count = 0;
        loop {
            let mut end = cursor;
            for _ in 0..(n_tx + n_h) {
                end += t_slot;
            }
            if end > t_sf {
                return count;
            }
            cursor = end;
            count += 1;
        }
    }

    #[test]
    fn airtime_examples() {
        assert_eq!(on_air_time(PhyMode::Le2M, 0), 0);
        assert_eq!(on_air_time(PhyMode::Le2M, 70), 280);
        assert_eq!(on_air_time(PhyMode::Ieee802154, 70), 2240);
        // 1 byte at 125 kb/s is exactly 64 us; 1 byte at 2 Mb/s is 4 us.
        assert_eq!(on_air_time(PhyMode::LeCoded125K, 1), 64);
        assert_eq!(on_air_time(PhyMode::Le2M, 1), 4);
    }

    #[test]
    fn micro_slot_examples() {
        assert_eq!(ct_micro_slot_duration(&CtTiming::new(PhyMode::Le2M)), 320);
        assert_eq!(ct_micro_slot_duration(&CtTiming::new(PhyMode::Le1M)), 600);
        assert_eq!(ct_micro_slot_duration(&CtTiming::new(PhyMode::Ieee802154)), 2280);
    }

    #[test]
    fn capacity_examples() {
        let le2m = CtTiming::new(PhyMode::Le2M);
        assert_eq!(packer(10_000, 320, 2, 3), 6);
        assert_eq!(messages_per_slotframe(10_000, &le2m, 2, 3), 6);
        assert_eq!(messages_per_slotframe(640, &le2m, 1, 1), 1);
        let t154 = CtTiming::new(PhyMode::Ieee802154);
        assert_eq!(packer(10_000, 2280, 2, 3), 0);
        assert_eq!(messages_per_slotframe(10_000, &t154, 2, 3), 0);
    }

    #[test]
    fn sweep_single_cell() {
        let rows = capacity_sweep(10_000, &CtTiming::default(), &[PhyMode::Le2M], 2..=2, 3..=3);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].messages, 6);
        assert_eq!(rows[0].t_slot_us, 320);
    }

    #[test]
    fn sweep_orders_by_rate() {
        let rows = capacity_sweep(10_000, &CtTiming::default(), &PhyMode::ALL, 2..=2, 3..=3);
        let counts: Vec<u64> = rows.iter().map(|r| r.messages).collect();
        for (row, want) in rows.iter().zip(&counts) {
            let t = ct_micro_slot_duration(&CtTiming::new(row.phy));
            assert_eq!(packer(10_000, t, 2, 3), *want);
        }
        assert!(counts[0] >= counts[1] && counts[1] >= counts[2] && counts[2] >= counts[3]);
    }

    #[test]
    fn deep_floods_starve_slow_phys() {
        for phy in [PhyMode::LeCoded500K, PhyMode::LeCoded125K, PhyMode::Ieee802154] {
            for n_tx in 1..=8 {
                let t = CtTiming::new(phy);
                assert_eq!(messages_per_slotframe(10_000, &t, n_tx, 16), 0, "{phy} n_tx={n_tx}");
                assert_eq!(packer(10_000, t.micro_slot_us(), n_tx, 16), 0);
            }
        }
    }

    #[test]
    fn phy_names_parse() {
        for p in PhyMode::ALL {
            assert_eq!(p.name().parse::<PhyMode>().unwrap(), p);
        }
        let err = "BOGUS".parse::<PhyMode>().unwrap_err();
        assert!(err.to_string().contains("LE_CODED_125K"));
    }

    proptest::proptest! {
        #[test]
        fn matches_packer(
            phy in proptest::sample::select(PhyMode::ALL.to_vec()),
            n_tx in 1u32..=8,
            n_h in 1u32..=16,
            payload in 1u32..=255,
            t_sf in 1u64..=50_000,
        ) {
            let t = CtTiming::new(phy).with_payload(payload);
            proptest::prop_assert_eq!(
                messages_per_slotframe(t_sf, &t, n_tx, n_h),
                packer(t_sf, t.micro_slot_us(), n_tx, n_h)
            );
        }

        #[test]
        fn airtime_subadditive(a in 0u64..2000, b in 0u64..2000,
                               phy in proptest::sample::select(PhyMode::ALL.to_vec())) {
            let sum = on_air_time(phy, a) + on_air_time(phy, b);
            let joint = on_air_time(phy, a + b);
            proptest::prop_assert!(joint <= sum && joint + 1 >= sum);
        }

        #[test]
        fn capacity_monotone(n_tx in 1u32..=7, n_h in 1u32..=15, payload in 8u32..=254,
                             t_sf in 1_000u64..=20_000) {
            let t = CtTiming::default().with_payload(payload);
            let base = messages_per_slotframe(t_sf, &t, n_tx, n_h);
            proptest::prop_assert!(messages_per_slotframe(t_sf, &t, n_tx + 1, n_h) <= base);
            proptest::prop_assert!(messages_per_slotframe(t_sf, &t, n_tx, n_h + 1) <= base);
            proptest::prop_assert!(messages_per_slotframe(t_sf, &t.with_payload(payload + 1), n_tx, n_h) <= base);
            proptest::prop_assert!(messages_per_slotframe(t_sf + 1, &t, n_tx, n_h) >= base);
            let slower = CtTiming { phy: PhyMode::Le1M, ..t };
            proptest::prop_assert!(messages_per_slotframe(t_sf, &slower, n_tx, n_h) <= base);
        }
    }
}
