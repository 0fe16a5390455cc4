//! How CT floods and shared slots share one slotframe, and which channel each
//! slot and flood uses.
//!
//! `cargo run --example schedule_layout`

use sixpp::phy::{CtTiming, PhyMode};
use sixpp::schedule::{build_layout, ct_channel, slot_role, tsch_channel, CtWindow, HoppingConfig, SlotRole, DEFAULT_SLOT_US};
use sixpp::Asn;

fn main() -> sixpp::Result<()> {
    let hop = HoppingConfig::default();
    for phy in [PhyMode::Le2M, PhyMode::Le1M, PhyMode::Ieee802154] {
        let window = CtWindow::new(2, 11, &CtTiming::new(phy), 1);
        let l = build_layout(101, window, DEFAULT_SLOT_US)?;
        println!(
            "{:<16} flood {:>6} us -> {} CT slot(s), {} shared, tau_SF {} ms",
            phy.name(),
            window.flood_duration_us(),
            l.ct_reserved_slots,
            l.shared_slots,
            l.tau_sf_us() / 1_000
        );
    }

    let window = CtWindow::new(2, 11, &CtTiming::new(PhyMode::Le2M), 1);
    let l = build_layout(11, window, DEFAULT_SLOT_US)?;
    println!("\nfirst 24 ASNs of an 11-slot frame:");
    for asn in 0..24 {
        let asn = Asn(asn);
        let (role, ch) = match slot_role(&l, asn) {
            SlotRole::Ct => ("CT", ct_channel(&hop, l.frame_index(asn))),
            SlotRole::Shared => ("shared", tsch_channel(&hop, asn)),
        };
        println!("asn {:>3} slot {:>2} {:<6} ch {}", asn.0, l.slot_index(asn), role, ch);
    }
    Ok(())
}
