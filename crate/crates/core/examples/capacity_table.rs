//! Messages per 10 ms slot for every PHY, n_tx = 2, n_h = 1..16, 64 B payload.
//!
//! `cargo run --example capacity_table`

use sixpp::phy::{capacity_sweep, CtTiming, PhyMode};

fn main() {
    let rows = capacity_sweep(10_000, &CtTiming::default(), &PhyMode::ALL, 2..=2, 1..=16);
    print!("{:>16}", "n_h");
    for n_h in 1..=16 {
        print!("{n_h:>4}");
    }
    println!();
    for phy in PhyMode::ALL {
        print!("{:>16}", phy.name());
        for r in rows.iter().filter(|r| r.phy == phy) {
            print!("{:>4}", r.messages);
        }
        println!();
    }
}
