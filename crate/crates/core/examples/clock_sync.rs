//! Drift on a 48-node line with and without per-flood resynchronization.
//!
//! `cargo run --release --example clock_sync`

use sixpp::scenario::ScenarioConfig;
use sixpp::sim::run;

fn main() -> sixpp::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/sync_line48.scn");
    let mut cfg = ScenarioConfig::load(path.as_ref())?;

    let r = run(&cfg)?;
    let guard = cfg.mac.guard_us;
    println!("resync on:  max |sync error| {:.1} us (guard {guard} us), desyncs {}", r.max_sync_error_us(), r.nodes.iter().map(|n| n.desyncs).sum::<u32>());

    cfg.clock.resync = false;
    let r = run(&cfg)?;
    let root_drift = r.nodes[0].drift_ppb;
    println!("resync off: first desync at {:.2} s", r.first_desync_us().unwrap_or(0) as f64 / 1e6);
    println!("node rel_drift_ppm expected_s observed_s");
    for row in r.trace.iter().filter(|t| t.event == "desync").take(8) {
        let n = &r.nodes[row.node.index()];
        let rel = (n.drift_ppb - root_drift) as f64 / 1_000.0;
        let assoc = n.association_latency_us.unwrap_or(0) as f64 / 1e6;
        println!(
            "{:>4} {:>13.2} {:>10.2} {:>10.2}",
            row.node.0,
            rel,
            assoc + guard as f64 / rel.abs(),
            row.t_us as f64 / 1e6,
        );
    }
    Ok(())
}
