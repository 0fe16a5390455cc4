//! Reliability and latency of coordinator-to-all dissemination, both modes,
//! with and without narrowband interference.
//!
//! `cargo run --release --example dissemination_matrix -- [seeds]`

use sixpp::scenario::ScenarioConfig;
use sixpp::sim::{run_matrix, summarize_matrix};

fn main() -> sixpp::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/dense20.scn");
    let cfg = ScenarioConfig::load(path.as_ref())?;
    let rows = run_matrix(&cfg, &(1..=seeds).collect::<Vec<_>>())?;
    let cells = summarize_matrix(&rows);
    println!("{:<10} {:>5} {:>12} {:>10} {:>8}", "mode", "jam", "reliability", "mean ms", "sd ms");
    for c in &cells {
        println!(
            "{:<10} {:>5} {:>11.2}% {:>10.1} {:>8.1}",
            c.mode.name(),
            c.jam,
            c.reliability_pct,
            c.mean_latency_ms.unwrap_or(f64::NAN),
            c.latency_sd_ms.unwrap_or(f64::NAN)
        );
    }
    for jam in [false, true] {
        let m = |i: usize| cells.iter().filter(|c| c.jam == jam).nth(i).and_then(|c| c.mean_latency_ms);
        if let (Some(six), Some(base)) = (m(0), m(1)) {
            println!("jam={jam}: 6pp latency {:.0}% below baseline", 100.0 * (1.0 - six / base));
        }
    }
    Ok(())
}
