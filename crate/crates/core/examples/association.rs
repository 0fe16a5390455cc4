//! Association latency on the 48-node grid, both MAC modes, 20 seeds.
//!
//! `cargo run --release --example association`

use rayon::prelude::*;
use sixpp::metrics::median;
use sixpp::scenario::ScenarioConfig;
use sixpp::sim::run;
use sixpp::tschmac::MacMode;

fn main() -> sixpp::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/assoc_line48.scn");
    let base = ScenarioConfig::load(path.as_ref())?;
    for mode in [MacMode::SixPp, MacMode::Baseline6TischMinimal] {
        let per_seed: Vec<Vec<f64>> = (1..=20u64)
            .into_par_iter()
            .map(|seed| {
                let mut cfg = base.clone();
                cfg.run.mode = mode;
                cfg.run.seed = seed;
                let r = run(&cfg)?;
                Ok(r.nodes.iter().filter_map(|n| n.association_latency_us).map(|us| us as f64 / 1e6).collect())
            })
            .collect::<sixpp::Result<_>>()?;
        let all: Vec<f64> = per_seed.iter().flatten().copied().collect();
        let spread = per_seed
            .iter()
            .map(|v| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min))
            .fold(0.0, f64::max);
        println!(
            "{:<8} associations {:>4}  median {:>7.2} s  worst min-to-max spread {:>7.2} s",
            mode.name(),
            all.len(),
            median(&all).unwrap_or(f64::NAN),
            spread
        );
    }
    Ok(())
}
