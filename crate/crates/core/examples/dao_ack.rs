//! DAO to DAO-ACK delay per hop distance, both MAC modes, 20 seeds.
//!
//! `cargo run --release --example dao_ack`

use std::collections::BTreeMap;

use rayon::prelude::*;
use sixpp::metrics::{median, spearman};
use sixpp::scenario::ScenarioConfig;
use sixpp::sim::run;
use sixpp::tschmac::MacMode;

fn main() -> sixpp::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/assoc_line48.scn");
    let base = ScenarioConfig::load(path.as_ref())?;
    for mode in [MacMode::SixPp, MacMode::Baseline6TischMinimal] {
        let pairs: Vec<(f64, f64)> = (1..=20u64)
            .into_par_iter()
            .map(|seed| {
                let mut cfg = base.clone();
                cfg.run.mode = mode;
                cfg.run.seed = seed;
                let r = run(&cfg)?;
                Ok(r.nodes
                    .iter()
                    .filter_map(|n| Some((n.hops? as f64, n.dao_delta_us? as f64 / 1e3)))
                    .collect::<Vec<_>>())
            })
            .collect::<sixpp::Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let (h, d): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let mut by_hop: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for &(h, d) in &pairs {
            by_hop.entry(h as u32).or_default().push(d);
        }
        println!(
            "{:<8} median {:>7.1} ms  spearman(hops, delta) {:+.3}",
            mode.name(),
            median(&d).unwrap_or(f64::NAN),
            spearman(&h, &d).unwrap_or(f64::NAN)
        );
        let row: Vec<String> = by_hop.iter().map(|(h, v)| format!("h{h}:{:.0}", median(v).unwrap())).collect();
        println!("         {}", row.join(" "));
    }
    Ok(())
}
