//! CSV emission for runs, matrices and capacity tables.
//!
//! Every file starts with one `#` comment line carrying the SHA-256 of the
//! serialized scenario and the seed, followed by a header row.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::phy::CapacityRow;
use crate::scenario::ScenarioConfig;
use crate::sim::{MatrixRow, RunResult};

pub fn config_hash(cfg: &ScenarioConfig) -> String {
    hash_str(&cfg.to_toml())
}

fn hash_str(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

fn comment_line(cfg: &ScenarioConfig, seed: &str) -> String {
    format!(
        "# config_hash={}, seed={}, mode={}, eb_period_ms={}, ka_period_ms={}\n",
        config_hash(cfg),
        seed,
        cfg.run.mode.name(),
        cfg.mac.eb_period_ms,
        cfg.mac.ka_period_ms,
    )
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_writer<W: Write>(mut w: W, comment: &str) -> Result<csv::Writer<W>> {
    w.write_all(comment.as_bytes())?;
    Ok(csv::Writer::from_writer(w))
}

pub fn write_events<W: Write>(w: W, r: &RunResult) -> Result<()> {
    let mut out = csv_writer(w, &comment_line(&r.config, &r.seed.to_string()))?;
    out.write_record(["t_us", "node", "event", "detail"])?;
    for row in &r.trace {
        out.write_record([row.t_us.to_string(), row.node.to_string(), row.event.to_string(), row.detail.clone()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(w: W, r: &RunResult) -> Result<()> {
    let mut out = csv_writer(w, &comment_line(&r.config, &r.seed.to_string()))?;
    out.write_record([
        "node",
        "hops",
        "drift_ppb",
        "association_latency_us",
        "dao_delta_us",
        "delivered",
        "lost",
        "max_sync_error_ns",
        "desyncs",
        "parent",
        "rank",
    ])?;
    for n in &r.nodes {
        out.write_record([
            n.node.to_string(),
            opt(n.hops),
            n.drift_ppb.to_string(),
            opt(n.association_latency_us),
            opt(n.dao_delta_us),
            n.delivered.to_string(),
            n.lost.to_string(),
            n.max_sync_error_ns.to_string(),
            n.desyncs.to_string(),
            opt(n.parent),
            opt(n.rank),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_floods<W: Write>(w: W, r: &RunResult) -> Result<()> {
    let mut out = csv_writer(w, &comment_line(&r.config, &r.seed.to_string()))?;
    out.write_record(["flood", "node", "reached", "first_rx_uslot", "relay_cnt"])?;
    for f in &r.floods {
        out.write_record([
            f.flood_idx.to_string(),
            f.node.to_string(),
            f.reached.to_string(),
            opt(f.first_rx_uslot),
            opt(f.relay_cnt),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_dao<W: Write>(w: W, r: &RunResult) -> Result<()> {
    let mut out = csv_writer(w, &comment_line(&r.config, &r.seed.to_string()))?;
    out.write_record(["node", "event", "t_us", "hops"])?;
    for d in &r.dao {
        out.write_record([d.node.to_string(), d.event.to_string(), d.t_us.to_string(), d.hops.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_matrix<W: Write>(w: W, base: &ScenarioConfig, seeds: &[u64], rows: &[MatrixRow]) -> Result<()> {
    let seed_list = seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
    let mut out = csv_writer(w, &comment_line(base, &seed_list))?;
    out.write_record(["mode", "jam", "seed", "reliability_pct", "mean_latency_ms", "median_latency_ms"])?;
    for r in rows {
        out.write_record([
            r.mode.name().to_string(),
            u8::from(r.jam).to_string(),
            r.seed.to_string(),
            format!("{:.3}", r.reliability_pct),
            opt(r.mean_latency_ms.map(|v| format!("{v:.3}"))),
            opt(r.median_latency_ms.map(|v| format!("{v:.3}"))),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Capacity tables have no scenario; the hash covers the sweep parameters.
pub fn write_capacity<W: Write>(w: W, t_sf_us: u64, rows: &[CapacityRow]) -> Result<()> {
    let params = format!("t_sf_us={t_sf_us};{rows:?}");
    let mut out = csv_writer(w, &format!("# config_hash={}, seed=none\n", hash_str(&params)))?;
    out.write_record(["phy", "n_tx", "n_h", "payload_bytes", "t_slot_us", "messages"])?;
    for r in rows {
        out.write_record([
            r.phy.name().to_string(),
            r.n_tx.to_string(),
            r.n_h.to_string(),
            r.payload_bytes.to_string(),
            r.t_slot_us.to_string(),
            r.messages.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `events.csv`, `summary.csv`, `dao.csv` and, when flood tracing is
/// on, `floods.csv` into `dir`.
pub fn write_run(dir: &Path, r: &RunResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: fn(fs::File, &RunResult) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        f(fs::File::create(&path)?, r)?;
        written.push(path);
        Ok(())
    };
    emit("events.csv", write_events)?;
    emit("summary.csv", write_summary)?;
    emit("dao.csv", write_dao)?;
    if r.config.run.flood_trace {
        emit("floods.csv", write_floods)?;
    }
    Ok(written)
}

/// Parses a CSV written by this module back into records, skipping the
/// comment line.
pub fn read_records(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}
