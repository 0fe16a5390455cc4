//! One lossless flood over a 3 x 5 grid: when each node first hears the
//! message, which relay counter it saw, and the CT_0 it reconstructs.
//!
//! `cargo run --example flood_trace`

use sixpp::ctflood::{flood_outcome, CtFloodConfig};
use sixpp::phy::{CtTiming, PhyMode};
use sixpp::topology::make_grid_topology;
use sixpp::{Frame, FrameMeta, NodeId, SimTime};

fn main() -> sixpp::Result<()> {
    let topo = make_grid_topology(3, 5, None, false, 1.0)?;
    let cfg = CtFloodConfig {
        n_tx: 2,
        n_h: 6,
        timing: CtTiming::new(PhyMode::Le2M),
        initiator: NodeId(0),
    };
    let start = SimTime(1_000_000);
    let frame = Frame::new(NodeId(0), NodeId::BROADCAST, 0, start, FrameMeta::Data { app_seq: 0 });
    let hops = topo.bfs(NodeId(0))?;
    let out = flood_outcome(cfg, &topo, 37, start, frame, |_, _, _| Ok(true))?;

    println!("micro-slot {} us, window {} micro-slots", cfg.micro_slot_us(), cfg.window());
    println!("node hops first_rx relay ct0_error_us");
    for o in out {
        let err = o.sync.map(|s| s.ct0.0 as i64 - start.0 as i64);
        println!(
            "{:>4} {:>4} {:>8} {:>5} {:>12}",
            o.node.0,
            hops[o.node.index()].map_or("-".into(), |h| h.to_string()),
            o.first_rx_micro_slot.map_or("-".into(), |m| m.to_string()),
            o.relay_cnt.map_or("-".into(), |r| r.to_string()),
            err.map_or("-".into(), |e| e.to_string()),
        );
    }
    Ok(())
}
