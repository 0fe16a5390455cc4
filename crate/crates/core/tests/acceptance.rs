//! Acceptance checks, one line per criterion. Runs as a plain binary so the
//! PASS/FAIL lines always show up in `cargo test` output.

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sixpp::ctflood::{flood_outcome, CtFloodConfig};
use sixpp::metrics::{median, spearman};
use sixpp::phy::{capacity_sweep, messages_per_slotframe, CtTiming, PhyMode};
use sixpp::report;
use sixpp::scenario::ScenarioConfig;
use sixpp::sim::{run, run_matrix, summarize_matrix, RunResult};
use sixpp::topology::{make_grid_topology, make_line_topology, make_random_geometric_topology, Topology};
use sixpp::tschmac::{MacMode, SyncState};
use sixpp::{Frame, FrameKind, FrameMeta, NodeId, SimTime};

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn scenario(name: &str) -> ScenarioConfig {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name);
    ScenarioConfig::load(&p).expect("bundled scenario loads")
}

// Independent capacity oracle: exact integer airtime, then floods laid end to
// end on a microsecond timeline until the next one overruns the slotframe.
fn oracle_airtime_us(bytes: u64, rate: u64) -> u64 {
    let bits_us = bytes * 8 * 1_000_000;
    let mut t = bits_us / rate;
    while t * rate < bits_us {
        t += 1;
    }
    t
}

fn oracle_capacity(t_sf: u64, phy: PhyMode, n_tx: u32, n_h: u32, payload: u64) -> u64 {
    let slot = 40 + oracle_airtime_us(payload + 6, phy.data_rate());
    let flood = slot * (n_tx + n_h) as u64;
    let mut end = 0;
    let mut count = 0;
    while end + flood <= t_sf {
        end += flood;
        count += 1;
    }
    count
}

fn capacity_exact() -> Outcome {
    let t0 = Instant::now();
    let mut cases = 0u64;
    let mut mismatches = Vec::new();
    for phy in PhyMode::ALL {
        for n_tx in 1..=8 {
            for n_h in 1..=16 {
                for payload in 8..=255u32 {
                    let timing = CtTiming::new(phy).with_payload(payload);
                    let got = messages_per_slotframe(10_000, &timing, n_tx, n_h);
                    let want = oracle_capacity(10_000, phy, n_tx, n_h, payload as u64);
                    cases += 1;
                    if got != want {
                        mismatches.push((phy, n_tx, n_h, payload, got, want));
                    }
                }
            }
        }
    }
    let took = t0.elapsed();
    Outcome {
        name: "capacity equals timeline-packing oracle",
        pass: mismatches.is_empty() && took < Duration::from_secs(10),
        detail: format!("{cases} cases, {} mismatches, {:.2?}", mismatches.len(), took),
    }
}

fn capacity_trends() -> Outcome {
    let rows = capacity_sweep(10_000, &CtTiming::default(), &PhyMode::ALL, 2..=2, 1..=16);
    let at = |phy, n_h| rows.iter().find(|r| r.phy == phy && r.n_h == n_h).unwrap().messages;
    let order = [PhyMode::Le2M, PhyMode::Le1M, PhyMode::LeCoded500K, PhyMode::LeCoded125K];
    let ordered = (1..=16).all(|h| order.windows(2).all(|w| at(w[0], h) >= at(w[1], h)));
    let zero_154 = (3..=16).all(|h| at(PhyMode::Ieee802154, h) == 0);
    Outcome {
        name: "capacity ordering across PHYs, 802.15.4 empty for n_h >= 3",
        pass: ordered && zero_154,
        detail: format!(
            "ordered={ordered} ieee_zero={zero_154} (n_h=3: {} {} {} {} {})",
            at(PhyMode::Le2M, 3),
            at(PhyMode::Le1M, 3),
            at(PhyMode::LeCoded500K, 3),
            at(PhyMode::LeCoded125K, 3),
            at(PhyMode::Ieee802154, 3)
        ),
    }
}

fn flood_bound() -> Outcome {
    let mut topos: Vec<(String, Topology)> = Vec::new();
    for n in [2, 3, 10, 25, 50] {
        topos.push((format!("line{n}"), make_line_topology(n, 1.0).unwrap()));
    }
    for (r, c, d) in [(2, 2, false), (5, 5, false), (7, 7, true), (4, 12, true), (5, 10, false)] {
        topos.push((format!("grid{r}x{c}"), make_grid_topology(r, c, None, d, 1.0).unwrap()));
    }
    for seed in 1..=20 {
        topos.push((format!("rgg{seed}"), make_random_geometric_topology(50, 0.25, 1.0, None, seed).unwrap()));
    }
    let mut checked = 0;
    let mut failures = Vec::new();
    for (name, topo) in &topos {
        let hops = topo.bfs(NodeId(0)).unwrap();
        let ecc = topo.eccentricity(NodeId(0)).unwrap().unwrap();
        for n_tx in [1, 2, 3] {
            for n_h in [ecc, ecc + 2] {
                let cfg = CtFloodConfig { n_tx, n_h, timing: CtTiming::new(PhyMode::Le2M), initiator: NodeId(0) };
                let start = SimTime(5_000_000);
                let frame = Frame::new(NodeId(0), NodeId::BROADCAST, 0, start, FrameMeta::Data { app_seq: 0 });
                let out = flood_outcome(cfg, topo, 37, start, frame, |_, _, _| Ok(true)).unwrap();
                for o in out.iter().filter(|o| o.node != NodeId(0)) {
                    let h = hops[o.node.index()].unwrap();
                    checked += 1;
                    // a node at hop h hears relay h-1 in micro-slot h-1 and
                    // retransmits with relay h
                    let ok = o.reached
                        && o.first_rx_micro_slot.is_some_and(|m| m < cfg.window() && m == h - 1)
                        && o.relay_cnt.map(|r| r + 1) == Some(h)
                        && o.sync.map(|s| s.ct0) == Some(start);
                    if !ok {
                        failures.push(format!("{name} n_tx={n_tx} n_h={n_h} node={}", o.node));
                    }
                }
            }
        }
    }
    Outcome {
        name: "lossless flood reaches all nodes in window, relay = hop, CT_0 exact",
        pass: failures.is_empty(),
        detail: format!("{} topologies, {checked} node-floods, {} failures {:?}", topos.len(), failures.len(), failures.first()),
    }
}

fn sync_property() -> Outcome {
    let cfg = scenario("sync_line48.scn");
    let tau_sf_s = cfg.layout().unwrap().tau_sf_us() as f64 / 1e6;
    let on = run(&cfg).unwrap();
    let max_err = on.max_sync_error_us();
    let no_desync = on.first_desync_us().is_none();

    let mut off_cfg = cfg.clone();
    off_cfg.clock.resync = false;
    let off = run(&off_cfg).unwrap();
    let root = off.nodes[0].drift_ppb;
    let guard = cfg.mac.guard_us as f64;
    let mut worst: f64 = 0.0;
    let mut desyncs = 0;
    for row in off.trace.iter().filter(|r| r.event == "desync") {
        let n = &off.nodes[row.node.index()];
        // first desync per node only
        if off.trace.iter().find(|r| r.event == "desync" && r.node == row.node).map(|r| r.t_us) != Some(row.t_us) {
            continue;
        }
        let rel_ppm = (n.drift_ppb - root).abs() as f64 / 1_000.0;
        let expected = n.association_latency_us.unwrap() as f64 / 1e6 + guard / rel_ppm;
        worst = worst.max((row.t_us as f64 / 1e6 - expected).abs());
        desyncs += 1;
    }
    // arithmetic oracle on the worked example: 1000 us at 80 ppm
    let s = SyncState { anchor: SimTime::ZERO, residual_ns: 0, relative_drift_ppb: 80_000 };
    let example = s.desync_time(1_000).map(|t| t.0 as f64 / 1e6);
    let example_ok = example.is_some_and(|t| (t - 12.5).abs() <= tau_sf_s);
    let expected_desyncs = off.nodes.iter().skip(1).filter(|n| {
        let rel = (n.drift_ppb - root).abs() as f64 / 1_000.0;
        rel > 0.0 && n.association_latency_us.unwrap() as f64 / 1e6 + guard / rel < off_cfg.run.duration_s as f64
    });
    let expected_count = expected_desyncs.count();
    let all_desync = desyncs == expected_count;
    Outcome {
        name: "sync error <= 85 us with resync; desync at guard/drift +- one slotframe without",
        pass: max_err <= 85.0 && no_desync && worst <= tau_sf_s && desyncs > 0 && all_desync && example_ok,
        detail: format!(
            "max {max_err:.1} us, desync timing worst offset {worst:.3} s over {desyncs}/{expected_count} nodes, 80 ppm example {:.2} s",
            example.unwrap_or(f64::NAN)
        ),
    }
}

fn assoc_runs() -> Vec<RunResult> {
    let base = scenario("assoc_line48.scn");
    let jobs: Vec<(MacMode, u64)> =
        [MacMode::SixPp, MacMode::Baseline6TischMinimal].iter().flat_map(|&m| (1..=20).map(move |s| (m, s))).collect();
    jobs.par_iter()
        .map(|&(mode, seed)| {
            let mut cfg = base.clone();
            cfg.run.mode = mode;
            cfg.run.seed = seed;
            run(&cfg).unwrap()
        })
        .collect()
}

fn association(runs: &[RunResult]) -> Outcome {
    let lat = |mode| -> Vec<f64> {
        runs.iter()
            .filter(|r| r.config.run.mode == mode)
            .flat_map(|r| r.nodes.iter().filter_map(|n| n.association_latency_us).map(|v| v as f64 / 1e6))
            .collect()
    };
    let six = lat(MacMode::SixPp);
    let base = lat(MacMode::Baseline6TischMinimal);
    let expected = runs.iter().filter(|r| r.config.run.mode == MacMode::SixPp).map(|r| r.nodes.len() - 1).sum::<usize>();
    let (m6, mb) = (median(&six).unwrap(), median(&base).unwrap());
    let spread_ok = runs.iter().filter(|r| r.config.run.mode == MacMode::SixPp).all(|r| {
        let v: Vec<u64> = r.nodes.iter().filter_map(|n| n.association_latency_us).collect();
        let tau = r.config.layout().unwrap().tau_sf_us();
        v.len() == r.nodes.len() - 1 && v.iter().max().unwrap() - v.iter().min().unwrap() <= 3 * tau
    });
    Outcome {
        name: "association: 6PP median <= 0.5 x baseline, 6PP spread <= 3 slotframes",
        pass: m6 <= 0.5 * mb && spread_ok && six.len() == expected,
        detail: format!("6pp median {m6:.3} s, baseline median {mb:.3} s, spread_ok={spread_ok}"),
    }
}

fn dao_delta(runs: &[RunResult]) -> Outcome {
    let pairs = |mode| -> (Vec<f64>, Vec<f64>) {
        runs.iter()
            .filter(|r| r.config.run.mode == mode)
            .flat_map(|r| r.nodes.iter().filter_map(|n| Some((n.hops? as f64, n.dao_delta_us? as f64 / 1e3))))
            .unzip()
    };
    let (h6, d6) = pairs(MacMode::SixPp);
    let (hb, db) = pairs(MacMode::Baseline6TischMinimal);
    let (m6, mb) = (median(&d6).unwrap(), median(&db).unwrap());
    let (r6, rb) = (spearman(&h6, &d6).unwrap(), spearman(&hb, &db).unwrap());
    let ratio_ok = m6 <= 0.5 * mb;
    Outcome {
        name: "DAO delta: 6PP median <= 0.5 x baseline, |rho_6pp| < 0.2, rho_baseline > 0.4",
        pass: ratio_ok && r6.abs() < 0.2 && rb > 0.4,
        detail: format!(
            "6pp median {m6:.1} ms vs baseline {mb:.1} ms (ratio {:.2}, ok={ratio_ok}), rho_6pp {r6:+.3}, rho_baseline {rb:+.3}",
            m6 / mb
        ),
    }
}

fn table1() -> Outcome {
    let t0 = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for gamma in [0.9, 1.0] {
        let mut cfg = scenario("dense20.scn");
        cfg.reception.capture_gamma = gamma;
        let rows = run_matrix(&cfg, &(1..=20).collect::<Vec<_>>()).unwrap();
        let cells = summarize_matrix(&rows);
        let cell = |mode, jam| cells.iter().find(|c| c.mode == mode && c.jam == jam).unwrap();
        let reliable = cells.iter().all(|c| c.reliability_pct >= 98.0);
        let mut parts = vec![format!(
            "gamma {gamma}: rel {}",
            cells.iter().map(|c| format!("{:.2}", c.reliability_pct)).collect::<Vec<_>>().join("/")
        )];
        pass &= reliable;
        for (jam, need) in [(false, 0.25), (true, 0.20)] {
            let six = cell(MacMode::SixPp, jam).mean_latency_ms.unwrap();
            let base = cell(MacMode::Baseline6TischMinimal, jam).mean_latency_ms.unwrap();
            let red = 1.0 - six / base;
            pass &= six < base && red >= need;
            parts.push(format!("jam={} {six:.1}/{base:.1} ms (-{:.0}%)", u8::from(jam), red * 100.0));
        }
        detail.push(parts.join(", "));
    }
    let took = t0.elapsed();
    pass &= took < Duration::from_secs(300);
    Outcome {
        name: "dissemination: reliability >= 98%, 6PP latency -25% clean / -20% jammed",
        pass,
        detail: format!("{}; {:.1?}", detail.join("; "), took),
    }
}

fn control_signaling(assoc: &[RunResult]) -> Outcome {
    let mut dense = scenario("dense20.scn");
    let mut runs: Vec<RunResult> = Vec::new();
    for mode in [MacMode::SixPp, MacMode::Baseline6TischMinimal] {
        for jam in [false, true] {
            dense.run.mode = mode;
            dense.jammer.enabled = jam;
            runs.push(run(&dense).unwrap());
        }
    }
    let all = assoc.iter().chain(runs.iter());
    let mut ok = true;
    let (mut six, mut base) = (0, 0);
    for r in all {
        let c = &r.summary().control;
        let (eb, ka) = (c.get(FrameKind::Eb), c.get(FrameKind::Ka));
        match r.config.run.mode {
            MacMode::SixPp => {
                ok &= eb == 0 && ka == 0;
                six += 1;
            }
            MacMode::Baseline6TischMinimal => {
                ok &= eb > 0 && ka > 0;
                base += 1;
            }
        }
    }
    Outcome {
        name: "6PP emits no EB/KA in shared slots, baseline emits both",
        pass: ok,
        detail: format!("{six} 6pp runs, {base} baseline runs"),
    }
}

fn determinism() -> Outcome {
    let mut identical = true;
    let mut runs = 0;
    for (file, mode) in [
        ("dense20.scn", MacMode::Baseline6TischMinimal),
        ("dense20.scn", MacMode::SixPp),
        ("assoc_line48.scn", MacMode::Baseline6TischMinimal),
        ("sync_line48.scn", MacMode::SixPp),
    ] {
        let mut cfg = scenario(file);
        cfg.run.mode = mode;
        cfg.run.seed = 7;
        let bytes = || {
            let r = run(&cfg).unwrap();
            let (mut ev, mut su) = (Vec::new(), Vec::new());
            report::write_events(&mut ev, &r).unwrap();
            report::write_summary(&mut su, &r).unwrap();
            (ev, su)
        };
        identical &= bytes() == bytes();
        runs += 1;
    }
    Outcome {
        name: "same seed gives byte-identical events.csv and summary.csv",
        pass: identical,
        detail: format!("{runs} scenarios run twice"),
    }
}

fn main() {
    let assoc = assoc_runs();
    let outcomes = [
        capacity_exact(),
        capacity_trends(),
        flood_bound(),
        sync_property(),
        association(&assoc),
        dao_delta(&assoc),
        table1(),
        control_signaling(&assoc),
        determinism(),
    ];
    let mut failed = 0;
    for o in &outcomes {
        println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
