use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sixpp::phy::{capacity_sweep, CtTiming, PhyMode};
use sixpp::report;
use sixpp::scenario::ScenarioConfig;
use sixpp::sim::{run, run_matrix, summarize_matrix};
use sixpp::tschmac::MacMode;

#[derive(Parser)]
#[command(name = "sixpp", version, about = "CT floods inside a TSCH slotframe: simulator and capacity tables")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Overrides the scenario seed (first seed for `matrix`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Messages per slotframe for one or all PHYs.
    Capacity {
        #[arg(long, conflicts_with = "all_phys", required_unless_present = "all_phys")]
        phy: Option<PhyMode>,
        #[arg(long)]
        all_phys: bool,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
        ntx: u32,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        nh: u32,
        #[arg(long, default_value_t = 10)]
        tsf_ms: u64,
        #[arg(long, default_value_t = 64)]
        payload: u32,
        #[arg(long, default_value_t = 40)]
        ramp_up_us: u64,
        #[arg(long, default_value_t = 6)]
        overhead: u32,
    },
    /// Runs one scenario and writes events/summary/dao CSVs.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        mode: Option<MacMode>,
        #[arg(long)]
        duration_s: Option<u64>,
    },
    /// Runs the mode × interference comparison over several seeds.
    Matrix {
        scenario: PathBuf,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
    },
    /// Parses and validates a scenario without running it.
    Validate { scenario: PathBuf },
}

enum Failure {
    Scenario(sixpp::Error),
    Output(sixpp::Error),
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::load(path).map_err(Failure::Scenario)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    cfg.validate().map_err(Failure::Scenario)?;
    Ok(cfg)
}

fn out_dir(global: &Global, cfg: &ScenarioConfig) -> PathBuf {
    global
        .out
        .clone()
        .or_else(|| cfg.run.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn fmt_ms(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.1}"))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match cli.cmd {
        Cmd::Capacity { phy, all_phys, ntx, nh, tsf_ms, payload, ramp_up_us, overhead } => {
            let phys = if all_phys { PhyMode::ALL.to_vec() } else { phy.into_iter().collect() };
            let base = CtTiming { phy: phys[0], ramp_up_us, overhead_bytes: overhead, payload_bytes: payload };
            let t_sf_us = tsf_ms * 1_000;
            let rows = capacity_sweep(t_sf_us, &base, &phys, ntx..=ntx, nh..=nh);
            match &g.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Failure::Output(e.into()))?;
                    let f = std::fs::File::create(dir.join("capacity.csv")).map_err(|e| Failure::Output(e.into()))?;
                    report::write_capacity(f, t_sf_us, &rows).map_err(Failure::Output)?;
                }
                None => report::write_capacity(io::stdout().lock(), t_sf_us, &rows).map_err(Failure::Output)?,
            }
        }
        Cmd::Run { scenario, mode, duration_s } => {
            let mut cfg = load(&scenario, g.seed)?;
            if let Some(m) = mode {
                cfg.run.mode = m;
            }
            if let Some(d) = duration_s {
                cfg.run.duration_s = d;
            }
            let r = run(&cfg).map_err(Failure::Scenario)?;
            let dir = out_dir(g, &cfg);
            report::write_run(&dir, &r).map_err(Failure::Output)?;
            if !g.quiet {
                let s = r.summary();
                let assoc = r.nodes.iter().filter(|n| n.association_latency_us.is_some()).count();
                println!(
                    "mode={} seed={} associated={}/{} reliability={} mean_latency_ms={} max_sync_error_us={:.1} out={}",
                    cfg.run.mode.name(),
                    r.seed,
                    assoc,
                    r.nodes.len().saturating_sub(1),
                    s.reliability_pct.map_or("-".into(), |p| format!("{p:.2}%")),
                    fmt_ms(s.latency_ms.map(|l| l.mean)),
                    r.max_sync_error_us(),
                    dir.display(),
                );
            }
        }
        Cmd::Matrix { scenario, seeds } => {
            let cfg = load(&scenario, None)?;
            let first = g.seed.unwrap_or(cfg.run.seed);
            let seed_list: Vec<u64> = (first..first + seeds).collect();
            let rows = run_matrix(&cfg, &seed_list).map_err(Failure::Scenario)?;
            let dir = out_dir(g, &cfg);
            std::fs::create_dir_all(&dir).map_err(|e| Failure::Output(e.into()))?;
            let f = std::fs::File::create(dir.join("matrix.csv")).map_err(|e| Failure::Output(e.into()))?;
            report::write_matrix(f, &cfg, &seed_list, &rows).map_err(Failure::Output)?;
            if !g.quiet {
                let mut out = io::stdout().lock();
                for c in summarize_matrix(&rows) {
                    let _ = writeln!(
                        out,
                        "{:<8} jam={} runs={} reliability={:.2}% mean_latency_ms={} median_latency_ms={}",
                        c.mode.name(),
                        u8::from(c.jam),
                        c.runs,
                        c.reliability_pct,
                        fmt_ms(c.mean_latency_ms),
                        fmt_ms(c.median_latency_ms),
                    );
                }
            }
        }
        Cmd::Validate { scenario } => {
            let cfg = load(&scenario, g.seed)?;
            if !g.quiet {
                println!("ok: {} ({}, {} s)", scenario.display(), cfg.run.mode.name(), cfg.run.duration_s);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Scenario(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Output(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
