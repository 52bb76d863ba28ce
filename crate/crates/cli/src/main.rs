//! `dacm` — run encounter scenarios, replay recorded traffic through the
//! full detect-and-avoid pipeline, or listen to a live feed and emit
//! advisories.
//!
//! Exit codes: 0 success; 2 scenario/replay validation failure; 3 an NMAC
//! occurred and `--fail-on-nmac` was set; 1 runtime failures (bind errors,
//! I/O).

mod listen;
mod overrides;

use clap::{Parser, Subcommand};
use dacm_core::avoidance::AircraftProperties;
use dacm_core::simulator::{
    parse_replay_text, parse_scenario, Behavior, FlightSpec, Metrics, Scenario, TraceLog, World,
};
use dacm_core::EngineConfig;
use overrides::ConfigOverrides;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dacm",
    version,
    about = "conflict-management engine and encounter simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write trace and metrics.
    Run(RunArgs),
    /// Feed a recorded EC log through the pipeline with one flight under
    /// engine control.
    Replay(ReplayArgs),
    /// Listen for live EC datagrams and emit advisories.
    Listen(listen::ListenArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file path.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for trace.csv, metrics.json, flights.geojson,
    /// advisories.jsonl and commands.jsonl.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with code 3 if the run registers a near mid-air collision.
    #[arg(long)]
    fail_on_nmac: bool,
    /// Send each advisory as a JSON datagram to this UDP address.
    #[arg(long)]
    advisory_port: Option<String>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(clap::Args)]
struct ReplayArgs {
    /// Recorded EC log, one wire-format record per line.
    #[arg(long)]
    input: PathBuf,
    /// Transponder id of the flight to place under engine control.
    #[arg(long)]
    me: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    tick_dt: f64,
    /// Cap the replay duration, seconds (default: records plus 30 s).
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    fail_on_nmac: bool,
    #[arg(long)]
    advisory_port: Option<String>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Listen(args) => listen::cmd_listen(args),
    };
    ExitCode::from(code)
}

/// Load `DACM_CONFIG` defaults (if set), then apply flag overrides on top.
fn effective_config(
    base: &EngineConfig,
    overrides: &ConfigOverrides,
) -> Result<(EngineConfig, Vec<(String, String)>), String> {
    let mut cfg = base.clone();
    let mut applied = Vec::new();
    if let Ok(path) = std::env::var("DACM_CONFIG") {
        let text =
            std::fs::read_to_string(&path).map_err(|e| format!("config file {path}: {e}"))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| {
                    format!("config file {path} line {}: expected key = value", idx + 1)
                })?;
            cfg.set(k, v)
                .map_err(|e| format!("config file {path} line {}: {e}", idx + 1))?;
            applied.push((k.to_string(), v.to_string()));
        }
    }
    let flag_overrides = overrides.apply(&mut cfg).map_err(|e| e.to_string())?;
    applied.extend(flag_overrides);
    Ok((cfg, applied))
}

fn write_outputs(out: &Path, trace: &TraceLog, metrics: &Metrics) -> Result<(), String> {
    std::fs::create_dir_all(out).map_err(|e| format!("creating {}: {e}", out.display()))?;
    let write = |name: &str, data: String| -> Result<(), String> {
        let path = out.join(name);
        std::fs::write(&path, data).map_err(|e| format!("writing {}: {e}", path.display()))
    };
    write("trace.csv", trace.to_csv())?;
    write("metrics.json", metrics.to_json())?;
    write("flights.geojson", trace.to_geojson())?;
    write("advisories.jsonl", trace.advisories_jsonl())?;
    write("commands.jsonl", trace.commands_jsonl())?;
    Ok(())
}

fn send_advisories(port: &str, trace: &TraceLog) {
    let Ok(socket) = std::net::UdpSocket::bind("0.0.0.0:0") else {
        eprintln!("advisory port: could not open a socket");
        return;
    };
    for line in trace.advisories_jsonl().lines() {
        let _ = socket.send_to(line.as_bytes(), port);
    }
}

fn finish_run(
    mut trace: TraceLog,
    metrics: Metrics,
    out: &Path,
    applied: &[(String, String)],
    advisory_port: Option<&str>,
    fail_on_nmac: bool,
) -> u8 {
    for (k, v) in applied {
        trace.record_override(k, v);
    }
    if let Err(e) = write_outputs(out, &trace, &metrics) {
        eprintln!("error: {e}");
        return 1;
    }
    if let Some(port) = advisory_port {
        send_advisories(port, &trace);
    }
    println!(
        "run complete: {} ticks, nmac {}, min separation {:.1} m, outputs in {}",
        metrics.ticks,
        metrics.nmac_count,
        metrics.global_min_separation_m,
        out.display()
    );
    if fail_on_nmac && metrics.nmac_count > 0 {
        eprintln!("near mid-air collision registered; failing as requested");
        return 3;
    }
    0
}

fn cmd_run(args: RunArgs) -> u8 {
    let text = match std::fs::read_to_string(&args.scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: scenario {}: {e}", args.scenario.display());
            return 2;
        }
    };
    let mut scenario = match parse_scenario(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: scenario {}: {e}", args.scenario.display());
            return 2;
        }
    };
    let mut applied = Vec::new();
    if let Some(seed) = args.seed {
        scenario.seed = seed;
        applied.push(("seed".to_string(), seed.to_string()));
    }
    match effective_config(&scenario.config, &args.overrides) {
        Ok((cfg, mut more)) => {
            scenario.config = cfg;
            applied.append(&mut more);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    }
    let world = match World::new(scenario) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let (trace, metrics) = world.run();
    finish_run(
        trace,
        metrics,
        &args.out,
        &applied,
        args.advisory_port.as_deref(),
        args.fail_on_nmac,
    )
}

fn cmd_replay(args: ReplayArgs) -> u8 {
    let text = match std::fs::read_to_string(&args.input) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: replay {}: {e}", args.input.display());
            return 2;
        }
    };
    let mut cfg = EngineConfig::default();
    let applied = match effective_config(&cfg, &args.overrides) {
        Ok((c, a)) => {
            cfg = c;
            a
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let records = match parse_replay_text(&text, &cfg) {
        Ok(r) => r,
        Err((line, e)) => {
            eprintln!("error: {} line {line}: {e}", args.input.display());
            return 2;
        }
    };
    if records.is_empty() {
        // an empty recording is a valid, empty run
        let scenario_id = args
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "replay".into());
        let trace = TraceLog::new(&scenario_id, "empty", args.seed, args.tick_dt, &cfg);
        let metrics =
            dacm_core::simulator::MetricsAccumulator::default().finalize(&BTreeMap::new());
        return finish_run(
            trace,
            metrics,
            &args.out,
            &applied,
            args.advisory_port.as_deref(),
            args.fail_on_nmac,
        );
    }

    let mut by_icao: BTreeMap<String, Vec<dacm_core::ec_ingest::TrackPoint>> = BTreeMap::new();
    let mut last_time = 0.0f64;
    for r in &records {
        last_time = last_time.max(r.observed_at);
        by_icao.entry(r.icao.clone()).or_default().push(r.clone());
    }

    let me_icao = match &args.me {
        Some(icao) => icao.clone(),
        None => {
            eprintln!("error: --me <icao> is required for a non-empty replay");
            return 2;
        }
    };
    let Some(me_records) = by_icao.remove(&me_icao) else {
        eprintln!(
            "error: transponder {me_icao} does not appear in {}",
            args.input.display()
        );
        return 2;
    };
    if me_records.len() < 2 {
        eprintln!("error: transponder {me_icao} needs at least 2 records to derive a route");
        return 2;
    }

    // the controlled flight re-flies its recorded mission under the engine
    let first = &me_records[0];
    let route: Vec<_> = me_records[1..].iter().map(|r| r.position).collect();
    let mut flights = vec![FlightSpec {
        icao: me_icao.clone(),
        behavior: Behavior::DacmControlled,
        props: AircraftProperties::default(),
        initial: first.position,
        initial_heading: first.heading,
        initial_speed_mps: first.speed_mps,
        route,
    }];
    for (icao, recs) in &by_icao {
        let first = &recs[0];
        flights.push(FlightSpec {
            icao: icao.clone(),
            behavior: Behavior::Replay(args.input.display().to_string()),
            props: AircraftProperties::default(),
            initial: first.position,
            initial_heading: first.heading,
            initial_speed_mps: first.speed_mps,
            route: Vec::new(),
        });
    }

    let scenario = Scenario {
        id: args
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "replay".into()),
        tick_dt_s: args.tick_dt,
        duration_s: args.duration.unwrap_or(last_time + 30.0),
        seed: args.seed,
        config: cfg,
        fence: None,
        flights,
    };
    let world = match World::with_replay_data(scenario, by_icao) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let (trace, metrics) = world.run();
    finish_run(
        trace,
        metrics,
        &args.out,
        &applied,
        args.advisory_port.as_deref(),
        args.fail_on_nmac,
    )
}
