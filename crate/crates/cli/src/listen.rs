//! Live mode: bind a UDP listener, parse EC datagrams as they arrive, keep
//! a surveillance table, and run the detection tiers against a designated
//! host transponder, emitting advisories as JSON lines. Maneuvers are never
//! actuated here — there is no vehicle on the other end — so imminent
//! conflicts surface as advisories only.

use crate::overrides::ConfigOverrides;
use dacm_core::airspace_filter::filter_snapshot;
use dacm_core::avoidance::{policy_step, AircraftProperties, CaState, PolicyInput};
use dacm_core::conflict_zones::ZoneSet;
use dacm_core::ec_ingest::{compensate_latency, parse_message, TrackPoint};
use dacm_core::trajectory_prediction::{build_tube, stt_intersects, Waypoint, WaypointHistory};
use dacm_core::EngineConfig;
use std::collections::BTreeMap;
use std::io::Write as _;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

#[derive(clap::Args)]
pub struct ListenArgs {
    /// UDP bind address for the EC feed.
    #[arg(long, default_value = "0.0.0.0:2947")]
    pub bind: String,
    /// Host transponder id to assess traffic against.
    #[arg(long)]
    pub me: Option<String>,
    /// Stop after this many seconds (default: run until interrupted).
    #[arg(long)]
    pub duration: Option<f64>,
    /// Emit a snapshot dump every N ticks.
    #[arg(long, default_value_t = 10)]
    pub snapshot_every: u64,
    #[arg(long, default_value_t = 0.5)]
    pub tick_dt: f64,
    /// Send advisories as JSON datagrams to this UDP address.
    #[arg(long)]
    pub advisory_port: Option<String>,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

fn say(line: &str) {
    let mut out = std::io::stdout();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn wall_clock() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn cmd_listen(args: ListenArgs) -> u8 {
    let mut cfg = EngineConfig::default();
    match crate::effective_config(&cfg, &args.overrides) {
        Ok((c, _)) => cfg = c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    }
    let socket = match std::net::UdpSocket::bind(&args.bind) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: bind {}: {e}", args.bind);
            return 1;
        }
    };
    let local = socket
        .local_addr()
        .map(|a| a.to_string())
        .unwrap_or_default();
    if socket
        .set_read_timeout(Some(Duration::from_millis(50)))
        .is_err()
    {
        eprintln!("error: could not set the socket timeout");
        return 1;
    }
    say(&format!("listening on {local}"));

    let advisory_socket = args
        .advisory_port
        .as_ref()
        .and_then(|_| std::net::UdpSocket::bind("0.0.0.0:0").ok());

    let params = match cfg.zone_params() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let filter_cfg = match cfg.filter_config() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let props = AircraftProperties::default();

    let started = Instant::now();
    let mut next_tick = started + Duration::from_secs_f64(args.tick_dt);
    let mut tick: u64 = 0;
    let mut seen: BTreeMap<String, u64> = BTreeMap::new();
    let mut tracks: BTreeMap<String, TrackPoint> = BTreeMap::new();
    let mut histories: BTreeMap<String, WaypointHistory> = BTreeMap::new();
    let mut ca_state = CaState::default();
    let mut malformed: u64 = 0;
    let mut stale: u64 = 0;
    let mut buf = [0u8; 2048];

    loop {
        match socket.recv_from(&mut buf) {
            Ok((n, _)) => match parse_message(&buf[..n]) {
                Ok(msg) => {
                    *seen.entry(msg.icao.clone()).or_insert(0) += 1;
                    match compensate_latency(&msg, wall_clock(), cfg.staleness_limit_s) {
                        Ok(tp) => {
                            tracks.insert(tp.icao.clone(), tp);
                        }
                        Err(_) => stale += 1,
                    }
                }
                Err(_) => malformed += 1,
            },
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut => {}
            Err(e) => {
                eprintln!("error: receive failed: {e}");
                return 1;
            }
        }

        if Instant::now() >= next_tick {
            tick += 1;
            next_tick += Duration::from_secs_f64(args.tick_dt);
            let now = wall_clock();
            tracks.retain(|_, tp| now - tp.observed_at <= cfg.staleness_limit_s);

            let mut advisories = Vec::new();
            let mut roi_count = 0usize;
            let mut moi_count = 0usize;
            if let Some(me_icao) = &args.me {
                if let Some(me) = tracks.get(me_icao).cloned() {
                    let snapshot =
                        filter_snapshot(&tracks, &me, &filter_cfg, now, cfg.staleness_limit_s);
                    roi_count = snapshot.roi_flights.len();
                    moi_count = snapshot.moi_flights.len();

                    for bf in snapshot.roi_flights.iter().chain(
                        snapshot
                            .moi_flights
                            .iter()
                            .filter(|b| !b.excluded_from_prediction),
                    ) {
                        let h = histories.entry(bf.track.icao.clone()).or_insert_with(|| {
                            WaypointHistory::new(bf.track.icao.clone(), cfg.history_capacity)
                        });
                        h.push(Waypoint {
                            position: bf.track.position,
                            heading: bf.track.heading,
                            speed_mps: bf.track.speed_mps,
                            time: now,
                        });
                    }
                    let me_hist = histories.entry(me_icao.clone()).or_insert_with(|| {
                        WaypointHistory::new(me_icao.clone(), cfg.history_capacity)
                    });
                    me_hist.push(Waypoint {
                        position: me.position,
                        heading: me.heading,
                        speed_mps: me.speed_mps,
                        time: now,
                    });

                    let me_zone = ZoneSet::from_track(&me, &params);
                    let other_zones: Vec<ZoneSet> = snapshot
                        .roi_flights
                        .iter()
                        .map(|bf| ZoneSet::from_track(&bf.track, &params))
                        .collect();
                    let assessments: Vec<_> = other_zones
                        .iter()
                        .map(|z| dacm_core::conflict_zones::assess_pair(&me_zone, z))
                        .collect();

                    let me_tube = histories.get(me_icao).and_then(|h| {
                        build_tube(
                            h,
                            me_zone.ict_radius_m,
                            cfg.prediction_horizon_s,
                            cfg.prediction_dt_s,
                            now,
                        )
                        .ok()
                    });
                    let mut tube_conflicts = Vec::new();
                    if let Some(mt) = &me_tube {
                        for z in &other_zones {
                            if let Some(h) = histories.get(&z.icao) {
                                if let Ok(tube) = build_tube(
                                    h,
                                    z.ict_radius_m,
                                    cfg.prediction_horizon_s,
                                    cfg.prediction_dt_s,
                                    now,
                                ) {
                                    if let Some((t, _)) = stt_intersects(mt, &tube) {
                                        tube_conflicts.push((z.icao.clone(), t));
                                    }
                                }
                            }
                        }
                    }

                    let input = PolicyInput {
                        me: &me,
                        me_zone: &me_zone,
                        other_zones: &other_zones,
                        assessments: &assessments,
                        tube_conflicts: &tube_conflicts,
                        props: &props,
                        route: &[],
                        cruise_speed_mps: me.speed_mps,
                        params: &params,
                        predictive_engage_s: cfg.predictive_engage_s,
                        fence: None,
                    };
                    let output = policy_step(&input, &ca_state);
                    ca_state = output.state;
                    advisories = output.advisories;
                }
            }

            for adv in &advisories {
                let record = serde_json::json!({
                    "tick": tick,
                    "tier": adv.tier,
                    "me": adv.me,
                    "other": adv.other,
                    "pc": adv.pc,
                    "action": adv.action,
                })
                .to_string();
                say(&format!("advisory {record}"));
                if let (Some(sock), Some(port)) = (&advisory_socket, &args.advisory_port) {
                    let _ = sock.send_to(record.as_bytes(), port);
                }
            }

            if args.snapshot_every > 0 && tick % args.snapshot_every == 0 {
                let icaos: Vec<&str> = seen.keys().map(|s| s.as_str()).collect();
                say(&format!(
                    "snapshot t={:.1} tracked={} [{}] roi={roi_count} moi={moi_count} malformed={malformed} stale={stale}",
                    started.elapsed().as_secs_f64(),
                    seen.len(),
                    icaos.join(" "),
                ));
            }

            if let Some(limit) = args.duration {
                if started.elapsed().as_secs_f64() >= limit {
                    say(&format!(
                        "listen complete: {} transponders seen, {malformed} malformed, {stale} stale",
                        seen.len()
                    ));
                    return 0;
                }
            }
        }
    }
}
