//! Run history: one record per flight per tick, plus advisory and command
//! streams, serialised as CSV (with a config header), GeoJSON and
//! JSON-lines. All float formatting goes through the shortest round-trip
//! representation, so identical runs serialise byte-identically.

use crate::avoidance::{Advisory, CaPhase, CommandReason, SweepOutcome, VelocityCommand};
use crate::config::EngineConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// One command emitted by the policy, with its sweep provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub tick: u64,
    pub me: String,
    /// Flight the maneuver resolves; absent for return or hold commands.
    pub intruder: Option<String>,
    /// Sweep resolution, when the safe-waypoint sweep ran.
    pub outcome: Option<SweepOutcome>,
    pub command: VelocityCommand,
}

/// One flight's state at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: u64,
    pub time_s: f64,
    pub icao: String,
    pub lat: f64,
    pub lon: f64,
    pub alt_m: f64,
    pub heading: f64,
    pub speed_mps: f64,
    pub ict_radius_m: f64,
    pub pct_radius_m: f64,
    /// Phase of the conflict-management machine; None for uncontrolled
    /// flights.
    pub ca_phase: Option<CaPhase>,
    /// Highest collision probability against any controlled flight.
    pub pc: Option<f64>,
    /// Reason of the command actuated this tick, if any.
    pub command: Option<CommandReason>,
}

/// Full run history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLog {
    pub scenario_id: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub tick_dt_s: f64,
    /// Engine config entries, plus any CLI overrides recorded verbatim.
    pub header: Vec<(String, String)>,
    pub rows: Vec<TraceRow>,
    pub advisories: Vec<(u64, Advisory)>,
    pub commands: Vec<CommandRecord>,
}

impl TraceLog {
    pub fn new(
        scenario_id: &str,
        scenario_hash: &str,
        seed: u64,
        tick_dt_s: f64,
        config: &EngineConfig,
    ) -> Self {
        TraceLog {
            scenario_id: scenario_id.to_string(),
            scenario_hash: scenario_hash.to_string(),
            seed,
            tick_dt_s,
            header: config.entries(),
            rows: Vec::new(),
            advisories: Vec::new(),
            commands: Vec::new(),
        }
    }

    /// Record a CLI override verbatim in the header.
    pub fn record_override(&mut self, key: &str, value: &str) {
        self.header
            .push((format!("override {key}"), value.to_string()));
    }

    fn phase_label(phase: Option<CaPhase>) -> &'static str {
        match phase {
            None => "",
            Some(CaPhase::Nominal) => "nominal",
            Some(CaPhase::Avoiding) => "avoiding",
            Some(CaPhase::WaitingClear) => "waiting_clear",
            Some(CaPhase::Returning) => "returning",
        }
    }

    fn reason_label(reason: Option<CommandReason>) -> &'static str {
        match reason {
            None => "",
            Some(CommandReason::AvoidIcRz) => "avoid_icrz",
            Some(CommandReason::ReturnToRoute) => "return_to_route",
            Some(CommandReason::Hold) => "hold",
        }
    }

    /// CSV rendering: `# key = value` header lines, the column header, one
    /// row per flight per tick.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# trace v1\n");
        let _ = writeln!(out, "# scenario_id = {}", self.scenario_id);
        let _ = writeln!(out, "# scenario_sha256 = {}", self.scenario_hash);
        let _ = writeln!(out, "# seed = {}", self.seed);
        let _ = writeln!(out, "# tick_dt_s = {}", self.tick_dt_s);
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out.push_str(
            "tick,time_s,icao,lat,lon,alt_m,heading,speed_mps,ict_radius_m,pct_radius_m,ca_phase,pc,command\n",
        );
        for r in &self.rows {
            let pc = r.pc.map(|p| p.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.tick,
                r.time_s,
                r.icao,
                r.lat,
                r.lon,
                r.alt_m,
                r.heading,
                r.speed_mps,
                r.ict_radius_m,
                r.pct_radius_m,
                Self::phase_label(r.ca_phase),
                pc,
                Self::reason_label(r.command),
            );
        }
        out
    }

    /// GeoJSON FeatureCollection: one LineString per flight.
    pub fn to_geojson(&self) -> String {
        let mut tracks: BTreeMap<&str, Vec<[f64; 3]>> = BTreeMap::new();
        for r in &self.rows {
            tracks
                .entry(&r.icao)
                .or_default()
                .push([r.lon, r.lat, r.alt_m]);
        }
        let features: Vec<serde_json::Value> = tracks
            .into_iter()
            .map(|(icao, coords)| {
                serde_json::json!({
                    "type": "Feature",
                    "properties": { "icao": icao },
                    "geometry": {
                        "type": "LineString",
                        "coordinates": coords,
                    }
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "type": "FeatureCollection",
            "features": features,
        }))
        .expect("geojson serialize")
    }

    /// Command stream as JSON lines, one record per emitted command.
    pub fn commands_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.commands {
            let _ = writeln!(
                out,
                "{}",
                serde_json::to_string(rec).expect("command serialize")
            );
        }
        out
    }

    /// Advisory stream as JSON lines: {tick, tier, me, other, pc, action}.
    pub fn advisories_jsonl(&self) -> String {
        let mut out = String::new();
        for (tick, adv) in &self.advisories {
            let record = serde_json::json!({
                "tick": tick,
                "tier": adv.tier,
                "me": adv.me,
                "other": adv.other,
                "pc": adv.pc,
                "action": adv.action,
            });
            let _ = writeln!(out, "{record}");
        }
        out
    }
}
