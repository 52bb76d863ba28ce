//! Declarative encounter descriptions.
//!
//! Scenario files are versioned line-oriented text: top-level `key = value`
//! pairs (engine config keys are accepted directly) followed by one
//! `[flight]` block per aircraft. Unknown keys are rejected with the line
//! number. The canonical rendering of a scenario is hashed into the trace
//! header so any run can be tied back to its exact inputs.

use crate::avoidance::{AircraftProperties, ControlType, Geofence, MissionType};
use crate::config::EngineConfig;
use crate::geodesy::GeoPoint;
use crate::units::knots_to_mps;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("scenario invalid: {0}")]
    Validation(String),
}

fn perr(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        message: message.into(),
    }
}

/// How a flight is driven during the run.
#[derive(Debug, Clone, PartialEq)]
pub enum Behavior {
    /// Flies its route open-loop.
    Scripted,
    /// Runs the full detect-and-avoid pipeline.
    DacmControlled,
    /// Positions come from a recorded EC log.
    Replay(String),
    /// Positions are injected at runtime from a live feed.
    Live,
}

impl Behavior {
    fn label(&self) -> String {
        match self {
            Behavior::Scripted => "scripted".into(),
            Behavior::DacmControlled => "dacm".into(),
            Behavior::Replay(path) => format!("replay {path}"),
            Behavior::Live => "live".into(),
        }
    }
}

/// One aircraft in the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightSpec {
    pub icao: String,
    pub behavior: Behavior,
    pub props: AircraftProperties,
    pub initial: GeoPoint,
    pub initial_heading: f64,
    pub initial_speed_mps: f64,
    pub route: Vec<GeoPoint>,
}

/// A full encounter description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub tick_dt_s: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub config: EngineConfig,
    pub fence: Option<Geofence>,
    pub flights: Vec<FlightSpec>,
}

impl Scenario {
    /// Canonical text rendering; `parse_scenario` of this text reproduces
    /// the scenario.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("version = 1\n");
        out.push_str(&format!("id = {}\n", self.id));
        out.push_str(&format!("tick_dt = {}\n", self.tick_dt_s));
        out.push_str(&format!("duration = {}\n", self.duration_s));
        out.push_str(&format!("seed = {}\n", self.seed));
        for (k, v) in self.config.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        match &self.fence {
            Some(Geofence::Circle { center, radius_m }) => {
                out.push_str(&format!(
                    "fence_circle = {},{},{}\n",
                    center.lat, center.lon, radius_m
                ));
            }
            Some(Geofence::Polygon(vs)) => {
                let parts: Vec<String> =
                    vs.iter().map(|v| format!("{},{}", v.lat, v.lon)).collect();
                out.push_str(&format!("fence_polygon = {}\n", parts.join(";")));
            }
            None => {}
        }
        for f in &self.flights {
            out.push_str("\n[flight]\n");
            out.push_str(&format!("icao = {}\n", f.icao));
            out.push_str(&format!("behavior = {}\n", f.behavior.label()));
            let control = match f.props.control_type {
                ControlType::Autonomous => "autonomous",
                ControlType::Pilot => "pilot",
            };
            let mission = match f.props.mission_type {
                MissionType::GroundBased => "ground",
                MissionType::AirBased => "air",
            };
            out.push_str(&format!("control = {control}\n"));
            out.push_str(&format!("mission = {mission}\n"));
            out.push_str(&format!("model = {}\n", f.props.model));
            out.push_str(&format!("lat = {}\n", f.initial.lat));
            out.push_str(&format!("lon = {}\n", f.initial.lon));
            out.push_str(&format!("alt_m = {}\n", f.initial.alt_m));
            out.push_str(&format!("heading = {}\n", f.initial_heading));
            out.push_str(&format!("speed_mps = {}\n", f.initial_speed_mps));
            out.push_str(&format!(
                "diversion_angle = {}\n",
                f.props.diversion_angle_deg
            ));
            out.push_str(&format!("upward_move_m = {}\n", f.props.upward_move_m));
            out.push_str(&format!("downward_move_m = {}\n", f.props.downward_move_m));
            out.push_str(&format!("max_speed_mps = {}\n", f.props.max_speed_mps));
            out.push_str(&format!("min_speed_mps = {}\n", f.props.min_speed_mps));
            out.push_str(&format!(
                "max_turn_rate_dps = {}\n",
                f.props.max_turn_rate_dps
            ));
            out.push_str(&format!(
                "max_climb_rate_mps = {}\n",
                f.props.max_climb_rate_mps
            ));
            for wp in &f.route {
                out.push_str(&format!("route = {},{},{}\n", wp.lat, wp.lon, wp.alt_m));
            }
        }
        out
    }

    /// SHA-256 of the canonical rendering, hex.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_text().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.id.is_empty() {
            return Err(ScenarioError::Validation("id must not be empty".into()));
        }
        if !(self.tick_dt_s > 0.0) {
            return Err(ScenarioError::Validation("tick_dt must be positive".into()));
        }
        if !(self.duration_s > 0.0) {
            return Err(ScenarioError::Validation(
                "duration must be positive".into(),
            ));
        }
        self.config
            .zone_params()
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        self.config
            .filter_config()
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        if self.flights.is_empty() {
            return Err(ScenarioError::Validation("scenario has no flights".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.flights {
            if !seen.insert(f.icao.clone()) {
                return Err(ScenarioError::Validation(format!(
                    "duplicate icao {}",
                    f.icao
                )));
            }
            if f.icao.len() != 6
                || !f
                    .icao
                    .chars()
                    .all(|c| c.is_ascii_digit() || ('A'..='F').contains(&c))
            {
                return Err(ScenarioError::Validation(format!(
                    "icao {:?} is not a 6-digit uppercase hex id",
                    f.icao
                )));
            }
            if f.behavior == Behavior::DacmControlled && f.route.is_empty() {
                return Err(ScenarioError::Validation(format!(
                    "dacm flight {} needs a route",
                    f.icao
                )));
            }
            GeoPoint::new(f.initial.lat, f.initial.lon, f.initial.alt_m)
                .map_err(|e| ScenarioError::Validation(format!("{}: {e}", f.icao)))?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct FlightDraft {
    icao: Option<String>,
    behavior: Option<Behavior>,
    props: Option<AircraftProperties>,
    lat: Option<f64>,
    lon: Option<f64>,
    alt_m: Option<f64>,
    heading: Option<f64>,
    speed_mps: Option<f64>,
    route: Vec<GeoPoint>,
    start_line: usize,
}

impl FlightDraft {
    fn props(&mut self) -> &mut AircraftProperties {
        self.props.get_or_insert_with(AircraftProperties::default)
    }

    fn finish(self) -> Result<FlightSpec, ScenarioError> {
        let line = self.start_line;
        let icao = self
            .icao
            .ok_or_else(|| perr(line, "flight block missing icao"))?;
        let initial = GeoPoint::new(
            self.lat
                .ok_or_else(|| perr(line, "flight block missing lat"))?,
            self.lon
                .ok_or_else(|| perr(line, "flight block missing lon"))?,
            self.alt_m.unwrap_or(0.0),
        )
        .map_err(|e| perr(line, e.to_string()))?;
        Ok(FlightSpec {
            icao,
            behavior: self.behavior.unwrap_or(Behavior::Scripted),
            props: self.props.unwrap_or_default(),
            initial,
            initial_heading: self.heading.unwrap_or(0.0),
            initial_speed_mps: self.speed_mps.unwrap_or(0.0),
            route: self.route,
        })
    }
}

fn parse_latlon(line: usize, value: &str, want_alt: bool) -> Result<GeoPoint, ScenarioError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let expected = if want_alt { 3 } else { 2 };
    if parts.len() != expected {
        return Err(perr(
            line,
            format!(
                "expected {expected} comma-separated numbers, got {:?}",
                value
            ),
        ));
    }
    let mut nums = Vec::new();
    for p in &parts {
        nums.push(
            p.parse::<f64>()
                .map_err(|_| perr(line, format!("{p:?} is not a number")))?,
        );
    }
    GeoPoint::new(nums[0], nums[1], if want_alt { nums[2] } else { 0.0 })
        .map_err(|e| perr(line, e.to_string()))
}

/// Parse a scenario from its text form. Every error carries the offending
/// line number; unknown keys are rejected.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut id = String::new();
    let mut tick_dt = 0.5f64;
    let mut duration = 0.0f64;
    let mut seed = 0u64;
    let mut config = EngineConfig::default();
    let mut fence: Option<Geofence> = None;
    let mut flights: Vec<FlightSpec> = Vec::new();
    let mut draft: Option<FlightDraft> = None;
    let mut version_seen = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "[flight]" {
            if let Some(d) = draft.take() {
                flights.push(d.finish()?);
            }
            draft = Some(FlightDraft {
                start_line: lineno,
                ..FlightDraft::default()
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| perr(lineno, format!("expected `key = value`, got {line:?}")))?;
        if value.is_empty() {
            return Err(perr(lineno, format!("key {key:?} has no value")));
        }
        let num = |v: &str| -> Result<f64, ScenarioError> {
            v.parse::<f64>()
                .map_err(|_| perr(lineno, format!("{v:?} is not a number")))
        };

        match &mut draft {
            None => match key {
                "version" => {
                    if value != "1" {
                        return Err(perr(lineno, format!("unsupported version {value}")));
                    }
                    version_seen = true;
                }
                "id" => id = value.to_string(),
                "tick_dt" => tick_dt = num(value)?,
                "duration" => duration = num(value)?,
                "seed" => {
                    seed = value
                        .parse::<u64>()
                        .map_err(|_| perr(lineno, format!("{value:?} is not a seed")))?
                }
                "fence_circle" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 3 {
                        return Err(perr(lineno, "fence_circle wants lat,lon,radius_m"));
                    }
                    let center =
                        parse_latlon(lineno, &format!("{},{}", parts[0], parts[1]), false)?;
                    fence = Some(Geofence::Circle {
                        center,
                        radius_m: num(parts[2])?,
                    });
                }
                "fence_polygon" => {
                    let mut vertices = Vec::new();
                    for pair in value.split(';') {
                        vertices.push(parse_latlon(lineno, pair.trim(), false)?);
                    }
                    fence =
                        Some(Geofence::polygon(vertices).map_err(|e| perr(lineno, e.to_string()))?);
                }
                other => {
                    config
                        .set(other, value)
                        .map_err(|e| perr(lineno, e.to_string()))?;
                }
            },
            Some(d) => match key {
                "icao" => d.icao = Some(value.to_string()),
                "behavior" => {
                    d.behavior = Some(match value {
                        "scripted" => Behavior::Scripted,
                        "dacm" => Behavior::DacmControlled,
                        "live" => Behavior::Live,
                        other => {
                            if let Some(path) = other.strip_prefix("replay ") {
                                Behavior::Replay(path.trim().to_string())
                            } else {
                                return Err(perr(
                                    lineno,
                                    format!("unknown behavior {other:?} (scripted|dacm|replay <file>|live)"),
                                ));
                            }
                        }
                    })
                }
                "control" => {
                    d.props().control_type = match value {
                        "autonomous" => ControlType::Autonomous,
                        "pilot" => ControlType::Pilot,
                        other => return Err(perr(lineno, format!("unknown control {other:?}"))),
                    }
                }
                "mission" => {
                    d.props().mission_type = match value {
                        "ground" => MissionType::GroundBased,
                        "air" => MissionType::AirBased,
                        other => return Err(perr(lineno, format!("unknown mission {other:?}"))),
                    }
                }
                "model" => d.props().model = value.to_string(),
                "lat" => d.lat = Some(num(value)?),
                "lon" => d.lon = Some(num(value)?),
                "alt_m" => d.alt_m = Some(num(value)?),
                "heading" => d.heading = Some(num(value)?),
                "speed_kn" => d.speed_mps = Some(knots_to_mps(num(value)?)),
                "speed_mps" => d.speed_mps = Some(num(value)?),
                "route" => d.route.push(parse_latlon(lineno, value, true)?),
                "diversion_angle" => d.props().diversion_angle_deg = num(value)?,
                "upward_move_m" => d.props().upward_move_m = num(value)?,
                "downward_move_m" => d.props().downward_move_m = num(value)?,
                "max_speed_mps" => d.props().max_speed_mps = num(value)?,
                "min_speed_mps" => d.props().min_speed_mps = num(value)?,
                "max_turn_rate_dps" => d.props().max_turn_rate_dps = num(value)?,
                "max_climb_rate_mps" => d.props().max_climb_rate_mps = num(value)?,
                other => return Err(perr(lineno, format!("unknown flight key \"{other}\""))),
            },
        }
    }
    if let Some(d) = draft.take() {
        flights.push(d.finish()?);
    }
    if !version_seen {
        return Err(perr(1, "missing `version = 1`"));
    }

    let scenario = Scenario {
        id,
        tick_dt_s: tick_dt,
        duration_s: duration,
        seed,
        config,
        fence,
        flights,
    };
    scenario.validate()?;
    Ok(scenario)
}
