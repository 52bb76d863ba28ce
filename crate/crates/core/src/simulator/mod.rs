//! Deterministic discrete-time world: scripted flights fly their routes,
//! replayed and live flights follow injected track points, and
//! detect-and-avoid hosts run the full pipeline every tick — banding,
//! estimation, zone assessment, tube prediction, policy — with configurable
//! feed and actuation latencies between sensing and motion. Runs are scored
//! against the separation standards and logged tick by tick.

pub mod kinematics;
pub mod metrics;
pub mod scenario;
pub mod trace;

pub use kinematics::{advance, apply_command, route_guidance, Guidance};
pub use metrics::{Metrics, MetricsAccumulator};
pub use scenario::{parse_scenario, Behavior, FlightSpec, Scenario, ScenarioError};
pub use trace::{CommandRecord, TraceLog, TraceRow};

use crate::airspace_filter::{filter_snapshot, FilterConfig};
use crate::avoidance::{
    policy_step, CaPhase, CaState, CommandReason, PolicyInput, VelocityCommand,
};
use crate::config::EngineConfig;
use crate::conflict_zones::{assess_pair, zone_radius, ConflictAssessment, ZoneParams, ZoneSet};
use crate::ec_ingest::{compensate_latency, parse_message, IngestError, TrackPoint};
use crate::exec;
use crate::geodesy::{destination_point, direct_distance, from_enu, ground_distance, GeoPoint};
use crate::state_estimation::{
    dkf_init, dkf_predict, dkf_update, EstimationError, KalmanState, TelemetrySync,
};
use crate::trajectory_prediction::{
    build_tube, stt_intersects, SafetyTravelTube, Waypoint, WaypointHistory,
};
use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("replay file {path}: {source}")]
    ReplayIo {
        path: String,
        source: std::io::Error,
    },
    #[error("replay file {path} line {line}: {source}")]
    ReplayFormat {
        path: String,
        line: usize,
        source: IngestError,
    },
}

/// Per-flight estimator and policy state owned by a detect-and-avoid host.
#[derive(Debug)]
struct DacmBrain {
    ca_state: CaState,
    kalman: BTreeMap<String, KalmanState>,
    own_kalman: Option<KalmanState>,
    telemetry_sync: TelemetrySync,
    histories: BTreeMap<String, WaypointHistory>,
    pending_commands: VecDeque<(u64, VelocityCommand)>,
    active_command: Option<VelocityCommand>,
}

impl DacmBrain {
    fn new(telemetry_alpha: f64) -> Self {
        DacmBrain {
            ca_state: CaState::default(),
            kalman: BTreeMap::new(),
            own_kalman: None,
            telemetry_sync: TelemetrySync::new(telemetry_alpha),
            histories: BTreeMap::new(),
            pending_commands: VecDeque::new(),
            active_command: None,
        }
    }
}

#[derive(Debug)]
struct FlightSim {
    spec: FlightSpec,
    track: TrackPoint,
    next_waypoint: usize,
    flown_m: f64,
    brain: Option<DacmBrain>,
    /// Recorded (replay) or injected (live) track points, engine-time order.
    external: VecDeque<TrackPoint>,
    /// True-state history for feed-latency observation.
    history: VecDeque<TrackPoint>,
    snapped_this_tick: bool,
}

impl FlightSim {
    fn completed_route(&self) -> bool {
        !self.spec.route.is_empty() && self.next_waypoint >= self.spec.route.len()
    }

    fn planned_length_m(&self) -> f64 {
        if self.spec.route.is_empty() {
            return 0.0;
        }
        let mut len = ground_distance(&self.spec.initial, &self.spec.route[0]);
        for seg in self.spec.route.windows(2) {
            len += ground_distance(&seg[0], &seg[1]);
        }
        len
    }
}

/// The simulation world. Construct from a [`Scenario`], then [`World::step`]
/// it or [`World::run`] to completion.
pub struct World {
    pub scenario: Scenario,
    cfg: EngineConfig,
    params: ZoneParams,
    filter_cfg: FilterConfig,
    tick: u64,
    time_s: f64,
    flights: BTreeMap<String, FlightSim>,
    rng: ChaCha20Rng,
    pub trace: TraceLog,
    acc: MetricsAccumulator,
    actuation_ticks: u64,
    history_keep: usize,
}

impl World {
    pub fn new(scenario: Scenario) -> Result<World, WorldError> {
        Self::with_replay_data(scenario, BTreeMap::new())
    }

    /// Build a world, supplying replay streams directly instead of loading
    /// the files named in the scenario.
    pub fn with_replay_data(
        scenario: Scenario,
        mut replay_data: BTreeMap<String, Vec<TrackPoint>>,
    ) -> Result<World, WorldError> {
        scenario.validate()?;
        let cfg = scenario.config.clone();
        let params = cfg
            .zone_params()
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        let filter_cfg = cfg
            .filter_config()
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        let dt = scenario.tick_dt_s;
        let feed_ticks = (cfg.feed_latency_s / dt).round() as u64;
        let actuation_ticks = (cfg.actuation_latency_s / dt).round() as u64;

        for f in &scenario.flights {
            if let Behavior::Replay(path) = &f.behavior {
                if !replay_data.contains_key(&f.icao) {
                    let records = load_replay_file(path, &cfg)?;
                    let filtered: Vec<TrackPoint> =
                        records.into_iter().filter(|tp| tp.icao == f.icao).collect();
                    replay_data.insert(f.icao.clone(), filtered);
                }
            }
        }

        let trace = TraceLog::new(
            &scenario.id,
            &scenario.hash(),
            scenario.seed,
            scenario.tick_dt_s,
            &cfg,
        );

        let mut flights = BTreeMap::new();
        for spec in &scenario.flights {
            let track = TrackPoint {
                icao: spec.icao.clone(),
                position: spec.initial,
                heading: spec.initial_heading,
                speed_mps: spec.initial_speed_mps,
                observed_at: 0.0,
                latency_s: 0.0,
            };
            let brain = match spec.behavior {
                Behavior::DacmControlled => Some(DacmBrain::new(cfg.telemetry_alpha)),
                _ => None,
            };
            let external = replay_data
                .remove(&spec.icao)
                .map(VecDeque::from)
                .unwrap_or_default();
            let mut history = VecDeque::new();
            history.push_back(track.clone());
            flights.insert(
                spec.icao.clone(),
                FlightSim {
                    spec: spec.clone(),
                    track,
                    next_waypoint: 0,
                    flown_m: 0.0,
                    brain,
                    external,
                    history,
                    snapped_this_tick: false,
                },
            );
        }

        let mut world = World {
            rng: ChaCha20Rng::seed_from_u64(scenario.seed),
            cfg,
            params,
            filter_cfg,
            tick: 0,
            time_s: 0.0,
            flights,
            trace,
            acc: MetricsAccumulator::default(),
            actuation_ticks,
            history_keep: (feed_ticks as usize) + 4,
            scenario,
        };
        world.append_trace_rows(&BTreeMap::new());
        Ok(world)
    }

    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn track_of(&self, icao: &str) -> Option<&TrackPoint> {
        self.flights.get(icao).map(|f| &f.track)
    }

    pub fn ca_phase_of(&self, icao: &str) -> Option<CaPhase> {
        self.flights
            .get(icao)
            .and_then(|f| f.brain.as_ref())
            .map(|b| b.ca_state.phase)
    }

    /// Inject a live observation; unknown transponders create a live flight
    /// on the fly.
    pub fn inject_external(&mut self, tp: TrackPoint) {
        let icao = tp.icao.clone();
        match self.flights.get_mut(&icao) {
            Some(f) => f.external.push_back(tp),
            None => {
                let spec = FlightSpec {
                    icao: icao.clone(),
                    behavior: Behavior::Live,
                    props: Default::default(),
                    initial: tp.position,
                    initial_heading: tp.heading,
                    initial_speed_mps: tp.speed_mps,
                    route: Vec::new(),
                };
                let mut history = VecDeque::new();
                history.push_back(tp.clone());
                self.flights.insert(
                    icao,
                    FlightSim {
                        spec,
                        track: tp,
                        next_waypoint: 0,
                        flown_m: 0.0,
                        brain: None,
                        external: VecDeque::new(),
                        history,
                        snapped_this_tick: false,
                    },
                );
            }
        }
    }

    /// All flights currently tracked, freshest true state each.
    pub fn current_tracks(&self) -> BTreeMap<String, TrackPoint> {
        self.flights
            .iter()
            .map(|(k, f)| (k.clone(), f.track.clone()))
            .collect()
    }

    /// One tick: ingest external points, move everyone, run the pipeline
    /// for each controlled flight, score and log.
    pub fn step(&mut self) {
        self.tick += 1;
        self.time_s = self.tick as f64 * self.scenario.tick_dt_s;
        let dt = self.scenario.tick_dt_s;
        let now = self.time_s;
        let accel = self.cfg.accel_limit_mps2;
        let tick = self.tick;
        let history_keep = self.history_keep;

        // 1. external streams: adopt any records due by now
        for f in self.flights.values_mut() {
            f.snapped_this_tick = false;
            while let Some(front) = f.external.front() {
                if front.observed_at <= now + 1e-9 {
                    let mut tp = f.external.pop_front().expect("front exists");
                    tp.observed_at = tp.observed_at.min(now);
                    f.track = tp;
                    f.snapped_this_tick = true;
                } else {
                    break;
                }
            }
        }

        // 2. motion under last tick's decisions
        for f in self.flights.values_mut() {
            let old_pos = f.track.position;
            let was_complete = f.completed_route();
            match f.spec.behavior {
                Behavior::Scripted => {
                    let capture = 1.5 * f.track.speed_mps * dt;
                    let (guidance, idx) = route_guidance(
                        &f.track,
                        &f.spec.route,
                        f.next_waypoint,
                        f.spec.initial_speed_mps,
                        capture,
                    );
                    f.next_waypoint = idx;
                    let g = guidance.unwrap_or_else(|| Guidance::hold(&f.track));
                    f.track = advance(&f.track, &g, &f.spec.props, dt, accel, now);
                }
                Behavior::DacmControlled => {
                    let brain = f.brain.as_mut().expect("dacm flight has a brain");
                    while let Some((due, _)) = brain.pending_commands.front() {
                        if *due <= tick {
                            let (_, cmd) = brain.pending_commands.pop_front().expect("front");
                            brain.active_command = Some(cmd);
                        } else {
                            break;
                        }
                    }
                    let capture = 1.5 * f.track.speed_mps * dt;
                    let (route_g, idx) = route_guidance(
                        &f.track,
                        &f.spec.route,
                        f.next_waypoint,
                        f.spec.initial_speed_mps,
                        capture,
                    );
                    f.next_waypoint = idx;
                    let phase = brain.ca_state.phase;
                    let g = match (&brain.active_command, phase) {
                        (Some(cmd), p) if p != CaPhase::Nominal => Guidance::from_command(cmd),
                        (_, CaPhase::Nominal) => {
                            route_g.unwrap_or_else(|| Guidance::hold(&f.track))
                        }
                        _ => Guidance::hold(&f.track),
                    };
                    f.track = advance(&f.track, &g, &f.spec.props, dt, accel, now);
                }
                Behavior::Replay(_) | Behavior::Live => {
                    if !f.snapped_this_tick {
                        // constant-velocity extrapolation between records
                        let g = Guidance::hold(&f.track);
                        f.track = advance(&f.track, &g, &f.spec.props, dt, accel, now);
                    } else {
                        f.track.observed_at = now;
                    }
                }
            }
            let new_pos = f.track.position;
            // path length counts up to route completion; the post-capture
            // drift of the closing tick is not deviation
            if !was_complete && !f.completed_route() {
                f.flown_m += direct_distance(&old_pos, &new_pos);
            }
            f.history.push_back(f.track.clone());
            if f.history.len() > history_keep {
                f.history.pop_front();
            }
        }

        // 3. detect-and-avoid pipeline per controlled flight
        let mut pc_by_icao: BTreeMap<String, f64> = BTreeMap::new();
        let dacm_icaos: Vec<String> = self
            .flights
            .iter()
            .filter(|(_, f)| matches!(f.spec.behavior, Behavior::DacmControlled))
            .map(|(k, _)| k.clone())
            .collect();
        for me_icao in &dacm_icaos {
            self.pipeline_tick(me_icao, &mut pc_by_icao);
        }

        // 4. separation scoring on true states
        self.acc.tick();
        let tracks: Vec<(String, GeoPoint)> = self
            .flights
            .values()
            .map(|f| (f.track.icao.clone(), f.track.position))
            .collect();
        for i in 0..tracks.len() {
            for j in i + 1..tracks.len() {
                let (a, b) = (&tracks[i], &tracks[j]);
                let horizontal = ground_distance(&a.1, &b.1);
                let vertical = (a.1.alt_m - b.1.alt_m).abs();
                let direct = (horizontal * horizontal + vertical * vertical).sqrt();
                self.acc
                    .observe_pair(&a.0, &b.0, horizontal, vertical, direct);
            }
        }

        self.append_trace_rows(&pc_by_icao);
    }

    /// Observe one flight as the EC channel would see it: the state
    /// `feed_latency` ago, optionally position-perturbed, dead-reckoned
    /// forward to now.
    fn observe(&mut self, icao: &str, now: f64) -> TrackPoint {
        let chosen = {
            let f = &self.flights[icao];
            let target_time = now - self.cfg.feed_latency_s;
            let mut chosen = f.history.front().expect("history never empty").clone();
            for entry in f.history.iter() {
                if entry.observed_at <= target_time + 1e-9 {
                    chosen = entry.clone();
                } else {
                    break;
                }
            }
            chosen
        };
        let mut reported = chosen.position;
        if self.cfg.noise_sigma_m > 0.0 {
            let normal = Normal::new(0.0, self.cfg.noise_sigma_m).expect("sigma > 0");
            let e = normal.sample(&mut self.rng);
            let n = normal.sample(&mut self.rng);
            let u = normal.sample(&mut self.rng);
            reported = from_enu(&reported, [e, n, u]);
        }
        let latency = (now - chosen.observed_at).max(0.0);
        let position = destination_point(
            &reported,
            chosen.heading,
            chosen.speed_mps * latency,
            reported.alt_m,
        );
        TrackPoint {
            icao: icao.to_string(),
            position,
            heading: chosen.heading,
            speed_mps: chosen.speed_mps,
            observed_at: now,
            latency_s: latency,
        }
    }

    /// Kalman-correct an observed track, lazily initialising and
    /// re-anchoring when the flight leaves the tangent-plane range. The
    /// filter runs with a motion input — the state advances by the reported
    /// velocity each step and the filter smooths the residual error.
    fn kalman_correct(
        slot: &mut Option<KalmanState>,
        obs: &TrackPoint,
        cfg: &EngineConfig,
        dt: f64,
    ) -> GeoPoint {
        let mut state = match slot.take() {
            Some(s) => s,
            None => match dkf_init(&obs.position, &cfg.noise_config(), cfg.process_noise_mode) {
                Ok(s) => s,
                Err(_) => return obs.position,
            },
        };
        let heading = obs.heading.to_radians();
        state.input_mat = Matrix3::identity();
        state.input_vec = Vector3::new(
            obs.speed_mps * heading.sin() * dt,
            obs.speed_mps * heading.cos() * dt,
            0.0,
        );
        state = dkf_predict(&state);
        match dkf_update(&state, &obs.position) {
            Ok(next) => {
                let estimate = next.estimate();
                *slot = Some(next);
                estimate
            }
            Err(EstimationError::TangentPlaneRange(_)) => {
                *slot = dkf_init(&obs.position, &cfg.noise_config(), cfg.process_noise_mode).ok();
                obs.position
            }
            Err(_) => {
                *slot = Some(state);
                obs.position
            }
        }
    }

    fn pipeline_tick(&mut self, me_icao: &str, pc_by_icao: &mut BTreeMap<String, f64>) {
        let now = self.time_s;
        let dt = self.scenario.tick_dt_s;
        let cfg = self.cfg.clone();
        let params = self.params;
        let filter_cfg = self.filter_cfg;
        let tick = self.tick;
        let actuation_ticks = self.actuation_ticks;

        // observations of every other flight through the EC channel
        let other_icaos: Vec<String> = self
            .flights
            .keys()
            .filter(|k| k.as_str() != me_icao)
            .cloned()
            .collect();
        let mut observed: BTreeMap<String, TrackPoint> = BTreeMap::new();
        for icao in &other_icaos {
            observed.insert(icao.clone(), self.observe(icao, now));
        }
        let own_obs = self.observe(me_icao, now);
        let telemetry = self.flights[me_icao].track.clone();
        let fence = self.scenario.fence.clone();

        let f = self.flights.get_mut(me_icao).expect("exists");
        let spec = f.spec.clone();
        let next_waypoint = f.next_waypoint;
        let brain = f.brain.as_mut().expect("dacm flight has a brain");

        // own estimate: EC-filtered position synchronised to telemetry
        let own_estimate = Self::kalman_correct(&mut brain.own_kalman, &own_obs, &cfg, dt);
        let corrected_me = brain
            .telemetry_sync
            .correct(&own_estimate, &telemetry.position);
        let me_track = TrackPoint {
            icao: me_icao.to_string(),
            position: corrected_me,
            heading: telemetry.heading,
            speed_mps: telemetry.speed_mps,
            observed_at: now,
            latency_s: 0.0,
        };

        let snapshot = filter_snapshot(
            &observed,
            &me_track,
            &filter_cfg,
            now,
            cfg.staleness_limit_s,
        );

        // estimation for flights in the region of interest
        let mut corrected_roi: Vec<TrackPoint> = Vec::with_capacity(snapshot.roi_flights.len());
        for bf in &snapshot.roi_flights {
            let mut slot = brain.kalman.remove(&bf.track.icao);
            let corrected = Self::kalman_correct(&mut slot, &bf.track, &cfg, dt);
            if let Some(s) = slot {
                brain.kalman.insert(bf.track.icao.clone(), s);
            }
            let mut tp = bf.track.clone();
            tp.position = corrected;
            corrected_roi.push(tp);
        }

        // waypoint histories feed the tube predictor
        let mut history_points: Vec<&TrackPoint> = corrected_roi.iter().collect();
        let inbound_moi: Vec<&TrackPoint> = snapshot
            .moi_flights
            .iter()
            .filter(|b| !b.excluded_from_prediction)
            .map(|b| &b.track)
            .collect();
        history_points.extend(inbound_moi.iter().copied());
        history_points.push(&me_track);
        for tp in history_points {
            let h = brain
                .histories
                .entry(tp.icao.clone())
                .or_insert_with(|| WaypointHistory::new(tp.icao.clone(), cfg.history_capacity));
            h.push(Waypoint {
                position: tp.position,
                heading: tp.heading,
                speed_mps: tp.speed_mps,
                time: now,
            });
        }

        // drop estimator state for transponders no longer observed
        let live: BTreeSet<&String> = observed.keys().collect();
        brain.kalman.retain(|k, _| live.contains(k));
        let me_key = me_icao.to_string();
        brain
            .histories
            .retain(|k, _| live.contains(k) || *k == me_key);

        // zones and pairwise assessment (region-of-interest flights only)
        let me_zone = ZoneSet::from_track(&me_track, &params);
        let other_zones: Vec<ZoneSet> =
            exec::map_ordered(&corrected_roi, |tp| ZoneSet::from_track(tp, &params));
        let assessments: Vec<ConflictAssessment> =
            exec::map_ordered(&other_zones, |z| assess_pair(&me_zone, z));

        // tubes for the host, in-range flights and inbound outer-band flights
        let me_tube = build_tube(
            &brain.histories[&me_key],
            me_zone.ict_radius_m,
            cfg.prediction_horizon_s,
            cfg.prediction_dt_s,
            now,
        )
        .ok();
        let mut tube_sources: Vec<(String, f64)> = corrected_roi
            .iter()
            .map(|tp| {
                (
                    tp.icao.clone(),
                    zone_radius(tp.speed_mps, params.ictd_s, params.emergency_floor_m),
                )
            })
            .collect();
        for tp in &inbound_moi {
            tube_sources.push((
                tp.icao.clone(),
                zone_radius(tp.speed_mps, params.ictd_s, params.emergency_floor_m),
            ));
        }
        let other_tubes: Vec<SafetyTravelTube> = tube_sources
            .iter()
            .filter_map(|(icao, r)| {
                brain.histories.get(icao).and_then(|h| {
                    build_tube(h, *r, cfg.prediction_horizon_s, cfg.prediction_dt_s, now).ok()
                })
            })
            .collect();
        let tube_conflicts: Vec<(String, f64)> = match &me_tube {
            Some(mt) => exec::map_ordered(&other_tubes, |t| {
                stt_intersects(mt, t).map(|(time, _)| (t.icao.clone(), time))
            })
            .into_iter()
            .flatten()
            .collect(),
            None => Vec::new(),
        };

        // remaining preplanned route: active leg start plus waypoints ahead
        let route = &spec.route;
        let mut remaining: Vec<GeoPoint> = Vec::new();
        if !route.is_empty() && next_waypoint < route.len() {
            if next_waypoint == 0 {
                remaining.push(spec.initial);
            } else {
                remaining.push(route[next_waypoint - 1]);
            }
            remaining.extend_from_slice(&route[next_waypoint..]);
        }

        let input = PolicyInput {
            me: &me_track,
            me_zone: &me_zone,
            other_zones: &other_zones,
            assessments: &assessments,
            tube_conflicts: &tube_conflicts,
            props: &spec.props,
            route: &remaining,
            cruise_speed_mps: spec.initial_speed_mps,
            params: &params,
            predictive_engage_s: cfg.predictive_engage_s,
            fence: fence.as_ref(),
        };
        let output = policy_step(&input, &brain.ca_state);
        brain.ca_state = output.state;

        let mut maneuvers = 0u64;
        let mut command_record: Option<CommandRecord> = None;
        if let Some(cmd) = output.command {
            if cfg.ca_enabled {
                if cmd.reason == CommandReason::AvoidIcRz {
                    maneuvers += 1;
                }
                command_record = Some(CommandRecord {
                    tick,
                    me: me_icao.to_string(),
                    intruder: output.engaged.clone(),
                    outcome: output.sweep_outcome,
                    command: cmd.clone(),
                });
                brain
                    .pending_commands
                    .push_back((tick + actuation_ticks, cmd));
            }
        }
        if brain.ca_state.phase == CaPhase::Nominal {
            brain.pending_commands.clear();
            brain.active_command = None;
        }

        // book-keeping outside the flight borrow
        let advisories = output.advisories;
        let band_obs: Vec<(String, bool, bool)> = assessments
            .iter()
            .map(|a| (a.other_icao.clone(), a.in_pcrz, a.in_icrz))
            .collect();
        for a in &assessments {
            if let Some(pc) = a.pc {
                let slot = pc_by_icao.entry(a.other_icao.clone()).or_insert(0.0);
                if pc > *slot {
                    *slot = pc;
                }
                let me_slot = pc_by_icao.entry(me_icao.to_string()).or_insert(0.0);
                if pc > *me_slot {
                    *me_slot = pc;
                }
            }
        }

        for adv in advisories {
            self.trace.advisories.push((tick, adv));
        }
        if let Some(rec) = command_record {
            self.trace.commands.push(rec);
        }
        for _ in 0..maneuvers {
            self.acc.count_maneuver();
        }
        for (other, in_pcrz, in_icrz) in band_obs {
            self.acc.observe_bands(me_icao, &other, in_pcrz, in_icrz);
        }
    }

    fn append_trace_rows(&mut self, pc_by_icao: &BTreeMap<String, f64>) {
        let params = self.params;
        let rows: Vec<TraceRow> = self
            .flights
            .values()
            .map(|f| {
                let ict = zone_radius(f.track.speed_mps, params.ictd_s, params.emergency_floor_m);
                let command = f
                    .brain
                    .as_ref()
                    .and_then(|b| b.active_command.as_ref())
                    .map(|c| c.reason);
                TraceRow {
                    tick: self.tick,
                    time_s: self.time_s,
                    icao: f.track.icao.clone(),
                    lat: f.track.position.lat,
                    lon: f.track.position.lon,
                    alt_m: f.track.position.alt_m,
                    heading: f.track.heading,
                    speed_mps: f.track.speed_mps,
                    ict_radius_m: ict,
                    pct_radius_m: 2.0 * ict,
                    ca_phase: f.brain.as_ref().map(|b| b.ca_state.phase),
                    pc: pc_by_icao.get(&f.track.icao).copied(),
                    command,
                }
            })
            .collect();
        self.trace.rows.extend(rows);
    }

    /// Run to the scenario duration, stopping early once every controlled
    /// flight has completed its route and settled back to nominal.
    pub fn run(mut self) -> (TraceLog, Metrics) {
        let max_ticks = (self.scenario.duration_s / self.scenario.tick_dt_s).ceil() as u64;
        let has_dacm = self
            .flights
            .values()
            .any(|f| matches!(f.spec.behavior, Behavior::DacmControlled));
        while self.tick < max_ticks {
            self.step();
            if has_dacm {
                let all_done = self
                    .flights
                    .values()
                    .filter(|f| matches!(f.spec.behavior, Behavior::DacmControlled))
                    .all(|f| {
                        f.completed_route()
                            && f.brain
                                .as_ref()
                                .map(|b| b.ca_state.phase == CaPhase::Nominal)
                                .unwrap_or(true)
                    });
                if all_done {
                    break;
                }
            }
        }
        self.finish()
    }

    /// Finalise metrics without running further.
    pub fn finish(self) -> (TraceLog, Metrics) {
        let mut paths = BTreeMap::new();
        for (icao, f) in &self.flights {
            if matches!(f.spec.behavior, Behavior::DacmControlled) {
                paths.insert(
                    icao.clone(),
                    (f.flown_m, f.planned_length_m(), f.completed_route()),
                );
            }
        }
        (self.trace, self.acc.finalize(&paths))
    }
}

/// Parse a replay file in the EC wire format into track points whose
/// `observed_at` is seconds from the file's earliest epoch.
pub fn load_replay_file(path: &str, cfg: &EngineConfig) -> Result<Vec<TrackPoint>, WorldError> {
    let text = std::fs::read_to_string(path).map_err(|e| WorldError::ReplayIo {
        path: path.to_string(),
        source: e,
    })?;
    parse_replay_text(&text, cfg).map_err(|(line, source)| WorldError::ReplayFormat {
        path: path.to_string(),
        line,
        source,
    })
}

/// Parse replay text; errors carry the 1-based line number.
pub fn parse_replay_text(
    text: &str,
    _cfg: &EngineConfig,
) -> Result<Vec<TrackPoint>, (usize, IngestError)> {
    let mut msgs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let msg = parse_message(line.as_bytes()).map_err(|e| (idx + 1, e))?;
        msgs.push(msg);
    }
    if msgs.is_empty() {
        return Ok(Vec::new());
    }
    let t0 = msgs.iter().map(|m| m.epoch).min().expect("non-empty");
    let mut out = Vec::with_capacity(msgs.len());
    for m in msgs {
        // zero-latency conversion: the record is ground truth at its epoch
        let mut tp = compensate_latency(&m, m.epoch as f64, f64::INFINITY)
            .expect("zero latency is never stale");
        tp.observed_at = (m.epoch - t0) as f64;
        out.push(tp);
    }
    out.sort_by(|a, b| {
        a.observed_at
            .partial_cmp(&b.observed_at)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.icao.cmp(&b.icao))
    });
    Ok(out)
}

/// Run one scenario to completion.
pub fn run_scenario(scenario: Scenario) -> Result<(TraceLog, Metrics), WorldError> {
    Ok(World::new(scenario)?.run())
}

/// Run independent scenarios as a batch, in parallel when enabled; results
/// come back in input order.
pub fn run_batch(scenarios: Vec<Scenario>) -> Vec<Result<(TraceLog, Metrics), WorldError>> {
    exec::map_ordered_owned(scenarios, run_scenario)
}
