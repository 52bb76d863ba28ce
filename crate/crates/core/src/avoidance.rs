//! The conflict-management policy: tiered advisories, autonomous
//! minimum-deviation maneuvers with a collision-free-zone sweep,
//! return-to-route by mission type, and geofence gating.
//!
//! The policy is a pure transition function invoked once per engine tick:
//! `(assessed snapshot, state) -> (advisories, optional command, state')`.
//! Its phases run `Nominal -> Avoiding -> WaitingClear -> Returning ->
//! Nominal`. Avoidance engages when an imminent risk band is active, or —
//! for autonomous aircraft — when dead-reckoning both flights forward by
//! the imminent-collision horizon predicts one; the response latencies
//! between detection and actuation make a purely reactive trigger too late
//! to keep the travel zones separated at closing speeds of fast aircraft.

use crate::conflict_zones::{
    airspace_class, assess_pair, AirspaceClass, ConflictAssessment, ZoneParams, ZoneSet,
};
use crate::ec_ingest::TrackPoint;
use crate::geodesy::{
    destination_point, direct_distance, ground_distance, heading_diff, initial_bearing, to_enu,
    wrap_heading, GeoPoint,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Route capture radius for rejoining the preplanned route, metres.
pub const ROUTE_CAPTURE_RADIUS_M: f64 = 10.0;

/// Vertical share of the maneuver distance before capability caps.
const VERTICAL_SHARE: f64 = std::f64::consts::FRAC_1_SQRT_2; // sin 45 deg

#[derive(Debug, Error, PartialEq)]
pub enum AvoidanceError {
    #[error("autonomous flight has no route to return to")]
    EmptyRoute,
    #[error("geofence polygon needs at least 3 vertices, got {0}")]
    DegeneratePolygon(usize),
    #[error("geofence polygon is self-intersecting")]
    SelfIntersectingPolygon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlType {
    Autonomous,
    Pilot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissionType {
    GroundBased,
    AirBased,
}

/// Kinematic and policy-relevant properties of one aircraft.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftProperties {
    pub model: String,
    pub control_type: ControlType,
    pub mission_type: MissionType,
    /// Maximum heading change per maneuver step, degrees in (0, 180].
    pub diversion_angle_deg: f64,
    /// Maximum climb per maneuver, metres.
    pub upward_move_m: f64,
    /// Maximum descent per maneuver, metres.
    pub downward_move_m: f64,
    pub max_speed_mps: f64,
    pub min_speed_mps: f64,
    pub max_turn_rate_dps: f64,
    pub max_climb_rate_mps: f64,
}

impl Default for AircraftProperties {
    fn default() -> Self {
        AircraftProperties {
            model: "generic".into(),
            control_type: ControlType::Autonomous,
            mission_type: MissionType::AirBased,
            diversion_angle_deg: 45.0,
            upward_move_m: 30.0,
            downward_move_m: 30.0,
            max_speed_mps: 80.0,
            min_speed_mps: 0.0,
            max_turn_rate_dps: 45.0,
            max_climb_rate_mps: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommandReason {
    AvoidIcRz,
    ReturnToRoute,
    Hold,
}

/// An avoidance or guidance maneuver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand {
    /// Degrees [0, 360).
    pub new_heading: f64,
    pub new_speed_mps: f64,
    /// Coordinates of the maneuver waypoint, altitude included.
    pub target: GeoPoint,
    /// Signed altitude change embedded in the target, metres.
    pub vertical_move_m: f64,
    pub reason: CommandReason,
    /// Set when the safe-waypoint sweep saturated without a clear target.
    pub best_effort: bool,
}

impl VelocityCommand {
    /// A command that keeps the current velocity vector.
    pub fn hold(me: &TrackPoint, reason: CommandReason) -> Self {
        VelocityCommand {
            new_heading: me.heading,
            new_speed_mps: me.speed_mps,
            target: me.position,
            vertical_move_m: 0.0,
            reason,
            best_effort: false,
        }
    }
}

/// Escalation ladder for operator-facing messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdvisoryTier {
    EarlyTubeConflict,
    ProbableRisk,
    ImminentAutonomous,
    GeofenceViolation,
}

/// One operator-facing message, serialised as a JSON-lines record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advisory {
    pub tier: AdvisoryTier,
    pub me: String,
    pub other: Option<String>,
    pub pc: f64,
    pub action: String,
}

/// Permit-inside geofence region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Geofence {
    Circle { center: GeoPoint, radius_m: f64 },
    Polygon(Vec<GeoPoint>),
}

impl Geofence {
    pub fn polygon(vertices: Vec<GeoPoint>) -> Result<Self, AvoidanceError> {
        if vertices.len() < 3 {
            return Err(AvoidanceError::DegeneratePolygon(vertices.len()));
        }
        if polygon_self_intersects(&vertices) {
            return Err(AvoidanceError::SelfIntersectingPolygon);
        }
        Ok(Geofence::Polygon(vertices))
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        match self {
            Geofence::Circle { center, radius_m } => ground_distance(center, p) <= *radius_m,
            Geofence::Polygon(vertices) => {
                // ray casting on the local tangent plane
                let origin = &vertices[0];
                let pt = to_enu(origin, p);
                let mut inside = false;
                let n = vertices.len();
                for i in 0..n {
                    let a = to_enu(origin, &vertices[i]);
                    let b = to_enu(origin, &vertices[(i + 1) % n]);
                    if ((a[1] > pt[1]) != (b[1] > pt[1]))
                        && pt[0] < (b[0] - a[0]) * (pt[1] - a[1]) / (b[1] - a[1]) + a[0]
                    {
                        inside = !inside;
                    }
                }
                inside
            }
        }
    }
}

fn polygon_self_intersects(vertices: &[GeoPoint]) -> bool {
    let origin = &vertices[0];
    let pts: Vec<[f64; 3]> = vertices.iter().map(|v| to_enu(origin, v)).collect();
    let n = pts.len();
    let seg = |i: usize| (pts[i], pts[(i + 1) % n]);
    for i in 0..n {
        for j in i + 1..n {
            // adjacent segments share an endpoint by construction
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (a1, a2) = seg(i);
            let (b1, b2) = seg(j);
            if segments_cross(a1, a2, b1, b2) {
                return true;
            }
        }
    }
    false
}

fn segments_cross(a1: [f64; 3], a2: [f64; 3], b1: [f64; 3], b2: [f64; 3]) -> bool {
    let orient = |p: [f64; 3], q: [f64; 3], r: [f64; 3]| {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let o1 = orient(a1, a2, b1);
    let o2 = orient(a1, a2, b2);
    let o3 = orient(b1, b2, a1);
    let o4 = orient(b1, b2, a2);
    (o1 * o2 < 0.0) && (o3 * o4 < 0.0)
}

/// Phase of the conflict-management state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CaPhase {
    #[default]
    Nominal,
    Avoiding,
    WaitingClear,
    Returning,
}

/// Persistent policy state for one controlled flight.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CaState {
    pub phase: CaPhase,
    /// Where the avoidance maneuver started; the ground-based return target.
    pub ca_start: Option<GeoPoint>,
    /// Flights that triggered the current avoidance episode.
    pub conflicts: BTreeSet<String>,
    /// Heading of the maneuver currently being flown. The next diversion in
    /// a successive course of maneuvers is issued once this one has been
    /// achieved, so commands do not pile up faster than the aircraft turns.
    pub commanded_heading: Option<f64>,
}

/// Everything the policy needs for one tick, already assessed upstream.
#[derive(Debug, Clone)]
pub struct PolicyInput<'a> {
    pub me: &'a TrackPoint,
    pub me_zone: &'a ZoneSet,
    /// Zone sets of every other assessed flight, sorted by icao.
    pub other_zones: &'a [ZoneSet],
    /// Current-position assessments, aligned with `other_zones`.
    pub assessments: &'a [ConflictAssessment],
    /// Tube conflicts: (other icao, first intersection time offset).
    pub tube_conflicts: &'a [(String, f64)],
    pub props: &'a AircraftProperties,
    /// Remaining preplanned route, first element the active leg start.
    pub route: &'a [GeoPoint],
    pub cruise_speed_mps: f64,
    pub params: &'a ZoneParams,
    /// Dead-reckoning horizon for predictive engagement, seconds.
    pub predictive_engage_s: f64,
    pub fence: Option<&'a Geofence>,
}

/// Result of one policy tick.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub advisories: Vec<Advisory>,
    pub command: Option<VelocityCommand>,
    pub state: CaState,
    /// Flight the emitted avoidance maneuver resolves, if any.
    pub engaged: Option<String>,
    /// How the safe-waypoint sweep resolved, when one ran.
    pub sweep_outcome: Option<SweepOutcome>,
}

/// Predicted closest approach between two straight-line trajectories over
/// the next `horizon` seconds, on the local tangent plane: returns the
/// minimum distance and the time it occurs. Time zero gives the current
/// separation, so an active imminent risk is always at least as close.
pub fn predicted_min_distance(me: &ZoneSet, other: &ZoneSet, horizon: f64) -> (f64, f64) {
    let rel = to_enu(&me.center, &other.center);
    let vel = |heading: f64, speed: f64| {
        let h = heading.to_radians();
        [speed * h.sin(), speed * h.cos(), 0.0]
    };
    let vm = vel(me.heading, me.speed_mps);
    let vo = vel(other.heading, other.speed_mps);
    let dv = [vo[0] - vm[0], vo[1] - vm[1], vo[2] - vm[2]];
    let dv2 = dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2];
    let t_star = if dv2 <= 1e-12 {
        0.0
    } else {
        (-(rel[0] * dv[0] + rel[1] * dv[1] + rel[2] * dv[2]) / dv2).clamp(0.0, horizon)
    };
    let at = [
        rel[0] + dv[0] * t_star,
        rel[1] + dv[1] * t_star,
        rel[2] + dv[2] * t_star,
    ];
    let dmin = (at[0] * at[0] + at[1] * at[1] + at[2] * at[2]).sqrt();
    (dmin, t_star)
}

/// Predicted-invasion assessment used for engagement: an assessment whose
/// move distance is the predicted invasion depth of the zone sum.
pub fn predicted_assessment(me: &ZoneSet, other: &ZoneSet, horizon: f64) -> ConflictAssessment {
    let current = assess_pair(me, other);
    if current.in_icrz || current.degenerate {
        return current;
    }
    let (dmin, _) = predicted_min_distance(me, other, horizon);
    let ict_sum = current.ict_sum_m;
    let pct_sum = current.pct_sum_m;
    if dmin <= ict_sum {
        let pc =
            crate::conflict_zones::collision_probability(dmin, ict_sum, pct_sum).unwrap_or(1.0);
        ConflictAssessment {
            in_icrz: true,
            in_pcrz: false,
            pc: Some(pc),
            move_distance_m: Some(ict_sum - dmin),
            ..current
        }
    } else {
        current
    }
}

/// The conflict-management policy for one tick.
pub fn policy_step(input: &PolicyInput<'_>, state: &CaState) -> PolicyOutput {
    let mut advisories = Vec::new();
    let mut next = state.clone();
    let me_icao = &input.me.icao;
    let mut engaged_icao: Option<String> = None;
    let mut sweep_outcome: Option<SweepOutcome> = None;

    // tier 1: predicted tube conflicts within the pilot warning lead
    for (icao, first_time) in input.tube_conflicts {
        if *first_time <= input.params.pcrz_warn_s {
            advisories.push(Advisory {
                tier: AdvisoryTier::EarlyTubeConflict,
                me: me_icao.clone(),
                other: Some(icao.clone()),
                pc: 0.0,
                action: format!("tube_conflict_in_{first_time:.1}s"),
            });
        }
    }

    // tier 2: probable risks, routed by control type
    for a in input.assessments {
        if a.in_pcrz {
            let action = match input.props.control_type {
                ControlType::Pilot => "warn_pilot",
                ControlType::Autonomous => "warn_base_station",
            };
            advisories.push(Advisory {
                tier: AdvisoryTier::ProbableRisk,
                me: me_icao.clone(),
                other: Some(a.other_icao.clone()),
                pc: a.pc.unwrap_or(0.0),
                action: action.into(),
            });
        }
    }

    // engagement: active imminent risk for anyone; predicted imminent risk
    // for autonomous aircraft (a pilot gets the warnings above first)
    let mut engaged: Option<(ConflictAssessment, &ZoneSet)> = None;
    for (a, z) in input.assessments.iter().zip(input.other_zones) {
        let candidate = if a.in_icrz || a.degenerate {
            Some(a.clone())
        } else if input.props.control_type == ControlType::Autonomous {
            let p = predicted_assessment(input.me_zone, z, input.predictive_engage_s);
            if p.in_icrz || p.degenerate {
                Some(p)
            } else {
                None
            }
        } else {
            None
        };
        if let Some(c) = candidate {
            let better = match &engaged {
                None => true,
                Some((best, _)) => {
                    let (pc_new, pc_old) = (c.pc.unwrap_or(0.0), best.pc.unwrap_or(0.0));
                    pc_new > pc_old || (pc_new == pc_old && c.other_icao < best.other_icao)
                }
            };
            if better {
                engaged = Some((c, z));
            }
        }
    }

    if let Some((assessment, _)) = &engaged {
        if next.phase == CaPhase::Nominal || next.phase == CaPhase::Returning {
            next.ca_start = Some(input.me.position);
            next.conflicts.clear();
        }
        next.phase = CaPhase::Avoiding;
        next.conflicts.insert(assessment.other_icao.clone());
    }

    let command = match next.phase {
        CaPhase::Nominal => None,
        CaPhase::Avoiding => {
            match engaged {
                Some((assessment, _)) => {
                    // successive course of maneuvers: the next diversion is
                    // issued once the previous one has been flown
                    let previous_pending = next.commanded_heading.map_or(false, |h| {
                        heading_diff(input.me.heading, h).abs()
                            > input.props.diversion_angle_deg / 2.0
                    });
                    if previous_pending {
                        None
                    } else {
                        advisories.push(Advisory {
                            tier: AdvisoryTier::ImminentAutonomous,
                            me: me_icao.clone(),
                            other: Some(assessment.other_icao.clone()),
                            pc: assessment.pc.unwrap_or(1.0),
                            action: "autonomous_maneuver".into(),
                        });
                        let intruder_zone = input
                            .other_zones
                            .iter()
                            .find(|z| z.icao == assessment.other_icao)
                            .expect("engaged flight has a zone set");
                        let intruder = TrackPoint {
                            icao: intruder_zone.icao.clone(),
                            position: intruder_zone.center,
                            heading: intruder_zone.heading,
                            speed_mps: intruder_zone.speed_mps,
                            observed_at: input.me.observed_at,
                            latency_s: 0.0,
                        };
                        let cmd = maneuver_ca(input.me, &intruder, input.props, &assessment);
                        let cmd = if cmd.reason == CommandReason::AvoidIcRz
                            && cmd.target != input.me.position
                        {
                            let (swept, outcome) =
                                sweep_safe_waypoint(&cmd, input.me, input.props, input.other_zones);
                            sweep_outcome = Some(outcome);
                            swept
                        } else {
                            cmd
                        };
                        engaged_icao = Some(assessment.other_icao.clone());
                        next.commanded_heading = Some(cmd.new_heading);
                        Some(cmd)
                    }
                }
                None => {
                    // imminent risks cleared; hold course until the probable
                    // band clears with the formerly conflicting flights
                    next.phase = CaPhase::WaitingClear;
                    next.commanded_heading = None;
                    None
                }
            }
        }
        CaPhase::WaitingClear => None,
        CaPhase::Returning => None,
    };

    // WaitingClear -> Returning once the triggering flights are clear of
    // both bands
    if next.phase == CaPhase::WaitingClear {
        let still_risky = input
            .assessments
            .iter()
            .any(|a| next.conflicts.contains(&a.other_icao) && (a.in_pcrz || a.in_icrz));
        if !still_risky {
            next.phase = CaPhase::Returning;
        }
    }

    let command = if next.phase == CaPhase::Returning && command.is_none() {
        match input.props.control_type {
            ControlType::Pilot => {
                // hand control back to the pilot
                advisories.push(Advisory {
                    tier: AdvisoryTier::ImminentAutonomous,
                    me: me_icao.clone(),
                    other: None,
                    pc: 0.0,
                    action: "control_returned_to_pilot".into(),
                });
                next.phase = CaPhase::Nominal;
                next.ca_start = None;
                next.conflicts.clear();
                next.commanded_heading = None;
                None
            }
            ControlType::Autonomous => {
                match return_to_route(
                    input.me,
                    input.props,
                    input.route,
                    next.ca_start.as_ref(),
                    input.cruise_speed_mps,
                ) {
                    Ok(cmd) => {
                        if ground_distance(&input.me.position, &cmd.target)
                            <= ROUTE_CAPTURE_RADIUS_M
                        {
                            next.phase = CaPhase::Nominal;
                            next.ca_start = None;
                            next.conflicts.clear();
                            next.commanded_heading = None;
                            None
                        } else {
                            Some(cmd)
                        }
                    }
                    Err(_) => Some(VelocityCommand::hold(input.me, CommandReason::Hold)),
                }
            }
        }
    } else {
        command
    };

    // geofence gate on whatever was produced
    let command = command.map(|cmd| {
        let (gated, cancelled) = geofence_gate(cmd, input.fence);
        if cancelled {
            advisories.push(Advisory {
                tier: AdvisoryTier::GeofenceViolation,
                me: me_icao.clone(),
                other: None,
                pc: 0.0,
                action: "maneuver_cancelled_outside_fence".into(),
            });
        }
        gated
    });

    PolicyOutput {
        advisories,
        command,
        state: next,
        engaged: engaged_icao,
        sweep_outcome,
    }
}

/// Pairwise collision-avoidance maneuver.
///
/// The turn side comes from the sign of the normalized heading difference
/// with the intruder, the move distance is the travel-zone invasion depth,
/// and the altitude change moves away from the intruder up to the
/// aircraft's per-maneuver capability.
pub fn maneuver_ca(
    me: &TrackPoint,
    intruder: &TrackPoint,
    props: &AircraftProperties,
    assessment: &ConflictAssessment,
) -> VelocityCommand {
    let move_distance = assessment.move_distance_m.unwrap_or(0.0);
    if move_distance <= 0.0 {
        // boundary contact: nothing to separate yet, re-evaluate next tick
        return VelocityCommand::hold(me, CommandReason::AvoidIcRz);
    }

    let diff_heading = heading_diff(me.heading, intruder.heading);
    let heading_ca = if diff_heading < 0.0 {
        wrap_heading(me.heading - props.diversion_angle_deg)
    } else {
        wrap_heading(me.heading + props.diversion_angle_deg)
    };

    let (upward_change, downward_change, new_speed) =
        calculate_vertical_change_speed(move_distance, props);
    let vertical_move = if me.position.alt_m < intruder.position.alt_m {
        -downward_change
    } else {
        upward_change
    };
    let new_altitude = me.position.alt_m + vertical_move;
    let target = destination_point(&me.position, heading_ca, move_distance, new_altitude);

    VelocityCommand {
        new_heading: heading_ca,
        new_speed_mps: new_speed,
        target,
        vertical_move_m: vertical_move,
        reason: CommandReason::AvoidIcRz,
        best_effort: false,
    }
}

/// Vertical capability split for a maneuver: each direction offers the
/// 45-degree share of the move distance capped by the aircraft's
/// per-maneuver limits; escape speed is the aircraft maximum.
fn calculate_vertical_change_speed(
    move_distance_m: f64,
    props: &AircraftProperties,
) -> (f64, f64, f64) {
    let requested = move_distance_m * VERTICAL_SHARE;
    (
        requested.min(props.upward_move_m),
        requested.min(props.downward_move_m),
        props.max_speed_mps,
    )
}

/// How the safe-waypoint sweep resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepOutcome {
    /// The candidate target was already collision-free.
    CandidateClear,
    /// An alternative collision-free target was found.
    SweptToFree,
    /// No collision-free point; a risk-less one was taken.
    RiskLess,
    /// Every sweep point was conflicted; candidate kept, best-effort.
    Saturated,
}

impl SweepOutcome {
    /// Whether the sweep set contained at least one collision-free point.
    pub fn free_point_existed(&self) -> bool {
        matches!(
            self,
            SweepOutcome::CandidateClear | SweepOutcome::SweptToFree
        )
    }
}

/// Replace a candidate maneuver whose target is not collision-free by
/// sweeping alternative headings at diversion-angle increments, alternating
/// sides, then the same ladder with the vertical direction flipped. The
/// first collision-free target wins, then the first risk-less one; if the
/// whole sweep is conflicted the candidate comes back flagged best-effort.
pub fn sweep_safe_waypoint(
    candidate: &VelocityCommand,
    me: &TrackPoint,
    props: &AircraftProperties,
    other_zones: &[ZoneSet],
) -> (VelocityCommand, SweepOutcome) {
    let move_distance = ground_distance(&me.position, &candidate.target);
    if move_distance <= 0.0 {
        return (candidate.clone(), SweepOutcome::CandidateClear);
    }
    if airspace_class(&candidate.target, other_zones) == AirspaceClass::CollisionFree {
        return (candidate.clone(), SweepOutcome::CandidateClear);
    }

    let step = props.diversion_angle_deg;
    let side = if heading_diff(me.heading, candidate.new_heading) >= 0.0 {
        1.0
    } else {
        -1.0
    };
    // heading offsets from the current heading: candidate side first, then
    // the opposite side, widening until the full circle is covered
    let mut offsets = Vec::new();
    let mut k = 1.0;
    while k * step <= 180.0 + 1e-9 {
        offsets.push(side * k * step);
        if k * step < 180.0 - 1e-9 {
            offsets.push(-side * k * step);
        }
        k += 1.0;
    }

    let flipped_vertical = if candidate.vertical_move_m >= 0.0 {
        -(move_distance * VERTICAL_SHARE).min(props.downward_move_m)
    } else {
        (move_distance * VERTICAL_SHARE).min(props.upward_move_m)
    };

    let mut first_riskless: Option<VelocityCommand> = None;
    for vertical in [candidate.vertical_move_m, flipped_vertical] {
        let new_altitude = me.position.alt_m + vertical;
        for offset in &offsets {
            let heading = wrap_heading(me.heading + offset);
            let target = destination_point(&me.position, heading, move_distance, new_altitude);
            let cmd = VelocityCommand {
                new_heading: heading,
                new_speed_mps: candidate.new_speed_mps,
                target,
                vertical_move_m: vertical,
                reason: candidate.reason,
                best_effort: false,
            };
            match airspace_class(&target, other_zones) {
                AirspaceClass::CollisionFree => return (cmd, SweepOutcome::SweptToFree),
                AirspaceClass::RiskLess => {
                    if first_riskless.is_none() {
                        first_riskless = Some(cmd);
                    }
                }
                AirspaceClass::Conflicted => {}
            }
        }
    }

    match first_riskless {
        Some(cmd) => (cmd, SweepOutcome::RiskLess),
        None => {
            let mut saturated = candidate.clone();
            saturated.best_effort = true;
            (saturated, SweepOutcome::Saturated)
        }
    }
}

/// Seconds of flight the rejoin pursuit leads the nearest route point by.
const REJOIN_LEAD_S: f64 = 3.0;

/// Braking envelope for converging on a fixed return point, seconds.
const RETURN_BRAKE_S: f64 = 2.0;

/// Return-to-route target by mission type: ground-based missions return to
/// where the avoidance started, air-based missions to the closest point on
/// the remaining route polyline.
///
/// The commanded heading converges rather than points: air-based rejoins
/// steer at a lead point further along the route so the flight merges
/// tangentially instead of orbiting its own perpendicular projection, and
/// ground-based returns brake inside the final approach so the capture
/// radius cannot be overshot in a single tick.
pub fn return_to_route(
    me: &TrackPoint,
    props: &AircraftProperties,
    route: &[GeoPoint],
    ca_start: Option<&GeoPoint>,
    cruise_speed_mps: f64,
) -> Result<VelocityCommand, AvoidanceError> {
    let (target, aim, speed) = match props.mission_type {
        MissionType::GroundBased => {
            let target = *ca_start.ok_or(AvoidanceError::EmptyRoute)?;
            let dist = ground_distance(&me.position, &target);
            let speed = cruise_speed_mps
                .min(dist / RETURN_BRAKE_S)
                .max(props.min_speed_mps.max(2.0));
            (target, target, speed)
        }
        MissionType::AirBased => {
            if route.is_empty() {
                return Err(AvoidanceError::EmptyRoute);
            }
            let (nearest, arc_len) = project_onto_polyline(&me.position, route);
            let lead = (REJOIN_LEAD_S * cruise_speed_mps).max(100.0);
            let aim = point_at_arclength(route, arc_len + lead);
            (nearest, aim, cruise_speed_mps)
        }
    };

    let heading = match initial_bearing(&me.position, &aim) {
        Ok(b) => b,
        Err(_) => me.heading, // already on top of the aim point
    };
    Ok(VelocityCommand {
        new_heading: heading,
        new_speed_mps: speed,
        target,
        vertical_move_m: target.alt_m - me.position.alt_m,
        reason: CommandReason::ReturnToRoute,
        best_effort: false,
    })
}

/// Closest point on a polyline, by tangent-plane projection onto each
/// segment. A single-vertex polyline is its own nearest point.
pub fn nearest_point_on_polyline(p: &GeoPoint, polyline: &[GeoPoint]) -> GeoPoint {
    project_onto_polyline(p, polyline).0
}

/// Closest point on a polyline plus its arc length from the first vertex.
pub fn project_onto_polyline(p: &GeoPoint, polyline: &[GeoPoint]) -> (GeoPoint, f64) {
    assert!(!polyline.is_empty());
    if polyline.len() == 1 {
        return (polyline[0], 0.0);
    }
    let mut best = polyline[0];
    let mut best_d = f64::INFINITY;
    let mut best_arc = 0.0;
    let mut walked = 0.0;
    for seg in polyline.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let pe = to_enu(a, p);
        let be = to_enu(a, b);
        let len_sq = be[0] * be[0] + be[1] * be[1] + be[2] * be[2];
        let t = if len_sq <= 1e-12 {
            0.0
        } else {
            ((pe[0] * be[0] + pe[1] * be[1] + pe[2] * be[2]) / len_sq).clamp(0.0, 1.0)
        };
        let cand = crate::geodesy::from_enu(a, [be[0] * t, be[1] * t, be[2] * t]);
        let d = direct_distance(p, &cand);
        if d < best_d {
            best_d = d;
            best = cand;
            best_arc = walked + t * len_sq.sqrt();
        }
        walked += len_sq.sqrt();
    }
    (best, best_arc)
}

/// Point at the given arc length along a polyline, clamped to its ends.
pub fn point_at_arclength(polyline: &[GeoPoint], s: f64) -> GeoPoint {
    assert!(!polyline.is_empty());
    if s <= 0.0 || polyline.len() == 1 {
        return polyline[0];
    }
    let mut remaining = s;
    for seg in polyline.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let be = to_enu(a, b);
        let len = (be[0] * be[0] + be[1] * be[1] + be[2] * be[2]).sqrt();
        if remaining <= len {
            let t = if len <= 1e-12 { 0.0 } else { remaining / len };
            return crate::geodesy::from_enu(a, [be[0] * t, be[1] * t, be[2] * t]);
        }
        remaining -= len;
    }
    *polyline.last().expect("non-empty")
}

/// Gate a command on the geofence: passed iff the target is inside (or no
/// fence is configured); otherwise cancelled and replaced by a hold.
/// The boolean reports cancellation so the caller can raise the advisory.
pub fn geofence_gate(
    command: VelocityCommand,
    fence: Option<&Geofence>,
) -> (VelocityCommand, bool) {
    match fence {
        None => (command, false),
        Some(f) if f.contains(&command.target) => (command, false),
        Some(_) => {
            let held = VelocityCommand {
                new_heading: command.new_heading,
                new_speed_mps: command.new_speed_mps,
                target: command.target,
                vertical_move_m: 0.0,
                reason: CommandReason::Hold,
                best_effort: false,
            };
            (
                VelocityCommand {
                    target: held.target,
                    ..held
                },
                true,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflict_zones::ZoneParams;
    use proptest::prelude::*;

    fn base() -> GeoPoint {
        GeoPoint::new(53.5, -2.5, 300.0).unwrap()
    }

    fn track(icao: &str, pos: GeoPoint, heading: f64, speed: f64) -> TrackPoint {
        TrackPoint {
            icao: icao.into(),
            position: pos,
            heading,
            speed_mps: speed,
            observed_at: 0.0,
            latency_s: 0.0,
        }
    }

    fn zone(t: &TrackPoint) -> ZoneSet {
        ZoneSet::from_track(t, &ZoneParams::default())
    }

    fn assessment_between(me: &TrackPoint, other: &TrackPoint) -> ConflictAssessment {
        assess_pair(&zone(me), &zone(other))
    }

    fn props() -> AircraftProperties {
        AircraftProperties::default()
    }

    #[test]
    fn maneuver_subtract_branch_with_wrap() {
        // me 20, intruder 10: diff -10 -> turn minus diversion, wraps to 335
        let me = track("MEMEME", base(), 20.0, 60.0);
        let intruder_pos = destination_point(&base(), 20.0, 100.0, 300.0);
        let intruder = track("OTHER1", intruder_pos, 10.0, 60.0);
        let a = assessment_between(&me, &intruder);
        assert!(a.in_icrz);
        let cmd = maneuver_ca(&me, &intruder, &props(), &a);
        assert_eq!(cmd.new_heading, 335.0);
        assert_eq!(cmd.reason, CommandReason::AvoidIcRz);
    }

    #[test]
    fn maneuver_add_branch_with_wrap() {
        // me 350, intruder 30: normalized diff +40 -> plus diversion, wraps to 35
        let me = track("MEMEME", base(), 350.0, 60.0);
        let intruder_pos = destination_point(&base(), 350.0, 100.0, 300.0);
        let intruder = track("OTHER1", intruder_pos, 30.0, 60.0);
        let a = assessment_between(&me, &intruder);
        let cmd = maneuver_ca(&me, &intruder, &props(), &a);
        assert_eq!(cmd.new_heading, 35.0);
    }

    #[test]
    fn maneuver_descends_when_below_intruder() {
        let me = track("MEMEME", base(), 90.0, 60.0);
        let above = destination_point(&base(), 90.0, 100.0, 320.0);
        let intruder = track("OTHER1", above, 270.0, 60.0);
        let a = assessment_between(&me, &intruder);
        let p = AircraftProperties {
            downward_move_m: 20.0,
            ..props()
        };
        let cmd = maneuver_ca(&me, &intruder, &p, &a);
        assert_eq!(cmd.vertical_move_m, -20.0);
        assert_eq!(cmd.target.alt_m, 280.0);
    }

    #[test]
    fn maneuver_climbs_when_at_or_above_intruder() {
        let me = track("MEMEME", base(), 90.0, 60.0);
        let below = destination_point(&base(), 90.0, 100.0, 250.0);
        let intruder = track("OTHER1", below, 270.0, 60.0);
        let a = assessment_between(&me, &intruder);
        let cmd = maneuver_ca(&me, &intruder, &props(), &a);
        assert!(cmd.vertical_move_m > 0.0);
        assert!(cmd.vertical_move_m <= props().upward_move_m);
    }

    #[test]
    fn maneuver_boundary_distance_holds() {
        // exact boundary contact: move distance 0, a hold, no NaN anywhere
        let me = track("MEMEME", base(), 90.0, 60.0);
        let intruder_pos = destination_point(&base(), 90.0, 300.0, 300.0);
        let intruder = track("OTHER1", intruder_pos, 270.0, 60.0);
        let a = ConflictAssessment {
            me_icao: "MEMEME".into(),
            other_icao: "OTHER1".into(),
            direct_distance_m: 300.0,
            ict_sum_m: 300.0,
            pct_sum_m: 600.0,
            in_pcrz: false,
            in_icrz: true,
            pc: Some(0.5),
            move_distance_m: Some(0.0),
            degenerate: false,
        };
        let cmd = maneuver_ca(&me, &intruder, &props(), &a);
        assert_eq!(cmd.reason, CommandReason::AvoidIcRz);
        assert_eq!(cmd.target, me.position); // hold: zero move distance
        assert!(cmd.new_heading.is_finite());
        assert_eq!(cmd.vertical_move_m, 0.0);
    }

    #[test]
    fn maneuver_target_distance_matches_invasion() {
        let me = track("MEMEME", base(), 90.0, 60.0);
        let close = destination_point(&base(), 90.0, 200.0, 300.0);
        let intruder = track("OTHER1", close, 270.0, 60.0);
        let a = assessment_between(&me, &intruder);
        let cmd = maneuver_ca(&me, &intruder, &props(), &a);
        let d = ground_distance(&me.position, &cmd.target);
        let expected = a.move_distance_m.unwrap();
        assert!((d - expected).abs() < 1e-6 * expected);
        assert_eq!(cmd.new_speed_mps, props().max_speed_mps);
    }

    #[test]
    fn sweep_keeps_clear_candidate() {
        let me = track("MEMEME", base(), 90.0, 60.0);
        let cmd = VelocityCommand {
            new_heading: 135.0,
            new_speed_mps: 80.0,
            target: destination_point(&base(), 135.0, 100.0, 320.0),
            vertical_move_m: 20.0,
            reason: CommandReason::AvoidIcRz,
            best_effort: false,
        };
        let (out, outcome) = sweep_safe_waypoint(&cmd, &me, &props(), &[]);
        assert_eq!(out, cmd);
        assert_eq!(outcome, SweepOutcome::CandidateClear);
    }

    #[test]
    fn sweep_moves_to_opposite_side_when_blocked() {
        // third flight's zones sit right on the candidate target; the
        // opposite heading is clear
        let me = track("MEMEME", base(), 90.0, 60.0);
        let p = props();
        let move_distance = 120.0;
        let candidate_heading = wrap_heading(90.0 + p.diversion_angle_deg);
        let candidate_target = destination_point(&base(), candidate_heading, move_distance, 320.0);
        // slow blocker: small spheres that cover the candidate but not the
        // rest of the sweep circle
        let blocker = track("BLOCKE", candidate_target.with_alt(320.0), 0.0, 20.0);
        let zones = vec![zone(&blocker)];
        let cmd = VelocityCommand {
            new_heading: candidate_heading,
            new_speed_mps: 80.0,
            target: candidate_target,
            vertical_move_m: 20.0,
            reason: CommandReason::AvoidIcRz,
            best_effort: false,
        };
        let (out, outcome) = sweep_safe_waypoint(&cmd, &me, &p, &zones);
        assert!(!out.best_effort);
        assert_eq!(outcome, SweepOutcome::SweptToFree);
        // brute-force re-classification of the returned target
        assert_eq!(
            airspace_class(&out.target, &zones),
            AirspaceClass::CollisionFree
        );
        assert_ne!(out.new_heading, cmd.new_heading);
    }

    #[test]
    fn sweep_saturates_to_best_effort_under_encirclement() {
        // giant zones cover every sweep target
        let me = track("MEMEME", base(), 90.0, 60.0);
        let giant = track("GIANTO", base().with_alt(300.0), 0.0, 2000.0);
        let zones = vec![zone(&giant)];
        let cmd = VelocityCommand {
            new_heading: 135.0,
            new_speed_mps: 80.0,
            target: destination_point(&base(), 135.0, 50.0, 320.0),
            vertical_move_m: 20.0,
            reason: CommandReason::AvoidIcRz,
            best_effort: false,
        };
        let (out, outcome) = sweep_safe_waypoint(&cmd, &me, &props(), &zones);
        assert!(out.best_effort);
        assert_eq!(outcome, SweepOutcome::Saturated);
        assert_eq!(out.new_heading, cmd.new_heading);
    }

    #[test]
    fn return_ground_based_targets_ca_start() {
        let start = base();
        let west = destination_point(&start, 270.0, 400.0, 300.0);
        let me = track("MEMEME", west, 0.0, 40.0);
        let p = AircraftProperties {
            mission_type: MissionType::GroundBased,
            ..props()
        };
        let cmd = return_to_route(&me, &p, &[], Some(&start), 40.0).unwrap();
        assert_eq!(cmd.target, start);
        assert!(
            (cmd.new_heading - 90.0).abs() < 0.1,
            "heading {}",
            cmd.new_heading
        );
        assert_eq!(cmd.reason, CommandReason::ReturnToRoute);
    }

    #[test]
    fn return_air_based_projects_onto_route() {
        // route runs west-east; me is displaced north of the first segment
        let a = base();
        let b = destination_point(&a, 90.0, 2_000.0, 300.0);
        let c = destination_point(&b, 0.0, 2_000.0, 300.0);
        let route = vec![a, b, c];
        let above = destination_point(
            &destination_point(&a, 90.0, 700.0, 300.0),
            0.0,
            500.0,
            300.0,
        );
        let me = track("MEMEME", above, 90.0, 40.0);
        let p = props(); // air-based
        let cmd = return_to_route(&me, &p, &route, None, 40.0).unwrap();
        // perpendicular foot: 700 m east of a on the first segment
        let expect = destination_point(&a, 90.0, 700.0, 300.0);
        assert!(
            ground_distance(&cmd.target, &expect) < 2.0,
            "target {:?} vs {:?}",
            cmd.target,
            expect
        );
    }

    #[test]
    fn return_air_based_empty_route_errors() {
        let me = track("MEMEME", base(), 0.0, 40.0);
        assert_eq!(
            return_to_route(&me, &props(), &[], None, 40.0).unwrap_err(),
            AvoidanceError::EmptyRoute
        );
    }

    #[test]
    fn geofence_circle_gate() {
        let fence = Geofence::Circle {
            center: base(),
            radius_m: 1_000.0,
        };
        let me = track("MEMEME", base(), 90.0, 40.0);
        let inside = VelocityCommand {
            new_heading: 90.0,
            new_speed_mps: 40.0,
            target: base(),
            vertical_move_m: 0.0,
            reason: CommandReason::AvoidIcRz,
            best_effort: false,
        };
        let (passed, cancelled) = geofence_gate(inside.clone(), Some(&fence));
        assert!(!cancelled);
        assert_eq!(passed, inside);

        let outside = VelocityCommand {
            target: destination_point(&base(), 90.0, 5_000.0, 300.0),
            ..inside.clone()
        };
        let (held, cancelled) = geofence_gate(outside, Some(&fence));
        assert!(cancelled);
        assert_eq!(held.reason, CommandReason::Hold);

        let (untouched, cancelled) = geofence_gate(inside.clone(), None);
        assert!(!cancelled);
        assert_eq!(untouched, inside);
        let _ = me;
    }

    #[test]
    fn geofence_polygon_contains() {
        let a = base();
        let e = |brg: f64, d: f64| destination_point(&a, brg, d, 300.0);
        let fence = Geofence::polygon(vec![
            e(315.0, 1_500.0),
            e(45.0, 1_500.0),
            e(135.0, 1_500.0),
            e(225.0, 1_500.0),
        ])
        .unwrap();
        assert!(fence.contains(&a));
        assert!(!fence.contains(&e(90.0, 5_000.0)));
        assert!(Geofence::polygon(vec![a, e(90.0, 100.0)]).is_err());
    }

    fn policy_input_fixture<'a>(
        me: &'a TrackPoint,
        me_zone: &'a ZoneSet,
        other_zones: &'a [ZoneSet],
        assessments: &'a [ConflictAssessment],
        props: &'a AircraftProperties,
        route: &'a [GeoPoint],
        params: &'a ZoneParams,
    ) -> PolicyInput<'a> {
        PolicyInput {
            me,
            me_zone,
            other_zones,
            assessments,
            tube_conflicts: &[],
            props,
            route,
            cruise_speed_mps: 60.0,
            params,
            predictive_engage_s: 2.5,
            fence: None,
        }
    }

    #[test]
    fn policy_empty_snapshot_is_nominal() {
        let me = track("MEMEME", base(), 90.0, 60.0);
        let mz = zone(&me);
        let p = props();
        let params = ZoneParams::default();
        let input = policy_input_fixture(&me, &mz, &[], &[], &p, &[], &params);
        let out = policy_step(&input, &CaState::default());
        assert!(out.advisories.is_empty());
        assert!(out.command.is_none());
        assert_eq!(out.state.phase, CaPhase::Nominal);
    }

    #[test]
    fn policy_pcrz_pilot_warns_without_command() {
        let me = track("MEMEME", base(), 90.0, 60.0);
        let mz = zone(&me);
        // diverging pair inside the probable band only; no predicted
        // imminent risk
        let other_pos = destination_point(&base(), 0.0, 500.0, 300.0);
        let other = track("OTHER1", other_pos, 0.0, 60.0);
        let oz = vec![zone(&other)];
        let assessments = vec![assess_pair(&mz, &oz[0])];
        assert!(assessments[0].in_pcrz);
        let p = AircraftProperties {
            control_type: ControlType::Pilot,
            ..props()
        };
        let params = ZoneParams::default();
        let input = policy_input_fixture(&me, &mz, &oz, &assessments, &p, &[], &params);
        let out = policy_step(&input, &CaState::default());
        assert!(out.command.is_none());
        assert_eq!(out.state.phase, CaPhase::Nominal);
        assert!(out
            .advisories
            .iter()
            .any(|a| a.tier == AdvisoryTier::ProbableRisk && a.action == "warn_pilot"));
    }

    #[test]
    fn policy_icrz_autonomous_maneuvers() {
        let me = track("MEMEME", base(), 90.0, 60.0);
        let mz = zone(&me);
        let other_pos = destination_point(&base(), 90.0, 200.0, 300.0);
        let other = track("OTHER1", other_pos, 270.0, 60.0);
        let oz = vec![zone(&other)];
        let assessments = vec![assess_pair(&mz, &oz[0])];
        assert!(assessments[0].in_icrz);
        let p = props();
        let params = ZoneParams::default();
        let route = [base(), destination_point(&base(), 90.0, 10_000.0, 300.0)];
        let input = policy_input_fixture(&me, &mz, &oz, &assessments, &p, &route, &params);
        let out = policy_step(&input, &CaState::default());
        assert_eq!(out.state.phase, CaPhase::Avoiding);
        assert_eq!(out.state.ca_start, Some(me.position));
        let cmd = out.command.expect("maneuver command");
        assert_eq!(cmd.reason, CommandReason::AvoidIcRz);
        assert!(out
            .advisories
            .iter()
            .any(|a| a.tier == AdvisoryTier::ImminentAutonomous));
    }

    #[test]
    fn policy_pilot_gets_autonomy_at_icrz() {
        // unresolved probable risk turning imminent engages autonomy even
        // for pilot-controlled aircraft
        let me = track("MEMEME", base(), 90.0, 60.0);
        let mz = zone(&me);
        let other_pos = destination_point(&base(), 90.0, 150.0, 300.0);
        let other = track("OTHER1", other_pos, 270.0, 60.0);
        let oz = vec![zone(&other)];
        let assessments = vec![assess_pair(&mz, &oz[0])];
        assert!(assessments[0].in_icrz);
        let p = AircraftProperties {
            control_type: ControlType::Pilot,
            ..props()
        };
        let params = ZoneParams::default();
        let input = policy_input_fixture(&me, &mz, &oz, &assessments, &p, &[], &params);
        let out = policy_step(&input, &CaState::default());
        assert!(out.command.is_some());
        assert_eq!(out.state.phase, CaPhase::Avoiding);
    }

    #[test]
    fn policy_phases_progress_to_nominal() {
        let p = props();
        let params = ZoneParams::default();
        let route = [base(), destination_point(&base(), 90.0, 10_000.0, 300.0)];

        // start in Avoiding with cleared airspace, displaced off the route:
        // falls through WaitingClear to Returning with a return command
        let off_route = track(
            "MEMEME",
            destination_point(&base(), 0.0, 400.0, 300.0),
            90.0,
            60.0,
        );
        let mzo = zone(&off_route);
        let state = CaState {
            phase: CaPhase::Avoiding,
            ca_start: Some(base()),
            conflicts: BTreeSet::from(["OTHER1".to_string()]),
            commanded_heading: None,
        };
        let input = policy_input_fixture(&off_route, &mzo, &[], &[], &p, &route, &params);
        let out = policy_step(&input, &state);
        assert_eq!(out.state.phase, CaPhase::Returning); // cascades through WaitingClear
        let cmd = out.command.expect("return command");
        assert_eq!(cmd.reason, CommandReason::ReturnToRoute);

        // standing on the route: capture to Nominal with no command
        let onroute = track("MEMEME", route[0], 90.0, 60.0);
        let mz2 = zone(&onroute);
        let input2 = policy_input_fixture(&onroute, &mz2, &[], &[], &p, &route, &params);
        let out2 = policy_step(&input2, &out.state);
        assert_eq!(out2.state.phase, CaPhase::Nominal);
        assert!(out2.command.is_none());
        assert!(out2.state.conflicts.is_empty());
    }

    #[test]
    fn policy_waits_while_conflict_flight_in_pcrz() {
        let me = track("MEMEME", base(), 90.0, 60.0);
        let mz = zone(&me);
        // the triggering flight is now in the probable band: hold and wait
        let other_pos = destination_point(&base(), 0.0, 500.0, 300.0);
        let other = track("OTHER1", other_pos, 0.0, 60.0);
        let oz = vec![zone(&other)];
        let assessments = vec![assess_pair(&mz, &oz[0])];
        assert!(assessments[0].in_pcrz && !assessments[0].in_icrz);
        let p = AircraftProperties {
            // keep prediction from re-engaging in this fixture
            control_type: ControlType::Pilot,
            ..props()
        };
        let params = ZoneParams::default();
        let state = CaState {
            phase: CaPhase::WaitingClear,
            ca_start: Some(base()),
            conflicts: BTreeSet::from(["OTHER1".to_string()]),
            commanded_heading: None,
        };
        let input = policy_input_fixture(&me, &mz, &oz, &assessments, &p, &[], &params);
        let out = policy_step(&input, &state);
        assert_eq!(out.state.phase, CaPhase::WaitingClear);
        assert!(out.command.is_none());
    }

    proptest! {
        // emitted maneuvers change heading by a whole number of diversion
        // steps, stay in [0, 360), and respect the vertical caps; the
        // vertical sign always widens the altitude gap
        #[test]
        fn maneuver_legality(me_heading in 0.0..360.0f64, other_heading in 0.0..360.0f64,
                             d in 30.0..280.0f64, dalt in -80.0..80.0f64,
                             diversion in 15.0..90.0f64) {
            let me = track("MEMEME", base(), me_heading, 60.0);
            let pos = destination_point(&base(), 10.0, d, 300.0 + dalt);
            let other = track("OTHER1", pos, other_heading, 60.0);
            let a = assessment_between(&me, &other);
            prop_assume!(a.in_icrz);
            let p = AircraftProperties { diversion_angle_deg: diversion, ..props() };
            let cmd = maneuver_ca(&me, &other, &p, &a);
            prop_assert!((0.0..360.0).contains(&cmd.new_heading));
            let change = heading_diff(me_heading, cmd.new_heading).abs();
            prop_assert!(change <= diversion + 1e-9);
            prop_assert!(cmd.vertical_move_m.abs() <= p.upward_move_m.max(p.downward_move_m) + 1e-9);
            if a.move_distance_m.unwrap_or(0.0) > 0.0 {
                if dalt > 0.0 {
                    prop_assert!(cmd.vertical_move_m <= 0.0, "below the intruder must descend");
                } else {
                    prop_assert!(cmd.vertical_move_m >= 0.0, "at or above must climb");
                }
            }
        }

        // sweep guarantee: when a collision-free point exists in the sweep
        // set, the chosen target is outside every other flight's spheres
        #[test]
        fn sweep_no_new_conflict(seed in 0u64..300) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let me = track("MEMEME", base(), rng.gen_range(0.0..360.0), 60.0);
            let p = props();
            let mut zones = Vec::new();
            for i in 0..3 {
                let pos = destination_point(
                    &base(),
                    rng.gen_range(0.0..360.0),
                    rng.gen_range(50.0..600.0),
                    300.0 + rng.gen_range(-50.0..50.0),
                );
                zones.push(zone(&track(&format!("ZZ{i:04}"), pos, rng.gen_range(0.0..360.0), rng.gen_range(10.0..90.0))));
            }
            let move_distance = rng.gen_range(20.0..200.0);
            let heading = wrap_heading(me.heading + p.diversion_angle_deg);
            let vertical = (move_distance * VERTICAL_SHARE).min(p.upward_move_m);
            let candidate = VelocityCommand {
                new_heading: heading,
                new_speed_mps: p.max_speed_mps,
                target: destination_point(&me.position, heading, move_distance, 300.0 + vertical),
                vertical_move_m: vertical,
                reason: CommandReason::AvoidIcRz,
                best_effort: false,
            };
            let (out, _) = sweep_safe_waypoint(&candidate, &me, &p, &zones);
            if !out.best_effort {
                // the returned target is never inside any ICT sphere
                prop_assert_ne!(airspace_class(&out.target, &zones), AirspaceClass::Conflicted);
            }
        }
    }
}
