//! Kinematic actuation: how a commanded velocity vector turns into motion
//! under turn-rate, acceleration and climb-rate limits, plus the simple
//! waypoint follower scripted flights and nominal-phase hosts fly with.

use crate::avoidance::{AircraftProperties, VelocityCommand, ROUTE_CAPTURE_RADIUS_M};
use crate::ec_ingest::TrackPoint;
use crate::geodesy::{
    destination_point, ground_distance, heading_diff, initial_bearing, wrap_heading, GeoPoint,
};

/// A desired velocity vector in engine units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guidance {
    pub heading: f64,
    pub speed_mps: f64,
    pub target_alt_m: f64,
}

impl Guidance {
    pub fn from_command(cmd: &VelocityCommand) -> Self {
        Guidance {
            heading: cmd.new_heading,
            speed_mps: cmd.new_speed_mps,
            target_alt_m: cmd.target.alt_m,
        }
    }

    /// Keep the current vector.
    pub fn hold(state: &TrackPoint) -> Self {
        Guidance {
            heading: state.heading,
            speed_mps: state.speed_mps,
            target_alt_m: state.position.alt_m,
        }
    }
}

/// Advance a flight one tick toward a guidance vector: heading slews at
/// most `max_turn_rate * dt`, speed at most `accel_limit * dt`, altitude at
/// most `max_climb_rate * dt`, then the position moves along the new
/// heading at the new speed.
pub fn advance(
    state: &TrackPoint,
    guidance: &Guidance,
    props: &AircraftProperties,
    dt: f64,
    accel_limit_mps2: f64,
    now: f64,
) -> TrackPoint {
    let max_turn = props.max_turn_rate_dps * dt;
    let turn = heading_diff(state.heading, guidance.heading).clamp(-max_turn, max_turn);
    let heading = wrap_heading(state.heading + turn);

    let desired_speed = guidance
        .speed_mps
        .clamp(props.min_speed_mps, props.max_speed_mps);
    let dv = (desired_speed - state.speed_mps).clamp(-accel_limit_mps2 * dt, accel_limit_mps2 * dt);
    let speed = state.speed_mps + dv;

    let max_climb = props.max_climb_rate_mps * dt;
    let dalt = (guidance.target_alt_m - state.position.alt_m).clamp(-max_climb, max_climb);
    let alt = state.position.alt_m + dalt;

    let position = destination_point(&state.position, heading, speed * dt, alt);
    TrackPoint {
        icao: state.icao.clone(),
        position,
        heading,
        speed_mps: speed,
        observed_at: now,
        latency_s: 0.0,
    }
}

/// Spec-level actuation entry point: apply one command for one tick.
pub fn apply_command(
    state: &TrackPoint,
    cmd: &VelocityCommand,
    props: &AircraftProperties,
    dt: f64,
    accel_limit_mps2: f64,
    now: f64,
) -> TrackPoint {
    advance(
        state,
        &Guidance::from_command(cmd),
        props,
        dt,
        accel_limit_mps2,
        now,
    )
}

/// Waypoint follower: steer at cruise speed toward the next route point,
/// capturing waypoints within `capture_radius_m`. Returns the guidance and
/// the updated next-waypoint index; `None` guidance after the final
/// waypoint (the flight holds its last vector).
///
/// The capture radius must cover at least one tick of motion or a fast
/// flight can orbit a waypoint it keeps stepping over.
pub fn route_guidance(
    state: &TrackPoint,
    route: &[GeoPoint],
    mut next_index: usize,
    cruise_speed_mps: f64,
    capture_radius_m: f64,
) -> (Option<Guidance>, usize) {
    let capture = capture_radius_m.max(ROUTE_CAPTURE_RADIUS_M);
    while next_index < route.len()
        && ground_distance(&state.position, &route[next_index]) <= capture
    {
        next_index += 1;
    }
    if next_index >= route.len() {
        return (None, next_index);
    }
    let target = &route[next_index];
    let heading = match initial_bearing(&state.position, target) {
        Ok(b) => b,
        Err(_) => state.heading,
    };
    (
        Some(Guidance {
            heading,
            speed_mps: cruise_speed_mps,
            target_alt_m: target.alt_m,
        }),
        next_index,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avoidance::CommandReason;

    fn props() -> AircraftProperties {
        AircraftProperties {
            max_turn_rate_dps: 20.0,
            max_climb_rate_mps: 5.0,
            max_speed_mps: 100.0,
            ..AircraftProperties::default()
        }
    }

    fn state() -> TrackPoint {
        TrackPoint {
            icao: "MEMEME".into(),
            position: GeoPoint::new(53.5, -2.5, 300.0).unwrap(),
            heading: 90.0,
            speed_mps: 60.0,
            observed_at: 0.0,
            latency_s: 0.0,
        }
    }

    #[test]
    fn command_equal_to_state_advances_straight() {
        let s = state();
        let cmd = VelocityCommand::hold(&s, CommandReason::Hold);
        let next = apply_command(&s, &cmd, &props(), 0.5, 3.0, 0.5);
        assert_eq!(next.heading, 90.0);
        assert_eq!(next.speed_mps, 60.0);
        let moved = ground_distance(&s.position, &next.position);
        assert!((moved - 30.0).abs() < 1e-6, "moved {moved}");
    }

    #[test]
    fn heading_slew_is_rate_limited() {
        // 90 degree gap, 20 deg/s, dt 0.5 -> exactly 10 degrees
        let s = state();
        let mut cmd = VelocityCommand::hold(&s, CommandReason::Hold);
        cmd.new_heading = 180.0;
        let next = apply_command(&s, &cmd, &props(), 0.5, 3.0, 0.5);
        assert_eq!(next.heading, 100.0);
    }

    #[test]
    fn climb_is_rate_limited() {
        // 50 m requested, 5 m/s, dt 0.5 -> +2.5 m
        let s = state();
        let mut cmd = VelocityCommand::hold(&s, CommandReason::Hold);
        cmd.target = s.position.with_alt(350.0);
        let next = apply_command(&s, &cmd, &props(), 0.5, 3.0, 0.5);
        assert_eq!(next.position.alt_m, 302.5);
    }

    #[test]
    fn speed_change_is_accel_limited() {
        let s = state();
        let mut cmd = VelocityCommand::hold(&s, CommandReason::Hold);
        cmd.new_speed_mps = 80.0;
        let next = apply_command(&s, &cmd, &props(), 0.5, 3.0, 0.5);
        assert_eq!(next.speed_mps, 61.5); // 3 m/s^2 * 0.5 s
    }

    #[test]
    fn route_follower_captures_waypoints() {
        let s = state();
        let wp0 = destination_point(&s.position, 90.0, 5.0, 300.0); // inside capture
        let wp1 = destination_point(&s.position, 90.0, 2_000.0, 300.0);
        let route = vec![wp0, wp1];
        let (g, idx) = route_guidance(&s, &route, 0, 60.0, 10.0);
        assert_eq!(idx, 1); // first waypoint captured immediately
        let g = g.unwrap();
        assert!((g.heading - 90.0).abs() < 0.1);

        // past the final waypoint: no guidance
        let (g2, idx2) = route_guidance(&s, &route[..1].to_vec(), 1, 60.0, 10.0);
        assert!(g2.is_none());
        assert_eq!(idx2, 1);
    }
}
