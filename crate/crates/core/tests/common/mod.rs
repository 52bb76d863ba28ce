//! Shared fixtures and independent oracles for the integration and
//! acceptance suites. The oracles here deliberately avoid every code path
//! they are used to check: geodesy is done on raw 3-D unit vectors, the
//! estimator check is a closed-form running mean.

#![allow(dead_code)]

use dacm_core::avoidance::{AircraftProperties, ControlType, MissionType};
use dacm_core::geodesy::GeoPoint;
use dacm_core::simulator::{Behavior, FlightSpec, Scenario};
use dacm_core::units::knots_to_mps;
use dacm_core::EngineConfig;

pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

fn unit(p: &GeoPoint) -> [f64; 3] {
    let (lat, lon) = (p.lat.to_radians(), p.lon.to_radians());
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Great-circle distance from the angle between position vectors.
pub fn oracle_ground_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (u, v) = (unit(a), unit(b));
    EARTH_RADIUS_M * norm(cross(u, v)).atan2(dot(u, v))
}

/// Forward azimuth from the tangent-plane projection of the target.
pub fn oracle_initial_bearing(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (u, v) = (unit(a), unit(b));
    let north_pole = [0.0, 0.0, 1.0];
    let east = cross(north_pole, u);
    let en = norm(east);
    let east = [east[0] / en, east[1] / en, east[2] / en];
    let north = cross(u, east);
    let w = [
        v[0] - dot(v, u) * u[0],
        v[1] - dot(v, u) * u[1],
        v[2] - dot(v, u) * u[2],
    ];
    dot(w, east)
        .atan2(dot(w, north))
        .to_degrees()
        .rem_euclid(360.0)
}

/// Destination point by rotating the position vector in the bearing plane.
pub fn oracle_destination(origin: &GeoPoint, bearing_deg: f64, distance_m: f64) -> GeoPoint {
    let u = unit(origin);
    let north_pole = [0.0, 0.0, 1.0];
    let east = cross(north_pole, u);
    let en = norm(east);
    let east = [east[0] / en, east[1] / en, east[2] / en];
    let north = cross(u, east);
    let b = bearing_deg.to_radians();
    let dir = [
        north[0] * b.cos() + east[0] * b.sin(),
        north[1] * b.cos() + east[1] * b.sin(),
        north[2] * b.cos() + east[2] * b.sin(),
    ];
    let ang = distance_m / EARTH_RADIUS_M;
    let w = [
        u[0] * ang.cos() + dir[0] * ang.sin(),
        u[1] * ang.cos() + dir[1] * ang.sin(),
        u[2] * ang.cos() + dir[2] * ang.sin(),
    ];
    GeoPoint {
        lat: w[2].clamp(-1.0, 1.0).asin().to_degrees(),
        lon: w[1].atan2(w[0]).to_degrees(),
        alt_m: origin.alt_m,
    }
}

/// Host-drone properties used in the regression encounters.
pub fn host_props() -> AircraftProperties {
    AircraftProperties {
        model: "host".into(),
        control_type: ControlType::Autonomous,
        mission_type: MissionType::AirBased,
        diversion_angle_deg: 45.0,
        upward_move_m: 30.0,
        downward_move_m: 30.0,
        max_speed_mps: 80.0,
        min_speed_mps: 0.0,
        max_turn_rate_dps: 30.0,
        max_climb_rate_mps: 10.0,
    }
}

/// The banded regression encounter: a controlled flight at 138 kn
/// meets a scripted intruder at 125 kn head-on, co-altitude, with the
/// response-time latencies at their defaults.
pub fn head_on_scenario(ca_enabled: bool, seed: u64) -> Scenario {
    let alt = 300.0;
    let me_start = GeoPoint::new(53.5, -2.70, alt).unwrap();
    let me_speed = knots_to_mps(138.0);
    let intruder_speed = knots_to_mps(125.0);

    // both fly the same west-east line in opposite directions
    let me_end = oracle_destination(&me_start, 90.0, 15_000.0);
    let intruder_start = oracle_destination(&me_start, 90.0, 9_000.0);
    let intruder_end = oracle_destination(&intruder_start, 270.0, 16_000.0);

    let mut config = EngineConfig::default();
    config.ca_enabled = ca_enabled;
    config.noise_sigma_m = 0.0;

    Scenario {
        id: format!("head_on_ca_{}", if ca_enabled { "on" } else { "off" }),
        tick_dt_s: 0.5,
        duration_s: 400.0,
        seed,
        config,
        fence: None,
        flights: vec![
            FlightSpec {
                icao: "4CA7B8".into(),
                behavior: Behavior::DacmControlled,
                props: host_props(),
                initial: me_start,
                initial_heading: 90.0,
                initial_speed_mps: me_speed,
                route: vec![me_end],
            },
            FlightSpec {
                icao: "407B2C".into(),
                behavior: Behavior::Scripted,
                props: AircraftProperties {
                    model: "intruder".into(),
                    max_speed_mps: 80.0,
                    ..AircraftProperties::default()
                },
                initial: intruder_start,
                initial_heading: 270.0,
                initial_speed_mps: intruder_speed,
                route: vec![intruder_end],
            },
        ],
    }
}

/// Nominal imminent-zone radii sum for the head-on pair at cruise speeds.
pub fn head_on_ict_sum() -> f64 {
    2.5 * (knots_to_mps(138.0) + knots_to_mps(125.0))
}

/// A seeded random encounter: one controlled flight crossing a box that
/// three scripted intruders fly through on courses aimed near its path.
pub fn random_four_flight_scenario(seed: u64) -> Scenario {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let alt = 300.0;
    let center = GeoPoint::new(53.5, -2.5, alt).unwrap();

    let me_start = oracle_destination(&center, 270.0, 4_000.0);
    let me_speed = rng.gen_range(45.0..75.0);
    let me_end = oracle_destination(&me_start, 90.0, 8_000.0);

    let mut flights = vec![FlightSpec {
        icao: "DAC001".into(),
        behavior: Behavior::DacmControlled,
        props: host_props(),
        initial: me_start,
        initial_heading: 90.0,
        initial_speed_mps: me_speed,
        route: vec![me_end.with_alt(alt)],
    }];

    for i in 0..3 {
        // aim each intruder at a point near the host's future path so
        // encounters actually happen
        let along = rng.gen_range(2_000.0..6_000.0);
        let aim = oracle_destination(&me_start, 90.0, along);
        let aim = GeoPoint {
            alt_m: alt + rng.gen_range(-40.0..40.0),
            ..aim
        };
        let approach_bearing = rng.gen_range(0.0..360.0);
        let standoff = rng.gen_range(2_500.0..5_000.0);
        let start = oracle_destination(&aim, approach_bearing, standoff).with_alt(aim.alt_m);
        let heading = oracle_initial_bearing(&start, &aim);
        let speed = rng.gen_range(30.0..70.0);
        let end = oracle_destination(&start, heading, standoff + 6_000.0).with_alt(aim.alt_m);
        flights.push(FlightSpec {
            icao: format!("A{i:05}"),
            behavior: Behavior::Scripted,
            props: AircraftProperties::default(),
            initial: start,
            initial_heading: heading,
            initial_speed_mps: speed,
            route: vec![end],
        });
    }

    let mut config = EngineConfig::default();
    config.noise_sigma_m = 0.0;
    Scenario {
        id: format!("random4_{seed}"),
        tick_dt_s: 0.5,
        duration_s: 240.0,
        seed,
        config,
        fence: None,
        flights,
    }
}
