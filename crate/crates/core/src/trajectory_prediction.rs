//! Future-waypoint projection and safety travel tubes.
//!
//! Each tracked flight keeps a short ring of recent waypoints. A constant
//! turn rate is fitted to the unwrapped heading history and the latest
//! state is propagated at constant speed to produce timestamped virtual
//! points; wrapping each point in the flight's imminent-collision radius
//! yields the safety travel tube used for the early-warning tier.

use crate::geodesy::{destination_point, direct_distance, heading_diff, wrap_heading, GeoPoint};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

/// Turn-rate fits are clamped to this magnitude, degrees/second.
pub const MAX_TURN_RATE_FIT_DPS: f64 = 30.0;

/// Default waypoint ring capacity.
pub const DEFAULT_HISTORY_CAPACITY: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum PredictionError {
    #[error("insufficient history: need at least {need} waypoints, have {have}")]
    InsufficientHistory { need: usize, have: usize },
}

/// One recorded waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: GeoPoint,
    pub heading: f64,
    pub speed_mps: f64,
    pub time: f64,
}

/// Bounded ring of recent waypoints with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointHistory {
    pub icao: String,
    capacity: usize,
    points: VecDeque<Waypoint>,
}

impl WaypointHistory {
    pub fn new(icao: impl Into<String>, capacity: usize) -> Self {
        WaypointHistory {
            icao: icao.into(),
            capacity: capacity.max(2),
            points: VecDeque::new(),
        }
    }

    /// Record a waypoint. Samples that do not advance the clock are
    /// ignored, preserving the strictly-increasing invariant.
    pub fn push(&mut self, wp: Waypoint) {
        if let Some(last) = self.points.back() {
            if wp.time <= last.time {
                debug_assert!(wp.time > last.time, "non-increasing waypoint time");
                return;
            }
        }
        if self.points.len() == self.capacity {
            self.points.pop_front();
        }
        self.points.push_back(wp);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn latest(&self) -> Option<&Waypoint> {
        self.points.back()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Waypoint> {
        self.points.iter()
    }
}

/// A timestamped projected waypoint (cartesian virtual point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cvp {
    pub position: GeoPoint,
    /// Offset from the projection start, seconds.
    pub time: f64,
    pub heading: f64,
}

/// A projected centerline wrapped in a per-point protection radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyTravelTube {
    pub icao: String,
    /// Time the tube was built, engine clock.
    pub start_time: f64,
    /// Centerline, strictly increasing `time` offsets starting at 0.
    pub centerline: Vec<Cvp>,
    /// Protection radius per centerline point.
    pub radius_profile: Vec<f64>,
}

/// Least-squares turn rate from the unwrapped heading history, clamped to
/// [`MAX_TURN_RATE_FIT_DPS`]. Needs at least three waypoints.
pub fn estimate_turn_rate(hist: &WaypointHistory) -> Result<f64, PredictionError> {
    if hist.len() < 3 {
        return Err(PredictionError::InsufficientHistory {
            need: 3,
            have: hist.len(),
        });
    }
    // unwrap headings into a continuous series
    let mut times = Vec::with_capacity(hist.len());
    let mut headings = Vec::with_capacity(hist.len());
    let mut prev: Option<f64> = None;
    for wp in hist.iter() {
        let h = match prev {
            None => wp.heading,
            Some(p) => p + heading_diff(wrap_heading(p), wp.heading),
        };
        times.push(wp.time);
        headings.push(h);
        prev = Some(h);
    }
    let n = times.len() as f64;
    let t_mean = times.iter().sum::<f64>() / n;
    let h_mean = headings.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, h) in times.iter().zip(&headings) {
        num += (t - t_mean) * (h - h_mean);
        den += (t - t_mean) * (t - t_mean);
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).clamp(-MAX_TURN_RATE_FIT_DPS, MAX_TURN_RATE_FIT_DPS))
}

/// Project future waypoints from the latest state at constant speed and
/// constant turn rate: `horizon / dt` points at offsets `dt, 2dt, ...`.
/// Altitude is held at the last observed value.
///
/// A straight trajectory (zero fitted turn rate) is projected as a single
/// great circle so that point `n` lies exactly `n*dt*speed` along the
/// initial bearing; turning trajectories are stepped chord-wise with the
/// heading sampled at each step's midpoint.
pub fn project_waypoints(
    hist: &WaypointHistory,
    horizon_s: f64,
    dt_s: f64,
) -> Result<Vec<Cvp>, PredictionError> {
    if hist.len() < 2 {
        return Err(PredictionError::InsufficientHistory {
            need: 2,
            have: hist.len(),
        });
    }
    let last = *hist.latest().expect("non-empty");
    let turn_rate = if hist.len() >= 3 {
        estimate_turn_rate(hist)?
    } else {
        0.0
    };
    let steps = (horizon_s / dt_s).floor() as usize;
    let mut out = Vec::with_capacity(steps);

    if turn_rate.abs() < 1e-9 {
        for i in 1..=steps {
            let t = i as f64 * dt_s;
            out.push(Cvp {
                position: destination_point(
                    &last.position,
                    last.heading,
                    last.speed_mps * t,
                    last.position.alt_m,
                ),
                time: t,
                heading: last.heading,
            });
        }
    } else {
        let mut pos = last.position;
        let mut heading = last.heading;
        for i in 1..=steps {
            let mid = wrap_heading(heading + turn_rate * dt_s / 2.0);
            pos = destination_point(&pos, mid, last.speed_mps * dt_s, last.position.alt_m);
            heading = wrap_heading(heading + turn_rate * dt_s);
            out.push(Cvp {
                position: pos,
                time: i as f64 * dt_s,
                heading,
            });
        }
    }
    Ok(out)
}

/// Build a flight's safety travel tube: the current position at offset 0
/// followed by the projected centerline, every point protected by the
/// flight's imminent-collision radius.
pub fn build_tube(
    hist: &WaypointHistory,
    ict_radius_m: f64,
    horizon_s: f64,
    dt_s: f64,
    start_time: f64,
) -> Result<SafetyTravelTube, PredictionError> {
    let last = hist
        .latest()
        .ok_or(PredictionError::InsufficientHistory { need: 2, have: 0 })?;
    let mut centerline = vec![Cvp {
        position: last.position,
        time: 0.0,
        heading: last.heading,
    }];
    centerline.extend(project_waypoints(hist, horizon_s, dt_s)?);
    let radius_profile = vec![ict_radius_m; centerline.len()];
    Ok(SafetyTravelTube {
        icao: hist.icao.clone(),
        start_time,
        centerline,
        radius_profile,
    })
}

/// Earliest time at which two tubes' time-aligned centerline points come
/// within the sum of their radii, with the minimum aligned distance over
/// the overlap. `None` when the tubes never touch.
///
/// The crossing time is linearly interpolated between the last clear
/// sample and the first touching sample; a tube already touching at its
/// first aligned point reports that point's time.
pub fn stt_intersects(a: &SafetyTravelTube, b: &SafetyTravelTube) -> Option<(f64, f64)> {
    let n = a.centerline.len().min(b.centerline.len());
    let mut min_distance = f64::INFINITY;
    let mut first_time: Option<f64> = None;
    let mut prev: Option<(f64, f64, f64)> = None; // (time, distance, threshold)

    for i in 0..n {
        let ca = &a.centerline[i];
        let cb = &b.centerline[i];
        if (ca.time - cb.time).abs() > 1e-6 {
            continue; // no cross-time aliasing
        }
        let d = direct_distance(&ca.position, &cb.position);
        let threshold = a.radius_profile[i] + b.radius_profile[i];
        min_distance = min_distance.min(d);
        if first_time.is_none() && d <= threshold {
            first_time = Some(match prev {
                Some((pt, pd, _)) if pd > threshold => {
                    // interpolate the crossing between samples
                    pt + (pd - threshold) / (pd - d) * (ca.time - pt)
                }
                _ => ca.time,
            });
        }
        prev = Some((ca.time, d, threshold));
    }

    first_time.map(|t| (t, min_distance))
}

/// Flight-of-safety-route test: true when the host's tube intersects no
/// other tube and it carries no active probable or imminent risk.
pub fn is_fosr(
    me_tube: &SafetyTravelTube,
    other_tubes: &[SafetyTravelTube],
    has_active_risk: bool,
) -> bool {
    if has_active_risk {
        return false;
    }
    other_tubes
        .iter()
        .all(|t| stt_intersects(me_tube, t).is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{ground_distance, initial_bearing};
    use proptest::prelude::*;

    fn base() -> GeoPoint {
        GeoPoint::new(53.5, -2.5, 300.0).unwrap()
    }

    fn hist_with_headings(headings: &[f64], speed: f64) -> WaypointHistory {
        let mut h = WaypointHistory::new("AAAAAA", DEFAULT_HISTORY_CAPACITY);
        let mut pos = base();
        for (i, hd) in headings.iter().enumerate() {
            h.push(Waypoint {
                position: pos,
                heading: *hd,
                speed_mps: speed,
                time: i as f64,
            });
            pos = destination_point(&pos, *hd, speed, 300.0);
        }
        h
    }

    #[test]
    fn ring_capacity_and_ordering() {
        let mut h = WaypointHistory::new("AAAAAA", 3);
        for i in 0..5 {
            h.push(Waypoint {
                position: base(),
                heading: 0.0,
                speed_mps: 1.0,
                time: i as f64,
            });
        }
        assert_eq!(h.len(), 3);
        assert_eq!(h.latest().unwrap().time, 4.0);
        // non-increasing time is dropped
        #[cfg(not(debug_assertions))]
        {
            h.push(Waypoint {
                position: base(),
                heading: 0.0,
                speed_mps: 1.0,
                time: 4.0,
            });
            assert_eq!(h.len(), 3);
        }
    }

    #[test]
    fn turn_rate_constant_heading() {
        let h = hist_with_headings(&[90.0, 90.0, 90.0, 90.0], 50.0);
        assert_eq!(estimate_turn_rate(&h).unwrap(), 0.0);
    }

    #[test]
    fn turn_rate_exact_line() {
        let h = hist_with_headings(&[0.0, 10.0, 20.0], 50.0);
        assert!((estimate_turn_rate(&h).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn turn_rate_unwraps_across_north() {
        let h = hist_with_headings(&[350.0, 0.0, 10.0], 50.0);
        assert!((estimate_turn_rate(&h).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn turn_rate_needs_three_points() {
        let h = hist_with_headings(&[0.0, 10.0], 50.0);
        assert_eq!(
            estimate_turn_rate(&h).unwrap_err(),
            PredictionError::InsufficientHistory { need: 3, have: 2 }
        );
    }

    #[test]
    fn projection_dead_reckoning_spacing() {
        let h = hist_with_headings(&[90.0, 90.0, 90.0], 60.0);
        let cvps = project_waypoints(&h, 10.0, 1.0).unwrap();
        assert_eq!(cvps.len(), 10);
        let start = h.latest().unwrap().position;
        for (i, c) in cvps.iter().enumerate() {
            let want = 60.0 * (i as f64 + 1.0);
            let got = ground_distance(&start, &c.position);
            assert!(
                (got - want).abs() <= 1e-6 * want,
                "point {i}: {got} vs {want}"
            );
            assert_eq!(c.heading, 90.0);
        }
    }

    #[test]
    fn projection_consistency_against_destination_point() {
        let h = hist_with_headings(&[37.0, 37.0, 37.0], 55.0);
        let cvps = project_waypoints(&h, 30.0, 1.0).unwrap();
        let start = h.latest().unwrap().position;
        for (i, c) in cvps.iter().enumerate() {
            let t = (i + 1) as f64;
            let expect = destination_point(&start, 37.0, 55.0 * t, 300.0);
            let err = ground_distance(&c.position, &expect);
            assert!(err <= 1e-6 * (55.0 * t), "point {i} off by {err} m");
        }
    }

    #[test]
    fn projection_closes_full_circle() {
        // 9 deg/s for 40 s closes the loop; final heading equals initial
        let h = hist_with_headings(&[0.0, 9.0, 18.0], 60.0);
        let rate = estimate_turn_rate(&h).unwrap();
        assert!((rate - 9.0).abs() < 1e-9);
        let cvps = project_waypoints(&h, 40.0, 1.0).unwrap();
        assert_eq!(cvps.len(), 40);
        let last = cvps.last().unwrap();
        assert!(heading_diff(last.heading, 18.0).abs() < 1e-6);
        // the 40-chord polygon closes on the start point
        let start = h.latest().unwrap().position;
        let closure = ground_distance(&start, &last.position);
        assert!(closure < 5.0, "loop failed to close: {closure} m open");
    }

    #[test]
    fn projection_zero_horizon_is_empty() {
        let h = hist_with_headings(&[0.0, 0.0, 0.0], 60.0);
        assert!(project_waypoints(&h, 0.0, 1.0).unwrap().is_empty());
    }

    fn straight_tube(
        icao: &str,
        start: GeoPoint,
        heading: f64,
        speed: f64,
        horizon: f64,
    ) -> SafetyTravelTube {
        let mut h = WaypointHistory::new(icao, DEFAULT_HISTORY_CAPACITY);
        // back-extrapolated history so the latest waypoint sits at `start`
        for i in 0..3i32 {
            let t = (i - 2) as f64;
            let pos = destination_point(&start, heading, speed * t, start.alt_m);
            h.push(Waypoint {
                position: pos,
                heading,
                speed_mps: speed,
                time: t,
            });
        }
        build_tube(&h, 150.0, horizon, 1.0, 0.0).unwrap()
    }

    #[test]
    fn parallel_tubes_do_not_intersect() {
        let a = straight_tube("AAAAAA", base(), 90.0, 60.0, 30.0);
        let other_start = destination_point(&base(), 0.0, 10_000.0, 300.0);
        let b = straight_tube("BBBBBB", other_start, 90.0, 60.0, 30.0);
        assert_eq!(stt_intersects(&a, &b), None);
    }

    #[test]
    fn head_on_crossing_time_matches_closing_oracle() {
        // closing speed 120 m/s from 3 km, radii 150 + 150:
        // (3000 - 300) / 120 = 22.5 s
        let a = straight_tube("AAAAAA", base(), 90.0, 60.0, 40.0);
        let bearing_start = destination_point(&base(), 90.0, 3_000.0, 300.0);
        let back = initial_bearing(&bearing_start, &base()).unwrap();
        let b = straight_tube("BBBBBB", bearing_start, back, 60.0, 40.0);
        let (t, min_d) = stt_intersects(&a, &b).unwrap();
        assert!((t - 22.5).abs() < 0.05, "first touch at {t}");
        assert!(min_d < 300.0);
    }

    #[test]
    fn identical_centerlines_touch_immediately() {
        let a = straight_tube("AAAAAA", base(), 90.0, 60.0, 20.0);
        let mut b = a.clone();
        b.icao = "BBBBBB".into();
        let (t, min_d) = stt_intersects(&a, &b).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(min_d, 0.0);
    }

    #[test]
    fn fosr_cases() {
        let me = straight_tube("MEMEME", base(), 90.0, 60.0, 30.0);
        assert!(is_fosr(&me, &[], false));
        assert!(!is_fosr(&me, &[], true)); // active current risk vetoes

        let far = straight_tube(
            "BBBBBB",
            destination_point(&base(), 0.0, 10_000.0, 300.0),
            90.0,
            60.0,
            30.0,
        );
        assert!(is_fosr(&me, &[far], false));

        let mut clone = me.clone();
        clone.icao = "CCCCCC".into();
        assert!(!is_fosr(&me, &[clone], false));
    }

    proptest! {
        #[test]
        fn intersection_symmetric(offset in 0.0..5_000.0f64, h1 in 0.0..360.0f64, h2 in 0.0..360.0f64) {
            let a = straight_tube("AAAAAA", base(), h1, 60.0, 30.0);
            let start = destination_point(&base(), 45.0, offset, 300.0);
            let b = straight_tube("BBBBBB", start, h2, 60.0, 30.0);
            prop_assert_eq!(stt_intersects(&a, &b), stt_intersects(&b, &a));
        }

        #[test]
        fn tubes_deterministic(h in 0.0..360.0f64, v in 1.0..120.0f64) {
            let a = straight_tube("AAAAAA", base(), h, v, 30.0);
            let b = straight_tube("AAAAAA", base(), h, v, 30.0);
            prop_assert_eq!(a, b);
        }
    }
}
