//! Speed-scaled collision travel zones and pairwise risk assessment.
//!
//! Every flight carries two concentric spheres: the imminent-collision
//! travel zone (ICT) of radius `speed * ictd` and the probable-collision
//! travel zone (PCT) at exactly twice that radius. Two flights are in the
//! imminent risk band (IcRz) when their direct 3-D distance is within the
//! sum of their ICT radii, and in the probable band (PcRz) when the
//! distance is within the sum of the PCT radii but beyond the ICT sum; the
//! bands are disjoint by construction. A collision probability maps the
//! distance into (0, 1]: 0.5 at the band junction, 1 at coincidence.
//!
//! Very slow flights would otherwise shrink their zones below a usable
//! reaction distance, so radii are floored at an emergency reaction
//! distance.

use crate::ec_ingest::TrackPoint;
use crate::geodesy::{direct_distance, GeoPoint};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ZoneError {
    #[error("pctd_s must equal 2 x ictd_s (got pctd {pctd_s}, ictd {ictd_s})")]
    TravelDistanceRatio { pctd_s: f64, ictd_s: f64 },
    #[error("zone parameters must be positive")]
    NonPositiveParams,
    #[error("distance {d} outside the assessable band (0, {pct_sum}]")]
    OutOfBand { d: f64, pct_sum: f64 },
}

/// Travel-distance horizons and the slow-speed floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneParams {
    /// Probable-collision travel distance horizon, seconds. Always twice
    /// `ictd_s`.
    pub pctd_s: f64,
    /// Imminent-collision travel distance horizon, seconds.
    pub ictd_s: f64,
    /// Pilot early-warning horizon, seconds.
    pub pcrz_warn_s: f64,
    /// Emergency reaction radius floor for slow or hovering flights, metres.
    pub emergency_floor_m: f64,
}

impl ZoneParams {
    pub fn new(
        pctd_s: f64,
        ictd_s: f64,
        pcrz_warn_s: f64,
        emergency_floor_m: f64,
    ) -> Result<Self, ZoneError> {
        if !(pctd_s > 0.0 && ictd_s > 0.0 && pcrz_warn_s > 0.0 && emergency_floor_m > 0.0) {
            return Err(ZoneError::NonPositiveParams);
        }
        if (pctd_s - 2.0 * ictd_s).abs() > 1e-9 {
            return Err(ZoneError::TravelDistanceRatio { pctd_s, ictd_s });
        }
        Ok(ZoneParams {
            pctd_s,
            ictd_s,
            pcrz_warn_s,
            emergency_floor_m,
        })
    }
}

impl Default for ZoneParams {
    fn default() -> Self {
        ZoneParams {
            pctd_s: 5.0,
            ictd_s: 2.5,
            pcrz_warn_s: 12.0,
            emergency_floor_m: 30.0,
        }
    }
}

/// The two travel-zone spheres of one flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSet {
    pub icao: String,
    pub ict_radius_m: f64,
    /// Always exactly twice the ICT radius.
    pub pct_radius_m: f64,
    pub center: GeoPoint,
    pub speed_mps: f64,
    pub heading: f64,
}

impl ZoneSet {
    /// Build from a track point: ICT radius is the floored travel distance,
    /// PCT locked to twice it.
    pub fn from_track(track: &TrackPoint, params: &ZoneParams) -> ZoneSet {
        let ict = zone_radius(track.speed_mps, params.ictd_s, params.emergency_floor_m);
        ZoneSet {
            icao: track.icao.clone(),
            ict_radius_m: ict,
            pct_radius_m: 2.0 * ict,
            center: track.position,
            speed_mps: track.speed_mps,
            heading: track.heading,
        }
    }
}

/// Pairwise conflict assessment between the host and one other flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictAssessment {
    pub me_icao: String,
    pub other_icao: String,
    pub direct_distance_m: f64,
    /// Sum of the two ICT radii.
    pub ict_sum_m: f64,
    /// Sum of the two PCT radii.
    pub pct_sum_m: f64,
    pub in_pcrz: bool,
    pub in_icrz: bool,
    /// Collision probability; absent outside both bands.
    pub pc: Option<f64>,
    /// ICT invasion depth, set only while in the imminent band.
    pub move_distance_m: Option<f64>,
    /// Coincident positions: probability pinned to 1.
    pub degenerate: bool,
}

/// Dynamic sphere radius for a travel-distance horizon: `speed * td`
/// floored at the emergency reaction distance.
pub fn zone_radius(speed_mps: f64, td_s: f64, emergency_floor_m: f64) -> f64 {
    (speed_mps * td_s).max(emergency_floor_m)
}

/// Piecewise-linear collision probability over (0, pct_sum].
///
/// 1 at coincidence, 0.5 exactly at the band junction (`d = ict_sum`),
/// falling to 0 at the outer boundary; monotone non-increasing and
/// continuous throughout.
pub fn collision_probability(d: f64, ict_sum: f64, pct_sum: f64) -> Result<f64, ZoneError> {
    if d < 0.0 || d > pct_sum {
        return Err(ZoneError::OutOfBand { d, pct_sum });
    }
    if d <= ict_sum {
        Ok(0.5 + 0.5 * (ict_sum - d) / ict_sum)
    } else {
        Ok(0.5 * (pct_sum - d) / (pct_sum - ict_sum))
    }
}

/// Assess one pair of flights against their zone sets.
pub fn assess_pair(me: &ZoneSet, other: &ZoneSet) -> ConflictAssessment {
    let d = direct_distance(&me.center, &other.center);
    let ict_sum = me.ict_radius_m + other.ict_radius_m;
    let pct_sum = me.pct_radius_m + other.pct_radius_m;

    let degenerate = d == 0.0;
    let in_icrz = d > 0.0 && d <= ict_sum;
    let in_pcrz = d > ict_sum && d <= pct_sum;
    let pc = if degenerate {
        Some(1.0)
    } else if in_icrz || in_pcrz {
        Some(collision_probability(d, ict_sum, pct_sum).expect("in band"))
    } else {
        None
    };
    let move_distance_m = if in_icrz || degenerate {
        Some(ict_sum - d)
    } else {
        None
    };

    ConflictAssessment {
        me_icao: me.icao.clone(),
        other_icao: other.icao.clone(),
        direct_distance_m: d,
        ict_sum_m: ict_sum,
        pct_sum_m: pct_sum,
        in_pcrz,
        in_icrz,
        pc,
        move_distance_m,
        degenerate,
    }
}

/// Sphere volume of the ICT zone and the volume of the PCT shell around it
/// (outer radius twice the inner): `(4/3)pi r^3` and `(28/3)pi r^3`.
pub fn zone_volume(ict_radius_m: f64) -> (f64, f64) {
    let r3 = ict_radius_m.powi(3);
    let ict = 4.0 / 3.0 * std::f64::consts::PI * r3;
    let shell = 28.0 / 3.0 * std::f64::consts::PI * r3;
    (ict, shell)
}

/// Classification of a point of airspace against a set of zones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AirspaceClass {
    /// Outside every PCT and ICT sphere.
    CollisionFree,
    /// Inside some PCT shell but outside every ICT sphere.
    RiskLess,
    /// Inside at least one ICT sphere.
    Conflicted,
}

/// Classify a point against every flight's spheres.
pub fn airspace_class(point: &GeoPoint, zones: &[ZoneSet]) -> AirspaceClass {
    let mut in_pct = false;
    for z in zones {
        let d = direct_distance(point, &z.center);
        if d <= z.ict_radius_m {
            return AirspaceClass::Conflicted;
        }
        if d <= z.pct_radius_m {
            in_pct = true;
        }
    }
    if in_pct {
        AirspaceClass::RiskLess
    } else {
        AirspaceClass::CollisionFree
    }
}
