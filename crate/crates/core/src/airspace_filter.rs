//! Banding of tracked flights into RoI / MoI / outside relative to the
//! host drone, producing the per-tick airspace snapshot the engine works on.
//!
//! The Map of Interest (MoI) is the outer filter band; the Region of
//! Interest (RoI) is the inner assessment band with exactly half the MoI
//! radius. Banding uses ground distance; altitude plays no role at this
//! stage.

use crate::ec_ingest::TrackPoint;
use crate::geodesy::{ground_distance, heading_diff, initial_bearing, GeoPoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Default MoI radius: 20 statute miles.
pub const DEFAULT_MOI_RADIUS_M: f64 = 32_186.88;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("moi_radius_m must be positive, got {0}")]
    NonPositiveRadius(f64),
}

/// Filter radii. The RoI radius is derived, never set independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    moi_radius_m: f64,
}

impl FilterConfig {
    pub fn new(moi_radius_m: f64) -> Result<Self, FilterError> {
        if !(moi_radius_m > 0.0) {
            return Err(FilterError::NonPositiveRadius(moi_radius_m));
        }
        Ok(FilterConfig { moi_radius_m })
    }

    pub fn moi_radius_m(&self) -> f64 {
        self.moi_radius_m
    }

    /// Exactly half the MoI radius.
    pub fn roi_radius_m(&self) -> f64 {
        self.moi_radius_m / 2.0
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            moi_radius_m: DEFAULT_MOI_RADIUS_M,
        }
    }
}

/// Distance band of a flight relative to the host drone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    RoI,
    MoI,
    Outside,
}

/// A tracked flight inside the MoI, with its band bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandedFlight {
    pub track: TrackPoint,
    pub ground_distance_m: f64,
    /// Set on MoI flights whose trajectory does not point into the RoI;
    /// they are kept in the snapshot but excluded from prediction.
    pub excluded_from_prediction: bool,
}

/// The per-tick view of the airspace around the host drone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirspaceSnapshot {
    pub tick_time: f64,
    pub me: TrackPoint,
    /// Freshest track per icao within the RoI, sorted by icao.
    pub roi_flights: Vec<BandedFlight>,
    /// Freshest track per icao in the MoI ring, sorted by icao.
    pub moi_flights: Vec<BandedFlight>,
    pub dropped_outside: usize,
    pub dropped_stale: usize,
}

/// Band a single position against the filter radii. Boundary distances
/// belong to the inner band.
pub fn classify(me: &GeoPoint, other: &GeoPoint, cfg: &FilterConfig) -> Band {
    let d = ground_distance(me, other);
    if d <= cfg.roi_radius_m() {
        Band::RoI
    } else if d <= cfg.moi_radius_m() {
        Band::MoI
    } else {
        Band::Outside
    }
}

/// Closest-point-of-approach test on the local tangent plane: does the ray
/// from `other` along its heading pass within the RoI radius of `me`?
pub fn heading_into_roi(other: &TrackPoint, me: &GeoPoint, cfg: &FilterConfig) -> bool {
    let d = ground_distance(me, &other.position);
    if d <= cfg.roi_radius_m() {
        return true; // already inside
    }
    let bearing_to_me = match initial_bearing(&other.position, me) {
        Ok(b) => b,
        Err(_) => return true, // coincident: degenerate, treated as inbound
    };
    let off_axis = heading_diff(other.heading, bearing_to_me).to_radians();
    if off_axis.cos() <= 0.0 {
        return false; // pointing away; closest approach is the current range
    }
    let cpa = d * off_axis.sin().abs();
    cpa <= cfg.roi_radius_m()
}

/// Build the snapshot for one tick from the freshest track per icao.
///
/// The host's own icao never appears in the lists; tracks older than
/// `staleness_limit_s` are dropped; MoI flights not heading into the RoI
/// are retained but flagged `excluded_from_prediction`.
pub fn filter_snapshot(
    tracks: &BTreeMap<String, TrackPoint>,
    me: &TrackPoint,
    cfg: &FilterConfig,
    now: f64,
    staleness_limit_s: f64,
) -> AirspaceSnapshot {
    let mut roi = Vec::new();
    let mut moi = Vec::new();
    let mut dropped_outside = 0;
    let mut dropped_stale = 0;

    for (icao, track) in tracks {
        if *icao == me.icao {
            continue;
        }
        if now - track.observed_at > staleness_limit_s {
            dropped_stale += 1;
            continue;
        }
        let d = ground_distance(&me.position, &track.position);
        if d <= cfg.roi_radius_m() {
            roi.push(BandedFlight {
                track: track.clone(),
                ground_distance_m: d,
                excluded_from_prediction: false,
            });
        } else if d <= cfg.moi_radius_m() {
            let inbound = heading_into_roi(track, &me.position, cfg);
            moi.push(BandedFlight {
                track: track.clone(),
                ground_distance_m: d,
                excluded_from_prediction: !inbound,
            });
        } else {
            dropped_outside += 1;
        }
    }

    AirspaceSnapshot {
        tick_time: now,
        me: me.clone(),
        roi_flights: roi,
        moi_flights: moi,
        dropped_outside,
        dropped_stale,
    }
}
