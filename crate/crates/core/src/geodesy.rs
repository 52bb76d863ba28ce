//! Spherical-earth geodesy: great-circle distances, bearings, destination
//! points and local tangent-plane (ENU) conversions.
//!
//! All public APIs take and return degrees and metres; radians never cross
//! a module boundary. The earth model is a sphere of radius
//! [`EARTH_RADIUS_M`], which is accurate to well under 0.5% at the scales
//! the engine operates on (tens of kilometres).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Spherical earth radius in metres.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

/// Points closer than this are treated as coincident for bearing purposes.
pub const COINCIDENT_EPS_M: f64 = 0.01;

/// Lowest altitude the engine accepts, metres above mean sea level.
pub const MIN_ALT_M: f64 = -500.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeodesyError {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside (-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("altitude {0} m below {MIN_ALT_M} m or not finite")]
    AltitudeInvalid(f64),
    #[error("points are coincident (ground distance < {COINCIDENT_EPS_M} m); bearing undefined")]
    CoincidentPoints,
}

/// A geodetic position: latitude/longitude in degrees, altitude in metres
/// above mean sea level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    pub alt_m: f64,
}

impl GeoPoint {
    /// Validating constructor. Longitude is normalized into (-180, 180].
    pub fn new(lat: f64, lon: f64, alt_m: f64) -> Result<Self, GeodesyError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeodesyError::LatitudeOutOfRange(lat));
        }
        if !lon.is_finite() {
            return Err(GeodesyError::LongitudeOutOfRange(lon));
        }
        if !alt_m.is_finite() || alt_m < MIN_ALT_M {
            return Err(GeodesyError::AltitudeInvalid(alt_m));
        }
        Ok(GeoPoint {
            lat,
            lon: normalize_lon(lon),
            alt_m,
        })
    }

    /// Same position with a different altitude.
    pub fn with_alt(self, alt_m: f64) -> Self {
        GeoPoint { alt_m, ..self }
    }
}

/// Great-circle ground distance in metres (haversine on the spherical
/// earth); altitude is ignored. Symmetric under argument exchange.
pub fn ground_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let phi_a = a.lat.to_radians();
    let phi_b = b.lat.to_radians();
    let lat_diff = (a.lat - b.lat).to_radians();
    let lon_diff = (a.lon - b.lon).to_radians();
    let h =
        (lat_diff / 2.0).sin().powi(2) + phi_a.cos() * phi_b.cos() * (lon_diff / 2.0).sin().powi(2);
    EARTH_RADIUS_M * 2.0 * h.sqrt().min(1.0).asin()
}

/// Direct 3-D distance: hypotenuse of the ground distance and the altitude
/// difference. Always at least as large as [`ground_distance`].
pub fn direct_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let ground = ground_distance(a, b);
    let dalt = a.alt_m - b.alt_m;
    (ground * ground + dalt * dalt).sqrt()
}

/// Point at the given initial bearing and great-circle distance from
/// `origin`, with the altitude replaced by `new_alt_m`.
pub fn destination_point(
    origin: &GeoPoint,
    bearing_deg: f64,
    distance_m: f64,
    new_alt_m: f64,
) -> GeoPoint {
    if distance_m == 0.0 {
        return origin.with_alt(new_alt_m);
    }
    let lat_r = origin.lat.to_radians();
    let lon_r = origin.lon.to_radians();
    let bearing_r = bearing_deg.to_radians();
    let angular = distance_m / EARTH_RADIUS_M;

    let sin_lat2 = lat_r.sin() * angular.cos() + lat_r.cos() * angular.sin() * bearing_r.cos();
    let lat2 = sin_lat2.clamp(-1.0, 1.0).asin();
    let y = bearing_r.sin() * angular.sin() * lat_r.cos();
    let x = angular.cos() - lat_r.sin() * sin_lat2;
    let lon2 = lon_r + y.atan2(x);

    GeoPoint {
        lat: lat2.to_degrees(),
        lon: normalize_lon(lon2.to_degrees()),
        alt_m: new_alt_m,
    }
}

/// Forward azimuth of the great circle from `a` to `b`, degrees in [0, 360).
///
/// Errors when the points are closer than [`COINCIDENT_EPS_M`] on the
/// ground, where the bearing is undefined.
pub fn initial_bearing(a: &GeoPoint, b: &GeoPoint) -> Result<f64, GeodesyError> {
    if ground_distance(a, b) < COINCIDENT_EPS_M {
        return Err(GeodesyError::CoincidentPoints);
    }
    let phi_a = a.lat.to_radians();
    let phi_b = b.lat.to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let y = dlon.sin() * phi_b.cos();
    let x = phi_a.cos() * phi_b.sin() - phi_a.sin() * phi_b.cos() * dlon.cos();
    Ok(wrap_heading(y.atan2(x).to_degrees()))
}

/// Map any finite heading onto [0, 360).
pub fn wrap_heading(h: f64) -> f64 {
    let w = h.rem_euclid(360.0);
    if w == 360.0 {
        0.0
    } else {
        w
    }
}

/// Signed smallest angular difference `to - from`, in (-180, 180].
pub fn heading_diff(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Normalize a longitude into (-180, 180].
pub fn normalize_lon(lon: f64) -> f64 {
    let w = lon.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// East/north/up offset of `p` from `origin` on the local tangent plane,
/// metres. Valid for separations up to a few tens of kilometres.
pub fn to_enu(origin: &GeoPoint, p: &GeoPoint) -> [f64; 3] {
    let east = (p.lon - origin.lon).to_radians() * origin.lat.to_radians().cos() * EARTH_RADIUS_M;
    let north = (p.lat - origin.lat).to_radians() * EARTH_RADIUS_M;
    let up = p.alt_m - origin.alt_m;
    [east, north, up]
}

/// Inverse of [`to_enu`] about the same origin.
pub fn from_enu(origin: &GeoPoint, enu: [f64; 3]) -> GeoPoint {
    let lat = origin.lat + (enu[1] / EARTH_RADIUS_M).to_degrees();
    let lon = origin.lon + (enu[0] / (EARTH_RADIUS_M * origin.lat.to_radians().cos())).to_degrees();
    GeoPoint {
        lat,
        lon: normalize_lon(lon),
        alt_m: origin.alt_m + enu[2],
    }
}
