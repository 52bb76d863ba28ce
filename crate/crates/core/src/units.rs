//! Unit conversions shared across the pipeline.
//!
//! Internal units are metres, metres/second, seconds and degrees; feet and
//! knots exist only at the ingestion boundary.

/// Metres per international foot.
pub const FT_TO_M: f64 = 0.3048;

/// Metres/second per international knot.
pub const KN_TO_MPS: f64 = 0.514444;

/// Horizontal NMAC boundary: 500 ft.
pub const NMAC_HORIZONTAL_M: f64 = 500.0 * FT_TO_M;

/// Vertical NMAC boundary: 100 ft.
pub const NMAC_VERTICAL_M: f64 = 100.0 * FT_TO_M;

/// Horizontal well-clear boundary: 2000 ft.
pub const WELL_CLEAR_HORIZONTAL_M: f64 = 2000.0 * FT_TO_M;

/// Vertical well-clear boundary: 250 ft.
pub const WELL_CLEAR_VERTICAL_M: f64 = 250.0 * FT_TO_M;

/// Convert feet to metres.
pub fn feet_to_metres(ft: f64) -> f64 {
    ft * FT_TO_M
}

/// Convert knots to metres per second.
pub fn knots_to_mps(kn: f64) -> f64 {
    kn * KN_TO_MPS
}
