//! Engine configuration: every tunable in one place, with the field-test
//! defaults, plus the key/value override surface the CLI exposes.

use crate::airspace_filter::FilterConfig;
use crate::conflict_zones::ZoneParams;
use crate::state_estimation::{NoiseConfig, ProcessNoiseMode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key \"{0}\"")]
    UnknownKey(String),
    #[error("invalid value for {key}: {reason}")]
    InvalidValue { key: String, reason: String },
}

/// Full engine configuration with defaults matching the field tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Probable-collision travel distance horizon, seconds.
    pub pctd_s: f64,
    /// Imminent-collision travel distance horizon, seconds.
    pub ictd_s: f64,
    /// Pilot early-warning lead, seconds.
    pub pcrz_warn_s: f64,
    /// Emergency reaction radius floor, metres.
    pub emergency_floor_m: f64,
    /// Map-of-interest radius, metres (region of interest is half).
    pub moi_radius_m: f64,
    /// Tracks older than this are dropped, seconds.
    pub staleness_limit_s: f64,
    /// EC device position error, metres.
    pub ec_error_m: f64,
    pub dop_hor: f64,
    pub dop_ver: f64,
    pub process_noise_mode: ProcessNoiseMode,
    /// Telemetry synchronisation smoothing factor, (0, 1].
    pub telemetry_alpha: f64,
    /// Waypoint projection horizon, seconds.
    pub prediction_horizon_s: f64,
    /// Waypoint projection step, seconds.
    pub prediction_dt_s: f64,
    /// Waypoint ring capacity per flight.
    pub history_capacity: usize,
    /// Dead-reckoning horizon for predictive avoidance engagement, seconds.
    pub predictive_engage_s: f64,
    /// EC transport delay injected on observations, seconds.
    pub feed_latency_s: f64,
    /// Delay between a command and its actuation, seconds.
    pub actuation_latency_s: f64,
    /// Longitudinal acceleration limit used by actuation, m/s^2.
    pub accel_limit_mps2: f64,
    /// Gaussian noise sigma injected on observed positions, metres (0 off).
    pub noise_sigma_m: f64,
    /// Master switch for autonomous collision avoidance.
    pub ca_enabled: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            pctd_s: 5.0,
            ictd_s: 2.5,
            pcrz_warn_s: 12.0,
            emergency_floor_m: 30.0,
            moi_radius_m: crate::airspace_filter::DEFAULT_MOI_RADIUS_M,
            staleness_limit_s: 10.0,
            ec_error_m: 10.0,
            dop_hor: 1.5,
            dop_ver: 2.0,
            process_noise_mode: ProcessNoiseMode::Tuned,
            telemetry_alpha: 0.3,
            prediction_horizon_s: 30.0,
            prediction_dt_s: 1.0,
            history_capacity: 8,
            predictive_engage_s: 5.0,
            feed_latency_s: 1.0,
            actuation_latency_s: 1.0,
            accel_limit_mps2: 3.0,
            noise_sigma_m: 0.0,
            ca_enabled: true,
        }
    }
}

impl EngineConfig {
    pub fn zone_params(&self) -> Result<ZoneParams, ConfigError> {
        ZoneParams::new(
            self.pctd_s,
            self.ictd_s,
            self.pcrz_warn_s,
            self.emergency_floor_m,
        )
        .map_err(|e| ConfigError::InvalidValue {
            key: "pctd_s/ictd_s".into(),
            reason: e.to_string(),
        })
    }

    pub fn filter_config(&self) -> Result<FilterConfig, ConfigError> {
        FilterConfig::new(self.moi_radius_m).map_err(|e| ConfigError::InvalidValue {
            key: "moi_radius_m".into(),
            reason: e.to_string(),
        })
    }

    pub fn noise_config(&self) -> NoiseConfig {
        NoiseConfig {
            ec_error_m: self.ec_error_m,
            dop_hor: self.dop_hor,
            dop_ver: self.dop_ver,
        }
    }

    /// Apply one key/value override; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num(key: &str, value: &str) -> Result<f64, ConfigError> {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| ConfigError::InvalidValue {
                    key: key.into(),
                    reason: format!("{value:?} is not a number"),
                })
        }
        match key {
            "pctd_s" => self.pctd_s = num(key, value)?,
            "ictd_s" => self.ictd_s = num(key, value)?,
            "pcrz_warn_s" => self.pcrz_warn_s = num(key, value)?,
            "emergency_floor_m" => self.emergency_floor_m = num(key, value)?,
            "moi_radius_m" => self.moi_radius_m = num(key, value)?,
            "staleness_limit_s" => self.staleness_limit_s = num(key, value)?,
            "ec_error_m" => self.ec_error_m = num(key, value)?,
            "dop_hor" => self.dop_hor = num(key, value)?,
            "dop_ver" => self.dop_ver = num(key, value)?,
            "process_noise_mode" => {
                self.process_noise_mode = match value.trim() {
                    "paper" => ProcessNoiseMode::Paper,
                    "tuned" => ProcessNoiseMode::Tuned,
                    other => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            reason: format!("{other:?} is not \"paper\" or \"tuned\""),
                        })
                    }
                }
            }
            "telemetry_alpha" => self.telemetry_alpha = num(key, value)?,
            "prediction_horizon_s" => self.prediction_horizon_s = num(key, value)?,
            "prediction_dt_s" => self.prediction_dt_s = num(key, value)?,
            "history_capacity" => {
                self.history_capacity =
                    value
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| ConfigError::InvalidValue {
                            key: key.into(),
                            reason: format!("{value:?} is not a count"),
                        })?
            }
            "predictive_engage_s" => self.predictive_engage_s = num(key, value)?,
            "feed_latency_s" => self.feed_latency_s = num(key, value)?,
            "actuation_latency_s" => self.actuation_latency_s = num(key, value)?,
            "accel_limit_mps2" => self.accel_limit_mps2 = num(key, value)?,
            "noise_sigma_m" => self.noise_sigma_m = num(key, value)?,
            "ca_enabled" => {
                self.ca_enabled = match value.trim() {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    other => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            reason: format!("{other:?} is not a boolean"),
                        })
                    }
                }
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Stable key/value listing for the trace header.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mode = match self.process_noise_mode {
            ProcessNoiseMode::Paper => "paper",
            ProcessNoiseMode::Tuned => "tuned",
        };
        vec![
            ("pctd_s".into(), self.pctd_s.to_string()),
            ("ictd_s".into(), self.ictd_s.to_string()),
            ("pcrz_warn_s".into(), self.pcrz_warn_s.to_string()),
            (
                "emergency_floor_m".into(),
                self.emergency_floor_m.to_string(),
            ),
            ("moi_radius_m".into(), self.moi_radius_m.to_string()),
            (
                "staleness_limit_s".into(),
                self.staleness_limit_s.to_string(),
            ),
            ("ec_error_m".into(), self.ec_error_m.to_string()),
            ("dop_hor".into(), self.dop_hor.to_string()),
            ("dop_ver".into(), self.dop_ver.to_string()),
            ("process_noise_mode".into(), mode.into()),
            ("telemetry_alpha".into(), self.telemetry_alpha.to_string()),
            (
                "prediction_horizon_s".into(),
                self.prediction_horizon_s.to_string(),
            ),
            ("prediction_dt_s".into(), self.prediction_dt_s.to_string()),
            ("history_capacity".into(), self.history_capacity.to_string()),
            (
                "predictive_engage_s".into(),
                self.predictive_engage_s.to_string(),
            ),
            ("feed_latency_s".into(), self.feed_latency_s.to_string()),
            (
                "actuation_latency_s".into(),
                self.actuation_latency_s.to_string(),
            ),
            ("accel_limit_mps2".into(), self.accel_limit_mps2.to_string()),
            ("noise_sigma_m".into(), self.noise_sigma_m.to_string()),
            ("ca_enabled".into(), self.ca_enabled.to_string()),
        ]
    }
}
