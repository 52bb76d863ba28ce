//! Flag-level overrides for every engine config key. Flags win over the
//! `DACM_CONFIG` defaults file, which wins over built-ins; every override
//! that was actually applied is echoed into the trace header.

use dacm_core::config::ConfigError;
use dacm_core::EngineConfig;

#[derive(clap::Args, Debug, Default)]
pub struct ConfigOverrides {
    /// Probable-collision travel horizon, seconds.
    #[arg(long)]
    pub pctd_s: Option<f64>,
    /// Imminent-collision travel horizon, seconds.
    #[arg(long)]
    pub ictd_s: Option<f64>,
    /// Pilot early-warning lead, seconds.
    #[arg(long)]
    pub pcrz_warn_s: Option<f64>,
    /// Emergency reaction radius floor, metres.
    #[arg(long)]
    pub emergency_floor_m: Option<f64>,
    /// Map-of-interest radius, metres.
    #[arg(long)]
    pub moi_radius_m: Option<f64>,
    /// Track staleness cutoff, seconds.
    #[arg(long)]
    pub staleness_limit_s: Option<f64>,
    /// EC device position error, metres.
    #[arg(long)]
    pub ec_error_m: Option<f64>,
    #[arg(long)]
    pub dop_hor: Option<f64>,
    #[arg(long)]
    pub dop_ver: Option<f64>,
    /// Estimator process-noise mode: paper | tuned.
    #[arg(long)]
    pub process_noise_mode: Option<String>,
    /// Telemetry synchronisation smoothing factor.
    #[arg(long)]
    pub telemetry_alpha: Option<f64>,
    /// Waypoint projection horizon, seconds.
    #[arg(long)]
    pub prediction_horizon_s: Option<f64>,
    /// Waypoint projection step, seconds.
    #[arg(long)]
    pub prediction_dt_s: Option<f64>,
    /// Waypoint ring capacity.
    #[arg(long)]
    pub history_capacity: Option<usize>,
    /// Predictive avoidance look-ahead, seconds (0 = purely reactive).
    #[arg(long)]
    pub predictive_engage_s: Option<f64>,
    /// Injected EC transport delay, seconds.
    #[arg(long)]
    pub feed_latency_s: Option<f64>,
    /// Command actuation delay, seconds.
    #[arg(long)]
    pub actuation_latency_s: Option<f64>,
    /// Longitudinal acceleration limit, m/s^2.
    #[arg(long)]
    pub accel_limit_mps2: Option<f64>,
    /// Gaussian observation noise sigma, metres.
    #[arg(long)]
    pub noise_sigma_m: Option<f64>,
    /// Master avoidance switch: true | false.
    #[arg(long)]
    pub ca_enabled: Option<String>,
}

impl ConfigOverrides {
    /// Apply set flags onto a config, returning the applied pairs.
    pub fn apply(&self, cfg: &mut EngineConfig) -> Result<Vec<(String, String)>, ConfigError> {
        let mut applied = Vec::new();
        let set_f64 = |cfg: &mut EngineConfig,
                       key: &str,
                       value: &Option<f64>,
                       applied: &mut Vec<(String, String)>|
         -> Result<(), ConfigError> {
            if let Some(v) = value {
                cfg.set(key, &v.to_string())?;
                applied.push((key.to_string(), v.to_string()));
            }
            Ok(())
        };
        set_f64(cfg, "pctd_s", &self.pctd_s, &mut applied)?;
        set_f64(cfg, "ictd_s", &self.ictd_s, &mut applied)?;
        set_f64(cfg, "pcrz_warn_s", &self.pcrz_warn_s, &mut applied)?;
        set_f64(
            cfg,
            "emergency_floor_m",
            &self.emergency_floor_m,
            &mut applied,
        )?;
        set_f64(cfg, "moi_radius_m", &self.moi_radius_m, &mut applied)?;
        set_f64(
            cfg,
            "staleness_limit_s",
            &self.staleness_limit_s,
            &mut applied,
        )?;
        set_f64(cfg, "ec_error_m", &self.ec_error_m, &mut applied)?;
        set_f64(cfg, "dop_hor", &self.dop_hor, &mut applied)?;
        set_f64(cfg, "dop_ver", &self.dop_ver, &mut applied)?;
        set_f64(cfg, "telemetry_alpha", &self.telemetry_alpha, &mut applied)?;
        set_f64(
            cfg,
            "prediction_horizon_s",
            &self.prediction_horizon_s,
            &mut applied,
        )?;
        set_f64(cfg, "prediction_dt_s", &self.prediction_dt_s, &mut applied)?;
        set_f64(
            cfg,
            "predictive_engage_s",
            &self.predictive_engage_s,
            &mut applied,
        )?;
        set_f64(cfg, "feed_latency_s", &self.feed_latency_s, &mut applied)?;
        set_f64(
            cfg,
            "actuation_latency_s",
            &self.actuation_latency_s,
            &mut applied,
        )?;
        set_f64(
            cfg,
            "accel_limit_mps2",
            &self.accel_limit_mps2,
            &mut applied,
        )?;
        set_f64(cfg, "noise_sigma_m", &self.noise_sigma_m, &mut applied)?;
        if let Some(v) = &self.process_noise_mode {
            cfg.set("process_noise_mode", v)?;
            applied.push(("process_noise_mode".into(), v.clone()));
        }
        if let Some(v) = &self.history_capacity {
            cfg.set("history_capacity", &v.to_string())?;
            applied.push(("history_capacity".into(), v.to_string()));
        }
        if let Some(v) = &self.ca_enabled {
            cfg.set("ca_enabled", v)?;
            applied.push(("ca_enabled".into(), v.clone()));
        }
        Ok(applied)
    }
}
