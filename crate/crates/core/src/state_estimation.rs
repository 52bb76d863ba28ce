//! Discrete Kalman filtering of per-flight geodetic positions, plus
//! telemetry synchronisation for the host drone.
//!
//! Filtering runs in a local east/north/up tangent frame in metres anchored
//! at the first observation, so the measurement-error terms (EC device
//! error times dilution of precision) share units with the state. With the
//! default matrices (identity observation and transition, zero process
//! noise) the filter reduces to an exact running average of the
//! observations, which the tests pin against a closed-form oracle; the
//! `Tuned` noise mode adds a small process-noise floor so the filter keeps
//! tracking moving targets instead of freezing.

use crate::geodesy::{from_enu, ground_distance, to_enu, GeoPoint};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Observations farther than this from the ENU origin are outside the
/// tangent-plane validity range.
pub const TANGENT_RANGE_M: f64 = 100_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("observation matrix is singular")]
    SingularObservationMatrix,
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("observation {0:.0} m from the filter origin exceeds the tangent-plane range")]
    TangentPlaneRange(f64),
    #[error("noise parameters must be positive")]
    NonPositiveNoise,
}

/// Measurement-noise inputs: EC device error scaled by horizontal and
/// vertical dilution of precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub ec_error_m: f64,
    pub dop_hor: f64,
    pub dop_ver: f64,
}

impl NoiseConfig {
    pub fn validated(self) -> Result<Self, EstimationError> {
        if self.ec_error_m > 0.0 && self.dop_hor > 0.0 && self.dop_ver > 0.0 {
            Ok(self)
        } else {
            Err(EstimationError::NonPositiveNoise)
        }
    }

    pub fn horizontal_error_m(&self) -> f64 {
        self.ec_error_m * self.dop_hor
    }

    pub fn vertical_error_m(&self) -> f64 {
        self.ec_error_m * self.dop_ver
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            ec_error_m: 10.0,
            dop_hor: 1.5,
            dop_ver: 2.0,
        }
    }
}

/// Process-noise mode: the exact defaults (zero process noise, a pure
/// averager) or a tuned floor for moving targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ProcessNoiseMode {
    Paper,
    #[default]
    Tuned,
}

impl ProcessNoiseMode {
    fn matrix(self) -> Matrix3<f64> {
        match self {
            ProcessNoiseMode::Paper => Matrix3::zeros(),
            ProcessNoiseMode::Tuned => Matrix3::from_diagonal(&Vector3::new(0.5, 0.5, 0.25)),
        }
    }
}

/// Kalman filter state for one flight.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    /// State vector estimate, local ENU metres.
    pub sve: Vector3<f64>,
    /// Covariance of the state vector estimate.
    pub cov: Matrix3<f64>,
    pub observation_mat: Matrix3<f64>,
    pub st_mat: Matrix3<f64>,
    pub perror_mat: Matrix3<f64>,
    pub merror_cov: Matrix3<f64>,
    pub input_mat: Matrix3<f64>,
    pub input_vec: Vector3<f64>,
    /// Tangent-frame anchor: the first observation.
    pub enu_origin: GeoPoint,
}

impl KalmanState {
    /// Current estimate as a geodetic point.
    pub fn estimate(&self) -> GeoPoint {
        from_enu(&self.enu_origin, [self.sve.x, self.sve.y, self.sve.z])
    }

    /// Covariance symmetry and positive semi-definiteness, to tolerance.
    pub fn cov_is_valid(&self, tol: f64) -> bool {
        let sym = (self.cov - self.cov.transpose()).norm() <= tol * self.cov.norm().max(1.0);
        let eig = self.cov.symmetric_eigenvalues();
        sym && eig.iter().all(|l| *l >= -tol)
    }
}

/// Initialise the filter from the first observation.
pub fn dkf_init(
    first_obs: &GeoPoint,
    noise: &NoiseConfig,
    mode: ProcessNoiseMode,
) -> Result<KalmanState, EstimationError> {
    dkf_init_with_observation(first_obs, noise, mode, Matrix3::identity())
}

/// As [`dkf_init`] with a caller-supplied observation matrix.
pub fn dkf_init_with_observation(
    first_obs: &GeoPoint,
    noise: &NoiseConfig,
    mode: ProcessNoiseMode,
    observation_mat: Matrix3<f64>,
) -> Result<KalmanState, EstimationError> {
    let noise = noise.validated()?;
    let obs_inv = observation_mat
        .try_inverse()
        .ok_or(EstimationError::SingularObservationMatrix)?;
    let hor = noise.horizontal_error_m();
    let ver = noise.vertical_error_m();
    let merror_cov = Matrix3::from_diagonal(&Vector3::new(hor, hor, ver));
    // first observation anchors the frame, so its ENU vector is zero
    let sve = obs_inv * Vector3::zeros();
    let cov = obs_inv * merror_cov * obs_inv.transpose();
    Ok(KalmanState {
        sve,
        cov,
        observation_mat,
        st_mat: Matrix3::identity(),
        perror_mat: mode.matrix(),
        merror_cov,
        input_mat: Matrix3::zeros(),
        input_vec: Vector3::zeros(),
        enu_origin: *first_obs,
    })
}

/// Time update: project the state and covariance forward one step.
pub fn dkf_predict(state: &KalmanState) -> KalmanState {
    let mut next = state.clone();
    next.sve = state.st_mat * state.sve + state.input_mat * state.input_vec;
    next.cov = state.st_mat * state.cov * state.st_mat.transpose() + state.perror_mat;
    next
}

/// Measurement update: fuse a new observation into the state.
pub fn dkf_update(state: &KalmanState, obs: &GeoPoint) -> Result<KalmanState, EstimationError> {
    let range = ground_distance(&state.enu_origin, obs);
    if range > TANGENT_RANGE_M {
        return Err(EstimationError::TangentPlaneRange(range));
    }
    let z = Vector3::from(to_enu(&state.enu_origin, obs));
    let h = state.observation_mat;
    let innovation_cov = h * state.cov * h.transpose() + state.merror_cov;
    let inv = innovation_cov
        .try_inverse()
        .ok_or(EstimationError::SingularInnovation)?;
    let gain = state.cov * h.transpose() * inv;

    let mut next = state.clone();
    next.sve = state.sve + gain * (z - h * state.sve);
    let cov = state.cov - gain * h * state.cov;
    // keep the stored covariance exactly symmetric
    next.cov = (cov + cov.transpose()) * 0.5;
    Ok(next)
}

/// Exponentially smoothed offset between the EC-derived estimate and the
/// host drone's own telemetry; the corrected position is estimate + offset.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetrySync {
    pub alpha: f64,
    offset: Vector3<f64>,
}

impl TelemetrySync {
    /// `alpha` in (0, 1]: 1 trusts telemetry immediately.
    pub fn new(alpha: f64) -> Self {
        TelemetrySync {
            alpha: alpha.clamp(f64::MIN_POSITIVE, 1.0),
            offset: Vector3::zeros(),
        }
    }

    pub fn offset_enu(&self) -> [f64; 3] {
        [self.offset.x, self.offset.y, self.offset.z]
    }

    /// Fold one telemetry fix into the running offset and return the
    /// corrected position.
    pub fn correct(&mut self, estimate: &GeoPoint, telemetry: &GeoPoint) -> GeoPoint {
        let delta = Vector3::from(to_enu(estimate, telemetry));
        self.offset = self.alpha * delta + (1.0 - self.alpha) * self.offset;
        from_enu(estimate, [self.offset.x, self.offset.y, self.offset.z])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::destination_point;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn origin() -> GeoPoint {
        GeoPoint::new(53.5, -2.5, 300.0).unwrap()
    }

    #[test]
    fn init_noise_arithmetic() {
        let noise = NoiseConfig {
            ec_error_m: 10.0,
            dop_hor: 1.5,
            dop_ver: 2.0,
        };
        assert_eq!(noise.horizontal_error_m(), 15.0);
        assert_eq!(noise.vertical_error_m(), 20.0);
        let s = dkf_init(&origin(), &noise, ProcessNoiseMode::Paper).unwrap();
        // identity observation matrix: covariance equals the measurement error
        assert_eq!(
            s.cov,
            Matrix3::from_diagonal(&Vector3::new(15.0, 15.0, 20.0))
        );
        assert_eq!(s.sve, Vector3::zeros());
        assert_eq!(
            s.merror_cov,
            Matrix3::from_diagonal(&Vector3::new(15.0, 15.0, 20.0))
        );
    }

    #[test]
    fn init_rejects_singular_observation() {
        let err = dkf_init_with_observation(
            &origin(),
            &NoiseConfig::default(),
            ProcessNoiseMode::Paper,
            Matrix3::zeros(),
        )
        .unwrap_err();
        assert_eq!(err, EstimationError::SingularObservationMatrix);
    }

    #[test]
    fn predict_with_defaults_is_identity() {
        let s = dkf_init(&origin(), &NoiseConfig::default(), ProcessNoiseMode::Paper).unwrap();
        let p = dkf_predict(&s);
        assert_eq!(p.sve, s.sve);
        assert_eq!(p.cov, s.cov);
    }

    #[test]
    fn predict_adds_process_noise() {
        let mut s = dkf_init(&origin(), &NoiseConfig::default(), ProcessNoiseMode::Paper).unwrap();
        s.perror_mat = Matrix3::identity();
        let p = dkf_predict(&s);
        assert_eq!(p.cov, s.cov + Matrix3::identity());
    }

    #[test]
    fn predict_scales_covariance_through_transition() {
        // hand matrix algebra: st = 2I, cov = I -> st cov st^T = 4I
        let mut s = dkf_init(&origin(), &NoiseConfig::default(), ProcessNoiseMode::Paper).unwrap();
        s.st_mat = Matrix3::identity() * 2.0;
        s.cov = Matrix3::identity();
        s.perror_mat = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0));
        let p = dkf_predict(&s);
        let expect = Matrix3::identity() * 4.0 + s.perror_mat;
        assert_eq!(p.cov, expect);
    }

    #[test]
    fn update_with_zero_innovation_shrinks_cov() {
        let o = origin();
        let s = dkf_init(&o, &NoiseConfig::default(), ProcessNoiseMode::Paper).unwrap();
        let u = dkf_update(&s, &o).unwrap();
        assert_eq!(u.sve, s.sve); // observation equals the estimate
        assert!(u.cov.trace() < s.cov.trace());
    }

    #[test]
    fn equal_variance_fusion_halves_covariance() {
        // scalar analogue: cov = merror -> gain 0.5, posterior cov halved
        let o = origin();
        let s = dkf_init(&o, &NoiseConfig::default(), ProcessNoiseMode::Paper).unwrap();
        let u = dkf_update(&s, &o).unwrap();
        assert!((u.cov[(0, 0)] - s.cov[(0, 0)] / 2.0).abs() < 1e-12);
        assert!((u.cov[(2, 2)] - s.cov[(2, 2)] / 2.0).abs() < 1e-12);
    }

    #[test]
    fn update_beyond_tangent_range_errors() {
        let o = origin();
        let s = dkf_init(&o, &NoiseConfig::default(), ProcessNoiseMode::Paper).unwrap();
        let far = destination_point(&o, 90.0, 150_000.0, 300.0);
        assert!(matches!(
            dkf_update(&s, &far),
            Err(EstimationError::TangentPlaneRange(_))
        ));
    }

    #[test]
    fn paper_defaults_track_running_mean() {
        // with identity transition and zero process noise, the estimate is
        // the exact mean of all observations seen so far
        let o = origin();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut state = dkf_init(&o, &NoiseConfig::default(), ProcessNoiseMode::Paper).unwrap();
        let mut sum = Vector3::zeros(); // first obs is the origin, ENU zero
        for k in 1..=100usize {
            let obs_enu = Vector3::new(
                rng.gen_range(-200.0..200.0),
                rng.gen_range(-200.0..200.0),
                rng.gen_range(-20.0..20.0),
            );
            let obs = from_enu(&o, [obs_enu.x, obs_enu.y, obs_enu.z]);
            state = dkf_predict(&state);
            state = dkf_update(&state, &obs).unwrap();
            sum += Vector3::from(to_enu(&o, &obs));
            let mean = sum / (k as f64 + 1.0);
            let err = (state.sve - mean).norm();
            assert!(
                err <= 1e-9 * mean.norm().max(1.0),
                "step {k}: estimate {:?} vs mean {:?}",
                state.sve,
                mean
            );
            assert!(state.cov_is_valid(1e-9));
        }
    }

    #[test]
    fn smoothing_beats_raw_fixes_on_stationary_target() {
        // Monte-Carlo: sigma 10 m noise, 20 updates, smoothed error well
        // under half the raw RMS; checked across seeds in the acceptance
        // suite, spot-checked here
        let truth = origin();
        let mut pass = 0;
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draw = |rng: &mut ChaCha8Rng| {
                // Box-Muller
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos() * 10.0
            };
            let noisy = |rng: &mut ChaCha8Rng| {
                let e = [draw(rng), draw(rng), draw(rng)];
                from_enu(&truth, e)
            };
            let first = noisy(&mut rng);
            let mut state =
                dkf_init(&first, &NoiseConfig::default(), ProcessNoiseMode::Paper).unwrap();
            let mut raw_sq = {
                let e = to_enu(&truth, &first);
                e[0] * e[0] + e[1] * e[1] + e[2] * e[2]
            };
            for _ in 0..20 {
                let obs = noisy(&mut rng);
                let e = to_enu(&truth, &obs);
                raw_sq += e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
                state = dkf_predict(&state);
                state = dkf_update(&state, &obs).unwrap();
            }
            let raw_rms = (raw_sq / 21.0).sqrt();
            let est = state.estimate();
            let e = to_enu(&truth, &est);
            let err = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
            if err < raw_rms / 2.0 {
                pass += 1;
            }
        }
        assert!(pass >= 48, "only {pass}/50 seeds passed");
    }

    #[test]
    fn telemetry_sync_trivial_cases() {
        let o = origin();
        let mut sync = TelemetrySync::new(0.5);
        let corrected = sync.correct(&o, &o);
        assert_eq!(sync.offset_enu(), [0.0, 0.0, 0.0]);
        assert!(ground_distance(&corrected, &o) < 1e-9);

        let mut all_in = TelemetrySync::new(1.0);
        let tele = destination_point(&o, 90.0, 25.0, 300.0);
        let c = all_in.correct(&o, &tele);
        assert!(ground_distance(&c, &tele) < 1e-6);
    }

    #[test]
    fn telemetry_sync_converges_on_constant_bias() {
        // geometric series: offset -> 5 m east, error 5 * 0.5^n
        let o = origin();
        let biased = destination_point(&o, 90.0, 5.0, 300.0);
        let mut sync = TelemetrySync::new(0.5);
        let mut last = o;
        for _ in 0..10 {
            last = sync.correct(&o, &biased);
        }
        let gap = ground_distance(&last, &biased);
        assert!(gap < 0.01, "residual {gap} m");
    }

    proptest! {
        // covariance stays symmetric PSD and the filter is a deterministic
        // function of its observation sequence
        #[test]
        fn cov_psd_and_deterministic(seed in 0u64..500, steps in 1usize..30) {
            let o = origin();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut obs = Vec::new();
            for _ in 0..steps {
                obs.push(from_enu(&o, [
                    rng.gen_range(-500.0..500.0),
                    rng.gen_range(-500.0..500.0),
                    rng.gen_range(-50.0..50.0),
                ]));
            }
            let run = |mode: ProcessNoiseMode| {
                let mut s = dkf_init(&o, &NoiseConfig::default(), mode).unwrap();
                for z in &obs {
                    s = dkf_predict(&s);
                    s = dkf_update(&s, z).unwrap();
                    prop_assert!(s.cov_is_valid(1e-9));
                }
                Ok(s)
            };
            let a = run(ProcessNoiseMode::Tuned)?;
            let b = run(ProcessNoiseMode::Tuned)?;
            prop_assert_eq!(a.sve, b.sve); // bit-identical
            prop_assert_eq!(a.cov, b.cov);
            run(ProcessNoiseMode::Paper)?;
        }
    }
}
