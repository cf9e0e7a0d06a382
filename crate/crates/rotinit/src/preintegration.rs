//! Gyroscope-only rotation preintegration.
//!
//! Composes raw angular-rate samples between two keyframes into a single
//! relative rotation `γ̂`, together with its Jacobian w.r.t. the gyroscope
//! bias and the accumulated white-noise covariance. [`to_camera_frame`]
//! conjugates the result into the camera frame and adds the Jacobian w.r.t.
//! the camera-IMU extrinsic orientation, which is what couples the extrinsic
//! into the epipolar constraints.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::manifold::{self, Rotation};

#[derive(Debug, Error)]
pub enum PreintegrationError {
    #[error("cannot integrate an empty gyro stream")]
    EmptyStream,
    #[error("non-monotone timestamps at sample {index}: {t_prev} -> {t_next}")]
    NonMonotone {
        index: usize,
        t_prev: f64,
        t_next: f64,
    },
    #[error("invalid noise model: {0}")]
    InvalidNoise(&'static str),
}

/// One gyroscope measurement: angular rate in the IMU frame, rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GyroSample {
    /// Seconds; strictly increasing within a stream.
    pub t: f64,
    pub omega: Vector3<f64>,
}

/// Continuous-time gyro noise densities plus the nominal sample interval.
#[derive(Clone, Copy, Debug)]
pub struct ImuNoiseModel {
    /// White-noise density, rad/s/√Hz.
    pub sigma_g: f64,
    /// Bias random-walk density, rad/s²/√Hz.
    pub sigma_bg: f64,
    /// Nominal interval between samples, seconds.
    pub dt: f64,
}

impl ImuNoiseModel {
    pub fn new(sigma_g: f64, sigma_bg: f64, dt: f64) -> Result<Self, PreintegrationError> {
        if sigma_g.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(PreintegrationError::InvalidNoise("sigma_g must be > 0"));
        }
        if sigma_bg.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(PreintegrationError::InvalidNoise("sigma_bg must be > 0"));
        }
        if dt.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(PreintegrationError::InvalidNoise("dt must be > 0"));
        }
        Ok(Self {
            sigma_g,
            sigma_bg,
            dt,
        })
    }

    /// EuRoC-grade MEMS gyro at 200 Hz.
    pub fn euroc_defaults() -> Self {
        Self {
            sigma_g: 1.6968e-4,
            sigma_bg: 1.9393e-5,
            dt: 1.0 / 200.0,
        }
    }
}

/// Preintegrated relative rotation in the IMU frame.
#[derive(Clone, Debug)]
pub struct PreintegratedRotation {
    /// γ̂: rotation from frame j back to frame i.
    pub delta: Rotation,
    /// ∂γ/∂b_g (right-tangent convention: γ(b̂+δ) ≈ γ̂ Exp(J δ)).
    pub d_bias: Matrix3<f64>,
    /// Accumulated white-noise covariance Σ_γ, rad².
    pub covariance: Matrix3<f64>,
    /// Span covered by the integration, seconds.
    pub t_start: f64,
    pub t_end: f64,
    /// Bias estimate the samples were corrected with.
    pub bias: Vector3<f64>,
}

/// Integrates a gyro stream at a fixed bias estimate.
///
/// Zero-order hold: sample k applies over `[t_k, t_{k+1})`; the final sample
/// covers the nominal interval from the noise model. Covariance accumulates
/// white noise only — the bias is held constant over a window, and its random
/// walk is accounted for between windows by the refiner's prior inflation.
pub fn integrate(
    samples: &[GyroSample],
    bias: Vector3<f64>,
    noise: &ImuNoiseModel,
) -> Result<PreintegratedRotation, PreintegrationError> {
    if samples.is_empty() {
        return Err(PreintegrationError::EmptyStream);
    }
    let mut delta = Rotation::identity();
    let mut d_bias = Matrix3::zeros();
    let mut covariance = Matrix3::zeros();
    let noise_var = noise.sigma_g * noise.sigma_g;
    for (k, sample) in samples.iter().enumerate() {
        let dt = if k + 1 < samples.len() {
            let dt = samples[k + 1].t - sample.t;
            if dt <= 0.0 {
                return Err(PreintegrationError::NonMonotone {
                    index: k + 1,
                    t_prev: sample.t,
                    t_next: samples[k + 1].t,
                });
            }
            dt
        } else {
            noise.dt
        };
        let phi = (sample.omega - bias) * dt;
        let incr = manifold::exp_so3(&phi);
        let jr = manifold::right_jacobian(&phi);
        let incr_t = incr.matrix().transpose();
        d_bias = incr_t * d_bias - jr * dt;
        covariance = incr_t * covariance * incr.matrix() + jr * (noise_var * dt) * jr.transpose();
        delta = delta * incr;
    }
    Ok(PreintegratedRotation {
        delta,
        d_bias,
        covariance,
        t_start: samples[0].t,
        t_end: samples[samples.len() - 1].t + noise.dt,
        bias,
    })
}

/// Preintegrated rotation conjugated into the camera frame, with Jacobians
/// w.r.t. both the gyroscope bias and the extrinsic orientation.
#[derive(Clone, Debug)]
pub struct CameraPreintegration {
    /// γ̂ᶜ = R_CI γ̂ᴵ R_CIᵀ.
    pub delta: Rotation,
    /// ∂γᶜ/∂b_g = R_CI ∂γᴵ/∂b_g.
    pub d_bias: Matrix3<f64>,
    /// ∂γᶜ/∂θ_CI for the right perturbation R_CI ← R_CI Exp(δθ):
    /// R_CI (γ̂ᴵᵀ − I). Zero whenever γ̂ᴵ = I, which is what makes the
    /// extrinsic unobservable without rotational excitation.
    pub d_extrinsic: Matrix3<f64>,
    /// The IMU-frame term this was derived from.
    pub source: PreintegratedRotation,
    /// Extrinsic estimate used for the conjugation.
    pub extrinsic: Rotation,
}

/// Expresses a preintegrated rotation in the camera frame.
pub fn to_camera_frame(p: &PreintegratedRotation, r_ci: &Rotation) -> CameraPreintegration {
    let r = r_ci.matrix();
    let delta = Rotation::from_matrix_unchecked(r * p.delta.matrix() * r.transpose());
    let d_bias = r * p.d_bias;
    let d_extrinsic = r * (p.delta.matrix().transpose() - Matrix3::identity());
    CameraPreintegration {
        delta,
        d_bias,
        d_extrinsic,
        source: p.clone(),
        extrinsic: *r_ci,
    }
}

impl CameraPreintegration {
    /// First-order corrected rotation: γ̂ᶜ Exp(J_b δb + J_θ δθ).
    ///
    /// Valid in the small-correction regime; the solver reintegrates once the
    /// accumulated bias update leaves it.
    pub fn apply_correction(
        &self,
        delta_bias: &Vector3<f64>,
        delta_theta: &Vector3<f64>,
    ) -> Rotation {
        manifold::boxplus(
            &self.delta,
            &(self.d_bias * delta_bias + self.d_extrinsic * delta_theta),
        )
    }
}
