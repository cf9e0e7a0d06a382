//! Deterministic synthetic sensor world.
//!
//! Generates a smooth 6-DoF trajectory, a point cloud, gyroscope streams,
//! and pixel feature tracks with ground truth. The orientation path is a
//! chain of constant-axis rotation segments whose angle follows a quintic
//! smoothstep, so body rates are analytic, the path is C², and zero-order
//! hold integration of the synthesized rates reproduces the ground-truth
//! orientation to within accumulation roundoff (the axis is constant inside
//! each segment, so the sample product telescopes). The position path uses
//! the same smoothstep family and stays exactly constant during the
//! pure-rotation prefix.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::epipolar::CameraIntrinsics;
use crate::manifold::{self, Rotation};
use crate::preintegration::{GyroSample, ImuNoiseModel};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("frame {frame} at t={t:.2}s sees only {visible} points (minimum {min}); scene and trajectory are mismatched")]
    VisibilityTooLow {
        frame: usize,
        t: f64,
        visible: usize,
        min: usize,
    },
}

/// Scenario description; every run is fully determined by this struct.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Reseeds only the measurement-noise streams (gyro, pixel, bias walk),
    /// keeping the scene and trajectory fixed; `None` derives everything
    /// from `seed`. Monte-Carlo consistency studies need this split.
    pub noise_seed: Option<u64>,
    /// World points on the scanned shell.
    pub n_points: usize,
    /// Total motion time, seconds.
    pub duration: f64,
    /// Leading interval with zero translation, seconds.
    pub pure_rotation_prefix: f64,
    /// Pixel noise standard deviation.
    pub pixel_noise: f64,
    pub imu: ImuNoiseModel,
    /// True gyroscope bias, rad/s.
    pub gyro_bias: Vector3<f64>,
    /// True camera-from-IMU extrinsic rotation.
    pub extrinsic: Rotation,
    /// Deformation applied by consumers to the stored extrinsic before
    /// initialization; recorded as dataset metadata.
    pub extrinsic_offset_deg: f64,
    pub keyframe_rate: f64,
    pub imu_rate: f64,
    /// Scales rotation-segment amplitudes (1 = lively hand-held scan).
    pub excitation: f64,
    /// Peak translation wander after the prefix, metres.
    pub translation_amplitude: f64,
    /// Simulate the bias random walk instead of a constant bias.
    pub bias_random_walk: bool,
    /// Draw per-segment rotation amplitudes from a mixed distribution with
    /// a low-excitation tail (for robustness benchmarks over long runs).
    pub mixed_excitation: bool,
    pub intrinsics: CameraIntrinsics,
    /// Generation fails if any keyframe sees fewer points than this.
    pub min_visible: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            noise_seed: None,
            n_points: 500,
            duration: 50.0,
            pure_rotation_prefix: 25.0,
            pixel_noise: 0.5,
            imu: ImuNoiseModel::euroc_defaults(),
            gyro_bias: Vector3::new(0.02, -0.015, 0.01),
            extrinsic: manifold::exp_so3(&Vector3::new(0.15, -0.1, 0.2)),
            extrinsic_offset_deg: 10.0,
            keyframe_rate: 4.0,
            imu_rate: 200.0,
            excitation: 1.0,
            translation_amplitude: 0.8,
            bias_random_walk: false,
            mixed_excitation: false,
            intrinsics: CameraIntrinsics::euroc_defaults(),
            min_visible: 20,
        }
    }
}

impl ScenarioConfig {
    fn validate(&self) -> Result<(), SimError> {
        if self.pure_rotation_prefix > self.duration {
            return Err(SimError::InvalidConfig(format!(
                "pure-rotation prefix {} exceeds duration {}",
                self.pure_rotation_prefix, self.duration
            )));
        }
        if !(self.keyframe_rate > 0.0 && self.imu_rate > 0.0) {
            return Err(SimError::InvalidConfig("rates must be positive".into()));
        }
        if self.imu_rate < self.keyframe_rate {
            return Err(SimError::InvalidConfig(
                "imu rate below keyframe rate".into(),
            ));
        }
        if self.duration <= 0.0 {
            return Err(SimError::InvalidConfig("duration must be positive".into()));
        }
        if self.pixel_noise < 0.0 {
            return Err(SimError::InvalidConfig("pixel noise must be >= 0".into()));
        }
        Ok(())
    }
}

/// Quintic smoothstep and its derivative: zero velocity and acceleration at
/// both segment ends, which keeps the chained path C².
fn smoothstep(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

fn smoothstep_dot(tau: f64) -> f64 {
    if !(0.0..=1.0).contains(&tau) {
        return 0.0;
    }
    30.0 * tau * tau * (1.0 - tau) * (1.0 - tau)
}

#[derive(Clone, Debug)]
struct RotationSegment {
    t0: f64,
    t1: f64,
    base: Rotation,
    axis: Vector3<f64>,
    angle: f64,
}

#[derive(Clone, Debug)]
struct TranslationSegment {
    t0: f64,
    t1: f64,
    from: Vector3<f64>,
    to: Vector3<f64>,
}

/// IMU pose path: piecewise constant-axis orientation + smoothstep position.
#[derive(Clone, Debug)]
pub struct Trajectory {
    rotations: Vec<RotationSegment>,
    translations: Vec<TranslationSegment>,
    home: Vector3<f64>,
    prefix_end: f64,
}

impl Trajectory {
    /// IMU orientation R_WI at time t.
    pub fn orientation(&self, t: f64) -> Rotation {
        let seg = self.rotation_segment(t);
        let tau = (t - seg.t0) / (seg.t1 - seg.t0);
        manifold::boxplus(&seg.base, &(seg.axis * (seg.angle * smoothstep(tau))))
    }

    /// Instantaneous body angular rate ω_I(t) = axis · θ̇(t), analytic.
    pub fn body_rate(&self, t: f64) -> Vector3<f64> {
        let seg = self.rotation_segment(t);
        let span = seg.t1 - seg.t0;
        let tau = (t - seg.t0) / span;
        seg.axis * (seg.angle * smoothstep_dot(tau) / span)
    }

    /// Exact average body rate over [t0, t1): Log(R(t0)ᵀ R(t1)) / (t1 − t0).
    ///
    /// This is what a gyro sampled under zero-order hold reports if its
    /// integral is to reproduce the path exactly; inside one segment it
    /// reduces to axis · Δθ/Δt in closed form.
    pub fn average_body_rate(&self, t0: f64, t1: f64) -> Vector3<f64> {
        let delta = manifold::boxminus(&self.orientation(t1), &self.orientation(t0));
        delta / (t1 - t0)
    }

    /// IMU position p_WI at time t; exactly `home` during the prefix.
    pub fn position(&self, t: f64) -> Vector3<f64> {
        if t < self.prefix_end || self.translations.is_empty() {
            return self.home;
        }
        match self.translations.iter().find(|s| t < s.t1) {
            None => self.translations.last().unwrap().to,
            Some(seg) => {
                let tau = (t - seg.t0) / (seg.t1 - seg.t0);
                seg.from + (seg.to - seg.from) * smoothstep(tau)
            }
        }
    }

    fn rotation_segment(&self, t: f64) -> &RotationSegment {
        match self.rotations.iter().find(|s| t < s.t1) {
            Some(seg) => seg,
            None => self.rotations.last().expect("trajectory has segments"),
        }
    }
}

/// Everything the estimators are later scored against.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    /// Keyframe timestamps, seconds.
    pub keyframe_times: Vec<f64>,
    /// R_WI at each keyframe.
    pub orientations: Vec<Rotation>,
    /// p_WI at each keyframe.
    pub positions: Vec<Vector3<f64>>,
    /// True gyro bias at each keyframe.
    pub bias: Vec<Vector3<f64>>,
    /// True camera-from-IMU rotation.
    pub extrinsic: Rotation,
}

impl GroundTruth {
    /// True relative camera rotation R_{C_i C_j} between keyframes.
    pub fn relative_camera_rotation(&self, i: usize, j: usize) -> Rotation {
        let r = self.extrinsic;
        let gamma_imu = self.orientations[i].transpose() * self.orientations[j];
        r * gamma_imu * r.transpose()
    }
}

/// Feature observations of one keyframe.
#[derive(Clone, Debug)]
pub struct FrameFeatures {
    pub frame_id: usize,
    pub t: f64,
    /// (feature id, u, v), sorted by feature id.
    pub observations: Vec<(u64, f64, f64)>,
}

/// In-memory dataset: gyro stream + feature tracks + calibration (+ truth).
#[derive(Clone, Debug)]
pub struct Dataset {
    pub imu: Vec<GyroSample>,
    pub frames: Vec<FrameFeatures>,
    pub intrinsics: CameraIntrinsics,
    /// Calibrated (true) extrinsic rotation stored with the dataset.
    pub extrinsic: Rotation,
    pub pixel_noise: f64,
    pub imu_noise: ImuNoiseModel,
    pub extrinsic_offset_deg: f64,
    pub seed: u64,
    pub truth: Option<GroundTruth>,
}

struct SceneRng {
    points: ChaCha8Rng,
    trajectory: ChaCha8Rng,
    gyro: ChaCha8Rng,
    pixel: ChaCha8Rng,
    bias: ChaCha8Rng,
}

impl SceneRng {
    fn new(seed: u64, noise_seed: Option<u64>) -> Self {
        // Distinct stream per noise source so draw order stays stable when a
        // source is disabled.
        let noise = noise_seed.unwrap_or(seed);
        Self {
            points: ChaCha8Rng::seed_from_u64(
                seed.wrapping_mul(6364136223846793005).wrapping_add(1),
            ),
            trajectory: ChaCha8Rng::seed_from_u64(
                seed.wrapping_mul(6364136223846793005).wrapping_add(2),
            ),
            gyro: ChaCha8Rng::seed_from_u64(
                noise.wrapping_mul(6364136223846793005).wrapping_add(3),
            ),
            pixel: ChaCha8Rng::seed_from_u64(
                noise.wrapping_mul(6364136223846793005).wrapping_add(4),
            ),
            bias: ChaCha8Rng::seed_from_u64(
                noise.wrapping_mul(6364136223846793005).wrapping_add(5),
            ),
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Scan cone half-angle the camera is steered to stay inside (radians).
const VIEW_CONE: f64 = 0.9;
/// Rotation waypoint spacing, seconds. Shorter than a sliding window so a
/// window spans several rotation axes (a single axis leaves the extrinsic
/// unobservable along it).
const ROTATION_SEGMENT: f64 = 1.0;
/// Translation waypoint spacing, seconds.
const TRANSLATION_SEGMENT: f64 = 2.5;

fn build_trajectory(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Trajectory {
    // Rotation segment boundaries snap to the IMU sample grid so the
    // zero-order-hold quadrature below telescopes exactly per segment.
    let samples_per_seg = ((ROTATION_SEGMENT * config.imu_rate).round() as usize).max(2);
    let seg_len = samples_per_seg as f64 / config.imu_rate;
    let n_segs = (config.duration / seg_len).ceil() as usize;

    // Start with the camera's optical axis at the cone centre (+X world).
    // Build R_WC0 looking down +X with +Z up, then R_WI = R_WC R_CI; steer
    // segments so the view stays in the cone.
    let r_ic = config.extrinsic.transpose();
    let cone_center = Vector3::x();
    let r_wc0 = Rotation::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[
        -Vector3::y(),
        -Vector3::z(),
        Vector3::x(),
    ]));
    let base = r_wc0 * config.extrinsic;

    let mut rotations = Vec::with_capacity(n_segs);
    let mut current = base;
    for s in 0..n_segs {
        let t0 = s as f64 * seg_len;
        let t1 = t0 + seg_len;
        let mix = if config.mixed_excitation {
            let u = rng.random::<f64>();
            if u < 0.08 {
                0.05 + 0.05 * rng.random::<f64>()
            } else {
                0.6 + 0.7 * rng.random::<f64>()
            }
        } else {
            1.0
        };
        let angle = config.excitation * mix * (0.14 + 0.20 * rng.random::<f64>());
        // Try seeded axes first; steer back to the cone centre if the view
        // would drift out.
        let mut chosen: Option<(Vector3<f64>, f64)> = None;
        for _ in 0..12 {
            let axis = random_unit(rng);
            let end = manifold::boxplus(&current, &(axis * angle));
            let look = (end * r_ic) * Vector3::z();
            if look.dot(&cone_center).clamp(-1.0, 1.0).acos() < VIEW_CONE {
                chosen = Some((axis, angle));
                break;
            }
        }
        let (axis, angle) = chosen.unwrap_or_else(|| {
            let look = (current * r_ic) * Vector3::z();
            let world_axis = look.cross(&cone_center);
            let back = look.dot(&cone_center).clamp(-1.0, 1.0).acos();
            if world_axis.norm() < 1e-9 {
                (Vector3::x(), 0.0)
            } else {
                // Constant-axis segment rotating the view back toward centre:
                // express the world steering axis in the body frame.
                let body_axis = current.transpose() * world_axis.normalize();
                (body_axis, back.min(angle))
            }
        });
        rotations.push(RotationSegment {
            t0,
            t1,
            base: current,
            axis,
            angle,
        });
        current = manifold::boxplus(&current, &(axis * angle));
    }

    let home = Vector3::new(-2.0, 0.0, 0.0);
    let mut translations = Vec::new();
    if config.pure_rotation_prefix < config.duration && config.translation_amplitude > 0.0 {
        let mut t0 = config.pure_rotation_prefix;
        let mut from = home;
        while t0 < config.duration {
            let t1 = (t0 + TRANSLATION_SEGMENT).min(config.duration + TRANSLATION_SEGMENT);
            let to = home
                + Vector3::new(
                    gaussian(rng) * 0.4,
                    gaussian(rng) * 0.7,
                    gaussian(rng) * 0.5,
                ) * config.translation_amplitude;
            translations.push(TranslationSegment { t0, t1, from, to });
            from = to;
            t0 = t1;
        }
    }

    Trajectory {
        rotations,
        translations,
        home,
        prefix_end: config.pure_rotation_prefix,
    }
}

fn sample_points(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    // Shell of points in the sector the scan sweeps: directions within
    // ~VIEW_CONE + camera FOV margin of +X, radii 4–7 m around the origin.
    let mut points = Vec::with_capacity(config.n_points);
    while points.len() < config.n_points {
        let dir = random_unit(rng);
        if dir.x < (VIEW_CONE + 0.8).cos() {
            continue;
        }
        let radius = 4.0 + 3.0 * rng.random::<f64>();
        points.push(dir * radius);
    }
    points
}

/// Generates a dataset. Deterministic: identical configs (including seed)
/// produce identical datasets.
pub fn generate(config: &ScenarioConfig) -> Result<Dataset, SimError> {
    config.validate()?;
    let mut rng = SceneRng::new(config.seed, config.noise_seed);
    let trajectory = build_trajectory(config, &mut rng.trajectory);
    let points = sample_points(config, &mut rng.points);

    // Bias path at IMU rate.
    let imu_dt = 1.0 / config.imu_rate;
    let n_imu = (config.duration * config.imu_rate).round() as usize;
    let mut bias_path = Vec::with_capacity(n_imu);
    let mut bias = config.gyro_bias;
    let walk_std = config.imu.sigma_bg * imu_dt.sqrt();
    for _ in 0..n_imu {
        bias_path.push(bias);
        if config.bias_random_walk {
            bias += Vector3::new(
                gaussian(&mut rng.bias),
                gaussian(&mut rng.bias),
                gaussian(&mut rng.bias),
            ) * walk_std;
        }
    }

    // Gyro stream: analytic body rate + bias + white noise.
    let noise_std = if config.pixel_noise == 0.0 && !config.bias_random_walk {
        // Noise-free scenarios are exactly noise-free.
        0.0
    } else {
        config.imu.sigma_g / imu_dt.sqrt()
    };
    let mut imu = Vec::with_capacity(n_imu);
    for (k, bias_k) in bias_path.iter().enumerate() {
        let t = k as f64 / config.imu_rate;
        let t_next = (k + 1) as f64 / config.imu_rate;
        let mut omega = trajectory.average_body_rate(t, t_next) + bias_k;
        if noise_std > 0.0 {
            omega += Vector3::new(
                gaussian(&mut rng.gyro),
                gaussian(&mut rng.gyro),
                gaussian(&mut rng.gyro),
            ) * noise_std;
        }
        imu.push(GyroSample { t, omega });
    }

    // Keyframes and feature tracks.
    let n_frames = (config.duration * config.keyframe_rate).round() as usize;
    let imu_per_frame = config.imu_rate / config.keyframe_rate;
    let mut frames = Vec::with_capacity(n_frames);
    let mut keyframe_times = Vec::with_capacity(n_frames);
    let mut orientations = Vec::with_capacity(n_frames);
    let mut positions = Vec::with_capacity(n_frames);
    let mut bias_at_kf = Vec::with_capacity(n_frames);
    for frame_id in 0..n_frames {
        let t = frame_id as f64 / config.keyframe_rate;
        let r_wi = trajectory.orientation(t);
        let p_wi = trajectory.position(t);
        let r_cw = config.extrinsic * r_wi.transpose();
        let mut observations = Vec::new();
        for (feature_id, p_w) in points.iter().enumerate() {
            let p_c = r_cw * (p_w - p_wi);
            if let Some((u, v)) = config.intrinsics.project(&p_c) {
                let (nu, nv) = if config.pixel_noise > 0.0 {
                    (
                        u + gaussian(&mut rng.pixel) * config.pixel_noise,
                        v + gaussian(&mut rng.pixel) * config.pixel_noise,
                    )
                } else {
                    (u, v)
                };
                if config.intrinsics.contains(nu, nv) {
                    observations.push((feature_id as u64, nu, nv));
                }
            }
        }
        if observations.len() < config.min_visible.max(1) {
            return Err(SimError::VisibilityTooLow {
                frame: frame_id,
                t,
                visible: observations.len(),
                min: config.min_visible.max(1),
            });
        }
        let imu_index = ((frame_id as f64 * imu_per_frame).round() as usize).min(n_imu - 1);
        frames.push(FrameFeatures {
            frame_id,
            t,
            observations,
        });
        keyframe_times.push(t);
        orientations.push(r_wi);
        positions.push(p_wi);
        bias_at_kf.push(bias_path[imu_index]);
    }

    Ok(Dataset {
        imu,
        frames,
        intrinsics: config.intrinsics,
        extrinsic: config.extrinsic,
        pixel_noise: config.pixel_noise,
        imu_noise: config.imu,
        extrinsic_offset_deg: config.extrinsic_offset_deg,
        seed: config.seed,
        truth: Some(GroundTruth {
            keyframe_times,
            orientations,
            positions,
            bias: bias_at_kf,
            extrinsic: config.extrinsic,
        }),
    })
}

impl Dataset {
    /// Gyro samples with t ∈ [t0, t1).
    pub fn imu_between(&self, t0: f64, t1: f64) -> &[GyroSample] {
        let start = self.imu.partition_point(|s| s.t < t0);
        let end = self.imu.partition_point(|s| s.t < t1);
        &self.imu[start..end]
    }
}
