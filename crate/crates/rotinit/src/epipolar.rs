//! Bearing vectors, epipolar-plane normals, and the minimum-eigenvalue
//! machinery.
//!
//! Every feature correspondence between two keyframes spans an epipolar
//! plane whose normal is `n = ⌊fᵢ⌋× R fⱼ`. Stacking the normals' outer
//! products gives a positive-semidefinite 3x3 matrix `M`; its smallest
//! eigenvalue vanishes exactly when the relative rotation is right, no
//! matter how the cameras translated. That scalar is the solver's residual.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::manifold::{skew, Rotation};
use crate::preintegration::{CameraPreintegration, GyroSample, PreintegratedRotation};

/// Rank regularizer added along the mean ray so bearing covariances are
/// full-rank (the radial direction carries no pixel noise).
pub const RAY_VARIANCE_FLOOR: f64 = 1e-12;

/// Minimum correspondences for a usable pair (three independent constraints
/// need more than five co-visible points).
pub const MIN_PAIR_CORRESPONDENCES: usize = 5;

#[derive(Debug, Error)]
pub enum EpipolarError {
    #[error("pixel ({u:.2}, {v:.2}) outside {width}x{height} image")]
    PixelOutsideImage {
        u: f64,
        v: f64,
        width: u32,
        height: u32,
    },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("pair ({frame_i}, {frame_j}) has {active} active correspondences, need {min}")]
    TooFewCorrespondences {
        frame_i: usize,
        frame_j: usize,
        active: usize,
        min: usize,
    },
}

/// Pinhole camera model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, EpipolarError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(EpipolarError::InvalidIntrinsics(
                "focal lengths must be positive",
            ));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(EpipolarError::InvalidIntrinsics(
                "principal point outside image",
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// EuRoC cam0 pinhole parameters.
    pub fn euroc_defaults() -> Self {
        Self {
            fx: 458.654,
            fy: 457.296,
            cx: 367.215,
            cy: 248.375,
            width: 752,
            height: 480,
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= self.width as f64 - 1.0 && v <= self.height as f64 - 1.0
    }

    /// Unit bearing for a pixel.
    pub fn unproject(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0).normalize()
    }

    /// Pixel for a camera-frame point; `None` behind the camera or outside
    /// the image.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 1e-6 {
            return None;
        }
        let u = self.fx * p.x / p.z + self.cx;
        let v = self.fy * p.y / p.z + self.cy;
        self.contains(u, v).then_some((u, v))
    }
}

/// Unit bearing vector with a full-rank 3x3 covariance.
#[derive(Clone, Copy, Debug)]
pub struct BearingObservation {
    pub direction: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    pub pixel: (f64, f64),
    pub feature_id: u64,
    pub frame_id: usize,
}

/// Unprojects a pixel and propagates its noise through the unprojection with
/// an unscented transform (2n+1 sigma points, α=1e-3, κ=0, β=2).
///
/// The reported direction is the plain unprojection of the input pixel; the
/// covariance is the sigma-point covariance plus [`RAY_VARIANCE_FLOOR`] along
/// the ray, which restores full rank.
pub fn unproject_with_covariance(
    pixel: (f64, f64),
    intrinsics: &CameraIntrinsics,
    sigma_px: f64,
) -> Result<BearingObservation, EpipolarError> {
    let (u, v) = pixel;
    if !intrinsics.contains(u, v) {
        return Err(EpipolarError::PixelOutsideImage {
            u,
            v,
            width: intrinsics.width,
            height: intrinsics.height,
        });
    }
    let direction = intrinsics.unproject(u, v);

    const N: f64 = 2.0;
    const ALPHA: f64 = 1e-3;
    const KAPPA: f64 = 0.0;
    const BETA: f64 = 2.0;
    let lambda = ALPHA * ALPHA * (N + KAPPA) - N;
    let spread = (N + lambda).sqrt() * sigma_px;

    let mut covariance = Matrix3::zeros();
    if spread > 0.0 {
        let pixels = [
            (u, v),
            (u + spread, v),
            (u - spread, v),
            (u, v + spread),
            (u, v - spread),
        ];
        let w_cov0 = lambda / (N + lambda) + 1.0 - ALPHA * ALPHA + BETA;
        let w_i = 0.5 / (N + lambda);
        let sigma_dirs: Vec<Vector3<f64>> = pixels
            .iter()
            .map(|&(su, sv)| intrinsics.unproject(su, sv))
            .collect();
        // Mean via deviations from the centre point: w₀χ₀ + Σwᵢχᵢ with
        // Σw = 1 rewritten as χ₀ + Σwᵢ(χᵢ − χ₀), which avoids the huge
        // cancelling weights of the scaled-α sigma set.
        let mut mean = sigma_dirs[0];
        for d in &sigma_dirs[1..] {
            mean += (d - sigma_dirs[0]) * w_i;
        }
        let d0 = sigma_dirs[0] - mean;
        covariance += d0 * d0.transpose() * w_cov0;
        for d in &sigma_dirs[1..] {
            let dev = d - mean;
            covariance += dev * dev.transpose() * w_i;
        }
    }
    covariance += direction * direction.transpose() * RAY_VARIANCE_FLOOR;

    Ok(BearingObservation {
        direction,
        covariance,
        pixel,
        feature_id: 0,
        frame_id: 0,
    })
}

/// Normal of the epipolar plane spanned by two bearings under rotation `r`:
/// `n = ⌊fᵢ⌋× R fⱼ`. Orthogonal to `fᵢ` by construction.
pub fn epipolar_normal(f_i: &Vector3<f64>, f_j: &Vector3<f64>, r: &Rotation) -> Vector3<f64> {
    f_i.cross(&(r * f_j))
}

/// Smallest eigenvalue and unit eigenvector of a symmetric 3x3 matrix.
///
/// Closed-form (Cardano) eigenvalues, eigenvector from row cross products,
/// one Rayleigh-quotient polish. Deterministic tie-breaks: a fully
/// degenerate spectrum returns `e1`; a doubly-degenerate smallest eigenvalue
/// returns the eigenplane direction orthogonal to `e_k`, where `k` is the
/// largest eigenvector's smallest-magnitude component. The sign convention
/// makes the largest-magnitude component positive.
pub fn min_eigenpair(m: &Matrix3<f64>) -> (f64, Vector3<f64>) {
    let s = (m + m.transpose()) * 0.5;
    let scale = s.abs().max();
    if scale == 0.0 {
        return (0.0, Vector3::x());
    }
    let a = s / scale;
    let (lo, _mid, hi) = symmetric_eigenvalues(&a);
    let v = eigenvector_for(&a, lo, hi);
    let v = canonical_sign(v);
    // The Cardano root is continuous in M even when the spectrum collapses
    // (pure rotation drives every epipolar normal to zero), unlike a
    // Rayleigh quotient through the then-unstable eigenvector.
    (lo * scale, v)
}

/// Sorted eigenvalues of a symmetric 3x3 matrix via the trigonometric form
/// of Cardano's formula.
fn symmetric_eigenvalues(a: &Matrix3<f64>) -> (f64, f64, f64) {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let q = a.trace() / 3.0;
    if p1 == 0.0 {
        let mut d = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
        d.sort_by(|x, y| x.partial_cmp(y).unwrap());
        return (d[0], d[1], d[2]);
    }
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (a - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let mid = 3.0 * q - hi - lo;
    (lo, mid, hi)
}

fn eigenvector_for(a: &Matrix3<f64>, lambda: f64, lambda_max: f64) -> Vector3<f64> {
    if let Some(v) = null_direction(a, lambda) {
        return v;
    }
    // Smallest eigenvalue is (numerically) repeated. If the whole spectrum
    // collapsed the matrix is a multiple of I: pick e1. Otherwise take the
    // plane orthogonal to the well-separated largest eigenvector.
    match null_direction(a, lambda_max) {
        None => Vector3::x(),
        Some(w) => {
            let mut k = 0;
            for i in 1..3 {
                if w[i].abs() < w[k].abs() {
                    k = i;
                }
            }
            let mut e = Vector3::zeros();
            e[k] = 1.0;
            w.cross(&e).normalize()
        }
    }
}

/// Best cross product of rows of (A − λI), if meaningfully nonzero.
fn null_direction(a: &Matrix3<f64>, lambda: f64) -> Option<Vector3<f64>> {
    let shifted = a - Matrix3::identity() * lambda;
    let r0: Vector3<f64> = shifted.row(0).transpose();
    let r1: Vector3<f64> = shifted.row(1).transpose();
    let r2: Vector3<f64> = shifted.row(2).transpose();
    let candidates = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)];
    let mut best = candidates[0];
    let mut best_norm = best.norm_squared();
    for c in &candidates[1..] {
        let n = c.norm_squared();
        if n > best_norm {
            best = *c;
            best_norm = n;
        }
    }
    // `a` is normalized to unit max-entry, so this threshold is relative.
    (best_norm > 1e-24).then(|| best / best_norm.sqrt())
}

fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let mut k = 0;
    for i in 1..3 {
        if v[i].abs() > v[k].abs() {
            k = i;
        }
    }
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}

/// One keyframe pair: matched bearings, the gyro preintegration connecting
/// the frames, and the solver's per-pair working state.
#[derive(Clone, Debug)]
pub struct PairProblem {
    pub frame_i: usize,
    pub frame_j: usize,
    /// Matched observations, index-aligned; sorted by feature id.
    pub bearings_i: Vec<BearingObservation>,
    pub bearings_j: Vec<BearingObservation>,
    /// Gyro samples spanning [t_i, t_j), kept for reintegration.
    pub samples: Vec<GyroSample>,
    pub imu: PreintegratedRotation,
    pub camera: CameraPreintegration,
    /// Feature-pair weights (1 = unweighted).
    pub weights: Vec<f64>,
    /// Chi-square gate result per correspondence.
    pub inliers: Vec<bool>,
    /// Variance of the pair's minimum-eigenvalue residual.
    pub sigma2_lambda: f64,
    /// Cached eigen state from the last evaluation at the linearization point.
    pub eigen: Option<PairEigen>,
}

#[derive(Clone, Copy, Debug)]
pub struct PairEigen {
    pub m: Matrix3<f64>,
    pub lambda_min: f64,
    pub eigvec: Vector3<f64>,
}

impl PairProblem {
    pub fn len(&self) -> usize {
        self.bearings_i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bearings_i.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.inliers.iter().filter(|&&x| x).count()
    }

    /// Corrected camera-frame relative rotation at `(δb, δθ)`.
    pub fn corrected_rotation(
        &self,
        delta_bias: &Vector3<f64>,
        delta_theta: &Vector3<f64>,
    ) -> Rotation {
        self.camera.apply_correction(delta_bias, delta_theta)
    }

    /// Builds `M = Σ n nᵀ` over the active (inlier) correspondences at the
    /// given correction, using weighted bearings `fⱼ′ = w fⱼ` when
    /// `use_weights` is set.
    pub fn build_m(
        &self,
        delta_bias: &Vector3<f64>,
        delta_theta: &Vector3<f64>,
        use_weights: bool,
    ) -> Result<Matrix3<f64>, EpipolarError> {
        let active = self.active_count();
        if active < MIN_PAIR_CORRESPONDENCES {
            return Err(EpipolarError::TooFewCorrespondences {
                frame_i: self.frame_i,
                frame_j: self.frame_j,
                active,
                min: MIN_PAIR_CORRESPONDENCES,
            });
        }
        let gamma = self.corrected_rotation(delta_bias, delta_theta);
        let mut m = Matrix3::zeros();
        for k in 0..self.len() {
            if !self.inliers[k] {
                continue;
            }
            let w = if use_weights { self.weights[k] } else { 1.0 };
            let n = epipolar_normal(
                &self.bearings_i[k].direction,
                &(self.bearings_j[k].direction * w),
                &gamma,
            );
            m += n * n.transpose();
        }
        Ok(m)
    }

    /// Normals of the active correspondences at the given correction.
    pub fn normals(
        &self,
        delta_bias: &Vector3<f64>,
        delta_theta: &Vector3<f64>,
        use_weights: bool,
    ) -> Vec<(usize, Vector3<f64>)> {
        let gamma = self.corrected_rotation(delta_bias, delta_theta);
        (0..self.len())
            .filter(|&k| self.inliers[k])
            .map(|k| {
                let w = if use_weights { self.weights[k] } else { 1.0 };
                let n = epipolar_normal(
                    &self.bearings_i[k].direction,
                    &(self.bearings_j[k].direction * w),
                    &gamma,
                );
                (k, n)
            })
            .collect()
    }
}

/// Row-vector Jacobians of the per-feature scalar `eᵏ = vᵀ nᵏ` w.r.t. the
/// two bearings: `∂e/∂fᵢ = −vᵀ ⌊γ fⱼ⌋×`, `∂e/∂fⱼ = vᵀ ⌊fᵢ⌋× γ`.
pub fn feature_jacobians(
    v: &Vector3<f64>,
    f_i: &Vector3<f64>,
    f_j: &Vector3<f64>,
    gamma: &Rotation,
) -> (nalgebra::RowVector3<f64>, nalgebra::RowVector3<f64>) {
    let rotated = gamma * f_j;
    let d_fi = -v.transpose() * skew(&rotated);
    let d_fj = v.transpose() * skew(f_i) * gamma.matrix();
    (d_fi, d_fj)
}
