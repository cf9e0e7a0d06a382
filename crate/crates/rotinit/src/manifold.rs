//! SO(3) primitives: exponential/logarithm maps, right Jacobians, and the
//! boxplus/boxminus manifold operators used by every estimator in this crate.
//!
//! Rotations are stored as 3x3 orthonormal matrices. All angles are radians.
//! Series branches switch below `SMALL_ANGLE` to avoid cancellation in the
//! sin(θ)/θ style terms.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Threshold below which trigonometric coefficients use their Taylor series.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Orthonormality / determinant tolerance for validated construction.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("matrix is not orthonormal (|R R^T - I| = {defect:.3e})")]
    NotOrthonormal { defect: f64 },
    #[error("matrix is not a proper rotation (det = {det:.6})")]
    NotProper { det: f64 },
}

/// Skew-symmetric (cross-product) matrix of `v`: `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Element of SO(3), stored as an orthonormal 3x3 matrix with det +1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates orthonormality and det(R) = +1 to `ROTATION_TOL`.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, ManifoldError> {
        let defect = (m * m.transpose() - Matrix3::identity()).norm();
        if defect > ROTATION_TOL {
            return Err(ManifoldError::NotOrthonormal { defect });
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(ManifoldError::NotProper { det });
        }
        Ok(Rotation(m))
    }

    /// Caller asserts the matrix is already a rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        exp_so3(&(axis * (angle / n)))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Alias for [`Rotation::transpose`]; R⁻¹ = Rᵀ.
    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Geodesic distance to `other` in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        boxminus(other, self).norm()
    }

    /// Rotation angle away from identity, in radians.
    pub fn angle(&self) -> f64 {
        log_so3(self).norm()
    }

    /// Orthonormality defect |R Rᵀ − I|; useful for drift checks.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.0 * self.0.transpose() - Matrix3::identity()).norm()
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl std::ops::Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

impl std::ops::Mul<&Vector3<f64>> for &Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: &Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Exponential map so(3) → SO(3), Rodrigues closed form.
pub fn exp_so3(theta: &Vector3<f64>) -> Rotation {
    let angle_sq = theta.norm_squared();
    let k = skew(theta);
    let (a, b) = if angle_sq < SMALL_ANGLE * SMALL_ANGLE {
        // sin(θ)/θ and (1−cos θ)/θ² expanded to O(θ⁴).
        (1.0 - angle_sq / 6.0, 0.5 - angle_sq / 24.0)
    } else {
        let angle = angle_sq.sqrt();
        ((angle.sin()) / angle, (1.0 - angle.cos()) / angle_sq)
    };
    Rotation(Matrix3::identity() + k * a + k * k * b)
}

/// Converts a rotation matrix to a unit quaternion (w, x, y, z), w ≥ 0.
///
/// Shepperd's method: branch on the largest of trace and diagonal entries so
/// every branch divides by a quantity bounded away from zero. This is what
/// makes [`log_so3`] stable for angles near π.
fn matrix_to_quaternion(m: &Matrix3<f64>) -> [f64; 4] {
    let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let (w, x, y, z);
    if trace > m[(0, 0)] && trace > m[(1, 1)] && trace > m[(2, 2)] {
        let s = (1.0 + trace).sqrt() * 2.0;
        w = 0.25 * s;
        x = (m[(2, 1)] - m[(1, 2)]) / s;
        y = (m[(0, 2)] - m[(2, 0)]) / s;
        z = (m[(1, 0)] - m[(0, 1)]) / s;
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(2, 1)] - m[(1, 2)]) / s;
        x = 0.25 * s;
        y = (m[(0, 1)] + m[(1, 0)]) / s;
        z = (m[(0, 2)] + m[(2, 0)]) / s;
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = (1.0 - m[(0, 0)] + m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(0, 2)] - m[(2, 0)]) / s;
        x = (m[(0, 1)] + m[(1, 0)]) / s;
        y = 0.25 * s;
        z = (m[(1, 2)] + m[(2, 1)]) / s;
    } else {
        let s = (1.0 - m[(0, 0)] - m[(1, 1)] + m[(2, 2)]).sqrt() * 2.0;
        w = (m[(1, 0)] - m[(0, 1)]) / s;
        x = (m[(0, 2)] + m[(2, 0)]) / s;
        y = (m[(1, 2)] + m[(2, 1)]) / s;
        z = 0.25 * s;
    }
    let norm = (w * w + x * x + y * y + z * z).sqrt();
    let sign = if w < 0.0 { -1.0 } else { 1.0 };
    let k = sign / norm;
    [w * k, x * k, y * k, z * k]
}

/// Principal logarithm SO(3) → so(3); ‖result‖ ≤ π.
pub fn log_so3(r: &Rotation) -> Vector3<f64> {
    let [w, x, y, z] = matrix_to_quaternion(r.matrix());
    let v = Vector3::new(x, y, z);
    let s = v.norm();
    if s < 1e-9 {
        // θ ≈ 2 v / w with w ≈ 1; error O(s³).
        return v * (2.0 / w);
    }
    v * (2.0 * s.atan2(w) / s)
}

/// Right Jacobian of SO(3): Exp(θ + δ) ≈ Exp(θ) Exp(Jr(θ) δ).
pub fn right_jacobian(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle_sq = theta.norm_squared();
    let k = skew(theta);
    let (a, b) = if angle_sq < SMALL_ANGLE * SMALL_ANGLE {
        (0.5 - angle_sq / 24.0, 1.0 / 6.0 - angle_sq / 120.0)
    } else {
        let angle = angle_sq.sqrt();
        (
            (1.0 - angle.cos()) / angle_sq,
            (angle - angle.sin()) / (angle_sq * angle),
        )
    };
    Matrix3::identity() - k * a + k * k * b
}

/// Inverse of the right Jacobian.
///
/// Singular at ‖θ‖ = π; callers keep arguments well inside (−π, π), which
/// holds for the residuals this crate feeds it (prior corrections).
pub fn right_jacobian_inv(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle_sq = theta.norm_squared();
    let k = skew(theta);
    let b = if angle_sq < SMALL_ANGLE * SMALL_ANGLE {
        1.0 / 12.0 + angle_sq / 720.0
    } else {
        let angle = angle_sq.sqrt();
        1.0 / angle_sq - (1.0 + angle.cos()) / (2.0 * angle * angle.sin())
    };
    Matrix3::identity() + k * 0.5 + k * k * b
}

/// Manifold retraction: R ⊞ θ = R Exp(θ).
pub fn boxplus(r: &Rotation, theta: &Vector3<f64>) -> Rotation {
    *r * exp_so3(theta)
}

/// Manifold difference: R′ ⊟ R = Log(R⁻¹ R′).
pub fn boxminus(lhs: &Rotation, rhs: &Rotation) -> Vector3<f64> {
    log_so3(&(rhs.transpose() * *lhs))
}
