//! Error metrics against ground truth.

use rotinit::sim::{Dataset, GroundTruth};
use rotinit::solver::{refresh_pair, CalibState, WindowProblem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dataset has no ground truth")]
    NoGroundTruth,
}

#[derive(Clone, Copy, Debug)]
pub struct Metrics {
    /// 100·‖b̂−b‖/‖b‖, or ‖b̂−b‖ in rad/s when the flag below is set.
    pub bias_error_pct: f64,
    /// True bias was (numerically) zero; the error above is absolute.
    pub bias_error_absolute: bool,
    /// Geodesic angle of R̂_CI R_CI_trueᵀ, degrees.
    pub extrinsic_error_deg: f64,
    /// Mean geodesic error of the corrected per-pair relative rotations
    /// against the true relative camera rotations, degrees.
    pub pairwise_error_deg: f64,
}

/// Scores an estimate. The window is re-linearized at the estimate so the
/// pairwise rotations include the estimated bias and extrinsic.
pub fn compute_metrics(
    estimate: &CalibState,
    dataset: &Dataset,
    window: &mut WindowProblem,
) -> Result<Metrics, MetricsError> {
    let truth: &GroundTruth = dataset.truth.as_ref().ok_or(MetricsError::NoGroundTruth)?;

    let bias_true = truth.bias.first().copied().unwrap_or_default();
    let diff = (estimate.gyro_bias - bias_true).norm();
    let (bias_error_pct, bias_error_absolute) = if bias_true.norm() < 1e-6 {
        (diff, true)
    } else {
        (100.0 * diff / bias_true.norm(), false)
    };

    let extrinsic_error_deg = estimate.extrinsic.angle_to(&truth.extrinsic).to_degrees();

    let mut pair_errors = Vec::new();
    for pair in window.pairs.iter_mut() {
        // Exact reintegration at the estimate (threshold 0): the scores
        // must not inherit first-order bias-shift error.
        let _ = refresh_pair(pair, estimate, &window.noise, 0.0);
        let estimated = pair.camera.delta;
        let truth_rot = truth.relative_camera_rotation(pair.frame_i, pair.frame_j);
        pair_errors.push(estimated.angle_to(&truth_rot).to_degrees());
    }
    let pairwise_error_deg = if pair_errors.is_empty() {
        f64::NAN
    } else {
        pair_errors.iter().sum::<f64>() / pair_errors.len() as f64
    };

    Ok(Metrics {
        bias_error_pct,
        bias_error_absolute,
        extrinsic_error_deg,
        pairwise_error_deg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rotinit::manifold;
    use rotinit::sim::{generate, ScenarioConfig};
    use rotinit::window::{assemble_window, WindowConfig};

    fn dataset() -> Dataset {
        generate(&ScenarioConfig {
            duration: 5.0,
            pure_rotation_prefix: 2.5,
            pixel_noise: 0.0,
            gyro_bias: Vector3::new(0.02, -0.01, 0.015),
            seed: 2,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn exact_estimate_scores_zero() {
        let data = dataset();
        let truth = data.truth.clone().unwrap();
        let mut window = assemble_window(&data, &WindowConfig::new(0, 8)).unwrap();
        let estimate = CalibState::new(truth.bias[0], truth.extrinsic);
        let m = compute_metrics(&estimate, &data, &mut window).unwrap();
        assert!(m.bias_error_pct < 1e-9);
        assert!(m.extrinsic_error_deg < 1e-9);
        assert!(
            m.pairwise_error_deg < 1e-6,
            "pairwise {}",
            m.pairwise_error_deg
        );
        assert!(!m.bias_error_absolute);
    }

    #[test]
    fn five_degree_offset_scores_five_degrees() {
        let data = dataset();
        let truth = data.truth.clone().unwrap();
        let mut window = assemble_window(&data, &WindowConfig::new(0, 8)).unwrap();
        let axis = Vector3::new(0.0, 0.0, 1.0);
        let estimate = CalibState::new(
            truth.bias[0],
            manifold::boxplus(&truth.extrinsic, &(axis * 5f64.to_radians())),
        );
        let m = compute_metrics(&estimate, &data, &mut window).unwrap();
        assert!((m.extrinsic_error_deg - 5.0).abs() < 1e-9);
    }

    #[test]
    fn bias_error_is_percent_of_truth() {
        let data = dataset();
        let truth = data.truth.clone().unwrap();
        let mut window = assemble_window(&data, &WindowConfig::new(0, 8)).unwrap();
        let estimate = CalibState::new(truth.bias[0] * 1.5, truth.extrinsic);
        let m = compute_metrics(&estimate, &data, &mut window).unwrap();
        assert!((m.bias_error_pct - 50.0).abs() < 1e-9);
    }

    #[test]
    fn zero_true_bias_reports_absolute() {
        let data = generate(&ScenarioConfig {
            duration: 5.0,
            pure_rotation_prefix: 2.5,
            pixel_noise: 0.0,
            gyro_bias: Vector3::zeros(),
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let truth = data.truth.clone().unwrap();
        let mut window = assemble_window(&data, &WindowConfig::new(0, 8)).unwrap();
        let estimate = CalibState::new(Vector3::new(1e-3, 0.0, 0.0), truth.extrinsic);
        let m = compute_metrics(&estimate, &data, &mut window).unwrap();
        assert!(m.bias_error_absolute);
        assert!((m.bias_error_pct - 1e-3).abs() < 1e-12);
    }
}
