//! Assembly of solver-ready windows from datasets.
//!
//! Keyframes are the dataset's frames (already subsampled, 4 Hz in the
//! synthetic world). A window of N keyframes yields the pair set K: every
//! adjacent pair (k, k+1) plus the skip pairs (k, k+2), each admitted only
//! with enough co-visible features. Bearings are unprojected once per frame
//! with the unscented transform and cached.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use thiserror::Error;

use crate::epipolar::{self, BearingObservation, PairProblem};
use crate::preintegration;
use crate::sim::Dataset;
use crate::solver::WindowProblem;

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("window [{start}, {start}+{size}) exceeds the {available} available keyframes")]
    OutOfRange {
        start: usize,
        size: usize,
        available: usize,
    },
    #[error("window has {0} usable pairs, need at least 2")]
    TooFewPairs(usize),
    #[error("pair ({i}, {j}) has no gyro samples between keyframes")]
    NoImuCoverage { i: usize, j: usize },
    #[error(transparent)]
    Preintegration(#[from] preintegration::PreintegrationError),
    #[error(transparent)]
    Epipolar(#[from] epipolar::EpipolarError),
}

#[derive(Clone, Copy, Debug)]
pub struct WindowConfig {
    /// First keyframe index of the window.
    pub start: usize,
    /// Keyframes in the window.
    pub size: usize,
    /// Minimum co-visible features for pair membership.
    pub covisibility_min: usize,
    /// Pixel noise used for bearing covariances; `None` takes the dataset's.
    pub pixel_sigma: Option<f64>,
    /// Bias estimate the preintegrations start from.
    pub initial_bias: Vector3<f64>,
    /// Longest keyframe gap admitted into the pair set (default 2: adjacent
    /// pairs plus the skip pairs).
    pub max_pair_gap: usize,
}

impl WindowConfig {
    pub fn new(start: usize, size: usize) -> Self {
        Self {
            start,
            size,
            covisibility_min: 20,
            pixel_sigma: None,
            initial_bias: Vector3::zeros(),
            max_pair_gap: 2,
        }
    }
}

/// Per-frame bearing cache keyed by feature id.
pub fn frame_bearings(
    dataset: &Dataset,
    frame_index: usize,
    sigma_px: f64,
) -> Result<BTreeMap<u64, BearingObservation>, epipolar::EpipolarError> {
    let frame = &dataset.frames[frame_index];
    let mut map = BTreeMap::new();
    for &(feature_id, u, v) in &frame.observations {
        let mut obs = epipolar::unproject_with_covariance((u, v), &dataset.intrinsics, sigma_px)?;
        obs.feature_id = feature_id;
        obs.frame_id = frame.frame_id;
        map.insert(feature_id, obs);
    }
    Ok(map)
}

fn build_pair(
    dataset: &Dataset,
    bearings: &[BTreeMap<u64, BearingObservation>],
    window_start: usize,
    i: usize,
    j: usize,
    config: &WindowConfig,
) -> Result<Option<PairProblem>, WindowError> {
    let map_i = &bearings[i - window_start];
    let map_j = &bearings[j - window_start];
    let mut bearings_i = Vec::new();
    let mut bearings_j = Vec::new();
    for (feature_id, obs_i) in map_i {
        if let Some(obs_j) = map_j.get(feature_id) {
            bearings_i.push(*obs_i);
            bearings_j.push(*obs_j);
        }
    }
    if bearings_i.len()
        < config
            .covisibility_min
            .max(epipolar::MIN_PAIR_CORRESPONDENCES)
    {
        return Ok(None);
    }
    let t_i = dataset.frames[i].t;
    let t_j = dataset.frames[j].t;
    let samples = dataset.imu_between(t_i, t_j);
    if samples.is_empty() {
        return Err(WindowError::NoImuCoverage { i, j });
    }
    let imu = preintegration::integrate(samples, config.initial_bias, &dataset.imu_noise)?;
    let camera = preintegration::to_camera_frame(&imu, &crate::manifold::Rotation::identity());
    let n = bearings_i.len();
    Ok(Some(PairProblem {
        frame_i: i,
        frame_j: j,
        bearings_i,
        bearings_j,
        samples: samples.to_vec(),
        imu,
        camera,
        weights: vec![1.0; n],
        inliers: vec![true; n],
        sigma2_lambda: 1.0,
        eigen: None,
    }))
}

/// Assembles one window. The pair set is all adjacent pairs plus the
/// (k, k+2) skip pairs that clear the co-visibility minimum.
pub fn assemble_window(
    dataset: &Dataset,
    config: &WindowConfig,
) -> Result<WindowProblem, WindowError> {
    if config.start + config.size > dataset.frames.len() || config.size < 2 {
        return Err(WindowError::OutOfRange {
            start: config.start,
            size: config.size,
            available: dataset.frames.len(),
        });
    }
    let sigma_px = config.pixel_sigma.unwrap_or(dataset.pixel_noise);
    let mut bearings = Vec::with_capacity(config.size);
    for k in 0..config.size {
        bearings.push(frame_bearings(dataset, config.start + k, sigma_px)?);
    }

    let mut pairs = Vec::new();
    for k in 0..config.size - 1 {
        let i = config.start + k;
        let max_gap = config.max_pair_gap.max(1);
        for gap in 1..=max_gap.min(config.size - 1 - k) {
            if let Some(pair) = build_pair(dataset, &bearings, config.start, i, i + gap, config)? {
                pairs.push(pair);
            }
        }
    }
    if pairs.len() < 2 {
        return Err(WindowError::TooFewPairs(pairs.len()));
    }
    let keyframe_times = (0..config.size)
        .map(|k| dataset.frames[config.start + k].t)
        .collect();
    Ok(WindowProblem {
        keyframe_times,
        pairs,
        noise: dataset.imu_noise,
    })
}

/// Pairs that involve the window's newest keyframe only — what the
/// sliding-window refiner feeds the filter so overlapping windows do not
/// recount the same observations.
pub fn assemble_new_pairs(
    dataset: &Dataset,
    config: &WindowConfig,
) -> Result<WindowProblem, WindowError> {
    if config.start + config.size > dataset.frames.len() || config.size < 2 {
        return Err(WindowError::OutOfRange {
            start: config.start,
            size: config.size,
            available: dataset.frames.len(),
        });
    }
    let sigma_px = config.pixel_sigma.unwrap_or(dataset.pixel_noise);
    let newest = config.start + config.size - 1;
    let lookback = config.max_pair_gap.clamp(1, (config.size - 1).min(newest));
    let mut bearings = Vec::new();
    let base = newest - lookback;
    for k in 0..=lookback {
        bearings.push(frame_bearings(dataset, base + k, sigma_px)?);
    }
    let mut pairs = Vec::new();
    for back in 1..=lookback {
        if let Some(pair) = build_pair(dataset, &bearings, base, newest - back, newest, config)? {
            pairs.push(pair);
        }
    }
    let keyframe_times = (0..config.size)
        .map(|k| dataset.frames[config.start + k].t)
        .collect();
    // Zero pairs is legal here: the filter treats it as "no new information".
    Ok(WindowProblem {
        keyframe_times,
        pairs,
        noise: dataset.imu_noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate, ScenarioConfig};

    fn dataset() -> Dataset {
        generate(&ScenarioConfig {
            duration: 10.0,
            pure_rotation_prefix: 5.0,
            seed: 3,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn assembles_adjacent_and_skip_pairs() {
        let data = dataset();
        let window = assemble_window(&data, &WindowConfig::new(0, 10)).unwrap();
        // 9 adjacent + up to 8 skip pairs.
        assert!(window.pairs.len() >= 9, "only {} pairs", window.pairs.len());
        assert!(window.pairs.len() <= 17);
        assert_eq!(window.keyframe_times.len(), 10);
        for pair in &window.pairs {
            assert!(pair.len() >= 20);
            assert!(pair.imu.t_end > pair.imu.t_start);
            let span = pair.frame_j - pair.frame_i;
            assert!(span == 1 || span == 2);
        }
    }

    #[test]
    fn bearings_are_unit_and_full_rank() {
        let data = dataset();
        let window = assemble_window(&data, &WindowConfig::new(4, 6)).unwrap();
        let pair = &window.pairs[0];
        for obs in pair.bearings_i.iter().chain(pair.bearings_j.iter()) {
            assert!((obs.direction.norm() - 1.0).abs() < 1e-12);
            let eig = nalgebra::SymmetricEigen::new(obs.covariance);
            assert!(eig.eigenvalues.min() > 0.0);
        }
    }

    #[test]
    fn window_out_of_range_errors() {
        let data = dataset();
        let err = assemble_window(&data, &WindowConfig::new(35, 10)).unwrap_err();
        assert!(matches!(err, WindowError::OutOfRange { .. }));
    }

    #[test]
    fn new_pairs_only_touch_newest_keyframe() {
        let data = dataset();
        let window = assemble_new_pairs(&data, &WindowConfig::new(0, 10)).unwrap();
        assert!(!window.pairs.is_empty());
        for pair in &window.pairs {
            assert_eq!(pair.frame_j, 9);
        }
    }
}
