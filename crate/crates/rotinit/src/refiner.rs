//! Sliding-window MAP refinement.
//!
//! The window solver emits a Gaussian belief over (b_g, θ_CI). As keyframes
//! arrive, each new window contributes fresh epipolar observations; fusing
//! them with the propagated belief is a small MAP problem solved by an
//! iterated error-state Kalman update (relinearize observations and the
//! manifold prior residual about the current estimate until the step
//! vanishes). Rotation information therefore accumulates while the platform
//! is still translation-starved, which is the whole point: the extrinsic
//! keeps converging before any parallax exists.
//!
//! Windows slide by one keyframe, so consecutive windows share most of their
//! pairs. To avoid recounting the same observations, the filter is fed only
//! pairs involving the newest keyframe; the propagated prior carries
//! everything older.

use nalgebra::{Matrix6, RowVector6, Vector3};
use thiserror::Error;

use crate::manifold;
use crate::preintegration::{integrate, ImuNoiseModel};
use crate::sim::Dataset;
use crate::solver::{
    self, fp_weights, refresh_pair, CalibState, SolveReport, SolverConfig, WindowProblem,
};
use crate::window::{assemble_new_pairs, assemble_window, WindowConfig, WindowError};

#[derive(Debug, Error)]
pub enum RefinerError {
    #[error("refinement needs a successful initialization (success = false)")]
    InitFailed,
    #[error(transparent)]
    Window(#[from] WindowError),
}

/// Gaussian belief over the calibration state carried between windows.
#[derive(Clone, Debug)]
pub struct PriorBelief {
    pub state: CalibState,
    /// 6x6 over [b_g; θ_CI]: bias block rad²/s², orientation block rad².
    pub covariance: Matrix6<f64>,
}

impl PriorBelief {
    pub fn from_report(report: &SolveReport) -> Option<Self> {
        report.covariance.map(|covariance| Self {
            state: report.state,
            covariance,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RefinerConfig {
    /// IESKF relinearization cap.
    pub max_iters: usize,
    /// ‖δx‖ below which the update is converged.
    pub step_tol: f64,
    /// Cost increases tolerated before declaring divergence.
    pub divergence_patience: usize,
    /// Median rotation-compensated ray angle that triggers hand-off.
    pub parallax_stop_deg: f64,
    /// Disable to mimic the no-prior baseline (fresh solve per window).
    pub use_prior: bool,
    /// Observation-variance inflation compensating bearing reuse across
    /// overlapping windows (each frame's pixels serve two consecutive
    /// updates; treating them as independent makes the filter overconfident).
    pub reuse_inflation: f64,
    /// How many previous keyframes pair with the newest one per update.
    pub new_pair_lookback: usize,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            max_iters: 10,
            step_tol: 1e-8,
            divergence_patience: 3,
            parallax_stop_deg: 1.0,
            use_prior: true,
            reuse_inflation: 2.0,
            new_pair_lookback: 2,
        }
    }
}

/// Inflates the bias block by the averaged random-walk variance accumulated
/// over the window's keyframe gaps. `window_times` holds N+1 stamps: the
/// keyframe that just slid out followed by the window's N keyframes. The
/// orientation block is untouched (the extrinsic does not walk).
pub fn propagate_prior(
    prev: &PriorBelief,
    window_times: &[f64],
    noise: &ImuNoiseModel,
    window_size: usize,
) -> PriorBelief {
    let elapsed: f64 = window_times.windows(2).map(|w| w[1] - w[0]).sum();
    let added = noise.sigma_bg * noise.sigma_bg * elapsed / window_size as f64;
    let mut covariance = prev.covariance;
    for i in 0..3 {
        covariance[(i, i)] += added;
    }
    PriorBelief {
        state: prev.state,
        covariance,
    }
}

/// One scalar observation for the MAP update: residual value, Jacobian
/// w.r.t. the error state at the current linearization, and its variance.
#[derive(Clone, Copy, Debug)]
pub struct MapObservation {
    pub value: f64,
    pub jacobian: RowVector6<f64>,
    pub variance: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct UpdateDiagnostics {
    pub iterations: usize,
    pub diverged: bool,
    pub observation_count: usize,
    pub final_cost: f64,
}

/// Iterated error-state MAP update.
///
/// `observe` evaluates the measurement stack at an arbitrary state; the
/// filter relinearizes it and the manifold prior residual each iteration and
/// solves the joint normal equations. Returns the posterior belief with
/// covariance from the final information matrix. On divergence (cost rising
/// `divergence_patience` times in a row) the prior is returned unchanged.
pub fn solve_map<F>(
    prior: &PriorBelief,
    mut observe: F,
    config: &RefinerConfig,
) -> (PriorBelief, UpdateDiagnostics)
where
    F: FnMut(&CalibState) -> Vec<MapObservation>,
{
    let mut diag = UpdateDiagnostics::default();
    let p_inv = match prior.covariance.cholesky() {
        Some(chol) => chol.inverse(),
        None => {
            // Prior not PD; fall back to a heavily regularized inverse.
            let reg = prior.covariance + Matrix6::identity() * 1e-12;
            match reg.cholesky() {
                Some(chol) => chol.inverse(),
                None => {
                    return (
                        prior.clone(),
                        UpdateDiagnostics {
                            diverged: true,
                            ..diag
                        },
                    )
                }
            }
        }
    };

    let mut state = prior.state;
    let mut last_cost = f64::INFINITY;
    let mut rises = 0;
    let mut info = p_inv;

    for iter in 0..config.max_iters {
        diag.iterations = iter + 1;
        let residual_prior = state.boxminus(&prior.state);
        let theta = residual_prior.fixed_rows::<3>(3).into_owned();
        // Prior-residual Jacobian: identity bias block, inverse right
        // Jacobian for the orientation residual (identity on iteration 0).
        let mut j_prior = Matrix6::identity();
        j_prior
            .fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&manifold::right_jacobian_inv(&theta));

        let observations = observe(&state);
        diag.observation_count = observations.len();
        if observations.is_empty() && iter == 0 {
            // No information: posterior is exactly the prior.
            diag.final_cost = 0.0;
            return (prior.clone(), diag);
        }

        let mut cost = (residual_prior.transpose() * p_inv * residual_prior)[(0, 0)];
        let mut a = j_prior.transpose() * p_inv * j_prior;
        let mut b = j_prior.transpose() * p_inv * residual_prior;
        for obs in &observations {
            let whitened = obs.value * obs.value / obs.variance;
            cost += whitened;
            a += obs.jacobian.transpose() * obs.jacobian / obs.variance;
            b += obs.jacobian.transpose() * obs.value / obs.variance;
        }
        diag.final_cost = cost;
        if cost > last_cost {
            rises += 1;
            if rises >= config.divergence_patience {
                diag.diverged = true;
                return (prior.clone(), diag);
            }
        } else {
            rises = 0;
        }
        last_cost = cost;

        let Some(chol) = a.cholesky() else {
            diag.diverged = true;
            return (prior.clone(), diag);
        };
        info = a;
        let step = chol.solve(&(-b));
        state = state.boxplus(&step);
        if step.norm() < config.step_tol {
            break;
        }
    }

    let covariance = match info.cholesky() {
        Some(chol) => chol.inverse(),
        None => prior.covariance,
    };
    (PriorBelief { state, covariance }, diag)
}

/// Fixed observation model for one pair during a filter update: the
/// minimum eigenvector, the gated inlier set, and per-correspondence
/// variances, all evaluated at the prior mean.
///
/// With `v` held fixed, the projected residuals `eᵏ = vᵀ nᵏ` are zero-mean
/// at the true state (the equivalent fine-grained form of the eigenvalue
/// objective), which is what makes them usable as Kalman measurements — the
/// pair-level √λ_min scalar is a minimum of noise and has a positive mean.
#[derive(Clone, Debug)]
pub struct PairObservationModel {
    pub eigvec: nalgebra::Vector3<f64>,
    pub inliers: Vec<bool>,
    pub variances: Vec<f64>,
}

/// Builds the observation model at the pair's current linearization:
/// eigenvector of the unweighted M, chi-square gate, per-correspondence
/// variances from the bearing covariances. `None` when fewer than the
/// minimum correspondences survive the gate.
pub fn build_observation_model(
    pair: &mut crate::epipolar::PairProblem,
    solver_config: &SolverConfig,
) -> Option<PairObservationModel> {
    pair.inliers = vec![true; pair.len()];
    pair.weights = vec![1.0; pair.len()];
    let stats = fp_weights(pair, solver_config);
    if stats.skipped_degenerate || pair.active_count() < crate::epipolar::MIN_PAIR_CORRESPONDENCES {
        // Degenerate eigengap still leaves a usable v (noise picks it);
        // only a failed gate disqualifies the pair.
        if pair.active_count() < crate::epipolar::MIN_PAIR_CORRESPONDENCES {
            return None;
        }
    }
    let eigen = pair.eigen.as_ref()?;
    let v = eigen.eigvec;
    let gamma = pair.corrected_rotation(&Vector3::zeros(), &Vector3::zeros());
    let variances = (0..pair.len())
        .map(|k| {
            let (d_fi, d_fj) = crate::epipolar::feature_jacobians(
                &v,
                &pair.bearings_i[k].direction,
                &pair.bearings_j[k].direction,
                &gamma,
            );
            let var = (d_fi * pair.bearings_i[k].covariance * d_fi.transpose())[(0, 0)]
                + (d_fj * pair.bearings_j[k].covariance * d_fj.transpose())[(0, 0)];
            var.max(1e-24)
        })
        .collect();
    Some(PairObservationModel {
        eigvec: v,
        inliers: pair.inliers.clone(),
        variances,
    })
}

/// Per-correspondence observations of one pair at its current linearization
/// (call [`refresh_pair`] first to move it to the evaluation state).
pub fn pair_observations(
    pair: &crate::epipolar::PairProblem,
    model: &PairObservationModel,
) -> Vec<MapObservation> {
    let gamma = pair.corrected_rotation(&Vector3::zeros(), &Vector3::zeros());
    let v = model.eigvec;
    let mut out = Vec::with_capacity(pair.len());
    for k in 0..pair.len() {
        if !model.inliers[k] {
            continue;
        }
        let f_i = pair.bearings_i[k].direction;
        let f_j = pair.bearings_j[k].direction;
        let value = v.dot(&crate::epipolar::epipolar_normal(&f_i, &f_j, &gamma));
        // vᵀ ∂n/∂δ at δ = 0: −vᵀ ⌊fᵢ⌋× γ ⌊fⱼ⌋× [J_b J_θ].
        let base = -(v.transpose() * manifold::skew(&f_i) * gamma.matrix() * manifold::skew(&f_j));
        let mut jacobian = RowVector6::zeros();
        jacobian
            .fixed_columns_mut::<3>(0)
            .copy_from(&(base * pair.camera.d_bias));
        jacobian
            .fixed_columns_mut::<3>(3)
            .copy_from(&(base * pair.camera.d_extrinsic));
        out.push(MapObservation {
            value,
            jacobian,
            variance: model.variances[k],
        });
    }
    out
}

/// MAP update from a window's pair observations.
///
/// Eigenvectors, gates, and variances are fixed at the prior mean; residuals
/// and Jacobians are refreshed at every filter iterate.
pub fn ieskf_update(
    prior: &PriorBelief,
    window: &mut WindowProblem,
    solver_config: &SolverConfig,
    refiner_config: &RefinerConfig,
) -> (PriorBelief, UpdateDiagnostics) {
    if window.pairs.is_empty() {
        return (prior.clone(), UpdateDiagnostics::default());
    }
    let mut models: Vec<Option<PairObservationModel>> = Vec::with_capacity(window.pairs.len());
    for pair in window.pairs.iter_mut() {
        let _ = refresh_pair(
            pair,
            &prior.state,
            &window.noise,
            solver_config.reintegration_threshold,
        );
        let model = build_observation_model(pair, solver_config).map(|mut m| {
            for v in m.variances.iter_mut() {
                *v *= refiner_config.reuse_inflation.max(1.0);
            }
            m
        });
        models.push(model);
    }

    let noise = window.noise;
    let threshold = solver_config.reintegration_threshold;
    let pairs = &mut window.pairs;
    let observe = |state: &CalibState| -> Vec<MapObservation> {
        let mut out = Vec::new();
        for (idx, pair) in pairs.iter_mut().enumerate() {
            let Some(model) = &models[idx] else { continue };
            if refresh_pair(pair, state, &noise, threshold).is_err() {
                continue;
            }
            out.extend(pair_observations(pair, model));
        }
        out
    };
    solve_map(prior, observe, refiner_config)
}

/// Per-window output of [`run_sequence`].
#[derive(Clone, Debug)]
pub struct WindowRecord {
    pub window_index: usize,
    /// Newest keyframe time.
    pub t: f64,
    pub belief: PriorBelief,
    pub parallax_deg: f64,
    /// The filter actually absorbed observations this window.
    pub updated: bool,
    /// Parallax hand-off triggered at this window.
    pub stopped: bool,
    pub extrinsic_error_deg: Option<f64>,
    /// b̂ − b_true when ground truth is available.
    pub bias_error: Option<Vector3<f64>>,
}

#[derive(Clone, Copy, Debug)]
pub struct SequenceConfig {
    pub window_size: usize,
    pub covisibility_min: usize,
    pub pixel_sigma: Option<f64>,
    pub solver: SolverConfig,
    pub refiner: RefinerConfig,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            window_size: 10,
            covisibility_min: 20,
            pixel_sigma: None,
            solver: SolverConfig::default(),
            refiner: RefinerConfig::default(),
        }
    }
}

/// Median rotation-compensated angle between first- and last-keyframe rays:
/// zero under pure rotation, grows with translation parallax.
pub fn median_parallax_deg(
    dataset: &Dataset,
    start: usize,
    window_size: usize,
    state: &CalibState,
) -> f64 {
    let first = &dataset.frames[start];
    let last = &dataset.frames[start + window_size - 1];
    let samples = dataset.imu_between(first.t, last.t);
    let Ok(pre) = integrate(samples, state.gyro_bias, &dataset.imu_noise) else {
        return 0.0;
    };
    let gamma_c = crate::preintegration::to_camera_frame(&pre, &state.extrinsic).delta;
    let mut map_last = std::collections::BTreeMap::new();
    for &(id, u, v) in &last.observations {
        map_last.insert(id, dataset.intrinsics.unproject(u, v));
    }
    let mut angles = Vec::new();
    for &(id, u, v) in &first.observations {
        if let Some(f_j) = map_last.get(&id) {
            let f_i = dataset.intrinsics.unproject(u, v);
            let rotated = gamma_c * *f_j;
            angles.push(f_i.dot(&rotated).clamp(-1.0, 1.0).acos().to_degrees());
        }
    }
    if angles.is_empty() {
        0.0
    } else {
        crate::stats::median(&angles)
    }
}

/// Runs the sliding-window refinement chain from a successful initial solve.
///
/// Windows advance one keyframe at a time. In prior mode each step fuses the
/// newest keyframe's pairs into the belief; in no-prior mode each window is
/// re-solved from scratch seeded at the previous estimate (the baseline the
/// filter is compared against). Stops at the parallax hand-off or the end of
/// the dataset.
pub fn run_sequence(
    dataset: &Dataset,
    init_window_start: usize,
    init: &SolveReport,
    config: &SequenceConfig,
) -> Result<Vec<WindowRecord>, RefinerError> {
    if !init.success {
        return Err(RefinerError::InitFailed);
    }
    let mut belief = PriorBelief::from_report(init).ok_or(RefinerError::InitFailed)?;
    let n = config.window_size;
    let mut records = Vec::new();
    let truth = dataset.truth.as_ref();

    let mut start = init_window_start + 1;
    while start + n <= dataset.frames.len() {
        let window_index = records.len();
        let times: Vec<f64> = (start - 1..start + n)
            .map(|k| dataset.frames[k].t)
            .collect();
        belief = propagate_prior(&belief, &times, &dataset.imu_noise, n);

        let mut updated = false;
        if config.refiner.use_prior {
            let mut wc = WindowConfig::new(start, n);
            wc.covisibility_min = config.covisibility_min;
            wc.pixel_sigma = config.pixel_sigma;
            wc.initial_bias = belief.state.gyro_bias;
            wc.max_pair_gap = config.refiner.new_pair_lookback.clamp(1, n - 1);
            let mut window = assemble_new_pairs(dataset, &wc)?;
            let (posterior, diag) =
                ieskf_update(&belief, &mut window, &config.solver, &config.refiner);
            updated = !diag.diverged && diag.observation_count > 0;
            belief = posterior;
        } else {
            let mut wc = WindowConfig::new(start, n);
            wc.covisibility_min = config.covisibility_min;
            wc.pixel_sigma = config.pixel_sigma;
            wc.initial_bias = belief.state.gyro_bias;
            match assemble_window(dataset, &wc) {
                Ok(mut window) => {
                    let report = solver::solve(&mut window, belief.state, &config.solver);
                    updated = report.converged || report.success;
                    let covariance = report.covariance.unwrap_or(belief.covariance);
                    belief = PriorBelief {
                        state: report.state,
                        covariance,
                    };
                }
                Err(WindowError::TooFewPairs(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }

        let parallax = median_parallax_deg(dataset, start, n, &belief.state);
        let stopped = parallax > config.refiner.parallax_stop_deg;
        let (ext_err, bias_err) = match truth {
            Some(t) => {
                let kf = start + n - 1;
                (
                    Some(belief.state.extrinsic.angle_to(&t.extrinsic).to_degrees()),
                    Some(belief.state.gyro_bias - t.bias[kf.min(t.bias.len() - 1)]),
                )
            }
            None => (None, None),
        };
        records.push(WindowRecord {
            window_index,
            t: dataset.frames[start + n - 1].t,
            belief: belief.clone(),
            parallax_deg: parallax,
            updated,
            stopped,
            extrinsic_error_deg: ext_err,
            bias_error: bias_err,
        });
        if stopped {
            break;
        }
        start += 1;
    }
    Ok(records)
}

/// CSV rows: window index, time, bias estimate, extrinsic error (when truth
/// is known), covariance diagonal, parallax, flags.
pub fn records_to_csv(records: &[WindowRecord]) -> String {
    let mut out = String::from(
        "# window,t,bgx,bgy,bgz,extrinsic_error_deg,p00,p11,p22,p33,p44,p55,parallax_deg,updated,stopped\n",
    );
    for r in records {
        let b = r.belief.state.gyro_bias;
        let p = &r.belief.covariance;
        let ext = r
            .extrinsic_error_deg
            .map(|e| format!("{e}"))
            .unwrap_or_else(|| "nan".to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.window_index,
            r.t,
            b.x,
            b.y,
            b.z,
            ext,
            p[(0, 0)],
            p[(1, 1)],
            p[(2, 2)],
            p[(3, 3)],
            p[(4, 4)],
            p[(5, 5)],
            r.parallax_deg,
            r.updated as u8,
            r.stopped as u8,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector6};

    fn prior() -> PriorBelief {
        PriorBelief {
            state: CalibState::new(
                Vector3::new(0.01, -0.02, 0.005),
                manifold::exp_so3(&Vector3::new(0.1, -0.2, 0.3)),
            ),
            covariance: Matrix6::identity() * 1e-4,
        }
    }

    #[test]
    fn propagate_zero_elapsed_is_identity() {
        let p = prior();
        let noise = ImuNoiseModel::euroc_defaults();
        let out = propagate_prior(&p, &[5.0], &noise, 10);
        assert_eq!(out.covariance, p.covariance);
    }

    #[test]
    fn propagate_touches_only_bias_block() {
        let p = prior();
        let noise = ImuNoiseModel::euroc_defaults();
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.25).collect();
        let out = propagate_prior(&p, &times, &noise, 10);
        let added = noise.sigma_bg * noise.sigma_bg * 0.25;
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i == j && i < 3 {
                    p.covariance[(i, j)] + added
                } else {
                    p.covariance[(i, j)]
                };
                assert_eq!(out.covariance[(i, j)].to_bits(), expected.to_bits());
            }
        }
        // N=10, uniform 0.25 s gaps: added diagonal is σ_bg² · 0.25 exactly.
        assert_eq!(out.covariance[(0, 0)], p.covariance[(0, 0)] + added);
    }

    #[test]
    fn propagate_never_shrinks_diagonal() {
        let p = prior();
        let noise = ImuNoiseModel::euroc_defaults();
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.3).collect();
        let out = propagate_prior(&p, &times, &noise, 10);
        for i in 0..6 {
            assert!(out.covariance[(i, i)] >= p.covariance[(i, i)]);
        }
    }

    #[test]
    fn no_observations_returns_prior_exactly() {
        let p = prior();
        let cfg = RefinerConfig::default();
        let (post, diag) = solve_map(&p, |_| Vec::new(), &cfg);
        assert_eq!(post.covariance, p.covariance);
        assert_eq!(post.state.gyro_bias, p.state.gyro_bias);
        assert!(!diag.diverged);
    }

    /// Linear-Gaussian surrogate: observations affine in the error state.
    fn linear_obs(
        rows: Vec<(RowVector6<f64>, f64, f64)>,
        reference: CalibState,
    ) -> impl FnMut(&CalibState) -> Vec<MapObservation> {
        move |state: &CalibState| {
            let dx = state.boxminus(&reference);
            rows.iter()
                .map(|(h, target, var)| MapObservation {
                    value: (h * dx)[(0, 0)] - target,
                    jacobian: *h,
                    variance: *var,
                })
                .collect()
        }
    }

    #[test]
    fn linear_case_contracts_and_adds_information() {
        let p = prior();
        let cfg = RefinerConfig::default();
        let mut rows = Vec::new();
        for i in 0..6 {
            let mut h = RowVector6::zeros();
            h[i] = 1.0;
            rows.push((h, 1e-3, 1e-6));
        }
        let (post, diag) = solve_map(&p, linear_obs(rows.clone(), p.state), &cfg);
        assert!(!diag.diverged);
        assert!(post.covariance.trace() <= p.covariance.trace());

        // Posterior information = prior information + observation information.
        let post_info = post.covariance.try_inverse().unwrap();
        let mut expected = p.covariance.try_inverse().unwrap();
        for (h, _, var) in &rows {
            expected += h.transpose() * *h / *var;
        }
        let rel = (post_info - expected).norm() / expected.norm();
        assert!(rel < 1e-8, "information mismatch {rel:.2e}");
    }

    #[test]
    fn linear_case_matches_batch_map() {
        let p = prior();
        let cfg = RefinerConfig::default();
        let mut rows = Vec::new();
        let seeds = [0.4, -0.7, 0.2, 0.9, -0.3, 0.6, 0.1, -0.5];
        for (i, s) in seeds.iter().enumerate() {
            let mut h = RowVector6::zeros();
            h[i % 6] = 1.0;
            h[(i + 2) % 6] = *s;
            rows.push((h, s * 2e-3, 4e-6));
        }
        let (post, _) = solve_map(&p, linear_obs(rows.clone(), p.state), &cfg);

        // Batch normal equations in the boxminus chart at the prior mean
        // (exact for the bias block, first-order for rotation; targets are
        // small so the chart linearization is exact to double precision).
        let p_inv = p.covariance.try_inverse().unwrap();
        let mut a = p_inv;
        let mut b = Vector6::zeros();
        for (h, target, var) in &rows {
            a += h.transpose() * *h / *var;
            b += h.transpose() * *target / *var;
        }
        let dx = a.cholesky().unwrap().solve(&b);
        let batch_state = p.state.boxplus(&dx);
        let diff = post.state.boxminus(&batch_state);
        assert!(diff.norm() < 1e-6, "state mismatch {:.2e}", diff.norm());
    }

    #[test]
    fn divergent_observations_return_prior() {
        let p = prior();
        let cfg = RefinerConfig {
            max_iters: 10,
            divergence_patience: 2,
            ..Default::default()
        };
        // Observation whose cost grows every iteration: value explodes with
        // distance from a far-away target in an inconsistent direction.
        let mut call = 0usize;
        let (post, diag) = solve_map(
            &p,
            move |_| {
                call += 1;
                let mut h = RowVector6::zeros();
                h[0] = 1.0;
                vec![MapObservation {
                    value: call as f64 * 10.0,
                    jacobian: h,
                    variance: 1e-8,
                }]
            },
            &cfg,
        );
        assert!(diag.diverged);
        assert_eq!(post.state.gyro_bias, p.state.gyro_bias);
        assert_eq!(post.covariance, p.covariance);
    }

    #[test]
    fn rotation3_helper_sanity() {
        // boxminus-chart linearity assumption used by the surrogates above.
        let s = prior().state;
        let mut d = Vector6::zeros();
        d[4] = 1e-4;
        let moved = s.boxplus(&d);
        assert!((moved.boxminus(&s) - d).norm() < 1e-12);
        let _ = Matrix3::<f64>::identity();
    }
}
