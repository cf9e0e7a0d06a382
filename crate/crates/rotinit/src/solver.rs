//! Joint gyroscope-bias and extrinsic-orientation estimation.
//!
//! The window objective is Σ λ_min(M_ij) over keyframe pairs: each pair's
//! epipolar-normal matrix is built from the gyro-predicted relative rotation
//! corrected to first order in (δb, δθ), so the minimum eigenvalue couples
//! both unknowns without needing any translation. The solve runs as
//! iteratively reweighted least squares:
//!
//! - loop 0: unweighted residuals `e = √λ_min` under a Cauchy loss (the
//!   initial guess may be far off);
//! - loops ≥ 1: per-feature weights from the eigenvector-projected residual
//!   variance with a chi-square gate, bearings reweighted as `fⱼ′ = w fⱼ`,
//!   per-pair variances σ′²_λ propagated from bearing and preintegration
//!   covariances, Levenberg-Marquardt on the whitened residuals.
//!
//! The state is refolded between loops (reintegrating when the accumulated
//! bias step is large), which is what keeps the first-order corrections
//! honest far from the optimum. A pass-rate + conditioning gate decides
//! success and a Fisher-information covariance is reported on success.

use nalgebra::{Matrix3x6, Matrix6, RowVector6, Vector3, Vector6};
use thiserror::Error;

use crate::epipolar::{self, feature_jacobians, min_eigenpair, PairEigen, PairProblem};
use crate::manifold::{self, Rotation};
use crate::preintegration::{self, ImuNoiseModel, PreintegrationError};
use crate::stats;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("window needs at least 2 usable pairs, found {0}")]
    TooFewPairs(usize),
    #[error(transparent)]
    Preintegration(#[from] PreintegrationError),
}

/// The estimated unknowns: gyroscope bias and camera-from-IMU rotation.
#[derive(Clone, Copy, Debug)]
pub struct CalibState {
    /// rad/s.
    pub gyro_bias: Vector3<f64>,
    /// R_CI.
    pub extrinsic: Rotation,
}

impl CalibState {
    pub fn new(gyro_bias: Vector3<f64>, extrinsic: Rotation) -> Self {
        Self {
            gyro_bias,
            extrinsic,
        }
    }

    pub fn identity() -> Self {
        Self {
            gyro_bias: Vector3::zeros(),
            extrinsic: Rotation::identity(),
        }
    }

    /// Right-perturbation retraction: bias adds, extrinsic multiplies by
    /// Exp(δθ) on the right.
    pub fn boxplus(&self, delta: &Vector6<f64>) -> Self {
        Self {
            gyro_bias: self.gyro_bias + delta.fixed_rows::<3>(0).into_owned(),
            extrinsic: manifold::boxplus(&self.extrinsic, &delta.fixed_rows::<3>(3).into_owned()),
        }
    }

    /// Tangent difference `self ⊟ other` consistent with [`Self::boxplus`].
    pub fn boxminus(&self, other: &Self) -> Vector6<f64> {
        let mut out = Vector6::zeros();
        out.fixed_rows_mut::<3>(0)
            .copy_from(&(self.gyro_bias - other.gyro_bias));
        out.fixed_rows_mut::<3>(3)
            .copy_from(&manifold::boxminus(&self.extrinsic, &other.extrinsic));
        out
    }
}

/// Which parts of the weighting machinery run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightingMode {
    /// Plain eigenvalue minimization (Cauchy on the first loop only).
    None,
    /// Whiten pair residuals by the propagated variance σ²_λ.
    Lambda,
    /// Per-feature weights + chi-square gate, no pair whitening.
    FeaturePairs,
    /// Feature-pair weighting combined with σ′²_λ whitening (default).
    Combined,
}

impl WeightingMode {
    fn feature_weights(&self) -> bool {
        matches!(self, WeightingMode::FeaturePairs | WeightingMode::Combined)
    }
    fn lambda_whitening(&self) -> bool {
        matches!(self, WeightingMode::Lambda | WeightingMode::Combined)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            WeightingMode::None => "none",
            WeightingMode::Lambda => "lambda",
            WeightingMode::FeaturePairs => "fp",
            WeightingMode::Combined => "combined",
        }
    }
}

impl std::str::FromStr for WeightingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "lambda" => Ok(Self::Lambda),
            "fp" => Ok(Self::FeaturePairs),
            "combined" => Ok(Self::Combined),
            other => Err(format!(
                "unknown weighting mode '{other}' (none|lambda|fp|combined)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub mode: WeightingMode,
    /// IRLS reweighting loops.
    pub max_loops: usize,
    /// LM iterations per loop.
    pub lm_max_iters: usize,
    /// Chi-square gate significance (1 dof per scalar residual).
    pub chi2_alpha: f64,
    /// Failure gate: success needs pass rate ≥ this.
    pub epsilon_pass: f64,
    pub weight_clamp: (f64, f64),
    /// Minimum co-visible features for a pair to enter the window.
    pub covisibility_min: usize,
    /// Cauchy scale on median-normalized first-loop residuals.
    pub cauchy_scale: f64,
    /// Reintegrate when the accumulated bias update exceeds this (rad/s).
    pub reintegration_threshold: f64,
    /// Cross-loop relative improvement of Σ λ_min that counts as converged.
    pub cost_rel_tol: f64,
    /// Floor for σ²_λ.
    pub sigma2_floor: f64,
    /// Failure gate: success needs Fisher condition number below this.
    pub fisher_max_cond: f64,
    /// Relative eigengap below which a pair's FP reweighting is skipped
    /// (eigenvector direction unstable).
    pub eigen_gap_rel: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: WeightingMode::Combined,
            max_loops: 8,
            lm_max_iters: 40,
            chi2_alpha: 0.05,
            epsilon_pass: 0.8,
            weight_clamp: (1e-6, 1e6),
            covisibility_min: 20,
            cauchy_scale: 2.5,
            reintegration_threshold: 1e-3,
            cost_rel_tol: 1e-8,
            sigma2_floor: 1e-16,
            fisher_max_cond: 1e6,
            eigen_gap_rel: 1e-8,
        }
    }
}

/// A solver-ready sliding window.
#[derive(Clone, Debug)]
pub struct WindowProblem {
    pub keyframe_times: Vec<f64>,
    pub pairs: Vec<PairProblem>,
    pub noise: ImuNoiseModel,
}

impl WindowProblem {
    pub fn total_correspondences(&self) -> usize {
        self.pairs.iter().map(|p| p.len()).sum()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StageTiming {
    pub total_ms: f64,
    pub reintegration_ms: f64,
    pub weighting_ms: f64,
    pub lm_ms: f64,
}

/// Everything a caller needs to judge and consume a solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Did the IRLS loop reach its tolerance (vs running out of loops)?
    pub converged: bool,
    /// Failure-detection verdict (pass rate + observability).
    pub success: bool,
    pub state: CalibState,
    /// Fisher-information covariance over [b_g; θ_CI]; present on success.
    pub covariance: Option<Matrix6<f64>>,
    /// Chi-square pass rate over every correspondence in the final loop.
    pub pass_rate: f64,
    /// Condition number of the Fisher information.
    pub fisher_condition: f64,
    pub loops_run: usize,
    /// Unweighted Σ λ_min after each loop (the cross-loop progress metric).
    pub loop_costs: Vec<f64>,
    /// Accepted LM costs (loop-local weighted objective), one trace per loop.
    pub lm_cost_traces: Vec<Vec<f64>>,
    pub lm_iterations: Vec<usize>,
    pub timing: StageTiming,
    pub message: String,
}

/// Residual, Jacobian, and eigen state of one pair at a correction δ.
#[derive(Clone, Debug)]
pub struct PairEvaluation {
    /// e = √λ_min (of the weighted M when weights are active).
    pub residual: f64,
    /// ∂e/∂[δb; δθ], zeroed below the λ guard.
    pub jacobian: RowVector6<f64>,
    pub lambda: f64,
    pub eigvec: Vector3<f64>,
}

/// λ guard below which √λ derivatives are treated as zero.
const LAMBDA_GUARD: f64 = 1e-18;

/// Evaluates one pair's minimum-eigenvalue residual and its Jacobian at a
/// correction `(δb, δθ)` around the pair's current linearization.
///
/// The Jacobian uses the eigenvalue perturbation identity
/// `∂λ = vᵀ (∂M) v`, exact for simple eigenvalues.
pub fn evaluate_pair(
    pair: &PairProblem,
    delta: &Vector6<f64>,
    use_weights: bool,
) -> Result<PairEvaluation, epipolar::EpipolarError> {
    let delta_bias = delta.fixed_rows::<3>(0).into_owned();
    let delta_theta = delta.fixed_rows::<3>(3).into_owned();
    let m = pair.build_m(&delta_bias, &delta_theta, use_weights)?;
    let (lambda, v) = min_eigenpair(&m);
    let residual = lambda.max(0.0).sqrt();

    let mut jacobian = RowVector6::zeros();
    if lambda > LAMBDA_GUARD {
        // Correction chain: γ(δ) = γ̂ Exp(u), u = J_b δb + J_θ δθ, so
        // ∂(γ(δ) f̃ⱼ)/∂δ = −γ(δ) ⌊f̃ⱼ⌋× Jr(u) [J_b J_θ].
        let u = pair.camera.d_bias * delta_bias + pair.camera.d_extrinsic * delta_theta;
        let jr_u = manifold::right_jacobian(&u);
        let mut chain = Matrix3x6::zeros();
        chain
            .fixed_columns_mut::<3>(0)
            .copy_from(&(jr_u * pair.camera.d_bias));
        chain
            .fixed_columns_mut::<3>(3)
            .copy_from(&(jr_u * pair.camera.d_extrinsic));
        let gamma = pair.corrected_rotation(&delta_bias, &delta_theta);

        let mut dlambda = RowVector6::zeros();
        for k in 0..pair.len() {
            if !pair.inliers[k] {
                continue;
            }
            let w = if use_weights { pair.weights[k] } else { 1.0 };
            let f_j = pair.bearings_j[k].direction * w;
            let f_i = &pair.bearings_i[k].direction;
            let n = f_i.cross(&(gamma * f_j));
            let e_k = v.dot(&n);
            // vᵀ ∂n/∂δ = −vᵀ ⌊fᵢ⌋× γ ⌊f̃ⱼ⌋× chain
            let row =
                -(v.transpose() * manifold::skew(f_i) * gamma.matrix() * manifold::skew(&f_j))
                    * chain;
            dlambda += row * (2.0 * e_k);
        }
        jacobian = dlambda / (2.0 * residual);
    }

    Ok(PairEvaluation {
        residual,
        jacobian,
        lambda,
        eigvec: v,
    })
}

/// Propagated variance of the pair's √λ_min residual: first-order covariance
/// propagation through both bearing sets and the gyro preintegration,
/// floored at `floor`.
pub fn lambda_variance(pair: &PairProblem, use_weights: bool, floor: f64) -> f64 {
    let zero = Vector6::zeros();
    let Ok(eval) = evaluate_pair(pair, &zero, use_weights) else {
        return floor;
    };
    if eval.lambda <= LAMBDA_GUARD {
        return floor;
    }
    let gamma = pair.corrected_rotation(&Vector3::zeros(), &Vector3::zeros());
    let v = eval.eigvec;
    let inv_e = 1.0 / eval.residual;
    let r_ci = pair.camera.extrinsic.matrix();

    let mut var = 0.0;
    let mut d_gamma = nalgebra::RowVector3::<f64>::zeros();
    for k in 0..pair.len() {
        if !pair.inliers[k] {
            continue;
        }
        let w = if use_weights { pair.weights[k] } else { 1.0 };
        let f_i = pair.bearings_i[k].direction;
        let f_j = pair.bearings_j[k].direction * w;
        let n = f_i.cross(&(gamma * f_j));
        let e_k = v.dot(&n);
        let (d_fi, d_fj) = feature_jacobians(&v, &f_i, &f_j, &gamma);
        let d_fi = d_fi * (e_k * inv_e);
        let d_fj = d_fj * (e_k * inv_e);
        let cov_i = pair.bearings_i[k].covariance;
        let cov_j = pair.bearings_j[k].covariance * (w * w);
        var += (d_fi * cov_i * d_fi.transpose())[(0, 0)];
        var += (d_fj * cov_j * d_fj.transpose())[(0, 0)];
        // ∂e/∂γᴵ accumulates across features (one preintegration term).
        d_gamma +=
            -(v.transpose() * manifold::skew(&f_i) * gamma.matrix() * manifold::skew(&f_j) * r_ci)
                * (e_k * inv_e);
    }
    var += (d_gamma * pair.imu.covariance * d_gamma.transpose())[(0, 0)];
    var.max(floor)
}

/// Per-pair gate outcome.
#[derive(Clone, Copy, Debug, Default)]
pub struct GateStats {
    pub passed: usize,
    pub total: usize,
    /// Pair left untouched because its eigengap was too small.
    pub skipped_degenerate: bool,
}

/// Feature-pair weights and chi-square gate: per-correspondence residual
/// `eᵏ = vᵀ nᵏ` with variance from the two bearing covariances; weights
/// `w = 1/σ` (clamped), inlier iff `e²/σ² ≤ χ²₁(1−α)`.
///
/// The eigenvector comes from the unweighted M over the previous inlier set;
/// if the two smallest eigenvalues are too close the eigenvector direction
/// is unstable and the pair's weights are left as they were.
pub fn fp_weights(pair: &mut PairProblem, config: &SolverConfig) -> GateStats {
    let zero_b = Vector3::zeros();
    let m = match pair.build_m(&zero_b, &zero_b, false) {
        Ok(m) => m,
        Err(_) => {
            return GateStats {
                passed: 0,
                total: pair.len(),
                skipped_degenerate: false,
            };
        }
    };
    let (lambda, v) = min_eigenpair(&m);
    let eigs = nalgebra::SymmetricEigen::new(m).eigenvalues;
    let mut sorted = [eigs[0], eigs[1], eigs[2]];
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let gap = sorted[1] - sorted[0];
    if gap < config.eigen_gap_rel * m.trace().max(1e-300) {
        let passed = pair.active_count();
        return GateStats {
            passed,
            total: pair.len(),
            skipped_degenerate: true,
        };
    }
    pair.eigen = Some(PairEigen {
        m,
        lambda_min: lambda,
        eigvec: v,
    });

    let gamma = pair.corrected_rotation(&zero_b, &zero_b);
    let gate = stats::chi2_quantile(1.0 - config.chi2_alpha, 1);
    let (w_lo, w_hi) = config.weight_clamp;
    let mut passed = 0;
    for k in 0..pair.len() {
        let f_i = pair.bearings_i[k].direction;
        let f_j = pair.bearings_j[k].direction;
        let n = epipolar::epipolar_normal(&f_i, &f_j, &gamma);
        let e_k = v.dot(&n);
        let (d_fi, d_fj) = feature_jacobians(&v, &f_i, &f_j, &gamma);
        let var = (d_fi * pair.bearings_i[k].covariance * d_fi.transpose())[(0, 0)]
            + (d_fj * pair.bearings_j[k].covariance * d_fj.transpose())[(0, 0)];
        let var = var.max(1e-24);
        let inlier = e_k * e_k / var <= gate;
        pair.inliers[k] = inlier;
        pair.weights[k] = (1.0 / var.sqrt()).clamp(w_lo, w_hi);
        if inlier {
            passed += 1;
        }
    }
    GateStats {
        passed,
        total: pair.len(),
        skipped_degenerate: false,
    }
}

/// Strict pass-rate comparator of the failure-detection rule.
pub fn pass_gate(passed: usize, total: usize, epsilon: f64) -> bool {
    if total == 0 {
        return false;
    }
    passed as f64 / total as f64 >= epsilon
}

/// Fisher information of the window at the current linearization, from the
/// fine-grained residual form: per-correspondence scalars `eᵏ = vᵀ nᵏ`
/// (eigenvector fixed per pair) with their propagated variances. The
/// pair-level √λ scalars under-represent the information by roughly the
/// correspondence count — the estimator demonstrably reaches the
/// fine-grained bound, and the reported covariance has to match that.
fn fisher_information(pairs: &[PairProblem], active: &[bool]) -> Matrix6<f64> {
    let zero = Vector3::zeros();
    // Bearing-reuse deflation: a frame's pixels feed every pair it belongs
    // to, so summing pair informations as if independent overcounts by the
    // frame multiplicity. Deflate each pair by its frames' mean multiplicity.
    let mut multiplicity: std::collections::BTreeMap<usize, f64> =
        std::collections::BTreeMap::new();
    for (idx, pair) in pairs.iter().enumerate() {
        if active[idx] {
            *multiplicity.entry(pair.frame_i).or_insert(0.0) += 1.0;
            *multiplicity.entry(pair.frame_j).or_insert(0.0) += 1.0;
        }
    }
    let mut info = Matrix6::zeros();
    for (idx, pair) in pairs.iter().enumerate() {
        if !active[idx] {
            continue;
        }
        let reuse = 0.5
            * (multiplicity.get(&pair.frame_i).copied().unwrap_or(1.0)
                + multiplicity.get(&pair.frame_j).copied().unwrap_or(1.0));
        let Ok(m) = pair.build_m(&zero, &zero, false) else {
            continue;
        };
        let (_, v) = min_eigenpair(&m);
        let gamma = pair.corrected_rotation(&zero, &zero);
        for k in 0..pair.len() {
            if !pair.inliers[k] {
                continue;
            }
            let f_i = pair.bearings_i[k].direction;
            let f_j = pair.bearings_j[k].direction;
            let (d_fi, d_fj) = feature_jacobians(&v, &f_i, &f_j, &gamma);
            let var = (d_fi * pair.bearings_i[k].covariance * d_fi.transpose())[(0, 0)]
                + (d_fj * pair.bearings_j[k].covariance * d_fj.transpose())[(0, 0)];
            let var = var.max(1e-24);
            let base =
                -(v.transpose() * manifold::skew(&f_i) * gamma.matrix() * manifold::skew(&f_j));
            let mut h = RowVector6::zeros();
            h.fixed_columns_mut::<3>(0)
                .copy_from(&(base * pair.camera.d_bias));
            h.fixed_columns_mut::<3>(3)
                .copy_from(&(base * pair.camera.d_extrinsic));
            info += h.transpose() * h / (var * reuse.max(1.0));
        }
    }
    info
}

/// Inverts the Fisher information. Returns the covariance and the condition
/// number; `None` when the information is singular or indefinite.
pub fn fisher_covariance(info: &Matrix6<f64>) -> Option<(Matrix6<f64>, f64)> {
    let sym = (info + info.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if min <= 0.0 || !min.is_finite() {
        return None;
    }
    let cond = max / min;
    let mut cov = Matrix6::zeros();
    for i in 0..6 {
        let col = eig.eigenvectors.column(i);
        cov += col * col.transpose() / eig.eigenvalues[i];
    }
    Some((cov, cond))
}

/// Rebuilds a pair's camera-frame linearization at `state`.
///
/// Reintegrates the gyro stream when the bias moved more than `threshold`
/// from the integration point, otherwise shifts the preintegration to first
/// order. Returns whether a reintegration ran.
pub fn refresh_pair(
    pair: &mut PairProblem,
    state: &CalibState,
    noise: &ImuNoiseModel,
    threshold: f64,
) -> Result<bool, PreintegrationError> {
    let shift = state.gyro_bias - pair.imu.bias;
    let mut reintegrated = false;
    if shift.norm() > threshold {
        pair.imu = preintegration::integrate(&pair.samples, state.gyro_bias, noise)?;
        reintegrated = true;
    }
    let shift = state.gyro_bias - pair.imu.bias;
    let mut effective = pair.imu.clone();
    if shift.norm() > 0.0 {
        effective.delta = manifold::boxplus(&effective.delta, &(effective.d_bias * shift));
    }
    pair.camera = preintegration::to_camera_frame(&effective, &state.extrinsic);
    Ok(reintegrated)
}

struct LmOutcome {
    delta: Vector6<f64>,
    accepted_costs: Vec<f64>,
    iterations: usize,
}

/// Levenberg-Marquardt over the window's whitened pair residuals.
///
/// `robust_scale`: Some(median) enables the Cauchy loss on residuals
/// normalized by that scale (first IRLS loop only).
fn lm_minimize(
    pairs: &[PairProblem],
    active: &[bool],
    sigma: &[f64],
    use_weights: bool,
    robust_scale: Option<f64>,
    config: &SolverConfig,
) -> LmOutcome {
    let cauchy_c = config.cauchy_scale;
    let eval_cost = |delta: &Vector6<f64>| -> f64 {
        let mut cost = 0.0;
        for (idx, pair) in pairs.iter().enumerate() {
            if !active[idx] {
                continue;
            }
            if let Ok(eval) = evaluate_pair(pair, delta, use_weights) {
                let r = eval.residual / sigma[idx];
                match robust_scale {
                    Some(s) => {
                        let rn = r / s;
                        cost += cauchy_c * cauchy_c * (1.0 + rn * rn / (cauchy_c * cauchy_c)).ln();
                    }
                    None => cost += r * r,
                }
            }
        }
        cost
    };

    let mut delta = Vector6::zeros();
    let mut cost = eval_cost(&delta);
    let mut accepted_costs = vec![cost];
    let mut mu = 0.0;
    let mut iterations = 0;

    for _ in 0..config.lm_max_iters {
        iterations += 1;
        let mut h = Matrix6::zeros();
        let mut g = Vector6::zeros();
        for (idx, pair) in pairs.iter().enumerate() {
            if !active[idx] {
                continue;
            }
            let Ok(eval) = evaluate_pair(pair, &delta, use_weights) else {
                continue;
            };
            let mut r = eval.residual / sigma[idx];
            let mut j = eval.jacobian / sigma[idx];
            if let Some(s) = robust_scale {
                // Triggs correction, first order: scale row by √ρ′.
                let rn = r / s;
                let w = 1.0 / (1.0 + rn * rn / (cauchy_c * cauchy_c));
                let sw = w.sqrt();
                r *= sw;
                j *= sw;
            }
            h += j.transpose() * j;
            g += (j * r).transpose();
        }
        let diag_max = (0..6).map(|i| h[(i, i)]).fold(0.0f64, f64::max);
        if diag_max <= 0.0 {
            break;
        }
        if mu == 0.0 {
            mu = 1e-4;
        }
        let mut stepped = false;
        while mu <= 1e12 {
            // Marquardt scaling: damp each axis by its own curvature so the
            // weakly observed extrinsic directions are not frozen by the
            // much stiffer bias directions.
            let mut damped = h;
            for i in 0..6 {
                damped[(i, i)] += mu * h[(i, i)].max(1e-12 * diag_max);
            }
            let Some(chol) = damped.cholesky() else {
                mu *= 4.0;
                continue;
            };
            let step = chol.solve(&(-g));
            let trial = delta + step;
            let trial_cost = eval_cost(&trial);
            if trial_cost < cost {
                let improvement = cost - trial_cost;
                delta = trial;
                cost = trial_cost;
                accepted_costs.push(cost);
                mu = (mu / 3.0).max(1e-12);
                stepped = true;
                if step.norm() < 1e-12 || improvement < 1e-12 * cost.max(1e-300) {
                    return LmOutcome {
                        delta,
                        accepted_costs,
                        iterations,
                    };
                }
                break;
            }
            mu *= 4.0;
        }
        if !stepped {
            break;
        }
    }
    LmOutcome {
        delta,
        accepted_costs,
        iterations,
    }
}

/// Median unweighted pair residual at the pairs' current linearization —
/// an outlier-insensitive score for comparing candidate states.
fn median_pair_residual(pairs: &[PairProblem]) -> f64 {
    let mut residuals = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let mut clean = pair.clone();
        clean.inliers = vec![true; pair.len()];
        if let Ok(eval) = evaluate_pair(&clean, &Vector6::zeros(), false) {
            residuals.push(eval.residual);
        }
    }
    if residuals.is_empty() {
        f64::INFINITY
    } else {
        stats::median(&residuals)
    }
}

/// Unweighted window objective Σ λ_min over all correspondences: the
/// cross-loop progress metric (per-loop weighted costs are not comparable).
fn unweighted_cost(pairs: &[PairProblem]) -> f64 {
    let mut cost = 0.0;
    for pair in pairs {
        let mut clean = pair.clone();
        clean.inliers = vec![true; pair.len()];
        if let Ok(m) = clean.build_m(&Vector3::zeros(), &Vector3::zeros(), false) {
            cost += min_eigenpair(&m).0.max(0.0);
        }
    }
    cost
}

/// Runs the full IRLS solve on a window.
pub fn solve(window: &mut WindowProblem, init: CalibState, config: &SolverConfig) -> SolveReport {
    let t_start = std::time::Instant::now();
    let mut timing = StageTiming::default();
    let mut state = init;
    let mut message = String::new();

    let n_pairs = window.pairs.len();
    let mut active = vec![true; n_pairs];
    let mut sigma = vec![1.0f64; n_pairs];
    let mut loop_costs = Vec::new();
    let mut lm_cost_traces = Vec::new();
    let mut lm_iterations = Vec::new();
    let mut converged = false;
    let mut last_cost = f64::INFINITY;
    let mut loops_run = 0;
    let mut final_gate: Option<(usize, usize)> = None;

    for pair in window.pairs.iter_mut() {
        pair.weights = vec![1.0; pair.len()];
        pair.inliers = vec![true; pair.len()];
    }

    for loop_idx in 0..config.max_loops {
        loops_run = loop_idx + 1;
        // Relinearize at the folded state.
        let t0 = std::time::Instant::now();
        let mut reint = false;
        for pair in window.pairs.iter_mut() {
            match refresh_pair(pair, &state, &window.noise, config.reintegration_threshold) {
                Ok(r) => reint |= r,
                Err(e) => {
                    message = format!("reintegration failed: {e}");
                }
            }
        }
        if reint {
            timing.reintegration_ms += t0.elapsed().as_secs_f64() * 1e3;
        }

        let mut weighted = loop_idx > 0 && config.mode.feature_weights();
        let t_weight = std::time::Instant::now();
        if loop_idx > 0 {
            if config.mode.feature_weights() {
                let mut passed = 0;
                let mut total = 0;
                for pair in window.pairs.iter_mut() {
                    let gs = fp_weights(pair, config);
                    passed += gs.passed;
                    total += gs.total;
                }
                final_gate = Some((passed, total));
                for (idx, pair) in window.pairs.iter().enumerate() {
                    active[idx] = pair.active_count() >= epipolar::MIN_PAIR_CORRESPONDENCES;
                }
                if active.iter().filter(|&&a| a).count() < 2 {
                    // Gate collapse mid-IRLS: either the state is still far
                    // off or the data is bad. Keep iterating unweighted —
                    // the final gate still decides success.
                    message = format!(
                        "gate collapsed at loop {loop_idx}; continuing unweighted {message}"
                    );
                    for (idx, pair) in window.pairs.iter_mut().enumerate() {
                        pair.inliers = vec![true; pair.len()];
                        pair.weights = vec![1.0; pair.len()];
                        active[idx] = pair.len() >= epipolar::MIN_PAIR_CORRESPONDENCES;
                        sigma[idx] = 1.0;
                    }
                    weighted = false;
                }
            }
            if (weighted || !config.mode.feature_weights()) && config.mode.lambda_whitening() {
                for (idx, pair) in window.pairs.iter_mut().enumerate() {
                    if active[idx] {
                        let var = lambda_variance(pair, weighted, config.sigma2_floor);
                        pair.sigma2_lambda = var;
                        sigma[idx] = var.sqrt();
                    }
                }
            }
        }
        timing.weighting_ms += t_weight.elapsed().as_secs_f64() * 1e3;

        if active.iter().filter(|&&a| a).count() < 2 {
            timing.total_ms = t_start.elapsed().as_secs_f64() * 1e3;
            return SolveReport {
                converged: false,
                success: false,
                state,
                covariance: None,
                pass_rate: final_gate.map(|(p, t)| p as f64 / t as f64).unwrap_or(0.0),
                fisher_condition: f64::INFINITY,
                loops_run,
                loop_costs,
                lm_cost_traces,
                lm_iterations,
                timing,
                message: format!("degenerate window: fewer than 2 usable pairs {message}"),
            };
        }

        // First loop: Cauchy robust loss on median-normalized residuals.
        let robust_scale = if loop_idx == 0 {
            let mut residuals = Vec::new();
            for (idx, pair) in window.pairs.iter().enumerate() {
                if !active[idx] {
                    continue;
                }
                if let Ok(eval) = evaluate_pair(pair, &Vector6::zeros(), false) {
                    residuals.push(eval.residual);
                }
            }
            let med = if residuals.is_empty() {
                1.0
            } else {
                stats::median(&residuals)
            };
            Some(if med > 1e-12 { med } else { 1.0 })
        } else {
            None
        };

        let t_lm = std::time::Instant::now();
        let outcome = lm_minimize(
            &window.pairs,
            &active,
            &sigma,
            weighted,
            robust_scale,
            config,
        );
        let mut best_delta = outcome.delta;
        let mut accepted = outcome.accepted_costs;
        let mut iterations = outcome.iterations;
        if loop_idx == 0 {
            // The robust loss can carve spurious basins into clean data; a
            // quadratic arm from the same start covers that case. Keep the
            // arm whose folded state explains the majority of pairs better
            // (median pair residual — insensitive to genuine outliers).
            let quad = lm_minimize(&window.pairs, &active, &sigma, weighted, None, config);
            let score = |delta: &Vector6<f64>| {
                let candidate = state.boxplus(delta);
                let mut pairs = window.pairs.clone();
                for pair in pairs.iter_mut() {
                    let _ = refresh_pair(pair, &candidate, &window.noise, f64::INFINITY);
                }
                median_pair_residual(&pairs)
            };
            if score(&quad.delta) < score(&best_delta) {
                best_delta = quad.delta;
                accepted = quad.accepted_costs;
                iterations = quad.iterations;
            }
        }
        timing.lm_ms += t_lm.elapsed().as_secs_f64() * 1e3;
        lm_cost_traces.push(accepted);
        lm_iterations.push(iterations);

        state = state.boxplus(&best_delta);
        for pair in window.pairs.iter_mut() {
            // Fold the state into the linearization (no reintegration here;
            // the next loop decides that).
            let _ = refresh_pair(pair, &state, &window.noise, f64::INFINITY);
        }
        let cost = unweighted_cost(&window.pairs);
        loop_costs.push(cost);

        // Sub-machine total cost: nothing left to minimize (an e of 1e-10
        // rad across every pair is far below any measurement floor).
        if cost < 1e-20 {
            converged = true;
            break;
        }
        if loop_idx > 0 && last_cost.is_finite() {
            // Signed: a loop that no longer decreases the underlying
            // objective (weight-induced jitter included) is converged.
            let drop = last_cost - cost;
            if drop < config.cost_rel_tol * last_cost.max(1e-300) {
                converged = true;
                break;
            }
        }
        last_cost = cost;
    }
    if window.pairs.is_empty() {
        converged = false;
    }

    // Final gate, always evaluated (diagnostically for non-FP modes).
    let mut passed = 0;
    let mut total = 0;
    {
        let gate_cfg = SolverConfig {
            mode: WeightingMode::FeaturePairs,
            ..*config
        };
        for pair in window.pairs.iter_mut() {
            let gs = fp_weights(pair, &gate_cfg);
            passed += gs.passed;
            total += gs.total;
        }
    }
    let pass_rate = if total > 0 {
        passed as f64 / total as f64
    } else {
        0.0
    };

    if config.mode.lambda_whitening() {
        let use_weights = config.mode.feature_weights();
        for (idx, pair) in window.pairs.iter_mut().enumerate() {
            if active[idx] {
                pair.sigma2_lambda = lambda_variance(pair, use_weights, config.sigma2_floor);
            }
        }
    }
    let info = fisher_information(&window.pairs, &active);
    let (covariance, fisher_condition) = match fisher_covariance(&info) {
        Some((cov, cond)) => (Some(cov), cond),
        None => (None, f64::INFINITY),
    };

    let success = pass_gate(passed, total, config.epsilon_pass)
        && fisher_condition <= config.fisher_max_cond
        && covariance.is_some();

    timing.total_ms = t_start.elapsed().as_secs_f64() * 1e3;
    SolveReport {
        converged,
        success,
        state,
        covariance: if success { covariance } else { None },
        pass_rate,
        fisher_condition,
        loops_run,
        loop_costs,
        lm_cost_traces,
        lm_iterations,
        timing,
        message,
    }
}
