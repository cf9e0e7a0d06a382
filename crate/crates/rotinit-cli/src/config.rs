//! Key-value config loaders: scenarios, solver settings, experiment specs.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rotinit::epipolar::CameraIntrinsics;
use rotinit::kv::{KvError, KvFile};
use rotinit::manifold::Rotation;
use rotinit::preintegration::ImuNoiseModel;
use rotinit::sim::ScenarioConfig;
use rotinit::solver::{SolverConfig, WeightingMode};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &Path, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Loads a scenario from a key-value file, starting from defaults. Every key
/// is optional; unknown keys are rejected to catch typos.
pub fn scenario_from_file(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let kv = KvFile::load(path)?;
    scenario_from_kv(&kv, path)
}

pub fn scenario_from_kv(kv: &KvFile, path: &Path) -> Result<ScenarioConfig, ConfigError> {
    const KNOWN: &[&str] = &[
        "schema_version",
        "seed",
        "n_points",
        "duration",
        "pure_rotation_prefix",
        "pixel_noise",
        "sigma_g",
        "sigma_bg",
        "imu_rate",
        "keyframe_rate",
        "bias_x",
        "bias_y",
        "bias_z",
        "extrinsic_rotation",
        "extrinsic_offset_deg",
        "excitation",
        "translation_amplitude",
        "bias_random_walk",
        "mixed_excitation",
        "min_visible",
        "fx",
        "fy",
        "cx",
        "cy",
        "width",
        "height",
    ];
    for key in kv.keys() {
        if !KNOWN.contains(&key) {
            return Err(invalid(path, format!("unknown scenario key '{key}'")));
        }
    }
    let mut config = ScenarioConfig::default();
    if let Some(v) = kv.get_u64("seed")? {
        config.seed = v;
    }
    if let Some(v) = kv.get_usize("n_points")? {
        config.n_points = v;
    }
    if let Some(v) = kv.get_f64("duration")? {
        config.duration = v;
    }
    if let Some(v) = kv.get_f64("pure_rotation_prefix")? {
        config.pure_rotation_prefix = v;
    }
    if let Some(v) = kv.get_f64("pixel_noise")? {
        config.pixel_noise = v;
    }
    let sigma_g = kv.get_f64("sigma_g")?.unwrap_or(config.imu.sigma_g);
    let sigma_bg = kv.get_f64("sigma_bg")?.unwrap_or(config.imu.sigma_bg);
    if let Some(v) = kv.get_f64("imu_rate")? {
        config.imu_rate = v;
    }
    config.imu = ImuNoiseModel::new(sigma_g, sigma_bg, 1.0 / config.imu_rate)
        .map_err(|e| invalid(path, e.to_string()))?;
    if let Some(v) = kv.get_f64("keyframe_rate")? {
        config.keyframe_rate = v;
    }
    let bias = Vector3::new(
        kv.get_f64("bias_x")?.unwrap_or(config.gyro_bias.x),
        kv.get_f64("bias_y")?.unwrap_or(config.gyro_bias.y),
        kv.get_f64("bias_z")?.unwrap_or(config.gyro_bias.z),
    );
    config.gyro_bias = bias;
    if kv.contains("extrinsic_rotation") {
        let rot = kv.require_f64_list("extrinsic_rotation")?;
        if rot.len() != 9 {
            return Err(invalid(path, "extrinsic_rotation needs 9 entries"));
        }
        config.extrinsic = Rotation::from_matrix(Matrix3::from_row_slice(&rot))
            .map_err(|e| invalid(path, e.to_string()))?;
    }
    if let Some(v) = kv.get_f64("extrinsic_offset_deg")? {
        config.extrinsic_offset_deg = v;
    }
    if let Some(v) = kv.get_f64("excitation")? {
        config.excitation = v;
    }
    if let Some(v) = kv.get_f64("translation_amplitude")? {
        config.translation_amplitude = v;
    }
    if let Some(v) = kv.get_bool("bias_random_walk")? {
        config.bias_random_walk = v;
    }
    if let Some(v) = kv.get_bool("mixed_excitation")? {
        config.mixed_excitation = v;
    }
    if let Some(v) = kv.get_usize("min_visible")? {
        config.min_visible = v;
    }
    if kv.contains("fx") || kv.contains("fy") || kv.contains("cx") || kv.contains("cy") {
        let k = &config.intrinsics;
        config.intrinsics = CameraIntrinsics::new(
            kv.get_f64("fx")?.unwrap_or(k.fx),
            kv.get_f64("fy")?.unwrap_or(k.fy),
            kv.get_f64("cx")?.unwrap_or(k.cx),
            kv.get_f64("cy")?.unwrap_or(k.cy),
            kv.get_u64("width")?.map(|v| v as u32).unwrap_or(k.width),
            kv.get_u64("height")?.map(|v| v as u32).unwrap_or(k.height),
        )
        .map_err(|e| invalid(path, e.to_string()))?;
    }
    Ok(config)
}

/// Loads solver settings from a key-value file over the defaults.
pub fn solver_from_file(path: &Path) -> Result<SolverConfig, ConfigError> {
    let kv = KvFile::load(path)?;
    solver_from_kv(&kv, path)
}

pub fn solver_from_kv(kv: &KvFile, path: &Path) -> Result<SolverConfig, ConfigError> {
    const KNOWN: &[&str] = &[
        "schema_version",
        "mode",
        "max_loops",
        "lm_max_iters",
        "chi2_alpha",
        "epsilon_pass",
        "weight_clamp_lo",
        "weight_clamp_hi",
        "covisibility_min",
        "cauchy_scale",
        "reintegration_threshold",
        "cost_rel_tol",
        "sigma2_floor",
        "fisher_max_cond",
        "eigen_gap_rel",
    ];
    for key in kv.keys() {
        if !KNOWN.contains(&key) {
            return Err(invalid(path, format!("unknown solver key '{key}'")));
        }
    }
    let mut config = SolverConfig::default();
    if let Some(v) = kv.get_str("mode") {
        config.mode = v.parse::<WeightingMode>().map_err(|e| invalid(path, e))?;
    }
    if let Some(v) = kv.get_usize("max_loops")? {
        config.max_loops = v;
    }
    if let Some(v) = kv.get_usize("lm_max_iters")? {
        config.lm_max_iters = v;
    }
    if let Some(v) = kv.get_f64("chi2_alpha")? {
        config.chi2_alpha = v;
    }
    if let Some(v) = kv.get_f64("epsilon_pass")? {
        config.epsilon_pass = v;
    }
    if let Some(v) = kv.get_f64("weight_clamp_lo")? {
        config.weight_clamp.0 = v;
    }
    if let Some(v) = kv.get_f64("weight_clamp_hi")? {
        config.weight_clamp.1 = v;
    }
    if let Some(v) = kv.get_usize("covisibility_min")? {
        config.covisibility_min = v;
    }
    if let Some(v) = kv.get_f64("cauchy_scale")? {
        config.cauchy_scale = v;
    }
    if let Some(v) = kv.get_f64("reintegration_threshold")? {
        config.reintegration_threshold = v;
    }
    if let Some(v) = kv.get_f64("cost_rel_tol")? {
        config.cost_rel_tol = v;
    }
    if let Some(v) = kv.get_f64("sigma2_floor")? {
        config.sigma2_floor = v;
    }
    if let Some(v) = kv.get_f64("fisher_max_cond")? {
        config.fisher_max_cond = v;
    }
    if let Some(v) = kv.get_f64("eigen_gap_rel")? {
        config.eigen_gap_rel = v;
    }
    Ok(config)
}

/// A benchmark sweep: which segments to mint, which cells to run.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub seed: u64,
    /// 20 s segments sampled every `segment_stride` seconds from one long
    /// synthetic sequence (or from an ingested dataset).
    pub segments: usize,
    pub segment_seconds: f64,
    pub segment_stride: f64,
    /// Segments with less integrated rotation than this are skipped.
    pub min_excitation_deg: f64,
    pub window_sizes: Vec<usize>,
    pub deformations_deg: Vec<f64>,
    pub modes: Vec<WeightingMode>,
    pub repetitions: usize,
    /// Dataset directory to slice instead of synthesizing.
    pub dataset: Option<PathBuf>,
    /// Base scenario for the synthetic long sequence.
    pub scenario: ScenarioConfig,
    pub solver: SolverConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            segments: 20,
            segment_seconds: 20.0,
            segment_stride: 5.0,
            min_excitation_deg: 20.0,
            window_sizes: vec![10],
            deformations_deg: vec![10.0],
            modes: vec![WeightingMode::Combined],
            repetitions: 1,
            dataset: None,
            scenario: ScenarioConfig {
                pure_rotation_prefix: 0.0,
                mixed_excitation: true,
                excitation: 3.0,
                translation_amplitude: 0.03,
                n_points: 220,
                min_visible: 20,
                ..ScenarioConfig::default()
            },
            solver: SolverConfig::default(),
        }
    }
}

pub fn experiment_from_file(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let kv = KvFile::load(path)?;
    let mut spec = ExperimentSpec::default();
    const OWN: &[&str] = &[
        "schema_version",
        "seed",
        "segments",
        "segment_seconds",
        "segment_stride",
        "min_excitation_deg",
        "window_sizes",
        "deformations_deg",
        "modes",
        "repetitions",
        "dataset",
    ];
    // Remaining keys are forwarded to the scenario/solver loaders, which
    // validate them.
    let mut scenario_kv = String::new();
    let mut solver_kv = String::new();
    for key in kv.keys() {
        if OWN.contains(&key) {
            continue;
        }
        let line = format!("{key} = {}\n", kv.get_str(key).unwrap_or_default());
        if key.starts_with("solver_") {
            solver_kv.push_str(&line.replacen("solver_", "", 1));
        } else {
            scenario_kv.push_str(&line);
        }
    }
    let scenario_file =
        KvFile::parse(&scenario_kv, &format!("{} (scenario keys)", path.display()))?;
    spec.scenario = scenario_from_kv(&scenario_file, path)?;
    if spec.scenario.pure_rotation_prefix == ScenarioConfig::default().pure_rotation_prefix
        && !kv.contains("pure_rotation_prefix")
    {
        spec.scenario.pure_rotation_prefix = 0.0;
    }
    if !kv.contains("mixed_excitation") {
        spec.scenario.mixed_excitation = true;
    }
    if !kv.contains("n_points") {
        spec.scenario.n_points = 220;
    }
    if !kv.contains("excitation") {
        spec.scenario.excitation = 3.0;
    }
    if !kv.contains("translation_amplitude") {
        spec.scenario.translation_amplitude = 0.03;
    }
    let solver_file = KvFile::parse(&solver_kv, &format!("{} (solver keys)", path.display()))?;
    spec.solver = solver_from_kv(&solver_file, path)?;

    if let Some(v) = kv.get_u64("seed")? {
        spec.seed = v;
        spec.scenario.seed = v;
    }
    if let Some(v) = kv.get_usize("segments")? {
        spec.segments = v;
    }
    if let Some(v) = kv.get_f64("segment_seconds")? {
        spec.segment_seconds = v;
    }
    if let Some(v) = kv.get_f64("segment_stride")? {
        spec.segment_stride = v;
    }
    if let Some(v) = kv.get_f64("min_excitation_deg")? {
        spec.min_excitation_deg = v;
    }
    if kv.contains("window_sizes") {
        spec.window_sizes = kv
            .require_f64_list("window_sizes")?
            .into_iter()
            .map(|v| v as usize)
            .collect();
    }
    if kv.contains("deformations_deg") {
        spec.deformations_deg = kv.require_f64_list("deformations_deg")?;
    }
    if let Some(modes) = kv.get_str("modes") {
        spec.modes = modes
            .split_whitespace()
            .map(|m| m.parse::<WeightingMode>().map_err(|e| invalid(path, e)))
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = kv.get_usize("repetitions")? {
        spec.repetitions = v.max(1);
    }
    if let Some(v) = kv.get_str("dataset") {
        spec.dataset = Some(PathBuf::from(v));
    }
    if spec.window_sizes.is_empty() || spec.deformations_deg.is_empty() || spec.modes.is_empty() {
        return Err(invalid(
            path,
            "window_sizes, deformations_deg, and modes must be non-empty",
        ));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_defaults_and_overrides() {
        let kv = KvFile::parse("seed = 9\nduration = 12.5\nbias_x = 0.03\n", "t.cfg").unwrap();
        let s = scenario_from_kv(&kv, Path::new("t.cfg")).unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.duration, 12.5);
        assert_eq!(s.gyro_bias.x, 0.03);
        assert_eq!(s.keyframe_rate, 4.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        let kv = KvFile::parse("blah = 1\n", "t.cfg").unwrap();
        assert!(scenario_from_kv(&kv, Path::new("t.cfg")).is_err());
        let kv = KvFile::parse("mode = combined\ntypo = 2\n", "s.cfg").unwrap();
        assert!(solver_from_kv(&kv, Path::new("s.cfg")).is_err());
    }

    #[test]
    fn experiment_spec_parses_lists() {
        let dir = std::env::temp_dir().join(format!("rotinit-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("exp.cfg");
        std::fs::write(
            &path,
            "seed = 3\nsegments = 7\nwindow_sizes = 5 10 20\ndeformations_deg = 0 1 5 10 20\nmodes = combined lambda\nrepetitions = 2\nsolver_max_loops = 4\npixel_noise = 0.4\n",
        )
        .unwrap();
        let spec = experiment_from_file(&path).unwrap();
        assert_eq!(spec.seed, 3);
        assert_eq!(spec.segments, 7);
        assert_eq!(spec.window_sizes, vec![5, 10, 20]);
        assert_eq!(spec.deformations_deg.len(), 5);
        assert_eq!(spec.modes.len(), 2);
        assert_eq!(spec.repetitions, 2);
        assert_eq!(spec.solver.max_loops, 4);
        assert_eq!(spec.scenario.pixel_noise, 0.4);
        assert_eq!(spec.scenario.pure_rotation_prefix, 0.0);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
