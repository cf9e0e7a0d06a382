//! On-disk dataset formats.
//!
//! A dataset directory holds:
//!
//! - `imu.csv` — `t_ns, wx, wy, wz[, ax, ay, az]` (accelerometer columns
//!   optional and ignored),
//! - `features.csv` — `t_ns, frame_id, feature_id, u, v`,
//! - `groundtruth.csv` — `t_ns, px, py, pz, qw, qx, qy, qz, bgx, bgy, bgz`
//!   (optional),
//! - `calib.cfg` — key-value calibration: intrinsics, the true extrinsic
//!   rotation (row-major matrix), noise densities, generator metadata.
//!
//! Floats are written in shortest-round-trip decimal so export → ingest is
//! bit-exact. [`ingest`] also accepts the EuRoC directory layout
//! (`[mav0/]imu0/data.csv`, `[mav0/]state_groundtruth_estimate0/data.csv`);
//! feature tracks still come from `features.csv` since the visual front-end
//! is outside this crate's scope.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::epipolar::CameraIntrinsics;
use crate::kv::{KvError, KvFile, KvWriter};
use crate::manifold::Rotation;
use crate::preintegration::{GyroSample, ImuNoiseModel};
use crate::sim::{Dataset, FrameFeatures, GroundTruth};

pub const CALIB_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing dataset file: {path}")]
    MissingFile { path: PathBuf },
    #[error("{path}:{line}: column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Calib(#[from] KvError),
    #[error("calibration: {0}")]
    BadCalib(String),
    #[error("dataset has no ground truth (required for this operation)")]
    NoGroundTruth,
}

fn write_file(path: &Path, contents: &str) -> Result<(), DatasetError> {
    let mut f = std::fs::File::create(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(contents.as_bytes())
        .map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(())
}

fn seconds_to_ns(t: f64) -> i64 {
    (t * 1e9).round() as i64
}

fn ns_to_seconds(ns: i64) -> f64 {
    ns as f64 * 1e-9
}

/// Writes a dataset directory (creates it if needed).
pub fn export(dataset: &Dataset, dir: &Path) -> Result<(), DatasetError> {
    std::fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let mut imu = String::from("# t_ns,wx,wy,wz\n");
    for s in &dataset.imu {
        imu.push_str(&format!(
            "{},{},{},{}\n",
            seconds_to_ns(s.t),
            s.omega.x,
            s.omega.y,
            s.omega.z
        ));
    }
    write_file(&dir.join("imu.csv"), &imu)?;

    let mut feat = String::from("# t_ns,frame_id,feature_id,u,v\n");
    for frame in &dataset.frames {
        for &(feature_id, u, v) in &frame.observations {
            feat.push_str(&format!(
                "{},{},{},{},{}\n",
                seconds_to_ns(frame.t),
                frame.frame_id,
                feature_id,
                u,
                v
            ));
        }
    }
    write_file(&dir.join("features.csv"), &feat)?;

    if let Some(truth) = &dataset.truth {
        let mut gt = String::from("# t_ns,px,py,pz,qw,qx,qy,qz,bgx,bgy,bgz\n");
        for (idx, t) in truth.keyframe_times.iter().enumerate() {
            let p = truth.positions[idx];
            let q = rotation_to_quaternion(&truth.orientations[idx]);
            let b = truth.bias[idx];
            gt.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                seconds_to_ns(*t),
                p.x,
                p.y,
                p.z,
                q[0],
                q[1],
                q[2],
                q[3],
                b.x,
                b.y,
                b.z
            ));
        }
        write_file(&dir.join("groundtruth.csv"), &gt)?;
    }

    let mut calib = KvWriter::new("camera/IMU calibration and generator metadata");
    calib.put("schema_version", CALIB_SCHEMA_VERSION);
    calib.put("fx", dataset.intrinsics.fx);
    calib.put("fy", dataset.intrinsics.fy);
    calib.put("cx", dataset.intrinsics.cx);
    calib.put("cy", dataset.intrinsics.cy);
    calib.put("width", dataset.intrinsics.width);
    calib.put("height", dataset.intrinsics.height);
    let m = dataset.extrinsic.matrix();
    let rows: Vec<f64> = (0..3)
        .flat_map(|r| (0..3).map(move |c| m[(r, c)]))
        .collect();
    calib.put_f64_list("extrinsic_rotation", &rows);
    calib.put("pixel_noise", dataset.pixel_noise);
    calib.put("sigma_g", dataset.imu_noise.sigma_g);
    calib.put("sigma_bg", dataset.imu_noise.sigma_bg);
    calib.put("imu_dt", dataset.imu_noise.dt);
    calib.put("extrinsic_offset_deg", dataset.extrinsic_offset_deg);
    calib.put("seed", dataset.seed);
    write_file(&dir.join("calib.cfg"), &calib.finish())
}

fn rotation_to_quaternion(r: &Rotation) -> [f64; 4] {
    let m = r.matrix();
    let trace = m.trace();
    let (w, x, y, z);
    if trace > 0.0 {
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
    [w, x, y, z]
}

fn quaternion_to_rotation(q: [f64; 4]) -> Rotation {
    let [w, x, y, z] = q;
    let n = (w * w + x * x + y * y + z * z).sqrt();
    let (w, x, y, z) = (w / n, x / n, y / n, z / n);
    Rotation::from_matrix_unchecked(Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ))
}

struct CsvReader {
    path: PathBuf,
    lines: Vec<(usize, String)>,
}

impl CsvReader {
    fn open(path: &Path) -> Result<Self, DatasetError> {
        if !path.exists() {
            return Err(DatasetError::MissingFile {
                path: path.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim().to_string()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Ok(Self {
            path: path.to_path_buf(),
            lines,
        })
    }

    fn rows(&self) -> impl Iterator<Item = (usize, Vec<&str>)> {
        self.lines
            .iter()
            .map(|(n, l)| (*n, l.split(',').map(str::trim).collect()))
    }

    fn parse<T: std::str::FromStr>(
        &self,
        line: usize,
        column: usize,
        token: &str,
    ) -> Result<T, DatasetError> {
        token.parse::<T>().map_err(|_| DatasetError::Parse {
            path: self.path.clone(),
            line,
            column,
            message: format!("cannot parse '{token}'"),
        })
    }

    fn need(&self, line: usize, row: &[&str], want: usize) -> Result<(), DatasetError> {
        if row.len() < want {
            return Err(DatasetError::Parse {
                path: self.path.clone(),
                line,
                column: row.len(),
                message: format!("expected at least {want} columns, found {}", row.len()),
            });
        }
        Ok(())
    }
}

fn read_imu_csv(path: &Path) -> Result<Vec<GyroSample>, DatasetError> {
    let reader = CsvReader::open(path)?;
    let mut samples = Vec::with_capacity(reader.lines.len());
    for (line, row) in reader.rows() {
        reader.need(line, &row, 4)?;
        let t_ns: i64 = reader.parse(line, 1, row[0])?;
        let wx: f64 = reader.parse(line, 2, row[1])?;
        let wy: f64 = reader.parse(line, 3, row[2])?;
        let wz: f64 = reader.parse(line, 4, row[3])?;
        samples.push(GyroSample {
            t: ns_to_seconds(t_ns),
            omega: Vector3::new(wx, wy, wz),
        });
    }
    Ok(samples)
}

fn read_features_csv(path: &Path) -> Result<Vec<FrameFeatures>, DatasetError> {
    let reader = CsvReader::open(path)?;
    let mut frames: BTreeMap<usize, FrameFeatures> = BTreeMap::new();
    for (line, row) in reader.rows() {
        reader.need(line, &row, 5)?;
        let t_ns: i64 = reader.parse(line, 1, row[0])?;
        let frame_id: usize = reader.parse(line, 2, row[1])?;
        let feature_id: u64 = reader.parse(line, 3, row[2])?;
        let u: f64 = reader.parse(line, 4, row[3])?;
        let v: f64 = reader.parse(line, 5, row[4])?;
        frames
            .entry(frame_id)
            .or_insert_with(|| FrameFeatures {
                frame_id,
                t: ns_to_seconds(t_ns),
                observations: Vec::new(),
            })
            .observations
            .push((feature_id, u, v));
    }
    let mut out: Vec<FrameFeatures> = frames.into_values().collect();
    for f in &mut out {
        f.observations.sort_by_key(|&(id, _, _)| id);
    }
    Ok(out)
}

fn read_groundtruth_csv(path: &Path, extrinsic: Rotation) -> Result<GroundTruth, DatasetError> {
    let reader = CsvReader::open(path)?;
    let mut truth = GroundTruth {
        keyframe_times: Vec::new(),
        orientations: Vec::new(),
        positions: Vec::new(),
        bias: Vec::new(),
        extrinsic,
    };
    for (line, row) in reader.rows() {
        reader.need(line, &row, 11)?;
        let t_ns: i64 = reader.parse(line, 1, row[0])?;
        let mut vals = [0.0f64; 10];
        for (i, v) in vals.iter_mut().enumerate() {
            *v = reader.parse(line, i + 2, row[i + 1])?;
        }
        truth.keyframe_times.push(ns_to_seconds(t_ns));
        truth
            .positions
            .push(Vector3::new(vals[0], vals[1], vals[2]));
        truth
            .orientations
            .push(quaternion_to_rotation([vals[3], vals[4], vals[5], vals[6]]));
        truth.bias.push(Vector3::new(vals[7], vals[8], vals[9]));
    }
    Ok(truth)
}

/// EuRoC ground-truth CSV: t, p(3), q(4, wxyz), v(3), b_w(3), b_a(3).
fn read_euroc_groundtruth(path: &Path, extrinsic: Rotation) -> Result<GroundTruth, DatasetError> {
    let reader = CsvReader::open(path)?;
    let mut truth = GroundTruth {
        keyframe_times: Vec::new(),
        orientations: Vec::new(),
        positions: Vec::new(),
        bias: Vec::new(),
        extrinsic,
    };
    for (line, row) in reader.rows() {
        reader.need(line, &row, 14)?;
        let t_ns: i64 = reader.parse(line, 1, row[0])?;
        let mut vals = [0.0f64; 13];
        for (i, v) in vals.iter_mut().enumerate() {
            *v = reader.parse(line, i + 2, row[i + 1])?;
        }
        truth.keyframe_times.push(ns_to_seconds(t_ns));
        truth
            .positions
            .push(Vector3::new(vals[0], vals[1], vals[2]));
        truth
            .orientations
            .push(quaternion_to_rotation([vals[3], vals[4], vals[5], vals[6]]));
        truth.bias.push(Vector3::new(vals[10], vals[11], vals[12]));
    }
    Ok(truth)
}

type CalibData = (CameraIntrinsics, Rotation, f64, ImuNoiseModel, f64, u64);

fn read_calib(path: &Path) -> Result<CalibData, DatasetError> {
    if !path.exists() {
        return Err(DatasetError::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let kv = KvFile::load(path)?;
    let intrinsics = CameraIntrinsics::new(
        kv.require_f64("fx")?,
        kv.require_f64("fy")?,
        kv.require_f64("cx")?,
        kv.require_f64("cy")?,
        kv.require_u64("width")? as u32,
        kv.require_u64("height")? as u32,
    )
    .map_err(|e| DatasetError::BadCalib(e.to_string()))?;
    let rot = kv.require_f64_list("extrinsic_rotation")?;
    if rot.len() != 9 {
        return Err(DatasetError::BadCalib(format!(
            "extrinsic_rotation must have 9 entries, found {}",
            rot.len()
        )));
    }
    let m = Matrix3::from_row_slice(&rot);
    let extrinsic = Rotation::from_matrix(m).map_err(|e| DatasetError::BadCalib(e.to_string()))?;
    let pixel_noise = kv.get_f64("pixel_noise")?.unwrap_or(0.5);
    let noise = ImuNoiseModel::new(
        kv.get_f64("sigma_g")?.unwrap_or(1.6968e-4),
        kv.get_f64("sigma_bg")?.unwrap_or(1.9393e-5),
        kv.get_f64("imu_dt")?.unwrap_or(1.0 / 200.0),
    )
    .map_err(|e| DatasetError::BadCalib(e.to_string()))?;
    let offset = kv.get_f64("extrinsic_offset_deg")?.unwrap_or(0.0);
    let seed = kv.get_u64("seed")?.unwrap_or(0);
    Ok((intrinsics, extrinsic, pixel_noise, noise, offset, seed))
}

/// Reads a dataset directory — either this crate's layout or EuRoC-style.
pub fn ingest(dir: &Path) -> Result<Dataset, DatasetError> {
    let (intrinsics, extrinsic, pixel_noise, imu_noise, offset, seed) =
        read_calib(&dir.join("calib.cfg"))?;

    // EuRoC layout marker: [mav0/]imu0/data.csv.
    let euroc_imu = [dir.join("mav0/imu0/data.csv"), dir.join("imu0/data.csv")]
        .into_iter()
        .find(|p| p.exists());

    let imu = match &euroc_imu {
        Some(path) => read_imu_csv(path)?,
        None => read_imu_csv(&dir.join("imu.csv"))?,
    };
    let frames = read_features_csv(&dir.join("features.csv"))?;

    let truth = if euroc_imu.is_some() {
        let gt_path = [
            dir.join("mav0/state_groundtruth_estimate0/data.csv"),
            dir.join("state_groundtruth_estimate0/data.csv"),
        ]
        .into_iter()
        .find(|p| p.exists());
        match gt_path {
            Some(p) => Some(read_euroc_groundtruth(&p, extrinsic)?),
            None => None,
        }
    } else {
        let gt = dir.join("groundtruth.csv");
        if gt.exists() {
            Some(read_groundtruth_csv(&gt, extrinsic)?)
        } else {
            None
        }
    };

    Ok(Dataset {
        imu,
        frames,
        intrinsics,
        extrinsic,
        pixel_noise,
        imu_noise,
        extrinsic_offset_deg: offset,
        seed,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate, ScenarioConfig};

    fn tmpdir(tag: &str) -> PathBuf {
        let dir =
            std::env::temp_dir().join(format!("rotinit-dataset-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn export_ingest_round_trip_is_bit_exact() {
        let config = ScenarioConfig {
            duration: 5.0,
            pure_rotation_prefix: 2.5,
            seed: 5,
            ..Default::default()
        };
        let data = generate(&config).unwrap();
        let dir = tmpdir("roundtrip");
        export(&data, &dir).unwrap();
        let back = ingest(&dir).unwrap();

        assert_eq!(data.imu.len(), back.imu.len());
        for (a, b) in data.imu.iter().zip(back.imu.iter()) {
            assert_eq!(a.omega.x.to_bits(), b.omega.x.to_bits());
            assert_eq!(a.omega.y.to_bits(), b.omega.y.to_bits());
            assert_eq!(a.omega.z.to_bits(), b.omega.z.to_bits());
        }
        assert_eq!(data.frames.len(), back.frames.len());
        for (fa, fb) in data.frames.iter().zip(back.frames.iter()) {
            assert_eq!(fa.frame_id, fb.frame_id);
            assert_eq!(fa.observations.len(), fb.observations.len());
            for (oa, ob) in fa.observations.iter().zip(fb.observations.iter()) {
                assert_eq!(oa.0, ob.0);
                assert_eq!(oa.1.to_bits(), ob.1.to_bits());
                assert_eq!(oa.2.to_bits(), ob.2.to_bits());
            }
        }
        let ma = data.extrinsic.matrix();
        let mb = back.extrinsic.matrix();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(ma[(r, c)].to_bits(), mb[(r, c)].to_bits());
            }
        }
        assert!(back.truth.is_some());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_imu_reports_path() {
        let dir = tmpdir("missing");
        let config = ScenarioConfig {
            duration: 2.0,
            pure_rotation_prefix: 1.0,
            ..Default::default()
        };
        let data = generate(&config).unwrap();
        export(&data, &dir).unwrap();
        std::fs::remove_file(dir.join("imu.csv")).unwrap();
        let err = ingest(&dir).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("imu.csv"), "{msg}");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn malformed_row_reports_line_and_column() {
        let dir = tmpdir("malformed");
        let config = ScenarioConfig {
            duration: 2.0,
            pure_rotation_prefix: 1.0,
            ..Default::default()
        };
        let data = generate(&config).unwrap();
        export(&data, &dir).unwrap();
        std::fs::write(dir.join("imu.csv"), "# t_ns,wx,wy,wz\n100,0.1,oops,0.3\n").unwrap();
        let err = ingest(&dir).unwrap_err();
        match err {
            DatasetError::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 3);
            }
            other => panic!("wrong error: {other}"),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn euroc_layout_fixture_parses() {
        let dir = tmpdir("euroc");
        std::fs::create_dir_all(dir.join("mav0/imu0")).unwrap();
        let mut imu = String::from(
            "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y,w_RS_S_z,a_RS_S_x,a_RS_S_y,a_RS_S_z\n",
        );
        for k in 0..10u64 {
            imu.push_str(&format!(
                "{},{},{},{},0.0,0.0,9.81\n",
                1403636579758555392u64 + k * 5_000_000,
                0.01 * k as f64,
                -0.02,
                0.3
            ));
        }
        std::fs::write(dir.join("mav0/imu0/data.csv"), imu).unwrap();
        std::fs::write(
            dir.join("features.csv"),
            "# t_ns,frame_id,feature_id,u,v\n1403636579758555392,0,7,100.5,200.25\n",
        )
        .unwrap();
        let mut calib = KvWriter::new("fixture");
        calib.put("schema_version", 1u64);
        calib.put("fx", 458.654);
        calib.put("fy", 457.296);
        calib.put("cx", 367.215);
        calib.put("cy", 248.375);
        calib.put("width", 752u32);
        calib.put("height", 480u32);
        calib.put_f64_list(
            "extrinsic_rotation",
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        );
        std::fs::write(dir.join("calib.cfg"), calib.finish()).unwrap();

        let data = ingest(&dir).unwrap();
        assert_eq!(data.imu.len(), 10);
        assert_eq!(data.frames.len(), 1);
        assert_eq!(data.frames[0].observations, vec![(7u64, 100.5, 200.25)]);
        assert!(data.truth.is_none());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
