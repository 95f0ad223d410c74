//! On-disk sequence formats.
//!
//! * scans: packed little-endian `f32` quadruples `(x, y, z, intensity)`
//! * labels: one little-endian `u32` per point, semantic id in the low 16
//!   bits and instance id in the high 16 bits
//! * poses: one line per scan, 12 floats, row-major `[R | t]` in the camera
//!   frame
//! * calibration: `key: v0 v1 ... v11` lines; one key holds the
//!   sensor-to-camera transform

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};
use crate::pose::Pose;

pub const SCAN_RECORD_BYTES: usize = 16;
pub const LABEL_RECORD_BYTES: usize = 4;

/// Default calibration key for the sensor-to-camera transform.
pub const DEFAULT_CALIB_KEY: &str = "Tr";

pub fn parse_scan(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let rem = bytes.len() % SCAN_RECORD_BYTES;
    if rem != 0 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset: (bytes.len() - rem) as u64,
            record_size: SCAN_RECORD_BYTES,
        });
    }
    let points = bytes
        .chunks_exact(SCAN_RECORD_BYTES)
        .map(|rec| {
            let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
            Point::new(f(0), f(1), f(2), f(3))
        })
        .collect::<Vec<_>>();
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("non-finite point at byte offset {}", i * SCAN_RECORD_BYTES),
        });
    }
    PointCloud::new(points)
}

pub fn encode_scan(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * SCAN_RECORD_BYTES);
    for p in cloud {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_scan(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_scan(&bytes, path)
}

pub fn write_scan(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_scan(cloud)).map_err(|e| Error::io(path, e))
}

/// Raw per-point label words.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelArray(pub Vec<u32>);

impl LabelArray {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn semantic(&self, i: usize) -> u16 {
        semantic_id(self.0[i])
    }

    pub fn instance(&self, i: usize) -> u16 {
        instance_id(self.0[i])
    }

    pub fn semantic_ids(&self) -> impl Iterator<Item = u16> + '_ {
        self.0.iter().map(|&l| semantic_id(l))
    }

    /// Labels must pair one-to-one with the scan's points.
    pub fn check_pairing(&self, cloud: &PointCloud) -> Result<()> {
        if self.len() != cloud.len() {
            return Err(Error::contract(format!(
                "label count {} does not match point count {}",
                self.len(),
                cloud.len()
            )));
        }
        Ok(())
    }
}

pub fn semantic_id(label: u32) -> u16 {
    (label & 0xFFFF) as u16
}

pub fn instance_id(label: u32) -> u16 {
    (label >> 16) as u16
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<LabelArray> {
    let rem = bytes.len() % LABEL_RECORD_BYTES;
    if rem != 0 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset: (bytes.len() - rem) as u64,
            record_size: LABEL_RECORD_BYTES,
        });
    }
    Ok(LabelArray(
        bytes
            .chunks_exact(LABEL_RECORD_BYTES)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .collect(),
    ))
}

pub fn encode_labels(labels: &LabelArray) -> Vec<u8> {
    labels.0.iter().flat_map(|l| l.to_le_bytes()).collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelArray> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&bytes, path)
}

pub fn write_labels(labels: &LabelArray, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_labels(labels)).map_err(|e| Error::io(path, e))
}

fn parse_floats(text: &str, path: &Path, line: usize) -> Result<[f64; 12]> {
    let mut vals = [0.0; 12];
    let mut n = 0;
    for tok in text.split_whitespace() {
        let v: f64 = tok.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("cannot parse {tok:?} as a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("non-finite value {tok:?}"),
            });
        }
        if n < 12 {
            vals[n] = v;
        }
        n += 1;
    }
    if n != 12 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("expected 12 values, found {n}"),
        });
    }
    Ok(vals)
}

fn pose_from_line(vals: &[f64; 12], path: &Path, line: usize) -> Result<Pose> {
    Pose::from_row_major_3x4(vals).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    })
}

/// Parses a pose file body (camera-frame poses). Blank lines are skipped.
pub fn parse_pose_lines(text: &str, path: &Path) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals = parse_floats(line, path, i + 1)?;
        poses.push(pose_from_line(&vals, path, i + 1)?);
    }
    Ok(poses)
}

/// Extracts the 3×4 transform stored under `key` from a calibration file body.
pub fn parse_calibration(text: &str, key: &str, path: &Path) -> Result<Pose> {
    for (i, line) in text.lines().enumerate() {
        let Some((k, rest)) = line.split_once(':') else {
            continue;
        };
        if k.trim() == key {
            let vals = parse_floats(rest, path, i + 1)?;
            return pose_from_line(&vals, path, i + 1);
        }
    }
    Err(Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("calibration key {key:?} not found"),
    })
}

/// Converts camera-frame poses into sensor-frame poses: `C⁻¹ · P · C`, where
/// `C` maps sensor coordinates into the camera frame.
pub fn camera_to_sensor_poses(camera_poses: &[Pose], sensor_to_camera: &Pose) -> Vec<Pose> {
    let c_inv = sensor_to_camera.inverse();
    camera_poses
        .iter()
        .map(|p| c_inv.compose(&p.compose(sensor_to_camera)))
        .collect()
}

/// Reads a pose file and its calibration, returning one sensor-frame world
/// pose per scan.
pub fn read_poses(
    poses_path: impl AsRef<Path>,
    calib_path: impl AsRef<Path>,
    calib_key: &str,
) -> Result<Vec<Pose>> {
    let (poses_path, calib_path) = (poses_path.as_ref(), calib_path.as_ref());
    let calib_text = fs::read_to_string(calib_path).map_err(|e| Error::io(calib_path, e))?;
    let calib = parse_calibration(&calib_text, calib_key, calib_path)?;
    let poses_text = fs::read_to_string(poses_path).map_err(|e| Error::io(poses_path, e))?;
    let poses = parse_pose_lines(&poses_text, poses_path)?;
    Ok(camera_to_sensor_poses(&poses, &calib))
}

pub fn format_pose_line(pose: &Pose) -> String {
    pose.to_row_major_3x4()
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Writes sensor-frame poses as camera-frame lines (`C · S · C⁻¹`) so that
/// [`read_poses`] with the same calibration returns them unchanged.
pub fn write_poses(
    sensor_poses: &[Pose],
    sensor_to_camera: &Pose,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let c_inv = sensor_to_camera.inverse();
    let mut out = String::new();
    for s in sensor_poses {
        out.push_str(&format_pose_line(
            &sensor_to_camera.compose(&s.compose(&c_inv)),
        ));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_calibration(sensor_to_camera: &Pose, key: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format!("{key}: {}\n", format_pose_line(sensor_to_camera));
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Which semantic ids count as moving, and which are movable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovingClassSpec {
    /// Semantic ids of moving instances.
    pub moving_class_ids: BTreeSet<u16>,
    /// Static ids of classes whose instances can move (parked cars, standing
    /// people, ...).
    pub movable_class_ids: BTreeSet<u16>,
    /// `(moving id, static counterpart)` pairs, used to turn ground truth into
    /// motion-agnostic semantic classes.
    pub counterparts: Vec<(u16, u16)>,
}

impl Default for MovingClassSpec {
    /// SemanticKITTI convention: 252..=259 are the moving variants of car,
    /// bicyclist, person, motorcyclist, on-rails, bus, truck and
    /// other-vehicle.
    fn default() -> Self {
        let counterparts = vec![
            (252, 10),
            (253, 31),
            (254, 30),
            (255, 32),
            (256, 16),
            (257, 13),
            (258, 18),
            (259, 20),
        ];
        Self {
            moving_class_ids: counterparts.iter().map(|&(m, _)| m).collect(),
            movable_class_ids: [10, 11, 13, 15, 16, 18, 20, 30, 31, 32]
                .into_iter()
                .collect(),
            counterparts,
        }
    }
}

impl MovingClassSpec {
    pub fn validate(&self) -> Result<()> {
        if self.moving_class_ids.is_empty() {
            return Err(Error::Config("moving class set is empty".into()));
        }
        if let Some(id) = self
            .moving_class_ids
            .intersection(&self.movable_class_ids)
            .next()
        {
            return Err(Error::Config(format!(
                "class {id} is listed as both moving and movable-static"
            )));
        }
        for &(m, s) in &self.counterparts {
            if !self.moving_class_ids.contains(&m) || self.moving_class_ids.contains(&s) {
                return Err(Error::Config(format!("bad counterpart pair ({m}, {s})")));
            }
        }
        Ok(())
    }

    pub fn is_moving(&self, semantic: u16) -> bool {
        self.moving_class_ids.contains(&semantic)
    }

    /// Movable in either state.
    pub fn is_movable(&self, semantic: u16) -> bool {
        self.movable_class_ids.contains(&semantic) || self.moving_class_ids.contains(&semantic)
    }

    /// Maps a moving id to its static counterpart; other ids pass through.
    pub fn static_class(&self, semantic: u16) -> u16 {
        self.counterparts
            .iter()
            .find(|&&(m, _)| m == semantic)
            .map_or(semantic, |&(_, s)| s)
    }
}

/// Binary moving (1) / static (0) label per point. Instance bits are ignored.
pub fn to_mos_labels(labels: &LabelArray, spec: &MovingClassSpec) -> Vec<u8> {
    labels
        .semantic_ids()
        .map(|s| spec.is_moving(s) as u8)
        .collect()
}

/// Motion-free semantic classes (moving ids folded into their static
/// counterparts), i.e. what a single-scan semantic segmenter would predict.
pub fn to_semantic_classes(labels: &LabelArray, spec: &MovingClassSpec) -> Vec<u16> {
    labels
        .semantic_ids()
        .map(|s| spec.static_class(s))
        .collect()
}

/// File locations for one sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceLayout {
    pub scan_dir: PathBuf,
    pub label_dir: Option<PathBuf>,
    pub poses: PathBuf,
    pub calib: PathBuf,
    pub calib_key: String,
}

impl SequenceLayout {
    /// Scan files sorted by name.
    pub fn scan_files(&self) -> Result<Vec<PathBuf>> {
        let dir = &self.scan_dir;
        let mut files = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect::<Vec<_>>();
        files.sort();
        Ok(files)
    }

    /// Label file paired with `scan`: same stem, `.label` extension.
    pub fn label_file(&self, scan: &Path) -> Option<PathBuf> {
        let dir = self.label_dir.as_ref()?;
        let stem = scan.file_stem()?;
        Some(dir.join(stem).with_extension("label"))
    }

    pub fn read_poses(&self) -> Result<Vec<Pose>> {
        read_poses(&self.poses, &self.calib, &self.calib_key)
    }
}
