//! Synthetic LiDAR sequences with exact poses and motion labels.
//!
//! Scenes are a bounded ground plane plus axis-aligned boxes, some of which
//! translate by a fixed displacement per scan. One ray is cast per
//! (ring, azimuth) cell from the sensor pose; the nearest hit becomes a
//! point in sensor coordinates and inherits the semantic label of the
//! surface it hit.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud};
use crate::dataset::LabelArray;
use crate::error::{Error, Result};
use crate::pose::Pose;

/// Default semantic ids (SemanticKITTI numbering).
pub const ROAD: u16 = 40;
pub const BUILDING: u16 = 50;
pub const MOVING_CAR: u16 = 252;

const MIN_HIT_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticBox {
    pub center: [f64; 3],
    pub size: [f64; 3],
    #[serde(default = "default_static_class")]
    pub class: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingBox {
    /// Center at scan 0.
    pub center: [f64; 3],
    pub size: [f64; 3],
    /// Displacement per scan, meters.
    pub velocity: [f64; 3],
    #[serde(default = "default_moving_class")]
    pub class: u16,
}

fn default_static_class() -> u16 {
    BUILDING
}

fn default_moving_class() -> u16 {
    MOVING_CAR
}

/// Ray layout: `rings` rows evenly spread over `[fov_down, fov_up]` and
/// `azimuth_steps` columns over a full turn, one ray per cell center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamPattern {
    pub rings: usize,
    pub azimuth_steps: usize,
    pub fov_up_deg: f64,
    pub fov_down_deg: f64,
}

impl Default for BeamPattern {
    fn default() -> Self {
        Self {
            rings: 64,
            azimuth_steps: 2048,
            fov_up_deg: 3.0,
            fov_down_deg: -25.0,
        }
    }
}

impl BeamPattern {
    /// Unit direction in the sensor frame for cell `(col, row)`.
    pub fn direction(&self, col: usize, row: usize) -> Vector3<f64> {
        let fov = (self.fov_up_deg - self.fov_down_deg).to_radians();
        let pitch = self.fov_up_deg.to_radians() - (row as f64 + 0.5) / self.rings as f64 * fov;
        let yaw =
            std::f64::consts::PI * (1.0 - 2.0 * (col as f64 + 0.5) / self.azimuth_steps as f64);
        Vector3::new(
            pitch.cos() * yaw.cos(),
            pitch.cos() * yaw.sin(),
            pitch.sin(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Half side length of the square ground plane centered on the world
    /// origin, meters. Zero disables the plane.
    pub ground_half_extent: f64,
    pub ground_height: f64,
    #[serde(default = "default_road")]
    pub ground_class: u16,
    pub static_boxes: Vec<StaticBox>,
    pub moving_boxes: Vec<MovingBox>,
    /// World pose of the sensor at each scan.
    pub trajectory: Vec<PoseRecord>,
    pub beams: BeamPattern,
    /// Gaussian range noise along each ray, meters.
    pub range_noise: f64,
    pub seed: u64,
}

fn default_road() -> u16 {
    ROAD
}

/// Serializable pose: row-major `[R | t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord(pub [f64; 12]);

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        PoseRecord(p.to_row_major_3x4())
    }
}

impl PoseRecord {
    pub fn to_pose(&self) -> Result<Pose> {
        Pose::from_row_major_3x4(&self.0)
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trajectory.len() < 2 {
            return Err(Error::Config("a scene needs at least two scans".into()));
        }
        let positive = |s: &[f64; 3]| s.iter().all(|&v| v > 0.0 && v.is_finite());
        if !self.static_boxes.iter().all(|b| positive(&b.size))
            || !self.moving_boxes.iter().all(|b| positive(&b.size))
        {
            return Err(Error::Config("box sizes must be positive".into()));
        }
        if self.ground_half_extent.is_nan()
            || self.ground_half_extent < 0.0
            || self.range_noise.is_nan()
            || self.range_noise < 0.0
        {
            return Err(Error::Config("extent and noise must be nonnegative".into()));
        }
        if self.beams.rings == 0
            || self.beams.azimuth_steps == 0
            || self.beams.fov_up_deg <= self.beams.fov_down_deg
        {
            return Err(Error::Config("invalid beam pattern".into()));
        }
        for p in &self.trajectory {
            p.to_pose()?;
        }
        Ok(())
    }

    pub fn scan_count(&self) -> usize {
        self.trajectory.len()
    }

    /// Sensor driving along +x at `speed` m/scan, `height` m above ground,
    /// past two buildings while a car crosses its path 22 m ahead. The car
    /// moves further than its own width every scan, so consecutive positions
    /// never overlap in the range image.
    pub fn street(scans: usize, seed: u64) -> Self {
        let height = 1.73;
        let speed = 0.5;
        let trajectory = (0..scans)
            .map(|i| PoseRecord::from(&Pose::from_translation(i as f64 * speed, 0.0, height)))
            .collect();
        Self {
            ground_half_extent: 200.0,
            ground_height: 0.0,
            ground_class: ROAD,
            static_boxes: vec![
                StaticBox {
                    center: [10.0, 14.0, 4.0],
                    size: [16.0, 6.0, 8.0],
                    class: BUILDING,
                },
                StaticBox {
                    center: [-6.0, -12.0, 3.0],
                    size: [10.0, 5.0, 6.0],
                    class: BUILDING,
                },
            ],
            moving_boxes: vec![MovingBox {
                center: [22.0, 10.35, 0.75],
                size: [1.0, 1.8, 1.5],
                velocity: [0.0, -2.3, 0.0],
                class: MOVING_CAR,
            }],
            trajectory,
            beams: BeamPattern::default(),
            range_noise: 0.0,
            seed,
        }
    }
}

/// Surface kinds a ray can hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Ground,
    Static(usize),
    Moving(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn from_center_size(center: Vector3<f64>, size: &[f64; 3]) -> Self {
        let half = Vector3::new(size[0], size[1], size[2]) * 0.5;
        Self {
            min: center - half,
            max: center + half,
        }
    }

    /// Entry distance of the ray, slab method.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[a];
            let mut t0 = (self.min[a] - origin[a]) * inv;
            let mut t1 = (self.max[a] - origin[a]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_near = t_near.max(t0);
            t_far = t_far.min(t1);
        }
        if t_near > t_far || t_far < MIN_HIT_DISTANCE {
            return None;
        }
        // Rays starting inside a box hit its far wall.
        Some(if t_near >= MIN_HIT_DISTANCE {
            t_near
        } else {
            t_far
        })
    }
}

/// World-frame geometry of one scan.
#[derive(Debug, Clone)]
pub struct SceneSnapshot {
    pub ground: Option<(f64, f64)>,
    pub statics: Vec<Aabb>,
    pub movers: Vec<Aabb>,
}

impl SceneSnapshot {
    pub fn at_scan(cfg: &SceneConfig, scan: usize) -> Self {
        let v = |a: &[f64; 3]| Vector3::new(a[0], a[1], a[2]);
        Self {
            ground: (cfg.ground_half_extent > 0.0)
                .then_some((cfg.ground_height, cfg.ground_half_extent)),
            statics: cfg
                .static_boxes
                .iter()
                .map(|b| Aabb::from_center_size(v(&b.center), &b.size))
                .collect(),
            movers: cfg
                .moving_boxes
                .iter()
                .map(|b| {
                    Aabb::from_center_size(v(&b.center) + v(&b.velocity) * scan as f64, &b.size)
                })
                .collect(),
        }
    }

    /// Nearest hit along the ray. Ties go to the earlier surface in the
    /// order ground, static boxes, moving boxes.
    pub fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, Surface)> {
        let mut best: Option<(f64, Surface)> = None;
        let mut consider = |t: Option<f64>, s: Surface| {
            if let Some(t) = t {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, s));
                }
            }
        };
        if let Some((height, half)) = self.ground {
            let t = (dir.z != 0.0)
                .then(|| (height - origin.z) / dir.z)
                .filter(|&t| t >= MIN_HIT_DISTANCE)
                .filter(|&t| {
                    let hit = origin + dir * t;
                    hit.x.abs() <= half && hit.y.abs() <= half
                });
            consider(t, Surface::Ground);
        }
        for (i, b) in self.statics.iter().enumerate() {
            consider(b.intersect(origin, dir), Surface::Static(i));
        }
        for (i, b) in self.movers.iter().enumerate() {
            consider(b.intersect(origin, dir), Surface::Moving(i));
        }
        best
    }
}

/// One generated scan.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScan {
    /// Points in the sensor frame.
    pub cloud: PointCloud,
    /// Semantic label per point (moving boxes carry their moving id).
    pub labels: LabelArray,
    /// 1 where the point lies on a moving box.
    pub moving: Vec<u8>,
    /// World pose of the sensor.
    pub pose: Pose,
    /// Ray cell `(col, row)` of each point.
    pub cells: Vec<(u32, u32)>,
}

pub fn generate(cfg: &SceneConfig) -> Result<Vec<SynthScan>> {
    cfg.validate()?;
    (0..cfg.scan_count())
        .map(|s| generate_scan(cfg, s))
        .collect()
}

pub fn generate_scan(cfg: &SceneConfig, scan: usize) -> Result<SynthScan> {
    let pose = cfg.trajectory[scan].to_pose()?;
    let scene = SceneSnapshot::at_scan(cfg, scan);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(scan as u64);
    let noise = Normal::new(0.0, cfg.range_noise).map_err(|e| Error::Config(e.to_string()))?;

    let origin = *pose.translation();
    let beams = &cfg.beams;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut moving = Vec::new();
    let mut cells = Vec::new();
    for row in 0..beams.rings {
        for col in 0..beams.azimuth_steps {
            let local = beams.direction(col, row);
            let world = pose.rotation() * local;
            let Some((t, surface)) = scene.cast(&origin, &world) else {
                continue;
            };
            let t = if cfg.range_noise > 0.0 {
                (t + noise.sample(&mut rng)).max(MIN_HIT_DISTANCE)
            } else {
                t
            };
            let p = local * t;
            let (class, is_moving, intensity) = match surface {
                Surface::Ground => (cfg.ground_class, false, 0.3),
                Surface::Static(i) => (cfg.static_boxes[i].class, false, 0.6),
                Surface::Moving(i) => (cfg.moving_boxes[i].class, true, 0.9),
            };
            points.push(Point::new(p.x as f32, p.y as f32, p.z as f32, intensity));
            labels.push(class as u32);
            moving.push(is_moving as u8);
            cells.push((col as u32, row as u32));
        }
    }
    Ok(SynthScan {
        cloud: PointCloud::new(points)?,
        labels: LabelArray(labels),
        moving,
        pose,
        cells,
    })
}

/// Adds independent Gaussian noise of standard deviation `sigma` (meters)
/// to each pose's translation.
pub fn perturb_translations(poses: &[Pose], sigma: f64, seed: u64) -> Result<Vec<Pose>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    poses
        .iter()
        .map(|p| {
            let dt = Vector3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
            Pose::new(*p.rotation(), p.translation() + dt)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scans: usize) -> SceneConfig {
        let mut cfg = SceneConfig::street(scans, 7);
        cfg.beams = BeamPattern {
            rings: 16,
            azimuth_steps: 256,
            fov_up_deg: 3.0,
            fov_down_deg: -25.0,
        };
        cfg
    }

    #[test]
    fn ground_only_is_static() {
        let mut cfg = small(2);
        cfg.static_boxes.clear();
        cfg.moving_boxes.clear();
        let scans = generate(&cfg).unwrap();
        for s in &scans {
            assert!(!s.cloud.is_empty());
            assert!(s.moving.iter().all(|&m| m == 0));
            assert!(s.labels.0.iter().all(|&l| l == ROAD as u32));
        }
    }

    #[test]
    fn moving_labels_match_moving_box() {
        let cfg = small(3);
        for s in generate(&cfg).unwrap() {
            assert!(s.moving.contains(&1));
            for (m, l) in s.moving.iter().zip(&s.labels.0) {
                assert_eq!(*m == 1, *l == MOVING_CAR as u32);
            }
        }
    }

    #[test]
    fn static_scene_repeats() {
        let mut cfg = small(2);
        cfg.moving_boxes[0].velocity = [0.0; 3];
        cfg.trajectory = vec![PoseRecord::from(&Pose::identity()); 2];
        let scans = generate(&cfg).unwrap();
        assert_eq!(scans[0].cloud, scans[1].cloud);
        assert_eq!(scans[0].labels, scans[1].labels);
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let mut cfg = small(2);
        cfg.range_noise = 0.05;
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let clean = generate(&small(2)).unwrap();
        assert_ne!(generate(&cfg).unwrap()[0].cloud, clean[0].cloud);
    }

    #[test]
    fn empty_scene_gives_empty_scans() {
        let mut cfg = small(2);
        cfg.ground_half_extent = 0.0;
        cfg.static_boxes.clear();
        cfg.moving_boxes.clear();
        assert!(generate(&cfg).unwrap().iter().all(|s| s.cloud.is_empty()));
    }

    #[test]
    fn rejects_short_trajectory() {
        let mut cfg = small(2);
        cfg.trajectory.truncate(1);
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn box_hit_from_inside_and_outside() {
        let b = Aabb::from_center_size(Vector3::new(5.0, 0.0, 0.0), &[2.0, 2.0, 2.0]);
        assert_eq!(b.intersect(&Vector3::zeros(), &Vector3::x()), Some(4.0));
        assert_eq!(b.intersect(&Vector3::zeros(), &-Vector3::x()), None);
        assert_eq!(
            b.intersect(&Vector3::new(5.0, 0.0, 0.0), &Vector3::x()),
            Some(1.0)
        );
        assert_eq!(
            b.intersect(&Vector3::new(0.0, 2.0, 0.0), &Vector3::x()),
            None
        );
    }
}
