//! Spherical projection of point clouds onto range images.
//!
//! For a point `(x, y, z)` with range `r`:
//!
//! ```text
//! yaw   = atan2(y, x)
//! pitch = asin(z / r)
//! u     = floor(0.5 · (1 − yaw/π) · W)          clamped to [0, W−1]
//! v     = floor((1 − (pitch − fov_down)/fov) · H)  clamped to [0, H−1]
//! ```
//!
//! Points whose pitch falls outside `[fov_down, fov_up]` get no pixel. When
//! several points land on one pixel, the one with the smallest range wins;
//! equal ranges go to the lowest point index.

use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    pub width: usize,
    pub height: usize,
    /// Upper edge of the vertical field of view, degrees.
    pub fov_up_deg: f64,
    /// Lower edge of the vertical field of view, degrees.
    pub fov_down_deg: f64,
    /// Points closer than this (meters) are skipped.
    pub min_range: f64,
    /// Range channel value of invalid pixels.
    pub invalid_range: f32,
    /// Value of the other channels at invalid pixels.
    pub invalid_fill: f32,
}

impl Default for ProjectionConfig {
    /// HDL-64E geometry: 64×2048, +3° / −25°.
    fn default() -> Self {
        Self {
            width: 2048,
            height: 64,
            fov_up_deg: 3.0,
            fov_down_deg: -25.0,
            min_range: 1e-6,
            invalid_range: -1.0,
            invalid_fill: 0.0,
        }
    }
}

impl ProjectionConfig {
    pub fn new(width: usize, height: usize, fov_up_deg: f64, fov_down_deg: f64) -> Result<Self> {
        let cfg = Self {
            width,
            height,
            fov_up_deg,
            fov_down_deg,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config(format!(
                "image size {}x{} must be positive",
                self.width, self.height
            )));
        }
        if u32::try_from(self.width * self.height).is_err() {
            return Err(Error::Config("image has too many pixels".into()));
        }
        if !(self.fov_up_deg.is_finite() && self.fov_down_deg.is_finite())
            || self.fov_up_deg <= self.fov_down_deg
        {
            return Err(Error::Config(format!(
                "fov_up ({}) must exceed fov_down ({})",
                self.fov_up_deg, self.fov_down_deg
            )));
        }
        if self.min_range.is_nan() || self.min_range < 0.0 {
            return Err(Error::Config("min_range must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn fov_up(&self) -> f64 {
        self.fov_up_deg.to_radians()
    }

    pub fn fov_down(&self) -> f64 {
        self.fov_down_deg.to_radians()
    }

    pub fn fov(&self) -> f64 {
        self.fov_up() - self.fov_down()
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Continuous image coordinates of `p`, or `None` for a degenerate
    /// (near-zero range) point.
    pub fn project_point(&self, p: &Point) -> Option<Projected> {
        let range = p.range();
        if range.is_nan() || range < self.min_range || range == 0.0 {
            return None;
        }
        let yaw = (p.y as f64).atan2(p.x as f64);
        let pitch = (p.z as f64 / range).clamp(-1.0, 1.0).asin();
        let (fov_up, fov_down) = (self.fov_up(), self.fov_down());
        let u = 0.5 * (1.0 - yaw / std::f64::consts::PI) * self.width as f64;
        let v = (1.0 - (pitch - fov_down) / (fov_up - fov_down)) * self.height as f64;
        Some(Projected {
            u,
            v,
            range,
            in_fov: pitch >= fov_down && pitch <= fov_up,
        })
    }

    /// Integer pixel for a projected point: floor, then clamp.
    pub fn pixel_of(&self, proj: &Projected) -> Option<(usize, usize)> {
        if !proj.in_fov {
            return None;
        }
        Some((
            clamp_floor(proj.u, self.width),
            clamp_floor(proj.v, self.height),
        ))
    }
}

fn clamp_floor(x: f64, n: usize) -> usize {
    let f = x.floor();
    if f <= 0.0 {
        0
    } else if f >= (n - 1) as f64 {
        n - 1
    } else {
        f as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected {
    /// Column before truncation.
    pub u: f64,
    /// Row before truncation.
    pub v: f64,
    pub range: f64,
    pub in_fov: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Range,
    X,
    Y,
    Z,
    Intensity,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::Range,
        Channel::X,
        Channel::Y,
        Channel::Z,
        Channel::Intensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Range => "range",
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Z => "z",
            Channel::Intensity => "intensity",
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown channel {s:?}")))
    }
}

/// H×W five-channel image. Pixel `(u, v)` lives at flat index `u + v·W`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    width: usize,
    height: usize,
    range: Vec<f32>,
    x: Vec<f32>,
    y: Vec<f32>,
    z: Vec<f32>,
    intensity: Vec<f32>,
    valid: Vec<bool>,
    source: Vec<Option<u32>>,
    source_len: usize,
}

impl RangeImage {
    /// All-invalid image using `cfg`'s size and fill values.
    pub fn blank(cfg: &ProjectionConfig) -> Self {
        Self::blank_with(cfg.width, cfg.height, cfg.invalid_range, cfg.invalid_fill)
    }

    pub fn blank_with(width: usize, height: usize, invalid_range: f32, fill: f32) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            range: vec![invalid_range; n],
            x: vec![fill; n],
            y: vec![fill; n],
            z: vec![fill; n],
            intensity: vec![fill; n],
            valid: vec![false; n],
            source: vec![None; n],
            source_len: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self, u: usize, v: usize) -> usize {
        u + v * self.width
    }

    pub fn channel(&self, c: Channel) -> &[f32] {
        match c {
            Channel::Range => &self.range,
            Channel::X => &self.x,
            Channel::Y => &self.y,
            Channel::Z => &self.z,
            Channel::Intensity => &self.intensity,
        }
    }

    pub fn range(&self) -> &[f32] {
        &self.range
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        self.valid[idx]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Index of the point that produced pixel `idx`, in the originating cloud.
    pub fn source_point(&self, idx: usize) -> Option<usize> {
        self.source[idx].map(|s| s as usize)
    }

    /// Number of points in the originating cloud.
    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn set_source_len(&mut self, n: usize) {
        self.source_len = n;
    }

    pub fn point_at(&self, idx: usize) -> Point {
        Point::new(self.x[idx], self.y[idx], self.z[idx], self.intensity[idx])
    }

    /// Writes a point into pixel `idx`, marking it valid.
    pub fn set_pixel(&mut self, idx: usize, p: &Point, source: Option<usize>) {
        self.range[idx] = p.range() as f32;
        self.x[idx] = p.x;
        self.y[idx] = p.y;
        self.z[idx] = p.z;
        self.intensity[idx] = p.intensity;
        self.valid[idx] = true;
        self.source[idx] = source.map(|s| s as u32);
        if let Some(s) = source {
            self.source_len = self.source_len.max(s + 1);
        }
    }

    pub fn same_shape(&self, other_w: usize, other_h: usize) -> bool {
        self.width == other_w && self.height == other_h
    }
}

/// Per-point projection result.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointPixelMap {
    /// `(u, v)` for every point inside the vertical field of view.
    pub pixels: Vec<Option<(u32, u32)>>,
    /// Continuous `(u, v)` before truncation; `None` for degenerate points.
    pub continuous: Vec<Option<(f64, f64)>>,
}

impl PointPixelMap {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Returns, for each of `n_targets` slots, the source with the smallest
/// `(range, source index)` among `candidates` of the form
/// `(target, range, source)`.
pub(crate) fn min_range_winners(
    n_targets: usize,
    candidates: impl IntoIterator<Item = (usize, f32, usize)>,
) -> Vec<Option<(f32, usize)>> {
    let mut best: Vec<Option<(f32, usize)>> = vec![None; n_targets];
    for (target, range, src) in candidates {
        let slot = &mut best[target];
        let better = match *slot {
            None => true,
            Some((r, s)) => range < r || (range == r && src < s),
        };
        if better {
            *slot = Some((range, src));
        }
    }
    best
}

pub fn spherical_project(
    cloud: &PointCloud,
    cfg: &ProjectionConfig,
) -> (RangeImage, PointPixelMap) {
    let n = cloud.len();
    let mut map = PointPixelMap {
        pixels: Vec::with_capacity(n),
        continuous: Vec::with_capacity(n),
    };
    let mut candidates = Vec::with_capacity(n);
    for (i, p) in cloud.iter().enumerate() {
        let proj = cfg.project_point(p);
        map.continuous.push(proj.map(|q| (q.u, q.v)));
        let pix = proj.as_ref().and_then(|q| cfg.pixel_of(q));
        map.pixels.push(pix.map(|(u, v)| (u as u32, v as u32)));
        if let Some((u, v)) = pix {
            candidates.push((u + v * cfg.width, p.range() as f32, i));
        }
    }

    let mut img = RangeImage::blank(cfg);
    for (idx, win) in min_range_winners(cfg.pixel_count(), candidates)
        .into_iter()
        .enumerate()
    {
        if let Some((_, src)) = win {
            img.set_pixel(idx, &cloud[src], Some(src));
        }
    }
    img.source_len = n;
    (img, map)
}

/// One point per valid pixel, in row-major pixel order, together with the
/// flat pixel index each point came from.
pub fn back_project(img: &RangeImage) -> (PointCloud, Vec<usize>) {
    let pixels: Vec<usize> = (0..img.len()).filter(|&i| img.valid[i]).collect();
    let points = pixels.iter().map(|&i| img.point_at(i)).collect();
    (
        PointCloud::new(points).expect("range image channels are finite"),
        pixels,
    )
}
