//! 8-bit renderings of range images, residuals, MOS masks and association
//! maps. Invalid pixels are black.

use crate::association::AssociationMap;
use crate::error::{Error, Result};
use crate::mos::MovingMask;
use crate::projection::{Channel, RangeImage};
use crate::residual::ResidualImage;

/// Row-major RGB, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn black(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn pixel(&self, idx: usize) -> [u8; 3] {
        [
            self.data[3 * idx],
            self.data[3 * idx + 1],
            self.data[3 * idx + 2],
        ]
    }

    pub fn set(&mut self, idx: usize, rgb: [u8; 3]) {
        self.data[3 * idx..3 * idx + 3].copy_from_slice(&rgb);
    }

    pub fn to_rgba(&self) -> Vec<u8> {
        self.data
            .chunks_exact(3)
            .flat_map(|c| [c[0], c[1], c[2], 255])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Stretch the valid values' min..max onto 0..255.
    MinMax,
    /// Clip to `lo..hi`, then stretch.
    Fixed { lo: f32, hi: f32 },
}

/// Bounds actually used to scale an image; written next to rendered files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f32,
    pub hi: f32,
}

impl Bounds {
    pub fn sidecar(&self, what: &str) -> String {
        format!("quantity={what}\nlo={}\nhi={}\n", self.lo, self.hi)
    }
}

fn bounds_of(values: &[f32], valid: &[bool], norm: Normalization) -> Bounds {
    match norm {
        Normalization::Fixed { lo, hi } => Bounds { lo, hi },
        Normalization::MinMax => {
            let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
            for (&v, &ok) in values.iter().zip(valid) {
                if ok {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if lo > hi {
                Bounds { lo: 0.0, hi: 1.0 }
            } else {
                Bounds { lo, hi }
            }
        }
    }
}

/// Valid pixels map to 1..=255 so that they stay distinguishable from
/// invalid (0) ones.
fn gray(v: f32, b: Bounds) -> u8 {
    let span = b.hi - b.lo;
    let t = if span > 0.0 {
        ((v - b.lo) / span).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (1.0 + t * 254.0).round() as u8
}

pub fn render_values(
    width: usize,
    height: usize,
    values: &[f32],
    valid: &[bool],
    norm: Normalization,
) -> (RgbImage, Bounds) {
    let b = bounds_of(values, valid, norm);
    let mut img = RgbImage::black(width, height);
    for i in 0..width * height {
        if valid[i] {
            let g = gray(values[i], b);
            img.set(i, [g, g, g]);
        }
    }
    (img, b)
}

pub fn render_channel(
    img: &RangeImage,
    channel: Channel,
    norm: Normalization,
) -> (RgbImage, Bounds) {
    render_values(
        img.width(),
        img.height(),
        img.channel(channel),
        img.valid(),
        norm,
    )
}

/// Residuals clipped at `clip`.
pub fn render_residual(res: &ResidualImage, clip: f32) -> (RgbImage, Bounds) {
    render_values(
        res.width(),
        res.height(),
        res.values(),
        res.valid(),
        Normalization::Fixed { lo: 0.0, hi: clip },
    )
}

pub const MOVING_RED: [u8; 3] = [255, 0, 0];

/// Grayscale range with moving pixels painted red.
pub fn render_labels(img: &RangeImage, mask: &MovingMask) -> Result<(RgbImage, Bounds)> {
    if !img.same_shape(mask.width, mask.height) {
        return Err(Error::contract("mask does not match range image"));
    }
    let (mut out, b) = render_channel(img, Channel::Range, Normalization::MinMax);
    for i in 0..img.len() {
        if mask.moving[i] == 1 && img.is_valid(i) {
            out.set(i, MOVING_RED);
        }
    }
    Ok((out, b))
}

/// Present entries colored by target pixel: red = target column, green =
/// target row, blue = 255. Absent entries are black.
pub fn render_association(assoc: &AssociationMap) -> RgbImage {
    let (w, h) = (assoc.width(), assoc.height());
    let scale = |x: usize, n: usize| {
        if n <= 1 {
            0
        } else {
            ((x as f64 / (n - 1) as f64) * 255.0).round() as u8
        }
    };
    let mut out = RgbImage::black(w, h);
    for i in 0..assoc.len() {
        if let Some((u, v)) = assoc.target_pixel(i) {
            out.set(i, [scale(u, w), scale(v, h), 255]);
        }
    }
    out
}
