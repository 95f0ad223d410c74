//! Adjacent scan association.
//!
//! A previous range image is lifted back to 3D, carried into the current
//! sensor frame with the relative pose, and projected again with the current
//! geometry. The result is a reprojected range image plus an index map that
//! tells, for every previous pixel, which current pixel its point lands on.
//! Per-pixel features or labels of the previous scan are then scattered
//! through that map.

use std::io::{Read, Write};

use crate::cloud::transform_cloud;
use crate::error::{Error, Result};
use crate::pose::Pose;
use crate::projection::{
    back_project, min_range_winners, spherical_project, ProjectionConfig, RangeImage,
};

/// For each source pixel, the flat index `u0 + v0·W` of the current-frame
/// pixel its transformed point projects to.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMap {
    width: usize,
    height: usize,
    entries: Vec<Option<u32>>,
    transformed_range: Vec<f32>,
}

/// How absent entries are encoded on export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsentEncoding {
    /// `-1`; unambiguous.
    #[default]
    NegativeOne,
    /// `0`, which collides with pixel `(0, 0)`. Only for comparison with
    /// tooling that expects it.
    Zero,
}

impl AbsentEncoding {
    fn value(self) -> i32 {
        match self {
            AbsentEncoding::NegativeOne => -1,
            AbsentEncoding::Zero => 0,
        }
    }
}

impl AssociationMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            entries: vec![None; width * height],
            transformed_range: vec![-1.0; width * height],
        }
    }

    /// Builds a map from explicit entries. Entries must be `< width·height`
    /// and present entries need a finite, nonnegative range.
    pub fn from_parts(
        width: usize,
        height: usize,
        entries: Vec<Option<u32>>,
        transformed_range: Vec<f32>,
    ) -> Result<Self> {
        let n = width * height;
        if entries.len() != n || transformed_range.len() != n {
            return Err(Error::contract(format!(
                "association map buffers must hold {n} entries"
            )));
        }
        for (i, e) in entries.iter().enumerate() {
            if let Some(t) = e {
                if *t as usize >= n {
                    return Err(Error::contract(format!("entry {i} = {t} is out of bounds")));
                }
                let r = transformed_range[i];
                if !(r.is_finite() && r >= 0.0) {
                    return Err(Error::contract(format!("entry {i} has invalid range {r}")));
                }
            }
        }
        Ok(Self {
            width,
            height,
            entries,
            transformed_range,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, idx: usize) -> Option<usize> {
        self.entries[idx].map(|e| e as usize)
    }

    pub fn entries(&self) -> &[Option<u32>] {
        &self.entries
    }

    /// Decoded `(u0, v0)` of the entry at `idx`.
    pub fn target_pixel(&self, idx: usize) -> Option<(usize, usize)> {
        self.entry(idx).map(|e| (e % self.width, e / self.width))
    }

    pub fn transformed_range(&self) -> &[f32] {
        &self.transformed_range
    }

    pub fn present_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    /// Row-major little-endian `i32` per pixel.
    pub fn encode(&self, absent: AbsentEncoding) -> Vec<u8> {
        self.entries
            .iter()
            .flat_map(|e| e.map_or(absent.value(), |v| v as i32).to_le_bytes())
            .collect()
    }

    /// Inverse of [`AssociationMap::encode`] with [`AbsentEncoding::NegativeOne`].
    /// The transformed ranges are not part of the file and come back as 0.
    pub fn decode(bytes: &[u8], width: usize, height: usize) -> Result<Self> {
        let n = width * height;
        if bytes.len() != n * 4 {
            return Err(Error::contract(format!(
                "association file has {} bytes, expected {}",
                bytes.len(),
                n * 4
            )));
        }
        let mut entries = Vec::with_capacity(n);
        for (i, b) in bytes.chunks_exact(4).enumerate() {
            let v = i32::from_le_bytes(b.try_into().unwrap());
            entries.push(match v {
                -1 => None,
                v if v >= 0 && (v as usize) < n => Some(v as u32),
                v => {
                    return Err(Error::contract(format!("entry {i} = {v} is out of range")));
                }
            });
        }
        let transformed_range = entries
            .iter()
            .map(|e| if e.is_some() { 0.0 } else { -1.0 })
            .collect();
        Ok(Self {
            width,
            height,
            entries,
            transformed_range,
        })
    }

    pub fn write_to(&self, mut w: impl Write, absent: AbsentEncoding) -> std::io::Result<()> {
        w.write_all(&self.encode(absent))
    }

    pub fn read_from(mut r: impl Read, width: usize, height: usize) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io("<association stream>", e))?;
        Self::decode(&bytes, width, height)
    }
}

/// A per-pixel feature image with `channels` values per pixel, stored
/// pixel-major (`data[idx·C + c]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
    valid: Vec<bool>,
}

impl FeatureImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if channels == 0 {
            return Err(Error::contract("feature image needs at least one channel"));
        }
        let n = width * height;
        if data.len() != n * channels || valid.len() != n {
            return Err(Error::contract(format!(
                "feature buffers do not match {width}x{height}x{channels}"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            valid,
        })
    }

    /// All-invalid, zero-filled image.
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels: channels.max(1),
            data: vec![0.0; width * height * channels.max(1)],
            valid: vec![false; width * height],
        }
    }

    /// Stacks the five range image channels.
    pub fn from_range_image(img: &RangeImage) -> Self {
        use crate::projection::Channel;
        let n = img.len();
        let mut data = Vec::with_capacity(n * 5);
        for i in 0..n {
            for c in Channel::ALL {
                data.push(img.channel(c)[i]);
            }
        }
        Self {
            width: img.width(),
            height: img.height(),
            channels: 5,
            data,
            valid: img.valid().to_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn pixel(&self, idx: usize) -> &[f32] {
        &self.data[idx * self.channels..(idx + 1) * self.channels]
    }
}

/// Winner selection for a scatter: for every target pixel, the source pixel
/// that writes it. Computed once, applicable to any per-pixel payload.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPlan {
    width: usize,
    height: usize,
    winners: Vec<Option<u32>>,
}

impl ScatterPlan {
    /// Sources mapping to the same target compete on transformed range,
    /// then on source index. Sources with `source_valid[p] == false` do not
    /// take part.
    pub fn new(assoc: &AssociationMap, source_valid: Option<&[bool]>) -> Result<Self> {
        if let Some(valid) = source_valid {
            if valid.len() != assoc.len() {
                return Err(Error::contract(
                    "validity mask does not match association map",
                ));
            }
        }
        let candidates = assoc
            .entries
            .iter()
            .enumerate()
            .filter(|&(p, _)| source_valid.is_none_or(|v| v[p]))
            .filter_map(|(p, e)| e.map(|t| (t as usize, assoc.transformed_range[p], p)));
        let winners = min_range_winners(assoc.len(), candidates)
            .into_iter()
            .map(|w| w.map(|(_, src)| src as u32))
            .collect();
        Ok(Self {
            width: assoc.width,
            height: assoc.height,
            winners,
        })
    }

    pub fn source_of(&self, target: usize) -> Option<usize> {
        self.winners[target].map(|s| s as usize)
    }

    pub fn winners(&self) -> &[Option<u32>] {
        &self.winners
    }

    /// Gathers one value per target pixel; unfilled targets get `fill`.
    pub fn apply<T: Copy>(&self, source: &[T], fill: T) -> (Vec<T>, Vec<bool>) {
        assert_eq!(source.len(), self.winners.len());
        let values = self
            .winners
            .iter()
            .map(|w| w.map_or(fill, |s| source[s as usize]))
            .collect();
        let valid = self.winners.iter().map(Option::is_some).collect();
        (values, valid)
    }
}

/// Moves previous-frame features into the current frame. Conflicts go to the
/// source with the smallest transformed range; unmapped pixels stay invalid
/// and zero.
pub fn scatter_features(feat: &FeatureImage, assoc: &AssociationMap) -> Result<FeatureImage> {
    if feat.width != assoc.width || feat.height != assoc.height {
        return Err(Error::contract(format!(
            "feature image {}x{} does not match association map {}x{}",
            feat.width, feat.height, assoc.width, assoc.height
        )));
    }
    let plan = ScatterPlan::new(assoc, Some(&feat.valid))?;
    let c = feat.channels;
    let mut out = FeatureImage::zeros(feat.width, feat.height, c);
    for (target, w) in plan.winners.iter().enumerate() {
        if let Some(src) = *w {
            let src = src as usize;
            out.data[target * c..(target + 1) * c].copy_from_slice(feat.pixel(src));
            out.valid[target] = true;
        }
    }
    Ok(out)
}

/// Transforms the points of `prev_img` by `prev_to_current` and projects them
/// with `cfg`. Returns the reprojected image (whose source indices refer to
/// the previous image's valid pixels in row-major order) and the index map.
pub fn reproject_previous(
    prev_img: &RangeImage,
    prev_to_current: &Pose,
    cfg: &ProjectionConfig,
) -> Result<(RangeImage, AssociationMap)> {
    if !prev_img.same_shape(cfg.width, cfg.height) {
        return Err(Error::contract(format!(
            "previous image is {}x{} but the projection is {}x{}",
            prev_img.width(),
            prev_img.height(),
            cfg.width,
            cfg.height
        )));
    }
    let (cloud, pixels) = back_project(prev_img);
    let moved = transform_cloud(&cloud, prev_to_current);
    let (image, map) = spherical_project(&moved, cfg);

    let mut assoc = AssociationMap::empty(cfg.width, cfg.height);
    for (k, &src_pixel) in pixels.iter().enumerate() {
        if let Some((u, v)) = map.pixels[k] {
            assoc.entries[src_pixel] = Some(u + v * cfg.width as u32);
            assoc.transformed_range[src_pixel] = moved[k].range() as f32;
        }
    }
    Ok((image, assoc))
}

/// Reprojects every previous image into the current frame independently.
/// Each pose is the transform from that previous frame into the current one.
pub fn associate_sequence(
    current: &RangeImage,
    previous: &[(RangeImage, Pose)],
    cfg: &ProjectionConfig,
) -> Result<Vec<(RangeImage, AssociationMap)>> {
    if !current.same_shape(cfg.width, cfg.height) {
        return Err(Error::contract(
            "current image does not match the projection",
        ));
    }
    previous
        .iter()
        .map(|(img, pose)| reproject_previous(img, pose, cfg))
        .collect()
}
