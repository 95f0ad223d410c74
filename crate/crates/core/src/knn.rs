//! kNN label cleanup in range-image space.
//!
//! Every point looks at the valid pixels in a square window around its
//! (possibly unowned) pixel, keeps those whose range is within
//! `range_cutoff` of its own, and takes a majority vote over the `k`
//! closest in range. This fixes points that lost their pixel to a nearer
//! point during projection, and smooths blocky pixel decisions at object
//! borders.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::projection::{PointPixelMap, RangeImage};

/// Offset added to range gaps before inverting them.
const INVERSE_GAP_EPS: f32 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Uniform,
    InverseRangeGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
    /// Odd window extent in pixels.
    pub window: usize,
    /// Meters.
    pub range_cutoff: f32,
    pub weighting: Weighting,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 5,
            window: 5,
            range_cutoff: 1.0,
            weighting: Weighting::Uniform,
        }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("knn k must be >= 1".into()));
        }
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "knn window must be odd and >= 1, got {}",
                self.window
            )));
        }
        if self.range_cutoff.is_nan() || self.range_cutoff <= 0.0 {
            return Err(Error::Config("knn range cutoff must be > 0".into()));
        }
        Ok(())
    }
}

pub fn knn_refine(
    points: &PointCloud,
    point_pixels: &PointPixelMap,
    img: &RangeImage,
    labels: &[u8],
    cfg: &KnnConfig,
) -> Result<Vec<u8>> {
    cfg.validate()?;
    let n = points.len();
    if point_pixels.len() != n || labels.len() != n {
        return Err(Error::contract(format!(
            "knn inputs disagree: {n} points, {} pixel entries, {} labels",
            point_pixels.len(),
            labels.len()
        )));
    }
    if img.source_len() != n {
        return Err(Error::contract(
            "range image was not projected from these points",
        ));
    }

    let (w, h) = (img.width() as i64, img.height() as i64);
    let half = (cfg.window / 2) as i64;
    let mut out = labels.to_vec();
    let mut candidates: Vec<(f32, usize, u8)> = Vec::with_capacity(cfg.window * cfg.window);

    for i in 0..n {
        let center = match (point_pixels.pixels[i], point_pixels.continuous[i]) {
            (Some((u, v)), _) => (u as i64, v as i64),
            (None, Some((uf, vf))) => (uf.floor() as i64, vf.floor() as i64),
            (None, None) => continue,
        };
        let r = points[i].range() as f32;

        candidates.clear();
        for v in (center.1 - half).max(0)..=(center.1 + half).min(h - 1) {
            for u in (center.0 - half).max(0)..=(center.0 + half).min(w - 1) {
                let q = (u + v * w) as usize;
                if !img.is_valid(q) {
                    continue;
                }
                let Some(src) = img.source_point(q) else {
                    continue;
                };
                let gap = (img.range()[q] - r).abs();
                if gap <= cfg.range_cutoff {
                    candidates.push((gap, q, labels[src]));
                }
            }
        }
        if candidates.is_empty() {
            continue;
        }
        candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        candidates.truncate(cfg.k);

        let (mut moving, mut stat) = (0.0f64, 0.0f64);
        for &(gap, _, label) in &candidates {
            let weight = match cfg.weighting {
                Weighting::Uniform => 1.0,
                Weighting::InverseRangeGap => 1.0 / (gap + INVERSE_GAP_EPS) as f64,
            };
            if label != 0 {
                moving += weight;
            } else {
                stat += weight;
            }
        }
        if moving > stat {
            out[i] = 1;
        } else if stat > moving {
            out[i] = 0;
        }
    }
    Ok(out)
}
