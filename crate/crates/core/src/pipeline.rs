//! Per-scan segmentation: project, associate, classify, refine.

use serde::{Deserialize, Serialize};

use crate::association::{reproject_previous, AssociationMap};
use crate::cloud::PointCloud;
use crate::dataset::MovingClassSpec;
use crate::error::{Error, Result};
use crate::knn::{knn_refine, KnnConfig};
use crate::mos::{classify_pixels, classify_points, ClassifierConfig, MovingMask, SegLabelImage};
use crate::pose::{relative_pose, Pose};
use crate::projection::{spherical_project, PointPixelMap, ProjectionConfig, RangeImage};
use crate::residual::{range_residual, ResidualImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub projection: ProjectionConfig,
    pub classifier: ClassifierConfig,
    pub knn: KnnConfig,
    pub use_knn: bool,
    pub classes: MovingClassSpec,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            projection: ProjectionConfig::default(),
            classifier: ClassifierConfig::default(),
            knn: KnnConfig::default(),
            use_knn: true,
            classes: MovingClassSpec::default(),
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        self.projection.validate()?;
        self.classifier.validate()?;
        self.knn.validate()?;
        self.classes.validate()
    }
}

/// One scan as seen by the pipeline: points in the sensor frame, a semantic
/// class per point, and the sensor's world pose.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub cloud: &'a PointCloud,
    pub classes: &'a [u16],
    pub pose: &'a Pose,
}

impl Frame<'_> {
    fn check(&self) -> Result<()> {
        if self.classes.len() != self.cloud.len() {
            return Err(Error::contract(format!(
                "{} semantic labels for {} points",
                self.classes.len(),
                self.cloud.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FrameResult {
    /// Final per-point labels (after kNN when enabled).
    pub labels: Vec<u8>,
    /// Per-point labels straight from the pixel decisions.
    pub raw_labels: Vec<u8>,
    pub mask: MovingMask,
    pub image: RangeImage,
    pub point_pixels: PointPixelMap,
    /// Reprojected previous image and association map, per previous frame.
    pub transformed: Vec<(RangeImage, AssociationMap)>,
    pub residuals: Vec<ResidualImage>,
}

pub fn segment_frame(
    current: &Frame,
    previous: &[Frame],
    cfg: &SegmentConfig,
) -> Result<FrameResult> {
    current.check()?;
    let proj = &cfg.projection;
    let (image, point_pixels) = spherical_project(current.cloud, proj);
    let cur_sem = SegLabelImage::from_point_classes(&image, current.classes)?;

    let mut transformed = Vec::with_capacity(previous.len());
    let mut transformed_sem = Vec::with_capacity(previous.len());
    let mut residuals = Vec::with_capacity(previous.len());
    for prev in previous {
        prev.check()?;
        let (prev_img, _) = spherical_project(prev.cloud, proj);
        let prev_sem = SegLabelImage::from_point_classes(&prev_img, prev.classes)?;
        let to_current = relative_pose(prev.pose, current.pose);
        let (reproj, assoc) = reproject_previous(&prev_img, &to_current, proj)?;
        transformed_sem.push(prev_sem.scatter(&assoc)?);
        residuals.push(range_residual(&image, &reproj)?);
        transformed.push((reproj, assoc));
    }

    let mask = classify_pixels(
        &cur_sem,
        &transformed_sem,
        cfg.classifier.use_residual.then_some(residuals.as_slice()),
        &cfg.classifier,
        &cfg.classes,
    )?;
    let raw_labels = classify_points(&mask, &image)?;
    let labels = if cfg.use_knn {
        knn_refine(current.cloud, &point_pixels, &image, &raw_labels, &cfg.knn)?
    } else {
        raw_labels.clone()
    };
    Ok(FrameResult {
        labels,
        raw_labels,
        mask,
        image,
        point_pixels,
        transformed,
        residuals,
    })
}

/// Segments scan `t` of a sequence using scans `t−n_prev .. t−1`. Scans
/// without enough history are predicted all-static.
pub fn segment_index(
    frames: &[Frame],
    t: usize,
    n_prev: usize,
    cfg: &SegmentConfig,
) -> Result<Vec<u8>> {
    if n_prev == 0 {
        return Err(Error::Config(
            "at least one previous scan is required".into(),
        ));
    }
    let current = &frames[t];
    if t < n_prev {
        current.check()?;
        return Ok(vec![0; current.cloud.len()]);
    }
    let previous: Vec<Frame> = (1..=n_prev).map(|i| frames[t - i]).collect();
    Ok(segment_frame(current, &previous, cfg)?.labels)
}

pub fn segment_sequence(
    frames: &[Frame],
    n_prev: usize,
    cfg: &SegmentConfig,
) -> Result<Vec<Vec<u8>>> {
    cfg.validate()?;
    (0..frames.len())
        .map(|t| segment_index(frames, t, n_prev, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::to_semantic_classes;
    use crate::synth::{generate, BeamPattern, SceneConfig};

    fn scene() -> (SceneConfig, SegmentConfig) {
        let mut scene = SceneConfig::street(3, 1);
        scene.beams = BeamPattern {
            rings: 32,
            azimuth_steps: 512,
            ..BeamPattern::default()
        };
        let mut cfg = SegmentConfig::default();
        cfg.projection.width = 512;
        cfg.projection.height = 32;
        (scene, cfg)
    }

    #[test]
    fn boundary_scans_are_static() {
        let (scene, cfg) = scene();
        let scans = generate(&scene).unwrap();
        let classes: Vec<_> = scans
            .iter()
            .map(|s| to_semantic_classes(&s.labels, &cfg.classes))
            .collect();
        let frames: Vec<_> = scans
            .iter()
            .zip(&classes)
            .map(|(s, c)| Frame {
                cloud: &s.cloud,
                classes: c,
                pose: &s.pose,
            })
            .collect();
        let out = segment_sequence(&frames, 2, &cfg).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out[0].iter().chain(&out[1]).all(|&l| l == 0));
        assert!(out[2].contains(&1));
    }

    #[test]
    fn identical_frames_are_static() {
        let (scene, cfg) = scene();
        let scans = generate(&scene).unwrap();
        let classes = to_semantic_classes(&scans[1].labels, &cfg.classes);
        let f = Frame {
            cloud: &scans[1].cloud,
            classes: &classes,
            pose: &scans[1].pose,
        };
        let res = segment_frame(&f, &[f], &cfg).unwrap();
        assert_eq!(res.mask.moving_count(), 0);
        assert!(res.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn label_count_mismatch() {
        let (scene, cfg) = scene();
        let scans = generate(&scene).unwrap();
        let f = Frame {
            cloud: &scans[0].cloud,
            classes: &[1, 2],
            pose: &scans[0].pose,
        };
        assert!(segment_frame(&f, &[], &cfg).is_err());
    }
}
