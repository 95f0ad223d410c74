//! Rule-based moving object segmentation.
//!
//! A current pixel is static when the semantic class seen at its
//! correspondence in a previous scan is the same as its own class, and
//! moving otherwise. The rule is only trustworthy with accurate poses and
//! semantics, so it is gated to movable classes by default and can require
//! a minimum range residual and several agreeing previous scans.

use serde::{Deserialize, Serialize};

use crate::association::{AssociationMap, FeatureImage, ScatterPlan};
use crate::dataset::MovingClassSpec;
use crate::error::{Error, Result};
use crate::projection::RangeImage;
use crate::residual::ResidualImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoCorrespondencePolicy {
    /// Call the pixel static.
    #[default]
    Static,
    /// Flag the pixel as unknown in [`MovingMask::unknown`]; the binary
    /// output still reports it static.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Minimum normalized range residual for a mismatch to count when
    /// `use_residual` is on.
    pub residual_threshold: f32,
    pub use_residual: bool,
    /// Only movable classes can be called moving.
    pub movable_only: bool,
    pub no_correspondence: NoCorrespondencePolicy,
    /// Number of previous scans that must vote "moving".
    pub vote_min: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            residual_threshold: 0.1,
            use_residual: false,
            movable_only: true,
            no_correspondence: NoCorrespondencePolicy::Static,
            vote_min: 1,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.residual_threshold.is_nan() || self.residual_threshold < 0.0 {
            return Err(Error::Config("residual threshold must be >= 0".into()));
        }
        if self.vote_min == 0 {
            return Err(Error::Config("vote_min must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-pixel semantic class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SegLabelImage {
    width: usize,
    height: usize,
    classes: Vec<u16>,
    valid: Vec<bool>,
}

impl SegLabelImage {
    pub fn new(width: usize, height: usize, classes: Vec<u16>, valid: Vec<bool>) -> Result<Self> {
        if classes.len() != width * height || valid.len() != width * height {
            return Err(Error::contract(format!(
                "label buffers do not match {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            classes,
            valid,
        })
    }

    /// Reads each valid pixel's class from the per-point classes of the cloud
    /// the image was projected from.
    pub fn from_point_classes(img: &RangeImage, point_classes: &[u16]) -> Result<Self> {
        if point_classes.len() != img.source_len() {
            return Err(Error::contract(format!(
                "{} point classes for a cloud of {} points",
                point_classes.len(),
                img.source_len()
            )));
        }
        let n = img.len();
        let mut classes = vec![0u16; n];
        let mut valid = vec![false; n];
        for i in 0..n {
            if let (true, Some(src)) = (img.is_valid(i), img.source_point(i)) {
                classes[i] = point_classes[src];
                valid[i] = true;
            }
        }
        Self::new(img.width(), img.height(), classes, valid)
    }

    /// Class per pixel from a feature image: a single channel holds the class
    /// id directly, several channels are treated as class scores and reduced
    /// with argmax (first maximum wins).
    pub fn from_features(feat: &FeatureImage) -> Self {
        let n = feat.width() * feat.height();
        let classes = (0..n)
            .map(|i| {
                let px = feat.pixel(i);
                if px.len() == 1 {
                    px[0].max(0.0).round() as u16
                } else {
                    let mut best = 0;
                    for (c, &v) in px.iter().enumerate() {
                        if v > px[best] {
                            best = c;
                        }
                    }
                    best as u16
                }
            })
            .collect();
        Self {
            width: feat.width(),
            height: feat.height(),
            classes,
            valid: feat.valid().to_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> &[u16] {
        &self.classes
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    /// Scatters the labels through `assoc` with the same winner rule as
    /// feature scattering.
    pub fn scatter(&self, assoc: &AssociationMap) -> Result<Self> {
        if self.width != assoc.width() || self.height != assoc.height() {
            return Err(Error::contract(
                "label image does not match association map",
            ));
        }
        let plan = ScatterPlan::new(assoc, Some(&self.valid))?;
        let (classes, valid) = plan.apply(&self.classes, 0);
        Self::new(self.width, self.height, classes, valid)
    }
}

/// Per-pixel moving/static decision.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingMask {
    pub width: usize,
    pub height: usize,
    /// 1 = moving, 0 = static (and 0 on invalid pixels).
    pub moving: Vec<u8>,
    /// Copy of the current image's valid region.
    pub valid: Vec<bool>,
    /// Valid pixels without any correspondence, under
    /// [`NoCorrespondencePolicy::Unknown`].
    pub unknown: Vec<bool>,
}

impl MovingMask {
    pub fn moving_count(&self) -> usize {
        self.moving.iter().filter(|&&m| m == 1).count()
    }

    pub fn all_static(width: usize, height: usize, valid: Vec<bool>) -> Self {
        Self {
            width,
            height,
            moving: vec![0; width * height],
            valid,
            unknown: vec![false; width * height],
        }
    }
}

pub fn classify_pixels(
    current: &SegLabelImage,
    transformed: &[SegLabelImage],
    residuals: Option<&[ResidualImage]>,
    cfg: &ClassifierConfig,
    spec: &MovingClassSpec,
) -> Result<MovingMask> {
    cfg.validate()?;
    let (w, h) = (current.width, current.height);
    if transformed.iter().any(|t| t.width != w || t.height != h) {
        return Err(Error::contract("transformed label images differ in size"));
    }
    match (cfg.use_residual, residuals) {
        (true, None) => {
            return Err(Error::contract(
                "use_residual is set but no residuals given",
            ))
        }
        (false, Some(_)) => return Err(Error::contract("residuals given but use_residual is off")),
        (true, Some(res)) => {
            if res.len() != transformed.len() {
                return Err(Error::contract("need one residual image per previous scan"));
            }
            if res.iter().any(|r| r.width() != w || r.height() != h) {
                return Err(Error::contract("residual images differ in size"));
            }
        }
        (false, None) => {}
    }

    let n = w * h;
    let mut mask = MovingMask::all_static(w, h, current.valid.clone());
    for i in 0..n {
        if !current.valid[i] {
            continue;
        }
        let class = current.classes[i];
        let mut any_correspondence = false;
        let mut votes = 0;
        for (j, prev) in transformed.iter().enumerate() {
            if !prev.valid[i] {
                continue;
            }
            any_correspondence = true;
            if prev.classes[i] == class {
                continue;
            }
            let residual_ok = match residuals {
                Some(res) => res[j].values()[i] > cfg.residual_threshold,
                None => true,
            };
            if residual_ok {
                votes += 1;
            }
        }
        if !any_correspondence {
            mask.unknown[i] = cfg.no_correspondence == NoCorrespondencePolicy::Unknown;
            continue;
        }
        let gate = !cfg.movable_only || spec.is_movable(class);
        if gate && votes >= cfg.vote_min {
            mask.moving[i] = 1;
        }
    }
    Ok(mask)
}

/// Copies pixel decisions back to the points that own the pixels. Points
/// without a pixel come out static.
pub fn classify_points(mask: &MovingMask, img: &RangeImage) -> Result<Vec<u8>> {
    if !img.same_shape(mask.width, mask.height) {
        return Err(Error::contract("mask does not match range image"));
    }
    let mut labels = vec![0u8; img.source_len()];
    for i in 0..img.len() {
        if let (true, Some(src)) = (img.is_valid(i), img.source_point(i)) {
            labels[src] = mask.moving[i];
        }
    }
    Ok(labels)
}

/// Extension point for learned motion heads that consume the current and
/// transformed feature images directly.
pub trait MotionHead {
    fn segment(
        &self,
        current: &FeatureImage,
        transformed: &[FeatureImage],
        range: &RangeImage,
    ) -> Result<MovingMask>;
}

/// [`MotionHead`] wrapper around [`classify_pixels`]; features are reduced to
/// classes with [`SegLabelImage::from_features`].
#[derive(Debug, Clone, Default)]
pub struct SemanticConsistency {
    pub cfg: ClassifierConfig,
    pub spec: MovingClassSpec,
}

impl MotionHead for SemanticConsistency {
    fn segment(
        &self,
        current: &FeatureImage,
        transformed: &[FeatureImage],
        range: &RangeImage,
    ) -> Result<MovingMask> {
        if !range.same_shape(current.width(), current.height()) {
            return Err(Error::contract("features do not match range image"));
        }
        if self.cfg.use_residual {
            return Err(Error::Config(
                "the feature head does not take residual images".into(),
            ));
        }
        let mut cur = SegLabelImage::from_features(current);
        for (v, r) in cur.valid.iter_mut().zip(range.valid()) {
            *v &= *r;
        }
        let prev: Vec<_> = transformed
            .iter()
            .map(SegLabelImage::from_features)
            .collect();
        let mut mask = classify_pixels(&cur, &prev, None, &self.cfg, &self.spec)?;
        mask.valid = range.valid().to_vec();
        Ok(mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{Point, PointCloud};
    use crate::projection::{spherical_project, ProjectionConfig};

    const CAR: u16 = 10;
    const ROAD: u16 = 40;
    const BUILDING: u16 = 50;

    fn seg(classes: [u16; 4], valid: [bool; 4]) -> SegLabelImage {
        SegLabelImage::new(2, 2, classes.to_vec(), valid.to_vec()).unwrap()
    }

    fn run(cur: &SegLabelImage, prev: &[SegLabelImage], cfg: ClassifierConfig) -> Vec<u8> {
        classify_pixels(cur, prev, None, &cfg, &MovingClassSpec::default())
            .unwrap()
            .moving
    }

    #[test]
    fn same_class_is_static() {
        let cur = seg([CAR, ROAD, ROAD, ROAD], [true; 4]);
        assert_eq!(
            run(
                &cur,
                std::slice::from_ref(&cur),
                ClassifierConfig::default()
            ),
            vec![0; 4]
        );
    }

    #[test]
    fn car_over_road_is_moving() {
        let cur = seg([CAR, ROAD, ROAD, ROAD], [true; 4]);
        let prev = seg([ROAD, ROAD, ROAD, ROAD], [true; 4]);
        assert_eq!(
            run(&cur, &[prev], ClassifierConfig::default()),
            vec![1, 0, 0, 0]
        );
    }

    #[test]
    fn static_class_gated_by_movable_only() {
        let cur = seg([BUILDING, ROAD, ROAD, ROAD], [true; 4]);
        let prev = seg([CAR, ROAD, ROAD, ROAD], [true; 4]);
        assert_eq!(
            run(
                &cur,
                std::slice::from_ref(&prev),
                ClassifierConfig::default()
            ),
            vec![0; 4]
        );
        let open = ClassifierConfig {
            movable_only: false,
            ..Default::default()
        };
        assert_eq!(run(&cur, &[prev], open), vec![1, 0, 0, 0]);
    }

    #[test]
    fn no_correspondence_policy() {
        let cur = seg([CAR, CAR, ROAD, ROAD], [true, true, true, false]);
        let prev = seg([ROAD, 0, 0, 0], [true, false, false, false]);
        let cfg = ClassifierConfig {
            no_correspondence: NoCorrespondencePolicy::Unknown,
            ..Default::default()
        };
        let mask = classify_pixels(&cur, &[prev], None, &cfg, &MovingClassSpec::default()).unwrap();
        assert_eq!(mask.moving, vec![1, 0, 0, 0]);
        assert_eq!(mask.unknown, vec![false, true, true, false]);
        assert_eq!(mask.valid, vec![true, true, true, false]);
    }

    #[test]
    fn vote_min_needs_agreement() {
        let cur = seg([CAR, CAR, ROAD, ROAD], [true; 4]);
        let a = seg([ROAD, ROAD, ROAD, ROAD], [true; 4]);
        let b = seg([ROAD, CAR, ROAD, ROAD], [true; 4]);
        let cfg = ClassifierConfig {
            vote_min: 2,
            ..Default::default()
        };
        assert_eq!(run(&cur, &[a, b], cfg), vec![1, 0, 0, 0]);
    }

    #[test]
    fn residual_threshold_filters_votes() {
        let cfg_proj = ProjectionConfig::new(2, 2, 3.0, -25.0).unwrap();
        let mut a = RangeImage::blank(&cfg_proj);
        let mut b = RangeImage::blank(&cfg_proj);
        for i in 0..4 {
            a.set_pixel(i, &Point::new(10.0, 0.0, 0.0, 0.0), None);
            b.set_pixel(i, &Point::new(10.0 + i as f32, 0.0, 0.0, 0.0), None);
        }
        let res = crate::residual::range_residual(&a, &b).unwrap();
        let cur = seg([CAR; 4], [true; 4]);
        let prev = seg([ROAD; 4], [true; 4]);
        let cfg = ClassifierConfig {
            use_residual: true,
            residual_threshold: 0.15,
            ..Default::default()
        };
        let mask = classify_pixels(
            &cur,
            std::slice::from_ref(&prev),
            Some(std::slice::from_ref(&res)),
            &cfg,
            &MovingClassSpec::default(),
        )
        .unwrap();
        // residuals 0, 0.1, 0.2, 0.3
        assert_eq!(mask.moving, vec![0, 0, 1, 1]);
        assert!(classify_pixels(&cur, &[prev], None, &cfg, &MovingClassSpec::default()).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let cur = seg([CAR; 4], [true; 4]);
        let prev = SegLabelImage::new(4, 1, vec![0; 4], vec![true; 4]).unwrap();
        assert!(classify_pixels(
            &cur,
            &[prev],
            None,
            &ClassifierConfig::default(),
            &MovingClassSpec::default()
        )
        .is_err());
    }

    #[test]
    fn points_follow_their_pixels() {
        let cfg = ProjectionConfig::new(8, 4, 10.0, -30.0).unwrap();
        let cloud = PointCloud::new(vec![
            Point::new(10.0, 0.0, 0.0, 0.0),
            Point::new(20.0, 0.0, 0.0, 0.0), // loses to point 0
            Point::new(0.0, 10.0, 0.0, 0.0),
            Point::new(0.0, 0.0, 10.0, 0.0), // out of FOV
        ])
        .unwrap();
        let (img, map) = spherical_project(&cloud, &cfg);
        let mut mask = MovingMask::all_static(8, 4, img.valid().to_vec());
        assert_eq!(classify_points(&mask, &img).unwrap(), vec![0; 4]);
        let (u, v) = map.pixels[0].unwrap();
        mask.moving[img.flat(u as usize, v as usize)] = 1;
        assert_eq!(classify_points(&mask, &img).unwrap(), vec![1, 0, 0, 0]);
    }

    #[test]
    fn feature_head_matches_label_rule() {
        let cfg_proj = ProjectionConfig::new(2, 2, 3.0, -25.0).unwrap();
        let mut range = RangeImage::blank(&cfg_proj);
        for i in 0..4 {
            range.set_pixel(i, &Point::new(10.0, 0.0, 0.0, 0.0), None);
        }
        let cur = FeatureImage::new(2, 2, 1, vec![10.0, 40.0, 40.0, 50.0], vec![true; 4]).unwrap();
        let prev = FeatureImage::new(2, 2, 1, vec![40.0, 40.0, 10.0, 10.0], vec![true; 4]).unwrap();
        let head = SemanticConsistency::default();
        let mask = head.segment(&cur, &[prev], &range).unwrap();
        assert_eq!(mask.moving, vec![1, 0, 0, 0]);
    }

    #[test]
    fn argmax_features() {
        let feat = FeatureImage::new(
            1,
            2,
            3,
            vec![0.1, 0.7, 0.2, 0.5, 0.5, 0.1],
            vec![true, true],
        )
        .unwrap();
        assert_eq!(SegLabelImage::from_features(&feat).classes(), &[1, 0]);
    }
}
