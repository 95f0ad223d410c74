//! Plain Rust behind the browser bindings, testable natively.

use rangemos::eval::ConfusionMatrix;
use rangemos::pipeline::segment_frame;
use rangemos::render::{render_channel, render_labels, Normalization};
use rangemos::synth::{generate_scan, perturb_translations, SceneConfig, SynthScan};
use rangemos::{
    relative_pose, reproject_previous, spherical_project, Channel, Frame, MovingClassSpec, Pose,
    ProjectionConfig, SegmentConfig,
};

pub type DemoResult<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn projection(
    width: usize,
    height: usize,
    fov_up: f64,
    fov_down: f64,
) -> DemoResult<ProjectionConfig> {
    ProjectionConfig::new(width, height, fov_up, fov_down).map_err(err)
}

fn street_scan(scans: usize, scan: usize) -> DemoResult<SynthScan> {
    generate_scan(&SceneConfig::street(scans, 0), scan).map_err(err)
}

/// RGBA range image of the first street scan under the given projection.
/// The sensor pattern stays fixed, so shrinking the image shows how
/// several points compete for one pixel.
pub fn range_view(width: usize, height: usize, fov_up: f64, fov_down: f64) -> DemoResult<Vec<u8>> {
    let cfg = projection(width, height, fov_up, fov_down)?;
    let scan = street_scan(1, 0)?;
    let (img, _) = spherical_project(&scan.cloud, &cfg);
    Ok(render_channel(&img, Channel::Range, Normalization::MinMax)
        .0
        .to_rgba())
}

/// The first street scan reprojected as if the sensor had moved by
/// `(dx, dy)` meters and turned by `yaw_deg`.
pub fn association_view(
    width: usize,
    height: usize,
    dx: f64,
    dy: f64,
    yaw_deg: f64,
) -> DemoResult<Vec<u8>> {
    let cfg = projection(width, height, 3.0, -25.0)?;
    let scan = street_scan(1, 0)?;
    let (img, _) = spherical_project(&scan.cloud, &cfg);
    let (s, c) = yaw_deg.to_radians().sin_cos();
    let motion = Pose::from_row_major_3x4(&[c, -s, 0.0, dx, s, c, 0.0, dy, 0.0, 0.0, 1.0, 0.0])
        .map_err(err)?;
    let (moved, _) = reproject_previous(&img, &motion.inverse(), &cfg).map_err(err)?;
    Ok(
        render_channel(&moved, Channel::Range, Normalization::MinMax)
            .0
            .to_rgba(),
    )
}

#[derive(Debug, Clone)]
pub struct SegmentOutcome {
    pub rgba: Vec<u8>,
    pub iou: Option<f64>,
    pub moving_points: usize,
}

/// Segments the third scan of a street sequence from its predecessor.
pub fn segment_view(
    width: usize,
    height: usize,
    car_speed: f64,
    pose_noise: f64,
    use_knn: bool,
    seed: u64,
) -> DemoResult<SegmentOutcome> {
    let mut scene = SceneConfig::street(3, seed);
    scene.beams.azimuth_steps = width;
    scene.beams.rings = height;
    for b in &mut scene.moving_boxes {
        b.velocity = [0.0, -car_speed, 0.0];
    }
    let scans: Vec<SynthScan> = (1..3)
        .map(|s| generate_scan(&scene, s))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let true_poses: Vec<_> = scans.iter().map(|s| s.pose).collect();
    let poses = if pose_noise > 0.0 {
        perturb_translations(&true_poses, pose_noise, seed).map_err(err)?
    } else {
        true_poses
    };

    let spec = MovingClassSpec::default();
    let classes: Vec<Vec<u16>> = scans
        .iter()
        .map(|s| rangemos::dataset::to_semantic_classes(&s.labels, &spec))
        .collect();
    let cfg = SegmentConfig {
        projection: projection(width, height, 3.0, -25.0)?,
        use_knn,
        ..SegmentConfig::default()
    };
    let frame = |i: usize| Frame {
        cloud: &scans[i].cloud,
        classes: &classes[i],
        pose: &poses[i],
    };
    let result = segment_frame(&frame(1), &[frame(0)], &cfg).map_err(err)?;
    let cm = ConfusionMatrix::default()
        .accumulate(&result.labels, &scans[1].moving)
        .map_err(err)?;

    // Paint from the refined point labels so the kNN toggle is visible.
    let mut mask = result.mask.clone();
    mask.moving.iter_mut().for_each(|m| *m = 0);
    for i in 0..result.image.len() {
        if let Some(p) = result.image.source_point(i) {
            mask.moving[i] = result.labels[p];
        }
    }
    let (img, _) = render_labels(&result.image, &mask).map_err(err)?;
    Ok(SegmentOutcome {
        rgba: img.to_rgba(),
        iou: cm.iou_moving(),
        moving_points: result.labels.iter().filter(|&&l| l == 1).count(),
    })
}

/// Relative pose of the second scan w.r.t. the first, kept for the page's
/// readout of how far the sensor moved.
pub fn street_step() -> DemoResult<f64> {
    let a = street_scan(2, 0)?;
    let b = street_scan(2, 1)?;
    Ok(relative_pose(&b.pose, &a.pose).translation().norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_view_has_rgba_shape() {
        let rgba = range_view(256, 16, 3.0, -25.0).unwrap();
        assert_eq!(rgba.len(), 256 * 16 * 4);
        assert!(rgba.chunks(4).any(|p| p[0] > 0));
    }

    #[test]
    fn zero_motion_association_matches_range_view() {
        let a = association_view(256, 16, 0.0, 0.0, 0.0).unwrap();
        let b = range_view(256, 16, 3.0, -25.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_projection_is_reported() {
        assert!(range_view(0, 16, 3.0, -25.0).is_err());
        assert!(range_view(64, 16, -25.0, 3.0).is_err());
    }

    #[test]
    fn segmentation_finds_the_car() {
        let out = segment_view(512, 32, 2.3, 0.0, true, 0).unwrap();
        assert_eq!(out.rgba.len(), 512 * 32 * 4);
        assert!(out.moving_points > 0);
        assert!(out.iou.unwrap() > 0.8, "{:?}", out.iou);
        let red = out.rgba.chunks(4).filter(|p| p[..3] == [255, 0, 0]).count();
        assert!(red > 0);
    }

    #[test]
    fn parked_car_is_static() {
        let out = segment_view(512, 32, 0.0, 0.0, true, 0).unwrap();
        assert_eq!(out.moving_points, 0);
    }

    #[test]
    fn street_step_is_half_a_meter() {
        assert!((street_step().unwrap() - 0.5).abs() < 1e-9);
    }
}
