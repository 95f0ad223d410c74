//! Moving object segmentation on LiDAR range images.
//!
//! Scans are projected onto spherical range images, previous scans are
//! associated with the current one through ego-motion and reprojection, and
//! a semantic-consistency rule marks points whose class disagrees with what
//! the previous scan saw at the same place. A kNN pass in range-image space
//! cleans up projection artifacts, and moving-class IoU scores the result.

pub mod association;
pub mod cloud;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod knn;
pub mod mos;
pub mod pipeline;
pub mod pose;
pub mod projection;
pub mod render;
pub mod residual;
pub mod synth;

pub use association::{
    associate_sequence, reproject_previous, scatter_features, AbsentEncoding, AssociationMap,
    FeatureImage, ScatterPlan,
};
pub use cloud::{transform_cloud, Point, PointCloud};
pub use dataset::{LabelArray, MovingClassSpec};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, SequenceReport};
pub use knn::{knn_refine, KnnConfig, Weighting};
pub use mos::{classify_pixels, classify_points, ClassifierConfig, MovingMask, SegLabelImage};
pub use pipeline::{segment_frame, segment_sequence, Frame, SegmentConfig};
pub use pose::{relative_pose, Pose};
pub use projection::{
    back_project, spherical_project, Channel, PointPixelMap, ProjectionConfig, RangeImage,
};
pub use residual::{range_residual, ResidualImage};
