use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rangemos::dataset::{
    read_labels, read_scan, to_mos_labels, to_semantic_classes, SequenceLayout,
};
use rangemos::{MovingClassSpec, PointCloud, Pose};

use crate::config::PipelineConfig;

/// A sequence on disk with its poses already validated.
pub struct Sequence {
    pub layout: SequenceLayout,
    pub scans: Vec<PathBuf>,
    pub poses: Vec<Pose>,
    sem_dir: Option<PathBuf>,
    spec: MovingClassSpec,
}

pub struct LoadedScan {
    pub cloud: PointCloud,
    pub classes: Vec<u16>,
}

impl Sequence {
    pub fn open(cfg: &PipelineConfig) -> Result<Self> {
        let layout = cfg.sequence.layout()?;
        let sem_dir = cfg.sequence.sem_dir()?;
        if !layout.poses.is_file() {
            bail!("pose file {} does not exist", layout.poses.display());
        }
        if !layout.calib.is_file() {
            bail!("calibration file {} does not exist", layout.calib.display());
        }
        let scans = layout.scan_files()?;
        if scans.is_empty() {
            bail!("no scans found in {}", layout.scan_dir.display());
        }
        let poses = layout.read_poses()?;
        if poses.len() < scans.len() {
            bail!(
                "{} poses for {} scans in {}",
                poses.len(),
                scans.len(),
                layout.scan_dir.display()
            );
        }
        if sem_dir.is_none() && layout.label_dir.is_none() {
            bail!("no semantic source: give --sem-dir or provide a label directory");
        }
        Ok(Self {
            layout,
            scans,
            poses,
            sem_dir,
            spec: cfg.segment.classes.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.scans.len()
    }

    pub fn stem(&self, t: usize) -> String {
        self.scans[t]
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("{t:06}"))
    }

    fn label_path(dir: &Path, scan: &Path) -> PathBuf {
        dir.join(scan.file_stem().unwrap_or_default())
            .with_extension("label")
    }

    pub fn load(&self, t: usize) -> Result<LoadedScan> {
        let scan = &self.scans[t];
        let cloud = read_scan(scan)?;
        let sem_path = match &self.sem_dir {
            Some(dir) => Self::label_path(dir, scan),
            None => self
                .layout
                .label_file(scan)
                .context("label directory missing")?,
        };
        let labels = read_labels(&sem_path)?;
        labels
            .check_pairing(&cloud)
            .with_context(|| format!("pairing {} with {}", scan.display(), sem_path.display()))?;
        Ok(LoadedScan {
            classes: to_semantic_classes(&labels, &self.spec),
            cloud,
        })
    }

    /// Binary ground truth, when a label directory exists.
    pub fn ground_truth(&self, t: usize) -> Result<Option<Vec<u8>>> {
        let Some(path) = self.layout.label_file(&self.scans[t]) else {
            return Ok(None);
        };
        if !path.is_file() {
            return Ok(None);
        }
        Ok(Some(to_mos_labels(&read_labels(path)?, &self.spec)))
    }
}
