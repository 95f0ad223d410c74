//! Layered run configuration: built-in defaults, then an optional TOML file,
//! then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rangemos::dataset::{SequenceLayout, DEFAULT_CALIB_KEY};
use rangemos::pipeline::SegmentConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Previous scans used per prediction.
    pub n_prev: usize,
    pub output: PathBuf,
    /// Worker threads; 0 picks the number of cores.
    pub jobs: usize,
    pub seed: u64,
    pub sequence: SequencePaths,
    pub output_ids: OutputIds,
    pub segment: SegmentConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_prev: 1,
            output: PathBuf::from("out"),
            jobs: 0,
            seed: 0,
            sequence: SequencePaths::default(),
            output_ids: OutputIds::default(),
            segment: SegmentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequencePaths {
    pub seq_dir: Option<PathBuf>,
    /// Relative to `seq_dir` unless absolute.
    pub scan_dir: PathBuf,
    pub label_dir: PathBuf,
    /// Semantic predictions to use instead of ground-truth labels.
    pub sem_dir: Option<PathBuf>,
    pub poses: PathBuf,
    pub calib: PathBuf,
    pub calib_key: String,
}

impl Default for SequencePaths {
    fn default() -> Self {
        Self {
            seq_dir: None,
            scan_dir: "velodyne".into(),
            label_dir: "labels".into(),
            sem_dir: None,
            poses: "poses.txt".into(),
            calib: "calib.txt".into(),
            calib_key: DEFAULT_CALIB_KEY.into(),
        }
    }
}

impl SequencePaths {
    fn resolve(&self, p: &Path) -> Result<PathBuf> {
        if p.is_absolute() {
            return Ok(p.to_path_buf());
        }
        match &self.seq_dir {
            Some(dir) => Ok(dir.join(p)),
            None => bail!(
                "no sequence directory given (--seq-dir) for relative path {}",
                p.display()
            ),
        }
    }

    pub fn layout(&self) -> Result<SequenceLayout> {
        let label_dir = self.resolve(&self.label_dir)?;
        Ok(SequenceLayout {
            scan_dir: self.resolve(&self.scan_dir)?,
            label_dir: label_dir.is_dir().then_some(label_dir),
            poses: self.resolve(&self.poses)?,
            calib: self.resolve(&self.calib)?,
            calib_key: self.calib_key.clone(),
        })
    }

    pub fn sem_dir(&self) -> Result<Option<PathBuf>> {
        self.sem_dir.as_deref().map(|p| self.resolve(p)).transpose()
    }
}

/// Label words written into prediction files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputIds {
    pub static_id: u32,
    pub moving_id: u32,
}

impl Default for OutputIds {
    /// `9` static / `251` moving, as read by the MOS benchmark tooling.
    fn default() -> Self {
        Self {
            static_id: 9,
            moving_id: 251,
        }
    }
}

/// Flags shared by every command that touches a sequence or the pipeline.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seq_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub poses: Option<PathBuf>,
    #[arg(long, global = true)]
    pub calib: Option<PathBuf>,
    #[arg(long, global = true)]
    pub calib_key: Option<String>,
    /// Directory of semantic predictions (.label); defaults to ground truth.
    #[arg(long, global = true)]
    pub sem_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n_prev: Option<usize>,
    #[arg(long, global = true)]
    pub width: Option<usize>,
    #[arg(long, global = true)]
    pub height: Option<usize>,
    /// Degrees.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub fov_up: Option<f64>,
    /// Degrees.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub fov_down: Option<f64>,
    #[arg(long, global = true)]
    pub tau: Option<f32>,
    #[arg(long, global = true)]
    pub use_residual: bool,
    #[arg(long, global = true)]
    pub vote_min: Option<usize>,
    /// Let non-movable classes be called moving.
    #[arg(long, global = true)]
    pub all_classes: bool,
    #[arg(long, global = true)]
    pub knn_k: Option<usize>,
    #[arg(long, global = true)]
    pub knn_window: Option<usize>,
    #[arg(long, global = true)]
    pub knn_cutoff: Option<f32>,
    #[arg(long, global = true)]
    pub no_knn: bool,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        self.apply(&mut cfg);
        let seg = &cfg.segment;
        seg.validate()?;
        if cfg.n_prev == 0 {
            bail!("--n-prev must be at least 1");
        }
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut PipelineConfig) {
        let seq = &mut cfg.sequence;
        if let Some(v) = &self.seq_dir {
            seq.seq_dir = Some(v.clone());
        }
        if let Some(v) = &self.poses {
            seq.poses = v.clone();
        }
        if let Some(v) = &self.calib {
            seq.calib = v.clone();
        }
        if let Some(v) = &self.calib_key {
            seq.calib_key = v.clone();
        }
        if let Some(v) = &self.sem_dir {
            seq.sem_dir = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.output = v.clone();
        }
        if let Some(v) = self.n_prev {
            cfg.n_prev = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        let seg = &mut cfg.segment;
        if let Some(v) = self.width {
            seg.projection.width = v;
        }
        if let Some(v) = self.height {
            seg.projection.height = v;
        }
        if let Some(v) = self.fov_up {
            seg.projection.fov_up_deg = v;
        }
        if let Some(v) = self.fov_down {
            seg.projection.fov_down_deg = v;
        }
        if let Some(v) = self.tau {
            seg.classifier.residual_threshold = v;
        }
        if self.use_residual {
            seg.classifier.use_residual = true;
        }
        if let Some(v) = self.vote_min {
            seg.classifier.vote_min = v;
        }
        if self.all_classes {
            seg.classifier.movable_only = false;
        }
        if let Some(v) = self.knn_k {
            seg.knn.k = v;
        }
        if let Some(v) = self.knn_window {
            seg.knn.window = v;
        }
        if let Some(v) = self.knn_cutoff {
            seg.knn.range_cutoff = v;
        }
        if self.no_knn {
            seg.use_knn = false;
        }
    }
}
