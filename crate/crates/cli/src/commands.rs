use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rangemos::dataset::{read_labels, write_calibration, write_labels, write_poses, write_scan};
use rangemos::pipeline::{segment_frame, FrameResult};
use rangemos::render::{
    render_association, render_channel, render_labels, render_residual, Normalization,
};
use rangemos::synth::{generate_scan, perturb_translations, BeamPattern, SceneConfig};
use rangemos::{
    range_residual, relative_pose, reproject_previous, spherical_project, AbsentEncoding,
    AssociationMap, Channel, ConfusionMatrix, Frame, LabelArray, MovingMask, Pose, RangeImage,
    SequenceReport,
};
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::output::{write_f32s, write_png, write_png_with_bounds};
use crate::sequence::{LoadedScan, Sequence};
use crate::RenderMode;

fn create_out(cfg: &PipelineConfig) -> Result<&Path> {
    let out = cfg.output.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

fn check_index(seq: &Sequence, t: usize) -> Result<()> {
    if t >= seq.len() {
        bail!(
            "scan index {t} out of range (sequence has {} scans)",
            seq.len()
        );
    }
    Ok(())
}

/// Runs the pipeline on scan `t` with up to `n_prev` predecessors. Returns
/// `None` when `t` lacks history.
fn segment_scan(
    seq: &Sequence,
    cfg: &PipelineConfig,
    t: usize,
) -> Result<(LoadedScan, Option<FrameResult>)> {
    let current = seq.load(t)?;
    if t < cfg.n_prev {
        return Ok((current, None));
    }
    let previous: Vec<LoadedScan> = (1..=cfg.n_prev)
        .map(|i| seq.load(t - i))
        .collect::<Result<_>>()?;
    let cur = Frame {
        cloud: &current.cloud,
        classes: &current.classes,
        pose: &seq.poses[t],
    };
    let prev: Vec<Frame> = previous
        .iter()
        .enumerate()
        .map(|(i, s)| Frame {
            cloud: &s.cloud,
            classes: &s.classes,
            pose: &seq.poses[t - 1 - i],
        })
        .collect();
    let result = segment_frame(&cur, &prev, &cfg.segment)?;
    Ok((current, Some(result)))
}

pub fn project(cfg: &PipelineConfig, index: Option<usize>, scan: Option<&Path>) -> Result<()> {
    let (cloud, stem) = match (index, scan) {
        (_, Some(path)) => (
            rangemos::dataset::read_scan(path)?,
            path.file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
        ),
        (Some(t), None) => {
            let layout = cfg.sequence.layout()?;
            let scans = layout.scan_files()?;
            let path = scans
                .get(t)
                .with_context(|| format!("scan index {t} out of range ({} scans)", scans.len()))?;
            (
                rangemos::dataset::read_scan(path)?,
                path.file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned(),
            )
        }
        (None, None) => bail!("give --index or --scan"),
    };
    let (img, _) = spherical_project(&cloud, &cfg.segment.projection);
    let out = create_out(cfg)?;
    let raw = out.join(format!("{stem}.range.bin"));
    write_f32s(
        Channel::ALL
            .iter()
            .flat_map(|&c| img.channel(c).iter().copied()),
        &raw,
    )?;
    let (png, bounds) = render_channel(&img, Channel::Range, Normalization::MinMax);
    write_png_with_bounds(
        &png,
        &bounds,
        "range",
        &out.join(format!("{stem}.range.png")),
    )?;
    info!(
        "{stem}: {} points, {} valid pixels of {}x{}",
        cloud.len(),
        img.valid_count(),
        img.width(),
        img.height()
    );
    Ok(())
}

/// A previous scan index with its reprojected image and association map.
type Reprojection = (usize, RangeImage, AssociationMap);

fn reprojected(
    seq: &Sequence,
    cfg: &PipelineConfig,
    t: usize,
) -> Result<(RangeImage, Vec<Reprojection>)> {
    check_index(seq, t)?;
    let proj = &cfg.segment.projection;
    let (current, _) = spherical_project(&seq.load(t)?.cloud, proj);
    let mut maps = Vec::new();
    for i in 1..=cfg.n_prev.min(t) {
        let (prev, _) = spherical_project(&seq.load(t - i)?.cloud, proj);
        let pose = relative_pose(&seq.poses[t - i], &seq.poses[t]);
        let (img, assoc) = reproject_previous(&prev, &pose, proj)?;
        maps.push((t - i, img, assoc));
    }
    if maps.is_empty() {
        warn!("scan {t} has no previous scan");
    }
    Ok((current, maps))
}

pub fn associate(cfg: &PipelineConfig, t: usize, zero_sentinel: bool) -> Result<()> {
    let seq = Sequence::open(cfg)?;
    let (_, maps) = reprojected(&seq, cfg, t)?;
    let out = create_out(cfg)?;
    let absent = if zero_sentinel {
        AbsentEncoding::Zero
    } else {
        AbsentEncoding::NegativeOne
    };
    for (s, _, assoc) in maps {
        let path = out.join(format!("assoc_{}_{}.bin", seq.stem(t), seq.stem(s)));
        fs::write(&path, assoc.encode(absent))
            .with_context(|| format!("writing {}", path.display()))?;
        info!(
            "{}: {} of {} entries present",
            path.display(),
            assoc.present_count(),
            assoc.len()
        );
    }
    Ok(())
}

pub fn residual(cfg: &PipelineConfig, t: usize) -> Result<()> {
    let seq = Sequence::open(cfg)?;
    let (current, maps) = reprojected(&seq, cfg, t)?;
    let out = create_out(cfg)?;
    for (s, img, _) in maps {
        let res = range_residual(&current, &img)?;
        let name = format!("residual_{}_{}", seq.stem(t), seq.stem(s));
        write_f32s(
            res.values().iter().copied(),
            &out.join(format!("{name}.bin")),
        )?;
        let (png, bounds) = render_residual(&res, 1.0);
        write_png_with_bounds(&png, &bounds, "residual", &out.join(format!("{name}.png")))?;
    }
    Ok(())
}

fn prediction_words(labels: &[u8], cfg: &PipelineConfig) -> LabelArray {
    let ids = cfg.output_ids;
    LabelArray(
        labels
            .iter()
            .map(|&m| if m == 1 { ids.moving_id } else { ids.static_id })
            .collect(),
    )
}

pub fn segment(cfg: &PipelineConfig, evaluate: bool, strict: bool) -> Result<()> {
    let seq = Sequence::open(cfg)?;
    let pred_dir = create_out(cfg)?.join("predictions");
    fs::create_dir_all(&pred_dir).with_context(|| format!("creating {}", pred_dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()?;

    let run_one = |t: usize| -> Result<Option<ConfusionMatrix>> {
        let (current, result) = segment_scan(&seq, cfg, t)?;
        let labels = match result {
            Some(r) => r.labels,
            None => vec![0; current.cloud.len()],
        };
        let path = pred_dir.join(format!("{}.label", seq.stem(t)));
        write_labels(&prediction_words(&labels, cfg), &path)?;
        if !evaluate {
            return Ok(None);
        }
        match seq.ground_truth(t)? {
            Some(gt) => Ok(Some(ConfusionMatrix::default().accumulate(&labels, &gt)?)),
            None => Ok(None),
        }
    };
    let outcomes: Vec<Result<Option<ConfusionMatrix>>> = pool.install(|| {
        if strict {
            match (0..seq.len())
                .into_par_iter()
                .map(run_one)
                .collect::<Result<Vec<_>>>()
            {
                Ok(v) => v.into_iter().map(Ok).collect(),
                Err(e) => vec![Err(e)],
            }
        } else {
            (0..seq.len()).into_par_iter().map(run_one).collect()
        }
    });

    let mut report = SequenceReport::new(
        cfg.sequence
            .seq_dir
            .as_deref()
            .and_then(Path::file_name)
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sequence".into()),
    );
    let mut failed = 0;
    for (t, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(Some(cm)) => report.push(seq.stem(t), cm),
            Ok(None) => {}
            Err(e) => {
                failed += 1;
                if strict {
                    bail!("scan failed: {e:#}");
                }
                warn!("scan {} failed: {e:#}", seq.stem(t));
            }
        }
    }
    info!(
        "segmented {} scans into {} ({failed} failed)",
        seq.len(),
        pred_dir.display()
    );
    if evaluate {
        write_report(&report, &cfg.output)?;
    }
    Ok(())
}

fn write_report(report: &SequenceReport, out: &Path) -> Result<()> {
    if report.scans.is_empty() {
        warn!("no ground truth found; report is empty");
    }
    fs::write(out.join("report.txt"), report.to_string())?;
    fs::write(out.join("report.kv"), report.to_key_value())?;
    print!("{report}");
    Ok(())
}

pub fn evaluate(cfg: &PipelineConfig, pred_dir: Option<&Path>) -> Result<()> {
    let seq = Sequence::open(cfg)?;
    let pred_dir: PathBuf =
        pred_dir.map_or_else(|| cfg.output.join("predictions"), Path::to_path_buf);
    let spec = &cfg.segment.classes;
    let moving_id = cfg.output_ids.moving_id;
    let mut report = SequenceReport::new(pred_dir.display().to_string());
    for t in 0..seq.len() {
        let Some(gt) = seq.ground_truth(t)? else {
            warn!("no ground truth for {}", seq.stem(t));
            continue;
        };
        let path = pred_dir.join(format!("{}.label", seq.stem(t)));
        let pred: Vec<u8> = read_labels(&path)?
            .0
            .iter()
            .map(|&w| {
                let sem = rangemos::dataset::semantic_id(w);
                u8::from(w == moving_id || spec.is_moving(sem))
            })
            .collect();
        let cm = ConfusionMatrix::default()
            .accumulate(&pred, &gt)
            .with_context(|| format!("scoring {}", path.display()))?;
        report.push(seq.stem(t), cm);
    }
    create_out(cfg)?;
    write_report(&report, &cfg.output)
}

pub fn render(
    cfg: &PipelineConfig,
    t: usize,
    mode: RenderMode,
    pred: Option<&Path>,
    clip: f32,
    all_channels: bool,
) -> Result<()> {
    let seq = Sequence::open(cfg)?;
    check_index(&seq, t)?;
    let out = create_out(cfg)?;
    let stem = seq.stem(t);
    match mode {
        RenderMode::Range => {
            let (img, _) = spherical_project(&seq.load(t)?.cloud, &cfg.segment.projection);
            let channels: &[Channel] = if all_channels {
                &Channel::ALL
            } else {
                &[Channel::Range]
            };
            for &c in channels {
                let (png, bounds) = render_channel(&img, c, Normalization::MinMax);
                let path = out.join(format!("{stem}.{}.png", c.name()));
                write_png_with_bounds(&png, &bounds, c.name(), &path)?;
            }
        }
        RenderMode::Residual => {
            let (current, maps) = reprojected(&seq, cfg, t)?;
            for (s, img, _) in maps {
                let res = range_residual(&current, &img)?;
                let (png, bounds) = render_residual(&res, clip);
                let path = out.join(format!("residual_{stem}_{}.png", seq.stem(s)));
                write_png_with_bounds(&png, &bounds, "residual", &path)?;
            }
        }
        RenderMode::Association => {
            let (_, maps) = reprojected(&seq, cfg, t)?;
            for (s, _, assoc) in maps {
                write_png(
                    &render_association(&assoc),
                    &out.join(format!("assoc_{stem}_{}.png", seq.stem(s))),
                )?;
            }
        }
        RenderMode::Labels => {
            let (img, mask) = match pred {
                Some(path) => {
                    let cloud = seq.load(t)?.cloud;
                    let (img, _) = spherical_project(&cloud, &cfg.segment.projection);
                    let words = read_labels(path)?;
                    words.check_pairing(&cloud)?;
                    let moving_id = cfg.output_ids.moving_id;
                    let point_moving: Vec<bool> = words
                        .0
                        .iter()
                        .map(|&w| {
                            w == moving_id
                                || cfg
                                    .segment
                                    .classes
                                    .is_moving(rangemos::dataset::semantic_id(w))
                        })
                        .collect();
                    let mask = mask_from_points(&img, &point_moving);
                    (img, mask)
                }
                None => {
                    let (_, result) = segment_scan(&seq, cfg, t)?;
                    match result {
                        Some(r) => (r.image, r.mask),
                        None => {
                            let (img, _) =
                                spherical_project(&seq.load(t)?.cloud, &cfg.segment.projection);
                            let mask = MovingMask::all_static(
                                img.width(),
                                img.height(),
                                img.valid().to_vec(),
                            );
                            (img, mask)
                        }
                    }
                }
            };
            let (png, bounds) = render_labels(&img, &mask)?;
            write_png_with_bounds(
                &png,
                &bounds,
                "range",
                &out.join(format!("{stem}.labels.png")),
            )?;
        }
    }
    Ok(())
}

/// Pixel mask whose moving pixels are those owned by a moving point.
fn mask_from_points(img: &RangeImage, point_moving: &[bool]) -> MovingMask {
    let mut mask = MovingMask::all_static(img.width(), img.height(), img.valid().to_vec());
    for i in 0..img.len() {
        if let Some(p) = img.source_point(i) {
            mask.moving[i] = u8::from(point_moving.get(p).copied().unwrap_or(false));
        }
    }
    mask
}

pub fn synth(
    cfg: &PipelineConfig,
    scans: usize,
    range_noise: f64,
    pose_noise: f64,
    scene: Option<&Path>,
) -> Result<()> {
    let mut scene = match scene {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<SceneConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let mut s = SceneConfig::street(scans, cfg.seed);
            let p = &cfg.segment.projection;
            s.beams = BeamPattern {
                rings: p.height,
                azimuth_steps: p.width,
                fov_up_deg: p.fov_up_deg,
                fov_down_deg: p.fov_down_deg,
            };
            s
        }
    };
    scene.range_noise = range_noise;
    scene.seed = cfg.seed;
    scene.validate()?;

    let root = cfg
        .sequence
        .seq_dir
        .clone()
        .unwrap_or_else(|| cfg.output.clone());
    let scan_dir = root.join("velodyne");
    let label_dir = root.join("labels");
    fs::create_dir_all(&scan_dir)?;
    fs::create_dir_all(&label_dir)?;

    let generated: Vec<_> = (0..scene.scan_count())
        .into_par_iter()
        .map(|s| generate_scan(&scene, s))
        .collect::<rangemos::Result<_>>()?;
    let mut poses: Vec<Pose> = Vec::with_capacity(generated.len());
    for (s, scan) in generated.into_iter().enumerate() {
        write_scan(&scan.cloud, scan_dir.join(format!("{s:06}.bin")))?;
        write_labels(&scan.labels, label_dir.join(format!("{s:06}.label")))?;
        poses.push(scan.pose);
    }
    if pose_noise > 0.0 {
        poses = perturb_translations(&poses, pose_noise, cfg.seed)?;
    }
    let identity = Pose::identity();
    write_poses(&poses, &identity, root.join("poses.txt"))?;
    write_calibration(&identity, &cfg.sequence.calib_key, root.join("calib.txt"))?;
    fs::write(root.join("scene.toml"), toml::to_string_pretty(&scene)?)?;
    info!("wrote {} scans to {}", poses.len(), root.display());
    Ok(())
}

pub fn config_dump(cfg: &PipelineConfig) -> Result<()> {
    print!("{}", toml::to_string_pretty(cfg)?);
    Ok(())
}
