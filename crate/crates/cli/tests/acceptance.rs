//! Acceptance suite. Each criterion runs under its time budget and prints
//! one PASS/FAIL line; the process exits nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rangemos::dataset::{
    encode_labels, encode_scan, parse_pose_lines, read_labels, read_scan, to_semantic_classes,
    write_labels, write_scan,
};
use rangemos::eval::ConfusionMatrix;
use rangemos::synth::{generate, perturb_translations, SceneConfig};
use rangemos::*;
use rangemos_testkit as oracle;

type Outcome = Result<String, String>;

/// Name, time budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, cfg: &ProjectionConfig) -> PointCloud {
    let (up, down) = (cfg.fov_up(), cfg.fov_down());
    let pts = (0..n)
        .map(|_| {
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let pitch = rng.random_range(down..up);
            let r = rng.random_range(1.0..80.0);
            Point::new(
                (r * pitch.cos() * yaw.cos()) as f32,
                (r * pitch.cos() * yaw.sin()) as f32,
                (r * pitch.sin()) as f32,
                rng.random_range(0.0..1.0),
            )
        })
        .collect();
    PointCloud::new(pts).unwrap()
}

fn xyz(cloud: &PointCloud) -> Vec<[f32; 3]> {
    cloud.iter().map(|p| [p.x, p.y, p.z]).collect()
}

fn projection_round_trip() -> Outcome {
    let cfg = ProjectionConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cloud = random_cloud(&mut rng, 10_000, &cfg);
    let (img, _) = spherical_project(&cloud, &cfg);
    let (x, y, z) = (
        img.channel(Channel::X),
        img.channel(Channel::Y),
        img.channel(Channel::Z),
    );
    let mut worst = 0.0f64;
    for q in (0..img.len()).filter(|&q| img.is_valid(q)) {
        let (px, py, pz) = (x[q] as f64, y[q] as f64, z[q] as f64);
        let r = (px * px + py * py + pz * pz).sqrt();
        worst = worst.max((img.range()[q] as f64 - r).abs() / r);
    }
    ensure(worst <= 1e-5, || format!("relative range error {worst:e}"))?;
    let (back, pixels) = back_project(&img);
    ensure(back.len() == img.valid_count(), || {
        "back-projected count differs".into()
    })?;
    for (k, &q) in pixels.iter().enumerate() {
        let src = img.source_point(q).ok_or("valid pixel without source")?;
        let (a, b) = (back[k], cloud[src]);
        ensure(
            a.x.to_bits() == b.x.to_bits()
                && a.y.to_bits() == b.y.to_bits()
                && a.z.to_bits() == b.z.to_bits()
                && a.intensity.to_bits() == b.intensity.to_bits(),
            || format!("pixel {q} does not reproduce point {src}"),
        )?;
    }
    Ok(format!(
        "{} valid pixels, max relative range error {worst:.1e}",
        img.valid_count()
    ))
}

fn min_range_dominance() -> Outcome {
    let cfg = ProjectionConfig::new(512, 64, 3.0, -25.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut contested = 0usize;
    for trial in 0..100 {
        let cloud = random_cloud(&mut rng, 8_000, &cfg);
        let (img, _) = spherical_project(&cloud, &cfg);
        let groups = oracle::project_groups(
            &xyz(&cloud),
            cfg.width,
            cfg.height,
            3.0,
            -25.0,
            cfg.min_range,
        );
        for (q, group) in groups.iter().enumerate() {
            ensure(img.is_valid(q) == !group.is_empty(), || {
                format!("cloud {trial}: pixel {q} validity")
            })?;
            contested += usize::from(group.len() > 1);
            for &i in group {
                let r = oracle::range_f32([cloud[i].x, cloud[i].y, cloud[i].z]);
                ensure(img.range()[q] <= r, || {
                    format!("cloud {trial}: pixel {q} beaten by point {i}")
                })?;
            }
        }
        let (again, _) = spherical_project(&cloud, &cfg);
        for c in Channel::ALL {
            let same = img
                .channel(c)
                .iter()
                .zip(again.channel(c))
                .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || {
                format!("cloud {trial}: channel {} differs between runs", c.name())
            })?;
        }
        ensure(
            (0..img.len()).all(|q| img.source_point(q) == again.source_point(q)),
            || format!("cloud {trial}: winners differ between runs"),
        )?;
    }
    Ok(format!("100 clouds, {contested} contested pixels checked"))
}

fn identity_association() -> Outcome {
    let cfg = ProjectionConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for trial in 0..20 {
        let cloud = random_cloud(&mut rng, 40_000, &cfg);
        let (img, _) = spherical_project(&cloud, &cfg);
        let (_, assoc) =
            reproject_previous(&img, &Pose::identity(), &cfg).map_err(|e| e.to_string())?;
        let feat = FeatureImage::from_range_image(&img);
        let moved = scatter_features(&feat, &assoc).map_err(|e| e.to_string())?;
        for q in (0..img.len()).filter(|&q| img.is_valid(q)) {
            let (u, v) = (q % cfg.width, q / cfg.width);
            ensure(assoc.entry(q) == Some(u + v * cfg.width), || {
                format!("image {trial}: Tr({u},{v}) = {:?}", assoc.entry(q))
            })?;
            ensure(moved.valid()[q], || {
                format!("image {trial}: pixel {q} lost by scatter")
            })?;
            let same = moved
                .pixel(q)
                .iter()
                .zip(feat.pixel(q))
                .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || {
                format!("image {trial}: pixel {q} features changed")
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "20 images, {checked} valid pixels map to themselves"
    ))
}

fn scatter_oracle() -> Outcome {
    let (w, h) = (256, 64);
    let n = w * h;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for c in [1usize, 3, 16] {
        for trial in 0..50 {
            let entries: Vec<Option<u32>> = (0..n)
                .map(|_| rng.random_bool(0.75).then(|| rng.random_range(0..n as u32)))
                .collect();
            let ranges: Vec<f32> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        rng.random_range(0..8) as f32
                    } else {
                        rng.random_range(0.5..80.0)
                    }
                })
                .collect();
            let valid: Vec<bool> = (0..n).map(|_| rng.random_bool(0.9)).collect();
            let data: Vec<f32> = (0..n * c)
                .map(|_| rng.random_range(-100.0..100.0))
                .collect();
            let assoc = AssociationMap::from_parts(w, h, entries.clone(), ranges.clone())
                .map_err(|e| e.to_string())?;
            let feat = FeatureImage::new(w, h, c, data.clone(), valid.clone())
                .map_err(|e| e.to_string())?;
            let got = scatter_features(&feat, &assoc).map_err(|e| e.to_string())?;
            let (want, want_valid) = oracle::scatter(&entries, &ranges, &valid, &data, c);
            let same = got
                .data()
                .iter()
                .zip(&want)
                .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same && got.valid() == want_valid.as_slice(), || {
                format!("C={c} trial {trial} differs")
            })?;
        }
    }
    Ok("150 trials (50 per channel count) bit-exact".into())
}

fn inverse_composition() -> Outcome {
    let cfg = ProjectionConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cloud = random_cloud(&mut rng, 60_000, &cfg);
    let (img, _) = spherical_project(&cloud, &cfg);
    let (_, origin) = back_project(&img);
    let w = cfg.width as i64;
    let (mut ok, mut total, mut worst) = (0usize, 0usize, 1.0f64);
    for trial in 0..20 {
        let dir = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let axis = Unit::new_normalize(dir + Vector3::new(0.0, 0.0, 1e-3));
        let angle = rng.random_range(0.0..10f64.to_radians());
        let t = loop {
            let t = Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            if t.norm() <= 2.0 {
                break t;
            }
        };
        let pose = Pose::from_axis_angle(axis.into_inner(), angle, t);
        let (fwd, a1) = reproject_previous(&img, &pose, &cfg).map_err(|e| e.to_string())?;
        let (_, a2) = reproject_previous(&fwd, &pose.inverse(), &cfg).map_err(|e| e.to_string())?;
        let (mut ok_t, mut total_t) = (0usize, 0usize);
        for &p in &origin {
            // A point survives when it wins its forward pixel and maps back.
            let Some(q) = a1.entry(p) else { continue };
            if fwd.source_point(q).map(|k| origin[k]) != Some(p) {
                continue;
            }
            let Some(back) = a2.entry(q) else { continue };
            total_t += 1;
            let du = (back as i64 % w - p as i64 % w).abs();
            let du = du.min(w - du);
            let dv = (back as i64 / w - p as i64 / w).abs();
            ok_t += usize::from(du.max(dv) <= 1);
        }
        ensure(total_t > 0, || format!("pose {trial}: no surviving points"))?;
        worst = worst.min(ok_t as f64 / total_t as f64);
        ok += ok_t;
        total += total_t;
    }
    let frac = ok as f64 / total as f64;
    ensure(frac >= 0.99, || {
        format!("{:.4}% within one pixel", frac * 100.0)
    })?;
    Ok(format!(
        "{ok}/{total} surviving points within one pixel ({:.3}%, worst pose {:.3}%)",
        frac * 100.0,
        worst * 100.0
    ))
}

fn knn_oracle() -> Outcome {
    let cfg = ProjectionConfig::new(256, 64, 3.0, -25.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut runs = 0;
    for fixture in 0..20 {
        let cloud = random_cloud(&mut rng, 25_000, &cfg);
        let (img, map) = spherical_project(&cloud, &cfg);
        let labels: Vec<u8> = (0..cloud.len())
            .map(|_| u8::from(rng.random_bool(0.3)))
            .collect();
        let cutoff = rng.random_range(0.5..5.0f32);
        let pixel_label: Vec<Option<u8>> = (0..img.len())
            .map(|q| {
                img.source_point(q)
                    .filter(|_| img.is_valid(q))
                    .map(|s| labels[s])
            })
            .collect();
        let centers: Vec<Option<(i64, i64)>> = (0..cloud.len())
            .map(|i| match (map.pixels[i], map.continuous[i]) {
                (Some((u, v)), _) => Some((u as i64, v as i64)),
                (None, Some((u, v))) => Some((u.floor() as i64, v.floor() as i64)),
                _ => None,
            })
            .collect();
        let point_range: Vec<f32> = cloud
            .iter()
            .map(|p| oracle::range_f32([p.x, p.y, p.z]))
            .collect();
        let fx = oracle::KnnFixture {
            width: img.width(),
            height: img.height(),
            pixel_range: img.range(),
            pixel_label: &pixel_label,
            centers: &centers,
            point_range: &point_range,
            labels: &labels,
        };
        for k in [1usize, 5] {
            for window in [3usize, 5] {
                for weighting in [Weighting::Uniform, Weighting::InverseRangeGap] {
                    let knn = KnnConfig {
                        k,
                        window,
                        range_cutoff: cutoff,
                        weighting,
                    };
                    let got =
                        knn_refine(&cloud, &map, &img, &labels, &knn).map_err(|e| e.to_string())?;
                    let want = oracle::knn_vote(
                        &fx,
                        k,
                        window,
                        cutoff,
                        weighting == Weighting::InverseRangeGap,
                    );
                    ensure(got == want, || {
                        format!("fixture {fixture} k={k} window={window} {weighting:?} differs")
                    })?;
                    runs += 1;
                }
            }
        }
    }
    Ok(format!("20 fixtures, {runs} configurations identical"))
}

fn metric_exactness() -> Outcome {
    let cm = |tp, fp, fn_, tn| ConfusionMatrix { tp, fp, fn_, tn };
    let fixtures = [
        (cm(3, 1, 1, 10), Some(0.6)),
        (cm(0, 0, 0, 0), None),
        (cm(0, 0, 0, 42), None),
        (cm(5, 0, 0, 3), Some(1.0)),
        (cm(0, 2, 3, 1), Some(0.0)),
        (cm(1, 1, 1, 0), Some(1.0 / 3.0)),
    ];
    for (c, want) in fixtures {
        ensure(c.iou_moving() == want, || {
            format!("{c:?}: {:?} != {want:?}", c.iou_moving())
        })?;
    }
    // Hand-counted from labels: tp at 0,4; fp at 1; fn at 2; tn at 3,5.
    let counted = ConfusionMatrix::default()
        .accumulate(&[1, 1, 0, 0, 1, 0], &[1, 0, 1, 0, 1, 0])
        .map_err(|e| e.to_string())?;
    ensure(counted == cm(2, 1, 1, 2), || format!("counted {counted:?}"))?;
    ensure(counted.iou_moving() == Some(0.5), || "counted IoU".into())?;
    Ok(format!(
        "{} fixtures exact, 3/1/1 gives 0.6",
        fixtures.len() + 1
    ))
}

fn sequence_iou(
    scans: &[rangemos::synth::SynthScan],
    poses: &[Pose],
    from: usize,
) -> Result<f64, String> {
    let cfg = SegmentConfig::default();
    let classes: Vec<Vec<u16>> = scans
        .iter()
        .map(|s| to_semantic_classes(&s.labels, &cfg.classes))
        .collect();
    let frames: Vec<Frame> = scans
        .iter()
        .zip(&classes)
        .zip(poses)
        .map(|((s, c), pose)| Frame {
            cloud: &s.cloud,
            classes: c,
            pose,
        })
        .collect();
    let preds = segment_sequence(&frames, 1, &cfg).map_err(|e| e.to_string())?;
    let mut cm = ConfusionMatrix::default();
    for (pred, scan) in preds.iter().zip(scans).skip(from) {
        cm = cm
            .accumulate(pred, &scan.moving)
            .map_err(|e| e.to_string())?;
    }
    cm.iou_moving()
        .ok_or_else(|| "no moving points".to_string())
}

fn end_to_end_synthetic() -> Outcome {
    let scene = SceneConfig::street(10, 0);
    let scans = generate(&scene).map_err(|e| e.to_string())?;
    let exact: Vec<Pose> = scans.iter().map(|s| s.pose).collect();
    let clean = sequence_iou(&scans, &exact, 0)?;
    let clean_history = sequence_iou(&scans, &exact, 1)?;
    ensure(clean >= 0.90, || {
        format!("noise-free IoU {clean:.4} < 0.90")
    })?;
    let mut noisy_ious = Vec::new();
    for seed in [1u64, 2] {
        let noisy = perturb_translations(&exact, 0.2, seed).map_err(|e| e.to_string())?;
        let iou = sequence_iou(&scans, &noisy, 0)?;
        ensure(iou < clean, || {
            format!("pose noise seed {seed}: IoU {iou:.4} not below {clean:.4}")
        })?;
        noisy_ious.push(format!("{iou:.4}"));
    }
    Ok(format!(
        "IoU {clean:.4} over all 10 scans ({clean_history:.4} over scans with history); sigma=0.2 m gives {}",
        noisy_ious.join(", ")
    ))
}

fn io_round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let words: Vec<u32> = (0..5000).map(|_| rng.random()).collect();
    let labels = LabelArray(words);
    let lpath = dir.path().join("a.label");
    write_labels(&labels, &lpath).map_err(|e| e.to_string())?;
    let first = fs::read(&lpath).map_err(|e| e.to_string())?;
    let back = read_labels(&lpath).map_err(|e| e.to_string())?;
    ensure(back == labels && encode_labels(&back) == first, || {
        "label round trip differs".into()
    })?;
    let lpath2 = dir.path().join("b.label");
    write_labels(&back, &lpath2).map_err(|e| e.to_string())?;
    ensure(
        fs::read(&lpath2).map_err(|e| e.to_string())? == first,
        || "label rewrite not byte-identical".into(),
    )?;

    let cloud = random_cloud(&mut rng, 5000, &ProjectionConfig::default());
    let spath = dir.path().join("a.bin");
    write_scan(&cloud, &spath).map_err(|e| e.to_string())?;
    let read = read_scan(&spath).map_err(|e| e.to_string())?;
    ensure(
        encode_scan(&read) == encode_scan(&cloud) && read == cloud,
        || "scan round trip differs".into(),
    )?;

    let poses = parse_pose_lines("1 0 0 0 0 1 0 0 0 0 1 0\n", Path::new("poses.txt"))
        .map_err(|e| e.to_string())?;
    ensure(poses.len() == 1, || "pose count".into())?;
    let diff = poses[0].max_abs_diff(&Pose::identity());
    ensure(diff <= 1e-9, || format!("identity pose off by {diff:e}"))?;
    Ok("labels, scans and identity pose round-trip exactly".into())
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rangemos"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "rangemos {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn segment_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seq = dir.path().join("seq");
    let seq_s = seq.to_str().unwrap();
    run_cli(&[
        "synth",
        "--seq-dir",
        seq_s,
        "--scans",
        "10",
        "--seed",
        "7",
        "--range-noise",
        "0.02",
    ])?;
    let mut outputs = Vec::new();
    for (run, jobs) in [(0, "4"), (1, "2")] {
        let out = dir.path().join(format!("run{run}"));
        run_cli(&[
            "segment",
            "--seq-dir",
            seq_s,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
            "--jobs",
            jobs,
        ])?;
        let pred = out.join("predictions");
        let mut files: Vec<_> = fs::read_dir(&pred)
            .map_err(|e| e.to_string())?
            .map(|e| e.map(|e| e.path()).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        files.sort();
        let contents: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| {
                Ok((
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(p).map_err(|e| e.to_string())?,
                ))
            })
            .collect::<Result<_, String>>()?;
        outputs.push(contents);
    }
    ensure(outputs[0].len() == 10, || {
        format!("{} prediction files", outputs[0].len())
    })?;
    ensure(outputs[0] == outputs[1], || {
        "prediction files differ between runs".into()
    })?;
    Ok("10 prediction files byte-identical across two runs".into())
}

fn main() -> std::process::ExitCode {
    let criteria: [Criterion; 10] = [
        ("projection round trip", 5, projection_round_trip),
        ("min-range dominance", 10, min_range_dominance),
        ("identity association", 5, identity_association),
        ("scatter oracle equivalence", 30, scatter_oracle),
        ("inverse composition bound", 10, inverse_composition),
        ("kNN oracle equivalence", 20, knn_oracle),
        ("metric exactness", 1, metric_exactness),
        ("end-to-end synthetic MOS", 60, end_to_end_synthetic),
        ("I/O round trips", 1, io_round_trips),
        ("segment determinism", 60, segment_determinism),
    ];
    let mut failures = 0;
    let total = criteria.len();
    for (i, (name, budget, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let over = took > Duration::from_secs(budget);
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("over the {budget} s budget; {d}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!(
            "[{status}] {:>2}. {name} ({:.2} s / {budget} s): {detail}",
            i + 1,
            took.as_secs_f64()
        );
    }
    if failures == 0 {
        println!("acceptance: all {total} criteria passed");
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of {total} criteria failed");
        std::process::ExitCode::FAILURE
    }
}
