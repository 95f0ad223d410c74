use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rangemos::dataset::read_labels;
use rangemos::AssociationMap;

const SMALL: [&str; 4] = ["--width", "256", "--height", "16"];

fn rangemos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rangemos"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = rangemos(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(SMALL).collect()
}

struct Fixture {
    _dir: tempfile::TempDir,
    seq: PathBuf,
    out: PathBuf,
}

impl Fixture {
    fn new(scans: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let seq = dir.path().join("seq");
        let out = dir.path().join("out");
        let n = scans.to_string();
        ok(&with_small(&[
            "synth",
            "--seq-dir",
            seq.to_str().unwrap(),
            "--scans",
            &n,
        ]));
        Self {
            _dir: dir,
            seq,
            out,
        }
    }

    fn seq(&self) -> &str {
        self.seq.to_str().unwrap()
    }

    fn out(&self) -> &str {
        self.out.to_str().unwrap()
    }

    fn run(&self, cmd: &[&str]) -> Output {
        let mut args = cmd.to_vec();
        args.extend(["--seq-dir", self.seq(), "--out", self.out()]);
        rangemos(&with_small(&args))
    }

    fn prediction(&self, scan: usize) -> Vec<u32> {
        read_labels(
            self.out
                .join("predictions")
                .join(format!("{scan:06}.label")),
        )
        .unwrap()
        .0
    }
}

fn read_png(path: &Path) -> (u32, u32, Vec<u8>) {
    let decoder = png::Decoder::new(std::io::BufReader::new(File::open(path).unwrap()));
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    assert_eq!(info.color_type, png::ColorType::Rgb);
    assert_eq!(info.bit_depth, png::BitDepth::Eight);
    buf.truncate(info.buffer_size());
    (info.width, info.height, buf)
}

#[test]
fn synth_writes_a_sequence() {
    let fx = Fixture::new(3);
    for s in 0..3 {
        assert!(fx.seq.join(format!("velodyne/{s:06}.bin")).is_file());
        assert!(fx.seq.join(format!("labels/{s:06}.label")).is_file());
    }
    let poses = fs::read_to_string(fx.seq.join("poses.txt")).unwrap();
    assert_eq!(poses.lines().count(), 3);
    assert!(fs::read_to_string(fx.seq.join("calib.txt"))
        .unwrap()
        .starts_with("Tr:"));
    assert!(fx.seq.join("scene.toml").is_file());
}

#[test]
fn segment_writes_one_file_per_scan_with_static_boundary() {
    let fx = Fixture::new(5);
    assert!(fx.run(&["segment", "--n-prev", "2"]).status.success());
    for s in 0..5 {
        let words = fx.prediction(s);
        assert!(!words.is_empty());
        assert!(words.iter().all(|&w| w == 9 || w == 251));
        if s < 2 {
            assert!(
                words.iter().all(|&w| w == 9),
                "scan {s} should be all static"
            );
        }
    }
    assert!(fx.prediction(3).contains(&251));
}

#[test]
fn evaluate_report_has_iou_line() {
    let fx = Fixture::new(4);
    let out = fx.run(&["segment", "--evaluate"]);
    assert!(out.status.success());
    let kv = fs::read_to_string(fx.out.join("report.kv")).unwrap();
    let line = kv.lines().find(|l| l.starts_with("iou_moving=")).unwrap();
    let iou: f64 = line.trim_start_matches("iou_moving=").parse().unwrap();
    assert!(iou > 0.5 && iou <= 1.0, "{iou}");
    assert!(fx.out.join("report.txt").is_file());

    // Scoring the written files separately agrees.
    fs::remove_file(fx.out.join("report.kv")).unwrap();
    assert!(fx.run(&["evaluate"]).status.success());
    assert_eq!(fs::read_to_string(fx.out.join("report.kv")).unwrap(), kv);
}

#[test]
fn missing_pose_file_fails_before_processing() {
    let fx = Fixture::new(2);
    fs::remove_file(fx.seq.join("poses.txt")).unwrap();
    let out = fx.run(&["segment"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("pose file"));
    assert!(!fx.out.join("predictions").exists());
}

#[test]
fn strict_controls_exit_status_on_bad_scans() {
    let fx = Fixture::new(4);
    let bad = fx.seq.join("velodyne/000002.bin");
    let mut bytes = fs::read(&bad).unwrap();
    bytes.truncate(bytes.len() - 5);
    fs::write(&bad, bytes).unwrap();

    let relaxed = fx.run(&["segment"]);
    assert!(relaxed.status.success());
    assert!(String::from_utf8_lossy(&relaxed.stderr).contains("000002"));
    assert!(fx.out.join("predictions/000000.label").is_file());
    assert!(!fx.out.join("predictions/000002.label").exists());

    assert!(!fx.run(&["segment", "--strict"]).status.success());
}

#[test]
fn render_range_has_image_dimensions() {
    let fx = Fixture::new(2);
    assert!(fx
        .run(&[
            "render",
            "--index",
            "0",
            "--mode",
            "range",
            "--all-channels"
        ])
        .status
        .success());
    for name in ["range", "x", "y", "z", "intensity"] {
        let (w, h, _) = read_png(&fx.out.join(format!("000000.{name}.png")));
        assert_eq!((w, h), (256, 16));
        assert!(fx.out.join(format!("000000.{name}.txt")).is_file());
    }
}

#[test]
fn render_labels_without_moving_points_has_no_red() {
    let fx = Fixture::new(3);
    assert!(fx.run(&["segment"]).status.success());
    let pred = fx.out.join("predictions/000000.label");
    assert!(fx
        .run(&[
            "render",
            "--index",
            "0",
            "--mode",
            "labels",
            "--pred",
            pred.to_str().unwrap()
        ])
        .status
        .success());
    let (_, _, rgb) = read_png(&fx.out.join("000000.labels.png"));
    assert!(rgb.chunks(3).all(|p| p != [255, 0, 0]));

    // Scan 2 sees the car, computed on the fly.
    assert!(fx
        .run(&["render", "--index", "2", "--mode", "labels"])
        .status
        .success());
    let (_, _, rgb) = read_png(&fx.out.join("000002.labels.png"));
    assert!(rgb.chunks(3).any(|p| p == [255, 0, 0]));
}

#[test]
fn render_association_marks_absent_black() {
    let fx = Fixture::new(2);
    assert!(fx.run(&["associate", "--index", "1"]).status.success());
    assert!(fx
        .run(&["render", "--index", "1", "--mode", "association"])
        .status
        .success());
    let bytes = fs::read(fx.out.join("assoc_000001_000000.bin")).unwrap();
    let assoc = AssociationMap::decode(&bytes, 256, 16).unwrap();
    let (_, _, rgb) = read_png(&fx.out.join("assoc_000001_000000.png"));
    let mut absent = 0;
    for (i, p) in rgb.chunks(3).enumerate() {
        if assoc.entry(i).is_none() {
            absent += 1;
            assert_eq!(p, [0, 0, 0]);
        } else {
            assert_eq!(p[2], 255);
        }
    }
    assert!(absent > 0);
}

#[test]
fn associate_zero_sentinel() {
    let fx = Fixture::new(2);
    assert!(fx
        .run(&["associate", "--index", "1", "--zero-sentinel"])
        .status
        .success());
    let bytes = fs::read(fx.out.join("assoc_000001_000000.bin")).unwrap();
    assert_eq!(bytes.len(), 256 * 16 * 4);
    let words: Vec<i32> = bytes
        .chunks(4)
        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    assert!(words.iter().all(|&w| w >= 0));
    assert!(words.contains(&0));
}

#[test]
fn residual_and_project_outputs() {
    let fx = Fixture::new(2);
    assert!(fx.run(&["residual", "--index", "1"]).status.success());
    let res = fs::read(fx.out.join("residual_000001_000000.bin")).unwrap();
    assert_eq!(res.len(), 256 * 16 * 4);
    assert!(fx.out.join("residual_000001_000000.png").is_file());

    assert!(fx.run(&["project", "--index", "1"]).status.success());
    let raw = fs::read(fx.out.join("000001.range.bin")).unwrap();
    assert_eq!(raw.len(), 5 * 256 * 16 * 4);
}

#[test]
fn unknown_render_mode_is_a_usage_error() {
    let fx = Fixture::new(2);
    let out = fx.run(&["render", "--index", "0", "--mode", "depth"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_dump_reflects_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "n_prev = 3\n[segment.knn]\nk = 7\n").unwrap();
    let out = ok(&[
        "config",
        "dump",
        "--config",
        path.to_str().unwrap(),
        "--knn-k",
        "9",
        "--tau",
        "0.25",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let value: toml::Table = toml::from_str(&text).unwrap();
    assert_eq!(value["n_prev"].as_integer(), Some(3));
    let seg = value["segment"].as_table().unwrap();
    assert_eq!(seg["knn"]["k"].as_integer(), Some(9));
    assert_eq!(seg["knn"]["window"].as_integer(), Some(5));
    assert_eq!(
        seg["classifier"]["residual_threshold"].as_float(),
        Some(0.25)
    );
    assert_eq!(seg["projection"]["width"].as_integer(), Some(2048));
}

#[test]
fn invalid_flags_are_rejected() {
    let out = rangemos(&["config", "dump", "--knn-window", "4"]);
    assert!(!out.status.success());
    let out = rangemos(&["config", "dump", "--n-prev", "0"]);
    assert!(!out.status.success());
}
