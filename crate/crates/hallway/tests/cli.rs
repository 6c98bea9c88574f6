use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clap::CommandFactory;
use hallway::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Sidecar};
use hallway::cli::Cli;
use hallway::dataset::{read_dataset, write_dataset};
use hallway_core::image::RgbImage;
use hallway_core::models::{build_simple_cnn, Architecture, Head};
use hallway_core::nn::{LossKind, LossSpec, Network};
use hallway_core::pipeline::PipelineSpec;
use hallway_core::recorder::{Dataset, DatasetMeta, Sample};
use hallway_core::simworld::CameraConfig;

fn hallway(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hallway")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    hallway(args).status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The five labelled rows from the paper's table, on 40×20 frames.
fn five_rows(root: &Path) {
    let rows = [(0, 0.0), (1, -0.15), (2, 0.0), (3, 0.08), (4, 0.21)];
    let samples = rows
        .iter()
        .map(|&(id, a)| {
            let img = RgbImage::from_fn(40, 20, |r, c| [(r * 12) as u8, (c * 6) as u8, (id * 50) as u8]);
            Sample::new(id, img, a, id as f64 * 0.05)
        })
        .collect();
    write_dataset(&Dataset::new(samples, DatasetMeta::default()), root).unwrap();
}

#[test]
fn help_documents_every_flag() {
    let cli = Cli::command();
    for sub in cli.get_subcommands() {
        let name = sub.get_name();
        assert!(sub.get_about().is_some(), "{name} has no description");
        let out = hallway(&[name, "--help"]);
        assert_eq!(out.status.code(), Some(0));
        let help = String::from_utf8(out.stdout).unwrap();
        for arg in sub.get_arguments() {
            let Some(long) = arg.get_long() else { continue };
            if long == "help" {
                continue;
            }
            assert!(arg.get_help().is_some(), "{name} --{long} is undocumented");
            assert!(help.contains(&format!("--{long}")), "{name} --help omits --{long}");
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["fly"]), 1);
    assert_eq!(code(&["hist", "--in", s(&missing)]), 1);
    assert_eq!(code(&["tune-pid", "--grid", "8:1:0.5"]), 1);
    assert_eq!(code(&["simulate", "--map", "atlantis", "--out", s(&dir.path().join("t.csv"))]), 2);
    let out = hallway(&["hist", "--in", s(&missing), "--svg", s(&dir.path().join("h.svg"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("labels.csv"), "{err}");
}

#[test]
fn diverging_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    five_rows(&data);
    let cfg = dir.path().join("sgd.json");
    fs::write(&cfg, r#"{"optimizer": "sgd", "momentum": 0.0, "batch_size": 2}"#).unwrap();
    let out = hallway(&[
        "train", "--in", s(&data), "--loss", "ce", "--config", s(&cfg), "--lr", "1e30", "--epochs", "3", "--out",
        s(&dir.path().join("m.ckpt")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stderr).unwrap().contains("non-finite loss"));
}

#[test]
fn hist_of_the_five_row_table() {
    let dir = tempfile::tempdir().unwrap();
    five_rows(dir.path());
    let svg = dir.path().join("hist.svg");
    let out = hallway(&["hist", "--in", s(dir.path()), "--bins", "15", "--svg", s(&svg)]);
    assert_eq!(out.status.code(), Some(0));
    // Width 2/15: −0.15 → 6, 0 → 7, 0.08 → 8, 0.21 → 9.
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "0 0 0 0 0 0 1 2 1 1 0 0 0 0 0");
    let svg = fs::read_to_string(svg).unwrap();
    assert_eq!(svg.matches(r#"class="bar""#).count(), 15);
    assert!(svg.contains(r#"data-bin="7" data-count="2""#));
}

#[test]
fn zero_learning_rate_keeps_the_initial_weights() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    five_rows(&data);
    let ckpt = dir.path().join("model.ckpt");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"batch_size": 2, "seed": 4}"#).unwrap();
    let out = hallway(&[
        "train", "--in", s(&data), "--model", "simple_cnn", "--loss", "ce", "--config", s(&cfg), "--epochs", "1",
        "--lr", "0", "--out", s(&ckpt), "--history", s(&dir.path().join("h.csv")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let loaded = load_checkpoint(&ckpt).unwrap();
    let spec = build_simple_cnn(&[3, 20, 40], Head::Classification(15)).unwrap();
    let init: Network<f32> = spec.build(4).unwrap();
    assert_eq!(loaded.nets, vec![init]);
    assert_eq!(loaded.sidecar.models, vec![spec]);
    assert_eq!(fs::read_to_string(dir.path().join("h.csv")).unwrap().lines().count(), 2);
}

#[test]
fn training_is_deterministic_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    five_rows(&data);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let args = ["train", "--in", s(&data), "--loss", "gaussian_ce", "--epochs", "2", "--seed", "3", "--out", s(&out)];
        assert_eq!(code(&args), 0);
        fs::read(out).unwrap()
    };
    assert_eq!(run("a.ckpt"), run("b.ckpt"));
}

#[test]
fn zero_model_completes_the_straight_corridor() {
    let dir = tempfile::tempdir().unwrap();
    let spec = build_simple_cnn(&[3, 20, 40], Head::Regression).unwrap();
    let net = Network::zeroed(&spec.layers, &spec.input_shape).unwrap();
    let sidecar = Sidecar {
        architecture: Architecture::SimpleCnn,
        head: Head::Regression,
        models: vec![spec],
        pipeline: PipelineSpec::default(),
        pipeline_seed: 0,
        camera: CameraConfig::default().with_size(40, 20),
        loss: LossSpec::of_kind(LossKind::Mse),
        label_scale: 1.0,
    };
    let ckpt = dir.path().join("zero.ckpt");
    save_checkpoint(&ckpt, &Checkpoint { nets: vec![net], sidecar }).unwrap();

    let overlay = dir.path().join("overlay.svg");
    let report = dir.path().join("report.json");
    let out = hallway(&[
        "eval", "--ckpt", s(&ckpt), "--map", "straight", "--overlay", s(&overlay), "--report", s(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(report["outcome"], "completed");
    assert!(report["max_cross_track"].as_f64().unwrap() < 1e-9);
    assert!(fs::read_to_string(overlay).unwrap().contains("<polyline"));
    assert!(dir.path().join("overlay.csv").is_file());
}

#[test]
fn record_augment_hist_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let out = hallway(&[
        "record", "--map", "loop", "--expert", "pid", "--hz", "20", "--duration", "2", "--width", "32", "--height",
        "24", "--out", s(&raw),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ds = read_dataset(&raw).unwrap();
    assert!((38..=41).contains(&ds.len()), "{}", ds.len());
    assert_eq!(ds.meta.map, "loop");

    let spec = dir.path().join("pipeline.json");
    fs::write(&spec, r#"[{"op": "reflect"}]"#).unwrap();
    let aug = dir.path().join("aug");
    assert_eq!(code(&["augment", "--in", s(&raw), "--pipeline", s(&spec), "--out", s(&aug)]), 0);
    let mirrored = read_dataset(&aug).unwrap();
    assert_eq!(mirrored.len(), 2 * ds.len());

    let svg = dir.path().join("h.svg");
    let counts = hallway(&["hist", "--in", s(&aug), "--bins", "15", "--svg", s(&svg)]);
    let counts: Vec<usize> =
        String::from_utf8(counts.stdout).unwrap().split_whitespace().map(|c| c.parse().unwrap()).collect();
    let flipped: Vec<usize> = counts.iter().rev().copied().collect();
    assert_eq!(counts, flipped);
}

#[test]
fn simulate_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        assert_eq!(code(&["simulate", "--map", "lturn", "--expert", "pid", "--max-t", "5", "--out", s(&p)]), 0);
        fs::read_to_string(p).unwrap()
    };
    let a = run("a.csv");
    assert!(a.starts_with("t,x,y,heading,steer\n"));
    assert_eq!(a, run("b.csv"));
}

#[test]
fn tune_pid_prints_the_sweep_result() {
    let out = hallway(&["tune-pid", "--map", "straight", "--grid", "4:8:0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["ku"], 4.0);
}

#[test]
fn reduced_gradcheck() {
    let out = hallway(&["gradcheck", "--model", "simple_cnn", "--reduced"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
