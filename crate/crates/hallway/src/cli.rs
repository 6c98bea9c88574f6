//! `hallway` subcommands. Exit codes: 0 ok, 1 usage, 2 data error, 3
//! numeric failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use hallway_core::evalloop::{
    offline_metrics, overlay_csv, overlay_svg, rollout, ConstantPolicy, EvalReport, ExpertPolicy, ModelPolicy, Policy,
    RolloutConfig, SequencePolicy, TrajectoryLog,
};
use hallway_core::expert::{expert_gains, zn_tune, CorridorPlant, WallFollower};
use hallway_core::models::{
    build_autoencoder, build_gru_head, build_pilotnet, build_simple_cnn, embed_sequences, prepare_examples, train,
    train_autoencoder, train_examples, Architecture, Head, ModelSpec, TrainConfig, TrainError, TrainHistory,
};
use hallway_core::nn::{grad_check, GradCheckOptions, LossKind, LossSpec, Network, Target};
use hallway_core::pipeline::{Op, PipelineSpec};
use hallway_core::recorder::{label_histogram, record_expert, Dataset, RecordConfig, Sample};
use hallway_core::simworld::{load_world, BundledMap, CameraConfig, WorldMap};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Sidecar};
use crate::dataset::{read_dataset, write_dataset};
use crate::error::Error;
use crate::plot::{histogram_svg, loss_svg};
use crate::server::{self, SessionConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// A failed invocation: exit code plus a one-line reason.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, msg: msg.into() }
    }

    fn numeric(msg: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERIC, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numeric() { EXIT_NUMERIC } else { EXIT_DATA };
        Self { code, msg: e.to_string() }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}
data_error!(
    hallway_core::simworld::WorldError,
    hallway_core::recorder::RecordError,
    hallway_core::pipeline::PipelineError,
    hallway_core::evalloop::EvalError,
    hallway_core::nn::NnError,
    TrainError
);

type Outcome = Result<(), Failure>;

#[derive(Parser, Debug)]
#[command(name = "hallway", version, about = "Behavioral-cloning workbench for a simulated indoor car")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Drive a map with the PID expert or a zero-steer policy and write the trajectory as CSV
    Simulate(SimulateArgs),
    /// Find the ultimate gain and period on a straight corridor and print Ziegler–Nichols gains
    TunePid(TunePidArgs),
    /// Record a dataset with the PID expert, or by teleoperation through the server
    Record(RecordArgs),
    /// Apply a pipeline spec to a dataset and write the result as a new dataset
    Augment(AugmentArgs),
    /// Plot the steering-label histogram of a dataset
    Hist(HistArgs),
    /// Train a model on a dataset and write a checkpoint with its JSON sidecar
    Train(TrainArgs),
    /// Drive a map with a trained model and write the overlay plot and report
    Eval(EvalArgs),
    /// Compare analytic and numerical gradients of a model
    Gradcheck(GradcheckArgs),
    /// Run the telemetry and teleoperation server
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct MapArg {
    /// Bundled map name (straight, loop, lturn) or path to a .world file
    #[arg(long, default_value = "loop")]
    pub map: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExpertKind {
    Pid,
    Zero,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub map: MapArg,
    /// Steering policy
    #[arg(long, value_enum, default_value = "pid")]
    pub expert: ExpertKind,
    /// Trajectory CSV (t,x,y,heading,steer)
    #[arg(long)]
    pub out: PathBuf,
    /// Stop after this many simulated seconds
    #[arg(long, default_value_t = 120.0)]
    pub max_t: f64,
    /// Forward speed in m/s
    #[arg(long, default_value_t = 0.8)]
    pub speed: f64,
}

#[derive(Args, Debug)]
pub struct TunePidArgs {
    /// Straight corridor to tune on (bundled name or .world path)
    #[arg(long, default_value = "straight")]
    pub map: String,
    /// Proportional gains to sweep, as start:stop:step (inclusive)
    #[arg(long, default_value = "0.5:8:0.5")]
    pub grid: String,
    /// Initial offset from the centerline toward the left wall, meters
    #[arg(long, default_value_t = 0.1)]
    pub offset: f64,
}

#[derive(Args, Debug)]
pub struct RecordArgs {
    #[command(flatten)]
    pub map: MapArg,
    /// Expert driving the car (ignored with --teleop)
    #[arg(long, value_enum, default_value = "pid")]
    pub expert: ExpertKind,
    /// Camera rate in Hz
    #[arg(long, default_value_t = 20.0)]
    pub hz: f64,
    /// Output dataset directory
    #[arg(long)]
    pub out: PathBuf,
    /// Seconds to drive
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    /// Std of Gaussian noise on the executed steer; labels stay clean
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Seed for the steering noise
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Camera width in pixels
    #[arg(long, default_value_t = 640)]
    pub width: usize,
    /// Camera height in pixels
    #[arg(long, default_value_t = 480)]
    pub height: usize,
    /// Also store 16-bit depth maps
    #[arg(long)]
    pub depth: bool,
    /// Drive by hand through the server instead of the expert
    #[arg(long)]
    pub teleop: bool,
    /// Server port for --teleop
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// Input dataset directory
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Pipeline spec: JSON array of ops
    #[arg(long)]
    pub pipeline: PathBuf,
    /// Output dataset directory
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for randomized stages
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct HistArgs {
    /// Dataset directory
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Number of uniform bins over [-1, 1]
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
    /// Output SVG
    #[arg(long)]
    pub svg: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset directory
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Architecture
    #[arg(long, value_parser = ["simple_cnn", "pilotnet", "ae_gru"], default_value = "simple_cnn")]
    pub model: String,
    /// Loss; mse trains a regression head, the others a classification head
    #[arg(long, value_parser = ["mse", "ce", "weighted_ce", "gaussian_ce"], default_value = "ce")]
    pub loss: String,
    /// TrainConfig JSON; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output checkpoint; the sidecar goes to <out>.json
    #[arg(long)]
    pub out: PathBuf,
    /// Number of epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Seed for initialization, splitting and shuffling
    #[arg(long)]
    pub seed: Option<u64>,
    /// Steering bins for classification losses
    #[arg(long)]
    pub bins: Option<usize>,
    /// Keep the epoch with the lowest validation loss instead of the last
    #[arg(long)]
    pub best: bool,
    /// Per-epoch history CSV
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Loss curve SVG
    #[arg(long)]
    pub loss_svg: Option<PathBuf>,
    /// Encoder bottleneck width (ae_gru)
    #[arg(long, default_value_t = 10)]
    pub embedding: usize,
    /// GRU hidden width (ae_gru)
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    /// Frames per GRU window (ae_gru)
    #[arg(long, default_value_t = 5)]
    pub seq_len: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub ckpt: PathBuf,
    #[command(flatten)]
    pub map: MapArg,
    /// Expert/model overlay SVG; the CSV goes next to it
    #[arg(long)]
    pub overlay: PathBuf,
    /// Report JSON
    #[arg(long)]
    pub report: PathBuf,
    /// Decode classification outputs by softmax expectation instead of argmax
    #[arg(long)]
    pub expectation: bool,
    /// Stop after this many simulated seconds
    #[arg(long, default_value_t = 120.0)]
    pub max_t: f64,
    /// Dataset to score offline (accuracy, confusion, entropy)
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Architecture
    #[arg(long, value_parser = ["simple_cnn", "pilotnet", "ae_gru"], default_value = "simple_cnn")]
    pub model: String,
    /// Use a small input (20x40 for simple_cnn, the smallest valid size otherwise)
    #[arg(long)]
    pub reduced: bool,
    /// Largest acceptable relative error
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Seed for weights, input and the sampled entries
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[command(flatten)]
    pub map: MapArg,
    /// TCP port; 0 picks a free one
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Address to bind
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Simulation rate in Hz
    #[arg(long, default_value_t = 20.0)]
    pub tick: f64,
    /// Directory for recordings made through the server
    #[arg(long, default_value = "recordings")]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs, prints a one-line reason on
/// failure and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

pub fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::TunePid(a) => tune_pid(a),
        Command::Record(a) => record(a),
        Command::Augment(a) => augment(a),
        Command::Hist(a) => hist(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Serve(a) => serve(a),
    }
}

/// Bundled map by name, or a `.world` file.
pub fn load_map(spec: &str) -> Result<(WorldMap, String), Error> {
    if let Some(m) = BundledMap::from_name(spec) {
        return Ok((m.load(), m.name().into()));
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::UnknownMap(spec.into()));
    }
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let name = path.file_stem().map_or_else(|| spec.into(), |s| s.to_string_lossy().into_owned());
    Ok((load_world(&text)?, name))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    fs::write(path, contents).map_err(Error::io(path))
}

fn trajectory_csv(log: &TrajectoryLog) -> String {
    let mut s = String::from("t,x,y,heading,steer\n");
    for e in &log.entries {
        s.push_str(&format!("{},{},{},{},{}\n", e.t, e.x, e.y, e.heading, e.steer));
    }
    s
}

fn expert_rollout(map: &WorldMap, cfg: &RolloutConfig) -> Result<TrajectoryLog, Failure> {
    let mut p = ExpertPolicy(WallFollower::for_map(map, expert_gains()));
    Ok(rollout(&mut p, map, cfg)?)
}

fn simulate(a: SimulateArgs) -> Outcome {
    let (map, _) = load_map(&a.map.map)?;
    let cfg = RolloutConfig { speed: a.speed, max_t: a.max_t, ..RolloutConfig::default() };
    let log = match a.expert {
        ExpertKind::Pid => expert_rollout(&map, &cfg)?,
        ExpertKind::Zero => rollout(&mut ConstantPolicy(0.0), &map, &cfg)?,
    };
    write_file(&a.out, trajectory_csv(&log))?;
    println!("{:?} after {:.2} s, completion {:.3}", log.outcome, log.duration(), log.completion);
    Ok(())
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad grid value {p:?}")))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("grid must be start:stop:step, got {s:?}"));
    };
    if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
        return Err(format!("grid {s:?} must have step > 0 and stop >= start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

fn tune_pid(a: TunePidArgs) -> Outcome {
    let grid = parse_grid(&a.grid).map_err(Failure::usage)?;
    let (map, _) = load_map(&a.map)?;
    let plant = CorridorPlant::straight(map, a.offset);
    let r = zn_tune(plant.p_only_runner(), &grid).map_err(|e| Failure { code: EXIT_DATA, msg: e.to_string() })?;
    println!("{}", serde_json::to_string_pretty(&r).expect("result serializes"));
    Ok(())
}

fn record(a: RecordArgs) -> Outcome {
    if !(a.hz > 0.0 && a.duration > 0.0) {
        return Err(Failure::usage("--hz and --duration must be positive"));
    }
    let (map, name) = load_map(&a.map.map)?;
    let camera = CameraConfig::default().with_size(a.width, a.height);
    if a.teleop {
        let mut cfg = SessionConfig::new(BundledMap::Loop, &a.out);
        cfg.map = map;
        cfg.map_name = name;
        cfg.tick_hz = a.hz;
        cfg.camera = camera;
        return serve_session(cfg, &format!("127.0.0.1:{}", a.port));
    }
    if a.expert != ExpertKind::Pid {
        return Err(Failure::usage("only the pid expert can record; use --teleop to drive by hand"));
    }
    let cfg = RecordConfig {
        hz: a.hz,
        duration: a.duration,
        camera,
        steer_noise: a.noise,
        depth: a.depth,
        seed: a.seed,
        ..RecordConfig::default()
    };
    let mut expert = WallFollower::for_map(&map, expert_gains());
    let mut rec = record_expert(&map, &mut expert, &cfg)?;
    rec.dataset.meta.map = name;
    write_dataset(&rec.dataset, &a.out)?;
    println!(
        "{} samples from {} labels{}",
        rec.dataset.len(),
        rec.labels_published,
        if rec.collided { ", expert collided" } else { "" }
    );
    Ok(())
}

fn augment(a: AugmentArgs) -> Outcome {
    let text = fs::read_to_string(&a.pipeline).map_err(Error::io(&a.pipeline))?;
    let spec = PipelineSpec::from_json(&text)?.with_seed(a.seed);
    if let Some(op) = spec.ops.iter().find(|op| matches!(op, Op::ColorConvert { .. })) {
        return Err(Failure::usage(format!("{op:?} output is not RGB and cannot be stored; apply it at training time")));
    }
    let ds = read_dataset(&a.input)?;
    let mut out = spec.apply_dataset(&ds)?;
    for s in &mut out.samples {
        let img = spec.apply_image(&hallway_core::image::Image::from_rgb(&s.rgb), s.id)?;
        let img = if img.channels == 1 {
            let px: Vec<f32> = img.data.iter().flat_map(|&v| [v, v, v]).collect();
            hallway_core::image::Image { channels: 3, data: px, ..img }
        } else {
            img
        };
        if (img.width, img.height) != (s.rgb.width, s.rgb.height) {
            s.depth = None;
        }
        s.rgb = img.to_rgb();
    }
    write_dataset(&out, &a.out)?;
    println!("{} samples in, {} out", ds.len(), out.len());
    Ok(())
}

fn hist(a: HistArgs) -> Outcome {
    if a.bins == 0 {
        return Err(Failure::usage("--bins must be at least 1"));
    }
    let ds = read_dataset(&a.input)?;
    let counts = label_histogram(ds.angles(), a.bins);
    write_file(&a.svg, histogram_svg(&counts))?;
    println!("{}", counts.iter().map(usize::to_string).collect::<Vec<_>>().join(" "));
    Ok(())
}

fn input_shape(ds: &Dataset, pipeline: &PipelineSpec) -> Result<(CameraConfig, [usize; 3]), Failure> {
    let first: &Sample = ds.samples.first().ok_or_else(|| Failure::from(Error::from(TrainError::EmptyDataset)))?;
    let (w, h) = (first.rgb.width, first.rgb.height);
    let camera = ds.meta.camera.unwrap_or_else(|| CameraConfig::default().with_size(w, h));
    let (ow, oh, oc) = pipeline.output_shape(w, h, 3);
    Ok((camera, [oc, oh, ow]))
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(Error::io(p))?;
            serde_json::from_str(&text).map_err(|e| Failure::from(Error::format(p, e)))?
        }
        None => TrainConfig::default(),
    };
    let kind: LossKind = a.loss.parse().map_err(|e: hallway_core::nn::NnError| Failure::usage(e.to_string()))?;
    cfg.loss.kind = kind;
    if let Some(b) = a.bins {
        cfg.loss.n_bins = b;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(cfg)
}

fn head_for(loss: &LossSpec) -> Head {
    if loss.kind == LossKind::Mse {
        Head::Regression
    } else {
        Head::Classification(loss.n_bins)
    }
}

fn numeric_guard(e: TrainError) -> Failure {
    Error::from(e).into()
}

fn train_cmd(a: TrainArgs) -> Outcome {
    let arch: Architecture = a.model.parse()?;
    let cfg = train_config(&a)?;
    let ds = read_dataset(&a.input)?;
    let (camera, shape) = input_shape(&ds, &cfg.pipeline)?;
    let head = head_for(&cfg.loss);

    let (nets, models, history): (Vec<Network<f32>>, Vec<ModelSpec>, TrainHistory) = match arch {
        Architecture::SimpleCnn | Architecture::Pilotnet => {
            let spec = if arch == Architecture::SimpleCnn {
                build_simple_cnn(&shape, head)?
            } else {
                build_pilotnet(&shape, head)?
            };
            let out = train(&ds, &spec, &cfg).map_err(numeric_guard)?;
            let net = if a.best { out.best } else { out.model };
            (vec![net], vec![spec], out.history)
        }
        Architecture::AeGru => {
            // Windows need time order, so dataset stages are skipped here.
            let pipeline = cfg.pipeline.clone().with_seed(cfg.seed);
            let examples = prepare_examples(&ds, &pipeline)?;
            let (enc_spec, dec_spec) = build_autoencoder(&shape, a.embedding)?;
            let ae = train_autoencoder(&enc_spec, &dec_spec, &examples, &cfg).map_err(numeric_guard)?;
            let seqs = embed_sequences(&ae.encoder, &examples, a.seq_len).map_err(numeric_guard)?;
            let gru = build_gru_head(a.embedding, a.hidden, a.seq_len, head)?;
            let n_val = ((seqs.len() as f64) * cfg.val_fraction).round() as usize;
            let (tr, va) = seqs.split_at(seqs.len() - n_val.min(seqs.len().saturating_sub(1)));
            let out = train_examples(&gru, tr, va, &cfg).map_err(numeric_guard)?;
            let net = if a.best { out.best } else { out.model };
            (vec![ae.encoder, net], vec![enc_spec, gru], out.history)
        }
    };

    let sidecar = Sidecar {
        architecture: arch,
        head,
        models,
        pipeline: cfg.pipeline.clone(),
        pipeline_seed: cfg.seed,
        camera,
        loss: cfg.loss.clone(),
        label_scale: cfg.label_scale,
    };
    save_checkpoint(&a.out, &Checkpoint { nets, sidecar })?;
    if let Some(p) = &a.history {
        write_file(p, history.to_csv())?;
    }
    if let Some(p) = &a.loss_svg {
        write_file(p, loss_svg(&history))?;
    }
    match history.records.last() {
        Some(r) => println!("{} epochs, final train loss {:.6}", history.records.len(), r.train_loss),
        None => println!("no epochs run"),
    }
    Ok(())
}

fn model_policy(ckpt: &Checkpoint, expectation: bool) -> Result<Box<dyn Policy>, Failure> {
    let s = &ckpt.sidecar;
    let pipeline = s.pipeline.clone().with_seed(s.pipeline_seed);
    match ckpt.nets.as_slice() {
        [net] => {
            let mut p = ModelPolicy::new(net.clone(), pipeline, s.head, &s.camera)?;
            p.label_scale = s.label_scale;
            p.expectation = expectation;
            Ok(Box::new(p))
        }
        [enc, head] => Ok(Box::new(SequencePolicy::new(enc.clone(), head.clone(), pipeline, s.head, &s.camera)?)),
        other => Err(Failure { code: EXIT_DATA, msg: format!("checkpoint holds {} networks", other.len()) }),
    }
}

fn eval(a: EvalArgs) -> Outcome {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let (map, _) = load_map(&a.map.map)?;
    let cfg = RolloutConfig { max_t: a.max_t, camera: ckpt.sidecar.camera, ..RolloutConfig::default() };
    let mut policy = model_policy(&ckpt, a.expectation)?;
    let model_log = rollout(policy.as_mut(), &map, &cfg)?;
    let expert_log = expert_rollout(&map, &cfg)?;

    let mut report = EvalReport::from_rollout(&model_log, &map)?;
    if let Some(dir) = &a.data {
        let [net] = ckpt.nets.as_slice() else {
            return Err(Failure::usage("--data needs a single-network checkpoint"));
        };
        let ds = read_dataset(dir)?;
        let s = &ckpt.sidecar;
        let pipeline = s.pipeline.clone().with_seed(s.pipeline_seed);
        report.offline = Some(offline_metrics(net, &pipeline, &ds, s.head, &s.loss, s.label_scale)?);
    }
    write_file(&a.overlay, overlay_svg(&map, &expert_log, &model_log)?)?;
    write_file(&a.overlay.with_extension("csv"), overlay_csv(&expert_log, &model_log)?)?;
    write_file(&a.report, serde_json::to_string_pretty(&report).expect("report serializes"))?;
    println!(
        "model {:?} after {:.2} s (expert {:?} after {:.2} s), completion {:.3}",
        model_log.outcome,
        model_log.duration(),
        expert_log.outcome,
        expert_log.duration(),
        model_log.completion
    );
    Ok(())
}

/// Smallest inputs the gradient check builds each architecture at.
fn gradcheck_spec(arch: Architecture, reduced: bool) -> Result<Vec<ModelSpec>, Failure> {
    let head = Head::Classification(15);
    Ok(match (arch, reduced) {
        (Architecture::SimpleCnn, true) => vec![build_simple_cnn(&[3, 20, 40], head)?],
        (Architecture::SimpleCnn, false) => vec![build_simple_cnn(&[3, 100, 200], head)?],
        (Architecture::Pilotnet, true) => vec![build_pilotnet(&[3, 62, 62], head)?],
        (Architecture::Pilotnet, false) => vec![build_pilotnet(&[3, 66, 200], head)?],
        (Architecture::AeGru, reduced) => {
            let shape = if reduced { [3, 8, 8] } else { [3, 100, 200] };
            let (enc, _) = build_autoencoder(&shape, 10)?;
            vec![enc, build_gru_head(10, 16, 5, head)?]
        }
    })
}

fn gradcheck(a: GradcheckArgs) -> Outcome {
    let arch: Architecture = a.model.parse()?;
    let loss = LossSpec::of_kind(LossKind::Ce);
    let opts = GradCheckOptions { h: 1e-6, max_per_tensor: Some(12), seed: a.seed, check_input: true };
    let mut worst = 0.0f64;
    for spec in gradcheck_spec(arch, a.reduced)? {
        let net: Network<f64> = spec.build(a.seed)?;
        let n: usize = spec.input_shape.iter().product();
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let input: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let r = grad_check(&net, &loss, &input, Target::Class(3), &opts)?;
        println!("{}: max relative error {:.3e} at {} ({} entries)", spec.name, r.max_rel_error, r.worst_at, r.checked);
        worst = worst.max(r.max_rel_error);
    }
    if !(worst <= a.tolerance) {
        return Err(Failure::numeric(format!("gradient error {worst:.3e} exceeds {:.1e}", a.tolerance)));
    }
    Ok(())
}

fn serve_session(cfg: SessionConfig, addr: &str) -> Outcome {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure { code: EXIT_DATA, msg: e.to_string() })?;
    rt.block_on(async {
        let mut handle = server::start(cfg, addr).await?;
        println!("listening on http://{}", handle.addr);
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = handle.wait() => {}
        }
        handle.shutdown().await;
        Ok::<(), Failure>(())
    })
}

fn serve(a: ServeArgs) -> Outcome {
    if !(a.tick > 0.0) {
        return Err(Failure::usage("--tick must be positive"));
    }
    let (map, name) = load_map(&a.map.map)?;
    let mut cfg = SessionConfig::new(BundledMap::Loop, &a.out);
    cfg.map = map;
    cfg.map_name = name;
    cfg.tick_hz = a.tick;
    serve_session(cfg, &format!("{}:{}", a.host, a.port))
}
