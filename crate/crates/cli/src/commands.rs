use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use corridornav::controller::ControllerConfig;
use corridornav::dataset::{
    generate, random_corridors, DatasetConfig, GridConfig, InputRendering, Manifest, PreprocessConfig, Split, Target,
};
use corridornav::estimator::{
    load_model, load_samples, save_model, train, Capture, DeviationEstimator, EstimatorError, Model, NoiseConfig,
    OracleEstimator, RegressorEstimator, RegressorSpec, TrainConfig,
};
use corridornav::flightsim::{
    run_episode, run_sweep, wind_scan, write_trace_csv, write_trace_jsonl, StartSampling, SweepConfig,
};
use corridornav::geometry::{CameraModel, CorridorSpec, Pose};
use corridornav::labeler::label_sample;
use corridornav::metrics::{evaluate, spot_format, write_predictions_csv};
use corridornav::render::Frame;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{
    Command, CorridorArgs, EstimatorArgs, EstimatorKind, EvalArgs, FlyArgs, GenDatasetArgs, LabelArgs, SweepArgs,
    TrainArgs,
};

/// Written before any long computation so an interrupted run still records
/// what was asked for.
#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    config: serde_json::Value,
    seed: Option<u64>,
    version: &'a str,
    outputs: Vec<PathBuf>,
}

fn write_run_manifest(path: &Path, command: &Command, seed: Option<u64>, outputs: Vec<PathBuf>) -> Result<()> {
    let manifest = RunManifest {
        subcommand: command.name(),
        config: serde_json::to_value(command)?,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        outputs,
    };
    write_json(path, &manifest)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// `model.bin` -> `model.<suffix>` in the same directory.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::GenDataset(a) => gen_dataset(command, a),
        Command::Label(a) => label(a),
        Command::Train(a) => train_model(command, a),
        Command::Eval(a) => eval(command, a),
        Command::Fly(a) => fly(command, a),
        Command::Sweep(a) => sweep(command, a),
    }
}

fn gen_dataset(command: &Command, a: &GenDatasetArgs) -> Result<()> {
    ensure!(a.corridors > 0, "--corridors must be positive");
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_run_manifest(
        &a.out.join("run.json"),
        command,
        Some(a.seed),
        vec![a.out.join("manifest.jsonl"), a.out.join("frames")],
    )?;
    let config = DatasetConfig {
        grid: GridConfig {
            station_spacing: a.spacing,
            tilt: a.tilt_deg.to_radians(),
            ..GridConfig::default()
        },
        ..DatasetConfig::default()
    };
    let corridors = random_corridors(a.corridors, a.seed);
    let (_, report) = generate(&corridors, &config, &a.out)?;
    print_json(&report)
}

#[derive(Serialize)]
struct LabelRecord {
    id: String,
    angle_rad: Option<f64>,
    distance: Option<f64>,
    discarded: bool,
}

fn label(a: &LabelArgs) -> Result<()> {
    let dir = if a.input.join("frames").is_dir() {
        a.input.join("frames")
    } else {
        a.input.clone()
    };
    let mut files: Vec<(String, PathBuf)> = fs::read_dir(&dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_suffix("_bisector.ppm").map(|id| (id.to_string(), e.path()))
        })
        .collect();
    ensure!(!files.is_empty(), "no *_bisector.ppm frames in {}", dir.display());
    files.sort();
    let records = files
        .par_iter()
        .map(|(id, path)| {
            let frame = Frame::load_ppm(path).with_context(|| format!("reading {}", path.display()))?;
            let pair = label_sample(&frame).kept();
            Ok(LabelRecord {
                id: id.clone(),
                angle_rad: pair.map(|p| p.angle),
                distance: pair.map(|p| p.distance),
                discarded: pair.is_none(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    for r in &records {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn train_model(command: &Command, a: &TrainArgs) -> Result<()> {
    let loss_path = sibling(&a.out, "loss.csv");
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_run_manifest(
        &sibling(&a.out, "run.json"),
        command,
        Some(a.seed),
        vec![a.out.clone(), loss_path.clone()],
    )?;
    let config = TrainConfig {
        lr: a.lr,
        momentum: a.momentum,
        l2: a.l2,
        batch_size: a.batch_size,
        max_iters: a.max_iters,
        seed: a.seed,
        ..TrainConfig::default()
    };
    config.validate()?;
    let manifest = Manifest::load(&a.manifest)?;
    let preprocess = PreprocessConfig::default();
    let samples = load_samples(&manifest, a.target, Some(Split::Train), &preprocess)?;
    let spec = RegressorSpec::compact(preprocess.target_width as usize, preprocess.target_height as usize);
    let (model, report) = train(&samples, a.target, &spec, preprocess, &config)?;
    save_model(&model, &a.out)?;

    let mut csv = BufWriter::new(File::create(&loss_path)?);
    writeln!(csv, "iter,loss,lr")?;
    for (i, (loss, lr)) in report.losses.iter().zip(&report.lrs).enumerate() {
        writeln!(csv, "{i},{loss},{lr}")?;
    }
    csv.flush()?;

    let tail = &report.losses[report.losses.len().saturating_sub(50)..];
    print_json(&json!({
        "target": a.target,
        "samples": samples.len(),
        "iterations": report.losses.len(),
        "final_lr": report.lrs.last(),
        "tail_mean_loss": tail.iter().sum::<f64>() / tail.len() as f64,
        "outcome": report.outcome,
    }))
}

fn eval(command: &Command, a: &EvalArgs) -> Result<()> {
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        write_run_manifest(&out.join("run.json"), command, None, vec![out.join("predictions.csv")])?;
    }
    let model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    if let Some(t) = a.target {
        ensure!(
            t == model.target,
            "model predicts {} but --target is {}",
            model.target,
            t
        );
    }
    let manifest = Manifest::load(&a.manifest)?;
    let samples = load_samples(&manifest, model.target, a.split.split(), &model.preprocess)?;
    let (report, rows) = evaluate(&model, &samples)?;
    if let Some(out) = &a.out {
        let mut f = BufWriter::new(File::create(out.join("predictions.csv"))?);
        write_predictions_csv(&rows, &mut f)?;
        f.flush()?;
    }
    for r in rows.iter().take(3) {
        eprintln!("{}: {}", r.id, spot_format(model.target, r.gt, r.pred));
    }
    print_json(&report)
}

fn corridor_spec(c: &CorridorArgs, texture_seed: u64) -> Result<CorridorSpec> {
    Ok(CorridorSpec::new(
        c.corridor_width,
        c.corridor_length,
        c.corridor_height,
        texture_seed,
    )?)
}

/// Either estimator behind one concrete type, so sweeps can build it per
/// episode.
enum AnyEstimator {
    Oracle(Box<OracleEstimator>),
    Regressor(Box<RegressorEstimator>),
}

impl DeviationEstimator for AnyEstimator {
    fn angle(&mut self, capture: &Capture) -> Result<f64, EstimatorError> {
        match self {
            AnyEstimator::Oracle(e) => e.angle(capture),
            AnyEstimator::Regressor(e) => e.angle(capture),
        }
    }

    fn distance(&mut self, capture: &Capture) -> Result<f64, EstimatorError> {
        match self {
            AnyEstimator::Oracle(e) => e.distance(capture),
            AnyEstimator::Regressor(e) => e.distance(capture),
        }
    }
}

/// Builds estimators from the command line; learned models are loaded once.
struct EstimatorFactory {
    sigma_angle: f64,
    sigma_distance: f64,
    models: Option<(Model, Model)>,
}

impl EstimatorFactory {
    fn new(a: &EstimatorArgs) -> Result<Self> {
        let models = match a.estimator {
            EstimatorKind::Oracle => None,
            EstimatorKind::Regressor => {
                let (Some(ap), Some(dp)) = (&a.angle_model, &a.distance_model) else {
                    bail!("--estimator regressor needs --angle-model and --distance-model");
                };
                let am = load_model(ap).with_context(|| format!("loading {}", ap.display()))?;
                let dm = load_model(dp).with_context(|| format!("loading {}", dp.display()))?;
                ensure!(am.target == Target::Angle, "{} is not an angle model", ap.display());
                ensure!(
                    dm.target == Target::Distance,
                    "{} is not a distance model",
                    dp.display()
                );
                Some((am, dm))
            }
        };
        Ok(Self {
            sigma_angle: a.sigma_angle,
            sigma_distance: a.sigma_distance,
            models,
        })
    }

    fn make(&self, seed: u64) -> AnyEstimator {
        match &self.models {
            None => AnyEstimator::Oracle(Box::new(OracleEstimator::new(
                CameraModel::labeling(),
                NoiseConfig {
                    sigma_angle: self.sigma_angle,
                    sigma_distance: self.sigma_distance,
                    seed,
                },
            ))),
            Some((am, dm)) => AnyEstimator::Regressor(Box::new(RegressorEstimator::new(
                am.clone(),
                dm.clone(),
                InputRendering::default(),
            ))),
        }
    }
}

fn fly(command: &Command, a: &FlyArgs) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let (jsonl, csv) = (a.out.join("trace.jsonl"), a.out.join("trace.csv"));
    write_run_manifest(
        &a.out.join("run.json"),
        command,
        Some(a.seed),
        vec![jsonl.clone(), csv.clone()],
    )?;
    let corridor = corridor_spec(&a.corridor, a.seed)?;
    let start = Pose::new(a.start_x, 0.0, a.start_h, a.start_yaw_deg.to_radians());
    let factory = EstimatorFactory::new(&a.estimator)?;
    let mut estimator = factory.make(a.seed);
    let trace = run_episode(
        &corridor,
        start,
        &mut estimator,
        &ControllerConfig::default(),
        &a.sim.sim_config(a.seed),
    )?;
    let mut f = BufWriter::new(File::create(&jsonl)?);
    write_trace_jsonl(&trace, &mut f)?;
    f.flush()?;
    let mut f = BufWriter::new(File::create(&csv)?);
    write_trace_csv(&trace, &mut f)?;
    f.flush()?;
    print_json(&json!({
        "outcome": trace.outcome,
        "end_t": trace.end_t,
        "final_pose": trace.final_pose,
        "max_abs_x": trace.max_abs_x(),
        "steady_max_abs_x": trace.steady_max_abs_x(),
    }))
}

fn sweep(command: &Command, a: &SweepArgs) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let summary_path = a.out.join("summary.json");
    let scan_path = a.out.join("wind_scan.json");
    let mut outputs = vec![summary_path.clone()];
    if !a.wind_scan.is_empty() {
        outputs.push(scan_path.clone());
    }
    write_run_manifest(&a.out.join("run.json"), command, Some(a.seed), outputs)?;
    let config = SweepConfig {
        n_episodes: a.episodes,
        master_seed: a.seed,
        corridor: corridor_spec(&a.corridor, a.seed)?,
        start: StartSampling {
            max_abs_x: a.max_start_x,
            max_abs_yaw: a.max_start_yaw_deg.to_radians(),
            ..StartSampling::default()
        },
        sim: a.sim.sim_config(0),
        controller: ControllerConfig::default(),
    };
    let factory = EstimatorFactory::new(&a.estimator)?;
    let summary = run_sweep(&config, |seed| factory.make(seed))?;
    write_json(&summary_path, &summary)?;
    let mut brief = json!({
        "episodes": summary.n_episodes,
        "successes": summary.successes,
        "success_rate": summary.success_rate,
        "outcomes": summary.outcomes,
        "steady_max_abs_x": summary.steady_max_abs_x,
    });
    if !a.wind_scan.is_empty() {
        let scan = wind_scan(&config, &a.wind_scan, |seed| factory.make(seed))?;
        write_json(&scan_path, &scan)?;
        brief["breaking_wind_sigma"] = json!(scan.breaking_sigma);
    }
    print_json(&brief)
}
