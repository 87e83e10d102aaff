use std::fs;
use std::path::{Component, Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use docknav::calib::{ground_truth_csv, load_samples_csv, solve_statics, CalibResult};
use docknav::dataset::{
    load_dataset, load_sequence, load_split, record_from_samples, render_record, save_split, split, write_atomic, DatasetConfig, SequenceConfig,
    SequenceRecord,
};
use docknav::imaging::{sensor_intrinsics, RenderSettings};
use docknav::nn::{
    evaluate_poses, load_training_data, train, Checkpoint, FrameMetrics, Summary, Thresholds, TrainConfig,
};
use docknav::orbit::{parse_tle_file, propagate, tle_to_state, write_ephemeris_csv, SpacecraftProperties};
use docknav::plot::{render_svg, Chart, Series};
use docknav::pose::Pose;
use docknav::trajgen::{generate, read_jsonl, write_jsonl, RelativeSample, TrajectoryConfig};

#[derive(Debug, Parser)]
#[command(name = "docknav", version, about = "Docking navigation toolkit")]
struct Cli {
    /// Overrides the seed of the subcommand's config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Every output is written below this directory.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate the first TLE of a file and write an ephemeris CSV.
    Propagate {
        #[arg(long)]
        tle: PathBuf,
        /// Seconds.
        #[arg(long)]
        duration: f64,
        /// Seconds.
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
    },
    /// Generate docking trajectories as JSON lines.
    #[command(group(ArgGroup::new("source").required(true).args(["config", "defaults"])))]
    GenTraj {
        /// One trajectory config object or an array of them.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        defaults: bool,
    },
    /// Render a dataset of image sequences with pose labels.
    BuildDataset {
        #[arg(long)]
        config: PathBuf,
    },
    /// Partition a dataset into training and validation chunks.
    Split {
        #[arg(long)]
        root: PathBuf,
    },
    /// Train a pose regressor and write `model.dkz` and `metrics.csv`.
    Train {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a checkpoint or a predictions file on one sequence.
    #[command(group(ArgGroup::new("model").required(true).args(["checkpoint", "predictions"])))]
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// JSON lines with a 7-number `pose` per frame.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        sequence: PathBuf,
        /// Per-frame CSV, relative to the output directory.
        #[arg(long, default_value = "eval.csv")]
        emit_csv: PathBuf,
        /// Optional SVG chart of the errors over time, relative to the output directory.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Solve the mocap statics from a samples CSV.
    Calibrate {
        #[arg(long)]
        samples: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Propagate { tle, duration, dt } => cmd_propagate(cli, tle, *duration, *dt),
        Command::GenTraj { config, defaults } => cmd_gen_traj(cli, config.as_deref(), *defaults),
        Command::BuildDataset { config } => cmd_build_dataset(cli, config),
        Command::Split { root } => cmd_split(cli, root),
        Command::Train { root, split, config } => cmd_train(cli, root, split, config.as_deref()),
        Command::Eval { checkpoint, predictions, sequence, emit_csv, plot } => {
            cmd_eval(cli, checkpoint.as_deref(), predictions.as_deref(), sequence, emit_csv, plot.as_deref())
        }
        Command::Calibrate { samples } => cmd_calibrate(cli, samples),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_output(cli: &Cli, name: &Path, bytes: &[u8]) -> Result<PathBuf> {
    let path = cli.out_dir.join(name);
    write_atomic(&path, bytes)?;
    Ok(path)
}

/// Output names must stay below `--out-dir`.
fn relative_output(p: &Path) -> Result<&Path> {
    if p.as_os_str().is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir)) {
        bail!("output path {} must be relative to --out-dir without '..'", p.display());
    }
    Ok(p)
}

fn cmd_propagate(cli: &Cli, tle: &Path, duration: f64, dt: f64) -> Result<String> {
    let text = fs::read_to_string(tle).with_context(|| format!("reading {}", tle.display()))?;
    let sets = parse_tle_file(&text)?;
    let Some(first) = sets.first() else { bail!("{} contains no TLE", tle.display()) };
    let states = propagate(&tle_to_state(first)?, &SpacecraftProperties::default(), dt, duration)?;
    let mut csv = Vec::new();
    write_ephemeris_csv(&mut csv, &states)?;
    let path = write_output(cli, Path::new("ephemeris.csv"), &csv)?;
    Ok(format!("propagate: {} states over {duration} s for object {} -> {}", states.len(), first.catalog_number, path.display()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn cmd_gen_traj(cli: &Cli, config: Option<&Path>, defaults: bool) -> Result<String> {
    let mut configs = match (config, defaults) {
        (Some(path), _) => match read_json::<OneOrMany<TrajectoryConfig>>(path)? {
            OneOrMany::One(c) => vec![c],
            OneOrMany::Many(v) => v,
        },
        (None, _) => vec![TrajectoryConfig::default()],
    };
    if configs.is_empty() {
        bail!("no trajectory configs given");
    }
    if let Some(seed) = cli.seed {
        for (i, c) in configs.iter_mut().enumerate() {
            c.seed = seed + i as u64;
        }
    }
    let mut frames = 0;
    for (i, c) in configs.iter().enumerate() {
        let samples = generate(c)?;
        frames += samples.len();
        let mut bytes = Vec::new();
        write_jsonl(&mut bytes, &samples)?;
        write_output(cli, &PathBuf::from(trajectory_file_name(i)), &bytes)?;
    }
    Ok(format!("gen-traj: {} trajectories, {frames} samples -> {}", configs.len(), cli.out_dir.display()))
}

fn trajectory_file_name(i: usize) -> String {
    format!("trajectory_{i:03}.jsonl")
}

/// A dataset build where each sequence either generates its trajectory or
/// reuses a `gen-traj` output.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildConfig {
    #[serde(default = "default_width")]
    width: u32,
    #[serde(default = "default_height")]
    height: u32,
    sequences: Vec<BuildSequence>,
}

fn default_width() -> u32 {
    DatasetConfig::reference().width
}

fn default_height() -> u32 {
    DatasetConfig::reference().height
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildSequence {
    id: String,
    #[serde(default)]
    trajectory: Option<TrajectoryConfig>,
    /// Relative paths resolve against the config file's directory.
    #[serde(default)]
    trajectory_file: Option<PathBuf>,
    render: RenderSettings,
    #[serde(default)]
    test: bool,
}

/// Sample rate implied by the first two timestamps.
fn rate_from_samples(samples: &[RelativeSample]) -> Result<f64> {
    match samples {
        [a, b, ..] if b.t > a.t => Ok(((1.0 / (b.t - a.t)) * 1e6).round() / 1e6),
        _ => bail!("a trajectory file needs at least two increasing timestamps"),
    }
}

fn cmd_build_dataset(cli: &Cli, config: &Path) -> Result<String> {
    let cfg: BuildConfig = read_json(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let camera = sensor_intrinsics(cfg.width, cfg.height);
    let mut frames = 0;
    for s in &cfg.sequences {
        let record = match (&s.trajectory, &s.trajectory_file) {
            (Some(t), None) => {
                let seq = SequenceConfig { id: s.id.clone(), trajectory: t.clone(), render: s.render.clone(), test: s.test };
                docknav::dataset::plan_record(&seq, camera, &cli.out_dir)?
            }
            (None, Some(file)) => {
                let path = base.join(file);
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                let samples = read_jsonl(&text).with_context(|| format!("parsing {}", path.display()))?;
                record_from_samples(&s.id, rate_from_samples(&samples)?, &samples, camera, s.test, &cli.out_dir)?
            }
            _ => bail!("sequence '{}' needs exactly one of trajectory and trajectory_file", s.id),
        };
        render_record(&record, &s.render)?;
        log::info!("rendered {} ({} frames)", record.id, record.frames.len());
        frames += record.frames.len();
    }
    Ok(format!(
        "build-dataset: {} sequences, {frames} frames at {}x{} -> {}",
        cfg.sequences.len(),
        cfg.width,
        cfg.height,
        cli.out_dir.display()
    ))
}

fn cmd_split(cli: &Cli, root: &Path) -> Result<String> {
    let records = load_dataset(root)?;
    let plan = split(&records, cli.seed.unwrap_or(0))?;
    let path = cli.out_dir.join("split.json");
    save_split(&plan, &path)?;
    Ok(format!(
        "split: {} train chunks, {} val chunks, validation fraction {:.3} -> {}",
        plan.train.len(),
        plan.val.len(),
        plan.val_fraction(),
        path.display()
    ))
}

fn cmd_train(cli: &Cli, root: &Path, split_path: &Path, config: Option<&Path>) -> Result<String> {
    let mut cfg: TrainConfig = match config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let records = load_dataset(root)?;
    let plan = load_split(split_path)?;
    let data = load_training_data(&records, &plan, &cfg)?;
    let outcome = train(&data, &cfg)?;
    let checkpoint = Checkpoint { network: outcome.network, input_width: data.input.0, input_height: data.input.1, train: Some(cfg.clone()) };
    let model = cli.out_dir.join("model.dkz");
    checkpoint.save(&model)?;
    write_output(cli, Path::new("metrics.csv"), docknav::nn::train::metrics_csv(&outcome.log).as_bytes())?;
    let last = outcome.log.last().expect("at least one epoch");
    Ok(format!(
        "train: {} epochs on {} frames, best epoch {}, final train loss {:.4} -> {}",
        cfg.epochs,
        data.train.len(),
        outcome.best_epoch,
        last.train.loss,
        model.display()
    ))
}

fn read_predictions(path: &Path) -> Result<Vec<Pose>> {
    #[derive(Deserialize)]
    struct Line {
        pose: Pose,
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str::<Line>(l).map(|l| l.pose).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

fn frame_csv(frames: &[FrameMetrics], sequence: &SequenceRecord) -> String {
    let mut s = String::from("t_s,dt_m,dq_deg,dtr_frac,phase\n");
    for (m, f) in frames.iter().zip(&sequence.frames) {
        s.push_str(&format!("{},{},{},{},{}\n", m.t, m.dt_m, m.dq_deg, m.dtr_frac, f.phase));
    }
    s
}

fn error_chart(frames: &[FrameMetrics], sequence: &SequenceRecord) -> Chart {
    Chart {
        title: format!("Pose error, {}", sequence.id),
        x_label: "time (s)".into(),
        y_label: "error".into(),
        series: vec![
            Series { name: "position (% of range)".into(), points: frames.iter().map(|m| (m.t, 100.0 * m.dtr_frac)).collect() },
            Series { name: "attitude (deg)".into(), points: frames.iter().map(|m| (m.t, m.dq_deg)).collect() },
        ],
        threshold: Some(5.0),
    }
}

#[derive(Serialize)]
struct EvalReport<'a> {
    sequence: &'a str,
    thresholds: Thresholds,
    summary: Summary,
}

fn cmd_eval(
    cli: &Cli,
    checkpoint: Option<&Path>,
    predictions: Option<&Path>,
    sequence: &Path,
    emit_csv: &Path,
    plot: Option<&Path>,
) -> Result<String> {
    let emit_csv = relative_output(emit_csv)?;
    let plot = plot.map(relative_output).transpose()?;
    let seq = load_sequence(sequence)?;
    let poses = match (checkpoint, predictions) {
        (Some(path), _) => {
            let ck = Checkpoint::load(path)?;
            docknav::nn::eval::predict_sequence(&ck.network, &seq, (ck.input_width, ck.input_height))?
        }
        (None, Some(path)) => read_predictions(path)?,
        (None, None) => unreachable!("clap requires one of --checkpoint and --predictions"),
    };
    let thresholds = Thresholds::default();
    let (frames, summary) = evaluate_poses(&poses, &seq, &thresholds)?;
    write_output(cli, emit_csv, frame_csv(&frames, &seq).as_bytes())?;
    let mut report = serde_json::to_vec_pretty(&EvalReport { sequence: &seq.id, thresholds, summary })?;
    report.push(b'\n');
    write_output(cli, Path::new("summary.json"), &report)?;
    if let Some(p) = plot {
        write_output(cli, p, render_svg(&error_chart(&frames, &seq)).as_bytes())?;
    }
    Ok(format!(
        "eval: {} frames, position compliance {:.1}%, attitude compliance {:.1}%, median dtr {:.4}, median dq {:.3} deg",
        summary.frames, summary.position_compliance, summary.attitude_compliance, summary.median_dtr_frac, summary.median_dq_deg
    ))
}

fn cmd_calibrate(cli: &Cli, samples: &Path) -> Result<String> {
    let rows = load_samples_csv(samples)?;
    let cal_samples: Vec<_> = rows.iter().map(|(_, s)| *s).collect();
    let result: CalibResult = solve_statics(&cal_samples)?;
    let mut json = serde_json::to_vec_pretty(&result)?;
    json.push(b'\n');
    write_output(cli, Path::new("calibration.json"), &json)?;
    write_output(cli, Path::new("ground_truth.csv"), ground_truth_csv(&result, &rows).as_bytes())?;
    Ok(format!(
        "calibrate: {} samples, rms residual {:.4} deg / {:.5} m -> {}",
        rows.len(),
        result.rms_rotation_residual,
        result.rms_translation_residual,
        cli.out_dir.join("calibration.json").display()
    ))
}
