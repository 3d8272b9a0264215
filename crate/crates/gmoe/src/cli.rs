//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gmoe_core::data::{generate_synthetic, MotionDataset, SyntheticConfig};
use gmoe_core::model::DESK_ACTIONS;
use gmoe_core::train::{
    run_comparison, run_experiment, split_chronological, ArchConfig, EpochRecord, FitHook,
};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{Overrides, RunConfig};
use crate::csv_io::{read_csv, write_csv};
use crate::fsutil::write_atomic;
use crate::infer::{parse_log, run_infer, StreamMode};
use crate::plot::{write_channel, write_curves, write_probabilities};
use crate::report::{comparison_table, read_epochs, write_json, write_report, Summary, EPOCHS_FILE};

#[derive(Debug, Parser)]
#[command(name = "gmoe", version, about = "Guided mixture of experts for action and motion prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset CSV.
    GenData(GenDataArgs),
    /// Train one architecture and write a checkpoint and report.
    Train(TrainArgs),
    /// Train both architectures over several seeds and summarize.
    Compare(CompareArgs),
    /// Stream a dataset through a checkpoint and log predictions.
    Infer(InferArgs),
    /// Export CSV series for plotting from an inference log or a report.
    PlotExport(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 4 joints, 2 wrench channels.
    Desk,
    /// 66 joints, 12 wrench channels.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arch {
    Gmoe,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stream {
    Replay,
    Max,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator seed.
    #[arg(long, env = "GMOE_SEED", default_value_t = 7)]
    pub seed: u64,
    /// Length of the recording in seconds.
    #[arg(long, default_value_t = 480.0)]
    pub duration: f64,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    /// Standard deviation of the additive sensor noise.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct TrainingFlags {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Action labels expected in the data, in class order.
    #[arg(long, value_delimiter = ',', default_values_t = DESK_ACTIONS.map(String::from))]
    pub actions: Vec<String>,
    /// Maximum number of epochs [default: 200, or the config file].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size [default: 64, or the config file].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initial learning rate [default: 0.001, or the config file].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Early-stopping patience in epochs [default: 5, or the config file].
    #[arg(long)]
    pub patience: Option<usize>,
    /// Weight of the action loss [default: 1.0, or the config file].
    #[arg(long)]
    pub b1: Option<f64>,
    /// Weight of the motion loss [default: 0.2, or the config file].
    #[arg(long)]
    pub b2: Option<f64>,
}

impl TrainingFlags {
    fn overrides(&self, seed: Option<u64>) -> Overrides {
        Overrides {
            seed,
            max_epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr,
            patience: self.patience,
            b1: self.b1,
            b2: self.b2,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Arch::Gmoe)]
    pub arch: Arch,
    /// Where to write the trained checkpoint.
    #[arg(long)]
    pub out_checkpoint: PathBuf,
    /// Directory for epochs.jsonl and summary.json.
    #[arg(long)]
    pub report: PathBuf,
    /// Training seed [default: 7, or the config file].
    #[arg(long, env = "GMOE_SEED")]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub flags: TrainingFlags,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    /// Where to write the comparison JSON.
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub flags: TrainingFlags,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset CSV to stream.
    #[arg(long)]
    pub data: PathBuf,
    /// `replay` paces records at their timestamps, `max` runs unpaced.
    #[arg(long, value_enum, default_value_t = Stream::Max)]
    pub stream: Stream,
    /// Output log (line-delimited JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Inference log from `infer`.
    #[arg(long, requires = "data")]
    pub infer_log: Option<PathBuf>,
    /// Dataset the log was produced from (measured values).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Report directory from `train`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Joint channel to export.
    #[arg(long, default_value = "s_0")]
    pub joint: String,
    /// Wrench channel to export.
    #[arg(long, default_value = "f_0")]
    pub wrench: String,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    dispatch(cli.command, out)
}

pub fn dispatch(command: Command, out: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        Command::GenData(a) => gen_data(a, out),
        Command::Train(a) => train(a, out),
        Command::Compare(a) => compare(a, out),
        Command::Infer(a) => infer(a, out),
        Command::PlotExport(a) => plot_export(a, out),
    }
}

fn gen_data(a: GenDataArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let base = match a.preset {
        Preset::Desk => SyntheticConfig::desk(a.seed),
        Preset::Paper => SyntheticConfig::paper_scale(a.seed),
    };
    let cfg = SyntheticConfig {
        duration: a.duration,
        noise_sigma: a.noise,
        ..base
    };
    let ds = generate_synthetic(&cfg)?;
    write_csv(&a.out, &ds).with_context(|| format!("writing {}", a.out.display()))?;
    writeln!(out, "wrote {} records to {}", ds.len(), a.out.display())?;
    let dt = 1.0 / ds.rate_hz;
    for (i, name) in ds.actions.iter().enumerate() {
        let n = ds.records.iter().filter(|r| r.action == i).count();
        writeln!(out, "  {name:<10} {:>8.2} s", n as f64 * dt)?;
    }
    Ok(())
}

fn load_data(path: &Path, actions: &[String]) -> anyhow::Result<MotionDataset> {
    let ds = read_csv(path, actions).with_context(|| format!("reading {}", path.display()))?;
    ds.validate()?;
    Ok(ds)
}

fn checked_config(flags: &TrainingFlags, seed: Option<u64>, data: &MotionDataset) -> anyhow::Result<RunConfig> {
    let cfg = RunConfig::load(flags.config.as_deref(), &flags.overrides(seed))?;
    let issues = cfg.issues(&cfg.task_for(data));
    if !issues.is_empty() {
        bail!("invalid configuration:\n  {}", issues.join("\n  "));
    }
    Ok(cfg)
}

fn echo_config(cfg: &RunConfig) -> anyhow::Result<()> {
    eprintln!("effective configuration:\n{}", toml::to_string(cfg)?);
    Ok(())
}

struct Progress;

impl<M> FitHook<M> for Progress {
    fn on_epoch(&mut self, r: &EpochRecord, _: &M) {
        eprintln!(
            "epoch {:>3}  lr {:.2e}  train {:.4}  val {:.4}  val acc {:.3}  val mae {:.4}",
            r.epoch, r.learning_rate, r.train.loss, r.validation.loss, r.validation.accuracy, r.validation.mae
        );
    }
}

fn train(a: TrainArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let data = load_data(&a.data, &a.flags.actions)?;
    let cfg = checked_config(&a.flags, a.seed, &data)?;
    echo_config(&cfg)?;
    let task = cfg.task_for(&data);
    let arch = match a.arch {
        Arch::Gmoe => ArchConfig::Gmoe(cfg.gmoe_config(task.clone())),
        Arch::Baseline => ArchConfig::Baseline(cfg.baseline_config(task.clone())),
    };
    let splits = split_chronological(&data, task.past_steps, task.horizon)?;
    let start = Instant::now();
    let exp = run_experiment(&arch, &splits, &cfg.train, &mut Progress)?;
    let wall = start.elapsed().as_secs_f64();
    save_checkpoint(&exp.model, &a.out_checkpoint)?;
    let summary = Summary::new(&exp, &cfg, wall);
    write_report(&a.report, &exp.report.epochs, &summary)
        .with_context(|| format!("writing report to {}", a.report.display()))?;
    writeln!(
        out,
        "{} ({} params): test loss {:.4}, accuracy {:.4}, mae {:.4} (persistence {:.4}); {} epochs, best {}, {:.1} s",
        exp.model.kind().name(),
        exp.param_count,
        exp.test.loss,
        exp.test.accuracy,
        exp.test.mae,
        exp.test_persistence_mae,
        exp.report.epochs.len(),
        exp.report.best_epoch,
        wall
    )?;
    Ok(())
}

fn compare(a: CompareArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let data = load_data(&a.data, &a.flags.actions)?;
    let cfg = checked_config(&a.flags, None, &data)?;
    echo_config(&cfg)?;
    let task = cfg.task_for(&data);
    let splits = split_chronological(&data, task.past_steps, task.horizon)?;
    let report = run_comparison(
        &splits,
        &a.seeds,
        &cfg.gmoe_config(task.clone()),
        &cfg.baseline_config(task),
        &cfg.train,
        |r, _| {
            eprintln!(
                "seed {} {}: test loss {:.4}, accuracy {:.4}, mae {:.4}",
                r.seed,
                r.arch.name(),
                r.test.loss,
                r.test.accuracy,
                r.test.mae
            )
        },
    )?;
    write_json(&a.report, &report).with_context(|| format!("writing {}", a.report.display()))?;
    write!(out, "{}", comparison_table(&report))?;
    Ok(())
}

fn infer(a: InferArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let file = std::fs::File::open(&a.data).with_context(|| format!("opening {}", a.data.display()))?;
    let mode = match a.stream {
        Stream::Replay => StreamMode::Replay,
        Stream::Max => StreamMode::Max,
    };
    let mut summary = None;
    write_atomic(&a.out, |w| {
        let s = run_infer(&model, std::io::BufReader::new(file), mode, w).map_err(std::io::Error::other)?;
        summary = Some(s);
        Ok(())
    })
    .with_context(|| format!("inference into {}", a.out.display()))?;
    let s = summary.expect("set on success");
    writeln!(
        out,
        "{} predictions, mean latency {:.3} ms, p95 {:.3} ms",
        s.count, s.mean_latency_ms, s.p95_latency_ms
    )?;
    Ok(())
}

fn plot_export(a: PlotArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if a.infer_log.is_none() && a.report.is_none() {
        bail!("plot-export needs --infer-log and/or --report");
    }
    let mut written = Vec::new();
    if let Some(log) = &a.infer_log {
        let text = std::fs::read_to_string(log).with_context(|| format!("reading {}", log.display()))?;
        let (header, emissions, _) = parse_log(&text)?;
        let data_path = a.data.as_ref().expect("clap enforces --data");
        let data = load_data(data_path, &header.actions)?;
        for ch in [&a.joint, &a.wrench] {
            if !header.channels.contains(ch) {
                bail!("unknown channel `{ch}` (known: {})", header.channels.join(", "));
            }
        }
        written.push(write_probabilities(&a.out_dir, &header, &emissions)?);
        written.push(write_channel(&a.out_dir, &header, &emissions, &data, &a.joint)?);
        written.push(write_channel(&a.out_dir, &header, &emissions, &data, &a.wrench)?);
    }
    if let Some(dir) = &a.report {
        let epochs = read_epochs(&dir.join(EPOCHS_FILE))?;
        written.push(write_curves(&a.out_dir, &epochs)?);
    }
    for p in written {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}
