//! Subcommand dispatch.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hamlearn_core::protocol::SaturationSettings;
use hamlearn_core::{
    compare_models, model_improvement_workflow, run_iqle, run_qle, DataSource, ModelDescriptor, RunLog, Trace,
    TrueSystem, XMinusPolicy,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;
use crate::output::{self, Stamp};

#[derive(Debug, Parser)]
#[command(name = "hamlearn", version, about = "Bayesian Hamiltonian learning of a driven two-level system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn the Rabi frequency with the non-interactive protocol.
    RunQle(RunArgs),
    /// Learn the Rabi frequency with inverted evolution.
    RunIqle(RunArgs),
    /// Re-run inference on a recorded trace.
    Replay(RunArgs),
    /// Bayes factor of the chirped model against the plain Rabi model on a trace.
    CompareModels(RunArgs),
    /// Fit Model I, check for saturation, fit Model II, and compare.
    ImproveModel(RunArgs),
    /// Many seeds in parallel, aggregated per step.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Number of consecutive seeds, starting at the configured seed.
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long, value_enum, default_value_t = ProtocolChoice::Qle)]
        protocol: ProtocolChoice,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolChoice {
    Qle,
    Iqle,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Photon shots per measurement basis in the likelihood channel.
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Use exact likelihoods instead of sampled ones.
    #[arg(long)]
    pub exact_channel: bool,
    /// Recorded data to replay instead of simulating the system.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            shots: self.shots,
            particles: self.particles,
            steps: self.steps,
            exact_channel: self.exact_channel,
        }
    }

    fn load(&self) -> Result<(RunConfig, Stamp), CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&self.overrides());
        cfg.validate()?;
        let stamp = Stamp::new(cfg.hash());
        Ok((cfg, stamp))
    }

    fn trace(&self) -> Result<Option<Trace>, CliError> {
        self.trace.as_deref().map(read_trace).transpose()
    }

    fn require_trace(&self) -> Result<Trace, CliError> {
        self.trace()?.ok_or_else(|| CliError::Config("this subcommand needs --trace".into()))
    }
}

pub fn read_trace(path: &Path) -> Result<Trace, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    Trace::read_jsonl(BufReader::new(file)).map_err(|e| match e {
        hamlearn_core::Error::Io(source) => CliError::Io { path: path.display().to_string(), source },
        other => CliError::Config(format!("{}: {other}", path.display())),
    })
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(CliError::io(&path))?;
    Ok((path, BufWriter::new(file)))
}

fn emit<F>(dir: &Path, name: &str, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let (path, mut out) = create(dir, name)?;
    write(&mut out).and_then(|_| out.flush()).map_err(CliError::io(&path))
}

fn write_run(dir: &Path, name: &str, stamp: &Stamp, log: &RunLog) -> Result<(), CliError> {
    emit(dir, &format!("{name}.csv"), |o| output::write_table(o, stamp, log))?;
    emit(dir, &format!("{name}.json"), |o| output::write_json(o, stamp, log))?;
    emit(dir, &format!("{name}.trace.jsonl"), |o| output::write_trace(o, stamp, &log.trace()))
}

fn failure(log: &RunLog) -> Result<(), CliError> {
    match &log.failure {
        Some(f) => Err(CliError::Degenerate { step: f.step, reason: f.reason.clone() }),
        None => Ok(()),
    }
}

fn report(cfg: &RunConfig, name: &str, log: &RunLog) -> String {
    let est = &log.final_estimate;
    let u = &cfg.units;
    let mut line = format!(
        "{name}: {} steps, omega = {:.6} ± {:.6} (f = {:.4} ± {:.4} MHz)",
        log.steps.len(),
        est.mean.omega,
        est.sd.omega,
        u.f_mhz(est.mean.omega),
        u.f_mhz(est.sd.omega),
    );
    if log.config.model.is_chirped() {
        line += &format!(", chirp = {:.4} ± {:.4} MHz²", u.chirp_mhz2(est.mean.alpha), u.chirp_mhz2(est.sd.alpha));
    }
    line
}

/// Runs one learning loop against the simulated system or a trace.
fn learn(
    cfg: &RunConfig,
    model: ModelDescriptor,
    protocol: ProtocolChoice,
    system: &TrueSystem,
    trace: Option<&Trace>,
) -> Result<RunLog, CliError> {
    let pc = cfg.protocol(model)?;
    let truth = Some(system.true_params);
    let (source, truth) = match trace {
        Some(t) => (DataSource::Replay(t), t.header.true_params.or(truth)),
        None => (DataSource::System(system), truth),
    };
    let log = match protocol {
        ProtocolChoice::Qle => run_qle(&pc, source, truth)?,
        ProtocolChoice::Iqle => run_iqle(&pc, source, truth, XMinusPolicy::Posterior)?,
    };
    Ok(log)
}

/// Executes a command and returns the lines meant for standard output.
pub fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    match cli.command {
        Command::RunQle(args) => single(&args, ProtocolChoice::Qle, "qle"),
        Command::RunIqle(args) => single(&args, ProtocolChoice::Iqle, "iqle"),
        Command::Replay(args) => {
            let trace = args.require_trace()?;
            let protocol = if trace.is_interactive() { ProtocolChoice::Iqle } else { ProtocolChoice::Qle };
            let (cfg, stamp) = args.load()?;
            let log = learn(&cfg, trace.header.model, protocol, &cfg.system()?, Some(&trace))?;
            write_run(&args.out_dir, "replay", &stamp, &log)?;
            failure(&log)?;
            Ok(vec![report(&cfg, "replay", &log)])
        }
        Command::CompareModels(args) => {
            let trace = args.require_trace()?;
            let (cfg, stamp) = args.load()?;
            let result = compare_models(
                &trace,
                &cfg.protocol(ModelDescriptor::RABI)?,
                &cfg.protocol(ModelDescriptor::CHIRPED_RABI)?,
            )?;
            emit(&args.out_dir, "comparison.json", |o| output::write_json(o, &stamp, &result))?;
            Ok(vec![format!(
                "ln K = {:.4}, K = {:.4e}, preferred = {} over {} steps",
                result.log_bayes_factor, result.bayes_factor, result.preferred, result.steps
            )])
        }
        Command::ImproveModel(args) => {
            let (cfg, stamp) = args.load()?;
            let system = cfg.system()?;
            let r = model_improvement_workflow(
                &cfg.protocol(ModelDescriptor::RABI)?,
                &cfg.protocol(ModelDescriptor::CHIRPED_RABI)?,
                &system,
                SaturationSettings::default(),
            )?;
            write_run(&args.out_dir, "model_one", &stamp, &r.model_one)?;
            write_run(&args.out_dir, "model_two", &stamp, &r.model_two)?;
            let summary = json!({
                "saturation": r.saturation,
                "comparison": r.comparison,
                "comparison_on_model_two_trace": r.comparison_on_model_two_trace,
                "comparison_pooled": r.comparison_pooled,
            });
            emit(&args.out_dir, "improvement.json", |o| output::write_json(o, &stamp, &summary))?;
            let sat = match r.saturation.first_detection {
                Some(k) => format!("Model I variance saturated at step {k}"),
                None => "no saturation detected for Model I".to_string(),
            };
            failure(&r.model_one)?;
            failure(&r.model_two)?;
            Ok(vec![
                report(&cfg, "model I", &r.model_one),
                sat,
                report(&cfg, "model II", &r.model_two),
                format!("ln K (Model I trace) = {:.4}", r.comparison.log_bayes_factor),
                format!("ln K (Model II trace) = {:.4}", r.comparison_on_model_two_trace.log_bayes_factor),
                format!("ln K (pooled) = {:.4}", r.comparison_pooled.log_bayes_factor),
            ])
        }
        Command::Sweep { run: args, seeds, protocol } => {
            if seeds == 0 {
                return Err(CliError::Config("--seeds must be at least 1".into()));
            }
            let (cfg, stamp) = args.load()?;
            let system = cfg.system()?;
            let logs: Vec<RunLog> = (cfg.seed..cfg.seed + seeds)
                .into_par_iter()
                .map(|seed| {
                    let mut c = cfg.clone();
                    c.seed = seed;
                    learn(&c, ModelDescriptor::RABI, protocol, &system, None)
                })
                .collect::<Result<_, _>>()?;
            let rows = output::aggregate(&logs);
            emit(&args.out_dir, "sweep.csv", |o| output::write_sweep(o, &stamp, &rows))?;
            let failed = logs.iter().filter(|l| !l.is_complete()).count();
            let last = rows.last().ok_or_else(|| CliError::Config("sweep produced no steps".into()))?;
            Ok(vec![format!(
                "{seeds} seeds, {failed} stopped early; final median loss {:.3e} (67.5% band {:.3e} .. {:.3e})",
                last.median_loss, last.loss_lo, last.loss_hi
            )])
        }
    }
}

fn single(args: &RunArgs, protocol: ProtocolChoice, name: &str) -> Result<Vec<String>, CliError> {
    let (cfg, stamp) = args.load()?;
    let trace = args.trace()?;
    let model = trace.as_ref().map_or(ModelDescriptor::RABI, |t| t.header.model);
    let log = learn(&cfg, model, protocol, &cfg.system()?, trace.as_ref())?;
    write_run(&args.out_dir, name, &stamp, &log)?;
    failure(&log)?;
    Ok(vec![report(&cfg, name, &log)])
}
