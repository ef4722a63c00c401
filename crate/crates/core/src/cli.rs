//! Command-line front end: `simulate`, `infer`, `eval` and `sweep`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::chain::{TransitionModel, DEFAULT_SWITCH_RATE_PER_SECOND};
use crate::emission::LogEmissionSeries;
use crate::error::{Error, Result};
use crate::evaluation::{detect_switches, EvalReport};
use crate::experiment::{
    run_sweep, summarize, EmissionSpec, ExperimentConfig, SimulationSettings, SUMMARY_CSV_HEADER,
    SWEEP_CSV_HEADER,
};
use crate::inference::{forward, forward_backward, viterbi, Decoder};
use crate::io::{self, ScoreFile};
use crate::plot::{self, Metric};
use crate::synthesis::{generate_trajectory, sample_scores};

#[derive(Debug, Parser)]
#[command(name = "aad-hmm", version, about = "HMM post-processing of auditory attention decoding scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InferMode {
    Causal,
    Noncausal,
    Viterbi,
}

impl From<InferMode> for Decoder {
    fn from(m: InferMode) -> Self {
        match m {
            InferMode::Causal => Decoder::Forward,
            InferMode::Noncausal => Decoder::ForwardBackward,
            InferMode::Viterbi => Decoder::Viterbi,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trial: scores.csv and truth.csv.
    Simulate {
        /// Simulation settings (JSON); baseline defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decode a score file into posteriors (or a Viterbi path).
    Infer {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum, default_value = "noncausal")]
        mode: InferMode,
        /// Per-window switch probability; defaults to 0.001 per second of window.
        #[arg(long)]
        p_switch: Option<f64>,
        /// Emission statistics (JSON); defaults to the baseline calibration.
        #[arg(long, conflicts_with = "scores_are_log_emissions")]
        emission: Option<PathBuf>,
        /// Treat the score rows as ln b_j(t).
        #[arg(long)]
        scores_are_log_emissions: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a decision file against ground truth.
    Eval {
        /// Posterior or Viterbi CSV.
        #[arg(long)]
        decisions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Search rule for switch detection; read from the decision file when omitted.
        #[arg(long, value_enum)]
        mode: Option<InferMode>,
    },
    /// Run a one-axis parameter sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            cmd_simulate(config.as_deref(), &out, seed).map(|_| ())
        }
        Command::Infer {
            scores,
            mode,
            p_switch,
            emission,
            scores_are_log_emissions,
            out,
        } => cmd_infer(&InferArgs {
            scores,
            mode: mode.into(),
            p_switch,
            emission,
            scores_are_log_emissions,
            out,
        })
        .map(|_| ()),
        Command::Eval {
            decisions,
            truth,
            out,
            mode,
        } => cmd_eval(&decisions, &truth, &out, mode.map(Decoder::from)).map(|_| ()),
        Command::Sweep {
            config,
            out,
            workers,
        } => cmd_sweep(&config, &out, workers).map(|_| ()),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Writes `scores.csv`, `truth.csv` and the resolved `config.json`.
pub fn cmd_simulate(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<PathBuf> {
    let mut settings: SimulationSettings = match config {
        Some(p) => read_json(p)?,
        None => SimulationSettings::default(),
    };
    if let Some(s) = seed {
        settings.seed = s;
    }
    let synth = settings.resolve()?;
    let truth = generate_trajectory(&synth)?;
    let scores = sample_scores(&truth, &synth)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("scores.csv"), io::format_scores(&scores))?;
    fs::write(out.join("truth.csv"), io::format_truth(&truth))?;
    fs::write(
        out.join("config.json"),
        serde_json::to_string_pretty(&synth)? + "\n",
    )?;
    Ok(out.to_path_buf())
}

#[derive(Debug, Clone)]
pub struct InferArgs {
    pub scores: PathBuf,
    pub mode: Decoder,
    pub p_switch: Option<f64>,
    pub emission: Option<PathBuf>,
    pub scores_are_log_emissions: bool,
    pub out: PathBuf,
}

/// Decodes a score file; returns the path of the written CSV
/// (`posterior.csv`, or `viterbi.csv` in Viterbi mode).
pub fn cmd_infer(args: &InferArgs) -> Result<PathBuf> {
    let file = io::read_scores(&args.scores, args.scores_are_log_emissions)?;
    let window_length = file.window_length();
    let n_states = file.n_states();
    let log_b: LogEmissionSeries = match file {
        ScoreFile::LogEmissions { log_b, .. } => log_b,
        ScoreFile::Correlations(series) => {
            let spec: EmissionSpec = match &args.emission {
                Some(p) => read_json(p)?,
                None => EmissionSpec::default(),
            };
            spec.resolve(n_states)?.log_emission_series(&series)?
        }
    };
    let p_switch = args
        .p_switch
        .unwrap_or(DEFAULT_SWITCH_RATE_PER_SECOND * window_length);
    let transition = TransitionModel::new(n_states, p_switch)?;

    fs::create_dir_all(&args.out)?;
    let (name, text) = match args.mode {
        Decoder::Forward => (
            "posterior.csv",
            io::format_posterior(&forward(&transition, &log_b)?, window_length),
        ),
        Decoder::ForwardBackward => (
            "posterior.csv",
            io::format_posterior(&forward_backward(&transition, &log_b)?, window_length),
        ),
        Decoder::Viterbi => (
            "viterbi.csv",
            io::format_viterbi(&viterbi(&transition, &log_b)?, window_length),
        ),
    };
    let path = args.out.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

pub fn cmd_eval(
    decisions: &Path,
    truth: &Path,
    out: &Path,
    mode: Option<Decoder>,
) -> Result<EvalReport> {
    let file = io::read_decisions(decisions)?;
    let truth = io::read_truth(truth, file.window_length)?;
    let mode = mode.or(file.mode).unwrap_or(Decoder::ForwardBackward);
    let report = detect_switches(&file.decisions, &truth, mode)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}

/// Writes `sweep.csv` (one row per value, trial and decoder), `summary.csv`,
/// and `accuracy_<axis>.svg` / `detection_time_<axis>.svg`.
pub fn cmd_sweep(config: &Path, out: &Path, workers: usize) -> Result<PathBuf> {
    let experiment: ExperimentConfig = read_json(config)?;
    let rows = run_sweep(&experiment, workers)?;
    fs::create_dir_all(out)?;

    let mut long = String::from(SWEEP_CSV_HEADER);
    long.push('\n');
    for r in &rows {
        long.push_str(&r.to_csv());
        long.push('\n');
    }
    fs::write(out.join("sweep.csv"), long)?;

    let cells = summarize(&rows);
    let mut summary = String::from(SUMMARY_CSV_HEADER);
    summary.push('\n');
    for c in &cells {
        summary.push_str(&c.to_csv(experiment.axis));
        summary.push('\n');
    }
    fs::write(out.join("summary.csv"), summary)?;

    for metric in [Metric::Accuracy, Metric::DetectionTime] {
        let svg = plot::render(experiment.axis, &cells, metric);
        fs::write(
            out.join(format!("{}_{}.svg", metric.file_stem(), experiment.axis)),
            svg,
        )?;
    }
    Ok(out.to_path_buf())
}
