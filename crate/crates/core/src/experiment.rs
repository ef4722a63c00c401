//! Single synthetic trials and one-axis parameter sweeps.

use serde::{Deserialize, Serialize};

use crate::chain::{TransitionModel, DEFAULT_SWITCH_RATE_PER_SECOND};
use crate::emission::EmissionModel;
use crate::error::{Error, Result};
use crate::evaluation::{aggregate, detect_switches, EvalReport, Spread};
use crate::inference::{forward, forward_backward, viterbi, Decoder};
use crate::synthesis::{
    calibrate_dprime, generate_trajectory, per_window_accuracy, sample_scores, SynthesisConfig,
};

/// Per-window accuracy the baseline emission model is calibrated to.
pub const BASELINE_ACCURACY: f64 = 0.582;
/// One synthetic participant per trial, matching the two-speaker dataset.
pub const DEFAULT_TRIALS: usize = 13;

/// Either explicit Gaussian statistics or a per-window accuracy to calibrate to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EmissionSpec {
    Model(EmissionModel),
    TargetAccuracy { target_accuracy: f64 },
}

impl Default for EmissionSpec {
    fn default() -> Self {
        EmissionSpec::TargetAccuracy {
            target_accuracy: BASELINE_ACCURACY,
        }
    }
}

impl EmissionSpec {
    pub fn resolve(&self, n_states: usize) -> Result<EmissionModel> {
        match *self {
            EmissionSpec::Model(m) => Ok(m),
            EmissionSpec::TargetAccuracy { target_accuracy } => {
                calibrate_dprime(target_accuracy, n_states)
            }
        }
    }
}

/// Simulation settings as read from JSON; every field has a baseline default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    pub n_states: usize,
    pub trial_length: f64,
    pub window_length: f64,
    pub switch_interval: f64,
    pub emission: EmissionSpec,
    pub alpha_shift: f64,
    pub seed: u64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            n_states: 2,
            trial_length: 600.0,
            window_length: 1.0,
            switch_interval: 300.0,
            emission: EmissionSpec::default(),
            alpha_shift: 0.0,
            seed: 0,
        }
    }
}

impl SimulationSettings {
    pub fn resolve(&self) -> Result<SynthesisConfig> {
        let config = SynthesisConfig {
            n_states: self.n_states,
            trial_length: self.trial_length,
            window_length: self.window_length,
            switch_interval: self.switch_interval,
            emission: self.emission.resolve(self.n_states)?,
            alpha_shift: self.alpha_shift,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Result of decoding one synthetic trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// Raw argmax accuracy of the synthetic scores.
    pub per_window_accuracy: f64,
    pub reports: Vec<EvalReport>,
}

/// Synthesizes one trial and evaluates each decoder on it. The decoders use
/// the statistics the scores were generated with (including the accuracy shift).
pub fn run_trial(
    config: &SynthesisConfig,
    transition: &TransitionModel,
    decoders: &[Decoder],
) -> Result<TrialOutcome> {
    let truth = generate_trajectory(config)?;
    let scores = sample_scores(&truth, config)?;
    let log_b = config.effective_emission()?.log_emission_series(&scores)?;
    let reports = decoders
        .iter()
        .map(|&d| {
            let decisions = match d {
                Decoder::Forward => forward(transition, &log_b)?.decisions(),
                Decoder::ForwardBackward => forward_backward(transition, &log_b)?.decisions(),
                Decoder::Viterbi => viterbi(transition, &log_b)?.states,
            };
            detect_switches(&decisions, &truth, d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialOutcome {
        per_window_accuracy: per_window_accuracy(&scores, &truth)?,
        reports,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    WindowLength,
    PSwitch,
    SwitchInterval,
    NStates,
    Alpha,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::WindowLength => "window_length",
            SweepAxis::PSwitch => "p_switch",
            SweepAxis::SwitchInterval => "switch_interval",
            SweepAxis::NStates => "n_states",
            SweepAxis::Alpha => "alpha",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::WindowLength => "window length [s]",
            SweepAxis::PSwitch => "p_switch per window",
            SweepAxis::SwitchInterval => "time between switches [s]",
            SweepAxis::NStates => "number of speakers",
            SweepAxis::Alpha => "alpha",
        }
    }

    /// Range studied for this axis, if any.
    pub fn default_range(self) -> Option<(f64, f64)> {
        match self {
            SweepAxis::WindowLength => Some((0.25, 30.0)),
            SweepAxis::PSwitch => Some((0.0001, 0.1)),
            SweepAxis::SwitchInterval => Some((20.0, 600.0)),
            SweepAxis::Alpha => Some((-0.5, 5.0)),
            SweepAxis::NStates => None,
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_decoders() -> Vec<Decoder> {
    vec![Decoder::Forward, Decoder::ForwardBackward]
}

fn default_rate() -> f64 {
    DEFAULT_SWITCH_RATE_PER_SECOND
}

fn default_true() -> bool {
    true
}

/// One-axis sweep around the baseline settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base: SimulationSettings,
    #[serde(default = "default_decoders")]
    pub decoders: Vec<Decoder>,
    /// `p_switch = rate * window_length` unless a per-window value is given.
    #[serde(default = "default_rate")]
    pub p_switch_per_second: f64,
    #[serde(default)]
    pub p_switch_per_window: Option<f64>,
    /// On the window-length axis, scale the separation by `sqrt(window / base window)`.
    #[serde(default = "default_true")]
    pub scale_dprime_with_window: bool,
    #[serde(default)]
    pub allow_out_of_range: bool,
}

impl ExperimentConfig {
    pub fn new(axis: SweepAxis, values: Vec<f64>) -> Self {
        Self {
            axis,
            values,
            trials: DEFAULT_TRIALS,
            base: SimulationSettings::default(),
            decoders: default_decoders(),
            p_switch_per_second: DEFAULT_SWITCH_RATE_PER_SECOND,
            p_switch_per_window: None,
            scale_dprime_with_window: true,
            allow_out_of_range: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.values.is_empty() {
            return bad("sweep has no axis values".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.decoders.is_empty() {
            return bad("no decoders requested".into());
        }
        if let (Some((lo, hi)), false) = (self.axis.default_range(), self.allow_out_of_range) {
            if let Some(v) = self.values.iter().find(|v| !(lo..=hi).contains(*v)) {
                return bad(format!(
                    "{} value {v} outside the studied range [{lo}, {hi}]; set allow_out_of_range to override",
                    self.axis
                ));
            }
        }
        if self.axis == SweepAxis::NStates
            && self.values.iter().any(|v| v.fract() != 0.0 || *v < 2.0)
        {
            return bad("n_states values must be integers >= 2".into());
        }
        self.base.resolve().map(|_| ())
    }

    /// Simulation and chain for one axis value and trial.
    pub fn trial_setup(&self, value: f64, trial: usize) -> Result<(SynthesisConfig, TransitionModel)> {
        let mut settings = self.base;
        settings.seed = self.base.seed.wrapping_add(trial as u64);
        let mut p_switch = None;
        match self.axis {
            SweepAxis::WindowLength => settings.window_length = value,
            SweepAxis::PSwitch => p_switch = Some(value),
            SweepAxis::SwitchInterval => {
                settings.switch_interval = value;
                settings.trial_length = settings.trial_length.max(2.0 * value);
            }
            SweepAxis::NStates => settings.n_states = value as usize,
            SweepAxis::Alpha => settings.alpha_shift = value,
        }
        // Calibrate against the base settings so that every axis value
        // shares the same underlying statistics.
        let mut emission = self.base.emission.resolve(self.base.n_states)?;
        if self.axis == SweepAxis::WindowLength && self.scale_dprime_with_window {
            emission =
                emission.with_scaled_separation((value / self.base.window_length).sqrt())?;
        }
        settings.emission = EmissionSpec::Model(emission);
        let config = settings.resolve()?;

        let p = match (p_switch, self.p_switch_per_window, self.axis) {
            (Some(p), _, _) => p,
            (None, Some(p), a) if a != SweepAxis::WindowLength => p,
            _ => self.p_switch_per_second * config.window_length,
        };
        let transition = TransitionModel::new(config.n_states, p)?;
        Ok((config, transition))
    }
}

/// One long-format sweep record: one trial, one axis value, one decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub decoder: Decoder,
    pub accuracy: f64,
    pub mean_abs_detection_time: Option<f64>,
    pub missed_switches: usize,
    pub n_switches: usize,
    pub per_window_accuracy: f64,
}

pub const SWEEP_CSV_HEADER: &str = "axis,value,trial,seed,decoder,accuracy,mean_abs_detection_time_s,missed_switches,n_switches,per_window_accuracy";

impl SweepRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.axis,
            self.value,
            self.trial,
            self.seed,
            self.decoder,
            self.accuracy,
            self.mean_abs_detection_time
                .map_or(String::new(), |v| v.to_string()),
            self.missed_switches,
            self.n_switches,
            self.per_window_accuracy
        )
    }
}

/// Runs every (axis value, trial) pair on `workers` threads. Rows come back
/// ordered by value, then trial, then decoder, regardless of scheduling.
pub fn run_sweep(config: &ExperimentConfig, workers: usize) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;

    config.validate()?;
    let jobs: Vec<(f64, usize)> = config
        .values
        .iter()
        .flat_map(|&v| (0..config.trials).map(move |t| (v, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let per_job: Vec<Vec<SweepRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(value, trial)| {
                let seed = config.base.seed.wrapping_add(trial as u64);
                let wrap = |e: Error| Error::Trial {
                    axis: config.axis.to_string(),
                    value,
                    trial,
                    seed,
                    source: Box::new(e),
                };
                let (synth, transition) = config.trial_setup(value, trial).map_err(wrap)?;
                let outcome = run_trial(&synth, &transition, &config.decoders).map_err(wrap)?;
                Ok(outcome
                    .reports
                    .into_iter()
                    .map(|r| SweepRow {
                        axis: config.axis,
                        value,
                        trial,
                        seed,
                        decoder: r.mode,
                        accuracy: r.accuracy,
                        mean_abs_detection_time: r.mean_abs_detection_time,
                        missed_switches: r.missed_switches(),
                        n_switches: r.switch_detections.len(),
                        per_window_accuracy: outcome.per_window_accuracy,
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Aggregate of one (axis value, decoder) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: f64,
    pub decoder: Decoder,
    pub trials: usize,
    pub accuracy: Spread,
    pub detection_time: Option<Spread>,
    pub missed_switches: usize,
    pub total_switches: usize,
    pub per_window_accuracy: f64,
}

impl SweepCell {
    pub fn missed_rate(&self) -> f64 {
        if self.total_switches == 0 {
            0.0
        } else {
            self.missed_switches as f64 / self.total_switches as f64
        }
    }
}

pub const SUMMARY_CSV_HEADER: &str = "axis,value,decoder,trials,accuracy_mean,accuracy_sd,accuracy_q1,accuracy_median,accuracy_q3,detection_time_mean_s,detection_time_sd_s,detection_time_q1_s,detection_time_median_s,detection_time_q3_s,missed_switches,total_switches,per_window_accuracy";

/// Groups sweep rows by (value, decoder), in first-seen order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepCell> {
    let mut keys: Vec<(f64, Decoder)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|&(v, d)| v == r.value && d == r.decoder) {
            keys.push((r.value, r.decoder));
        }
    }
    keys.into_iter()
        .map(|(value, decoder)| {
            let cell: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.value == value && r.decoder == decoder)
                .collect();
            let acc: Vec<f64> = cell.iter().map(|r| r.accuracy).collect();
            let delays: Vec<f64> = cell.iter().filter_map(|r| r.mean_abs_detection_time).collect();
            SweepCell {
                value,
                decoder,
                trials: cell.len(),
                accuracy: Spread::of(&acc).expect("cell has at least one row"),
                detection_time: Spread::of(&delays),
                missed_switches: cell.iter().map(|r| r.missed_switches).sum(),
                total_switches: cell.iter().map(|r| r.n_switches).sum(),
                per_window_accuracy: cell.iter().map(|r| r.per_window_accuracy).sum::<f64>()
                    / cell.len() as f64,
            }
        })
        .collect()
}

impl SweepCell {
    pub fn to_csv(&self, axis: SweepAxis) -> String {
        let d = |f: fn(&Spread) -> f64| self.detection_time.as_ref().map_or(String::new(), |s| f(s).to_string());
        format!(
            "{axis},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.value,
            self.decoder,
            self.trials,
            self.accuracy.mean,
            self.accuracy.sd,
            self.accuracy.q1,
            self.accuracy.median,
            self.accuracy.q3,
            d(|s| s.mean),
            d(|s| s.sd),
            d(|s| s.q1),
            d(|s| s.median),
            d(|s| s.q3),
            self.missed_switches,
            self.total_switches,
            self.per_window_accuracy
        )
    }
}

/// Runs `trials` baseline-style trials and aggregates each decoder.
pub fn run_suite(
    settings: &SimulationSettings,
    p_switch: f64,
    trials: usize,
    decoders: &[Decoder],
) -> Result<Vec<(Decoder, crate::evaluation::Summary)>> {
    let mut per_decoder: Vec<Vec<EvalReport>> = vec![Vec::new(); decoders.len()];
    for trial in 0..trials {
        let mut s = *settings;
        s.seed = settings.seed.wrapping_add(trial as u64);
        let config = s.resolve()?;
        let transition = TransitionModel::new(config.n_states, p_switch)?;
        let outcome = run_trial(&config, &transition, decoders)?;
        for (bucket, report) in per_decoder.iter_mut().zip(outcome.reports) {
            bucket.push(report);
        }
    }
    decoders
        .iter()
        .zip(per_decoder)
        .map(|(&d, reports)| Ok((d, aggregate(&reports)?)))
        .collect()
}
