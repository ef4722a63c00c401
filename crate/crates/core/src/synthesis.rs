//! Synthetic attention trajectories and AAD score series.
//!
//! Ground-truth switches happen on a fixed schedule; scores are drawn from
//! the two-Gaussian model in the Fisher domain and mapped back with `tanh`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StdNormal};

use crate::emission::{EmissionModel, ScoreSeries};
use crate::error::{Error, Result};
use crate::inference::argmax;

/// Range of accuracy shifts accepted in a [`SynthesisConfig`].
pub const ALPHA_RANGE: (f64, f64) = (-0.5, 5.0);

const TRAJECTORY_STREAM: u64 = 0;
const SCORE_STREAM: u64 = 1;

/// True attended state per window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrajectory {
    pub states: Vec<usize>,
    pub window_length: f64,
}

impl AttentionTrajectory {
    pub fn new(states: Vec<usize>, window_length: f64) -> Result<Self> {
        if !(window_length > 0.0 && window_length.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "window length must be positive, got {window_length}"
            )));
        }
        Ok(Self {
            states,
            window_length,
        })
    }

    pub fn n_windows(&self) -> usize {
        self.states.len()
    }

    /// Window indices at which the attended state differs from the previous window.
    pub fn switch_indices(&self) -> Vec<usize> {
        self.states
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(t, _)| t + 1)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub n_states: usize,
    /// Seconds.
    pub trial_length: f64,
    /// Seconds per window.
    pub window_length: f64,
    /// Seconds between ground-truth switches.
    pub switch_interval: f64,
    pub emission: EmissionModel,
    /// Attended scores are shifted by `alpha_shift * (mu_attended - mu_unattended)`.
    pub alpha_shift: f64,
    pub seed: u64,
}

impl SynthesisConfig {
    /// Two speakers, 10 minute trial, 1 s windows, a switch every 5 minutes.
    pub fn baseline(emission: EmissionModel, seed: u64) -> Self {
        Self {
            n_states: 2,
            trial_length: 600.0,
            window_length: 1.0,
            switch_interval: 300.0,
            emission,
            alpha_shift: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_states < 2 {
            return Err(Error::TooFewStates(self.n_states));
        }
        for (name, v) in [
            ("trial_length", self.trial_length),
            ("window_length", self.window_length),
            ("switch_interval", self.switch_interval),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.switch_interval < self.window_length {
            return bad(format!(
                "switch interval {} s is shorter than the window length {} s",
                self.switch_interval, self.window_length
            ));
        }
        if self.trial_length < self.switch_interval {
            return bad(format!(
                "trial length {} s is shorter than the switch interval {} s",
                self.trial_length, self.switch_interval
            ));
        }
        if !(ALPHA_RANGE.0..=ALPHA_RANGE.1).contains(&self.alpha_shift) {
            return bad(format!(
                "alpha_shift {} outside [{}, {}]",
                self.alpha_shift, ALPHA_RANGE.0, ALPHA_RANGE.1
            ));
        }
        Ok(())
    }

    pub fn n_windows(&self) -> usize {
        (self.trial_length / self.window_length + 1e-9).floor() as usize
    }

    /// Window indices of the scheduled switches.
    pub fn switch_schedule(&self) -> Vec<usize> {
        let n_windows = self.n_windows();
        (1..)
            .map(|k| k as f64 * self.switch_interval)
            .take_while(|&s| s < self.trial_length - 1e-9)
            .map(|s| (s / self.window_length).round() as usize)
            .filter(|&t| t > 0 && t < n_windows)
            .collect()
    }

    /// Statistics of the generated scores once the accuracy shift is applied.
    pub fn effective_emission(&self) -> Result<EmissionModel> {
        self.emission.with_scaled_separation(1.0 + self.alpha_shift)
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Scheduled trajectory: uniform initial state, and at every switch a
/// uniformly chosen different state.
pub fn generate_trajectory(config: &SynthesisConfig) -> Result<AttentionTrajectory> {
    config.validate()?;
    let n = config.n_states;
    let mut rng = rng_for(config.seed, TRAJECTORY_STREAM);
    let mut current = rng.random_range(0..n);
    let mut states = Vec::with_capacity(config.n_windows());
    let mut schedule = config.switch_schedule().into_iter().peekable();
    for t in 0..config.n_windows() {
        if schedule.next_if_eq(&t).is_some() {
            let r = rng.random_range(0..n - 1);
            current = if r >= current { r + 1 } else { r };
        }
        states.push(current);
    }
    AttentionTrajectory::new(states, config.window_length)
}

/// Draws one score per window and speaker for the given trajectory.
pub fn sample_scores(
    trajectory: &AttentionTrajectory,
    config: &SynthesisConfig,
) -> Result<ScoreSeries> {
    config.validate()?;
    sample_scores_with(
        trajectory,
        config.n_states,
        &config.emission,
        config.alpha_shift,
        config.seed,
    )
}

/// Like [`sample_scores`] without the range check on `alpha_shift`.
pub fn sample_scores_with(
    trajectory: &AttentionTrajectory,
    n_states: usize,
    emission: &EmissionModel,
    alpha_shift: f64,
    seed: u64,
) -> Result<ScoreSeries> {
    if let Some(&s) = trajectory.states.iter().find(|&&s| s >= n_states) {
        return Err(Error::StateOutOfRange { index: s, n_states });
    }
    let sigma = emission.sigma();
    let attended = Normal::new(emission.mu_attended(), sigma)
        .map_err(|e| Error::InvalidEmission(e.to_string()))?;
    let unattended = Normal::new(emission.mu_unattended(), sigma)
        .map_err(|e| Error::InvalidEmission(e.to_string()))?;
    let shift = alpha_shift * (emission.mu_attended() - emission.mu_unattended());

    let mut rng = rng_for(seed, SCORE_STREAM);
    let mut scores = Vec::with_capacity(trajectory.n_windows() * n_states);
    for &s in &trajectory.states {
        for j in 0..n_states {
            let z = if j == s {
                attended.sample(&mut rng) + shift
            } else {
                unattended.sample(&mut rng)
            };
            scores.push(z.tanh());
        }
    }
    ScoreSeries::from_flat(scores, n_states, trajectory.window_length)
}

/// Fraction of windows where the largest raw score belongs to the attended speaker.
pub fn per_window_accuracy(series: &ScoreSeries, trajectory: &AttentionTrajectory) -> Result<f64> {
    if series.n_windows() != trajectory.n_windows() {
        return Err(Error::DimensionMismatch(format!(
            "{} score windows, {} trajectory windows",
            series.n_windows(),
            trajectory.n_windows()
        )));
    }
    if series.n_windows() == 0 {
        return Err(Error::Empty("score series"));
    }
    let hits = series
        .rows()
        .zip(&trajectory.states)
        .filter(|(row, &s)| argmax(row) == s)
        .count();
    Ok(hits as f64 / series.n_windows() as f64)
}

/// Probability that the attended score is the largest of `n_states` scores
/// when the attended mean exceeds the others by `d_prime` standard deviations.
///
/// Closed form `Φ(d'/√2)` for two states, otherwise
/// `∫ φ(z) Φ(z + d')^(N-1) dz` by composite Simpson quadrature.
pub fn expected_accuracy(d_prime: f64, n_states: usize) -> f64 {
    let std = StdNormal::standard();
    if n_states == 2 {
        return std.cdf(d_prime / std::f64::consts::SQRT_2);
    }
    let (lo, hi, steps) = (-12.0, 12.0 + d_prime.abs(), 8000usize);
    let h = (hi - lo) / steps as f64;
    let f = |z: f64| std.pdf(z) * std.cdf(z + d_prime).powi(n_states as i32 - 1);
    let mut acc = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Emission model (`mu_unattended = 0`, `sigma = 1`) whose per-window
/// argmax accuracy equals `target_accuracy`.
pub fn calibrate_dprime(target_accuracy: f64, n_states: usize) -> Result<EmissionModel> {
    if n_states < 2 {
        return Err(Error::TooFewStates(n_states));
    }
    let chance = 1.0 / n_states as f64;
    if !(target_accuracy > chance && target_accuracy < 1.0) {
        return Err(Error::TargetOutOfRange {
            target: target_accuracy,
            chance,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while expected_accuracy(hi, n_states) < target_accuracy {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::TargetOutOfRange {
                target: target_accuracy,
                chance,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_accuracy(mid, n_states) < target_accuracy {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let d = 0.5 * (lo + hi);
    if d <= 0.0 {
        return Err(Error::TargetOutOfRange {
            target: target_accuracy,
            chance,
        });
    }
    EmissionModel::from_d_prime(d)
}
