//! Attention-state Markov chain.
//!
//! Every speaker is a state. The chain has a uniform prior and a single
//! switch probability shared by all ordered pairs of distinct states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-second switch rate used by the baseline configuration.
pub const DEFAULT_SWITCH_RATE_PER_SECOND: f64 = 0.001;

/// N-state chain with uniform switching.
///
/// Off-diagonal entries of the transition matrix all equal `p_switch`; the
/// diagonal holds the remaining mass `1 - (N - 1) * p_switch`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionModel {
    n_states: usize,
    p_switch: f64,
    log_stay: f64,
    log_switch: f64,
}

impl TransitionModel {
    /// Builds the chain from a per-window switch probability.
    pub fn new(n_states: usize, p_switch: f64) -> Result<Self> {
        if n_states < 2 {
            return Err(Error::TooFewStates(n_states));
        }
        let upper = 1.0 / (n_states - 1) as f64;
        if !(p_switch > 0.0 && p_switch < upper) {
            return Err(Error::InvalidSwitchProbability {
                p_switch,
                n_states,
                upper,
            });
        }
        let stay = 1.0 - (n_states - 1) as f64 * p_switch;
        Ok(Self {
            n_states,
            p_switch,
            log_stay: stay.ln(),
            log_switch: p_switch.ln(),
        })
    }

    /// Builds the chain from a per-second switch rate: `p_switch = rate * window_length`.
    pub fn from_rate(n_states: usize, rate_per_second: f64, window_length: f64) -> Result<Self> {
        if !(window_length > 0.0 && window_length.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "window length must be positive, got {window_length}"
            )));
        }
        Self::new(n_states, rate_per_second * window_length)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn p_switch(&self) -> f64 {
        self.p_switch
    }

    /// Probability of remaining with the current speaker for one window.
    pub fn p_stay(&self) -> f64 {
        1.0 - (self.n_states - 1) as f64 * self.p_switch
    }

    pub fn probability(&self, from: usize, to: usize) -> Result<f64> {
        self.check_index(from)?;
        self.check_index(to)?;
        Ok(if from == to { self.p_stay() } else { self.p_switch })
    }

    /// `ln a(from, to)`. Always finite.
    pub fn log_transition(&self, from: usize, to: usize) -> Result<f64> {
        self.check_index(from)?;
        self.check_index(to)?;
        Ok(self.log_transition_unchecked(from, to))
    }

    #[inline]
    pub(crate) fn log_transition_unchecked(&self, from: usize, to: usize) -> f64 {
        if from == to {
            self.log_stay
        } else {
            self.log_switch
        }
    }

    /// `ln(p_stay - p_switch)`, so that
    /// `sum_k a_kj w_k = p_switch * sum_k w_k + (p_stay - p_switch) * w_j`.
    /// `None` when the diagonal is below the off-diagonal.
    pub(crate) fn log_diagonal_excess(&self) -> Option<f64> {
        let excess = self.n_states as f64 * self.p_switch;
        if excess <= 1.0 {
            Some((-excess).ln_1p())
        } else {
            None
        }
    }

    pub fn uniform_log_prior(&self) -> Vec<f64> {
        vec![-(self.n_states as f64).ln(); self.n_states]
    }

    /// Dense row-major transition matrix, `matrix[from][to]`.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n_states)
            .map(|from| {
                (0..self.n_states)
                    .map(|to| if from == to { self.p_stay() } else { self.p_switch })
                    .collect()
            })
            .collect()
    }

    pub fn to_config(&self) -> ChainConfig {
        ChainConfig::PerWindow {
            n_states: self.n_states,
            p_switch_per_window: self.p_switch,
        }
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index < self.n_states {
            Ok(())
        } else {
            Err(Error::StateOutOfRange {
                index,
                n_states: self.n_states,
            })
        }
    }
}

/// Serialized form of a [`TransitionModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ChainConfig {
    PerWindow {
        n_states: usize,
        p_switch_per_window: f64,
    },
    PerSecond {
        n_states: usize,
        p_switch_per_second: f64,
    },
}

impl ChainConfig {
    pub fn n_states(&self) -> usize {
        match *self {
            ChainConfig::PerWindow { n_states, .. } | ChainConfig::PerSecond { n_states, .. } => {
                n_states
            }
        }
    }

    /// Resolves the per-window probability for the given window length.
    pub fn p_switch(&self, window_length: f64) -> f64 {
        match *self {
            ChainConfig::PerWindow {
                p_switch_per_window,
                ..
            } => p_switch_per_window,
            ChainConfig::PerSecond {
                p_switch_per_second,
                ..
            } => p_switch_per_second * window_length,
        }
    }

    pub fn build(&self, window_length: f64) -> Result<TransitionModel> {
        match *self {
            ChainConfig::PerWindow {
                n_states,
                p_switch_per_window,
            } => TransitionModel::new(n_states, p_switch_per_window),
            ChainConfig::PerSecond {
                n_states,
                p_switch_per_second,
            } => TransitionModel::from_rate(n_states, p_switch_per_second, window_length),
        }
    }
}
