//! Log-domain decoders: causal forward filtering, forward-backward
//! smoothing and Viterbi decoding.
//!
//! All recursions operate on log-probabilities only. The forward and
//! backward messages are renormalised at every window, which leaves the
//! posteriors unchanged and keeps the magnitudes bounded on arbitrarily
//! long recordings.

use serde::{Deserialize, Serialize};

use crate::chain::TransitionModel;
use crate::emission::LogEmissionSeries;
use crate::error::{Error, Result};

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

/// `ln Σ exp(v)` computed as `max + ln Σ exp(v - max)`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllNegativeInfinity);
    }
    Ok(lse_with_max(values, max))
}

#[inline]
fn lse_with_max(values: &[f64], max: f64) -> f64 {
    if values.len() == 1 {
        return values[0];
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Two-term log-sum-exp; `b` may be `-inf`.
#[inline]
fn lse2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `out[j] = ln sum_k a_kj exp(w[k])`. The chain is symmetric, so the same
/// routine serves the backward pass. With the uniform-switch structure this
/// is O(N), and equal inputs give bit-identical outputs, which keeps exact
/// ties exact.
fn propagate(transition: &TransitionModel, w: &[f64], terms: &mut [f64], out: &mut [f64]) {
    let n = w.len();
    match transition.log_diagonal_excess() {
        Some(excess) => {
            let shared = transition.log_transition_unchecked(0, 1) + lse(w);
            for (o, &wj) in out.iter_mut().zip(w) {
                *o = lse2(shared, excess + wj);
            }
        }
        None => {
            for j in 0..n {
                for k in 0..n {
                    terms[k] = w[k] + transition.log_transition_unchecked(k, j);
                }
                out[j] = lse(terms);
            }
        }
    }
}

/// For finite inputs only.
#[inline]
fn lse(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lse_with_max(values, max)
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Which decoder produced a decision sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decoder {
    #[serde(rename = "causal")]
    Forward,
    #[serde(rename = "non-causal")]
    ForwardBackward,
    #[serde(rename = "viterbi")]
    Viterbi,
}

impl Decoder {
    pub const ALL: [Decoder; 3] = [Decoder::Forward, Decoder::ForwardBackward, Decoder::Viterbi];

    pub fn is_causal(self) -> bool {
        matches!(self, Decoder::Forward)
    }

    pub fn name(self) -> &'static str {
        match self {
            Decoder::Forward => "causal",
            Decoder::ForwardBackward => "non-causal",
            Decoder::Viterbi => "viterbi",
        }
    }
}

impl std::fmt::Display for Decoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "causal" | "forward" => Ok(Decoder::Forward),
            "non-causal" | "noncausal" | "forward_backward" | "forward-backward" => {
                Ok(Decoder::ForwardBackward)
            }
            "viterbi" => Ok(Decoder::Viterbi),
            other => Err(Error::InvalidConfig(format!("unknown decoder {other:?}"))),
        }
    }
}

/// Per-window attention probabilities; every row sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSeries {
    probabilities: Vec<f64>,
    n_states: usize,
    mode: Decoder,
    log_likelihood: f64,
}

impl PosteriorSeries {
    /// Wraps externally supplied probabilities. Rows must be normalised.
    pub fn from_rows(rows: &[Vec<f64>], mode: Decoder) -> Result<Self> {
        let n_states = rows.first().map_or(0, Vec::len);
        if n_states == 0 {
            return Err(Error::Empty("posterior rows"));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n_states {
                return Err(Error::DimensionMismatch(format!(
                    "window {t} has {} probabilities, expected {n_states}",
                    row.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidConfig(format!(
                    "window {t} is not a probability vector (sum {sum})"
                )));
            }
        }
        Ok(Self {
            probabilities: rows.concat(),
            n_states,
            mode,
            log_likelihood: f64::NAN,
        })
    }

    pub fn n_windows(&self) -> usize {
        self.probabilities.len() / self.n_states
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn mode(&self) -> Decoder {
        self.mode
    }

    /// `ln p(x_0..x_T)` under the model, or NaN when the rows were supplied externally.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.probabilities[t * self.n_states..(t + 1) * self.n_states]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.probabilities.chunks(self.n_states)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probabilities
    }

    /// Most probable state per window, smaller index on ties.
    pub fn decisions(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }
}

/// Most probable state sequence and its joint log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiPath {
    pub states: Vec<usize>,
    pub log_joint: f64,
}

fn check_dims(transition: &TransitionModel, log_b: &LogEmissionSeries) -> Result<()> {
    if transition.n_states() != log_b.n_states() {
        return Err(Error::DimensionMismatch(format!(
            "transition model has {} states, emissions have {}",
            transition.n_states(),
            log_b.n_states()
        )));
    }
    if log_b.n_windows() == 0 {
        return Err(Error::Empty("emission series"));
    }
    Ok(())
}

/// Writes `exp(v - lse(v))` into `out`.
fn normalized_exp(v: &[f64], out: &mut [f64]) {
    let total = lse(v);
    for (o, x) in out.iter_mut().zip(v) {
        *o = (x - total).exp();
    }
}

/// Snapshot of a [`ForwardFilter`] that can be stored and resumed later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardCheckpoint {
    pub log_alpha: Vec<f64>,
    pub windows_seen: usize,
    pub log_likelihood: f64,
}

/// Streaming causal filter: feed one window of log-emissions at a time.
#[derive(Debug, Clone)]
pub struct ForwardFilter {
    transition: TransitionModel,
    log_alpha: Vec<f64>,
    windows_seen: usize,
    log_likelihood: f64,
    terms: Vec<f64>,
    next: Vec<f64>,
}

impl ForwardFilter {
    pub fn new(transition: TransitionModel) -> Self {
        let n = transition.n_states();
        Self {
            transition,
            log_alpha: transition.uniform_log_prior(),
            windows_seen: 0,
            log_likelihood: 0.0,
            terms: vec![0.0; n],
            next: vec![0.0; n],
        }
    }

    pub fn resume(transition: TransitionModel, checkpoint: ForwardCheckpoint) -> Result<Self> {
        if checkpoint.log_alpha.len() != transition.n_states() {
            return Err(Error::DimensionMismatch(format!(
                "checkpoint has {} states, model has {}",
                checkpoint.log_alpha.len(),
                transition.n_states()
            )));
        }
        let mut filter = Self::new(transition);
        filter.log_alpha = checkpoint.log_alpha;
        filter.windows_seen = checkpoint.windows_seen;
        filter.log_likelihood = checkpoint.log_likelihood;
        Ok(filter)
    }

    pub fn checkpoint(&self) -> ForwardCheckpoint {
        ForwardCheckpoint {
            log_alpha: self.log_alpha.clone(),
            windows_seen: self.windows_seen,
            log_likelihood: self.log_likelihood,
        }
    }

    pub fn windows_seen(&self) -> usize {
        self.windows_seen
    }

    /// Normalised `ln α(t)` of the last window (the log prior before any window).
    pub fn log_alpha(&self) -> &[f64] {
        &self.log_alpha
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Absorbs one window and writes the causal posterior into `posterior`.
    pub fn step_into(&mut self, log_b_row: &[f64], posterior: &mut [f64]) -> Result<()> {
        let n = self.transition.n_states();
        if log_b_row.len() != n || posterior.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} entries per window, got {}",
                log_b_row.len()
            )));
        }
        if let Some(j) = log_b_row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                window: self.windows_seen,
                state: j,
                value: log_b_row[j],
            });
        }
        self.advance(log_b_row);
        normalized_exp(&self.log_alpha, posterior);
        Ok(())
    }

    pub fn step(&mut self, log_b_row: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.transition.n_states()];
        self.step_into(log_b_row, &mut out)?;
        Ok(out)
    }

    fn advance(&mut self, log_b_row: &[f64]) {
        let n = self.transition.n_states();
        if self.windows_seen == 0 {
            for j in 0..n {
                self.next[j] = self.log_alpha[j] + log_b_row[j];
            }
        } else {
            propagate(&self.transition, &self.log_alpha, &mut self.terms, &mut self.next);
            for (x, b) in self.next.iter_mut().zip(log_b_row) {
                *x += b;
            }
        }
        let norm = lse(&self.next);
        for (a, x) in self.log_alpha.iter_mut().zip(&self.next) {
            *a = x - norm;
        }
        self.log_likelihood += norm;
        self.windows_seen += 1;
    }
}

/// Normalised forward messages for every window, row-major.
fn forward_messages(transition: &TransitionModel, log_b: &LogEmissionSeries) -> (Vec<f64>, f64) {
    let mut filter = ForwardFilter::new(*transition);
    let mut out = Vec::with_capacity(log_b.as_flat().len());
    for row in log_b.rows() {
        filter.advance(row);
        out.extend_from_slice(&filter.log_alpha);
    }
    (out, filter.log_likelihood)
}

/// Causal posteriors `P(S(t) = j | x_0..x_t)`.
pub fn forward(transition: &TransitionModel, log_b: &LogEmissionSeries) -> Result<PosteriorSeries> {
    check_dims(transition, log_b)?;
    let n = transition.n_states();
    let (mut log_alpha, log_likelihood) = forward_messages(transition, log_b);
    let mut row = vec![0.0; n];
    for chunk in log_alpha.chunks_mut(n) {
        normalized_exp(chunk, &mut row);
        chunk.copy_from_slice(&row);
    }
    Ok(PosteriorSeries {
        probabilities: log_alpha,
        n_states: n,
        mode: Decoder::Forward,
        log_likelihood,
    })
}

/// Non-causal posteriors `P(S(t) = j | x_0..x_T)`.
pub fn forward_backward(
    transition: &TransitionModel,
    log_b: &LogEmissionSeries,
) -> Result<PosteriorSeries> {
    check_dims(transition, log_b)?;
    let n = transition.n_states();
    let n_windows = log_b.n_windows();
    let (mut gamma, log_likelihood) = forward_messages(transition, log_b);

    let mut log_beta = vec![0.0; n];
    let mut prev_beta = vec![0.0; n];
    let mut weighted = vec![0.0; n];
    let mut terms = vec![0.0; n];
    let mut row = vec![0.0; n];
    for t in (0..n_windows).rev() {
        if t + 1 < n_windows {
            let next_b = log_b.row(t + 1);
            std::mem::swap(&mut log_beta, &mut prev_beta);
            for k in 0..n {
                weighted[k] = prev_beta[k] + next_b[k];
            }
            propagate(transition, &weighted, &mut terms, &mut log_beta);
            let norm = lse(&log_beta);
            log_beta.iter_mut().for_each(|b| *b -= norm);
        }
        let chunk = &mut gamma[t * n..(t + 1) * n];
        for (g, b) in chunk.iter_mut().zip(&log_beta) {
            *g += b;
        }
        normalized_exp(chunk, &mut row);
        chunk.copy_from_slice(&row);
    }
    Ok(PosteriorSeries {
        probabilities: gamma,
        n_states: n,
        mode: Decoder::ForwardBackward,
        log_likelihood,
    })
}

/// Most probable state sequence. Ties break toward the smaller state index,
/// both for the predecessor choice and for the final state.
pub fn viterbi(transition: &TransitionModel, log_b: &LogEmissionSeries) -> Result<ViterbiPath> {
    check_dims(transition, log_b)?;
    let n = transition.n_states();
    let n_windows = log_b.n_windows();

    let mut score: Vec<f64> = transition
        .uniform_log_prior()
        .iter()
        .zip(log_b.row(0))
        .map(|(p, b)| p + b)
        .collect();
    let mut next = vec![0.0; n];
    let mut backpointers = vec![0usize; n_windows * n];

    for t in 1..n_windows {
        let row = log_b.row(t);
        let bp = &mut backpointers[t * n..(t + 1) * n];
        for j in 0..n {
            let mut best_k = 0;
            let mut best = score[0] + transition.log_transition_unchecked(0, j);
            for (k, &s) in score.iter().enumerate().skip(1) {
                let cand = s + transition.log_transition_unchecked(k, j);
                if cand > best {
                    best = cand;
                    best_k = k;
                }
            }
            next[j] = best + row[j];
            bp[j] = best_k;
        }
        std::mem::swap(&mut score, &mut next);
    }

    let last = argmax(&score);
    let log_joint = score[last];
    let mut states = vec![0usize; n_windows];
    states[n_windows - 1] = last;
    for t in (1..n_windows).rev() {
        states[t - 1] = backpointers[t * n + states[t]];
    }
    Ok(ViterbiPath { states, log_joint })
}

/// Joint log-probability of a state path and the observations:
/// uniform prior, then transitions and emissions along the path.
pub fn path_log_joint(
    transition: &TransitionModel,
    log_b: &LogEmissionSeries,
    path: &[usize],
) -> Result<f64> {
    check_dims(transition, log_b)?;
    if path.len() != log_b.n_windows() {
        return Err(Error::DimensionMismatch(format!(
            "path of length {} for {} windows",
            path.len(),
            log_b.n_windows()
        )));
    }
    let mut total = -(transition.n_states() as f64).ln();
    for (t, &s) in path.iter().enumerate() {
        if s >= transition.n_states() {
            return Err(Error::StateOutOfRange {
                index: s,
                n_states: transition.n_states(),
            });
        }
        if t > 0 {
            total += transition.log_transition_unchecked(path[t - 1], s);
        }
        total += log_b.get(t, s);
    }
    Ok(total)
}
