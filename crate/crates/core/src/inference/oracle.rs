//! Brute-force reference decoders that enumerate every state path.
//!
//! Exponential in the number of windows; only meant for checking the
//! dynamic-programming decoders on small instances.

use super::{path_log_joint, Decoder, PosteriorSeries, ViterbiPath};
use crate::chain::TransitionModel;
use crate::emission::LogEmissionSeries;
use crate::error::{Error, Result};

/// Largest number of paths that will be enumerated.
pub const MAX_PATHS: usize = 1_000_000;

/// Every path of length `n_windows` over `n_states` states, in lexicographic order.
pub fn all_paths(n_states: usize, n_windows: usize) -> Result<Vec<Vec<usize>>> {
    let count = path_count(n_states, n_windows)?;
    Ok((0..count)
        .map(|mut code| {
            let mut path = vec![0; n_windows];
            for slot in path.iter_mut().rev() {
                *slot = code % n_states;
                code /= n_states;
            }
            path
        })
        .collect())
}

fn path_count(n_states: usize, n_windows: usize) -> Result<usize> {
    let mut count = 1usize;
    for _ in 0..n_windows {
        count = match count.checked_mul(n_states) {
            Some(c) if c <= MAX_PATHS => c,
            _ => {
                return Err(Error::InstanceTooLarge {
                    n_states,
                    n_windows,
                    cap: MAX_PATHS,
                })
            }
        };
    }
    Ok(count)
}

/// Per-window marginals obtained by summing the joint weight of every path.
pub fn exhaustive_posterior(
    transition: &TransitionModel,
    log_b: &LogEmissionSeries,
) -> Result<PosteriorSeries> {
    let n = transition.n_states();
    let n_windows = log_b.n_windows();
    let paths = all_paths(n, n_windows)?;
    let weights = paths
        .iter()
        .map(|p| path_log_joint(transition, log_b, p))
        .collect::<Result<Vec<_>>>()?;
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut marginals = vec![0.0; n_windows * n];
    let mut total = 0.0;
    for (path, w) in paths.iter().zip(&weights) {
        let mass = (w - max).exp();
        total += mass;
        for (t, &s) in path.iter().enumerate() {
            marginals[t * n + s] += mass;
        }
    }
    marginals.iter_mut().for_each(|m| *m /= total);
    Ok(PosteriorSeries {
        probabilities: marginals,
        n_states: n,
        mode: Decoder::ForwardBackward,
        log_likelihood: max + total.ln(),
    })
}

/// Highest-weight path; among equal weights the lexicographically smallest wins.
pub fn exhaustive_viterbi(
    transition: &TransitionModel,
    log_b: &LogEmissionSeries,
) -> Result<ViterbiPath> {
    let paths = all_paths(transition.n_states(), log_b.n_windows())?;
    let mut best: Option<ViterbiPath> = None;
    for path in paths {
        let w = path_log_joint(transition, log_b, &path)?;
        if best.as_ref().is_none_or(|b| w > b.log_joint) {
            best = Some(ViterbiPath {
                states: path,
                log_joint: w,
            });
        }
    }
    best.ok_or(Error::Empty("emission series"))
}
