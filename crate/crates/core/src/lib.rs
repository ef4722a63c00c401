//! Hidden Markov model post-processing of auditory attention decoding (AAD)
//! scores.
//!
//! A listener's attention is modelled as a Markov chain over speakers with
//! a small per-window switch probability. Per-window AAD correlations are
//! turned into emission log-densities, and the chain is decoded causally
//! ([`forward`]), non-causally ([`forward_backward`]) or as a single most
//! probable path ([`viterbi`]). The [`synthesis`] and [`evaluation`]
//! modules generate synthetic trials and score decoders on steady-state
//! accuracy and switch detection time.
//!
//! ```
//! use aad_hmm::{forward_backward, EmissionModel, ScoreSeries, TransitionModel};
//!
//! let chain = TransitionModel::new(2, 0.001).unwrap();
//! let emission = EmissionModel::new(0.3, 0.0, 1.0).unwrap();
//! let scores = ScoreSeries::from_rows(&[vec![0.2, -0.1], vec![0.15, 0.05]], 1.0).unwrap();
//! let log_b = emission.log_emission_series(&scores).unwrap();
//! let posterior = forward_backward(&chain, &log_b).unwrap();
//! assert_eq!(posterior.decisions(), vec![0, 0]);
//! ```

pub mod chain;
pub mod cli;
pub mod emission;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod inference;
pub mod io;
pub mod plot;
pub mod synthesis;

pub use chain::{ChainConfig, TransitionModel};
pub use emission::{estimate_emission, fisher_transform, EmissionModel, LogEmissionSeries, ScoreSeries};
pub use error::{Error, Result};
pub use evaluation::{aggregate, decisions_from_posterior, detect_switches, EvalReport, Summary};
pub use inference::{
    forward, forward_backward, log_sum_exp, viterbi, Decoder, ForwardFilter, PosteriorSeries,
    ViterbiPath,
};
pub use synthesis::{
    calibrate_dprime, generate_trajectory, sample_scores, AttentionTrajectory, SynthesisConfig,
};
