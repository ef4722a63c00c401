//! Steady-state accuracy and switch detection time.
//!
//! Accounting rules:
//! - the trial start counts as a detected switch at window 0;
//! - a true switch to state `s` is detected at the first window where the
//!   decisions adopt `s`. Causal decoders search forward from the switch up
//!   to the next true switch. Non-causal decoders (forward-backward,
//!   Viterbi) may also detect early: if the decisions already hold `s` just
//!   before the switch, the detection is the start of that run, bounded by
//!   the start of the previous steady-state block;
//! - a switch without detection is missed and charged the gap to the next
//!   true switch (or the trial end);
//! - accuracy only counts windows from a detection up to the next true
//!   switch (or the next early detection), and the whole block after a
//!   missed switch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Decoder, PosteriorSeries};
use crate::synthesis::AttentionTrajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchDetection {
    /// Seconds from the trial start.
    pub true_time: f64,
    pub detected_time: Option<f64>,
    /// Absolute delay in seconds; the inter-switch gap when missed.
    pub delay: f64,
    pub missed: bool,
    pub to_state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Decoder,
    pub accuracy: f64,
    pub correct_windows: usize,
    pub scored_windows: usize,
    pub switch_detections: Vec<SwitchDetection>,
    /// `None` when the trial has no switches.
    pub mean_abs_detection_time: Option<f64>,
}

impl EvalReport {
    pub fn missed_switches(&self) -> usize {
        self.switch_detections.iter().filter(|d| d.missed).count()
    }
}

/// Per-window argmax of the posterior; ties go to the smaller state index.
pub fn decisions_from_posterior(posterior: &PosteriorSeries) -> Vec<usize> {
    posterior.decisions()
}

pub fn detect_switches(
    decisions: &[usize],
    truth: &AttentionTrajectory,
    mode: Decoder,
) -> Result<EvalReport> {
    let n_windows = truth.n_windows();
    if decisions.len() != n_windows {
        return Err(Error::DimensionMismatch(format!(
            "{} decisions for {} ground-truth windows",
            decisions.len(),
            n_windows
        )));
    }
    let wl = truth.window_length;
    let switches = truth.switch_indices();
    let mut bounds = Vec::with_capacity(switches.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(&switches);
    bounds.push(n_windows);

    // detection[i] for block i; block 0 is the trial start.
    let mut detection: Vec<Option<usize>> = vec![Some(0)];
    let mut steady_start = vec![0usize];
    let mut records = Vec::with_capacity(switches.len());
    for i in 1..bounds.len() - 1 {
        let (switch, next) = (bounds[i], bounds[i + 1]);
        let target = truth.states[switch];
        let lower = steady_start[i - 1];

        // An early detection is a change into the new state inside the
        // previous steady-state block. A run that reaches back to the start
        // of that block was never adopted there, so it does not count.
        let early = if !mode.is_causal() && switch > lower && decisions[switch - 1] == target {
            let mut t = switch - 1;
            while t > lower && decisions[t - 1] == target {
                t -= 1;
            }
            (t > lower).then_some(t)
        } else {
            None
        };
        let found = early.or_else(|| (switch..next).find(|&t| decisions[t] == target));

        let record = match found {
            Some(t) => SwitchDetection {
                true_time: switch as f64 * wl,
                detected_time: Some(t as f64 * wl),
                delay: t.abs_diff(switch) as f64 * wl,
                missed: false,
                to_state: target,
            },
            None => SwitchDetection {
                true_time: switch as f64 * wl,
                detected_time: None,
                delay: (next - switch) as f64 * wl,
                missed: true,
                to_state: target,
            },
        };
        records.push(record);
        detection.push(found);
        steady_start.push(found.map_or(switch, |t| t.max(switch)));
    }

    let mut correct = 0usize;
    let mut scored = 0usize;
    for block in 0..bounds.len() - 1 {
        let start = steady_start[block];
        let end = match detection.get(block + 1) {
            Some(Some(t)) => (*t).min(bounds[block + 1]),
            _ => bounds[block + 1],
        };
        for t in start..end {
            scored += 1;
            if decisions[t] == truth.states[t] {
                correct += 1;
            }
        }
    }

    let mean_abs_detection_time = if records.is_empty() {
        None
    } else {
        Some(records.iter().map(|r| r.delay).sum::<f64>() / records.len() as f64)
    };
    Ok(EvalReport {
        mode,
        accuracy: if scored == 0 {
            0.0
        } else {
            correct as f64 / scored as f64
        },
        correct_windows: correct,
        scored_windows: scored,
        switch_detections: records,
        mean_abs_detection_time,
    })
}

/// Mean, sample standard deviation and quartiles of a metric across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub sd: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            mean,
            sd,
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_reports: usize,
    pub accuracy: Spread,
    /// Across reports that contain at least one switch.
    pub detection_time: Option<Spread>,
    pub total_switches: usize,
    pub missed_switches: usize,
}

impl Summary {
    pub fn missed_rate(&self) -> f64 {
        if self.total_switches == 0 {
            0.0
        } else {
            self.missed_switches as f64 / self.total_switches as f64
        }
    }
}

pub fn aggregate(reports: &[EvalReport]) -> Result<Summary> {
    let accuracies: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let accuracy = Spread::of(&accuracies).ok_or(Error::Empty("report list"))?;
    let delays: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.mean_abs_detection_time)
        .collect();
    Ok(Summary {
        n_reports: reports.len(),
        accuracy,
        detection_time: Spread::of(&delays),
        total_switches: reports.iter().map(|r| r.switch_detections.len()).sum(),
        missed_switches: reports.iter().map(EvalReport::missed_switches).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_switch_truth() -> AttentionTrajectory {
        let states = (0..600).map(|t| usize::from(t >= 300)).collect();
        AttentionTrajectory::new(states, 1.0).unwrap()
    }

    #[test]
    fn delayed_detection() {
        let truth = one_switch_truth();
        let decisions: Vec<usize> = (0..600).map(|t| usize::from(t >= 320)).collect();
        let r = detect_switches(&decisions, &truth, Decoder::Forward).unwrap();
        assert_eq!(r.switch_detections.len(), 1);
        let d = &r.switch_detections[0];
        assert_eq!(d.delay, 20.0);
        assert_eq!(d.detected_time, Some(320.0));
        assert!(!d.missed);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.scored_windows, 300 + 280);
    }

    #[test]
    fn missed_switch_scores_whole_block() {
        let truth = one_switch_truth();
        let decisions = vec![0; 600];
        for mode in Decoder::ALL {
            let r = detect_switches(&decisions, &truth, mode).unwrap();
            let d = &r.switch_detections[0];
            assert!(d.missed);
            assert_eq!(d.delay, 300.0);
            assert_eq!(d.detected_time, None);
            assert_eq!(r.scored_windows, 600);
            assert_eq!(r.correct_windows, 300);
            assert_eq!(r.accuracy, 0.5);
        }
    }

    #[test]
    fn early_detection_counts_for_non_causal_only() {
        let truth = one_switch_truth();
        let decisions: Vec<usize> = (0..600).map(|t| usize::from(t >= 295)).collect();
        let r = detect_switches(&decisions, &truth, Decoder::ForwardBackward).unwrap();
        assert_eq!(r.switch_detections[0].delay, 5.0);
        assert_eq!(r.switch_detections[0].detected_time, Some(295.0));
        // Windows 295..300 are neither before the detection nor after the switch.
        assert_eq!(r.scored_windows, 595);
        assert_eq!(r.accuracy, 1.0);

        let r = detect_switches(&decisions, &truth, Decoder::Viterbi).unwrap();
        assert_eq!(r.switch_detections[0].delay, 5.0);

        let r = detect_switches(&decisions, &truth, Decoder::Forward).unwrap();
        assert_eq!(r.switch_detections[0].delay, 0.0);
        assert_eq!(r.scored_windows, 600);
        assert_eq!(r.correct_windows, 595);
    }

    #[test]
    fn missed_block_is_not_claimed_by_the_next_switch() {
        // Truth alternates every 20 windows; a decoder that never changes
        // misses every switch away from state 0 and is right half the time.
        let states: Vec<usize> = (0..600).map(|t| (t / 20) % 2).collect();
        let truth = AttentionTrajectory::new(states, 1.0).unwrap();
        let decisions = vec![0; 600];
        for mode in Decoder::ALL {
            let r = detect_switches(&decisions, &truth, mode).unwrap();
            assert_eq!(r.scored_windows, 600, "{mode}");
            assert_eq!(r.accuracy, 0.5);
            for d in &r.switch_detections {
                assert_eq!(d.missed, d.to_state == 1);
                if !d.missed {
                    assert_eq!(d.delay, 0.0);
                }
            }
        }
    }

    #[test]
    fn wrong_from_the_start_is_not_an_early_detection() {
        let truth = one_switch_truth();
        let decisions = vec![1; 600];
        let r = detect_switches(&decisions, &truth, Decoder::ForwardBackward).unwrap();
        assert_eq!(r.switch_detections[0].delay, 0.0);
        assert_eq!(r.scored_windows, 600);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn isolated_early_blip_is_not_a_detection() {
        let truth = one_switch_truth();
        let mut decisions: Vec<usize> = (0..600).map(|t| usize::from(t >= 310)).collect();
        decisions[100] = 1;
        let r = detect_switches(&decisions, &truth, Decoder::ForwardBackward).unwrap();
        assert_eq!(r.switch_detections[0].delay, 10.0);
        assert_eq!(r.correct_windows, 299 + 290);
    }

    #[test]
    fn perfect_decisions() {
        let states: Vec<usize> = (0..600).map(|t| (t / 60) % 3).collect();
        let truth = AttentionTrajectory::new(states.clone(), 0.5).unwrap();
        for mode in Decoder::ALL {
            let r = detect_switches(&states, &truth, mode).unwrap();
            assert_eq!(r.accuracy, 1.0);
            assert_eq!(r.switch_detections.len(), 9);
            assert!(r.switch_detections.iter().all(|d| d.delay <= 0.5 && !d.missed));
            assert_eq!(r.mean_abs_detection_time, Some(0.0));
        }
    }

    #[test]
    fn no_switches() {
        let truth = AttentionTrajectory::new(vec![1; 50], 1.0).unwrap();
        let mut decisions = vec![1; 50];
        decisions[3] = 0;
        let r = detect_switches(&decisions, &truth, Decoder::Forward).unwrap();
        assert!(r.switch_detections.is_empty());
        assert_eq!(r.mean_abs_detection_time, None);
        assert!((r.accuracy - 49.0 / 50.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let truth = one_switch_truth();
        assert!(matches!(
            detect_switches(&[0; 10], &truth, Decoder::Forward),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn aggregate_statistics() {
        let truth = one_switch_truth();
        let a: Vec<usize> = (0..600).map(|t| usize::from(t >= 320)).collect();
        let r1 = detect_switches(&a, &truth, Decoder::Forward).unwrap();
        let s = aggregate(std::slice::from_ref(&r1)).unwrap();
        assert_eq!(s.accuracy.mean, r1.accuracy);
        assert_eq!(s.accuracy.sd, 0.0);
        assert_eq!(s.detection_time.unwrap().mean, 20.0);

        let mut r2 = r1.clone();
        r2.accuracy = 0.9;
        let s = aggregate(&[r1, r2]).unwrap();
        assert!((s.accuracy.mean - 0.95).abs() < 1e-12);
        assert_eq!(s.total_switches, 2);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn quartiles() {
        let s = Spread::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(s.median, 3.0);
        assert_eq!(s.q1, 2.0);
        assert_eq!(s.q3, 4.0);
        assert!((s.sd - 2.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
    }

    #[test]
    fn tie_break_in_readout() {
        let p = PosteriorSeries::from_rows(
            &[vec![0.7, 0.3], vec![0.5, 0.5], vec![0.2, 0.8]],
            Decoder::Forward,
        )
        .unwrap();
        assert_eq!(decisions_from_posterior(&p), vec![0, 0, 1]);
    }
}
