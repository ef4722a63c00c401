//! Monte-Carlo checks of the score generator and emission model against
//! closed forms computed independently here.

use aad_hmm::synthesis::{expected_accuracy, per_window_accuracy, sample_scores_with};
use aad_hmm::{
    calibrate_dprime, estimate_emission, AttentionTrajectory, EmissionModel, ScoreSeries,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

fn alternating(n_states: usize, n_windows: usize, block: usize) -> AttentionTrajectory {
    let states = (0..n_windows).map(|t| (t / block) % n_states).collect();
    AttentionTrajectory::new(states, 1.0).unwrap()
}

fn attended_z(scores: &ScoreSeries, truth: &AttentionTrajectory) -> Vec<f64> {
    scores
        .rows()
        .zip(&truth.states)
        .map(|(row, &s)| row[s].atanh())
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn two_state_accuracy_matches_phi() {
    let phi = StdNormal::standard();
    let truth = alternating(2, 100_000, 37);
    for d in [0.2927, 0.8, 2.0] {
        let m = EmissionModel::from_d_prime(d).unwrap();
        let s = sample_scores_with(&truth, 2, &m, 0.0, 17).unwrap();
        let measured = per_window_accuracy(&s, &truth).unwrap();
        let closed = phi.cdf(d / std::f64::consts::SQRT_2);
        assert!((measured - closed).abs() < 0.005, "d'={d}: {measured} vs {closed}");
    }
}

#[test]
fn three_state_quadrature_matches_sampling() {
    // Plain argmax frequency over i.i.d. normal draws, no library code involved.
    let d = 0.9;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let std = Normal::new(0.0, 1.0).unwrap();
    let draws = 1_000_000;
    let hits = (0..draws)
        .filter(|_| {
            let a = std.sample(&mut rng) + d;
            let b = std.sample(&mut rng);
            let c = std.sample(&mut rng);
            a > b && a > c
        })
        .count();
    let freq = hits as f64 / draws as f64;
    assert!((freq - expected_accuracy(d, 3)).abs() < 0.002);
}

#[test]
fn calibration_hits_target_accuracy() {
    for (target, n) in [(0.582, 2), (0.7, 2), (0.5, 3), (0.6, 3)] {
        let m = calibrate_dprime(target, n).unwrap();
        let truth = alternating(n, 100_000, 50);
        let s = sample_scores_with(&truth, n, &m, 0.0, 99).unwrap();
        let measured = per_window_accuracy(&s, &truth).unwrap();
        assert!((measured - target).abs() < 0.005, "{target}/{n}: {measured}");
    }
}

#[test]
fn closed_form_two_state_calibration() {
    let phi = StdNormal::standard();
    for target in [0.55, 0.582, 0.75, 0.99] {
        let d = calibrate_dprime(target, 2).unwrap().d_prime();
        assert!((d - std::f64::consts::SQRT_2 * phi.inverse_cdf(target)).abs() < 1e-9);
    }
}

#[test]
fn adjacent_windows_are_uncorrelated() {
    let truth = alternating(2, 100_000, 100_000);
    let m = EmissionModel::new(0.2, 0.0, 0.3).unwrap();
    let s = sample_scores_with(&truth, 2, &m, 0.0, 3).unwrap();
    for j in 0..2 {
        let z: Vec<f64> = s.rows().map(|r| r[j].atanh()).collect();
        let mu = mean(&z);
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..z.len() {
            den += (z[t] - mu).powi(2);
            if t + 1 < z.len() {
                num += (z[t] - mu) * (z[t + 1] - mu);
            }
        }
        assert!((num / den).abs() < 0.02);
    }
}

#[test]
fn alpha_shift_moves_attended_mean_linearly() {
    let m = EmissionModel::new(0.3, 0.1, 0.25).unwrap();
    let truth = alternating(2, 100_000, 300);
    let se = 0.25 / (100_000f64).sqrt();
    for alpha in [-0.5, 0.0, 1.0, 2.5, 5.0] {
        let s = sample_scores_with(&truth, 2, &m, alpha, 8).unwrap();
        let shift = mean(&attended_z(&s, &truth)) - 0.3;
        assert!((shift - alpha * 0.2).abs() < 5.0 * se, "alpha {alpha}: {shift}");
    }
}

#[test]
fn alpha_minus_one_is_chance() {
    let m = calibrate_dprime(0.582, 2).unwrap();
    let truth = alternating(2, 100_000, 300);
    let s = sample_scores_with(&truth, 2, &m, -1.0, 21).unwrap();
    let acc = per_window_accuracy(&s, &truth).unwrap();
    assert!((acc - 0.5).abs() < 0.01);
}

#[test]
fn estimation_recovers_generating_statistics() {
    let m = EmissionModel::new(0.5, 0.25, 0.2).unwrap();
    let truth = alternating(3, 100_000, 40);
    let s = sample_scores_with(&truth, 3, &m, 0.0, 4).unwrap();
    let fit = estimate_emission(&s, &truth.states).unwrap();
    for (got, want) in [
        (fit.mu_attended(), 0.5),
        (fit.mu_unattended(), 0.25),
        (fit.sigma(), 0.2),
    ] {
        assert!(((got - want) / want).abs() < 0.01, "{got} vs {want}");
    }
}

/// Sum of Gaussian log-densities written out term by term.
fn scalar_log_emission(x: &[f64], j: usize, mu_a: f64, mu_u: f64, sigma: f64) -> f64 {
    let log_pdf = |z: f64, mu: f64| {
        -0.5 * ((z - mu) / sigma).powi(2) - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    };
    x.iter()
        .enumerate()
        .map(|(k, &xk)| {
            let z = 0.5 * ((1.0 + xk) / (1.0 - xk)).ln();
            log_pdf(z, if k == j { mu_a } else { mu_u })
        })
        .sum()
}

#[test]
fn series_matches_scalar_reference() {
    let m = EmissionModel::new(0.15, -0.05, 0.4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let u = Normal::new(0.0, 0.5).unwrap();
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..4).map(|_| f64::tanh(u.sample(&mut rng))).collect())
        .collect();
    let s = ScoreSeries::from_rows(&rows, 0.5).unwrap();
    let lb = m.log_emission_series(&s).unwrap();
    for (t, row) in rows.iter().enumerate() {
        for j in 0..4 {
            let want = scalar_log_emission(row, j, 0.15, -0.05, 0.4);
            assert!((lb.get(t, j) - want).abs() < 1e-9 * (1.0 + want.abs()));
            assert!((m.log_emission(row, j).unwrap() - want).abs() < 1e-9 * (1.0 + want.abs()));
        }
    }
}
