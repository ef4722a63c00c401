//! Emission model for correlation-based attention scores.
//!
//! Correlations are Fisher-transformed (`atanh`) and modelled as two
//! Gaussians with a shared standard deviation: one for the attended speaker
//! and one for every unattended speaker. The emission density of state `j`
//! is the product of the attended density of `x_j` and the unattended
//! densities of all other entries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw correlations are clamped to `[-1 + CLAMP_EPS, 1 - CLAMP_EPS]` on ingestion.
pub const CLAMP_EPS: f64 = 1e-7;

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

pub fn fisher_transform(x: f64) -> Result<f64> {
    if x.is_nan() || x.abs() >= 1.0 {
        return Err(Error::CorrelationOutOfRange(x));
    }
    Ok(x.atanh())
}

/// Maps a raw correlation into the open interval accepted by [`fisher_transform`].
///
/// Values in `[-1, 1]` are clamped; anything outside, or non-finite, is rejected.
pub fn clamp_correlation(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 {
        return Err(Error::CorrelationOutOfRange(x));
    }
    Ok(x.clamp(-1.0 + CLAMP_EPS, 1.0 - CLAMP_EPS))
}

#[inline]
fn log_normal_pdf(z: f64, mean: f64, sigma: f64) -> f64 {
    let u = (z - mean) / sigma;
    -HALF_LN_TWO_PI - sigma.ln() - 0.5 * u * u
}

/// Gaussian statistics of Fisher-transformed correlations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEmission")]
pub struct EmissionModel {
    mu_attended: f64,
    mu_unattended: f64,
    sigma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmission {
    mu_attended: f64,
    mu_unattended: f64,
    sigma: f64,
}

impl TryFrom<RawEmission> for EmissionModel {
    type Error = Error;

    fn try_from(raw: RawEmission) -> Result<Self> {
        EmissionModel::new(raw.mu_attended, raw.mu_unattended, raw.sigma)
    }
}

impl EmissionModel {
    pub fn new(mu_attended: f64, mu_unattended: f64, sigma: f64) -> Result<Self> {
        if !(mu_attended.is_finite() && mu_unattended.is_finite()) {
            return Err(Error::InvalidEmission("means must be finite".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidEmission(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        if mu_attended <= mu_unattended {
            return Err(Error::InvalidEmission(format!(
                "attended mean {mu_attended} does not exceed unattended mean {mu_unattended}"
            )));
        }
        Ok(Self {
            mu_attended,
            mu_unattended,
            sigma,
        })
    }

    /// Model with `mu_unattended = 0`, `sigma = 1` and the given separation.
    pub fn from_d_prime(d_prime: f64) -> Result<Self> {
        Self::new(d_prime, 0.0, 1.0)
    }

    pub fn mu_attended(&self) -> f64 {
        self.mu_attended
    }

    pub fn mu_unattended(&self) -> f64 {
        self.mu_unattended
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Separation `(mu_attended - mu_unattended) / sigma`.
    pub fn d_prime(&self) -> f64 {
        (self.mu_attended - self.mu_unattended) / self.sigma
    }

    /// Same unattended statistics, separation multiplied by `factor`.
    pub fn with_scaled_separation(&self, factor: f64) -> Result<Self> {
        let gap = self.mu_attended - self.mu_unattended;
        Self::new(self.mu_unattended + factor * gap, self.mu_unattended, self.sigma)
    }

    /// `ln b_j` for a single window of raw correlations.
    pub fn log_emission(&self, x: &[f64], j: usize) -> Result<f64> {
        if j >= x.len() {
            return Err(Error::StateOutOfRange {
                index: j,
                n_states: x.len(),
            });
        }
        let z = x
            .iter()
            .map(|&v| fisher_transform(v))
            .collect::<Result<Vec<_>>>()?;
        let value = product_log_density(self.mu_attended, self.mu_unattended, self.sigma, &z, j);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                window: 0,
                state: j,
                value,
            });
        }
        Ok(value)
    }

    /// Applies [`EmissionModel::log_emission`] to every window and state.
    pub fn log_emission_series(&self, series: &ScoreSeries) -> Result<LogEmissionSeries> {
        let n = series.n_states();
        let mut out = Vec::with_capacity(series.n_windows() * n);
        let mut attended = vec![0.0; n];
        let mut unattended = vec![0.0; n];
        for (t, row) in series.rows().enumerate() {
            for (k, &x) in row.iter().enumerate() {
                let z = fisher_transform(x).map_err(|_| Error::NonFinite {
                    window: t,
                    state: k,
                    value: x,
                })?;
                attended[k] = log_normal_pdf(z, self.mu_attended, self.sigma);
                unattended[k] = log_normal_pdf(z, self.mu_unattended, self.sigma);
            }
            let all_unattended: f64 = unattended.iter().sum();
            for j in 0..n {
                let value = all_unattended - unattended[j] + attended[j];
                if !value.is_finite() {
                    return Err(Error::NonFinite {
                        window: t,
                        state: j,
                        value,
                    });
                }
                out.push(value);
            }
        }
        LogEmissionSeries::from_flat(out, n)
    }
}

/// Product-form log density without any validation of the parameters.
fn product_log_density(mu_att: f64, mu_unatt: f64, sigma: f64, z: &[f64], j: usize) -> f64 {
    z.iter()
        .enumerate()
        .map(|(k, &zk)| {
            let mean = if k == j { mu_att } else { mu_unatt };
            log_normal_pdf(zk, mean, sigma)
        })
        .sum()
}

/// Per-window, per-speaker correlation scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    scores: Vec<f64>,
    n_states: usize,
    window_length: f64,
}

impl ScoreSeries {
    /// Builds a series from row-major raw correlations, clamping each entry.
    pub fn from_flat(scores: Vec<f64>, n_states: usize, window_length: f64) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::TooFewStates(0));
        }
        if scores.len() % n_states != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} scores is not a multiple of {n_states} states",
                scores.len()
            )));
        }
        if !(window_length > 0.0 && window_length.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "window length must be positive, got {window_length}"
            )));
        }
        let scores = scores
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                clamp_correlation(x).map_err(|_| Error::NonFinite {
                    window: i / n_states,
                    state: i % n_states,
                    value: x,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scores,
            n_states,
            window_length,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], window_length: f64) -> Result<Self> {
        let n_states = rows.first().map_or(0, Vec::len);
        if let Some((t, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_states) {
            return Err(Error::DimensionMismatch(format!(
                "window {t} has {} scores, expected {n_states}",
                row.len()
            )));
        }
        Self::from_flat(rows.concat(), n_states, window_length)
    }

    pub fn n_windows(&self) -> usize {
        self.scores.len() / self.n_states
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn window_length(&self) -> f64 {
        self.window_length
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.scores[t * self.n_states..(t + 1) * self.n_states]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.scores.chunks(self.n_states)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.scores
    }
}

/// `ln b_j(t)` for every window `t` and state `j`.
///
/// Also the entry point for front-ends that produce log-probabilities
/// directly (e.g. a log-softmax over classifier outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct LogEmissionSeries {
    log_b: Vec<f64>,
    n_states: usize,
}

impl LogEmissionSeries {
    pub fn from_flat(log_b: Vec<f64>, n_states: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::TooFewStates(0));
        }
        if log_b.len() % n_states != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} log-emissions is not a multiple of {n_states} states",
                log_b.len()
            )));
        }
        if let Some(i) = log_b.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                window: i / n_states,
                state: i % n_states,
                value: log_b[i],
            });
        }
        Ok(Self { log_b, n_states })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_states = rows.first().map_or(0, Vec::len);
        if let Some((t, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_states) {
            return Err(Error::DimensionMismatch(format!(
                "window {t} has {} entries, expected {n_states}",
                row.len()
            )));
        }
        Self::from_flat(rows.concat(), n_states)
    }

    pub fn n_windows(&self) -> usize {
        self.log_b.len() / self.n_states
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.log_b[t * self.n_states..(t + 1) * self.n_states]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.log_b.chunks(self.n_states)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.log_b
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.log_b[t * self.n_states + j]
    }
}

/// Fits the attended/unattended means and the pooled standard deviation
/// from scores with a known attended state per window.
pub fn estimate_emission(series: &ScoreSeries, attended: &[usize]) -> Result<EmissionModel> {
    if attended.len() != series.n_windows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} windows",
            attended.len(),
            series.n_windows()
        )));
    }
    let n = series.n_states();
    let mut att = Vec::with_capacity(attended.len());
    let mut unatt = Vec::with_capacity(attended.len() * n.saturating_sub(1));
    for (t, (row, &s)) in series.rows().zip(attended).enumerate() {
        if s >= n {
            return Err(Error::StateOutOfRange {
                index: s,
                n_states: n,
            });
        }
        for (j, &x) in row.iter().enumerate() {
            let z = fisher_transform(x).map_err(|_| Error::NonFinite {
                window: t,
                state: j,
                value: x,
            })?;
            if j == s {
                att.push(z);
            } else {
                unatt.push(z);
            }
        }
    }
    if att.len() < 2 || unatt.len() < 2 {
        return Err(Error::InsufficientSamples {
            attended: att.len(),
            unattended: unatt.len(),
        });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mu_att = mean(&att);
    let mu_unatt = mean(&unatt);
    let ss = |v: &[f64], m: f64| v.iter().map(|z| (z - m) * (z - m)).sum::<f64>();
    let dof = (att.len() + unatt.len() - 2) as f64;
    let sigma = ((ss(&att, mu_att) + ss(&unatt, mu_unatt)) / dof).sqrt();
    // Constant inputs leave only rounding noise in the variance.
    let scale = 1.0 + mu_att.abs().max(mu_unatt.abs());
    if sigma <= 1e-12 * scale {
        return Err(Error::InvalidEmission(format!(
            "pooled standard deviation {sigma:e} is zero"
        )));
    }
    EmissionModel::new(mu_att, mu_unatt, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn fisher_transform_values() {
        assert_eq!(fisher_transform(0.0).unwrap(), 0.0);
        assert!(close(fisher_transform(0.5).unwrap(), 0.5 * 3f64.ln(), 1e-15));
        assert!(close(fisher_transform(0.5).unwrap(), 0.549_306_144_334_054_8, 1e-15));
        for x in [0.01, 0.3, 0.77, 0.999] {
            assert!(close(fisher_transform(-x).unwrap(), -fisher_transform(x).unwrap(), 1e-12));
        }
        for x in [1.0, -1.0, 1.5, f64::NAN] {
            assert!(fisher_transform(x).is_err());
        }
    }

    #[test]
    fn clamping_keeps_transform_finite() {
        assert_eq!(clamp_correlation(1.0).unwrap(), 1.0 - CLAMP_EPS);
        assert_eq!(clamp_correlation(-1.0).unwrap(), -1.0 + CLAMP_EPS);
        assert_eq!(clamp_correlation(0.25).unwrap(), 0.25);
        assert!(fisher_transform(clamp_correlation(1.0).unwrap()).unwrap().is_finite());
        assert!(clamp_correlation(1.01).is_err());
        assert!(clamp_correlation(f64::INFINITY).is_err());
        let s = ScoreSeries::from_rows(&[vec![1.0, -1.0]], 1.0).unwrap();
        assert!(s.as_flat().iter().all(|x| x.abs() < 1.0));
    }

    #[test]
    fn model_validation() {
        assert!(EmissionModel::new(0.1, 0.0, 1.0).is_ok());
        assert!(EmissionModel::new(0.0, 0.0, 1.0).is_err());
        assert!(EmissionModel::new(-0.1, 0.0, 1.0).is_err());
        assert!(EmissionModel::new(0.1, 0.0, 0.0).is_err());
        assert!(EmissionModel::new(0.1, 0.0, -1.0).is_err());
        assert!(EmissionModel::new(f64::NAN, 0.0, 1.0).is_err());
        let m: std::result::Result<EmissionModel, _> =
            serde_json::from_str(r#"{"mu_attended":0.0,"mu_unattended":0.1,"sigma":1.0}"#);
        assert!(m.is_err());
    }

    #[test]
    fn density_at_own_means() {
        let m = EmissionModel::new(0.12, 0.03, 0.07).unwrap();
        let x = [m.mu_attended().tanh(), m.mu_unattended().tanh()];
        let expected = 2.0 * (1.0 / (m.sigma() * (2.0 * std::f64::consts::PI).sqrt())).ln();
        assert!(close(m.log_emission(&x, 0).unwrap(), expected, 1e-9));
    }

    #[test]
    fn equal_means_give_equal_emissions() {
        for x in [[0.1, -0.2], [0.5, 0.5], [-0.9, 0.3]] {
            let z: Vec<f64> = x.iter().map(|v: &f64| v.atanh()).collect();
            let a = product_log_density(0.2, 0.2, 0.5, &z, 0);
            let b = product_log_density(0.2, 0.2, 0.5, &z, 1);
            assert!(close(a, b, 1e-12));
        }
    }

    #[test]
    fn two_state_log_ratio_closed_form() {
        let m = EmissionModel::new(0.3, -0.1, 0.4).unwrap();
        for x in [[0.1, 0.2], [0.9, -0.5], [-0.3, -0.31], [0.0, 0.0]] {
            let diff = m.log_emission(&x, 0).unwrap() - m.log_emission(&x, 1).unwrap();
            let expected = (m.mu_attended() - m.mu_unattended()) / (m.sigma() * m.sigma())
                * (x[0].atanh() - x[1].atanh());
            assert!(close(diff, expected, 1e-10), "{diff} vs {expected}");
        }
    }

    #[test]
    fn monotone_in_own_score() {
        let m = EmissionModel::new(0.2, 0.0, 0.3).unwrap();
        // The density itself peaks at mu_attended; below it, ln b_j rises with x_j.
        let mut prev = f64::NEG_INFINITY;
        for i in -9..=1 {
            let x = [0.1, i as f64 / 10.0, -0.2];
            let v = m.log_emission(&x, 1).unwrap();
            assert!(v > prev);
            prev = v;
        }
        // Relative to every other state it rises over the whole range.
        let mut prev = [f64::NEG_INFINITY; 2];
        for i in -9..=9 {
            let x = [0.1, i as f64 / 10.0, -0.2];
            let own = m.log_emission(&x, 1).unwrap();
            for (slot, k) in [0, 2].into_iter().enumerate() {
                let rel = own - m.log_emission(&x, k).unwrap();
                assert!(rel > prev[slot]);
                prev[slot] = rel;
            }
        }
    }

    #[test]
    fn log_emission_errors() {
        let m = EmissionModel::new(0.2, 0.0, 0.3).unwrap();
        assert!(m.log_emission(&[0.1, 0.2], 2).is_err());
        assert!(m.log_emission(&[1.0, 0.2], 0).is_err());
    }

    #[test]
    fn single_window_series_matches_scalar() {
        let m = EmissionModel::new(0.2, 0.0, 0.3).unwrap();
        let s = ScoreSeries::from_rows(&[vec![0.1, -0.05, 0.3]], 1.0).unwrap();
        let lb = m.log_emission_series(&s).unwrap();
        assert_eq!(lb.n_windows(), 1);
        for j in 0..3 {
            assert!(close(lb.get(0, j), m.log_emission(s.row(0), j).unwrap(), 1e-12));
        }
    }

    #[test]
    fn series_shape_errors() {
        assert!(ScoreSeries::from_rows(&[vec![0.1, 0.2], vec![0.3]], 1.0).is_err());
        assert!(ScoreSeries::from_flat(vec![0.1, 0.2, 0.3], 2, 1.0).is_err());
        assert!(ScoreSeries::from_flat(vec![0.1, 0.2], 2, 0.0).is_err());
        assert!(LogEmissionSeries::from_flat(vec![0.0, f64::NEG_INFINITY], 2).is_err());
        assert!(LogEmissionSeries::from_rows(&[vec![0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn estimate_rejects_zero_variance() {
        let rows: Vec<Vec<f64>> = (0..10).map(|_| vec![0.4f64.tanh(), 0.1f64.tanh()]).collect();
        let s = ScoreSeries::from_rows(&rows, 1.0).unwrap();
        let err = estimate_emission(&s, &[0; 10]).unwrap_err();
        assert!(matches!(err, Error::InvalidEmission(_)));
    }

    #[test]
    fn estimate_pools_equal_variances() {
        // Both groups have sample variance 1.0 around their own means.
        let att = [1.0, 2.0, 3.0];
        let unatt = [-1.0, 0.0, 1.0];
        let rows: Vec<Vec<f64>> = att
            .iter()
            .zip(unatt)
            .map(|(a, u)| vec![(a / 10.0f64).tanh(), (u / 10.0f64).tanh()])
            .collect();
        let s = ScoreSeries::from_rows(&rows, 1.0).unwrap();
        let m = estimate_emission(&s, &[0, 0, 0]).unwrap();
        assert!(close(m.mu_attended(), 0.2, 1e-9));
        assert!(close(m.mu_unattended(), 0.0, 1e-9));
        assert!(close(m.sigma(), 0.1, 1e-9));
    }

    #[test]
    fn estimate_error_paths() {
        let s = ScoreSeries::from_rows(&[vec![0.3, 0.1]], 1.0).unwrap();
        assert!(matches!(
            estimate_emission(&s, &[0]),
            Err(Error::InsufficientSamples { .. })
        ));
        assert!(estimate_emission(&s, &[0, 1]).is_err());
        assert!(estimate_emission(&s, &[2]).is_err());
        let s = ScoreSeries::from_rows(&[vec![0.1, 0.3], vec![0.2, 0.5], vec![0.0, 0.4]], 1.0).unwrap();
        assert!(matches!(
            estimate_emission(&s, &[0, 0, 0]),
            Err(Error::InvalidEmission(_))
        ));
    }
}
