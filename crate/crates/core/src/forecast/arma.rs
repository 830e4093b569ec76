//! ARMA(1,1) model of the daily multiplier series, fitted by conditional
//! sum of squares.

use serde::{Deserialize, Serialize};

use crate::optimizer::{minimize, NlpProblem, SolverOptions};

/// Shorter series get the mean-only fallback model.
pub const MIN_ARMA_HISTORY: usize = 10;

/// Coefficient box `|φ|, |θ| ≤ PARAM_BOUND`.
const PARAM_BOUND: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierModel {
    pub mu: f64,
    pub phi: f64,
    pub theta: f64,
    /// CSS residuals `ε_1..ε_n` with `ε_1 = 0`.
    pub residuals: Vec<f64>,
    /// Sample variance of `ε_2..ε_n`.
    pub sigma2: f64,
    /// The best fit sits on the coefficient box (non-stationary or
    /// non-invertible direction); coefficients are already clamped.
    #[serde(default)]
    pub at_boundary: bool,
    /// Mean-only model used for short histories.
    #[serde(default)]
    pub fallback: bool,
}

impl MultiplierModel {
    pub fn from_parts(mu: f64, phi: f64, theta: f64, residuals: Vec<f64>, sigma2: f64) -> Self {
        Self {
            mu,
            phi,
            theta,
            residuals,
            sigma2,
            at_boundary: false,
            fallback: false,
        }
    }

    /// `μ = mean`, `φ = θ = 0`. With fewer than two points the variance is
    /// set to `max(1, mean)²`, a deliberately vague prior.
    pub fn fallback(series: &[f64]) -> Self {
        let n = series.len();
        let mean = if n == 0 {
            0.0
        } else {
            series.iter().sum::<f64>() / n as f64
        };
        let residuals: Vec<f64> = series.iter().map(|p| p - mean).collect();
        let sigma2 = if n >= 2 {
            residuals.iter().map(|e| e * e).sum::<f64>() / (n - 1) as f64
        } else {
            mean.abs().max(1.0).powi(2)
        };
        Self {
            mu: mean,
            phi: 0.0,
            theta: 0.0,
            residuals,
            sigma2: sigma2.max(f64::MIN_POSITIVE),
            at_boundary: false,
            fallback: true,
        }
    }

    /// Unconditional mean `μ / (1 − φ)`.
    pub fn stationary_mean(&self) -> f64 {
        self.mu / (1.0 - self.phi)
    }
}

/// `ε_1 = 0`, `ε_τ = p_τ − μ − φ p_{τ−1} − θ ε_{τ−1}`.
pub fn css_residuals(series: &[f64], mu: f64, phi: f64, theta: f64) -> Vec<f64> {
    let mut eps = vec![0.0; series.len()];
    for t in 1..series.len() {
        eps[t] = series[t] - mu - phi * series[t - 1] - theta * eps[t - 1];
    }
    eps
}

fn css_objective(series: &[f64], params: &[f64], grad: &mut [f64]) -> f64 {
    let (mu, phi, theta) = (params[0], params[1], params[2]);
    let mut e_prev = 0.0;
    let (mut d_mu, mut d_phi, mut d_theta) = (0.0, 0.0, 0.0);
    let mut sse = 0.0;
    grad.iter_mut().for_each(|g| *g = 0.0);
    for t in 1..series.len() {
        let e = series[t] - mu - phi * series[t - 1] - theta * e_prev;
        // derivatives of ε_τ follow the same recursion
        let n_mu = -1.0 - theta * d_mu;
        let n_phi = -series[t - 1] - theta * d_phi;
        let n_theta = -e_prev - theta * d_theta;
        sse += e * e;
        grad[0] += 2.0 * e * n_mu;
        grad[1] += 2.0 * e * n_phi;
        grad[2] += 2.0 * e * n_theta;
        e_prev = e;
        d_mu = n_mu;
        d_phi = n_phi;
        d_theta = n_theta;
    }
    sse
}

fn lag1_autocorrelation(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var: f64 = series.iter().map(|p| (p - mean).powi(2)).sum();
    if var <= 0.0 {
        return 0.0;
    }
    let cov: f64 = series
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum();
    cov / var
}

/// Conditional-sum-of-squares fit of `p_τ = μ + φ p_{τ−1} + θ ε_{τ−1} + ε_τ`.
///
/// Minimizes `Σ ε_τ²` over `|φ|, |θ| ≤ 0.999` with the projected
/// quasi-Newton solver from three starting points. Series shorter than
/// [`MIN_ARMA_HISTORY`] get [`MultiplierModel::fallback`].
pub fn fit_arma11(series: &[f64]) -> MultiplierModel {
    if series.len() < MIN_ARMA_HISTORY {
        return MultiplierModel::fallback(series);
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let scale = series.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    let mu_bound = 100.0 * scale;
    let lower = vec![-mu_bound, -PARAM_BOUND, -PARAM_BOUND];
    let upper = vec![mu_bound, PARAM_BOUND, PARAM_BOUND];
    let phi0 = lag1_autocorrelation(series).clamp(-0.9, 0.9);
    let sum_sq: f64 = series.iter().map(|p| p * p).sum();
    let opts = SolverOptions {
        tol: 1e-10 * sum_sq.max(1.0),
        max_iter: 2000,
        ..Default::default()
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for theta0 in [0.0, 0.5, -0.5] {
        let x0 = vec![mean * (1.0 - phi0), phi0, theta0];
        let mut problem = NlpProblem::new(
            lower.clone(),
            upper.clone(),
            x0,
            |x: &[f64], g: &mut [f64]| css_objective(series, x, g),
        )
        .expect("finite ARMA box");
        let report = minimize(&mut problem, &opts);
        if best.as_ref().is_none_or(|(f, _)| report.f < *f) {
            best = Some((report.f, report.x));
        }
    }
    let (_, params) = best.expect("at least one start");
    let (mu, phi, theta) = (params[0], params[1], params[2]);
    let at_boundary = phi.abs() >= PARAM_BOUND || theta.abs() >= PARAM_BOUND;

    let residuals = css_residuals(series, mu, phi, theta);
    let tail = &residuals[1..];
    let m = tail.iter().sum::<f64>() / tail.len() as f64;
    let sigma2 = tail.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (tail.len() - 1) as f64;

    MultiplierModel {
        mu,
        phi,
        theta,
        residuals,
        sigma2: sigma2.max(f64::MIN_POSITIVE),
        at_boundary,
        fallback: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_series_fallback() {
        let m = fit_arma11(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(m.fallback);
        assert_eq!((m.mu, m.phi, m.theta), (3.0, 0.0, 0.0));
        assert!(m.sigma2 > 0.0);
    }

    #[test]
    fn constant_series_keeps_mean() {
        let series = vec![2.5; 40];
        let m = fit_arma11(&series);
        assert!((m.stationary_mean() - 2.5).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn residual_replay_is_exact() {
        let series: Vec<f64> = (0..60)
            .map(|i| 1.0 + 0.3 * ((i as f64) * 0.7).sin() + 0.01 * i as f64)
            .collect();
        let m = fit_arma11(&series);
        let replay = css_residuals(&series, m.mu, m.phi, m.theta);
        assert_eq!(replay, m.residuals);
        assert_eq!(m.residuals[0], 0.0);
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let series: Vec<f64> = (0..30).map(|i| ((i * 7 % 11) as f64) * 0.1).collect();
        let mut f = |x: &[f64], g: &mut [f64]| css_objective(&series, x, g);
        let err = crate::optimizer::check_gradient(&mut f, &[0.2, 0.4, -0.3], 1e-6).unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
