#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pvwdn::controller::{MpcConfig, MpcProblem};
use pvwdn::forecast::{fit_arma11, ErrorModel, ErrorTerm, GaussianBelief};
use pvwdn::plant::{identify_linear_model, ExcitationDesign, LinearPlantModel, NonlinearNetwork};
use pvwdn::scenario::{SamplingMode, Scenario, ScenarioSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Mean and variance of the density `exp(log_density)` on a uniform grid.
pub fn grid_moments(lo: f64, hi: f64, step: f64, log_density: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = ((hi - lo) / step).round() as usize;
    let xs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    let logs: Vec<f64> = xs.iter().map(|&x| log_density(x)).collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let z: f64 = w.iter().sum();
    let mean = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / z;
    let var = xs
        .iter()
        .zip(&w)
        .map(|(x, w)| (x - mean).powi(2) * w)
        .sum::<f64>()
        / z;
    (mean, var)
}

/// Grid point with the largest density.
pub fn grid_argmax(lo: f64, hi: f64, step: f64, log_density: impl Fn(f64) -> f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n)
        .map(|i| lo + i as f64 * step)
        .map(|x| (x, log_density(x)))
        .fold((lo, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        })
        .0
}

pub fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (x - mean).powi(2) / var - 0.5 * var.ln()
}

/// `p_τ = μ + φ p_{τ−1} + θ ε_{τ−1} + ε_τ` after a burn-in.
pub fn arma_series(mu: f64, phi: f64, theta: f64, sigma: f64, len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let burn = 200;
    let mut p = mu / (1.0 - phi);
    let mut eps_prev = 0.0;
    let mut out = Vec::with_capacity(len);
    for t in 0..burn + len {
        let eps = sigma * normal(&mut r);
        p = mu + phi * p + theta * eps_prev + eps;
        eps_prev = eps;
        if t >= burn {
            out.push(p);
        }
    }
    out
}

/// Seeds out of 20 on which the ARMA(1,1) fit recovers
/// `(μ, φ, θ) = (0.1, 0.8, 0.3)` within ±0.1 from 500 samples.
pub fn arma_recovery_passes() -> usize {
    (0..20)
        .filter(|&seed| {
            let series = arma_series(0.1, 0.8, 0.3, 0.05, 500, 100 + seed);
            let m = fit_arma11(&series);
            (m.mu - 0.1).abs() <= 0.1 && (m.phi - 0.8).abs() <= 0.1 && (m.theta - 0.3).abs() <= 0.1
        })
        .count()
}

/// Bell-shaped normalized profile over `slots`, zero outside `rise..set`.
pub fn bell(slots: usize, rise: usize, set: usize) -> Vec<f64> {
    (0..slots)
        .map(|i| {
            if i <= rise || i >= set {
                0.0
            } else {
                let x = (i - rise) as f64 / (set - rise) as f64;
                (std::f64::consts::PI * x).sin()
            }
        })
        .collect()
}

/// Error model with daytime slots `rise+1..set` and the anchor at `rise`.
pub fn error_model(slots: usize, rise: usize, set: usize, phi: f64, sigma2: f64) -> ErrorModel {
    let terms = (0..slots)
        .map(|i| (i > rise && i < set).then_some(ErrorTerm { phi, sigma2 }))
        .collect();
    ErrorModel {
        terms,
        anchor: rise,
    }
}

/// A random conditioning instance: prior, shape, error model with
/// slot-varying coefficients, observed prefix and sunrise index.
pub struct PosteriorInstance {
    pub prior: GaussianBelief,
    pub shape: Vec<f64>,
    pub errors: ErrorModel,
    pub observed: Vec<f64>,
    pub sunrise: usize,
}

pub fn posterior_instance(seed: u64) -> PosteriorInstance {
    let mut r = rng(seed);
    let slots = 40;
    let rise = r.random_range(5..12);
    let set = r.random_range(28..36);
    let shape = bell(slots, rise, set);
    let terms = (0..slots)
        .map(|i| {
            (i > rise && i < set).then(|| ErrorTerm {
                phi: r.random_range(-0.5..0.9),
                sigma2: r.random_range(0.005..0.2),
            })
        })
        .collect();
    let errors = ErrorModel {
        terms,
        anchor: rise,
    };
    let prior = GaussianBelief::new(r.random_range(1.0..4.0), r.random_range(0.05..1.0)).unwrap();
    let p_true: f64 = prior.mean + prior.variance.sqrt() * normal(&mut r);
    let ic = r.random_range(rise + 1..set);
    let mut delta = 0.0;
    let observed = (0..=ic)
        .map(|i| match errors.term(i) {
            Some(t) => {
                delta = t.phi * delta + t.sigma2.sqrt() * normal(&mut r);
                p_true * shape[i] + delta
            }
            None => {
                delta = 0.0;
                p_true * shape[i]
            }
        })
        .collect();
    PosteriorInstance {
        prior,
        shape,
        errors,
        observed,
        sunrise: rise,
    }
}

/// Log of prior × Π_i N(εⁱ(p); 0, σᵢ²) with the innovations replayed
/// literally from the residual chain δⁱ(p) = Xⁱ − pYⁱ.
pub fn posterior_log_density(inst: &PosteriorInstance, p: f64) -> f64 {
    let mut log = log_normal_pdf(p, inst.prior.mean, inst.prior.variance);
    let mut delta_prev = 0.0;
    for i in 0..inst.observed.len() {
        let delta = inst.observed[i] - p * inst.shape[i];
        if i > inst.sunrise {
            if let Some(t) = inst.errors.term(i) {
                let eps = delta - t.phi * delta_prev;
                log += log_normal_pdf(eps, 0.0, t.sigma2);
            }
        }
        delta_prev = if i > inst.sunrise && inst.errors.is_daytime(i) {
            delta
        } else {
            0.0
        };
    }
    log
}

/// Surrogate with level tanks, a linear pipe law and affine pump curves.
pub fn linear_network() -> NonlinearNetwork {
    let mut net = NonlinearNetwork::surrogate();
    net.tanks[0].elevation = 0.0;
    net.pipes[0].conductance = 20.0;
    net.pipes[0].exponent = 1.0;
    for p in &mut net.pumps {
        p.quadratic = 0.0;
    }
    net
}

/// Continuous matrices `(A, B1, B2, C_p, D_p)` and offsets of [`linear_network`].
pub fn linear_network_matrices() -> [DMatrix<f64>; 6] {
    let net = linear_network();
    let (a0, a1) = (net.tanks[0].area, net.tanks[1].area);
    let c = net.pipes[0].conductance;
    let fu = net.flow_unit;
    [
        DMatrix::from_row_slice(2, 2, &[-c / a0, c / a0, c / a1, -c / a1]) * fu,
        DMatrix::from_row_slice(2, 2, &[1.0 / a0, 0.0, 0.0, 1.0 / a1]) * fu,
        DMatrix::from_column_slice(2, 1, &[-0.6 / a0, -0.4 / a1]) * fu,
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[0.02, 0.0, 0.0, 0.025]),
        DMatrix::from_column_slice(2, 1, &[35.0, 33.0]),
    ]
}

/// Largest entrywise error of `x` against `y`, relative to each entry of
/// `y` and to the largest entry of `y` where `y` vanishes.
pub fn entrywise_rel_err(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let scale = y.amax();
    x.iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b).abs() / if *b != 0.0 { b.abs() } else { scale })
        .fold(0.0, f64::max)
}

/// Entrywise error of an identified model against [`linear_network_matrices`].
pub fn linear_network_recovery_error(model: &LinearPlantModel) -> f64 {
    let [a, b1, b2, cp, dp, p0] = linear_network_matrices();
    let offset = DMatrix::from_column_slice(2, 1, &model.p_offset);
    [
        entrywise_rel_err(&model.a, &a),
        entrywise_rel_err(&model.b1, &b1),
        entrywise_rel_err(&model.b2, &b2),
        entrywise_rel_err(&model.cp, &cp),
        entrywise_rel_err(&model.dp, &dp),
        entrywise_rel_err(&offset, &p0),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn default_model() -> LinearPlantModel {
    identify_linear_model(
        &NonlinearNetwork::surrogate(),
        &ExcitationDesign::default(),
        3600.0,
    )
    .unwrap()
    .model
}

pub fn two_level_price(steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|j| {
            if (6..22).contains(&(j % 24)) {
                0.30
            } else {
                0.12
            }
        })
        .collect()
}

/// PV scenarios on a bell with multipliers spread around `peak`.
pub fn bell_scenarios(count: usize, start_slot: usize, peak: f64, seed: u64) -> ScenarioSet {
    let base = bell(96, 24, 80);
    let mut r = rng(seed);
    let scenarios = (0..count)
        .map(|k| {
            let p = peak * (1.0 + 0.3 * normal(&mut r)).max(0.0);
            Scenario {
                pv_power: base[start_slot..].iter().map(|y| p * y).collect(),
                seed: k as u64,
                multiplier_draw: p,
            }
        })
        .collect();
    ScenarioSet {
        scenarios,
        start_slot,
        mode: SamplingMode::Night,
    }
}

/// Full-day problem from midnight on the default grid.
pub fn default_problem(scenarios: usize, seed: u64) -> MpcProblem {
    MpcProblem {
        t: 0.0,
        h0: vec![1.8, 1.9],
        demand: (0..24)
            .map(|j| {
                40.0 + 30.0
                    * ((j as f64 - 4.0) / 24.0 * std::f64::consts::TAU)
                        .sin()
                        .abs()
            })
            .collect(),
        price: two_level_price(24),
        scenarios: bell_scenarios(scenarios, 0, 80.0, seed),
        terminal_target: vec![1.8, 1.9],
    }
}

pub fn default_config() -> MpcConfig {
    MpcConfig::default()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
