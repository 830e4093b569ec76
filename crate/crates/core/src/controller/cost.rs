use std::cmp::Ordering;

use crate::controller::MpcConfig;
use crate::plant::LinearPlantModel;
use crate::scenario::ScenarioSet;

/// Largest exponent evaluated exactly; beyond it barriers continue linearly.
pub const EXPONENT_CLAMP: f64 = 500.0;

/// `(1/β)·ln(1 + e^{βx})`, evaluated as `max(x, 0) + ln(1 + e^{−β|x|})/β`.
pub fn softplus(x: f64, beta: f64) -> f64 {
    x.max(0.0) + (-beta * x.abs()).exp().ln_1p() / beta
}

/// Derivative of [`softplus`] with respect to `x`.
pub fn softplus_slope(x: f64, beta: f64) -> f64 {
    let z = beta * x;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `e^z` for `z ≤ 500`, continued by its tangent above. Returns value,
/// slope and whether the clamp was hit.
fn clamped_exp(z: f64) -> (f64, f64, bool) {
    if z <= EXPONENT_CLAMP {
        let e = z.exp();
        (e, e, false)
    } else {
        let e = EXPONENT_CLAMP.exp();
        (e * (1.0 + (z - EXPONENT_CLAMP)), e, true)
    }
}

/// Sum of `e^{a(C(h)+b)}` over the lower constraints `C = h̃ − h` and the
/// upper constraints `C = h − h̄`. `a` and `b` list the lower constraints
/// first. Adds the gradient to `grad` when given; returns the cost and
/// whether any exponent saturated.
pub(crate) fn barrier_terms(
    h: &[f64],
    lower: &[f64],
    upper: &[f64],
    a: &[f64],
    b: &[f64],
    mut grad: Option<&mut [f64]>,
) -> (f64, bool) {
    let n = h.len();
    let mut total = 0.0;
    let mut saturated = false;
    for i in 0..n {
        let (lo, dlo, s1) = clamped_exp(a[i] * (lower[i] - h[i] + b[i]));
        let (hi, dhi, s2) = clamped_exp(a[n + i] * (h[i] - upper[i] + b[n + i]));
        total += lo + hi;
        saturated |= s1 | s2;
        if let Some(g) = grad.as_deref_mut() {
            g[i] += -a[i] * dlo + a[n + i] * dhi;
        }
    }
    (total, saturated)
}

/// Exponential barrier cost of the level vector `h`.
pub fn barrier_cost(h: &[f64], lower: &[f64], upper: &[f64], a: &[f64], b: &[f64]) -> f64 {
    barrier_terms(h, lower, upper, a, b, None).0
}

/// `w·max(0, ‖h − h*‖ − r)²`, adding its gradient to `grad` when given.
pub fn terminal_penalty(
    h: &[f64],
    target: &[f64],
    radius: f64,
    weight: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let dist = h
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let excess = dist - radius;
    if excess <= 0.0 {
        return 0.0;
    }
    if let Some(g) = grad {
        let scale = 2.0 * weight * excess / dist;
        for ((gi, hi), ti) in g.iter_mut().zip(h).zip(target) {
            *gi += scale * (hi - ti);
        }
    }
    weight * excess * excess
}

/// Cost of one control step: energy-weighted softplus grid cost over the PV
/// samples of the step plus the level barrier.
pub fn stage_cost(
    h: &[f64],
    u: &[f64],
    pv: &[f64],
    price: f64,
    model: &LinearPlantModel,
    config: &MpcConfig,
) -> f64 {
    let power = model.pump_power_kw(h, u);
    let beta = config.beta_per_kw();
    let hours = config.grid.pv_hours();
    let electricity: f64 = pv
        .iter()
        .map(|p| price * softplus(power - p, beta) * hours)
        .sum();
    electricity
        + barrier_cost(
            h,
            &config.h_min,
            &config.h_max,
            &config.barrier_a,
            &config.barrier_b,
        )
}

/// Distinct PV trajectories with their relative frequencies.
///
/// Identical trajectories are merged and the rest sorted, so averages over
/// the set do not depend on the order or multiplicity of the scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedScenarios {
    slots: usize,
    /// Slot-major: `pv[slot * count + k]`.
    pv: Vec<f64>,
    weights: Vec<f64>,
    /// Index of the merged trajectory for every original scenario.
    members: Vec<usize>,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl WeightedScenarios {
    /// Uses the first `slots` samples of every scenario.
    pub fn from_set(set: &ScenarioSet, slots: usize) -> Self {
        let total = set.scenarios.len();
        let traj = |k: usize| &set.scenarios[k].pv_power[..slots];
        let mut order: Vec<usize> = (0..total).collect();
        order.sort_by(|&x, &y| lexicographic(traj(x), traj(y)).then(x.cmp(&y)));
        let mut unique: Vec<usize> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        let mut members = vec![0; total];
        for &k in &order {
            match unique.last() {
                Some(&u) if lexicographic(traj(u), traj(k)).is_eq() => {
                    *counts.last_mut().expect("non-empty") += 1;
                }
                _ => {
                    unique.push(k);
                    counts.push(1);
                }
            }
            members[k] = unique.len() - 1;
        }
        let count = unique.len();
        let mut pv = vec![0.0; slots * count];
        for (j, &k) in unique.iter().enumerate() {
            for (i, v) in traj(k).iter().enumerate() {
                pv[i * count + j] = *v;
            }
        }
        let weights = counts.iter().map(|c| *c as f64 / total as f64).collect();
        Self {
            slots,
            pv,
            weights,
            members,
        }
    }

    pub fn distinct(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    fn slot(&self, i: usize) -> &[f64] {
        let c = self.distinct();
        &self.pv[i * c..(i + 1) * c]
    }
}

/// Scenario-averaged cost of an input sequence with the states eliminated
/// through the discrete model. Gradients come from a backward adjoint pass.
pub(crate) struct CostEvaluator<'a> {
    n: usize,
    m: usize,
    steps: usize,
    slots_per_step: usize,
    hours: f64,
    beta: f64,
    kappa: f64,
    ad: Vec<f64>,
    bd1: Vec<f64>,
    bd2: Vec<f64>,
    cp: Vec<f64>,
    dp: Vec<f64>,
    /// `p0 − p_in`.
    head0: Vec<f64>,
    config: &'a MpcConfig,
    demand: &'a [f64],
    price: &'a [f64],
    pv: WeightedScenarios,
}

fn row_major(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

/// Evaluation result with the diagnostic barrier flag.
pub(crate) struct Evaluation {
    pub value: f64,
    pub saturated: bool,
}

impl<'a> CostEvaluator<'a> {
    pub fn new(
        model: &LinearPlantModel,
        config: &'a MpcConfig,
        steps: usize,
        demand: &'a [f64],
        price: &'a [f64],
        pv: WeightedScenarios,
    ) -> Self {
        let (n, m) = (model.n_states(), model.n_inputs());
        Self {
            n,
            m,
            steps,
            slots_per_step: config.grid.slots_per_step(),
            hours: config.grid.pv_hours(),
            beta: config.beta_per_kw(),
            kappa: model.power_factor,
            ad: row_major(&model.ad),
            bd1: row_major(&model.bd1),
            bd2: model.bd2.iter().copied().collect(),
            cp: row_major(&model.cp),
            dp: row_major(&model.dp),
            head0: model
                .p_offset
                .iter()
                .zip(&model.p_in)
                .map(|(a, b)| a - b)
                .collect(),
            config,
            demand,
            price,
            pv,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn scenarios(&self) -> &WeightedScenarios {
        &self.pv
    }

    /// Flattened levels `h_0..h_N`.
    pub fn states(&self, h0: &[f64], u: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut h = vec![0.0; (self.steps + 1) * n];
        h[..n].copy_from_slice(h0);
        for j in 0..self.steps {
            let (cur, next) = h.split_at_mut((j + 1) * n);
            let cur = &cur[j * n..];
            let uj = &u[j * m..(j + 1) * m];
            for r in 0..n {
                let mut v = self.bd2[r] * self.demand[j];
                for c in 0..n {
                    v += self.ad[r * n + c] * cur[c];
                }
                for c in 0..m {
                    v += self.bd1[r * m + c] * uj[c];
                }
                next[r] = v;
            }
        }
        h
    }

    /// Pump power with its partial derivatives in `h` and `u`.
    fn power(&self, h: &[f64], u: &[f64], dh: &mut [f64], du: &mut [f64]) -> f64 {
        let (n, m) = (self.n, self.m);
        let mut p = 0.0;
        dh.fill(0.0);
        du.fill(0.0);
        for i in 0..m {
            let mut head = self.head0[i];
            for k in 0..n {
                head += self.cp[i * n + k] * h[k];
            }
            for l in 0..m {
                head += self.dp[i * m + l] * u[l];
            }
            p += u[i] * head;
            du[i] += self.kappa * head;
            for k in 0..n {
                dh[k] += self.kappa * u[i] * self.cp[i * n + k];
            }
            for l in 0..m {
                du[l] += self.kappa * u[i] * self.dp[i * m + l];
            }
        }
        self.kappa * p
    }

    /// Expected electricity cost of step `j` at pump power `p`, and its
    /// derivative in `p`.
    fn electricity(&self, j: usize, p: f64) -> (f64, f64) {
        let w = &self.pv.weights;
        let mut value = 0.0;
        let mut slope = 0.0;
        for i in j * self.slots_per_step..(j + 1) * self.slots_per_step {
            let mut v = 0.0;
            let mut s = 0.0;
            for (pv, wk) in self.pv.slot(i).iter().zip(w) {
                v += wk * softplus(p - pv, self.beta);
                s += wk * softplus_slope(p - pv, self.beta);
            }
            value += v;
            slope += s;
        }
        let scale = self.price[j] * self.hours;
        (scale * value, scale * slope)
    }

    fn barrier(&self, h: &[f64], grad: Option<&mut [f64]>) -> (f64, bool) {
        let c = self.config;
        barrier_terms(h, &c.h_min, &c.h_max, &c.barrier_a, &c.barrier_b, grad)
    }

    /// Cost of the input sequence `u` from `h0`. `terminal(h_N, grad)`
    /// returns the terminal term and adds its gradient. Writes the gradient
    /// in `u` to `grad_u` and, if requested, the gradient in `h0`.
    pub fn evaluate(
        &self,
        h0: &[f64],
        u: &[f64],
        terminal: &mut dyn FnMut(&[f64], &mut [f64]) -> f64,
        grad_u: &mut [f64],
        grad_h0: Option<&mut [f64]>,
    ) -> Evaluation {
        let (n, m, steps) = (self.n, self.m, self.steps);
        let h = self.states(h0, u);
        let mut dpdh = vec![0.0; steps * n];
        let mut dpdu = vec![0.0; steps * m];
        let powers: Vec<f64> = (0..steps)
            .map(|j| {
                self.power(
                    &h[j * n..(j + 1) * n],
                    &u[j * m..(j + 1) * m],
                    &mut dpdh[j * n..(j + 1) * n],
                    &mut dpdu[j * m..(j + 1) * m],
                )
            })
            .collect();
        let elec = self
            .config
            .exec
            .map_indexed(steps, |j| self.electricity(j, powers[j]));

        let mut lambda = vec![0.0; n];
        let mut value = terminal(&h[steps * n..], &mut lambda);
        let mut saturated = false;
        let mut next = vec![0.0; n];
        for j in (0..steps).rev() {
            let (e, de) = elec[j];
            let hj = &h[j * n..(j + 1) * n];
            let mut gh = vec![0.0; n];
            let (b, sat) = self.barrier(hj, Some(&mut gh));
            value += e + b;
            saturated |= sat;
            for l in 0..m {
                let mut g = de * dpdu[j * m + l];
                for r in 0..n {
                    g += self.bd1[r * m + l] * lambda[r];
                }
                grad_u[j * m + l] = g;
            }
            for k in 0..n {
                let mut g = gh[k] + de * dpdh[j * n + k];
                for r in 0..n {
                    g += self.ad[r * n + k] * lambda[r];
                }
                next[k] = g;
            }
            std::mem::swap(&mut lambda, &mut next);
        }
        if let Some(g0) = grad_h0 {
            g0.copy_from_slice(&lambda);
        }
        Evaluation { value, saturated }
    }

    /// Expected cost of each step (electricity plus barrier).
    pub fn stage_costs(&self, h0: &[f64], u: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let h = self.states(h0, u);
        let mut dh = vec![0.0; n];
        let mut du = vec![0.0; m];
        (0..self.steps)
            .map(|j| {
                let hj = &h[j * n..(j + 1) * n];
                let p = self.power(hj, &u[j * m..(j + 1) * m], &mut dh, &mut du);
                self.electricity(j, p).0 + self.barrier(hj, None).0
            })
            .collect()
    }

    /// Electricity cost of the input sequence under each distinct
    /// trajectory.
    pub fn distinct_electricity(&self, h0: &[f64], u: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let h = self.states(h0, u);
        let mut dh = vec![0.0; n];
        let mut du = vec![0.0; m];
        let mut totals = vec![0.0; self.pv.distinct()];
        for j in 0..self.steps {
            let p = self.power(
                &h[j * n..(j + 1) * n],
                &u[j * m..(j + 1) * m],
                &mut dh,
                &mut du,
            );
            let scale = self.price[j] * self.hours;
            for i in j * self.slots_per_step..(j + 1) * self.slots_per_step {
                for (t, pv) in totals.iter_mut().zip(self.pv.slot(i)) {
                    *t += scale * softplus(p - pv, self.beta);
                }
            }
        }
        totals
    }

    /// Barrier cost summed over `h_0..h_{N−1}`.
    pub fn total_barrier(&self, h0: &[f64], u: &[f64]) -> f64 {
        let n = self.n;
        let h = self.states(h0, u);
        (0..self.steps)
            .map(|j| self.barrier(&h[j * n..(j + 1) * n], None).0)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::SamplingMode;

    #[test]
    fn softplus_examples() {
        assert!((softplus(0.0, 0.02) - std::f64::consts::LN_2 / 0.02).abs() < 1e-12);
        assert!((softplus(1e6, 0.02) - 1e6).abs() / 1e6 < 1e-9);
        for x in [-1e3, -3.0, -1e-4, 0.0, 0.5, 40.0, 2e3] {
            assert!((softplus(x, 0.02) - softplus(-x, 0.02) - x).abs() < 1e-9);
            let fd = (softplus(x + 1e-6, 0.7) - softplus(x - 1e-6, 0.7)) / 2e-6;
            assert!((softplus_slope(x, 0.7) - fd).abs() < 1e-6);
        }
        assert!(softplus(-1e4, 0.02) >= 0.0);
    }

    #[test]
    fn barrier_examples() {
        let (lo, hi) = ([1.0], [3.0]);
        let (a, b) = ([80.0, 80.0], [0.3, 0.3]);
        // lower constraint exactly b inside the boundary, upper far away
        let at_margin = barrier_cost(&[1.3], &lo, &hi, &a, &b);
        assert!((at_margin - 1.0).abs() < 1e-12);
        let on_bound = barrier_cost(&[1.0], &lo, &hi, &a, &b);
        assert!((on_bound / 24f64.exp() - 1.0).abs() < 1e-12);
        assert!(barrier_cost(&[2.0], &lo, &hi, &a, &b) < 1e-20);
        let upper = barrier_cost(&[2.7], &lo, &hi, &a, &b);
        assert!((upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn barrier_saturation_is_finite_and_reported() {
        let mut g = [0.0];
        let (v, sat) = barrier_terms(
            &[-10.0],
            &[1.0],
            &[3.0],
            &[80.0, 80.0],
            &[0.3, 0.3],
            Some(&mut g),
        );
        assert!(sat && v.is_finite() && g[0] < 0.0 && g[0].is_finite());
    }

    #[test]
    fn terminal_penalty_ball() {
        assert_eq!(
            terminal_penalty(&[1.05, 2.0], &[1.0, 2.0], 0.1, 1e4, None),
            0.0
        );
        let mut g = [0.0, 0.0];
        let v = terminal_penalty(&[1.3, 2.0], &[1.0, 2.0], 0.1, 1e4, Some(&mut g));
        assert!((v - 1e4 * 0.04).abs() < 1e-9);
        assert!((g[0] - 2.0 * 1e4 * 0.2).abs() < 1e-9 && g[1] == 0.0);
    }

    #[test]
    fn dedup_is_order_and_multiplicity_invariant() {
        let mk = |v: Vec<Vec<f64>>| ScenarioSet {
            scenarios: v
                .into_iter()
                .map(|pv_power| crate::scenario::Scenario {
                    pv_power,
                    seed: 0,
                    multiplier_draw: 0.0,
                })
                .collect(),
            start_slot: 0,
            mode: SamplingMode::Night,
        };
        let a = WeightedScenarios::from_set(
            &mk(vec![vec![1.0, 2.0], vec![0.5, 3.0], vec![1.0, 2.0]]),
            2,
        );
        let b = WeightedScenarios::from_set(
            &mk(vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![0.5, 3.0]]),
            2,
        );
        assert_eq!(a.pv, b.pv);
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.distinct(), 2);
        assert_eq!(a.members(), &[1, 0, 1]);
        let doubled = WeightedScenarios::from_set(
            &mk(vec![
                vec![1.0, 2.0],
                vec![0.5, 3.0],
                vec![1.0, 2.0],
                vec![1.0, 2.0],
                vec![0.5, 3.0],
                vec![1.0, 2.0],
            ]),
            2,
        );
        assert_eq!(doubled.weights, a.weights);
    }
}
