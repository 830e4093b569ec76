//! Box-constrained smooth minimization.
//!
//! Projected limited-memory BFGS:
//!
//! 1. Variables sitting on a bound whose gradient points outward are held
//!    fixed for the iteration; the two-loop recursion runs on the rest.
//! 2. If the quasi-Newton direction is not a descent direction the memory is
//!    dropped and the projected steepest-descent direction is used.
//! 3. The step follows the projected path `P(x + αd)` with Armijo
//!    backtracking (`c1 = 1e-4`, factor 0.5).
//! 4. Curvature pairs with `sᵀy ≤ 1e-12·sᵀs` are skipped.
//!
//! Convergence is declared when `‖P(x − ∇f) − x‖∞ ≤ tol`.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::OptimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 1000,
            memory: 10,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    LineSearchFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub f: f64,
    pub gnorm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub pg_norm: f64,
    pub status: SolveStatus,
    pub trace: Vec<TraceRow>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Writes the iteration trace as `iter,f,gnorm,step`.
    pub fn write_trace<W: Write>(&self, out: W) -> Result<(), crate::IoError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "f", "gnorm", "step"])?;
        for r in &self.trace {
            w.write_record([
                r.iter.to_string(),
                r.f.to_string(),
                r.gnorm.to_string(),
                r.step.to_string(),
            ])?;
        }
        w.flush().map_err(crate::IoError::from)?;
        Ok(())
    }
}

/// A bounded problem: `objective(x, grad)` returns `f(x)` and writes `∇f(x)`.
pub struct NlpProblem<F> {
    lower: Vec<f64>,
    upper: Vec<f64>,
    x0: Vec<f64>,
    objective: F,
}

impl<F> NlpProblem<F>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        x0: Vec<f64>,
        objective: F,
    ) -> Result<Self, OptimError> {
        if lower.len() != upper.len() || lower.len() != x0.len() {
            return Err(OptimError::Dimension(format!(
                "lower {}, upper {}, x0 {}",
                lower.len(),
                upper.len(),
                x0.len()
            )));
        }
        for (index, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(OptimError::InvalidBounds {
                    index,
                    lower: l,
                    upper: u,
                });
            }
        }
        let mut x0 = x0;
        project(&mut x0, &lower, &upper);
        Ok(Self {
            lower,
            upper,
            x0,
            objective,
        })
    }

    pub fn dimension(&self) -> usize {
        self.x0.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn initial_point(&self) -> &[f64] {
        &self.x0
    }

    pub fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.objective)(x, grad)
    }
}

pub fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, &l), &u) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(l, u);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&l, &u))| ((xi - gi).clamp(l, u) - xi).abs())
        .fold(0.0, f64::max)
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
}

impl Memory {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy <= 1e-12 * dot(&s, &s) || !sy.is_finite() {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion: returns `H q`.
    fn apply(&self, q: &mut [f64]) {
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
    }
}

/// Minimizes a smooth function over a box.
///
/// Never fails: non-convergence is reported through [`SolveReport::status`].
/// Every iterate, including the returned point, lies inside the box.
pub fn minimize<F>(problem: &mut NlpProblem<F>, opts: &SolverOptions) -> SolveReport
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = problem.dimension();
    let lower = problem.lower.clone();
    let upper = problem.upper.clone();
    let mut x = problem.x0.clone();
    let mut g = vec![0.0; n];
    let mut f = problem.evaluate(&x, &mut g);
    let mut evaluations = 1;
    let mut memory = Memory {
        pairs: VecDeque::with_capacity(opts.memory),
        capacity: opts.memory.max(1),
    };
    let mut trace = Vec::new();
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut d = vec![0.0; n];

    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let mut pg = projected_gradient_norm(&x, &g, &lower, &upper);

    while iterations < opts.max_iter {
        if !f.is_finite() {
            status = SolveStatus::LineSearchFailure;
            break;
        }
        if pg <= opts.tol {
            status = SolveStatus::Converged;
            break;
        }
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)))
            .collect();

        let mut accepted = None;
        for attempt in 0..2 {
            let steepest = attempt == 1 || memory.pairs.is_empty();
            for i in 0..n {
                d[i] = if free[i] { g[i] } else { 0.0 };
            }
            if !steepest {
                memory.apply(&mut d);
                for i in 0..n {
                    if !free[i] {
                        d[i] = 0.0;
                    }
                }
            }
            for di in d.iter_mut() {
                *di = -*di;
            }
            if !steepest && dot(&g, &d) >= 0.0 {
                memory.pairs.clear();
                continue;
            }
            let mut alpha = if steepest {
                let gmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if gmax > 0.0 {
                    (1.0 / gmax).min(1e6)
                } else {
                    1.0
                }
            } else {
                1.0
            };
            for _ in 0..opts.max_backtracks {
                for i in 0..n {
                    x_new[i] = (x[i] + alpha * d[i]).clamp(lower[i], upper[i]);
                }
                let decrease: f64 = (0..n).map(|i| g[i] * (x_new[i] - x[i])).sum();
                if decrease >= 0.0 {
                    alpha *= opts.backtrack;
                    continue;
                }
                let f_new = problem.evaluate(&x_new, &mut g_new);
                evaluations += 1;
                if f_new.is_finite() && f_new <= f + opts.armijo * decrease {
                    accepted = Some((f_new, alpha));
                    break;
                }
                alpha *= opts.backtrack;
            }
            if accepted.is_some() {
                break;
            }
            memory.pairs.clear();
            if steepest {
                break;
            }
        }

        let Some((f_new, alpha)) = accepted else {
            status = SolveStatus::LineSearchFailure;
            break;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        memory.push(s, y);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        iterations += 1;
        pg = projected_gradient_norm(&x, &g, &lower, &upper);
        if opts.record_trace {
            trace.push(TraceRow {
                iter: iterations,
                f,
                gnorm: pg,
                step: alpha,
            });
        }
    }
    if status == SolveStatus::MaxIter && pg <= opts.tol {
        status = SolveStatus::Converged;
    }

    SolveReport {
        x,
        f,
        iterations,
        evaluations,
        pg_norm: pg,
        status,
        trace,
    }
}

/// Largest relative discrepancy between the analytic gradient and central
/// differences at `point`.
///
/// Relative error per coordinate is `|a − fd| / max(|a|, |fd|, floor)` with
/// `floor = 1e-6 · max(1, ‖a‖∞)`.
pub fn check_gradient<F>(objective: &mut F, point: &[f64], step: f64) -> Result<f64, OptimError>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(OptimError::InvalidStep(step));
    }
    let n = point.len();
    let mut analytic = vec![0.0; n];
    objective(point, &mut analytic);
    let floor = 1e-6 * analytic.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut scratch = vec![0.0; n];
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..n {
        x[i] = point[i] + step;
        let fp = objective(&x, &mut scratch);
        x[i] = point[i] - step;
        let fm = objective(&x, &mut scratch);
        x[i] = point[i];
        let fd = (fp - fm) / (2.0 * step);
        let a = analytic[i];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
        worst = worst.max(rel);
    }
    Ok(worst)
}
