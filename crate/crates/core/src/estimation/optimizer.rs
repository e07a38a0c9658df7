//! Projected Levenberg–Marquardt.
//!
//! The problem supplies a residual model `(r, J)` whose Gauss–Newton step
//! targets the cost, the cost itself, and a projection onto the feasible set.
//! Steps are projected, checked by an optional feasibility predicate, and only
//! accepted when the true cost does not increase.

use nalgebra::{DMatrix, DVector};

/// Relative floor on the Marquardt scaling, so near-flat directions stay damped
/// instead of drifting on noise-level gradients.
const DIAG_FLOOR: f64 = 1e-2;

pub trait Problem {
    /// Cost being minimized.
    fn cost(&self, x: &[f64]) -> f64;
    /// Residuals `r` and `J = ∂r/∂x` at `x`; the step minimizes `‖r + Jδ‖²`.
    fn model(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>);
    fn project(&self, _x: &mut [f64]) {}
    /// Repair a projected trial point so it satisfies constraints that have no
    /// closed-form projection; `None` rejects the trial.
    fn restore(&self, _from: &[f64], x: Vec<f64>) -> Option<Vec<f64>> {
        Some(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub max_iterations: usize,
    /// Relative cost decrease below which the run stops.
    pub ftol: f64,
    /// Relative step size below which the run stops.
    pub xtol: f64,
    pub lambda0: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-12,
            xtol: 1e-12,
            lambda0: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.clone().lu().solve(b)
}

fn solve_free(jtj: &DMatrix<f64>, g: &DVector<f64>, diag: &[f64], lambda: f64, free: &[bool]) -> Option<DVector<f64>> {
    let idx: Vec<usize> = (0..free.len()).filter(|&k| free[k]).collect();
    let n = idx.len();
    if n == 0 {
        return None;
    }
    let mut a = DMatrix::from_fn(n, n, |i, j| jtj[(idx[i], idx[j])]);
    for k in 0..n {
        a[(k, k)] += lambda * diag[idx[k]];
    }
    let b = DVector::from_fn(n, |i, _| -g[idx[i]]);
    let d = solve(&a, &b)?;
    let mut full = DVector::zeros(free.len());
    for (k, &i) in idx.iter().enumerate() {
        full[i] = d[k];
    }
    Some(full)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn minimize<P: Problem>(problem: &P, x0: &[f64], s: Settings) -> Outcome {
    let mut x = x0.to_vec();
    problem.project(&mut x);
    let mut cost = problem.cost(&x);
    let mut lambda = s.lambda0;
    let mut iterations = 0;
    let mut converged = false;
    let n = x.len();
    while iterations < s.max_iterations {
        iterations += 1;
        let (r, j) = problem.model(&x);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() == 0.0 {
            converged = true;
            break;
        }
        let dmax = jtj.diagonal().amax().max(f64::MIN_POSITIVE);
        let diag: Vec<f64> = jtj.diagonal().iter().map(|d| d.max(DIAG_FLOOR * dmax)).collect();
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut accepted = None;
        while lambda < 1e16 {
            // Full step, then a step with the coordinates clipped by the projection held fixed.
            let mut free = vec![true; n];
            let mut best: Option<(f64, Vec<f64>)> = None;
            for _ in 0..3 {
                let Some(step) = solve_free(&jtj, &g, &diag, lambda, &free) else {
                    break;
                };
                let raw: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let mut trial = raw.clone();
                problem.project(&mut trial);
                let clipped: Vec<usize> = (0..n)
                    .filter(|&k| free[k] && (trial[k] - raw[k]).abs() > 1e-14 * (1.0 + raw[k].abs()))
                    .collect();
                if let Some(t) = problem.restore(&x, trial) {
                    let c = problem.cost(&t);
                    if c.is_finite() && best.as_ref().is_none_or(|b| c < b.0) {
                        best = Some((c, t));
                    }
                }
                if clipped.is_empty() {
                    break;
                }
                for k in clipped {
                    free[k] = false;
                }
            }
            match best {
                Some((c, t)) if c <= cost => {
                    accepted = Some((cost - c, distance(&t, &x)));
                    x = t;
                    cost = c;
                    lambda = (lambda / 3.0).max(1e-15);
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        match accepted {
            None => {
                converged = true;
                break;
            }
            Some((decrease, moved)) => {
                if decrease <= s.ftol * cost.abs() || moved <= s.xtol * (xnorm + s.xtol) {
                    converged = true;
                    break;
                }
            }
        }
    }
    Outcome {
        x,
        cost,
        iterations,
        converged,
    }
}
