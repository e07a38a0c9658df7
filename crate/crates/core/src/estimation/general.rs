//! Fully general baseline: five arbitrary trace-preserving PTMs plus free
//! fiducials (67 real parameters), fitted without positivity constraints,
//! and gauge optimization back to a reference gate set.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use super::optimizer::{self, Problem, Settings};
use super::{cost_ml, staged_fit, FitConfig, FitModel, FitResult, GeneralEstimate, ProbModel};
use crate::design::{general_pack, general_unpack, Circuit, Dataset, Design, Prepared};
use crate::error::{Error, Result};
use crate::linalg;

struct GeneralModel {
    circuits: Vec<Circuit>,
}

impl ProbModel for GeneralModel {
    fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        general_unpack(x).plus_probabilities(&self.circuits)
    }
}

/// Staged fit of the general model, started from `init` (usually the ideal set).
pub fn general_fit(design: &Design, data: &Dataset, cfg: &FitConfig, init: &Prepared) -> Result<FitResult> {
    let start = Instant::now();
    if cfg.model != FitModel::General {
        return Err(Error::InvalidConfig("general_fit needs model = general".into()));
    }
    let (x, stages, last) = staged_fit(design, data, cfg, general_pack(init), |circuits| GeneralModel { circuits })?;
    let est = general_unpack(&x);
    let probs = est.plus_probabilities(&design.circuits);
    Ok(FitResult {
        theta_hat: x,
        gateset: None,
        general: Some(GeneralEstimate::from(&est)),
        final_cost: last,
        neg_log_likelihood: cost_ml(&probs, &data.records),
        stages,
        constraint_residual: 0.0,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeResult {
    pub estimate: GeneralEstimate,
    /// Row-major gauge transform `T`; its first row is `(1, 0, 0, 0)`.
    pub transform: Vec<f64>,
    /// `Σ‖TĜT⁻¹ − G‖²_F + ‖Tρ̂ − ρ‖² + ‖M̂T⁻¹ − M‖²` at the optimum.
    pub cost: f64,
}

fn transform(x: &[f64]) -> Matrix4<f64> {
    let mut t = Matrix4::zeros();
    t[(0, 0)] = 1.0;
    for i in 1..4 {
        for j in 0..4 {
            t[(i, j)] = x[(i - 1) * 4 + j];
        }
    }
    t
}

/// Apply `G → TGT⁻¹`, `ρ → Tρ`, `M → T⁻ᵀM`.
pub fn apply_gauge(p: &Prepared, t: &Matrix4<f64>) -> Option<Prepared> {
    let inv = t.try_inverse()?;
    Some(Prepared::new(
        p.gates.map(|g| t * g * inv),
        t * p.rho,
        inv.transpose() * p.meas,
    ))
}

struct GaugeProblem<'a> {
    est: &'a Prepared,
    target: &'a Prepared,
}

impl GaugeProblem<'_> {
    const N_RESID: usize = 5 * 16 + 8;

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let Some(p) = apply_gauge(self.est, &transform(x)) else {
            return vec![1e150; Self::N_RESID];
        };
        let mut r = Vec::with_capacity(Self::N_RESID);
        for (g, h) in p.gates.iter().zip(&self.target.gates) {
            r.extend((g - h).iter());
        }
        r.extend((p.rho - self.target.rho).iter());
        r.extend((p.meas - self.target.meas).iter());
        r
    }
}

impl Problem for GaugeProblem<'_> {
    fn cost(&self, x: &[f64]) -> f64 {
        self.residuals(x).iter().map(|v| v * v).sum()
    }

    fn model(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let r = DVector::from_vec(self.residuals(x));
        let j = linalg::central_jacobian(|y| self.residuals(y), x, 1e-7);
        (r, j)
    }
}

/// Find the trace-preserving gauge transform that brings `est` closest to `target`.
pub fn gauge_optimize(est: &Prepared, target: &Prepared) -> GaugeResult {
    let problem = GaugeProblem { est, target };
    let mut x0 = vec![0.0; 12];
    for i in 0..3 {
        x0[i * 4 + i + 1] = 1.0;
    }
    let out = optimizer::minimize(
        &problem,
        &x0,
        Settings {
            max_iterations: 500,
            ftol: 1e-15,
            xtol: 1e-15,
            ..Settings::default()
        },
    );
    let t = transform(&out.x);
    let gauged = apply_gauge(est, &t).unwrap_or_else(|| est.clone());
    GaugeResult {
        estimate: GeneralEstimate::from(&gauged),
        transform: (0..16).map(|k| t[(k / 4, k % 4)]).collect(),
        cost: out.cost,
    }
}
