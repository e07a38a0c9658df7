//! Estimation: staged constrained maximum likelihood for the filtered-noise
//! model, the fully general 67-parameter baseline with gauge optimization,
//! linear-inversion tomography, and the benchmark distances.
//!
//! Costs are weighted by the shots per circuit. For circuit `b` with `N_b`
//! shots, observed frequency `f_b` and model probability `p_b`:
//!
//! ```text
//! C_LS = Σ_b N_b (f_b − p_b)² / (p_b (1 − p_b))
//! C_ML = −Σ_b N_b [f_b ln p_b + (1 − f_b) ln(1 − p_b)]
//! ```
//!
//! with `p_b` clipped to `[1e-12, 1 − 1e-12]`. Internally the likelihood is
//! minimized as a deviance (`C_ML` minus its value at `p = f`), which has the
//! same minimizer and goes to zero on exact data.

pub mod general;
pub mod linear;
pub mod optimizer;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channels::{self, fiducial_trace_distances, gate_trace_distance, general_channel_distance, Ptm};
use crate::design::{Counts, Dataset, Design, Prepared};
use crate::error::{Error, Result};
use crate::gateset::{self, FpField, GateId, GateSet, ModelVariant, ParamKind, Pulses};
use crate::linalg;

pub use general::{gauge_optimize, general_fit, GaugeResult};
pub use optimizer::Settings;

pub const PROB_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    LeastSquares,
    Likelihood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Parametrized(ModelVariant),
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub model: FitModel,
    /// Stage depths; empty means the design's schedule.
    pub depth_schedule: Vec<u32>,
    /// First stage that uses `C_ML`; `None` means the second-to-last stage.
    pub cost_switch_depth: Option<u32>,
    pub max_iterations: usize,
    pub ftol: f64,
    pub xtol: f64,
    /// Resolve the `(r, e⃗) → (λr, e⃗/λ)` degeneracy toward the initial fiducials.
    pub fix_spam_scale: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            model: FitModel::Parametrized(ModelVariant::Markovian),
            depth_schedule: Vec::new(),
            cost_switch_depth: None,
            max_iterations: 200,
            ftol: 1e-12,
            xtol: 1e-12,
            fix_spam_scale: true,
        }
    }
}

impl FitConfig {
    pub fn parametrized(variant: ModelVariant) -> Self {
        Self {
            model: FitModel::Parametrized(variant),
            ..Self::default()
        }
    }

    pub fn general() -> Self {
        Self {
            model: FitModel::General,
            ..Self::default()
        }
    }

    fn settings(&self) -> Settings {
        Settings {
            max_iterations: self.max_iterations,
            ftol: self.ftol,
            xtol: self.xtol,
            ..Settings::default()
        }
    }

    /// Stage depths and the switch depth, validated against the design.
    pub fn stages(&self, design: &Design) -> Result<(Vec<u32>, u32)> {
        let schedule = if self.depth_schedule.is_empty() {
            design.depth_schedule.clone()
        } else {
            self.depth_schedule.clone()
        };
        if schedule.is_empty() {
            return Err(Error::InvalidConfig("empty depth schedule".into()));
        }
        let switch = match self.cost_switch_depth {
            Some(s) => {
                if !schedule.contains(&s) {
                    return Err(Error::InvalidConfig(format!(
                        "cost_switch_depth {s} is not in the depth schedule"
                    )));
                }
                s
            }
            None => schedule[schedule.len().saturating_sub(2)],
        };
        Ok((schedule, switch))
    }
}

/// Cost of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub depth: u32,
    pub cost_kind: CostKind,
    pub n_circuits: usize,
    pub cost: f64,
    pub iterations: usize,
}

/// General-model estimate: five PTMs plus fiducial coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralEstimate {
    /// Row-major 4×4 PTMs of G1..G5.
    pub gates: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    pub meas: Vec<f64>,
}

impl From<&Prepared> for GeneralEstimate {
    fn from(p: &Prepared) -> Self {
        GeneralEstimate {
            gates: p
                .gates
                .iter()
                .map(|g| (0..16).map(|k| g[(k / 4, k % 4)]).collect())
                .collect(),
            rho: p.rho.iter().cloned().collect(),
            meas: p.meas.iter().cloned().collect(),
        }
    }
}

impl GeneralEstimate {
    pub fn prepared(&self) -> Prepared {
        let gates = [0, 1, 2, 3, 4].map(|i| nalgebra::Matrix4::from_fn(|r, c| self.gates[i][r * 4 + c]));
        Prepared::new(
            gates,
            nalgebra::Vector4::from_iterator(self.rho.iter().cloned()),
            nalgebra::Vector4::from_iterator(self.meas.iter().cloned()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub gateset: Option<GateSet>,
    pub general: Option<GeneralEstimate>,
    /// Final cost of the last stage (deviance for likelihood stages).
    pub final_cost: f64,
    /// `C_ML` over all circuits at the estimate.
    pub neg_log_likelihood: f64,
    pub stages: Vec<StageRecord>,
    pub constraint_residual: f64,
    pub wall_time_s: f64,
}

impl FitResult {
    pub fn prepared(&self) -> Result<Prepared> {
        match (&self.gateset, &self.general) {
            (Some(gs), _) => Prepared::from_gateset(gs),
            (None, Some(g)) => Ok(g.prepared()),
            _ => Err(Error::OptimizationFailure("empty fit result".into())),
        }
    }
}

#[inline]
fn clip(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

#[inline]
fn xlogy_ratio(f: f64, p: f64) -> f64 {
    if f <= 0.0 {
        0.0
    } else {
        f * (f / p).ln()
    }
}

/// Shot-weighted least-squares cost.
pub fn cost_ls(probs: &[f64], counts: &[Counts]) -> f64 {
    probs
        .iter()
        .zip(counts)
        .map(|(&p, c)| {
            let p = clip(p);
            let f = c.frequency();
            c.shots as f64 * (f - p).powi(2) / (p * (1.0 - p))
        })
        .sum()
}

/// Shot-weighted negative log-likelihood.
pub fn cost_ml(probs: &[f64], counts: &[Counts]) -> f64 {
    probs
        .iter()
        .zip(counts)
        .map(|(&p, c)| {
            let p = clip(p);
            let f = c.frequency();
            -(c.shots as f64) * (f * p.ln() + (1.0 - f) * (1.0 - p).ln())
        })
        .sum()
}

/// `C_ML` minus its minimum over unconstrained probabilities.
pub fn deviance(probs: &[f64], counts: &[Counts]) -> f64 {
    probs
        .iter()
        .zip(counts)
        .map(|(&p, c)| {
            let p = clip(p);
            let f = c.frequency();
            c.shots as f64 * (xlogy_ratio(f, p) + xlogy_ratio(1.0 - f, 1.0 - p))
        })
        .sum()
}

/// Probability model shared by the parametrized and general fits.
pub(crate) trait ProbModel: Sync {
    fn probabilities(&self, x: &[f64]) -> Vec<f64>;
    fn project(&self, _x: &mut [f64]) {}
    fn restore(&self, _from: &[f64], x: Vec<f64>) -> Option<Vec<f64>> {
        Some(x)
    }
    fn fd_step(&self) -> f64 {
        1e-7
    }
}

pub(crate) struct StageProblem<'a, M: ProbModel> {
    pub model: &'a M,
    pub counts: Vec<Counts>,
    pub kind: CostKind,
}

impl<M: ProbModel> optimizer::Problem for StageProblem<'_, M> {
    fn cost(&self, x: &[f64]) -> f64 {
        let p = self.model.probabilities(x);
        match self.kind {
            CostKind::LeastSquares => cost_ls(&p, &self.counts),
            CostKind::Likelihood => deviance(&p, &self.counts),
        }
    }

    fn model(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let counts = &self.counts;
        match self.kind {
            CostKind::LeastSquares => {
                let resid = |x: &[f64]| -> Vec<f64> {
                    self.model
                        .probabilities(x)
                        .iter()
                        .zip(counts)
                        .map(|(&p, c)| {
                            let p = clip(p);
                            (c.shots as f64 / (p * (1.0 - p))).sqrt() * (p - c.frequency())
                        })
                        .collect()
                };
                let r = DVector::from_vec(resid(x));
                let j = linalg::central_jacobian(resid, x, self.model.fd_step());
                (r, j)
            }
            CostKind::Likelihood => {
                // Fisher scoring: Pearson residuals with weights frozen at x.
                let p = self.model.probabilities(x);
                let dp = linalg::central_jacobian(|y| self.model.probabilities(y), x, self.model.fd_step());
                let w: Vec<f64> = p
                    .iter()
                    .zip(counts)
                    .map(|(&p, c)| {
                        let p = clip(p);
                        (c.shots as f64 / (p * (1.0 - p))).sqrt()
                    })
                    .collect();
                let r = DVector::from_fn(p.len(), |i, _| w[i] * (clip(p[i]) - counts[i].frequency()));
                let mut j = dp;
                for i in 0..j.nrows() {
                    for k in 0..j.ncols() {
                        j[(i, k)] *= w[i];
                    }
                }
                (r, j)
            }
        }
    }

    fn project(&self, x: &mut [f64]) {
        self.model.project(x)
    }

    fn restore(&self, from: &[f64], x: Vec<f64>) -> Option<Vec<f64>> {
        self.model.restore(from, x)
    }
}

/// Run the depth-staged fit and return the final point with stage records.
pub(crate) fn staged_fit<M, F>(
    design: &Design,
    data: &Dataset,
    cfg: &FitConfig,
    x0: Vec<f64>,
    make_model: F,
) -> Result<(Vec<f64>, Vec<StageRecord>, f64)>
where
    M: ProbModel,
    F: Fn(Vec<crate::design::Circuit>) -> M,
{
    data.validate(design)?;
    let (schedule, switch) = cfg.stages(design)?;
    let mut x = x0;
    let mut stages = Vec::new();
    let mut last_cost = f64::NAN;
    for &depth in &schedule {
        let kind = if depth < switch {
            CostKind::LeastSquares
        } else {
            CostKind::Likelihood
        };
        let Some((out, rec)) = fit_stage(design, data, cfg, depth, kind, &x, &make_model)? else {
            continue;
        };
        x = out;
        last_cost = rec.cost;
        stages.push(rec);
    }
    if stages.is_empty() {
        return Err(Error::OptimizationFailure("no circuits in any stage".into()));
    }
    Ok((x, stages, last_cost))
}

/// One stage on the circuits with `reps ≤ depth`; `None` if there are none.
fn fit_stage<M, F>(
    design: &Design,
    data: &Dataset,
    cfg: &FitConfig,
    depth: u32,
    kind: CostKind,
    x0: &[f64],
    make_model: &F,
) -> Result<Option<(Vec<f64>, StageRecord)>>
where
    M: ProbModel,
    F: Fn(Vec<crate::design::Circuit>) -> M,
{
    let idx = design.indices_up_to(depth);
    if idx.is_empty() {
        return Ok(None);
    }
    let circuits: Vec<_> = idx.iter().map(|&i| design.circuits[i]).collect();
    let counts: Vec<Counts> = idx.iter().map(|&i| data.records[i]).collect();
    let model = make_model(circuits);
    let problem = StageProblem {
        model: &model,
        counts,
        kind,
    };
    let out = optimizer::minimize(&problem, x0, cfg.settings());
    if !out.cost.is_finite() {
        return Err(Error::OptimizationFailure(format!("non-finite cost at depth {depth}")));
    }
    Ok(Some((
        out.x,
        StageRecord {
            depth,
            cost_kind: kind,
            n_circuits: idx.len(),
            cost: out.cost,
            iterations: out.iterations,
        },
    )))
}

struct ParamModel {
    variant: ModelVariant,
    pulses: Pulses,
    circuits: Vec<crate::design::Circuit>,
    check_cp: bool,
}

const CP_TOL: f64 = 1e-8;

impl ParamModel {
    fn gateset(&self, x: &[f64]) -> GateSet {
        GateSet::unpack(x, self.variant, self.pulses).expect("length matches")
    }

    fn cp_ok(&self, x: &[f64]) -> bool {
        let gs = self.gateset(x);
        [gs.fp_pi, gs.fp_half].iter().all(|fp| {
            let (a, b) = gateset::cp_margins(fp);
            a.min(b) >= -2.0 * CP_TOL
        })
    }

    fn nm_indices(&self) -> Vec<usize> {
        (0..self.variant.n_params())
            .filter(|&k| {
                matches!(
                    self.variant.param_kind(k),
                    ParamKind::Filtered(_, FpField::Gamma2 | FpField::Delta2)
                )
            })
            .collect()
    }
}

impl ProbModel for ParamModel {
    fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        Prepared::from_gateset_unchecked(&self.gateset(x)).plus_probabilities(&self.circuits)
    }

    fn project(&self, x: &mut [f64]) {
        let mut gs = self.gateset(x);
        gateset::project(&mut gs);
        x.copy_from_slice(&gs.pack());
    }

    /// Safety net behind the projection: pull the non-Markovian parameters back
    /// toward the accepted point, then toward zero, until every gate χ is
    /// positive semidefinite.
    fn restore(&self, from: &[f64], x: Vec<f64>) -> Option<Vec<f64>> {
        if !self.check_cp || self.cp_ok(&x) {
            return Some(x);
        }
        let idx = self.nm_indices();
        let blend = |anchor: &[f64], t: f64| {
            let mut y = x.clone();
            for &k in &idx {
                y[k] = anchor[k] + t * (x[k] - anchor[k]);
            }
            y
        };
        let zero = vec![0.0; x.len()];
        for anchor in [from, zero.as_slice()] {
            if !self.cp_ok(&blend(anchor, 0.0)) {
                continue;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if self.cp_ok(&blend(anchor, mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(blend(anchor, lo));
        }
        None
    }
}

/// Staged constrained MLE for the filtered-noise model.
pub fn mle_fit(design: &Design, data: &Dataset, cfg: &FitConfig, init: &GateSet) -> Result<FitResult> {
    let start = Instant::now();
    let variant = match cfg.model {
        FitModel::Parametrized(v) => v,
        FitModel::General => {
            return Err(Error::InvalidConfig("mle_fit needs a parametrized model".into()))
        }
    };
    let init = init.with_variant(variant);
    let report = gateset::validate_constraints(&init);
    if !report.is_feasible(CP_TOL) {
        return Err(Error::OptimizationFailure(format!(
            "infeasible initial gate set (violation {:e})",
            report.max_violation()
        )));
    }
    let pulses = init.pulses();
    let run = |variant: ModelVariant, start: &GateSet| {
        staged_fit(design, data, cfg, start.pack(), |circuits| ParamModel {
            variant,
            pulses,
            circuits,
            check_cp: !variant.is_markovian(),
        })
    };
    let (x, stages, last) = if variant.is_markovian() {
        run(variant, &init)?
    } else {
        // Started at the ideal point, the CP-constrained fit can stall on the
        // CP boundary far from the optimum. Fit the Markovian part first.
        let markov = if variant.has_amplitude() {
            ModelVariant::MarkovianAmplitude
        } else {
            ModelVariant::Markovian
        };
        let (xm, mut stages, _) = run(markov, &init.with_variant(markov))?;
        let warm = GateSet::unpack(&xm, markov, pulses)?.with_variant(variant);
        let (x, more, last) = run(variant, &warm)?;
        stages.extend(more);
        (x, stages, last)
    };
    let mut gs = GateSet::unpack(&x, variant, pulses)?;
    if cfg.fix_spam_scale {
        gateset::fix_spam_scale(&mut gs, &init);
    }
    let probs = Prepared::from_gateset_unchecked(&gs).plus_probabilities(&design.circuits);
    let residual = gateset::validate_constraints(&gs).max_violation();
    Ok(FitResult {
        theta_hat: gs.pack(),
        gateset: Some(gs),
        general: None,
        final_cost: last,
        neg_log_likelihood: cost_ml(&probs, &data.records),
        stages,
        constraint_residual: residual,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn spam_distances(a: &Prepared, b: &Prepared) -> (f64, f64) {
    let s = std::f64::consts::SQRT_2;
    let ra = [a.rho[1] * s, a.rho[2] * s, a.rho[3] * s];
    let rb = [b.rho[1] * s, b.rho[2] * s, b.rho[3] * s];
    let ea = [a.meas[0] * s, a.meas[1] * s, a.meas[2] * s, a.meas[3] * s];
    let eb = [b.meas[0] * s, b.meas[1] * s, b.meas[2] * s, b.meas[3] * s];
    fiducial_trace_distances(&ra, &rb, &ea, &eb)
}

/// Mean Choi-state trace distance over the five gates, plus the fiducial
/// distances when `include_spam` is set.
pub fn prepared_distance(est: &Prepared, truth: &Prepared, include_spam: bool) -> f64 {
    let mut terms: Vec<f64> = (0..5)
        .map(|i| general_channel_distance(&Ptm(est.gates[i]), &Ptm(truth.gates[i])))
        .collect();
    if include_spam {
        let (tr, tm) = spam_distances(est, truth);
        terms.push(tr);
        terms.push(tm);
    }
    terms.iter().sum::<f64>() / terms.len() as f64
}

fn fully_markovian(gs: &GateSet) -> bool {
    [gs.fp_pi, gs.fp_half]
        .iter()
        .all(|fp| fp.is_markovian() && fp.delta_gamma1 == 0.0)
}

/// Average trace distance between two parametrized gate sets: the closed form
/// for Markovian pairs, the Choi-state distance otherwise.
pub fn benchmark_distance(est: &GateSet, truth: &GateSet, include_spam: bool) -> Result<f64> {
    let mut terms = Vec::with_capacity(7);
    if fully_markovian(est) && fully_markovian(truth) {
        for g in GateId::ALL {
            terms.push(gate_trace_distance(est.fp(g.duration()), truth.fp(g.duration())));
        }
    } else {
        let a = est.gate_ptms()?;
        let b = truth.gate_ptms()?;
        for i in 0..5 {
            terms.push(channels::general_channel_distance(&a[i], &b[i]));
        }
    }
    if include_spam {
        let (tr, tm) = fiducial_trace_distances(&est.r, &truth.r, &est.e, &truth.e);
        terms.push(tr);
        terms.push(tm);
    }
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}
