//! Truth construction, data generation and repeated fits at one sweep point.

use anyhow::{Context, Result};
use cgst_core::design::{general_design, select_base_circuits, Prepared};
use cgst_core::estimation::{gauge_optimize, general_fit, mle_fit, prepared_distance, benchmark_distance};
use cgst_core::filters::filtered_params_freq;
use cgst_core::gateset::{fix_spam_scale, validate_constraints, GateSet, Pulses};
use cgst_core::linalg::percentile;
use cgst_core::rng::derive_seed;
use cgst_core::simulator::{analytic_dataset, mc_dataset, McMode};
use cgst_core::{Dataset, Design, FitResult, ModelVariant, NoiseConfig, PsdModel, QuadConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DataSource, RunConfig, SpamSection, TruthModel, Variant};

/// Everything a fit is scored against.
#[derive(Debug, Clone)]
pub struct Truth {
    pub noise: NoiseConfig,
    pub pulses: Pulses,
    /// Filtered-integral gate set with the configured fiducials.
    pub gateset: GateSet,
    pub ideal: GateSet,
}

impl Truth {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let noise = cfg.noise_config()?;
        let pulses = cfg.pulses()?;
        let phase = PsdModel::lorentzian(noise.phase);
        let amp = noise.amplitude.map(PsdModel::lorentzian);
        let quad = QuadConfig::default();
        let mut gateset = GateSet::ideal(pulses, ModelVariant::NonMarkovianAmplitude)?;
        gateset.fp_pi = filtered_params_freq(&phase, amp.as_ref(), &pulses.pulse(cgst_core::GateId::G1), &quad)
            .context("filtered integrals of the pi pulse")?;
        gateset.fp_half = filtered_params_freq(&phase, amp.as_ref(), &pulses.pulse(cgst_core::GateId::G2), &quad)
            .context("filtered integrals of the half pulse")?;
        if cfg.noise.truth == TruthModel::Markovian {
            for fp in [&mut gateset.fp_pi, &mut gateset.fp_half] {
                fp.gamma2 = 0.0;
                fp.delta2 = 0.0;
            }
        }
        let ideal = GateSet::ideal(pulses, ModelVariant::NonMarkovianAmplitude)?;
        if let Some(r) = cfg.spam.r {
            gateset.r = r;
        }
        if let Some(e) = cfg.spam.e {
            gateset.e = e;
        }
        if cfg.spam != SpamSection::default() {
            let report = validate_constraints(&gateset);
            if !report.is_feasible(0.0) {
                anyhow::bail!("true fiducials violate the constraints by {:e}", report.max_violation());
            }
            // the representative of the SPAM rescaling nearest the ideal fiducials
            fix_spam_scale(&mut gateset, &ideal);
        }
        Ok(Self { noise, pulses, gateset, ideal })
    }

    /// Depth past which the germ signal has decayed away.
    pub fn saturation_depth(&self) -> f64 {
        1.0 / self.gateset.fp_pi.gamma1.max(self.gateset.fp_half.gamma1)
    }

    pub fn ideal_for(&self, v: ModelVariant) -> GateSet {
        self.ideal.with_variant(v)
    }
}

/// Parametrized design for `variant` over the given depths.
pub fn parametrized_design(truth: &Truth, variant: ModelVariant, schedule: &[u32], shots: u64) -> Result<Design> {
    Ok(select_base_circuits(&truth.ideal_for(variant), variant)?.design(schedule, shots)?)
}

pub fn design_for(truth: &Truth, variant: Variant, schedule: &[u32], shots: u64) -> Result<Design> {
    match variant.model() {
        Some(v) => parametrized_design(truth, v, schedule, shots),
        None => Ok(general_design(&truth.ideal_for(ModelVariant::Markovian), None, schedule, shots)?),
    }
}

pub fn generate_data(truth: &Truth, source: DataSource, design: &Design, seed: u64) -> Result<Dataset> {
    Ok(match source {
        DataSource::Analytic => analytic_dataset(&truth.gateset, design, seed)?,
        DataSource::Mc => mc_dataset(&truth.noise, &truth.pulses, design, seed, McMode::TwoStage)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Scored {
    pub fit: FitResult,
    pub distance: f64,
    /// Gauge-fixing residual of a general fit.
    pub gauge_cost: Option<f64>,
}

/// Fit one dataset and score it against the truth.
pub fn fit_and_score(
    cfg: &RunConfig,
    truth: &Truth,
    variant: Variant,
    design: &Design,
    data: &Dataset,
) -> Result<Scored> {
    let fc = cfg.fit_config(variant);
    let spam = cfg.fit.include_spam;
    match variant.model() {
        Some(v) => {
            let fit = mle_fit(design, data, &fc, &truth.ideal_for(v))?;
            let est = fit.gateset.as_ref().expect("parametrized fit");
            let distance = benchmark_distance(est, &truth.gateset, spam)?;
            Ok(Scored { fit, distance, gauge_cost: None })
        }
        None => {
            let init = Prepared::from_gateset(&truth.ideal_for(ModelVariant::Markovian))?;
            let fit = general_fit(design, data, &fc, &init)?;
            let target = Prepared::from_gateset(&truth.gateset)?;
            let g = gauge_optimize(&fit.prepared()?, &target);
            let distance = prepared_distance(&g.estimate.prepared(), &target, spam);
            Ok(Scored { fit, distance, gauge_cost: Some(g.cost) })
        }
    }
}

/// Summary of the repeats at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStats {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub distances: Vec<f64>,
}

impl PointStats {
    pub fn from_distances(distances: Vec<f64>) -> Self {
        let n = distances.len();
        Self {
            mean: distances.iter().sum::<f64>() / n as f64,
            lo: percentile(&distances, 0.5),
            hi: percentile(&distances, 99.5),
            n,
            distances,
        }
    }
}

/// `repeats` independent datasets and fits; repeat `r` uses `derive_seed(seed, r)`.
pub fn run_point(
    cfg: &RunConfig,
    truth: &Truth,
    variant: Variant,
    design: &Design,
    seed: u64,
) -> Result<PointStats> {
    let distances = (0..cfg.repeats as u64)
        .into_par_iter()
        .map(|r| {
            let s = derive_seed(seed, r);
            let data = generate_data(truth, cfg.data, design, s)?;
            Ok(fit_and_score(cfg, truth, variant, design, &data)?.distance)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PointStats::from_distances(distances))
}
