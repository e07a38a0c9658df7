//! The benchmark sweeps. Each returns rows in a fixed order plus fitted slopes.

use anyhow::{bail, Result};
use cgst_core::channels::gate_ptm;
use cgst_core::design::{candidate_circuits, depth_schedule, general_design_circuits, select_base_circuits, Prepared};
use cgst_core::rng::derive_seed;
use cgst_core::simulator::{exact_dataset, mc_gate_channel};
use cgst_core::{Design, GateId, ModelVariant};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, Variant};
use crate::experiment::{design_for, fit_and_score, generate_data, parametrized_design, run_point, Scored, Truth};
use crate::output::{fit_slope, series, series_names, Row, Slope};

/// Seed of point `point` in series `series`.
pub fn point_seed(master: u64, series: u64, point: u64) -> u64 {
    derive_seed(derive_seed(master, series), point)
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesSlope {
    pub series: String,
    /// Against the point variable.
    pub slope: Option<Slope>,
    /// Against total shots in the design.
    pub slope_vs_shots: Option<Slope>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub name: String,
    pub var: String,
    pub rows: Vec<Row>,
    pub slopes: Vec<SeriesSlope>,
    /// Depth beyond which points are left out of the slope fit.
    pub saturation_depth: Option<f64>,
    /// Circuit count at which each series drops most.
    pub drops: Vec<(String, usize)>,
    /// Full-rank circuit count of the general design, when relevant.
    pub general_rank_count: Option<usize>,
}

impl SweepOutput {
    fn new(name: &str, var: &str, rows: Vec<Row>) -> Self {
        Self {
            name: name.into(),
            var: var.into(),
            rows,
            slopes: Vec::new(),
            saturation_depth: None,
            drops: Vec::new(),
            general_rank_count: None,
        }
    }

    fn with_slopes(mut self, x_max: Option<f64>) -> Self {
        self.slopes = series_names(&self.rows)
            .into_iter()
            .map(|name| {
                let rs = series(&self.rows, &name);
                let vs_x: Vec<(f64, f64)> = rs.iter().map(|r| (r.x, r.mean)).collect();
                let vs_n: Vec<(f64, f64)> = rs
                    .iter()
                    .filter(|r| x_max.is_none_or(|m| r.x <= m))
                    .map(|r| (r.total_shots as f64, r.mean))
                    .collect();
                SeriesSlope {
                    series: name,
                    slope: fit_slope(&vs_x, x_max),
                    slope_vs_shots: fit_slope(&vs_n, None),
                }
            })
            .collect();
        self
    }

    pub fn slope(&self, series: &str) -> Option<Slope> {
        self.slopes.iter().find(|s| s.series == series).and_then(|s| s.slope)
    }

    pub fn slope_vs_shots(&self, series: &str) -> Option<Slope> {
        self.slopes.iter().find(|s| s.series == series).and_then(|s| s.slope_vs_shots)
    }
}

struct Job {
    series: String,
    series_idx: u64,
    point_idx: u64,
    x: f64,
    cfg: RunConfig,
    variant: Variant,
    design: Design,
}

fn run_jobs(cfg: &RunConfig, jobs: Vec<Job>) -> Result<Vec<Row>> {
    jobs.into_par_iter()
        .map(|j| {
            let truth = Truth::from_config(&j.cfg)?;
            let seed = point_seed(cfg.seed, j.series_idx, j.point_idx);
            let stats = run_point(&j.cfg, &truth, j.variant, &j.design, seed)?;
            Ok(Row::new(&j.series, j.x, j.design.total_shots(), &stats, seed))
        })
        .collect()
}

fn parametrized(variant: Variant) -> Result<ModelVariant> {
    variant
        .model()
        .ok_or_else(|| anyhow::anyhow!("this sweep needs a parametrized variant"))
}

/// Mean distance against shots per circuit, one series per maximum depth.
pub fn sweep_shots(cfg: &RunConfig, variant: Variant) -> Result<SweepOutput> {
    let truth = Truth::from_config(cfg)?;
    let mut jobs = Vec::new();
    for (si, &p_max) in cfg.sweep.p_max.iter().enumerate() {
        let schedule = depth_schedule(p_max)?;
        for (pi, &n) in cfg.sweep.shots.iter().enumerate() {
            jobs.push(Job {
                series: format!("p_max={p_max}"),
                series_idx: si as u64,
                point_idx: pi as u64,
                x: n as f64,
                cfg: cfg.clone(),
                variant,
                design: design_for(&truth, variant, &schedule, n)?,
            });
        }
    }
    Ok(SweepOutput::new("shots", "shots_per_circuit", run_jobs(cfg, jobs)?).with_slopes(None))
}

/// Mean distance as depths are added to the schedule at fixed shots per circuit.
pub fn sweep_depth(cfg: &RunConfig, variant: Variant) -> Result<SweepOutput> {
    let truth = Truth::from_config(cfg)?;
    let mut depths = cfg.sweep.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    if depths.first() != Some(&1) {
        bail!("the depth list must start at 1");
    }
    let mut jobs = Vec::new();
    for (pi, &p) in depths.iter().enumerate() {
        let schedule: Vec<u32> = depths.iter().copied().filter(|&d| d <= p).collect();
        jobs.push(Job {
            series: "depth".into(),
            series_idx: 0,
            point_idx: pi as u64,
            x: p as f64,
            cfg: cfg.clone(),
            variant,
            design: design_for(&truth, variant, &schedule, cfg.design.shots)?,
        });
    }
    let sat = truth.saturation_depth();
    let mut out = SweepOutput::new("depth", "p_max", run_jobs(cfg, jobs)?).with_slopes(Some(sat));
    out.saturation_depth = Some(sat);
    Ok(out)
}

/// Mean distance against the noise correlation time at fixed noise strength.
/// Every variant fits the same datasets, drawn on the design of the richest
/// parametrized variant in the list.
pub fn sweep_tauc(cfg: &RunConfig) -> Result<SweepOutput> {
    let schedule = depth_schedule(cfg.design.p_max)?;
    let shared = cfg
        .sweep
        .tau_c_variants
        .iter()
        .filter_map(|v| v.model())
        .max_by_key(|m| m.n_params())
        .ok_or_else(|| anyhow::anyhow!("the tau-c sweep needs a parametrized variant"))?;
    let mut jobs = Vec::new();
    for &variant in &cfg.sweep.tau_c_variants {
        for (pi, &tau) in cfg.sweep.tau_c.iter().enumerate() {
            let mut c = cfg.clone();
            c.noise.phase.tau_c = tau;
            let truth = Truth::from_config(&c)?;
            let design = match variant {
                Variant::General => design_for(&truth, variant, &schedule, cfg.design.shots)?,
                _ => parametrized_design(&truth, shared, &schedule, cfg.design.shots)?,
            };
            jobs.push(Job {
                series: variant.name().into(),
                series_idx: 0,
                point_idx: pi as u64,
                x: tau,
                design,
                cfg: c,
                variant,
            });
        }
    }
    Ok(SweepOutput::new("tauc", "tau_c", run_jobs(cfg, jobs)?).with_slopes(None))
}

/// Circuits of the circuit-count sweep in the order they are added.
pub fn circuit_order(truth: &Truth, variant: Variant) -> Result<(Vec<(cgst_core::Circuit, bool)>, Option<usize>)> {
    match variant.model() {
        Some(v) => Ok((select_base_circuits(&truth.ideal_for(v), v)?.sensitivity_order(), None)),
        None => {
            let (mut order, rank) = general_design_circuits(&truth.ideal_for(ModelVariant::Markovian), None)?;
            let n_rank = order.len();
            debug_assert_eq!(rank, n_rank);
            for c in candidate_circuits() {
                if !order.contains(&c) {
                    order.push(c);
                }
            }
            Ok((order.into_iter().map(|c| (c, true)).collect(), Some(n_rank)))
        }
    }
}

/// Count `k` with the largest ratio `d(k−1)/d(k)`.
pub fn drop_location(rows: &[&Row]) -> Option<usize> {
    rows.windows(2)
        .filter(|w| w[1].x == w[0].x + 1.0)
        .max_by(|a, b| (a[0].mean / a[1].mean).total_cmp(&(b[0].mean / b[1].mean)))
        .map(|w| w[1].x as usize)
}

/// Mean distance as circuits are added in sensitivity (or greedy-rank) order.
pub fn sweep_circuits(cfg: &RunConfig, variant: Variant) -> Result<SweepOutput> {
    let truth = Truth::from_config(cfg)?;
    let schedule = depth_schedule(cfg.design.p_max)?;
    let (order, rank_count) = circuit_order(&truth, variant)?;
    let counts: Vec<usize> = if cfg.sweep.circuits.is_empty() {
        (1..=order.len()).collect()
    } else {
        cfg.sweep.circuits.clone()
    };
    let mut jobs = Vec::new();
    for (pi, &k) in counts.iter().enumerate() {
        if k == 0 || k > order.len() {
            bail!("circuit count {k} outside 1..={}", order.len());
        }
        let base: Vec<_> = order[..k].iter().map(|p| p.0).collect();
        let amp: Vec<_> = order[..k].iter().map(|p| p.1).collect();
        jobs.push(Job {
            series: variant.name().into(),
            series_idx: 0,
            point_idx: pi as u64,
            x: k as f64,
            cfg: cfg.clone(),
            variant,
            design: Design::from_base(&base, &amp, &schedule, cfg.design.shots)?,
        });
    }
    let rows = run_jobs(cfg, jobs)?;
    let mut out = SweepOutput::new("circuits", "n_circuits", rows);
    let name = variant.name().to_string();
    if let Some(k) = drop_location(&series(&out.rows, &name)) {
        out.drops.push((name, k));
    }
    out.general_rank_count = rank_count;
    Ok(out)
}

/// Parametrized against gauge-optimized general fits at equal total shots.
pub fn compare_general(cfg: &RunConfig, variant: Variant) -> Result<SweepOutput> {
    let truth = Truth::from_config(cfg)?;
    let v = parametrized(variant).unwrap_or(ModelVariant::Markovian);
    let pv = Variant::ALL.into_iter().find(|x| x.model() == Some(v)).expect("variant");
    let schedule = depth_schedule(cfg.design.p_max)?;
    let mut jobs = Vec::new();
    for (pi, &n) in cfg.sweep.shots.iter().enumerate() {
        let pd = parametrized_design(&truth, v, &schedule, n)?;
        let total = pd.total_shots();
        let n_gen_circuits = design_for(&truth, Variant::General, &schedule, 1)?.circuits.len() as u64;
        let ng = (total / n_gen_circuits).max(1);
        let gd = design_for(&truth, Variant::General, &schedule, ng)?;
        jobs.push(Job {
            series: pv.name().into(),
            series_idx: 0,
            point_idx: pi as u64,
            x: total as f64,
            cfg: cfg.clone(),
            variant: pv,
            design: pd,
        });
        jobs.push(Job {
            series: "general".into(),
            series_idx: 1,
            point_idx: pi as u64,
            x: total as f64,
            cfg: cfg.clone(),
            variant: Variant::General,
            design: gd,
        });
    }
    Ok(SweepOutput::new("compare", "total_shots", run_jobs(cfg, jobs)?).with_slopes(None))
}

/// One fit at the configured design.
#[derive(Debug, Clone, Serialize)]
pub struct FitOutput {
    pub scored: Scored,
    pub row: Row,
    pub design: Design,
    pub data: cgst_core::Dataset,
    pub truth: cgst_core::GateSet,
}

pub fn run_fit(cfg: &RunConfig, variant: Variant) -> Result<FitOutput> {
    let truth = Truth::from_config(cfg)?;
    let schedule = depth_schedule(cfg.design.p_max)?;
    let design = design_for(&truth, variant, &schedule, cfg.design.shots)?;
    let seed = point_seed(cfg.seed, 0, 0);
    let data = generate_data(&truth, cfg.data, &design, seed)?;
    let scored = fit_and_score(cfg, &truth, variant, &design, &data)?;
    let stats = crate::experiment::PointStats::from_distances(vec![scored.distance]);
    let row = Row::new(variant.name(), cfg.design.p_max as f64, design.total_shots(), &stats, seed);
    Ok(FitOutput { scored, row, design, data, truth: truth.gateset })
}

/// Noise-free counts, for checks that need the estimator without shot noise.
pub fn exact_fit(cfg: &RunConfig, variant: Variant, shots: u64) -> Result<Scored> {
    let truth = Truth::from_config(cfg)?;
    let design = design_for(&truth, variant, &depth_schedule(cfg.design.p_max)?, shots)?;
    let data = exact_dataset(&Prepared::from_gateset(&truth.gateset)?, &design, shots);
    fit_and_score(cfg, &truth, variant, &design, &data)
}

/// Monte Carlo gate channels against the filtered-integral channels.
#[derive(Debug, Clone, Serialize)]
pub struct McEntry {
    pub gate: String,
    pub i: usize,
    pub j: usize,
    pub monte_carlo: f64,
    pub predicted: f64,
    pub stderr: f64,
    pub z: f64,
}

pub fn mc_validate(cfg: &RunConfig) -> Result<Vec<McEntry>> {
    let truth = Truth::from_config(cfg)?;
    let mut out = Vec::new();
    for g in GateId::ALL {
        let pulse = truth.pulses.pulse(g);
        let mc = mc_gate_channel(&truth.noise, &pulse, derive_seed(cfg.seed, g.index() as u64))?;
        let want = gate_ptm(truth.gateset.fp(g.duration()), &pulse)?;
        for i in 1..4 {
            for j in 1..4 {
                let (a, b, se) = (mc.ptm.0[(i, j)], want.0[(i, j)], mc.stderr[(i, j)]);
                out.push(McEntry {
                    gate: g.to_string(),
                    i,
                    j,
                    monte_carlo: a,
                    predicted: b,
                    stderr: se,
                    z: (a - b).abs() / se.max(f64::MIN_POSITIVE),
                });
            }
        }
    }
    Ok(out)
}

pub fn mc_csv(entries: &[McEntry], hash: &str) -> String {
    let mut s = String::from("gate,i,j,monte_carlo,predicted,stderr,z,config_hash\n");
    for e in entries {
        s.push_str(&format!(
            "{},{},{},{:e},{:e},{:e},{:e},{}\n",
            e.gate, e.i, e.j, e.monte_carlo, e.predicted, e.stderr, e.z, hash
        ));
    }
    s
}
