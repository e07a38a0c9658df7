//! Synthetic data: exact channel probabilities with binomial shot noise, and
//! stochastic Monte Carlo of the driven qubit under OU detuning and Rabi-rate noise.
//!
//! Each Monte Carlo trajectory integrates the piecewise-constant Hamiltonian
//! `H = ((Ω+δΩ)/2)(cos φ σx − sin φ σy) + (δ/2)σz` over the pulse; unitaries are
//! carried as unit quaternions so one step costs a few dozen flops.

use nalgebra::{Matrix3, Matrix4, Vector4};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::Ptm;
use crate::design::{Counts, Dataset, Design, Prepared};
use crate::error::{Error, Result};
use crate::filters::PulseSpec;
use crate::gateset::{GateId, GateSet, Pulses};
use crate::noise::{OuParams, OuStepper, StartMode};
use crate::rng::{self, lane};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub phase: OuParams,
    #[serde(default)]
    pub amplitude: Option<OuParams>,
    /// Integration step; `None` uses `min(τc, 2π/Ω)/50`.
    #[serde(default)]
    pub mc_dt: Option<f64>,
    pub n_traj: usize,
}

impl NoiseConfig {
    fn shortest_scale(&self, omega_rabi: f64) -> f64 {
        let mut s = self.phase.tau_c.min(2.0 * std::f64::consts::PI / omega_rabi);
        if let Some(a) = &self.amplitude {
            s = s.min(a.tau_c);
        }
        s
    }

    pub fn dt(&self, omega_rabi: f64) -> f64 {
        self.mc_dt.unwrap_or_else(|| self.shortest_scale(omega_rabi) / 50.0)
    }

    pub fn validate(&self, omega_rabi: f64) -> Result<()> {
        self.phase.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if let Some(a) = &self.amplitude {
            a.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidConfig("n_traj must be >= 1".into()));
        }
        let dt = self.dt(omega_rabi);
        let limit = self.shortest_scale(omega_rabi) / 20.0;
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "mc_dt = {dt:e} must be in (0, {limit:e}]"
            )));
        }
        Ok(())
    }
}

/// Unit quaternion `(q0, q)` for `U = q0·𝟙 − i q·σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Quat([f64; 4]);

impl Quat {
    const ID: Quat = Quat([1.0, 0.0, 0.0, 0.0]);

    /// `self` applied after `first`.
    #[inline]
    fn after(&self, first: &Quat) -> Quat {
        let [a0, a1, a2, a3] = self.0;
        let [b0, b1, b2, b3] = first.0;
        Quat([
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + b0 * a1 + (a2 * b3 - a3 * b2),
            a0 * b2 + b0 * a2 + (a3 * b1 - a1 * b3),
            a0 * b3 + b0 * a3 + (a1 * b2 - a2 * b1),
        ])
    }

    /// `exp(−i dt h·σ)`.
    #[inline]
    fn step(h: [f64; 3], dt: f64) -> Quat {
        let n = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
        if n == 0.0 {
            return Quat::ID;
        }
        let (s, c) = (n * dt).sin_cos();
        let k = s / n;
        Quat([c, k * h[0], k * h[1], k * h[2]])
    }

    fn rotation(&self) -> Matrix3<f64> {
        let [q0, q1, q2, q3] = self.0;
        Matrix3::new(
            1.0 - 2.0 * (q2 * q2 + q3 * q3),
            2.0 * (q1 * q2 - q0 * q3),
            2.0 * (q1 * q3 + q0 * q2),
            2.0 * (q1 * q2 + q0 * q3),
            1.0 - 2.0 * (q1 * q1 + q3 * q3),
            2.0 * (q2 * q3 - q0 * q1),
            2.0 * (q1 * q3 - q0 * q2),
            2.0 * (q2 * q3 + q0 * q1),
            1.0 - 2.0 * (q1 * q1 + q2 * q2),
        )
    }
}

fn embed(r: &Matrix3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m[(0, 0)] = 1.0;
    m.fixed_view_mut::<3, 3>(1, 1).copy_from(r);
    m
}

struct PulseIntegrator {
    n_steps: usize,
    dt: f64,
    omega: f64,
    cos_phi: f64,
    sin_phi: f64,
    phase: Option<OuStepper>,
    amplitude: Option<OuStepper>,
}

impl PulseIntegrator {
    fn new(noise: &NoiseConfig, pulse: &PulseSpec) -> Result<Self> {
        pulse.validate()?;
        noise.validate(pulse.omega_rabi)?;
        let nominal = noise.dt(pulse.omega_rabi);
        let n_steps = ((pulse.duration / nominal).ceil() as usize).max(1);
        let dt = pulse.duration / n_steps as f64;
        let phase = if noise.phase.c > 0.0 {
            Some(OuStepper::new(&noise.phase, dt)?)
        } else {
            None
        };
        let amplitude = match &noise.amplitude {
            Some(a) if a.c > 0.0 => Some(OuStepper::new(a, dt)?),
            _ => None,
        };
        Ok(Self {
            n_steps,
            dt,
            omega: pulse.omega_rabi,
            cos_phi: pulse.phase.cos(),
            sin_phi: pulse.phase.sin(),
            phase,
            amplitude,
        })
    }

    /// One trajectory's propagator, drawing noise from the given streams.
    fn propagate<R: Rng>(&self, phase_rng: &mut R, amp_rng: &mut R) -> Quat {
        let mut d = self.phase.map_or(0.0, |s| s.start(phase_rng, StartMode::Stationary));
        let mut a = self.amplitude.map_or(0.0, |s| s.start(amp_rng, StartMode::Stationary));
        let mut q = Quat::ID;
        for _ in 0..self.n_steps {
            let d_next = self.phase.map_or(0.0, |s| s.step(d, phase_rng));
            let a_next = self.amplitude.map_or(0.0, |s| s.step(a, amp_rng));
            let detuning = 0.5 * (d + d_next);
            let rabi = self.omega + 0.5 * (a + a_next);
            let h = [
                0.5 * rabi * self.cos_phi,
                -0.5 * rabi * self.sin_phi,
                0.5 * detuning,
            ];
            q = Quat::step(h, self.dt).after(&q);
            d = d_next;
            a = a_next;
        }
        q
    }
}

/// Ensemble-mean PTM with per-entry standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McChannel {
    pub ptm: Ptm,
    pub stderr: Matrix4<f64>,
    pub n_traj: usize,
}

const CHUNK: usize = 512;

/// Average unitary channel over `noise.n_traj` trajectories. Trajectory `i`
/// draws from streams `(seed, lane, i)`, so the result does not depend on threading.
pub fn mc_gate_channel(noise: &NoiseConfig, pulse: &PulseSpec, seed: u64) -> Result<McChannel> {
    mc_gate_channel_indices(noise, pulse, seed, &(0..noise.n_traj as u64).collect::<Vec<_>>())
}

/// Same as [`mc_gate_channel`] over an explicit list of trajectory indices.
pub fn mc_gate_channel_indices(noise: &NoiseConfig, pulse: &PulseSpec, seed: u64, indices: &[u64]) -> Result<McChannel> {
    let integ = PulseIntegrator::new(noise, pulse)?;
    if indices.is_empty() {
        return Err(Error::InvalidConfig("no trajectories".into()));
    }
    // Moments about one trajectory's rotation, so near-deterministic channels
    // do not lose their variance to cancellation.
    let shift = {
        let mut pr = rng::stream(seed, lane::PHASE, indices[0]);
        let mut ar = rng::stream(seed, lane::AMPLITUDE, indices[0]);
        integ.propagate(&mut pr, &mut ar).rotation()
    };
    let partial: Vec<(Matrix3<f64>, Matrix3<f64>)> = indices
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = Matrix3::zeros();
            let mut s2 = Matrix3::zeros();
            for &i in chunk {
                let mut pr = rng::stream(seed, lane::PHASE, i);
                let mut ar = rng::stream(seed, lane::AMPLITUDE, i);
                let r = integ.propagate(&mut pr, &mut ar).rotation() - shift;
                s += r;
                s2 += r.component_mul(&r);
            }
            (s, s2)
        })
        .collect();
    let (mut s, mut s2) = (Matrix3::zeros(), Matrix3::zeros());
    for (a, b) in &partial {
        s += a;
        s2 += b;
    }
    let n = indices.len() as f64;
    let m = s / n;
    let mean = shift + m;
    let var = (s2 / n - m.component_mul(&m)).map(|v| v.max(0.0)) * (n / (n - 1.0).max(1.0));
    // rounding accumulated over the step products sets a floor on the resolution
    let floor = f64::EPSILON * integ.n_steps as f64;
    let se = var.map(|v| (v / n).sqrt().hypot(floor));
    let mut stderr = Matrix4::zeros();
    stderr.fixed_view_mut::<3, 3>(1, 1).copy_from(&se);
    Ok(McChannel {
        ptm: Ptm(embed(&mean)),
        stderr,
        n_traj: indices.len(),
    })
}

/// Binomial counts at the exact circuit probabilities; circuit `i` uses stream `(seed, SHOTS, i)`.
pub fn sample_counts(prep: &Prepared, design: &Design, seed: u64) -> Dataset {
    let records = design
        .circuits
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let p = prep.plus_probability(c).clamp(0.0, 1.0);
            let n = design.shots_per_circuit;
            let mut r = rng::stream(seed, lane::SHOTS, i as u64);
            let plus = Binomial::new(n, p).map(|b| b.sample(&mut r)).unwrap_or(0);
            Counts { shots: n, plus }
        })
        .collect();
    Dataset { records }
}

/// Counts that reproduce the circuit probabilities to `1/shots`, with no sampling noise.
pub fn exact_dataset(prep: &Prepared, design: &Design, shots: u64) -> Dataset {
    let records = design
        .circuits
        .iter()
        .map(|c| {
            let p = prep.plus_probability(c).clamp(0.0, 1.0);
            Counts {
                shots,
                plus: (p * shots as f64).round() as u64,
            }
        })
        .collect();
    Dataset { records }
}

pub fn analytic_dataset(gs_true: &GateSet, design: &Design, seed: u64) -> Result<Dataset> {
    Ok(sample_counts(&Prepared::from_gateset(gs_true)?, design, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    /// Average each gate's channel once, compose per circuit, then sample shots.
    #[default]
    TwoStage,
    /// Fresh noise for every gate of every shot.
    PerShot,
}

/// Monte Carlo channels of the five gates; gate `k` uses seed `derive_seed(seed, k)`.
pub fn mc_gate_channels(noise: &NoiseConfig, pulses: &Pulses, seed: u64) -> Result<[McChannel; 5]> {
    let mut out = Vec::with_capacity(5);
    for g in GateId::ALL {
        out.push(mc_gate_channel(noise, &pulses.pulse(g), rng::derive_seed(seed, g.index() as u64))?);
    }
    Ok(out.try_into().expect("five gates"))
}

/// Ideal fiducial state and measurement around Monte Carlo gate channels.
pub fn mc_prepared(channels: &[McChannel; 5]) -> Prepared {
    let ideal = GateSet {
        variant: crate::gateset::ModelVariant::Markovian,
        omega_rabi: 1.0,
        t_pi: std::f64::consts::PI,
        t_half: std::f64::consts::FRAC_PI_2,
        r: [0.0, 0.0, 1.0],
        e: [1.0, 0.0, 0.0, 1.0],
        fp_pi: Default::default(),
        fp_half: Default::default(),
    };
    Prepared::new(channels.map(|c| c.ptm.0), ideal.rho_vec(), ideal.meas_vec())
}

pub fn mc_dataset(noise: &NoiseConfig, pulses: &Pulses, design: &Design, seed: u64, mode: McMode) -> Result<Dataset> {
    match mode {
        McMode::TwoStage => {
            let ch = mc_gate_channels(noise, pulses, seed)?;
            Ok(sample_counts(&mc_prepared(&ch), design, seed))
        }
        McMode::PerShot => {
            let integs: Vec<PulseIntegrator> = GateId::ALL
                .iter()
                .map(|g| PulseIntegrator::new(noise, &pulses.pulse(*g)))
                .collect::<Result<_>>()?;
            let rho = Vector4::new(1.0, 0.0, 0.0, 1.0) * std::f64::consts::FRAC_1_SQRT_2;
            let meas = rho;
            let records = design
                .circuits
                .par_iter()
                .enumerate()
                .map(|(i, c)| {
                    let n = design.shots_per_circuit;
                    let mut plus = 0;
                    let mut coin = rng::stream(seed, lane::SHOTS, i as u64);
                    for s in 0..n {
                        let idx = ((i as u64) << 32) | s;
                        let mut pr = rng::stream(seed, lane::PHASE, idx);
                        let mut ar = rng::stream(seed, lane::AMPLITUDE, idx);
                        let mut v = rho;
                        for g in c.gates() {
                            let q = integs[g.index()].propagate(&mut pr, &mut ar);
                            v = embed(&q.rotation()) * v;
                        }
                        let p = meas.dot(&v).clamp(0.0, 1.0);
                        if coin.random::<f64>() < p {
                            plus += 1;
                        }
                    }
                    Counts { shots: n, plus }
                })
                .collect();
            Ok(Dataset { records })
        }
    }
}
