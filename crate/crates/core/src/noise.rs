//! Coloured noise: Ornstein–Uhlenbeck processes and spectral densities.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ornstein–Uhlenbeck process with correlation time `tau_c` (s) and
/// diffusion constant `c` (s⁻³). Stationary variance is `c·tau_c/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub tau_c: f64,
    pub c: f64,
}

impl OuParams {
    pub fn new(tau_c: f64, c: f64) -> Result<Self> {
        let p = Self { tau_c, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_c > 0.0) || !self.tau_c.is_finite() {
            return Err(Error::InvalidParameter(format!("tau_c must be > 0, got {}", self.tau_c)));
        }
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!("c must be >= 0, got {}", self.c)));
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        0.5 * self.c * self.tau_c
    }

    /// The dimensionless product τc³c; the filtered-noise expansion assumes it is small.
    pub fn validity_product(&self) -> f64 {
        self.tau_c.powi(3) * self.c
    }

    pub fn covariance(&self, lag: f64) -> f64 {
        self.variance() * (-lag.abs() / self.tau_c).exp()
    }

    pub fn psd(&self, omega: f64) -> f64 {
        let x = omega * self.tau_c;
        self.c * self.tau_c * self.tau_c / (1.0 + x * x)
    }
}

/// `C(lag) = (c·τc/2)·exp(−|lag|/τc)`.
pub fn covariance(params: &OuParams, lag: f64) -> Result<f64> {
    params.validate()?;
    Ok(params.covariance(lag))
}

/// A stationary covariance function usable by the time-domain integrals.
pub trait Covariance: Sync {
    fn eval(&self, lag: f64) -> f64;
    /// Correlation time, used to place quadrature breakpoints.
    fn correlation_time(&self) -> Option<f64> {
        None
    }
}

impl Covariance for OuParams {
    fn eval(&self, lag: f64) -> f64 {
        self.covariance(lag)
    }
    fn correlation_time(&self) -> Option<f64> {
        Some(self.tau_c)
    }
}

impl<F: Fn(f64) -> f64 + Sync> Covariance for F {
    fn eval(&self, lag: f64) -> f64 {
        self(lag)
    }
}

/// Power spectral density `S(ω)`, with `C(τ) = (1/2π)∫S(ω)e^{iωτ}dω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PsdModel {
    Lorentzian { tau_c: f64, c: f64 },
    White { level: f64 },
    /// Piecewise-linear table. A table whose grid starts at ω ≥ 0 is one-sided
    /// and is evaluated at |ω|.
    Tabulated { omega: Vec<f64>, s: Vec<f64> },
}

impl PsdModel {
    pub fn lorentzian(p: OuParams) -> Self {
        PsdModel::Lorentzian { tau_c: p.tau_c, c: p.c }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PsdModel::Lorentzian { tau_c, c } => OuParams { tau_c: *tau_c, c: *c }.validate(),
            PsdModel::White { level } => {
                if *level >= 0.0 && level.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("white level must be >= 0, got {level}")))
                }
            }
            PsdModel::Tabulated { omega, s } => {
                if omega.len() != s.len() || omega.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "tabulated PSD needs matching omega/s arrays of length >= 2".into(),
                    ));
                }
                if omega.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidParameter("tabulated omega grid must increase".into()));
                }
                if s.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::InvalidParameter("tabulated PSD values must be >= 0".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            PsdModel::Lorentzian { tau_c, c } => {
                let x = omega * tau_c;
                c * tau_c * tau_c / (1.0 + x * x)
            }
            PsdModel::White { level } => *level,
            PsdModel::Tabulated { omega: grid, s } => {
                let w = if grid[0] >= 0.0 { omega.abs() } else { omega };
                if w < grid[0] || w > grid[grid.len() - 1] {
                    return 0.0;
                }
                let k = grid.partition_point(|g| *g <= w).clamp(1, grid.len() - 1);
                let (x0, x1) = (grid[k - 1], grid[k]);
                let f = (w - x0) / (x1 - x0);
                s[k - 1] + f * (s[k] - s[k - 1])
            }
        }
    }

    /// Largest value of the density, used to nondimensionalise integrals.
    pub fn peak(&self) -> f64 {
        match self {
            PsdModel::Lorentzian { tau_c, c } => c * tau_c * tau_c,
            PsdModel::White { level } => *level,
            PsdModel::Tabulated { s, .. } => s.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Frequencies where the density changes character.
    pub fn features(&self) -> Vec<f64> {
        match self {
            PsdModel::Lorentzian { tau_c, .. } => vec![0.1 / tau_c, 1.0 / tau_c, 10.0 / tau_c],
            PsdModel::White { .. } => vec![],
            PsdModel::Tabulated { omega, .. } => omega.iter().map(|w| w.abs()).collect(),
        }
    }

    pub fn correlation_time(&self) -> Option<f64> {
        match self {
            PsdModel::Lorentzian { tau_c, .. } => Some(*tau_c),
            _ => None,
        }
    }

    /// True when the density is identically zero.
    pub fn is_zero(&self) -> bool {
        self.peak() == 0.0
    }

    /// Where the model has an upper frequency edge beyond which it vanishes.
    pub fn support_edge(&self) -> Option<f64> {
        match self {
            PsdModel::Tabulated { omega, .. } => {
                Some(omega.iter().map(|w| w.abs()).fold(0.0, f64::max))
            }
            _ => None,
        }
    }
}

pub fn psd_eval(model: &PsdModel, omega: f64) -> f64 {
    model.eval(omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be >= 1".into()));
        }
        Ok(Self { t0, dt, n_steps })
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    Zero,
    #[default]
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub values: Vec<f64>,
}

/// Precomputed exact one-step update for a fixed `dt`.
#[derive(Debug, Clone, Copy)]
pub struct OuStepper {
    decay: f64,
    kick: f64,
    sd: f64,
}

impl OuStepper {
    pub fn new(params: &OuParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        let decay = (-dt / params.tau_c).exp();
        let kick = (params.variance() * -(-2.0 * dt / params.tau_c).exp_m1()).sqrt();
        Ok(Self {
            decay,
            kick,
            sd: params.variance().sqrt(),
        })
    }

    pub fn start<R: Rng + ?Sized>(&self, rng: &mut R, mode: StartMode) -> f64 {
        match mode {
            StartMode::Zero => 0.0,
            StartMode::Stationary => {
                let u: f64 = rng.sample(StandardNormal);
                self.sd * u
            }
        }
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(StandardNormal);
        x * self.decay + self.kick * u
    }
}

/// Exact discretisation of the OU process on `grid`.
pub fn ou_trajectory<R: Rng + ?Sized>(
    params: &OuParams,
    grid: &TimeGrid,
    rng: &mut R,
    start: StartMode,
) -> Result<Trajectory> {
    let grid = TimeGrid::new(grid.t0, grid.dt, grid.n_steps)?;
    let stepper = OuStepper::new(params, grid.dt)?;
    let mut values = Vec::with_capacity(grid.n_steps + 1);
    let mut x = stepper.start(rng, start);
    values.push(x);
    for _ in 0..grid.n_steps {
        x = stepper.step(x, rng);
        values.push(x);
    }
    Ok(Trajectory { values })
}
