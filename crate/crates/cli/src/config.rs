//! Run configuration, read from a TOML document.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cgst_core::gateset::{Pulses, DEFAULT_OMEGA_RABI};
use cgst_core::{FitConfig, ModelVariant, NoiseConfig, OuParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Which estimator a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Markov,
    Nonmarkov,
    MarkovAmp,
    NonmarkovAmp,
    General,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Markov,
        Variant::Nonmarkov,
        Variant::MarkovAmp,
        Variant::NonmarkovAmp,
        Variant::General,
    ];

    pub fn model(self) -> Option<ModelVariant> {
        match self {
            Variant::Markov => Some(ModelVariant::Markovian),
            Variant::Nonmarkov => Some(ModelVariant::NonMarkovian),
            Variant::MarkovAmp => Some(ModelVariant::MarkovianAmplitude),
            Variant::NonmarkovAmp => Some(ModelVariant::NonMarkovianAmplitude),
            Variant::General => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Markov => "markov",
            Variant::Nonmarkov => "nonmarkov",
            Variant::MarkovAmp => "markov-amp",
            Variant::NonmarkovAmp => "nonmarkov-amp",
            Variant::General => "general",
        }
    }
}

/// Where the counts come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// Binomial shots at the filtered-integral channel probabilities.
    Analytic,
    /// Monte Carlo channels of the stochastic Hamiltonian.
    Mc,
}

/// How the true gate set is built from the noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TruthModel {
    /// All filtered integrals of the noise.
    #[default]
    Filtered,
    /// The filtered decay and rotation terms only (Γ₂ = Δ₂ = 0).
    Markovian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuSection {
    pub tau_c: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub phase: OuSection,
    pub amplitude: Option<OuSection>,
    pub mc_dt: Option<f64>,
    pub n_traj: usize,
    pub truth: TruthModel,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            phase: OuSection { tau_c: 5e-6, c: 2e3 },
            amplitude: None,
            mc_dt: None,
            n_traj: 100_000,
            truth: TruthModel::Filtered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    pub omega_rabi: f64,
    /// Defaults to `π/Ω`.
    pub t_pi: Option<f64>,
    /// Defaults to `π/(2Ω)`.
    pub t_half: Option<f64>,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            omega_rabi: DEFAULT_OMEGA_RABI,
            t_pi: None,
            t_half: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub p_max: u32,
    pub shots: u64,
    pub variant: Variant,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            p_max: 16,
            shots: 1000,
            variant: Variant::Markov,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub cost_switch_depth: Option<u32>,
    pub max_iterations: usize,
    pub ftol: f64,
    pub xtol: f64,
    /// Average the fiducial distances into the benchmark distance.
    pub include_spam: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitConfig::default();
        Self {
            cost_switch_depth: None,
            max_iterations: f.max_iterations,
            ftol: f.ftol,
            xtol: f.xtol,
            include_spam: false,
        }
    }
}

/// Fiducial errors of the true gate set; absent fields keep the ideal values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpamSection {
    /// Bloch vector of the prepared state.
    pub r: Option<[f64; 3]>,
    /// Measurement effect `(e0, e1, e2, e3)`.
    pub e: Option<[f64; 4]>,
}

/// Point lists for the sweep subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub shots: Vec<u64>,
    /// One series per entry in the shots sweep.
    pub p_max: Vec<u32>,
    pub depths: Vec<u32>,
    pub tau_c: Vec<f64>,
    /// Circuit counts for the circuits sweep; empty means every count.
    pub circuits: Vec<usize>,
    /// Variants compared by the tau-c sweep.
    pub tau_c_variants: Vec<Variant>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            shots: vec![100, 1000, 10_000],
            p_max: vec![4, 16],
            depths: vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512],
            tau_c: vec![5e-6, 1.5e-5, 5e-5, 1.5e-4, 5e-4, 1.5e-3, 5e-3],
            circuits: Vec::new(),
            tau_c_variants: vec![Variant::Markov, Variant::Nonmarkov],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub noise: NoiseSection,
    pub pulses: PulseSection,
    pub spam: SpamSection,
    pub design: DesignSection,
    pub fit: FitSection,
    pub sweep: SweepSection,
    pub data: DataSource,
    pub repeats: usize,
    pub seed: u64,
    pub out: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            noise: NoiseSection::default(),
            pulses: PulseSection::default(),
            spam: SpamSection::default(),
            design: DesignSection::default(),
            fit: FitSection::default(),
            sweep: SweepSection::default(),
            data: DataSource::Analytic,
            repeats: 20,
            seed: 1,
            out: "out".into(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("parsing run config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.noise_config()?;
        self.pulses()?;
        if self.design.p_max == 0 {
            bail!("design.p_max must be >= 1");
        }
        if self.design.shots == 0 {
            bail!("design.shots must be >= 1");
        }
        if self.repeats == 0 {
            bail!("repeats must be >= 1");
        }
        Ok(())
    }

    pub fn pulses(&self) -> Result<Pulses> {
        let base = Pulses::from_rabi(self.pulses.omega_rabi);
        let p = Pulses {
            omega_rabi: self.pulses.omega_rabi,
            t_pi: self.pulses.t_pi.unwrap_or(base.t_pi),
            t_half: self.pulses.t_half.unwrap_or(base.t_half),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn noise_config(&self) -> Result<NoiseConfig> {
        let ou = |s: &OuSection| OuParams::new(s.tau_c, s.c);
        let n = NoiseConfig {
            phase: ou(&self.noise.phase)?,
            amplitude: self.noise.amplitude.as_ref().map(ou).transpose()?,
            mc_dt: self.noise.mc_dt,
            n_traj: self.noise.n_traj,
        };
        n.validate(self.pulses.omega_rabi)?;
        Ok(n)
    }

    pub fn fit_config(&self, variant: Variant) -> FitConfig {
        let base = match variant.model() {
            Some(v) => FitConfig::parametrized(v),
            None => FitConfig::general(),
        };
        FitConfig {
            cost_switch_depth: self.fit.cost_switch_depth,
            max_iterations: self.fit.max_iterations,
            ftol: self.fit.ftol,
            xtol: self.fit.xtol,
            ..base
        }
    }

    /// SHA-256 of the canonical serialization, identifying everything a row depends on.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}
