//! The five-gate set, its fiducial state and measurement, and the model variants.
//!
//! Gates: `G1 = (π, 0)`, `G2 = (π/2, 0)`, `G3 = (π/2, 3π/2)`, `G4 = (π/2, π/2)`,
//! `G5 = (π/2, π)` as (area, drive phase). Gates of equal duration share one
//! set of filtered parameters. The fiducial state is
//! `ρ₀ = (𝟙 + r·σ)/2` and the measurement effect `M₀ = (e₀𝟙 + e·σ)/2`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::channels::{self, cptp_check, Ptm};
use crate::error::{Error, Result};
use crate::filters::{theta, FilteredParams, PulseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateId {
    G1,
    G2,
    G3,
    G4,
    G5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Duration {
    Pi,
    Half,
}

impl GateId {
    pub const ALL: [GateId; 5] = [GateId::G1, GateId::G2, GateId::G3, GateId::G4, GateId::G5];

    pub fn index(self) -> usize {
        self as usize
    }

    /// (pulse area, drive phase).
    pub fn angles(self) -> (f64, f64) {
        match self {
            GateId::G1 => (PI, 0.0),
            GateId::G2 => (FRAC_PI_2, 0.0),
            GateId::G3 => (FRAC_PI_2, 3.0 * FRAC_PI_2),
            GateId::G4 => (FRAC_PI_2, FRAC_PI_2),
            GateId::G5 => (FRAC_PI_2, PI),
        }
    }

    pub fn duration(self) -> Duration {
        match self {
            GateId::G1 => Duration::Pi,
            _ => Duration::Half,
        }
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}", self.index() + 1)
    }
}

impl FromStr for GateId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "G1" => Ok(GateId::G1),
            "G2" => Ok(GateId::G2),
            "G3" => Ok(GateId::G3),
            "G4" => Ok(GateId::G4),
            "G5" => Ok(GateId::G5),
            other => Err(Error::InvalidParameter(format!("unknown gate {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    Markovian,
    NonMarkovian,
    MarkovianAmplitude,
    NonMarkovianAmplitude,
}

/// Which filtered integrals a variant estimates, in packing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpField {
    Gamma1,
    Delta1,
    Gamma2,
    Delta2,
    DeltaGamma1,
}

impl FpField {
    pub fn get(self, fp: &FilteredParams) -> f64 {
        match self {
            FpField::Gamma1 => fp.gamma1,
            FpField::Delta1 => fp.delta1,
            FpField::Gamma2 => fp.gamma2,
            FpField::Delta2 => fp.delta2,
            FpField::DeltaGamma1 => fp.delta_gamma1,
        }
    }

    pub fn set(self, fp: &mut FilteredParams, v: f64) {
        match self {
            FpField::Gamma1 => fp.gamma1 = v,
            FpField::Delta1 => fp.delta1 = v,
            FpField::Gamma2 => fp.gamma2 = v,
            FpField::Delta2 => fp.delta2 = v,
            FpField::DeltaGamma1 => fp.delta_gamma1 = v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FpField::Gamma1 => "gamma1",
            FpField::Delta1 => "delta1",
            FpField::Gamma2 => "gamma2",
            FpField::Delta2 => "delta2",
            FpField::DeltaGamma1 => "delta_gamma1",
        }
    }
}

pub const SPAM_PARAMS: usize = 7;

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::Markovian,
        ModelVariant::NonMarkovian,
        ModelVariant::MarkovianAmplitude,
        ModelVariant::NonMarkovianAmplitude,
    ];

    pub fn fields(self) -> &'static [FpField] {
        use FpField::*;
        match self {
            ModelVariant::Markovian => &[Gamma1, Delta1],
            ModelVariant::NonMarkovian => &[Gamma1, Delta1, Gamma2, Delta2],
            ModelVariant::MarkovianAmplitude => &[Gamma1, Delta1, DeltaGamma1],
            ModelVariant::NonMarkovianAmplitude => &[Gamma1, Delta1, Gamma2, Delta2, DeltaGamma1],
        }
    }

    pub fn n_params(self) -> usize {
        SPAM_PARAMS + 2 * self.fields().len()
    }

    pub fn is_markovian(self) -> bool {
        matches!(self, ModelVariant::Markovian | ModelVariant::MarkovianAmplitude)
    }

    pub fn has_amplitude(self) -> bool {
        matches!(
            self,
            ModelVariant::MarkovianAmplitude | ModelVariant::NonMarkovianAmplitude
        )
    }

    /// Parameter names in packing order.
    pub fn param_names(self) -> Vec<String> {
        let mut names: Vec<String> = ["r1", "r2", "r3", "e0", "e1", "e2", "e3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for tag in ["pi", "half"] {
            for f in self.fields() {
                names.push(format!("{}_{}", f.name(), tag));
            }
        }
        names
    }

    /// What a packed index refers to.
    pub fn param_kind(self, k: usize) -> ParamKind {
        let nf = self.fields().len();
        if k < SPAM_PARAMS {
            ParamKind::Spam(k)
        } else {
            let j = k - SPAM_PARAMS;
            let d = if j < nf { Duration::Pi } else { Duration::Half };
            ParamKind::Filtered(d, self.fields()[j % nf])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Spam(usize),
    Filtered(Duration, FpField),
}

/// Rabi frequency and the two gate durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulses {
    pub omega_rabi: f64,
    pub t_pi: f64,
    pub t_half: f64,
}

impl Pulses {
    /// Durations from the Rabi frequency: `t_π = π/Ω`, `t_{π/2} = t_π/2`.
    pub fn from_rabi(omega_rabi: f64) -> Self {
        Self {
            omega_rabi,
            t_pi: PI / omega_rabi,
            t_half: FRAC_PI_2 / omega_rabi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_rabi > 0.0) {
            return Err(Error::InvalidParameter("omega_rabi must be > 0".into()));
        }
        let a = self.omega_rabi * self.t_pi;
        let b = self.omega_rabi * self.t_half;
        if (a - PI).abs() > 1e-12 * PI || (b - FRAC_PI_2).abs() > 1e-12 * PI {
            return Err(Error::InconsistentArea(format!(
                "Ω·t_π = {a}, Ω·t_π/2 = {b}"
            )));
        }
        Ok(())
    }

    pub fn pulse(&self, g: GateId) -> PulseSpec {
        let (_, phi) = g.angles();
        let t = match g.duration() {
            Duration::Pi => self.t_pi,
            Duration::Half => self.t_half,
        };
        PulseSpec::new(self.omega_rabi, t, phi)
    }
}

/// Default Rabi frequency, 2π × 50 kHz.
pub const DEFAULT_OMEGA_RABI: f64 = 2.0 * PI * 50e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSet {
    pub variant: ModelVariant,
    pub omega_rabi: f64,
    pub t_pi: f64,
    pub t_half: f64,
    pub r: [f64; 3],
    pub e: [f64; 4],
    pub fp_pi: FilteredParams,
    pub fp_half: FilteredParams,
}

pub fn ideal_gate_set(omega_rabi: f64, t_pi: f64, t_half: f64) -> Result<GateSet> {
    let p = Pulses {
        omega_rabi,
        t_pi,
        t_half,
    };
    p.validate()?;
    Ok(GateSet {
        variant: ModelVariant::Markovian,
        omega_rabi,
        t_pi,
        t_half,
        r: [0.0, 0.0, 1.0],
        e: [1.0, 0.0, 0.0, 1.0],
        fp_pi: FilteredParams::zero(),
        fp_half: FilteredParams::zero(),
    })
}

impl GateSet {
    pub fn ideal(pulses: Pulses, variant: ModelVariant) -> Result<Self> {
        let mut gs = ideal_gate_set(pulses.omega_rabi, pulses.t_pi, pulses.t_half)?;
        gs.variant = variant;
        Ok(gs)
    }

    pub fn pulses(&self) -> Pulses {
        Pulses {
            omega_rabi: self.omega_rabi,
            t_pi: self.t_pi,
            t_half: self.t_half,
        }
    }

    pub fn fp(&self, d: Duration) -> &FilteredParams {
        match d {
            Duration::Pi => &self.fp_pi,
            Duration::Half => &self.fp_half,
        }
    }

    pub fn fp_mut(&mut self, d: Duration) -> &mut FilteredParams {
        match d {
            Duration::Pi => &mut self.fp_pi,
            Duration::Half => &mut self.fp_half,
        }
    }

    /// Zero the filtered integrals the variant does not model.
    pub fn restrict_to_variant(&mut self) {
        let fields = self.variant.fields();
        for d in [Duration::Pi, Duration::Half] {
            let fp = self.fp_mut(d);
            let mut out = FilteredParams::zero();
            for f in fields {
                f.set(&mut out, f.get(fp));
            }
            *fp = out;
        }
    }

    pub fn with_variant(&self, variant: ModelVariant) -> GateSet {
        let mut gs = self.clone();
        gs.variant = variant;
        gs.restrict_to_variant();
        gs
    }

    pub fn gate_ptm(&self, g: GateId) -> Result<Ptm> {
        channels::gate_ptm(self.fp(g.duration()), &self.pulses().pulse(g))
    }

    /// PTMs of G1..G5, without the physicality check on the filtered parameters.
    pub fn gate_ptms_unchecked(&self) -> [Ptm; 5] {
        let p = self.pulses();
        GateId::ALL.map(|g| {
            let pulse = p.pulse(g);
            let phase = channels::Phase::from_radians(pulse.phase).expect("gate phases are valid");
            channels::chi_to_ptm(&channels::process_matrix(
                phase,
                &channels::chi_blocks_unchecked(self.fp(g.duration()), &pulse),
            ))
        })
    }

    pub fn gate_ptms(&self) -> Result<[Ptm; 5]> {
        for d in [Duration::Pi, Duration::Half] {
            let fp = self.fp(d);
            if !(fp.gamma1 >= 0.0 && fp.delta_gamma1 >= 0.0) {
                return Err(Error::NonphysicalParameter(format!("{fp:?}")));
            }
        }
        Ok(self.gate_ptms_unchecked())
    }

    /// Pauli coordinates of ρ₀.
    pub fn rho_vec(&self) -> Vector4<f64> {
        Vector4::new(1.0, self.r[0], self.r[1], self.r[2]) * FRAC_1_SQRT_2
    }

    /// Pauli coordinates of M₀.
    pub fn meas_vec(&self) -> Vector4<f64> {
        Vector4::new(self.e[0], self.e[1], self.e[2], self.e[3]) * FRAC_1_SQRT_2
    }

    pub fn pack(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.variant.n_params());
        v.extend_from_slice(&self.r);
        v.extend_from_slice(&self.e);
        for d in [Duration::Pi, Duration::Half] {
            for f in self.variant.fields() {
                v.push(f.get(self.fp(d)));
            }
        }
        v
    }

    pub fn unpack(theta: &[f64], variant: ModelVariant, pulses: Pulses) -> Result<GateSet> {
        let n = variant.n_params();
        if theta.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: theta.len(),
            });
        }
        let mut gs = GateSet {
            variant,
            omega_rabi: pulses.omega_rabi,
            t_pi: pulses.t_pi,
            t_half: pulses.t_half,
            r: [theta[0], theta[1], theta[2]],
            e: [theta[3], theta[4], theta[5], theta[6]],
            fp_pi: FilteredParams::zero(),
            fp_half: FilteredParams::zero(),
        };
        let fields = variant.fields();
        for (k, &x) in theta[SPAM_PARAMS..].iter().enumerate() {
            let d = if k < fields.len() { Duration::Pi } else { Duration::Half };
            fields[k % fields.len()].set(gs.fp_mut(d), x);
        }
        Ok(gs)
    }
}

/// Violation magnitudes (all zero when feasible).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub gamma1_pi: f64,
    pub gamma1_half: f64,
    pub delta_gamma1: f64,
    pub bloch: f64,
    pub e0_range: f64,
    pub e_cone: f64,
    /// `max(0, −min eigenvalue)` over the gate χ matrices.
    pub cp: f64,
}

impl ConstraintReport {
    pub fn max_violation(&self) -> f64 {
        [
            self.gamma1_pi,
            self.gamma1_half,
            self.delta_gamma1,
            self.bloch,
            self.e0_range,
            self.e_cone,
            self.cp,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

pub fn validate_constraints(gs: &GateSet) -> ConstraintReport {
    let r2: f64 = gs.r.iter().map(|x| x * x).sum();
    let v2: f64 = gs.e[1..].iter().map(|x| x * x).sum();
    let e0 = gs.e[0];
    let bound = e0.min(2.0 - e0).max(0.0);
    let mut cp: f64 = 0.0;
    let p = gs.pulses();
    for g in GateId::ALL {
        let pulse = p.pulse(g);
        let phase = channels::Phase::from_radians(pulse.phase).expect("gate phases are valid");
        let chi = channels::process_matrix(
            phase,
            &channels::chi_blocks_unchecked(gs.fp(g.duration()), &pulse),
        );
        cp = cp.max(-cptp_check(&chi).min_eigenvalue);
    }
    ConstraintReport {
        gamma1_pi: (-gs.fp_pi.gamma1).max(0.0),
        gamma1_half: (-gs.fp_half.gamma1).max(0.0),
        delta_gamma1: (-gs.fp_pi.delta_gamma1).max(-gs.fp_half.delta_gamma1).max(0.0),
        bloch: (r2 - 1.0).max(0.0),
        e0_range: (-e0).max(e0 - 2.0).max(0.0),
        e_cone: (v2 - bound * bound).max(0.0),
        cp: cp.max(0.0),
    }
}

fn project_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let d = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / (d.0 * d.0 + d.1 * d.1)).clamp(0.0, 1.0);
    (a.0 + t * d.0, a.1 + t * d.1)
}

/// Euclidean projection of `e` onto `{e₀ ∈ [0,2], |e⃗| ≤ min(e₀, 2−e₀)}`.
pub fn project_povm(e: &mut [f64; 4]) {
    let rho = (e[1] * e[1] + e[2] * e[2] + e[3] * e[3]).sqrt();
    let x = e[0];
    if (0.0..=2.0).contains(&x) && rho <= x.min(2.0 - x) {
        return;
    }
    let p = (x, rho);
    let tri = [(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)];
    let mut best = (f64::INFINITY, (0.0, 0.0));
    for k in 0..3 {
        let q = project_segment(p, tri[k], tri[(k + 1) % 3]);
        let dist = (q.0 - p.0).powi(2) + (q.1 - p.1).powi(2);
        if dist < best.0 {
            best = (dist, q);
        }
    }
    let (e0, new_rho) = best.1;
    e[0] = e0;
    if rho > 0.0 {
        let s = new_rho / rho;
        for v in e[1..].iter_mut() {
            *v *= s;
        }
    }
}

pub fn project_bloch(r: &mut [f64; 3]) {
    let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if n > 1.0 {
        for v in r.iter_mut() {
            *v /= n;
        }
    }
}

/// Project onto the box, ball and cone constraints. Non-Markovian variants
/// are also projected onto the complete-positivity region of each duration.
pub fn project(gs: &mut GateSet) {
    project_bloch(&mut gs.r);
    project_povm(&mut gs.e);
    let nm = !gs.variant.is_markovian();
    for d in [Duration::Pi, Duration::Half] {
        let fp = gs.fp_mut(d);
        fp.gamma1 = fp.gamma1.max(0.0);
        fp.delta_gamma1 = fp.delta_gamma1.max(0.0);
        if nm {
            project_cp(fp);
        }
    }
}

/// Smallest eigenvalues of the two 2×2 χ blocks, `(λ_A, λ_B)`.
///
/// Each block is `αI + β·σ` with `|β|` independent of pulse area and phase,
/// and the phase layouts only permute and sign-flip entries, so the gate χ is
/// positive semidefinite iff both values are `≥ 0` (its eigenvalues are half of these).
pub fn cp_margins(fp: &FilteredParams) -> (f64, f64) {
    let th = theta(fp);
    let e = (-fp.gamma1).exp();
    let a = (-0.5 * (fp.gamma1 + fp.delta_gamma1)).exp();
    let la = 1.0 + e - 2.0 * a * (th.cos_half * th.cos_half + (fp.delta1 * th.sinc_half).powi(2)).sqrt();
    let lb = 1.0 - e - 2.0 * a * th.sinc_half * fp.gamma2.hypot(fp.delta2);
    (la, lb)
}

fn cp_ok(fp: &FilteredParams) -> bool {
    let (a, b) = cp_margins(fp);
    a >= 0.0 && b >= 0.0
}

/// Largest `|(Γ₂, Δ₂)|` compatible with complete positivity at the given Γ₁.
fn cp_radius(fp: &FilteredParams, gamma1: f64) -> f64 {
    let at = |rho: f64| FilteredParams {
        gamma1,
        gamma2: rho,
        delta2: 0.0,
        ..*fp
    };
    if !cp_ok(&at(0.0)) {
        return 0.0;
    }
    let mut hi = gamma1.max(1e-300) * 2.0;
    while cp_ok(&at(hi)) && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if cp_ok(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    lo
}

/// Euclidean projection of `(Γ₁, Γ₂, Δ₂)` onto the CP region at fixed Δ₁ and ΔΓ₁.
///
/// The region depends on `(Γ₂, Δ₂)` only through its norm, so the projection
/// keeps the direction and searches the boundary `ρ = R(Γ₁′)` in the `(Γ₁, ρ)` plane.
pub fn project_cp(fp: &mut FilteredParams) {
    if cp_ok(fp) {
        return;
    }
    let g = fp.gamma1.max(0.0);
    let rho = fp.gamma2.hypot(fp.delta2);
    let dist = |g2: f64| {
        let r = cp_radius(fp, g2).min(rho);
        (g2 - g).powi(2) + (rho - r).powi(2)
    };
    let (mut a, mut b) = (g, g + rho.max(1e-300));
    let k = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - k * (b - a);
        let d = a + k * (b - a);
        if dist(c) <= dist(d) {
            b = d;
        } else {
            a = c;
        }
        if b - a <= 1e-15 * b {
            break;
        }
    }
    let g_new = 0.5 * (a + b);
    let r = cp_radius(fp, g_new).min(rho);
    let s = if rho > 0.0 { r / rho } else { 0.0 };
    fp.gamma1 = g_new;
    fp.gamma2 *= s;
    fp.delta2 *= s;
    if !cp_ok(fp) {
        // round-off at the boundary
        fp.gamma2 *= 1.0 - 1e-12;
        fp.delta2 *= 1.0 - 1e-12;
    }
}

/// Predicted PTM products are unchanged by `(r, e⃗) → (λr, e⃗/λ)` because every
/// gate channel is unital. Pick the feasible λ that brings the fiducials
/// closest to `target`.
pub fn fix_spam_scale(gs: &mut GateSet, target: &GateSet) {
    let rn2: f64 = gs.r.iter().map(|x| x * x).sum();
    let vn2: f64 = gs.e[1..].iter().map(|x| x * x).sum();
    if rn2 == 0.0 || vn2 == 0.0 {
        return;
    }
    let lo = (vn2.sqrt() / gs.e[0].min(2.0 - gs.e[0]).max(1e-300)).max(1e-12);
    let hi = 1.0 / rn2.sqrt();
    if lo > hi {
        return;
    }
    let cost = |l: f64| {
        let a: f64 = (0..3).map(|k| (l * gs.r[k] - target.r[k]).powi(2)).sum();
        let b: f64 = (1..4).map(|k| (gs.e[k] / l - target.e[k]).powi(2)).sum();
        a + b
    };
    // golden-section on log λ; the cost is unimodal on the feasible interval in practice
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if cost(c.exp()) < cost(d.exp()) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    let mut l = (0.5 * (a + b)).exp();
    if cost(1.0) <= cost(l) && (lo..=hi).contains(&1.0) {
        l = 1.0;
    }
    for v in gs.r.iter_mut() {
        *v *= l;
    }
    for v in gs.e[1..].iter_mut() {
        *v /= l;
    }
}

/// PTM of a gate set member with a scaled duration, `G(pΓ, pΔ)` at `p·t`.
pub fn scaled_gate_ptm(fp: &FilteredParams, pulse: &PulseSpec, p: f64) -> Result<Ptm> {
    let scaled = FilteredParams {
        gamma1: p * fp.gamma1,
        gamma2: p * fp.gamma2,
        delta1: p * fp.delta1,
        delta2: p * fp.delta2,
        delta_gamma1: p * fp.delta_gamma1,
    };
    let pulse = PulseSpec::new(pulse.omega_rabi, p * pulse.duration, pulse.phase);
    channels::gate_ptm(&scaled, &pulse)
}
