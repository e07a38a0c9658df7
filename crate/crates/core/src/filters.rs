//! Filter functions and the filtered decoherence/phase integrals.
//!
//! A gate of duration `t` driven at Rabi frequency `Ω` sees detuning noise
//! through four filters, `F_Γ1`, `F_Δ1`, `F_Γ2`, `F_Δ2`, and Rabi-rate noise
//! through `F_Ω`. With `y = (ω−Ω)t`, `u = (ω+Ω)t` and `sinc z = sin z / z`:
//!
//! ```text
//! F_Γ1 = t²/(8π) [sinc²(y/2) + sinc²(u/2)]
//! F_Δ1 = t²/(4π) [g(y) − g(u)],          g(z) = (sin z − z)/z²
//! F_Γ2 = t² cos(Ωt)/(4π) sinc(y/2) sinc(u/2)
//! F_Δ2 = t² sin(Ωt)/(4π) sinc(y/2) sinc(u/2)
//! F_Ω  = t²/(2π) sinc²(ωt/2)
//! ```
//!
//! The filtered integrals are `∫S(ω)F(ω)dω` over the real line. Equivalently,
//! in the time domain (with `C` the noise covariance)
//!
//! ```text
//! Γ1 = ∫₀ᵗdt′∫₀^{t′}dt″ C(t′−t″) cos Ω(t′−t″)     Δ1: sin Ω(t′−t″)
//! Γ2 = ∫₀ᵗdt′∫₀^{t′}dt″ C(t′−t″) cos Ω(t′+t″)     Δ2: sin Ω(t′+t″)
//! ΔΓ1 = ∫₀ᵗ∫₀ᵗ C_Ω(t′−t″)
//! ```
//!
//! Both routes are implemented; the time-domain one is the brute-force check.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{Covariance, PsdModel};
use crate::quad::{self, Tolerance};

/// Filtered integrals for one pulse duration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FilteredParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta1: f64,
    pub delta2: f64,
    #[serde(default)]
    pub delta_gamma1: f64,
}

impl FilteredParams {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn markovian(gamma1: f64, delta1: f64) -> Self {
        Self {
            gamma1,
            delta1,
            ..Self::default()
        }
    }

    pub fn is_markovian(&self) -> bool {
        self.gamma2 == 0.0 && self.delta2 == 0.0
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.gamma1, self.gamma2, self.delta1, self.delta2, self.delta_gamma1]
    }
}

/// A square pulse of Rabi frequency `omega_rabi` (rad/s), `duration` (s) and drive phase `phase`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub omega_rabi: f64,
    pub duration: f64,
    pub phase: f64,
}

impl PulseSpec {
    pub fn new(omega_rabi: f64, duration: f64, phase: f64) -> Self {
        Self {
            omega_rabi,
            duration,
            phase,
        }
    }

    /// Pulse area θ = Ω·t.
    pub fn area(&self) -> f64 {
        self.omega_rabi * self.duration
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_rabi > 0.0) || !self.omega_rabi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "omega_rabi must be > 0, got {}",
                self.omega_rabi
            )));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "duration must be >= 0, got {}",
                self.duration
            )));
        }
        Ok(())
    }
}

/// Quadrature settings for the filtered integrals.
///
/// Tolerances apply to the integrals after scaling time by `t`, frequency by
/// `1/t` and the noise strength by its peak, so they are relative to the
/// natural size of each integral rather than to SI magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Upper end of the explicitly subdivided band, rad/s. `None` picks
    /// `max(50/τc, 50Ω, 200/t)`. The remaining tail is integrated after a change of variables.
    pub omega_max: Option<f64>,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            omega_max: None,
            max_subdivisions: 4000,
        }
    }
}

impl QuadConfig {
    fn tolerance(&self) -> Tolerance {
        Tolerance {
            abs: self.abs_tol,
            rel: self.rel_tol,
            max_subdivisions: self.max_subdivisions,
        }
    }

    fn inner(&self) -> Tolerance {
        Tolerance {
            abs: self.abs_tol * 1e-2,
            rel: self.rel_tol * 1e-2,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterKind {
    G1,
    D1,
    G2,
    D2,
    Amp,
}

#[inline]
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// `(sin z − z)/z²`, odd, ≈ −z/6 near zero.
#[inline]
fn gfun(z: f64) -> f64 {
    if z.abs() < 0.5 {
        let z2 = z * z;
        let mut term = -z / 6.0;
        let mut sum = term;
        let mut k = 2.0;
        while k < 8.0 {
            // next term of Σ (−1)^k z^{2k−1}/(2k+1)!
            term *= -z2 / ((2.0 * k) * (2.0 * k + 1.0));
            sum += term;
            k += 1.0;
        }
        sum
    } else {
        (z.sin() - z) / (z * z)
    }
}

/// Filter shapes in units of `t²`, as functions of `x = ωt` and `θ = Ωt`.
#[inline]
fn shape(kind: FilterKind, x: f64, theta: f64) -> f64 {
    match kind {
        FilterKind::G1 => {
            let a = sinc(0.5 * (x - theta));
            let b = sinc(0.5 * (x + theta));
            (a * a + b * b) / (8.0 * PI)
        }
        FilterKind::D1 => (gfun(x - theta) - gfun(x + theta)) / (4.0 * PI),
        FilterKind::G2 => {
            theta.cos() * sinc(0.5 * (x - theta)) * sinc(0.5 * (x + theta)) / (4.0 * PI)
        }
        FilterKind::D2 => {
            theta.sin() * sinc(0.5 * (x - theta)) * sinc(0.5 * (x + theta)) / (4.0 * PI)
        }
        FilterKind::Amp => {
            let a = sinc(0.5 * x);
            a * a / (2.0 * PI)
        }
    }
}

/// Evaluate one filter function at angular frequency `omega`.
pub fn filter_eval(kind: FilterKind, omega: f64, pulse: &PulseSpec) -> f64 {
    let t = pulse.duration;
    t * t * shape(kind, omega * t, pulse.area())
}

fn default_omega_max(corr: Option<f64>, pulse: &PulseSpec) -> f64 {
    let mut w = (50.0 * pulse.omega_rabi).max(200.0 / pulse.duration);
    if let Some(tc) = corr {
        w = w.max(50.0 / tc);
    }
    w
}

fn frequency_breakpoints(psd: &PsdModel, x_max: f64, theta: f64, t: f64) -> Vec<f64> {
    let mut pts = vec![0.0, x_max];
    if theta > 0.0 && theta < x_max {
        pts.push(theta);
    }
    let two_pi = 2.0 * PI;
    let dense_end = x_max.min(theta + two_pi * 64.0);
    let mut k = 1.0;
    while k * two_pi < dense_end {
        pts.push(k * two_pi);
        k += 1.0;
    }
    // geometric spacing beyond the resolved oscillations
    let mut x = dense_end.max(two_pi) * 1.5;
    while x < x_max {
        pts.push(x);
        x *= 1.5;
    }
    let feats = psd.features();
    let cap = 256;
    let step = (feats.len() / cap).max(1);
    for w in feats.iter().step_by(step) {
        let xf = w * t;
        if xf > 0.0 && xf < x_max {
            pts.push(xf);
        }
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    pts
}

/// `2∫₀^∞ S(x/t)/S_peak · shape(x) dx`, split into a subdivided band and a mapped tail.
fn dimensionless_freq_integral(
    psd: &PsdModel,
    kind: FilterKind,
    pulse: &PulseSpec,
    quad: &QuadConfig,
) -> Result<f64> {
    let t = pulse.duration;
    let theta = pulse.area();
    let peak = psd.peak();
    let omega_max = quad
        .omega_max
        .unwrap_or_else(|| default_omega_max(psd.correlation_time(), pulse));
    let x_max = omega_max * t;
    let f = |x: f64| psd.eval(x / t) / peak * shape(kind, x, theta);
    let pts = frequency_breakpoints(psd, x_max, theta, t);
    let tol = quad.tolerance();
    let band = quad::integrate_points(f, &pts, tol)?;
    let tail = match psd.support_edge() {
        Some(edge) if edge * t <= x_max => 0.0,
        _ => quad::integrate_tail(f, x_max, tol)?.value,
    };
    Ok(2.0 * (band.value + tail))
}

/// Filtered integrals from the spectral densities of detuning noise and, optionally, Rabi-rate noise.
pub fn filtered_params_freq(
    psd: &PsdModel,
    amplitude: Option<&PsdModel>,
    pulse: &PulseSpec,
    quad: &QuadConfig,
) -> Result<FilteredParams> {
    psd.validate()?;
    pulse.validate()?;
    let mut fp = FilteredParams::zero();
    let t = pulse.duration;
    if t == 0.0 {
        return Ok(fp);
    }
    if let PsdModel::White { level } = psd {
        // C(τ) = S₀δ(τ): the filter integrals are elementary and the
        // non-decaying tail makes quadrature pointless.
        let (th, om) = (pulse.area(), pulse.omega_rabi);
        fp.gamma1 = 0.5 * level * t;
        fp.gamma2 = level * (2.0 * th).sin() / (4.0 * om);
        fp.delta2 = level * th.sin().powi(2) / (2.0 * om);
    } else if !psd.is_zero() {
        let scale = psd.peak() * t;
        fp.gamma1 = scale * dimensionless_freq_integral(psd, FilterKind::G1, pulse, quad)?;
        fp.delta1 = scale * dimensionless_freq_integral(psd, FilterKind::D1, pulse, quad)?;
        fp.gamma2 = scale * dimensionless_freq_integral(psd, FilterKind::G2, pulse, quad)?;
        fp.delta2 = scale * dimensionless_freq_integral(psd, FilterKind::D2, pulse, quad)?;
    }
    if let Some(amp) = amplitude {
        amp.validate()?;
        if let PsdModel::White { level } = amp {
            fp.delta_gamma1 = level * t;
        } else if !amp.is_zero() {
            fp.delta_gamma1 =
                amp.peak() * t * dimensionless_freq_integral(amp, FilterKind::Amp, pulse, quad)?;
        }
    }
    Ok(fp)
}

fn lag_breakpoints(corr: Option<f64>, t: f64) -> Vec<f64> {
    match corr {
        Some(tc) => [1.0, 5.0, 20.0]
            .iter()
            .map(|k| k * tc / t)
            .filter(|v| *v < 1.0)
            .collect(),
        None => Vec::new(),
    }
}

/// Breakpoints on `[lo, hi]`: correlation scales measured back from `anchor` and oscillation periods.
fn segment_points(lo: f64, hi: f64, anchor_lags: &[f64], period: Option<f64>) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    for l in anchor_lags {
        let p = hi - l;
        if p > lo {
            pts.push(p);
        }
    }
    if let Some(per) = period {
        if (hi - lo) / per <= 4000.0 {
            let mut p = lo + per;
            while p < hi {
                pts.push(p);
                p += per;
            }
        }
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    pts
}

fn oscillation_period(theta: f64) -> Option<f64> {
    if theta > 2.0 * PI {
        Some(2.0 * PI / theta)
    } else {
        None
    }
}

/// `∫₀^a C̃(t(a−b)) k(a,b) db` in units where the pulse lasts 1.
fn inner_integral<K: Fn(f64, f64) -> f64>(
    cov: &dyn Covariance,
    c0: f64,
    t: f64,
    a: f64,
    kernel: &K,
    lags: &[f64],
    period: Option<f64>,
    tol: Tolerance,
) -> Result<f64> {
    if a <= 0.0 {
        return Ok(0.0);
    }
    let pts = segment_points(0.0, a, lags, period);
    let r = quad::integrate_points(|b| cov.eval(t * (a - b)) / c0 * kernel(a, b), &pts, tol)?;
    Ok(r.value)
}

fn nested_integral<K: Fn(f64, f64) -> f64>(
    cov: &dyn Covariance,
    c0: f64,
    t: f64,
    theta: f64,
    kernel: K,
    quad: &QuadConfig,
) -> Result<f64> {
    let lags = lag_breakpoints(cov.correlation_time(), t);
    let period = oscillation_period(theta);
    let inner_tol = quad.inner();
    let mut failure = None;
    let mut outer_pts = vec![0.0, 1.0];
    outer_pts.extend(lags.iter().cloned());
    if let Some(per) = period {
        if 1.0 / per <= 4000.0 {
            let mut p = per;
            while p < 1.0 {
                outer_pts.push(p);
                p += per;
            }
        }
    }
    outer_pts.sort_by(|a, b| a.total_cmp(b));
    outer_pts.dedup();
    let r = quad::integrate_points(
        |a| match inner_integral(cov, c0, t, a, &kernel, &lags, period, inner_tol) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        &outer_pts,
        quad.tolerance(),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r.value)
}

/// Filtered integrals by nested quadrature of the covariance.
pub fn filtered_params_time(
    cov: &dyn Covariance,
    amplitude: Option<&dyn Covariance>,
    pulse: &PulseSpec,
    quad: &QuadConfig,
) -> Result<FilteredParams> {
    pulse.validate()?;
    let t = pulse.duration;
    let theta = pulse.area();
    let mut fp = FilteredParams::zero();
    if t == 0.0 {
        return Ok(fp);
    }
    let c0 = cov.eval(0.0);
    if c0 != 0.0 {
        let s = c0 * t * t;
        fp.gamma1 = s * nested_integral(cov, c0, t, theta, |a, b| (theta * (a - b)).cos(), quad)?;
        fp.delta1 = s * nested_integral(cov, c0, t, theta, |a, b| (theta * (a - b)).sin(), quad)?;
        fp.gamma2 = s * nested_integral(cov, c0, t, theta, |a, b| (theta * (a + b)).cos(), quad)?;
        fp.delta2 = s * nested_integral(cov, c0, t, theta, |a, b| (theta * (a + b)).sin(), quad)?;
    }
    if let Some(amp) = amplitude {
        let c0 = amp.eval(0.0);
        if c0 != 0.0 {
            fp.delta_gamma1 =
                2.0 * c0 * t * t * nested_integral(amp, c0, t, 0.0, |_, _| 1.0, quad)?;
        }
    }
    Ok(fp)
}

/// `Θ² = Δ1² − Δ2² − Γ2²` with the two even functions of Θ the channel needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValue {
    pub radicand: f64,
    /// `|Θ|` (of the real or imaginary root).
    pub magnitude: f64,
    /// `cos(Θ/2)`, or `cosh(|Θ|/2)` for a negative radicand.
    pub cos_half: f64,
    /// `sin(Θ/2)/Θ`, or `sinh(|Θ|/2)/|Θ|` for a negative radicand.
    pub sinc_half: f64,
}

pub fn theta(fp: &FilteredParams) -> ThetaValue {
    let radicand = fp.delta1 * fp.delta1 - fp.delta2 * fp.delta2 - fp.gamma2 * fp.gamma2;
    let m = radicand.abs().sqrt();
    let h = 0.5 * m;
    let (cos_half, sinc_half) = if radicand == 0.0 {
        (1.0, 0.5)
    } else if radicand > 0.0 {
        let s = if m < 1e-4 {
            0.5 - m * m / 48.0 + m.powi(4) / 3840.0
        } else {
            h.sin() / m
        };
        (h.cos(), s)
    } else {
        let s = if m < 1e-4 {
            0.5 + m * m / 48.0 + m.powi(4) / 3840.0
        } else {
            h.sinh() / m
        };
        (h.cosh(), s)
    };
    ThetaValue {
        radicand,
        magnitude: m,
        cos_half,
        sinc_half,
    }
}

/// Time-local rates at `t′` (in pulse units `a = t′/t`), scaled by `t·C(0)`.
fn local_rates(
    cov: &dyn Covariance,
    c0: f64,
    t: f64,
    theta: f64,
    a: f64,
    lags: &[f64],
    period: Option<f64>,
    tol: Tolerance,
) -> Result<(f64, f64, f64)> {
    let g1 = inner_integral(cov, c0, t, a, &|a: f64, b: f64| (theta * (a - b)).cos(), lags, period, tol)?;
    let g2 = inner_integral(cov, c0, t, a, &|a: f64, b: f64| (theta * (a + b)).cos(), lags, period, tol)?;
    let d2 = inner_integral(cov, c0, t, a, &|a: f64, b: f64| (theta * (a + b)).sin(), lags, period, tol)?;
    Ok((g1, g2, d2))
}

/// CP-divisibility violation `∫₀ᵗ max(−γ̄₋, 0) dt′`, `γ̄₋ = ½γ1 − ½√(γ2²+δ2²)`.
pub fn non_markovianity(cov: &dyn Covariance, pulse: &PulseSpec, quad: &QuadConfig) -> Result<f64> {
    pulse.validate()?;
    let t = pulse.duration;
    let c0 = cov.eval(0.0);
    if t == 0.0 || c0 == 0.0 {
        return Ok(0.0);
    }
    let theta = pulse.area();
    let lags = lag_breakpoints(cov.correlation_time(), t);
    let period = oscillation_period(theta);
    let inner_tol = quad.inner();
    let mut failure = None;
    let mut pts = vec![0.0, 1.0];
    pts.extend(lags.iter().cloned());
    pts.sort_by(|a, b| a.total_cmp(b));
    let r = quad::integrate_points(
        |a| match local_rates(cov, c0, t, theta, a, &lags, period, inner_tol) {
            Ok((g1, g2, d2)) => {
                let minus = 0.5 * g1 - 0.5 * g2.hypot(d2);
                (-minus).max(0.0)
            }
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        &pts,
        quad.tolerance(),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(c0 * t * t * r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gfun_series_matches_direct_form() {
        for z in [0.49f64, 0.3, 0.1, -0.2] {
            let direct = (z.sin() - z) / (z * z);
            assert!((gfun(z) - direct).abs() < 1e-14, "z={z}");
        }
        assert_eq!(gfun(0.0), 0.0);
    }

    #[test]
    fn theta_limits() {
        let t = theta(&FilteredParams::markovian(0.1, -0.3));
        assert!((t.magnitude - 0.3).abs() < 1e-15);
        let t = theta(&FilteredParams {
            gamma2: 0.1,
            ..FilteredParams::zero()
        });
        assert!((t.cos_half - 0.05f64.cosh()).abs() < 1e-15);
        assert!((t.sinc_half - 0.05f64.sinh() / 0.1).abs() < 1e-15);
        assert_eq!(theta(&FilteredParams::zero()).sinc_half, 0.5);
    }

    #[test]
    fn theta_series_is_continuous() {
        for m in [0.99e-4f64, 1.01e-4] {
            let t = theta(&FilteredParams::markovian(0.0, m));
            assert!((t.sinc_half - (0.5 * m).sin() / m).abs() < 1e-15);
        }
    }
}
