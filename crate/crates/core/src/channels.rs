//! Channel representations for the noisy gates.
//!
//! Operators are expanded in the orthonormal Pauli basis `E_α = σ_α/√2`,
//! ordered `(I, X, Y, Z)`. A process matrix `χ` acts as
//! `ℰ(ρ) = Σ χ_{αβ} E_α ρ E_β†`, and the Pauli transfer matrix is
//! `R_{αβ} = Tr{E_α ℰ(E_β)}`. In this normalization the identity channel has
//! `χ = diag(2, 0, 0, 0)`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::sync::OnceLock;

use nalgebra::{Complex, DMatrix, Matrix2, Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{theta, FilteredParams, PulseSpec};

pub type C64 = Complex<f64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn pauli(k: usize) -> Matrix2<C64> {
    match k {
        0 => Matrix2::new(ONE, ZERO, ZERO, ONE),
        1 => Matrix2::new(ZERO, ONE, ONE, ZERO),
        2 => Matrix2::new(ZERO, -I, I, ZERO),
        3 => Matrix2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index out of range"),
    }
}

/// `E_k = σ_k/√2`.
pub fn basis(k: usize) -> Matrix2<C64> {
    pauli(k) * C64::new(FRAC_1_SQRT_2, 0.0)
}

/// Drive phases available to the gate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Zero,
    HalfPi,
    Pi,
    ThreeHalfPi,
}

impl Phase {
    pub fn from_radians(phi: f64) -> Result<Self> {
        let k = phi.rem_euclid(2.0 * PI) / FRAC_PI_2;
        let r = k.round();
        if (k - r).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "drive phase {phi} is not a multiple of π/2"
            )));
        }
        Ok(match r as i64 % 4 {
            0 => Phase::Zero,
            1 => Phase::HalfPi,
            2 => Phase::Pi,
            _ => Phase::ThreeHalfPi,
        })
    }

    pub fn radians(self) -> f64 {
        match self {
            Phase::Zero => 0.0,
            Phase::HalfPi => FRAC_PI_2,
            Phase::Pi => PI,
            Phase::ThreeHalfPi => 3.0 * FRAC_PI_2,
        }
    }
}

/// The two 2×2 blocks of the process matrix in the dressed-state frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiBlocks {
    pub chi_a: Matrix2<C64>,
    pub chi_b: Matrix2<C64>,
}

/// χ in the normalized Pauli basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessMatrix(pub Matrix4<C64>);

/// Pauli transfer matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ptm(pub Matrix4<f64>);

/// Blocks without the physicality check, for probing nonphysical inputs.
pub fn chi_blocks_unchecked(fp: &FilteredParams, pulse: &PulseSpec) -> ChiBlocks {
    let area = pulse.area();
    let (s, c) = area.sin_cos();
    let th = theta(fp);
    let (ch, sc) = (th.cos_half, th.sinc_half);
    let decay = (-fp.gamma1).exp();
    let a = (-0.5 * (fp.gamma1 + fp.delta_gamma1)).exp();
    let id = pauli(0);
    let re = |x: f64| C64::new(x, 0.0);

    let kz = 2.0 * a * (c * ch - fp.delta1 * sc * s);
    let ky = -2.0 * a * (s * ch + fp.delta1 * sc * c);
    let chi_a = id * re(1.0 + decay) + pauli(3) * re(kz) + pauli(2) * re(ky);

    let lz = -2.0 * a * sc * (fp.gamma2 * c + fp.delta2 * s);
    let lx = -2.0 * a * sc * (fp.gamma2 * s - fp.delta2 * c);
    let chi_b = id * re(1.0 - decay) + pauli(3) * re(lz) + pauli(1) * re(lx);
    ChiBlocks { chi_a, chi_b }
}

pub fn chi_blocks(fp: &FilteredParams, pulse: &PulseSpec) -> Result<ChiBlocks> {
    if !(fp.gamma1 >= 0.0) {
        return Err(Error::NonphysicalParameter(format!("gamma1 = {} < 0", fp.gamma1)));
    }
    if !(fp.delta_gamma1 >= 0.0) {
        return Err(Error::NonphysicalParameter(format!(
            "delta_gamma1 = {} < 0",
            fp.delta_gamma1
        )));
    }
    Ok(chi_blocks_unchecked(fp, pulse))
}

/// Place the blocks according to the drive phase.
pub fn process_matrix(phase: Phase, blocks: &ChiBlocks) -> ProcessMatrix {
    let a = &blocks.chi_a;
    let b = &blocks.chi_b;
    let mut m = Matrix4::<C64>::zeros();
    match phase {
        Phase::Zero | Phase::Pi => {
            for i in 0..2 {
                for j in 0..2 {
                    m[(i, j)] = a[(i, j)];
                    m[(i + 2, j + 2)] = b[(i, j)];
                }
            }
            if phase == Phase::Pi {
                for i in 0..4 {
                    for j in 0..4 {
                        if i != j {
                            m[(i, j)] = -m[(i, j)];
                        }
                    }
                }
            }
        }
        Phase::HalfPi | Phase::ThreeHalfPi => {
            let sa = if phase == Phase::HalfPi { -ONE } else { ONE };
            let sb = -sa;
            m[(0, 0)] = a[(0, 0)];
            m[(0, 2)] = sa * a[(0, 1)];
            m[(2, 0)] = sa * a[(1, 0)];
            m[(2, 2)] = a[(1, 1)];
            m[(1, 1)] = b[(0, 0)];
            m[(1, 3)] = sb * b[(0, 1)];
            m[(3, 1)] = sb * b[(1, 0)];
            m[(3, 3)] = b[(1, 1)];
        }
    }
    ProcessMatrix(m * C64::new(0.5, 0.0))
}

/// `T[m][a][n][b] = Tr(E_m E_a E_n E_b†)`, flattened.
fn trace_table() -> &'static [C64; 256] {
    static TABLE: OnceLock<[C64; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let e: Vec<Matrix2<C64>> = (0..4).map(basis).collect();
        let mut t = [ZERO; 256];
        for m in 0..4 {
            for a in 0..4 {
                for n in 0..4 {
                    for b in 0..4 {
                        let p = e[m] * e[a] * e[n] * e[b].adjoint();
                        t[((m * 4 + a) * 4 + n) * 4 + b] = p.trace();
                    }
                }
            }
        }
        t
    })
}

/// Linear map vec(χ) → vec(R) and its inverse, indices row-major.
fn superop_maps() -> &'static (DMatrix<C64>, DMatrix<C64>) {
    static MAPS: OnceLock<(DMatrix<C64>, DMatrix<C64>)> = OnceLock::new();
    MAPS.get_or_init(|| {
        let t = trace_table();
        let mut fwd = DMatrix::<C64>::zeros(16, 16);
        for m in 0..4 {
            for n in 0..4 {
                for a in 0..4 {
                    for b in 0..4 {
                        fwd[(m * 4 + n, a * 4 + b)] = t[((m * 4 + a) * 4 + n) * 4 + b];
                    }
                }
            }
        }
        let inv = fwd.clone().try_inverse().expect("superoperator map is invertible");
        (fwd, inv)
    })
}

pub fn chi_to_ptm(chi: &ProcessMatrix) -> Ptm {
    let t = trace_table();
    let mut r = Matrix4::<f64>::zeros();
    for m in 0..4 {
        for n in 0..4 {
            let mut s = ZERO;
            for a in 0..4 {
                for b in 0..4 {
                    let c = chi.0[(a, b)];
                    if c != ZERO {
                        s += c * t[((m * 4 + a) * 4 + n) * 4 + b];
                    }
                }
            }
            r[(m, n)] = s.re;
        }
    }
    Ptm(r)
}

pub fn ptm_to_chi(ptm: &Ptm) -> ProcessMatrix {
    let (_, inv) = superop_maps();
    let v = DMatrix::<C64>::from_fn(16, 1, |k, _| C64::new(ptm.0[(k / 4, k % 4)], 0.0));
    let x = inv * v;
    ProcessMatrix(Matrix4::from_fn(|a, b| x[(a * 4 + b, 0)]))
}

/// Apply a channel to a state given by its Pauli-basis coordinates.
pub fn ptm_apply(ptm: &Ptm, state: &Vector4<f64>) -> Vector4<f64> {
    ptm.0 * state
}

/// PTM of the unitary channel `ρ ↦ UρU†`.
pub fn unitary_ptm(u: &Matrix2<C64>) -> Ptm {
    let ud = u.adjoint();
    Ptm(Matrix4::from_fn(|m, n| {
        (basis(m) * u * basis(n) * ud).trace().re
    }))
}

/// Operator with Pauli-basis coordinates `v`.
pub fn operator_from_coords(v: &Vector4<f64>) -> Matrix2<C64> {
    (0..4).fold(Matrix2::zeros(), |acc, k| acc + basis(k) * C64::new(v[k], 0.0))
}

pub fn coords_from_operator(op: &Matrix2<C64>) -> Vector4<C64> {
    Vector4::from_fn(|k, _| (basis(k) * op).trace())
}

impl Ptm {
    pub fn identity() -> Self {
        Ptm(Matrix4::identity())
    }

    pub fn compose(&self, first: &Ptm) -> Ptm {
        Ptm(self.0 * first.0)
    }

    pub fn pow(&self, p: u32) -> Ptm {
        let mut acc = Matrix4::identity();
        let mut base = self.0;
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        Ptm(acc)
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        (self.0[(0, 0)] - 1.0).abs() <= tol && (1..4).all(|j| self.0[(0, j)].abs() <= tol)
    }

    /// Apply the channel to an operator.
    pub fn apply_operator(&self, op: &Matrix2<C64>) -> Matrix2<C64> {
        let v = coords_from_operator(op);
        let r = self.0.map(|x| C64::new(x, 0.0)) * v;
        (0..4).fold(Matrix2::zeros(), |acc, k| acc + basis(k) * r[k])
    }

    /// Choi state `(1/2)Σ ℰ(|i⟩⟨j|) ⊗ |i⟩⟨j|`, unit trace for TP channels.
    pub fn choi(&self) -> Matrix4<C64> {
        let mut j = Matrix4::<C64>::zeros();
        for i in 0..2 {
            for k in 0..2 {
                let mut e = Matrix2::<C64>::zeros();
                e[(i, k)] = ONE;
                let out = self.apply_operator(&e);
                for r in 0..2 {
                    for c in 0..2 {
                        j[(r * 2 + i, c * 2 + k)] += out[(r, c)] * 0.5;
                    }
                }
            }
        }
        j
    }
}

/// Physicality report for a process matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CptpReport {
    /// Frobenius norm of `Σ χ_{αβ} E_β†E_α − 𝟙`.
    pub tp_violation: f64,
    pub min_eigenvalue: f64,
}

impl CptpReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.tp_violation <= tol && self.min_eigenvalue >= -tol
    }
}

pub fn cptp_check(chi: &ProcessMatrix) -> CptpReport {
    let mut acc = Matrix2::<C64>::zeros();
    for a in 0..4 {
        for b in 0..4 {
            acc += basis(b).adjoint() * basis(a) * chi.0[(a, b)];
        }
    }
    let tp_violation = (acc - pauli(0)).norm();
    let herm = (chi.0 + chi.0.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    CptpReport {
        tp_violation,
        min_eigenvalue,
    }
}

/// Closed-form trace distance between two Markovian gates with the same pulse.
pub fn gate_trace_distance(a: &FilteredParams, b: &FilteredParams) -> f64 {
    let ea = (-a.gamma1).exp();
    let eb = (-b.gamma1).exp();
    let cross = 2.0 * (-0.5 * (a.gamma1 + b.gamma1)).exp() * (0.5 * (a.delta1 - b.delta1)).cos();
    0.25 * (ea - eb).abs() + 0.5 * (ea + eb - cross).max(0.0).sqrt()
}

/// `(‖r_a − r_b‖, ‖e_a[1..] − e_b[1..]‖)`.
pub fn fiducial_trace_distances(r_a: &[f64; 3], r_b: &[f64; 3], e_a: &[f64; 4], e_b: &[f64; 4]) -> (f64, f64) {
    let tr = (0..3).map(|k| (r_a[k] - r_b[k]).powi(2)).sum::<f64>().sqrt();
    let tm = (1..4).map(|k| (e_a[k] - e_b[k]).powi(2)).sum::<f64>().sqrt();
    (tr, tm)
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm4(m: &Matrix4<C64>) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().map(|v| v.abs()).sum()
}

/// Half the trace norm of the Choi-state difference.
pub fn general_channel_distance(a: &Ptm, b: &Ptm) -> f64 {
    0.5 * trace_norm4(&(a.choi() - b.choi()))
}

/// Serialized channel: basis tag, representation tag and row-major entries
/// (`[re, im]` pairs for χ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDump {
    pub basis: String,
    pub representation: String,
    pub entries: Vec<f64>,
}

pub const BASIS_TAG: &str = "pauli-normalized-IXYZ";

impl From<&ProcessMatrix> for ChannelDump {
    fn from(chi: &ProcessMatrix) -> Self {
        let mut entries = Vec::with_capacity(32);
        for i in 0..4 {
            for j in 0..4 {
                entries.push(chi.0[(i, j)].re);
                entries.push(chi.0[(i, j)].im);
            }
        }
        ChannelDump {
            basis: BASIS_TAG.into(),
            representation: "chi".into(),
            entries,
        }
    }
}

impl From<&Ptm> for ChannelDump {
    fn from(p: &Ptm) -> Self {
        ChannelDump {
            basis: BASIS_TAG.into(),
            representation: "ptm".into(),
            entries: (0..16).map(|k| p.0[(k / 4, k % 4)]).collect(),
        }
    }
}

impl ChannelDump {
    pub fn to_ptm(&self) -> Result<Ptm> {
        if self.basis != BASIS_TAG {
            return Err(Error::InvalidParameter(format!("unknown basis tag {}", self.basis)));
        }
        match self.representation.as_str() {
            "ptm" if self.entries.len() == 16 => {
                Ok(Ptm(Matrix4::from_fn(|i, j| self.entries[i * 4 + j])))
            }
            "chi" if self.entries.len() == 32 => {
                let chi = ProcessMatrix(Matrix4::from_fn(|i, j| {
                    let k = 2 * (i * 4 + j);
                    C64::new(self.entries[k], self.entries[k + 1])
                }));
                Ok(chi_to_ptm(&chi))
            }
            other => Err(Error::InvalidParameter(format!(
                "bad channel dump: representation {other} with {} entries",
                self.entries.len()
            ))),
        }
    }
}

/// χ of a gate with given filtered parameters and pulse.
pub fn gate_chi(fp: &FilteredParams, pulse: &PulseSpec) -> Result<ProcessMatrix> {
    let phase = Phase::from_radians(pulse.phase)?;
    Ok(process_matrix(phase, &chi_blocks(fp, pulse)?))
}

pub fn gate_ptm(fp: &FilteredParams, pulse: &PulseSpec) -> Result<Ptm> {
    Ok(chi_to_ptm(&gate_chi(fp, pulse)?))
}

/// The ideal rotation `exp(−iθ/2 (cos φ σx − sin φ σy))`.
pub fn ideal_unitary(area: f64, phi: f64) -> Matrix2<C64> {
    let (s, c) = (0.5 * area).sin_cos();
    let n = pauli(1) * C64::new(phi.cos(), 0.0) - pauli(2) * C64::new(phi.sin(), 0.0);
    pauli(0) * C64::new(c, 0.0) - n * C64::new(0.0, s)
}
