//! Linear-inversion tomography: state tomography, process tomography with
//! known fiducials, and gauge-dependent linear GST from the Gram matrix.
//!
//! All vectors are normalized Pauli coordinates, so `p = ⟨⟨E|ρ⟩⟩ = eᵀr`.

use nalgebra::{DMatrix, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::design::{Prepared, PREP_FIDUCIALS};
use crate::error::{Error, Result};
use crate::gateset::GateId;
use crate::linalg;

/// Measurement fiducials used by linear GST: `{∅, G2, G3, G4}`.
pub const GST_MEAS_FIDUCIALS: [Option<GateId>; 4] = [None, Some(GateId::G2), Some(GateId::G3), Some(GateId::G4)];

const RANK_TOL: f64 = 1e-10;

fn pseudo_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if linalg::rank(a, RANK_TOL) < a.ncols() {
        return Err(Error::RankDeficient(format!("{what} is not informationally complete")));
    }
    let ata = a.transpose() * a;
    let rhs = a.transpose() * b;
    ata.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::RankDeficient(what.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    /// Pauli coordinates of ρ̂.
    pub coords: Vec<f64>,
    /// Bloch vector `√2·(coords[1..])`.
    pub bloch: [f64; 3],
    /// `|r| > 1`: the linear estimate is not a density matrix.
    pub nonphysical: bool,
}

/// Least-squares state estimate from outcome frequencies `f` of effects whose
/// coordinates are the rows of `effects`.
pub fn linear_qst(freqs: &[f64], effects: &DMatrix<f64>) -> Result<StateEstimate> {
    if effects.ncols() != 4 {
        return Err(Error::InvalidParameter("effects must have 4 columns".into()));
    }
    if freqs.len() != effects.nrows() {
        return Err(Error::LengthMismatch {
            expected: effects.nrows(),
            got: freqs.len(),
        });
    }
    let f = DMatrix::from_column_slice(freqs.len(), 1, freqs);
    let x = pseudo_solve(effects, &f, "POVM")?;
    let s = std::f64::consts::SQRT_2;
    let bloch = [x[1] * s, x[2] * s, x[3] * s];
    let norm = bloch.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(StateEstimate {
        coords: x.iter().cloned().collect(),
        bloch,
        nonphysical: norm > 1.0 + 1e-12,
    })
}

/// The six-outcome Pauli POVM `(𝟙 ± σ_k)/2`, k = x, y, z, as coordinate rows.
pub fn pauli_povm() -> DMatrix<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::zeros(6, 4);
    for k in 0..3 {
        for (n, sign) in [1.0, -1.0].into_iter().enumerate() {
            m[(2 * k + n, 0)] = s;
            m[(2 * k + n, k + 1)] = sign * s;
        }
    }
    m
}

/// Process estimate from `F = A G B`, with effect rows `A` and state columns `B`.
pub fn linear_qpt(f: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Matrix4<f64>> {
    if a.ncols() != 4 || b.nrows() != 4 || f.nrows() != a.nrows() || f.ncols() != b.ncols() {
        return Err(Error::InvalidParameter("inconsistent tomography shapes".into()));
    }
    let left = pseudo_solve(a, f, "effects")?;
    // right inverse of B through the transposed problem
    let g = pseudo_solve(&b.transpose(), &left.transpose(), "states")?.transpose();
    Ok(Matrix4::from_fn(|i, j| g[(i, j)]))
}

/// Linear-GST inputs: `F_k[μ][s] = ⟨⟨E_μ|G_k|ρ_s⟩⟩`, the Gram matrix
/// `g[μ][s] = ⟨⟨E_μ|ρ_s⟩⟩`, `R0[μ] = ⟨⟨E_μ|ρ₀⟩⟩` and `Q0[s] = ⟨⟨M₀|ρ_s⟩⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct GstData {
    pub f: [Matrix4<f64>; 5],
    pub gram: Matrix4<f64>,
    pub r0: Vector4<f64>,
    pub q0: Vector4<f64>,
}

/// Exact linear-GST data for a model, using prep fiducials `{∅, G1, G2, G3}`
/// and measurement fiducials `{∅, G2, G3, G4}`.
pub fn gst_data(model: &Prepared) -> GstData {
    let states: Vec<Vector4<f64>> = PREP_FIDUCIALS
        .iter()
        .map(|f| f.map_or(model.rho, |g| model.gates[g.index()] * model.rho))
        .collect();
    let effects: Vec<Vector4<f64>> = GST_MEAS_FIDUCIALS
        .iter()
        .map(|f| f.map_or(model.meas, |g| model.gates[g.index()].transpose() * model.meas))
        .collect();
    let f = model
        .gates
        .map(|g| Matrix4::from_fn(|m, s| effects[m].dot(&(g * states[s]))));
    GstData {
        f,
        gram: Matrix4::from_fn(|m, s| effects[m].dot(&states[s])),
        r0: Vector4::from_fn(|m, _| effects[m].dot(&model.rho)),
        q0: Vector4::from_fn(|s, _| model.meas.dot(&states[s])),
    }
}

/// Gauge-dependent estimate `Ĝ_k = g⁻¹F_k`, `ρ̂ = g⁻¹R0`, `M̂ = Q0`.
/// With `B` the matrix of prepared states this is the true model in the
/// gauge `T = B⁻¹`, so gate spectra are recovered exactly.
pub fn linear_gst(data: &GstData) -> Result<Prepared> {
    let cond = {
        let sv = linalg::singular_values(&DMatrix::from_fn(4, 4, |i, j| data.gram[(i, j)]));
        sv[3] / sv[0]
    };
    if !(cond > 1e-12) {
        return Err(Error::SingularGram);
    }
    let inv = data.gram.try_inverse().ok_or(Error::SingularGram)?;
    Ok(Prepared::new(data.f.map(|f| inv * f), inv * data.r0, data.q0))
}
