//! Circuits, designs, datasets and fiducial pair selection.
//!
//! A circuit prepares ρ₀, applies an optional preparation fiducial, a germ
//! gate repeated `p` times and an optional measurement fiducial, then measures
//! the binary POVM `{M₀, 𝟙 − M₀}`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::channels::Ptm;
use crate::error::{Error, Result};
use crate::gateset::{Duration, FpField, GateId, GateSet, ModelVariant, ParamKind};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Circuit {
    pub prep: Option<GateId>,
    pub germ: GateId,
    pub reps: u32,
    pub meas: Option<GateId>,
}

impl Circuit {
    pub fn new(prep: Option<GateId>, germ: GateId, reps: u32, meas: Option<GateId>) -> Self {
        Self {
            prep,
            germ,
            reps,
            meas,
        }
    }

    pub fn with_reps(&self, reps: u32) -> Self {
        Self { reps, ..*self }
    }

    /// Number of gates in the circuit.
    pub fn len(&self) -> usize {
        self.reps as usize + self.prep.is_some() as usize + self.meas.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gates in time order.
    pub fn gates(&self) -> impl Iterator<Item = GateId> + '_ {
        self.prep
            .into_iter()
            .chain(std::iter::repeat_n(self.germ, self.reps as usize))
            .chain(self.meas)
    }
}

fn fid(g: Option<GateId>) -> String {
    g.map_or_else(|| "-".to_string(), |g| g.to_string())
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{}^{};{}", fid(self.prep), self.germ, self.reps, fid(self.meas))
    }
}

impl FromStr for Circuit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad circuit {s:?}"));
        let parts: Vec<&str> = s.trim().split(';').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let opt = |p: &str| -> Result<Option<GateId>> {
            if p == "-" {
                Ok(None)
            } else {
                p.parse().map(Some)
            }
        };
        let (germ, reps) = parts[1].split_once('^').ok_or_else(bad)?;
        let reps: u32 = reps.parse().map_err(|_| bad())?;
        if reps == 0 {
            return Err(bad());
        }
        Ok(Circuit::new(opt(parts[0])?, germ.parse()?, reps, opt(parts[2])?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Plus,
    Minus,
}

/// Gate PTMs plus fiducial vectors, ready for probability evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub gates: [Matrix4<f64>; 5],
    pub rho: Vector4<f64>,
    pub meas: Vector4<f64>,
}

impl Prepared {
    pub fn new(gates: [Matrix4<f64>; 5], rho: Vector4<f64>, meas: Vector4<f64>) -> Self {
        Self { gates, rho, meas }
    }

    pub fn from_gateset(gs: &GateSet) -> Result<Self> {
        let g = gs.gate_ptms()?;
        Ok(Self::new(g.map(|p| p.0), gs.rho_vec(), gs.meas_vec()))
    }

    /// Like [`Prepared::from_gateset`] but evaluates the channel formulas
    /// outside the physical region too (finite differences at a boundary).
    pub fn from_gateset_unchecked(gs: &GateSet) -> Self {
        let g = gs.gate_ptms_unchecked();
        Self::new(g.map(|p| p.0), gs.rho_vec(), gs.meas_vec())
    }

    /// Output state of the circuit before measurement.
    pub fn output_state(&self, c: &Circuit) -> Vector4<f64> {
        let mut v = self.rho;
        for g in c.gates() {
            v = self.gates[g.index()] * v;
        }
        v
    }

    pub fn plus_probability(&self, c: &Circuit) -> f64 {
        self.meas.dot(&self.output_state(c))
    }

    pub fn probability(&self, c: &Circuit, outcome: Outcome) -> f64 {
        let v = self.output_state(c);
        match outcome {
            Outcome::Plus => self.meas.dot(&v),
            Outcome::Minus => {
                let id = Vector4::new(std::f64::consts::SQRT_2, 0.0, 0.0, 0.0);
                (id - self.meas).dot(&v)
            }
        }
    }

    pub fn plus_probabilities(&self, circuits: &[Circuit]) -> Vec<f64> {
        circuits.iter().map(|c| self.plus_probability(c)).collect()
    }
}

pub fn circuit_probability(gs: &GateSet, c: &Circuit, outcome: Outcome) -> Result<f64> {
    Ok(Prepared::from_gateset(gs)?.probability(c, outcome))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub circuits: Vec<Circuit>,
    pub depth_schedule: Vec<u32>,
    pub shots_per_circuit: u64,
}

impl Design {
    /// Replicate base circuits over the depth schedule. Circuits flagged as not
    /// amplified appear at depth 1 only.
    pub fn from_base(base: &[Circuit], amplified: &[bool], schedule: &[u32], shots: u64) -> Result<Self> {
        validate_schedule(schedule)?;
        let mut circuits = Vec::new();
        for &p in schedule {
            for (c, &amp) in base.iter().zip(amplified) {
                if amp || p == 1 {
                    circuits.push(c.with_reps(p));
                }
            }
        }
        Ok(Design {
            circuits,
            depth_schedule: schedule.to_vec(),
            shots_per_circuit: shots,
        })
    }

    pub fn max_depth(&self) -> u32 {
        self.depth_schedule.last().copied().unwrap_or(1)
    }

    pub fn total_shots(&self) -> u64 {
        self.shots_per_circuit * self.circuits.len() as u64
    }

    /// Indices of circuits whose germ power is at most `depth`.
    pub fn indices_up_to(&self, depth: u32) -> Vec<usize> {
        (0..self.circuits.len())
            .filter(|&i| self.circuits[i].reps <= depth)
            .collect()
    }
}

fn validate_schedule(schedule: &[u32]) -> Result<()> {
    if schedule.first() != Some(&1) {
        return Err(Error::InvalidParameter("depth schedule must start at 1".into()));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("depth schedule must increase strictly".into()));
    }
    Ok(())
}

/// `{1, 2, 4, …}` up to `max_p`; a `max_p` that is not a power of two is appended.
pub fn depth_schedule(max_p: u32) -> Result<Vec<u32>> {
    if max_p == 0 {
        return Err(Error::InvalidParameter("max_p must be >= 1".into()));
    }
    let mut v = Vec::new();
    let mut p = 1u32;
    while p <= max_p {
        v.push(p);
        match p.checked_mul(2) {
            Some(q) => p = q,
            None => break,
        }
    }
    if *v.last().unwrap() != max_p {
        v.push(max_p);
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub shots: u64,
    pub plus: u64,
}

impl Counts {
    pub fn frequency(&self) -> f64 {
        if self.shots == 0 {
            0.5
        } else {
            self.plus as f64 / self.shots as f64
        }
    }
}

/// Observed counts, aligned with the circuits of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<Counts>,
}

impl Dataset {
    pub fn validate(&self, design: &Design) -> Result<()> {
        if self.records.len() != design.circuits.len() {
            return Err(Error::LengthMismatch {
                expected: design.circuits.len(),
                got: self.records.len(),
            });
        }
        if let Some(r) = self.records.iter().find(|r| r.plus > r.shots) {
            return Err(Error::InvalidParameter(format!("plus count {} exceeds shots {}", r.plus, r.shots)));
        }
        Ok(())
    }
}

/// Header of the line-oriented design/dataset files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataHeader {
    pub variant: String,
    pub omega_rabi: f64,
    pub t_pi: f64,
    pub t_half: f64,
    pub seed: u64,
    pub depth_schedule: Vec<u32>,
}

/// Render `prep;germ^p;meas  shots  plus_counts` lines with a `#` header.
/// Without a dataset the counts column is omitted.
pub fn write_text(header: &DataHeader, design: &Design, data: Option<&Dataset>) -> String {
    let mut s = String::new();
    let sched: Vec<String> = header.depth_schedule.iter().map(|p| p.to_string()).collect();
    s.push_str(&format!(
        "# variant={} omega_rabi={:e} t_pi={:e} t_half={:e} seed={} schedule={}\n",
        header.variant,
        header.omega_rabi,
        header.t_pi,
        header.t_half,
        header.seed,
        sched.join(",")
    ));
    for (i, c) in design.circuits.iter().enumerate() {
        match data {
            Some(d) => s.push_str(&format!("{}  {}  {}\n", c, d.records[i].shots, d.records[i].plus)),
            None => s.push_str(&format!("{}  {}\n", c, design.shots_per_circuit)),
        }
    }
    s
}

pub fn read_text(text: &str) -> Result<(DataHeader, Design, Option<Dataset>)> {
    let bad = |m: &str| Error::InvalidParameter(format!("dataset text: {m}"));
    let mut header = None;
    let mut circuits = Vec::new();
    let mut records = Vec::new();
    let mut shots_seen = None;
    let mut with_counts = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let mut kv = std::collections::HashMap::new();
            for tok in h.split_whitespace() {
                if let Some((k, v)) = tok.split_once('=') {
                    kv.insert(k.to_string(), v.to_string());
                }
            }
            if kv.contains_key("variant") {
                let num = |k: &str| -> Result<f64> {
                    kv.get(k).ok_or_else(|| bad(k))?.parse().map_err(|_| bad(k))
                };
                let schedule = kv
                    .get("schedule")
                    .ok_or_else(|| bad("schedule"))?
                    .split(',')
                    .map(|p| p.parse::<u32>().map_err(|_| bad("schedule")))
                    .collect::<Result<Vec<_>>>()?;
                header = Some(DataHeader {
                    variant: kv["variant"].clone(),
                    omega_rabi: num("omega_rabi")?,
                    t_pi: num("t_pi")?,
                    t_half: num("t_half")?,
                    seed: kv.get("seed").ok_or_else(|| bad("seed"))?.parse().map_err(|_| bad("seed"))?,
                    depth_schedule: schedule,
                });
            }
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 2 || cols.len() > 3 {
            return Err(bad(line));
        }
        let has = cols.len() == 3;
        if *with_counts.get_or_insert(has) != has {
            return Err(bad("mixed rows with and without counts"));
        }
        circuits.push(cols[0].parse::<Circuit>()?);
        let shots: u64 = cols[1].parse().map_err(|_| bad(line))?;
        shots_seen.get_or_insert(shots);
        if has {
            let plus: u64 = cols[2].parse().map_err(|_| bad(line))?;
            records.push(Counts { shots, plus });
        }
    }
    let header = header.ok_or_else(|| bad("missing header"))?;
    let design = Design {
        circuits,
        depth_schedule: header.depth_schedule.clone(),
        shots_per_circuit: shots_seen.unwrap_or(0),
    };
    let data = if with_counts == Some(true) {
        let d = Dataset { records };
        d.validate(&design)?;
        Some(d)
    } else {
        None
    };
    Ok((header, design, data))
}

/// Finite-difference derivatives of `PTM(G)^p / p` with respect to Γ1 and Δ1
/// of each duration, in the order (Γ1 π, Δ1 π, Γ1 π/2, Δ1 π/2).
pub fn amplification_gradient(gs: &GateSet, germ: GateId, p: u32) -> Vec<(Duration, FpField, Matrix4<f64>)> {
    let h = 1e-6;
    let mut out = Vec::new();
    for d in [Duration::Pi, Duration::Half] {
        for f in [FpField::Gamma1, FpField::Delta1] {
            let eval = |x: f64| {
                let mut g = gs.clone();
                f.set(g.fp_mut(d), x);
                Ptm(g.gate_ptms_unchecked()[germ.index()].0).pow(p).0
            };
            let x0 = f.get(gs.fp(d));
            let m = (eval(x0 + h) - eval(x0 - h)) / (2.0 * h * p as f64);
            out.push((d, f, m));
        }
    }
    out
}

pub const PREP_FIDUCIALS: [Option<GateId>; 4] = [None, Some(GateId::G1), Some(GateId::G2), Some(GateId::G3)];
pub const MEAS_FIDUCIALS: [Option<GateId>; 5] = [
    None,
    Some(GateId::G2),
    Some(GateId::G3),
    Some(GateId::G4),
    Some(GateId::G5),
];

/// All (prep, germ, meas) triples at depth 1, in lexicographic order.
pub fn candidate_circuits() -> Vec<Circuit> {
    let mut v = Vec::new();
    for prep in PREP_FIDUCIALS {
        for meas in MEAS_FIDUCIALS {
            for germ in GateId::ALL {
                v.push(Circuit::new(prep, germ, 1, meas));
            }
        }
    }
    v
}

/// Packed-parameter direction of the SPAM rescaling `(r, e⃗) → (λr, e⃗/λ)` at `gs`.
pub fn spam_gauge_direction(gs: &GateSet) -> Vec<f64> {
    let mut n = vec![0.0; gs.variant.n_params()];
    n[..3].copy_from_slice(&gs.r);
    for k in 1..4 {
        n[3 + k] = -gs.e[k];
    }
    n
}

/// Jacobian of plus-probabilities with respect to the packed parameters.
pub fn probability_jacobian(gs: &GateSet, circuits: &[Circuit], step: f64) -> DMatrix<f64> {
    let pulses = gs.pulses();
    let variant = gs.variant;
    linalg::central_jacobian(
        |x| {
            let g = GateSet::unpack(x, variant, pulses).expect("length matches");
            Prepared::from_gateset_unchecked(&g).plus_probabilities(circuits)
        },
        &gs.pack(),
        step,
    )
}

/// Rank of a probability Jacobian after removing the SPAM rescaling direction.
pub fn gauge_aware_rank(jac: &DMatrix<f64>, gauge: &[f64]) -> usize {
    linalg::rank(&linalg::project_out_rows(jac, gauge), 1e-9)
}

/// Outcome of per-parameter fiducial pair selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// One depth-1 circuit per parameter, in parameter order.
    pub base: Vec<Circuit>,
    /// Whether the circuit is repeated over the depth schedule.
    pub amplified: Vec<bool>,
    /// |∂p/∂θ_k| of the selected circuit.
    pub sensitivity: Vec<f64>,
    /// Remaining candidates by decreasing best sensitivity, for circuit-count sweeps.
    pub extras: Vec<Circuit>,
}

impl Selection {
    pub fn design(&self, schedule: &[u32], shots: u64) -> Result<Design> {
        Design::from_base(&self.base, &self.amplified, schedule, shots)
    }

    /// Base circuits by decreasing sensitivity followed by the extras.
    pub fn sensitivity_order(&self) -> Vec<(Circuit, bool)> {
        let mut idx: Vec<usize> = (0..self.base.len()).collect();
        idx.sort_by(|&a, &b| self.sensitivity[b].total_cmp(&self.sensitivity[a]).then(a.cmp(&b)));
        let mut v: Vec<(Circuit, bool)> = idx.iter().map(|&i| (self.base[i], self.amplified[i])).collect();
        v.extend(self.extras.iter().map(|c| (*c, true)));
        v
    }
}

fn germs_for(kind: ParamKind) -> Vec<GateId> {
    match kind {
        ParamKind::Spam(_) => GateId::ALL.to_vec(),
        ParamKind::Filtered(d, _) => GateId::ALL.iter().copied().filter(|g| g.duration() == d).collect(),
    }
}

fn select_params(
    gs: &GateSet,
    params: &[usize],
    chosen: &mut Vec<Circuit>,
    sens: &mut Vec<f64>,
) -> Result<()> {
    let eps = 1e-4;
    let candidates = candidate_circuits();
    let jac_all = probability_jacobian(gs, &candidates, eps);
    // Some parameters (Γ₂ of the π/2 pulses) are only visible through their
    // coupling to Δ₁; score those at a slightly noisy reference point.
    let probe_jac = probability_jacobian(&probe_point(gs), &candidates, eps);
    let gauge = spam_gauge_direction(gs);
    let row_of = |c: &Circuit| candidates.iter().position(|x| x == c).expect("candidate");
    let names = gs.variant.param_names();
    for &k in params {
        let germs = germs_for(gs.variant.param_kind(k));
        let score = |jac: &DMatrix<f64>| -> Vec<(f64, usize)> {
            candidates
                .iter()
                .enumerate()
                .filter(|(_, c)| germs.contains(&c.germ))
                .map(|(i, _)| (jac[(i, k)].abs(), i))
                .collect()
        };
        let mut scored = score(&jac_all);
        let mut top = scored.iter().map(|s| s.0).fold(0.0, f64::max);
        if !(top > 1e-10) {
            scored = score(&probe_jac);
            top = scored.iter().map(|s| s.0).fold(0.0, f64::max);
        }
        if !(top > 1e-10) {
            return Err(Error::DegenerateDesign(format!("parameter {} has no sensitivity", names[k])));
        }
        // Sort by sensitivity, ties (relative 1e-9) broken by (prep, meas, germ).
        scored.sort_by(|a, b| {
            let (ca, cb) = (&candidates[a.1], &candidates[b.1]);
            let tie = (a.0 - b.0).abs() <= 1e-9 * top;
            if tie {
                (ca.prep, ca.meas, ca.germ).cmp(&(cb.prep, cb.meas, cb.germ))
            } else {
                b.0.total_cmp(&a.0)
            }
        });
        let current_rank = |rows: &[usize]| {
            let m = DMatrix::from_fn(rows.len(), jac_all.ncols(), |i, j| jac_all[(rows[i], j)]);
            gauge_aware_rank(&m, &gauge)
        };
        let rows: Vec<usize> = chosen.iter().map(row_of).collect();
        let base_rank = if rows.is_empty() { 0 } else { current_rank(&rows) };
        let unused: Vec<&(f64, usize)> = scored
            .iter()
            .filter(|(s, i)| *s > 1e-10 && !chosen.contains(&candidates[*i]))
            .collect();
        let pick = unused
            .iter()
            .find(|(_, i)| {
                let mut r = rows.clone();
                r.push(*i);
                current_rank(&r) > base_rank
            })
            .or_else(|| unused.first())
            .ok_or_else(|| Error::DegenerateDesign(format!("no unused circuit for {}", names[k])))?;
        chosen.push(candidates[pick.1]);
        sens.push(pick.0);
    }
    Ok(())
}

/// `gs` with every modelled filtered integral at least `1e-3` in magnitude.
fn probe_point(gs: &GateSet) -> GateSet {
    let mut g = gs.clone();
    for d in [Duration::Pi, Duration::Half] {
        for f in gs.variant.fields() {
            let v = f.get(gs.fp(d));
            if v.abs() < 1e-3 {
                f.set(g.fp_mut(d), 1e-3);
            }
        }
    }
    g
}

/// Pick one circuit per model parameter by maximal sensitivity at `gs`,
/// skipping pairs that add no information beyond the ones already chosen.
pub fn select_base_circuits(gs: &GateSet, variant: ModelVariant) -> Result<Selection> {
    let mut base = Vec::new();
    let mut sens = Vec::new();
    let markov_variant = if variant.has_amplitude() {
        ModelVariant::MarkovianAmplitude
    } else {
        ModelVariant::Markovian
    };
    let gm = gs.with_variant(markov_variant);
    let n_m = markov_variant.n_params();
    select_params(&gm, &(0..n_m).collect::<Vec<_>>(), &mut base, &mut sens)?;
    let mut amplified = vec![true; base.len()];
    if !variant.is_markovian() {
        let gn = gs.with_variant(variant);
        let extra: Vec<usize> = (0..variant.n_params())
            .filter(|&k| matches!(variant.param_kind(k), ParamKind::Filtered(_, FpField::Gamma2 | FpField::Delta2)))
            .collect();
        select_params(&gn, &extra, &mut base, &mut sens)?;
        amplified.resize(base.len(), false);
    }
    // remaining candidates, ranked by their largest sensitivity to any parameter
    let gv = gs.with_variant(variant);
    let candidates = candidate_circuits();
    let jac = probability_jacobian(&gv, &candidates, 1e-4);
    let mut rest: Vec<(f64, Circuit)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| !base.contains(c))
        .map(|(i, c)| ((0..jac.ncols()).map(|j| jac[(i, j)].abs()).fold(0.0, f64::max), *c))
        .collect();
    rest.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(Selection {
        base,
        amplified,
        sensitivity: sens,
        extras: rest.into_iter().map(|(_, c)| c).collect(),
    })
}

/// The minimal design: one circuit per parameter at depth 1.
pub fn select_fiducial_pairs(gs: &GateSet, variant: ModelVariant) -> Result<Design> {
    let sel = select_base_circuits(gs, variant)?;
    let base_design = sel.design(&[1], 1)?;
    let gv = gs.with_variant(variant);
    let jac = probability_jacobian(&gv, &base_design.circuits, 1e-4);
    let needed = variant.n_params() - 1;
    if gauge_aware_rank(&jac, &spam_gauge_direction(&gv)) < needed {
        return Err(Error::DegenerateDesign("selected circuits are not informationally complete".into()));
    }
    Ok(base_design)
}

/// Gram matrix `g_{ij} = ⟨⟨E_i|ρ_j⟩⟩` of the measurement effects after the
/// meas fiducials and the states after the prep fiducials.
pub fn gram_matrix(prep: &Prepared) -> DMatrix<f64> {
    let states: Vec<Vector4<f64>> = PREP_FIDUCIALS
        .iter()
        .map(|f| f.map_or(prep.rho, |g| prep.gates[g.index()] * prep.rho))
        .collect();
    let effects: Vec<Vector4<f64>> = MEAS_FIDUCIALS
        .iter()
        .map(|f| f.map_or(prep.meas, |g| prep.gates[g.index()].transpose() * prep.meas))
        .collect();
    DMatrix::from_fn(effects.len(), states.len(), |i, j| effects[i].dot(&states[j]))
}

/// Parameters of the general model: 5 × 12 free PTM entries plus 7 SPAM values.
pub const GENERAL_PARAMS: usize = 67;
/// Dimension of the trace-preserving gauge group.
pub const GENERAL_GAUGE_DIM: usize = 12;

/// Pack a prepared model into the 67 general parameters: rows 1..3 of each
/// gate PTM, then r, then e (both rescaled from Pauli coordinates).
pub fn general_pack(p: &Prepared) -> Vec<f64> {
    let mut v = Vec::with_capacity(GENERAL_PARAMS);
    for g in &p.gates {
        for i in 1..4 {
            for j in 0..4 {
                v.push(g[(i, j)]);
            }
        }
    }
    let s = std::f64::consts::SQRT_2;
    for k in 1..4 {
        v.push(p.rho[k] * s);
    }
    for k in 0..4 {
        v.push(p.meas[k] * s);
    }
    v
}

pub fn general_unpack(v: &[f64]) -> Prepared {
    assert_eq!(v.len(), GENERAL_PARAMS);
    let mut gates = [Matrix4::zeros(); 5];
    for (n, g) in gates.iter_mut().enumerate() {
        g[(0, 0)] = 1.0;
        for i in 1..4 {
            for j in 0..4 {
                g[(i, j)] = v[n * 12 + (i - 1) * 4 + j];
            }
        }
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rho = Vector4::new(1.0, v[60], v[61], v[62]) * s;
    let meas = Vector4::new(v[63], v[64], v[65], v[66]) * s;
    Prepared::new(gates, rho, meas)
}

/// Greedy selection of depth-1 circuits for the general model. Each step adds
/// the candidate that raises the Jacobian rank and, among those, maximizes the
/// smallest nonzero singular value; it stops when no candidate adds rank.
/// Returns the circuits in selection order and the reached rank.
pub fn general_design_circuits(gs_ideal: &GateSet, target_count: Option<usize>) -> Result<(Vec<Circuit>, usize)> {
    let prep = Prepared::from_gateset(gs_ideal)?;
    let x0 = general_pack(&prep);
    let candidates = candidate_circuits();
    let jac = linalg::central_jacobian(
        |x| general_unpack(x).plus_probabilities(&candidates),
        &x0,
        1e-5,
    );
    let max_rank = linalg::rank(&jac, 1e-9);
    let mut chosen: Vec<usize> = Vec::new();
    let mut rank = 0;
    let limit = target_count.unwrap_or(usize::MAX);
    while rank < max_rank && chosen.len() < limit {
        let mut best: Option<(usize, f64, usize)> = None;
        for i in 0..candidates.len() {
            if chosen.contains(&i) {
                continue;
            }
            let mut rows = chosen.clone();
            rows.push(i);
            let m = DMatrix::from_fn(rows.len(), jac.ncols(), |a, b| jac[(rows[a], b)]);
            let s = linalg::singular_values(&m);
            let r = s.iter().filter(|v| **v > 1e-9 * s[0]).count();
            let smallest = if r > 0 { s[r - 1] } else { 0.0 };
            let better = match best {
                None => true,
                Some((br, bs, _)) => r > br || (r == br && smallest > bs * (1.0 + 1e-12)),
            };
            if better {
                best = Some((r, smallest, i));
            }
        }
        match best {
            Some((r, _, i)) if r > rank => {
                chosen.push(i);
                rank = r;
            }
            _ => break,
        }
    }
    Ok((chosen.iter().map(|&i| candidates[i]).collect(), rank))
}

pub fn general_design(gs_ideal: &GateSet, target_count: Option<usize>, schedule: &[u32], shots: u64) -> Result<Design> {
    let (base, _) = general_design_circuits(gs_ideal, target_count)?;
    Design::from_base(&base, &vec![true; base.len()], schedule, shots)
}
