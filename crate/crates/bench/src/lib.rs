//! Shared fixtures for the criterion benchmarks.

use cgst_core::design::select_base_circuits;
use cgst_core::gateset::{GateSet, Pulses, DEFAULT_OMEGA_RABI};
use cgst_core::{Design, FilteredParams, ModelVariant};

pub fn pulses() -> Pulses {
    Pulses::from_rabi(DEFAULT_OMEGA_RABI)
}

/// A mildly noisy gate set in `variant`.
pub fn truth(variant: ModelVariant) -> GateSet {
    let mut gs = GateSet::ideal(pulses(), variant).expect("ideal gate set");
    gs.fp_pi = FilteredParams::markovian(2e-3, 1e-3);
    gs.fp_half = FilteredParams::markovian(1e-3, -5e-4);
    gs
}

pub fn design(variant: ModelVariant, p_max: u32, shots: u64) -> Design {
    let ideal = GateSet::ideal(pulses(), variant).expect("ideal gate set");
    let schedule: Vec<u32> = std::iter::successors(Some(1u32), |p| Some(p * 2)).take_while(|p| *p <= p_max).collect();
    select_base_circuits(&ideal, variant)
        .and_then(|s| s.design(&schedule, shots))
        .expect("design")
}
