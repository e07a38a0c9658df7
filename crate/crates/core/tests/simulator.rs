use cgst_core::channels::gate_ptm;
use cgst_core::design::{Prepared, PREP_FIDUCIALS};
use cgst_core::filters::filtered_params_freq;
use cgst_core::gateset::{Pulses, DEFAULT_OMEGA_RABI};
use cgst_core::simulator::{
    analytic_dataset, exact_dataset, mc_dataset, mc_gate_channel, mc_gate_channels, mc_prepared, sample_counts,
    McMode,
};
use cgst_core::{Circuit, Design, FilteredParams, GateId, GateSet, ModelVariant, NoiseConfig, OuParams, PsdModel, QuadConfig};

fn pulses() -> Pulses {
    Pulses::from_rabi(DEFAULT_OMEGA_RABI)
}

fn noise(tau: f64, c: f64, amp: Option<(f64, f64)>, n_traj: usize) -> NoiseConfig {
    NoiseConfig {
        phase: OuParams::new(tau, c).unwrap(),
        amplitude: amp.map(|(t, c)| OuParams::new(t, c).unwrap()),
        mc_dt: None,
        n_traj,
    }
}

fn predicted(noise: &NoiseConfig, g: GateId) -> cgst_core::Ptm {
    let pulse = pulses().pulse(g);
    let amp = noise.amplitude.map(PsdModel::lorentzian);
    let fp = filtered_params_freq(&PsdModel::lorentzian(noise.phase), amp.as_ref(), &pulse, &QuadConfig::default()).unwrap();
    gate_ptm(&fp, &pulse).unwrap()
}

/// Largest |MC − closed form| in units of the MC standard error.
fn max_z(noise: &NoiseConfig, g: GateId, seed: u64) -> f64 {
    let mc = mc_gate_channel(noise, &pulses().pulse(g), seed).unwrap();
    let want = predicted(noise, g);
    let mut z: f64 = 0.0;
    for i in 1..4 {
        for j in 1..4 {
            let d = (mc.ptm.0[(i, j)] - want.0[(i, j)]).abs();
            z = z.max(d / mc.stderr[(i, j)].max(1e-12));
        }
    }
    z
}

#[test]
fn monte_carlo_matches_filtered_channel() {
    let settings = [
        noise(5e-6, 2e3, None, 100_000),
        noise(5e-6, 1e13, None, 100_000),
        noise(5e-6, 2e3, Some((5e-6, 1e11)), 100_000),
    ];
    for (k, n) in settings.iter().enumerate() {
        for g in [GateId::G1, GateId::G2, GateId::G4] {
            let z = max_z(n, g, 100 + k as u64);
            assert!(z < 3.0, "setting {k} gate {g}: {z:.2} standard errors");
        }
    }
}

#[test]
fn monte_carlo_is_trace_preserving_and_unital() {
    let n = noise(2e-5, 1e13, Some((2e-5, 1e12)), 2000);
    let mc = mc_gate_channel(&n, &pulses().pulse(GateId::G3), 1).unwrap();
    assert!(mc.ptm.is_trace_preserving(1e-14));
    assert!((1..4).all(|i| mc.ptm.0[(i, 0)].abs() < 1e-14));
    assert_eq!(mc.n_traj, 2000);
}

#[test]
fn zero_noise_gives_ideal_gates() {
    let n = noise(1e-5, 0.0, None, 10);
    let ideal = GateSet::ideal(pulses(), ModelVariant::Markovian).unwrap();
    let ch = mc_gate_channels(&n, &pulses(), 3).unwrap();
    for g in GateId::ALL {
        let want = ideal.gate_ptm(g).unwrap();
        assert!((ch[g.index()].ptm.0 - want.0).abs().max() < 1e-12);
        assert!(ch[g.index()].stderr.abs().max() < 1e-12);
    }
}

#[test]
fn monte_carlo_is_deterministic() {
    let n = noise(2e-5, 1e13, Some((2e-5, 1e12)), 3000);
    let p = pulses().pulse(GateId::G1);
    let a = mc_gate_channel(&n, &p, 9).unwrap();
    let b = mc_gate_channel(&n, &p, 9).unwrap();
    let c = mc_gate_channel(&n, &p, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.ptm, c.ptm);
}

#[test]
fn halving_the_step_changes_nothing_significant() {
    let mut n = noise(5e-5, 1e13, None, 20_000);
    let p = pulses().pulse(GateId::G2);
    let coarse = mc_gate_channel(&n, &p, 4).unwrap();
    n.mc_dt = Some(n.dt(p.omega_rabi) / 2.0);
    let fine = mc_gate_channel(&n, &p, 4).unwrap();
    for i in 1..4 {
        for j in 1..4 {
            let se = coarse.stderr[(i, j)].hypot(fine.stderr[(i, j)]).max(1e-12);
            assert!((coarse.ptm.0[(i, j)] - fine.ptm.0[(i, j)]).abs() < 4.0 * se);
        }
    }
    n.mc_dt = Some(1e-3);
    assert!(mc_gate_channel(&n, &p, 4).is_err());
}

fn noisy_gateset() -> GateSet {
    let mut gs = GateSet::ideal(pulses(), ModelVariant::Markovian).unwrap();
    gs.fp_pi = FilteredParams::markovian(0.02, 0.01);
    gs.fp_half = FilteredParams::markovian(0.01, -0.02);
    gs
}

fn all_circuits(reps: u32) -> Vec<Circuit> {
    let mut v = Vec::new();
    for prep in PREP_FIDUCIALS {
        for g in GateId::ALL {
            v.push(Circuit::new(prep, g, reps, None));
        }
    }
    v
}

#[test]
fn shot_counts_are_binomial() {
    let gs = noisy_gateset();
    let prep = Prepared::from_gateset(&gs).unwrap();
    let design = Design {
        circuits: [all_circuits(1), all_circuits(7)].concat(),
        depth_schedule: vec![1, 7],
        shots_per_circuit: 10_000,
    };
    let data = analytic_dataset(&gs, &design, 77).unwrap();
    assert_eq!(data, sample_counts(&prep, &design, 77));
    for (c, r) in design.circuits.iter().zip(&data.records) {
        let p = prep.plus_probability(c);
        let n = r.shots as f64;
        let sd = (n * p * (1.0 - p)).sqrt();
        assert!((r.plus as f64 - n * p).abs() <= 5.0 * sd + 1e-9, "{c}");
    }

    let ideal = Prepared::from_gateset(&GateSet::ideal(pulses(), ModelVariant::Markovian).unwrap()).unwrap();
    let flip = Design {
        circuits: vec![Circuit::new(None, GateId::G1, 1, None), Circuit::new(None, GateId::G1, 2, None)],
        depth_schedule: vec![1, 2],
        shots_per_circuit: 100_000,
    };
    let d = sample_counts(&ideal, &flip, 5);
    assert_eq!((d.records[0].plus, d.records[1].plus), (0, 100_000));

    let exact = exact_dataset(&prep, &design, 1_000_000);
    for (c, r) in design.circuits.iter().zip(&exact.records) {
        assert!((r.frequency() - prep.plus_probability(c)).abs() <= 5e-7);
    }
}

#[test]
fn monte_carlo_datasets_agree_with_channel_predictions() {
    let n = noise(2e-5, 1e13, Some((2e-5, 1e12)), 20_000);
    let shots = 2_000;
    let design = Design {
        circuits: [all_circuits(1), all_circuits(3)].concat(),
        depth_schedule: vec![1, 3],
        shots_per_circuit: shots,
    };
    let mut fp = [FilteredParams::zero(); 2];
    for (k, g) in [GateId::G1, GateId::G2].into_iter().enumerate() {
        let pulse = pulses().pulse(g);
        let amp = n.amplitude.map(PsdModel::lorentzian);
        fp[k] = filtered_params_freq(&PsdModel::lorentzian(n.phase), amp.as_ref(), &pulse, &QuadConfig::default()).unwrap();
    }
    let mut gs = GateSet::ideal(pulses(), ModelVariant::NonMarkovianAmplitude).unwrap();
    gs.fp_pi = fp[0];
    gs.fp_half = fp[1];
    let prep = Prepared::from_gateset(&gs).unwrap();

    let chans = mc_gate_channels(&n, &pulses(), 12).unwrap();
    let mcp = mc_prepared(&chans);
    for mode in [McMode::TwoStage, McMode::PerShot] {
        let data = mc_dataset(&n, &pulses(), &design, 12, mode).unwrap();
        assert_eq!(data, mc_dataset(&n, &pulses(), &design, 12, mode).unwrap());
        for (c, r) in design.circuits.iter().zip(&data.records) {
            let p = prep.plus_probability(c);
            let sd = (p * (1.0 - p) / shots as f64).sqrt().max(1.0 / shots as f64);
            assert!((r.frequency() - p).abs() < 4.0 * sd, "{mode:?} {c}: {} vs {p}", r.frequency());
            if mode == McMode::TwoStage {
                assert!((mcp.plus_probability(c) - p).abs() < 4.0 * sd);
            }
        }
    }
}
