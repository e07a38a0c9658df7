use cgst_core::channels::{
    self, chi_blocks, chi_blocks_unchecked, chi_to_ptm, cptp_check, fiducial_trace_distances,
    gate_ptm, gate_trace_distance, general_channel_distance, ideal_unitary, pauli, process_matrix,
    ptm_to_chi, unitary_ptm, ChannelDump, Phase, C64,
};
use cgst_core::gateset::scaled_gate_ptm;
use cgst_core::{FilteredParams, Ptm, PulseSpec};
use nalgebra::{Matrix2, Matrix4, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};

const OMEGA: f64 = 2.0 * PI * 1e6;

fn pulse(area: f64, phi: f64) -> PulseSpec {
    PulseSpec::new(OMEGA, area / OMEGA, phi)
}

fn max_abs4(m: &Matrix4<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn max_abs2(m: &Matrix2<C64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.norm()))
}

fn random_fp(rng: &mut ChaCha8Rng, markov: bool) -> FilteredParams {
    let g1 = rng.random_range(0.0..0.2);
    let s = if markov { 0.0 } else { 0.3 * g1 };
    FilteredParams {
        gamma1: g1,
        gamma2: rng.random_range(-s..=s),
        delta1: rng.random_range(-0.3..0.3),
        delta2: rng.random_range(-s..=s),
        delta_gamma1: if markov { 0.0 } else { rng.random_range(0.0..0.05) },
    }
}

#[test]
fn zero_noise_blocks() {
    for area in [0.3, FRAC_PI_2, PI, 2.4] {
        let b = chi_blocks(&FilteredParams::zero(), &pulse(area, 0.0)).unwrap();
        let r = |x: f64| C64::new(x, 0.0);
        let expect = pauli(0) * r(2.0) + pauli(3) * r(2.0 * area.cos()) - pauli(2) * r(2.0 * area.sin());
        assert!(max_abs2(&(b.chi_a - expect)) < 1e-14);
        assert!(max_abs2(&b.chi_b) < 1e-14);
    }
}

#[test]
fn strong_decay_blocks_tend_to_identity() {
    let fp = FilteredParams { gamma1: 60.0, gamma2: 3.0, delta1: 0.4, delta2: -2.0, delta_gamma1: 0.0 };
    let b = chi_blocks(&fp, &pulse(PI, 0.0)).unwrap();
    assert!(max_abs2(&(b.chi_a - pauli(0))) < 1e-12);
    assert!(max_abs2(&(b.chi_b - pauli(0))) < 1e-12);
}

#[test]
fn negative_rates_are_rejected() {
    let p = pulse(PI, 0.0);
    assert!(chi_blocks(&FilteredParams::markovian(-0.1, 0.0), &p).is_err());
    let fp = FilteredParams { delta_gamma1: -1e-3, ..FilteredParams::zero() };
    assert!(chi_blocks(&fp, &p).is_err());
}

#[test]
fn process_matrix_is_hermitian_and_trace_preserving() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let fp = random_fp(&mut rng, false);
        let area = if rng.random_bool(0.5) { PI } else { FRAC_PI_2 };
        let phi = FRAC_PI_2 * rng.random_range(0..4) as f64;
        let chi = channels::gate_chi(&fp, &pulse(area, phi)).unwrap();
        let h = chi.0 - chi.0.adjoint();
        assert!(h.iter().all(|v| v.norm() < 1e-13));
        let rep = cptp_check(&chi);
        assert!(rep.tp_violation < 1e-12, "tp {}", rep.tp_violation);
        assert!((chi.0.trace().re - 2.0).abs() < 1e-12);
    }
}

#[test]
fn pi_pulse_flips_ground_state() {
    let ptm = gate_ptm(&FilteredParams::zero(), &pulse(PI, 0.0)).unwrap();
    let expect = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, -1.0, -1.0));
    assert!(max_abs4(&(ptm.0 - expect)) < 1e-14);
    let ground = Matrix2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let out = ptm.apply_operator(&ground);
    assert!((out[(1, 1)].re - 1.0).abs() < 1e-14 && out[(0, 0)].norm() < 1e-14);
}

#[test]
fn phase_layouts_reproduce_ideal_rotations() {
    for k in 0..4 {
        let phi = FRAC_PI_2 * k as f64;
        for area in [PI, FRAC_PI_2, 1.1] {
            let ptm = gate_ptm(&FilteredParams::zero(), &pulse(area, phi)).unwrap();
            let ideal = unitary_ptm(&ideal_unitary(area, phi));
            assert!(max_abs4(&(ptm.0 - ideal.0)) < 1e-13, "phi {phi} area {area}");
        }
    }
    assert!(Phase::from_radians(0.3).is_err());
    assert_eq!(Phase::from_radians(-FRAC_PI_2).unwrap(), Phase::ThreeHalfPi);
}

#[test]
fn chi_ptm_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let fp = random_fp(&mut rng, false);
        let phi = FRAC_PI_2 * rng.random_range(0..4) as f64;
        let chi = channels::gate_chi(&fp, &pulse(PI, phi)).unwrap();
        let back = ptm_to_chi(&chi_to_ptm(&chi));
        assert!((back.0 - chi.0).iter().all(|v| v.norm() < 1e-12));
    }
}

#[test]
fn cptp_check_flags_negative_relaxation() {
    let p = pulse(PI, 0.0);
    let ideal = cptp_check(&channels::gate_chi(&FilteredParams::zero(), &p).unwrap());
    assert!(ideal.passes(1e-12));
    let bad = process_matrix(Phase::Zero, &chi_blocks_unchecked(&FilteredParams::markovian(-0.1, 0.0), &p));
    assert!(cptp_check(&bad).min_eigenvalue < -1e-3);
    let good = channels::gate_chi(&FilteredParams::markovian(0.01, 0.05), &p).unwrap();
    assert!(cptp_check(&good).passes(1e-10));
}

#[test]
fn amplitude_noise_damps_dressed_coherences() {
    let d = 0.08;
    let fp = FilteredParams { delta_gamma1: d, ..FilteredParams::zero() };
    let ptm = gate_ptm(&fp, &pulse(FRAC_PI_2, 0.0)).unwrap();
    // φ = 0 drives about x, so x is the dressed-state population axis.
    assert!((ptm.0[(1, 1)] - 1.0).abs() < 1e-14);
    let yz = ptm.0.fixed_view::<2, 2>(2, 2);
    assert!((yz.determinant() - (-d).exp()).abs() < 1e-14);
    let ideal = unitary_ptm(&ideal_unitary(FRAC_PI_2, 0.0));
    let scaled = ideal.0.fixed_view::<2, 2>(2, 2) * (-0.5 * d).exp();
    assert!((yz - scaled).abs().max() < 1e-14);
}

#[test]
fn closed_form_gate_distance_examples() {
    let a = FilteredParams::zero();
    assert!(gate_trace_distance(&a, &a).abs() < 1e-15);
    for delta in [0.01, 0.3, 1.0, 2.5] {
        let b = FilteredParams::markovian(0.0, delta);
        assert!((gate_trace_distance(&a, &b) - (delta / 4.0).sin().abs()).abs() < 1e-14);
    }
    let b = FilteredParams::markovian(50.0, 0.0);
    assert!((gate_trace_distance(&a, &b) - 0.75).abs() < 1e-10);
}

#[test]
fn closed_form_gate_distance_matches_choi_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let a = random_fp(&mut rng, true);
        let b = random_fp(&mut rng, true);
        for (area, phi) in [(PI, 0.0), (FRAC_PI_2, FRAC_PI_2), (PI, 1.5 * PI)] {
            let p = pulse(area, phi);
            let choi = general_channel_distance(&gate_ptm(&a, &p).unwrap(), &gate_ptm(&b, &p).unwrap());
            let closed = gate_trace_distance(&a, &b);
            assert!((choi - closed).abs() < 1e-10, "{choi} vs {closed}");
        }
    }
}

fn traceless_trace_norm(m: Matrix2<C64>) -> f64 {
    let tr = m.trace() * C64::new(0.5, 0.0);
    let t = m - pauli(0) * tr;
    let h = (t + t.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().map(|v| v.abs()).sum()
}

#[test]
fn fiducial_distances() {
    let r = [0.0, 0.0, 1.0];
    let e = [1.0, 0.0, 0.0, 1.0];
    assert_eq!(fiducial_trace_distances(&r, &r, &e, &e), (0.0, 0.0));
    let (tr, tm) = fiducial_trace_distances(&r, &[0.0, 0.0, -1.0], &e, &[1.0, 0.0, 0.0, -1.0]);
    assert!((tr - 2.0).abs() < 1e-15 && (tm - 2.0).abs() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let half = C64::new(0.5, 0.0);
    let op = |v0: f64, v: [f64; 3]| {
        (pauli(0) * C64::new(v0, 0.0)
            + pauli(1) * C64::new(v[0], 0.0)
            + pauli(2) * C64::new(v[1], 0.0)
            + pauli(3) * C64::new(v[2], 0.0))
            * half
    };
    for _ in 0..100 {
        let ra: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.57..0.57));
        let rb: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.57..0.57));
        let ea: [f64; 4] = [1.0, rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let eb: [f64; 4] = [1.0, rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let (tr, tm) = fiducial_trace_distances(&ra, &rb, &ea, &eb);
        let dense_r = traceless_trace_norm(op(1.0, ra) - op(1.0, rb));
        let dense_m = traceless_trace_norm(op(ea[0], [ea[1], ea[2], ea[3]]) - op(eb[0], [eb[1], eb[2], eb[3]]));
        assert!((tr - dense_r).abs() < 1e-12);
        assert!((tm - dense_m).abs() < 1e-12);
    }
}

#[test]
fn general_distance_properties() {
    let id = Ptm::identity();
    let x = unitary_ptm(&ideal_unitary(PI, 0.0));
    assert!(general_channel_distance(&id, &id).abs() < 1e-14);
    assert!((general_channel_distance(&id, &x) - 1.0).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let chans: Vec<Ptm> = (0..3)
            .map(|_| {
                let fp = random_fp(&mut rng, false);
                let phi = FRAC_PI_2 * rng.random_range(0..4) as f64;
                gate_ptm(&fp, &pulse(PI, phi)).unwrap()
            })
            .collect();
        let d = |i: usize, j: usize| general_channel_distance(&chans[i], &chans[j]);
        assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
        assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
        assert!(chans[0].is_trace_preserving(1e-12));
    }
}

#[test]
fn gate_powers_match_scaled_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let mut fp = random_fp(&mut rng, true);
        fp.gamma1 *= 0.05;
        fp.delta1 *= 0.05;
        fp.delta_gamma1 = rng.random_range(0.0..2e-3);
        for (area, phi) in [(PI, 0.0), (FRAC_PI_2, FRAC_PI_2), (FRAC_PI_2, PI)] {
            let p = pulse(area, phi);
            let g = gate_ptm(&fp, &p).unwrap();
            for n in [1u32, 2, 3, 8, 17, 64] {
                let lhs = g.pow(n);
                let rhs = scaled_gate_ptm(&fp, &p, n as f64).unwrap();
                assert!(max_abs4(&(lhs.0 - rhs.0)) < 1e-10, "p = {n}");
            }
        }
    }
}

#[test]
fn spectra_distinguish_parameters() {
    let p = pulse(PI, 0.0);
    let spec = |fp: &FilteredParams| {
        let m = gate_ptm(fp, &p).unwrap().0;
        let mut ev: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.norm()).collect();
        ev.sort_by(f64::total_cmp);
        ev
    };
    let a = spec(&FilteredParams::markovian(0.01, 0.02));
    let b = spec(&FilteredParams::markovian(0.02, 0.02));
    let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    assert!(diff > 1e-3);
}

#[test]
fn channel_dump_round_trip() {
    let fp = FilteredParams { gamma1: 0.02, gamma2: 0.004, delta1: 0.1, delta2: -0.003, delta_gamma1: 0.01 };
    let chi = channels::gate_chi(&fp, &pulse(FRAC_PI_2, PI)).unwrap();
    let ptm = chi_to_ptm(&chi);
    for dump in [ChannelDump::from(&chi), ChannelDump::from(&ptm)] {
        let s = serde_json::to_string(&dump).unwrap();
        let back: ChannelDump = serde_json::from_str(&s).unwrap();
        assert!(max_abs4(&(back.to_ptm().unwrap().0 - ptm.0)) < 1e-14);
    }
    let bad = ChannelDump { basis: "computational".into(), representation: "ptm".into(), entries: vec![0.0; 16] };
    assert!(bad.to_ptm().is_err());
}
