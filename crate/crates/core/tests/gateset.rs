use cgst_core::channels::{self, cptp_check};
use cgst_core::gateset::{
    cp_margins, fix_spam_scale, project, project_bloch, project_cp, project_povm, validate_constraints,
    Duration, Pulses, DEFAULT_OMEGA_RABI,
};
use cgst_core::{FilteredParams, GateId, GateSet, ModelVariant};
use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pulses() -> Pulses {
    Pulses::from_rabi(DEFAULT_OMEGA_RABI)
}

fn random_gs(rng: &mut ChaCha8Rng, variant: ModelVariant) -> GateSet {
    let mut gs = GateSet::ideal(pulses(), variant).unwrap();
    gs.r = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(0.5..0.9)];
    gs.e = [rng.random_range(0.9..1.1), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(0.5..0.8)];
    for d in [Duration::Pi, Duration::Half] {
        let g1 = rng.random_range(1e-3..0.05);
        *gs.fp_mut(d) = FilteredParams {
            gamma1: g1,
            gamma2: rng.random_range(-0.2..0.2) * g1,
            delta1: rng.random_range(-0.05..0.05),
            delta2: rng.random_range(-0.2..0.2) * g1,
            delta_gamma1: rng.random_range(0.0..0.01),
        };
    }
    gs.restrict_to_variant();
    gs
}

#[test]
fn packing_lengths_and_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (v, n) in ModelVariant::ALL.into_iter().zip([11, 15, 13, 17]) {
        assert_eq!(v.n_params(), n);
        assert_eq!(v.param_names().len(), n);
        let gs = random_gs(&mut rng, v);
        let theta = gs.pack();
        assert_eq!(theta.len(), n);
        let back = GateSet::unpack(&theta, v, gs.pulses()).unwrap();
        assert_eq!(back, gs);
        assert!(GateSet::unpack(&theta[1..], v, gs.pulses()).is_err());
    }
}

#[test]
fn gate_ids_parse_and_print() {
    for g in GateId::ALL {
        assert_eq!(g.to_string().parse::<GateId>().unwrap(), g);
    }
    assert!("G6".parse::<GateId>().is_err());
    assert_eq!(GateId::G1.duration(), Duration::Pi);
    assert!(GateId::ALL[1..].iter().all(|g| g.duration() == Duration::Half));
}

#[test]
fn constraint_examples() {
    let mut gs = GateSet::ideal(pulses(), ModelVariant::Markovian).unwrap();
    assert!(validate_constraints(&gs).is_feasible(0.0));
    gs.e = [1.0, 0.8, 0.8, 0.0];
    assert!(validate_constraints(&gs).e_cone > 0.0);
    gs.e = [1.0, 0.0, 0.0, 1.0];
    gs.r = [0.6, 0.0, 0.8];
    assert!(validate_constraints(&gs).bloch < 1e-15);
    gs.r = [0.7, 0.0, 0.8];
    assert!(validate_constraints(&gs).bloch > 0.0);
    gs.r = [0.0, 0.0, 1.0];
    gs.fp_half.gamma1 = -0.01;
    assert!(validate_constraints(&gs).gamma1_half > 0.0);
}

#[test]
fn ideal_gates_compose_as_rotations() {
    let gs = GateSet::ideal(pulses(), ModelVariant::Markovian).unwrap();
    let g = gs.gate_ptms().unwrap();
    let id = Matrix4::<f64>::identity();
    assert!((g[1].compose(&g[4]).0 - id).abs().max() < 1e-13);
    assert!((g[2].compose(&g[3]).0 - id).abs().max() < 1e-13);
    assert!((g[0].pow(2).0 - id).abs().max() < 1e-13);
    let m = gs.meas_vec();
    let rho = gs.rho_vec();
    assert!((m.dot(&rho) - 1.0).abs() < 1e-14);
    assert!(m.dot(&(g[0].0 * rho)).abs() < 1e-14);
    for k in 1..5 {
        assert!((m.dot(&(g[k].0 * rho)) - 0.5).abs() < 1e-14);
    }
}

#[test]
fn cp_margins_agree_with_chi_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = pulses();
    for _ in 0..200 {
        let g1 = rng.random_range(0.0..0.1);
        let fp = FilteredParams {
            gamma1: g1,
            gamma2: rng.random_range(-1.0..1.0) * g1,
            delta1: rng.random_range(-0.2..0.2),
            delta2: rng.random_range(-1.0..1.0) * g1,
            delta_gamma1: rng.random_range(0.0..0.02),
        };
        let (a, b) = cp_margins(&fp);
        for g in GateId::ALL {
            let pulse = p.pulse(g);
            let phase = channels::Phase::from_radians(pulse.phase).unwrap();
            let chi = channels::process_matrix(phase, &channels::chi_blocks_unchecked(&fp, &pulse));
            let m = cptp_check(&chi).min_eigenvalue;
            assert!((m - 0.5 * a.min(b)).abs() < 1e-12);
        }
        let mut gs = GateSet::ideal(p, ModelVariant::NonMarkovianAmplitude).unwrap();
        gs.fp_pi = fp;
        gs.fp_half = fp;
        let cp = validate_constraints(&gs).cp;
        assert!((cp - (-0.5 * a.min(b)).max(0.0)).abs() < 1e-12);
    }
}

#[test]
fn cp_projection_is_feasible_and_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let g1 = rng.random_range(0.0..0.05);
        let mut fp = FilteredParams {
            gamma1: g1,
            gamma2: rng.random_range(-3.0..3.0) * g1.max(1e-3),
            delta1: rng.random_range(-0.1..0.1),
            delta2: rng.random_range(-3.0..3.0) * g1.max(1e-3),
            delta_gamma1: 0.0,
        };
        let before = fp;
        project_cp(&mut fp);
        let (a, b) = cp_margins(&fp);
        assert!(a >= 0.0 && b >= 0.0, "{fp:?}");
        assert!(fp.gamma1 >= before.gamma1);
        let mut again = fp;
        project_cp(&mut again);
        assert_eq!(again, fp);
    }
}

#[test]
fn fiducial_projections() {
    let mut e = [1.0, 0.8, 0.8, 0.0];
    project_povm(&mut e);
    let mut gs = GateSet::ideal(pulses(), ModelVariant::Markovian).unwrap();
    gs.e = e;
    assert!(validate_constraints(&gs).is_feasible(1e-12));
    let mut r = [0.0, 3.0, 4.0];
    project_bloch(&mut r);
    assert!((r[1] - 0.6).abs() < 1e-15 && (r[2] - 0.8).abs() < 1e-15);

    gs.r = [0.0, 0.0, 1.2];
    gs.e = [2.4, 0.0, 0.0, 0.1];
    gs.fp_pi.gamma1 = -0.2;
    project(&mut gs);
    assert!(validate_constraints(&gs).is_feasible(1e-12));
}

#[test]
fn spam_rescaling_preserves_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let target = GateSet::ideal(pulses(), ModelVariant::NonMarkovian).unwrap();
    for _ in 0..20 {
        let gs = random_gs(&mut rng, ModelVariant::NonMarkovian);
        let mut fixed = gs.clone();
        fix_spam_scale(&mut fixed, &target);
        assert!(validate_constraints(&fixed).is_feasible(1e-12));
        let g = gs.gate_ptms().unwrap();
        let word = g[1].compose(&g[0]).compose(&g[3]).pow(3);
        let p0 = gs.meas_vec().dot(&(word.0 * gs.rho_vec()));
        let p1 = fixed.meas_vec().dot(&(word.0 * fixed.rho_vec()));
        assert!((p0 - p1).abs() < 1e-13);
    }
}

#[test]
fn variant_restriction_drops_unmodelled_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let gs = random_gs(&mut rng, ModelVariant::NonMarkovianAmplitude);
    let m = gs.with_variant(ModelVariant::Markovian);
    for d in [Duration::Pi, Duration::Half] {
        let fp = m.fp(d);
        assert!(fp.is_markovian() && fp.delta_gamma1 == 0.0);
        assert_eq!(fp.gamma1, gs.fp(d).gamma1);
    }
    let s = serde_json::to_string(&ModelVariant::NonMarkovianAmplitude).unwrap();
    assert_eq!(s, "\"non_markovian_amplitude\"");
}
