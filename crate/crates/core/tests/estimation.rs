use cgst_core::design::{
    general_design, general_pack, general_unpack, select_base_circuits, Prepared, GENERAL_GAUGE_DIM, GENERAL_PARAMS,
};
use cgst_core::estimation::general::apply_gauge;
use cgst_core::estimation::linear::{gst_data, linear_gst, linear_qpt, linear_qst, pauli_povm};
use cgst_core::estimation::{
    benchmark_distance, cost_ls, cost_ml, deviance, gauge_optimize, general_fit, mle_fit, prepared_distance, CostKind,
};
use cgst_core::gateset::{fix_spam_scale, validate_constraints, Pulses, DEFAULT_OMEGA_RABI};
use cgst_core::linalg;
use cgst_core::simulator::{exact_dataset, sample_counts};
use cgst_core::{Design, FilteredParams, FitConfig, GateId, GateSet, ModelVariant};
use nalgebra::{DMatrix, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

const EXACT_SHOTS: u64 = 10_000_000_000;

fn ideal(v: ModelVariant) -> GateSet {
    GateSet::ideal(Pulses::from_rabi(DEFAULT_OMEGA_RABI), v).unwrap()
}

/// A noisy Markovian set in the SPAM-scale representative nearest the ideal one.
fn truth() -> GateSet {
    let mut gs = ideal(ModelVariant::Markovian);
    gs.r = [0.02, -0.01, 0.97];
    gs.e = [0.98, 0.01, -0.02, 0.95];
    gs.fp_pi = FilteredParams::markovian(2e-3, 1e-3);
    gs.fp_half = FilteredParams::markovian(1e-3, -5e-4);
    fix_spam_scale(&mut gs, &ideal(ModelVariant::Markovian));
    gs
}

fn markov_design(schedule: &[u32], shots: u64) -> Design {
    select_base_circuits(&ideal(ModelVariant::Markovian), ModelVariant::Markovian)
        .unwrap()
        .design(schedule, shots)
        .unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn ideal_data_is_a_fixed_point() {
    let gs = ideal(ModelVariant::Markovian);
    let design = markov_design(&[1, 2, 4, 8], EXACT_SHOTS);
    let data = exact_dataset(&Prepared::from_gateset(&gs).unwrap(), &design, EXACT_SHOTS);
    let fit = mle_fit(&design, &data, &FitConfig::parametrized(ModelVariant::Markovian), &gs).unwrap();
    assert!(max_diff(&fit.theta_hat, &gs.pack()) < 1e-8);
}

#[test]
fn recovers_markovian_parameters_from_exact_data() {
    let t = truth();
    let design = markov_design(&[1, 2, 4], EXACT_SHOTS);
    let data = exact_dataset(&Prepared::from_gateset(&t).unwrap(), &design, EXACT_SHOTS);
    let cfg = FitConfig::parametrized(ModelVariant::Markovian);
    let fit = mle_fit(&design, &data, &cfg, &ideal(ModelVariant::Markovian)).unwrap();
    assert!(max_diff(&fit.theta_hat, &t.pack()) < 1e-6, "{:?}", fit.theta_hat);
    assert_eq!(fit.stages.len(), 3);
    assert_eq!(fit.stages[0].cost_kind, CostKind::LeastSquares);
    assert_eq!(fit.stages[2].cost_kind, CostKind::Likelihood);
}

#[test]
fn multi_start_recovery_is_unique() {
    let t = truth();
    let design = markov_design(&[1, 2, 4], EXACT_SHOTS);
    let data = exact_dataset(&Prepared::from_gateset(&t).unwrap(), &design, EXACT_SHOTS);
    let cfg = FitConfig::parametrized(ModelVariant::Markovian);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let starts: Vec<GateSet> = (0..20)
        .map(|_| {
            let mut s = ideal(ModelVariant::Markovian);
            s.r = [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(0.85..0.95)];
            s.e = [rng.random_range(0.95..1.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(0.8..0.9)];
            s.fp_pi = FilteredParams::markovian(rng.random_range(0.0..0.01), rng.random_range(-0.01..0.01));
            s.fp_half = FilteredParams::markovian(rng.random_range(0.0..0.01), rng.random_range(-0.01..0.01));
            assert!(validate_constraints(&s).is_feasible(0.0));
            s
        })
        .collect();
    starts.par_iter().enumerate().for_each(|(k, s)| {
        let mut cfg = cfg.clone();
        cfg.fix_spam_scale = false;
        let fit = mle_fit(&design, &data, &cfg, s).unwrap();
        let mut gs = fit.gateset.unwrap();
        fix_spam_scale(&mut gs, &ideal(ModelVariant::Markovian));
        assert!(max_diff(&gs.pack(), &t.pack()) < 1e-6, "start {k}: {:?}", gs.pack());
    });
}

#[test]
fn sampled_fits_stay_feasible_and_improve_on_init() {
    let t = truth();
    let design = markov_design(&[1, 2, 4, 8, 16], 1000);
    let prep = Prepared::from_gateset(&t).unwrap();
    let init = ideal(ModelVariant::Markovian);
    let init_probs = Prepared::from_gateset(&init).unwrap().plus_probabilities(&design.circuits);
    for v in ModelVariant::ALL {
        for seed in 0..3 {
            let data = sample_counts(&prep, &design, seed);
            let fit = mle_fit(&design, &data, &FitConfig::parametrized(v), &init).unwrap();
            assert!(fit.constraint_residual < 1e-8, "{v:?}");
            assert!(fit.neg_log_likelihood <= cost_ml(&init_probs, &data.records));
            assert_eq!(fit.theta_hat.len(), v.n_params());
        }
    }
}

#[test]
fn later_stages_get_closer_to_the_truth() {
    let t = truth();
    let schedule = [1u32, 2, 4, 8, 16];
    let design = markov_design(&schedule, 1000);
    let prep = Prepared::from_gateset(&t).unwrap();
    let init = ideal(ModelVariant::Markovian);
    let per_seed: Vec<Vec<f64>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let data = sample_counts(&prep, &design, seed);
            (1..=schedule.len())
                .map(|k| {
                    let mut cfg = FitConfig::parametrized(ModelVariant::Markovian);
                    cfg.depth_schedule = schedule[..k].to_vec();
                    let fit = mle_fit(&design, &data, &cfg, &init).unwrap();
                    benchmark_distance(fit.gateset.as_ref().unwrap(), &t, false).unwrap()
                })
                .collect()
        })
        .collect();
    let mean: Vec<f64> = (0..schedule.len())
        .map(|k| per_seed.iter().map(|v| v[k]).sum::<f64>() / per_seed.len() as f64)
        .collect();
    assert!(mean.windows(2).all(|w| w[1] < w[0]), "{mean:?}");
}

#[test]
fn detuning_branches_are_resolved() {
    let t = truth();
    let p_max = 16u32;
    let design = markov_design(&[1, 2, 4, 8, 16], EXACT_SHOTS);
    let data = exact_dataset(&Prepared::from_gateset(&t).unwrap(), &design, EXACT_SHOTS);
    let fit = mle_fit(&design, &data, &FitConfig::parametrized(ModelVariant::Markovian), &ideal(ModelVariant::Markovian)).unwrap();
    let gs = fit.gateset.unwrap();
    let cost = |g: &GateSet| deviance(&Prepared::from_gateset(g).unwrap().plus_probabilities(&design.circuits), &data.records);
    for shift in [2.0 * PI / p_max as f64, -2.0 * PI / p_max as f64] {
        let mut alt = gs.clone();
        alt.fp_half.delta1 += shift;
        assert!(cost(&alt) > cost(&gs) + 1.0);
        let mut alt = gs.clone();
        alt.fp_pi.delta1 += shift;
        assert!(cost(&alt) > cost(&gs) + 1.0);
    }
}

#[test]
fn cost_functions() {
    let counts = [
        cgst_core::design::Counts { shots: 100, plus: 30 },
        cgst_core::design::Counts { shots: 100, plus: 0 },
    ];
    assert!(cost_ls(&[0.3, 0.0], &counts).abs() < 1e-9);
    assert!(cost_ls(&[0.4, 0.0], &counts) > 0.0);
    assert!(cost_ml(&[0.3, 0.0], &counts).is_finite());
    assert!(cost_ml(&[0.3, 1.0], &counts).is_finite());
    assert!(deviance(&[0.3, 0.0], &counts).abs() < 1e-9);
}

#[test]
fn benchmark_distance_examples() {
    let a = ideal(ModelVariant::Markovian);
    assert!(benchmark_distance(&a, &a, true).unwrap().abs() < 1e-15);
    let mut b = a.clone();
    b.fp_pi = FilteredParams::markovian(0.01, 0.0);
    b.fp_half = FilteredParams::markovian(0.01, 0.0);
    let e = (-0.01f64).exp();
    let term = (1.0 - e).abs() / 4.0 + 0.5 * (1.0 + e - 2.0 * (-0.005f64).exp()).sqrt();
    assert!((benchmark_distance(&a, &b, false).unwrap() - term).abs() < 1e-14);
    let with = benchmark_distance(&a, &b, true).unwrap();
    assert!((with - 5.0 * term / 7.0).abs() < 1e-14);

    // the Choi route agrees with the closed form for Markovian pairs
    let pa = Prepared::from_gateset(&a).unwrap();
    let pb = Prepared::from_gateset(&b).unwrap();
    assert!((prepared_distance(&pa, &pb, false) - term).abs() < 1e-10);
    let mut c = b.clone();
    c.r = [0.0, 0.0, 0.9];
    let spam = benchmark_distance(&a, &c, true).unwrap() * 7.0 - 5.0 * term;
    assert!((spam - 0.1).abs() < 1e-12);
}

#[test]
fn linear_state_tomography() {
    let povm = pauli_povm();
    let r = [0.3, -0.4, 0.5];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rho = Vector4::new(s, r[0] * s, r[1] * s, r[2] * s);
    let freqs: Vec<f64> = (0..6).map(|i| (0..4).map(|k| povm[(i, k)] * rho[k]).sum()).collect();
    let est = linear_qst(&freqs, &povm).unwrap();
    assert!(max_diff(&est.bloch, &r) < 1e-12);
    assert!(!est.nonphysical);
    let bad = linear_qst(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0], &povm).unwrap();
    assert!(bad.nonphysical);
    let z_only = DMatrix::from_fn(2, 4, |i, k| povm[(i + 4, k)]);
    assert!(linear_qst(&[0.5, 0.5], &z_only).is_err());
}

#[test]
fn linear_process_tomography() {
    let t = truth();
    let g = t.gate_ptm(GateId::G2).unwrap().0;
    let povm = pauli_povm();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let states = DMatrix::from_column_slice(
        4,
        4,
        &[s, 0.0, 0.0, s, s, 0.0, 0.0, -s, s, s, 0.0, 0.0, s, 0.0, s, 0.0],
    );
    let gd = DMatrix::from_fn(4, 4, |i, j| g[(i, j)]);
    let f = &povm * gd * &states;
    let est = linear_qpt(&f, &povm, &states).unwrap();
    assert!((est - g).abs().max() < 1e-12);
    let flat = DMatrix::from_fn(4, 2, |i, j| states[(i, j)]);
    assert!(linear_qpt(&(&povm * DMatrix::from_fn(4, 4, |i, j| g[(i, j)]) * &flat), &povm, &flat).is_err());
}

fn spectrum(m: &Matrix4<f64>) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = m.complex_eigenvalues().iter().map(|c| (c.re, c.im.abs())).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v
}

fn random_gauge(rng: &mut ChaCha8Rng, scale: f64) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    for i in 1..4 {
        for j in 0..4 {
            t[(i, j)] += rng.random_range(-scale..scale);
        }
    }
    t
}

#[test]
fn linear_gst_recovers_spectra() {
    for gs in [ideal(ModelVariant::Markovian), truth()] {
        let model = Prepared::from_gateset(&gs).unwrap();
        let est = linear_gst(&gst_data(&model)).unwrap();
        for k in 0..5 {
            let (a, b) = (spectrum(&est.gates[k]), spectrum(&model.gates[k]));
            for (x, y) in a.iter().zip(&b) {
                assert!((x.0 - y.0).abs() < 1e-10 && (x.1 - y.1).abs() < 1e-10, "gate {k}: {a:?} vs {b:?}");
            }
        }
        let design = markov_design(&[1, 2, 4], 1);
        let p0 = model.plus_probabilities(&design.circuits);
        let p1 = est.plus_probabilities(&design.circuits);
        assert!(max_diff(&p0, &p1) < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let moved = apply_gauge(&est, &random_gauge(&mut rng, 0.3)).unwrap();
        assert!(max_diff(&moved.plus_probabilities(&design.circuits), &p0) < 1e-12);
    }
    let mut mixed = Prepared::from_gateset(&ideal(ModelVariant::Markovian)).unwrap();
    mixed.rho = Vector4::new(std::f64::consts::FRAC_1_SQRT_2, 0.0, 0.0, 0.0);
    assert!(linear_gst(&gst_data(&mixed)).is_err());
}

#[test]
fn gauge_optimization_undoes_a_transform() {
    let target = Prepared::from_gateset(&truth()).unwrap();
    let same = gauge_optimize(&target, &target);
    assert!(same.cost < 1e-20);
    let id: Vec<f64> = (0..16).map(|k| if k / 4 == k % 4 { 1.0 } else { 0.0 }).collect();
    assert!(max_diff(&same.transform, &id) < 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..5 {
        let moved = apply_gauge(&target, &random_gauge(&mut rng, 0.2)).unwrap();
        let back = gauge_optimize(&moved, &target);
        assert!(back.cost < 1e-10, "cost {}", back.cost);
        assert!(prepared_distance(&back.estimate.prepared(), &target, true) < 1e-6);
        let t = Matrix4::from_fn(|i, j| back.transform[i * 4 + j]);
        assert_eq!(t.row(0).iter().cloned().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
    }
}

#[test]
fn general_fit_recovers_ideal_set_up_to_gauge() {
    let gs = ideal(ModelVariant::Markovian);
    let target = Prepared::from_gateset(&gs).unwrap();
    let design = general_design(&gs, None, &[1, 2, 4], EXACT_SHOTS).unwrap();
    let data = exact_dataset(&target, &design, EXACT_SHOTS);
    let fit = general_fit(&design, &data, &FitConfig::general(), &target).unwrap();
    let est = fit.prepared().unwrap();
    let gauged = gauge_optimize(&est, &target).estimate.prepared();
    for k in 0..5 {
        assert!((gauged.gates[k] - target.gates[k]).abs().max() < 1e-6);
    }
    let jac = linalg::central_jacobian(|x| general_unpack(x).plus_probabilities(&design.circuits), &general_pack(&est), 1e-6);
    assert_eq!(linalg::rank(&jac, 1e-9), GENERAL_PARAMS - GENERAL_GAUGE_DIM);
}

#[test]
fn general_fit_overfits_sampled_data() {
    let t = truth();
    let prep = Prepared::from_gateset(&t).unwrap();
    let design = general_design(&ideal(ModelVariant::Markovian), None, &[1, 2, 4], 1000).unwrap();
    let data = sample_counts(&prep, &design, 3);
    let init = Prepared::from_gateset(&ideal(ModelVariant::Markovian)).unwrap();
    let fit = general_fit(&design, &data, &FitConfig::general(), &init).unwrap();
    let at_truth = cost_ml(&prep.plus_probabilities(&design.circuits), &data.records);
    assert!(fit.neg_log_likelihood < at_truth);
}
