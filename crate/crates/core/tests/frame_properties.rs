use std::sync::Arc;

use bloch_core::diagnostics::{leakage, leakage_moving};
use bloch_core::frame::{factorization_defect, kato_generator, AdiabaticFrame, FrameOptions};
use bloch_core::models::{
    closed_form_transporter, landau_zener_model, random_smooth_model, three_level_model,
    GeneratorModel, LzParameters, RandomSmoothParams, ThreeLevelParameters,
};
use bloch_core::operator::{
    commutator, max_abs_diff, pauli_y, skew_hermitian_defect, spectral_norm, unitarity_defect,
    CMatrix, I,
};
use bloch_core::propagation::uniform_grid;
use bloch_core::Norm;
use proptest::prelude::*;

fn random_model(dim: usize, n_blocks: usize, seed: u64) -> Arc<dyn GeneratorModel> {
    Arc::new(
        random_smooth_model(RandomSmoothParams {
            dim,
            n_blocks,
            seed,
            gamma: 5.0,
            ..Default::default()
        })
        .unwrap(),
    )
}

fn lz(gamma: f64) -> Arc<dyn GeneratorModel> {
    Arc::new(landau_zener_model(LzParameters { gamma }).unwrap())
}

fn three_level(gamma: f64) -> Arc<dyn GeneratorModel> {
    Arc::new(
        three_level_model(ThreeLevelParameters {
            gamma,
            ..Default::default()
        })
        .unwrap(),
    )
}

/// Transported projectors `P_k(t_i)` in the frame's labels.
fn moving_projectors(frame: &AdiabaticFrame, times: &[f64], w: &[CMatrix]) -> Vec<Vec<CMatrix>> {
    times
        .iter()
        .zip(w)
        .map(|(&t, w)| {
            let guide: Vec<CMatrix> = frame.blocks().iter().map(|p| w * p * w.adjoint()).collect();
            frame.spectral_at(t, Some(&guide)).unwrap().projectors
        })
        .collect()
}

fn random_case() -> impl Strategy<Value = (usize, usize, u64)> {
    (2usize..=5).prop_flat_map(|dim| (Just(dim), 2..=dim, any::<u64>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn frame_invariants_on_random_models((dim, n_blocks, seed) in random_case()) {
        let model = random_model(dim, n_blocks, seed);
        let frame = AdiabaticFrame::new(model.clone(), 0.0, 4.0, FrameOptions::new(1e-10)).unwrap();
        let grid = uniform_grid(0.0, 4.0, 21);
        let sol = frame.evolve(&grid).unwrap();
        for ((w, b), c) in sol.w.ops.iter().zip(&sol.b).zip(&sol.c) {
            prop_assert!(unitarity_defect(w) <= 1e-8);
            for p in &sol.blocks {
                prop_assert!(spectral_norm(&commutator(b, p)) <= 1e-10);
            }
            prop_assert!(skew_hermitian_defect(c) <= 1e-10 * (1.0 + spectral_norm(c)));
        }
        prop_assert!(frame.intertwining_defect(&sol).unwrap() <= 1e-6);

        // Leakage does not depend on the frame it is measured in.
        let f = frame.lab_propagator(&grid).unwrap();
        let moving = moving_projectors(&frame, &grid, &sol.w.ops);
        let lab = leakage_moving(&f, &sol.blocks, &moving, Norm::Spectral);
        let adiabatic = leakage(&sol.m, &sol.blocks, Norm::Spectral);
        for (x, y) in lab.iter().zip(&adiabatic) {
            prop_assert!((x - y).abs() <= 1e-6, "{} vs {}", x, y);
        }
    }

    #[test]
    fn kato_generator_is_skew_hermitian(seed in any::<u64>(), t in -5.0f64..5.0) {
        let model = random_model(4, 2, seed);
        let a = kato_generator(model.as_ref(), t, 1e-5).unwrap();
        prop_assert!(skew_hermitian_defect(&a) <= 1e-12);
        // Off-block: P_k A P_k vanishes.
        let s = bloch_core::operator::decompose(&model.drift(t), 1e-8).unwrap();
        for p in &s.projectors {
            prop_assert!(spectral_norm(&(p * &a * p)) <= 1e-8);
        }
    }
}

#[test]
fn built_in_models_intertwine_and_factorize() {
    let cases: [(Arc<dyn GeneratorModel>, f64, f64); 3] = [
        (lz(2.0), -10.0, 10.0),
        (three_level(10.0), 0.0, 20.0),
        (random_model(4, 2, 7), 0.0, 5.0),
    ];
    for (model, t0, t1) in cases {
        let frame = AdiabaticFrame::new(model.clone(), t0, t1, FrameOptions::new(1e-10)).unwrap();
        let sol = frame.evolve(&uniform_grid(t0, t1, 41)).unwrap();
        let inter = frame.intertwining_defect(&sol).unwrap();
        assert!(inter <= 1e-6, "{}: intertwining {inter}", model.name());
        let fact = factorization_defect(model.clone(), t0, t1, 1e-10).unwrap();
        assert!(fact <= 1e-6, "{}: factorization {fact}", model.name());
    }
}

#[test]
fn factorization_converges_with_tolerance() {
    // The three-level drift is constant (W = 1, F and M share one
    // integration), so only models with moving projectors are informative.
    for (model, t0, t1) in [(lz(2.0), -10.0, 10.0), (random_model(4, 2, 3), 0.0, 5.0)] {
        let d: Vec<f64> = [1e-6, 1e-8, 1e-10]
            .iter()
            .map(|&tol| factorization_defect(model.clone(), t0, t1, tol).unwrap())
            .collect();
        let floor = 1e-12;
        assert!(d[0] >= d[1] || d[0] <= floor, "{}: {d:?}", model.name());
        assert!(d[1] >= d[2] || d[1] <= floor, "{}: {d:?}", model.name());
        assert!(d[2] <= 1e-6, "{}: {d:?}", model.name());
    }
}

#[test]
fn landau_zener_transporter_limit() {
    let frame = AdiabaticFrame::new(lz(1.0), -50.0, 50.0, FrameOptions::new(1e-12)).unwrap();
    let sol = frame.evolve(&uniform_grid(-50.0, 50.0, 11)).unwrap();
    for (&t, w) in sol.w.times.iter().zip(&sol.w.ops) {
        assert!(max_abs_diff(w, &closed_form_transporter(-50.0, t)) <= 1e-8);
    }
    // ‖exp(iYθ) − iY‖₂ = 2 sin(ε/2) with ε = π/2 − θ = arctan(1/50).
    let iy = pauli_y().map(|v| I * v);
    let dist = spectral_norm(&(sol.w.last() - &iy));
    let eps = (1.0f64 / 50.0).atan();
    assert!((dist - 2.0 * (eps / 2.0).sin()).abs() <= 1e-8, "{dist}");
    assert!(dist < 2.1e-2);
}

#[test]
fn landau_zener_frame_drive_norm() {
    let frame = AdiabaticFrame::new(lz(1.0), -10.0, 10.0, FrameOptions::new(1e-10)).unwrap();
    let grid = uniform_grid(-10.0, 10.0, 21);
    let sol = frame.evolve(&grid).unwrap();
    for (&t, c) in grid.iter().zip(&sol.c) {
        let expected = 0.5 / (1.0 + t * t);
        assert!((spectral_norm(c) - expected).abs() <= 1e-9, "t = {t}");
    }
}
