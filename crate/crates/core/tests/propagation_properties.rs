mod common;

use bloch_core::models::{landau_zener_model, GeneratorModel, LzParameters};
use bloch_core::operator::{expm_skew_hermitian, max_abs_diff, singular_values, CMatrix};
use bloch_core::propagation::{propagate, uniform_grid};
use common::skew_from;
use proptest::prelude::*;

/// `K0 + cos(νt) K1 + sin(t) K2` from three slices of raw data.
fn smooth_generator(n: usize, raw: &[f64], nu: f64) -> impl Fn(f64) -> CMatrix + Sync {
    let m = 2 * n * n;
    let k = [
        skew_from(n, &raw[..m]),
        skew_from(n, &raw[m..2 * m]),
        skew_from(n, &raw[2 * m..3 * m]),
    ];
    move |t| &k[0] + k[1].scale((nu * t).cos()) + k[2].scale(t.sin())
}

fn generator_case() -> impl Strategy<Value = (usize, Vec<f64>, f64)> {
    (2usize..=5).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(-1.0f64..1.0, 6 * n * n),
            0.2f64..3.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagators_compose((n, raw, nu) in generator_case(), t1 in 0.5f64..3.0, t2 in 3.5f64..6.0) {
        let g = smooth_generator(n, &raw, nu);
        let full = propagate(&g, 0.0, &[0.0, t1, t2], 1e-11).unwrap();
        let tail = propagate(&g, t1, &[t1, t2], 1e-11).unwrap();
        let composed = tail.last() * &full.ops[1];
        prop_assert!(max_abs_diff(&composed, full.last()) <= 1e-8);
        prop_assert!(max_abs_diff(&full.between(1, 2), tail.last()) <= 1e-8);
    }

    #[test]
    fn singular_values_follow_the_unitarity_defect((n, raw, nu) in generator_case()) {
        let g = smooth_generator(n, &raw, nu);
        let path = propagate(&g, 0.0, &uniform_grid(0.0, 5.0, 11), 1e-6).unwrap();
        for (m, &d) in path.ops.iter().zip(&path.unitarity_defects) {
            for s in singular_values(m) {
                prop_assert!(s >= 1.0 - d - 1e-15 && s <= 1.0 + d + 1e-15, "{} vs {}", s, d);
            }
        }
    }

    #[test]
    fn error_decreases_with_tolerance((n, raw, _) in generator_case(), nu in 0.5f64..2.0) {
        // Commuting family G(t) = cos(νt) K with M(t) = exp(sin(νt)/ν K).
        let k = skew_from(n, &raw[..2 * n * n]).scale(3.0);
        let t1 = 7.0;
        let exact = expm_skew_hermitian(&k.scale((nu * t1).sin() / nu));
        let mut last = f64::INFINITY;
        for tol in [1e-6, 1e-8, 1e-10] {
            let kk = k.clone();
            let path = propagate(move |t| kk.scale((nu * t).cos()), 0.0, &[0.0, t1], tol).unwrap();
            let err = max_abs_diff(path.last(), &exact);
            prop_assert!(err <= last + 1e-13, "tol {}: {} after {}", tol, err, last);
            prop_assert!(err <= 1e3 * tol);
            last = err;
        }
    }
}

#[test]
fn landau_zener_propagation_stays_unitary() {
    let model = landau_zener_model(LzParameters { gamma: 2.0 }).unwrap();
    let path = propagate(
        |t| model.generator(t),
        -20.0,
        &uniform_grid(-20.0, 20.0, 81),
        1e-10,
    )
    .unwrap();
    assert!(path.unitarity_defect() <= 1e-7, "{}", path.unitarity_defect());
    assert_eq!(path.ops.len(), 81);
    assert_eq!(path.times[0], -20.0);
}
