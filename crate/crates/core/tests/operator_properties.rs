mod common;

use bloch_core::operator::{
    block_project, block_pseudo_inverse, decompose, default_gap_tol, expm_skew_hermitian,
    identity, match_labels, max_abs_diff, restricted_min_singular_value, unitarity_defect,
    CMatrix,
};
use bloch_core::Error;
use common::{diagonal_blocks, skew_from, skew_raw, unitary_from, with_spectrum};
use proptest::prelude::*;

/// Random unitary, block multiplicities summing to `n` and levels whose gaps
/// are at least `1e-3`.
fn spectral_case() -> impl Strategy<Value = (CMatrix, Vec<(f64, usize)>)> {
    (2usize..=8)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(-1.0f64..1.0, 2 * n * n),
                prop::collection::vec(any::<bool>(), n - 1),
                prop::collection::vec(1e-3f64..2.0, n),
                -3.0f64..3.0,
            )
        })
        .prop_map(|(n, raw, splits, gaps, start)| {
            let mut sizes = vec![1usize];
            for s in splits {
                if s {
                    sizes.push(1);
                } else {
                    *sizes.last_mut().unwrap() += 1;
                }
            }
            let mut level = start;
            let levels = sizes
                .iter()
                .zip(gaps)
                .map(|(&m, g)| {
                    level += g;
                    (level, m)
                })
                .collect();
            (unitary_from(n, &raw), levels)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn decompose_invariants((u, levels) in spectral_case()) {
        let a = with_spectrum(&u, &levels);
        let d = decompose(&a, default_gap_tol(&a)).unwrap();
        prop_assert_eq!(d.n_blocks(), levels.len());
        let defects = d.defects();
        prop_assert!(defects.max() <= 1e-10, "{:?}", defects);
        prop_assert!(max_abs_diff(&d.reconstruct(), &a) <= 1e-10);
        for &(l, m) in &levels {
            let k = d
                .eigenvalues
                .iter()
                .position(|b| (b.im + l).abs() <= 1e-10 && b.re.abs() <= 1e-14);
            prop_assert!(k.is_some(), "level {} missing from {:?}", l, d.eigenvalues);
            prop_assert_eq!(d.multiplicities[k.unwrap()], m);
        }
    }

    #[test]
    fn match_labels_inverts_permutations(
        (u, levels) in spectral_case(),
        seed in any::<u64>(),
    ) {
        let a = with_spectrum(&u, &levels);
        let d = decompose(&a, default_gap_tol(&a)).unwrap();
        let m = d.n_blocks();
        let mut perm: Vec<usize> = (0..m).collect();
        // Deterministic shuffle from the seed.
        let mut s = seed;
        for i in (1..m).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = d.permuted(&perm);
        let (back, p) = match_labels(&d, &shuffled).unwrap();
        for (x, y) in back.projectors.iter().zip(&d.projectors) {
            prop_assert!(max_abs_diff(x, y) == 0.0);
        }
        for k in 0..m {
            prop_assert_eq!(perm[p[k]], k);
        }
        // Swapping the arguments undoes the relabelling.
        let (again, q) = match_labels(&shuffled, &back).unwrap();
        for (x, y) in again.projectors.iter().zip(&shuffled.projectors) {
            prop_assert!(max_abs_diff(x, y) == 0.0);
        }
        prop_assert_eq!(q, perm);
    }

    #[test]
    fn block_pseudo_inverse_inverts_on_range(
        (n, raw) in skew_raw(2..=6),
        shift in 0.5f64..3.0,
        split in 1usize..6,
    ) {
        let split = split.min(n - 1);
        let blocks = diagonal_blocks(&[split, n - split]);
        let a = skew_from(n, &raw) + identity(n).scale(shift);
        for p in &blocks {
            match block_pseudo_inverse(&a, p, 1e-8) {
                Ok(x) => {
                    let pap = p * &a * p;
                    prop_assert!(max_abs_diff(&(&x * &pap), p) <= 1e-10);
                    prop_assert!(max_abs_diff(&(&pap * &x), p) <= 1e-10);
                    prop_assert!(max_abs_diff(&(p * &x * p), &x) <= 1e-12);
                }
                Err(e) => {
                    let singular = matches!(e, Error::SingularBlock { .. });
                    prop_assert!(singular);
                    prop_assert!(restricted_min_singular_value(&a, p) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn block_project_is_an_idempotent_linear_map(
        (n, raw) in skew_raw(3..=6),
        (_, raw2) in skew_raw(6..=6),
        alpha in -2.0f64..2.0,
        rot in prop::collection::vec(-1.0f64..1.0, 72),
    ) {
        let u = unitary_from(n, &rot[..2 * n * n]);
        let blocks: Vec<CMatrix> = diagonal_blocks(&[1, n - 2, 1])
            .iter()
            .map(|p| &u * p * u.adjoint())
            .collect();
        let a = skew_from(n, &raw);
        let b = skew_from(n, &raw2[..2 * n * n]);
        let pa = block_project(&a, &blocks);
        prop_assert!(max_abs_diff(&block_project(&pa, &blocks), &pa) <= 1e-13);
        let lhs = block_project(&(&a + b.scale(alpha)), &blocks);
        let rhs = &pa + block_project(&b, &blocks).scale(alpha);
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-13);
        for p in &blocks {
            prop_assert!(max_abs_diff(&(p * &pa), &(&pa * p)) <= 1e-13);
        }
    }

    #[test]
    fn exponentials_of_skew_matrices_are_unitary((n, raw) in skew_raw(2..=8), scale in 0.0f64..20.0) {
        let w = expm_skew_hermitian(&skew_from(n, &raw).scale(scale));
        prop_assert!(unitarity_defect(&w) <= 1e-12);
    }
}
