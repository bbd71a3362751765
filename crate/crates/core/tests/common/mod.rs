#![allow(dead_code)]

use bloch_core::operator::{expm_skew_hermitian, CMatrix};
use bloch_core::Complex64;
use proptest::prelude::*;

/// Skew-Hermitian matrix from `2n²` reals.
pub fn skew_from(n: usize, raw: &[f64]) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |i, j| {
        let k = 2 * (i * n + j);
        Complex64::new(raw[k], raw[k + 1])
    });
    (&g - g.adjoint()).scale(0.5)
}

pub fn unitary_from(n: usize, raw: &[f64]) -> CMatrix {
    expm_skew_hermitian(&skew_from(n, raw).scale(2.0))
}

/// `(n, raw)` with `raw` long enough for [`skew_from`].
pub fn skew_raw(dims: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (usize, Vec<f64>)> {
    dims.prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, 2 * n * n)))
}

/// Skew-Hermitian matrix with eigenvalues `−i λ_k` of prescribed
/// multiplicities, conjugated by a random unitary.
pub fn with_spectrum(u: &CMatrix, levels: &[(f64, usize)]) -> CMatrix {
    let n = u.nrows();
    let mut d = CMatrix::zeros(n, n);
    let mut i = 0;
    for &(l, m) in levels {
        for _ in 0..m {
            d[(i, i)] = Complex64::new(0.0, -l);
            i += 1;
        }
    }
    u * d * u.adjoint()
}

pub fn diagonal_blocks(sizes: &[usize]) -> Vec<CMatrix> {
    let n: usize = sizes.iter().sum();
    let mut out = Vec::new();
    let mut start = 0;
    for &m in sizes {
        let mut p = CMatrix::zeros(n, n);
        for i in start..start + m {
            p[(i, i)] = Complex64::new(1.0, 0.0);
        }
        out.push(p);
        start += m;
    }
    out
}
