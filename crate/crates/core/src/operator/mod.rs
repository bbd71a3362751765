//! Dense complex matrix foundation.
//!
//! All operators (drift, drive, transporters, propagators, wave operators,
//! projectors) are plain [`CMatrix`] values; the types in the rest of the
//! crate give them their roles.

mod blocks;
mod spectral;

pub use blocks::{
    block_project, block_pseudo_inverse, check_block_family, off_block_norm, range_basis,
    restricted_min_singular_value,
};
pub(crate) use spectral::check_grid;
pub use spectral::{
    decompose, default_gap_tol, match_labels, match_labels_with, SpectralDecomposition,
    SpectralPath, DEFAULT_MIN_OVERLAP,
};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square complex matrix, column-major storage.
pub type CMatrix = DMatrix<Complex64>;

/// Imaginary unit.
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative tolerance used when validating skew-Hermitian inputs.
pub const SKEW_HERMITIAN_RTOL: f64 = 1e-8;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros(n, n)
}

/// Builds an `n x n` matrix from row-major entries.
pub fn from_rows(n: usize, entries: &[Complex64]) -> Result<CMatrix> {
    if entries.len() != n * n || n == 0 {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: entries.len(),
        });
    }
    Ok(CMatrix::from_row_slice(n, n, entries))
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Operator norms used throughout the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    /// Largest singular value.
    Spectral,
    Frobenius,
}

impl Norm {
    pub fn of(self, a: &CMatrix) -> f64 {
        match self {
            Norm::Spectral => spectral_norm(a),
            Norm::Frobenius => a.norm(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Norm::Spectral => "spectral",
            Norm::Frobenius => "frobenius",
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spectral" | "spec" | "2" => Ok(Norm::Spectral),
            "frobenius" | "fro" | "f" => Ok(Norm::Frobenius),
            other => Err(Error::InvalidArgument(format!("unknown norm `{other}`"))),
        }
    }
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub fn spectral_norm(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

pub fn min_singular_value(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Frobenius norm of `A^† + A`.
pub fn skew_hermitian_defect(a: &CMatrix) -> f64 {
    (a.adjoint() + a).norm()
}

/// Frobenius norm of `A^† - A`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    (a.adjoint() - a).norm()
}

/// Validates that `a` is finite, square and skew-Hermitian within `tol`.
pub fn check_skew_hermitian(a: &CMatrix, tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let defect = skew_hermitian_defect(a);
    if defect > tol {
        return Err(Error::NotSkewHermitian { defect, tol });
    }
    Ok(())
}

/// Tolerance for skew-Hermiticity checks relative to the size of `a`.
pub fn skew_tol_for(a: &CMatrix) -> f64 {
    SKEW_HERMITIAN_RTOL * a.norm().max(1.0)
}

/// `‖M^† M − 1‖₂`.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    spectral_norm(&(m.adjoint() * m - identity(n)))
}

/// Hermitian eigendecomposition `(eigenvalues, eigenvectors)` with eigenvalues
/// sorted ascending. Only the Hermitian part of `h` is used.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let herm = (h + h.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `h^{-1/2}` for Hermitian positive-definite `h`; eigenvalues below `floor`
/// are clamped to it.
pub fn inverse_sqrt_hermitian(h: &CMatrix, floor: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(h);
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &lambda) in values.iter().enumerate() {
        let s = 1.0 / lambda.max(floor).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// `h^{1/2}` for Hermitian positive-semidefinite `h`.
pub fn sqrt_hermitian(h: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(h);
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &lambda) in values.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// Unitary polar factor `A (A^† A)^{-1/2}`.
pub fn polar_unitary(a: &CMatrix, sv_floor: f64) -> CMatrix {
    let gram = a.adjoint() * a;
    a * inverse_sqrt_hermitian(&gram, sv_floor * sv_floor)
}

/// Matrix exponential of a skew-Hermitian generator via its spectral
/// decomposition.
pub fn expm_skew_hermitian(a: &CMatrix) -> CMatrix {
    // iA is Hermitian: A = -i V diag(λ) V^†.
    let herm = a.map(|z| I * z);
    let (values, vectors) = hermitian_eigen(&herm);
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &lambda) in values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda);
        for i in 0..n {
            scaled[(i, j)] *= phase;
        }
    }
    scaled * vectors.adjoint()
}

/// Largest absolute entry-wise difference.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
        // [X, Y] = 2iZ
        let lhs = commutator(&x, &y);
        assert!(max_abs_diff(&lhs, &z.map(|v| v * c(0., 2.))) < 1e-15);
        assert!(max_abs_diff(&(&x * &x), &identity(2)) < 1e-15);
    }

    #[test]
    fn skew_hermitian_check_rejects_hermitian() {
        let err = check_skew_hermitian(&pauli_x(), 1e-12).unwrap_err();
        assert!(matches!(err, Error::NotSkewHermitian { .. }));
        check_skew_hermitian(&pauli_x().map(|v| v * I), 1e-12).unwrap();
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut a = zeros(2);
        a[(0, 1)] = c(f64::NAN, 0.0);
        assert_eq!(check_skew_hermitian(&a, 1.0), Err(Error::NonFinite));
    }

    #[test]
    fn constant_generator_exponential() {
        // exp(-iπZ) = -1
        let g = pauli_z().map(|v| v * c(0., -std::f64::consts::PI));
        let m = expm_skew_hermitian(&g);
        assert!(max_abs_diff(&m, &identity(2).map(|v| -v)) < 1e-14);
    }

    #[test]
    fn scaled_identity_unitarity_defect() {
        let m = identity(3).scale(1.01);
        assert!((unitarity_defect(&m) - 0.0201).abs() < 1e-14);
    }

    #[test]
    fn inverse_sqrt_of_diagonal() {
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(4., 0.), c(0.25, 0.)]));
        let r = inverse_sqrt_hermitian(&h, 1e-16);
        assert!((r[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((r[(1, 1)].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polar_factor_is_unitary() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1., 0.2), c(0.3, 0.), c(-0.1, 0.4), c(0.9, 0.)]);
        let v = polar_unitary(&a, 1e-12);
        assert!(unitarity_defect(&v) < 1e-13);
    }
}
