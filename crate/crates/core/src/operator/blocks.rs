use super::{hermitian_eigen, identity, singular_values, CMatrix, Norm};
use crate::error::{Error, Result};

/// Orthonormal basis (as columns) of the range of a projector.
pub fn range_basis(p: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(p);
    let cols: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(j, _)| j)
        .collect();
    let mut q = CMatrix::zeros(p.nrows(), cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        q.set_column(dst, &vectors.column(src));
    }
    q
}

/// Smallest singular value of `P A P` restricted to `range(P)`.
pub fn restricted_min_singular_value(a: &CMatrix, p: &CMatrix) -> f64 {
    let q = range_basis(p);
    if q.ncols() == 0 {
        return f64::INFINITY;
    }
    let inner = q.adjoint() * a * &q;
    singular_values(&inner)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Inverse of `P A P` on the subspace `range(P)`, zero on its complement:
/// `X (P A P) = (P A P) X = P` and `X = P X P`.
///
/// Fails with [`Error::SingularBlock`] when the restricted block has a
/// singular value below `sv_tol` (block index reported as 0; callers attach
/// the real index with [`Error::for_block`]).
pub fn block_pseudo_inverse(a: &CMatrix, p: &CMatrix, sv_tol: f64) -> Result<CMatrix> {
    if a.shape() != p.shape() {
        return Err(Error::DimensionMismatch {
            expected: p.nrows(),
            found: a.nrows(),
        });
    }
    let q = range_basis(p);
    let n = p.nrows();
    if q.ncols() == 0 {
        return Ok(CMatrix::zeros(n, n));
    }
    let inner = q.adjoint() * a * &q;
    let sv = singular_values(&inner)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if !(sv >= sv_tol) {
        return Err(Error::SingularBlock {
            block: 0,
            sv,
            tol: sv_tol,
        });
    }
    let inv = inner.try_inverse().ok_or(Error::SingularBlock {
        block: 0,
        sv,
        tol: sv_tol,
    })?;
    Ok(&q * inv * q.adjoint())
}

/// `Σ_k P_k A P_k`.
pub fn block_project(a: &CMatrix, blocks: &[CMatrix]) -> CMatrix {
    let n = a.nrows();
    blocks
        .iter()
        .fold(CMatrix::zeros(n, n), |acc, p| acc + p * a * p)
}

/// Norm of the off-block-diagonal part `A − Σ_k P_k A P_k`.
pub fn off_block_norm(a: &CMatrix, blocks: &[CMatrix], norm: Norm) -> f64 {
    norm.of(&(a - block_project(a, blocks)))
}

/// Checks that `blocks` is a complete family of orthogonal projectors.
pub fn check_block_family(blocks: &[CMatrix], tol: f64) -> Result<()> {
    let Some(first) = blocks.first() else {
        return Err(Error::InvalidArgument("empty block family".into()));
    };
    let n = first.nrows();
    let mut sum = CMatrix::zeros(n, n);
    for (k, p) in blocks.iter().enumerate() {
        if p.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.nrows(),
            });
        }
        let herm = (p.adjoint() - p).norm();
        let idem = (p * p - p).norm();
        if herm > tol || idem > tol {
            return Err(Error::InvalidArgument(format!(
                "block {k} is not an orthogonal projector (hermiticity {herm:.2e}, idempotency {idem:.2e})"
            )));
        }
        for (l, q) in blocks.iter().enumerate().skip(k + 1) {
            let o = (p * q).norm();
            if o > tol {
                return Err(Error::InvalidArgument(format!(
                    "blocks {k} and {l} are not orthogonal ({o:.2e})"
                )));
            }
        }
        sum += p;
    }
    let comp = (sum - identity(n)).norm();
    if comp > tol {
        return Err(Error::InvalidArgument(format!(
            "block family is incomplete ({comp:.2e})"
        )));
    }
    Ok(())
}
