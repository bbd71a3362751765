use crate::error::{Error, Result};
use crate::operator::{block_project, min_singular_value, CMatrix};

/// `H_eff = U⁻¹ H U − U⁻¹ U̇`.
pub fn effective_generator(
    h: &CMatrix,
    u: &CMatrix,
    u_dot: &CMatrix,
    sv_tol: f64,
) -> Result<CMatrix> {
    let sv = min_singular_value(u);
    if !(sv >= sv_tol) {
        return Err(Error::SingularBlock {
            block: 0,
            sv,
            tol: sv_tol,
        });
    }
    let inv = u.clone().lu().try_inverse().ok_or(Error::SingularBlock {
        block: 0,
        sv,
        tol: sv_tol,
    })?;
    Ok(&inv * (h * u - u_dot))
}

/// First-order effective generator `Σ_k P_k H P_k`.
pub fn zeno_generator(h: &CMatrix, blocks: &[CMatrix]) -> CMatrix {
    block_project(h, blocks)
}
