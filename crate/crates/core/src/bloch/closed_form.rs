use super::{bloch_defect, BlochInitialCondition, WaveOperatorPath};
use crate::error::{Error, Result};
use crate::operator::{
    block_pseudo_inverse, check_block_family, identity, range_basis, singular_values, CMatrix,
};
use crate::propagation::PropagatorPath;

/// Effective Bloch evolution `M_Bloch(t) = Σ_k P_k M(t) U(t0) P_k`.
#[derive(Debug, Clone)]
pub struct EffectiveEvolution {
    pub t0: f64,
    pub times: Vec<f64>,
    pub ops: Vec<CMatrix>,
    /// Condition number of each diagonal block, per checkpoint.
    pub condition_numbers: Vec<Vec<f64>>,
    /// Smallest singular value over the diagonal blocks, per checkpoint.
    pub min_block_sv: Vec<f64>,
}

fn prepare(m_path: &PropagatorPath, ic: &BlochInitialCondition, blocks: &[CMatrix]) -> Result<()> {
    check_block_family(blocks, 1e-8)?;
    let n = m_path.dim();
    if ic.u0.nrows() != n || blocks[0].nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: ic.u0.nrows(),
        });
    }
    ic.validate(blocks, 1e-8)
}

/// Singular values of `P A P` restricted to `range(P)`.
fn block_singular_values(a: &CMatrix, basis: &CMatrix) -> Vec<f64> {
    if basis.ncols() == 0 {
        return Vec::new();
    }
    singular_values(&(basis.adjoint() * a * basis))
}

pub fn bloch_effective_evolution(
    m_path: &PropagatorPath,
    ic: &BlochInitialCondition,
    blocks: &[CMatrix],
) -> Result<EffectiveEvolution> {
    prepare(m_path, ic, blocks)?;
    let bases: Vec<CMatrix> = blocks.iter().map(range_basis).collect();
    let n = m_path.dim();
    let mut out = EffectiveEvolution {
        t0: m_path.t0,
        times: m_path.times.clone(),
        ops: Vec::with_capacity(m_path.len()),
        condition_numbers: Vec::with_capacity(m_path.len()),
        min_block_sv: Vec::with_capacity(m_path.len()),
    };
    for m in &m_path.ops {
        let a = m * &ic.u0;
        let mut op = CMatrix::zeros(n, n);
        let mut conds = Vec::with_capacity(blocks.len());
        let mut min_sv = f64::INFINITY;
        for (p, q) in blocks.iter().zip(&bases) {
            op += p * &a * p;
            let sv = block_singular_values(&a, q);
            let hi = sv.iter().copied().fold(0.0, f64::max);
            let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
            conds.push(if lo > 0.0 { hi / lo } else { f64::INFINITY });
            min_sv = min_sv.min(lo);
        }
        out.ops.push(op);
        out.condition_numbers.push(conds);
        out.min_block_sv.push(min_sv);
    }
    Ok(out)
}

/// `U_k(t) = M(t) U_k(t0) [P_k M(t) U_k(t0) P_k]⁺`.
///
/// A singular block ends the path: `blowup_flag` is set and the path is
/// truncated before the offending checkpoint.
pub fn closed_form_wave(
    m_path: &PropagatorPath,
    ic: &BlochInitialCondition,
    blocks: &[CMatrix],
    sv_tol: f64,
) -> Result<WaveOperatorPath> {
    prepare(m_path, ic, blocks)?;
    let bases: Vec<CMatrix> = blocks.iter().map(range_basis).collect();
    let n = m_path.dim();
    let mut out = empty_path(m_path, blocks);
    'checkpoints: for (&t, m) in m_path.times.iter().zip(&m_path.ops) {
        let a = m * &ic.u0;
        let mut u = CMatrix::zeros(n, n);
        let mut min_sv = f64::INFINITY;
        for (k, (p, q)) in blocks.iter().zip(&bases).enumerate() {
            let x = match block_pseudo_inverse(&a, p, sv_tol) {
                Ok(x) => x,
                Err(e) => {
                    let e = e.for_block(k);
                    out.blowup_flag = true;
                    out.blowup = Some((t, e.to_string()));
                    break 'checkpoints;
                }
            };
            let pap = p * &a * p;
            out.self_check = out.self_check.max((&x * &pap - p).norm());
            min_sv = min_sv.min(
                block_singular_values(&a, q)
                    .into_iter()
                    .fold(f64::INFINITY, f64::min),
            );
            u += &a * p * x;
        }
        out.times.push(t);
        out.bloch_defects.push(bloch_defect(&u, blocks));
        out.min_block_sv.push(min_sv);
        out.ops.push(u);
    }
    if let Some(u) = out.ops.first_mut() {
        *u = ic.u0.clone();
    }
    Ok(out)
}

/// `Π_k = P_k M U0 P_k + (1 − P_k)`.
pub fn radon_pi(m: &CMatrix, u0: &CMatrix, p: &CMatrix) -> CMatrix {
    let n = m.nrows();
    p * m * u0 * p + (identity(n) - p)
}

/// `U_k(t) = M(t) U_k(t0) P_k Π_k(t)⁻¹` with a full LU inverse of `Π_k`.
///
/// Fails with [`Error::SingularBlock`] once `cond(Π_k) > 1/sv_tol`. The
/// largest off-block part of any `Π_k` is reported in `self_check`.
pub fn radon_wave(
    m_path: &PropagatorPath,
    ic: &BlochInitialCondition,
    blocks: &[CMatrix],
    sv_tol: f64,
) -> Result<WaveOperatorPath> {
    prepare(m_path, ic, blocks)?;
    let n = m_path.dim();
    let one = identity(n);
    let mut out = empty_path(m_path, blocks);
    for (&t, m) in m_path.times.iter().zip(&m_path.ops) {
        let mut u = CMatrix::zeros(n, n);
        let mut min_sv = f64::INFINITY;
        for (k, p) in blocks.iter().enumerate() {
            let pi = radon_pi(m, &ic.u0, p);
            let q = &one - p;
            let off = (&q * &pi * p).norm() + (p * &pi * &q).norm();
            out.self_check = out.self_check.max(off);
            let sv = singular_values(&pi);
            let hi = sv.iter().copied().fold(0.0, f64::max);
            let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
            if !(lo > 0.0 && hi / lo <= 1.0 / sv_tol) {
                return Err(Error::SingularBlock {
                    block: k,
                    sv: lo,
                    tol: sv_tol,
                });
            }
            let inv = pi.lu().try_inverse().ok_or(Error::SingularBlock {
                block: k,
                sv: lo,
                tol: sv_tol,
            })?;
            min_sv = min_sv.min(lo);
            u += m * &ic.u0 * p * inv;
        }
        out.times.push(t);
        out.bloch_defects.push(bloch_defect(&u, blocks));
        out.min_block_sv.push(min_sv);
        out.ops.push(u);
    }
    Ok(out)
}

fn empty_path(m_path: &PropagatorPath, blocks: &[CMatrix]) -> WaveOperatorPath {
    WaveOperatorPath {
        t0: m_path.t0,
        times: Vec::with_capacity(m_path.len()),
        ops: Vec::with_capacity(m_path.len()),
        blocks: blocks.to_vec(),
        bloch_defects: Vec::with_capacity(m_path.len()),
        min_block_sv: Vec::with_capacity(m_path.len()),
        blowup_flag: false,
        blowup: None,
        self_check: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::identity_ic;
    use crate::operator::{c, expm_skew_hermitian, max_abs_diff, pauli_x, zeros, I};

    fn diag_blocks() -> Vec<CMatrix> {
        let mut p = zeros(2);
        p[(0, 0)] = c(1.0, 0.0);
        let q = identity(2) - &p;
        vec![p, q]
    }

    fn rotation_path(times: &[f64]) -> PropagatorPath {
        let ops = times
            .iter()
            .map(|&t| expm_skew_hermitian(&pauli_x().map(|v| -I * t * v)))
            .collect();
        PropagatorPath::from_ops(0.0, times.to_vec(), ops, 0.0)
    }

    #[test]
    fn identity_evolution_is_trivial() {
        let blocks = diag_blocks();
        let path = PropagatorPath::from_ops(0.0, vec![0.0, 1.0], vec![identity(2); 2], 0.0);
        let ic = identity_ic(&blocks);
        for u in [
            closed_form_wave(&path, &ic, &blocks, 1e-10).unwrap(),
            radon_wave(&path, &ic, &blocks, 1e-10).unwrap(),
        ] {
            for op in &u.ops {
                assert!(max_abs_diff(op, &identity(2)) < 1e-15);
            }
        }
        assert_eq!(radon_pi(&identity(2), &identity(2), &blocks[0]), identity(2));
    }

    #[test]
    fn rotation_matches_tangent() {
        let blocks = diag_blocks();
        let times = [0.0, 0.4, 1.2];
        let path = rotation_path(&times);
        let ic = identity_ic(&blocks);
        let cf = closed_form_wave(&path, &ic, &blocks, 1e-10).unwrap();
        let rd = radon_wave(&path, &ic, &blocks, 1e-10).unwrap();
        for (i, &t) in times.iter().enumerate() {
            assert!((cf.ops[i][(1, 0)] - c(0.0, -t.tan())).norm() < 1e-13);
            assert!((cf.ops[i][(0, 1)] - c(0.0, -t.tan())).norm() < 1e-13);
            assert!((cf.min_block_sv[i] - t.cos()).abs() < 1e-13);
        }
        assert!(cf.max_deviation(&rd) < 1e-12);
        assert!(rd.self_check < 1e-15);
        assert!(cf.max_bloch_defect() < 1e-14);
    }

    #[test]
    fn singular_block_flags_and_errors() {
        let blocks = diag_blocks();
        let path = rotation_path(&[0.0, 1.0, std::f64::consts::FRAC_PI_2, 2.0]);
        let ic = identity_ic(&blocks);
        let cf = closed_form_wave(&path, &ic, &blocks, 1e-8).unwrap();
        assert!(cf.blowup_flag);
        assert_eq!(cf.len(), 2);
        let err = radon_wave(&path, &ic, &blocks, 1e-8).unwrap_err();
        assert!(matches!(err, Error::SingularBlock { .. }));
    }

    #[test]
    fn effective_evolution_reconstructs() {
        let blocks = diag_blocks();
        let path = rotation_path(&[0.0, 0.7]);
        let ic = identity_ic(&blocks);
        let eff = bloch_effective_evolution(&path, &ic, &blocks).unwrap();
        let u = closed_form_wave(&path, &ic, &blocks, 1e-10).unwrap();
        let rebuilt = &u.ops[1] * &eff.ops[1];
        assert!(max_abs_diff(&rebuilt, &path.ops[1]) < 1e-13);
        assert!((eff.condition_numbers[1][0] - 1.0).abs() < 1e-13);
    }
}
