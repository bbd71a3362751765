//! Leakage, the distance bound `2δ/(1−δ)`, and the polar unitarisation
//! `V = U (U†U)^{-1/2}` with its bound `(1+δ)/√(1−2δ−δ²) − 1`.
//!
//! All bound checks use the spectral norm; Frobenius values are reported
//! alongside. Suprema are taken over checkpoints.

use crate::bloch::WaveOperatorPath;
use crate::error::{Error, Result};
use crate::operator::{
    commutator, hermitian_eigen, identity, inverse_sqrt_hermitian, off_block_norm, spectral_norm,
    unitarity_defect, CMatrix, Norm,
};
use crate::propagation::PropagatorPath;

/// Numerical slack allowed on top of the exact inequalities.
pub const BOUND_SLACK: f64 = 1e-10;

/// `‖(1 − P_k) M P_k‖` for every block.
pub fn leakage_at(m: &CMatrix, blocks: &[CMatrix], norm: Norm) -> Vec<f64> {
    let one = identity(m.nrows());
    blocks
        .iter()
        .map(|p| norm.of(&((&one - p) * m * p)))
        .collect()
}

/// Per-block sup over checkpoints of `‖(1 − P_k) M(t) P_k‖`.
pub fn leakage(m_path: &PropagatorPath, blocks: &[CMatrix], norm: Norm) -> Vec<f64> {
    let mut out = vec![0.0f64; blocks.len()];
    for m in &m_path.ops {
        for (o, l) in out.iter_mut().zip(leakage_at(m, blocks, norm)) {
            *o = o.max(l);
        }
    }
    out
}

/// Per-block sup of `‖(1 − P_k(t)) F(t) P_k(t0)‖` with moving projectors
/// `moving[i][k] = P_k(t_i)`; the lab-frame counterpart of [`leakage`].
pub fn leakage_moving(
    f_path: &PropagatorPath,
    initial: &[CMatrix],
    moving: &[Vec<CMatrix>],
    norm: Norm,
) -> Vec<f64> {
    let n = f_path.dim();
    let one = identity(n);
    let mut out = vec![0.0; initial.len()];
    for (f, pt) in f_path.ops.iter().zip(moving) {
        for (k, (p0, p)) in initial.iter().zip(pt).enumerate() {
            out[k] = f64::max(out[k], norm.of(&((&one - p) * f * p0)));
        }
    }
    out
}

/// `2δ/(1−δ)`.
pub fn leakage_bound(delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            expected: "0 <= delta < 1",
        });
    }
    Ok(2.0 * delta / (1.0 - delta))
}

/// `(1+δ)/√(1−2δ−δ²) − 1`.
pub fn v_bound(delta: f64) -> Result<f64> {
    if !(delta >= 0.0 && 2.0 * delta + delta * delta < 1.0) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            expected: "delta >= 0 and 2 delta + delta^2 < 1",
        });
    }
    Ok((1.0 + delta) / (1.0 - 2.0 * delta - delta * delta).sqrt() - 1.0)
}

/// Polar unitarisation of a wave-operator path.
#[derive(Debug, Clone)]
pub struct UnitarizedPath {
    pub t0: f64,
    pub times: Vec<f64>,
    pub ops: Vec<CMatrix>,
    /// `‖V†V − 1‖₂` per checkpoint.
    pub unitarity_defects: Vec<f64>,
    /// Off-block part of `U†U` per checkpoint (spectral norm).
    pub gram_offblock: Vec<f64>,
}

impl UnitarizedPath {
    pub fn max_unitarity_defect(&self) -> f64 {
        self.unitarity_defects.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_gram_offblock(&self) -> f64 {
        self.gram_offblock.iter().copied().fold(0.0, f64::max)
    }

    /// `sup ‖V − 1‖`.
    pub fn delta(&self, norm: Norm) -> f64 {
        let n = self.ops.first().map_or(0, |v| v.nrows());
        let one = identity(n);
        self.ops
            .iter()
            .map(|v| norm.of(&(v - &one)))
            .fold(0.0, f64::max)
    }

    /// Max over checkpoints of the off-block part of `V⁻¹(t) M(t) V(t0)`.
    pub fn frame_offblock(&self, m_path: &PropagatorPath, blocks: &[CMatrix]) -> f64 {
        let v0 = &self.ops[0];
        self.ops
            .iter()
            .zip(&m_path.ops)
            .map(|(v, m)| off_block_norm(&(v.adjoint() * m * v0), blocks, Norm::Spectral))
            .fold(0.0, f64::max)
    }
}

/// `V(t) = U(t) [U†(t) U(t)]^{-1/2}`.
///
/// Requires `[U0†U0, P_k] = 0` (otherwise [`Error::BadInitialCondition`]) and
/// every singular value of `U` at least `sv_tol` (otherwise
/// [`Error::SingularBlock`]).
pub fn unitarize(u_path: &WaveOperatorPath, blocks: &[CMatrix], sv_tol: f64) -> Result<UnitarizedPath> {
    let Some(u0) = u_path.ops.first() else {
        return Err(Error::InvalidArgument("empty wave-operator path".into()));
    };
    let gram0 = u0.adjoint() * u0;
    let comm = blocks
        .iter()
        .map(|p| spectral_norm(&commutator(&gram0, p)))
        .fold(0.0, f64::max);
    if comm > 1e-8 * gram0.norm().max(1.0) {
        return Err(Error::BadInitialCondition(format!(
            "U0†U0 does not commute with the blocks ({comm:.3e})"
        )));
    }
    let mut out = UnitarizedPath {
        t0: u_path.t0,
        times: u_path.times.clone(),
        ops: Vec::with_capacity(u_path.len()),
        unitarity_defects: Vec::with_capacity(u_path.len()),
        gram_offblock: Vec::with_capacity(u_path.len()),
    };
    for u in &u_path.ops {
        let gram = u.adjoint() * u;
        let (values, _) = hermitian_eigen(&gram);
        let sv = values.first().copied().unwrap_or(0.0).max(0.0).sqrt();
        if sv < sv_tol {
            return Err(Error::SingularBlock {
                block: 0,
                sv,
                tol: sv_tol,
            });
        }
        let v = u * inverse_sqrt_hermitian(&gram, sv_tol * sv_tol);
        out.unitarity_defects.push(unitarity_defect(&v));
        out.gram_offblock.push(off_block_norm(&gram, blocks, Norm::Spectral));
        out.ops.push(v);
    }
    Ok(out)
}

/// `M_eff(t) = U⁻¹(t) M(t) U(t0)`.
pub fn effective_from_wave(u_path: &WaveOperatorPath, m_path: &PropagatorPath) -> Result<Vec<CMatrix>> {
    let u0 = &u_path.ops[0];
    u_path
        .ops
        .iter()
        .zip(&m_path.ops)
        .map(|(u, m)| {
            let inv = u.clone().lu().try_inverse().ok_or(Error::SingularBlock {
                block: 0,
                sv: 0.0,
                tol: 0.0,
            })?;
            Ok(inv * m * u0)
        })
        .collect()
}

/// One inequality of the bound chain: `sup lhs` against `bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub what: &'static str,
    pub lhs: f64,
    pub bound: f64,
    /// Time at which `lhs − bound` is largest.
    pub t: f64,
}

impl BoundCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.bound + slack
    }

    fn violation(&self) -> Error {
        Error::BoundViolated {
            t: self.t,
            lhs: self.lhs,
            bound: self.bound,
            what: self.what,
        }
    }
}

/// Leakage and distance summary for one run.
#[derive(Debug, Clone)]
pub struct LeakageReport {
    /// Sup over checkpoints of `‖(1 − P_k) M P_k‖₂`.
    pub per_block_leakage: Vec<f64>,
    pub per_block_leakage_frobenius: Vec<f64>,
    /// `sup ‖U − 1‖₂`.
    pub delta_spectral: f64,
    /// `sup ‖U − 1‖_F`.
    pub delta_frobenius: f64,
    /// `2δ/(1−δ)`; `None` when `δ ≥ 1`.
    pub bound_eq13: Option<f64>,
    /// `(1+δ)/√(1−2δ−δ²) − 1`; `None` when `2δ + δ² ≥ 1`.
    pub bound_v: Option<f64>,
    /// `sup ‖M − M_eff‖₂`.
    pub distance_m_meff: f64,
    /// `sup ‖V − 1‖₂`, when a unitarised path was supplied.
    pub delta_v: Option<f64>,
    pub delta_out_of_range: bool,
    /// Every inequality checked, in order.
    pub checks: Vec<BoundCheck>,
    pub grid: Vec<f64>,
    pub bound_norm: Norm,
}

impl LeakageReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds(BOUND_SLACK))
    }
}

fn sup_check(what: &'static str, times: &[f64], lhs: impl Iterator<Item = f64>, bound: f64) -> BoundCheck {
    let mut worst = BoundCheck {
        what,
        lhs: f64::NEG_INFINITY,
        bound,
        t: times.first().copied().unwrap_or(f64::NAN),
    };
    for (&t, v) in times.iter().zip(lhs) {
        if v > worst.lhs {
            worst.lhs = v;
            worst.t = t;
        }
    }
    worst
}

/// Assembles the leakage report and checks the bound chain
///
/// * `‖U‖ ≤ 1+δ`, `‖U⁻¹‖ ≤ 1/(1−δ)`, `‖U⁻¹ − 1‖ ≤ δ/(1−δ)`,
/// * `‖M − M_eff‖ ≤ 2δ/(1−δ)`,
/// * `‖U†U − 1‖ ≤ 2δ+δ²`, `‖V − 1‖ ≤ (1+δ)/√(1−2δ−δ²) − 1`,
///
/// with `δ = sup ‖U − 1‖₂`. `m_eff` defaults to `U⁻¹ M U(t0)`. Any violation
/// beyond [`BOUND_SLACK`] is returned as [`Error::BoundViolated`].
pub fn distance_report(
    u_path: &WaveOperatorPath,
    v_path: Option<&UnitarizedPath>,
    m_path: &PropagatorPath,
    m_eff: Option<&[CMatrix]>,
    blocks: &[CMatrix],
) -> Result<LeakageReport> {
    let report = build_report(u_path, v_path, m_path, m_eff, blocks)?;
    if let Some(c) = report.checks.iter().find(|c| !c.holds(BOUND_SLACK)) {
        return Err(c.violation());
    }
    Ok(report)
}

/// [`distance_report`] without failing on violations.
pub fn build_report(
    u_path: &WaveOperatorPath,
    v_path: Option<&UnitarizedPath>,
    m_path: &PropagatorPath,
    m_eff: Option<&[CMatrix]>,
    blocks: &[CMatrix],
) -> Result<LeakageReport> {
    if u_path.is_empty() {
        return Err(Error::InvalidArgument("empty wave-operator path".into()));
    }
    let len = u_path.len().min(m_path.len());
    let times = &u_path.times[..len];
    let us = &u_path.ops[..len];
    let ms = &m_path.ops[..len];
    let n = us[0].nrows();
    let one = identity(n);

    let computed;
    let m_eff: &[CMatrix] = match m_eff {
        Some(e) => e,
        None => {
            computed = effective_from_wave(u_path, m_path)?;
            &computed
        }
    };

    let delta_spectral = us.iter().map(|u| spectral_norm(&(u - &one))).fold(0.0, f64::max);
    let delta_frobenius = us.iter().map(|u| (u - &one).norm()).fold(0.0, f64::max);
    let d = delta_spectral;
    let bound_eq13 = leakage_bound(d).ok();
    let bound_v = v_bound(d).ok();
    let distances: Vec<f64> = ms
        .iter()
        .zip(m_eff)
        .map(|(m, e)| spectral_norm(&(m - e)))
        .collect();
    let distance_m_meff = distances.iter().copied().fold(0.0, f64::max);

    let mut checks = vec![sup_check(
        "|U| <= 1 + delta",
        times,
        us.iter().map(spectral_norm),
        1.0 + d,
    )];
    checks.push(sup_check(
        "|U^dag U - 1| <= 2 delta + delta^2",
        times,
        us.iter().map(|u| spectral_norm(&(u.adjoint() * u - &one))),
        2.0 * d + d * d,
    ));
    if let Some(bound) = bound_eq13 {
        let inverses: Vec<CMatrix> = us
            .iter()
            .map(|u| u.clone().lu().try_inverse().unwrap_or_else(|| CMatrix::from_element(n, n, f64::INFINITY.into())))
            .collect();
        checks.push(sup_check(
            "|U^-1| <= 1/(1 - delta)",
            times,
            inverses.iter().map(spectral_norm),
            1.0 / (1.0 - d),
        ));
        checks.push(sup_check(
            "|U^-1 - 1| <= delta/(1 - delta)",
            times,
            inverses.iter().map(|i| spectral_norm(&(i - &one))),
            d / (1.0 - d),
        ));
        checks.push(sup_check(
            "|M - M_eff| <= 2 delta/(1 - delta)",
            times,
            distances.iter().copied(),
            bound,
        ));
    }
    let delta_v = v_path.map(|v| v.delta(Norm::Spectral));
    if let (Some(v), Some(bound)) = (v_path, bound_v) {
        checks.push(sup_check(
            "|V - 1| <= (1 + delta)/sqrt(1 - 2 delta - delta^2) - 1",
            &v.times,
            v.ops.iter().map(|v| spectral_norm(&(v - &one))),
            bound,
        ));
    }

    Ok(LeakageReport {
        per_block_leakage: leakage(m_path, blocks, Norm::Spectral),
        per_block_leakage_frobenius: leakage(m_path, blocks, Norm::Frobenius),
        delta_spectral,
        delta_frobenius,
        bound_eq13,
        bound_v,
        distance_m_meff,
        delta_v,
        delta_out_of_range: bound_eq13.is_none() || bound_v.is_none(),
        checks,
        grid: times.to_vec(),
        bound_norm: Norm::Spectral,
    })
}
