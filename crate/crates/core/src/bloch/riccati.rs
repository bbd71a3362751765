use num_complex::Complex64;

use super::{bloch_defect, BlochInitialCondition, WaveOperatorPath};
use crate::error::{Error, Result};
use crate::operator::{
    block_project, check_block_family, identity, range_basis, singular_values, spectral_norm,
    CMatrix,
};
use crate::propagation::{
    check_start, integrate, mat, Augmented, HamiltonianSource, Payload, PropagateOptions,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiOptions {
    pub propagation: PropagateOptions,
    /// Re-impose `P_k U P_k = P_k` after every accepted step.
    pub project: bool,
    /// Blow-up when the effective evolution has a block singular value below
    /// this.
    pub sv_tol: f64,
    /// Blow-up when `‖U‖₂` exceeds this.
    pub blowup_norm: f64,
}

impl RiccatiOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            propagation: PropagateOptions::new(tol),
            ..Self::default()
        }
    }
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            propagation: PropagateOptions::default(),
            project: true,
            sv_tol: 1e-8,
            blowup_norm: 1e6,
        }
    }
}

/// `U̇ = HU − U Q(U)` with `Q(U) = Σ_k P_k H U P_k`.
pub fn riccati_rhs(h: &CMatrix, u: &CMatrix, blocks: &[CMatrix]) -> CMatrix {
    let hu = h * u;
    let q = block_project(&hu, blocks);
    hu - u * q
}

/// State `[U, Z]` with `Ż = Q(U) Z`, `Z(t0) = 1`; `Z` is the effective Bloch
/// evolution and its diagonal blocks certify existence.
struct RiccatiPayload<'a> {
    n: usize,
    blocks: &'a [CMatrix],
    bases: Vec<CMatrix>,
    opts: RiccatiOptions,
}

impl RiccatiPayload<'_> {
    fn min_block_sv(&self, z: &CMatrix) -> f64 {
        self.bases
            .iter()
            .filter(|q| q.ncols() > 0)
            .map(|q| {
                singular_values(&(q.adjoint() * z * q))
                    .into_iter()
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

impl Payload for RiccatiPayload<'_> {
    fn rhs(&self, h: &CMatrix, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
        let nn = self.n * self.n;
        let u = mat(self.n, y);
        let z = mat(self.n, &y[nn..]);
        let hu = h * &u;
        let q = block_project(&hu, self.blocks);
        let du = hu - &u * &q;
        let dz = q * z;
        dy[..nn].copy_from_slice(du.as_slice());
        dy[nn..].copy_from_slice(dz.as_slice());
        Ok(())
    }

    fn project(&self, y: &mut [Complex64]) -> f64 {
        if !self.opts.project {
            return 0.0;
        }
        let nn = self.n * self.n;
        let u = mat(self.n, y);
        let defect = bloch_defect(&u, self.blocks);
        let fixed = &u - block_project(&u, self.blocks) + identity(self.n);
        let z = block_project(&mat(self.n, &y[nn..]), self.blocks);
        y[..nn].copy_from_slice(fixed.as_slice());
        y[nn..].copy_from_slice(z.as_slice());
        defect
    }

    fn check(&self, t: f64, y: &[Complex64]) -> Result<()> {
        let nn = self.n * self.n;
        if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::BlowUp {
                t,
                reason: "non-finite wave operator".into(),
            });
        }
        let u = mat(self.n, y);
        if u.norm() > self.opts.blowup_norm {
            let norm = spectral_norm(&u);
            if norm > self.opts.blowup_norm {
                return Err(Error::BlowUp {
                    t,
                    reason: format!("|U| = {norm:.3e} exceeds {:.1e}", self.opts.blowup_norm),
                });
            }
        }
        let sv = self.min_block_sv(&mat(self.n, &y[nn..]));
        if sv < self.opts.sv_tol {
            return Err(Error::BlowUp {
                t,
                reason: format!(
                    "effective evolution singular: block singular value {sv:.3e} below {:.1e}",
                    self.opts.sv_tol
                ),
            });
        }
        Ok(())
    }
}

/// Integrates the Bloch equation for the generator `source` from `ic` on
/// `grid` (starting at `t0`).
///
/// Blow-up (`‖U‖₂ > blowup_norm` or a block singular value of the effective
/// evolution below `sv_tol`) does not raise an error: the path is truncated
/// at the blow-up time and `blowup_flag` is set.
pub fn integrate_riccati<G: HamiltonianSource + ?Sized>(
    source: &G,
    t0: f64,
    grid: &[f64],
    ic: &BlochInitialCondition,
    blocks: &[CMatrix],
    opts: &RiccatiOptions,
) -> Result<WaveOperatorPath> {
    Ok(integrate_riccati_full(source, t0, grid, ic, blocks, opts)?.0)
}

/// [`integrate_riccati`], also returning the effective evolution `Z(t)` at
/// every checkpoint.
pub(crate) fn integrate_riccati_full<G: HamiltonianSource + ?Sized>(
    source: &G,
    t0: f64,
    grid: &[f64],
    ic: &BlochInitialCondition,
    blocks: &[CMatrix],
    opts: &RiccatiOptions,
) -> Result<(WaveOperatorPath, Vec<CMatrix>)> {
    check_start(t0, grid)?;
    check_block_family(blocks, 1e-8)?;
    let n = source.dim();
    if ic.u0.shape() != (n, n) || blocks[0].nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: ic.u0.nrows(),
        });
    }
    ic.validate(blocks, 1e-8)?;

    let payload = RiccatiPayload {
        n,
        blocks,
        bases: blocks.iter().map(range_basis).collect(),
        opts: *opts,
    };
    let sys = Augmented {
        gen: source,
        payload: &payload,
        steps_per_period: opts.propagation.steps_per_period,
    };
    let mut y0 = ic.u0.as_slice().to_vec();
    y0.extend_from_slice(identity(n).as_slice());
    let traj = integrate(&sys, grid, sys.initial_state(&y0), &opts.propagation.integrator())?;

    let nn = n * n;
    let mut ops = Vec::with_capacity(traj.states.len());
    let mut effective = Vec::with_capacity(traj.states.len());
    let mut bloch_defects = Vec::with_capacity(traj.states.len());
    let mut min_block_sv = Vec::with_capacity(traj.states.len());
    for (y, &corr) in traj.states.iter().zip(&traj.corrections) {
        let (_, p) = sys.split(y);
        let u = mat(n, p);
        let z = mat(n, &p[nn..]);
        bloch_defects.push(corr.max(bloch_defect(&u, blocks)));
        min_block_sv.push(payload.min_block_sv(&z));
        ops.push(u);
        effective.push(z);
    }
    ops[0] = ic.u0.clone();
    let self_check = traj.corrections.iter().copied().fold(0.0, f64::max);
    let blowup = traj.stopped.map(|(t, e)| {
        let reason = match e {
            Error::BlowUp { reason, .. } => reason,
            other => other.to_string(),
        };
        (t, reason)
    });
    let path = WaveOperatorPath {
        t0,
        times: traj.times,
        ops,
        blocks: blocks.to_vec(),
        bloch_defects,
        min_block_sv,
        blowup_flag: blowup.is_some(),
        blowup,
        self_check,
    };
    Ok((path, effective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::identity_ic;
    use crate::operator::{c, max_abs_diff, pauli_x, zeros, I};
    use crate::propagation::FnGenerator;

    fn diag_blocks() -> Vec<CMatrix> {
        let mut p = zeros(2);
        p[(0, 0)] = c(1.0, 0.0);
        let q = identity(2) - &p;
        vec![p, q]
    }

    #[test]
    fn block_diagonal_generator_keeps_identity() {
        let blocks = diag_blocks();
        let gen = FnGenerator::new(2, |t: f64| {
            let mut h = zeros(2);
            h[(0, 0)] = c(0.0, -t.cos());
            h[(1, 1)] = c(0.0, 3.0);
            h
        });
        let ic = identity_ic(&blocks);
        let path =
            integrate_riccati(&gen, 0.0, &[0.0, 1.0, 2.0], &ic, &blocks, &RiccatiOptions::new(1e-10))
                .unwrap();
        for u in &path.ops {
            assert!(max_abs_diff(u, &identity(2)) < 1e-14);
        }
        assert!(!path.blowup_flag);
    }

    #[test]
    fn rhs_vanishes_on_block_diagonal_problem() {
        let blocks = diag_blocks();
        let mut h = zeros(2);
        h[(1, 1)] = c(0.0, -2.0);
        assert_eq!(riccati_rhs(&h, &identity(2), &blocks), zeros(2));
    }

    #[test]
    fn strong_coupling_blows_up() {
        // Degenerate blocks with strong coupling: U_21 = tan t reaches a pole
        // at t = π/2, where the effective evolution cos t vanishes.
        let blocks = diag_blocks();
        let gen = FnGenerator::new(2, |_| pauli_x().map(|v| -I * v));
        let ic = identity_ic(&blocks);
        let path =
            integrate_riccati(&gen, 0.0, &[0.0, 1.0, 3.0], &ic, &blocks, &RiccatiOptions::new(1e-10))
                .unwrap();
        assert!(path.blowup_flag);
        let (t, _) = path.blowup.clone().unwrap();
        assert!(t > 1.0 && t < std::f64::consts::FRAC_PI_2 + 1e-3, "t = {t}");
        assert!((path.ops[1][(1, 0)] - c(0.0, -1.0f64.tan())).norm() < 1e-8);
    }
}
