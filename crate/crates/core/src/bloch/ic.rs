use crate::error::{Error, Result};
use crate::operator::{
    block_pseudo_inverse, check_block_family, commutator, hermitian_eigen, identity, CMatrix,
    SpectralDecomposition, I,
};

use super::{bloch_defect, riccati_rhs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IcKind {
    Identity,
    Stationary,
    Custom,
}

impl IcKind {
    pub fn name(self) -> &'static str {
        match self {
            IcKind::Identity => "identity",
            IcKind::Stationary => "stationary",
            IcKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for IcKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" => Ok(IcKind::Identity),
            "stationary" => Ok(IcKind::Stationary),
            "custom" => Ok(IcKind::Custom),
            other => Err(Error::InvalidArgument(format!(
                "unknown initial condition `{other}`"
            ))),
        }
    }
}

/// Initial value `U(t0)` of the wave operator.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochInitialCondition {
    pub kind: IcKind,
    pub u0: CMatrix,
}

impl BlochInitialCondition {
    /// Checks the Bloch condition `P_k U0 P_k = P_k` and that `U0†U0`
    /// commutes with every `P_k`.
    pub fn validate(&self, blocks: &[CMatrix], tol: f64) -> Result<()> {
        let n = self.u0.nrows();
        if blocks.iter().any(|p| p.nrows() != n) {
            return Err(Error::DimensionMismatch {
                expected: blocks[0].nrows(),
                found: n,
            });
        }
        let defect = bloch_defect(&self.u0, blocks);
        if !(defect <= tol) {
            return Err(Error::BadInitialCondition(format!(
                "Bloch condition violated by {defect:.3e}"
            )));
        }
        let gram = self.u0.adjoint() * &self.u0;
        let comm = blocks
            .iter()
            .map(|p| commutator(&gram, p).norm())
            .fold(0.0, f64::max);
        if !(comm <= tol * gram.norm().max(1.0)) {
            return Err(Error::BadInitialCondition(format!(
                "U0†U0 does not commute with the blocks ({comm:.3e})"
            )));
        }
        Ok(())
    }
}

/// `U(t0) = 1`.
pub fn identity_ic(blocks: &[CMatrix]) -> BlochInitialCondition {
    BlochInitialCondition {
        kind: IcKind::Identity,
        u0: identity(blocks.first().map_or(0, |p| p.nrows())),
    }
}

/// User-supplied `U(t0)`, validated against the blocks.
pub fn custom_ic(u0: CMatrix, blocks: &[CMatrix], tol: f64) -> Result<BlochInitialCondition> {
    check_block_family(blocks, 1e-8)?;
    let ic = BlochInitialCondition {
        kind: IcKind::Custom,
        u0,
    };
    ic.validate(blocks, tol)?;
    Ok(ic)
}

/// Wave operator of the time-independent problem frozen at `t0`:
/// `U0 = Σ_k P̃_k P_k [P_k P̃_k P_k]⁺`, where `P̃_k` is the spectral projector
/// of `H0 = γB(t0) + C(t0)` onto the eigenvalues nearest `γ b_k`.
///
/// With the ambiguity margin `m = 0.25 γ · min_gap`, an eigenvalue is assigned
/// to its nearest block only if it lies within `γ · min_gap / 2 − m` of
/// `γ b_k`, and each block must receive exactly its multiplicity.
pub fn stationary_ic(
    h0: &CMatrix,
    strong: &SpectralDecomposition,
    gamma: f64,
    sv_tol: f64,
) -> Result<BlochInitialCondition> {
    let n = h0.nrows();
    if strong.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: strong.dim(),
            found: n,
        });
    }
    if strong.n_blocks() == 1 {
        return Ok(BlochInitialCondition {
            kind: IcKind::Stationary,
            u0: identity(n),
        });
    }
    // H0 = −i V diag(λ) V†, b_k = −iβ_k.
    let (lambda, vectors) = hermitian_eigen(&h0.map(|z| I * z));
    let beta: Vec<f64> = strong.eigenvalues.iter().map(|b| -b.im).collect();
    let targets: Vec<f64> = beta.iter().map(|b| gamma * b).collect();
    let margin = 0.25 * gamma * strong.min_gap();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); targets.len()];
    for (j, &l) in lambda.iter().enumerate() {
        let mut dist: Vec<(f64, usize)> = targets
            .iter()
            .enumerate()
            .map(|(k, &c)| ((l - c).abs(), k))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        let radius = 0.5 * gamma * strong.min_gap() - margin;
        if dist[0].0 > radius {
            return Err(Error::AmbiguousClustering(format!(
                "eigenvalue {l:.6} of H(t0) is {:.3e} from block {}, beyond the unambiguous radius {radius:.3e}",
                dist[0].0, dist[0].1
            )));
        }
        members[dist[0].1].push(j);
    }

    let mut u0 = CMatrix::zeros(n, n);
    for (k, (p, idx)) in strong.projectors.iter().zip(&members).enumerate() {
        if idx.len() != strong.multiplicities[k] {
            return Err(Error::AmbiguousClustering(format!(
                "block {k} of multiplicity {} attracted {} eigenvalues of H(t0)",
                strong.multiplicities[k],
                idx.len()
            )));
        }
        let mut pt = CMatrix::zeros(n, n);
        for &j in idx {
            let v = vectors.column(j);
            pt += &v * v.adjoint();
        }
        let x = block_pseudo_inverse(&pt, p, sv_tol).map_err(|e| e.for_block(k))?;
        u0 += &pt * p * x;
    }
    Ok(BlochInitialCondition {
        kind: IcKind::Stationary,
        u0,
    })
}

/// `‖H0 U0 − U0 Q(U0)‖₂`: vanishes when `U0` solves the frozen problem.
pub fn stationarity_residual(h0: &CMatrix, ic: &BlochInitialCondition, blocks: &[CMatrix]) -> f64 {
    crate::operator::spectral_norm(&riccati_rhs(h0, &ic.u0, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c, decompose, max_abs_diff, pauli_x, zeros};

    fn two_level(eps: f64) -> (CMatrix, SpectralDecomposition) {
        let mut b = zeros(2);
        b[(1, 1)] = c(0.0, -1.0);
        let strong = decompose(&b, 1e-8).unwrap();
        let h0 = b + pauli_x().map(|v| -I * eps * v);
        (h0, strong)
    }

    #[test]
    fn unperturbed_gives_identity() {
        let (_, strong) = two_level(0.0);
        let mut b = zeros(2);
        b[(1, 1)] = c(0.0, -3.0);
        let ic = stationary_ic(&b, &strong, 3.0, 1e-10).unwrap();
        assert!(max_abs_diff(&ic.u0, &identity(2)) < 1e-14);
    }

    #[test]
    fn two_level_matches_exact_eigenvectors() {
        let eps = 0.1;
        let (h0, strong) = two_level(eps);
        let ic = stationary_ic(&h0, &strong, 1.0, 1e-10).unwrap();
        ic.validate(&strong.projectors, 1e-12).unwrap();
        assert!(stationarity_residual(&h0, &ic, &strong.projectors) < 1e-12);
        // iH0 = [[0, ε], [ε, 1]]; the low eigenvector is (1, x) with
        // x = (1 − √(1 + 4ε²)) / (2ε), so U0 e0 = (1, x).
        let x = (1.0 - (1.0 + 4.0 * eps * eps).sqrt()) / (2.0 * eps);
        assert!((strong.projectors[0][(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((ic.u0[(1, 0)].re - x).abs() < 1e-12);
        assert!((ic.u0[(0, 1)].re + x).abs() < 1e-12);
    }

    #[test]
    fn strong_coupling_is_ambiguous() {
        let (h0, strong) = two_level(2.0);
        let err = stationary_ic(&h0, &strong, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::AmbiguousClustering(_)));
    }

    #[test]
    fn custom_ic_validation() {
        let (_, strong) = two_level(0.0);
        let blocks = &strong.projectors;
        assert!(custom_ic(identity(2), blocks, 1e-12).is_ok());
        assert!(custom_ic(identity(2).scale(2.0), blocks, 1e-12).is_err());
        // Off-block entries that break [U0†U0, P_k] = 0.
        let mut u = identity(2);
        u[(0, 1)] = c(0.3, 0.0);
        u[(1, 0)] = c(0.5, 0.0);
        assert!(matches!(
            custom_ic(u, blocks, 1e-12),
            Err(Error::BadInitialCondition(_))
        ));
    }
}
