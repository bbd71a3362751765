use std::f64::consts::PI;

use num_complex::Complex64;

use super::{check_gamma, GeneratorModel};
use crate::error::Result;
use crate::operator::{identity, pauli_x, pauli_y, pauli_z, zeros, CMatrix, SpectralDecomposition, I};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LzParameters {
    pub gamma: f64,
}

/// Landau–Zener sweep: `B̄(t) = −i(X + tZ)`, `C̄ = 0`.
///
/// Blocks are labelled `[+, −]` with `b_± = ±i√(1+t²)` and
/// `P_± = ½(1 ∓ (X + tZ)/√(1+t²))`.
#[derive(Debug, Clone)]
pub struct LandauZener {
    pub params: LzParameters,
}

pub fn landau_zener_model(p: LzParameters) -> Result<LandauZener> {
    check_gamma(p.gamma)?;
    Ok(LandauZener { params: p })
}

impl LandauZener {
    fn sweep(t: f64) -> CMatrix {
        pauli_x() + pauli_z().scale(t)
    }

    pub fn projectors(t: f64) -> [CMatrix; 2] {
        let r = (1.0 + t * t).sqrt();
        let s = Self::sweep(t).scale(0.5 / r);
        let half = identity(2).scale(0.5);
        [&half - &s, &half + &s]
    }

    pub fn projector_derivatives(t: f64) -> [CMatrix; 2] {
        let d = (pauli_z() - pauli_x().scale(t)).scale(0.5 / (1.0 + t * t).powf(1.5));
        [-d.clone(), d]
    }
}

impl GeneratorModel for LandauZener {
    fn name(&self) -> &str {
        "landau-zener"
    }

    fn dim(&self) -> usize {
        2
    }

    fn gamma(&self) -> f64 {
        self.params.gamma
    }

    fn drift(&self, t: f64) -> CMatrix {
        Self::sweep(t).map(|v| -I * v)
    }

    fn drive(&self, _t: f64) -> CMatrix {
        zeros(2)
    }

    fn analytic_spectral(&self, t: f64) -> Option<SpectralDecomposition> {
        let r = (1.0 + t * t).sqrt();
        Some(SpectralDecomposition {
            eigenvalues: vec![Complex64::new(0.0, r), Complex64::new(0.0, -r)],
            projectors: Self::projectors(t).to_vec(),
            multiplicities: vec![1, 1],
        })
    }

    fn analytic_projector_derivatives(&self, t: f64) -> Option<Vec<CMatrix>> {
        Some(Self::projector_derivatives(t).to_vec())
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![("gamma", self.params.gamma)]
    }
}

/// `W(t, t0) = exp(iY[arctan t − arctan t0]/2)`.
pub fn closed_form_transporter(t0: f64, t: f64) -> CMatrix {
    let theta = 0.5 * (t.atan() - t0.atan());
    // Y² = 1, so exp(iθY) = cos θ + i sin θ Y.
    identity(2).scale(theta.cos()) + pauli_y().map(|v| I * theta.sin() * v)
}

/// Asymptotic Landau–Zener amplitudes `(sin φ, tan φ)` with
/// `sin φ = e^{−πγ/2}`: the per-block leakage and `‖U − 1‖₂` as `T → ∞`.
pub fn lz_asymptotic_amplitude(gamma: f64) -> (f64, f64) {
    let s = (-PI * gamma / 2.0).exp();
    (s, s / (1.0 - s * s).sqrt())
}
