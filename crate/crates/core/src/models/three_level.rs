use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;

use super::{check_gamma, GeneratorModel};
use crate::error::{Error, Result};
use crate::operator::{c, zeros, CMatrix, SpectralDecomposition, I};

/// Time-dependent drive amplitude `a(t)`.
pub type Envelope = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLevelParameters {
    /// Detuning of the third level in units of `omega`.
    pub gamma: f64,
    /// Drive amplitude.
    pub a: f64,
    pub omega: f64,
}

impl Default for ThreeLevelParameters {
    fn default() -> Self {
        Self {
            gamma: 10.0,
            a: 1.0,
            omega: 1.0,
        }
    }
}

/// Resonantly driven three-level system in the interaction picture of
/// `Ĥ₀(γ = 0) = diag(0, ω, 2ω)`:
///
/// `B = −iω diag(0, 0, 1)`, `C(t) = (a/2)[K + K(t)]`, where `K(t)` carries the
/// phases `e^{∓2iωt}` on the upper and lower off-diagonals.
///
/// Blocks are `{1, 2}` and `{3}`.
#[derive(Clone)]
pub struct ThreeLevel {
    pub params: ThreeLevelParameters,
    envelope: Option<Envelope>,
}

pub fn three_level_model(p: ThreeLevelParameters) -> Result<ThreeLevel> {
    check_gamma(p.gamma)?;
    if !(p.a.is_finite() && p.a >= 0.0) {
        return Err(Error::OutOfRange {
            name: "a",
            value: p.a,
            expected: "finite and >= 0",
        });
    }
    if !(p.omega.is_finite() && p.omega > 0.0) {
        return Err(Error::OutOfRange {
            name: "omega",
            value: p.omega,
            expected: "finite and > 0",
        });
    }
    if p.a > 0.0 && p.gamma < 5.0 * p.a {
        log::warn!(
            "three-level model with gamma = {} and a = {}: outside the perturbative regime",
            p.gamma,
            p.a
        );
    }
    Ok(ThreeLevel {
        params: p,
        envelope: None,
    })
}

const K12: f64 = 0.5;
const K23: f64 = FRAC_1_SQRT_2;

impl ThreeLevel {
    /// Replaces the constant amplitude by `a · envelope(t)`.
    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = Some(envelope);
        self
    }

    fn amplitude(&self, t: f64) -> f64 {
        self.params.a * self.envelope.as_ref().map_or(1.0, |e| e(t))
    }

    /// Static coupling pattern: `(1,2) = −k12, (2,1) = k12, (2,3) = −k23,
    /// (3,2) = k23`, with the upper entries multiplied by `up` and the lower
    /// ones by `down`.
    fn pattern(up: Complex64, down: Complex64) -> CMatrix {
        let mut k = zeros(3);
        k[(0, 1)] = -K12 * up;
        k[(1, 0)] = K12 * down;
        k[(1, 2)] = -K23 * up;
        k[(2, 1)] = K23 * down;
        k
    }

    /// Lab-frame generator `−iĤ(γ, t)`.
    pub fn lab_generator(&self, t: f64) -> CMatrix {
        let w = self.params.omega;
        let mut h = zeros(3);
        h[(1, 1)] = c(0.0, -w);
        h[(2, 2)] = c(0.0, -w * (2.0 + self.params.gamma));
        let drive = Self::pattern(c(1.0, 0.0), c(1.0, 0.0));
        h + drive.scale(self.amplitude(t) * (w * t).cos())
    }

    /// `exp(−itĤ₀(γ = 0))`, mapping interaction-picture states to the lab.
    pub fn interaction_transform(&self, t: f64) -> CMatrix {
        let w = self.params.omega;
        let mut u = zeros(3);
        u[(0, 0)] = c(1.0, 0.0);
        u[(1, 1)] = Complex64::from_polar(1.0, -w * t);
        u[(2, 2)] = Complex64::from_polar(1.0, -2.0 * w * t);
        u
    }
}

impl GeneratorModel for ThreeLevel {
    fn name(&self) -> &str {
        "three-level"
    }

    fn dim(&self) -> usize {
        3
    }

    fn gamma(&self) -> f64 {
        self.params.gamma
    }

    fn drift(&self, _t: f64) -> CMatrix {
        let mut b = zeros(3);
        b[(2, 2)] = -I * self.params.omega;
        b
    }

    fn drive(&self, t: f64) -> CMatrix {
        let one = c(1.0, 0.0);
        let phase = Complex64::from_polar(1.0, 2.0 * self.params.omega * t);
        let k = Self::pattern(one, one) + Self::pattern(phase.conj(), phase);
        k.scale(0.5 * self.amplitude(t))
    }

    fn analytic_spectral(&self, _t: f64) -> Option<SpectralDecomposition> {
        let mut p12 = zeros(3);
        p12[(0, 0)] = c(1.0, 0.0);
        p12[(1, 1)] = c(1.0, 0.0);
        let mut p3 = zeros(3);
        p3[(2, 2)] = c(1.0, 0.0);
        Some(SpectralDecomposition {
            eigenvalues: vec![c(0.0, 0.0), c(0.0, -self.params.omega)],
            projectors: vec![p12, p3],
            multiplicities: vec![2, 1],
        })
    }

    fn analytic_projector_derivatives(&self, _t: f64) -> Option<Vec<CMatrix>> {
        Some(vec![zeros(3), zeros(3)])
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("gamma", self.params.gamma),
            ("a", self.params.a),
            ("omega", self.params.omega),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{decompose, max_abs_diff, skew_hermitian_defect};
    use std::f64::consts::FRAC_PI_2;

    fn model(a: f64) -> ThreeLevel {
        three_level_model(ThreeLevelParameters {
            gamma: 10.0,
            a,
            omega: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn drive_entries() {
        let m = model(1.0);
        assert!((m.drive(0.0)[(1, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!(m.drive(FRAC_PI_2)[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn zero_amplitude_is_pure_drift() {
        let m = model(0.0);
        assert_eq!(m.drive(1.3), zeros(3));
    }

    #[test]
    fn generators_skew_hermitian() {
        let m = model(1.7);
        for i in 0..100 {
            let t = -50.0 + 1.37 * i as f64;
            assert!(skew_hermitian_defect(&m.generator(t)) < 1e-14);
            assert!(skew_hermitian_defect(&m.lab_generator(t)) < 1e-14);
        }
    }

    #[test]
    fn analytic_spectral_matches_numeric() {
        let m = model(1.0);
        let a = m.analytic_spectral(0.0).unwrap();
        let n = decompose(&m.drift(0.0), 1e-8).unwrap();
        assert_eq!(n.multiplicities, vec![2, 1]);
        for k in 0..2 {
            assert!(max_abs_diff(&a.projectors[k], &n.projectors[k]) < 1e-14);
        }
    }

    #[test]
    fn interaction_picture_generator() {
        // H_I = T† G_lab T − T† Ṫ with T = exp(−itĤ₀(0)).
        let m = model(1.3);
        let t = 0.77;
        let tr = m.interaction_transform(t);
        let mut tdot_term = zeros(3);
        tdot_term[(1, 1)] = c(0.0, -1.0);
        tdot_term[(2, 2)] = c(0.0, -2.0);
        let h_i = tr.adjoint() * m.lab_generator(t) * &tr - tdot_term;
        assert!(max_abs_diff(&h_i, &m.generator(t)) < 1e-14);
    }

    #[test]
    fn envelope_scales_drive() {
        let m = model(1.0).with_envelope(Arc::new(|t| 0.5 * (1.0 + t.min(1.0))));
        let base = model(1.0);
        assert!(max_abs_diff(&m.drive(0.0), &base.drive(0.0).scale(0.5)) < 1e-15);
        assert!(max_abs_diff(&m.drive(3.0), &base.drive(3.0)) < 1e-15);
    }
}
