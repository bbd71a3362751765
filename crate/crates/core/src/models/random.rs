use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{check_gamma, GeneratorModel};
use crate::error::{Error, Result};
use crate::operator::{commutator, expm_skew_hermitian, zeros, CMatrix, SpectralDecomposition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSmoothParams {
    pub dim: usize,
    pub n_blocks: usize,
    pub seed: u64,
    pub gamma: f64,
    /// Distance between consecutive block eigenvalues.
    pub spacing: f64,
    /// Amplitude of the eigenvalue wobble; must stay below `spacing / 2`.
    pub wobble: f64,
    /// Frobenius norm of the frame rotation generator.
    pub rotation: f64,
    /// Frobenius norm of each drive component.
    pub drive_scale: f64,
    /// Angular frequency of the trigonometric time dependence.
    pub frequency: f64,
}

impl Default for RandomSmoothParams {
    fn default() -> Self {
        Self {
            dim: 4,
            n_blocks: 2,
            seed: 0,
            gamma: 8.0,
            spacing: 1.0,
            wobble: 0.2,
            rotation: 0.3,
            drive_scale: 1.0,
            frequency: 1.0,
        }
    }
}

impl RandomSmoothParams {
    /// Lower bound on the eigenvalue gap of the drift at all times.
    pub fn gap_floor(&self) -> f64 {
        self.spacing - 2.0 * self.wobble
    }
}

/// Random model with drift `R(t) D(t) R(t)†`, `R(t) = exp(tK)`, where `D(t)`
/// is block-diagonal with eigenvalues `−i(c_k + ε_k sin(νt + φ_k))`, and drive
/// `S₀ + S₁ cos νt + S₂ sin νt`. Blocks cannot cross by construction.
#[derive(Debug, Clone)]
pub struct RandomSmooth {
    pub params: RandomSmoothParams,
    rotation: CMatrix,
    frozen: Vec<CMatrix>,
    multiplicities: Vec<usize>,
    centers: Vec<f64>,
    wobbles: Vec<f64>,
    phases: Vec<f64>,
    drive: [CMatrix; 3],
}

pub fn random_smooth_model(p: RandomSmoothParams) -> Result<RandomSmooth> {
    check_gamma(p.gamma)?;
    if p.dim < 2 || p.n_blocks == 0 || p.n_blocks > p.dim {
        return Err(Error::InvalidArgument(format!(
            "random model needs dim >= 2 and 1 <= blocks <= dim (dim = {}, blocks = {})",
            p.dim, p.n_blocks
        )));
    }
    if !(p.gap_floor() > 0.0) {
        return Err(Error::OutOfRange {
            name: "wobble",
            value: p.wobble,
            expected: "below spacing / 2",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = p.dim;

    let base = p.dim / p.n_blocks;
    let extra = p.dim % p.n_blocks;
    let multiplicities: Vec<usize> = (0..p.n_blocks)
        .map(|k| base + usize::from(k < extra))
        .collect();
    let mut frozen = Vec::with_capacity(p.n_blocks);
    let mut start = 0;
    for &m in &multiplicities {
        let mut e = zeros(n);
        for i in start..start + m {
            e[(i, i)] = Complex64::new(1.0, 0.0);
        }
        frozen.push(e);
        start += m;
    }

    let rotation = random_skew(&mut rng, n, p.rotation);
    let centers = (0..p.n_blocks).map(|k| k as f64 * p.spacing).collect();
    let wobbles = (0..p.n_blocks)
        .map(|_| p.wobble * rng.random_range(-1.0..=1.0))
        .collect();
    let phases = (0..p.n_blocks)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let drive = [
        random_skew(&mut rng, n, p.drive_scale),
        random_skew(&mut rng, n, p.drive_scale),
        random_skew(&mut rng, n, p.drive_scale),
    ];
    Ok(RandomSmooth {
        params: p,
        rotation,
        frozen,
        multiplicities,
        centers,
        wobbles,
        phases,
        drive,
    })
}

fn random_skew(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let s = (&g - g.adjoint()).scale(0.5);
    let f = s.norm();
    if f > 0.0 {
        s.scale(norm / f)
    } else {
        s
    }
}

impl RandomSmooth {
    fn frame(&self, t: f64) -> CMatrix {
        expm_skew_hermitian(&self.rotation.scale(t))
    }

    fn eigenvalue(&self, k: usize, t: f64) -> Complex64 {
        let nu = self.params.frequency;
        let lambda = self.centers[k] + self.wobbles[k] * (nu * t + self.phases[k]).sin();
        Complex64::new(0.0, -lambda)
    }

    fn projectors(&self, t: f64) -> Vec<CMatrix> {
        let r = self.frame(t);
        self.frozen.iter().map(|e| &r * e * r.adjoint()).collect()
    }
}

impl GeneratorModel for RandomSmooth {
    fn name(&self) -> &str {
        "random"
    }

    fn dim(&self) -> usize {
        self.params.dim
    }

    fn gamma(&self) -> f64 {
        self.params.gamma
    }

    fn drift(&self, t: f64) -> CMatrix {
        let n = self.params.dim;
        let d = self
            .frozen
            .iter()
            .enumerate()
            .fold(zeros(n), |acc, (k, e)| acc + e * self.eigenvalue(k, t));
        let r = self.frame(t);
        &r * d * r.adjoint()
    }

    fn drive(&self, t: f64) -> CMatrix {
        let nu = self.params.frequency;
        &self.drive[0] + self.drive[1].scale((nu * t).cos()) + self.drive[2].scale((nu * t).sin())
    }

    fn analytic_spectral(&self, t: f64) -> Option<SpectralDecomposition> {
        Some(SpectralDecomposition {
            eigenvalues: (0..self.frozen.len())
                .map(|k| self.eigenvalue(k, t))
                .collect(),
            projectors: self.projectors(t),
            multiplicities: self.multiplicities.clone(),
        })
    }

    fn analytic_projector_derivatives(&self, t: f64) -> Option<Vec<CMatrix>> {
        // R and K commute, so d/dt (R E R†) = [K, R E R†].
        Some(
            self.projectors(t)
                .iter()
                .map(|p| commutator(&self.rotation, p))
                .collect(),
        )
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("gamma", self.params.gamma),
            ("dim", self.params.dim as f64),
            ("blocks", self.params.n_blocks as f64),
            ("seed", self.params.seed as f64),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{decompose, match_labels, max_abs_diff, skew_hermitian_defect};

    fn model(seed: u64) -> RandomSmooth {
        random_smooth_model(RandomSmoothParams {
            seed,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn deterministic_in_seed() {
        let (a, b) = (model(7), model(7));
        for &t in &[0.0, 0.5, 3.0] {
            assert_eq!(a.drift(t), b.drift(t));
            assert_eq!(a.drive(t), b.drive(t));
        }
        assert_ne!(model(8).drive(0.0), a.drive(0.0));
    }

    #[test]
    fn analytic_data_reconstructs_drift() {
        let m = model(3);
        for &t in &[0.0, 1.1, 4.2] {
            let s = m.analytic_spectral(t).unwrap();
            assert!(max_abs_diff(&s.reconstruct(), &m.drift(t)) < 1e-12);
            assert!(s.defects().max() < 1e-12);
            assert!(skew_hermitian_defect(&m.drive(t)) < 1e-14);
        }
    }

    #[test]
    fn gap_floor_and_labels_hold() {
        let m = model(11);
        let mut prev = m.analytic_spectral(0.0).unwrap();
        for i in 0..=1000 {
            let t = 5.0 * i as f64 / 1000.0;
            let d = decompose(&m.drift(t), 1e-8).unwrap();
            assert!(d.min_gap() >= m.params.gap_floor() - 1e-12);
            let (next, _) = match_labels(&prev, &d).unwrap();
            prev = next;
        }
        let analytic = m.analytic_spectral(5.0).unwrap();
        for k in 0..2 {
            assert!(max_abs_diff(&prev.projectors[k], &analytic.projectors[k]) < 1e-10);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let m = model(5);
        let (t, h) = (1.3, 1e-4);
        let plus = m.analytic_spectral(t + h).unwrap().projectors;
        let minus = m.analytic_spectral(t - h).unwrap().projectors;
        let ana = m.analytic_projector_derivatives(t).unwrap();
        for k in 0..2 {
            let num = (&plus[k] - &minus[k]).scale(0.5 / h);
            assert!(max_abs_diff(&num, &ana[k]) < 1e-7);
        }
    }
}
