//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use bloch_core::frame::{AdiabaticFrame, FrameOptions, FrameSolution};
use bloch_core::models::{
    landau_zener_model, random_smooth_model, three_level_model, GeneratorModel, LzParameters,
    RandomSmoothParams, ThreeLevelParameters,
};
use bloch_core::operator::{expm_skew_hermitian, CMatrix};
use bloch_core::propagation::uniform_grid;
use bloch_core::Complex64;

pub fn landau_zener(gamma: f64) -> Arc<dyn GeneratorModel> {
    Arc::new(landau_zener_model(LzParameters { gamma }).expect("valid parameters"))
}

pub fn three_level(gamma: f64) -> Arc<dyn GeneratorModel> {
    Arc::new(
        three_level_model(ThreeLevelParameters {
            gamma,
            ..Default::default()
        })
        .expect("valid parameters"),
    )
}

pub fn random(dim: usize, n_blocks: usize, seed: u64) -> Arc<dyn GeneratorModel> {
    Arc::new(
        random_smooth_model(RandomSmoothParams {
            dim,
            n_blocks,
            seed,
            gamma: 20.0,
            ..Default::default()
        })
        .expect("valid parameters"),
    )
}

/// Frame and its solution on `n` checkpoints of `[t0, t1]`.
pub fn solved_frame(
    model: Arc<dyn GeneratorModel>,
    t0: f64,
    t1: f64,
    n: usize,
) -> (AdiabaticFrame, FrameSolution) {
    let frame = AdiabaticFrame::new(model, t0, t1, FrameOptions::new(1e-10)).expect("frame");
    let sol = frame.evolve(&uniform_grid(t0, t1, n)).expect("frame evolution");
    (frame, sol)
}

/// Skew-Hermitian `n × n` matrix with `levels` distinct eigenvalues, each
/// of multiplicity `n / levels` (the last takes the remainder).
pub fn degenerate_skew(n: usize, levels: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 - 1.0)
    });
    let k = (&g - g.adjoint()).scale(0.5);
    let u = expm_skew_hermitian(&k);
    let per = n / levels;
    let d = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(0.0, -((i / per).min(levels - 1) as f64))
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    &u * d * u.adjoint()
}
