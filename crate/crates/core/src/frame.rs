//! Kato's adiabatic transporter and the adiabatic frame.
//!
//! With `A(t) = ½ Σ_k [Ṗ_k, P_k]` and `Ẇ = A W`, `W(t0) = 1`, the frame
//! generators are
//!
//! * `B(t, t0) = Σ_k b_k(t) P_k(t0)` (time-independent block structure),
//! * `C(t, t0) = W†(C̄(t) − A(t)) W`,
//!
//! and the lab evolution factorises as `F = W M` with `Ṁ = (γB + C) M`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::GeneratorModel;
use crate::operator::{
    check_grid, commutator, decompose, default_gap_tol, identity, match_labels_with, spectral_norm,
    zeros, CMatrix, SpectralDecomposition, DEFAULT_MIN_OVERLAP,
};
use crate::propagation::{
    propagate_full, propagate_with, FnGenerator, GeneratorEval, HamiltonianSource,
    PropagateOptions, PropagatorPath,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameOptions {
    pub propagation: PropagateOptions,
    /// Central-difference step for `Ṗ_k`; defaults to `1e-5 · (t_final − t0)`.
    pub derivative_step: Option<f64>,
    /// Minimum fraction of the multiplicity a label match must overlap.
    pub min_overlap: f64,
}

impl FrameOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            propagation: PropagateOptions::new(tol),
            ..Self::default()
        }
    }
}

impl Default for FrameOptions {
    fn default() -> Self {
        Self {
            propagation: PropagateOptions::default(),
            derivative_step: None,
            min_overlap: DEFAULT_MIN_OVERLAP,
        }
    }
}

/// Frame generators at one time.
#[derive(Debug, Clone)]
pub struct FrameGenerators {
    /// `B(t, t0)`.
    pub b: CMatrix,
    /// `C(t, t0)`.
    pub c: CMatrix,
    /// Kato generator `A(t)`.
    pub a: CMatrix,
    /// Drift spectral data at `t` in the labels of `t0`.
    pub spectral: SpectralDecomposition,
}

/// The adiabatic frame anchored at `t0`.
#[derive(Clone)]
pub struct AdiabaticFrame {
    model: Arc<dyn GeneratorModel>,
    t0: f64,
    t_final: f64,
    reference: SpectralDecomposition,
    derivative_step: f64,
    opts: FrameOptions,
}

/// Transporter and frame evolution sampled on a common grid.
#[derive(Debug, Clone)]
pub struct FrameSolution {
    pub w: PropagatorPath,
    pub m: PropagatorPath,
    pub b: Vec<CMatrix>,
    pub c: Vec<CMatrix>,
    /// Frozen projectors `P_k(t0)`.
    pub blocks: Vec<CMatrix>,
}

impl AdiabaticFrame {
    pub fn new(
        model: Arc<dyn GeneratorModel>,
        t0: f64,
        t_final: f64,
        opts: FrameOptions,
    ) -> Result<Self> {
        if !(t0.is_finite() && t_final.is_finite() && t_final > t0) {
            return Err(Error::InvalidArgument(format!(
                "frame horizon must satisfy t0 < t_final (t0 = {t0}, t_final = {t_final})"
            )));
        }
        let derivative_step = opts.derivative_step.unwrap_or(1e-5 * (t_final - t0));
        if !(derivative_step > 0.0) {
            return Err(Error::OutOfRange {
                name: "derivative_step",
                value: derivative_step,
                expected: "> 0",
            });
        }
        let reference = match model.analytic_spectral(t0) {
            Some(s) => s,
            None => {
                let b = model.drift(t0);
                decompose(&b, default_gap_tol(&b))?
            }
        };
        Ok(Self {
            model,
            t0,
            t_final,
            reference,
            derivative_step,
            opts,
        })
    }

    pub fn model(&self) -> &Arc<dyn GeneratorModel> {
        &self.model
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn gamma(&self) -> f64 {
        self.model.gamma()
    }

    pub fn options(&self) -> &FrameOptions {
        &self.opts
    }

    /// Frozen projectors `P_k(t0)`.
    pub fn blocks(&self) -> &[CMatrix] {
        &self.reference.projectors
    }

    pub fn reference(&self) -> &SpectralDecomposition {
        &self.reference
    }

    /// Drift spectral data at `t`, labelled to follow `guide` (projectors
    /// expected to be close to the result) or the reference when absent.
    pub fn spectral_at(&self, t: f64, guide: Option<&[CMatrix]>) -> Result<SpectralDecomposition> {
        if let Some(s) = self.model.analytic_spectral(t) {
            return Ok(s);
        }
        let b = self.model.drift(t);
        let next = decompose(&b, default_gap_tol(&b))?;
        let prev = match guide {
            Some(p) => SpectralDecomposition {
                eigenvalues: self.reference.eigenvalues.clone(),
                projectors: p.to_vec(),
                multiplicities: self.reference.multiplicities.clone(),
            },
            None => self.reference.clone(),
        };
        match_labels_with(&prev, &next, self.opts.min_overlap)
            .map(|(s, _)| s)
            .map_err(|e| e.at_time(t))
    }

    /// `Ṗ_k(t)`, analytic when the model supplies it, else by central
    /// differences labelled against `current`.
    pub fn projector_derivatives(
        &self,
        t: f64,
        current: &SpectralDecomposition,
    ) -> Result<Vec<CMatrix>> {
        if let Some(d) = self.model.analytic_projector_derivatives(t) {
            return Ok(d);
        }
        numeric_projector_derivatives(self.model.as_ref(), t, self.derivative_step, current, self.opts.min_overlap)
    }

    pub fn kato_generator(&self, t: f64) -> Result<CMatrix> {
        let s = self.spectral_at(t, None)?;
        let d = self.projector_derivatives(t, &s)?;
        Ok(kato_from(&s.projectors, &d))
    }

    /// `B(t, t0)` and `C(t, t0)` given the transporter `W(t, t0)`.
    pub fn generators(&self, t: f64, w: &CMatrix) -> Result<FrameGenerators> {
        let guide: Vec<CMatrix> = self
            .reference
            .projectors
            .iter()
            .map(|p| w * p * w.adjoint())
            .collect();
        let spectral = self.spectral_at(t, Some(&guide))?;
        let d = self.projector_derivatives(t, &spectral)?;
        let a = kato_from(&spectral.projectors, &d);
        let n = self.model.dim();
        let b = self
            .reference
            .projectors
            .iter()
            .zip(&spectral.eigenvalues)
            .fold(zeros(n), |acc, (p, &bk)| acc + p * bk);
        let c = w.adjoint() * (self.model.drive(t) - &a) * w;
        Ok(FrameGenerators { b, c, a, spectral })
    }

    /// `H(t) = γB(t, t0) + C(t, t0)`.
    pub fn hamiltonian(&self, t: f64, w: &CMatrix) -> Result<CMatrix> {
        let g = self.generators(t, w)?;
        Ok(g.b.scale(self.gamma()) + g.c)
    }

    /// Integrates `W` and `M` together on `grid` (which must start at `t0`).
    pub fn evolve(&self, grid: &[f64]) -> Result<FrameSolution> {
        let (aux, m) = propagate_full(self, self.t0, grid, &self.opts.propagation)?;
        let tol = self.opts.propagation.tol;
        let mut b = Vec::with_capacity(grid.len());
        let mut c = Vec::with_capacity(grid.len());
        let mut w_ops = Vec::with_capacity(grid.len());
        for (&t, a) in m.times.iter().zip(aux) {
            let w = a.into_iter().next().expect("transporter carried as auxiliary");
            let g = self.generators(t, &w)?;
            b.push(g.b);
            c.push(g.c);
            w_ops.push(w);
        }
        w_ops[0] = identity(self.model.dim());
        Ok(FrameSolution {
            w: PropagatorPath::from_ops(self.t0, m.times.clone(), w_ops, tol),
            m,
            b,
            c,
            blocks: self.blocks().to_vec(),
        })
    }

    /// Lab-frame propagator `F` of `γB̄ + C̄`.
    pub fn lab_propagator(&self, grid: &[f64]) -> Result<PropagatorPath> {
        lab_propagator(self.model.as_ref(), self.t0, grid, &self.opts.propagation)
    }

    /// Max over checkpoints and blocks of `‖W P_k(t0) − P_k(t) W‖₂`.
    pub fn intertwining_defect(&self, sol: &FrameSolution) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (&t, w) in sol.w.times.iter().zip(&sol.w.ops) {
            let guide: Vec<CMatrix> = self
                .reference
                .projectors
                .iter()
                .map(|p| w * p * w.adjoint())
                .collect();
            let s = self.spectral_at(t, Some(&guide))?;
            for (p0, pt) in self.reference.projectors.iter().zip(&s.projectors) {
                worst = worst.max(spectral_norm(&(w * p0 - pt * w)));
            }
        }
        Ok(worst)
    }
}

impl HamiltonianSource for AdiabaticFrame {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn aux_count(&self) -> usize {
        1
    }

    fn aux_initial(&self) -> Vec<CMatrix> {
        vec![identity(self.model.dim())]
    }

    fn eval(&self, t: f64, aux: &[CMatrix]) -> Result<GeneratorEval> {
        let w = &aux[0];
        let g = self.generators(t, w)?;
        Ok(GeneratorEval {
            h: g.b.scale(self.gamma()) + g.c,
            aux_dot: vec![&g.a * w],
        })
    }
}

fn kato_from(projectors: &[CMatrix], derivatives: &[CMatrix]) -> CMatrix {
    let n = projectors[0].nrows();
    projectors
        .iter()
        .zip(derivatives)
        .fold(zeros(n), |acc, (p, d)| acc + commutator(d, p))
        .scale(0.5)
}

fn numeric_projector_derivatives(
    model: &dyn GeneratorModel,
    t: f64,
    h: f64,
    current: &SpectralDecomposition,
    min_overlap: f64,
) -> Result<Vec<CMatrix>> {
    let at = |s: f64| -> Result<SpectralDecomposition> {
        let b = model.drift(s);
        let d = decompose(&b, default_gap_tol(&b))?;
        match_labels_with(current, &d, min_overlap)
            .map(|(d, _)| d)
            .map_err(|e| e.at_time(s))
    };
    let plus = at(t + h)?;
    let minus = at(t - h)?;
    Ok(plus
        .projectors
        .iter()
        .zip(&minus.projectors)
        .map(|(p, m)| (p - m).scale(0.5 / h))
        .collect())
}

/// `Ṗ_k(t)` for block `k`: analytic when available, otherwise the central
/// difference `(P_k(t+h) − P_k(t−h)) / 2h` with labels matched at `t`.
pub fn projector_derivative(model: &dyn GeneratorModel, k: usize, t: f64, h: f64) -> Result<CMatrix> {
    let all = match model.analytic_projector_derivatives(t) {
        Some(d) => d,
        None => {
            let b = model.drift(t);
            let current = decompose(&b, default_gap_tol(&b))?;
            numeric_projector_derivatives(model, t, h, &current, DEFAULT_MIN_OVERLAP)?
        }
    };
    all.into_iter().nth(k).ok_or_else(|| {
        Error::InvalidArgument(format!("block index {k} out of range"))
    })
}

/// Kato generator `A(t) = ½ Σ_k [Ṗ_k(t), P_k(t)]`; independent of how the
/// blocks are labelled.
pub fn kato_generator(model: &dyn GeneratorModel, t: f64, h: f64) -> Result<CMatrix> {
    let (s, d) = match (model.analytic_spectral(t), model.analytic_projector_derivatives(t)) {
        (Some(s), Some(d)) => (s, d),
        _ => {
            let b = model.drift(t);
            let s = decompose(&b, default_gap_tol(&b))?;
            let d = numeric_projector_derivatives(model, t, h, &s, DEFAULT_MIN_OVERLAP)?;
            (s, d)
        }
    };
    Ok(kato_from(&s.projectors, &d))
}

/// Integrates `Ẇ = A(t) W`, `W(t0) = 1` on `grid`.
pub fn transporter(
    model: &dyn GeneratorModel,
    t0: f64,
    grid: &[f64],
    opts: &PropagateOptions,
) -> Result<PropagatorPath> {
    check_grid(grid)?;
    let source = KatoSource {
        model,
        h: 1e-5 * (grid[grid.len() - 1] - t0).abs().max(1e-3),
    };
    propagate_with(&source, t0, grid, opts)
}

struct KatoSource<'a> {
    model: &'a dyn GeneratorModel,
    h: f64,
}

impl HamiltonianSource for KatoSource<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn eval(&self, t: f64, _aux: &[CMatrix]) -> Result<GeneratorEval> {
        Ok(GeneratorEval {
            h: kato_generator(self.model, t, self.h)?,
            aux_dot: Vec::new(),
        })
    }
}

/// Propagator `F` of the lab generator `γB̄ + C̄`.
pub fn lab_propagator(
    model: &dyn GeneratorModel,
    t0: f64,
    grid: &[f64],
    opts: &PropagateOptions,
) -> Result<PropagatorPath> {
    let gen = FnGenerator::new(model.dim(), |t| model.generator(t));
    propagate_with(&gen, t0, grid, opts)
}

/// `‖F(t1, t0) − W(t1, t0) M(t1, t0)‖₂`, with `F` integrated in the lab frame
/// and `W`, `M` in the adiabatic frame.
pub fn factorization_defect(
    model: Arc<dyn GeneratorModel>,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<f64> {
    let opts = FrameOptions::new(tol);
    let frame = AdiabaticFrame::new(model.clone(), t0, t1, opts)?;
    let grid = [t0, t1];
    let sol = frame.evolve(&grid)?;
    let f = lab_propagator(model.as_ref(), t0, &grid, &opts.propagation)?;
    Ok(spectral_norm(&(f.last() - sol.w.last() * sol.m.last())))
}
