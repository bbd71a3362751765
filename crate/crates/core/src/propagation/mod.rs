//! Propagators for linear matrix ODEs `Ṁ = G(t) M` with skew-Hermitian `G`.
//!
//! Generators are supplied through [`HamiltonianSource`], which may carry
//! auxiliary matrices integrated alongside the payload (the adiabatic frame
//! needs the transporter `W(t)` at every stage time to form its generator).

mod dop853;

pub use dop853::{integrate, IntegratorOptions, IntegratorStats, OdeSystem, Trajectory};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{check_skew_hermitian, identity, polar_unitary, skew_tol_for, CMatrix};

/// Generator and auxiliary derivatives at one time.
#[derive(Debug, Clone)]
pub struct GeneratorEval {
    pub h: CMatrix,
    pub aux_dot: Vec<CMatrix>,
}

/// A time-dependent skew-Hermitian generator, possibly depending on
/// auxiliary matrices `X_j` that follow their own ODEs `Ẋ_j = aux_dot_j`.
pub trait HamiltonianSource: Sync {
    fn dim(&self) -> usize;

    fn aux_count(&self) -> usize {
        0
    }

    fn aux_initial(&self) -> Vec<CMatrix> {
        Vec::new()
    }

    fn eval(&self, t: f64, aux: &[CMatrix]) -> Result<GeneratorEval>;
}

/// Adapter turning a closure `t -> G(t)` into a [`HamiltonianSource`].
pub struct FnGenerator<F> {
    dim: usize,
    f: F,
}

impl<F> FnGenerator<F>
where
    F: Fn(f64) -> CMatrix + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> HamiltonianSource for FnGenerator<F>
where
    F: Fn(f64) -> CMatrix + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, _aux: &[CMatrix]) -> Result<GeneratorEval> {
        let h = (self.f)(t);
        if h.shape() != (self.dim, self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: h.nrows(),
            });
        }
        Ok(GeneratorEval {
            h,
            aux_dot: Vec::new(),
        })
    }
}

/// Integration settings shared by all propagations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateOptions {
    /// Local relative and absolute tolerance.
    pub tol: f64,
    /// Steps per oscillation period `2π/‖G‖_F`; caps the step size.
    pub steps_per_period: f64,
    /// Polar re-unitarisation of the payload after every step.
    pub reunitarize: bool,
    pub max_steps: usize,
}

impl PropagateOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub(crate) fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions {
            rtol: self.tol,
            atol: self.tol,
            max_steps: self.max_steps,
            h_init: None,
        }
    }
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            steps_per_period: 20.0,
            reunitarize: false,
            max_steps: 20_000_000,
        }
    }
}

/// Unitary solution sampled at checkpoints.
#[derive(Debug, Clone)]
pub struct PropagatorPath {
    pub t0: f64,
    pub times: Vec<f64>,
    pub ops: Vec<CMatrix>,
    /// `‖M†M − 1‖₂` at every checkpoint.
    pub unitarity_defects: Vec<f64>,
    pub tol: f64,
}

impl PropagatorPath {
    pub fn from_ops(t0: f64, times: Vec<f64>, ops: Vec<CMatrix>, tol: f64) -> Self {
        let unitarity_defects = ops.iter().map(crate::operator::unitarity_defect).collect();
        Self {
            t0,
            times,
            ops,
            unitarity_defects,
            tol,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ops.first().map_or(0, |m| m.nrows())
    }

    pub fn last(&self) -> &CMatrix {
        self.ops.last().expect("non-empty path")
    }

    /// Largest recorded unitarity defect.
    pub fn unitarity_defect(&self) -> f64 {
        self.unitarity_defects.iter().copied().fold(0.0, f64::max)
    }

    /// `M(t_j, t_i) = M(t_j) M(t_i)^†`.
    pub fn between(&self, i: usize, j: usize) -> CMatrix {
        &self.ops[j] * self.ops[i].adjoint()
    }
}

/// Max over checkpoints of `‖M†M − 1‖₂`.
pub fn unitarity_defect(path: &PropagatorPath) -> f64 {
    path.unitarity_defect()
}

/// `n` equally spaced points covering `[t0, t1]`.
pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t0],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    t1
                } else {
                    t0 + (t1 - t0) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Dynamics of the matrices integrated alongside a generator.
pub(crate) trait Payload: Sync {
    fn rhs(&self, h: &CMatrix, y: &[Complex64], dy: &mut [Complex64]) -> Result<()>;

    fn project(&self, _y: &mut [Complex64]) -> f64 {
        0.0
    }

    fn check(&self, _t: f64, _y: &[Complex64]) -> Result<()> {
        Ok(())
    }
}

/// `Ṁ = H M`.
pub(crate) struct LinearPayload {
    pub n: usize,
    pub reunitarize: bool,
}

impl Payload for LinearPayload {
    fn rhs(&self, h: &CMatrix, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
        let m = mat(self.n, y);
        dy.copy_from_slice((h * m).as_slice());
        Ok(())
    }

    fn project(&self, y: &mut [Complex64]) -> f64 {
        if !self.reunitarize {
            return 0.0;
        }
        let m = mat(self.n, y);
        let v = polar_unitary(&m, 1e-12);
        let correction = (&v - &m).norm();
        y.copy_from_slice(v.as_slice());
        correction
    }
}

pub(crate) fn mat(n: usize, y: &[Complex64]) -> CMatrix {
    CMatrix::from_column_slice(n, n, &y[..n * n])
}

/// Generator, auxiliary matrices and payload as one flat ODE.
pub(crate) struct Augmented<'a, G: HamiltonianSource + ?Sized, P: Payload> {
    pub gen: &'a G,
    pub payload: &'a P,
    pub steps_per_period: f64,
}

impl<G: HamiltonianSource + ?Sized, P: Payload> Augmented<'_, G, P> {
    fn aux_len(&self) -> usize {
        let n = self.gen.dim();
        self.gen.aux_count() * n * n
    }

    fn unpack_aux(&self, y: &[Complex64]) -> Vec<CMatrix> {
        let n = self.gen.dim();
        (0..self.gen.aux_count())
            .map(|j| mat(n, &y[j * n * n..]))
            .collect()
    }

    pub fn initial_state(&self, payload0: &[Complex64]) -> Vec<Complex64> {
        let mut y = Vec::with_capacity(self.aux_len() + payload0.len());
        for a in self.gen.aux_initial() {
            y.extend_from_slice(a.as_slice());
        }
        y.extend_from_slice(payload0);
        y
    }

    /// Splits a flat state into auxiliary matrices and the payload slice.
    pub fn split<'y>(&self, y: &'y [Complex64]) -> (Vec<CMatrix>, &'y [Complex64]) {
        (self.unpack_aux(y), &y[self.aux_len()..])
    }
}

impl<G: HamiltonianSource + ?Sized, P: Payload> OdeSystem for Augmented<'_, G, P> {
    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
        let aux = self.unpack_aux(y);
        let ev = self.gen.eval(t, &aux)?;
        let split = self.aux_len();
        let n = self.gen.dim();
        for (j, d) in ev.aux_dot.iter().enumerate() {
            dy[j * n * n..(j + 1) * n * n].copy_from_slice(d.as_slice());
        }
        self.payload.rhs(&ev.h, &y[split..], &mut dy[split..])
    }

    fn max_step(&self, t: f64, y: &[Complex64]) -> Result<Option<f64>> {
        let aux = self.unpack_aux(y);
        let h = self.gen.eval(t, &aux)?.h;
        check_skew_hermitian(&h, skew_tol_for(&h)).map_err(|e| match e {
            Error::NotSkewHermitian { .. } | Error::NonFinite => Error::IntegratorFailure {
                t,
                reason: format!("invalid generator sample: {e}"),
            },
            other => other,
        })?;
        let norm = h.norm();
        if norm > 0.0 && self.steps_per_period > 0.0 {
            Ok(Some(std::f64::consts::TAU / (self.steps_per_period * norm)))
        } else {
            Ok(None)
        }
    }

    fn project(&self, y: &mut [Complex64]) -> f64 {
        let split = self.aux_len();
        self.payload.project(&mut y[split..])
    }

    fn check(&self, t: f64, y: &[Complex64]) -> Result<()> {
        let split = self.aux_len();
        self.payload.check(t, &y[split..])
    }
}

/// Integrates `Ṁ = G(t) M`, `M(t0) = 1`, recording `M` at every grid point.
pub fn propagate<F>(generator: F, t0: f64, grid: &[f64], tol: f64) -> Result<PropagatorPath>
where
    F: Fn(f64) -> CMatrix + Sync,
{
    let n = generator(t0).nrows();
    propagate_with(&FnGenerator::new(n, generator), t0, grid, &PropagateOptions::new(tol))
}

/// [`propagate`] for an arbitrary [`HamiltonianSource`].
pub fn propagate_with<G: HamiltonianSource + ?Sized>(
    gen: &G,
    t0: f64,
    grid: &[f64],
    opts: &PropagateOptions,
) -> Result<PropagatorPath> {
    Ok(propagate_full(gen, t0, grid, opts)?.1)
}

/// Propagation that also returns the auxiliary matrices at each checkpoint.
pub(crate) fn propagate_full<G: HamiltonianSource + ?Sized>(
    gen: &G,
    t0: f64,
    grid: &[f64],
    opts: &PropagateOptions,
) -> Result<(Vec<Vec<CMatrix>>, PropagatorPath)> {
    check_start(t0, grid)?;
    let n = gen.dim();
    let payload = LinearPayload {
        n,
        reunitarize: opts.reunitarize,
    };
    let sys = Augmented {
        gen,
        payload: &payload,
        steps_per_period: opts.steps_per_period,
    };
    let y0 = sys.initial_state(identity(n).as_slice());
    let traj = integrate(&sys, grid, y0, &opts.integrator())?;
    if let Some((t, e)) = traj.stopped {
        return Err(Error::IntegratorFailure {
            t,
            reason: e.to_string(),
        });
    }
    let mut aux = Vec::with_capacity(traj.states.len());
    let mut ops = Vec::with_capacity(traj.states.len());
    for y in &traj.states {
        let (a, p) = sys.split(y);
        aux.push(a);
        ops.push(mat(n, p));
    }
    ops[0] = identity(n);
    Ok((aux, PropagatorPath::from_ops(t0, traj.times, ops, opts.tol)))
}

pub(crate) fn check_start(t0: f64, grid: &[f64]) -> Result<()> {
    crate::operator::check_grid(grid)?;
    if grid[0] != t0 {
        return Err(Error::InvalidArgument(format!(
            "grid must start at t0 = {t0}, found {}",
            grid[0]
        )));
    }
    Ok(())
}
