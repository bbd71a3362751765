//! One experiment: adiabatic frame, Bloch wave operator by every requested
//! route, polar unitarisation and the bound chain.

use std::sync::Arc;
use std::time::Instant;

use bloch_core::bloch::{
    closed_form_wave, custom_ic, identity_ic, integrate_riccati, radon_wave,
    stationarity_residual, stationary_ic, BlochInitialCondition, RiccatiOptions, WaveOperatorPath,
};
use bloch_core::diagnostics::{build_report, unitarize, LeakageReport, UnitarizedPath};
use bloch_core::frame::{AdiabaticFrame, FrameOptions, FrameSolution};
use bloch_core::models::GeneratorModel;
use bloch_core::operator::{identity, spectral_norm};
use bloch_core::propagation::{uniform_grid, PropagateOptions};
use bloch_core::{CMatrix, Error, Norm, Result};

use crate::config::{IcChoice, Route};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub t0: f64,
    pub t_final: f64,
    pub checkpoints: usize,
    pub tol: f64,
    pub sv_tol: f64,
    pub steps_per_period: f64,
    pub ic: IcChoice,
    /// `U(t0)` for [`IcChoice::Custom`].
    pub custom_u0: Option<CMatrix>,
    pub route: Route,
    pub project: bool,
    pub frame_checks: bool,
}

impl PipelineOptions {
    pub fn new(t0: f64, t_final: f64, checkpoints: usize) -> Self {
        Self {
            t0,
            t_final,
            checkpoints,
            tol: 1e-10,
            sv_tol: 1e-8,
            steps_per_period: 20.0,
            ic: IcChoice::Identity,
            custom_u0: None,
            route: Route::All,
            project: true,
            frame_checks: true,
        }
    }

    fn propagation(&self) -> PropagateOptions {
        PropagateOptions {
            steps_per_period: self.steps_per_period,
            ..PropagateOptions::new(self.tol)
        }
    }
}

/// Solution of one route, or the error that stopped it.
#[derive(Debug, Clone)]
pub struct RouteOutcome {
    pub route: Route,
    pub result: Result<WaveOperatorPath>,
    pub seconds: f64,
}

/// Sup-norm disagreement between two routes over their common checkpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteDelta {
    pub a: Route,
    pub b: Route,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub frame: f64,
    pub routes: f64,
    pub diagnostics: f64,
    pub frame_checks: f64,
    pub total: f64,
}

pub struct PipelineOutput {
    pub model: Arc<dyn GeneratorModel>,
    pub grid: Vec<f64>,
    pub frame: FrameSolution,
    pub ic: BlochInitialCondition,
    /// `‖H(t0) U0 − U0 Q(U0)‖₂`.
    pub stationary_residual: f64,
    /// `‖H(t0)‖₂`.
    pub h0_norm: f64,
    pub routes: Vec<RouteOutcome>,
    /// Index into `routes` of the path used for the report and trace.
    pub primary: Option<usize>,
    pub route_deltas: Vec<RouteDelta>,
    pub unitarized: Option<Result<UnitarizedPath>>,
    pub report: Option<LeakageReport>,
    /// `max ‖W P_k(t0) − P_k(t) W‖₂`.
    pub intertwining_defect: Option<f64>,
    /// `max ‖F − W M‖₂` over checkpoints.
    pub factorization_defect: Option<f64>,
    pub timings: Timings,
}

impl PipelineOutput {
    pub fn primary_path(&self) -> Option<&WaveOperatorPath> {
        self.primary
            .and_then(|i| self.routes[i].result.as_ref().ok())
    }

    pub fn route(&self, route: Route) -> Option<&RouteOutcome> {
        self.routes.iter().find(|r| r.route == route)
    }

    pub fn blowup(&self) -> Option<(f64, String)> {
        self.primary_path().and_then(|p| p.blowup.clone())
    }

    /// Largest disagreement among the routes that produced a path.
    pub fn max_route_delta(&self) -> Option<f64> {
        self.route_deltas
            .iter()
            .map(|d| d.delta)
            .reduce(f64::max)
    }

    /// The first hard error among the routes, when no route succeeded.
    pub fn failure(&self) -> Option<&Error> {
        if self.primary.is_some() {
            return None;
        }
        self.routes.iter().find_map(|r| r.result.as_ref().err())
    }
}

pub fn initial_condition(
    frame: &AdiabaticFrame,
    opts: &PipelineOptions,
) -> Result<BlochInitialCondition> {
    let blocks = frame.blocks();
    match opts.ic {
        IcChoice::Identity => Ok(identity_ic(blocks)),
        IcChoice::Stationary => {
            let h0 = frame.hamiltonian(frame.t0(), &identity(frame.model().dim()))?;
            stationary_ic(&h0, frame.reference(), frame.gamma(), opts.sv_tol)
        }
        IcChoice::Custom => {
            let u0 = opts.custom_u0.clone().ok_or_else(|| {
                Error::BadInitialCondition("custom initial condition without a matrix".into())
            })?;
            custom_ic(u0, blocks, 1e-8)
        }
    }
}

/// Runs frame construction, every requested Bloch route and the
/// diagnostics. Errors here are fatal (frame or initial condition); per-route
/// failures are recorded in [`RouteOutcome`].
pub fn run_pipeline(model: Arc<dyn GeneratorModel>, opts: &PipelineOptions) -> Result<PipelineOutput> {
    let start = Instant::now();
    let mut timings = Timings::default();
    let grid = uniform_grid(opts.t0, opts.t_final, opts.checkpoints);
    let frame_opts = FrameOptions {
        propagation: opts.propagation(),
        ..FrameOptions::default()
    };
    let frame = AdiabaticFrame::new(model.clone(), opts.t0, opts.t_final, frame_opts)?;
    let sol = frame.evolve(&grid)?;
    timings.frame = start.elapsed().as_secs_f64();

    let ic = initial_condition(&frame, opts)?;
    let blocks = frame.blocks().to_vec();
    let h0 = frame.hamiltonian(opts.t0, &identity(model.dim()))?;
    let h0_norm = spectral_norm(&h0);
    let residual = stationarity_residual(&h0, &ic, &blocks);

    let t_routes = Instant::now();
    let riccati_opts = RiccatiOptions {
        propagation: opts.propagation(),
        project: opts.project,
        sv_tol: opts.sv_tol,
        ..RiccatiOptions::default()
    };
    let routes: Vec<RouteOutcome> = opts
        .route
        .solvers()
        .into_iter()
        .map(|route| {
            let t = Instant::now();
            let result = match route {
                Route::Riccati => {
                    integrate_riccati(&frame, opts.t0, &grid, &ic, &blocks, &riccati_opts)
                }
                Route::ClosedForm => closed_form_wave(&sol.m, &ic, &blocks, opts.sv_tol),
                Route::Radon => radon_wave(&sol.m, &ic, &blocks, opts.sv_tol),
                Route::All => unreachable!("expanded by Route::solvers"),
            };
            if let Err(e) = &result {
                log::warn!("{route} route failed: {e}");
            }
            RouteOutcome {
                route,
                result,
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect();
    timings.routes = t_routes.elapsed().as_secs_f64();

    let mut route_deltas = Vec::new();
    for (i, a) in routes.iter().enumerate() {
        for b in &routes[i + 1..] {
            if let (Ok(pa), Ok(pb)) = (&a.result, &b.result) {
                route_deltas.push(RouteDelta {
                    a: a.route,
                    b: b.route,
                    delta: pa.max_deviation(pb),
                });
            }
        }
    }
    // The closed form is built from the same `M` the diagnostics compare
    // against, so it is preferred for the report.
    let primary = [Route::ClosedForm, Route::Riccati, Route::Radon]
        .iter()
        .find_map(|&want| {
            routes
                .iter()
                .position(|r| r.route == want && r.result.is_ok())
        });

    let t_diag = Instant::now();
    let (unitarized, report) = match primary.and_then(|i| routes[i].result.as_ref().ok()) {
        Some(u) if !u.is_empty() => {
            let v = unitarize(u, &blocks, opts.sv_tol);
            if let Err(e) = &v {
                log::warn!("unitarisation failed: {e}");
            }
            let report = build_report(u, v.as_ref().ok(), &sol.m, None, &blocks)?;
            (Some(v), Some(report))
        }
        _ => (None, None),
    };
    timings.diagnostics = t_diag.elapsed().as_secs_f64();

    let t_checks = Instant::now();
    let (intertwining_defect, factorization_defect) = if opts.frame_checks {
        let inter = frame.intertwining_defect(&sol)?;
        let f = frame.lab_propagator(&grid)?;
        let fact = f
            .ops
            .iter()
            .zip(sol.w.ops.iter().zip(&sol.m.ops))
            .map(|(f, (w, m))| spectral_norm(&(f - w * m)))
            .fold(0.0, f64::max);
        (Some(inter), Some(fact))
    } else {
        (None, None)
    };
    timings.frame_checks = t_checks.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();

    Ok(PipelineOutput {
        model,
        grid,
        frame: sol,
        ic,
        stationary_residual: residual,
        h0_norm,
        routes,
        primary,
        route_deltas,
        unitarized,
        report,
        intertwining_defect,
        factorization_defect,
        timings,
    })
}

/// One trace row: `t`, `‖U − 1‖_F`, `‖U − 1‖₂`, per-block leakage for each
/// requested norm, Bloch defect, smallest block singular value and the
/// unitarity defect of `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub u_minus_1_fro: f64,
    pub u_minus_1_spec: f64,
    pub leakage: Vec<Vec<f64>>,
    pub bloch_defect: f64,
    pub min_block_sv: f64,
    pub unitarity_defect: f64,
}

pub fn trace_rows(out: &PipelineOutput, norms: &[Norm]) -> Vec<TraceRow> {
    let Some(u) = out.primary_path() else {
        return Vec::new();
    };
    let m = &out.frame.m;
    let blocks = &out.frame.blocks;
    let fro = u.distances(Norm::Frobenius);
    let spec = u.distances(Norm::Spectral);
    (0..u.len())
        .map(|i| TraceRow {
            t: u.times[i],
            u_minus_1_fro: fro[i],
            u_minus_1_spec: spec[i],
            leakage: norms
                .iter()
                .map(|&n| bloch_core::diagnostics::leakage_at(&m.ops[i], blocks, n))
                .collect(),
            bloch_defect: u.bloch_defects[i],
            min_block_sv: u.min_block_sv[i],
            unitarity_defect: m.unitarity_defects[i],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use bloch_core::models::{three_level_model, ThreeLevelParameters};

    #[test]
    fn uncoupled_three_level_has_no_leakage() {
        let model = Arc::new(
            three_level_model(ThreeLevelParameters {
                gamma: 10.0,
                a: 0.0,
                omega: 1.0,
            })
            .unwrap(),
        );
        let out = run_pipeline(model, &PipelineOptions::new(0.0, 20.0, 21)).unwrap();
        let report = out.report.as_ref().unwrap();
        assert!(report.per_block_leakage.iter().all(|&l| l <= 1e-10));
        assert!(report.delta_spectral <= 1e-10);
        assert!(report.all_hold());
        assert_eq!(out.routes.len(), 3);
        assert!(out.max_route_delta().unwrap() < 1e-12);
        for row in trace_rows(&out, &[Norm::Spectral, Norm::Frobenius]) {
            assert!(row.leakage.iter().flatten().all(|&l| l <= 1e-10));
        }
    }
}
