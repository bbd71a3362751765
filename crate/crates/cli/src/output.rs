//! Run summaries and the CSV/JSON files written for each run.
//!
//! Floats are written with 17 significant digits so that identical runs give
//! identical bytes. Missing values are empty cells in CSV and `null` in JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use bloch_core::diagnostics::BOUND_SLACK;
use bloch_core::Norm;
use serde::Serialize;

use crate::config::{ExperimentConfig, Route};
use crate::error::{exit, CliError, Result};
use crate::pipeline::{PipelineOutput, Timings, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Blowup,
    BoundViolated,
    Error,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Blowup => "blowup",
            Status::BoundViolated => "bound_violated",
            Status::Error => "error",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => exit::OK,
            Status::Blowup => exit::BLOWUP,
            Status::BoundViolated => exit::BOUND_VIOLATED,
            Status::Error => exit::SOLVER,
        }
    }
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub model: String,
    pub gamma: f64,
    pub ic: String,
    pub route: String,
    pub t0: f64,
    pub t_final: f64,
    pub checkpoints: usize,
    pub tol: f64,
    pub seed: Option<u64>,
    pub status: Status,
    pub error_code: Option<String>,
    pub error: Option<String>,
    pub blowup_flag: bool,
    pub blowup_time: Option<f64>,
    /// Route that produced the reported wave operator.
    pub primary_route: Option<String>,
    pub delta_spectral: Option<f64>,
    pub delta_frobenius: Option<f64>,
    pub final_spectral: Option<f64>,
    pub final_frobenius: Option<f64>,
    pub max_leakage_spectral: Option<f64>,
    pub max_leakage_frobenius: Option<f64>,
    pub bound_distance: Option<f64>,
    pub bound_v: Option<f64>,
    pub distance_m_meff: Option<f64>,
    pub delta_v: Option<f64>,
    pub bounds_hold: Option<bool>,
    pub v_unitarity_defect: Option<f64>,
    pub gram_offblock: Option<f64>,
    pub frame_offblock: Option<f64>,
    pub riccati_vs_closed_form: Option<f64>,
    pub riccati_vs_radon: Option<f64>,
    pub closed_form_vs_radon: Option<f64>,
    pub radon_offblock: Option<f64>,
    pub max_bloch_defect: Option<f64>,
    pub min_block_sv: Option<f64>,
    pub intertwining_defect: Option<f64>,
    pub factorization_defect: Option<f64>,
    pub stationary_residual: Option<f64>,
    pub h0_norm: Option<f64>,
}

impl RunSummary {
    fn skeleton(config: &ExperimentConfig) -> Self {
        Self {
            model: config.model.name.clone(),
            gamma: config.model.gamma,
            ic: config.solver.ic.name().to_string(),
            route: config.solver.route.name().to_string(),
            t0: config.time.t0,
            t_final: config.time.t_final,
            checkpoints: config.time.checkpoints,
            tol: config.solver.tol,
            seed: config.seed.or(config.model.seed),
            status: Status::Ok,
            error_code: None,
            error: None,
            blowup_flag: false,
            blowup_time: None,
            primary_route: None,
            delta_spectral: None,
            delta_frobenius: None,
            final_spectral: None,
            final_frobenius: None,
            max_leakage_spectral: None,
            max_leakage_frobenius: None,
            bound_distance: None,
            bound_v: None,
            distance_m_meff: None,
            delta_v: None,
            bounds_hold: None,
            v_unitarity_defect: None,
            gram_offblock: None,
            frame_offblock: None,
            riccati_vs_closed_form: None,
            riccati_vs_radon: None,
            closed_form_vs_radon: None,
            radon_offblock: None,
            max_bloch_defect: None,
            min_block_sv: None,
            intertwining_defect: None,
            factorization_defect: None,
            stationary_residual: None,
            h0_norm: None,
        }
    }

    /// Summary of a run that failed before producing a wave operator.
    pub fn failed(config: &ExperimentConfig, err: &bloch_core::Error) -> Self {
        let mut s = Self::skeleton(config);
        s.status = match err {
            bloch_core::Error::BlowUp { .. } => Status::Blowup,
            bloch_core::Error::BoundViolated { .. } => Status::BoundViolated,
            _ => Status::Error,
        };
        s.error_code = Some(err.code().to_string());
        s.error = Some(err.to_string());
        s
    }

    pub fn from_output(config: &ExperimentConfig, out: &PipelineOutput) -> Self {
        let mut s = Self::skeleton(config);
        s.stationary_residual = Some(out.stationary_residual);
        s.h0_norm = Some(out.h0_norm);
        s.intertwining_defect = out.intertwining_defect;
        s.factorization_defect = out.factorization_defect;
        for d in &out.route_deltas {
            let slot = match (d.a, d.b) {
                (Route::Riccati, Route::ClosedForm) => &mut s.riccati_vs_closed_form,
                (Route::Riccati, Route::Radon) => &mut s.riccati_vs_radon,
                (Route::ClosedForm, Route::Radon) => &mut s.closed_form_vs_radon,
                _ => continue,
            };
            *slot = Some(d.delta);
        }
        if let Some(Ok(p)) = out.route(Route::Radon).map(|r| &r.result) {
            s.radon_offblock = Some(p.self_check);
        }
        if let Some(err) = out.failure() {
            s.status = Status::Error;
            s.error_code = Some(err.code().to_string());
            s.error = Some(err.to_string());
            return s;
        }
        // Route errors that did not stop the run are still reported.
        if let Some(err) = out.routes.iter().find_map(|r| r.result.as_ref().err()) {
            s.error_code = Some(err.code().to_string());
            s.error = Some(err.to_string());
        }
        let u = out.primary_path().expect("a route succeeded");
        s.primary_route = Some(out.routes[out.primary.unwrap()].route.name().to_string());
        s.blowup_flag = u.blowup_flag;
        s.blowup_time = u.blowup.as_ref().map(|(t, _)| *t);
        if let Some((_, reason)) = &u.blowup {
            s.status = Status::Blowup;
            s.error_code.get_or_insert_with(|| "blow_up".into());
            s.error.get_or_insert_with(|| reason.clone());
        }
        s.max_bloch_defect = Some(u.max_bloch_defect());
        s.min_block_sv = Some(u.min_sv());
        if !u.is_empty() {
            let one = bloch_core::operator::identity(u.last().nrows());
            s.final_spectral = Some(Norm::Spectral.of(&(u.last() - &one)));
            s.final_frobenius = Some(Norm::Frobenius.of(&(u.last() - one)));
        }
        if let Some(r) = &out.report {
            s.delta_spectral = Some(r.delta_spectral);
            s.delta_frobenius = Some(r.delta_frobenius);
            s.max_leakage_spectral = r.per_block_leakage.iter().copied().reduce(f64::max);
            s.max_leakage_frobenius = r.per_block_leakage_frobenius.iter().copied().reduce(f64::max);
            s.bound_distance = r.bound_eq13;
            s.bound_v = r.bound_v;
            s.distance_m_meff = Some(r.distance_m_meff);
            s.delta_v = r.delta_v;
            s.bounds_hold = Some(r.all_hold());
            if !r.all_hold() {
                s.status = Status::BoundViolated;
                let c = r
                    .checks
                    .iter()
                    .find(|c| !c.holds(BOUND_SLACK))
                    .expect("a violated check");
                s.error_code = Some("bound_violated".into());
                s.error = Some(format!(
                    "{} violated at t = {}: {:e} > {:e}",
                    c.what, c.t, c.lhs, c.bound
                ));
            }
        }
        if let Some(Ok(v)) = &out.unitarized {
            s.v_unitarity_defect = Some(v.max_unitarity_defect());
            s.gram_offblock = Some(v.max_gram_offblock());
            s.frame_offblock = Some(v.frame_offblock(&out.frame.m, &out.frame.blocks));
        }
        s
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub const HEADER: [&'static str; 41] = [
        "model",
        "gamma",
        "ic",
        "route",
        "t0",
        "t_final",
        "checkpoints",
        "tol",
        "seed",
        "status",
        "error_code",
        "error",
        "blowup_flag",
        "blowup_time",
        "primary_route",
        "delta_spectral",
        "delta_frobenius",
        "final_spectral",
        "final_frobenius",
        "max_leakage_spectral",
        "max_leakage_frobenius",
        "bound_distance",
        "bound_v",
        "distance_m_meff",
        "delta_v",
        "bounds_hold",
        "v_unitarity_defect",
        "gram_offblock",
        "frame_offblock",
        "riccati_vs_closed_form",
        "riccati_vs_radon",
        "closed_form_vs_radon",
        "radon_offblock",
        "max_bloch_defect",
        "min_block_sv",
        "intertwining_defect",
        "factorization_defect",
        "stationary_residual",
        "h0_norm",
        "interpolation",
        "parameters",
    ];

    fn record(&self, interpolation: &str, parameters: &str) -> Vec<String> {
        let o = |v: Option<f64>| v.map(num).unwrap_or_default();
        let text = |v: &Option<String>| v.clone().unwrap_or_default();
        vec![
            self.model.clone(),
            num(self.gamma),
            self.ic.clone(),
            self.route.clone(),
            num(self.t0),
            num(self.t_final),
            self.checkpoints.to_string(),
            num(self.tol),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.status.name().to_string(),
            text(&self.error_code),
            text(&self.error),
            self.blowup_flag.to_string(),
            o(self.blowup_time),
            text(&self.primary_route),
            o(self.delta_spectral),
            o(self.delta_frobenius),
            o(self.final_spectral),
            o(self.final_frobenius),
            o(self.max_leakage_spectral),
            o(self.max_leakage_frobenius),
            o(self.bound_distance),
            o(self.bound_v),
            o(self.distance_m_meff),
            o(self.delta_v),
            self.bounds_hold.map(|b| b.to_string()).unwrap_or_default(),
            o(self.v_unitarity_defect),
            o(self.gram_offblock),
            o(self.frame_offblock),
            o(self.riccati_vs_closed_form),
            o(self.riccati_vs_radon),
            o(self.closed_form_vs_radon),
            o(self.radon_offblock),
            o(self.max_bloch_defect),
            o(self.min_block_sv),
            o(self.intertwining_defect),
            o(self.factorization_defect),
            o(self.stationary_residual),
            o(self.h0_norm),
            interpolation.to_string(),
            parameters.to_string(),
        ]
    }
}

/// A summary together with the model metadata it is written with.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub summary: RunSummary,
    pub interpolation: String,
    /// `name=value` pairs separated by `;`.
    pub parameters: String,
}

impl SummaryRow {
    pub fn new(summary: RunSummary, out: Option<&PipelineOutput>) -> Self {
        let (interpolation, parameters) = match out {
            Some(o) => (
                o.model.interpolation().unwrap_or("").to_string(),
                o.model
                    .parameters()
                    .iter()
                    .map(|(k, v)| format!("{k}={}", num(*v)))
                    .collect::<Vec<_>>()
                    .join(";"),
            ),
            None => (String::new(), String::new()),
        };
        Self {
            summary,
            interpolation,
            parameters,
        }
    }
}

/// Full-precision float formatting (17 significant digits).
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RunSummary::HEADER)?;
    for r in rows {
        w.write_record(r.summary.record(&r.interpolation, &r.parameters))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn trace_header(norms: &[Norm], n_blocks: usize) -> Vec<String> {
    let mut h = vec![
        "t".to_string(),
        "norm_U_minus_1_fro".into(),
        "norm_U_minus_1_spec".into(),
    ];
    for n in norms {
        let short = match n {
            Norm::Spectral => "spec",
            Norm::Frobenius => "fro",
        };
        h.extend((0..n_blocks).map(|k| format!("leakage_{short}_{k}")));
    }
    h.extend(["bloch_defect", "min_block_sv", "unitarity_defect"].map(String::from));
    h
}

pub fn write_trace_csv(path: &Path, norms: &[Norm], n_blocks: usize, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_header(norms, n_blocks))?;
    for r in rows {
        let mut rec = vec![num(r.t), num(r.u_minus_1_fro), num(r.u_minus_1_spec)];
        rec.extend(r.leakage.iter().flatten().map(|&v| num(v)));
        rec.extend([num(r.bloch_defect), num(r.min_block_sv), num(r.unitarity_defect)]);
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct CheckJson {
    what: &'static str,
    lhs: f64,
    bound: f64,
    t: f64,
    holds: bool,
}

#[derive(Debug, Serialize)]
struct RouteJson {
    route: &'static str,
    ok: bool,
    seconds: f64,
    error_code: Option<&'static str>,
    error: Option<String>,
    points: usize,
    blowup_flag: bool,
    self_check: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TimingsJson {
    frame_s: f64,
    routes_s: f64,
    diagnostics_s: f64,
    frame_checks_s: f64,
    total_s: f64,
}

impl From<Timings> for TimingsJson {
    fn from(t: Timings) -> Self {
        Self {
            frame_s: t.frame,
            routes_s: t.routes,
            diagnostics_s: t.diagnostics,
            frame_checks_s: t.frame_checks,
            total_s: t.total,
        }
    }
}

/// Writes `summary.json`: the config echo, the summary, every bound check,
/// per-route status, timings and the software version. Timings and the
/// `written_at` field are the only non-deterministic content.
pub fn write_summary_json(
    path: &Path,
    config: &ExperimentConfig,
    row: &SummaryRow,
    out: Option<&PipelineOutput>,
) -> Result<()> {
    let checks: Vec<CheckJson> = out
        .and_then(|o| o.report.as_ref())
        .map(|r| {
            r.checks
                .iter()
                .map(|c| CheckJson {
                    what: c.what,
                    lhs: c.lhs,
                    bound: c.bound,
                    t: c.t,
                    holds: c.holds(BOUND_SLACK),
                })
                .collect()
        })
        .unwrap_or_default();
    let routes: Vec<RouteJson> = out
        .map(|o| {
            o.routes
                .iter()
                .map(|r| match &r.result {
                    Ok(p) => RouteJson {
                        route: r.route.name(),
                        ok: true,
                        seconds: r.seconds,
                        error_code: None,
                        error: None,
                        points: p.len(),
                        blowup_flag: p.blowup_flag,
                        self_check: Some(p.self_check),
                    },
                    Err(e) => RouteJson {
                        route: r.route.name(),
                        ok: false,
                        seconds: r.seconds,
                        error_code: Some(e.code()),
                        error: Some(e.to_string()),
                        points: 0,
                        blowup_flag: false,
                        self_check: None,
                    },
                })
                .collect()
        })
        .unwrap_or_default();
    let written_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let doc = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "written_at": written_at,
        "config": config,
        "summary": row.summary,
        "interpolation": row.interpolation,
        "parameters": row.parameters,
        "bound_slack": BOUND_SLACK,
        "checks": checks,
        "routes": routes,
        "timings": out.map(|o| TimingsJson::from(o.timings)),
    });
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn header_matches_record() {
        let config = ExperimentConfig::parse("[model]\nname = \"landau-zener\"\ngamma = 1.0\n", &[]).unwrap();
        let s = RunSummary::skeleton(&config);
        assert_eq!(s.record("", "").len(), RunSummary::HEADER.len());
    }

    #[test]
    fn trace_columns() {
        let h = trace_header(&[Norm::Spectral, Norm::Frobenius], 2);
        assert_eq!(
            h,
            [
                "t",
                "norm_U_minus_1_fro",
                "norm_U_minus_1_spec",
                "leakage_spec_0",
                "leakage_spec_1",
                "leakage_fro_0",
                "leakage_fro_1",
                "bloch_defect",
                "min_block_sv",
                "unitarity_defect"
            ]
        );
    }
}
