use std::path::{Path, PathBuf};
use std::sync::Arc;

use bloch_core::models::{GeneratorModel, ModelSpec, TabulatedModel};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{load_matrix, ExperimentConfig, IcChoice};
use crate::error::{exit, CliError, Result};
use crate::output::{
    num, write_summary_csv, write_summary_json, write_trace_csv, RunSummary, Status, SummaryRow,
};
use crate::pipeline::{run_pipeline, trace_rows, PipelineOptions, PipelineOutput};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_FIT_FILE: &str = "sweep_fit.csv";

pub fn pipeline_options(config: &ExperimentConfig) -> Result<PipelineOptions> {
    let custom_u0 = match (&config.solver.ic, &config.solver.ic_path) {
        (IcChoice::Custom, Some(p)) => Some(load_matrix(p)?),
        _ => None,
    };
    Ok(PipelineOptions {
        t0: config.time.t0,
        t_final: config.time.t_final,
        checkpoints: config.time.checkpoints,
        tol: config.solver.tol,
        sv_tol: config.solver.sv_tol,
        steps_per_period: config.solver.steps_per_period,
        ic: config.solver.ic,
        custom_u0,
        route: config.solver.route,
        project: config.solver.project,
        frame_checks: config.solver.frame_checks,
    })
}

/// Builds the model and runs the pipeline without writing anything. Solver
/// failures are folded into the summary; only config and input errors are
/// returned as `Err`.
pub fn execute(config: &ExperimentConfig) -> Result<(SummaryRow, Option<PipelineOutput>)> {
    config.validate()?;
    let opts = pipeline_options(config)?;
    let model: Arc<dyn GeneratorModel> = match config.model_spec()? {
        ModelSpec::Tabulated { path, gamma } => {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let table = TabulatedModel::parse(&text, gamma)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Arc::new(table)
        }
        spec => match spec.build() {
            Ok(m) => m,
            Err(e) => return Ok((SummaryRow::new(RunSummary::failed(config, &e), None), None)),
        },
    };
    match run_pipeline(model, &opts) {
        Ok(out) => {
            let summary = RunSummary::from_output(config, &out);
            Ok((SummaryRow::new(summary, Some(&out)), Some(out)))
        }
        Err(e) => {
            log::error!("run failed: {e}");
            Ok((SummaryRow::new(RunSummary::failed(config, &e), None), None))
        }
    }
}

pub struct RunResult {
    pub row: SummaryRow,
    pub output: Option<PipelineOutput>,
    pub dir: PathBuf,
}

impl RunResult {
    pub fn summary(&self) -> &RunSummary {
        &self.row.summary
    }

    pub fn exit_code(&self) -> i32 {
        self.row.summary.exit_code()
    }
}

/// Runs one experiment and writes `trace.csv`, `summary.csv` and
/// `summary.json` to `config.output.dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    let (row, output) = execute(config)?;
    let dir = config.output.dir.clone();
    write_run(&dir, config, &row, output.as_ref())?;
    Ok(RunResult { row, output, dir })
}

fn write_run(dir: &Path, config: &ExperimentConfig, row: &SummaryRow, out: Option<&PipelineOutput>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let norms: Vec<_> = config.solver.norms.iter().map(|n| n.norm()).collect();
    let (n_blocks, rows) = match out {
        Some(o) => (o.frame.blocks.len(), trace_rows(o, &norms)),
        None => (0, Vec::new()),
    };
    write_trace_csv(&dir.join(TRACE_FILE), &norms, n_blocks, &rows)?;
    write_summary_csv(&dir.join(SUMMARY_FILE), std::slice::from_ref(row))?;
    write_summary_json(&dir.join(SUMMARY_JSON), config, row, out)
}

/// One (γ, initial condition) run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub ic: IcChoice,
    pub dir: PathBuf,
    pub summary: RunSummary,
}

/// Least-squares fit of `log sup‖U − 1‖` against `log γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFit {
    pub ic: IcChoice,
    pub norm: &'static str,
    /// `None` with fewer than three usable γ values.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub fits: Vec<SweepFit>,
    pub dir: PathBuf,
}

impl SweepResult {
    pub fn fit(&self, ic: IcChoice, norm: &str) -> Option<&SweepFit> {
        self.fits.iter().find(|f| f.ic == ic && f.norm == norm)
    }

    /// Most severe status over the runs: bound violations first, then
    /// errors, then blow-ups.
    pub fn exit_code(&self) -> i32 {
        let has = |s: Status| self.points.iter().any(|p| p.summary.status == s);
        if has(Status::BoundViolated) {
            exit::BOUND_VIOLATED
        } else if has(Status::Error) {
            exit::SOLVER
        } else if has(Status::Blowup) {
            exit::BLOWUP
        } else {
            exit::OK
        }
    }
}

/// Directory of one sweep run below the sweep output directory.
pub fn sweep_run_dir(base: &Path, gamma: f64, ic: IcChoice) -> PathBuf {
    base.join(format!("gamma_{gamma}")).join(ic.name())
}

/// Runs every (γ, initial condition) pair concurrently, each into its own
/// directory, then writes `sweep.csv`, `sweep_fit.csv` and an aggregated
/// `summary.csv`. Individual blow-ups and solver failures are marked, not
/// fatal.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a [sweep] section with gammas".into()))?;
    let base = config.output.dir.clone();
    let jobs: Vec<(f64, IcChoice, ExperimentConfig)> = spec
        .gammas
        .iter()
        .flat_map(|&g| spec.ics.iter().map(move |&ic| (g, ic)))
        .map(|(g, ic)| {
            let mut c = config.with_gamma(g);
            c.solver.ic = ic;
            c.sweep = None;
            c.output.dir = sweep_run_dir(&base, g, ic);
            (g, ic, c)
        })
        .collect();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = spec.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<(f64, IcChoice, RunResult)>> = pool.install(|| {
        jobs.par_iter()
            .map(|(g, ic, c)| {
                log::info!("sweep: gamma = {g}, ic = {}", ic.name());
                run_experiment(c).map(|r| (*g, *ic, r))
            })
            .collect()
    });

    let mut points = Vec::with_capacity(results.len());
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let (gamma, ic, run) = r?;
        rows.push(run.row.clone());
        points.push(SweepPoint {
            gamma,
            ic,
            dir: run.dir,
            summary: run.row.summary,
        });
    }
    let mut fits = Vec::new();
    for &ic in &spec.ics {
        for (norm, pick) in [
            ("spectral", (|s: &RunSummary| s.delta_spectral) as fn(&RunSummary) -> Option<f64>),
            ("frobenius", |s: &RunSummary| s.delta_frobenius),
        ] {
            let data: Vec<(f64, f64)> = points
                .iter()
                .filter(|p| p.ic == ic && p.summary.status != Status::Blowup)
                .filter_map(|p| pick(&p.summary).map(|d| (p.gamma, d)))
                .filter(|(_, d)| d.is_finite() && *d > 0.0)
                .map(|(g, d)| (g.ln(), d.ln()))
                .collect();
            let fit = (data.len() >= 3).then(|| least_squares(&data)).flatten();
            fits.push(SweepFit {
                ic,
                norm,
                slope: fit.map(|f| f.0),
                intercept: fit.map(|f| f.1),
                points: data.len(),
            });
        }
    }

    std::fs::create_dir_all(&base).map_err(|e| CliError::io(&base, e))?;
    write_sweep_csv(&base.join(SWEEP_FILE), &points)?;
    write_fit_csv(&base.join(SWEEP_FIT_FILE), &fits)?;
    write_summary_csv(&base.join(SUMMARY_FILE), &rows)?;
    Ok(SweepResult {
        points,
        fits,
        dir: base,
    })
}

/// Slope and intercept of the least-squares line through `(x, y)`.
pub fn least_squares(data: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = data.len() as f64;
    let mx = data.iter().map(|p| p.0).sum::<f64>() / n;
    let my = data.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = data.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = data.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "gamma",
        "ic",
        "status",
        "blowup_flag",
        "sup_U_minus_1_spec",
        "sup_U_minus_1_fro",
        "final_U_minus_1_spec",
        "final_U_minus_1_fro",
        "max_leakage_spectral",
        "bounds_hold",
    ])?;
    let o = |v: Option<f64>| v.map(num).unwrap_or_default();
    for p in points {
        let s = &p.summary;
        w.write_record([
            num(p.gamma),
            p.ic.name().to_string(),
            s.status.name().to_string(),
            s.blowup_flag.to_string(),
            o(s.delta_spectral),
            o(s.delta_frobenius),
            o(s.final_spectral),
            o(s.final_frobenius),
            o(s.max_leakage_spectral),
            s.bounds_hold.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

fn write_fit_csv(path: &Path, fits: &[SweepFit]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ic", "norm", "slope", "intercept", "points"])?;
    for f in fits {
        w.write_record([
            f.ic.name().to_string(),
            f.norm.to_string(),
            f.slope.map(num).unwrap_or_default(),
            f.intercept.map(num).unwrap_or_default(),
            f.points.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}
