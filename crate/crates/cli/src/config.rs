//! Experiment configuration: a TOML file with `[model]`, `[time]`,
//! `[solver]`, `[output]` and optional `[sweep]` sections. Any key can be
//! overridden from the command line as `section.key=value`.

use std::fmt;
use std::path::{Path, PathBuf};

use bloch_core::bloch::IcKind;
use bloch_core::models::{
    LzParameters, ModelSpec, RandomSmoothParams, ThreeLevelParameters, BUILTIN_MODELS,
};
use bloch_core::operator::from_rows;
use bloch_core::{CMatrix, Complex64, Norm};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed for random models; overrides `model.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub model: ModelSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    pub gamma: f64,
    /// Three-level drive amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Three-level energy scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wobble: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    /// Tabulated model file for `name = "custom"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub t0: f64,
    pub t_final: f64,
    /// Number of checkpoints, both ends included.
    pub checkpoints: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t_final: 10.0,
            checkpoints: 101,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Riccati,
    #[serde(alias = "closed-form")]
    ClosedForm,
    Radon,
    All,
}

impl Route {
    pub const SOLVERS: [Route; 3] = [Route::Riccati, Route::ClosedForm, Route::Radon];

    pub fn name(self) -> &'static str {
        match self {
            Route::Riccati => "riccati",
            Route::ClosedForm => "closed_form",
            Route::Radon => "radon",
            Route::All => "all",
        }
    }

    /// The individual solvers this choice runs, in priority order.
    pub fn solvers(self) -> Vec<Route> {
        match self {
            Route::All => Self::SOLVERS.to_vec(),
            r => vec![r],
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IcChoice {
    Identity,
    Stationary,
    Custom,
}

impl IcChoice {
    pub fn kind(self) -> IcKind {
        match self {
            IcChoice::Identity => IcKind::Identity,
            IcChoice::Stationary => IcKind::Stationary,
            IcChoice::Custom => IcKind::Custom,
        }
    }

    pub fn name(self) -> &'static str {
        self.kind().name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormChoice {
    Spectral,
    Frobenius,
}

impl NormChoice {
    pub fn norm(self) -> Norm {
        match self {
            NormChoice::Spectral => Norm::Spectral,
            NormChoice::Frobenius => Norm::Frobenius,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            NormChoice::Spectral => "spec",
            NormChoice::Frobenius => "fro",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub ic: IcChoice,
    /// Matrix file for `ic = "custom"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ic_path: Option<PathBuf>,
    pub route: Route,
    /// Norms for the leakage columns of the trace.
    pub norms: Vec<NormChoice>,
    pub sv_tol: f64,
    /// Re-impose the Bloch condition after every Riccati step.
    pub project: bool,
    /// Also check intertwining and `F = W M` against a lab-frame solve.
    pub frame_checks: bool,
    pub steps_per_period: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            ic: IcChoice::Identity,
            ic_path: None,
            route: Route::All,
            norms: vec![NormChoice::Spectral, NormChoice::Frobenius],
            sv_tol: 1e-8,
            project: true,
            frame_checks: true,
            steps_per_period: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub gammas: Vec<f64>,
    #[serde(default = "default_sweep_ics")]
    pub ics: Vec<IcChoice>,
    /// Concurrent runs; defaults to the number of CPUs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_sweep_ics() -> Vec<IcChoice> {
    vec![IcChoice::Identity, IcChoice::Stationary]
}

impl ExperimentConfig {
    /// Reads a config file, applying `section.key=value` overrides. Relative
    /// model and initial-condition paths are resolved against the file's
    /// directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::parse(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.model.path, &mut config.solver.ic_path]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let t = &self.time;
        if !(t.t0.is_finite() && t.t_final.is_finite() && t.t_final > t.t0) {
            return bad(format!(
                "time.t_final ({}) must exceed time.t0 ({})",
                t.t_final, t.t0
            ));
        }
        if t.checkpoints < 2 {
            return bad(format!("time.checkpoints must be at least 2, got {}", t.checkpoints));
        }
        let s = &self.solver;
        if !(s.tol > 1e-14 && s.tol < 1e-2) {
            return bad(format!("solver.tol must lie in (1e-14, 1e-2), got {:e}", s.tol));
        }
        if !(s.sv_tol > 0.0 && s.sv_tol < 1.0) {
            return bad(format!("solver.sv_tol must lie in (0, 1), got {:e}", s.sv_tol));
        }
        if !(s.steps_per_period >= 1.0) {
            return bad(format!(
                "solver.steps_per_period must be at least 1, got {}",
                s.steps_per_period
            ));
        }
        if s.norms.is_empty() {
            return bad("solver.norms must name at least one norm".into());
        }
        if s.ic == IcChoice::Custom && s.ic_path.is_none() {
            return bad("solver.ic = \"custom\" needs solver.ic_path".into());
        }
        if !(self.model.gamma.is_finite() && self.model.gamma > 0.0) {
            return bad(format!("model.gamma must be positive, got {}", self.model.gamma));
        }
        if !BUILTIN_MODELS.iter().any(|(n, _)| *n == self.model.name) {
            let names: Vec<&str> = BUILTIN_MODELS.iter().map(|(n, _)| *n).collect();
            return bad(format!(
                "unknown model `{}` (expected one of {})",
                self.model.name,
                names.join(", ")
            ));
        }
        if self.model.name == "custom" && self.model.path.is_none() {
            return bad("model.name = \"custom\" needs model.path".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.gammas.is_empty() {
                return bad("sweep.gammas must not be empty".into());
            }
            if let Some(g) = sweep.gammas.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
                return bad(format!("sweep.gammas must be positive, got {g}"));
            }
            if sweep.ics.is_empty() {
                return bad("sweep.ics must not be empty".into());
            }
            if sweep.ics.contains(&IcChoice::Custom) && s.ic_path.is_none() {
                return bad("sweep.ics contains \"custom\" but solver.ic_path is unset".into());
            }
            if sweep.workers == Some(0) {
                return bad("sweep.workers must be at least 1".into());
            }
        }
        self.model_spec().map(|_| ())
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let unused = |keys: &[(&str, bool)]| -> Result<()> {
            match keys.iter().find(|(_, set)| *set) {
                Some((k, _)) => Err(CliError::Config(format!(
                    "model.{k} does not apply to model `{}`",
                    m.name
                ))),
                None => Ok(()),
            }
        };
        let random_keys = [
            ("dim", m.dim.is_some()),
            ("blocks", m.blocks.is_some()),
            ("seed", m.seed.is_some()),
            ("spacing", m.spacing.is_some()),
            ("wobble", m.wobble.is_some()),
            ("rotation", m.rotation.is_some()),
            ("drive_scale", m.drive_scale.is_some()),
            ("frequency", m.frequency.is_some()),
        ];
        Ok(match m.name.as_str() {
            "landau-zener" => {
                unused(&[("a", m.a.is_some()), ("omega", m.omega.is_some()), ("path", m.path.is_some())])?;
                unused(&random_keys)?;
                ModelSpec::LandauZener(LzParameters { gamma: m.gamma })
            }
            "three-level" => {
                unused(&[("path", m.path.is_some())])?;
                unused(&random_keys)?;
                let d = ThreeLevelParameters::default();
                ModelSpec::ThreeLevel(ThreeLevelParameters {
                    gamma: m.gamma,
                    a: m.a.unwrap_or(d.a),
                    omega: m.omega.unwrap_or(d.omega),
                })
            }
            "random" => {
                unused(&[("a", m.a.is_some()), ("omega", m.omega.is_some()), ("path", m.path.is_some())])?;
                let d = RandomSmoothParams::default();
                ModelSpec::RandomSmooth(RandomSmoothParams {
                    dim: m.dim.unwrap_or(d.dim),
                    n_blocks: m.blocks.unwrap_or(d.n_blocks),
                    seed: self.seed.or(m.seed).unwrap_or(d.seed),
                    gamma: m.gamma,
                    spacing: m.spacing.unwrap_or(d.spacing),
                    wobble: m.wobble.unwrap_or(d.wobble),
                    rotation: m.rotation.unwrap_or(d.rotation),
                    drive_scale: m.drive_scale.unwrap_or(d.drive_scale),
                    frequency: m.frequency.unwrap_or(d.frequency),
                })
            }
            "custom" => {
                unused(&[("a", m.a.is_some()), ("omega", m.omega.is_some())])?;
                unused(&random_keys)?;
                ModelSpec::Tabulated {
                    path: m.path.clone().expect("validated"),
                    gamma: m.gamma,
                }
            }
            other => return Err(CliError::Config(format!("unknown model `{other}`"))),
        })
    }

    /// Copy with `model.gamma` replaced.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut c = self.clone();
        c.model.gamma = gamma;
        c
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        CliError::Config(format!("override `{assignment}` is not of the form key=value"))
    })?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| {
        CliError::Config(format!("override `{assignment}` has an empty key"))
    })?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("override `{assignment}`: `{p}` is not a section"))
        })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Reads a square complex matrix: one row per line, each entry as a `re im`
/// pair; blank lines and `#` comments are skipped.
pub fn load_matrix(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_matrix(text: &str) -> Result<CMatrix, String> {
    let mut entries = Vec::new();
    let mut rows = 0;
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("line {}: {e}", i + 1))?;
        if nums.len() % 2 != 0 || width.is_some_and(|w| w != nums.len()) {
            return Err(format!("line {}: expected {} reals", i + 1, width.unwrap_or(nums.len() + 1)));
        }
        width = Some(nums.len());
        entries.extend(nums.chunks(2).map(|p| Complex64::new(p[0], p[1])));
        rows += 1;
    }
    if rows == 0 || width != Some(2 * rows) {
        return Err(format!("expected a square matrix, found {rows} rows of {} reals", width.unwrap_or(0)));
    }
    from_rows(rows, &entries).map_err(|e| e.to_string())
}
