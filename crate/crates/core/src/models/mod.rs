//! Built-in generator models `H(t) = γ B̄(t) + C̄(t)`.

mod landau_zener;
mod random;
mod tabulated;
mod three_level;

pub use landau_zener::{
    closed_form_transporter, landau_zener_model, lz_asymptotic_amplitude, LandauZener,
    LzParameters,
};
pub use random::{random_smooth_model, RandomSmooth, RandomSmoothParams};
pub use tabulated::TabulatedModel;
pub use three_level::{three_level_model, Envelope, ThreeLevel, ThreeLevelParameters};

use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operator::{CMatrix, SpectralDecomposition};

/// A time-parametrised pair of skew-Hermitian generators: the strong drift
/// `B̄(t)` and the weak drive `C̄(t)`, combined as `γ B̄ + C̄`.
pub trait GeneratorModel: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn gamma(&self) -> f64;

    /// `B̄(t)`.
    fn drift(&self, t: f64) -> CMatrix;

    /// `C̄(t)`.
    fn drive(&self, t: f64) -> CMatrix;

    fn generator(&self, t: f64) -> CMatrix {
        self.drift(t).scale(self.gamma()) + self.drive(t)
    }

    /// Spectral decomposition of the drift with model-defined block labels.
    fn analytic_spectral(&self, _t: f64) -> Option<SpectralDecomposition> {
        None
    }

    /// `Ṗ_k(t)` in the labelling of [`GeneratorModel::analytic_spectral`].
    fn analytic_projector_derivatives(&self, _t: f64) -> Option<Vec<CMatrix>> {
        None
    }

    /// Named numeric parameters, for reports.
    fn parameters(&self) -> Vec<(&'static str, f64)>;

    /// Interpolation scheme for tabulated models.
    fn interpolation(&self) -> Option<&'static str> {
        None
    }
}

/// Description of a model that can be built by name.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    LandauZener(LzParameters),
    ThreeLevel(ThreeLevelParameters),
    RandomSmooth(RandomSmoothParams),
    Tabulated { path: PathBuf, gamma: f64 },
}

/// Built-in model names with one-line descriptions.
pub const BUILTIN_MODELS: &[(&str, &str)] = &[
    (
        "landau-zener",
        "two-level sweep, drift -i(X + tZ), no drive; params: gamma",
    ),
    (
        "three-level",
        "resonantly driven three-level system, interaction picture; params: gamma, a, omega",
    ),
    (
        "random",
        "seeded random smooth model with a rotating block structure; params: gamma, dim, blocks, seed",
    ),
    (
        "custom",
        "tabulated drift and drive samples, cubic-spline interpolated; params: gamma, path",
    ),
];

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::LandauZener(_) => "landau-zener",
            ModelSpec::ThreeLevel(_) => "three-level",
            ModelSpec::RandomSmooth(_) => "random",
            ModelSpec::Tabulated { .. } => "custom",
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            ModelSpec::LandauZener(p) => p.gamma,
            ModelSpec::ThreeLevel(p) => p.gamma,
            ModelSpec::RandomSmooth(p) => p.gamma,
            ModelSpec::Tabulated { gamma, .. } => *gamma,
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelSpec::LandauZener(p) => p.gamma = gamma,
            ModelSpec::ThreeLevel(p) => p.gamma = gamma,
            ModelSpec::RandomSmooth(p) => p.gamma = gamma,
            ModelSpec::Tabulated { gamma: g, .. } => *g = gamma,
        }
        out
    }

    pub fn build(&self) -> Result<Arc<dyn GeneratorModel>> {
        Ok(match self {
            ModelSpec::LandauZener(p) => Arc::new(landau_zener_model(*p)?),
            ModelSpec::ThreeLevel(p) => Arc::new(three_level_model(*p)?),
            ModelSpec::RandomSmooth(p) => Arc::new(random_smooth_model(*p)?),
            ModelSpec::Tabulated { path, gamma } => {
                Arc::new(TabulatedModel::from_path(path, *gamma)?)
            }
        })
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            expected: "finite and > 0",
        })
    }
}
