//! Driven finite-dimensional quantum systems in the adiabatic frame.
//!
//! The crate is organised as a pipeline:
//!
//! * [`operator`]: dense complex linear algebra, spectral decompositions with
//!   degeneracy grouping, eigenprojector label tracking and block algebra.
//! * [`propagation`]: an adaptive 8th-order Dormand–Prince integrator for
//!   linear matrix ODEs `Ṁ = G(t) M`.
//! * [`frame`]: Kato's adiabatic transporter and the frame in which the
//!   strong generator has a time-independent block structure.
//! * [`bloch`]: initial conditions and three independent solution routes for
//!   the time-dependent Bloch wave operator (direct Riccati integration, the
//!   closed form in terms of the full evolution, and Radon linearisation).
//! * [`diagnostics`]: leakage, the `2δ/(1−δ)` distance bound and the polar
//!   unitarisation `V = U (U†U)^{-1/2}` with its bound.
//! * [`models`]: Landau–Zener, the driven three-level system, seeded random
//!   smooth models and tabulated custom models.
//!
//! ```
//! use std::sync::Arc;
//!
//! use bloch_core::bloch::{closed_form_wave, identity_ic};
//! use bloch_core::diagnostics::{build_report, unitarize};
//! use bloch_core::frame::{AdiabaticFrame, FrameOptions};
//! use bloch_core::models::{landau_zener_model, LzParameters};
//! use bloch_core::propagation::uniform_grid;
//!
//! let model = Arc::new(landau_zener_model(LzParameters { gamma: 2.0 })?);
//! let frame = AdiabaticFrame::new(model, -10.0, 10.0, FrameOptions::new(1e-10))?;
//! let sol = frame.evolve(&uniform_grid(-10.0, 10.0, 41))?;
//! let ic = identity_ic(&sol.blocks);
//! let u = closed_form_wave(&sol.m, &ic, &sol.blocks, 1e-8)?;
//! let v = unitarize(&u, &sol.blocks, 1e-8)?;
//! let report = build_report(&u, Some(&v), &sol.m, None, &sol.blocks)?;
//! assert!(report.all_hold());
//! # Ok::<(), bloch_core::Error>(())
//! ```

pub mod bloch;
pub mod diagnostics;
pub mod error;
pub mod frame;
pub mod models;
pub mod operator;
pub mod propagation;

pub use error::{Error, Result};
pub use operator::{CMatrix, Norm, SpectralDecomposition};
pub use propagation::PropagatorPath;

pub use num_complex::Complex64;
