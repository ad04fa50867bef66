//! Simulation of autonomous Bell-state stabilization in a driven-dissipative
//! circuit-QED system: two non-identical qubits dispersively coupled to a lossy
//! cavity mode, driven by six continuous-wave tones.
//!
//! The crate integrates the Lindblad master equation for the three-body density
//! matrix in the rotating frame, computes Bell fidelity and CHSH correlation
//! over time, and provides parameter sweeps, truncation studies and an analytic
//! oracle suite for regression checking.

pub mod config;
pub mod experiments;
pub mod lindblad;
pub mod observables;
pub mod operators;
pub mod output;
pub mod run;
pub mod system;

use std::fmt;

pub use num_complex::Complex64;

/// Errors produced by construction, validation, integration and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "expectation of Hermitian operator has imaginary part {imag:.3e} \
         (exceeds 1e-10; state is likely corrupted)"
    )]
    NonRealExpectation { imag: f64 },

    #[error("observable out of physical range: {0}")]
    OutOfRange(String),

    #[error("numerical blow-up at t = {t} µs: {detail}")]
    NumericalBlowup { t: f64, detail: String },

    #[error("invariant violated at t = {t} µs: {detail}")]
    InvariantViolation {
        t: f64,
        detail: String,
        /// Last recorded state that still satisfied all invariants.
        last_good: Option<Snapshot>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Density-matrix snapshot attached to integration failures.
///
/// Wraps the state so that error messages stay readable instead of dumping a
/// full complex matrix.
pub struct Snapshot(pub Box<lindblad::DensityState>);

impl fmt::Debug for Snapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Snapshot {{ t: {}, dim: {} }}", self.0.t, self.0.dim())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
