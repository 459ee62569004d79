//! Quantum source-compression toolkit for ensembles of mixed states.
//!
//! The crate simulates lossy compression of an i.i.d. quantum source
//! {pᵢ, ρᵢ}: blind Schumacher–Jozsa typical-subspace coding on blocks,
//! and a non-blind protocol that first replaces each signal state by a
//! purification and lets the receiver discard the ancillas. Alongside the
//! protocols it provides the information functionals needed to analyse
//! them (von Neumann and relative entropy, Holevo information, Uhlmann
//! fidelity, trace-norm distortion) and executable checks of the
//! inequalities that constrain every run: trace-distance contractivity
//! under quantum operations, relative-entropy monotonicity, the
//! Fannes-type entropy estimate, and the rate lower bound
//! `log dim ≥ N·χ − 2[D̄·N·log₂d + η(D̄)]`.
//!
//! Modules mirror the layering:
//!
//! - [`linalg`]: dense complex-matrix kernel (Hermitian eigen, SVD,
//!   Kronecker products, partial trace, trace norm).
//! - [`states`]: density matrices, ensembles, block sequences,
//!   purifications.
//! - [`functionals`]: scalar information quantities and bound reports.
//! - [`channels`]: Kraus-form quantum operations and unitary dilations.
//! - [`compression`]: typical subspaces, encoders/decoders, protocol
//!   runners and the bound-check harness.
//! - [`cli`]: config-driven batch driver behind the `qsrc` binary.
//!
//! See the crate examples for one runnable demo per capability.

pub mod channels;
pub mod cli;
pub mod compression;
pub mod functionals;
pub mod linalg;
pub mod states;

use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: relative deviation {deviation:.3e}")]
    NotHermitian { deviation: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("eigenvalue {value:.3e} is below the PSD floor")]
    NegativeEigenvalue { value: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        needed: usize,
        cap: usize,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use linalg::{ComplexMatrix, HermitianSpectrum, Tolerances};
pub use states::{BlockSequence, BlockState, DensityMatrix, Ensemble, PureState};
