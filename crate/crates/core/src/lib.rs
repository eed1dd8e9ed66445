//! Spectral significance scoring of convolution kernels.
//!
//! Each n×n kernel slice of a conv layer (n ∈ {1, 2, 3}) is scored by eight
//! compression modes built on its eigenvalues, its Gramian, or its raw
//! weights. Kernels scoring below a threshold are treated as prunable, and
//! [`pruner`] aggregates those decisions over whole models and checkpoint
//! series. [`infer`] runs the pruned network so the accuracy cost can be
//! measured.

pub mod infer;
mod parallel;
pub mod modes;
pub mod pruner;
pub mod spectra;
pub mod tensor_io;

use thiserror::Error;

pub use modes::{CompressionMode, ThresholdTable};
pub use spectra::{Kernel, SpectralSummary};
pub use tensor_io::{ModelSnapshot, Tensor};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    TensorIo(#[from] tensor_io::TensorIoError),
    #[error(transparent)]
    Spectra(#[from] spectra::SpectraError),
    #[error(transparent)]
    Modes(#[from] modes::ModesError),
    #[error(transparent)]
    Pruner(#[from] pruner::PrunerError),
    #[error(transparent)]
    Infer(#[from] infer::InferError),
    #[error(transparent)]
    Invariant(#[from] spectra::InvariantViolation),
}

impl Error {
    /// True when the failure is an internal consistency bug rather than bad input.
    pub fn is_invariant_violation(&self) -> bool {
        match self {
            Error::Invariant(_) => true,
            Error::Pruner(p) => p.is_invariant_violation(),
            _ => false,
        }
    }
}
