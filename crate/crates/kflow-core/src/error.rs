//! Error type shared by the geometry and flow layers.

use core::fmt;

/// Failure modes surfaced by solvers and flow drivers.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Requested spectral resolution is outside the supported range.
    ModesOutOfRange { requested: usize, min: usize, max: usize },
    /// Two objects built against different surface models were combined.
    ModelMismatch,
    /// A conformal factor lost pointwise positivity.
    PositivityViolation { min_factor: f64 },
    /// A Poisson-type solve was given data with nonzero mean.
    UnbalancedSource { mean: f64 },
    /// The iterative elliptic solve stopped above its residual target.
    GreenDiverged { residual: f64, iterations: usize },
    /// Gram matrix of the projector basis is numerically singular.
    DegenerateGram { condition: f64 },
    /// A cohomology class with vanishing self-intersection was rejected.
    DegenerateClass { omega_sq: f64 },
    /// Vector length does not match the expected dimension.
    RankMismatch { expected: usize, got: usize },
    /// Intersection pairing matrix is not symmetric.
    AsymmetricPairing { row: usize, col: usize },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::ModesOutOfRange { requested, min, max } => {
                write!(f, "spectral resolution {requested} outside supported range [{min}, {max}]")
            }
            CoreError::ModelMismatch => write!(f, "objects belong to different surface models"),
            CoreError::PositivityViolation { min_factor } => {
                write!(f, "conformal factor not positive (min {min_factor:.6e})")
            }
            CoreError::UnbalancedSource { mean } => {
                write!(f, "source term has nonzero mean {mean:.6e}")
            }
            CoreError::GreenDiverged { residual, iterations } => {
                write!(f, "elliptic solve stalled at residual {residual:.6e} after {iterations} iterations")
            }
            CoreError::DegenerateGram { condition } => {
                write!(f, "projector Gram matrix is ill conditioned ({condition:.3e})")
            }
            CoreError::DegenerateClass { omega_sq } => {
                write!(f, "class has degenerate self-intersection {omega_sq:.6e}")
            }
            CoreError::RankMismatch { expected, got } => {
                write!(f, "expected vector of length {expected}, got {got}")
            }
            CoreError::AsymmetricPairing { row, col } => {
                write!(f, "pairing matrix entries ({row},{col}) and ({col},{row}) differ")
            }
        }
    }
}

impl core::error::Error for CoreError {}
