//! Spectral toolkit for conformal metrics on two model surfaces (the
//! axisymmetric round sphere and the flat square torus), the curvature
//! relaxation flow acting on Kahler potentials, and the companion
//! finite-dimensional flow on cohomology classes of complex surfaces.
//!
//! The crate is `no_std` compatible (with `alloc`); enable the `libm`
//! feature instead of `std` on bare targets.

#![cfg_attr(not(feature = "std"), no_std)]
// Index loops over several same-length buffers at once are the house style
// for the kernels here; iterator chains obscure the stencil structure.
#![allow(clippy::needless_range_loop)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("kflow-core needs either the `std` or the `libm` feature");

extern crate alloc;

pub mod classflow;
pub mod error;
pub mod fft;
pub mod field;
pub mod flow;
pub mod holomorphy;
pub mod initial;
pub mod legendre;
pub mod math;
pub mod metric;
pub mod surface;

pub use error::CoreError;
pub use field::SpectralField;
pub use flow::{DiagnosticsRecord, FlowParams, FlowResult, Termination};
pub use metric::ConformalMetric;
pub use surface::{SurfaceKind, SurfaceModel};
