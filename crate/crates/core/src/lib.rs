//! Time evolution and chaos diagnostics for two driven transmons coupled
//! through a common cavity.

pub mod cli;
pub mod curvature;
pub mod diagnostics;
pub mod error;
pub mod gates;
pub mod hilbert;
pub mod linalg;
pub mod propagator;
pub mod pulse;
pub mod quad;
pub mod rmt;
pub mod spectral;

pub use error::{Error, Result};
