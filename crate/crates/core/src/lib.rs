//! Exact heat statistics of a harmonic oscillator coupled to a bosonic bath.

pub mod cli;
pub mod error;
pub mod heat;
pub mod oracle;
pub mod quadrature;
pub mod propagator;
pub mod spectral;
pub mod spectrum;

pub use error::{Error, Result};
pub use propagator::{MasterCoefficients, TimeGrid, Trajectory};
pub use spectral::{KernelSamples, Mode, SpectralDensity, Support};
