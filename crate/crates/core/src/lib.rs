//! Signal-to-noise ratio and measurement-rate-per-photon bounds for linear
//! non-Hermitian sensors driven through one or two waveguide ports.
//!
//! [`syscore`] holds the system model and transfer matrix; [`metrics`] and
//! [`bathmod`] evaluate signal, noise and rate; [`models`] builds the two
//! canonical two-mode sensors; [`oracle`] re-derives the key quantities in
//! the time domain; [`explorer`] runs sweeps and searches.

pub mod bathmod;
pub mod config;
pub mod error;
pub mod explorer;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod syscore;

pub use error::{Error, Result};
pub use linalg::{c, ComplexMatrix, C64};
pub use syscore::SensorSystem;
