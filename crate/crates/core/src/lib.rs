//! Behavioral modeling of a half-bridge Class-D amplifier under supply ripple.
//!
//! [`cdpa_sim`] produces input/output traces, [`spectrum`] reads the
//! power-supply intermodulation products from them, and [`models`] holds the
//! sigmoid and wavelet Elman networks plus a Volterra-Laguerre baseline.

pub mod cdpa_sim;
pub mod cli;
pub mod error;
pub mod models;
pub mod signal;
pub mod spectrum;
pub mod training;

pub use error::{Error, Result};
pub use signal::SignalTrace;
