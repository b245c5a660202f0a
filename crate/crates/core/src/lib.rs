//! Frame synchronization under nonlinear amplifier distortion.
//!
//! Baseband simulation of superimposed-training frame sync with an extreme
//! learning machine (ELM) offset classifier, plus three reference pipelines
//! (time-division correlation, time-division ELM, superimposed correlation).
//! The `harness` module runs reproducible Monte Carlo sweeps and emits
//! CSV/SVG results; everything below it is a pure function of its inputs and
//! an explicit random stream.

pub mod config;
pub mod detection;
pub mod elm;
pub mod error;
pub mod harness;
pub mod impairments;
pub mod methods;
pub mod metric;
pub mod rng;
pub mod waveform;

pub use config::SimConfig;
pub use error::{Error, Result};

/// Complex baseband sample type used throughout.
pub type Complex = num_complex::Complex<f64>;
