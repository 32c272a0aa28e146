//! Simulation, spectral and estimation tools for chordal SLE_κ(ρ) and its
//! boundary multifractal spectrum.
//!
//! Capacity time uses the normalisation hcap(K_t) = a·t with a = 2/κ, so the
//! driving function of SLE_κ(0) is a standard Brownian motion.

pub mod drivers;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod io;
pub mod loewner;
pub mod qdiff;
pub mod radial;
pub mod rng;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
pub use spectrum::{SleParams, SpectrumParams};
