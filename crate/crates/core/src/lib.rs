//! Annealed Langevin posterior sampling for photon-limited imaging with
//! real-valued and complex-valued objects.

pub mod cli;
pub mod config;
pub mod container;
pub mod error;
pub mod forward;
pub mod hio;
pub mod image;
pub mod likelihood;
pub mod measurement;
pub mod metrics;
pub mod noise_sim;
pub mod prior;
pub mod protocol;
pub mod rng;
pub mod sampler;
pub mod schedule;

pub use error::{Error, Result};
pub use image::{ComplexImage, RealImage};
pub use num_complex::Complex64;
