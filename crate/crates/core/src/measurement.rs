//! Camera noise parameters and measurement stacks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RealImage;

/// Photon-noise parameters of the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    fwc: f64,
    sigma0: f64,
    quant_bits: u32,
}

impl NoiseParams {
    /// `fwc` is the full well capacity in electrons; `quant_bits = 0` disables
    /// quantization.
    pub fn new(fwc: f64, quant_bits: u32) -> Result<Self> {
        if !(fwc.is_finite() && fwc > 0.0) {
            return Err(Error::Domain(format!("fwc must be positive, got {fwc}")));
        }
        if quant_bits > 16 {
            return Err(Error::Domain(format!(
                "quant_bits must be in 0..=16, got {quant_bits}"
            )));
        }
        Ok(Self {
            fwc,
            sigma0: 1.0 / fwc.sqrt(),
            quant_bits,
        })
    }

    /// Parameters giving normalized noise level `sigma0` (`fwc = σ_0⁻²`).
    pub fn from_sigma0(sigma0: f64, quant_bits: u32) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::Domain(format!("sigma0 must be positive, got {sigma0}")));
        }
        Self::new(1.0 / (sigma0 * sigma0), quant_bits)
    }

    pub fn fwc(&self) -> f64 {
        self.fwc
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn quant_bits(&self) -> u32 {
        self.quant_bits
    }
}

/// `M` noisy intensity images and the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementStack {
    images: Vec<RealImage>,
    noise: NoiseParams,
    rho: f64,
}

impl MeasurementStack {
    pub fn new(images: Vec<RealImage>, noise: NoiseParams, rho: f64) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Domain("measurement stack is empty".into()));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Domain(format!("rho must be positive, got {rho}")));
        }
        let dims = images[0].dims();
        for img in &images[1..] {
            img.ensure_same_dims(dims)?;
        }
        Ok(Self { images, noise, rho })
    }

    pub fn m(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[RealImage] {
        &self.images
    }

    pub fn noise(&self) -> NoiseParams {
        self.noise
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dims(&self) -> (usize, usize) {
        self.images[0].dims()
    }

    pub fn into_images(self) -> Vec<RealImage> {
        self.images
    }
}

/// Electron counts to normalized intensity: `counts / fwc`.
pub fn normalize(counts: &RealImage, noise: &NoiseParams) -> Result<RealImage> {
    if let Some(i) = counts.as_slice().iter().position(|&c| c < 0.0) {
        return Err(Error::Domain(format!("negative count at index {i}")));
    }
    let fwc = noise.fwc();
    Ok(counts.map(|c| c / fwc))
}
