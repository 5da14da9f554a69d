//! Prior score providers.
//!
//! Analytic providers return the exact gradient of the log of their own
//! smoothed density. For the real branch an atom `x_i` is smoothed by
//! `N(x_i, σ²·x_i)` per pixel. For the complex branch the real and imaginary
//! parts are smoothed independently, each with variance `σ²/4` by default.
//! Complex gradients are `∂_Re + j∂_Im`.

use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::{ComplexImage, RealImage};
use crate::protocol::{Endpoint, ScoreClient};

pub const MAX_ATOMS: usize = 64;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Per-component smoothing variance of the complex mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComplexVariance {
    /// `σ²/4` on each of Re and Im.
    #[default]
    Quarter,
    /// `σ²` on each of Re and Im.
    Full,
}

impl ComplexVariance {
    pub fn component_variance(self, sigma: f64) -> f64 {
        match self {
            Self::Quarter => 0.25 * sigma * sigma,
            Self::Full => sigma * sigma,
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

fn normalized_log_weights(weights: &[f64], atoms: usize) -> Result<Vec<f64>> {
    if atoms == 0 {
        return Err(Error::Domain("mixture needs at least one atom".into()));
    }
    if atoms > MAX_ATOMS {
        return Err(Error::Domain(format!(
            "mixture has {atoms} atoms, at most {MAX_ATOMS} supported"
        )));
    }
    if weights.len() != atoms {
        return Err(Error::Domain(format!(
            "{} weights for {atoms} atoms",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::Domain(format!("weights must be positive, got {w}")));
    }
    let total: f64 = weights.iter().sum();
    Ok(weights.iter().map(|w| (w / total).ln()).collect())
}

/// Softmax of per-atom log-likelihoods.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Mixture of real atoms with signal-dependent Gaussian smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMixture {
    atoms: Vec<RealImage>,
    log_weights: Vec<f64>,
}

impl RealMixture {
    /// Weights must be positive; they are normalized here.
    pub fn new(atoms: Vec<RealImage>, weights: &[f64]) -> Result<Self> {
        let log_weights = normalized_log_weights(weights, atoms.len())?;
        let dims = atoms[0].dims();
        for (i, atom) in atoms.iter().enumerate() {
            atom.ensure_same_dims(dims)?;
            if let Some(p) = atom.as_slice().iter().position(|&v| v <= 0.0) {
                return Err(Error::DegenerateVariance { atom: i, pixel: p });
            }
        }
        Ok(Self { atoms, log_weights })
    }

    pub fn atoms(&self) -> &[RealImage] {
        &self.atoms
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    fn log_joint(&self, x: &RealImage, sigma: f64) -> Result<Vec<f64>> {
        check_sigma(sigma)?;
        x.ensure_same_dims(self.atoms[0].dims())?;
        let s2 = sigma * sigma;
        Ok(self
            .atoms
            .iter()
            .zip(&self.log_weights)
            .map(|(atom, lw)| {
                lw + atom
                    .as_slice()
                    .iter()
                    .zip(x.as_slice())
                    .map(|(&a, &v)| {
                        let var = s2 * a;
                        -0.5 * (LN_2PI + var.ln()) - (v - a) * (v - a) / (2.0 * var)
                    })
                    .sum::<f64>()
            })
            .collect())
    }

    pub fn log_density(&self, x: &RealImage, sigma: f64) -> Result<f64> {
        Ok(log_sum_exp(&self.log_joint(x, sigma)?))
    }

    /// Posterior probability of each atom given the smoothed image.
    pub fn posterior_weights(&self, x: &RealImage, sigma: f64) -> Result<Vec<f64>> {
        Ok(softmax(&self.log_joint(x, sigma)?))
    }

    pub fn score(&self, x: &RealImage, sigma: f64) -> Result<RealImage> {
        let post = self.posterior_weights(x, sigma)?;
        let s2 = sigma * sigma;
        let mut out = vec![0.0; x.len()];
        for (atom, &p) in self.atoms.iter().zip(&post) {
            if p == 0.0 {
                continue;
            }
            for ((o, &a), &v) in out.iter_mut().zip(atom.as_slice()).zip(x.as_slice()) {
                *o += p * (a - v) / (s2 * a);
            }
        }
        Ok(RealImage::from_vec_unchecked(x.height(), x.width(), out))
    }
}

/// Mixture of complex atoms with independent Gaussian smoothing of Re and Im.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMixture {
    atoms: Vec<ComplexImage>,
    log_weights: Vec<f64>,
    variance: ComplexVariance,
}

impl ComplexMixture {
    pub fn new(atoms: Vec<ComplexImage>, weights: &[f64], variance: ComplexVariance) -> Result<Self> {
        let log_weights = normalized_log_weights(weights, atoms.len())?;
        let dims = atoms[0].dims();
        for atom in &atoms {
            atom.ensure_same_dims(dims)?;
        }
        Ok(Self {
            atoms,
            log_weights,
            variance,
        })
    }

    pub fn atoms(&self) -> &[ComplexImage] {
        &self.atoms
    }

    pub fn variance(&self) -> ComplexVariance {
        self.variance
    }

    fn log_joint(&self, o: &ComplexImage, sigma: f64) -> Result<Vec<f64>> {
        check_sigma(sigma)?;
        o.ensure_same_dims(self.atoms[0].dims())?;
        let v = self.variance.component_variance(sigma);
        let norm = -(LN_2PI + v.ln()) * o.len() as f64;
        Ok(self
            .atoms
            .iter()
            .zip(&self.log_weights)
            .map(|(atom, lw)| {
                let dist: f64 = atom
                    .as_slice()
                    .iter()
                    .zip(o.as_slice())
                    .map(|(a, z)| (a - z).norm_sqr())
                    .sum();
                lw + norm - dist / (2.0 * v)
            })
            .collect())
    }

    pub fn log_density(&self, o: &ComplexImage, sigma: f64) -> Result<f64> {
        Ok(log_sum_exp(&self.log_joint(o, sigma)?))
    }

    pub fn posterior_weights(&self, o: &ComplexImage, sigma: f64) -> Result<Vec<f64>> {
        Ok(softmax(&self.log_joint(o, sigma)?))
    }

    pub fn score(&self, o: &ComplexImage, sigma: f64) -> Result<ComplexImage> {
        let post = self.posterior_weights(o, sigma)?;
        let inv_v = 1.0 / self.variance.component_variance(sigma);
        let mut out = vec![Complex64::new(0.0, 0.0); o.len()];
        for (atom, &p) in self.atoms.iter().zip(&post) {
            if p == 0.0 {
                continue;
            }
            for ((s, a), z) in out.iter_mut().zip(atom.as_slice()).zip(o.as_slice()) {
                *s += (a - z) * (p * inv_v);
            }
        }
        Ok(ComplexImage::from_vec_unchecked(o.height(), o.width(), out))
    }
}

/// Scores from an external endpoint. Keeps a pool of connections so that
/// concurrent callers each get their own; every connection carries one
/// request at a time.
#[derive(Debug)]
pub struct ExternalScore {
    endpoint: Endpoint,
    idle: Mutex<Vec<ScoreClient>>,
}

impl ExternalScore {
    /// Connects lazily on first use.
    pub fn new(endpoint: Endpoint) -> Self {
        Self {
            endpoint,
            idle: Mutex::new(Vec::new()),
        }
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    fn with_client<T>(&self, f: impl FnOnce(&mut ScoreClient) -> Result<T>) -> Result<T> {
        let pooled = self.idle.lock().unwrap_or_else(|e| e.into_inner()).pop();
        let mut client = match pooled {
            Some(c) => c,
            None => ScoreClient::connect(&self.endpoint)?,
        };
        let out = f(&mut client);
        // a connection that failed may be mid-frame, so it is dropped
        if out.is_ok() {
            self.idle.lock().unwrap_or_else(|e| e.into_inner()).push(client);
        }
        out
    }
}

#[derive(Debug)]
pub enum ScoreProvider {
    Zero,
    DiscreteReal(RealMixture),
    DiscreteComplex(ComplexMixture),
    External(ExternalScore),
}

impl ScoreProvider {
    pub fn discrete_real(atoms: Vec<RealImage>, weights: &[f64]) -> Result<Self> {
        RealMixture::new(atoms, weights).map(Self::DiscreteReal)
    }

    pub fn discrete_complex(atoms: Vec<ComplexImage>, weights: &[f64]) -> Result<Self> {
        ComplexMixture::new(atoms, weights, ComplexVariance::Quarter).map(Self::DiscreteComplex)
    }

    pub fn external(endpoint: Endpoint) -> Self {
        Self::External(ExternalScore::new(endpoint))
    }

    /// `∇ log p_σ(x̃)` for a real image smoothed at level `sigma`.
    pub fn score_real(&self, x: &RealImage, sigma: f64) -> Result<RealImage> {
        match self {
            Self::Zero => {
                check_sigma(sigma)?;
                Ok(RealImage::zeros(x.height(), x.width()))
            }
            Self::DiscreteReal(m) => m.score(x, sigma),
            Self::DiscreteComplex(_) => Err(Error::Domain(
                "complex mixture prior cannot score a real image".into(),
            )),
            Self::External(ext) => {
                check_sigma(sigma)?;
                ext.with_client(|c| c.score_real(x, sigma))
            }
        }
    }

    /// `(∂_Re + j∂_Im) log p_σ(õ)` for a complex image smoothed at `sigma`.
    pub fn score_complex(&self, o: &ComplexImage, sigma: f64) -> Result<ComplexImage> {
        match self {
            Self::Zero => {
                check_sigma(sigma)?;
                Ok(ComplexImage::zeros(o.height(), o.width()))
            }
            Self::DiscreteComplex(m) => m.score(o, sigma),
            Self::DiscreteReal(_) => Err(Error::Domain(
                "real mixture prior cannot score a complex image".into(),
            )),
            Self::External(ext) => {
                check_sigma(sigma)?;
                ext.with_client(|c| c.score_complex(o, sigma))
            }
        }
    }
}

/// Denoiser regression target for the real branch: `(x − x')/(σ²x)`.
pub fn train_target_real(x: &RealImage, x_noisy: &RealImage, sigma: f64) -> Result<RealImage> {
    check_sigma(sigma)?;
    x_noisy.ensure_same_dims(x.dims())?;
    if let Some(i) = x.as_slice().iter().position(|&v| v <= 0.0) {
        return Err(Error::Domain(format!("clean pixel {i} is not positive")));
    }
    let s2 = sigma * sigma;
    let data = x
        .as_slice()
        .iter()
        .zip(x_noisy.as_slice())
        .map(|(&a, &b)| (a - b) / (s2 * a))
        .collect();
    Ok(RealImage::from_vec_unchecked(x.height(), x.width(), data))
}

/// Denoiser regression target for the complex branch: `(o − o')/σ²`.
pub fn train_target_complex(
    o: &ComplexImage,
    o_noisy: &ComplexImage,
    sigma: f64,
) -> Result<ComplexImage> {
    check_sigma(sigma)?;
    o_noisy.ensure_same_dims(o.dims())?;
    let inv = 1.0 / (sigma * sigma);
    let data = o
        .as_slice()
        .iter()
        .zip(o_noisy.as_slice())
        .map(|(a, b)| (a - b) * inv)
        .collect();
    Ok(ComplexImage::from_vec_unchecked(o.height(), o.width(), data))
}
