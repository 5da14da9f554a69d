//! Fienup hybrid input-output phase retrieval and alignment over the trivial
//! ambiguities of Fourier phase retrieval.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::fft2_inplace;
use crate::image::{ComplexImage, RealImage};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HioConfig {
    pub beta: f64,
    pub iters: usize,
    pub restarts: usize,
    /// Treat the object as real and non-negative.
    pub real_nonneg: bool,
}

impl Default for HioConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            iters: 600,
            restarts: 50,
            real_nonneg: false,
        }
    }
}

impl HioConfig {
    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("HIO beta must be in (0, 1], got {}", self.beta)));
        }
        if self.iters == 0 || self.restarts == 0 {
            return Err(Error::Config("HIO iters and restarts must be positive".into()));
        }
        Ok(())
    }
}

/// Binary object-domain support on the measurement grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    height: usize,
    width: usize,
    mask: Vec<bool>,
}

impl Support {
    pub fn new(height: usize, width: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != height * width {
            return Err(Error::Domain(format!(
                "support mask has {} entries for a {height}x{width} grid",
                mask.len()
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::Domain("support is empty".into()));
        }
        Ok(Self { height, width, mask })
    }

    /// The `box_h × box_w` block in the top-left corner of the grid, which is
    /// where a zero-padded object sits.
    pub fn top_left(height: usize, width: usize, box_h: usize, box_w: usize) -> Result<Self> {
        if box_h > height || box_w > width {
            return Err(Error::Domain(format!(
                "support box {box_h}x{box_w} larger than grid {height}x{width}"
            )));
        }
        let mask = (0..height * width)
            .map(|i| i / width < box_h && i % width < box_w)
            .collect();
        Self::new(height, width, mask)
    }

    /// Pixels with value above one half.
    pub fn from_image(img: &RealImage) -> Result<Self> {
        Self::new(
            img.height(),
            img.width(),
            img.as_slice().iter().map(|&v| v > 0.5).collect(),
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HioResult {
    /// Best candidate on the full measurement grid, zero outside the support.
    pub best: ComplexImage,
    /// `‖√y − |ℱx̂|‖₂ / ‖√y‖₂` of the best candidate.
    pub residual: f64,
    /// Residual of every restart, in restart order.
    pub restart_residuals: Vec<f64>,
}

/// Replaces the modulus of every spectral coefficient by `magnitudes`,
/// keeping its phase. Coefficients with zero modulus take phase zero.
pub fn project_magnitude(spectrum: &mut [Complex64], magnitudes: &[f64]) {
    for (s, &m) in spectrum.iter_mut().zip(magnitudes) {
        let a = s.norm();
        *s = if a > 0.0 { *s * (m / a) } else { Complex64::new(m, 0.0) };
    }
}

fn relative_residual(x: &[Complex64], magnitudes: &[f64], dims: (usize, usize)) -> f64 {
    let norm: f64 = magnitudes.iter().map(|m| m * m).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let mut spec = x.to_vec();
    fft2_inplace(&mut spec, dims.0, dims.1, false);
    let err: f64 = spec
        .iter()
        .zip(magnitudes)
        .map(|(s, m)| (s.norm() - m).powi(2))
        .sum();
    err.sqrt() / norm
}

fn object_constraint_ok(v: Complex64, real_nonneg: bool) -> bool {
    !real_nonneg || v.re >= 0.0
}

/// Projects onto the object constraints: zero outside the support and, when
/// requested, real non-negative inside.
fn constrain(x: &[Complex64], support: &[bool], real_nonneg: bool) -> Vec<Complex64> {
    x.iter()
        .zip(support)
        .map(|(&v, &s)| match (s, real_nonneg) {
            (false, _) => Complex64::new(0.0, 0.0),
            (true, true) => Complex64::new(v.re.max(0.0), 0.0),
            (true, false) => v,
        })
        .collect()
}

fn single_restart(
    magnitudes: &[f64],
    support: &Support,
    cfg: &HioConfig,
    rng: &mut RngStream,
) -> (Vec<Complex64>, f64) {
    let dims = support.dims();
    let mut spec: Vec<Complex64> = magnitudes
        .iter()
        .map(|&m| Complex64::from_polar(m, TAU * rng.uniform()))
        .collect();
    fft2_inplace(&mut spec, dims.0, dims.1, true);
    let mut x = spec;
    if cfg.real_nonneg {
        x.iter_mut().for_each(|v| v.im = 0.0);
    }
    let mut candidate = x.clone();
    for _ in 0..cfg.iters {
        candidate.copy_from_slice(&x);
        fft2_inplace(&mut candidate, dims.0, dims.1, false);
        project_magnitude(&mut candidate, magnitudes);
        fft2_inplace(&mut candidate, dims.0, dims.1, true);
        if cfg.real_nonneg {
            candidate.iter_mut().for_each(|v| v.im = 0.0);
        }
        for ((xv, &cv), &inside) in x.iter_mut().zip(&candidate).zip(support.mask()) {
            *xv = if inside && object_constraint_ok(cv, cfg.real_nonneg) {
                cv
            } else {
                *xv - cv * cfg.beta
            };
        }
    }
    let out = constrain(&candidate, support.mask(), cfg.real_nonneg);
    let residual = relative_residual(&out, magnitudes, dims);
    (out, residual)
}

/// Runs `cfg.restarts` independent HIO reconstructions from random Fourier
/// phases and returns the one that best matches the measured magnitudes.
///
/// `magnitudes` are `√y` on the oversampled grid. Restart `r` draws from
/// stream `r` of a seed taken from `rng`, so results do not depend on the
/// number of worker threads.
pub fn hio_solve(
    magnitudes: &RealImage,
    support: &Support,
    cfg: &HioConfig,
    rng: &mut RngStream,
) -> Result<HioResult> {
    cfg.validate()?;
    magnitudes.ensure_same_dims(support.dims())?;
    if let Some(i) = magnitudes.as_slice().iter().position(|&m| m < 0.0) {
        return Err(Error::Domain(format!("negative magnitude at index {i}")));
    }
    let (h, w) = support.dims();
    if magnitudes.as_slice().iter().all(|&m| m == 0.0) {
        return Ok(HioResult {
            best: ComplexImage::zeros(h, w),
            residual: 0.0,
            restart_residuals: vec![0.0; cfg.restarts],
        });
    }
    let base_seed = rng.next_u64();
    let runs: Vec<(Vec<Complex64>, f64)> = (0..cfg.restarts as u64)
        .into_par_iter()
        .map(|r| {
            let mut stream = RngStream::new(base_seed, r);
            single_restart(magnitudes.as_slice(), support, cfg, &mut stream)
        })
        .collect();
    let restart_residuals: Vec<f64> = runs.iter().map(|(_, r)| *r).collect();
    let best_idx = restart_residuals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let (best, residual) = runs.into_iter().nth(best_idx).expect("index in range");
    Ok(HioResult {
        best: ComplexImage::from_vec_unchecked(h, w, best),
        residual,
        restart_residuals,
    })
}

/// Normalized correlation `|⟨a, b⟩| / (‖a‖‖b‖)`, zero if either is zero.
pub fn correlation(a: &ComplexImage, b: &ComplexImage) -> Result<f64> {
    b.ensure_same_dims(a.dims())?;
    let denom = (a.norm_sqr() * b.norm_sqr()).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(a.inner(b).norm() / denom)
}

/// `out[n] = img[n − shift]` with wrap-around.
pub fn cyclic_shift(img: &ComplexImage, dy: usize, dx: usize) -> ComplexImage {
    let (h, w) = img.dims();
    ComplexImage::from_fn(h, w, |r, c| img.get((r + h - dy % h) % h, (c + w - dx % w) % w))
}

/// `out[n] = conj(img[−n])` with wrap-around.
pub fn conjugate_flip(img: &ComplexImage) -> ComplexImage {
    let (h, w) = img.dims();
    ComplexImage::from_fn(h, w, |r, c| img.get((h - r) % h, (w - c) % w).conj())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub image: ComplexImage,
    pub correlation: f64,
    pub shift: (usize, usize),
    pub flipped: bool,
    /// Global phase applied after the shift and flip.
    pub phase: f64,
}

/// Best shift over all cyclic shifts of `candidate` against `reference`:
/// returns `(|⟨shift(c), r⟩|, shift)`.
fn best_shift(candidate: &ComplexImage, reference: &ComplexImage) -> (f64, (usize, usize)) {
    let (h, w) = candidate.dims();
    let mut c = candidate.as_slice().to_vec();
    let mut r = reference.as_slice().to_vec();
    fft2_inplace(&mut c, h, w, false);
    fft2_inplace(&mut r, h, w, false);
    // Σ_n conj(c[n − s]) r[n] = √N · ℱ⁻¹[conj(C)·R][s]
    let mut cross: Vec<Complex64> = c.iter().zip(&r).map(|(a, b)| a.conj() * b).collect();
    fft2_inplace(&mut cross, h, w, true);
    let scale = ((h * w) as f64).sqrt();
    let (idx, best) = cross
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.norm() * scale))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    (best, (idx / w, idx % w))
}

/// Searches all cyclic shifts, with and without conjugate flip, plus the
/// global phase, for the transform of `candidate` closest to `reference`.
pub fn align_ambiguities(candidate: &ComplexImage, reference: &ComplexImage) -> Result<Alignment> {
    reference.ensure_same_dims(candidate.dims())?;
    let flipped_img = conjugate_flip(candidate);
    let (plain, plain_shift) = best_shift(candidate, reference);
    let (flip, flip_shift) = best_shift(&flipped_img, reference);
    let (source, shift, flipped) = if flip > plain {
        (&flipped_img, flip_shift, true)
    } else {
        (candidate, plain_shift, false)
    };
    let shifted = cyclic_shift(source, shift.0, shift.1);
    let inner = shifted.inner(reference);
    let phase = inner.arg();
    let image = shifted.scale(Complex64::from_polar(1.0, phase));
    let correlation = correlation(&image, reference)?;
    Ok(Alignment {
        image,
        correlation,
        shift,
        flipped,
        phase,
    })
}
