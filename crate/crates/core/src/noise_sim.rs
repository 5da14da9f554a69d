//! Measurement synthesis: exact Poisson photon counts, gray-level
//! quantization, and normalization by the full well capacity.

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::image::{ComplexImage, RealImage};
use crate::measurement::{normalize, MeasurementStack, NoiseParams};
use crate::rng::RngStream;

/// Means at or above this use the PTRS rejection sampler.
const PTRS_THRESHOLD: f64 = 30.0;

/// Expected intensities may overshoot 1 by FFT round-off before they count
/// as saturated.
const SATURATION_SLACK: f64 = 1e-12;

/// `ln(k!)`, exact summation for small k and a Stirling series beyond.
pub(crate) fn ln_factorial(k: u64) -> f64 {
    if k < 20 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    let x = k as f64;
    let x2 = x * x;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x * x2 * x2)
}

fn poisson_inversion(lambda: f64, rng: &mut RngStream) -> u64 {
    let u = rng.uniform();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    // the tail beyond 400 has probability far below 2^-53 for lambda < 30
    while u >= cdf && k < 400 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

/// Hörmann's transformed rejection with squeeze (PTRS).
fn poisson_ptrs(lambda: f64, rng: &mut RngStream) -> u64 {
    let slam = lambda.sqrt();
    let log_lam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * log_lam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// One exact Poisson draw with mean `lambda ≥ 0`.
pub fn poisson_draw(lambda: f64, rng: &mut RngStream) -> u64 {
    if lambda == 0.0 {
        0
    } else if lambda < PTRS_THRESHOLD {
        poisson_inversion(lambda, rng)
    } else {
        poisson_ptrs(lambda, rng)
    }
}

/// Independent Poisson counts per pixel, `y ~ Poisson(λ)`.
pub fn poisson_sample(lambda_grid: &RealImage, rng: &mut RngStream) -> Result<RealImage> {
    if let Some(i) = lambda_grid.as_slice().iter().position(|&l| l < 0.0) {
        return Err(Error::Domain(format!("negative Poisson mean at index {i}")));
    }
    let data = lambda_grid
        .as_slice()
        .iter()
        .map(|&l| poisson_draw(l, rng) as f64)
        .collect();
    Ok(RealImage::from_vec_unchecked(
        lambda_grid.height(),
        lambda_grid.width(),
        data,
    ))
}

/// Rounds electron counts to the nearest of `2^bits` levels spanning
/// `[0, fwc]`; counts above the well saturate at the top level.
pub fn quantize(counts: &RealImage, fwc: f64, bits: u32) -> RealImage {
    if bits == 0 {
        return counts.clone();
    }
    let top = ((1u64 << bits) - 1) as f64;
    let step = fwc / top;
    counts.map(|c| (c / step).round().clamp(0.0, top) * step)
}

/// Poisson counts of `clean·fwc`, quantized and normalized back to `[0, 1]`
/// units.
pub fn simulate_measurement(
    clean: &RealImage,
    noise: &NoiseParams,
    rng: &mut RngStream,
) -> Result<RealImage> {
    if let Some(i) = clean
        .as_slice()
        .iter()
        .position(|&v| !(0.0..=1.0).contains(&v))
    {
        return Err(Error::Domain(format!(
            "clean intensity {} at index {i} outside [0, 1]",
            clean.as_slice()[i]
        )));
    }
    let fwc = noise.fwc();
    let expected = clean.map(|v| v * fwc);
    let counts = poisson_sample(&expected, rng)?;
    let counts = quantize(&counts, fwc, noise.quant_bits());
    normalize(&counts, noise)
}

/// `y_m = 𝒩(ρ|H_m o|²)` for every measurement channel of the model.
pub fn simulate_intensity_measurements(
    object: &ComplexImage,
    model: &ForwardModel,
    noise: &NoiseParams,
    rng: &mut RngStream,
) -> Result<MeasurementStack> {
    let intensities = model.intensity(object)?;
    let mut images = Vec::with_capacity(intensities.len());
    for clean in intensities {
        let peak = clean.max();
        if peak > 1.0 + SATURATION_SLACK {
            return Err(Error::Saturation { value: peak });
        }
        let clean = clean.map(|v| v.min(1.0));
        images.push(simulate_measurement(&clean, noise, rng)?);
    }
    MeasurementStack::new(images, *noise, model.rho())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(lambda: f64, n: usize, seed: u64) -> Vec<u64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| poisson_draw(lambda, &mut rng)).collect()
    }

    fn moments(xs: &[u64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
        let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    fn pmf(lambda: f64, k: u64) -> f64 {
        (-lambda + k as f64 * lambda.ln() - ln_factorial(k)).exp()
    }

    #[test]
    fn ln_factorial_matches_direct_sum() {
        for k in [0u64, 1, 5, 19, 20, 21, 50, 170, 1000] {
            let direct: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
            assert!((ln_factorial(k) - direct).abs() < 1e-10 * direct.max(1.0), "k = {k}");
        }
    }

    #[test]
    fn zero_mean_is_degenerate() {
        let lam = RealImage::zeros(4, 4);
        let out = poisson_sample(&lam, &mut RngStream::new(1, 0)).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_mean_rejected() {
        let lam = RealImage::new(1, 2, vec![1.0, -0.5]).unwrap();
        assert!(matches!(
            poisson_sample(&lam, &mut RngStream::new(1, 0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn large_mean_moments() {
        let xs = draws(10_000.0, 1_000_000, 11);
        let (mean, var) = moments(&xs);
        assert!((mean - 10_000.0).abs() < 0.3, "mean {mean}");
        let ratio = var / mean;
        assert!((0.99..=1.01).contains(&ratio), "var/mean {ratio}");
    }

    #[test]
    fn p_zero_at_half() {
        let n = 1_000_000;
        let xs = draws(0.5, n, 12);
        let p0 = xs.iter().filter(|&&x| x == 0).count() as f64 / n as f64;
        let exact = (-0.5f64).exp();
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((p0 - exact).abs() < 3.0 * se, "{p0} vs {exact}");
    }

    #[test]
    fn tv_distance_small_means() {
        for &lambda in &[0.5, 3.0, 10.0, 29.5, 30.0] {
            let n = 1_000_000;
            let xs = draws(lambda, n, 13);
            let kmax = 200u64;
            let mut hist = vec![0usize; kmax as usize + 1];
            for &x in &xs {
                hist[x.min(kmax) as usize] += 1;
            }
            let tv: f64 = (0..=kmax)
                .map(|k| (hist[k as usize] as f64 / n as f64 - pmf(lambda, k)).abs())
                .sum::<f64>()
                * 0.5;
            assert!(tv < 0.005, "lambda {lambda}: tv {tv}");
        }
    }

    #[test]
    fn quantizer_grid() {
        let noise = NoiseParams::new(10_000.0, 8).unwrap();
        let clean = RealImage::from_fn(32, 32, |r, c| ((r * 32 + c) as f64 / 1023.0).min(1.0));
        let y = simulate_measurement(&clean, &noise, &mut RngStream::new(5, 0)).unwrap();
        for &v in y.as_slice() {
            let k = v * 255.0;
            assert!((k - k.round()).abs() < 1e-9, "{v} not on the 8-bit grid");
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn measurement_variance_matches_gaussian_approximation() {
        let noise = NoiseParams::new(10_000.0, 0).unwrap();
        let clean = RealImage::filled(100, 1000, 0.5);
        let y = simulate_measurement(&clean, &noise, &mut RngStream::new(6, 0)).unwrap();
        let n = y.len() as f64;
        let mean = y.as_slice().iter().map(|v| v - 0.5).sum::<f64>() / n;
        let std = (y
            .as_slice()
            .iter()
            .map(|v| (v - 0.5 - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt();
        let expected = 0.01 * 0.5f64.sqrt();
        assert!((std / expected - 1.0).abs() < 0.05, "std {std} vs {expected}");
    }

    #[test]
    fn clean_outside_unit_interval() {
        let noise = NoiseParams::new(100.0, 0).unwrap();
        let bad = RealImage::new(1, 2, vec![0.5, 1.2]).unwrap();
        assert!(simulate_measurement(&bad, &noise, &mut RngStream::new(1, 0)).is_err());
        let zero = RealImage::zeros(3, 3);
        let y = simulate_measurement(&zero, &noise, &mut RngStream::new(1, 0)).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn std_shrinks_with_well_capacity() {
        let clean = RealImage::filled(50, 50, 0.3);
        let mut prev = f64::INFINITY;
        for fwc in [1e2, 1e4, 1e6] {
            let noise = NoiseParams::new(fwc, 0).unwrap();
            let y = simulate_measurement(&clean, &noise, &mut RngStream::new(9, 0)).unwrap();
            let rms = (y.as_slice().iter().map(|v| (v - 0.3).powi(2)).sum::<f64>()
                / y.len() as f64)
                .sqrt();
            let expected = (0.3 / fwc).sqrt();
            assert!((rms / expected - 1.0).abs() < 0.1, "fwc {fwc}: {rms} vs {expected}");
            assert!(rms < prev);
            prev = rms;
        }
    }
}
