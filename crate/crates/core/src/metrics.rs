//! Image quality metrics: PSNR, SSIM, and a phase PSNR that ignores the
//! global phase offset.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{ComplexImage, RealImage};

/// Reported in place of `+∞` when the error is exactly zero, and the upper
/// bound of every PSNR value.
pub const PSNR_CAP: f64 = 200.0;

const PHASE_GRID: usize = 720;
const GOLDEN_TOL: f64 = 1e-6;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn capped_psnr(peak_sq: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (peak_sq / mse).log10()).min(PSNR_CAP)
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// `10·log10(peak²/MSE)` in dB.
pub fn psnr(est: &RealImage, truth: &RealImage, peak: f64) -> Result<f64> {
    est.ensure_same_dims(truth.dims())?;
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::Domain(format!("peak must be positive, got {peak}")));
    }
    Ok(capped_psnr(peak * peak, mse(est.as_slice(), truth.as_slice())))
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

fn offset_mse(d: &[f64], theta: f64) -> f64 {
    d.iter().map(|&v| wrap_phase(v - theta).powi(2)).sum::<f64>() / d.len() as f64
}

/// `min_θ mean(wrap(d − θ)²)` over the wrapped differences `d`.
///
/// A uniform grid brackets the global minimum, golden-section search
/// narrows it, and the final offset is the mean of the differences unwrapped
/// around that point, which is the exact minimizer of the local quadratic.
pub fn min_offset_mse(d: &[f64]) -> f64 {
    let step = TAU / PHASE_GRID as f64;
    let (best_k, _) = (0..PHASE_GRID)
        .map(|k| (k, offset_mse(d, -PI + step * k as f64)))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let center = -PI + step * best_k as f64;
    let (mut lo, mut hi) = (center - step, center + step);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (offset_mse(d, a), offset_mse(d, b));
    while hi - lo > GOLDEN_TOL {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = offset_mse(d, a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = offset_mse(d, b);
        }
    }
    let theta = 0.5 * (lo + hi);
    let polished =
        theta + d.iter().map(|&v| wrap_phase(v - theta)).sum::<f64>() / d.len() as f64;
    offset_mse(d, theta).min(offset_mse(d, polished))
}

/// Phase PSNR `10·log10((2π)²/MSE)` with the MSE minimized over a global
/// phase offset and per-pixel differences wrapped to `(−π, π]`.
pub fn phase_psnr(est_phase: &RealImage, truth_phase: &RealImage) -> Result<f64> {
    est_phase.ensure_same_dims(truth_phase.dims())?;
    let d: Vec<f64> = truth_phase
        .as_slice()
        .iter()
        .zip(est_phase.as_slice())
        .map(|(t, e)| wrap_phase(t - e))
        .collect();
    Ok(capped_psnr(TAU * TAU, min_offset_mse(&d)))
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let mut w: Vec<f64> = g.iter().flat_map(|a| g.iter().map(move |b| a * b)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Single-scale SSIM with an 11×11 Gaussian window (σ = 1.5), dynamic range
/// 1, averaged over every window position that fits inside the image.
pub fn ssim(est: &RealImage, truth: &RealImage) -> Result<f64> {
    est.ensure_same_dims(truth.dims())?;
    let (h, w) = est.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Domain(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let win = gaussian_window();
    let (x, y) = (est.as_slice(), truth.as_slice());
    let mut total = 0.0;
    let mut count = 0usize;
    for r0 in 0..=h - SSIM_WINDOW {
        for c0 in 0..=w - SSIM_WINDOW {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let wt = win[i * SSIM_WINDOW + j];
                    let p = (r0 + i) * w + c0 + j;
                    mx += wt * x[p];
                    my += wt * y[p];
                    sxx += wt * x[p] * x[p];
                    syy += wt * y[p] * y[p];
                    sxy += wt * x[p] * y[p];
                }
            }
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cov = sxy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Metrics printed by the command-line front end.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub psnr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_psnr: Option<f64>,
    pub fid: &'static str,
}

const FID_NOTE: &str = "n/a (out of scope)";

/// PSNR and, when the image is large enough, SSIM.
pub fn report_real(est: &RealImage, truth: &RealImage, peak: f64) -> Result<MetricsReport> {
    let psnr = psnr(est, truth, peak)?;
    let ssim = ssim(est, truth).ok();
    Ok(MetricsReport {
        psnr,
        ssim,
        phase_psnr: None,
        fid: FID_NOTE,
    })
}

/// Amplitude PSNR/SSIM plus the offset-invariant phase PSNR.
pub fn report_complex(est: &ComplexImage, truth: &ComplexImage, peak: f64) -> Result<MetricsReport> {
    est.ensure_same_dims(truth.dims())?;
    let mut report = report_real(&est.amplitude(), &truth.amplitude(), peak)?;
    report.phase_psnr = Some(phase_psnr(&est.phase(), &truth.phase())?);
    Ok(report)
}
