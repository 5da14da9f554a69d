//! Closed-form annealed likelihood scores.
//!
//! With `s² = σ_0² − σ_t²` the remaining measurement-noise variance at level
//! `t`, the real-valued Poisson branch scores the Gaussian relaxation
//! `y ~ N(x̃, s²·x̃)`:
//!
//! ```text
//! ∇ log p(y|x̃) = (y²/x̃² − 1)/(2s²) − 1/(2x̃)
//! ```
//!
//! and the complex branch scores the Rician-type relaxation of `y = |õ|² + …`:
//!
//! ```text
//! ∇ log p(y|õ) = õ/(2s²) · [ I₁(z)/I₀(z) · √y/|õ| − 1 ],   z = |õ|√y/s²
//! ```
//!
//! The complex score is the conjugate Wirtinger derivative `∂/∂õ*` of
//! `L(õ) = −(y + |õ|²)/(2s²) + ln I₀(z)`, i.e. half of `∂L/∂Re + j·∂L/∂Im`.
//! That factor ½ is absorbed by the sampler's step size.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::image::{ComplexImage, RealImage};
use crate::measurement::MeasurementStack;

/// Iterates of the real branch are clamped to this floor before evaluating
/// the Poisson score (the score divides by `x̃²`).
pub const X_FLOOR: f64 = 1e-4;

/// Below this argument the Bessel functions use their power series; above it
/// the Hankel asymptotic expansion.
const BESSEL_SERIES_LIMIT: f64 = 30.0;

fn check_domain(z: f64) -> Result<()> {
    if !(z >= 0.0) || z.is_infinite() {
        return Err(Error::Domain(format!(
            "Bessel argument must be finite and non-negative, got {z}"
        )));
    }
    Ok(())
}

/// Power series of `I_0` and `I_1`, both multiplied by `e^{−z}`.
fn scaled_series(z: f64) -> (f64, f64) {
    let q = 0.25 * z * z;
    let scale = (-z).exp();
    // I0 = Σ q^k/(k!)², I1 = (z/2) Σ q^k/(k!(k+1)!)
    let mut t0 = scale;
    let mut t1 = 0.5 * z * scale;
    let (mut s0, mut s1) = (t0, t1);
    let mut k = 1.0;
    while t0 > s0 * 1e-18 || t1 > s1 * 1e-18 {
        t0 *= q / (k * k);
        t1 *= q / (k * (k + 1.0));
        s0 += t0;
        s1 += t1;
        k += 1.0;
        if k > 500.0 {
            break;
        }
    }
    (s0, s1)
}

/// The series part of the Hankel expansion
/// `e^{−z} I_ν(z) ≈ (2πz)^{−1/2} Σ_k (−1)^k a_k(ν) z^{−k}`.
fn hankel_sum(z: f64, nu: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn scaled_pair(z: f64) -> (f64, f64) {
    if z < BESSEL_SERIES_LIMIT {
        scaled_series(z)
    } else {
        let norm = (2.0 * std::f64::consts::PI * z).sqrt();
        (hankel_sum(z, 0.0) / norm, hankel_sum(z, 1.0) / norm)
    }
}

fn ratio_unchecked(z: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else if z < BESSEL_SERIES_LIMIT {
        let (i0, i1) = scaled_series(z);
        i1 / i0
    } else {
        hankel_sum(z, 1.0) / hankel_sum(z, 0.0)
    }
}

/// Exponentially scaled modified Bessel function `e^{−z} I_0(z)`.
pub fn bessel_i0e(z: f64) -> Result<f64> {
    check_domain(z)?;
    Ok(scaled_pair(z).0)
}

/// Exponentially scaled modified Bessel function `e^{−z} I_1(z)`.
pub fn bessel_i1e(z: f64) -> Result<f64> {
    check_domain(z)?;
    Ok(scaled_pair(z).1)
}

/// `I_1(z)/I_0(z)`, evaluated without forming the unscaled functions.
pub fn bessel_ratio(z: f64) -> Result<f64> {
    check_domain(z)?;
    Ok(ratio_unchecked(z))
}

pub(crate) fn remaining_variance(sigma0: f64, sigma_t: f64) -> Result<f64> {
    if !(sigma_t < sigma0) || !(sigma_t > 0.0) {
        return Err(Error::AnnealingOrder { sigma0, sigma_t });
    }
    Ok(sigma0 * sigma0 - sigma_t * sigma_t)
}

/// Poisson score for one pixel with `s2 = σ_0² − σ_t²`; `x` must be positive.
pub fn poisson_score_scalar(y: f64, x: f64, s2: f64) -> f64 {
    (y * y / (x * x) - 1.0) / (2.0 * s2) - 0.5 / x
}

/// Backward-Euler step of the Poisson score for one pixel: the largest real
/// root of `x − α·score(y, x) = b`. Multiplying through by `x²` gives the
/// cubic `x³ + (α/(2s²) − b)x² + (α/2)x − αy²/(2s²)`. The explicit step is
/// unstable near `x = 0`, where the score grows like `1/x²`.
pub fn poisson_implicit_step(y: f64, b: f64, alpha: f64, s2: f64) -> f64 {
    let c2 = alpha / (2.0 * s2) - b;
    let c1 = alpha / 2.0;
    let c0 = -alpha * y * y / (2.0 * s2);
    let cubic = |x: f64| ((x + c2) * x + c1) * x + c0;
    let bound = 1.0 + c2.abs().max(c1.abs()).max(c0.abs());
    // P is increasing on each bracket below, which holds exactly one root
    let disc = c2 * c2 - 3.0 * c1;
    let (lo, hi) = if disc <= 0.0 {
        (-bound, bound)
    } else {
        let root = disc.sqrt();
        let (left, right) = ((-c2 - root) / 3.0, (-c2 + root) / 3.0);
        if cubic(right) <= 0.0 {
            (right, bound)
        } else {
            (-bound, left)
        }
    };
    increasing_root(cubic, |x| (3.0 * x + 2.0 * c2) * x + c1, lo, hi)
}

/// Root of an increasing function on `[lo, hi]`; Newton steps that leave
/// the bracket fall back to bisection.
fn increasing_root(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = hi;
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / df(x);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if next == x || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// Element-wise annealed Poisson likelihood score. Also returns how many
/// pixels of `x_tilde` were raised to [`X_FLOOR`].
pub fn poisson_score_with_clamp_count(
    y: &RealImage,
    x_tilde: &RealImage,
    sigma0: f64,
    sigma_t: f64,
) -> Result<(RealImage, usize)> {
    let s2 = remaining_variance(sigma0, sigma_t)?;
    y.ensure_same_dims(x_tilde.dims())?;
    let mut clamped = 0;
    let data = y
        .as_slice()
        .iter()
        .zip(x_tilde.as_slice())
        .map(|(&yv, &xv)| {
            let x = if xv < X_FLOOR {
                clamped += 1;
                X_FLOOR
            } else {
                xv
            };
            poisson_score_scalar(yv, x, s2)
        })
        .collect();
    Ok((
        RealImage::from_vec_unchecked(y.height(), y.width(), data),
        clamped,
    ))
}

/// Element-wise annealed Poisson likelihood score `∇_x̃ log p(y|x̃)`.
pub fn poisson_score(
    y: &RealImage,
    x_tilde: &RealImage,
    sigma0: f64,
    sigma_t: f64,
) -> Result<RealImage> {
    poisson_score_with_clamp_count(y, x_tilde, sigma0, sigma_t).map(|(s, _)| s)
}

/// Complex score for one pixel with `s2 = σ_0² − σ_t²`. Zero at `o = 0`.
pub fn complex_score_scalar(y: f64, o: Complex64, s2: f64) -> Complex64 {
    let amp = o.norm();
    if amp == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let sy = y.sqrt();
    let z = amp * sy / s2;
    o * ((ratio_unchecked(z) * sy / amp - 1.0) / (2.0 * s2))
}

fn check_non_negative(y: &RealImage) -> Result<()> {
    if let Some(i) = y.as_slice().iter().position(|&v| v < 0.0) {
        return Err(Error::Domain(format!(
            "negative intensity {} at index {i}",
            y.as_slice()[i]
        )));
    }
    Ok(())
}

fn elementwise_complex(y: &RealImage, o: &ComplexImage, s2: f64) -> ComplexImage {
    let data = y
        .as_slice()
        .iter()
        .zip(o.as_slice())
        .map(|(&yv, &ov)| complex_score_scalar(yv, ov, s2))
        .collect();
    ComplexImage::from_vec_unchecked(o.height(), o.width(), data)
}

/// Complex-valued likelihood score for `H = I`.
pub fn complex_score_identity(
    y: &RealImage,
    o_tilde: &ComplexImage,
    sigma0: f64,
    sigma_t: f64,
) -> Result<ComplexImage> {
    let s2 = remaining_variance(sigma0, sigma_t)?;
    y.ensure_same_dims(o_tilde.dims())?;
    check_non_negative(y)?;
    Ok(elementwise_complex(y, o_tilde, s2))
}

/// Complex-valued likelihood score through a general forward model: the
/// element-wise score of each field `u_m = H_m õ` against `y_m`, pulled back
/// with `H^H`. Every measurement pixel uses the same `s² = σ_0² − σ_t²`.
pub fn complex_score_general(
    stack: &MeasurementStack,
    o_tilde: &ComplexImage,
    model: &ForwardModel,
    sigma0: f64,
    sigma_t: f64,
) -> Result<ComplexImage> {
    let s2 = remaining_variance(sigma0, sigma_t)?;
    if stack.m() != model.measurement_count() {
        return Err(Error::DimMismatch {
            expected: format!("{} measurements", model.measurement_count()),
            got: format!("{} measurements", stack.m()),
        });
    }
    let md = model.measurement_dims(o_tilde.dims());
    if stack.dims() != md {
        return Err(Error::dims(md, stack.dims()));
    }
    for y in stack.images() {
        check_non_negative(y)?;
    }
    if let ForwardModel::Identity = model {
        return Ok(elementwise_complex(&stack.images()[0], o_tilde, s2));
    }
    let fields = model.apply(o_tilde)?;
    let grads: Vec<ComplexImage> = fields
        .iter()
        .zip(stack.images())
        .map(|(u, y)| elementwise_complex(y, u, s2))
        .collect();
    model.adjoint(&grads)
}
