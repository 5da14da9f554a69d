//! Optical forward models `H`: identity, oversampled Fourier magnitude, and
//! Fourier ptychography, with their exact adjoints.
//!
//! All transforms use the unitary DFT, so `‖ℱx‖₂ = ‖x‖₂` and the adjoint of
//! the forward transform is the inverse transform.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ComplexImage, RealImage};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unitary 2D DFT of a row-major `height × width` buffer.
pub(crate) fn fft2_inplace(data: &mut [Complex64], height: usize, width: usize, inverse: bool) {
    debug_assert_eq!(data.len(), height * width);
    let (row, col) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            (p.plan_fft_inverse(width), p.plan_fft_inverse(height))
        } else {
            (p.plan_fft_forward(width), p.plan_fft_forward(height))
        }
    });
    row.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for c in 0..width {
        for r in 0..height {
            column[r] = data[r * width + c];
        }
        col.process(&mut column);
        for r in 0..height {
            data[r * width + c] = column[r];
        }
    }
    let scale = 1.0 / ((height * width) as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Unitary forward 2D DFT.
pub fn fft2_unitary(img: &ComplexImage) -> ComplexImage {
    let mut out = img.clone();
    fft2_inplace(out.as_mut_slice(), img.height(), img.width(), false);
    out
}

/// Unitary inverse 2D DFT.
pub fn ifft2_unitary(img: &ComplexImage) -> ComplexImage {
    let mut out = img.clone();
    fft2_inplace(out.as_mut_slice(), img.height(), img.width(), true);
    out
}

/// Signed frequency of DFT bin `index` on an axis of length `n`.
pub fn signed_frequency(index: usize, n: usize) -> i64 {
    if index <= (n - 1) / 2 {
        index as i64
    } else {
        index as i64 - n as i64
    }
}

/// Binary disk pupil `P(k − k_m)` in unshifted DFT bin order.
#[derive(Debug, Clone, PartialEq)]
pub struct PupilMask {
    center_kx: i64,
    center_ky: i64,
    radius: f64,
    mask: RealImage,
}

impl PupilMask {
    /// Disk of `radius` bins around `(center_kx, center_ky)`; `kx` runs along
    /// columns, `ky` along rows.
    pub fn new(height: usize, width: usize, center_kx: i64, center_ky: i64, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Domain(format!("pupil radius must be positive, got {radius}")));
        }
        let r2 = radius * radius;
        let mask = RealImage::from_fn(height, width, |r, c| {
            let dy = (signed_frequency(r, height) - center_ky) as f64;
            let dx = (signed_frequency(c, width) - center_kx) as f64;
            if dx * dx + dy * dy <= r2 {
                1.0
            } else {
                0.0
            }
        });
        if mask.as_slice().iter().all(|&v| v == 0.0) {
            return Err(Error::Domain(format!(
                "pupil at ({center_kx}, {center_ky}) with radius {radius} covers no frequency bin"
            )));
        }
        Ok(Self {
            center_kx,
            center_ky,
            radius,
            mask,
        })
    }

    /// A pupil passing every frequency.
    pub fn all_pass(height: usize, width: usize) -> Self {
        let radius = (height * height + width * width) as f64;
        Self::new(height, width, 0, 0, radius).expect("all-pass pupil is non-empty")
    }

    pub fn center(&self) -> (i64, i64) {
        (self.center_kx, self.center_ky)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn mask(&self) -> &RealImage {
        &self.mask
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }
}

/// Serializable description of a forward model, used by the CLI manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ForwardSpec {
    Identity,
    FourierMagnitude {
        pad_factor: usize,
    },
    Ptychography {
        leds: usize,
        spacing: f64,
        radius: f64,
        rho: f64,
    },
}

impl ForwardSpec {
    pub fn build(&self, object_dims: (usize, usize)) -> Result<ForwardModel> {
        match *self {
            ForwardSpec::Identity => Ok(ForwardModel::Identity),
            ForwardSpec::FourierMagnitude { pad_factor } => ForwardModel::fourier_magnitude(pad_factor),
            ForwardSpec::Ptychography {
                leds,
                spacing,
                radius,
                rho,
            } => {
                let (h, w) = object_dims;
                let pupils = build_led_grid(leds, spacing)
                    .into_iter()
                    .map(|(kx, ky)| PupilMask::new(h, w, kx, ky, radius))
                    .collect::<Result<Vec<_>>>()?;
                ForwardModel::ptychography(pupils, rho)
            }
        }
    }
}

/// The linear map `H` between object and measurement fields.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardModel {
    Identity,
    /// Zero-pad by `pad_factor` per axis, then unitary DFT.
    FourierMagnitude { pad_factor: usize },
    /// `H_m o = √ρ ℱ⁻¹[P_m ⊙ ℱo]` for each pupil.
    Ptychography { pupils: Vec<PupilMask>, rho: f64 },
}

impl ForwardModel {
    pub fn fourier_magnitude(pad_factor: usize) -> Result<Self> {
        if pad_factor == 0 {
            return Err(Error::Domain("pad_factor must be at least 1".into()));
        }
        Ok(Self::FourierMagnitude { pad_factor })
    }

    pub fn ptychography(pupils: Vec<PupilMask>, rho: f64) -> Result<Self> {
        if pupils.is_empty() {
            return Err(Error::Domain("ptychography needs at least one pupil".into()));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Domain(format!("rho must be positive, got {rho}")));
        }
        let dims = pupils[0].dims();
        for p in &pupils[1..] {
            if p.dims() != dims {
                return Err(Error::dims(dims, p.dims()));
            }
        }
        Ok(Self::Ptychography { pupils, rho })
    }

    /// Number of measurement images `M`.
    pub fn measurement_count(&self) -> usize {
        match self {
            Self::Identity | Self::FourierMagnitude { .. } => 1,
            Self::Ptychography { pupils, .. } => pupils.len(),
        }
    }

    pub fn rho(&self) -> f64 {
        match self {
            Self::Ptychography { rho, .. } => *rho,
            _ => 1.0,
        }
    }

    /// Measurement grid size for an object of the given size.
    pub fn measurement_dims(&self, object_dims: (usize, usize)) -> (usize, usize) {
        match self {
            Self::FourierMagnitude { pad_factor } => {
                (object_dims.0 * pad_factor, object_dims.1 * pad_factor)
            }
            _ => object_dims,
        }
    }

    /// Object grid size implied by a measurement grid size.
    pub fn object_dims(&self, measurement_dims: (usize, usize)) -> Result<(usize, usize)> {
        match self {
            Self::FourierMagnitude { pad_factor } => {
                let (h, w) = measurement_dims;
                if h % pad_factor != 0 || w % pad_factor != 0 {
                    return Err(Error::Domain(format!(
                        "measurement grid {h}x{w} is not a multiple of pad factor {pad_factor}"
                    )));
                }
                Ok((h / pad_factor, w / pad_factor))
            }
            _ => Ok(measurement_dims),
        }
    }

    fn check_object(&self, dims: (usize, usize)) -> Result<()> {
        if let Self::Ptychography { pupils, .. } = self {
            if pupils[0].dims() != dims {
                return Err(Error::dims(pupils[0].dims(), dims));
            }
        }
        Ok(())
    }

    /// The measurement-domain fields `u_m = H_m o`.
    pub fn apply(&self, o: &ComplexImage) -> Result<Vec<ComplexImage>> {
        self.check_object(o.dims())?;
        match self {
            Self::Identity => Ok(vec![o.clone()]),
            Self::FourierMagnitude { pad_factor } => {
                let (h, w) = o.dims();
                let (ph, pw) = (h * pad_factor, w * pad_factor);
                let mut padded = ComplexImage::zeros(ph, pw);
                {
                    let dst = padded.as_mut_slice();
                    for r in 0..h {
                        dst[r * pw..r * pw + w].copy_from_slice(&o.as_slice()[r * w..(r + 1) * w]);
                    }
                }
                fft2_inplace(padded.as_mut_slice(), ph, pw, false);
                Ok(vec![padded])
            }
            Self::Ptychography { pupils, rho } => {
                let (h, w) = o.dims();
                let spectrum = fft2_unitary(o);
                let amp = rho.sqrt();
                Ok(pupils
                    .iter()
                    .map(|p| {
                        let mut field: Vec<Complex64> = spectrum
                            .as_slice()
                            .iter()
                            .zip(p.mask.as_slice())
                            .map(|(&s, &m)| s * (m * amp))
                            .collect();
                        fft2_inplace(&mut field, h, w, true);
                        ComplexImage::from_vec_unchecked(h, w, field)
                    })
                    .collect())
            }
        }
    }

    /// `H^H` applied to a stack of measurement-domain fields.
    pub fn adjoint(&self, fields: &[ComplexImage]) -> Result<ComplexImage> {
        let m = self.measurement_count();
        if fields.len() != m {
            return Err(Error::DimMismatch {
                expected: format!("{m} fields"),
                got: format!("{} fields", fields.len()),
            });
        }
        let dims = fields[0].dims();
        for f in &fields[1..] {
            f.ensure_same_dims(dims)?;
        }
        match self {
            Self::Identity => Ok(fields[0].clone()),
            Self::FourierMagnitude { pad_factor } => {
                let (h, w) = self.object_dims(dims)?;
                let (_, pw) = dims;
                let back = ifft2_unitary(&fields[0]);
                let src = back.as_slice();
                let mut data = Vec::with_capacity(h * w);
                for r in 0..h {
                    data.extend_from_slice(&src[r * pw..r * pw + w]);
                }
                debug_assert_eq!(pw, w * pad_factor);
                Ok(ComplexImage::from_vec_unchecked(h, w, data))
            }
            Self::Ptychography { pupils, rho } => {
                self.check_object(dims)?;
                let (h, w) = dims;
                let amp = rho.sqrt();
                let mut acc = vec![Complex64::new(0.0, 0.0); h * w];
                for (p, u) in pupils.iter().zip(fields) {
                    let spec = fft2_unitary(u);
                    for ((a, &s), &mk) in acc.iter_mut().zip(spec.as_slice()).zip(p.mask.as_slice()) {
                        *a += s * (mk * amp);
                    }
                }
                fft2_inplace(&mut acc, h, w, true);
                Ok(ComplexImage::from_vec_unchecked(h, w, acc))
            }
        }
    }

    /// Noiseless intensities `|H_m o|²` (ρ is folded into `H_m`).
    pub fn intensity(&self, o: &ComplexImage) -> Result<Vec<RealImage>> {
        Ok(self.apply(o)?.iter().map(ComplexImage::intensity).collect())
    }
}

/// The `m_count` lattice points nearest the origin, scaled by `spacing`.
///
/// Ordered by distance, then by angle in `[0, 2π)`, then lexicographically.
pub fn build_led_grid(m_count: usize, spacing: f64) -> Vec<(i64, i64)> {
    if m_count == 0 {
        return Vec::new();
    }
    let mut reach = ((m_count as f64 / PI).sqrt().ceil() as i64) + 1;
    loop {
        let mut pts: Vec<(i64, i64)> = Vec::new();
        for y in -reach..=reach {
            for x in -reach..=reach {
                if x * x + y * y <= reach * reach {
                    pts.push((x, y));
                }
            }
        }
        if pts.len() >= m_count {
            let angle = |&(x, y): &(i64, i64)| {
                let a = (y as f64).atan2(x as f64);
                if a < 0.0 {
                    a + 2.0 * PI
                } else {
                    a
                }
            };
            pts.sort_by(|a, b| {
                let da = a.0 * a.0 + a.1 * a.1;
                let db = b.0 * b.0 + b.1 * b.1;
                da.cmp(&db)
                    .then(angle(a).total_cmp(&angle(b)))
                    .then(a.cmp(b))
            });
            pts.truncate(m_count);
            return pts
                .into_iter()
                .map(|(x, y)| {
                    (
                        (x as f64 * spacing).round() as i64,
                        (y as f64 * spacing).round() as i64,
                    )
                })
                .collect();
        }
        reach += 1;
    }
}
