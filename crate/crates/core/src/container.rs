//! `CVL1` array container and 8-bit PNG previews.
//!
//! Layout, little-endian:
//!
//! ```text
//! "CVL1" | dtype u8 | height u32 | width u32 | count u32 | payload
//! ```
//!
//! `dtype` is 0 for f32 real, 1 for f32 complex stored as interleaved
//! `(re, im)`, 2 for u16. The payload holds `count` row-major frames.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::{ComplexImage, RealImage};

pub const MAGIC: [u8; 4] = *b"CVL1";
const HEADER_LEN: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32Real = 0,
    F32Complex = 1,
    U16 = 2,
}

impl DType {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Self::F32Real),
            1 => Ok(Self::F32Complex),
            2 => Ok(Self::U16),
            other => Err(Error::Format(format!("unknown dtype {other}"))),
        }
    }

    fn bytes_per_pixel(self) -> usize {
        match self {
            Self::F32Real => 4,
            Self::F32Complex => 8,
            Self::U16 => 2,
        }
    }
}

/// A stack of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrayStack {
    Real(Vec<RealImage>),
    Complex(Vec<ComplexImage>),
    U16 {
        height: usize,
        width: usize,
        frames: Vec<Vec<u16>>,
    },
}

impl ArrayStack {
    pub fn dtype(&self) -> DType {
        match self {
            Self::Real(_) => DType::F32Real,
            Self::Complex(_) => DType::F32Complex,
            Self::U16 { .. } => DType::U16,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            Self::Real(v) => v.len(),
            Self::Complex(v) => v.len(),
            Self::U16 { frames, .. } => frames.len(),
        }
    }

    pub fn dims(&self) -> Result<(usize, usize)> {
        let dims = match self {
            Self::Real(v) => v.first().map(|i| i.dims()),
            Self::Complex(v) => v.first().map(|i| i.dims()),
            Self::U16 { height, width, .. } => Some((*height, *width)),
        };
        dims.ok_or_else(|| Error::Format("empty array stack".into()))
    }

    /// Real frames; u16 frames are converted exactly.
    pub fn into_real(self) -> Result<Vec<RealImage>> {
        match self {
            Self::Real(v) => Ok(v),
            Self::U16 {
                height,
                width,
                frames,
            } => frames
                .into_iter()
                .map(|f| RealImage::new(height, width, f.into_iter().map(f64::from).collect()))
                .collect(),
            Self::Complex(_) => Err(Error::Format("expected real data, found complex".into())),
        }
    }

    /// Complex frames; real frames are promoted with zero imaginary part.
    pub fn into_complex(self) -> Result<Vec<ComplexImage>> {
        match self {
            Self::Complex(v) => Ok(v),
            other => Ok(other.into_real()?.iter().map(RealImage::to_complex).collect()),
        }
    }
}

pub fn encode(stack: &ArrayStack) -> Result<Vec<u8>> {
    let (h, w) = stack.dims()?;
    let count = stack.count();
    let mut out = Vec::with_capacity(HEADER_LEN + count * h * w * stack.dtype().bytes_per_pixel());
    out.extend_from_slice(&MAGIC);
    out.push(stack.dtype() as u8);
    for v in [h, w, count] {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("dimension {v} exceeds u32")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    match stack {
        ArrayStack::Real(frames) => {
            for f in frames {
                f.ensure_same_dims((h, w))?;
                for &v in f.as_slice() {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
        ArrayStack::Complex(frames) => {
            for f in frames {
                f.ensure_same_dims((h, w))?;
                for v in f.as_slice() {
                    out.extend_from_slice(&(v.re as f32).to_le_bytes());
                    out.extend_from_slice(&(v.im as f32).to_le_bytes());
                }
            }
        }
        ArrayStack::U16 { frames, .. } => {
            for f in frames {
                if f.len() != h * w {
                    return Err(Error::Format(format!(
                        "u16 frame has {} values, expected {}",
                        f.len(),
                        h * w
                    )));
                }
                for &v in f {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
}

pub fn decode(bytes: &[u8]) -> Result<ArrayStack> {
    if bytes.len() < HEADER_LEN || bytes[0..4] != MAGIC {
        return Err(Error::Format("not a CVL1 container".into()));
    }
    let dtype = DType::from_byte(bytes[4])?;
    let (h, w, count) = (read_u32(bytes, 5), read_u32(bytes, 9), read_u32(bytes, 13));
    if h == 0 || w == 0 || count == 0 {
        return Err(Error::Format(format!("empty container {h}x{w}x{count}")));
    }
    let expected = (h as u128) * (w as u128) * (count as u128) * dtype.bytes_per_pixel() as u128;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u128 != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let frame_bytes = h * w * dtype.bytes_per_pixel();
    let f32s = |chunk: &[u8]| -> Vec<f32> {
        chunk
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let non_finite = || Error::Format("container holds non-finite values".into());
    Ok(match dtype {
        DType::F32Real => ArrayStack::Real(
            payload
                .chunks_exact(frame_bytes)
                .map(|c| {
                    RealImage::new(h, w, f32s(c).into_iter().map(f64::from).collect())
                        .map_err(|_| non_finite())
                })
                .collect::<Result<_>>()?,
        ),
        DType::F32Complex => ArrayStack::Complex(
            payload
                .chunks_exact(frame_bytes)
                .map(|c| {
                    let data = f32s(c)
                        .chunks_exact(2)
                        .map(|p| Complex64::new(p[0].into(), p[1].into()))
                        .collect();
                    ComplexImage::new(h, w, data).map_err(|_| non_finite())
                })
                .collect::<Result<_>>()?,
        ),
        DType::U16 => ArrayStack::U16 {
            height: h,
            width: w,
            frames: payload
                .chunks_exact(frame_bytes)
                .map(|c| {
                    c.chunks_exact(2)
                        .map(|p| u16::from_le_bytes([p[0], p[1]]))
                        .collect()
                })
                .collect(),
        },
    })
}

pub fn save(path: &Path, stack: &ArrayStack) -> Result<()> {
    fs::write(path, encode(stack)?)
        .map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<ArrayStack> {
    let bytes =
        fs::read(path).map_err(|e| Error::Format(format!("reading {}: {e}", path.display())))?;
    decode(&bytes)
}

/// Writes an 8-bit grayscale PNG, mapping `[lo, hi]` linearly onto `0..=255`
/// (the image's own range when `range` is `None`).
pub fn save_png(path: &Path, img: &RealImage, range: Option<(f64, f64)>) -> Result<()> {
    let (lo, hi) = range.unwrap_or((img.min(), img.max()));
    let span = hi - lo;
    let pixels: Vec<u8> = img
        .as_slice()
        .iter()
        .map(|&v| {
            if span > 0.0 {
                (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, pixels)
        .ok_or_else(|| Error::Format("PNG buffer size mismatch".into()))?;
    buf.save(path)
        .map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
}

/// Reads any PNG as grayscale intensities in `[0, 1]`.
pub fn load_png(path: &Path) -> Result<RealImage> {
    let img = image::open(path)
        .map_err(|e| Error::Format(format!("reading {}: {e}", path.display())))?
        .into_luma16();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect();
    RealImage::new(h as usize, w as usize, data)
}
