//! Pixel-level transforms on H×W×C images.

use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn dims(image: &Tensor) -> Result<(usize, usize, usize)> {
    match *image.shape() {
        [h, w, c] if h > 0 && w > 0 => Ok((h, w, c)),
        _ => Err(Error::shape(format!("expected a non-empty H×W×C image, got {:?}", image.shape()))),
    }
}

/// Bilinear sample at fractional coordinates, clamped to the image border.
fn sample(data: &[f32], (h, w, c): (usize, usize, usize), y: f32, x: f32, ch: usize) -> f32 {
    let y = y.clamp(0.0, (h - 1) as f32);
    let x = x.clamp(0.0, (w - 1) as f32);
    let y0 = libm::floorf(y) as usize;
    let x0 = libm::floorf(x) as usize;
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let (fy, fx) = (y - y0 as f32, x - x0 as f32);
    let at = |yy: usize, xx: usize| data[(yy * w + xx) * c + ch];
    let top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * fx;
    let bottom = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * fx;
    top + (bottom - top) * fy
}

/// Bilinear resize to `side`×`side` (half-pixel centers). The aspect ratio
/// is not preserved; output values are clamped to [0, 1].
pub fn resize_to(image: &Tensor, side: usize) -> Result<Tensor> {
    let (h, w, c) = dims(image)?;
    if side == 0 {
        return Err(Error::config("resize target must be positive"));
    }
    let (sy, sx) = (h as f32 / side as f32, w as f32 / side as f32);
    let mut out = vec![0.0; side * side * c];
    for y in 0..side {
        let src_y = (y as f32 + 0.5) * sy - 0.5;
        for x in 0..side {
            let src_x = (x as f32 + 0.5) * sx - 0.5;
            for ch in 0..c {
                out[(y * side + x) * c + ch] = sample(image.data(), (h, w, c), src_y, src_x, ch).clamp(0.0, 1.0);
            }
        }
    }
    Tensor::from_vec(&[side, side, c], out)
}

/// Mirror left-right.
pub fn hflip(image: &Tensor) -> Result<Tensor> {
    let (h, w, c) = dims(image)?;
    let src = image.data();
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let (d, s) = ((y * w + x) * c, (y * w + (w - 1 - x)) * c);
            out[d..d + c].copy_from_slice(&src[s..s + c]);
        }
    }
    Tensor::from_vec(image.shape(), out)
}

/// Mirror top-bottom.
pub fn vflip(image: &Tensor) -> Result<Tensor> {
    let (h, w, c) = dims(image)?;
    let src = image.data();
    let mut out = vec![0.0; src.len()];
    let row = w * c;
    for y in 0..h {
        out[y * row..(y + 1) * row].copy_from_slice(&src[(h - 1 - y) * row..(h - y) * row]);
    }
    Tensor::from_vec(image.shape(), out)
}

/// Rotation about the image center by `radians` (counter-clockwise), with
/// bilinear sampling and border replication.
pub fn rotate(image: &Tensor, radians: f32) -> Result<Tensor> {
    let (h, w, c) = dims(image)?;
    let (sin, cos) = (libm::sinf(radians), libm::cosf(radians));
    let (cy, cx) = ((h as f32 - 1.0) / 2.0, (w as f32 - 1.0) / 2.0);
    let mut out = vec![0.0; image.len()];
    for y in 0..h {
        for x in 0..w {
            let (dy, dx) = (y as f32 - cy, x as f32 - cx);
            // inverse mapping: rotate the destination back onto the source
            let sx = cos * dx - sin * dy + cx;
            let sy = sin * dx + cos * dy + cy;
            for ch in 0..c {
                out[(y * w + x) * c + ch] = sample(image.data(), (h, w, c), sy, sx, ch).clamp(0.0, 1.0);
            }
        }
    }
    Tensor::from_vec(image.shape(), out)
}

/// Scales contrast around the image mean by `contrast`, then brightness by
/// `brightness`, clamping to [0, 1].
pub fn adjust_color(image: &Tensor, brightness: f32, contrast: f32) -> Result<Tensor> {
    dims(image)?;
    let mean = image.data().iter().map(|&v| f64::from(v)).sum::<f64>() / image.len() as f64;
    let mean = mean as f32;
    let out = image
        .data()
        .iter()
        .map(|&v| (((v - mean) * contrast + mean) * brightness).clamp(0.0, 1.0))
        .collect();
    Tensor::from_vec(image.shape(), out)
}
