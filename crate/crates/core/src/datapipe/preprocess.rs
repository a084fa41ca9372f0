use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Bilinear resize of an `H×W×C` frame to `side×side×C`, sampling at pixel
/// centers with edge clamping.
pub fn bilinear_resize<T: Scalar>(frame: &Tensor<T>, side: usize) -> Result<Tensor<T>> {
    let (h, w, c) = frame.hwc()?;
    if side == 0 {
        return Err(Error::config("resize_side", "must be positive"));
    }
    let coords = |out: usize, extent: usize| -> Vec<(usize, usize, f64)> {
        let scale = extent as f64 / side as f64;
        (0..out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (extent - 1) as f64);
                let lo = src.floor() as usize;
                let hi = (lo + 1).min(extent - 1);
                (lo, hi, src - lo as f64)
            })
            .collect()
    };
    let rows = coords(side, h);
    let cols = coords(side, w);
    let x = frame.data();
    let at = |r: usize, col: usize, ch: usize| x[(r * w + col) * c + ch].to_f64();
    let mut out = Vec::with_capacity(side * side * c);
    for &(r0, r1, fy) in &rows {
        for &(c0, c1, fx) in &cols {
            for ch in 0..c {
                let top = at(r0, c0, ch) * (1.0 - fx) + at(r0, c1, ch) * fx;
                let bottom = at(r1, c0, ch) * (1.0 - fx) + at(r1, c1, ch) * fx;
                out.push(T::from_f64(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    Tensor::new(vec![side, side, c], out)
}

/// Central `side×side` crop; the offset is `(extent − side) / 2`, rounded down.
pub fn center_crop<T: Scalar>(frame: &Tensor<T>, side: usize) -> Result<Tensor<T>> {
    let (h, w, c) = frame.hwc()?;
    if side == 0 || side > h || side > w {
        return Err(Error::config(
            "input_side",
            format!("crop {side} does not fit in a {h}×{w} frame"),
        ));
    }
    let (top, left) = ((h - side) / 2, (w - side) / 2);
    let x = frame.data();
    let mut out = Vec::with_capacity(side * side * c);
    for r in top..top + side {
        out.extend_from_slice(&x[(r * w + left) * c..][..side * c]);
    }
    Tensor::new(vec![side, side, c], out)
}

/// Resize to `resize_side²` then crop centrally to `crop_side²`.
pub fn preprocess<T: Scalar>(frame: &Tensor<T>, resize_side: usize, crop_side: usize) -> Result<Tensor<T>> {
    if crop_side > resize_side {
        return Err(Error::config(
            "input_side",
            format!("crop side {crop_side} exceeds resize side {resize_side}"),
        ));
    }
    let (h, w, _) = frame.hwc()?;
    let resized = if h == resize_side && w == resize_side {
        frame.clone()
    } else {
        bilinear_resize(frame, resize_side)?
    };
    center_crop(&resized, crop_side)
}
