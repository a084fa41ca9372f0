use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// One of the eight dihedral variants of a square frame.
///
/// `code - 1` is a bit set: bit 0 transpose, bit 1 horizontal flip, bit 2
/// vertical flip, applied in that order. Code 1 is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct AugmentCode(u8);

impl AugmentCode {
    pub const IDENTITY: AugmentCode = AugmentCode(1);

    pub fn new(code: u8) -> Result<Self> {
        if !(1..=8).contains(&code) {
            return Err(Error::config("augment_code", format!("{code} outside 1..=8")));
        }
        Ok(Self(code))
    }

    pub fn all() -> impl Iterator<Item = AugmentCode> {
        (1..=8).map(AugmentCode)
    }

    /// Uniform draw from `1..=8`.
    pub fn random(rng: &mut Rng) -> Self {
        Self(rng.below(8) as u8 + 1)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn transpose(self) -> bool {
        (self.0 - 1) & 1 != 0
    }

    pub fn hflip(self) -> bool {
        (self.0 - 1) & 2 != 0
    }

    pub fn vflip(self) -> bool {
        (self.0 - 1) & 4 != 0
    }

    /// The code that undoes this one.
    pub fn inverse(self) -> Self {
        let probe = Tensor::<f64>::from_fn(&[3, 3, 1], |i| i as f64);
        let moved = augment(&probe, self).expect("square probe");
        Self::all()
            .find(|&c| augment(&moved, c).expect("square probe") == probe)
            .expect("dihedral group is closed under inverses")
    }
}

impl TryFrom<u8> for AugmentCode {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AugmentCode> for u8 {
    fn from(c: AugmentCode) -> u8 {
        c.0
    }
}

fn remap<T: Scalar>(src: &Tensor<T>, h: usize, w: usize, f: impl Fn(usize, usize) -> (usize, usize)) -> Tensor<T> {
    let (_, sw, c) = src.hwc().expect("rank 3");
    let data = src.data();
    let mut out = Vec::with_capacity(data.len());
    for r in 0..h {
        for col in 0..w {
            let (sr, sc) = f(r, col);
            out.extend_from_slice(&data[(sr * sw + sc) * c..][..c]);
        }
    }
    Tensor::new(vec![h, w, c], out).expect("same element count")
}

/// Applies the code's transforms in the fixed order transpose → hflip →
/// vflip.
pub fn augment<T: Scalar>(frame: &Tensor<T>, code: AugmentCode) -> Result<Tensor<T>> {
    let (h, w, _) = frame.hwc()?;
    if code.transpose() && h != w {
        return Err(Error::shape(format!("transpose needs a square frame, got {h}×{w}")));
    }
    let mut out = frame.clone();
    if code.transpose() {
        out = remap(&out, w, h, |r, c| (c, r));
    }
    if code.hflip() {
        out = remap(&out, h, w, |r, c| (r, w - 1 - c));
    }
    if code.vflip() {
        out = remap(&out, h, w, |r, c| (h - 1 - r, c));
    }
    Ok(out)
}
