//! FTNS tensor files.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "FTNS" | version u8 = 1 | dtype u8 (1 = f32, 2 = f64) | rank u8 (1..=4) | reserved u8 = 0
//! rank × u32 dims
//! row-major payload
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::tensor::{Scalar, Tensor};

pub const TENSOR_MAGIC: [u8; 4] = *b"FTNS";
pub const TENSOR_VERSION: u8 = 1;
const HEADER_LEN: usize = 8;

pub fn encode_tensor<T: Scalar>(t: &Tensor<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.rank() + T::WIDTH * t.len());
    out.extend_from_slice(&TENSOR_MAGIC);
    out.extend_from_slice(&[TENSOR_VERSION, T::DTYPE, t.rank() as u8, 0]);
    for &d in t.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(&mut out);
    }
    out
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8], FormatError> {
    let available = bytes.len().saturating_sub(*pos);
    if available < n {
        return Err(FormatError::Truncated {
            needed: *pos + n,
            available: bytes.len(),
        });
    }
    let s = &bytes[*pos..*pos + n];
    *pos += n;
    Ok(s)
}

fn decode_payload<S: Scalar, T: Scalar>(raw: &[u8]) -> Vec<T> {
    raw.chunks_exact(S::WIDTH)
        .map(|c| T::from_f64(S::read_le(c).to_f64()))
        .collect()
}

/// Decodes one tensor from the front of `bytes`, returning it with the
/// number of bytes consumed. Stored values are converted to `T` when the
/// file dtype differs; same-dtype decoding is bit-exact.
pub fn decode_tensor<T: Scalar>(bytes: &[u8]) -> Result<(Tensor<T>, usize), FormatError> {
    let mut pos = 0;
    let header = take(bytes, &mut pos, HEADER_LEN)?;
    let magic: [u8; 4] = header[..4].try_into().expect("4 bytes");
    if magic != TENSOR_MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let (version, dtype, rank) = (header[4], header[5], header[6]);
    if version != TENSOR_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let width = match dtype {
        1 => 4,
        2 => 8,
        other => return Err(FormatError::UnsupportedDtype(other)),
    };
    if !(1..=4).contains(&rank) {
        return Err(FormatError::BadRank(rank));
    }
    let dims: Vec<usize> = take(bytes, &mut pos, 4 * rank as usize)?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    if dims.contains(&0) {
        return Err(FormatError::ZeroDim(dims));
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(width))
        .ok_or(FormatError::Truncated {
            needed: usize::MAX,
            available: bytes.len(),
        })?;
    let raw = take(bytes, &mut pos, count)?;
    // Same-dtype payloads skip the f64 detour, which would quiet
    // signalling NaNs.
    let data = match dtype {
        d if d == T::DTYPE => raw.chunks_exact(T::WIDTH).map(T::read_le).collect(),
        1 => decode_payload::<f32, T>(raw),
        _ => decode_payload::<f64, T>(raw),
    };
    let tensor = Tensor::new(dims, data).expect("dims validated above");
    Ok((tensor, pos))
}

pub fn write_tensor<T: Scalar>(t: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(t)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor<T: Scalar>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = |source| Error::Format {
        path: path.to_path_buf(),
        source,
    };
    let (t, used) = decode_tensor(&bytes).map_err(format)?;
    if used != bytes.len() {
        return Err(format(FormatError::TrailingBytes(bytes.len() - used)));
    }
    Ok(t)
}
