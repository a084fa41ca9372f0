//! Layer kernels with explicit backward passes.
//!
//! Convolutions are stride-1 cross-correlations with zero "same" padding,
//! so output spatial dims equal input spatial dims.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Gradients of an affine layer (convolution or dense) with respect to its
/// input, weights and bias.
#[derive(Debug, Clone)]
pub struct AffineGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Winner positions recorded by [`maxpool_forward`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndex {
    input_dims: [usize; 3],
    argmax: Vec<usize>,
}

impl PoolIndex {
    pub fn input_dims(&self) -> [usize; 3] {
        self.input_dims
    }

    pub fn output_dims(&self) -> [usize; 3] {
        let [h, w, c] = self.input_dims;
        [h / 2, w / 2, c]
    }

    /// Flat input offset that won each output element.
    pub fn winners(&self) -> &[usize] {
        &self.argmax
    }
}

struct ConvShape {
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    k: usize,
}

fn conv_shape<T: Scalar>(input: &Tensor<T>, filters: &Tensor<T>) -> Result<ConvShape> {
    let (h, w, cin) = input.hwc()?;
    let [k, k2, fcin, cout] = filters.dims()[..] else {
        return Err(Error::shape(format!(
            "filters must be K×K×Cin×Cout, got {:?}",
            filters.dims()
        )));
    };
    if k != k2 || k % 2 == 0 {
        return Err(Error::shape(format!("kernel must be square and odd, got {k}×{k2}")));
    }
    if fcin != cin {
        return Err(Error::shape(format!(
            "input has {cin} channels but filters expect {fcin}"
        )));
    }
    Ok(ConvShape { h, w, cin, cout, k })
}

/// Valid `(input_row, kernel_row)` pairs for output row `y`.
#[inline]
fn taps(y: usize, k: usize, extent: usize) -> impl Iterator<Item = (usize, usize)> {
    let pad = k / 2;
    (0..k).filter_map(move |ky| {
        let iy = (y + ky).checked_sub(pad)?;
        (iy < extent).then_some((iy, ky))
    })
}

#[inline]
fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, filters: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let s = conv_shape(input, filters)?;
    if bias.dims() != [s.cout] {
        return Err(Error::shape(format!(
            "bias dims {:?}, expected [{}]",
            bias.dims(),
            s.cout
        )));
    }
    let (x_in, f, b) = (input.data(), filters.data(), bias.data());
    let mut out = vec![T::ZERO; s.h * s.w * s.cout];
    for y in 0..s.h {
        for x in 0..s.w {
            let o = &mut out[(y * s.w + x) * s.cout..][..s.cout];
            o.copy_from_slice(b);
            for (iy, ky) in taps(y, s.k, s.h) {
                for (ix, kx) in taps(x, s.k, s.w) {
                    let px = &x_in[(iy * s.w + ix) * s.cin..][..s.cin];
                    let slab = &f[(ky * s.k + kx) * s.cin * s.cout..][..s.cin * s.cout];
                    for (ci, &a) in px.iter().enumerate() {
                        axpy(a, &slab[ci * s.cout..][..s.cout], o);
                    }
                }
            }
        }
    }
    Tensor::new(vec![s.h, s.w, s.cout], out)
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    filters: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<AffineGrads<T>> {
    let s = conv_shape(input, filters)?;
    if grad_out.dims() != [s.h, s.w, s.cout] {
        return Err(Error::shape(format!(
            "grad_out dims {:?}, expected [{}, {}, {}]",
            grad_out.dims(),
            s.h,
            s.w,
            s.cout
        )));
    }
    let (x_in, f, g) = (input.data(), filters.data(), grad_out.data());

    // Filters re-laid out as K×K×Cout×Cin so the input gradient is an axpy
    // over contiguous channels.
    let mut ft = vec![T::ZERO; f.len()];
    for tap in 0..s.k * s.k {
        for ci in 0..s.cin {
            for co in 0..s.cout {
                ft[(tap * s.cout + co) * s.cin + ci] = f[(tap * s.cin + ci) * s.cout + co];
            }
        }
    }

    let mut gi = vec![T::ZERO; x_in.len()];
    let mut gf = vec![T::ZERO; f.len()];
    let mut gb = vec![T::ZERO; s.cout];
    for y in 0..s.h {
        for x in 0..s.w {
            let go = &g[(y * s.w + x) * s.cout..][..s.cout];
            for (acc, &v) in gb.iter_mut().zip(go) {
                *acc += v;
            }
            for (iy, ky) in taps(y, s.k, s.h) {
                for (ix, kx) in taps(x, s.k, s.w) {
                    let tap = ky * s.k + kx;
                    let off = (iy * s.w + ix) * s.cin;
                    let px = &x_in[off..][..s.cin];
                    let gf_slab = &mut gf[tap * s.cin * s.cout..][..s.cin * s.cout];
                    for (ci, &a) in px.iter().enumerate() {
                        axpy(a, go, &mut gf_slab[ci * s.cout..][..s.cout]);
                    }
                    let ft_slab = &ft[tap * s.cout * s.cin..][..s.cout * s.cin];
                    let gpx = &mut gi[off..][..s.cin];
                    for (co, &gv) in go.iter().enumerate() {
                        axpy(gv, &ft_slab[co * s.cin..][..s.cin], gpx);
                    }
                }
            }
        }
    }
    Ok(AffineGrads {
        input: Tensor::new(input.dims().to_vec(), gi)?,
        weights: Tensor::new(filters.dims().to_vec(), gf)?,
        bias: Tensor::new(vec![s.cout], gb)?,
    })
}

/// 2×2 max-pool with stride 2. Ties go to the first element in row-major
/// window order.
pub fn maxpool_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndex)> {
    let (h, w, c) = input.hwc()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(format!("max-pool needs even spatial dims, got {h}×{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for y in 0..oh {
        for xo in 0..ow {
            for ch in 0..c {
                let cands = [
                    ((2 * y) * w + 2 * xo) * c + ch,
                    ((2 * y) * w + 2 * xo + 1) * c + ch,
                    ((2 * y + 1) * w + 2 * xo) * c + ch,
                    ((2 * y + 1) * w + 2 * xo + 1) * c + ch,
                ];
                let mut best = cands[0];
                for &idx in &cands[1..] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::new(vec![oh, ow, c], out)?,
        PoolIndex {
            input_dims: [h, w, c],
            argmax,
        },
    ))
}

pub fn maxpool_backward<T: Scalar>(index: &PoolIndex, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.dims() != index.output_dims() {
        return Err(Error::shape(format!(
            "grad_out dims {:?}, expected {:?}",
            grad_out.dims(),
            index.output_dims()
        )));
    }
    let [h, w, c] = index.input_dims;
    let mut gi = vec![T::ZERO; h * w * c];
    for (&pos, &g) in index.argmax.iter().zip(grad_out.data()) {
        gi[pos] += g;
    }
    Tensor::new(vec![h, w, c], gi)
}

fn dense_shape<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>) -> Result<(usize, usize)> {
    let [m, n] = weights.dims()[..] else {
        return Err(Error::shape(format!(
            "dense weights must be M×N, got {:?}",
            weights.dims()
        )));
    };
    if input.dims() != [m] {
        return Err(Error::shape(format!(
            "dense input dims {:?}, expected [{m}]",
            input.dims()
        )));
    }
    Ok((m, n))
}

/// `weightsᵀ · input + bias`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, n) = dense_shape(input, weights)?;
    if bias.dims() != [n] {
        return Err(Error::shape(format!("bias dims {:?}, expected [{n}]", bias.dims())));
    }
    let mut out = bias.data().to_vec();
    for (&a, row) in input.data().iter().zip(weights.data().chunks_exact(n)) {
        axpy(a, row, &mut out);
    }
    Tensor::new(vec![n], out)
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<AffineGrads<T>> {
    let (m, n) = dense_shape(input, weights)?;
    if grad_out.dims() != [n] {
        return Err(Error::shape(format!(
            "grad_out dims {:?}, expected [{n}]",
            grad_out.dims()
        )));
    }
    let g = grad_out.data();
    let mut gi = Vec::with_capacity(m);
    let mut gw = vec![T::ZERO; m * n];
    for ((&a, row), grow) in input
        .data()
        .iter()
        .zip(weights.data().chunks_exact(n))
        .zip(gw.chunks_exact_mut(n))
    {
        gi.push(row.iter().zip(g).map(|(&wv, &gv)| wv * gv).sum());
        axpy(a, g, grow);
    }
    Ok(AffineGrads {
        input: Tensor::new(vec![m], gi)?,
        weights: Tensor::new(vec![m, n], gw)?,
        bias: grad_out.clone(),
    })
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::ZERO { v } else { T::ZERO })
}

/// Passes gradient only where the input was strictly positive.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    input.check_same_dims(grad_out)?;
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::ZERO { g } else { T::ZERO })
        .collect();
    Tensor::new(input.dims().to_vec(), data)
}
