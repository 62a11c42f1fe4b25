//! Forward and backward functions for every network operator.
//!
//! Backward functions take the forward inputs again rather than a cache, so
//! each operator stays a pure function of its arguments.

use rand::Rng;

use super::gradcheck::DiffOp;
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Output spatial size of a convolution, or `None` if the kernel does not fit.
pub fn conv_output_size(size: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = size + 2 * padding;
    if stride == 0 || kernel == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

struct ConvGeom {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    padding: usize,
}

impl ConvGeom {
    fn new<T: Scalar>(
        input: &Tensor<T>,
        kernels: &Tensor<T>,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        input.expect_rank(4, "conv2d input")?;
        kernels.expect_rank(4, "conv2d kernels")?;
        let [n, c, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]];
        let [f, kc, kh, kw] = [
            kernels.shape()[0],
            kernels.shape()[1],
            kernels.shape()[2],
            kernels.shape()[3],
        ];
        if kc != c {
            return Err(Error::Dimension(format!(
                "conv2d: input has {c} channels, kernels expect {kc}"
            )));
        }
        if stride == 0 {
            return Err(Error::Dimension("conv2d: stride must be at least 1".into()));
        }
        let oh = conv_output_size(h, kh, stride, padding);
        let ow = conv_output_size(w, kw, stride, padding);
        let (Some(oh), Some(ow)) = (oh, ow) else {
            return Err(Error::Dimension(format!(
                "conv2d: kernel {kh}x{kw} does not fit input {h}x{w} with padding {padding}"
            )));
        };
        Ok(Self {
            n,
            c,
            h,
            w,
            f,
            kh,
            kw,
            oh,
            ow,
            stride,
            padding,
        })
    }

    /// Output columns whose input column `ox*stride + kx - padding` lies inside the image.
    fn col_range(&self, kx: usize) -> (usize, usize) {
        let lo = if kx >= self.padding {
            0
        } else {
            (self.padding - kx).div_ceil(self.stride)
        };
        let hi = if self.w + self.padding <= kx {
            0
        } else {
            ((self.w - 1 + self.padding - kx) / self.stride + 1).min(self.ow)
        };
        (lo, hi.max(lo))
    }

    fn in_row(&self, oy: usize, ky: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
        (iy >= 0 && (iy as usize) < self.h).then_some(iy as usize)
    }
}

/// Valid cross-correlation (no kernel flip) with zero padding.
///
/// `input` is `[N, C, H, W]`, `kernels` is `[F, C, kh, kw]`, `bias` is `[F]`.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let g = ConvGeom::new(input, kernels, stride, padding)?;
    bias.expect_shape(&[g.f])?;
    let x = input.data();
    let k = kernels.data();
    let plane = g.oh * g.ow;
    let mut out = vec![T::zero(); g.n * g.f * plane];
    for n in 0..g.n {
        for f in 0..g.f {
            let o = &mut out[(n * g.f + f) * plane..][..plane];
            o.fill(bias.data()[f]);
            for c in 0..g.c {
                let xin = &x[(n * g.c + c) * g.h * g.w..][..g.h * g.w];
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        let wv = k[((f * g.c + c) * g.kh + ky) * g.kw + kx];
                        let (lo, hi) = g.col_range(kx);
                        for oy in 0..g.oh {
                            let Some(iy) = g.in_row(oy, ky) else { continue };
                            let orow = &mut o[oy * g.ow..][..g.ow];
                            let irow = &xin[iy * g.w..][..g.w];
                            if g.stride == 1 {
                                let base = kx + lo - g.padding;
                                for (ov, &iv) in orow[lo..hi].iter_mut().zip(&irow[base..]) {
                                    *ov += wv * iv;
                                }
                            } else {
                                for ox in lo..hi {
                                    orow[ox] += wv * irow[ox * g.stride + kx - g.padding];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new([g.n, g.f, g.oh, g.ow], out)
}

/// Gradients of [`conv2d`] with respect to input, kernels and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
    padding: usize,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let g = ConvGeom::new(input, kernels, stride, padding)?;
    upstream.expect_shape(&[g.n, g.f, g.oh, g.ow])?;
    let x = input.data();
    let k = kernels.data();
    let up = upstream.data();
    let plane = g.oh * g.ow;
    let mut gx = vec![T::zero(); x.len()];
    let mut gk = vec![T::zero(); k.len()];
    let mut gb = vec![T::zero(); g.f];
    for n in 0..g.n {
        for f in 0..g.f {
            let gout = &up[(n * g.f + f) * plane..][..plane];
            gb[f] += gout.iter().copied().sum::<T>();
            for c in 0..g.c {
                let base_in = (n * g.c + c) * g.h * g.w;
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        let widx = ((f * g.c + c) * g.kh + ky) * g.kw + kx;
                        let wv = k[widx];
                        let (lo, hi) = g.col_range(kx);
                        let mut acc = T::zero();
                        for oy in 0..g.oh {
                            let Some(iy) = g.in_row(oy, ky) else { continue };
                            let grow = &gout[oy * g.ow..][..g.ow];
                            let roff = base_in + iy * g.w;
                            for ox in lo..hi {
                                let ix = roff + ox * g.stride + kx - g.padding;
                                let gv = grow[ox];
                                acc += gv * x[ix];
                                gx[ix] += gv * wv;
                            }
                        }
                        gk[widx] += acc;
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(input.shape(), gx)?,
        Tensor::new(kernels.shape(), gk)?,
        Tensor::new([g.f], gb)?,
    ))
}

/// Elementwise `max(0, x)`.
pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Subgradient of [`relu`]; zero at exactly 0.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    upstream.expect_shape(input.shape())?;
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}

fn spatial_dims<T: Scalar>(input: &Tensor<T>, what: &str) -> Result<[usize; 4]> {
    input.expect_rank(4, what)?;
    let s = input.shape();
    Ok([s[0], s[1], s[2], s[3]])
}

/// Flat index of the max in each 2x2 window; ties go to the first cell in row-major order.
fn maxpool_argmax<T: Scalar>(input: &Tensor<T>) -> Result<(Vec<usize>, [usize; 4])> {
    let [n, c, h, w] = spatial_dims(input, "maxpool2x2")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Dimension(format!(
            "maxpool2x2 needs even spatial dims, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut idx = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let cells = [
                    base + 2 * oy * w + 2 * ox,
                    base + 2 * oy * w + 2 * ox + 1,
                    base + (2 * oy + 1) * w + 2 * ox,
                    base + (2 * oy + 1) * w + 2 * ox + 1,
                ];
                let mut best = cells[0];
                for &cell in &cells[1..] {
                    if x[cell] > x[best] {
                        best = cell;
                    }
                }
                idx.push(best);
            }
        }
    }
    Ok((idx, [n, c, oh, ow]))
}

/// 2x2 max pooling with stride 2.
pub fn maxpool2x2<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (idx, shape) = maxpool_argmax(input)?;
    let x = input.data();
    Tensor::new(shape, idx.iter().map(|&i| x[i]).collect())
}

/// Routes each upstream value to the argmax cell of its window.
pub fn maxpool2x2_backward<T: Scalar>(input: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    let (idx, shape) = maxpool_argmax(input)?;
    upstream.expect_shape(&shape)?;
    let mut gx = vec![T::zero(); input.len()];
    for (&i, &g) in idx.iter().zip(upstream.data()) {
        gx[i] += g;
    }
    Tensor::new(input.shape(), gx)
}

/// Block-mean pooling by an integer factor.
pub fn downsample_avg<T: Scalar>(input: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = spatial_dims(input, "downsample_avg")?;
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::Dimension(format!(
            "downsample factor {factor} does not divide {h}x{w}"
        )));
    }
    if factor == 1 {
        return Ok(input.clone());
    }
    let (oh, ow) = (h / factor, w / factor);
    let inv = T::from_f64(1.0 / (factor * factor) as f64);
    let x = input.data();
    let mut out = vec![T::zero(); n * c * oh * ow];
    for plane in 0..n * c {
        let xin = &x[plane * h * w..][..h * w];
        let o = &mut out[plane * oh * ow..][..oh * ow];
        for iy in 0..h {
            for ix in 0..w {
                o[(iy / factor) * ow + ix / factor] += xin[iy * w + ix];
            }
        }
        for v in o.iter_mut() {
            *v *= inv;
        }
    }
    Tensor::new([n, c, oh, ow], out)
}

/// Spreads each upstream cell uniformly (1/factor²) over its block.
pub fn downsample_avg_backward<T: Scalar>(
    input_shape: &[usize],
    factor: usize,
    upstream: &Tensor<T>,
) -> Result<Tensor<T>> {
    let &[n, c, h, w] = input_shape else {
        return Err(Error::Dimension(format!(
            "downsample_avg: expected rank 4, got {input_shape:?}"
        )));
    };
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::Dimension(format!(
            "downsample factor {factor} does not divide {h}x{w}"
        )));
    }
    let (oh, ow) = (h / factor, w / factor);
    upstream.expect_shape(&[n, c, oh, ow])?;
    let inv = T::from_f64(1.0 / (factor * factor) as f64);
    let up = upstream.data();
    let mut gx = vec![T::zero(); n * c * h * w];
    for plane in 0..n * c {
        let g = &up[plane * oh * ow..][..oh * ow];
        let o = &mut gx[plane * h * w..][..h * w];
        for iy in 0..h {
            for ix in 0..w {
                o[iy * w + ix] = g[(iy / factor) * ow + ix / factor] * inv;
            }
        }
    }
    Tensor::new(input_shape, gx)
}

/// `input · weights + bias` with `input: [N, D]`, `weights: [D, E]`, `bias: [E]`.
pub fn affine<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    input.expect_rank(2, "affine input")?;
    weights.expect_rank(2, "affine weights")?;
    let (n, d) = (input.shape()[0], input.shape()[1]);
    let (wd, e) = (weights.shape()[0], weights.shape()[1]);
    if wd != d {
        return Err(Error::Dimension(format!(
            "affine: input width {d} does not match weight rows {wd}"
        )));
    }
    bias.expect_shape(&[e])?;
    let w = weights.data();
    let mut out = Vec::with_capacity(n * e);
    for row in 0..n {
        let mut acc = bias.data().to_vec();
        for (di, &xv) in input.row(row).iter().enumerate() {
            if xv == T::zero() {
                continue;
            }
            for (a, &wv) in acc.iter_mut().zip(&w[di * e..(di + 1) * e]) {
                *a += xv * wv;
            }
        }
        out.extend(acc);
    }
    Tensor::new([n, e], out)
}

/// Gradients of [`affine`] with respect to input, weights and bias.
pub fn affine_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    input.expect_rank(2, "affine input")?;
    weights.expect_rank(2, "affine weights")?;
    let (n, d) = (input.shape()[0], input.shape()[1]);
    let e = weights.shape()[1];
    if weights.shape()[0] != d {
        return Err(Error::Dimension("affine: inner dimensions disagree".into()));
    }
    upstream.expect_shape(&[n, e])?;
    let w = weights.data();
    let mut gx = vec![T::zero(); n * d];
    let mut gw = vec![T::zero(); d * e];
    let mut gb = vec![T::zero(); e];
    for row in 0..n {
        let g = upstream.row(row);
        for (b, &gv) in gb.iter_mut().zip(g) {
            *b += gv;
        }
        let x = input.row(row);
        for di in 0..d {
            let wrow = &w[di * e..(di + 1) * e];
            gx[row * d + di] = wrow.iter().zip(g).map(|(&a, &b)| a * b).sum();
            let xv = x[di];
            if xv != T::zero() {
                for (gwv, &gv) in gw[di * e..(di + 1) * e].iter_mut().zip(g) {
                    *gwv += xv * gv;
                }
            }
        }
    }
    Ok((
        Tensor::new([n, d], gx)?,
        Tensor::new([d, e], gw)?,
        Tensor::new([e], gb)?,
    ))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("l2_normalize epsilon must be > 0, got {epsilon}")))
    }
}

/// Divides each row by `max(‖row‖₂, epsilon)`.
pub fn l2_normalize<T: Scalar>(input: &Tensor<T>, epsilon: f64) -> Result<Tensor<T>> {
    check_epsilon(epsilon)?;
    input.expect_rank(2, "l2_normalize input")?;
    let mut out = input.clone();
    for r in 0..input.rows() {
        let norm = row_norm(input.row(r));
        let denom = T::from_f64(norm.max(epsilon));
        for v in out.row_mut(r) {
            *v = *v / denom;
        }
    }
    Ok(out)
}

fn row_norm<T: Scalar>(row: &[T]) -> f64 {
    row.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt()
}

pub fn l2_normalize_backward<T: Scalar>(
    input: &Tensor<T>,
    epsilon: f64,
    upstream: &Tensor<T>,
) -> Result<Tensor<T>> {
    check_epsilon(epsilon)?;
    input.expect_rank(2, "l2_normalize input")?;
    upstream.expect_shape(input.shape())?;
    let mut gx = Tensor::zeros(input.shape());
    for r in 0..input.rows() {
        let x = input.row(r);
        let g = upstream.row(r);
        let norm = row_norm(x);
        let out = gx.row_mut(r);
        if norm > epsilon {
            // d(x/|x|) = (g - y (y·g)) / |x|
            let inv = 1.0 / norm;
            let yg: f64 = x.iter().zip(g).map(|(&a, &b)| a.as_f64() * inv * b.as_f64()).sum();
            for ((o, &xv), &gv) in out.iter_mut().zip(x).zip(g) {
                *o = T::from_f64((gv.as_f64() - xv.as_f64() * inv * yg) * inv);
            }
        } else {
            let inv = T::from_f64(1.0 / epsilon);
            for (o, &gv) in out.iter_mut().zip(g) {
                *o = gv * inv;
            }
        }
    }
    Ok(gx)
}

/// Column-wise concatenation of `[N, Dᵢ]` matrices in argument order.
pub fn concat<T: Scalar>(inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::Dimension("concat of zero tensors".into()))?;
    let n = first.rows();
    let mut total = 0;
    for t in inputs {
        t.expect_rank(2, "concat input")?;
        if t.rows() != n {
            return Err(Error::Dimension(format!(
                "concat: row count {} differs from {n}",
                t.rows()
            )));
        }
        total += t.shape()[1];
    }
    let mut data = Vec::with_capacity(n * total);
    for r in 0..n {
        for t in inputs {
            data.extend_from_slice(t.row(r));
        }
    }
    Tensor::new([n, total], data)
}

/// Splits an upstream gradient of [`concat`] back into per-input pieces.
pub fn concat_backward<T: Scalar>(widths: &[usize], upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    upstream.expect_rank(2, "concat upstream")?;
    let total: usize = widths.iter().sum();
    if upstream.shape()[1] != total {
        return Err(Error::Dimension(format!(
            "concat_backward: widths sum to {total}, upstream has {}",
            upstream.shape()[1]
        )));
    }
    let n = upstream.rows();
    let mut parts: Vec<Vec<T>> = widths.iter().map(|&w| Vec::with_capacity(n * w)).collect();
    for r in 0..n {
        let mut off = 0;
        let row = upstream.row(r);
        for (part, &w) in parts.iter_mut().zip(widths) {
            part.extend_from_slice(&row[off..off + w]);
            off += w;
        }
    }
    parts
        .into_iter()
        .zip(widths)
        .map(|(p, &w)| Tensor::new([n, w], p))
        .collect()
}

/// Keep-mask of a dropout application: each entry is `0` or `1/(1-rate)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask<T> {
    scale: Vec<T>,
}

impl<T: Scalar> DropoutMask<T> {
    pub fn identity(len: usize) -> Self {
        Self {
            scale: vec![T::one(); len],
        }
    }

    pub fn apply(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        if self.scale.len() != input.len() {
            return Err(Error::Dimension("dropout mask length mismatch".into()));
        }
        let data = input.data().iter().zip(&self.scale).map(|(&x, &s)| x * s).collect();
        Tensor::new(input.shape(), data)
    }
}

/// Inverted dropout. In inference mode (or with `rate == 0`) this is the identity.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    input: &Tensor<T>,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<(Tensor<T>, DropoutMask<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if !training || rate == 0.0 {
        return Ok((input.clone(), DropoutMask::identity(input.len())));
    }
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let scale = (0..input.len())
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect();
    let mask = DropoutMask { scale };
    let out = mask.apply(input)?;
    Ok((out, mask))
}

pub fn dropout_backward<T: Scalar>(mask: &DropoutMask<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    mask.apply(upstream)
}

// Adapters used by the finite-difference harness.

/// `conv2d` over inputs `[input, kernels, bias]`.
pub struct Conv2dOp {
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> DiffOp<T> for Conv2dOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        conv2d(&inputs[0], &inputs[1], &inputs[2], self.stride, self.padding)
    }
    fn backward(&self, inputs: &[Tensor<T>], upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let (a, b, c) = conv2d_backward(&inputs[0], &inputs[1], self.stride, self.padding, upstream)?;
        Ok(vec![a, b, c])
    }
}

pub struct ReluOp;

impl<T: Scalar> DiffOp<T> for ReluOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        Ok(relu(&inputs[0]))
    }
    fn backward(&self, inputs: &[Tensor<T>], upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        Ok(vec![relu_backward(&inputs[0], upstream)?])
    }
}

pub struct MaxPoolOp;

impl<T: Scalar> DiffOp<T> for MaxPoolOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        maxpool2x2(&inputs[0])
    }
    fn backward(&self, inputs: &[Tensor<T>], upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        Ok(vec![maxpool2x2_backward(&inputs[0], upstream)?])
    }
}

pub struct DownsampleOp {
    pub factor: usize,
}

impl<T: Scalar> DiffOp<T> for DownsampleOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        downsample_avg(&inputs[0], self.factor)
    }
    fn backward(&self, inputs: &[Tensor<T>], upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        Ok(vec![downsample_avg_backward(inputs[0].shape(), self.factor, upstream)?])
    }
}

/// `affine` over inputs `[input, weights, bias]`.
pub struct AffineOp;

impl<T: Scalar> DiffOp<T> for AffineOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        affine(&inputs[0], &inputs[1], &inputs[2])
    }
    fn backward(&self, inputs: &[Tensor<T>], upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let (a, b, c) = affine_backward(&inputs[0], &inputs[1], upstream)?;
        Ok(vec![a, b, c])
    }
}

pub struct L2NormalizeOp {
    pub epsilon: f64,
}

impl<T: Scalar> DiffOp<T> for L2NormalizeOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        l2_normalize(&inputs[0], self.epsilon)
    }
    fn backward(&self, inputs: &[Tensor<T>], upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        Ok(vec![l2_normalize_backward(&inputs[0], self.epsilon, upstream)?])
    }
}

pub struct ConcatOp;

impl<T: Scalar> DiffOp<T> for ConcatOp {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        concat(&inputs.iter().collect::<Vec<_>>())
    }
    fn backward(&self, inputs: &[Tensor<T>], upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let widths: Vec<usize> = inputs.iter().map(|t| t.shape()[1]).collect();
        concat_backward(&widths, upstream)
    }
}

/// Dropout with a frozen mask, which makes it a fixed linear map.
pub struct DropoutOp<T> {
    pub mask: DropoutMask<T>,
}

impl<T: Scalar> DiffOp<T> for DropoutOp<T> {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
        self.mask.apply(&inputs[0])
    }
    fn backward(&self, _inputs: &[Tensor<T>], upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        Ok(vec![dropout_backward(&self.mask, upstream)?])
    }
}
