//! Stride-1 square-kernel convolution, lowered to matrix multiplication.
//!
//! Each sample's zero-padded input is unfolded into a patch matrix of shape
//! `(C_in * k * k) x (H_out * W_out)`; the forward pass is then a single GEMM
//! against the `C_out x (C_in * k * k)` weight matrix. The backward pass uses
//! the transposed products and folds patch gradients back with `col2im`.

use crate::error::{Error, Result};
use crate::linalg::gemm;
use crate::par;
use crate::tensor::{he_normal_init, Rng, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub padding: usize,
    /// `[out, in, k, k]`
    pub weights: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl ConvLayer {
    /// Layer with all weights and biases zero.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, padding: usize) -> Result<Self> {
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            padding,
            weights: Tensor::zeros(&[out_channels, in_channels, kernel, kernel])?,
            bias: Tensor::zeros(&[out_channels])?,
        })
    }

    /// He-normal weights (`fan_in = C_in * k * k`), zero bias.
    pub fn he_normal(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        padding: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut layer = Self::new(in_channels, out_channels, kernel, padding)?;
        layer.weights = he_normal_init(layer.weights.shape(), in_channels * kernel * kernel, rng)?;
        Ok(layer)
    }

    /// Spatial output extent for an input extent: `extent + 2p - k + 1`.
    pub fn output_extent(&self, extent: usize) -> Result<usize> {
        let padded = extent + 2 * self.padding;
        if padded < self.kernel {
            return Err(Error::ShapeMismatch {
                context: "conv2d output extent",
                expected: vec![self.kernel],
                got: vec![padded],
            });
        }
        Ok(padded - self.kernel + 1)
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn geometry(&self, input_shape: &[usize]) -> Result<Geometry> {
        let &[_, c, h, w] = input_shape else {
            return Err(Error::ShapeMismatch {
                context: "conv2d input rank",
                expected: vec![0, self.in_channels, 0, 0],
                got: input_shape.to_vec(),
            });
        };
        if c != self.in_channels {
            return Err(Error::ShapeMismatch {
                context: "conv2d input channels",
                expected: vec![self.in_channels],
                got: vec![c],
            });
        }
        Ok(Geometry {
            c,
            h,
            w,
            k: self.kernel,
            pad: self.padding,
            oh: self.output_extent(h)?,
            ow: self.output_extent(w)?,
        })
    }
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn in_len(&self) -> usize {
        self.c * self.h * self.w
    }

    fn out_area(&self) -> usize {
        self.oh * self.ow
    }
}

fn im2col(input: &[f64], g: &Geometry, cols: &mut [f64]) {
    let area = g.out_area();
    for c in 0..g.c {
        let plane = &input[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.k {
            for j in 0..g.k {
                let row = &mut cols[((c * g.k + i) * g.k + j) * area..][..area];
                for y in 0..g.oh {
                    let iy = (y + i) as isize - g.pad as isize;
                    let dst = &mut row[y * g.ow..(y + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (x, d) in dst.iter_mut().enumerate() {
                        let ix = (x + j) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.w as isize { 0.0 } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Accumulates patch-matrix gradients back into an input-shaped buffer.
fn col2im_add(cols: &[f64], g: &Geometry, out: &mut [f64]) {
    let area = g.out_area();
    for c in 0..g.c {
        let plane = &mut out[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.k {
            for j in 0..g.k {
                let row = &cols[((c * g.k + i) * g.k + j) * area..][..area];
                for y in 0..g.oh {
                    let iy = (y + i) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    for x in 0..g.ow {
                        let ix = (x + j) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            plane[iy as usize * g.w + ix as usize] += row[y * g.ow + x];
                        }
                    }
                }
            }
        }
    }
}

/// Batched forward pass: `[N, C_in, H, W] -> [N, C_out, H', W']`.
pub fn conv2d_forward_batch(input: &Tensor, layer: &ConvLayer) -> Result<Tensor> {
    let g = layer.geometry(input.shape())?;
    let n = input.shape()[0];
    let area = g.out_area();
    let out_len = layer.out_channels * area;
    let mut out = vec![0.0; n * out_len];
    let weights = layer.weights.data();
    let bias = layer.bias.data();
    par::for_each_chunk_mut(&mut out, out_len, |s, dst| {
        let mut cols = vec![0.0; layer.patch_len() * area];
        im2col(&input.data()[s * g.in_len()..(s + 1) * g.in_len()], &g, &mut cols);
        for (o, row) in dst.chunks_mut(area).enumerate() {
            row.fill(bias[o]);
        }
        gemm(layer.out_channels, layer.patch_len(), area, 1.0, weights, false, &cols, false, 1.0, dst);
    });
    Tensor::from_vec(&[n, layer.out_channels, g.oh, g.ow], out)
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Clone, Debug)]
pub struct ConvGradients {
    /// `None` when the caller did not ask for it (first layer of a network).
    pub input: Option<Tensor>,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Batched backward pass. Parameter gradients are summed over the batch.
pub fn conv2d_backward_batch(
    grad_out: &Tensor,
    input: &Tensor,
    layer: &ConvLayer,
    need_input_grad: bool,
) -> Result<ConvGradients> {
    let g = layer.geometry(input.shape())?;
    let n = input.shape()[0];
    let expected = [n, layer.out_channels, g.oh, g.ow];
    if grad_out.shape() != expected {
        return Err(Error::ShapeMismatch {
            context: "conv2d backward grad_out",
            expected: expected.to_vec(),
            got: grad_out.shape().to_vec(),
        });
    }
    let area = g.out_area();
    let patch = layer.patch_len();
    let co = layer.out_channels;
    let weights = layer.weights.data();
    let chunks = n.div_ceil(par::CHUNK);

    let partials = par::map_range(chunks, |ci| {
        let lo = ci * par::CHUNK;
        let hi = (lo + par::CHUNK).min(n);
        let mut gw = vec![0.0; co * patch];
        let mut gb = vec![0.0; co];
        let mut gin = if need_input_grad { vec![0.0; (hi - lo) * g.in_len()] } else { Vec::new() };
        let mut cols = vec![0.0; patch * area];
        let mut gcols = if need_input_grad { vec![0.0; patch * area] } else { Vec::new() };
        for s in lo..hi {
            let gout = &grad_out.data()[s * co * area..(s + 1) * co * area];
            im2col(&input.data()[s * g.in_len()..(s + 1) * g.in_len()], &g, &mut cols);
            gemm(co, area, patch, 1.0, gout, false, &cols, true, 1.0, &mut gw);
            for (o, row) in gout.chunks(area).enumerate() {
                gb[o] += row.iter().sum::<f64>();
            }
            if need_input_grad {
                gemm(patch, co, area, 1.0, weights, true, gout, false, 0.0, &mut gcols);
                let off = (s - lo) * g.in_len();
                col2im_add(&gcols, &g, &mut gin[off..off + g.in_len()]);
            }
        }
        (gw, gb, gin)
    });

    let mut gw = vec![0.0; co * patch];
    let mut gb = vec![0.0; co];
    let mut gin = Vec::with_capacity(if need_input_grad { n * g.in_len() } else { 0 });
    for (pw, pb, pin) in partials {
        gw.iter_mut().zip(&pw).for_each(|(a, b)| *a += b);
        gb.iter_mut().zip(&pb).for_each(|(a, b)| *a += b);
        gin.extend_from_slice(&pin);
    }
    Ok(ConvGradients {
        input: if need_input_grad { Some(Tensor::from_vec(input.shape(), gin)?) } else { None },
        weights: Tensor::from_vec(layer.weights.shape(), gw)?,
        bias: Tensor::from_vec(&[co], gb)?,
    })
}

fn as_batch_of_one(t: &Tensor, context: &'static str) -> Result<Tensor> {
    if t.shape().len() != 3 {
        return Err(Error::ShapeMismatch { context, expected: vec![0, 0, 0], got: t.shape().to_vec() });
    }
    let mut shape = vec![1];
    shape.extend_from_slice(t.shape());
    t.clone().reshape(&shape)
}

/// Single-sample forward pass: `[C_in, H, W] -> [C_out, H', W']`.
pub fn conv2d_forward(input: &Tensor, layer: &ConvLayer) -> Result<Tensor> {
    let out = conv2d_forward_batch(&as_batch_of_one(input, "conv2d input")?, layer)?;
    let shape = out.shape()[1..].to_vec();
    out.reshape(&shape)
}

/// Single-sample backward pass; always returns the input gradient.
pub fn conv2d_backward(grad_out: &Tensor, input: &Tensor, layer: &ConvLayer) -> Result<ConvGradients> {
    let gout = as_batch_of_one(grad_out, "conv2d grad_out")?;
    let batch_in = as_batch_of_one(input, "conv2d input")?;
    let mut grads = conv2d_backward_batch(&gout, &batch_in, layer, true)?;
    grads.input = grads.input.map(|t| t.reshape(input.shape())).transpose()?;
    Ok(grads)
}
