//! 2x2 max pooling with stride 2.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// For each pooled output element, the flat index of the input element that
/// produced it. Ties go to the first maximum in row-major window order.
#[derive(Clone, Debug, PartialEq)]
pub struct ArgmaxMap {
    input_shape: Vec<usize>,
    indices: Vec<usize>,
}

impl ArgmaxMap {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }
}

/// Pools the two trailing axes of a tensor of rank >= 3.
pub fn maxpool_forward(input: &Tensor) -> Result<(Tensor, ArgmaxMap)> {
    let shape = input.shape();
    if shape.len() < 3 {
        return Err(Error::ShapeMismatch { context: "maxpool rank", expected: vec![0, 0, 0], got: shape.to_vec() });
    }
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::ShapeMismatch {
            context: "maxpool needs even extents",
            expected: vec![h + h % 2, w + w % 2],
            got: vec![h, w],
        });
    }
    let planes: usize = shape[..shape.len() - 2].iter().product();
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut indices = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let base = p * h * w;
        for y in 0..oh {
            for xo in 0..ow {
                let mut best = base + 2 * y * w + 2 * xo;
                for idx in [best + 1, best + w, best + w + 1] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                indices.push(best);
            }
        }
    }
    let mut out_shape = shape.to_vec();
    let r = out_shape.len();
    out_shape[r - 2] = oh;
    out_shape[r - 1] = ow;
    Ok((Tensor::from_vec(&out_shape, out)?, ArgmaxMap { input_shape: shape.to_vec(), indices }))
}

/// Routes each output gradient to its argmax position; zeros elsewhere.
pub fn maxpool_backward(grad_out: &Tensor, argmax: &ArgmaxMap) -> Result<Tensor> {
    if grad_out.len() != argmax.indices.len() {
        return Err(Error::ShapeMismatch {
            context: "maxpool backward",
            expected: vec![argmax.indices.len()],
            got: grad_out.shape().to_vec(),
        });
    }
    let mut grad_in = Tensor::zeros(&argmax.input_shape)?;
    let gi = grad_in.data_mut();
    for (&idx, &g) in argmax.indices.iter().zip(grad_out.data()) {
        gi[idx] += g;
    }
    Ok(grad_in)
}
