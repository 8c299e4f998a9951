use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Passes gradient where the input was strictly positive. The subgradient at
/// zero is zero.
pub fn relu_backward(grad_out: &Tensor, input: &Tensor) -> Result<Tensor> {
    if grad_out.shape() != input.shape() {
        return Err(Error::ShapeMismatch {
            context: "relu backward",
            expected: input.shape().to_vec(),
            got: grad_out.shape().to_vec(),
        });
    }
    let mut g = grad_out.clone();
    g.data_mut().iter_mut().zip(input.data()).for_each(|(g, &x)| {
        if x <= 0.0 {
            *g = 0.0;
        }
    });
    Ok(g)
}
