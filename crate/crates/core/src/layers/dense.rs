use crate::error::{Error, Result};
use crate::linalg::gemm;
use crate::par;
use crate::tensor::{he_normal_init, Rng, Tensor};

/// Fully connected layer, `out = W in + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub in_units: usize,
    pub out_units: usize,
    /// `[out, in]`
    pub weights: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn new(in_units: usize, out_units: usize) -> Result<Self> {
        Ok(Self {
            in_units,
            out_units,
            weights: Tensor::zeros(&[out_units, in_units])?,
            bias: Tensor::zeros(&[out_units])?,
        })
    }

    pub fn he_normal(in_units: usize, out_units: usize, rng: &mut Rng) -> Result<Self> {
        let mut layer = Self::new(in_units, out_units)?;
        layer.weights = he_normal_init(&[out_units, in_units], in_units, rng)?;
        Ok(layer)
    }

    fn batch_rows(&self, input: &Tensor) -> Result<usize> {
        match *input.shape() {
            [n, f] if f == self.in_units => Ok(n),
            _ => Err(Error::ShapeMismatch {
                context: "dense input",
                expected: vec![0, self.in_units],
                got: input.shape().to_vec(),
            }),
        }
    }
}

/// Batched forward pass: `[N, in] -> [N, out]`.
pub fn dense_forward_batch(input: &Tensor, layer: &DenseLayer) -> Result<Tensor> {
    let n = layer.batch_rows(input)?;
    let (fin, fout) = (layer.in_units, layer.out_units);
    let mut out = vec![0.0; n * fout];
    par::for_each_chunk_mut(&mut out, par::CHUNK * fout, |ci, dst| {
        let rows = dst.len() / fout;
        let x = &input.data()[ci * par::CHUNK * fin..][..rows * fin];
        for row in dst.chunks_mut(fout) {
            row.copy_from_slice(layer.bias.data());
        }
        gemm(rows, fin, fout, 1.0, x, false, layer.weights.data(), true, 1.0, dst);
    });
    Tensor::from_vec(&[n, fout], out)
}

#[derive(Clone, Debug)]
pub struct DenseGradients {
    pub input: Option<Tensor>,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Batched backward pass; parameter gradients are summed over the batch.
pub fn dense_backward_batch(
    grad_out: &Tensor,
    input: &Tensor,
    layer: &DenseLayer,
    need_input_grad: bool,
) -> Result<DenseGradients> {
    let n = layer.batch_rows(input)?;
    let (fin, fout) = (layer.in_units, layer.out_units);
    if grad_out.shape() != [n, fout] {
        return Err(Error::ShapeMismatch {
            context: "dense backward grad_out",
            expected: vec![n, fout],
            got: grad_out.shape().to_vec(),
        });
    }
    let mut gw = vec![0.0; fout * fin];
    gemm(fout, n, fin, 1.0, grad_out.data(), true, input.data(), false, 0.0, &mut gw);
    let mut gb = vec![0.0; fout];
    for row in grad_out.data().chunks(fout) {
        gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    let gin = if need_input_grad {
        let mut gin = vec![0.0; n * fin];
        par::for_each_chunk_mut(&mut gin, par::CHUNK * fin, |ci, dst| {
            let rows = dst.len() / fin;
            let g = &grad_out.data()[ci * par::CHUNK * fout..][..rows * fout];
            gemm(rows, fout, fin, 1.0, g, false, layer.weights.data(), false, 0.0, dst);
        });
        Some(Tensor::from_vec(&[n, fin], gin)?)
    } else {
        None
    };
    Ok(DenseGradients {
        input: gin,
        weights: Tensor::from_vec(&[fout, fin], gw)?,
        bias: Tensor::from_vec(&[fout], gb)?,
    })
}

/// Single-sample forward pass: `[in] -> [out]`.
pub fn dense_forward(input: &Tensor, layer: &DenseLayer) -> Result<Tensor> {
    if input.shape() != [layer.in_units] {
        return Err(Error::ShapeMismatch {
            context: "dense input",
            expected: vec![layer.in_units],
            got: input.shape().to_vec(),
        });
    }
    dense_forward_batch(&input.clone().reshape(&[1, layer.in_units])?, layer)?.reshape(&[layer.out_units])
}

/// Single-sample backward pass; always returns the input gradient.
pub fn dense_backward(grad_out: &Tensor, input: &Tensor, layer: &DenseLayer) -> Result<DenseGradients> {
    if input.shape() != [layer.in_units] || grad_out.shape() != [layer.out_units] {
        return Err(Error::ShapeMismatch {
            context: "dense backward",
            expected: vec![layer.out_units, layer.in_units],
            got: [grad_out.shape(), input.shape()].concat(),
        });
    }
    let mut g = dense_backward_batch(
        &grad_out.clone().reshape(&[1, layer.out_units])?,
        &input.clone().reshape(&[1, layer.in_units])?,
        layer,
        true,
    )?;
    g.input = g.input.map(|t| t.reshape(&[layer.in_units])).transpose()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut layer = DenseLayer::new(4, 4).unwrap();
        for i in 0..4 {
            layer.weights.data_mut()[i * 4 + i] = 1.0;
        }
        let x = Tensor::from_vec(&[4], vec![1.0, -2.0, 3.5, 0.25]).unwrap();
        assert_eq!(dense_forward(&x, &layer).unwrap(), x);
    }

    #[test]
    fn lenet_head_weight_count() {
        assert_eq!(DenseLayer::new(84, 10).unwrap().weights.len(), 840);
    }

    #[test]
    fn dimension_mismatch() {
        let layer = DenseLayer::new(3, 2).unwrap();
        assert!(dense_forward(&Tensor::zeros(&[4]).unwrap(), &layer).is_err());
        assert!(dense_forward_batch(&Tensor::zeros(&[2, 4]).unwrap(), &layer).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::new(17);
        let mut layer = DenseLayer::he_normal(7, 5, &mut rng).unwrap();
        layer.bias.data_mut().iter_mut().for_each(|b| *b = rng.normal());
        let x = Tensor::from_vec(&[7], (0..7).map(|_| rng.normal()).collect()).unwrap();
        let r: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let loss = |x: &Tensor, l: &DenseLayer| -> f64 {
            dense_forward(x, l).unwrap().data().iter().zip(&r).map(|(a, b)| a * b).sum()
        };
        let g = dense_backward(&Tensor::from_vec(&[5], r.clone()).unwrap(), &x, &layer).unwrap();
        let h = 1e-6;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
        for i in 0..layer.weights.len() {
            let (mut p, mut m) = (layer.clone(), layer.clone());
            p.weights.data_mut()[i] += h;
            m.weights.data_mut()[i] -= h;
            let fd = (loss(&x, &p) - loss(&x, &m)) / (2.0 * h);
            assert!(rel(fd, g.weights.data()[i]) < 1e-5);
        }
        for i in 0..5 {
            let (mut p, mut m) = (layer.clone(), layer.clone());
            p.bias.data_mut()[i] += h;
            m.bias.data_mut()[i] -= h;
            let fd = (loss(&x, &p) - loss(&x, &m)) / (2.0 * h);
            assert!(rel(fd, g.bias.data()[i]) < 1e-5);
        }
        let gi = g.input.unwrap();
        for i in 0..7 {
            let (mut p, mut m) = (x.clone(), x.clone());
            p.data_mut()[i] += h;
            m.data_mut()[i] -= h;
            let fd = (loss(&p, &layer) - loss(&m, &layer)) / (2.0 * h);
            assert!(rel(fd, gi.data()[i]) < 1e-5);
        }
    }
}
