//! Per-channel batch normalization over `[N, C, ...]` inputs.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Normalize by batch statistics.
    Train,
    /// Normalize by running statistics.
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormLayer {
    pub channels: usize,
    pub scale: Tensor,
    pub shift: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub epsilon: f64,
    /// Weight of the newest batch in the running averages.
    pub momentum: f64,
}

impl BatchNormLayer {
    pub fn new(channels: usize) -> Result<Self> {
        Ok(Self {
            channels,
            scale: Tensor::new(&[channels], 1.0)?,
            shift: Tensor::zeros(&[channels])?,
            running_mean: Tensor::zeros(&[channels])?,
            running_var: Tensor::new(&[channels], 1.0)?,
            epsilon: DEFAULT_EPSILON,
            momentum: DEFAULT_MOMENTUM,
        })
    }

    /// Folds the batch statistics of a train-mode pass into the running
    /// averages. The running variance uses the unbiased batch variance.
    pub fn update_running_stats(&mut self, cache: &BnCache) {
        if cache.mode != Mode::Train {
            return;
        }
        let m = self.momentum;
        let count = cache.count as f64;
        let correction = count / (count - 1.0);
        for c in 0..self.channels {
            let rm = &mut self.running_mean.data_mut()[c];
            *rm = (1.0 - m) * *rm + m * cache.mean[c];
            let rv = &mut self.running_var.data_mut()[c];
            *rv = (1.0 - m) * *rv + m * cache.var[c] * correction;
        }
    }

    fn layout(&self, shape: &[usize]) -> Result<(usize, usize)> {
        if shape.len() < 2 || shape[1] != self.channels {
            return Err(Error::ShapeMismatch {
                context: "batchnorm input",
                expected: vec![0, self.channels],
                got: shape.to_vec(),
            });
        }
        Ok((shape[0], shape[2..].iter().product()))
    }
}

/// Saved forward state needed by the backward pass.
#[derive(Clone, Debug)]
pub struct BnCache {
    pub mode: Mode,
    pub x_hat: Tensor,
    pub mean: Vec<f64>,
    /// Biased batch variance (train) or running variance (eval).
    pub var: Vec<f64>,
    pub inv_std: Vec<f64>,
    /// Elements per channel.
    pub count: usize,
}

/// Normalizes `input` without touching the layer; apply
/// [`BatchNormLayer::update_running_stats`] afterwards to train the running
/// averages.
pub fn batchnorm_forward(input: &Tensor, layer: &BatchNormLayer, mode: Mode) -> Result<(Tensor, BnCache)> {
    let (n, spatial) = layer.layout(input.shape())?;
    if mode == Mode::Train && n < 2 {
        return Err(Error::InvalidBatch(format!("train-mode batch normalization needs at least 2 samples, got {n}")));
    }
    let channels = layer.channels;
    let x = input.data();
    let count = n * spatial;
    let at = |s: usize, c: usize| s * channels * spatial + c * spatial;

    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![0.0; channels];
            let mut var = vec![0.0; channels];
            for c in 0..channels {
                let mut acc = 0.0;
                for s in 0..n {
                    acc += x[at(s, c)..at(s, c) + spatial].iter().sum::<f64>();
                }
                mean[c] = acc / count as f64;
                let mut sq = 0.0;
                for s in 0..n {
                    sq += x[at(s, c)..at(s, c) + spatial].iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>();
                }
                var[c] = sq / count as f64;
            }
            (mean, var)
        }
        Mode::Eval => (layer.running_mean.data().to_vec(), layer.running_var.data().to_vec()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + layer.epsilon).sqrt()).collect();

    let mut x_hat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for s in 0..n {
        for c in 0..channels {
            let (g, b) = (layer.scale.data()[c], layer.shift.data()[c]);
            for i in at(s, c)..at(s, c) + spatial {
                let xh = (x[i] - mean[c]) * inv_std[c];
                x_hat[i] = xh;
                out[i] = g * xh + b;
            }
        }
    }
    let cache = BnCache { mode, x_hat: Tensor::from_vec(input.shape(), x_hat)?, mean, var, inv_std, count };
    Ok((Tensor::from_vec(input.shape(), out)?, cache))
}

#[derive(Clone, Debug)]
pub struct BnGradients {
    pub input: Tensor,
    pub scale: Tensor,
    pub shift: Tensor,
}

/// Exact gradient of the map computed by [`batchnorm_forward`] in the mode
/// recorded in `cache`.
pub fn batchnorm_backward(grad_out: &Tensor, cache: &BnCache, layer: &BatchNormLayer) -> Result<BnGradients> {
    if grad_out.shape() != cache.x_hat.shape() {
        return Err(Error::ShapeMismatch {
            context: "batchnorm backward",
            expected: cache.x_hat.shape().to_vec(),
            got: grad_out.shape().to_vec(),
        });
    }
    let (n, spatial) = layer.layout(grad_out.shape())?;
    let channels = layer.channels;
    let dy = grad_out.data();
    let xh = cache.x_hat.data();
    let at = |s: usize, c: usize| s * channels * spatial + c * spatial;

    let mut dscale = vec![0.0; channels];
    let mut dshift = vec![0.0; channels];
    for c in 0..channels {
        for s in 0..n {
            for i in at(s, c)..at(s, c) + spatial {
                dshift[c] += dy[i];
                dscale[c] += dy[i] * xh[i];
            }
        }
    }

    let m = cache.count as f64;
    let mut dx = vec![0.0; dy.len()];
    for c in 0..channels {
        let g = layer.scale.data()[c];
        let k = g * cache.inv_std[c];
        for s in 0..n {
            for i in at(s, c)..at(s, c) + spatial {
                dx[i] = match cache.mode {
                    // d x_hat = g dy; dx = inv_std/m (m dxh - sum dxh - xh sum(dxh xh))
                    Mode::Train => k * (dy[i] - dshift[c] / m - xh[i] * dscale[c] / m),
                    Mode::Eval => k * dy[i],
                };
            }
        }
    }
    Ok(BnGradients {
        input: Tensor::from_vec(grad_out.shape(), dx)?,
        scale: Tensor::from_vec(&[channels], dscale)?,
        shift: Tensor::from_vec(&[channels], dshift)?,
    })
}
