//! Trainable networks instantiated from an [`ArchSpec`].

use crate::arch::{ArchSpec, LayerSpec};
use crate::error::{Error, Result};
use crate::layers::batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormLayer, BnCache, Mode};
use crate::layers::conv::{conv2d_backward_batch, conv2d_forward_batch, ConvLayer};
use crate::layers::dense::{dense_backward_batch, dense_forward_batch, DenseLayer};
use crate::layers::pool::{maxpool_backward, maxpool_forward, ArgmaxMap};
use crate::layers::relu::{relu_backward, relu_forward};
use crate::layers::softmax::batch_cross_entropy;
use crate::tensor::{Rng, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv(ConvLayer),
    BatchNorm(BatchNormLayer),
    Relu,
    MaxPool,
    Flatten,
    Dense(DenseLayer),
}

impl Layer {
    fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv(l) => vec![&l.weights, &l.bias],
            Layer::Dense(l) => vec![&l.weights, &l.bias],
            Layer::BatchNorm(l) => vec![&l.scale, &l.shift],
            _ => Vec::new(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv(l) => vec![&mut l.weights, &mut l.bias],
            Layer::Dense(l) => vec![&mut l.weights, &mut l.bias],
            Layer::BatchNorm(l) => vec![&mut l.scale, &mut l.shift],
            _ => Vec::new(),
        }
    }
}

/// What each layer keeps from the forward pass for its backward pass.
#[derive(Clone, Debug)]
enum LayerCache {
    /// The layer's input.
    Input(Tensor),
    Pool(ArgmaxMap),
    BatchNorm(BnCache),
    Flatten(Vec<usize>),
}

/// Activations of one forward pass over a batch.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub logits: Tensor,
    caches: Vec<LayerCache>,
}

/// Parameter gradients in [`Network::params`] order.
#[derive(Clone, Debug)]
pub struct Gradients(pub Vec<Tensor>);

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: ArchSpec,
    layers: Vec<Layer>,
}

impl Network {
    /// He-normal weights, zero biases, unit batch-norm scale.
    pub fn from_spec(spec: &ArchSpec, rng: &mut Rng) -> Result<Self> {
        Self::build(spec, Some(rng))
    }

    /// All weights zero; used as a target when restoring checkpoints.
    pub fn zeroed(spec: &ArchSpec) -> Result<Self> {
        Self::build(spec, None)
    }

    fn build(spec: &ArchSpec, mut rng: Option<&mut Rng>) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            layers.push(match *l {
                LayerSpec::Conv { in_channels, out_channels, kernel, padding } => Layer::Conv(match rng.as_deref_mut() {
                    Some(r) => ConvLayer::he_normal(in_channels, out_channels, kernel, padding, r)?,
                    None => ConvLayer::new(in_channels, out_channels, kernel, padding)?,
                }),
                LayerSpec::Dense { in_units, out_units } => Layer::Dense(match rng.as_deref_mut() {
                    Some(r) => DenseLayer::he_normal(in_units, out_units, r)?,
                    None => DenseLayer::new(in_units, out_units)?,
                }),
                LayerSpec::BatchNorm { channels } => Layer::BatchNorm(BatchNormLayer::new(channels)?),
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool => Layer::MaxPool,
                LayerSpec::Flatten { .. } => Layer::Flatten,
            });
        }
        Ok(Self { spec: spec.clone(), layers })
    }

    pub fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Trainable tensors in a fixed order: per layer, weights then bias
    /// (batch norm: scale then shift).
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    /// Human-readable name for each entry of [`Network::params`].
    pub fn param_labels(&self) -> Vec<String> {
        let (mut conv, mut dense, mut bn) = (0, 0, 0);
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Conv(_) => {
                    conv += 1;
                    out.push(format!("conv{conv}.weight"));
                    out.push(format!("conv{conv}.bias"));
                }
                Layer::Dense(_) => {
                    dense += 1;
                    out.push(format!("fc{dense}.weight"));
                    out.push(format!("fc{dense}.bias"));
                }
                Layer::BatchNorm(_) => {
                    bn += 1;
                    out.push(format!("bn{bn}.scale"));
                    out.push(format!("bn{bn}.shift"));
                }
                _ => {}
            }
        }
        out
    }

    fn check_input(&self, input: &Tensor) -> Result<usize> {
        let shape = input.shape();
        if shape.len() != 4 || shape[1..] != self.spec.input {
            let mut expected = vec![0];
            expected.extend_from_slice(&self.spec.input);
            return Err(Error::ShapeMismatch { context: "network input", expected, got: shape.to_vec() });
        }
        Ok(shape[0])
    }

    /// Forward pass over a `[N, C, H, W]` batch. Layers are not modified; in
    /// train mode call [`Network::update_running_stats`] afterwards.
    pub fn forward(&self, input: &Tensor, mode: Mode) -> Result<ForwardPass> {
        let n = self.check_input(input)?;
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = match layer {
                Layer::Conv(l) => (conv2d_forward_batch(&x, l)?, LayerCache::Input(x)),
                Layer::Dense(l) => (dense_forward_batch(&x, l)?, LayerCache::Input(x)),
                Layer::Relu => (relu_forward(&x), LayerCache::Input(x)),
                Layer::MaxPool => {
                    let (y, map) = maxpool_forward(&x)?;
                    (y, LayerCache::Pool(map))
                }
                Layer::BatchNorm(l) => {
                    let (y, c) = batchnorm_forward(&x, l, mode)?;
                    (y, LayerCache::BatchNorm(c))
                }
                Layer::Flatten => {
                    let shape = x.shape().to_vec();
                    let features = x.len() / n;
                    (x.reshape(&[n, features])?, LayerCache::Flatten(shape))
                }
            };
            caches.push(cache);
            x = next;
        }
        Ok(ForwardPass { logits: x, caches })
    }

    /// Back-propagates `grad_logits` through the cached pass.
    pub fn backward(&self, pass: &ForwardPass, grad_logits: &Tensor) -> Result<Gradients> {
        if grad_logits.shape() != pass.logits.shape() {
            return Err(Error::ShapeMismatch {
                context: "grad_logits",
                expected: pass.logits.shape().to_vec(),
                got: grad_logits.shape().to_vec(),
            });
        }
        let mut per_layer: Vec<Vec<Tensor>> = vec![Vec::new(); self.layers.len()];
        let mut g = grad_logits.clone();
        for (i, (layer, cache)) in self.layers.iter().zip(&pass.caches).enumerate().rev() {
            let need_input = i > 0;
            g = match (layer, cache) {
                (Layer::Conv(l), LayerCache::Input(x)) => {
                    let grads = conv2d_backward_batch(&g, x, l, need_input)?;
                    per_layer[i] = vec![grads.weights, grads.bias];
                    match grads.input {
                        Some(t) => t,
                        None => break,
                    }
                }
                (Layer::Dense(l), LayerCache::Input(x)) => {
                    let grads = dense_backward_batch(&g, x, l, need_input)?;
                    per_layer[i] = vec![grads.weights, grads.bias];
                    match grads.input {
                        Some(t) => t,
                        None => break,
                    }
                }
                (Layer::Relu, LayerCache::Input(x)) => relu_backward(&g, x)?,
                (Layer::MaxPool, LayerCache::Pool(map)) => maxpool_backward(&g, map)?,
                (Layer::BatchNorm(l), LayerCache::BatchNorm(c)) => {
                    let grads = batchnorm_backward(&g, c, l)?;
                    per_layer[i] = vec![grads.scale, grads.shift];
                    grads.input
                }
                (Layer::Flatten, LayerCache::Flatten(shape)) => g.reshape(shape)?,
                _ => unreachable!("cache kind always matches its layer"),
            };
        }
        Ok(Gradients(per_layer.into_iter().flatten().collect()))
    }

    /// ReLU on/off bits and pool winners of a pass. Two passes with equal
    /// patterns evaluate the same smooth piece of the network.
    pub(crate) fn activation_pattern(&self, pass: &ForwardPass) -> Vec<u64> {
        let mut out = Vec::new();
        for (layer, cache) in self.layers.iter().zip(&pass.caches) {
            match (layer, cache) {
                (Layer::Relu, LayerCache::Input(x)) => {
                    for chunk in x.data().chunks(64) {
                        out.push(chunk.iter().enumerate().fold(0u64, |acc, (i, &v)| acc | (u64::from(v > 0.0) << i)));
                    }
                }
                (Layer::MaxPool, LayerCache::Pool(map)) => out.extend(map.indices().iter().map(|&i| i as u64)),
                _ => {}
            }
        }
        out
    }

    /// Folds the batch statistics of a train-mode pass into every batch-norm
    /// layer's running averages.
    pub fn update_running_stats(&mut self, pass: &ForwardPass) {
        for (layer, cache) in self.layers.iter_mut().zip(&pass.caches) {
            if let (Layer::BatchNorm(l), LayerCache::BatchNorm(c)) = (layer, cache) {
                l.update_running_stats(c);
            }
        }
    }

    /// Mean cross-entropy and its parameter gradients for one batch.
    pub fn loss_and_gradients(&self, images: &Tensor, labels: &[usize], mode: Mode) -> Result<(f64, Gradients, ForwardPass)> {
        let pass = self.forward(images, mode)?;
        let (loss, grad_logits) = batch_cross_entropy(&pass.logits, labels)?;
        let grads = self.backward(&pass, &grad_logits)?;
        Ok((loss, grads, pass))
    }

    /// Mean cross-entropy only.
    pub fn loss(&self, images: &Tensor, labels: &[usize], mode: Mode) -> Result<f64> {
        let pass = self.forward(images, mode)?;
        Ok(batch_cross_entropy(&pass.logits, labels)?.0)
    }
}

/// Anything that maps a batch of images to class scores.
pub trait Classifier {
    /// `[N, C, H, W] -> [N, classes]`
    fn scores(&self, images: &Tensor) -> Result<Tensor>;
}

impl Classifier for Network {
    fn scores(&self, images: &Tensor) -> Result<Tensor> {
        Ok(self.forward(images, Mode::Eval)?.logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{build_lenet, build_vgg16};

    fn batch(rng: &mut Rng, n: usize) -> Tensor {
        Tensor::from_vec(&[n, 3, 32, 32], (0..n * 3072).map(|_| rng.uniform() * 2.0 - 1.0).collect()).unwrap()
    }

    #[test]
    fn lenet_forward_shapes_and_param_layout() {
        let spec = build_lenet(2, 8.0 / 3.0, None).unwrap();
        let mut rng = Rng::new(1);
        let net = Network::from_spec(&spec, &mut rng).unwrap();
        assert_eq!(net.params().len(), 10);
        assert_eq!(net.param_labels()[0], "conv1.weight");
        assert_eq!(net.param_labels()[9], "fc3.bias");
        let pass = net.forward(&batch(&mut rng, 3), Mode::Train).unwrap();
        assert_eq!(pass.logits.shape(), &[3, 10]);
    }

    #[test]
    fn forward_is_deterministic() {
        let spec = build_vgg16(1, 2.0).unwrap();
        let mut rng = Rng::new(2);
        let net = Network::from_spec(&spec, &mut rng).unwrap();
        let x = batch(&mut rng, 2);
        let a = net.forward(&x, Mode::Train).unwrap().logits;
        let b = net.forward(&x, Mode::Train).unwrap().logits;
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_input_shape() {
        let net = Network::zeroed(&build_lenet(1, 2.0, None).unwrap()).unwrap();
        assert!(net.forward(&Tensor::zeros(&[1, 3, 28, 28]).unwrap(), Mode::Eval).is_err());
    }

    #[test]
    fn gradients_align_with_params() {
        let spec = build_lenet(2, 8.0 / 3.0, None).unwrap();
        let mut rng = Rng::new(3);
        let net = Network::from_spec(&spec, &mut rng).unwrap();
        let (_, grads, _) = net.loss_and_gradients(&batch(&mut rng, 4), &[0, 1, 2, 3], Mode::Train).unwrap();
        let params = net.params();
        assert_eq!(grads.0.len(), params.len());
        for (g, p) in grads.0.iter().zip(params) {
            assert_eq!(g.shape(), p.shape());
        }
    }
}
