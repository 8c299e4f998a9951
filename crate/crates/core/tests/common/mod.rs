#![allow(dead_code)]

use shallow_core::data_io::{Dataset, Split, IMAGE_LEN};
use shallow_core::layers::ConvLayer;
use shallow_core::{Rng, Tensor};

/// Direct six-loop convolution of one `[C, H, W]` image with zero padding.
pub fn conv_oracle(input: &Tensor, layer: &ConvLayer) -> Vec<f64> {
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (k, p) = (layer.kernel, layer.padding);
    let (oh, ow) = (h + 2 * p - k + 1, w + 2 * p - k + 1);
    let x = input.data();
    let wt = layer.weights.data();
    let mut out = vec![0.0; layer.out_channels * oh * ow];
    for o in 0..layer.out_channels {
        for y in 0..oh {
            for xx in 0..ow {
                let mut acc = layer.bias.data()[o];
                for ci in 0..c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (y + ky) as isize - p as isize;
                            let ix = (xx + kx) as isize - p as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            acc += wt[((o * c + ci) * k + ky) * k + kx] * x[(ci * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                out[(o * oh + y) * ow + xx] = acc;
            }
        }
    }
    out
}

/// Random pixels with labels cycling through the ten classes.
pub fn noise_dataset(per_class: usize, seed: u64, split: Split) -> Dataset {
    let mut rng = Rng::new(seed);
    let n = per_class * 10;
    let labels = (0..n).map(|i| (i % 10) as u8).collect();
    let pixels = (0..n * IMAGE_LEN).map(|_| (rng.next_u64() & 0xff) as u8).collect();
    Dataset::new(pixels, labels, split).unwrap()
}

/// Images whose three channel means encode the class, plus noise; a small
/// network separates them within a few epochs.
pub fn learnable_dataset(per_class: usize, seed: u64, split: Split) -> Dataset {
    let mut rng = Rng::new(seed);
    let n = per_class * 10;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n * IMAGE_LEN);
    for i in 0..n {
        let class = i % 10;
        labels.push(class as u8);
        for ch in 0..3 {
            let base = 40.0 + 175.0 * (((class >> ch) & 1) as f64) * 0.9 + 8.0 * (class / 8) as f64 * ch as f64;
            let bright = if class >= 8 { 255.0 - base } else { base };
            for _ in 0..1024 {
                let v = bright + 30.0 * (rng.uniform() - 0.5);
                pixels.push(v.clamp(0.0, 255.0) as u8);
            }
        }
    }
    Dataset::new(pixels, labels, split).unwrap()
}

pub fn random_batch(n: usize, rng: &mut Rng) -> (Tensor, Vec<usize>) {
    let data = (0..n * IMAGE_LEN).map(|_| rng.uniform() * 2.0 - 1.0).collect();
    let labels = (0..n).map(|_| rng.int_inclusive(0, 9) as usize).collect();
    (Tensor::from_vec(&[n, 3, 32, 32], data).unwrap(), labels)
}
