//! Random horizontal flips and translations. Pixels shifted in from outside
//! the image are 0, the mid-value of the normalized range.

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{mix_seed, Rng, Tensor};

/// Largest translation in either direction, in pixels.
pub const MAX_SHIFT: i64 = 4;

/// Flip (if asked) then translate one `[C, H, W]` image held in `src`.
/// Positive `dx` moves content right, positive `dy` moves it down.
fn transform_into(src: &[f64], dst: &mut [f64], h: usize, w: usize, flip: bool, dx: i64, dy: i64) {
    for (plane_in, plane_out) in src.chunks_exact(h * w).zip(dst.chunks_exact_mut(h * w)) {
        for y in 0..h {
            let sy = y as i64 - dy;
            for x in 0..w {
                let sx = x as i64 - dx;
                plane_out[y * w + x] = if sy < 0 || sy >= h as i64 || sx < 0 || sx >= w as i64 {
                    0.0
                } else {
                    let sx = if flip { w - 1 - sx as usize } else { sx as usize };
                    plane_in[sy as usize * w + sx]
                };
            }
        }
    }
}

/// Deterministic augmentation of a `[C, H, W]` image.
pub fn augment_with(image: &Tensor, flip: bool, dx: i64, dy: i64) -> Result<Tensor> {
    let &[_, h, w] = image.shape() else {
        return Err(Error::InvalidShape(format!("augmentation expects [C, H, W], got {:?}", image.shape())));
    };
    let mut out = image.zeros_like();
    transform_into(image.data(), out.data_mut(), h, w, flip, dx, dy);
    Ok(out)
}

fn draw(rng: &mut Rng) -> (bool, i64, i64) {
    let flip = rng.coin();
    let dx = rng.int_inclusive(-MAX_SHIFT, MAX_SHIFT);
    let dy = rng.int_inclusive(-MAX_SHIFT, MAX_SHIFT);
    (flip, dx, dy)
}

/// Flip with probability 1/2 and shift by `(dx, dy)` uniform on
/// `{-4..4}^2`.
pub fn augment(image: &Tensor, rng: &mut Rng) -> Result<Tensor> {
    let (flip, dx, dy) = draw(rng);
    augment_with(image, flip, dx, dy)
}

/// Augments every image of an `[N, C, H, W]` batch in place. Image `i` draws
/// from its own stream seeded by `mix_seed(seed, i)`, so the result does not
/// depend on scheduling.
pub fn augment_batch(images: &mut Tensor, seed: u64) -> Result<()> {
    let &[_, c, h, w] = images.shape() else {
        return Err(Error::InvalidShape(format!("batch augmentation expects [N, C, H, W], got {:?}", images.shape())));
    };
    par::for_each_chunk_mut(images.data_mut(), c * h * w, |i, img| {
        let (flip, dx, dy) = draw(&mut Rng::new(mix_seed(seed, i as u64)));
        let src = img.to_vec();
        transform_into(&src, img, h, w, flip, dx, dy);
    });
    Ok(())
}
