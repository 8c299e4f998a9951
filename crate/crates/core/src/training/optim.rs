//! Nesterov momentum in gradient-reuse form with coupled L2:
//!
//! ```text
//! g' = g + alpha w
//! v  = mu v + g'
//! w  = w - eta (g' + mu v)
//! ```

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn sgd_nesterov_step(weights: &mut Tensor, grad: &Tensor, velocity: &mut Tensor, eta: f64, mu: f64, alpha: f64) -> Result<()> {
    for (context, other) in [("gradient", grad.shape()), ("velocity", velocity.shape())] {
        if other != weights.shape() {
            return Err(Error::ShapeMismatch { context, expected: weights.shape().to_vec(), got: other.to_vec() });
        }
    }
    for ((w, &g), v) in weights.data_mut().iter_mut().zip(grad.data()).zip(velocity.data_mut()) {
        let g = g + alpha * *w;
        *v = mu * *v + g;
        *w -= eta * (g + mu * *v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(&[v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn plain_sgd_when_mu_and_alpha_vanish() {
        let mut w = t(&[1.0, -2.0]);
        let mut v = t(&[0.0, 0.0]);
        sgd_nesterov_step(&mut w, &t(&[0.5, 1.0]), &mut v, 0.1, 0.0, 0.0).unwrap();
        assert_eq!(w.data(), &[0.95, -2.1]);
    }

    #[test]
    fn coasting_on_velocity() {
        let (eta, mu) = (0.1, 0.9);
        let mut w = t(&[1.0]);
        let mut v = t(&[2.0]);
        sgd_nesterov_step(&mut w, &t(&[0.0]), &mut v, eta, mu, 0.0).unwrap();
        assert!((v.data()[0] - mu * 2.0).abs() < 1e-15);
        assert!((w.data()[0] - (1.0 - eta * mu * mu * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn pure_decay_shrinks_weights() {
        let (eta, mu, alpha) = (0.05, 0.9, 0.01);
        let mut w = t(&[3.0, -1.5]);
        let mut v = t(&[0.0, 0.0]);
        sgd_nesterov_step(&mut w, &t(&[0.0, 0.0]), &mut v, eta, mu, alpha).unwrap();
        let f = 1.0 - eta * alpha * (1.0 + mu);
        assert!((w.data()[0] - 3.0 * f).abs() < 1e-15);
        assert!((w.data()[1] + 1.5 * f).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut w = t(&[1.0, 2.0]);
        let mut v = t(&[0.0, 0.0]);
        assert!(sgd_nesterov_step(&mut w, &t(&[1.0]), &mut v, 0.1, 0.0, 0.0).is_err());
        let mut v1 = t(&[0.0]);
        assert!(sgd_nesterov_step(&mut w, &t(&[1.0, 1.0]), &mut v1, 0.1, 0.0, 0.0).is_err());
    }
}
