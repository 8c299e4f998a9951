//! Central finite-difference check of a network's analytic gradients.

use crate::error::{Error, Result};
use crate::layers::batchnorm::Mode;
use crate::model::Network;
use crate::tensor::{Rng, Tensor};

pub const FD_STEP: f64 = 1e-6;
pub const MIN_SAMPLES_PER_PARAM: usize = 100;
/// Denominator floor for the relative error. A central difference of an O(1)
/// loss carries round-off near `f64::EPSILON / FD_STEP`, about 1e-10, so
/// gradients that are exactly zero (a conv bias feeding batch norm) would
/// otherwise report noise over noise.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub label: String,
    pub checked: usize,
    /// Coordinates whose +/- step changed a ReLU sign or pool winner.
    pub skipped_at_kink: usize,
    pub worst_rel_error: f64,
    pub worst_index: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params.iter().max_by(|a, b| a.worst_rel_error.total_cmp(&b.worst_rel_error))
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.worst_rel_error < self.tolerance)
    }
}

/// Compares train-mode analytic gradients of the mean cross-entropy with
/// central differences on up to `samples` random coordinates per parameter
/// tensor (all of them when the tensor is smaller).
pub fn gradient_check_report(
    net: &Network,
    images: &Tensor,
    labels: &[usize],
    tolerance: f64,
    samples: usize,
    rng: &mut Rng,
) -> Result<GradCheckReport> {
    let (_, grads, _) = net.loss_and_gradients(images, labels, Mode::Train)?;
    let labels_out = net.param_labels();
    let mut work = net.clone();
    let mut params = Vec::with_capacity(grads.0.len());

    for (p, grad) in grads.0.iter().enumerate() {
        let len = grad.len();
        let mut indices: Vec<usize> = (0..len).collect();
        if len > samples {
            rng.shuffle(&mut indices);
            indices.truncate(samples);
            indices.sort_unstable();
        }
        let mut check = ParamCheck {
            label: labels_out[p].clone(),
            checked: 0,
            skipped_at_kink: 0,
            worst_rel_error: 0.0,
            worst_index: 0,
        };
        for &i in &indices {
            let original = work.params()[p].data()[i];
            let mut eval = |value: f64| -> Result<(f64, Vec<u64>)> {
                work.params_mut()[p].data_mut()[i] = value;
                let pass = work.forward(images, Mode::Train)?;
                let (loss, _) = crate::layers::softmax::batch_cross_entropy(&pass.logits, labels)?;
                Ok((loss, work.activation_pattern(&pass)))
            };
            let (plus, pat_plus) = eval(original + FD_STEP)?;
            let (minus, pat_minus) = eval(original - FD_STEP)?;
            work.params_mut()[p].data_mut()[i] = original;
            if pat_plus != pat_minus {
                check.skipped_at_kink += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let err = relative_error(grad.data()[i], numeric);
            check.checked += 1;
            if err > check.worst_rel_error {
                check.worst_rel_error = err;
                check.worst_index = i;
            }
        }
        params.push(check);
    }
    Ok(GradCheckReport { tolerance, params })
}

/// [`gradient_check_report`] with at least [`MIN_SAMPLES_PER_PARAM`] samples,
/// failing with the worst offending location when any exceeds `tolerance`.
pub fn gradient_check(
    net: &Network,
    images: &Tensor,
    labels: &[usize],
    tolerance: f64,
    rng: &mut Rng,
) -> Result<GradCheckReport> {
    let report = gradient_check_report(net, images, labels, tolerance, MIN_SAMPLES_PER_PARAM, rng)?;
    if !report.passed() {
        let worst = report.worst().expect("a failing report has entries");
        return Err(Error::CheckFailed {
            location: format!("{}[{}]", worst.label, worst.worst_index),
            rel_error: worst.worst_rel_error,
            tolerance,
        });
    }
    Ok(report)
}
