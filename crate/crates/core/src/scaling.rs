//! Power-law error scaling `eps(d) = A d^(-rho)` and the complexity-versus-error
//! relations derived from it.
//!
//! Fits are ordinary least squares on `(ln d, ln eps)` unless the weighted
//! variant is requested. GMAdd means `1e9` MAdds wherever it appears in I/O.

use std::fmt;

use crate::complexity::QuadFit;
use crate::error::{Error, Result};

pub const GMADD: f64 = 1e9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingPoint {
    pub d: f64,
    pub epsilon: f64,
    pub std: Option<f64>,
}

impl ScalingPoint {
    pub fn new(d: f64, epsilon: f64) -> Result<Self> {
        Self::with_std(d, epsilon, None)
    }

    pub fn with_std(d: f64, epsilon: f64, std: Option<f64>) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Range(format!("d must be positive, got {d}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Range(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if let Some(s) = std {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Range(format!("std must be non-negative, got {s}")));
            }
        }
        Ok(Self { d, epsilon, std })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    /// Pre-factor `A`.
    pub prefactor: f64,
    /// Exponent `rho`.
    pub exponent: f64,
    /// Sum of squared residuals in log space.
    pub residual: f64,
}

impl fmt::Display for PowerLawFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "eps = {} / d^{}", self.prefactor, self.exponent)
    }
}

pub(crate) fn round_significant(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    // keep the power of ten an exact integer on whichever side it is applied
    let p = digits as i32 - 1 - x.abs().log10().floor() as i32;
    if p >= 0 {
        let s = 10f64.powi(p);
        (x * s).round() / s
    } else {
        let s = 10f64.powi(-p);
        (x / s).round() * s
    }
}

impl PowerLawFit {
    /// `A` and `rho` rounded to `digits` significant digits, the precision
    /// at which fitted laws are usually reported and then extrapolated.
    pub fn rounded(&self, digits: u32) -> Self {
        Self {
            prefactor: round_significant(self.prefactor, digits),
            exponent: round_significant(self.exponent, digits),
            residual: self.residual,
        }
    }
}

/// Weighted least-squares line; returns `(slope, intercept, weighted rss)`.
fn line_fit(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<(f64, f64, f64)> {
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..xs.len()).map(w).sum();
    let mx = (0..xs.len()).map(|i| w(i) * xs[i]).sum::<f64>() / sw;
    let my = (0..xs.len()).map(|i| w(i) * ys[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..xs.len()).map(|i| w(i) * (xs[i] - mx).powi(2)).sum();
    if !(sxx > 1e-300) || xs.len() < 2 {
        return Err(Error::Fit("need at least two distinct abscissae".into()));
    }
    let sxy: f64 = (0..xs.len()).map(|i| w(i) * (xs[i] - mx) * (ys[i] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = (0..xs.len()).map(|i| w(i) * (ys[i] - intercept - slope * xs[i]).powi(2)).sum();
    Ok((slope, intercept, rss))
}

fn fit_impl(points: &[ScalingPoint], weights: Option<&[f64]>) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(Error::Fit(format!("power-law fit needs at least 2 points, got {}", points.len())));
    }
    for p in points {
        if !(p.epsilon > 0.0 && p.epsilon < 1.0) || !(p.d > 0.0) {
            return Err(Error::Fit(format!("point (d={}, eps={}) outside the valid domain", p.d, p.epsilon)));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.d.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.epsilon.ln()).collect();
    let (slope, intercept, rss) = line_fit(&xs, &ys, weights)?;
    Ok(PowerLawFit { prefactor: intercept.exp(), exponent: -slope, residual: rss })
}

/// Unweighted OLS on `(ln d, ln eps)`: slope `-rho`, intercept `ln A`.
pub fn fit_power_law(points: &[ScalingPoint]) -> Result<PowerLawFit> {
    fit_impl(points, None)
}

/// Weighted variant: each point weighted by `1 / sigma_ln^2` with
/// `sigma_ln = std / eps`. Every point needs a positive std.
pub fn fit_power_law_weighted(points: &[ScalingPoint]) -> Result<PowerLawFit> {
    let weights = points
        .iter()
        .map(|p| match p.std {
            Some(s) if s > 0.0 => Ok((p.epsilon / s).powi(2)),
            _ => Err(Error::Fit(format!("weighted fit needs a positive std at d={}", p.d))),
        })
        .collect::<Result<Vec<f64>>>()?;
    fit_impl(points, Some(&weights))
}

/// `A d^(-rho)`.
pub fn extrapolate_error(fit: &PowerLawFit, d: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Range(format!("d must be positive, got {d}")));
    }
    Ok(fit.prefactor * d.powf(-fit.exponent))
}

/// `(A / eps)^(1/rho)`.
pub fn invert_error(fit: &PowerLawFit, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Range(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(fit.exponent > 0.0) {
        return Err(Error::NoSolution(format!("exponent {} is not positive; error never decays", fit.exponent)));
    }
    Ok((fit.prefactor / epsilon).powf(1.0 / fit.exponent))
}

/// MAdds needed to reach `epsilon`: the complexity polynomial evaluated at
/// the filter count the power law predicts for that error.
pub fn complexity_at_error(fit: &PowerLawFit, poly: &QuadFit, epsilon: f64) -> Result<f64> {
    Ok(poly.eval(invert_error(fit, epsilon)?))
}

/// Slope of `ln(complexity)` against `ln(1/eps)` over `(eps, complexity)` pairs.
pub fn complexity_error_exponent(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("exponent fit needs at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(e, c)| !(e > 0.0 && c > 0.0)) {
        return Err(Error::Fit("epsilon and complexity must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| (1.0 / p.0).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(line_fit(&xs, &ys, None)?.0)
}

/// Complexity of architecture A over that of architecture B at equal error.
pub fn complexity_ratio(fit_a: &PowerLawFit, poly_a: &QuadFit, fit_b: &PowerLawFit, poly_b: &QuadFit, epsilon: f64) -> Result<f64> {
    Ok(complexity_at_error(fit_a, poly_a, epsilon)? / complexity_at_error(fit_b, poly_b, epsilon)?)
}

/// Error at a fractional filter count between two measured points, assuming
/// a local power law: `ln eps` is linear in `ln d` between the endpoints, so
/// the endpoint nearer to `target` in log distance carries more weight.
pub fn log_interpolate(target: f64, lo: &ScalingPoint, hi: &ScalingPoint) -> Result<f64> {
    if !(lo.d < hi.d) {
        return Err(Error::Range(format!("need lo.d < hi.d, got {} and {}", lo.d, hi.d)));
    }
    if !(target >= lo.d && target <= hi.d) {
        return Err(Error::Range(format!("target {target} outside [{}, {}]", lo.d, hi.d)));
    }
    let w_hi = (target.ln() - lo.d.ln()) / (hi.d.ln() - lo.d.ln());
    Ok(((1.0 - w_hi) * lo.epsilon.ln() + w_hi * hi.epsilon.ln()).exp())
}
