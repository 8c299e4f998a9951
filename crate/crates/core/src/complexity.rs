//! Multiply-add (MAdd) accounting and quadratic complexity fits.
//!
//! A conv layer costs `H_out * W_out * k^2 * C_in * C_out` MAdds per image and
//! a dense layer `in * out`. Biases, pooling, activations and batch norm are
//! not counted. The forward-plus-backward estimate is three times the forward
//! count (one product for the forward pass, two for the input and weight
//! gradients).

use std::fmt;

use crate::arch::{ArchSpec, LayerSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountMode {
    Forward,
    ForwardBackward,
}

impl CountMode {
    fn multiplier(self) -> u64 {
        match self {
            CountMode::Forward => 1,
            CountMode::ForwardBackward => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerMAdds {
    /// Position in [`ArchSpec::layers`].
    pub index: usize,
    /// `conv1`, `conv2`, ..., `fc1`, ...
    pub label: String,
    pub madds: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MAddReport {
    pub mode: CountMode,
    /// Conv and dense layers only; everything else counts zero.
    pub layers: Vec<LayerMAdds>,
    pub total: u64,
}

impl MAddReport {
    /// `(columns, rows)` for CSV emission: `layer,label,madds` plus a
    /// trailing `total` row.
    pub fn table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let columns = ["layer", "label", "madds"].map(String::from).to_vec();
        let mut rows: Vec<Vec<String>> = self
            .layers
            .iter()
            .map(|l| vec![l.index.to_string(), l.label.clone(), l.madds.to_string()])
            .collect();
        rows.push(vec!["total".into(), "total".into(), self.total.to_string()]);
        (columns, rows)
    }
}

/// MAdds for one input image.
pub fn madds(spec: &ArchSpec, mode: CountMode) -> Result<MAddReport> {
    let shapes = spec.layer_shapes()?;
    let (mut conv, mut dense) = (0, 0);
    let mut layers = Vec::new();
    for (i, layer) in spec.layers.iter().enumerate() {
        let count = match *layer {
            LayerSpec::Conv { in_channels, out_channels, kernel, .. } => {
                conv += 1;
                let (oh, ow) = (shapes[i][1] as u64, shapes[i][2] as u64);
                Some((format!("conv{conv}"), oh * ow * (kernel * kernel) as u64 * in_channels as u64 * out_channels as u64))
            }
            LayerSpec::Dense { in_units, out_units } => {
                dense += 1;
                Some((format!("fc{dense}"), in_units as u64 * out_units as u64))
            }
            _ => None,
        };
        if let Some((label, m)) = count {
            layers.push(LayerMAdds { index: i, label, madds: m * mode.multiplier() });
        }
    }
    let total = layers.iter().map(|l| l.madds).sum();
    Ok(MAddReport { mode, layers, total })
}

/// Least-squares quadratic `a d^2 + b d + c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Residual sum of squares.
    pub rss: f64,
    /// `sqrt(rss / sum(y^2))`.
    pub relative_residual: f64,
}

impl QuadFit {
    pub fn eval(&self, d: f64) -> f64 {
        (self.a * d + self.b) * d + self.c
    }
}

impl fmt::Display for QuadFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} d^2 + {} d + {}", self.a, self.b, self.c)
    }
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
pub(crate) fn solve_linear<const N: usize>(mut m: [[f64; N]; N], mut rhs: [f64; N]) -> Option<[f64; N]> {
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..N {
            let f = m[row][col] / m[col][col];
            for k in col..N {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = (row + 1..N).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Some(x)
}

/// Fits `a d^2 + b d + c` to `(d, madds)` points by least squares. The
/// abscissae are centered and scaled before forming the normal equations.
pub fn quad_fit(points: &[(f64, f64)]) -> Result<QuadFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Fit(format!("quadratic fit needs 3 distinct d values, got {}", distinct.len())));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Fit("non-finite point".into()));
    }
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let spread = points.iter().map(|p| (p.0 - mean).abs()).fold(0.0, f64::max);
    let yscale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for &(d, y) in points {
        let t = (d - mean) / spread;
        let row = [t * t, t, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y / yscale;
        }
    }
    let [alpha, beta, gamma] = solve_linear(ata, aty).ok_or_else(|| Error::Fit("degenerate quadratic design".into()))?;
    let (alpha, beta, gamma) = (alpha * yscale, beta * yscale, gamma * yscale);
    let s2 = spread * spread;
    let a = alpha / s2;
    let b = beta / spread - 2.0 * alpha * mean / s2;
    let c = alpha * mean * mean / s2 - beta * mean / spread + gamma;

    let mut fit = QuadFit { a, b, c, rss: 0.0, relative_residual: 0.0 };
    fit.rss = points.iter().map(|&(d, y)| (fit.eval(d) - y).powi(2)).sum();
    let norm: f64 = points.iter().map(|p| p.1 * p.1).sum();
    fit.relative_residual = if norm > 0.0 { (fit.rss / norm).sqrt() } else { 0.0 };
    Ok(fit)
}
