//! Published measurements bundled with the crate, and recomputation of the
//! derived tables from first principles for side-by-side comparison.
//!
//! The CSV files under `data/` are compiled in, so nothing here touches the
//! filesystem.

use std::fmt;
use std::str::FromStr;

use crate::arch::{build_lenet, build_vgg16, Family};
use crate::complexity::{madds, quad_fit, CountMode, QuadFit};
use crate::data_io::parse_table;
use crate::error::{Error, Result};
use crate::scaling::{complexity_at_error, round_significant, complexity_ratio, fit_power_law, PowerLawFit, ScalingPoint, GMADD};

const FIG1: &str = include_str!("../data/fig1_lenet.csv");
const FIG1_RAW: &str = include_str!("../data/fig1_lenet_raw.csv");
const FIG2: &str = include_str!("../data/fig2_vgg.csv");
const FIG3A: &str = include_str!("../data/fig3a_madds.csv");
const FIG3B: &str = include_str!("../data/fig3b_complexity.csv");
const FIG3C: &str = include_str!("../data/fig3c_ratio.csv");
const FIG4A_4_3: &str = include_str!("../data/fig4a_constant_4_3.csv");
const FIG4A_16_3: &str = include_str!("../data/fig4a_constant_16_3.csv");
const FIG4B_1_5: &str = include_str!("../data/fig4b_growth_1_5.csv");
const FIG4B_2_5: &str = include_str!("../data/fig4b_growth_2_5.csv");

/// Measured error-versus-width series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Series {
    LeNet,
    Vgg16,
    LeNetConstant4_3,
    LeNetConstant16_3,
    Vgg16Growth1_5,
    Vgg16Growth2_5,
}

impl Series {
    pub const ALL: [Series; 6] = [
        Series::LeNet,
        Series::Vgg16,
        Series::LeNetConstant4_3,
        Series::LeNetConstant16_3,
        Series::Vgg16Growth1_5,
        Series::Vgg16Growth2_5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Series::LeNet => "lenet",
            Series::Vgg16 => "vgg16",
            Series::LeNetConstant4_3 => "lenet-constant-4/3",
            Series::LeNetConstant16_3 => "lenet-constant-16/3",
            Series::Vgg16Growth1_5 => "vgg16-growth-1.5",
            Series::Vgg16Growth2_5 => "vgg16-growth-2.5",
        }
    }

    /// The rounded exponent stated alongside the measurements.
    pub fn stated_exponent(self) -> f64 {
        match self {
            Series::LeNetConstant16_3 => 0.35,
            Series::Vgg16Growth2_5 => 0.32,
            _ => 0.4,
        }
    }

    fn source(self) -> (&'static str, &'static str) {
        match self {
            Series::LeNet => (FIG1, "d1"),
            Series::Vgg16 => (FIG2, "d"),
            Series::LeNetConstant4_3 => (FIG4A_4_3, "d1"),
            Series::LeNetConstant16_3 => (FIG4A_16_3, "d1"),
            Series::Vgg16Growth1_5 => (FIG4B_1_5, "d"),
            Series::Vgg16Growth2_5 => (FIG4B_2_5, "d"),
        }
    }
}

struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn load(text: &str) -> Result<Self> {
        let (columns, rows) = parse_table(text)?;
        Ok(Self { columns, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| Error::Parse(format!("bundled table lacks column {name}")))
    }

    fn f64s(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.col(name)?;
        self.rows.iter().map(|r| r[c].parse().map_err(|_| Error::Parse(format!("bad number {:?} in column {name}", r[c])))).collect()
    }

    fn strings(&self, name: &str) -> Result<Vec<String>> {
        let c = self.col(name)?;
        Ok(self.rows.iter().map(|r| r[c].clone()).collect())
    }
}

/// Measured `(d, epsilon, std)` points of a series.
pub fn series(s: Series) -> Result<Vec<ScalingPoint>> {
    let (text, key) = s.source();
    let t = Table::load(text)?;
    let (d, e, sd) = (t.f64s(key)?, t.f64s("epsilon")?, t.f64s("std")?);
    (0..d.len()).map(|i| ScalingPoint::with_std(d[i], e[i], Some(sd[i]))).collect()
}

/// Integer-`d2` LeNet runs as `(d1, d2, epsilon, std)`.
pub fn lenet_bracketing_runs() -> Result<Vec<(usize, usize, f64, f64)>> {
    let t = Table::load(FIG1_RAW)?;
    let (d1, d2, e, sd) = (t.f64s("d1")?, t.f64s("d2")?, t.f64s("epsilon")?, t.f64s("std")?);
    Ok((0..d1.len()).map(|i| (d1[i] as usize, d2[i] as usize, e[i], sd[i])).collect())
}

/// Published forward MAdd counts: `(family, d, value, significant digits)`.
pub fn published_madds() -> Result<Vec<(Family, usize, f64, u32)>> {
    let t = Table::load(FIG3A)?;
    let fam = t.strings("family")?;
    let (d, m, digits) = (t.f64s("d")?, t.f64s("madds")?, t.f64s("digits")?);
    (0..d.len()).map(|i| Ok((fam[i].parse()?, d[i] as usize, m[i], digits[i] as u32))).collect()
}

/// Published `(epsilon, LeNet GMAdd, VGG-16 GMAdd)` rows.
pub fn published_complexity() -> Result<Vec<(f64, f64, f64)>> {
    let t = Table::load(FIG3B)?;
    let (e, l, v) = (t.f64s("epsilon")?, t.f64s("lenet_gmadd")?, t.f64s("vgg_gmadd")?);
    Ok((0..e.len()).map(|i| (e[i], l[i], v[i])).collect())
}

/// Published `(epsilon, LeNet / VGG-16 complexity ratio)` rows.
pub fn published_ratios() -> Result<Vec<(f64, f64)>> {
    let t = Table::load(FIG3C)?;
    let (e, r) = (t.f64s("epsilon")?, t.f64s("ratio")?);
    Ok(e.into_iter().zip(r).collect())
}

/// Quadratic MAdd law of LeNet with `d2 = 8/3 d1` held exact (`d1` a
/// multiple of 3).
pub fn lenet_complexity() -> Result<QuadFit> {
    let pts = (3..=198)
        .step_by(3)
        .map(|d1| Ok((d1 as f64, madds(&build_lenet(d1, 8.0 / 3.0, None)?, CountMode::Forward)?.total as f64)))
        .collect::<Result<Vec<_>>>()?;
    quad_fit(&pts)
}

/// Quadratic MAdd law of VGG-16 with growth 2.
pub fn vgg_complexity() -> Result<QuadFit> {
    let pts = (4..=64)
        .map(|d| Ok((d as f64, madds(&build_vgg16(d, 2.0)?, CountMode::Forward)?.total as f64)))
        .collect::<Result<Vec<_>>>()?;
    quad_fit(&pts)
}

/// Least-squares power law of a series, at full precision.
pub fn series_fit(s: Series) -> Result<PowerLawFit> {
    fit_power_law(&series(s)?)
}

fn rel(computed: f64, reference: f64) -> f64 {
    (computed - reference).abs() / reference.abs()
}

/// Tables that can be regenerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reproduction {
    Fig3a,
    Fig3b,
    Fig3c,
    Fits,
}

impl Reproduction {
    pub const ALL: [Reproduction; 4] = [Reproduction::Fig3a, Reproduction::Fig3b, Reproduction::Fig3c, Reproduction::Fits];

    pub fn name(self) -> &'static str {
        match self {
            Reproduction::Fig3a => "fig3a",
            Reproduction::Fig3b => "fig3b",
            Reproduction::Fig3c => "fig3c",
            Reproduction::Fits => "fits",
        }
    }
}

impl fmt::Display for Reproduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Reproduction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Reproduction::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown table {s:?}; expected fig3a, fig3b, fig3c or fits")))
    }
}

pub type CsvTable = (Vec<String>, Vec<Vec<String>>);

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Computed values next to the published ones, with a relative deviation
/// column.
pub fn reproduce(which: Reproduction) -> Result<CsvTable> {
    match which {
        Reproduction::Fig3a => {
            let mut rows = Vec::new();
            for (family, d, published, digits) in published_madds()? {
                let spec = match family {
                    Family::LeNet => build_lenet(d, 8.0 / 3.0, None)?,
                    _ => build_vgg16(d, 2.0)?,
                };
                let total = madds(&spec, CountMode::Forward)?.total;
                let shown = round_significant(total as f64, digits);
                rows.push(vec![
                    family.to_string(),
                    d.to_string(),
                    total.to_string(),
                    shown.to_string(),
                    published.to_string(),
                    rel(shown, published).to_string(),
                ]);
            }
            Ok((columns(&["family", "d", "madds", "madds_at_published_digits", "published", "rel_deviation"]), rows))
        }
        Reproduction::Fig3b => {
            let (lf, vf) = (series_fit(Series::LeNet)?, series_fit(Series::Vgg16)?);
            let (lp, vp) = (lenet_complexity()?, vgg_complexity()?);
            let mut rows = Vec::new();
            for (eps, l_pub, v_pub) in published_complexity()? {
                let l = complexity_at_error(&lf, &lp, eps)? / GMADD;
                let v = complexity_at_error(&vf, &vp, eps)? / GMADD;
                rows.push(vec![
                    eps.to_string(),
                    l.to_string(),
                    l_pub.to_string(),
                    rel(l, l_pub).to_string(),
                    v.to_string(),
                    v_pub.to_string(),
                    rel(v, v_pub).to_string(),
                ]);
            }
            Ok((
                columns(&["epsilon", "lenet_gmadd", "lenet_published", "lenet_rel_deviation", "vgg_gmadd", "vgg_published", "vgg_rel_deviation"]),
                rows,
            ))
        }
        Reproduction::Fig3c => {
            let (lf, vf) = (series_fit(Series::LeNet)?, series_fit(Series::Vgg16)?);
            let (lp, vp) = (lenet_complexity()?, vgg_complexity()?);
            let mut rows = Vec::new();
            for (eps, published) in published_ratios()? {
                let r = complexity_ratio(&lf, &lp, &vf, &vp, eps)?;
                rows.push(vec![eps.to_string(), r.to_string(), published.to_string(), rel(r, published).to_string()]);
            }
            Ok((columns(&["epsilon", "ratio", "published", "rel_deviation"]), rows))
        }
        Reproduction::Fits => {
            let mut rows = Vec::new();
            for s in Series::ALL {
                let pts = series(s)?;
                let f = fit_power_law(&pts)?;
                rows.push(vec![
                    s.name().to_string(),
                    pts.len().to_string(),
                    f.exponent.to_string(),
                    f.prefactor.to_string(),
                    f.residual.to_string(),
                    s.stated_exponent().to_string(),
                    rel(f.exponent, s.stated_exponent()).to_string(),
                ]);
            }
            Ok((columns(&["series", "points", "rho", "prefactor", "log_residual", "stated_rho", "rel_deviation"]), rows))
        }
    }
}
