//! Training configuration, tabulated hyper-parameter presets and the stepped
//! learning-rate schedule.
//!
//! Config files are TOML:
//!
//! ```toml
//! eta = 0.028
//! mu = 0.91
//! alpha = 0.00095
//! epochs = 280
//! batch_size = 100
//! seed = 0
//! validation_holdout = 0
//! l2 = "coupled"
//!
//! [[schedule]]
//! first_epoch = 1
//! last_epoch = 120
//! q = 0.8
//! interval = 10
//!
//! [[schedule]]
//! first_epoch = 121
//! last_epoch = 280
//! q = 0.7
//! interval = 10
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arch::{build_lenet, build_vgg16, build_vgg16_enhanced, ArchSpec, Family};
use crate::error::{Error, Result};

pub const BATCH_SIZE: usize = 100;

/// Multiply the learning rate by `q` every `interval` epochs completed
/// inside `[first_epoch, last_epoch]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    pub first_epoch: usize,
    pub last_epoch: usize,
    pub q: f64,
    pub interval: usize,
}

/// How the L2 term enters the update. Only the coupled form (`alpha * w`
/// added to the gradient before momentum) is implemented; the field exists
/// so configs state it explicitly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum L2Mode {
    #[default]
    Coupled,
}

fn default_batch_size() -> usize {
    BATCH_SIZE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub eta: f64,
    pub mu: f64,
    pub alpha: f64,
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub schedule: Vec<Regime>,
    #[serde(default)]
    pub seed: u64,
    /// Training images held out (stratified) and evaluated in place of the
    /// test set. 0 disables the split.
    #[serde(default)]
    pub validation_holdout: usize,
    #[serde(default)]
    pub l2: L2Mode,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return bad(format!("mu must lie in [0, 1), got {}", self.mu));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        let mut next = 1;
        for r in &self.schedule {
            if r.first_epoch != next || r.last_epoch < r.first_epoch {
                return Err(Error::Schedule(format!(
                    "regime {}..={} does not continue from epoch {next}",
                    r.first_epoch, r.last_epoch
                )));
            }
            if !(r.q > 0.0 && r.q <= 1.0) || r.interval == 0 {
                return Err(Error::Schedule(format!("regime starting at {} needs q in (0, 1] and interval >= 1", r.first_epoch)));
            }
            next = r.last_epoch + 1;
        }
        if next != self.epochs + 1 {
            return Err(Error::Schedule(format!("schedule covers epochs 1..{next}, config runs {}", self.epochs)));
        }
        Ok(())
    }

    /// Same hyper-parameters run for only `epochs` epochs; regimes past the
    /// cut are dropped and the last one clipped.
    pub fn truncated(&self, epochs: usize) -> Result<Self> {
        if epochs == 0 || epochs > self.epochs {
            return Err(Error::InvalidParameter(format!("cannot truncate {} epochs to {epochs}", self.epochs)));
        }
        let schedule = self
            .schedule
            .iter()
            .filter(|r| r.first_epoch <= epochs)
            .map(|r| Regime { last_epoch: r.last_epoch.min(epochs), ..*r })
            .collect();
        Ok(Self { epochs, schedule, ..self.clone() })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Learning rate in effect during 1-based `epoch`. Decays land after every
/// `interval` completed epochs of a regime and compound across regimes.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch == 0 || epoch > config.epochs {
        return Err(Error::Range(format!("epoch {epoch} outside 1..={}", config.epochs)));
    }
    let mut lr = config.eta;
    for r in &config.schedule {
        if r.first_epoch > epoch {
            break;
        }
        let completed = epoch.min(r.last_epoch + 1) - r.first_epoch;
        lr *= r.q.powi((completed / r.interval) as i32);
    }
    Ok(lr)
}

/// Which experiment family a preset belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// LeNet with `d2 = 8/3 d1`, VGG-16 with growth 2, enhanced VGG-16.
    Main,
    /// LeNet with `d2 = 4/3 d1`.
    LeNetConstant4_3,
    /// LeNet with `d2 = 16/3 d1`.
    LeNetConstant16_3,
    /// VGG-16 with growth 1.5.
    VggGrowth1_5,
    /// VGG-16 with growth 2.5.
    VggGrowth2_5,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Main, Variant::LeNetConstant4_3, Variant::LeNetConstant16_3, Variant::VggGrowth1_5, Variant::VggGrowth2_5];

    fn name(self) -> &'static str {
        match self {
            Variant::Main => "main",
            Variant::LeNetConstant4_3 => "constant-4/3",
            Variant::LeNetConstant16_3 => "constant-16/3",
            Variant::VggGrowth1_5 => "growth-1.5",
            Variant::VggGrowth2_5 => "growth-2.5",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown variant {s:?}; expected one of main, constant-4/3, constant-16/3, growth-1.5, growth-2.5")))
    }
}

#[derive(Clone, Copy)]
enum Sched {
    /// (0.8, 10) through epoch 120, then (0.7, 10).
    LeNet,
    /// (0.6, 20) throughout.
    Vgg,
    /// (0.9, 10) through epoch 60, then (0.85, 10).
    Slow,
    /// (0.95, 10) through 30, (0.9, 10) through 60, then (0.8, 10).
    ThreeStage,
}

impl Sched {
    fn regimes(self, epochs: usize) -> Vec<Regime> {
        let r = |first_epoch, last_epoch, q, interval| Regime { first_epoch, last_epoch, q, interval };
        match self {
            Sched::LeNet => vec![r(1, 120, 0.8, 10), r(121, epochs, 0.7, 10)],
            Sched::Vgg => vec![r(1, epochs, 0.6, 20)],
            Sched::Slow => vec![r(1, 60, 0.9, 10), r(61, epochs, 0.85, 10)],
            Sched::ThreeStage => vec![r(1, 30, 0.95, 10), r(31, 60, 0.9, 10), r(61, epochs, 0.8, 10)],
        }
    }
}

type Row = (Family, Variant, usize, f64, f64, f64, usize, Sched);

#[rustfmt::skip]
const PRESETS: &[Row] = &[
    (Family::LeNet, Variant::Main, 1, 0.028, 0.850, 9.5e-4, 240, Sched::LeNet),
    (Family::LeNet, Variant::Main, 2, 0.028, 0.850, 9.5e-4, 240, Sched::LeNet),
    (Family::LeNet, Variant::Main, 3, 0.028, 0.905, 9.5e-4, 220, Sched::LeNet),
    (Family::LeNet, Variant::Main, 6, 0.028, 0.910, 9.5e-4, 280, Sched::LeNet),
    (Family::LeNet, Variant::Main, 12, 0.028, 0.915, 9.5e-4, 240, Sched::LeNet),
    (Family::LeNet, Variant::Main, 18, 0.028, 0.950, 9.5e-4, 280, Sched::LeNet),
    (Family::Vgg16, Variant::Main, 8, 0.01, 0.920, 9e-4, 200, Sched::Vgg),
    (Family::Vgg16, Variant::Main, 16, 0.01, 0.975, 1.5e-3, 200, Sched::Vgg),
    (Family::Vgg16, Variant::Main, 32, 0.01, 0.965, 9.5e-4, 200, Sched::Vgg),
    (Family::Vgg16, Variant::Main, 64, 0.028, 0.975, 1.5e-3, 200, Sched::Vgg),
    (Family::LeNet, Variant::LeNetConstant4_3, 3, 0.035, 0.900, 1e-5, 200, Sched::Slow),
    (Family::LeNet, Variant::LeNetConstant4_3, 6, 0.030, 0.975, 1e-5, 200, Sched::Slow),
    (Family::LeNet, Variant::LeNetConstant4_3, 12, 0.030, 0.965, 4e-5, 200, Sched::Slow),
    (Family::LeNet, Variant::LeNetConstant4_3, 18, 0.025, 0.975, 2e-4, 200, Sched::ThreeStage),
    (Family::LeNet, Variant::LeNetConstant16_3, 3, 0.028, 0.940, 9e-4, 200, Sched::LeNet),
    (Family::LeNet, Variant::LeNetConstant16_3, 6, 0.006, 0.975, 9e-4, 200, Sched::Vgg),
    (Family::LeNet, Variant::LeNetConstant16_3, 12, 0.010, 0.975, 9e-4, 200, Sched::Vgg),
    (Family::LeNet, Variant::LeNetConstant16_3, 18, 0.010, 0.975, 1.5e-3, 200, Sched::Vgg),
    (Family::Vgg16, Variant::VggGrowth1_5, 16, 0.008, 0.975, 9e-4, 200, Sched::Vgg),
    (Family::Vgg16, Variant::VggGrowth1_5, 32, 0.007, 0.975, 1.5e-3, 200, Sched::Vgg),
    (Family::Vgg16, Variant::VggGrowth1_5, 64, 0.002, 0.970, 3e-3, 200, Sched::Vgg),
    (Family::Vgg16, Variant::VggGrowth2_5, 16, 0.010, 0.975, 9e-4, 200, Sched::Vgg),
    (Family::Vgg16, Variant::VggGrowth2_5, 32, 0.010, 0.965, 9e-4, 200, Sched::Vgg),
    (Family::Vgg16, Variant::VggGrowth2_5, 64, 0.015, 0.975, 9e-4, 200, Sched::Vgg),
    (Family::Vgg16Enhanced, Variant::Main, 16, 0.007, 0.975, 2.0e-3, 200, Sched::Vgg),
];

/// Tabulated hyper-parameters for `(family, d, variant)`; `d` is `d1` for
/// LeNet. Untabulated combinations are a [`Error::NoPreset`].
pub fn preset(family: Family, d: usize, variant: Variant) -> Result<TrainConfig> {
    let &(_, _, _, eta, mu, alpha, epochs, sched) = PRESETS
        .iter()
        .find(|r| r.0 == family && r.1 == variant && r.2 == d)
        .ok_or_else(|| Error::NoPreset(format!("{family} d={d} {variant}")))?;
    Ok(TrainConfig {
        eta,
        mu,
        alpha,
        epochs,
        batch_size: BATCH_SIZE,
        schedule: sched.regimes(epochs),
        seed: 0,
        validation_holdout: 0,
        l2: L2Mode::Coupled,
    })
}

/// The architecture a preset was tabulated for.
pub fn preset_arch(family: Family, d: usize, variant: Variant) -> Result<ArchSpec> {
    match (family, variant) {
        (Family::LeNet, Variant::Main) => build_lenet(d, 8.0 / 3.0, None),
        (Family::LeNet, Variant::LeNetConstant4_3) => build_lenet(d, 4.0 / 3.0, None),
        (Family::LeNet, Variant::LeNetConstant16_3) => build_lenet(d, 16.0 / 3.0, None),
        (Family::Vgg16, Variant::Main) => build_vgg16(d, 2.0),
        (Family::Vgg16, Variant::VggGrowth1_5) => build_vgg16(d, 1.5),
        (Family::Vgg16, Variant::VggGrowth2_5) => build_vgg16(d, 2.5),
        (Family::Vgg16Enhanced, Variant::Main) => build_vgg16_enhanced(d),
        _ => Err(Error::NoPreset(format!("variant {variant} does not apply to {family}"))),
    }
}
