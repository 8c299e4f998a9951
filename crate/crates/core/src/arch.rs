//! Architecture descriptions for the generalized LeNet and VGG-16 families.
//!
//! An [`ArchSpec`] is pure description: no weights are allocated here. The
//! builders follow the depth-size conservation rule, where a conv block's
//! filter count times its spatial extent stays (approximately) constant
//! through the network.
//!
//! # Text format
//!
//! Specs serialize to line-oriented `key = value` text, one `layer` line per
//! layer in forward order. Blank lines and `#` comments are ignored.
//!
//! ```text
//! # shallow-core architecture v1
//! family = lenet
//! d = 6
//! constant = 2.6666666666666665
//! input = 3x32x32
//! layer = conv in=3 out=6 kernel=5 pad=0
//! layer = relu
//! layer = maxpool
//! layer = flatten features=400
//! layer = dense in=400 out=120
//! layer = batchnorm channels=64
//! ```
//!
//! Reals are written in shortest round-trip form, so parse(serialize(s)) == s.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_HEADER: &str = "# shallow-core architecture v1";
pub const NUM_CLASSES: usize = 10;
pub const CIFAR_INPUT: [usize; 3] = [3, 32, 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[serde(rename = "lenet")]
    LeNet,
    #[serde(rename = "vgg16")]
    Vgg16,
    #[serde(rename = "vgg16-enhanced")]
    Vgg16Enhanced,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::LeNet => "lenet",
            Family::Vgg16 => "vgg16",
            Family::Vgg16Enhanced => "vgg16-enhanced",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lenet" => Ok(Family::LeNet),
            "vgg16" => Ok(Family::Vgg16),
            "vgg16-enhanced" => Ok(Family::Vgg16Enhanced),
            other => Err(Error::Parse(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    /// Square kernel, stride 1.
    Conv { in_channels: usize, out_channels: usize, kernel: usize, padding: usize },
    BatchNorm { channels: usize },
    Relu,
    /// 2x2 window, stride 2.
    MaxPool,
    Flatten { features: usize },
    Dense { in_units: usize, out_units: usize },
}

impl LayerSpec {
    /// Output shape (without the batch axis) for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |why: String| Err(Error::InvalidArchitecture(format!("{self}: {why}")));
        match *self {
            LayerSpec::Conv { in_channels, out_channels, kernel, padding } => {
                let &[c, h, w] = input else { return bad(format!("expects [C,H,W], got {input:?}")) };
                if c != in_channels {
                    return bad(format!("input has {c} channels"));
                }
                if in_channels == 0 || out_channels == 0 || kernel == 0 {
                    return bad("zero extent".into());
                }
                if h + 2 * padding < kernel || w + 2 * padding < kernel {
                    return bad(format!("kernel larger than padded input {h}x{w}"));
                }
                Ok(vec![out_channels, h + 2 * padding - kernel + 1, w + 2 * padding - kernel + 1])
            }
            LayerSpec::BatchNorm { channels } => {
                if input.first() != Some(&channels) || channels == 0 {
                    return bad(format!("input shape {input:?}"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::MaxPool => {
                let &[c, h, w] = input else { return bad(format!("expects [C,H,W], got {input:?}")) };
                if h % 2 != 0 || w % 2 != 0 {
                    return bad(format!("odd extent {h}x{w}"));
                }
                Ok(vec![c, h / 2, w / 2])
            }
            LayerSpec::Flatten { features } => {
                let n: usize = input.iter().product();
                if n != features {
                    return bad(format!("input has {n} features"));
                }
                Ok(vec![features])
            }
            LayerSpec::Dense { in_units, out_units } => {
                if input != [in_units] || out_units == 0 || in_units == 0 {
                    return bad(format!("input shape {input:?}"));
                }
                Ok(vec![out_units])
            }
        }
    }

    pub fn has_parameters(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. } | LayerSpec::BatchNorm { .. })
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Conv { in_channels, out_channels, kernel, padding } => {
                write!(f, "conv in={in_channels} out={out_channels} kernel={kernel} pad={padding}")
            }
            LayerSpec::BatchNorm { channels } => write!(f, "batchnorm channels={channels}"),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::MaxPool => f.write_str("maxpool"),
            LayerSpec::Flatten { features } => write!(f, "flatten features={features}"),
            LayerSpec::Dense { in_units, out_units } => write!(f, "dense in={in_units} out={out_units}"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let kind = parts.next().ok_or_else(|| Error::Parse("empty layer".into()))?;
        let mut fields = std::collections::BTreeMap::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| Error::Parse(format!("bad layer field '{p}'")))?;
            let v: usize = v.parse().map_err(|_| Error::Parse(format!("bad integer in '{p}'")))?;
            fields.insert(k, v);
        }
        let mut take = |k: &str| fields.remove(k).ok_or_else(|| Error::Parse(format!("layer '{s}' is missing '{k}'")));
        let layer = match kind {
            "conv" => LayerSpec::Conv {
                in_channels: take("in")?,
                out_channels: take("out")?,
                kernel: take("kernel")?,
                padding: take("pad")?,
            },
            "batchnorm" => LayerSpec::BatchNorm { channels: take("channels")? },
            "relu" => LayerSpec::Relu,
            "maxpool" => LayerSpec::MaxPool,
            "flatten" => LayerSpec::Flatten { features: take("features")? },
            "dense" => LayerSpec::Dense { in_units: take("in")?, out_units: take("out")? },
            other => return Err(Error::Parse(format!("unknown layer kind '{other}'"))),
        };
        if let Some(extra) = fields.keys().next() {
            return Err(Error::Parse(format!("unexpected field '{extra}' in layer '{s}'")));
        }
        Ok(layer)
    }
}

/// A complete network description plus the family parameters it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchSpec {
    pub family: Family,
    /// `d1` for LeNet, `d` for the VGG families.
    pub d: usize,
    /// LeNet `d2/d1` ratio or VGG per-set growth constant.
    pub constant: f64,
    /// `[channels, height, width]`
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

fn round_filters(x: f64, what: &str) -> Result<usize> {
    if !x.is_finite() {
        return Err(Error::InvalidArchitecture(format!("{what} is not finite")));
    }
    // f64::round rounds half away from zero
    let r = x.round();
    if r < 1.0 {
        return Err(Error::InvalidArchitecture(format!("{what} rounds to {r}, need at least 1")));
    }
    Ok(r as usize)
}

/// Generalized LeNet: two 5x5 conv layers with `d1` and `d2` filters, each
/// followed by ReLU and 2x2 pooling, then dense layers `25*d2 -> 120 -> 84 -> 10`.
///
/// `d2 = round(ratio * d1)` unless `d2_override` is given.
pub fn build_lenet(d1: usize, ratio: f64, d2_override: Option<usize>) -> Result<ArchSpec> {
    if d1 == 0 {
        return Err(Error::InvalidArchitecture("d1 must be at least 1".into()));
    }
    if !(ratio > 0.0) {
        return Err(Error::InvalidArchitecture(format!("ratio must be positive, got {ratio}")));
    }
    let d2 = match d2_override {
        Some(0) => return Err(Error::InvalidArchitecture("d2 override must be at least 1".into())),
        Some(d2) => d2,
        None => round_filters(ratio * d1 as f64, "d2")?,
    };
    let layers = vec![
        LayerSpec::Conv { in_channels: 3, out_channels: d1, kernel: 5, padding: 0 },
        LayerSpec::Relu,
        LayerSpec::MaxPool,
        LayerSpec::Conv { in_channels: d1, out_channels: d2, kernel: 5, padding: 0 },
        LayerSpec::Relu,
        LayerSpec::MaxPool,
        LayerSpec::Flatten { features: 25 * d2 },
        LayerSpec::Dense { in_units: 25 * d2, out_units: 120 },
        LayerSpec::Relu,
        LayerSpec::Dense { in_units: 120, out_units: 84 },
        LayerSpec::Relu,
        LayerSpec::Dense { in_units: 84, out_units: NUM_CLASSES },
    ];
    let spec = ArchSpec { family: Family::LeNet, d: d1, constant: ratio, input: CIFAR_INPUT, layers };
    spec.validate()?;
    Ok(spec)
}

const VGG_SET_SIZES: [usize; 5] = [2, 2, 3, 3, 3];
const VGG_HIDDEN: usize = 4096;

fn vgg_from_sets(family: Family, d: usize, constant: f64, sets: [usize; 5]) -> Result<ArchSpec> {
    let mut layers = Vec::new();
    let mut channels = 3;
    for (&filters, &convs) in sets.iter().zip(&VGG_SET_SIZES) {
        for _ in 0..convs {
            layers.push(LayerSpec::Conv { in_channels: channels, out_channels: filters, kernel: 3, padding: 1 });
            layers.push(LayerSpec::BatchNorm { channels: filters });
            layers.push(LayerSpec::Relu);
            channels = filters;
        }
        layers.push(LayerSpec::MaxPool);
    }
    layers.extend([
        LayerSpec::Flatten { features: channels },
        LayerSpec::Dense { in_units: channels, out_units: VGG_HIDDEN },
        LayerSpec::Relu,
        LayerSpec::Dense { in_units: VGG_HIDDEN, out_units: VGG_HIDDEN },
        LayerSpec::Relu,
        LayerSpec::Dense { in_units: VGG_HIDDEN, out_units: NUM_CLASSES },
    ]);
    let spec = ArchSpec { family, d, constant, input: CIFAR_INPUT, layers };
    spec.validate()?;
    Ok(spec)
}

/// Generalized VGG-16: 13 3x3 conv layers (zero padding 1) in five sets of
/// 2, 2, 3, 3, 3, each conv followed by batch norm and ReLU, each set closed
/// by a 2x2 pool. Set `n <= 4` has `round(d * growth^(n-1))` filters and set
/// 5 repeats set 4. Head: `set5 -> 4096 -> 4096 -> 10`.
pub fn build_vgg16(d: usize, growth: f64) -> Result<ArchSpec> {
    if d == 0 {
        return Err(Error::InvalidArchitecture("d must be at least 1".into()));
    }
    if !(growth > 0.0) {
        return Err(Error::InvalidArchitecture(format!("growth must be positive, got {growth}")));
    }
    let mut sets = [0; 5];
    for (n, s) in sets.iter_mut().take(4).enumerate() {
        *s = round_filters(d as f64 * growth.powi(n as i32), &format!("set {} filters", n + 1))?;
    }
    sets[4] = sets[3];
    vgg_from_sets(Family::Vgg16, d, growth, sets)
}

/// VGG-16 with growth 2 whose fifth set carries `16 d` filters, so the
/// depth-extent product is the same for all five sets.
pub fn build_vgg16_enhanced(d: usize) -> Result<ArchSpec> {
    if d == 0 {
        return Err(Error::InvalidArchitecture("d must be at least 1".into()));
    }
    vgg_from_sets(Family::Vgg16Enhanced, d, 2.0, [d, 2 * d, 4 * d, 8 * d, 16 * d])
}

impl ArchSpec {
    /// Per-layer output shapes (without batch axis), chained from `input`.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = self.input.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.contains(&0) {
            return Err(Error::InvalidArchitecture(format!("input {:?}", self.input)));
        }
        let shapes = self.layer_shapes()?;
        match shapes.last() {
            Some(s) if s == &[NUM_CLASSES] => {}
            other => {
                return Err(Error::InvalidArchitecture(format!("network output {other:?}, expected [{NUM_CLASSES}]")))
            }
        }
        let convs = self.layers.iter().filter(|l| matches!(l, LayerSpec::Conv { .. })).count();
        let denses = self.layers.iter().filter(|l| matches!(l, LayerSpec::Dense { .. })).count();
        let (want_conv, want_dense) = match self.family {
            Family::LeNet => (2, 3),
            Family::Vgg16 | Family::Vgg16Enhanced => (13, 3),
        };
        if convs != want_conv || denses != want_dense {
            return Err(Error::InvalidArchitecture(format!(
                "{} needs {want_conv} conv and {want_dense} dense layers, got {convs} and {denses}",
                self.family
            )));
        }
        Ok(())
    }

    /// Output channel count of every conv layer, in order.
    pub fn conv_filters(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter_map(|l| match *l {
                LayerSpec::Conv { out_channels, .. } => Some(out_channels),
                _ => None,
            })
            .collect()
    }

    /// 1-based conv indices that are immediately followed (after any
    /// normalization/activation) by a pooling layer.
    pub fn pooled_conv_indices(&self) -> Vec<usize> {
        let mut conv = 0;
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                LayerSpec::Conv { .. } => conv += 1,
                LayerSpec::MaxPool => out.push(conv),
                _ => {}
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_HEADER}");
        let _ = writeln!(s, "family = {}", self.family);
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "constant = {}", self.constant);
        let _ = writeln!(s, "input = {}x{}x{}", self.input[0], self.input[1], self.input[2]);
        for l in &self.layers {
            let _ = writeln!(s, "layer = {l}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut family = None;
        let mut d = None;
        let mut constant = None;
        let mut input = None;
        let mut layers = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |why: &str| Error::Parse(format!("line {}: {why}: '{line}'", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let value = value.trim();
            match key.trim() {
                "family" => family = Some(value.parse::<Family>()?),
                "d" => d = Some(value.parse::<usize>().map_err(|_| err("bad integer"))?),
                "constant" => constant = Some(value.parse::<f64>().map_err(|_| err("bad real"))?),
                "input" => {
                    let dims: Vec<usize> = value
                        .split('x')
                        .map(|p| p.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| err("bad input shape"))?;
                    let dims: [usize; 3] = dims.try_into().map_err(|_| err("input needs CxHxW"))?;
                    input = Some(dims);
                }
                "layer" => layers.push(value.parse::<LayerSpec>()?),
                _ => return Err(err("unknown key")),
            }
        }
        let missing = |k: &str| Error::Parse(format!("missing '{k}'"));
        let spec = ArchSpec {
            family: family.ok_or_else(|| missing("family"))?,
            d: d.ok_or_else(|| missing("d"))?,
            constant: constant.ok_or_else(|| missing("constant"))?,
            input: input.ok_or_else(|| missing("input"))?,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Depth, spatial extent and their product for one conv block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockConservation {
    pub depth: usize,
    pub extent: usize,
    pub product: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConservationReport {
    pub blocks: Vec<BlockConservation>,
    /// `(max - min) / mean` of the block products; zero when the
    /// depth-extent product is exactly conserved.
    pub max_deviation: f64,
}

/// Audits `depth_i * m_i` along the conv blocks. For LeNet `m_i` is the
/// pooled extent of block `i` (14, 5 on CIFAR); for the VGG families it is the
/// extent the set operates at before its pool (32, 16, 8, 4, 2).
pub fn conservation_report(spec: &ArchSpec) -> Result<ConservationReport> {
    let shapes = spec.layer_shapes()?;
    let mut blocks = Vec::new();
    let mut depth = None;
    let mut pre_pool_extent = 0;
    for (i, layer) in spec.layers.iter().enumerate() {
        match *layer {
            LayerSpec::Conv { out_channels, .. } => {
                depth = Some(out_channels);
                pre_pool_extent = shapes[i][1];
            }
            LayerSpec::MaxPool => {
                if let Some(depth) = depth.take() {
                    let extent = match spec.family {
                        Family::LeNet => shapes[i][1],
                        Family::Vgg16 | Family::Vgg16Enhanced => pre_pool_extent,
                    };
                    blocks.push(BlockConservation { depth, extent, product: depth * extent });
                }
            }
            _ => {}
        }
    }
    if blocks.is_empty() {
        return Err(Error::InvalidArchitecture("no pooled conv blocks".into()));
    }
    let products: Vec<f64> = blocks.iter().map(|b| b.product as f64).collect();
    let mean = products.iter().sum::<f64>() / products.len() as f64;
    let max = products.iter().copied().fold(f64::MIN, f64::max);
    let min = products.iter().copied().fold(f64::MAX, f64::min);
    Ok(ConservationReport { blocks, max_deviation: (max - min) / mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lenet_reference_sizes() {
        let spec = build_lenet(6, 16.0 / 6.0, None).unwrap();
        assert_eq!(spec.conv_filters(), vec![6, 16]);
        assert!(spec.layers.contains(&LayerSpec::Flatten { features: 400 }));
        assert_eq!(spec.layer_shapes().unwrap()[0], vec![6, 28, 28]);
        assert_eq!(spec.layer_shapes().unwrap()[2], vec![6, 14, 14]);
    }

    #[test]
    fn lenet_rounding() {
        assert_eq!(build_lenet(44, 16.0 / 6.0, None).unwrap().conv_filters()[1], 117);
        assert_eq!(build_lenet(1, 16.0 / 6.0, Some(2)).unwrap().conv_filters()[1], 2);
        for (d1, d2) in [(3, 8), (6, 16), (12, 32), (18, 48)] {
            assert_eq!(build_lenet(d1, 16.0 / 6.0, None).unwrap().conv_filters()[1], d2);
        }
        // 1 * 0.5 rounds away from zero
        assert_eq!(build_lenet(1, 0.5, None).unwrap().conv_filters()[1], 1);
        assert!(matches!(build_lenet(1, 0.4, None), Err(Error::InvalidArchitecture(_))));
        assert!(build_lenet(0, 2.0, None).is_err());
    }

    fn sets(spec: &ArchSpec) -> Vec<usize> {
        let f = spec.conv_filters();
        [0, 2, 4, 7, 10].iter().map(|&i| f[i]).collect()
    }

    #[test]
    fn vgg_sets() {
        assert_eq!(sets(&build_vgg16(64, 2.0).unwrap()), vec![64, 128, 256, 512, 512]);
        assert_eq!(sets(&build_vgg16(16, 2.5).unwrap()), vec![16, 40, 100, 250, 250]);
        assert_eq!(sets(&build_vgg16_enhanced(16).unwrap()), vec![16, 32, 64, 128, 256]);
        assert_eq!(sets(&build_vgg16_enhanced(1).unwrap()), vec![1, 2, 4, 8, 16]);
        let spec = build_vgg16(8, 2.0).unwrap();
        assert_eq!(spec.conv_filters().len(), 13);
        assert_eq!(spec.pooled_conv_indices(), vec![2, 4, 7, 10, 13]);
        assert!(build_vgg16(1, 0.1).is_err());
    }

    #[test]
    fn lenet_conservation() {
        let r = conservation_report(&build_lenet(6, 16.0 / 6.0, None).unwrap()).unwrap();
        let products: Vec<usize> = r.blocks.iter().map(|b| b.product).collect();
        assert_eq!(products, vec![84, 80]);
        assert!((r.max_deviation - 4.0 / 82.0).abs() < 1e-12);
        assert!((r.max_deviation - 0.049).abs() < 0.001);
    }

    #[test]
    fn vgg_conservation() {
        for d in [1, 4, 16] {
            let r = conservation_report(&build_vgg16(d, 2.0).unwrap()).unwrap();
            let products: Vec<usize> = r.blocks.iter().map(|b| b.product).collect();
            assert_eq!(products, vec![32 * d, 32 * d, 32 * d, 32 * d, 16 * d]);
            let extents: Vec<usize> = r.blocks.iter().map(|b| b.extent).collect();
            assert_eq!(extents, vec![32, 16, 8, 4, 2]);
            let r = conservation_report(&build_vgg16_enhanced(d).unwrap()).unwrap();
            assert_eq!(r.max_deviation, 0.0);
        }
    }

    #[test]
    fn text_round_trip() {
        for spec in [
            build_lenet(6, 16.0 / 6.0, None).unwrap(),
            build_lenet(1, 8.0 / 3.0, Some(3)).unwrap(),
            build_vgg16(16, 2.5).unwrap(),
            build_vgg16_enhanced(4).unwrap(),
        ] {
            let text = spec.to_text();
            assert!(text.starts_with(FORMAT_HEADER));
            assert_eq!(ArchSpec::from_text(&text).unwrap(), spec);
        }
    }

    #[test]
    fn text_rejects_inconsistent_layers() {
        let text = build_lenet(6, 16.0 / 6.0, None).unwrap().to_text().replace("features=400", "features=401");
        assert!(ArchSpec::from_text(&text).is_err());
        assert!(ArchSpec::from_text("family = lenet\n").is_err());
        assert!("conv in=3 out=6 kernel=5".parse::<LayerSpec>().is_err());
        assert!("conv in=3 out=6 kernel=5 pad=0 stride=2".parse::<LayerSpec>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn every_spec_ends_in_ten_units(d in 1usize..40, ratio in 0.5f64..6.0, growth in 1.0f64..3.0) {
            for spec in [build_lenet(d, ratio, None), build_vgg16(d, growth), build_vgg16_enhanced(d)] {
                let spec = spec.unwrap();
                let shapes = spec.layer_shapes().unwrap();
                proptest::prop_assert_eq!(shapes.last().unwrap(), &vec![NUM_CLASSES]);
            }
        }

        #[test]
        fn vgg_doubling_conserves_products(d in 1usize..64) {
            let r = conservation_report(&build_vgg16(d, 2.0).unwrap()).unwrap();
            for b in &r.blocks[..4] {
                proptest::prop_assert_eq!(b.product, 32 * d);
            }
        }
    }
}
