//! Dense row-major `f64` tensors and the deterministic random source used
//! throughout the crate.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense n-dimensional array of `f64` in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidShape(format!("{shape:?}")));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    /// Tensor of the given shape with every element set to `fill`.
    pub fn new(shape: &[usize], fill: f64) -> Result<Self> {
        let len = checked_len(shape)?;
        if !fill.is_finite() {
            return Err(Error::NonFinite("fill value"));
        }
        Ok(Self { shape: shape.to_vec(), data: vec![fill; len] })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape, 0.0)
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = checked_len(shape)?;
        if data.len() != len {
            return Err(Error::DataLength { expected: len, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data"));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    /// Zero tensor with the same shape as `self`.
    pub fn zeros_like(&self) -> Self {
        Self { shape: self.shape.clone(), data: vec![0.0; self.data.len()] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Reinterpret the data under a new shape with the same element count.
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        let len = checked_len(shape)?;
        if len != self.data.len() {
            return Err(Error::ShapeMismatch {
                context: "reshape",
                expected: self.shape.clone(),
                got: shape.to_vec(),
            });
        }
        Ok(Self { shape: shape.to_vec(), data: self.data })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// He-normal initialization: i.i.d. `N(0, 2 / fan_in)`.
pub fn he_normal_init(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Result<Tensor> {
    if fan_in == 0 {
        return Err(Error::InvalidParameter("fan_in must be at least 1".into()));
    }
    let len = checked_len(shape)?;
    let std = (2.0 / fan_in as f64).sqrt();
    let data = (0..len).map(|_| std * rng.normal()).collect();
    Tensor::from_vec(shape, data)
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; the fixed seed-mixing function for child streams.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded ChaCha8 stream. Same seed, same values, on every platform.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for sub-task `index`, derived only from the seed.
    pub fn child(&self, index: u64) -> Rng {
        Rng::new(mix_seed(self.seed, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        self.inner.random_range(lo..=hi)
    }

    pub fn coin(&mut self) -> bool {
        self.inner.random::<bool>()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.inner.random_range(0..=i);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_fills_and_rejects_zero_extent() {
        let t = Tensor::new(&[2, 3], 0.0).unwrap();
        assert_eq!(t.data(), &[0.0; 6]);
        assert_eq!(Tensor::new(&[1], 7.5).unwrap().data(), &[7.5]);
        let ones = Tensor::new(&[3, 32, 32], 1.0).unwrap();
        assert_eq!(ones.len(), 3072);
        assert_eq!(ones.sum(), 3072.0);
        assert!(matches!(Tensor::new(&[2, 0], 1.0), Err(Error::InvalidShape(_))));
        assert!(matches!(Tensor::new(&[], 1.0), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn from_vec_validates() {
        assert!(matches!(
            Tensor::from_vec(&[2, 2], vec![1.0; 3]),
            Err(Error::DataLength { expected: 4, got: 3 })
        ));
        assert!(Tensor::from_vec(&[1], vec![f64::NAN]).is_err());
    }

    #[test]
    fn reshape_rejects_incompatible() {
        let t = Tensor::zeros(&[2, 3]).unwrap();
        assert!(t.reshape(&[4, 2]).is_err());
    }

    fn moments(t: &Tensor) -> (f64, f64) {
        let n = t.len() as f64;
        let mean = t.sum() / n;
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn he_normal_moments() {
        let mut rng = Rng::new(11);
        let t = he_normal_init(&[1_000_000], 2, &mut rng).unwrap();
        let (mean, std) = moments(&t);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((std - 1.0).abs() < 0.01, "std {std}");

        let t = he_normal_init(&[1000, 1000], 50, &mut rng).unwrap();
        let (mean, std) = moments(&t);
        assert!(mean.abs() < 0.01);
        assert!((std - 0.2).abs() < 0.005, "std {std}");
    }

    #[test]
    fn he_normal_within_five_standard_errors() {
        let n = 1_000_000usize;
        for (seed, fan_in) in [(1u64, 3usize), (2, 27), (3, 400)] {
            let mut rng = Rng::new(seed);
            let t = he_normal_init(&[n], fan_in, &mut rng).unwrap();
            let sigma2 = 2.0 / fan_in as f64;
            let mean = t.sum() / n as f64;
            let m2 = t.data().iter().map(|v| v * v).sum::<f64>() / n as f64;
            // se(mean) = sigma/sqrt(n); se(second moment) = sigma^2 sqrt(2/n)
            assert!(mean.abs() < 5.0 * sigma2.sqrt() / (n as f64).sqrt());
            assert!((m2 - sigma2).abs() < 5.0 * sigma2 * (2.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn he_normal_rejects_zero_fan_in() {
        let mut rng = Rng::new(0);
        assert!(matches!(he_normal_init(&[4], 0, &mut rng), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn equal_seeds_equal_streams() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = Rng::new(43);
        assert_ne!(Rng::new(42).next_u64(), c.next_u64());
    }

    #[test]
    fn children_are_distinct_and_reproducible() {
        let root = Rng::new(5);
        assert_eq!(root.child(3).next_u64(), Rng::new(5).child(3).next_u64());
        assert_ne!(root.child(0).next_u64(), root.child(1).next_u64());
    }

    proptest::proptest! {
        #[test]
        fn reshape_round_trip(a in 1usize..6, b in 1usize..6, c in 1usize..6, seed in 0u64..1000) {
            let mut rng = Rng::new(seed);
            let data: Vec<f64> = (0..a * b * c).map(|_| rng.normal()).collect();
            let t = Tensor::from_vec(&[a, b, c], data).unwrap();
            let back = t.clone().reshape(&[a * b, c]).unwrap().reshape(&[a, b, c]).unwrap();
            proptest::prop_assert_eq!(back, t);
        }
    }
}
