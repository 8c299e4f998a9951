//! CIFAR-10 binary batches.
//!
//! Each record is 3073 bytes: one label byte followed by 1024 red, 1024 green
//! and 1024 blue pixel bytes, each plane row-major. Training data lives in
//! `data_batch_1.bin` .. `data_batch_5.bin` and test data in
//! `test_batch.bin`, 10,000 records apiece.
//!
//! Pixels are kept as bytes and normalized when a batch is materialized; the
//! normalization is exact, so nothing is lost by deferring it.

use std::path::{Path, PathBuf};

use crate::arch::{CIFAR_INPUT, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

pub const IMAGE_LEN: usize = 3 * 32 * 32;
pub const RECORD_LEN: usize = IMAGE_LEN + 1;
/// Environment variable naming the directory that holds the batch files.
pub const DATASET_ENV: &str = "CIFAR10_DIR";

const TRAIN_FILES: [&str; 5] = ["data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"];
const TEST_FILE: &str = "test_batch.bin";
const RECORDS_PER_FILE: usize = 10_000;

/// `x -> 2 x / 255 - 1`, mapping `[0, 255]` onto `[-1, 1]`.
pub fn preprocess(pixel: u8) -> f64 {
    2.0 * (pixel as f64 / 255.0) - 1.0
}

/// Inverse of [`preprocess`] on `[-1, 1]`.
pub fn deprocess(x: f64) -> f64 {
    (x + 1.0) / 2.0 * 255.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
    Validation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pixels: Vec<u8>,
    labels: Vec<u8>,
    split: Split,
}

impl Dataset {
    pub fn new(pixels: Vec<u8>, labels: Vec<u8>, split: Split) -> Result<Self> {
        if pixels.len() != labels.len() * IMAGE_LEN {
            return Err(Error::DataLength { expected: labels.len() * IMAGE_LEN, got: pixels.len() });
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::InvalidLabel { label: l as usize, classes: NUM_CLASSES });
        }
        Ok(Self { pixels, labels, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    /// Raw bytes of image `i`, channel-planar.
    pub fn raw_image(&self, i: usize) -> &[u8] {
        &self.pixels[i * IMAGE_LEN..(i + 1) * IMAGE_LEN]
    }

    pub fn raw_pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        for &l in &self.labels {
            c[l as usize] += 1;
        }
        c
    }

    /// Normalized image `i` as `[3, 32, 32]`.
    pub fn image(&self, i: usize) -> Tensor {
        let data = self.raw_image(i).iter().map(|&p| preprocess(p)).collect();
        Tensor::from_vec(&CIFAR_INPUT, data).expect("image extent is fixed")
    }

    /// Normalized images at `indices` as `[n, 3, 32, 32]`.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(indices.len() * IMAGE_LEN);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Range(format!("index {i} out of {} examples", self.len())));
            }
            data.extend(self.raw_image(i).iter().map(|&p| preprocess(p)));
        }
        Tensor::from_vec(&[indices.len(), 3, 32, 32], data)
    }

    pub fn batch_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.label(i)).collect()
    }

    pub fn subset(&self, indices: &[usize], split: Split) -> Result<Dataset> {
        let mut pixels = Vec::with_capacity(indices.len() * IMAGE_LEN);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Range(format!("index {i} out of {} examples", self.len())));
            }
            pixels.extend_from_slice(self.raw_image(i));
        }
        Dataset::new(pixels, indices.iter().map(|&i| self.labels[i]).collect(), split)
    }

    /// Holds out `count` examples, the same number from every class, chosen
    /// by `seed`. Returns `(remaining training data, validation data)`.
    pub fn split_validation(&self, count: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        if !count.is_multiple_of(NUM_CLASSES) {
            return Err(Error::InvalidParameter(format!("validation size {count} is not a multiple of {NUM_CLASSES}")));
        }
        let per_class = count / NUM_CLASSES;
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l as usize].push(i);
        }
        let mut rng = Rng::new(seed);
        let (mut keep, mut held) = (Vec::new(), Vec::new());
        for (class, idx) in by_class.iter_mut().enumerate() {
            if idx.len() < per_class {
                return Err(Error::InvalidParameter(format!("class {class} has only {} examples, {per_class} requested", idx.len())));
            }
            rng.shuffle(idx);
            held.extend_from_slice(&idx[..per_class]);
            keep.extend_from_slice(&idx[per_class..]);
        }
        keep.sort_unstable();
        held.sort_unstable();
        Ok((self.subset(&keep, self.split)?, self.subset(&held, Split::Validation)?))
    }
}

/// Reads one batch file. `expected` enforces the record count.
pub fn load_batch_file(path: &Path, expected: Option<usize>) -> Result<(Vec<u8>, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let whole = bytes.len() / RECORD_LEN;
    if bytes.len() % RECORD_LEN != 0 {
        return Err(Error::Truncated { path: path.into(), offset: (whole * RECORD_LEN) as u64 });
    }
    if let Some(n) = expected {
        if whole != n {
            return Err(Error::RecordCount { path: path.into(), expected: n, found: whole });
        }
    }
    let mut labels = Vec::with_capacity(whole);
    let mut pixels = Vec::with_capacity(whole * IMAGE_LEN);
    for (r, record) in bytes.chunks_exact(RECORD_LEN).enumerate() {
        if record[0] as usize >= NUM_CLASSES {
            return Err(Error::CorruptRecord { path: path.into(), offset: (r * RECORD_LEN) as u64, label: record[0] });
        }
        labels.push(record[0]);
        pixels.extend_from_slice(&record[1..]);
    }
    Ok((pixels, labels))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadOptions {
    /// Require exactly 10,000 records per file.
    pub strict_counts: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { strict_counts: true }
    }
}

/// Accepts either the directory holding the `.bin` files or its parent (the
/// archive unpacks into `cifar-10-batches-bin/`).
fn resolve_root(dir: &Path) -> PathBuf {
    let nested = dir.join("cifar-10-batches-bin");
    if !dir.join(TEST_FILE).exists() && nested.join(TEST_FILE).exists() {
        nested
    } else {
        dir.to_path_buf()
    }
}

pub fn load_cifar10(dir: &Path) -> Result<(Dataset, Dataset)> {
    load_cifar10_with(dir, LoadOptions::default())
}

pub fn load_cifar10_with(dir: &Path, options: LoadOptions) -> Result<(Dataset, Dataset)> {
    let root = resolve_root(dir);
    let expected = options.strict_counts.then_some(RECORDS_PER_FILE);
    let (mut pixels, mut labels) = (Vec::new(), Vec::new());
    for name in TRAIN_FILES {
        let (p, l) = load_batch_file(&root.join(name), expected)?;
        pixels.extend(p);
        labels.extend(l);
    }
    let train = Dataset::new(pixels, labels, Split::Train)?;
    let (p, l) = load_batch_file(&root.join(TEST_FILE), expected)?;
    Ok((train, Dataset::new(p, l, Split::Test)?))
}
