//! Class-stratified mini-batches: every batch holds the same number of
//! examples from each class, and an epoch visits every example once.

use crate::error::{Error, Result};
use crate::tensor::Rng;

/// Shuffled batches of indices into `labels`. The classes are the distinct
/// labels present; each needs the same count, divisible by
/// `batch_size / classes`.
pub fn stratified_batches<L: Copy + Into<usize>>(labels: &[L], batch_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let labels: Vec<usize> = labels.iter().map(|&l| l.into()).collect();
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class.retain(|c| !c.is_empty());
    let k = by_class.len();
    if k == 0 {
        return Err(Error::Stratification("no examples".into()));
    }
    if batch_size == 0 || !batch_size.is_multiple_of(k) {
        return Err(Error::Stratification(format!("batch size {batch_size} is not a multiple of the {k} classes")));
    }
    let per = batch_size / k;
    let count = by_class[0].len();
    if by_class.iter().any(|c| c.len() != count) {
        return Err(Error::Stratification("classes have unequal example counts".into()));
    }
    if !count.is_multiple_of(per) {
        return Err(Error::Stratification(format!("{count} examples per class do not split into groups of {per}")));
    }
    let mut rng = Rng::new(seed);
    for c in &mut by_class {
        rng.shuffle(c);
    }
    let mut batches: Vec<Vec<usize>> = (0..count / per)
        .map(|b| by_class.iter().flat_map(|c| c[b * per..(b + 1) * per].iter().copied()).collect())
        .collect();
    for b in &mut batches {
        rng.shuffle(b);
    }
    rng.shuffle(&mut batches);
    Ok(batches)
}
