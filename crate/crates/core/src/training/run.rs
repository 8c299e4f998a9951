//! The training loop, evaluation and multi-seed aggregation.

use crate::arch::ArchSpec;
use crate::data_io::Dataset;
use crate::error::{Error, Result};
use crate::layers::batchnorm::Mode;
use crate::model::{Classifier, Network};
use crate::tensor::{mix_seed, Rng, Tensor};

use super::augment::augment_batch;
use super::batches::stratified_batches;
use super::config::{lr_at, TrainConfig};
use super::optim::sgd_nesterov_step;

const EVAL_CHUNK: usize = 500;

// Stream tags for the per-seed random sources.
const INIT_STREAM: u64 = 0;
const BATCH_STREAM: u64 = 1;
const AUGMENT_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub seed: u64,
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean mini-batch loss over the epoch.
    pub train_loss: f64,
    pub test_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub final_error: f64,
    pub trace: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub runs: Vec<SeedResult>,
    pub mean_error: f64,
    /// Sample standard deviation; absent for a single seed.
    pub std_error: Option<f64>,
}

impl RunResult {
    pub fn from_runs(runs: Vec<SeedResult>) -> Result<Self> {
        let errors: Vec<f64> = runs.iter().map(|r| r.final_error).collect();
        let (mean_error, std_error) = aggregate_runs(&errors)?;
        Ok(Self { runs, mean_error, std_error })
    }

    /// One row per seed and epoch: `seed,epoch,train_loss,test_error`.
    pub fn trace_table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let cols = ["seed", "epoch", "train_loss", "test_error"].map(String::from).to_vec();
        let rows = self
            .runs
            .iter()
            .flat_map(|r| &r.trace)
            .map(|e| vec![e.seed.to_string(), e.epoch.to_string(), e.train_loss.to_string(), e.test_error.to_string()])
            .collect();
        (cols, rows)
    }

    /// One row per seed plus a `mean` row carrying the standard deviation.
    pub fn summary_table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let cols = ["seed", "test_error", "std"].map(String::from).to_vec();
        let mut rows: Vec<Vec<String>> =
            self.runs.iter().map(|r| vec![r.seed.to_string(), r.final_error.to_string(), String::new()]).collect();
        rows.push(vec!["mean".into(), self.mean_error.to_string(), self.std_error.map(|s| s.to_string()).unwrap_or_default()]);
        (cols, rows)
    }
}

/// Sample mean and, for two or more values, the `n - 1` standard deviation.
pub fn aggregate_runs(errors: &[f64]) -> Result<(f64, Option<f64>)> {
    if errors.is_empty() {
        return Err(Error::InvalidParameter("no runs to aggregate".into()));
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let std = (errors.len() >= 2).then(|| (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    Ok((mean, std))
}

/// Predicted class for each example: the index of the largest score, the
/// lowest index winning ties.
pub fn predict(model: &impl Classifier, data: &Dataset) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(data.len());
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let scores = model.scores(&data.batch(chunk)?)?;
        let classes = scores.shape().get(1).copied().unwrap_or(0);
        if scores.shape() != [chunk.len(), classes] || classes == 0 {
            return Err(Error::ShapeMismatch { context: "classifier scores", expected: vec![chunk.len(), classes], got: scores.shape().to_vec() });
        }
        for row in scores.data().chunks_exact(classes) {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            out.push(best);
        }
    }
    Ok(out)
}

/// Misclassified fraction of `data`.
pub fn evaluate(model: &impl Classifier, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("cannot evaluate on an empty dataset".into()));
    }
    let pred = predict(model, data)?;
    let wrong = pred.iter().enumerate().filter(|&(i, &p)| p != data.label(i)).count();
    Ok(wrong as f64 / data.len() as f64)
}

/// Trains one seed and returns its result with the final network. The
/// observer sees every epoch's record together with the network after that
/// epoch.
pub fn train_seed(
    spec: &ArchSpec,
    config: &TrainConfig,
    train_data: &Dataset,
    eval_data: &Dataset,
    seed: u64,
    observer: &mut dyn FnMut(&EpochRecord, &Network) -> Result<()>,
) -> Result<(SeedResult, Network)> {
    config.validate()?;
    let mut net = Network::from_spec(spec, &mut Rng::new(mix_seed(seed, INIT_STREAM)))?;
    let mut velocity: Vec<Tensor> = net.params().iter().map(|p| p.zeros_like()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 1..=config.epochs {
        let lr = lr_at(config, epoch)?;
        let batches = stratified_batches(train_data.labels(), config.batch_size, mix_seed(mix_seed(seed, BATCH_STREAM), epoch as u64))?;
        let augment_seed = mix_seed(mix_seed(seed, AUGMENT_STREAM), epoch as u64);
        let mut loss_sum = 0.0;
        for (b, idx) in batches.iter().enumerate() {
            step += 1;
            let mut images = train_data.batch(idx)?;
            augment_batch(&mut images, mix_seed(augment_seed, b as u64))?;
            let labels = train_data.batch_labels(idx);
            let diverged = |e| match e {
                Error::NonFinite(_) => Error::Diverged { seed, epoch, step },
                e => e,
            };
            let (loss, grads, pass) = net.loss_and_gradients(&images, &labels, Mode::Train).map_err(diverged)?;
            if !loss.is_finite() || grads.0.iter().any(|g| !g.all_finite()) {
                return Err(Error::Diverged { seed, epoch, step });
            }
            net.update_running_stats(&pass);
            for ((w, g), v) in net.params_mut().into_iter().zip(&grads.0).zip(&mut velocity) {
                sgd_nesterov_step(w, g, v, lr, config.mu, config.alpha)?;
            }
            loss_sum += loss;
        }
        if net.params().iter().any(|p| !p.all_finite()) {
            return Err(Error::Diverged { seed, epoch, step });
        }
        let record = EpochRecord {
            seed,
            epoch,
            learning_rate: lr,
            train_loss: loss_sum / batches.len() as f64,
            test_error: evaluate(&net, eval_data).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { seed, epoch, step },
                e => e,
            })?,
        };
        observer(&record, &net)?;
        trace.push(record);
    }
    let final_error = trace.last().map_or(f64::NAN, |r| r.test_error);
    Ok((SeedResult { seed, final_error, trace }, net))
}

/// [`train`] with a per-epoch observer.
pub fn train_with(
    spec: &ArchSpec,
    config: &TrainConfig,
    train_data: &Dataset,
    test_data: &Dataset,
    seeds: &[u64],
    observer: &mut dyn FnMut(&EpochRecord, &Network) -> Result<()>,
) -> Result<RunResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    config.validate()?;
    let held;
    let (train_data, eval_data) = if config.validation_holdout > 0 {
        held = train_data.split_validation(config.validation_holdout, config.seed)?;
        (&held.0, &held.1)
    } else {
        (train_data, test_data)
    };
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        runs.push(train_seed(spec, config, train_data, eval_data, seed, observer)?.0);
    }
    RunResult::from_runs(runs)
}

/// Trains `spec` once per seed and reports the final-epoch test error of
/// each run with their mean and sample standard deviation.
pub fn train(spec: &ArchSpec, config: &TrainConfig, train_data: &Dataset, test_data: &Dataset, seeds: &[u64]) -> Result<RunResult> {
    train_with(spec, config, train_data, test_data, seeds, &mut |_, _| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::build_lenet;
    use crate::data_io::{Split, IMAGE_LEN};
    use crate::training::config::{L2Mode, Regime};

    fn balanced(n_per_class: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let n = n_per_class * 10;
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        let pixels = (0..n * IMAGE_LEN).map(|_| (rng.next_u64() & 0xff) as u8).collect();
        Dataset::new(pixels, labels, Split::Test).unwrap()
    }

    struct Fixed(Box<dyn Fn(usize, usize) -> f64>);
    impl Classifier for Fixed {
        fn scores(&self, images: &Tensor) -> Result<Tensor> {
            let n = images.shape()[0];
            Tensor::from_vec(&[n, 10], (0..n * 10).map(|i| (self.0)(i / 10, i % 10)).collect())
        }
    }

    #[test]
    fn constant_scores_give_nine_tenths() {
        let ds = balanced(3, 1);
        assert!((evaluate(&Fixed(Box::new(|_, _| 1.0)), &ds).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(predict(&Fixed(Box::new(|_, k| if k == 4 || k == 7 { 2.0 } else { 0.0 })), &ds).unwrap()[0], 4);
    }

    #[test]
    fn oracle_scores_give_zero_error() {
        let ds = balanced(60, 2);
        // rows arrive in chunks of EVAL_CHUNK, so recover the global index
        let labels: Vec<usize> = (0..ds.len()).map(|i| ds.label(i)).collect();
        let seen = std::cell::Cell::new(0usize);
        struct Oracle<'a>(&'a [usize], &'a std::cell::Cell<usize>);
        impl Classifier for Oracle<'_> {
            fn scores(&self, images: &Tensor) -> Result<Tensor> {
                let n = images.shape()[0];
                let start = self.1.replace(self.1.get() + n);
                let mut out = vec![0.0; n * 10];
                for i in 0..n {
                    out[i * 10 + self.0[start + i]] = 1.0;
                }
                Tensor::from_vec(&[n, 10], out)
            }
        }
        assert_eq!(evaluate(&Oracle(&labels, &seen), &ds).unwrap(), 0.0);
    }

    #[test]
    fn aggregation() {
        assert_eq!(aggregate_runs(&[0.2]).unwrap(), (0.2, None));
        let (m, s) = aggregate_runs(&[0.1, 0.3]).unwrap();
        assert!((m - 0.2).abs() < 1e-15 && (s.unwrap() - 0.141_421_356).abs() < 1e-8);
        assert_eq!(aggregate_runs(&[0.5; 4]).unwrap().1, Some(0.0));
        assert!(aggregate_runs(&[]).is_err());
    }

    fn tiny_config(epochs: usize, eta: f64) -> TrainConfig {
        TrainConfig {
            eta,
            mu: 0.9,
            alpha: 1e-4,
            epochs,
            batch_size: 20,
            schedule: vec![Regime { first_epoch: 1, last_epoch: epochs, q: 0.8, interval: 1 }],
            seed: 0,
            validation_holdout: 0,
            l2: L2Mode::Coupled,
        }
    }

    #[test]
    fn short_run_is_deterministic_and_traced() {
        let train_set = balanced(4, 3);
        let test_set = balanced(2, 4);
        let spec = build_lenet(1, 2.0, None).unwrap();
        let cfg = tiny_config(2, 0.01);
        let a = train(&spec, &cfg, &train_set, &test_set, &[5, 6]).unwrap();
        let b = train(&spec, &cfg, &train_set, &test_set, &[5, 6]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.runs.len(), 2);
        assert_eq!(a.trace_table().1.len(), 4);
        assert_eq!(a.summary_table().1.len(), 3);
        assert!(a.std_error.is_some());
        assert!((a.runs[0].trace[1].learning_rate - 0.008).abs() < 1e-15);
    }

    #[test]
    fn divergence_names_the_step() {
        let train_set = balanced(4, 3);
        let spec = build_lenet(1, 2.0, None).unwrap();
        match train(&spec, &tiny_config(3, 1e6), &train_set, &train_set, &[1]) {
            Err(Error::Diverged { seed, epoch, step }) => {
                assert_eq!(seed, 1);
                assert!(epoch >= 1 && step >= 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
