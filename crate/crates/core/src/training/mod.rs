//! Training protocol: Nesterov SGD with coupled L2, stepped learning-rate
//! decay, class-stratified mini-batches, flip/translate augmentation and
//! multi-seed statistics.

pub mod augment;
pub mod batches;
pub mod config;
pub mod optim;
pub mod run;

pub use augment::{augment, augment_batch, augment_with, MAX_SHIFT};
pub use batches::stratified_batches;
pub use config::{lr_at, preset, preset_arch, L2Mode, Regime, TrainConfig, Variant, BATCH_SIZE};
pub use optim::sgd_nesterov_step;
pub use run::{aggregate_runs, evaluate, predict, train, train_seed, train_with, EpochRecord, RunResult, SeedResult};
