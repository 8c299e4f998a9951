//! CIFAR-10 loading, preprocessing, checkpoints and CSV tables.

pub mod checkpoint;
pub mod cifar;
pub mod table;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, Precision};
pub use cifar::{
    deprocess, load_batch_file, load_cifar10, load_cifar10_with, preprocess, Dataset, LoadOptions, Split, DATASET_ENV,
    IMAGE_LEN, RECORD_LEN,
};
pub use table::{emit_table, parse_table};
