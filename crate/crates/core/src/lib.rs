//! Generalized LeNet and VGG-16 architecture families built under a
//! depth-size conservation rule, multiply-add accounting, power-law error
//! scaling fits, and a from-scratch CNN trainer for CIFAR-10.

pub mod arch;
pub mod complexity;
pub mod data_io;
pub mod error;
pub mod layers;
pub mod model;
pub mod par;
pub mod reference;
pub mod scaling;
pub mod tensor;
pub mod training;

mod linalg;

pub use error::{Error, Result};
pub use tensor::{Rng, Tensor};
