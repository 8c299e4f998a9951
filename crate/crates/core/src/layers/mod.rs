//! Forward and backward passes for every layer kind the two families use.

pub mod batchnorm;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod pool;
pub mod relu;
pub mod softmax;

pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormLayer, Mode};
pub use conv::{conv2d_backward, conv2d_backward_batch, conv2d_forward, conv2d_forward_batch, ConvGradients, ConvLayer};
pub use dense::{dense_backward, dense_forward, DenseLayer};
pub use gradcheck::{gradient_check, gradient_check_report, GradCheckReport};
pub use pool::{maxpool_backward, maxpool_forward, ArgmaxMap};
pub use relu::{relu_backward, relu_forward};
pub use softmax::{softmax, softmax_cross_entropy};
