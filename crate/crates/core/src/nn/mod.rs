//! Small differentiable-layer library: tensors, layers with hand-written
//! backward passes, losses, initialization, optimizers and a
//! finite-difference gradient checker.

mod checkpoint;
mod gradcheck;
mod init;
mod layers;
mod loss;
mod network;
mod optim;
mod tensor;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, relative_error, GradCheck, GradCheckOptions};
pub use init::{xavier_bound, xavier_uniform};
pub use layers::LayerSpec;
pub use loss::{
    entropy, inverse_freq_weights, loss_ce, loss_gaussian_ce, loss_mse, loss_weighted_ce, softmax, LossKind,
    LossSpec, Target,
};
pub use network::{Network, Trace};
pub use optim::{Adam, Optimizer, OptimizerKind, Sgd};
pub use tensor::Tensor;

use alloc::string::String;
use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use num_traits::Float;

/// Element type of tensors: `f32` for training, `f64` for gradient checks.
pub trait Scalar:
    Float + AddAssign + SubAssign + MulAssign + DivAssign + Sum + Default + Debug + Send + Sync + 'static
{
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch at layer {layer} ({kind}): {reason}")]
    Shape { layer: usize, kind: &'static str, reason: String },
    #[error("invalid layer spec: {0}")]
    BadSpec(String),
    #[error("invalid loss: {0}")]
    BadLoss(String),
    #[error("all-zero histogram")]
    EmptyHistogram,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
