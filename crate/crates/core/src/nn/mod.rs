//! Conditional MLP denoiser, optimizers and gradient checking.

pub mod checkpoint;
mod embed;
mod gradcheck;
mod model;
mod optim;

pub use embed::{time_embedding, time_embedding_into};
pub use gradcheck::{finite_diff_check, FdOptions};
pub use model::{Activation, Dense, ForwardCache, Gradients, ModelLayout, ModelParams};
pub use optim::{Optimizer, OptimizerKind};
