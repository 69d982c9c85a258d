//! Toy-scale diffusion and flow models with concept-imbalance-aware training.
//!
//! Everything is generic over the float type through [`Scalar`]; the aliases
//! below fix it for the common cases.

pub mod balancing;
pub mod diffusion;
mod error;
pub mod nn;
mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mlp64 = nn::ModelParams<f64>;
pub type Mlp32 = nn::ModelParams<f32>;
pub type Dataset64 = synth::LabeledDataset<f64>;
pub type Dataset32 = synth::LabeledDataset<f32>;
pub type Process64 = diffusion::Process<f64>;
pub type Process32 = diffusion::Process<f32>;
