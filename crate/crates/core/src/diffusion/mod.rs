//! Noise schedules, forward processes, samplers and field evaluation.

mod field;
mod process;
mod sampler;
mod schedule;

pub use field::{score_field, FieldSample, Lattice};
pub use process::{add_noise, draw_standard_normal, flow_interpolate, NoisyBatch, Objective, Process};
pub use sampler::{
    ddpm_sample, euler_integrate, flow_integrate, flow_sample, guided_predict, GuidanceConfig,
    TrajectoryRecord,
};
pub use schedule::NoiseSchedule;
