//! Ancestral DDPM and Euler flow samplers with classifier-free guidance.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::process::draw_standard_normal;
use super::schedule::NoiseSchedule;
use crate::nn::ModelParams;
use crate::{Error, Result, Scalar};

/// Inference-time weight on the conditional/unconditional difference:
/// `pred = uncond + scale * (cond - uncond)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub scale: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl GuidanceConfig {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::config(format!("guidance scale must be >= 0, got {scale}")));
        }
        Ok(Self { scale })
    }
}

/// Sampler states, step-major: `states[k]` holds every sample after `k` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<F> {
    pub states: Vec<Array2<F>>,
}

impl<F: Scalar> TrajectoryRecord<F> {
    pub fn num_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn num_samples(&self) -> usize {
        self.states.first().map_or(0, |s| s.nrows())
    }

    /// Path of one sample through every recorded state.
    pub fn path(&self, sample: usize) -> Vec<[F; 2]> {
        self.states
            .iter()
            .map(|s| [s[[sample, 0]], s[[sample, 1]]])
            .collect()
    }
}

/// Guided prediction at a shared time. `cond = None` is unconditional.
///
/// Scales 0 and 1 short-circuit to the pure unconditional and conditional
/// predictions so both identities hold bit for bit.
pub fn guided_predict<F: Scalar>(
    params: &ModelParams<F>,
    x: ArrayView2<F>,
    tau: F,
    cond: Option<usize>,
    guidance: GuidanceConfig,
) -> Result<Array2<F>> {
    let n = x.nrows();
    let t = vec![tau; n];
    let null = params.layout().null_class();
    match cond {
        None => params.predict(x, &t, &vec![null; n]),
        Some(_) if guidance.scale == 0.0 => params.predict(x, &t, &vec![null; n]),
        Some(c) if guidance.scale == 1.0 => params.predict(x, &t, &vec![c; n]),
        Some(c) => {
            let uncond = params.predict(x, &t, &vec![null; n])?;
            let conditional = params.predict(x, &t, &vec![c; n])?;
            let w = F::of(guidance.scale);
            Ok(&uncond + &((&conditional - &uncond) * w))
        }
    }
}

fn check_finite<F: Scalar>(x: &Array2<F>, step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(format!("non-finite sampler state at step {step}")))
    }
}

/// Reverse ancestral chain from `t = T` to `t = 1` for an epsilon-prediction model.
pub fn ddpm_sample<F: Scalar>(
    params: &ModelParams<F>,
    schedule: &NoiseSchedule<F>,
    cond: Option<usize>,
    n: usize,
    guidance: GuidanceConfig,
    seed: u64,
) -> Result<(Array2<F>, TrajectoryRecord<F>)> {
    if n == 0 {
        return Err(Error::input("sample count must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Array2<F> = draw_standard_normal(&mut rng, n, params.layout().point_dim);
    let mut states = Vec::with_capacity(schedule.steps() + 1);
    states.push(x.clone());
    for t in (1..=schedule.steps()).rev() {
        let eps = guided_predict(params, x.view(), schedule.normalized(t), cond, guidance)?;
        let beta = schedule.beta(t)?;
        let ab = schedule.alpha_bar(t)?;
        let alpha = F::one() - beta;
        let coef = beta / (F::one() - ab).sqrt();
        let inv_sqrt_alpha = F::one() / alpha.sqrt();
        x = (&x - &(eps * coef)) * inv_sqrt_alpha;
        if t > 1 {
            let ab_prev = schedule.alpha_bar(t - 1)?;
            let sigma = (beta * (F::one() - ab_prev) / (F::one() - ab)).sqrt();
            let z: Array2<F> = draw_standard_normal(&mut rng, n, x.ncols());
            x = x + z * sigma;
        }
        check_finite(&x, schedule.steps() - t + 1)?;
        states.push(x.clone());
    }
    Ok((x, TrajectoryRecord { states }))
}

/// Euler integration of a velocity model from `s = 1` (noise) to `s = 0`.
pub fn flow_sample<F: Scalar>(
    params: &ModelParams<F>,
    steps: usize,
    cond: Option<usize>,
    guidance: GuidanceConfig,
    n: usize,
    seed: u64,
) -> Result<(Array2<F>, TrajectoryRecord<F>)> {
    if steps == 0 {
        return Err(Error::config("flow sampler needs at least one step"));
    }
    if n == 0 {
        return Err(Error::input("sample count must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Array2<F> = draw_standard_normal(&mut rng, n, params.layout().point_dim);
    flow_integrate(params, x0, steps, cond, guidance)
}

/// Euler integration of a trained model from a given initial noise state.
pub fn flow_integrate<F: Scalar>(
    params: &ModelParams<F>,
    x: Array2<F>,
    steps: usize,
    cond: Option<usize>,
    guidance: GuidanceConfig,
) -> Result<(Array2<F>, TrajectoryRecord<F>)> {
    euler_integrate(x, steps, |x, s| guided_predict(params, x, s, cond, guidance))
}

/// Euler scheme `x <- x - ds * v(x, s)` over `steps` uniform steps from
/// `s = 1` down to `s = 0`.
pub fn euler_integrate<F, V>(mut x: Array2<F>, steps: usize, mut velocity: V) -> Result<(Array2<F>, TrajectoryRecord<F>)>
where
    F: Scalar,
    V: FnMut(ArrayView2<F>, F) -> Result<Array2<F>>,
{
    if steps == 0 {
        return Err(Error::config("flow sampler needs at least one step"));
    }
    let ds = F::of(1.0 / steps as f64);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x.clone());
    for k in 0..steps {
        let s = F::of((steps - k) as f64 / steps as f64);
        let v = velocity(x.view(), s)?;
        x = x - v * ds;
        check_finite(&x, k + 1)?;
        states.push(x.clone());
    }
    Ok((x, TrajectoryRecord { states }))
}
