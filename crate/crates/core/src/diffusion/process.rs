//! Forward corruption processes: DDPM noising and the rectified-flow line.

use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::schedule::NoiseSchedule;
use crate::{Error, Result, Scalar};

/// What the network is trained to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// The injected Gaussian noise.
    Epsilon,
    /// `eps - x0` along the data-to-noise line.
    Velocity,
}

/// A corruption process paired with its prediction target.
#[derive(Debug, Clone, PartialEq)]
pub enum Process<F> {
    Ddpm(NoiseSchedule<F>),
    /// Data at `s = 0`, noise at `s = 1`.
    Flow,
}

/// Noised training batch.
#[derive(Debug, Clone)]
pub struct NoisyBatch<F> {
    pub x0: Array2<F>,
    pub eps: Array2<F>,
    /// Normalized model time in `[0, 1]` per row.
    pub t: Vec<F>,
    /// Integer DDPM step per row; empty for flow batches.
    pub steps: Vec<usize>,
    pub x_t: Array2<F>,
    pub cond: Vec<usize>,
    pub objective: Objective,
}

impl<F: Scalar> NoisyBatch<F> {
    pub fn len(&self) -> usize {
        self.cond.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cond.is_empty()
    }

    /// Regression target for the batch's objective.
    pub fn target(&self) -> Array2<F> {
        match self.objective {
            Objective::Epsilon => self.eps.clone(),
            Objective::Velocity => &self.eps - &self.x0,
        }
    }

    /// Copy of the batch with every condition replaced by `cond`.
    pub fn with_condition(&self, cond: usize) -> Self {
        Self {
            cond: vec![cond; self.len()],
            ..self.clone()
        }
    }
}

pub fn draw_standard_normal<F: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Array2<F> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        F::of(z)
    })
}

/// `x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps`, one step per row.
pub fn add_noise<F: Scalar>(
    x0: ArrayView2<F>,
    eps: ArrayView2<F>,
    steps: &[usize],
    schedule: &NoiseSchedule<F>,
) -> Result<Array2<F>> {
    if x0.dim() != eps.dim() || steps.len() != x0.nrows() {
        return Err(Error::input("x0, eps and steps disagree in shape"));
    }
    let mut out = Array2::zeros(x0.raw_dim());
    for (i, &t) in steps.iter().enumerate() {
        let ab = schedule.alpha_bar(t)?;
        let (a, b) = (ab.sqrt(), (F::one() - ab).sqrt());
        for j in 0..x0.ncols() {
            out[[i, j]] = a * x0[[i, j]] + b * eps[[i, j]];
        }
    }
    Ok(out)
}

/// Point on the data-to-noise line at `s` and its velocity target `eps - x0`.
pub fn flow_interpolate<F: Scalar>(
    x0: ArrayView2<F>,
    eps: ArrayView2<F>,
    s: &[F],
) -> Result<(Array2<F>, Array2<F>)> {
    if x0.dim() != eps.dim() || s.len() != x0.nrows() {
        return Err(Error::input("x0, eps and s disagree in shape"));
    }
    if let Some(bad) = s.iter().find(|v| !(**v >= F::zero() && **v <= F::one())) {
        return Err(Error::input(format!("interpolation time {bad} outside [0, 1]")));
    }
    let mut x_s = Array2::zeros(x0.raw_dim());
    for (i, &si) in s.iter().enumerate() {
        for j in 0..x0.ncols() {
            x_s[[i, j]] = (F::one() - si) * x0[[i, j]] + si * eps[[i, j]];
        }
    }
    let mut v = eps.to_owned();
    Zip::from(&mut v).and(&x0).for_each(|v, &x| *v -= x);
    Ok((x_s, v))
}

impl<F: Scalar> Process<F> {
    pub fn objective(&self) -> Objective {
        match self {
            Process::Ddpm(_) => Objective::Epsilon,
            Process::Flow => Objective::Velocity,
        }
    }

    /// Normalized time of the fully noised state.
    pub fn max_noise_time(&self) -> F {
        F::one()
    }

    /// Coefficients `(a, b)` with `x_tau = a x0 + b eps`.
    pub fn signal_noise(&self, tau: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::input(format!("time {tau} outside [0, 1]")));
        }
        match self {
            Process::Ddpm(schedule) => {
                let t = ((tau * schedule.steps() as f64).round() as usize).clamp(1, schedule.steps());
                let ab = schedule.alpha_bar(t)?.f64();
                Ok((ab.sqrt(), (1.0 - ab).sqrt()))
            }
            Process::Flow => Ok((1.0 - tau, tau)),
        }
    }

    /// Draws noise and per-row times, then corrupts `x0`.
    pub fn noisy_batch<R: Rng + ?Sized>(
        &self,
        x0: Array2<F>,
        cond: Vec<usize>,
        rng: &mut R,
    ) -> Result<NoisyBatch<F>> {
        let n = x0.nrows();
        let eps = draw_standard_normal(rng, n, x0.ncols());
        match self {
            Process::Ddpm(schedule) => {
                let steps: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=schedule.steps())).collect();
                self.batch_at_steps(x0, eps, steps, cond)
            }
            Process::Flow => {
                let t: Vec<F> = (0..n).map(|_| F::of(rng.gen::<f64>())).collect();
                self.batch_at_times(x0, eps, t, cond)
            }
        }
    }

    /// DDPM batch at explicit integer steps.
    pub fn batch_at_steps(
        &self,
        x0: Array2<F>,
        eps: Array2<F>,
        steps: Vec<usize>,
        cond: Vec<usize>,
    ) -> Result<NoisyBatch<F>> {
        let Process::Ddpm(schedule) = self else {
            return Err(Error::config("integer steps only apply to the DDPM process"));
        };
        if cond.len() != x0.nrows() {
            return Err(Error::input("condition count differs from batch size"));
        }
        let x_t = add_noise(x0.view(), eps.view(), &steps, schedule)?;
        let t = steps.iter().map(|&s| schedule.normalized(s)).collect();
        Ok(NoisyBatch {
            x0,
            eps,
            t,
            steps,
            x_t,
            cond,
            objective: Objective::Epsilon,
        })
    }

    /// Batch at explicit normalized times; DDPM times are rounded to the
    /// nearest step in `[1, T]`.
    pub fn batch_at_times(
        &self,
        x0: Array2<F>,
        eps: Array2<F>,
        t: Vec<F>,
        cond: Vec<usize>,
    ) -> Result<NoisyBatch<F>> {
        match self {
            Process::Ddpm(schedule) => {
                let big_t = schedule.steps() as f64;
                let steps = t
                    .iter()
                    .map(|&tau| ((tau.f64() * big_t).round() as usize).clamp(1, schedule.steps()))
                    .collect();
                self.batch_at_steps(x0, eps, steps, cond)
            }
            Process::Flow => {
                if cond.len() != x0.nrows() {
                    return Err(Error::input("condition count differs from batch size"));
                }
                let (x_t, _) = flow_interpolate(x0.view(), eps.view(), &t)?;
                Ok(NoisyBatch {
                    x0,
                    eps,
                    t,
                    steps: Vec::new(),
                    x_t,
                    cond,
                    objective: Objective::Velocity,
                })
            }
        }
    }
}
