use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Gradients, ModelParams};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct FdOptions {
    /// Central-difference half step.
    pub step: f64,
    /// Number of parameter entries probed; `None` probes all of them.
    pub samples: Option<usize>,
    /// Lower bound on the relative-error denominator.
    pub floor: f64,
    pub seed: u64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            step: 1e-4,
            samples: Some(256),
            floor: 1e-6,
            seed: 0,
        }
    }
}

/// Compares analytic gradients with central finite differences.
///
/// `loss` returns the scalar loss and its analytic gradient for a parameter
/// state. Returns the maximum over probed entries of
/// `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
pub fn finite_diff_check<F, L>(params: &ModelParams<F>, loss: L, opts: FdOptions) -> Result<f64>
where
    F: Scalar,
    L: Fn(&ModelParams<F>) -> Result<(F, Gradients<F>)>,
{
    if !(opts.step > 0.0) {
        return Err(Error::config(format!("finite-difference step must be > 0, got {}", opts.step)));
    }
    let (_, analytic) = loss(params)?;
    let sizes: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
    let total: usize = sizes.iter().sum();
    let picks: Vec<usize> = match opts.samples {
        Some(k) if k < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut v = sample(&mut rng, total, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..total).collect(),
    };
    let locate = |mut flat: usize| {
        for (t, &n) in sizes.iter().enumerate() {
            if flat < n {
                return (t, flat);
            }
            flat -= n;
        }
        unreachable!("index within total")
    };
    let analytic_slices = analytic.slices();
    let h = F::of(opts.step);
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for flat in picks {
        let (t, i) = locate(flat);
        let orig = probe.slices()[t][i];
        probe.slices_mut()[t][i] = orig + h;
        let (plus, _) = loss(&probe)?;
        probe.slices_mut()[t][i] = orig - h;
        let (minus, _) = loss(&probe)?;
        probe.slices_mut()[t][i] = orig;
        let numeric = (plus - minus).f64() / (2.0 * opts.step);
        let a = analytic_slices[t][i].f64();
        let denom = a.abs().max(numeric.abs()).max(opts.floor);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelLayout;

    fn tiny() -> ModelParams<f64> {
        let layout = ModelLayout {
            hidden_width: 4,
            time_dim: 2,
            cond_dim: 2,
            hidden_layers: 1,
            ..ModelLayout::default()
        };
        ModelParams::init(layout, 3).unwrap()
    }

    /// `L = sum_i c_i theta_i^2` with `c_i = 1 + i mod 3`.
    fn quadratic(p: &ModelParams<f64>) -> Result<(f64, Gradients<f64>)> {
        let mut g = Gradients::zeros_like(p);
        let mut loss = 0.0;
        let mut idx = 0usize;
        for (ps, gs) in p.slices().into_iter().zip(g.slices_mut()) {
            for (&v, d) in ps.iter().zip(gs.iter_mut()) {
                let c = 1.0 + (idx % 3) as f64;
                loss += c * v * v;
                *d = 2.0 * c * v;
                idx += 1;
            }
        }
        Ok((loss, g))
    }

    #[test]
    fn quadratic_loss_is_exact() {
        let err = finite_diff_check(
            &tiny(),
            quadratic,
            FdOptions {
                samples: None,
                ..FdOptions::default()
            },
        )
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let err = finite_diff_check(
            &tiny(),
            |p| {
                let (l, mut g) = quadratic(p)?;
                g.scale(1.5);
                Ok((l, g))
            },
            FdOptions::default(),
        )
        .unwrap();
        assert!(err > 0.1);
    }

    #[test]
    fn zero_step_rejected() {
        let opts = FdOptions {
            step: 0.0,
            ..FdOptions::default()
        };
        assert!(matches!(
            finite_diff_check(&tiny(), quadratic, opts),
            Err(Error::Config(_))
        ));
    }
}
