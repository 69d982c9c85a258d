use serde::{Deserialize, Serialize};

use super::model::{Gradients, ModelParams};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    /// `theta <- theta - lr * grad`.
    Sgd,
    /// Bias-corrected first/second moment method:
    ///
    /// ```text
    /// m <- b1 m + (1 - b1) g
    /// v <- b2 v + (1 - b2) g^2
    /// theta <- theta - lr * (m / (1 - b1^k)) / (sqrt(v / (1 - b2^k)) + eps)
    /// ```
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::adam()
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer<F> {
    kind: OptimizerKind,
    lr: F,
    steps: u64,
    first: Vec<Vec<F>>,
    second: Vec<Vec<F>>,
}

impl<F: Scalar> Optimizer<F> {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {lr}")));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = kind {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return Err(Error::config("adam betas must lie in [0, 1) and eps > 0"));
            }
        }
        Ok(Self {
            kind,
            lr: F::of(lr),
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr.f64()
    }

    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {lr}")));
        }
        self.lr = F::of(lr);
        Ok(())
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Non-finite gradients abort the step and leave
    /// both parameters and moment state untouched.
    pub fn step(&mut self, params: &mut ModelParams<F>, grads: &Gradients<F>) -> Result<()> {
        let shapes: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
        let gslices = grads.slices();
        if gslices.len() != shapes.len() || gslices.iter().zip(&shapes).any(|(g, &n)| g.len() != n) {
            return Err(Error::input("gradient buffers do not mirror parameter shapes"));
        }
        if !grads.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite gradient at optimizer step {}",
                self.steps + 1
            )));
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.slices_mut().into_iter().zip(gslices) {
                    for (x, &d) in p.iter_mut().zip(g) {
                        *x -= self.lr * d;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.first.is_empty() {
                    self.first = shapes.iter().map(|&n| vec![F::zero(); n]).collect();
                    self.second = self.first.clone();
                }
                let k = self.steps as i32;
                let (b1, b2, eps) = (F::of(beta1), F::of(beta2), F::of(eps));
                let c1 = F::one() - b1.powi(k);
                let c2 = F::one() - b2.powi(k);
                let slots = params.slices_mut().into_iter().zip(gslices);
                for ((p, g), (m, v)) in slots.zip(self.first.iter_mut().zip(self.second.iter_mut())) {
                    for i in 0..p.len() {
                        let d = g[i];
                        m[i] = b1 * m[i] + (F::one() - b1) * d;
                        v[i] = b2 * v[i] + (F::one() - b2) * d * d;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= self.lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
