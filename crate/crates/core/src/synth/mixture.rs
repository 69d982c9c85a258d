use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Class-conditional bivariate normal mixture. Component `k` is class `k`;
/// its count fixes both the dataset size and the class proportion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSpec {
    pub means: Vec<[f64; 2]>,
    pub stds: Vec<[f64; 2]>,
    pub rho: Vec<f64>,
    pub counts: Vec<u64>,
}

impl MixtureSpec {
    /// Two classes with means (-1, -0.3) and (0.3, 1), std 0.1, no correlation.
    pub fn two_class(count0: u64, count1: u64) -> Self {
        Self {
            means: vec![[-1.0, -0.3], [0.3, 1.0]],
            stds: vec![[0.1, 0.1]; 2],
            rho: vec![0.0; 2],
            counts: vec![count0, count1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.means.len();
        if k == 0 {
            return Err(Error::config("mixture needs at least one component"));
        }
        if self.stds.len() != k || self.rho.len() != k || self.counts.len() != k {
            return Err(Error::config(format!(
                "mixture arrays disagree: {} means, {} stds, {} rho, {} counts",
                k,
                self.stds.len(),
                self.rho.len(),
                self.counts.len()
            )));
        }
        for i in 0..k {
            if !self.means[i].iter().all(|v| v.is_finite()) {
                return Err(Error::config(format!("component {i}: non-finite mean")));
            }
            if !self.stds[i].iter().all(|&s| s > 0.0 && s.is_finite()) {
                return Err(Error::config(format!("component {i}: std must be > 0")));
            }
            if !(self.rho[i].abs() < 1.0) {
                return Err(Error::config(format!("component {i}: |rho| must be < 1")));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn proportions(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Class with the largest count (lowest index on ties).
    pub fn head_class(&self) -> usize {
        let max = *self.counts.iter().max().expect("validated non-empty");
        self.counts.iter().position(|&c| c == max).expect("max exists")
    }

    /// Class with the smallest count (highest index on ties).
    pub fn tail_class(&self) -> usize {
        let min = *self.counts.iter().min().expect("validated non-empty");
        self.counts.iter().rposition(|&c| c == min).expect("min exists")
    }

    /// Covariance `[[sxx, sxy], [sxy, syy]]` of component `k`.
    pub fn covariance(&self, k: usize) -> [[f64; 2]; 2] {
        let [sx, sy] = self.stds[k];
        let c = self.rho[k] * sx * sy;
        [[sx * sx, c], [c, sy * sy]]
    }

    pub fn with_counts(&self, counts: Vec<u64>) -> Self {
        Self {
            counts,
            ..self.clone()
        }
    }
}

/// Points with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<F> {
    pub points: Array2<F>,
    pub labels: Vec<usize>,
}

impl<F: Scalar> LabeledDataset<F> {
    pub fn new(points: Array2<F>, labels: Vec<usize>) -> Result<Self> {
        if points.nrows() != labels.len() {
            return Err(Error::input(format!(
                "{} points but {} labels",
                points.nrows(),
                labels.len()
            )));
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self, num_classes: usize) -> Vec<u64> {
        let mut counts = vec![0; num_classes];
        for &l in &self.labels {
            if l < num_classes {
                counts[l] += 1;
            }
        }
        counts
    }
}

/// Exactly `counts[k]` draws from component `k`, components in order, each
/// point `mean + L z` with `L` the Cholesky factor of the covariance.
pub fn sample_mixture<F: Scalar>(spec: &MixtureSpec, seed: u64) -> Result<LabeledDataset<F>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = spec.total() as usize;
    let mut points = Array2::zeros((total, 2));
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for k in 0..spec.num_classes() {
        let [mx, my] = spec.means[k];
        let [sx, sy] = spec.stds[k];
        let rho = spec.rho[k];
        let off = (1.0 - rho * rho).sqrt();
        for _ in 0..spec.counts[k] {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            points[[row, 0]] = F::of(mx + sx * z1);
            points[[row, 1]] = F::of(my + sy * (rho * z1 + off * z2));
            labels.push(k);
            row += 1;
        }
    }
    Ok(LabeledDataset { points, labels })
}
