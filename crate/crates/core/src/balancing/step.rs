//! Single training-step losses and their parameter gradients.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use super::config::{LossConfig, LossKind};
use super::loss::imba_weights;
use super::stats::ConceptStats;
use crate::diffusion::NoisyBatch;
use crate::nn::{Gradients, ModelParams};
use crate::{Error, Result, Scalar};

/// Loss decomposition of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<F> {
    /// Conditional (possibly weighted) loss.
    pub l_star: F,
    /// Unconditional loss.
    pub l_u: F,
    /// `lambda * l_star + (1 - lambda) * l_u`.
    pub loss: F,
    /// Mixing weight actually applied. For condition-drop losses this is the
    /// fraction of rows that kept their condition.
    pub lambda: F,
    /// Mean per-sample weight of each class; `None` if the class is absent
    /// from the batch.
    pub mean_weight: Vec<Option<F>>,
}

impl<F: Scalar> StepReport<F> {
    pub fn is_finite(&self) -> bool {
        self.l_star.is_finite()
            && self.l_u.is_finite()
            && self.loss.is_finite()
            && self.mean_weight.iter().flatten().all(|w| w.is_finite())
    }
}

fn check_labels<F: Scalar>(params: &ModelParams<F>, batch: &NoisyBatch<F>, labels: &[usize]) -> Result<()> {
    let classes = params.layout().num_classes;
    if labels.len() != batch.len() {
        return Err(Error::input(format!(
            "{} labels for a batch of {}",
            labels.len(),
            batch.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::input(format!("label {bad} outside {classes} classes")));
    }
    Ok(())
}

fn per_class_mean<F: Scalar>(values: &[F], labels: &[usize], classes: usize) -> Vec<Option<F>> {
    let mut sums = vec![F::zero(); classes];
    let mut counts = vec![0usize; classes];
    for (&v, &l) in values.iter().zip(labels) {
        sums[l] += v;
        counts[l] += 1;
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s / F::of(c as f64)))
        .collect()
}

fn numeric_failure<F: Scalar>(report: &StepReport<F>, detail: &str) -> Error {
    Error::numeric(format!(
        "non-finite loss (L* = {}, L_u = {}, L = {}{detail})",
        report.l_star, report.l_u, report.loss
    ))
}

/// Conditional and null-condition predictions for the same `x_t`, from one
/// stacked forward pass.
fn paired_forward<F: Scalar>(
    params: &ModelParams<F>,
    batch: &NoisyBatch<F>,
) -> Result<(Array2<F>, crate::nn::ForwardCache<F>)> {
    let n = batch.len();
    let null = params.layout().null_class();
    let x = concatenate(Axis(0), &[batch.x_t.view(), batch.x_t.view()])
        .map_err(|e| Error::input(format!("stacking batch: {e}")))?;
    let mut t = batch.t.clone();
    t.extend_from_slice(&batch.t);
    let mut cond = batch.cond.clone();
    cond.extend(std::iter::repeat(null).take(n));
    params.forward(x.view(), &t, &cond)
}

/// IMBA step with an externally supplied constant weight tensor `weights`
/// (shape of the target). `imba_step` routes through here after computing
/// the distance from its own unconditional prediction.
pub fn imba_step_with_weights<F: Scalar>(
    params: &ModelParams<F>,
    batch: &NoisyBatch<F>,
    labels: &[usize],
    weights: ArrayView2<F>,
    lambda: f64,
) -> Result<(StepReport<F>, Gradients<F>)> {
    check_labels(params, batch, labels)?;
    let (pred, cache) = paired_forward(params, batch)?;
    finish_imba(params, batch, labels, &pred, &cache, weights, lambda)
}

fn finish_imba<F: Scalar>(
    params: &ModelParams<F>,
    batch: &NoisyBatch<F>,
    labels: &[usize],
    pred: &Array2<F>,
    cache: &crate::nn::ForwardCache<F>,
    weights: ArrayView2<F>,
    lambda: f64,
) -> Result<(StepReport<F>, Gradients<F>)> {
    let n = batch.len();
    let target = batch.target();
    if weights.dim() != target.dim() {
        return Err(Error::input("weight tensor shape differs from target"));
    }
    let pred_c = pred.slice(s![..n, ..]);
    let pred_u = pred.slice(s![n.., ..]);
    let r_c = &pred_c - &target;
    let r_u = &pred_u - &target;
    let count = F::of(target.len().max(1) as f64);
    let l_star = r_c
        .iter()
        .zip(weights.iter())
        .map(|(&r, &w)| w * r * r)
        .sum::<F>()
        / count;
    let l_u = r_u.iter().map(|&r| r * r).sum::<F>() / count;
    let lam = F::of(lambda);
    let loss = lam * l_star + (F::one() - lam) * l_u;

    let sample_weight: Vec<F> = weights
        .rows()
        .into_iter()
        .map(|row| row.sum() / F::of(row.len() as f64))
        .collect();
    let report = StepReport {
        l_star,
        l_u,
        loss,
        lambda: lam,
        mean_weight: per_class_mean(&sample_weight, labels, params.layout().num_classes),
    };
    if !report.is_finite() {
        let max_w = weights.iter().fold(F::zero(), |a, &b| a.max(b));
        return Err(numeric_failure(&report, &format!(", max weight = {max_w}")));
    }

    let two = F::of(2.0);
    let mut upstream = Array2::zeros(pred.raw_dim());
    upstream
        .slice_mut(s![..n, ..])
        .assign(&(&r_c * &weights * (two * lam / count)));
    upstream
        .slice_mut(s![n.., ..])
        .assign(&(&r_u * (two * (F::one() - lam) / count)));
    let grads = params.backward(cache, upstream.view())?;
    Ok((report, grads))
}

/// One IMBA step: conditional and unconditional predictions on the same
/// `x_t`, distance from the unconditional residual (no gradient path),
/// `L = lambda * mean(D * r_c^2) + (1 - lambda) * mean(r_u^2)`.
///
/// `batch.cond` must carry the true classes.
pub fn imba_step<F: Scalar>(
    params: &ModelParams<F>,
    batch: &NoisyBatch<F>,
    labels: &[usize],
    cfg: &LossConfig,
) -> Result<(StepReport<F>, Gradients<F>)> {
    cfg.validate()?;
    check_labels(params, batch, labels)?;
    let (pred, cache) = paired_forward(params, batch)?;
    let target = batch.target();
    let weights = imba_weights(
        target.view(),
        pred.slice(s![batch.len().., ..]),
        cfg.gamma,
        cfg.weight_mode,
        cfg.residual_floor,
    )?;
    finish_imba(params, batch, labels, &pred, &cache, weights.view(), cfg.lambda)
}

/// Condition-drop regression step with an optional per-class weight on the
/// rows that kept their condition. Rows whose `cond` is null form `L_u`.
fn drop_step<F: Scalar>(
    params: &ModelParams<F>,
    batch: &NoisyBatch<F>,
    labels: &[usize],
    class_weight: &[F],
) -> Result<(StepReport<F>, Gradients<F>)> {
    check_labels(params, batch, labels)?;
    let null = params.layout().null_class();
    let (pred, cache) = params.forward(batch.x_t.view(), &batch.t, &batch.cond)?;
    let target = batch.target();
    let resid = &pred - &target;
    let cols = target.ncols();
    let n = batch.len();

    let mut sum_c = F::zero();
    let mut sum_u = F::zero();
    let mut kept = 0usize;
    let row_weight: Vec<F> = (0..n)
        .map(|i| {
            if batch.cond[i] == null {
                F::one()
            } else {
                class_weight[labels[i]]
            }
        })
        .collect();
    for i in 0..n {
        let sq: F = resid.row(i).iter().map(|&r| r * r).sum();
        if batch.cond[i] == null {
            sum_u += sq;
        } else {
            sum_c += row_weight[i] * sq;
            kept += 1;
        }
    }
    let dropped = n - kept;
    let l_star = if kept > 0 { sum_c / F::of((kept * cols) as f64) } else { F::zero() };
    let l_u = if dropped > 0 { sum_u / F::of((dropped * cols) as f64) } else { F::zero() };
    let lam = F::of(kept as f64 / n.max(1) as f64);
    let loss = lam * l_star + (F::one() - lam) * l_u;
    let report = StepReport {
        l_star,
        l_u,
        loss,
        lambda: lam,
        mean_weight: class_weight.iter().map(|&w| Some(w)).collect(),
    };
    if !report.is_finite() {
        return Err(numeric_failure(&report, ""));
    }

    let scale = F::of(2.0) / F::of((n * cols).max(1) as f64);
    let mut upstream = resid;
    for (i, mut row) in upstream.rows_mut().into_iter().enumerate() {
        let w = row_weight[i] * scale;
        row.mapv_inplace(|r| r * w);
    }
    let grads = params.backward(&cache, upstream.view())?;
    Ok((report, grads))
}

/// Plain regression step; conditions already dropped to null by the caller
/// stay null.
pub fn baseline_step<F: Scalar>(
    params: &ModelParams<F>,
    batch: &NoisyBatch<F>,
    labels: &[usize],
) -> Result<(StepReport<F>, Gradients<F>)> {
    let ones = vec![F::one(); params.layout().num_classes];
    drop_step(params, batch, labels, &ones)
}

/// Baseline step with each conditioned row weighted by its class's
/// inverse-frequency weight.
pub fn freq_weighted_step<F: Scalar>(
    params: &ModelParams<F>,
    batch: &NoisyBatch<F>,
    labels: &[usize],
    stats: &ConceptStats,
) -> Result<(StepReport<F>, Gradients<F>)> {
    let classes = params.layout().num_classes;
    if stats.num_classes() != classes {
        return Err(Error::input(format!(
            "stats cover {} classes, model has {classes}",
            stats.num_classes()
        )));
    }
    let weights = (0..classes)
        .map(|c| stats.freq_weight(c).map(F::of))
        .collect::<Result<Vec<F>>>()?;
    drop_step(params, batch, labels, &weights)
}

/// Dispatches on `cfg.kind`. `stats` is only consulted for frequency weighting.
pub fn loss_step<F: Scalar>(
    params: &ModelParams<F>,
    batch: &NoisyBatch<F>,
    labels: &[usize],
    cfg: &LossConfig,
    stats: &ConceptStats,
) -> Result<(StepReport<F>, Gradients<F>)> {
    match cfg.kind {
        LossKind::Baseline => baseline_step(params, batch, labels),
        LossKind::Imba => imba_step(params, batch, labels, cfg),
        LossKind::FreqWeighted => freq_weighted_step(params, batch, labels, stats),
    }
}
