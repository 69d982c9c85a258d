use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};

use super::config::WeightMode;
use crate::{Error, Result, Scalar};

/// Mean squared error over every element, with its gradient `2 (pred - target) / N`.
pub fn baseline_loss<F: Scalar>(pred: ArrayView2<F>, target: ArrayView2<F>) -> Result<(F, Array2<F>)> {
    if pred.dim() != target.dim() {
        return Err(Error::input(format!(
            "prediction shape {:?} differs from target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = F::of(pred.len().max(1) as f64);
    let resid = &pred - &target;
    let loss = resid.iter().map(|&r| r * r).sum::<F>() / n;
    let two = F::of(2.0);
    Ok((loss, resid.mapv(|r| two * r / n)))
}

/// IMBA distance `max(|target - uncond|, floor)^gamma`, reduced per `mode`.
///
/// Inputs are `(batch, tokens, channels)`. The result has shape `(B, N, C)`
/// for [`WeightMode::PerElement`], `(B, N, 1)` for [`WeightMode::ChannelMean`]
/// and `(B, 1, 1)` for [`WeightMode::SampleScalar`]. The returned array is a
/// plain value: callers treat it as a constant during backpropagation.
pub fn imba_distance<F: Scalar>(
    target: ArrayView3<F>,
    uncond_pred: ArrayView3<F>,
    gamma: f64,
    mode: WeightMode,
    residual_floor: f64,
) -> Result<Array3<F>> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::config(format!("gamma must be >= 0, got {gamma}")));
    }
    if !(residual_floor >= 0.0) {
        return Err(Error::config(format!("residual floor must be >= 0, got {residual_floor}")));
    }
    if target.dim() != uncond_pred.dim() {
        return Err(Error::input(format!(
            "target shape {:?} differs from unconditional prediction {:?}",
            target.dim(),
            uncond_pred.dim()
        )));
    }
    let g = F::of(gamma);
    let floor = F::of(residual_floor);
    let mut d = &target - &uncond_pred;
    d.mapv_inplace(|r| r.abs().max(floor).powf(g));
    Ok(match mode {
        WeightMode::PerElement => d,
        WeightMode::ChannelMean => d
            .mean_axis(Axis(2))
            .expect("non-empty channel axis")
            .insert_axis(Axis(2)),
        WeightMode::SampleScalar => {
            let (b, n, c) = d.dim();
            let denom = F::of((n * c) as f64);
            Array3::from_shape_fn((b, 1, 1), |(i, _, _)| d.index_axis(Axis(0), i).sum() / denom)
        }
    })
}

/// Weights for a `(batch, channels)` toy batch (one token per sample),
/// broadcast back to the full `(batch, channels)` shape.
pub fn imba_weights<F: Scalar>(
    target: ArrayView2<F>,
    uncond_pred: ArrayView2<F>,
    gamma: f64,
    mode: WeightMode,
    residual_floor: f64,
) -> Result<Array2<F>> {
    let d = imba_distance(
        target.insert_axis(Axis(1)),
        uncond_pred.insert_axis(Axis(1)),
        gamma,
        mode,
        residual_floor,
    )?;
    let full = d
        .broadcast((target.nrows(), 1, target.ncols()))
        .expect("reduced axes broadcast")
        .to_owned();
    Ok(full.index_axis_move(Axis(1), 0))
}
