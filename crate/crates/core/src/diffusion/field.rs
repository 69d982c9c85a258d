use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::nn::ModelParams;
use crate::{Error, Result, Scalar};

/// Regular 2-D lattice, row-major with `y` outer and `x` inner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lattice {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for Lattice {
    /// 15 x 15 points covering both default mixture components.
    fn default() -> Self {
        Self {
            x_min: -2.0,
            x_max: 1.5,
            y_min: -1.5,
            y_max: 2.0,
            nx: 15,
            ny: 15,
        }
    }
}

impl Lattice {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.nx == 0 || self.ny == 0 || self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(Error::config(format!("degenerate lattice {self:?}")));
        }
        Ok(())
    }

    fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![min];
        }
        (0..n).map(|i| min + (max - min) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        let xs = Self::axis(self.x_min, self.x_max, self.nx);
        let ys = Self::axis(self.y_min, self.y_max, self.ny);
        ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample<F> {
    pub x: F,
    pub y: F,
    pub vx: F,
    pub vy: F,
    pub t: F,
}

/// Raw model prediction at every lattice point for one time and condition
/// (`None` = null condition).
pub fn score_field<F: Scalar>(
    params: &ModelParams<F>,
    lattice: &Lattice,
    tau: F,
    cond: Option<usize>,
) -> Result<Vec<FieldSample<F>>> {
    lattice.validate()?;
    let pts = lattice.points();
    let n = pts.len();
    let x = Array2::from_shape_fn((n, 2), |(i, j)| F::of(pts[i][j]));
    let c = cond.unwrap_or(params.layout().null_class());
    let pred = params.predict(x.view(), &vec![tau; n], &vec![c; n])?;
    Ok((0..n)
        .map(|i| FieldSample {
            x: x[[i, 0]],
            y: x[[i, 1]],
            vx: pred[[i, 0]],
            vy: pred[[i, 1]],
            t: tau,
        })
        .collect())
}
