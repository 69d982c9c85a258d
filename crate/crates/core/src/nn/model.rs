//! Conditional MLP denoiser with hand-written backpropagation.
//!
//! Each input row is the concatenation `[x | time embedding | condition embedding]`.
//! Hidden layers apply an affine map followed by the configured activation; the
//! output layer is affine only. Weight matrices are stored `(out, in)`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::embed::time_embedding_into;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `z * sigmoid(z)`.
    Silu,
    Tanh,
}

impl Activation {
    pub(crate) fn code(self) -> u32 {
        match self {
            Activation::Silu => 0,
            Activation::Tanh => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Silu),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }

    #[inline]
    fn apply<F: Scalar>(self, z: F) -> F {
        match self {
            Activation::Silu => z / (F::one() + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    #[inline]
    fn derivative<F: Scalar>(self, z: F) -> F {
        match self {
            Activation::Silu => {
                let sig = F::one() / (F::one() + (-z).exp());
                sig * (F::one() + z * (F::one() - sig))
            }
            Activation::Tanh => {
                let t = z.tanh();
                F::one() - t * t
            }
        }
    }
}

/// Shape of the denoiser: input blocks, hidden stack and class count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelLayout {
    pub point_dim: usize,
    pub time_dim: usize,
    pub cond_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// Number of real classes; index `num_classes` is the null condition.
    pub num_classes: usize,
    pub activation: Activation,
}

impl Default for ModelLayout {
    fn default() -> Self {
        Self {
            point_dim: 2,
            time_dim: 16,
            cond_dim: 8,
            hidden_width: 128,
            hidden_layers: 2,
            num_classes: 2,
            activation: Activation::Silu,
        }
    }
}

impl ModelLayout {
    pub fn with_classes(num_classes: usize) -> Self {
        Self {
            num_classes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.point_dim == 0 || self.cond_dim == 0 || self.num_classes == 0 {
            return Err(Error::config("point, condition and class dims must be >= 1"));
        }
        if self.time_dim == 0 || self.time_dim % 2 != 0 {
            return Err(Error::config(format!(
                "time embedding dim must be even and >= 2, got {}",
                self.time_dim
            )));
        }
        if self.hidden_width == 0 || self.hidden_layers == 0 {
            return Err(Error::config("hidden width and depth must be >= 1"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.point_dim + self.time_dim + self.cond_dim
    }

    /// Index reserved for the unconditional (null) embedding.
    pub fn null_class(&self) -> usize {
        self.num_classes
    }

    /// `(out, in)` shape of every dense layer, first to last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.input_dim();
        for _ in 0..self.hidden_layers {
            shapes.push((self.hidden_width, fan_in));
            fan_in = self.hidden_width;
        }
        shapes.push((self.point_dim, fan_in));
        shapes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    /// `(out, in)`.
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

impl<F: Scalar> Dense<F> {
    fn zeros(out: usize, inp: usize) -> Self {
        Self {
            weight: Array2::zeros((out, inp)),
            bias: Array1::zeros(out),
        }
    }
}

/// Trainable state of the denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    layout: ModelLayout,
    pub layers: Vec<Dense<F>>,
    /// `(num_classes + 1, cond_dim)`; the last row is the null condition.
    pub cond_table: Array2<F>,
}

/// Gradient buffers mirroring [`ModelParams`] tensor for tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub layers: Vec<Dense<F>>,
    pub cond_table: Array2<F>,
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    /// `acts[0]` is the assembled input; `acts[i]` the output of hidden layer `i`.
    acts: Vec<Array2<F>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<F>>,
    cond: Vec<usize>,
}

impl<F> ForwardCache<F> {
    pub fn batch_size(&self) -> usize {
        self.cond.len()
    }
}

fn tensor_slices<'a, F>(layers: &'a [Dense<F>], table: &'a Array2<F>) -> Vec<&'a [F]> {
    let mut out = Vec::with_capacity(layers.len() * 2 + 1);
    for layer in layers {
        out.push(layer.weight.as_slice().expect("standard layout"));
        out.push(layer.bias.as_slice().expect("standard layout"));
    }
    out.push(table.as_slice().expect("standard layout"));
    out
}

fn tensor_slices_mut<'a, F>(
    layers: &'a mut [Dense<F>],
    table: &'a mut Array2<F>,
) -> Vec<&'a mut [F]> {
    let mut out = Vec::with_capacity(layers.len() * 2 + 1);
    for layer in layers {
        out.push(layer.weight.as_slice_mut().expect("standard layout"));
        out.push(layer.bias.as_slice_mut().expect("standard layout"));
    }
    out.push(table.as_slice_mut().expect("standard layout"));
    out
}

impl<F: Scalar> ModelParams<F> {
    /// Fan-in scaled normal weights, zero biases, unit-normal condition table.
    pub fn init(layout: ModelLayout, seed: u64) -> Result<Self> {
        layout.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for (out, inp) in layout.layer_shapes() {
            let scale = (1.0 / inp as f64).sqrt();
            let weight = Array2::from_shape_simple_fn((out, inp), || {
                let z: f64 = StandardNormal.sample(&mut rng);
                F::of(z * scale)
            });
            layers.push(Dense {
                weight,
                bias: Array1::zeros(out),
            });
        }
        let cond_table = Array2::from_shape_simple_fn((layout.num_classes + 1, layout.cond_dim), || {
            let z: f64 = StandardNormal.sample(&mut rng);
            F::of(z)
        });
        Ok(Self {
            layout,
            layers,
            cond_table,
        })
    }

    pub fn zeros(layout: ModelLayout) -> Result<Self> {
        layout.validate()?;
        Ok(Self {
            layout,
            layers: layout
                .layer_shapes()
                .into_iter()
                .map(|(o, i)| Dense::zeros(o, i))
                .collect(),
            cond_table: Array2::zeros((layout.num_classes + 1, layout.cond_dim)),
        })
    }

    /// Rebuilds parameters from flat tensors in [`ModelParams::slices`] order.
    pub fn from_tensors(layout: ModelLayout, tensors: Vec<Vec<F>>) -> Result<Self> {
        let mut params = Self::zeros(layout)?;
        let mut slots = params.slices_mut();
        if slots.len() != tensors.len() {
            return Err(Error::input(format!(
                "expected {} tensors, found {}",
                slots.len(),
                tensors.len()
            )));
        }
        for (i, (slot, data)) in slots.iter_mut().zip(&tensors).enumerate() {
            if slot.len() != data.len() {
                return Err(Error::input(format!(
                    "tensor {i}: expected {} values, found {}",
                    slot.len(),
                    data.len()
                )));
            }
            slot.copy_from_slice(data);
        }
        params.check_finite()?;
        Ok(params)
    }

    pub fn layout(&self) -> &ModelLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// Flat views of every tensor: per layer weight then bias, then the condition table.
    pub fn slices(&self) -> Vec<&[F]> {
        tensor_slices(&self.layers, &self.cond_table)
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [F]> {
        tensor_slices_mut(&mut self.layers, &mut self.cond_table)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.slices().iter().all(|s| s.iter().all(|v| v.is_finite())) {
            Ok(())
        } else {
            Err(Error::numeric("parameters contain non-finite entries"))
        }
    }

    fn assemble_input(&self, x: ArrayView2<F>, t: &[F], cond: &[usize]) -> Result<Array2<F>> {
        let l = &self.layout;
        let n = x.nrows();
        if x.ncols() != l.point_dim {
            return Err(Error::input(format!(
                "points have {} columns, model expects {}",
                x.ncols(),
                l.point_dim
            )));
        }
        if t.len() != n || cond.len() != n {
            return Err(Error::input(format!(
                "batch of {n} points with {} times and {} conditions",
                t.len(),
                cond.len()
            )));
        }
        let mut input = Array2::zeros((n, l.input_dim()));
        let t_off = l.point_dim;
        let c_off = l.point_dim + l.time_dim;
        for (i, mut row) in input.outer_iter_mut().enumerate() {
            let tau = t[i];
            if !(tau >= F::zero() && tau <= F::one()) {
                return Err(Error::input(format!("time {tau} at row {i} outside [0, 1]")));
            }
            let c = cond[i];
            if c > l.null_class() {
                return Err(Error::input(format!(
                    "condition index {c} at row {i} exceeds null index {}",
                    l.null_class()
                )));
            }
            let row = row.as_slice_mut().expect("standard layout");
            for j in 0..l.point_dim {
                row[j] = x[[i, j]];
            }
            time_embedding_into(tau, &mut row[t_off..c_off]);
            row[c_off..].copy_from_slice(
                self.cond_table.row(c).as_slice().expect("standard layout"),
            );
        }
        Ok(input)
    }

    /// Batched prediction. `t` holds normalized times in `[0, 1]`, `cond` class
    /// indices or [`ModelLayout::null_class`].
    pub fn forward(
        &self,
        x: ArrayView2<F>,
        t: &[F],
        cond: &[usize],
    ) -> Result<(Array2<F>, ForwardCache<F>)> {
        let input = self.assemble_input(x, t, cond)?;
        let act = self.layout.activation;
        let hidden = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(hidden + 1);
        let mut pre = Vec::with_capacity(hidden);
        acts.push(input);
        for layer in &self.layers[..hidden] {
            let z = affine(acts.last().expect("input pushed"), layer);
            acts.push(z.mapv(|v| act.apply(v)));
            pre.push(z);
        }
        let out = affine(acts.last().expect("input pushed"), &self.layers[hidden]);
        Ok((
            out,
            ForwardCache {
                acts,
                pre,
                cond: cond.to_vec(),
            },
        ))
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, x: ArrayView2<F>, t: &[F], cond: &[usize]) -> Result<Array2<F>> {
        let act = self.layout.activation;
        let mut h = self.assemble_input(x, t, cond)?;
        let hidden = self.layers.len() - 1;
        for layer in &self.layers[..hidden] {
            h = affine(&h, layer);
            h.mapv_inplace(|v| act.apply(v));
        }
        Ok(affine(&h, &self.layers[hidden]))
    }

    /// Exact gradients of a scalar loss whose derivative w.r.t. the predictions is `upstream`.
    pub fn backward(&self, cache: &ForwardCache<F>, upstream: ArrayView2<F>) -> Result<Gradients<F>> {
        let n = cache.batch_size();
        if upstream.dim() != (n, self.layout.point_dim) {
            return Err(Error::input(format!(
                "upstream shape {:?} does not match predictions ({n}, {})",
                upstream.dim(),
                self.layout.point_dim
            )));
        }
        let act = self.layout.activation;
        let mut grads = Gradients::zeros_like(self);
        let mut delta = upstream.to_owned();
        for l in (0..self.layers.len()).rev() {
            let a_in = &cache.acts[l];
            grads.layers[l].weight = delta.t().dot(a_in);
            grads.layers[l].bias = delta.sum_axis(Axis(0));
            let mut d_in = delta.dot(&self.layers[l].weight);
            if l > 0 {
                d_in.zip_mut_with(&cache.pre[l - 1], |d, &z| *d *= act.derivative(z));
            }
            delta = d_in;
        }
        let off = self.layout.point_dim + self.layout.time_dim;
        for (row, &c) in cache.cond.iter().enumerate() {
            let mut target = grads.cond_table.row_mut(c);
            target += &delta.slice(s![row, off..]);
        }
        Ok(grads)
    }
}

fn affine<F: Scalar>(input: &Array2<F>, layer: &Dense<F>) -> Array2<F> {
    let mut z = input.dot(&layer.weight.t());
    z += &layer.bias;
    z
}

impl<F: Scalar> Gradients<F> {
    pub fn zeros_like(params: &ModelParams<F>) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weight.nrows(), l.weight.ncols()))
                .collect(),
            cond_table: Array2::zeros(params.cond_table.raw_dim()),
        }
    }

    pub fn slices(&self) -> Vec<&[F]> {
        tensor_slices(&self.layers, &self.cond_table)
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [F]> {
        tensor_slices_mut(&mut self.layers, &mut self.cond_table)
    }

    /// `self += other`.
    pub fn accumulate(&mut self, other: &Gradients<F>) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: F) {
        for s in self.slices_mut() {
            for x in s {
                *x *= factor;
            }
        }
    }

    pub fn norm(&self) -> F {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|&v| v * v)
            .sum::<F>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Largest entrywise relative difference, with `floor` guarding tiny magnitudes.
    pub fn max_rel_diff(&self, other: &Gradients<F>, floor: F) -> F {
        let mut worst = F::zero();
        for (a, b) in self.slices().into_iter().zip(other.slices()) {
            for (&x, &y) in a.iter().zip(b) {
                let denom = x.abs().max(y.abs()).max(floor);
                worst = worst.max((x - y).abs() / denom);
            }
        }
        worst
    }
}
