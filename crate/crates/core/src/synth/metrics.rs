use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::mixture::MixtureSpec;
use super::oracle::MixtureOracle;
use crate::balancing::{imba_weights, WeightMode};
use crate::diffusion::{Lattice, Objective, Process};
use crate::nn::ModelParams;
use crate::{Error, Result, Scalar};

/// Evaluation summary of one trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Signed drift of each class's generated samples.
    pub drift: Vec<f64>,
    /// Fraction of each class's generated samples assigned to that class.
    pub success: Vec<f64>,
    /// Unconditional denoising direction at the noised inter-mean midpoint,
    /// projected onto the unit vector toward the head mean.
    pub score_shift: f64,
    /// Norm of that direction.
    pub score_norm: f64,
    /// Mean channel-averaged IMBA distance per class at maximum noise.
    pub probe: Vec<f64>,
}

impl MetricsReport {
    pub fn is_finite(&self) -> bool {
        self.drift
            .iter()
            .chain(&self.success)
            .chain(&self.probe)
            .chain([&self.score_shift, &self.score_norm])
            .all(|v| v.is_finite())
    }
}

/// Class whose mean a drifting `class` is measured against: the head for
/// every other class, the tail for the head itself.
pub fn opposing_class(spec: &MixtureSpec, class: usize) -> usize {
    let head = spec.head_class();
    if class != head {
        head
    } else if spec.num_classes() == 1 {
        class
    } else {
        let tail = spec.tail_class();
        if tail != head {
            tail
        } else {
            (class + 1) % spec.num_classes()
        }
    }
}

fn unit(from: [f64; 2], to: [f64; 2]) -> Result<[f64; 2]> {
    let d = [to[0] - from[0], to[1] - from[1]];
    let n = d[0].hypot(d[1]);
    if n == 0.0 {
        return Err(Error::input("coincident class means have no drift axis"));
    }
    Ok([d[0] / n, d[1] / n])
}

/// Projection of `mean(points) - mu_class` onto the unit vector from
/// `mu_class` toward the opposing class mean.
pub fn drift_metric<F: Scalar>(points: ArrayView2<F>, spec: &MixtureSpec, class: usize) -> Result<f64> {
    if points.nrows() == 0 {
        return Err(Error::input("drift needs at least one generated point"));
    }
    if class >= spec.num_classes() || spec.num_classes() < 2 {
        return Err(Error::input(format!("class {class} has no opposing class")));
    }
    let mu = spec.means[class];
    let u = unit(mu, spec.means[opposing_class(spec, class)])?;
    let n = points.nrows() as f64;
    let mx = points.column(0).iter().map(|v| v.f64()).sum::<f64>() / n;
    let my = points.column(1).iter().map(|v| v.f64()).sum::<f64>() / n;
    Ok((mx - mu[0]) * u[0] + (my - mu[1]) * u[1])
}

/// Index of the component mean nearest to `p` (lowest index on ties).
pub fn nearest_class(spec: &MixtureSpec, p: [f64; 2]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, m) in spec.means.iter().enumerate() {
        let d = (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2);
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Fraction of points whose nearest component mean matches their label.
pub fn success_rate<F: Scalar>(points: ArrayView2<F>, labels: &[usize], spec: &MixtureSpec) -> Result<f64> {
    if points.nrows() == 0 || points.nrows() != labels.len() {
        return Err(Error::input(format!(
            "success rate needs matching non-empty points and labels ({} vs {})",
            points.nrows(),
            labels.len()
        )));
    }
    let hits = points
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(r, &l)| nearest_class(spec, [r[0].f64(), r[1].f64()]) == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Mean channel-averaged IMBA distance per class at maximum noise.
///
/// For each class, `n_draws` clean points come from that class's component
/// and are fully noised; the distance compares the regression target with
/// the model's unconditional prediction.
pub fn imba_probe<F: Scalar>(
    params: &ModelParams<F>,
    spec: &MixtureSpec,
    process: &Process<F>,
    gamma: f64,
    residual_floor: f64,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if n_draws == 0 {
        return Err(Error::input("probe needs at least one draw"));
    }
    let classes = spec.num_classes();
    if classes > params.layout().num_classes {
        return Err(Error::input(format!(
            "mixture has {classes} classes but the model knows {}",
            params.layout().num_classes
        )));
    }
    let null = params.layout().null_class();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(classes);
    for k in 0..classes {
        let [mx, my] = spec.means[k];
        let [sx, sy] = spec.stds[k];
        let rho = spec.rho[k];
        let mut x0 = Array2::<F>::zeros((n_draws, 2));
        for mut row in x0.rows_mut() {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            row[0] = F::of(mx + sx * z1);
            row[1] = F::of(my + sy * (rho * z1 + (1.0 - rho * rho).sqrt() * z2));
        }
        let eps = crate::diffusion::draw_standard_normal(&mut rng, n_draws, 2);
        let t = vec![process.max_noise_time(); n_draws];
        let batch = process.batch_at_times(x0, eps, t, vec![null; n_draws])?;
        let uncond = params.predict(batch.x_t.view(), &batch.t, &batch.cond)?;
        let w = imba_weights(
            batch.target().view(),
            uncond.view(),
            gamma,
            WeightMode::ChannelMean,
            residual_floor,
        )?;
        let mean = w.column(0).iter().map(|v| v.f64()).sum::<f64>() / n_draws as f64;
        if !mean.is_finite() {
            return Err(Error::numeric(format!("non-finite probe value for class {k}")));
        }
        out.push(mean);
    }
    Ok(out)
}

/// Unconditional denoising direction at `a * (mu_head + mu_tail) / 2` and
/// time `tau`, as `(projection toward the head mean, norm)`.
///
/// The direction is the negated prediction: `-eps` points along the score
/// and `-v` is the flow sampler's step.
pub fn score_shift<F: Scalar>(
    params: &ModelParams<F>,
    spec: &MixtureSpec,
    process: &Process<F>,
    tau: f64,
) -> Result<(f64, f64)> {
    let (head, tail) = (spec.head_class(), spec.tail_class());
    let (mh, mt) = (spec.means[head], spec.means[tail]);
    let u = unit(mt, mh)?;
    let (a, _) = process.signal_noise(tau)?;
    let mid = [a * 0.5 * (mh[0] + mt[0]), a * 0.5 * (mh[1] + mt[1])];
    let x = Array2::from_shape_vec((1, 2), vec![F::of(mid[0]), F::of(mid[1])]).expect("1x2");
    let null = params.layout().null_class();
    let p = params.predict(x.view(), &[F::of(tau)], &[null])?;
    let d = [-p[[0, 0]].f64(), -p[[0, 1]].f64()];
    Ok((d[0] * u[0] + d[1] * u[1], d[0].hypot(d[1])))
}

/// Relative error `||pred - oracle|| / ||oracle||` over the lattice points
/// whose true noised density exceeds `density_frac` of the lattice maximum.
///
/// `cond = None` compares against the full mixture, `Some(k)` against
/// component `k` alone.
pub fn field_relative_error<F: Scalar>(
    params: &ModelParams<F>,
    spec: &MixtureSpec,
    process: &Process<F>,
    tau: f64,
    cond: Option<usize>,
    lattice: &Lattice,
    density_frac: f64,
) -> Result<f64> {
    lattice.validate()?;
    let (a, b) = process.signal_noise(tau)?;
    let oracle = match cond {
        None => MixtureOracle::new(spec, a, b)?,
        Some(k) => MixtureOracle::for_class(spec, k, a, b)?,
    };
    let pts = lattice.points();
    let dens: Vec<f64> = pts.iter().map(|&p| oracle.density(p)).collect();
    let max = dens.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<[f64; 2]> = pts
        .iter()
        .zip(&dens)
        .filter(|(_, &d)| d > density_frac * max)
        .map(|(p, _)| *p)
        .collect();
    if keep.is_empty() {
        return Err(Error::input("no lattice point lies in the high-density region"));
    }
    let x = Array2::from_shape_fn((keep.len(), 2), |(i, j)| F::of(keep[i][j]));
    let c = cond.unwrap_or(params.layout().null_class());
    let pred = params.predict(x.view(), &vec![F::of(tau); keep.len()], &vec![c; keep.len()])?;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &p) in keep.iter().enumerate() {
        let target = match process.objective() {
            Objective::Epsilon => oracle.eps_star(p),
            Objective::Velocity => oracle.velocity(p),
        };
        for j in 0..2 {
            num += (pred[[i, j]].f64() - target[j]).powi(2);
            den += target[j].powi(2);
        }
    }
    if den == 0.0 {
        return Err(Error::numeric("oracle field vanishes on the evaluation region"));
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelLayout;
    use ndarray::array;

    #[test]
    fn drift_examples() {
        let spec = MixtureSpec::two_class(9900, 100);
        let at_mean = array![[0.3, 1.0], [0.3, 1.0]];
        assert_eq!(drift_metric(at_mean.view(), &spec, 1).unwrap(), 0.0);
        let mid = array![[-0.35, 0.35]];
        let half = 0.5 * (1.3f64 * 1.3 + 1.3 * 1.3).sqrt();
        assert!((drift_metric(mid.view(), &spec, 1).unwrap() - half).abs() < 1e-12);
        assert!((drift_metric(mid.view(), &spec, 0).unwrap() - half).abs() < 1e-12);
        let away = array![[0.4, 1.1]];
        assert!(drift_metric(away.view(), &spec, 1).unwrap() < 0.0);
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(matches!(drift_metric(empty.view(), &spec, 1), Err(Error::Input(_))));
    }

    #[test]
    fn success_examples() {
        let spec = MixtureSpec::two_class(1, 1);
        let pts = array![[-1.0, -0.3], [0.3, 1.0]];
        assert_eq!(success_rate(pts.view(), &[0, 1], &spec).unwrap(), 1.0);
        assert_eq!(success_rate(pts.view(), &[1, 0], &spec).unwrap(), 0.0);
        let mix = array![[-1.0, -0.3], [-0.9, -0.2], [0.3, 1.0]];
        assert!((success_rate(mix.view(), &[1, 1, 1], &spec).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(success_rate(pts.view(), &[0], &spec).is_err());
    }

    fn model(seed: u64) -> ModelParams<f64> {
        ModelParams::init(ModelLayout { hidden_width: 32, ..ModelLayout::default() }, seed).unwrap()
    }

    #[test]
    fn probe_is_deterministic() {
        let spec = MixtureSpec::two_class(99, 1);
        let p = model(0);
        let a = imba_probe(&p, &spec, &Process::Flow, 0.8, 1e-8, 256, 5).unwrap();
        let b = imba_probe(&p, &spec, &Process::Flow, 0.8, 1e-8, 256, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn probe_matches_direct_computation() {
        let spec = MixtureSpec::two_class(1, 1);
        let p = ModelParams::<f64>::zeros(ModelLayout::default()).unwrap();
        // zero model predicts 0, flow target at s=1 is eps - x0
        let probe = imba_probe(&p, &spec, &Process::Flow, 1.0, 0.0, 20_000, 1).unwrap();
        // E|eps - x0| per channel, x0 ~ N(mu, 0.01), eps ~ N(0, 1)
        let folded = |m: f64| {
            let s = (1.0f64 + 0.01).sqrt();
            let z = m / s;
            s * (2.0 / std::f64::consts::PI).sqrt() * (-z * z / 2.0).exp() + m * (1.0 - 2.0 * normal_cdf(-z))
        };
        let e0 = 0.5 * (folded(-1.0) + folded(-0.3));
        let e1 = 0.5 * (folded(0.3) + folded(1.0));
        assert!((probe[0] - e0).abs() < 0.02, "{} vs {e0}", probe[0]);
        assert!((probe[1] - e1).abs() < 0.02, "{} vs {e1}", probe[1]);
    }

    fn normal_cdf(x: f64) -> f64 {
        // Abramowitz-Stegun 7.1.26 on erf
        let t = 1.0 / (1.0 + 0.327_591_1 * x.abs() / 2f64.sqrt());
        let y = 1.0
            - (((((1.061_405_429 * t - 1.453_152_027) * t) + 1.421_413_741) * t - 0.284_496_736) * t
                + 0.254_829_592)
                * t
                * (-(x * x) / 2.0).exp();
        0.5 * (1.0 + if x >= 0.0 { y } else { -y })
    }

    #[test]
    fn untrained_probe_has_no_class_preference_across_seeds() {
        let spec = MixtureSpec::two_class(99, 1);
        let mut gaps = Vec::new();
        for seed in 0..5 {
            let p = model(seed);
            let v = imba_probe(&p, &spec, &Process::Flow, 0.8, 1e-8, 2000, seed).unwrap();
            gaps.push((v[1] - v[0]) / v[0]);
        }
        // both means sit at the same distance from the origin; a random
        // model's offset favors no class on average
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        let sd = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 3.0 * sd / n.sqrt(), "{gaps:?}");
        assert!(gaps.iter().any(|&g| g > 0.0) && gaps.iter().any(|&g| g < 0.0), "{gaps:?}");
    }

    #[test]
    fn zero_model_score_shift_is_zero() {
        let spec = MixtureSpec::two_class(99, 1);
        let p = ModelParams::<f64>::zeros(ModelLayout::default()).unwrap();
        assert_eq!(score_shift(&p, &spec, &Process::Flow, 0.5).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn field_error_of_zero_model_is_one() {
        let spec = MixtureSpec::two_class(1, 1);
        let p = ModelParams::<f64>::zeros(ModelLayout::default()).unwrap();
        let lattice = Lattice { x_min: -2.0, x_max: 2.0, y_min: -2.0, y_max: 2.0, nx: 21, ny: 21 };
        let e = field_relative_error(&p, &spec, &Process::Flow, 0.5, None, &lattice, 0.01).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
    }
}
