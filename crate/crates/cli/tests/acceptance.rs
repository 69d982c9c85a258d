//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=1,5,12` restricts the run to the listed criteria and
//! `ACCEPTANCE_STRICT=1` turns any failure into a non-zero exit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use imbalab_bench as bench;
use imbalab_core::balancing::{
    baseline_step, freq_weighted_step, imba_step, imba_step_with_weights, imba_weights, train, ConceptStats,
    LossConfig, LrSchedule, TrainConfig, WeightMode,
};
use imbalab_core::diffusion::{flow_sample, GuidanceConfig, Lattice, NoiseSchedule, NoisyBatch, Process};
use imbalab_core::nn::{finite_diff_check, FdOptions, ModelLayout, ModelParams};
use imbalab_core::synth::{field_relative_error, imba_probe, sample_mixture, ExperimentConfig, MixtureSpec};
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

const FD_TOL: f64 = 1e-4;
const FD_DRAWS: u64 = 10;
const IDENTITY_TOL: f64 = 1e-12;
const STOP_GRAD_TOL: f64 = 1e-6;
const REDUCTION_TOL: f64 = 1e-10;
const DRIFT_FACTOR: f64 = 2.0;
const TILT_FRAC: f64 = 0.1;
const FIELD_TOL: f64 = 0.15;
const IMBA_MARGIN: f64 = 0.15;
const SCALE_BAND: f64 = 0.10;
const REBALANCE_GAIN: f64 = 0.15;

const FULL_STEPS: usize = 20_000;
const SHORT_STEPS: usize = 400;
const SHORT_LR: f64 = 1e-4;
const FIELD_TIME: f64 = 0.5;
const EVAL_SAMPLES: usize = 1000;
const EVAL_FLOW_STEPS: usize = 100;
const PROBE_DRAWS: usize = 1000;

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
}

fn selected() -> Option<Vec<usize>> {
    let v = std::env::var("ACCEPTANCE_ONLY").ok()?;
    Some(v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

fn count(flags: &[bool]) -> usize {
    flags.iter().filter(|&&f| f).count()
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

// ---------------------------------------------------------------------------
// independent reference computations

/// `max(|target - uncond|, floor)^gamma`, reduced over the two channels
/// unless `mode` is per-element. One token per sample, so the per-sample
/// scalar and the channel mean coincide.
fn frozen_distance(target: &Array2<f64>, uncond: &Array2<f64>, gamma: f64, floor: f64, mode: WeightMode) -> Array2<f64> {
    let mut d = Array2::zeros(target.raw_dim());
    for i in 0..target.nrows() {
        let row: Vec<f64> = (0..target.ncols())
            .map(|j| (target[[i, j]] - uncond[[i, j]]).abs().max(floor).powf(gamma))
            .collect();
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        for j in 0..target.ncols() {
            d[[i, j]] = match mode {
                WeightMode::PerElement => row[j],
                WeightMode::ChannelMean | WeightMode::SampleScalar => mean,
            };
        }
    }
    d
}

fn uncond_prediction(params: &ModelParams<f64>, batch: &NoisyBatch<f64>) -> Array2<f64> {
    let null = params.layout().null_class();
    params
        .predict(batch.x_t.view(), &batch.t, &vec![null; batch.len()])
        .unwrap()
}

fn cov(spec: &MixtureSpec, k: usize) -> [[f64; 2]; 2] {
    let [sx, sy] = spec.stds[k];
    let r = spec.rho[k];
    [[sx * sx, r * sx * sy], [r * sx * sy, sy * sy]]
}

/// Marginal density and optimal velocity of the flow-noised mixture at `x`.
fn mixture_velocity(spec: &MixtureSpec, s: f64, x: [f64; 2]) -> (f64, [f64; 2]) {
    let (a, b) = (1.0 - s, s);
    let total: f64 = spec.counts.iter().map(|&c| c as f64).sum();
    let mut dens = Vec::new();
    let mut vels = Vec::new();
    for k in 0..spec.means.len() {
        let sg = cov(spec, k);
        let c = [
            [a * a * sg[0][0] + b * b, a * a * sg[0][1]],
            [a * a * sg[1][0], a * a * sg[1][1] + b * b],
        ];
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let inv = [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]];
        let mu = spec.means[k];
        let r = [x[0] - a * mu[0], x[1] - a * mu[1]];
        let z = [inv[0][0] * r[0] + inv[0][1] * r[1], inv[1][0] * r[0] + inv[1][1] * r[1]];
        let q = r[0] * z[0] + r[1] * z[1];
        let p = spec.counts[k] as f64 / total;
        dens.push(p * (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt()));
        // E[x0 | x, k] = mu + a Sigma C^-1 r,  E[eps | x, k] = b C^-1 r
        let sz = [sg[0][0] * z[0] + sg[0][1] * z[1], sg[1][0] * z[0] + sg[1][1] * z[1]];
        let x0 = [mu[0] + a * sz[0], mu[1] + a * sz[1]];
        let eps = [b * z[0], b * z[1]];
        vels.push([eps[0] - x0[0], eps[1] - x0[1]]);
    }
    let sum: f64 = dens.iter().sum();
    let mut v = [0.0; 2];
    for (d, w) in dens.iter().zip(&vels) {
        v[0] += d / sum * w[0];
        v[1] += d / sum * w[1];
    }
    (sum, v)
}

fn field_region() -> Lattice {
    Lattice {
        x_min: -1.6,
        x_max: 0.9,
        y_min: -0.9,
        y_max: 1.6,
        nx: 41,
        ny: 41,
    }
}

const DENSITY_FRAC: f64 = 0.01;

/// `||pred - v*|| / ||v*||` over lattice points above `DENSITY_FRAC` of the
/// peak noised density, for the null-condition prediction.
fn uncond_field_error(params: &ModelParams<f64>, spec: &MixtureSpec, s: f64) -> f64 {
    let lat = field_region();
    let mut pts = Vec::new();
    for i in 0..lat.nx {
        for j in 0..lat.ny {
            let x = lat.x_min + (lat.x_max - lat.x_min) * i as f64 / (lat.nx - 1) as f64;
            let y = lat.y_min + (lat.y_max - lat.y_min) * j as f64 / (lat.ny - 1) as f64;
            pts.push([x, y]);
        }
    }
    let evals: Vec<(f64, [f64; 2])> = pts.iter().map(|&p| mixture_velocity(spec, s, p)).collect();
    let peak = evals.iter().map(|e| e.0).fold(0.0, f64::max);
    let null = params.layout().null_class();
    let (mut num, mut den) = (0.0, 0.0);
    for (p, (d, v)) in pts.iter().zip(&evals) {
        if *d <= DENSITY_FRAC * peak {
            continue;
        }
        let x = Array2::from_shape_vec((1, 2), p.to_vec()).unwrap();
        let pred = params.predict(x.view(), &[s], &[null]).unwrap();
        for j in 0..2 {
            num += (pred[[0, j]] - v[j]).powi(2);
            den += v[j].powi(2);
        }
    }
    (num / den).sqrt()
}

fn unit(from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
    let d = [to[0] - from[0], to[1] - from[1]];
    let n = d[0].hypot(d[1]);
    [d[0] / n, d[1] / n]
}

/// Head is the larger class; class 0 on a tie.
fn head_tail(spec: &MixtureSpec) -> (usize, usize) {
    if spec.counts[1] > spec.counts[0] {
        (1, 0)
    } else {
        (0, 1)
    }
}

/// Denoising direction `-v` at the noised midpoint, as (projection toward
/// the head mean, norm).
fn midpoint_tilt(params: &ModelParams<f64>, spec: &MixtureSpec, s: f64) -> (f64, f64) {
    let (h, t) = head_tail(spec);
    let (mh, mt) = (spec.means[h], spec.means[t]);
    let a = 1.0 - s;
    let x = Array2::from_shape_vec((1, 2), vec![a * 0.5 * (mh[0] + mt[0]), a * 0.5 * (mh[1] + mt[1])]).unwrap();
    let p = params.predict(x.view(), &[s], &[params.layout().null_class()]).unwrap();
    let d = [-p[[0, 0]], -p[[0, 1]]];
    let u = unit(mt, mh);
    (d[0] * u[0] + d[1] * u[1], d[0].hypot(d[1]))
}

fn class_samples(params: &ModelParams<f64>, class: usize, seed: u64) -> Array2<f64> {
    let g = GuidanceConfig::new(1.0).unwrap();
    flow_sample(params, EVAL_FLOW_STEPS, Some(class), g, EVAL_SAMPLES, seed).unwrap().0
}

/// Mean displacement of `class` samples toward the other class mean.
fn tail_drift(params: &ModelParams<f64>, spec: &MixtureSpec, seed: u64) -> f64 {
    let (h, t) = (0, 1);
    let x = class_samples(params, t, seed);
    let m = x.mean_axis(Axis(0)).unwrap();
    let mu = spec.means[t];
    let u = unit(mu, spec.means[h]);
    (m[0] - mu[0]) * u[0] + (m[1] - mu[1]) * u[1]
}

/// Fraction of class-1 samples nearest to the class-1 mean.
fn tail_success(params: &ModelParams<f64>, spec: &MixtureSpec, seed: u64) -> f64 {
    let x = class_samples(params, 1, seed);
    let d2 = |p: [f64; 2], m: [f64; 2]| (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2);
    let hits = x
        .rows()
        .into_iter()
        .filter(|r| {
            let p = [r[0], r[1]];
            d2(p, spec.means[1]) < d2(p, spec.means[0])
        })
        .count();
    hits as f64 / x.nrows() as f64
}

/// Channel-mean IMBA distance per class at full noise, by direct sampling.
fn probe_by_hand(params: &ModelParams<f64>, spec: &MixtureSpec, gamma: f64, seed: u64) -> [f64; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let null = params.layout().null_class();
    let mut out = [0.0; 2];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut x0 = Array2::zeros((PROBE_DRAWS, 2));
        let mut eps = Array2::zeros((PROBE_DRAWS, 2));
        let [sx, sy] = spec.stds[k];
        let r = spec.rho[k];
        for i in 0..PROBE_DRAWS {
            let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            x0[[i, 0]] = spec.means[k][0] + sx * z[0];
            x0[[i, 1]] = spec.means[k][1] + sy * (r * z[0] + (1.0 - r * r).sqrt() * z[1]);
            eps[[i, 0]] = z[2];
            eps[[i, 1]] = z[3];
        }
        // s = 1: x = eps and the velocity target is eps - x0
        let target = &eps - &x0;
        let pred = params.predict(eps.view(), &vec![1.0; PROBE_DRAWS], &vec![null; PROBE_DRAWS]).unwrap();
        let d = frozen_distance(&target, &pred, gamma, 1e-8, WeightMode::ChannelMean);
        *slot = d.column(0).sum() / PROBE_DRAWS as f64;
    }
    out
}

// ---------------------------------------------------------------------------
// training

fn fit(spec: &MixtureSpec, train_cfg: TrainConfig, seed: u64) -> ModelParams<f64> {
    let base = ExperimentConfig {
        mixture: spec.clone(),
        train: train_cfg,
        ..ExperimentConfig::default()
    };
    base.validate().unwrap();
    let data = sample_mixture::<f64>(spec, seed).unwrap();
    let process = base.process.build::<f64>().unwrap();
    let mut params = ModelParams::init(base.model, seed).unwrap();
    train(&mut params, &data, &process, &TrainConfig { seed, ..train_cfg })
        .map_err(|e| e.source)
        .unwrap();
    params
}

fn full_budget(loss: LossConfig) -> TrainConfig {
    TrainConfig {
        loss,
        steps: FULL_STEPS,
        lr_schedule: LrSchedule::Cosine,
        ..TrainConfig::default()
    }
}

fn short_budget(loss: LossConfig) -> TrainConfig {
    TrainConfig {
        loss,
        steps: SHORT_STEPS,
        lr: SHORT_LR,
        lr_schedule: LrSchedule::Constant,
        ..TrainConfig::default()
    }
}

#[derive(Default)]
struct Models {
    cond_balanced: Option<Vec<ModelParams<f64>>>,
    cond_imbalanced: Option<Vec<ModelParams<f64>>>,
    short_success: BTreeMap<String, Vec<f64>>,
}

impl Models {
    fn conditional(&mut self, imbalanced: bool) -> &Vec<ModelParams<f64>> {
        let slot = if imbalanced { &mut self.cond_imbalanced } else { &mut self.cond_balanced };
        slot.get_or_insert_with(|| {
            let spec = if imbalanced { MixtureSpec::two_class(9900, 100) } else { MixtureSpec::two_class(5000, 5000) };
            SEEDS.iter().map(|&s| fit(&spec, full_budget(LossConfig::baseline()), s)).collect()
        })
    }

    /// Tail success per seed for a short-budget run of `kind` on `counts`.
    fn short(&mut self, kind: &str, counts: [u64; 2]) -> Vec<f64> {
        let key = format!("{kind}/{}:{}", counts[0], counts[1]);
        self.short_success
            .entry(key)
            .or_insert_with(|| {
                let loss = match kind {
                    "baseline" => LossConfig::baseline(),
                    "freq_weighted" => LossConfig::freq_weighted(),
                    "sample_scalar" => LossConfig {
                        weight_mode: WeightMode::SampleScalar,
                        ..LossConfig::imba()
                    },
                    "channel_mean" => LossConfig::imba(),
                    other => panic!("unknown kind {other}"),
                };
                let spec = MixtureSpec::two_class(counts[0], counts[1]);
                SEEDS
                    .iter()
                    .map(|&s| tail_success(&fit(&spec, short_budget(loss), s), &spec, 9_000 + s))
                    .collect()
            })
            .clone()
    }
}

// ---------------------------------------------------------------------------
// step-level draws

fn draw(seed: u64) -> (ModelParams<f64>, Process<f64>, NoisyBatch<f64>, Vec<usize>) {
    let layout = ModelLayout {
        hidden_width: 32,
        ..ModelLayout::default()
    };
    let params = ModelParams::init(layout, 1_000 + seed).unwrap();
    let process = if seed % 2 == 0 { Process::Flow } else { Process::Ddpm(NoiseSchedule::standard()) };
    let data = sample_mixture::<f64>(&MixtureSpec::two_class(12, 4), 2_000 + seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3_000 + seed);
    let batch = process.noisy_batch(data.points.clone(), data.labels.clone(), &mut rng).unwrap();
    (params, process, batch, data.labels)
}

fn with_dropped(batch: &NoisyBatch<f64>, null: usize, seed: u64) -> NoisyBatch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(4_000 + seed);
    let mut b = batch.clone();
    for c in &mut b.cond {
        if rng.gen_bool(0.25) {
            *c = null;
        }
    }
    b
}

fn imba_cfg(gamma: f64, lambda: f64, mode: WeightMode, floor: f64) -> LossConfig {
    LossConfig {
        gamma,
        lambda,
        weight_mode: mode,
        residual_floor: floor,
        ..LossConfig::imba()
    }
}

const MODES: [WeightMode; 3] = [WeightMode::PerElement, WeightMode::ChannelMean, WeightMode::SampleScalar];

// ---------------------------------------------------------------------------
// criteria

fn c1_gradients() -> (bool, String) {
    let stats = ConceptStats::from_counts(vec![99, 1]).unwrap();
    let opts = |seed| FdOptions {
        step: 1e-4,
        samples: None,
        floor: 1e-6,
        seed,
    };
    let mut worst = [0.0f64; 3];
    for seed in 0..FD_DRAWS {
        let (p, _, b, labels) = draw(seed);
        let dropped = with_dropped(&b, p.layout().null_class(), seed);
        let e = finite_diff_check(&p, |q| baseline_step(q, &dropped, &labels).map(|(r, g)| (r.loss, g)), opts(seed)).unwrap();
        worst[0] = worst[0].max(e);
        let e = finite_diff_check(
            &p,
            |q| freq_weighted_step(q, &dropped, &labels, &stats).map(|(r, g)| (r.loss, g)),
            opts(seed),
        )
        .unwrap();
        worst[1] = worst[1].max(e);
        let cfg = LossConfig::imba();
        let d = frozen_distance(&b.target(), &uncond_prediction(&p, &b), cfg.gamma, cfg.residual_floor, cfg.weight_mode);
        let (_, g) = imba_step(&p, &b, &labels, &cfg).unwrap();
        let e = finite_diff_check(
            &p,
            |q| {
                let (r, _) = imba_step_with_weights(q, &b, &labels, d.view(), cfg.lambda)?;
                Ok((r.loss, g.clone()))
            },
            opts(seed),
        )
        .unwrap();
        worst[2] = worst[2].max(e);
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    (
        max < FD_TOL,
        format!(
            "max rel err {max:.2e} over {FD_DRAWS} draws, all params (baseline {:.1e}, freq {:.1e}, imba {:.1e}; tol {FD_TOL:e})",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn c5_identity() -> (bool, String) {
    let mut worst = 0.0f64;
    for seed in 0..FD_DRAWS {
        let (p, _, b, labels) = draw(seed);
        let target = b.target();
        let uncond = uncond_prediction(&p, &b);
        let d = imba_weights(target.view(), uncond.view(), 2.0, WeightMode::ChannelMean, 0.0).unwrap();
        let mean_d = d.column(0).sum() / d.nrows() as f64;
        let naive_lu = target
            .iter()
            .zip(uncond.iter())
            .map(|(t, u)| (t - u).powi(2))
            .sum::<f64>()
            / target.len() as f64;
        let (r, _) = imba_step(&p, &b, &labels, &imba_cfg(2.0, 0.9, WeightMode::ChannelMean, 0.0)).unwrap();
        for lu in [naive_lu, r.l_u] {
            worst = worst.max((mean_d - lu).abs() / lu.abs());
        }
    }
    (
        worst < IDENTITY_TOL,
        format!("max |mean D - L_u| / L_u = {worst:.2e} over {FD_DRAWS} draws (tol {IDENTITY_TOL:e})"),
    )
}

fn c6_stop_gradient() -> (bool, String) {
    let mut worst = 0.0f64;
    let mut through_d = f64::INFINITY;
    for seed in 0..FD_DRAWS {
        let (p, _, b, labels) = draw(seed);
        let uncond = uncond_prediction(&p, &b);
        for mode in MODES {
            let cfg = imba_cfg(0.8, 0.9, mode, 1e-8);
            let d = frozen_distance(&b.target(), &uncond, cfg.gamma, cfg.residual_floor, mode);
            let (_, g) = imba_step(&p, &b, &labels, &cfg).unwrap();
            let (_, g_frozen) = imba_step_with_weights(&p, &b, &labels, d.view(), cfg.lambda).unwrap();
            worst = worst.max(g.max_rel_diff(&g_frozen, 1e-12));
        }
        if seed == 0 {
            // differentiating through D as well gives a visibly different gradient
            let cfg = LossConfig::imba();
            let (_, g) = imba_step(&p, &b, &labels, &cfg).unwrap();
            let err = finite_diff_check(
                &p,
                |q| {
                    let (r, _) = imba_step(q, &b, &labels, &cfg)?;
                    Ok((r.loss, g.clone()))
                },
                FdOptions { samples: Some(200), ..FdOptions::default() },
            )
            .unwrap();
            through_d = err;
        }
    }
    (
        worst < STOP_GRAD_TOL,
        format!(
            "max rel diff vs frozen-D gradient {worst:.2e} over {FD_DRAWS} draws x 3 modes (tol {STOP_GRAD_TOL:e}); \
             vs full-derivative FD {through_d:.2e}"
        ),
    )
}

fn c7_reduction() -> (bool, String) {
    let mut worst = 0.0f64;
    for seed in 0..FD_DRAWS {
        let (p, _, b, labels) = draw(seed);
        let (_, g_base) = baseline_step(&p, &b, &labels).unwrap();
        for mode in MODES {
            let (_, g) = imba_step(&p, &b, &labels, &imba_cfg(0.0, 1.0, mode, 1e-8)).unwrap();
            worst = worst.max(g.max_rel_diff(&g_base, 1e-12));
        }
    }
    (
        worst < REDUCTION_TOL,
        format!("max rel diff {worst:.2e} over {FD_DRAWS} draws x 3 modes (tol {REDUCTION_TOL:e})"),
    )
}

fn c2_drift(models: &mut Models) -> (bool, String) {
    let bal_spec = MixtureSpec::two_class(5000, 5000);
    let imb_spec = MixtureSpec::two_class(9900, 100);
    let bal: Vec<f64> = models
        .conditional(false)
        .iter()
        .zip(SEEDS)
        .map(|(p, s)| tail_drift(p, &bal_spec, 7_000 + s))
        .collect();
    let imb: Vec<f64> = models
        .conditional(true)
        .iter()
        .zip(SEEDS)
        .map(|(p, s)| tail_drift(p, &imb_spec, 7_000 + s))
        .collect();
    let strict: Vec<bool> = imb.iter().zip(&bal).map(|(i, b)| *i > DRIFT_FACTOR * b.abs()).collect();
    let literal: Vec<bool> = imb.iter().zip(&bal).map(|(i, b)| *i > DRIFT_FACTOR * b).collect();
    let n = count(&strict);
    (
        n >= 4,
        format!(
            "imbalanced > {DRIFT_FACTOR} x |balanced| in {n}/5 (need 4; signed form {}/5); tail drift balanced {} imbalanced {}",
            count(&literal),
            fmt_list(&bal),
            fmt_list(&imb)
        ),
    )
}

fn c3_field() -> (bool, String) {
    let loss = LossConfig {
        cond_drop_prob: 1.0,
        ..LossConfig::baseline()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, spec) in [("1:1", MixtureSpec::two_class(5000, 5000)), ("99:1", MixtureSpec::two_class(9900, 100))] {
        let mut ratios = Vec::new();
        let mut errs = Vec::new();
        for &s in &SEEDS {
            let p = fit(&spec, full_budget(loss), s);
            let (proj, norm) = midpoint_tilt(&p, &spec, FIELD_TIME);
            ratios.push(proj / norm);
            let e = uncond_field_error(&p, &spec, FIELD_TIME);
            let lib = field_relative_error(&p, &spec, &Process::Flow, FIELD_TIME, None, &field_region(), DENSITY_FRAC).unwrap();
            assert!((e - lib).abs() < 1e-9, "library field error {lib} differs from reference {e}");
            errs.push(e);
        }
        let tilt_ok = if name == "1:1" {
            count(&ratios.iter().map(|r| r.abs() < TILT_FRAC).collect::<Vec<_>>())
        } else {
            count(&ratios.iter().map(|&r| r > 0.0).collect::<Vec<_>>())
        };
        let err_ok = count(&errs.iter().map(|&e| e < FIELD_TOL).collect::<Vec<_>>());
        ok &= tilt_ok == 5 && err_ok == 5;
        let rule = if name == "1:1" { format!("|proj|/norm < {TILT_FRAC}") } else { "proj > 0".into() };
        parts.push(format!(
            "{name}: {rule} {tilt_ok}/5 {}, field err < {FIELD_TOL} {err_ok}/5 {}",
            fmt_list(&ratios),
            fmt_list(&errs)
        ));
    }
    (ok, parts.join("; "))
}

fn c4_probe(models: &mut Models) -> (bool, String) {
    let spec = MixtureSpec::two_class(9900, 100);
    let cfg = LossConfig::imba();
    let mut lib = Vec::new();
    let mut agree = true;
    for (p, s) in models.conditional(true).iter().zip(SEEDS) {
        let v = imba_probe(p, &spec, &Process::Flow, cfg.gamma, cfg.residual_floor, PROBE_DRAWS, 8_000 + s).unwrap();
        let hand = probe_by_hand(p, &spec, cfg.gamma, 8_500 + s);
        agree &= (v[1] > v[0]) == (hand[1] > hand[0]);
        lib.push((v[0], v[1]));
    }
    let n = lib.iter().filter(|(h, t)| t > h).count();
    let heads: Vec<f64> = lib.iter().map(|p| p.0).collect();
    let tails: Vec<f64> = lib.iter().map(|p| p.1).collect();
    (
        n >= 4 && agree,
        format!(
            "D_tail > D_head in {n}/5 (need 4); D_head {} D_tail {}; independent estimate agrees: {agree}",
            fmt_list(&heads),
            fmt_list(&tails)
        ),
    )
}

fn c8_ordering(models: &mut Models) -> (bool, String) {
    let base = models.short("baseline", [9900, 100]);
    let ss = models.short("sample_scalar", [9900, 100]);
    let cm = models.short("channel_mean", [9900, 100]);
    let per_seed: Vec<bool> = (0..5)
        .map(|i| base[i] <= ss[i] && ss[i] <= cm[i] && cm[i] - base[i] >= IMBA_MARGIN)
        .collect();
    let n = count(&per_seed);
    let ordered = count(&(0..5).map(|i| base[i] <= ss[i] && ss[i] <= cm[i]).collect::<Vec<_>>());
    (
        n >= 4,
        format!(
            "ordering and +{:.0} pt margin in {n}/5 (need 4; ordering alone {ordered}/5); tail success baseline {} sample_scalar {} channel_mean {}",
            IMBA_MARGIN * 100.0,
            fmt_list(&base),
            fmt_list(&ss),
            fmt_list(&cm)
        ),
    )
}

fn c9_frequency(models: &mut Models) -> (bool, String) {
    let base = models.short("baseline", [9900, 100]);
    let freq = models.short("freq_weighted", [9900, 100]);
    let cm = models.short("channel_mean", [9900, 100]);
    let improves = count(&(0..5).map(|i| freq[i] > base[i]).collect::<Vec<_>>());
    let beats = count(&(0..5).map(|i| cm[i] >= freq[i]).collect::<Vec<_>>());
    (
        improves >= 3 && beats >= 3,
        format!(
            "freq > baseline {improves}/5, channel_mean >= freq {beats}/5 (need 3 each); tail success freq {}",
            fmt_list(&freq)
        ),
    )
}

fn c10_scale(models: &mut Models) -> (bool, String) {
    let small = models.short("baseline", [1980, 20]);
    let large = models.short("baseline", [9900, 100]);
    let even = models.short("baseline", [1000, 1000]);
    let per_seed: Vec<bool> = (0..5)
        .map(|i| (large[i] - small[i]).abs() < SCALE_BAND && even[i] - small[i] >= REBALANCE_GAIN)
        .collect();
    let n = count(&per_seed);
    (
        n >= 4,
        format!(
            "|10k - 2k| < {:.0} pt and 1:1 gain >= {:.0} pt in {n}/5 (need 4); tail success 2k {} 10k {} 1:1 {}",
            SCALE_BAND * 100.0,
            REBALANCE_GAIN * 100.0,
            fmt_list(&small),
            fmt_list(&large),
            fmt_list(&even)
        ),
    )
}

// ---------------------------------------------------------------------------
// benchmark construction

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../benchkit/tests/fixtures").join(name)
}

fn words(caption: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in caption.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn c11_benchmark() -> (bool, String) {
    let corpus = bench::Corpus::read(fs::read(fixture("captions.txt")).unwrap().as_slice()).unwrap();
    let vocab = bench::ConceptVocabulary::read(fs::read(fixture("vocab.txt")).unwrap().as_slice()).unwrap();
    let params = bench::BuildParams::default();
    let mut failures = Vec::new();

    let mut freq: BTreeMap<String, u64> = BTreeMap::new();
    let mut edge: BTreeMap<(String, String), u64> = BTreeMap::new();
    for c in &corpus.captions {
        let w = words(c);
        let present: Vec<&String> = vocab.words().iter().filter(|v| w.contains(v)).collect();
        for a in &present {
            *freq.entry((*a).clone()).or_default() += 1;
            for b in &present {
                if a < b {
                    *edge.entry(((*a).clone(), (*b).clone())).or_default() += 1;
                }
            }
        }
    }
    let g = bench::ConceptGraph::from_captions(&corpus.captions, &vocab);
    let got: BTreeMap<String, u64> = g.nodes().map(|(c, n)| (c.to_string(), n)).collect();
    if got != freq {
        failures.push("node frequencies");
    }
    let got: BTreeMap<(String, String), u64> = g.edges().map(|(a, b, n)| ((a.to_string(), b.to_string()), n)).collect();
    if got != edge {
        failures.push("edge weights");
    }

    // cutoff: smallest bottom-quartile value covering half the quartile
    let mut sorted: Vec<u64> = freq.values().copied().collect();
    sorted.sort_unstable();
    let q = ((sorted.len() + 3) / 4).max(1);
    let bottom = &sorted[..q];
    let need = (q + 1) / 2;
    let cutoff = *bottom
        .iter()
        .filter(|&&v| bottom.iter().filter(|&&w| w <= v).count() >= need)
        .min()
        .unwrap();
    let split = bench::split_head_tail(&g, params.threshold);
    let tail: Vec<String> = freq.iter().filter(|(_, &f)| f <= cutoff).map(|(c, _)| c.clone()).collect();
    let head: Vec<String> = freq
        .iter()
        .filter(|(_, &f)| f > params.threshold * cutoff)
        .map(|(c, _)| c.clone())
        .collect();
    if split.tail_cutoff != cutoff || split.tail != tail || split.head != head {
        failures.push("head/tail split");
    }

    let top = |pool: &[String], n: usize| {
        let f = |c: &String| freq.get(c).copied().unwrap_or(0);
        let mut ranked: Vec<(usize, String)> = pool
            .iter()
            .map(|c| (pool.iter().filter(|o| f(o) > f(c) || (f(o) == f(c) && *o < c)).count(), c.clone()))
            .filter(|(r, _)| *r < n)
            .collect();
        ranked.sort();
        ranked.into_iter().map(|(_, c)| c).collect::<Vec<_>>()
    };
    let heads = bench::select_representatives(&split.head, &g, params.n).unwrap();
    let tails = bench::select_representatives(&split.tail, &g, params.n).unwrap();
    if heads != top(&head, params.n) || tails != top(&tail, params.n) {
        failures.push("representatives");
    }

    let weight = |h: &str, t: &str| {
        let k = if h < t { (h.to_string(), t.to_string()) } else { (t.to_string(), h.to_string()) };
        edge.get(&k).copied().unwrap_or(0)
    };
    let all: Vec<(u64, String, String)> = heads
        .iter()
        .flat_map(|h| tails.iter().map(move |t| (weight(h, t), h.clone(), t.clone())))
        .collect();
    let mut expect: Vec<(usize, (u64, String, String))> = all
        .iter()
        .map(|p| (all.iter().filter(|o| *o < p).count(), p.clone()))
        .filter(|(r, _)| *r < params.k)
        .collect();
    expect.sort();
    let expect: Vec<(String, String, u64)> = expect.into_iter().map(|(_, (w, h, t))| (h, t, w)).collect();
    let pairs = bench::topk_min_edges(&g, &heads, &tails, params.k).unwrap();
    let got: Vec<(String, String, u64)> = pairs.iter().map(|p| (p.head.clone(), p.tail.clone(), p.weight)).collect();
    if got != expect {
        failures.push("pair ranking");
    }

    let spec = bench::build_benchmark(&corpus, &vocab, params, &bench::TemplateSet::default()).unwrap();
    let spec_pairs: Vec<(String, String, u64)> = spec.pairs.iter().map(|p| (p.head.clone(), p.tail.clone(), p.weight)).collect();
    if spec.heads != heads || spec.tails != tails || spec_pairs != expect {
        failures.push("end-to-end build");
    }
    let mentions = spec
        .pairs
        .iter()
        .enumerate()
        .all(|(i, p)| spec.prompts[5 * i..5 * i + 5].iter().all(|s| s.contains(&p.head) && s.contains(&p.tail)));
    if spec.prompts.len() != 75 || !mentions {
        failures.push("prompt count");
    }
    (
        failures.is_empty(),
        format!(
            "{} captions, {} concepts, {} edges, cutoff {cutoff}, n={} k={} -> {} pairs, {} prompts{}",
            corpus.captions.len(),
            freq.len(),
            edge.len(),
            params.n,
            params.k,
            spec.pairs.len(),
            spec.prompts.len(),
            if failures.is_empty() { String::new() } else { format!("; mismatch: {}", failures.join(", ")) }
        ),
    )
}

// ---------------------------------------------------------------------------
// CLI determinism

fn cli_script(dir: &Path) -> Vec<Vec<String>> {
    let d = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let common = [
        "model.hidden_width=16",
        "mixture.counts=[90, 10]",
        "train.steps=25",
        "train.batch_size=16",
        "eval.flow_steps=10",
        "eval.samples_per_class=20",
        "eval.probe_draws=50",
        "seeds=[0, 1]",
        "report.trajectories=4",
        "field.lattice.nx=5",
        "field.lattice.ny=5",
        "sample.n=7",
    ];
    let figure = |kind: &str, source: &str, out: &str| {
        vec![
            format!("figure.kind={kind}"),
            format!("figure.source=\"{}\"", d(source)),
            format!("figure.output=\"{}\"", d(out)),
        ]
    };
    let steps: Vec<(&str, Vec<String>)> = vec![
        ("gen-data", vec![]),
        ("train", vec![]),
        ("sample", vec![]),
        ("probe", vec![]),
        ("score-field", vec![]),
        ("experiment", vec![]),
        ("figure", figure("scatter", "data.csv", "scatter.svg")),
        ("figure", figure("quiver", "field.csv", "quiver.svg")),
        ("figure", figure("trajectory", "trajectory.csv", "trajectory.svg")),
        ("figure", figure("bar", "results.csv", "bar.svg")),
        (
            "bench-build",
            vec![
                format!("bench.corpus=\"{}\"", fixture("captions.txt").display()),
                format!("bench.vocab=\"{}\"", fixture("vocab.txt").display()),
            ],
        ),
        ("report", vec![]),
        ("show-config", vec![]),
    ];
    steps
        .into_iter()
        .map(|(cmd, extra)| {
            let mut v = vec![cmd.to_string(), "-o".into(), d("")];
            for s in common.iter().map(|s| s.to_string()).chain(extra) {
                v.push("--set".into());
                v.push(s);
            }
            v
        })
        .collect()
}

fn snapshot(dir: &Path, into: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            snapshot(&path, into);
        } else {
            into.insert(path.clone(), fs::read(&path).unwrap());
        }
    }
}

fn run_script(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for (i, args) in cli_script(dir).iter().enumerate() {
        let out = Command::new(env!("CARGO_BIN_EXE_imbalab"))
            .env_remove("IMBALAB_OUT")
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr).trim()));
        }
        files.insert(PathBuf::from(format!("<stdout {i} {}>", args[0])), out.stdout);
    }
    snapshot(dir, &mut files);
    Ok(files)
}

fn c12_determinism() -> (bool, String) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let first = match run_script(&dir) {
        Ok(f) => f,
        Err(e) => return (false, e),
    };
    fs::remove_dir_all(&dir).unwrap();
    let second = match run_script(&dir) {
        Ok(f) => f,
        Err(e) => return (false, e),
    };
    let keys_match = first.keys().eq(second.keys());
    let differing: Vec<String> = first
        .iter()
        .filter(|(k, v)| second.get(*k) != Some(v))
        .map(|(k, _)| k.strip_prefix(&dir).unwrap_or(k).display().to_string())
        .collect();
    let outputs = first.keys().filter(|k| k.starts_with(&dir)).count();
    let commands = cli_script(&dir).len();
    (
        keys_match && differing.is_empty(),
        format!(
            "{commands} invocations, {outputs} output files compared byte for byte{}",
            if differing.is_empty() { String::new() } else { format!("; differ: {}", differing.join(", ")) }
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    // cargo passes test-harness flags; a listing request gets an empty answer
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let only = selected();
    let wanted = |id: usize| only.as_ref().map_or(true, |v| v.contains(&id));
    let mut models = Models::default();
    let mut verdicts = Vec::new();

    type Check<'a> = Box<dyn FnOnce(&mut Models) -> (bool, String) + 'a>;
    let criteria: Vec<(usize, &'static str, Option<f64>, Check)> = vec![
        (1, "gradient correctness", Some(60.0), Box::new(|_| c1_gradients())),
        (5, "gamma=2 distance equals unconditional loss", None, Box::new(|_| c5_identity())),
        (6, "stop-gradient contract", None, Box::new(|_| c6_stop_gradient())),
        (7, "gamma=0 lambda=1 reduces to baseline", None, Box::new(|_| c7_reduction())),
        (11, "benchmark construction exactness", None, Box::new(|_| c11_benchmark())),
        (12, "CLI determinism", None, Box::new(|_| c12_determinism())),
        (2, "tail drift grows under imbalance", Some(900.0), Box::new(c2_drift)),
        (4, "IMBA distance larger for the tail", Some(120.0), Box::new(c4_probe)),
        (3, "unconditional field tilt and accuracy", Some(600.0), Box::new(|_| c3_field())),
        (8, "IMBA tail success ordering and margin", Some(1800.0), Box::new(c8_ordering)),
        (9, "frequency weighting comparison", None, Box::new(c9_frequency)),
        (10, "dataset scale vs distribution", Some(1200.0), Box::new(c10_scale)),
    ];
    let names: BTreeMap<usize, &str> = criteria.iter().map(|c| (c.0, c.1)).collect();
    for (id, name, budget, check) in criteria {
        if !wanted(id) {
            continue;
        }
        // criterion 4 is timed given checkpoints
        if id == 4 {
            models.conditional(true);
        }
        let start = Instant::now();
        let (mut pass, mut detail) = check(&mut models);
        let secs = start.elapsed().as_secs_f64();
        if let Some(limit) = budget {
            if secs > limit {
                pass = false;
                detail.push_str(&format!("; over the {limit:.0} s budget"));
            }
        }
        let line = Verdict { id, name, pass, detail, secs };
        println!(
            "{} [{:>2}] {}: {} ({:.1} s)",
            if line.pass { "PASS" } else { "FAIL" },
            line.id,
            line.name,
            line.detail,
            line.secs
        );
        verdicts.push(line);
    }
    verdicts.sort_by_key(|v| v.id);
    let passed = verdicts.iter().filter(|v| v.pass).count();
    let failed: Vec<String> = verdicts.iter().filter(|v| !v.pass).map(|v| format!("{} ({})", v.id, names[&v.id])).collect();
    println!("{passed}/{} criteria passed", verdicts.len());
    if !failed.is_empty() {
        println!("failing: {}", failed.join(", "));
        if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
