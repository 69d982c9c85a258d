//! Single runs and one-axis sweeps over the synthetic setup.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{drift_metric, imba_probe, score_shift, success_rate, MetricsReport};
use super::mixture::{sample_mixture, MixtureSpec};
use crate::balancing::{train, LossKind, TrainConfig, TrainLog, WeightMode};
use crate::diffusion::{ddpm_sample, flow_sample, GuidanceConfig, NoiseSchedule, Process};
use crate::nn::{ModelLayout, ModelParams};
use crate::{Error, Result, Scalar};

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec::two_class(5000, 5000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Rectified flow with velocity prediction.
    Flow,
    /// DDPM with noise prediction.
    Epsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConfig {
    pub objective: ObjectiveKind,
    pub ddpm_steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveKind::Flow,
            ddpm_steps: 1000,
            beta_min: 1e-4,
            beta_max: 0.02,
        }
    }
}

impl ProcessConfig {
    pub fn build<F: Scalar>(&self) -> Result<Process<F>> {
        Ok(match self.objective {
            ObjectiveKind::Flow => Process::Flow,
            ObjectiveKind::Epsilon => {
                Process::Ddpm(NoiseSchedule::linear(self.ddpm_steps, self.beta_min, self.beta_max)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub samples_per_class: usize,
    /// Euler steps for flow sampling; DDPM always walks the full schedule.
    pub flow_steps: usize,
    pub guidance: f64,
    pub probe_draws: usize,
    /// Normalized time at which the unconditional field is inspected.
    pub field_time: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples_per_class: 1000,
            flow_steps: 100,
            guidance: 1.0,
            probe_draws: 1000,
            field_time: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mixture: MixtureSpec,
    pub model: ModelLayout,
    pub process: ProcessConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    /// Dataset seed; `None` reuses the run seed.
    pub data_seed: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mixture: MixtureSpec::default(),
            model: ModelLayout::default(),
            process: ProcessConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            data_seed: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.mixture.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.process.build::<f64>()?;
        GuidanceConfig::new(self.eval.guidance)?;
        if self.model.num_classes != self.mixture.num_classes() {
            return Err(Error::config(format!(
                "model has {} classes but the mixture has {}",
                self.model.num_classes,
                self.mixture.num_classes()
            )));
        }
        if self.mixture.counts.iter().any(|&c| c == 0) {
            return Err(Error::config("every mixture component needs a positive count"));
        }
        if self.eval.samples_per_class == 0 || self.eval.flow_steps == 0 || self.eval.probe_draws == 0 {
            return Err(Error::config("evaluation counts must be >= 1"));
        }
        if !(self.eval.field_time > 0.0 && self.eval.field_time <= 1.0) {
            return Err(Error::config(format!(
                "field_time must lie in (0, 1], got {}",
                self.eval.field_time
            )));
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for `tag` under `base`.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    splitmix(base ^ splitmix(tag))
}

const TAG_SAMPLE: u64 = 1 << 32;
const TAG_PROBE: u64 = 2 << 32;

/// Class-conditional samples from a trained model.
pub fn generate<F: Scalar>(
    params: &ModelParams<F>,
    process: &Process<F>,
    eval: &EvalConfig,
    class: usize,
    seed: u64,
) -> Result<Array2<F>> {
    let guidance = GuidanceConfig::new(eval.guidance)?;
    let (x, _) = match process {
        Process::Ddpm(s) => ddpm_sample(params, s, Some(class), eval.samples_per_class, guidance, seed)?,
        Process::Flow => flow_sample(params, eval.flow_steps, Some(class), guidance, eval.samples_per_class, seed)?,
    };
    Ok(x)
}

/// Samples every class, then measures drift, success, field tilt and probe.
pub fn evaluate<F: Scalar>(params: &ModelParams<F>, cfg: &ExperimentConfig, seed: u64) -> Result<MetricsReport> {
    let spec = &cfg.mixture;
    let process = cfg.process.build::<F>()?;
    let mut drift = Vec::with_capacity(spec.num_classes());
    let mut success = Vec::with_capacity(spec.num_classes());
    for k in 0..spec.num_classes() {
        let x = generate(params, &process, &cfg.eval, k, derive_seed(seed, TAG_SAMPLE + k as u64))?;
        drift.push(drift_metric(x.view(), spec, k)?);
        success.push(success_rate(x.view(), &vec![k; x.nrows()], spec)?);
    }
    let (shift, norm) = score_shift(params, spec, &process, cfg.eval.field_time)?;
    let probe = imba_probe(
        params,
        spec,
        &process,
        cfg.train.loss.gamma,
        cfg.train.loss.residual_floor,
        cfg.eval.probe_draws,
        derive_seed(seed, TAG_PROBE),
    )?;
    let report = MetricsReport {
        drift,
        success,
        score_shift: shift,
        score_norm: norm,
        probe,
    };
    if !report.is_finite() {
        return Err(Error::numeric("evaluation produced non-finite metrics"));
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct RunOutcome<F> {
    pub params: ModelParams<F>,
    pub log: TrainLog<F>,
    pub report: MetricsReport,
}

/// Samples the dataset, trains a fresh model and evaluates it.
pub fn run_single<F: Scalar>(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome<F>> {
    cfg.validate()?;
    let data = sample_mixture::<F>(&cfg.mixture, cfg.data_seed.unwrap_or(seed))?;
    let process = cfg.process.build::<F>()?;
    let mut params = ModelParams::init(cfg.model, seed)?;
    let train_cfg = TrainConfig { seed, ..cfg.train };
    let log = train(&mut params, &data, &process, &train_cfg).map_err(|e| e.source)?;
    let report = evaluate(&params, cfg, seed)?;
    Ok(RunOutcome { params, log, report })
}

/// The one quantity a sweep varies.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Width(Vec<usize>),
    /// Total point count, class proportions held fixed.
    Total(Vec<u64>),
    /// `(head, tail)` ratio for a two-class mixture, total held fixed.
    Ratio(Vec<(u64, u64)>),
    Loss(Vec<LossKind>),
    Gamma(Vec<f64>),
    Lambda(Vec<f64>),
    WeightMode(Vec<WeightMode>),
}

fn parse_all<T>(values: &[impl AsRef<str>], f: impl Fn(&str) -> Option<T>, what: &str) -> Result<Vec<T>> {
    if values.is_empty() {
        return Err(Error::config(format!("{what} axis needs at least one value")));
    }
    values
        .iter()
        .map(|v| {
            let v = v.as_ref().trim();
            f(v).ok_or_else(|| Error::config(format!("bad {what} value '{v}'")))
        })
        .collect()
}

fn parse_ratio(v: &str) -> Option<(u64, u64)> {
    let (h, t) = v.split_once(':').unwrap_or((v, "1"));
    let (h, t) = (h.trim().parse().ok()?, t.trim().parse().ok()?);
    (h > 0 && t > 0).then_some((h, t))
}

impl SweepAxis {
    pub const NAMES: [&'static str; 7] = ["width", "total", "ratio", "loss", "gamma", "lambda", "weight_mode"];

    pub fn parse(name: &str, values: &[impl AsRef<str>]) -> Result<Self> {
        Ok(match name {
            "width" => SweepAxis::Width(parse_all(values, |v| v.parse().ok().filter(|&w| w > 0), name)?),
            "total" => SweepAxis::Total(parse_all(values, |v| v.parse().ok().filter(|&n| n > 0), name)?),
            "ratio" => SweepAxis::Ratio(parse_all(values, parse_ratio, name)?),
            "loss" => SweepAxis::Loss(parse_all(values, |v| v.parse().ok(), name)?),
            "gamma" => SweepAxis::Gamma(parse_all(values, |v| v.parse().ok().filter(|g: &f64| *g >= 0.0), name)?),
            "lambda" => SweepAxis::Lambda(parse_all(
                values,
                |v| v.parse().ok().filter(|l: &f64| (0.0..=1.0).contains(l)),
                name,
            )?),
            "weight_mode" => SweepAxis::WeightMode(parse_all(values, |v| v.parse().ok(), name)?),
            other => {
                return Err(Error::config(format!(
                    "unknown sweep axis '{other}' (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Width(_) => "width",
            SweepAxis::Total(_) => "total",
            SweepAxis::Ratio(_) => "ratio",
            SweepAxis::Loss(_) => "loss",
            SweepAxis::Gamma(_) => "gamma",
            SweepAxis::Lambda(_) => "lambda",
            SweepAxis::WeightMode(_) => "weight_mode",
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            SweepAxis::Width(v) => v.iter().map(|x| x.to_string()).collect(),
            SweepAxis::Total(v) => v.iter().map(|x| x.to_string()).collect(),
            SweepAxis::Ratio(v) => v.iter().map(|(h, t)| format!("{h}:{t}")).collect(),
            SweepAxis::Loss(v) => v.iter().map(|x| x.to_string()).collect(),
            SweepAxis::Gamma(v) | SweepAxis::Lambda(v) => v.iter().map(|x| x.to_string()).collect(),
            SweepAxis::WeightMode(v) => v.iter().map(|x| x.to_string()).collect(),
        }
    }

    /// `base` with the `i`-th axis value substituted.
    pub fn apply(&self, i: usize, base: &ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let needs_imba = |cfg: &ExperimentConfig| {
            if cfg.train.loss.kind != LossKind::Imba {
                return Err(Error::config(format!(
                    "the {} axis only affects the imba loss, base loss is {}",
                    self.name(),
                    cfg.train.loss.kind
                )));
            }
            Ok(())
        };
        match self {
            SweepAxis::Width(v) => cfg.model.hidden_width = v[i],
            SweepAxis::Total(v) => cfg.mixture.counts = scale_counts(&base.mixture, v[i])?,
            SweepAxis::Ratio(v) => {
                if base.mixture.num_classes() != 2 {
                    return Err(Error::config("the ratio axis needs a two-class mixture"));
                }
                let (h, t) = v[i];
                let total = base.mixture.total();
                let head = (total as f64 * h as f64 / (h + t) as f64).round() as u64;
                cfg.mixture.counts = vec![head, total - head];
            }
            SweepAxis::Loss(v) => cfg.train.loss.kind = v[i],
            SweepAxis::Gamma(v) => {
                needs_imba(&cfg)?;
                cfg.train.loss.gamma = v[i];
            }
            SweepAxis::Lambda(v) => {
                needs_imba(&cfg)?;
                cfg.train.loss.lambda = v[i];
            }
            SweepAxis::WeightMode(v) => {
                needs_imba(&cfg)?;
                cfg.train.loss.weight_mode = v[i];
            }
        }
        Ok(cfg)
    }

    pub fn len(&self) -> usize {
        self.labels().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Counts summing to `total` in the proportions of `spec`, largest
/// remainders first.
pub fn scale_counts(spec: &MixtureSpec, total: u64) -> Result<Vec<u64>> {
    let props = spec.proportions();
    let raw: Vec<f64> = props.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<u64> = raw.iter().map(|r| r.floor() as u64).collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (raw[a] - raw[a].floor(), raw[b] - raw[b].floor());
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    let short = total - counts.iter().sum::<u64>();
    for &k in order.iter().take(short as usize) {
        counts[k] += 1;
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::config(format!("total {total} leaves an empty class")));
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub seeds: Vec<u64>,
}

/// One (axis value, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub axis_value: String,
    pub seed: u64,
    pub tail_drift: f64,
    pub head_drift: f64,
    /// Success rate of the tail class.
    pub success_rate: f64,
    pub head_success: f64,
    pub d_head: f64,
    pub d_tail: f64,
}

impl ResultRow {
    fn from_report(axis_value: String, seed: u64, spec: &MixtureSpec, r: &MetricsReport) -> Self {
        let (h, t) = (spec.head_class(), spec.tail_class());
        Self {
            axis_value,
            seed,
            tail_drift: r.drift[t],
            head_drift: r.drift[h],
            success_rate: r.success[t],
            head_success: r.success[h],
            d_head: r.probe[h],
            d_tail: r.probe[t],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub axis_value: String,
    pub runs: usize,
    pub tail_drift: f64,
    pub head_drift: f64,
    pub success_rate: f64,
    pub d_head: f64,
    pub d_tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub axis: String,
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    /// Seed-averaged rows in axis order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out: Vec<SummaryRow> = Vec::new();
        for r in &self.rows {
            let pos = match out.iter().position(|s| s.axis_value == r.axis_value) {
                Some(p) => p,
                None => {
                    out.push(SummaryRow {
                        axis_value: r.axis_value.clone(),
                        runs: 0,
                        tail_drift: 0.0,
                        head_drift: 0.0,
                        success_rate: 0.0,
                        d_head: 0.0,
                        d_tail: 0.0,
                    });
                    out.len() - 1
                }
            };
            let s = &mut out[pos];
            s.runs += 1;
            s.tail_drift += r.tail_drift;
            s.head_drift += r.head_drift;
            s.success_rate += r.success_rate;
            s.d_head += r.d_head;
            s.d_tail += r.d_tail;
        }
        for s in &mut out {
            let n = s.runs as f64;
            s.tail_drift /= n;
            s.head_drift /= n;
            s.success_rate /= n;
            s.d_head /= n;
            s.d_tail /= n;
        }
        out
    }
}

/// Every (axis value, seed) pair, run in parallel, rows in axis-major order.
pub fn run_experiment<F: Scalar>(base: &ExperimentConfig, sweep: &SweepSpec) -> Result<ResultsTable> {
    if sweep.seeds.is_empty() {
        return Err(Error::config("sweep needs at least one seed"));
    }
    let labels = sweep.axis.labels();
    let mut jobs = Vec::with_capacity(labels.len() * sweep.seeds.len());
    for (i, label) in labels.iter().enumerate() {
        let cfg = sweep.axis.apply(i, base)?;
        cfg.validate()?;
        for &seed in &sweep.seeds {
            jobs.push((label.clone(), cfg.clone(), seed));
        }
    }
    let rows = jobs
        .into_par_iter()
        .map(|(label, cfg, seed)| {
            let out = run_single::<F>(&cfg, seed)?;
            Ok(ResultRow::from_report(label, seed, &cfg.mixture, &out.report))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultsTable {
        axis: sweep.axis.name().to_string(),
        rows,
    })
}
