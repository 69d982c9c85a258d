use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{LossConfig, LossKind};
use super::stats::ConceptStats;
use super::step::loss_step;
use crate::diffusion::Process;
use crate::nn::{ModelParams, Optimizer, OptimizerKind};
use crate::synth::LabeledDataset;
use crate::{Error, Result, Scalar};

/// Learning rate as a function of the 1-based step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `lr * (1 + cos(pi * (step - 1) / steps)) / 2`.
    Cosine,
}

impl LrSchedule {
    pub fn at(self, base: f64, step: usize, steps: usize) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine => {
                let frac = (step - 1) as f64 / steps as f64;
                base * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_schedule: LrSchedule,
    /// Minibatch and noise stream; set per run, never read from config files.
    #[serde(skip)]
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            steps: 20_000,
            batch_size: 128,
            lr: 1e-3,
            lr_schedule: LrSchedule::Constant,
            seed: 0,
            optimizer: OptimizerKind::adam(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.steps == 0 {
            return Err(Error::config("training needs at least one step"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow<F> {
    /// 1-based step index.
    pub step: usize,
    pub l_star: F,
    pub l_u: F,
    pub loss: F,
    pub mean_weight: Vec<Option<F>>,
    pub grad_norm: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog<F> {
    pub kind: LossKind,
    pub rows: Vec<LogRow<F>>,
}

/// Training stopped early. `log` holds every completed step; the parameters
/// passed to [`train`] hold the state after the last completed step.
#[derive(Debug)]
pub struct TrainError<F> {
    pub log: TrainLog<F>,
    pub source: Error,
}

impl<F> std::fmt::Display for TrainError<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training aborted after {} steps: {}", self.log.rows.len(), self.source)
    }
}

impl<F: std::fmt::Debug> std::error::Error for TrainError<F> {}

/// Trains `params` in place on minibatches drawn with replacement.
///
/// Baseline and frequency-weighted losses replace each condition with null
/// with probability `cond_drop_prob`; the IMBA loss always conditions on the
/// true class and trains the null condition through its own term.
pub fn train<F: Scalar>(
    params: &mut ModelParams<F>,
    data: &LabeledDataset<F>,
    process: &Process<F>,
    cfg: &TrainConfig,
) -> std::result::Result<TrainLog<F>, TrainError<F>> {
    let mut log = TrainLog {
        kind: cfg.loss.kind,
        rows: Vec::with_capacity(cfg.steps),
    };
    let classes = params.layout().num_classes;
    let null = params.layout().null_class();
    let setup = cfg.validate().and_then(|_| {
        if data.is_empty() {
            return Err(Error::input("training set is empty"));
        }
        let stats = ConceptStats::from_labels(&data.labels, classes)?;
        let optimizer = Optimizer::new(cfg.optimizer, cfg.lr)?;
        Ok((stats, optimizer))
    });
    let (stats, mut optimizer) = match setup {
        Ok(s) => s,
        Err(source) => return Err(TrainError { log, source }),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dims = data.points.ncols();

    for step in 1..=cfg.steps {
        let mut x0 = Array2::zeros((cfg.batch_size, dims));
        let mut labels = Vec::with_capacity(cfg.batch_size);
        for mut row in x0.rows_mut() {
            let i = rng.gen_range(0..data.len());
            row.assign(&data.points.row(i));
            labels.push(data.labels[i]);
        }
        let cond: Vec<usize> = match cfg.loss.kind {
            LossKind::Imba => labels.clone(),
            LossKind::Baseline | LossKind::FreqWeighted => labels
                .iter()
                .map(|&l| if rng.gen::<f64>() < cfg.loss.cond_drop_prob { null } else { l })
                .collect(),
        };
        let outcome = process
            .noisy_batch(x0, cond, &mut rng)
            .and_then(|batch| loss_step(params, &batch, &labels, &cfg.loss, &stats))
            .and_then(|(report, grads)| {
                let grad_norm = grads.norm();
                optimizer.set_lr(cfg.lr_schedule.at(cfg.lr, step, cfg.steps))?;
                let last_good = params.clone();
                optimizer.step(params, &grads)?;
                if let Err(e) = params.check_finite() {
                    *params = last_good;
                    return Err(e);
                }
                Ok((report, grad_norm))
            });
        match outcome {
            Ok((report, grad_norm)) => log.rows.push(LogRow {
                step,
                l_star: report.l_star,
                l_u: report.l_u,
                loss: report.loss,
                mean_weight: report.mean_weight,
                grad_norm,
            }),
            Err(source) => return Err(TrainError { log, source }),
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelLayout;
    use crate::synth::{sample_mixture, MixtureSpec};

    fn small() -> (ModelParams<f64>, LabeledDataset<f64>) {
        let layout = ModelLayout {
            hidden_width: 16,
            ..ModelLayout::default()
        };
        let data = sample_mixture(&MixtureSpec::two_class(200, 20), 1).unwrap();
        (ModelParams::init(layout, 0).unwrap(), data)
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let s = LrSchedule::Cosine;
        assert_eq!(s.at(1e-3, 1, 100), 1e-3);
        assert!((s.at(1e-3, 51, 100) - 0.5e-3).abs() < 1e-15);
        assert!(s.at(1e-3, 100, 100) > 0.0);
        assert!(s.at(1e-3, 100, 100) < 1e-6);
        assert_eq!(LrSchedule::Constant.at(2.0, 7, 10), 2.0);
    }

    #[test]
    fn zero_steps_rejected() {
        let (mut p, data) = small();
        let cfg = TrainConfig { steps: 0, ..TrainConfig::default() };
        let err = train(&mut p, &data, &Process::Flow, &cfg).unwrap_err();
        assert!(matches!(err.source, Error::Config(_)));
    }

    #[test]
    fn same_seed_same_log_and_params() {
        for kind in [LossKind::Baseline, LossKind::Imba, LossKind::FreqWeighted] {
            let cfg = TrainConfig {
                steps: 30,
                batch_size: 32,
                loss: LossConfig { kind, ..LossConfig::default() },
                ..TrainConfig::default()
            };
            let (mut a, data) = small();
            let (mut b, _) = small();
            let la = train(&mut a, &data, &Process::Flow, &cfg).unwrap();
            let lb = train(&mut b, &data, &Process::Flow, &cfg).unwrap();
            assert_eq!(la, lb);
            assert_eq!(a, b);
            assert_eq!(la.rows.len(), 30);
        }
    }

    #[test]
    fn baseline_log_weights_are_one() {
        let (mut p, data) = small();
        let cfg = TrainConfig {
            steps: 10,
            batch_size: 16,
            loss: LossConfig::baseline(),
            ..TrainConfig::default()
        };
        let log = train(&mut p, &data, &Process::Flow, &cfg).unwrap();
        assert!(log
            .rows
            .iter()
            .all(|r| r.mean_weight.iter().all(|w| *w == Some(1.0))));
    }

    #[test]
    fn loss_decreases_on_easy_problem() {
        let (mut p, data) = small();
        let cfg = TrainConfig {
            steps: 400,
            batch_size: 64,
            loss: LossConfig::baseline(),
            ..TrainConfig::default()
        };
        let log = train(&mut p, &data, &Process::Flow, &cfg).unwrap();
        let head: f64 = log.rows[..50].iter().map(|r| r.loss).sum::<f64>() / 50.0;
        let tail: f64 = log.rows[350..].iter().map(|r| r.loss).sum::<f64>() / 50.0;
        assert!(tail < head, "{head} -> {tail}");
    }

    #[test]
    fn divergence_keeps_last_good_state() {
        let (mut p, data) = small();
        let cfg = TrainConfig {
            steps: 200,
            batch_size: 16,
            lr: 1e6,
            optimizer: OptimizerKind::Sgd,
            loss: LossConfig::baseline(),
            ..TrainConfig::default()
        };
        let err = train(&mut p, &data, &Process::Flow, &cfg).unwrap_err();
        assert!(matches!(err.source, Error::Numeric(_)));
        assert!(err.log.rows.len() < 200);
        p.check_finite().unwrap();
    }
}
