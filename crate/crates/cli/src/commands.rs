//! One function per subcommand. Each validates before touching the filesystem
//! and returns the paths it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use imbalab_bench::{build_benchmark, BuildParams, ConceptVocabulary, Corpus, TemplateSet};
use imbalab_core::balancing::{train, TrainConfig, TrainLog};
use imbalab_core::diffusion::{ddpm_sample, flow_sample, score_field, GuidanceConfig, Process, TrajectoryRecord};
use imbalab_core::nn::{checkpoint, ModelParams};
use imbalab_core::synth::{
    evaluate, imba_probe, EvalConfig, run_experiment, sample_mixture, LabeledDataset, MixtureOracle, MixtureSpec, ResultsTable,
    SweepAxis, SweepSpec,
};
use imbalab_core::Scalar;
use ndarray::Array2;

use crate::config::{FieldSource, FigureKind, RunConfig};
use crate::error::{CliError, Result};
use crate::svg::{Layer, Plot};
use crate::table::{write_bytes, write_csv, Table};

fn s<F: Scalar>(v: F) -> String {
    v.to_string()
}

fn data_rows<F: Scalar>(data: &LabeledDataset<F>) -> Vec<Vec<String>> {
    data.points
        .rows()
        .into_iter()
        .zip(&data.labels)
        .map(|(p, l)| vec![s(p[0]), s(p[1]), l.to_string()])
        .collect()
}

fn write_data<F: Scalar>(path: &Path, data: &LabeledDataset<F>) -> Result<()> {
    write_csv(path, &[], &["x", "y", "label"], data_rows(data))
}

pub fn gen_data<F: Scalar>(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = sample_mixture::<F>(&cfg.mixture, cfg.data_seed.unwrap_or(cfg.seed))?;
    let path = out.join("data.csv");
    write_data(&path, &data)?;
    Ok(vec![path])
}

fn log_comments(cfg: &RunConfig) -> Vec<String> {
    let l = &cfg.train.loss;
    vec![
        "imbalab training log".into(),
        format!("kind = {}", l.kind),
        format!("gamma = {}", l.gamma),
        format!("lambda = {}", l.lambda),
        format!("cond_drop_prob = {}", l.cond_drop_prob),
        format!("weight_mode = {}", l.weight_mode),
        format!("residual_floor = {:e}", l.residual_floor),
        format!("objective = {}", toml::Value::try_from(cfg.process.objective).expect("enum serializes")),
        format!("steps = {}", cfg.train.steps),
        format!("batch_size = {}", cfg.train.batch_size),
        format!("lr = {}", cfg.train.lr),
        format!("seed = {}", cfg.seed),
        format!("counts = {:?}", cfg.mixture.counts),
    ]
}

fn write_log<F: Scalar>(path: &Path, cfg: &RunConfig, log: &TrainLog<F>) -> Result<()> {
    let classes = cfg.model.num_classes;
    let weight_cols: Vec<String> = (0..classes).map(|k| format!("mean_weight_class{k}")).collect();
    let mut header = vec!["step", "kind", "L_star", "L_u", "L"];
    header.extend(weight_cols.iter().map(String::as_str));
    header.push("grad_norm");
    let kind = log.kind.to_string();
    let rows = log.rows.iter().map(|r| {
        let mut row = vec![r.step.to_string(), kind.clone(), s(r.l_star), s(r.l_u), s(r.loss)];
        row.extend(r.mean_weight.iter().map(|w| w.map(s).unwrap_or_default()));
        row.push(s(r.grad_norm));
        row
    });
    write_csv(path, &log_comments(cfg), &header, rows)
}

fn write_checkpoint<F: Scalar>(path: &Path, params: &ModelParams<F>) -> Result<()> {
    write_bytes(path, &checkpoint::encode(params))
}

pub fn train_cmd<F: Scalar>(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let process = cfg.process.build::<F>()?;
    let data = sample_mixture::<F>(&cfg.mixture, cfg.data_seed.unwrap_or(cfg.seed))?;
    let mut params = ModelParams::<F>::init(cfg.model, cfg.seed)?;
    let train_cfg = TrainConfig { seed: cfg.seed, ..cfg.train };
    let ckpt = out.join("model.ckpt");
    let log_path = out.join("train_log.csv");
    match train(&mut params, &data, &process, &train_cfg) {
        Ok(log) => {
            write_checkpoint(&ckpt, &params)?;
            write_log(&log_path, cfg, &log)?;
            Ok(vec![ckpt, log_path])
        }
        Err(e) => {
            write_checkpoint(&ckpt, &params)?;
            write_log(&log_path, cfg, &e.log)?;
            Err(CliError::from(e.source).context(format!(
                "training stopped after {} steps; last good state kept in {}",
                e.log.rows.len(),
                ckpt.display()
            )))
        }
    }
}

fn load_params<F: Scalar>(cfg: &RunConfig, out: &Path) -> Result<ModelParams<F>> {
    let path = cfg.checkpoint.clone().unwrap_or_else(|| out.join("model.ckpt"));
    let bytes = fs::read(&path).map_err(|e| CliError::io_at(&path, e))?;
    let params = checkpoint::decode::<F>(&bytes).map_err(|e| CliError::from(e).context(path.display()))?;
    if params.layout().num_classes != cfg.mixture.num_classes() {
        return Err(CliError::config(format!(
            "{} was trained for {} classes but the mixture has {}",
            path.display(),
            params.layout().num_classes,
            cfg.mixture.num_classes()
        )));
    }
    Ok(params)
}

fn run_sampler<F: Scalar>(
    params: &ModelParams<F>,
    process: &Process<F>,
    eval: &EvalConfig,
    cond: Option<usize>,
    n: usize,
    seed: u64,
) -> Result<(Array2<F>, TrajectoryRecord<F>)> {
    let guidance = GuidanceConfig::new(eval.guidance)?;
    Ok(match process {
        Process::Ddpm(sched) => ddpm_sample(params, sched, cond, n, guidance, seed)?,
        Process::Flow => flow_sample(params, eval.flow_steps, cond, guidance, n, seed)?,
    })
}

fn kept_steps(num_steps: usize, stride: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = (0..=num_steps).step_by(stride).collect();
    if steps.last() != Some(&num_steps) {
        steps.push(num_steps);
    }
    steps
}

fn trajectory_rows<F: Scalar>(traj: &TrajectoryRecord<F>, samples: usize, stride: usize) -> Vec<Vec<String>> {
    let steps = kept_steps(traj.num_steps(), stride);
    let mut rows = Vec::new();
    for i in 0..samples.min(traj.num_samples()) {
        for &k in &steps {
            let st = &traj.states[k];
            rows.push(vec![i.to_string(), k.to_string(), s(st[[i, 0]]), s(st[[i, 1]])]);
        }
    }
    rows
}

pub fn sample_cmd<F: Scalar>(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate_sample()?;
    let params = load_params::<F>(cfg, out)?;
    let process = cfg.process.build::<F>()?;
    let cond = (!cfg.sample.unconditional).then_some(cfg.sample.class);
    let (x, traj) = run_sampler(&params, &process, &cfg.eval, cond, cfg.sample.n, cfg.seed)?;
    let label = cond.map(|c| c.to_string()).unwrap_or_default();
    let rows = x
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, p)| vec![i.to_string(), s(p[0]), s(p[1]), label.clone()]);
    let samples = out.join("samples.csv");
    write_csv(&samples, &[], &["sample_id", "x", "y", "label"], rows)?;
    let trajectory = out.join("trajectory.csv");
    write_csv(
        &trajectory,
        &[],
        &["sample_id", "step", "x", "y"],
        trajectory_rows(&traj, cfg.sample.n, cfg.sample.trajectory_stride),
    )?;
    Ok(vec![samples, trajectory])
}

pub fn probe_cmd<F: Scalar>(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let params = load_params::<F>(cfg, out)?;
    let process = cfg.process.build::<F>()?;
    let loss = &cfg.train.loss;
    let d = imba_probe(
        &params,
        &cfg.mixture,
        &process,
        loss.gamma,
        loss.residual_floor,
        cfg.eval.probe_draws,
        cfg.seed,
    )?;
    let rows = d
        .iter()
        .enumerate()
        .map(|(k, v)| vec![k.to_string(), cfg.mixture.counts[k].to_string(), v.to_string()]);
    let path = out.join("probe.csv");
    let comments = vec![format!("gamma = {}", loss.gamma), format!("draws = {}", cfg.eval.probe_draws)];
    write_csv(&path, &comments, &["class", "count", "D"], rows)?;
    Ok(vec![path])
}

/// Denoising direction (negated prediction) at every lattice point and time.
pub fn field_rows<F: Scalar>(
    cfg: &RunConfig,
    params: Option<&ModelParams<F>>,
    process: &Process<F>,
    spec: &MixtureSpec,
) -> Result<Vec<[f64; 5]>> {
    let f = &cfg.field;
    let cond = (!f.unconditional).then_some(f.class);
    let mut rows = Vec::new();
    for &tau in &f.times {
        match params {
            Some(p) => {
                for v in score_field(p, &f.lattice, F::of(tau), cond)? {
                    rows.push([v.x.f64(), v.y.f64(), -v.vx.f64(), -v.vy.f64(), tau]);
                }
            }
            None => {
                let (a, b) = process.signal_noise(tau)?;
                let oracle = match cond {
                    Some(k) => MixtureOracle::for_class(spec, k, a, b)?,
                    None => MixtureOracle::new(spec, a, b)?,
                };
                for pt in f.lattice.points() {
                    let v = match process {
                        Process::Flow => oracle.velocity(pt),
                        Process::Ddpm(_) => oracle.eps_star(pt),
                    };
                    rows.push([pt[0], pt[1], -v[0], -v[1], tau]);
                }
            }
        }
    }
    Ok(rows)
}

pub fn score_field_cmd<F: Scalar>(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate_field()?;
    let process = cfg.process.build::<F>()?;
    let params = match cfg.field.source {
        FieldSource::Model => Some(load_params::<F>(cfg, out)?),
        FieldSource::Oracle => None,
    };
    let rows = field_rows(cfg, params.as_ref(), &process, &cfg.mixture)?;
    let path = out.join("field.csv");
    write_csv(
        &path,
        &[],
        &["x", "y", "vx", "vy", "t"],
        rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()),
    )?;
    Ok(vec![path])
}

pub const RESULTS_HEADER: [&str; 7] = ["axis_value", "seed", "tail_drift", "head_drift", "success_rate", "D_head", "D_tail"];

fn trend_checks(axis: &SweepAxis, table: &ResultsTable) -> Vec<String> {
    let sum = table.summary();
    let find = |name: &str| sum.iter().find(|r| r.axis_value == name);
    let held = |b: bool| if b { "held" } else { "not held" };
    let mut out = Vec::new();
    match axis {
        SweepAxis::Ratio(_) => {
            let ok = sum.windows(2).all(|w| w[1].tail_drift >= w[0].tail_drift);
            out.push(format!("check: tail drift nondecreasing along the listed ratios = {}", held(ok)));
        }
        SweepAxis::Loss(_) => {
            if let Some(base) = find("baseline") {
                for other in sum.iter().filter(|r| r.axis_value != "baseline") {
                    out.push(format!(
                        "check: {} tail success >= baseline = {}",
                        other.axis_value,
                        held(other.success_rate >= base.success_rate)
                    ));
                }
            }
        }
        SweepAxis::WeightMode(_) => {
            if let (Some(ss), Some(cm)) = (find("sample_scalar"), find("channel_mean")) {
                out.push(format!(
                    "check: channel_mean tail success >= sample_scalar = {}",
                    held(cm.success_rate >= ss.success_rate)
                ));
            }
        }
        SweepAxis::Total(_) => {
            let lo = sum.iter().map(|r| r.success_rate).fold(f64::INFINITY, f64::min);
            let hi = sum.iter().map(|r| r.success_rate).fold(f64::NEG_INFINITY, f64::max);
            out.push(format!("check: tail success spread across totals < 0.10 = {}", held(hi - lo < 0.10)));
        }
        _ => {}
    }
    out
}

pub fn experiment_cmd<F: Scalar>(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let axis = cfg.validate_experiment()?;
    let sweep = SweepSpec {
        axis: axis.clone(),
        seeds: cfg.seeds.clone(),
    };
    let table = run_experiment::<F>(&cfg.experiment(), &sweep)?;
    let results = out.join("results.csv");
    write_csv(
        &results,
        &[],
        &RESULTS_HEADER,
        table.rows.iter().map(|r| {
            vec![
                r.axis_value.clone(),
                r.seed.to_string(),
                r.tail_drift.to_string(),
                r.head_drift.to_string(),
                r.success_rate.to_string(),
                r.d_head.to_string(),
                r.d_tail.to_string(),
            ]
        }),
    )?;
    let summary = out.join("summary.csv");
    let mut comments = vec![format!("axis = {}", table.axis), format!("seeds = {:?}", cfg.seeds)];
    comments.extend(trend_checks(&axis, &table));
    write_csv(
        &summary,
        &comments,
        &["axis_value", "runs", "tail_drift", "head_drift", "success_rate", "D_head", "D_tail", "tail_probe_larger"],
        table.summary().iter().map(|r| {
            vec![
                r.axis_value.clone(),
                r.runs.to_string(),
                r.tail_drift.to_string(),
                r.head_drift.to_string(),
                r.success_rate.to_string(),
                r.d_head.to_string(),
                r.d_tail.to_string(),
                (r.d_tail > r.d_head).to_string(),
            ]
        }),
    )?;
    Ok(vec![results, summary])
}

fn scatter_layer(table: &Table, source: &Path, radius: f64, opacity: f64) -> Result<Layer> {
    let mut pts = Vec::with_capacity(table.rows.len());
    if !table.headers.is_empty() {
        let x = table.require("x", source)?;
        let y = table.require("y", source)?;
        let label = table.column("label");
        for i in 0..table.rows.len() {
            let class = label.and_then(|c| table.rows[i][c].parse::<usize>().ok());
            pts.push((table.f64_at(i, x)?, table.f64_at(i, y)?, class));
        }
    }
    Ok(Layer::Points { pts, radius, opacity })
}

fn quiver_layer(table: &Table, source: &Path, scale: f64) -> Result<Layer> {
    let mut rows = Vec::with_capacity(table.rows.len());
    if !table.headers.is_empty() {
        let cols = ["x", "y", "vx", "vy"]
            .iter()
            .map(|c| table.require(c, source))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..table.rows.len() {
            rows.push([
                table.f64_at(i, cols[0])?,
                table.f64_at(i, cols[1])?,
                table.f64_at(i, cols[2])?,
                table.f64_at(i, cols[3])?,
            ]);
        }
    }
    Ok(Layer::Arrows { rows, scale })
}

fn trajectory_layer(table: &Table, source: &Path) -> Result<Layer> {
    let mut paths: Vec<(String, Vec<(f64, f64, f64)>)> = Vec::new();
    if !table.headers.is_empty() {
        let id = table.require("sample_id", source)?;
        let step = table.require("step", source)?;
        let x = table.require("x", source)?;
        let y = table.require("y", source)?;
        for i in 0..table.rows.len() {
            let key = &table.rows[i][id];
            let pos = match paths.iter().position(|(k, _)| k == key) {
                Some(p) => p,
                None => {
                    paths.push((key.clone(), Vec::new()));
                    paths.len() - 1
                }
            };
            paths[pos].1.push((table.f64_at(i, step)?, table.f64_at(i, x)?, table.f64_at(i, y)?));
        }
    }
    let paths = paths
        .into_iter()
        .map(|(_, mut p)| {
            p.sort_by(|a, b| a.0.total_cmp(&b.0));
            p.into_iter().map(|(_, x, y)| (x, y)).collect()
        })
        .collect();
    Ok(Layer::Paths { paths })
}

fn bar_layer(table: &Table, source: &Path, category: &str, value: &str) -> Result<Layer> {
    let mut bars = Vec::new();
    if !table.headers.is_empty() {
        let c = table.require(category, source)?;
        let v = table.require(value, source)?;
        for i in 0..table.rows.len() {
            bars.push((table.rows[i][c].clone(), table.f64_at(i, v)?));
        }
    }
    Ok(Layer::Bars { bars })
}

pub fn figure_cmd(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let spec = &cfg.figure;
    spec.validate()?;
    let source = spec
        .source
        .as_deref()
        .ok_or_else(|| CliError::config("figure.source is required"))?;
    let table = Table::read(source)?;
    let mut layers = Vec::new();
    if let Some(bg) = &spec.background {
        layers.push(scatter_layer(&Table::read(bg)?, bg, 1.2, 0.25)?);
    }
    layers.push(match spec.kind {
        FigureKind::Scatter => scatter_layer(&table, source, 2.0, 0.8)?,
        FigureKind::Quiver => quiver_layer(&table, source, spec.arrow_scale)?,
        FigureKind::Trajectory => trajectory_layer(&table, source)?,
        FigureKind::Bar => bar_layer(&table, source, &spec.category_column, &spec.value_column)?,
    });
    let plot = Plot {
        width: spec.width,
        height: spec.height,
        title: spec.title.clone(),
        colors: spec.colors.clone(),
        layers,
    };
    let path = spec.output.clone().unwrap_or_else(|| out.join("figure.svg"));
    write_bytes(&path, plot.render().as_bytes())?;
    Ok(vec![path])
}

pub fn bench_build_cmd(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate_bench()?;
    let b = &cfg.bench;
    let open = |p: &Path| fs::File::open(p).map(std::io::BufReader::new).map_err(|e| CliError::io_at(p, e));
    let corpus_path = b.corpus.as_deref().expect("validated");
    let vocab_path = b.vocab.as_deref().expect("validated");
    let templates = match &b.templates {
        Some(p) => TemplateSet::read(open(p)?).map_err(|e| CliError::from(e).context(p.display()))?,
        None => TemplateSet::default(),
    };
    let corpus = Corpus::read(open(corpus_path)?).map_err(|e| CliError::from(e).context(corpus_path.display()))?;
    let vocab =
        ConceptVocabulary::read(open(vocab_path)?).map_err(|e| CliError::from(e).context(vocab_path.display()))?;
    let params = BuildParams {
        n: b.n,
        k: b.k,
        threshold: b.threshold,
    };
    let spec = build_benchmark(&corpus, &vocab, params, &templates)?;
    let path = out.join("benchmark.json");
    write_bytes(&path, spec.to_json().as_bytes())?;
    Ok(vec![path])
}

/// Conditional-sample and unconditional-field figures for each configured ratio.
pub fn report_cmd<F: Scalar>(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let ratios = cfg.validate_report()?;
    let dir = out.join("report");
    let mut written = Vec::new();
    let mut metric_rows = Vec::new();
    for (i, label) in ratios.labels().iter().enumerate() {
        let ecfg = ratios.apply(i, &cfg.experiment())?;
        let tag = label.replace(':', "-");
        let process = ecfg.process.build::<F>()?;
        let data = sample_mixture::<F>(&ecfg.mixture, ecfg.data_seed.unwrap_or(cfg.seed))?;
        let mut params = ModelParams::<F>::init(ecfg.model, cfg.seed)?;
        train(&mut params, &data, &process, &ecfg.train)
            .map_err(|e| CliError::from(e.source).context(format!("ratio {label}")))?;
        let data_path = dir.join(format!("ratio_{tag}_data.csv"));
        write_data(&data_path, &data)?;
        written.push(data_path);

        let background = Layer::Points {
            pts: data
                .points
                .rows()
                .into_iter()
                .zip(&data.labels)
                .map(|(p, &l)| (p[0].f64(), p[1].f64(), Some(l)))
                .collect(),
            radius: 1.0,
            opacity: 0.2,
        };
        let mut samples = Vec::new();
        let mut paths = Vec::new();
        let mut traj_rows = Vec::new();
        let n = cfg.report.trajectories;
        for k in 0..ecfg.mixture.num_classes() {
            let (x, traj) = run_sampler(&params, &process, &ecfg.eval, Some(k), n, cfg.seed.wrapping_add(k as u64))?;
            samples.extend(x.rows().into_iter().map(|p| (p[0].f64(), p[1].f64(), Some(k))));
            let steps = kept_steps(traj.num_steps(), (traj.num_steps() / 50).max(1));
            for j in 0..n {
                let path = traj.path(j);
                paths.push(steps.iter().map(|&s| (path[s][0].f64(), path[s][1].f64())).collect());
                for &s in &steps {
                    traj_rows.push(vec![
                        k.to_string(),
                        (k * n + j).to_string(),
                        s.to_string(),
                        path[s][0].to_string(),
                        path[s][1].to_string(),
                    ]);
                }
            }
        }
        let traj_path = dir.join(format!("ratio_{tag}_trajectory.csv"));
        write_csv(&traj_path, &[], &["label", "sample_id", "step", "x", "y"], traj_rows)?;
        written.push(traj_path);

        let cond = Plot {
            width: cfg.figure.width,
            height: cfg.figure.height,
            title: format!("conditional samples, ratio {label}"),
            colors: cfg.figure.colors.clone(),
            layers: vec![
                background.clone(),
                Layer::Paths { paths },
                Layer::Points { pts: samples, radius: 2.0, opacity: 0.9 },
            ],
        };
        let cond_path = dir.join(format!("ratio_{tag}_cond.svg"));
        write_bytes(&cond_path, cond.render().as_bytes())?;
        written.push(cond_path);

        let field_cfg = RunConfig {
            field: crate::config::FieldConfig {
                times: vec![ecfg.eval.field_time],
                unconditional: true,
                ..cfg.field.clone()
            },
            ..cfg.clone()
        };
        let rows = field_rows(&field_cfg, Some(&params), &process, &ecfg.mixture)?;
        let field_path = dir.join(format!("ratio_{tag}_field.csv"));
        write_csv(
            &field_path,
            &[],
            &["x", "y", "vx", "vy", "t"],
            rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()),
        )?;
        written.push(field_path);
        let uncond = Plot {
            width: cfg.figure.width,
            height: cfg.figure.height,
            title: format!("unconditional field, ratio {label}"),
            colors: cfg.figure.colors.clone(),
            layers: vec![
                background,
                Layer::Arrows {
                    rows: rows.iter().map(|r| [r[0], r[1], r[2], r[3]]).collect(),
                    scale: cfg.figure.arrow_scale,
                },
            ],
        };
        let uncond_path = dir.join(format!("ratio_{tag}_uncond.svg"));
        write_bytes(&uncond_path, uncond.render().as_bytes())?;
        written.push(uncond_path);

        let m = evaluate(&params, &ecfg, cfg.seed)?;
        let (h, t) = (ecfg.mixture.head_class(), ecfg.mixture.tail_class());
        metric_rows.push(vec![
            label.clone(),
            m.drift[t].to_string(),
            m.drift[h].to_string(),
            m.success[t].to_string(),
            m.success[h].to_string(),
            m.score_shift.to_string(),
            m.score_norm.to_string(),
            m.probe[h].to_string(),
            m.probe[t].to_string(),
        ]);
    }
    let metrics = dir.join("metrics.csv");
    write_csv(
        &metrics,
        &[format!("seed = {}", cfg.seed)],
        &[
            "ratio",
            "tail_drift",
            "head_drift",
            "tail_success",
            "head_success",
            "score_shift",
            "score_norm",
            "D_head",
            "D_tail",
        ],
        metric_rows,
    )?;
    written.push(metrics);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kept_steps_always_end_on_final_state() {
        assert_eq!(kept_steps(10, 4), vec![0, 4, 8, 10]);
        assert_eq!(kept_steps(10, 5), vec![0, 5, 10]);
        assert_eq!(kept_steps(3, 1), vec![0, 1, 2, 3]);
        assert_eq!(kept_steps(3, 100), vec![0, 3]);
    }
}
