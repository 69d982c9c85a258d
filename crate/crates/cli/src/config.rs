//! Run configuration: one TOML table, dotted `--set` overrides, validation.

use std::fs;
use std::path::{Path, PathBuf};

use imbalab_core::balancing::TrainConfig;
use imbalab_core::diffusion::{GuidanceConfig, Lattice};
use imbalab_core::nn::ModelLayout;
use imbalab_core::synth::{EvalConfig, ExperimentConfig, MixtureSpec, ProcessConfig, SweepAxis};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "IMBALAB_OUT";
pub const DEFAULT_OUT: &str = "imbalab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKind {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub n: usize,
    pub class: usize,
    /// Sample from the null condition and ignore `class`.
    pub unconditional: bool,
    /// Keep every `trajectory_stride`-th sampler state (the final state is always kept).
    pub trajectory_stride: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            n: 200,
            class: 0,
            unconditional: false,
            trajectory_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    #[default]
    Model,
    /// Closed-form optimum of the configured mixture.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub lattice: Lattice,
    pub times: Vec<f64>,
    pub class: usize,
    pub unconditional: bool,
    pub source: FieldSource,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            lattice: Lattice::default(),
            times: vec![0.5],
            class: 0,
            unconditional: true,
            source: FieldSource::Model,
        }
    }
}

/// A sweep value written as a bare number or a string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl std::fmt::Display for AxisValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AxisValue::Int(v) => write!(f, "{v}"),
            AxisValue::Float(v) => write!(f, "{v}"),
            AxisValue::Text(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: String,
    pub values: Vec<AxisValue>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: "ratio".into(),
            values: vec![AxisValue::Text("1:1".into()), AxisValue::Text("99:1".into())],
        }
    }
}

impl SweepConfig {
    pub fn axis(&self) -> Result<SweepAxis> {
        let values: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        Ok(SweepAxis::parse(&self.axis, &values)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    #[default]
    Scatter,
    Quiver,
    Trajectory,
    Bar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureSpec {
    pub kind: FigureKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
    /// Optional `x,y[,label]` CSV drawn faintly underneath.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background: Option<PathBuf>,
    /// Defaults to `<out>/figure.svg`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub title: String,
    pub width: u32,
    pub height: u32,
    /// Fill colors indexed by the `label` column.
    pub colors: Vec<String>,
    /// Arrow length per unit of field magnitude.
    pub arrow_scale: f64,
    pub category_column: String,
    pub value_column: String,
}

impl Default for FigureSpec {
    fn default() -> Self {
        Self {
            kind: FigureKind::Scatter,
            source: None,
            background: None,
            output: None,
            title: String::new(),
            width: 480,
            height: 480,
            colors: vec!["#8c564b".into(), "#9467bd".into(), "#2ca02c".into(), "#d62728".into()],
            arrow_scale: 0.08,
            category_column: "axis_value".into(),
            value_column: "success_rate".into(),
        }
    }
}

impl FigureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(CliError::config("figure width and height must be >= 64"));
        }
        if self.colors.is_empty() {
            return Err(CliError::config("figure.colors must not be empty"));
        }
        if !(self.arrow_scale > 0.0 && self.arrow_scale.is_finite()) {
            return Err(CliError::config("figure.arrow_scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    /// Template file; the built-in set is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    pub n: usize,
    pub k: usize,
    pub threshold: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let p = imbalab_bench::BuildParams::default();
        Self {
            corpus: None,
            vocab: None,
            templates: None,
            n: p.n,
            k: p.k,
            threshold: p.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Head:tail ratios, one figure pair each, at the configured total.
    pub ratios: Vec<String>,
    /// Trajectories drawn per class.
    pub trajectories: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            ratios: vec!["1:1".into(), "99:1".into()],
            trajectories: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub scalar: ScalarKind,
    pub seed: u64,
    /// Seeds for `experiment`.
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    /// Read the mixture from this file instead of `[mixture]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixture_file: Option<PathBuf>,
    /// Checkpoint for `sample`, `probe` and `score-field`; defaults to `<out>/model.ckpt`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub mixture: MixtureSpec,
    pub model: ModelLayout,
    pub process: ProcessConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub sample: SampleConfig,
    pub field: FieldConfig,
    pub sweep: SweepConfig,
    pub figure: FigureSpec,
    pub bench: BenchConfig,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: None,
            scalar: ScalarKind::F64,
            seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            data_seed: None,
            mixture_file: None,
            checkpoint: None,
            mixture: MixtureSpec::default(),
            model: ModelLayout::default(),
            process: ProcessConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            sample: SampleConfig::default(),
            field: FieldConfig::default(),
            sweep: SweepConfig::default(),
            figure: FigureSpec::default(),
            bench: BenchConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

/// Parses the right-hand side of `--set`: a TOML value, or a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `a.b.c=value` to `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override '{assignment}' is not KEY=VALUE")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(format!("override key '{key}' has an empty segment")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let next = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match next {
            toml::Value::Table(t) => t,
            _ => return Err(CliError::config(format!("override '{key}': '{p}' is not a table"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies overrides in order and resolves `mixture_file`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io_at(p, e))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| CliError::from(e).context(p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let has_inline_mixture = table.contains_key("mixture");
        let mut cfg = RunConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| CliError::config(e.to_string().trim_end().to_string()))?;
        if let Some(file) = &cfg.mixture_file {
            if has_inline_mixture {
                return Err(CliError::config("set either mixture_file or [mixture], not both"));
            }
            let text = fs::read_to_string(file).map_err(|e| CliError::io_at(file, e))?;
            cfg.mixture = toml::from_str(&text).map_err(|e| CliError::from(e).context(file.display()))?;
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            mixture: self.mixture.clone(),
            model: self.model,
            process: self.process,
            train: TrainConfig { seed: self.seed, ..self.train },
            eval: self.eval,
            data_seed: self.data_seed,
        }
    }

    /// Checks shared by every modelling subcommand.
    pub fn validate(&self) -> Result<()> {
        self.experiment().validate()?;
        GuidanceConfig::new(self.eval.guidance)?;
        Ok(())
    }

    pub fn validate_sample(&self) -> Result<()> {
        self.validate()?;
        let s = &self.sample;
        if s.n == 0 || s.trajectory_stride == 0 {
            return Err(CliError::config("sample.n and sample.trajectory_stride must be >= 1"));
        }
        if !s.unconditional && s.class >= self.model.num_classes {
            return Err(CliError::config(format!(
                "sample.class {} is out of range for {} classes",
                s.class, self.model.num_classes
            )));
        }
        Ok(())
    }

    pub fn validate_field(&self) -> Result<()> {
        self.validate()?;
        let f = &self.field;
        f.lattice.validate()?;
        if f.times.is_empty() {
            return Err(CliError::config("field.times must list at least one time"));
        }
        if let Some(t) = f.times.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(CliError::config(format!("field time {t} is outside (0, 1]")));
        }
        if !f.unconditional && f.class >= self.model.num_classes {
            return Err(CliError::config(format!("field.class {} is out of range", f.class)));
        }
        Ok(())
    }

    pub fn validate_experiment(&self) -> Result<SweepAxis> {
        self.validate()?;
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds must list at least one seed"));
        }
        let axis = self.sweep.axis()?;
        for i in 0..axis.len() {
            axis.apply(i, &self.experiment())?.validate()?;
        }
        Ok(axis)
    }

    pub fn validate_report(&self) -> Result<SweepAxis> {
        self.validate()?;
        self.figure.validate()?;
        self.field.lattice.validate()?;
        if self.report.trajectories == 0 {
            return Err(CliError::config("report.trajectories must be >= 1"));
        }
        let ratios = SweepAxis::parse("ratio", &self.report.ratios)?;
        for i in 0..ratios.len() {
            ratios.apply(i, &self.experiment())?.validate()?;
        }
        Ok(ratios)
    }

    pub fn validate_bench(&self) -> Result<()> {
        let b = &self.bench;
        if b.corpus.is_none() || b.vocab.is_none() {
            return Err(CliError::config("bench.corpus and bench.vocab are required"));
        }
        if b.n == 0 || b.k == 0 || b.threshold == 0 {
            return Err(CliError::config("bench.n, bench.k and bench.threshold must be >= 1"));
        }
        Ok(())
    }

    /// `--out` flag, then `out_dir`, then `$IMBALAB_OUT`, then `imbalab-out`.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.out_dir {
            return p.clone();
        }
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from(DEFAULT_OUT),
        }
    }
}
