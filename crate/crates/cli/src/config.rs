//! Experiment configuration: JSON schema, overrides, defaults and
//! validation.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vofdm_core::link::ChannelModel;
use vofdm_core::optimizer::{Evaluator, ThresholdGrid, MAX_THRESHOLD};
use vofdm_core::preprocess::Nonlinearity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Ccdf,
    Pde,
    SnrVsThreshold,
    SnrVsThresholdSelective,
    OptimizeNulling,
    OptimizeClipping,
    BerVsSinr,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Ccdf,
        ExperimentKind::Pde,
        ExperimentKind::SnrVsThreshold,
        ExperimentKind::SnrVsThresholdSelective,
        ExperimentKind::OptimizeNulling,
        ExperimentKind::OptimizeClipping,
        ExperimentKind::BerVsSinr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Ccdf => "ccdf",
            ExperimentKind::Pde => "pde",
            ExperimentKind::SnrVsThreshold => "snr_vs_threshold",
            ExperimentKind::SnrVsThresholdSelective => "snr_vs_threshold_selective",
            ExperimentKind::OptimizeNulling => "optimize_nulling",
            ExperimentKind::OptimizeClipping => "optimize_clipping",
            ExperimentKind::BerVsSinr => "ber_vs_sinr",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::Ccdf => "PAPR CCDF per vector-block size",
            ExperimentKind::Pde => "noise-detection error probability versus threshold",
            ExperimentKind::SnrVsThreshold => "output SNR versus threshold, flat channel",
            ExperimentKind::SnrVsThresholdSelective => {
                "output SNR versus threshold, log-normal multipath channel"
            }
            ExperimentKind::OptimizeNulling => {
                "optimal nulling threshold and output SNR versus SINR"
            }
            ExperimentKind::OptimizeClipping => {
                "optimal clipping threshold and output SNR versus SINR"
            }
            ExperimentKind::BerVsSinr => "minimum BER over the threshold versus SINR",
        }
    }

    /// Frames per measurement when the config leaves `trials` unset.
    pub fn default_trials(self) -> usize {
        match self {
            ExperimentKind::Ccdf => 10_000,
            ExperimentKind::Pde => 2_000,
            ExperimentKind::SnrVsThreshold | ExperimentKind::SnrVsThresholdSelective => 4_000,
            ExperimentKind::OptimizeNulling | ExperimentKind::OptimizeClipping => 2_000,
            ExperimentKind::BerVsSinr => 200,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModemSection {
    pub n_subcarriers: usize,
    pub qam_order: u32,
    pub oversampling: usize,
}

impl Default for ModemSection {
    fn default() -> Self {
        Self {
            n_subcarriers: 256,
            qam_order: 4,
            oversampling: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub p: f64,
    pub snr_db: f64,
    pub sinr_db: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            p: 0.01,
            snr_db: 25.0,
            sinr_db: -15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        ThresholdGrid {
            lo: self.lo,
            hi: self.hi,
            step: self.step,
        }
        .points()
    }
}

/// The config file as written. Unset optional fields take per-experiment
/// defaults in [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub modem: ModemSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub m_values: Option<Vec<usize>>,
    #[serde(default)]
    pub p_values: Option<Vec<f64>>,
    #[serde(default)]
    pub sinr_grid_db: Option<Vec<f64>>,
    #[serde(default)]
    pub threshold_grid: Option<Range>,
    #[serde(default)]
    pub papr_grid_db: Option<Range>,
    /// Front ends to sweep; defaults depend on the experiment.
    #[serde(default)]
    pub nonlinearities: Option<Vec<Nonlinearity>>,
    #[serde(default)]
    pub evaluator: Option<Evaluator>,
    #[serde(default)]
    pub channel: Option<ChannelModel>,
}

fn default_seed() -> u64 {
    1
}

/// Fully-defaulted configuration; this is what runs and what the manifest
/// echoes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub output_path: PathBuf,
    pub modem: ModemSection,
    pub noise: NoiseSection,
    pub m_values: Vec<usize>,
    pub p_values: Vec<f64>,
    pub sinr_grid_db: Vec<f64>,
    pub threshold_grid: Range,
    pub papr_grid_db: Range,
    pub nonlinearities: Vec<Nonlinearity>,
    pub evaluator: Evaluator,
    pub channel: Option<ChannelModel>,
}

/// One violated constraint, located by field path and, when the field
/// appears in the source text, by line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line} column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("bad override `{0}`: expected key=value")]
    Override(String),
    #[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

/// Command-line adjustments applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    /// `dotted.key=value`; the value is parsed as JSON, else taken as a
    /// string.
    pub assignments: Vec<String>,
}

/// A parsed config plus the text it came from, for line lookups.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub source: String,
}

pub fn load(path: &std::path::Path, overrides: &Overrides) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_owned(),
        source,
    })?;
    parse(&text, overrides)
}

pub fn parse(text: &str, overrides: &Overrides) -> Result<LoadedConfig, ConfigError> {
    let parse_err = |e: serde_json::Error| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let mut value: Value = serde_json::from_str(text).map_err(parse_err)?;
    apply_overrides(&mut value, overrides)?;
    let config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| ConfigError::Parse {
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
    Ok(LoadedConfig {
        config,
        source: text.to_owned(),
    })
}

fn apply_overrides(root: &mut Value, o: &Overrides) -> Result<(), ConfigError> {
    let mut assignments: Vec<(String, Value)> = Vec::new();
    for a in &o.assignments {
        let (key, raw) = a
            .split_once('=')
            .ok_or_else(|| ConfigError::Override(a.clone()))?;
        if key.is_empty() {
            return Err(ConfigError::Override(a.clone()));
        }
        let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
        assignments.push((key.to_owned(), v));
    }
    if let Some(s) = o.seed {
        assignments.push(("seed".into(), Value::from(s)));
    }
    if let Some(t) = o.trials {
        assignments.push(("trials".into(), Value::from(t)));
    }
    if let Some(p) = &o.out {
        assignments.push((
            "output_path".into(),
            Value::from(p.to_string_lossy().into_owned()),
        ));
    }
    for (key, v) in assignments {
        let mut node = &mut *root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = match node {
                Value::Object(m) => m,
                other => {
                    *other = Value::Object(Default::default());
                    other.as_object_mut().expect("just set")
                }
            };
            if i + 1 == parts.len() {
                obj.insert((*part).to_owned(), v.clone());
                break;
            }
            node = obj
                .entry((*part).to_owned())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn resolve(&self) -> ResolvedConfig {
        let kind = self.experiment;
        let default_m: Vec<usize> = match kind {
            ExperimentKind::Ccdf => vec![1, 4, 16, 64],
            _ => vec![1, 16, 32, 64],
        };
        let default_p: Vec<f64> = match kind {
            ExperimentKind::OptimizeNulling
            | ExperimentKind::OptimizeClipping
            | ExperimentKind::BerVsSinr => {
                vec![0.01, 0.1]
            }
            _ => vec![self.noise.p],
        };
        let default_sinr: Vec<f64> = match kind {
            ExperimentKind::OptimizeNulling
            | ExperimentKind::OptimizeClipping
            | ExperimentKind::BerVsSinr => (0..=8).map(|k| -40.0 + 5.0 * k as f64).collect(),
            _ => vec![self.noise.sinr_db],
        };
        let default_grid = match kind {
            ExperimentKind::Pde => Range {
                lo: 0.05,
                hi: 6.0,
                step: 0.05,
            },
            ExperimentKind::SnrVsThreshold | ExperimentKind::SnrVsThresholdSelective => Range {
                lo: 0.25,
                hi: 10.0,
                step: 0.25,
            },
            ExperimentKind::BerVsSinr => Range {
                lo: 0.1,
                hi: 8.0,
                step: 0.1,
            },
            _ => {
                let g = ThresholdGrid::default();
                Range {
                    lo: g.lo,
                    hi: g.hi,
                    step: g.step,
                }
            }
        };
        let default_nl = match kind {
            ExperimentKind::OptimizeNulling => vec![Nonlinearity::Nulling],
            ExperimentKind::OptimizeClipping | ExperimentKind::BerVsSinr => {
                vec![Nonlinearity::Clipping]
            }
            _ => vec![Nonlinearity::Nulling, Nonlinearity::Clipping],
        };
        let channel = match kind {
            ExperimentKind::SnrVsThresholdSelective => Some(self.channel.unwrap_or_default()),
            _ => self.channel,
        };
        ResolvedConfig {
            experiment: kind,
            seed: self.seed,
            trials: self.trials.unwrap_or_else(|| kind.default_trials()),
            output_path: self
                .output_path
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("{}.csv", kind.name()))),
            modem: self.modem,
            noise: self.noise,
            m_values: self.m_values.clone().unwrap_or(default_m),
            p_values: self.p_values.clone().unwrap_or(default_p),
            sinr_grid_db: self.sinr_grid_db.clone().unwrap_or(default_sinr),
            threshold_grid: self.threshold_grid.unwrap_or(default_grid),
            papr_grid_db: self.papr_grid_db.unwrap_or(Range {
                lo: 0.0,
                hi: 12.0,
                step: 0.1,
            }),
            nonlinearities: self.nonlinearities.clone().unwrap_or(default_nl),
            evaluator: self.evaluator.unwrap_or_default(),
            channel,
        }
    }
}

/// Every violated invariant of a config, without running anything.
pub fn validate(loaded: &LoadedConfig) -> Vec<Diagnostic> {
    let cfg = &loaded.config;
    let r = cfg.resolve();
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| {
        out.push(Diagnostic {
            line: find_line(&loaded.source, field),
            field: field.to_owned(),
            message,
        });
    };

    let n = r.modem.n_subcarriers;
    if n == 0 {
        push("modem.n_subcarriers", "N must be positive".into());
    }
    if ![4, 16, 64].contains(&r.modem.qam_order) {
        push(
            "modem.qam_order",
            format!("QAM order must be 4, 16 or 64, got {}", r.modem.qam_order),
        );
    }
    if r.modem.oversampling == 0 {
        push(
            "modem.oversampling",
            "oversampling factor must be ≥ 1".into(),
        );
    }
    if r.trials == 0 {
        push("trials", "trials must be ≥ 1".into());
    }
    if r.m_values.is_empty() {
        push("m_values", "grid must be non-empty".into());
    }
    for &m in &r.m_values {
        if m == 0 || (n > 0 && !n.is_multiple_of(m)) {
            push("m_values", format!("M must divide N (N={n}, M={m})"));
        }
    }
    let p_field = if cfg.p_values.is_some() {
        "p_values"
    } else {
        "noise.p"
    };
    if r.p_values.is_empty() {
        push(p_field, "grid must be non-empty".into());
    }
    for &p in &r.p_values {
        if !(0.0..=1.0).contains(&p) {
            push(p_field, format!("probability out of range: {p}"));
        }
    }
    if !(0.0..=1.0).contains(&r.noise.p) && cfg.p_values.is_some() {
        push(
            "noise.p",
            format!("probability out of range: {}", r.noise.p),
        );
    }
    if r.noise.snr_db.is_nan() {
        push("noise.snr_db", "SNR must be a number".into());
    }
    let sinr_field = if cfg.sinr_grid_db.is_some() {
        "sinr_grid_db"
    } else {
        "noise.sinr_db"
    };
    if r.sinr_grid_db.is_empty() {
        push(sinr_field, "grid must be non-empty".into());
    }
    if r.sinr_grid_db.iter().any(|s| !s.is_finite()) {
        push(sinr_field, "SINR values must be finite".into());
    }
    let g = r.threshold_grid;
    if !(g.lo > 0.0) {
        push(
            "threshold_grid.lo",
            format!("lower bound must be > 0, got {}", g.lo),
        );
    }
    if !(g.step > 0.0) {
        push(
            "threshold_grid.step",
            format!("step must be > 0, got {}", g.step),
        );
    }
    if !(g.hi >= g.lo) {
        push(
            "threshold_grid.hi",
            format!("upper bound {} is below lower bound {}", g.hi, g.lo),
        );
    }
    if g.hi > MAX_THRESHOLD {
        push(
            "threshold_grid.hi",
            format!("upper bound {} exceeds 20·σ_s = {MAX_THRESHOLD:.4}", g.hi),
        );
    }
    let pg = r.papr_grid_db;
    if !(pg.step > 0.0) || !(pg.hi >= pg.lo) {
        push("papr_grid_db", "needs lo ≤ hi and step > 0".into());
    }
    if r.nonlinearities.is_empty() {
        push(
            "nonlinearities",
            "at least one front end is required".into(),
        );
    }
    if let Some(ch) = r.channel {
        if ch.n_taps == 0 || ch.n_taps > n {
            push(
                "channel.n_taps",
                format!("tap count must be in 1..={n}, got {}", ch.n_taps),
            );
        }
        if !(ch.sigma_ln >= 0.0) || !ch.sigma_ln.is_finite() {
            push(
                "channel.sigma_ln",
                format!("log-std must be ≥ 0, got {}", ch.sigma_ln),
            );
        }
        if r.experiment == ExperimentKind::BerVsSinr {
            push(
                "channel",
                "BER is simulated over the flat channel only".into(),
            );
        }
    }
    if r.evaluator == Evaluator::Analytic {
        let optimizing = matches!(
            r.experiment,
            ExperimentKind::OptimizeNulling | ExperimentKind::OptimizeClipping
        );
        if !optimizing {
            push(
                "evaluator",
                format!("analytic evaluation is not available for {}", r.experiment),
            );
        } else if r.m_values.iter().any(|&m| m != 1) {
            push("evaluator", "analytic evaluation models M = 1 only".into());
        } else if r.channel.is_some() {
            push(
                "evaluator",
                "analytic evaluation models a flat channel only".into(),
            );
        }
    }
    if r.output_path.as_os_str().is_empty() {
        push("output_path", "output path must be non-empty".into());
    }
    out
}

/// Line of the first occurrence of the field's last key in the source.
fn find_line(source: &str, field: &str) -> Option<usize> {
    let key = field.rsplit('.').next()?;
    let needle = format!("\"{key}\"");
    source
        .lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
}
