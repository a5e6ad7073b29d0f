//! Experiment configuration: TOML schema, presets, overrides and validation.

use std::fmt;
use std::path::PathBuf;

use diland::algorithms::WeightSequence;
use diland::channel::ChannelConfig;
use diland::trial::AlgorithmKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FIG1_PRESET: &str = include_str!("../presets/fig1.toml");
pub const FIG2_PRESET: &str = include_str!("../presets/fig2.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Spatial dimension `m`.
    pub dim: usize,
    pub n_sensors: usize,
    /// Communication radius, same length units as `scale`.
    pub comm_radius: f64,
    /// Edge scale of the anchor simplex.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

/// Distance estimator fed with the corrected samples. Only the running mean exists.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    RunningMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlgorithmEntry", into = "AlgorithmEntry")]
pub struct AlgorithmConfig {
    /// Label used in file names; defaults to the algorithm name.
    pub name: Option<String>,
    pub kind: AlgorithmKind,
    pub a: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindName {
    Diloc,
    Dlre,
    Diland,
    TrainThenRun,
}

/// On-disk form of an `[[algorithms]]` entry. `serde(flatten)` would lose
/// `deny_unknown_fields`, so the tagged kind is spelled out here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlgorithmEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    kind: KindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warmup: Option<u64>,
    a: f64,
    delta: f64,
}

impl TryFrom<AlgorithmEntry> for AlgorithmConfig {
    type Error = String;

    fn try_from(e: AlgorithmEntry) -> Result<Self, String> {
        let kind = match (e.kind, e.warmup) {
            (KindName::TrainThenRun, Some(warmup)) => AlgorithmKind::TrainThenRun { warmup },
            (KindName::TrainThenRun, None) => return Err("train_then_run needs `warmup`".into()),
            (_, Some(_)) => return Err("`warmup` only applies to train_then_run".into()),
            (KindName::Diloc, None) => AlgorithmKind::Diloc,
            (KindName::Dlre, None) => AlgorithmKind::Dlre,
            (KindName::Diland, None) => AlgorithmKind::Diland,
        };
        Ok(AlgorithmConfig {
            name: e.name,
            kind,
            a: e.a,
            delta: e.delta,
        })
    }
}

impl From<AlgorithmConfig> for AlgorithmEntry {
    fn from(c: AlgorithmConfig) -> Self {
        let (kind, warmup) = match c.kind {
            AlgorithmKind::Diloc => (KindName::Diloc, None),
            AlgorithmKind::Dlre => (KindName::Dlre, None),
            AlgorithmKind::Diland => (KindName::Diland, None),
            AlgorithmKind::TrainThenRun { warmup } => (KindName::TrainThenRun, Some(warmup)),
        };
        AlgorithmEntry {
            name: c.name,
            kind,
            warmup,
            a: c.a,
            delta: c.delta,
        }
    }
}

impl AlgorithmConfig {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name())
    }

    pub fn weights(&self) -> WeightSequence<f64> {
        WeightSequence {
            a: self.a,
            delta: self.delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    /// Explicit seed list; takes precedence over `base`/`count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list: Option<Vec<u64>>,
    #[serde(default)]
    pub base: u64,
    #[serde(default)]
    pub count: u64,
}

impl SeedConfig {
    pub fn seeds(&self) -> Vec<u64> {
        match &self.list {
            Some(l) => l.clone(),
            None => (0..self.count).map(|i| self.base.wrapping_add(i)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write per-sensor squared errors every this many iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_error_stride: Option<u64>,
    /// Write one network JSON per seed.
    #[serde(default = "yes")]
    pub networks: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub channel: ChannelConfig<f64>,
    #[serde(default)]
    pub estimator: EstimatorKind,
    pub algorithms: Vec<AlgorithmConfig>,
    /// Iterations per trial.
    pub horizon: u64,
    pub seeds: SeedConfig,
    pub output: OutputConfig,
    /// Run DILAND with `delta <= 0.5` despite link failures or communication noise.
    #[serde(default)]
    pub allow_non_square_summable: bool,
}

/// Mirror of [`ExperimentConfig`] with every section optional, so that a document
/// missing several sections reports all of them at once.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    network: Option<NetworkConfig>,
    channel: Option<ChannelConfig<f64>>,
    #[serde(default)]
    estimator: EstimatorKind,
    algorithms: Option<Vec<AlgorithmConfig>>,
    horizon: Option<u64>,
    seeds: Option<SeedConfig>,
    output: Option<OutputConfig>,
    #[serde(default)]
    allow_non_square_summable: bool,
}

/// Every problem found in one document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Command-line overrides applied on top of a document before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
    pub algorithms: Option<Vec<String>>,
    pub iters: Option<u64>,
}

pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "fig1" => Some(FIG1_PRESET),
        "fig2" => Some(FIG2_PRESET),
        _ => None,
    }
}

/// Parses and validates a TOML document.
pub fn parse_config(doc: &str) -> Result<ExperimentConfig, ConfigErrors> {
    parse_with_overrides(doc, &Overrides::default())
}

pub fn parse_with_overrides(doc: &str, ov: &Overrides) -> Result<ExperimentConfig, ConfigErrors> {
    let partial: PartialConfig = toml::from_str(doc).map_err(|e| ConfigErrors(vec![parse_message(doc, &e)]))?;
    let mut missing = Vec::new();
    let mut need = |present: bool, field: &str| {
        if !present {
            missing.push(format!("missing required field `{field}`"));
        }
    };
    need(partial.network.is_some(), "network");
    need(partial.channel.is_some(), "channel");
    need(partial.algorithms.is_some(), "algorithms");
    need(partial.horizon.is_some() || ov.iters.is_some(), "horizon");
    need(partial.seeds.is_some() || ov.trials.is_some(), "seeds");
    need(partial.output.is_some() || ov.out.is_some(), "output");
    if !missing.is_empty() {
        return Err(ConfigErrors(missing));
    }
    let mut cfg = ExperimentConfig {
        network: partial.network.expect("checked"),
        channel: partial.channel.expect("checked"),
        estimator: partial.estimator,
        algorithms: partial.algorithms.expect("checked"),
        horizon: partial.horizon.unwrap_or(0),
        seeds: partial.seeds.unwrap_or(SeedConfig {
            list: None,
            base: 0,
            count: 0,
        }),
        output: partial.output.unwrap_or(OutputConfig {
            dir: PathBuf::new(),
            sensor_error_stride: None,
            networks: true,
        }),
        allow_non_square_summable: partial.allow_non_square_summable,
    };
    cfg.apply(ov)?;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_message(doc: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let line = doc[..span.start.min(doc.len())].matches('\n').count() + 1;
            format!("line {line}: {}", e.message())
        }
        None => e.message().to_string(),
    }
}

impl ExperimentConfig {
    pub fn apply(&mut self, ov: &Overrides) -> Result<(), ConfigErrors> {
        if let Some(seed) = ov.seed {
            if let Some(list) = self.seeds.list.take() {
                self.seeds.count = list.len() as u64;
            }
            self.seeds.base = seed;
        }
        if let Some(n) = ov.trials {
            if let Some(list) = self.seeds.list.take() {
                self.seeds.base = list.first().copied().unwrap_or(self.seeds.base);
            }
            self.seeds.count = n;
        }
        if let Some(dir) = &ov.out {
            self.output.dir = dir.clone();
        }
        if let Some(t) = ov.iters {
            self.horizon = t;
        }
        if let Some(names) = &ov.algorithms {
            let unknown: Vec<String> = names
                .iter()
                .filter(|n| !self.algorithms.iter().any(|a| &a.label() == *n))
                .map(|n| format!("--algorithms: no algorithm named `{n}` in the configuration"))
                .collect();
            if !unknown.is_empty() {
                return Err(ConfigErrors(unknown));
            }
            self.algorithms.retain(|a| names.contains(&a.label()));
        }
        Ok(())
    }

    /// Checks every invariant and reports all violations.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        let n = &self.network;
        if n.dim == 0 {
            errs.push("network.dim must be at least 1".to_string());
        }
        if n.n_sensors == 0 {
            errs.push("network.n_sensors must be at least 1".to_string());
        }
        if !(n.comm_radius > 0.0 && n.comm_radius.is_finite()) {
            errs.push("network.comm_radius must be positive".to_string());
        }
        if !(n.scale > 0.0 && n.scale.is_finite()) {
            errs.push("network.scale must be positive".to_string());
        }
        if let Err(e) = self.channel.validate() {
            errs.push(format!("channel: {e}"));
        }
        if self.algorithms.is_empty() {
            errs.push("algorithms: at least one algorithm is required".to_string());
        }
        let randomized = self.channel.has_exchange_randomness();
        for (i, a) in self.algorithms.iter().enumerate() {
            let label = a.label();
            if let Err(e) = a.weights().validate() {
                errs.push(format!("algorithms[{i}] ({label}): {e}"));
            }
            if let AlgorithmKind::TrainThenRun { warmup } = a.kind {
                if warmup == 0 {
                    errs.push(format!("algorithms[{i}] ({label}): warmup must be at least 1"));
                }
            }
            if a.kind == AlgorithmKind::Diland
                && randomized
                && !(a.delta > 0.5)
                && !self.allow_non_square_summable
            {
                errs.push(format!(
                    "algorithms[{i}] ({label}): delta {} is not square summable (needs delta > 0.5) with link failures or communication noise; set allow_non_square_summable to override",
                    a.delta
                ));
            }
            if self.algorithms[..i].iter().any(|b| b.label() == label) {
                errs.push(format!("algorithms[{i}]: duplicate name `{label}`"));
            }
            if label.is_empty() || label.contains(['/', '\\']) {
                errs.push(format!("algorithms[{i}]: name `{label}` is not a valid file name"));
            }
        }
        if self.horizon == 0 {
            errs.push("horizon must be at least 1".to_string());
        }
        let seeds = self.seeds.seeds();
        if seeds.is_empty() {
            errs.push("seeds: trial count must be at least 1".to_string());
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            errs.push("seeds: duplicate seeds".to_string());
        }
        if self.output.dir.as_os_str().is_empty() {
            errs.push("output.dir must not be empty".to_string());
        }
        if self.output.sensor_error_stride == Some(0) {
            errs.push("output.sensor_error_stride must be at least 1".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 over the canonical JSON form, output settings excluded, so runs of the
    /// same experiment into different directories share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig {
            dir: PathBuf::new(),
            sensor_error_stride: None,
            networks: true,
        };
        let json = serde_json::to_vec(&c).expect("config serializes to JSON");
        hex::encode(Sha256::digest(&json))
    }
}
