use std::path::{Path, PathBuf};

use eirm_core::data::{BenchmarkKind, CorpusKind, DEFAULT_FLIP_PROBS};
use eirm_core::game::{TerminationRule, TrainConfig, DEFAULT_BATCH, DEFAULT_LR, DEFAULT_QUANTILE, DEFAULT_TEST_EVERY, DEFAULT_WINDOW};
use eirm_core::nn::{mlp_layers, Activation, LayerSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable naming the directory that holds IDX corpora.
pub const DATA_DIR_VAR: &str = "EIRM_DATA_DIR";

/// Desk preset: turns of play before the termination monitor starts
/// listening. Long enough for the low-correlation state to form.
pub const DESK_WARM_START: usize = 2500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "F_IRM")]
    FIrm,
    #[serde(rename = "V_IRM")]
    VIrm,
    #[serde(rename = "ERM")]
    Erm,
    #[serde(rename = "ERM_PER_ENV")]
    ErmPerEnv,
    #[serde(rename = "ROBUST")]
    Robust,
    #[serde(rename = "ORACLE")]
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::FIrm,
        Method::VIrm,
        Method::Erm,
        Method::ErmPerEnv,
        Method::Robust,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::FIrm => "F_IRM",
            Method::VIrm => "V_IRM",
            Method::Erm => "ERM",
            Method::ErmPerEnv => "ERM_PER_ENV",
            Method::Robust => "ROBUST",
            Method::Oracle => "ORACLE",
        }
    }

    /// Lower-case directory name for artifacts.
    pub fn slug(self) -> String {
        self.name().to_ascii_lowercase()
    }

    pub fn is_game(self) -> bool {
        matches!(self, Method::FIrm | Method::VIrm)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Paper,
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(format!("unknown preset {other:?} (expected desk or paper)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub name: String,
    /// Rows per environment, training environments first and test last.
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_flips")]
    pub flip_probs: Vec<f64>,
    #[serde(default = "default_canvas")]
    pub canvas: usize,
    /// IDX image files, concatenated in order. Relative paths resolve
    /// against the data directory.
    #[serde(default)]
    pub images: Vec<PathBuf>,
    #[serde(default)]
    pub labels: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Layers of the representation network (variable-Φ game only).
    #[serde(default = "default_hidden")]
    pub phi_layers: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: String,
    #[serde(default = "default_l2")]
    pub l2: f64,
    /// Drop probability on every hidden layer.
    #[serde(default = "default_dropout")]
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            phi_layers: default_hidden(),
            activation: default_activation(),
            l2: default_l2(),
            dropout: default_dropout(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminationConfig {
    /// `quantile`, `threshold` or `never`.
    #[serde(default = "default_rule")]
    pub rule: String,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    /// Used by the `threshold` rule.
    #[serde(default)]
    pub accuracy: Option<f64>,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        Self {
            rule: default_rule(),
            window: DEFAULT_WINDOW,
            quantile: DEFAULT_QUANTILE,
            accuracy: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "one")]
    pub steps_per_turn: usize,
    /// Turns before the termination monitor activates; one epoch if unset.
    #[serde(default)]
    pub warm_start_steps: Option<usize>,
    /// Rounds of the game.
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Optimizer steps for the baselines; `max_iters` × training
    /// environments if unset, matching the game's player updates.
    #[serde(default)]
    pub baseline_steps: Option<usize>,
    #[serde(default = "default_test_every")]
    pub test_every: usize,
    /// Baselines record a trace row every this many steps.
    #[serde(default = "default_baseline_record")]
    pub baseline_record_every: usize,
    #[serde(default)]
    pub termination: TerminationConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            batch_size: DEFAULT_BATCH,
            steps_per_turn: 1,
            warm_start_steps: None,
            max_iters: default_max_iters(),
            baseline_steps: None,
            test_every: DEFAULT_TEST_EVERY,
            baseline_record_every: default_baseline_record(),
            termination: TerminationConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub benchmark: BenchmarkConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default = "one")]
    pub n_seeds: usize,
    /// Seed of the first run; run k uses `seed + k`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_sizes() -> Vec<usize> {
    vec![30_000, 30_000, 10_000]
}
fn default_flips() -> Vec<f64> {
    DEFAULT_FLIP_PROBS.to_vec()
}
fn default_canvas() -> usize {
    16
}
fn default_hidden() -> Vec<usize> {
    vec![390, 390]
}
fn default_activation() -> String {
    "elu".into()
}
fn default_l2() -> f64 {
    1.25e-3
}
fn default_dropout() -> f64 {
    0.75
}
fn default_rule() -> String {
    "quantile".into()
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_quantile() -> f64 {
    DEFAULT_QUANTILE
}
fn default_lr() -> f64 {
    DEFAULT_LR
}
fn default_batch() -> usize {
    DEFAULT_BATCH
}
fn default_max_iters() -> usize {
    5000
}
fn default_test_every() -> usize {
    DEFAULT_TEST_EVERY
}
fn default_baseline_record() -> usize {
    50
}
fn default_name() -> String {
    "experiment".into()
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_out() -> PathBuf {
    PathBuf::from("runs")
}
fn one() -> usize {
    1
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|_| CliError::MissingPath(path.to_path_buf()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn kind(&self) -> Result<BenchmarkKind, CliError> {
        BenchmarkKind::parse(&self.benchmark.name)
            .ok_or_else(|| invalid("benchmark.name", format!("unknown benchmark {:?}", self.benchmark.name)))
    }

    pub fn n_train_envs(&self) -> usize {
        self.benchmark.sizes.len().saturating_sub(1)
    }

    /// Rescales the experiment to a named preset; fields not governed by the
    /// preset keep their configured values.
    pub fn apply_preset(&mut self, preset: Preset) {
        let envs = self.benchmark.sizes.len().max(3);
        match preset {
            Preset::Desk => {
                self.benchmark.sizes = vec![2000; envs];
                self.model.hidden = vec![64, 64];
                self.model.phi_layers = vec![64, 64];
                self.model.dropout = 0.0;
                self.train.max_iters = 3000;
                self.train.warm_start_steps = Some(DESK_WARM_START);
                self.n_seeds = 3;
            }
            Preset::Paper => {
                let mut sizes = vec![30_000; envs];
                *sizes.last_mut().expect("non-empty") = 10_000;
                self.benchmark.sizes = sizes;
                self.model = ModelConfig::default();
                self.train.max_iters = default_max_iters();
                self.train.warm_start_steps = None;
                self.n_seeds = 10;
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let kind = self.kind()?;
        let b = &self.benchmark;
        if b.sizes.len() < 3 {
            return Err(invalid("benchmark.sizes", "need at least two training environments and a test environment"));
        }
        if b.sizes.contains(&0) {
            return Err(invalid("benchmark.sizes", "sizes must be positive"));
        }
        if b.flip_probs.len() != b.sizes.len() {
            return Err(invalid(
                "benchmark.flip_probs",
                format!("{} values for {} environments", b.flip_probs.len(), b.sizes.len()),
            ));
        }
        if b.flip_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("benchmark.flip_probs", "probabilities must lie in [0, 1]"));
        }
        if b.images.len() != b.labels.len() {
            return Err(invalid("benchmark.labels", "one label file per image file"));
        }
        if kind.corpus().is_none() && !b.images.is_empty() {
            return Err(invalid("benchmark.images", format!("{} is generated, not loaded", kind.name())));
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "at least one method"));
        }
        if self.n_seeds == 0 {
            return Err(invalid("n_seeds", "must be >= 1"));
        }
        if self.model.hidden.contains(&0) || self.model.phi_layers.contains(&0) {
            return Err(invalid("model.hidden", "layer widths must be positive"));
        }
        if self.methods.contains(&Method::VIrm) && self.model.phi_layers.is_empty() {
            return Err(invalid("model.phi_layers", "V_IRM needs at least one representation layer"));
        }
        self.activation()?;
        if !(self.model.l2 >= 0.0) {
            return Err(invalid("model.l2", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.model.dropout) {
            return Err(invalid("model.dropout", "must lie in [0, 1)"));
        }
        if self.train.baseline_steps == Some(0) || self.train.baseline_record_every == 0 {
            return Err(invalid("train.baseline_steps", "must be >= 1"));
        }
        self.train_config(0)?
            .validate()
            .map_err(|e| invalid("train", e.to_string()))
    }

    pub fn activation(&self) -> Result<Activation, CliError> {
        match self.model.activation.to_ascii_lowercase().as_str() {
            "elu" => Ok(Activation::Elu),
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(invalid("model.activation", format!("unknown activation {other:?}"))),
        }
    }

    pub fn classifier_layers(&self) -> Result<Vec<LayerSpec>, CliError> {
        Ok(mlp_layers(&self.model.hidden, 2, self.activation()?, self.model.l2, self.model.dropout))
    }

    /// Representation layers; every layer, the last included, is activated
    /// and regularized.
    pub fn phi_layers(&self) -> Result<Vec<LayerSpec>, CliError> {
        let act = self.activation()?;
        Ok(self
            .model
            .phi_layers
            .iter()
            .map(|&out| LayerSpec {
                out,
                activation: act,
                l2: self.model.l2,
                dropout: self.model.dropout,
            })
            .collect())
    }

    pub fn termination(&self) -> Result<TerminationRule, CliError> {
        let t = &self.train.termination;
        match t.rule.as_str() {
            "quantile" => Ok(TerminationRule::Quantile {
                window: t.window,
                q: t.quantile,
            }),
            "threshold" => Ok(TerminationRule::Threshold {
                window: t.window,
                accuracy: t
                    .accuracy
                    .ok_or_else(|| invalid("train.termination.accuracy", "required by the threshold rule"))?,
            }),
            "never" => Ok(TerminationRule::Never),
            other => Err(invalid("train.termination.rule", format!("unknown rule {other:?}"))),
        }
    }

    /// Game configuration for one seed.
    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let t = &self.train;
        Ok(TrainConfig {
            lr: t.lr,
            batch_size: t.batch_size,
            steps_per_turn: t.steps_per_turn,
            warm_start_steps: t.warm_start_steps,
            max_iters: t.max_iters,
            termination: self.termination()?,
            seed,
            test_every: t.test_every,
            record_every: 1,
        })
    }

    /// Baseline configuration for one seed: `max_iters` counts optimizer steps.
    pub fn baseline_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let steps = self
            .train
            .baseline_steps
            .unwrap_or(self.train.max_iters * self.n_train_envs().max(1));
        Ok(TrainConfig {
            max_iters: steps,
            record_every: self.train.baseline_record_every,
            test_every: 1,
            termination: TerminationRule::Never,
            ..self.train_config(seed)?
        })
    }

    /// Image/label file pairs for corpus-backed benchmarks. Explicit paths
    /// win; otherwise `$EIRM_DATA_DIR/<corpus>/` is searched for the
    /// standard train and t10k file names.
    pub fn corpus_files(&self, data_dir: Option<&Path>) -> Result<Option<(CorpusKind, Vec<(PathBuf, PathBuf)>)>, CliError> {
        let kind = self.kind()?;
        let Some(corpus) = kind.corpus() else {
            return Ok(None);
        };
        let resolve = |p: &PathBuf| match data_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.clone(),
        };
        let pairs: Vec<(PathBuf, PathBuf)> = if self.benchmark.images.is_empty() {
            let dir = data_dir
                .map(|d| d.join(corpus_dir(corpus)))
                .ok_or_else(|| invalid("benchmark.images", format!("{} needs a corpus: set images/labels or {DATA_DIR_VAR}", kind.name())))?;
            ["train", "t10k"]
                .iter()
                .map(|split| {
                    (
                        dir.join(format!("{split}-images-idx3-ubyte")),
                        dir.join(format!("{split}-labels-idx1-ubyte")),
                    )
                })
                .filter(|(i, l)| i.exists() && l.exists())
                .collect()
        } else {
            self.benchmark
                .images
                .iter()
                .zip(&self.benchmark.labels)
                .map(|(i, l)| (resolve(i), resolve(l)))
                .collect()
        };
        if pairs.is_empty() {
            return Err(CliError::MissingPath(
                data_dir.map_or_else(PathBuf::new, |d| d.join(corpus_dir(corpus))),
            ));
        }
        for (i, l) in &pairs {
            for p in [i, l] {
                if !p.exists() {
                    return Err(CliError::MissingPath(p.clone()));
                }
            }
        }
        Ok(Some((corpus, pairs)))
    }
}

pub fn corpus_dir(kind: CorpusKind) -> &'static str {
    match kind {
        CorpusKind::Digits => "digits",
        CorpusKind::Fashion => "fashion",
    }
}
