//! Flat `key = value` run configuration.
//!
//! A config file holds one assignment per line; `#` starts a comment.
//! Command-line assignments are applied after the file, so the last value
//! for a key wins. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{DgiError, Result};
use crate::eval::{EvalConfig, LogRegConfig};
use crate::graph::{CorruptionConfig, CorruptionKind};
use crate::model::{EncoderSpec, EncoderVariant, TrainConfig};
use crate::theory::Fault;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub repetitions: usize,
    pub encoder: EncoderVariant,
    pub hidden_dim: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: Option<usize>,
    pub corruption: CorruptionKind,
    pub rho: f64,
    pub dropout_p: f64,
    pub normalize_features: bool,
    pub batch_size: usize,
    pub fanouts: Vec<usize>,
    pub logreg_lr: f64,
    pub logreg_l2: f64,
    pub logreg_max_iter: usize,
    pub logreg_tol: f64,
    pub standardize: bool,
    pub rho_grid: Vec<f64>,
    pub sweep_kinds: Vec<CorruptionKind>,
    pub ablation_stride: usize,
    pub checkpoint: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub theory_fault: Fault,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            out_dir: PathBuf::from("runs"),
            seeds: vec![0],
            repetitions: 50,
            encoder: EncoderVariant::Gcn1,
            hidden_dim: 512,
            lr: 0.001,
            max_epochs: 10_000,
            patience: Some(20),
            corruption: CorruptionKind::FeatureShuffle,
            rho: 0.0,
            dropout_p: 0.0,
            normalize_features: true,
            batch_size: 0,
            fanouts: vec![10, 10, 25],
            logreg_lr: 0.01,
            logreg_l2: 1e-5,
            logreg_max_iter: 5000,
            logreg_tol: 1e-6,
            standardize: false,
            rho_grid: default_rho_grid(),
            sweep_kinds: vec![CorruptionKind::EdgeXor, CorruptionKind::Both],
            ablation_stride: 32,
            checkpoint: None,
            embeddings: None,
            theory_fault: Fault::None,
        }
    }
}

/// Nine points from 1e-4 to 1, evenly spaced in log10.
pub fn default_rho_grid() -> Vec<f64> {
    (0..9).map(|i| 10f64.powf(-4.0 + 0.5 * i as f64)).collect()
}

/// Every key with its description, in emission order.
pub const KEYS: &[(&str, &str)] = &[
    ("dataset", "dataset file (required by every command except theory)"),
    ("out_dir", "directory receiving every output file"),
    ("seeds", "comma-separated seeds; one training run per seed"),
    ("repetitions", "classifier fits per embedding"),
    ("encoder", "gcn-1 | meanpool-skip-3 | meanpool-denseskip-3"),
    ("hidden_dim", "embedding width"),
    ("lr", "encoder Adam learning rate"),
    ("max_epochs", "epoch cap (exact step count for minibatch training)"),
    ("patience", "epochs without improvement before stopping, or none"),
    ("corruption", "feature-shuffle | edge-xor | both"),
    ("rho", "edge flip probability for edge-xor and both"),
    ("dropout_p", "feature dropout for cross-graph negatives"),
    ("normalize_features", "row-normalize features before encoding (raw-baseline always uses stored features)"),
    ("batch_size", "patches per minibatch step; 0 trains on the full graph"),
    ("fanouts", "neighbours sampled per hop for minibatch training"),
    ("logreg_lr", "classifier Adam learning rate"),
    ("logreg_l2", "classifier L2 penalty"),
    ("logreg_max_iter", "classifier iteration cap"),
    ("logreg_tol", "classifier loss-change tolerance"),
    ("standardize", "z-score embeddings with training-split statistics"),
    ("rho_grid", "edge flip probabilities for sweep-corruption"),
    ("sweep_kinds", "corruption kinds for sweep-corruption"),
    ("ablation_stride", "dimensions removed per ablation step"),
    ("checkpoint", "checkpoint to read (default: out_dir/seed-<first seed>/model.ckpt)"),
    ("embeddings", "embedding TSV to evaluate (default: per-seed files in out_dir)"),
    ("theory_fault", "none | halve-bound; deliberately breaks the theory suite"),
];

fn bad(field: &str, message: impl Into<String>) -> DgiError {
    DgiError::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn parse<T: FromStr>(field: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(field, format!("cannot parse `{value}`: {e}")))
}

fn parse_list<T: FromStr>(field: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(field, v.trim())).collect()
}

fn parse_bool(field: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(bad(field, format!("expected true or false, got `{other}`"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn join_f64(items: &[f64]) -> String {
    items.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (key, value) = (key.trim(), value.trim());
        match key {
            "dataset" => self.dataset = opt_path(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seeds" => self.seeds = parse_list(key, value)?,
            "repetitions" => self.repetitions = parse(key, value)?,
            "encoder" => self.encoder = parse(key, value)?,
            "hidden_dim" => self.hidden_dim = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "patience" => {
                self.patience = match value {
                    "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "corruption" => self.corruption = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "dropout_p" => self.dropout_p = parse(key, value)?,
            "normalize_features" => self.normalize_features = parse_bool(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "fanouts" => self.fanouts = parse_list(key, value)?,
            "logreg_lr" => self.logreg_lr = parse(key, value)?,
            "logreg_l2" => self.logreg_l2 = parse(key, value)?,
            "logreg_max_iter" => self.logreg_max_iter = parse(key, value)?,
            "logreg_tol" => self.logreg_tol = parse(key, value)?,
            "standardize" => self.standardize = parse_bool(key, value)?,
            "rho_grid" => self.rho_grid = parse_list(key, value)?,
            "sweep_kinds" => self.sweep_kinds = parse_list(key, value)?,
            "ablation_stride" => self.ablation_stride = parse(key, value)?,
            "checkpoint" => self.checkpoint = opt_path(value),
            "embeddings" => self.embeddings = opt_path(value),
            "theory_fault" => {
                self.theory_fault = match value {
                    "none" => Fault::None,
                    "halve-bound" => Fault::HalveBound,
                    other => return Err(bad(key, format!("unknown fault `{other}`"))),
                }
            }
            other => return Err(bad(other, "unknown key")),
        }
        Ok(())
    }

    /// Applies a `key=value` string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| bad(assignment, "expected key=value"))?;
        self.set(key, value)
    }

    /// Applies every assignment in `text`, in order.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                self.apply_override(line)?;
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Value of `key` as it would be written by [`RunConfig::emit`].
    pub fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        Some(match key {
            "dataset" => path(&self.dataset),
            "out_dir" => self.out_dir.display().to_string(),
            "seeds" => join(&self.seeds),
            "repetitions" => self.repetitions.to_string(),
            "encoder" => self.encoder.to_string(),
            "hidden_dim" => self.hidden_dim.to_string(),
            "lr" => format!("{:?}", self.lr),
            "max_epochs" => self.max_epochs.to_string(),
            "patience" => self.patience.map_or("none".into(), |p| p.to_string()),
            "corruption" => self.corruption.to_string(),
            "rho" => format!("{:?}", self.rho),
            "dropout_p" => format!("{:?}", self.dropout_p),
            "normalize_features" => self.normalize_features.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "fanouts" => join(&self.fanouts),
            "logreg_lr" => format!("{:?}", self.logreg_lr),
            "logreg_l2" => format!("{:?}", self.logreg_l2),
            "logreg_max_iter" => self.logreg_max_iter.to_string(),
            "logreg_tol" => format!("{:?}", self.logreg_tol),
            "standardize" => self.standardize.to_string(),
            "rho_grid" => join_f64(&self.rho_grid),
            "sweep_kinds" => join(&self.sweep_kinds),
            "ablation_stride" => self.ablation_stride.to_string(),
            "checkpoint" => path(&self.checkpoint),
            "embeddings" => path(&self.embeddings),
            "theory_fault" => match self.theory_fault {
                Fault::None => "none".into(),
                Fault::HalveBound => "halve-bound".into(),
            },
            _ => return None,
        })
    }

    /// Every key with a comment line describing it.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (key, doc) in KEYS {
            let _ = writeln!(out, "# {doc}");
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    pub fn require_dataset(&self) -> Result<&Path> {
        let path = self.dataset.as_deref().ok_or_else(|| bad("dataset", "required but not set"))?;
        if !path.is_file() {
            return Err(bad("dataset", format!("no such file: {}", path.display())));
        }
        Ok(path)
    }

    pub fn encoder_spec(&self, input_dim: usize) -> Result<EncoderSpec> {
        EncoderSpec::new(self.encoder, input_dim, self.hidden_dim)
    }

    pub fn corruption_config(&self, seed: u64) -> CorruptionConfig {
        CorruptionConfig {
            kind: self.corruption,
            rho: self.rho,
            dropout_p: self.dropout_p,
            seed,
        }
    }

    pub fn train_config(&self, input_dim: usize, seed: u64) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            encoder: self.encoder_spec(input_dim)?,
            corruption: self.corruption_config(seed),
            lr: self.lr,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            logreg: LogRegConfig {
                lr: self.logreg_lr,
                l2: self.logreg_l2,
                max_iter: self.logreg_max_iter,
                tol: self.logreg_tol,
            },
            standardize: self.standardize,
        }
    }

    /// Checks that do not depend on the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(bad("seeds", "at least one seed is required"));
        }
        if self.repetitions == 0 {
            return Err(bad("repetitions", "must be at least 1"));
        }
        if self.hidden_dim == 0 {
            return Err(bad("hidden_dim", "must be at least 1"));
        }
        if !(self.logreg_lr.is_finite() && self.logreg_lr > 0.0) {
            return Err(bad("logreg_lr", "must be positive"));
        }
        if !(self.logreg_l2.is_finite() && self.logreg_l2 >= 0.0) {
            return Err(bad("logreg_l2", "must be non-negative"));
        }
        if self.logreg_max_iter == 0 {
            return Err(bad("logreg_max_iter", "must be at least 1"));
        }
        if !(self.logreg_tol.is_finite() && self.logreg_tol >= 0.0) {
            return Err(bad("logreg_tol", "must be non-negative"));
        }
        if self.ablation_stride == 0 {
            return Err(bad("ablation_stride", "must be at least 1"));
        }
        if self.batch_size > 0 && self.fanouts.is_empty() {
            return Err(bad("fanouts", "minibatch training needs at least one hop"));
        }
        if self.corruption == CorruptionKind::CrossGraph {
            return Err(bad("corruption", "cross-graph negatives need several training graphs"));
        }
        self.corruption_config(0).validate()?;
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<()> {
        if self.rho_grid.is_empty() {
            return Err(bad("rho_grid", "at least one value is required"));
        }
        if let Some(r) = self.rho_grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(bad("rho_grid", format!("{r} is not a probability")));
        }
        if self.sweep_kinds.is_empty() {
            return Err(bad("sweep_kinds", "at least one kind is required"));
        }
        if let Some(k) = self.sweep_kinds.iter().find(|k| matches!(k, CorruptionKind::FeatureShuffle | CorruptionKind::CrossGraph)) {
            return Err(bad("sweep_kinds", format!("{k} has no edge flip probability")));
        }
        Ok(())
    }
}
