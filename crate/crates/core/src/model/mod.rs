//! Encoders, readout, bilinear discriminator, contrastive objective and
//! training loops.

mod checkpoint;
mod encoder;
mod objective;
mod params;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use encoder::{encode, encode_prepared, encode_with_cache, encoder_backward, EncoderCache, PreparedGraph};
pub use objective::{
    bilinear_logits, contrast_and_grad, dgi_loss, discriminate, objective, objective_and_grad, readout,
    readout_backward,
};
pub use params::{DgiParams, Layer};
pub use train::{
    corrupt_prepared, epoch_rng, train, train_minibatch, train_multigraph, train_step, TrainReport,
};

use crate::error::{DgiError, Result};
use crate::graph::{CorruptionConfig, CorruptionKind, NormKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderVariant {
    /// One GCN layer over the symmetric-normalized adjacency.
    Gcn1,
    /// Three mean-pooling layers, each concatenating a self projection.
    MeanpoolSkip3,
    /// Three mean-pooling layers with dense skip connections.
    MeanpoolDenseSkip3,
}

impl EncoderVariant {
    pub fn name(self) -> &'static str {
        match self {
            EncoderVariant::Gcn1 => "gcn-1",
            EncoderVariant::MeanpoolSkip3 => "meanpool-skip-3",
            EncoderVariant::MeanpoolDenseSkip3 => "meanpool-denseskip-3",
        }
    }

    pub fn layer_count(self) -> usize {
        match self {
            EncoderVariant::Gcn1 => 1,
            EncoderVariant::MeanpoolSkip3 | EncoderVariant::MeanpoolDenseSkip3 => 3,
        }
    }

    pub fn norm_kind(self) -> NormKind {
        match self {
            EncoderVariant::Gcn1 => NormKind::Symmetric,
            EncoderVariant::MeanpoolSkip3 | EncoderVariant::MeanpoolDenseSkip3 => NormKind::Row,
        }
    }
}

impl std::str::FromStr for EncoderVariant {
    type Err = DgiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn-1" | "gcn" => Ok(EncoderVariant::Gcn1),
            "meanpool-skip-3" => Ok(EncoderVariant::MeanpoolSkip3),
            "meanpool-denseskip-3" => Ok(EncoderVariant::MeanpoolDenseSkip3),
            other => Err(DgiError::invalid(format!("unknown encoder `{other}`"))),
        }
    }
}

impl std::fmt::Display for EncoderVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderSpec {
    pub variant: EncoderVariant,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl EncoderSpec {
    pub fn new(variant: EncoderVariant, input_dim: usize, hidden_dim: usize) -> Result<Self> {
        let spec = Self {
            variant,
            input_dim,
            hidden_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(DgiError::Config {
                field: "input_dim".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.hidden_dim == 0 {
            return Err(DgiError::Config {
                field: "hidden_dim".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.variant == EncoderVariant::MeanpoolSkip3 && self.hidden_dim % 2 != 0 {
            return Err(DgiError::Config {
                field: "hidden_dim".into(),
                message: format!("{} splits its width in half; {} is odd", self.variant, self.hidden_dim),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub encoder: EncoderSpec,
    pub corruption: CorruptionConfig,
    pub lr: f64,
    /// Epoch cap for full-graph training; the exact step count for
    /// minibatch and multi-graph training.
    pub max_epochs: usize,
    /// Stop after this many epochs without improvement (full-graph training only).
    pub patience: Option<usize>,
    pub seed: u64,
}

impl TrainConfig {
    /// lr 0.001, patience 20, at most 10000 epochs, feature-shuffle negatives.
    pub fn new(encoder: EncoderSpec, seed: u64) -> Self {
        Self {
            encoder,
            corruption: CorruptionConfig::feature_shuffle(seed),
            lr: 0.001,
            max_epochs: 10_000,
            patience: Some(20),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.corruption.validate()?;
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(DgiError::Config {
                field: "lr".into(),
                message: format!("must be a finite non-negative number, got {}", self.lr),
            });
        }
        if self.max_epochs == 0 {
            return Err(DgiError::Config {
                field: "max_epochs".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.patience == Some(0) {
            return Err(DgiError::Config {
                field: "patience".into(),
                message: "must be at least 1 when set".into(),
            });
        }
        Ok(())
    }

    pub(crate) fn is_cross_graph(&self) -> bool {
        self.corruption.kind == CorruptionKind::CrossGraph
    }
}
