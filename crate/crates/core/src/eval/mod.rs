//! Linear evaluation of frozen embeddings, clustering quality, dimension
//! ablation and report writers.

mod ablation;
mod logreg;

pub use ablation::{
    dim_ablation, discriminator_scores, masked_discriminator_counts, welch_t_test, write_scores_tsv,
    AblationConfig, AblationReport, AblationRow, TTest,
};
pub use logreg::{
    accuracy, logreg_train, micro_f1, micro_f1_from_decisions, LogRegConfig, LogRegModel, Targets,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DgiError, Result};
use crate::graph::{Labels, Split};
use crate::tensor::DenseMatrix;

const STD_FLOOR: f64 = 1e-8;

/// Per-column mean and standard deviation (floored at 1e-8).
pub fn standardize_fit(h_train: &DenseMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let mean = h_train.mean_rows()?;
    let mut var = vec![0.0; h_train.cols()];
    for row in h_train.iter_rows() {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m).powi(2);
        }
    }
    let n = h_train.rows() as f64;
    let std = var.into_iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
    Ok((mean, std))
}

pub fn standardize_apply(h: &DenseMatrix, mean: &[f64], std: &[f64]) -> Result<DenseMatrix> {
    if mean.len() != h.cols() || std.len() != h.cols() {
        return Err(DgiError::dims(
            "standardize_apply",
            format!("{} columns, statistics for {}", h.cols(), mean.len()),
        ));
    }
    let mut out = h.clone();
    for i in 0..out.rows() {
        for ((v, m), s) in out.row_mut(i).iter_mut().zip(mean).zip(std) {
            *v = (*v - m) / s;
        }
    }
    Ok(out)
}

/// Mean silhouette with Euclidean distances; members of singleton clusters score 0.
pub fn silhouette(h: &DenseMatrix, labels: &[usize]) -> Result<f64> {
    let n = h.rows();
    if labels.len() != n {
        return Err(DgiError::dims("silhouette", format!("{} labels for {n} rows", labels.len())));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(DgiError::invalid("silhouette needs at least two non-empty clusters"));
    }
    let mut total = 0.0;
    let mut dist_sum = vec![0.0; k];
    for i in 0..n {
        dist_sum.iter_mut().for_each(|d| *d = 0.0);
        let hi = h.row(i);
        for j in 0..n {
            if i != j {
                let d: f64 = hi.iter().zip(h.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                dist_sum[labels[j]] += d;
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = dist_sum[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| dist_sum[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    MicroF1,
}

/// Repeated-evaluation summary, serialized as the metrics JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub metric: Metric,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl MetricsReport {
    pub fn new(dataset: impl Into<String>, seeds: Vec<u64>, metric: Metric, values: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&values);
        Self {
            dataset: dataset.into(),
            seeds,
            metric,
            values,
            mean,
            std,
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| DgiError::invalid(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Protocol for scoring embeddings on a labeled split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub logreg: LogRegConfig,
    /// z-score columns with training-split statistics first.
    pub standardize: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            logreg: LogRegConfig::default(),
            standardize: false,
        }
    }
}

impl EvalConfig {
    pub fn metric_for(labels: &Labels) -> Metric {
        match labels {
            Labels::Single { .. } => Metric::Accuracy,
            Labels::Multi { .. } => Metric::MicroF1,
        }
    }
}

/// Trains on the train split and scores the test split: accuracy for
/// single-label data, micro-F1 for multi-label data.
pub fn evaluate_split(h: &DenseMatrix, labels: &Labels, split: &Split, cfg: &EvalConfig, seed: u64) -> Result<f64> {
    let mut x_train = h.select_rows(&split.train)?;
    let mut x_test = h.select_rows(&split.test)?;
    if cfg.standardize {
        let (mean, std) = standardize_fit(&x_train)?;
        x_train = standardize_apply(&x_train, &mean, &std)?;
        x_test = standardize_apply(&x_test, &mean, &std)?;
    }
    let model = logreg_train(&x_train, &Targets::select(labels, &split.train)?, &cfg.logreg, seed)?;
    let test = Targets::select(labels, &split.test)?;
    match EvalConfig::metric_for(labels) {
        Metric::Accuracy => accuracy(&model, &x_test, &test),
        Metric::MicroF1 => micro_f1(&model, &x_test, &test),
    }
}

/// Writes `node_id` followed by the row values, tab separated.
pub fn write_embeddings_tsv(h: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::with_capacity(h.len() * 20);
    for (i, row) in h.iter_rows().enumerate() {
        let _ = write!(out, "{i}");
        for v in row {
            let _ = write!(out, "\t{v:?}");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a file written by [`write_embeddings_tsv`].
pub fn read_embeddings_tsv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| DgiError::Parse {
            path: path.to_path_buf(),
            line: ln + 1,
            message,
        };
        let mut fields = line.split('\t');
        let id: usize = fields
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e| err(format!("node id: {e}")))?;
        if id != rows.len() {
            return Err(err(format!("expected node {}, found {id}", rows.len())));
        }
        let row = fields
            .map(|t| t.parse::<f64>().map_err(|e| err(format!("value `{t}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}
