use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DgiError, Result};
use crate::graph::Labels;
use crate::tensor::ops::{log_sigmoid, sigmoid};
use crate::tensor::{adam_step, glorot_init, AdamState, DenseMatrix, Param};

/// Supervision for the training rows only, so a classifier can never see
/// labels outside the split it is given.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Single { num_classes: usize, ids: Vec<usize> },
    Multi { num_classes: usize, sets: Vec<Vec<usize>> },
}

impl Targets {
    /// Labels of `nodes`, in order. Unlabeled nodes are an error for single-label data.
    pub fn select(labels: &Labels, nodes: &[usize]) -> Result<Self> {
        match labels {
            Labels::Single { num_classes, ids } => {
                let picked = nodes
                    .iter()
                    .map(|&i| {
                        let id = ids.get(i).ok_or(DgiError::IndexOutOfRange { index: i, len: ids.len() })?;
                        id.ok_or_else(|| DgiError::invalid(format!("node {i} has no label")))
                    })
                    .collect::<Result<_>>()?;
                Ok(Targets::Single {
                    num_classes: *num_classes,
                    ids: picked,
                })
            }
            Labels::Multi { num_classes, sets } => {
                let picked = nodes
                    .iter()
                    .map(|&i| {
                        sets.get(i)
                            .cloned()
                            .ok_or(DgiError::IndexOutOfRange { index: i, len: sets.len() })
                    })
                    .collect::<Result<_>>()?;
                Ok(Targets::Multi {
                    num_classes: *num_classes,
                    sets: picked,
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Targets::Single { ids, .. } => ids.len(),
            Targets::Multi { sets, .. } => sets.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Targets::Single { num_classes, .. } | Targets::Multi { num_classes, .. } => *num_classes,
        }
    }

    /// 0/1 indicator matrix, one row per target.
    pub fn indicator(&self) -> DenseMatrix {
        let mut y = DenseMatrix::zeros(self.len(), self.num_classes());
        match self {
            Targets::Single { ids, .. } => ids.iter().enumerate().for_each(|(i, &c)| y[(i, c)] = 1.0),
            Targets::Multi { sets, .. } => {
                for (i, set) in sets.iter().enumerate() {
                    set.iter().for_each(|&c| y[(i, c)] = 1.0);
                }
            }
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegConfig {
    pub lr: f64,
    /// Penalty `l2/2 · ‖W‖²` on the weights (not the bias).
    pub l2: f64,
    pub max_iter: usize,
    /// Stop when the loss changes by less than this between iterations.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            l2: 1e-5,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

/// Softmax regression, or independent per-label logistic regressions.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub multi_label: bool,
    pub iterations: usize,
    pub final_loss: f64,
}

fn logits(x: &DenseMatrix, w: &DenseMatrix, b: &[f64]) -> Result<DenseMatrix> {
    let mut z = x.matmul(w)?;
    for i in 0..z.rows() {
        z.row_mut(i).iter_mut().zip(b).for_each(|(v, bb)| *v += bb);
    }
    Ok(z)
}

fn softmax_rows(z: &mut DenseMatrix) {
    for i in 0..z.rows() {
        let row = z.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Full-batch Adam on mean cross-entropy plus the L2 penalty. Weights are
/// Glorot-initialized from `seed`; the bias starts at zero.
pub fn logreg_train(x: &DenseMatrix, targets: &Targets, cfg: &LogRegConfig, seed: u64) -> Result<LogRegModel> {
    if targets.is_empty() {
        return Err(DgiError::invalid("logistic regression needs a non-empty training split"));
    }
    if x.rows() != targets.len() {
        return Err(DgiError::dims(
            "logreg_train",
            format!("{} rows for {} targets", x.rows(), targets.len()),
        ));
    }
    let (n, d, c) = (x.rows(), x.cols(), targets.num_classes());
    if c == 0 {
        return Err(DgiError::invalid("logistic regression needs at least one class"));
    }
    let multi = matches!(targets, Targets::Multi { .. });
    let y = targets.indicator();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Param::new(glorot_init(d.max(1), c, &mut rng));
    if d == 0 {
        w = Param::new(DenseMatrix::zeros(0, c));
    }
    let mut b = Param::new(DenseMatrix::zeros(1, c));
    let mut adam = AdamState::new([&w, &b]);
    let mut prev = f64::INFINITY;
    let mut loss = f64::INFINITY;
    let mut iterations = 0;
    let inv_n = 1.0 / n as f64;
    for it in 0..cfg.max_iter {
        let z = logits(x, &w.value, b.value.as_slice())?;
        let mut dz = DenseMatrix::zeros(n, c);
        let mut data_loss = 0.0;
        if multi {
            for i in 0..n {
                for k in 0..c {
                    let (zz, yy) = (z[(i, k)], y[(i, k)]);
                    data_loss -= yy * log_sigmoid(zz) + (1.0 - yy) * log_sigmoid(-zz);
                    dz[(i, k)] = (sigmoid(zz) - yy) * inv_n / c as f64;
                }
            }
            data_loss /= (n * c) as f64;
        } else {
            let mut p = z.clone();
            softmax_rows(&mut p);
            for i in 0..n {
                let zi = z.row(i);
                let max = zi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + zi.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                for k in 0..c {
                    data_loss -= y[(i, k)] * (zi[k] - lse);
                    dz[(i, k)] = (p[(i, k)] - y[(i, k)]) * inv_n;
                }
            }
            data_loss *= inv_n;
        }
        let penalty = 0.5 * cfg.l2 * w.value.as_slice().iter().map(|v| v * v).sum::<f64>();
        loss = data_loss + penalty;
        if !loss.is_finite() {
            return Err(DgiError::NonFinite("logistic regression loss"));
        }
        iterations = it + 1;
        if (prev - loss).abs() < cfg.tol {
            break;
        }
        prev = loss;
        w.grad = x.matmul_tn(&dz)?;
        w.grad.add_assign(&w.value.scale(cfg.l2))?;
        b.grad = DenseMatrix::row_vector(&dz.matvec_t(&vec![1.0; n])?);
        adam_step(&mut [&mut w, &mut b], &mut adam, cfg.lr);
    }
    Ok(LogRegModel {
        weight: w.value,
        bias: b.value.into_vec(),
        multi_label: multi,
        iterations,
        final_loss: loss,
    })
}

impl LogRegModel {
    /// Class probabilities (softmax) or per-label probabilities (sigmoid).
    pub fn probabilities(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut z = logits(x, &self.weight, &self.bias)?;
        if self.multi_label {
            z = z.map(sigmoid);
        } else {
            softmax_rows(&mut z);
        }
        Ok(z)
    }

    /// Arg-max class per row (lowest index on ties).
    pub fn predict_class(&self, x: &DenseMatrix) -> Result<Vec<usize>> {
        let z = logits(x, &self.weight, &self.bias)?;
        Ok(z.iter_rows().map(argmax).collect())
    }

    /// 0/1 decisions: the arg-max class, or every label with probability above 0.5.
    pub fn decisions(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.multi_label {
            Ok(self.probabilities(x)?.map(|p| if p > 0.5 { 1.0 } else { 0.0 }))
        } else {
            let mut out = DenseMatrix::zeros(x.rows(), self.bias.len());
            for (i, c) in self.predict_class(x)?.into_iter().enumerate() {
                out[(i, c)] = 1.0;
            }
            Ok(out)
        }
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Fraction of rows whose arg-max prediction matches the target.
pub fn accuracy(model: &LogRegModel, x: &DenseMatrix, targets: &Targets) -> Result<f64> {
    let Targets::Single { ids, .. } = targets else {
        return Err(DgiError::invalid("accuracy is defined for single-label targets; use micro_f1"));
    };
    if ids.is_empty() {
        return Err(DgiError::invalid("accuracy over an empty split"));
    }
    let pred = model.predict_class(x)?;
    if pred.len() != ids.len() {
        return Err(DgiError::dims("accuracy", format!("{} rows for {} targets", pred.len(), ids.len())));
    }
    Ok(pred.iter().zip(ids).filter(|(p, t)| p == t).count() as f64 / ids.len() as f64)
}

/// F1 pooled over every (node, label) decision.
pub fn micro_f1(model: &LogRegModel, x: &DenseMatrix, targets: &Targets) -> Result<f64> {
    if targets.is_empty() {
        return Err(DgiError::invalid("micro-F1 over an empty split"));
    }
    let pred = model.decisions(x)?;
    micro_f1_from_decisions(&pred, &targets.indicator())
}

pub fn micro_f1_from_decisions(pred: &DenseMatrix, truth: &DenseMatrix) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(DgiError::dims("micro_f1", format!("{:?} vs {:?}", pred.shape(), truth.shape())));
    }
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&p, &t) in pred.as_slice().iter().zip(truth.as_slice()) {
        match (p > 0.5, t > 0.5) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fnn;
    Ok(if denom == 0 { 1.0 } else { 2.0 * tp as f64 / denom as f64 })
}
