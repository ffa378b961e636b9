use std::fmt::Write as _;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{evaluate_split, EvalConfig};
use crate::error::{DgiError, Result};
use crate::graph::{Labels, Split};
use crate::model::readout;
use crate::tensor::ops::sigmoid;
use crate::tensor::DenseMatrix;

/// Two-sided Welch test result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Welch's unequal-variance t-test between two samples.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(DgiError::invalid("t-test needs at least two observations per population"));
    }
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, v)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    if se2 == 0.0 {
        let p = if ma == mb { 1.0 } else { 0.0 };
        let t = if ma == mb { 0.0 } else { (ma - mb).signum() * f64::INFINITY };
        return Ok(TTest { t, df: na + nb - 2.0, p });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| DgiError::invalid(format!("t distribution: {e}")))?;
    // sf(|t|) keeps precision in the far tail
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationConfig {
    /// Removal step; rows are emitted for k = 0, stride, 2·stride, ..., F′.
    pub stride: usize,
    pub eval: EvalConfig,
    /// Seed of every retrained classifier.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationRow {
    pub k: usize,
    /// Accuracy after removing the k most distinguishing dimensions.
    pub acc_p_up: f64,
    /// Accuracy after removing the k least distinguishing dimensions.
    pub acc_p_down: f64,
    pub pos_ok_up: usize,
    pub neg_ok_up: usize,
    pub pos_ok_down: usize,
    pub neg_ok_down: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub tests: Vec<TTest>,
    /// Dimensions from most to least distinguishing.
    pub order: Vec<usize>,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row_at(&self, k: usize) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// Columns: k, acc_p_up, acc_p_down, pos_ok, neg_ok (both under p↑), pos_ok_down, neg_ok_down.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("k\tacc_p_up\tacc_p_down\tpos_ok\tneg_ok\tpos_ok_down\tneg_ok_down\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}",
                r.k, r.acc_p_up, r.acc_p_down, r.pos_ok_up, r.neg_ok_up, r.pos_ok_down, r.neg_ok_down
            );
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn write_pvalues_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("rank\tdim\tt\tdf\tp\n");
        for (rank, &d) in self.order.iter().enumerate() {
            let t = self.tests[d];
            let _ = writeln!(out, "{rank}\t{d}\t{}\t{}\t{:e}", t.t, t.df, t.p);
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn column(h: &DenseMatrix, j: usize) -> Vec<f64> {
    h.iter_rows().map(|r| r[j]).collect()
}

/// Positive patches scored above 0.5 and negative patches below 0.5 when
/// the removed dimensions are zeroed in both the patches and the summary.
pub fn masked_discriminator_counts(
    h_pos: &DenseMatrix,
    h_neg: &DenseMatrix,
    summary: &[f64],
    w: &DenseMatrix,
    keep: &[bool],
) -> Result<(usize, usize)> {
    let s: Vec<f64> = summary.iter().zip(keep).map(|(&v, &k)| if k { v } else { 0.0 }).collect();
    let mut v = w.matvec(&s)?;
    v.iter_mut().zip(keep).for_each(|(x, &k)| {
        if !k {
            *x = 0.0
        }
    });
    let pos = h_pos.matvec(&v)?.into_iter().filter(|&l| l > 0.0).count();
    let neg = h_neg.matvec(&v)?.into_iter().filter(|&l| l < 0.0).count();
    Ok((pos, neg))
}

/// Ranks dimensions by how well they separate positive from negative
/// patch representations and measures downstream accuracy as they are
/// removed in either order.
pub fn dim_ablation(
    h_pos: &DenseMatrix,
    h_neg: &DenseMatrix,
    labels: &Labels,
    split: &Split,
    disc: &DenseMatrix,
    cfg: &AblationConfig,
) -> Result<AblationReport> {
    let f = h_pos.cols();
    if h_neg.cols() != f || disc.shape() != (f, f) {
        return Err(DgiError::dims(
            "dim_ablation",
            format!("positive {:?}, negative {:?}, W {:?}", h_pos.shape(), h_neg.shape(), disc.shape()),
        ));
    }
    if cfg.stride == 0 {
        return Err(DgiError::Config {
            field: "stride".into(),
            message: "must be at least 1".into(),
        });
    }
    let tests = (0..f)
        .map(|j| welch_t_test(&column(h_pos, j), &column(h_neg, j)))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..f).collect();
    order.sort_by(|&a, &b| {
        tests[a]
            .p
            .total_cmp(&tests[b].p)
            .then(tests[b].t.abs().total_cmp(&tests[a].t.abs()))
            .then(a.cmp(&b))
    });
    let summary = readout(h_pos)?;

    let mut rows = Vec::new();
    let mut k = 0;
    loop {
        let mut keep_up = vec![true; f];
        order[..k].iter().for_each(|&d| keep_up[d] = false);
        let mut keep_down = vec![true; f];
        order[f - k..].iter().for_each(|&d| keep_down[d] = false);
        let acc = |keep: &[bool]| -> Result<f64> {
            let cols: Vec<usize> = (0..f).filter(|&j| keep[j]).collect();
            evaluate_split(&select_cols(h_pos, &cols), labels, split, &cfg.eval, cfg.seed)
        };
        let (pos_ok_up, neg_ok_up) = masked_discriminator_counts(h_pos, h_neg, &summary, disc, &keep_up)?;
        let (pos_ok_down, neg_ok_down) = masked_discriminator_counts(h_pos, h_neg, &summary, disc, &keep_down)?;
        rows.push(AblationRow {
            k,
            acc_p_up: acc(&keep_up)?,
            acc_p_down: acc(&keep_down)?,
            pos_ok_up,
            neg_ok_up,
            pos_ok_down,
            neg_ok_down,
        });
        log::debug!("ablation k={k}: {:?}", rows.last());
        if k == f {
            break;
        }
        k = (k + cfg.stride).min(f);
    }
    Ok(AblationReport { tests, order, rows })
}

fn select_cols(h: &DenseMatrix, cols: &[usize]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(h.rows(), cols.len());
    for i in 0..h.rows() {
        let src = h.row(i);
        for (o, &c) in out.row_mut(i).iter_mut().zip(cols) {
            *o = src[c];
        }
    }
    out
}

/// Per-node discriminator probabilities `σ(h_iᵀ W s)` for positive and
/// negative patches, with `s` the readout of the positive patches.
pub fn discriminator_scores(h_pos: &DenseMatrix, h_neg: &DenseMatrix, w: &DenseMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = readout(h_pos)?;
    let v = w.matvec(&s)?;
    let pos = h_pos.matvec(&v)?.into_iter().map(sigmoid).collect();
    let neg = h_neg.matvec(&v)?.into_iter().map(sigmoid).collect();
    Ok((pos, neg))
}

/// Columns: node_id, pos_score, neg_score.
pub fn write_scores_tsv(path: impl AsRef<Path>, pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.len() != neg.len() {
        return Err(DgiError::dims("write_scores_tsv", format!("{} vs {} scores", pos.len(), neg.len())));
    }
    let mut out = String::from("node_id\tpos_score\tneg_score\n");
    for (i, (p, n)) in pos.iter().zip(neg).enumerate() {
        let _ = writeln!(out, "{i}\t{p:.9}\t{n:.9}");
    }
    std::fs::write(path, out)?;
    Ok(())
}
