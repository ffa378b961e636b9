use super::encoder::{backward_memo, encode_memo, FeatureMemo, PreparedGraph};
use super::DgiParams;
use crate::error::{DgiError, Result};
use crate::tensor::ops::{log_sigmoid, sigmoid, sigmoid_backward, sigmoid_vec};
use crate::tensor::{dot, DenseMatrix, Param};

/// Summary vector `σ(mean over rows of H)`.
pub fn readout(h: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(sigmoid_vec(&h.mean_rows()?))
}

/// Gradient w.r.t. `H` (with `rows` rows) given the summary `s` and `ds`.
pub fn readout_backward(s: &[f64], rows: usize, ds: &[f64]) -> DenseMatrix {
    crate::tensor::ops::mean_rows_backward(rows, &sigmoid_backward(s, ds))
}

/// `σ(hᵀ W s)`.
pub fn discriminate(h: &[f64], s: &[f64], w: &DenseMatrix) -> Result<f64> {
    if h.len() != w.rows() || s.len() != w.cols() {
        return Err(DgiError::dims(
            "discriminate",
            format!("h {} / s {} against W {:?}", h.len(), s.len(), w.shape()),
        ));
    }
    Ok(sigmoid(dot(h, &w.matvec(s)?)))
}

/// Pre-sigmoid scores `h_iᵀ W s` for every row of `H`.
pub fn bilinear_logits(h: &DenseMatrix, s: &[f64], w: &DenseMatrix) -> Result<Vec<f64>> {
    h.matvec(&w.matvec(s)?)
}

/// Mean binary cross-entropy objective over positive and negative logits
/// (to be maximized; always ≤ 0).
pub fn dgi_loss(pos_logits: &[f64], neg_logits: &[f64]) -> Result<f64> {
    let total = pos_logits.len() + neg_logits.len();
    if pos_logits.is_empty() || neg_logits.is_empty() {
        return Err(DgiError::invalid("objective needs positive and negative samples"));
    }
    let sum: f64 = pos_logits.iter().map(|&x| log_sigmoid(x)).sum::<f64>()
        + neg_logits.iter().map(|&x| log_sigmoid(-x)).sum::<f64>();
    Ok(sum / total as f64)
}

/// Objective on already encoded positive and negative patches.
///
/// Accumulates the gradient of `-L` into `disc` and returns
/// `(L, d(-L)/dH_pos, d(-L)/dH_neg)`; the positive gradient includes the
/// path through the summary.
pub fn contrast_and_grad(
    disc: &mut Param,
    h_pos: &DenseMatrix,
    h_neg: &DenseMatrix,
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    let s = readout(h_pos)?;
    let v = disc.value.matvec(&s)?;
    let pos = h_pos.matvec(&v)?;
    let neg = h_neg.matvec(&v)?;
    let loss = dgi_loss(&pos, &neg)?;
    let scale = 1.0 / (pos.len() + neg.len()) as f64;
    let dpos: Vec<f64> = pos.iter().map(|&x| -sigmoid(-x) * scale).collect();
    let dneg: Vec<f64> = neg.iter().map(|&x| sigmoid(x) * scale).collect();

    // d[i]·v + shift for every row i
    let outer = |d: &[f64], shift: Option<&[f64]>| {
        let mut m = DenseMatrix::zeros(d.len(), v.len());
        for (i, &g) in d.iter().enumerate() {
            let row = m.row_mut(i);
            match shift {
                Some(r) => row.iter_mut().zip(&v).zip(r).for_each(|((o, &vj), &rj)| *o = g * vj + rj),
                None => row.iter_mut().zip(&v).for_each(|(o, &vj)| *o = g * vj),
            }
        }
        m
    };
    let dh_neg = outer(&dneg, None);

    let mut dv = h_pos.matvec_t(&dpos)?;
    for (a, b) in dv.iter_mut().zip(h_neg.matvec_t(&dneg)?) {
        *a += b;
    }
    for (i, &g) in dv.iter().enumerate() {
        disc.grad.row_mut(i).iter_mut().zip(&s).for_each(|(o, &sj)| *o += g * sj);
    }
    let ds = disc.value.matvec_t(&dv)?;
    // readout_backward gives every row the same gradient
    let n = h_pos.rows() as f64;
    let shared: Vec<f64> = sigmoid_backward(&s, &ds).iter().map(|g| g / n).collect();
    let dh_pos = outer(&dpos, Some(&shared));
    Ok((loss, dh_pos, dh_neg))
}

/// Objective value `L` for a positive graph and one negative sample.
pub fn objective(params: &DgiParams, pos: &PreparedGraph, neg: &PreparedGraph) -> Result<f64> {
    let memo = FeatureMemo::default();
    let h = encode_memo(params, pos, &memo)?.0;
    let hn = encode_memo(params, neg, &memo)?.0;
    let s = readout(&h)?;
    dgi_loss(
        &bilinear_logits(&h, &s, &params.disc.value)?,
        &bilinear_logits(&hn, &s, &params.disc.value)?,
    )
}

/// Returns `L` and accumulates `d(-L)/dθ` into every parameter gradient.
pub fn objective_and_grad(params: &mut DgiParams, pos: &PreparedGraph, neg: &PreparedGraph) -> Result<f64> {
    let memo = FeatureMemo::default();
    let (h, cache) = encode_memo(params, pos, &memo)?;
    let (hn, cache_n) = encode_memo(params, neg, &memo)?;
    let (loss, dh, dhn) = contrast_and_grad(&mut params.disc, &h, &hn)?;
    backward_memo(params, pos, &cache, &dh, &memo)?;
    backward_memo(params, neg, &cache_n, &dhn, &memo)?;
    memo.flush(params)?;
    Ok(loss)
}
