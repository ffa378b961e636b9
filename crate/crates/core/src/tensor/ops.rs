//! Forward/backward pairs for the composites used by the encoders, readout
//! and discriminator. Each `*_backward` takes the upstream gradient and
//! returns the gradients of its inputs.

use super::matrix::DenseMatrix;
use crate::error::{DgiError, Result};

/// Logistic sigmoid, evaluated on the branch that cannot overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)` without cancellation for large |x|.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| sigmoid(v)).collect()
}

/// Given `y = σ(x)` and `dy`, returns `dx`.
pub fn sigmoid_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    y.iter().zip(dy).map(|(&s, &g)| g * s * (1.0 - s)).collect()
}

pub fn prelu(x: &DenseMatrix, slope: f64) -> DenseMatrix {
    x.map(|v| if v >= 0.0 { v } else { slope * v })
}

/// Returns `(dx, dslope)` for `y = prelu(x, slope)`.
pub fn prelu_backward(x: &DenseMatrix, slope: f64, dy: &DenseMatrix) -> Result<(DenseMatrix, f64)> {
    if x.shape() != dy.shape() {
        return Err(DgiError::dims(
            "prelu_backward",
            format!("{:?} vs {:?}", x.shape(), dy.shape()),
        ));
    }
    let mut dx = dy.clone();
    let mut dslope = 0.0;
    for (g, &v) in dx.as_mut_slice().iter_mut().zip(x.as_slice()) {
        if v < 0.0 {
            dslope += v * *g;
            *g *= slope;
        }
    }
    Ok((dx, dslope))
}

/// Returns `(da, db)` for `c = a · b`.
pub fn matmul_backward(
    a: &DenseMatrix,
    b: &DenseMatrix,
    dc: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    Ok((dc.matmul_nt(b)?, a.matmul_tn(dc)?))
}

/// Gradient of `mean_rows` for an input with `rows` rows: every row receives `dmean / rows`.
pub fn mean_rows_backward(rows: usize, dmean: &[f64]) -> DenseMatrix {
    let n = rows as f64;
    let row: Vec<f64> = dmean.iter().map(|g| g / n).collect();
    let mut out = DenseMatrix::zeros(rows, dmean.len());
    for i in 0..rows {
        out.row_mut(i).copy_from_slice(&row);
    }
    out
}

/// Splits the gradient of `[a ‖ b]` back into `(da, db)`.
pub fn concat_cols_backward(a_cols: usize, dout: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    dout.split_cols(a_cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{grad_check, relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn sigmoid_values_and_range() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        for x in [-700.0, -50.0, 50.0, 700.0] {
            let s = sigmoid(x);
            assert!(s.is_finite() && (0.0..=1.0).contains(&s));
            assert!(log_sigmoid(x).is_finite());
        }
        assert!((log_sigmoid(-700.0) + 700.0).abs() < 1e-12);
        assert!((log_sigmoid(2.0) - 0.880_797_077_977_882_3_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn prelu_definition() {
        let x = DenseMatrix::from_rows(&[[-2.0, 3.0]]).unwrap();
        assert_eq!(prelu(&x, 0.25).as_slice(), &[-0.5, 3.0]);
        let y = DenseMatrix::from_rows(&[[-2.0, 3.0, -0.1, 0.0]]).unwrap();
        assert_eq!(prelu(&y, 1.0), y);
    }

    #[test]
    fn prelu_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let rows = rng.gen_range(1..=8);
            let cols = rng.gen_range(1..=8);
            let x = random(rows, cols, &mut rng);
            let up = random(rows, cols, &mut rng);
            let slope = DenseMatrix::scalar(rng.gen_range(0.05..0.5));
            let err = grad_check(
                |p| {
                    let y = prelu(&p[0], p[1].scalar_value());
                    let loss = y.hadamard(&up).unwrap().as_slice().iter().sum();
                    let (dx, ds) = prelu_backward(&p[0], p[1].scalar_value(), &up).unwrap();
                    (loss, vec![dx, DenseMatrix::scalar(ds)])
                },
                &[x, slope],
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-6, "prelu rel error {err}");
        }
    }

    #[test]
    fn sigmoid_matmul_concat_mean_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = rng.gen_range(1..=8);
            let k = rng.gen_range(1..=8);
            let m = rng.gen_range(1..=8);
            let a = random(n, k, &mut rng);
            let b = random(k, m, &mut rng);
            let c = random(n, m, &mut rng);
            let w = random(1, 3 * m, &mut rng);
            // L = w · σ(mean_rows([a·b ‖ c ‖ 2.5·c]))
            let err = grad_check(
                |p| {
                    let ab = p[0].matmul(&p[1]).unwrap();
                    let scaled = p[2].scale(2.5);
                    let cat = ab.concat_cols(&p[2]).unwrap().concat_cols(&scaled).unwrap();
                    let mean = cat.mean_rows().unwrap();
                    let s = sigmoid_vec(&mean);
                    let loss: f64 = s.iter().zip(w.as_slice()).map(|(x, y)| x * y).sum();
                    let dmean = sigmoid_backward(&s, w.as_slice());
                    let dcat = mean_rows_backward(cat.rows(), &dmean);
                    let (dab, rest) = concat_cols_backward(m, &dcat).unwrap();
                    let (dc1, dc2) = concat_cols_backward(m, &rest).unwrap();
                    let dc = dc1.add(&dc2.scale(2.5)).unwrap();
                    let (da, db) = matmul_backward(&p[0], &p[1], &dab).unwrap();
                    (loss, vec![da, db, dc])
                },
                &[a, b, c],
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-6, "composite rel error {err}");
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 3.0) - 0.5).abs() < 1e-15);
    }
}
