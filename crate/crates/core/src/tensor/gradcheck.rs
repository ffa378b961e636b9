use super::matrix::DenseMatrix;
use crate::error::{DgiError, Result};

/// `|analytic - numeric| / max(1e-12, |analytic| + |numeric|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-12)
}

/// Compares analytic gradients against central differences.
///
/// `eval` maps a full set of parameter values to `(loss, gradients)`; the
/// gradient list must mirror `params` shape-for-shape. Returns the largest
/// relative error over all coordinates.
pub fn grad_check<F>(mut eval: F, params: &[DenseMatrix], h: f64) -> Result<f64>
where
    F: FnMut(&[DenseMatrix]) -> (f64, Vec<DenseMatrix>),
{
    if !(h.is_finite() && h > 0.0) {
        return Err(DgiError::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let (loss, analytic) = eval(params);
    if !loss.is_finite() {
        return Err(DgiError::NonFinite("grad_check loss"));
    }
    if analytic.len() != params.len()
        || analytic.iter().zip(params).any(|(g, p)| g.shape() != p.shape())
    {
        return Err(DgiError::dims("grad_check", "gradient shapes do not mirror parameters"));
    }

    let mut work = params.to_vec();
    let mut worst = 0.0_f64;
    for (p, grad) in analytic.iter().enumerate() {
        for idx in 0..work[p].len() {
            let orig = work[p].as_slice()[idx];
            work[p].as_mut_slice()[idx] = orig + h;
            let plus = eval(&work).0;
            work[p].as_mut_slice()[idx] = orig - h;
            let minus = eval(&work).0;
            work[p].as_mut_slice()[idx] = orig;
            if !(plus.is_finite() && minus.is_finite()) {
                return Err(DgiError::NonFinite("grad_check loss"));
            }
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(relative_error(grad.as_slice()[idx], numeric));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(p: &[DenseMatrix]) -> (f64, Vec<DenseMatrix>) {
        // L = Σ (3 w² - 2 w)
        let loss = p[0].as_slice().iter().map(|w| 3.0 * w * w - 2.0 * w).sum();
        (loss, vec![p[0].map(|w| 6.0 * w - 2.0)])
    }

    #[test]
    fn quadratic_is_exact() {
        let w = DenseMatrix::from_rows(&[[0.3, -1.2], [2.0, 0.7]]).unwrap();
        let err = grad_check(quadratic, &[w], 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn rejects_zero_step() {
        let w = DenseMatrix::scalar(1.0);
        assert!(matches!(
            grad_check(quadratic, &[w], 0.0),
            Err(DgiError::InvalidArgument(_))
        ));
    }

    #[test]
    fn rejects_non_finite_loss() {
        let w = DenseMatrix::scalar(1.0);
        let r = grad_check(|p| (f64::NAN, vec![p[0].clone()]), &[w], 1e-5);
        assert!(matches!(r, Err(DgiError::NonFinite(_))));
    }

    #[test]
    fn detects_wrong_gradient() {
        let w = DenseMatrix::scalar(0.5);
        let err = grad_check(|p| (p[0].scalar_value().powi(2), vec![DenseMatrix::scalar(0.0)]), &[w], 1e-5)
            .unwrap();
        assert!(err > 0.5);
    }
}
