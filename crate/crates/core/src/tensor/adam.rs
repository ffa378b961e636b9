use super::matrix::DenseMatrix;
use super::Param;

/// Moment accumulators for [`adam_step`].
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
}

impl AdamState {
    /// Standard constants: β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Param>) -> Self {
        let shapes: Vec<_> = params.into_iter().map(Param::shape).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            first: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            second: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
        }
    }
}

/// One bias-corrected Adam update (descending the stored gradients), then
/// zeroes every gradient.
pub fn adam_step(params: &mut [&mut Param], state: &mut AdamState, lr: f64) {
    assert_eq!(params.len(), state.first.len(), "Adam state does not match parameter list");
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for ((p, m), v) in params.iter_mut().zip(&mut state.first).zip(&mut state.second) {
        let values = p.value.as_mut_slice();
        let grads = p.grad.as_slice();
        for (((w, &g), m), v) in values
            .iter_mut()
            .zip(grads)
            .zip(m.as_mut_slice())
            .zip(v.as_mut_slice())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
        p.zero_grad();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> Param {
        Param::new(DenseMatrix::scalar(v))
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = scalar_param(1.5);
        let mut st = AdamState::new([&p]);
        adam_step(&mut [&mut p], &mut st, 0.1);
        assert_eq!(p.value.scalar_value(), 1.5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar_param(0.0);
        let mut st = AdamState::new([&p]);
        p.grad = DenseMatrix::scalar(1.0);
        adam_step(&mut [&mut p], &mut st, 0.01);
        // m̂ = 1, v̂ = 1 → Δ = -lr / (1 + ε)
        assert!((p.value.scalar_value() + 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(p.grad.scalar_value(), 0.0);
    }

    #[test]
    fn zero_learning_rate_keeps_values() {
        let mut p = Param::new(DenseMatrix::from_rows(&[[1.0, -2.0]]).unwrap());
        let mut st = AdamState::new([&p]);
        p.grad = DenseMatrix::from_rows(&[[0.3, 4.0]]).unwrap();
        adam_step(&mut [&mut p], &mut st, 0.0);
        assert_eq!(p.value.as_slice(), &[1.0, -2.0]);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut p = scalar_param(0.0);
        let mut st = AdamState::new([&p]);
        for _ in 0..2000 {
            let w = p.value.scalar_value();
            p.grad = DenseMatrix::scalar(2.0 * (w - 3.0));
            adam_step(&mut [&mut p], &mut st, 0.01);
        }
        assert!((p.value.scalar_value() - 3.0).abs() < 1e-3, "{}", p.value.scalar_value());
    }
}
