use rand::Rng;

use super::matrix::DenseMatrix;

/// Glorot/Xavier uniform initialization on `[-a, a]`, `a = sqrt(6 / (rows + cols))`.
pub fn glorot_init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    DenseMatrix::new(rows, cols, data).expect("length matches shape")
}
