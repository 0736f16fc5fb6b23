use std::fmt::Write as _;

use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Shannon entropy (nats) of each row of `|z|` normalized to sum to one.
/// All-zero rows have entropy 0.
pub fn attention_entropy<T: Scalar>(z: &DenseMatrix<T>) -> Vec<T> {
    z.row_iter()
        .map(|row| {
            let total: T = row.iter().map(|v| v.abs()).sum();
            if total == T::zero() {
                return T::zero();
            }
            row.iter()
                .map(|v| v.abs() / total)
                .filter(|&p| p > T::zero())
                .map(|p| -p * p.ln())
                .sum()
        })
        .collect()
}

pub fn mean_entropy<T: Scalar>(z: &DenseMatrix<T>) -> T {
    let h = attention_entropy(z);
    h.iter().copied().sum::<T>() / T::of_usize(h.len())
}

/// Fraction of entries with `|z| < threshold`.
pub fn near_zero_fraction<T: Scalar>(z: &DenseMatrix<T>, threshold: T) -> f64 {
    let s = z.as_slice();
    s.iter().filter(|v| v.abs() < threshold).count() as f64 / s.len() as f64
}

/// `row,entropy` CSV.
pub fn entropy_csv<T: Scalar>(entropy: &[T]) -> String {
    let mut s = String::from("row,entropy\n");
    for (i, h) in entropy.iter().enumerate() {
        let _ = writeln!(s, "{i},{h}");
    }
    s
}
