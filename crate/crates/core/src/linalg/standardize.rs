use super::DenseMatrix;
use crate::error::{Error, Result};

/// Columns whose population σ falls below this are treated as constant.
pub const DEFAULT_SIGMA_TOL: f64 = 1e-12;

/// Per-column moments gathered while standardizing.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub means: Vec<f64>,
    /// Population standard deviations (divide by N).
    pub stds: Vec<f64>,
    /// `stds[j] < sigma_tol`.
    pub constant_mask: Vec<bool>,
}

impl ColumnStats {
    pub fn constant_count(&self) -> usize {
        self.constant_mask.iter().filter(|&&c| c).count()
    }
}

/// Centers and scales every column to zero mean and unit population variance.
///
/// With population σ the standardized columns satisfy `r(X, Y) = X̃·Ỹ / N`
/// exactly, which is what the correlation kernel relies on. Constant columns
/// become all-zeros, so every correlation involving them is exactly 0.
pub fn standardize_columns(m: &DenseMatrix, sigma_tol: f64) -> Result<(DenseMatrix, ColumnStats)> {
    if m.is_empty() {
        return Err(Error::Empty { what: "matrix" });
    }
    if sigma_tol.is_nan() || sigma_tol < 0.0 {
        return Err(Error::invalid(format!("sigma_tol must be >= 0, got {sigma_tol}")));
    }
    let (n, cols) = m.shape();
    let inv_n = 1.0 / n as f64;

    let means: Vec<f64> = m.column_sums().into_iter().map(|s| s * inv_n).collect();
    // Two-pass variance: stable for large offsets.
    let mut sq = vec![0.0f64; cols];
    for r in 0..n {
        for ((acc, &v), &mu) in sq.iter_mut().zip(m.row(r)).zip(&means) {
            let d = f64::from(v) - mu;
            *acc += d * d;
        }
    }
    let stds: Vec<f64> = sq.into_iter().map(|s| (s * inv_n).sqrt()).collect();
    let constant_mask: Vec<bool> = stds.iter().map(|&s| s < sigma_tol).collect();
    let scale: Vec<f64> = stds
        .iter()
        .zip(&constant_mask)
        .map(|(&s, &c)| if c { 0.0 } else { 1.0 / s })
        .collect();

    let mut out = Vec::with_capacity(n * cols);
    for r in 0..n {
        out.extend(
            m.row(r)
                .iter()
                .zip(&means)
                .zip(&scale)
                .map(|((&v, &mu), &k)| ((f64::from(v) - mu) * k) as f32),
        );
    }
    Ok((
        DenseMatrix::from_parts_unchecked(n, cols, out),
        ColumnStats {
            means,
            stds,
            constant_mask,
        },
    ))
}
