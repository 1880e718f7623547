use alloc::vec::Vec;

use super::DenseMatrix;
use crate::error::{check_len, Result};

/// Euclidean inner product.
pub fn dot(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    Ok(dot_raw(x, y))
}

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    norm_raw(x)
}

/// Returns `alpha * x + y`.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_len(x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(a, b)| alpha * a + b).collect())
}

pub fn matvec(a: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.matvec(x)
}

#[inline]
pub(crate) fn dot_raw(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn norm_raw(x: &[f64]) -> f64 {
    libm::sqrt(dot_raw(x, x))
}

/// y += alpha * x
#[inline]
pub(crate) fn axpy_into(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn scale_into(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}
