use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};

/// A square linear map.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y`.
    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()>;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }
}

/// Approximate inverse applied to residuals. `apply` takes `&mut self` so that
/// implementations may keep statistics or scratch space.
pub trait Preconditioner {
    fn apply(&mut self, r: &[f64]) -> Result<Vec<f64>>;

    /// True when `apply` is not a fixed linear map (for example it runs an inner
    /// iterative solve to a tolerance).
    fn is_flexible(&self) -> bool;
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.cols(), x.len())?;
        check_len(self.rows(), y.len())?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.cols(), x.len())?;
        check_len(self.rows(), y.len())?;
        y.fill(0.0);
        self.mul_add_into(1.0, x, y);
        Ok(())
    }
}

/// Wraps a closure `(x, y) -> ()` writing `A x` into `y`.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.dim, x.len())?;
        check_len(self.dim, y.len())?;
        (self.f)(x, y);
        Ok(())
    }
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&mut self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }

    fn is_flexible(&self) -> bool {
        false
    }
}

/// Wraps a closure as a preconditioner with an explicit flexibility flag.
pub struct FnPreconditioner<F> {
    f: F,
    flexible: bool,
}

impl<F: FnMut(&[f64]) -> Result<Vec<f64>>> FnPreconditioner<F> {
    pub fn new(f: F, flexible: bool) -> Self {
        Self { f, flexible }
    }
}

impl<F: FnMut(&[f64]) -> Result<Vec<f64>>> Preconditioner for FnPreconditioner<F> {
    fn apply(&mut self, r: &[f64]) -> Result<Vec<f64>> {
        (self.f)(r)
    }

    fn is_flexible(&self) -> bool {
        self.flexible
    }
}
