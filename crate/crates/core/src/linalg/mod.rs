//! Dense and sparse kernels, pivoted LU, and banded factorization of small sparse blocks.

mod banded;
mod dense;
mod lu;
mod sparse;
mod vector;

pub use banded::{rcm_ordering, spd_check, SparseLu};
pub use dense::DenseMatrix;
pub use lu::{lu_factor, lu_factor_with_floor, lu_solve, LuFactors};
pub use sparse::SparseMatrix;
pub use vector::{axpy, dot, matvec, norm2};

pub(crate) use vector::{axpy_into, dot_raw, norm_raw, scale_into};
