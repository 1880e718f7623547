use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Result};
use crate::timedisc::{Dims, Primal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    U,
    V,
    Z,
    Lambda,
    Mu,
}

impl VarKind {
    pub const ALL: [VarKind; 5] = [VarKind::U, VarKind::V, VarKind::Z, VarKind::Lambda, VarKind::Mu];

    /// True for the kinds that live at time nodes (transferred by interpolation/injection).
    pub fn is_nodal(self) -> bool {
        !matches!(self, VarKind::Z)
    }
}

/// Index map of the block-tridiagonal ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub dims: Dims,
}

impl Layout {
    pub fn new(dims: Dims) -> Self {
        Self { dims }
    }

    pub fn width(&self, kind: VarKind) -> usize {
        if kind == VarKind::Z {
            self.dims.nz
        } else {
            self.dims.nu
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.dims.n_steps + 1
    }

    pub fn first_size(&self) -> usize {
        2 * self.dims.nu + self.dims.nz
    }

    pub fn interior_size(&self) -> usize {
        4 * self.dims.nu + self.dims.nz
    }

    pub fn block_size(&self, j: usize) -> usize {
        if j == 0 {
            self.first_size()
        } else if j < self.dims.n_steps {
            self.interior_size()
        } else {
            2 * self.dims.nu
        }
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        (0..self.n_blocks()).map(|j| self.block_size(j)).collect()
    }

    pub fn block_start(&self, j: usize) -> usize {
        if j == 0 {
            0
        } else {
            self.first_size() + (j - 1) * self.interior_size()
        }
    }

    pub fn block_range(&self, j: usize) -> core::ops::Range<usize> {
        let s = self.block_start(j);
        s..s + self.block_size(j)
    }

    pub fn len(&self) -> usize {
        self.dims.kkt_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Block index and in-block offset of the variable `(kind, i)`, `i` in `1..=N`.
    pub fn locate(&self, kind: VarKind, i: usize) -> (usize, usize) {
        let (nu, nz, n) = (self.dims.nu, self.dims.nz, self.dims.n_steps);
        debug_assert!(i >= 1 && i <= n);
        match kind {
            VarKind::U if i == 1 => (0, 0),
            VarKind::Z if i == 1 => (0, nu),
            VarKind::Lambda if i == 1 => (0, nu + nz),
            VarKind::U => (i - 1, nu),
            VarKind::Z => (i - 1, 2 * nu),
            VarKind::Lambda => (i - 1, 3 * nu + nz),
            VarKind::V => (i, 0),
            VarKind::Mu if i == n => (i, nu),
            VarKind::Mu => (i, 2 * nu + nz),
        }
    }

    /// Global offset of `(kind, i)`.
    pub fn offset(&self, kind: VarKind, i: usize) -> usize {
        let (b, o) = self.locate(kind, i);
        self.block_start(b) + o
    }

    pub fn range(&self, kind: VarKind, i: usize) -> core::ops::Range<usize> {
        let o = self.offset(kind, i);
        o..o + self.width(kind)
    }

    /// Offset in the clustered ordering `[u₁, v₁, …, u_N, v_N, z₁ … z_N, λ₁, μ₁, …, λ_N, μ_N]`.
    pub fn clustered_offset(&self, kind: VarKind, i: usize) -> usize {
        let (nu, nz, n) = (self.dims.nu, self.dims.nz, self.dims.n_steps);
        let dual = 2 * n * nu + n * nz;
        match kind {
            VarKind::U => (i - 1) * 2 * nu,
            VarKind::V => (i - 1) * 2 * nu + nu,
            VarKind::Z => 2 * n * nu + (i - 1) * nz,
            VarKind::Lambda => dual + (i - 1) * 2 * nu,
            VarKind::Mu => dual + (i - 1) * 2 * nu + nu,
        }
    }

    /// Packs primal and dual parts into one vector in block-tridiagonal order.
    pub fn pack(&self, x: &Primal, y: &Dual) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let (nu, nz) = (self.dims.nu, self.dims.nz);
        for i in 1..=self.dims.n_steps {
            let ru = (i - 1) * nu..i * nu;
            let rz = (i - 1) * nz..i * nz;
            out[self.range(VarKind::U, i)].copy_from_slice(&x.u[ru.clone()]);
            out[self.range(VarKind::V, i)].copy_from_slice(&x.v[ru.clone()]);
            out[self.range(VarKind::Z, i)].copy_from_slice(&x.z[rz]);
            out[self.range(VarKind::Lambda, i)].copy_from_slice(&y.lambda[ru.clone()]);
            out[self.range(VarKind::Mu, i)].copy_from_slice(&y.mu[ru]);
        }
        out
    }

    pub fn unpack(&self, w: &[f64]) -> (Primal, Dual) {
        let mut x = Primal::zeros(self.dims);
        let mut y = Dual::zeros(self.dims);
        let (nu, nz) = (self.dims.nu, self.dims.nz);
        for i in 1..=self.dims.n_steps {
            let ru = (i - 1) * nu..i * nu;
            x.u[ru.clone()].copy_from_slice(&w[self.range(VarKind::U, i)]);
            x.v[ru.clone()].copy_from_slice(&w[self.range(VarKind::V, i)]);
            x.z[(i - 1) * nz..i * nz].copy_from_slice(&w[self.range(VarKind::Z, i)]);
            y.lambda[ru.clone()].copy_from_slice(&w[self.range(VarKind::Lambda, i)]);
            y.mu[ru].copy_from_slice(&w[self.range(VarKind::Mu, i)]);
        }
        (x, y)
    }
}

/// Multipliers: `λ_{i+1}` for the dynamics constraint of step `i`, `μ_{i+1}` for the
/// continuity constraint `u_{i+1} − v_{i+1} = 0`. Stored flat, node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub dims: Dims,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl Dual {
    pub fn zeros(dims: Dims) -> Self {
        let n = dims.n_steps * dims.nu;
        Self { dims, lambda: vec![0.0; n], mu: vec![0.0; n] }
    }

    pub fn lambda_at(&self, i: usize) -> &[f64] {
        let nu = self.dims.nu;
        &self.lambda[(i - 1) * nu..i * nu]
    }

    pub fn mu_at(&self, i: usize) -> &[f64] {
        let nu = self.dims.nu;
        &self.mu[(i - 1) * nu..i * nu]
    }

    pub fn dot(&self, o: &Dual) -> f64 {
        crate::linalg::dot_raw(&self.lambda, &o.lambda) + crate::linalg::dot_raw(&self.mu, &o.mu)
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn axpy(&mut self, alpha: f64, o: &Dual) {
        crate::linalg::axpy_into(alpha, &o.lambda, &mut self.lambda);
        crate::linalg::axpy_into(alpha, &o.mu, &mut self.mu);
    }
}

fn permute(x: &[f64], dims: Dims, to_ordered: bool) -> Result<Vec<f64>> {
    let lay = Layout::new(dims);
    check_len(lay.len(), x.len())?;
    let mut out = vec![0.0; x.len()];
    for kind in VarKind::ALL {
        let w = lay.width(kind);
        for i in 1..=dims.n_steps {
            let o = lay.offset(kind, i);
            let c = lay.clustered_offset(kind, i);
            if to_ordered {
                out[o..o + w].copy_from_slice(&x[c..c + w]);
            } else {
                out[c..c + w].copy_from_slice(&x[o..o + w]);
            }
        }
    }
    Ok(out)
}

/// Clustered ordering → block-tridiagonal ordering.
pub fn from_clustered(x: &[f64], nu: usize, nz: usize, n: usize) -> Result<Vec<f64>> {
    permute(x, Dims { n_steps: n, nu, nz }, true)
}

/// Block-tridiagonal ordering → clustered ordering.
pub fn to_clustered(x: &[f64], nu: usize, nz: usize, n: usize) -> Result<Vec<f64>> {
    permute(x, Dims { n_steps: n, nu, nz }, false)
}
