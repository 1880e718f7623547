use alloc::vec::Vec;

use super::{BlockTriKKT, Layout, VarKind};
use crate::error::{check_len, Result};

/// Right-hand side in block-tridiagonal order.
pub type KktRhs = Vec<f64>;

/// Per-step data of the linear-quadratic subproblem, each entry indexed by step `i = 0..N−1`:
/// targets `b₁` (for `u_{i+1}`), `b₁ᵛ` (for `v_{i+1}`), `b₂` (for `z_{i+1}`), dynamics
/// residuals `b₃` and continuity residuals `b₄`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RhsData {
    pub b1: Vec<Vec<f64>>,
    pub b1v: Vec<Vec<f64>>,
    pub b2: Vec<Vec<f64>>,
    pub b3: Vec<Vec<f64>>,
    pub b4: Vec<Vec<f64>>,
}

impl RhsData {
    pub fn zeros(n: usize, nu: usize, nz: usize) -> Self {
        let z = |w: usize| alloc::vec![alloc::vec![0.0; w]; n];
        Self { b1: z(nu), b1v: z(nu), b2: z(nz), b3: z(nu), b4: z(nu) }
    }
}

/// Weighted targets on the primal rows, residuals on the constraint rows.
pub fn assemble_rhs(a: &BlockTriKKT, data: &RhsData) -> Result<KktRhs> {
    let lay: &Layout = a.layout();
    let d = a.dims();
    let s = a.stages();
    for v in [&data.b1, &data.b1v, &data.b2, &data.b3, &data.b4] {
        check_len(d.n_steps, v.len())?;
    }
    let mut out = alloc::vec![0.0; lay.len()];
    for i in 0..d.n_steps {
        for (v, w) in [(&data.b1[i], d.nu), (&data.b1v[i], d.nu), (&data.b2[i], d.nz), (&data.b3[i], d.nu), (&data.b4[i], d.nu)] {
            check_len(w, v.len())?;
        }
        let node = i + 1;
        s.qu[i].mul_add_into(1.0, &data.b1[i], &mut out[lay.range(VarKind::U, node)]);
        s.qv[i].mul_add_into(1.0, &data.b1v[i], &mut out[lay.range(VarKind::V, node)]);
        s.qz[i].mul_add_into(1.0, &data.b2[i], &mut out[lay.range(VarKind::Z, node)]);
        out[lay.range(VarKind::Lambda, node)].copy_from_slice(&data.b3[i]);
        out[lay.range(VarKind::Mu, node)].copy_from_slice(&data.b4[i]);
    }
    Ok(out)
}
