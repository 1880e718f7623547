use alloc::vec;
use alloc::vec::Vec;

use super::{map_indices, BlockKind, BlockTriKKT};
use crate::error::{check_len, Error, Result};
use crate::linalg::{SparseLu, SparseMatrix};
use crate::timedisc::Dims;

/// Factorizations of the diagonal blocks of a [`BlockTriKKT`].
///
/// Each block is solved by structured elimination: the continuity rows give `v` directly,
/// the remaining `(u, z, λ)` saddle-point system `[[Q^u, 0, Kᵀ], [0, Q^z, Bᵀ], [K, B, 0]]`
/// is solved with a sparse LU, and `μ` is recovered from the `v` rows.
#[derive(Debug, Clone)]
pub struct DiagFactors {
    /// One factorization per step `i = 0..N−1`.
    saddle: Vec<SparseLu>,
}

fn saddle_matrix(a: &BlockTriKKT, i: usize) -> SparseMatrix {
    let Dims { nu, nz, .. } = a.dims();
    let s = a.stages();
    let mut t = Vec::new();
    let (zo, lo) = (nu, nu + nz);
    t.extend(s.qu[i].triplets());
    t.extend(s.qz[i].triplets().map(|(r, c, v)| (zo + r, zo + c, v)));
    for (r, c, v) in s.k[i].triplets() {
        t.push((lo + r, c, v));
        t.push((c, lo + r, v));
    }
    for (r, c, v) in s.b[i].triplets() {
        t.push((lo + r, zo + c, v));
        t.push((zo + c, lo + r, v));
    }
    SparseMatrix::from_triplets(2 * nu + nz, 2 * nu + nz, &t)
}

/// Factors every diagonal block; `SingularBlock(j)` names the first block that fails.
pub fn factor_diagonal(a: &BlockTriKKT) -> Result<DiagFactors> {
    let n = a.dims().n_steps;
    let results = map_indices(n, |i| SparseLu::factor(&saddle_matrix(a, i)));
    let mut saddle = Vec::with_capacity(n);
    for (i, r) in results.into_iter().enumerate() {
        saddle.push(r.map_err(|_| Error::SingularBlock(i))?);
    }
    Ok(DiagFactors { saddle })
}

impl DiagFactors {
    pub fn n_steps(&self) -> usize {
        self.saddle.len()
    }

    /// Solves `D_j w = r` for block-local vectors.
    pub fn solve_block(&self, a: &BlockTriKKT, j: usize, r: &[f64], w: &mut [f64]) {
        let Dims { nu, nz, .. } = a.dims();
        let s = a.stages();
        match a.block_kind(j) {
            BlockKind::First => self.saddle[0].solve_into(r, w),
            BlockKind::Interior => {
                let (v, rest) = w.split_at_mut(nu);
                for k in 0..nu {
                    v[k] = -r[2 * nu + nz + k];
                }
                let mut rhs = vec![0.0; 2 * nu + nz];
                rhs[..nu + nz].copy_from_slice(&r[nu..2 * nu + nz]);
                rhs[nu + nz..].copy_from_slice(&r[3 * nu + nz..]);
                s.c[j].mul_add_into(-1.0, v, &mut rhs[nu + nz..]);
                let mut sol = vec![0.0; 2 * nu + nz];
                self.saddle[j].solve_into(&rhs, &mut sol);
                let (uz, rest) = rest.split_at_mut(nu + nz);
                let (mu, lam) = rest.split_at_mut(nu);
                uz.copy_from_slice(&sol[..nu + nz]);
                lam.copy_from_slice(&sol[nu + nz..]);
                for k in 0..nu {
                    mu[k] = -r[k];
                }
                s.qv[j - 1].mul_add_into(1.0, v, mu);
                s.c[j].mul_t_add_into(1.0, lam, mu);
            }
            BlockKind::Last => {
                let (v, mu) = w.split_at_mut(nu);
                for k in 0..nu {
                    v[k] = -r[nu + k];
                    mu[k] = -r[k];
                }
                s.qv[j - 1].mul_add_into(1.0, v, mu);
            }
        }
    }

    /// `D⁻¹ r` for a global vector.
    pub fn solve(&self, a: &BlockTriKKT, r: &[f64]) -> Result<Vec<f64>> {
        check_len(a.layout().len(), r.len())?;
        let mut w = vec![0.0; r.len()];
        let lay = *a.layout();
        super::for_each_segment(&mut w, a.block_sizes(), |j, seg| {
            self.solve_block(a, j, &r[lay.block_range(j)], seg)
        });
        Ok(w)
    }
}
