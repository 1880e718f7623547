//! Block smoothers over the splitting `A = D − L − U` of a [`BlockTriKKT`].
//!
//! Block Jacobi touches every block row independently and is the multigrid smoother.
//! The Gauss-Seidel variants sweep through time and are used as preconditioners.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{check_len, Error, Result};
use crate::kkt::{for_each_segment, BlockTriKKT, DiagFactors};
use crate::krylov::{LinearOperator, Preconditioner};

pub const DEFAULT_SWEEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SmootherKind {
    Jacobi,
    Fgs,
    Bgs,
    Sgs,
}

impl SmootherKind {
    pub const ALL: [SmootherKind; 4] = [Self::Jacobi, Self::Fgs, Self::Bgs, Self::Sgs];

    pub fn name(self) -> &'static str {
        match self {
            Self::Jacobi => "jacobi",
            Self::Fgs => "fgs",
            Self::Bgs => "bgs",
            Self::Sgs => "sgs",
        }
    }
}

impl fmt::Display for SmootherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmootherKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("smoother `{s}`: expected one of jacobi, fgs, bgs, sgs")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig {
    pub kind: SmootherKind,
    pub sweeps: usize,
    /// Jacobi damping; 1 is the plain `D⁻¹` smoother.
    pub damping: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self { kind: SmootherKind::Jacobi, sweeps: DEFAULT_SWEEPS, damping: 1.0 }
    }
}

fn residual(a: &BlockTriKKT, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut r = a.apply(x)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(r)
}

/// `sweeps` rounds of `x ← x + ω D⁻¹(b − A x)`.
pub fn jacobi_apply(a: &BlockTriKKT, f: &DiagFactors, b: &[f64], x: &[f64], sweeps: usize, damping: f64) -> Result<Vec<f64>> {
    check_len(a.dim(), b.len())?;
    check_len(a.dim(), x.len())?;
    let mut x = x.to_vec();
    let lay = *a.layout();
    for _ in 0..sweeps {
        let r = residual(a, b, &x)?;
        let mut dx = vec![0.0; x.len()];
        for_each_segment(&mut dx, a.block_sizes(), |j, seg| f.solve_block(a, j, &r[lay.block_range(j)], seg));
        crate::linalg::axpy_into(damping, &dx, &mut x);
    }
    Ok(x)
}

/// Solves `(D − L) δ = r` by forward block substitution.
pub fn forward_substitution(a: &BlockTriKKT, f: &DiagFactors, r: &[f64]) -> Result<Vec<f64>> {
    check_len(a.dim(), r.len())?;
    let lay = *a.layout();
    let mut d = vec![0.0; r.len()];
    for j in 0..a.n_blocks() {
        let mut rj = r[lay.block_range(j)].to_vec();
        if j > 0 {
            let (prev, cur) = d.split_at_mut(lay.block_start(j));
            a.lower_apply_add(j, &prev[lay.block_range(j - 1)], &mut rj, -1.0);
            f.solve_block(a, j, &rj, &mut cur[..lay.block_size(j)]);
        } else {
            f.solve_block(a, j, &rj, &mut d[lay.block_range(0)]);
        }
    }
    Ok(d)
}

/// Solves `(D − U) δ = r` by backward block substitution.
pub fn backward_substitution(a: &BlockTriKKT, f: &DiagFactors, r: &[f64]) -> Result<Vec<f64>> {
    check_len(a.dim(), r.len())?;
    let lay = *a.layout();
    let nb = a.n_blocks();
    let mut d = vec![0.0; r.len()];
    for j in (0..nb).rev() {
        let mut rj = r[lay.block_range(j)].to_vec();
        let (cur, next) = d.split_at_mut(lay.block_start(j) + lay.block_size(j));
        if j + 1 < nb {
            a.upper_apply_add(j, &next[..lay.block_size(j + 1)], &mut rj, -1.0);
        }
        f.solve_block(a, j, &rj, &mut cur[lay.block_start(j)..]);
    }
    Ok(d)
}

/// `P_sgs⁻¹ r = (D − U)⁻¹ D (D − L)⁻¹ r`.
pub fn sgs_precondition(a: &BlockTriKKT, f: &DiagFactors, r: &[f64]) -> Result<Vec<f64>> {
    let y = forward_substitution(a, f, r)?;
    let dy = a.apply_part(crate::kkt::Part::Diagonal, &y)?;
    backward_substitution(a, f, &dy)
}

/// `P⁻¹ r` for the stationary preconditioner of the given kind (one Jacobi sweep is `D⁻¹`).
pub fn precondition(kind: SmootherKind, a: &BlockTriKKT, f: &DiagFactors, r: &[f64]) -> Result<Vec<f64>> {
    match kind {
        SmootherKind::Jacobi => f.solve(a, r),
        SmootherKind::Fgs => forward_substitution(a, f, r),
        SmootherKind::Bgs => backward_substitution(a, f, r),
        SmootherKind::Sgs => sgs_precondition(a, f, r),
    }
}

fn stationary(kind: SmootherKind, a: &BlockTriKKT, f: &DiagFactors, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_len(a.dim(), x.len())?;
    let r = residual(a, b, x)?;
    let d = precondition(kind, a, f, &r)?;
    let mut x = x.to_vec();
    crate::linalg::axpy_into(1.0, &d, &mut x);
    Ok(x)
}

/// One forward Gauss-Seidel step `x ← x + (D − L)⁻¹(b − A x)`.
pub fn fgs_apply(a: &BlockTriKKT, f: &DiagFactors, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    stationary(SmootherKind::Fgs, a, f, b, x)
}

pub fn bgs_apply(a: &BlockTriKKT, f: &DiagFactors, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    stationary(SmootherKind::Bgs, a, f, b, x)
}

pub fn sgs_apply(a: &BlockTriKKT, f: &DiagFactors, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    stationary(SmootherKind::Sgs, a, f, b, x)
}

/// Applies a configured smoother: `sweeps` stationary steps of the chosen kind.
pub fn smooth(cfg: &SmootherConfig, a: &BlockTriKKT, f: &DiagFactors, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if cfg.kind == SmootherKind::Jacobi {
        return jacobi_apply(a, f, b, x, cfg.sweeps, cfg.damping);
    }
    let mut x = x.to_vec();
    for _ in 0..cfg.sweeps {
        x = stationary(cfg.kind, a, f, b, &x)?;
    }
    Ok(x)
}

/// A stationary block preconditioner as a fixed linear map.
pub struct BlockPreconditioner<'a> {
    pub kind: SmootherKind,
    pub op: &'a BlockTriKKT,
    pub factors: &'a DiagFactors,
}

impl Preconditioner for BlockPreconditioner<'_> {
    fn apply(&mut self, r: &[f64]) -> Result<Vec<f64>> {
        precondition(self.kind, self.op, self.factors, r)
    }

    fn is_flexible(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkt::assemble::tests::{random_vec, vdp_operator};
    use crate::kkt::{factor_diagonal, Part};
    use crate::linalg::{dot_raw, lu_factor, norm_raw, DenseMatrix};
    use crate::timedisc::tests::scalar_problem;
    use crate::timedisc::{forward_solve as fwd, Primal, TimeGrid};

    fn lq_operator(n: usize) -> BlockTriKKT {
        let g = TimeGrid::new(1.0, n).unwrap();
        let p = scalar_problem(1.0, n);
        let traj = fwd(&p, &vec![vec![0.0]; n], &g, 1e-12).unwrap();
        BlockTriKKT::from_problem(&p, &Primal::from_trajectory(&traj), g.dt).unwrap()
    }

    fn dense_of(n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            for (i, v) in f(&e).into_iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    fn spectral_radius(m: &DenseMatrix) -> f64 {
        let n = m.rows();
        let na = nalgebra::DMatrix::from_row_slice(n, n, m.as_slice());
        na.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn fixed_point_consistency() {
        let (_, a) = vdp_operator(6);
        let f = factor_diagonal(&a).unwrap();
        let x = random_vec(a.dim(), 4);
        let b = a.apply(&x).unwrap();
        let cands = [
            jacobi_apply(&a, &f, &b, &x, 3, 1.0).unwrap(),
            fgs_apply(&a, &f, &b, &x).unwrap(),
            bgs_apply(&a, &f, &b, &x).unwrap(),
            sgs_apply(&a, &f, &b, &x).unwrap(),
        ];
        let scale = norm_raw(&x);
        for y in cands {
            let err = y.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-14 * scale.max(1.0) * 10.0, "{err}");
        }
    }

    #[test]
    fn block_diagonal_part_is_inverted_exactly() {
        // Even at N = 1 the first and last blocks share a continuity coupling, so the check is
        // on the diagonal part alone.
        let a = lq_operator(1);
        let f = factor_diagonal(&a).unwrap();
        let x = random_vec(a.dim(), 8);
        let dx = a.apply_part(Part::Diagonal, &x).unwrap();
        let back = precondition(SmootherKind::Jacobi, &a, &f, &dx).unwrap();
        for (p, q) in back.iter().zip(&x) {
            assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn preconditioners_match_dense_formulas() {
        let a = lq_operator(3);
        let n = a.dim();
        let f = factor_diagonal(&a).unwrap();
        let d = dense_of(n, |x| a.apply_part(Part::Diagonal, x).unwrap());
        let l = dense_of(n, |x| a.apply_part(Part::Lower, x).unwrap());
        let u = dense_of(n, |x| a.apply_part(Part::Upper, x).unwrap());
        let sub = |p: &DenseMatrix, q: &DenseMatrix| {
            DenseMatrix::from_fn(n, n, |i, j| p.get(i, j) - q.get(i, j))
        };
        let dl = sub(&d, &l);
        let du = sub(&d, &u);
        let p_sgs = dl.matmul(&lu_factor(&d).unwrap().inverse().unwrap()).unwrap().matmul(&du).unwrap();
        let r = random_vec(n, 11);
        let pairs = [
            (SmootherKind::Jacobi, d),
            (SmootherKind::Fgs, dl),
            (SmootherKind::Bgs, du),
            (SmootherKind::Sgs, p_sgs),
        ];
        for (kind, p) in pairs {
            let expect = lu_factor(&p).unwrap().solve(&r).unwrap();
            let got = precondition(kind, &a, &f, &r).unwrap();
            for (g, e) in got.iter().zip(&expect) {
                assert!((g - e).abs() <= 1e-10 * (1.0 + e.abs()), "{kind}");
            }
        }
    }

    #[test]
    fn preconditioners_are_linear() {
        let (_, a) = vdp_operator(5);
        let f = factor_diagonal(&a).unwrap();
        let (x, y) = (random_vec(a.dim(), 1), random_vec(a.dim(), 2));
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| 2.0 * p - 3.0 * q).collect();
        for kind in SmootherKind::ALL {
            let (px, py) = (precondition(kind, &a, &f, &x).unwrap(), precondition(kind, &a, &f, &y).unwrap());
            let pc = precondition(kind, &a, &f, &combo).unwrap();
            let scale = norm_raw(&pc).max(1.0);
            for k in 0..pc.len() {
                assert!((pc[k] - (2.0 * px[k] - 3.0 * py[k])).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn sgs_is_self_adjoint() {
        let (_, a) = vdp_operator(6);
        let f = factor_diagonal(&a).unwrap();
        let (x, y) = (random_vec(a.dim(), 5), random_vec(a.dim(), 6));
        let (px, py) = (sgs_precondition(&a, &f, &x).unwrap(), sgs_precondition(&a, &f, &y).unwrap());
        let (l, r) = (dot_raw(&px, &y), dot_raw(&x, &py));
        assert!((l - r).abs() <= 1e-10 * l.abs().max(1.0));
    }

    #[test]
    fn jacobi_contraction_matches_spectral_radius() {
        let a = lq_operator(8);
        let n = a.dim();
        let f = factor_diagonal(&a).unwrap();
        let it = dense_of(n, |e| {
            // Error propagation of one sweep with b = 0.
            jacobi_apply(&a, &f, &vec![0.0; n], e, 1, 1.0).unwrap()
        });
        let rho = spectral_radius(&it);
        let mut e = random_vec(n, 9);
        for _ in 0..200 {
            e = jacobi_apply(&a, &f, &vec![0.0; n], &e, 1, 1.0).unwrap();
            let s = norm_raw(&e);
            e.iter_mut().for_each(|v| *v /= s);
        }
        let m = 40;
        let e2 = jacobi_apply(&a, &f, &vec![0.0; n], &e, m, 1.0).unwrap();
        let rate = (norm_raw(&e2) / norm_raw(&e)).powf(1.0 / m as f64);
        assert!((rate - rho).abs() <= 0.1 * rho, "rate {rate} rho {rho}");
    }

    #[test]
    fn gauss_seidel_iteration_matrices_are_not_contractive() {
        use crate::kkt::assemble::tests::burgers_operator;
        for a in [vdp_operator(32).1, burgers_operator(8, 8).1] {
            let n = a.dim();
            let f = factor_diagonal(&a).unwrap();
            let zero = vec![0.0; n];
            let fgs = dense_of(n, |e| fgs_apply(&a, &f, &zero, e).unwrap());
            let bgs = dense_of(n, |e| bgs_apply(&a, &f, &zero, e).unwrap());
            let sgs = dense_of(n, |e| sgs_apply(&a, &f, &zero, e).unwrap());
            for m in [fgs, bgs, sgs] {
                assert!(spectral_radius(&m) > 1.0);
            }
        }
    }

    #[test]
    fn jacobi_is_deterministic() {
        let (_, a) = vdp_operator(16);
        let f = factor_diagonal(&a).unwrap();
        let b = random_vec(a.dim(), 3);
        let x0 = vec![0.0; a.dim()];
        let first = jacobi_apply(&a, &f, &b, &x0, 4, 1.0).unwrap();
        for _ in 0..3 {
            assert_eq!(jacobi_apply(&a, &f, &b, &x0, 4, 1.0).unwrap(), first);
        }
    }

    #[test]
    fn parses_kinds() {
        assert_eq!("SGS".parse::<SmootherKind>().unwrap(), SmootherKind::Sgs);
        assert!("x".parse::<SmootherKind>().is_err());
    }
}
