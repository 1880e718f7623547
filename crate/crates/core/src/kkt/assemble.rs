use alloc::vec;
use alloc::vec::Vec;

use super::{for_each_segment, map_indices, Layout, VarKind};
use crate::error::{check_len, Error, Result};
use crate::krylov::LinearOperator;
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::timedisc::{stage_blocks, Dims, Primal, ProblemSpec};

/// Per-step linearization data: `K_i, C_i, B_i` and weights `Q^u_i, Q^v_i, Q^z_i`, `i = 0..N−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageBlocks {
    pub k: Vec<SparseMatrix>,
    pub c: Vec<SparseMatrix>,
    pub b: Vec<SparseMatrix>,
    pub qu: Vec<SparseMatrix>,
    pub qv: Vec<SparseMatrix>,
    pub qz: Vec<SparseMatrix>,
}

impl StageBlocks {
    pub fn n_steps(&self) -> usize {
        self.k.len()
    }

    /// Linearizes the θ-method constraints at `x`: step `i` uses `(v_i, u_{i+1}, z_{i+1})`
    /// with `v_0 = u_0`.
    pub fn linearize(p: &ProblemSpec, x: &Primal, dt: f64) -> Result<Self> {
        let n = x.dims.n_steps;
        let (qu, qv, qz) = p.stage_weights(dt);
        let jac = map_indices(n, |i| {
            let v = if i == 0 { &p.u0[..] } else { x.v_at(i) };
            stage_blocks(p, v, x.u_at(i + 1), x.z_at(i + 1), dt)
        });
        let mut out = Self {
            k: Vec::with_capacity(n),
            c: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            qu: vec![qu; n],
            qv: vec![qv; n],
            qz: vec![qz; n],
        };
        for j in jac {
            let j = j?;
            out.k.push(j.k);
            out.c.push(j.c);
            out.b.push(j.b);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    First,
    Interior,
    Last,
}

/// Parts of the splitting `A = D − L − U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Diagonal,
    /// `L`: the negated strictly-lower block part.
    Lower,
    /// `U`: the negated strictly-upper block part.
    Upper,
}

/// The augmented operator in block-tridiagonal ordering.
#[derive(Debug, Clone)]
pub struct BlockTriKKT {
    layout: Layout,
    stages: StageBlocks,
    sizes: Vec<usize>,
}

fn shape_check(m: &SparseMatrix, rows: usize, cols: usize) -> Result<()> {
    check_len(rows, m.rows())?;
    check_len(cols, m.cols())
}

impl BlockTriKKT {
    pub fn new(stages: StageBlocks, nu: usize, nz: usize) -> Result<Self> {
        let n = stages.n_steps();
        if n == 0 {
            return Err(Error::InvalidConfig("at least one time step is required".into()));
        }
        for v in [&stages.c, &stages.b, &stages.qu, &stages.qv, &stages.qz] {
            check_len(n, v.len())?;
        }
        for i in 0..n {
            shape_check(&stages.k[i], nu, nu)?;
            shape_check(&stages.c[i], nu, nu)?;
            shape_check(&stages.b[i], nu, nz)?;
            shape_check(&stages.qu[i], nu, nu)?;
            shape_check(&stages.qv[i], nu, nu)?;
            shape_check(&stages.qz[i], nz, nz)?;
        }
        let layout = Layout::new(Dims { n_steps: n, nu, nz });
        Ok(Self { sizes: layout.block_sizes(), layout, stages })
    }

    /// Linearizes `p` at `x` with step `dt` and assembles the operator.
    pub fn from_problem(p: &ProblemSpec, x: &Primal, dt: f64) -> Result<Self> {
        Self::new(StageBlocks::linearize(p, x, dt)?, p.n_u(), p.n_z())
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dims(&self) -> Dims {
        self.layout.dims
    }

    pub fn stages(&self) -> &StageBlocks {
        &self.stages
    }

    pub fn n_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn block_kind(&self, j: usize) -> BlockKind {
        if j == 0 {
            BlockKind::First
        } else if j < self.dims().n_steps {
            BlockKind::Interior
        } else {
            BlockKind::Last
        }
    }

    fn u_slot(&self, j: usize) -> usize {
        if j == 0 {
            0
        } else {
            self.dims().nu
        }
    }

    fn mu_slot(&self, j: usize) -> usize {
        let d = self.dims();
        if j == d.n_steps {
            d.nu
        } else {
            2 * d.nu + d.nz
        }
    }

    /// `y = D_j x` for block-local vectors.
    pub fn diag_apply(&self, j: usize, x: &[f64], y: &mut [f64]) {
        let Dims { nu, nz, .. } = self.dims();
        let s = &self.stages;
        y.fill(0.0);
        match self.block_kind(j) {
            BlockKind::First => {
                let (xu, xz, xl) = (&x[..nu], &x[nu..nu + nz], &x[nu + nz..]);
                let (yu, rest) = y.split_at_mut(nu);
                let (yz, yl) = rest.split_at_mut(nz);
                s.qu[0].mul_add_into(1.0, xu, yu);
                s.k[0].mul_t_add_into(1.0, xl, yu);
                s.qz[0].mul_add_into(1.0, xz, yz);
                s.b[0].mul_t_add_into(1.0, xl, yz);
                s.k[0].mul_add_into(1.0, xu, yl);
                s.b[0].mul_add_into(1.0, xz, yl);
            }
            BlockKind::Interior => {
                let xv = &x[..nu];
                let xu = &x[nu..2 * nu];
                let xz = &x[2 * nu..2 * nu + nz];
                let xm = &x[2 * nu + nz..3 * nu + nz];
                let xl = &x[3 * nu + nz..];
                let (yv, rest) = y.split_at_mut(nu);
                let (yu, rest) = rest.split_at_mut(nu);
                let (yz, rest) = rest.split_at_mut(nz);
                let (ym, yl) = rest.split_at_mut(nu);
                s.qv[j - 1].mul_add_into(1.0, xv, yv);
                s.c[j].mul_t_add_into(1.0, xl, yv);
                s.qu[j].mul_add_into(1.0, xu, yu);
                s.k[j].mul_t_add_into(1.0, xl, yu);
                s.qz[j].mul_add_into(1.0, xz, yz);
                s.b[j].mul_t_add_into(1.0, xl, yz);
                for k in 0..nu {
                    yv[k] -= xm[k];
                    ym[k] = -xv[k];
                }
                s.c[j].mul_add_into(1.0, xv, yl);
                s.k[j].mul_add_into(1.0, xu, yl);
                s.b[j].mul_add_into(1.0, xz, yl);
            }
            BlockKind::Last => {
                let (xv, xm) = (&x[..nu], &x[nu..]);
                let (yv, ym) = y.split_at_mut(nu);
                s.qv[j - 1].mul_add_into(1.0, xv, yv);
                for k in 0..nu {
                    yv[k] -= xm[k];
                    ym[k] = -xv[k];
                }
            }
        }
    }

    /// `y_j += alpha · A_{j,j−1} x_{j−1}` (the continuity identity), for `j ≥ 1`.
    pub fn lower_apply_add(&self, j: usize, x_prev: &[f64], y: &mut [f64], alpha: f64) {
        let nu = self.dims().nu;
        let (r, c) = (self.mu_slot(j), self.u_slot(j - 1));
        for k in 0..nu {
            y[r + k] += alpha * x_prev[c + k];
        }
    }

    /// `y_j += alpha · A_{j,j+1} x_{j+1}`, for `j < N`.
    pub fn upper_apply_add(&self, j: usize, x_next: &[f64], y: &mut [f64], alpha: f64) {
        let nu = self.dims().nu;
        let (r, c) = (self.u_slot(j), self.mu_slot(j + 1));
        for k in 0..nu {
            y[r + k] += alpha * x_next[c + k];
        }
    }

    fn block<'a>(&self, x: &'a [f64], j: usize) -> &'a [f64] {
        &x[self.layout.block_range(j)]
    }

    /// Block-row `j` of `A x`, written into `y` (block-local).
    pub fn apply_block_row(&self, j: usize, x: &[f64], y: &mut [f64]) {
        self.diag_apply(j, self.block(x, j), y);
        if j > 0 {
            self.lower_apply_add(j, self.block(x, j - 1), y, 1.0);
        }
        if j + 1 < self.n_blocks() {
            self.upper_apply_add(j, self.block(x, j + 1), y, 1.0);
        }
    }

    /// Applies one part of the splitting `A = D − L − U`.
    pub fn apply_part(&self, part: Part, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.layout.len(), x.len())?;
        let mut y = vec![0.0; x.len()];
        for_each_segment(&mut y, &self.sizes, |j, seg| match part {
            Part::Diagonal => self.diag_apply(j, self.block(x, j), seg),
            Part::Lower if j > 0 => self.lower_apply_add(j, self.block(x, j - 1), seg, -1.0),
            Part::Upper if j + 1 < self.n_blocks() => self.upper_apply_add(j, self.block(x, j + 1), seg, -1.0),
            _ => {}
        });
        Ok(y)
    }

    /// All nonzero entries as global `(row, col, value)` triplets, assembled directly from
    /// the variable-wise equations.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let lay = &self.layout;
        let s = &self.stages;
        let n = self.dims().n_steps;
        let mut t = Vec::new();
        let mut put = |r: usize, c: usize, m: &SparseMatrix, transpose: bool| {
            for (i, j, v) in m.triplets() {
                if transpose {
                    t.push((r + j, c + i, v));
                } else {
                    t.push((r + i, c + j, v));
                }
            }
        };
        let eye = SparseMatrix::identity(self.dims().nu);
        let neg = eye.scaled(-1.0);
        for i in 1..=n {
            let (u, v, z) = (lay.offset(VarKind::U, i), lay.offset(VarKind::V, i), lay.offset(VarKind::Z, i));
            let (l, m) = (lay.offset(VarKind::Lambda, i), lay.offset(VarKind::Mu, i));
            let st = i - 1;
            put(u, u, &s.qu[st], false);
            put(v, v, &s.qv[st], false);
            put(z, z, &s.qz[st], false);
            put(l, u, &s.k[st], false);
            put(u, l, &s.k[st], true);
            put(l, z, &s.b[st], false);
            put(z, l, &s.b[st], true);
            if i >= 2 {
                let vp = lay.offset(VarKind::V, i - 1);
                put(l, vp, &s.c[st], false);
                put(vp, l, &s.c[st], true);
            }
            put(m, u, &eye, false);
            put(u, m, &eye, false);
            put(m, v, &neg, false);
            put(v, m, &neg, false);
        }
        t
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let n = self.layout.len();
        SparseMatrix::from_triplets(n, n, &self.triplets())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.to_sparse().to_dense()
    }

    /// Dense copy of the block `(row block r, column block c)`.
    pub fn block_dense(&self, r: usize, c: usize) -> DenseMatrix {
        let (rr, cr) = (self.layout.block_range(r), self.layout.block_range(c));
        let mut d = DenseMatrix::zeros(rr.len(), cr.len());
        for (i, j, v) in self.triplets() {
            if rr.contains(&i) && cr.contains(&j) {
                d.add_to(i - rr.start, j - cr.start, v);
            }
        }
        d
    }
}

impl LinearOperator for BlockTriKKT {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), y.len())?;
        for_each_segment(y, &self.sizes, |j, seg| self.apply_block_row(j, x, seg));
        Ok(())
    }
}

/// Dense matrix in the clustered ordering `[u; v; z; λ; μ]` (all steps of one kind together),
/// assembled from the stage blocks independently of the block-tridiagonal layout.
pub fn clustered_dense(a: &BlockTriKKT) -> DenseMatrix {
    let lay = a.layout();
    let Dims { n_steps: n, nu, nz } = a.dims();
    let s = a.stages();
    let np = n * (2 * nu + nz);
    let mut q = DenseMatrix::zeros(np, np);
    let mut jac = DenseMatrix::zeros(2 * n * nu, np);
    for i in 1..=n {
        let (u, v, z) = (lay.clustered_offset(VarKind::U, i), lay.clustered_offset(VarKind::V, i), lay.clustered_offset(VarKind::Z, i));
        q.set_block(u, u, &s.qu[i - 1].to_dense());
        q.set_block(v, v, &s.qv[i - 1].to_dense());
        q.set_block(z, z, &s.qz[i - 1].to_dense());
        let l = lay.clustered_offset(VarKind::Lambda, i) - np;
        let m = lay.clustered_offset(VarKind::Mu, i) - np;
        jac.set_block(l, u, &s.k[i - 1].to_dense());
        jac.set_block(l, z, &s.b[i - 1].to_dense());
        if i >= 2 {
            jac.set_block(l, lay.clustered_offset(VarKind::V, i - 1), &s.c[i - 1].to_dense());
        }
        jac.set_block(m, u, &DenseMatrix::identity(nu));
        for k in 0..nu {
            jac.set(m + k, v + k, -1.0);
        }
    }
    let mut full = DenseMatrix::zeros(np + 2 * n * nu, np + 2 * n * nu);
    full.set_block(0, 0, &q);
    full.set_block(np, 0, &jac);
    full.set_block(0, np, &jac.transpose());
    full
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::kkt::{from_clustered, to_clustered};
    use crate::linalg::dot_raw;
    use crate::problems::{build_burgers, build_vanderpol, BurgersConfig, VanDerPolConfig};
    use crate::timedisc::{forward_solve, TimeGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// A van der Pol operator linearized at a perturbed forward trajectory.
    pub(crate) fn vdp_operator(n: usize) -> (ProblemSpec, BlockTriKKT) {
        let g = TimeGrid::new(8.0, n).unwrap();
        let p = build_vanderpol(&VanDerPolConfig::default(), &g).unwrap();
        let x = perturbed_iterate(&p, &g, 3);
        let a = BlockTriKKT::from_problem(&p, &x, g.dt).unwrap();
        (p, a)
    }

    pub(crate) fn burgers_operator(n: usize, n_elems: usize) -> (ProblemSpec, BlockTriKKT) {
        let g = TimeGrid::new(1.0, n).unwrap();
        let p = build_burgers(&BurgersConfig { n_elems, ..BurgersConfig::default() }, &g).unwrap();
        let x = perturbed_iterate(&p, &g, 5);
        let a = BlockTriKKT::from_problem(&p, &x, g.dt).unwrap();
        (p, a)
    }

    pub(crate) fn perturbed_iterate(p: &ProblemSpec, g: &TimeGrid, seed: u64) -> Primal {
        let traj = forward_solve(p, &vec![vec![0.0; p.n_z()]; g.n_steps], g, 1e-12).unwrap();
        let mut x = Primal::from_trajectory(&traj);
        let d = x.dims;
        let noise = random_vec(d.primal_len(), seed);
        let (nu, nz) = (d.nu * d.n_steps, d.nz * d.n_steps);
        crate::linalg::axpy_into(0.05, &noise[..nu], &mut x.v);
        crate::linalg::axpy_into(0.1, &noise[nu..nu + nz], &mut x.z);
        x
    }

    #[test]
    fn dimensions() {
        let (_, a) = vdp_operator(4);
        assert_eq!(a.dim(), 40);
        assert_eq!(a.block_sizes(), &[6, 10, 10, 10, 4]);
    }

    #[test]
    fn apply_matches_dense_and_is_symmetric() {
        for (_, a) in [vdp_operator(4), burgers_operator(4, 6)] {
            let n = a.dim();
            let d = a.to_dense();
            assert!(d.is_symmetric(0.0));
            let x = random_vec(n, 1);
            let y = random_vec(n, 2);
            let ax = a.apply(&x).unwrap();
            let dx = d.matvec(&x).unwrap();
            for (p, q) in ax.iter().zip(&dx) {
                assert!((p - q).abs() <= 1e-12);
            }
            let ay = a.apply(&y).unwrap();
            assert!((dot_raw(&ax, &y) - dot_raw(&x, &ay)).abs() <= 1e-10);
            assert_eq!(a.apply(&vec![0.0; n]).unwrap(), vec![0.0; n]);
        }
    }

    #[test]
    fn diagonal_blocks_follow_the_pattern() {
        let (_, a) = vdp_operator(4);
        let s = a.stages();
        let d0 = a.block_dense(0, 0);
        // [[Qu0, 0, K0ᵀ], [0, Qz0, B0ᵀ], [K0, B0, 0]]
        assert_eq!(d0.get(0, 0), s.qu[0].get(0, 0));
        assert_eq!(d0.get(4, 1), s.k[0].get(0, 1));
        assert_eq!(d0.get(1, 4), s.k[0].get(0, 1));
        assert_eq!(d0.get(4, 2), s.b[0].get(0, 0));
        assert_eq!(d0.get(4, 4), 0.0);
        let d2 = a.block_dense(2, 2);
        // rows: v(0..2) u(2..4) z(4..6) μ(6..8) λ(8..10)
        assert_eq!(d2.get(6, 0), -1.0);
        assert_eq!(d2.get(0, 6), -1.0);
        assert_eq!(d2.get(8, 0), s.c[2].get(0, 0));
        assert_eq!(d2.get(9, 1), s.c[2].get(1, 1));
        assert_eq!(d2.get(8, 3), s.k[2].get(0, 1));
        let last = a.block_dense(4, 4);
        assert_eq!(last.get(2, 0), -1.0);
        assert_eq!(last.get(0, 0), s.qv[3].get(0, 0));
        // Off-diagonal blocks hold only the continuity identities.
        let low = a.block_dense(2, 1);
        let nz: Vec<_> = (0..10).flat_map(|i| (0..10).map(move |j| (i, j))).filter(|&(i, j)| low.get(i, j) != 0.0).collect();
        assert_eq!(nz, vec![(6, 2), (7, 3)]);
        let up = a.block_dense(1, 2);
        assert_eq!(up, low.transpose());
    }

    #[test]
    fn smallest_case_has_single_coupling() {
        let (_, a) = vdp_operator(1);
        assert_eq!(a.n_blocks(), 2);
        let low = a.block_dense(1, 0);
        let count = (0..4).flat_map(|i| (0..6).map(move |j| (i, j))).filter(|&(i, j)| low.get(i, j) != 0.0).count();
        assert_eq!(count, 2);
        let x = random_vec(a.dim(), 3);
        assert_eq!(a.apply_part(Part::Lower, &x).unwrap().iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn splitting_is_additive() {
        let (_, a) = burgers_operator(4, 5);
        let x = random_vec(a.dim(), 7);
        let ax = a.apply(&x).unwrap();
        let d = a.apply_part(Part::Diagonal, &x).unwrap();
        let l = a.apply_part(Part::Lower, &x).unwrap();
        let u = a.apply_part(Part::Upper, &x).unwrap();
        for k in 0..x.len() {
            assert!((d[k] - l[k] - u[k] - ax[k]).abs() <= 1e-12);
        }
        let y = random_vec(a.dim(), 8);
        let uy = a.apply_part(Part::Upper, &y).unwrap();
        assert!((dot_raw(&l, &y) - dot_raw(&x, &uy)).abs() <= 1e-12);
    }

    #[test]
    fn permutation_congruence() {
        for (_, a) in [vdp_operator(4), burgers_operator(3, 4), vdp_operator(1)] {
            let Dims { n_steps: n, nu, nz } = a.dims();
            let c = clustered_dense(&a);
            let ordered = a.to_dense();
            let dim = a.dim();
            // Column k of the ordered matrix equals P · (clustered matrix) · Pᵀ e_k.
            for k in 0..dim {
                let mut e = vec![0.0; dim];
                e[k] = 1.0;
                let ec = to_clustered(&e, nu, nz, n).unwrap();
                let col = from_clustered(&c.matvec(&ec).unwrap(), nu, nz, n).unwrap();
                for r in 0..dim {
                    assert!((col[r] - ordered.get(r, k)).abs() <= 1e-14);
                }
            }
        }
    }
}
