use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Result};
use crate::kkt::Dual;
use crate::krylov::LinearOperator;
use crate::linalg::{dot_raw, SparseLu, SparseMatrix};
use crate::timedisc::{objective_hessian_apply, theta_residual, Dims, Primal, ProblemSpec};

/// Flattens `(u, v, z)` as `[u; v; z]`.
pub fn primal_to_flat(x: &Primal) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.dims.primal_len());
    out.extend_from_slice(&x.u);
    out.extend_from_slice(&x.v);
    out.extend_from_slice(&x.z);
    out
}

pub fn primal_from_flat(dims: Dims, w: &[f64]) -> Primal {
    let n = dims.n_steps * dims.nu;
    Primal { dims, u: w[..n].to_vec(), v: w[n..2 * n].to_vec(), z: w[2 * n..].to_vec() }
}

/// Flattens `(λ, μ)` as `[λ; μ]`.
pub fn dual_to_flat(y: &Dual) -> Vec<f64> {
    let mut out = y.lambda.clone();
    out.extend_from_slice(&y.mu);
    out
}

pub fn dual_from_flat(dims: Dims, w: &[f64]) -> Dual {
    let n = dims.n_steps * dims.nu;
    Dual { dims, lambda: w[..n].to_vec(), mu: w[n..].to_vec() }
}

/// Constraint values: the dynamics residual of step `i` in `λ_{i+1}`'s slot and the
/// continuity residual `u_{i+1} − v_{i+1}` in `μ_{i+1}`'s slot.
pub fn constraints(p: &ProblemSpec, x: &Primal, dt: f64) -> Result<Dual> {
    let d = x.dims;
    let mut c = Dual::zeros(d);
    let nu = d.nu;
    for i in 0..d.n_steps {
        let v = if i == 0 { &p.u0[..] } else { x.v_at(i) };
        let r = theta_residual(p, v, x.u_at(i + 1), x.z_at(i + 1), dt)?;
        c.lambda[i * nu..(i + 1) * nu].copy_from_slice(&r);
    }
    for (k, m) in c.mu.iter_mut().enumerate() {
        *m = x.u[k] - x.v[k];
    }
    Ok(c)
}

/// Block-diagonal weight `Q` of the augmented systems and its inverse, on flat primal vectors.
pub struct QMetric {
    dims: Dims,
    qu: SparseMatrix,
    qz: SparseMatrix,
    qu_lu: SparseLu,
    qz_lu: SparseLu,
}

impl QMetric {
    pub fn new(p: &ProblemSpec, dims: Dims, dt: f64) -> Result<Self> {
        let (qu, _, qz) = p.stage_weights(dt);
        let qu_lu = SparseLu::factor(&qu)?;
        let qz_lu = SparseLu::factor(&qz)?;
        Ok(Self { dims, qu, qz, qu_lu, qz_lu })
    }

    fn blocks(&self) -> impl Iterator<Item = (core::ops::Range<usize>, bool)> {
        let Dims { n_steps, nu, nz } = self.dims;
        let zo = 2 * n_steps * nu;
        (0..2 * n_steps)
            .map(move |k| (k * nu..(k + 1) * nu, true))
            .chain((0..n_steps).map(move |k| (zo + k * nz..zo + (k + 1) * nz, false)))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (r, state) in self.blocks() {
            let m = if state { &self.qu } else { &self.qz };
            m.mul_add_into(1.0, &x[r.clone()], &mut y[r]);
        }
        y
    }

    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (r, state) in self.blocks() {
            let lu = if state { &self.qu_lu } else { &self.qz_lu };
            lu.solve_into(&x[r.clone()], &mut y[r]);
        }
        y
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        libm::sqrt(dot_raw(x, &self.apply(x)).max(0.0))
    }
}

impl LinearOperator for QMetric {
    fn dim(&self) -> usize {
        self.dims.primal_len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.dim(), x.len())?;
        y.copy_from_slice(&QMetric::apply(self, x));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianMode {
    /// Objective Hessian plus multiplier-weighted constraint curvature.
    #[default]
    ExactLagrangian,
    /// Objective Hessian only.
    GaussNewton,
}

/// Hessian of `f + λᵀc₁ + μᵀc₂` at `(x, y)` acting on flat primal vectors.
pub struct LagrangianHessian<'a> {
    pub p: &'a ProblemSpec,
    pub x: &'a Primal,
    pub y: &'a Dual,
    pub dt: f64,
    pub mode: HessianMode,
}

impl LagrangianHessian<'_> {
    fn add_curvature(&self, s: &Primal, out: &mut Primal) {
        let (p, x, dt) = (self.p, self.x, self.dt);
        let Dims { n_steps, nu, nz } = x.dims;
        let th = p.theta;
        let zero_u = vec![0.0; nu];
        let mut scratch_u = vec![0.0; nu];
        for i in 0..n_steps {
            let lam = self.y.lambda_at(i + 1);
            if lam.iter().all(|&l| l == 0.0) {
                continue;
            }
            let (ru, rz) = (i * nu..(i + 1) * nu, i * nz..(i + 1) * nz);
            let (zi, dz) = (x.z_at(i + 1), s.z_at(i + 1));
            if th != 0.0 {
                p.dynamics.hess_contract(
                    x.u_at(i + 1),
                    zi,
                    lam,
                    s.u_at(i + 1),
                    dz,
                    dt * th,
                    &mut out.u[ru],
                    &mut out.z[rz.clone()],
                );
            }
            if th != 1.0 {
                if i == 0 {
                    scratch_u.fill(0.0);
                    p.dynamics.hess_contract(&p.u0, zi, lam, &zero_u, dz, dt * (1.0 - th), &mut scratch_u, &mut out.z[rz]);
                } else {
                    let rv = (i - 1) * nu..i * nu;
                    p.dynamics.hess_contract(
                        x.v_at(i),
                        zi,
                        lam,
                        s.v_at(i),
                        dz,
                        dt * (1.0 - th),
                        &mut out.v[rv],
                        &mut out.z[rz],
                    );
                }
            }
        }
    }
}

impl LinearOperator for LagrangianHessian<'_> {
    fn dim(&self) -> usize {
        self.x.dims.primal_len()
    }

    fn apply_into(&self, w: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.dim(), w.len())?;
        check_len(self.dim(), y.len())?;
        let s = primal_from_flat(self.x.dims, w);
        let mut out = objective_hessian_apply(self.p, self.dt, &s);
        if self.mode == HessianMode::ExactLagrangian && !self.p.dynamics.is_affine() {
            self.add_curvature(&s, &mut out);
        }
        y.copy_from_slice(&primal_to_flat(&out));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkt::assemble::tests::{perturbed_iterate, random_vec};
    use crate::kkt::BlockTriKKT;
    use crate::linalg::norm_raw;
    use crate::problems::{build_burgers, build_vanderpol, BurgersConfig, VanDerPolConfig};
    use crate::timedisc::{objective_flat, TimeGrid};

    fn setups() -> Vec<(ProblemSpec, Primal, f64)> {
        let g = TimeGrid::new(2.0, 6).unwrap();
        let vdp = build_vanderpol(&VanDerPolConfig::default(), &g).unwrap();
        let xv = perturbed_iterate(&vdp, &g, 5);
        let gb = TimeGrid::new(1.0, 4).unwrap();
        let mut bcfg = BurgersConfig { n_elems: 8, ..BurgersConfig::default() };
        bcfg.theta = 0.5;
        let burg = build_burgers(&bcfg, &gb).unwrap();
        let xb = perturbed_iterate(&burg, &gb, 6);
        vec![(vdp, xv, g.dt), (burg, xb, gb.dt)]
    }

    fn perturb(x: &Primal, s: &[f64], h: f64) -> Primal {
        let mut f = primal_to_flat(x);
        crate::linalg::axpy_into(h, s, &mut f);
        primal_from_flat(x.dims, &f)
    }

    #[test]
    fn flat_round_trips() {
        let (_, x, _) = setups().remove(0);
        assert_eq!(primal_from_flat(x.dims, &primal_to_flat(&x)), x);
        let y = dual_from_flat(x.dims, &random_vec(x.dims.dual_len(), 3));
        assert_eq!(dual_from_flat(x.dims, &dual_to_flat(&y)), y);
    }

    #[test]
    fn kkt_constraint_rows_are_the_jacobian() {
        for (p, x, dt) in setups() {
            let a = BlockTriKKT::from_problem(&p, &x, dt).unwrap();
            let s = random_vec(x.dims.primal_len(), 7);
            let lay = a.layout();
            let w = lay.pack(&primal_from_flat(x.dims, &s), &Dual::zeros(x.dims));
            let js = dual_to_flat(&lay.unpack(&a.apply(&w).unwrap()).1);
            let h = 1e-6;
            let cp = dual_to_flat(&constraints(&p, &perturb(&x, &s, h), dt).unwrap());
            let cm = dual_to_flat(&constraints(&p, &perturb(&x, &s, -h), dt).unwrap());
            let fd: Vec<f64> = cp.iter().zip(&cm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let err: Vec<f64> = fd.iter().zip(&js).map(|(a, b)| a - b).collect();
            assert!(norm_raw(&err) <= 1e-6 * norm_raw(&js).max(1.0), "{}", norm_raw(&err));
        }
    }

    #[test]
    fn kkt_primal_rows_are_q() {
        for (p, x, dt) in setups() {
            let a = BlockTriKKT::from_problem(&p, &x, dt).unwrap();
            let q = QMetric::new(&p, x.dims, dt).unwrap();
            let s = random_vec(x.dims.primal_len(), 9);
            let lay = a.layout();
            let w = lay.pack(&primal_from_flat(x.dims, &s), &Dual::zeros(x.dims));
            let qs = primal_to_flat(&lay.unpack(&a.apply(&w).unwrap()).0);
            let d: Vec<f64> = qs.iter().zip(&q.apply(&s)).map(|(a, b)| a - b).collect();
            assert!(norm_raw(&d) <= 1e-13 * norm_raw(&qs));
            let back = q.solve(&q.apply(&s));
            let d: Vec<f64> = back.iter().zip(&s).map(|(a, b)| a - b).collect();
            assert!(norm_raw(&d) <= 1e-10 * norm_raw(&s));
        }
    }

    fn lagrangian_grad(p: &ProblemSpec, x: &Primal, y: &Dual, dt: f64) -> Vec<f64> {
        let a = BlockTriKKT::from_problem(p, x, dt).unwrap();
        let lay = a.layout();
        let jty = primal_to_flat(&lay.unpack(&a.apply(&lay.pack(&Primal::zeros(x.dims), y)).unwrap()).0);
        let mut g = primal_to_flat(&objective_flat(p, dt, x).unwrap().grad);
        crate::linalg::axpy_into(1.0, &jty, &mut g);
        g
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        for (p, x, dt) in setups() {
            let y = dual_from_flat(x.dims, &random_vec(x.dims.dual_len(), 4));
            let s = random_vec(x.dims.primal_len(), 5);
            let hs = LagrangianHessian { p: &p, x: &x, y: &y, dt, mode: HessianMode::ExactLagrangian }.apply(&s).unwrap();
            let h = 1e-6;
            let gp = lagrangian_grad(&p, &perturb(&x, &s, h), &y, dt);
            let gm = lagrangian_grad(&p, &perturb(&x, &s, -h), &y, dt);
            let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let err: Vec<f64> = fd.iter().zip(&hs).map(|(a, b)| a - b).collect();
            assert!(norm_raw(&err) <= 1e-6 * norm_raw(&hs).max(1.0), "{}", norm_raw(&err));
            let gn = LagrangianHessian { p: &p, x: &x, y: &y, dt, mode: HessianMode::GaussNewton }.apply(&s).unwrap();
            let obj = primal_to_flat(&objective_hessian_apply(&p, dt, &primal_from_flat(x.dims, &s)));
            assert_eq!(gn, obj);
        }
    }

    #[test]
    fn forward_solution_is_feasible() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let p = build_vanderpol(&VanDerPolConfig::default(), &g).unwrap();
        let traj = crate::timedisc::forward_solve(&p, &vec![vec![0.3; p.n_z()]; 8], &g, 1e-13).unwrap();
        let c = constraints(&p, &Primal::from_trajectory(&traj), g.dt).unwrap();
        assert!(c.norm() <= 1e-11);
    }
}
