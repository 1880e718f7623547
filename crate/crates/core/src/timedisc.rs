//! Uniform time grids, θ-method residuals and stage Jacobians, forward time stepping, and the
//! discrete tracking objective.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::linalg::{norm_raw, SparseLu, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub n_steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!(
                "time grid needs t_final > 0 and n_steps >= 1 (got {t_final}, {n_steps})"
            )));
        }
        Ok(Self { t_final, n_steps, dt: t_final / n_steps as f64 })
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// The grid with half as many steps.
    pub fn coarsen(&self) -> Result<Self> {
        if self.n_steps % 2 != 0 {
            return Err(Error::IndivisibleSteps { steps: self.n_steps, levels: 2 });
        }
        Self::new(self.t_final, self.n_steps / 2)
    }
}

/// Semi-discrete right-hand side `F(u, z)` of `M u' = F(u, z)`.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn eval(&self, u: &[f64], z: &[f64], out: &mut [f64]);
    fn jac_u(&self, u: &[f64], z: &[f64]) -> SparseMatrix;
    fn jac_z(&self, u: &[f64], z: &[f64]) -> SparseMatrix;

    /// Accumulates `scale · ∇²(λᵀF)(u, z) · (du, dz)` into `(out_u, out_z)`.
    /// The default is zero curvature (F affine).
    #[allow(clippy::too_many_arguments)]
    fn hess_contract(
        &self,
        _u: &[f64],
        _z: &[f64],
        _lambda: &[f64],
        _du: &[f64],
        _dz: &[f64],
        _scale: f64,
        _out_u: &mut [f64],
        _out_z: &mut [f64],
    ) {
    }

    fn is_affine(&self) -> bool {
        false
    }
}

/// A tracking-type optimal control problem on a fixed time grid.
pub struct ProblemSpec {
    pub dynamics: Box<dyn Dynamics>,
    pub mass: SparseMatrix,
    pub u0: Vec<f64>,
    pub theta: f64,
    /// Spatial weight `W` in `½ ∫ (u − u_d)ᵀ W (u − u_d)`.
    pub state_weight: SparseMatrix,
    /// Spatial weight `W_z` in `½ ∫ (z − z_d)ᵀ W_z (z − z_d)`.
    pub control_weight: SparseMatrix,
    /// SPD matrix used for the state blocks of the augmented systems; equals `state_weight`
    /// whenever that is positive definite.
    pub state_metric: SparseMatrix,
    /// Optional `½ (u(T) − u_d(T))ᵀ W_T (u(T) − u_d(T))`, split evenly over `u_N` and `v_N`.
    pub terminal_weight: Option<SparseMatrix>,
    /// `u_d` at nodes 1..N.
    pub state_targets: Vec<Vec<f64>>,
    /// `z_d` on intervals 1..N.
    pub control_targets: Vec<Vec<f64>>,
}

impl ProblemSpec {
    pub fn n_u(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn n_z(&self) -> usize {
        self.dynamics.control_dim()
    }

    pub fn f_eval(&self, u: &[f64], z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_u()];
        self.dynamics.eval(u, z, &mut out);
        out
    }

    /// Augmented-system weights `(Q^u, Q^v, Q^z)` at step size `dt`.
    pub fn stage_weights(&self, dt: f64) -> (SparseMatrix, SparseMatrix, SparseMatrix) {
        let qu = self.state_metric.scaled(0.5 * dt);
        (qu.clone(), qu, self.control_weight.scaled(dt))
    }

    pub fn dims(&self, n_steps: usize) -> Dims {
        Dims { n_steps, nu: self.n_u(), nz: self.n_z() }
    }

    fn check_dims(&self, v: &[f64], u: &[f64], z: &[f64]) -> Result<()> {
        check_len(self.n_u(), v.len())?;
        check_len(self.n_u(), u.len())?;
        check_len(self.n_z(), z.len())
    }
}

/// Step count and per-node state/control sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n_steps: usize,
    pub nu: usize,
    pub nz: usize,
}

impl Dims {
    pub fn primal_len(&self) -> usize {
        self.n_steps * (2 * self.nu + self.nz)
    }

    pub fn dual_len(&self) -> usize {
        2 * self.n_steps * self.nu
    }

    pub fn kkt_len(&self) -> usize {
        self.n_steps * (4 * self.nu + self.nz)
    }

    pub fn coarse(&self) -> Dims {
        Dims { n_steps: self.n_steps / 2, ..*self }
    }
}

/// States `u_1..u_N`, virtual states `v_1..v_N`, and controls `z_1..z_N`, each stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Primal {
    pub dims: Dims,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
}

impl Primal {
    pub fn zeros(dims: Dims) -> Self {
        let n = dims.n_steps;
        Self { dims, u: vec![0.0; n * dims.nu], v: vec![0.0; n * dims.nu], z: vec![0.0; n * dims.nz] }
    }

    /// `u_i` for `i` in 1..=N.
    pub fn u_at(&self, i: usize) -> &[f64] {
        let nu = self.dims.nu;
        &self.u[(i - 1) * nu..i * nu]
    }

    pub fn v_at(&self, i: usize) -> &[f64] {
        let nu = self.dims.nu;
        &self.v[(i - 1) * nu..i * nu]
    }

    pub fn z_at(&self, i: usize) -> &[f64] {
        let nz = self.dims.nz;
        &self.z[(i - 1) * nz..i * nz]
    }

    pub fn dot(&self, o: &Primal) -> f64 {
        crate::linalg::dot_raw(&self.u, &o.u)
            + crate::linalg::dot_raw(&self.v, &o.v)
            + crate::linalg::dot_raw(&self.z, &o.z)
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    /// self += alpha * o
    pub fn axpy(&mut self, alpha: f64, o: &Primal) {
        crate::linalg::axpy_into(alpha, &o.u, &mut self.u);
        crate::linalg::axpy_into(alpha, &o.v, &mut self.v);
        crate::linalg::axpy_into(alpha, &o.z, &mut self.z);
    }

    pub fn scale(&mut self, alpha: f64) {
        crate::linalg::scale_into(alpha, &mut self.u);
        crate::linalg::scale_into(alpha, &mut self.v);
        crate::linalg::scale_into(alpha, &mut self.z);
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).chain(&self.z).all(|x| x.is_finite())
    }

    /// Builds a primal point with `v = u`.
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let n = traj.states.len();
        let nu = traj.states.first().map_or(0, Vec::len);
        let nz = traj.controls.first().map_or(0, Vec::len);
        let u: Vec<f64> = traj.states.concat();
        Self { dims: Dims { n_steps: n, nu, nz }, v: u.clone(), u, z: traj.controls.concat() }
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            states: self.u.chunks(self.dims.nu.max(1)).map(<[f64]>::to_vec).collect(),
            controls: self.z.chunks(self.dims.nz.max(1)).map(<[f64]>::to_vec).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `u_1..u_N`.
    pub states: Vec<Vec<f64>>,
    /// `z_1..z_N`.
    pub controls: Vec<Vec<f64>>,
}

/// `−M u_next + M v_i + Δtθ F(u_next, z) + Δt(1−θ) F(v_i, z)`.
pub fn theta_residual(p: &ProblemSpec, v_i: &[f64], u_next: &[f64], z_next: &[f64], dt: f64) -> Result<Vec<f64>> {
    p.check_dims(v_i, u_next, z_next)?;
    let n = p.n_u();
    let mut out = vec![0.0; n];
    p.mass.mul_add_into(-1.0, u_next, &mut out);
    p.mass.mul_add_into(1.0, v_i, &mut out);
    let mut f = vec![0.0; n];
    if p.theta != 0.0 {
        p.dynamics.eval(u_next, z_next, &mut f);
        crate::linalg::axpy_into(dt * p.theta, &f, &mut out);
    }
    if p.theta != 1.0 {
        p.dynamics.eval(v_i, z_next, &mut f);
        crate::linalg::axpy_into(dt * (1.0 - p.theta), &f, &mut out);
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    Ok(out)
}

/// Partial Jacobians of [`theta_residual`]: `K` w.r.t. `u_next`, `C` w.r.t. `v_i`, `B` w.r.t. `z_next`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageJacobians {
    pub k: SparseMatrix,
    pub c: SparseMatrix,
    pub b: SparseMatrix,
}

pub fn stage_blocks(p: &ProblemSpec, v_i: &[f64], u_next: &[f64], z_next: &[f64], dt: f64) -> Result<StageJacobians> {
    p.check_dims(v_i, u_next, z_next)?;
    let th = p.theta;
    let fu_new = p.dynamics.jac_u(u_next, z_next);
    let fu_old = p.dynamics.jac_u(v_i, z_next);
    let k = p.mass.lin_comb(-1.0, &fu_new, dt * th)?;
    let c = p.mass.lin_comb(1.0, &fu_old, dt * (1.0 - th))?;
    let b = p
        .dynamics
        .jac_z(u_next, z_next)
        .lin_comb(dt * th, &p.dynamics.jac_z(v_i, z_next), dt * (1.0 - th))?;
    if !(k.is_finite() && c.is_finite() && b.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    Ok(StageJacobians { k, c, b })
}

pub const DEFAULT_NEWTON_MAX_ITERS: usize = 25;

/// Marches the θ-method from `u0` with the given controls, solving each step by Newton's
/// method with the `K` block as Jacobian.
pub fn forward_solve(p: &ProblemSpec, controls: &[Vec<f64>], g: &TimeGrid, newton_tol: f64) -> Result<Trajectory> {
    forward_solve_with(p, controls, g, newton_tol, DEFAULT_NEWTON_MAX_ITERS)
}

pub fn forward_solve_with(
    p: &ProblemSpec,
    controls: &[Vec<f64>],
    g: &TimeGrid,
    newton_tol: f64,
    max_newton: usize,
) -> Result<Trajectory> {
    check_len(g.n_steps, controls.len())?;
    let mut states = Vec::with_capacity(g.n_steps);
    let mut prev = p.u0.clone();
    for (step, z) in controls.iter().enumerate() {
        check_len(p.n_z(), z.len())?;
        let mut mu = vec![0.0; p.n_u()];
        p.mass.mul_add_into(1.0, &prev, &mut mu);
        let tol = newton_tol * norm_raw(&mu) + newton_tol;
        let mut u = prev.clone();
        let mut converged = false;
        let mut res_norm = f64::INFINITY;
        for _ in 0..=max_newton {
            let r = theta_residual(p, &prev, &u, z, g.dt)?;
            res_norm = norm_raw(&r);
            if res_norm <= tol {
                converged = true;
                break;
            }
            let k = stage_blocks(p, &prev, &u, z, g.dt)?.k;
            let du = SparseLu::factor(&k)
                .map_err(|_| Error::NewtonDivergence { step: step + 1, residual: res_norm })?
                .solve(&r)?;
            crate::linalg::axpy_into(-1.0, &du, &mut u);
            if p.theta == 0.0 || p.dynamics.is_affine() {
                // One linear solve is exact up to roundoff.
                let r = theta_residual(p, &prev, &u, z, g.dt)?;
                res_norm = norm_raw(&r);
                converged = res_norm <= tol.max(1e-12 * (norm_raw(&mu) + 1.0));
                break;
            }
        }
        if !converged || !res_norm.is_finite() {
            return Err(Error::NewtonDivergence { step: step + 1, residual: res_norm });
        }
        states.push(u.clone());
        prev = u;
    }
    Ok(Trajectory { states, controls: controls.to_vec() })
}

/// Objective value and gradient for the split tracking functional.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub grad: Primal,
}

fn quad_form(w: &SparseMatrix, x: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
    let mut wx = vec![0.0; x.len()];
    w.mul_add_into(1.0, x, &mut wx);
    crate::linalg::axpy_into(scale, &wx, grad);
    0.5 * scale * crate::linalg::dot_raw(x, &wx)
}

/// Rectangle-rule tracking objective with the state term split evenly between `u` and `v`.
pub fn objective_flat(p: &ProblemSpec, dt: f64, x: &Primal) -> Result<ObjectiveEval> {
    let d = x.dims;
    check_len(d.n_steps, p.state_targets.len())?;
    check_len(d.n_steps, p.control_targets.len())?;
    let mut grad = Primal::zeros(d);
    let mut value = 0.0;
    let (nu, nz) = (d.nu, d.nz);
    for i in 1..=d.n_steps {
        let ud = &p.state_targets[i - 1];
        let zd = &p.control_targets[i - 1];
        check_len(nu, ud.len())?;
        check_len(nz, zd.len())?;
        let eu: Vec<f64> = x.u_at(i).iter().zip(ud).map(|(a, b)| a - b).collect();
        let ev: Vec<f64> = x.v_at(i).iter().zip(ud).map(|(a, b)| a - b).collect();
        let ez: Vec<f64> = x.z_at(i).iter().zip(zd).map(|(a, b)| a - b).collect();
        let r = (i - 1) * nu..i * nu;
        value += quad_form(&p.state_weight, &eu, 0.5 * dt, &mut grad.u[r.clone()]);
        value += quad_form(&p.state_weight, &ev, 0.5 * dt, &mut grad.v[r.clone()]);
        value += quad_form(&p.control_weight, &ez, dt, &mut grad.z[(i - 1) * nz..i * nz]);
        if i == d.n_steps {
            if let Some(wt) = &p.terminal_weight {
                value += quad_form(wt, &eu, 0.5, &mut grad.u[r.clone()]);
                value += quad_form(wt, &ev, 0.5, &mut grad.v[r]);
            }
        }
    }
    if !value.is_finite() {
        return Err(Error::NonFiniteValue);
    }
    Ok(ObjectiveEval { value, grad })
}

/// Objective Hessian (block diagonal) applied to a primal direction.
pub fn objective_hessian_apply(p: &ProblemSpec, dt: f64, s: &Primal) -> Primal {
    let d = s.dims;
    let mut out = Primal::zeros(d);
    for i in 1..=d.n_steps {
        let r = (i - 1) * d.nu..i * d.nu;
        p.state_weight.mul_add_into(0.5 * dt, s.u_at(i), &mut out.u[r.clone()]);
        p.state_weight.mul_add_into(0.5 * dt, s.v_at(i), &mut out.v[r.clone()]);
        p.control_weight.mul_add_into(dt, s.z_at(i), &mut out.z[(i - 1) * d.nz..i * d.nz]);
        if i == d.n_steps {
            if let Some(wt) = &p.terminal_weight {
                wt.mul_add_into(0.5, s.u_at(i), &mut out.u[r.clone()]);
                wt.mul_add_into(0.5, s.v_at(i), &mut out.v[r]);
            }
        }
    }
    out
}

/// Per-node form of [`objective_flat`]: returns `(value, grad_u, grad_v, grad_z)`.
#[allow(clippy::type_complexity)]
pub fn objective_and_gradient(
    p: &ProblemSpec,
    traj: &Trajectory,
    virtual_states: &[Vec<f64>],
    dt: f64,
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    check_len(traj.states.len(), virtual_states.len())?;
    check_len(traj.states.len(), traj.controls.len())?;
    let mut x = Primal::from_trajectory(traj);
    x.dims = p.dims(traj.states.len());
    x.v = virtual_states.concat();
    check_len(x.u.len(), x.v.len())?;
    let ev = objective_flat(p, dt, &x)?;
    let g = &ev.grad;
    let split = |v: &[f64], w: usize| v.chunks(w.max(1)).map(<[f64]>::to_vec).collect::<Vec<_>>();
    Ok((ev.value, split(&g.u, p.n_u()), split(&g.v, p.n_u()), split(&g.z, p.n_z())))
}

/// Largest relative mismatch between the analytic Jacobians and central differences of `F`
/// at `(u, z)`, measured column-wise against `max(1, ‖column‖)`.
pub fn jacobian_fd_error(p: &ProblemSpec, u: &[f64], z: &[f64]) -> f64 {
    let ju = p.dynamics.jac_u(u, z).to_dense();
    let jz = p.dynamics.jac_z(u, z).to_dense();
    let mut worst: f64 = 0.0;
    let col_err = |analytic: &dyn Fn(usize) -> f64, fp: &[f64], fm: &[f64], h: f64, rows: usize| {
        let mut num = 0.0;
        let mut den: f64 = 0.0;
        for r in 0..rows {
            let fd = (fp[r] - fm[r]) / (2.0 * h);
            let (a, e) = (analytic(r), fd - analytic(r));
            num += e * e;
            den += a * a;
        }
        libm::sqrt(num) / libm::sqrt(den).max(1.0)
    };
    let n = p.n_u();
    for j in 0..u.len() {
        let h = 1e-6 * (1.0 + u[j].abs());
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[j] += h;
        um[j] -= h;
        let e = col_err(&|r| ju.get(r, j), &p.f_eval(&up, z), &p.f_eval(&um, z), h, n);
        worst = worst.max(e);
    }
    for j in 0..z.len() {
        let h = 1e-6 * (1.0 + z[j].abs());
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[j] += h;
        zm[j] -= h;
        let e = col_err(&|r| jz.get(r, j), &p.f_eval(u, &zp), &p.f_eval(u, &zm), h, n);
        worst = worst.max(e);
    }
    worst
}
