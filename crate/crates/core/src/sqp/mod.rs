//! Composite-step trust-region SQP. Each iteration computes a quasi-normal step toward
//! linearized feasibility, a tangential step by projected CG on the constraint nullspace,
//! a multiplier estimate at the trial point, and accepts or rejects the trial point with an
//! augmented-Lagrangian merit function. Every projection and correction is an augmented
//! solve, preconditioned by multigrid in time by default.

mod lagrangian;
mod steps;
mod system;

use alloc::vec::Vec;

pub use lagrangian::{
    constraints, dual_from_flat, dual_to_flat, primal_from_flat, primal_to_flat, HessianMode, LagrangianHessian,
    QMetric,
};
pub use steps::{cauchy_point, dogleg, tolerance_budget, ConstraintJacobian};
pub use system::{AugmentedSystem, LinearSolverConfig, LinearStats, OuterSolver, PrecondKind, Probe};

use crate::error::{Error, Result};
use crate::kkt::Dual;
use crate::krylov::{projected_cg, CgSetup};
use crate::linalg::{axpy_into, dot_raw, norm_raw};
use crate::timedisc::{forward_solve, objective_flat, Primal, ProblemSpec, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqpConfig {
    /// Nominal linear-solver tolerance.
    pub tau: f64,
    /// Fraction of the trust radius available to the quasi-normal step.
    pub zeta: f64,
    pub gtol: f64,
    pub ctol: f64,
    pub max_iters: usize,
    pub delta0: f64,
    /// Acceptance threshold on `ared / pred`.
    pub eta1: f64,
    /// Ratio above which a step on the boundary doubles the radius.
    pub eta2: f64,
    pub hessian: HessianMode,
    pub cg_rel_tol: f64,
    pub cg_max_iters: usize,
    pub penalty0: f64,
}

impl Default for SqpConfig {
    fn default() -> Self {
        Self {
            tau: 1e-2,
            zeta: 0.8,
            gtol: 1e-6,
            ctol: 1e-6,
            max_iters: 50,
            delta0: 10.0,
            eta1: 1e-4,
            eta2: 0.75,
            hessian: HessianMode::ExactLagrangian,
            cg_rel_tol: 1e-2,
            cg_max_iters: 200,
            penalty0: 1.0,
        }
    }
}

impl SqpConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.tau) {
            return Err(Error::InvalidConfig(alloc::format!("tau = {}: expected 0 < tau < 1", self.tau)));
        }
        if !open_unit(self.zeta) {
            return Err(Error::InvalidConfig(alloc::format!("zeta = {}: expected 0 < zeta < 1", self.zeta)));
        }
        if !(self.delta0 > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!("delta0 = {}: expected > 0", self.delta0)));
        }
        if !(self.eta1 > 0.0 && self.eta1 < self.eta2 && self.eta2 < 1.0) {
            return Err(Error::InvalidConfig("expected 0 < eta1 < eta2 < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpState {
    pub x: Primal,
    pub y: Dual,
    pub delta: f64,
    pub penalty: f64,
    pub k: usize,
    /// `‖∇ₓL‖` in the `Q⁻¹` norm, i.e. the `Q`-norm of the projected gradient.
    pub grad_norm: f64,
    pub c_norm: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub k: usize,
    pub c_norm: f64,
    pub grad_norm: f64,
    /// Trust radius used for this step.
    pub radius: f64,
    /// Trust radius after the acceptance test.
    pub delta: f64,
    pub step_norm: f64,
    pub ratio: f64,
    pub accepted: bool,
    pub cg_iters: usize,
    pub ls_calls: usize,
    pub ls_iters_total: usize,
    pub coarse_calls: usize,
    pub coarse_iters: usize,
}

impl StepStats {
    pub fn ls_avg(&self) -> f64 {
        if self.ls_calls == 0 {
            0.0
        } else {
            self.ls_iters_total as f64 / self.ls_calls as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct SqpReport {
    pub state: SqpState,
    pub steps: Vec<StepStats>,
    pub converged: bool,
    /// All augmented solves, including the initial multiplier estimate.
    pub linear: LinearStats,
}

impl SqpReport {
    pub fn cg_total(&self) -> usize {
        self.steps.iter().map(|s| s.cg_iters).sum()
    }
}

/// Quantities at one iterate that are reused across the iteration.
struct Point {
    x: Primal,
    sys: AugmentedSystem,
    f: f64,
    grad_f: Vec<f64>,
    c: Vec<f64>,
}

impl Point {
    fn new(p: &ProblemSpec, x: Primal, dt: f64, lin: &LinearSolverConfig) -> Result<Self> {
        let obj = objective_flat(p, dt, &x)?;
        let c = dual_to_flat(&constraints(p, &x, dt)?);
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        let sys = AugmentedSystem::build(p, &x, dt, lin)?;
        Ok(Self { grad_f: primal_to_flat(&obj.grad), f: obj.value, c, sys, x })
    }

    fn grad_lagrangian(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.sys.apply_transpose(y)?;
        axpy_into(1.0, &self.grad_f, &mut g);
        Ok(g)
    }

    fn merit(&self, y: &[f64], nu: f64) -> f64 {
        self.f + dot_raw(y, &self.c) + nu * dot_raw(&self.c, &self.c)
    }
}

struct Driver<'a, 'p> {
    p: &'a ProblemSpec,
    dt: f64,
    cfg: &'a SqpConfig,
    lin: &'a LinearSolverConfig,
    q: QMetric,
    stats: LinearStats,
    probe: Option<Probe<'p>>,
}

impl Driver<'_, '_> {
    fn budget(&self, r1: &[f64], r2: &[f64], delta: f64) -> f64 {
        tolerance_budget(norm_raw(r1), norm_raw(r2), 0.0, delta, self.cfg.tau)
    }

    /// Solves the multiplier system at `pt`; returns `(δy, ‖∇ₓL‖)`.
    fn multiplier_update(&mut self, pt: &Point, y: &[f64], delta: f64) -> Result<(Vec<f64>, f64)> {
        let r1: Vec<f64> = pt.grad_lagrangian(y)?.iter().map(|v| -v).collect();
        let r2 = alloc::vec![0.0; y.len()];
        let b = self.budget(&r1, &r2, delta);
        let (proj, dy) = pt.sys.solve(self.lin, &r1, &r2, b, &mut self.stats, &mut self.probe)?;
        Ok((dy, self.q.norm(&proj)))
    }

    fn quasi_normal(&mut self, pt: &Point, delta: f64) -> Result<Vec<f64>> {
        let radius = self.cfg.zeta * delta;
        if norm_raw(&pt.c) == 0.0 {
            return Ok(alloc::vec![0.0; pt.grad_f.len()]);
        }
        let q = &self.q;
        let n_cp = cauchy_point(&pt.sys, &|r| q.solve(r), &pt.c, radius)?;
        if q.norm(&n_cp) >= radius * (1.0 - 1e-12) {
            return Ok(n_cp);
        }
        let r1: Vec<f64> = q.apply(&n_cp).iter().map(|v| -v).collect();
        let mut r2 = pt.sys.apply(&n_cp)?;
        for (a, b) in r2.iter_mut().zip(&pt.c) {
            *a = -*a - b;
        }
        let b = self.budget(&r1, &r2, delta);
        let (dn, _) = pt.sys.solve(self.lin, &r1, &r2, b, &mut self.stats, &mut self.probe)?;
        let mut full = n_cp.clone();
        axpy_into(1.0, &dn, &mut full);
        let q = &self.q;
        Ok(dogleg(&n_cp, &full, &|v| q.apply(v), radius))
    }

    fn tangential(&mut self, pt: &Point, y: &[f64], n: &[f64], delta: f64) -> Result<(Vec<f64>, usize)> {
        let yd = dual_from_flat(pt.x.dims, y);
        let hess = LagrangianHessian { p: self.p, x: &pt.x, y: &yd, dt: self.dt, mode: self.cfg.hessian };
        let mut grad = crate::krylov::LinearOperator::apply(&hess, n)?;
        axpy_into(1.0, &pt.grad_lagrangian(y)?, &mut grad);
        let zero = alloc::vec![0.0; y.len()];
        let (lin, tau) = (self.lin, self.cfg.tau);
        let stats = &mut self.stats;
        let probe = &mut self.probe;
        let mut project = |r: &[f64]| -> Result<Vec<f64>> {
            let b = tolerance_budget(norm_raw(r), 0.0, 0.0, delta, tau);
            Ok(pt.sys.solve(lin, r, &zero, b, stats, probe)?.0)
        };
        let setup = CgSetup { metric: Some(&self.q), offset: Some(n), abs_tol: 0.0 };
        let res = projected_cg(&hess, &mut project, &grad, delta, self.cfg.cg_rel_tol, self.cfg.cg_max_iters, &setup)?;
        Ok((res.step, res.iterations))
    }

    /// Model quantities for the merit test: `(q_L, ‖c‖² − ‖c + c_x s‖²)` where `q_L` is the
    /// change of the Lagrangian model including the multiplier change.
    fn model(&self, pt: &Point, y: &[f64], dy: &[f64], s: &[f64]) -> Result<(f64, f64)> {
        let yd = dual_from_flat(pt.x.dims, y);
        let hess = LagrangianHessian { p: self.p, x: &pt.x, y: &yd, dt: self.dt, mode: self.cfg.hessian };
        let hs = crate::krylov::LinearOperator::apply(&hess, s)?;
        let mut lin_c = pt.sys.apply(s)?;
        axpy_into(1.0, &pt.c, &mut lin_c);
        let q = dot_raw(&pt.grad_lagrangian(y)?, s) + 0.5 * dot_raw(s, &hs) + dot_raw(dy, &lin_c);
        Ok((q, dot_raw(&pt.c, &pt.c) - dot_raw(&lin_c, &lin_c)))
    }
}

/// Runs SQP from the forward solution with zero control.
pub fn sqp_solve(p: &ProblemSpec, g: &TimeGrid, cfg: &SqpConfig, lin: &LinearSolverConfig) -> Result<SqpReport> {
    let traj = forward_solve(p, &alloc::vec![alloc::vec![0.0; p.n_z()]; g.n_steps], g, 1e-12)?;
    sqp_solve_from(p, g.dt, Primal::from_trajectory(&traj), cfg, lin, None)
}

/// Runs SQP from `x0`; `probe` sees every augmented system that is solved.
pub fn sqp_solve_from(
    p: &ProblemSpec,
    dt: f64,
    x0: Primal,
    cfg: &SqpConfig,
    lin: &LinearSolverConfig,
    probe: Option<Probe<'_>>,
) -> Result<SqpReport> {
    cfg.validate()?;
    let dims = x0.dims;
    let mut d = Driver { p, dt, cfg, lin, q: QMetric::new(p, dims, dt)?, stats: LinearStats::default(), probe };
    let mut pt = Point::new(p, x0, dt, lin)?;
    let mut delta = cfg.delta0;
    let mut nu = cfg.penalty0;
    let mut y = alloc::vec![0.0; dims.dual_len()];
    let (dy, mut grad_norm) = d.multiplier_update(&pt, &y, delta)?;
    axpy_into(1.0, &dy, &mut y);
    let mut steps = Vec::new();
    let mut converged = false;
    let mut k = 0;
    loop {
        let c_norm = norm_raw(&pt.c);
        if grad_norm <= cfg.gtol && c_norm <= cfg.ctol {
            converged = true;
            break;
        }
        if k >= cfg.max_iters || delta < 1e-14 {
            break;
        }
        let (before, grad0, radius) = (d.stats, grad_norm, delta);
        let n = d.quasi_normal(&pt, delta)?;
        let (t, cg_iters) = d.tangential(&pt, &y, &n, delta)?;
        let mut s = n;
        axpy_into(1.0, &t, &mut s);
        let step_norm = d.q.norm(&s);

        let mut xt = primal_to_flat(&pt.x);
        axpy_into(1.0, &s, &mut xt);
        let trial = Point::new(p, primal_from_flat(dims, &xt), dt, lin).and_then(|tp| {
            let (dy, gn) = d.multiplier_update(&tp, &y, delta)?;
            Ok((tp, dy, gn))
        });
        let mut ratio = f64::NEG_INFINITY;
        let mut accepted = false;
        match trial {
            Ok((tp, dy, gn)) => {
                let (ql, fd) = d.model(&pt, &y, &dy, &s)?;
                if fd > 0.0 {
                    nu = nu.max(2.0 * ql / fd + 1.0);
                }
                let pred = -ql + nu * fd;
                let mut y_new = y.clone();
                axpy_into(1.0, &dy, &mut y_new);
                let (m0, m1) = (pt.merit(&y, nu), tp.merit(&y_new, nu));
                let guard = 10.0 * f64::EPSILON * m0.abs().max(1.0);
                let ared = m0 - m1 + guard;
                if pred > 0.0 && m1.is_finite() {
                    ratio = ared / (pred + guard);
                }
                if ratio >= cfg.eta1 {
                    accepted = true;
                    if ratio >= cfg.eta2 && step_norm >= 0.8 * delta {
                        delta *= 2.0;
                    }
                    pt = tp;
                    y = y_new;
                    grad_norm = gn;
                }
            }
            Err(Error::NonFiniteValue | Error::SingularBlock(_) | Error::NewtonDivergence { .. }) => {}
            Err(e) => return Err(e),
        }
        if !accepted {
            delta = 0.5 * delta.min(step_norm);
        }
        let used = d.stats.since(&before);
        let st = StepStats {
            k,
            c_norm,
            grad_norm: grad0,
            radius,
            delta,
            step_norm,
            ratio,
            accepted,
            cg_iters,
            ls_calls: used.calls,
            ls_iters_total: used.iterations,
            coarse_calls: used.coarse_calls,
            coarse_iters: used.coarse_iters,
        };
        log::info!(
            "k={} |c|={:e} |gradL|={:e} delta={:e} accepted={} cg={} ls_calls={} ls_avg={:.2}",
            k,
            c_norm,
            grad0,
            delta,
            u8::from(accepted),
            cg_iters,
            st.ls_calls,
            st.ls_avg()
        );
        steps.push(st);
        k += 1;
    }
    let c_norm = norm_raw(&pt.c);
    let state = SqpState { y: dual_from_flat(dims, &y), x: pt.x, delta, penalty: nu, k, grad_norm, c_norm };
    Ok(SqpReport { state, steps, converged, linear: d.stats })
}

#[cfg(test)]
mod tests;
