//! Multigrid in time: a hierarchy of rediscretized KKT operators, block-Jacobi smoothing,
//! and an SGS-preconditioned GMRES coarse solve, used as a (flexible) preconditioner.

mod transfer;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::kkt::{check_theorem1, factor_diagonal, BlockTriKKT, DiagFactors, Layout, Theorem1Report};
use crate::krylov::{gmres, KrylovOptions, LinearOperator, Preconditioner};
use crate::linalg::{axpy_into, norm_raw};
use crate::smoothers::{smooth, BlockPreconditioner, SmootherConfig, SmootherKind};
use crate::timedisc::{Primal, ProblemSpec};

pub use transfer::{
    prolong_control, prolong_kkt, prolong_state, restrict_control, restrict_kkt, restrict_primal, restrict_state,
};

/// Coarsest step count targeted by [`default_levels`].
pub const DEFAULT_COARSEST_STEPS: usize = 16;
pub const DEFAULT_COARSE_TOL: f64 = 1e-2;
/// Jacobi damping used inside cycles. Undamped block Jacobi acts on these systems like a
/// shift in time (state forward, adjoint backward) and barely damps the oscillatory modes;
/// with `ω = ½` the highest frequencies are removed in one sweep.
pub const MG_JACOBI_DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CycleKind {
    V,
    W,
    F,
}

impl fmt::Display for CycleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::V => "v",
            Self::W => "w",
            Self::F => "f",
        })
    }
}

impl FromStr for CycleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v" => Ok(Self::V),
            "w" => Ok(Self::W),
            "f" => Ok(Self::F),
            _ => Err(Error::InvalidConfig(alloc::format!("cycle `{s}`: expected one of v, f, w"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgConfig {
    /// Number of levels including the finest; `None` picks [`default_levels`].
    pub levels: Option<usize>,
    pub cycle: CycleKind,
    pub smoother: SmootherConfig,
    pub coarse_tol: f64,
    pub coarse_max_iters: usize,
}

impl Default for MgConfig {
    fn default() -> Self {
        Self {
            levels: None,
            cycle: CycleKind::W,
            smoother: SmootherConfig { damping: MG_JACOBI_DAMPING, ..SmootherConfig::default() },
            coarse_tol: DEFAULT_COARSE_TOL,
            coarse_max_iters: crate::krylov::DEFAULT_MAX_ITERS,
        }
    }
}

/// Halves `n` while it stays even and at least [`DEFAULT_COARSEST_STEPS`] on the coarse side.
pub fn default_levels(n_steps: usize) -> usize {
    let (mut n, mut levels) = (n_steps, 1);
    while n % 2 == 0 && n / 2 >= DEFAULT_COARSEST_STEPS {
        n /= 2;
        levels += 1;
    }
    levels
}

pub struct Level {
    pub op: BlockTriKKT,
    pub factors: DiagFactors,
    pub theorem1: Theorem1Report,
    pub dt: f64,
}

pub struct MgHierarchy {
    pub levels: Vec<Level>,
    pub cfg: MgConfig,
}

/// Counters accumulated over preconditioner applications.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MgStats {
    pub cycles: usize,
    pub coarse_calls: usize,
    pub coarse_iters: usize,
}

impl MgStats {
    pub fn coarse_average(&self) -> f64 {
        if self.coarse_calls == 0 {
            0.0
        } else {
            self.coarse_iters as f64 / self.coarse_calls as f64
        }
    }
}

fn level_from(p: &ProblemSpec, x: &Primal, dt: f64) -> Result<Level> {
    let op = BlockTriKKT::from_problem(p, x, dt)?;
    level_from_op(op, dt)
}

fn level_from_op(op: BlockTriKKT, dt: f64) -> Result<Level> {
    let theorem1 = check_theorem1(op.stages());
    if let Some(&(_, i)) = theorem1.failures().first() {
        return Err(Error::SingularBlock(i));
    }
    let factors = factor_diagonal(&op)?;
    Ok(Level { op, factors, theorem1, dt })
}

fn resolve_levels(n_steps: usize, cfg: &MgConfig) -> Result<usize> {
    let levels = cfg.levels.unwrap_or_else(|| default_levels(n_steps)).max(1);
    let div = 1usize << (levels - 1);
    if n_steps % div != 0 || n_steps / div < 1 {
        return Err(Error::IndivisibleSteps { steps: n_steps, levels });
    }
    Ok(levels)
}

impl MgHierarchy {
    /// Builds the hierarchy by rediscretization: each coarser level doubles `dt` and
    /// linearizes at the restricted iterate.
    pub fn build(p: &ProblemSpec, x: &Primal, dt: f64, cfg: MgConfig) -> Result<Self> {
        let n_levels = resolve_levels(x.dims.n_steps, &cfg)?;
        let mut levels = Vec::with_capacity(n_levels);
        let mut xl = x.clone();
        let mut dtl = dt;
        for l in 0..n_levels {
            if l > 0 {
                xl = restrict_primal(&xl)?;
                dtl *= 2.0;
            }
            levels.push(level_from(p, &xl, dtl)?);
        }
        Ok(Self { levels, cfg })
    }

    /// Uses an already assembled fine operator (whose linearization point is `x`).
    pub fn build_with_fine(p: &ProblemSpec, fine: BlockTriKKT, x: &Primal, dt: f64, cfg: MgConfig) -> Result<Self> {
        let n_levels = resolve_levels(x.dims.n_steps, &cfg)?;
        let mut levels = Vec::with_capacity(n_levels);
        levels.push(level_from_op(fine, dt)?);
        let mut xl = x.clone();
        let mut dtl = dt;
        for _ in 1..n_levels {
            xl = restrict_primal(&xl)?;
            dtl *= 2.0;
            levels.push(level_from(p, &xl, dtl)?);
        }
        Ok(Self { levels, cfg })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn fine(&self) -> &BlockTriKKT {
        &self.levels[0].op
    }

    pub fn step_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.op.dims().n_steps).collect()
    }

    fn layout(&self, l: usize) -> &Layout {
        self.levels[l].op.layout()
    }

    /// SGS-preconditioned GMRES on level `l` for `A e = r`, from `e = 0`.
    pub fn coarse_solve(&self, l: usize, r: &[f64], rel_tol: f64, max_iters: usize, stats: &mut MgStats) -> Result<Vec<f64>> {
        let lev = &self.levels[l];
        let mut prec = BlockPreconditioner { kind: SmootherKind::Sgs, op: &lev.op, factors: &lev.factors };
        let opts = KrylovOptions { rel_tol, max_iters, ..KrylovOptions::default() };
        let (e, rep) = gmres(&lev.op, Some(&mut prec), r, &vec![0.0; r.len()], &opts)?;
        stats.coarse_calls += 1;
        stats.coarse_iters += rep.iterations;
        Ok(e)
    }

    fn trace(&self, l: usize, phase: &str, b: &[f64], x: &[f64]) {
        if log::log_enabled!(log::Level::Trace) {
            if let Ok(ax) = self.levels[l].op.apply(x) {
                let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
                log::trace!("level={l} phase={phase} rnorm={:e}", norm_raw(&r));
            }
        }
    }

    fn residual(&self, l: usize, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.levels[l].op.apply(x)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        Ok(r)
    }

    /// One cycle of the configured kind on level `l` for `A x = b` from `x0`.
    pub fn cycle(&self, l: usize, b: &[f64], x0: &[f64], stats: &mut MgStats) -> Result<Vec<f64>> {
        self.cycle_kind(self.cfg.cycle, l, b, x0, stats)
    }

    fn cycle_kind(&self, kind: CycleKind, l: usize, b: &[f64], x0: &[f64], stats: &mut MgStats) -> Result<Vec<f64>> {
        let last = self.n_levels() - 1;
        if l == last {
            let r = self.residual(l, b, x0)?;
            let e = self.coarse_solve(l, &r, self.cfg.coarse_tol, self.cfg.coarse_max_iters, stats)?;
            let mut x = x0.to_vec();
            axpy_into(1.0, &e, &mut x);
            self.trace(l, "coarse", b, &x);
            return Ok(x);
        }
        let lev = &self.levels[l];
        let x1 = smooth(&self.cfg.smoother, &lev.op, &lev.factors, b, x0)?;
        self.trace(l, "pre", b, &x1);
        let rc = restrict_kkt(self.layout(l), &self.residual(l, b, &x1)?)?;
        let zero = vec![0.0; rc.len()];
        let ec = match kind {
            CycleKind::V => self.cycle_kind(CycleKind::V, l + 1, &rc, &zero, stats)?,
            CycleKind::W => {
                let e = self.cycle_kind(CycleKind::W, l + 1, &rc, &zero, stats)?;
                self.cycle_kind(CycleKind::W, l + 1, &rc, &e, stats)?
            }
            CycleKind::F => {
                let e = self.cycle_kind(CycleKind::F, l + 1, &rc, &zero, stats)?;
                self.cycle_kind(CycleKind::V, l + 1, &rc, &e, stats)?
            }
        };
        let mut x2 = x1;
        axpy_into(1.0, &prolong_kkt(self.layout(l + 1), &ec)?, &mut x2);
        let out = smooth(&self.cfg.smoother, &lev.op, &lev.factors, b, &x2)?;
        self.trace(l, "post", b, &out);
        Ok(out)
    }

    pub fn preconditioner(&self) -> MgPreconditioner<'_> {
        MgPreconditioner { h: self, stats: MgStats::default() }
    }
}

/// One cycle from a zero initial guess per application. Flagged flexible since the inner
/// coarse GMRES makes the map nonlinear.
pub struct MgPreconditioner<'a> {
    pub h: &'a MgHierarchy,
    pub stats: MgStats,
}

impl Preconditioner for MgPreconditioner<'_> {
    fn apply(&mut self, r: &[f64]) -> Result<Vec<f64>> {
        self.stats.cycles += 1;
        let zero = vec![0.0; r.len()];
        self.h.cycle(0, r, &zero, &mut self.stats)
    }

    fn is_flexible(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkt::assemble::tests::{perturbed_iterate, random_vec};
    use crate::krylov::fgmres;
    use crate::linalg::{dot_raw, lu_factor};
    use crate::problems::{build_burgers, build_vanderpol, BurgersConfig, VanDerPolConfig};
    use crate::timedisc::tests::scalar_problem;
    use crate::timedisc::{forward_solve, TimeGrid};

    fn vdp(n: usize) -> (ProblemSpec, Primal, f64) {
        let g = TimeGrid::new(8.0, n).unwrap();
        let p = build_vanderpol(&VanDerPolConfig::default(), &g).unwrap();
        let x = perturbed_iterate(&p, &g, 3);
        (p, x, g.dt)
    }

    fn lq(n: usize) -> (ProblemSpec, Primal, f64) {
        let g = TimeGrid::new(1.0, n).unwrap();
        let p = scalar_problem(1.0, n);
        let traj = forward_solve(&p, &vec![vec![0.0]; n], &g, 1e-12).unwrap();
        (p, Primal::from_trajectory(&traj), g.dt)
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
        norm_raw(&d) / norm_raw(b)
    }

    #[test]
    fn level_counts() {
        assert_eq!(default_levels(64), 3);
        assert_eq!(default_levels(2048), 8);
        assert_eq!(default_levels(8), 1);
        let (p, x, dt) = vdp(64);
        let h = MgHierarchy::build(&p, &x, dt, MgConfig { levels: Some(3), ..MgConfig::default() }).unwrap();
        assert_eq!(h.step_counts(), vec![64, 32, 16]);
        let (p, x, dt) = vdp(100);
        let err = MgHierarchy::build(&p, &x, dt, MgConfig { levels: Some(4), ..MgConfig::default() });
        assert!(matches!(err, Err(Error::IndivisibleSteps { steps: 100, levels: 4 })));
    }

    #[test]
    fn coarse_levels_are_rediscretizations() {
        let (p, x, dt) = vdp(16);
        let h = MgHierarchy::build(&p, &x, dt, MgConfig { levels: Some(3), ..MgConfig::default() }).unwrap();
        let mut xl = x.clone();
        for (l, lev) in h.levels.iter().enumerate() {
            if l > 0 {
                xl = restrict_primal(&xl).unwrap();
            }
            let direct = BlockTriKKT::from_problem(&p, &xl, dt * (1 << l) as f64).unwrap();
            let (a, b) = (lev.op.to_dense(), direct.to_dense());
            assert!(a.as_slice().iter().zip(b.as_slice()).all(|(p, q)| (p - q).abs() <= 1e-12));
            assert!(a.is_symmetric(1e-14));
            assert!(lev.theorem1.passed());
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let (p, x, dt) = vdp(32);
        let h = MgHierarchy::build(&p, &x, dt, MgConfig { levels: Some(2), ..MgConfig::default() }).unwrap();
        let z = vec![0.0; h.fine().dim()];
        let mut st = MgStats::default();
        assert_eq!(h.cycle(0, &z, &z, &mut st).unwrap(), z);
    }

    #[test]
    fn coarse_solve_matches_dense() {
        let (p, x, dt) = vdp(8);
        let h = MgHierarchy::build(&p, &x, dt, MgConfig { levels: Some(1), ..MgConfig::default() }).unwrap();
        let r = random_vec(h.fine().dim(), 2);
        let e = h.coarse_solve(0, &r, 1e-14, 401, &mut MgStats::default()).unwrap();
        let expect = lu_factor(&h.fine().to_dense()).unwrap().solve(&r).unwrap();
        assert!(rel_err(&e, &expect) <= 1e-8);
    }

    #[test]
    fn two_grid_beats_smoothing_alone() {
        let (p, x, dt) = lq(16);
        let cfg = MgConfig {
            levels: Some(2),
            cycle: CycleKind::V,
            smoother: SmootherConfig { sweeps: 1, ..MgConfig::default().smoother },
            coarse_tol: 1e-14,
            ..MgConfig::default()
        };
        let h = MgHierarchy::build(&p, &x, dt, cfg).unwrap();
        let a = h.fine();
        let b = random_vec(a.dim(), 4);
        let exact = lu_factor(&a.to_dense()).unwrap().solve(&b).unwrap();
        let z = vec![0.0; a.dim()];
        let lev = &h.levels[0];
        let s1 = smooth(&cfg.smoother, &lev.op, &lev.factors, &b, &z).unwrap();
        let s2 = smooth(&cfg.smoother, &lev.op, &lev.factors, &b, &s1).unwrap();
        let mg = h.cycle(0, &b, &z, &mut MgStats::default()).unwrap();
        assert!(rel_err(&mg, &exact) < rel_err(&s2, &exact));
    }

    #[test]
    fn exact_single_level_preconditioner() {
        let (p, x, dt) = vdp(16);
        let cfg = MgConfig { levels: Some(1), coarse_tol: 1e-14, ..MgConfig::default() };
        let h = MgHierarchy::build(&p, &x, dt, cfg).unwrap();
        let b = random_vec(h.fine().dim(), 6);
        let mut pc = h.preconditioner();
        let (_, rep) = fgmres(h.fine(), &mut pc, &b, &vec![0.0; b.len()], &KrylovOptions::with_rel_tol(1e-10)).unwrap();
        assert!(rep.converged && rep.iterations <= 2);
    }

    #[test]
    fn two_grid_lq_convergence() {
        let (p, x, dt) = lq(8);
        let cfg = MgConfig { levels: Some(2), coarse_tol: 1e-10, ..MgConfig::default() };
        let h = MgHierarchy::build(&p, &x, dt, cfg).unwrap();
        let a = h.fine();
        let b = random_vec(a.dim(), 1);
        let x0 = vec![0.0; a.dim()];
        let opts = KrylovOptions::with_rel_tol(1e-10);
        let (sol, rep) = fgmres(a, &mut h.preconditioner(), &b, &x0, &opts).unwrap();
        let (_, plain) = gmres(a, None, &b, &x0, &opts).unwrap();
        assert!(rep.converged && rep.iterations <= 10, "{}", rep.iterations);
        assert!(plain.iterations >= 25, "{}", plain.iterations);
        let exact = lu_factor(&a.to_dense()).unwrap().solve(&b).unwrap();
        assert!(rel_err(&sol, &exact) <= 1e-8);
    }

    #[test]
    fn inexact_coarse_solve_is_nonlinear() {
        let (p, x, dt) = vdp(32);
        let cfg = MgConfig { levels: Some(2), coarse_tol: 1e-2, ..MgConfig::default() };
        let h = MgHierarchy::build(&p, &x, dt, cfg).unwrap();
        let mut pc = h.preconditioner();
        assert!(pc.is_flexible());
        let (a, b) = (random_vec(h.fine().dim(), 1), random_vec(h.fine().dim(), 2));
        let sum: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
        let (pa, pb, ps) = (pc.apply(&a).unwrap(), pc.apply(&b).unwrap(), pc.apply(&sum).unwrap());
        let gap: Vec<f64> = (0..ps.len()).map(|k| ps[k] - pa[k] - pb[k]).collect();
        assert!(norm_raw(&gap) > 1e-8 * norm_raw(&ps));
    }

    #[test]
    fn all_cycles_precondition_burgers() {
        let g = TimeGrid::new(1.0, 32).unwrap();
        let p = build_burgers(&BurgersConfig { n_elems: 16, ..BurgersConfig::default() }, &g).unwrap();
        let x = perturbed_iterate(&p, &g, 2);
        let b = random_vec(p.dims(32).kkt_len(), 3);
        for cycle in [CycleKind::V, CycleKind::W, CycleKind::F] {
            let cfg = MgConfig { levels: Some(3), cycle, ..MgConfig::default() };
            let h = MgHierarchy::build(&p, &x, g.dt, cfg).unwrap();
            let (sol, rep) = fgmres(h.fine(), &mut h.preconditioner(), &b, &vec![0.0; b.len()], &KrylovOptions::with_rel_tol(1e-10)).unwrap();
            assert!(rep.converged && rep.iterations <= 40, "{cycle}: {}", rep.iterations);
            let r = h.fine().apply(&sol).unwrap();
            assert!(rel_err(&r, &b) <= 1e-9);
        }
        let _ = dot_raw;
    }

    fn fgmres_iters(n: usize, cfg: MgConfig) -> usize {
        let (p, x, dt) = vdp(n);
        let h = MgHierarchy::build(&p, &x, dt, cfg).unwrap();
        let b = random_vec(h.fine().dim(), 8);
        let (_, rep) = fgmres(h.fine(), &mut h.preconditioner(), &b, &vec![0.0; b.len()], &KrylovOptions::with_rel_tol(1e-6)).unwrap();
        assert!(rep.converged);
        rep.iterations
    }

    #[test]
    fn damped_cycles_are_mesh_independent() {
        let cfg = MgConfig::default();
        let (coarse, fine) = (fgmres_iters(64, cfg), fgmres_iters(256, cfg));
        assert!(fine as f64 <= 1.6 * coarse as f64 && fine <= 25, "{coarse} -> {fine}");
        let undamped = MgConfig { smoother: SmootherConfig::default(), ..cfg };
        assert!(fgmres_iters(256, undamped) >= 3 * fine);
    }
}
