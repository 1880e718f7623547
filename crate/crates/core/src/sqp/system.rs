use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::lagrangian::{dual_from_flat, dual_to_flat, primal_from_flat, primal_to_flat};
use super::steps::ConstraintJacobian;
use crate::error::{Error, Result};
use crate::kkt::{BlockTriKKT, Dual};
use crate::krylov::{fgmres, gmres, KrylovOptions, LinearOperator, SolveReport, DEFAULT_MAX_ITERS};
use crate::multigrid::{MgConfig, MgHierarchy, MgStats};
use crate::smoothers::{BlockPreconditioner, SmootherKind};
use crate::timedisc::{Dims, Primal, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterSolver {
    Fgmres,
    Gmres,
}

impl fmt::Display for OuterSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fgmres => "fgmres",
            Self::Gmres => "gmres",
        })
    }
}

impl FromStr for OuterSolver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fgmres" => Ok(Self::Fgmres),
            "gmres" => Ok(Self::Gmres),
            _ => Err(Error::InvalidConfig(alloc::format!("outer `{s}`: expected one of gmres, fgmres"))),
        }
    }
}

/// Preconditioner for the augmented systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondKind {
    Multigrid,
    /// One application of a block splitting (Jacobi, FGS, BGS or SGS).
    Block(SmootherKind),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolverConfig {
    pub outer: OuterSolver,
    pub precond: PrecondKind,
    pub mg: MgConfig,
    pub max_iters: usize,
    pub restart: Option<usize>,
}

impl Default for LinearSolverConfig {
    fn default() -> Self {
        Self {
            outer: OuterSolver::Fgmres,
            precond: PrecondKind::Multigrid,
            mg: MgConfig::default(),
            max_iters: DEFAULT_MAX_ITERS,
            restart: None,
        }
    }
}

/// Krylov work accumulated over augmented solves.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearStats {
    pub calls: usize,
    pub iterations: usize,
    pub coarse_calls: usize,
    pub coarse_iters: usize,
    /// Solves that stopped at the iteration cap.
    pub unconverged: usize,
}

impl LinearStats {
    pub fn average(&self) -> f64 {
        if self.calls == 0 {
            0.0
        } else {
            self.iterations as f64 / self.calls as f64
        }
    }

    pub fn since(&self, earlier: &LinearStats) -> LinearStats {
        LinearStats {
            calls: self.calls - earlier.calls,
            iterations: self.iterations - earlier.iterations,
            coarse_calls: self.coarse_calls - earlier.coarse_calls,
            coarse_iters: self.coarse_iters - earlier.coarse_iters,
            unconverged: self.unconverged - earlier.unconverged,
        }
    }

    fn record(&mut self, rep: &SolveReport, mg: &MgStats) {
        self.calls += 1;
        self.iterations += rep.iterations;
        self.coarse_calls += mg.coarse_calls;
        self.coarse_iters += mg.coarse_iters;
        if !rep.converged {
            self.unconverged += 1;
        }
    }
}

/// Observer called with the system, right-hand side and absolute residual target of every
/// augmented solve.
pub type Probe<'a> = &'a mut dyn FnMut(&AugmentedSystem, &[f64], f64);

/// The augmented system linearized at one iterate, with its preconditioner data.
pub struct AugmentedSystem {
    pub hierarchy: MgHierarchy,
}

impl AugmentedSystem {
    pub fn build(p: &ProblemSpec, x: &Primal, dt: f64, cfg: &LinearSolverConfig) -> Result<Self> {
        let mg = match cfg.precond {
            PrecondKind::Multigrid => cfg.mg,
            _ => MgConfig { levels: Some(1), ..cfg.mg },
        };
        Ok(Self { hierarchy: MgHierarchy::build(p, x, dt, mg)? })
    }

    pub fn op(&self) -> &BlockTriKKT {
        self.hierarchy.fine()
    }

    pub fn dims(&self) -> Dims {
        self.op().dims()
    }

    fn apply_parts(&self, s: &Primal, y: &Dual) -> Result<(Primal, Dual)> {
        let lay = self.op().layout();
        Ok(lay.unpack(&self.op().apply(&lay.pack(s, y))?))
    }

    /// Solves `[[Q, c_xᵀ], [c_x, 0]] (p, q) = (r1, r2)` until the residual norm is at most
    /// `budget / √2`, so that `‖e₁‖ + ‖e₂‖ ≤ budget`.
    pub fn solve(
        &self,
        cfg: &LinearSolverConfig,
        r1: &[f64],
        r2: &[f64],
        budget: f64,
        stats: &mut LinearStats,
        probe: &mut Option<Probe<'_>>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.dims();
        let lay = self.op().layout();
        let rhs = lay.pack(&primal_from_flat(d, r1), &dual_from_flat(d, r2));
        let target = budget / core::f64::consts::SQRT_2;
        if let Some(f) = probe.as_mut() {
            f(self, &rhs, target);
        }
        let opts = KrylovOptions {
            rel_tol: 0.0,
            abs_tol: target,
            max_iters: cfg.max_iters,
            restart: cfg.restart,
        };
        let x0 = alloc::vec![0.0; rhs.len()];
        let h = &self.hierarchy;
        let lev = &h.levels[0];
        let mut mg_stats = MgStats::default();
        let (w, rep) = match (cfg.precond, cfg.outer) {
            (PrecondKind::Multigrid, outer) => {
                let mut pc = h.preconditioner();
                let out = match outer {
                    OuterSolver::Fgmres => fgmres(&lev.op, &mut pc, &rhs, &x0, &opts)?,
                    OuterSolver::Gmres => gmres(&lev.op, Some(&mut pc), &rhs, &x0, &opts)?,
                };
                mg_stats = pc.stats;
                out
            }
            (PrecondKind::Block(kind), outer) => {
                let mut pc = BlockPreconditioner { kind, op: &lev.op, factors: &lev.factors };
                match outer {
                    OuterSolver::Fgmres => fgmres(&lev.op, &mut pc, &rhs, &x0, &opts)?,
                    OuterSolver::Gmres => gmres(&lev.op, Some(&mut pc), &rhs, &x0, &opts)?,
                }
            }
            (PrecondKind::None, _) => gmres(&lev.op, None, &rhs, &x0, &opts)?,
        };
        stats.record(&rep, &mg_stats);
        let (pp, dd) = lay.unpack(&w);
        Ok((primal_to_flat(&pp), dual_to_flat(&dd)))
    }
}

impl ConstraintJacobian for AugmentedSystem {
    fn apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        let d = self.dims();
        let (_, js) = self.apply_parts(&primal_from_flat(d, s), &Dual::zeros(d))?;
        Ok(dual_to_flat(&js))
    }

    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        let d = self.dims();
        let (jty, _) = self.apply_parts(&Primal::zeros(d), &dual_from_flat(d, y))?;
        Ok(primal_to_flat(&jty))
    }
}
