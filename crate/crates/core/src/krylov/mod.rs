//! Krylov solvers over abstract operators: right-preconditioned restarted GMRES, flexible
//! GMRES, and trust-region truncated projected CG.

mod cg;
mod gmres;
mod operator;

pub use cg::{projected_cg, CgOutcome, CgResult, CgSetup};
pub use gmres::{fgmres, gmres, KrylovOptions, SolveReport, DEFAULT_MAX_ITERS};
pub use operator::{
    FnOperator, FnPreconditioner, IdentityPreconditioner, LinearOperator, Preconditioner,
};
