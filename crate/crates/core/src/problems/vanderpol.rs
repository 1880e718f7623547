use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::timedisc::{forward_solve, Dynamics, ProblemSpec, TimeGrid};

/// Controlled van der Pol oscillator `u₁' = u₂ + z₁`, `u₂' = μ(1 − u₁²)u₂ − u₁ + z₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanDerPolConfig {
    pub mu: f64,
    pub alpha: f64,
    pub t_final: f64,
    /// Damping used to generate the tracking data.
    pub data_mu: f64,
    pub u_init: [f64; 2],
    pub theta: f64,
}

impl Default for VanDerPolConfig {
    fn default() -> Self {
        Self { mu: 1.0, alpha: 0.1, t_final: 8.0, data_mu: 0.01, u_init: [1.0, 1.0], theta: 1.0 }
    }
}

/// Reference steps per grid step used to integrate the target orbit.
const TARGET_SUBSTEPS: usize = 16;

#[derive(Debug, Clone, Copy)]
pub struct VanDerPolDynamics {
    pub mu: f64,
}

impl Dynamics for VanDerPolDynamics {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn eval(&self, u: &[f64], z: &[f64], out: &mut [f64]) {
        out[0] = u[1] + z[0];
        out[1] = self.mu * (1.0 - u[0] * u[0]) * u[1] - u[0] + z[1];
    }

    fn jac_u(&self, u: &[f64], _z: &[f64]) -> SparseMatrix {
        let mu = self.mu;
        SparseMatrix::from_triplets(
            2,
            2,
            &[
                (0, 0, 0.0),
                (0, 1, 1.0),
                (1, 0, -2.0 * mu * u[0] * u[1] - 1.0),
                (1, 1, mu * (1.0 - u[0] * u[0])),
            ],
        )
    }

    fn jac_z(&self, _u: &[f64], _z: &[f64]) -> SparseMatrix {
        SparseMatrix::identity(2)
    }

    fn hess_contract(
        &self,
        u: &[f64],
        _z: &[f64],
        lambda: &[f64],
        du: &[f64],
        _dz: &[f64],
        scale: f64,
        out_u: &mut [f64],
        _out_z: &mut [f64],
    ) {
        let c = scale * lambda[1] * self.mu;
        out_u[0] += c * (-2.0 * u[1] * du[0] - 2.0 * u[0] * du[1]);
        out_u[1] += c * (-2.0 * u[0] * du[0]);
    }
}

pub fn build_vanderpol(cfg: &VanDerPolConfig, g: &TimeGrid) -> Result<ProblemSpec> {
    if !(cfg.alpha > 0.0) || !(cfg.t_final > 0.0) || !(0.0..=1.0).contains(&cfg.theta) {
        return Err(Error::InvalidConfig(alloc::format!(
            "van der Pol needs alpha > 0, t_final > 0 and theta in [0, 1] (got {}, {}, {})",
            cfg.alpha,
            cfg.t_final,
            cfg.theta
        )));
    }
    let targets = target_orbit(cfg, g)?;
    Ok(ProblemSpec {
        dynamics: Box::new(VanDerPolDynamics { mu: cfg.mu }),
        mass: SparseMatrix::identity(2),
        u0: cfg.u_init.to_vec(),
        theta: cfg.theta,
        state_weight: SparseMatrix::identity(2),
        control_weight: SparseMatrix::scaled_identity(2, cfg.alpha),
        state_metric: SparseMatrix::identity(2),
        terminal_weight: None,
        state_targets: targets,
        control_targets: vec![vec![0.0; 2]; g.n_steps],
    })
}

/// Uncontrolled orbit with damping `data_mu`, integrated by Crank-Nicolson on a grid
/// `TARGET_SUBSTEPS` times finer than `g` and sampled at the nodes of `g`.
fn target_orbit(cfg: &VanDerPolConfig, g: &TimeGrid) -> Result<Vec<Vec<f64>>> {
    let fine = TimeGrid::new(g.t_final, g.n_steps * TARGET_SUBSTEPS)?;
    let data = ProblemSpec {
        dynamics: Box::new(VanDerPolDynamics { mu: cfg.data_mu }),
        mass: SparseMatrix::identity(2),
        u0: cfg.u_init.to_vec(),
        theta: 0.5,
        state_weight: SparseMatrix::identity(2),
        control_weight: SparseMatrix::identity(2),
        state_metric: SparseMatrix::identity(2),
        terminal_weight: None,
        state_targets: Vec::new(),
        control_targets: Vec::new(),
    };
    let traj = forward_solve(&data, &vec![vec![0.0; 2]; fine.n_steps], &fine, 1e-13)?;
    Ok(traj.states.into_iter().skip(TARGET_SUBSTEPS - 1).step_by(TARGET_SUBSTEPS).collect())
}
