use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::p1_matrices;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::timedisc::{Dynamics, ProblemSpec, TimeGrid};

/// Heat equation on `[0, 1]` with the scalar control entering as the inflow flux
/// `−u_x(0, t) = z(t)`, zero flux on the right, and zero source.
///
/// Data: `u_0(x) = ½ cos(πx)`, target `u_d(x, t) = (1 − x)² sin(πt / 2T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatNeumannConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub n_cells: usize,
    pub t_final: f64,
    pub theta: f64,
}

impl Default for HeatNeumannConfig {
    fn default() -> Self {
        Self { alpha1: 1e3, alpha2: 0.0, n_cells: 32, t_final: 1.0, theta: 1.0 }
    }
}

struct HeatDynamics {
    stiffness: SparseMatrix,
}

impl Dynamics for HeatDynamics {
    fn state_dim(&self) -> usize {
        self.stiffness.rows()
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn eval(&self, u: &[f64], z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.stiffness.mul_add_into(-1.0, u, out);
        out[0] += z[0];
    }

    fn jac_u(&self, _u: &[f64], _z: &[f64]) -> SparseMatrix {
        self.stiffness.scaled(-1.0)
    }

    fn jac_z(&self, _u: &[f64], _z: &[f64]) -> SparseMatrix {
        SparseMatrix::from_triplets(self.stiffness.rows(), 1, &[(0, 0, 1.0)])
    }

    fn is_affine(&self) -> bool {
        true
    }
}

pub fn build_heat_neumann(cfg: &HeatNeumannConfig, g: &TimeGrid) -> Result<ProblemSpec> {
    if cfg.alpha1 < 0.0 || cfg.alpha2 < 0.0 || (cfg.alpha1 == 0.0 && cfg.alpha2 == 0.0) || cfg.n_cells < 1 {
        return Err(Error::InvalidConfig(alloc::format!(
            "heat needs alpha1, alpha2 >= 0, not both zero, and n_cells >= 1 (got {}, {}, {})",
            cfg.alpha1,
            cfg.alpha2,
            cfg.n_cells
        )));
    }
    let (mass, stiffness) = p1_matrices(cfg.n_cells, false);
    let h = 1.0 / cfg.n_cells as f64;
    let nodes: Vec<f64> = (0..=cfg.n_cells).map(|j| j as f64 * h).collect();
    let pi = core::f64::consts::PI;
    let u0 = nodes.iter().map(|&x| 0.5 * libm::cos(pi * x)).collect();
    let targets = (1..=g.n_steps)
        .map(|i| {
            let s = libm::sin(pi * g.node(i) / (2.0 * g.t_final));
            nodes.iter().map(|&x| (1.0 - x) * (1.0 - x) * s).collect()
        })
        .collect();
    let metric_scale = if cfg.alpha1 > 0.0 { cfg.alpha1 } else { 1.0 };
    Ok(ProblemSpec {
        dynamics: Box::new(HeatDynamics { stiffness }),
        u0,
        theta: cfg.theta,
        state_weight: mass.scaled(cfg.alpha1),
        control_weight: SparseMatrix::identity(1),
        state_metric: mass.scaled(metric_scale),
        terminal_weight: (cfg.alpha2 > 0.0).then(|| mass.scaled(cfg.alpha2)),
        mass,
        state_targets: targets,
        control_targets: vec![vec![0.0]; g.n_steps],
    })
}
