use alloc::boxed::Box;
use alloc::vec;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::timedisc::{Dynamics, ProblemSpec, TimeGrid};

/// Scalar model `u' = −a u + z`, `u(0) = 1`, tracking `sin(2πt / T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLqConfig {
    pub decay: f64,
    pub alpha: f64,
    pub t_final: f64,
    pub theta: f64,
}

impl Default for ScalarLqConfig {
    fn default() -> Self {
        Self { decay: 1.0, alpha: 0.1, t_final: 1.0, theta: 1.0 }
    }
}

struct ScalarLinear {
    decay: f64,
}

impl Dynamics for ScalarLinear {
    fn state_dim(&self) -> usize {
        1
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn eval(&self, u: &[f64], z: &[f64], out: &mut [f64]) {
        out[0] = -self.decay * u[0] + z[0];
    }

    fn jac_u(&self, _u: &[f64], _z: &[f64]) -> SparseMatrix {
        SparseMatrix::scaled_identity(1, -self.decay)
    }

    fn jac_z(&self, _u: &[f64], _z: &[f64]) -> SparseMatrix {
        SparseMatrix::identity(1)
    }

    fn is_affine(&self) -> bool {
        true
    }
}

pub fn build_scalar_lq(cfg: &ScalarLqConfig, g: &TimeGrid) -> Result<ProblemSpec> {
    if !(cfg.alpha > 0.0) || !(0.0..=1.0).contains(&cfg.theta) {
        return Err(Error::InvalidConfig(alloc::format!(
            "scalar LQ needs alpha > 0 and theta in [0, 1] (got {}, {})",
            cfg.alpha,
            cfg.theta
        )));
    }
    let w = 2.0 * core::f64::consts::PI / cfg.t_final;
    Ok(ProblemSpec {
        dynamics: Box::new(ScalarLinear { decay: cfg.decay }),
        mass: SparseMatrix::identity(1),
        u0: vec![1.0],
        theta: cfg.theta,
        state_weight: SparseMatrix::identity(1),
        control_weight: SparseMatrix::scaled_identity(1, cfg.alpha),
        state_metric: SparseMatrix::identity(1),
        terminal_weight: None,
        state_targets: (1..=g.n_steps).map(|i| vec![libm::sin(w * g.node(i))]).collect(),
        control_targets: vec![vec![0.0]; g.n_steps],
    })
}
