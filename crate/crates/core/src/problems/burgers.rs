use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::p1_matrices;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::timedisc::{Dynamics, ProblemSpec, TimeGrid};

/// Viscous Burgers' equation `u_t − ν u_xx + u u_x = z` on `[0, 1]` with homogeneous
/// Dirichlet ends, P1 elements in space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersConfig {
    pub nu: f64,
    pub alpha: f64,
    pub n_elems: usize,
    pub t_final: f64,
    pub theta: f64,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        Self { nu: 1e-2, alpha: 0.1, n_elems: 128, t_final: 1.0, theta: 0.5 }
    }
}

/// `F(u, z) = −ν A u − N(u) + M z` with the Galerkin convection vector
/// `N_i = (u_{i+1} − u_{i−1})(u_{i−1} + u_i + u_{i+1}) / 6`.
pub struct BurgersDynamics {
    pub nu: f64,
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
}

impl BurgersDynamics {
    fn n(&self) -> usize {
        self.mass.rows()
    }
}

/// Value at interior index `i` with zero Dirichlet padding.
#[inline]
fn at(u: &[f64], i: isize) -> f64 {
    if i < 0 || i as usize >= u.len() {
        0.0
    } else {
        u[i as usize]
    }
}

impl Dynamics for BurgersDynamics {
    fn state_dim(&self) -> usize {
        self.n()
    }

    fn control_dim(&self) -> usize {
        self.n()
    }

    fn eval(&self, u: &[f64], z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        self.stiffness.mul_add_into(-self.nu, u, out);
        self.mass.mul_add_into(1.0, z, out);
        for (i, o) in out.iter_mut().enumerate() {
            let i = i as isize;
            let (l, c, r) = (at(u, i - 1), at(u, i), at(u, i + 1));
            *o -= (r - l) * (l + c + r) / 6.0;
        }
    }

    fn jac_u(&self, u: &[f64], _z: &[f64]) -> SparseMatrix {
        let n = self.n();
        let mut t: Vec<(usize, usize, f64)> = self.stiffness.triplets().map(|(i, j, v)| (i, j, -self.nu * v)).collect();
        for i in 0..n {
            let ii = i as isize;
            let (l, c, r) = (at(u, ii - 1), at(u, ii), at(u, ii + 1));
            if i > 0 {
                t.push((i, i - 1, (2.0 * l + c) / 6.0));
            }
            t.push((i, i, -(r - l) / 6.0));
            if i + 1 < n {
                t.push((i, i + 1, -(c + 2.0 * r) / 6.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t)
    }

    fn jac_z(&self, _u: &[f64], _z: &[f64]) -> SparseMatrix {
        self.mass.clone()
    }

    fn hess_contract(
        &self,
        _u: &[f64],
        _z: &[f64],
        lambda: &[f64],
        du: &[f64],
        _dz: &[f64],
        scale: f64,
        out_u: &mut [f64],
        _out_z: &mut [f64],
    ) {
        let n = self.n() as isize;
        for (i, &li) in lambda.iter().enumerate() {
            if li == 0.0 {
                continue;
            }
            let ii = i as isize;
            let c = -scale * li / 6.0;
            let (dl, dc, dr) = (at(du, ii - 1), at(du, ii), at(du, ii + 1));
            if ii > 0 {
                out_u[i - 1] += c * (-2.0 * dl - dc);
            }
            out_u[i] += c * (dr - dl);
            if ii + 1 < n {
                out_u[i + 1] += c * (dc + 2.0 * dr);
            }
        }
    }
}

/// Nodal interpolant of the step `1` on `(0, 1/2]`, `0` elsewhere, at interior nodes.
fn step_profile(n_elems: usize) -> Vec<f64> {
    let h = 1.0 / n_elems as f64;
    (1..n_elems).map(|j| if j as f64 * h <= 0.5 + 1e-12 { 1.0 } else { 0.0 }).collect()
}

pub fn build_burgers(cfg: &BurgersConfig, g: &TimeGrid) -> Result<ProblemSpec> {
    if !(cfg.nu > 0.0) || cfg.n_elems < 2 || !(cfg.alpha > 0.0) || !(0.0..=1.0).contains(&cfg.theta) {
        return Err(Error::InvalidConfig(alloc::format!(
            "Burgers needs nu > 0, n_elems >= 2, alpha > 0, theta in [0, 1] (got {}, {}, {}, {})",
            cfg.nu,
            cfg.n_elems,
            cfg.alpha,
            cfg.theta
        )));
    }
    let (mass, stiffness) = p1_matrices(cfg.n_elems, true);
    let u0 = step_profile(cfg.n_elems);
    let n = u0.len();
    Ok(ProblemSpec {
        dynamics: Box::new(BurgersDynamics { nu: cfg.nu, mass: mass.clone(), stiffness }),
        u0: u0.clone(),
        theta: cfg.theta,
        state_weight: mass.clone(),
        control_weight: mass.scaled(cfg.alpha),
        state_metric: mass.clone(),
        mass,
        terminal_weight: None,
        state_targets: vec![u0; g.n_steps],
        control_targets: vec![vec![0.0; n]; g.n_steps],
    })
}
