//! Problem builders: van der Pol oscillator control, distributed control of viscous Burgers'
//! equation, Neumann boundary control of the heat equation, and a scalar linear-quadratic
//! model used throughout the tests.

mod burgers;
mod heat;
mod lq;
mod vanderpol;

pub use burgers::{build_burgers, BurgersConfig, BurgersDynamics};
pub use heat::{build_heat_neumann, HeatNeumannConfig};
pub use lq::{build_scalar_lq, ScalarLqConfig};
pub use vanderpol::{build_vanderpol, VanDerPolConfig, VanDerPolDynamics};

use alloc::vec::Vec;

use crate::linalg::SparseMatrix;

/// P1 mass and stiffness matrices on a uniform mesh of `[0, 1]` with `n_elems` elements.
/// With `dirichlet` the two end nodes are dropped; otherwise all `n_elems + 1` nodes are kept.
pub(crate) fn p1_matrices(n_elems: usize, dirichlet: bool) -> (SparseMatrix, SparseMatrix) {
    let h = 1.0 / n_elems as f64;
    let n_nodes = n_elems + 1;
    let mut mass = Vec::new();
    let mut stiff = Vec::new();
    for e in 0..n_elems {
        for (a, b) in [(e, e), (e, e + 1), (e + 1, e), (e + 1, e + 1)] {
            let diag = a == b;
            mass.push((a, b, if diag { h / 3.0 } else { h / 6.0 }));
            stiff.push((a, b, if diag { 1.0 / h } else { -1.0 / h }));
        }
    }
    let keep = |t: Vec<(usize, usize, f64)>| -> Vec<(usize, usize, f64)> {
        if !dirichlet {
            return t;
        }
        t.into_iter()
            .filter(|&(i, j, _)| i > 0 && j > 0 && i < n_nodes - 1 && j < n_nodes - 1)
            .map(|(i, j, v)| (i - 1, j - 1, v))
            .collect()
    };
    let n = if dirichlet { n_elems - 1 } else { n_nodes };
    (SparseMatrix::from_triplets(n, n, &keep(mass)), SparseMatrix::from_triplets(n, n, &keep(stiff)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_mass_rows_sum_to_h() {
        let (m, a) = p1_matrices(8, false);
        let ones = alloc::vec![1.0; 9];
        let mo = m.matvec(&ones).unwrap();
        assert!((mo.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(a.matvec(&ones).unwrap().iter().all(|v| v.abs() < 1e-12));
        let (m, _) = p1_matrices(4, true);
        assert_eq!(m.rows(), 3);
        assert!((m.get(1, 1) - 2.0 / 12.0).abs() < 1e-15);
        assert!((m.get(1, 0) - 1.0 / 24.0).abs() < 1e-15);
    }
}
