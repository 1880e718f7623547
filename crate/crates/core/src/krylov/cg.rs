use alloc::vec::Vec;

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::linalg::{axpy_into, dot_raw};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgOutcome {
    Converged,
    Boundary,
    NegativeCurvature,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct CgResult {
    pub step: Vec<f64>,
    pub status: CgOutcome,
    pub iterations: usize,
}

/// Optional trust-region geometry for [`projected_cg`].
#[derive(Default)]
pub struct CgSetup<'a> {
    /// Inner product for the trust-region ball; Euclidean when `None`.
    pub metric: Option<&'a dyn LinearOperator>,
    /// Fixed offset `n`: the constraint is `‖n + t‖ ≤ radius`.
    pub offset: Option<&'a [f64]>,
    /// Absolute floor on the stopping test for the projected residual norm.
    pub abs_tol: f64,
}

fn m_dot(metric: Option<&dyn LinearOperator>, x: &[f64], y: &[f64]) -> Result<f64> {
    match metric {
        None => Ok(dot_raw(x, y)),
        Some(m) => Ok(dot_raw(&m.apply(x)?, y)),
    }
}

/// Largest `tau ≥ 0` with `‖a + tau p‖ = radius`.
fn boundary_tau(metric: Option<&dyn LinearOperator>, a: &[f64], p: &[f64], radius: f64) -> Result<f64> {
    let pp = m_dot(metric, p, p)?;
    let ap = m_dot(metric, a, p)?;
    let aa = m_dot(metric, a, a)?;
    if pp <= 0.0 {
        return Ok(0.0);
    }
    let disc = (ap * ap + pp * (radius * radius - aa)).max(0.0);
    Ok(((-ap + libm::sqrt(disc)) / pp).max(0.0))
}

/// Steihaug-Toint truncated CG on the nullspace defined by `project`.
///
/// `grad` is the (unprojected) model gradient at `t = 0`; `project` maps a residual `r` to
/// `g = W r`, the metric-orthogonal projection of `M⁻¹ r` onto the nullspace, and is called
/// once per iteration. CG scalars use `gᵀ M g`, which equals `rᵀ g` for such a `W` but does
/// not suffer cancellation near convergence.
pub fn projected_cg(
    hess: &dyn LinearOperator,
    project: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    grad: &[f64],
    radius: f64,
    rel_tol: f64,
    max_iters: usize,
    setup: &CgSetup<'_>,
) -> Result<CgResult> {
    let n = grad.len();
    let metric = setup.metric;
    let offset: Vec<f64> = match setup.offset {
        Some(o) => o.to_vec(),
        None => alloc::vec![0.0; n],
    };
    let mut t = alloc::vec![0.0; n];
    let mut r = grad.to_vec();
    let mut g = project(&r)?;
    let mut gamma = m_dot(metric, &g, &g)?;
    if !gamma.is_finite() {
        return Err(Error::NonFiniteValue);
    }
    let tol = (rel_tol * libm::sqrt(gamma.max(0.0))).max(setup.abs_tol);
    if gamma <= 0.0 || libm::sqrt(gamma) <= tol {
        return Ok(CgResult { step: t, status: CgOutcome::Converged, iterations: 0 });
    }
    let mut p: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut hp = alloc::vec![0.0; n];
    for k in 0..max_iters {
        hess.apply_into(&p, &mut hp)?;
        let kappa = dot_raw(&p, &hp);
        let mut a = offset.clone();
        axpy_into(1.0, &t, &mut a);
        if !kappa.is_finite() {
            return Err(Error::NonFiniteValue);
        }
        if kappa <= 0.0 {
            let tau = boundary_tau(metric, &a, &p, radius)?;
            axpy_into(tau, &p, &mut t);
            return Ok(CgResult { step: t, status: CgOutcome::NegativeCurvature, iterations: k + 1 });
        }
        let alpha = gamma / kappa;
        let mut trial = a.clone();
        axpy_into(alpha, &p, &mut trial);
        if libm::sqrt(m_dot(metric, &trial, &trial)?) >= radius {
            let tau = boundary_tau(metric, &a, &p, radius)?;
            axpy_into(tau, &p, &mut t);
            return Ok(CgResult { step: t, status: CgOutcome::Boundary, iterations: k + 1 });
        }
        axpy_into(alpha, &p, &mut t);
        axpy_into(alpha, &hp, &mut r);
        g = project(&r)?;
        let gamma_new = m_dot(metric, &g, &g)?;
        if !gamma_new.is_finite() {
            return Err(Error::NonFiniteValue);
        }
        if gamma_new <= 0.0 || libm::sqrt(gamma_new) <= tol {
            return Ok(CgResult { step: t, status: CgOutcome::Converged, iterations: k + 1 });
        }
        let beta = gamma_new / gamma;
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi = -gi + beta * *pi;
        }
        gamma = gamma_new;
    }
    Ok(CgResult { step: t, status: CgOutcome::MaxIters, iterations: max_iters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{lu_factor, norm2, DenseMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_projection(r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }

    #[test]
    fn identity_hessian_gives_newton_step() {
        let g = [1.0, -2.0, 0.5];
        let res = projected_cg(
            &DenseMatrix::identity(3),
            &mut identity_projection,
            &g,
            100.0,
            1e-12,
            10,
            &CgSetup::default(),
        )
        .unwrap();
        assert_eq!(res.status, CgOutcome::Converged);
        for (s, gi) in res.step.iter().zip(&g) {
            assert!((s + gi).abs() < 1e-14);
        }
    }

    #[test]
    fn negative_curvature_hits_boundary() {
        let mut h = DenseMatrix::identity(3);
        for i in 0..3 {
            h.set(i, i, -1.0);
        }
        let res = projected_cg(&h, &mut identity_projection, &[1.0, 1.0, 0.0], 2.5, 1e-10, 10, &CgSetup::default())
            .unwrap();
        assert_eq!(res.status, CgOutcome::NegativeCurvature);
        assert_eq!(res.iterations, 1);
        assert!((norm2(&res.step) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn boundary_respects_offset_and_metric() {
        let h = DenseMatrix::identity(2);
        let m = DenseMatrix::from_rows(&[&[4.0, 0.0], &[0.0, 1.0]]);
        let offset = [0.1, 0.0];
        let setup = CgSetup { metric: Some(&m), offset: Some(&offset), abs_tol: 0.0 };
        let res = projected_cg(&h, &mut identity_projection, &[-10.0, -10.0], 1.0, 1e-12, 10, &setup).unwrap();
        assert_eq!(res.status, CgOutcome::Boundary);
        let a = [offset[0] + res.step[0], res.step[1]];
        let norm = (4.0 * a[0] * a[0] + a[1] * a[1]).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    /// Dense oracle: minimize gᵀt + ½ tᵀH t subject to A t = 0 via the KKT system.
    #[test]
    fn matches_equality_constrained_qp() {
        let n = 10;
        let m = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let gm = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut h = gm.transpose().matmul(&gm).unwrap();
        for i in 0..n {
            h.add_to(i, i, 1.0);
        }
        let a = DenseMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut kkt = DenseMatrix::zeros(n + m, n + m);
        kkt.set_block(0, 0, &h);
        kkt.set_block(n, 0, &a);
        kkt.set_block(0, n, &a.transpose());
        let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        rhs.extend(core::iter::repeat(0.0).take(m));
        let oracle = lu_factor(&kkt).unwrap().solve(&rhs).unwrap();

        // Orthogonal projector onto null(A) via the augmented system with identity block.
        let mut aug = DenseMatrix::zeros(n + m, n + m);
        aug.set_block(0, 0, &DenseMatrix::identity(n));
        aug.set_block(n, 0, &a);
        aug.set_block(0, n, &a.transpose());
        let aug_lu = lu_factor(&aug).unwrap();
        let mut project = |r: &[f64]| {
            let mut b = r.to_vec();
            b.extend(core::iter::repeat(0.0).take(m));
            let sol = aug_lu.solve(&b)?;
            Ok(sol[..n].to_vec())
        };
        let res = projected_cg(&h, &mut project, &g, 1e6, 1e-10, 50, &CgSetup::default()).unwrap();
        assert_eq!(res.status, CgOutcome::Converged);
        for (s, o) in res.step.iter().zip(&oracle[..n]) {
            assert!((s - o).abs() <= 1e-8, "{s} vs {o}");
        }
    }

    #[test]
    fn model_decreases_monotonically() {
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gm = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut h = gm.transpose().matmul(&gm).unwrap();
        for i in 0..n {
            h.add_to(i, i, 0.1);
        }
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let model = |t: &[f64]| {
            let ht = LinearOperator::apply(&h, t).unwrap();
            dot_raw(&g, t) + 0.5 * dot_raw(t, &ht)
        };
        let mut prev = 0.0;
        for iters in 1..n {
            let res =
                projected_cg(&h, &mut identity_projection, &g, 1e6, 1e-14, iters, &CgSetup::default()).unwrap();
            let val = model(&res.step);
            assert!(val <= prev + 1e-12);
            prev = val;
        }
    }
}
