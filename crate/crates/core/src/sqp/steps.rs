use alloc::vec::Vec;

use crate::error::{check_len, Result};
use crate::linalg::{dot_raw, DenseMatrix};

/// Constraint Jacobian `c_x` as a pair of products.
pub trait ConstraintJacobian {
    fn apply(&self, s: &[f64]) -> Result<Vec<f64>>;
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>>;
}

impl ConstraintJacobian for DenseMatrix {
    fn apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.matvec(s)
    }

    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows(), y.len())?;
        let mut out = alloc::vec![0.0; self.cols()];
        for (i, yi) in y.iter().enumerate() {
            crate::linalg::axpy_into(*yi, self.row(i), &mut out);
        }
        Ok(out)
    }
}

/// Solution-error budget for an augmented solve:
/// `τ · min(‖b₁‖ + ‖b₂‖, max(‖y₁‖, Δ))`, floored at `τ · 10⁻³ · (‖b₁‖ + ‖b₂‖)`.
pub fn tolerance_budget(b1_norm: f64, b2_norm: f64, y1_norm: f64, delta: f64, tau: f64) -> f64 {
    let b = b1_norm + b2_norm;
    let t = tau * b.min(y1_norm.max(delta));
    t.max(tau * 1e-3 * b)
}

/// Minimizer of `‖c_x n + c‖²` along `n = −α M⁻¹ c_xᵀ c`, `α ≥ 0`, subject to `‖n‖_M ≤ radius`.
/// `metric_inv` applies `M⁻¹`; pass the identity for Euclidean geometry.
pub fn cauchy_point(
    jac: &dyn ConstraintJacobian,
    metric_inv: &dyn Fn(&[f64]) -> Vec<f64>,
    c: &[f64],
    radius: f64,
) -> Result<Vec<f64>> {
    let jtc = jac.apply_transpose(c)?;
    let g = metric_inv(&jtc);
    let gg = dot_raw(&g, &jtc).max(0.0);
    if gg == 0.0 {
        return Ok(alloc::vec![0.0; g.len()]);
    }
    let jg = jac.apply(&g)?;
    let curv = dot_raw(&jg, &jg);
    let gnorm = libm::sqrt(gg);
    let alpha_ls = if curv > 0.0 { gg / curv } else { f64::INFINITY };
    let alpha = alpha_ls.min(radius / gnorm);
    Ok(g.iter().map(|v| -alpha * v).collect())
}

/// Point on the segment from `a` to `b` where the path leaves the `M`-ball of `radius`;
/// returns `b` when it lies inside. `metric` applies `M`.
pub fn dogleg(a: &[f64], b: &[f64], metric: &dyn Fn(&[f64]) -> Vec<f64>, radius: f64) -> Vec<f64> {
    let bb = dot_raw(b, &metric(b));
    if bb <= radius * radius {
        return b.to_vec();
    }
    let d: Vec<f64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
    let md = metric(&d);
    let (dd, ad) = (dot_raw(&d, &md), dot_raw(a, &md));
    let aa = dot_raw(a, &metric(a));
    let t = if dd > 0.0 {
        let disc = (ad * ad + dd * (radius * radius - aa)).max(0.0);
        ((-ad + libm::sqrt(disc)) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    a.iter().zip(&d).map(|(p, q)| p + t * q).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkt::assemble::tests::random_vec;
    use crate::linalg::norm_raw;

    fn id(x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    #[test]
    fn budget_examples() {
        assert_eq!(tolerance_budget(0.0, 0.0, 0.0, 10.0, 1e-2), 0.0);
        assert!((tolerance_budget(1.0, 0.0, 0.0, 1e6, 1e-2) - 1e-2).abs() < 1e-15);
        let full = tolerance_budget(0.7, 0.4, 2.0, 0.5, 1e-2);
        let half = tolerance_budget(0.7, 0.4, 2.0, 0.5, 5e-3);
        assert!((full - 2.0 * half).abs() < 1e-15);
        // small radius: the floor takes over
        assert!((tolerance_budget(1.0, 0.0, 0.0, 1e-9, 1e-2) - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn cauchy_trivial_cases() {
        let eye = DenseMatrix::identity(3);
        assert_eq!(cauchy_point(&eye, &id, &[0.0; 3], 1.0).unwrap(), vec![0.0; 3]);
        let n = cauchy_point(&eye, &id, &[1.0, 0.0, 0.0], 1e9).unwrap();
        assert_eq!(n, vec![-1.0, 0.0, 0.0]);
        let n = cauchy_point(&eye, &id, &[3.0, 4.0, 0.0], 1.0).unwrap();
        assert!((norm_raw(&n) - 1.0).abs() < 1e-15);
    }

    fn residual(j: &DenseMatrix, c: &[f64], g: &[f64], alpha: f64) -> f64 {
        let n: Vec<f64> = g.iter().map(|v| -alpha * v).collect();
        let jn = j.matvec(&n).unwrap();
        jn.iter().zip(c).map(|(a, b)| (a + b) * (a + b)).sum()
    }

    fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (libm::sqrt(5.0) - 1.0) / 2.0;
        for _ in 0..200 {
            let (x1, x2) = (b - r * (b - a), a + r * (b - a));
            if f(x1) < f(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn cauchy_matches_line_search() {
        let j = DenseMatrix::from_row_major(6, 10, random_vec(60, 11)).unwrap();
        let c = random_vec(6, 12);
        let g = j.apply_transpose(&c).unwrap();
        let gnorm = norm_raw(&g);
        for radius in [1e3, 0.05] {
            let n = cauchy_point(&j, &id, &c, radius).unwrap();
            let alpha = norm_raw(&n) / gnorm;
            let best = golden(|a| residual(&j, &c, &g, a), 0.0, radius / gnorm);
            assert!((alpha - best).abs() <= 1e-8 * best.max(1.0), "{alpha} vs {best}");
        }
    }

    #[test]
    fn cauchy_with_metric_respects_radius_and_decreases() {
        let j = DenseMatrix::from_row_major(4, 7, random_vec(28, 3)).unwrap();
        let w: Vec<f64> = (0..7).map(|k| 0.5 + k as f64).collect();
        let m = |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).collect::<Vec<f64>>();
        let minv = |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a / b).collect::<Vec<f64>>();
        let c = random_vec(4, 4);
        let n = cauchy_point(&j, &minv, &c, 0.01).unwrap();
        assert!((libm::sqrt(dot_raw(&n, &m(&n))) - 0.01).abs() < 1e-12);
        let n = cauchy_point(&j, &minv, &c, 1e6).unwrap();
        let r: Vec<f64> = j.matvec(&n).unwrap().iter().zip(&c).map(|(a, b)| a + b).collect();
        assert!(norm_raw(&r) < norm_raw(&c));
    }

    #[test]
    fn dogleg_hits_the_boundary() {
        let a = vec![0.3, 0.0];
        let b = vec![3.0, 4.0];
        assert_eq!(dogleg(&a, &b, &id, 10.0), b);
        let p = dogleg(&a, &b, &id, 1.0);
        assert!((norm_raw(&p) - 1.0).abs() < 1e-14);
        let t = (p[1]) / 4.0;
        assert!((p[0] - (0.3 + t * 2.7)).abs() < 1e-14);
    }
}
