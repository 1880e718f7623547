use alloc::vec::Vec;

use super::DenseMatrix;
use crate::error::{check_len, Error, Result};

/// Relative pivot floor used by [`lu_factor`].
pub const DEFAULT_PIVOT_FLOOR: f64 = 1e-14;

/// Packed LU factors of a row-permuted square matrix, `PA = LU`.
///
/// The unit lower factor sits strictly below the diagonal of `lu`, the upper factor on and above it.
#[derive(Debug, Clone)]
pub struct LuFactors {
    pub lu: DenseMatrix,
    /// `perm[i]` is the row of `A` that ended up in row `i`.
    pub perm: Vec<usize>,
    pub sign: f64,
    pub min_pivot: f64,
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        lu_solve(self, b)
    }

    /// Column-by-column inverse.
    pub fn inverse(&self) -> Result<DenseMatrix> {
        let n = self.dim();
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = alloc::vec![0.0; n];
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            for (i, v) in self.solve(&e)?.into_iter().enumerate() {
                inv.set(i, j, v);
            }
        }
        Ok(inv)
    }

    pub fn determinant(&self) -> f64 {
        (0..self.dim()).fold(self.sign, |d, i| d * self.lu.get(i, i))
    }
}

/// Partial-pivoting LU with the default pivot floor of `1e-14 * max|a|`.
pub fn lu_factor(a: &DenseMatrix) -> Result<LuFactors> {
    lu_factor_with_floor(a, DEFAULT_PIVOT_FLOOR * a.max_abs())
}

/// Partial-pivoting LU; fails when a pivot magnitude is at or below `floor`.
pub fn lu_factor_with_floor(a: &DenseMatrix, floor: f64) -> Result<LuFactors> {
    check_len(a.rows(), a.cols())?;
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    let n = a.rows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let mut min_pivot = f64::INFINITY;

    for k in 0..n {
        let mut p = k;
        let mut best = lu.get(k, k).abs();
        for i in k + 1..n {
            let v = lu.get(i, k).abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= floor || best == 0.0 {
            return Err(Error::SingularMatrix { index: k, pivot: best });
        }
        min_pivot = min_pivot.min(best);
        if p != k {
            for j in 0..n {
                let t = lu.get(k, j);
                lu.set(k, j, lu.get(p, j));
                lu.set(p, j, t);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = lu.get(k, k);
        for i in k + 1..n {
            let l = lu.get(i, k) / pivot;
            lu.set(i, k, l);
            if l != 0.0 {
                for j in k + 1..n {
                    let v = lu.get(k, j);
                    lu.add_to(i, j, -l * v);
                }
            }
        }
    }
    if n == 0 {
        min_pivot = 0.0;
    }
    Ok(LuFactors { lu, perm, sign, min_pivot })
}

pub fn lu_solve(f: &LuFactors, b: &[f64]) -> Result<Vec<f64>> {
    let n = f.dim();
    check_len(n, b.len())?;
    let mut x: Vec<f64> = f.perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        let row = f.lu.row(i);
        let s: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
        x[i] -= s;
    }
    for i in (0..n).rev() {
        let row = f.lu.row(i);
        let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
        x[i] = (x[i] - s) / row[i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_well_conditioned(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        for i in 0..n {
            a.add_to(i, i, n as f64);
        }
        a
    }

    #[test]
    fn scalar_case() {
        let f = lu_factor(&DenseMatrix::from_rows(&[&[2.0]])).unwrap();
        assert_eq!(f.lu.get(0, 0), 2.0);
        assert_eq!(lu_solve(&f, &[4.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn identity_and_diagonal() {
        let f = lu_factor(&DenseMatrix::identity(5)).unwrap();
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(lu_solve(&f, &b).unwrap(), b.to_vec());
        let f = lu_factor(&DenseMatrix::from_rows(&[&[2., 0.], &[0., 4.]])).unwrap();
        assert_eq!(lu_solve(&f, &[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
        assert!(lu_solve(&f, &[1.0]).is_err());
    }

    #[test]
    fn random_residual() {
        let a = random_well_conditioned(8, 3);
        let b: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let x = lu_factor(&a).unwrap().solve(&b).unwrap();
        let r: Vec<f64> = a.matvec(&x).unwrap().iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) <= 1e-12 * norm2(&b));
    }

    #[test]
    fn stiffness_recovers_ones() {
        let n = 6;
        let a = DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let b = a.matvec(&[1.0; 6]).unwrap();
        let x = lu_factor(&a).unwrap().solve(&b).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn singular_detected() {
        let a = DenseMatrix::from_rows(&[&[1., 2.], &[2., 4.]]);
        assert!(matches!(lu_factor(&a), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn inverse_reconstruction() {
        let n = 12;
        let a = random_well_conditioned(n, 11);
        let f = lu_factor(&a).unwrap();
        let mut inv = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = f.solve(&e).unwrap();
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        let prod = inv.matmul(&a).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - expect).abs() <= 1e-10);
            }
        }
        let mut seen = f.perm.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn determinant_matches_nalgebra() {
        let a = random_well_conditioned(7, 5);
        let na = nalgebra::DMatrix::from_row_slice(7, 7, a.as_slice());
        let d = lu_factor(&a).unwrap().determinant();
        assert!((d - na.determinant()).abs() <= 1e-9 * d.abs());
    }
}
