use alloc::vec;
use alloc::vec::Vec;

use super::{LinearOperator, Preconditioner};
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy_into, dot_raw, norm_raw};

pub const DEFAULT_MAX_ITERS: usize = 401;
const BREAKDOWN_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Stop once `‖b − A x‖ ≤ rel_tol · ‖b − A x0‖`.
    pub rel_tol: f64,
    /// Absolute floor on the stopping target; the effective target is the larger of the two.
    pub abs_tol: f64,
    pub max_iters: usize,
    /// Cycle length; `None` means no restart.
    pub restart: Option<usize>,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 0.0, max_iters: DEFAULT_MAX_ITERS, restart: None }
    }
}

impl KrylovOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// One entry per iteration plus the initial residual. Entries inside a cycle are the
    /// Arnoldi estimates; cycle ends and the final entry are true residuals.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub final_relative_residual: f64,
}

/// Right-preconditioned restarted GMRES. The update is formed as `x += P(V y)`, so a
/// preconditioner that is not a fixed linear map corrupts it; the cycle then keeps going until
/// the true residual of the update meets the target.
pub fn gmres(
    op: &dyn LinearOperator,
    prec: Option<&mut dyn Preconditioner>,
    b: &[f64],
    x0: &[f64],
    opts: &KrylovOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    solve(op, prec, b, x0, opts, false)
}

/// Flexible GMRES: stores the preconditioned directions so that the preconditioner may
/// change between applications. With a fixed linear preconditioner it reduces to `gmres`.
pub fn fgmres(
    op: &dyn LinearOperator,
    prec: &mut dyn Preconditioner,
    b: &[f64],
    x0: &[f64],
    opts: &KrylovOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let flexible = prec.is_flexible();
    solve(op, Some(prec), b, x0, opts, flexible)
}

fn residual(op: &dyn LinearOperator, b: &[f64], x: &[f64], r: &mut [f64]) -> Result<f64> {
    op.apply_into(x, r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let n = norm_raw(r);
    if !n.is_finite() {
        return Err(Error::NonFiniteValue);
    }
    Ok(n)
}

fn solve(
    op: &dyn LinearOperator,
    mut prec: Option<&mut dyn Preconditioner>,
    b: &[f64],
    x0: &[f64],
    opts: &KrylovOptions,
    store_z: bool,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = op.dim();
    check_len(n, b.len())?;
    check_len(n, x0.len())?;
    let restart = opts.restart.unwrap_or(opts.max_iters).max(1);

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    let mut beta = residual(op, b, &x, &mut r)?;
    let r0 = beta;
    let target = (opts.rel_tol * r0).max(opts.abs_tol);
    let mut history = vec![beta];
    let mut iterations = 0;

    let report = |history: Vec<f64>, iterations: usize, fin: f64| SolveReport {
        iterations,
        residual_history: history,
        converged: fin <= target,
        initial_residual: r0,
        final_residual: fin,
        final_relative_residual: if r0 > 0.0 { fin / r0 } else { 0.0 },
    };

    if beta <= target || beta == 0.0 {
        return Ok((x, report(history, 0, beta)));
    }

    let mut w = vec![0.0; n];
    loop {
        let cycle_start = beta;
        let m = restart.min(opts.max_iters - iterations);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        v.push(r.iter().map(|ri| ri / beta).collect());

        let mut k = 0;
        let mut broke_down = false;
        let mut candidate = None;
        while k < m {
            let zk = match prec.as_deref_mut() {
                Some(p) => p.apply(&v[k])?,
                None => v[k].clone(),
            };
            check_len(n, zk.len())?;
            op.apply_into(&zk, &mut w)?;
            if store_z {
                z.push(zk);
            }
            let wnorm0 = norm_raw(&w);
            for (i, vi) in v.iter().enumerate() {
                let hik = dot_raw(&w, vi);
                h[i][k] = hik;
                axpy_into(-hik, vi, &mut w);
            }
            let hn = norm_raw(&w);
            if !hn.is_finite() {
                return Err(Error::NonFiniteValue);
            }
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let (a, bb) = (h[k][k], h[k + 1][k]);
            let d = libm::hypot(a, bb);
            if d == 0.0 {
                return Err(Error::Breakdown { iteration: iterations + 1 });
            }
            cs[k] = a / d;
            sn[k] = bb / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            iterations += 1;
            let est = g[k].abs();
            history.push(est);
            if hn <= BREAKDOWN_TOL * wnorm0.max(f64::MIN_POSITIVE) {
                broke_down = true;
                break;
            }
            if est <= target {
                // Without a restart the cycle continues until the candidate update meets the
                // target as a true residual, not just as the Arnoldi estimate.
                let c = update(&h, &g, k, &v, &z, prec.as_deref_mut(), &x)?;
                let rc = residual(op, b, &c, &mut r)?;
                if rc <= target || k == m {
                    candidate = Some(c);
                    break;
                }
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }

        if let Some(c) = candidate {
            x = c;
        } else {
            x = update(&h, &g, k, &v, &z, prec.as_deref_mut(), &x)?;
        }
        beta = residual(op, b, &x, &mut r)?;
        *history.last_mut().unwrap() = beta;
        if beta <= target {
            return Ok((x, report(history, iterations, beta)));
        }
        // An exhausted Krylov space that still improved the true residual only reflects a
        // nonlinear preconditioner; restart from the update.
        if broke_down && beta >= cycle_start {
            return Err(Error::Breakdown { iteration: iterations });
        }
        if iterations >= opts.max_iters {
            return Ok((x, report(history, iterations, beta)));
        }
    }
}

/// `x + P(V y)`, or `x + Z y` when the preconditioned directions were stored.
fn update(
    h: &[Vec<f64>],
    g: &[f64],
    k: usize,
    v: &[Vec<f64>],
    z: &[Vec<f64>],
    prec: Option<&mut (dyn Preconditioner + '_)>,
    x: &[f64],
) -> Result<Vec<f64>> {
    // Back substitution on the triangularized Hessenberg system.
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
        y[i] = (g[i] - s) / h[i][i];
    }
    let mut out = x.to_vec();
    if !z.is_empty() {
        for (yi, zi) in y.iter().zip(z) {
            axpy_into(*yi, zi, &mut out);
        }
        return Ok(out);
    }
    let mut u = vec![0.0; x.len()];
    for (yi, vi) in y.iter().zip(v) {
        axpy_into(*yi, vi, &mut u);
    }
    let pu = match prec {
        Some(p) => p.apply(&u)?,
        None => u,
    };
    axpy_into(1.0, &pu, &mut out);
    Ok(out)
}
