//! Time transfers. States, virtual states and multipliers are nodal: injection down,
//! linear interpolation up. Controls are piecewise constant per interval: duplicated up,
//! averaged down.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kkt::{for_each_segment, Layout, VarKind};
use crate::timedisc::{Dims, Primal};

fn node_count(len: usize, width: usize) -> Result<usize> {
    if width == 0 || len % width != 0 {
        return Err(Error::DimensionMismatch { expected: width, found: len });
    }
    Ok(len / width)
}

fn fine_count(len: usize, width: usize) -> Result<usize> {
    let n = node_count(len, width)?;
    if n % 2 != 0 {
        return Err(Error::IndivisibleSteps { steps: n, levels: 2 });
    }
    Ok(n)
}

fn write_state_node(coarse: &[f64], w: usize, i: usize, out: &mut [f64]) {
    let c = |j: usize| &coarse[(j - 1) * w..j * w];
    if i % 2 == 0 {
        out.copy_from_slice(c(i / 2));
    } else if i == 1 {
        // No coarse node 0 in the unknowns; the first fine node takes the first coarse value.
        out.copy_from_slice(c(1));
    } else {
        let (a, b) = (c(i / 2), c(i / 2 + 1));
        for k in 0..w {
            out[k] = 0.5 * (a[k] + b[k]);
        }
    }
}

fn write_control_node(coarse: &[f64], w: usize, i: usize, out: &mut [f64]) {
    let j = i.div_ceil(2);
    out.copy_from_slice(&coarse[(j - 1) * w..j * w]);
}

fn restrict_state_node(fine: &[f64], w: usize, j: usize, out: &mut [f64]) {
    out.copy_from_slice(&fine[(2 * j - 1) * w..2 * j * w]);
}

fn restrict_control_node(fine: &[f64], w: usize, j: usize, out: &mut [f64]) {
    let (a, b) = (&fine[(2 * j - 2) * w..(2 * j - 1) * w], &fine[(2 * j - 1) * w..2 * j * w]);
    for k in 0..w {
        out[k] = 0.5 * (a[k] + b[k]);
    }
}

/// Interpolates nodal data `1..N_c` (flat, `width` per node) to nodes `1..2N_c`.
pub fn prolong_state(coarse: &[f64], width: usize) -> Result<Vec<f64>> {
    let nc = node_count(coarse.len(), width)?;
    let mut out = vec![0.0; 2 * coarse.len()];
    for i in 1..=2 * nc {
        write_state_node(coarse, width, i, &mut out[(i - 1) * width..i * width]);
    }
    Ok(out)
}

/// Injection at even fine nodes.
pub fn restrict_state(fine: &[f64], width: usize) -> Result<Vec<f64>> {
    let nf = fine_count(fine.len(), width)?;
    let mut out = vec![0.0; fine.len() / 2];
    for j in 1..=nf / 2 {
        restrict_state_node(fine, width, j, &mut out[(j - 1) * width..j * width]);
    }
    Ok(out)
}

pub fn prolong_control(coarse: &[f64], width: usize) -> Result<Vec<f64>> {
    let nc = node_count(coarse.len(), width)?;
    let mut out = vec![0.0; 2 * coarse.len()];
    for i in 1..=2 * nc {
        write_control_node(coarse, width, i, &mut out[(i - 1) * width..i * width]);
    }
    Ok(out)
}

/// Two-interval average.
pub fn restrict_control(fine: &[f64], width: usize) -> Result<Vec<f64>> {
    let nf = fine_count(fine.len(), width)?;
    let mut out = vec![0.0; fine.len() / 2];
    for j in 1..=nf / 2 {
        restrict_control_node(fine, width, j, &mut out[(j - 1) * width..j * width]);
    }
    Ok(out)
}

/// Variables stored in block `j`, in block order.
fn block_entries(lay: &Layout, j: usize) -> Vec<(VarKind, usize)> {
    let n = lay.dims.n_steps;
    if j == 0 {
        vec![(VarKind::U, 1), (VarKind::Z, 1), (VarKind::Lambda, 1)]
    } else if j == n {
        vec![(VarKind::V, n), (VarKind::Mu, n)]
    } else {
        vec![(VarKind::V, j), (VarKind::U, j + 1), (VarKind::Z, j + 1), (VarKind::Mu, j), (VarKind::Lambda, j + 1)]
    }
}

/// Per-kind flat copies of a packed KKT vector: `[u, v, z, λ, μ]` over nodes `1..N`.
fn split_kinds(lay: &Layout, x: &[f64]) -> [Vec<f64>; 5] {
    let n = lay.dims.n_steps;
    VarKind::ALL.map(|kind| {
        let mut out = Vec::with_capacity(n * lay.width(kind));
        for i in 1..=n {
            out.extend_from_slice(&x[lay.range(kind, i)]);
        }
        out
    })
}

fn kind_index(kind: VarKind) -> usize {
    VarKind::ALL.iter().position(|k| *k == kind).unwrap_or(0)
}

fn transfer_kkt(from: &Layout, to: &Layout, x: &[f64], up: bool) -> Result<Vec<f64>> {
    crate::error::check_len(from.len(), x.len())?;
    let parts = split_kinds(from, x);
    let mut out = vec![0.0; to.len()];
    let sizes = to.block_sizes();
    for_each_segment(&mut out, &sizes, |j, seg| {
        for (kind, i) in block_entries(to, j) {
            let w = to.width(kind);
            let (_, off) = to.locate(kind, i);
            let dst = &mut seg[off..off + w];
            let src = &parts[kind_index(kind)];
            match (up, kind == VarKind::Z) {
                (true, false) => write_state_node(src, w, i, dst),
                (true, true) => write_control_node(src, w, i, dst),
                (false, false) => restrict_state_node(src, w, i, dst),
                (false, true) => restrict_control_node(src, w, i, dst),
            }
        }
    });
    Ok(out)
}

fn coarse_layout(fine: &Layout) -> Result<Layout> {
    let d = fine.dims;
    if d.n_steps % 2 != 0 {
        return Err(Error::IndivisibleSteps { steps: d.n_steps, levels: 2 });
    }
    Ok(Layout::new(d.coarse()))
}

/// Restricts a packed fine-level KKT vector (laid out by `fine`).
pub fn restrict_kkt(fine: &Layout, x: &[f64]) -> Result<Vec<f64>> {
    let coarse = coarse_layout(fine)?;
    transfer_kkt(fine, &coarse, x, false)
}

/// Prolongs a packed coarse-level KKT vector (laid out by `coarse`).
pub fn prolong_kkt(coarse: &Layout, x: &[f64]) -> Result<Vec<f64>> {
    let d = coarse.dims;
    let fine = Layout::new(Dims { n_steps: 2 * d.n_steps, ..d });
    transfer_kkt(coarse, &fine, x, true)
}

/// Restricts a primal iterate for rediscretization: states injected, controls averaged.
pub fn restrict_primal(x: &Primal) -> Result<Primal> {
    let d = x.dims;
    if d.n_steps % 2 != 0 {
        return Err(Error::IndivisibleSteps { steps: d.n_steps, levels: 2 });
    }
    Ok(Primal {
        dims: d.coarse(),
        u: restrict_state(&x.u, d.nu)?,
        v: restrict_state(&x.v, d.nu)?,
        z: restrict_control(&x.z, d.nz)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkt::assemble::tests::random_vec;

    #[test]
    fn state_examples() {
        assert_eq!(prolong_state(&[3.0, 3.0, 3.0], 1).unwrap(), vec![3.0; 6]);
        assert_eq!(prolong_state(&[0.0, 2.0], 1).unwrap(), vec![0.0, 0.0, 1.0, 2.0]);
        let lin: Vec<f64> = (1..=5).map(|j| 2.0 * j as f64).collect();
        let fine = prolong_state(&lin, 1).unwrap();
        for i in 2..fine.len() - 1 {
            assert_eq!(fine[i + 1] - 2.0 * fine[i] + fine[i - 1], 0.0);
        }
        let mut imp = vec![0.0; 8];
        imp[2] = 1.0;
        assert_eq!(restrict_state(&imp, 1).unwrap(), vec![0.0; 4]);
        imp[2] = 0.0;
        imp[3] = 1.0;
        assert_eq!(restrict_state(&imp, 1).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn control_examples() {
        assert_eq!(prolong_control(&[1.0, 3.0], 1).unwrap(), vec![1.0, 1.0, 3.0, 3.0]);
        assert_eq!(restrict_control(&[1.0, 3.0, 5.0, 7.0], 1).unwrap(), vec![2.0, 6.0]);
        let c = random_vec(10, 3);
        assert_eq!(restrict_control(&prolong_control(&c, 2).unwrap(), 2).unwrap(), c);
    }

    #[test]
    fn odd_fine_count_rejected() {
        assert!(matches!(restrict_state(&[1.0; 3], 1), Err(Error::IndivisibleSteps { .. })));
        assert!(restrict_control(&[1.0; 5], 2).is_err());
    }

    #[test]
    fn kkt_identities() {
        for (nu, nz, nc) in [(2, 2, 4), (3, 1, 1), (1, 1, 8)] {
            let coarse = Layout::new(Dims { n_steps: nc, nu, nz });
            let fine = Layout::new(Dims { n_steps: 2 * nc, nu, nz });
            let xc = random_vec(coarse.len(), 7);
            let up = prolong_kkt(&coarse, &xc).unwrap();
            assert_eq!(restrict_kkt(&fine, &up).unwrap(), xc);
            assert_eq!(prolong_kkt(&coarse, &vec![1.0; coarse.len()]).unwrap(), vec![1.0; fine.len()]);
            assert_eq!(restrict_kkt(&fine, &vec![1.0; fine.len()]).unwrap(), vec![1.0; coarse.len()]);
        }
    }

    #[test]
    fn kkt_transfer_matches_per_kind_rules() {
        let (nu, nz, nc) = (2, 3, 3);
        let coarse = Layout::new(Dims { n_steps: nc, nu, nz });
        let fine = Layout::new(Dims { n_steps: 2 * nc, nu, nz });
        let xc = random_vec(coarse.len(), 1);
        let xf = prolong_kkt(&coarse, &xc).unwrap();
        for kind in VarKind::ALL {
            let w = coarse.width(kind);
            let cflat: Vec<f64> = (1..=nc).flat_map(|i| xc[coarse.range(kind, i)].to_vec()).collect();
            let expect = if kind == VarKind::Z { prolong_control(&cflat, w) } else { prolong_state(&cflat, w) }.unwrap();
            let got: Vec<f64> = (1..=2 * nc).flat_map(|i| xf[fine.range(kind, i)].to_vec()).collect();
            assert_eq!(got, expect, "{kind:?}");
        }
    }

    #[test]
    fn transfers_are_linear_but_not_adjoint() {
        let coarse = Layout::new(Dims { n_steps: 4, nu: 2, nz: 2 });
        let fine = Layout::new(Dims { n_steps: 8, nu: 2, nz: 2 });
        let (a, b) = (random_vec(fine.len(), 1), random_vec(fine.len(), 2));
        let comb: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * p - 2.0 * q).collect();
        let (ra, rb, rc) = (restrict_kkt(&fine, &a).unwrap(), restrict_kkt(&fine, &b).unwrap(), restrict_kkt(&fine, &comb).unwrap());
        for k in 0..rc.len() {
            assert!((rc[k] - (0.5 * ra[k] - 2.0 * rb[k])).abs() <= 1e-12);
        }
        let y = random_vec(coarse.len(), 3);
        let lhs = crate::linalg::dot_raw(&ra, &y);
        let rhs = crate::linalg::dot_raw(&a, &prolong_kkt(&coarse, &y).unwrap());
        assert!((lhs - rhs).abs() > 1e-6);
    }
}
