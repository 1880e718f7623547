//! The virtual-variable augmented system in block-tridiagonal ordering.
//!
//! Blocks: `(u₁, z₁, λ₁)`, then `(v_i, u_{i+1}, z_{i+1}, μ_i, λ_{i+1})` for `i = 1..N−1`,
//! then `(v_N, μ_N)`. Stage matrices enter only the diagonal blocks; neighbouring blocks are
//! coupled by the identity entries of the continuity constraints `u_i − v_i = 0`.

pub(crate) mod assemble;
mod factor;
mod layout;
mod rhs;
mod theorem1;

pub use assemble::{clustered_dense, BlockKind, BlockTriKKT, Part, StageBlocks};
pub use factor::{factor_diagonal, DiagFactors};
pub use layout::{from_clustered, to_clustered, Dual, Layout, VarKind};
pub use rhs::{assemble_rhs, KktRhs, RhsData};
pub use theorem1::{check_theorem1, Condition, Theorem1Report};

/// Runs `f(j, segment)` over consecutive disjoint segments of `y` whose lengths are given by
/// `sizes`, in parallel when the `parallel` feature is enabled. Each call owns its segment,
/// so the result does not depend on scheduling.
pub(crate) fn for_each_segment<F>(y: &mut [f64], sizes: &[usize], f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let mut segs: alloc::vec::Vec<&mut [f64]> = alloc::vec::Vec::with_capacity(sizes.len());
    let mut rest = y;
    for &s in sizes {
        let (a, b) = rest.split_at_mut(s);
        segs.push(a);
        rest = b;
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        segs.into_par_iter().enumerate().for_each(|(j, s)| f(j, s));
    }
    #[cfg(not(feature = "parallel"))]
    for (j, s) in segs.into_iter().enumerate() {
        f(j, s);
    }
}

/// Maps `f` over `0..n`, in parallel when enabled, preserving order.
pub(crate) fn map_indices<T, F>(n: usize, f: F) -> alloc::vec::Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
