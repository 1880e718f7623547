use std::io::{self, Write};

use tempo_kkt_core::kkt::BlockTriKKT;
use tempo_kkt_core::krylov::LinearOperator;

use crate::output::fmt_real;

/// Writes `(row, col, value)` triplets (0-based) in MatrixMarket coordinate format.
pub fn write_coordinate<W: Write>(
    mut w: W,
    rows: usize,
    cols: usize,
    entries: &[(usize, usize, f64)],
) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{rows} {cols} {}", entries.len())?;
    for &(i, j, v) in entries {
        writeln!(w, "{} {} {}", i + 1, j + 1, fmt_real(v))?;
    }
    Ok(())
}

/// The assembled augmented operator, entries sorted by row then column.
pub fn write_kkt<W: Write>(w: W, a: &BlockTriKKT) -> io::Result<()> {
    let mut t = a.triplets();
    t.sort_by_key(|&(i, j, _)| (i, j));
    write_coordinate(w, a.dim(), a.dim(), &t)
}

/// Reads a coordinate file back into 0-based triplets.
pub fn read_coordinate(text: &str) -> Result<(usize, usize, Vec<(usize, usize, f64)>), String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let size = lines.next().ok_or("missing size line")?;
    let dims: Vec<usize> = size.split_whitespace().map(|s| s.parse().map_err(|_| format!("bad size line `{size}`"))).collect::<Result<_, _>>()?;
    let [rows, cols, nnz] = dims[..] else { return Err(format!("bad size line `{size}`")) };
    let mut out = Vec::with_capacity(nnz);
    for l in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        let [i, j, v] = f[..] else { return Err(format!("bad entry `{l}`")) };
        let parse_idx = |s: &str| s.parse::<usize>().ok().filter(|&k| k >= 1).ok_or_else(|| format!("bad index in `{l}`"));
        out.push((parse_idx(i)? - 1, parse_idx(j)? - 1, v.parse().map_err(|_| format!("bad value in `{l}`"))?));
    }
    if out.len() != nnz {
        return Err(format!("expected {nnz} entries, found {}", out.len()));
    }
    Ok((rows, cols, out))
}
