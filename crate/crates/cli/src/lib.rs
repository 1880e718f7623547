//! Experiment runner for the multigrid-in-time KKT toolkit: configuration, single solves,
//! table sweeps written as CSV, and self-checks.

pub mod check;
pub mod config;
pub mod experiment;
pub mod mtx;
pub mod output;
pub mod tables;

pub use config::{parse_config, ConfigError, ExperimentConfig, Problem};
pub use tables::{run_table, TableId};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const DIVERGENCE: i32 = 4;
}

/// Caps the global worker pool from `TEMPO_KKT_THREADS`; returns the cap if one was applied.
pub fn init_threads() -> Option<usize> {
    let n = std::env::var("TEMPO_KKT_THREADS").ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok().map(|_| n)
}
