use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use tempo_kkt_core::kkt::{factor_diagonal, BlockTriKKT};
use tempo_kkt_core::krylov::{fgmres, gmres, KrylovOptions};
use tempo_kkt_core::multigrid::CycleKind;
use tempo_kkt_core::smoothers::{BlockPreconditioner, SmootherKind};
use tempo_kkt_core::sqp::{
    dual_to_flat, primal_to_flat, AugmentedSystem, LinearSolverConfig, OuterSolver, PrecondKind,
};
use tempo_kkt_core::timedisc::objective_flat;

use crate::config::{ExperimentConfig, Precond, Problem};
use crate::experiment::{initial_iterate, run_sqp, Summary};
use crate::output::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableId {
    T1,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
    Fig5,
}

impl TableId {
    pub const ALL: [TableId; 9] = [
        Self::T1,
        Self::T3,
        Self::T4,
        Self::T5,
        Self::T6,
        Self::T7,
        Self::T8,
        Self::T9,
        Self::Fig5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::T1 => "T1",
            Self::T3 => "T3",
            Self::T4 => "T4",
            Self::T5 => "T5",
            Self::T6 => "T6",
            Self::T7 => "T7",
            Self::T8 => "T8",
            Self::T9 => "T9",
            Self::Fig5 => "Fig5",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name().to_ascii_lowercase())
    }

    /// Row variable used when `ns_list` is not set.
    pub fn default_ns(self) -> Vec<usize> {
        match self {
            Self::T1 => vec![8, 16, 32, 64, 128, 256],
            Self::T5 | Self::T8 => vec![64],
            Self::Fig5 => vec![3, 10, 15, 30],
            _ => vec![64, 128, 256, 512, 1024, 2048],
        }
    }
}

impl FromStr for TableId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown table `{s}`: expected one of T1, T3, T4, T5, T6, T7, T8, T9, Fig5"))
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const COARSE_TOLS: [f64; 5] = [1e-10, 1e-8, 1e-6, 1e-4, 1e-2];
pub const VISCOSITIES: [f64; 3] = [1e-1, 1e-2, 1e-3];
/// Relative residual and cap of the coarse-solver study.
pub const T1_TOL: f64 = 1e-10;
/// Every `PROBE_STRIDE`-th augmented system of a run is re-solved in the comparisons.
pub const PROBE_STRIDE: usize = 5;
pub const T9_DEFAULT_ELEMS: usize = 800;

/// Builds the table. Failed rows are kept, with the failure in the `status` column.
pub fn run_table(id: TableId, cfg: &ExperimentConfig) -> Table {
    let ns = cfg.ns_list.clone().unwrap_or_else(|| id.default_ns());
    match id {
        TableId::T1 => coarse_study(cfg, &ns),
        TableId::T3 => cycle_table(&ExperimentConfig { problem: Problem::VanDerPol, ..cfg.clone() }, &ns),
        TableId::T6 => cycle_table(&ExperimentConfig { problem: Problem::Burgers, ..cfg.clone() }, &ns),
        TableId::T4 => flat_table(&ExperimentConfig { problem: Problem::VanDerPol, ..cfg.clone() }, &ns),
        TableId::T7 => flat_table(&ExperimentConfig { problem: Problem::Burgers, ..cfg.clone() }, &ns),
        TableId::T5 => outer_table(&ExperimentConfig { problem: Problem::VanDerPol, ..cfg.clone() }, &ns),
        TableId::T8 => outer_table(&ExperimentConfig { problem: Problem::Burgers, ..cfg.clone() }, &ns),
        TableId::T9 => viscosity_table(cfg, &ns),
        TableId::Fig5 => heat_histories(cfg, &ns),
    }
}

fn with_status(mut row: Vec<Cell>, failures: &[String]) -> Vec<Cell> {
    row.push(if failures.is_empty() { "ok".into() } else { failures.join("; ").into() });
    row
}

fn summary_cells(s: &Result<Summary, String>, cols: &[&str], failures: &mut Vec<String>, tag: &str) -> Vec<Cell> {
    match s {
        Ok(s) => {
            if !s.converged {
                failures.push(format!("{tag}: not_converged"));
            }
            cols.iter()
                .map(|c| match *c {
                    "CG" => s.cg.into(),
                    "LS" => s.ls.into(),
                    "SQP" => s.sqp.into(),
                    "LSTot" => s.ls_tot.into(),
                    "LSCoarse" => s.ls_coarse.into(),
                    _ => Cell::Empty,
                })
                .collect()
        }
        Err(e) => {
            failures.push(format!("{tag}: error: {e}"));
            vec![Cell::Empty; cols.len()]
        }
    }
}

fn summarize(cfg: &ExperimentConfig) -> Result<Summary, String> {
    run_sqp(cfg, None).map(|r| r.summary()).map_err(|e| e.to_string())
}

fn cycle_name(c: CycleKind) -> &'static str {
    match c {
        CycleKind::V => "V",
        CycleKind::F => "F",
        CycleKind::W => "W",
    }
}

/// Tables 3 and 6: CG, LS, SQP per cycle type.
fn cycle_table(cfg: &ExperimentConfig, ns: &[usize]) -> Table {
    const CYCLES: [CycleKind; 3] = [CycleKind::V, CycleKind::F, CycleKind::W];
    let mut header = vec!["Ns".to_string(), "Lv".to_string()];
    for c in CYCLES {
        header.extend(["CG", "LS", "SQP"].iter().map(|k| format!("{k}_{}", cycle_name(c))));
    }
    header.push("status".into());
    let jobs: Vec<(usize, CycleKind)> = ns.iter().flat_map(|&n| CYCLES.map(|c| (n, c))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(n, c)| summarize(&ExperimentConfig { cycle: c, precond: Precond::Multigrid, ..cfg.with_ns(n) }))
        .collect();
    let mut t = Table::new(&header);
    for (r, &n) in ns.iter().enumerate() {
        let mut failures = Vec::new();
        let mut row: Vec<Cell> = vec![n.into(), cfg.with_ns(n).levels_for(n).into()];
        for (k, c) in CYCLES.iter().enumerate() {
            row.extend(summary_cells(&results[3 * r + k], &["CG", "LS", "SQP"], &mut failures, cycle_name(*c)));
        }
        t.push(with_status(row, &failures));
    }
    t
}

/// Table 9: CG, LS, SQP per viscosity, backward Euler unless `theta` is set.
fn viscosity_table(cfg: &ExperimentConfig, ns: &[usize]) -> Table {
    let base = ExperimentConfig {
        problem: Problem::Burgers,
        theta: Some(cfg.theta.unwrap_or(1.0)),
        n_elems: Some(cfg.n_elems.unwrap_or(T9_DEFAULT_ELEMS)),
        precond: Precond::Multigrid,
        ..cfg.clone()
    };
    let mut header = vec!["Ns".to_string(), "Lv".to_string()];
    for nu in VISCOSITIES {
        header.extend(["CG", "LS", "SQP"].iter().map(|k| format!("{k}_nu{nu:e}")));
    }
    header.push("status".into());
    let jobs: Vec<(usize, f64)> = ns.iter().flat_map(|&n| VISCOSITIES.map(|nu| (n, nu))).collect();
    let results: Vec<_> = jobs.par_iter().map(|&(n, nu)| summarize(&ExperimentConfig { nu, ..base.with_ns(n) })).collect();
    let mut t = Table::new(&header);
    for (r, &n) in ns.iter().enumerate() {
        let mut failures = Vec::new();
        let mut row: Vec<Cell> = vec![n.into(), base.levels_for(n).into()];
        for (k, nu) in VISCOSITIES.iter().enumerate() {
            row.extend(summary_cells(&results[3 * r + k], &["CG", "LS", "SQP"], &mut failures, &format!("nu={nu:e}")));
        }
        t.push(with_status(row, &failures));
    }
    t
}

/// Tables 5 and 8: GMRES vs FGMRES outer loop over the coarse-solve tolerance.
fn outer_table(cfg: &ExperimentConfig, ns: &[usize]) -> Table {
    const OUTERS: [(OuterSolver, &str); 2] = [(OuterSolver::Gmres, "GMRES"), (OuterSolver::Fgmres, "FGMRES")];
    let mut header = vec!["Ns".to_string(), "Tol".to_string()];
    for (_, name) in OUTERS {
        header.extend(["LSTot", "LS", "LSCoarse", "SQP"].iter().map(|k| format!("{k}_{name}")));
    }
    header.push("status".into());
    let jobs: Vec<(usize, f64, OuterSolver)> =
        ns.iter().flat_map(|&n| COARSE_TOLS.iter().flat_map(move |&tol| OUTERS.map(|(o, _)| (n, tol, o)))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(n, coarse_tol, outer)| {
            summarize(&ExperimentConfig { coarse_tol, outer, precond: Precond::Multigrid, ..cfg.with_ns(n) })
        })
        .collect();
    let mut t = Table::new(&header);
    for (j, &(n, tol, _)) in jobs.iter().enumerate().step_by(2) {
        let mut failures = Vec::new();
        let mut row: Vec<Cell> = vec![n.into(), tol.into()];
        for (k, (_, name)) in OUTERS.iter().enumerate() {
            row.extend(summary_cells(&results[j + k], &["LSTot", "LS", "LSCoarse", "SQP"], &mut failures, name));
        }
        t.push(with_status(row, &failures));
    }
    t
}

/// Averages of re-solving probed systems with one preconditioner.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResolveStats {
    pub systems: usize,
    pub iterations: usize,
    pub capped: usize,
}

impl ResolveStats {
    pub fn average(&self) -> f64 {
        if self.systems == 0 {
            0.0
        } else {
            self.iterations as f64 / self.systems as f64
        }
    }
}

/// How probed systems are re-solved.
#[derive(Debug, Clone, Copy)]
pub enum Resolve {
    /// GMRES to a relative residual, from zero.
    Relative(f64),
    /// FGMRES to the absolute target the SQP used.
    SameTarget,
}

/// Outer Krylov solve of `A x = b` with one preconditioner choice; returns the iteration
/// count and whether it converged.
pub fn resolve_system(
    a: &BlockTriKKT,
    b: &[f64],
    target: f64,
    pc: Option<SmootherKind>,
    mode: Resolve,
    max_iters: usize,
    restart: Option<usize>,
) -> tempo_kkt_core::Result<(usize, bool)> {
    let opts = match mode {
        Resolve::Relative(tol) => KrylovOptions { rel_tol: tol, abs_tol: 0.0, max_iters, restart },
        Resolve::SameTarget => KrylovOptions { rel_tol: 0.0, abs_tol: target, max_iters, restart },
    };
    let x0 = vec![0.0; b.len()];
    let rep = match pc {
        None => gmres(a, None, b, &x0, &opts)?.1,
        Some(kind) => {
            let f = factor_diagonal(a)?;
            let mut p = BlockPreconditioner { kind, op: a, factors: &f };
            match mode {
                Resolve::Relative(_) => gmres(a, Some(&mut p), b, &x0, &opts)?.1,
                Resolve::SameTarget => fgmres(a, &mut p, b, &x0, &opts)?.1,
            }
        }
    };
    Ok((rep.iterations, rep.converged))
}

/// Runs SQP and re-solves every `PROBE_STRIDE`-th augmented system (up to `cfg.samples`)
/// with each preconditioner in `pcs`.
pub fn probed_study(
    cfg: &ExperimentConfig,
    pcs: &[Option<SmootherKind>],
    mode: Resolve,
) -> Result<(Summary, Vec<ResolveStats>), String> {
    let mut stats = vec![ResolveStats::default(); pcs.len()];
    let mut seen = 0usize;
    let mut failure: Option<String> = None;
    let summary = {
        let mut probe = |sys: &AugmentedSystem, b: &[f64], target: f64| {
            let a = sys.op();
            let k = seen;
            seen += 1;
            if failure.is_some() || k % PROBE_STRIDE != 0 || stats[0].systems >= cfg.samples {
                return;
            }
            let out: Vec<_> = pcs
                .par_iter()
                .map(|&pc| resolve_system(a, b, target, pc, mode, cfg.max_krylov_iters, cfg.restart))
                .collect();
            for (st, r) in stats.iter_mut().zip(out) {
                match r {
                    Ok((its, conv)) => {
                        st.systems += 1;
                        st.iterations += its;
                        st.capped += usize::from(!conv);
                    }
                    Err(e) => failure = Some(e.to_string()),
                }
            }
        };
        run_sqp(cfg, Some(&mut probe)).map(|r| r.summary()).map_err(|e| e.to_string())?
    };
    match failure {
        Some(e) => Err(e),
        None => Ok((summary, stats)),
    }
}

const SPLITTINGS: [SmootherKind; 4] = [SmootherKind::Jacobi, SmootherKind::Fgs, SmootherKind::Bgs, SmootherKind::Sgs];

/// Tables 4 and 7: F-cycle LS from the SQP run; block splittings from re-solving its systems
/// to the same targets with FGMRES.
fn flat_table(cfg: &ExperimentConfig, ns: &[usize]) -> Table {
    let pcs: Vec<Option<SmootherKind>> = SPLITTINGS.iter().map(|&k| Some(k)).collect();
    let results: Vec<_> = ns
        .par_iter()
        .map(|&n| {
            let c = ExperimentConfig { cycle: CycleKind::F, precond: Precond::Multigrid, ..cfg.with_ns(n) };
            probed_study(&c, &pcs, Resolve::SameTarget)
        })
        .collect();
    let mut t = Table::new(&["Ns", "Lv", "LS_F", "LS_J", "LS_FGS", "LS_BGS", "LS_SGS", "Systems", "status"]);
    for (&n, r) in ns.iter().zip(results) {
        let mut failures = Vec::new();
        let mut row: Vec<Cell> = vec![n.into(), cfg.with_ns(n).levels_for(n).into()];
        match r {
            Ok((s, st)) => {
                if !s.converged {
                    failures.push("F: not_converged".into());
                }
                row.push(s.ls.into());
                row.extend(st.iter().map(|x| Cell::from(x.average())));
                row.push(st[0].systems.into());
            }
            Err(e) => {
                failures.push(format!("error: {e}"));
                row.extend(vec![Cell::Empty; 6]);
            }
        }
        t.push(with_status(row, &failures));
    }
    t
}

/// Table 1: GMRES with no preconditioner and FGS/BGS/SGS on the augmented systems of both
/// problems, relative residual `T1_TOL`.
fn coarse_study(cfg: &ExperimentConfig, ns: &[usize]) -> Table {
    let mut pcs: Vec<Option<SmootherKind>> = vec![None];
    pcs.extend([SmootherKind::Fgs, SmootherKind::Bgs, SmootherKind::Sgs].map(Some));
    let problems = [(Problem::VanDerPol, "ODE"), (Problem::Burgers, "PDE")];
    let mut header = vec!["Ns".to_string()];
    for (_, tag) in problems {
        header.extend(["I", "FGS", "BGS", "SGS"].iter().map(|k| format!("{k}_{tag}")));
    }
    header.push("Systems".into());
    header.push("status".into());
    let jobs: Vec<(usize, Problem)> = ns.iter().flat_map(|&n| problems.map(|(p, _)| (n, p))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(n, problem)| {
            let c = ExperimentConfig { problem, precond: Precond::Multigrid, ..cfg.with_ns(n) };
            probed_study(&c, &pcs, Resolve::Relative(T1_TOL))
        })
        .collect();
    let mut t = Table::new(&header);
    for (r, &n) in ns.iter().enumerate() {
        let mut failures = Vec::new();
        let mut row: Vec<Cell> = vec![n.into()];
        let mut systems = usize::MAX;
        for (k, (_, tag)) in problems.iter().enumerate() {
            match &results[2 * r + k] {
                Ok((_, st)) => {
                    row.extend(st.iter().map(|x| Cell::from(x.average())));
                    systems = systems.min(st[0].systems);
                }
                Err(e) => {
                    failures.push(format!("{tag}: error: {e}"));
                    row.extend(vec![Cell::Empty; 4]);
                }
            }
        }
        row.push(if systems == usize::MAX { Cell::Empty } else { systems.into() });
        t.push(with_status(row, &failures));
    }
    t
}

/// Residual history of one GMRES solve on the heat augmented system.
pub fn heat_history(cfg: &ExperimentConfig, n: usize, pc: Option<SmootherKind>) -> tempo_kkt_core::Result<Vec<f64>> {
    let c = ExperimentConfig { problem: Problem::Heat, precond: Precond::None, ..cfg.with_ns(n) };
    let g = c.grid()?;
    let p = c.build_problem(&g)?;
    let x = initial_iterate(&p, &g)?;
    let lin = LinearSolverConfig { precond: PrecondKind::None, ..c.linear_config() };
    let sys = AugmentedSystem::build(&p, &x, g.dt, &lin)?;
    let a = sys.op();
    let grad = objective_flat(&p, g.dt, &x)?.grad;
    let mut r1 = primal_to_flat(&grad);
    r1.iter_mut().for_each(|v| *v = -*v);
    let c_x = tempo_kkt_core::sqp::constraints(&p, &x, g.dt)?;
    let r2: Vec<f64> = dual_to_flat(&c_x).iter().map(|v| -v).collect();
    let d = a.dims();
    let b = a.layout().pack(
        &tempo_kkt_core::sqp::primal_from_flat(d, &r1),
        &tempo_kkt_core::sqp::dual_from_flat(d, &r2),
    );
    let opts = KrylovOptions { rel_tol: T1_TOL, abs_tol: 0.0, max_iters: c.max_krylov_iters, restart: c.restart };
    let x0 = vec![0.0; b.len()];
    let rep = match pc {
        None => gmres(a, None, &b, &x0, &opts)?.1,
        Some(kind) => {
            let f = factor_diagonal(a)?;
            let mut p = BlockPreconditioner { kind, op: a, factors: &f };
            gmres(a, Some(&mut p), &b, &x0, &opts)?.1
        }
    };
    let r0 = rep.initial_residual.max(f64::MIN_POSITIVE);
    Ok(rep.residual_history.iter().map(|r| r / r0).collect())
}

/// Figure 5: relative residual histories, one series per preconditioner and step count.
fn heat_histories(cfg: &ExperimentConfig, ns: &[usize]) -> Table {
    let series: [(Option<SmootherKind>, &str); 4] = [
        (None, "none"),
        (Some(SmootherKind::Fgs), "fgs"),
        (Some(SmootherKind::Bgs), "bgs"),
        (Some(SmootherKind::Sgs), "sgs"),
    ];
    let jobs: Vec<(usize, usize)> = series.iter().enumerate().flat_map(|(s, _)| ns.iter().map(move |&n| (s, n))).collect();
    let results: Vec<_> = jobs.par_iter().map(|&(s, n)| heat_history(cfg, n, series[s].0)).collect();
    let mut t = Table::new(&["series", "N", "iteration", "residual", "status"]);
    for (&(s, n), r) in jobs.iter().zip(results) {
        match r {
            Ok(h) => {
                for (k, v) in h.iter().enumerate() {
                    t.push(vec![series[s].1.into(), n.into(), k.into(), (*v).into(), "ok".into()]);
                }
            }
            Err(e) => t.push(vec![series[s].1.into(), n.into(), Cell::Empty, Cell::Empty, format!("error: {e}").into()]),
        }
    }
    t
}

/// Iterations per (series, N) in a Figure-5 table.
pub fn history_lengths(t: &Table) -> Vec<(String, usize, usize)> {
    let mut out: Vec<(String, usize, usize)> = Vec::new();
    for row in &t.rows {
        let (Cell::Text(s), Cell::Int(n), Cell::Int(k)) = (&row[0], &row[1], &row[2]) else { continue };
        match out.last_mut() {
            Some(last) if last.0 == *s && last.1 == *n as usize => last.2 = last.2.max(*k as usize),
            _ => out.push((s.clone(), *n as usize, *k as usize)),
        }
    }
    out
}
