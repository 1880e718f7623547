use std::path::{Path, PathBuf};

use tempo_kkt_core::sqp::{sqp_solve_from, Probe, SqpReport};
use tempo_kkt_core::timedisc::{forward_solve, Primal, ProblemSpec, TimeGrid};

use crate::config::ExperimentConfig;
use crate::output::{Cell, Table};

/// One SQP run together with the problem it solved.
pub struct Run {
    pub problem: ProblemSpec,
    pub grid: TimeGrid,
    pub levels: usize,
    pub report: SqpReport,
}

impl Run {
    pub fn summary(&self) -> Summary {
        let r = &self.report;
        Summary {
            ns: self.grid.n_steps,
            levels: self.levels,
            sqp: r.steps.len(),
            cg: r.cg_total(),
            ls: r.linear.average(),
            ls_tot: r.linear.iterations,
            ls_calls: r.linear.calls,
            ls_coarse: if r.linear.coarse_calls == 0 {
                0.0
            } else {
                r.linear.coarse_iters as f64 / r.linear.coarse_calls as f64
            },
            unconverged_solves: r.linear.unconverged,
            converged: r.converged,
            c_norm: r.state.c_norm,
            grad_norm: r.state.grad_norm,
        }
    }
}

/// Counters reported by every table row and by `solve`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub ns: usize,
    pub levels: usize,
    pub sqp: usize,
    pub cg: usize,
    /// Average outer Krylov iterations per call.
    pub ls: f64,
    pub ls_tot: usize,
    pub ls_calls: usize,
    /// Average coarse-grid GMRES iterations per coarse solve.
    pub ls_coarse: f64,
    pub unconverged_solves: usize,
    pub converged: bool,
    pub c_norm: f64,
    pub grad_norm: f64,
}

impl Summary {
    pub fn status(&self) -> &'static str {
        if self.converged {
            "ok"
        } else {
            "not_converged"
        }
    }

    pub fn line(&self, cfg: &ExperimentConfig) -> String {
        format!(
            "problem={} ns={} levels={} cycle={} outer={} precond={} sqp={} cg={} ls={:.2} ls_tot={} ls_calls={} \
             ls_coarse={:.2} |c|={:.3e} |gradL|={:.3e} status={}",
            cfg.problem,
            self.ns,
            self.levels,
            cfg.cycle,
            cfg.outer,
            cfg.precond,
            self.sqp,
            self.cg,
            self.ls,
            self.ls_tot,
            self.ls_calls,
            self.ls_coarse,
            self.c_norm,
            self.grad_norm,
            self.status()
        )
    }
}

/// Forward solution with zero control: the SQP starting point.
pub fn initial_iterate(p: &ProblemSpec, g: &TimeGrid) -> tempo_kkt_core::Result<Primal> {
    let traj = forward_solve(p, &vec![vec![0.0; p.n_z()]; g.n_steps], g, 1e-12)?;
    Ok(Primal::from_trajectory(&traj))
}

pub fn run_sqp(cfg: &ExperimentConfig, probe: Option<Probe<'_>>) -> tempo_kkt_core::Result<Run> {
    let grid = cfg.grid()?;
    let problem = cfg.build_problem(&grid)?;
    let x0 = initial_iterate(&problem, &grid)?;
    let report = sqp_solve_from(&problem, grid.dt, x0, &cfg.sqp_config(), &cfg.linear_config(), probe)?;
    Ok(Run { levels: cfg.levels_for(cfg.ns), problem, grid, report })
}

pub fn iterations_table(report: &SqpReport) -> Table {
    let mut t = Table::new(&[
        "k", "c_norm", "grad_norm", "radius", "delta", "step_norm", "ratio", "accepted", "cg", "ls_calls", "ls_avg",
        "ls_coarse_calls", "ls_coarse_iters",
    ]);
    for s in &report.steps {
        t.push(vec![
            s.k.into(),
            s.c_norm.into(),
            s.grad_norm.into(),
            s.radius.into(),
            s.delta.into(),
            s.step_norm.into(),
            if s.ratio.is_finite() { s.ratio.into() } else { Cell::Empty },
            usize::from(s.accepted).into(),
            s.cg_iters.into(),
            s.ls_calls.into(),
            s.ls_avg().into(),
            s.coarse_calls.into(),
            s.coarse_iters.into(),
        ]);
    }
    t
}

/// Rows `t_i, u_i, z_i` for `i = 1..N` (the control is constant on `(t_{i−1}, t_i]`).
pub fn trajectory_table(run: &Run) -> Table {
    let x = &run.report.state.x;
    let d = x.dims;
    let mut header = vec!["t".to_string()];
    header.extend((1..=d.nu).map(|k| format!("u{k}")));
    header.extend((1..=d.nz).map(|k| format!("z{k}")));
    let mut t = Table::new(&header);
    for i in 1..=d.n_steps {
        let mut row: Vec<Cell> = vec![run.grid.node(i).into()];
        row.extend(x.u_at(i).iter().map(|&v| Cell::from(v)));
        row.extend(x.z_at(i).iter().map(|&v| Cell::from(v)));
        t.push(row);
    }
    t
}

pub struct SolveArtifacts {
    pub iterations: PathBuf,
    pub trajectory: PathBuf,
    pub summary: Summary,
}

pub fn write_solve_artifacts(run: &Run, dir: &Path) -> std::io::Result<SolveArtifacts> {
    std::fs::create_dir_all(dir)?;
    let iterations = dir.join("iterations.csv");
    let trajectory = dir.join("trajectory.csv");
    iterations_table(&run.report).write_csv(&iterations)?;
    trajectory_table(run).write_csv(&trajectory)?;
    Ok(SolveArtifacts { iterations, trajectory, summary: run.summary() })
}
