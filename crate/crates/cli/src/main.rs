use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tempo_kkt::check::run_checks;
use tempo_kkt::experiment::{initial_iterate, run_sqp, write_solve_artifacts};
use tempo_kkt::tables::{history_lengths, run_table, TableId};
use tempo_kkt::{exit, init_threads, mtx, parse_config, ExperimentConfig};
use tempo_kkt_core::kkt::BlockTriKKT;
use tempo_kkt_core::krylov::LinearOperator;

#[derive(Parser)]
#[command(name = "tempo-kkt", version, about = "Multigrid-in-time preconditioned KKT solves and experiment tables")]
struct Cli {
    /// Log verbosity (-v: SQP iterations, -vv: debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Configuration file with `key = value` lines.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Per-key overrides, e.g. `--problem burgers --ns 256`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    rest: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// One SQP solve; writes iterations.csv and trajectory.csv under `output`.
    Solve(Overrides),
    /// Sweeps one table (T1, T3-T9, Fig5) and writes it as CSV.
    Table {
        id: String,
        #[command(flatten)]
        args: Overrides,
    },
    /// Self-tests: nonsingularity, Jacobians, transfers, symmetry, smoothers, determinism.
    Check(Overrides),
    /// Prints the resolved configuration.
    Config(Overrides),
    /// Writes the augmented matrix at the starting iterate in MatrixMarket format.
    Dump(Overrides),
}

fn load(o: &Overrides) -> Result<ExperimentConfig, ExitCode> {
    parse_config(o.config.as_deref(), &o.rest).map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(exit::CONFIG as u8)
    })
}

fn solver_failure(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("solver error: {e}");
    ExitCode::from(exit::SOLVER as u8)
}

fn table_path(cfg: &ExperimentConfig, id: TableId) -> PathBuf {
    if cfg.output.extension().is_some_and(|e| e == "csv") {
        cfg.output.clone()
    } else {
        cfg.output.join(id.file_name())
    }
}

fn solve(cfg: &ExperimentConfig) -> Result<ExitCode, ExitCode> {
    let run = run_sqp(cfg, None).map_err(solver_failure)?;
    let art = write_solve_artifacts(&run, &cfg.output).map_err(solver_failure)?;
    println!("{}", art.summary.line(cfg));
    println!("wrote {} and {}", art.iterations.display(), art.trajectory.display());
    Ok(ExitCode::from(if art.summary.converged { exit::OK } else { exit::DIVERGENCE } as u8))
}

fn table(cfg: &ExperimentConfig, id: &str) -> Result<ExitCode, ExitCode> {
    let id: TableId = id.parse().map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(exit::CONFIG as u8)
    })?;
    let t = run_table(id, cfg);
    let path = table_path(cfg, id);
    t.write_csv(&path).map_err(solver_failure)?;
    if id == TableId::Fig5 {
        for (series, n, its) in history_lengths(&t) {
            println!("{series} N={n}: {its} iterations");
        }
    } else {
        print!("{}", t.to_csv_string());
    }
    let failed = t.rows.iter().filter(|r| r.last().is_some_and(|c| c.render() != "ok")).count();
    if failed > 0 {
        eprintln!("{failed} row(s) did not complete cleanly; see the status column");
    }
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn dump(cfg: &ExperimentConfig) -> Result<ExitCode, ExitCode> {
    let g = cfg.grid().map_err(solver_failure)?;
    let p = cfg.build_problem(&g).map_err(solver_failure)?;
    let x = initial_iterate(&p, &g).map_err(solver_failure)?;
    let a = BlockTriKKT::from_problem(&p, &x, g.dt).map_err(solver_failure)?;
    let path = if cfg.output.extension().is_some() { cfg.output.clone() } else { cfg.output.join("kkt.mtx") };
    write_mtx(&path, &a).map_err(solver_failure)?;
    println!("wrote {} ({} unknowns)", path.display(), a.dim());
    Ok(ExitCode::SUCCESS)
}

fn write_mtx(path: &Path, a: &BlockTriKKT) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    mtx::write_kkt(std::io::BufWriter::new(std::fs::File::create(path)?), a)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    init_threads();
    let out = match &cli.command {
        Command::Solve(o) => load(o).and_then(|c| solve(&c)),
        Command::Table { id, args } => load(args).and_then(|c| table(&c, id)),
        Command::Config(o) => load(o).map(|c| {
            print!("{}", c.echo());
            ExitCode::SUCCESS
        }),
        Command::Dump(o) => load(o).and_then(|c| dump(&c)),
        Command::Check(o) => load(o).map(|c| {
            let res = run_checks(c.seed);
            for r in &res {
                println!("{}", r.line());
            }
            if res.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(exit::SOLVER as u8)
            }
        }),
    };
    out.unwrap_or_else(|code| code)
}
