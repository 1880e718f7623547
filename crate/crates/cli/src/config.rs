use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tempo_kkt_core::multigrid::{CycleKind, MgConfig};
use tempo_kkt_core::problems::{
    build_burgers, build_heat_neumann, build_vanderpol, BurgersConfig, HeatNeumannConfig, VanDerPolConfig,
};
use tempo_kkt_core::smoothers::{SmootherConfig, SmootherKind};
use tempo_kkt_core::sqp::{HessianMode, LinearSolverConfig, OuterSolver, PrecondKind, SqpConfig};
use tempo_kkt_core::timedisc::{ProblemSpec, TimeGrid};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: expected {expected}")]
    InvalidValue { key: String, value: String, expected: String },
    #[error("missing value for `{0}`")]
    MissingValue(String),
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("{0}")]
    Inconsistent(String),
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    VanDerPol,
    Burgers,
    Heat,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Self::VanDerPol => "vanderpol",
            Self::Burgers => "burgers",
            Self::Heat => "heat",
        }
    }

    /// Step count at which the automatic hierarchy stops coarsening.
    pub fn coarsest_steps(self) -> usize {
        match self {
            Self::VanDerPol | Self::Heat => 16,
            Self::Burgers => 8,
        }
    }

    pub fn default_theta(self) -> f64 {
        match self {
            Self::Burgers => 0.5,
            Self::VanDerPol | Self::Heat => 1.0,
        }
    }
}

impl FromStr for Problem {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "vanderpol" | "vdp" => Ok(Self::VanDerPol),
            "burgers" => Ok(Self::Burgers),
            "heat" => Ok(Self::Heat),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Preconditioner for the outer Krylov solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precond {
    Multigrid,
    Block(SmootherKind),
    None,
}

impl Precond {
    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mg" | "multigrid" => Some(Self::Multigrid),
            "none" => Some(Self::None),
            other => other.parse().ok().map(Self::Block),
        }
    }
}

impl fmt::Display for Precond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Multigrid => f.write_str("mg"),
            Self::Block(k) => write!(f, "{k}"),
            Self::None => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub ns: usize,
    /// `None` coarsens down to the problem's coarsest step count.
    pub levels: Option<usize>,
    pub cycle: CycleKind,
    pub smoother: SmootherKind,
    pub sweeps: usize,
    pub damping: f64,
    pub coarse_tol: f64,
    pub outer: OuterSolver,
    pub precond: Precond,
    pub max_krylov_iters: usize,
    pub restart: Option<usize>,
    pub tau: f64,
    pub zeta: f64,
    pub gtol: f64,
    pub ctol: f64,
    pub delta0: f64,
    pub max_sqp_iters: usize,
    pub hessian: HessianMode,
    /// `None` uses the problem default (1 for van der Pol and heat, ½ for Burgers).
    pub theta: Option<f64>,
    pub nu: f64,
    pub alpha: f64,
    /// Spatial elements for Burgers (default 128) or cells for heat (default 32).
    pub n_elems: Option<usize>,
    pub t_final: Option<f64>,
    /// Row variable for table sweeps; `None` uses each table's own list.
    pub ns_list: Option<Vec<usize>>,
    /// Probed systems re-solved per row in the preconditioner comparisons.
    pub samples: usize,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mg = MgConfig::default();
        let sqp = SqpConfig::default();
        Self {
            problem: Problem::VanDerPol,
            ns: 64,
            levels: None,
            cycle: mg.cycle,
            smoother: mg.smoother.kind,
            sweeps: mg.smoother.sweeps,
            damping: mg.smoother.damping,
            coarse_tol: mg.coarse_tol,
            outer: OuterSolver::Fgmres,
            precond: Precond::Multigrid,
            max_krylov_iters: tempo_kkt_core::krylov::DEFAULT_MAX_ITERS,
            restart: None,
            tau: sqp.tau,
            zeta: sqp.zeta,
            gtol: sqp.gtol,
            ctol: sqp.ctol,
            delta0: sqp.delta0,
            max_sqp_iters: sqp.max_iters,
            hessian: sqp.hessian,
            theta: None,
            nu: 1e-2,
            alpha: 0.1,
            n_elems: None,
            t_final: None,
            ns_list: None,
            samples: 8,
            seed: 0,
            output: PathBuf::from("out"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "problem",
    "ns",
    "levels",
    "cycle",
    "smoother",
    "sweeps",
    "damping",
    "coarse_tol",
    "outer",
    "precond",
    "max_krylov_iters",
    "restart",
    "tau",
    "zeta",
    "gtol",
    "ctol",
    "delta0",
    "max_sqp_iters",
    "hessian",
    "theta",
    "nu",
    "alpha",
    "n_elems",
    "t_final",
    "ns_list",
    "samples",
    "seed",
    "output",
];

fn bad(key: &str, value: &str, expected: &str) -> ConfigError {
    ConfigError::InvalidValue { key: key.into(), value: value.into(), expected: expected.into() }
}

fn num<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(key, value, expected))
}

fn positive(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = num(key, value, "a positive real")?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value, "a positive real"))
    }
}

fn unit_open(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = num(key, value, "a real in (0, 1)")?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(bad(key, value, "a real in (0, 1)"))
    }
}

fn count(key: &str, value: &str) -> Result<usize, ConfigError> {
    match value.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(bad(key, value, "a positive integer")),
    }
}

fn auto<T>(value: &str, f: impl FnOnce() -> Result<T, ConfigError>) -> Result<Option<T>, ConfigError> {
    if value.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        f().map(Some)
    }
}

fn fmt_opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".into(), |v| v.to_string())
}

impl ExperimentConfig {
    /// Sets one key; `-` and `_` are interchangeable in key names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        let value = value.trim();
        match k {
            "problem" => {
                self.problem = value.parse().map_err(|_| bad(k, value, "one of {vanderpol, burgers, heat}"))?
            }
            "ns" => self.ns = count(k, value)?,
            "levels" => self.levels = auto(value, || count(k, value))?,
            "cycle" => self.cycle = value.parse().map_err(|_| bad(k, value, "one of {v, f, w}"))?,
            "smoother" => {
                self.smoother = value.parse().map_err(|_| bad(k, value, "one of {jacobi, fgs, bgs, sgs}"))?
            }
            "sweeps" => self.sweeps = count(k, value)?,
            "damping" => {
                let v: f64 = num(k, value, "a real in (0, 2)")?;
                if !(v > 0.0 && v < 2.0) {
                    return Err(bad(k, value, "a real in (0, 2)"));
                }
                self.damping = v;
            }
            "coarse_tol" => self.coarse_tol = unit_open(k, value)?,
            "outer" => self.outer = value.parse().map_err(|_| bad(k, value, "one of {gmres, fgmres}"))?,
            "precond" => {
                self.precond =
                    Precond::parse(value).ok_or_else(|| bad(k, value, "one of {mg, jacobi, fgs, bgs, sgs, none}"))?
            }
            "max_krylov_iters" => self.max_krylov_iters = count(k, value)?,
            "restart" => {
                self.restart = if value.eq_ignore_ascii_case("none") { None } else { Some(count(k, value)?) }
            }
            "tau" => self.tau = unit_open(k, value)?,
            "zeta" => self.zeta = unit_open(k, value)?,
            "gtol" => self.gtol = positive(k, value)?,
            "ctol" => self.ctol = positive(k, value)?,
            "delta0" => self.delta0 = positive(k, value)?,
            "max_sqp_iters" => self.max_sqp_iters = count(k, value)?,
            "hessian" => {
                self.hessian = match value.to_ascii_lowercase().as_str() {
                    "exact" => HessianMode::ExactLagrangian,
                    "gauss_newton" | "gauss-newton" | "gn" => HessianMode::GaussNewton,
                    _ => return Err(bad(k, value, "one of {exact, gauss_newton}")),
                }
            }
            "theta" => {
                self.theta = auto(value, || {
                    let v: f64 = num(k, value, "a real in [0, 1] or auto")?;
                    if (0.0..=1.0).contains(&v) {
                        Ok(v)
                    } else {
                        Err(bad(k, value, "a real in [0, 1] or auto"))
                    }
                })?
            }
            "nu" => self.nu = positive(k, value)?,
            "alpha" => self.alpha = positive(k, value)?,
            "n_elems" => {
                self.n_elems = auto(value, || match value.parse::<usize>() {
                    Ok(v) if v >= 2 => Ok(v),
                    _ => Err(bad(k, value, "an integer >= 2 or auto")),
                })?
            }
            "t_final" => self.t_final = auto(value, || positive(k, value))?,
            "ns_list" => {
                self.ns_list = auto(value, || {
                    value
                        .split(',')
                        .map(|s| count(k, s.trim()).map_err(|_| bad(k, value, "comma-separated positive integers")))
                        .collect()
                })?
            }
            "samples" => self.samples = count(k, value)?,
            "seed" => self.seed = num(k, value, "a non-negative integer")?,
            "output" => {
                if value.is_empty() {
                    return Err(ConfigError::MissingValue(k.into()));
                }
                self.output = PathBuf::from(value)
            }
            _ => return Err(ConfigError::UnknownKey(key)),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "problem" => self.problem.to_string(),
            "ns" => self.ns.to_string(),
            "levels" => fmt_opt(&self.levels),
            "cycle" => self.cycle.to_string(),
            "smoother" => self.smoother.to_string(),
            "sweeps" => self.sweeps.to_string(),
            "damping" => self.damping.to_string(),
            "coarse_tol" => self.coarse_tol.to_string(),
            "outer" => self.outer.to_string(),
            "precond" => self.precond.to_string(),
            "max_krylov_iters" => self.max_krylov_iters.to_string(),
            "restart" => self.restart.map_or_else(|| "none".into(), |r| r.to_string()),
            "tau" => self.tau.to_string(),
            "zeta" => self.zeta.to_string(),
            "gtol" => self.gtol.to_string(),
            "ctol" => self.ctol.to_string(),
            "delta0" => self.delta0.to_string(),
            "max_sqp_iters" => self.max_sqp_iters.to_string(),
            "hessian" => match self.hessian {
                HessianMode::ExactLagrangian => "exact".into(),
                HessianMode::GaussNewton => "gauss_newton".into(),
            },
            "theta" => fmt_opt(&self.theta),
            "nu" => self.nu.to_string(),
            "alpha" => self.alpha.to_string(),
            "n_elems" => fmt_opt(&self.n_elems),
            "t_final" => fmt_opt(&self.t_final),
            "ns_list" => self.ns_list.as_ref().map_or_else(
                || "auto".into(),
                |l| l.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
            ),
            "samples" => self.samples.to_string(),
            "seed" => self.seed.to_string(),
            "output" => self.output.display().to_string(),
            _ => return None,
        })
    }

    /// The full configuration as `key = value` lines, readable by [`parse_config_text`].
    pub fn echo(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default())).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(l) = self.levels {
            let div = 1usize << (l - 1).min(usize::BITS as usize - 1);
            if self.ns % div != 0 {
                return Err(ConfigError::Inconsistent(format!(
                    "ns = {} is not divisible by 2^(levels-1) = {div} (levels = {l})",
                    self.ns
                )));
            }
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or_else(|| self.problem.default_theta())
    }

    /// Levels actually used for `ns` steps.
    pub fn levels_for(&self, ns: usize) -> usize {
        if self.precond != Precond::Multigrid {
            return 1;
        }
        self.levels.unwrap_or_else(|| {
            let (mut n, mut l) = (ns, 1);
            while n % 2 == 0 && n / 2 >= self.problem.coarsest_steps() {
                n /= 2;
                l += 1;
            }
            l
        })
    }

    pub fn with_ns(&self, ns: usize) -> Self {
        Self { ns, ..self.clone() }
    }

    pub fn grid(&self) -> tempo_kkt_core::Result<TimeGrid> {
        let t_final = self.t_final.unwrap_or(match self.problem {
            Problem::VanDerPol => VanDerPolConfig::default().t_final,
            Problem::Burgers => BurgersConfig::default().t_final,
            Problem::Heat => HeatNeumannConfig::default().t_final,
        });
        TimeGrid::new(t_final, self.ns)
    }

    pub fn build_problem(&self, g: &TimeGrid) -> tempo_kkt_core::Result<ProblemSpec> {
        let theta = self.theta();
        match self.problem {
            Problem::VanDerPol => build_vanderpol(
                &VanDerPolConfig { alpha: self.alpha, theta, t_final: g.t_final, ..VanDerPolConfig::default() },
                g,
            ),
            Problem::Burgers => build_burgers(
                &BurgersConfig {
                    nu: self.nu,
                    alpha: self.alpha,
                    n_elems: self.n_elems.unwrap_or(BurgersConfig::default().n_elems),
                    t_final: g.t_final,
                    theta,
                },
                g,
            ),
            Problem::Heat => build_heat_neumann(
                &HeatNeumannConfig {
                    n_cells: self.n_elems.unwrap_or(HeatNeumannConfig::default().n_cells),
                    t_final: g.t_final,
                    theta,
                    ..HeatNeumannConfig::default()
                },
                g,
            ),
        }
    }

    pub fn mg_config(&self) -> MgConfig {
        MgConfig {
            levels: Some(self.levels_for(self.ns)),
            cycle: self.cycle,
            smoother: SmootherConfig { kind: self.smoother, sweeps: self.sweeps, damping: self.damping },
            coarse_tol: self.coarse_tol,
            ..MgConfig::default()
        }
    }

    pub fn linear_config(&self) -> LinearSolverConfig {
        LinearSolverConfig {
            outer: self.outer,
            precond: match self.precond {
                Precond::Multigrid => PrecondKind::Multigrid,
                Precond::Block(k) => PrecondKind::Block(k),
                Precond::None => PrecondKind::None,
            },
            mg: self.mg_config(),
            max_iters: self.max_krylov_iters,
            restart: self.restart,
        }
    }

    pub fn sqp_config(&self) -> SqpConfig {
        SqpConfig {
            tau: self.tau,
            zeta: self.zeta,
            gtol: self.gtol,
            ctol: self.ctol,
            max_iters: self.max_sqp_iters,
            delta0: self.delta0,
            hessian: self.hessian,
            ..SqpConfig::default()
        }
    }
}

/// Applies `key = value` lines; `#` starts a comment.
pub fn parse_config_text(cfg: &mut ExperimentConfig, text: &str) -> Result<(), ConfigError> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.trim().into() })?;
        cfg.set(k, v)?;
    }
    Ok(())
}

/// Applies `--key value` / `--key=value` overrides.
pub fn parse_overrides(cfg: &mut ExperimentConfig, args: &[String]) -> Result<(), ConfigError> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            return Err(ConfigError::Syntax { line: 0, text: a.clone() });
        };
        match flag.split_once('=') {
            Some((k, v)) => cfg.set(k, v)?,
            None => {
                let v = it.next().ok_or_else(|| ConfigError::MissingValue(flag.into()))?;
                cfg.set(flag, v)?
            }
        }
    }
    Ok(())
}

/// Defaults, then the optional file, then the command-line overrides.
pub fn parse_config(file: Option<&Path>, args: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), msg: e.to_string() })?;
        parse_config_text(&mut cfg, &text)?;
    }
    parse_overrides(&mut cfg, args)?;
    cfg.validate()?;
    Ok(cfg)
}
