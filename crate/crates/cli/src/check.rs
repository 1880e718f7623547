use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempo_kkt_core::kkt::{
    assemble_rhs, check_theorem1, clustered_dense, factor_diagonal, from_clustered, to_clustered, BlockTriKKT,
    Condition, Layout, RhsData,
};
use tempo_kkt_core::krylov::LinearOperator;
use tempo_kkt_core::linalg::{lu_factor, norm2, SparseMatrix};
use tempo_kkt_core::multigrid::{prolong_kkt, restrict_kkt};
use tempo_kkt_core::smoothers::{smooth, SmootherConfig, SmootherKind};
use tempo_kkt_core::timedisc::{jacobian_fd_error, Dims, Primal};

use crate::config::{ExperimentConfig, Problem};
use crate::experiment::initial_iterate;

pub const JACOBIAN_TOL: f64 = 1e-6;
pub const SYMMETRY_TOL: f64 = 1e-10;
pub const CONGRUENCE_TOL: f64 = 1e-14;
pub const FIXED_POINT_TOL: f64 = 1e-14;
pub const CONTINUITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn small(problem: Problem) -> ExperimentConfig {
    ExperimentConfig {
        problem,
        ns: 16,
        n_elems: Some(if problem == Problem::Burgers { 16 } else { 8 }),
        ..ExperimentConfig::default()
    }
}

fn random(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

/// Linearization point: forward solution with zero control, then perturbed controls and
/// virtual states.
fn operator(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> tempo_kkt_core::Result<BlockTriKKT> {
    let g = cfg.grid()?;
    let p = cfg.build_problem(&g)?;
    let mut x: Primal = initial_iterate(&p, &g)?;
    for v in x.v.iter_mut() {
        *v += 0.05 * rng.gen_range(-1.0..1.0);
    }
    for v in x.z.iter_mut() {
        *v += 0.1 * rng.gen_range(-1.0..1.0);
    }
    BlockTriKKT::from_problem(&p, &x, g.dt)
}

fn theorem1_checks(rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for problem in [Problem::VanDerPol, Problem::Burgers, Problem::Heat] {
        let name = format!("theorem1 {problem}");
        out.push(match operator(&small(problem), rng) {
            Ok(a) => {
                let rep = check_theorem1(a.stages());
                CheckResult { name, passed: rep.passed(), detail: format!("{} failing conditions", rep.failures().len()) }
            }
            Err(e) => CheckResult { name, passed: false, detail: e.to_string() },
        });
    }
    let name = "theorem1 flags singular blocks".to_string();
    out.push(match operator(&small(Problem::VanDerPol), rng) {
        Ok(a) => {
            let mut s = a.stages().clone();
            s.k[1] = SparseMatrix::zeros(2, 2);
            s.qz[2] = SparseMatrix::zeros(2, 2);
            let got = check_theorem1(&s).failures();
            let want = vec![(Condition::QzSpd, 2), (Condition::KNonsingular, 1)];
            CheckResult { name, passed: got == want, detail: format!("flagged {got:?}") }
        }
        Err(e) => CheckResult { name, passed: false, detail: e.to_string() },
    });
    out
}

fn jacobian_checks(rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for problem in [Problem::VanDerPol, Problem::Burgers, Problem::Heat] {
        let cfg = small(problem);
        let name = format!("jacobian fd {problem}");
        let res = cfg.grid().and_then(|g| cfg.build_problem(&g));
        out.push(match res {
            Ok(p) => {
                let worst = (0..5)
                    .map(|_| {
                        let u = random(rng, p.n_u(), 1.5);
                        let z = random(rng, p.n_z(), 1.0);
                        jacobian_fd_error(&p, &u, &z)
                    })
                    .fold(0.0, f64::max);
                CheckResult {
                    name,
                    passed: worst <= JACOBIAN_TOL,
                    detail: format!("max relative error {worst:.2e} (tol {JACOBIAN_TOL:.0e})"),
                }
            }
            Err(e) => CheckResult { name, passed: false, detail: e.to_string() },
        });
    }
    out
}

fn transfer_checks(rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let coarse = Layout::new(Dims { nu: 3, nz: 2, n_steps: 8 });
    let fine = Layout::new(Dims { nu: 3, nz: 2, n_steps: 16 });
    let x = random(rng, coarse.len(), 1.0);
    let round = prolong_kkt(&coarse, &x).and_then(|p| restrict_kkt(&fine, &p));
    let identity = match round {
        Ok(r) => CheckResult {
            name: "transfer restrict(prolong(x)) = x".into(),
            passed: r == x,
            detail: format!("max deviation {:.1e}", r.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)),
        },
        Err(e) => CheckResult { name: "transfer restrict(prolong(x)) = x".into(), passed: false, detail: e.to_string() },
    };
    let c = 0.7315;
    let constants = prolong_kkt(&coarse, &vec![c; coarse.len()])
        .and_then(|p| Ok((restrict_kkt(&fine, &vec![c; fine.len()])?, p)));
    let preserve = match constants {
        Ok((r, p)) => CheckResult {
            name: "transfer preserves constants".into(),
            passed: p.iter().chain(&r).all(|&v| v == c),
            detail: format!("{} fine and {} coarse entries", p.len(), r.len()),
        },
        Err(e) => CheckResult { name: "transfer preserves constants".into(), passed: false, detail: e.to_string() },
    };
    vec![identity, preserve]
}

fn check(name: String, res: tempo_kkt_core::Result<(bool, String)>) -> CheckResult {
    match res {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult { name, passed: false, detail: e.to_string() },
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn operator_checks(rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for problem in [Problem::VanDerPol, Problem::Burgers] {
        let cfg = ExperimentConfig { ns: 6, ..small(problem) };
        let a = match operator(&cfg, rng) {
            Ok(a) => a,
            Err(e) => {
                out.push(CheckResult { name: format!("operator {problem}"), passed: false, detail: e.to_string() });
                continue;
            }
        };
        let n = a.dim();
        let (x, y) = (random(rng, n, 1.0), random(rng, n, 1.0));
        out.push(check(format!("symmetry {problem}"), (|| {
            let (ax, ay) = (a.apply(&x)?, a.apply(&y)?);
            let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(s, t)| s * t).sum::<f64>();
            let scale = norm2(&ax).max(norm2(&ay)) * norm2(&x).max(norm2(&y));
            let gap = (dot(&ax, &y) - dot(&x, &ay)).abs() / scale;
            Ok((gap <= SYMMETRY_TOL, format!("relative gap {gap:.1e} (tol {SYMMETRY_TOL:.0e})")))
        })()));
        out.push(check(format!("permutation congruence {problem}"), (|| {
            let Dims { n_steps, nu, nz } = a.dims();
            let c = clustered_dense(&a);
            let via = from_clustered(&c.matvec(&to_clustered(&x, nu, nz, n_steps)?)?, nu, nz, n_steps)?;
            let direct = a.to_dense().matvec(&x)?;
            let gap = max_diff(&via, &direct) / norm2(&direct);
            Ok((gap <= CONGRUENCE_TOL, format!("relative gap {gap:.1e} (tol {CONGRUENCE_TOL:.0e})")))
        })()));
        for kind in SmootherKind::ALL {
            out.push(check(format!("fixed point {kind} {problem}"), (|| {
                let f = factor_diagonal(&a)?;
                let b = a.apply(&x)?;
                let y = smooth(&SmootherConfig { kind, sweeps: 2, damping: 0.5 }, &a, &f, &b, &x)?;
                let gap = max_diff(&y, &x) / norm2(&x);
                Ok((gap <= FIXED_POINT_TOL, format!("relative drift {gap:.1e} (tol {FIXED_POINT_TOL:.0e})")))
            })()));
        }
        out.push(check(format!("continuity recovery {problem}"), (|| {
            let d = a.dims();
            let mut data = RhsData::zeros(d.n_steps, d.nu, d.nz);
            for i in 0..d.n_steps {
                data.b1[i] = random(rng, d.nu, 1.0);
                data.b1v[i] = random(rng, d.nu, 1.0);
                data.b2[i] = random(rng, d.nz, 1.0);
                data.b3[i] = random(rng, d.nu, 1.0);
            }
            let sol = lu_factor(&a.to_dense())?.solve(&assemble_rhs(&a, &data)?)?;
            let (p, _) = a.layout().unpack(&sol);
            let gap = (1..=d.n_steps).map(|i| max_diff(p.u_at(i), p.v_at(i))).fold(0.0, f64::max) / norm2(&sol);
            Ok((gap <= CONTINUITY_TOL, format!("max |u_i - v_i| relative {gap:.1e} (tol {CONTINUITY_TOL:.0e})")))
        })()));
    }
    out
}

fn determinism_check(rng: &mut ChaCha8Rng) -> CheckResult {
    let cfg = ExperimentConfig { ns: 64, ..small(Problem::Burgers) };
    check("block jacobi determinism".into(), (|| {
        let a = operator(&cfg, rng)?;
        let f = factor_diagonal(&a)?;
        let (b, x) = (random(rng, a.dim(), 1.0), random(rng, a.dim(), 1.0));
        let cfg = SmootherConfig { kind: SmootherKind::Jacobi, sweeps: 3, damping: 0.5 };
        let mut runs = Vec::new();
        for threads in [1, 2, 4] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| tempo_kkt_core::Error::InvalidConfig(e.to_string()))?;
            runs.push(pool.install(|| smooth(&cfg, &a, &f, &b, &x))?);
        }
        let same = runs.iter().all(|r| r.iter().zip(&runs[0]).all(|(p, q)| p.to_bits() == q.to_bits()));
        Ok((same, "1, 2 and 4 threads compared bitwise".into()))
    })())
}

/// Nonsingularity, Jacobian, transfer, operator and smoother self-tests; `seed` drives the
/// random probes.
pub fn run_checks(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = theorem1_checks(&mut rng);
    out.extend(jacobian_checks(&mut rng));
    out.extend(transfer_checks(&mut rng));
    out.extend(operator_checks(&mut rng));
    out.push(determinism_check(&mut rng));
    out
}
