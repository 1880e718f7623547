use super::*;
use crate::kkt::assemble::tests::{perturbed_iterate, random_vec};
use crate::krylov::LinearOperator;
use crate::linalg::{lu_factor, DenseMatrix, SparseMatrix};
use crate::multigrid::{CycleKind, MgConfig};
use crate::problems::{build_burgers, build_scalar_lq, build_vanderpol, BurgersConfig, ScalarLqConfig, VanDerPolConfig};

fn exact() -> SqpConfig {
    SqpConfig { tau: 1e-12, cg_rel_tol: 1e-12, delta0: 1e6, gtol: 1e-8, ctol: 1e-8, ..SqpConfig::default() }
}

fn lq(n: usize, theta: f64) -> (ProblemSpec, TimeGrid) {
    let g = TimeGrid::new(1.0, n).unwrap();
    (build_scalar_lq(&ScalarLqConfig { theta, ..ScalarLqConfig::default() }, &g).unwrap(), g)
}

fn start(p: &ProblemSpec, g: &TimeGrid) -> Primal {
    let traj = forward_solve(p, &vec![vec![0.0; p.n_z()]; g.n_steps], g, 1e-13).unwrap();
    Primal::from_trajectory(&traj)
}

fn columns(n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> DenseMatrix {
    let mut e = vec![0.0; n];
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            e[j] = 1.0;
            let c = f(&e);
            e[j] = 0.0;
            c
        })
        .collect();
    DenseMatrix::from_fn(cols[0].len(), n, |i, j| cols[j][i])
}

/// Dense solve of the equality-constrained QP that an affine-quadratic problem reduces to.
fn dense_kkt_point(p: &ProblemSpec, dt: f64, x: &Primal) -> (Vec<f64>, Vec<f64>) {
    let d = x.dims;
    let sys = AugmentedSystem::build(p, x, dt, &LinearSolverConfig::default()).unwrap();
    let y0 = Dual::zeros(d);
    let hess = LagrangianHessian { p, x, y: &y0, dt, mode: HessianMode::ExactLagrangian };
    let (np, nd) = (d.primal_len(), d.dual_len());
    let h = columns(np, |e| hess.apply(e).unwrap());
    let j = columns(np, |e| sys.apply(e).unwrap());
    let mut k = DenseMatrix::zeros(np + nd, np + nd);
    k.set_block(0, 0, &h);
    k.set_block(np, 0, &j);
    k.set_block(0, np, &j.transpose());
    let g = primal_to_flat(&objective_flat(p, dt, x).unwrap().grad);
    let c = dual_to_flat(&constraints(p, x, dt).unwrap());
    let rhs: Vec<f64> = g.iter().chain(&c).map(|v| -v).collect();
    let sol = lu_factor(&k).unwrap().solve(&rhs).unwrap();
    let mut xs = primal_to_flat(x);
    axpy_into(1.0, &sol[..np], &mut xs);
    (xs, sol[np..].to_vec())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn driver<'a>(p: &'a ProblemSpec, dt: f64, dims: crate::timedisc::Dims, cfg: &'a SqpConfig, lin: &'a LinearSolverConfig) -> Driver<'a, 'a> {
    Driver { p, dt, cfg, lin, q: QMetric::new(p, dims, dt).unwrap(), stats: LinearStats::default(), probe: None }
}

#[test]
fn lq_converges_in_one_step_to_the_dense_kkt_point() {
    for theta in [1.0, 0.5] {
        let (p, g) = lq(2, theta);
        let x0 = start(&p, &g);
        let (xs, ys) = dense_kkt_point(&p, g.dt, &x0);
        let rep = sqp_solve_from(&p, g.dt, x0, &exact(), &LinearSolverConfig::default(), None).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.steps.len(), 1);
        assert!(max_diff(&primal_to_flat(&rep.state.x), &xs) <= 1e-6);
        assert!(max_diff(&dual_to_flat(&rep.state.y), &ys) <= 1e-6);
    }
    let (p, g) = lq(16, 0.5);
    let x0 = start(&p, &g);
    let (xs, _) = dense_kkt_point(&p, g.dt, &x0);
    let rep = sqp_solve_from(&p, g.dt, x0, &exact(), &LinearSolverConfig::default(), None).unwrap();
    assert!(rep.converged && rep.steps.len() == 1);
    assert!(max_diff(&primal_to_flat(&rep.state.x), &xs) <= 1e-6);
}

#[test]
fn start_at_the_solution_takes_no_steps() {
    let (p, g) = lq(4, 1.0);
    let x0 = start(&p, &g);
    let (xs, _) = dense_kkt_point(&p, g.dt, &x0);
    let rep = sqp_solve_from(&p, g.dt, primal_from_flat(x0.dims, &xs), &exact(), &LinearSolverConfig::default(), None).unwrap();
    assert!(rep.converged);
    assert!(rep.steps.is_empty());
    assert_eq!(rep.state.k, 0);
}

#[test]
fn quasi_normal_is_min_norm_when_q_is_identity() {
    let (mut p, g) = lq(2, 0.5);
    p.state_metric = SparseMatrix::scaled_identity(1, 2.0 / g.dt);
    p.control_weight = SparseMatrix::scaled_identity(1, 1.0 / g.dt);
    let mut x = start(&p, &g);
    x.u[0] += 0.3;
    x.v[1] -= 0.2;
    x.z[1] = 0.7;
    let (cfg, lin) = (exact(), LinearSolverConfig::default());
    let mut d = driver(&p, g.dt, x.dims, &cfg, &lin);
    let pt = Point::new(&p, x, g.dt, &lin).unwrap();
    let q = columns(pt.grad_f.len(), |e| d.q.apply(e));
    assert!(max_diff(q.as_slice(), DenseMatrix::identity(q.rows()).as_slice()) <= 1e-14);
    let n = d.quasi_normal(&pt, 1e6).unwrap();
    let j = columns(pt.grad_f.len(), |e| pt.sys.apply(e).unwrap());
    let jjt = j.matmul(&j.transpose()).unwrap();
    let w = lu_factor(&jjt).unwrap().solve(&pt.c).unwrap();
    let pinv: Vec<f64> = j.apply_transpose(&w).unwrap().iter().map(|v| -v).collect();
    assert!(max_diff(&n, &pinv) <= 1e-8, "{n:?} vs {pinv:?}");
}

#[test]
fn quasi_normal_reduces_linearized_infeasibility() {
    let g = TimeGrid::new(4.0, 16).unwrap();
    let p = build_vanderpol(&VanDerPolConfig::default(), &g).unwrap();
    let x = perturbed_iterate(&p, &g, 3);
    let (cfg, lin) = (SqpConfig::default(), LinearSolverConfig::default());
    let mut d = driver(&p, g.dt, x.dims, &cfg, &lin);
    let pt = Point::new(&p, x, g.dt, &lin).unwrap();
    for delta in [1e-3, 1e-1, 10.0] {
        let n = d.quasi_normal(&pt, delta).unwrap();
        assert!(d.q.norm(&n) <= cfg.zeta * delta * (1.0 + 1e-10));
        let mut lin_c = pt.sys.apply(&n).unwrap();
        axpy_into(1.0, &pt.c, &mut lin_c);
        assert!(norm_raw(&lin_c) <= norm_raw(&pt.c));
    }
    let feasible = Point::new(&p, start(&p, &g), g.dt, &lin).unwrap();
    assert!(norm_raw(&d.quasi_normal(&feasible, 1.0).unwrap()) <= 1e-9);
}

#[test]
fn constraint_gradients_project_to_zero() {
    let g = TimeGrid::new(4.0, 16).unwrap();
    let p = build_vanderpol(&VanDerPolConfig::default(), &g).unwrap();
    let x = perturbed_iterate(&p, &g, 4);
    let lin = LinearSolverConfig::default();
    let sys = AugmentedSystem::build(&p, &x, g.dt, &lin).unwrap();
    let w = random_vec(x.dims.dual_len(), 5);
    let r = sys.apply_transpose(&w).unwrap();
    let zero = vec![0.0; w.len()];
    let (proj, mult) = sys.solve(&lin, &r, &zero, 1e-12, &mut LinearStats::default(), &mut None).unwrap();
    assert!(norm_raw(&proj) <= 1e-9 * norm_raw(&r));
    assert!(max_diff(&mult, &w) <= 1e-8);
}

#[test]
fn tangential_step_stays_in_the_nullspace_and_region() {
    let g = TimeGrid::new(4.0, 16).unwrap();
    let p = build_vanderpol(&VanDerPolConfig::default(), &g).unwrap();
    let x = perturbed_iterate(&p, &g, 6);
    let (cfg, lin) = (SqpConfig::default(), LinearSolverConfig::default());
    let mut d = driver(&p, g.dt, x.dims, &cfg, &lin);
    let pt = Point::new(&p, x, g.dt, &lin).unwrap();
    let y = random_vec(pt.c.len(), 2);
    for delta in [0.05, 5.0] {
        let n = d.quasi_normal(&pt, delta).unwrap();
        let (t, iters) = d.tangential(&pt, &y, &n, delta).unwrap();
        assert!(iters > 0);
        let jt = pt.sys.apply(&t).unwrap();
        assert!(norm_raw(&jt) <= 5.0 * cfg.tau * norm_raw(&t), "{} {}", norm_raw(&jt), norm_raw(&t));
        let mut s = n.clone();
        axpy_into(1.0, &t, &mut s);
        assert!(d.q.norm(&s) <= delta * (1.0 + 1e-10));
    }
}

#[test]
fn multiplier_update_reduces_lagrangian_gradient() {
    let (p, g) = lq(8, 0.5);
    let mut x = start(&p, &g);
    x.z.iter_mut().enumerate().for_each(|(i, z)| *z = 0.1 * i as f64);
    let (cfg, lin) = (exact(), LinearSolverConfig::default());
    let mut d = driver(&p, g.dt, x.dims, &cfg, &lin);
    let (_, ys) = dense_kkt_point(&p, g.dt, &x);
    let pt = Point::new(&p, x, g.dt, &lin).unwrap();
    let y = random_vec(pt.c.len(), 8);
    let (dy, _) = d.multiplier_update(&pt, &y, 1.0).unwrap();
    let mut y1 = y.clone();
    axpy_into(1.0, &dy, &mut y1);
    let g0 = norm_raw(&pt.grad_lagrangian(&y).unwrap());
    let g1 = norm_raw(&pt.grad_lagrangian(&y1).unwrap());
    assert!(g1 <= g0);
    // at the optimum the least-squares multiplier is the KKT multiplier
    let (xs, _) = dense_kkt_point(&p, g.dt, &pt.x);
    let opt = Point::new(&p, primal_from_flat(pt.x.dims, &xs), g.dt, &lin).unwrap();
    let (dy, gn) = d.multiplier_update(&opt, &ys, 1.0).unwrap();
    assert!(norm_raw(&dy) <= 1e-8 && gn <= 1e-8);
}

fn check_run(rep: &SqpReport) {
    for s in &rep.steps {
        assert!(s.step_norm <= s.radius * (1.0 + 1e-10));
        if s.accepted {
            assert!(s.ratio >= 1e-4);
        }
        assert!(s.ls_calls >= 2);
    }
}

#[test]
fn vanderpol_converges() {
    let g = TimeGrid::new(8.0, 64).unwrap();
    let p = build_vanderpol(&VanDerPolConfig::default(), &g).unwrap();
    let lin = LinearSolverConfig { mg: MgConfig { cycle: CycleKind::W, ..MgConfig::default() }, ..LinearSolverConfig::default() };
    let rep = sqp_solve(&p, &g, &SqpConfig::default(), &lin).unwrap();
    assert!(rep.converged, "{:?}", rep.steps);
    assert!(rep.steps.len() <= 15, "{}", rep.steps.len());
    check_run(&rep);
    let gn = SqpConfig { hessian: HessianMode::GaussNewton, ..SqpConfig::default() };
    let rep = sqp_solve(&p, &g, &gn, &lin).unwrap();
    assert!(rep.converged);
}

#[test]
fn burgers_converges() {
    let g = TimeGrid::new(1.0, 32).unwrap();
    let p = build_burgers(&BurgersConfig { n_elems: 16, ..BurgersConfig::default() }, &g).unwrap();
    let rep = sqp_solve(&p, &g, &SqpConfig::default(), &LinearSolverConfig::default()).unwrap();
    assert!(rep.converged, "{:?}", rep.steps);
    assert!(rep.steps.len() <= 8, "{}", rep.steps.len());
    check_run(&rep);
}

#[test]
fn probe_sees_every_solve() {
    let (p, g) = lq(4, 1.0);
    let mut count = 0;
    let mut probe = |s: &AugmentedSystem, b: &[f64], _: f64| {
        assert_eq!(s.op().dim(), b.len());
        count += 1;
    };
    let rep = sqp_solve_from(&p, g.dt, start(&p, &g), &exact(), &LinearSolverConfig::default(), Some(&mut probe)).unwrap();
    assert_eq!(count, rep.linear.calls);
}

#[test]
fn config_validation() {
    assert!(SqpConfig { tau: 1.0, ..SqpConfig::default() }.validate().is_err());
    assert!(SqpConfig { zeta: 0.0, ..SqpConfig::default() }.validate().is_err());
    assert!(SqpConfig { delta0: -1.0, ..SqpConfig::default() }.validate().is_err());
    assert!(SqpConfig::default().validate().is_ok());
}
