//! Acceptance criteria 1–9. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::f64::consts::{E, PI};
use std::process::ExitCode;
use std::time::Instant;

use mplab::barriers::{
    abp_bound, beta_for_width, exp_dir_barrier, narrow_threshold, pl_alpha_root, pl_margin, width_for_beta,
    width_from_alpha, BarrierFamily, SmoothFunction, SweepOptions,
};
use mplab::expr::Expr;
use mplab::geometry::{CylinderSpec, LatticeSpec};
use mplab::operators::{preset, LinearOp, OperatorSpec, PresetParams};
use mplab::sampling::rng;
use mplab::solver::{
    lattice_mp_scenario, narrow_eigen_test, solve_dirichlet, torsion_study, Grid, GridSpec, LatticeScenario,
    LatticeVerdict, NodeKind, SolveOptions,
};
use mplab::structure::{check_structure, Condition, PlanOptions, SamplePlan};
use mplab::verify::{counterexample_report, derivative_errors, sponge_limit_check, AnalyticFunction, SPONGE_LADDER};
use nalgebra::DVector;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1_counterexample() -> Outcome {
    let start = Instant::now();
    let b = counterexample_report("c1_degenerate", 0).map_err(|e| e.to_string())?;
    let u0 = AnalyticFunction::ExpSinSin.value(&[0.0, PI / 2.0, PI / 2.0]);
    let secs = start.elapsed().as_secs_f64();
    ensure(b.residual.sample_count == 1000 && b.residual.tolerance == 1e-10, "residual plan")?;
    ensure(b.residual.verdict, format!("residual worst margin {:e}", b.residual.worst_margin))?;
    ensure(b.boundary.sample_count == 1000 && b.boundary.tolerance == 1e-12, "boundary plan")?;
    ensure(b.boundary.verdict, format!("boundary trace {:e}", b.boundary.worst_margin))?;
    ensure(u0 == 1.0, format!("u(0, pi/2, pi/2) = {u0}"))?;
    ensure(secs < 1.0, format!("runtime {secs:.3}s"))?;
    Ok(format!(
        "residual {:.1e}, trace {:.1e}, u(0,pi/2,pi/2) = {u0}, {secs:.3}s",
        -b.residual.worst_margin, -b.boundary.worst_margin
    ))
}

fn growth_counterexample() -> Outcome {
    let start = Instant::now();
    let b = counterexample_report("quadratic_growth", 0).map_err(|e| e.to_string())?;
    ensure(b.residual.tolerance == 1e-12 && b.residual.verdict, format!("residual {:e}", b.residual.worst_margin))?;
    let p = preset("quadratic_growth", &PresetParams::default()).unwrap();
    let plan = SamplePlan::standard(&p.domain, &PlanOptions::default());
    let rep = check_structure(&p.operator, &p.domain, &plan).map_err(|e| e.to_string())?;
    let flag = rep.flag(Condition::OrthogonalGrowth).ok_or("no orthogonal growth flag")?;
    let secs = start.elapsed().as_secs_f64();
    ensure(!flag.passed, "orthogonal growth flag passed")?;
    let w = flag.witness.as_ref().ok_or("no witness")?;
    ensure(w.x[1].abs() >= 100.0, format!("witness at |x2| = {}", w.x[1].abs()))?;
    ensure(secs < 1.0, format!("runtime {secs:.3}s"))?;
    Ok(format!("residual {:.1e}, growth flag FAILS at x = {:?}, {secs:.3}s", -b.residual.worst_margin, w.x))
}

fn abp_torsion() -> Outcome {
    let start = Instant::now();
    let bound = abp_bound(1.0, 0.0, 1.0, 0.0).map_err(|e| e.to_string())?;
    ensure((bound - E).abs() < 1e-12, format!("bound {bound}"))?;
    let study = torsion_study(&[32, 64, 128], &SolveOptions::default()).map_err(|e| e.to_string())?;
    let m = study.max_u[2];
    let order = study.orders[0];
    let secs = start.elapsed().as_secs_f64();
    ensure((0.0730..=0.0742).contains(&m), format!("max u = {m}"))?;
    ensure((m - 0.07366781046909468).abs() < 1e-10, format!("max u {m} differs from the frozen fine-grid value"))?;
    ensure(m <= bound, "max u above bound")?;
    ensure(order >= 1.8, format!("order {order}"))?;
    ensure(secs < 30.0, format!("runtime {secs:.1}s"))?;
    Ok(format!("bound {bound:.12}, max u(h=1/128) = {m:.10}, order {order:.3}, {secs:.2}s"))
}

fn narrow() -> Outcome {
    for k in [1.0, 4.0, 10.0] {
        let t = narrow_threshold(0.0, k).map_err(|e| e.to_string())?;
        let exact = 1.0 / (E * k).sqrt();
        ensure((t - exact).abs() <= 1e-9, format!("K = {k}: {t} vs {exact}"))?;
    }
    let e = narrow_eigen_test(1.0, &[16, 32, 64], 2.0, 0).map_err(|e| e.to_string())?;
    let limit = PI.powi(4) / 12.0;
    for r in &e.resolutions {
        ensure(r.residual <= e.constant * r.h * r.h, "residual above C h^2")?;
        ensure((r.scaled - limit).abs() <= 0.02 * limit, format!("residual/h^2 = {} vs pi^4/12", r.scaled))?;
    }
    ensure((1.9..=2.1).contains(&e.observed_order), format!("order {}", e.observed_order))?;
    ensure(e.below_verdict, format!("max u below threshold = {:e}", e.max_u_below))?;
    ensure(e.max_u_below <= 1e-10, "max u")?;
    ensure(e.threshold_inside && (-1.0f64).exp() < PI * PI, "threshold inequality")?;
    Ok(format!(
        "thresholds exact, mode residual C = {:.4} (order {:.3}), max u at c = 0.9/(e d^2): {:.2e}, e^-1 = {:.4} < pi^2 = {:.4}",
        e.constant,
        e.observed_order,
        e.max_u_below,
        (-1.0f64).exp(),
        PI * PI
    ))
}

fn pl_parameters() -> Outcome {
    let a1 = pl_alpha_root(1.0, 1.0, 0.0);
    ensure((a1 - 8f64.sqrt()).abs() <= 1e-12, format!("alpha {a1}"))?;
    ensure(pl_margin(0.99 * a1, 1.0, 1.0, 0.0) > 0.0, "1% smaller alpha still satisfies the margin")?;
    let a2 = pl_alpha_root(1.0, 1.0, 1.0);
    ensure((a2 - (1.0 + 11f64.sqrt())).abs() <= 1e-12, format!("alpha {a2}"))?;
    let sweep = SweepOptions::default();
    ensure(sweep.x_points == 10_000 && sweep.r_max == 1e6, "sweep resolution")?;
    let w = width_from_alpha(a1, 1.0, &sweep).map_err(|e| e.to_string())?;
    ensure(w.d0 < PI / a1, format!("d0 = {} >= pi/alpha", w.d0))?;
    ensure(w.worst_margin >= 0.0, format!("worst margin {:e}", w.worst_margin))?;
    ensure((w.candidate - 0.5947253604021379).abs() < 1e-12, format!("candidate {}", w.candidate))?;
    let beta = 1.1;
    let back = beta_for_width(width_for_beta(beta, 1.0, 0.0), 1.0, 0.0).map_err(|e| e.to_string())?;
    ensure((back - beta).abs() <= 1e-6, format!("round trip beta {back}"))?;
    Ok(format!(
        "alpha = {a1:.15} and {a2:.15}, d0 = {:.10} < pi/alpha = {:.10}, sweep margin {:.2e}, round trip {:.1e}",
        w.d0,
        PI / a1,
        w.worst_margin,
        (back - beta).abs()
    ))
}

fn derivative_oracles() -> Outcome {
    let dom = CylinderSpec::axis_aligned(3, &[0, 1], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let pl_dom = CylinderSpec::axis_aligned(3, &[1, 2], &[0.0, 0.0], &[PI, PI]).unwrap();
    let cases: Vec<(&str, Box<dyn SmoothFunction>, [(f64, f64); 3])> = vec![
        ("sponge", Box::new(BarrierFamily::sponge(&dom)), [(-5.0, 5.0); 3]),
        (
            "exp_dir",
            Box::new(exp_dir_barrier(1.0, 2.0, 1.0, 0.5, &e1).map_err(|e| e.to_string())?),
            [(-1.0, 2.0), (-3.0, 3.0), (-3.0, 3.0)],
        ),
        (
            "abp_aux",
            Box::new(BarrierFamily::abp_aux(1.0, 2.0, &e1, 0.0).map_err(|e| e.to_string())?),
            [(-2.0, 2.0); 3],
        ),
        (
            "pl",
            Box::new(BarrierFamily::pl(&pl_dom, 0, 8f64.sqrt(), 1.0).map_err(|e| e.to_string())?),
            [(-5.0, 5.0), (0.0, PI), (0.0, PI)],
        ),
        ("exp_sin_sin", Box::new(AnalyticFunction::ExpSinSin), [(-5.0, 5.0), (0.0, PI), (0.0, PI)]),
        ("xsq_sin", Box::new(AnalyticFunction::XsqSin), [(0.0, PI), (-100.0, 100.0), (0.0, 0.0)]),
    ];
    let mut worst = 0.0f64;
    let mut gen = rng(6);
    for (name, f, ranges) in &cases {
        for _ in 0..200 {
            let x: Vec<f64> =
                ranges.iter().take(f.dim()).map(|&(lo, hi)| lo + (hi - lo) * gen.random::<f64>()).collect();
            let e = derivative_errors(f.as_ref(), &x, 1e-5);
            let m = e.gradient.max(e.hessian);
            ensure(m <= 1e-6, format!("{name} at {x:?}: gradient {:e}, hessian {:e}", e.gradient, e.hessian))?;
            worst = worst.max(m);
        }
    }
    Ok(format!("6 functions x 200 draws, worst relative error {worst:.2e}"))
}

fn discrete_mp() -> Outcome {
    let mut gen = rng(7);
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..50 {
        let w = 0.5 + 1.5 * gen.random::<f64>();
        let dom = CylinderSpec::axis_aligned(2, &[trial % 2], &[gen.random::<f64>() - 0.5], &[w]).unwrap();
        let a0 = 0.5 + gen.random::<f64>();
        let a1 = 0.5 + gen.random::<f64>();
        let growth = gen.random::<f64>();
        let op = LinearOp::diagonal(vec![
            Expr::constant(a0),
            Expr::parse(&format!("{a1} + {growth}*norm")).unwrap(),
        ])
        .unwrap()
        .with_drift(vec![Expr::constant(gen.random::<f64>() - 0.5), Expr::constant(gen.random::<f64>() - 0.5)])
        .unwrap()
        .with_zeroth_order(Expr::constant(-gen.random::<f64>()))
        .unwrap();
        let grid = Grid::truncated(&dom, &GridSpec { h: w / 12.0, r: 1.0 + gen.random::<f64>() }).unwrap();
        let f: Vec<f64> = (0..grid.node_count()).map(|_| gen.random::<f64>()).collect();
        let g: Vec<f64> = (0..grid.node_count()).map(|_| -gen.random::<f64>()).collect();
        let (u, _) = solve_dirichlet(&op.into(), &grid, &f, &g, &SolveOptions::default()).map_err(|e| e.to_string())?;
        let m = u.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ensure(m <= 1e-12, format!("trial {trial}: max u = {m:e}"))?;
        worst = worst.max(m);
    }
    let p = preset("bellman_isaacs_demo", &PresetParams::default()).unwrap();
    let grid = Grid::truncated(&p.domain, &GridSpec { h: 1.0 / 32.0, r: 2.0 }).unwrap();
    let f = grid.sample(|x| (3.0 * x[1]).sin());
    let g = grid.sample(|x| x[0] * x[1]);
    let (_, rep) = solve_dirichlet(&p.operator, &grid, &f, &g, &SolveOptions::default()).map_err(|e| e.to_string())?;
    ensure(rep.converged && rep.iterations <= 100, format!("policy iteration used {} solves", rep.iterations))?;
    ensure(rep.residual_monotone(), format!("residual history {:?}", rep.residual_history))?;
    Ok(format!(
        "50 random presets, worst max u {worst:.2e}; policy iteration {} solves, residual history {:?}",
        rep.iterations, rep.residual_history
    ))
}

fn lattice() -> Outcome {
    let lat = LatticeSpec::crossing_strips(1.0).unwrap();
    let sc = LatticeScenario { grid: GridSpec { h: 1.0 / 16.0, r: 3.0 }, end_value: -1.0, tolerance: 1e-10 };
    let rep = lattice_mp_scenario(&lat, &LinearOp::laplacian(2).into(), &sc, &SolveOptions::default())
        .map_err(|e| e.to_string())?;
    ensure(rep.regions.len() == 5, format!("{} regions", rep.regions.len()))?;
    for r in &rep.regions {
        ensure(r.within_one_cell, format!("{}: argmax {:?} is {} from the node region boundary", r.region, r.x, r.distance_to_node_boundary))?;
    }
    ensure(rep.global_max <= rep.boundary_max + 1e-12, format!("global max {} > boundary max {}", rep.global_max, rep.boundary_max))?;
    ensure(rep.verdict == LatticeVerdict::Pass, format!("{:?}", rep.verdict))?;
    let degenerate: OperatorSpec = LinearOp::new(
        vec![vec![Expr::constant(1.0), Expr::constant(-1.0)], vec![Expr::constant(-1.0), Expr::constant(1.0)]],
        vec![Expr::constant(0.0), Expr::constant(0.0)],
        Expr::constant(0.0),
    )
    .unwrap()
    .into();
    let out = lattice_mp_scenario(&lat, &degenerate, &sc, &SolveOptions::default()).map_err(|e| e.to_string())?;
    ensure(matches!(out.verdict, LatticeVerdict::OutOfHypotheses { .. }), "degenerate node region not flagged")?;
    let far = rep.regions.iter().map(|r| r.distance_to_node_boundary).fold(0.0, f64::max);
    Ok(format!(
        "5 regions, argmax within {far:.4} of the node region boundary (cell 0.0625), global max {:.2e} <= boundary max {:.2e}",
        rep.global_max, rep.boundary_max
    ))
}

fn sponge() -> Outcome {
    let p = preset("linear_mixed", &PresetParams::default()).unwrap();
    let plan = SamplePlan::standard(&p.domain, &PlanOptions::default());
    let rep = check_structure(&p.operator, &p.domain, &plan).map_err(|e| e.to_string())?;
    let l1 = rep.lambda_growth.value();
    ensure(l1.is_finite(), "Lambda_1 unbounded for linear_mixed")?;
    let c = sponge_limit_check(&p.operator, &p.domain, &SPONGE_LADDER, l1, 1e-10, 0).map_err(|e| e.to_string())?;
    ensure(c.verdict, format!("linear_mixed sponge margin {:e}", c.worst_margin))?;
    let q = preset("quadratic_growth", &PresetParams::default()).unwrap();
    let plan = SamplePlan::standard(&q.domain, &PlanOptions::default());
    let qrep = check_structure(&q.operator, &q.domain, &plan).map_err(|e| e.to_string())?;
    let cq = sponge_limit_check(&q.operator, &q.domain, &SPONGE_LADDER, qrep.lambda_growth_estimate, 1e-10, 0)
        .map_err(|e| e.to_string())?;
    ensure(!cq.verdict, "quadratic_growth sponge check passed")?;
    ensure(!qrep.passed(Condition::OrthogonalGrowth), "quadratic_growth growth flag passed")?;
    Ok(format!(
        "linear_mixed Lambda_1 = {l1}, worst margin {:.2e}; quadratic_growth fails at x = {:?} (orthogonal growth violated)",
        c.worst_margin, cq.witness
    ))
}

fn main() -> ExitCode {
    // the grid helpers must classify every node; cheap sanity check before the run
    assert!(Grid::unit_box(2, 2).unwrap().kinds().iter().all(|k| *k != NodeKind::Inactive));
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("C1 counterexample", c1_counterexample),
        ("orthogonal growth counterexample", growth_counterexample),
        ("ABP bound and torsion solve", abp_torsion),
        ("narrow-domain threshold", narrow),
        ("PL parameters", pl_parameters),
        ("derivative oracles", derivative_oracles),
        ("discrete maximum principle", discrete_mp),
        ("lattice localization", lattice),
        ("sponge limit", sponge),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
