use mplab::barriers::{abp_bound, beta_for_width, width_for_beta, BarrierFamily};
use mplab::bounds::{run_theorem_on_preset, TheoremId, TheoremOptions};
use mplab::expr::Expr;
use mplab::geometry::{make_cylinder, CylinderSpec};
use mplab::operators::{evaluate, preset, ConstLinear, EvalPoint, LinearOp, OperatorSpec, PresetParams, SupInfOp};
use mplab::solver::{discretize, solve_dirichlet, Grid, GridSpec, SolveOptions};
use mplab::verify::{derivative_errors, AnalyticFunction};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn sym(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[v[0], v[1], v[1], v[2]])
}

fn sym3(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5]])
}

fn psd3(v: &[f64]) -> DMatrix<f64> {
    let b = DMatrix::from_row_slice(3, 3, v);
    &b * b.transpose()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn linear_operator_is_monotone_in_hessian(
        x in prop::collection::vec(-5.0..5.0f64, 3),
        h in prop::collection::vec(-3.0..3.0f64, 6),
        q in prop::collection::vec(-1.0..1.0f64, 9),
    ) {
        let op: OperatorSpec = preset("linear_mixed", &PresetParams::default()).unwrap().operator;
        let pt = EvalPoint::new(&x, 0.3, &[0.1, -0.2, 0.4], sym3(&h));
        let base = evaluate(&op, &pt).unwrap();
        let up = evaluate(&op, &pt.with_hess(sym3(&h) + psd3(&q))).unwrap();
        prop_assert!(up >= base - 1e-12 * (1.0 + base.abs()));
    }

    #[test]
    fn sup_inf_matches_brute_force(
        coeffs in prop::collection::vec(0.0..2.0f64, 12),
        h in prop::collection::vec(-3.0..3.0f64, 3),
        p in prop::collection::vec(-1.0..1.0f64, 2),
        s in -1.0..1.0f64,
    ) {
        let fam = |k: usize| ConstLinear::diag(&[coeffs[k], coeffs[k + 1]], &[coeffs[k + 2] - 1.0, 0.0], -coeffs[k + 2]);
        let families = vec![vec![fam(0), fam(3)], vec![fam(6), fam(9)]];
        let op = SupInfOp::new(families.clone()).unwrap();
        let pv = DVector::from_vec(p);
        let hm = sym(&h);
        let mut best = f64::NEG_INFINITY;
        for f in &families {
            let mut worst = f64::INFINITY;
            for l in f {
                let a = &l.a;
                let v = a[(0, 0)] * hm[(0, 0)] + 2.0 * a[(0, 1)] * hm[(0, 1)] + a[(1, 1)] * hm[(1, 1)]
                    + l.b.dot(&pv) + l.c * s;
                worst = worst.min(v);
            }
            best = best.max(worst);
        }
        prop_assert!((op.apply(s, &pv, &hm) - best).abs() <= 1e-12 * (1.0 + best.abs()));
    }

    #[test]
    fn rotated_cylinder_membership(
        theta in 0.0..std::f64::consts::TAU,
        a in -2.0..2.0f64,
        w in 0.1..3.0f64,
        t in -0.5..1.5f64,
        u in -50.0..50.0f64,
    ) {
        let (c, s) = (theta.cos(), theta.sin());
        let dom = make_cylinder(2, &[vec![c, s]], &[a], &[w]).unwrap();
        let x = [(a + t * w) * c - u * s, (a + t * w) * s + u * c];
        let inside = dom.contains(&x).unwrap();
        if (0.0..=1.0).contains(&t) && (t - 0.0).abs() > 1e-9 && (t - 1.0).abs() > 1e-9 {
            prop_assert!(inside);
        }
        if !(-1e-9..=1.0 + 1e-9).contains(&t) {
            prop_assert!(!inside);
        }
    }

    #[test]
    fn abp_bound_monotone(d in 0.05..3.0f64, g in 0.0..2.0f64, dd in 0.0..1.0f64, dg in 0.0..1.0f64, sup in 0.0..5.0f64) {
        let b = abp_bound(d, g, sup, 0.0).unwrap();
        prop_assert!(abp_bound(d + dd, g, sup, 0.0).unwrap() >= b);
        prop_assert!(abp_bound(d, g + dg, sup, 0.0).unwrap() >= b);
        prop_assert!(b >= 0.0);
    }

    #[test]
    fn derivative_oracle_on_counterexamples(x1 in -3.0..3.0f64, x2 in 0.1..3.0f64, x3 in 0.1..3.0f64) {
        let e = derivative_errors(&AnalyticFunction::ExpSinSin, &[x1, x2, x3], 1e-5);
        prop_assert!(e.gradient <= 1e-6 && e.hessian <= 1e-6);
        let e = derivative_errors(&AnalyticFunction::XsqSin, &[x2, 10.0 * x1], 1e-5);
        prop_assert!(e.gradient <= 1e-6 && e.hessian <= 1e-6);
    }

    #[test]
    fn sponge_derivatives(x in prop::collection::vec(-4.0..4.0f64, 3)) {
        let dom = CylinderSpec::axis_aligned(3, &[0], &[0.0], &[1.0]).unwrap();
        let e = derivative_errors(&BarrierFamily::sponge(&dom), &x, 1e-5);
        prop_assert!(e.gradient <= 1e-6 && e.hessian <= 1e-6);
    }
}

proptest! {
    // each case runs the full certified width sweep
    #![proptest_config(config(8))]

    #[test]
    fn pl_width_round_trip(beta in 0.2..5.0f64, rho in 0.1..4.0f64, gamma in 0.0..2.0f64) {
        let d = width_for_beta(beta, rho, gamma);
        prop_assert!(d > 0.0);
        let back = beta_for_width(d, rho, gamma).unwrap();
        prop_assert!((back - beta).abs() <= 1e-6 * (1.0 + beta));
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn discrete_solution_respects_maximum_principle(
        a0 in 0.2..2.0f64, a1 in 0.2..2.0f64, cross in -0.15..0.15f64,
        b0 in -1.0..1.0f64, c in -1.0..0.0f64, amp in 0.0..1.0f64,
    ) {
        let op = LinearOp::new(
            vec![vec![Expr::constant(a0), Expr::constant(cross * a0.min(a1))],
                 vec![Expr::constant(cross * a0.min(a1)), Expr::constant(a1)]],
            vec![Expr::constant(b0), Expr::constant(0.0)],
            Expr::constant(c),
        ).unwrap();
        let grid = Grid::unit_box(2, 12).unwrap();
        let f = grid.sample(|x| amp * (1.0 + x[0] * x[1]));
        let g = grid.sample(|x| -amp * x[0]);
        let (u, _) = solve_dirichlet(&op.into(), &grid, &f, &g, &SolveOptions::default()).unwrap();
        prop_assert!(u.values.iter().all(|v| *v <= 1e-12));
    }

    #[test]
    fn scheme_exact_on_quadratics(q in prop::collection::vec(-2.0..2.0f64, 6), a0 in 0.5..2.0f64, a1 in 0.5..2.0f64) {
        let op: OperatorSpec = LinearOp::diagonal(vec![Expr::constant(a0), Expr::constant(a1)]).unwrap().into();
        let grid = Grid::unit_box(2, 8).unwrap();
        let d = discretize(&op, &grid).unwrap();
        let u = grid.sample(|x| q[0] + q[1] * x[0] + q[2] * x[1] + q[3] * x[0] * x[0] + q[4] * x[1] * x[1] + q[5] * x[0] * x[1]);
        let exact = 2.0 * a0 * q[3] + 2.0 * a1 * q[4];
        for pos in 0..d.interior().len() {
            let v = d.apply_at(pos, &u);
            prop_assert!((v - exact).abs() <= 1e-9, "{} vs {}", v, exact);
        }
    }
}

#[test]
fn reports_are_deterministic() {
    let p = preset("linear_mixed", &PresetParams::default()).unwrap();
    let opts = TheoremOptions {
        grid: Some(GridSpec { h: 0.25, r: 2.0 }),
        ..Default::default()
    };
    let a = run_theorem_on_preset(TheoremId::Abp, &p, &opts).unwrap();
    let b = run_theorem_on_preset(TheoremId::Abp, &p, &opts).unwrap();
    assert_eq!(a.text(), b.text());
    assert_eq!(a.fields, b.fields);
}
