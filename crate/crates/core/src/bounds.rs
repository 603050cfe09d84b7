//! One report per theorem: structure → barriers → certificates → discrete cross-check.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barriers::{
    abp_bound, abp_constant, abp_params, beta_for_width, narrow_threshold, pl_solve_with, width_for_beta, BarrierError,
    PLParams, PlOptions,
};
use crate::expr::Expr;
use crate::geometry::CylinderSpec;
use crate::operators::{OperatorSpec, Preset};
use crate::solver::{
    empirical_mp_check, field_csv, growth_violation_study, narrow_eigen_test, solve_dirichlet, DiscretizeOptions, EigenTest, Grid,
    GridSpec, MpCheck, MpScenario, SolveOptions, SolveReport, SolverError, ViolationStudy,
};
use crate::structure::{check_narrow_mode, check_structure, PlanOptions, SamplePlan, StructureError, StructureReport};
use crate::verify::{counterexample_report, pl_barrier_certificate, Certificate, CounterexampleBundle, VerifyError};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),
    #[error("bad options: {0}")]
    BadOptions(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "MP")]
    Mp,
    #[serde(rename = "ABP")]
    Abp,
    #[serde(rename = "NARROW")]
    Narrow,
    #[serde(rename = "PL")]
    Pl,
}

impl TheoremId {
    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Mp => "MP",
            TheoremId::Abp => "ABP",
            TheoremId::Narrow => "NARROW",
            TheoremId::Pl => "PL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremOptions {
    pub seed: u64,
    pub tolerance: f64,
    pub plan: PlanOptions,
    /// Defaults to `h = max d_h / 8`, `R = 2 max d_h`.
    pub grid: Option<GridSpec>,
    pub solve: SolveOptions,
    /// Registered counterexample to reproduce alongside the MP report.
    pub counterexample: Option<String>,
    /// Truncation radii for the discrete violation study.
    pub violation_ladder: Vec<f64>,
    pub beta0: f64,
    /// Inverse PL direction: find `β` for this width.
    pub d0: Option<f64>,
    pub pl: PlOptions,
    pub barrier_samples: usize,
    pub barrier_radius: f64,
    pub eigen_cells: Vec<usize>,
}

impl Default for TheoremOptions {
    fn default() -> Self {
        TheoremOptions {
            seed: 0,
            tolerance: 1e-10,
            plan: PlanOptions::default(),
            grid: None,
            solve: SolveOptions::default(),
            counterexample: None,
            violation_ladder: vec![2.0, 4.0, 6.0],
            beta0: 1.0,
            d0: None,
            pl: PlOptions::default(),
            barrier_samples: 512,
            barrier_radius: 10.0,
            eigen_cells: vec![16, 32, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail { reason: String },
    HypothesisNotMet { hypotheses: Vec<String> },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail { .. } => "FAIL",
            Verdict::HypothesisNotMet { .. } => "HYPOTHESIS NOT MET",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlInverse {
    pub d0: f64,
    pub beta: f64,
    /// `|β(d₀(β)) − β|` for the forward parameters.
    pub round_trip_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlReport {
    pub forward: PLParams,
    pub inverse: PlInverse,
    /// Whether the domain's width along the chosen direction is within `d₀`.
    pub domain_within_width: bool,
    pub note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub theorem: TheoremId,
    pub operator: String,
    pub domain: String,
    pub seed: u64,
    pub tolerance: f64,
    pub inputs: BTreeMap<String, f64>,
    pub outputs: BTreeMap<String, f64>,
    pub structure: StructureReport,
    pub certificates: Vec<Certificate>,
    pub solver: Vec<(String, SolveReport)>,
    pub pl: Option<PlReport>,
    pub eigen_test: Option<EigenTest>,
    pub counterexample: Option<CounterexampleBundle>,
    pub violation_study: Option<ViolationStudy>,
    pub notes: Vec<String>,
    pub verdict: Verdict,
    /// `(label, csv)` for every discrete solution; kept out of the structured report.
    #[serde(skip)]
    pub fields: Vec<(String, String)>,
}

impl TheoremReport {
    /// `Err(HypothesisNotMet)` when the verdict says so, the report otherwise.
    pub fn into_result(self) -> Result<TheoremReport, BoundsError> {
        match &self.verdict {
            Verdict::HypothesisNotMet { hypotheses } => Err(BoundsError::HypothesisNotMet(hypotheses.join(", "))),
            _ => Ok(self),
        }
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "== {} on {} | {}", self.theorem.name(), self.operator, self.domain);
        let _ = writeln!(s, "verdict: {}", self.verdict.label());
        match &self.verdict {
            Verdict::Fail { reason } => {
                let _ = writeln!(s, "  reason: {reason}");
            }
            Verdict::HypothesisNotMet { hypotheses } => {
                for h in hypotheses {
                    let _ = writeln!(s, "  failed hypothesis: {h}");
                }
            }
            Verdict::Pass => {}
        }
        let _ = writeln!(s, "seed: {}  tolerance: {:e}", self.seed, self.tolerance);
        let _ = writeln!(s, "inputs:");
        for (k, v) in &self.inputs {
            let _ = writeln!(s, "  {k} = {v:.15e}");
        }
        let _ = writeln!(s, "outputs:");
        for (k, v) in &self.outputs {
            let _ = writeln!(s, "  {k} = {v:.15e}");
        }
        s.push_str(&self.structure.summary());
        for c in &self.certificates {
            let _ = writeln!(s, "{}", c.line());
        }
        if let Some(cx) = &self.counterexample {
            let _ = writeln!(s, "counterexample {} (u = {}):", cx.name, cx.function);
            for c in [&cx.residual, &cx.boundary, &cx.positivity] {
                let _ = writeln!(s, "  {}", c.line());
            }
            let _ = writeln!(s, "  violated hypothesis: {}", cx.violated_hypothesis);
            let _ = writeln!(s, "  conclusion: {}", cx.conclusion);
        }
        if let Some(v) = &self.violation_study {
            let _ = writeln!(s, "discrete violation study (boundary data {}, h = {}):", v.boundary, v.h);
            for r in &v.rows {
                let _ = writeln!(s, "  R = {:>5}: interior max u = {:.6e} at {:?}", r.r, r.interior_max, r.argmax_x);
            }
            let _ = writeln!(s, "  positive and growing with R: {}", v.positive_and_growing);
        }
        if let Some(e) = &self.eigen_test {
            let _ = writeln!(s, "eigen test on strip width {}:", e.d);
            for r in &e.resolutions {
                let _ = writeln!(s, "  h = {:.6e}: mode residual {:.6e} (residual / h^2 = {:.6e})", r.h, r.residual, r.scaled);
            }
            let _ = writeln!(s, "  observed order {:.4}", e.observed_order);
            let _ = writeln!(
                s,
                "  c = {:.6e} (below threshold): max u = {:.6e} -> {}",
                e.c_below,
                e.max_u_below,
                if e.below_verdict { "no positive solution" } else { "POSITIVE SOLUTION" }
            );
        }
        if let Some(pl) = &self.pl {
            let f = &pl.forward;
            let _ = writeln!(
                s,
                "PL forward: beta0 = {}, beta = {}, alpha = {:.15e}, d0 = {:.15e}, margin = {:.6e}",
                f.beta0, f.beta, f.alpha, f.width.d0, f.margin
            );
            let _ = writeln!(
                s,
                "PL width sweep: {} x {} points up to r = {:e}, worst margin {:.6e} at (y, r) = {:?}",
                f.width.x_points, f.width.r_points, f.width.r_max, f.width.worst_margin, f.width.witness
            );
            let _ = writeln!(
                s,
                "PL inverse: d0 = {:.15e} -> beta = {:.15e} (round trip error {:.3e})",
                pl.inverse.d0, pl.inverse.beta, pl.inverse.round_trip_error
            );
            let _ = writeln!(s, "PL: domain width within d0: {}  ({})", pl.domain_within_width, pl.note);
        }
        for (name, r) in &self.solver {
            let _ = writeln!(s, "solver [{name}]:");
            for line in r.text().lines() {
                let _ = writeln!(s, "  {line}");
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

fn describe_domain(dom: &CylinderSpec) -> String {
    let parts: Vec<String> = (0..dom.bounded_count())
        .map(|h| {
            let v: Vec<String> = dom.dirs()[h].iter().map(|c| format!("{c}")).collect();
            format!("{} <= x.({}) <= {}", dom.offsets()[h], v.join(","), dom.offsets()[h] + dom.widths()[h])
        })
        .collect();
    format!("cylinder in R^{}: {}", dom.dim(), parts.join(", "))
}

fn default_grid(dom: &CylinderSpec) -> GridSpec {
    let d = dom.max_width();
    GridSpec { h: d / 8.0, r: 2.0 * d }
}

/// `νᵀ A(x) ν`, the ellipticity along `ν` (smallest over sup-inf members).
fn lambda_along(op: &OperatorSpec, nu: &[f64], x: &[f64]) -> Result<f64, BoundsError> {
    let quad = |a: &nalgebra::DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..nu.len() {
            for j in 0..nu.len() {
                s += nu[i] * a[(i, j)] * nu[j];
            }
        }
        s
    };
    match op {
        OperatorSpec::Linear(l) => Ok(quad(&l.coefficients(x).map_err(SolverError::from)?.a)),
        OperatorSpec::SupInf(s) => Ok(s.families().iter().flatten().map(|m| quad(&m.a)).fold(f64::INFINITY, f64::min)),
        OperatorSpec::Callable(c) => {
            Err(BoundsError::BadOptions(format!("callable operator '{}' cannot be solved on a grid", c.name)))
        }
    }
}

fn structure_hypotheses(rep: &StructureReport) -> Vec<String> {
    rep.failed()
        .into_iter()
        .map(|c| {
            let w = rep.flag(c).and_then(|f| f.witness.as_ref());
            match w {
                Some(w) => format!("{} (witness x = {:?}, value {:.6e})", c.name(), w.x, w.value),
                None => c.name().to_string(),
            }
        })
        .collect()
}

struct Base {
    theorem: TheoremId,
    operator: String,
    domain: String,
    seed: u64,
    tolerance: f64,
    structure: StructureReport,
}

impl Base {
    fn report(self) -> TheoremReport {
        TheoremReport {
            theorem: self.theorem,
            operator: self.operator,
            domain: self.domain,
            seed: self.seed,
            tolerance: self.tolerance,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            structure: self.structure,
            certificates: Vec::new(),
            solver: Vec::new(),
            pl: None,
            eigen_test: None,
            counterexample: None,
            violation_study: None,
            notes: Vec::new(),
            verdict: Verdict::Pass,
            fields: Vec::new(),
        }
    }
}

fn add_structure_inputs(r: &mut TheoremReport) {
    let s = &r.structure;
    let vals = [
        ("Lambda_1", s.lambda_growth.value()),
        ("sup_gamma", s.gamma_bound.value()),
        ("Gamma", s.gamma.value()),
        ("rho", s.rho.value()),
        ("K", s.k.value()),
    ];
    for (k, v) in vals {
        r.inputs.insert(k.to_string(), v);
    }
    if let Some(h) = s.ellipticity_dir {
        r.inputs.insert("ellipticity_direction".into(), (h + 1) as f64);
    }
}

/// Runs the report for one theorem. Failed structure flags produce a
/// `HypothesisNotMet` verdict rather than an error so counterexample material
/// still lands in the report; use [`TheoremReport::into_result`] to turn it into one.
pub fn run_theorem(
    id: TheoremId,
    op: &OperatorSpec,
    dom: &CylinderSpec,
    options: &TheoremOptions,
) -> Result<TheoremReport, BoundsError> {
    let mut plan_opts = options.plan.clone();
    plan_opts.seed = options.seed;
    plan_opts.tolerance = options.tolerance;
    let plan = SamplePlan::standard(dom, &plan_opts);
    let structure = match id {
        TheoremId::Narrow => check_narrow_mode(op, dom, &plan)?,
        _ => check_structure(op, dom, &plan)?,
    };
    let base = Base {
        theorem: id,
        operator: op.kind().to_string(),
        domain: describe_domain(dom),
        seed: options.seed,
        tolerance: options.tolerance,
        structure,
    };
    let mut r = base.report();
    add_structure_inputs(&mut r);
    match id {
        TheoremId::Mp => run_mp(&mut r, op, dom, options)?,
        TheoremId::Abp => run_abp(&mut r, op, dom, options)?,
        TheoremId::Narrow => run_narrow(&mut r, op, dom, options)?,
        TheoremId::Pl => run_pl(&mut r, op, dom, options)?,
    }
    Ok(r)
}

/// Convenience wrapper taking a preset and naming the operator after it.
pub fn run_theorem_on_preset(id: TheoremId, p: &Preset, options: &TheoremOptions) -> Result<TheoremReport, BoundsError> {
    let mut r = run_theorem(id, &p.operator, &p.domain, options)?;
    r.operator = format!("{} ({})", p.name, r.operator);
    Ok(r)
}

fn counterexample_boundary(name: &str) -> Option<Expr> {
    match name {
        "c1_degenerate" => Expr::parse("exp(x1)*sin(x2)*sin(x3)").ok(),
        "quadratic_growth" => Expr::parse("x2^2*sin(x1)").ok(),
        _ => None,
    }
}

fn run_mp(r: &mut TheoremReport, op: &OperatorSpec, dom: &CylinderSpec, o: &TheoremOptions) -> Result<(), BoundsError> {
    let mut hypotheses = structure_hypotheses(&r.structure);
    if let Some(name) = &o.counterexample {
        let bundle = counterexample_report(name, o.seed)?;
        if bundle.all_certified() {
            if hypotheses.is_empty() {
                hypotheses.push(bundle.violated_hypothesis.clone());
            }
        } else {
            r.notes.push("counterexample certificates did not all pass".into());
        }
        if let Some(bd) = counterexample_boundary(name) {
            let h = o.grid.map_or(dom.max_width() / 12.0, |g| g.h);
            let study = growth_violation_study(op, dom, &bd, h, &o.violation_ladder, &o.solve)?;
            r.outputs.insert("violation_max_u_at_largest_R".into(), study.rows.last().map_or(f64::NAN, |x| x.interior_max));
            r.violation_study = Some(study);
        }
        r.outputs.insert("u_at_witness".into(), bundle.growth.first().map_or(f64::NAN, |g| g.1));
        r.counterexample = Some(bundle);
        r.notes.push("violation study: boundary data on the truncation faces follows the counterexample".into());
        r.verdict = if hypotheses.is_empty() {
            Verdict::Fail { reason: "counterexample certified but no hypothesis is reported as violated".into() }
        } else {
            Verdict::HypothesisNotMet { hypotheses }
        };
        return Ok(());
    }

    let grid = o.grid.unwrap_or_else(|| default_grid(dom));
    let variants = [("f = 0, g = 0", "0", "0"), ("f = 1, g = -1", "1", "-1")];
    let mut all = true;
    for (label, f, g) in variants {
        let sc = MpScenario {
            grid,
            forcing: Expr::parse(f).expect("literal"),
            boundary: Expr::parse(g).expect("literal"),
            tolerance: o.tolerance,
        };
        let (chk, field): (MpCheck, _) = empirical_mp_check(op, dom, &sc, &o.solve)?;
        all &= chk.verdict;
        r.fields.push((label.to_string(), field_csv(&Grid::truncated(dom, &grid)?, &field)));
        r.outputs.insert(format!("max_u[{label}]"), chk.report.max_value);
        r.solver.push((label.to_string(), chk.report));
    }
    r.verdict = if !hypotheses.is_empty() {
        Verdict::HypothesisNotMet { hypotheses }
    } else if all {
        Verdict::Pass
    } else {
        Verdict::Fail { reason: "a discrete solution with f >= 0, g <= 0 has max u above tolerance".into() }
    };
    Ok(())
}

fn run_abp(r: &mut TheoremReport, op: &OperatorSpec, dom: &CylinderSpec, o: &TheoremOptions) -> Result<(), BoundsError> {
    let hypotheses = structure_hypotheses(&r.structure);
    let (Some(h), true) = (r.structure.ellipticity_dir, r.structure.gamma.is_bounded()) else {
        r.verdict = Verdict::HypothesisNotMet {
            hypotheses: if hypotheses.is_empty() { vec!["bounded Gamma with an elliptic direction".into()] } else { hypotheses },
        };
        return Ok(());
    };
    let gamma = r.structure.gamma.value();
    let d = dom.widths()[h];
    let nu: Vec<f64> = dom.dirs()[h].iter().copied().collect();
    let sup_f_over_lambda = 1.0;
    let constant = abp_constant(d, gamma);
    let bound = abp_bound(d, gamma, sup_f_over_lambda, 0.0)?;
    let (alpha, c1) = abp_params(gamma, sup_f_over_lambda)?;
    r.inputs.insert("d".into(), d);
    r.inputs.insert("sup_f_minus_over_lambda".into(), sup_f_over_lambda);
    r.inputs.insert("sup_boundary_u_plus".into(), 0.0);
    r.outputs.insert("abp_constant".into(), constant);
    r.outputs.insert("bound".into(), bound);
    r.outputs.insert("alpha".into(), alpha);
    r.outputs.insert("C1".into(), c1);

    let spec = o.grid.unwrap_or_else(|| default_grid(dom));
    let grid = Grid::truncated(dom, &spec)?;
    let mut f = Vec::with_capacity(grid.node_count());
    for i in 0..grid.node_count() {
        f.push(-lambda_along(op, &nu, &grid.coords(i))?);
    }
    let g = vec![0.0; grid.node_count()];
    let (field, rep) = solve_dirichlet(op, &grid, &f, &g, &o.solve)?;
    r.fields.push(("f = -lambda, g = 0".into(), field_csv(&grid, &field)));
    let max_u = rep.max_value;
    r.outputs.insert("solver_max_u".into(), max_u);
    r.solver.push(("f = -lambda, g = 0".into(), rep));
    r.notes.push(format!("truncated grid: {}", grid.description()));
    r.verdict = if !hypotheses.is_empty() {
        Verdict::HypothesisNotMet { hypotheses }
    } else if max_u <= bound {
        Verdict::Pass
    } else {
        Verdict::Fail { reason: format!("discrete max u = {max_u} exceeds the bound {bound}") }
    };
    Ok(())
}

fn run_narrow(r: &mut TheoremReport, op: &OperatorSpec, dom: &CylinderSpec, o: &TheoremOptions) -> Result<(), BoundsError> {
    let hypotheses = structure_hypotheses(&r.structure);
    let (Some(h), true, true) = (r.structure.ellipticity_dir, r.structure.gamma.is_bounded(), r.structure.k.is_bounded())
    else {
        r.verdict = Verdict::HypothesisNotMet {
            hypotheses: if hypotheses.is_empty() { vec!["bounded Gamma and K with an elliptic direction".into()] } else { hypotheses },
        };
        return Ok(());
    };
    let gamma = r.structure.gamma.value();
    let k = r.structure.k.value();
    let d = dom.widths()[h];
    r.inputs.insert("d".into(), d);
    let threshold = if k > 0.0 { narrow_threshold(gamma, k)? } else { f64::INFINITY };
    r.outputs.insert("threshold".into(), threshold);
    r.outputs.insert("d2K".into(), d * d * k);
    if k <= 0.0 {
        r.notes.push("K = 0: the zeroth-order term never opposes the maximum principle".into());
    }

    let eig = narrow_eigen_test(d, &o.eigen_cells, 2.0 * d, o.seed)?;
    r.outputs.insert("eigen_residual_constant".into(), eig.constant);
    r.outputs.insert("eigen_observed_order".into(), eig.observed_order);
    r.outputs.insert("eigen_max_u_below".into(), eig.max_u_below);
    let eig_ok = eig.below_verdict && eig.threshold_inside;
    r.eigen_test = Some(eig);

    let within = d <= threshold;
    let mut solve_ok = true;
    if within {
        let mut solve = o.solve;
        solve.discretize = DiscretizeOptions { c_limit: f64::INFINITY };
        let sc = MpScenario {
            grid: o.grid.unwrap_or_else(|| default_grid(dom)),
            forcing: Expr::constant(0.0),
            boundary: Expr::constant(-1.0),
            tolerance: o.tolerance,
        };
        let (chk, field) = empirical_mp_check(op, dom, &sc, &solve)?;
        solve_ok = chk.verdict;
        r.fields.push(("f = 0, g = -1".into(), field_csv(&Grid::truncated(dom, &sc.grid)?, &field)));
        r.outputs.insert("max_u[f = 0, g = -1]".into(), chk.report.max_value);
        r.solver.push(("f = 0, g = -1".into(), chk.report));
    } else {
        r.notes.push(format!("width {d} exceeds the threshold {threshold}; no maximum principle is claimed"));
    }
    r.verdict = if !hypotheses.is_empty() {
        Verdict::HypothesisNotMet { hypotheses }
    } else if !within {
        Verdict::HypothesisNotMet { hypotheses: vec![format!("narrowness: d = {d} > threshold {threshold}")] }
    } else if solve_ok && eig_ok {
        Verdict::Pass
    } else {
        Verdict::Fail { reason: "discrete check or eigen test failed".into() }
    };
    Ok(())
}

fn run_pl(r: &mut TheoremReport, op: &OperatorSpec, dom: &CylinderSpec, o: &TheoremOptions) -> Result<(), BoundsError> {
    let hypotheses = structure_hypotheses(&r.structure);
    let s = &r.structure;
    let (Some(h), true, true) = (s.ellipticity_dir, s.rho.is_bounded(), s.gamma.is_bounded()) else {
        let mut hs = hypotheses;
        if !s.rho.is_bounded() {
            hs.push("bounded rho = sup Lambda/lambda".into());
        }
        if hs.is_empty() {
            hs.push("bounded Gamma with an elliptic direction".into());
        }
        r.verdict = Verdict::HypothesisNotMet { hypotheses: hs };
        return Ok(());
    };
    let (rho, gamma) = (s.rho.value(), s.gamma.value());
    r.inputs.insert("beta0".into(), o.beta0);
    let fwd = pl_solve_with(o.beta0, rho, gamma, &o.pl)?;
    r.outputs.insert("alpha_root".into(), fwd.alpha_root);
    r.outputs.insert("alpha".into(), fwd.alpha);
    r.outputs.insert("beta".into(), fwd.beta);
    r.outputs.insert("d0".into(), fwd.width.d0);
    r.outputs.insert("margin".into(), fwd.margin);
    r.outputs.insert("width_sweep_worst_margin".into(), fwd.width.worst_margin);

    let rt_beta = beta_for_width(width_for_beta(fwd.beta, rho, gamma), rho, gamma)?;
    let d0_inv = o.d0.unwrap_or(fwd.width.d0);
    let inv_beta = beta_for_width(d0_inv, rho, gamma)?;
    let inverse = PlInverse { d0: d0_inv, beta: inv_beta, round_trip_error: (rt_beta - fwd.beta).abs() };
    r.outputs.insert("inverse_beta".into(), inverse.beta);
    r.outputs.insert("round_trip_error".into(), inverse.round_trip_error);

    let cert = pl_barrier_certificate(
        op,
        dom,
        h,
        fwd.alpha,
        fwd.beta,
        fwd.width.d0,
        o.barrier_radius,
        o.barrier_samples,
        o.seed,
        o.tolerance,
    )?;
    let cert_ok = cert.verdict;
    r.certificates.push(cert);
    let d0 = fwd.width.d0;
    let within = dom.widths()[h] <= d0;
    let ok = fwd.margin <= 0.0 && fwd.width.worst_margin >= 0.0 && cert_ok && inverse.round_trip_error <= 1e-6;
    r.pl = Some(PlReport {
        forward: fwd,
        inverse,
        domain_within_width: within,
        note: "d0 is certified by sampling; it is a lower bound for the existential width",
    });
    r.verdict = if !hypotheses.is_empty() {
        Verdict::HypothesisNotMet { hypotheses }
    } else if !within {
        Verdict::HypothesisNotMet {
            hypotheses: vec![format!("width: d = {} exceeds the certified d0 = {}", dom.widths()[h], d0)],
        }
    } else if ok {
        Verdict::Pass
    } else {
        Verdict::Fail { reason: "a PL margin or certificate failed".into() }
    };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{preset, PresetParams};

    fn quick() -> TheoremOptions {
        TheoremOptions {
            plan: PlanOptions { interior: 64, far: 16, ..Default::default() },
            barrier_samples: 64,
            ..Default::default()
        }
    }

    #[test]
    fn abp_linear_mixed_bound_is_e() {
        let p = preset("linear_mixed", &PresetParams::default()).unwrap();
        let r = run_theorem_on_preset(TheoremId::Abp, &p, &quick()).unwrap();
        assert!((r.outputs["bound"] - std::f64::consts::E).abs() < 1e-12);
        assert!(r.outputs["solver_max_u"] <= r.outputs["bound"]);
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.text());
    }

    #[test]
    fn mp_counterexample_reports_growth() {
        let p = preset("c1_degenerate", &PresetParams::default()).unwrap();
        let o = TheoremOptions { counterexample: Some("c1_degenerate".into()), violation_ladder: vec![1.0, 2.0], ..quick() };
        let r = run_theorem_on_preset(TheoremId::Mp, &p, &o).unwrap();
        assert!(matches!(r.verdict, Verdict::HypothesisNotMet { .. }));
        assert!(r.violation_study.as_ref().unwrap().positive_and_growing);
        assert!(r.clone().into_result().is_err());
    }

    #[test]
    fn report_is_deterministic() {
        let p = preset("bellman_isaacs_demo", &PresetParams::default()).unwrap();
        let a = run_theorem_on_preset(TheoremId::Mp, &p, &quick()).unwrap();
        let b = run_theorem_on_preset(TheoremId::Mp, &p, &quick()).unwrap();
        assert_eq!(a.text(), b.text());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
