//! Sampled verification of the structure conditions and extraction of the
//! scalar constants `Γ`, `ρ`, `K`, `Λ₁`.
//!
//! Everything here is evidence over a finite sample set, never a proof. For the
//! linear and sup-inf variants the per-point quantities `λ`, `Λ`, `γ`, `c` come
//! from the coefficients in closed form; callable operators are probed through
//! difference quotients only.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{projections, CylinderSpec, GeometryError};
use crate::linalg::{norm, outer};
use crate::operators::{analytic_bounds, difference_quotient_dir, evaluate, EvalPoint, OperatorError, OperatorSpec};
use crate::sampling::{rng, shifted_halton};

pub const EVIDENCE_LABEL: &str = "sampled evidence, not proof";

/// Factor by which a bounded quantity may grow when the unbounded part of a far
/// sample is doubled before the sample counts as a growth violation.
pub const GROWTH_SLACK: f64 = 1.25;

/// Minimum number of interior points a plan must carry.
pub const MIN_INTERIOR_POINTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error("sample plan has {got} interior points, need at least {MIN_INTERIOR_POINTS}")]
    InsufficientSamples { got: usize },
    #[error("invalid sample plan: {0}")]
    BadPlan(String),
    #[error("dimension mismatch: operator in R^{op}, domain in R^{dom}")]
    DimensionMismatch { op: usize, dom: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// The individual hypotheses checked by the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Finite values, stable under tiny perturbations of every argument.
    Continuity,
    /// Nondecreasing in the matrix argument.
    DegenerateEllipticity,
    /// Nonincreasing in `s`.
    MonotoneInS,
    /// `F(x,0,0,O) = 0`.
    Normalization,
    /// Strict ellipticity along one bounded direction with `liminf λ > 0`.
    DirectionalEllipticity,
    /// `Λ(x) ≤ Λ₁|x|` far out.
    OrthogonalGrowth,
    /// `γ` bounded and `Γ = sup γ/λ` finite.
    GradientBound,
    /// One-sided bound `F(s) − F(r) ≤ c(x)(s − r)` with `sup c/λ` finite.
    NarrowZeroOrder,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Continuity => "continuity",
            Condition::DegenerateEllipticity => "degenerate_ellipticity",
            Condition::MonotoneInS => "monotone_in_s",
            Condition::Normalization => "normalization",
            Condition::DirectionalEllipticity => "directional_ellipticity",
            Condition::OrthogonalGrowth => "orthogonal_growth",
            Condition::GradientBound => "gradient_bound",
            Condition::NarrowZeroOrder => "narrow_zero_order",
        }
    }
}

/// Full argument set of a failed probe, enough to recompute the offending value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probe {
    /// `[F(x,s,p,X+tD) − F(x,s,p,X)]/t`.
    Quotient { s: f64, p: Vec<f64>, hess: Vec<Vec<f64>>, dir: Vec<Vec<f64>>, t: f64 },
    /// `F(x,s,p,X)`.
    Value { s: f64, p: Vec<f64>, hess: Vec<Vec<f64>> },
    /// `F(x,s_hi,p,X) − F(x,s_lo,p,X)`.
    SPair { s_hi: f64, s_lo: f64, p: Vec<f64>, hess: Vec<Vec<f64>> },
    /// `F` at a perturbed argument minus `F` at the base argument.
    Perturbation { base: Vec<f64>, s: f64, p: Vec<f64>, hess: Vec<Vec<f64>>, delta: f64 },
    /// A closed-form or quotient quantity at `x`, compared against the same
    /// quantity at the radial partner `base`.
    Growth { quantity: String, base: Vec<f64>, base_value: f64 },
    /// Closed-form per-point quantity.
    Pointwise { quantity: String },
}

fn mat_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn rows_mat(r: &[Vec<f64>]) -> DMatrix<f64> {
    let n = r.len();
    let flat: Vec<f64> = r.iter().flatten().copied().collect();
    DMatrix::from_row_slice(n, n, &flat)
}

impl Probe {
    /// Recomputes the raw probe value at `x`. `Growth` and `Pointwise` probes
    /// are recomputed through [`point_quantities`] instead.
    pub fn reevaluate(&self, op: &OperatorSpec, x: &[f64]) -> Result<Option<f64>, OperatorError> {
        Ok(match self {
            Probe::Quotient { s, p, hess, dir, t } => {
                let pt = EvalPoint::new(x, *s, p, rows_mat(hess));
                Some(difference_quotient_dir(op, &pt, &rows_mat(dir), *t)?)
            }
            Probe::Value { s, p, hess } => Some(evaluate(op, &EvalPoint::new(x, *s, p, rows_mat(hess)))?),
            Probe::SPair { s_hi, s_lo, p, hess } => {
                let h = rows_mat(hess);
                Some(
                    evaluate(op, &EvalPoint::new(x, *s_hi, p, h.clone()))?
                        - evaluate(op, &EvalPoint::new(x, *s_lo, p, h))?,
                )
            }
            Probe::Perturbation { base, s, p, hess, delta } => {
                let h = rows_mat(hess);
                let f0 = evaluate(op, &EvalPoint::new(base, *s, p, h.clone()))?;
                let p1: Vec<f64> = p.iter().map(|v| v + delta).collect();
                let h1 = h.map(|v| v + delta);
                let f1 = evaluate(op, &EvalPoint::new(x, s + delta, &p1, h1))?;
                Some(f1 - f0)
            }
            Probe::Growth { .. } | Probe::Pointwise { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    /// The offending value (a quotient, a residual or a growth ratio).
    pub value: f64,
    pub probe: Probe,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flag {
    pub condition: Condition,
    pub passed: bool,
    /// Smallest margin over the samples; negative means violated.
    pub worst_margin: f64,
    pub witness: Option<Witness>,
}

/// A supremum that is either finite on the samples or shows unbounded growth.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    Bounded { value: f64 },
    Unbounded { witness: Witness },
}

impl Bound {
    pub fn value(&self) -> f64 {
        match self {
            Bound::Bounded { value } => *value,
            Bound::Unbounded { .. } => f64::INFINITY,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Bound::Bounded { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionReport {
    /// Zero-based index into the cylinder's bounded directions.
    pub index: usize,
    pub inf_lambda: f64,
    pub far_inf_lambda: f64,
    pub passed: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Standard,
    Narrow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub label: &'static str,
    pub mode: Mode,
    pub seed: u64,
    pub tolerance: f64,
    pub r_far: f64,
    pub interior_count: usize,
    pub far_count: usize,
    /// Whether `λ, Λ, γ, c` were read off the coefficients in closed form.
    pub analytic: bool,
    pub directions: Vec<DirectionReport>,
    /// Zero-based index of the chosen ellipticity direction, if any qualifies.
    pub ellipticity_dir: Option<usize>,
    /// `(x, λ̂(x))` along the chosen (or best available) direction.
    pub lambda_samples: Vec<(Vec<f64>, f64)>,
    /// `(x, Λ̂(x))`.
    pub big_lambda_samples: Vec<(Vec<f64>, f64)>,
    pub lambda_growth: Bound,
    /// `sup Λ̂/|x|` over the far samples, reported even when growth is superlinear.
    pub lambda_growth_estimate: f64,
    pub gamma_bound: Bound,
    pub gamma: Bound,
    pub rho: Bound,
    pub k: Bound,
    pub liminf_lambda_positive: bool,
    pub flags: Vec<Flag>,
}

impl StructureReport {
    pub fn flag(&self, c: Condition) -> Option<&Flag> {
        self.flags.iter().find(|f| f.condition == c)
    }

    pub fn passed(&self, c: Condition) -> bool {
        self.flag(c).is_some_and(|f| f.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }

    pub fn failed(&self) -> Vec<Condition> {
        self.flags.iter().filter(|f| !f.passed).map(|f| f.condition).collect()
    }

    /// The chosen ellipticity direction as a vector of the domain frame.
    pub fn nu<'a>(&self, dom: &'a CylinderSpec) -> Option<&'a DVector<f64>> {
        self.ellipticity_dir.map(|h| &dom.dirs()[h])
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "structure report ({}), mode {:?}, seed {}, tolerance {:e}, R_far {}, {} interior + {} far samples\n",
            self.label, self.mode, self.seed, self.tolerance, self.r_far, self.interior_count, self.far_count
        );
        for f in &self.flags {
            s.push_str(&format!(
                "  {:<24} {}  worst margin {:.6e}\n",
                f.condition.name(),
                if f.passed { "PASS" } else { "FAIL" },
                f.worst_margin
            ));
            if let Some(w) = &f.witness {
                s.push_str(&format!("      witness x = {:?}, value = {:.6e}\n", w.x, w.value));
            }
        }
        for d in &self.directions {
            s.push_str(&format!(
                "  direction {}: inf lambda {:.6e}, far inf {:.6e}, {}\n",
                d.index + 1,
                d.inf_lambda,
                d.far_inf_lambda,
                if d.passed { "strictly elliptic" } else { "degenerate" }
            ));
        }
        let show = |b: &Bound| match b {
            Bound::Bounded { value } => format!("{value:.12e}"),
            Bound::Unbounded { witness } => format!("unbounded (witness x = {:?})", witness.x),
        };
        s.push_str(&format!("  Lambda_1 = {}\n", show(&self.lambda_growth)));
        s.push_str(&format!("  sup gamma = {}\n", show(&self.gamma_bound)));
        s.push_str(&format!("  Gamma = {}\n", show(&self.gamma)));
        s.push_str(&format!("  rho = {}\n", show(&self.rho)));
        s.push_str(&format!("  K = {}\n", show(&self.k)));
        s
    }
}

/// Knobs for [`SamplePlan::standard`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOptions {
    pub interior: usize,
    pub far: usize,
    pub random_rank_one: usize,
    /// Defaults to `100 · max d_h` when `None`.
    pub r_far: Option<f64>,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions { interior: 256, far: 64, random_rank_one: 4, r_far: None, tolerance: 1e-10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub interior_points: Vec<Vec<f64>>,
    /// Far samples with `|x| ∈ [R_far, 2R_far]`, each paired with its radial partner
    /// whose unbounded part is doubled.
    pub far_pairs: Vec<(Vec<f64>, Vec<f64>)>,
    /// PSD directions `D` for the ellipticity probes.
    pub matrix_probes: Vec<DMatrix<f64>>,
    /// Symmetric base matrices `X` at which quotients are taken.
    pub base_matrices: Vec<DMatrix<f64>>,
    pub t_values: Vec<f64>,
    pub p_probes: Vec<DVector<f64>>,
    pub s_probes: Vec<f64>,
    pub r_far: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl SamplePlan {
    /// Low-discrepancy interior samples over the cylinder truncated at `R_far`
    /// along `U^⊥`, plus far samples in the annulus `[R_far, 2R_far]`.
    pub fn standard(dom: &CylinderSpec, opts: &PlanOptions) -> Self {
        let n = dom.dim();
        let k = dom.bounded_count();
        let m = n - k;
        let r_far = opts.r_far.unwrap_or(100.0 * dom.max_width());
        let widths = dom.widths();
        let offsets = dom.offsets();

        let interior_points = shifted_halton(n, opts.interior, opts.seed)
            .into_iter()
            .map(|u| {
                let t: Vec<f64> = (0..k).map(|h| offsets[h] + u[h] * widths[h]).collect();
                let z: Vec<f64> = (0..m).map(|j| r_far * (2.0 * u[k + j] - 1.0)).collect();
                dom.point_from_parts(&t, &z)
            })
            .collect();

        let mut g = rng(opts.seed ^ 0x5eed_fa12);
        let mut far_pairs = Vec::with_capacity(opts.far);
        let far_halton = shifted_halton(k + 1, opts.far, opts.seed.wrapping_add(1));
        for u in far_halton {
            let t: Vec<f64> = (0..k).map(|h| offsets[h] + u[h] * widths[h]).collect();
            let target = r_far * (1.0 + u[k]);
            let tn2: f64 = t.iter().map(|v| v * v).sum();
            let zlen = (target * target - tn2).max(r_far * r_far * 0.25).sqrt();
            let dir = loop {
                let v: Vec<f64> = (0..m).map(|_| 2.0 * g.random::<f64>() - 1.0).collect();
                let l = norm(&v);
                if l > 0.1 && l <= 1.0 {
                    break v.into_iter().map(|c| c / l).collect::<Vec<f64>>();
                }
            };
            let z: Vec<f64> = dir.iter().map(|c| c * zlen).collect();
            let z2: Vec<f64> = z.iter().map(|c| 2.0 * c).collect();
            far_pairs.push((dom.point_from_parts(&t, &z), dom.point_from_parts(&t, &z2)));
        }

        let pair = projections(dom);
        let mut matrix_probes: Vec<DMatrix<f64>> = dom.dirs().iter().map(|v| outer(v, v)).collect();
        matrix_probes.push(pair.q.clone());
        for _ in 0..opts.random_rank_one {
            let v = DVector::from_iterator(n, (0..n).map(|_| 2.0 * g.random::<f64>() - 1.0));
            matrix_probes.push(outer(&v, &v));
        }

        let mut sym = DMatrix::from_fn(n, n, |_, _| 2.0 * g.random::<f64>() - 1.0);
        sym = (&sym + sym.transpose()) * 0.5;
        let base_matrices = vec![DMatrix::zeros(n, n), sym];

        let mut p_probes = vec![DVector::zeros(n)];
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            p_probes.push(e);
        }
        p_probes.push(DVector::from_iterator(n, (0..n).map(|_| 4.0 * g.random::<f64>() - 2.0)));

        SamplePlan {
            interior_points,
            far_pairs,
            matrix_probes,
            base_matrices,
            t_values: vec![1.0, 1e-2, 1e-4],
            p_probes,
            s_probes: vec![-1.0, 0.0, 0.5, 2.0],
            r_far,
            tolerance: opts.tolerance,
            seed: opts.seed,
        }
    }

    fn validate(&self, n: usize) -> Result<(), StructureError> {
        if self.interior_points.len() < MIN_INTERIOR_POINTS {
            return Err(StructureError::InsufficientSamples { got: self.interior_points.len() });
        }
        if self.t_values.is_empty() || self.t_values.iter().any(|t| !(*t > 0.0)) {
            return Err(StructureError::BadPlan("t ladder must be non-empty and strictly positive".into()));
        }
        if self.p_probes.is_empty() || self.base_matrices.is_empty() {
            return Err(StructureError::BadPlan("p probes and base matrices must be non-empty".into()));
        }
        for d in &self.matrix_probes {
            if d.nrows() != n || crate::linalg::min_eigenvalue(d) < -1e-12 {
                return Err(StructureError::BadPlan("matrix probes must be PSD n x n matrices".into()));
            }
        }
        Ok(())
    }
}

/// Per-point quantities along a chosen set of directions.
#[derive(Debug, Clone, PartialEq)]
pub struct PointQuantities {
    /// `λ̂_h(x)` for every bounded direction.
    pub lambda: Vec<f64>,
    pub big_lambda: f64,
    pub gamma: f64,
    pub c_hat: f64,
}

fn sampled_quantities(op: &OperatorSpec, dom: &CylinderSpec, x: &[f64], plan: &SamplePlan) -> Result<PointQuantities, OperatorError> {
    let n = dom.dim();
    let q = projections(dom).q;
    let mut lambda = Vec::with_capacity(dom.bounded_count());
    for nu in dom.dirs() {
        let d = outer(nu, nu);
        let mut lo = f64::INFINITY;
        for p in &plan.p_probes {
            for xm in &plan.base_matrices {
                let pt = EvalPoint { x: DVector::from_column_slice(x), s: 0.0, p: p.clone(), hess: xm.clone() };
                for &t in &plan.t_values {
                    lo = lo.min(difference_quotient_dir(op, &pt, &d, t)?);
                }
            }
        }
        lambda.push(lo);
    }
    let mut big_lambda = f64::NEG_INFINITY;
    for xm in &plan.base_matrices {
        let pt = EvalPoint { x: DVector::from_column_slice(x), s: 0.0, p: DVector::zeros(n), hess: xm.clone() };
        for &t in &plan.t_values {
            big_lambda = big_lambda.max(difference_quotient_dir(op, &pt, &q, t)?);
        }
    }
    let mut gamma = 0.0_f64;
    for xm in &plan.base_matrices {
        let vals: Vec<f64> = plan
            .p_probes
            .iter()
            .map(|p| evaluate(op, &EvalPoint { x: DVector::from_column_slice(x), s: 0.0, p: p.clone(), hess: xm.clone() }))
            .collect::<Result<_, _>>()?;
        for i in 0..vals.len() {
            for j in 0..i {
                let dp = (&plan.p_probes[i] - &plan.p_probes[j]).norm();
                if dp > 0.0 {
                    gamma = gamma.max((vals[i] - vals[j]).abs() / dp);
                }
            }
        }
    }
    let mut c_hat = f64::NEG_INFINITY;
    let pt0 = EvalPoint::origin_at(x);
    for (i, &s) in plan.s_probes.iter().enumerate() {
        for &r in &plan.s_probes[..i] {
            if s == r {
                continue;
            }
            let (hi, lo) = if s > r { (s, r) } else { (r, s) };
            let fh = evaluate(op, &EvalPoint { s: hi, ..pt0.clone() })?;
            let fl = evaluate(op, &EvalPoint { s: lo, ..pt0.clone() })?;
            c_hat = c_hat.max((fh - fl) / (hi - lo));
        }
    }
    if !c_hat.is_finite() {
        c_hat = 0.0;
    }
    Ok(PointQuantities { lambda, big_lambda, gamma, c_hat })
}

/// `λ_h, Λ, γ, c` at `x`: closed form for linear and sup-inf operators, sampled
/// difference quotients otherwise.
pub fn point_quantities(
    op: &OperatorSpec,
    dom: &CylinderSpec,
    x: &[f64],
    plan: &SamplePlan,
) -> Result<PointQuantities, OperatorError> {
    let q = projections(dom).q;
    let mut lambda = Vec::with_capacity(dom.bounded_count());
    let mut rest = None;
    for nu in dom.dirs() {
        match analytic_bounds(op, x, nu, &q)? {
            Some(b) => {
                lambda.push(b.lambda);
                rest = Some(b);
            }
            None => return sampled_quantities(op, dom, x, plan),
        }
    }
    let b = rest.expect("cylinder has at least one bounded direction");
    Ok(PointQuantities { lambda, big_lambda: b.big_lambda, gamma: b.gamma, c_hat: b.c_upper })
}

#[derive(Clone)]
struct Tracker {
    worst: f64,
    witness: Option<Witness>,
}

impl Tracker {
    fn new() -> Self {
        Tracker { worst: f64::INFINITY, witness: None }
    }

    /// Keeps the first sample attaining the smallest margin.
    fn offer(&mut self, margin: f64, make: impl FnOnce() -> Witness) {
        if margin < self.worst || (margin.is_nan() && self.witness.is_none()) {
            self.worst = margin;
            self.witness = Some(make());
        }
    }

    fn merge(&mut self, other: Tracker) {
        if other.worst < self.worst {
            self.worst = other.worst;
            self.witness = other.witness;
        }
    }

    fn flag(self, condition: Condition, tol: f64) -> Flag {
        let passed = self.worst >= -tol;
        Flag { condition, passed, worst_margin: self.worst, witness: if passed { None } else { self.witness } }
    }
}

/// Sampled conditions evaluated through `F` itself.
#[derive(Clone)]
struct SampledChecks {
    ellipticity: Tracker,
    monotone_s: Tracker,
    normalization: Tracker,
    continuity: Tracker,
}

fn sampled_checks(op: &OperatorSpec, x: &[f64], plan: &SamplePlan) -> Result<SampledChecks, OperatorError> {
    let mut out = SampledChecks {
        ellipticity: Tracker::new(),
        monotone_s: Tracker::new(),
        normalization: Tracker::new(),
        continuity: Tracker::new(),
    };
    let xv = DVector::from_column_slice(x);
    let p_sub: Vec<&DVector<f64>> = [plan.p_probes.first(), plan.p_probes.last()].into_iter().flatten().collect();
    for p in &p_sub {
        for xm in &plan.base_matrices {
            let pt = EvalPoint { x: xv.clone(), s: 0.0, p: (*p).clone(), hess: xm.clone() };
            for d in &plan.matrix_probes {
                for &t in &plan.t_values {
                    let qv = difference_quotient_dir(op, &pt, d, t)?;
                    out.ellipticity.offer(qv, || Witness {
                        x: x.to_vec(),
                        value: qv,
                        probe: Probe::Quotient { s: 0.0, p: p.iter().copied().collect(), hess: mat_rows(xm), dir: mat_rows(d), t },
                    });
                }
            }
            for (i, &s) in plan.s_probes.iter().enumerate() {
                for &r in &plan.s_probes[..i] {
                    let (hi, lo) = if s > r { (s, r) } else { (r, s) };
                    if hi == lo {
                        continue;
                    }
                    let diff = evaluate(op, &EvalPoint { s: hi, ..pt.clone() })? - evaluate(op, &EvalPoint { s: lo, ..pt.clone() })?;
                    out.monotone_s.offer(-diff, || Witness {
                        x: x.to_vec(),
                        value: diff,
                        probe: Probe::SPair { s_hi: hi, s_lo: lo, p: p.iter().copied().collect(), hess: mat_rows(xm) },
                    });
                }
            }
            let f0 = evaluate(op, &pt)?;
            let delta = 1e-9;
            let mut xp = x.to_vec();
            for v in xp.iter_mut() {
                *v += delta;
            }
            let pert = EvalPoint {
                x: DVector::from_column_slice(&xp),
                s: delta,
                p: p.map(|v| v + delta),
                hess: xm.map(|v| v + delta),
            };
            let f1 = evaluate(op, &pert)?;
            let jump = f1 - f0;
            let allowed = 1e-4 * (1.0 + f0.abs() + norm(x));
            out.continuity.offer(allowed - jump.abs(), || Witness {
                x: xp.clone(),
                value: jump,
                probe: Probe::Perturbation { base: x.to_vec(), s: 0.0, p: p.iter().copied().collect(), hess: mat_rows(xm), delta },
            });
        }
    }
    let n = x.len();
    let f = evaluate(op, &EvalPoint::origin_at(x))?;
    out.normalization.offer(-f.abs(), || Witness {
        x: x.to_vec(),
        value: f,
        probe: Probe::Value { s: 0.0, p: vec![0.0; n], hess: vec![vec![0.0; n]; n] },
    });
    Ok(out)
}

struct PointRecord {
    x: Vec<f64>,
    q: PointQuantities,
    checks: SampledChecks,
}

fn evaluate_points(op: &OperatorSpec, dom: &CylinderSpec, pts: &[Vec<f64>], plan: &SamplePlan) -> Result<Vec<PointRecord>, OperatorError> {
    pts.par_iter()
        .map(|x| {
            Ok(PointRecord { x: x.clone(), q: point_quantities(op, dom, x, plan)?, checks: sampled_checks(op, x, plan)? })
        })
        .collect()
}

fn growth_witness(quantity: &str, x: &[f64], value: f64, base: &[f64], base_value: f64) -> Witness {
    Witness {
        x: x.to_vec(),
        value,
        probe: Probe::Growth { quantity: quantity.to_string(), base: base.to_vec(), base_value },
    }
}

/// Doubling test for a quantity that should stay bounded (or grow at most
/// linearly when `scale_by_norm`): over the radial pairs, flags the worst pair.
fn doubling_test(
    quantity: &str,
    pairs: &[(&PointRecord, &PointRecord)],
    value: impl Fn(&PointRecord) -> f64,
    scale_by_norm: bool,
    tol: f64,
) -> Tracker {
    let mut t = Tracker::new();
    for (a, b) in pairs {
        let (mut va, mut vb) = (value(a), value(b));
        if scale_by_norm {
            va /= norm(&a.x);
            vb /= norm(&b.x);
        }
        let margin = if va.is_finite() && vb.is_finite() {
            GROWTH_SLACK * va.max(0.0) + tol - vb
        } else {
            f64::NEG_INFINITY
        };
        t.offer(margin, || growth_witness(quantity, &b.x, vb, &a.x, va));
    }
    t
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num <= 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn sup_bound(
    quantity: &str,
    recs: &[&PointRecord],
    pairs: &[(&PointRecord, &PointRecord)],
    value: impl Fn(&PointRecord) -> f64 + Copy,
    tol: f64,
) -> (Bound, Tracker) {
    let growth = doubling_test(quantity, pairs, value, false, tol);
    let mut sup = 0.0_f64;
    let mut arg: Option<&PointRecord> = None;
    for r in recs {
        let v = value(r);
        if !(v <= sup) {
            sup = v;
            arg = Some(r);
        }
    }
    if growth.worst < -tol {
        let w = growth.witness.clone().expect("failed growth test has a witness");
        return (Bound::Unbounded { witness: w }, growth);
    }
    if !sup.is_finite() {
        let r = arg.expect("infinite supremum has an argument");
        let w = Witness { x: r.x.clone(), value: sup, probe: Probe::Pointwise { quantity: quantity.to_string() } };
        let mut t = Tracker::new();
        t.offer(f64::NEG_INFINITY, || w.clone());
        return (Bound::Unbounded { witness: w }, t);
    }
    (Bound::Bounded { value: sup }, growth)
}

fn run(op: &OperatorSpec, dom: &CylinderSpec, plan: &SamplePlan, mode: Mode) -> Result<StructureReport, StructureError> {
    let n = dom.dim();
    if op.dim() != n {
        return Err(StructureError::DimensionMismatch { op: op.dim(), dom: n });
    }
    plan.validate(n)?;
    let tol = plan.tolerance;
    let k = dom.bounded_count();

    let interior = evaluate_points(op, dom, &plan.interior_points, plan)?;
    let far_a: Vec<Vec<f64>> = plan.far_pairs.iter().map(|p| p.0.clone()).collect();
    let far_b: Vec<Vec<f64>> = plan.far_pairs.iter().map(|p| p.1.clone()).collect();
    let far_a = evaluate_points(op, dom, &far_a, plan)?;
    let far_b = evaluate_points(op, dom, &far_b, plan)?;
    let pairs: Vec<(&PointRecord, &PointRecord)> = far_a.iter().zip(&far_b).collect();
    let all: Vec<&PointRecord> = interior.iter().chain(&far_a).chain(&far_b).collect();

    // Sampled conditions.
    let mut ellipticity = Tracker::new();
    let mut monotone_s = Tracker::new();
    let mut normalization = Tracker::new();
    let mut continuity = Tracker::new();
    for r in &all {
        ellipticity.merge(r.checks.ellipticity.clone());
        monotone_s.merge(r.checks.monotone_s.clone());
        normalization.merge(r.checks.normalization.clone());
        continuity.merge(r.checks.continuity.clone());
    }

    // Per-direction ellipticity.
    let mut directions = Vec::with_capacity(k);
    for h in 0..k {
        let mut t = Tracker::new();
        for r in &all {
            let l = r.q.lambda[h];
            t.offer(l, || Witness { x: r.x.clone(), value: l, probe: Probe::Pointwise { quantity: format!("lambda_{}", h + 1) } });
        }
        let far_inf = far_a.iter().chain(&far_b).map(|r| r.q.lambda[h]).fold(f64::INFINITY, f64::min);
        let decay = doubling_test_lower(h, &pairs, tol);
        let positive = t.worst > 0.0;
        let passed = positive && far_inf > 0.0 && decay.worst >= -tol;
        let witness = if passed {
            None
        } else if !positive {
            t.witness.clone()
        } else {
            decay.witness.clone()
        };
        directions.push(DirectionReport { index: h, inf_lambda: t.worst, far_inf_lambda: far_inf, passed, witness });
    }
    let best = |only_passing: bool| {
        directions
            .iter()
            .filter(|d| !only_passing || d.passed)
            .fold(None::<&DirectionReport>, |acc, d| match acc {
                Some(a) if a.inf_lambda >= d.inf_lambda => Some(a),
                _ => Some(d),
            })
            .map(|d| d.index)
    };
    let ellipticity_dir = best(true);
    let h = ellipticity_dir.or_else(|| best(false)).unwrap_or(0);
    let liminf_lambda_positive = directions[h].far_inf_lambda > 0.0 && directions[h].passed;
    let dir_flag = match ellipticity_dir {
        Some(d) => Flag {
            condition: Condition::DirectionalEllipticity,
            passed: true,
            worst_margin: directions[d].inf_lambda,
            witness: None,
        },
        None => Flag {
            condition: Condition::DirectionalEllipticity,
            passed: false,
            worst_margin: directions[h].inf_lambda.min(0.0),
            witness: directions[h].witness.clone(),
        },
    };

    // Orthogonal growth.
    let growth = doubling_test("Lambda/|x|", &pairs, |r| r.q.big_lambda, true, tol);
    let growth_passed = growth.worst >= -tol;
    let lambda_growth_estimate = far_a.iter().chain(&far_b).map(|r| r.q.big_lambda / norm(&r.x)).fold(0.0_f64, f64::max);
    let lambda_growth = if growth_passed {
        Bound::Bounded { value: lambda_growth_estimate }
    } else {
        Bound::Unbounded { witness: growth.witness.clone().expect("witness") }
    };
    let growth_flag = growth.flag(Condition::OrthogonalGrowth, tol);

    // Gradient bound, rho and K along the chosen direction.
    let (gamma_bound, gamma_sup_test) = sup_bound("gamma", &all, &pairs, |r| r.q.gamma, tol);
    let (gamma, gamma_test) = sup_bound("gamma/lambda", &all, &pairs, |r| ratio(r.q.gamma, r.q.lambda[h]), tol);
    let (rho, _) = sup_bound("Lambda/lambda", &all, &pairs, |r| ratio(r.q.big_lambda, r.q.lambda[h]), tol);
    let (k_bound, k_test) = sup_bound("c/lambda", &all, &pairs, |r| ratio(r.q.c_hat.max(0.0), r.q.lambda[h]), tol);

    let mut gradient = gamma_sup_test;
    gradient.merge(gamma_test);
    let mut gradient_flag = gradient.flag(Condition::GradientBound, tol);
    if !gamma.is_bounded() || !gamma_bound.is_bounded() {
        gradient_flag.passed = false;
        if gradient_flag.witness.is_none() {
            gradient_flag.witness = match (&gamma_bound, &gamma) {
                (Bound::Unbounded { witness }, _) | (_, Bound::Unbounded { witness }) => Some(witness.clone()),
                _ => None,
            };
        }
    }

    let mut flags = vec![
        continuity.flag(Condition::Continuity, tol),
        ellipticity.flag(Condition::DegenerateEllipticity, tol),
    ];
    match mode {
        Mode::Standard => flags.push(monotone_s.flag(Condition::MonotoneInS, tol)),
        Mode::Narrow => {
            let mut f = k_test.flag(Condition::NarrowZeroOrder, tol);
            if let Bound::Unbounded { witness } = &k_bound {
                f.passed = false;
                f.witness.get_or_insert_with(|| witness.clone());
            }
            flags.push(f);
        }
    }
    flags.push(normalization.flag(Condition::Normalization, tol));
    flags.push(dir_flag);
    flags.push(growth_flag);
    flags.push(gradient_flag);

    let lambda_samples = all.iter().map(|r| (r.x.clone(), r.q.lambda[h])).collect();
    let big_lambda_samples = all.iter().map(|r| (r.x.clone(), r.q.big_lambda)).collect();
    let analytic = !matches!(op, OperatorSpec::Callable(_));

    Ok(StructureReport {
        label: EVIDENCE_LABEL,
        mode,
        seed: plan.seed,
        tolerance: tol,
        r_far: plan.r_far,
        interior_count: plan.interior_points.len(),
        far_count: plan.far_pairs.len(),
        analytic,
        directions,
        ellipticity_dir,
        lambda_samples,
        big_lambda_samples,
        lambda_growth,
        lambda_growth_estimate,
        gamma_bound,
        gamma,
        rho,
        k: k_bound,
        liminf_lambda_positive,
        flags,
    })
}

/// `λ` must not decay when the unbounded part is doubled (liminf check).
fn doubling_test_lower(h: usize, pairs: &[(&PointRecord, &PointRecord)], tol: f64) -> Tracker {
    let mut t = Tracker::new();
    for (a, b) in pairs {
        let (va, vb) = (a.q.lambda[h], b.q.lambda[h]);
        let margin = vb - va / GROWTH_SLACK + tol;
        t.offer(margin, || growth_witness(&format!("lambda_{}", h + 1), &b.x, vb, &a.x, va));
    }
    t
}

/// Checks continuity, degenerate ellipticity, monotonicity in `s`, the
/// normalization, one-directional ellipticity, orthogonal growth and the gradient bound.
pub fn check_structure(op: &OperatorSpec, dom: &CylinderSpec, plan: &SamplePlan) -> Result<StructureReport, StructureError> {
    run(op, dom, plan, Mode::Standard)
}

/// As [`check_structure`] but with monotonicity in `s` replaced by the one-sided
/// bound `c(x)` and a finite `K = sup c/λ`.
pub fn check_narrow_mode(op: &OperatorSpec, dom: &CylinderSpec, plan: &SamplePlan) -> Result<StructureReport, StructureError> {
    run(op, dom, plan, Mode::Narrow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::operators::{preset, LinearOp, PresetParams};

    fn plan(dom: &CylinderSpec) -> SamplePlan {
        SamplePlan::standard(dom, &PlanOptions { interior: 64, far: 16, ..PlanOptions::default() })
    }

    #[test]
    fn linear_mixed_passes_everything() {
        let p = preset("linear_mixed", &PresetParams::default()).unwrap();
        let r = check_structure(&p.operator, &p.domain, &plan(&p.domain)).unwrap();
        assert!(r.all_passed(), "{}", r.summary());
        for (_, l) in &r.lambda_samples {
            assert_eq!(*l, 1.0);
        }
        let l1 = r.lambda_growth.value();
        assert!((l1 - 1.0).abs() < 0.05, "Lambda_1 = {l1}");
        assert_eq!(r.gamma.value(), 0.0);
        assert!(!r.rho.is_bounded());
        assert_eq!(r.label, EVIDENCE_LABEL);
    }

    #[test]
    fn c1_degenerate_reports_per_direction() {
        let p = preset("c1_degenerate", &PresetParams::default()).unwrap();
        let r = check_structure(&p.operator, &p.domain, &plan(&p.domain)).unwrap();
        assert!(r.directions[0].passed);
        assert!(!r.directions[1].passed);
        let w = r.directions[1].witness.as_ref().unwrap();
        assert_eq!(w.value, 0.0);
        assert_eq!(r.ellipticity_dir, Some(0));
    }

    #[test]
    fn quadratic_growth_fails_orthogonal_growth() {
        let p = preset("quadratic_growth", &PresetParams::default()).unwrap();
        let r = check_structure(&p.operator, &p.domain, &plan(&p.domain)).unwrap();
        let f = r.flag(Condition::OrthogonalGrowth).unwrap();
        assert!(!f.passed);
        let w = f.witness.as_ref().unwrap();
        assert!(w.x[1].abs() >= 100.0);
        let q = point_quantities(&p.operator, &p.domain, &w.x, &plan(&p.domain)).unwrap();
        assert_eq!(q.big_lambda / norm(&w.x), w.value);
    }

    #[test]
    fn narrow_mode_constants() {
        let dom = CylinderSpec::axis_aligned(2, &[0], &[0.0], &[1.0]).unwrap();
        let op: OperatorSpec = LinearOp::laplacian(2).with_zeroth_order(Expr::Const(0.5)).unwrap().into();
        let std = check_structure(&op, &dom, &plan(&dom)).unwrap();
        assert!(!std.passed(Condition::MonotoneInS));
        let nr = check_narrow_mode(&op, &dom, &plan(&dom)).unwrap();
        assert!(nr.all_passed(), "{}", nr.summary());
        assert_eq!(nr.k.value(), 0.5);

        let op0: OperatorSpec = LinearOp::laplacian(2).into();
        assert_eq!(check_narrow_mode(&op0, &dom, &plan(&dom)).unwrap().k.value(), 0.0);

        let op2: OperatorSpec = LinearOp::laplacian(2).with_zeroth_order(Expr::parse("x2^2").unwrap()).unwrap().into();
        let r2 = check_narrow_mode(&op2, &dom, &plan(&dom)).unwrap();
        assert!(!r2.k.is_bounded());
        assert!(!r2.passed(Condition::NarrowZeroOrder));
    }

    #[test]
    fn sampled_quotients_match_closed_form_for_linear() {
        let p = preset("linear_mixed", &PresetParams::default()).unwrap();
        let pl = plan(&p.domain);
        for x in pl.interior_points.iter().take(16) {
            let s = sampled_quantities(&p.operator, &p.domain, x, &pl).unwrap();
            let a = point_quantities(&p.operator, &p.domain, x, &pl).unwrap();
            for (u, v) in s.lambda.iter().zip(&a.lambda) {
                assert!((u - v).abs() < 1e-10);
            }
            assert!((s.big_lambda - a.big_lambda).abs() <= 1e-10 * (1.0 + a.big_lambda));
        }
    }

    #[test]
    fn non_elliptic_witness_reproduces() {
        let dom = CylinderSpec::axis_aligned(2, &[0], &[0.0], &[1.0]).unwrap();
        let op: OperatorSpec = LinearOp::diagonal(vec![Expr::Const(1.0), Expr::Const(-1.0)]).unwrap().into();
        let r = check_structure(&op, &dom, &plan(&dom)).unwrap();
        let f = r.flag(Condition::DegenerateEllipticity).unwrap();
        assert!(!f.passed);
        let w = f.witness.as_ref().unwrap();
        assert_eq!(w.probe.reevaluate(&op, &w.x).unwrap(), Some(w.value));
    }

    #[test]
    fn too_few_samples_rejected() {
        let dom = CylinderSpec::axis_aligned(2, &[0], &[0.0], &[1.0]).unwrap();
        let pl = SamplePlan::standard(&dom, &PlanOptions { interior: 4, ..PlanOptions::default() });
        let op: OperatorSpec = LinearOp::laplacian(2).into();
        assert!(matches!(check_structure(&op, &dom, &pl), Err(StructureError::InsufficientSamples { got: 4 })));
    }
}
