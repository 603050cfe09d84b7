//! Certificate engine: pointwise checks of differential inequalities over
//! sample sets, the counterexample bundles, rescaling and the comparison operator.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use crate::barriers::SmoothFunction;
use crate::barriers::{abp_params, BarrierError, BarrierFamily};
use crate::geometry::{projections, CylinderSpec};
use crate::operators::{evaluate, EvalPoint, OperatorError, OperatorSpec};
use crate::sampling::shifted_halton;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("unknown counterexample `{0}`")]
    UnknownCounterexample(String),
    #[error("unknown analytic function `{0}`")]
    UnknownFunction(String),
    #[error("scale d = {0} must be positive and finite")]
    BadScale(f64),
    #[error("empty sample set")]
    EmptySamples,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
}

/// Sine and cosine with the argument reduced against the double-precision `π`,
/// so that `sin` vanishes exactly on the representable faces `0, π, 2π, ...`.
pub fn sin_cos_reduced(x: f64) -> (f64, f64) {
    let k = (x / PI).round();
    let (s, c) = (x - k * PI).sin_cos();
    if k.rem_euclid(2.0) == 1.0 {
        (-s, -c)
    } else {
        (s, c)
    }
}

/// Closed-form test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticFunction {
    /// `e^{x₁} sin x₂ sin x₃`.
    ExpSinSin,
    /// `x₂² sin x₁`.
    XsqSin,
    /// `x₁(1 − x₁)/2` in the given dimension.
    TorsionSlab(usize),
}

pub const ANALYTIC_NAMES: [&str; 3] = ["exp_sin_sin", "xsq_sin", "torsion_slab"];

impl AnalyticFunction {
    pub fn by_name(name: &str, dim: usize) -> Result<Self, VerifyError> {
        match name {
            "exp_sin_sin" => Ok(AnalyticFunction::ExpSinSin),
            "xsq_sin" => Ok(AnalyticFunction::XsqSin),
            "torsion_slab" => Ok(AnalyticFunction::TorsionSlab(dim.max(1))),
            other => Err(VerifyError::UnknownFunction(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalyticFunction::ExpSinSin => "exp_sin_sin",
            AnalyticFunction::XsqSin => "xsq_sin",
            AnalyticFunction::TorsionSlab(_) => "torsion_slab",
        }
    }
}

impl SmoothFunction for AnalyticFunction {
    fn dim(&self) -> usize {
        match self {
            AnalyticFunction::ExpSinSin => 3,
            AnalyticFunction::XsqSin => 2,
            AnalyticFunction::TorsionSlab(n) => *n,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            AnalyticFunction::ExpSinSin => x[0].exp() * sin_cos_reduced(x[1]).0 * sin_cos_reduced(x[2]).0,
            AnalyticFunction::XsqSin => x[1] * x[1] * sin_cos_reduced(x[0]).0,
            AnalyticFunction::TorsionSlab(_) => 0.5 * x[0] * (1.0 - x[0]),
        }
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        match self {
            AnalyticFunction::ExpSinSin => {
                let e = x[0].exp();
                let (s2, c2) = sin_cos_reduced(x[1]);
                let (s3, c3) = sin_cos_reduced(x[2]);
                DVector::from_vec(vec![e * s2 * s3, e * c2 * s3, e * s2 * c3])
            }
            AnalyticFunction::XsqSin => {
                let (s, c) = sin_cos_reduced(x[0]);
                DVector::from_vec(vec![x[1] * x[1] * c, 2.0 * x[1] * s])
            }
            AnalyticFunction::TorsionSlab(n) => {
                let mut g = DVector::zeros(*n);
                g[0] = 0.5 - x[0];
                g
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            AnalyticFunction::ExpSinSin => {
                let e = x[0].exp();
                let (s2, c2) = sin_cos_reduced(x[1]);
                let (s3, c3) = sin_cos_reduced(x[2]);
                let u = e * s2 * s3;
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[u, e * c2 * s3, e * s2 * c3, e * c2 * s3, -u, e * c2 * c3, e * s2 * c3, e * c2 * c3, -u],
                )
            }
            AnalyticFunction::XsqSin => {
                let (s, c) = sin_cos_reduced(x[0]);
                let z2 = x[1] * x[1];
                DMatrix::from_row_slice(2, 2, &[-(z2 * s), 2.0 * x[1] * c, 2.0 * x[1] * c, 2.0 * s])
            }
            AnalyticFunction::TorsionSlab(n) => {
                let mut h = DMatrix::zeros(*n, *n);
                h[(0, 0)] = -1.0;
                h
            }
        }
    }
}

/// `Σ cᵢ fᵢ + constant`.
#[derive(Clone)]
pub struct Composite {
    pub terms: Vec<(f64, Arc<dyn SmoothFunction>)>,
    pub constant: f64,
}

impl Composite {
    pub fn new(terms: Vec<(f64, Arc<dyn SmoothFunction>)>, constant: f64) -> Self {
        assert!(!terms.is_empty(), "composite needs at least one term");
        Composite { terms, constant }
    }
}

impl SmoothFunction for Composite {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value(x)).sum::<f64>() + self.constant
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for (c, f) in &self.terms {
            g += f.gradient(x) * *c;
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(x.len(), x.len());
        for (c, f) in &self.terms {
            h += f.hessian(x) * *c;
        }
        h
    }
}

/// `v(y) = u(d y)`.
#[derive(Clone)]
pub struct Dilated {
    pub inner: Arc<dyn SmoothFunction>,
    pub d: f64,
}

impl Dilated {
    fn scaled(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v * self.d).collect()
    }
}

impl SmoothFunction for Dilated {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.inner.value(&self.scaled(y))
    }

    fn gradient(&self, y: &[f64]) -> DVector<f64> {
        self.inner.gradient(&self.scaled(y)) * self.d
    }

    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        self.inner.hessian(&self.scaled(y)) * (self.d * self.d)
    }
}

/// Relative errors of closed-form derivatives against central differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeErrors {
    pub gradient: f64,
    pub hessian: f64,
}

/// Gradient against central differences of the value, Hessian against central
/// differences of the gradient. Errors are `‖fd − exact‖∞ / max(‖exact‖∞, 1)`.
pub fn derivative_errors(f: &dyn SmoothFunction, x: &[f64], step: f64) -> DerivativeErrors {
    let n = x.len();
    let g = f.gradient(x);
    let h = f.hessian(x);
    let mut g_fd = DVector::zeros(n);
    let mut h_fd = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += step;
        xm[i] -= step;
        g_fd[i] = (f.value(&xp) - f.value(&xm)) / (2.0 * step);
        let col = (f.gradient(&xp) - f.gradient(&xm)) / (2.0 * step);
        h_fd.set_column(i, &col);
    }
    let rel = |diff: f64, scale: f64| diff / scale.max(1.0);
    DerivativeErrors {
        gradient: rel((&g_fd - &g).amax(), g.amax()),
        hessian: rel((&h_fd - &h).amax(), h.amax()),
    }
}

/// A finite, reproducible set of sample points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub description: String,
    pub seed: u64,
    pub points: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn new(description: &str, seed: u64, points: Vec<Vec<f64>>) -> Self {
        SampleSet { description: description.to_string(), seed, points }
    }

    /// Quasi-random points strictly inside `dom`, unbounded coordinates in `[lo, hi]`.
    pub fn interior(dom: &CylinderSpec, count: usize, seed: u64, lo: f64, hi: f64) -> Self {
        let n = dom.dim();
        let k = dom.bounded_count();
        let points = shifted_halton(n, count, seed)
            .into_iter()
            .map(|u| {
                let t: Vec<f64> = (0..k)
                    .map(|h| {
                        let s = 1e-9 + u[h] * (1.0 - 2e-9);
                        dom.offsets()[h] + s * dom.widths()[h]
                    })
                    .collect();
                let z: Vec<f64> = (k..n).map(|j| lo + (hi - lo) * u[j]).collect();
                dom.point_from_parts(&t, &z)
            })
            .collect();
        SampleSet::new(
            &format!("{count} shifted-Halton interior points, unbounded coordinates in [{lo}, {hi}]"),
            seed,
            points,
        )
    }

    /// Quasi-random points on the exact faces `x·ν^h ∈ {a_h, a_h + d_h}`, cycling
    /// through the faces.
    pub fn boundary(dom: &CylinderSpec, count: usize, seed: u64, lo: f64, hi: f64) -> Self {
        let n = dom.dim();
        let k = dom.bounded_count();
        let points = shifted_halton(n, count, seed)
            .into_iter()
            .enumerate()
            .map(|(i, u)| {
                let face = i % (2 * k);
                let (h, upper) = (face / 2, face % 2 == 1);
                let t: Vec<f64> = (0..k)
                    .map(|j| {
                        if j == h {
                            if upper {
                                dom.offsets()[j] + dom.widths()[j]
                            } else {
                                dom.offsets()[j]
                            }
                        } else {
                            dom.offsets()[j] + u[j] * dom.widths()[j]
                        }
                    })
                    .collect();
                let z: Vec<f64> = (k..n).map(|j| lo + (hi - lo) * u[j]).collect();
                dom.point_from_parts(&t, &z)
            })
            .collect();
        SampleSet::new(
            &format!("{count} shifted-Halton points on the {} bounded faces, unbounded coordinates in [{lo}, {hi}]", 2 * k),
            seed,
            points,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    /// `value ≥ rhs`.
    Ge,
    /// `value ≤ rhs`.
    Le,
    /// `|value − rhs| ≈ 0`.
    Equal,
}

impl Sign {
    pub fn margin(self, value: f64, rhs: f64) -> f64 {
        match self {
            Sign::Ge => value - rhs,
            Sign::Le => rhs - value,
            Sign::Equal => -(value - rhs).abs(),
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Sign::Ge => ">=",
            Sign::Le => "<=",
            Sign::Equal => "==",
        }
    }
}

/// Which value is passed as the `s` argument of `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SArg {
    Value,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub claim: String,
    pub sample_description: String,
    pub sample_count: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub worst_margin: f64,
    pub witness: Vec<f64>,
    pub verdict: bool,
}

impl Certificate {
    pub fn line(&self) -> String {
        format!(
            "[{}] {} | {} | worst margin {:.6e} at {:?} | tolerance {:e} | seed {}",
            if self.verdict { "PASS" } else { "FAIL" },
            self.claim,
            self.sample_description,
            self.worst_margin,
            self.witness,
            self.tolerance,
            self.seed
        )
    }
}

/// Builds a certificate from per-point margins. The reduction is sequential and
/// keeps the first index on ties, so the result does not depend on thread count.
pub fn certify_margins(
    claim: &str,
    samples: &SampleSet,
    tolerance: f64,
    margin: impl Fn(&[f64]) -> Result<f64, VerifyError> + Sync,
) -> Result<Certificate, VerifyError> {
    if samples.points.is_empty() {
        return Err(VerifyError::EmptySamples);
    }
    let margins: Vec<f64> = samples.points.par_iter().map(|x| margin(x)).collect::<Result<_, _>>()?;
    let mut worst = (f64::INFINITY, 0usize);
    for (i, m) in margins.iter().enumerate() {
        if *m < worst.0 || (m.is_nan() && !worst.0.is_nan()) {
            worst = (*m, i);
        }
    }
    Ok(Certificate {
        claim: claim.to_string(),
        sample_description: samples.description.clone(),
        sample_count: samples.points.len(),
        seed: samples.seed,
        tolerance,
        worst_margin: worst.0,
        witness: samples.points[worst.1].clone(),
        verdict: worst.0 >= -tolerance,
    })
}

/// `F(x, s, Dfn(x), D²fn(x))` with `s` per [`SArg`].
pub fn apply_operator(op: &OperatorSpec, f: &dyn SmoothFunction, x: &[f64], s_arg: SArg) -> Result<f64, VerifyError> {
    if f.dim() != x.len() || op.dim() != x.len() {
        return Err(VerifyError::DimensionMismatch { expected: op.dim(), got: x.len() });
    }
    let s = match s_arg {
        SArg::Value => f.value(x),
        SArg::Zero => 0.0,
    };
    let pt = EvalPoint { x: DVector::from_column_slice(x), s, p: f.gradient(x), hess: f.hessian(x) };
    Ok(evaluate(op, &pt)?)
}

/// Certifies `F(x, fn, Dfn, D²fn) sign rhs(x)` on every sample.
pub fn certify_inequality(
    op: &OperatorSpec,
    f: &dyn SmoothFunction,
    samples: &SampleSet,
    sign: Sign,
    rhs: &(dyn Fn(&[f64]) -> f64 + Sync),
    s_arg: SArg,
    claim: &str,
    tolerance: f64,
) -> Result<Certificate, VerifyError> {
    let claim = format!("{claim} [F[fn] {} rhs]", sign.symbol());
    certify_margins(&claim, samples, tolerance, |x| Ok(sign.margin(apply_operator(op, f, x, s_arg)?, rhs(x))))
}

/// Counterexample bundle: residual, boundary trace and interior positivity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleBundle {
    pub name: String,
    pub function: &'static str,
    pub residual: Certificate,
    pub boundary: Certificate,
    pub positivity: Certificate,
    /// `(parameter, u)` along the ray that exhibits the growth.
    pub growth: Vec<(f64, f64)>,
    pub violated_hypothesis: String,
    pub conclusion: String,
}

impl CounterexampleBundle {
    pub fn all_certified(&self) -> bool {
        self.residual.verdict && self.boundary.verdict && self.positivity.verdict
    }
}

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const TRACE_TOLERANCE: f64 = 1e-12;

/// Reproduces one of the registered counterexamples.
pub fn counterexample_report(name: &str, seed: u64) -> Result<CounterexampleBundle, VerifyError> {
    use crate::operators::{preset, PresetParams};
    let p = preset(name, &PresetParams::default()).map_err(|e| match e {
        OperatorError::UnknownPreset(n) => VerifyError::UnknownCounterexample(n),
        other => other.into(),
    })?;
    match name {
        "c1_degenerate" => {
            let u = AnalyticFunction::ExpSinSin;
            let inner = SampleSet::interior(&p.domain, 1000, seed, -20.0, 20.0);
            let residual = certify_inequality(&p.operator, &u, &inner, Sign::Equal, &|_| 0.0, SArg::Value, "u_x1x1 + u_x2x2 = 0 in C1", RESIDUAL_TOLERANCE)?;
            let faces = SampleSet::boundary(&p.domain, 1000, seed.wrapping_add(1), -20.0, 20.0);
            let boundary = certify_margins("u = 0 on the faces of C1", &faces, TRACE_TOLERANCE, |x| Ok(-u.value(x).abs()))?;
            let ray: Vec<f64> = (0..=8).map(|i| i as f64 * 2.5).collect();
            let ray_pts = SampleSet::new("ray (t, pi/2, pi/2), t = 0, 2.5, ..., 20", seed, ray.iter().map(|t| vec![*t, PI / 2.0, PI / 2.0]).collect());
            let positivity = certify_margins("u >= 1 along the ray, u(0, pi/2, pi/2) = 1", &ray_pts, TRACE_TOLERANCE, |x| Ok(u.value(x) - 1.0))?;
            let growth = ray.iter().map(|t| (*t, u.value(&[*t, PI / 2.0, PI / 2.0]))).collect();
            Ok(CounterexampleBundle {
                name: name.to_string(),
                function: u.name(),
                residual,
                boundary,
                positivity,
                growth,
                violated_hypothesis: "growth at infinity: u+ = o(|x|) fails, u(t, pi/2, pi/2) = e^t".into(),
                conclusion: "the maximum principle fails: u solves the degenerate Dirichlet problem with zero boundary data and is positive inside".into(),
            })
        }
        "quadratic_growth" => {
            let u = AnalyticFunction::XsqSin;
            let inner = SampleSet::interior(&p.domain, 1000, seed, -1e4, 1e4);
            let residual = certify_inequality(&p.operator, &u, &inner, Sign::Equal, &|_| 0.0, SArg::Value, "u_x1x1 + x2^2/2 u_x2x2 = 0 in (0,pi) x R", TRACE_TOLERANCE)?;
            let faces = SampleSet::boundary(&p.domain, 1000, seed.wrapping_add(1), -1e4, 1e4);
            let boundary = certify_margins("u = 0 on x1 in {0, pi}", &faces, TRACE_TOLERANCE, |x| Ok(-u.value(x).abs()))?;
            let ray: Vec<f64> = (1..=8).map(|i| 10f64.powi(i - 1)).collect();
            let ray_pts = SampleSet::new("ray (pi/2, z), z = 1, 10, ..., 1e7", seed, ray.iter().map(|z| vec![PI / 2.0, *z]).collect());
            let positivity = certify_margins("u >= 1 along the ray, u(pi/2, z) = z^2", &ray_pts, TRACE_TOLERANCE, |x| Ok(u.value(x) - 1.0))?;
            let growth = ray.iter().map(|z| (*z, u.value(&[PI / 2.0, *z]))).collect();
            Ok(CounterexampleBundle {
                name: name.to_string(),
                function: u.name(),
                residual,
                boundary,
                positivity,
                growth,
                violated_hypothesis: "orthogonal growth: Lambda(x) = x2^2/2 is not O(|x|); u grows only polynomially, so exponential growth bounds hold".into(),
                conclusion: "the maximum principle fails: u is strictly positive in the strip and vanishes on its boundary".into(),
            })
        }
        other => Err(VerifyError::UnknownCounterexample(other.to_string())),
    }
}

/// `G(y,s,p,M) = d² F(d y, s, p/d, M/d²)`.
pub fn rescale_operator(op: &OperatorSpec, d: f64) -> Result<OperatorSpec, VerifyError> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(VerifyError::BadScale(d));
    }
    Ok(match op {
        OperatorSpec::Linear(l) => OperatorSpec::Linear(l.rescaled(d)),
        OperatorSpec::SupInf(s) => OperatorSpec::SupInf(s.rescaled(d)),
        OperatorSpec::Callable(c) => {
            let inner = c.eval.clone();
            let name = format!("{} rescaled by {d}", c.name);
            OperatorSpec::callable(c.dim, &name, move |pt: &EvalPoint| {
                let q = EvalPoint { x: &pt.x * d, s: pt.s, p: &pt.p / d, hess: &pt.hess / (d * d) };
                d * d * inner(&q)
            })
        }
    })
}

/// `G(x,s,p,M) = F(x, s+v, p+Dv, M+D²v) − F(x, v, Dv, D²v)`; the identity for linear `F`.
pub fn comparison_operator(op: &OperatorSpec, v: Arc<dyn SmoothFunction>) -> OperatorSpec {
    match op {
        OperatorSpec::Linear(_) => op.clone(),
        _ => {
            let f = op.clone();
            let n = op.dim();
            OperatorSpec::callable(n, "comparison", move |pt: &EvalPoint| {
                let x = pt.x.as_slice();
                let (vv, dv, d2v) = (v.value(x), v.gradient(x), v.hessian(x));
                let shifted = EvalPoint { x: pt.x.clone(), s: pt.s + vv, p: &pt.p + &dv, hess: &pt.hess + &d2v };
                let base = EvalPoint { x: pt.x.clone(), s: vv, p: dv, hess: d2v };
                match (evaluate(&f, &shifted), evaluate(&f, &base)) {
                    (Ok(a), Ok(b)) => a - b,
                    _ => f64::NAN,
                }
            })
        }
    }
}

pub const SPONGE_LADDER: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Checks `F(x_ε, 0, 0, (ε/|x_ε|) Q) ≤ Λ₁ ε + tol` along `|x_ε| = 1/ε`, for
/// several directions in `U^⊥` at every rung of the ladder.
pub fn sponge_limit_check(op: &OperatorSpec, dom: &CylinderSpec, ladder: &[f64], lambda1: f64, tolerance: f64, seed: u64) -> Result<Certificate, VerifyError> {
    let n = dom.dim();
    let k = dom.bounded_count();
    let q = projections(dom).q;
    let dirs = shifted_halton(n, 8, seed);
    let mut pts = Vec::new();
    let mut eps_of = Vec::new();
    for &eps in ladder {
        for u in &dirs {
            let t: Vec<f64> = (0..k).map(|h| dom.offsets()[h] + u[h] * dom.widths()[h]).collect();
            let mut z: Vec<f64> = (k..n).map(|j| 2.0 * u[j] - 1.0).collect();
            let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let target = 1.0 / eps;
            let tn2: f64 = t.iter().map(|v| v * v).sum();
            let len = (target * target - tn2).max(0.0).sqrt();
            for v in z.iter_mut() {
                *v *= len / zn;
            }
            pts.push(dom.point_from_parts(&t, &z));
            eps_of.push(eps);
        }
    }
    let samples = SampleSet::new(
        &format!("{} points, 8 directions per rung, |x| = 1/eps for eps in {:?}", pts.len(), ladder),
        seed,
        pts.clone(),
    );
    let claim = format!("F(x, 0, 0, (eps/|x|) Q) <= Lambda_1 eps with Lambda_1 = {lambda1}");
    certify_margins(&claim, &samples, tolerance, |x| {
        let i = pts.iter().position(|p| p.as_slice() == x).expect("sample point");
        let eps = eps_of[i];
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pt = EvalPoint { x: DVector::from_column_slice(x), s: 0.0, p: DVector::zeros(n), hess: &q * (eps / r) };
        Ok(lambda1 * eps - evaluate(op, &pt)?)
    })
}

/// Certificates for the auxiliary function of the sup bound on the unit-width
/// slab `0 ≤ x·ν ≤ 1`: `F(x, 0, Dw, D²w) ≥ 0` inside and `w ≤ 0` on the faces, with
/// `w = u + C₁e^{α x·ν} − sup∂u⁺ − C₁e^{α}`.
#[allow(clippy::too_many_arguments)]
pub fn abp_composite_certificates(
    op: &OperatorSpec,
    u: Arc<dyn SmoothFunction>,
    dom: &CylinderSpec,
    h: usize,
    gamma: f64,
    sup_f_over_lambda: f64,
    sup_boundary_uplus: f64,
    inner: &SampleSet,
    faces: &SampleSet,
    tolerance: f64,
) -> Result<(Certificate, Certificate), VerifyError> {
    let (alpha, c1) = abp_params(gamma, sup_f_over_lambda)?;
    let nu = &dom.dirs()[h];
    let a = dom.offsets()[h];
    let aux: Arc<dyn SmoothFunction> = Arc::new(BarrierFamily::abp_aux(c1, alpha, nu, a)?);
    let w = Composite::new(vec![(1.0, u), (1.0, aux)], -sup_boundary_uplus - c1 * (alpha * dom.widths()[h]).exp());
    let interior = certify_inequality(op, &w, inner, Sign::Ge, &|_| 0.0, SArg::Zero, "auxiliary function w is a subsolution", tolerance)?;
    let boundary = certify_margins("w <= 0 on the faces", faces, tolerance, |x| Ok(-w.value(x)))?;
    Ok((interior, boundary))
}

/// `F[−v] ≥ 0` for the PL barrier `v` of `params` on `dom` (value passed as `s`).
pub fn pl_barrier_certificate(op: &OperatorSpec, dom: &CylinderSpec, h: usize, alpha: f64, beta: f64, d0: f64, samples_radius: f64, count: usize, seed: u64, tolerance: f64) -> Result<Certificate, VerifyError> {
    let v: Arc<dyn SmoothFunction> = Arc::new(BarrierFamily::pl(dom, h, alpha, beta)?);
    let neg = Composite::new(vec![(-1.0, v)], 0.0);
    // samples restricted to the certified band around the slab centre
    let centre = dom.offsets()[h] + 0.5 * dom.widths()[h];
    let band = if d0 < dom.widths()[h] {
        let mut offs = dom.offsets().to_vec();
        let mut widths = dom.widths().to_vec();
        offs[h] = centre - 0.5 * d0;
        widths[h] = d0;
        let dirs: Vec<Vec<f64>> = dom.dirs().iter().map(|v| v.iter().copied().collect()).collect();
        crate::geometry::make_cylinder(dom.dim(), &dirs, &offs, &widths).expect("sub-slab of a valid cylinder")
    } else {
        dom.clone()
    };
    let samples = SampleSet::interior(&band, count, seed, -samples_radius, samples_radius);
    certify_inequality(op, &neg, &samples, Sign::Ge, &|_| 0.0, SArg::Value, "F[-v] >= 0 for the PL barrier v", tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::operators::{preset, LinearOp, PresetParams};

    #[test]
    fn reduced_sine_vanishes_on_pi() {
        assert_eq!(sin_cos_reduced(PI).0, 0.0);
        assert_eq!(sin_cos_reduced(0.0).0, 0.0);
        assert_eq!(sin_cos_reduced(PI / 2.0).0, 1.0);
        for x in [0.3, 1.7, 2.9, -0.4, 5.0] {
            assert!((sin_cos_reduced(x).0 - x.sin()).abs() < 1e-15);
            assert!((sin_cos_reduced(x).1 - x.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn counterexample_c1() {
        let b = counterexample_report("c1_degenerate", 7).unwrap();
        assert!(b.all_certified(), "{}\n{}\n{}", b.residual.line(), b.boundary.line(), b.positivity.line());
        assert_eq!(AnalyticFunction::ExpSinSin.value(&[0.0, PI / 2.0, PI / 2.0]), 1.0);
        assert!(b.violated_hypothesis.contains("o(|x|)"));
    }

    #[test]
    fn counterexample_quadratic() {
        let b = counterexample_report("quadratic_growth", 7).unwrap();
        assert!(b.all_certified());
        assert_eq!(b.residual.worst_margin, 0.0);
        assert!(matches!(counterexample_report("linear_mixed", 1), Err(VerifyError::UnknownCounterexample(_))));
        assert!(matches!(counterexample_report("nope", 1), Err(VerifyError::UnknownCounterexample(_))));
    }

    #[test]
    fn witness_reproduces_margin() {
        let p = preset("linear_mixed", &PresetParams::default()).unwrap();
        let u = AnalyticFunction::TorsionSlab(3);
        let s = SampleSet::interior(&p.domain, 64, 3, -5.0, 5.0);
        let rhs = |x: &[f64]| -1.0 + 0.01 * x[0];
        let c = certify_inequality(&p.operator, &u, &s, Sign::Ge, &rhs, SArg::Value, "torsion", 1e-10).unwrap();
        let again = Sign::Ge.margin(apply_operator(&p.operator, &u, &c.witness, SArg::Value).unwrap(), rhs(&c.witness));
        assert_eq!(again, c.worst_margin);
    }

    #[test]
    fn rescaling_examples() {
        let lap: OperatorSpec = LinearOp::laplacian(2).into();
        let g = rescale_operator(&lap, 2.0).unwrap();
        let pt = EvalPoint::new(&[0.3, 0.1], 0.5, &[1.0, 2.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]));
        assert_eq!(evaluate(&g, &pt).unwrap(), evaluate(&lap, &pt).unwrap());
        let id = rescale_operator(&lap, 1.0).unwrap();
        assert_eq!(evaluate(&id, &pt).unwrap(), evaluate(&lap, &pt).unwrap());
        assert!(matches!(rescale_operator(&lap, 0.0), Err(VerifyError::BadScale(_))));
    }

    #[test]
    fn rescaled_subsolution_property() {
        let op: OperatorSpec = LinearOp::diagonal(vec![Expr::Const(1.0), Expr::Norm]).unwrap().into();
        let d = 2.0;
        let g = rescale_operator(&op, d).unwrap();
        let u: Arc<dyn SmoothFunction> = Arc::new(AnalyticFunction::XsqSin);
        let v = Dilated { inner: u.clone(), d };
        for y in [[0.2, 0.7], [1.1, -3.0], [0.5, 0.0]] {
            let x = [y[0] * d, y[1] * d];
            let lhs = apply_operator(&g, &v, &y, SArg::Value).unwrap();
            let rhs = d * d * apply_operator(&op, u.as_ref(), &x, SArg::Value).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn sponge_limit_examples() {
        let p = preset("linear_mixed", &PresetParams::default()).unwrap();
        let c = sponge_limit_check(&p.operator, &p.domain, &SPONGE_LADDER, 1.0, 1e-10, 0).unwrap();
        assert!(c.verdict, "{}", c.line());
        let q = preset("quadratic_growth", &PresetParams::default()).unwrap();
        let c = sponge_limit_check(&q.operator, &q.domain, &SPONGE_LADDER, 10.0, 1e-10, 0).unwrap();
        assert!(!c.verdict);
    }

    #[test]
    fn abp_composite_on_torsion() {
        let dom = CylinderSpec::axis_aligned(2, &[0], &[0.0], &[1.0]).unwrap();
        let op: OperatorSpec = LinearOp::laplacian(2).into();
        let inner = SampleSet::interior(&dom, 200, 1, -3.0, 3.0);
        let faces = SampleSet::boundary(&dom, 100, 2, -3.0, 3.0);
        let u: Arc<dyn SmoothFunction> = Arc::new(AnalyticFunction::TorsionSlab(2));
        let (a, b) = abp_composite_certificates(&op, u, &dom, 0, 0.0, 1.0, 0.0, &inner, &faces, 1e-10).unwrap();
        assert!(a.verdict && b.verdict, "{}\n{}", a.line(), b.line());
    }

    #[test]
    fn comparison_operator_of_supinf_keeps_structure() {
        use crate::structure::{check_structure, PlanOptions, SamplePlan};
        let p = preset("bellman_isaacs_demo", &PresetParams::default()).unwrap();
        let v: Arc<dyn SmoothFunction> = Arc::new(AnalyticFunction::TorsionSlab(2));
        let g = comparison_operator(&p.operator, v);
        let plan = SamplePlan::standard(&p.domain, &PlanOptions { interior: 32, far: 8, ..PlanOptions::default() });
        let r = check_structure(&g, &p.domain, &plan).unwrap();
        assert!(r.passed(crate::structure::Condition::DegenerateEllipticity));
        assert!(r.passed(crate::structure::Condition::Normalization));
        let lin = preset("linear_mixed", &PresetParams::default()).unwrap();
        assert!(matches!(comparison_operator(&lin.operator, Arc::new(AnalyticFunction::TorsionSlab(3))), OperatorSpec::Linear(_)));
    }
}
