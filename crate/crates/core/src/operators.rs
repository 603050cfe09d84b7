//! Degenerate elliptic operators `F(x, s, p, X)` and the preset registry.
//!
//! Three variants are supported:
//! * [`LinearOp`]: `Tr(A(x) X) + b(x)·p + c(x) s` with closed-form coefficient fields,
//! * [`SupInfOp`]: `max_α min_β L^{αβ}` over finite families of constant-coefficient linear maps,
//! * [`CallableOp`]: an arbitrary pure function, for user extensions only.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::geometry::{CylinderSpec, GeometryError, LatticeSpec};
use crate::linalg::{is_symmetric, min_eigenvalue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("dimension mismatch: operator acts on R^{expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite {what} at x = {x:?}")]
    NonFiniteCoefficient { what: String, x: Vec<f64> },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid operator: {0}")]
    Invalid(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Argument tuple `(x, s, p, X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub x: DVector<f64>,
    pub s: f64,
    pub p: DVector<f64>,
    /// The matrix argument `X`.
    pub hess: DMatrix<f64>,
}

impl EvalPoint {
    pub fn new(x: &[f64], s: f64, p: &[f64], hess: DMatrix<f64>) -> Self {
        EvalPoint { x: DVector::from_column_slice(x), s, p: DVector::from_column_slice(p), hess }
    }

    /// `(x, 0, 0, O)`.
    pub fn origin_at(x: &[f64]) -> Self {
        let n = x.len();
        EvalPoint::new(x, 0.0, &vec![0.0; n], DMatrix::zeros(n, n))
    }

    pub fn with_hess(&self, hess: DMatrix<f64>) -> Self {
        EvalPoint { hess, ..self.clone() }
    }
}

/// Linear operator with closed-form coefficient fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearRecord", into = "LinearRecord")]
pub struct LinearOp {
    dim: usize,
    a: Vec<Vec<Expr>>,
    b: Vec<Expr>,
    c: Expr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRecord {
    pub a: Vec<Vec<Expr>>,
    pub b: Vec<Expr>,
    pub c: Expr,
}

impl TryFrom<LinearRecord> for LinearOp {
    type Error = OperatorError;
    fn try_from(r: LinearRecord) -> Result<Self, Self::Error> {
        LinearOp::new(r.a, r.b, r.c)
    }
}

impl From<LinearOp> for LinearRecord {
    fn from(l: LinearOp) -> Self {
        LinearRecord { a: l.a, b: l.b, c: l.c }
    }
}

/// Coefficients of a linear operator frozen at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl Coefficients {
    pub fn apply(&self, s: f64, p: &DVector<f64>, hess: &DMatrix<f64>) -> f64 {
        let n = self.a.nrows();
        let mut tr = 0.0;
        for i in 0..n {
            for j in 0..n {
                tr += self.a[(i, j)] * hess[(j, i)];
            }
        }
        tr + self.b.dot(p) + self.c * s
    }
}

impl LinearOp {
    pub fn new(a: Vec<Vec<Expr>>, b: Vec<Expr>, c: Expr) -> Result<Self, OperatorError> {
        let n = a.len();
        if n == 0 {
            return Err(OperatorError::Invalid("empty coefficient matrix".into()));
        }
        for row in &a {
            if row.len() != n {
                return Err(OperatorError::DimensionMismatch { expected: n, got: row.len() });
            }
            for e in row {
                e.check_dim(n)?;
            }
        }
        for i in 0..n {
            for j in 0..i {
                if a[i][j] != a[j][i] {
                    return Err(OperatorError::Invalid(format!(
                        "coefficient matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if b.len() != n {
            return Err(OperatorError::DimensionMismatch { expected: n, got: b.len() });
        }
        for e in &b {
            e.check_dim(n)?;
        }
        c.check_dim(n)?;
        Ok(LinearOp { dim: n, a, b, c })
    }

    /// Diagonal second-order part, zero drift and zero-order term.
    pub fn diagonal(diag: Vec<Expr>) -> Result<Self, OperatorError> {
        let n = diag.len();
        let a = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag[i].clone() } else { Expr::Const(0.0) }).collect())
            .collect();
        LinearOp::new(a, vec![Expr::Const(0.0); n], Expr::Const(0.0))
    }

    pub fn laplacian(n: usize) -> Self {
        LinearOp::diagonal(vec![Expr::Const(1.0); n]).expect("valid laplacian")
    }

    pub fn with_drift(mut self, b: Vec<Expr>) -> Result<Self, OperatorError> {
        if b.len() != self.dim {
            return Err(OperatorError::DimensionMismatch { expected: self.dim, got: b.len() });
        }
        for e in &b {
            e.check_dim(self.dim)?;
        }
        self.b = b;
        Ok(self)
    }

    pub fn with_zeroth_order(mut self, c: Expr) -> Result<Self, OperatorError> {
        c.check_dim(self.dim)?;
        self.c = c;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_exprs(&self) -> &[Vec<Expr>] {
        &self.a
    }

    pub fn b_exprs(&self) -> &[Expr] {
        &self.b
    }

    pub fn c_expr(&self) -> &Expr {
        &self.c
    }

    pub fn coefficients(&self, x: &[f64]) -> Result<Coefficients, OperatorError> {
        if x.len() != self.dim {
            return Err(OperatorError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let n = self.dim;
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bad = |what: &str| OperatorError::NonFiniteCoefficient { what: what.to_string(), x: x.to_vec() };
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.a[i][j].eval_with(x, norm);
                if !v.is_finite() {
                    return Err(bad(&format!("a_{}{}", i + 1, j + 1)));
                }
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let mut b = DVector::zeros(n);
        for i in 0..n {
            let v = self.b[i].eval_with(x, norm);
            if !v.is_finite() {
                return Err(bad(&format!("b_{}", i + 1)));
            }
            b[i] = v;
        }
        let c = self.c.eval_with(x, norm);
        if !c.is_finite() {
            return Err(bad("c"));
        }
        Ok(Coefficients { a, b, c })
    }

    /// `G(y,s,p,M) = d² F(d y, s, p/d, M/d²)`, which for a linear operator has
    /// coefficients `A(d y)`, `d b(d y)`, `d² c(d y)`.
    pub fn rescaled(&self, d: f64) -> LinearOp {
        let a = self.a.iter().map(|row| row.iter().map(|e| e.substitute_scaled(d)).collect()).collect();
        let b = self.b.iter().map(|e| e.substitute_scaled(d).scaled_by(d)).collect();
        let c = self.c.substitute_scaled(d).scaled_by(d * d);
        LinearOp { dim: self.dim, a, b, c }
    }
}

/// Constant-coefficient linear map `L u = Tr(A X) + b·p + c s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstLinearRecord", into = "ConstLinearRecord")]
pub struct ConstLinear {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstLinearRecord {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: f64,
}

impl TryFrom<ConstLinearRecord> for ConstLinear {
    type Error = OperatorError;
    fn try_from(r: ConstLinearRecord) -> Result<Self, Self::Error> {
        let n = r.a.len();
        if r.a.iter().any(|row| row.len() != n) {
            return Err(OperatorError::Invalid("coefficient matrix must be square".into()));
        }
        let flat: Vec<f64> = r.a.iter().flatten().copied().collect();
        ConstLinear::new(DMatrix::from_row_slice(n, n, &flat), DVector::from_vec(r.b), r.c)
    }
}

impl From<ConstLinear> for ConstLinearRecord {
    fn from(l: ConstLinear) -> Self {
        let n = l.a.nrows();
        ConstLinearRecord {
            a: (0..n).map(|i| (0..n).map(|j| l.a[(i, j)]).collect()).collect(),
            b: l.b.iter().copied().collect(),
            c: l.c,
        }
    }
}

impl ConstLinear {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self, OperatorError> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n {
            return Err(OperatorError::DimensionMismatch { expected: n, got: b.len() });
        }
        if !is_symmetric(&a, 1e-12) {
            return Err(OperatorError::Invalid("coefficient matrix is not symmetric".into()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(OperatorError::Invalid("non-finite constant coefficient".into()));
        }
        Ok(ConstLinear { a, b, c })
    }

    pub fn diag(a: &[f64], b: &[f64], c: f64) -> Self {
        ConstLinear::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(a)),
            DVector::from_column_slice(b),
            c,
        )
        .expect("valid diagonal coefficients")
    }

    pub fn as_coefficients(&self) -> Coefficients {
        Coefficients { a: self.a.clone(), b: self.b.clone(), c: self.c }
    }

    pub fn apply(&self, s: f64, p: &DVector<f64>, hess: &DMatrix<f64>) -> f64 {
        let n = self.a.nrows();
        let mut tr = 0.0;
        for i in 0..n {
            for j in 0..n {
                tr += self.a[(i, j)] * hess[(j, i)];
            }
        }
        tr + self.b.dot(p) + self.c * s
    }
}

/// `max_α min_β L^{αβ}` over finite families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SupInfRecord", into = "SupInfRecord")]
pub struct SupInfOp {
    dim: usize,
    families: Vec<Vec<ConstLinear>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupInfRecord {
    pub families: Vec<Vec<ConstLinear>>,
}

impl TryFrom<SupInfRecord> for SupInfOp {
    type Error = OperatorError;
    fn try_from(r: SupInfRecord) -> Result<Self, Self::Error> {
        SupInfOp::new(r.families)
    }
}

impl From<SupInfOp> for SupInfRecord {
    fn from(s: SupInfOp) -> Self {
        SupInfRecord { families: s.families }
    }
}

impl SupInfOp {
    pub fn new(families: Vec<Vec<ConstLinear>>) -> Result<Self, OperatorError> {
        let dim = families
            .first()
            .and_then(|f| f.first())
            .map(|l| l.a.nrows())
            .ok_or_else(|| OperatorError::Invalid("sup-inf operator needs a non-empty family".into()))?;
        for fam in &families {
            if fam.is_empty() {
                return Err(OperatorError::Invalid("empty inner family".into()));
            }
            for l in fam {
                if l.a.nrows() != dim {
                    return Err(OperatorError::DimensionMismatch { expected: dim, got: l.a.nrows() });
                }
            }
        }
        Ok(SupInfOp { dim, families })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn families(&self) -> &[Vec<ConstLinear>] {
        &self.families
    }

    pub fn apply(&self, s: f64, p: &DVector<f64>, hess: &DMatrix<f64>) -> f64 {
        self.families
            .iter()
            .map(|fam| fam.iter().map(|l| l.apply(s, p, hess)).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn rescaled(&self, d: f64) -> SupInfOp {
        let families = self
            .families
            .iter()
            .map(|fam| {
                fam.iter()
                    .map(|l| ConstLinear { a: l.a.clone(), b: &l.b * d, c: l.c * d * d })
                    .collect()
            })
            .collect();
        SupInfOp { dim: self.dim, families }
    }
}

/// Constants a user may declare for a callable operator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredBounds {
    pub lambda: Option<f64>,
    pub lambda_growth: Option<f64>,
    pub gamma: Option<f64>,
}

pub type OperatorFn = dyn Fn(&EvalPoint) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct CallableOp {
    pub dim: usize,
    pub name: String,
    pub eval: Arc<OperatorFn>,
    pub declared: DeclaredBounds,
}

impl fmt::Debug for CallableOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CallableOp")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .field("declared", &self.declared)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum OperatorSpec {
    Linear(LinearOp),
    SupInf(SupInfOp),
    Callable(CallableOp),
}

impl From<LinearOp> for OperatorSpec {
    fn from(l: LinearOp) -> Self {
        OperatorSpec::Linear(l)
    }
}

impl From<SupInfOp> for OperatorSpec {
    fn from(s: SupInfOp) -> Self {
        OperatorSpec::SupInf(s)
    }
}

impl OperatorSpec {
    pub fn dim(&self) -> usize {
        match self {
            OperatorSpec::Linear(l) => l.dim,
            OperatorSpec::SupInf(s) => s.dim,
            OperatorSpec::Callable(c) => c.dim,
        }
    }

    pub fn callable(dim: usize, name: &str, f: impl Fn(&EvalPoint) -> f64 + Send + Sync + 'static) -> Self {
        OperatorSpec::Callable(CallableOp {
            dim,
            name: name.to_string(),
            eval: Arc::new(f),
            declared: DeclaredBounds::default(),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            OperatorSpec::Linear(_) => "linear",
            OperatorSpec::SupInf(_) => "sup-inf",
            OperatorSpec::Callable(_) => "callable",
        }
    }
}

fn check_point(op: &OperatorSpec, pt: &EvalPoint) -> Result<(), OperatorError> {
    let n = op.dim();
    for got in [pt.x.len(), pt.p.len(), pt.hess.nrows(), pt.hess.ncols()] {
        if got != n {
            return Err(OperatorError::DimensionMismatch { expected: n, got });
        }
    }
    Ok(())
}

/// `F(x, s, p, X)`.
pub fn evaluate(op: &OperatorSpec, pt: &EvalPoint) -> Result<f64, OperatorError> {
    check_point(op, pt)?;
    let v = match op {
        OperatorSpec::Linear(l) => l.coefficients(pt.x.as_slice())?.apply(pt.s, &pt.p, &pt.hess),
        OperatorSpec::SupInf(s) => s.apply(pt.s, &pt.p, &pt.hess),
        OperatorSpec::Callable(c) => (c.eval)(pt),
    };
    if !v.is_finite() {
        return Err(OperatorError::NonFiniteCoefficient { what: "operator value".into(), x: pt.x.iter().copied().collect() });
    }
    Ok(v)
}

/// `[F(x,s,p,X + tD) − F(x,s,p,X)] / t`.
pub fn difference_quotient_dir(
    op: &OperatorSpec,
    pt: &EvalPoint,
    d: &DMatrix<f64>,
    t: f64,
) -> Result<f64, OperatorError> {
    if !(t > 0.0) {
        return Err(OperatorError::Invalid(format!("increment t = {t} must be positive")));
    }
    let base = evaluate(op, pt)?;
    let bumped = evaluate(op, &pt.with_hess(&pt.hess + d * t))?;
    Ok((bumped - base) / t)
}

/// Closed-form structure constants at one point, available for the linear and
/// sup-inf-of-linear variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointBounds {
    /// Lower bound of the quotient along `ν ⊗ ν`.
    pub lambda: f64,
    /// Upper bound of the quotient along `Q`.
    pub big_lambda: f64,
    /// Lipschitz bound in `p`.
    pub gamma: f64,
    /// Upper bound of the one-sided `s` quotient.
    pub c_upper: f64,
    /// Smallest eigenvalue over the coefficient matrices (uniform ellipticity).
    pub min_eig: f64,
}

pub fn analytic_bounds(
    op: &OperatorSpec,
    x: &[f64],
    nu: &DVector<f64>,
    q: &DMatrix<f64>,
) -> Result<Option<PointBounds>, OperatorError> {
    let bound_of = |c: &Coefficients| PointBounds {
        lambda: (nu.transpose() * &c.a * nu)[(0, 0)],
        big_lambda: (&c.a * q).trace(),
        gamma: c.b.norm(),
        c_upper: c.c,
        min_eig: min_eigenvalue(&c.a),
    };
    Ok(match op {
        OperatorSpec::Linear(l) => Some(bound_of(&l.coefficients(x)?)),
        OperatorSpec::SupInf(s) => {
            let mut acc = PointBounds {
                lambda: f64::INFINITY,
                big_lambda: f64::NEG_INFINITY,
                gamma: 0.0,
                c_upper: f64::NEG_INFINITY,
                min_eig: f64::INFINITY,
            };
            for l in s.families.iter().flatten() {
                let b = bound_of(&l.as_coefficients());
                acc.lambda = acc.lambda.min(b.lambda);
                acc.big_lambda = acc.big_lambda.max(b.big_lambda);
                acc.gamma = acc.gamma.max(b.gamma);
                acc.c_upper = acc.c_upper.max(b.c_upper);
                acc.min_eig = acc.min_eig.min(b.min_eig);
            }
            Some(acc)
        }
        OperatorSpec::Callable(_) => None,
    })
}

/// Lower bound on the uniform ellipticity constant at `x`, when available in closed form.
pub fn ellipticity_lower_bound(op: &OperatorSpec, x: &[f64]) -> Result<Option<f64>, OperatorError> {
    Ok(match op {
        OperatorSpec::Linear(l) => Some(min_eigenvalue(&l.coefficients(x)?.a)),
        OperatorSpec::SupInf(s) => Some(
            s.families
                .iter()
                .flatten()
                .map(|l| min_eigenvalue(&l.a))
                .fold(f64::INFINITY, f64::min),
        ),
        OperatorSpec::Callable(_) => None,
    })
}

/// Properties a preset declares about itself; property tests key off these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declared {
    pub degenerate_elliptic: bool,
    pub s_monotone: bool,
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub operator: OperatorSpec,
    pub domain: CylinderSpec,
    pub lattice: Option<LatticeSpec>,
    pub declared: Declared,
}

/// Optional knobs for presets. Unset fields take the registry defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PresetParams {
    /// Ambient dimension (`linear_mixed`).
    pub n: Option<usize>,
    /// Number of bounded directions (`linear_mixed`).
    pub k: Option<usize>,
    /// Slab width (`linear_mixed`, `bellman_isaacs_demo`).
    pub width: Option<f64>,
    /// Drift field (`linear_mixed`).
    pub b: Option<Vec<Expr>>,
    /// Zero-order coefficient (`linear_mixed`).
    pub c: Option<Expr>,
    /// Diagonal coefficients λ1, λ2, λ3 (`three_cylinders`).
    pub lambdas: Option<Vec<Expr>>,
    /// Which of C1, C2, C3 to return as the domain (`three_cylinders`, 1-based).
    pub axis: Option<usize>,
}

pub const PRESET_NAMES: [(&str, &str); 5] = [
    ("linear_mixed", "Tr(diag(I_k, |x| I_{n-k}) X) + b.p + c s on {0 <= x_h <= d, h <= k}"),
    ("c1_degenerate", "u_x1x1 + u_x2x2 on C1 = R x (0,pi)^2 (growth counterexample)"),
    ("quadratic_growth", "u_x1x1 + 0.5 x2^2 u_x2x2 on (0,pi) x R (orthogonal growth counterexample)"),
    ("three_cylinders", "sum lambda_i(x) u_xixi on C1, C2, C3 and their union"),
    ("bellman_isaacs_demo", "2x2 sup-inf family of constant-coefficient operators on (0,1) x R"),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESET_NAMES.iter().map(|p| p.0).collect()
}

pub fn preset(name: &str, params: &PresetParams) -> Result<Preset, OperatorError> {
    match name {
        "linear_mixed" => {
            let n = params.n.unwrap_or(3);
            let k = params.k.unwrap_or(2);
            if n < 2 || k == 0 || k >= n {
                return Err(OperatorError::Invalid(format!("linear_mixed needs 1 <= k < n, got n={n}, k={k}")));
            }
            let d = params.width.unwrap_or(1.0);
            let diag = (0..n).map(|i| if i < k { Expr::Const(1.0) } else { Expr::Norm }).collect();
            let mut op = LinearOp::diagonal(diag)?;
            if let Some(b) = &params.b {
                op = op.with_drift(b.clone())?;
            }
            if let Some(c) = &params.c {
                op = op.with_zeroth_order(c.clone())?;
            }
            let axes: Vec<usize> = (0..k).collect();
            let domain = CylinderSpec::axis_aligned(n, &axes, &vec![0.0; k], &vec![d; k])?;
            Ok(Preset {
                name: "linear_mixed",
                operator: op.into(),
                domain,
                lattice: None,
                declared: Declared { degenerate_elliptic: true, s_monotone: params.c.is_none() },
            })
        }
        "c1_degenerate" => {
            let op = LinearOp::diagonal(vec![Expr::Const(1.0), Expr::Const(1.0), Expr::Const(0.0)])?;
            let domain = CylinderSpec::axis_aligned(3, &[1, 2], &[0.0, 0.0], &[PI, PI])?;
            Ok(Preset {
                name: "c1_degenerate",
                operator: op.into(),
                domain,
                lattice: None,
                declared: Declared { degenerate_elliptic: true, s_monotone: true },
            })
        }
        "quadratic_growth" => {
            let op = LinearOp::diagonal(vec![Expr::Const(1.0), Expr::parse("0.5*x2^2")?])?;
            let domain = CylinderSpec::axis_aligned(2, &[0], &[0.0], &[PI])?;
            Ok(Preset {
                name: "quadratic_growth",
                operator: op.into(),
                domain,
                lattice: None,
                declared: Declared { degenerate_elliptic: true, s_monotone: true },
            })
        }
        "three_cylinders" => {
            let lambdas = match &params.lambdas {
                Some(l) if l.len() == 3 => l.clone(),
                Some(l) => return Err(OperatorError::DimensionMismatch { expected: 3, got: l.len() }),
                None => vec![Expr::parse("1 + 0.5*norm")?; 3],
            };
            let op = LinearOp::diagonal(lambdas)?;
            let cylinders: Vec<CylinderSpec> = (0..3)
                .map(|axis| {
                    let bounded: Vec<usize> = (0..3).filter(|&j| j != axis).collect();
                    CylinderSpec::axis_aligned(3, &bounded, &[0.0, 0.0], &[PI, PI])
                })
                .collect::<Result<_, _>>()?;
            let axis = params.axis.unwrap_or(1);
            if !(1..=3).contains(&axis) {
                return Err(OperatorError::Invalid(format!("axis must be 1, 2 or 3, got {axis}")));
            }
            Ok(Preset {
                name: "three_cylinders",
                operator: op.into(),
                domain: cylinders[axis - 1].clone(),
                lattice: Some(LatticeSpec::new(cylinders)?),
                declared: Declared { degenerate_elliptic: true, s_monotone: true },
            })
        }
        "bellman_isaacs_demo" => {
            let d = params.width.unwrap_or(1.0);
            let cross = ConstLinear::new(
                DMatrix::from_row_slice(2, 2, &[1.2, 0.1, 0.1, 0.6]),
                DVector::from_vec(vec![0.3, 0.1]),
                0.0,
            )?;
            let families = vec![
                vec![
                    ConstLinear::diag(&[1.0, 0.5], &[0.2, 0.0], 0.0),
                    ConstLinear::diag(&[2.0, 0.25], &[-0.1, 0.3], -0.5),
                ],
                vec![ConstLinear::diag(&[1.5, 1.0], &[0.0, -0.2], -1.0), cross],
            ];
            let op = SupInfOp::new(families)?;
            let domain = CylinderSpec::axis_aligned(2, &[0], &[0.0], &[d])?;
            Ok(Preset {
                name: "bellman_isaacs_demo",
                operator: op.into(),
                domain,
                lattice: None,
                declared: Declared { degenerate_elliptic: true, s_monotone: true },
            })
        }
        other => Err(OperatorError::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::outer;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn linear_mixed_at_norm_five() {
        let p = preset("linear_mixed", &PresetParams::default()).unwrap();
        let pt = EvalPoint::new(&[0.0, 0.0, 5.0], 0.0, &[0.0; 3], diag(&[1.0, 1.0, 1.0]));
        assert_eq!(evaluate(&p.operator, &pt).unwrap(), 7.0);
    }

    #[test]
    fn linear_mixed_on_q_block() {
        let p = preset("linear_mixed", &PresetParams::default()).unwrap();
        let x = [6.0, 0.0, 8.0];
        let pt = EvalPoint::new(&x, 0.0, &[0.0; 3], diag(&[0.0, 0.0, 1.0]));
        assert_eq!(evaluate(&p.operator, &pt).unwrap(), 10.0);
    }

    #[test]
    fn supinf_single_laplacian() {
        let op: OperatorSpec = SupInfOp::new(vec![vec![ConstLinear::diag(&[1.0, 1.0], &[0.0, 0.0], 0.0)]])
            .unwrap()
            .into();
        let pt = EvalPoint::new(&[0.3, 0.4], 0.0, &[0.0, 0.0], diag(&[2.0, 3.0]));
        assert_eq!(evaluate(&op, &pt).unwrap(), 5.0);
    }

    #[test]
    fn c1_degenerate_traces_leading_block() {
        let p = preset("c1_degenerate", &PresetParams::default()).unwrap();
        let pt = EvalPoint::new(&[1.0, 1.0, 1.0], 0.0, &[0.0; 3], diag(&[1.0, 1.0, 0.0]));
        assert_eq!(evaluate(&p.operator, &pt).unwrap(), 2.0);
    }

    #[test]
    fn quadratic_growth_substitution() {
        let p = preset("quadratic_growth", &PresetParams::default()).unwrap();
        let pt = EvalPoint::new(&[1.0, 4.0], 0.0, &[0.0; 2], diag(&[0.0, 1.0]));
        assert_eq!(evaluate(&p.operator, &pt).unwrap(), 8.0);
    }

    #[test]
    fn quotients_for_linear_mixed() {
        let p = preset("linear_mixed", &PresetParams::default()).unwrap();
        let nu = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let x = [0.3, 0.2, 48.87];
        let pt = EvalPoint::origin_at(&x);
        for t in [1.0, 1e-2, 1e-4] {
            let q = difference_quotient_dir(&p.operator, &pt, &outer(&nu, &nu), t).unwrap();
            assert!((q - 1.0).abs() < 1e-10);
        }
        let x = [0.0, 0.0, 7.0];
        let pt = EvalPoint::origin_at(&x);
        let q = difference_quotient_dir(&p.operator, &pt, &diag(&[0.0, 0.0, 1.0]), 0.5).unwrap();
        assert!((q - 7.0).abs() < 1e-12);
    }

    #[test]
    fn zero_argument_gives_zero() {
        for name in preset_names() {
            let p = preset(name, &PresetParams::default()).unwrap();
            let n = p.operator.dim();
            let x: Vec<f64> = (0..n).map(|i| 0.7 + i as f64).collect();
            assert_eq!(evaluate(&p.operator, &EvalPoint::origin_at(&x)).unwrap(), 0.0, "{name}");
        }
    }

    #[test]
    fn unknown_preset_and_dimension_errors() {
        assert!(matches!(preset("nope", &PresetParams::default()), Err(OperatorError::UnknownPreset(_))));
        let op: OperatorSpec = LinearOp::laplacian(2).into();
        let pt = EvalPoint::origin_at(&[1.0, 2.0, 3.0]);
        assert!(matches!(evaluate(&op, &pt), Err(OperatorError::DimensionMismatch { .. })));
    }

    #[test]
    fn non_finite_coefficient_is_reported() {
        let op: OperatorSpec = LinearOp::diagonal(vec![Expr::parse("1/x1").unwrap(), Expr::Const(1.0)])
            .unwrap()
            .into();
        let pt = EvalPoint::new(&[0.0, 1.0], 0.0, &[0.0, 0.0], diag(&[1.0, 1.0]));
        assert!(matches!(evaluate(&op, &pt), Err(OperatorError::NonFiniteCoefficient { .. })));
    }

    #[test]
    fn rescaled_linear_matches_direct_substitution() {
        let op = LinearOp::diagonal(vec![Expr::Const(1.0), Expr::Norm])
            .unwrap()
            .with_drift(vec![Expr::parse("x2").unwrap(), Expr::Const(0.5)])
            .unwrap()
            .with_zeroth_order(Expr::parse("-x1^2").unwrap())
            .unwrap();
        let d = 2.0;
        let g = op.rescaled(d);
        let y = [0.3, -1.7];
        let x: Vec<f64> = y.iter().map(|v| v * d).collect();
        let p = DVector::from_vec(vec![0.4, -0.9]);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, -3.0]);
        let lhs = g.coefficients(&y).unwrap().apply(0.7, &p, &m);
        let rhs = d * d * op.coefficients(&x).unwrap().apply(0.7, &(&p / d), &(&m / (d * d)));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn linear_op_serde_uses_expression_strings() {
        let op = LinearOp::diagonal(vec![Expr::Const(1.0), Expr::parse("0.5*x2^2").unwrap()]).unwrap();
        let json = serde_json::to_string(&op).unwrap();
        assert!(json.contains("((0.5 * (x2 ^ 2.0)))") || json.contains("(0.5 * (x2 ^ 2.0))"));
        let back: LinearOp = serde_json::from_str(&json).unwrap();
        assert_eq!(back, op);
    }
}
