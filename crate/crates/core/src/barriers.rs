//! Explicit barrier families with hand-coded derivatives, and the parameter
//! solvers that make their differential inequalities hold.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CylinderSpec, ProjectionPair};
use crate::linalg::{min_eigenvalue, outer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("negative input: {0}")]
    NegativeInput(String),
    #[error("K = {0} must be strictly positive")]
    NonPositiveK(f64),
    #[error("cos(alpha d / 2) = {0:.3e} is too close to zero")]
    CosineDegenerate(f64),
    #[error("bad barrier parameters: {0}")]
    BadParams(String),
    #[error("no admissible width for alpha = {alpha}, beta = {beta}")]
    NoAdmissibleWidth { alpha: f64, beta: f64 },
}

/// A function with closed-form first and second derivatives.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn unbounded_component(bounded: &[Vec<f64>], x: &[f64]) -> DVector<f64> {
    let mut z = dvec(x);
    for v in bounded {
        let v = dvec(v);
        let c = v.dot(&z);
        z -= v * c;
    }
    z
}

fn projection_q(bounded: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::identity(n, n);
    for v in bounded {
        let v = dvec(v);
        q -= outer(&v, &v);
    }
    q
}

/// The four barrier families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BarrierFamily {
    /// `φ(x) = sqrt(|Qx|² + 1)`.
    Sponge { bounded: Vec<Vec<f64>> },
    /// `M(1 + e^{−αd}) − M e^{α(x·ν − x') − αd}`.
    ExpDir { m: f64, alpha: f64, d: f64, xprime: f64, nu: Vec<f64> },
    /// `C₁ e^{α(x·ν − a)}`.
    AbpAux { c1: f64, alpha: f64, nu: Vec<f64>, offset: f64 },
    /// `sin(α y) e^{βφ(r)}` with `y = x·ν^h − shift`, `r = |Qx|`, `φ(r) = sqrt(r² + 1)`.
    Pl { alpha: f64, beta: f64, bounded: Vec<Vec<f64>>, h: usize, shift: f64 },
}

impl BarrierFamily {
    pub fn sponge(dom: &CylinderSpec) -> Self {
        BarrierFamily::Sponge { bounded: dom.dirs().iter().map(|v| v.iter().copied().collect()).collect() }
    }

    /// Phragmén–Lindelöf barrier on `dom` along bounded direction `h`, shifted so
    /// that the centre of the slab maps to the crest `α y = π/2`.
    pub fn pl(dom: &CylinderSpec, h: usize, alpha: f64, beta: f64) -> Result<Self, BarrierError> {
        if !(alpha > 0.0) || !(beta > 0.0) {
            return Err(BarrierError::BadParams(format!("alpha = {alpha}, beta = {beta} must be positive")));
        }
        if h >= dom.bounded_count() {
            return Err(BarrierError::BadParams(format!("direction index {h} out of range")));
        }
        let centre = dom.offsets()[h] + 0.5 * dom.widths()[h];
        Ok(BarrierFamily::Pl {
            alpha,
            beta,
            bounded: dom.dirs().iter().map(|v| v.iter().copied().collect()).collect(),
            h,
            shift: centre - PI / (2.0 * alpha),
        })
    }

    pub fn abp_aux(c1: f64, alpha: f64, nu: &DVector<f64>, offset: f64) -> Result<Self, BarrierError> {
        if !(c1 >= 0.0) || !(alpha > 0.0) {
            return Err(BarrierError::BadParams(format!("C1 = {c1} and alpha = {alpha}")));
        }
        Ok(BarrierFamily::AbpAux { c1, alpha, nu: nu.iter().copied().collect(), offset })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BarrierFamily::Sponge { .. } => "sponge",
            BarrierFamily::ExpDir { .. } => "exp_dir",
            BarrierFamily::AbpAux { .. } => "abp_aux",
            BarrierFamily::Pl { .. } => "pl",
        }
    }

    /// Lower bound of `h_ε` over the slab `|x·ν − x'| ≤ d`.
    pub fn slab_lower_bound(&self) -> Option<f64> {
        match self {
            BarrierFamily::ExpDir { m, alpha, d, .. } => Some(m * (-2.0 * alpha * d).exp()),
            _ => None,
        }
    }

    /// `e^{−βφ} D²v` for the PL family, computed without forming `e^{βφ}`.
    pub fn pl_scaled_hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let BarrierFamily::Pl { alpha, beta, bounded, h, shift } = self else {
            return None;
        };
        let n = x.len();
        let nu = dvec(&bounded[*h]);
        let y = nu.dot(&dvec(x)) - shift;
        let z = unbounded_component(bounded, x);
        let phi = (z.norm_squared() + 1.0).sqrt();
        let dphi = &z / phi;
        let q = projection_q(bounded, n);
        let d2phi = &q / phi - outer(&z, &z) / phi.powi(3);
        let (s, c) = (alpha * y).sin_cos();
        let mut m = outer(&nu, &nu) * (-alpha * alpha * s);
        let cross = outer(&nu, &dphi) + outer(&dphi, &nu);
        m += cross * (alpha * beta * c);
        m += (outer(&dphi, &dphi) * (beta * beta) + d2phi * *beta) * s;
        Some(m)
    }
}

impl SmoothFunction for BarrierFamily {
    fn dim(&self) -> usize {
        match self {
            BarrierFamily::Sponge { bounded } | BarrierFamily::Pl { bounded, .. } => bounded[0].len(),
            BarrierFamily::ExpDir { nu, .. } | BarrierFamily::AbpAux { nu, .. } => nu.len(),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            BarrierFamily::Sponge { bounded } => (unbounded_component(bounded, x).norm_squared() + 1.0).sqrt(),
            BarrierFamily::ExpDir { m, alpha, d, xprime, nu } => {
                let xp = dvec(nu).dot(&dvec(x));
                m * (1.0 + (-alpha * d).exp()) - m * (alpha * (xp - xprime) - alpha * d).exp()
            }
            BarrierFamily::AbpAux { c1, alpha, nu, offset } => c1 * (alpha * (dvec(nu).dot(&dvec(x)) - offset)).exp(),
            BarrierFamily::Pl { alpha, beta, bounded, h, shift } => {
                let y = dvec(&bounded[*h]).dot(&dvec(x)) - shift;
                let phi = (unbounded_component(bounded, x).norm_squared() + 1.0).sqrt();
                (alpha * y).sin() * (beta * phi).exp()
            }
        }
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        match self {
            BarrierFamily::Sponge { bounded } => {
                let z = unbounded_component(bounded, x);
                let phi = (z.norm_squared() + 1.0).sqrt();
                z / phi
            }
            BarrierFamily::ExpDir { m, alpha, d, xprime, nu } => {
                let nu = dvec(nu);
                let e = (alpha * (nu.dot(&dvec(x)) - xprime) - alpha * d).exp();
                nu * (-alpha * m * e)
            }
            BarrierFamily::AbpAux { c1, alpha, nu, offset } => {
                let nu = dvec(nu);
                let e = (alpha * (nu.dot(&dvec(x)) - offset)).exp();
                nu * (alpha * c1 * e)
            }
            BarrierFamily::Pl { alpha, beta, bounded, h, shift } => {
                let nu = dvec(&bounded[*h]);
                let y = nu.dot(&dvec(x)) - shift;
                let z = unbounded_component(bounded, x);
                let phi = (z.norm_squared() + 1.0).sqrt();
                let ebp = (beta * phi).exp();
                let (s, c) = (alpha * y).sin_cos();
                nu * (alpha * c * ebp) + z * (s * ebp * beta / phi)
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        match self {
            BarrierFamily::Sponge { bounded } => {
                let z = unbounded_component(bounded, x);
                let phi = (z.norm_squared() + 1.0).sqrt();
                projection_q(bounded, n) / phi - outer(&z, &z) / phi.powi(3)
            }
            BarrierFamily::ExpDir { m, alpha, d, xprime, nu } => {
                let nu = dvec(nu);
                let e = (alpha * (nu.dot(&dvec(x)) - xprime) - alpha * d).exp();
                outer(&nu, &nu) * (-alpha * alpha * m * e)
            }
            BarrierFamily::AbpAux { c1, alpha, nu, offset } => {
                let nu = dvec(nu);
                let e = (alpha * (nu.dot(&dvec(x)) - offset)).exp();
                outer(&nu, &nu) * (alpha * alpha * c1 * e)
            }
            BarrierFamily::Pl { beta, bounded, .. } => {
                let phi = (unbounded_component(bounded, x).norm_squared() + 1.0).sqrt();
                self.pl_scaled_hessian(x).expect("pl family") * (beta * phi).exp()
            }
        }
    }
}

/// `|Dφ(x)|` and the smallest eigenvalue of `Q/φ(x) − D²φ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpongeBounds {
    pub grad_norm: f64,
    pub hessian_gap: f64,
}

pub fn sponge_bounds(x: &[f64], pair: &ProjectionPair) -> SpongeBounds {
    let z = &pair.q * dvec(x);
    let phi = (z.norm_squared() + 1.0).sqrt();
    let d2 = &pair.q / phi - outer(&z, &z) / phi.powi(3);
    SpongeBounds { grad_norm: z.norm() / phi, hessian_gap: min_eigenvalue(&(&pair.q / phi - d2)) }
}

pub fn exp_dir_barrier(m_eps: f64, alpha: f64, d: f64, xprime_eps: f64, nu: &DVector<f64>) -> Result<BarrierFamily, BarrierError> {
    if !(m_eps > 0.0) || !(alpha > 0.0) || !(d > 0.0) || !xprime_eps.is_finite() {
        return Err(BarrierError::BadParams(format!("M = {m_eps}, alpha = {alpha}, d = {d}")));
    }
    if (nu.norm() - 1.0).abs() > 1e-12 {
        return Err(BarrierError::BadParams("direction must be a unit vector".into()));
    }
    Ok(BarrierFamily::ExpDir { m: m_eps, alpha, d, xprime: xprime_eps, nu: nu.iter().copied().collect() })
}

fn non_negative(name: &str, v: f64) -> Result<(), BarrierError> {
    if !(v >= 0.0) {
        return Err(BarrierError::NegativeInput(format!("{name} = {v}")));
    }
    Ok(())
}

/// `α = 1 + Γ`, `C₁ = sup(f⁻/λ)/(1 + Γ)`.
pub fn abp_params(gamma: f64, sup_f_over_lambda: f64) -> Result<(f64, f64), BarrierError> {
    non_negative("Gamma", gamma)?;
    non_negative("sup f-/lambda", sup_f_over_lambda)?;
    let alpha = 1.0 + gamma;
    Ok((alpha, sup_f_over_lambda / alpha))
}

/// `e^{1+dΓ}/(1+dΓ)`.
pub fn abp_constant(d_h: f64, gamma: f64) -> f64 {
    let a = 1.0 + d_h * gamma;
    a.exp() / a
}

pub fn abp_bound(d_h: f64, gamma: f64, sup_f_over_lambda: f64, sup_boundary_uplus: f64) -> Result<f64, BarrierError> {
    if !(d_h > 0.0) {
        return Err(BarrierError::NegativeInput(format!("width d = {d_h} must be positive")));
    }
    non_negative("Gamma", gamma)?;
    non_negative("sup f-/lambda", sup_f_over_lambda)?;
    non_negative("sup boundary u+", sup_boundary_uplus)?;
    if sup_f_over_lambda == 0.0 {
        return Ok(sup_boundary_uplus);
    }
    Ok(sup_boundary_uplus + abp_constant(d_h, gamma) * sup_f_over_lambda * d_h * d_h)
}

/// Largest `d` with `e^{1+dΓ}/(1+dΓ) d² K < 1`. Returns `+∞` when no finite
/// bracket exists in floating point (tiny `K`).
pub fn narrow_threshold(gamma: f64, k: f64) -> Result<f64, BarrierError> {
    non_negative("Gamma", gamma)?;
    if !(k > 0.0) {
        return Err(BarrierError::NonPositiveK(k));
    }
    let lhs = |d: f64| abp_constant(d, gamma) * d * d * k;
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while lhs(hi) < 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(f64::INFINITY);
        }
    }
    // bisect down to adjacent floating-point numbers
    for _ in 0..2100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lhs(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `−α²/2 + 2ρβ(β+1) + Γ(α+β)`; the PL barrier needs this to be `≤ 0`.
pub fn pl_margin(alpha: f64, beta: f64, rho: f64, gamma: f64) -> f64 {
    -0.5 * alpha * alpha + 2.0 * rho * beta * (beta + 1.0) + gamma * (alpha + beta)
}

/// Positive root of `α²/2 − Γα − (2ρβ(β+1) + Γβ) = 0`.
pub fn pl_alpha_root(beta: f64, rho: f64, gamma: f64) -> f64 {
    gamma + (gamma * gamma + 4.0 * rho * beta * (beta + 1.0) + 2.0 * gamma * beta).sqrt()
}

/// Relative inflation applied to the root to make the margin strict.
pub const PL_ALPHA_INFLATION: f64 = 1e-9;

/// Dense-sweep resolution used to certify a PL width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    pub x_points: usize,
    pub r_points: usize,
    pub r_max: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { x_points: 10_000, r_points: 200, r_max: 1e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlOptions {
    /// `β = beta_factor · β₀`.
    pub beta_factor: f64,
    pub sweep: SweepOptions,
}

impl Default for PlOptions {
    fn default() -> Self {
        PlOptions { beta_factor: 1.1, sweep: SweepOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthCertificate {
    pub alpha: f64,
    pub beta: f64,
    /// Width predicted by the reduced two-dimensional constraint.
    pub candidate: f64,
    pub d0: f64,
    /// Smallest eigenvalue margin over the sweep (must be `≥ 0`).
    pub worst_margin: f64,
    /// `(y, r)` where the worst margin occurs; `y` is measured from the crest.
    pub witness: (f64, f64),
    pub x_points: usize,
    pub r_points: usize,
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PLParams {
    pub beta0: f64,
    pub beta: f64,
    /// Exact positive root of the quadratic.
    pub alpha_root: f64,
    /// Root inflated by [`PL_ALPHA_INFLATION`]; the value used by the barrier.
    pub alpha: f64,
    pub d_width: f64,
    pub rho: f64,
    pub gamma: f64,
    /// `−α²/2 + 2ρβ(β+1) + Γ(α+β)` at the chosen `α`.
    pub margin: f64,
    pub width: WidthCertificate,
}

/// Smallest eigenvalue of `−½α² ν⊗ν + 2β(β+1)Q − e^{−βφ}D²v` restricted to the
/// plane of `ν` and `Qx/|Qx|`, together with the tangential directions of `U^⊥`,
/// at offset `y` from the crest and radius `r`. Divided by `α²` in the `ν` row.
pub fn pl_plane_margin(alpha: f64, beta: f64, y: f64, r: f64) -> f64 {
    let phi = (r * r + 1.0).sqrt();
    let theta = alpha * y + 0.5 * PI;
    let (s, c) = theta.sin_cos();
    let t = r / phi;
    let m_nn = -alpha * alpha * s;
    let m_ne = alpha * beta * c * t;
    let m_ee = s * (beta * beta * t * t + beta / phi.powi(3));
    let a = -0.5 * alpha * alpha - m_nn;
    let b = -m_ne;
    let d = 2.0 * beta * (beta + 1.0) - m_ee;
    let half_tr = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let plane = half_tr - rad;
    let tangential = 2.0 * beta * (beta + 1.0) - s * beta / phi;
    plane.min(tangential)
}

/// Reduced constraint with `s = cos δ`, `c = sin δ`, `t = r²/φ²`:
/// `(s − ½)(2β(β+1) − sβ(βt + (1−t)^{3/2})) − β²c²t`.
fn reduced_constraint(beta: f64, delta: f64, t: f64) -> f64 {
    let (c, s) = delta.sin_cos();
    (s - 0.5) * (2.0 * beta * (beta + 1.0) - s * beta * (beta * t + (1.0 - t).powf(1.5))) - beta * beta * c * c * t
}

fn delta_star(beta: f64, t: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, PI / 3.0);
    if reduced_constraint(beta, hi, t) >= 0.0 {
        return hi;
    }
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if reduced_constraint(beta, mid, t) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Half-angle `min_t δ*(t)`: the largest `|αy − π/2|` at which the reduced
/// constraint holds for every `t ∈ [0,1]`. Independent of `α`.
pub fn pl_half_angle(beta: f64) -> f64 {
    let grid = 1000;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..=grid {
        let v = delta_star(beta, i as f64 / grid as f64);
        if v < best.0 {
            best = (v, i);
        }
    }
    let (mut a, mut b) = (
        (best.1.saturating_sub(1)) as f64 / grid as f64,
        ((best.1 + 1).min(grid)) as f64 / grid as f64,
    );
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if delta_star(beta, c) < delta_star(beta, d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.0.min(delta_star(beta, 0.5 * (a + b))).min(delta_star(beta, 1.0))
}

/// Safety shrink applied to the analytic width before sweeping.
pub const WIDTH_SHRINK: f64 = 1e-7;

fn analytic_width(alpha: f64, beta: f64) -> f64 {
    2.0 * pl_half_angle(beta) / alpha
}

fn sweep(alpha: f64, beta: f64, d0: f64, opts: &SweepOptions) -> (f64, (f64, f64)) {
    let nx = opts.x_points.max(2);
    let nr = opts.r_points.max(2);
    let mut rs = vec![0.0];
    let (l0, l1) = (1e-6_f64.ln(), opts.r_max.ln());
    rs.extend((0..nr).map(|j| (l0 + (l1 - l0) * j as f64 / (nr - 1) as f64).exp()));
    let results: Vec<(f64, (f64, f64))> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let y = -0.5 * d0 + d0 * i as f64 / (nx - 1) as f64;
            let mut worst = (f64::INFINITY, (y, 0.0));
            for &r in &rs {
                let m = pl_plane_margin(alpha, beta, y, r);
                if m < worst.0 {
                    worst = (m, (y, r));
                }
            }
            worst
        })
        .collect();
    results.into_iter().fold((f64::INFINITY, (0.0, 0.0)), |acc, v| if v.0 < acc.0 { v } else { acc })
}

/// Largest certified width `d₀ < π/α` on which the PL barrier Hessian satisfies
/// `e^{−βφ}D²v ≤ −½α²P_h + 2β(β+1)Q`.
pub fn width_from_alpha(alpha: f64, beta: f64, opts: &SweepOptions) -> Result<WidthCertificate, BarrierError> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(BarrierError::BadParams(format!("alpha = {alpha}, beta = {beta} must be positive")));
    }
    let candidate = analytic_width(alpha, beta);
    let floor = 1e-9 * PI / alpha;
    let mut d0 = candidate * (1.0 - WIDTH_SHRINK);
    while d0 >= floor {
        let (worst, witness) = sweep(alpha, beta, d0, opts);
        if worst >= 0.0 {
            return Ok(WidthCertificate {
                alpha,
                beta,
                candidate,
                d0,
                worst_margin: worst,
                witness,
                x_points: opts.x_points,
                r_points: opts.r_points,
                r_max: opts.r_max,
            });
        }
        d0 *= 0.999;
    }
    Err(BarrierError::NoAdmissibleWidth { alpha, beta })
}

fn check_pl_inputs(beta0: f64, rho: f64, gamma: f64, factor: f64) -> Result<(), BarrierError> {
    if !(beta0 > 0.0) || !(rho > 0.0) || !(factor > 1.0) {
        return Err(BarrierError::BadParams(format!("beta0 = {beta0}, rho = {rho}, beta factor = {factor}")));
    }
    non_negative("Gamma", gamma)
}

pub fn pl_solve(beta0: f64, rho: f64, gamma: f64) -> Result<PLParams, BarrierError> {
    pl_solve_with(beta0, rho, gamma, &PlOptions::default())
}

pub fn pl_solve_with(beta0: f64, rho: f64, gamma: f64, opts: &PlOptions) -> Result<PLParams, BarrierError> {
    check_pl_inputs(beta0, rho, gamma, opts.beta_factor)?;
    let beta = beta0 * opts.beta_factor;
    let alpha_root = pl_alpha_root(beta, rho, gamma);
    let alpha = alpha_root * (1.0 + PL_ALPHA_INFLATION);
    let width = width_from_alpha(alpha, beta, &opts.sweep)?;
    Ok(PLParams {
        beta0,
        beta,
        alpha_root,
        alpha,
        d_width: width.d0,
        rho,
        gamma,
        margin: pl_margin(alpha, beta, rho, gamma),
        width,
    })
}

/// Width produced by [`pl_solve_with`] for a given `β`, without the sweep.
pub fn width_for_beta(beta: f64, rho: f64, gamma: f64) -> f64 {
    let alpha = pl_alpha_root(beta, rho, gamma) * (1.0 + PL_ALPHA_INFLATION);
    analytic_width(alpha, beta) * (1.0 - WIDTH_SHRINK)
}

/// Inverse direction: the `β` whose certified width equals `d0`, by bisection.
pub fn beta_for_width(d0: f64, rho: f64, gamma: f64) -> Result<f64, BarrierError> {
    if !(d0 > 0.0) || !(rho > 0.0) {
        return Err(BarrierError::BadParams(format!("d0 = {d0}, rho = {rho}")));
    }
    non_negative("Gamma", gamma)?;
    let mut lo = 1e-12;
    if width_for_beta(lo, rho, gamma) < d0 {
        return Err(BarrierError::BadParams(format!("width {d0} exceeds every admissible PL width")));
    }
    let mut hi = 1.0;
    while width_for_beta(hi, rho, gamma) > d0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(BarrierError::BadParams(format!("width {d0} too small to invert")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if width_for_beta(mid, rho, gamma) > d0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `c_R = sup u⁺ / (e^{βR} cos(αd/2))`.
pub fn pl_truncation_constant(sup_boundary_uplus_r: f64, beta: f64, r: f64, alpha: f64, d: f64) -> Result<f64, BarrierError> {
    non_negative("R", r)?;
    let cos = (0.5 * alpha * d).cos();
    if cos <= 1e-9 {
        return Err(BarrierError::CosineDegenerate(cos));
    }
    Ok(sup_boundary_uplus_r / ((beta * r).exp() * cos))
}

/// `(eK)^{−1/2}`, the `Γ = 0` threshold in closed form.
pub fn narrow_threshold_closed_form(k: f64) -> f64 {
    1.0 / (E * k).sqrt()
}
