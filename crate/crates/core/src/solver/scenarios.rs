//! Empirical scenarios built on the discrete solver.

use rand::Rng;
use serde::Serialize;

use super::{
    solve_dirichlet, Field, Grid, GridSpec, NodeKind, SolveOptions, SolveReport, SolverError,
};
use crate::expr::Expr;
use crate::geometry::{CylinderSpec, LatticeSpec};
use crate::operators::{ellipticity_lower_bound, LinearOp, OperatorSpec};
use crate::sampling::rng;

/// An MP check: `f ≥ 0` in the interior, `g ≤ 0` on every boundary node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpScenario {
    pub grid: GridSpec,
    pub forcing: Expr,
    pub boundary: Expr,
    pub tolerance: f64,
}

impl MpScenario {
    pub fn homogeneous(grid: GridSpec) -> Self {
        MpScenario { grid, forcing: Expr::constant(0.0), boundary: Expr::constant(0.0), tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MpCheck {
    pub grid: String,
    pub report: SolveReport,
    pub tolerance: f64,
    pub verdict: bool,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn sample_expr(grid: &Grid, e: &Expr) -> Vec<f64> {
    grid.sample(|x| e.eval_with(x, norm(x)))
}

pub fn empirical_mp_check(
    op: &OperatorSpec,
    dom: &CylinderSpec,
    sc: &MpScenario,
    opts: &SolveOptions,
) -> Result<(MpCheck, Field), SolverError> {
    let grid = Grid::truncated(dom, &sc.grid)?;
    let f = sample_expr(&grid, &sc.forcing);
    let g = sample_expr(&grid, &sc.boundary);
    for i in 0..grid.node_count() {
        match grid.kind(i) {
            NodeKind::Interior if f[i] < 0.0 => {
                return Err(SolverError::BadData(format!("forcing is negative at {:?}", grid.coords(i))))
            }
            NodeKind::Physical | NodeKind::Artificial if g[i] > 0.0 => {
                return Err(SolverError::BadData(format!("boundary data is positive at {:?}", grid.coords(i))))
            }
            _ => {}
        }
    }
    let (field, report) = solve_dirichlet(op, &grid, &f, &g, opts)?;
    let verdict = report.max_value <= sc.tolerance;
    Ok((MpCheck { grid: grid.description().to_string(), report, tolerance: sc.tolerance, verdict }, field))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationRow {
    pub r: f64,
    pub interior_max: f64,
    pub argmax_x: Vec<f64>,
    pub residual: f64,
}

/// Truncation-radius ladder for a scenario whose boundary data grows along the
/// unbounded directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationStudy {
    pub boundary: String,
    pub h: f64,
    pub rows: Vec<ViolationRow>,
    /// Interior maxima are positive and strictly increasing in `R`.
    pub positive_and_growing: bool,
}

pub fn growth_violation_study(
    op: &OperatorSpec,
    dom: &CylinderSpec,
    boundary: &Expr,
    h: f64,
    ladder: &[f64],
    opts: &SolveOptions,
) -> Result<ViolationStudy, SolverError> {
    let mut rows = Vec::with_capacity(ladder.len());
    for &r in ladder {
        let grid = Grid::truncated(dom, &GridSpec { h, r })?;
        let f = vec![0.0; grid.node_count()];
        let g = sample_expr(&grid, boundary);
        let (u, rep) = solve_dirichlet(op, &grid, &f, &g, opts)?;
        let (mut best, mut at) = (f64::NEG_INFINITY, 0);
        for i in grid.interior_indices() {
            if u.values[i] > best {
                best = u.values[i];
                at = i;
            }
        }
        rows.push(ViolationRow { r, interior_max: best, argmax_x: grid.coords(at), residual: rep.residual });
    }
    let positive_and_growing =
        rows.iter().all(|r| r.interior_max > 0.0) && rows.windows(2).all(|w| w[1].interior_max > w[0].interior_max);
    Ok(ViolationStudy { boundary: boundary.to_string(), h, rows, positive_and_growing })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenResidual {
    pub h: f64,
    pub residual: f64,
    pub scaled: f64,
}

/// Discrete eigen-test on the strip `(0, d) × ℝ` truncated at `|x₂| ≤ R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenTest {
    pub d: f64,
    /// `(π/d)²`.
    pub c_mode: f64,
    pub resolutions: Vec<EigenResidual>,
    /// `max residual / h²` over the ladder.
    pub constant: f64,
    pub observed_order: f64,
    /// `0.9 e^{−1} / d²`.
    pub c_below: f64,
    pub max_u_below: f64,
    pub below_verdict: bool,
    pub narrow_coefficient: f64,
    pub mode_coefficient: f64,
    pub threshold_inside: bool,
    pub seed: u64,
}

fn strip(d: f64) -> Result<CylinderSpec, SolverError> {
    Ok(CylinderSpec::axis_aligned(2, &[0], &[0.0], &[d])?)
}

pub fn narrow_eigen_test(d: f64, cells: &[usize], r: f64, seed: u64) -> Result<EigenTest, SolverError> {
    if !(d > 0.0) || cells.len() < 2 {
        return Err(SolverError::BadData("eigen test needs d > 0 and at least two resolutions".into()));
    }
    let dom = strip(d)?;
    let c_mode = (std::f64::consts::PI / d).powi(2);
    let mode_op: OperatorSpec = LinearOp::laplacian(2).with_zeroth_order(Expr::constant(c_mode))?.into();
    let mut resolutions = Vec::new();
    for &m in cells {
        let h = d / m as f64;
        let grid = Grid::truncated(&dom, &GridSpec { h, r })?;
        let disc = super::discretize_with(&mode_op, &grid, &super::DiscretizeOptions { c_limit: c_mode })?;
        let phi = grid.sample(|x| (std::f64::consts::PI * x[0] / d).sin());
        let zero = vec![0.0; grid.node_count()];
        let res = disc.residual(&phi, &zero);
        let h = grid.spacing()[0];
        resolutions.push(EigenResidual { h, residual: res, scaled: res / (h * h) });
    }
    let constant = resolutions.iter().map(|r| r.scaled).fold(0.0, f64::max);
    let (a, b) = (&resolutions[resolutions.len() - 2], &resolutions[resolutions.len() - 1]);
    let observed_order = (a.residual / b.residual).ln() / (a.h / b.h).ln();

    let c_below = 0.9 * (-1.0f64).exp() / (d * d);
    let op: OperatorSpec = LinearOp::laplacian(2).with_zeroth_order(Expr::constant(c_below))?.into();
    let h = d / *cells.last().unwrap() as f64;
    let grid = Grid::truncated(&dom, &GridSpec { h, r })?;
    let mut gen = rng(seed);
    let g: Vec<f64> = (0..grid.node_count()).map(|_| -gen.random::<f64>()).collect();
    let f = vec![0.0; grid.node_count()];
    let opts = SolveOptions { discretize: super::DiscretizeOptions { c_limit: c_below }, ..Default::default() };
    let (_, rep) = solve_dirichlet(&op, &grid, &f, &g, &opts)?;
    let narrow_coefficient = (-1.0f64).exp();
    let mode_coefficient = std::f64::consts::PI.powi(2);
    Ok(EigenTest {
        d,
        c_mode,
        resolutions,
        constant,
        observed_order,
        c_below,
        max_u_below: rep.max_value,
        below_verdict: rep.max_value <= 1e-10,
        narrow_coefficient,
        mode_coefficient,
        threshold_inside: narrow_coefficient / (d * d) < mode_coefficient / (d * d),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStudy {
    pub cells: Vec<usize>,
    pub max_u: Vec<f64>,
    /// `log₂` of successive difference ratios.
    pub orders: Vec<f64>,
}

/// `Δu = −1` on the unit square with zero boundary data, over a ladder of resolutions.
pub fn torsion_study(cells: &[usize], opts: &SolveOptions) -> Result<RefinementStudy, SolverError> {
    let op: OperatorSpec = LinearOp::laplacian(2).into();
    let mut max_u = Vec::new();
    for &m in cells {
        let grid = Grid::unit_box(2, m)?;
        let f = vec![-1.0; grid.node_count()];
        let g = vec![0.0; grid.node_count()];
        max_u.push(solve_dirichlet(&op, &grid, &f, &g, opts)?.1.max_value);
    }
    let orders = max_u
        .windows(3)
        .map(|w| ((w[1] - w[0]) / (w[2] - w[1])).abs().log2())
        .collect();
    Ok(RefinementStudy { cells: cells.to_vec(), max_u, orders })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeScenario {
    pub grid: GridSpec,
    /// Boundary value on the artificial truncation ends.
    pub end_value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum LatticeVerdict {
    Pass,
    Fail,
    OutOfHypotheses { reason: String },
}

/// Maximum over one region, restricted to interior nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionMax {
    pub region: String,
    pub value: f64,
    pub x: Vec<f64>,
    /// Sup-norm distance to the boundary of the node region.
    pub distance_to_node_boundary: f64,
    pub within_one_cell: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LatticeReport {
    pub verdict: LatticeVerdict,
    pub min_node_ellipticity: f64,
    pub solve: Option<SolveReport>,
    pub regions: Vec<RegionMax>,
    pub global_max: f64,
    pub boundary_max: f64,
    pub localized: bool,
}

fn node_box(lat: &LatticeSpec) -> (Vec<f64>, Vec<f64>) {
    let n = lat.dim();
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    for c in lat.cylinders() {
        for (h, v) in c.dirs().iter().enumerate() {
            let a = v.iamax();
            lo[a] = lo[a].max(c.offsets()[h]);
            hi[a] = hi[a].min(c.offsets()[h] + c.widths()[h]);
        }
    }
    (lo, hi)
}

fn dist_to_box_boundary(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let inside = x.iter().zip(lo).zip(hi).all(|((v, l), h)| v >= l && v <= h);
    if inside {
        x.iter().zip(lo).zip(hi).map(|((v, l), h)| (v - l).min(h - v)).fold(f64::INFINITY, f64::min)
    } else {
        x.iter().zip(lo).zip(hi).map(|((v, l), h)| (l - v).max(v - h).max(0.0)).fold(0.0, f64::max)
    }
}

/// Crossing-strip lattice: zero data on the physical boundary, `end_value` on the
/// truncation ends, `f = 0`. Reports where the maximum sits in each half-strip
/// and in the node region.
pub fn lattice_mp_scenario(
    lat: &LatticeSpec,
    op: &OperatorSpec,
    sc: &LatticeScenario,
    opts: &SolveOptions,
) -> Result<LatticeReport, SolverError> {
    if lat.dim() != 2 || lat.cylinders().iter().any(|c| c.bounded_count() != 1) {
        return Err(SolverError::Unsupported("lattice scenarios are limited to planar strips".into()));
    }
    if sc.end_value > 0.0 {
        return Err(SolverError::BadData(format!("end value {} must be <= 0", sc.end_value)));
    }
    let grid = Grid::lattice(lat, &sc.grid)?;
    let (lo, hi) = node_box(lat);

    let mut min_ell = f64::INFINITY;
    for i in 0..grid.node_count() {
        if grid.kind(i) == NodeKind::Inactive {
            continue;
        }
        let x = grid.coords(i);
        if lat.in_node_region(&x)? {
            let e = ellipticity_lower_bound(op, &x)?
                .ok_or_else(|| SolverError::Unsupported("callable operators have no coefficient form".into()))?;
            min_ell = min_ell.min(e);
        }
    }
    if !(min_ell > 1e-12) {
        return Ok(LatticeReport {
            verdict: LatticeVerdict::OutOfHypotheses {
                reason: format!("not uniformly elliptic in the node region (min eigenvalue {min_ell:.3e})"),
            },
            min_node_ellipticity: min_ell,
            solve: None,
            regions: Vec::new(),
            global_max: f64::NAN,
            boundary_max: f64::NAN,
            localized: false,
        });
    }

    let f = vec![0.0; grid.node_count()];
    let g: Vec<f64> =
        (0..grid.node_count()).map(|i| if grid.kind(i) == NodeKind::Artificial { sc.end_value } else { 0.0 }).collect();
    let (u, rep) = solve_dirichlet(op, &grid, &f, &g, opts)?;

    // region label per interior node
    let centre: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut labels: Vec<String> = vec!["node region N".to_string()];
    let mut best: Vec<Option<(f64, f64, usize)>> = vec![None];
    for (ci, c) in lat.cylinders().iter().enumerate() {
        for side in ["-", "+"] {
            let along = 1 - c.dirs()[0].iamax();
            labels.push(format!("cylinder {} half-strip x{} {} side", ci + 1, along + 1, side));
            best.push(None);
        }
    }
    let cell = grid.spacing().iter().cloned().fold(0.0, f64::max);
    for i in grid.interior_indices() {
        let x = grid.coords(i);
        let region = if lat.in_node_region(&x)? {
            0
        } else {
            let ci = lat.cylinders().iter().position(|c| c.contains(&x).unwrap_or(false)).unwrap_or(0);
            let along = 1 - lat.cylinders()[ci].dirs()[0].iamax();
            1 + 2 * ci + usize::from(x[along] > centre[along])
        };
        let dist = dist_to_box_boundary(&x, &lo, &hi);
        let v = u.values[i];
        let better = match best[region] {
            None => true,
            Some((bv, bd, _)) => v > bv || (v == bv && dist < bd),
        };
        if better {
            best[region] = Some((v, dist, i));
        }
    }
    let regions: Vec<RegionMax> = labels
        .into_iter()
        .zip(best)
        .filter_map(|(region, b)| {
            b.map(|(value, dist, i)| RegionMax {
                region,
                value,
                x: grid.coords(i),
                distance_to_node_boundary: dist,
                within_one_cell: dist <= cell * (1.0 + 1e-9),
            })
        })
        .collect();
    let localized = regions.iter().all(|r| r.within_one_cell);
    let global_max = rep.max_value;
    let boundary_max = rep.boundary_max;
    let bounded = global_max <= boundary_max + 1e-12 && global_max <= sc.tolerance;
    Ok(LatticeReport {
        verdict: if bounded && localized { LatticeVerdict::Pass } else { LatticeVerdict::Fail },
        min_node_ellipticity: min_ell,
        solve: Some(rep),
        regions,
        global_max,
        boundary_max,
        localized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{preset, PresetParams};

    #[test]
    fn linear_mixed_zero_data() {
        let p = preset("linear_mixed", &PresetParams::default()).unwrap();
        let sc = MpScenario::homogeneous(GridSpec { h: 0.25, r: 10.0 });
        let (chk, _) = empirical_mp_check(&p.operator, &p.domain, &sc, &SolveOptions::default()).unwrap();
        assert!(chk.verdict);
        assert!(chk.report.max_value.abs() <= 1e-10);
    }

    #[test]
    fn rejects_positive_boundary_data() {
        let p = preset("linear_mixed", &PresetParams::default()).unwrap();
        let mut sc = MpScenario::homogeneous(GridSpec { h: 0.5, r: 1.0 });
        sc.boundary = Expr::constant(1.0);
        assert!(empirical_mp_check(&p.operator, &p.domain, &sc, &SolveOptions::default()).is_err());
    }

    #[test]
    fn eigen_test_small() {
        let t = narrow_eigen_test(1.0, &[8, 16], 1.0, 3).unwrap();
        assert!(t.observed_order > 1.9 && t.observed_order < 2.1);
        assert!(t.below_verdict);
        assert!(t.threshold_inside);
    }

    #[test]
    fn lattice_zero_data_trivial() {
        let lat = LatticeSpec::crossing_strips(1.0).unwrap();
        let sc = LatticeScenario { grid: GridSpec { h: 0.125, r: 1.0 }, end_value: 0.0, tolerance: 1e-10 };
        let rep = lattice_mp_scenario(&lat, &LinearOp::laplacian(2).into(), &sc, &SolveOptions::default()).unwrap();
        assert_eq!(rep.verdict, LatticeVerdict::Pass);
        assert_eq!(rep.regions.len(), 5);
        assert_eq!(rep.global_max, 0.0);
    }
}
