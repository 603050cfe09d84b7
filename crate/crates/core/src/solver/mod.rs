//! Monotone finite-difference solver for Dirichlet problems on truncated cylinders and lattices.

mod discretize;
mod grid;
mod linear;
mod scenarios;

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub use discretize::{discretize, discretize_with, stencil_for, DiscreteOperator, DiscretizeOptions, Stencil};
pub use grid::{Grid, GridSpec, NodeKind};
pub use scenarios::*;

use crate::geometry::GeometryError;
use crate::operators::{OperatorError, OperatorSpec};
use linear::System;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("operator dimension {op} does not match grid dimension {grid}")]
    DimensionMismatch { op: usize, grid: usize },
    #[error("non-monotone stencil at node {node} (x = {x:?}): {detail}")]
    NonMonotoneStencil { node: usize, x: Vec<f64>, detail: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("bad data: {0}")]
    BadData(String),
    #[error("singular system at row {row}")]
    Singular { row: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Node values on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field {
    pub grid: String,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self, SolverError> {
        if values.len() != grid.node_count() {
            return Err(SolverError::BadData(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::BadData(format!("non-finite value at node {i}")));
        }
        Ok(Field { grid: grid.description().to_string(), values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Direct when the band fits, sweeps otherwise.
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub max_policy_iterations: usize,
    pub discretize: DiscretizeOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::Auto,
            tolerance: 1e-10,
            max_sweeps: 100_000,
            max_policy_iterations: 100,
            discretize: DiscretizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub method: String,
    /// Sweeps for the iterative path, linear solves otherwise.
    pub iterations: usize,
    pub residual: f64,
    pub max_value: f64,
    pub argmax_node: usize,
    pub argmax_x: Vec<f64>,
    pub boundary_max: f64,
    /// Policy changes per outer update (sup-inf only).
    pub policy_switches: Vec<usize>,
    /// Residual after each outer policy update (sup-inf only).
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub physical_nodes: usize,
    pub artificial_nodes: usize,
    pub interior_nodes: usize,
}

impl SolveReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method: {}", self.method);
        let _ = writeln!(
            s,
            "nodes: {} interior, {} physical boundary, {} artificial boundary",
            self.interior_nodes, self.physical_nodes, self.artificial_nodes
        );
        let _ = writeln!(s, "iterations: {}", self.iterations);
        let _ = writeln!(s, "residual: {:.3e}", self.residual);
        let _ = writeln!(s, "max u: {:.12e} at node {} x = {:?}", self.max_value, self.argmax_node, self.argmax_x);
        let _ = writeln!(s, "boundary max: {:.12e}", self.boundary_max);
        if !self.residual_history.is_empty() {
            let _ = writeln!(s, "policy switches: {:?}", self.policy_switches);
            let hist: Vec<String> = self.residual_history.iter().map(|r| format!("{r:.3e}")).collect();
            let _ = writeln!(s, "residual history: [{}]", hist.join(", "));
        }
        let _ = writeln!(s, "converged: {}", self.converged);
        s
    }

    /// True when the logged residuals never increase.
    pub fn residual_monotone(&self) -> bool {
        self.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-14)
    }
}

fn use_direct(sys: &System<'_>, method: SolveMethod) -> bool {
    match method {
        SolveMethod::Direct => true,
        SolveMethod::Iterative => false,
        SolveMethod::Auto => {
            let n = sys.interior.len() as f64;
            let bw = sys.bandwidth() as f64;
            n * (2.0 * bw + 1.0) <= 6e7 && n * bw * bw <= 2e10
        }
    }
}

fn linear_solve(
    sys: &System<'_>,
    u: &mut [f64],
    f: &[f64],
    opts: &SolveOptions,
) -> Result<(usize, &'static str), SolverError> {
    if use_direct(sys, opts.method) {
        sys.solve_direct(u, f)?;
        Ok((1, "banded LU"))
    } else {
        let (sweeps, _) = sys.solve_iterative(u, f, opts.tolerance, opts.max_sweeps)?;
        Ok((sweeps, "multicolour Gauss-Seidel"))
    }
}

/// Discretizes `op` on `grid` and solves `F_h[u] = f` with `u = g` on boundary nodes.
/// `f` and `g` hold one value per node; only interior entries of `f` and boundary
/// entries of `g` are read.
pub fn solve_dirichlet(
    op: &OperatorSpec,
    grid: &Grid,
    f: &[f64],
    g: &[f64],
    opts: &SolveOptions,
) -> Result<(Field, SolveReport), SolverError> {
    let disc = discretize_with(op, grid, &opts.discretize)?;
    solve_discrete(&disc, grid, f, g, opts)
}

pub fn solve_discrete(
    disc: &DiscreteOperator,
    grid: &Grid,
    f: &[f64],
    g: &[f64],
    opts: &SolveOptions,
) -> Result<(Field, SolveReport), SolverError> {
    let n = grid.node_count();
    if f.len() != n || g.len() != n {
        return Err(SolverError::BadData(format!("f and g need {n} values (got {} and {})", f.len(), g.len())));
    }
    if f.iter().chain(g).any(|v| !v.is_finite()) {
        return Err(SolverError::BadData("non-finite f or g".into()));
    }
    let mut u: Vec<f64> = (0..n)
        .map(|i| match grid.kind(i) {
            NodeKind::Physical | NodeKind::Artificial => g[i],
            _ => 0.0,
        })
        .collect();

    let (iterations, method, switches, history) = match disc.families() {
        None => {
            let stencils = (0..disc.interior.len()).map(|p| disc.stencil(p, None)).collect();
            let sys = System::new(grid, &disc.interior, stencils);
            let (it, m) = linear_solve(&sys, &mut u, f, opts)?;
            (it, m.to_string(), Vec::new(), Vec::new())
        }
        Some(fams) => {
            let (it, m, sw, hist) = policy_iteration(disc, fams, grid, &mut u, f, opts)?;
            (it, format!("policy iteration ({m})"), sw, hist)
        }
    };

    let residual = disc.residual(&u, f);
    let converged = residual <= opts.tolerance;
    if !converged {
        return Err(SolverError::NoConvergence { iterations, residual });
    }
    let report = summarize(grid, &u, method, iterations, residual, switches, history, converged);
    Ok((Field::new(grid, u)?, report))
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    grid: &Grid,
    u: &[f64],
    method: String,
    iterations: usize,
    residual: f64,
    policy_switches: Vec<usize>,
    residual_history: Vec<f64>,
    converged: bool,
) -> SolveReport {
    let mut max_value = f64::NEG_INFINITY;
    let mut argmax_node = 0;
    let mut boundary_max = f64::NEG_INFINITY;
    let (mut phys, mut art, mut int) = (0, 0, 0);
    for (i, &v) in u.iter().enumerate() {
        let kind = grid.kind(i);
        match kind {
            NodeKind::Inactive => continue,
            NodeKind::Interior => int += 1,
            NodeKind::Physical => phys += 1,
            NodeKind::Artificial => art += 1,
        }
        if kind != NodeKind::Interior {
            boundary_max = boundary_max.max(v);
        }
        if v > max_value {
            max_value = v;
            argmax_node = i;
        }
    }
    SolveReport {
        method,
        iterations,
        residual,
        max_value,
        argmax_node,
        argmax_x: grid.coords(argmax_node),
        boundary_max,
        policy_switches,
        residual_history,
        converged,
        physical_nodes: phys,
        artificial_nodes: art,
        interior_nodes: int,
    }
}

/// Howard iteration for `max_α min_β L^{αβ}_h u = f`: the outer loop improves the
/// maximizing policy, and for each frozen α the inner loop solves the minimizing
/// problem exactly. Switches happen only on strict improvement.
fn policy_iteration(
    disc: &DiscreteOperator,
    fams: &[Vec<Stencil>],
    grid: &Grid,
    u: &mut [f64],
    f: &[f64],
    opts: &SolveOptions,
) -> Result<(usize, &'static str, Vec<usize>, Vec<f64>), SolverError> {
    let m = disc.interior.len();
    let mut alpha = vec![0usize; m];
    let mut beta = vec![0usize; m];
    let mut solves = 0usize;
    let mut switches = Vec::new();
    let mut history = Vec::new();
    let mut method;
    let eps = |v: f64| 1e-12 * (1.0 + v.abs());
    loop {
        // inner: minimizer for frozen α
        loop {
            if solves >= opts.max_policy_iterations {
                return Err(SolverError::NoConvergence { iterations: solves, residual: disc.residual(u, f) });
            }
            let stencils = (0..m).map(|p| &fams[alpha[p]][beta[p]]).collect();
            let sys = System::new(grid, &disc.interior, stencils);
            let (_, how) = linear_solve(&sys, u, f, opts)?;
            method = how;
            solves += 1;
            let mut changed = 0;
            for p in 0..m {
                let idx = disc.interior[p];
                let fam = &fams[alpha[p]];
                let cur = fam[beta[p]].apply(idx, u);
                let (bi, bv) = fam
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (i, s.apply(idx, u)))
                    .fold((beta[p], cur), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
                if bv < cur - eps(cur) {
                    beta[p] = bi;
                    changed += 1;
                }
            }
            if changed == 0 {
                break;
            }
        }
        history.push(disc.residual(u, f));
        // outer: maximizer
        let mut changed = 0;
        for p in 0..m {
            let idx = disc.interior[p];
            let inner = |a: usize| {
                fams[a]
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (i, s.apply(idx, u)))
                    .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
            };
            let (_, cur) = inner(alpha[p]);
            let mut best = (alpha[p], cur);
            for a in 0..fams.len() {
                let (_, v) = inner(a);
                if v > best.1 {
                    best = (a, v);
                }
            }
            if best.1 > cur + eps(cur) {
                alpha[p] = best.0;
                beta[p] = inner(best.0).0;
                changed += 1;
            }
        }
        switches.push(changed);
        if changed == 0 {
            return Ok((solves, method, switches, history));
        }
    }
}

/// CSV with one row per active node: coordinates `x1..xn` and `value`.
pub fn field_csv(grid: &Grid, field: &Field) -> String {
    let mut s = String::new();
    for i in 1..=grid.dim() {
        let _ = write!(s, "x{i},");
    }
    s.push_str("value\n");
    for (idx, v) in field.values.iter().enumerate() {
        if grid.kind(idx) == NodeKind::Inactive {
            continue;
        }
        for c in grid.coords(idx) {
            let _ = write!(s, "{c},");
        }
        let _ = writeln!(s, "{v}");
    }
    s
}

pub fn write_field_csv(grid: &Grid, field: &Field, path: &Path) -> Result<(), SolverError> {
    std::fs::write(path, field_csv(grid, field))?;
    Ok(())
}
