//! Monotone finite-difference stencils.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::grid::Grid;
use super::SolverError;
use crate::operators::{Coefficients, ConstLinear, OperatorSpec};

/// One discrete equation: `center·u[i] + Σ w·u[i + off]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub center: f64,
    /// Linear index offsets with their weights. Offsets are unique.
    pub nbrs: Vec<(isize, f64)>,
}

impl Stencil {
    pub fn apply(&self, idx: usize, u: &[f64]) -> f64 {
        let mut acc = self.center * u[idx];
        for &(off, w) in &self.nbrs {
            acc += w * u[(idx as isize + off) as usize];
        }
        acc
    }

    /// Smallest neighbour weight; the stencil is monotone iff this is `≥ 0`.
    pub fn min_weight(&self) -> f64 {
        self.nbrs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizeOptions {
    /// Largest admissible zeroth-order coefficient. `0` rejects any `c > 0`;
    /// narrow-domain runs raise it.
    pub c_limit: f64,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        DiscretizeOptions { c_limit: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Scheme {
    /// One stencil per interior node.
    Linear(Vec<Stencil>),
    /// Node-independent stencils indexed `[α][β]`.
    SupInf(Vec<Vec<Stencil>>),
}

/// The discrete operator `F_h` on the interior nodes of a grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub(crate) scheme: Scheme,
    pub(crate) interior: Vec<usize>,
}

impl DiscreteOperator {
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn is_sup_inf(&self) -> bool {
        matches!(self.scheme, Scheme::SupInf(_))
    }

    /// Stencil at interior position `pos` (linear schemes) or of member `(α, β)`.
    pub fn stencil(&self, pos: usize, member: Option<(usize, usize)>) -> &Stencil {
        match (&self.scheme, member) {
            (Scheme::Linear(s), _) => &s[pos],
            (Scheme::SupInf(m), Some((a, b))) => &m[a][b],
            (Scheme::SupInf(m), None) => &m[0][0],
        }
    }

    pub fn families(&self) -> Option<&[Vec<Stencil>]> {
        match &self.scheme {
            Scheme::SupInf(m) => Some(m),
            Scheme::Linear(_) => None,
        }
    }

    /// `F_h[u]` at interior position `pos`.
    pub fn apply_at(&self, pos: usize, u: &[f64]) -> f64 {
        let idx = self.interior[pos];
        match &self.scheme {
            Scheme::Linear(s) => s[pos].apply(idx, u),
            Scheme::SupInf(m) => m
                .iter()
                .map(|fam| fam.iter().map(|s| s.apply(idx, u)).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `max_i |F_h[u]_i − f_i|` over interior nodes.
    pub fn residual(&self, u: &[f64], f: &[f64]) -> f64 {
        (0..self.interior.len())
            .into_par_iter()
            .map(|pos| (self.apply_at(pos, u) - f[self.interior[pos]]).abs())
            .reduce(|| 0.0, f64::max)
    }
}

fn linear_offset(grid: &Grid, axis_offsets: &[(usize, isize)]) -> isize {
    axis_offsets.iter().map(|&(i, o)| o * grid.strides()[i] as isize).sum()
}

/// Stencil for frozen coefficients already expressed in the grid frame.
///
/// Second differences per axis; mixed terms use the seven-point scheme whose
/// diagonal neighbours follow the sign of `a_ij`; drift is upwinded.
pub fn stencil_for(grid: &Grid, a: &DMatrix<f64>, b: &DVector<f64>, c: f64) -> Stencil {
    let n = grid.dim();
    let h = grid.spacing();
    let mut weights: std::collections::BTreeMap<isize, f64> = std::collections::BTreeMap::new();
    let mut center = c;
    let mut add = |off: isize, w: f64, center: &mut f64| {
        *weights.entry(off).or_insert(0.0) += w;
        *center -= w;
    };
    for i in 0..n {
        let w = a[(i, i)] / (h[i] * h[i]);
        add(linear_offset(grid, &[(i, 1)]), w, &mut center);
        add(linear_offset(grid, &[(i, -1)]), w, &mut center);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let aij = 0.5 * (a[(i, j)] + a[(j, i)]);
            if aij == 0.0 {
                continue;
            }
            let w = aij.abs() / (h[i] * h[j]);
            let sgn = if aij > 0.0 { 1 } else { -1 };
            add(linear_offset(grid, &[(i, 1), (j, sgn)]), w, &mut center);
            add(linear_offset(grid, &[(i, -1), (j, -sgn)]), w, &mut center);
            for (ax, o) in [(i, 1), (i, -1), (j, 1), (j, -1)] {
                add(linear_offset(grid, &[(ax, o)]), -w, &mut center);
            }
        }
    }
    for i in 0..n {
        if b[i] != 0.0 {
            let dir = if b[i] > 0.0 { 1 } else { -1 };
            add(linear_offset(grid, &[(i, dir)]), b[i].abs() / h[i], &mut center);
        }
    }
    Stencil { center, nbrs: weights.into_iter().filter(|p| p.1 != 0.0).collect() }
}

fn to_frame(grid: &Grid, coeffs: &Coefficients) -> (DMatrix<f64>, DVector<f64>) {
    let f = grid.frame();
    (f.transpose() * &coeffs.a * f, f.transpose() * &coeffs.b)
}

fn check(grid: &Grid, idx: usize, st: &Stencil, c: f64, opts: &DiscretizeOptions, what: &str) -> Result<(), SolverError> {
    let scale = st.nbrs.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let minw = st.min_weight();
    if minw < -1e-12 * scale {
        return Err(SolverError::NonMonotoneStencil {
            node: idx,
            x: grid.coords(idx),
            detail: format!("{what}: neighbour weight {minw:.6e} < 0 (cross terms not diagonally dominant)"),
        });
    }
    if c > opts.c_limit {
        return Err(SolverError::NonMonotoneStencil {
            node: idx,
            x: grid.coords(idx),
            detail: format!("{what}: zeroth-order coefficient {c} exceeds the admissible limit {}", opts.c_limit),
        });
    }
    Ok(())
}

pub fn discretize(op: &OperatorSpec, grid: &Grid) -> Result<DiscreteOperator, SolverError> {
    discretize_with(op, grid, &DiscretizeOptions::default())
}

pub fn discretize_with(op: &OperatorSpec, grid: &Grid, opts: &DiscretizeOptions) -> Result<DiscreteOperator, SolverError> {
    if op.dim() != grid.dim() {
        return Err(SolverError::DimensionMismatch { op: op.dim(), grid: grid.dim() });
    }
    let interior = grid.interior_indices();
    if interior.is_empty() {
        return Err(SolverError::BadGrid("grid has no interior nodes".into()));
    }
    let scheme = match op {
        OperatorSpec::Linear(l) => {
            let stencils: Result<Vec<Stencil>, SolverError> = interior
                .par_iter()
                .map(|&idx| {
                    let coeffs = l.coefficients(&grid.coords(idx))?;
                    let (a, b) = to_frame(grid, &coeffs);
                    let st = stencil_for(grid, &a, &b, coeffs.c);
                    check(grid, idx, &st, coeffs.c, opts, "linear operator")?;
                    Ok(st)
                })
                .collect();
            Scheme::Linear(stencils?)
        }
        OperatorSpec::SupInf(s) => {
            let probe = interior[0];
            let mut fams = Vec::with_capacity(s.families().len());
            for (ai, fam) in s.families().iter().enumerate() {
                let mut row = Vec::with_capacity(fam.len());
                for (bi, m) in fam.iter().enumerate() {
                    let coeffs = ConstLinear::as_coefficients(m);
                    let (a, b) = to_frame(grid, &coeffs);
                    let st = stencil_for(grid, &a, &b, coeffs.c);
                    check(grid, probe, &st, coeffs.c, opts, &format!("member (α={}, β={})", ai + 1, bi + 1))?;
                    row.push(st);
                }
                fams.push(row);
            }
            Scheme::SupInf(fams)
        }
        OperatorSpec::Callable(c) => {
            return Err(SolverError::Unsupported(format!(
                "callable operator '{}' has no coefficient form to discretize",
                c.name
            )))
        }
    };
    Ok(DiscreteOperator { scheme, interior })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::geometry::CylinderSpec;
    use crate::operators::{preset, LinearOp, PresetParams};
    use crate::solver::grid::GridSpec;

    #[test]
    fn five_point_laplacian() {
        let g = Grid::unit_box(2, 4).unwrap();
        let d = discretize(&LinearOp::laplacian(2).into(), &g).unwrap();
        let st = d.stencil(0, None);
        assert_eq!(st.center, -64.0);
        assert_eq!(st.nbrs.len(), 4);
        assert!(st.nbrs.iter().all(|p| p.1 == 16.0));
    }

    #[test]
    fn linear_mixed_axis_coefficients() {
        let p = preset("linear_mixed", &PresetParams::default()).unwrap();
        let g = Grid::truncated(&p.domain, &GridSpec { h: 0.25, r: 2.0 }).unwrap();
        let d = discretize(&p.operator, &g).unwrap();
        let OperatorSpec::Linear(l) = &p.operator else { panic!() };
        for (pos, &idx) in d.interior().iter().enumerate().step_by(7) {
            let x = g.coords(idx);
            let a = l.coefficients(&x).unwrap().a;
            let st = d.stencil(pos, None);
            for ax in 0..g.dim() {
                let off = g.strides()[ax] as isize;
                let w = st.nbrs.iter().find(|p| p.0 == off).unwrap().1;
                let h = g.spacing()[ax];
                assert!((w - a[(ax, ax)] / (h * h)).abs() < 1e-9 * w.abs().max(1.0));
            }
        }
    }

    #[test]
    fn cross_terms_rejected_unless_dominant() {
        let a = |v: f64| {
            LinearOp::new(
                vec![vec![Expr::constant(1.0), Expr::constant(v)], vec![Expr::constant(v), Expr::constant(1.0)]],
                vec![Expr::constant(0.0), Expr::constant(0.0)],
                Expr::constant(0.0),
            )
            .unwrap()
        };
        let dom = CylinderSpec::axis_aligned(2, &[0], &[0.0], &[1.0]).unwrap();
        // spacings 0.25 and 0.5
        let g = Grid::truncated(&dom, &GridSpec { h: 0.25, r: 1.0 }).unwrap();
        let g = Grid::new_box(
            g.frame().clone(),
            &[0.0, -1.0],
            &[1.0, 1.0],
            &[4, 4],
            &[(true, true), (false, false)],
            None,
            "anisotropic",
        )
        .unwrap();
        let err = discretize(&a(0.8).into(), &g).unwrap_err();
        assert!(matches!(err, SolverError::NonMonotoneStencil { .. }));
        assert!(discretize(&a(0.3).into(), &g).is_ok());
    }

    #[test]
    fn exact_on_quadratics() {
        let op: OperatorSpec = LinearOp::new(
            vec![
                vec![Expr::parse("2 + x1").unwrap(), Expr::constant(0.25)],
                vec![Expr::constant(0.25), Expr::constant(1.0)],
            ],
            vec![Expr::constant(0.0), Expr::constant(0.0)],
            Expr::constant(-1.0),
        )
        .unwrap()
        .into();
        let g = Grid::unit_box(2, 8).unwrap();
        let d = discretize(&op, &g).unwrap();
        let q = |x: &[f64]| 1.5 * x[0] * x[0] - x[0] * x[1] + 0.5 * x[1] * x[1] + x[0] - 2.0;
        let u = g.sample(q);
        for (pos, &idx) in d.interior().iter().enumerate() {
            let x = g.coords(idx);
            let exact = (2.0 + x[0]) * 3.0 + 2.0 * 0.25 * (-1.0) + 1.0 * 1.0 - q(&x);
            assert!((d.apply_at(pos, &u) - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn positive_c_needs_limit() {
        let op: OperatorSpec = LinearOp::laplacian(2).with_zeroth_order(Expr::constant(0.5)).unwrap().into();
        let g = Grid::unit_box(2, 4).unwrap();
        assert!(discretize(&op, &g).is_err());
        assert!(discretize_with(&op, &g, &DiscretizeOptions { c_limit: 1.0 }).is_ok());
    }
}
