//! Tensor grids aligned with a cylinder frame, optionally masked to a lattice.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::geometry::{CylinderSpec, LatticeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Interior,
    /// On the boundary of the domain itself.
    Physical,
    /// On a truncation face.
    Artificial,
    /// Outside the domain (lattice grids only).
    Inactive,
}

/// Resolution of a truncated grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Target spacing; each axis gets `round(length / h)` cells (at least 2).
    pub h: f64,
    /// Truncation half-length along unbounded directions.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    /// Columns are the grid axes in physical space: `x = frame · ξ`.
    frame: DMatrix<f64>,
    identity_frame: bool,
    lower: Vec<f64>,
    h: Vec<f64>,
    counts: Vec<usize>,
    strides: Vec<usize>,
    kinds: Vec<NodeKind>,
    description: String,
}

fn cells_for(length: f64, h: f64) -> usize {
    ((length / h).round() as usize).max(2)
}

impl Grid {
    /// Box `Π [lower_i, upper_i]` in frame coordinates. `physical[i]` states whether
    /// the low and high faces along axis `i` are physical; `active` masks nodes out.
    pub fn new_box(
        frame: DMatrix<f64>,
        lower: &[f64],
        upper: &[f64],
        cells: &[usize],
        physical: &[(bool, bool)],
        active: Option<&dyn Fn(&[f64]) -> bool>,
        description: &str,
    ) -> Result<Self, SolverError> {
        let dim = lower.len();
        if dim == 0 || upper.len() != dim || cells.len() != dim || physical.len() != dim || frame.nrows() != dim || frame.ncols() != dim {
            return Err(SolverError::BadGrid("inconsistent grid dimensions".into()));
        }
        let mut h = Vec::with_capacity(dim);
        for i in 0..dim {
            if !(upper[i] > lower[i]) || cells[i] < 2 {
                return Err(SolverError::BadGrid(format!("axis {} needs upper > lower and at least 2 cells", i + 1)));
            }
            h.push((upper[i] - lower[i]) / cells[i] as f64);
        }
        let counts: Vec<usize> = cells.iter().map(|c| c + 1).collect();
        // the axis with the most nodes varies slowest, which keeps the band narrow
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by_key(|&i| (counts[i], i));
        let mut strides = vec![0; dim];
        let mut s = 1;
        for &i in &order {
            strides[i] = s;
            s *= counts[i];
        }
        let total = s;
        let identity_frame = frame == DMatrix::identity(dim, dim);
        let mut grid = Grid {
            dim,
            frame,
            identity_frame,
            lower: lower.to_vec(),
            h,
            counts,
            strides,
            kinds: vec![NodeKind::Inactive; total],
            description: description.to_string(),
        };

        let is_active: Vec<bool> = (0..total)
            .map(|idx| active.map_or(true, |f| f(&grid.coords(idx))))
            .collect();
        let mut kinds = vec![NodeKind::Inactive; total];
        let mut mi = vec![0usize; dim];
        for idx in 0..total {
            if !is_active[idx] {
                continue;
            }
            grid.multi_index_into(idx, &mut mi);
            let mut on_phys_face = false;
            let mut on_art_face = false;
            for i in 0..dim {
                let lo = mi[i] == 0;
                let hi = mi[i] + 1 == grid.counts[i];
                if (lo && physical[i].0) || (hi && physical[i].1) {
                    on_phys_face = true;
                } else if lo || hi {
                    on_art_face = true;
                }
            }
            let mut touches_outside = false;
            if active.is_some() {
                grid.for_each_neighbour(&mi, |nb| {
                    if let Some(j) = nb {
                        if !is_active[j] {
                            touches_outside = true;
                        }
                    }
                });
            }
            kinds[idx] = if on_phys_face || touches_outside {
                NodeKind::Physical
            } else if on_art_face {
                NodeKind::Artificial
            } else {
                NodeKind::Interior
            };
        }
        grid.kinds = kinds;
        Ok(grid)
    }

    /// `Π [0,1]` with every face physical.
    pub fn unit_box(dim: usize, cells: usize) -> Result<Self, SolverError> {
        Grid::new_box(
            DMatrix::identity(dim, dim),
            &vec![0.0; dim],
            &vec![1.0; dim],
            &vec![cells; dim],
            &vec![(true, true); dim],
            None,
            &format!("unit box [0,1]^{dim}, {cells} cells per axis"),
        )
    }

    /// Cylinder truncated to `[−R, R]` along each unbounded direction, in the cylinder frame.
    pub fn truncated(dom: &CylinderSpec, spec: &GridSpec) -> Result<Self, SolverError> {
        if !(spec.h > 0.0) || !(spec.r > 0.0) {
            return Err(SolverError::BadGrid(format!("h = {} and R = {} must be positive", spec.h, spec.r)));
        }
        let n = dom.dim();
        let k = dom.bounded_count();
        let mut lower = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        let mut cells = Vec::with_capacity(n);
        let mut physical = Vec::with_capacity(n);
        for h in 0..k {
            lower.push(dom.offsets()[h]);
            upper.push(dom.offsets()[h] + dom.widths()[h]);
            cells.push(cells_for(dom.widths()[h], spec.h));
            physical.push((true, true));
        }
        for _ in k..n {
            lower.push(-spec.r);
            upper.push(spec.r);
            cells.push(cells_for(2.0 * spec.r, spec.h));
            physical.push((false, false));
        }
        Grid::new_box(
            dom.frame(),
            &lower,
            &upper,
            &cells,
            &physical,
            None,
            &format!("cylinder truncated at R = {} along unbounded directions, h ~ {}", spec.r, spec.h),
        )
    }

    /// Bounding box of the lattice extended by `R` on every side, masked to the union.
    /// All truncation faces are artificial; nodes next to the outside of the union are physical.
    pub fn lattice(lat: &LatticeSpec, spec: &GridSpec) -> Result<Self, SolverError> {
        let n = lat.dim();
        let mut lower = vec![f64::INFINITY; n];
        let mut upper = vec![f64::NEG_INFINITY; n];
        for c in lat.cylinders() {
            for (h, v) in c.dirs().iter().enumerate() {
                let axis = v.iamax();
                if (v[axis].abs() - 1.0).abs() > 1e-12 {
                    return Err(SolverError::BadGrid("lattice grids need axis-aligned cylinders".into()));
                }
                lower[axis] = lower[axis].min(c.offsets()[h]);
                upper[axis] = upper[axis].max(c.offsets()[h] + c.widths()[h]);
            }
        }
        if lower.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::BadGrid("every axis must be bounded by some lattice member".into()));
        }
        let lo: Vec<f64> = lower.iter().map(|v| v - spec.r).collect();
        let hi: Vec<f64> = upper.iter().map(|v| v + spec.r).collect();
        let cells: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| cells_for(b - a, spec.h)).collect();
        let member = |x: &[f64]| lat.contains(x).unwrap_or(false);
        Grid::new_box(
            DMatrix::identity(n, n),
            &lo,
            &hi,
            &cells,
            &vec![(false, false); n],
            Some(&member),
            &format!("lattice union truncated R = {} beyond the node region, h ~ {}", spec.r, spec.h),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn multi_index_into(&self, mut idx: usize, out: &mut [usize]) {
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.strides[i]));
        for &i in &order {
            out[i] = idx / self.strides[i];
            idx %= self.strides[i];
        }
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let mut mi = vec![0; self.dim];
        self.multi_index_into(idx, &mut mi);
        mi
    }

    pub fn index(&self, mi: &[usize]) -> usize {
        mi.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    /// Frame coordinates `ξ` of a node.
    pub fn frame_coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().enumerate().map(|(i, &m)| self.lower[i] + m as f64 * self.h[i]).collect()
    }

    /// Physical coordinates `x = frame · ξ`.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let xi = self.frame_coords(idx);
        if self.identity_frame {
            return xi;
        }
        (0..self.dim).map(|r| (0..self.dim).map(|c| self.frame[(r, c)] * xi[c]).sum()).collect()
    }

    /// Calls `f` with the index of every node in the `3^d` neighbourhood (excluding
    /// the node itself), or `None` when the neighbour falls outside the box.
    pub fn for_each_neighbour(&self, mi: &[usize], mut f: impl FnMut(Option<usize>)) {
        let d = self.dim;
        let total = 3usize.pow(d as u32);
        let mut nb = vec![0usize; d];
        'outer: for code in 0..total {
            if code == (total - 1) / 2 {
                continue;
            }
            let mut c = code;
            for i in 0..d {
                let off = (c % 3) as isize - 1;
                c /= 3;
                let v = mi[i] as isize + off;
                if v < 0 || v >= self.counts[i] as isize {
                    f(None);
                    continue 'outer;
                }
                nb[i] = v as usize;
            }
            f(Some(self.index(&nb)));
        }
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.kinds[i] == NodeKind::Interior).collect()
    }

    /// Evaluates `f` at every node's physical coordinates.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.node_count()).map(|i| f(&self.coords(i))).collect()
    }
}
