//! Cylindrical and lattice domains.
//!
//! A cylinder is bounded in `k` orthonormal directions `ν^1..ν^k` spanning `U`:
//! `a_h ≤ x·ν^h ≤ a_h + d_h`, and unbounded along `U^⊥`. Lattices are finite unions of
//! cylinders that are bounded in all but one direction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, outer};

/// Orthonormality tolerance for stored frames.
pub const FRAME_TOL: f64 = 1e-12;
/// Largest Gram-Schmidt correction accepted from user input.
pub const GRAM_SCHMIDT_MAX_CORRECTION: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("not a cylinder: {k} bounded directions in dimension {n} (need 1 <= k <= n-1)")]
    NonCylinder { n: usize, k: usize },
    #[error("frame is not orthonormal (Gram-Schmidt correction {correction:.3e} exceeds 1e-8)")]
    NonOrthonormalFrame { correction: f64 },
    #[error("width d_{index} = {width} is not strictly positive")]
    BadWidth { index: usize, width: f64 },
    #[error("lattice member {index} is not a 1-infinite cylinder (k = {k}, n = {n})")]
    NotOneInfinite { index: usize, n: usize, k: usize },
    #[error("lattice needs at least one cylinder")]
    EmptyLattice,
}

/// A domain of the form `{x : a_h ≤ x·ν^h ≤ a_h + d_h, h = 1..k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CylinderRecord", into = "CylinderRecord")]
pub struct CylinderSpec {
    dim: usize,
    dirs: Vec<DVector<f64>>,
    offsets: Vec<f64>,
    widths: Vec<f64>,
}

/// Serialized form: `dim`, `dirs` (row vectors), `offsets`, `widths`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderRecord {
    pub dim: usize,
    pub dirs: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    pub widths: Vec<f64>,
}

impl TryFrom<CylinderRecord> for CylinderSpec {
    type Error = GeometryError;

    fn try_from(r: CylinderRecord) -> Result<Self, Self::Error> {
        make_cylinder(r.dim, &r.dirs, &r.offsets, &r.widths)
    }
}

impl From<CylinderSpec> for CylinderRecord {
    fn from(c: CylinderSpec) -> Self {
        CylinderRecord {
            dim: c.dim,
            dirs: c.dirs.iter().map(|d| d.iter().copied().collect()).collect(),
            offsets: c.offsets,
            widths: c.widths,
        }
    }
}

/// Validates and builds a cylinder. Nearly orthonormal frames are cleaned up by modified
/// Gram-Schmidt; anything further than 1e-8 from orthonormal is rejected.
pub fn make_cylinder(
    n: usize,
    dirs: &[Vec<f64>],
    offsets: &[f64],
    widths: &[f64],
) -> Result<CylinderSpec, GeometryError> {
    let k = dirs.len();
    if n < 2 || k == 0 || k >= n {
        return Err(GeometryError::NonCylinder { n, k });
    }
    for d in dirs {
        if d.len() != n {
            return Err(GeometryError::DimensionMismatch { expected: n, got: d.len() });
        }
    }
    if offsets.len() != k {
        return Err(GeometryError::DimensionMismatch { expected: k, got: offsets.len() });
    }
    if widths.len() != k {
        return Err(GeometryError::DimensionMismatch { expected: k, got: widths.len() });
    }
    for (index, &w) in widths.iter().enumerate() {
        if !(w > 0.0) || !w.is_finite() {
            return Err(GeometryError::BadWidth { index: index + 1, width: w });
        }
    }

    let raw: Vec<DVector<f64>> = dirs.iter().map(|d| DVector::from_column_slice(d)).collect();
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(k);
    for v in &raw {
        let mut w = v.clone();
        for q in &ortho {
            let c = q.dot(&w);
            w -= q * c;
        }
        let norm = w.norm();
        if norm < 0.5 {
            return Err(GeometryError::NonOrthonormalFrame { correction: (1.0 - norm).abs().max(1.0) });
        }
        ortho.push(w / norm);
    }
    let correction = raw
        .iter()
        .zip(&ortho)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0_f64, f64::max);
    if correction > GRAM_SCHMIDT_MAX_CORRECTION {
        return Err(GeometryError::NonOrthonormalFrame { correction });
    }

    Ok(CylinderSpec { dim: n, dirs: ortho, offsets: offsets.to_vec(), widths: widths.to_vec() })
}

impl CylinderSpec {
    /// Axis-aligned cylinder bounded along the listed coordinate axes (zero-based).
    pub fn axis_aligned(n: usize, axes: &[usize], offsets: &[f64], widths: &[f64]) -> Result<Self, GeometryError> {
        let dirs: Vec<Vec<f64>> = axes
            .iter()
            .map(|&a| {
                let mut v = vec![0.0; n];
                if a < n {
                    v[a] = 1.0;
                }
                v
            })
            .collect();
        if let Some(&bad) = axes.iter().find(|&&a| a >= n) {
            return Err(GeometryError::DimensionMismatch { expected: n, got: bad + 1 });
        }
        make_cylinder(n, &dirs, offsets, widths)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of bounded directions `k`.
    pub fn bounded_count(&self) -> usize {
        self.dirs.len()
    }

    pub fn dirs(&self) -> &[DVector<f64>] {
        &self.dirs
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn max_width(&self) -> f64 {
        self.widths.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_width(&self) -> f64 {
        self.widths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Orthonormal basis of `U^⊥`, completed from the standard basis.
    pub fn unbounded_dirs(&self) -> Vec<DVector<f64>> {
        let mut basis: Vec<DVector<f64>> = self.dirs.clone();
        let mut out = Vec::with_capacity(self.dim - self.dirs.len());
        for i in 0..self.dim {
            if basis.len() == self.dim {
                break;
            }
            let mut w = DVector::zeros(self.dim);
            w[i] = 1.0;
            // two passes of Gram-Schmidt for stability
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&w);
                    w -= q * c;
                }
            }
            let norm = w.norm();
            if norm > 1e-6 {
                let w = w / norm;
                basis.push(w.clone());
                out.push(w);
            }
        }
        out
    }

    /// Frame matrix whose columns are `ν^1..ν^k` followed by the unbounded basis.
    pub fn frame(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.dirs.iter().cloned().chain(self.unbounded_dirs()).collect();
        DMatrix::from_columns(&cols)
    }

    /// Coordinate `x·ν^h` (zero-based `h`).
    pub fn coordinate(&self, h: usize, x: &[f64]) -> f64 {
        dot(self.dirs[h].as_slice(), x)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Closed-slab membership.
    pub fn contains(&self, x: &[f64]) -> Result<bool, GeometryError> {
        self.check_dim(x)?;
        Ok((0..self.dirs.len()).all(|h| {
            let t = self.coordinate(h, x);
            t >= self.offsets[h] && t <= self.offsets[h] + self.widths[h]
        }))
    }

    /// Open-slab membership.
    pub fn strictly_contains(&self, x: &[f64]) -> Result<bool, GeometryError> {
        self.check_dim(x)?;
        Ok((0..self.dirs.len()).all(|h| {
            let t = self.coordinate(h, x);
            t > self.offsets[h] && t < self.offsets[h] + self.widths[h]
        }))
    }

    /// Point with bounded coordinates `t_h` and unbounded part `z` (in the unbounded basis).
    pub fn point_from_parts(&self, bounded: &[f64], unbounded: &[f64]) -> Vec<f64> {
        let mut x = DVector::zeros(self.dim);
        for (v, t) in self.dirs.iter().zip(bounded) {
            x += v * *t;
        }
        for (v, t) in self.unbounded_dirs().iter().zip(unbounded) {
            x += v * *t;
        }
        x.iter().copied().collect()
    }

    /// Bounded-direction centre `a_h + d_h/2` for every `h`.
    pub fn centre_coords(&self) -> Vec<f64> {
        self.offsets.iter().zip(&self.widths).map(|(a, d)| a + 0.5 * d).collect()
    }
}

/// Projections onto `U` and `U^⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

pub fn projections(c: &CylinderSpec) -> ProjectionPair {
    let n = c.dim;
    let mut p = DMatrix::zeros(n, n);
    for v in &c.dirs {
        p += outer(v, v);
    }
    let q = DMatrix::identity(n, n) - &p;
    ProjectionPair { p, q }
}

impl ProjectionPair {
    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// `Q x`, the component of `x` along the unbounded directions.
    pub fn unbounded_part(&self, x: &[f64]) -> DVector<f64> {
        &self.q * DVector::from_column_slice(x)
    }
}

/// A finite union of 1-infinite cylinders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeRecord", into = "LatticeRecord")]
pub struct LatticeSpec {
    cylinders: Vec<CylinderSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeRecord {
    pub cylinders: Vec<CylinderSpec>,
}

impl TryFrom<LatticeRecord> for LatticeSpec {
    type Error = GeometryError;

    fn try_from(r: LatticeRecord) -> Result<Self, Self::Error> {
        LatticeSpec::new(r.cylinders)
    }
}

impl From<LatticeSpec> for LatticeRecord {
    fn from(l: LatticeSpec) -> Self {
        LatticeRecord { cylinders: l.cylinders }
    }
}

impl LatticeSpec {
    pub fn new(cylinders: Vec<CylinderSpec>) -> Result<Self, GeometryError> {
        let first = cylinders.first().ok_or(GeometryError::EmptyLattice)?;
        let n = first.dim();
        for (index, c) in cylinders.iter().enumerate() {
            if c.dim() != n {
                return Err(GeometryError::DimensionMismatch { expected: n, got: c.dim() });
            }
            if c.bounded_count() != n - 1 {
                return Err(GeometryError::NotOneInfinite { index, n, k: c.bounded_count() });
            }
        }
        Ok(LatticeSpec { cylinders })
    }

    /// Two strips in the plane crossing at the square `[0,w]^2`: one along `x1`, one along `x2`.
    pub fn crossing_strips(width: f64) -> Result<Self, GeometryError> {
        let horizontal = CylinderSpec::axis_aligned(2, &[1], &[0.0], &[width])?;
        let vertical = CylinderSpec::axis_aligned(2, &[0], &[0.0], &[width])?;
        LatticeSpec::new(vec![horizontal, vertical])
    }

    pub fn dim(&self) -> usize {
        self.cylinders[0].dim()
    }

    pub fn cylinders(&self) -> &[CylinderSpec] {
        &self.cylinders
    }

    /// Number of member cylinders containing `x`.
    pub fn multiplicity(&self, x: &[f64]) -> Result<usize, GeometryError> {
        let mut count = 0;
        for c in &self.cylinders {
            if c.contains(x)? {
                count += 1;
            }
        }
        Ok(count)
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool, GeometryError> {
        Ok(self.multiplicity(x)? >= 1)
    }

    /// Membership in the node region `N`, the set covered by at least two cylinders.
    pub fn in_node_region(&self, x: &[f64]) -> Result<bool, GeometryError> {
        Ok(self.multiplicity(x)? >= 2)
    }

    /// Unbounded unit direction (axis) of member `i`.
    pub fn axis(&self, i: usize) -> DVector<f64> {
        self.cylinders[i].unbounded_dirs().remove(0)
    }
}

/// Anything with a closed-set membership test.
pub trait Region {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> Result<bool, GeometryError>;
}

impl Region for CylinderSpec {
    fn dim(&self) -> usize {
        self.dim
    }
    fn contains(&self, x: &[f64]) -> Result<bool, GeometryError> {
        CylinderSpec::contains(self, x)
    }
}

impl Region for LatticeSpec {
    fn dim(&self) -> usize {
        LatticeSpec::dim(self)
    }
    fn contains(&self, x: &[f64]) -> Result<bool, GeometryError> {
        LatticeSpec::contains(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c1() -> CylinderSpec {
        make_cylinder(3, &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], &[0.0, 0.0], &[PI, PI]).unwrap()
    }

    #[test]
    fn c1_membership() {
        let c = c1();
        assert!(c.contains(&[5.0, PI / 2.0, PI / 2.0]).unwrap());
        assert!(!c.contains(&[5.0, -0.1, PI / 2.0]).unwrap());
        assert!(c.contains(&[5.0, 0.0, PI]).unwrap());
        assert!(!c.strictly_contains(&[5.0, 0.0, PI / 2.0]).unwrap());
        assert_eq!(
            c.contains(&[1.0, 2.0]),
            Err(GeometryError::DimensionMismatch { expected: 3, got: 2 })
        );
    }

    #[test]
    fn strip_in_the_plane() {
        let s = make_cylinder(2, &[vec![1.0, 0.0]], &[0.0], &[PI]).unwrap();
        assert!(s.contains(&[1.0, -1e6]).unwrap());
        assert!(!s.contains(&[3.2, 0.0]).unwrap());
    }

    #[test]
    fn rejects_k_equal_n() {
        let err = make_cylinder(2, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0], &[1.0, 1.0]).unwrap_err();
        assert_eq!(err, GeometryError::NonCylinder { n: 2, k: 2 });
    }

    #[test]
    fn rejects_bad_width_and_frames() {
        let err = make_cylinder(2, &[vec![1.0, 0.0]], &[0.0], &[0.0]).unwrap_err();
        assert!(matches!(err, GeometryError::BadWidth { index: 1, .. }));
        let err = make_cylinder(3, &[vec![1.0, 0.0, 0.0], vec![0.1, 1.0, 0.0]], &[0.0, 0.0], &[1.0, 1.0])
            .unwrap_err();
        assert!(matches!(err, GeometryError::NonOrthonormalFrame { .. }));
    }

    #[test]
    fn nearly_orthonormal_frame_is_cleaned() {
        let c = make_cylinder(3, &[vec![1.0, 1e-10, 0.0], vec![0.0, 1.0, 0.0]], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let d = c.dirs();
        assert!(d[0].dot(&d[1]).abs() < FRAME_TOL);
        assert!((d[0].norm() - 1.0).abs() < FRAME_TOL);
    }

    #[test]
    fn projections_axis_aligned() {
        let pr = projections(&c1());
        assert_eq!(pr.p, DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0])));
        assert_eq!(pr.q, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0])));
        let s = make_cylinder(2, &[vec![1.0, 0.0]], &[0.0], &[PI]).unwrap();
        let pr = projections(&s);
        assert_eq!(pr.p, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])));
        assert_eq!(pr.q, DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])));
    }

    #[test]
    fn crossing_strips_node_has_multiplicity_two() {
        let l = LatticeSpec::crossing_strips(1.0).unwrap();
        assert_eq!(l.multiplicity(&[0.5, 0.5]).unwrap(), 2);
        assert!(l.in_node_region(&[0.5, 0.5]).unwrap());
        assert_eq!(l.multiplicity(&[7.0, 0.5]).unwrap(), 1);
        assert!(!l.contains(&[7.0, 7.0]).unwrap());
    }

    #[test]
    fn lattice_requires_one_infinite_members() {
        let c = CylinderSpec::axis_aligned(3, &[1], &[0.0], &[1.0]).unwrap();
        assert!(matches!(LatticeSpec::new(vec![c]), Err(GeometryError::NotOneInfinite { .. })));
    }

    #[test]
    fn serde_record_round_trip_validates() {
        let c = c1();
        let rec: CylinderRecord = c.clone().into();
        let back = CylinderSpec::try_from(rec).unwrap();
        assert_eq!(back, c);
        let bad = CylinderRecord { dim: 2, dirs: vec![vec![1.0, 0.0]], offsets: vec![0.0], widths: vec![-1.0] };
        assert!(CylinderSpec::try_from(bad).is_err());
    }
}
