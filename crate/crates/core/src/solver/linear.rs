//! Linear solves for a frozen stencil choice: banded LU and multicolour Gauss–Seidel.

use rayon::prelude::*;

use super::discretize::Stencil;
use super::grid::Grid;
use super::SolverError;

const NONE: usize = usize::MAX;

/// A linear system `Σ w u = f` on the interior nodes with Dirichlet data on the rest.
pub(crate) struct System<'a> {
    pub grid: &'a Grid,
    pub interior: &'a [usize],
    /// `pos_of[node]` is the interior position or `NONE`.
    pub pos_of: Vec<usize>,
    pub stencils: Vec<&'a Stencil>,
}

impl<'a> System<'a> {
    pub fn new(grid: &'a Grid, interior: &'a [usize], stencils: Vec<&'a Stencil>) -> Self {
        let mut pos_of = vec![NONE; grid.node_count()];
        for (p, &i) in interior.iter().enumerate() {
            pos_of[i] = p;
        }
        System { grid, interior, pos_of, stencils }
    }

    fn n(&self) -> usize {
        self.interior.len()
    }

    /// `f − Σ_{boundary} w g` at every interior position.
    fn rhs(&self, f: &[f64], u: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|p| {
                let idx = self.interior[p];
                let mut r = f[idx];
                for &(off, w) in &self.stencils[p].nbrs {
                    let j = (idx as isize + off) as usize;
                    if self.pos_of[j] == NONE {
                        r -= w * u[j];
                    }
                }
                r
            })
            .collect()
    }

    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for p in 0..self.n() {
            let idx = self.interior[p];
            for &(off, _) in &self.stencils[p].nbrs {
                let q = self.pos_of[(idx as isize + off) as usize];
                if q != NONE {
                    bw = bw.max(q.abs_diff(p));
                }
            }
        }
        bw
    }

    /// Interior residual `max |L u − f|`.
    pub fn residual(&self, u: &[f64], f: &[f64]) -> f64 {
        (0..self.n())
            .into_par_iter()
            .map(|p| {
                let idx = self.interior[p];
                (self.stencils[p].apply(idx, u) - f[idx]).abs()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Overwrites the interior entries of `u` with the banded LU solution,
    /// followed by two rounds of iterative refinement.
    pub fn solve_direct(&self, u: &mut [f64], f: &[f64]) -> Result<(), SolverError> {
        let bw = self.bandwidth();
        let lu = Band::assemble(self, bw).factor()?;
        let rhs = self.rhs(f, u);
        let x = lu.solve(rhs);
        for (p, &idx) in self.interior.iter().enumerate() {
            u[idx] = x[p];
        }
        for _ in 0..2 {
            let r: Vec<f64> = (0..self.n())
                .map(|p| {
                    let idx = self.interior[p];
                    f[idx] - self.stencils[p].apply(idx, u)
                })
                .collect();
            let dx = lu.solve(r);
            for (p, &idx) in self.interior.iter().enumerate() {
                u[idx] += dx[p];
            }
        }
        Ok(())
    }

    /// Damped multicolour Gauss–Seidel. Colours are parity patterns of the node
    /// multi-index, so nodes of one colour never share a stencil. Returns
    /// `(sweeps, final damping)`.
    pub fn solve_iterative(
        &self,
        u: &mut [f64],
        f: &[f64],
        tol: f64,
        max_sweeps: usize,
    ) -> Result<(usize, f64), SolverError> {
        let d = self.grid.dim();
        let mut colours: Vec<Vec<usize>> = vec![Vec::new(); 1 << d];
        let mut mi = vec![0usize; d];
        for (p, &idx) in self.interior.iter().enumerate() {
            self.grid.multi_index_into(idx, &mut mi);
            let c = mi.iter().enumerate().fold(0usize, |acc, (i, m)| acc | ((m & 1) << i));
            colours[c].push(p);
        }
        let mut omega = 1.0;
        let mut best = f64::INFINITY;
        let mut since_best = 0usize;
        let check_every = 10;
        let mut residual = self.residual(u, f);
        for sweep in 1..=max_sweeps {
            for colour in &colours {
                let updates: Vec<f64> = colour
                    .par_iter()
                    .map(|&p| {
                        let idx = self.interior[p];
                        let st = self.stencils[p];
                        let mut acc = f[idx];
                        for &(off, w) in &st.nbrs {
                            acc -= w * u[(idx as isize + off) as usize];
                        }
                        (1.0 - omega) * u[idx] + omega * acc / st.center
                    })
                    .collect();
                for (&p, v) in colour.iter().zip(updates) {
                    u[self.interior[p]] = v;
                }
            }
            if sweep % check_every == 0 || sweep == max_sweeps {
                residual = self.residual(u, f);
                if !residual.is_finite() {
                    return Err(SolverError::NoConvergence { iterations: sweep, residual });
                }
                if residual <= tol {
                    return Ok((sweep, omega));
                }
                if residual < 0.999 * best {
                    best = residual;
                    since_best = 0;
                } else {
                    since_best += check_every;
                    if since_best >= 200 && omega > 1.0 / 64.0 {
                        omega *= 0.5;
                        since_best = 0;
                    }
                }
            }
        }
        Err(SolverError::NoConvergence { iterations: max_sweeps, residual })
    }
}

/// Square band matrix with equal lower and upper bandwidth, factored without pivoting.
/// The stencils are diagonally dominant M-matrix rows, so pivots stay away from zero.
struct Band {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl Band {
    fn width(&self) -> usize {
        2 * self.bw + 1
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.bw - i)
    }

    fn assemble(sys: &System<'_>, bw: usize) -> Band {
        let n = sys.n();
        let mut b = Band { n, bw, data: vec![0.0; n * (2 * bw + 1)] };
        for p in 0..n {
            let idx = sys.interior[p];
            let st = sys.stencils[p];
            let k = b.at(p, p);
            b.data[k] += st.center;
            for &(off, w) in &st.nbrs {
                let q = sys.pos_of[(idx as isize + off) as usize];
                if q != NONE {
                    let k = b.at(p, q);
                    b.data[k] += w;
                }
            }
        }
        b
    }

    fn factor(mut self) -> Result<Band, SolverError> {
        let (n, bw, w) = (self.n, self.bw, self.width());
        for k in 0..n {
            let piv = self.data[k * w + bw];
            if piv.abs() < 1e-300 || !piv.is_finite() {
                return Err(SolverError::Singular { row: k });
            }
            let jmax = (k + bw + 1).min(n);
            let (head, tail) = self.data.split_at_mut((k + 1) * w);
            let krow = &head[k * w..];
            let imax = (k + bw + 1).min(n);
            tail[..(imax - k - 1) * w].par_chunks_mut(w).enumerate().for_each(|(r, row)| {
                let i = k + 1 + r;
                let ik = k + bw - i;
                let l = row[ik] / piv;
                if l == 0.0 {
                    return;
                }
                row[ik] = l;
                for j in (k + 1)..jmax {
                    row[j + bw - i] -= l * krow[j + bw - k];
                }
            });
        }
        Ok(self)
    }

    fn solve(&self, mut x: Vec<f64>) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.width());
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for j in lo..i {
                s -= self.data[i * w + j + bw - i] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw + 1).min(n);
            let mut s = x[i];
            for j in (i + 1)..hi {
                s -= self.data[i * w + j + bw - i] * x[j];
            }
            x[i] = s / self.data[i * w + bw];
        }
        x
    }
}
