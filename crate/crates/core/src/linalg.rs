//! Discrete Laplacian, inner products and preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{DomainMask, Field, NONE};

/// `h^N Σ a_i b_i`.
pub fn dot(dm: &DomainMask, a: &[f64], b: &[f64]) -> f64 {
    dm.vol() * dm.exec.sum(a.len(), |i| a[i] * b[i])
}

/// `-Δ_h u` on every box cell, with `u` taken as zero off the box.
pub fn neg_laplacian(dm: &DomainMask, u: &[f64]) -> Field {
    let n2 = 2 * dm.dim();
    let ih2 = 1.0 / (dm.grid.h * dm.grid.h);
    let mut out = dm.zero();
    dm.exec.fill(&mut out, |i| {
        let mut s = n2 as f64 * u[i];
        for &j in &dm.nbr[n2 * i..n2 * (i + 1)] {
            if j != NONE {
                s -= u[j as usize];
            }
        }
        s * ih2
    });
    out
}

/// Discrete Dirichlet form `h^{N-2} Σ_edges (a_i - a_j)(b_i - b_j)`.
pub fn dirichlet_form(dm: &DomainMask, a: &[f64], b: &[f64]) -> f64 {
    let dim = dm.dim();
    let n2 = 2 * dim;
    let s = dm.exec.sum(a.len(), |i| {
        let mut s = 0.0;
        for ax in 0..dim {
            let j = dm.nbr[n2 * i + 2 * ax + 1];
            if j != NONE {
                let j = j as usize;
                s += (a[i] - a[j]) * (b[i] - b[j]);
            }
        }
        s
    });
    s * dm.vol() / (dm.grid.h * dm.grid.h)
}

/// `(-Δ_h + c)` restricted to a cell subset, zero outside it.
pub struct SubsetOp {
    pub cells: Vec<u32>,
    nbr: Vec<u32>,
    shift: Vec<f64>,
    ih2: f64,
    n2: usize,
    vol: f64,
    exec: Exec,
}

#[derive(Clone, Copy, Debug)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

impl SubsetOp {
    pub fn new<F: Fn(usize) -> f64>(dm: &DomainMask, cells: &[u32], shift: F) -> SubsetOp {
        let n2 = 2 * dm.dim();
        let mut local = vec![NONE; dm.len()];
        for (k, &c) in cells.iter().enumerate() {
            local[c as usize] = k as u32;
        }
        let mut nbr = vec![NONE; n2 * cells.len()];
        for (k, &c) in cells.iter().enumerate() {
            for s in 0..n2 {
                let j = dm.nbr[n2 * c as usize + s];
                if j != NONE {
                    nbr[n2 * k + s] = local[j as usize];
                }
            }
        }
        SubsetOp {
            cells: cells.to_vec(),
            nbr,
            shift: cells.iter().map(|&c| shift(c as usize)).collect(),
            ih2: 1.0 / (dm.grid.h * dm.grid.h),
            n2,
            vol: dm.vol(),
            exec: dm.exec,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n2 = self.n2;
        self.exec.fill(y, |k| {
            let mut s = n2 as f64 * x[k];
            for &j in &self.nbr[n2 * k..n2 * (k + 1)] {
                if j != NONE {
                    s -= x[j as usize];
                }
            }
            s * self.ih2 + self.shift[k] * x[k]
        });
    }

    pub fn gather(&self, f: &[f64]) -> Vec<f64> {
        self.cells.iter().map(|&c| f[c as usize]).collect()
    }

    pub fn scatter(&self, x: &[f64], len: usize) -> Field {
        let mut f = vec![0.0; len];
        for (k, &c) in self.cells.iter().enumerate() {
            f[c as usize] = x[k];
        }
        f
    }

    /// `h^N Σ a_k b_k` over the subset.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.vol * self.exec.sum(a.len(), |k| a[k] * b[k])
    }

    /// Jacobi-preconditioned CG to relative residual `tol`.
    pub fn solve(&self, b: &[f64], tol: f64, max_it: usize) -> Result<(Vec<f64>, CgStats)> {
        self.solve_from(b, None, tol, max_it)
    }

    /// As [`SubsetOp::solve`], starting from `x0` when given.
    pub fn solve_from(&self, b: &[f64], x0: Option<&[f64]>, tol: f64, max_it: usize) -> Result<(Vec<f64>, CgStats)> {
        let n = self.len();
        let ex = self.exec;
        let bnorm = ex.sum(n, |k| b[k] * b[k]).sqrt();
        if bnorm == 0.0 {
            return Ok((vec![0.0; n], CgStats { iterations: 0, rel_residual: 0.0 }));
        }
        let dinv: Vec<f64> = self.shift.iter().map(|s| 1.0 / (self.n2 as f64 * self.ih2 + s)).collect();
        let mut x = match x0 {
            Some(x0) => x0.to_vec(),
            None => vec![0.0; n],
        };
        let mut r = b.to_vec();
        if x0.is_some() {
            let mut ax = vec![0.0; n];
            self.apply(&x, &mut ax);
            for k in 0..n {
                r[k] -= ax[k];
            }
            if ex.sum(n, |k| r[k] * r[k]).sqrt() <= tol * bnorm {
                return Ok((x, CgStats { iterations: 0, rel_residual: 0.0 }));
            }
        }
        let mut z: Vec<f64> = (0..n).map(|k| r[k] * dinv[k]).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = ex.sum(n, |k| r[k] * z[k]);
        let mut rel = 1.0;
        for it in 0..max_it {
            self.apply(&p, &mut ap);
            let pap = ex.sum(n, |k| p[k] * ap[k]);
            if !(pap > 0.0) {
                return Err(Error::SolverStall(rel));
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            rel = ex.sum(n, |k| r[k] * r[k]).sqrt() / bnorm;
            if rel <= tol {
                return Ok((x, CgStats { iterations: it + 1, rel_residual: rel }));
            }
            for k in 0..n {
                z[k] = r[k] * dinv[k];
            }
            let rz_new = ex.sum(n, |k| r[k] * z[k]);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::SolverStall(rel))
    }
}

/// Solve a small symmetric positive definite system by Cholesky; `None` when
/// the matrix is not numerically positive definite relative to `rel_tol`.
pub fn cholesky_solve(a: &[Vec<f64>], b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= rel_tol * scale {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}
