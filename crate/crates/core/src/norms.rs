//! Region-wise primal and dual norms.

use crate::error::{Error, Result};
use crate::grid::{DomainMask, NONE};
use crate::linalg::{cholesky_solve, SubsetOp};
use crate::split::EmergingSplit;

/// Relative residual for every Riesz solve.
pub const CG_TOL: f64 = 1e-10;

/// `max_j ‖u‖_{H¹(B(x_j, R*+d))}`; edges leaving the mask see the zero
/// boundary value, edges into another ball are not counted.
pub fn norm_xd(dm: &DomainMask, u: &[f64]) -> f64 {
    let n2 = 2 * dm.dim();
    let ih2 = 1.0 / (dm.grid.h * dm.grid.h);
    let per_ball: Vec<f64> = (0..dm.k())
        .map(|j| {
            let in_ball = |c: usize| dm.inside[c] && dm.r(c, j) < dm.radius;
            let mut s = 0.0;
            for &c in &dm.cells {
                let c = c as usize;
                if !in_ball(c) {
                    continue;
                }
                s += u[c] * u[c];
                for t in 0..n2 {
                    let nb = dm.nbr[n2 * c + t];
                    if nb == NONE || !dm.inside[nb as usize] {
                        s += u[c] * u[c] * ih2;
                    } else if t % 2 == 1 && in_ball(nb as usize) {
                        let dv = u[c] - u[nb as usize];
                        s += dv * dv * ih2;
                    }
                }
            }
            (s * dm.vol()).sqrt()
        })
        .collect();
    per_ball.into_iter().fold(0.0, f64::max)
}

fn riesz(op: &SubsetOp, b: &[f64]) -> Result<Vec<f64>> {
    let cap = 10 * op.len().max(10);
    op.solve(b, CG_TOL, cap).map(|(x, _)| x)
}

/// `H^{-1}` norm of the density `hfun` on the cell set `patch` (zero
/// boundary values): `√⟨h, g⟩` with `(-Δ+1) g = h`.
pub fn dual_norm_patch(dm: &DomainMask, hfun: &[f64], patch: &[u32]) -> Result<f64> {
    if patch.is_empty() {
        return Err(Error::Invalid("empty patch".into()));
    }
    let op = SubsetOp::new(dm, patch, |_| 1.0);
    let b = op.gather(hfun);
    let g = riesz(&op, &b)?;
    Ok(op.dot(&b, &g).max(0.0).sqrt())
}

/// `‖h‖_{*,x,d}`: maximum patch dual norm without projection.
pub fn dual_norm_xd(dm: &DomainMask, hfun: &[f64]) -> Result<f64> {
    let norms = dm.exec.map(&dm.patches, |p| dual_norm_patch(dm, hfun, p));
    let mut best = 0.0f64;
    for n in norms {
        best = best.max(n?);
    }
    Ok(best)
}

/// `‖h‖_{*,u}` and the per-bump minimizing multipliers.
pub fn projected_residual(dm: &DomainMask, hfun: &[f64], split: &EmergingSplit) -> Result<(f64, Vec<Vec<f64>>)> {
    let dim = dm.dim();
    let jobs: Vec<usize> = (0..dm.k()).collect();
    let out = dm.exec.map(&jobs, |&j| -> Result<(f64, Vec<f64>)> {
        let patch = &dm.patches[j];
        let op = SubsetOp::new(dm, patch, |_| 1.0);
        let hb = op.gather(hfun);
        let gh = riesz(&op, &hb)?;
        let piece = &split.pieces[j].values;
        let c = &dm.centers[j];
        let mut bs = Vec::with_capacity(dim);
        let mut rs = Vec::with_capacity(dim);
        for a in 0..dim {
            let b: Vec<f64> = patch.iter().map(|&cell| (dm.x(cell as usize)[a] - c[a]) * piece[cell as usize]).collect();
            rs.push(riesz(&op, &b)?);
            bs.push(b);
        }
        let gram: Vec<Vec<f64>> = (0..dim).map(|a| (0..dim).map(|b| op.dot(&bs[a], &rs[b])).collect()).collect();
        let rhs: Vec<f64> = (0..dim).map(|a| op.dot(&hb, &rs[a])).collect();
        let lam = cholesky_solve(&gram, &rhs, 1e-12).ok_or(Error::DegenerateGram(j))?;
        let proj: f64 = rhs.iter().zip(&lam).map(|(r, l)| r * l).sum();
        Ok(((op.dot(&hb, &gh) - proj).max(0.0).sqrt(), lam))
    });
    let mut best = 0.0f64;
    let mut lambdas = Vec::with_capacity(dm.k());
    for r in out {
        let (n, l) = r?;
        best = best.max(n);
        lambdas.push(l);
    }
    Ok((best, lambdas))
}
