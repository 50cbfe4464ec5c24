//! Emerging/submerged decomposition and local barycentres.

use crate::error::{Error, Result};
use crate::grid::{DomainMask, Field, NONE};

#[derive(Clone, Debug)]
pub struct Piece {
    pub owner: usize,
    pub values: Field,
}

#[derive(Clone, Debug)]
pub struct EmergingSplit {
    pub delta: f64,
    /// `u_δ = min(u, δ)`, lowered by at most one ulp of `u` where that keeps `u_δ + u_i^δ == u`.
    pub u_sub: Field,
    /// One piece per centre, ordered by owner.
    pub pieces: Vec<Piece>,
}

impl EmergingSplit {
    /// `u_δ + Σ_i u_i^δ`.
    pub fn reassemble(&self) -> Field {
        let mut u = self.u_sub.clone();
        for p in &self.pieces {
            for (a, b) in u.iter_mut().zip(&p.values) {
                *a += b;
            }
        }
        u
    }
}

/// Split `u` at level `delta`; connected components of `{u > δ}` are assigned
/// to the unique `ρ`-ball containing them.
pub fn emerging_split(u: &[f64], dm: &DomainMask, delta: f64) -> Result<EmergingSplit> {
    let n = dm.len();
    let n2 = 2 * dm.dim();
    if u.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Invalid("field must be finite and nonnegative".into()));
    }
    let mut seen = vec![false; n];
    let mut pieces: Vec<Piece> = (0..dm.k()).map(|owner| Piece { owner, values: vec![0.0; n] }).collect();
    let mut u_sub: Field = u.iter().map(|&v| v.min(delta)).collect();
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] || u[start] <= delta {
            continue;
        }
        let mut comp = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(c) = stack.pop() {
            comp.push(c);
            for &j in &dm.nbr[n2 * c..n2 * (c + 1)] {
                if j != NONE {
                    let j = j as usize;
                    if !seen[j] && u[j] > delta {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        let owner = dm.rho_owner[comp[0]];
        if owner < 0 || comp.iter().any(|&c| dm.rho_owner[c] != owner) {
            let x = dm.x(comp[0]);
            return Err(Error::NotEmerging(format!(
                "component through {x:?} is not inside a single rho-ball"
            )));
        }
        let vals = &mut pieces[owner as usize].values;
        for c in comp {
            (u_sub[c], vals[c]) = excess(u[c], delta);
        }
    }
    if let Some(p) = pieces.iter().find(|p| p.values.iter().all(|&v| v == 0.0)) {
        return Err(Error::NotEmerging(format!("no emerging part around centre {}", p.owner)));
    }
    Ok(EmergingSplit { delta, u_sub, pieces })
}

/// Splits `v > δ` into `(s, p)` with `s + p == v` exactly and `s <= δ`; `s`
/// is `δ` unless rounding forces it one ulp of `v` lower.
fn excess(v: f64, delta: f64) -> (f64, f64) {
    let mut p = v - delta;
    let mut s = v - p;
    while s > delta || s + p != v {
        p = p.next_up();
        s = v - p;
    }
    (s, p)
}

/// `β_i = ∫ (x - x_i) (u_i^δ)² / ‖u_i^δ‖²`.
pub fn barycenter(split: &EmergingSplit, i: usize, dm: &DomainMask) -> Result<Vec<f64>> {
    let p = &split.pieces[i].values;
    let c = &dm.centers[split.pieces[i].owner];
    let dim = dm.dim();
    let mut num = vec![0.0; dim];
    let mut den = 0.0;
    for (cell, &v) in p.iter().enumerate() {
        if v > 0.0 {
            let v2 = v * v;
            den += v2;
            let x = dm.x(cell);
            for a in 0..dim {
                num[a] += (x[a] - c[a]) * v2;
            }
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroPiece(i));
    }
    Ok(num.into_iter().map(|s| s / den).collect())
}

/// Both sides of the barycentre-defect inequality for bump `i`:
/// `|∫ (x - x_i)[2 v_i^δ (u - v) - (u_i^δ)² + (v_i^δ)²]|` and `ρ ‖u - v‖²_{L²(B(x_i,ρ))}`.
pub fn barycenter_defect(su: &EmergingSplit, sv: &EmergingSplit, i: usize, dm: &DomainMask) -> (f64, f64) {
    let dim = dm.dim();
    let (pu, pv) = (&su.pieces[i].values, &sv.pieces[i].values);
    let u = su.reassemble();
    let v = sv.reassemble();
    let c = &dm.centers[i];
    let mut lhs = vec![0.0; dim];
    let mut l2 = 0.0;
    for cell in 0..dm.len() {
        if dm.r(cell, i) >= dm.rho {
            continue;
        }
        let du = u[cell] - v[cell];
        l2 += du * du;
        let f = 2.0 * pv[cell] * du - pu[cell] * pu[cell] + pv[cell] * pv[cell];
        if f != 0.0 {
            let x = dm.x(cell);
            for a in 0..dim {
                lhs[a] += (x[a] - c[a]) * f;
            }
        }
    }
    let vol = dm.vol();
    (lhs.iter().map(|s| s * s).sum::<f64>().sqrt() * vol, dm.rho * l2 * vol)
}
