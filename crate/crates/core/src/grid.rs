//! Uniform cell-centred grids, configurations and ball-union masks.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::params::ModelParams;
use std::io::Write;

/// Values per grid cell (a density when used as a functional).
pub type Field = Vec<f64>;

pub const NONE: u32 = u32::MAX;

/// Unordered set of bump centres.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub points: Vec<Vec<f64>>,
}

impl Configuration {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Configuration> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if points.is_empty() || dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::Invalid("configuration needs points of one common dimension".into()));
        }
        Ok(Configuration { points })
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn union(&self, other: &Configuration) -> Configuration {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        Configuration { points }
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.k() {
            for j in i + 1..self.k() {
                best = best.min(dist(&self.points[i], &self.points[j]));
            }
        }
        best
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Separation defect `(2R* - min_{i≠j} |x_i - x_j|)^+`, zero for one point.
pub fn sigma_of(config: &Configuration, r_star: f64) -> f64 {
    if config.k() < 2 {
        return 0.0;
    }
    (2.0 * r_star - config.min_separation()).max(0.0)
}

/// `max_x min_y |x-y| + max_y min_x |x-y|`.
/// `max_i #{j : |x_j - x_i| < radius}`, the point itself included.
pub fn crowding(config: &Configuration, radius: f64) -> usize {
    config
        .points
        .iter()
        .map(|a| config.points.iter().filter(|b| dist(a, b) < radius).count())
        .max()
        .unwrap_or(0)
}

pub fn config_dist(a: &Configuration, b: &Configuration) -> Result<f64> {
    if a.k() != b.k() {
        return Err(Error::SizeMismatch(a.k(), b.k()));
    }
    let one_sided = |p: &Configuration, r: &Configuration| {
        p.points
            .iter()
            .map(|x| r.points.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(one_sided(a, b) + one_sided(b, a))
}

/// Box of cells with centres at integer multiples of `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub shape: Vec<usize>,
    /// Lattice index of the first cell along each axis.
    pub lo: Vec<i64>,
    pub h: f64,
    pub strides: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<i64>, shape: Vec<usize>, h: f64) -> Grid {
        let dim = shape.len();
        let mut strides = vec![1; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        Grid { dim, shape, lo, h, strides }
    }

    /// Box covering `[min - pad, max + pad]` per axis.
    pub fn covering(min: &[f64], max: &[f64], pad: f64, h: f64) -> Grid {
        let lo: Vec<i64> = min.iter().map(|m| ((m - pad) / h).floor() as i64).collect();
        let hi: Vec<i64> = max.iter().map(|m| ((m + pad) / h).ceil() as i64).collect();
        let shape = lo.iter().zip(&hi).map(|(l, u)| (u - l + 1) as usize).collect();
        Grid::new(lo, shape, h)
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn index_of(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for a in 0..self.dim {
            idx[a] = i / self.strides[a];
            i %= self.strides[a];
        }
        idx
    }

    pub fn center(&self, i: usize) -> Vec<f64> {
        self.index_of(i)
            .iter()
            .zip(&self.lo)
            .map(|(&j, &l)| (l + j as i64) as f64 * self.h)
            .collect()
    }

    /// Neighbour table, `2·dim` entries per cell (`-e_a`, `+e_a`), `NONE` off the box.
    pub fn neighbours(&self) -> Vec<u32> {
        let n = self.len();
        let mut out = vec![NONE; 2 * self.dim * n];
        for i in 0..n {
            let idx = self.index_of(i);
            for a in 0..self.dim {
                if idx[a] > 0 {
                    out[2 * self.dim * i + 2 * a] = (i - self.strides[a]) as u32;
                }
                if idx[a] + 1 < self.shape[a] {
                    out[2 * self.dim * i + 2 * a + 1] = (i + self.strides[a]) as u32;
                }
            }
        }
        out
    }
}

/// Cell-centre discretization of `A(x,d)` with per-bump patches.
#[derive(Clone, Debug)]
pub struct DomainMask {
    pub grid: Grid,
    pub centers: Vec<Vec<f64>>,
    pub d: f64,
    /// `R* + d`.
    pub radius: f64,
    pub rho: f64,
    pub inside: Vec<bool>,
    /// Indices of inside cells, ascending.
    pub cells: Vec<u32>,
    /// Inside cells within `2R₀` of each centre.
    pub patches: Vec<Vec<u32>>,
    /// Ball `B(x_i, ρ)` holding the cell: `i`, `-1` for none, `-2` for several.
    pub rho_owner: Vec<i32>,
    /// Cell centres, `dim` values per cell.
    pub coords: Vec<f64>,
    pub nbr: Vec<u32>,
    pub exec: Exec,
}

impl DomainMask {
    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim()..(i + 1) * self.dim()]
    }

    /// Distance from cell `i` to centre `j`.
    pub fn r(&self, i: usize, j: usize) -> f64 {
        dist(self.x(i), &self.centers[j])
    }

    pub fn vol(&self) -> f64 {
        self.grid.cell_volume()
    }

    /// Cells whose centres lie in `∪_j B(x_j, radius)`, restricted to the mask.
    pub fn cells_within(&self, radius: f64) -> Vec<u32> {
        self.cells
            .iter()
            .copied()
            .filter(|&c| (0..self.k()).any(|j| self.r(c as usize, j) < radius))
            .collect()
    }

    pub fn zero(&self) -> Field {
        vec![0.0; self.len()]
    }

    pub fn with_exec(mut self, exec: Exec) -> DomainMask {
        self.exec = exec;
        self
    }
}

/// Mask of `A(x,d)` on the lattice `hℤ^N`.
pub fn build_domain(config: &Configuration, d: f64, h: f64, params: &ModelParams) -> Result<DomainMask> {
    if !(d >= 0.0) || !(h > 0.0) {
        return Err(Error::Invalid(format!("d = {d}, h = {h}")));
    }
    if config.dim() != params.n {
        return Err(Error::Invalid(format!(
            "configuration dimension {} differs from N = {}",
            config.dim(),
            params.n
        )));
    }
    let dim = config.dim();
    let radius = params.r_star + d;
    let mut min = vec![f64::INFINITY; dim];
    let mut max = vec![f64::NEG_INFINITY; dim];
    for p in &config.points {
        for a in 0..dim {
            min[a] = min[a].min(p[a] - radius);
            max[a] = max[a].max(p[a] + radius);
        }
    }
    let grid = Grid::covering(&min, &max, 3.0 * h, h);
    let n = grid.len();
    let mut coords = vec![0.0; n * dim];
    for i in 0..n {
        coords[i * dim..(i + 1) * dim].copy_from_slice(&grid.center(i));
    }
    let k = config.k();
    let mut inside = vec![false; n];
    let mut rho_owner = vec![-1i32; n];
    let mut counts = vec![0usize; k];
    let mut cells = Vec::new();
    let mut patches = vec![Vec::new(); k];
    for i in 0..n {
        let x = &coords[i * dim..(i + 1) * dim];
        for (j, c) in config.points.iter().enumerate() {
            let r = dist(x, c);
            if r < radius {
                inside[i] = true;
                counts[j] += 1;
            }
            if r < params.rho {
                rho_owner[i] = if rho_owner[i] == -1 { j as i32 } else { -2 };
            }
        }
        if inside[i] {
            cells.push(i as u32);
            for (j, c) in config.points.iter().enumerate() {
                if dist(x, c) < 2.0 * params.r0 {
                    patches[j].push(i as u32);
                }
            }
        }
    }
    if let Some((ball, &cells)) = counts.iter().enumerate().find(|(_, &c)| c < 100) {
        return Err(Error::GridTooCoarse { ball, cells });
    }
    let nbr = grid.neighbours();
    Ok(DomainMask {
        grid,
        centers: config.points.clone(),
        d,
        radius,
        rho: params.rho,
        inside,
        cells,
        patches,
        rho_owner,
        coords,
        nbr,
        exec: Exec::default(),
    })
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV `x1,...,xN,u`, one row per inside cell.
pub fn write_field_csv<W: Write>(dm: &DomainMask, u: &[f64], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=dm.dim()).map(|a| format!("x{a}")).collect();
    header.push("u".into());
    wr.write_record(&header)?;
    for &c in &dm.cells {
        let c = c as usize;
        let mut row: Vec<String> = dm.x(c).iter().map(|&v| fmt17(v)).collect();
        row.push(fmt17(u[c]));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// CSV `x1,...,xN,inside` over the whole box.
pub fn write_mask_csv<W: Write>(dm: &DomainMask, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=dm.dim()).map(|a| format!("x{a}")).collect();
    header.push("inside".into());
    wr.write_record(&header)?;
    for c in 0..dm.len() {
        let mut row: Vec<String> = dm.x(c).iter().map(|&v| fmt17(v)).collect();
        row.push(if dm.inside[c] { "1".into() } else { "0".into() });
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Rows of a field CSV as `(coordinates, value)`.
pub fn read_field_csv<R: std::io::Read>(input: R) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.parse::<f64>()).collect();
        let mut vals = vals.map_err(|e| Error::Invalid(format!("bad number in field CSV: {e}")))?;
        let u = vals.pop().ok_or_else(|| Error::Invalid("empty CSV row".into()))?;
        rows.push((vals, u));
    }
    Ok(rows)
}

/// Write rows in the field CSV layout.
pub fn write_rows_csv<W: Write>(dim: usize, rows: &[(Vec<f64>, f64)], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=dim).map(|a| format!("x{a}")).collect();
    header.push("u".into());
    wr.write_record(&header)?;
    for (x, u) in rows {
        let mut row: Vec<String> = x.iter().map(|&v| fmt17(v)).collect();
        row.push(fmt17(*u));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
