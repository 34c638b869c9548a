//! Physical fields recovered from a converged dual state.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dual::DualPotential;
use crate::error::{Error, Result};
use crate::measure::FreeBoundary;
use crate::model::Model;

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Free surface `r(rho(z))` on the boundary rows.
pub fn free_surface(model: &Model, boundary: &FreeBoundary) -> Result<Vec<f64>> {
    boundary.rho.iter().map(|&r| model.r_of_s(r)).collect()
}

/// CSV with header `z,rho,varsigma`.
pub fn write_boundary_csv<W: Write>(model: &Model, boundary: &FreeBoundary, out: W) -> Result<()> {
    let surface = free_surface(model, boundary)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["z", "rho", "varsigma"]).map_err(csv_error)?;
    for ((z, rho), vs) in boundary.z.iter().zip(&boundary.rho).zip(&surface) {
        w.write_record([z.to_string(), rho.to_string(), vs.to_string()]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Pressure `P(s[r], z, theta0(z)) - Omega^2 r^2 / 2`.
pub fn pressure(model: &Model, potential: &DualPotential, r: f64, z: f64) -> Result<f64> {
    let s = model.s_of_r(r)?;
    let p = potential.best_scaled(s, model.scaled_height(z)).1;
    Ok(p - 0.5 * model.omega * model.omega * r * r)
}

/// Largest `|pressure|` on the free surface over rows with `rho > 1e-3`.
pub fn surface_pressure_residual(model: &Model, potential: &DualPotential, boundary: &FreeBoundary) -> Result<f64> {
    let surface = free_surface(model, boundary)?;
    let mut worst: f64 = 0.0;
    for ((&z, &rho), &r) in boundary.z.iter().zip(&boundary.rho).zip(&surface) {
        if rho > 1e-3 {
            worst = worst.max(pressure(model, potential, r, z)?.abs());
        }
    }
    Ok(worst)
}

/// Cell-centered sample grid covering `[r0, max surface] x [0, H]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub r: Vec<f64>,
    pub z: Vec<f64>,
}

impl FieldGrid {
    pub fn new(model: &Model, boundary: &FreeBoundary, nr: usize, nz: usize) -> Result<Self> {
        let outer = model.r_of_s(boundary.max_rho())?;
        let dr = (outer - model.r0) / nr as f64;
        let dz = model.height / nz as f64;
        Ok(FieldGrid {
            r: (0..nr).map(|i| model.r0 + (i as f64 + 0.5) * dr).collect(),
            z: (0..nz).map(|j| (j as f64 + 0.5) * dz).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.r.len() * self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index, `r` fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.r.len() + i
    }
}

/// Pressure, potential temperature and swirl sampled inside the vortex.
///
/// Entries outside the free surface are `None`.
#[derive(Clone, Debug)]
pub struct PhysicalFields {
    pub grid: FieldGrid,
    pub cell: Vec<Option<usize>>,
    pub pressure: Vec<f64>,
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
}

/// Samples the fields of `potential` on `grid`, masking points outside `boundary`.
pub fn reconstruct(model: &Model, potential: &DualPotential, boundary: &FreeBoundary, grid: FieldGrid) -> PhysicalFields {
    let nr = grid.r.len();
    let samples: Vec<(Option<usize>, f64, f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (r, z) = (grid.r[k % nr], grid.z[k / nr]);
            let s = match model.s_of_r(r) {
                Ok(s) if s <= boundary.at(z) => s,
                _ => return (None, f64::NAN, f64::NAN, f64::NAN),
            };
            let (i, p) = potential.best_scaled(s, model.scaled_height(z));
            let q = potential.atoms[i];
            let phi = p - 0.5 * model.omega * model.omega * r * r;
            (Some(i), phi, q[1] / model.g, q[0].sqrt() / r - r * model.omega)
        })
        .collect();
    let mut f = PhysicalFields {
        grid,
        cell: Vec::with_capacity(samples.len()),
        pressure: Vec::with_capacity(samples.len()),
        theta: Vec::with_capacity(samples.len()),
        u: Vec::with_capacity(samples.len()),
    };
    for (c, p, t, u) in samples {
        f.cell.push(c);
        f.pressure.push(p);
        f.theta.push(t);
        f.u.push(u);
    }
    f
}

impl PhysicalFields {
    /// Relative L1 residual of `u^2 / r + 2 Omega u = d(pressure)/dr`, with
    /// centered differences taken only where the whole stencil lies in one cell.
    pub fn gradient_balance_residual(&self, model: &Model) -> f64 {
        let g = &self.grid;
        let (nr, nz) = (g.r.len(), g.z.len());
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..nz {
            for i in 1..nr.saturating_sub(1) {
                let k = g.index(i, j);
                let c = match self.cell[k] {
                    Some(c) => c,
                    None => continue,
                };
                let (kl, kr) = (g.index(i - 1, j), g.index(i + 1, j));
                if self.cell[kl] != Some(c) || self.cell[kr] != Some(c) {
                    continue;
                }
                let dphi = (self.pressure[kr] - self.pressure[kl]) / (g.r[i + 1] - g.r[i - 1]);
                let (r, u) = (g.r[i], self.u[k]);
                num += (u * u / r + 2.0 * model.omega * u - dphi).abs();
                den += dphi.abs();
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// CSV with header `r,z,pressure,theta,u`; masked points are omitted.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "z", "pressure", "theta", "u"]).map_err(csv_error)?;
        let nr = self.grid.r.len();
        for (k, c) in self.cell.iter().enumerate() {
            if c.is_some() {
                let (r, z) = (self.grid.r[k % nr], self.grid.z[k / nr]);
                w.write_record([
                    r.to_string(),
                    z.to_string(),
                    self.pressure[k].to_string(),
                    self.theta[k].to_string(),
                    self.u[k].to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Meridional velocity `(v, w)` at every unmasked sample, from the change of
/// the assigned cell's barycenter between two time levels.
pub fn meridional(
    model: &Model,
    fields: &PhysicalFields,
    now: &[[f64; 2]],
    next: &[[f64; 2]],
    tau: f64,
) -> Result<Vec<[f64; 4]>> {
    if now.len() != next.len() {
        return Err(Error::Domain("barycenter counts differ between time levels".into()));
    }
    let per_cell: Vec<[f64; 2]> = now
        .iter()
        .zip(next)
        .map(|(a, b)| Ok([(model.r_of_s(b[0])? - model.r_of_s(a[0])?) / tau, (b[1] - a[1]) / tau]))
        .collect::<Result<_>>()?;
    let nr = fields.grid.r.len();
    Ok(fields
        .cell
        .iter()
        .enumerate()
        .filter_map(|(k, c)| c.map(|c| [fields.grid.r[k % nr], fields.grid.z[k / nr], per_cell[c][0], per_cell[c][1]]))
        .collect())
}

/// CSV with header `r,z,v,w`.
pub fn write_meridional_csv<W: Write>(rows: &[[f64; 4]], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "z", "v", "w"]).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Whether the sampled assignment map is invertible cell by cell.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    /// Samples in each cell.
    pub cell_sizes: Vec<usize>,
    /// Connected components of each cell on the grid (4-neighbour).
    pub components: Vec<usize>,
    /// No two atoms share a position.
    pub distinct_atoms: bool,
    pub passed: bool,
}

/// Every cell must be sampled, connected on the grid, and carried by its own atom.
pub fn stability_check(fields: &PhysicalFields, atoms: &[[f64; 2]]) -> StabilityReport {
    let g = &fields.grid;
    let (nr, nz) = (g.r.len(), g.z.len());
    let n = atoms.len();
    let mut sizes = vec![0usize; n];
    let mut components = vec![0usize; n];
    let mut seen = vec![false; fields.cell.len()];
    let mut queue = VecDeque::new();
    for start in 0..fields.cell.len() {
        let Some(c) = fields.cell[start] else { continue };
        if seen[start] {
            continue;
        }
        components[c] += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            sizes[c] += 1;
            let (i, j) = (k % nr, k / nr);
            let mut nb = Vec::with_capacity(4);
            if i > 0 {
                nb.push(k - 1);
            }
            if i + 1 < nr {
                nb.push(k + 1);
            }
            if j > 0 {
                nb.push(k - nr);
            }
            if j + 1 < nz {
                nb.push(k + nr);
            }
            for m in nb {
                if !seen[m] && fields.cell[m] == Some(c) {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
    }
    let distinct_atoms = (0..n).all(|a| (a + 1..n).all(|b| atoms[a] != atoms[b]));
    let passed = distinct_atoms && sizes.iter().all(|&s| s > 0) && components.iter().all(|&c| c == 1);
    StabilityReport { cell_sizes: sizes, components, distinct_atoms, passed }
}
