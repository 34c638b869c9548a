//! Dual objective `J`, primal objective `K` and the cell statistics they share.

use rayon::prelude::*;

use super::functional::{minimize_row, Row};
use super::potential::DualPotential;
use crate::config::SolverSettings;
use crate::error::Result;
use crate::measure::{row_midpoints, FreeBoundary, ParticleMeasure, PointCloud, ReferenceMeasure};
use crate::model::Model;
use crate::transport::{exact_discrete_ot, GroundCost};

/// Mass tolerance outside of which the primal objective is infinite.
pub const MASS_TOLERANCE: f64 = 1e-3;

/// Everything computed from one dual iterate.
///
/// Cell statistics are integrated exactly in `s` along every height row
/// (the potential is piecewise affine there) and by the midpoint rule in `z`.
#[derive(Clone, Debug)]
pub struct Evaluation {
    /// `J(psi)`.
    pub objective: f64,
    pub z: Vec<f64>,
    pub dz: f64,
    /// Row-wise minimizers of the boundary functional, before projection.
    pub rho: Vec<f64>,
    pub cell_mass: Vec<f64>,
    /// `int s` over each cell.
    pub s_moment: Vec<f64>,
    /// `int z / theta0(z)` over each cell.
    pub y_moment: Vec<f64>,
    pub total_mass: f64,
}

impl Evaluation {
    pub fn raw_boundary(&self) -> FreeBoundary {
        FreeBoundary { z: self.z.clone(), rho: self.rho.clone(), dz: self.dz }
    }

    /// `max_i |mass_i - w_i|`.
    pub fn mass_residual(&self, weights: &[f64]) -> f64 {
        self.cell_mass.iter().zip(weights).map(|(m, w)| (m - w).abs()).fold(0.0, f64::max)
    }

    /// Cell barycenters `(s_bar, z_bar)` with `z_bar` recovered from the mean
    /// scaled height. Empty cells yield `None`.
    pub fn barycenters(&self, model: &Model) -> Vec<Option<[f64; 2]>> {
        (0..self.cell_mass.len())
            .map(|i| {
                let m = self.cell_mass[i];
                if m <= 0.0 {
                    return None;
                }
                let y_hi = model.scaled_height(model.height);
                let y = (self.y_moment[i] / m).clamp(0.0, y_hi);
                let z = model.scaled_height_inv(y).ok()?;
                Some([self.s_moment[i] / m, z])
            })
            .collect()
    }
}

struct RowResult {
    rho: f64,
    value: f64,
    cells: Vec<(usize, f64, f64)>,
}

/// Evaluates `J` and the cell statistics at `psi`.
pub fn dual_objective(model: &Model, sigma: &ParticleMeasure, psi: &[f64], settings: &SolverSettings) -> Evaluation {
    let potential = DualPotential::new(sigma.atoms(), psi);
    let (z, dz) = row_midpoints(model.height, settings.rows);
    let cap = model.s_cap(settings.pole_margin);
    let rows: Vec<RowResult> = z
        .par_iter()
        .map(|&zj| {
            let row = Row::new(model, &potential, zj, cap);
            let rho = minimize_row(&row, settings.scan_points, cap);
            let value = row.integral(0.0, rho);
            let mut cells = Vec::new();
            for p in row.pieces().expect("atomic potential is piecewise affine") {
                let hi = p.end.min(rho);
                if hi <= p.start {
                    break;
                }
                let mass = model.mass_primitive(hi) - model.mass_primitive(p.start);
                let mom = model.moment_primitive(hi) - model.moment_primitive(p.start);
                cells.push((p.atom, mass, mom));
            }
            RowResult { rho, value, cells }
        })
        .collect();

    let n = sigma.len();
    let mut cell_mass = vec![0.0; n];
    let mut s_moment = vec![0.0; n];
    let mut y_moment = vec![0.0; n];
    let mut functional = 0.0;
    for (r, &zj) in rows.iter().zip(&z) {
        functional += r.value * dz;
        let y = model.scaled_height(zj);
        for &(i, m, mom) in &r.cells {
            cell_mass[i] += m * dz;
            s_moment[i] += mom * dz;
            y_moment[i] += y * m * dz;
        }
    }
    let linear: f64 = sigma.weights().iter().zip(psi).map(|(w, p)| w * p).sum();
    let total_mass = cell_mass.iter().sum();
    Evaluation {
        objective: functional - linear,
        z,
        dz,
        rho: rows.iter().map(|r| r.rho).collect(),
        cell_mass,
        s_moment,
        y_moment,
        total_mass,
    }
}

/// Reference measure under `boundary` collapsed onto the barycenters (in
/// transport coordinates) of `bands x bins` pieces, together with the exact
/// integral of the rotation potential. Returns the unnormalized cloud.
pub fn transport_cloud(model: &Model, boundary: &FreeBoundary, bands: usize, bins: usize) -> (PointCloud, f64) {
    let rows = boundary.rows();
    let bands = bands.clamp(1, rows);
    let bins = bins.max(1);
    let mut cloud = PointCloud::default();
    for b in 0..bands {
        let (j0, j1) = (b * rows / bands, (b + 1) * rows / bands);
        for k in 0..bins {
            let (mut mass, mut smom, mut ymom) = (0.0, 0.0, 0.0);
            for j in j0..j1 {
                let rho = boundary.rho[j];
                if rho <= 0.0 {
                    continue;
                }
                let lo = rho * k as f64 / bins as f64;
                let hi = rho * (k + 1) as f64 / bins as f64;
                let m = (model.mass_primitive(hi) - model.mass_primitive(lo)) * boundary.dz;
                mass += m;
                smom += (model.moment_primitive(hi) - model.moment_primitive(lo)) * boundary.dz;
                ymom += model.scaled_height(boundary.z[j]) * m;
            }
            if mass > 0.0 {
                cloud.push([smom / mass, ymom / mass], mass);
            }
        }
    }
    let e0 = model.energy_primitive(0.0);
    let energy = boundary.rho.iter().map(|&r| (model.energy_primitive(r) - e0) * boundary.dz).sum();
    (cloud, energy)
}

/// `K(rho) = W2^2(sigma, f#mu)/2 - int ((s^2 + y^2)/2 - f) dmu`, infinite
/// when the mass under `boundary` differs from one by more than `1e-3`.
///
/// The rotation potential `f` enters with unit weight, which is what makes
/// `J + m2 <= K` hold with `J` built on `int (f - P)`.
///
/// The transport term uses the exact discrete optimum on the collapsed cloud
/// of [`transport_cloud`], with the quadratic term taken on the same cloud.
/// Collapsing onto barycenters can only increase `K`, so weak duality is
/// preserved by the discretization.
pub fn primal_objective(
    model: &Model,
    sigma: &ParticleMeasure,
    boundary: &FreeBoundary,
    settings: &SolverSettings,
) -> Result<f64> {
    let mass = boundary.mass(model);
    if !((mass - 1.0).abs() <= MASS_TOLERANCE) {
        return Ok(f64::INFINITY);
    }
    let room = settings.ot_cap.saturating_sub(sigma.len());
    let bands = settings.cloud_bands.clamp(1, boundary.rows());
    let bins = settings.cloud_bins.min(room / bands).max(1);
    let (mut cloud, energy) = transport_cloud(model, boundary, bands, bins);
    for w in &mut cloud.weights {
        *w /= mass;
    }
    let plan = exact_discrete_ot(&cloud, &sigma.as_cloud(), GroundCost::HalfSquared, settings.ot_cap)?;
    let quad: f64 = cloud.points.iter().zip(&cloud.weights).map(|(p, w)| w * (p[0] * p[0] + p[1] * p[1])).sum();
    Ok(plan.value - 0.5 * quad + energy / mass)
}

/// `K - J - m2`; non-negative by weak duality.
pub fn duality_gap(primal: f64, dual: f64, second_moment: f64) -> f64 {
    primal - dual - second_moment
}

/// `max |2 (1 - 2 r0^2 rho) P(rho, z) - r0^2 Omega^2|` over rows with `rho > 1e-3`.
pub fn boundary_residual(model: &Model, potential: &DualPotential, boundary: &FreeBoundary) -> f64 {
    let c = model.r0 * model.r0 * model.omega * model.omega;
    boundary
        .z
        .iter()
        .zip(&boundary.rho)
        .filter(|(_, &r)| r > 1e-3)
        .map(|(&z, &r)| {
            let p = potential.best_scaled(r, model.scaled_height(z)).1;
            (2.0 * (1.0 - 2.0 * model.r0 * model.r0 * r) * p - c).abs()
        })
        .fold(0.0, f64::max)
}

/// Cell of every quadrature node.
pub fn cell_assignment(model: &Model, potential: &DualPotential, reference: &ReferenceMeasure) -> Vec<usize> {
    reference.nodes.points.par_iter().map(|&[s, z]| potential.assign(model, s, z)).collect()
}

/// Node-quadrature mass of every cell; sums to the reference mass.
pub fn cell_masses(model: &Model, potential: &DualPotential, reference: &ReferenceMeasure) -> Vec<f64> {
    let cells = cell_assignment(model, potential, reference);
    let mut out = vec![0.0; potential.atoms.len()];
    for (&i, &w) in cells.iter().zip(&reference.nodes.weights) {
        out[i] += w;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(rows: usize) -> SolverSettings {
        SolverSettings { rows, ..SolverSettings::default() }
    }

    #[test]
    fn single_atom_cell_takes_everything() {
        let model = Model::canonical();
        let sigma = ParticleMeasure::uniform(vec![[1.0, 1.0]]).unwrap();
        let e = dual_objective(&model, &sigma, &[-1.0], &settings(32));
        assert!((e.total_mass - e.cell_mass[0]).abs() < 1e-15);
        assert!(e.rho.iter().all(|&r| r > 0.0));
    }

    #[test]
    fn exact_masses_agree_with_node_quadrature() {
        let model = Model::canonical();
        let sigma = ParticleMeasure::uniform(vec![[0.5, 1.5], [1.5, 0.7], [1.0, 1.0]]).unwrap();
        let psi = [-1.2, -0.9, -1.0];
        let set = settings(128);
        let e = dual_objective(&model, &sigma, &psi, &set);
        let reference = ReferenceMeasure::new(&model, &e.raw_boundary(), 512);
        let nodes = cell_masses(&model, &DualPotential::new(sigma.atoms(), &psi), &reference);
        for (a, b) in nodes.iter().zip(&e.cell_mass) {
            assert!((a - b).abs() < 2e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn gap_non_negative_for_feasible_boundary() {
        let model = Model::canonical();
        let sigma = ParticleMeasure::uniform(vec![[0.5, 1.5], [1.5, 0.7]]).unwrap();
        let set = settings(64);
        let boundary = FreeBoundary::constant(&model, 64, 1.0 / 3.0);
        let k = primal_objective(&model, &sigma, &boundary, &set).unwrap();
        for psi in [[0.0, 0.0], [-1.0, -0.5], [-0.3, -1.4]] {
            let j = dual_objective(&model, &sigma, &psi, &set).objective;
            let g = duality_gap(k, j, sigma.second_moment());
            assert!(g >= -1e-12, "gap {g} k {k} j {j}");
        }
    }

    #[test]
    fn infeasible_mass_gives_infinite_primal() {
        let model = Model::canonical();
        let sigma = ParticleMeasure::uniform(vec![[1.0, 1.0]]).unwrap();
        let boundary = FreeBoundary::constant(&model, 16, 0.25);
        assert_eq!(primal_objective(&model, &sigma, &boundary, &settings(16)).unwrap(), f64::INFINITY);
    }
}
