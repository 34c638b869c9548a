//! Free boundaries, the reference measure they carry and particle measures.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;

/// Boundary `s = rho(z)` sampled at the midpoints of equal height rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundary {
    pub z: Vec<f64>,
    pub rho: Vec<f64>,
    pub dz: f64,
}

/// Midpoints of `rows` equal slices of `[0, height]`.
pub fn row_midpoints(height: f64, rows: usize) -> (Vec<f64>, f64) {
    let dz = height / rows as f64;
    ((0..rows).map(|j| (j as f64 + 0.5) * dz).collect(), dz)
}

impl FreeBoundary {
    pub fn from_fn(model: &Model, rows: usize, f: impl Fn(f64) -> f64) -> Self {
        let (z, dz) = row_midpoints(model.height, rows);
        let rho = z.iter().map(|&z| f(z)).collect();
        FreeBoundary { z, rho, dz }
    }

    pub fn constant(model: &Model, rows: usize, value: f64) -> Self {
        Self::from_fn(model, rows, |_| value)
    }

    pub fn rows(&self) -> usize {
        self.z.len()
    }

    /// Mass of the domain under the boundary, exact in `s` and midpoint in `z`.
    pub fn mass(&self, model: &Model) -> f64 {
        let base = model.mass_primitive(0.0);
        self.rho.iter().map(|&r| (model.mass_primitive(r) - base) * self.dz).sum()
    }

    pub fn max_rho(&self) -> f64 {
        self.rho.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_monotone(&self) -> bool {
        self.rho.windows(2).all(|w| w[0] <= w[1])
    }

    /// Physical radius of the free surface at each row.
    pub fn radius_profile(&self, model: &Model) -> Vec<f64> {
        self.rho.iter().map(|&r| model.radius(r)).collect()
    }

    /// Linear interpolation of the boundary, clamped to the end rows.
    pub fn at(&self, z: f64) -> f64 {
        let n = self.rows();
        let x = z / self.dz - 0.5;
        if x <= 0.0 {
            return self.rho[0];
        }
        let j = x.floor() as usize;
        if j + 1 >= n {
            return self.rho[n - 1];
        }
        let t = x - j as f64;
        self.rho[j] * (1.0 - t) + self.rho[j + 1] * t
    }

    /// Checks the boundary stays inside `[0, cap]`.
    pub fn check(&self, model: &Model) -> Result<()> {
        let pole = model.pole();
        match self.rho.iter().position(|&r| !(r >= 0.0 && r < pole)) {
            Some(j) => Err(Error::Domain(format!("boundary value {} at row {j} outside [0, {pole})", self.rho[j]))),
            None => Ok(()),
        }
    }
}

/// Point masses in the plane.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn push(&mut self, p: [f64; 2], w: f64) {
        self.points.push(p);
        self.weights.push(w);
    }
}

/// Midpoint quadrature of the reference measure restricted to the domain
/// under a free boundary.
///
/// Each row is split into `nodes_per_row` equal intervals of `[0, rho(z)]`,
/// so the quadrature follows the boundary exactly in `s`.
#[derive(Clone, Debug)]
pub struct ReferenceMeasure {
    /// Nodes in `(s, z)` coordinates.
    pub nodes: PointCloud,
    /// Row index of every node.
    pub row: Vec<usize>,
}

impl ReferenceMeasure {
    pub fn new(model: &Model, boundary: &FreeBoundary, nodes_per_row: usize) -> Self {
        let mut nodes = PointCloud::default();
        let mut row = Vec::new();
        for (j, (&z, &rho)) in boundary.z.iter().zip(&boundary.rho).enumerate() {
            if rho <= 0.0 {
                continue;
            }
            let ds = rho / nodes_per_row as f64;
            for k in 0..nodes_per_row {
                let s = (k as f64 + 0.5) * ds;
                nodes.push([s, z], model.density(s) * ds * boundary.dz);
                row.push(j);
            }
        }
        ReferenceMeasure { nodes, row }
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes.total()
    }

    /// Image of the nodes under `(s, z) -> (s, z / theta0(z))`.
    pub fn pushforward(&self, model: &Model) -> PointCloud {
        PointCloud {
            points: self.nodes.points.iter().map(|&[s, z]| model.pushforward(s, z)).collect(),
            weights: self.nodes.weights.clone(),
        }
    }
}

/// Probability measure made of finitely many particles `(Upsilon, Z)` with
/// positive coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleMeasure {
    atoms: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl ParticleMeasure {
    /// Merges coincident atoms and renormalizes the weights once.
    pub fn new(atoms: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!("{} atoms but {} weights", atoms.len(), weights.len())));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let mut merged_atoms: Vec<[f64; 2]> = Vec::with_capacity(atoms.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (q, w) in atoms.into_iter().zip(weights) {
            if !(q[0] > 0.0 && q[1] > 0.0 && q[0].is_finite() && q[1].is_finite()) {
                return Err(Error::InvalidMeasure(format!("atom {q:?} outside the open quadrant")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidMeasure(format!("weight {w} is not positive")));
            }
            match merged_atoms.iter().position(|a| *a == q) {
                Some(i) => merged_weights[i] += w,
                None => {
                    merged_atoms.push(q);
                    merged_weights.push(w);
                }
            }
        }
        let total: f64 = merged_weights.iter().sum();
        for w in &mut merged_weights {
            *w /= total;
        }
        Ok(ParticleMeasure { atoms: merged_atoms, weights: merged_weights })
    }

    /// Equal weights.
    pub fn uniform(atoms: Vec<[f64; 2]>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0; n])
    }

    /// Replaces the atom positions keeping weights; used by the time stepper.
    pub(crate) fn with_atoms(&self, atoms: Vec<[f64; 2]>) -> Self {
        ParticleMeasure { atoms, weights: self.weights.clone() }
    }

    pub fn atoms(&self) -> &[[f64; 2]] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(1/2) sum w |q|^2`.
    pub fn second_moment(&self) -> f64 {
        0.5 * self.atoms.iter().zip(&self.weights).map(|(q, w)| w * (q[0] * q[0] + q[1] * q[1])).sum::<f64>()
    }

    /// Largest Euclidean norm of an atom.
    pub fn support_radius(&self) -> f64 {
        self.atoms.iter().map(|q| q[0].hypot(q[1])).fold(0.0, f64::max)
    }

    pub fn as_cloud(&self) -> PointCloud {
        PointCloud { points: self.atoms.clone(), weights: self.weights.clone() }
    }

    /// CSV with header `i,upsilon,zed,weight`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["i", "upsilon", "zed", "weight"]).map_err(wrap)?;
        for (i, (q, wt)) in self.atoms.iter().zip(&self.weights).enumerate() {
            w.write_record([i.to_string(), q[0].to_string(), q[1].to_string(), wt.to_string()]).map_err(wrap)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let headers = rd.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let expected = ["i", "upsilon", "zed", "weight"];
        if headers.iter().map(str::trim).ne(expected.iter().copied()) {
            return Err(Error::Parse(format!("expected header {}, got {:?}", expected.join(","), headers)));
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse("short record".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(e.to_string()))
            };
            atoms.push([field(1)?, field(2)?]);
            weights.push(field(3)?);
        }
        Self::new(atoms, weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_boundary_mass_closed_form() {
        let model = Model::canonical();
        for &(rho, expected) in &[(1.0 / 3.0, 1.0), (0.25, 0.5)] {
            let b = FreeBoundary::constant(&model, 64, rho);
            assert!((b.mass(&model) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn reference_measure_mass() {
        let model = Model::canonical();
        let b = FreeBoundary::constant(&model, 256, 1.0 / 3.0);
        let m = ReferenceMeasure::new(&model, &b, 256);
        assert!((m.total_mass() - 1.0).abs() < 5e-3);
        let empty = ReferenceMeasure::new(&model, &FreeBoundary::constant(&model, 16, 0.0), 16);
        assert!(empty.nodes.is_empty());
        assert_eq!(empty.total_mass(), 0.0);
    }

    #[test]
    fn interpolation_hits_row_values() {
        let model = Model::canonical();
        let b = FreeBoundary::from_fn(&model, 8, |z| 0.1 + 0.2 * z);
        for (&z, &r) in b.z.iter().zip(&b.rho) {
            assert!((b.at(z) - r).abs() < 1e-15);
        }
        assert!((b.at(0.5) - 0.2).abs() < 1e-15);
        assert_eq!(b.at(0.0), b.rho[0]);
    }

    #[test]
    fn particles_merge_and_normalize() {
        let p = ParticleMeasure::new(vec![[1.0, 1.0], [2.0, 0.5], [1.0, 1.0]], vec![1.0, 2.0, 1.0]).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.weights(), &[0.5, 0.5]);
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn particles_reject_bad_input() {
        assert!(ParticleMeasure::new(vec![[0.0, 1.0]], vec![1.0]).is_err());
        assert!(ParticleMeasure::new(vec![[1.0, 1.0]], vec![-1.0]).is_err());
        assert!(ParticleMeasure::new(vec![], vec![]).is_err());
        assert!(ParticleMeasure::new(vec![[1.0, 1.0]], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn second_moment_example() {
        let p = ParticleMeasure::uniform(vec![[1.0, 1.0]]).unwrap();
        assert_eq!(p.second_moment(), 1.0);
        assert!((p.support_radius() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let p = ParticleMeasure::new(vec![[0.3, 1.7], [1.25, 0.1]], vec![0.25, 0.75]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("i,upsilon,zed,weight\n"));
        let back = ParticleMeasure::read_csv(&buf[..]).unwrap();
        assert_eq!(back, p);
        assert!(ParticleMeasure::read_csv(&b"a,b,c,d\n1,2,3,4\n"[..]).is_err());
    }
}
