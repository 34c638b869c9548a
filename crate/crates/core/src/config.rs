//! Run configuration and its TOML representation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AmbientProfile, Forcing, Model};

/// `[model]` section: geometry, rotation, gravity and support radii.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub r0: f64,
    pub omega: f64,
    pub g: f64,
    pub height: f64,
    pub theta_range: [f64; 2],
    /// Radius `l0` of the ball containing the initial particle support.
    pub initial_radius: f64,
    /// Radius `l` that must contain the support up to the horizon.
    pub support_radius: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            r0: 1.0,
            omega: 1.0,
            g: 1.0,
            height: 1.0,
            theta_range: [0.9, 2.1],
            initial_radius: 0.5,
            support_radius: 4.0,
        }
    }
}

/// `[solver]` section.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Number of height rows.
    pub rows: usize,
    /// Quadrature nodes per row for node-based cell masses.
    pub nodes_per_row: usize,
    /// Uniform scan points for the per-height boundary search.
    pub scan_points: usize,
    /// Relative distance kept from the pole of the rotation potential.
    pub pole_margin: f64,
    pub max_iter: usize,
    /// Relative duality gap target, `gap <= tol_gap (1 + |K|)`.
    pub tol_gap: f64,
    /// Boundary change between iterates.
    pub tol_rho: f64,
    /// Maximum cell mass residual.
    pub tol_mass: f64,
    /// Largest exact transport problem (sources plus sinks).
    pub ot_cap: usize,
    /// Height bands of the cloud used to evaluate the transport cost.
    pub cloud_bands: usize,
    /// Radial bins per band of that cloud.
    pub cloud_bins: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rows: 256,
            nodes_per_row: 256,
            scan_points: 512,
            pole_margin: 1e-3,
            max_iter: 20_000,
            tol_gap: 1e-3,
            tol_rho: 1e-8,
            tol_mass: 1e-9,
            ot_cap: 4096,
            cloud_bands: 64,
            cloud_bins: 60,
        }
    }
}

impl SolverSettings {
    pub fn check(&self) -> Result<()> {
        let counts = [
            ("rows", self.rows),
            ("nodes_per_row", self.nodes_per_row),
            ("scan_points", self.scan_points),
            ("max_iter", self.max_iter),
            ("cloud_bands", self.cloud_bands),
            ("cloud_bins", self.cloud_bins),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("solver.{name} must be positive")));
            }
        }
        if !(self.pole_margin > 0.0 && self.pole_margin < 1.0) {
            return Err(Error::InvalidConfig("solver.pole_margin must lie in (0, 1)".into()));
        }
        for (name, v) in [("tol_gap", self.tol_gap), ("tol_rho", self.tol_rho), ("tol_mass", self.tol_mass)] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("solver.{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// `[time]` section.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSettings {
    pub horizon: f64,
    pub steps: usize,
}

impl Default for TimeSettings {
    fn default() -> Self {
        TimeSettings { horizon: 0.5, steps: 16 }
    }
}

impl TimeSettings {
    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }
}

/// `[output]` section.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    /// Radial samples of the reconstructed fields.
    pub field_nr: usize,
    /// Height samples of the reconstructed fields.
    pub field_nz: usize,
    pub fields: bool,
    pub meridional: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings { field_nr: 64, field_nz: 64, fields: true, meridional: true }
    }
}

/// Full run configuration.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: ModelSection,
    pub ambient: AmbientProfile,
    pub forcing: Forcing,
    pub solver: SolverSettings,
    pub time: TimeSettings,
    pub output: OutputSettings,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model(&self) -> Model {
        let m = &self.model;
        Model {
            r0: m.r0,
            omega: m.omega,
            g: m.g,
            height: m.height,
            theta_range: m.theta_range,
            ambient: self.ambient.clone(),
            forcing: self.forcing.clone(),
        }
    }

    /// Structural validity; the time-horizon precondition is checked separately.
    pub fn check(&self) -> Result<()> {
        self.model().check()?;
        self.solver.check()?;
        let m = &self.model;
        if !(m.initial_radius > 0.0 && m.support_radius > 0.0) {
            return Err(Error::InvalidConfig("support radii must be positive".into()));
        }
        if !(self.time.horizon > 0.0 && self.time.horizon.is_finite()) || self.time.steps == 0 {
            return Err(Error::InvalidConfig("time.horizon and time.steps must be positive".into()));
        }
        if self.output.field_nr < 3 || self.output.field_nz < 3 {
            return Err(Error::InvalidConfig("output field grid needs at least 3 points per axis".into()));
        }
        Ok(())
    }

    /// `exp(4 M T) (4 l0 + 1) < l + 1`, which keeps the support inside the
    /// ball of radius `l` up to the horizon.
    pub fn check_precondition(&self) -> Result<()> {
        crate::dynamics::Schedule::from_config(self).check(&self.model())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = Config::default();
        let text = cfg.to_toml_string();
        let back = Config::from_toml_str(&text).unwrap();
        assert_eq!(back.to_toml_string(), text);
        assert!(back.check_precondition().is_ok());
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = Config::from_toml_str("[forcing]\nkind = \"zero\"\nbound = 0.0\n[time]\nsteps = 4\n").unwrap();
        assert!(cfg.forcing.is_zero());
        assert_eq!(cfg.time.steps, 4);
        assert_eq!(cfg.model.r0, 1.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::from_toml_str("[model]\nradius = 2.0\n").is_err());
        assert!(Config::from_toml_str("[model]\nr0 = -1.0\n").is_err());
        assert!(Config::from_toml_str("[solver]\nrows = 0\n").is_err());
    }

    #[test]
    fn precondition_example() {
        let mut cfg = Config::default();
        cfg.forcing.bound = 0.25;
        cfg.time.horizon = 0.5;
        cfg.model.initial_radius = 0.5;
        cfg.model.support_radius = 4.0;
        assert!(cfg.check_precondition().is_ok());
        cfg.model.support_radius = 3.9;
        assert!(matches!(cfg.check_precondition(), Err(Error::Precondition(_))));
    }
}
