//! Physical constants, coordinate transforms and the transport cost.

mod ambient;
mod assumptions;
mod forcing;

pub use ambient::AmbientProfile;
pub use assumptions::{validate_assumptions, AssumptionCheck, AssumptionReport};
pub use forcing::{Forcing, ForcingKind};

use crate::error::{Error, Result};

/// Constants and profiles shared by every stage of the solver.
#[derive(Clone, Debug)]
pub struct Model {
    /// Inner radius `r0` of the annular domain.
    pub r0: f64,
    /// Background rotation rate.
    pub omega: f64,
    /// Gravitational acceleration.
    pub g: f64,
    /// Height of the lid.
    pub height: f64,
    /// Open interval that must contain every ambient temperature.
    pub theta_range: [f64; 2],
    pub ambient: AmbientProfile,
    pub forcing: Forcing,
}

impl Model {
    /// `r0 = omega = g = height = 1`, ambient `1 + z`, range `(0.9, 2.1)`.
    pub fn canonical() -> Self {
        Model {
            r0: 1.0,
            omega: 1.0,
            g: 1.0,
            height: 1.0,
            theta_range: [0.9, 2.1],
            ambient: AmbientProfile::default(),
            forcing: Forcing::default(),
        }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn with_ambient(mut self, ambient: AmbientProfile) -> Self {
        self.ambient = ambient;
        self
    }

    /// Rejects non-positive constants and an empty temperature range.
    pub fn check(&self) -> Result<()> {
        let named = [("r0", self.r0), ("omega", self.omega), ("g", self.g), ("height", self.height)];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let [lo, hi] = self.theta_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return Err(Error::InvalidConfig(format!("theta_range must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
        }
        if !(self.forcing.bound.is_finite() && self.forcing.bound >= 0.0) {
            return Err(Error::InvalidConfig(format!("forcing bound must be non-negative, got {}", self.forcing.bound)));
        }
        Ok(())
    }

    /// Upper end `1 / (2 r0^2)` of the admissible `s` range.
    #[inline]
    pub fn pole(&self) -> f64 {
        0.5 / (self.r0 * self.r0)
    }

    /// Largest `s` the boundary search may reach, `pole * (1 - margin)`.
    #[inline]
    pub fn s_cap(&self, margin: f64) -> f64 {
        self.pole() * (1.0 - margin)
    }

    #[inline]
    fn gap_to_pole(&self, s: f64) -> f64 {
        1.0 - 2.0 * self.r0 * self.r0 * s
    }

    fn check_s(&self, s: f64) -> Result<()> {
        if s.is_nan() || s < 0.0 || s >= self.pole() {
            Err(Error::Domain(format!("s = {s} outside [0, {})", self.pole())))
        } else {
            Ok(())
        }
    }

    /// Solid-body centrifugal potential `Omega^2 r^2 / 2` expressed in `s`.
    pub fn rotation_potential(&self, s: f64) -> Result<f64> {
        self.check_s(s)?;
        Ok(self.rot(s))
    }

    #[inline]
    pub(crate) fn rot(&self, s: f64) -> f64 {
        let r2o2 = self.r0 * self.r0 * self.omega * self.omega;
        0.5 * r2o2 / self.gap_to_pole(s)
    }

    /// Derivative of [`Model::rotation_potential`] in `s`.
    #[inline]
    pub fn rotation_potential_slope(&self, s: f64) -> f64 {
        let u = self.gap_to_pole(s);
        self.r0.powi(4) * self.omega * self.omega / (u * u)
    }

    /// Reference density `(2 f / Omega^2)^2 = (r0^2 / (1 - 2 r0^2 s))^2`.
    #[inline]
    pub fn density(&self, s: f64) -> f64 {
        let v = self.r0 * self.r0 / self.gap_to_pole(s);
        v * v
    }

    /// Antiderivative of the density in `s`.
    #[inline]
    pub fn mass_primitive(&self, s: f64) -> f64 {
        0.5 * self.r0 * self.r0 / self.gap_to_pole(s)
    }

    /// Antiderivative of `s * density(s)`.
    #[inline]
    pub fn moment_primitive(&self, s: f64) -> f64 {
        let u = self.gap_to_pole(s);
        0.25 * (1.0 / u + u.ln())
    }

    /// Antiderivative of `rotation_potential(s) * density(s)`.
    #[inline]
    pub fn energy_primitive(&self, s: f64) -> f64 {
        let u = self.gap_to_pole(s);
        self.r0.powi(4) * self.omega * self.omega / (8.0 * u * u)
    }

    /// `s[r] = (r0^-2 - r^-2) / 2`.
    pub fn s_of_r(&self, r: f64) -> Result<f64> {
        if !(r >= self.r0) {
            return Err(Error::Domain(format!("r = {r} below r0 = {}", self.r0)));
        }
        Ok(0.5 * (1.0 / (self.r0 * self.r0) - 1.0 / (r * r)))
    }

    /// Inverse of [`Model::s_of_r`], `r = sqrt(2 f(s)) / Omega`.
    pub fn r_of_s(&self, s: f64) -> Result<f64> {
        self.check_s(s)?;
        Ok(self.radius(s))
    }

    #[inline]
    pub(crate) fn radius(&self, s: f64) -> f64 {
        self.r0 / self.gap_to_pole(s).sqrt()
    }

    #[inline]
    pub fn ambient(&self, z: f64) -> f64 {
        self.ambient.value(z)
    }

    /// Scaled height `z / theta0(z)`; increasing under the ambient assumptions.
    #[inline]
    pub fn scaled_height(&self, z: f64) -> f64 {
        z / self.ambient.value(z)
    }

    /// `d/dz [z / theta0(z)] = (theta0 - z theta0') / theta0^2`.
    #[inline]
    pub fn scaled_height_slope(&self, z: f64) -> f64 {
        let t = self.ambient.value(z);
        (t - z * self.ambient.derivative(z)) / (t * t)
    }

    /// Inverse of [`Model::scaled_height`] on `[0, height]` by bisection to `1e-12`.
    pub fn scaled_height_inv(&self, y: f64) -> Result<f64> {
        let (lo_v, hi_v) = (self.scaled_height(0.0), self.scaled_height(self.height));
        let slack = 1e-12 * (1.0 + hi_v.abs());
        if !(y >= lo_v - slack && y <= hi_v + slack) {
            return Err(Error::Domain(format!("scaled height {y} outside [{lo_v}, {hi_v}]")));
        }
        let (mut lo, mut hi) = (0.0, self.height);
        while hi - lo > 1e-12 * self.height.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.scaled_height(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Transport cost `s Upsilon + z Z / m`.
    #[inline]
    pub fn cost(&self, s: f64, z: f64, m: f64, upsilon: f64, zed: f64) -> f64 {
        s * upsilon + z * zed / m
    }

    /// Maps a radial-height point to the transport coordinates `(s, z / theta0(z))`.
    pub fn pushforward(&self, s: f64, z: f64) -> [f64; 2] {
        [s, self.scaled_height(z)]
    }
}

impl Default for Model {
    fn default() -> Self {
        Model::canonical()
    }
}
