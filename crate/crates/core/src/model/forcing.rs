use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

type ForcingFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;

/// Shape of the forcing pair `(F0, F1)` evaluated at `(t, r, z)`.
#[derive(Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    /// `F0 = M (1 - exp(-(r - r0)))`, `F1 = (M / g)(1 - exp(-z))`.
    #[default]
    Exponential,
    Zero,
    #[serde(skip)]
    Custom(ForcingFn),
}

/// Momentum and heating forcing with amplitude bound `M`.
#[derive(Clone, Serialize, Deserialize)]
pub struct Forcing {
    #[serde(default)]
    pub kind: ForcingKind,
    /// Amplitude bound `M`.
    pub bound: f64,
}

impl Forcing {
    pub fn exponential(bound: f64) -> Self {
        Forcing { kind: ForcingKind::Exponential, bound }
    }

    pub fn zero() -> Self {
        Forcing { kind: ForcingKind::Zero, bound: 0.0 }
    }

    /// Arbitrary forcing; `bound` must dominate `F0` and `g F1`.
    pub fn custom<F>(bound: f64, f: F) -> Self
    where
        F: Fn(f64, f64, f64) -> [f64; 2] + Send + Sync + 'static,
    {
        Forcing { kind: ForcingKind::Custom(Arc::new(f)), bound }
    }

    /// `[F0, F1]` at time `t`, radius `r`, height `z`.
    pub fn eval(&self, t: f64, r: f64, z: f64, r0: f64, g: f64) -> [f64; 2] {
        match &self.kind {
            ForcingKind::Exponential => {
                let m = self.bound;
                [m * (1.0 - (-(r - r0)).exp()), m / g * (1.0 - (-z).exp())]
            }
            ForcingKind::Zero => [0.0, 0.0],
            ForcingKind::Custom(f) => f(t, r, z),
        }
    }

    /// `[[dF0/dr, dF0/dz], [dF1/dr, dF1/dz]]`.
    pub fn jacobian(&self, t: f64, r: f64, z: f64, r0: f64, g: f64) -> [[f64; 2]; 2] {
        match &self.kind {
            ForcingKind::Exponential => {
                let m = self.bound;
                [[m * (-(r - r0)).exp(), 0.0], [0.0, m / g * (-z).exp()]]
            }
            ForcingKind::Zero => [[0.0; 2]; 2],
            ForcingKind::Custom(_) => {
                let h = 1e-6;
                let dr = |k: usize| (self.eval(t, r + h, z, r0, g)[k] - self.eval(t, r - h, z, r0, g)[k]) / (2.0 * h);
                let dz = |k: usize| (self.eval(t, r, z + h, r0, g)[k] - self.eval(t, r, z - h, r0, g)[k]) / (2.0 * h);
                [[dr(0), dz(0)], [dr(1), dz(1)]]
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ForcingKind::Zero)
    }
}

impl Default for Forcing {
    fn default() -> Self {
        Forcing::exponential(0.25)
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ForcingKind::Exponential => "Exponential",
            ForcingKind::Zero => "Zero",
            ForcingKind::Custom(_) => "Custom",
        };
        f.debug_struct("Forcing").field("kind", &kind).field("bound", &self.bound).finish()
    }
}
