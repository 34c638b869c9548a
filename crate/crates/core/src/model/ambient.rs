use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Ambient potential temperature as a function of height.
///
/// The configurable family is `(a + b z^alpha)^beta`; `linear(a, b)` is the
/// common special case. Arbitrary profiles can be supplied with `custom`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmbientProfile {
    Power {
        a: f64,
        b: f64,
        alpha: f64,
        beta: f64,
    },
    #[serde(skip)]
    Custom { value: ScalarFn, derivative: ScalarFn },
}

impl AmbientProfile {
    pub fn linear(a: f64, b: f64) -> Self {
        AmbientProfile::Power { a, b, alpha: 1.0, beta: 1.0 }
    }

    pub fn custom<F, G>(value: F, derivative: G) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        AmbientProfile::Custom { value: Arc::new(value), derivative: Arc::new(derivative) }
    }

    pub fn value(&self, z: f64) -> f64 {
        match self {
            AmbientProfile::Power { a, b, alpha, beta } => (a + b * z.powf(*alpha)).powf(*beta),
            AmbientProfile::Custom { value, .. } => value(z),
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            AmbientProfile::Power { a, b, alpha, beta } => {
                if *b == 0.0 {
                    return 0.0;
                }
                let inner = a + b * z.powf(*alpha);
                // z^(alpha-1) is singular at 0 for alpha < 1; that profile fails the
                // Lipschitz check anyway.
                beta * inner.powf(beta - 1.0) * b * alpha * z.powf(alpha - 1.0)
            }
            AmbientProfile::Custom { derivative, .. } => derivative(z),
        }
    }
}

impl Default for AmbientProfile {
    fn default() -> Self {
        AmbientProfile::linear(1.0, 1.0)
    }
}

impl fmt::Debug for AmbientProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AmbientProfile::Power { a, b, alpha, beta } => f
                .debug_struct("Power")
                .field("a", a)
                .field("b", b)
                .field("alpha", alpha)
                .field("beta", beta)
                .finish(),
            AmbientProfile::Custom { .. } => f.write_str("Custom"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_profile() {
        let p = AmbientProfile::linear(1.0, 1.0);
        assert_eq!(p.value(0.0), 1.0);
        assert_eq!(p.value(0.5), 1.5);
        assert_eq!(p.derivative(0.3), 1.0);
    }

    #[test]
    fn power_derivative_matches_difference_quotient() {
        let p = AmbientProfile::Power { a: 1.0, b: 0.5, alpha: 2.0, beta: 0.5 };
        for &z in &[0.1, 0.4, 0.9] {
            let h = 1e-6;
            let fd = (p.value(z + h) - p.value(z - h)) / (2.0 * h);
            assert!((fd - p.derivative(z)).abs() < 1e-8);
        }
    }
}
