use serde::Serialize;

use super::Model;

/// Outcome of one sampled assumption check.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Signed slack of the sampled inequality; negative when violated.
    pub margin: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const SAMPLES: usize = 201;

/// Samples the ambient and forcing assumptions on a grid over `[0, height]`,
/// radii `[r0, r_max]` and times `[0, horizon]`.
pub fn validate_assumptions(model: &Model, r_max: f64, horizon: f64) -> AssumptionReport {
    let n = SAMPLES;
    let h = model.height;
    let zs: Vec<f64> = (0..n).map(|k| h * k as f64 / (n - 1) as f64).collect();
    let mut checks = Vec::new();

    let [lo, hi] = model.theta_range;
    let range_margin = zs
        .iter()
        .map(|&z| {
            let t = model.ambient(z);
            (t - lo).min(hi - t)
        })
        .fold(f64::INFINITY, f64::min);
    checks.push(AssumptionCheck {
        name: "range",
        passed: range_margin > 0.0,
        margin: range_margin,
        detail: format!("ambient temperature inside ({lo}, {hi})"),
    });

    let stratification: Vec<f64> = zs
        .iter()
        .map(|&z| model.ambient(z) - z * model.ambient.derivative(z))
        .collect();
    let interior_min = stratification[1..n - 1].iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(AssumptionCheck {
        name: "A1",
        passed: interior_min > 0.0,
        margin: interior_min,
        detail: "theta0 - z theta0' > 0 in the interior".into(),
    });
    let closed_min = stratification.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(AssumptionCheck {
        name: "A1'",
        passed: closed_min.is_finite() && closed_min >= 1e-8,
        margin: closed_min,
        detail: "inf of theta0 - z theta0' bounded away from zero".into(),
    });

    let lip = zs
        .windows(2)
        .map(|w| ((model.ambient(w[1]) - model.ambient(w[0])) / (w[1] - w[0])).abs())
        .fold(0.0, f64::max);
    checks.push(AssumptionCheck {
        name: "A2",
        passed: lip.is_finite(),
        margin: if lip.is_finite() { 1.0 / (1.0 + lip) } else { -1.0 },
        detail: format!("Lipschitz constant estimate {lip}"),
    });

    let m = model.forcing.bound;
    let (r0, g) = (model.r0, model.g);
    let nr = 41;
    let nt = 5;
    let rs: Vec<f64> = (0..nr).map(|k| r0 + (r_max - r0) * k as f64 / (nr - 1) as f64).collect();
    let ts: Vec<f64> = (0..nt).map(|k| horizon * k as f64 / (nt - 1) as f64).collect();
    let zc: Vec<f64> = (0..nr).map(|k| h * k as f64 / (nr - 1) as f64).collect();

    let mut bound_margin = f64::INFINITY;
    let mut sep = 0.0f64;
    let mut mono = f64::INFINITY;
    for &t in &ts {
        for &r in &rs {
            for &z in &zc {
                let [f0, f1] = model.forcing.eval(t, r, z, r0, g);
                bound_margin = bound_margin.min(f0).min(m - f0).min(g * f1).min(m - g * f1);
                let [f0z, _] = model.forcing.eval(t, r, 0.0, r0, g);
                let [_, f1r] = model.forcing.eval(t, r0, z, r0, g);
                sep = sep.max((f0 - f0z).abs()).max((f1 - f1r).abs());
            }
        }
        for w in rs.windows(2) {
            let d = model.forcing.eval(t, w[1], 0.5 * h, r0, g)[0] - model.forcing.eval(t, w[0], 0.5 * h, r0, g)[0];
            mono = mono.min(d);
        }
        for w in zc.windows(2) {
            let d = model.forcing.eval(t, 0.5 * (r0 + r_max), w[1], r0, g)[1]
                - model.forcing.eval(t, 0.5 * (r0 + r_max), w[0], r0, g)[1];
            mono = mono.min(d);
        }
    }
    checks.push(AssumptionCheck {
        name: "B1",
        passed: bound_margin >= 0.0,
        margin: bound_margin,
        detail: format!("0 <= F0 <= {m} and 0 <= g F1 <= {m}"),
    });
    checks.push(AssumptionCheck {
        name: "B2",
        passed: sep <= 1e-12,
        margin: 1e-12 - sep,
        detail: "F0 independent of z, F1 independent of r".into(),
    });
    checks.push(AssumptionCheck {
        name: "B3",
        passed: mono > 0.0,
        margin: mono,
        detail: "F0 strictly increasing in r, F1 strictly increasing in z".into(),
    });

    AssumptionReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AmbientProfile, Forcing};

    #[test]
    fn canonical_passes() {
        let report = validate_assumptions(&Model::canonical(), 3.0, 1.0);
        for c in &report.checks {
            assert!(c.passed, "{} failed: {:?}", c.name, c);
        }
    }

    #[test]
    fn theta_equal_to_height_fails() {
        let model = Model::canonical().with_ambient(AmbientProfile::linear(0.0, 1.0));
        let report = validate_assumptions(&model, 3.0, 1.0);
        assert!(!report.get("A1'").unwrap().passed);
        assert!(!report.get("range").unwrap().passed);
    }

    #[test]
    fn zero_forcing_is_not_strictly_monotone() {
        let model = Model::canonical().with_forcing(Forcing::zero());
        let report = validate_assumptions(&model, 3.0, 1.0);
        assert!(report.get("B1").unwrap().passed);
        assert!(!report.get("B3").unwrap().passed);
    }

    #[test]
    fn coupled_forcing_fails_separation() {
        let model = Model::canonical().with_forcing(Forcing::custom(1.0, |_, r, z| {
            [0.1 * (1.0 - (-(r - 1.0)).exp()) * (1.0 + z) / 2.0, 0.1 * (1.0 - (-z).exp())]
        }));
        let report = validate_assumptions(&model, 3.0, 1.0);
        assert!(!report.get("B2").unwrap().passed);
    }
}
