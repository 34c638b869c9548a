//! Cross-checks of the solver against independent computations.

use axivortex::config::SolverSettings;
use axivortex::dual::{boundary_functional, boundary_functional_derivative, dual_objective, DualState};
use axivortex::measure::{ParticleMeasure, PointCloud};
use axivortex::model::Model;
use axivortex::reconstruction::{reconstruct, FieldGrid};
use axivortex::transport::{exact_discrete_ot, GroundCost};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn check(name: &'static str, value: f64, tolerance: f64) -> Check {
    Check { name, passed: value <= tolerance, value, tolerance }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, uniform: bool) -> PointCloud {
    let points = (0..n).map(|_| [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)]).collect();
    let mut weights: Vec<f64> = (0..n).map(|_| if uniform { 1.0 } else { rng.gen_range(0.1..1.0) }).collect();
    let t: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= t);
    PointCloud { points, weights }
}

/// Transport solver against brute force over permutations and its own dual certificate.
fn transport_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut brute: f64 = 0.0;
    for n in 2..=6 {
        let (a, b) = (random_cloud(&mut rng, n, true), random_cloud(&mut rng, n, true));
        for cost in [GroundCost::HalfSquared, GroundCost::Euclidean] {
            let plan = exact_discrete_ot(&a, &b, cost, 64).expect("small problem");
            let best = permutations(n)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost.eval(a.points[i], b.points[j])).sum::<f64>() / n as f64)
                .fold(f64::INFINITY, f64::min);
            brute = brute.max((plan.value - best).abs());
        }
    }
    let (a, b) = (random_cloud(&mut rng, 200, false), random_cloud(&mut rng, 8, false));
    let plan = exact_discrete_ot(&a, &b, GroundCost::HalfSquared, 4096).expect("within cap");
    vec![
        check("transport_brute_force", brute, 1e-12),
        check("transport_dual_feasibility", plan.dual_violation, 1e-9),
        check("transport_strong_duality", (plan.value - plan.dual_value).abs(), 1e-9),
    ]
}

pub fn run(model: &Model, sigma: &ParticleMeasure, state: &DualState, settings: &SolverSettings, seed: u64) -> OracleReport {
    let mut checks = transport_checks(seed);
    let pot = state.potential(sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let cap = model.s_cap(settings.pole_margin);

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let rho = rng.gen_range(0.02..cap - 0.02);
        let z = rng.gen_range(0.0..model.height);
        let d = boundary_functional_derivative(model, &pot, rho, z);
        let fd = (boundary_functional(model, &pot, rho + h, z) - boundary_functional(model, &pot, rho - h, z)) / (2.0 * h);
        worst = worst.max((d - fd).abs() / d.abs().max(1e-12));
    }
    checks.push(check("boundary_functional_derivative", worst, 1e-6));

    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..sigma.len().min(5) {
        let (mut up, mut down) = (state.psi.clone(), state.psi.clone());
        up[i] += eps;
        down[i] -= eps;
        let fd = (dual_objective(model, sigma, &up, settings).objective - dual_objective(model, sigma, &down, settings).objective)
            / (2.0 * eps);
        worst = worst.max((fd - (state.evaluation.cell_mass[i] - sigma.weights()[i])).abs());
    }
    checks.push(check("dual_supergradient", worst, 1e-3));

    checks.push(check("weak_duality", -state.report.gap, 1e-9));

    let balance = FieldGrid::new(model, &state.boundary, 256, 256)
        .map(|g| reconstruct(model, &pot, &state.boundary, g).gradient_balance_residual(model))
        .unwrap_or(f64::INFINITY);
    checks.push(check("gradient_balance", balance, 0.03));

    OracleReport { passed: checks.iter().all(|c| c.passed), checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(4).len(), 24);
    }

    #[test]
    fn transport_checks_pass() {
        assert!(transport_checks(3).iter().all(|c| c.passed));
    }
}
