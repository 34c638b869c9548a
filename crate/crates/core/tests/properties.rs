use axivortex::config::SolverSettings;
use axivortex::dual::{
    dual_objective, monotone_project, primal_objective, project_boundary, solve_dual, DualPotential,
};
use axivortex::measure::{FreeBoundary, ParticleMeasure, PointCloud};
use axivortex::model::Model;
use axivortex::transport::{exact_discrete_ot, w1_distance, w2_distance, GroundCost};
use proptest::prelude::*;

fn quadratic(a: [f64; 2], b: [f64; 2]) -> f64 {
    0.5 * (a[0] - b[0]).powi(2) + 0.5 * (a[1] - b[1]).powi(2)
}

fn cloud_strategy(n: usize) -> impl Strategy<Value = PointCloud> {
    (prop::collection::vec((0.0..3.0f64, 0.0..3.0f64), n), prop::collection::vec(0.1..1.0f64, n)).prop_map(|(pts, w)| {
        let t: f64 = w.iter().sum();
        PointCloud { points: pts.into_iter().map(|(x, y)| [x, y]).collect(), weights: w.into_iter().map(|v| v / t).collect() }
    })
}

fn atoms_strategy(n: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((0.2..2.0f64, 0.2..2.0f64), n).prop_map(|v| v.into_iter().map(|(a, b)| [a, b]).collect())
}

fn coarse() -> SolverSettings {
    SolverSettings { rows: 48, scan_points: 256, cloud_bands: 16, cloud_bins: 16, ..SolverSettings::default() }
}

/// Affine boundary `a + b z` with `a` chosen so the mass is one.
fn unit_mass_boundary(model: &Model, rows: usize, slope: f64) -> FreeBoundary {
    let (mut lo, mut hi) = (0.0, model.s_cap(1e-3) - slope * model.height);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if FreeBoundary::from_fn(model, rows, |z| mid + slope * z).mass(model) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    FreeBoundary::from_fn(model, rows, |z| lo + slope * z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cost_splits_into_quadratics(s in 0.0..0.5f64, z in 0.0..1.0f64, m in 0.9..2.1f64, u in 0.0..5.0f64, zed in 0.0..5.0f64) {
        let model = Model::canonical();
        let p = [s, z / m];
        let q = [u, zed];
        let split = quadratic(p, [0.0, 0.0]) + quadratic([0.0, 0.0], q) - quadratic(p, q);
        prop_assert!((model.cost(s, z, m, u, zed) - split).abs() <= 1e-12 * (1.0 + split.abs()));
    }

    #[test]
    fn rotation_potential_increases(a in 0.0..0.4999f64, b in 0.0..0.4999f64) {
        let model = Model::canonical();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(lo < hi);
        prop_assert!(model.rotation_potential(lo).unwrap() < model.rotation_potential(hi).unwrap());
    }

    #[test]
    fn radius_round_trip(r in 1.0..50.0f64) {
        let model = Model::canonical();
        let back = model.r_of_s(model.s_of_r(r).unwrap()).unwrap();
        prop_assert!((back - r).abs() <= 1e-12 * r);
    }

    #[test]
    fn isotonic_projection(values in prop::collection::vec(-1.0..1.0f64, 1..40), seed in 0.1..2.0f64) {
        let weights: Vec<f64> = (0..values.len()).map(|i| seed + (i % 3) as f64).collect();
        let p = monotone_project(&values, &weights);
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
        let mean = |v: &[f64]| v.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>();
        prop_assert!((mean(&p) - mean(&values)).abs() <= 1e-12);
        prop_assert_eq!(monotone_project(&p, &weights), p.clone());
        // variational inequality against the monotone competitors 0 and the ramp
        let ramp: Vec<f64> = (0..values.len()).map(|i| i as f64 / values.len() as f64).collect();
        for v in [vec![0.0; values.len()], ramp] {
            let ip: f64 = values.iter().zip(&p).zip(&v).zip(&weights).map(|(((x, px), vi), w)| w * (x - px) * (vi - px)).sum();
            prop_assert!(ip <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wasserstein_is_a_metric(a in cloud_strategy(8), b in cloud_strategy(8), c in cloud_strategy(8)) {
        let d = |x: &PointCloud, y: &PointCloud| w2_distance(x, y, 64).unwrap();
        let (ab, ba, bc, ac) = (d(&a, &b), d(&b, &a), d(&b, &c), d(&a, &c));
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!(w1_distance(&a, &b, 64).unwrap() <= ab + 1e-9);
    }

    #[test]
    fn transport_duals_certify(a in cloud_strategy(12), b in cloud_strategy(5)) {
        for cost in [GroundCost::HalfSquared, GroundCost::Euclidean] {
            let plan = exact_discrete_ot(&a, &b, cost, 64).unwrap();
            prop_assert!(plan.value - plan.dual_value <= 1e-9);
            prop_assert!(plan.dual_violation <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn weak_duality_on_feasible_pairs(
        atoms in atoms_strategy(5),
        psi in prop::collection::vec(-0.5..0.5f64, 5),
        slope in 0.0..0.2f64,
    ) {
        let model = Model::canonical();
        let sigma = ParticleMeasure::uniform(atoms).unwrap();
        let settings = coarse();
        let boundary = unit_mass_boundary(&model, settings.rows, slope);
        let k = primal_objective(&model, &sigma, &boundary, &settings).unwrap();
        let j = dual_objective(&model, &sigma, &psi, &settings).objective;
        prop_assert!(k >= j + sigma.second_moment() - 1e-9, "K {} J {} m2 {}", k, j, sigma.second_moment());
    }

    #[test]
    fn dual_objective_is_concave(
        atoms in atoms_strategy(4),
        a in prop::collection::vec(-0.5..0.5f64, 4),
        b in prop::collection::vec(-0.5..0.5f64, 4),
    ) {
        let model = Model::canonical();
        let sigma = ParticleMeasure::uniform(atoms).unwrap();
        let settings = coarse();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let j = |p: &[f64]| dual_objective(&model, &sigma, p, &settings).objective;
        prop_assert!(j(&mid) >= 0.5 * (j(&a) + j(&b)) - 1e-12);
    }

    #[test]
    fn uniform_shift_moves_by_mass_defect(atoms in atoms_strategy(4), psi in prop::collection::vec(-0.3..0.3f64, 4)) {
        let model = Model::canonical();
        let sigma = ParticleMeasure::uniform(atoms).unwrap();
        let settings = coarse();
        let k = 1e-5;
        let at = |d: f64| {
            let p: Vec<f64> = psi.iter().map(|v| v + d).collect();
            dual_objective(&model, &sigma, &p, &settings)
        };
        let fd = (at(k).objective - at(-k).objective) / (2.0 * k);
        prop_assert!((fd - (at(0.0).total_mass - 1.0)).abs() <= 1e-3);
    }

    #[test]
    fn projected_boundary_is_monotone_and_capped(atoms in atoms_strategy(4), psi in prop::collection::vec(-0.3..0.3f64, 4)) {
        let model = Model::canonical();
        let sigma = ParticleMeasure::uniform(atoms).unwrap();
        let settings = coarse();
        let e = dual_objective(&model, &sigma, &psi, &settings);
        let cap = model.s_cap(settings.pole_margin);
        prop_assert!(e.rho.iter().all(|&r| (0.0..=cap).contains(&r)));
        let b = project_boundary(&e.raw_boundary());
        prop_assert!(b.rho.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(b.rho.iter().all(|&r| r <= cap));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn converged_states_invert_and_conjugate(atoms in atoms_strategy(4)) {
        let model = Model::canonical();
        let sigma = ParticleMeasure::uniform(atoms).unwrap();
        let settings = coarse();
        let state = solve_dual(&model, &sigma, &settings, None).unwrap();
        let pot: DualPotential = state.potential(&sigma);
        for (i, b) in state.barycenters(&model).unwrap().iter().enumerate() {
            prop_assert_eq!(pot.assign(&model, b[0], b[1]), i);
        }
        let cap = model.s_cap(settings.pole_margin);
        for (i, q) in sigma.atoms().iter().enumerate() {
            let back = pot.back_conjugate(&model, *q, 48, cap);
            prop_assert!(back <= state.psi[i] + 1e-12);
            prop_assert!(state.psi[i] - back <= 1e-6, "atom {}: {} vs {}", i, back, state.psi[i]);
        }
    }
}
