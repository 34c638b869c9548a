//! Time stepping of the particle measure with a piecewise-frozen velocity.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use serde::Serialize;

use crate::config::{Config, SolverSettings};
use crate::dual::{solve_dual, DualState};
use crate::error::{Error, Result};
use crate::measure::ParticleMeasure;
use crate::model::Model;
use crate::transport::w1_distance;

/// Slack allowed on the support-radius estimate.
pub const SUPPORT_SLACK: f64 = 1e-9;

/// Time grid and the support radii that bound the run.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub horizon: f64,
    pub steps: usize,
    /// Radius `l0` of the ball holding the initial particles.
    pub initial_radius: f64,
    /// Radius `l` the whole trajectory must stay inside.
    pub support_radius: f64,
}

impl Schedule {
    pub fn from_config(config: &Config) -> Self {
        Schedule {
            horizon: config.time.horizon,
            steps: config.time.steps,
            initial_radius: config.model.initial_radius,
            support_radius: config.model.support_radius,
        }
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `exp(4 M T)(4 l0 + 1) < l + 1`.
    pub fn check(&self, model: &Model) -> Result<()> {
        if !(self.horizon > 0.0 && self.steps > 0) {
            return Err(Error::InvalidConfig("horizon and step count must be positive".into()));
        }
        let lhs = (4.0 * model.forcing.bound * self.horizon).exp() * (4.0 * self.initial_radius + 1.0);
        let rhs = self.support_radius + 1.0;
        if lhs < rhs {
            Ok(())
        } else {
            Err(Error::Precondition(format!("exp(4MT)(4 l0 + 1) = {lhs} is not below l + 1 = {rhs}")))
        }
    }
}

/// `(exp(4 M t)(4 l0 + 1) - 1) / 4`.
pub fn support_bound(initial_radius: f64, bound: f64, t: f64) -> f64 {
    ((4.0 * bound * t).exp() * (4.0 * initial_radius + 1.0) - 1.0) / 4.0
}

/// Speed bound `M sqrt(4 l + 1)` on particles inside the ball of radius `l`.
pub fn speed_bound(bound: f64, radius: f64) -> f64 {
    bound * (4.0 * radius + 1.0).sqrt()
}

/// Velocity of each atom at time `t` given the cell barycenters `(s, z)`.
pub fn velocity(model: &Model, sigma: &ParticleMeasure, barycenters: &[[f64; 2]], t: f64) -> Result<Vec<[f64; 2]>> {
    sigma
        .atoms()
        .iter()
        .zip(barycenters)
        .map(|(q, b)| {
            let r = model.r_of_s(b[0])?;
            let f = model.forcing.eval(t, r, b[1], model.r0, model.g);
            Ok([2.0 * q[0].sqrt() * f[0], model.g * f[1]])
        })
        .collect()
}

/// One explicit Euler increment `q + tau V`; weights are untouched.
pub fn euler_step(sigma: &ParticleMeasure, velocity: &[[f64; 2]], tau: f64, step: usize) -> Result<ParticleMeasure> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("time step {tau} must be positive")));
    }
    let mut atoms = Vec::with_capacity(sigma.len());
    for (index, (q, v)) in sigma.atoms().iter().zip(velocity).enumerate() {
        let next = [q[0] + tau * v[0], q[1] + tau * v[1]];
        if !(next[0] > 0.0 && next[1] > 0.0) {
            return Err(Error::LeftDomain { step, index });
        }
        atoms.push(next);
    }
    Ok(sigma.with_atoms(atoms))
}

/// Per-step record written to `diagnostics.json`.
#[derive(Clone, Debug, Serialize)]
pub struct StepDiagnostics {
    pub t: f64,
    #[serde(rename = "J")]
    pub dual: f64,
    #[serde(rename = "K", serialize_with = "finite_or_null")]
    pub primal: f64,
    pub m2: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub gap: f64,
    pub mass: f64,
    pub support_radius: f64,
    /// `W1(sigma_{k-1}, sigma_k)`, zero at the first step.
    pub w1_step: f64,
    pub boundary_residual: f64,
}

fn finite_or_null<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// State of the scheme at one time level.
#[derive(Clone, Debug)]
pub struct Step {
    pub index: usize,
    pub t: f64,
    pub sigma: ParticleMeasure,
    pub state: DualState,
    pub barycenters: Vec<[f64; 2]>,
    pub diagnostics: StepDiagnostics,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn diagnostics(&self) -> Vec<StepDiagnostics> {
        self.steps.iter().map(|s| s.diagnostics.clone()).collect()
    }
}

/// Runs the scheme on `t_k = k tau`, `k = 0..=steps`.
///
/// The dual problem is solved at every level, warm-started from the previous
/// potentials. `observer` sees each level as soon as it is complete, so a run
/// that aborts still leaves its finished levels behind.
pub fn simulate<F>(
    model: &Model,
    sigma0: ParticleMeasure,
    solver: &SolverSettings,
    schedule: &Schedule,
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(&Step) -> Result<()>,
{
    schedule.check(model)?;
    let r0 = sigma0.support_radius();
    if r0 > schedule.initial_radius {
        return Err(Error::Precondition(format!(
            "initial support radius {r0} exceeds l0 = {}",
            schedule.initial_radius
        )));
    }
    let tau = schedule.step();
    let speed = speed_bound(model.forcing.bound, schedule.support_radius);
    let mut traj = Trajectory::default();
    let mut sigma = sigma0;
    let mut warm: Option<Vec<f64>> = None;
    let mut w1_step = 0.0;

    for k in 0..=schedule.steps {
        let t = k as f64 * tau;
        let radius = sigma.support_radius();
        let bound = support_bound(schedule.initial_radius, model.forcing.bound, t);
        if radius > bound + SUPPORT_SLACK {
            return Err(Error::SupportBound { step: k, radius, bound });
        }
        let state = solve_dual(model, &sigma, solver, warm.as_deref())?;
        let barycenters = state.barycenters(model)?;
        let r = &state.report;
        let diagnostics = StepDiagnostics {
            t,
            dual: r.dual,
            primal: r.primal,
            m2: r.m2,
            gap: r.gap,
            mass: state.evaluation.total_mass,
            support_radius: radius,
            w1_step,
            boundary_residual: r.boundary_residual,
        };
        log::info!("step {k} t = {t:.6} gap {:.3e} radius {radius:.6}", r.gap);
        warm = Some(state.psi.clone());
        let step = Step { index: k, t, sigma: sigma.clone(), state, barycenters, diagnostics };
        observer(&step)?;
        if k < schedule.steps {
            let v = velocity(model, &sigma, &step.barycenters, t)?;
            let next = euler_step(&sigma, &v, tau, k + 1)?;
            w1_step = w1_distance(&sigma.as_cloud(), &next.as_cloud(), solver.ot_cap)?;
            if w1_step > speed * tau {
                return Err(Error::StepBound { step: k + 1, distance: w1_step, bound: speed * tau });
            }
            sigma = next;
        }
        traj.steps.push(step);
    }
    Ok(traj)
}

/// Convex quadratic `q A q / 2 + b q + c` standing in for the dual potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Surrogate {
    pub hessian: [[f64; 2]; 2],
    pub linear: [f64; 2],
    pub constant: f64,
}

impl Surrogate {
    pub fn affine(linear: [f64; 2], constant: f64) -> Self {
        Surrogate { hessian: [[0.0; 2]; 2], linear, constant }
    }

    pub fn value(&self, q: [f64; 2]) -> f64 {
        let a = &self.hessian;
        0.5 * (a[0][0] * q[0] * q[0] + 2.0 * a[0][1] * q[0] * q[1] + a[1][1] * q[1] * q[1])
            + self.linear[0] * q[0]
            + self.linear[1] * q[1]
            + self.constant
    }

    pub fn gradient(&self, q: [f64; 2]) -> [f64; 2] {
        let a = &self.hessian;
        [
            a[0][0] * q[0] + a[0][1] * q[1] + self.linear[0],
            a[1][0] * q[0] + a[1][1] * q[1] + self.linear[1],
        ]
    }

    /// Weighted least-squares paraboloid through `(q_i, psi_i)`.
    ///
    /// An indefinite Hessian is projected onto the positive semidefinite cone
    /// and the affine part refitted. With fewer than six atoms only the affine
    /// part is fitted.
    pub fn fit(sigma: &ParticleMeasure, psi: &[f64]) -> Result<Self> {
        let atoms = sigma.atoms();
        let w = sigma.weights();
        if atoms.len() < 3 {
            return Err(Error::Surrogate);
        }
        let scale = sigma.support_radius().max(1.0);
        let quadratic = atoms.len() >= 6;
        let cols = if quadratic { 6 } else { 3 };
        let rows = atoms.len();
        let mut design = DMatrix::zeros(rows, cols);
        let mut rhs = DVector::zeros(rows);
        for (i, q) in atoms.iter().enumerate() {
            let (x, y) = (q[0] / scale, q[1] / scale);
            let sw = w[i].sqrt();
            let mut row = vec![1.0, x, y];
            if quadratic {
                row.extend([0.5 * x * x, x * y, 0.5 * y * y]);
            }
            for (j, v) in row.into_iter().enumerate() {
                design[(i, j)] = sw * v;
            }
            rhs[i] = sw * psi[i];
        }
        let solve = |design: &DMatrix<f64>, rhs: &DVector<f64>| -> Result<DVector<f64>> {
            design.clone().svd(true, true).solve(rhs, 1e-12).map_err(|_| Error::Surrogate)
        };
        let coef = solve(&design, &rhs)?;
        let mut hess = Matrix2::zeros();
        if quadratic {
            hess = Matrix2::new(coef[3], coef[4], coef[4], coef[5]);
        }
        let eig = SymmetricEigen::new(hess);
        let projected = if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
            None
        } else {
            let d = Matrix2::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0)));
            Some(eig.eigenvectors * d * eig.eigenvectors.transpose())
        };
        let (c, lin) = match projected {
            None => (coef[0], [coef[1], coef[2]]),
            Some(h) => {
                hess = h;
                let affine = design.columns(0, 3).into_owned();
                let mut target = rhs.clone();
                for (i, q) in atoms.iter().enumerate() {
                    let (x, y) = (q[0] / scale, q[1] / scale);
                    let quad = 0.5 * (h[(0, 0)] * x * x + 2.0 * h[(0, 1)] * x * y + h[(1, 1)] * y * y);
                    target[i] -= w[i].sqrt() * quad;
                }
                let a = solve(&affine, &target)?;
                (a[0], [a[1], a[2]])
            }
        };
        let s2 = scale * scale;
        Ok(Surrogate {
            hessian: [[hess[(0, 0)] / s2, hess[(0, 1)] / s2], [hess[(1, 0)] / s2, hess[(1, 1)] / s2]],
            linear: [lin[0] / scale, lin[1] / scale],
            constant: c,
        })
    }

    /// Gradient clipped into `[0, cap] x [y(0), y(H)]`.
    fn clipped_gradient(&self, model: &Model, cap: f64, q: [f64; 2]) -> ([f64; 2], [bool; 2]) {
        let g = self.gradient(q);
        let (y0, y1) = (model.scaled_height(0.0), model.scaled_height(model.height));
        let s = g[0].clamp(0.0, cap);
        let y = g[1].clamp(y0, y1);
        ([s, y], [s == g[0], y == g[1]])
    }

    /// Velocity induced by the surrogate at a point of the dual plane.
    pub fn velocity(&self, model: &Model, cap: f64, t: f64, q: [f64; 2]) -> Result<[f64; 2]> {
        let ([s, y], _) = self.clipped_gradient(model, cap, q);
        let r = model.r_of_s(s)?;
        let z = model.scaled_height_inv(y)?;
        let f = model.forcing.eval(t, r, z, model.r0, model.g);
        Ok([2.0 * q[0].sqrt() * f[0], model.g * f[1]])
    }

    /// Chain-rule divergence of [`Surrogate::velocity`].
    pub fn divergence(&self, model: &Model, cap: f64, t: f64, q: [f64; 2]) -> Result<f64> {
        let ([s, y], [free_s, free_y]) = self.clipped_gradient(model, cap, q);
        let r = model.r_of_s(s)?;
        let z = model.scaled_height_inv(y)?;
        let f = model.forcing.eval(t, r, z, model.r0, model.g);
        let jac = model.forcing.jacobian(t, r, z, model.r0, model.g);
        // dr/ds and dz/dy, zero where the gradient is clipped
        let f0 = model.rot(s);
        let dr = if free_s { model.rotation_potential_slope(s) / (std::f64::consts::SQRT_2 * model.omega * f0.sqrt()) } else { 0.0 };
        let dz = if free_y { 1.0 / model.scaled_height_slope(z) } else { 0.0 };
        let a = &self.hessian;
        let root = q[0].sqrt();
        let d_upsilon = f[0] / root + 2.0 * root * (jac[0][0] * dr * a[0][0] + jac[0][1] * dz * a[1][0]);
        let d_zed = model.g * (jac[1][0] * dr * a[0][1] + jac[1][1] * dz * a[1][1]);
        Ok(d_upsilon + d_zed)
    }
}

/// Divergence of the surrogate velocity sampled on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct DivergenceReport {
    /// Smallest centered finite-difference divergence.
    pub min_divergence: f64,
    /// Largest gap between finite differences and the chain-rule formula,
    /// over points whose stencil does not cross a clipping kink.
    pub formula_mismatch: f64,
    pub points: usize,
}

/// Finite-difference divergence of the surrogate velocity on an `n x n`
/// interior grid of `[lo, hi]` with difference step `h`.
pub fn divergence_check(
    model: &Model,
    surrogate: &Surrogate,
    cap: f64,
    t: f64,
    lo: [f64; 2],
    hi: [f64; 2],
    n: usize,
    h: f64,
) -> Result<DivergenceReport> {
    if !(lo[0] - h > 0.0 && lo[1] - h > 0.0 && hi[0] > lo[0] && hi[1] > lo[1]) {
        return Err(Error::Domain("divergence grid must sit strictly inside the quadrant".into()));
    }
    let mut min_div = f64::INFINITY;
    let mut mismatch: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let q = [
                lo[0] + (i as f64 + 0.5) * (hi[0] - lo[0]) / n as f64,
                lo[1] + (j as f64 + 0.5) * (hi[1] - lo[1]) / n as f64,
            ];
            let v = |p: [f64; 2]| surrogate.velocity(model, cap, t, p);
            let du = (v([q[0] + h, q[1]])?[0] - v([q[0] - h, q[1]])?[0]) / (2.0 * h);
            let dz = (v([q[0], q[1] + h])?[1] - v([q[0], q[1] - h])?[1]) / (2.0 * h);
            let div = du + dz;
            min_div = min_div.min(div);
            // the formula is only comparable away from the clipping kinks
            let status = |p: [f64; 2]| surrogate.clipped_gradient(model, cap, p).1;
            let smooth = [[h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]]
                .iter()
                .all(|d| status([q[0] + d[0], q[1] + d[1]]) == status(q));
            if smooth {
                mismatch = mismatch.max((div - surrogate.divergence(model, cap, t, q)?).abs());
            }
        }
    }
    Ok(DivergenceReport { min_divergence: min_div, formula_mismatch: mismatch, points: n * n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Forcing;

    #[test]
    fn zero_forcing_gives_zero_velocity() {
        let model = Model::canonical().with_forcing(Forcing::zero());
        let sigma = ParticleMeasure::uniform(vec![[1.0, 1.0], [2.0, 0.5]]).unwrap();
        let v = velocity(&model, &sigma, &[[0.1, 0.2], [0.3, 0.4]], 0.0).unwrap();
        assert_eq!(v, vec![[0.0, 0.0]; 2]);
    }

    #[test]
    fn single_atom_velocity_by_hand() {
        let model = Model::canonical();
        let sigma = ParticleMeasure::uniform(vec![[1.0, 1.0]]).unwrap();
        let zbar = 0.4;
        let v = velocity(&model, &sigma, &[[0.25, zbar]], 0.0).unwrap();
        let m = model.forcing.bound;
        let expect = [2.0 * m * (1.0 - (-(2f64.sqrt() - 1.0)).exp()), m * (1.0 - (-zbar as f64).exp())];
        assert!((v[0][0] - expect[0]).abs() < 1e-14);
        assert!((v[0][1] - expect[1]).abs() < 1e-14);
    }

    #[test]
    fn velocity_respects_speed_bound() {
        let model = Model::canonical().with_forcing(Forcing::exponential(1.0));
        let atoms = vec![[1.9, 0.3], [0.2, 1.9], [1.4, 1.4]];
        let sigma = ParticleMeasure::uniform(atoms).unwrap();
        let v = velocity(&model, &sigma, &[[0.49, 5.0]; 3], 0.0).unwrap();
        for vi in v {
            assert!(vi[0].hypot(vi[1]) <= speed_bound(1.0, 2.0));
        }
        assert_eq!(speed_bound(1.0, 2.0), 3.0);
    }

    #[test]
    fn euler_step_arithmetic() {
        let sigma = ParticleMeasure::uniform(vec![[1.0, 1.0]]).unwrap();
        let next = euler_step(&sigma, &[[2.0, 0.0]], 0.1, 1).unwrap();
        assert!((next.atoms()[0][0] - 1.2).abs() < 1e-15 && next.atoms()[0][1] == 1.0);
        assert_eq!(next.weights(), sigma.weights());
        let same = euler_step(&sigma, &[[0.0, 0.0]], 0.1, 1).unwrap();
        assert_eq!(same, sigma);
        let w1 = w1_distance(&sigma.as_cloud(), &next.as_cloud(), 16).unwrap();
        assert!((w1 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn euler_step_rejects_leaving_the_quadrant() {
        let sigma = ParticleMeasure::uniform(vec![[1.0, 1.0], [0.1, 1.0]]).unwrap();
        assert!(matches!(euler_step(&sigma, &[[0.0, 0.0], [-2.0, 0.0]], 0.1, 3), Err(Error::LeftDomain { step: 3, index: 1 })));
        assert!(euler_step(&sigma, &[[0.0; 2]; 2], 0.0, 1).is_err());
    }

    #[test]
    fn support_bound_at_zero_is_initial_radius() {
        assert!((support_bound(0.5, 0.25, 0.0) - 0.5).abs() < 1e-15);
        assert!(support_bound(0.5, 0.25, 0.5) > 0.5);
    }

    #[test]
    fn schedule_precondition() {
        let model = Model::canonical().with_forcing(Forcing::exponential(1.0));
        let s = Schedule { horizon: 1.0, steps: 4, initial_radius: 1.0, support_radius: 1.0 };
        assert!(matches!(s.check(&model), Err(Error::Precondition(_))));
        let ok = Schedule { horizon: 0.5, steps: 16, initial_radius: 0.5, support_radius: 4.0 };
        assert!(ok.check(&Model::canonical()).is_ok());
    }

    #[test]
    fn affine_surrogate_divergence_reduces_to_first_term() {
        let model = Model::canonical();
        let cap = model.s_cap(1e-3);
        let sur = Surrogate::affine([0.2, 0.7], 0.0);
        for q in [[0.3, 0.4], [1.5, 2.0], [3.0, 0.1]] {
            let div = sur.divergence(&model, cap, 0.0, q).unwrap();
            let r = model.r_of_s(0.2).unwrap();
            let f0 = model.forcing.eval(0.0, r, 0.0, model.r0, model.g)[0];
            assert!((div - f0 / q[0].sqrt()).abs() < 1e-14);
        }
        let rep = divergence_check(&model, &sur, cap, 0.0, [0.1, 0.1], [2.0, 2.0], 16, 1e-4).unwrap();
        assert!(rep.min_divergence > 0.0);
        assert!(rep.formula_mismatch < 1e-6, "{rep:?}");
    }

    #[test]
    fn zero_forcing_divergence_vanishes() {
        let model = Model::canonical().with_forcing(Forcing::zero());
        let sur = Surrogate { hessian: [[0.1, 0.02], [0.02, 0.3]], linear: [0.05, 0.1], constant: 0.0 };
        let rep = divergence_check(&model, &sur, model.s_cap(1e-3), 0.0, [0.2, 0.2], [1.5, 1.5], 8, 1e-3).unwrap();
        assert_eq!(rep.min_divergence, 0.0);
    }

    #[test]
    fn quadratic_surrogate_matches_chain_rule() {
        let model = Model::canonical();
        let sur = Surrogate { hessian: [[0.08, 0.01], [0.01, 0.25]], linear: [0.02, 0.05], constant: 0.0 };
        let rep = divergence_check(&model, &sur, model.s_cap(1e-3), 0.0, [0.2, 0.2], [1.8, 1.8], 32, 1e-5).unwrap();
        assert!(rep.min_divergence >= -1e-8);
        assert!(rep.formula_mismatch < 1e-5, "{rep:?}");
    }

    #[test]
    fn fit_recovers_exact_paraboloid() {
        let truth = Surrogate { hessian: [[0.3, 0.1], [0.1, 0.2]], linear: [0.05, -0.1], constant: 0.4 };
        let atoms: Vec<[f64; 2]> = (0..9).map(|k| [0.2 + 0.2 * (k % 3) as f64, 0.3 + 0.25 * (k / 3) as f64]).collect();
        let psi: Vec<f64> = atoms.iter().map(|&q| truth.value(q)).collect();
        let sigma = ParticleMeasure::uniform(atoms).unwrap();
        let fit = Surrogate::fit(&sigma, &psi).unwrap();
        for (a, b) in fit.hessian.iter().flatten().zip(truth.hessian.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((fit.constant - truth.constant).abs() < 1e-9);
    }

    #[test]
    fn fit_projects_indefinite_hessian() {
        let saddle = Surrogate { hessian: [[0.3, 0.0], [0.0, -0.2]], linear: [0.0, 0.0], constant: 0.0 };
        let atoms: Vec<[f64; 2]> = (0..9).map(|k| [0.2 + 0.2 * (k % 3) as f64, 0.3 + 0.25 * (k / 3) as f64]).collect();
        let psi: Vec<f64> = atoms.iter().map(|&q| saddle.value(q)).collect();
        let sigma = ParticleMeasure::uniform(atoms).unwrap();
        let fit = Surrogate::fit(&sigma, &psi).unwrap();
        let h = Matrix2::new(fit.hessian[0][0], fit.hessian[0][1], fit.hessian[1][0], fit.hessian[1][1]);
        assert!(SymmetricEigen::new(h).eigenvalues.iter().all(|&l| l >= -1e-12));
    }
}
