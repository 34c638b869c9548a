//! Projected supergradient ascent on the dual objective.

use serde::{Deserialize, Serialize};

use super::isotonic::{monotone_project, monotone_violation};
use super::objective::{boundary_residual, dual_objective, duality_gap, primal_objective, Evaluation};
use super::potential::DualPotential;
use crate::config::SolverSettings;
use crate::error::{Error, Result};
use crate::measure::{FreeBoundary, ParticleMeasure};
use crate::model::Model;

/// Diagnostics of one dual solve.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(rename = "J")]
    pub dual: f64,
    #[serde(rename = "K", serialize_with = "finite_or_null")]
    pub primal: f64,
    pub m2: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub gap: f64,
    pub boundary_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub mass_residual: f64,
    /// Total downward variation of the row minimizers before projection.
    #[serde(skip)]
    pub monotone_violation: f64,
}

fn finite_or_null<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Converged dual variables with the boundary and cells they induce.
#[derive(Clone, Debug)]
pub struct DualState {
    pub psi: Vec<f64>,
    /// Monotone projection of the row minimizers.
    pub boundary: FreeBoundary,
    pub evaluation: Evaluation,
    pub report: SolveReport,
}

impl DualState {
    pub fn potential(&self, sigma: &ParticleMeasure) -> DualPotential {
        DualPotential::new(sigma.atoms(), &self.psi)
    }

    pub fn cell_mass(&self) -> &[f64] {
        &self.evaluation.cell_mass
    }

    /// Barycenters `(s_bar, z_bar)`; fails on an empty cell.
    pub fn barycenters(&self, model: &Model) -> Result<Vec<[f64; 2]>> {
        self.evaluation
            .barycenters(model)
            .into_iter()
            .enumerate()
            .map(|(i, b)| b.ok_or(Error::EmptyCell(i)))
            .collect()
    }
}

/// Boundary after monotone projection, weighted by row height.
pub fn project_boundary(raw: &FreeBoundary) -> FreeBoundary {
    let w = vec![raw.dz; raw.rows()];
    FreeBoundary { z: raw.z.clone(), rho: monotone_project(&raw.rho, &w), dz: raw.dz }
}

/// Shifts all dual variables by a common constant so the domain mass is one.
fn balance_total_mass(model: &Model, sigma: &ParticleMeasure, psi: &mut [f64], settings: &SolverSettings) {
    let mass_at = |k: f64, psi: &[f64]| {
        let shifted: Vec<f64> = psi.iter().map(|p| p + k).collect();
        dual_objective(model, sigma, &shifted, settings).total_mass
    };
    let mut step = 1.0;
    let (mut lo, mut hi) = (0.0, 0.0);
    if mass_at(0.0, psi) > 1.0 {
        while mass_at(hi, psi) > 1.0 && step < 1e6 {
            lo = hi;
            hi += step;
            step *= 2.0;
        }
    } else {
        while mass_at(lo, psi) < 1.0 && step < 1e6 {
            hi = lo;
            lo -= step;
            step *= 2.0;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mass_at(mid, psi) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    for p in psi.iter_mut() {
        *p += k;
    }
}

/// Objective changes below this relative size are treated as rounding.
const ROUNDING: f64 = 1e-14;
/// Curvature pairs kept by the quasi-Newton direction.
const MEMORY: usize = 10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS history for the concave dual, stored as pairs of
/// (step, change of supergradient) with the sign flipped so curvature is positive.
#[derive(Default)]
struct Curvature {
    pairs: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl Curvature {
    fn push(&mut self, step: Vec<f64>, change: Vec<f64>) {
        let sy = dot(&step, &change);
        if sy > 1e-300 && sy.is_finite() {
            if self.pairs.len() == MEMORY {
                self.pairs.pop_front();
            }
            self.pairs.push_back((step, change, 1.0 / sy));
        }
    }

    /// Ascent direction from the supergradient by the two-loop recursion.
    fn direction(&self, grad: &[f64], fallback: f64) -> Vec<f64> {
        let mut q = grad.to_vec();
        let mut alpha = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alpha.push(a);
        }
        let gamma = match self.pairs.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => fallback,
        };
        q.iter_mut().for_each(|qi| *qi *= gamma);
        for ((s, y, rho), a) in self.pairs.iter().zip(alpha.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q
    }
}

/// Maximizes the dual objective over `psi`.
///
/// Iterates move along a limited-memory quasi-Newton direction built from the
/// supergradient `cell_mass - w`, with backtracking: halve until `J` does not
/// decrease. When the change in `J` is at rounding level the step is accepted
/// only if the new supergradient still has a non-negative component along the
/// step. If no step along the quasi-Newton direction is accepted, the history
/// is dropped and the plain supergradient with initial step `1 / max w` is
/// tried. A candidate with mass residual below `tol_mass` and boundary change
/// below `tol_rho` is accepted once the duality gap is below
/// `tol_gap (1 + |K|)`; otherwise the mass tolerance is tightened.
pub fn solve_dual(
    model: &Model,
    sigma: &ParticleMeasure,
    settings: &SolverSettings,
    warm_start: Option<&[f64]>,
) -> Result<DualState> {
    let weights = sigma.weights();
    let m2 = sigma.second_moment();
    let mut psi: Vec<f64> = match warm_start {
        Some(p) if p.len() == sigma.len() => p.to_vec(),
        _ => {
            let mut p = vec![0.0; sigma.len()];
            balance_total_mass(model, sigma, &mut p, settings);
            p
        }
    };
    let eta0 = 1.0 / weights.iter().copied().fold(0.0, f64::max);
    let mut eval = dual_objective(model, sigma, &psi, settings);
    let mut prev_rho: Option<Vec<f64>> = None;
    let mut tol_mass = settings.tol_mass;
    let mut report = SolveReport { m2, ..SolveReport::default() };
    let mut history = Curvature::default();

    for iter in 0..settings.max_iter {
        let grad: Vec<f64> = eval.cell_mass.iter().zip(weights).map(|(m, w)| m - w).collect();
        let residual = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
        let drho = prev_rho
            .as_ref()
            .map(|p| p.iter().zip(&eval.rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .unwrap_or(0.0);
        report.iterations = iter;
        report.mass_residual = residual;

        if residual <= tol_mass && drho <= settings.tol_rho {
            let state = finish(model, sigma, settings, psi.clone(), eval.clone(), report.clone())?;
            let r = &state.report;
            if r.gap <= settings.tol_gap * (1.0 + r.primal.abs()) {
                log::debug!("dual solve converged after {iter} iterations, gap {}", r.gap);
                return Ok(state);
            }
            report = r.clone();
            tol_mass *= 0.1;
            if tol_mass < 1e-15 {
                break;
            }
            continue;
        }

        let slack = ROUNDING * (1.0 + eval.objective.abs());
        let search = |dir: &[f64], mut trial: f64| {
            loop {
                let cand: Vec<f64> = psi.iter().zip(dir).map(|(p, d)| p + trial * d).collect();
                let e = dual_objective(model, sigma, &cand, settings);
                let rise = e.objective - eval.objective;
                let aligned = || e.cell_mass.iter().zip(weights).zip(dir).map(|((m, w), d)| (m - w) * d).sum::<f64>() >= 0.0;
                if rise > slack || (rise >= -slack && aligned()) {
                    return Some((cand, e));
                }
                trial *= 0.5;
                if trial < 1e-18 {
                    return None;
                }
            }
        };
        let mut dir = history.direction(&grad, eta0);
        if dot(&dir, &grad) <= 0.0 {
            history = Curvature::default();
            dir = grad.iter().map(|g| eta0 * g).collect();
        }
        let mut accepted = search(&dir, 1.0);
        if accepted.is_none() && !history.pairs.is_empty() {
            history = Curvature::default();
            dir = grad.iter().map(|g| eta0 * g).collect();
            accepted = search(&dir, 1.0);
        }
        match accepted {
            Some((cand, e)) => {
                let step: Vec<f64> = cand.iter().zip(&psi).map(|(a, b)| a - b).collect();
                let change: Vec<f64> = e.cell_mass.iter().zip(&eval.cell_mass).map(|(a, b)| b - a).collect();
                history.push(step, change);
                prev_rho = Some(std::mem::take(&mut eval.rho));
                psi = cand;
                eval = e;
            }
            None => {
                log::debug!("line search stalled at iteration {iter}, residual {residual}");
                break;
            }
        }
    }

    let state = finish(model, sigma, settings, psi, eval, report)?;
    Err(Error::NotConverged(Box::new(state.report)))
}

fn finish(
    model: &Model,
    sigma: &ParticleMeasure,
    settings: &SolverSettings,
    psi: Vec<f64>,
    evaluation: Evaluation,
    mut report: SolveReport,
) -> Result<DualState> {
    let raw = evaluation.raw_boundary();
    let boundary = project_boundary(&raw);
    let primal = primal_objective(model, sigma, &boundary, settings)?;
    let potential = DualPotential::new(sigma.atoms(), &psi);
    report.dual = evaluation.objective;
    report.primal = primal;
    report.gap = duality_gap(primal, evaluation.objective, report.m2);
    report.boundary_residual = boundary_residual(model, &potential, &boundary);
    report.monotone_violation = monotone_violation(&raw.rho);
    report.mass_residual = evaluation.mass_residual(sigma.weights());
    report.converged = report.gap <= settings.tol_gap * (1.0 + primal.abs());
    Ok(DualState { psi, boundary, evaluation, report })
}
