//! The per-height boundary functional and its minimization.

use super::potential::{AffinePiece, Potential};
use crate::model::Model;

/// One height row of the functional
/// `S(rho, z) = int_0^rho (f(s) - P(s, z)) density(s) ds`,
/// where `f` is the rotation potential.
pub(crate) struct Row<'a, P: Potential + ?Sized> {
    model: &'a Model,
    potential: &'a P,
    z: f64,
    pieces: Option<Vec<AffinePiece>>,
}

impl<'a, P: Potential + ?Sized> Row<'a, P> {
    pub(crate) fn new(model: &'a Model, potential: &'a P, z: f64, end: f64) -> Self {
        let pieces = potential.pieces(model, z, end);
        Row { model, potential, z, pieces }
    }

    pub(crate) fn pieces(&self) -> Option<&[AffinePiece]> {
        self.pieces.as_deref()
    }

    #[inline]
    pub(crate) fn potential_at(&self, s: f64) -> f64 {
        match &self.pieces {
            Some(pcs) => {
                let k = pcs.partition_point(|p| p.end < s).min(pcs.len() - 1);
                pcs[k].slope * s + pcs[k].intercept
            }
            None => self.potential.value(self.model, s, self.z),
        }
    }

    /// Residual at increasing abscissae, reusing the piece cursor.
    #[inline]
    pub(crate) fn residual_scan(&self, s: f64, cursor: &mut usize) -> f64 {
        match &self.pieces {
            Some(pcs) => {
                while *cursor + 1 < pcs.len() && pcs[*cursor].end < s {
                    *cursor += 1;
                }
                let p = &pcs[*cursor];
                self.model.rot(s) - (p.slope * s + p.intercept)
            }
            None => self.residual(s),
        }
    }

    /// `f(s) - P(s, z)`; the derivative of `S` is this times the density.
    #[inline]
    pub(crate) fn residual(&self, s: f64) -> f64 {
        self.model.rot(s) - self.potential_at(s)
    }

    fn piece_primitive(&self, s: f64, slope: f64, intercept: f64) -> f64 {
        let m = self.model;
        m.energy_primitive(s) - slope * m.moment_primitive(s) - intercept * m.mass_primitive(s)
    }

    /// `int_a^b (f - P) density ds`.
    pub(crate) fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match &self.pieces {
            Some(pcs) => {
                let mut total = 0.0;
                let first = pcs.partition_point(|p| p.end <= a);
                for p in &pcs[first.min(pcs.len())..] {
                    if p.start >= b {
                        break;
                    }
                    let (lo, hi) = (a.max(p.start), b.min(p.end));
                    if hi > lo {
                        total += self.piece_primitive(hi, p.slope, p.intercept)
                            - self.piece_primitive(lo, p.slope, p.intercept);
                    }
                }
                total
            }
            None => {
                let f = |s: f64| (self.model.rot(s) - self.potential.value(self.model, s, self.z)) * self.model.density(s);
                adaptive_gauss_kronrod(&f, a, b, 1e-15, 40)
            }
        }
    }
}

/// `S(rho, z)`.
pub fn boundary_functional<P: Potential + ?Sized>(model: &Model, potential: &P, rho: f64, z: f64) -> f64 {
    Row::new(model, potential, z, rho).integral(0.0, rho)
}

/// `dS/drho = (f(rho) - P(rho, z)) density(rho)`.
pub fn boundary_functional_derivative<P: Potential + ?Sized>(model: &Model, potential: &P, rho: f64, z: f64) -> f64 {
    (model.rot(rho) - potential.value(model, rho, z)) * model.density(rho)
}

/// Global minimizer of `S(., z)` on `[0, cap]`.
///
/// The derivative `(f - P) density` is scanned on `scan_points` uniform
/// points; every sign change from negative to positive brackets a local
/// minimum, which is refined by bisection. The endpoints are candidates too,
/// and the candidate with the smallest `S` wins (lowest `rho` on ties).
pub fn minimize_boundary_functional<P: Potential + ?Sized>(
    model: &Model,
    potential: &P,
    z: f64,
    scan_points: usize,
    cap: f64,
) -> f64 {
    let row = Row::new(model, potential, z, cap);
    minimize_row(&row, scan_points, cap)
}

pub(crate) fn minimize_row<P: Potential + ?Sized>(row: &Row<'_, P>, scan_points: usize, cap: f64) -> f64 {
    let n = scan_points.max(3);
    let h = cap / (n - 1) as f64;
    let grid = |k: usize| if k == n - 1 { cap } else { k as f64 * h };

    let mut best = (0.0, 0.0);
    let consider = |x: f64, best: &mut (f64, f64)| {
        let v = row.integral(0.0, x);
        if v < best.1 {
            *best = (x, v);
        }
    };
    let mut cursor = 0;
    let mut prev = row.residual_scan(0.0, &mut cursor);
    for k in 1..n {
        let s = grid(k);
        let cur = row.residual_scan(s, &mut cursor);
        if prev < 0.0 && cur >= 0.0 {
            consider(bisect(row, grid(k - 1), s), &mut best);
        }
        prev = cur;
    }
    if prev < 0.0 {
        consider(cap, &mut best);
    }
    best.0
}

fn bisect<P: Potential + ?Sized>(row: &Row<'_, P>, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if row.residual(mid) <= 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    // endpoint with the smaller residual
    if row.residual(a).abs() <= row.residual(b).abs() {
        a
    } else {
        b
    }
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * GAUSS_WEIGHTS[3];
    for k in 0..7 {
        let x = h * GK_NODES[k];
        let pair = f(c - x) + f(c + x);
        kronrod += GK_WEIGHTS[k] * pair;
        if k % 2 == 1 {
            gauss += GAUSS_WEIGHTS[k / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive 7/15-point Gauss-Kronrod quadrature to absolute tolerance `tol`.
pub fn adaptive_gauss_kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if depth == 0 || err <= tol.max(1e-15 * v.abs()) {
        return v;
    }
    let m = 0.5 * (a + b);
    adaptive_gauss_kronrod(f, a, m, 0.5 * tol, depth - 1) + adaptive_gauss_kronrod(f, m, b, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::super::potential::{DualPotential, FnPotential};
    use super::*;

    const CAP: f64 = 0.5 * (1.0 - 1e-3);

    #[test]
    fn constant_potential_minimizers() {
        let model = Model::canonical();
        let cases = [(1.0, 0.25), (0.0, 0.0), (10.0, 0.475)];
        for (level, expected) in cases {
            let p = FnPotential(move |_: f64, _: f64| level);
            let rho = minimize_boundary_functional(&model, &p, 0.5, 512, CAP);
            assert!((rho - expected).abs() < 1e-10, "P = {level}: {rho}");
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let model = Model::canonical();
        let atoms = [[0.5, 1.0], [1.5, 0.7], [2.0, 0.2]];
        let lazy = DualPotential::new(&atoms, &[-0.6, -0.3, 0.1]);
        let generic = FnPotential(|s: f64, z: f64| lazy.best_scaled(s, model.scaled_height(z)).1);
        for &(rho, z) in &[(0.1, 0.2), (0.3, 0.7), (0.45, 0.9)] {
            let exact = boundary_functional(&model, &lazy, rho, z);
            let quad = boundary_functional(&model, &generic, rho, z);
            assert!((exact - quad).abs() < 1e-11, "{exact} vs {quad}");
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let model = Model::canonical();
        let p = DualPotential::new(&[[0.5, 1.0], [1.5, 0.7]], &[-0.6, -0.3]);
        let h = 1e-6;
        for &(rho, z) in &[(0.05, 0.1), (0.2, 0.5), (0.4, 0.95)] {
            let fd = (boundary_functional(&model, &p, rho + h, z) - boundary_functional(&model, &p, rho - h, z)) / (2.0 * h);
            let an = boundary_functional_derivative(&model, &p, rho, z);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0));
        }
    }

    #[test]
    fn gauss_kronrod_polynomial_and_smooth() {
        let v = adaptive_gauss_kronrod(&|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 20);
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
        let e = adaptive_gauss_kronrod(&|x: f64| x.exp(), 0.0, 1.0, 1e-14, 20);
        assert!((e - (1f64.exp() - 1.0)).abs() < 1e-14);
    }
}
