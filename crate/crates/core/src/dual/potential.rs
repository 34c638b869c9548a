use crate::model::Model;

/// Segment `[start, end]` of a height row on which the potential is affine,
/// `P(s) = slope * s + intercept`, realized by atom `atom`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffinePiece {
    pub start: f64,
    pub end: f64,
    pub slope: f64,
    pub intercept: f64,
    pub atom: usize,
}

/// A potential `P(s, z)` evaluated on the graph `m = theta0(z)`.
pub trait Potential: Sync {
    fn value(&self, model: &Model, s: f64, z: f64) -> f64;

    /// Affine decomposition of `s -> P(s, z)` on `[0, end]`, when one exists.
    fn pieces(&self, _model: &Model, _z: f64, _end: f64) -> Option<Vec<AffinePiece>> {
        None
    }
}

/// Wraps a closure `(s, z) -> P` as a [`Potential`].
pub struct FnPotential<F>(pub F);

impl<F: Fn(f64, f64) -> f64 + Sync> Potential for FnPotential<F> {
    fn value(&self, _model: &Model, s: f64, z: f64) -> f64 {
        (self.0)(s, z)
    }
}

/// Conjugate of the atomic dual variables,
/// `P(s, z, m) = max_i [s Upsilon_i + z Z_i / m - psi_i]`, evaluated lazily.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPotential {
    pub atoms: Vec<[f64; 2]>,
    pub psi: Vec<f64>,
}

impl DualPotential {
    pub fn new(atoms: &[[f64; 2]], psi: &[f64]) -> Self {
        assert_eq!(atoms.len(), psi.len());
        DualPotential { atoms: atoms.to_vec(), psi: psi.to_vec() }
    }

    /// Value at a general point of the product space.
    pub fn eval(&self, model: &Model, s: f64, z: f64, m: f64) -> f64 {
        self.best(model, s, z, m).1
    }

    /// Maximizing atom (lowest index on ties) and the maximum.
    pub fn best(&self, model: &Model, s: f64, z: f64, m: f64) -> (usize, f64) {
        let mut arg = 0;
        let mut top = f64::NEG_INFINITY;
        for (i, (q, p)) in self.atoms.iter().zip(&self.psi).enumerate() {
            let v = model.cost(s, z, m, q[0], q[1]) - p;
            if v > top {
                top = v;
                arg = i;
            }
        }
        (arg, top)
    }

    /// Cell containing `(s, z)`: the atom attaining the maximum at `m = theta0(z)`.
    pub fn assign(&self, model: &Model, s: f64, z: f64) -> usize {
        self.best_scaled(s, model.scaled_height(z)).0
    }

    /// Image of `(s, z)` under the transport map.
    pub fn transport_map(&self, model: &Model, s: f64, z: f64) -> [f64; 2] {
        self.atoms[self.assign(model, s, z)]
    }

    /// Same as [`DualPotential::best`] in the coordinates `(s, y = z / theta0(z))`.
    #[inline]
    pub fn best_scaled(&self, s: f64, y: f64) -> (usize, f64) {
        let mut arg = 0;
        let mut top = f64::NEG_INFINITY;
        for (i, (q, p)) in self.atoms.iter().zip(&self.psi).enumerate() {
            let v = s * q[0] + y * q[1] - p;
            if v > top {
                top = v;
                arg = i;
            }
        }
        (arg, top)
    }

    /// Upper envelope of the lines `s -> Upsilon_i s + y Z_i - psi_i` on `[0, end]`.
    pub fn envelope(&self, y: f64, end: f64) -> Vec<AffinePiece> {
        let line = |i: usize| (self.atoms[i][0], y * self.atoms[i][1] - self.psi[i]);
        let n = self.atoms.len();
        let mut cur = 0;
        for i in 1..n {
            let (a, b) = line(i);
            let (ca, cb) = line(cur);
            if b > cb || (b == cb && a > ca) {
                cur = i;
            }
        }
        let mut out = Vec::with_capacity(4);
        let mut s = 0.0;
        loop {
            let (ca, cb) = line(cur);
            let mut next: Option<(f64, usize)> = None;
            for i in 0..n {
                let (a, b) = line(i);
                if a <= ca {
                    continue;
                }
                let t = ((cb - b) / (a - ca)).max(s);
                let better = match next {
                    None => true,
                    Some((bt, bi)) => t < bt || (t == bt && a > line(bi).0),
                };
                if better {
                    next = Some((t, i));
                }
            }
            match next {
                Some((t, i)) if t < end => {
                    if t > s {
                        out.push(AffinePiece { start: s, end: t, slope: ca, intercept: cb, atom: cur });
                    }
                    s = t;
                    cur = i;
                }
                _ => {
                    out.push(AffinePiece { start: s, end, slope: ca, intercept: cb, atom: cur });
                    return out;
                }
            }
        }
    }

    /// Back-conjugate `sup_{(s, z, m)} [c - P]` at `q` over a uniform grid of
    /// `n` points per axis spanning `s in [0, cap]`, `z in [0, height]`, `m`
    /// in the temperature range.
    pub fn back_conjugate(&self, model: &Model, q: [f64; 2], n: usize, cap: f64) -> f64 {
        let [lo, hi] = model.theta_range;
        let mut best = f64::NEG_INFINITY;
        for a in 0..n {
            let s = cap * a as f64 / (n - 1) as f64;
            for b in 0..n {
                let z = model.height * b as f64 / (n - 1) as f64;
                for c in 0..n {
                    let m = lo + (hi - lo) * c as f64 / (n - 1) as f64;
                    let v = model.cost(s, z, m, q[0], q[1]) - self.eval(model, s, z, m);
                    best = best.max(v);
                }
            }
        }
        best
    }
}

impl Potential for DualPotential {
    fn value(&self, model: &Model, s: f64, z: f64) -> f64 {
        self.best_scaled(s, model.scaled_height(z)).1
    }

    fn pieces(&self, model: &Model, z: f64, end: f64) -> Option<Vec<AffinePiece>> {
        Some(self.envelope(model.scaled_height(z), end))
    }
}
