//! Exact optimal transport between finite point clouds.
//!
//! The transportation problem is solved as a min-cost flow by successive
//! shortest paths with node potentials, so every augmentation runs Dijkstra
//! on non-negative reduced costs. The final potentials are a dual certificate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::measure::PointCloud;

/// Ground cost between two points of the plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroundCost {
    /// `|x - y|^2 / 2`
    HalfSquared,
    /// `|x - y|`
    Euclidean,
}

impl GroundCost {
    #[inline]
    pub fn eval(self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let (dx, dy) = (x[0] - y[0], x[1] - y[1]);
        match self {
            GroundCost::HalfSquared => 0.5 * (dx * dx + dy * dy),
            GroundCost::Euclidean => dx.hypot(dy),
        }
    }
}

/// Optimal coupling with its dual potentials.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    /// Optimal cost.
    pub value: f64,
    /// Non-zero entries `(source, sink, mass)` of the coupling.
    pub coupling: Vec<(usize, usize, f64)>,
    /// Dual potential of every source.
    pub source_dual: Vec<f64>,
    /// Dual potential of every sink.
    pub sink_dual: Vec<f64>,
    /// Dual objective; equals `value` up to rounding.
    pub dual_value: f64,
    /// Largest violation of `u_i + v_j <= c_ij`.
    pub dual_violation: f64,
    pub augmentations: usize,
}

impl TransportPlan {
    /// Dense coupling matrix, row-major `sources x sinks`.
    pub fn dense(&self, sources: usize, sinks: usize) -> Vec<f64> {
        let mut out = vec![0.0; sources * sinks];
        for &(i, j, m) in &self.coupling {
            out[i * sinks + j] += m;
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Solves `min sum c_ij x_ij` over couplings of `supply` and `demand`.
///
/// `supply.len() + demand.len()` must not exceed `cap`. The two totals must
/// agree to `1e-9` relative; the demand is rescaled to the supply total.
pub fn solve_transport(
    supply: &[f64],
    demand: &[f64],
    cost: impl Fn(usize, usize) -> f64,
    cap: usize,
) -> Result<TransportPlan> {
    let (n, m) = (supply.len(), demand.len());
    if n + m > cap {
        return Err(Error::TooLarge { size: n + m, cap });
    }
    if supply.iter().chain(demand).any(|&w| !(w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidMeasure("transport weights must be finite and non-negative".into()));
    }
    let total_a: f64 = supply.iter().sum();
    let total_b: f64 = demand.iter().sum();
    if n == 0 || m == 0 || (total_a - total_b).abs() > 1e-9 * total_a.max(1.0) {
        return Err(Error::Unbalanced { supply: total_a, demand: total_b });
    }

    let c: Vec<f64> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| cost(i, j)).collect();
    let eps = 1e-14 * total_a.max(f64::MIN_POSITIVE);
    let scale = total_a / total_b;
    let mut supply_left = supply.to_vec();
    let mut demand_left: Vec<f64> = demand.iter().map(|&b| b * scale).collect();
    let mut flow = vec![0.0; n * m];
    // users per sink, to scan reverse arcs without touching the whole column
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); m];

    let root = n + m;
    let mut pot = vec![0.0; n + m + 1];
    for j in 0..m {
        pot[n + j] = (0..n).map(|i| c[i * m + j]).fold(f64::INFINITY, f64::min);
    }

    let mut dist = vec![f64::INFINITY; n + m + 1];
    let mut pred = vec![usize::MAX; n + m + 1];
    let mut done = vec![false; n + m + 1];
    let mut touched: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut augmentations = 0usize;
    let mut remaining: f64 = supply_left.iter().sum();

    while remaining > eps * (n as f64) {
        for &v in &touched {
            dist[v] = f64::INFINITY;
            pred[v] = usize::MAX;
            done[v] = false;
        }
        touched.clear();
        heap.clear();

        dist[root] = 0.0;
        touched.push(root);
        heap.push(Entry(0.0, root));
        let mut target = None;
        while let Some(Entry(d, u)) = heap.pop() {
            if done[u] || d > dist[u] {
                continue;
            }
            done[u] = true;
            if u == root {
                for i in 0..n {
                    if supply_left[i] > eps {
                        let nd = d + (pot[root] - pot[i]).max(0.0);
                        if nd < dist[i] {
                            if dist[i].is_infinite() {
                                touched.push(i);
                            }
                            dist[i] = nd;
                            pred[i] = root;
                            heap.push(Entry(nd, i));
                        }
                    }
                }
            } else if u < n {
                let row = &c[u * m..(u + 1) * m];
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let nd = d + (row[j] + pot[u] - pot[v]).max(0.0);
                    if nd < dist[v] {
                        if dist[v].is_infinite() {
                            touched.push(v);
                        }
                        dist[v] = nd;
                        pred[v] = u;
                        heap.push(Entry(nd, v));
                    }
                }
            } else {
                let j = u - n;
                if demand_left[j] > eps {
                    target = Some(u);
                    break;
                }
                for &i in &users[j] {
                    if done[i] || flow[i * m + j] <= eps {
                        continue;
                    }
                    let nd = d + (-c[i * m + j] + pot[u] - pot[i]).max(0.0);
                    if nd < dist[i] {
                        if dist[i].is_infinite() {
                            touched.push(i);
                        }
                        dist[i] = nd;
                        pred[i] = u;
                        heap.push(Entry(nd, i));
                    }
                }
            }
        }
        let t = target.ok_or_else(|| Error::InvalidMeasure("no augmenting path; inconsistent masses".into()))?;
        let reach = dist[t];
        for v in 0..=root {
            pot[v] += if done[v] { dist[v] } else { reach };
        }

        // bottleneck along the path
        let mut delta = demand_left[t - n];
        let mut v = t;
        while pred[v] != root {
            let u = pred[v];
            if u >= n && v < n {
                delta = delta.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        delta = delta.min(supply_left[v]);

        let mut v = t;
        while pred[v] != root {
            let u = pred[v];
            if u < n {
                let k = u * m + (v - n);
                if flow[k] <= eps {
                    users[v - n].push(u);
                }
                flow[k] += delta;
            } else {
                let k = v * m + (u - n);
                flow[k] -= delta;
                if flow[k] <= eps {
                    flow[k] = 0.0;
                }
            }
            v = u;
        }
        supply_left[v] -= delta;
        if supply_left[v] <= eps {
            remaining -= supply_left[v];
            supply_left[v] = 0.0;
        }
        demand_left[t - n] -= delta;
        if demand_left[t - n] <= eps {
            demand_left[t - n] = 0.0;
        }
        remaining -= delta;
        augmentations += 1;
        for list in users.iter_mut() {
            if list.len() > 4 * n.max(16) {
                list.sort_unstable();
                list.dedup();
            }
        }
    }

    let sink_dual: Vec<f64> = (0..m).map(|j| pot[n + j]).collect();
    // c-transform of the sink potentials gives exactly feasible source duals
    let source_dual: Vec<f64> = (0..n)
        .map(|i| (0..m).map(|j| c[i * m + j] - sink_dual[j]).fold(f64::INFINITY, f64::min))
        .collect();
    let mut coupling = Vec::new();
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..m {
            let f = flow[i * m + j];
            if f > 0.0 {
                coupling.push((i, j, f));
                value += f * c[i * m + j];
            }
        }
    }
    let dual_value: f64 = supply.iter().zip(&source_dual).map(|(a, u)| a * u).sum::<f64>()
        + demand.iter().zip(&sink_dual).map(|(b, v)| b * scale * v).sum::<f64>();
    let mut dual_violation = 0.0f64;
    for i in 0..n {
        for j in 0..m {
            dual_violation = dual_violation.max(source_dual[i] + sink_dual[j] - c[i * m + j]);
        }
    }
    Ok(TransportPlan { value, coupling, source_dual, sink_dual, dual_value, dual_violation, augmentations })
}

/// Exact optimal transport between two weighted clouds.
pub fn exact_discrete_ot(a: &PointCloud, b: &PointCloud, cost: GroundCost, cap: usize) -> Result<TransportPlan> {
    solve_transport(&a.weights, &b.weights, |i, j| cost.eval(a.points[i], b.points[j]), cap)
}

/// Wasserstein-1 distance.
pub fn w1_distance(a: &PointCloud, b: &PointCloud, cap: usize) -> Result<f64> {
    Ok(exact_discrete_ot(a, b, GroundCost::Euclidean, cap)?.value)
}

/// Wasserstein-2 distance, `sqrt(2 * value)` under the half-squared cost.
pub fn w2_distance(a: &PointCloud, b: &PointCloud, cap: usize) -> Result<f64> {
    Ok((2.0 * exact_discrete_ot(a, b, GroundCost::HalfSquared, cap)?.value).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(points: Vec<[f64; 2]>, weights: Vec<f64>) -> PointCloud {
        PointCloud { points, weights }
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

    #[test]
    fn single_atoms() {
        let a = cloud(vec![[0.0, 0.0]], vec![1.0]);
        let b = cloud(vec![[1.0, 1.0]], vec![1.0]);
        let plan = exact_discrete_ot(&a, &b, GroundCost::HalfSquared, 16).unwrap();
        assert_eq!(plan.value, 1.0);
    }

    #[test]
    fn two_by_two_example() {
        let a = cloud(vec![[0.0, 0.0], [1.0, 0.0]], vec![0.5, 0.5]);
        let b = cloud(vec![[0.0, 1.0], [1.0, 1.0]], vec![0.5, 0.5]);
        let plan = exact_discrete_ot(&a, &b, GroundCost::HalfSquared, 16).unwrap();
        assert!((plan.value - 0.5).abs() < 1e-15);
        assert_eq!(plan.coupling.len(), 2);
    }

    #[test]
    fn size_cap() {
        let a = cloud(vec![[0.0, 0.0]; 3], vec![1.0 / 3.0; 3]);
        let b = cloud(vec![[0.0, 0.0]; 2], vec![0.5; 2]);
        assert!(matches!(exact_discrete_ot(&a, &b, GroundCost::HalfSquared, 4), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn unbalanced_rejected() {
        let a = cloud(vec![[0.0, 0.0]], vec![1.0]);
        let b = cloud(vec![[0.0, 0.0]], vec![0.5]);
        assert!(matches!(exact_discrete_ot(&a, &b, GroundCost::HalfSquared, 4), Err(Error::Unbalanced { .. })));
    }

    #[test]
    fn matches_permutation_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=6 {
            for _ in 0..5 {
                let pa: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
                let pb: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
                let w = vec![1.0 / n as f64; n];
                for cost in [GroundCost::HalfSquared, GroundCost::Euclidean] {
                    let best = permutations(n)
                        .iter()
                        .map(|p| p.iter().enumerate().map(|(i, &j)| cost.eval(pa[i], pb[j])).sum::<f64>() / n as f64)
                        .fold(f64::INFINITY, f64::min);
                    let plan = exact_discrete_ot(&cloud(pa.clone(), w.clone()), &cloud(pb.clone(), w.clone()), cost, 64)
                        .unwrap();
                    assert!((plan.value - best).abs() < 1e-12, "n={n}: {} vs {best}", plan.value);
                }
            }
        }
    }

    #[test]
    fn certificate_on_unequal_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, m) in &[(30, 8), (200, 8), (50, 50)] {
            let wa: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let wb: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
            let (sa, sb): (f64, f64) = (wa.iter().sum(), wb.iter().sum());
            let a = cloud((0..n).map(|_| [rng.gen(), rng.gen()]).collect(), wa.iter().map(|w| w / sa).collect());
            let b = cloud((0..m).map(|_| [rng.gen(), 2.0 * rng.gen::<f64>()]).collect(), wb.iter().map(|w| w / sb).collect());
            let plan = exact_discrete_ot(&a, &b, GroundCost::HalfSquared, 4096).unwrap();
            assert!(plan.dual_violation <= 1e-9, "violation {}", plan.dual_violation);
            assert!((plan.value - plan.dual_value).abs() <= 1e-9, "gap {}", plan.value - plan.dual_value);
            let dense = plan.dense(n, m);
            for i in 0..n {
                let row: f64 = dense[i * m..(i + 1) * m].iter().sum();
                assert!((row - a.weights[i]).abs() < 1e-12);
            }
            for j in 0..m {
                let col: f64 = (0..n).map(|i| dense[i * m + j]).sum();
                assert!((col - b.weights[j]).abs() < 1e-12);
            }
            for &(i, j, _) in &plan.coupling {
                let slack = GroundCost::HalfSquared.eval(a.points[i], b.points[j]) - plan.source_dual[i] - plan.sink_dual[j];
                assert!(slack.abs() < 1e-9);
            }
        }
    }
}
