//! Exact optimal-transport solvers at desk scale, kept independent of the
//! closed-form path so they can act as oracles for it.
//!
//! * [`solve_transport`] — successive shortest augmenting paths with dual
//!   potentials (Dijkstra on the bipartite residual graph); exact for the
//!   transportation LP.
//! * [`solve_assignment`] — shortest-augmenting-path assignment with
//!   potentials for the equal-weights case.
//! * [`exact_w1_tree`] — W₁ with the tree ground metric, via the LP.
//! * [`exact_w2_sphere`] — W₂ with squared geodesic ground cost.
//! * [`finite_diff_gradient`] — central differences, the gradient oracle.

use crate::error::{Error, Result};
use crate::sphere::{geodesic_distance, DiscreteMeasure};
use crate::split::alpha;
use crate::tree::{project_coords, tree_metric, SphericalTree, TreePoint};

/// Desk-scale guard: atoms per measure in the tree-metric LP.
const W1_ATOM_LIMIT: usize = 64;
/// Desk-scale guard: points per side in the assignment path.
const W2_ASSIGNMENT_LIMIT: usize = 4096;
/// Desk-scale guard: cost-matrix entries in the general LP path.
const W2_LP_LIMIT: usize = 1_000_000;

/// Dense nonnegative ground-cost matrix.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl CostMatrix {
    pub fn new(values: Vec<f64>, n_rows: usize, n_cols: usize) -> Result<Self> {
        if values.len() != n_rows * n_cols || n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "cost matrix needs {n_rows}×{n_cols} entries"
            )));
        }
        if values.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidParameter(
                "cost entries must be finite and ≥ 0".into(),
            ));
        }
        Ok(Self {
            values,
            n_rows,
            n_cols,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }
}

/// Exact transportation LP `min Σ f_ij c_ij` subject to row sums `supply`
/// and column sums `demand` (both nonnegative, equal totals).
///
/// Successive shortest augmenting paths with node potentials: reduced
/// costs stay nonnegative, every augmenting path is shortest under them,
/// and on termination complementary slackness holds, which certifies
/// optimality of the primal flow.
pub fn solve_transport(cost: &CostMatrix, supply: &[f64], demand: &[f64]) -> Result<f64> {
    let n = cost.n_rows();
    let m = cost.n_cols();
    if supply.len() != n || demand.len() != m {
        return Err(Error::InvalidParameter(
            "supply/demand lengths must match the cost matrix".into(),
        ));
    }
    if supply.iter().chain(demand).any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidWeights("masses must be finite and ≥ 0".into()));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if (total_s - total_d).abs() > 1e-9 * total_s.max(total_d).max(1.0) {
        return Err(Error::InvalidWeights(format!(
            "unbalanced problem: supply {total_s} vs demand {total_d}"
        )));
    }

    let mut rem_s = supply.to_vec();
    let mut rem_d = demand.to_vec();
    let mut flow = vec![0.0f64; n * m];
    // Potentials: phi[0..n] on sources, phi[n..n+m] on sinks.
    let mut phi = vec![0.0f64; n + m];
    // Augmentations zero a supply, a demand, or a flow arc exactly (the
    // bottleneck is subtracted from itself), so any residual below this is
    // imbalance dust from the 1e-9 tolerance above.
    let dust = 1e-12 * total_s.max(1.0);

    let mut dist = vec![f64::INFINITY; n + m];
    let mut done = vec![false; n + m];
    // prev[x]: the node we reached x from.
    let mut prev = vec![usize::MAX; n + m];

    let max_phases = 20 * (n + m) + 200;
    for _phase in 0..max_phases {
        if rem_s.iter().sum::<f64>() <= dust {
            let value = flow
                .iter()
                .zip(&cost.values)
                .map(|(f, c)| f * c)
                .sum::<f64>();
            return Ok(value);
        }

        // Multi-source Dijkstra on reduced costs.
        dist.fill(f64::INFINITY);
        done.fill(false);
        prev.fill(usize::MAX);
        for i in 0..n {
            if rem_s[i] > 0.0 {
                dist[i] = 0.0;
            }
        }
        let mut best_sink = usize::MAX;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for x in 0..n + m {
                if !done[x] && dist[x] < best {
                    best = dist[x];
                    u = x;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n && rem_d[u - n] > 0.0 {
                best_sink = u;
                break;
            }
            if u < n {
                // Forward arcs i → j.
                let i = u;
                for j in 0..m {
                    let rc = cost.get(i, j) + phi[i] - phi[n + j];
                    let nd = dist[i] + rc.max(0.0);
                    if nd < dist[n + j] {
                        dist[n + j] = nd;
                        prev[n + j] = i;
                    }
                }
            } else {
                // Backward arcs j → i exist where flow is positive.
                let j = u - n;
                for i in 0..n {
                    if flow[i * m + j] > 0.0 {
                        let rc = -(cost.get(i, j) + phi[i] - phi[n + j]);
                        let nd = dist[n + j] + rc.max(0.0);
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = n + j;
                        }
                    }
                }
            }
        }
        if best_sink == usize::MAX {
            return Err(Error::InvalidWeights(
                "no augmenting path: residual demand unreachable".into(),
            ));
        }

        // Bottleneck along the path.
        let sink = best_sink - n;
        let mut amount = rem_d[sink];
        let mut x = best_sink;
        while prev[x] != usize::MAX {
            let p = prev[x];
            if x >= n {
                // arc p → x is forward: unbounded capacity
            } else {
                // arc p → x is backward over (x, p - n): limited by flow
                amount = amount.min(flow[x * m + (p - n)]);
            }
            x = p;
        }
        amount = amount.min(rem_s[x]);

        // Apply the augmentation.
        rem_s[x] -= amount;
        rem_d[sink] -= amount;
        let mut y = best_sink;
        while prev[y] != usize::MAX {
            let p = prev[y];
            if y >= n {
                flow[p * m + (y - n)] += amount;
            } else {
                flow[y * m + (p - n)] -= amount;
            }
            y = p;
        }

        // Potential update keeps reduced costs nonnegative.
        let d_cap = dist[best_sink];
        for xx in 0..n + m {
            if dist[xx] < f64::INFINITY {
                phi[xx] += dist[xx].min(d_cap);
            } else {
                phi[xx] += d_cap;
            }
        }
    }
    Err(Error::InvalidParameter(
        "transport solver exceeded its phase budget".into(),
    ))
}

/// Exact square assignment: `min Σ_i c(i, σ(i))` over permutations, by
/// shortest augmenting paths with dual potentials. Returns the optimal
/// total cost.
pub fn solve_assignment(cost: &CostMatrix) -> Result<f64> {
    let n = cost.n_rows();
    if cost.n_cols() != n {
        return Err(Error::InvalidParameter(
            "assignment needs a square cost matrix".into(),
        ));
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // column j is matched to row p[j]
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=n {
        total += cost.get(p[j] - 1, j - 1);
    }
    Ok(total)
}

/// Expands both measures to atom lists on the tree (mass `alpha_i·u_j` at
/// arc `c_j` on ray `i`), builds the tree-metric cost matrix, and solves
/// the transport LP exactly.
///
/// Guarded to `n·k ≤ 64` atoms per measure; this is a validation oracle,
/// not a production path.
pub fn exact_w1_tree(
    tree: &SphericalTree,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    zeta: f64,
) -> Result<f64> {
    let k = tree.num_rays();
    for m in [mu, nu] {
        let atoms = m.n() * k;
        if atoms > W1_ATOM_LIMIT {
            return Err(Error::SizeGuard {
                what: "tree-metric LP atoms",
                limit: W1_ATOM_LIMIT,
                got: atoms,
            });
        }
    }

    let atoms_of = |m: &DiscreteMeasure| -> Result<(Vec<TreePoint>, Vec<f64>)> {
        let coords = project_coords(tree, m)?;
        let split = alpha(tree, m, zeta)?;
        let mut pts = Vec::with_capacity(m.n() * k);
        let mut mass = Vec::with_capacity(m.n() * k);
        for j in 0..m.n() {
            for i in 0..k {
                pts.push(TreePoint {
                    ray: i,
                    coord: coords[j],
                });
                mass.push(split.row(j)[i] * m.weights()[j]);
            }
        }
        Ok((pts, mass))
    };

    let (mu_pts, mu_mass) = atoms_of(mu)?;
    let (nu_pts, nu_mass) = atoms_of(nu)?;
    let mut costs = Vec::with_capacity(mu_pts.len() * nu_pts.len());
    for a in &mu_pts {
        for b in &nu_pts {
            costs.push(tree_metric(a, b)?);
        }
    }
    let cost = CostMatrix::new(costs, mu_pts.len(), nu_pts.len())?;
    solve_transport(&cost, &mu_mass, &nu_mass)
}

/// Exact 2-Wasserstein with squared geodesic ground cost. Equal-size
/// uniform measures go through the assignment solver; anything else takes
/// the general LP. Returns `√optimum`.
pub fn exact_w2_sphere(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.ambient_dim() != nu.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.ambient_dim(),
            got: nu.ambient_dim(),
        });
    }
    let n = mu.n();
    let m = nu.n();
    let uniform = |w: &[f64]| {
        let expect = 1.0 / w.len() as f64;
        w.iter().all(|x| (x - expect).abs() <= 1e-12)
    };

    if n == m && uniform(mu.weights()) && uniform(nu.weights()) {
        if n > W2_ASSIGNMENT_LIMIT {
            return Err(Error::SizeGuard {
                what: "assignment size",
                limit: W2_ASSIGNMENT_LIMIT,
                got: n,
            });
        }
        let mut costs = Vec::with_capacity(n * n);
        for a in mu.supports() {
            for b in nu.supports() {
                let d = geodesic_distance(a, b)?;
                costs.push(d * d);
            }
        }
        let cost = CostMatrix::new(costs, n, n)?;
        let total = solve_assignment(&cost)?;
        return Ok((total / n as f64).max(0.0).sqrt());
    }

    if n * m > W2_LP_LIMIT {
        return Err(Error::SizeGuard {
            what: "LP cost entries",
            limit: W2_LP_LIMIT,
            got: n * m,
        });
    }
    let mut costs = Vec::with_capacity(n * m);
    for a in mu.supports() {
        for b in nu.supports() {
            let d = geodesic_distance(a, b)?;
            costs.push(d * d);
        }
    }
    let cost = CostMatrix::new(costs, n, m)?;
    let opt = solve_transport(&cost, mu.weights(), nu.weights())?;
    Ok(opt.max(0.0).sqrt())
}

/// Central finite differences of `f` with respect to a flat coordinate
/// vector: entry `i` is `(f(x + h·e_i) − f(x − h·e_i)) / 2h`.
///
/// The default step for double precision and O(1) curvature is `h = 1e-5`.
pub fn finite_diff_gradient<F>(f: F, coords: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut work = coords.to_vec();
    let mut grad = Vec::with_capacity(coords.len());
    for i in 0..coords.len() {
        let orig = work[i];
        work[i] = orig + h;
        let hi = f(&work);
        work[i] = orig - h;
        let lo = f(&work);
        work[i] = orig;
        grad.push((hi - lo) / (2.0 * h));
    }
    grad
}
