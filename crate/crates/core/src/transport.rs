//! Discrete probability measures on the TOA axis and exact 1-D optimal
//! transport.
//!
//! Clusters are compared through measures built from their pulse times of
//! arrival weighted by received energy. [`wasserstein_1d`] evaluates the
//! exact W₁ distance through the CDF sweep; [`solve_ot_lp`] solves the same
//! problem as a transportation LP and is kept as an independent oracle for
//! small instances.

use crate::{Error, Result};

/// Weighted point masses on a line. Positions are sorted ascending and
/// weights are strictly positive and normalized to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    positions: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from (position, weight) pairs. Weights must be
    /// strictly positive; they are normalized to sum 1.
    pub fn new(positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::validation("measure requires at least one atom"));
        }
        if positions.len() != weights.len() {
            return Err(Error::validation("positions and weights must have equal length"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("positions must be finite"));
        }
        if weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::validation("weights must be positive and finite"));
        }
        let mut order: Vec<usize> = (0..positions.len()).collect();
        order.sort_by(|&a, &b| positions[a].partial_cmp(&positions[b]).unwrap().then(a.cmp(&b)));
        let total: f64 = weights.iter().sum();
        let positions: Vec<f64> = order.iter().map(|&i| positions[i]).collect();
        let weights: Vec<f64> = order.iter().map(|&i| weights[i] / total).collect();
        Ok(DiscreteMeasure { positions, weights })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// The measure shifted by `offset`.
    pub fn translate(&self, offset: f64) -> DiscreteMeasure {
        DiscreteMeasure {
            positions: self.positions.iter().map(|p| p + offset).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Builds the measure of a cluster: atoms at the pulse TOAs, weighted by
/// received energy. Levels arrive in dB and are mapped to linear power
/// 10^(g/10) so weights stay positive, then normalized by the total energy.
pub fn cluster_measure(toas: &[f64], levels_db: &[f64]) -> Result<DiscreteMeasure> {
    if toas.is_empty() {
        return Err(Error::validation("cluster measure requires at least one pulse"));
    }
    if toas.len() != levels_db.len() {
        return Err(Error::validation("toas and levels must have equal length"));
    }
    let weights: Vec<f64> = levels_db.iter().map(|g| 10f64.powf(g / 10.0)).collect();
    DiscreteMeasure::new(toas.to_vec(), weights)
}

fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// Compresses a measure onto a uniform histogram over its support.
///
/// The bin width follows the Freedman–Diaconis rule h = 2·IQR/N^(1/3),
/// falling back to the Scott width 3.49·σ/N^(1/3) when the IQR vanishes.
/// Empty bins are dropped; each remaining atom sits at its bin center and
/// carries the summed mass of the bin, renormalized to 1.
pub fn histogram_measure(measure: &DiscreteMeasure) -> DiscreteMeasure {
    let positions = measure.positions();
    let n = positions.len();
    let lo = positions[0];
    let hi = positions[n - 1];
    if n < 2 || lo == hi {
        // Degenerate support collapses to one atom.
        return DiscreteMeasure { positions: vec![lo], weights: vec![1.0] };
    }
    let iqr = interpolated_quantile(positions, 0.75) - interpolated_quantile(positions, 0.25);
    let cbrt_n = (n as f64).cbrt();
    let mut h = 2.0 * iqr / cbrt_n;
    if h <= 0.0 {
        let mean = positions.iter().sum::<f64>() / n as f64;
        let var = positions.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n as f64;
        h = 3.49 * var.sqrt() / cbrt_n;
    }
    let range = hi - lo;
    let bins = ((range / h).ceil() as usize).max(1);
    let width = range / bins as f64;
    let mut mass = vec![0.0; bins];
    for (p, w) in positions.iter().zip(measure.weights()) {
        let idx = (((p - lo) / width) as usize).min(bins - 1);
        mass[idx] += w;
    }
    let mut out_pos = Vec::new();
    let mut out_w = Vec::new();
    for (i, &m) in mass.iter().enumerate() {
        if m > 0.0 {
            out_pos.push(lo + (i as f64 + 0.5) * width);
            out_w.push(m);
        }
    }
    let total: f64 = out_w.iter().sum();
    for w in &mut out_w {
        *w /= total;
    }
    DiscreteMeasure { positions: out_pos, weights: out_w }
}

/// Exact 1-D Wasserstein distance with |x−y| ground cost, computed as
/// ∫ |F_a(t) − F_b(t)| dt over the merged support.
pub fn wasserstein_1d(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let mut events: Vec<(f64, f64, f64)> = Vec::with_capacity(a.len() + b.len());
    for (p, w) in a.positions().iter().zip(a.weights()) {
        events.push((*p, *w, 0.0));
    }
    for (p, w) in b.positions().iter().zip(b.weights()) {
        events.push((*p, 0.0, *w));
    }
    events.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let mut dist = 0.0f64;
    let mut fa = 0.0f64;
    let mut fb = 0.0f64;
    let mut prev = events[0].0;
    for (p, da, db) in events {
        dist += (fa - fb).abs() * (p - prev);
        fa += da;
        fb += db;
        prev = p;
    }
    dist
}

/// An optimal mass assignment between two measures.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    n: usize,
    m: usize,
    flows: Vec<f64>,
    cost: f64,
}

impl TransportPlan {
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn flow(&self, i: usize, j: usize) -> f64 {
        self.flows[i * self.m + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.m).map(|j| self.flow(i, j)).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.m).map(|j| (0..self.n).map(|i| self.flow(i, j)).sum()).collect()
    }
}

const MAX_ORACLE_SUPPORT: usize = 64;
const REDUCED_COST_TOL: f64 = 1e-12;

/// Solves the transportation LP between two measures exactly.
///
/// Uses a north-west-corner start and MODI (u-v) pivoting on the basis
/// tree. Restricted to small supports; this is the verification oracle for
/// [`wasserstein_1d`], not the production distance.
pub fn solve_ot_lp(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<TransportPlan> {
    let n = a.len();
    let m = b.len();
    if n > MAX_ORACLE_SUPPORT || m > MAX_ORACLE_SUPPORT {
        return Err(Error::validation(format!(
            "LP oracle limited to supports of {MAX_ORACLE_SUPPORT}, got {n}x{m}"
        )));
    }
    let cost = |i: usize, j: usize| (a.positions()[i] - b.positions()[j]).abs();

    // Rescale demands so both sides sum to the identical total.
    let total_a: f64 = a.weights().iter().sum();
    let total_b: f64 = b.weights().iter().sum();
    let supply: Vec<f64> = a.weights().to_vec();
    let demand: Vec<f64> = b.weights().iter().map(|w| w * total_a / total_b).collect();

    // North-west corner walk: one basic cell per step along a monotone
    // lattice path, which yields exactly n+m−1 basic cells (some possibly
    // holding zero flow on degenerate ties).
    let mut flows = vec![0.0; n * m];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(n + m - 1);
    let mut in_basis = vec![false; n * m];
    {
        let mut ra = supply.clone();
        let mut rb = demand.clone();
        let (mut i, mut j) = (0, 0);
        loop {
            let q = if i == n - 1 && j == m - 1 {
                ra[i].max(rb[j]).max(0.0)
            } else {
                ra[i].min(rb[j]).max(0.0)
            };
            flows[i * m + j] = q;
            basis.push((i, j));
            in_basis[i * m + j] = true;
            ra[i] -= q;
            rb[j] -= q;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if (ra[i] <= rb[j] && i < n - 1) || j == m - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let mut iterations = 0usize;
    let bland_after = 50 * (n + m) * (n + m);
    let max_iterations = 1000 * (n + m) * (n + m) + 10_000;
    loop {
        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::pipeline("transportation simplex failed to converge"));
        }

        // Duals from the basis tree (u[0] = 0).
        let mut u = vec![f64::NAN; n];
        let mut v = vec![f64::NAN; m];
        u[0] = 0.0;
        let mut changed = true;
        while changed {
            changed = false;
            for &(i, j) in &basis {
                if u[i].is_nan() && !v[j].is_nan() {
                    u[i] = cost(i, j) - v[j];
                    changed = true;
                } else if v[j].is_nan() && !u[i].is_nan() {
                    v[j] = cost(i, j) - u[i];
                    changed = true;
                }
            }
        }

        // Entering cell: most negative reduced cost, or Bland's rule if the
        // pivot count suggests degeneracy stalling.
        let bland = iterations > bland_after;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -REDUCED_COST_TOL;
        'search: for i in 0..n {
            for j in 0..m {
                if in_basis[i * m + j] {
                    continue;
                }
                let rc = cost(i, j) - u[i] - v[j];
                if rc < best {
                    best = rc;
                    entering = Some((i, j));
                    if bland {
                        break 'search;
                    }
                }
            }
        }
        let Some((ei, ej)) = entering else { break };

        // Unique cycle: path through the basis tree from column ej back to
        // row ei, closed by the entering cell.
        let mut row_adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // row -> (col, basis idx)
        let mut col_adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
        for (k, &(i, j)) in basis.iter().enumerate() {
            row_adj[i].push((j, k));
            col_adj[j].push((i, k));
        }
        // DFS over tree nodes: rows are 0..n, columns are n..n+m.
        let mut parent_edge = vec![usize::MAX; n + m];
        let mut parent_node = vec![usize::MAX; n + m];
        let mut visited = vec![false; n + m];
        let start = n + ej;
        let target = ei;
        visited[start] = true;
        let mut stack = vec![start];
        while let Some(node) = stack.pop() {
            if node == target {
                break;
            }
            if node < n {
                for &(j, k) in &row_adj[node] {
                    let next = n + j;
                    if !visited[next] {
                        visited[next] = true;
                        parent_edge[next] = k;
                        parent_node[next] = node;
                        stack.push(next);
                    }
                }
            } else {
                for &(i, k) in &col_adj[node - n] {
                    if !visited[i] {
                        visited[i] = true;
                        parent_edge[i] = k;
                        parent_node[i] = node;
                        stack.push(i);
                    }
                }
            }
        }
        let mut path_cells = Vec::new();
        let mut node = target;
        while node != start {
            path_cells.push(parent_edge[node]);
            node = parent_node[node];
        }

        // The entering cell takes +θ; path cells alternate −θ/+θ walking
        // away from the entering column.
        path_cells.reverse();
        let mut minus_cells: Vec<(usize, usize)> = Vec::new();
        let mut plus_cells: Vec<(usize, usize)> = vec![(ei, ej)];
        for (pos, &k) in path_cells.iter().enumerate() {
            if pos % 2 == 0 {
                minus_cells.push(basis[k]);
            } else {
                plus_cells.push(basis[k]);
            }
        }
        let mut theta = f64::INFINITY;
        let mut leaving = minus_cells[0];
        for &(i, j) in &minus_cells {
            let f = flows[i * m + j];
            if f < theta || (f == theta && (i, j) < leaving) {
                theta = f;
                leaving = (i, j);
            }
        }
        for &(i, j) in &plus_cells {
            flows[i * m + j] += theta;
        }
        for &(i, j) in &minus_cells {
            flows[i * m + j] -= theta;
        }
        flows[leaving.0 * m + leaving.1] = 0.0;
        let leave_idx = basis.iter().position(|&c| c == leaving).unwrap();
        basis[leave_idx] = (ei, ej);
        in_basis[leaving.0 * m + leaving.1] = false;
        in_basis[ei * m + ej] = true;
    }

    let total_cost = (0..n)
        .map(|i| (0..m).map(|j| flows[i * m + j] * cost(i, j)).sum::<f64>())
        .sum();
    Ok(TransportPlan { n, m, flows, cost: total_cost })
}
