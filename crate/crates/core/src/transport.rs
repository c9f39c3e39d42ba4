//! Exact discrete optimal transport by the transportation (network) simplex.
//!
//! The bipartite problem `min <P, C>` s.t. `P 1 = p`, `P^T 1 = q`, `P >= 0` is
//! solved on a spanning tree of basic cells. The start basis routes all mass
//! through an artificial root with prohibitive cost; the tree is kept strongly
//! feasible (zero-flow tree arcs point away from the root), which rules out
//! cycling on the heavily degenerate assignment-type instances that uniform
//! marginals produce. Entering cells are priced by block search.
//!
//! Primal plan and dual potentials are returned together; the duals certify
//! optimality through `u_i + v_j <= C_ij` and equal objectives.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::DEFAULT as TOL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub plan: Array2<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl DualPair {
    pub fn objective(&self, p: &[f64], q: &[f64]) -> f64 {
        dot(&self.u, p) + dot(&self.v, q)
    }

    /// `u + alpha`, `v - alpha`; the dual objective is unchanged for balanced marginals.
    pub fn shifted(&self, alpha: f64) -> DualPair {
        DualPair {
            u: self.u.iter().map(|x| x + alpha).collect(),
            v: self.v.iter().map(|x| x - alpha).collect(),
        }
    }

    /// Largest violation of `u_i + v_j <= C_ij` (zero when feasible).
    pub fn max_violation(&self, cost: &Array2<f64>) -> f64 {
        cost.indexed_iter()
            .map(|((i, j), c)| self.u[i] + self.v[j] - c)
            .fold(0.0, f64::max)
    }
}

impl Coupling {
    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.plan.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// Nonzero cells as `(i, j, mass)`.
    pub fn sparse(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        self.plan
            .indexed_iter()
            .filter(|(_, &m)| m > threshold)
            .map(|((i, j), &m)| (i, j, m))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const NONE: usize = usize::MAX;

struct Simplex {
    rows: usize,
    cols: usize,
    root: usize,
    src: Vec<usize>,
    tgt: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    next_arc: usize,
    block: usize,
    tol: f64,
}

impl Simplex {
    fn new(cost: &Array2<f64>, p: &[f64], q: &[f64]) -> Self {
        let (rows, cols) = cost.dim();
        let nodes = rows + cols + 1;
        let root = rows + cols;
        let original = rows * cols;
        let arcs = original + rows + cols;
        let max_cost = cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let artificial = (max_cost + 1.0) * nodes as f64;

        let mut src = Vec::with_capacity(arcs);
        let mut tgt = Vec::with_capacity(arcs);
        let mut arc_cost = Vec::with_capacity(arcs);
        for i in 0..rows {
            for j in 0..cols {
                src.push(i);
                tgt.push(rows + j);
                arc_cost.push(cost[[i, j]]);
            }
        }
        let mut flow = vec![0.0; arcs];
        let mut in_tree = vec![false; arcs];
        let mut adj = vec![Vec::new(); nodes];
        for (i, &pi) in p.iter().enumerate() {
            let a = src.len();
            src.push(i);
            tgt.push(root);
            arc_cost.push(artificial);
            flow[a] = pi;
            in_tree[a] = true;
            adj[i].push(a);
            adj[root].push(a);
        }
        for (j, &qj) in q.iter().enumerate() {
            let node = rows + j;
            let a = src.len();
            if qj > 0.0 {
                src.push(root);
                tgt.push(node);
            } else {
                src.push(node);
                tgt.push(root);
            }
            arc_cost.push(artificial);
            flow[a] = qj;
            in_tree[a] = true;
            adj[node].push(a);
            adj[root].push(a);
        }
        let block = ((arcs as f64).sqrt().ceil() as usize).max(10);
        let mut s = Simplex {
            rows,
            cols,
            root,
            src,
            tgt,
            cost: arc_cost,
            flow,
            in_tree,
            adj,
            parent: vec![NONE; nodes],
            parent_arc: vec![NONE; nodes],
            depth: vec![0; nodes],
            pi: vec![0.0; nodes],
            next_arc: 0,
            block,
            tol: 1e-12 * (1.0 + max_cost),
        };
        s.rebuild_tree();
        s
    }

    fn reduced_cost(&self, a: usize) -> f64 {
        self.cost[a] + self.pi[self.src[a]] - self.pi[self.tgt[a]]
    }

    /// Recomputes parents, depths and potentials from the root.
    fn rebuild_tree(&mut self) {
        let mut stack = vec![self.root];
        self.parent[self.root] = NONE;
        self.parent_arc[self.root] = NONE;
        self.depth[self.root] = 0;
        self.pi[self.root] = 0.0;
        while let Some(node) = stack.pop() {
            for idx in 0..self.adj[node].len() {
                let a = self.adj[node][idx];
                if a == self.parent_arc[node] {
                    continue;
                }
                let child = if self.src[a] == node { self.tgt[a] } else { self.src[a] };
                self.parent[child] = node;
                self.parent_arc[child] = a;
                self.depth[child] = self.depth[node] + 1;
                // tree arcs have zero reduced cost
                self.pi[child] = if self.src[a] == node {
                    self.pi[node] + self.cost[a]
                } else {
                    self.pi[node] - self.cost[a]
                };
                stack.push(child);
            }
        }
    }

    fn find_entering(&mut self) -> Option<usize> {
        let arcs = self.cost.len();
        let mut best = NONE;
        let mut best_rc = -self.tol;
        let mut scanned_in_block = 0;
        for step in 0..arcs {
            let a = (self.next_arc + step) % arcs;
            if !self.in_tree[a] {
                let rc = self.reduced_cost(a);
                if rc < best_rc {
                    best_rc = rc;
                    best = a;
                }
            }
            scanned_in_block += 1;
            if scanned_in_block == self.block {
                scanned_in_block = 0;
                if best != NONE {
                    self.next_arc = (a + 1) % arcs;
                    return Some(best);
                }
            }
        }
        if best != NONE {
            self.next_arc = (best + 1) % arcs;
            Some(best)
        } else {
            None
        }
    }

    fn pivot(&mut self, entering: usize) {
        let (k, l) = (self.src[entering], self.tgt[entering]);
        // Cycle in orientation of the entering arc, starting at the apex:
        // apex -> ... -> k (down), k -> l, l -> ... -> apex (up).
        let mut up_from_k = Vec::new();
        let mut up_from_l = Vec::new();
        let (mut x, mut y) = (k, l);
        while x != y {
            if self.depth[x] >= self.depth[y] {
                up_from_k.push(x);
                x = self.parent[x];
            } else {
                up_from_l.push(y);
                y = self.parent[y];
            }
        }
        // (arc, forward?) in traversal order
        let mut cycle: Vec<(usize, bool)> = Vec::with_capacity(up_from_k.len() + up_from_l.len() + 1);
        for &node in up_from_k.iter().rev() {
            let a = self.parent_arc[node];
            // traversed parent -> node
            cycle.push((a, self.src[a] == self.parent[node]));
        }
        cycle.push((entering, true));
        for &node in &up_from_l {
            let a = self.parent_arc[node];
            // traversed node -> parent
            cycle.push((a, self.src[a] == node));
        }

        let delta = cycle
            .iter()
            .filter(|(_, fwd)| !fwd)
            .map(|&(a, _)| self.flow[a])
            .fold(f64::INFINITY, f64::min);
        let delta = delta.max(0.0);
        let tie = delta + 1e-15;
        let leaving = cycle
            .iter()
            .rev()
            .find(|&&(a, fwd)| !fwd && self.flow[a] <= tie)
            .map(|&(a, _)| a)
            .expect("uncapacitated bipartite network has no unbounded cycle");

        if delta > 0.0 {
            for &(a, fwd) in &cycle {
                if fwd {
                    self.flow[a] += delta;
                } else {
                    self.flow[a] -= delta;
                    if self.flow[a] < 1e-15 {
                        self.flow[a] = 0.0;
                    }
                }
            }
        }
        self.flow[leaving] = 0.0;

        self.in_tree[leaving] = false;
        for end in [self.src[leaving], self.tgt[leaving]] {
            let list = &mut self.adj[end];
            let pos = list.iter().position(|&a| a == leaving).expect("tree arc is listed");
            list.swap_remove(pos);
        }
        self.in_tree[entering] = true;
        self.adj[k].push(entering);
        self.adj[l].push(entering);
        self.rebuild_tree();
    }

    fn run(&mut self) -> Result<()> {
        let limit = 50 * self.cost.len() + 1000;
        for _ in 0..limit {
            match self.find_entering() {
                Some(a) => self.pivot(a),
                None => return Ok(()),
            }
        }
        Err(Error::PivotLimit(limit))
    }
}

/// Solves the transport problem with cost `cost` and marginals `p` (rows), `q` (columns).
pub fn solve_ot(cost: &Array2<f64>, p: &[f64], q: &[f64]) -> Result<(Coupling, DualPair)> {
    let (rows, cols) = cost.dim();
    if rows != p.len() {
        return Err(Error::DimensionMismatch { left: rows, right: p.len() });
    }
    if cols != q.len() {
        return Err(Error::DimensionMismatch { left: cols, right: q.len() });
    }
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("empty transport problem".into()));
    }
    if let Some(((i, j), _)) = cost.indexed_iter().find(|(_, c)| !c.is_finite()) {
        return Err(Error::NonFiniteCost { i, j });
    }
    if p.iter().chain(q).any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidWeights("marginals must be finite and nonnegative".into()));
    }
    let supply: f64 = p.iter().sum();
    let demand: f64 = q.iter().sum();
    if (supply - demand).abs() > TOL.marginal {
        return Err(Error::MarginalMismatch { supply, demand });
    }
    if supply <= 0.0 {
        return Err(Error::InvalidWeights("marginals carry no mass".into()));
    }
    // rebalance the sub-tolerance mismatch so no mass is left on artificial arcs
    let scale = supply / demand;
    let q_bal: Vec<f64> = q.iter().map(|x| x * scale).collect();

    let mut simplex = Simplex::new(cost, p, &q_bal);
    simplex.run()?;

    let mut plan = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            plan[[i, j]] = simplex.flow[i * cols + j].max(0.0);
        }
    }
    let objective = plan.iter().zip(cost.iter()).map(|(m, c)| m * c).sum();
    let u: Vec<f64> = (0..rows).map(|i| -simplex.pi[i]).collect();
    let v: Vec<f64> = (0..cols).map(|j| simplex.pi[simplex.rows + j]).collect();
    debug_assert_eq!(simplex.cols, cols);
    // center the potentials; any common shift is an equally optimal dual
    let max_u = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_v = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let duals = DualPair { u, v }.shifted(0.5 * (max_v - max_u));
    Ok((Coupling { plan, objective }, duals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_cost_matching() {
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        let (plan, duals) = solve_ot(&c, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(plan.objective, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(plan.plan[[0, 0]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(plan.plan[[1, 1]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(plan.plan[[0, 1]], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(duals.objective(&[0.5, 0.5], &[0.5, 0.5]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_feasible_plan() {
        let c = array![[0.3, 0.8], [0.1, 0.6]];
        let (plan, duals) = solve_ot(&c, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(plan.objective, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(duals.objective(&[1.0, 0.0], &[0.0, 1.0]), 0.8, epsilon = 1e-12);
        assert!(duals.max_violation(&c) <= 1e-12);
    }

    #[test]
    fn errors() {
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        assert!(matches!(solve_ot(&c, &[0.5, 0.5], &[0.6, 0.5]), Err(Error::MarginalMismatch { .. })));
        let nan = array![[0.0, f64::NAN], [1.0, 0.0]];
        assert!(matches!(solve_ot(&nan, &[0.5, 0.5], &[0.5, 0.5]), Err(Error::NonFiniteCost { i: 0, j: 1 })));
        assert!(solve_ot(&c, &[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn rectangular_nonuniform_certificate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let (m, n) = (rng.random_range(1..12), rng.random_range(1..12));
            let c = Array2::from_shape_fn((m, n), |_| rng.random::<f64>());
            let mut p: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
            p.iter_mut().for_each(|x| *x /= sp);
            q.iter_mut().for_each(|x| *x /= sq);
            let (plan, duals) = solve_ot(&c, &p, &q).unwrap();
            for (a, b) in plan.row_sums().iter().zip(&p) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
            for (a, b) in plan.col_sums().iter().zip(&q) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
            assert!(duals.max_violation(&c) <= 1e-9);
            assert_abs_diff_eq!(duals.objective(&p, &q), plan.objective, epsilon = 1e-8);
        }
    }
}
