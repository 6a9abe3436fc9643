//! Exact word mover's similarity via the transportation simplex.
//!
//! Marginals are scaled to integers (each row supplies `L2` units, each column
//! demands `L1` units) so flows stay exact and degenerate pivots are detected
//! without tolerance. Only reduced costs are floating point.

use std::collections::VecDeque;

use ndarray::Array2;

use super::{SimilarityMatrix, TransportPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    /// `sum(pi * S)` at the optimum.
    pub value: f64,
    pub plan: TransportPlan,
}

/// Maximizes `sum(pi * S)` over plans with row sums `1/L1` and column sums `1/L2`.
pub fn exact_wmd(s: &SimilarityMatrix) -> ExactSolution {
    let (m, n) = (s.rows(), s.cols());
    let flows = if m == 1 || n == 1 {
        // Unique feasible plan: one integer unit on every cell.
        vec![1; m * n]
    } else {
        Simplex::new(s).solve()
    };

    let total = (m * n) as f64;
    let mass = Array2::from_shape_fn((m, n), |(i, j)| flows[i * n + j] as f64 / total);
    let value = flows
        .iter()
        .zip(s.values().iter())
        .filter(|(&f, _)| f != 0)
        .map(|(&f, &v)| f as f64 * v)
        .sum::<f64>()
        / total;
    ExactSolution {
        value,
        plan: TransportPlan { mass },
    }
}

struct Simplex {
    m: usize,
    n: usize,
    cost: Vec<f64>,
    flow: Vec<i64>,
    basic: Vec<bool>,
    basis: Vec<usize>,
    eps: f64,
}

impl Simplex {
    fn new(s: &SimilarityMatrix) -> Self {
        let (m, n) = (s.rows(), s.cols());
        let cost: Vec<f64> = s.values().iter().map(|v| -v).collect();
        let scale = cost.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
        let mut simplex = Self {
            m,
            n,
            cost,
            flow: vec![0; m * n],
            basic: vec![false; m * n],
            basis: Vec::with_capacity(m + n - 1),
            eps: 1e-12 * scale,
        };
        simplex.northwest_corner();
        simplex
    }

    fn northwest_corner(&mut self) {
        let mut supply = vec![self.n as i64; self.m];
        let mut demand = vec![self.m as i64; self.n];
        let (mut i, mut j) = (0, 0);
        loop {
            let cell = i * self.n + j;
            let x = supply[i].min(demand[j]);
            self.flow[cell] = x;
            self.basic[cell] = true;
            self.basis.push(cell);
            supply[i] -= x;
            demand[j] -= x;
            if i == self.m - 1 && j == self.n - 1 {
                break;
            }
            // When both are exhausted move down only, leaving a degenerate zero
            // basic cell so the basis stays a spanning tree of m + n - 1 cells.
            if supply[i] == 0 && i < self.m - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(self.basis.len(), self.m + self.n - 1);
    }

    /// Dual potentials with `u[i] + v[j] = cost[i][j]` on basic cells, `u[0] = 0`.
    fn potentials(&self) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let mut row_adj = vec![Vec::new(); m];
        let mut col_adj = vec![Vec::new(); n];
        for &cell in &self.basis {
            row_adj[cell / n].push(cell % n);
            col_adj[cell % n].push(cell / n);
        }
        let mut u = vec![f64::NAN; m];
        let mut v = vec![f64::NAN; n];
        u[0] = 0.0;
        // Nodes: rows are 0..m, columns m..m+n.
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            if node < m {
                for &j in &row_adj[node] {
                    if v[j].is_nan() {
                        v[j] = self.cost[node * n + j] - u[node];
                        queue.push_back(m + j);
                    }
                }
            } else {
                let j = node - m;
                for &i in &col_adj[j] {
                    if u[i].is_nan() {
                        u[i] = self.cost[i * n + j] - v[j];
                        queue.push_back(i);
                    }
                }
            }
        }
        (u, v)
    }

    /// Basic cells on the tree path from column `col` back to row `row`.
    fn tree_path(&self, row: usize, col: usize) -> Vec<usize> {
        let (m, n) = (self.m, self.n);
        let mut row_adj = vec![Vec::new(); m];
        let mut col_adj = vec![Vec::new(); n];
        for &cell in &self.basis {
            row_adj[cell / n].push(cell);
            col_adj[cell % n].push(cell);
        }
        // parent[node] = (previous node, connecting cell)
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; m + n];
        let mut seen = vec![false; m + n];
        seen[row] = true;
        let mut queue = VecDeque::from([row]);
        let target = m + col;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            let cells = if node < m { &row_adj[node] } else { &col_adj[node - m] };
            for &cell in cells {
                let next = if node < m { m + cell % n } else { cell / n };
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, cell));
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != row {
            let (prev, cell) = parent[node].expect("basis is a spanning tree");
            path.push(cell);
            node = prev;
        }
        path
    }

    fn solve(mut self) -> Vec<i64> {
        let max_pivots = 50 * (self.m * self.n).pow(2) + 1000;
        for _ in 0..max_pivots {
            let (u, v) = self.potentials();
            // Bland's rule: lowest-index cell with negative reduced cost enters.
            let entering = (0..self.m * self.n).find(|&cell| {
                !self.basic[cell]
                    && self.cost[cell] - u[cell / self.n] - v[cell % self.n] < -self.eps
            });
            let Some(enter) = entering else {
                return self.flow;
            };
            let path = self.tree_path(enter / self.n, enter % self.n);
            // Path cells alternate -, +, -, ... starting next to the entering column.
            let theta = path.iter().step_by(2).map(|&c| self.flow[c]).min().unwrap();
            let leave = path
                .iter()
                .step_by(2)
                .copied()
                .filter(|&c| self.flow[c] == theta)
                .min()
                .unwrap();
            for (k, &cell) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[cell] -= theta;
                } else {
                    self.flow[cell] += theta;
                }
            }
            self.flow[enter] += theta;
            self.basic[leave] = false;
            self.basic[enter] = true;
            let slot = self.basis.iter().position(|&c| c == leave).unwrap();
            self.basis[slot] = enter;
        }
        debug_assert!(false, "transportation simplex exceeded its pivot budget");
        self.flow
    }
}
