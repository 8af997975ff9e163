//! Primal network simplex for the dense bipartite transportation problem.
//!
//! The spanning-tree bookkeeping (parent/thread/successor lists and the
//! block-search pivot rule) follows LEMON's `NetworkSimplex`. Arcs are not
//! stored: arc `e < m·n` runs from source `e / n` to sink `e % n` and its cost
//! is read from the cost matrix. Without capacities a non-tree arc always
//! carries zero flow, so flow is kept only for the tree arc above each node.
//!
//! Node ids: sources `0..m`, sinks `m..m+n`, artificial root `m+n`.
//! Artificial arc `m·n + u` joins node `u` to the root.

use crate::error::{EmdError, Result};
use crate::tolerance::Tolerances;

use super::{CostMatrix, Flow};

const NONE: usize = usize::MAX;

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;

/// Pivot arc is oriented from the node towards its parent.
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// Reduced costs above `-EPS·scale` count as nonnegative.
const EPS: f64 = 1e-12;

struct Simplex<'a> {
    costs: &'a [f64],
    n_src: usize,
    n_snk: usize,
    node_num: usize,
    arc_num: usize,
    art_cost: f64,
    /// Whether artificial arc `u` points from `u` to the root.
    art_up: Vec<bool>,

    state: Vec<i8>,
    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    /// Flow on `pred[u]`.
    pred_flow: Vec<f64>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,
    root: usize,

    block_size: usize,
    next_arc: usize,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

impl<'a> Simplex<'a> {
    fn new(supply: &[f64], demand: &[f64], costs: &'a CostMatrix) -> Self {
        let n_src = supply.len();
        let n_snk = demand.len();
        let node_num = n_src + n_snk;
        let arc_num = n_src * n_snk;
        let max_cost = costs.max();
        let art_cost = if max_cost > 0.0 {
            max_cost * (node_num as f64 + 1.0)
        } else {
            1.0
        };
        let block_size = ((arc_num as f64).sqrt() as usize).max(10);
        let all_nodes = node_num + 1;
        let root = node_num;

        let mut s = Simplex {
            costs: costs.as_slice(),
            n_src,
            n_snk,
            node_num,
            arc_num,
            art_cost,
            art_up: vec![true; node_num],
            state: vec![STATE_LOWER; arc_num + node_num],
            pi: vec![0.0; all_nodes],
            parent: vec![NONE; all_nodes],
            pred: vec![NONE; all_nodes],
            pred_dir: vec![DIR_UP; all_nodes],
            pred_flow: vec![0.0; all_nodes],
            thread: vec![0; all_nodes],
            rev_thread: vec![0; all_nodes],
            succ_num: vec![1; all_nodes],
            last_succ: vec![0; all_nodes],
            dirty_revs: Vec::new(),
            root,
            block_size,
            next_arc: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };

        // Initial basis: every node hangs off the root by its artificial arc.
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        for u in 0..node_num {
            let b = if u < n_src { supply[u] } else { -demand[u - n_src] };
            let e = arc_num + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            if b >= 0.0 {
                s.art_up[u] = true;
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0.0;
                s.pred_flow[u] = b;
            } else {
                s.art_up[u] = false;
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art_cost;
                s.pred_flow[u] = -b;
            }
        }
        s
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.n_snk
        } else if self.art_up[e - self.arc_num] {
            e - self.arc_num
        } else {
            self.root
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.n_src + e % self.n_snk
        } else if self.art_up[e - self.arc_num] {
            self.root
        } else {
            e - self.arc_num
        }
    }

    #[inline]
    fn cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            self.costs[e]
        } else if self.art_up[e - self.arc_num] {
            0.0
        } else {
            self.art_cost
        }
    }

    fn significant(&self, reduced: f64, e: usize) -> bool {
        let i = e / self.n_snk;
        let j = self.n_src + e % self.n_snk;
        let scale = self.costs[e].abs().max(self.pi[i].abs()).max(self.pi[j].abs());
        reduced < -EPS * scale
    }

    /// Block search over real arcs, resuming where the last search stopped.
    fn find_entering_arc(&mut self) -> bool {
        let m = self.arc_num;
        let (n_src, n_snk) = (self.n_src, self.n_snk);
        let mut min = 0.0;
        let mut min_arc = NONE;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        let mut i = e / n_snk;
        let mut j = e % n_snk;
        for _ in 0..m {
            if self.state[e] == STATE_LOWER {
                let c = self.costs[e] + self.pi[i] - self.pi[n_src + j];
                if c < min {
                    min = c;
                    min_arc = e;
                }
            }
            e += 1;
            j += 1;
            if j == n_snk {
                j = 0;
                i += 1;
                if i == n_src {
                    i = 0;
                    e = 0;
                }
            }
            cnt -= 1;
            if cnt == 0 {
                if min_arc != NONE && self.significant(min, min_arc) {
                    self.in_arc = min_arc;
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if min_arc != NONE && self.significant(min, min_arc) {
            self.in_arc = min_arc;
            self.next_arc = e;
            return true;
        }
        false
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Returns false when the cycle has no blocking arc (unbounded).
    fn find_leaving_arc(&mut self) -> bool {
        // Entering arcs are always at their lower bound.
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        self.delta = f64::INFINITY;
        let mut result = 0;

        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP {
                let d = self.pred_flow[u];
                if d < self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.pred_flow[u];
                // `<=` keeps the tree strongly feasible.
                if d <= self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0.0 {
            let mut u = self.source(self.in_arc);
            while u != self.join {
                self.pred_flow[u] -= f64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                self.pred_flow[u] += f64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        self.state[self.pred[self.u_out]] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let (u_in, v_in, u_out, join, in_arc) = (self.u_in, self.v_in, self.u_out, self.join, self.in_arc);
        let in_dir = if u_in == self.source(in_arc) { DIR_UP } else { DIR_DOWN };
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.pred_flow[u_in] = self.delta;

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            // When old_rev_thread == v_in, join and v_out coincide.
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // Re-hang the stem (u_in .. u_out) below v_in, reversing parents.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // Shift pred arcs (and their flows) one step along the stem.
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            let mut p = self.parent[u];
            while u != u_in {
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                self.pred_flow[u] = self.pred_flow[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
                p = self.parent[u];
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.pred_flow[u_in] = self.delta;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let sigma = self.pi[self.v_in] - self.pi[self.u_in] - f64::from(self.pred_dir[self.u_in]) * self.cost(self.in_arc);
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Rebuilds every potential from the tree in thread (preorder) order,
    /// discarding drift accumulated by incremental updates.
    fn recompute_potentials(&mut self) {
        self.pi[self.root] = 0.0;
        let mut u = self.thread[self.root];
        while u != self.root {
            let p = self.parent[u];
            let c = self.cost(self.pred[u]);
            self.pi[u] = if self.pred_dir[u] == DIR_UP { self.pi[p] - c } else { self.pi[p] + c };
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> Result<()> {
        if self.arc_num == 0 {
            return Ok(());
        }
        loop {
            while self.find_entering_arc() {
                self.find_join_node();
                if !self.find_leaving_arc() {
                    return Err(EmdError::Solver("unbounded cycle in transportation problem".into()));
                }
                self.change_flow();
                self.update_tree_structure();
                self.update_potential();
            }
            self.recompute_potentials();
            if !self.find_entering_arc() {
                return Ok(());
            }
            // A pivot survived the clean potentials; resume from it.
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(EmdError::Solver("unbounded cycle in transportation problem".into()));
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
        }
    }

    fn flows(&self) -> (Vec<Flow>, f64) {
        let mut flows = Vec::new();
        let mut artificial = 0.0f64;
        for u in 0..self.node_num {
            let e = self.pred[u];
            let f = self.pred_flow[u];
            if e >= self.arc_num {
                artificial = artificial.max(f.abs());
            } else if f > 0.0 {
                flows.push(Flow {
                    source: e / self.n_snk,
                    sink: e % self.n_snk,
                    mass: f,
                });
            }
        }
        flows.sort_by_key(|f| (f.source, f.sink));
        (flows, artificial)
    }
}

/// Optimal flows between `supply` and `demand` under `costs`.
pub(crate) fn solve(supply: &[f64], demand: &[f64], costs: &CostMatrix, tol: &Tolerances) -> Result<Vec<Flow>> {
    if supply.is_empty() || demand.is_empty() {
        return Err(EmdError::EmptySet);
    }
    debug_assert_eq!((costs.rows(), costs.cols()), (supply.len(), demand.len()));
    let mut s = Simplex::new(supply, demand, costs);
    s.run()?;
    let (flows, residual) = s.flows();
    let total = supply.iter().sum::<f64>().max(demand.iter().sum::<f64>());
    if residual > tol.marginal * total.max(f64::MIN_POSITIVE) {
        return Err(EmdError::Solver(format!(
            "{residual} units left on artificial arcs"
        )));
    }
    Ok(flows)
}
