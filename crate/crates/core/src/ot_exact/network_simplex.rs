//! Primal network simplex for the balanced transportation problem.
//!
//! Follows the spanning-tree bookkeeping of LEMON's `NetworkSimplex`
//! (thread / reverse-thread lists, successor counts, block-search pricing)
//! specialised to the complete bipartite graph `supply -> demand` with
//! uncapacitated arcs. Real arcs are implicit: arc `e = i * n + j` joins
//! supply node `i` to demand node `m + j` with cost `D[i, j]`. Each node also
//! owns one artificial arc to the extra root node, which seeds the initial
//! feasible basis.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Relative tolerance on reduced costs when choosing an entering arc.
pub const PIVOT_TOL: f64 = 1e-12;

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;

const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

const NONE: usize = usize::MAX;

pub(crate) struct TransportSimplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    node_num: usize,
    arc_num: usize,

    art_source: Vec<usize>,
    art_target: Vec<usize>,
    art_cost: Vec<f64>,

    flow: Vec<f64>,
    state: Vec<i8>,
    pi: Vec<f64>,

    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pred_dir: Vec<i8>,
    dirty_revs: Vec<usize>,

    block_size: usize,
    next_arc: usize,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

pub(crate) struct SimplexSolution {
    /// Positive flows on real arcs as `(i, j, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
    pub iterations: usize,
}

impl<'a> TransportSimplex<'a> {
    /// `cost` is the row-major `m x n` cost matrix.
    pub fn new(a: &[f64], b: &[f64], cost: &'a [f64]) -> Self {
        let (m, n) = (a.len(), b.len());
        debug_assert_eq!(cost.len(), m * n);
        let node_num = m + n;
        let arc_num = m * n;
        let root = node_num;

        let max_cost = cost.iter().copied().fold(0.0, f64::max);
        let art = (max_cost + 1.0) * node_num as f64;

        let mut supply = Vec::with_capacity(node_num + 1);
        supply.extend_from_slice(a);
        supply.extend(b.iter().map(|x| -x));

        let all = node_num + 1;
        let mut s = Self {
            m,
            n,
            cost,
            node_num,
            arc_num,
            art_source: vec![0; node_num],
            art_target: vec![0; node_num],
            art_cost: vec![0.0; node_num],
            flow: vec![0.0; arc_num + node_num],
            state: vec![STATE_LOWER; arc_num + node_num],
            pi: vec![0.0; all],
            parent: vec![NONE; all],
            pred: vec![NONE; all],
            thread: vec![0; all],
            rev_thread: vec![0; all],
            succ_num: vec![0; all],
            last_succ: vec![0; all],
            pred_dir: vec![DIR_UP; all],
            dirty_revs: Vec::new(),
            block_size: ((arc_num as f64).sqrt().ceil() as usize).max(10),
            next_arc: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };

        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        s.pi[root] = 0.0;

        #[allow(clippy::needless_range_loop)]
        for u in 0..node_num {
            let e = arc_num + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            if supply[u] >= 0.0 {
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0.0;
                s.art_source[u] = u;
                s.art_target[u] = root;
                s.flow[e] = supply[u];
                s.art_cost[u] = 0.0;
            } else {
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art;
                s.art_source[u] = root;
                s.art_target[u] = u;
                s.flow[e] = -supply[u];
                s.art_cost[u] = art;
            }
        }
        s
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.n
        } else {
            self.art_source[e - self.arc_num]
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.m + e % self.n
        } else {
            self.art_target[e - self.arc_num]
        }
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            self.cost[e]
        } else {
            self.art_cost[e - self.arc_num]
        }
    }

    /// Block search pricing over the real arcs.
    fn find_entering_arc(&mut self) -> bool {
        let n = self.n;
        let m = self.m;
        let mut min = 0.0;
        let mut cnt = self.block_size;
        let mut best = NONE;
        let start = self.next_arc;
        let mut e = start;
        let (mut i, mut j) = (e / n, e % n);
        for _ in 0..self.arc_num {
            if self.state[e] == STATE_LOWER {
                let c = self.cost[e] + self.pi[i] - self.pi[m + j];
                if c < min {
                    min = c;
                    best = e;
                }
            }
            e += 1;
            j += 1;
            if j == n {
                j = 0;
                i += 1;
                if e == self.arc_num {
                    e = 0;
                    i = 0;
                }
            }
            cnt -= 1;
            if cnt == 0 {
                if best != NONE && self.is_improving(best, min) {
                    self.in_arc = best;
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if best != NONE && self.is_improving(best, min) {
            self.in_arc = best;
            self.next_arc = e;
            return true;
        }
        false
    }

    #[inline]
    fn is_improving(&self, e: usize, reduced: f64) -> bool {
        let s = self.pi[self.source(e)].abs();
        let t = self.pi[self.target(e)].abs();
        let scale = s.max(t).max(self.arc_cost(e).abs()).max(1.0);
        reduced < -PIVOT_TOL * scale
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

    /// Ratio test; arcs are uncapacitated so only backward arcs can block.
    fn find_leaving_arc(&mut self) -> bool {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        self.delta = f64::INFINITY;
        let mut result = 0;

        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[self.pred[u]];
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
                let d = self.flow[self.pred[u]];
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
        let val = self.delta.max(0.0);
        if val > 0.0 {
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.state[out] = STATE_LOWER;
        self.flow[out] = 0.0;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;

        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };

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
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // re-hang the stem nodes between u_in and u_out
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

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            let mut p = self.parent[u];
            while u != u_in {
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
                p = self.parent[u];
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in {
            join
        } else {
            NONE
        };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
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
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in]
            - self.pi[u_in]
            - self.pred_dir[u_in] as f64 * self.arc_cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    pub fn solve(mut self, max_iterations: usize) -> Result<SimplexSolution> {
        let mut iterations = 0;
        while self.find_entering_arc() {
            if iterations >= max_iterations {
                return Err(Error::Solver(format!(
                    "network simplex exceeded {max_iterations} pivots"
                )));
            }
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(Error::Solver("unbounded transport problem".into()));
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            iterations += 1;
        }
        // only tree arcs carry flow
        let mut entries = Vec::with_capacity(self.node_num);
        for u in 0..self.node_num {
            let e = self.pred[u];
            if e < self.arc_num && self.flow[e] > 0.0 {
                entries.push((e / self.n, e % self.n, self.flow[e]));
            }
        }
        Ok(SimplexSolution {
            entries,
            iterations,
        })
    }
}

/// Solves `min <P, D>` subject to `P 1 = a`, `P^T 1 = b`, `P >= 0`.
pub(crate) fn solve_transport(a: &[f64], b: &[f64], cost: &Array2<f64>) -> Result<SimplexSolution> {
    let (m, n) = cost.dim();
    if a.len() != m || b.len() != n {
        return Err(Error::ShapeMismatch {
            expected: (a.len(), b.len()),
            got: (m, n),
        });
    }
    let owned;
    let flat: &[f64] = match cost.as_slice() {
        Some(s) => s,
        None => {
            owned = cost.iter().copied().collect::<Vec<_>>();
            &owned
        }
    };
    let max_iterations = 1000usize
        .saturating_mul(m + n)
        .saturating_mul(((m * n) as f64).sqrt().ceil() as usize + 1)
        .max(100_000);
    TransportSimplex::new(a, b, flat).solve(max_iterations)
}
