//! Primal network simplex for the dense transportation problem.
//!
//! The spanning tree uses an artificial root joined to every node. Supply
//! nodes hang below the root through zero-cost arcs `u -> root`, demand nodes
//! through arcs `root -> v` whose cost is large enough that no optimal
//! solution routes mass through the root. Entering arcs are found by block
//! search; the leaving arc follows the strongly feasible tie-break, which
//! rules out cycling.

use crate::error::{Error, Result};

pub(crate) struct SimplexSolution {
    /// `(i, j, flow)` on real arcs with positive flow, ordered by `(i, j)`.
    pub flows: Vec<(usize, usize, f64)>,
    /// Row duals `u_i` and column duals `v_j` with `u_i + v_j <= c_ij`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
    /// Largest flow left on artificial arcs.
    pub artificial_flow: f64,
}

const NONE: usize = usize::MAX;

struct Tree {
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// Tree arc of `u` points from `u` to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
}

impl Tree {
    fn detach(&mut self, u: usize) {
        let p = self.parent[u];
        let (a, b) = (self.prev_sib[u], self.next_sib[u]);
        if a == NONE {
            self.first_child[p] = b;
        } else {
            self.next_sib[a] = b;
        }
        if b != NONE {
            self.prev_sib[b] = a;
        }
        self.prev_sib[u] = NONE;
        self.next_sib[u] = NONE;
    }

    fn attach(&mut self, u: usize, p: usize) {
        self.parent[u] = p;
        let f = self.first_child[p];
        self.next_sib[u] = f;
        self.prev_sib[u] = NONE;
        if f != NONE {
            self.prev_sib[f] = u;
        }
        self.first_child[p] = u;
    }
}

pub(crate) struct Transportation<'a> {
    pub n: usize,
    pub m: usize,
    /// Row-major `n x m` costs.
    pub cost: &'a [f64],
    pub supply: &'a [f64],
    pub demand: &'a [f64],
}

impl Transportation<'_> {
    pub fn solve(&self, max_pivots: usize) -> Result<SimplexSolution> {
        let (n, m) = (self.n, self.m);
        let nodes = n + m;
        let root = nodes;
        let real = n * m;
        let total_arcs = real + nodes;
        let max_c = self.cost.iter().fold(0.0_f64, |a, &c| a.max(c.abs()));
        let art = (max_c + 1.0) * (nodes as f64 + 1.0);
        let eps = 1e-12 * (max_c + 1.0);

        let src = |e: usize| if e < real { e / m } else if e - real < n { e - real } else { root };
        let tgt = |e: usize| if e < real { n + e % m } else if e - real < n { root } else { e - real };
        let arc_cost = |e: usize| if e < real { self.cost[e] } else if e - real < n { 0.0 } else { art };

        let mut flow = vec![0.0; total_arcs];
        let mut in_tree = vec![false; total_arcs];
        let mut pi = vec![0.0; nodes + 1];
        let mut t = Tree {
            parent: vec![NONE; nodes + 1],
            pred: vec![NONE; nodes + 1],
            up: vec![false; nodes + 1],
            depth: vec![0; nodes + 1],
            first_child: vec![NONE; nodes + 1],
            next_sib: vec![NONE; nodes + 1],
            prev_sib: vec![NONE; nodes + 1],
        };
        for u in (0..nodes).rev() {
            let e = real + u;
            t.attach(u, root);
            t.pred[u] = e;
            t.depth[u] = 1;
            in_tree[e] = true;
            if u < n {
                t.up[u] = true;
                flow[e] = self.supply[u];
                pi[u] = 0.0;
            } else {
                t.up[u] = false;
                flow[e] = self.demand[u - n];
                pi[u] = art;
            }
        }

        let block = ((total_arcs as f64).sqrt().ceil() as usize).max(10);
        let mut next_arc = 0usize;
        let mut pivots = 0usize;
        let mut stack = Vec::new();
        let mut path = Vec::new();
        loop {
            // Block search for an entering arc.
            let mut best = NONE;
            let mut best_rc = -eps;
            let mut scanned = 0usize;
            let mut in_block = 0usize;
            let mut e = next_arc;
            while scanned < total_arcs {
                if !in_tree[e] {
                    let rc = arc_cost(e) + pi[src(e)] - pi[tgt(e)];
                    if rc < best_rc {
                        best_rc = rc;
                        best = e;
                    }
                }
                scanned += 1;
                in_block += 1;
                e += 1;
                if e == total_arcs {
                    e = 0;
                }
                if in_block == block {
                    if best != NONE {
                        break;
                    }
                    in_block = 0;
                }
            }
            if best == NONE {
                break;
            }
            next_arc = e;
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::numerical("network simplex pivot cap reached", best_rc.abs()));
            }

            let e_in = best;
            let (u_in, v_in) = (src(e_in), tgt(e_in));
            let mut a = u_in;
            let mut b = v_in;
            while a != b {
                if t.depth[a] >= t.depth[b] {
                    a = t.parent[a];
                } else {
                    b = t.parent[b];
                }
            }
            let join = a;

            // Leaving arc: strict on the first path, non-strict on the second.
            let mut delta = f64::INFINITY;
            let mut u_out = NONE;
            let mut side = 0;
            let mut w = u_in;
            while w != join {
                if t.up[w] && flow[t.pred[w]] < delta {
                    delta = flow[t.pred[w]];
                    u_out = w;
                    side = 1;
                }
                w = t.parent[w];
            }
            w = v_in;
            while w != join {
                if !t.up[w] && flow[t.pred[w]] <= delta {
                    delta = flow[t.pred[w]];
                    u_out = w;
                    side = 2;
                }
                w = t.parent[w];
            }
            if u_out == NONE {
                return Err(Error::numerical("unbounded pivot in transportation problem", 0.0));
            }

            if delta > 0.0 {
                flow[e_in] += delta;
                w = u_in;
                while w != join {
                    let f = &mut flow[t.pred[w]];
                    *f = if t.up[w] { *f - delta } else { *f + delta };
                    w = t.parent[w];
                }
                w = v_in;
                while w != join {
                    let f = &mut flow[t.pred[w]];
                    *f = if t.up[w] { *f + delta } else { *f - delta };
                    w = t.parent[w];
                }
            }
            flow[t.pred[u_out]] = 0.0;

            // Re-hang the subtree of u_out below the other endpoint of e_in.
            let (inner, outer) = if side == 1 { (u_in, v_in) } else { (v_in, u_in) };
            in_tree[t.pred[u_out]] = false;
            in_tree[e_in] = true;
            path.clear();
            w = inner;
            loop {
                path.push(w);
                if w == u_out {
                    break;
                }
                w = t.parent[w];
            }
            t.detach(u_out);
            for k in (0..path.len() - 1).rev() {
                let (child, par) = (path[k], path[k + 1]);
                t.detach(child);
                t.attach(par, child);
                t.pred[par] = t.pred[child];
                t.up[par] = !t.up[child];
            }
            t.attach(inner, outer);
            t.pred[inner] = e_in;
            t.up[inner] = src(e_in) == inner;

            let rc_in = arc_cost(e_in) + pi[u_in] - pi[v_in];
            let sigma = if side == 1 { -rc_in } else { rc_in };
            stack.clear();
            stack.push(inner);
            while let Some(x) = stack.pop() {
                pi[x] += sigma;
                t.depth[x] = t.depth[t.parent[x]] + 1;
                let mut c = t.first_child[x];
                while c != NONE {
                    stack.push(c);
                    c = t.next_sib[c];
                }
            }

            if pivots.is_multiple_of(4 * nodes + 16) {
                recompute_potentials(&t, &mut pi, root, &arc_cost, &mut stack);
            }
        }
        recompute_potentials(&t, &mut pi, root, &arc_cost, &mut stack);

        let artificial_flow = flow[real..].iter().fold(0.0_f64, |a, &f| a.max(f));
        let mut flows = Vec::new();
        for (e, &f) in flow[..real].iter().enumerate() {
            if f > 0.0 {
                flows.push((e / m, e % m, f));
            }
        }
        let u = (0..n).map(|i| -pi[i]).collect();
        let v = (0..m).map(|j| pi[n + j]).collect();
        Ok(SimplexSolution { flows, u, v, pivots, artificial_flow })
    }
}

fn recompute_potentials(t: &Tree, pi: &mut [f64], root: usize, arc_cost: &dyn Fn(usize) -> f64, stack: &mut Vec<usize>) {
    pi[root] = 0.0;
    stack.clear();
    let mut c = t.first_child[root];
    while c != NONE {
        stack.push(c);
        c = t.next_sib[c];
    }
    while let Some(x) = stack.pop() {
        let p = t.parent[x];
        let cst = arc_cost(t.pred[x]);
        pi[x] = if t.up[x] { pi[p] - cst } else { pi[p] + cst };
        let mut c = t.first_child[x];
        while c != NONE {
            stack.push(c);
            c = t.next_sib[c];
        }
    }
}
