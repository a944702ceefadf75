//! Primal network simplex for the balanced transportation problem.
//!
//! Sources `0..m` ship `supply[i]` to sinks `0..n` with demand `demand[j]`
//! at unit cost `cost[i * n + j]`. The spanning tree is rooted at an
//! artificial node joined to every real node by a big-M arc. Pivots use block
//! search pricing and the strongly feasible leaving-arc rule, which keeps
//! degenerate pivots from cycling.

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Optimal flow returned by [`solve`].
#[derive(Debug, Clone)]
pub struct Transport {
    /// `Σ flow · cost` over the optimal plan.
    pub cost: f64,
    /// Nonzero entries `(source, sink, mass)` of the plan.
    pub flows: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

struct Tree {
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `true` when the predecessor arc points from the node to its parent.
    up: Vec<bool>,
    flow: Vec<f64>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
}

impl Tree {
    fn detach(&mut self, u: usize) {
        let p = self.parent[u];
        let (prev, next) = (self.prev_sib[u], self.next_sib[u]);
        if prev == NONE {
            self.first_child[p] = next;
        } else {
            self.next_sib[prev] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
        self.prev_sib[u] = NONE;
        self.next_sib[u] = NONE;
    }

    fn attach(&mut self, u: usize, p: usize) {
        self.parent[u] = p;
        let head = self.first_child[p];
        self.next_sib[u] = head;
        self.prev_sib[u] = NONE;
        if head != NONE {
            self.prev_sib[head] = u;
        }
        self.first_child[p] = u;
    }
}

/// Solves the transportation problem exactly (up to floating point).
///
/// Supplies and demands must be positive and have equal totals up to `1e-9`.
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Transport> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidMeasure("empty marginal".into()));
    }
    if cost.len() != m * n {
        return Err(Error::Dimension(format!("cost has {} entries, expected {}", cost.len(), m * n)));
    }
    if supply.iter().chain(demand).any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidMeasure("marginals must be positive and finite".into()));
    }
    let (ts, td) = (supply.iter().sum::<f64>(), demand.iter().sum::<f64>());
    if (ts - td).abs() > 1e-9 * ts.max(td).max(1.0) {
        return Err(Error::InvalidMeasure(format!("total masses differ: {ts} vs {td}")));
    }
    if cost.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::Solver("costs must be finite and nonnegative".into()));
    }

    let nodes = m + n;
    let root = nodes;
    let real_arcs = m * n;
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let art = (max_cost + 1.0) * nodes as f64;
    let eps = 1e-14 * art;
    let arc_cost = |a: usize| if a < real_arcs { cost[a] } else { art };

    let mut tree = Tree {
        parent: vec![root; nodes + 1],
        pred: (0..=nodes).map(|u| real_arcs + u).collect(),
        up: (0..=nodes).map(|u| u < m).collect(),
        flow: supply.iter().chain(demand).copied().chain([0.0]).collect(),
        depth: vec![1; nodes + 1],
        pi: (0..=nodes).map(|u| if u < m { -art } else { art }).collect(),
        first_child: vec![NONE; nodes + 1],
        next_sib: vec![NONE; nodes + 1],
        prev_sib: vec![NONE; nodes + 1],
    };
    tree.parent[root] = NONE;
    tree.depth[root] = 0;
    tree.pi[root] = 0.0;
    for u in (0..nodes).rev() {
        tree.attach(u, root);
    }

    let block = ((real_arcs as f64).sqrt() as usize).max(10).min(real_arcs);
    let max_pivots = 1000 * real_arcs.max(nodes) + 10_000;
    let (mut ci, mut cj) = (0usize, 0usize);
    let mut pivots = 0usize;
    let mut path = Vec::new();
    let mut saved = Vec::new();
    let mut stack = Vec::new();

    loop {
        // Block search pricing.
        let mut best = NONE;
        let mut best_rc = -eps;
        let mut in_block = 0;
        for _ in 0..real_arcs {
            let a = ci * n + cj;
            let rc = cost[a] + tree.pi[ci] - tree.pi[m + cj];
            if rc < best_rc {
                best_rc = rc;
                best = a;
            }
            cj += 1;
            if cj == n {
                cj = 0;
                ci += 1;
                if ci == m {
                    ci = 0;
                }
            }
            in_block += 1;
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
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Solver(format!("no convergence after {max_pivots} pivots")));
        }

        let (s, t) = (best / n, m + best % n);
        let join = {
            let (mut u, mut v) = (s, t);
            while u != v {
                let (du, dv) = (tree.depth[u], tree.depth[v]);
                if du >= dv {
                    u = tree.parent[u];
                }
                if dv >= du {
                    v = tree.parent[v];
                }
            }
            u
        };

        // Leaving arc: last blocking arc in cycle orientation.
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut first_side = true;
        let mut u = s;
        while u != join {
            if tree.up[u] && tree.flow[u] < delta {
                delta = tree.flow[u];
                u_out = u;
            }
            u = tree.parent[u];
        }
        u = t;
        while u != join {
            if !tree.up[u] && tree.flow[u] <= delta {
                delta = tree.flow[u];
                u_out = u;
                first_side = false;
            }
            u = tree.parent[u];
        }
        if u_out == NONE {
            return Err(Error::Solver("unbounded pivot cycle".into()));
        }

        if delta > 0.0 {
            let mut u = s;
            while u != join {
                tree.flow[u] += if tree.up[u] { -delta } else { delta };
                u = tree.parent[u];
            }
            u = t;
            while u != join {
                tree.flow[u] += if tree.up[u] { delta } else { -delta };
                u = tree.parent[u];
            }
        }

        // Re-hang the subtree below the leaving arc from the entering arc.
        let (u_in, v_in) = if first_side { (s, t) } else { (t, s) };
        path.clear();
        let mut w = u_in;
        loop {
            path.push(w);
            if w == u_out {
                break;
            }
            w = tree.parent[w];
        }
        saved.clear();
        saved.extend(path.iter().map(|&w| (tree.pred[w], tree.up[w], tree.flow[w])));
        for &w in &path {
            tree.detach(w);
        }
        for k in 1..path.len() {
            let (pred, up, flow) = saved[k - 1];
            tree.pred[path[k]] = pred;
            tree.up[path[k]] = !up;
            tree.flow[path[k]] = flow;
            tree.attach(path[k], path[k - 1]);
        }
        tree.pred[u_in] = best;
        tree.up[u_in] = u_in == s;
        tree.flow[u_in] = delta;
        tree.attach(u_in, v_in);

        stack.clear();
        stack.push(u_in);
        while let Some(u) = stack.pop() {
            let p = tree.parent[u];
            tree.depth[u] = tree.depth[p] + 1;
            let c = arc_cost(tree.pred[u]);
            tree.pi[u] = if tree.up[u] { tree.pi[p] - c } else { tree.pi[p] + c };
            let mut ch = tree.first_child[u];
            while ch != NONE {
                stack.push(ch);
                ch = tree.next_sib[ch];
            }
        }
    }

    let scale = ts.max(td).max(1.0);
    let mut total = 0.0;
    let mut flows = Vec::new();
    for u in 0..nodes {
        let a = tree.pred[u];
        let f = tree.flow[u];
        if a >= real_arcs {
            if f > 1e-9 * scale {
                return Err(Error::Solver(format!("artificial arc keeps flow {f:e}")));
            }
        } else if f > 0.0 {
            total += f * cost[a];
            flows.push((a / n, a % n, f));
        }
    }
    Ok(Transport { cost: total, flows, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_source() {
        let t = solve(&[1.0], &[0.25, 0.75], &[2.0, 4.0]).unwrap();
        assert!((t.cost - 3.5).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_prefers_diagonal() {
        let t = solve(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.cost, 0.0);
        let mut f = t.flows.clone();
        f.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(f, vec![(0, 0, 0.5), (1, 1, 0.5)]);
    }

    #[test]
    fn degenerate_equal_masses() {
        // Many ties in both costs and masses.
        let m = 6;
        let w = vec![1.0 / m as f64; m];
        let cost: Vec<f64> = (0..m * m).map(|a| ((a / m) as f64 - (a % m) as f64).abs().min(2.0)).collect();
        let t = solve(&w, &w, &cost).unwrap();
        assert!(t.cost.abs() < 1e-15);
    }

    #[test]
    fn rejects_mass_mismatch() {
        assert!(matches!(solve(&[1.0], &[0.5], &[0.0]), Err(Error::InvalidMeasure(_))));
        assert!(matches!(solve(&[1.0, 0.0], &[1.0], &[0.0, 0.0]), Err(Error::InvalidMeasure(_))));
    }
}
