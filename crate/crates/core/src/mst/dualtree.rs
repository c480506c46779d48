//! Dual-tree Borůvka.
//!
//! Each round finds, for every current component, its lightest outgoing
//! edge by a simultaneous traversal of (query node, reference node) pairs of
//! one kd-tree. A pair is pruned when both nodes lie inside the same
//! component, or when the boxes are farther apart than the worst
//! lightest-edge candidate of any point in the query node. All lightest edges
//! are then merged and the round repeats until one component remains.

use super::kdtree::{KdTree, NO_CHILD};
use super::{check_input, dist2, EdgeKey, Points, SpanningTree, UnionFind};
use crate::Result;

const MIXED: usize = usize::MAX;

struct Round<'t> {
    tree: &'t KdTree,
    /// Component root of each point, in tree order.
    comp: Vec<usize>,
    /// Component shared by every point under a node, or `MIXED`.
    node_comp: Vec<usize>,
    node_bound: Vec<f64>,
    /// Lightest outgoing candidate per component root (indexed by root).
    best: Vec<EdgeKey>,
}

impl Round<'_> {
    fn label_nodes(&mut self, node: usize) -> usize {
        let nd = &self.tree.nodes[node];
        let c = if nd.is_leaf() {
            let first = self.comp[nd.start];
            if self.comp[nd.start..nd.end].iter().all(|&c| c == first) {
                first
            } else {
                MIXED
            }
        } else {
            let (l, r) = (nd.left as usize, nd.right as usize);
            let cl = self.label_nodes(l);
            let cr = self.label_nodes(r);
            if cl == cr {
                cl
            } else {
                MIXED
            }
        };
        self.node_comp[node] = c;
        c
    }

    fn traverse(&mut self, q: usize, r: usize) {
        let qc = self.node_comp[q];
        if qc != MIXED && qc == self.node_comp[r] {
            return;
        }
        if self.tree.box_box_d2(q, r) > self.node_bound[q] {
            return;
        }
        let (qn, rn) = (&self.tree.nodes[q], &self.tree.nodes[r]);
        match (qn.is_leaf(), rn.is_leaf()) {
            (true, true) => self.base_case(q, r),
            (true, false) => {
                let (a, b) = self.ordered_children(q, rn.left, rn.right);
                self.traverse(q, a);
                self.traverse(q, b);
            }
            (false, true) => {
                let (ql, qr) = (qn.left as usize, qn.right as usize);
                self.traverse(ql, r);
                self.traverse(qr, r);
                self.node_bound[q] = self.node_bound[ql].max(self.node_bound[qr]);
            }
            (false, false) => {
                let (ql, qr) = (qn.left as usize, qn.right as usize);
                let (rl, rr) = (rn.left, rn.right);
                for qc in [ql, qr] {
                    let (a, b) = self.ordered_children(qc, rl, rr);
                    self.traverse(qc, a);
                    self.traverse(qc, b);
                }
                self.node_bound[q] = self.node_bound[ql].max(self.node_bound[qr]);
            }
        }
    }

    fn ordered_children(&self, q: usize, a: u32, b: u32) -> (usize, usize) {
        debug_assert!(a != NO_CHILD && b != NO_CHILD);
        let (a, b) = (a as usize, b as usize);
        if self.tree.box_box_d2(q, a) <= self.tree.box_box_d2(q, b) {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn base_case(&mut self, q: usize, r: usize) {
        let tree = self.tree;
        let (qn, rn) = (&tree.nodes[q], &tree.nodes[r]);
        let mut bound: f64 = 0.0;
        for a in qn.start..qn.end {
            let ca = self.comp[a];
            let pa = tree.point(a);
            let mut best = self.best[ca];
            for b in rn.start..rn.end {
                if self.comp[b] == ca {
                    continue;
                }
                let d2 = dist2(pa, tree.point(b));
                if d2 > best.d2 {
                    continue;
                }
                let key = EdgeKey::new(d2, tree.index[a], tree.index[b]);
                if key.lt(&best) {
                    best = key;
                }
            }
            self.best[ca] = best;
            bound = bound.max(best.d2);
        }
        self.node_bound[q] = bound;
    }
}

/// Kd-tree dual-tree Borůvka; same contract as [`super::mst_quadratic`].
pub fn mst_dualtree(points: &Points<'_>) -> Result<SpanningTree> {
    check_input(points)?;
    let n = points.len();
    let tree = KdTree::new(points);
    let mut uf = UnionFind::new(n);
    let mut keys = Vec::with_capacity(n - 1);

    let mut round = Round {
        tree: &tree,
        comp: vec![0; n],
        node_comp: vec![MIXED; tree.nodes.len()],
        node_bound: vec![f64::INFINITY; tree.nodes.len()],
        best: vec![EdgeKey::NONE; n],
    };

    while keys.len() < n - 1 {
        for k in 0..n {
            round.comp[k] = uf.find(tree.index[k]);
        }
        round.label_nodes(0);
        round.node_bound.fill(f64::INFINITY);
        round.best.fill(EdgeKey::NONE);

        round.traverse(0, 0);

        let mut candidates: Vec<EdgeKey> = round
            .best
            .iter()
            .filter(|k| k.i != usize::MAX)
            .copied()
            .collect();
        candidates.sort_unstable_by(EdgeKey::cmp);
        candidates.dedup_by(|a, b| a.i == b.i && a.j == b.j);
        let before = keys.len();
        for key in candidates {
            if uf.union(key.i, key.j) {
                keys.push(key);
            }
        }
        assert!(keys.len() > before, "Borůvka round made no progress");
    }
    Ok(SpanningTree::from_keys(keys))
}
