//! Exact Euclidean minimum spanning trees.
//!
//! Two constructions share one contract: [`mst_quadratic`] (dense Prim,
//! `O(n^2 D)`) and [`mst_dualtree`] (Borůvka rounds driven by a dual kd-tree
//! traversal). Candidate edges are ordered by `(squared length, i, j)` with
//! `i < j`, a strict total order, so the tree is unique even with tied or
//! duplicate points and both constructions return the same edge list.

mod dualtree;
mod kdtree;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use dualtree::mst_dualtree;
pub use kdtree::KdTree;

/// Borrowed row-major point matrix.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                line: (pos / dim) as u64 + 1,
                column: pos % dim + 1,
            });
        }
        Ok(Self { data, dim })
    }

    pub(crate) fn new_unchecked(data: &'a [f64], dim: usize) -> Self {
        debug_assert!(dim > 0 && data.len() % dim == 0);
        Self { data, dim }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &'a [f64] {
        self.data
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Candidate-edge key: squared length, then endpoint indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EdgeKey {
    pub d2: f64,
    pub i: usize,
    pub j: usize,
}

impl EdgeKey {
    pub const NONE: EdgeKey = EdgeKey {
        d2: f64::INFINITY,
        i: usize::MAX,
        j: usize::MAX,
    };

    #[inline]
    pub fn new(d2: f64, a: usize, b: usize) -> Self {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        Self { d2, i, j }
    }

    #[inline]
    pub fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.i.cmp(&other.i))
            .then(self.j.cmp(&other.j))
    }

    #[inline]
    pub fn lt(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Less
    }

    fn into_edge(self) -> Edge {
        Edge {
            i: self.i,
            j: self.j,
            w: self.d2.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningTree {
    /// Sorted by `(w, i, j)`; `i < j` in every edge.
    pub edges: Vec<Edge>,
    pub total_weight: f64,
}

impl SpanningTree {
    fn from_keys(mut keys: Vec<EdgeKey>) -> Self {
        keys.sort_unstable_by(EdgeKey::cmp);
        let edges: Vec<Edge> = keys.into_iter().map(EdgeKey::into_edge).collect();
        let total_weight = edges.iter().map(|e| e.w).sum();
        Self {
            edges,
            total_weight,
        }
    }

    pub fn n_points(&self) -> usize {
        self.edges.len() + 1
    }

    /// Replays the edges through a union-find: `true` when they form a
    /// spanning tree over `n` points in canonical orientation.
    pub fn is_spanning_tree(&self, n: usize) -> bool {
        if n == 0 || self.edges.len() != n - 1 {
            return false;
        }
        let mut uf = UnionFind::new(n);
        self.edges
            .iter()
            .all(|e| e.i < e.j && e.j < n && e.w >= 0.0 && uf.union(e.i, e.j))
    }
}

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; `false` if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

fn check_input(points: &Points<'_>) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "a spanning tree needs at least 2 points, got {}",
            points.len()
        )));
    }
    Ok(())
}

/// Dense Prim over the complete Euclidean graph.
pub fn mst_quadratic(points: &Points<'_>) -> Result<SpanningTree> {
    check_input(points)?;
    let n = points.len();
    let mut best = vec![EdgeKey::NONE; n];
    let mut remaining: Vec<usize> = (1..n).collect();
    let mut keys = Vec::with_capacity(n - 1);

    let mut latest = 0;
    while !remaining.is_empty() {
        let src = points.row(latest);
        let mut pick = 0;
        for (slot, &v) in remaining.iter().enumerate() {
            let key = EdgeKey::new(dist2(src, points.row(v)), latest, v);
            if key.lt(&best[v]) {
                best[v] = key;
            }
            if best[v].lt(&best[remaining[pick]]) {
                pick = slot;
            }
        }
        latest = remaining.swap_remove(pick);
        keys.push(best[latest]);
    }
    Ok(SpanningTree::from_keys(keys))
}

/// Which construction [`build_mst`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MstBackend {
    Quadratic,
    DualTree,
    /// Dual-tree when `n > cutoff` and the dimension is at most `max_dim`,
    /// quadratic otherwise. Kd-tree pruning degrades quickly with dimension,
    /// so dense Prim wins for high-dimensional inputs of moderate size.
    Auto { cutoff: usize, max_dim: usize },
}

impl MstBackend {
    pub const DEFAULT_CUTOFF: usize = 512;
    pub const DEFAULT_MAX_DIM: usize = 5;
}

impl Default for MstBackend {
    fn default() -> Self {
        MstBackend::Auto {
            cutoff: Self::DEFAULT_CUTOFF,
            max_dim: Self::DEFAULT_MAX_DIM,
        }
    }
}

pub fn build_mst(points: &Points<'_>, backend: MstBackend) -> Result<SpanningTree> {
    match backend {
        MstBackend::Quadratic => mst_quadratic(points),
        MstBackend::DualTree => mst_dualtree(points),
        MstBackend::Auto { cutoff, max_dim } => {
            if points.len() > cutoff && points.dim() <= max_dim {
                mst_dualtree(points)
            } else {
                mst_quadratic(points)
            }
        }
    }
}
