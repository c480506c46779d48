use super::{dist2, Points};

pub(crate) const NO_CHILD: u32 = u32::MAX;
const DEFAULT_LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub start: usize,
    pub end: usize,
    pub left: u32,
    pub right: u32,
}

impl Node {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.left == NO_CHILD
    }
}

/// Balanced kd-tree with axis-aligned bounding boxes per node.
///
/// Points are copied into tree order; `index[k]` is the caller's index of
/// the k-th point in that order. Node 0 is the root.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    pub(crate) coords: Vec<f64>,
    pub(crate) index: Vec<usize>,
    pub(crate) nodes: Vec<Node>,
    /// `lo` then `hi` corner of each node's bounding box, `2 * dim` values
    /// per node.
    boxes: Vec<f64>,
}

impl KdTree {
    pub fn new(points: &Points<'_>) -> Self {
        Self::with_leaf_size(points, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: &Points<'_>, leaf_size: usize) -> Self {
        let leaf_size = leaf_size.max(1);
        let dim = points.dim();
        let mut index: Vec<usize> = (0..points.len()).collect();
        let mut tree = Self {
            dim,
            coords: Vec::new(),
            index: Vec::new(),
            nodes: Vec::with_capacity(2 * points.len() / leaf_size + 1),
            boxes: Vec::new(),
        };
        if !index.is_empty() {
            tree.build(points, &mut index, 0, leaf_size);
        }
        tree.coords = index.iter().flat_map(|&i| points.row(i)).copied().collect();
        tree.index = index;
        tree
    }

    fn build(&mut self, points: &Points<'_>, index: &mut [usize], offset: usize, leaf: usize) -> u32 {
        let id = self.nodes.len();
        self.nodes.push(Node {
            start: offset,
            end: offset + index.len(),
            left: NO_CHILD,
            right: NO_CHILD,
        });

        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for &i in index.iter() {
            for (k, &v) in points.row(i).iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        self.boxes.extend_from_slice(&lo);
        self.boxes.extend_from_slice(&hi);

        let (axis, spread) = (0..self.dim)
            .map(|k| (k, hi[k] - lo[k]))
            .fold((0, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if index.len() <= leaf || spread <= 0.0 {
            return id as u32;
        }

        let mid = index.len() / 2;
        index.select_nth_unstable_by(mid, |&a, &b| {
            points.row(a)[axis].total_cmp(&points.row(b)[axis])
        });
        let (left, right) = index.split_at_mut(mid);
        let l = self.build(points, left, offset, leaf);
        let r = self.build(points, right, offset + mid, leaf);
        self.nodes[id].left = l;
        self.nodes[id].right = r;
        id as u32
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub(crate) fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    fn lo(&self, node: usize) -> &[f64] {
        let b = node * 2 * self.dim;
        &self.boxes[b..b + self.dim]
    }

    #[inline]
    fn hi(&self, node: usize) -> &[f64] {
        let b = node * 2 * self.dim + self.dim;
        &self.boxes[b..b + self.dim]
    }

    /// Smallest squared distance from `q` to the box of `node`.
    #[inline]
    pub(crate) fn point_box_d2(&self, node: usize, q: &[f64]) -> f64 {
        let (lo, hi) = (self.lo(node), self.hi(node));
        let mut d = 0.0;
        for k in 0..self.dim {
            let g = (lo[k] - q[k]).max(q[k] - hi[k]).max(0.0);
            d += g * g;
        }
        d
    }

    /// Smallest squared distance between the boxes of two nodes.
    #[inline]
    pub(crate) fn box_box_d2(&self, a: usize, b: usize) -> f64 {
        let (alo, ahi, blo, bhi) = (self.lo(a), self.hi(a), self.lo(b), self.hi(b));
        let mut d = 0.0;
        for k in 0..self.dim {
            let g = (alo[k] - bhi[k]).max(blo[k] - ahi[k]).max(0.0);
            d += g * g;
        }
        d
    }

    /// Exact nearest neighbour of `query`: `(caller index, distance)`.
    /// Ties go to the lowest caller index.
    pub fn nearest(&self, query: &[f64]) -> Option<(usize, f64)> {
        assert_eq!(query.len(), self.dim, "query dimension mismatch");
        if self.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.nearest_rec(0, query, &mut best);
        Some((best.1, best.0.sqrt()))
    }

    fn nearest_rec(&self, node: usize, q: &[f64], best: &mut (f64, usize)) {
        if self.point_box_d2(node, q) > best.0 {
            return;
        }
        let nd = &self.nodes[node];
        if nd.is_leaf() {
            for k in nd.start..nd.end {
                let d = dist2(q, self.point(k));
                let idx = self.index[k];
                if d < best.0 || (d == best.0 && idx < best.1) {
                    *best = (d, idx);
                }
            }
            return;
        }
        let (l, r) = (nd.left as usize, nd.right as usize);
        if self.point_box_d2(l, q) <= self.point_box_d2(r, q) {
            self.nearest_rec(l, q, best);
            self.nearest_rec(r, q, best);
        } else {
            self.nearest_rec(r, q, best);
            self.nearest_rec(l, q, best);
        }
    }
}
