#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Edges `(i, j, w)` with `i < j` of a from-scratch Kruskal MST over the
/// complete Euclidean graph.
pub fn kruskal(points: &[f64], dim: usize) -> Vec<(usize, usize, f64)> {
    let n = points.len() / dim;
    let mut all = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d2: f64 = (0..dim)
                .map(|k| (points[i * dim + k] - points[j * dim + k]).powi(2))
                .sum();
            all.push((d2, i, j));
        }
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for (d2, i, j) in all {
        let (a, b) = (root(&mut parent, i), root(&mut parent, j));
        if a != b {
            parent[a] = b;
            tree.push((i, j, d2.sqrt()));
        }
    }
    tree
}

pub fn total(tree: &[(usize, usize, f64)]) -> f64 {
    tree.iter().map(|e| e.2).sum()
}

/// Number of oracle-tree edges whose endpoints carry different labels.
pub fn bichromatic(tree: &[(usize, usize, f64)], first: &[bool]) -> usize {
    tree.iter().filter(|e| first[e.0] != first[e.1]).count()
}

pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f64> {
    (0..n * dim).map(|_| rng.random::<f64>()).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
