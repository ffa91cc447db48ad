//! Random in-class instances used as completeness fixtures.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{instance_rng, GeneratedInstance, Params, Provenance};
use crate::matrix::DistanceMatrix;
use crate::repair::floyd_warshall;

/// Shortest-path closure of a complete graph with integer weights in `1..=max_weight`.
pub fn random_metric_matrix<R: Rng + ?Sized>(
    n: usize,
    max_weight: u32,
    rng: &mut R,
) -> DistanceMatrix {
    let w = DistanceMatrix::from_fn(n, |_, _| rng.gen_range(1..=max_weight) as f64);
    let mut d = w.as_slice().to_vec();
    floyd_warshall(&mut d, n);
    DistanceMatrix::from_raw(n, d).expect("finite closure")
}

/// Random binary hierarchy: the root sits at height `top`; each child is
/// `1..=3` lower than its parent. Leaf distance is the height of the split
/// that separates them.
pub fn random_ultra_matrix<R: Rng + ?Sized>(n: usize, top: f64, rng: &mut R) -> DistanceMatrix {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut m = DistanceMatrix::zeros(n);
    let mut stack = vec![(0usize, n, top)];
    while let Some((lo, hi, h)) = stack.pop() {
        if hi - lo < 2 {
            continue;
        }
        let mid = rng.gen_range(lo + 1..hi);
        for &a in &order[lo..mid] {
            for &b in &order[mid..hi] {
                m.set_sym(a, b, h);
            }
        }
        for (l, r) in [(lo, mid), (mid, hi)] {
            let drop = rng.gen_range(1..=3) as f64;
            stack.push((l, r, h - drop));
        }
    }
    m
}

/// Random weighted tree on `nodes >= n` vertices (vertex `t` hangs off a
/// uniformly chosen earlier vertex with weight `1..=max_weight`); `n` distinct
/// vertices are chosen as the points and the matrix holds path lengths.
pub fn random_tree_matrix<R: Rng + ?Sized>(
    n: usize,
    nodes: usize,
    max_weight: u32,
    rng: &mut R,
) -> DistanceMatrix {
    let nodes = nodes.max(n).max(1);
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes];
    for t in 1..nodes {
        let p = rng.gen_range(0..t);
        let w = rng.gen_range(1..=max_weight) as f64;
        adj[t].push((p, w));
        adj[p].push((t, w));
    }
    let mut all: Vec<usize> = (0..nodes).collect();
    all.shuffle(rng);
    let points = &all[..n];
    let mut slot = vec![usize::MAX; nodes];
    for (k, &v) in points.iter().enumerate() {
        slot[v] = k;
    }
    let mut m = DistanceMatrix::zeros(n);
    let mut dist = vec![f64::NAN; nodes];
    for (k, &src) in points.iter().enumerate() {
        dist.fill(f64::NAN);
        dist[src] = 0.0;
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            for &(u, w) in &adj[v] {
                if dist[u].is_nan() {
                    dist[u] = dist[v] + w;
                    queue.push_back(u);
                }
            }
        }
        for (v, &s) in slot.iter().enumerate() {
            if s != usize::MAX && s != k {
                m.set(k, s, dist[v]);
            }
        }
    }
    m
}

fn wrap(
    matrix: DistanceMatrix,
    provenance: Provenance,
    seed: u64,
    extra: &[(&str, f64)],
) -> GeneratedInstance {
    let n = matrix.n();
    let mut params = Params::new();
    params.insert("n".into(), n.into());
    params.insert("seed".into(), seed.into());
    for (k, v) in extra {
        params.insert((*k).into(), (*v).into());
    }
    GeneratedInstance {
        matrix,
        provenance,
        params,
        permutation: (0..n).collect(),
    }
}

pub fn gen_random_metric(n: usize, seed: u64, max_weight: u32) -> GeneratedInstance {
    let m = random_metric_matrix(n, max_weight, &mut instance_rng(seed));
    wrap(
        m,
        Provenance::RandomMetric,
        seed,
        &[("max_weight", max_weight as f64)],
    )
}

pub fn gen_random_ultra(n: usize, seed: u64) -> GeneratedInstance {
    let top = 3.0 * n as f64;
    let m = random_ultra_matrix(n, top, &mut instance_rng(seed));
    wrap(m, Provenance::RandomUltra, seed, &[("top", top)])
}

pub fn gen_random_tree(n: usize, seed: u64, max_weight: u32) -> GeneratedInstance {
    let nodes = 2 * n;
    let m = random_tree_matrix(n, nodes, max_weight, &mut instance_rng(seed));
    wrap(
        m,
        Provenance::RandomTree,
        seed,
        &[("nodes", nodes as f64), ("max_weight", max_weight as f64)],
    )
}
