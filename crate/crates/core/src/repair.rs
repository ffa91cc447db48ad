//! Metric repair: shortest-path completion, ℓ₀-farness bounds, the direct
//! Behrend repair, and the single-edge interval-stabbing repair.
//!
//! Entry accounting: all counts are ordered off-diagonal entries, so one
//! unordered pair change counts as 2. The diagonal is never counted.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{GeneratedInstance, Provenance};
use crate::matrix::DistanceMatrix;
use crate::violations::{
    enumerate_violations, greedy_edge_disjoint_pack, Violation, ViolationKind,
};

/// Output of [`shortest_path_completion`].
#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub matrix: DistanceMatrix,
    /// Kept pairs whose completed distance is shorter than the input value.
    /// Empty whenever the kept graph has no shortcut cycle.
    pub disagreements: Vec<(usize, usize)>,
}

impl Completion {
    pub fn agrees(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// All-pairs shortest paths over the graph whose edges are `keep`, weighted by `m`.
///
/// Components are chained to the component of vertex 0 by bridge edges of
/// weight equal to the largest kept weight (1 if `keep` is empty), so the
/// result is always a metric.
pub fn shortest_path_completion(m: &DistanceMatrix, keep: &[(usize, usize)]) -> Completion {
    let n = m.n();
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    let mut bridge = 0.0f64;
    let mut uf = UnionFind::new(n);
    for &(i, j) in keep {
        if i == j {
            continue;
        }
        let w = m.get(i.min(j), i.max(j));
        bridge = bridge.max(w);
        d[i * n + j] = d[i * n + j].min(w);
        d[j * n + i] = d[i * n + j];
        uf.union(i, j);
    }
    if bridge == 0.0 {
        bridge = 1.0;
    }
    let root0 = if n > 0 { uf.find(0) } else { 0 };
    for v in 1..n {
        let r = uf.find(v);
        if r == v && r != root0 {
            d[root0 * n + v] = d[root0 * n + v].min(bridge);
            d[v * n + root0] = d[root0 * n + v];
            uf.union(root0, v);
        }
    }
    floyd_warshall(&mut d, n);
    let matrix = DistanceMatrix::from_raw(n, d).expect("completion is finite");
    let mut disagreements: Vec<(usize, usize)> = keep
        .iter()
        .filter(|&&(i, j)| i != j)
        .map(|&(i, j)| (i.min(j), i.max(j)))
        .filter(|&(i, j)| matrix.get(i, j) != m.get(i, j))
        .collect();
    disagreements.sort_unstable();
    disagreements.dedup();
    Completion {
        matrix,
        disagreements,
    }
}

/// In-place Floyd–Warshall on a row-major `n×n` buffer, parallel over rows.
///
/// Row `k` is fixed during pass `k`, so the parallel pass performs the same
/// floating-point operations as the sequential one.
pub fn floyd_warshall(d: &mut [f64], n: usize) {
    let mut pivot = vec![0.0; n];
    for k in 0..n {
        pivot.copy_from_slice(&d[k * n..(k + 1) * n]);
        let pivot = &pivot;
        d.par_chunks_mut(n).for_each(|row| {
            let dik = row[k];
            if dik.is_infinite() {
                return;
            }
            for (x, &p) in row.iter_mut().zip(pivot) {
                let via = dik + p;
                if via < *x {
                    *x = via;
                }
            }
        });
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so vertex 0's component keeps root 0
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub lower_entries: usize,
    pub pack: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpperBound {
    pub upper_entries: usize,
    pub repaired: DistanceMatrix,
}

/// Both sides of the ℓ₀ distance to the nearest metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarnessBounds {
    pub n: usize,
    pub lower_entries: usize,
    pub upper_entries: usize,
    #[serde(skip)]
    pub lower_certificate: Vec<Violation>,
    #[serde(skip)]
    pub upper_certificate: Option<DistanceMatrix>,
}

/// `2 · |greedy edge-disjoint pack|`: each packed triangle forces a distinct pair change.
pub fn farness_lower_bound(m: &DistanceMatrix) -> Result<LowerBound> {
    let pack = greedy_edge_disjoint_pack(m)?;
    Ok(LowerBound {
        lower_entries: 2 * pack.len(),
        pack,
    })
}

/// Keeps every pair that lies on no violating triangle and completes by shortest paths.
pub fn repair_upper_bound(m: &DistanceMatrix) -> Result<UpperBound> {
    let n = m.n();
    let tris = enumerate_violations(m, ViolationKind::Triangle)?;
    let mut bad = vec![false; n * n];
    for t in &tris {
        for (a, b) in t.pairs() {
            bad[a * n + b] = true;
        }
    }
    let keep: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !bad[i * n + j])
        .collect();
    let repaired = shortest_path_completion(m, &keep).matrix;
    Ok(UpperBound {
        upper_entries: m.changed_entries(&repaired),
        repaired,
    })
}

pub fn farness_bounds(m: &DistanceMatrix) -> Result<FarnessBounds> {
    let lo = farness_lower_bound(m)?;
    let hi = repair_upper_bound(m)?;
    Ok(FarnessBounds {
        n: m.n(),
        lower_entries: lo.lower_entries,
        upper_entries: hi.upper_entries,
        lower_certificate: lo.pack,
        upper_certificate: Some(hi.repaired),
    })
}

/// Lowers every 4 to 3 in a Behrend-family matrix.
pub fn behrend_direct_repair(inst: &GeneratedInstance) -> Result<DistanceMatrix> {
    if !matches!(inst.provenance, Provenance::Behrend | Provenance::TwinBad) {
        return Err(Error::ProvenanceMissing {
            expected: "behrend",
        });
    }
    let m = &inst.matrix;
    Ok(DistanceMatrix::from_fn(m.n(), |i, j| {
        let v = m.get(i, j);
        if v == 4.0 {
            3.0
        } else {
            v
        }
    }))
}

/// Result of stabbing a family of closed intervals with one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalStab {
    pub value: f64,
    pub hit_count: usize,
    pub intervals: Vec<(f64, f64)>,
}

/// Number of closed intervals containing `x`.
pub fn stab_count(intervals: &[(f64, f64)], x: f64) -> usize {
    intervals
        .iter()
        .filter(|&&(lo, hi)| lo <= x && x <= hi)
        .count()
}

/// Smallest point covered by the maximum number of closed intervals.
///
/// An empty family yields value 0 with zero hits.
pub fn stab_intervals(intervals: Vec<(f64, f64)>) -> IntervalStab {
    // opens (0) sort before closes (1) at equal coordinates: closed endpoints
    let mut events: Vec<(f64, u8)> = intervals
        .iter()
        .flat_map(|&(lo, hi)| [(lo, 0u8), (hi, 1u8)])
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mut best, mut value, mut cur) = (0usize, 0.0, 0usize);
    for (x, kind) in events {
        if kind == 0 {
            cur += 1;
            if cur > best {
                best = cur;
                value = x;
            }
        } else {
            cur -= 1;
        }
    }
    IntervalStab {
        value,
        hit_count: best,
        intervals,
    }
}

/// The weight for pair `(i, j)` that leaves the fewest violating triangles through it.
///
/// Third point `k` contributes `[|M(i,k) − M(j,k)|, M(i,k) + M(j,k)]`; setting
/// `M(i,j)` to the returned value leaves `n − 2 − hit_count` violating triangles
/// through `(i, j)`.
pub fn optimal_edge_value(m: &DistanceMatrix, i: usize, j: usize) -> Result<IntervalStab> {
    let n = m.n();
    if n < 3 {
        return Err(Error::param(format!(
            "optimal_edge_value needs n >= 3, got {n}"
        )));
    }
    if i == j || i >= n || j >= n {
        return Err(Error::param(format!("invalid pair ({i},{j}) for n = {n}")));
    }
    let intervals = (0..n)
        .filter(|&k| k != i && k != j)
        .map(|k| {
            let (a, b) = (m.get(i, k), m.get(j, k));
            ((a - b).abs(), a + b)
        })
        .collect();
    Ok(stab_intervals(intervals))
}
