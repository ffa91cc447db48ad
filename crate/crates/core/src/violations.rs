//! Violation predicates, certificates, and exhaustive enumerators.
//!
//! All predicates use strict inequality: ties are never violations. Each has a
//! `_tol` variant taking a non-negative slack that must be exceeded; the plain
//! versions use zero slack.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DistanceMatrix;

/// Default size cap for O(n^3) enumeration.
pub const TRIPLE_CAP: usize = 512;
/// Default size cap for O(n^4) enumeration.
pub const QUADRUPLE_CAP: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationKind {
    Triangle,
    UltraTriple,
    TreeQuadruple,
}

impl ViolationKind {
    pub fn arity(self) -> usize {
        match self {
            ViolationKind::Triangle | ViolationKind::UltraTriple => 3,
            ViolationKind::TreeQuadruple => 4,
        }
    }

    pub fn default_cap(self) -> usize {
        match self {
            ViolationKind::TreeQuadruple => QUADRUPLE_CAP,
            _ => TRIPLE_CAP,
        }
    }
}

#[inline]
pub fn is_violating_triangle(a: f64, b: f64, c: f64) -> bool {
    is_violating_triangle_tol(a, b, c, 0.0)
}

#[inline]
pub fn is_violating_triangle_tol(a: f64, b: f64, c: f64, tol: f64) -> bool {
    let max = a.max(b).max(c);
    max > (a + b + c) - max + tol
}

/// True iff the largest of the three values is strictly larger than both others.
#[inline]
pub fn is_violating_ultra_triple(a: f64, b: f64, c: f64) -> bool {
    is_violating_ultra_triple_tol(a, b, c, 0.0)
}

#[inline]
pub fn is_violating_ultra_triple_tol(a: f64, b: f64, c: f64, tol: f64) -> bool {
    let (hi, mid) = top_two(a, b, c);
    hi > mid + tol
}

/// Four-point check on the six distances of `i<j<k<l` given in the order
/// `ij, ik, il, jk, jl, kl`: violating iff the largest matching sum is unique.
#[inline]
pub fn is_violating_tree_quadruple(
    d_ij: f64,
    d_ik: f64,
    d_il: f64,
    d_jk: f64,
    d_jl: f64,
    d_kl: f64,
) -> bool {
    is_violating_tree_quadruple_tol([d_ij, d_ik, d_il, d_jk, d_jl, d_kl], 0.0)
}

#[inline]
pub fn is_violating_tree_quadruple_tol(d: [f64; 6], tol: f64) -> bool {
    let (s1, s2, s3) = matchings(d);
    let (hi, mid) = top_two(s1, s2, s3);
    hi > mid + tol
}

/// The three perfect matching sums `(ij+kl, ik+jl, il+jk)`.
#[inline]
pub fn matchings(d: [f64; 6]) -> (f64, f64, f64) {
    (d[0] + d[5], d[1] + d[4], d[2] + d[3])
}

#[inline]
fn top_two(a: f64, b: f64, c: f64) -> (f64, f64) {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if c >= hi {
        (c, hi)
    } else {
        (hi, lo.max(c))
    }
}

/// A certificate that a matrix is outside a class.
///
/// `indices` are strictly increasing; `values` are the pairwise distances over
/// sorted index pairs (`ij, ik, jk` or `ij, ik, il, jk, jl, kl`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Violation {
    /// Builds the canonical record for a point set, reading values from `m`.
    pub fn from_points(kind: ViolationKind, m: &DistanceMatrix, points: &[usize]) -> Self {
        let mut indices = points.to_vec();
        indices.sort_unstable();
        let values = sorted_pairs(&indices).map(|(a, b)| m.get(a, b)).collect();
        Self {
            kind,
            indices,
            values,
        }
    }

    /// Evaluates the kind's predicate on the stored values.
    pub fn predicate_holds(&self) -> bool {
        predicate(self.kind, &self.values, 0.0)
    }

    /// Re-reads the values from `m` and re-checks the predicate.
    pub fn verify(&self, m: &DistanceMatrix) -> bool {
        let arity_ok = self.indices.len() == self.kind.arity()
            && self.indices.windows(2).all(|w| w[0] < w[1])
            && self.indices.iter().all(|&i| i < m.n());
        if !arity_ok {
            return false;
        }
        let fresh = Self::from_points(self.kind, m, &self.indices);
        fresh.values == self.values && fresh.predicate_holds()
    }

    /// Unordered pairs covered by the violation, sorted.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        sorted_pairs(&self.indices)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("violation serializes")
    }
}

fn sorted_pairs(idx: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..idx.len()).flat_map(move |a| (a + 1..idx.len()).map(move |b| (idx[a], idx[b])))
}

pub(crate) fn predicate(kind: ViolationKind, v: &[f64], tol: f64) -> bool {
    match kind {
        ViolationKind::Triangle => is_violating_triangle_tol(v[0], v[1], v[2], tol),
        ViolationKind::UltraTriple => is_violating_ultra_triple_tol(v[0], v[1], v[2], tol),
        ViolationKind::TreeQuadruple => {
            is_violating_tree_quadruple_tol([v[0], v[1], v[2], v[3], v[4], v[5]], tol)
        }
    }
}

/// Predicate on point indices of `m` (any order for triples; sorted internally).
pub fn violates(m: &DistanceMatrix, kind: ViolationKind, points: &[usize]) -> bool {
    let mut p = points.to_vec();
    p.sort_unstable();
    let vals: Vec<f64> = sorted_pairs(&p).map(|(a, b)| m.get(a, b)).collect();
    predicate(kind, &vals, 0.0)
}

fn check_cap(m: &DistanceMatrix, cap: usize) -> Result<()> {
    if m.n() > cap {
        Err(Error::CapExceeded { n: m.n(), cap })
    } else {
        Ok(())
    }
}

/// Every violation of `kind`, lexicographically sorted, with the default cap.
pub fn enumerate_violations(m: &DistanceMatrix, kind: ViolationKind) -> Result<Vec<Violation>> {
    enumerate_violations_capped(m, kind, kind.default_cap())
}

pub fn enumerate_violations_capped(
    m: &DistanceMatrix,
    kind: ViolationKind,
    cap: usize,
) -> Result<Vec<Violation>> {
    check_cap(m, cap)?;
    let n = m.n();
    let per_first: Vec<Vec<Violation>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            match kind {
                ViolationKind::TreeQuadruple => {
                    for j in i + 1..n {
                        for k in j + 1..n {
                            for l in k + 1..n {
                                let d = [
                                    m.get(i, j),
                                    m.get(i, k),
                                    m.get(i, l),
                                    m.get(j, k),
                                    m.get(j, l),
                                    m.get(k, l),
                                ];
                                if is_violating_tree_quadruple_tol(d, 0.0) {
                                    out.push(Violation {
                                        kind,
                                        indices: vec![i, j, k, l],
                                        values: d.to_vec(),
                                    });
                                }
                            }
                        }
                    }
                }
                _ => {
                    for j in i + 1..n {
                        let a = m.get(i, j);
                        for k in j + 1..n {
                            let v = [a, m.get(i, k), m.get(j, k)];
                            if predicate(kind, &v, 0.0) {
                                out.push(Violation {
                                    kind,
                                    indices: vec![i, j, k],
                                    values: v.to_vec(),
                                });
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    Ok(per_first.into_iter().flatten().collect())
}

/// Number of violations without materializing them.
pub fn count_violations(m: &DistanceMatrix, kind: ViolationKind) -> Result<usize> {
    Ok(enumerate_violations(m, kind)?.len())
}

/// Per-vertex and per-pair counts over the full violating-triangle set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleDegreeCensus {
    pub vertex_degree: Vec<u64>,
    pub pair_degree: BTreeMap<(usize, usize), u64>,
    pub total: u64,
}

impl TriangleDegreeCensus {
    pub fn pair(&self, i: usize, j: usize) -> u64 {
        let key = (i.min(j), i.max(j));
        self.pair_degree.get(&key).copied().unwrap_or(0)
    }

    pub fn max_pair_degree(&self) -> u64 {
        self.pair_degree.values().copied().max().unwrap_or(0)
    }
}

pub fn triangle_census(m: &DistanceMatrix) -> Result<TriangleDegreeCensus> {
    let tris = enumerate_violations(m, ViolationKind::Triangle)?;
    Ok(census_of(m.n(), &tris))
}

pub(crate) fn census_of(n: usize, tris: &[Violation]) -> TriangleDegreeCensus {
    let mut c = TriangleDegreeCensus {
        vertex_degree: vec![0; n],
        pair_degree: BTreeMap::new(),
        total: tris.len() as u64,
    };
    for t in tris {
        for &i in &t.indices {
            c.vertex_degree[i] += 1;
        }
        for p in t.pairs() {
            *c.pair_degree.entry(p).or_insert(0) += 1;
        }
    }
    c
}

/// Greedy maximal set of pairwise edge-disjoint violating triangles.
///
/// Triangles are considered in increasing order of the summed pair degrees of
/// their three sides, ties broken lexicographically. The result is maximal:
/// every other violating triangle shares a pair with a packed one.
pub fn greedy_edge_disjoint_pack(m: &DistanceMatrix) -> Result<Vec<Violation>> {
    let tris = enumerate_violations(m, ViolationKind::Triangle)?;
    let census = census_of(m.n(), &tris);
    let mut order: Vec<(u64, usize)> = tris
        .iter()
        .enumerate()
        .map(|(idx, t)| (t.pairs().map(|(a, b)| census.pair(a, b)).sum(), idx))
        .collect();
    order.sort_unstable();
    let n = m.n();
    let mut used = vec![false; n * n];
    let mut pack = Vec::new();
    for (_, idx) in order {
        let t = &tris[idx];
        if t.pairs().any(|(a, b)| used[a * n + b]) {
            continue;
        }
        for (a, b) in t.pairs() {
            used[a * n + b] = true;
        }
        pack.push(t.clone());
    }
    pack.sort_by(|a, b| a.indices.cmp(&b.indices));
    Ok(pack)
}

/// True iff no two violations share an unordered pair.
pub fn pairwise_edge_disjoint(vs: &[Violation]) -> bool {
    let mut seen = std::collections::HashSet::new();
    vs.iter().flat_map(|v| v.pairs()).all(|p| seen.insert(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn triangle_predicate_examples() {
        assert!(is_violating_triangle(1.0, 2.0, 4.0));
        assert!(!is_violating_triangle(2.0, 2.0, 2.0));
        assert!(!is_violating_triangle(3.0, 4.0, 5.0));
        assert!(!is_violating_triangle(1.0, 2.0, 3.0));
    }

    #[test]
    fn ultra_predicate_examples() {
        assert!(is_violating_ultra_triple(20.0, 21.0, 22.0));
        assert!(!is_violating_ultra_triple(5.0, 5.0, 3.0));
        assert!(is_violating_ultra_triple(1.0, 1.0, 2.0));
    }

    #[test]
    fn tree_predicate_examples() {
        // n = 10: x1,x2,x3 with y: d(x,x) = 20, d(x_i, y) = 20 + i
        // ij=20 ik=20 il=21 jk=20 jl=22 kl=23 -> matchings 43, 42, 41
        let d = [20.0, 20.0, 21.0, 20.0, 22.0, 23.0];
        assert_eq!(matchings(d), (43.0, 42.0, 41.0));
        assert!(is_violating_tree_quadruple_tol(d, 0.0));
        assert!(!is_violating_tree_quadruple(5.0, 5.0, 5.0, 5.0, 5.0, 5.0));
        // matchings (10, 10, 7)
        assert!(!is_violating_tree_quadruple(5.0, 5.0, 3.0, 4.0, 5.0, 5.0));
    }

    #[test]
    fn tolerance_absorbs_small_excess() {
        assert!(!is_violating_triangle_tol(1.0, 1.0, 2.5, 0.5));
        assert!(is_violating_triangle_tol(1.0, 1.0, 2.5, 0.25));
        assert!(!is_violating_ultra_triple_tol(1.0, 1.0, 1.1, 0.2));
    }

    #[test]
    fn exact_metric_has_no_violations() {
        let m = DistanceMatrix::from_fn(20, |i, j| (j - i) as f64);
        assert!(enumerate_violations(&m, ViolationKind::Triangle)
            .unwrap()
            .is_empty());
        assert!(greedy_edge_disjoint_pack(&m).unwrap().is_empty());
        let c = triangle_census(&m).unwrap();
        assert_eq!(c.total, 0);
        assert!(c.vertex_degree.iter().all(|&d| d == 0));
    }

    #[test]
    fn cap_is_enforced() {
        let m = DistanceMatrix::zeros(6);
        assert!(matches!(
            enumerate_violations_capped(&m, ViolationKind::Triangle, 5),
            Err(Error::CapExceeded { n: 6, cap: 5 })
        ));
    }

    #[test]
    fn certificates_verify_and_detect_tampering() {
        let mut m = DistanceMatrix::from_fn(4, |_, _| 2.0);
        m.set_sym(0, 3, 5.0);
        let vs = enumerate_violations(&m, ViolationKind::Triangle).unwrap();
        assert_eq!(vs.len(), 2);
        assert!(vs.iter().all(|v| v.verify(&m)));
        let mut bad = vs[0].clone();
        bad.values[0] = 9.0;
        assert!(!bad.verify(&m));
        let line = vs[0].to_json_line();
        assert!(line.starts_with("{\"kind\":\"Triangle\",\"indices\":[0,1,3]"));
    }

    fn arb_vals() -> impl Strategy<Value = [f64; 6]> {
        prop::array::uniform6(1u8..6).prop_map(|a| a.map(f64::from))
    }

    proptest! {
        #[test]
        fn triple_predicates_are_permutation_invariant(a in 0u8..8, b in 0u8..8, c in 0u8..8) {
            let (a, b, c) = (a as f64, b as f64, c as f64);
            for (x, y, z) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                prop_assert_eq!(is_violating_triangle(x, y, z), is_violating_triangle(a, b, c));
                prop_assert_eq!(is_violating_ultra_triple(x, y, z), is_violating_ultra_triple(a, b, c));
            }
        }

        #[test]
        fn tree_predicate_invariant_under_relabeling(d in arb_vals()) {
            let m = DistanceMatrix::from_fn(4, |i, j| {
                let idx = [[0, 0, 1, 2], [0, 0, 3, 4], [1, 3, 0, 5], [2, 4, 5, 0]];
                d[idx[i][j]]
            });
            let base = violates(&m, ViolationKind::TreeQuadruple, &[0, 1, 2, 3]);
            let mut perm = [0usize, 1, 2, 3];
            // all 24 relabelings via Heap's algorithm
            let mut c = [0usize; 4];
            let mut i = 0;
            let check = |p: &[usize; 4]| {
                let pm = m.permuted(p);
                violates(&pm, ViolationKind::TreeQuadruple, &[0, 1, 2, 3]) == base
            };
            prop_assert!(check(&perm));
            while i < 4 {
                if c[i] < i {
                    if i % 2 == 0 { perm.swap(0, i) } else { perm.swap(c[i], i) }
                    prop_assert!(check(&perm));
                    c[i] += 1;
                    i = 0;
                } else {
                    c[i] = 0;
                    i += 1;
                }
            }
        }

        #[test]
        fn enumeration_matches_subset_replay(
            n in 3usize..9,
            vals in prop::collection::vec(1u8..6, 64),
        ) {
            let m = DistanceMatrix::from_fn(n, |i, j| vals[i * 8 + j] as f64);
            for kind in [ViolationKind::Triangle, ViolationKind::UltraTriple, ViolationKind::TreeQuadruple] {
                let got = enumerate_violations(&m, kind).unwrap();
                let mut want = Vec::new();
                let k = kind.arity();
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize != k { continue; }
                    let pts: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
                    if violates(&m, kind, &pts) { want.push(pts); }
                }
                want.sort();
                let got_idx: Vec<Vec<usize>> = got.iter().map(|v| v.indices.clone()).collect();
                prop_assert_eq!(got_idx, want);
            }
        }

        #[test]
        fn pack_is_disjoint_and_maximal(
            n in 3usize..10,
            vals in prop::collection::vec(1u8..8, 100),
        ) {
            let m = DistanceMatrix::from_fn(n, |i, j| vals[i * 10 + j] as f64);
            let all = enumerate_violations(&m, ViolationKind::Triangle).unwrap();
            let pack = greedy_edge_disjoint_pack(&m).unwrap();
            prop_assert!(pairwise_edge_disjoint(&pack));
            for t in &all {
                if pack.contains(t) { continue; }
                let mut with = pack.clone();
                with.push(t.clone());
                prop_assert!(!pairwise_edge_disjoint(&with));
            }
            let census = census_of(n, &all);
            let c: u64 = census.vertex_degree.iter().sum();
            prop_assert_eq!(c, 3 * census.total);
            let p: u64 = census.pair_degree.values().sum();
            prop_assert_eq!(p, 3 * census.total);
        }
    }
}
