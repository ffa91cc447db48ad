//! Skeleton partitions and corruption census.
//!
//! Given a sampled set `S`, points outside `S` are grouped by their probe
//! vectors (distances to `S` for ultrametrics, distance differences for tree
//! metrics). Pairs that contradict what `S` forces are separator corruptions
//! (different parts) or easy-to-detect corruptions (same part); each yields a
//! violation together with its witnesses in `S`. Parts are then classified as
//! easy, versatile (by a sufficient proxy), or active.
//!
//! Conventions:
//! * quadruples are over distinct points only;
//! * corruption counts are unordered pairs, part thresholds use ordered entries;
//! * an inconsistent `S` has no parts and no active entries (a violation is
//!   already present inside `S`).

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DistanceMatrix;
use crate::stats::{mean_stderr, trial_rng, Z95};
use crate::violations::{
    is_violating_tree_quadruple, is_violating_ultra_triple, Violation, ViolationKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkeletonKind {
    Ultra,
    Tree,
}

impl SkeletonKind {
    pub fn violation_kind(self) -> ViolationKind {
        match self {
            SkeletonKind::Ultra => ViolationKind::UltraTriple,
            SkeletonKind::Tree => ViolationKind::TreeQuadruple,
        }
    }
}

impl std::str::FromStr for SkeletonKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ultra" => Ok(SkeletonKind::Ultra),
            "tree" => Ok(SkeletonKind::Tree),
            other => Err(Error::param(format!("unknown skeleton kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartClass {
    Easy,
    VersatileProxy,
    Active,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionClass {
    None,
    SeparatorCorruption,
    EasyToDetect,
}

/// Classification details for one part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartSummary {
    pub class: PartClass,
    /// Ordered off-diagonal entries that are easy-to-detect corruptions.
    pub ec_entries: usize,
    /// Frequency of the most common value among the remaining off-diagonal entries.
    pub r1: usize,
    /// `|P|² − r1`.
    pub deficit: usize,
    /// `(|P|/n)·eps·n²/2`.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonState {
    pub s: Vec<usize>,
    pub kind: SkeletonKind,
    pub consistent: bool,
    pub inconsistent_points: Vec<usize>,
    pub parts: Vec<Vec<usize>>,
    pub part_summaries: Vec<PartSummary>,
    pub sc_count: usize,
    pub ec_count: usize,
    pub active_entries: usize,
    pub active_mass: f64,
    /// Tree kind: the point `u₀ = min(S)` the probe differences are taken against.
    pub pivot: Option<usize>,
}

impl SkeletonState {
    pub fn classes(&self) -> impl Iterator<Item = PartClass> + '_ {
        self.part_summaries.iter().map(|p| p.class)
    }
}

const NO_PART: usize = usize::MAX;

#[inline]
fn key(v: f64) -> u64 {
    (v + 0.0).to_bits()
}

/// Incrementally maintained skeleton over a growing `S`.
///
/// Adding a point only refines parts and can only turn consistent points
/// inconsistent, so each addition costs `O(n·|S|)` (ultra) or `O(n·|S|²)` (tree).
#[derive(Clone, Debug)]
pub struct SkeletonBuilder<'m> {
    m: &'m DistanceMatrix,
    kind: SkeletonKind,
    s: Vec<usize>,
    in_s: Vec<bool>,
    consistent: bool,
    point_ok: Vec<bool>,
    part_of: Vec<usize>,
    next_label: usize,
    min_to_s: Vec<f64>,
}

impl<'m> SkeletonBuilder<'m> {
    pub fn new(m: &'m DistanceMatrix, kind: SkeletonKind) -> Self {
        let n = m.n();
        Self {
            m,
            kind,
            s: Vec::new(),
            in_s: vec![false; n],
            consistent: true,
            point_ok: vec![true; n],
            part_of: vec![0; n],
            next_label: 1,
            min_to_s: vec![f64::INFINITY; n],
        }
    }

    pub fn s(&self) -> &[usize] {
        &self.s
    }

    pub fn is_consistent(&self) -> bool {
        self.consistent
    }

    /// Adds `x` to `S`; re-adding a member is a no-op.
    pub fn add(&mut self, x: usize) {
        if self.in_s[x] {
            return;
        }
        let m = self.m;
        let old_s = self.s.clone();
        if !self.point_ok[x] {
            self.consistent = false;
        }
        self.in_s[x] = true;
        self.s.push(x);
        self.part_of[x] = NO_PART;
        if !self.consistent {
            return;
        }
        let n = m.n();
        let anchor = old_s.first().copied();
        let mut relabel: HashMap<(usize, u64), usize> = HashMap::new();
        for j in 0..n {
            if self.in_s[j] {
                continue;
            }
            self.min_to_s[j] = self.min_to_s[j].min(m.get(j, x));
            if !self.point_ok[j] {
                continue;
            }
            if !self.still_consistent(j, x, &old_s) {
                self.point_ok[j] = false;
                self.part_of[j] = NO_PART;
                continue;
            }
            let probe = match (self.kind, anchor) {
                (SkeletonKind::Ultra, _) => m.get(j, x),
                (SkeletonKind::Tree, Some(p)) => m.get(j, x) - m.get(j, p),
                (SkeletonKind::Tree, None) => 0.0,
            };
            let next = &mut self.next_label;
            let label = *relabel
                .entry((self.part_of[j], key(probe)))
                .or_insert_with(|| {
                    *next += 1;
                    *next - 1
                });
            self.part_of[j] = label;
        }
    }

    fn still_consistent(&self, j: usize, x: usize, old_s: &[usize]) -> bool {
        let m = self.m;
        match self.kind {
            SkeletonKind::Ultra => old_s
                .iter()
                .all(|&a| !is_violating_ultra_triple(m.get(j, x), m.get(j, a), m.get(x, a))),
            SkeletonKind::Tree => {
                for (ia, &a) in old_s.iter().enumerate() {
                    for &b in &old_s[ia + 1..] {
                        if crate::violations::violates(
                            m,
                            ViolationKind::TreeQuadruple,
                            &[j, x, a, b],
                        ) {
                            return false;
                        }
                    }
                }
                true
            }
        }
    }

    /// Current parts, each sorted, ordered by smallest member.
    pub fn parts(&self) -> Vec<Vec<usize>> {
        if !self.consistent {
            return Vec::new();
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for (j, &label) in self.part_of.iter().enumerate() {
            if label != NO_PART && !self.in_s[j] && self.point_ok[j] {
                groups.entry(label).or_default().push(j);
            }
        }
        let mut parts: Vec<Vec<usize>> = groups.into_values().collect();
        parts.sort_by_key(|p| p[0]);
        parts
    }

    pub fn inconsistent_points(&self) -> Vec<usize> {
        (0..self.m.n())
            .filter(|&j| !self.in_s[j] && (!self.point_ok[j] || !self.consistent))
            .collect()
    }

    fn pivot(&self) -> Option<usize> {
        match self.kind {
            SkeletonKind::Ultra => None,
            SkeletonKind::Tree => self.s.iter().copied().min(),
        }
    }

    /// Tree kind: `min_{u≠v∈S} (c_u + c_v − M(u,v))` for the part of `rep`.
    fn tree_ec_threshold(&self, rep: usize, pivot: usize) -> f64 {
        let m = self.m;
        let c = |u: usize| m.get(rep, u) - m.get(rep, pivot);
        let mut best = f64::INFINITY;
        for (a, &u) in self.s.iter().enumerate() {
            for &v in &self.s[a + 1..] {
                best = best.min(c(u) + c(v) - m.get(u, v));
            }
        }
        best
    }

    /// Whether same-part pair `(j, k)` is easy-to-detect, and the value
    /// entering the `r₁` census otherwise.
    fn same_part_entry(
        &self,
        j: usize,
        k: usize,
        pivot: Option<usize>,
        threshold: f64,
    ) -> (bool, f64) {
        let m = self.m;
        match (self.kind, pivot) {
            (SkeletonKind::Ultra, _) => (m.get(j, k) > self.min_to_s[j], m.get(j, k)),
            (SkeletonKind::Tree, Some(p)) => {
                let masked = m.get(j, k) - m.get(j, p) - m.get(k, p);
                (masked > threshold, masked)
            }
            (SkeletonKind::Tree, None) => (false, m.get(j, k)),
        }
    }

    /// Classifies one part of the current skeleton.
    pub fn classify(&self, part: &[usize], eps: f64) -> PartSummary {
        let n = self.m.n();
        let pivot = self.pivot();
        let threshold_ec = match (self.kind, pivot, part.first()) {
            (SkeletonKind::Tree, Some(p), Some(&rep)) => self.tree_ec_threshold(rep, p),
            _ => f64::INFINITY,
        };
        let mut ec_entries = 0usize;
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for (a, &j) in part.iter().enumerate() {
            for &k in &part[a + 1..] {
                let (ec, v) = self.same_part_entry(j, k, pivot, threshold_ec);
                if ec {
                    ec_entries += 2;
                } else {
                    *counts.entry(key(v)).or_insert(0) += 2;
                }
            }
        }
        let p = part.len();
        let off = p * p.saturating_sub(1);
        let r1 = counts.values().copied().max().unwrap_or(0);
        let deficit = p * p - r1;
        let threshold = (p as f64 / n as f64) * eps * (n * n) as f64 / 2.0;
        let class = if off > 0 && 2 * ec_entries >= off {
            PartClass::Easy
        } else if (deficit as f64) < threshold {
            PartClass::VersatileProxy
        } else {
            PartClass::Active
        };
        PartSummary {
            class,
            ec_entries,
            r1,
            deficit,
            threshold,
        }
    }

    /// `|A(M, S)|`: total `|P|²` over active parts.
    pub fn active_entries(&self, eps: f64) -> usize {
        self.parts()
            .iter()
            .filter(|p| self.classify(p, eps).class == PartClass::Active)
            .map(|p| p.len() * p.len())
            .sum()
    }

    /// Full snapshot including the separator/easy-to-detect census.
    pub fn state(&self, eps: f64) -> SkeletonState {
        let n = self.m.n();
        let parts = self.parts();
        let part_summaries: Vec<PartSummary> =
            parts.iter().map(|p| self.classify(p, eps)).collect();
        let active_entries: usize = parts
            .iter()
            .zip(&part_summaries)
            .filter(|(_, s)| s.class == PartClass::Active)
            .map(|(p, _)| p.len() * p.len())
            .sum();
        let (mut sc_count, mut ec_count) = (0, 0);
        if self.consistent {
            let members: Vec<usize> = parts.iter().flatten().copied().collect();
            let counts: Vec<(usize, usize)> = members
                .par_iter()
                .enumerate()
                .map(|(a, &j)| {
                    let (mut sc, mut ec) = (0, 0);
                    for &k in &members[a + 1..] {
                        match self.pair_class(j, k).0 {
                            CorruptionClass::SeparatorCorruption => sc += 1,
                            CorruptionClass::EasyToDetect => ec += 1,
                            CorruptionClass::None => {}
                        }
                    }
                    (sc, ec)
                })
                .collect();
            for (sc, ec) in counts {
                sc_count += sc;
                ec_count += ec;
            }
        }
        SkeletonState {
            s: self.s.clone(),
            kind: self.kind,
            consistent: self.consistent,
            inconsistent_points: self.inconsistent_points(),
            parts,
            part_summaries,
            sc_count,
            ec_count,
            active_entries,
            active_mass: active_entries as f64 / (n * n).max(1) as f64,
            pivot: self.pivot(),
        }
    }

    fn same_part(&self, j: usize, k: usize) -> bool {
        self.part_of[j] == self.part_of[k]
    }

    /// Classification of a pair of consistent points plus a witness set that
    /// forms a violation with them.
    fn pair_class(&self, j: usize, k: usize) -> (CorruptionClass, Option<Vec<usize>>) {
        let m = self.m;
        let s = &self.s;
        if self.same_part(j, k) {
            match self.kind {
                SkeletonKind::Ultra => {
                    let hit = s.iter().find(|&&i| m.get(j, k) > m.get(j, i));
                    match hit {
                        Some(&i) => (CorruptionClass::EasyToDetect, Some(vec![i, j, k])),
                        None => (CorruptionClass::None, None),
                    }
                }
                SkeletonKind::Tree => {
                    for (a, &u) in s.iter().enumerate() {
                        for &v in &s[a + 1..] {
                            if m.get(j, k) + m.get(u, v) > m.get(j, u) + m.get(k, v) {
                                return (CorruptionClass::EasyToDetect, Some(vec![u, v, j, k]));
                            }
                        }
                    }
                    (CorruptionClass::None, None)
                }
            }
        } else {
            match self.kind {
                SkeletonKind::Ultra => {
                    for &i in s {
                        let (a, b) = (m.get(i, j), m.get(i, k));
                        if a != b && m.get(j, k) != a.max(b) {
                            return (CorruptionClass::SeparatorCorruption, Some(vec![i, j, k]));
                        }
                    }
                    (CorruptionClass::None, None)
                }
                SkeletonKind::Tree => {
                    for (a, &u) in s.iter().enumerate() {
                        for &v in &s[a + 1..] {
                            let (ju, jv, ku, kv) =
                                (m.get(j, u), m.get(j, v), m.get(k, u), m.get(k, v));
                            if ju - jv != ku - kv
                                && m.get(j, k) + m.get(u, v) != (ju + kv).max(jv + ku)
                            {
                                return (
                                    CorruptionClass::SeparatorCorruption,
                                    Some(vec![u, v, j, k]),
                                );
                            }
                        }
                    }
                    (CorruptionClass::None, None)
                }
            }
        }
    }

    fn check_pair(&self, j: usize, k: usize) -> Result<()> {
        let n = self.m.n();
        for x in [j, k] {
            if x >= n || self.in_s[x] {
                return Err(Error::param(format!("point {x} is in S or out of range")));
            }
            if !self.consistent || !self.point_ok[x] {
                return Err(Error::param(format!("point {x} is inconsistent with S")));
            }
        }
        if j == k {
            return Err(Error::param("pair needs two distinct points"));
        }
        Ok(())
    }
}

/// Builds the skeleton of `S` (order is irrelevant; duplicates are ignored).
pub fn build_skeleton(
    m: &DistanceMatrix,
    s: &[usize],
    kind: SkeletonKind,
    eps: f64,
) -> SkeletonState {
    let mut b = SkeletonBuilder::new(m, kind);
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    // consistency of S itself is decided on the whole set, not incrementally
    let consistent = set_consistent(m, &sorted, kind);
    for &x in &sorted {
        b.add(x);
    }
    if consistent != b.consistent {
        // unreachable in exact arithmetic: a point extending a consistent set
        // is exactly a consistent point
        b.consistent = consistent;
    }
    b.state(eps)
}

fn set_consistent(m: &DistanceMatrix, s: &[usize], kind: SkeletonKind) -> bool {
    let sub = m.submatrix(s);
    let k = s.len();
    match kind {
        SkeletonKind::Ultra => (0..k).all(|a| {
            (a + 1..k).all(|b| {
                (b + 1..k).all(|c| {
                    !is_violating_ultra_triple(sub.get(a, b), sub.get(a, c), sub.get(b, c))
                })
            })
        }),
        SkeletonKind::Tree => (0..k).all(|a| {
            (a + 1..k).all(|b| {
                (b + 1..k).all(|c| {
                    (c + 1..k).all(|d| {
                        !is_violating_tree_quadruple(
                            sub.get(a, b),
                            sub.get(a, c),
                            sub.get(a, d),
                            sub.get(b, c),
                            sub.get(b, d),
                            sub.get(c, d),
                        )
                    })
                })
            })
        }),
    }
}

/// Classifies a pair of consistent points outside `S`.
pub fn classify_corruption_pair(
    m: &DistanceMatrix,
    s: &[usize],
    j: usize,
    k: usize,
    kind: SkeletonKind,
) -> Result<CorruptionClass> {
    Ok(corruption_with_witness(m, s, j, k, kind)?.0)
}

/// As [`classify_corruption_pair`], also returning the violation the pair
/// forms with its witnesses in `S`.
pub fn corruption_with_witness(
    m: &DistanceMatrix,
    s: &[usize],
    j: usize,
    k: usize,
    kind: SkeletonKind,
) -> Result<(CorruptionClass, Option<Violation>)> {
    let mut b = SkeletonBuilder::new(m, kind);
    for &x in s {
        b.add(x);
    }
    b.check_pair(j, k)?;
    let (class, pts) = b.pair_class(j, k);
    Ok((
        class,
        pts.map(|p| Violation::from_points(kind.violation_kind(), m, &p)),
    ))
}

/// Classifies part `p` of the skeleton over `S`.
pub fn classify_part(
    m: &DistanceMatrix,
    s: &[usize],
    p: &[usize],
    eps: f64,
    kind: SkeletonKind,
) -> PartClass {
    let mut b = SkeletonBuilder::new(m, kind);
    for &x in s {
        b.add(x);
    }
    b.classify(p, eps).class
}

/// Per-step summary of `|A(M, S_t)|` across trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub step: usize,
    pub mean: f64,
    pub stderr: f64,
    /// 95% normal-approximation half-width.
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub kind: SkeletonKind,
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<DecayRow>,
    /// `trajectories[trial][step]`.
    pub trajectories: Vec<Vec<usize>>,
}

impl DecayTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,mean,stderr,half_width,trials,seed\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step, r.mean, r.stderr, r.half_width, self.trials, self.seed
            ));
        }
        s
    }
}

/// Grows `S` by one uniform index per step and records `|A(M, S)|`
/// (step 0 is `S = ∅`). Trials run in parallel with per-trial generators.
pub fn decay_experiment(
    m: &DistanceMatrix,
    kind: SkeletonKind,
    eps: f64,
    steps: usize,
    trials: usize,
    seed: u64,
) -> DecayTable {
    let n = m.n();
    let trajectories: Vec<Vec<usize>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let mut b = SkeletonBuilder::new(m, kind);
            let mut traj = Vec::with_capacity(steps + 1);
            traj.push(b.active_entries(eps));
            for _ in 0..steps {
                b.add(rng.gen_range(0..n));
                traj.push(b.active_entries(eps));
            }
            traj
        })
        .collect();
    let rows = (0..=steps)
        .map(|step| {
            let xs: Vec<f64> = trajectories.iter().map(|t| t[step] as f64).collect();
            let (mean, stderr) = mean_stderr(&xs);
            DecayRow {
                step,
                mean,
                stderr,
                half_width: Z95 * stderr,
            }
        })
        .collect();
    DecayTable {
        kind,
        eps,
        trials,
        seed,
        rows,
        trajectories,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{
        gen_random_tree, gen_random_ultra, gen_sample_lb, sample_lb_unpermuted,
    };

    #[test]
    fn empty_s_is_one_part() {
        let m = gen_random_ultra(12, 1).matrix;
        let st = build_skeleton(&m, &[], SkeletonKind::Ultra, 0.1);
        assert!(st.consistent);
        assert_eq!(st.parts, vec![(0..12).collect::<Vec<_>>()]);
    }

    #[test]
    fn sample_lb_single_bad_probe_gives_singletons() {
        let n = 20;
        let m = sample_lb_unpermuted(n, 0.2).unwrap();
        // bad group is 16..20; probe with y = 16
        let st = build_skeleton(&m, &[16], SkeletonKind::Ultra, 0.2);
        let singles = st
            .parts
            .iter()
            .filter(|p| p.len() == 1 && p[0] < 16)
            .count();
        assert_eq!(singles, 16);
        assert!(st.parts.contains(&vec![17, 18, 19]));
    }

    #[test]
    fn in_class_matrices_have_no_corruptions() {
        for seed in 0..5 {
            let u = gen_random_ultra(24, seed).matrix;
            let st = build_skeleton(&u, &[0, 5, 9], SkeletonKind::Ultra, 0.1);
            assert!(st.consistent && st.inconsistent_points.is_empty());
            assert_eq!((st.sc_count, st.ec_count), (0, 0));
            let t = gen_random_tree(16, seed, 10).matrix;
            let st = build_skeleton(&t, &[1, 2, 3, 7], SkeletonKind::Tree, 0.1);
            assert!(st.consistent);
            assert_eq!((st.sc_count, st.ec_count), (0, 0));
        }
    }

    #[test]
    fn hand_built_corruptions() {
        // S = {0}; points 1, 2 share M(·,0) = 5 and M(1,2) = 7 > 5
        let ec = DistanceMatrix::from_rows(vec![
            vec![0.0, 5.0, 5.0],
            vec![5.0, 0.0, 7.0],
            vec![5.0, 7.0, 0.0],
        ])
        .unwrap();
        let (class, w) = corruption_with_witness(&ec, &[0], 1, 2, SkeletonKind::Ultra).unwrap();
        assert_eq!(class, CorruptionClass::EasyToDetect);
        assert!(w.unwrap().verify(&ec));

        // S = {0}; M(0,1) = 3, M(0,2) = 5, M(1,2) = 4 != max(3, 5)
        let sc = DistanceMatrix::from_rows(vec![
            vec![0.0, 3.0, 5.0],
            vec![3.0, 0.0, 4.0],
            vec![5.0, 4.0, 0.0],
        ])
        .unwrap();
        let (class, w) = corruption_with_witness(&sc, &[0], 1, 2, SkeletonKind::Ultra).unwrap();
        assert_eq!(class, CorruptionClass::SeparatorCorruption);
        assert!(w.unwrap().verify(&sc));
        assert!(classify_corruption_pair(&sc, &[0], 0, 2, SkeletonKind::Ultra).is_err());
    }

    #[test]
    fn constant_block_is_versatile_and_full_ec_is_easy() {
        let m = DistanceMatrix::from_fn(30, |_, _| 4.0);
        let part: Vec<usize> = (0..10).collect();
        assert_eq!(
            classify_part(&m, &[], &part, 0.2, SkeletonKind::Ultra),
            PartClass::VersatileProxy
        );
        // S = {29} at distance 1 from everybody, inner distances 4: all EC
        let m2 = DistanceMatrix::from_fn(30, |_, j| if j == 29 { 1.0 } else { 4.0 });
        assert_eq!(
            classify_part(&m2, &[29], &part, 0.2, SkeletonKind::Ultra),
            PartClass::Easy
        );
    }

    #[test]
    fn step_zero_of_query_lb_is_n_squared() {
        let inst = crate::generators::gen_query_lb(100, 0.1, 3).unwrap();
        let t = decay_experiment(&inst.matrix, SkeletonKind::Ultra, 0.1, 3, 4, 1);
        assert_eq!(t.rows[0].mean, 10_000.0);
        assert_eq!(t.trajectories.len(), 4);
    }

    #[test]
    fn sample_lb_skeleton_witnesses_verify() {
        let inst = gen_sample_lb(30, 0.2, 5).unwrap();
        let bad = inst.sample_lb_bad_set().unwrap();
        let s = vec![bad[0]];
        let st = build_skeleton(&inst.matrix, &s, SkeletonKind::Ultra, 0.2);
        assert!(st.sc_count > 0);
    }
}
