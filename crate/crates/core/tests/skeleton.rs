use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use ptm_core::generators::{
    corrupt, gen_query_lb, gen_random_tree, gen_random_ultra, gen_sample_lb, instance_rng,
    CorruptionMode,
};
use ptm_core::skeleton::{
    build_skeleton, classify_part, corruption_with_witness, decay_experiment, CorruptionClass,
    PartClass, SkeletonKind,
};
use ptm_core::violations::{enumerate_violations, ViolationKind};
use ptm_core::DistanceMatrix;

fn vkind(kind: SkeletonKind) -> ViolationKind {
    match kind {
        SkeletonKind::Ultra => ViolationKind::UltraTriple,
        SkeletonKind::Tree => ViolationKind::TreeQuadruple,
    }
}

fn set_ok(m: &DistanceMatrix, pts: &[usize], kind: SkeletonKind) -> bool {
    enumerate_violations(&m.submatrix(pts), vkind(kind))
        .unwrap()
        .is_empty()
}

/// Parts by brute force: consistent points grouped on the full probe vector
/// (all distances to S, or all pairwise differences over S × S).
fn naive_parts(m: &DistanceMatrix, s: &[usize], kind: SkeletonKind) -> Option<Vec<Vec<usize>>> {
    if !set_ok(m, s, kind) {
        return None;
    }
    let mut groups: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
    for j in (0..m.n()).filter(|j| !s.contains(j)) {
        let mut with = s.to_vec();
        with.push(j);
        if !set_ok(m, &with, kind) {
            continue;
        }
        let probe: Vec<u64> = match kind {
            SkeletonKind::Ultra => s.iter().map(|&i| m.get(j, i).to_bits()).collect(),
            SkeletonKind::Tree => s
                .iter()
                .flat_map(|&u| {
                    s.iter()
                        .map(move |&v| (m.get(j, u) - m.get(j, v) + 0.0).to_bits())
                })
                .collect(),
        };
        groups.entry(probe).or_default().push(j);
    }
    let mut parts: Vec<Vec<usize>> = groups.into_values().collect();
    parts.sort_by_key(|p| p[0]);
    Some(parts)
}

fn noisy(n: usize, kind: SkeletonKind, seed: u64) -> DistanceMatrix {
    let base = match kind {
        SkeletonKind::Ultra => gen_random_ultra(n, seed),
        SkeletonKind::Tree => gen_random_tree(n, seed, 4),
    };
    corrupt(&base, 0.05, seed, CorruptionMode::UniformRewrite)
        .unwrap()
        .matrix
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parts_match_brute_force(n in 5usize..16, seed: u64, k in 0usize..4, tree: bool) {
        let kind = if tree { SkeletonKind::Tree } else { SkeletonKind::Ultra };
        let m = noisy(n, kind, seed);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut instance_rng(seed));
        let s = &idx[..k];
        let st = build_skeleton(&m, s, kind, 0.1);
        match naive_parts(&m, s, kind) {
            Some(parts) => {
                prop_assert!(st.consistent);
                prop_assert_eq!(&st.parts, &parts);
                let covered = st.parts.iter().map(Vec::len).sum::<usize>() + s.len() + st.inconsistent_points.len();
                prop_assert_eq!(covered, n);
            }
            None => {
                prop_assert!(!st.consistent);
                prop_assert!(st.parts.is_empty());
                prop_assert_eq!(st.active_entries, 0);
            }
        }
    }

    #[test]
    fn corruptions_carry_verified_witnesses(n in 6usize..14, seed: u64, k in 1usize..4, tree: bool) {
        let kind = if tree { SkeletonKind::Tree } else { SkeletonKind::Ultra };
        let m = noisy(n, kind, seed);
        let s: Vec<usize> = (0..k).collect();
        let st = build_skeleton(&m, &s, kind, 0.1);
        let members: Vec<usize> = st.parts.iter().flatten().copied().collect();
        let (mut sc, mut ec) = (0, 0);
        for (a, &j) in members.iter().enumerate() {
            for &k in &members[a + 1..] {
                let (class, w) = corruption_with_witness(&m, &s, j, k, kind).unwrap();
                match class {
                    CorruptionClass::None => prop_assert!(w.is_none()),
                    _ => {
                        let w = w.unwrap();
                        prop_assert!(w.verify(&m));
                        prop_assert!(w.indices.contains(&j) && w.indices.contains(&k));
                        if class == CorruptionClass::SeparatorCorruption { sc += 1 } else { ec += 1 }
                    }
                }
            }
        }
        prop_assert_eq!((sc, ec), (st.sc_count, st.ec_count));
    }

    #[test]
    fn active_entries_sum_active_parts(n in 5usize..20, seed: u64, k in 0usize..3) {
        let m = noisy(n, SkeletonKind::Ultra, seed);
        let s: Vec<usize> = (0..k).collect();
        let st = build_skeleton(&m, &s, SkeletonKind::Ultra, 0.2);
        let sum: usize = st
            .parts
            .iter()
            .zip(&st.part_summaries)
            .filter(|(_, c)| c.class == PartClass::Active)
            .map(|(p, _)| p.len() * p.len())
            .sum();
        prop_assert_eq!(st.active_entries, sum);
        prop_assert!((st.active_mass - sum as f64 / (n * n) as f64).abs() < 1e-12);
    }
}

#[test]
fn in_class_instances_have_no_corruptions() {
    let mut rng = instance_rng(4);
    for seed in 0..100u64 {
        let n = rng.gen_range(8..40);
        let u = gen_random_ultra(n, seed).matrix;
        let t = gen_random_tree(n.min(20), seed, 8).matrix;
        for (m, kind) in [(&u, SkeletonKind::Ultra), (&t, SkeletonKind::Tree)] {
            let mut idx: Vec<usize> = (0..m.n()).collect();
            idx.shuffle(&mut rng);
            let k = rng.gen_range(0..5);
            let st = build_skeleton(m, &idx[..k], kind, 0.1);
            assert!(st.consistent && st.inconsistent_points.is_empty());
            assert_eq!(st.sc_count + st.ec_count, 0, "seed {seed} {kind:?}");
        }
    }
}

#[test]
fn tree_pivot_is_smallest_sample() {
    let m = gen_random_tree(12, 3, 5).matrix;
    let st = build_skeleton(&m, &[7, 2, 9], SkeletonKind::Tree, 0.1);
    assert_eq!(st.pivot, Some(2));
    assert_eq!(
        build_skeleton(&m, &[7], SkeletonKind::Ultra, 0.1).pivot,
        None
    );
}

#[test]
fn sample_lb_probe_separates_good_points() {
    let n = 50;
    let inst = gen_sample_lb(n, 0.1, 8).unwrap();
    let bad = inst.sample_lb_bad_set().unwrap();
    let st = build_skeleton(&inst.matrix, &bad[..1], SkeletonKind::Ultra, 0.1);
    let singles = st
        .parts
        .iter()
        .filter(|p| p.len() == 1 && !bad.contains(&p[0]))
        .count();
    assert_eq!(singles, n - bad.len());
    let rest: Vec<usize> = bad[1..].to_vec();
    let mut sorted = rest.clone();
    sorted.sort_unstable();
    assert!(st.parts.contains(&sorted));
}

fn ln_choose(n: u64, k: u64) -> f64 {
    (1..=k)
        .map(|i| ((n - k + i) as f64).ln() - (i as f64).ln())
        .sum()
}

#[test]
fn query_lb_block_active_rate_matches_binomial() {
    // the block is an exact part once S holds one point of every other block
    let (n, eps) = (400usize, 0.1);
    let mut active = 0;
    let trials = 100;
    for seed in 0..trials {
        let inst = gen_query_lb(n, eps, seed).unwrap();
        let blocks = inst.query_lb_blocks().unwrap();
        let block0: Vec<usize> = (0..n).filter(|&i| blocks[i] == Some(0)).collect();
        let s: Vec<usize> = (1..10)
            .map(|b| (0..n).find(|&i| blocks[i] == Some(b)).unwrap())
            .collect();
        let st = build_skeleton(&inst.matrix, &s, SkeletonKind::Ultra, eps);
        assert!(st.parts.contains(&block0));
        if classify_part(&inst.matrix, &s, &block0, eps, SkeletonKind::Ultra) == PartClass::Active {
            active += 1;
        }
    }
    // 780 fair coins c; active iff |P|² − 2·max(c, 780 − c) ≥ 800, i.e. 380 ≤ c ≤ 400
    let p: f64 = (380..=400)
        .map(|c| (ln_choose(780, c) - 780.0 * 2f64.ln()).exp())
        .sum();
    let rate = active as f64 / trials as f64;
    let tol = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
    assert!((rate - p).abs() <= tol, "rate {rate} vs exact {p:.4}");
}

#[test]
fn decay_is_reproducible_and_starts_full() {
    let inst = gen_query_lb(120, 0.1, 2).unwrap();
    let a = decay_experiment(&inst.matrix, SkeletonKind::Ultra, 0.1, 10, 12, 5);
    let b = decay_experiment(&inst.matrix, SkeletonKind::Ultra, 0.1, 10, 12, 5);
    assert_eq!(a, b);
    assert_eq!(a.rows[0].mean, 14_400.0);
    assert_eq!(a.rows.len(), 11);
    assert!(a.to_csv().lines().count() == 12);
}

#[test]
fn decay_on_in_class_ultrametric_keeps_census_empty() {
    let m = gen_random_ultra(60, 1).matrix;
    let t = decay_experiment(&m, SkeletonKind::Ultra, 0.1, 8, 5, 2);
    assert_eq!(t.trajectories.len(), 5);
    let mut rng = instance_rng(3);
    for _ in 0..5 {
        let s: Vec<usize> = (0..6).map(|_| rng.gen_range(0..60)).collect();
        let st = build_skeleton(&m, &s, SkeletonKind::Ultra, 0.1);
        assert_eq!(st.sc_count + st.ec_count, 0);
    }
}

#[test]
fn tree_corruption_example() {
    // four points on a path 0-1-2-3 (unit edges) with M(1,2) inflated
    let mut m = DistanceMatrix::from_fn(5, |i, j| (j - i) as f64);
    m.set_sym(1, 2, 2.5);
    m.set_sym(1, 3, 3.5);
    let s = [0usize, 4];
    let st = build_skeleton(&m, &s, SkeletonKind::Tree, 0.1);
    for (a, &j) in st.parts.iter().flatten().enumerate() {
        for &k in st.parts.iter().flatten().skip(a + 1) {
            if let (c, Some(w)) = corruption_with_witness(&m, &s, j, k, SkeletonKind::Tree).unwrap()
            {
                assert_ne!(c, CorruptionClass::None);
                assert!(w.verify(&m));
            }
        }
    }
}
