use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// A set of residues mod `n` with no nontrivial solution to `x + y ≡ 2z`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SalemSpencerSet {
    pub n: usize,
    pub members: Vec<usize>,
}

impl SalemSpencerSet {
    /// Validates and wraps an explicit member list.
    pub fn new(n: usize, mut members: Vec<usize>) -> Option<Self> {
        members.sort_unstable();
        members.dedup();
        let set = Self { n, members };
        (set.members.iter().all(|&x| x < n) && set.is_valid()).then_some(set)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    /// Exhaustive `O(|X|²)` check of the modular 3-AP-free condition.
    pub fn is_valid(&self) -> bool {
        let n = self.n;
        if n == 0 {
            return self.members.is_empty();
        }
        let mut halves: HashMap<usize, Vec<usize>> = HashMap::new();
        for &z in &self.members {
            halves.entry(2 * z % n).or_default().push(z);
        }
        for (a, &x) in self.members.iter().enumerate() {
            for &y in &self.members[a..] {
                if let Some(zs) = halves.get(&((x + y) % n)) {
                    if zs.iter().any(|&z| !(x == y && y == z)) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Integers in `[0, limit)` with `k` base-`(2d−1)` digits all `< d`, grouped by
/// squared digit norm; returns the largest group. Digit-wise sums never carry,
/// so `x + y = 2z` forces equal digit vectors on a sphere, hence `x = y = z`.
fn behrend_sphere(limit: usize, d: usize, k: u32) -> Vec<usize> {
    let base = 2 * d - 1;
    let mut by_norm: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut digits = vec![0usize; k as usize];
    loop {
        let value = digits.iter().rev().fold(0usize, |acc, &g| acc * base + g);
        if value < limit {
            let norm = digits.iter().map(|g| g * g).sum();
            by_norm.entry(norm).or_default().push(value);
        }
        // odometer increment over digits < d
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                let mut best: Vec<usize> = by_norm
                    .into_iter()
                    .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
                    .map(|(_, v)| v)
                    .unwrap_or_default();
                best.sort_unstable();
                return best;
            }
            digits[pos] += 1;
            if digits[pos] < d {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Integers in `[0, limit)` whose base-3 digits are all 0 or 1.
fn ternary_01(limit: usize) -> Vec<usize> {
    (0..limit)
        .filter(|&x| {
            let mut v = x;
            while v > 0 {
                if v % 3 == 2 {
                    return false;
                }
                v /= 3;
            }
            true
        })
        .collect()
}

/// A 3-AP-free set mod `n` from Behrend's digit construction.
///
/// Members lie in `[1, floor(n/2))`, so any `x + y` and `2z` are below `n` and
/// modular coincidences are integer ones. The best of the sphere families over
/// digit bounds `d` and lengths `k` is returned; `d = 2` gives the base-3 0/1
/// set. Falls back to `{1}` when the range is empty.
pub fn salem_spencer(n: usize) -> SalemSpencerSet {
    let half = n / 2;
    let limit = half.saturating_sub(1);
    let mut best = ternary_01(limit);
    let mut d = 3;
    while d <= limit.clamp(3, 64) {
        let base = 2 * d - 1;
        let mut k = 1u32;
        while base.checked_pow(k - 1).is_some_and(|p| p < limit.max(1)) {
            if (d as f64).powi(k as i32) > 4e6 {
                break;
            }
            let cand = behrend_sphere(limit, d, k);
            if cand.len() > best.len() {
                best = cand;
            }
            k += 1;
        }
        d += 1;
    }
    let members: Vec<usize> = if best.is_empty() {
        vec![1]
    } else {
        best.into_iter().map(|x| x + 1).collect()
    };
    let set = SalemSpencerSet {
        n: n.max(2),
        members,
    };
    debug_assert!(set.is_valid());
    set
}
