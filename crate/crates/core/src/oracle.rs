//! Query-metered access to a [`DistanceMatrix`].
//!
//! A [`QueryOracle`] is single-owner: it is `Send` but its counters are plain
//! integers behind `&mut self`. Concurrent experiments create one oracle per
//! trial (see [`QueryOracle::fresh`]), which also keeps per-trial counts isolated.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::matrix::DistanceMatrix;

/// Above this many unordered pairs the seen-set falls back to hashing.
const DENSE_PAIR_LIMIT: usize = 1 << 26;

#[derive(Clone, Debug)]
enum PairSet {
    Dense(Vec<u64>),
    Sparse(HashSet<(u32, u32)>),
}

impl PairSet {
    fn new(n: usize) -> Self {
        let pairs = n * n.saturating_sub(1) / 2;
        if pairs <= DENSE_PAIR_LIMIT {
            PairSet::Dense(vec![0; pairs.div_ceil(64)])
        } else {
            PairSet::Sparse(HashSet::new())
        }
    }

    /// Inserts `(i, j)` with `i < j`; returns true if it was new.
    fn insert(&mut self, n: usize, i: usize, j: usize) -> bool {
        match self {
            PairSet::Dense(bits) => {
                // row-major index into the strict upper triangle
                let idx = i * (2 * n - i - 1) / 2 + (j - i - 1);
                let (w, b) = (idx / 64, idx % 64);
                let fresh = bits[w] & (1 << b) == 0;
                bits[w] |= 1 << b;
                fresh
            }
            PairSet::Sparse(set) => set.insert((i as u32, j as u32)),
        }
    }

    fn contains(&self, n: usize, i: usize, j: usize) -> bool {
        match self {
            PairSet::Dense(bits) => {
                let idx = i * (2 * n - i - 1) / 2 + (j - i - 1);
                bits[idx / 64] & (1 << (idx % 64)) != 0
            }
            PairSet::Sparse(set) => set.contains(&(i as u32, j as u32)),
        }
    }
}

/// Read-mediating wrapper that charges one query per distinct unordered
/// off-diagonal pair. Diagonal reads are free but still mark the index sampled.
#[derive(Clone, Debug)]
pub struct QueryOracle<'a> {
    target: &'a DistanceMatrix,
    seen: PairSet,
    queried: u64,
    sampled: Vec<bool>,
    sampled_count: usize,
    budget: Option<u64>,
    log: Option<Vec<(usize, usize)>>,
}

impl<'a> QueryOracle<'a> {
    pub fn new(target: &'a DistanceMatrix) -> Self {
        let n = target.n();
        Self {
            target,
            seen: PairSet::new(n),
            queried: 0,
            sampled: vec![false; n],
            sampled_count: 0,
            budget: None,
            log: None,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    /// Records every read (including repeats) for later replay.
    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    /// A new oracle over the same matrix and budget with zeroed counters.
    pub fn fresh(&self) -> Self {
        let mut o = Self::new(self.target);
        o.budget = self.budget;
        if self.log.is_some() {
            o.log = Some(Vec::new());
        }
        o
    }

    pub fn n(&self) -> usize {
        self.target.n()
    }

    pub fn target(&self) -> &'a DistanceMatrix {
        self.target
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    /// Reads the ordered entry `M(i, j)`.
    pub fn read(&mut self, i: usize, j: usize) -> Result<f64> {
        let n = self.n();
        assert!(i < n && j < n, "index ({i},{j}) out of range for n = {n}");
        if i != j {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            if !self.seen.contains(n, a, b) {
                if let Some(budget) = self.budget {
                    if self.queried >= budget {
                        return Err(Error::BudgetExhausted { budget });
                    }
                }
                self.seen.insert(n, a, b);
                self.queried += 1;
            }
        }
        self.touch(i);
        self.touch(j);
        if let Some(log) = &mut self.log {
            log.push((i, j));
        }
        Ok(self.target.get(i, j))
    }

    fn touch(&mut self, i: usize) {
        if !self.sampled[i] {
            self.sampled[i] = true;
            self.sampled_count += 1;
        }
    }

    /// Distinct unordered off-diagonal pairs read so far.
    pub fn queried_entries(&self) -> u64 {
        self.queried
    }

    /// Distinct indices touched so far.
    pub fn samples_used(&self) -> usize {
        self.sampled_count
    }

    pub fn sampled_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.sampled[i]).collect()
    }

    pub fn read_log(&self) -> Option<&[(usize, usize)]> {
        self.log.as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(n: usize) -> DistanceMatrix {
        DistanceMatrix::from_fn(n, |i, j| (i + j + 1) as f64)
    }

    #[test]
    fn symmetric_reads_charge_once() {
        let mat = m(4);
        let mut o = QueryOracle::new(&mat);
        o.read(1, 2).unwrap();
        o.read(2, 1).unwrap();
        o.read(3, 3).unwrap();
        assert_eq!(o.queried_entries(), 1);
        assert_eq!(o.sampled_indices(), vec![1, 2, 3]);
    }

    #[test]
    fn budget_blocks_new_pairs_only() {
        let mat = m(4);
        let mut o = QueryOracle::new(&mat).with_budget(1);
        o.read(0, 1).unwrap();
        assert!(o.read(1, 0).is_ok());
        assert!(o.read(0, 0).is_ok());
        assert!(matches!(
            o.read(0, 2),
            Err(Error::BudgetExhausted { budget: 1 })
        ));
        assert_eq!(o.queried_entries(), 1);
        let f = o.fresh();
        assert_eq!(f.queried_entries(), 0);
        assert_eq!(f.budget(), Some(1));
    }

    proptest! {
        #[test]
        fn counter_matches_replayed_log(
            n in 2usize..30,
            reads in prop::collection::vec((0usize..30, 0usize..30), 0..200),
        ) {
            let mat = m(n);
            let mut o = QueryOracle::new(&mat).with_log();
            for (i, j) in reads {
                o.read(i % n, j % n).unwrap();
            }
            let log = o.read_log().unwrap();
            let distinct: HashSet<(usize, usize)> = log
                .iter()
                .filter(|(i, j)| i != j)
                .map(|&(i, j)| (i.min(j), i.max(j)))
                .collect();
            prop_assert_eq!(o.queried_entries() as usize, distinct.len());
            let touched: HashSet<usize> = log.iter().flat_map(|&(i, j)| [i, j]).collect();
            let mut touched: Vec<usize> = touched.into_iter().collect();
            touched.sort();
            prop_assert_eq!(o.sampled_indices(), touched);
        }
    }

    #[test]
    fn sparse_storage_behaves_like_dense() {
        let mut s = PairSet::Sparse(HashSet::new());
        let mut d = PairSet::new(10);
        for (i, j) in [(0, 1), (3, 9), (0, 1), (8, 9)] {
            assert_eq!(s.insert(10, i, j), d.insert(10, i, j));
        }
        assert!(d.contains(10, 3, 9) && s.contains(10, 3, 9));
        assert!(!d.contains(10, 2, 9));
    }
}
