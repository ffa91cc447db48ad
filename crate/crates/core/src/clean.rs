//! Cleanliness pre-check: symmetric, zero diagonal, positive off the diagonal.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracle::QueryOracle;

/// Default `c` in the `ceil(c / eps)` clean-check sample count.
pub const DEFAULT_CLEAN_COEFF: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CleanCondition {
    Asymmetry,
    Negative,
    ZeroOffDiagonal,
    NonzeroDiagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanWitness {
    pub i: usize,
    pub j: usize,
    pub condition: CleanCondition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub clean: bool,
    pub witness: Option<CleanWitness>,
}

impl CleanReport {
    fn ok() -> Self {
        Self {
            clean: true,
            witness: None,
        }
    }

    fn failed(w: CleanWitness) -> Self {
        Self {
            clean: false,
            witness: Some(w),
        }
    }
}

/// `ceil(c / eps)`.
pub fn clean_trials(eps: f64, c: f64) -> usize {
    (c / eps).ceil().max(1.0) as usize
}

fn check_pair(oracle: &mut QueryOracle<'_>, i: usize, j: usize) -> Result<Option<CleanWitness>> {
    let (i, j) = (i.min(j), i.max(j));
    let cond = if i == j {
        (oracle.read(i, i)? != 0.0).then_some(CleanCondition::NonzeroDiagonal)
    } else {
        let a = oracle.read(i, j)?;
        let b = oracle.read(j, i)?;
        if a != b {
            Some(CleanCondition::Asymmetry)
        } else if a < 0.0 {
            Some(CleanCondition::Negative)
        } else if a == 0.0 {
            Some(CleanCondition::ZeroOffDiagonal)
        } else {
            None
        }
    };
    Ok(cond.map(|condition| CleanWitness { i, j, condition }))
}

/// Samples pairs and reports the first cleanliness violation seen.
///
/// `trials` defaults to `ceil(10 / eps)`. When `trials >= n^2` the whole matrix
/// is scanned row-major instead (`i <= j`), so the result is exact. When
/// `n <= trials` all diagonal entries are checked first; diagonal reads are free.
pub fn clean_check<R: Rng + ?Sized>(
    oracle: &mut QueryOracle<'_>,
    eps: f64,
    trials: Option<usize>,
    rng: &mut R,
) -> Result<CleanReport> {
    let n = oracle.n();
    let trials = trials.unwrap_or_else(|| clean_trials(eps, DEFAULT_CLEAN_COEFF));
    if n == 0 {
        return Ok(CleanReport::ok());
    }
    if trials >= n * n {
        for i in 0..n {
            for j in i..n {
                if let Some(w) = check_pair(oracle, i, j)? {
                    return Ok(CleanReport::failed(w));
                }
            }
        }
        return Ok(CleanReport::ok());
    }
    if n <= trials {
        for i in 0..n {
            if let Some(w) = check_pair(oracle, i, i)? {
                return Ok(CleanReport::failed(w));
            }
        }
    }
    for _ in 0..trials {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if let Some(w) = check_pair(oracle, i, j)? {
            return Ok(CleanReport::failed(w));
        }
    }
    Ok(CleanReport::ok())
}
