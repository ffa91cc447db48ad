//! Lower-bound constructions: Behrend matrices, twin pairs, `D_s` and `D_q`.

use rand::Rng;

use super::salem_spencer::SalemSpencerSet;
use super::{floor_count, instance_rng, random_permutation, GeneratedInstance, Params, Provenance};
use crate::error::{Error, Result};
use crate::matrix::DistanceMatrix;

fn doubled(x: &SalemSpencerSet, n: usize) -> Vec<bool> {
    let mut twice = vec![false; n];
    for &v in &x.members {
        twice[2 * v % n] = true;
    }
    twice
}

fn diff_set(x: &SalemSpencerSet, n: usize) -> Vec<bool> {
    let mut has = vec![false; n];
    for &v in &x.members {
        has[v % n] = true;
    }
    has
}

/// Tripartite Behrend matrix before relabeling: `A = 0..n`, `B = n..2n`, `C = 2n..3n`.
///
/// `a_i b_j` is 1 if `j − i ∈ X` (else 2), `b_i c_j` is 2 if `j − i ∈ X` (else 3),
/// `a_i c_j` is 4 if `j − i ∈ 2X` (else 2); everything else off the diagonal is 2.
pub fn behrend_unpermuted(n: usize, x: &SalemSpencerSet) -> DistanceMatrix {
    let in_x = diff_set(x, n);
    let in_2x = doubled(x, n);
    let diff = |i: usize, j: usize| (j + n - i) % n;
    DistanceMatrix::from_fn(3 * n, |p, q| {
        let (gp, ip) = (p / n, p % n);
        let (gq, iq) = (q / n, q % n);
        let hit = |table: &[bool]| table[diff(ip, iq)];
        match (gp, gq) {
            (0, 1) => {
                if hit(&in_x) {
                    1.0
                } else {
                    2.0
                }
            }
            (1, 2) => {
                if hit(&in_x) {
                    2.0
                } else {
                    3.0
                }
            }
            (0, 2) => {
                if hit(&in_2x) {
                    4.0
                } else {
                    2.0
                }
            }
            _ => 2.0,
        }
    })
}

fn x_params(params: &mut Params, x: &SalemSpencerSet) {
    params.insert("x_size".into(), x.len().into());
    params.insert("x".into(), x.members.clone().into());
}

/// Behrend matrix on `3n` points under a uniformly random relabeling.
pub fn gen_behrend(n: usize, x: &SalemSpencerSet, seed: u64) -> GeneratedInstance {
    let mut rng = instance_rng(seed);
    let perm = random_permutation(3 * n, &mut rng);
    let mut params = Params::new();
    params.insert("n".into(), n.into());
    params.insert("seed".into(), seed.into());
    x_params(&mut params, x);
    GeneratedInstance {
        matrix: behrend_unpermuted(n, x).permuted(&perm),
        provenance: Provenance::Behrend,
        params,
        permutation: perm,
    }
}

/// The twin pair on `6n` points before relabeling.
///
/// Layout: `a = 0..n`, `a' = n..2n`, `b = 2n..3n`, `b' = 3n..4n`, `c = 4n..5n`,
/// `c' = 5n..6n`. The bad matrix places the special weights on unprimed-unprimed
/// and primed-primed pairs (two Behrend copies); the good matrix places them on
/// the crossed pairs.
pub fn twin_unpermuted(n: usize, x: &SalemSpencerSet) -> (DistanceMatrix, DistanceMatrix) {
    let in_x = diff_set(x, n);
    let in_2x = doubled(x, n);
    let build = |crossed: bool| {
        DistanceMatrix::from_fn(6 * n, |p, q| {
            let (gp, ip) = (p / n, p % n);
            let (gq, iq) = (q / n, q % n);
            let (set_p, primed_p) = (gp / 2, gp % 2 == 1);
            let (set_q, primed_q) = (gq / 2, gq % 2 == 1);
            let d = (iq + n - ip) % n;
            let special = (primed_p != primed_q) == crossed;
            match (set_p, set_q) {
                (0, 1) => {
                    if special && in_x[d] {
                        1.0
                    } else {
                        2.0
                    }
                }
                (1, 2) => {
                    if special && in_x[d] {
                        2.0
                    } else {
                        3.0
                    }
                }
                (0, 2) => {
                    if special && in_2x[d] {
                        4.0
                    } else {
                        2.0
                    }
                }
                _ => 2.0,
            }
        })
    };
    (build(true), build(false))
}

/// Returns `(twin_good, twin_bad)` sharing one random relabeling.
pub fn gen_twin(
    n: usize,
    x: &SalemSpencerSet,
    seed: u64,
) -> (GeneratedInstance, GeneratedInstance) {
    let mut rng = instance_rng(seed);
    let perm = random_permutation(6 * n, &mut rng);
    let (good, bad) = twin_unpermuted(n, x);
    let mut params = Params::new();
    params.insert("n".into(), n.into());
    params.insert("seed".into(), seed.into());
    x_params(&mut params, x);
    let make = |m: DistanceMatrix, provenance| GeneratedInstance {
        matrix: m.permuted(&perm),
        provenance,
        params: params.clone(),
        permutation: perm.clone(),
    };
    (
        make(good, Provenance::TwinGood),
        make(bad, Provenance::TwinBad),
    )
}

/// Group sizes `(good, bad)` for `D_s`.
pub fn sample_lb_sizes(n: usize, eps: f64) -> Result<(usize, usize)> {
    let b = floor_count(eps * n as f64);
    if b < 1 || b >= n {
        return Err(Error::param(format!(
            "sample-lb needs 1 <= floor(eps*n) < n, got {b} for n = {n}, eps = {eps}"
        )));
    }
    Ok((n - b, b))
}

/// `D_s` before relabeling: `x_1..x_r` are `0..r`, the bad group is `r..n`.
/// `M(x_i, x_j) = M(y, y') = 2n` and `M(x_i, y) = 2n + i`.
pub fn sample_lb_unpermuted(n: usize, eps: f64) -> Result<DistanceMatrix> {
    let (r, _) = sample_lb_sizes(n, eps)?;
    let base = 2.0 * n as f64;
    Ok(DistanceMatrix::from_fn(n, |p, q| {
        if p < r && q >= r {
            base + (p + 1) as f64
        } else {
            base
        }
    }))
}

pub fn gen_sample_lb(n: usize, eps: f64, seed: u64) -> Result<GeneratedInstance> {
    let (r, b) = sample_lb_sizes(n, eps)?;
    let mut rng = instance_rng(seed);
    let perm = random_permutation(n, &mut rng);
    let mut params = Params::new();
    params.insert("n".into(), n.into());
    params.insert("eps".into(), eps.into());
    params.insert("seed".into(), seed.into());
    params.insert("good".into(), r.into());
    params.insert("bad".into(), b.into());
    Ok(GeneratedInstance {
        matrix: sample_lb_unpermuted(n, eps)?.permuted(&perm),
        provenance: Provenance::SampleLb,
        params,
        permutation: perm,
    })
}

/// Block size `r` and block count `l` for `D_q`.
pub fn query_lb_shape(n: usize, eps: f64) -> Result<(usize, usize)> {
    let r = floor_count(eps * n as f64);
    if r < 3 {
        return Err(Error::param(format!(
            "query-lb needs floor(eps*n) >= 3, got {r} for n = {n}, eps = {eps}"
        )));
    }
    let l = floor_count(1.0 / eps).min(n / r);
    Ok((r, l))
}

/// `D_q` before relabeling: block `t` is `t·r..(t+1)·r` with fair `{1,2}` coins;
/// all other off-diagonal entries, including the remainder, are 10.
pub fn query_lb_unpermuted<R: Rng + ?Sized>(
    n: usize,
    eps: f64,
    rng: &mut R,
) -> Result<DistanceMatrix> {
    let (r, l) = query_lb_shape(n, eps)?;
    Ok(DistanceMatrix::from_fn(n, |p, q| {
        let same_block = p / r == q / r && p / r < l;
        if same_block {
            if rng.gen::<bool>() {
                1.0
            } else {
                2.0
            }
        } else {
            10.0
        }
    }))
}

pub fn gen_query_lb(n: usize, eps: f64, seed: u64) -> Result<GeneratedInstance> {
    let (r, l) = query_lb_shape(n, eps)?;
    let mut rng = instance_rng(seed);
    let raw = query_lb_unpermuted(n, eps, &mut rng)?;
    let perm = random_permutation(n, &mut rng);
    let mut params = Params::new();
    params.insert("n".into(), n.into());
    params.insert("eps".into(), eps.into());
    params.insert("seed".into(), seed.into());
    params.insert("block_size".into(), r.into());
    params.insert("blocks".into(), l.into());
    Ok(GeneratedInstance {
        matrix: raw.permuted(&perm),
        provenance: Provenance::QueryLb,
        params,
        permutation: perm,
    })
}
