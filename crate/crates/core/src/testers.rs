//! The three one-sided property testers and their sampling sub-routines.
//!
//! Testers only ever reject with a certificate that re-verifies against the
//! matrix, so in-class inputs are accepted with probability 1.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clean::{clean_check, DEFAULT_CLEAN_COEFF};
use crate::error::{Error, Result};
use crate::oracle::QueryOracle;
use crate::violations::{
    is_violating_tree_quadruple_tol, is_violating_triangle_tol, is_violating_ultra_triple_tol,
    Violation, ViolationKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    Paper,
    Desk,
}

impl std::str::FromStr for ProfileName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(ProfileName::Paper),
            "desk" => Ok(ProfileName::Desk),
            other => Err(Error::param(format!("unknown profile {other:?}"))),
        }
    }
}

/// Sample-size constants.
///
/// * metric: `u = ceil(metric_u_coeff/ε)` indices and
///   `ceil(metric_pair_coeff·n^{2/3}/ε^{1/3})` pairs for the high-degree check,
///   `s = ceil(metric_s_coeff·n^{1/3}/ε^{2/3})` indices for the violation check;
/// * ultra/tree: `s = ceil(coeff·ln(ultra_log_arg/ε)/ε) + 2·ceil(pair_slot_coeff/ε)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsProfile {
    pub name: ProfileName,
    pub metric_u_coeff: f64,
    pub metric_pair_coeff: f64,
    pub metric_s_coeff: f64,
    pub ultra_s_coeff: f64,
    pub ultra_log_arg: f64,
    pub tree_s_coeff: f64,
    /// Extra pairs of points sampled on top of the main ultra/tree batch.
    pub pair_slot_coeff: f64,
    pub clean_coeff: f64,
    /// Slack a predicate must exceed before it counts; 0 means exact.
    pub tolerance: f64,
}

impl ConstantsProfile {
    pub fn paper() -> Self {
        Self {
            name: ProfileName::Paper,
            metric_u_coeff: 12.0,
            metric_pair_coeff: 48.0,
            metric_s_coeff: 8.0,
            ultra_s_coeff: 192.0,
            ultra_log_arg: 48.0,
            tree_s_coeff: 192.0,
            pair_slot_coeff: 16.0,
            clean_coeff: DEFAULT_CLEAN_COEFF,
            tolerance: 0.0,
        }
    }

    pub fn desk() -> Self {
        Self {
            name: ProfileName::Desk,
            metric_u_coeff: 4.0,
            metric_pair_coeff: 8.0,
            metric_s_coeff: 4.0,
            ultra_s_coeff: 8.0,
            ultra_log_arg: 8.0,
            tree_s_coeff: 8.0,
            pair_slot_coeff: 0.0,
            clean_coeff: DEFAULT_CLEAN_COEFF,
            tolerance: 0.0,
        }
    }

    pub fn named(name: ProfileName) -> Self {
        match name {
            ProfileName::Paper => Self::paper(),
            ProfileName::Desk => Self::desk(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let coeffs = [
            self.metric_u_coeff,
            self.metric_pair_coeff,
            self.metric_s_coeff,
            self.ultra_s_coeff,
            self.ultra_log_arg,
            self.tree_s_coeff,
            self.clean_coeff,
        ];
        if coeffs.iter().all(|c| c.is_finite() && *c > 0.0)
            && self.pair_slot_coeff >= 0.0
            && self.tolerance >= 0.0
        {
            Ok(())
        } else {
            Err(Error::param(format!("invalid constants profile {self:?}")))
        }
    }

    pub fn hi_degree_indices(&self, eps: f64) -> usize {
        (self.metric_u_coeff / eps).ceil() as usize
    }

    pub fn hi_degree_pairs(&self, n: usize, eps: f64) -> usize {
        (self.metric_pair_coeff * (n as f64).powf(2.0 / 3.0) / eps.powf(1.0 / 3.0)).ceil() as usize
    }

    pub fn violation_indices(&self, n: usize, eps: f64) -> usize {
        (self.metric_s_coeff * (n as f64).powf(1.0 / 3.0) / eps.powf(2.0 / 3.0)).ceil() as usize
    }

    pub fn ultra_indices(&self, eps: f64) -> usize {
        self.batch(self.ultra_s_coeff, eps)
    }

    pub fn tree_indices(&self, eps: f64) -> usize {
        self.batch(self.tree_s_coeff, eps)
    }

    /// Size of the main batch alone (without pair slots).
    pub fn skeleton_indices(&self, coeff: f64, eps: f64) -> usize {
        (coeff * (self.ultra_log_arg / eps).ln().max(1.0) / eps).ceil() as usize
    }

    pub fn pair_slots(&self, eps: f64) -> usize {
        (self.pair_slot_coeff / eps).ceil() as usize
    }

    fn batch(&self, coeff: f64, eps: f64) -> usize {
        self.skeleton_indices(coeff, eps) + 2 * self.pair_slots(eps)
    }

    /// `C` in the closed-form metric query ceiling `C·n^{2/3}/ε^{4/3}`.
    ///
    /// Each sample size is at most its real-valued formula plus one, which
    /// the `+1`s absorb for `ε < 1`.
    pub fn metric_ceiling_coeff(&self) -> f64 {
        (self.clean_coeff + 1.0)
            + 3.0 * (self.metric_u_coeff + 1.0) * (self.metric_pair_coeff + 1.0)
            + (self.metric_s_coeff + 1.0).powi(2) / 2.0
    }

    pub fn metric_query_ceiling(&self, n: usize, eps: f64) -> f64 {
        self.metric_ceiling_coeff() * (n as f64).powf(2.0 / 3.0) / eps.powf(4.0 / 3.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TesterKind {
    Metric,
    Ultra,
    Tree,
}

impl TesterKind {
    pub fn violation_kind(self) -> ViolationKind {
        match self {
            TesterKind::Metric => ViolationKind::Triangle,
            TesterKind::Ultra => ViolationKind::UltraTriple,
            TesterKind::Tree => ViolationKind::TreeQuadruple,
        }
    }
}

impl std::str::FromStr for TesterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metric" => Ok(TesterKind::Metric),
            "ultra" => Ok(TesterKind::Ultra),
            "tree" => Ok(TesterKind::Tree),
            other => Err(Error::param(format!("unknown tester {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub verdict: Verdict,
    pub certificate: Option<Violation>,
    pub samples_used: usize,
    pub queries_used: u64,
    pub seed: u64,
    pub profile: ProfileName,
    pub tester: TesterKind,
    pub elapsed_ms: u64,
}

impl TestReport {
    pub fn rejected(&self) -> bool {
        self.verdict == Verdict::Reject
    }
}

/// Per-run settings shared by all testers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub eps: f64,
    pub profile: ConstantsProfile,
    pub seed: u64,
    pub skip_clean: bool,
    /// Ultra/tree only: sample the main batch, then probe `pair_slots` pairs
    /// against it, instead of one combined batch.
    pub two_phase: bool,
    /// Record wall-clock time in `elapsed_ms` (otherwise 0, keeping reports reproducible).
    pub timing: bool,
}

impl TestOptions {
    pub fn new(eps: f64, profile: ConstantsProfile, seed: u64) -> Self {
        Self {
            eps,
            profile,
            seed,
            skip_clean: false,
            two_phase: false,
            timing: false,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        self.profile.validate()?;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::param(format!(
                "eps must lie in (0, 1), got {}",
                self.eps
            )));
        }
        if n == 0 {
            return Err(Error::param("empty matrix"));
        }
        Ok(())
    }
}

/// `s` indices, clamped and deduplicated.
///
/// Below `n` the indices are drawn independently and repeats dropped (first
/// occurrence kept), so a longer draw from the same stream extends a shorter
/// one. At `s >= n` every index is returned in random order.
pub fn sample_indices<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Vec<usize> {
    if s >= n {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(rng);
        return all;
    }
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(s);
    for _ in 0..s {
        let i = rng.gen_range(0..n);
        if !seen[i] {
            seen[i] = true;
            out.push(i);
        }
    }
    out
}

/// `count` unordered pairs of distinct indices, clamped and deduplicated like
/// [`sample_indices`].
pub fn sample_pairs<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    if total == 0 {
        return Vec::new();
    }
    if count >= total {
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        all.shuffle(rng);
        return all;
    }
    let mut seen = std::collections::HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let p = (i.min(j), i.max(j));
        if seen.insert(p) {
            out.push(p);
        }
    }
    out
}

/// Reads every pair among `sample` and returns the local `s×s` block.
fn read_block(oracle: &mut QueryOracle<'_>, sample: &[usize]) -> Result<Vec<f64>> {
    let s = sample.len();
    let mut local = vec![0.0; s * s];
    for a in 0..s {
        for b in a + 1..s {
            let v = oracle.read(sample[a], sample[b])?;
            local[a * s + b] = v;
            local[b * s + a] = v;
        }
    }
    Ok(local)
}

fn certificate(oracle: &QueryOracle<'_>, kind: ViolationKind, pts: &[usize]) -> Violation {
    Violation::from_points(kind, oracle.target(), pts)
}

/// First violating triple over sample positions `a < b < c`.
fn first_triple(local: &[f64], s: usize, kind: ViolationKind, tol: f64) -> Option<[usize; 3]> {
    let pred = match kind {
        ViolationKind::Triangle => is_violating_triangle_tol,
        _ => is_violating_ultra_triple_tol,
    };
    for a in 0..s {
        for b in a + 1..s {
            let ab = local[a * s + b];
            for c in b + 1..s {
                if pred(ab, local[a * s + c], local[b * s + c], tol) {
                    return Some([a, b, c]);
                }
            }
        }
    }
    None
}

/// First violating quadruple over sample positions `a < b < c < d`.
fn first_quadruple(local: &[f64], s: usize, tol: f64) -> Option<[usize; 4]> {
    for a in 0..s {
        for b in a + 1..s {
            let ab = local[a * s + b];
            for c in b + 1..s {
                let (ac, bc) = (local[a * s + c], local[b * s + c]);
                for d in c + 1..s {
                    let q = [
                        ab,
                        ac,
                        local[a * s + d],
                        bc,
                        local[b * s + d],
                        local[c * s + d],
                    ];
                    if is_violating_tree_quadruple_tol(q, tol) {
                        return Some([a, b, c, d]);
                    }
                }
            }
        }
    }
    None
}

/// Queries all pairs among `sample` and returns the first violation of `kind`
/// in sample order, if any.
pub fn scan_sample(
    oracle: &mut QueryOracle<'_>,
    sample: &[usize],
    kind: ViolationKind,
    tol: f64,
) -> Result<Option<Violation>> {
    let s = sample.len();
    let local = read_block(oracle, sample)?;
    let hit: Option<Vec<usize>> = match kind {
        ViolationKind::TreeQuadruple => first_quadruple(&local, s, tol).map(|p| p.to_vec()),
        _ => first_triple(&local, s, kind, tol).map(|p| p.to_vec()),
    };
    Ok(hit.map(|pos| {
        let pts: Vec<usize> = pos.iter().map(|&p| sample[p]).collect();
        certificate(oracle, kind, &pts)
    }))
}

struct Run<'o, 'a> {
    oracle: &'o mut QueryOracle<'a>,
    opts: &'o TestOptions,
    tester: TesterKind,
    start: Instant,
    q0: u64,
    s0: usize,
}

impl<'o, 'a> Run<'o, 'a> {
    fn new(
        oracle: &'o mut QueryOracle<'a>,
        opts: &'o TestOptions,
        tester: TesterKind,
    ) -> Result<Self> {
        opts.validate(oracle.n())?;
        Ok(Self {
            q0: oracle.queried_entries(),
            s0: oracle.samples_used(),
            oracle,
            opts,
            tester,
            start: Instant::now(),
        })
    }

    fn clean<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.opts.skip_clean {
            return Ok(());
        }
        let trials = crate::clean::clean_trials(self.opts.eps, self.opts.profile.clean_coeff);
        let report = clean_check(self.oracle, self.opts.eps, Some(trials), rng)?;
        if report.clean {
            Ok(())
        } else {
            Err(Error::NotClean(report))
        }
    }

    fn finish(self, certificate: Option<Violation>) -> TestReport {
        TestReport {
            verdict: if certificate.is_some() {
                Verdict::Reject
            } else {
                Verdict::Accept
            },
            certificate,
            samples_used: self.oracle.samples_used() - self.s0,
            queries_used: self.oracle.queried_entries() - self.q0,
            seed: self.opts.seed,
            profile: self.opts.profile.name,
            tester: self.tester,
            elapsed_ms: if self.opts.timing {
                self.start.elapsed().as_millis() as u64
            } else {
                0
            },
        }
    }
}

fn hi_degree_scan<R: Rng + ?Sized>(
    oracle: &mut QueryOracle<'_>,
    opts: &TestOptions,
    rng: &mut R,
) -> Result<Option<Violation>> {
    let n = oracle.n();
    let idx = sample_indices(n, opts.profile.hi_degree_indices(opts.eps), rng);
    let pairs = sample_pairs(n, opts.profile.hi_degree_pairs(n, opts.eps), rng);
    let tol = opts.profile.tolerance;
    for &i in &idx {
        for &(j, k) in &pairs {
            if i == j || i == k {
                continue;
            }
            let a = oracle.read(i, j)?;
            let b = oracle.read(i, k)?;
            let c = oracle.read(j, k)?;
            if is_violating_triangle_tol(a, b, c, tol) {
                return Ok(Some(certificate(
                    oracle,
                    ViolationKind::Triangle,
                    &[i, j, k],
                )));
            }
        }
    }
    Ok(None)
}

fn violation_scan<R: Rng + ?Sized>(
    oracle: &mut QueryOracle<'_>,
    opts: &TestOptions,
    rng: &mut R,
) -> Result<Option<Violation>> {
    let n = oracle.n();
    let sample = sample_indices(n, opts.profile.violation_indices(n, opts.eps), rng);
    scan_sample(
        oracle,
        &sample,
        ViolationKind::Triangle,
        opts.profile.tolerance,
    )
}

/// Samples `u` indices and a set of pairs and checks every (index, pair) triangle.
pub fn check_hi_degree(oracle: &mut QueryOracle<'_>, opts: &TestOptions) -> Result<TestReport> {
    let run = Run::new(oracle, opts, TesterKind::Metric)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let cert = hi_degree_scan(run.oracle, opts, &mut rng)?;
    Ok(run.finish(cert))
}

/// Samples `s` indices, reads all their pairs and scans every triple.
pub fn check_violation(oracle: &mut QueryOracle<'_>, opts: &TestOptions) -> Result<TestReport> {
    let run = Run::new(oracle, opts, TesterKind::Metric)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let cert = violation_scan(run.oracle, opts, &mut rng)?;
    Ok(run.finish(cert))
}

/// Clean check, then the high-degree check, then the sampled-violation check.
pub fn metric_test(oracle: &mut QueryOracle<'_>, opts: &TestOptions) -> Result<TestReport> {
    let mut run = Run::new(oracle, opts, TesterKind::Metric)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    run.clean(&mut rng)?;
    let mut cert = hi_degree_scan(run.oracle, opts, &mut rng)?;
    if cert.is_none() {
        cert = violation_scan(run.oracle, opts, &mut rng)?;
    }
    Ok(run.finish(cert))
}

fn batch_test(
    oracle: &mut QueryOracle<'_>,
    opts: &TestOptions,
    tester: TesterKind,
) -> Result<TestReport> {
    let mut run = Run::new(oracle, opts, tester)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    run.clean(&mut rng)?;
    let n = run.oracle.n();
    let p = &opts.profile;
    let coeff = if tester == TesterKind::Tree {
        p.tree_s_coeff
    } else {
        p.ultra_s_coeff
    };
    let kind = tester.violation_kind();
    let tol = p.tolerance;
    let cert = if opts.two_phase {
        let main = sample_indices(n, p.skeleton_indices(coeff, opts.eps), &mut rng);
        match scan_sample(run.oracle, &main, kind, tol)? {
            Some(v) => Some(v),
            None => {
                let pairs = sample_pairs(n, p.pair_slots(opts.eps), &mut rng);
                probe_pairs(run.oracle, &main, &pairs, kind, tol)?
            }
        }
    } else {
        let s = if tester == TesterKind::Tree {
            p.tree_indices(opts.eps)
        } else {
            p.ultra_indices(opts.eps)
        };
        let sample = sample_indices(n, s, &mut rng);
        scan_sample(run.oracle, &sample, kind, tol)?
    };
    Ok(run.finish(cert))
}

/// Second phase of the two-phase variant: each pair `(i, j)` is read together
/// with its distances to the main batch, and violations using `i` or `j` are sought.
fn probe_pairs(
    oracle: &mut QueryOracle<'_>,
    main: &[usize],
    pairs: &[(usize, usize)],
    kind: ViolationKind,
    tol: f64,
) -> Result<Option<Violation>> {
    for &(i, j) in pairs {
        let mut ext: Vec<usize> = main.iter().copied().filter(|&u| u != i && u != j).collect();
        let base = ext.len();
        ext.push(i);
        ext.push(j);
        let s = ext.len();
        // pairs inside the main batch were charged in the first phase
        let local = read_block(oracle, &ext)?;
        let hit = match kind {
            ViolationKind::TreeQuadruple => {
                first_quadruple_touching(&local, s, base, tol).map(|p| p.to_vec())
            }
            _ => first_triple_touching(&local, s, base, kind, tol).map(|p| p.to_vec()),
        };
        if let Some(pos) = hit {
            let pts: Vec<usize> = pos.iter().map(|&p| ext[p]).collect();
            return Ok(Some(certificate(oracle, kind, &pts)));
        }
    }
    Ok(None)
}

fn first_triple_touching(
    local: &[f64],
    s: usize,
    base: usize,
    kind: ViolationKind,
    tol: f64,
) -> Option<[usize; 3]> {
    let pred = match kind {
        ViolationKind::Triangle => is_violating_triangle_tol,
        _ => is_violating_ultra_triple_tol,
    };
    for a in 0..s {
        for b in a + 1..s {
            for c in (b + 1).max(base)..s {
                if pred(local[a * s + b], local[a * s + c], local[b * s + c], tol) {
                    return Some([a, b, c]);
                }
            }
        }
    }
    None
}

fn first_quadruple_touching(local: &[f64], s: usize, base: usize, tol: f64) -> Option<[usize; 4]> {
    let g = |x: usize, y: usize| local[x * s + y];
    for a in 0..s {
        for b in a + 1..s {
            for c in b + 1..s {
                for d in (c + 1).max(base)..s {
                    let q = [g(a, b), g(a, c), g(a, d), g(b, c), g(b, d), g(c, d)];
                    if is_violating_tree_quadruple_tol(q, tol) {
                        return Some([a, b, c, d]);
                    }
                }
            }
        }
    }
    None
}

/// Samples one batch and scans all triples with the three-point condition.
pub fn ultra_test(oracle: &mut QueryOracle<'_>, opts: &TestOptions) -> Result<TestReport> {
    batch_test(oracle, opts, TesterKind::Ultra)
}

/// Samples one batch and scans all quadruples with the four-point condition.
pub fn tree_test(oracle: &mut QueryOracle<'_>, opts: &TestOptions) -> Result<TestReport> {
    batch_test(oracle, opts, TesterKind::Tree)
}

pub fn run_tester(
    kind: TesterKind,
    oracle: &mut QueryOracle<'_>,
    opts: &TestOptions,
) -> Result<TestReport> {
    match kind {
        TesterKind::Metric => metric_test(oracle, opts),
        TesterKind::Ultra => ultra_test(oracle, opts),
        TesterKind::Tree => tree_test(oracle, opts),
    }
}
