use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::strategy::{QueryGraph, QueryShape};
use super::InstanceSpec;
use crate::error::{Error, Result};
use crate::matrix::DistanceMatrix;
use crate::stats::{derive_seed, trial_rng, RateEstimate};
use crate::violations::{violates, Violation, ViolationKind};

/// A detection-probability sweep over entry-query budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub instance: InstanceSpec,
    pub strategy: QueryShape,
    /// Defaults to the family's natural violation type.
    #[serde(default)]
    pub violation: Option<ViolationKind>,
    pub budgets: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

pub const MIN_TRIALS: usize = 30;

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        if self.budgets.is_empty() || self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param(
                "budgets must be non-empty and strictly increasing",
            ));
        }
        if self.trials < MIN_TRIALS {
            return Err(Error::param(format!(
                "need at least {MIN_TRIALS} trials, got {}",
                self.trials
            )));
        }
        Ok(())
    }

    pub fn violation_kind(&self) -> ViolationKind {
        self.violation
            .unwrap_or_else(|| self.instance.default_violation())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: usize,
    pub trials: usize,
    pub detections: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub instance: String,
    pub strategy: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// One trial at one budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub budget: usize,
    pub queries: usize,
    /// Matrix indices touched by the query graph.
    pub vertices: Vec<usize>,
    pub certificate: Option<Violation>,
}

impl TrialOutcome {
    pub fn detected(&self) -> bool {
        self.certificate.is_some()
    }
}

/// First violation among the triples/quadruples whose pairs were all queried.
pub fn fully_queried_violation(
    m: &DistanceMatrix,
    g: &QueryGraph,
    kind: ViolationKind,
) -> Option<Violation> {
    let adj = &g.adjacency();
    let s = g.vertices.len();
    let v = &g.vertices;
    let nbrs = |a: usize| (a + 1..s).filter(move |&b| adj[a][b]);
    for a in 0..s {
        for b in nbrs(a) {
            for c in nbrs(b).filter(|&c| adj[a][c]) {
                match kind.arity() {
                    3 => {
                        if violates(m, kind, &[v[a], v[b], v[c]]) {
                            return Some(Violation::from_points(kind, m, &[v[a], v[b], v[c]]));
                        }
                    }
                    _ => {
                        for d in nbrs(c).filter(|&d| adj[a][d] && adj[b][d]) {
                            let pts = [v[a], v[b], v[c], v[d]];
                            if violates(m, kind, &pts) {
                                return Some(Violation::from_points(kind, m, &pts));
                            }
                        }
                    }
                }
            }
        }
    }
    None
}

fn trial_outcomes(spec: &SweepSpec, trial: usize) -> Result<Vec<TrialOutcome>> {
    let kind = spec.violation_kind();
    let inst_seed = derive_seed(spec.seed, trial as u64);
    let inst = spec.instance.generate(inst_seed)?;
    let m = &inst.matrix;
    // must not replay the generator's own stream
    let mut rng = trial_rng(inst_seed, 1);
    let mut order: Vec<usize> = (0..m.n()).collect();
    order.shuffle(&mut rng);
    Ok(spec
        .budgets
        .iter()
        .map(|&budget| {
            let g = spec.strategy.build(&order, budget, &mut rng);
            TrialOutcome {
                trial,
                budget,
                queries: g.edges.len(),
                certificate: fully_queried_violation(m, &g, kind),
                vertices: g.vertices,
            }
        })
        .collect())
}

/// Replays trial `trial` of `spec` at every budget; the instance and point
/// order are shared across budgets so nested shapes give nested query sets.
pub fn sweep_trial(spec: &SweepSpec, trial: usize) -> Result<Vec<TrialOutcome>> {
    spec.validate()?;
    trial_outcomes(spec, trial)
}

/// Per-budget detection rates with 95% Wilson intervals.
pub fn detection_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let outcomes: Vec<Vec<TrialOutcome>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| trial_outcomes(spec, t))
        .collect::<Result<_>>()?;
    let instance = spec.instance.label();
    let rows = spec
        .budgets
        .iter()
        .enumerate()
        .map(|(bi, &budget)| {
            let detections = outcomes.iter().filter(|o| o[bi].detected()).count();
            let est = RateEstimate::new(detections as u64, spec.trials as u64);
            SweepRow {
                budget,
                trials: spec.trials,
                detections,
                rate: est.rate,
                ci_low: est.ci_low,
                ci_high: est.ci_high,
                seed: spec.seed,
                instance: instance.clone(),
                strategy: spec.strategy.name().to_string(),
            }
        })
        .collect();
    Ok(SweepTable {
        spec: spec.clone(),
        rows,
    })
}
