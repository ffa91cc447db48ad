//! Monte-Carlo harness: detection sweeps over query budgets, query-graph
//! shape comparisons and tester soundness/completeness campaigns.
//!
//! Every trial derives its generator from `(seed, trial)`, so parallel and
//! serial runs produce identical tables.

mod campaign;
mod strategy;
mod sweep;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use campaign::{
    completeness_campaign, soundness_campaign, CampaignKind, CampaignReport, CampaignSpec,
    SOUNDNESS_TARGET,
};
pub use strategy::{clique_size, QueryGraph, QueryShape};
pub use sweep::{
    detection_sweep, fully_queried_violation, sweep_trial, SweepRow, SweepSpec, SweepTable,
    TrialOutcome,
};

use crate::error::{Error, Result};
use crate::generators::{
    corrupt, gen_behrend, gen_query_lb, gen_random_metric, gen_random_tree, gen_random_ultra,
    gen_sample_lb, gen_twin, instance_rng, salem_spencer, CorruptionMode, GeneratedInstance,
    Provenance,
};
use crate::violations::ViolationKind;

/// A fixed point count or an inclusive range drawn uniformly per trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Size {
    Fixed(usize),
    Range([usize; 2]),
}

impl Size {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> usize {
        match self {
            Size::Fixed(n) => n,
            Size::Range([lo, hi]) => rng.gen_range(lo.min(hi)..=hi.max(lo)),
        }
    }

    fn label(self) -> String {
        match self {
            Size::Fixed(n) => n.to_string(),
            Size::Range([lo, hi]) => format!("{lo}..{hi}"),
        }
    }
}

fn default_max_weight() -> u32 {
    20
}

/// Instance family; a fresh instance is generated per trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    Behrend {
        n: usize,
    },
    TwinGood {
        n: usize,
    },
    TwinBad {
        n: usize,
    },
    SampleLb {
        n: usize,
        eps: f64,
    },
    QueryLb {
        n: usize,
        eps: f64,
    },
    RandomMetric {
        n: Size,
        #[serde(default = "default_max_weight")]
        max_weight: u32,
    },
    RandomUltra {
        n: Size,
    },
    RandomTree {
        n: Size,
        #[serde(default = "default_max_weight")]
        max_weight: u32,
    },
    Corrupted {
        base: Box<InstanceSpec>,
        eps: f64,
        #[serde(default = "default_mode")]
        mode: CorruptionMode,
    },
}

fn default_mode() -> CorruptionMode {
    CorruptionMode::UniformRewrite
}

impl InstanceSpec {
    pub fn generate(&self, seed: u64) -> Result<GeneratedInstance> {
        let mut rng = instance_rng(seed ^ 0x5EED_0F51CE);
        Ok(match self {
            InstanceSpec::Behrend { n } => gen_behrend(*n, &salem_spencer(*n), seed),
            InstanceSpec::TwinGood { n } => gen_twin(*n, &salem_spencer(*n), seed).0,
            InstanceSpec::TwinBad { n } => gen_twin(*n, &salem_spencer(*n), seed).1,
            InstanceSpec::SampleLb { n, eps } => gen_sample_lb(*n, *eps, seed)?,
            InstanceSpec::QueryLb { n, eps } => gen_query_lb(*n, *eps, seed)?,
            InstanceSpec::RandomMetric { n, max_weight } => {
                gen_random_metric(n.draw(&mut rng), seed, *max_weight)
            }
            InstanceSpec::RandomUltra { n } => gen_random_ultra(n.draw(&mut rng), seed),
            InstanceSpec::RandomTree { n, max_weight } => {
                gen_random_tree(n.draw(&mut rng), seed, *max_weight)
            }
            InstanceSpec::Corrupted { base, eps, mode } => {
                let b = base.generate(seed)?;
                corrupt(&b, *eps, seed.wrapping_add(1), *mode)?
            }
        })
    }

    /// Violation type a detector looks for on this family.
    pub fn default_violation(&self) -> ViolationKind {
        match self {
            InstanceSpec::SampleLb { .. }
            | InstanceSpec::QueryLb { .. }
            | InstanceSpec::RandomUltra { .. } => ViolationKind::UltraTriple,
            InstanceSpec::RandomTree { .. } => ViolationKind::TreeQuadruple,
            InstanceSpec::Corrupted { base, .. } => base.default_violation(),
            _ => ViolationKind::Triangle,
        }
    }

    pub fn label(&self) -> String {
        match self {
            InstanceSpec::Behrend { n } => format!("behrend(n={n})"),
            InstanceSpec::TwinGood { n } => format!("twin_good(n={n})"),
            InstanceSpec::TwinBad { n } => format!("twin_bad(n={n})"),
            InstanceSpec::SampleLb { n, eps } => format!("sample_lb(n={n};eps={eps})"),
            InstanceSpec::QueryLb { n, eps } => format!("query_lb(n={n};eps={eps})"),
            InstanceSpec::RandomMetric { n, .. } => format!("random_metric(n={})", n.label()),
            InstanceSpec::RandomUltra { n } => format!("random_ultra(n={})", n.label()),
            InstanceSpec::RandomTree { n, .. } => format!("random_tree(n={})", n.label()),
            InstanceSpec::Corrupted { base, eps, .. } => {
                format!("corrupted({};eps={eps})", base.label())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InstanceSpec::Corrupted { base, eps, .. } => {
                if !(0.0..=1.0).contains(eps) {
                    return Err(Error::param(format!(
                        "corruption eps must lie in [0, 1], got {eps}"
                    )));
                }
                base.validate()
            }
            InstanceSpec::SampleLb { eps, .. } | InstanceSpec::QueryLb { eps, .. }
                if !(*eps > 0.0 && *eps < 1.0) =>
            {
                Err(Error::param(format!("eps must lie in (0, 1), got {eps}")))
            }
            _ => Ok(()),
        }
    }
}

/// Ordered entries that provably must change to make `inst` a member of
/// the class tested by `kind`, when known.
///
/// Hard instances are certified by construction for the classes they were
/// built against; everything else relies on the edge-disjoint packing bound.
pub fn certified_farness(
    inst: &GeneratedInstance,
    kind: crate::testers::TesterKind,
) -> Option<f64> {
    use crate::testers::TesterKind;
    let n = inst.matrix.n();
    let n2 = (n * n) as f64;
    let eps_param = || inst.params.get("eps").and_then(|v| v.as_f64());
    match (inst.provenance, kind) {
        (Provenance::SampleLb | Provenance::QueryLb, TesterKind::Ultra | TesterKind::Tree) => {
            eps_param()
        }
        (
            Provenance::RandomMetric
            | Provenance::RandomUltra
            | Provenance::RandomTree
            | Provenance::TwinGood,
            _,
        ) => None,
        (_, TesterKind::Metric) => {
            let lower = match inst.certified_lower_entries() {
                Some(l) => l,
                None => {
                    crate::repair::farness_lower_bound(&inst.matrix)
                        .ok()?
                        .lower_entries
                }
            };
            Some(lower as f64 / n2)
        }
        _ => None,
    }
}
