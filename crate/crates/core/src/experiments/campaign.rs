use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{certified_farness, InstanceSpec};
use crate::error::{Error, Result};
use crate::oracle::QueryOracle;
use crate::stats::{derive_seed, RateEstimate};
use crate::testers::{run_tester, ConstantsProfile, ProfileName, TestOptions, TesterKind};

/// Reject probability the testers guarantee on far inputs.
pub const SOUNDNESS_TARGET: f64 = 2.0 / 3.0;
/// Allowance for Monte-Carlo noise below [`SOUNDNESS_TARGET`].
pub const SOUNDNESS_MARGIN: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub tester: TesterKind,
    pub instance: InstanceSpec,
    pub eps: f64,
    pub profile: ProfileName,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub two_phase: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CampaignKind {
    Soundness,
    Completeness,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub campaign: CampaignKind,
    pub spec: CampaignSpec,
    /// Trials whose instance could not be certified far enough (soundness only).
    pub skipped: Vec<usize>,
    pub evaluated: usize,
    pub rejects: usize,
    /// Reject rate for soundness, accept rate for completeness.
    pub estimate: RateEstimate,
    pub pass: bool,
}

#[derive(Serialize)]
struct CampaignRow {
    campaign: CampaignKind,
    tester: TesterKind,
    profile: ProfileName,
    eps: f64,
    instance: String,
    trials: usize,
    evaluated: usize,
    skipped: usize,
    rejects: usize,
    rate: f64,
    ci_low: f64,
    ci_high: f64,
    pass: bool,
    seed: u64,
}

impl CampaignReport {
    /// One-row CSV summary.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(CampaignRow {
            campaign: self.campaign,
            tester: self.spec.tester,
            profile: self.spec.profile,
            eps: self.spec.eps,
            instance: self.spec.instance.label(),
            trials: self.spec.trials,
            evaluated: self.evaluated,
            skipped: self.skipped.len(),
            rejects: self.rejects,
            rate: self.estimate.rate,
            ci_low: self.estimate.ci_low,
            ci_high: self.estimate.ci_high,
            pass: self.pass,
            seed: self.spec.seed,
        })?;
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

struct TrialResult {
    skipped: bool,
    rejected: bool,
}

fn run_trials(spec: &CampaignSpec, require_far: bool) -> Result<Vec<TrialResult>> {
    if !(spec.eps > 0.0 && spec.eps < 1.0) {
        return Err(Error::param(format!(
            "eps must lie in (0, 1), got {}",
            spec.eps
        )));
    }
    if spec.trials == 0 {
        return Err(Error::param("campaign needs at least one trial"));
    }
    spec.instance.validate()?;
    let profile = ConstantsProfile::named(spec.profile);
    (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let inst = spec.instance.generate(derive_seed(spec.seed, t as u64))?;
            if require_far && certified_farness(&inst, spec.tester).is_none_or(|f| f < spec.eps) {
                return Ok(TrialResult {
                    skipped: true,
                    rejected: false,
                });
            }
            let mut opts = TestOptions::new(
                spec.eps,
                profile.clone(),
                derive_seed(spec.seed ^ 0x7E57, t as u64),
            );
            opts.two_phase = spec.two_phase;
            let report = run_tester(spec.tester, &mut QueryOracle::new(&inst.matrix), &opts)?;
            if let Some(c) = &report.certificate {
                debug_assert!(c.verify(&inst.matrix));
            }
            Ok(TrialResult {
                skipped: false,
                rejected: report.rejected(),
            })
        })
        .collect()
}

/// Empirical reject rate on certified-far instances; passes when the 95%
/// lower bound clears `2/3 − 0.05`.
pub fn soundness_campaign(spec: &CampaignSpec) -> Result<CampaignReport> {
    let results = run_trials(spec, true)?;
    let skipped: Vec<usize> = (0..results.len()).filter(|&t| results[t].skipped).collect();
    let evaluated = results.len() - skipped.len();
    let rejects = results.iter().filter(|r| r.rejected).count();
    let estimate = RateEstimate::new(rejects as u64, evaluated as u64);
    Ok(CampaignReport {
        campaign: CampaignKind::Soundness,
        spec: spec.clone(),
        skipped,
        evaluated,
        rejects,
        pass: evaluated > 0 && estimate.ci_low >= SOUNDNESS_TARGET - SOUNDNESS_MARGIN,
        estimate,
    })
}

/// Accept rate on in-class instances; passes only when every trial accepts.
pub fn completeness_campaign(spec: &CampaignSpec) -> Result<CampaignReport> {
    let results = run_trials(spec, false)?;
    let evaluated = results.len();
    let rejects = results.iter().filter(|r| r.rejected).count();
    let estimate = RateEstimate::new((evaluated - rejects) as u64, evaluated as u64);
    Ok(CampaignReport {
        campaign: CampaignKind::Completeness,
        spec: spec.clone(),
        skipped: Vec::new(),
        evaluated,
        rejects,
        pass: rejects == 0,
        estimate,
    })
}
