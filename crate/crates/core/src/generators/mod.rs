//! Instance generators. Every generator is a pure function of its parameters
//! and seed; hard instances are relabeled by a recorded random permutation.

mod hard;
mod random;
mod salem_spencer;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use hard::{
    behrend_unpermuted, gen_behrend, gen_query_lb, gen_sample_lb, gen_twin, query_lb_shape,
    query_lb_unpermuted, sample_lb_sizes, sample_lb_unpermuted, twin_unpermuted,
};
pub use random::{
    gen_random_metric, gen_random_tree, gen_random_ultra, random_metric_matrix, random_tree_matrix,
    random_ultra_matrix,
};
pub use salem_spencer::{salem_spencer, SalemSpencerSet};

use crate::error::{Error, Result};
use crate::matrix::{load_matrix, save_matrix, DistanceMatrix};
use crate::repair::farness_lower_bound;
use crate::violations::TRIPLE_CAP;

pub type Params = BTreeMap<String, serde_json::Value>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Behrend,
    TwinGood,
    TwinBad,
    SampleLb,
    QueryLb,
    RandomMetric,
    RandomUltra,
    RandomTree,
    Corrupted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedInstance {
    pub matrix: DistanceMatrix,
    pub provenance: Provenance,
    pub params: Params,
    /// `permutation[original] = stored index`.
    pub permutation: Vec<usize>,
}

/// Everything about an instance except the matrix; stored as a JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub provenance: Provenance,
    pub params: Params,
    pub permutation: Vec<usize>,
}

impl GeneratedInstance {
    pub fn meta(&self) -> InstanceMeta {
        InstanceMeta {
            provenance: self.provenance,
            params: self.params.clone(),
            permutation: self.permutation.clone(),
        }
    }

    pub fn from_meta(matrix: DistanceMatrix, meta: InstanceMeta) -> Self {
        Self {
            matrix,
            provenance: meta.provenance,
            params: meta.params,
            permutation: meta.permutation,
        }
    }

    fn param_usize(&self, key: &str) -> Option<usize> {
        self.params.get(key)?.as_u64().map(|v| v as usize)
    }

    /// Stored indices of the bad group of a `D_s` instance.
    pub fn sample_lb_bad_set(&self) -> Option<Vec<usize>> {
        if self.provenance != Provenance::SampleLb {
            return None;
        }
        let good = self.param_usize("good")?;
        Some(self.permutation[good..].to_vec())
    }

    /// Block label of each stored index of a `D_q` instance (`None` for the remainder).
    pub fn query_lb_blocks(&self) -> Option<Vec<Option<usize>>> {
        if self.provenance != Provenance::QueryLb {
            return None;
        }
        let r = self.param_usize("block_size")?;
        let l = self.param_usize("blocks")?;
        let mut labels = vec![None; self.matrix.n()];
        for (orig, &stored) in self.permutation.iter().enumerate() {
            labels[stored] = (orig / r < l).then_some(orig / r);
        }
        Some(labels)
    }

    /// Certified lower bound on ordered-entry farness recorded by [`corrupt`].
    pub fn certified_lower_entries(&self) -> Option<usize> {
        self.param_usize("certified_lower_entries")
    }
}

/// Sidecar path next to a matrix file: `<file>.prov.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".prov.json");
    PathBuf::from(s)
}

/// Writes the matrix and its provenance sidecar.
pub fn save_instance(inst: &GeneratedInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    save_matrix(&inst.matrix, path)?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&inst.meta())?;
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

/// Loads a matrix and, if present, its sidecar.
pub fn load_instance(path: impl AsRef<Path>) -> Result<(DistanceMatrix, Option<InstanceMeta>)> {
    let path = path.as_ref();
    let m = load_matrix(path)?;
    let side = sidecar_path(path);
    let meta = match fs::read_to_string(&side) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(&side, e)),
    };
    Ok((m, meta))
}

pub fn instance_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// `floor(x)` for quantities like `eps·n` that should be integral but may
/// land a hair below due to rounding.
pub fn floor_count(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionMode {
    /// Rewrites `ceil(eps·n²/2)` uniformly chosen pairs with fresh values.
    UniformRewrite,
    /// Splits points into `x_1..x_r` and a bad group of `floor(eps·n)` and
    /// adds `i` to every `M(x_i, y)`.
    DsStyle,
}

/// Injects corruption and certifies the farness actually achieved.
///
/// The edit count is not a farness claim. When `n` is within the enumeration
/// cap, `certified_lower_entries` (ordered entries) and `certified_eps`
/// (that count over `n²`) are recorded from the greedy packing bound.
pub fn corrupt(
    inst: &GeneratedInstance,
    eps: f64,
    seed: u64,
    mode: CorruptionMode,
) -> Result<GeneratedInstance> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::param(format!(
            "corruption eps must lie in [0, 1], got {eps}"
        )));
    }
    let n = inst.matrix.n();
    let mut rng = instance_rng(seed);
    let mut m = inst.matrix.clone();
    let mut params = inst.params.clone();
    params.insert(
        "base_provenance".into(),
        serde_json::to_value(inst.provenance)?,
    );
    params.insert("corrupt_eps".into(), eps.into());
    params.insert("corrupt_seed".into(), seed.into());
    params.insert("corrupt_mode".into(), serde_json::to_value(mode)?);
    let rewritten = match mode {
        CorruptionMode::UniformRewrite => {
            let total = n * n.saturating_sub(1) / 2;
            let want = ((eps * (n * n) as f64 / 2.0).ceil() as usize).min(total);
            if want > 0 {
                let (vmin, vmax) = inst.matrix.off_diagonal_range().unwrap_or((1.0, 1.0));
                let (lo, hi) = (0.1 * vmin, 3.0 * vmax.max(vmin));
                let mut pairs: Vec<(usize, usize)> = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .collect();
                let (chosen, _) = pairs.partial_shuffle(&mut rng, want);
                for &(i, j) in chosen.iter() {
                    let old = m.get(i, j);
                    let v = loop {
                        let raw: f64 = rng.gen_range(lo..=hi);
                        let v = ((raw * 8.0).round() / 8.0).max(0.125);
                        if v != old {
                            break v;
                        }
                    };
                    m.set_sym(i, j, v);
                }
            }
            want
        }
        CorruptionMode::DsStyle => {
            let (r, b) = sample_lb_sizes(n, eps)?;
            let labeling = random_permutation(n, &mut rng);
            for (xi, &x) in labeling[..r].iter().enumerate() {
                for &y in &labeling[r..] {
                    let v = m.get(x, y) + (xi + 1) as f64;
                    m.set_sym(x, y, v);
                }
            }
            params.insert("ds_labeling".into(), labeling.into());
            r * b
        }
    };
    params.insert("rewritten_pairs".into(), rewritten.into());
    if n <= TRIPLE_CAP {
        let lower = farness_lower_bound(&m)?.lower_entries;
        params.insert("certified_lower_entries".into(), lower.into());
        params.insert(
            "certified_eps".into(),
            (lower as f64 / (n * n) as f64).into(),
        );
    } else {
        params.insert("certified_lower_entries".into(), serde_json::Value::Null);
    }
    Ok(GeneratedInstance {
        matrix: m,
        provenance: Provenance::Corrupted,
        params,
        permutation: inst.permutation.clone(),
    })
}
