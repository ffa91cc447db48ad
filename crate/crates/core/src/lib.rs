//! Sublinear property testers for metric, ultrametric and tree-metric
//! distance matrices, with violation oracles, repair bounds, hard-instance
//! generators, skeleton diagnostics and a Monte-Carlo experiment harness.

pub mod clean;
pub mod error;
pub mod experiments;
pub mod generators;
pub mod matrix;
pub mod oracle;
pub mod repair;
pub mod skeleton;
pub mod stats;
pub mod testers;
pub mod violations;

pub use error::{Error, Result};
pub use generators::{GeneratedInstance, InstanceMeta, Provenance};
pub use matrix::{load_matrix, save_matrix, DistanceMatrix};
pub use oracle::QueryOracle;
pub use repair::FarnessBounds;
pub use skeleton::{SkeletonKind, SkeletonState};
pub use testers::{ConstantsProfile, ProfileName, TestOptions, TestReport, TesterKind, Verdict};
pub use violations::{Violation, ViolationKind};
