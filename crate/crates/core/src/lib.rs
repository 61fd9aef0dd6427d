//! Distributed Benjamini-Hochberg over a star network.
//!
//! Every leaf node estimates its local proportion of true nulls and sends
//! `(m_i, r0_hat_i)` to a center node. The center pools these into a global
//! slope `beta_star` and broadcasts it; each node then runs plain BH at a
//! calibrated local level. The crate also carries the pieces needed to study
//! the method empirically: seeded data generation, asymptotic oracles, and an
//! experiment harness that writes CSV.

pub mod datagen;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod normal;
pub mod oracle;
pub mod protocol;
pub mod seed;
pub mod testing;

pub use error::{Error, Result};
pub use estimators::{Estimator, SpacingConfig, StoreyConfig};
pub use testing::{bh_procedure, bonferroni, BhResult, PValueBatch, TrialMetrics};
