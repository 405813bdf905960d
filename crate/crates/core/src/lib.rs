//! Cascading bandit simulator and benchmark harness.
//!
//! The crate simulates online learning-to-rank recommenders under a cascade
//! click model and measures how exploration choices shape item, supplier,
//! and user-level exposure. Three ranking policies (CascadeLSB,
//! CascadeLinUCB, CascadeHybrid) are implemented behind a common strategy
//! trait, each with an optional exposure-discount variant that damps the
//! exploration bonus of items a user has already seen.
//!
//! Layering, bottom to top:
//!
//! * [`linalg`]: incremental ridge regression shared by every policy.
//! * [`features`]: topic-coverage and latent-relevance item features.
//! * [`clickmodel`]: ground-truth attraction fitting and cascade sampling.
//! * [`bandits`]: the policy trait, its three implementations, and the
//!   name-keyed registry used by configs and the CLI.
//! * [`metrics`]: exposure concentration and regret metrics.
//! * [`data`]: interaction-table loading, filtering, and splitting.
//! * [`runner`]: experiment configs, the simulation loop, and CSV output.

pub mod bandits;
pub mod clickmodel;
pub mod data;
pub mod error;
pub mod features;
pub mod linalg;
pub mod metrics;
pub mod runner;
pub mod seeding;
pub mod synthetic;

pub use error::{Error, Result};
