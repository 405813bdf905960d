//! Ranking policies and the strategy registry.
//!
//! Every algorithm variant implements [`CascadePolicy`] and is constructed
//! through [`build_policy`] from a [`PolicyConfig`], so configs and the CLI
//! select strategies by name at runtime. The score of an item is
//!
//! ```text
//! utility = attraction_estimate + c * width            (original)
//! utility = attraction_estimate + c * (1 - N_i/t) * width   (exposure-discounted)
//! ```
//!
//! where `N_i` counts how often this user was already shown item `i` and
//! `t` is the current step. At `N_i = 0` or `c = 0` the two coincide
//! exactly, list for list.

mod hybrid;
mod linucb;
mod lsb;
mod select;

pub use hybrid::CascadeHybrid;
pub use linucb::CascadeLinUcb;
pub use lsb::CascadeLsb;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clickmodel::ClickOutcome;
use crate::error::{Error, Result};
use crate::features::FeatureBundle;
use crate::linalg::RidgeState;

/// The registered strategy names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Topic-coverage gain features, greedy per-position list build.
    #[serde(rename = "cascade-lsb")]
    Lsb,
    /// Latent-relevance features, top-K by utility.
    #[serde(rename = "cascade-linucb")]
    LinUcb,
    /// Concatenated relevance and gain features, greedy build.
    #[serde(rename = "cascade-hybrid")]
    Hybrid,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Lsb, PolicyKind::LinUcb, PolicyKind::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Lsb => "cascade-lsb",
            PolicyKind::LinUcb => "cascade-linucb",
            PolicyKind::Hybrid => "cascade-hybrid",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown policy {s:?}; registered: cascade-lsb, cascade-linucb, cascade-hybrid"
                ))
            })
    }
}

/// Full parameterization of one strategy instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Exploration coefficient weighting the confidence width.
    pub c: f64,
    /// Recommendation list length.
    pub k: usize,
    /// Apply the per-user exposure discount to the exploration bonus.
    pub unbiased: bool,
    /// Ridge regularizer of the attraction model.
    pub reg: f64,
    /// Clip the attraction estimate to [0, 1] before adding the bonus.
    pub clip_attraction: bool,
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: format!("must be finite and nonnegative, got {}", self.c),
            });
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: "list length must be at least 1".into(),
            });
        }
        if !(self.reg > 0.0 && self.reg.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "reg",
                reason: format!("must be finite and positive, got {}", self.reg),
            });
        }
        Ok(())
    }
}

/// Per-user recommendation counts and the current step index.
///
/// Invariants: `step` starts at 1; after recording `s` traces of `K`
/// distinct items each, `sum(counts) = s * K` and every count is `<= s`.
#[derive(Debug, Clone)]
pub struct ExposureLedger {
    counts: Vec<u64>,
    step: u64,
}

impl ExposureLedger {
    pub fn new(num_items: usize) -> Self {
        Self { counts: vec![0; num_items], step: 1 }
    }

    /// Current step index `t`, 1-based.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn count(&self, item: usize) -> u64 {
        self.counts[item]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Record one shown list: bump each listed item and advance the step.
    pub fn record(&mut self, trace: &SelectionTrace) -> Result<()> {
        for (i, &a) in trace.list.iter().enumerate() {
            if a >= self.counts.len() {
                return Err(Error::UnknownItem { item: a as u64 });
            }
            if trace.list[..i].contains(&a) {
                return Err(Error::OutcomeMismatch {
                    reason: format!("duplicate item {a} in recorded list"),
                });
            }
        }
        for &a in &trace.list {
            self.counts[a] += 1;
        }
        self.step += 1;
        Ok(())
    }
}

/// One recommendation: the ordered list plus the exact feature vector each
/// position was scored with. Gain features depend on the list prefix, so
/// they cannot be reconstructed later without replaying the greedy build.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    pub list: Vec<usize>,
    pub features: Vec<Vec<f64>>,
}

/// Exposure discount `1 - n_i/t` applied to the exploration bonus.
pub fn discount_factor(n_i: u64, t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: "step index is 1-based".into(),
        });
    }
    if n_i > t {
        return Err(Error::InvalidParameter {
            name: "n_i",
            reason: format!("exposure count {n_i} exceeds step {t}"),
        });
    }
    Ok(1.0 - n_i as f64 / t as f64)
}

/// Score one item: clipped attraction estimate plus the (possibly
/// discounted) exploration bonus.
pub fn utility(
    estimate: f64,
    width: f64,
    cfg: &PolicyConfig,
    n_i: u64,
    t: u64,
) -> Result<f64> {
    if !(width >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "width",
            reason: format!("must be nonnegative, got {width}"),
        });
    }
    if !estimate.is_finite() {
        return Err(Error::NonFinite { context: "attraction estimate" });
    }
    let est = if cfg.clip_attraction { estimate.clamp(0.0, 1.0) } else { estimate };
    let bonus = if cfg.unbiased {
        cfg.c * discount_factor(n_i, t)? * width
    } else {
        cfg.c * width
    };
    Ok(est + bonus)
}

/// A ranking strategy: owns its ridge state and builds one list per step.
pub trait CascadePolicy {
    fn kind(&self) -> PolicyKind;

    fn config(&self) -> &PolicyConfig;

    fn ridge(&self) -> &RidgeState;

    fn ridge_mut(&mut self) -> &mut RidgeState;

    /// Build the next recommendation list given the user's exposure state.
    fn select(&self, ledger: &ExposureLedger) -> Result<SelectionTrace>;

    /// Absorb cascade feedback: one ridge update per examined position,
    /// response 1 at the click and 0 above it. Positions below a click were
    /// never examined and must not touch the model.
    fn update_from_feedback(
        &mut self,
        trace: &SelectionTrace,
        outcome: &ClickOutcome,
    ) -> Result<()> {
        outcome.check(trace.list.len())?;
        if trace.features.len() != trace.list.len() {
            return Err(Error::OutcomeMismatch {
                reason: format!(
                    "trace has {} features for {} positions",
                    trace.features.len(),
                    trace.list.len()
                ),
            });
        }
        for pos in 0..outcome.examined {
            let y = match outcome.click_position {
                Some(p) if p == pos + 1 => 1.0,
                _ => 0.0,
            };
            self.ridge_mut().update(&trace.features[pos], y)?;
        }
        Ok(())
    }
}

/// Construct the strategy registered under `cfg.kind`.
pub fn build_policy(
    cfg: &PolicyConfig,
    bundle: Arc<FeatureBundle>,
) -> Result<Box<dyn CascadePolicy>> {
    cfg.validate()?;
    Ok(match cfg.kind {
        PolicyKind::Lsb => Box::new(CascadeLsb::new(cfg.clone(), bundle)?),
        PolicyKind::LinUcb => Box::new(CascadeLinUcb::new(cfg.clone(), bundle)?),
        PolicyKind::Hybrid => Box::new(CascadeHybrid::new(cfg.clone(), bundle)?),
    })
}


#[cfg(test)]
mod tests {
    use super::testsupport::{config, toy_bundle};
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn discount_factor_examples() {
        assert_eq!(discount_factor(0, 1).unwrap(), 1.0);
        assert_eq!(discount_factor(0, 999).unwrap(), 1.0);
        assert_eq!(discount_factor(7, 7).unwrap(), 0.0);
        assert_abs_diff_eq!(discount_factor(3, 10).unwrap(), 0.7, epsilon = 1e-15);
        assert!(discount_factor(1, 0).is_err());
        assert!(discount_factor(11, 10).is_err());
    }

    #[test]
    fn utility_examples() {
        let mut cfg = config(PolicyKind::LinUcb);
        cfg.c = 0.0;
        assert_eq!(utility(0.3, 0.5, &cfg, 0, 1).unwrap(), 0.3);

        cfg.c = 1.0;
        // Zero exposure: discounted form equals the original exactly.
        let orig = utility(0.3, 0.5, &cfg, 0, 10).unwrap();
        cfg.unbiased = true;
        assert_eq!(utility(0.3, 0.5, &cfg, 0, 10).unwrap(), orig);

        // Half-saturated item at c=1: 0.3 + (1 - 5/10) * 0.5 = 0.55.
        assert_abs_diff_eq!(utility(0.3, 0.5, &cfg, 5, 10).unwrap(), 0.55, epsilon = 1e-15);
    }

    #[test]
    fn utility_clips_estimate_before_bonus() {
        let mut cfg = config(PolicyKind::LinUcb);
        cfg.c = 2.0;
        assert_abs_diff_eq!(utility(1.7, 0.25, &cfg, 0, 1).unwrap(), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(utility(-0.4, 0.25, &cfg, 0, 1).unwrap(), 0.5, epsilon = 1e-15);
        cfg.clip_attraction = false;
        assert_abs_diff_eq!(utility(1.7, 0.25, &cfg, 0, 1).unwrap(), 2.2, epsilon = 1e-15);
    }

    #[test]
    fn utility_rejects_bad_terms() {
        let cfg = config(PolicyKind::LinUcb);
        assert!(utility(0.5, -0.1, &cfg, 0, 1).is_err());
        assert!(utility(f64::NAN, 0.1, &cfg, 0, 1).is_err());
    }

    #[test]
    fn ledger_records_and_advances() {
        let mut ledger = ExposureLedger::new(5);
        assert_eq!(ledger.step(), 1);
        let trace = SelectionTrace { list: vec![0, 3], features: vec![vec![], vec![]] };
        ledger.record(&trace).unwrap();
        assert_eq!(ledger.step(), 2);
        assert_eq!(ledger.counts(), &[1, 0, 0, 1, 0]);
        ledger.record(&trace).unwrap();
        assert_eq!(ledger.step(), 3);
        assert_eq!(ledger.counts(), &[2, 0, 0, 2, 0]);
        // Total exposure is (step - 1) * K.
        let total: u64 = ledger.counts().iter().sum();
        assert_eq!(total, (ledger.step() - 1) * 2);
    }

    #[test]
    fn ledger_rejects_bad_traces() {
        let mut ledger = ExposureLedger::new(3);
        let dup = SelectionTrace { list: vec![1, 1], features: vec![vec![], vec![]] };
        assert!(ledger.record(&dup).is_err());
        let oob = SelectionTrace { list: vec![7], features: vec![vec![]] };
        assert!(matches!(ledger.record(&oob), Err(Error::UnknownItem { item: 7 })));
        assert_eq!(ledger.step(), 1);
    }

    #[test]
    fn policy_names_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.name().parse::<PolicyKind>().unwrap(), kind);
            assert_eq!(kind.to_string(), kind.name());
        }
        assert!("cascade-ucb1".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn registry_dispatches_by_kind() {
        let bundle = toy_bundle();
        for kind in PolicyKind::ALL {
            let policy = build_policy(&config(kind), bundle.clone()).unwrap();
            assert_eq!(policy.kind(), kind);
        }
        let mut bad = config(PolicyKind::Lsb);
        bad.c = -1.0;
        assert!(build_policy(&bad, bundle).is_err());
    }

    #[test]
    fn feedback_updates_examined_prefix_only() {
        let bundle = toy_bundle();
        let mut cfg = config(PolicyKind::LinUcb);
        cfg.k = 4;
        let mut policy = build_policy(&cfg, bundle.clone()).unwrap();
        let ledger = ExposureLedger::new(bundle.num_items());
        let trace = policy.select(&ledger).unwrap();
        assert_eq!(trace.list.len(), 4);

        // Click at position 3: exactly three updates, response vector ends
        // up equal to the clicked position's features.
        let outcome = ClickOutcome { examined: 3, click_position: Some(3) };
        policy.update_from_feedback(&trace, &outcome).unwrap();
        assert_eq!(policy.ridge().updates(), 3);
        let resp = policy.ridge().response();
        for (i, &v) in trace.features[2].iter().enumerate() {
            assert_abs_diff_eq!(resp[i], v, epsilon = 1e-15);
        }

        // No click: all four positions examined with response 0.
        let outcome = ClickOutcome { examined: 4, click_position: None };
        policy.update_from_feedback(&trace, &outcome).unwrap();
        assert_eq!(policy.ridge().updates(), 7);

        // Click at 1: single update.
        let outcome = ClickOutcome { examined: 1, click_position: Some(1) };
        policy.update_from_feedback(&trace, &outcome).unwrap();
        assert_eq!(policy.ridge().updates(), 8);
    }

    #[test]
    fn feedback_rejects_mismatched_outcome() {
        let bundle = toy_bundle();
        let mut policy = build_policy(&config(PolicyKind::LinUcb), bundle.clone()).unwrap();
        let ledger = ExposureLedger::new(bundle.num_items());
        let trace = policy.select(&ledger).unwrap();
        let bad = ClickOutcome { examined: 2, click_position: Some(1) };
        assert!(policy.update_from_feedback(&trace, &bad).is_err());
        assert_eq!(policy.ridge().updates(), 0);
    }
}
