//! User-side simulation: ground-truth attraction, cascade clicks, regret.
//!
//! Each evaluated user gets a [`GroundTruthUser`]: per-item attraction
//! probabilities fitted offline to the user's held-out positives, the
//! optimal length-K list under those probabilities, and its expected
//! reward. The cascade sampler then draws clicks top-down: the user
//! examines positions in order and stops at the first attractive item.
//!
//! Products over `(1 - w)` factors are always computed in ascending factor
//! order. That makes expected reward bit-identical under list reordering
//! and, because the optimal list takes the pointwise-smallest factors,
//! keeps per-step regret nonnegative in float arithmetic, not just in
//! exact arithmetic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureBundle;
use crate::linalg::RidgeState;

/// Settings for the offline ground-truth fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundTruthConfig {
    /// Ridge regularizer for the attraction fit.
    pub reg: f64,
    /// How many non-liked items to use as negatives; `None` means all.
    pub negative_samples: Option<usize>,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self { reg: 1.0, negative_samples: None }
    }
}

/// Fitted user model: true attraction per item plus the oracle list.
#[derive(Debug, Clone)]
pub struct GroundTruthUser {
    user_id: u64,
    weights: Vec<f64>,
    optimal_list: Vec<usize>,
    optimal_reward: f64,
    /// `prod(1 - w)` over the optimal list, kept so regret can be computed
    /// as a difference of miss probabilities without cancellation.
    optimal_miss: f64,
}

impl GroundTruthUser {
    /// Build directly from known attraction weights (synthetic scenarios,
    /// tests). Weights must already lie in [0, 1].
    pub fn from_weights(user_id: u64, weights: Vec<f64>, k: usize) -> Result<Self> {
        if let Some(&w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: format!("attraction {w} outside [0, 1]"),
            });
        }
        let optimal_list = optimal_list(&weights, k)?;
        let optimal_miss = miss_probability(&optimal_list, &weights)?;
        Ok(Self {
            user_id,
            weights,
            optimal_list,
            optimal_reward: 1.0 - optimal_miss,
            optimal_miss,
        })
    }

    pub fn user_id(&self) -> u64 {
        self.user_id
    }

    /// True attraction probability per catalog item, all in [0, 1].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn optimal_list(&self) -> &[usize] {
        &self.optimal_list
    }

    pub fn optimal_reward(&self) -> f64 {
        self.optimal_reward
    }
}

/// Result of one cascade interaction. The examined positions are always a
/// prefix of the shown list; `click_position` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickOutcome {
    pub examined: usize,
    pub click_position: Option<usize>,
}

impl ClickOutcome {
    /// Check the cascade invariants against a list of length `k`.
    pub fn check(&self, k: usize) -> Result<()> {
        let ok = match self.click_position {
            Some(p) => p >= 1 && p <= k && self.examined == p,
            None => self.examined == k,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutcomeMismatch {
                reason: format!(
                    "examined={} click={:?} against list length {k}",
                    self.examined, self.click_position
                ),
            })
        }
    }
}

/// Fit a user's attraction model by ridge regression of the concatenated
/// item features against the binary held-out profile: y = 1 for each item
/// in `test_positives`, y = 0 for (a sample of) the rest. Predictions are
/// clipped to [0, 1].
pub fn fit_ground_truth<R: Rng>(
    user_id: u64,
    test_positives: &[usize],
    bundle: &FeatureBundle,
    k: usize,
    cfg: &GroundTruthConfig,
    rng: &mut R,
) -> Result<GroundTruthUser> {
    let num_items = bundle.num_items();
    if num_items == 0 {
        return Err(Error::EmptyTable { context: "ground-truth catalog".into() });
    }
    if test_positives.is_empty() {
        return Err(Error::NotEnough { what: "test-half positives", need: 1, have: 0 });
    }
    let mut is_positive = vec![false; num_items];
    for &item in test_positives {
        if item >= num_items {
            return Err(Error::UnknownItem { item: item as u64 });
        }
        is_positive[item] = true;
    }

    let negatives: Vec<usize> = (0..num_items).filter(|&i| !is_positive[i]).collect();
    let negatives: Vec<usize> = match cfg.negative_samples {
        None => negatives,
        Some(m) => {
            let take = m.min(negatives.len());
            let mut picked: Vec<usize> = rand::seq::index::sample(rng, negatives.len(), take)
                .into_iter()
                .map(|i| negatives[i])
                .collect();
            picked.sort_unstable();
            picked
        }
    };

    let mut fit = RidgeState::new(bundle.hybrid_dim(), cfg.reg)?;
    for i in 0..num_items {
        if is_positive[i] {
            fit.update(&bundle.ground_truth_feature(i), 1.0)?;
        }
    }
    for &i in &negatives {
        fit.update(&bundle.ground_truth_feature(i), 0.0)?;
    }

    let theta = fit.theta();
    let mut weights = Vec::with_capacity(num_items);
    for i in 0..num_items {
        let x = bundle.ground_truth_feature(i);
        let pred: f64 = x.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
        if !pred.is_finite() {
            return Err(Error::NonFinite { context: "ground-truth prediction" });
        }
        weights.push(pred.clamp(0.0, 1.0));
    }

    GroundTruthUser::from_weights(user_id, weights, k)
}

/// The K items with largest attraction, descending, ties by ascending id.
/// Because the reward `1 - prod(1 - w)` is monotone in every weight, this
/// set maximizes expected reward over all K-subsets.
pub fn optimal_list(weights: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "list length must be at least 1".into(),
        });
    }
    if k > weights.len() {
        return Err(Error::NotEnough { what: "items", need: k, have: weights.len() });
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// `prod(1 - w)` over the list, factors multiplied in ascending order.
fn miss_probability(list: &[usize], weights: &[f64]) -> Result<f64> {
    let mut factors = Vec::with_capacity(list.len());
    for &item in list {
        let w = *weights.get(item).ok_or(Error::UnknownItem { item: item as u64 })?;
        factors.push(1.0 - w);
    }
    factors.sort_by(f64::total_cmp);
    Ok(factors.iter().product())
}

/// Probability the user clicks anywhere in the list: `1 - prod(1 - w)`.
pub fn expected_reward(list: &[usize], weights: &[f64]) -> Result<f64> {
    Ok(1.0 - miss_probability(list, weights)?)
}

/// Scan the list top-down, drawing one Bernoulli per examined position;
/// stop at the first success.
pub fn sample_cascade<R: Rng>(list: &[usize], weights: &[f64], rng: &mut R) -> ClickOutcome {
    for (pos, &item) in list.iter().enumerate() {
        if rng.random::<f64>() < weights[item] {
            return ClickOutcome { examined: pos + 1, click_position: Some(pos + 1) };
        }
    }
    ClickOutcome { examined: list.len(), click_position: None }
}

/// Expected-reward gap between the oracle list and the chosen list.
/// Computed as a difference of miss probabilities; the shared sorted-order
/// product evaluation keeps it nonnegative even in float arithmetic.
pub fn step_regret(chosen: &[usize], gt: &GroundTruthUser) -> Result<f64> {
    let miss = miss_probability(chosen, &gt.weights)?;
    Ok(miss - gt.optimal_miss)
}
