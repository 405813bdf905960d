//! Exposure-fairness and performance metrics over simulation logs.
//!
//! Coverage metrics ask how much of the catalog (or supplier pool) ever
//! got recommended; the Gini index asks how unevenly impressions are
//! spread over items; the permutation test decides whether a metric shift
//! between two policy variants is larger than seed noise.

use std::collections::BTreeMap;

use itertools::Itertools;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding;

/// Impression tallies for one run: global per-item counts plus the
/// per-user breakdown they marginalize from.
#[derive(Debug, Clone)]
pub struct ImpressionCounts {
    num_items: usize,
    num_suppliers: usize,
    supplier_of: Vec<usize>,
    per_item: Vec<u64>,
    per_user_item: BTreeMap<u64, Vec<u64>>,
}

impl ImpressionCounts {
    pub fn new(supplier_of: Vec<usize>, num_suppliers: usize) -> Result<Self> {
        if supplier_of.is_empty() {
            return Err(Error::EmptyTable { context: "impression catalog".into() });
        }
        if let Some(&bad) = supplier_of.iter().find(|&&s| s >= num_suppliers) {
            return Err(Error::InvalidParameter {
                name: "supplier_of",
                reason: format!("supplier index {bad} >= {num_suppliers}"),
            });
        }
        let num_items = supplier_of.len();
        Ok(Self {
            num_items,
            num_suppliers,
            supplier_of,
            per_item: vec![0; num_items],
            per_user_item: BTreeMap::new(),
        })
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_suppliers(&self) -> usize {
        self.num_suppliers
    }

    pub fn supplier_of(&self) -> &[usize] {
        &self.supplier_of
    }

    pub fn per_item(&self) -> &[u64] {
        &self.per_item
    }

    pub fn users(&self) -> impl Iterator<Item = u64> + '_ {
        self.per_user_item.keys().copied()
    }

    pub fn total(&self) -> u64 {
        self.per_item.iter().sum()
    }

    /// Tally one shown list for one user.
    pub fn record_list(&mut self, user: u64, list: &[usize]) -> Result<()> {
        for (i, &a) in list.iter().enumerate() {
            if a >= self.num_items {
                return Err(Error::UnknownItem { item: a as u64 });
            }
            if list[..i].contains(&a) {
                return Err(Error::OutcomeMismatch {
                    reason: format!("duplicate item {a} in impression list"),
                });
            }
        }
        let per_user = self
            .per_user_item
            .entry(user)
            .or_insert_with(|| vec![0; self.num_items]);
        for &a in list {
            self.per_item[a] += 1;
            per_user[a] += 1;
        }
        Ok(())
    }

    /// Fold another tally (same catalog) into this one. Associative, so
    /// per-user runs can be aggregated in any grouping.
    pub fn merge(&mut self, other: &ImpressionCounts) -> Result<()> {
        if other.num_items != self.num_items || other.num_suppliers != self.num_suppliers {
            return Err(Error::DimensionMismatch {
                context: "impression merge",
                expected: self.num_items,
                got: other.num_items,
            });
        }
        for (mine, theirs) in self.per_item.iter_mut().zip(&other.per_item) {
            *mine += theirs;
        }
        for (user, counts) in &other.per_user_item {
            let entry = self
                .per_user_item
                .entry(*user)
                .or_insert_with(|| vec![0; self.num_items]);
            for (mine, theirs) in entry.iter_mut().zip(counts) {
                *mine += theirs;
            }
        }
        Ok(())
    }

    fn per_user_counts(&self) -> &BTreeMap<u64, Vec<u64>> {
        &self.per_user_item
    }
}

/// Prefix sums of per-step regrets; rejects negative entries since they
/// signal an upstream simulation bug.
pub fn cumulative_regret(step_regrets: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(step_regrets.len());
    let mut acc = 0.0;
    for (i, &r) in step_regrets.iter().enumerate() {
        if !(r >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "step_regrets",
                reason: format!("entry {i} is {r}, expected nonnegative"),
            });
        }
        acc += r;
        out.push(acc);
    }
    Ok(out)
}

/// Fraction of catalog items recommended at least once to any user.
pub fn item_coverage(counts: &ImpressionCounts) -> f64 {
    let seen = counts.per_item.iter().filter(|&&c| c > 0).count();
    seen as f64 / counts.num_items as f64
}

/// Fraction of suppliers with at least one recommended item.
pub fn supplier_coverage(counts: &ImpressionCounts) -> f64 {
    let mut seen = vec![false; counts.num_suppliers];
    for (item, &c) in counts.per_item.iter().enumerate() {
        if c > 0 {
            seen[counts.supplier_of[item]] = true;
        }
    }
    let hit = seen.iter().filter(|&&s| s).count();
    hit as f64 / counts.num_suppliers as f64
}

/// Mean over users of the fraction of distinct items each user was shown.
pub fn user_item_coverage(counts: &ImpressionCounts) -> Result<f64> {
    let users = counts.per_user_counts();
    if users.is_empty() {
        return Err(Error::NotEnough { what: "simulated users", need: 1, have: 0 });
    }
    let mut acc = 0.0;
    for per_item in users.values() {
        let distinct = per_item.iter().filter(|&&c| c > 0).count();
        acc += distinct as f64 / counts.num_items as f64;
    }
    Ok(acc / users.len() as f64)
}

/// Gini index of a count vector: 0 for perfectly uniform exposure, 1 in
/// the limit of all mass on one item. Sorted-index estimator
/// `sum((2i - L - 1) * x_i) / (L * sum(x))` with x ascending, i 1-based.
pub fn gini(frequencies: &[u64]) -> Result<f64> {
    if frequencies.is_empty() {
        return Err(Error::InvalidParameter {
            name: "frequencies",
            reason: "empty input".into(),
        });
    }
    let total: u64 = frequencies.iter().sum();
    if total == 0 {
        return Err(Error::AllZeroFrequencies { metric: "gini" });
    }
    let mut sorted = frequencies.to_vec();
    sorted.sort_unstable();
    let l = sorted.len() as f64;
    let mut acc = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        acc += (2.0 * (i + 1) as f64 - l - 1.0) * x as f64;
    }
    Ok(acc / (l * total as f64))
}

/// Two-sided permutation test on the difference of group means.
///
/// Exhaustive over all reassignments when the pooled sample has at most 12
/// values, otherwise 10^5 random reassignments from a fixed stream (with
/// the add-one correction). Identical groups give p = 1.
pub fn significance_test(samples_a: &[f64], samples_b: &[f64]) -> Result<f64> {
    let need = 2;
    if samples_a.len() < need || samples_b.len() < need {
        return Err(Error::TooFewSamples {
            need,
            got: samples_a.len().min(samples_b.len()),
        });
    }
    if samples_a.iter().chain(samples_b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "significance test samples" });
    }

    let pool: Vec<f64> = samples_a.iter().chain(samples_b).copied().collect();
    let na = samples_a.len();
    let total = pool.len();
    let diff = |idx_a: &[usize]| -> f64 {
        let mut in_a = vec![false; total];
        for &i in idx_a {
            in_a[i] = true;
        }
        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        for (i, &v) in pool.iter().enumerate() {
            if in_a[i] {
                sum_a += v;
            } else {
                sum_b += v;
            }
        }
        sum_a / na as f64 - sum_b / (total - na) as f64
    };
    let observed = diff(&(0..na).collect::<Vec<_>>()).abs();

    if total <= 12 {
        let mut extreme = 0usize;
        let mut count = 0usize;
        for idx_a in (0..total).combinations(na) {
            count += 1;
            if diff(&idx_a).abs() >= observed {
                extreme += 1;
            }
        }
        Ok(extreme as f64 / count as f64)
    } else {
        const RESAMPLES: usize = 100_000;
        let mut rng = seeding::stream(0, &[seeding::role::PERMUTATION]);
        let mut extreme = 0usize;
        let mut indices: Vec<usize> = (0..total).collect();
        for _ in 0..RESAMPLES {
            // Partial Fisher-Yates: the first na slots become group A.
            for i in 0..na {
                let j = i + (rng.random::<u64>() as usize) % (total - i);
                indices.swap(i, j);
            }
            if diff(&indices[..na]).abs() >= observed {
                extreme += 1;
            }
        }
        Ok((extreme + 1) as f64 / (RESAMPLES + 1) as f64)
    }
}
