//! Item feature construction.
//!
//! Two feature families feed the policies:
//!
//! * Topic coverage ([`TopicProfile`]): each item spreads a fixed attraction
//!   mass uniformly over its topics. The feature of an item given an
//!   already-chosen prefix is its marginal coverage gain, which makes
//!   greedy list building submodular-aware.
//! * Latent relevance ([`RelevanceProfile`]): rows of the truncated SVD of
//!   the train interaction matrix, scaled by singular value and then
//!   normalized to unit length per item.
//!
//! Gain features are sparse (nonzero only on an item's topics), so the
//! write/clear pair lets selection loops reuse one dense scratch buffer
//! without re-zeroing the full vector per candidate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Per-item topic attraction table.
#[derive(Debug, Clone)]
pub struct TopicProfile {
    num_topics: usize,
    scale: f64,
    /// Per item: `(topic, attraction)` pairs sorted by topic index.
    item_topics: Vec<Vec<(usize, f64)>>,
}

impl TopicProfile {
    /// Build from per-item topic index lists. An item with `g` topics gets
    /// attraction `scale / g` on each of them; items with no topics get an
    /// all-zero row.
    pub fn build(topics_of: &[Vec<usize>], num_topics: usize, scale: f64) -> Result<Self> {
        if num_topics == 0 {
            return Err(Error::InvalidParameter {
                name: "num_topics",
                reason: "must be at least 1".into(),
            });
        }
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "topic_scale",
                reason: format!("must be in (0, 1], got {scale}"),
            });
        }
        let mut item_topics = Vec::with_capacity(topics_of.len());
        for (item, topics) in topics_of.iter().enumerate() {
            let mut uniq: Vec<usize> = topics.clone();
            uniq.sort_unstable();
            uniq.dedup();
            if let Some(&bad) = uniq.iter().find(|&&t| t >= num_topics) {
                return Err(Error::InvalidParameter {
                    name: "topics_of",
                    reason: format!("item {item} has topic index {bad} >= {num_topics}"),
                });
            }
            let attraction = scale / uniq.len().max(1) as f64;
            item_topics.push(uniq.into_iter().map(|t| (t, attraction)).collect());
        }
        Ok(Self { num_topics, scale, item_topics })
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn num_items(&self) -> usize {
        self.item_topics.len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `(topic, attraction)` pairs of one item.
    pub fn item_topics(&self, item: usize) -> &[(usize, f64)] {
        &self.item_topics[item]
    }

    /// Write the coverage gain of `item` on top of `prefix` into
    /// `out[offset..]`, touching only the item's topic slots. Pair with
    /// [`clear_gain`](Self::clear_gain) before moving to the next candidate.
    pub fn gain_into(&self, item: usize, prefix: &[f64], out: &mut [f64], offset: usize) {
        for &(t, cov) in &self.item_topics[item] {
            out[offset + t] = (1.0 - prefix[t]) * cov;
        }
    }

    /// Zero exactly the slots [`gain_into`](Self::gain_into) wrote.
    pub fn clear_gain(&self, item: usize, out: &mut [f64], offset: usize) {
        for &(t, _) in &self.item_topics[item] {
            out[offset + t] = 0.0;
        }
    }

    /// `sum_j weights[offset + j] * gain_j` without materializing the gain.
    pub fn gain_dot(&self, item: usize, prefix: &[f64], weights: &[f64], offset: usize) -> f64 {
        let mut acc = 0.0;
        for &(t, cov) in &self.item_topics[item] {
            acc += weights[offset + t] * (1.0 - prefix[t]) * cov;
        }
        acc
    }

    /// Fold `item` into the prefix coverage. Uses the same increment
    /// expression as [`gain_into`](Self::gain_into), so a recorded gain
    /// feature is bit-identical to the prefix change it caused.
    pub fn absorb(&self, item: usize, prefix: &mut [f64]) {
        for &(t, cov) in &self.item_topics[item] {
            prefix[t] += (1.0 - prefix[t]) * cov;
        }
    }

    /// Coverage of a whole list, `1 - prod(1 - attraction)` per topic.
    pub fn list_coverage(&self, items: &[usize]) -> Vec<f64> {
        let mut miss = vec![1.0; self.num_topics];
        for &item in items {
            for &(t, cov) in &self.item_topics[item] {
                miss[t] *= 1.0 - cov;
            }
        }
        miss.iter().map(|m| 1.0 - m).collect()
    }
}

/// Truncated-SVD item embeddings.
#[derive(Debug, Clone)]
pub struct RelevanceProfile {
    rank: usize,
    /// Row-major `[num_items][rank]`, each row unit-norm or all-zero.
    features: Vec<f64>,
    num_items: usize,
}

impl RelevanceProfile {
    /// Decompose a users-by-items train matrix and keep the top `rank`
    /// components. Item `i` gets the vector `(sigma_j * v[i, j])_j`,
    /// sign-fixed per component (largest-magnitude entry positive) and then
    /// normalized to unit length.
    pub fn from_train_matrix(matrix: &DMatrix<f64>, rank: usize) -> Result<Self> {
        let (nrows, ncols) = matrix.shape();
        if rank == 0 {
            return Err(Error::InvalidParameter {
                name: "svd_rank",
                reason: "must be at least 1".into(),
            });
        }
        let max_rank = nrows.min(ncols);
        if rank > max_rank {
            return Err(Error::NotEnough {
                what: "svd components",
                need: rank,
                have: max_rank,
            });
        }

        let svd = matrix.clone().svd(false, true);
        let v_t = svd.v_t.expect("svd requested v_t");
        let sigma = &svd.singular_values;

        // Order components by descending singular value ourselves rather
        // than trusting the decomposition's ordering.
        let mut order: Vec<usize> = (0..sigma.len()).collect();
        order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
        let order = &order[..rank];

        let mut features = vec![0.0; ncols * rank];
        for (j, &comp) in order.iter().enumerate() {
            // Sign convention: make the largest-magnitude entry of each
            // component positive so the embedding does not depend on the
            // decomposition's arbitrary sign choices.
            let mut best = 0usize;
            let mut best_mag = -1.0;
            for i in 0..ncols {
                let mag = v_t[(comp, i)].abs();
                if mag > best_mag {
                    best_mag = mag;
                    best = i;
                }
            }
            let flip = if v_t[(comp, best)] < 0.0 { -1.0 } else { 1.0 };
            let s = sigma[comp] * flip;
            for i in 0..ncols {
                features[i * rank + j] = s * v_t[(comp, i)];
            }
        }

        for i in 0..ncols {
            let row = &mut features[i * rank..(i + 1) * rank];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v /= norm;
                }
            }
        }

        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "svd features" });
        }
        Ok(Self { rank, features, num_items: ncols })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn row(&self, item: usize) -> &[f64] {
        &self.features[item * self.rank..(item + 1) * self.rank]
    }
}

/// Both feature families for one catalog, as built from one train split.
#[derive(Debug, Clone)]
pub struct FeatureBundle {
    pub topics: TopicProfile,
    pub relevance: RelevanceProfile,
}

impl FeatureBundle {
    pub fn new(topics: TopicProfile, relevance: RelevanceProfile) -> Result<Self> {
        if topics.num_items() != relevance.num_items() {
            return Err(Error::DimensionMismatch {
                context: "feature bundle item counts",
                expected: topics.num_items(),
                got: relevance.num_items(),
            });
        }
        Ok(Self { topics, relevance })
    }

    pub fn num_items(&self) -> usize {
        self.topics.num_items()
    }

    pub fn topic_dim(&self) -> usize {
        self.topics.num_topics()
    }

    pub fn relevance_dim(&self) -> usize {
        self.relevance.rank()
    }

    pub fn hybrid_dim(&self) -> usize {
        self.relevance_dim() + self.topic_dim()
    }

    /// Concatenated `[relevance; coverage-at-empty-prefix]` vector, used to
    /// fit per-user ground-truth attraction models.
    pub fn ground_truth_feature(&self, item: usize) -> Vec<f64> {
        let r = self.relevance_dim();
        let mut x = vec![0.0; self.hybrid_dim()];
        x[..r].copy_from_slice(self.relevance.row(item));
        for &(t, cov) in self.topics.item_topics(item) {
            x[r + t] = cov;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toy_topics() -> TopicProfile {
        TopicProfile::build(&[vec![0], vec![0, 1], vec![1]], 2, 1.0).unwrap()
    }

    #[test]
    fn attraction_splits_mass_over_topics() {
        let p = toy_topics();
        assert_eq!(p.item_topics(0), &[(0, 1.0)]);
        assert_eq!(p.item_topics(1), &[(0, 0.5), (1, 0.5)]);
        assert_eq!(p.item_topics(2), &[(1, 1.0)]);

        let scaled = TopicProfile::build(&[vec![2, 5]], 6, 0.8).unwrap();
        assert_eq!(scaled.item_topics(0), &[(2, 0.4), (5, 0.4)]);
    }

    #[test]
    fn duplicate_topics_are_collapsed() {
        let p = TopicProfile::build(&[vec![1, 1, 0]], 2, 1.0).unwrap();
        assert_eq!(p.item_topics(0), &[(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn item_without_topics_has_zero_row() {
        let p = TopicProfile::build(&[vec![]], 3, 1.0).unwrap();
        assert!(p.item_topics(0).is_empty());
        assert_eq!(p.list_coverage(&[0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn list_coverage_matches_product_form() {
        let p = toy_topics();
        let c = p.list_coverage(&[0, 1]);
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn gain_is_the_prefix_increment() {
        let p = toy_topics();
        let mut prefix = vec![0.0; 2];
        p.absorb(1, &mut prefix);

        let mut gain = vec![0.0; 2];
        p.gain_into(2, &prefix, &mut gain, 0);
        let mut after = prefix.clone();
        p.absorb(2, &mut after);
        for t in 0..2 {
            // Bit-exact: absorb uses the same increment expression.
            assert_eq!(prefix[t] + gain[t], after[t]);
        }
        assert_abs_diff_eq!(gain[1], (1.0 - 0.5) * 1.0, epsilon = 1e-15);
    }

    #[test]
    fn gain_dot_matches_dense_gain() {
        let p = toy_topics();
        let prefix = vec![0.25, 0.5];
        let weights = vec![0.3, -0.7];
        let mut dense = vec![0.0; 2];
        p.gain_into(1, &prefix, &mut dense, 0);
        let expect: f64 = dense.iter().zip(&weights).map(|(g, w)| g * w).sum();
        assert_abs_diff_eq!(p.gain_dot(1, &prefix, &weights, 0), expect, epsilon = 1e-15);
    }

    #[test]
    fn clear_gain_restores_scratch() {
        let p = toy_topics();
        let prefix = vec![0.1, 0.2];
        let mut scratch = vec![0.0; 5];
        p.gain_into(1, &prefix, &mut scratch, 3);
        p.clear_gain(1, &mut scratch, 3);
        assert_eq!(scratch, vec![0.0; 5]);
    }

    #[test]
    fn build_rejects_bad_inputs() {
        assert!(TopicProfile::build(&[vec![0]], 0, 1.0).is_err());
        assert!(TopicProfile::build(&[vec![0]], 1, 0.0).is_err());
        assert!(TopicProfile::build(&[vec![0]], 1, 1.5).is_err());
        assert!(TopicProfile::build(&[vec![3]], 2, 1.0).is_err());
    }

    proptest! {
        // Absorbing items one at a time must agree with the closed-form
        // list coverage, and stay inside [0, 1].
        #[test]
        fn sequential_absorb_matches_list_coverage(
            picks in proptest::collection::vec(0usize..3, 0..6),
        ) {
            let p = toy_topics();
            let mut prefix = vec![0.0; 2];
            for &item in &picks {
                p.absorb(item, &mut prefix);
            }
            let direct = p.list_coverage(&picks);
            for t in 0..2 {
                prop_assert!((0.0..=1.0).contains(&prefix[t]));
                prop_assert!((prefix[t] - direct[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn svd_recovers_axis_aligned_embeddings() {
        // diag(2, 1): components are the coordinate axes with singular
        // values 2 and 1, so the normalized item rows are e1 and e2.
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let r = RelevanceProfile::from_train_matrix(&m, 2).unwrap();
        assert_abs_diff_eq!(r.row(0)[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.row(0)[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.row(1)[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.row(1)[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn svd_rows_are_unit_or_zero() {
        let m = DMatrix::from_fn(6, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 / 4.0);
        let r = RelevanceProfile::from_train_matrix(&m, 3).unwrap();
        for item in 0..5 {
            let n: f64 = r.row(item).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(n < 1e-12 || (n - 1.0).abs() < 1e-9, "row norm {n}");
        }
    }

    #[test]
    fn svd_identical_columns_get_identical_rows() {
        let mut m = DMatrix::from_fn(6, 4, |i, j| ((i * 5 + j * j) % 7) as f64);
        for i in 0..6 {
            m[(i, 3)] = m[(i, 1)];
        }
        let r = RelevanceProfile::from_train_matrix(&m, 2).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(r.row(3)[j], r.row(1)[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn svd_zero_column_stays_zero() {
        let mut m = DMatrix::from_fn(4, 3, |i, j| ((i + j) % 3) as f64);
        for i in 0..4 {
            m[(i, 2)] = 0.0;
        }
        let r = RelevanceProfile::from_train_matrix(&m, 2).unwrap();
        assert_eq!(r.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn svd_build_is_deterministic() {
        let m = DMatrix::from_fn(8, 6, |i, j| ((i * 13 + j * 11) % 9) as f64 - 4.0);
        let a = RelevanceProfile::from_train_matrix(&m, 4).unwrap();
        let b = RelevanceProfile::from_train_matrix(&m, 4).unwrap();
        for item in 0..6 {
            assert_eq!(a.row(item), b.row(item));
        }
    }

    #[test]
    fn svd_rejects_bad_rank() {
        let m = DMatrix::from_element(3, 4, 1.0);
        assert!(RelevanceProfile::from_train_matrix(&m, 0).is_err());
        assert!(matches!(
            RelevanceProfile::from_train_matrix(&m, 4),
            Err(Error::NotEnough { .. })
        ));
    }

    #[test]
    fn ground_truth_feature_concatenates_families() {
        let topics = toy_topics();
        let m = DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let rel = RelevanceProfile::from_train_matrix(&m, 2).unwrap();
        let bundle = FeatureBundle::new(topics, rel).unwrap();
        assert_eq!(bundle.hybrid_dim(), 4);
        let x = bundle.ground_truth_feature(1);
        assert_eq!(x.len(), 4);
        assert_eq!(&x[2..], &[0.5, 0.5]);
        assert_eq!(&x[..2], bundle.relevance.row(1));
    }

    #[test]
    fn bundle_rejects_mismatched_item_counts() {
        let topics = toy_topics();
        let m = DMatrix::from_element(2, 2, 1.0);
        let rel = RelevanceProfile::from_train_matrix(&m, 1).unwrap();
        assert!(FeatureBundle::new(topics, rel).is_err());
    }
}
