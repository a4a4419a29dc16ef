//! Entropy/information-gain decision trees and two ensemble variants:
//! bootstrap random forests with exhaustive splits, and extremely randomized
//! trees drawing one uniform threshold per candidate feature.
//!
//! Determinism contract: every tree derives its generator from
//! `(config.seed, tree index)`, so a fitted forest is a pure function of
//! `(data, config)` no matter how many workers build it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::ingest::LabeledDataset;
use crate::rng::{stream_rng, DOMAIN_TREE};

// ---------------------------------------------------------------------------
// Impurity
// ---------------------------------------------------------------------------

/// Shannon entropy in bits of a label-count vector.
pub fn entropy(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Argument("entropy of an empty count vector".into()));
    }
    Ok(entropy_unchecked(counts, total as f64))
}

fn entropy_unchecked(counts: &[usize], total: f64) -> f64 {
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / total;
            h -= p * p.log2();
        }
    }
    h
}

/// `entropy(parent) - sum_k (n_k / n) * entropy(child_k)`. The children must
/// partition the parent counts element-wise.
pub fn information_gain(parent: &[usize], children: &[Vec<usize>]) -> Result<f64> {
    let mut sums = vec![0usize; parent.len()];
    for child in children {
        if child.len() != parent.len() {
            return Err(Error::Argument(
                "child count vector length differs from parent".into(),
            ));
        }
        for (s, &c) in sums.iter_mut().zip(child) {
            *s += c;
        }
    }
    if sums != parent {
        return Err(Error::Argument(
            "children do not partition the parent counts".into(),
        ));
    }
    let h_parent = entropy(parent)?;
    let n = parent.iter().sum::<usize>() as f64;
    let mut weighted = 0.0;
    for child in children {
        let t: usize = child.iter().sum();
        if t > 0 {
            weighted += (t as f64 / n) * entropy_unchecked(child, t as f64);
        }
    }
    Ok(h_parent - weighted)
}

/// Same accumulation order as [`information_gain`], used by the split sweep
/// so both paths produce bit-identical gains for identical count tuples.
fn gain_two_way(h_parent: f64, n: f64, left: &[usize], n_left: usize, right: &[usize], n_right: usize) -> f64 {
    let mut weighted = 0.0;
    if n_left > 0 {
        weighted += (n_left as f64 / n) * entropy_unchecked(left, n_left as f64);
    }
    if n_right > 0 {
        weighted += (n_right as f64 / n) * entropy_unchecked(right, n_right as f64);
    }
    h_parent - weighted
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesPerSplit {
    /// Consider every feature at every node.
    All,
    /// `floor(sqrt(feature_count))`, at least 1.
    Sqrt,
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Score midpoints between consecutive distinct sorted values.
    Exhaustive,
    /// Draw one uniform threshold in (min, max) per candidate feature.
    RandomThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub features_per_split: FeaturesPerSplit,
    pub split_mode: SplitMode,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl ForestConfig {
    /// Canonical random-forest defaults: 100 bagged trees, sqrt feature
    /// subsets, exhaustive splits, unlimited depth.
    pub fn random_forest(seed: u64) -> Self {
        ForestConfig {
            n_trees: 100,
            bootstrap: true,
            features_per_split: FeaturesPerSplit::Sqrt,
            split_mode: SplitMode::Exhaustive,
            max_depth: None,
            min_samples_split: 2,
            seed,
        }
    }

    /// Extra-trees defaults used for feature ranking: no bootstrap, random
    /// thresholds.
    pub fn extra_trees(seed: u64) -> Self {
        ForestConfig {
            n_trees: 100,
            bootstrap: false,
            features_per_split: FeaturesPerSplit::Sqrt,
            split_mode: SplitMode::RandomThreshold,
            max_depth: None,
            min_samples_split: 2,
            seed,
        }
    }

    /// A single plain decision tree over all features.
    pub fn single_tree(seed: u64) -> Self {
        ForestConfig {
            n_trees: 1,
            bootstrap: false,
            features_per_split: FeaturesPerSplit::All,
            split_mode: SplitMode::Exhaustive,
            max_depth: None,
            min_samples_split: 2,
            seed,
        }
    }

    fn resolve_features_per_split(&self, n_features: usize) -> Result<usize> {
        let k = match self.features_per_split {
            FeaturesPerSplit::All => n_features,
            FeaturesPerSplit::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            FeaturesPerSplit::Count(k) => k,
        };
        if k == 0 || k > n_features {
            return Err(Error::Argument(format!(
                "features_per_split {k} out of range for {n_features} features"
            )));
        }
        Ok(k)
    }

    fn validate(&self, n_features: usize) -> Result<usize> {
        if self.n_trees == 0 {
            return Err(Error::Argument("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Argument("min_samples_split must be at least 2".into()));
        }
        self.resolve_features_per_split(n_features)
    }
}

// ---------------------------------------------------------------------------
// Tree structure
// ---------------------------------------------------------------------------

/// Axis-aligned split: rows go left iff `value <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature_index: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        gain: f64,
        n: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        counts: Vec<usize>,
    },
}

impl TreeNode {
    fn n_samples(&self) -> usize {
        match self {
            TreeNode::Internal { n, .. } => *n,
            TreeNode::Leaf { counts } => counts.iter().sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub n_labels: usize,
    pub feature_count: usize,
    pub config: ForestConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub config: ForestConfig,
    pub n_labels: usize,
}

// ---------------------------------------------------------------------------
// Split search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSplit {
    pub rule: SplitRule,
    pub gain: f64,
}

fn label_counts(rows: &[usize], data: &LabeledDataset, n_labels: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_labels];
    for &r in rows {
        counts[data.labels()[r]] += 1;
    }
    counts
}

/// Best split over the candidate features, or `None` when no candidate
/// yields positive gain with a non-empty two-sided partition. Candidates are
/// scanned in the given order; strictly greater gain wins, so ties keep the
/// earliest candidate.
pub fn find_best_split(
    rows: &[usize],
    data: &LabeledDataset,
    candidate_features: &[usize],
    mode: SplitMode,
    rng: &mut ChaCha8Rng,
) -> Result<Option<ScoredSplit>> {
    if rows.len() < 2 {
        return Err(Error::Argument("need at least 2 rows to split".into()));
    }
    if candidate_features.is_empty() {
        return Err(Error::Argument("no candidate features".into()));
    }
    let n_labels = data.label_dict.len();
    let parent = label_counts(rows, data, n_labels);
    let h_parent = entropy(&parent)?;
    if h_parent == 0.0 {
        return Ok(None);
    }
    let n = rows.len() as f64;

    let mut best: Option<ScoredSplit> = None;
    let mut best_gain = 0.0;

    match mode {
        SplitMode::Exhaustive => {
            let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
            for &feature in candidate_features {
                pairs.clear();
                pairs.extend(rows.iter().map(|&r| (data.value(r, feature), data.labels()[r])));
                pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
                if pairs[0].0 == pairs[pairs.len() - 1].0 {
                    continue;
                }
                let mut left = vec![0usize; n_labels];
                let mut right = parent.clone();
                let mut n_left = 0usize;
                for i in 0..pairs.len() - 1 {
                    let (value, label) = pairs[i];
                    left[label] += 1;
                    right[label] -= 1;
                    n_left += 1;
                    let next = pairs[i + 1].0;
                    if next == value {
                        continue;
                    }
                    let threshold = value + (next - value) / 2.0;
                    let gain = gain_two_way(h_parent, n, &left, n_left, &right, rows.len() - n_left);
                    if gain > best_gain {
                        best_gain = gain;
                        best = Some(ScoredSplit {
                            rule: SplitRule {
                                feature_index: feature,
                                threshold,
                            },
                            gain,
                        });
                    }
                }
            }
        }
        SplitMode::RandomThreshold => {
            for &feature in candidate_features {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &r in rows {
                    let v = data.value(r, feature);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if !(lo < hi) {
                    continue;
                }
                let threshold = rng.gen_range(lo..hi);
                let mut left = vec![0usize; n_labels];
                let mut n_left = 0usize;
                for &r in rows {
                    if data.value(r, feature) <= threshold {
                        left[data.labels()[r]] += 1;
                        n_left += 1;
                    }
                }
                if n_left == 0 || n_left == rows.len() {
                    continue;
                }
                let right: Vec<usize> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
                let gain = gain_two_way(h_parent, n, &left, n_left, &right, rows.len() - n_left);
                if gain > best_gain {
                    best_gain = gain;
                    best = Some(ScoredSplit {
                        rule: SplitRule {
                            feature_index: feature,
                            threshold,
                        },
                        gain,
                    });
                }
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

struct FitContext<'a> {
    data: &'a LabeledDataset,
    n_labels: usize,
    n_features: usize,
    k: usize,
    config: ForestConfig,
}

fn build_node(ctx: &FitContext<'_>, rows: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> Result<TreeNode> {
    let counts = label_counts(rows, ctx.data, ctx.n_labels);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    let depth_capped = ctx.config.max_depth.is_some_and(|md| depth >= md);
    if pure || rows.len() < ctx.config.min_samples_split || depth_capped {
        return Ok(TreeNode::Leaf { counts });
    }
    let candidates: Vec<usize> = if ctx.k == ctx.n_features {
        (0..ctx.n_features).collect()
    } else {
        rand::seq::index::sample(rng, ctx.n_features, ctx.k).into_vec()
    };
    let split = find_best_split(rows, ctx.data, &candidates, ctx.config.split_mode, rng)?;
    let Some(split) = split else {
        return Ok(TreeNode::Leaf { counts });
    };
    let mut left_rows = Vec::new();
    let mut right_rows = Vec::new();
    for &r in rows {
        if ctx.data.value(r, split.rule.feature_index) <= split.rule.threshold {
            left_rows.push(r);
        } else {
            right_rows.push(r);
        }
    }
    let left = build_node(ctx, &left_rows, depth + 1, rng)?;
    let right = build_node(ctx, &right_rows, depth + 1, rng)?;
    Ok(TreeNode::Internal {
        feature: split.rule.feature_index,
        threshold: split.rule.threshold,
        gain: split.gain,
        n: rows.len(),
        left: Box::new(left),
        right: Box::new(right),
    })
}

/// Fit one tree on the given rows. Recursion stops on pure nodes, small
/// nodes, the depth cap, or when no split yields positive gain.
pub fn fit_tree(
    rows: &[usize],
    data: &LabeledDataset,
    config: &ForestConfig,
    rng: &mut ChaCha8Rng,
) -> Result<DecisionTree> {
    if rows.is_empty() {
        return Err(Error::Argument("cannot fit a tree on zero rows".into()));
    }
    let n_features = data.n_features();
    let k = config.validate(n_features)?;
    let ctx = FitContext {
        data,
        n_labels: data.label_dict.len(),
        n_features,
        k,
        config: *config,
    };
    let root = build_node(&ctx, rows, 0, rng)?;
    Ok(DecisionTree {
        root,
        n_labels: ctx.n_labels,
        feature_count: n_features,
        config: *config,
    })
}

/// Fit an ensemble. Per tree `t` the generator is keyed by
/// `(config.seed, t)`; with bootstrap on, `n` rows are drawn with
/// replacement before fitting.
pub fn fit_forest(data: &LabeledDataset, config: &ForestConfig) -> Result<Forest> {
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::Argument("cannot fit a forest on zero rows".into()));
    }
    config.validate(data.n_features())?;
    let results: Vec<Result<DecisionTree>> = exec::map_indexed(config.n_trees, |t| {
        let mut rng = stream_rng(config.seed, t as u64, DOMAIN_TREE);
        let rows: Vec<usize> = if config.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        fit_tree(&rows, data, config, &mut rng)
    });
    let trees = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        config: *config,
        n_labels: data.label_dict.len(),
    })
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

fn check_record(record: &[f64], expected: usize) -> Result<()> {
    if record.len() != expected {
        return Err(Error::Argument(format!(
            "record has {} features, expected {expected}",
            record.len()
        )));
    }
    if record.iter().any(|v| v.is_nan()) {
        return Err(Error::Argument("record contains NaN".into()));
    }
    Ok(())
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Walk to a leaf (ties at the threshold go left) and return its normalized
/// label distribution.
pub fn predict_tree(tree: &DecisionTree, record: &[f64]) -> Result<Vec<f64>> {
    check_record(record, tree.feature_count)?;
    let mut node = &tree.root;
    loop {
        match node {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                node = if record[*feature] <= *threshold { left } else { right };
            }
            TreeNode::Leaf { counts } => {
                let total: usize = counts.iter().sum();
                return Ok(counts.iter().map(|&c| c as f64 / total as f64).collect());
            }
        }
    }
}

/// Vote-fraction vector: each tree votes for its argmax label (ties to the
/// lowest index); this doubles as the ROC score vector.
pub fn predict_forest(forest: &Forest, record: &[f64]) -> Result<Vec<f64>> {
    let mut votes = vec![0usize; forest.n_labels];
    for tree in &forest.trees {
        let probs = predict_tree(tree, record)?;
        votes[argmax(&probs)] += 1;
    }
    let n = forest.trees.len() as f64;
    Ok(votes.iter().map(|&v| v as f64 / n).collect())
}

/// Impurity-based importances: each internal node contributes
/// `(n_samples / n_root) * gain` to its split feature, averaged over trees
/// and normalized to sum 1.
pub fn impurity_importances(forest: &Forest) -> Result<Vec<f64>> {
    let d = forest
        .trees
        .first()
        .map(|t| t.feature_count)
        .ok_or_else(|| Error::Argument("empty forest".into()))?;
    let mut acc = vec![0.0f64; d];
    for tree in &forest.trees {
        let n_root = tree.root.n_samples() as f64;
        let mut stack = vec![&tree.root];
        while let Some(node) = stack.pop() {
            if let TreeNode::Internal {
                feature,
                gain,
                n,
                left,
                right,
                ..
            } = node
            {
                acc[*feature] += (*n as f64 / n_root) * gain;
                stack.push(left);
                stack.push(right);
            }
        }
    }
    let n_trees = forest.trees.len() as f64;
    for v in acc.iter_mut() {
        *v /= n_trees;
    }
    let total: f64 = acc.iter().sum();
    if total <= 0.0 {
        return Err(Error::Argument("no splits to attribute".into()));
    }
    for v in acc.iter_mut() {
        *v /= total;
    }
    Ok(acc)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ingest::LabelDictionary;

    pub(crate) fn dataset(columns: &[&[f64]], labels: &[usize], n_labels: usize) -> LabeledDataset {
        let n_rows = labels.len();
        let names: Vec<String> = (0..columns.len()).map(|i| format!("f{i}")).collect();
        let mut features = Vec::with_capacity(n_rows * columns.len());
        for r in 0..n_rows {
            for col in columns {
                features.push(col[r]);
            }
        }
        let dict_names: Vec<String> = (0..n_labels)
            .map(|i| char::from(b'A' + i as u8).to_string())
            .collect();
        LabeledDataset::from_parts(
            names,
            features,
            labels.to_vec(),
            LabelDictionary::new(dict_names).unwrap(),
            "test".into(),
        )
        .unwrap()
    }

    fn rng() -> ChaCha8Rng {
        stream_rng(1234, 0, DOMAIN_TREE)
    }

    #[test]
    fn entropy_matches_known_values() {
        assert_eq!(entropy(&[8, 0, 0]).unwrap(), 0.0);
        assert_eq!(entropy(&[4, 4]).unwrap(), 1.0);
        assert!((entropy(&[2, 2, 4]).unwrap() - 1.5).abs() < 1e-12);
        assert!(entropy(&[0, 0]).is_err());
    }

    #[test]
    fn information_gain_matches_formula() {
        let gain = information_gain(&[5, 5], &[vec![5, 0], vec![0, 5]]).unwrap();
        assert!((gain - 1.0).abs() < 1e-12);
        let gain = information_gain(&[4, 4], &[vec![2, 2], vec![2, 2]]).unwrap();
        assert!(gain.abs() < 1e-12);
        // H(6/8, 2/8) - 0.5 * 1.0
        let gain = information_gain(&[6, 2], &[vec![4, 0], vec![2, 2]]).unwrap();
        assert!((gain - 0.31127812445913283).abs() < 1e-9);
    }

    #[test]
    fn information_gain_rejects_non_partition() {
        assert!(information_gain(&[4, 4], &[vec![2, 2], vec![2, 1]]).is_err());
    }

    #[test]
    fn best_split_on_separable_column() {
        let data = dataset(&[&[1.0, 2.0, 8.0, 9.0]], &[0, 0, 1, 1], 2);
        let split = find_best_split(&[0, 1, 2, 3], &data, &[0], SplitMode::Exhaustive, &mut rng())
            .unwrap()
            .unwrap();
        assert_eq!(split.rule.threshold, 5.0);
        assert_eq!(split.rule.feature_index, 0);
        assert!((split.gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_rows_yield_no_split() {
        let data = dataset(&[&[1.0, 2.0, 3.0]], &[1, 1, 1], 2);
        let split =
            find_best_split(&[0, 1, 2], &data, &[0], SplitMode::Exhaustive, &mut rng()).unwrap();
        assert!(split.is_none());
    }

    #[test]
    fn exhaustive_gain_dominates_random_threshold() {
        use rand_chacha::rand_core::SeedableRng;
        let mut data_rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = data_rng.gen_range(4usize..24);
            let cols: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..n).map(|_| data_rng.gen_range(-4.0..4.0)).collect())
                .collect();
            let labels: Vec<usize> = (0..n).map(|_| data_rng.gen_range(0..2)).collect();
            let col_refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            let data = dataset(&col_refs, &labels, 2);
            let rows: Vec<usize> = (0..n).collect();
            let exhaustive =
                find_best_split(&rows, &data, &[0, 1, 2], SplitMode::Exhaustive, &mut rng())
                    .unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(data_rng.gen());
            let random =
                find_best_split(&rows, &data, &[0, 1, 2], SplitMode::RandomThreshold, &mut r)
                    .unwrap();
            let eg = exhaustive.map(|s| s.gain).unwrap_or(0.0);
            let rg = random.map(|s| s.gain).unwrap_or(0.0);
            assert!(eg >= rg - 1e-12, "exhaustive {eg} < random {rg}");
        }
    }

    fn separable_toy() -> LabeledDataset {
        let xs: Vec<f64> = (0..20).map(|i| if i < 10 { i as f64 } else { i as f64 + 30.0 }).collect();
        let ys: Vec<f64> = (0..20).map(|i| (i % 7) as f64).collect();
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        dataset(&[&xs, &ys], &labels, 2)
    }

    #[test]
    fn unlimited_tree_memorizes_training_data() {
        let data = separable_toy();
        let rows: Vec<usize> = (0..data.n_rows()).collect();
        let tree = fit_tree(&rows, &data, &ForestConfig::single_tree(3), &mut rng()).unwrap();
        for r in 0..data.n_rows() {
            let probs = predict_tree(&tree, data.row(r)).unwrap();
            assert_eq!(argmax(&probs), data.labels()[r]);
        }
    }

    #[test]
    fn single_row_fits_single_leaf() {
        let data = dataset(&[&[3.0]], &[1], 2);
        let tree = fit_tree(&[0], &data, &ForestConfig::single_tree(0), &mut rng()).unwrap();
        assert_eq!(tree.root, TreeNode::Leaf { counts: vec![0, 1] });
    }

    #[test]
    fn max_depth_zero_keeps_full_distribution() {
        let data = separable_toy();
        let rows: Vec<usize> = (0..20).collect();
        let mut config = ForestConfig::single_tree(0);
        config.max_depth = Some(0);
        let tree = fit_tree(&rows, &data, &config, &mut rng()).unwrap();
        assert_eq!(tree.root, TreeNode::Leaf { counts: vec![10, 10] });
    }

    #[test]
    fn leaf_probabilities_are_normalized_counts() {
        let tree = DecisionTree {
            root: TreeNode::Leaf { counts: vec![3, 1, 0] },
            n_labels: 3,
            feature_count: 1,
            config: ForestConfig::single_tree(0),
        };
        assert_eq!(predict_tree(&tree, &[0.0]).unwrap(), vec![0.75, 0.25, 0.0]);
    }

    #[test]
    fn threshold_tie_routes_left() {
        let tree = DecisionTree {
            root: TreeNode::Internal {
                feature: 0,
                threshold: 2.0,
                gain: 1.0,
                n: 2,
                left: Box::new(TreeNode::Leaf { counts: vec![1, 0] }),
                right: Box::new(TreeNode::Leaf { counts: vec![0, 1] }),
            },
            n_labels: 2,
            feature_count: 1,
            config: ForestConfig::single_tree(0),
        };
        assert_eq!(predict_tree(&tree, &[2.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(predict_tree(&tree, &[2.0 + 1e-9]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn predict_rejects_nan_records() {
        let data = separable_toy();
        let rows: Vec<usize> = (0..20).collect();
        let tree = fit_tree(&rows, &data, &ForestConfig::single_tree(0), &mut rng()).unwrap();
        assert!(predict_tree(&tree, &[f64::NAN, 0.0]).is_err());
        assert!(predict_tree(&tree, &[0.0]).is_err());
    }

    #[test]
    fn tree_probabilities_sum_to_one() {
        use rand_chacha::rand_core::SeedableRng;
        let data = separable_toy();
        let rows: Vec<usize> = (0..20).collect();
        let tree = fit_tree(&rows, &data, &ForestConfig::single_tree(0), &mut rng()).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let rec = [r.gen_range(-50.0..80.0), r.gen_range(-10.0..10.0)];
            let probs = predict_tree(&tree, &rec).unwrap();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(probs.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let data = separable_toy();
        let mut config = ForestConfig::single_tree(9);
        config.bootstrap = false;
        let forest = fit_forest(&data, &config).unwrap();
        let rows: Vec<usize> = (0..data.n_rows()).collect();
        let mut tree_rng = stream_rng(config.seed, 0, DOMAIN_TREE);
        let tree = fit_tree(&rows, &data, &config, &mut tree_rng).unwrap();
        assert_eq!(forest.trees[0], tree);
        for r in 0..data.n_rows() {
            let f = predict_forest(&forest, data.row(r)).unwrap();
            let t = predict_tree(&tree, data.row(r)).unwrap();
            assert_eq!(argmax(&f), argmax(&t));
        }
    }

    #[test]
    fn forest_fit_is_deterministic() {
        let data = separable_toy();
        let config = ForestConfig::random_forest(21);
        let a = fit_forest(&data, &config).unwrap();
        let b = fit_forest(&data, &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn forest_fit_is_independent_of_thread_count() {
        let data = separable_toy();
        let mut config = ForestConfig::random_forest(77);
        config.n_trees = 16;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let single = pool.install(|| fit_forest(&data, &config).unwrap());
        let default = fit_forest(&data, &config).unwrap();
        assert_eq!(
            serde_json::to_string(&single).unwrap(),
            serde_json::to_string(&default).unwrap()
        );
    }

    #[test]
    fn hundred_tree_forest_memorizes_toy_data() {
        let data = separable_toy();
        let forest = fit_forest(&data, &ForestConfig::random_forest(5)).unwrap();
        for r in 0..data.n_rows() {
            let votes = predict_forest(&forest, data.row(r)).unwrap();
            assert_eq!(argmax(&votes), data.labels()[r]);
        }
    }

    #[test]
    fn forest_prefix_trees_agree_across_sizes() {
        let data = separable_toy();
        let mut small = ForestConfig::random_forest(31);
        small.n_trees = 4;
        let mut large = small;
        large.n_trees = 8;
        let f_small = fit_forest(&data, &small).unwrap();
        let f_large = fit_forest(&data, &large).unwrap();
        assert_eq!(&f_large.trees[..4], &f_small.trees[..]);
    }

    #[test]
    fn oversized_feature_subset_is_rejected() {
        let data = separable_toy();
        let mut config = ForestConfig::random_forest(0);
        config.features_per_split = FeaturesPerSplit::Count(3);
        assert!(matches!(fit_forest(&data, &config), Err(Error::Argument(_))));
    }

    #[test]
    fn vote_fractions_count_tree_votes() {
        let leaf = |a: usize, b: usize| TreeNode::Leaf { counts: vec![a, b] };
        let tree = |node: TreeNode| DecisionTree {
            root: node,
            n_labels: 2,
            feature_count: 1,
            config: ForestConfig::single_tree(0),
        };
        let forest = Forest {
            trees: vec![tree(leaf(2, 1)), tree(leaf(3, 0)), tree(leaf(0, 5))],
            config: ForestConfig::single_tree(0),
            n_labels: 2,
        };
        let votes = predict_forest(&forest, &[0.0]).unwrap();
        assert_eq!(votes, vec![2.0 / 3.0, 1.0 / 3.0]);
        assert!((votes.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_tree_forest_votes_one_hot() {
        let forest = Forest {
            trees: vec![DecisionTree {
                root: TreeNode::Leaf { counts: vec![1, 3] },
                n_labels: 2,
                feature_count: 1,
                config: ForestConfig::single_tree(0),
            }],
            config: ForestConfig::single_tree(0),
            n_labels: 2,
        };
        assert_eq!(predict_forest(&forest, &[0.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn importance_of_single_split_is_one_hot() {
        let data = dataset(
            &[
                &[0.0, 0.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 0.0],
                &[1.0, 2.0, 8.0, 9.0],
            ],
            &[0, 0, 1, 1],
            2,
        );
        let config = ForestConfig::single_tree(0);
        let forest = fit_forest(&data, &config).unwrap();
        let imp = impurity_importances(&forest).unwrap();
        assert_eq!(imp, vec![0.0, 0.0, 0.0, 1.0]);
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stump_forest_has_no_attributable_splits() {
        let data = dataset(&[&[1.0, 2.0]], &[0, 0], 1);
        let forest = fit_forest(&data, &ForestConfig::single_tree(0)).unwrap();
        let err = impurity_importances(&forest).unwrap_err();
        assert!(err.to_string().contains("no splits to attribute"));
    }

    #[test]
    fn importances_form_probability_vector() {
        let data = separable_toy();
        let forest = fit_forest(&data, &ForestConfig::random_forest(13)).unwrap();
        let imp = impurity_importances(&forest).unwrap();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(imp.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn tree_serialization_uses_flat_node_records() {
        let tree = DecisionTree {
            root: TreeNode::Internal {
                feature: 2,
                threshold: 0.5,
                gain: 0.25,
                n: 10,
                left: Box::new(TreeNode::Leaf { counts: vec![7, 0] }),
                right: Box::new(TreeNode::Leaf { counts: vec![0, 3] }),
            },
            n_labels: 2,
            feature_count: 3,
            config: ForestConfig::single_tree(0),
        };
        let json = serde_json::to_value(&tree).unwrap();
        assert_eq!(json["root"]["feature"], 2);
        assert_eq!(json["root"]["left"]["counts"][0], 7);
        let back: DecisionTree = serde_json::from_value(json).unwrap();
        assert_eq!(back, tree);
    }
}
