//! Random forest classifier: bootstrap resampling, Gini-impurity splits over
//! random feature subsets, normalized mean-decrease feature importance, and
//! the two-parameter generalization-error bound.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::MedleyError;
use crate::rng;
use crate::Result;

use super::TextReader;

#[derive(Debug, Clone)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features sampled per node.
    pub m_try: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 50,
            max_depth: 6,
            m_try: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Class probabilities [p0, p1]; they sum to 1.
        probs: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationTree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl ClassificationTree {
    /// Class-1 probability at the leaf this row falls into.
    pub fn predict_row(&self, row: ndarray::ArrayView1<f64>) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { probs } => return probs[1],
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    pub trees: Vec<ClassificationTree>,
    pub n_features: usize,
    pub n_trees: usize,
    pub max_depth: usize,
    pub m_try: usize,
    pub seed: u64,
    /// Per-tree, per-feature Gini decrease, weighted by node sample fraction.
    pub gini_decreases: Vec<Vec<f64>>,
}

/// Gini impurity 1 - sum p_j^2 of a node's class counts.
pub fn gini_impurity(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(MedleyError::invalid("gini impurity of an empty node"));
    }
    let mut sum_sq = 0.0;
    for &c in counts {
        let p = c as f64 / total as f64;
        sum_sq += p * p;
    }
    Ok(1.0 - sum_sq)
}

/// Upper bound G(rho, s) = rho (1 - s) + (1 - rho) s on forest
/// generalization error from mean tree correlation rho and strength s.
pub fn rf_error_bound(rho: f64, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) || !(0.0..=1.0).contains(&s) {
        return Err(MedleyError::invalid("rho and s must lie in [0, 1]"));
    }
    Ok(rho * (1.0 - s) + (1.0 - rho) * s)
}

struct TreeBuilder<'a> {
    x: &'a Array2<f64>,
    y: &'a Array1<u8>,
    max_depth: usize,
    m_try: usize,
    n_root: usize,
    nodes: Vec<TreeNode>,
    decreases: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, rows: &[usize], depth: usize, r: &mut rand_chacha::ChaCha8Rng) -> usize {
        let n = rows.len();
        let c1 = rows.iter().filter(|&&i| self.y[i] == 1).count();
        let c0 = n - c1;
        let make_leaf = |nodes: &mut Vec<TreeNode>| {
            nodes.push(TreeNode::Leaf {
                probs: [c0 as f64 / n as f64, c1 as f64 / n as f64],
            });
            nodes.len() - 1
        };
        if depth >= self.max_depth || n < 2 || c0 == 0 || c1 == 0 {
            return make_leaf(&mut self.nodes);
        }

        let node_impurity = gini_impurity(&[c0, c1]).expect("nonempty node");
        let mut candidates =
            rand::seq::index::sample(r, self.x.ncols(), self.m_try).into_vec();
        candidates.sort_unstable();

        let mut best: Option<(f64, usize, f64)> = None; // (decrease, feature, threshold)
        for &feat in &candidates {
            let mut order: Vec<usize> = rows.to_vec();
            order.sort_by(|&a, &b| {
                self.x[[a, feat]]
                    .partial_cmp(&self.x[[b, feat]])
                    .unwrap()
            });
            let mut left1 = 0usize;
            for cut in 1..n {
                if self.y[order[cut - 1]] == 1 {
                    left1 += 1;
                }
                let lo = self.x[[order[cut - 1], feat]];
                let hi = self.x[[order[cut], feat]];
                if lo == hi {
                    continue;
                }
                let left0 = cut - left1;
                let right1 = c1 - left1;
                let right0 = c0 - left0;
                let gl = gini_impurity(&[left0, left1]).expect("nonempty left");
                let gr = gini_impurity(&[right0, right1]).expect("nonempty right");
                let weighted =
                    (cut as f64 * gl + (n - cut) as f64 * gr) / n as f64;
                let decrease = node_impurity - weighted;
                if decrease > best.map_or(1e-12, |(d, _, _)| d) {
                    best = Some((decrease, feat, 0.5 * (lo + hi)));
                }
            }
        }

        let Some((decrease, feature, threshold)) = best else {
            return make_leaf(&mut self.nodes);
        };
        debug_assert!(decrease >= 0.0);
        self.decreases[feature] += decrease * n as f64 / self.n_root as f64;
        let left_rows: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&i| self.x[[i, feature]] <= threshold)
            .collect();
        let right_rows: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&i| self.x[[i, feature]] > threshold)
            .collect();
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { probs: [1.0, 0.0] }); // placeholder
        let left = self.build(&left_rows, depth + 1, r);
        let right = self.build(&right_rows, depth + 1, r);
        self.nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

/// Train a random forest: each tree fits a bootstrap resample with
/// Gini-minimizing splits over `m_try` randomly sampled features per node.
pub fn rf_train(data: &Dataset, cfg: &ForestConfig) -> Result<ForestModel> {
    if cfg.n_trees == 0 {
        return Err(MedleyError::invalid("need at least 1 tree"));
    }
    if cfg.m_try == 0 || cfg.m_try > data.n_cols() {
        return Err(MedleyError::invalid(format!(
            "m_try must be in 1..={}, got {}",
            data.n_cols(),
            cfg.m_try
        )));
    }
    let n = data.n_rows();
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut gini_decreases = Vec::with_capacity(cfg.n_trees);
    for t in 0..cfg.n_trees {
        let mut r = rng::rng_from_seed(rng::derive_seed_indexed(cfg.seed, "rf.tree", t as u64));
        let rows: Vec<usize> = (0..n).map(|_| r.gen_range(0..n)).collect();
        let mut builder = TreeBuilder {
            x: &data.features,
            y: &data.target,
            max_depth: cfg.max_depth,
            m_try: cfg.m_try,
            n_root: n,
            nodes: Vec::new(),
            decreases: vec![0.0; data.n_cols()],
        };
        let root = builder.build(&rows, 0, &mut r);
        debug_assert_eq!(root, 0);
        trees.push(ClassificationTree { nodes: builder.nodes });
        gini_decreases.push(builder.decreases);
    }
    Ok(ForestModel {
        trees,
        n_features: data.n_cols(),
        n_trees: cfg.n_trees,
        max_depth: cfg.max_depth,
        m_try: cfg.m_try,
        seed: cfg.seed,
        gini_decreases,
    })
}

/// Normalized per-feature mean Gini decrease.
#[derive(Debug, Clone)]
pub struct FeatureImportance {
    /// Sums to 1 within 1e-12 (uniform when degenerate).
    pub scores: Vec<f64>,
    /// True when the forest recorded no splits at all.
    pub degenerate: bool,
}

pub fn rf_feature_importance(model: &ForestModel) -> FeatureImportance {
    let d = model.n_features;
    let mut mean = vec![0.0; d];
    for per_tree in &model.gini_decreases {
        for (m, &v) in mean.iter_mut().zip(per_tree.iter()) {
            *m += v / model.trees.len() as f64;
        }
    }
    let total: f64 = mean.iter().sum();
    if total <= 0.0 {
        return FeatureImportance {
            scores: vec![1.0 / d as f64; d],
            degenerate: true,
        };
    }
    FeatureImportance {
        scores: mean.iter().map(|v| v / total).collect(),
        degenerate: false,
    }
}

impl ForestModel {
    /// Mean of leaf class-1 probabilities across trees.
    pub fn predict_proba(&self, rows: &Array2<f64>) -> Result<Array1<f64>> {
        if rows.ncols() != self.n_features {
            return Err(MedleyError::Dimension {
                expected: self.n_features,
                got: rows.ncols(),
            });
        }
        let mut out = Array1::<f64>::zeros(rows.nrows());
        for tree in &self.trees {
            for (i, row) in rows.rows().into_iter().enumerate() {
                out[i] += tree.predict_row(row);
            }
        }
        Ok(out / self.trees.len() as f64)
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        use std::fmt::Write as _;
        let _ = writeln!(out, "n_trees {}", self.n_trees);
        let _ = writeln!(out, "max_depth {}", self.max_depth);
        let _ = writeln!(out, "m_try {}", self.m_try);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "n_features {}", self.n_features);
        for (t, tree) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "tree {} nodes {}", t, tree.nodes.len());
            let _ = write!(out, "decreases");
            for v in &self.gini_decreases[t] {
                let _ = write!(out, " {}", v);
            }
            out.push('\n');
            for (i, node) in tree.nodes.iter().enumerate() {
                match node {
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let _ = writeln!(out, "node {} split {} {} {} {}", i, feature, threshold, left, right);
                    }
                    TreeNode::Leaf { probs } => {
                        let _ = writeln!(out, "node {} leaf {} {}", i, probs[0], probs[1]);
                    }
                }
            }
        }
    }

    pub(crate) fn parse_text(r: &mut TextReader) -> Result<ForestModel> {
        let n_trees = r.expect_key("n_trees")?.one_usize()?;
        let max_depth = r.expect_key("max_depth")?.one_usize()?;
        let m_try = r.expect_key("m_try")?.one_usize()?;
        let seed = r.expect_key("seed")?.one_u64()?;
        let n_features = r.expect_key("n_features")?.one_usize()?;
        let mut trees = Vec::with_capacity(n_trees);
        let mut gini_decreases = Vec::with_capacity(n_trees);
        for t in 0..n_trees {
            let head = r.expect_key("tree")?;
            if head.tokens.len() != 3 || head.tokens[1] != "nodes" {
                return Err(MedleyError::parse(head.line_no, "expected 'tree <t> nodes <k>'"));
            }
            let t_read: usize = super::parse_usize(head.tokens[0], head.line_no)?;
            if t_read != t {
                return Err(MedleyError::parse(head.line_no, "trees out of order"));
            }
            let n_nodes: usize = super::parse_usize(head.tokens[2], head.line_no)?;
            let dec = r.expect_key("decreases")?.all_f64()?;
            if dec.len() != n_features {
                return Err(MedleyError::invalid("decrease vector length mismatch"));
            }
            gini_decreases.push(dec);
            let mut nodes = Vec::with_capacity(n_nodes);
            for i in 0..n_nodes {
                let line = r.expect_key("node")?;
                let idx: usize = super::parse_usize(line.tokens[0], line.line_no)?;
                if idx != i {
                    return Err(MedleyError::parse(line.line_no, "nodes out of order"));
                }
                match line.tokens.get(1) {
                    Some(&"split") if line.tokens.len() == 6 => {
                        let feature = super::parse_usize(line.tokens[2], line.line_no)?;
                        let threshold = super::parse_f64(line.tokens[3], line.line_no)?;
                        let left = super::parse_usize(line.tokens[4], line.line_no)?;
                        let right = super::parse_usize(line.tokens[5], line.line_no)?;
                        if feature >= n_features || left >= n_nodes || right >= n_nodes {
                            return Err(MedleyError::parse(line.line_no, "node reference out of range"));
                        }
                        nodes.push(TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        });
                    }
                    Some(&"leaf") if line.tokens.len() == 4 => {
                        let p0 = super::parse_f64(line.tokens[2], line.line_no)?;
                        let p1 = super::parse_f64(line.tokens[3], line.line_no)?;
                        if (p0 + p1 - 1.0).abs() > 1e-9 {
                            return Err(MedleyError::parse(line.line_no, "leaf probabilities must sum to 1"));
                        }
                        nodes.push(TreeNode::Leaf { probs: [p0, p1] });
                    }
                    _ => {
                        return Err(MedleyError::parse(line.line_no, "expected split or leaf node"));
                    }
                }
            }
            trees.push(ClassificationTree { nodes });
        }
        Ok(ForestModel {
            trees,
            n_features,
            n_trees,
            max_depth,
            m_try,
            seed,
            gini_decreases,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn gini_matches_hand_values() {
        assert!((gini_impurity(&[5, 5]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(gini_impurity(&[10, 0]).unwrap(), 0.0);
        assert!((gini_impurity(&[7, 3]).unwrap() - 0.42).abs() < 1e-15);
        assert!(gini_impurity(&[0, 0]).is_err());
    }

    #[test]
    fn error_bound_examples() {
        assert!((rf_error_bound(1.0, 0.8).unwrap() - 0.2).abs() < 1e-15);
        assert!((rf_error_bound(0.0, 0.8).unwrap() - 0.8).abs() < 1e-15);
        assert!((rf_error_bound(0.5, 0.6).unwrap() - 0.5).abs() < 1e-15);
        assert!(rf_error_bound(1.2, 0.5).is_err());
        assert!(rf_error_bound(0.5, -0.1).is_err());
    }

    #[test]
    fn single_stump_learns_threshold_data() {
        let data = synthetic::threshold_1d(200, 5);
        let cfg = ForestConfig {
            n_trees: 1,
            max_depth: 1,
            m_try: 1,
            seed: 3,
        };
        let model = rf_train(&data, &cfg).unwrap();
        let probs = model.predict_proba(&data.features).unwrap();
        let err = super::super::classification_error(&probs, &data.target);
        assert!(err <= 0.1, "training error {}", err);
    }

    #[test]
    fn config_validation() {
        let data = synthetic::threshold_1d(50, 1);
        assert!(rf_train(
            &data,
            &ForestConfig {
                n_trees: 0,
                ..ForestConfig::default()
            }
        )
        .is_err());
        assert!(rf_train(
            &data,
            &ForestConfig {
                n_trees: 1,
                max_depth: 2,
                m_try: 2, // only 1 feature
                seed: 0,
            }
        )
        .is_err());
    }

    #[test]
    fn same_seed_gives_identical_forest() {
        let data = synthetic::one_informative(120, 3, 9);
        let cfg = ForestConfig {
            n_trees: 10,
            max_depth: 4,
            m_try: 2,
            seed: 4,
        };
        let a = rf_train(&data, &cfg).unwrap();
        let b = rf_train(&data, &cfg).unwrap();
        assert_eq!(a.trees, b.trees);
    }

    #[test]
    fn importance_normalizes_hand_example() {
        let model = ForestModel {
            trees: vec![ClassificationTree {
                nodes: vec![TreeNode::Leaf { probs: [0.5, 0.5] }],
            }],
            n_features: 3,
            n_trees: 1,
            max_depth: 1,
            m_try: 1,
            seed: 0,
            gini_decreases: vec![vec![2.0, 1.0, 1.0]],
        };
        let imp = rf_feature_importance(&model);
        assert!(!imp.degenerate);
        assert!((imp.scores[0] - 0.5).abs() < 1e-15);
        assert!((imp.scores[1] - 0.25).abs() < 1e-15);
        assert!((imp.scores[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn informative_feature_dominates_importance() {
        let data = synthetic::one_informative(300, 3, 12);
        let cfg = ForestConfig {
            n_trees: 20,
            max_depth: 4,
            m_try: 4,
            seed: 6,
        };
        let model = rf_train(&data, &cfg).unwrap();
        let imp = rf_feature_importance(&model);
        assert!(imp.scores[0] >= 0.9, "importance {:?}", imp.scores);
        let sum: f64 = imp.scores.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // every recorded decrease is nonnegative
        for per_tree in &model.gini_decreases {
            for &v in per_tree {
                assert!(v >= 0.0);
            }
        }
    }

    #[test]
    fn constant_features_give_degenerate_uniform_importance() {
        let features = ndarray::Array2::<f64>::zeros((30, 2));
        let target = ndarray::Array1::from((0..30).map(|i| (i % 2) as u8).collect::<Vec<_>>());
        let data = crate::dataset::Dataset::new(features, target, vec!["a".into(), "b".into()]).unwrap();
        let cfg = ForestConfig {
            n_trees: 3,
            max_depth: 3,
            m_try: 2,
            seed: 0,
        };
        let model = rf_train(&data, &cfg).unwrap();
        let imp = rf_feature_importance(&model);
        assert!(imp.degenerate);
        assert_eq!(imp.scores, vec![0.5, 0.5]);
    }

    #[test]
    fn leaves_sum_to_one_and_splits_have_two_children() {
        let data = synthetic::one_informative(150, 2, 2);
        let cfg = ForestConfig {
            n_trees: 8,
            max_depth: 5,
            m_try: 2,
            seed: 8,
        };
        let model = rf_train(&data, &cfg).unwrap();
        for tree in &model.trees {
            for node in &tree.nodes {
                match node {
                    TreeNode::Leaf { probs } => {
                        assert!((probs[0] + probs[1] - 1.0).abs() < 1e-12)
                    }
                    TreeNode::Split { left, right, .. } => {
                        assert_ne!(left, right);
                        assert!(*left < tree.nodes.len() && *right < tree.nodes.len());
                    }
                }
            }
        }
    }

    #[test]
    fn serialization_round_trips_exactly() {
        let data = synthetic::one_informative(100, 3, 15);
        let cfg = ForestConfig {
            n_trees: 5,
            max_depth: 4,
            m_try: 2,
            seed: 16,
        };
        let model = rf_train(&data, &cfg).unwrap();
        let wrapped = super::super::TrainedModel::Forest(model);
        let text = wrapped.to_text();
        let reloaded = super::super::TrainedModel::from_text(&text).unwrap();
        let p1 = wrapped.predict_proba(&data.features).unwrap();
        let p2 = reloaded.predict_proba(&data.features).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(text, reloaded.to_text());
    }
}
