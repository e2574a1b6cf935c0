//! Gradient boosting for the logistic loss: each stage fits a depth-limited
//! least-squares regression tree to the negative gradient, then takes a step
//! sized by a backtracking line search that enforces the Armijo
//! sufficient-decrease condition and records a Wolfe curvature check.

use ndarray::{Array1, Array2};

use crate::dataset::Dataset;
use crate::error::MedleyError;
use crate::Result;

use super::TextReader;

const ARMIJO_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const MAX_BACKTRACKS: usize = 50;

#[derive(Debug, Clone)]
pub struct GbConfig {
    pub iterations: usize,
    pub max_depth: usize,
    /// Shrinkage factor applied to every stage's step.
    pub shrinkage: f64,
    /// Reserved for API uniformity; stage fitting is deterministic.
    pub seed: u64,
}

impl Default for GbConfig {
    fn default() -> Self {
        GbConfig {
            iterations: 80,
            max_depth: 2,
            shrinkage: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegressionNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: ndarray::ArrayView1<f64>) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                RegressionNode::Leaf { value } => return *value,
                RegressionNode::Split {
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

/// One boosting stage: the fitted tree and its accepted line-search step.
#[derive(Debug, Clone)]
pub struct Stage {
    pub tree: RegressionTree,
    /// Line-search step; always positive. The effective coefficient on the
    /// tree's output is `alpha * shrinkage`.
    pub alpha: f64,
    /// Whether the Wolfe curvature condition also held at the accepted step.
    pub curvature_ok: bool,
}

#[derive(Debug, Clone)]
pub struct GbmModel {
    /// Initial score: log-odds of the training base rate.
    pub f0: f64,
    pub shrinkage: f64,
    pub stages: Vec<Stage>,
    pub n_features: usize,
    /// Training logistic loss before stage 1 and after each accepted stage.
    /// Not serialized; populated by training only.
    pub train_losses: Vec<f64>,
    /// Iteration indices whose line search failed; those stages were skipped.
    pub skipped_stages: Vec<usize>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Total logistic loss of scores `z` against labels in {0,1}.
pub fn logistic_loss(scores: &Array1<f64>, y: &Array1<f64>) -> f64 {
    scores
        .iter()
        .zip(y.iter())
        .map(|(&z, &yi)| yi * softplus(-z) + (1.0 - yi) * softplus(z))
        .sum()
}

/// Fit a least-squares regression tree of limited depth to `targets`.
fn fit_regression_tree(
    x: &Array2<f64>,
    targets: &Array1<f64>,
    max_depth: usize,
) -> RegressionTree {
    let mut nodes = Vec::new();
    let rows: Vec<usize> = (0..x.nrows()).collect();
    build_regression(x, targets, &rows, 0, max_depth, &mut nodes);
    RegressionTree { nodes }
}

fn build_regression(
    x: &Array2<f64>,
    t: &Array1<f64>,
    rows: &[usize],
    depth: usize,
    max_depth: usize,
    nodes: &mut Vec<RegressionNode>,
) -> usize {
    let n = rows.len();
    let sum: f64 = rows.iter().map(|&i| t[i]).sum();
    let mean = sum / n as f64;
    if depth >= max_depth || n < 2 {
        nodes.push(RegressionNode::Leaf { value: mean });
        return nodes.len() - 1;
    }
    // maximizing S_L^2/n_L + S_R^2/n_R minimizes the split SSE
    let mut best: Option<(f64, usize, f64)> = None;
    let base = sum * sum / n as f64;
    for feat in 0..x.ncols() {
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| x[[a, feat]].partial_cmp(&x[[b, feat]]).unwrap());
        let mut left_sum = 0.0;
        for cut in 1..n {
            left_sum += t[order[cut - 1]];
            let lo = x[[order[cut - 1], feat]];
            let hi = x[[order[cut], feat]];
            if lo == hi {
                continue;
            }
            let right_sum = sum - left_sum;
            let score = left_sum * left_sum / cut as f64
                + right_sum * right_sum / (n - cut) as f64
                - base;
            if score > best.map_or(1e-12, |(s, _, _)| s) {
                best = Some((score, feat, 0.5 * (lo + hi)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        nodes.push(RegressionNode::Leaf { value: mean });
        return nodes.len() - 1;
    };
    let left_rows: Vec<usize> = rows.iter().copied().filter(|&i| x[[i, feature]] <= threshold).collect();
    let right_rows: Vec<usize> = rows.iter().copied().filter(|&i| x[[i, feature]] > threshold).collect();
    let slot = nodes.len();
    nodes.push(RegressionNode::Leaf { value: 0.0 }); // placeholder
    let left = build_regression(x, t, &left_rows, depth + 1, max_depth, nodes);
    let right = build_regression(x, t, &right_rows, depth + 1, max_depth, nodes);
    nodes[slot] = RegressionNode::Split {
        feature,
        threshold,
        left,
        right,
    };
    slot
}

/// Train the boosted model. Training loss is nonincreasing across stages by
/// construction: a stage is only accepted if its step satisfies the Armijo
/// inequality along a descent direction.
pub fn gb_train(data: &Dataset, cfg: &GbConfig) -> Result<GbmModel> {
    if cfg.shrinkage <= 0.0 || cfg.shrinkage > 1.0 {
        return Err(MedleyError::invalid("shrinkage must lie in (0, 1]"));
    }
    if cfg.max_depth == 0 {
        return Err(MedleyError::invalid("tree depth must be at least 1"));
    }
    let n = data.n_rows();
    let y = data.target_f64();
    let base_rate = (y.sum() / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let f0 = (base_rate / (1.0 - base_rate)).ln();
    let mut scores = Array1::<f64>::from_elem(n, f0);
    let mut stages = Vec::with_capacity(cfg.iterations);
    let mut skipped = Vec::new();
    let mut train_losses = vec![logistic_loss(&scores, &y)];

    for m in 0..cfg.iterations {
        // negative gradient of the logistic loss at the current scores
        let residual: Array1<f64> =
            y.iter().zip(scores.iter()).map(|(&yi, &z)| yi - sigmoid(z)).collect();
        let tree = fit_regression_tree(&data.features, &residual, cfg.max_depth);
        let direction: Array1<f64> = data
            .features
            .rows()
            .into_iter()
            .map(|row| cfg.shrinkage * tree.predict_row(row))
            .collect();
        let loss0 = *train_losses.last().unwrap();
        let g0: f64 = scores
            .iter()
            .zip(y.iter())
            .zip(direction.iter())
            .map(|((&z, &yi), &d)| (sigmoid(z) - yi) * d)
            .sum();
        if g0 >= -1e-12 {
            skipped.push(m);
            continue;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate: Array1<f64> = scores
                .iter()
                .zip(direction.iter())
                .map(|(&z, &d)| z + alpha * d)
                .collect();
            let loss = logistic_loss(&candidate, &y);
            if loss <= loss0 + ARMIJO_C1 * alpha * g0 {
                accepted = Some((candidate, loss));
                break;
            }
            alpha *= 0.5;
        }
        let Some((new_scores, new_loss)) = accepted else {
            skipped.push(m);
            continue;
        };
        // invariant: the accepted step satisfies the Armijo inequality
        assert!(new_loss <= loss0 + ARMIJO_C1 * alpha * g0 + 1e-12);
        let g_alpha: f64 = new_scores
            .iter()
            .zip(y.iter())
            .zip(direction.iter())
            .map(|((&z, &yi), &d)| (sigmoid(z) - yi) * d)
            .sum();
        let curvature_ok = g_alpha >= WOLFE_C2 * g0;
        scores = new_scores;
        train_losses.push(new_loss);
        stages.push(Stage {
            tree,
            alpha,
            curvature_ok,
        });
    }
    Ok(GbmModel {
        f0,
        shrinkage: cfg.shrinkage,
        stages,
        n_features: data.n_cols(),
        train_losses,
        skipped_stages: skipped,
    })
}

impl GbmModel {
    /// Raw additive scores before the sigmoid.
    pub fn predict_scores(&self, rows: &Array2<f64>) -> Result<Array1<f64>> {
        if rows.ncols() != self.n_features {
            return Err(MedleyError::Dimension {
                expected: self.n_features,
                got: rows.ncols(),
            });
        }
        let mut scores = Array1::<f64>::from_elem(rows.nrows(), self.f0);
        for stage in &self.stages {
            let coef = stage.alpha * self.shrinkage;
            for (i, row) in rows.rows().into_iter().enumerate() {
                scores[i] += coef * stage.tree.predict_row(row);
            }
        }
        Ok(scores)
    }

    pub fn predict_proba(&self, rows: &Array2<f64>) -> Result<Array1<f64>> {
        Ok(self.predict_scores(rows)?.mapv(sigmoid))
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        use std::fmt::Write as _;
        let _ = writeln!(out, "f0 {}", self.f0);
        let _ = writeln!(out, "shrinkage {}", self.shrinkage);
        let _ = writeln!(out, "n_features {}", self.n_features);
        let _ = writeln!(out, "n_stages {}", self.stages.len());
        for (m, stage) in self.stages.iter().enumerate() {
            let _ = writeln!(
                out,
                "stage {} alpha {} curvature_ok {} nodes {}",
                m,
                stage.alpha,
                u8::from(stage.curvature_ok),
                stage.tree.nodes.len()
            );
            for (i, node) in stage.tree.nodes.iter().enumerate() {
                match node {
                    RegressionNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let _ = writeln!(out, "node {} split {} {} {} {}", i, feature, threshold, left, right);
                    }
                    RegressionNode::Leaf { value } => {
                        let _ = writeln!(out, "node {} leaf {}", i, value);
                    }
                }
            }
        }
    }

    pub(crate) fn parse_text(r: &mut TextReader) -> Result<GbmModel> {
        let f0 = r.expect_key("f0")?.one_f64()?;
        let shrinkage = r.expect_key("shrinkage")?.one_f64()?;
        let n_features = r.expect_key("n_features")?.one_usize()?;
        let n_stages = r.expect_key("n_stages")?.one_usize()?;
        let mut stages = Vec::with_capacity(n_stages);
        for m in 0..n_stages {
            let head = r.expect_key("stage")?;
            if head.tokens.len() != 7
                || head.tokens[1] != "alpha"
                || head.tokens[3] != "curvature_ok"
                || head.tokens[5] != "nodes"
            {
                return Err(MedleyError::parse(
                    head.line_no,
                    "expected 'stage <m> alpha <a> curvature_ok <0|1> nodes <k>'",
                ));
            }
            if super::parse_usize(head.tokens[0], head.line_no)? != m {
                return Err(MedleyError::parse(head.line_no, "stages out of order"));
            }
            let alpha = super::parse_f64(head.tokens[2], head.line_no)?;
            if alpha <= 0.0 {
                return Err(MedleyError::parse(head.line_no, "stage alpha must be positive"));
            }
            let curvature_ok = head.tokens[4] == "1";
            let n_nodes = super::parse_usize(head.tokens[6], head.line_no)?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for i in 0..n_nodes {
                let line = r.expect_key("node")?;
                if super::parse_usize(line.tokens[0], line.line_no)? != i {
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
                        nodes.push(RegressionNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        });
                    }
                    Some(&"leaf") if line.tokens.len() == 3 => {
                        nodes.push(RegressionNode::Leaf {
                            value: super::parse_f64(line.tokens[2], line.line_no)?,
                        });
                    }
                    _ => return Err(MedleyError::parse(line.line_no, "expected split or leaf node")),
                }
            }
            stages.push(Stage {
                tree: RegressionTree { nodes },
                alpha,
                curvature_ok,
            });
        }
        Ok(GbmModel {
            f0,
            shrinkage,
            stages,
            n_features,
            train_losses: Vec::new(),
            skipped_stages: Vec::new(),
        })
    }
}
