//! Linear soft-margin SVM solved in the dual by sequential minimal
//! optimization.
//!
//! The primal objective used here is `theta * ||w||^2 + C * sum(xi)` with a
//! configurable quadratic coefficient theta (default 1/4). Rescaling that
//! coefficient does not move the optimum: the problem is equivalent to the
//! textbook `1/2 ||w||^2 + C_std * sum(xi)` form with `C_std = C / (2 theta)`,
//! and only the dual coefficients rescale (`alpha_theta = 2 theta *
//! alpha_std`). Internally the solver always works on the textbook form.

use ndarray::{Array1, Array2};

use crate::dataset::Dataset;
use crate::error::MedleyError;
use crate::Result;

use super::TextReader;

#[derive(Debug, Clone)]
pub struct SvmConfig {
    /// Slack penalty in the `theta`-scaled objective.
    pub c: f64,
    /// Coefficient on ||w||^2 in the primal objective.
    pub theta: f64,
    /// KKT violation tolerance driving SMO acceptance.
    pub tolerance: f64,
    /// Maximum full sweeps before giving up.
    pub max_passes: usize,
    /// Reserved for API uniformity; the pair-selection heuristic is
    /// deterministic.
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            theta: 0.25,
            tolerance: 1e-4,
            max_passes: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    /// Dual coefficients in the theta-scaled objective; 0 <= alpha_i <= C.
    pub alphas: Vec<f64>,
    /// Training labels remapped to -1/+1, aligned with `alphas`.
    pub labels: Vec<f64>,
    pub bias: f64,
    /// w = sum_i alpha_std_i y_i x_i (identical in both scalings).
    pub weights: Array1<f64>,
    pub c: f64,
    pub theta: f64,
    /// Indices of training rows with nonzero alpha.
    pub support: Vec<usize>,
    pub converged: bool,
}

/// Train by simplified SMO on the equivalent standard-form dual.
pub fn svm_train(data: &Dataset, cfg: &SvmConfig) -> Result<SvmModel> {
    if cfg.c <= 0.0 || cfg.theta <= 0.0 {
        return Err(MedleyError::invalid("C and theta must be positive"));
    }
    if cfg.tolerance <= 0.0 || cfg.max_passes == 0 {
        return Err(MedleyError::invalid("tolerance and max passes must be positive"));
    }
    let n = data.n_rows();
    let pos = data.target.iter().filter(|&&t| t == 1).count();
    if pos == 0 || pos == n {
        return Err(MedleyError::invalid(
            "SVM training needs both classes present",
        ));
    }
    let y: Vec<f64> = data.target.iter().map(|&t| if t == 1 { 1.0 } else { -1.0 }).collect();
    let x = &data.features;
    let d = data.n_cols();
    let c_std = cfg.c / (2.0 * cfg.theta);

    let kernel = |a: usize, b: usize| -> f64 {
        let mut s = 0.0;
        for k in 0..d {
            s += x[[a, k]] * x[[b, k]];
        }
        s
    };

    let mut alphas = vec![0.0_f64; n];
    let mut w = Array1::<f64>::zeros(d);
    let mut b = 0.0_f64;
    let mut converged = false;

    // One pairwise dual step on (i, j); returns false when the pair cannot
    // make progress (degenerate kernel geometry or a pinned box segment).
    let try_pair = |i: usize,
                        j: usize,
                        e_i: f64,
                        alphas: &mut Vec<f64>,
                        w: &mut Array1<f64>,
                        b: &mut f64|
     -> bool {
        let f_j = w.dot(&x.row(j)) + *b;
        let e_j = f_j - y[j];
        let (a_i_old, a_j_old) = (alphas[i], alphas[j]);
        let (lo, hi) = if (y[i] - y[j]).abs() > 1e-12 {
            (
                (a_j_old - a_i_old).max(0.0),
                (c_std + a_j_old - a_i_old).min(c_std),
            )
        } else {
            (
                (a_i_old + a_j_old - c_std).max(0.0),
                (a_i_old + a_j_old).min(c_std),
            )
        };
        if hi - lo < 1e-15 {
            return false;
        }
        let eta = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
        if eta <= 0.0 {
            return false;
        }
        let a_j = (a_j_old + y[j] * (e_i - e_j) / eta).clamp(lo, hi);
        if (a_j - a_j_old).abs() < 1e-13 {
            return false;
        }
        // snap rounding residue onto the box bounds, otherwise a point whose
        // multiplier should be exactly 0 (or C) can sit one ulp off and be
        // flagged as a KKT violation forever
        let snap = 1e-12 * c_std.max(1.0);
        let snap_bounds = |a: f64| -> f64 {
            if a < snap {
                0.0
            } else if a > c_std - snap {
                c_std
            } else {
                a
            }
        };
        let a_j = snap_bounds(a_j);
        if (a_j - a_j_old).abs() < 1e-13 {
            return false;
        }
        let a_i = snap_bounds((a_i_old + y[i] * y[j] * (a_j_old - a_j)).clamp(0.0, c_std));
        let b1 = *b - e_i - y[i] * (a_i - a_i_old) * kernel(i, i) - y[j] * (a_j - a_j_old) * kernel(i, j);
        let b2 = *b - e_j - y[i] * (a_i - a_i_old) * kernel(i, j) - y[j] * (a_j - a_j_old) * kernel(j, j);
        *b = if a_i > 0.0 && a_i < c_std {
            b1
        } else if a_j > 0.0 && a_j < c_std {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        for k in 0..d {
            w[k] += y[i] * (a_i - a_i_old) * x[[i, k]] + y[j] * (a_j - a_j_old) * x[[j, k]];
        }
        alphas[i] = a_i;
        alphas[j] = a_j;
        true
    };

    for _sweep in 0..cfg.max_passes {
        let mut violations = 0usize;
        for i in 0..n {
            let f_i = w.dot(&x.row(i)) + b;
            let e_i = f_i - y[i];
            let r_i = e_i * y[i];
            if !((r_i < -cfg.tolerance && alphas[i] < c_std) || (r_i > cfg.tolerance && alphas[i] > 0.0)) {
                continue;
            }
            violations += 1;
            // second-choice heuristic: partners ordered by |E_i - E_j|
            // descending, falling back through the rest so a fixable
            // violation always makes progress
            let mut order: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let e_j = w.dot(&x.row(j)) + b - y[j];
                    ((e_i - e_j).abs(), j)
                })
                .collect();
            order.sort_by(|a, c| c.0.partial_cmp(&a.0).unwrap());
            for &(_, j) in &order {
                if try_pair(i, j, e_i, &mut alphas, &mut w, &mut b) {
                    break;
                }
            }
        }
        // converged only when a full sweep finds no KKT violation at all
        if violations == 0 {
            converged = true;
            break;
        }
    }

    // report dual coefficients in the theta-scaled objective
    let scale = 2.0 * cfg.theta;
    let alphas_theta: Vec<f64> = alphas.iter().map(|a| a * scale).collect();
    let support: Vec<usize> = (0..n).filter(|&i| alphas[i] > 1e-10).collect();
    Ok(SvmModel {
        alphas: alphas_theta,
        labels: y,
        bias: b,
        weights: w,
        c: cfg.c,
        theta: cfg.theta,
        support,
        converged,
    })
}

impl SvmModel {
    /// Signed distance-scaled decision values w.x + b.
    pub fn decision_values(&self, rows: &Array2<f64>) -> Result<Array1<f64>> {
        if rows.ncols() != self.weights.len() {
            return Err(MedleyError::Dimension {
                expected: self.weights.len(),
                got: rows.ncols(),
            });
        }
        Ok(rows.dot(&self.weights) + self.bias)
    }

    /// Probability output through a unit-slope logistic link.
    pub fn predict_proba(&self, rows: &Array2<f64>) -> Result<Array1<f64>> {
        Ok(self
            .decision_values(rows)?
            .mapv(|v| 1.0 / (1.0 + (-v).exp())))
    }

    /// Signed sum of the dual coefficients (0 at a valid dual point).
    pub fn dual_equality_residual(&self) -> f64 {
        self.alphas
            .iter()
            .zip(self.labels.iter())
            .map(|(&a, &y)| a * y)
            .sum()
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        use std::fmt::Write as _;
        let _ = writeln!(out, "theta {}", self.theta);
        let _ = writeln!(out, "c {}", self.c);
        let _ = writeln!(out, "bias {}", self.bias);
        let _ = writeln!(out, "converged {}", u8::from(self.converged));
        let _ = writeln!(out, "n_features {}", self.weights.len());
        let _ = write!(out, "weights");
        for v in self.weights.iter() {
            let _ = write!(out, " {}", v);
        }
        out.push('\n');
        let _ = write!(out, "alphas");
        for v in &self.alphas {
            let _ = write!(out, " {}", v);
        }
        out.push('\n');
        let _ = write!(out, "labels");
        for v in &self.labels {
            let _ = write!(out, " {}", v);
        }
        out.push('\n');
        let _ = write!(out, "support");
        for v in &self.support {
            let _ = write!(out, " {}", v);
        }
        out.push('\n');
    }

    pub(crate) fn parse_text(r: &mut TextReader) -> Result<SvmModel> {
        let theta = r.expect_key("theta")?.one_f64()?;
        let c = r.expect_key("c")?.one_f64()?;
        let bias = r.expect_key("bias")?.one_f64()?;
        let converged = r.expect_key("converged")?.one()? == "1";
        let n_features = r.expect_key("n_features")?.one_usize()?;
        let weights = r.expect_key("weights")?.all_f64()?;
        if weights.len() != n_features {
            return Err(MedleyError::invalid("weight vector length mismatch"));
        }
        let alphas = r.expect_key("alphas")?.all_f64()?;
        let labels = r.expect_key("labels")?.all_f64()?;
        if labels.len() != alphas.len() {
            return Err(MedleyError::invalid("alphas and labels must align"));
        }
        if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
            return Err(MedleyError::invalid("labels must be -1 or +1"));
        }
        if alphas.iter().any(|&a| !(0.0..=c + 1e-9).contains(&a)) {
            return Err(MedleyError::invalid("alphas must lie in [0, C]"));
        }
        let support = r.expect_key("support")?.all_usize()?;
        Ok(SvmModel {
            alphas,
            labels,
            bias,
            weights: Array1::from(weights),
            c,
            theta,
            support,
            converged,
        })
    }
}

/// Margin M = 2 / ||w||.
pub fn svm_margin(model: &SvmModel) -> Result<f64> {
    let norm = model.weights.dot(&model.weights).sqrt();
    if norm <= 1e-12 {
        return Err(MedleyError::numerical("margin undefined for zero weight vector"));
    }
    Ok(2.0 / norm)
}

/// Maximum KKT violation over the training rows, in the theta-scaled dual:
/// near-zero alphas require margin >= 1, box-bound alphas require margin
/// <= 1, and free alphas require margin = 1.
pub fn kkt_residual(model: &SvmModel, train_features: &Array2<f64>) -> Result<f64> {
    let f = model.decision_values(train_features)?;
    if f.len() != model.alphas.len() {
        return Err(MedleyError::Dimension {
            expected: model.alphas.len(),
            got: f.len(),
        });
    }
    let edge = 1e-8 * model.c.max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..f.len() {
        let margin = model.labels[i] * f[i];
        let a = model.alphas[i];
        let viol = if a <= edge {
            (1.0 - margin).max(0.0)
        } else if a >= model.c - edge {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(viol);
    }
    Ok(worst)
}

/// Primal objective theta ||w||^2 + C sum(xi) at the trained point.
pub fn svm_objective(model: &SvmModel, features: &Array2<f64>, target: &Array1<u8>) -> Result<f64> {
    let f = model.decision_values(features)?;
    let mut slack = 0.0;
    for i in 0..f.len() {
        let y = if target[i] == 1 { 1.0 } else { -1.0 };
        slack += (1.0 - y * f[i]).max(0.0);
    }
    Ok(model.theta * model.weights.dot(&model.weights) + model.c * slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::synthetic;

    fn two_point_data() -> Dataset {
        Dataset::new(
            ndarray::array![[-1.0, -1.0], [1.0, 1.0]],
            ndarray::array![0, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn solves_two_point_problem_by_hand_values() {
        let data = two_point_data();
        let cfg = SvmConfig {
            c: 10.0,
            theta: 0.25,
            tolerance: 1e-8,
            max_passes: 1000,
            seed: 1,
        };
        let m = svm_train(&data, &cfg).unwrap();
        assert!(m.converged);
        // hard-margin solution: w = (1/2, 1/2), b = 0, alpha_std = 1/4 each
        assert!((m.weights[0] - 0.5).abs() < 1e-8, "w {:?}", m.weights);
        assert!((m.weights[1] - 0.5).abs() < 1e-8);
        assert!(m.bias.abs() < 1e-8);
        // theta-scaled: alpha = 2 * 0.25 * 0.25 = 0.125
        assert!((m.alphas[0] - 0.125).abs() < 1e-8);
        assert!((m.alphas[1] - 0.125).abs() < 1e-8);
        assert_eq!(m.support, vec![0, 1]);
        assert!(m.dual_equality_residual().abs() <= 1e-8);
        assert!((svm_margin(&m).unwrap() - 2.0 * 2.0_f64.sqrt()).abs() < 1e-8);
        assert!(kkt_residual(&m, &data.features).unwrap() < 1e-6);
    }

    #[test]
    fn rejects_single_class_input() {
        let data = Dataset::new(
            ndarray::array![[0.0, 1.0], [1.0, 0.0]],
            ndarray::array![1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(svm_train(&data, &SvmConfig::default()).is_err());
    }

    #[test]
    fn dual_equality_and_box_hold_on_real_data() {
        let data = synthetic::separable_2d(80, 3);
        let cfg = SvmConfig {
            c: 1.0,
            theta: 0.25,
            tolerance: 1e-5,
            max_passes: 2000,
            seed: 2,
        };
        let m = svm_train(&data, &cfg).unwrap();
        assert!(m.dual_equality_residual().abs() <= 1e-8);
        for &a in &m.alphas {
            assert!((-1e-12..=m.c + 1e-12).contains(&a));
        }
    }

    #[test]
    fn margin_matches_hand_value_and_geometry() {
        let mut m = svm_train(
            &two_point_data(),
            &SvmConfig {
                c: 10.0,
                tolerance: 1e-8,
                max_passes: 500,
                ..SvmConfig::default()
            },
        )
        .unwrap();
        // direct formula: w = (3,4) -> 2/5
        m.weights = ndarray::array![3.0, 4.0];
        assert!((svm_margin(&m).unwrap() - 0.4).abs() < 1e-12);
        m.weights = ndarray::array![1.0, 0.0];
        assert!((svm_margin(&m).unwrap() - 2.0).abs() < 1e-12);
        m.weights = ndarray::array![0.0, 0.0];
        assert!(svm_margin(&m).is_err());

        // geometric check on separable data: margin = 2 * min point-plane distance
        let data = synthetic::separable_2d(60, 7);
        let cfg = SvmConfig {
            c: 50.0,
            theta: 0.25,
            tolerance: 1e-9,
            max_passes: 20000,
            seed: 3,
        };
        let m = svm_train(&data, &cfg).unwrap();
        assert!(m.converged);
        let norm = m.weights.dot(&m.weights).sqrt();
        let min_dist = data
            .features
            .rows()
            .into_iter()
            .map(|row| (m.weights.dot(&row) + m.bias).abs() / norm)
            .fold(f64::INFINITY, f64::min);
        assert!(
            (svm_margin(&m).unwrap() - 2.0 * min_dist).abs() < 1e-6,
            "margin {} vs 2*mindist {}",
            svm_margin(&m).unwrap(),
            2.0 * min_dist
        );
    }

    #[test]
    fn quarter_coefficient_only_rescales_alphas() {
        let data = synthetic::separable_2d(50, 9);
        let quarter = SvmConfig {
            c: 4.0,
            theta: 0.25,
            tolerance: 1e-8,
            max_passes: 5000,
            seed: 5,
        };
        // same standard-form problem: C_std = 4/(2*0.25) = 8 = 8/(2*0.5)
        let half = SvmConfig {
            c: 8.0,
            theta: 0.5,
            tolerance: 1e-8,
            max_passes: 5000,
            seed: 5,
        };
        let mq = svm_train(&data, &quarter).unwrap();
        let mh = svm_train(&data, &half).unwrap();
        let nq = mq.weights.dot(&mq.weights).sqrt();
        let nh = mh.weights.dot(&mh.weights).sqrt();
        for k in 0..2 {
            assert!((mq.weights[k] / nq - mh.weights[k] / nh).abs() < 1e-6);
        }
        let pq = mq.predict_proba(&data.features).unwrap();
        let ph = mh.predict_proba(&data.features).unwrap();
        for i in 0..pq.len() {
            assert!((pq[i] - ph[i]).abs() < 1e-9);
        }
        // alpha ratio = theta ratio
        for i in 0..mq.alphas.len() {
            assert!((mq.alphas[i] - 0.5 * mh.alphas[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn non_convergence_is_flagged_not_fatal() {
        let data = synthetic::logistic_1d(100, 11); // noisy, not separable
        let cfg = SvmConfig {
            c: 1.0,
            theta: 0.25,
            tolerance: 1e-12,
            max_passes: 1,
            seed: 4,
        };
        let m = svm_train(&data, &cfg).unwrap();
        assert!(!m.converged);
    }

    #[test]
    fn serialization_round_trips_exactly() {
        let data = synthetic::separable_2d(40, 13);
        let m = svm_train(&data, &SvmConfig::default()).unwrap();
        let wrapped = super::super::TrainedModel::Svm(m);
        let text = wrapped.to_text();
        let reloaded = super::super::TrainedModel::from_text(&text).unwrap();
        let p1 = wrapped.predict_proba(&data.features).unwrap();
        let p2 = reloaded.predict_proba(&data.features).unwrap();
        assert_eq!(p1, p2);
    }
}
