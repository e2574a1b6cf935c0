//! Validation-risk ensembling.
//!
//! Builds a risk matrix from per-model validation error rates and pairwise
//! residual correlations, minimizes the ensemble risk over the probability
//! simplex (closed form when the Hessian is positive definite, projected
//! gradient descent otherwise), and scores weight vectors for the
//! performance/diversity trade-off.

use ndarray::{Array1, Array2};

use crate::dataset::Dataset;
use crate::learners::{classification_error, TrainedModel};
use crate::{linalg, stats, MedleyError, Result};

/// Stop threshold on the gradient-mapping norm for projected gradient descent.
const GRADIENT_MAPPING_TOL: f64 = 1e-10;
/// Hard cap on projected-gradient iterations per start.
const MAX_PGD_ITERS: usize = 400_000;
/// Consecutive iterations with a stable active set before attempting an
/// exact solve restricted to the free coordinates.
const POLISH_PATIENCE: usize = 32;

/// Validation risk summary for a fixed roster of models: error rates and the
/// correlation structure of their residuals.
#[derive(Debug, Clone)]
pub struct RiskMatrix {
    /// Model names, fixing the coordinate order of `errors` and `correlations`.
    pub names: Vec<String>,
    /// Per-model validation misclassification rates, each in [0, 1].
    pub errors: Array1<f64>,
    /// Pairwise Pearson correlations of validation residuals; unit diagonal.
    pub correlations: Array2<f64>,
    /// True where a model's residual vector had zero variance, in which case
    /// its off-diagonal correlations were set to 0.
    pub zero_variance: Vec<bool>,
}

impl RiskMatrix {
    /// Builds a risk matrix from explicit components, validating invariants.
    pub fn new(
        names: Vec<String>,
        errors: Array1<f64>,
        correlations: Array2<f64>,
    ) -> Result<Self> {
        let zero_variance = vec![false; names.len()];
        Self::with_flags(names, errors, correlations, zero_variance)
    }

    /// As [`RiskMatrix::new`] but with explicit zero-variance flags.
    pub fn with_flags(
        names: Vec<String>,
        errors: Array1<f64>,
        correlations: Array2<f64>,
        zero_variance: Vec<bool>,
    ) -> Result<Self> {
        let matrix = Self {
            names,
            errors,
            correlations,
            zero_variance,
        };
        matrix.validate()?;
        Ok(matrix)
    }

    /// Estimates the risk matrix of `models` on a held-out validation set.
    pub fn estimate(
        names: &[String],
        models: &[TrainedModel],
        validation: &Dataset,
    ) -> Result<Self> {
        if names.len() != models.len() {
            return Err(MedleyError::Dimension {
                expected: models.len(),
                got: names.len(),
            });
        }
        let errors = estimate_errors(models, validation)?;
        let (correlations, zero_variance) = residual_correlation(models, validation)?;
        Self::with_flags(names.to_vec(), errors, correlations, zero_variance)
    }

    /// Number of models covered by this matrix.
    pub fn n_models(&self) -> usize {
        self.names.len()
    }

    /// The symmetric matrix `A` with `A_ii = eps_i` and
    /// `A_ij = 2 rho_ij eps_i eps_j` off the diagonal, so that the ensemble
    /// risk is exactly `w' A w`.
    pub fn matrix_a(&self) -> Array2<f64> {
        let n = self.n_models();
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] = if i == j {
                    self.errors[i]
                } else {
                    2.0 * self.correlations[[i, j]] * self.errors[i] * self.errors[j]
                };
            }
        }
        a
    }

    fn validate(&self) -> Result<()> {
        let n = self.names.len();
        if n == 0 {
            return Err(MedleyError::invalid("risk matrix needs at least one model"));
        }
        if self.errors.len() != n {
            return Err(MedleyError::Dimension {
                expected: n,
                got: self.errors.len(),
            });
        }
        if self.correlations.nrows() != n || self.correlations.ncols() != n {
            return Err(MedleyError::Dimension {
                expected: n,
                got: self.correlations.nrows(),
            });
        }
        if self.zero_variance.len() != n {
            return Err(MedleyError::Dimension {
                expected: n,
                got: self.zero_variance.len(),
            });
        }
        for (i, &e) in self.errors.iter().enumerate() {
            if !(0.0..=1.0).contains(&e) {
                return Err(MedleyError::invalid(format!(
                    "error rate for model {i} is {e}, outside [0, 1]"
                )));
            }
        }
        for i in 0..n {
            if (self.correlations[[i, i]] - 1.0).abs() > 1e-12 {
                return Err(MedleyError::invalid(format!(
                    "correlation diagonal entry {i} is {}, expected 1",
                    self.correlations[[i, i]]
                )));
            }
            for j in 0..n {
                let r = self.correlations[[i, j]];
                if (r - self.correlations[[j, i]]).abs() > 1e-12 {
                    return Err(MedleyError::invalid(format!(
                        "correlation matrix is asymmetric at ({i}, {j})"
                    )));
                }
                if r.abs() > 1.0 + 1e-12 {
                    return Err(MedleyError::invalid(format!(
                        "correlation ({i}, {j}) is {r}, outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Which solver produced a set of ensemble weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    /// Lagrangian stationary point `w = A^-1 1 / (1' A^-1 1)`.
    ClosedForm,
    /// Projected gradient descent onto the probability simplex.
    ProjectedGradient,
}

impl SolverPath {
    /// Stable lowercase tag for reports.
    pub fn as_str(self) -> &'static str {
        match self {
            SolverPath::ClosedForm => "closed-form",
            SolverPath::ProjectedGradient => "projected-gradient",
        }
    }
}

/// Trade-off coefficients and constraint mode for weight optimization.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    /// Weight on the mean validation loss term of the combined loss.
    pub alpha: f64,
    /// Weight on the diversity term of the combined loss.
    pub beta: f64,
    /// Restrict weights to the probability simplex (`w_i >= 0`). When false
    /// only the sum-to-one constraint is enforced and negative weights are
    /// accepted from the closed form.
    pub simplex: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            simplex: true,
        }
    }
}

impl EnsembleConfig {
    /// Checks that the trade-off coefficients are nonnegative.
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(MedleyError::invalid("alpha must be finite and >= 0"));
        }
        if self.beta < 0.0 || !self.beta.is_finite() {
            return Err(MedleyError::invalid("beta must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Optimized ensemble weights with solver diagnostics.
#[derive(Debug, Clone)]
pub struct EnsembleWeights {
    /// Weight per model, summing to one.
    pub weights: Array1<f64>,
    /// Lagrange multiplier of the sum-to-one constraint at the solution
    /// (equals twice the achieved objective).
    pub lambda: f64,
    /// Achieved ensemble risk `w' A w`.
    pub objective: f64,
    /// Which solver produced the weights.
    pub path: SolverPath,
    /// Whether the Hessian `2A` admitted a Cholesky factorization.
    pub hessian_positive_definite: bool,
}

/// Per-model validation misclassification rates, in model order.
pub fn estimate_errors(models: &[TrainedModel], validation: &Dataset) -> Result<Array1<f64>> {
    if models.is_empty() {
        return Err(MedleyError::invalid("need at least one model"));
    }
    let mut errors = Vec::with_capacity(models.len());
    for model in models {
        let probs = model.predict_proba(&validation.features)?;
        errors.push(classification_error(&probs, &validation.target));
    }
    Ok(Array1::from(errors))
}

/// Pairwise Pearson correlation of validation residuals `p_hat - y`,
/// together with a flag per model marking zero-variance residual vectors
/// (whose off-diagonal correlations are set to 0).
pub fn residual_correlation(
    models: &[TrainedModel],
    validation: &Dataset,
) -> Result<(Array2<f64>, Vec<bool>)> {
    if models.is_empty() {
        return Err(MedleyError::invalid("need at least one model"));
    }
    let y = validation.target_f64();
    let mut residuals = Vec::with_capacity(models.len());
    for model in models {
        let probs = model.predict_proba(&validation.features)?;
        residuals.push(&probs - &y);
    }
    correlation_from_residuals(&residuals)
}

/// Correlation matrix of explicit residual vectors; see
/// [`residual_correlation`] for the zero-variance convention.
pub fn correlation_from_residuals(
    residuals: &[Array1<f64>],
) -> Result<(Array2<f64>, Vec<bool>)> {
    let n = residuals.len();
    if n == 0 {
        return Err(MedleyError::invalid("need at least one residual vector"));
    }
    let len = residuals[0].len();
    if len < 3 {
        return Err(MedleyError::invalid(format!(
            "residual correlation needs at least 3 rows, got {len}"
        )));
    }
    for r in residuals {
        if r.len() != len {
            return Err(MedleyError::Dimension {
                expected: len,
                got: r.len(),
            });
        }
    }
    let vectors: Vec<Vec<f64>> = residuals.iter().map(|r| r.to_vec()).collect();
    let zero_variance: Vec<bool> = vectors
        .iter()
        .map(|v| stats::population_variance(v) == 0.0)
        .collect();
    let mut rho = Array2::zeros((n, n));
    for i in 0..n {
        rho[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let r = if zero_variance[i] || zero_variance[j] {
                0.0
            } else {
                stats::pearson(&vectors[i], &vectors[j])
            };
            rho[[i, j]] = r;
            rho[[j, i]] = r;
        }
    }
    Ok((rho, zero_variance))
}

fn check_weight_dims(w: &Array1<f64>, risk: &RiskMatrix) -> Result<()> {
    if w.len() != risk.n_models() {
        return Err(MedleyError::Dimension {
            expected: risk.n_models(),
            got: w.len(),
        });
    }
    Ok(())
}

/// Ensemble risk as the quadratic form `w' A w`.
pub fn ensemble_error(w: &Array1<f64>, risk: &RiskMatrix) -> Result<f64> {
    check_weight_dims(w, risk)?;
    Ok(quadratic_form(&risk.matrix_a(), w.as_slice().unwrap_or(&w.to_vec())))
}

/// Ensemble risk spelled out as the literal double sum
/// `sum_i w_i^2 eps_i + 2 sum_i sum_{j != i} w_i w_j rho_ij eps_i eps_j`,
/// with the second sum running over ordered pairs.
pub fn ensemble_error_literal(w: &Array1<f64>, risk: &RiskMatrix) -> Result<f64> {
    check_weight_dims(w, risk)?;
    let n = risk.n_models();
    let eps = &risk.errors;
    let rho = &risk.correlations;
    let mut diagonal = 0.0;
    for i in 0..n {
        diagonal += w[i] * w[i] * eps[i];
    }
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            if j != i {
                cross += w[i] * w[j] * rho[[i, j]] * eps[i] * eps[j];
            }
        }
    }
    Ok(diagonal + 2.0 * cross)
}

fn quadratic_form(a: &Array2<f64>, w: &[f64]) -> f64 {
    let n = w.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[[i, j]] * w[j];
        }
        total += w[i] * row;
    }
    total
}

fn gradient(a: &Array2<f64>, w: &[f64], out: &mut [f64]) {
    let n = w.len();
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[[i, j]] * w[j];
        }
        out[i] = 2.0 * row;
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &Array1<f64>) -> Array1<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    let mut support = 0;
    for (k, &value) in sorted.iter().enumerate() {
        cumulative += value;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if value - candidate > 0.0 {
            threshold = candidate;
            support = k + 1;
        }
    }
    if support == 0 {
        // All mass collapses onto the largest coordinate.
        threshold = sorted[0] - 1.0;
    }
    v.mapv(|x| (x - threshold).max(0.0))
}

/// Fixed reference step used both for gradient steps and for the
/// gradient-mapping optimality measure: the reciprocal of a Lipschitz bound
/// on the risk gradient.
fn reference_step(a: &Array2<f64>) -> f64 {
    let frobenius = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lipschitz = 2.0 * frobenius;
    if lipschitz > 1e-12 {
        1.0 / lipschitz
    } else {
        1.0
    }
}

/// Norm of the projected-gradient mapping `(w - P(w - t grad)) / t` at `w`,
/// the first-order optimality measure for the simplex-constrained problem.
pub fn gradient_mapping_norm(risk: &RiskMatrix, w: &Array1<f64>) -> Result<f64> {
    check_weight_dims(w, risk)?;
    let a = risk.matrix_a();
    let step = reference_step(&a);
    let ws = w.to_vec();
    let mut grad = vec![0.0; ws.len()];
    gradient(&a, &ws, &mut grad);
    let shifted = Array1::from_iter(ws.iter().zip(&grad).map(|(&wi, &gi)| wi - step * gi));
    let projected = project_to_simplex(&shifted);
    let norm = projected
        .iter()
        .zip(&ws)
        .map(|(&p, &wi)| (wi - p) * (wi - p))
        .sum::<f64>()
        .sqrt();
    Ok(norm / step)
}

/// Projected gradient descent on `w' A w` over the simplex from one start.
/// The fixed step `1/L` guarantees monotone descent, so the result is never
/// worse than the start. Once the active set stabilizes, an exact solve on
/// the free coordinates polishes the iterate when it passes feasibility and
/// optimality checks.
fn pgd_from(a: &Array2<f64>, start: &Array1<f64>) -> (Array1<f64>, f64) {
    let n = start.len();
    let step = reference_step(a);
    let mut w = project_to_simplex(start).to_vec();
    let mut grad = vec![0.0; n];
    let mut active = vec![false; n];
    let mut stable_iters = 0usize;
    for _ in 0..MAX_PGD_ITERS {
        gradient(a, &w, &mut grad);
        let shifted = Array1::from_iter(w.iter().zip(&grad).map(|(&wi, &gi)| wi - step * gi));
        let candidate = project_to_simplex(&shifted);
        let mapping = candidate
            .iter()
            .zip(&w)
            .map(|(&c, &wi)| (c - wi) * (c - wi))
            .sum::<f64>()
            .sqrt()
            / step;
        if mapping < GRADIENT_MAPPING_TOL {
            break;
        }
        for (i, slot) in w.iter_mut().enumerate() {
            *slot = candidate[i];
        }
        let now_active: Vec<bool> = w.iter().map(|&x| x <= 0.0).collect();
        if now_active == active {
            stable_iters += 1;
        } else {
            active = now_active;
            stable_iters = 0;
        }
        if stable_iters >= POLISH_PATIENCE {
            stable_iters = 0;
            if let Some(polished) = polish_active_set(a, &w, step) {
                w = polished;
                break;
            }
        }
    }
    let value = quadratic_form(a, &w);
    (Array1::from(w), value)
}

/// Exact stationary solve restricted to the currently free coordinates.
/// Returns the polished point only when it is feasible, optimal to the
/// gradient-mapping tolerance, and no worse than the current iterate.
fn polish_active_set(a: &Array2<f64>, w: &[f64], step: f64) -> Option<Vec<f64>> {
    let n = w.len();
    let free: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    if free.is_empty() {
        return None;
    }
    let m = free.len();
    let mut sub = Array2::zeros((m, m));
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            sub[[r, c]] = a[[i, j]];
        }
    }
    let ones = Array1::ones(m);
    let solved = linalg::solve(&sub, &ones).ok()?;
    let total: f64 = solved.sum();
    if !total.is_finite() || total.abs() < 1e-300 {
        return None;
    }
    let mut candidate = vec![0.0; n];
    for (r, &i) in free.iter().enumerate() {
        let wi = solved[r] / total;
        if !wi.is_finite() || wi < 0.0 {
            return None;
        }
        candidate[i] = wi;
    }
    if quadratic_form(a, &candidate) > quadratic_form(a, w) {
        return None;
    }
    // Verify first-order optimality of the polished point directly.
    let mut grad = vec![0.0; n];
    gradient(a, &candidate, &mut grad);
    let shifted =
        Array1::from_iter(candidate.iter().zip(&grad).map(|(&wi, &gi)| wi - step * gi));
    let projected = project_to_simplex(&shifted);
    let mapping = projected
        .iter()
        .zip(&candidate)
        .map(|(&p, &c)| (p - c) * (p - c))
        .sum::<f64>()
        .sqrt()
        / step;
    if mapping < GRADIENT_MAPPING_TOL {
        Some(candidate)
    } else {
        None
    }
}

/// Runs projected gradient descent from the uniform start, every unit
/// vector, and (when available) the projected closed-form point, keeping the
/// lowest achieved risk. Monotone descent from each start makes the result
/// no worse than any of those candidates.
fn pgd_multi_start(a: &Array2<f64>, extra: Option<&Array1<f64>>) -> (Array1<f64>, f64) {
    let n = a.nrows();
    let uniform = Array1::from_elem(n, 1.0 / n as f64);
    let (mut best_w, mut best_value) = pgd_from(a, &uniform);
    for i in 0..n {
        let mut unit = Array1::zeros(n);
        unit[i] = 1.0;
        let (w, value) = pgd_from(a, &unit);
        if value < best_value {
            best_w = w;
            best_value = value;
        }
    }
    if let Some(point) = extra {
        if point.iter().all(|v| v.is_finite()) {
            let (w, value) = pgd_from(a, point);
            if value < best_value {
                best_w = w;
                best_value = value;
            }
        }
    }
    (best_w, best_value)
}

/// Minimizes the ensemble risk over sum-to-one weights.
///
/// When the Hessian `2A` is positive definite the Lagrangian stationary
/// point `w = A^-1 1 / (1' A^-1 1)` is used directly; in simplex mode a
/// stationary point with negative coordinates (and any indefinite or
/// singular Hessian in either mode) falls back to projected gradient
/// descent onto the simplex, run from the uniform start and, as a
/// global-minimum sanity net, every unit vector.
pub fn optimize_weights(risk: &RiskMatrix, cfg: &EnsembleConfig) -> Result<EnsembleWeights> {
    cfg.validate()?;
    risk.validate()?;
    let n = risk.n_models();
    let a = risk.matrix_a();
    let hessian = a.mapv(|v| 2.0 * v);
    let hessian_chol = linalg::cholesky(&hessian);
    let hessian_positive_definite = hessian_chol.is_some();

    let closed_form: Option<Array1<f64>> = hessian_chol.as_ref().and_then(|l| {
        // (2A) x = 2 * 1  =>  x = A^-1 1.
        let x = linalg::cholesky_solve(l, &Array1::from_elem(n, 2.0));
        let total: f64 = x.sum();
        if !total.is_finite() || total <= 0.0 || x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(x.mapv(|v| v / total))
    });

    if let Some(w) = &closed_form {
        let acceptable = if cfg.simplex {
            // Tolerate closed-form coordinates a rounding error below zero.
            w.iter().all(|&wi| wi >= -1e-12)
        } else {
            true
        };
        if acceptable {
            let mut weights = w.clone();
            if cfg.simplex {
                weights.mapv_inplace(|wi| wi.max(0.0));
                let total = weights.sum();
                weights.mapv_inplace(|wi| wi / total);
            }
            return Ok(finish(
                weights,
                SolverPath::ClosedForm,
                hessian_positive_definite,
                &a,
            ));
        }
    }

    let (weights, _) = pgd_multi_start(&a, closed_form.as_ref());
    Ok(finish(
        weights,
        SolverPath::ProjectedGradient,
        hessian_positive_definite,
        &a,
    ))
}

/// Minimizes the ensemble risk by projected gradient descent regardless of
/// whether the closed form applies; used to cross-check the closed-form
/// solver.
pub fn projected_gradient_weights(risk: &RiskMatrix) -> Result<EnsembleWeights> {
    risk.validate()?;
    let a = risk.matrix_a();
    let hessian = a.mapv(|v| 2.0 * v);
    let hessian_positive_definite = linalg::cholesky(&hessian).is_some();
    let (weights, _) = pgd_multi_start(&a, None);
    Ok(finish(
        weights,
        SolverPath::ProjectedGradient,
        hessian_positive_definite,
        &a,
    ))
}

fn finish(
    mut weights: Array1<f64>,
    path: SolverPath,
    hessian_positive_definite: bool,
    a: &Array2<f64>,
) -> EnsembleWeights {
    // Renormalize away accumulated rounding so the sum-to-one invariant
    // holds to within 1e-12. The sum is always near one here.
    let total = weights.sum();
    if total > 0.0 {
        weights.mapv_inplace(|wi| wi / total);
    }
    let objective = quadratic_form(a, weights.as_slice().unwrap_or(&weights.to_vec()));
    EnsembleWeights {
        lambda: 2.0 * objective,
        objective,
        weights,
        path,
        hessian_positive_definite,
    }
}

/// Diversity score `D = 1 - mean rho_ij` over unordered pairs `i < j`.
pub fn diversity_score(correlations: &Array2<f64>) -> Result<f64> {
    let n = correlations.nrows();
    if n < 2 || correlations.ncols() != n {
        return Err(MedleyError::invalid(
            "diversity score needs at least two models",
        ));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            total += correlations[[i, j]];
            count += 1;
        }
    }
    Ok(1.0 - total / count as f64)
}

/// Combined loss `L* = alpha * sum_i w_i eps_i - beta * D(rho)` trading off
/// weighted validation loss against diversity.
pub fn combined_loss(w: &Array1<f64>, risk: &RiskMatrix, cfg: &EnsembleConfig) -> Result<f64> {
    cfg.validate()?;
    check_weight_dims(w, risk)?;
    let weighted_loss: f64 = w
        .iter()
        .zip(risk.errors.iter())
        .map(|(&wi, &ei)| wi * ei)
        .sum();
    let diversity = diversity_score(&risk.correlations)?;
    Ok(cfg.alpha * weighted_loss - cfg.beta * diversity)
}

/// Evaluates [`combined_loss`] on a grid of `(alpha, beta)` pairs, returning
/// `(alpha, beta, loss)` rows in sweep order.
pub fn sweep_combined_loss(
    w: &Array1<f64>,
    risk: &RiskMatrix,
    alphas: &[f64],
    betas: &[f64],
) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::with_capacity(alphas.len() * betas.len());
    for &alpha in alphas {
        for &beta in betas {
            let cfg = EnsembleConfig {
                alpha,
                beta,
                simplex: true,
            };
            rows.push((alpha, beta, combined_loss(w, risk, &cfg)?));
        }
    }
    Ok(rows)
}

/// Weighted ensemble prediction `sum_M w_M p_M` per row, clipped to [0, 1].
pub fn ensemble_predict(
    models: &[TrainedModel],
    weights: &Array1<f64>,
    rows: &Array2<f64>,
) -> Result<Array1<f64>> {
    if models.len() != weights.len() {
        return Err(MedleyError::Dimension {
            expected: models.len(),
            got: weights.len(),
        });
    }
    if models.is_empty() {
        return Err(MedleyError::invalid("need at least one model"));
    }
    let mut combined = Array1::<f64>::zeros(rows.nrows());
    for (model, &weight) in models.iter().zip(weights.iter()) {
        let probs = model.predict_proba(rows)?;
        combined = combined + probs.mapv(|p| weight * p);
    }
    Ok(combined.mapv(|p| p.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::SvmModel;
    use ndarray::array;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    fn two_model_risk(e1: f64, e2: f64, rho: f64) -> RiskMatrix {
        RiskMatrix::new(
            vec!["a".into(), "b".into()],
            array![e1, e2],
            array![[1.0, rho], [rho, 1.0]],
        )
        .unwrap()
    }

    fn random_risk(rng: &mut ChaCha8Rng, n: usize) -> RiskMatrix {
        let errors = Array1::from_iter((0..n).map(|_| rng.gen_range(0.0..1.0)));
        let mut rho = Array2::zeros((n, n));
        for i in 0..n {
            rho[[i, i]] = 1.0;
            for j in (i + 1)..n {
                let r = rng.gen_range(-1.0..1.0);
                rho[[i, j]] = r;
                rho[[j, i]] = r;
            }
        }
        let names = (0..n).map(|i| format!("m{i}")).collect();
        RiskMatrix::new(names, errors, rho).unwrap()
    }

    /// Linear model with fixed weights/bias; probability is the unit-slope
    /// logistic of the decision value.
    fn linear_model(weights: Vec<f64>, bias: f64) -> TrainedModel {
        TrainedModel::Svm(SvmModel {
            alphas: vec![],
            labels: vec![],
            bias,
            weights: Array1::from(weights),
            c: 1.0,
            theta: 0.25,
            support: vec![],
            converged: true,
        })
    }

    #[test]
    fn risk_matrix_rejects_invalid_inputs() {
        let bad_error = RiskMatrix::new(
            vec!["a".into()],
            array![1.5],
            array![[1.0]],
        );
        assert!(bad_error.is_err());
        let asymmetric = RiskMatrix::new(
            vec!["a".into(), "b".into()],
            array![0.1, 0.2],
            array![[1.0, 0.3], [0.2, 1.0]],
        );
        assert!(asymmetric.is_err());
        let bad_diagonal = RiskMatrix::new(
            vec!["a".into(), "b".into()],
            array![0.1, 0.2],
            array![[0.9, 0.3], [0.3, 1.0]],
        );
        assert!(bad_diagonal.is_err());
    }

    #[test]
    fn ensemble_error_matches_hand_values() {
        let single = RiskMatrix::new(vec!["a".into()], array![0.2], array![[1.0]]).unwrap();
        assert_eq!(ensemble_error(&array![1.0], &single).unwrap(), 0.2);

        let degenerate = two_model_risk(0.3, 0.5, 0.7);
        assert!((ensemble_error(&array![1.0, 0.0], &degenerate).unwrap() - 0.3).abs() < 1e-15);

        let half = two_model_risk(0.1, 0.2, 0.5);
        let e = ensemble_error(&array![0.5, 0.5], &half).unwrap();
        assert!((e - 0.085).abs() < 1e-15, "expected 0.085, got {e}");
        let literal = ensemble_error_literal(&array![0.5, 0.5], &half).unwrap();
        assert!((literal - 0.085).abs() < 1e-15);
    }

    #[test]
    fn literal_and_quadratic_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6);
            let risk = random_risk(&mut rng, n);
            let raw = Array1::from_iter((0..n).map(|_| rng.gen_range(-1.0..2.0)));
            let quad = ensemble_error(&raw, &risk).unwrap();
            let literal = ensemble_error_literal(&raw, &risk).unwrap();
            assert!(
                (quad - literal).abs() < 1e-12,
                "forms disagree: {quad} vs {literal}"
            );
        }
    }

    #[test]
    fn symmetric_risk_gives_uniform_weights() {
        let risk = RiskMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            array![0.2, 0.2, 0.2],
            array![[1.0, 0.3, 0.3], [0.3, 1.0, 0.3], [0.3, 0.3, 1.0]],
        )
        .unwrap();
        let solution = optimize_weights(&risk, &EnsembleConfig::default()).unwrap();
        for &wi in solution.weights.iter() {
            assert!((wi - 1.0 / 3.0).abs() < 1e-10, "weights {:?}", solution.weights);
        }
        assert!((solution.weights.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_two_model_calculus_oracle() {
        // Minimizing 0.1 w^2 + 0.3 (1-w)^2 gives w = 0.75 and value 0.075.
        let risk = two_model_risk(0.1, 0.3, 0.0);
        let solution = optimize_weights(&risk, &EnsembleConfig::default()).unwrap();
        assert_eq!(solution.path, SolverPath::ClosedForm);
        assert!(solution.hessian_positive_definite);
        assert!((solution.weights[0] - 0.75).abs() < 1e-12);
        assert!((solution.weights[1] - 0.25).abs() < 1e-12);
        assert!((solution.objective - 0.075).abs() < 1e-12);
        assert!((solution.lambda - 0.15).abs() < 1e-12);
    }

    #[test]
    fn projected_gradient_agrees_with_closed_form_when_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 20 {
            let risk = random_risk(&mut rng, 3);
            let direct = optimize_weights(&risk, &EnsembleConfig::default()).unwrap();
            if direct.path != SolverPath::ClosedForm
                || direct.weights.iter().any(|&wi| wi < 1e-6)
            {
                continue;
            }
            let iterative = projected_gradient_weights(&risk).unwrap();
            for (a, b) in direct.weights.iter().zip(iterative.weights.iter()) {
                assert!((a - b).abs() < 1e-6, "{:?} vs {:?}", direct.weights, iterative.weights);
            }
            checked += 1;
        }
    }

    #[test]
    fn optimizer_beats_named_candidates_and_satisfies_first_order_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let n = rng.gen_range(2..=5);
            let risk = random_risk(&mut rng, n);
            let solution = optimize_weights(&risk, &EnsembleConfig::default()).unwrap();
            assert!((solution.weights.sum() - 1.0).abs() < 1e-12);
            assert!(solution.weights.iter().all(|&wi| wi >= 0.0));
            for i in 0..n {
                let mut unit = Array1::zeros(n);
                unit[i] = 1.0;
                let at_unit = ensemble_error(&unit, &risk).unwrap();
                assert!(
                    solution.objective <= at_unit + 1e-10,
                    "objective {} exceeds unit vector {i} value {at_unit}",
                    solution.objective
                );
            }
            let uniform = Array1::from_elem(n, 1.0 / n as f64);
            let at_uniform = ensemble_error(&uniform, &risk).unwrap();
            assert!(solution.objective <= at_uniform + 1e-10);
            let mapping = gradient_mapping_norm(&risk, &solution.weights).unwrap();
            assert!(mapping < 1e-8, "gradient mapping {mapping}");
        }
    }

    #[test]
    fn diversity_score_hand_values_and_permutation_invariance() {
        assert!((diversity_score(&array![[1.0, 1.0], [1.0, 1.0]]).unwrap()).abs() < 1e-15);
        assert!((diversity_score(&array![[1.0, 0.0], [0.0, 1.0]]).unwrap() - 1.0).abs() < 1e-15);
        assert!((diversity_score(&array![[1.0, 0.4], [0.4, 1.0]]).unwrap() - 0.6).abs() < 1e-15);
        assert!(diversity_score(&array![[1.0]]).is_err());

        let rho = array![
            [1.0, 0.2, -0.1],
            [0.2, 1.0, 0.5],
            [-0.1, 0.5, 1.0]
        ];
        let base = diversity_score(&rho).unwrap();
        // Swap models 0 and 2.
        let permuted = array![
            [1.0, 0.5, -0.1],
            [0.5, 1.0, 0.2],
            [-0.1, 0.2, 1.0]
        ];
        assert!((diversity_score(&permuted).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn combined_loss_matches_hand_value() {
        let risk = two_model_risk(0.1, 0.2, 0.4);
        let cfg = EnsembleConfig {
            alpha: 1.0,
            beta: 0.5,
            simplex: true,
        };
        let loss = combined_loss(&array![0.5, 0.5], &risk, &cfg).unwrap();
        assert!((loss - (-0.15)).abs() < 1e-12, "got {loss}");

        let alpha_only = EnsembleConfig {
            alpha: 2.0,
            beta: 0.0,
            simplex: true,
        };
        let l = combined_loss(&array![0.5, 0.5], &risk, &alpha_only).unwrap();
        assert!((l - 0.3).abs() < 1e-12);

        let beta_only = EnsembleConfig {
            alpha: 0.0,
            beta: 1.0,
            simplex: true,
        };
        let l = combined_loss(&array![0.5, 0.5], &risk, &beta_only).unwrap();
        assert!((l - (-0.6)).abs() < 1e-12);
    }

    #[test]
    fn ensemble_predict_averages_and_validates() {
        // Constant-output models: decision value is the bias.
        // sigmoid(-ln 4) = 0.2, sigmoid(ln(1.5)) = 0.6.
        let low = linear_model(vec![0.0], (0.2f64 / 0.8).ln());
        let high = linear_model(vec![0.0], (0.6f64 / 0.4).ln());
        let rows = array![[0.0], [1.0]];
        let combined =
            ensemble_predict(&[low, high], &array![0.5, 0.5], &rows).unwrap();
        for &p in combined.iter() {
            assert!((p - 0.4).abs() < 1e-12, "got {p}");
        }

        let single = linear_model(vec![0.0], 0.3);
        let alone = ensemble_predict(
            std::slice::from_ref(&single),
            &array![1.0],
            &rows,
        )
        .unwrap();
        let direct = single.predict_proba(&rows).unwrap();
        assert_eq!(alone, direct);

        let mismatch = ensemble_predict(std::slice::from_ref(&single), &array![0.5, 0.5], &rows);
        assert!(mismatch.is_err());
    }

    #[test]
    fn estimate_errors_for_perfect_and_coin_models() {
        let features = array![[0.0], [0.2], [0.4], [0.6], [0.8], [1.0]];
        let target = ndarray::Array1::from(vec![0u8, 0, 0, 1, 1, 1]);
        let data = Dataset::new(features, target, vec!["x".into()]).unwrap();

        // 10x - 5 is positive exactly when x > 0.5.
        let perfect = linear_model(vec![10.0], -5.0);
        // Zero decision value gives probability exactly 0.5 everywhere, which
        // predicts label 1 for every row: half of the balanced labels wrong.
        let coin = linear_model(vec![0.0], 0.0);
        let errors = estimate_errors(&[perfect, coin], &data).unwrap();
        assert_eq!(errors[0], 0.0);
        assert_eq!(errors[1], 0.5);
    }

    #[test]
    fn residual_correlation_hand_value_and_zero_variance_flag() {
        let r1 = Array1::from(vec![1.0, 2.0, 3.0]);
        let r2 = Array1::from(vec![1.0, 2.0, 4.0]);
        let (rho, flags) = correlation_from_residuals(&[r1, r2]).unwrap();
        assert!((rho[[0, 1]] - 0.9820).abs() < 1e-4, "got {}", rho[[0, 1]]);
        assert_eq!(rho[[0, 0]], 1.0);
        assert_eq!(rho[[0, 1]], rho[[1, 0]]);
        assert!(!flags[0] && !flags[1]);

        let constant = Array1::from(vec![0.25, 0.25, 0.25]);
        let varying = Array1::from(vec![0.1, 0.5, 0.9]);
        let (rho, flags) = correlation_from_residuals(&[constant, varying]).unwrap();
        assert_eq!(rho[[0, 1]], 0.0);
        assert!(flags[0]);
        assert!(!flags[1]);

        let too_short = correlation_from_residuals(&[Array1::from(vec![1.0, 2.0])]);
        assert!(too_short.is_err());
    }

    #[test]
    fn opposite_residuals_have_correlation_minus_one() {
        let r = Array1::from(vec![0.3, -0.2, 0.5, 0.1]);
        let neg = r.mapv(|v| -v);
        let (rho, _) = correlation_from_residuals(&[r, neg]).unwrap();
        assert!((rho[[0, 1]] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn indefinite_risk_falls_back_to_projected_gradient() {
        // Strong negative correlation with large errors makes A indefinite.
        let risk = two_model_risk(0.9, 0.9, -1.0);
        let a = risk.matrix_a();
        assert!(linalg::cholesky(&a.mapv(|v| 2.0 * v)).is_none());
        let solution = optimize_weights(&risk, &EnsembleConfig::default()).unwrap();
        assert_eq!(solution.path, SolverPath::ProjectedGradient);
        assert!(!solution.hessian_positive_definite);
        assert!((solution.weights.sum() - 1.0).abs() < 1e-12);
        // Mixing anti-correlated models must beat both unit vectors.
        assert!(solution.objective < 0.9);
    }

    #[test]
    fn sweep_combined_loss_covers_grid() {
        let risk = two_model_risk(0.1, 0.2, 0.4);
        let rows = sweep_combined_loss(
            &array![0.5, 0.5],
            &risk,
            &[0.0, 1.0],
            &[0.0, 0.5],
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert!((rows[3].2 - (-0.15)).abs() < 1e-12);
    }
}
