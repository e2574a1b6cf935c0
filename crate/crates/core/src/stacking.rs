//! Stacked generalization: a linear meta-model trained on out-of-fold base
//! predictions by full-batch Adam with hyperbolic learning-rate annealing,
//! with a windowed convergence monitor on the squared meta-loss.

use ndarray::{Array1, Array2, Axis};

use crate::dataset::Dataset;
use crate::learners::{
    bnn::bnn_train, boosting::gb_train, forest::rf_train, svm::svm_train, BaseConfigs,
    TrainedModel, MODEL_NAMES,
};
use crate::optim::Adam;
use crate::rng::{derive_seed, rng_from_seed};
use crate::{MedleyError, Result};

/// Relative improvement of the trailing 10-epoch mean loss below which
/// training is considered converged.
const CONVERGENCE_REL_TOL: f64 = 1e-8;
/// Width of the trailing loss window used by the convergence monitor.
const CONVERGENCE_WINDOW: usize = 10;

/// Out-of-fold base-model predictions for a training split.
#[derive(Debug, Clone)]
pub struct MetaFeatures {
    /// One row per training instance, one column per base model, in roster
    /// order. Every value comes from models trained without that row's fold.
    pub values: Array2<f64>,
    /// Fold index per training instance.
    pub folds: Vec<usize>,
    /// Number of folds.
    pub k: usize,
    /// Folds whose training complement contained a single class, where the
    /// SVM column was filled with the base rate instead of a trained model.
    pub svm_fallback_folds: Vec<usize>,
}

impl MetaFeatures {
    /// Number of meta-feature columns (base models).
    pub fn n_models(&self) -> usize {
        self.values.ncols()
    }
}

/// Linear stacking meta-model with its optimizer state.
#[derive(Debug, Clone)]
pub struct MetaModel {
    /// One coefficient per base model, roster order.
    pub coefficients: Array1<f64>,
    /// Additive intercept.
    pub intercept: f64,
    /// Final Adam state (moments and step count) after training.
    pub adam: Adam,
    /// Base learning rate before annealing.
    pub learning_rate: f64,
    /// Annealing half-life in epochs; infinite disables annealing.
    pub half_life: f64,
}

impl MetaModel {
    /// Raw linear outputs (no clipping) for a matrix of base predictions.
    pub fn linear_outputs(&self, features: &Array2<f64>) -> Result<Array1<f64>> {
        if features.ncols() != self.coefficients.len() {
            return Err(MedleyError::Dimension {
                expected: self.coefficients.len(),
                got: features.ncols(),
            });
        }
        Ok(features.dot(&self.coefficients) + self.intercept)
    }
}

/// Per-epoch loss trace and convergence verdict from meta-model training.
#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    /// Meta-loss after each completed epoch.
    pub losses: Vec<f64>,
    /// Whether the windowed criterion fired before the epoch budget ran out.
    pub converged: bool,
    /// Epoch (1-based) at which the criterion fired.
    pub converged_epoch: Option<usize>,
}

/// Adam and annealing settings for meta-model training, plus the fold count
/// used when building meta-features.
#[derive(Debug, Clone)]
pub struct StackingConfig {
    /// Fold count for out-of-fold meta-features.
    pub k: usize,
    /// Base learning rate before annealing.
    pub learning_rate: f64,
    /// Maximum training epochs.
    pub epochs: usize,
    /// Annealing half-life: the step size at epoch `t` is
    /// `lr / (1 + t / half_life)`. Infinite disables annealing.
    pub half_life: f64,
}

impl Default for StackingConfig {
    fn default() -> Self {
        Self {
            k: 5,
            learning_rate: 0.05,
            epochs: 2000,
            half_life: 500.0,
        }
    }
}

impl StackingConfig {
    /// Checks the optimizer settings (the fold count is checked where folds
    /// are built).
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(MedleyError::invalid("learning rate must be finite and >= 0"));
        }
        if self.epochs == 0 {
            return Err(MedleyError::invalid("epochs must be positive"));
        }
        if !(self.half_life > 0.0) {
            return Err(MedleyError::invalid("half-life must be positive"));
        }
        Ok(())
    }
}

/// Assigns each of `n` rows to one of `k` folds by shuffled round-robin, so
/// fold sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(MedleyError::invalid("fold count must be at least 2"));
    }
    if n < k {
        return Err(MedleyError::invalid(format!(
            "cannot split {n} rows into {k} nonempty folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng_from_seed(derive_seed(seed, "stacking.folds")));
    let mut folds = vec![0usize; n];
    for (position, &row) in order.iter().enumerate() {
        folds[row] = position % k;
    }
    Ok(folds)
}

/// Builds out-of-fold meta-features: for each fold, all four base learners
/// are retrained on the remaining folds and predict only the held-out rows,
/// so no cell ever comes from a model that saw its own row.
///
/// A fold whose training complement contains a single class cannot train the
/// SVM; its SVM column is filled with that complement's base rate and the
/// fold is flagged.
pub fn oof_predictions(
    cfgs: &BaseConfigs,
    train: &Dataset,
    k: usize,
    seed: u64,
) -> Result<MetaFeatures> {
    let n = train.n_rows();
    let folds = fold_assignment(n, k, seed)?;
    let mut values = Array2::zeros((n, MODEL_NAMES.len()));
    let mut svm_fallback_folds = Vec::new();
    for fold in 0..k {
        let held: Vec<usize> = (0..n).filter(|&i| folds[i] == fold).collect();
        let rest: Vec<usize> = (0..n).filter(|&i| folds[i] != fold).collect();
        let sub = train.select_rows(&rest);
        let held_rows = train.features.select(Axis(0), &held);
        let fold_cfgs = cfgs.reseeded(seed, &format!("stacking.oof.fold{fold}"));

        let bnn = bnn_train(&sub, &fold_cfgs.bnn)?;
        let forest = rf_train(&sub, &fold_cfgs.forest)?;
        let gbm = gb_train(&sub, &fold_cfgs.gb)?;
        let columns = [
            bnn.predict_mean(&held_rows)?,
            forest.predict_proba(&held_rows)?,
            gbm.predict_proba(&held_rows)?,
            svm_column(&sub, &fold_cfgs, &held_rows, fold, &mut svm_fallback_folds)?,
        ];
        for (col, preds) in columns.iter().enumerate() {
            for (slot, &row) in held.iter().enumerate() {
                values[[row, col]] = preds[slot];
            }
        }
    }
    Ok(MetaFeatures {
        values,
        folds,
        k,
        svm_fallback_folds,
    })
}

fn svm_column(
    sub: &Dataset,
    cfgs: &BaseConfigs,
    held_rows: &Array2<f64>,
    fold: usize,
    fallback_folds: &mut Vec<usize>,
) -> Result<Array1<f64>> {
    let first = sub.target[0];
    if sub.target.iter().all(|&t| t == first) {
        fallback_folds.push(fold);
        let base_rate = f64::from(first);
        return Ok(Array1::from_elem(held_rows.nrows(), base_rate));
    }
    let svm = svm_train(sub, &cfgs.svm)?;
    svm.predict_proba(held_rows)
}

/// Unaveraged squared meta-loss `sum_i (y_i - prediction_i)^2`.
pub fn meta_loss(meta: &MetaModel, features: &Array2<f64>, y: &Array1<f64>) -> Result<f64> {
    if features.nrows() != y.len() {
        return Err(MedleyError::Dimension {
            expected: features.nrows(),
            got: y.len(),
        });
    }
    let predictions = meta.linear_outputs(features)?;
    Ok(predictions
        .iter()
        .zip(y.iter())
        .map(|(&p, &yi)| (yi - p) * (yi - p))
        .sum())
}

/// Per-instance mean of [`meta_loss`].
pub fn mean_meta_loss(meta: &MetaModel, features: &Array2<f64>, y: &Array1<f64>) -> Result<f64> {
    Ok(meta_loss(meta, features, y)? / features.nrows().max(1) as f64)
}

/// Value and gradient of the squared meta-loss in one pass, with parameters
/// laid out as `[coefficients.., intercept]`.
pub fn meta_loss_gradient(
    params: &[f64],
    features: &Array2<f64>,
    y: &Array1<f64>,
) -> (f64, Vec<f64>) {
    let n_models = params.len() - 1;
    let intercept = params[n_models];
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (row, &yi) in features.rows().into_iter().zip(y.iter()) {
        let mut prediction = intercept;
        for j in 0..n_models {
            prediction += params[j] * row[j];
        }
        let residual = yi - prediction;
        loss += residual * residual;
        for j in 0..n_models {
            grad[j] -= 2.0 * residual * row[j];
        }
        grad[n_models] -= 2.0 * residual;
    }
    (loss, grad)
}

/// Trains the linear meta-model from zero initialization by full-batch Adam
/// on the squared meta-loss, annealing the step size hyperbolically and
/// stopping early when the trailing-window mean loss stops improving.
pub fn meta_train(
    features: &Array2<f64>,
    y: &Array1<f64>,
    cfg: &StackingConfig,
) -> Result<(MetaModel, ConvergenceTrace)> {
    cfg.validate()?;
    if features.nrows() != y.len() {
        return Err(MedleyError::Dimension {
            expected: features.nrows(),
            got: y.len(),
        });
    }
    if features.nrows() == 0 {
        return Err(MedleyError::invalid("meta-training needs at least one row"));
    }
    let n_models = features.ncols();
    let mut params = vec![0.0; n_models + 1];
    let mut adam = Adam::new(params.len());
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut converged = false;
    let mut converged_epoch = None;

    for epoch in 0..cfg.epochs {
        let (_, grad) = meta_loss_gradient(&params, features, y);
        let lr = cfg.learning_rate / (1.0 + epoch as f64 / cfg.half_life);
        adam.step(&mut params, &grad, lr);
        let (loss, _) = meta_loss_gradient(&params, features, y);
        if !loss.is_finite() {
            return Err(MedleyError::numerical(format!(
                "meta-loss became non-finite at epoch {}",
                epoch + 1
            )));
        }
        losses.push(loss);
        if losses.len() >= 2 * CONVERGENCE_WINDOW {
            let t = losses.len();
            let current: f64 =
                losses[t - CONVERGENCE_WINDOW..].iter().sum::<f64>() / CONVERGENCE_WINDOW as f64;
            let previous: f64 = losses[t - 2 * CONVERGENCE_WINDOW..t - CONVERGENCE_WINDOW]
                .iter()
                .sum::<f64>()
                / CONVERGENCE_WINDOW as f64;
            let improvement = (previous - current) / previous.abs().max(f64::MIN_POSITIVE);
            if improvement < CONVERGENCE_REL_TOL {
                converged = true;
                converged_epoch = Some(epoch + 1);
                break;
            }
        }
    }

    let meta = MetaModel {
        coefficients: Array1::from(params[..n_models].to_vec()),
        intercept: params[n_models],
        adam,
        learning_rate: cfg.learning_rate,
        half_life: cfg.half_life,
    };
    let trace = ConvergenceTrace {
        losses,
        converged,
        converged_epoch,
    };
    Ok((meta, trace))
}

/// Stacked prediction: base-model probabilities fed through the meta linear
/// map, clipped to [0, 1].
pub fn stack_predict(
    meta: &MetaModel,
    models: &[TrainedModel],
    rows: &Array2<f64>,
) -> Result<Array1<f64>> {
    if models.len() != meta.coefficients.len() {
        return Err(MedleyError::Dimension {
            expected: meta.coefficients.len(),
            got: models.len(),
        });
    }
    let mut base = Array2::zeros((rows.nrows(), models.len()));
    for (col, model) in models.iter().enumerate() {
        let probs = model.predict_proba(rows)?;
        for (row, &p) in probs.iter().enumerate() {
            base[[row, col]] = p;
        }
    }
    let outputs = meta.linear_outputs(&base)?;
    Ok(outputs.mapv(|p| p.clamp(0.0, 1.0)))
}
