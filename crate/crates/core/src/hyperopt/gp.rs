//! Gaussian-process surrogate with a squared-exponential kernel.
//!
//! Inputs live in the unit cube.  The prior mean is the sample mean of the
//! observed values, the noise variance is fixed and small, and the kernel
//! hyperparameters (length-scale, signal standard deviation) are selected by
//! maximizing the log marginal likelihood over a fixed 8x8 grid.  Factorization
//! failures escalate a diagonal jitter by decades before giving up.

use ndarray::{Array1, Array2};

use crate::error::MedleyError;
use crate::Result;
use crate::linalg;
use crate::stats;

/// Fixed observation-noise variance used by [`gp_fit`].
pub const DEFAULT_NOISE_VARIANCE: f64 = 1e-6;

/// Jitter escalation ladder: try a clean factorization first, then add
/// diagonal jitter growing by decades up to 1e-6.
const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Number of grid values per kernel hyperparameter.
const GRID_SIZE: usize = 8;
/// Length-scale grid bounds (log-spaced) in unit-cube units.
const LENGTH_SCALE_RANGE: (f64, f64) = (0.05, 2.0);
/// Signal-scale grid bounds as multiples of the observed value spread.
const SIGNAL_MULTIPLIER_RANGE: (f64, f64) = (0.25, 4.0);

/// A fitted Gaussian-process posterior over unit-cube inputs.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    inputs: Vec<Vec<f64>>,
    values: Vec<f64>,
    /// Constant prior mean: the sample mean of `values`.
    pub mean: f64,
    /// Squared-exponential length-scale in unit-cube units.
    pub length_scale: f64,
    /// Kernel signal variance (the prior variance at any point).
    pub signal_variance: f64,
    /// Fixed observation-noise variance.
    pub noise_variance: f64,
    /// Diagonal jitter that the factorization actually needed.
    pub jitter: f64,
    /// Cholesky factor of K + (noise + jitter) I.
    chol: Array2<f64>,
    /// Solution of (K + (noise + jitter) I) alpha = values - mean.
    alpha: Array1<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = hi / lo;
    (0..n)
        .map(|i| lo * ratio.powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn validate_observations(inputs: &[Vec<f64>], values: &[f64], min_count: usize) -> Result<()> {
    if inputs.len() != values.len() {
        return Err(MedleyError::Dimension {
            expected: inputs.len(),
            got: values.len(),
        });
    }
    if inputs.len() < min_count {
        return Err(MedleyError::InvalidInput(format!(
            "surrogate needs at least {min_count} observations, got {}",
            inputs.len()
        )));
    }
    let dim = inputs[0].len();
    if dim == 0 {
        return Err(MedleyError::InvalidInput(
            "surrogate inputs need at least one coordinate".into(),
        ));
    }
    for (i, x) in inputs.iter().enumerate() {
        if x.len() != dim {
            return Err(MedleyError::Dimension {
                expected: dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(MedleyError::InvalidInput(format!(
                "input {i} has non-finite coordinates"
            )));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MedleyError::InvalidInput(
            "observed values must be finite".into(),
        ));
    }
    Ok(())
}

impl GpSurrogate {
    /// Builds a posterior with explicitly chosen kernel hyperparameters,
    /// escalating jitter through the ladder until the factorization succeeds.
    pub fn with_hyperparameters(
        inputs: Vec<Vec<f64>>,
        values: Vec<f64>,
        length_scale: f64,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        validate_observations(&inputs, &values, 1)?;
        if !(length_scale > 0.0) || !(signal_variance > 0.0) || !(noise_variance >= 0.0) {
            return Err(MedleyError::InvalidInput(
                "kernel needs length_scale > 0, signal_variance > 0, noise_variance >= 0".into(),
            ));
        }
        let n = inputs.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let centered = Array1::from_iter(values.iter().map(|v| v - mean));
        let mut base = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let k = signal_variance
                    * (-squared_distance(&inputs[i], &inputs[j])
                        / (2.0 * length_scale * length_scale))
                        .exp();
                base[[i, j]] = k;
                base[[j, i]] = k;
            }
        }
        for &jitter in &JITTER_LADDER {
            let mut kernel = base.clone();
            for i in 0..n {
                kernel[[i, i]] += noise_variance + jitter;
            }
            if let Some(chol) = linalg::cholesky(&kernel) {
                let alpha = linalg::cholesky_solve(&chol, &centered);
                return Ok(Self {
                    inputs,
                    values,
                    mean,
                    length_scale,
                    signal_variance,
                    noise_variance,
                    jitter,
                    chol,
                    alpha,
                });
            }
        }
        Err(MedleyError::Numerical(format!(
            "kernel matrix is not positive definite even with jitter {:.0e}",
            JITTER_LADDER[JITTER_LADDER.len() - 1]
        )))
    }

    pub fn n_observations(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smallest observed value (the incumbent for minimization).
    pub fn best_observed(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.signal_variance
            * (-squared_distance(a, b) / (2.0 * self.length_scale * self.length_scale)).exp()
    }

    /// Posterior mean and *unclamped* variance at a unit-cube point.
    ///
    /// The variance is mathematically nonnegative; floating-point rounding can
    /// push it no lower than about -1e-12 before [`Self::posterior`] clamps.
    pub fn posterior_raw(&self, x: &[f64]) -> (f64, f64) {
        assert_eq!(x.len(), self.dim(), "query dimension mismatch");
        let k_star = Array1::from_iter(self.inputs.iter().map(|xi| self.kernel(xi, x)));
        let mu = self.mean + k_star.dot(&self.alpha);
        let v = linalg::forward_substitute(&self.chol, &k_star);
        let variance = self.signal_variance - v.dot(&v);
        (mu, variance)
    }

    /// Posterior mean and standard deviation at a unit-cube point.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let (mu, variance) = self.posterior_raw(x);
        (mu, variance.max(0.0).sqrt())
    }

    /// Log marginal likelihood of the observations under this posterior's
    /// hyperparameters.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.values.len() as f64;
        let centered = Array1::from_iter(self.values.iter().map(|v| v - self.mean));
        let log_det: f64 = (0..self.values.len())
            .map(|i| self.chol[[i, i]].ln())
            .sum();
        -0.5 * centered.dot(&self.alpha) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Adds one observation by rank-one extension of the Cholesky factor,
    /// keeping the kernel hyperparameters and jitter frozen.  The prior mean
    /// and alpha vector are recomputed from the extended factor, so the result
    /// matches a full refit at the same hyperparameters.
    pub fn extend(&self, x_new: Vec<f64>, f_new: f64) -> Result<Self> {
        if x_new.len() != self.dim() {
            return Err(MedleyError::Dimension {
                expected: self.dim(),
                got: x_new.len(),
            });
        }
        if !f_new.is_finite() || x_new.iter().any(|v| !v.is_finite()) {
            return Err(MedleyError::InvalidInput(
                "extension point must be finite".into(),
            ));
        }
        let k = Array1::from_iter(self.inputs.iter().map(|xi| self.kernel(xi, &x_new)));
        let kappa = self.signal_variance + self.noise_variance + self.jitter;
        let chol = linalg::cholesky_extend(&self.chol, &k, kappa).ok_or_else(|| {
            MedleyError::Numerical("rank-one Cholesky extension lost positive definiteness".into())
        })?;
        let mut inputs = self.inputs.clone();
        inputs.push(x_new);
        let mut values = self.values.clone();
        values.push(f_new);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let centered = Array1::from_iter(values.iter().map(|v| v - mean));
        let alpha = linalg::cholesky_solve(&chol, &centered);
        Ok(Self {
            inputs,
            values,
            mean,
            length_scale: self.length_scale,
            signal_variance: self.signal_variance,
            noise_variance: self.noise_variance,
            jitter: self.jitter,
            chol,
            alpha,
        })
    }
}

/// Fits a surrogate with the default noise variance.
pub fn gp_fit(inputs: &[Vec<f64>], values: &[f64]) -> Result<GpSurrogate> {
    gp_fit_with_noise(inputs, values, DEFAULT_NOISE_VARIANCE)
}

/// Fits a surrogate, selecting kernel hyperparameters by log marginal
/// likelihood over an 8x8 grid: length-scales log-spaced in [0.05, 2] and
/// signal standard deviations log-spaced in [0.25, 4] times the spread of the
/// observed values.  Needs at least two observations.  Ties keep the first
/// grid cell, so the scan is deterministic.
pub fn gp_fit_with_noise(
    inputs: &[Vec<f64>],
    values: &[f64],
    noise_variance: f64,
) -> Result<GpSurrogate> {
    validate_observations(inputs, values, 2)?;
    let spread = stats::population_std(values).max(1e-4);
    let length_scales = log_space(LENGTH_SCALE_RANGE.0, LENGTH_SCALE_RANGE.1, GRID_SIZE);
    let signal_stds: Vec<f64> = log_space(
        SIGNAL_MULTIPLIER_RANGE.0,
        SIGNAL_MULTIPLIER_RANGE.1,
        GRID_SIZE,
    )
    .into_iter()
    .map(|m| m * spread)
    .collect();

    let mut best: Option<(f64, GpSurrogate)> = None;
    let mut last_error = None;
    for &ls in &length_scales {
        for &sig in &signal_stds {
            match GpSurrogate::with_hyperparameters(
                inputs.to_vec(),
                values.to_vec(),
                ls,
                sig * sig,
                noise_variance,
            ) {
                Ok(gp) => {
                    let lml = gp.log_marginal_likelihood();
                    if best.as_ref().map_or(true, |(b, _)| lml > *b) {
                        best = Some((lml, gp));
                    }
                }
                Err(err) => last_error = Some(err),
            }
        }
    }
    match best {
        Some((_, gp)) => Ok(gp),
        None => Err(last_error.unwrap_or_else(|| {
            MedleyError::Numerical("no kernel hyperparameters produced a valid fit".into())
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_seed_indexed, rng_from_seed};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn smooth_observations(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let inputs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        let values = inputs
            .iter()
            .map(|x| (3.0 * x[0]).sin() + 0.5 * x[0])
            .collect();
        (inputs, values)
    }

    #[test]
    fn fit_requires_two_observations() {
        let err = gp_fit(&[vec![0.5]], &[1.0]).unwrap_err();
        assert!(err.to_string().contains("at least 2"));
    }

    #[test]
    fn posterior_matches_dense_solve_oracle() {
        // Independent oracle: solve (K + sigma^2 I) systems with the generic
        // dense solver and compare mean/variance at probe points.
        let (inputs, values) = smooth_observations(5);
        let ls = 0.4;
        let sig2 = 0.9;
        let noise = 1e-6;
        let gp = GpSurrogate::with_hyperparameters(
            inputs.clone(),
            values.clone(),
            ls,
            sig2,
            noise,
        )
        .unwrap();
        assert_eq!(gp.jitter, 0.0);

        let n = inputs.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut k = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let d = inputs[i][0] - inputs[j][0];
                k[[i, j]] = sig2 * (-d * d / (2.0 * ls * ls)).exp();
            }
            k[[i, i]] += noise;
        }
        let centered = Array1::from_iter(values.iter().map(|v| v - mean));
        let alpha = linalg::solve(&k, &centered).unwrap();

        for &q in &[0.0, 0.13, 0.5, 0.77, 1.0] {
            let k_star =
                Array1::from_iter(inputs.iter().map(|xi| {
                    let d = xi[0] - q;
                    sig2 * (-d * d / (2.0 * ls * ls)).exp()
                }));
            let mu_oracle = mean + k_star.dot(&alpha);
            let w = linalg::solve(&k, &k_star).unwrap();
            let var_oracle = sig2 - k_star.dot(&w);
            let (mu, var) = gp.posterior_raw(&[q]);
            assert!((mu - mu_oracle).abs() < 1e-10, "mean mismatch at {q}");
            assert!((var - var_oracle).abs() < 1e-10, "variance mismatch at {q}");
        }
    }

    #[test]
    fn posterior_interpolates_observations_when_noise_vanishes() {
        let (inputs, values) = smooth_observations(6);
        let gp = gp_fit_with_noise(&inputs, &values, 0.0).unwrap();
        for (x, &f) in inputs.iter().zip(&values) {
            let (mu, sigma) = gp.posterior(x);
            assert!(
                (mu - f).abs() < 1e-8,
                "posterior mean {mu} should interpolate {f}"
            );
            assert!(sigma < 1e-4, "posterior std {sigma} should collapse");
        }
    }

    #[test]
    fn posterior_reverts_to_prior_far_from_data() {
        let gp = GpSurrogate::with_hyperparameters(
            vec![vec![0.02], vec![0.05]],
            vec![0.4, 0.6],
            0.03,
            1.7,
            1e-6,
        )
        .unwrap();
        let (mu, var) = gp.posterior_raw(&[1.0]);
        assert!((mu - gp.mean).abs() < 1e-9);
        assert!((var - 1.7).abs() < 1e-6);
    }

    #[test]
    fn posterior_variance_never_dips_below_rounding_floor() {
        let (inputs, values) = smooth_observations(8);
        let gp = gp_fit(&inputs, &values).unwrap();
        for i in 0..=200 {
            let q = i as f64 / 200.0;
            let (_, var) = gp.posterior_raw(&[q]);
            assert!(var >= -1e-12, "raw variance {var} at {q}");
            let (_, sigma) = gp.posterior(&[q]);
            assert!(sigma >= 0.0);
        }
    }

    #[test]
    fn identical_points_with_equal_values_still_factorize() {
        let gp = gp_fit(&[vec![0.3, 0.3], vec![0.3, 0.3]], &[1.0, 1.0]).unwrap();
        assert_eq!(gp.n_observations(), 2);
        let (mu, sigma) = gp.posterior(&[0.3, 0.3]);
        assert!(mu.is_finite() && sigma.is_finite());
    }

    #[test]
    fn grid_recovers_generator_length_scale_cell() {
        // Sample from a GP prior with a known length-scale and check the
        // grid-selected length-scale lands in the grid cell containing it.
        let true_ls = 0.3;
        let n = 25;
        let inputs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        let mut cov = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let d = inputs[i][0] - inputs[j][0];
                cov[[i, j]] = (-d * d / (2.0 * true_ls * true_ls)).exp();
            }
            cov[[i, i]] += 1e-10;
        }
        let l = linalg::cholesky(&cov).unwrap();
        let grid = log_space(LENGTH_SCALE_RANGE.0, LENGTH_SCALE_RANGE.1, GRID_SIZE);
        let cell_lo = grid.iter().copied().filter(|&g| g <= true_ls).fold(0.0, f64::max);
        let cell_hi = grid
            .iter()
            .copied()
            .filter(|&g| g >= true_ls)
            .fold(f64::INFINITY, f64::min);
        for seed in 0..5u64 {
            let mut rng = rng_from_seed(derive_seed_indexed(11, "hyperopt.gp.sample", seed));
            let z = Array1::from_iter((0..n).map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            }));
            let values: Vec<f64> = l.dot(&z).to_vec();
            let gp = gp_fit(&inputs, &values).unwrap();
            assert!(
                gp.length_scale >= cell_lo - 1e-12 && gp.length_scale <= cell_hi + 1e-12,
                "seed {seed}: fitted {} outside cell [{cell_lo}, {cell_hi}]",
                gp.length_scale
            );
        }
    }

    #[test]
    fn incremental_extension_matches_full_refit() {
        let (inputs, values) = smooth_observations(7);
        let base = GpSurrogate::with_hyperparameters(
            inputs[..6].to_vec(),
            values[..6].to_vec(),
            0.35,
            1.2,
            1e-6,
        )
        .unwrap();
        let extended = base.extend(inputs[6].clone(), values[6]).unwrap();
        let full = GpSurrogate::with_hyperparameters(
            inputs.clone(),
            values.clone(),
            0.35,
            1.2,
            1e-6,
        )
        .unwrap();
        assert_eq!(full.jitter, extended.jitter);
        for i in 0..=40 {
            let q = [i as f64 / 40.0];
            let (mu_inc, sd_inc) = extended.posterior(&q);
            let (mu_full, sd_full) = full.posterior(&q);
            assert!((mu_inc - mu_full).abs() < 1e-8, "mean drift at {q:?}");
            assert!((sd_inc - sd_full).abs() < 1e-8, "std drift at {q:?}");
        }
    }

    #[test]
    fn extension_handles_near_duplicate_points_via_noise() {
        let base = GpSurrogate::with_hyperparameters(
            vec![vec![0.2], vec![0.8]],
            vec![1.0, 2.0],
            0.5,
            1.0,
            1e-6,
        )
        .unwrap();
        let extended = base.extend(vec![0.2], 1.0).unwrap();
        assert_eq!(extended.n_observations(), 3);
        let (mu, sigma) = extended.posterior(&[0.2]);
        assert!(mu.is_finite() && sigma.is_finite());
    }

    #[test]
    fn fit_is_deterministic() {
        let mut rng = rng_from_seed(42);
        let inputs: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.gen::<f64>()]).collect();
        let values: Vec<f64> = inputs.iter().map(|x| (x[0] - 0.4).powi(2)).collect();
        let a = gp_fit(&inputs, &values).unwrap();
        let b = gp_fit(&inputs, &values).unwrap();
        assert_eq!(a.length_scale.to_bits(), b.length_scale.to_bits());
        assert_eq!(a.signal_variance.to_bits(), b.signal_variance.to_bits());
        let (mu_a, sd_a) = a.posterior(&[0.33]);
        let (mu_b, sd_b) = b.posterior(&[0.33]);
        assert_eq!(mu_a.to_bits(), mu_b.to_bits());
        assert_eq!(sd_a.to_bits(), sd_b.to_bits());
    }
}
