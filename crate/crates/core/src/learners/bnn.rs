//! Mean-field variational Bayesian neural network: one tanh hidden layer,
//! Bernoulli likelihood, Gaussian prior, trained by maximizing the evidence
//! lower bound with reparameterized gradients. Prediction draws weight
//! samples from the fitted posterior; the sample spread yields the
//! epistemic/aleatoric decomposition and the output-density diagnostics.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::error::MedleyError;
use crate::optim::Adam;
use crate::rng;
use crate::Result;

use super::TextReader;

/// Standard deviations are floored at this value when sampling weights.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct BnnConfig {
    pub hidden: usize,
    pub prior_std: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Monte-Carlo samples used by mean prediction.
    pub n_mc: usize,
    /// Noise draws per epoch for the ELBO estimate.
    pub elbo_samples: usize,
    pub seed: u64,
}

impl Default for BnnConfig {
    fn default() -> Self {
        BnnConfig {
            hidden: 8,
            prior_std: 1.0,
            learning_rate: 0.01,
            epochs: 300,
            n_mc: 200,
            elbo_samples: 1,
            seed: 0,
        }
    }
}

/// Network shape plus prior; owns the ELBO math so tests can evaluate the
/// bound at arbitrary variational parameters.
#[derive(Debug, Clone, Copy)]
pub struct BnnArch {
    pub input_dim: usize,
    pub hidden: usize,
    pub prior_std: f64,
}

impl BnnArch {
    /// Total number of weights and biases: W1 (h x d), b1, W2, b2.
    pub fn n_params(&self) -> usize {
        self.hidden * self.input_dim + 2 * self.hidden + 1
    }

    fn w1(&self, i: usize, j: usize) -> usize {
        i * self.input_dim + j
    }

    fn b1(&self, i: usize) -> usize {
        self.hidden * self.input_dim + i
    }

    fn w2(&self, i: usize) -> usize {
        self.hidden * self.input_dim + self.hidden + i
    }

    fn b2(&self) -> usize {
        self.hidden * self.input_dim + 2 * self.hidden
    }

    /// Forward pass for one weight vector; returns class-1 probabilities.
    pub fn forward(&self, theta: &[f64], rows: &Array2<f64>) -> Array1<f64> {
        let n = rows.nrows();
        let mut out = Array1::<f64>::zeros(n);
        let mut a1 = vec![0.0; self.hidden];
        for r in 0..n {
            let z2 = self.forward_row(theta, rows, r, &mut a1);
            out[r] = sigmoid(z2);
        }
        out
    }

    /// Pre-sigmoid output for row `r`; fills `a1` with hidden activations.
    fn forward_row(&self, theta: &[f64], rows: &Array2<f64>, r: usize, a1: &mut [f64]) -> f64 {
        for i in 0..self.hidden {
            let mut z = theta[self.b1(i)];
            for j in 0..self.input_dim {
                z += theta[self.w1(i, j)] * rows[[r, j]];
            }
            a1[i] = z.tanh();
        }
        let mut z2 = theta[self.b2()];
        for i in 0..self.hidden {
            z2 += theta[self.w2(i)] * a1[i];
        }
        z2
    }

    /// Bernoulli log likelihood of the data under one weight vector, and its
    /// gradient with respect to the weights (added into `grad`).
    fn log_lik_grad(
        &self,
        theta: &[f64],
        x: &Array2<f64>,
        y: &Array1<f64>,
        grad: &mut [f64],
    ) -> f64 {
        let n = x.nrows();
        let mut a1 = vec![0.0; self.hidden];
        let mut ll = 0.0;
        for r in 0..n {
            let z2 = self.forward_row(theta, x, r, &mut a1);
            // log p = y log sigma(z) + (1-y) log(1-sigma(z)), in stable form
            ll += y[r] * -softplus(-z2) + (1.0 - y[r]) * -softplus(z2);
            let dz2 = y[r] - sigmoid(z2);
            grad[self.b2()] += dz2;
            for i in 0..self.hidden {
                grad[self.w2(i)] += dz2 * a1[i];
                let dz1 = dz2 * theta[self.w2(i)] * (1.0 - a1[i] * a1[i]);
                grad[self.b1(i)] += dz1;
                for j in 0..self.input_dim {
                    grad[self.w1(i, j)] += dz1 * x[[r, j]];
                }
            }
        }
        ll
    }

    fn kl(&self, mus: &[f64], log_stds: &[f64]) -> f64 {
        let sp = self.prior_std;
        let mut kl = 0.0;
        for i in 0..self.n_params() {
            let var = (2.0 * log_stds[i]).exp();
            kl += sp.ln() - log_stds[i] + (var + mus[i] * mus[i]) / (2.0 * sp * sp) - 0.5;
        }
        kl
    }

    /// ELBO estimate at (mus, log_stds) under the given fixed noise draws
    /// (one vector of standard normals per Monte-Carlo sample). Holding the
    /// noise fixed makes the bound a deterministic, differentiable function
    /// of the variational parameters.
    pub fn elbo_with_noise(
        &self,
        mus: &[f64],
        log_stds: &[f64],
        x: &Array2<f64>,
        y: &Array1<f64>,
        noise: &[Vec<f64>],
    ) -> f64 {
        self.elbo_grad_with_noise(mus, log_stds, x, y, noise).0
    }

    /// ELBO and its gradient with respect to (mus, log_stds) under fixed
    /// noise, via the reparameterization theta = mu + sigma * eps.
    pub fn elbo_grad_with_noise(
        &self,
        mus: &[f64],
        log_stds: &[f64],
        x: &Array2<f64>,
        y: &Array1<f64>,
        noise: &[Vec<f64>],
    ) -> (f64, Vec<f64>, Vec<f64>) {
        let k = self.n_params();
        assert_eq!(mus.len(), k);
        assert_eq!(log_stds.len(), k);
        let s_count = noise.len().max(1);
        let mut d_mu = vec![0.0; k];
        let mut d_ls = vec![0.0; k];
        let mut ll_mean = 0.0;
        let mut theta = vec![0.0; k];
        let mut dll = vec![0.0; k];
        for eps in noise {
            assert_eq!(eps.len(), k);
            for i in 0..k {
                let sigma = log_stds[i].exp().max(SIGMA_FLOOR);
                theta[i] = mus[i] + sigma * eps[i];
            }
            dll.iter_mut().for_each(|g| *g = 0.0);
            let ll = self.log_lik_grad(&theta, x, y, &mut dll);
            ll_mean += ll / s_count as f64;
            for i in 0..k {
                let raw_sigma = log_stds[i].exp();
                // the sampling floor zeroes d sigma / d log_std when active
                let dsig = if raw_sigma > SIGMA_FLOOR { raw_sigma } else { 0.0 };
                d_mu[i] += dll[i] / s_count as f64;
                d_ls[i] += dll[i] * eps[i] * dsig / s_count as f64;
            }
        }
        let sp2 = self.prior_std * self.prior_std;
        for i in 0..k {
            d_mu[i] -= mus[i] / sp2;
            d_ls[i] += 1.0 - (2.0 * log_stds[i]).exp() / sp2;
        }
        let elbo = ll_mean - self.kl(mus, log_stds);
        (elbo, d_mu, d_ls)
    }
}

/// Fitted variational posterior over the network weights.
#[derive(Debug, Clone)]
pub struct BnnModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub prior_std: f64,
    /// Per-weight posterior means.
    pub mus: Vec<f64>,
    /// Per-weight posterior log standard deviations.
    pub log_stds: Vec<f64>,
    /// Monte-Carlo samples used by [`BnnModel::predict_mean`].
    pub n_mc: usize,
    pub seed: u64,
    /// ELBO estimated at the final parameters.
    pub final_elbo: f64,
}

/// Class-1 probabilities for every row under one sampled weight vector.
#[derive(Debug, Clone)]
pub struct PredictiveSample {
    pub probs: Vec<f64>,
}

/// Per-row decomposition of predictive variance.
#[derive(Debug, Clone)]
pub struct UncertaintyReport {
    /// Variance of the class-1 probability across weight samples.
    pub epistemic: Vec<f64>,
    /// Mean Bernoulli variance p(1-p) across weight samples.
    pub aleatoric: Vec<f64>,
    /// Sum of the two (exactly, by construction).
    pub total: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Fit the variational posterior by Adam ascent on the ELBO.
pub fn bnn_train(data: &Dataset, cfg: &BnnConfig) -> Result<BnnModel> {
    if cfg.hidden == 0 {
        return Err(MedleyError::invalid("hidden size must be at least 1"));
    }
    if cfg.prior_std <= 0.0 {
        return Err(MedleyError::invalid("prior std must be positive"));
    }
    if cfg.n_mc == 0 || cfg.elbo_samples == 0 {
        return Err(MedleyError::invalid("sample counts must be at least 1"));
    }
    let arch = BnnArch {
        input_dim: data.n_cols(),
        hidden: cfg.hidden,
        prior_std: cfg.prior_std,
    };
    let k = arch.n_params();
    let x = &data.features;
    let y = data.target_f64();
    let mut r = rng::rng_from_seed(rng::derive_seed(cfg.seed, "bnn.train"));

    let mut mus = vec![0.0; k];
    let w1_scale = 0.3 / (arch.input_dim as f64).sqrt();
    let w2_scale = 0.3 / (arch.hidden as f64).sqrt();
    for i in 0..arch.hidden {
        for j in 0..arch.input_dim {
            let e: f64 = r.sample(StandardNormal);
            mus[arch.w1(i, j)] = w1_scale * e;
        }
    }
    for i in 0..arch.hidden {
        let e: f64 = r.sample(StandardNormal);
        mus[arch.w2(i)] = w2_scale * e;
    }
    let mut log_stds = vec![(0.05_f64).ln(); k];

    let mut params = mus.clone();
    params.extend_from_slice(&log_stds);
    let mut adam = Adam::new(2 * k);
    let draw_noise = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..cfg.elbo_samples)
            .map(|_| (0..k).map(|_| r.sample(StandardNormal)).collect())
            .collect()
    };

    for epoch in 0..cfg.epochs {
        let noise = draw_noise(&mut r);
        let (elbo, d_mu, d_ls) = arch.elbo_grad_with_noise(
            &params[..k],
            &params[k..],
            x,
            &y,
            &noise,
        );
        if !elbo.is_finite() {
            return Err(MedleyError::numerical(format!(
                "non-finite ELBO at epoch {}",
                epoch
            )));
        }
        // ascent: descend on the negated gradient
        let mut grad = Vec::with_capacity(2 * k);
        grad.extend(d_mu.iter().map(|g| -g));
        grad.extend(d_ls.iter().map(|g| -g));
        adam.step(&mut params, &grad, cfg.learning_rate);
    }
    mus.copy_from_slice(&params[..k]);
    log_stds.copy_from_slice(&params[k..]);
    let noise = draw_noise(&mut r);
    let final_elbo = arch.elbo_with_noise(&mus, &log_stds, x, &y, &noise);
    if !final_elbo.is_finite() {
        return Err(MedleyError::numerical(format!(
            "non-finite ELBO at epoch {}",
            cfg.epochs
        )));
    }
    Ok(BnnModel {
        input_dim: arch.input_dim,
        hidden: arch.hidden,
        prior_std: arch.prior_std,
        mus,
        log_stds,
        n_mc: cfg.n_mc,
        seed: cfg.seed,
        final_elbo,
    })
}

impl BnnModel {
    pub fn arch(&self) -> BnnArch {
        BnnArch {
            input_dim: self.input_dim,
            hidden: self.hidden,
            prior_std: self.prior_std,
        }
    }

    fn check_rows(&self, rows: &Array2<f64>) -> Result<()> {
        if rows.ncols() != self.input_dim {
            return Err(MedleyError::Dimension {
                expected: self.input_dim,
                got: rows.ncols(),
            });
        }
        Ok(())
    }

    /// Deterministic forward pass with every weight at its posterior mean.
    pub fn mean_forward(&self, rows: &Array2<f64>) -> Result<Array1<f64>> {
        self.check_rows(rows)?;
        Ok(self.arch().forward(&self.mus, rows))
    }

    /// Draw `n` weight vectors from the posterior and return one probability
    /// vector per draw. Seeded from the model's stored seed.
    pub fn predict_samples(&self, rows: &Array2<f64>, n: usize) -> Result<Vec<PredictiveSample>> {
        if n == 0 {
            return Err(MedleyError::invalid("need at least 1 predictive sample"));
        }
        self.check_rows(rows)?;
        let arch = self.arch();
        let k = arch.n_params();
        let mut r = rng::rng_from_seed(rng::derive_seed(self.seed, "bnn.predict"));
        let mut theta = vec![0.0; k];
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            for i in 0..k {
                let sigma = self.log_stds[i].exp().max(SIGMA_FLOOR);
                let e: f64 = r.sample(StandardNormal);
                theta[i] = self.mus[i] + sigma * e;
            }
            out.push(PredictiveSample {
                probs: arch.forward(&theta, rows).to_vec(),
            });
        }
        Ok(out)
    }

    /// Posterior predictive mean over `n_mc` weight samples.
    pub fn predict_mean(&self, rows: &Array2<f64>) -> Result<Array1<f64>> {
        let samples = self.predict_samples(rows, self.n_mc)?;
        let n = rows.nrows();
        let mut mean = Array1::<f64>::zeros(n);
        for s in &samples {
            for i in 0..n {
                mean[i] += s.probs[i];
            }
        }
        Ok(mean / samples.len() as f64)
    }

    /// Law-of-total-variance decomposition over `n >= 100` weight samples:
    /// epistemic = Var[p], aleatoric = E[p(1-p)], total = their sum.
    pub fn uncertainty(&self, rows: &Array2<f64>, n: usize) -> Result<UncertaintyReport> {
        if n < 100 {
            return Err(MedleyError::invalid(
                "uncertainty decomposition needs at least 100 samples",
            ));
        }
        let samples = self.predict_samples(rows, n)?;
        let n_rows = rows.nrows();
        let mut epistemic = Vec::with_capacity(n_rows);
        let mut aleatoric = Vec::with_capacity(n_rows);
        let mut total = Vec::with_capacity(n_rows);
        for row in 0..n_rows {
            let ps: Vec<f64> = samples.iter().map(|s| s.probs[row]).collect();
            let e = crate::stats::population_variance(&ps);
            let a = crate::stats::mean(&ps.iter().map(|p| p * (1.0 - p)).collect::<Vec<_>>());
            epistemic.push(e);
            aleatoric.push(a);
            total.push(e + a);
        }
        Ok(UncertaintyReport {
            epistemic,
            aleatoric,
            total,
        })
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        use std::fmt::Write as _;
        let _ = writeln!(out, "input_dim {}", self.input_dim);
        let _ = writeln!(out, "hidden {}", self.hidden);
        let _ = writeln!(out, "prior_std {}", self.prior_std);
        let _ = writeln!(out, "n_mc {}", self.n_mc);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "final_elbo {}", self.final_elbo);
        let _ = write!(out, "mus");
        for v in &self.mus {
            let _ = write!(out, " {}", v);
        }
        out.push('\n');
        let _ = write!(out, "log_stds");
        for v in &self.log_stds {
            let _ = write!(out, " {}", v);
        }
        out.push('\n');
    }

    pub(crate) fn parse_text(r: &mut TextReader) -> Result<BnnModel> {
        let input_dim = r.expect_key("input_dim")?.one_usize()?;
        let hidden = r.expect_key("hidden")?.one_usize()?;
        let prior_std = r.expect_key("prior_std")?.one_f64()?;
        let n_mc = r.expect_key("n_mc")?.one_usize()?;
        let seed = r.expect_key("seed")?.one_u64()?;
        let final_elbo = r.expect_key("final_elbo")?.one_f64()?;
        let mus_line = r.expect_key("mus")?;
        let mus = mus_line.all_f64()?;
        let ls_line = r.expect_key("log_stds")?;
        let log_stds = ls_line.all_f64()?;
        let arch = BnnArch {
            input_dim,
            hidden,
            prior_std,
        };
        if mus.len() != arch.n_params() || log_stds.len() != arch.n_params() {
            return Err(MedleyError::invalid("parameter count does not match shape"));
        }
        if log_stds.iter().any(|v| !v.is_finite()) {
            return Err(MedleyError::invalid("non-finite log std in model file"));
        }
        Ok(BnnModel {
            input_dim,
            hidden,
            prior_std,
            mus,
            log_stds,
            n_mc,
            seed,
            final_elbo,
        })
    }
}

/// Gaussian-kernel density estimate over predictive samples.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    /// True when the samples had zero spread (point mass).
    pub degenerate: bool,
}

/// KDE of one row's predictive samples on a 512-point grid over [0,1],
/// Silverman bandwidth, renormalized by trapezoid rule so the returned
/// density integrates to 1 despite boundary truncation.
pub fn bnn_output_density(samples: &[f64], grid_points: usize) -> Result<DensityEstimate> {
    if samples.len() < 10 {
        return Err(MedleyError::invalid("density estimate needs at least 10 samples"));
    }
    if grid_points < 2 {
        return Err(MedleyError::invalid("need at least 2 grid points"));
    }
    let n = samples.len() as f64;
    let sd = crate::stats::sample_variance(samples).sqrt();
    let iqr_scale = crate::stats::interquartile_range(samples) / 1.34;
    let mut scale = f64::INFINITY;
    if sd > 0.0 {
        scale = scale.min(sd);
    }
    if iqr_scale > 0.0 {
        scale = scale.min(iqr_scale);
    }
    let degenerate = !scale.is_finite();
    let bandwidth = if degenerate {
        1e-3
    } else {
        0.9 * scale * n.powf(-0.2)
    };
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| i as f64 / (grid_points - 1) as f64)
        .collect();
    let mut density: Vec<f64> = grid
        .iter()
        .map(|&g| {
            samples
                .iter()
                .map(|&x| crate::stats::normal_pdf((g - x) / bandwidth))
                .sum::<f64>()
                / (n * bandwidth)
        })
        .collect();
    let step = grid[1] - grid[0];
    let mut integral = 0.0;
    for i in 1..grid.len() {
        integral += 0.5 * (density[i - 1] + density[i]) * step;
    }
    if integral > 0.0 {
        for d in density.iter_mut() {
            *d /= integral;
        }
    }
    Ok(DensityEstimate {
        grid,
        density,
        bandwidth,
        degenerate,
    })
}

/// Result of the degeneracy check on predictive samples.
#[derive(Debug, Clone, Copy)]
pub struct KsCheck {
    pub statistic: f64,
    pub non_degenerate: bool,
}

/// One-sample Kolmogorov-Smirnov statistic of the empirical CDF against a
/// point mass at the sample mean (CDF value 1/2 exactly at the mean). The
/// samples count as non-degenerate when the statistic exceeds 0.05; exactly
/// constant samples are short-circuited to degenerate since their statistic
/// sits at the uninformative 0.5 boundary.
pub fn ks_degeneracy_check(samples: &[f64]) -> Result<KsCheck> {
    if samples.len() < 20 {
        return Err(MedleyError::invalid("degeneracy check needs at least 20 samples"));
    }
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = crate::stats::mean(samples);
    let point_cdf = |x: f64| -> f64 {
        if x < m {
            0.0
        } else if x > m {
            1.0
        } else {
            0.5
        }
    };
    let mut stat: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = point_cdf(x);
        let hi = (i + 1) as f64 / n as f64;
        let lo = i as f64 / n as f64;
        stat = stat.max((hi - f).abs()).max((lo - f).abs());
    }
    let variance = crate::stats::population_variance(samples);
    Ok(KsCheck {
        statistic: stat,
        non_degenerate: variance > 0.0 && stat > 0.05,
    })
}

/// One row of the epistemic-shrinkage table.
#[derive(Debug, Clone, Copy)]
pub struct ShrinkageRow {
    pub n_data: usize,
    pub mean_epistemic: f64,
    pub mean_aleatoric: f64,
}

/// For each dataset size, train fresh networks on freshly generated data and
/// record the mean epistemic and aleatoric variance over a fixed probe grid
/// spanning the generator's input range, averaged over `n_seeds` runs.
pub fn epistemic_shrinkage_probe(
    generate: &dyn Fn(usize, u64) -> Dataset,
    sizes: &[usize],
    n_seeds: usize,
    cfg: &BnnConfig,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<ShrinkageRow>> {
    if sizes.len() < 2 {
        return Err(MedleyError::invalid("need at least 2 sizes"));
    }
    if sizes.windows(2).any(|w| w[1] < w[0]) {
        return Err(MedleyError::invalid("sizes must be nondecreasing"));
    }
    if n_seeds == 0 {
        return Err(MedleyError::invalid("need at least 1 seed"));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    let mut run = 0u64;
    for &size in sizes {
        let mut epi_sum = 0.0;
        let mut alea_sum = 0.0;
        for _ in 0..n_seeds {
            let run_seed = rng::derive_seed_indexed(seed, "bnn.shrinkage", run);
            run += 1;
            let data = generate(size, run_seed);
            let (std_data, record) = crate::dataset::standardize(&data)?;
            let mut train_cfg = cfg.clone();
            train_cfg.seed = run_seed;
            let model = bnn_train(&std_data, &train_cfg)?;
            let n_cols = data.n_cols();
            let probe_n = 9;
            let mut probe = Array2::<f64>::zeros((probe_n, n_cols));
            for (i, mut row) in probe.rows_mut().into_iter().enumerate() {
                row[0] = -2.0 + 4.0 * i as f64 / (probe_n - 1) as f64;
            }
            let probe_std = record.apply(&probe)?;
            let unc = model.uncertainty(&probe_std, n_mc)?;
            epi_sum += crate::stats::mean(&unc.epistemic);
            alea_sum += crate::stats::mean(&unc.aleatoric);
        }
        rows.push(ShrinkageRow {
            n_data: size,
            mean_epistemic: epi_sum / n_seeds as f64,
            mean_aleatoric: alea_sum / n_seeds as f64,
        });
    }
    Ok(rows)
}
