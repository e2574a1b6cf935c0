//! Feature integration: PCA extraction, histogram mutual information in
//! nats, information gain of extracted over original features, and a
//! permutation test for its significance.

use ndarray::{Array1, Array2, Axis};

use crate::dataset::Dataset;
use crate::learners::TrainedModel;
use crate::linalg::symmetric_eigen;
use crate::rng::{derive_seed_indexed, rng_from_seed};
use crate::{MedleyError, Result};

/// Principal-component transform fitted to a feature matrix.
#[derive(Debug, Clone)]
pub struct PcaTransform {
    /// One orthonormal direction per retained component, as columns
    /// (`n_features x q`). Each column's largest-magnitude entry is positive.
    pub components: Array2<f64>,
    /// Column means subtracted before projecting.
    pub means: Array1<f64>,
    /// Fraction of total variance carried by each retained component,
    /// nonincreasing and summing to at most one.
    pub explained_variance: Array1<f64>,
    /// Retained component count.
    pub q: usize,
}

impl PcaTransform {
    /// Projects rows onto the retained components.
    pub fn transform(&self, rows: &Array2<f64>) -> Result<Array2<f64>> {
        if rows.ncols() != self.means.len() {
            return Err(MedleyError::Dimension {
                expected: self.means.len(),
                got: rows.ncols(),
            });
        }
        let centered = rows - &self.means;
        Ok(centered.dot(&self.components))
    }

    /// Maps component scores back to the original feature space.
    pub fn inverse_transform(&self, scores: &Array2<f64>) -> Result<Array2<f64>> {
        if scores.ncols() != self.q {
            return Err(MedleyError::Dimension {
                expected: self.q,
                got: scores.ncols(),
            });
        }
        Ok(scores.dot(&self.components.t()) + &self.means)
    }

    /// Checks orthonormality of the directions and the shape of the
    /// explained-variance profile.
    pub fn validate(&self) -> Result<()> {
        let gram = self.components.t().dot(&self.components);
        for i in 0..self.q {
            for j in 0..self.q {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[[i, j]] - want).abs() > 1e-10 {
                    return Err(MedleyError::numerical(format!(
                        "components not orthonormal: gram[{i},{j}] = {}",
                        gram[[i, j]]
                    )));
                }
            }
        }
        let mut total = 0.0;
        for (i, &r) in self.explained_variance.iter().enumerate() {
            if i > 0 && r > self.explained_variance[i - 1] + 1e-12 {
                return Err(MedleyError::numerical(
                    "explained-variance ratios must be nonincreasing",
                ));
            }
            total += r;
        }
        if total > 1.0 + 1e-12 {
            return Err(MedleyError::numerical(
                "explained-variance ratios sum past one",
            ));
        }
        Ok(())
    }
}

/// Fits PCA on the sample covariance, retaining the top `q` directions with
/// a deterministic sign convention (largest-magnitude entry positive).
pub fn pca_fit(features: &Array2<f64>, q: usize) -> Result<PcaTransform> {
    let n = features.nrows();
    let d = features.ncols();
    if q < 1 || q > d {
        return Err(MedleyError::invalid(format!(
            "retained components must lie in 1..={d}, got {q}"
        )));
    }
    if n <= q {
        return Err(MedleyError::invalid(format!(
            "PCA needs more rows than retained components, got {n} rows for q={q}"
        )));
    }
    let means = features
        .mean_axis(Axis(0))
        .expect("nonempty feature matrix");
    let centered = features - &means;
    let covariance = centered.t().dot(&centered) / (n - 1) as f64;
    let (values, vectors) = symmetric_eigen(&covariance);

    let clamped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let mut explained = Array1::zeros(q);
    let mut components = Array2::zeros((d, q));
    for col in 0..q {
        if total > 0.0 {
            explained[col] = clamped[col] / total;
        }
        // Sign convention: make the largest-magnitude entry positive.
        let mut pivot = 0;
        for row in 1..d {
            if vectors[[row, col]].abs() > vectors[[pivot, col]].abs() {
                pivot = row;
            }
        }
        let flip = if vectors[[pivot, col]] < 0.0 { -1.0 } else { 1.0 };
        for row in 0..d {
            components[[row, col]] = flip * vectors[[row, col]];
        }
    }
    Ok(PcaTransform {
        components,
        means,
        explained_variance: explained,
        q,
    })
}

/// A mutual-information estimate in nats from the joint-histogram estimator.
#[derive(Debug, Clone)]
pub struct MiEstimate {
    /// Estimated mutual information, nats, clamped at zero.
    pub value: f64,
    /// Estimator family tag.
    pub estimator: &'static str,
    /// Bin counts actually used per axis (category counts for discrete
    /// variables).
    pub bins_used: (usize, usize),
    /// True when a below-zero raw estimate was clamped to zero.
    pub clamped: bool,
}

/// Maps a variable to bin indices: variables with at most `bins` distinct
/// values keep their natural categories, everything else is cut into `bins`
/// equal-width intervals.
fn discretize(values: &[f64], bins: usize) -> Result<(Vec<usize>, usize)> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() <= bins {
        let indices = values
            .iter()
            .map(|v| {
                distinct
                    .binary_search_by(|probe| probe.total_cmp(v))
                    .expect("value came from this list")
            })
            .collect();
        return Ok((indices, distinct.len()));
    }
    if bins < 2 {
        return Err(MedleyError::invalid(
            "continuous input needs at least 2 bins",
        ));
    }
    let min = distinct[0];
    let max = *distinct.last().expect("nonempty");
    let span = max - min;
    let indices = values
        .iter()
        .map(|&v| {
            let raw = ((v - min) / span * bins as f64).floor() as usize;
            raw.min(bins - 1)
        })
        .collect();
    Ok((indices, bins))
}

/// Histogram mutual information between two variables, in nats. Zero-count
/// cells contribute nothing; the cell terms are summed in a canonical sorted
/// order so the estimate is exactly symmetric in its arguments.
pub fn mutual_information(a: &[f64], b: &[f64], bins: usize) -> Result<MiEstimate> {
    if a.len() != b.len() {
        return Err(MedleyError::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 30 {
        return Err(MedleyError::invalid(format!(
            "mutual information needs at least 30 observations, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(MedleyError::invalid("inputs must be finite"));
    }
    let (ia, ka) = discretize(a, bins)?;
    let (ib, kb) = discretize(b, bins)?;
    let n = a.len();
    let mut joint = vec![0usize; ka * kb];
    let mut marginal_a = vec![0usize; ka];
    let mut marginal_b = vec![0usize; kb];
    for (&i, &j) in ia.iter().zip(ib.iter()) {
        joint[i * kb + j] += 1;
        marginal_a[i] += 1;
        marginal_b[j] += 1;
    }
    let nf = n as f64;
    let mut terms = Vec::new();
    for i in 0..ka {
        for j in 0..kb {
            let c = joint[i * kb + j];
            if c == 0 {
                continue;
            }
            let p = c as f64 / nf;
            terms.push(p * ((c as f64 * nf) / (marginal_a[i] as f64 * marginal_b[j] as f64)).ln());
        }
    }
    terms.sort_by(f64::total_cmp);
    let raw: f64 = terms.iter().sum();
    let clamped = raw < 0.0;
    Ok(MiEstimate {
        value: raw.max(0.0),
        estimator: "histogram",
        bins_used: (ka, kb),
        clamped,
    })
}

/// How a feature set is reduced to a single variable for set-level MI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetReduction {
    /// Maximum over per-feature MI with the target (original-feature mode).
    MaxPerFeature,
    /// Mean over per-feature MI with the target.
    MeanPerFeature,
    /// MI of the first principal score with the target (extracted mode).
    FirstPrincipalScore,
}

impl SetReduction {
    /// Stable lowercase tag for reports.
    pub fn as_str(self) -> &'static str {
        match self {
            SetReduction::MaxPerFeature => "max-per-feature",
            SetReduction::MeanPerFeature => "mean-per-feature",
            SetReduction::FirstPrincipalScore => "first-principal-score",
        }
    }
}

/// Set-level MI with the reduction mode recorded.
#[derive(Debug, Clone)]
pub struct FeatureSetMi {
    /// Reduced MI value in nats.
    pub value: f64,
    /// Reduction that produced it.
    pub reduction: SetReduction,
    /// Per-feature MI values (empty in principal-score mode).
    pub per_feature: Vec<f64>,
    /// Index of the maximizing feature in max mode.
    pub best_feature: Option<usize>,
}

/// MI between a feature set and the target under the given reduction.
pub fn feature_set_mi(
    features: &Array2<f64>,
    y: &[f64],
    bins: usize,
    reduction: SetReduction,
) -> Result<FeatureSetMi> {
    if features.nrows() != y.len() {
        return Err(MedleyError::Dimension {
            expected: features.nrows(),
            got: y.len(),
        });
    }
    match reduction {
        SetReduction::MaxPerFeature | SetReduction::MeanPerFeature => {
            let mut per_feature = Vec::with_capacity(features.ncols());
            for column in features.columns() {
                let mi = mutual_information(&column.to_vec(), y, bins)?;
                per_feature.push(mi.value);
            }
            let (value, best_feature) = match reduction {
                SetReduction::MaxPerFeature => {
                    let (idx, &best) = per_feature
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1))
                        .expect("at least one feature");
                    (best, Some(idx))
                }
                _ => (
                    per_feature.iter().sum::<f64>() / per_feature.len() as f64,
                    None,
                ),
            };
            Ok(FeatureSetMi {
                value,
                reduction,
                per_feature,
                best_feature,
            })
        }
        SetReduction::FirstPrincipalScore => {
            let pca = pca_fit(features, 1)?;
            let scores = pca.transform(features)?;
            let mi = mutual_information(&scores.column(0).to_vec(), y, bins)?;
            Ok(FeatureSetMi {
                value: mi.value,
                reduction,
                per_feature: Vec::new(),
                best_feature: None,
            })
        }
    }
}

/// Information gain of extracted over original features, optionally with a
/// permutation-test verdict.
#[derive(Debug, Clone)]
pub struct GainReport {
    /// Set-level MI of the original features (max per-feature reduction).
    pub i_original: f64,
    /// MI of the first principal score.
    pub i_extracted: f64,
    /// Exactly `i_extracted - i_original`.
    pub delta_i: f64,
    /// Permutation p-value, when a test was run.
    pub p_value: Option<f64>,
    /// True iff `p_value < 0.05`, when a test was run.
    pub significant: Option<bool>,
    /// Number of permutations behind `p_value` (0 when no test ran).
    pub permutations: usize,
}

/// Both MI terms of the gain for a fixed first-principal-score vector.
fn gain_terms(
    features: &Array2<f64>,
    first_score: &[f64],
    y: &[f64],
    bins: usize,
) -> Result<(f64, f64)> {
    let original = feature_set_mi(features, y, bins, SetReduction::MaxPerFeature)?;
    let extracted = mutual_information(first_score, y, bins)?;
    Ok((original.value, extracted.value))
}

/// Information gain `delta_i = I(extracted; y) - I(original; y)` with the
/// extracted variable being the first principal score of a q-component PCA.
pub fn information_gain(
    features: &Array2<f64>,
    y: &[f64],
    q: usize,
    bins: usize,
) -> Result<GainReport> {
    if features.nrows() != y.len() {
        return Err(MedleyError::Dimension {
            expected: features.nrows(),
            got: y.len(),
        });
    }
    let pca = pca_fit(features, q)?;
    let scores = pca.transform(features)?;
    let first = scores.column(0).to_vec();
    let (i_original, i_extracted) = gain_terms(features, &first, y, bins)?;
    Ok(GainReport {
        i_original,
        i_extracted,
        delta_i: i_extracted - i_original,
        p_value: None,
        significant: None,
        permutations: 0,
    })
}

/// Permutation test for the information gain: `y` is permuted `b` times and
/// the gain recomputed; `p = (1 + #{permuted gain >= observed}) / (b + 1)`.
pub fn permutation_test(
    features: &Array2<f64>,
    y: &[f64],
    q: usize,
    bins: usize,
    b: usize,
    seed: u64,
) -> Result<GainReport> {
    if b < 99 {
        return Err(MedleyError::invalid(format!(
            "permutation test needs at least 99 permutations, got {b}"
        )));
    }
    let mut report = information_gain(features, y, q, bins)?;
    let pca = pca_fit(features, q)?;
    let scores = pca.transform(features)?;
    let first = scores.column(0).to_vec();

    use rand::seq::SliceRandom;
    let mut at_least_as_large = 0usize;
    for index in 0..b {
        let mut permuted = y.to_vec();
        let mut rng = rng_from_seed(derive_seed_indexed(
            seed,
            "feature_integration.permutation",
            index as u64,
        ));
        permuted.shuffle(&mut rng);
        let (orig, extr) = gain_terms(features, &first, &permuted, bins)?;
        if extr - orig >= report.delta_i {
            at_least_as_large += 1;
        }
    }
    let p = (1 + at_least_as_large) as f64 / (b + 1) as f64;
    report.p_value = Some(p);
    report.significant = Some(p < 0.05);
    report.permutations = b;
    Ok(report)
}

/// MI between a trained model's probability outputs and the target: the
/// per-model "extracted variable" variant reported alongside the feature
/// modes.
pub fn model_score_mi(model: &TrainedModel, data: &Dataset, bins: usize) -> Result<MiEstimate> {
    let probs = model.predict_proba(&data.features)?;
    let y = data.target_f64();
    mutual_information(
        probs.as_slice().unwrap_or(&probs.to_vec()),
        y.as_slice().unwrap_or(&y.to_vec()),
        bins,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const LN_2: f64 = std::f64::consts::LN_2;

    #[test]
    fn pca_recovers_the_diagonal_line() {
        let features = Array2::from_shape_fn((50, 2), |(i, _)| i as f64 / 10.0);
        let pca = pca_fit(&features, 1).unwrap();
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((pca.components[[0, 0]] - inv_sqrt2).abs() < 1e-9);
        assert!((pca.components[[1, 0]] - inv_sqrt2).abs() < 1e-9);
        assert!((pca.explained_variance[0] - 1.0).abs() < 1e-9);
        pca.validate().unwrap();
    }

    #[test]
    fn full_rank_pca_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let features = Array2::from_shape_fn((40, 5), |_| rng.gen_range(-2.0..2.0));
        let pca = pca_fit(&features, 5).unwrap();
        pca.validate().unwrap();
        let scores = pca.transform(&features).unwrap();
        let back = pca.inverse_transform(&scores).unwrap();
        let worst = features
            .iter()
            .zip(back.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "reconstruction error {worst}");
    }

    #[test]
    fn isotropic_cloud_splits_variance_evenly() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let normal: Normal<f64> = Normal::new(0.0, 1.0).unwrap();
            let features = Array2::from_shape_fn((4000, 3), |_| normal.sample(&mut rng));
            let pca = pca_fit(&features, 3).unwrap();
            for &ratio in pca.explained_variance.iter() {
                assert!(
                    (ratio - 1.0 / 3.0).abs() < 0.04,
                    "seed {seed}: ratio {ratio}"
                );
            }
        }
    }

    #[test]
    fn pca_rejects_bad_arguments() {
        let features = Array2::zeros((10, 3));
        assert!(pca_fit(&features, 0).is_err());
        assert!(pca_fit(&features, 4).is_err());
        let tiny = Array2::zeros((3, 3));
        assert!(pca_fit(&tiny, 3).is_err());
    }

    #[test]
    fn identical_fair_coin_has_ln2_information() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..10_000).map(|_| f64::from(rng.gen_bool(0.5))).collect();
        let mi = mutual_information(&a, &a, 8).unwrap();
        assert!((mi.value - LN_2).abs() < 0.01, "MI {}", mi.value);
        assert_eq!(mi.bins_used, (2, 2));
        assert!(!mi.clamped);
    }

    #[test]
    fn independent_fair_coins_have_no_information() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a: Vec<f64> = (0..10_000).map(|_| f64::from(rng.gen_bool(0.5))).collect();
        let b: Vec<f64> = (0..10_000).map(|_| f64::from(rng.gen_bool(0.5))).collect();
        let mi = mutual_information(&a, &b, 8).unwrap();
        assert!(mi.value < 0.01, "MI {}", mi.value);
    }

    #[test]
    fn continuous_self_information_is_binned_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mi = mutual_information(&a, &a, 8).unwrap();
        let (indices, k) = discretize(&a, 8).unwrap();
        let mut counts = vec![0usize; k];
        for i in indices {
            counts[i] += 1;
        }
        let n = a.len() as f64;
        let entropy: f64 = counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum();
        assert!((mi.value - entropy).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_is_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: Vec<f64> = (0..300).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|&x| x + 0.3 * rng.gen_range(-1.0..1.0))
            .collect();
        let ab = mutual_information(&a, &b, 8).unwrap();
        let ba = mutual_information(&b, &a, 8).unwrap();
        assert_eq!(ab.value.to_bits(), ba.value.to_bits());
    }

    #[test]
    fn mutual_information_validates_inputs() {
        let a = vec![0.0; 29];
        assert!(mutual_information(&a, &a, 8).is_err());
        let a = vec![0.0; 30];
        let b = vec![0.0; 31];
        assert!(mutual_information(&a, &b, 8).is_err());
        let continuous: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert!(mutual_information(&continuous, &continuous, 1).is_err());
        let with_nan: Vec<f64> = (0..40)
            .map(|i| if i == 7 { f64::NAN } else { i as f64 })
            .collect();
        let other: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert!(mutual_information(&with_nan, &other, 8).is_err());
    }

    #[test]
    fn median_threshold_target_carries_bernoulli_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // Slight bias toward -1 keeps the sample median at -1 (or 0), so the
        // median threshold always produces a near-balanced binary target.
        let x1: Vec<f64> = (0..10_000)
            .map(|_| if rng.gen_bool(0.48) { 1.0 } else { -1.0 })
            .collect();
        let noise: Vec<f64> = (0..10_000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let median = crate::stats::median(&x1);
        let y: Vec<f64> = x1.iter().map(|&v| f64::from(v > median)).collect();
        assert!(
            y.iter().any(|&v| v == 1.0) && y.iter().any(|&v| v == 0.0),
            "degenerate split for this seed"
        );
        let mut features = Array2::zeros((10_000, 2));
        for i in 0..10_000 {
            features[[i, 0]] = x1[i];
            features[[i, 1]] = noise[i];
        }
        let set = feature_set_mi(&features, &y, 8, SetReduction::MaxPerFeature).unwrap();
        assert_eq!(set.best_feature, Some(0));
        assert!((set.value - LN_2).abs() < 0.01, "MI {}", set.value);
        assert!(set.per_feature[1] < 0.01);
    }

    #[test]
    fn pure_noise_feature_does_not_raise_the_max() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            let n = 400;
            let x1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = x1.iter().map(|&v| f64::from(v > 0.0)).collect();
            let noise1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let noise2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut narrow = Array2::zeros((n, 2));
            let mut wide = Array2::zeros((n, 3));
            for i in 0..n {
                narrow[[i, 0]] = x1[i];
                narrow[[i, 1]] = noise1[i];
                wide[[i, 0]] = x1[i];
                wide[[i, 1]] = noise1[i];
                wide[[i, 2]] = noise2[i];
            }
            let a = feature_set_mi(&narrow, &y, 8, SetReduction::MaxPerFeature).unwrap();
            let b = feature_set_mi(&wide, &y, 8, SetReduction::MaxPerFeature).unwrap();
            assert_eq!(a.value, b.value, "seed {seed}");
            assert_eq!(b.best_feature, Some(0));
        }
    }

    #[test]
    fn identity_extraction_has_zero_gain() {
        // One categorical feature: the first principal score is an affine
        // image of the feature, so binned MI is identical and the gain is 0.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let values: Vec<f64> = (0..200).map(|_| f64::from(rng.gen_range(0..3u8))).collect();
        let y: Vec<f64> = values
            .iter()
            .map(|&v| f64::from(v > 0.5) * f64::from(rng.gen_bool(0.9)))
            .collect();
        let features =
            Array2::from_shape_vec((200, 1), values).expect("shape matches");
        let report = information_gain(&features, &y, 1, 8).unwrap();
        assert_eq!(report.delta_i, 0.0, "gain {}", report.delta_i);
        assert_eq!(report.p_value, None);
        assert_eq!(report.permutations, 0);
    }

    /// Independent brute-force MI used to cross-check the estimator: string
    /// keys and hash maps instead of flat index arithmetic.
    fn naive_mi(a: &[f64], b: &[f64], bins: usize) -> f64 {
        use std::collections::HashMap;
        let assign = |v: &[f64]| -> Vec<i64> {
            let mut sorted: Vec<f64> = v.to_vec();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            if sorted.len() <= bins {
                v.iter()
                    .map(|x| sorted.iter().position(|s| s == x).unwrap() as i64)
                    .collect()
            } else {
                let (lo, hi) = (sorted[0], *sorted.last().unwrap());
                v.iter()
                    .map(|&x| {
                        (((x - lo) / (hi - lo) * bins as f64).floor() as i64)
                            .min(bins as i64 - 1)
                    })
                    .collect()
            }
        };
        let ia = assign(a);
        let ib = assign(b);
        let mut joint: HashMap<(i64, i64), f64> = HashMap::new();
        let mut ma: HashMap<i64, f64> = HashMap::new();
        let mut mb: HashMap<i64, f64> = HashMap::new();
        let n = a.len() as f64;
        for (&i, &j) in ia.iter().zip(ib.iter()) {
            *joint.entry((i, j)).or_default() += 1.0 / n;
            *ma.entry(i).or_default() += 1.0 / n;
            *mb.entry(j).or_default() += 1.0 / n;
        }
        let mut terms: Vec<f64> = joint
            .iter()
            .map(|(&(i, j), &p)| p * (p / (ma[&i] * mb[&j])).ln())
            .collect();
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    }

    fn correlated_sum_problem(seed: u64, n: usize) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let shared = rng.gen_range(-1.0..1.0);
            let x1 = shared + 0.35 * rng.gen_range(-1.0..1.0);
            let x2 = shared + 0.35 * rng.gen_range(-1.0..1.0);
            features[[i, 0]] = x1;
            features[[i, 1]] = x2;
            y.push(f64::from(x1 + x2 > 0.0));
        }
        (features, y)
    }

    #[test]
    fn correlated_sum_yields_positive_gain_confirmed_by_naive_estimator() {
        let (features, y) = correlated_sum_problem(11, 2000);
        let report = information_gain(&features, &y, 2, 8).unwrap();
        assert!(report.delta_i > 0.0, "gain {}", report.delta_i);

        let pca = pca_fit(&features, 2).unwrap();
        let scores = pca.transform(&features).unwrap();
        let naive_extracted = naive_mi(&scores.column(0).to_vec(), &y, 8);
        let naive_original = (0..2)
            .map(|j| naive_mi(&features.column(j).to_vec(), &y, 8))
            .fold(f64::NEG_INFINITY, f64::max);
        let naive_gain = naive_extracted - naive_original;
        assert!(
            (report.delta_i - naive_gain).abs() < 1e-12,
            "estimators disagree: {} vs {naive_gain}",
            report.delta_i
        );
        assert!(naive_gain > 0.0);
    }

    #[test]
    fn permutation_test_rank_formula_and_determinism() {
        let (features, y) = correlated_sum_problem(12, 600);
        let first = permutation_test(&features, &y, 2, 8, 199, 77).unwrap();
        let second = permutation_test(&features, &y, 2, 8, 199, 77).unwrap();
        assert_eq!(first.p_value, second.p_value);
        let p = first.p_value.unwrap();
        assert!((1.0 / 200.0..=1.0).contains(&p));
        // The constructed signal dominates every permuted gain.
        assert_eq!(p, 1.0 / 200.0, "p-value {p}");
        assert_eq!(first.significant, Some(true));
        assert_eq!(first.permutations, 199);

        assert!(permutation_test(&features, &y, 2, 8, 98, 0).is_err());
    }

    #[test]
    fn null_labels_are_usually_insignificant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let features = Array2::from_shape_fn((150, 3), |_| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..150).map(|_| f64::from(rng.gen_bool(0.5))).collect();
        let report = permutation_test(&features, &y, 2, 8, 99, 21).unwrap();
        assert_eq!(report.significant, Some(report.p_value.unwrap() < 0.05));
        assert!(
            report.p_value.unwrap() > 0.05,
            "null p-value {}",
            report.p_value.unwrap()
        );
    }

    #[test]
    fn model_scores_carry_information_about_their_target() {
        use crate::learners::SvmModel;
        let n = 60;
        let features = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / n as f64);
        let target = Array1::from_shape_fn(n, |i| u8::from(i as f64 / n as f64 > 0.5));
        let data = Dataset::new(features, target, vec!["x".into()]).unwrap();
        let model = TrainedModel::Svm(SvmModel {
            alphas: vec![],
            labels: vec![],
            bias: -5.0,
            weights: Array1::from(vec![10.0]),
            c: 1.0,
            theta: 0.25,
            support: vec![],
            converged: true,
        });
        let mi = model_score_mi(&model, &data, 8).unwrap();
        assert!(mi.value > 0.5, "MI {}", mi.value);
    }
}
