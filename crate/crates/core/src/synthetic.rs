//! Seeded synthetic data generators: small controlled distributions for
//! tests and probes, plus a Cleveland-shaped sample table for running the
//! full pipeline when the original UCI file is not available.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::dataset::Dataset;
use crate::rng;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// True class-1 probability of the [`logistic_1d`] generator.
pub fn logistic_1d_prob(x: f64) -> f64 {
    sigmoid(2.5 * x)
}

/// One feature x ~ U(-2.5, 2.5), label ~ Bernoulli(sigmoid(2.5 x)).
pub fn logistic_1d(n: usize, seed: u64) -> Dataset {
    let mut r = rng::rng_from_seed(rng::derive_seed(seed, "synthetic.logistic_1d"));
    let mut features = Array2::<f64>::zeros((n, 1));
    let mut target = Array1::<u8>::zeros(n);
    for i in 0..n {
        let x = r.gen_range(-2.5..2.5);
        features[[i, 0]] = x;
        target[i] = u8::from(r.gen_range(0.0..1.0) < logistic_1d_prob(x));
    }
    Dataset::new(features, target, vec!["x".into()]).expect("consistent shapes")
}

/// Two features, linearly separable by u + v = 0 with margin 0.3 sqrt(2).
pub fn separable_2d(n: usize, seed: u64) -> Dataset {
    let mut r = rng::rng_from_seed(rng::derive_seed(seed, "synthetic.separable_2d"));
    let mut features = Array2::<f64>::zeros((n, 2));
    let mut target = Array1::<u8>::zeros(n);
    for i in 0..n {
        let u: f64 = r.gen_range(-1.0..1.0);
        let v: f64 = r.gen_range(-1.0..1.0);
        let label = u + v > 0.0;
        let shift = if label { 0.3 } else { -0.3 };
        features[[i, 0]] = u + shift;
        features[[i, 1]] = v + shift;
        target[i] = u8::from(label);
    }
    Dataset::new(features, target, vec!["u".into(), "v".into()]).expect("consistent shapes")
}

/// One feature x ~ U(0,1); label = x > 0.5 (noiseless threshold rule).
pub fn threshold_1d(n: usize, seed: u64) -> Dataset {
    let mut r = rng::rng_from_seed(rng::derive_seed(seed, "synthetic.threshold_1d"));
    let mut features = Array2::<f64>::zeros((n, 1));
    let mut target = Array1::<u8>::zeros(n);
    for i in 0..n {
        let x = r.gen_range(0.0..1.0);
        features[[i, 0]] = x;
        target[i] = u8::from(x > 0.5);
    }
    Dataset::new(features, target, vec!["x".into()]).expect("consistent shapes")
}

/// First column decides the label (x0 > 0); the remaining `n_noise` columns
/// carry no signal.
pub fn one_informative(n: usize, n_noise: usize, seed: u64) -> Dataset {
    let mut r = rng::rng_from_seed(rng::derive_seed(seed, "synthetic.one_informative"));
    let cols = 1 + n_noise;
    let mut features = Array2::<f64>::zeros((n, cols));
    let mut target = Array1::<u8>::zeros(n);
    for i in 0..n {
        for c in 0..cols {
            features[[i, c]] = r.gen_range(-1.0..1.0);
        }
        target[i] = u8::from(features[[i, 0]] > 0.0);
    }
    let names = (0..cols).map(|c| format!("f{}", c)).collect();
    Dataset::new(features, target, names).expect("consistent shapes")
}

fn pick(r: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = r.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Generate a Cleveland-shaped table in the 14-column `?`-for-missing text
/// format: realistic marginals (right-skewed cholesterol concentrated in
/// 200-300 mg/dl), a logistic relationship between features and disease
/// status, and six rows with missing `ca`/`thal` entries, mirroring the
/// canonical file. Deterministic given the seed.
pub fn cleveland_like_csv(n: usize, seed: u64) -> String {
    let mut r = rng::rng_from_seed(rng::derive_seed(seed, "synthetic.cleveland"));
    let age_d: Normal<f64> = Normal::new(54.4, 9.0).unwrap();
    let bps_d: Normal<f64> = Normal::new(131.7, 17.5).unwrap();
    let chol_d: Gamma<f64> = Gamma::new(8.0, 15.0).unwrap(); // 126 + Gamma: mean 246, right-skewed
    let hr_d: Normal<f64> = Normal::new(149.6, 22.0).unwrap();
    let peak_d: Gamma<f64> = Gamma::new(2.0, 0.8).unwrap();

    struct Row {
        age: f64,
        sex: f64,
        cp: f64,
        trestbps: f64,
        chol: f64,
        fbs: f64,
        restecg: f64,
        thalach: f64,
        exang: f64,
        oldpeak: f64,
        slope: f64,
        ca: f64,
        thal: f64,
        num: u32,
    }

    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let age = age_d.sample(&mut r).clamp(29.0, 77.0).round();
        let sex = f64::from(u8::from(r.gen_range(0.0..1.0) < 0.68));
        let cp = (pick(&mut r, &[0.08, 0.17, 0.28, 0.47]) + 1) as f64;
        let trestbps = bps_d.sample(&mut r).clamp(94.0, 200.0).round();
        let chol = (126.0 + chol_d.sample(&mut r)).clamp(126.0, 564.0).round();
        let fbs = f64::from(u8::from(r.gen_range(0.0..1.0) < 0.15));
        let restecg = [0.0, 1.0, 2.0][pick(&mut r, &[0.50, 0.01, 0.49])];
        let thalach = hr_d.sample(&mut r).clamp(71.0, 202.0).round();
        let exang = f64::from(u8::from(r.gen_range(0.0..1.0) < 0.33));
        let oldpeak = if r.gen_range(0.0..1.0) < 0.32 {
            0.0
        } else {
            (peak_d.sample(&mut r).clamp(0.0, 6.2) * 10.0).round() / 10.0
        };
        let slope = [1.0, 2.0, 3.0][pick(&mut r, &[0.47, 0.46, 0.07])];
        let ca = pick(&mut r, &[0.58, 0.21, 0.13, 0.08]) as f64;
        let thal = [3.0, 6.0, 7.0][pick(&mut r, &[0.55, 0.06, 0.39])];

        // Latent disease score: a linear clinical gradient plus threshold
        // and interaction effects, so margin learners and tree learners
        // each have structure the other family fits less naturally.
        let linear = 0.030 * (age - 54.4)
            + 0.85 * (sex - 0.68)
            + 0.62 * (cp - 3.15)
            + 0.010 * (trestbps - 131.7)
            + 0.0035 * (chol - 246.0)
            - 0.024 * (thalach - 149.6)
            + 0.80 * (exang - 0.33)
            + 0.58 * (oldpeak - 1.05)
            + 0.35 * (slope - 1.6)
            + 0.75 * (ca - 0.71)
            + 0.28 * (thal - 4.73);
        let ind = |flag: bool| if flag { 1.0 } else { 0.0 };
        let nonlinear = 1.00 * ind(cp >= 4.0)
            + 0.90 * ind(ca >= 2.0)
            + 0.80 * ind(thal >= 7.0 && oldpeak > 1.0)
            + 0.55 * (oldpeak - 1.05) * (slope - 1.6)
            - 0.70 * ind(thalach > 165.0)
            + 0.45 * ind(age > 60.0 && trestbps > 140.0);
        let score = 0.75 * linear + nonlinear;
        let p = sigmoid(3.2 * score - 2.55);
        let disease = r.gen_range(0.0..1.0) < p;
        let num = if disease {
            (pick(&mut r, &[0.40, 0.26, 0.25, 0.09]) + 1) as u32
        } else {
            0
        };
        rows.push(Row {
            age,
            sex,
            cp,
            trestbps,
            chol,
            fbs,
            restecg,
            thalach,
            exang,
            oldpeak,
            slope,
            ca,
            thal,
            num,
        });
    }

    // Blank out ca in four rows and thal in two, as in the canonical file.
    let mut missing_ca = Vec::new();
    let mut missing_thal = Vec::new();
    if n >= 12 {
        while missing_ca.len() < 4 {
            let i = r.gen_range(0..n);
            if !missing_ca.contains(&i) {
                missing_ca.push(i);
            }
        }
        while missing_thal.len() < 2 {
            let i = r.gen_range(0..n);
            if !missing_ca.contains(&i) && !missing_thal.contains(&i) {
                missing_thal.push(i);
            }
        }
    }

    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let ca = if missing_ca.contains(&i) {
            "?".to_string()
        } else {
            format!("{:.1}", row.ca)
        };
        let thal = if missing_thal.contains(&i) {
            "?".to_string()
        } else {
            format!("{:.1}", row.thal)
        };
        out.push_str(&format!(
            "{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{},{},{}\n",
            row.age,
            row.sex,
            row.cp,
            row.trestbps,
            row.chol,
            row.fbs,
            row.restecg,
            row.thalach,
            row.exang,
            row.oldpeak,
            row.slope,
            ca,
            thal,
            row.num
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_cleveland;

    #[test]
    fn generators_are_deterministic() {
        let a = logistic_1d(50, 9);
        let b = logistic_1d(50, 9);
        assert_eq!(a.features, b.features);
        assert_eq!(a.target, b.target);
        let c = logistic_1d(50, 10);
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn separable_data_is_separable() {
        let d = separable_2d(200, 3);
        for i in 0..200 {
            let s = d.features[[i, 0]] + d.features[[i, 1]];
            if d.target[i] == 1 {
                assert!(s > 0.0);
            } else {
                assert!(s < 0.0);
            }
        }
    }

    #[test]
    fn cleveland_like_parses_and_matches_marginals() {
        let csv = cleveland_like_csv(303, 7);
        assert!(csv.matches('?').count() == 6);
        let d = parse_cleveland(&csv).unwrap();
        assert_eq!(d.n_rows(), 303);
        assert_eq!(d.n_cols(), 13);
        // cholesterol mass concentrated in 200-300
        let chol = d.features.column(crate::dataset::CHOL_COLUMN);
        let in_band = chol.iter().filter(|&&c| (200.0..=300.0).contains(&c)).count();
        assert!(in_band as f64 > 0.5 * 303.0, "band count {}", in_band);
        // right skew: mean above median
        let xs: Vec<f64> = chol.to_vec();
        assert!(crate::stats::mean(&xs) > crate::stats::median(&xs));
        // both classes present with a sane base rate
        let pos: usize = d.target.iter().map(|&t| t as usize).sum();
        assert!(pos > 90 && pos < 210, "positives {}", pos);
    }
}
