//! The four base learners (variational Bayesian network, random forest,
//! gradient boosting, linear SVM) behind one prediction interface, plus a
//! versioned plain-text model format so later pipeline stages can reload
//! trained models exactly.

pub mod bnn;
pub mod boosting;
pub mod forest;
pub mod svm;

use ndarray::{Array1, Array2};

use crate::error::MedleyError;
use crate::Result;

pub use bnn::{BnnConfig, BnnModel, PredictiveSample, UncertaintyReport};
pub use boosting::{GbConfig, GbmModel};
pub use forest::{ForestConfig, ForestModel};
pub use svm::{SvmConfig, SvmModel};

/// Any trained base learner. Predictions are class-1 probabilities.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Bnn(BnnModel),
    Forest(ForestModel),
    Gbm(GbmModel),
    Svm(SvmModel),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Bnn(_) => "bnn",
            TrainedModel::Forest(_) => "forest",
            TrainedModel::Gbm(_) => "gbm",
            TrainedModel::Svm(_) => "svm",
        }
    }

    /// Class-1 probability for each row. Rows must already carry the
    /// training standardization.
    pub fn predict_proba(&self, rows: &Array2<f64>) -> Result<Array1<f64>> {
        match self {
            TrainedModel::Bnn(m) => m.predict_mean(rows),
            TrainedModel::Forest(m) => m.predict_proba(rows),
            TrainedModel::Gbm(m) => m.predict_proba(rows),
            TrainedModel::Svm(m) => m.predict_proba(rows),
        }
    }

    /// Serialize to the `medley-model v1` plain-text format. Floats are
    /// written with shortest-round-trip precision, so reloading reproduces
    /// predictions bit for bit.
    pub fn to_text(&self) -> String {
        let mut out = String::from("medley-model v1\n");
        out.push_str(&format!("kind {}\n", self.kind()));
        match self {
            TrainedModel::Bnn(m) => m.write_text(&mut out),
            TrainedModel::Forest(m) => m.write_text(&mut out),
            TrainedModel::Gbm(m) => m.write_text(&mut out),
            TrainedModel::Svm(m) => m.write_text(&mut out),
        }
        out
    }

    /// Parse the `medley-model v1` format.
    pub fn from_text(text: &str) -> Result<TrainedModel> {
        let mut r = TextReader::new(text);
        let (line_no, header) = r
            .next_nonempty()
            .ok_or_else(|| MedleyError::invalid("empty model file"))?;
        if header.trim() != "medley-model v1" {
            return Err(MedleyError::parse(line_no, "expected header 'medley-model v1'"));
        }
        let kind_tokens = r.expect_key("kind")?;
        match kind_tokens.one()? {
            "bnn" => Ok(TrainedModel::Bnn(BnnModel::parse_text(&mut r)?)),
            "forest" => Ok(TrainedModel::Forest(ForestModel::parse_text(&mut r)?)),
            "gbm" => Ok(TrainedModel::Gbm(GbmModel::parse_text(&mut r)?)),
            "svm" => Ok(TrainedModel::Svm(SvmModel::parse_text(&mut r)?)),
            other => Err(MedleyError::invalid(format!("unknown model kind {:?}", other))),
        }
    }
}

/// Canonical roster order used wherever the four base models are listed
/// together (reports, risk matrices, meta-features).
pub const MODEL_NAMES: [&str; 4] = ["bnn", "forest", "gbm", "svm"];

/// Configuration for the full base-learner roster, in canonical order.
#[derive(Debug, Clone, Default)]
pub struct BaseConfigs {
    pub bnn: BnnConfig,
    pub forest: ForestConfig,
    pub gb: GbConfig,
    pub svm: SvmConfig,
}

impl BaseConfigs {
    /// Copy of the roster with every learner seed rederived from `seed`
    /// under `label`, so repeated trainings (folds, re-splits) stay
    /// independent yet reproducible.
    pub fn reseeded(&self, seed: u64, label: &str) -> BaseConfigs {
        let mut cfgs = self.clone();
        cfgs.bnn.seed = crate::rng::derive_seed_indexed(seed, label, 0);
        cfgs.forest.seed = crate::rng::derive_seed_indexed(seed, label, 1);
        cfgs.gb.seed = crate::rng::derive_seed_indexed(seed, label, 2);
        cfgs.svm.seed = crate::rng::derive_seed_indexed(seed, label, 3);
        cfgs
    }
}

/// Trains all four base learners on `data`, returned in roster order.
pub fn train_base_models(data: &crate::dataset::Dataset, cfgs: &BaseConfigs) -> Result<Vec<TrainedModel>> {
    Ok(vec![
        TrainedModel::Bnn(bnn::bnn_train(data, &cfgs.bnn)?),
        TrainedModel::Forest(forest::rf_train(data, &cfgs.forest)?),
        TrainedModel::Gbm(boosting::gb_train(data, &cfgs.gb)?),
        TrainedModel::Svm(svm::svm_train(data, &cfgs.svm)?),
    ])
}

/// Threshold probabilities at 0.5 into class labels.
pub fn predict_labels(probs: &Array1<f64>) -> Array1<u8> {
    probs.mapv(|p| u8::from(p >= 0.5))
}

/// Fraction of rows whose thresholded prediction disagrees with the target.
pub fn classification_error(probs: &Array1<f64>, target: &Array1<u8>) -> f64 {
    assert_eq!(probs.len(), target.len());
    if probs.is_empty() {
        return 0.0;
    }
    let wrong = probs
        .iter()
        .zip(target.iter())
        .filter(|(&p, &t)| u8::from(p >= 0.5) != t)
        .count();
    wrong as f64 / probs.len() as f64
}

/// Line-oriented token reader for the plain-text model formats.
pub(crate) struct TextReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

pub(crate) struct TokenLine<'a> {
    pub line_no: usize,
    pub tokens: Vec<&'a str>,
}

impl<'a> TokenLine<'a> {
    pub fn one(&self) -> Result<&'a str> {
        if self.tokens.len() != 1 {
            return Err(MedleyError::parse(
                self.line_no,
                format!("expected one value, found {}", self.tokens.len()),
            ));
        }
        Ok(self.tokens[0])
    }

    pub fn one_f64(&self) -> Result<f64> {
        parse_f64(self.one()?, self.line_no)
    }

    pub fn one_usize(&self) -> Result<usize> {
        parse_usize(self.one()?, self.line_no)
    }

    pub fn one_u64(&self) -> Result<u64> {
        self.one()?
            .parse()
            .map_err(|_| MedleyError::parse(self.line_no, "expected unsigned integer"))
    }

    pub fn all_f64(&self) -> Result<Vec<f64>> {
        self.tokens.iter().map(|t| parse_f64(t, self.line_no)).collect()
    }

    pub fn all_usize(&self) -> Result<Vec<usize>> {
        self.tokens.iter().map(|t| parse_usize(t, self.line_no)).collect()
    }
}

pub(crate) fn parse_f64(tok: &str, line_no: usize) -> Result<f64> {
    tok.parse()
        .map_err(|_| MedleyError::parse(line_no, format!("expected number, found {:?}", tok)))
}

pub(crate) fn parse_usize(tok: &str, line_no: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| MedleyError::parse(line_no, format!("expected count, found {:?}", tok)))
}

impl<'a> TextReader<'a> {
    pub fn new(text: &'a str) -> TextReader<'a> {
        TextReader {
            lines: text.lines().enumerate(),
        }
    }

    pub fn next_nonempty(&mut self) -> Option<(usize, &'a str)> {
        for (idx, line) in self.lines.by_ref() {
            if !line.trim().is_empty() {
                return Some((idx + 1, line.trim()));
            }
        }
        None
    }

    /// Read the next non-empty line, require its first token to equal `key`,
    /// and return the remaining tokens.
    pub fn expect_key(&mut self, key: &str) -> Result<TokenLine<'a>> {
        let (line_no, line) = self
            .next_nonempty()
            .ok_or_else(|| MedleyError::invalid(format!("model file ended before field {:?}", key)))?;
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap();
        if head != key {
            return Err(MedleyError::parse(
                line_no,
                format!("expected field {:?}, found {:?}", key, head),
            ));
        }
        Ok(TokenLine {
            line_no,
            tokens: parts.collect(),
        })
    }
}
