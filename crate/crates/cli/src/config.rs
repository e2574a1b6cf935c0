//! Experiment configuration: a TOML file of optional sections, each falling
//! back to documented defaults, resolved into the core crate's config types.
//!
//! Unknown keys are rejected so typos surface as errors naming the offending
//! key path rather than silently running with defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use medley_core::dataset::SplitSpec;
use medley_core::ensemble::EnsembleConfig;
use medley_core::hyperopt::{Dimension, RestartPolicy, SearchSpace};
use medley_core::learners::{BaseConfigs, BnnConfig, ForestConfig, GbConfig, SvmConfig};
use medley_core::stacking::StackingConfig;

fn default_dataset_path() -> PathBuf {
    PathBuf::from("data/cleveland_synthetic.csv")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// CSV in the Cleveland layout: 13 feature columns + severity target.
    pub path: PathBuf,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            path: default_dataset_path(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BnnSection {
    pub hidden: usize,
    pub prior_std: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub n_mc: usize,
    pub elbo_samples: usize,
}

impl Default for BnnSection {
    fn default() -> Self {
        let d = BnnConfig::default();
        Self {
            hidden: d.hidden,
            prior_std: d.prior_std,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            n_mc: d.n_mc,
            elbo_samples: d.elbo_samples,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub trees: usize,
    pub max_depth: usize,
    pub m_try: usize,
}

impl Default for ForestSection {
    fn default() -> Self {
        // Shallower and wider than the library default: 181 training rows
        // overfit quickly at depth 6.
        Self {
            trees: 120,
            max_depth: 4,
            m_try: ForestConfig::default().m_try,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostingSection {
    pub iterations: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
}

impl Default for BoostingSection {
    fn default() -> Self {
        // Deeper trees and a larger step than the library default: the
        // line search tempers each stage anyway, and the depth-2 default
        // underfits this dataset's interaction structure.
        Self {
            iterations: 60,
            max_depth: 3,
            shrinkage: 0.3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSection {
    pub c: f64,
    pub theta: f64,
    pub tolerance: f64,
    pub max_passes: usize,
}

impl Default for SvmSection {
    fn default() -> Self {
        let d = SvmConfig::default();
        Self {
            c: d.c,
            theta: d.theta,
            tolerance: d.tolerance,
            max_passes: d.max_passes,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub alpha: f64,
    pub beta: f64,
    pub simplex: bool,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let d = EnsembleConfig::default();
        Self {
            alpha: d.alpha,
            beta: d.beta,
            simplex: d.simplex,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackingSection {
    pub folds: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub half_life: f64,
}

impl Default for StackingSection {
    fn default() -> Self {
        let d = StackingConfig::default();
        Self {
            folds: d.k,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            half_life: d.half_life,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiSection {
    /// Histogram bins for continuous variables.
    pub bins: usize,
    /// Principal components retained by the extraction step.
    pub components: usize,
    /// Permutations for the significance test.
    pub permutations: usize,
}

impl Default for MiSection {
    fn default() -> Self {
        Self {
            bins: 8,
            components: 3,
            permutations: 199,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    /// Disable to skip hyperparameter search entirely.
    pub enabled: bool,
    /// Total objective evaluations (including 3 initialization points).
    pub budget: usize,
    /// Observations between full kernel-hyperparameter refits.
    pub refit_every: usize,
    /// "adaptive" or "random".
    pub policy: String,
    /// Adaptive stall window (consecutive low-improvement iterations).
    pub window: usize,
    /// Adaptive relative-improvement threshold.
    pub threshold: f64,
}

impl Default for TuneSection {
    fn default() -> Self {
        Self {
            enabled: true,
            budget: 25,
            refit_every: 5,
            policy: "adaptive".into(),
            window: 5,
            threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestartBenchSection {
    pub trials: usize,
    /// Evaluation cap per trial before the run is flagged as capped.
    pub cap: usize,
    /// Monte-Carlo trials for the convergence-probability table.
    pub convergence_trials: usize,
}

impl Default for RestartBenchSection {
    fn default() -> Self {
        Self {
            trials: 100,
            cap: 20_000,
            convergence_trials: 200,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Seeded re-splits behind the per-model error bars.
    pub resplits: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self { resplits: 5 }
    }
}

/// The full experiment configuration, resolved from TOML plus CLI overrides.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub data: DataSection,
    pub split: SplitSection,
    pub bnn: BnnSection,
    pub forest: ForestSection,
    pub boosting: BoostingSection,
    pub svm: SvmSection,
    pub ensemble: EnsembleSection,
    pub stacking: StackingSection,
    pub mi: MiSection,
    pub tune: TuneSection,
    pub restart_bench: RestartBenchSection,
    pub report: ReportSection,
}

/// Default root seed when neither the config file nor --seed provides one.
pub const DEFAULT_SEED: u64 = 42;

impl ExperimentConfig {
    /// Loads a TOML config file; `None` yields the built-in defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let cfg: ExperimentConfig = toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?;
                Ok(cfg)
            }
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Checks everything that can be checked without running: value ranges
    /// and the existence of the dataset file.
    pub fn validate(&self) -> Result<()> {
        self.split_spec(0)?;
        if !self.data.path.exists() {
            bail!("data.path: dataset file {} does not exist", self.data.path.display());
        }
        if self.mi.bins < 2 {
            bail!("mi.bins: need at least 2 bins, got {}", self.mi.bins);
        }
        if self.mi.components < 1 {
            bail!("mi.components: need at least 1 component, got {}", self.mi.components);
        }
        if self.mi.permutations < 99 {
            bail!(
                "mi.permutations: need at least 99 permutations, got {}",
                self.mi.permutations
            );
        }
        if self.stacking.folds < 2 {
            bail!("stacking.folds: need at least 2 folds, got {}", self.stacking.folds);
        }
        if self.tune.enabled {
            if self.tune.budget < 3 {
                bail!("tune.budget: need at least 3 evaluations, got {}", self.tune.budget);
            }
            if self.tune.refit_every < 1 {
                bail!("tune.refit_every: must be at least 1");
            }
            self.restart_policy()?;
        }
        if self.report.resplits < 1 {
            bail!("report.resplits: need at least 1 re-split");
        }
        if self.restart_bench.trials < 2 {
            bail!("restart_bench.trials: need at least 2 trials");
        }
        if self.restart_bench.convergence_trials < 30 {
            bail!("restart_bench.convergence_trials: need at least 30 trials");
        }
        Ok(())
    }

    pub fn split_spec(&self, seed: u64) -> Result<SplitSpec> {
        SplitSpec::new(self.split.train, self.split.validation, self.split.test, seed)
            .map_err(|e| anyhow::anyhow!("split: {e}"))
    }

    /// Base-learner roster with seeds still unset; stages rederive seeds from
    /// the root seed and a stage label.
    pub fn base_configs(&self) -> BaseConfigs {
        BaseConfigs {
            bnn: BnnConfig {
                hidden: self.bnn.hidden,
                prior_std: self.bnn.prior_std,
                learning_rate: self.bnn.learning_rate,
                epochs: self.bnn.epochs,
                n_mc: self.bnn.n_mc,
                elbo_samples: self.bnn.elbo_samples,
                seed: 0,
            },
            forest: ForestConfig {
                n_trees: self.forest.trees,
                max_depth: self.forest.max_depth,
                m_try: self.forest.m_try,
                seed: 0,
            },
            gb: GbConfig {
                iterations: self.boosting.iterations,
                max_depth: self.boosting.max_depth,
                shrinkage: self.boosting.shrinkage,
                seed: 0,
            },
            svm: SvmConfig {
                c: self.svm.c,
                theta: self.svm.theta,
                tolerance: self.svm.tolerance,
                max_passes: self.svm.max_passes,
                seed: 0,
            },
        }
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            alpha: self.ensemble.alpha,
            beta: self.ensemble.beta,
            simplex: self.ensemble.simplex,
        }
    }

    pub fn stacking_config(&self) -> StackingConfig {
        StackingConfig {
            k: self.stacking.folds,
            learning_rate: self.stacking.learning_rate,
            epochs: self.stacking.epochs,
            half_life: self.stacking.half_life,
        }
    }

    pub fn restart_policy(&self) -> Result<RestartPolicy> {
        let policy = match self.tune.policy.as_str() {
            "random" => RestartPolicy::Random,
            "adaptive" => RestartPolicy::Adaptive {
                window: self.tune.window,
                threshold: self.tune.threshold,
            },
            other => bail!("tune.policy: expected \"adaptive\" or \"random\", got \"{other}\""),
        };
        policy
            .validate()
            .map_err(|e| anyhow::anyhow!("tune policy: {e}"))?;
        Ok(policy)
    }

    /// Hyperparameter search box: boosting shrinkage and depth, forest size,
    /// and the SVM slack penalty searched on a log10 scale.
    pub fn search_space(&self) -> Result<SearchSpace> {
        SearchSpace::new(vec![
            Dimension::continuous("gb_shrinkage", 0.01, 0.5),
            Dimension::integer("gb_depth", 1.0, 4.0),
            Dimension::integer("rf_trees", 10.0, 200.0),
            Dimension::continuous("log10_svm_c", -2.0, 2.0),
        ])
        .map_err(|e| anyhow::anyhow!("search space: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_are_valid_except_for_the_dataset_path_check() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.seed(), DEFAULT_SEED);
        assert_eq!(cfg.split.train, 0.6);
        assert_eq!(cfg.stacking.folds, 5);
        assert_eq!(cfg.mi.permutations, 199);
        assert!(cfg.tune.enabled);
        // Everything except the file-existence check must pass.
        cfg.split_spec(0).unwrap();
        cfg.restart_policy().unwrap();
        cfg.search_space().unwrap();
    }

    #[test]
    fn toml_overrides_merge_with_defaults() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            "seed = 7\n[forest]\ntrees = 25\n[tune]\nenabled = false"
        )
        .unwrap();
        let cfg = ExperimentConfig::load(Some(file.path())).unwrap();
        assert_eq!(cfg.seed(), 7);
        assert_eq!(cfg.forest.trees, 25);
        assert!(!cfg.tune.enabled);
        // Untouched sections keep their defaults.
        assert_eq!(cfg.boosting.iterations, BoostingSection::default().iterations);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "[forest]\ntreez = 25").unwrap();
        let err = ExperimentConfig::load(Some(file.path())).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("treez"), "error should name the bad key: {msg}");
    }

    #[test]
    fn invalid_values_name_the_offending_key() {
        let mut cfg = ExperimentConfig::default();
        cfg.data.path = PathBuf::from("/definitely/not/here.csv");
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("data.path"));

        let mut cfg = ExperimentConfig::default();
        cfg.mi.permutations = 10;
        cfg.data.path = PathBuf::from("Cargo.toml"); // exists
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("mi.permutations"));

        let mut cfg = ExperimentConfig::default();
        cfg.tune.policy = "sometimes".into();
        let err = cfg.restart_policy().unwrap_err();
        assert!(err.to_string().contains("tune.policy"));
    }

    #[test]
    fn search_space_has_the_four_tuned_dimensions() {
        let cfg = ExperimentConfig::default();
        let space = cfg.search_space().unwrap();
        assert_eq!(
            space.names(),
            vec!["gb_shrinkage", "gb_depth", "rf_trees", "log10_svm_c"]
        );
    }
}
