//! The experiment pipeline: sequential stages from CSV ingestion through the
//! final report, each writing CSV/SVG/text artifacts into one output
//! directory that a MANIFEST accounts for.
//!
//! Stages only ever read earlier stages' results from memory — a subcommand
//! that needs trained models retrains them deterministically from the root
//! seed rather than deserializing artifacts, so every entry point produces
//! identical numbers for identical config and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use ndarray::{Array2, Axis};

use medley_core::dataset::{
    load_cleveland, split, Dataset, SplitIndices, StandardizeRecord,
};
use medley_core::ensemble::{
    combined_loss, diversity_score, ensemble_predict, optimize_weights, EnsembleConfig,
    EnsembleWeights, RiskMatrix,
};
use medley_core::feature_integration::{model_score_mi, permutation_test};
use medley_core::hyperopt::{
    basin_success_probability, bo_minimize_with, mc_convergence_probability, plateau_objective,
    restart_benchmark, two_basin_objective, BoResult, RestartPolicy, SearchSpace,
};
use medley_core::learners::boosting::gb_train;
use medley_core::learners::bnn::bnn_train;
use medley_core::learners::forest::rf_train;
use medley_core::learners::svm::svm_train;
use medley_core::learners::{classification_error, train_base_models, TrainedModel, MODEL_NAMES};
use medley_core::rng::{derive_seed, derive_seed_indexed};
use medley_core::stacking::{mean_meta_loss, meta_train, oof_predictions, stack_predict};

use crate::config::ExperimentConfig;
use crate::plot::render_plot;
use crate::report::{fmt_cell, fmt_f64, sha256_file, write_manifest, Table};

/// Names of the sequential stages, in run order.
pub const STAGES: [&str; 8] = [
    "ingest",
    "train",
    "ensemble",
    "stack",
    "mi",
    "tune",
    "restart-bench",
    "report",
];

/// The dataset after ingestion: split indices plus the three standardized
/// partitions. Standardization is fitted on the training rows only and the
/// same affine map is applied to validation and test.
pub struct Prepared {
    pub full: Dataset,
    pub splits: SplitIndices,
    pub record: StandardizeRecord,
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// One run's state: lazily computed prerequisites shared across stages.
pub struct Session {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub out: PathBuf,
    prepared: Option<Prepared>,
    models: Option<Vec<TrainedModel>>,
}

/// Splits and standardizes the configured dataset for the given split seed.
pub fn prepare_data(cfg: &ExperimentConfig, split_seed: u64) -> Result<Prepared> {
    let full = load_cleveland(&cfg.data.path)
        .with_context(|| format!("loading {}", cfg.data.path.display()))?;
    let spec = cfg.split_spec(split_seed)?;
    let splits = split(&full, &spec)?;
    let train_raw = full.select_rows(&splits.train);
    let record = StandardizeRecord::fit(&train_raw.features);
    let standardized = |idx: &[usize]| -> Result<Dataset> {
        let part = full.select_rows(idx);
        Ok(Dataset::new(
            record.apply(&part.features)?,
            part.target,
            part.feature_names,
        )?)
    };
    let train = standardized(&splits.train)?;
    let validation = standardized(&splits.val)?;
    let test = standardized(&splits.test)?;
    Ok(Prepared {
        full,
        splits,
        record,
        train,
        validation,
        test,
    })
}

/// Trains the four base learners on the standardized training rows with
/// seeds derived from `seed`.
pub fn train_models(cfg: &ExperimentConfig, prepared: &Prepared, seed: u64) -> Result<Vec<TrainedModel>> {
    let cfgs = cfg.base_configs().reseeded(seed, "train.base");
    Ok(train_base_models(&prepared.train, &cfgs)?)
}

fn model_names() -> Vec<String> {
    MODEL_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Risk estimation plus weight optimization on the validation split.
pub fn fit_ensemble(
    models: &[TrainedModel],
    validation: &Dataset,
    cfg: &EnsembleConfig,
) -> Result<(RiskMatrix, EnsembleWeights)> {
    let risk = RiskMatrix::estimate(&model_names(), models, validation)?;
    let weights = optimize_weights(&risk, cfg)?;
    Ok((risk, weights))
}

impl Session {
    pub fn new(cfg: ExperimentConfig, seed: u64, out: PathBuf) -> Self {
        Self {
            cfg,
            seed,
            out,
            prepared: None,
            models: None,
        }
    }

    fn ensure_prepared(&mut self) -> Result<()> {
        if self.prepared.is_none() {
            let split_seed = derive_seed(self.seed, "ingest.split");
            self.prepared = Some(prepare_data(&self.cfg, split_seed)?);
        }
        Ok(())
    }

    fn ensure_models(&mut self) -> Result<()> {
        self.ensure_prepared()?;
        if self.models.is_none() {
            let prepared = self.prepared.as_ref().expect("prepared above");
            let models = train_models(&self.cfg, prepared, self.seed)?;
            self.models = Some(models);
        }
        Ok(())
    }

    fn prepared(&self) -> &Prepared {
        self.prepared.as_ref().expect("ensure_prepared ran")
    }

    fn models(&self) -> &[TrainedModel] {
        self.models.as_deref().expect("ensure_models ran")
    }

    fn write_file(&self, rel: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn write_table(&self, rel: &str, table: &Table) -> Result<()> {
        self.write_file(rel, &table.to_csv())?;
        Ok(())
    }

    fn write_figure(&self, kind: &str, table: &Table) -> Result<()> {
        let svg = render_plot(kind, table)?;
        self.write_file(&format!("{kind}.svg"), &svg)?;
        Ok(())
    }

    /// Runs one named stage, writing that stage's artifacts.
    pub fn run_stage(&mut self, stage: &str) -> Result<()> {
        let result = match stage {
            "ingest" => self.stage_ingest(),
            "train" => self.stage_train(),
            "ensemble" => self.stage_ensemble(),
            "stack" => self.stage_stack(),
            "mi" => self.stage_mi(),
            "tune" => self.stage_tune(),
            "restart-bench" => self.stage_restart_bench(),
            "report" => self.stage_report(),
            other => Err(anyhow!(
                "unknown stage {other:?}: valid stages are {}",
                STAGES.join(", ")
            )),
        };
        result.with_context(|| format!("{stage} stage failed"))
    }

    /// Runs every stage in order, then writes run metadata and the MANIFEST.
    /// On a stage failure the partial output directory still gets a MANIFEST
    /// recording which stage failed before the error propagates.
    pub fn run_all(&mut self) -> Result<()> {
        let started = Instant::now();
        for stage in STAGES {
            if stage == "tune" && !self.cfg.tune.enabled {
                continue;
            }
            if let Err(err) = self.run_stage(stage) {
                let note = format!("{stage}: {}", root_message(&err));
                let _ = write_manifest(&self.out, Some(&note));
                return Err(err);
            }
        }
        if let Err(err) = self.write_metadata(started.elapsed().as_secs_f64()) {
            let note = format!("metadata: {}", root_message(&err));
            let _ = write_manifest(&self.out, Some(&note));
            return Err(err);
        }
        write_manifest(&self.out, None)?;
        Ok(())
    }

    // ----- ingest ---------------------------------------------------------

    fn stage_ingest(&mut self) -> Result<()> {
        self.ensure_prepared()?;
        let prepared = self.prepared();
        let mut summary = Table::new(vec!["split", "rows", "positive_rate"]);
        let rate = |d: &Dataset| {
            let n = d.n_rows().max(1);
            d.target.iter().map(|&t| f64::from(t)).sum::<f64>() / n as f64
        };
        let full = &prepared.full;
        for (name, rows, positive) in [
            ("full", full.n_rows(), rate(full)),
            (
                "train",
                prepared.splits.train.len(),
                rate(&full.select_rows(&prepared.splits.train)),
            ),
            (
                "validation",
                prepared.splits.val.len(),
                rate(&full.select_rows(&prepared.splits.val)),
            ),
            (
                "test",
                prepared.splits.test.len(),
                rate(&full.select_rows(&prepared.splits.test)),
            ),
        ] {
            summary.push_row(vec![name.to_string(), fmt_cell(rows), fmt_f64(positive)]);
        }
        let splits_text = prepared.splits.to_text();
        let record_text = prepared.record.to_text();
        self.write_file("splits.txt", &splits_text)?;
        self.write_file("standardize.txt", &record_text)?;
        self.write_table("ingest_summary.csv", &summary)?;
        Ok(())
    }

    // ----- train ----------------------------------------------------------

    fn stage_train(&mut self) -> Result<()> {
        self.ensure_models()?;
        let (prepared, models) = (self.prepared(), self.models());
        let mut errors = Table::new(vec!["model", "train_error", "validation_error", "test_error"]);
        let mut files: Vec<(String, String)> = Vec::new();
        for (name, model) in MODEL_NAMES.iter().zip(models) {
            let on = |d: &Dataset| -> Result<f64> {
                Ok(classification_error(
                    &model.predict_proba(&d.features)?,
                    &d.target,
                ))
            };
            errors.push_row(vec![
                name.to_string(),
                fmt_f64(on(&prepared.train)?),
                fmt_f64(on(&prepared.validation)?),
                fmt_f64(on(&prepared.test)?),
            ]);
            files.push((format!("models/{name}.txt"), model.to_text()));
        }
        for (rel, text) in files {
            self.write_file(&rel, &text)?;
        }
        self.write_table("train_errors.csv", &errors)?;
        Ok(())
    }

    // ----- ensemble -------------------------------------------------------

    fn stage_ensemble(&mut self) -> Result<()> {
        self.ensure_models()?;
        let (prepared, models) = (self.prepared(), self.models());
        let ens_cfg = self.cfg.ensemble_config();
        let (risk, weights) = fit_ensemble(models, &prepared.validation, &ens_cfg)?;

        let mut corr_cols: Vec<String> = vec!["model".into(), "error".into()];
        corr_cols.extend(MODEL_NAMES.iter().map(|n| format!("corr_{n}")));
        corr_cols.push("zero_variance".into());
        let mut risk_table = Table::new(corr_cols);
        for (i, name) in MODEL_NAMES.iter().enumerate() {
            let mut row = vec![name.to_string(), fmt_f64(risk.errors[i])];
            for j in 0..MODEL_NAMES.len() {
                row.push(fmt_f64(risk.correlations[[i, j]]));
            }
            row.push(risk.zero_variance[i].to_string());
            risk_table.push_row(row);
        }

        let mut weight_table = Table::new(vec!["model", "weight"]);
        for (name, &w) in MODEL_NAMES.iter().zip(weights.weights.iter()) {
            weight_table.push_row(vec![name.to_string(), fmt_f64(w)]);
        }

        let val_probs = ensemble_predict(models, &weights.weights, &prepared.validation.features)?;
        let test_probs = ensemble_predict(models, &weights.weights, &prepared.test.features)?;
        let mut summary = Table::new(vec!["key", "value"]);
        for (key, value) in [
            ("solver_path", weights.path.as_str().to_string()),
            (
                "hessian_positive_definite",
                weights.hessian_positive_definite.to_string(),
            ),
            ("lambda", fmt_f64(weights.lambda)),
            ("ensemble_risk", fmt_f64(weights.objective)),
            ("diversity", fmt_f64(diversity_score(&risk.correlations)?)),
            ("alpha", fmt_f64(ens_cfg.alpha)),
            ("beta", fmt_f64(ens_cfg.beta)),
            ("simplex", ens_cfg.simplex.to_string()),
            (
                "combined_loss",
                fmt_f64(combined_loss(&weights.weights, &risk, &ens_cfg)?),
            ),
            (
                "validation_error",
                fmt_f64(classification_error(&val_probs, &prepared.validation.target)),
            ),
            (
                "test_error",
                fmt_f64(classification_error(&test_probs, &prepared.test.target)),
            ),
        ] {
            summary.push_row(vec![key.to_string(), value]);
        }

        self.write_table("risk_matrix.csv", &risk_table)?;
        self.write_table("weights.csv", &weight_table)?;
        self.write_table("ensemble_summary.csv", &summary)?;
        Ok(())
    }

    // ----- stack ----------------------------------------------------------

    fn stage_stack(&mut self) -> Result<()> {
        self.ensure_models()?;
        let (prepared, models) = (self.prepared(), self.models());
        let stack_cfg = self.cfg.stacking_config();
        let cfgs = self.cfg.base_configs();
        let oof_seed = derive_seed(self.seed, "stack.oof");
        let meta = oof_predictions(&cfgs, &prepared.train, stack_cfg.k, oof_seed)?;
        let y = prepared.train.target_f64();
        let n = y.len() as f64;

        let mut fig2 = Table::new(vec![
            "meta_inputs",
            "final_mean_loss",
            "converged",
            "converged_epoch",
            "epochs_run",
            "svm_fallback_folds",
        ]);
        let fallback = meta.svm_fallback_folds.len();
        // One run per single base model (how informative is each model's
        // out-of-fold signal alone), then the full stacked run.
        let mut runs: Vec<(Option<usize>, &str)> = MODEL_NAMES
            .iter()
            .enumerate()
            .map(|(i, n)| (Some(i), *n))
            .collect();
        runs.push((None, "stacked"));
        let mut stacked_trace = None;
        let mut stacked_model = None;
        for (idx, name) in runs {
            let features: Array2<f64> = match idx {
                Some(col) => meta.values.column(col).to_owned().insert_axis(Axis(1)),
                None => meta.values.clone(),
            };
            let (model, trace) = meta_train(&features, &y, &stack_cfg)?;
            let final_mean = mean_meta_loss(&model, &features, &y)?;
            fig2.push_row(vec![
                name.to_string(),
                fmt_f64(final_mean),
                trace.converged.to_string(),
                trace
                    .converged_epoch
                    .map(|e| e.to_string())
                    .unwrap_or_default(),
                trace.losses.len().to_string(),
                fallback.to_string(),
            ]);
            if idx.is_none() {
                stacked_trace = Some(trace);
                stacked_model = Some(model);
            }
        }
        let trace = stacked_trace.expect("stacked run recorded");
        let model = stacked_model.expect("stacked run recorded");

        let mut trace_table = Table::new(vec!["epoch", "sum_loss", "mean_loss"]);
        for (epoch, &loss) in trace.losses.iter().enumerate() {
            trace_table.push_row(vec![
                fmt_cell(epoch + 1),
                fmt_f64(loss),
                fmt_f64(loss / n),
            ]);
        }

        let mut meta_text = String::from("medley-meta v1\n");
        writeln!(meta_text, "models {}", MODEL_NAMES.join(" ")).expect("string write");
        writeln!(
            meta_text,
            "coefficients {}",
            model
                .coefficients
                .iter()
                .map(|c| fmt_f64(*c))
                .collect::<Vec<_>>()
                .join(" ")
        )
        .expect("string write");
        writeln!(meta_text, "intercept {}", fmt_f64(model.intercept)).expect("string write");

        // Held-out stacked error for the record: train final base models and
        // feed the meta map.
        let stack_test = stack_predict(&model, models, &prepared.test.features)?;
        writeln!(
            meta_text,
            "test_error {}",
            fmt_f64(classification_error(&stack_test, &prepared.test.target))
        )
        .expect("string write");

        self.write_table("fig2.csv", &fig2)?;
        self.write_table("fig2_trace.csv", &trace_table)?;
        self.write_file("meta_model.txt", &meta_text)?;
        self.write_figure("fig2", &fig2)?;
        Ok(())
    }

    // ----- mi -------------------------------------------------------------

    fn stage_mi(&mut self) -> Result<()> {
        self.ensure_models()?;
        let (prepared, models) = (self.prepared(), self.models());
        let mi_cfg = &self.cfg.mi;
        let y: Vec<f64> = prepared.train.target_f64().to_vec();
        let gain = permutation_test(
            &prepared.train.features,
            &y,
            mi_cfg.components,
            mi_cfg.bins,
            mi_cfg.permutations,
            derive_seed(self.seed, "mi.permutation"),
        )?;

        let mut fig3 = Table::new(vec![
            "subject",
            "i_original",
            "i_extracted",
            "delta_i",
            "p_value",
            "significant",
            "permutations",
        ]);
        fig3.push_row(vec![
            "feature_set".to_string(),
            fmt_f64(gain.i_original),
            fmt_f64(gain.i_extracted),
            fmt_f64(gain.delta_i),
            gain.p_value.map(fmt_f64).unwrap_or_default(),
            gain.significant.map(|s| s.to_string()).unwrap_or_default(),
            gain.permutations.to_string(),
        ]);
        // How informative each trained model's score is about the held-out
        // diagnosis: MI between validation predictions and the target.
        for (name, model) in MODEL_NAMES.iter().zip(models) {
            let estimate = model_score_mi(model, &prepared.validation, mi_cfg.bins)?;
            fig3.push_row(vec![
                format!("score_{name}"),
                fmt_f64(estimate.value),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }

        self.write_table("fig3.csv", &fig3)?;
        self.write_figure("fig3", &fig3)?;
        Ok(())
    }

    // ----- tune -----------------------------------------------------------

    fn stage_tune(&mut self) -> Result<()> {
        if !self.cfg.tune.enabled {
            anyhow::bail!("tuning is disabled in this configuration (tune.enabled = false)");
        }
        let space = self.cfg.search_space()?;
        let policy = self.cfg.restart_policy()?;
        let budget = self.cfg.tune.budget;
        let refit_every = self.cfg.tune.refit_every;
        let ens_cfg = self.cfg.ensemble_config();
        self.ensure_prepared()?;
        let prepared = self.prepared();
        let result = tune_ensemble(
            &self.cfg,
            prepared,
            &space,
            &policy,
            budget,
            refit_every,
            &ens_cfg,
            self.seed,
        )?;

        let mut columns: Vec<String> = vec!["iteration".into()];
        columns.extend(space.names().iter().map(|s| s.to_string()));
        columns.extend(
            [
                "objective",
                "incumbent",
                "max_ei",
                "proposal_sigma",
                "penalized",
                "restart_event",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        let mut fig4 = Table::new(columns);
        for (i, it) in result.trace.iterations.iter().enumerate() {
            let mut row = vec![fmt_cell(i + 1)];
            row.extend(it.x.iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(it.f));
            row.push(fmt_f64(it.incumbent));
            row.push(it.max_ei.map(fmt_f64).unwrap_or_default());
            row.push(it.proposal_sigma.map(fmt_f64).unwrap_or_default());
            row.push(it.penalized.to_string());
            row.push(it.restart_event.to_string());
            fig4.push_row(row);
        }

        let mut best = Table::new(vec!["parameter", "value"]);
        for (name, &value) in space.names().iter().zip(&result.best_x) {
            best.push_row(vec![name.to_string(), fmt_f64(value)]);
        }
        best.push_row(vec![
            "svm_c".to_string(),
            fmt_f64(10f64.powf(result.best_x[3])),
        ]);
        best.push_row(vec!["best_objective".to_string(), fmt_f64(result.best_f)]);
        best.push_row(vec!["restarts".to_string(), fmt_cell(result.restarts)]);

        self.write_table("fig4.csv", &fig4)?;
        self.write_table("best_params.csv", &best)?;
        self.write_figure("fig4", &fig4)?;
        Ok(())
    }

    // ----- restart benchmark ----------------------------------------------

    fn stage_restart_bench(&mut self) -> Result<()> {
        let bench_cfg = &self.cfg.restart_bench;
        let policy = RestartPolicy::adaptive_default();
        let mut bench_table = Table::new(vec![
            "objective",
            "mean_random",
            "mean_adaptive",
            "capped_random",
            "capped_adaptive",
            "t_statistic",
            "p_value_less",
        ]);
        let cases: [(&str, fn(f64) -> f64, f64); 2] = [
            ("plateau", plateau_objective, -1.0),
            ("two_basin", two_basin_objective, 0.0),
        ];
        for (name, objective, global_min) in cases {
            let bench = restart_benchmark(
                &objective,
                (0.0, 1.0),
                global_min,
                0.01,
                &policy,
                bench_cfg.trials,
                derive_seed(self.seed, &format!("restart.bench.{name}")),
                bench_cfg.cap,
            )?;
            bench_table.push_row(vec![
                name.to_string(),
                fmt_f64(bench.mean_random),
                fmt_f64(bench.mean_adaptive),
                fmt_cell(bench.capped_random),
                fmt_cell(bench.capped_adaptive),
                fmt_f64(bench.welch.t_statistic),
                fmt_f64(bench.welch.p_value_less),
            ]);
        }

        // Failure probability of R independent restarts on the two-basin
        // objective, against the geometric model (1-q)^R with q measured by
        // a deterministic grid sweep.
        let q = basin_success_probability(&two_basin_objective, (0.0, 1.0), 0.0, 0.01, 2001);
        let mut convergence = Table::new(vec![
            "objective",
            "restarts",
            "failure_probability",
            "geometric_model",
        ]);
        for restarts in [1usize, 2, 4, 8] {
            let p_fail = mc_convergence_probability(
                &two_basin_objective,
                (0.0, 1.0),
                0.0,
                0.01,
                restarts,
                bench_cfg.convergence_trials,
                derive_seed(self.seed, "restart.convergence"),
            )?;
            convergence.push_row(vec![
                "two_basin".to_string(),
                fmt_cell(restarts),
                fmt_f64(p_fail),
                fmt_f64((1.0 - q).powi(restarts as i32)),
            ]);
        }

        self.write_table("restart_bench.csv", &bench_table)?;
        self.write_table("convergence.csv", &convergence)?;
        Ok(())
    }

    // ----- report ---------------------------------------------------------

    fn stage_report(&mut self) -> Result<()> {
        let resplits = self.cfg.report.resplits;
        let mut fig1 = Table::new(vec!["resplit", "model", "test_error"]);
        let mut per_model: Vec<Vec<f64>> = vec![Vec::new(); MODEL_NAMES.len() + 1];
        for s in 0..resplits {
            let split_seed = derive_seed_indexed(self.seed, "report.resplit", s as u64);
            let errors = resplit_test_errors(&self.cfg, split_seed)?;
            for (m, &err) in errors.iter().enumerate() {
                let name = if m < MODEL_NAMES.len() {
                    MODEL_NAMES[m].to_string()
                } else {
                    "ensemble".to_string()
                };
                fig1.push_row(vec![fmt_cell(s), name, fmt_f64(err)]);
                per_model[m].push(err);
            }
        }

        let mut summary = Table::new(vec!["model", "mean_error", "std_error"]);
        for (m, errors) in per_model.iter().enumerate() {
            let name = if m < MODEL_NAMES.len() {
                MODEL_NAMES[m]
            } else {
                "ensemble"
            };
            let mean = medley_core::stats::mean(errors);
            let std = if errors.len() > 1 {
                medley_core::stats::sample_variance(errors).sqrt()
            } else {
                0.0
            };
            summary.push_row(vec![name.to_string(), fmt_f64(mean), fmt_f64(std)]);
        }

        self.write_table("fig1.csv", &fig1)?;
        self.write_table("fig1_summary.csv", &summary)?;
        self.write_figure("fig1", &summary)?;
        Ok(())
    }

    /// Seed, versions, dataset digest, resolved configuration, wall time.
    /// The only artifact carrying timing, so every table and figure stays
    /// byte-identical across repeat runs.
    fn write_metadata(&self, wall_seconds: f64) -> Result<()> {
        let mut text = String::from("medley-run v1\n");
        writeln!(text, "seed {}", self.seed).expect("string write");
        writeln!(text, "package_version {}", env!("CARGO_PKG_VERSION")).expect("string write");
        writeln!(text, "dataset {}", self.cfg.data.path.display()).expect("string write");
        writeln!(text, "dataset_sha256 {}", sha256_file(&self.cfg.data.path)?).expect("string write");
        writeln!(text, "wall_seconds {wall_seconds:.3}").expect("string write");
        text.push_str("resolved_config_begin\n");
        for (key, value) in resolved_config_lines(&self.cfg, self.seed) {
            writeln!(text, "  {key} {value}").expect("string write");
        }
        text.push_str("resolved_config_end\n");
        self.write_file("run_metadata.txt", &text)?;
        Ok(())
    }
}

/// Root-cause text of an error chain (the deepest source), used for the
/// MANIFEST's failed-stage note.
pub fn root_message(err: &anyhow::Error) -> String {
    err.chain().last().map_or_else(String::new, |e| e.to_string())
}

/// Test error of the four base models plus the optimized ensemble on a fresh
/// split drawn with `split_seed`.
pub fn resplit_test_errors(cfg: &ExperimentConfig, split_seed: u64) -> Result<Vec<f64>> {
    let prepared = prepare_data(cfg, split_seed)?;
    let cfgs = cfg.base_configs().reseeded(split_seed, "report.base");
    let models = train_base_models(&prepared.train, &cfgs)?;
    let ens_cfg = cfg.ensemble_config();
    let (_, weights) = fit_ensemble(&models, &prepared.validation, &ens_cfg)?;
    let mut errors = Vec::with_capacity(models.len() + 1);
    for model in &models {
        let probs = model.predict_proba(&prepared.test.features)?;
        errors.push(classification_error(&probs, &prepared.test.target));
    }
    let probs = ensemble_predict(&models, &weights.weights, &prepared.test.features)?;
    errors.push(classification_error(&probs, &prepared.test.target));
    Ok(errors)
}

/// Bayesian optimization of the ensemble's optimized validation risk over
/// boosting shrinkage/depth, forest size, and the SVM penalty (log scale).
///
/// The Bayesian network's hyperparameters are not searched, so it is trained
/// once and reused; the other three learners retrain per evaluation. A
/// failed training surfaces as NaN, which the optimizer replaces with its
/// penalty value.
#[allow(clippy::too_many_arguments)]
pub fn tune_ensemble(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    space: &SearchSpace,
    policy: &RestartPolicy,
    budget: usize,
    refit_every: usize,
    ens_cfg: &EnsembleConfig,
    seed: u64,
) -> Result<BoResult> {
    let base = cfg.base_configs().reseeded(seed, "tune.base");
    let bnn = TrainedModel::Bnn(bnn_train(&prepared.train, &base.bnn)?);
    let names = model_names();
    let train = &prepared.train;
    let validation = &prepared.validation;

    let evaluate = |x: &[f64]| -> Result<f64> {
        let mut configs = base.clone();
        configs.gb.shrinkage = x[0];
        configs.gb.max_depth = x[1] as usize;
        configs.forest.n_trees = x[2] as usize;
        configs.svm.c = 10f64.powf(x[3]);
        let models = vec![
            bnn.clone(),
            TrainedModel::Forest(rf_train(train, &configs.forest)?),
            TrainedModel::Gbm(gb_train(train, &configs.gb)?),
            TrainedModel::Svm(svm_train(train, &configs.svm)?),
        ];
        let risk = RiskMatrix::estimate(&names, &models, validation)?;
        let weights = optimize_weights(&risk, ens_cfg)?;
        Ok(weights.objective)
    };
    let mut objective = |x: &[f64]| -> f64 {
        evaluate(x).unwrap_or(f64::NAN)
    };

    Ok(bo_minimize_with(
        &mut objective,
        space,
        budget,
        policy,
        derive_seed(seed, "tune.bo"),
        refit_every,
    )?)
}

/// Flat key/value view of the resolved configuration, shared by the run
/// metadata artifact and `describe`.
pub fn resolved_config_lines(cfg: &ExperimentConfig, seed: u64) -> Vec<(String, String)> {
    let mut lines: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: String| lines.push((k.to_string(), v));
    push("seed", seed.to_string());
    push("data.path", cfg.data.path.display().to_string());
    push("split.train", fmt_f64(cfg.split.train));
    push("split.validation", fmt_f64(cfg.split.validation));
    push("split.test", fmt_f64(cfg.split.test));
    push("bnn.hidden", cfg.bnn.hidden.to_string());
    push("bnn.prior_std", fmt_f64(cfg.bnn.prior_std));
    push("bnn.learning_rate", fmt_f64(cfg.bnn.learning_rate));
    push("bnn.epochs", cfg.bnn.epochs.to_string());
    push("bnn.n_mc", cfg.bnn.n_mc.to_string());
    push("bnn.elbo_samples", cfg.bnn.elbo_samples.to_string());
    push("forest.trees", cfg.forest.trees.to_string());
    push("forest.max_depth", cfg.forest.max_depth.to_string());
    push("forest.m_try", cfg.forest.m_try.to_string());
    push("boosting.iterations", cfg.boosting.iterations.to_string());
    push("boosting.max_depth", cfg.boosting.max_depth.to_string());
    push("boosting.shrinkage", fmt_f64(cfg.boosting.shrinkage));
    push("svm.c", fmt_f64(cfg.svm.c));
    push("svm.theta", fmt_f64(cfg.svm.theta));
    push("svm.tolerance", fmt_f64(cfg.svm.tolerance));
    push("svm.max_passes", cfg.svm.max_passes.to_string());
    push("ensemble.alpha", fmt_f64(cfg.ensemble.alpha));
    push("ensemble.beta", fmt_f64(cfg.ensemble.beta));
    push("ensemble.simplex", cfg.ensemble.simplex.to_string());
    push("stacking.folds", cfg.stacking.folds.to_string());
    push("stacking.learning_rate", fmt_f64(cfg.stacking.learning_rate));
    push("stacking.epochs", cfg.stacking.epochs.to_string());
    push("stacking.half_life", fmt_f64(cfg.stacking.half_life));
    push("mi.bins", cfg.mi.bins.to_string());
    push("mi.components", cfg.mi.components.to_string());
    push("mi.permutations", cfg.mi.permutations.to_string());
    push("tune.enabled", cfg.tune.enabled.to_string());
    push("tune.budget", cfg.tune.budget.to_string());
    push("tune.refit_every", cfg.tune.refit_every.to_string());
    push("tune.policy", cfg.tune.policy.clone());
    push("tune.window", cfg.tune.window.to_string());
    push("tune.threshold", fmt_f64(cfg.tune.threshold));
    push("restart_bench.trials", cfg.restart_bench.trials.to_string());
    push("restart_bench.cap", cfg.restart_bench.cap.to_string());
    push(
        "restart_bench.convergence_trials",
        cfg.restart_bench.convergence_trials.to_string(),
    );
    push("report.resplits", cfg.report.resplits.to_string());
    lines
}

/// Renders the resolved execution plan without running anything.
pub fn describe(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<String> {
    cfg.validate()?;
    let mut text = String::new();
    writeln!(text, "medley experiment plan").expect("string write");
    writeln!(text, "  seed: {seed}").expect("string write");
    writeln!(text, "  dataset: {}", cfg.data.path.display()).expect("string write");
    writeln!(
        text,
        "  split: {}/{}/{} (train/validation/test)",
        cfg.split.train, cfg.split.validation, cfg.split.test
    )
    .expect("string write");
    writeln!(text, "  output directory: {}", out.display()).expect("string write");
    text.push_str("\nbase learners:\n");
    writeln!(
        text,
        "  bnn: variational Bayesian neural network ({} hidden units, {} epochs)",
        cfg.bnn.hidden, cfg.bnn.epochs
    )
    .expect("string write");
    writeln!(
        text,
        "  forest: random forest ({} trees, depth {})",
        cfg.forest.trees, cfg.forest.max_depth
    )
    .expect("string write");
    writeln!(
        text,
        "  gbm: gradient boosting ({} rounds, shrinkage {})",
        cfg.boosting.iterations, cfg.boosting.shrinkage
    )
    .expect("string write");
    writeln!(text, "  svm: linear soft-margin SVM (C = {})", cfg.svm.c).expect("string write");
    text.push_str("\nexperiments:\n");
    writeln!(
        text,
        "  1. generalization-error comparison across {} seeded re-splits (fig1)",
        cfg.report.resplits
    )
    .expect("string write");
    writeln!(
        text,
        "  2. stacked meta-model loss with {}-fold out-of-fold features (fig2)",
        cfg.stacking.folds
    )
    .expect("string write");
    writeln!(
        text,
        "  3. mutual-information feature integration ({} components, {} bins, {} permutations) (fig3)",
        cfg.mi.components, cfg.mi.bins, cfg.mi.permutations
    )
    .expect("string write");
    if cfg.tune.enabled {
        writeln!(
            text,
            "  4. hyperparameter search, budget {} with {} restarts (fig4)",
            cfg.tune.budget, cfg.tune.policy
        )
        .expect("string write");
    }
    text.push_str("\nstages:\n");
    for stage in STAGES {
        if stage == "tune" && !cfg.tune.enabled {
            continue;
        }
        writeln!(text, "  {stage}").expect("string write");
    }
    text.push_str("\nresolved configuration:\n");
    for (key, value) in resolved_config_lines(cfg, seed) {
        writeln!(text, "  {key} {value}").expect("string write");
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use medley_core::synthetic::cleveland_like_csv;

    fn tiny_config(dir: &Path) -> ExperimentConfig {
        let csv = cleveland_like_csv(40, 9);
        let data_path = dir.join("tiny.csv");
        fs::write(&data_path, csv).unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.data.path = data_path;
        // Keep the tiny smoke run fast.
        cfg.bnn.epochs = 30;
        cfg.bnn.n_mc = 20;
        cfg.forest.trees = 10;
        cfg.boosting.iterations = 15;
        cfg.stacking.epochs = 200;
        cfg.stacking.folds = 4;
        cfg.mi.permutations = 99;
        cfg.tune.budget = 6;
        cfg.report.resplits = 2;
        cfg.restart_bench.trials = 10;
        cfg.restart_bench.convergence_trials = 30;
        cfg
    }

    #[test]
    fn describe_names_learners_and_experiments_without_writing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let out = dir.path().join("out");
        let text = describe(&cfg, 7, &out).unwrap();
        for needle in ["bnn", "forest", "gbm", "svm"] {
            assert!(text.contains(needle), "missing learner {needle}");
        }
        for needle in ["1.", "2.", "3.", "4."] {
            assert!(text.contains(needle), "missing experiment {needle}");
        }
        assert!(!out.exists(), "describe must not execute or write");
    }

    #[test]
    fn describe_omits_tuning_when_disabled() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.tune.enabled = false;
        let text = describe(&cfg, 7, dir.path()).unwrap();
        assert!(!text.contains("hyperparameter search"));
        assert!(!text.to_lowercase().contains("fig4"));
    }

    #[test]
    fn ingest_writes_split_artifacts_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let out = dir.path().join("out");
        let mut session = Session::new(cfg, 11, out.clone());
        session.run_stage("ingest").unwrap();
        assert!(out.join("splits.txt").exists());
        assert!(out.join("standardize.txt").exists());
        let csv = fs::read_to_string(out.join("ingest_summary.csv")).unwrap();
        assert!(csv.starts_with("split,rows,positive_rate"));
        assert!(csv.contains("train"));
        assert!(csv.contains("validation"));
        assert!(csv.contains("test"));
    }

    #[test]
    fn unknown_stage_is_rejected_with_the_valid_list() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let mut session = Session::new(cfg, 3, dir.path().join("out"));
        let err = session.run_stage("polish").unwrap_err();
        assert!(format!("{err:#}").contains("ingest"));
    }
}
