//! File-driven experiment harness: versioned TOML configuration, the four
//! batch operations (simulate / estimate / diagnose / montecarlo) and
//! deterministic Monte Carlo aggregation.
//!
//! The configuration schema is strict: unknown keys are errors, and the
//! `version` header must match the supported schema version.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::dgp::{simulate, CovariateLaw, Dataset, SimulationDesign};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_lambda, estimate_levels, estimate_slopes, fit_mixture, PopulationIngredients,
    TuningOverrides, TuningSchedule,
};
use crate::identification::{
    check_all_conditions, detect_j, fe_recover, recover_j_parameters, recover_two_component,
    ConditionOptions, FeOutcome, QConfig, RecoverOptions, Verdict,
};
use crate::model::{
    Component, ErrorDistribution, MixtureModel, RegressionFunction, Weights,
};
use crate::numeric::{linspace, ls_slope, median, split_seed};

pub const CONFIG_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Configuration schema

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub model: ModelCfg,
    #[serde(default)]
    pub design: Option<DesignCfg>,
    pub eval: EvalCfg,
    #[serde(default)]
    pub tuning: Option<TuningCfg>,
    #[serde(default)]
    pub montecarlo: Option<MonteCarloCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCfg {
    pub covariate_dim: usize,
    pub weights: WeightsCfg,
    pub components: Vec<ComponentCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum WeightsCfg {
    /// Fixed probability vector.
    Constant(Vec<f64>),
    /// lambda(x) polynomial in the first covariate (two components only).
    Covariate { poly: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentCfg {
    /// Polynomial coefficients in the first covariate, or an affine form.
    pub mean: MeanCfg,
    pub error: ErrorCfg,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum MeanCfg {
    Poly(Vec<f64>),
    Linear { intercept: f64, slopes: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorCfg {
    Gaussian { sigma: f64 },
    /// Two-point normal location mixture; `mirrored` flips the skew.
    Skew { a: f64, b: f64, sigma: f64, #[serde(default)] mirrored: bool },
    ShiftedExponential { rate: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignCfg {
    pub n: usize,
    pub seed: u64,
    pub law: LawCfg,
    #[serde(default)]
    pub record_labels: bool,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum LawCfg {
    Uniform { uniform: Vec<[f64; 2]> },
    Gaussian { gaussian: GaussianLawCfg },
    Grid { grid: Vec<Vec<f64>> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianLawCfg {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalCfg {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    /// Auxiliary points for the general-J oracle.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub z_grid: Option<ZGridCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZGridCfg {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TuningCfg {
    pub eps: Option<f64>,
    pub beta: Option<f64>,
    pub c_t: Option<f64>,
    pub c_s: Option<f64>,
    pub a_n: Option<f64>,
    pub p_n: Option<usize>,
    pub h_scale: Option<f64>,
    pub b_scale: Option<f64>,
    pub c_scale: Option<f64>,
    pub d_scale: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloCfg {
    pub n_grid: Vec<usize>,
    pub replications: usize,
}

impl ExperimentConfig {
    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} not supported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn build_model(&self) -> Result<MixtureModel> {
        let k = self.model.covariate_dim;
        if k == 0 {
            return Err(Error::Config("covariate_dim must be positive".into()));
        }
        let mut comps = Vec::new();
        for c in &self.model.components {
            let mean = match &c.mean {
                MeanCfg::Poly(coeffs) => {
                    if k != 1 && coeffs.len() > 2 {
                        return Err(Error::Config(
                            "polynomial means require a scalar covariate".into(),
                        ));
                    }
                    RegressionFunction::Polynomial(coeffs.clone())
                }
                MeanCfg::Linear { intercept, slopes } => {
                    if slopes.len() != k {
                        return Err(Error::Config(format!(
                            "linear mean has {} slopes for covariate_dim {k}",
                            slopes.len()
                        )));
                    }
                    RegressionFunction::Linear { intercept: *intercept, slopes: slopes.clone() }
                }
            };
            let error = match &c.error {
                ErrorCfg::Gaussian { sigma } => {
                    if *sigma <= 0.0 {
                        return Err(Error::Config("sigma must be positive".into()));
                    }
                    ErrorDistribution::Gaussian { sigma: *sigma }
                }
                ErrorCfg::Skew { a, b, sigma, mirrored } => {
                    if !(*a > 0.0 && *b > *a && *sigma > 0.0) {
                        return Err(Error::Config("skew family requires 0 < a < b, sigma > 0".into()));
                    }
                    ErrorDistribution::TwoPointNormal { a: *a, b: *b, sigma: *sigma, mirrored: *mirrored }
                }
                ErrorCfg::ShiftedExponential { rate } => {
                    if *rate <= 0.0 {
                        return Err(Error::Config("rate must be positive".into()));
                    }
                    ErrorDistribution::ShiftedExponential { rate: *rate }
                }
            };
            comps.push(Component { mean, error });
        }
        let weights = match &self.model.weights {
            WeightsCfg::Constant(w) => Weights::Constant(w.clone()),
            WeightsCfg::Covariate { poly } => Weights::Covariate(poly.clone()),
        };
        MixtureModel::new(comps, weights, k)
    }

    pub fn build_design(&self, seed_override: Option<u64>) -> Result<SimulationDesign> {
        let d = self
            .design
            .as_ref()
            .ok_or_else(|| Error::Config("missing [design] section".into()))?;
        let law = match &d.law {
            LawCfg::Uniform { uniform } => {
                CovariateLaw::UniformBox(uniform.iter().map(|p| (p[0], p[1])).collect())
            }
            LawCfg::Gaussian { gaussian } => CovariateLaw::Gaussian {
                mean: gaussian.mean.clone(),
                sd: gaussian.sd.clone(),
            },
            LawCfg::Grid { grid } => CovariateLaw::FixedGrid(grid.clone()),
        };
        Ok(SimulationDesign {
            n: d.n,
            covariate_law: law,
            seed: seed_override.unwrap_or(d.seed),
            record_labels: d.record_labels,
        })
    }

    pub fn tuning_overrides(&self) -> TuningOverrides {
        let t = self.tuning.clone().unwrap_or_default();
        TuningOverrides {
            eps: t.eps,
            beta: t.beta,
            c_t: t.c_t,
            c_s: t.c_s,
            a_n: t.a_n,
            p_n: t.p_n,
            h_scale: t.h_scale,
            b_scale: t.b_scale,
            c_scale: t.c_scale,
            d_scale: t.d_scale,
        }
    }

    pub fn z_grid(&self) -> Vec<f64> {
        match &self.eval.z_grid {
            Some(g) => linspace(g.lo, g.hi, g.n.max(2)),
            None => linspace(-4.0, 4.0, 81),
        }
    }

    fn check_eval_dims(&self, k: usize) -> Result<()> {
        if self.eval.x0.len() != k || self.eval.x1.len() != k {
            return Err(Error::Config(format!(
                "evaluation points must have dimension {k}"
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Batch operations

/// Simulate a dataset and write it as CSV. Returns the output path.
pub fn cli_simulate(
    config: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<PathBuf> {
    let model = config.build_model()?;
    let design = config.build_design(seed_override)?;
    let data = simulate(&model, &design)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("dataset.csv");
    data.write_csv_path(&path)?;
    Ok(path)
}

/// Estimate the two-component mixture from a dataset file and write the
/// scalar and F-grid report. Returns the output path.
pub fn cli_estimate(
    config: &ExperimentConfig,
    data_path: &Path,
    out_dir: &Path,
    project: bool,
) -> Result<PathBuf> {
    let data = Dataset::read_csv_path(data_path)?;
    let model_k = config.model.covariate_dim;
    if data.covariate_dim() != model_k {
        return Err(Error::Config(format!(
            "dataset has {} covariates, config declares {model_k}",
            data.covariate_dim()
        )));
    }
    config.check_eval_dims(data.covariate_dim())?;
    let tuning = TuningSchedule::for_data(&data, &config.tuning_overrides())?;
    let fit = fit_mixture(
        &data,
        &config.eval.x0,
        &config.eval.x1,
        &tuning,
        &config.z_grid(),
        project,
    )?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("fit.csv");
    let mut buf = Vec::new();
    fit.write_csv(&mut buf)?;
    std::fs::write(&path, buf)?;
    Ok(path)
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails",
        Verdict::Indeterminate => "indeterminate",
    }
}

/// Run the identification oracle on the configured model and write a
/// key-value report plus a tidy evidence table. Returns the report path.
pub fn cli_diagnose(
    config: &ExperimentConfig,
    out_dir: &Path,
    with_detect_j: bool,
) -> Result<PathBuf> {
    let model = config.build_model()?;
    config.check_eval_dims(model.covariate_dim())?;
    let x0 = &config.eval.x0;
    let x1 = &config.eval.x1;
    std::fs::create_dir_all(out_dir)?;
    let mut report = String::new();
    let mut evidence = String::from("condition,name,value\n");

    report.push_str(&format!("schema_version = {CONFIG_VERSION}\n"));
    report.push_str(&format!("components = {}\n", model.n_components()));
    report.push_str(&format!("covariate_weights = {}\n", model.has_covariate_weights()));

    let opts = ConditionOptions::default();
    if !model.has_covariate_weights() {
        for v in check_all_conditions(&model, x1, x0, &opts) {
            report.push_str(&format!("{} = {}\n", v.id, verdict_str(v.verdict)));
            for (name, value) in &v.evidence {
                evidence.push_str(&format!("{},{},{}\n", v.id, name.replace(',', ";"), value));
            }
        }
        if model.n_components() <= 2 {
            match recover_two_component(&model, x1, x0, &RecoverOptions::default()) {
                Ok(rec) => {
                    report.push_str(&format!("recovery_route = {:?}\n", rec.route));
                    report.push_str(&format!("lambda = {}\n", rec.lambda));
                    report.push_str(&format!("delta_m1 = {}\n", rec.delta_m1));
                    if let Some(d2) = rec.delta_m2 {
                        report.push_str(&format!("delta_m2 = {d2}\n"));
                    }
                    report.push_str(&format!("m1_x0 = {}\n", rec.m1_x0));
                    match rec.m2_x0 {
                        Some(m2) => report.push_str(&format!("m2_x0 = {m2}\n")),
                        None => report.push_str("m2_x0 = absent\n"),
                    }
                }
                Err(e) => {
                    report.push_str(&format!("recovery_error = {e}\n"));
                }
            }
        } else if !config.eval.points.is_empty() {
            // More than two components: the auxiliary points drive the
            // general recovery.
            let t_grid = linspace(0.2, 1.8, 9);
            match recover_j_parameters(
                &model,
                x0,
                &config.eval.points,
                &t_grid,
                &QConfig::default(),
                None,
            ) {
                Ok(rec) => {
                    report.push_str(&format!("lambda = {:?}\n", rec.lambda));
                    report.push_str(&format!("levels_x0 = {:?}\n", rec.levels));
                    report.push_str(&format!("det_weights = {}\n", rec.det_weights));
                }
                Err(e) => {
                    report.push_str(&format!("recovery_error = {e}\n"));
                }
            }
        }
    } else {
        match fe_recover(&model, x1, x0, &RecoverOptions::default())? {
            FeOutcome::Recovered(rec) => {
                report.push_str("fe_outcome = recovered\n");
                report.push_str(&format!("k_plus = {}\n", rec.k.k_plus));
                report.push_str(&format!("k_minus = {}\n", rec.k.k_minus));
                report.push_str(&format!("lambda_x = {}\n", rec.lambda_x));
                report.push_str(&format!("lambda_x0 = {}\n", rec.lambda_x0));
                report.push_str(&format!("m1_x0 = {}\n", rec.m1_x0));
                report.push_str(&format!("m2_x0 = {}\n", rec.m2_x0));
                for (t, k) in rec.k.t_plus.iter().zip(&rec.k.k_plus_t) {
                    evidence.push_str(&format!("condition-4-fe,k_plus_t({t}),{k}\n"));
                }
                for (t, k) in rec.k.t_minus.iter().zip(&rec.k.k_minus_t) {
                    evidence.push_str(&format!("condition-4-fe,k_minus_t({t}),{k}\n"));
                }
            }
            FeOutcome::ConstantWeight(rec) => {
                report.push_str("fe_outcome = constant_weight\n");
                report.push_str(&format!("lambda = {}\n", rec.lambda));
            }
            FeOutcome::Indeterminate { k_plus, k_minus } => {
                report.push_str("fe_outcome = indeterminate\n");
                report.push_str(&format!("k_plus = {k_plus}\n"));
                report.push_str(&format!("k_minus = {k_minus}\n"));
            }
        }
    }

    if with_detect_j {
        let (j, saturated) =
            detect_j(&model, x0, x1, 4, &[1.0, 2.0], &QConfig::default())?;
        report.push_str(&format!("detected_j = {j}\n"));
        report.push_str(&format!("detection_saturated = {saturated}\n"));
    }

    let report_path = out_dir.join("diagnosis.txt");
    std::fs::write(&report_path, report)?;
    std::fs::write(out_dir.join("evidence.csv"), evidence)?;
    Ok(report_path)
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Per-(estimand, n) aggregate statistics.
#[derive(Debug, Clone)]
pub struct RateRow {
    pub estimand: &'static str,
    pub n: usize,
    pub bias: f64,
    pub median_abs_error: f64,
    pub rmse: f64,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of log RMSE against log n, per estimand.
    pub loglog_slopes: Vec<(&'static str, f64)>,
}

pub const MC_ESTIMANDS: [&str; 5] = ["delta", "nabla", "lambda", "m1_x0", "m2_x0"];

#[derive(Debug, Clone, Copy, Default)]
struct RepOutcome {
    values: [f64; 5],
    failed: bool,
}

fn run_replication(
    model: &MixtureModel,
    base: &SimulationDesign,
    n: usize,
    seed: u64,
    overrides: &TuningOverrides,
    x0: &[f64],
    x1: &[f64],
) -> RepOutcome {
    let design = SimulationDesign {
        n,
        covariate_law: base.covariate_law.clone(),
        seed,
        record_labels: false,
    };
    let run = || -> Result<[f64; 5]> {
        let data = simulate(model, &design)?;
        let tuning = TuningSchedule::for_data(&data, overrides)?;
        let slopes = estimate_slopes(&data, x0, x1, &tuning)?;
        let (lambda, _) = estimate_lambda(&data, x0, x1, &slopes, &tuning)?;
        let (m1, m2, _) = estimate_levels(&data, x0, x1, &slopes, lambda, &tuning)?;
        Ok([
            slopes.delta_hat,
            slopes.nabla_hat,
            lambda,
            m1,
            m2.unwrap_or(f64::NAN),
        ])
    };
    match run() {
        Ok(values) => RepOutcome { values, failed: false },
        Err(_) => RepOutcome { values: [f64::NAN; 5], failed: true },
    }
}

/// Run the Monte Carlo experiment described by the config. Replications run
/// in parallel on independent seed streams; aggregation is single-threaded
/// and deterministic.
pub fn run_monte_carlo(config: &ExperimentConfig, seed_override: Option<u64>) -> Result<RateReport> {
    let mc = config
        .montecarlo
        .as_ref()
        .ok_or_else(|| Error::Config("missing [montecarlo] section".into()))?;
    if mc.replications == 0 || mc.n_grid.is_empty() {
        return Err(Error::Config("montecarlo requires replications >= 1 and a nonempty n_grid".into()));
    }
    if mc.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("n_grid must be strictly increasing".into()));
    }
    let model = config.build_model()?;
    config.check_eval_dims(model.covariate_dim())?;
    let base = config.build_design(seed_override)?;
    let overrides = config.tuning_overrides();
    let x0 = config.eval.x0.clone();
    let x1 = config.eval.x1.clone();

    // Truth at the evaluation points for error computation.
    let pop = PopulationIngredients::new(&model, &x0, &x1);
    let (lambda_true, m1_true, m2_true, _) = pop.algebraic_fit()?;
    let truth = [
        pop.true_delta(),
        pop.true_nabla(),
        lambda_true,
        m1_true,
        m2_true.unwrap_or(f64::NAN),
    ];

    let mut rows = Vec::new();
    for (n_idx, &n) in mc.n_grid.iter().enumerate() {
        let outcomes: Vec<RepOutcome> = (0..mc.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = split_seed(base.seed, (n_idx * mc.replications + rep) as u64);
                run_replication(&model, &base, n, seed, &overrides, &x0, &x1)
            })
            .collect();
        let failures = outcomes.iter().filter(|o| o.failed).count();
        for (e_idx, estimand) in MC_ESTIMANDS.iter().enumerate() {
            let errs: Vec<f64> = outcomes
                .iter()
                .filter(|o| !o.failed && o.values[e_idx].is_finite())
                .map(|o| o.values[e_idx] - truth[e_idx])
                .collect();
            if errs.is_empty() {
                rows.push(RateRow {
                    estimand,
                    n,
                    bias: f64::NAN,
                    median_abs_error: f64::NAN,
                    rmse: f64::NAN,
                    failures,
                });
                continue;
            }
            let bias = errs.iter().sum::<f64>() / errs.len() as f64;
            let medae = median(&errs.iter().map(|e| e.abs()).collect::<Vec<_>>());
            let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
            rows.push(RateRow { estimand, n, bias, median_abs_error: medae, rmse, failures });
        }
    }

    let mut loglog_slopes = Vec::new();
    for estimand in MC_ESTIMANDS {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.estimand == estimand && r.rmse.is_finite() && r.rmse > 0.0)
            .map(|r| ((r.n as f64).ln(), r.rmse.ln()))
            .collect();
        if pts.len() >= 2 {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            loglog_slopes.push((estimand, ls_slope(&xs, &ys)));
        }
    }
    Ok(RateReport { rows, loglog_slopes })
}

/// Run the Monte Carlo experiment and write the rate report and the tidy
/// plot-data CSV. Returns the report path.
pub fn cli_montecarlo(
    config: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<PathBuf> {
    let report = run_monte_carlo(config, seed_override)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("rate_report.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(f, "estimand,n,bias,median_abs_error,rmse,failures")?;
    for r in &report.rows {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            r.estimand, r.n, r.bias, r.median_abs_error, r.rmse, r.failures
        )?;
    }
    f.flush()?;
    let mut p = std::io::BufWriter::new(std::fs::File::create(out_dir.join("plot_data.csv"))?);
    writeln!(p, "estimand,n,statistic,value")?;
    for r in &report.rows {
        writeln!(p, "{},{},bias,{}", r.estimand, r.n, r.bias)?;
        writeln!(p, "{},{},median_abs_error,{}", r.estimand, r.n, r.median_abs_error)?;
        writeln!(p, "{},{},rmse,{}", r.estimand, r.n, r.rmse)?;
    }
    for (estimand, slope) in &report.loglog_slopes {
        writeln!(p, "{estimand},0,loglog_rmse_slope,{slope}")?;
    }
    p.flush()?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const GM1_TOML: &str = r#"
version = 1

[model]
covariate_dim = 1
weights = [0.6, 0.4]

[[model.components]]
mean = [1.0, 2.0]
error = { family = "gaussian", sigma = 1.5 }

[[model.components]]
mean = [-1.0, 1.0]
error = { family = "gaussian", sigma = 0.5 }

[design]
n = 200
seed = 7
law = { uniform = [[-1.0, 1.0]] }
record_labels = true

[eval]
x0 = [0.0]
x1 = [0.5]
z_grid = { lo = -2.0, hi = 2.0, n = 41 }

[tuning]
eps = 0.10
beta = 0.10
c_t = 0.6666666666666666
c_s = 2.0

[montecarlo]
n_grid = [400, 800]
replications = 3
"#;

    #[test]
    fn config_round_trip_and_model_build() {
        let cfg = ExperimentConfig::from_toml_str(GM1_TOML).unwrap();
        let model = cfg.build_model().unwrap();
        assert_eq!(model.n_components(), 2);
        assert!((model.cond_mean(&[0.0]) - 0.2).abs() < 1e-12);
        let design = cfg.build_design(None).unwrap();
        assert_eq!(design.n, 200);
        assert_eq!(design.seed, 7);
        assert_eq!(cfg.z_grid().len(), 41);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = GM1_TOML.replace("[design]", "[design]\ntypo_key = 3");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let bad_version = GM1_TOML.replace("version = 1", "version = 99");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad_version), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_weights_named_in_error() {
        let bad = GM1_TOML.replace("weights = [0.6, 0.4]", "weights = [0.6, 0.3]");
        let cfg = ExperimentConfig::from_toml_str(&bad).unwrap();
        let err = cfg.build_model().unwrap_err();
        assert!(err.to_string().contains("sum"), "{err}");
    }

    #[test]
    fn simulate_is_deterministic_and_estimate_runs() {
        let cfg = ExperimentConfig::from_toml_str(GM1_TOML).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = cli_simulate(&cfg, dir.path(), None).unwrap();
        let bytes1 = std::fs::read(&p1).unwrap();
        let p2 = cli_simulate(&cfg, dir.path(), None).unwrap();
        assert_eq!(bytes1, std::fs::read(&p2).unwrap());
        // Larger sample for a stable estimate run.
        let big = GM1_TOML.replace("n = 200", "n = 5000");
        let cfg_big = ExperimentConfig::from_toml_str(&big).unwrap();
        let data_path = cli_simulate(&cfg_big, dir.path(), None).unwrap();
        let fit_path = cli_estimate(&cfg_big, &data_path, dir.path(), true).unwrap();
        let text = std::fs::read_to_string(fit_path).unwrap();
        assert!(text.contains("lambda_hat"));
        assert!(text.contains("z,F1_raw,F1_proj,F2_raw,F2_proj"));
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let cfg = ExperimentConfig::from_toml_str(GM1_TOML).unwrap();
        let dir = tempfile::tempdir().unwrap();
        // Write a 2-covariate dataset.
        let data = Dataset::from_rows(
            2,
            vec![0.0, 0.0, 0.5, 0.5, 1.0, 1.0],
            vec![0.1, 0.2, 0.3],
            None,
        )
        .unwrap();
        let path = dir.path().join("dataset.csv");
        data.write_csv_path(&path).unwrap();
        let r = cli_estimate(&cfg, &path, dir.path(), false);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn diagnose_writes_verdicts() {
        let cfg = ExperimentConfig::from_toml_str(GM1_TOML).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = cli_diagnose(&cfg, dir.path(), false).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("condition-1 = fails"), "{text}");
        assert!(text.contains("condition-3 = holds"), "{text}");
        assert!(text.contains("recovery_route"), "{text}");
        let evidence = std::fs::read_to_string(dir.path().join("evidence.csv")).unwrap();
        assert!(evidence.lines().count() > 4);
    }

    #[test]
    fn monte_carlo_records_failures() {
        // Evaluation points far off the covariate support empty every kernel
        // window; the replications must be recorded as failures, not
        // silently dropped.
        let broken = GM1_TOML
            .replace("x0 = [0.0]", "x0 = [50.0]")
            .replace("x1 = [0.5]", "x1 = [50.5]");
        let cfg = ExperimentConfig::from_toml_str(&broken).unwrap();
        let report = run_monte_carlo(&cfg, None).unwrap();
        for row in &report.rows {
            assert_eq!(row.failures, 3, "{row:?}");
            assert!(row.rmse.is_nan());
        }
    }

    #[test]
    fn monte_carlo_smoke() {
        let cfg = ExperimentConfig::from_toml_str(GM1_TOML).unwrap();
        let report = run_monte_carlo(&cfg, Some(11)).unwrap();
        assert_eq!(report.rows.len(), 2 * MC_ESTIMANDS.len());
        // One row per estimand and n; removing a replication is equivalent
        // to rerunning with a different count, checked in the acceptance
        // suite. Here: determinism of the aggregate.
        let again = run_monte_carlo(&cfg, Some(11)).unwrap();
        for (a, b) in report.rows.iter().zip(again.rows.iter()) {
            assert_eq!(a.rmse.to_bits(), b.rmse.to_bits());
        }
    }
}
