//! Monte Carlo consistency check at desk scale: replications on a growing
//! n-grid with per-replication seed streams, aggregated into bias, median
//! absolute error, RMSE and the log-log RMSE slope.
//!
//! Run with: cargo run --release --example monte_carlo

use npmix::harness::{run_monte_carlo, ExperimentConfig};

const CONFIG: &str = r#"
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
n = 1000
seed = 20260810
law = { uniform = [[-1.0, 1.0]] }

[eval]
x0 = [0.0]
x1 = [0.5]

[tuning]
eps = 0.10
beta = 0.10
c_t = 0.6666666666666666
c_s = 2.0

[montecarlo]
n_grid = [2000, 8000, 32000]
replications = 100
"#;

fn main() {
    let config = ExperimentConfig::from_toml_str(CONFIG).unwrap();
    let start = std::time::Instant::now();
    let report = run_monte_carlo(&config, None).unwrap();
    println!("100 replications per n, {:.1} s\n", start.elapsed().as_secs_f64());

    println!("{:<8} {:>7} {:>12} {:>12} {:>12} {:>9}", "estimand", "n", "bias", "med|err|", "rmse", "failures");
    for row in &report.rows {
        println!(
            "{:<8} {:>7} {:>12.5} {:>12.5} {:>12.5} {:>9}",
            row.estimand, row.n, row.bias, row.median_abs_error, row.rmse, row.failures
        );
    }
    println!("\nlog-log RMSE slopes (negative = shrinking with n):");
    for (estimand, slope) in &report.loglog_slopes {
        println!("  {estimand:<8} {slope:+.3}");
    }
}
