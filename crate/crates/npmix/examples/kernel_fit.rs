//! The fully nonparametric sample pipeline on one simulated dataset:
//! Nadaraya-Watson transforms feed the slope, weight, level and
//! component-CDF estimators.
//!
//! Run with: cargo run --release --example kernel_fit

use npmix::dgp::{simulate, CovariateLaw, SimulationDesign};
use npmix::estimators::{fit_mixture, TuningOverrides, TuningSchedule};
use npmix::model::fixtures;
use npmix::numeric::{linspace, normal_cdf};

fn main() {
    let model = fixtures::gm1();
    let design = SimulationDesign {
        n: 32_000,
        covariate_law: CovariateLaw::UniformBox(vec![(-1.0, 1.0)]),
        seed: 20260810,
        record_labels: false,
    };
    let data = simulate(&model, &design).unwrap();
    println!("simulated {} observations, z in {:?}", data.n(), data.z_range());

    // Gaussian-example schedule: transform arguments grow like
    // sqrt(const * log n) with scale constants 1/sigma.
    let tuning = TuningSchedule::for_data(
        &data,
        &TuningOverrides {
            eps: Some(0.10),
            beta: Some(0.10),
            c_t: Some(1.0 / 1.5),
            c_s: Some(1.0 / 0.5),
            ..Default::default()
        },
    )
    .unwrap();
    println!(
        "schedule: h = {:.4}, b = {:.4}, t_n = {:.3}, s_n = {:.3}, a_n = {}, p_n = {}",
        tuning.h[0], tuning.b[0], tuning.t_n, tuning.s_n, tuning.a_n, tuning.p_n
    );

    let grid = linspace(-2.0, 2.0, 41);
    let fit = fit_mixture(&data, &[0.0], &[0.5], &tuning, &grid, true).unwrap();

    println!("\nestimates (true values in parentheses):");
    println!("  delta  = {:+.4}  (1.0)", fit.slopes.delta_hat);
    println!("  nabla  = {:+.4}  (0.5)", fit.slopes.nabla_hat);
    println!("  lambda = {:.4}  (0.6)", fit.lambda_hat);
    println!("  m1(x0) = {:+.4}  (1.0)", fit.m1_hat_x0);
    println!("  m2(x0) = {:+.4}  (-1.0)", fit.m2_hat_x0.unwrap());
    println!("  branch ok: {}", fit.slopes.branch_ok);
    for w in &fit.warnings {
        println!("  warning: {w}");
    }

    let f2 = fit.f2_proj.as_ref().unwrap();
    let sup: f64 = grid
        .iter()
        .enumerate()
        .map(|(i, &z)| (f2[i] - normal_cdf(z / 0.5)).abs())
        .fold(0.0, f64::max);
    println!("\nprojected F2 sup-distance to the true component CDF: {sup:.4}");
    println!("F2 at z = -0.5, 0, 0.5: {:.4}, {:.4}, {:.4}",
        f2[grid.iter().position(|&z| z == -0.5).unwrap()],
        f2[grid.iter().position(|&z| z == 0.0).unwrap()],
        f2[grid.iter().position(|&z| z == 0.5).unwrap()]);
}
