//! Identification of the two-component mixture whose weight lambda(x)
//! depends on the covariate without restriction.
//!
//! The tail-corrected ratio transforms K_{+inf,t} and K_{-inf,t} converge to
//! the weight ratios lambda(x)/lambda(x0) and (1-lambda(x))/(1-lambda(x0));
//! solving that pair gives both weights, a unit-determinant 2x2 system gives
//! the levels, and the x-dependent-weight exponential system gives the
//! component MGFs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::MixtureModel;
use crate::numeric::solve_dense;

use super::probes::{LimitProbe, ProbeGrid};
use super::two_component::{
    recover_two_component, MgfTable, RecoverOptions, TwoComponentRecovery, DET_FLOOR,
};

/// K transforms along the probe grid and their tail limits.
#[derive(Debug, Clone)]
pub struct KFunctions {
    /// Positive probe arguments (for K_{+inf,t}) and the matching values.
    pub t_plus: Vec<f64>,
    pub k_plus_t: Vec<f64>,
    /// Negative probe arguments (for K_{-inf,t}) and the matching values.
    pub t_minus: Vec<f64>,
    pub k_minus_t: Vec<f64>,
    pub k_plus: f64,
    pub k_minus: f64,
    pub residual_plus: f64,
    pub residual_minus: f64,
    /// Directional slope limits used in the tail corrections.
    pub slope_plus: f64,
    pub slope_minus: f64,
}

/// Directional slope of log R via difference quotients over consecutive
/// probe arguments. Unlike the plain (1/t) log R read-off this cancels the
/// constant term log(lambda(x)/lambda(x0)) that covariate-dependent weights
/// leave in the log-ratio, which the exponential tail correction of the K
/// transforms would otherwise amplify.
pub fn slope_diff_quotient(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    probe: &ProbeGrid,
    sign: f64,
) -> Result<LimitProbe> {
    let args: Vec<f64> = probe.args().iter().map(|t| sign * t).collect();
    assert!(args.len() >= 3, "need at least three probe arguments");
    let logs: Vec<f64> = args
        .iter()
        .map(|&t| model.log_ratio(t, x, x0))
        .collect::<Result<_>>()?;
    let mut quot_args = Vec::with_capacity(args.len() - 1);
    let mut values = Vec::with_capacity(args.len() - 1);
    for i in 1..args.len() {
        quot_args.push(args[i]);
        values.push((logs[i] - logs[i - 1]) / (args[i] - args[i - 1]));
    }
    let limit = *values.last().unwrap();
    let residual = (values[values.len() - 1] - values[values.len() - 2]).abs();
    Ok(LimitProbe { args: quot_args, values, limit, residual })
}

/// K_{+inf,t}(x) = R(t,x) exp(-t lim_s (1/s) log R(s,x)) for t on the probe
/// grid, K_{-inf,t} likewise with the (-inf) slope limit, plus their limits.
pub fn fe_k_functions(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    probe: &ProbeGrid,
) -> Result<KFunctions> {
    let plus = slope_diff_quotient(model, x, x0, probe, 1.0)?;
    let minus = slope_diff_quotient(model, x, x0, probe, -1.0)?;
    let k_plus_probe = LimitProbe::evaluate(probe.args(), |t| {
        Ok((model.log_ratio(t, x, x0)? - t * plus.limit).exp())
    })?;
    let k_minus_probe = LimitProbe::evaluate(
        probe.args().iter().map(|t| -t).collect(),
        |t| Ok((model.log_ratio(t, x, x0)? - t * minus.limit).exp()),
    )?;
    Ok(KFunctions {
        t_plus: k_plus_probe.args.clone(),
        k_plus_t: k_plus_probe.values.clone(),
        t_minus: k_minus_probe.args.clone(),
        k_minus_t: k_minus_probe.values.clone(),
        k_plus: k_plus_probe.limit,
        k_minus: k_minus_probe.limit,
        residual_plus: k_plus_probe.residual,
        residual_minus: k_minus_probe.residual,
        slope_plus: plus.limit,
        slope_minus: minus.limit,
    })
}

#[derive(Debug, Clone)]
pub struct FeRecovery {
    pub lambda_x: f64,
    pub lambda_x0: f64,
    /// Slopes of the component picked by the (+inf) route and the other one.
    pub delta_m1: f64,
    pub delta_m2: f64,
    pub m1_x0: f64,
    pub m2_x0: f64,
    pub mgf_table: MgfTable,
    pub k: KFunctions,
}

/// Outcome of the fixed-effects recovery.
#[derive(Debug)]
pub enum FeOutcome {
    /// Distinct weights at the two points: full recovery.
    Recovered(FeRecovery),
    /// K_{+inf} = K_{-inf} = 1: the weight does not move between the points;
    /// the fixed-weight recovery applies.
    ConstantWeight(TwoComponentRecovery),
    /// K_{+inf} = K_{-inf} != 1: the pair system degenerates and the
    /// procedure cannot attribute the common ratio to either component.
    Indeterminate { k_plus: f64, k_minus: f64 },
}

/// Tolerance for classifying the K limits as equal.
pub const K_EQUAL_TOL: f64 = 1e-6;

/// Recover (lambda(x), lambda(x0)), the slopes, the levels at x0 and the
/// component MGFs for a model with covariate-dependent weights.
pub fn fe_recover(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    opts: &RecoverOptions,
) -> Result<FeOutcome> {
    let k = fe_k_functions(model, x, x0, &opts.conditions.probe)?;
    if (k.k_plus - k.k_minus).abs() < K_EQUAL_TOL {
        if (k.k_plus - 1.0).abs() < K_EQUAL_TOL {
            return Ok(FeOutcome::ConstantWeight(recover_two_component(model, x, x0, opts)?));
        }
        return Ok(FeOutcome::Indeterminate { k_plus: k.k_plus, k_minus: k.k_minus });
    }
    // Pair solve: K+ = lambda(x)/lambda(x0), K- = (1-lambda(x))/(1-lambda(x0)).
    let lambda_x0 = (k.k_minus - 1.0) / (k.k_minus - k.k_plus);
    let lambda_x = k.k_plus * lambda_x0;
    let tol = 1e-6;
    for (name, v) in [("lambda(x0)", lambda_x0), ("lambda(x)", lambda_x)] {
        if !(v > -tol && v < 1.0 + tol) {
            return Err(Error::Config(format!(
                "fixed-effects pair solve left (0,1): {name} = {v}"
            )));
        }
    }

    let (delta_m1, delta_m2) = (k.slope_plus, k.slope_minus);
    // Level solve with unit determinant:
    //   c(x) = m1(x0) - m2(x0),
    //   E[z|x0] = lambda(x0) m1(x0) + (1 - lambda(x0)) m2(x0).
    let mean_diff = model.cond_mean(x) - model.cond_mean(x0);
    let dot_lambda = lambda_x - lambda_x0;
    let c = (mean_diff - lambda_x * (delta_m1 - delta_m2) - delta_m2) / dot_lambda;
    let mean_x0 = model.cond_mean(x0);
    let m1_x0 = mean_x0 + (1.0 - lambda_x0) * c;
    let m2_x0 = mean_x0 - lambda_x0 * c;

    // Component MGFs from the x-dependent-weight exponential system.
    let means = [
        [m1_x0, m2_x0],
        [m1_x0 + delta_m1, m2_x0 + delta_m2],
    ];
    let weights = [[lambda_x0, 1.0 - lambda_x0], [lambda_x, 1.0 - lambda_x]];
    let mut m1 = vec![f64::NAN; opts.t_grid.len()];
    let mut m2 = vec![f64::NAN; opts.t_grid.len()];
    let mut skipped = Vec::new();
    for (i, &t) in opts.t_grid.iter().enumerate() {
        let mut a = DMatrix::zeros(2, 2);
        let mut b = DVector::zeros(2);
        let log_m = [model.log_cond_mgf(t, x0)?, model.log_cond_mgf(t, x)?];
        let mut singular = false;
        for row in 0..2 {
            let scale = t * means[row][0].max(means[row][1]);
            for col in 0..2 {
                a[(row, col)] = weights[row][col] * (t * means[row][col] - scale).exp();
            }
            b[row] = (log_m[row] - scale).exp();
        }
        match solve_dense(&a, &b, "fe-component-mgf", DET_FLOOR) {
            Ok(sol) => {
                m1[i] = sol[0];
                m2[i] = sol[1];
            }
            Err(Error::SingularSystem { .. }) => {
                singular = true;
            }
            Err(e) => return Err(e),
        }
        if singular {
            skipped.push(i);
        }
    }
    // Interpolate skipped grid points (finitely many by construction).
    for col in [&mut m1, &mut m2] {
        for &i in &skipped {
            let left = (0..i).rev().find(|j| !skipped.contains(j));
            let right = (i + 1..opts.t_grid.len()).find(|j| !skipped.contains(j));
            col[i] = match (left, right) {
                (Some(l), Some(r)) => {
                    let w = (opts.t_grid[i] - opts.t_grid[l]) / (opts.t_grid[r] - opts.t_grid[l]);
                    col[l] * (1.0 - w) + col[r] * w
                }
                (Some(l), None) => col[l],
                (None, Some(r)) => col[r],
                (None, None) => {
                    return Err(Error::SingularSystem { system: "fe-component-mgf", det: 0.0 })
                }
            };
        }
    }

    Ok(FeOutcome::Recovered(FeRecovery {
        lambda_x,
        lambda_x0,
        delta_m1,
        delta_m2,
        m1_x0,
        m2_x0,
        mgf_table: MgfTable { t: opts.t_grid.clone(), m: vec![m1, m2], skipped },
        k,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;
    use crate::model::{Component, ErrorDistribution, MixtureModel, RegressionFunction, Weights};

    const X: [f64; 1] = [0.1];
    const X0: [f64; 1] = [0.0];

    #[test]
    fn k_limits_match_weight_ratios() {
        let m = fixtures::fe_sk1();
        let k = fe_k_functions(&m, &X, &X0, &ProbeGrid::default()).unwrap();
        // lambda(0.1)/lambda(0) = 0.52/0.50, (1-lambda(0.1))/(1-lambda(0)).
        assert!((k.k_plus - 1.04).abs() < 1e-4, "K+ {}", k.k_plus);
        assert!((k.k_minus - 0.96).abs() < 1e-4, "K- {}", k.k_minus);
    }

    #[test]
    fn constant_weight_k_is_one_in_the_limit() {
        let m = fixtures::sk1();
        let k = fe_k_functions(&m, &[0.5], &X0, &ProbeGrid::default()).unwrap();
        assert!((k.k_plus - 1.0).abs() < 1e-6);
        assert!((k.k_minus - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_weight_k_is_one_at_every_probed_t() {
        // lambda identically one: R is a pure exponential, so the corrected
        // transform is exactly one at every finite t.
        let m = fixtures::degenerate();
        let k = fe_k_functions(&m, &[0.5], &X0, &ProbeGrid::default()).unwrap();
        for v in k.k_plus_t.iter().chain(k.k_minus_t.iter()) {
            assert!((v - 1.0).abs() < 1e-12, "K_t {v}");
        }
    }

    #[test]
    fn fe_recovery_on_the_skew_pair() {
        let m = fixtures::fe_sk1();
        let out = fe_recover(&m, &X, &X0, &RecoverOptions::default()).unwrap();
        let rec = match out {
            FeOutcome::Recovered(r) => r,
            other => panic!("expected full recovery, got {other:?}"),
        };
        assert!((rec.lambda_x - 0.52).abs() < 1e-3, "lambda(x) {}", rec.lambda_x);
        assert!((rec.lambda_x0 - 0.50).abs() < 1e-3);
        assert!((rec.delta_m1 - 0.1).abs() < 1e-6);
        assert!((rec.delta_m2 - 0.05).abs() < 1e-6);
        assert!((rec.m1_x0 - 1.0).abs() < 1e-6, "m1(x0) {}", rec.m1_x0);
        assert!((rec.m2_x0 + 1.0).abs() < 1e-6, "m2(x0) {}", rec.m2_x0);
        let (right, left) = ErrorDistribution::skew_pair(0.5, 1.5, 0.5);
        for (i, &t) in rec.mgf_table.t.iter().enumerate() {
            let t1 = right.log_mgf(t).unwrap().exp();
            let t2 = left.log_mgf(t).unwrap().exp();
            assert!((rec.mgf_table.m[0][i] - t1).abs() / t1 < 1e-5, "M1 at {t}");
            assert!((rec.mgf_table.m[1][i] - t2).abs() / t2 < 1e-5, "M2 at {t}");
        }
    }

    #[test]
    fn constant_weight_falls_back_to_fixed_recovery() {
        let m = fixtures::sk1();
        let out = fe_recover(&m, &[0.5], &X0, &RecoverOptions::default()).unwrap();
        match out {
            FeOutcome::ConstantWeight(rec) => {
                assert!((rec.lambda - 0.7).abs() < 1e-6);
            }
            other => panic!("expected constant-weight fallback, got {other:?}"),
        }
    }

    #[test]
    fn symmetric_tails_with_moving_weight_are_indeterminate() {
        // Unequal-variance Gaussian errors: the same component dominates
        // both MGF tails, so K+ = K- = lambda(x)/lambda(x0) != 1 and the
        // pair system cannot attribute the ratio to either component.
        let m = MixtureModel::new(
            vec![
                Component {
                    mean: RegressionFunction::polynomial(vec![1.0, 2.0]),
                    error: ErrorDistribution::gaussian(1.5),
                },
                Component {
                    mean: RegressionFunction::polynomial(vec![-1.0, 1.0]),
                    error: ErrorDistribution::gaussian(0.5),
                },
            ],
            Weights::Covariate(vec![0.5, 0.2]),
            1,
        )
        .unwrap();
        match fe_recover(&m, &[0.1], &X0, &RecoverOptions::default()).unwrap() {
            FeOutcome::Indeterminate { k_plus, k_minus } => {
                assert!((k_plus - 1.04).abs() < 1e-3, "K+ {k_plus}");
                assert!((k_minus - 1.04).abs() < 1e-3, "K- {k_minus}");
            }
            other => panic!("expected indeterminate, got {other:?}"),
        }
    }

    #[test]
    fn case_four_k_values_are_weight_constants() {
        // lambda(x0) = 1 at x0 = 0, same error law in both components and
        // means crossing at x0: K+ -> lambda(x), K- -> 1 - lambda(x).
        let err = ErrorDistribution::gaussian(1.0);
        let m = MixtureModel::new(
            vec![
                Component {
                    mean: RegressionFunction::polynomial(vec![0.0, 1.0]),
                    error: err.clone(),
                },
                Component {
                    mean: RegressionFunction::polynomial(vec![0.0, -1.0]),
                    error: err,
                },
            ],
            Weights::Covariate(vec![1.0, 0.0, -0.5]),
            1,
        )
        .unwrap();
        let x = [0.1];
        let lam = 1.0 - 0.5 * 0.01;
        let k = fe_k_functions(&m, &x, &X0, &ProbeGrid { base: 40.0, factor: 2.0, levels: 3 })
            .unwrap();
        assert!((k.k_plus - lam).abs() < 1e-5, "K+ {} vs {lam}", k.k_plus);
        assert!((k.k_minus - (1.0 - lam)).abs() < 1e-5, "K- {} vs {}", k.k_minus, 1.0 - lam);
    }
}
