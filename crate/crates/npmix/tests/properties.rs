//! Property tests of the structural invariants: label-swap symmetry of the
//! population functionals, algebraic exactness of the estimator formulas on
//! population inputs, location equivariance of the smoothed MGF, and the
//! monotone projection.

use proptest::prelude::*;

use npmix::dgp::Dataset;
use npmix::estimators::{c_from_moments, lambda_from_moments, levels_from_moments};
use npmix::model::{Component, ErrorDistribution, MixtureModel, RegressionFunction, Weights};
use npmix::numeric::isotonic_unit_projection;
use npmix::smoothing::{nw_cond_mgf, KernelSpec};

fn two_component_model(
    lambda: f64,
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
    s1: f64,
    s2: f64,
) -> MixtureModel {
    MixtureModel::new(
        vec![
            Component {
                mean: RegressionFunction::polynomial(vec![a1, b1]),
                error: ErrorDistribution::gaussian(s1),
            },
            Component {
                mean: RegressionFunction::polynomial(vec![a2, b2]),
                error: ErrorDistribution::gaussian(s2),
            },
        ],
        Weights::Constant(vec![lambda, 1.0 - lambda]),
        1,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn label_swap_leaves_population_functionals_unchanged(
        lambda in 0.05f64..0.95,
        a1 in -2.0f64..2.0,
        b1 in -2.0f64..2.0,
        a2 in -2.0f64..2.0,
        b2 in -2.0f64..2.0,
        s1 in 0.3f64..2.0,
        s2 in 0.3f64..2.0,
        x in -1.0f64..1.0,
        t in -2.0f64..2.0,
    ) {
        let m = two_component_model(lambda, a1, b1, a2, b2, s1, s2);
        let swapped = MixtureModel::new(
            vec![m.components()[1].clone(), m.components()[0].clone()],
            Weights::Constant(vec![1.0 - lambda, lambda]),
            1,
        )
        .unwrap();
        let xs = [x];
        prop_assert!((m.log_cond_mgf(t, &xs).unwrap() - swapped.log_cond_mgf(t, &xs).unwrap()).abs() < 1e-12);
        prop_assert!((m.cond_cf(t, &xs) - swapped.cond_cf(t, &xs)).norm() < 1e-12);
        prop_assert!((m.cond_cdf(t, &xs) - swapped.cond_cdf(t, &xs)).abs() < 1e-12);
        prop_assert!((m.cond_mean(&xs) - swapped.cond_mean(&xs)).abs() < 1e-12);
    }

    #[test]
    fn population_moments_invert_exactly(
        lambda in 0.05f64..0.95,
        a1 in -2.0f64..2.0,
        b1 in -2.0f64..2.0,
        a2 in -2.0f64..2.0,
        b2 in -2.0f64..2.0,
        s1 in 0.3f64..2.0,
        s2 in 0.3f64..2.0,
    ) {
        // Require a clear non-parallel separation between the two points.
        let x0 = [0.0];
        let x1 = [0.5];
        let delta = 0.5 * b1;
        let nabla = 0.5 * b2;
        prop_assume!((delta - nabla).abs() > 0.05);
        let m = two_component_model(lambda, a1, b1, a2, b2, s1, s2);
        let mean_diff = m.cond_mean(&x1) - m.cond_mean(&x0);
        let (lam, warn) = lambda_from_moments(mean_diff, delta, nabla).unwrap();
        prop_assert!(warn.is_none());
        prop_assert!((lam - lambda).abs() < 1e-9);
        let c = c_from_moments(m.cond_m2(&x0), m.cond_m2(&x1), delta, nabla, lam);
        let (m1, m2) = levels_from_moments(c, m.cond_mean(&x0), delta, nabla, lam).unwrap();
        prop_assert!((m1 - a1).abs() < 1e-8);
        prop_assert!((m2.unwrap() - a2).abs() < 1e-8);
    }

    #[test]
    fn swapping_evaluation_points_flips_slopes_not_lambda(
        lambda in 0.05f64..0.95,
        b1 in -2.0f64..2.0,
        b2 in -2.0f64..2.0,
    ) {
        prop_assume!((b1 - b2).abs() > 0.1);
        let m = two_component_model(lambda, 1.0, b1, -1.0, b2, 1.0, 0.5);
        let (x0, x1) = ([0.0], [0.5]);
        let mean_diff = m.cond_mean(&x1) - m.cond_mean(&x0);
        let (lam_fwd, _) = lambda_from_moments(mean_diff, 0.5 * b1, 0.5 * b2).unwrap();
        let (lam_rev, _) = lambda_from_moments(-mean_diff, -0.5 * b1, -0.5 * b2).unwrap();
        prop_assert!((lam_fwd - lam_rev).abs() < 1e-10);
    }

    #[test]
    fn location_equivariance_of_smoothed_mgf(
        shift in -5.0f64..5.0,
        t in -1.5f64..1.5,
        z in proptest::collection::vec(-3.0f64..3.0, 3..40),
    ) {
        let n = z.len();
        let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
        let data = Dataset::from_rows(1, xs.clone(), z.clone(), None).unwrap();
        let shifted =
            Dataset::from_rows(1, xs, z.iter().map(|v| v + shift).collect(), None).unwrap();
        let kernel = KernelSpec::gaussian(vec![0.4]).unwrap();
        let a = nw_cond_mgf(&data, &[0.3], t, &kernel).unwrap().value;
        let b = nw_cond_mgf(&shifted, &[0.3], t, &kernel).unwrap().value;
        prop_assert!((b - a - t * shift).abs() < 1e-10);
    }

    #[test]
    fn isotonic_projection_properties(
        y in proptest::collection::vec(-0.5f64..1.5, 1..60),
        y2 in proptest::collection::vec(-0.5f64..1.5, 1..60),
    ) {
        let p = isotonic_unit_projection(&y);
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        // Idempotent.
        prop_assert_eq!(&isotonic_unit_projection(&p), &p);
        // Order preserving: y <= y' pointwise implies P(y) <= P(y').
        let n = y.len().min(y2.len());
        let lo: Vec<f64> = (0..n).map(|i| y[i].min(y2[i])).collect();
        let hi: Vec<f64> = (0..n).map(|i| y[i].max(y2[i])).collect();
        let plo = isotonic_unit_projection(&lo);
        let phi = isotonic_unit_projection(&hi);
        prop_assert!(plo.iter().zip(&phi).all(|(a, b)| a <= b));
    }

    #[test]
    fn csv_round_trip_is_lossless(
        rows in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..50),
    ) {
        let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let z: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let data = Dataset::from_rows(1, xs, z, None).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..]).unwrap();
        prop_assert_eq!(back.z(), data.z());
        for i in 0..data.n() {
            prop_assert_eq!(back.x_row(i), data.x_row(i));
        }
    }
}
