//! Constructive slope identification from tail limits: the directional MGF
//! ratio limits, the principal-log CF increment, and the lambda_c transform
//! that pins the mixing weight when the two directions disagree.
//!
//! Run with: cargo run --example slope_limits

use npmix::identification::{lambda_c_limit, slope_limit_cf, slope_limits_mgf, ProbeGrid};
use npmix::model::fixtures;

fn main() {
    let probe = ProbeGrid::default();
    let (x, x0) = ([0.5], [0.0]);

    // Opposite-skew pair: the two MGF tails expose different components.
    let sk = fixtures::sk1();
    let (plus, minus) = slope_limits_mgf(&sk, &x, &x0, &probe).unwrap();
    println!("opposite-skew pair (lambda = 0.7, slopes 0.5 and 0.25):");
    println!("  t -> +inf: {:+.8} (residual {:.1e})", plus.limit, plus.residual);
    println!("  t -> -inf: {:+.8} (residual {:.1e})", minus.limit, minus.residual);
    let lc = lambda_c_limit(&sk, &x, &x0, &[1e-2, 1e-3, 1e-4], &probe).unwrap();
    println!("  lambda_c along c: {:?}", lc.values);
    println!("  extrapolated to c -> 0: {:.7}\n", lc.extrapolated);

    // Unequal-variance Gaussians: both MGF tails see the wide component, the
    // CF increment exposes the narrow one.
    let gm = fixtures::gm1();
    let (plus, minus) = slope_limits_mgf(&gm, &x, &x0, &probe).unwrap();
    println!("unequal-variance Gaussian pair (slopes 1.0 and 0.5):");
    println!("  t -> +inf: {:+.8},  t -> -inf: {:+.8} (both pick m1)", plus.limit, minus.limit);
    let cf = slope_limit_cf(&gm, &x, &x0, 0.1, &ProbeGrid { base: 15.0, factor: 2.0, levels: 3 })
        .unwrap();
    println!("  CF increment limit: {:+.8} (picks m2)", cf.limit);

    // Degenerate mixture: the ratio is a pure exponential at every t.
    let d = fixtures::degenerate();
    let (plus, _) = slope_limits_mgf(&d, &x, &x0, &probe).unwrap();
    println!("\ndegenerate model: slope {:+.10} at every probe argument", plus.limit);
    let lc = lambda_c_limit(&d, &x, &x0, &[1e-2, 1e-3, 1e-4], &probe).unwrap();
    println!("  lambda_c identically {:?}", lc.values);
}
