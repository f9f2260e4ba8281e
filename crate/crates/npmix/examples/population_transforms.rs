//! Exact population functionals of an analytic mixture: conditional MGF
//! (log domain), characteristic function, CDF, low-order moments and the
//! ratio transforms every identification procedure is built from.
//!
//! Run with: cargo run --example population_transforms

use npmix::model::fixtures;

fn main() {
    let model = fixtures::gm1();
    let (x, x0) = ([0.5], [0.0]);

    println!("reference model: two Gaussian components, lambda = 0.6");
    println!("  m1(x) = 1 + 2x (sigma 1.5),  m2(x) = -1 + x (sigma 0.5)\n");

    println!("conditional transforms at x = 0:");
    println!("  M(1|0)    = {:.6}", model.log_cond_mgf(1.0, &x0).unwrap().exp());
    println!("  phi(1|0)  = {:.6}", model.cond_cf(1.0, &x0));
    println!("  F(1|0)    = {:.6}", model.cond_cdf(1.0, &x0));
    println!("  E[z|0]    = {:.6}", model.cond_mean(&x0));
    println!("  E[z^2|0]  = {:.6}", model.cond_m2(&x0));

    println!("\nratio transforms between x = 0.5 and x0 = 0:");
    for t in [1.0, 5.0, 10.0, 20.0] {
        let r = model.log_ratio(t, &x, &x0).unwrap();
        println!("  (1/{t:>4}) log R = {:+.8}   (slope of m1 is 1.0)", r / t);
    }
    for s in [5.0, 15.0] {
        let rho = model.rho(s, &x, &x0).unwrap();
        println!("  |rho(x, {s:>4})| = {:.6}  arg = {:+.4}", rho.norm(), rho.arg());
    }

    // Large MGF arguments stay representable because everything is carried
    // in the log domain.
    let extreme = model.log_cond_mgf(40.0, &x).unwrap();
    println!("\nlog M(40|x) = {extreme:.3} (the plain value would overflow)");
}
