//! Testable identification conditions on the canonical quartet of models,
//! with the evidence probes behind each verdict and the component-CF
//! equivalence cross-check for the second condition.
//!
//! Run with: cargo run --example condition_checks

use npmix::identification::{check_all_conditions, ConditionOptions};
use npmix::model::fixtures;

fn main() {
    let opts = ConditionOptions::default();
    let (x, x0) = ([0.5], [0.0]);
    let quartet = [
        ("identical components", fixtures::identical_components()),
        ("unequal-variance Gaussians", fixtures::gm1()),
        ("degenerate (single component)", fixtures::degenerate()),
        ("opposite-skew pair", fixtures::sk1()),
    ];

    for (name, model) in quartet {
        println!("{name}:");
        for verdict in check_all_conditions(&model, &x, &x0, &opts) {
            println!("  {} -> {:?}", verdict.id, verdict.verdict);
            for (key, value) in &verdict.evidence {
                println!("      {key} = {value:.6}");
            }
        }
        println!();
    }
}
