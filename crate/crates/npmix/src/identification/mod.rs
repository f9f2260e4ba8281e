//! Population-level identification oracle: executes the constructive
//! procedures on analytic mixture models and renders testable verdicts for
//! the observable identification conditions.
//!
//! Submodules follow the procedures' structure: numeric limit probes,
//! condition checkers, the two-component recovery routed through whichever
//! condition holds, the fixed-effects (covariate-dependent-weight) variant,
//! and the nested-differentiation machinery for an arbitrary number of
//! components.

pub mod conditions;
pub mod fixed_effects;
pub mod general_j;
pub mod probes;
pub mod two_component;

pub use conditions::{
    assumption5_direct, check_all_conditions, check_condition1, check_condition2,
    check_condition3, lambda_c_limit, slope_limit_cf, slope_limit_mgf_one_sided,
    slope_limits_mgf, ConditionId, ConditionOptions, ConditionVerdict, LambdaCLimit, Verdict,
};
pub use fixed_effects::{fe_k_functions, fe_recover, FeOutcome, FeRecovery, KFunctions};
pub use general_j::{
    detect_j, q_recursion, q_representation, recover_j_parameters, slope_recovery_j, FdConfig,
    JIdentification, QConfig, QMachine, QTables, SlopeRecovery,
};
pub use probes::{LimitProbe, ProbeGrid};
pub use two_component::{
    recover_two_component, MgfTable, RecoverOptions, RecoveryRoute, TwoComponentRecovery,
};
