//! Population slope limits and the testable identification conditions.
//!
//! Everything here consumes only observable transforms of the mixture — the
//! conditional MGF ratio R(t, x), the conditional CF ratio rho(x, s), and
//! conditional means — plus, for the equivalence cross-check of the second
//! condition, the component CFs of the analytic model.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::MixtureModel;

use super::probes::{LimitProbe, ProbeGrid};

/// Verdict tolerances and probe layout for the condition checkers.
#[derive(Debug, Clone)]
pub struct ConditionOptions {
    pub probe: ProbeGrid,
    /// CF probe grid base (the MGF probes use `probe`).
    pub cf_probe: ProbeGrid,
    /// Increment used in the principal-log slope read-off.
    pub a: f64,
    /// Relative stabilisation / equality tolerance.
    pub tol: f64,
    /// Sequence of c values for the weight-limit clause.
    pub c_seq: Vec<f64>,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        ConditionOptions {
            probe: ProbeGrid::default(),
            // CF probes stay moderate: Gaussian-type CFs underflow fast.
            cf_probe: ProbeGrid { base: 5.0, factor: 2.0, levels: 3 },
            a: 0.1,
            tol: 1e-3,
            c_seq: vec![1e-2, 1e-3, 1e-4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionId {
    Cond1,
    Cond2,
    Cond3,
    Cond4Fe,
}

impl std::fmt::Display for ConditionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConditionId::Cond1 => "condition-1",
            ConditionId::Cond2 => "condition-2",
            ConditionId::Cond3 => "condition-3",
            ConditionId::Cond4Fe => "condition-4-fe",
        };
        write!(f, "{s}")
    }
}

/// Evidence-backed outcome of a condition check.
#[derive(Debug, Clone)]
pub struct ConditionVerdict {
    pub id: ConditionId,
    pub verdict: Verdict,
    /// Named numeric probes backing the verdict.
    pub evidence: Vec<(String, f64)>,
    pub tolerance: f64,
}

impl ConditionVerdict {
    fn new(id: ConditionId, verdict: Verdict, tolerance: f64) -> Self {
        ConditionVerdict { id, verdict, evidence: Vec::new(), tolerance }
    }

    fn push(&mut self, name: &str, value: f64) {
        self.evidence.push((name.to_string(), value));
    }
}

/// Directional limits of (1/t) log R(t, x) on a geometric grid, one probe
/// per direction.
pub fn slope_limits_mgf(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    probe: &ProbeGrid,
) -> Result<(LimitProbe, LimitProbe)> {
    let plus = slope_limit_mgf_one_sided(model, x, x0, probe, 1.0)?;
    let minus = slope_limit_mgf_one_sided(model, x, x0, probe, -1.0)?;
    Ok((plus, minus))
}

/// One-sided variant; `sign` selects the +inf or -inf direction. Errors with
/// a domain failure when any component MGF lacks the probed arguments.
pub fn slope_limit_mgf_one_sided(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    probe: &ProbeGrid,
    sign: f64,
) -> Result<LimitProbe> {
    let args: Vec<f64> = probe.args().iter().map(|t| sign * t).collect();
    LimitProbe::evaluate(args, |t| Ok(model.log_ratio(t, x, x0)? / t))
}

/// Stabilised value of the principal-log CF increment
/// (-i/a) Log(rho(x, s+a) / rho(x, s)) along the CF probe grid.
pub fn slope_limit_cf(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    a: f64,
    probe: &ProbeGrid,
) -> Result<LimitProbe> {
    let p = LimitProbe::evaluate(probe.args(), |s| {
        let w = model.rho(s + a, x, x0)? / model.rho(s, x, x0)?;
        Ok(w.arg() / a)
    })?;
    if (a * p.limit).abs() > std::f64::consts::PI - 0.1 {
        return Err(Error::BranchAmbiguity((a * p.limit).abs()));
    }
    Ok(p)
}

/// Maximal deviation of |rho(x, s+a)/rho(x, s)| from one over the probe
/// grid. A genuine CF slope limit turns the increment ratio into a pure
/// phase; a bounded-away modulus reveals oscillation that a sparse phase
/// probe can alias into a spurious constant.
pub fn cf_increment_modulus_deviation(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    a: f64,
    probe: &ProbeGrid,
) -> Result<f64> {
    let mut dev: f64 = 0.0;
    for s in probe.args() {
        let w = model.rho(s + a, x, x0)? / model.rho(s, x, x0)?;
        dev = dev.max((w.norm() - 1.0).abs());
    }
    Ok(dev)
}

/// The lambda_c transform evaluated along a decreasing c sequence, with a
/// linear extrapolation to c = 0 from the two smallest values.
#[derive(Debug, Clone)]
pub struct LambdaCLimit {
    pub c_values: Vec<f64>,
    pub values: Vec<f64>,
    pub extrapolated: f64,
    pub residual: f64,
    /// Directional slope limits feeding the transform.
    pub limit_plus: f64,
    pub limit_minus: f64,
}

/// lambda_c = (E[z|x] - E[z|x0] - (1+c) L-) / (L+ - (1+c) L-).
pub fn lambda_c_limit(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    c_seq: &[f64],
    probe: &ProbeGrid,
) -> Result<LambdaCLimit> {
    assert!(c_seq.len() >= 2, "need at least two c values");
    let (plus, minus) = slope_limits_mgf(model, x, x0, probe)?;
    let mean_diff = model.cond_mean(x) - model.cond_mean(x0);
    let values: Vec<f64> = c_seq
        .iter()
        .map(|c| {
            (mean_diff - (1.0 + c) * minus.limit) / (plus.limit - (1.0 + c) * minus.limit)
        })
        .collect();
    let n = values.len();
    let (c1, c2) = (c_seq[n - 2], c_seq[n - 1]);
    let (v1, v2) = (values[n - 1 - 1], values[n - 1]);
    let extrapolated = v2 - c2 * (v1 - v2) / (c1 - c2);
    let residual = (extrapolated - v2).abs();
    Ok(LambdaCLimit {
        c_values: c_seq.to_vec(),
        values,
        extrapolated,
        residual,
        limit_plus: plus.limit,
        limit_minus: minus.limit,
    })
}

/// First condition: the two directional MGF slope limits differ, or the
/// lambda_c limit equals one.
pub fn check_condition1(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    opts: &ConditionOptions,
) -> ConditionVerdict {
    let mut v = ConditionVerdict::new(ConditionId::Cond1, Verdict::Indeterminate, opts.tol);
    let limits = match slope_limits_mgf(model, x, x0, &opts.probe) {
        Ok(l) => l,
        Err(e) => {
            v.push("domain_failure", 1.0);
            v.evidence.push((format!("error: {e}"), f64::NAN));
            return v;
        }
    };
    let (plus, minus) = limits;
    v.push("limit_plus", plus.limit);
    v.push("limit_minus", minus.limit);
    v.push("residual_plus", plus.residual);
    v.push("residual_minus", minus.residual);
    let scale = 1.0 + plus.limit.abs().max(minus.limit.abs());
    if !plus.stabilized(opts.tol * scale) || !minus.stabilized(opts.tol * scale) {
        return v;
    }
    if (plus.limit - minus.limit).abs() > opts.tol * scale {
        v.verdict = Verdict::Holds;
        v.push("clause", 1.0);
        return v;
    }
    // Equal limits: fall back on the lambda_c clause.
    match lambda_c_limit(model, x, x0, &opts.c_seq, &opts.probe) {
        Ok(lc) => {
            v.push("lambda_c_extrapolated", lc.extrapolated);
            v.push("lambda_c_residual", lc.residual);
            let converges_to_one =
                (lc.extrapolated - 1.0).abs() <= opts.tol && lc.residual <= opts.tol;
            if converges_to_one {
                v.verdict = Verdict::Holds;
                v.push("clause", 2.0);
            } else {
                v.verdict = Verdict::Fails;
            }
        }
        Err(_) => {
            v.push("lambda_c_unavailable", 1.0);
        }
    }
    v
}

/// Second condition: |rho(x, s)| tends to one and the principal-log CF
/// increment stabilises. The verdict is cross-checked against the component
/// CF ratio (their equivalence under non-parallel means).
pub fn check_condition2(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    opts: &ConditionOptions,
) -> ConditionVerdict {
    let mut v = ConditionVerdict::new(ConditionId::Cond2, Verdict::Indeterminate, opts.tol);
    let modulus = LimitProbe::evaluate(opts.cf_probe.args(), |s| {
        Ok(model.rho(s, x, x0)?.norm())
    });
    match &modulus {
        Ok(m) => {
            v.push("rho_modulus_limit", m.limit);
            v.push("rho_modulus_residual", m.residual);
            let n = m.values.len();
            let dev = (m.values[n - 1] - 1.0).abs().max((m.values[n - 2] - 1.0).abs());
            if dev > 10.0 * opts.tol {
                // |rho| visibly away from one at the probe scale.
                v.verdict = Verdict::Fails;
            } else if dev <= opts.tol {
                // Modulus clause passes; consult the increment clause.
                match slope_limit_cf(model, x, x0, opts.a, &opts.cf_probe) {
                    Ok(inc) => {
                        v.push("increment_limit", inc.limit);
                        v.push("increment_residual", inc.residual);
                        let scale = 1.0 + inc.limit.abs();
                        if inc.stabilized(opts.tol * scale) {
                            v.verdict = Verdict::Holds;
                        }
                    }
                    Err(_) => {
                        v.push("increment_probe_failure", 1.0);
                    }
                }
            }
        }
        Err(_) => {
            v.push("probe_failure", 1.0);
        }
    }
    // Equivalence cross-check on the analytic component CFs.
    if let Some(a5) = assumption5_direct(model, &opts.cf_probe, opts.tol) {
        v.push("component_cf_ratio_vanishes", f64::from(a5));
        let agrees = match v.verdict {
            Verdict::Holds => a5,
            Verdict::Fails => !a5,
            Verdict::Indeterminate => true,
        };
        v.push("equivalence_agrees", f64::from(agrees));
    }
    v
}

/// Direct check of the component-CF tail condition: |phi_1/phi_2| -> 0 or
/// |phi_2/phi_1| -> 0, or the mixture is degenerate. `None` when the probe
/// gives no clear classification.
pub fn assumption5_direct(model: &MixtureModel, probe: &ProbeGrid, tol: f64) -> Option<bool> {
    if model.n_components() == 1 {
        return Some(true);
    }
    if model.n_components() != 2 {
        return None;
    }
    let ratio: Vec<f64> = probe
        .args()
        .iter()
        .map(|&s| {
            let p1 = model.components()[0].error.cf(s).norm().max(1e-300);
            let p2 = model.components()[1].error.cf(s).norm().max(1e-300);
            p1 / p2
        })
        .collect();
    let last = ratio[ratio.len() - 1];
    let decreasing = ratio.windows(2).all(|w| w[1] <= w[0]);
    let increasing = ratio.windows(2).all(|w| w[1] >= w[0]);
    if (decreasing && last < tol) || (increasing && last > 1.0 / tol) {
        Some(true)
    } else if ratio.iter().all(|r| (r - ratio[0]).abs() <= tol * ratio[0]) {
        // Stable non-vanishing ratio: condition fails.
        Some(false)
    } else {
        None
    }
}

/// Third condition: a one-sided MGF slope limit differs from the CF slope
/// limit, or lambda_c tends to one. The one-sided MGF probe uses whichever
/// tail direction the component MGF domains support.
pub fn check_condition3(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    opts: &ConditionOptions,
) -> ConditionVerdict {
    let mut v = ConditionVerdict::new(ConditionId::Cond3, Verdict::Indeterminate, opts.tol);
    let upper_ok = model
        .components()
        .iter()
        .all(|c| c.error.mgf_domain().1 == f64::INFINITY);
    let sign = if upper_ok { 1.0 } else { -1.0 };
    v.push("mgf_direction", sign);
    let mgf = match slope_limit_mgf_one_sided(model, x, x0, &opts.probe, sign) {
        Ok(p) => p,
        Err(e) => {
            v.evidence.push((format!("error: {e}"), f64::NAN));
            return v;
        }
    };
    v.push("mgf_limit", mgf.limit);
    v.push("mgf_residual", mgf.residual);
    let scale = 1.0 + mgf.limit.abs();
    if !mgf.stabilized(opts.tol * scale) {
        return v;
    }
    let cf = slope_limit_cf(model, x, x0, opts.a, &opts.cf_probe);
    let mod_dev = cf_increment_modulus_deviation(model, x, x0, opts.a, &opts.cf_probe)
        .unwrap_or(f64::INFINITY);
    match cf {
        Ok(p) if p.stabilized(opts.tol * (1.0 + p.limit.abs())) && mod_dev <= 10.0 * opts.tol => {
            v.push("cf_limit", p.limit);
            v.push("cf_residual", p.residual);
            if (p.limit - mgf.limit).abs() > opts.tol * scale {
                v.verdict = Verdict::Holds;
                v.push("clause", 1.0);
                return v;
            }
            // Limits agree: only the degenerate clause can rescue.
        }
        Ok(p) => {
            v.push("cf_limit_unstable", p.residual.max(mod_dev));
        }
        Err(_) => {
            v.push("cf_probe_failure", 1.0);
        }
    }
    match lambda_c_limit(model, x, x0, &opts.c_seq, &opts.probe) {
        Ok(lc) if (lc.extrapolated - 1.0).abs() <= opts.tol && lc.residual <= opts.tol => {
            v.push("lambda_c_extrapolated", lc.extrapolated);
            v.verdict = Verdict::Holds;
            v.push("clause", 2.0);
        }
        Ok(lc) => {
            v.push("lambda_c_extrapolated", lc.extrapolated);
            // A stable CF limit equal to the MGF limit plus lambda_c away
            // from one rules out both clauses. Without a stable CF limit the
            // verdict stays indeterminate.
            if v.evidence.iter().any(|(k, _)| k == "cf_limit") {
                v.verdict = Verdict::Fails;
            }
        }
        Err(_) => {
            v.push("lambda_c_unavailable", 1.0);
        }
    }
    v
}

/// rho values used by reports; exposed for evidence tables.
pub fn rho_modulus_probe(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    probe: &ProbeGrid,
) -> Result<LimitProbe> {
    LimitProbe::evaluate(probe.args(), |s| Ok(model.rho(s, x, x0)?.norm()))
}

/// Convenience wrapper returning all three verdicts at once.
pub fn check_all_conditions(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    opts: &ConditionOptions,
) -> Vec<ConditionVerdict> {
    vec![
        check_condition1(model, x, x0, opts),
        check_condition2(model, x, x0, opts),
        check_condition3(model, x, x0, opts),
    ]
}

/// The double CF ratio used by the principal-log slope read-off.
pub fn cf_increment_ratio(
    model: &MixtureModel,
    x: &[f64],
    x0: &[f64],
    s: f64,
    a: f64,
) -> Result<Complex64> {
    Ok(model.rho(s + a, x, x0)? / model.rho(s, x, x0)?)
}
