//! Fully nonparametric two-component estimators: slope extraction from the
//! conditional MGF and CF, mixture weight and level recovery from low-order
//! conditional moments, and the truncated-series estimators of the component
//! CDFs.
//!
//! The arithmetic that turns conditional transforms into mixture parameters
//! is factored into plain functions over the transform values, so the same
//! algebra runs on Nadaraya-Watson estimates (the sample path) and on exact
//! population functionals (the brute-force equivalence path used by tests).

use num_complex::Complex64;

use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::model::MixtureModel;
use crate::numeric::isotonic_unit_projection;
use crate::smoothing::{
    nw_cond_cdf, nw_cond_cf, nw_cond_m2, nw_cond_mean, nw_cond_mgf, KernelSpec,
};

/// |delta - nabla| below this is treated as parallel slopes.
pub const SEPARATION_FLOOR: f64 = 1e-3;
/// Clamping bounds for the estimated mixture weight.
pub const LAMBDA_CLAMP: (f64, f64) = (0.001, 0.999);
/// Margin kept between |a * nabla| and pi for the principal branch.
pub const BRANCH_MARGIN: f64 = 0.1;
/// Default slack multiplier on the data z-range for the CDF series budget.
pub const SERIES_SLACK: f64 = 10.0;

/// All bandwidths and divergence sequences used by the estimator suite.
///
/// Conventions for the defaults (k = 1 in the reference experiments):
/// MGF and CF bandwidths shrink like n^(-1/5 + eps), the transform arguments
/// grow like sqrt(eps log n) with scale constants defaulting to 1 / sd(z),
/// the series length like 2 log n. Everything is overridable.
#[derive(Debug, Clone)]
pub struct TuningSchedule {
    /// MGF regression bandwidth per coordinate (h_n).
    pub h: Vec<f64>,
    /// CF regression bandwidth per coordinate (b_n).
    pub b: Vec<f64>,
    /// Conditional-CDF bandwidth per coordinate (c_n, quartic kernel).
    pub c: Vec<f64>,
    /// Moment regression bandwidth per coordinate (d_n).
    pub d: Vec<f64>,
    /// MGF argument t_n.
    pub t_n: f64,
    /// CF argument s_n.
    pub s_n: f64,
    /// CF increment a_n.
    pub a_n: f64,
    /// Series truncation length p_n.
    pub p_n: usize,
    /// Decreasing sequence used for the lambda_c style limits.
    pub c_seq: Vec<f64>,
}

/// Optional overrides applied on top of the data-driven defaults.
#[derive(Debug, Clone, Default)]
pub struct TuningOverrides {
    pub eps: Option<f64>,
    pub beta: Option<f64>,
    /// Scale constant for t_n (defaults to 1 / sd(z)).
    pub c_t: Option<f64>,
    /// Scale constant for s_n (defaults to 1 / sd(z)).
    pub c_s: Option<f64>,
    pub a_n: Option<f64>,
    pub p_n: Option<usize>,
    pub h_scale: Option<f64>,
    pub b_scale: Option<f64>,
    pub c_scale: Option<f64>,
    pub d_scale: Option<f64>,
}

impl TuningSchedule {
    /// Rule-of-thumb schedule for a dataset, with overrides.
    pub fn for_data(data: &Dataset, ov: &TuningOverrides) -> Result<Self> {
        let n = data.n();
        if n < 2 {
            return Err(Error::Config("need at least two observations".into()));
        }
        let k = data.covariate_dim();
        let nf = n as f64;
        let log_n = nf.ln();
        let eps = ov.eps.unwrap_or(0.05);
        let beta = ov.beta.unwrap_or(0.05);
        if !(0.0 < eps && eps < 0.2 && 0.0 < beta && beta < 0.2) {
            return Err(Error::Config("eps and beta must lie in (0, 1/5)".into()));
        }
        let x_sd = data.x_sd();
        if x_sd.iter().any(|s| *s <= 0.0) {
            return Err(Error::Config("degenerate covariate: zero variance".into()));
        }
        let z_sd = data.z_sd().max(1e-12);
        let h_scale = ov.h_scale.unwrap_or(1.0);
        let b_scale = ov.b_scale.unwrap_or(1.0);
        let c_scale = ov.c_scale.unwrap_or(2.0);
        let d_scale = ov.d_scale.unwrap_or(1.0);
        let c_t = ov.c_t.unwrap_or(1.0 / z_sd);
        let c_s = ov.c_s.unwrap_or(1.0 / z_sd);
        Ok(TuningSchedule {
            h: x_sd.iter().map(|s| h_scale * s * nf.powf(-0.2 + eps)).collect(),
            b: x_sd.iter().map(|s| b_scale * s * nf.powf(-0.2 + beta)).collect(),
            c: x_sd.iter().map(|s| c_scale * s * nf.powf(-0.2)).collect(),
            d: x_sd
                .iter()
                .map(|s| d_scale * s * nf.powf(-1.0 / (k as f64 + 4.0)))
                .collect(),
            t_n: c_t * (eps * log_n).sqrt(),
            s_n: c_s * (beta * log_n).sqrt(),
            a_n: ov.a_n.unwrap_or(0.1),
            p_n: ov.p_n.unwrap_or((2.0 * log_n).ceil() as usize),
            c_seq: vec![1e-2, 1e-3, 1e-4],
        })
    }

    pub fn mgf_kernel(&self) -> KernelSpec {
        KernelSpec::gaussian(self.h.clone()).expect("validated bandwidths")
    }
    pub fn cf_kernel(&self) -> KernelSpec {
        KernelSpec::gaussian(self.b.clone()).expect("validated bandwidths")
    }
    pub fn cdf_kernel(&self) -> KernelSpec {
        KernelSpec::quartic(self.c.clone()).expect("validated bandwidths")
    }
    pub fn moment_kernel(&self) -> KernelSpec {
        KernelSpec::gaussian(self.d.clone()).expect("validated bandwidths")
    }
}

/// Slope estimates with branch diagnostics.
#[derive(Debug, Clone)]
pub struct SlopeEstimate {
    /// m1(x1) - m1(x0), from the MGF route.
    pub delta_hat: f64,
    /// m2(x1) - m2(x0), from the CF route with the principal logarithm.
    pub nabla_hat: f64,
    /// True when |a_n * nabla_hat| stays clear of the branch cut.
    pub branch_ok: bool,
    /// Modulus-deviation diagnostic of the CF ratio, scaled by 1/a_n.
    pub nabla_noise: f64,
    /// Kernel denominator masses (x0 MGF, x1 MGF, x0 CF, x1 CF).
    pub denominators: [f64; 4],
}

/// Principal-value slope read-off: the real part of (-i/a) Log w.
///
/// Returns the slope, whether the branch margin holds, and the
/// modulus-deviation noise proxy | log |w| | / a.
pub fn principal_slope(w: Complex64, a: f64) -> (f64, bool, f64) {
    let slope = w.arg() / a;
    let branch_ok = (a * slope).abs() <= std::f64::consts::PI - BRANCH_MARGIN;
    let noise = w.norm().ln().abs() / a + 1e-9;
    (slope, branch_ok, noise)
}

/// Delta-hat = (1/t_n) log(M-hat1(t_n) / M-hat0(t_n)).
pub fn estimate_delta(
    data: &Dataset,
    x0: &[f64],
    x1: &[f64],
    tuning: &TuningSchedule,
) -> Result<f64> {
    let (lo, hi) = data.z_range();
    let budget = tuning.t_n.abs() * lo.abs().max(hi.abs());
    if budget > 700.0 {
        return Err(Error::OverflowBudget(budget));
    }
    let kernel = tuning.mgf_kernel();
    let m1 = nw_cond_mgf(data, x1, tuning.t_n, &kernel)?;
    let m0 = nw_cond_mgf(data, x0, tuning.t_n, &kernel)?;
    Ok((m1.value - m0.value) / tuning.t_n)
}

/// Nabla-hat via the principal complex logarithm of the double CF ratio.
pub fn estimate_nabla(
    data: &Dataset,
    x0: &[f64],
    x1: &[f64],
    tuning: &TuningSchedule,
) -> Result<(f64, bool, f64)> {
    let kernel = tuning.cf_kernel();
    let (s, a) = (tuning.s_n, tuning.a_n);
    let p1a = nw_cond_cf(data, x1, s + a, &kernel)?.value;
    let p0a = nw_cond_cf(data, x0, s + a, &kernel)?.value;
    let p1 = nw_cond_cf(data, x1, s, &kernel)?.value;
    let p0 = nw_cond_cf(data, x0, s, &kernel)?.value;
    for v in [p1a, p0a, p1, p0] {
        if v.norm() < 1e-12 {
            return Err(Error::DegenerateDenominator { modulus: v.norm(), floor: 1e-12 });
        }
    }
    let w = (p1a / p0a) * (p0 / p1);
    let (slope, branch_ok, noise) = principal_slope(w, a);
    if !branch_ok {
        return Err(Error::BranchAmbiguity((a * slope).abs()));
    }
    Ok((slope, branch_ok, noise))
}

/// Both slopes plus diagnostics.
pub fn estimate_slopes(
    data: &Dataset,
    x0: &[f64],
    x1: &[f64],
    tuning: &TuningSchedule,
) -> Result<SlopeEstimate> {
    let kernel = tuning.mgf_kernel();
    let d0 = nw_cond_mgf(data, x0, tuning.t_n, &kernel)?;
    let d1 = nw_cond_mgf(data, x1, tuning.t_n, &kernel)?;
    let ck = tuning.cf_kernel();
    let c0 = nw_cond_cf(data, x0, tuning.s_n, &ck)?;
    let c1 = nw_cond_cf(data, x1, tuning.s_n, &ck)?;
    let delta_hat = estimate_delta(data, x0, x1, tuning)?;
    let (nabla_hat, branch_ok, nabla_noise) = estimate_nabla(data, x0, x1, tuning)?;
    Ok(SlopeEstimate {
        delta_hat,
        nabla_hat,
        branch_ok,
        nabla_noise,
        denominators: [
            d0.denominator_mass,
            d1.denominator_mass,
            c0.denominator_mass,
            c1.denominator_mass,
        ],
    })
}

/// lambda = (E[z|x1] - E[z|x0] - nabla) / (delta - nabla), clamped with a
/// warning when it leaves (0, 1).
pub fn lambda_from_moments(
    mean_diff: f64,
    delta: f64,
    nabla: f64,
) -> Result<(f64, Option<String>)> {
    let sep = delta - nabla;
    if sep.abs() < SEPARATION_FLOOR {
        return Err(Error::ParallelSlopes { separation: sep.abs(), floor: SEPARATION_FLOOR });
    }
    let raw = (mean_diff - nabla) / sep;
    let clamped = raw.clamp(LAMBDA_CLAMP.0, LAMBDA_CLAMP.1);
    let warning = (clamped != raw)
        .then(|| format!("lambda estimate {raw:.6} clamped to {clamped:.3}"));
    Ok((clamped, warning))
}

pub fn estimate_lambda(
    data: &Dataset,
    x0: &[f64],
    x1: &[f64],
    slopes: &SlopeEstimate,
    tuning: &TuningSchedule,
) -> Result<(f64, Option<String>)> {
    let kernel = tuning.moment_kernel();
    let mean1 = nw_cond_mean(data, x1, &kernel)?.value;
    let mean0 = nw_cond_mean(data, x0, &kernel)?.value;
    lambda_from_moments(mean1 - mean0, slopes.delta_hat, slopes.nabla_hat)
}

/// C-hat = (E[z^2|x0] - E[z^2|x1] + lambda delta^2 + (1-lambda) nabla^2) / 2.
pub fn c_from_moments(m2_x0: f64, m2_x1: f64, delta: f64, nabla: f64, lambda: f64) -> f64 {
    0.5 * (m2_x0 - m2_x1 + lambda * delta * delta + (1.0 - lambda) * nabla * nabla)
}

/// Solve the weighted 2x2 level system
/// `[-delta, -nabla; 1, 1] diag(lambda, 1-lambda) [m1; m2] = [C; E(z|x0)]`.
///
/// With lambda at or beyond the upper clamp the second slot is meaningless
/// and `None` is returned for it; the first level is then E[z|x0].
pub fn levels_from_moments(
    c_hat: f64,
    mean_x0: f64,
    delta: f64,
    nabla: f64,
    lambda: f64,
) -> Result<(f64, Option<f64>)> {
    let sep = delta - nabla;
    if sep.abs() < SEPARATION_FLOOR {
        return Err(Error::ParallelSlopes { separation: sep.abs(), floor: SEPARATION_FLOOR });
    }
    if lambda >= LAMBDA_CLAMP.1 {
        return Ok((mean_x0, None));
    }
    let det = -sep; // determinant of [-delta, -nabla; 1, 1]
    let v1 = (c_hat + nabla * mean_x0) / det;
    let v2 = (-c_hat - delta * mean_x0) / det;
    Ok((v1 / lambda, Some(v2 / (1.0 - lambda))))
}

pub fn estimate_levels(
    data: &Dataset,
    x0: &[f64],
    x1: &[f64],
    slopes: &SlopeEstimate,
    lambda_hat: f64,
    tuning: &TuningSchedule,
) -> Result<(f64, Option<f64>, f64)> {
    let kernel = tuning.moment_kernel();
    let mean0 = nw_cond_mean(data, x0, &kernel)?.value;
    let m2_0 = nw_cond_m2(data, x0, &kernel)?.value;
    let m2_1 = nw_cond_m2(data, x1, &kernel)?.value;
    let c_hat = c_from_moments(m2_0, m2_1, slopes.delta_hat, slopes.nabla_hat, lambda_hat);
    let (m1, m2) = levels_from_moments(c_hat, mean0, slopes.delta_hat, slopes.nabla_hat, lambda_hat)?;
    Ok((m1, m2, c_hat))
}

/// The parameter bundle the CDF series consumes. `delta` and `nabla` are the
/// slopes between the two evaluation points, `m1_x0`/`m2_x0` the levels at
/// the first one.
#[derive(Debug, Clone, Copy)]
pub struct TwoPointParams {
    pub lambda: f64,
    pub delta: f64,
    pub nabla: f64,
    pub m1_x0: f64,
    pub m2_x0: f64,
}

/// The series estimator of F2 over conditional-CDF providers, with the
/// evaluation points swapped internally when delta - nabla < 0 so that the
/// increment of g = m1 - m2 is positive.
pub struct CdfSeries<'a> {
    cdf0: Box<dyn Fn(f64) -> Result<f64> + 'a>,
    cdf1: Box<dyn Fn(f64) -> Result<f64> + 'a>,
    params: TwoPointParams,
    /// Gap delta - nabla after normalisation, always positive.
    sep: f64,
    p: usize,
}

impl<'a> CdfSeries<'a> {
    /// `cdf0`/`cdf1` evaluate F(.|x0) and F(.|x1).
    pub fn new<F0, F1>(cdf0: F0, cdf1: F1, params: TwoPointParams, p: usize) -> Result<Self>
    where
        F0: Fn(f64) -> Result<f64> + 'a,
        F1: Fn(f64) -> Result<f64> + 'a,
    {
        let sep = params.delta - params.nabla;
        if sep.abs() < SEPARATION_FLOOR {
            return Err(Error::ParallelSlopes { separation: sep.abs(), floor: SEPARATION_FLOOR });
        }
        if sep > 0.0 {
            Ok(CdfSeries { cdf0: Box::new(cdf0), cdf1: Box::new(cdf1), params, sep, p })
        } else {
            // Swap roles of the two evaluation points.
            let swapped = TwoPointParams {
                lambda: params.lambda,
                delta: -params.delta,
                nabla: -params.nabla,
                m1_x0: params.m1_x0 + params.delta,
                m2_x0: params.m2_x0 + params.nabla,
            };
            Ok(CdfSeries {
                cdf0: Box::new(cdf1),
                cdf1: Box::new(cdf0),
                params: swapped,
                sep: -sep,
                p,
            })
        }
    }

    /// Largest conditional-CDF argument the series will request for a given z.
    pub fn max_argument(&self, z: f64) -> f64 {
        let pp = self.params;
        let m1_x1 = pp.m1_x0 + pp.delta;
        let g_x0 = pp.m1_x0 - pp.m2_x0;
        z + self.p as f64 * self.sep + (m1_x1 - g_x0).max(pp.m2_x0)
    }

    /// F2-hat(z) = 1 - (1/(1-lambda)) sum_j [F(z + j sep + m1(x1) - g(x0) | x1)
    ///                                        - F(z + j sep + m2(x0) | x0)].
    pub fn f2(&self, z: f64) -> Result<f64> {
        let pp = self.params;
        let m1_x1 = pp.m1_x0 + pp.delta;
        let g_x0 = pp.m1_x0 - pp.m2_x0;
        let mut total = 0.0;
        for j in 0..=self.p {
            let shift = z + j as f64 * self.sep;
            total += (self.cdf1)(shift + m1_x1 - g_x0)? - (self.cdf0)(shift + pp.m2_x0)?;
        }
        Ok(1.0 - total / (1.0 - pp.lambda))
    }

    /// F1-hat(z) = (1/lambda) [F(z + m1(x0) | x0) - (1 - lambda) F2(z + g(x0))].
    pub fn f1(&self, z: f64) -> Result<f64> {
        let pp = self.params;
        let g_x0 = pp.m1_x0 - pp.m2_x0;
        let base = (self.cdf0)(z + pp.m1_x0)?;
        Ok((base - (1.0 - pp.lambda) * self.f2(z + g_x0)?) / pp.lambda)
    }
}

/// Estimated mixture with diagnostics. Component 1 is, by convention, the
/// component extracted by the MGF route.
#[derive(Debug, Clone)]
pub struct MixtureFit {
    pub lambda_hat: f64,
    pub m1_hat_x0: f64,
    /// Absent on the degenerate (lambda clamped at the top) path.
    pub m2_hat_x0: Option<f64>,
    pub c_hat: f64,
    pub slopes: SlopeEstimate,
    pub z_grid: Vec<f64>,
    pub f1_raw: Vec<f64>,
    pub f2_raw: Vec<f64>,
    /// Isotonic unit-interval projections, present when requested.
    pub f1_proj: Option<Vec<f64>>,
    pub f2_proj: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl MixtureFit {
    /// Scalar block followed by the F-grid block, as CSV.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "quantity,value")?;
        writeln!(w, "lambda_hat,{}", self.lambda_hat)?;
        writeln!(w, "delta_hat,{}", self.slopes.delta_hat)?;
        writeln!(w, "nabla_hat,{}", self.slopes.nabla_hat)?;
        writeln!(w, "branch_ok,{}", self.slopes.branch_ok)?;
        writeln!(w, "m1_hat_x0,{}", self.m1_hat_x0)?;
        writeln!(
            w,
            "m2_hat_x0,{}",
            self.m2_hat_x0.map_or("absent".to_string(), |v| v.to_string())
        )?;
        writeln!(w, "c_hat,{}", self.c_hat)?;
        for warning in &self.warnings {
            writeln!(w, "warning,{}", warning.replace(',', ";"))?;
        }
        writeln!(w)?;
        writeln!(w, "z,F1_raw,F1_proj,F2_raw,F2_proj")?;
        for (i, z) in self.z_grid.iter().enumerate() {
            let p1 = self.f1_proj.as_ref().map_or(String::new(), |v| v[i].to_string());
            let p2 = self.f2_proj.as_ref().map_or(String::new(), |v| v[i].to_string());
            writeln!(w, "{z},{},{p1},{},{p2}", self.f1_raw[i], self.f2_raw[i])?;
        }
        Ok(())
    }
}

/// Full estimation pipeline at two evaluation points.
pub fn fit_mixture(
    data: &Dataset,
    x0: &[f64],
    x1: &[f64],
    tuning: &TuningSchedule,
    z_grid: &[f64],
    project: bool,
) -> Result<MixtureFit> {
    if x0 == x1 {
        return Err(Error::Config("evaluation points x0 and x1 must differ".into()));
    }
    let mut warnings = Vec::new();
    let slopes = estimate_slopes(data, x0, x1, tuning)?;
    let sep_hat = slopes.delta_hat - slopes.nabla_hat;
    if sep_hat.abs() < 50.0 * SEPARATION_FLOOR {
        warnings.push(format!(
            "near-parallel slopes: delta - nabla = {sep_hat:.4}; the weight and level \
             estimates divide by this gap"
        ));
    }
    let (lambda_hat, warn) = estimate_lambda(data, x0, x1, &slopes, tuning)?;
    if let Some(wmsg) = warn {
        warnings.push(wmsg);
    }
    if lambda_hat <= LAMBDA_CLAMP.0 {
        warnings.push("lambda at lower clamp: F1 values amplified by 1/lambda".into());
    }
    let (m1, m2, c_hat) = estimate_levels(data, x0, x1, &slopes, lambda_hat, tuning)?;

    let sep = slopes.delta_hat - slopes.nabla_hat;
    let (lo, hi) = data.z_range();
    let params = TwoPointParams {
        lambda: lambda_hat,
        delta: slopes.delta_hat,
        nabla: slopes.nabla_hat,
        m1_x0: m1,
        m2_x0: m2.unwrap_or(m1),
    };
    let kernel = tuning.cdf_kernel();
    let cdf0 = |z: f64| Ok(nw_cond_cdf(data, x0, z, &kernel)?.value);
    let cdf1 = |z: f64| Ok(nw_cond_cdf(data, x1, z, &kernel)?.value);
    let series = CdfSeries::new(cdf0, cdf1, params, tuning.p_n)?;

    // Budget: how far past the sample the series walks the CDF argument.
    let z_top = z_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let reach = series.max_argument(z_top) - hi;
    let slack = SERIES_SLACK * (hi - lo).max(1.0);
    if reach > slack {
        return Err(Error::SeriesBudget { reach, lo, hi });
    }
    if sep < 0.0 {
        warnings.push("delta - nabla negative: evaluation points swapped in the CDF series".into());
    }

    let mut f2_raw = Vec::with_capacity(z_grid.len());
    let mut f1_raw = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        f2_raw.push(series.f2(z)?);
        f1_raw.push(series.f1(z)?);
    }
    let (f1_proj, f2_proj) = if project {
        (
            Some(isotonic_unit_projection(&f1_raw)),
            Some(isotonic_unit_projection(&f2_raw)),
        )
    } else {
        (None, None)
    };

    Ok(MixtureFit {
        lambda_hat,
        m1_hat_x0: m1,
        m2_hat_x0: m2,
        c_hat,
        slopes,
        z_grid: z_grid.to_vec(),
        f1_raw,
        f2_raw,
        f1_proj,
        f2_proj,
        warnings,
    })
}

/// Exact population ingredients fed through the estimator algebra; used by
/// the equivalence tests and the population examples.
pub struct PopulationIngredients<'m> {
    pub model: &'m MixtureModel,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
}

impl<'m> PopulationIngredients<'m> {
    pub fn new(model: &'m MixtureModel, x0: &[f64], x1: &[f64]) -> Self {
        PopulationIngredients { model, x0: x0.to_vec(), x1: x1.to_vec() }
    }

    pub fn true_delta(&self) -> f64 {
        self.model.mean_value(0, &self.x1) - self.model.mean_value(0, &self.x0)
    }

    pub fn true_nabla(&self) -> f64 {
        self.model.mean_value(1, &self.x1) - self.model.mean_value(1, &self.x0)
    }

    pub fn mean_diff(&self) -> f64 {
        self.model.cond_mean(&self.x1) - self.model.cond_mean(&self.x0)
    }

    /// Lambda, levels and C computed from exact moments and true slopes.
    pub fn algebraic_fit(&self) -> Result<(f64, f64, Option<f64>, f64)> {
        let (delta, nabla) = (self.true_delta(), self.true_nabla());
        let (lambda, _) = lambda_from_moments(self.mean_diff(), delta, nabla)?;
        let c = c_from_moments(
            self.model.cond_m2(&self.x0),
            self.model.cond_m2(&self.x1),
            delta,
            nabla,
            lambda,
        );
        let (m1, m2) = levels_from_moments(c, self.model.cond_mean(&self.x0), delta, nabla, lambda)?;
        Ok((lambda, m1, m2, c))
    }

    /// The CDF series over exact conditional CDFs.
    pub fn series(&self, p: usize) -> Result<CdfSeries<'_>> {
        let (lambda, m1, m2, _) = self.algebraic_fit()?;
        let params = TwoPointParams {
            lambda,
            delta: self.true_delta(),
            nabla: self.true_nabla(),
            m1_x0: m1,
            m2_x0: m2.unwrap_or(m1),
        };
        let model = self.model;
        let x0 = self.x0.clone();
        let x1 = self.x1.clone();
        CdfSeries::new(
            move |z| Ok(model.cond_cdf(z, &x0)),
            move |z| Ok(model.cond_cdf(z, &x1)),
            params,
            p,
        )
    }
}
