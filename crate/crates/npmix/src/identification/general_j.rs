//! Identification machinery for mixtures with an arbitrary number of
//! components: the nested-differentiation recursion that successively purges
//! components from the conditional MGF, slope recovery from its
//! log-derivative limits, weight/level/MGF recovery from small linear
//! systems, and detection of the number of components.
//!
//! Everything an estimator could observe enters through two primitives only:
//! t -> log M(t|x) and finite differencing in the first covariate. Slope
//! differences feeding the recursion are themselves recovered from lower
//! recursion levels, so the whole pipeline runs off observables; the analytic
//! component functions are used only for precondition checks and by the
//! independent representation oracle that the tests compare against.
//!
//! Numerical regime. The recursion at level k exposes a signal that sits a
//! factor exp(t * gap) below the component it just purged, so the usable
//! t-window is bounded: rungs of the log-derivative ladder are kept only
//! while the recursion value stays distinguishable from differencing noise,
//! and the tail the moderate-t window leaves behind is removed by
//! extrapolation. Two contamination shapes occur — geometric decay from
//! not-yet-purged components and a rational 1/(t + c) tail from the
//! t-polynomial factors — so both an Aitken step and an exact three-point
//! rational fit are computed and cross-validated on two ladder windows.
//! Recovered slope functions are stored as low-order polynomial fits over a
//! node window rather than pointwise rules: the next differentiation level
//! would amplify any pointwise extrapolation noise catastrophically.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{MixtureModel, Weights};
use crate::numeric::{central_deriv, central_deriv_scaled, solve_dense, Scaled};

use super::two_component::{MgfTable, DET_FLOOR};

/// Nested finite-difference configuration: step at depth one, growth per
/// additional nesting depth, and the nesting cap.
#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    pub base_step: f64,
    pub step_growth: f64,
    pub k_max: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { base_step: 1e-3, step_growth: 10.0, k_max: 4 }
    }
}

impl FdConfig {
    fn step(&self, x1: f64, depth: usize) -> f64 {
        self.base_step * (1.0 + x1.abs()) * self.step_growth.powi(depth as i32 - 1)
    }
}

/// Tuning for the recursion and the slope recovery built on it.
#[derive(Debug, Clone, Copy)]
pub struct QConfig {
    /// Steps for recursion values delivered to callers.
    pub fd: FdConfig,
    /// Steps for the internal slope-recovery and detection path. A larger
    /// first-level step buys an order of magnitude less rounding noise in
    /// the log-derivatives; the gentler growth keeps the outer levels inside
    /// their convergence window.
    pub slope_fd: FdConfig,
    /// Argument of the first-component slope limit.
    pub slope_t: f64,
    /// Candidate rungs of the log-derivative ladder: start, spacing, count.
    pub dlog_t_start: f64,
    pub dlog_t_step: f64,
    pub dlog_rungs: usize,
    /// Step of the central difference in t.
    pub dlog_step: f64,
    /// Minimum recursion signal-to-noise for a rung to enter the ladder.
    pub rung_snr: f64,
    /// Signal-to-noise below which `q_recursion` reports ill-conditioning.
    pub min_snr: f64,
    /// Signal-to-noise above which a level counts as nonzero in `detect_j`.
    pub zero_tol: f64,
    /// Minimum pairwise gap of the component means on the working window.
    pub mean_gap_floor: f64,
    /// Nodes of the slope-fit window and the fitted polynomial degree.
    pub slope_nodes: usize,
    pub slope_degree: usize,
    /// Margin of the slope-fit window beyond the two working points,
    /// relative to 1 + |x_a|.
    pub slope_window_margin: f64,
}

impl Default for QConfig {
    fn default() -> Self {
        QConfig {
            fd: FdConfig::default(),
            slope_fd: FdConfig { base_step: 5e-3, step_growth: 4.0, k_max: 4 },
            slope_t: 40.0,
            dlog_t_start: 2.0,
            dlog_t_step: 0.75,
            dlog_rungs: 8,
            dlog_step: 0.25,
            rung_snr: 1e3,
            min_snr: 10.0,
            zero_tol: 5.0,
            mean_gap_floor: 0.1,
            slope_nodes: 13,
            slope_degree: 3,
            slope_window_margin: 0.1,
        }
    }
}

impl QConfig {
    fn candidate_rungs(&self) -> Vec<f64> {
        (0..self.dlog_rungs.max(3))
            .map(|i| self.dlog_t_start + i as f64 * self.dlog_t_step)
            .collect()
    }
}

/// Aitken acceleration of the last three values, assuming a geometric tail.
fn aitken_limit(ts: &[f64], vs: &[f64]) -> Option<f64> {
    let n = vs.len();
    if n < 3 {
        return None;
    }
    let _ = ts;
    let (v0, v1, v2) = (vs[n - 3], vs[n - 2], vs[n - 1]);
    let denom = v2 - 2.0 * v1 + v0;
    if denom.abs() < 1e-13 * (1.0 + v2.abs()) {
        return None;
    }
    let accel = v2 - (v2 - v1) * (v2 - v1) / denom;
    if (accel - v2).abs() > (v1 - v0).abs() + (v2 - v1).abs() {
        return None;
    }
    Some(accel)
}

/// Exact limit of the model v(t) = L + kappa / (t + tau) through the last
/// three points (a rational tail is what the t-polynomial recursion factors
/// leave in the log-derivative).
fn rational_limit(ts: &[f64], vs: &[f64]) -> Option<f64> {
    let n = vs.len();
    if n < 3 {
        return None;
    }
    let (t0, t1, t2) = (ts[n - 3], ts[n - 2], ts[n - 1]);
    let (v0, v1, v2) = (vs[n - 3], vs[n - 2], vs[n - 1]);
    let d1 = v1 - v0;
    let d2 = v2 - v1;
    if d1.abs() < 1e-15 * (1.0 + v2.abs()) || d2.abs() < 1e-15 * (1.0 + v2.abs()) {
        return None;
    }
    // d2/d1 = (t0 + tau) / (t2 + tau)
    let rho = d2 / d1 * (t1 - t0) / (t2 - t1);
    if !(0.0 < rho && rho < 1.0) {
        return None;
    }
    let tau = (t0 - rho * t2) / (rho - 1.0);
    if !(t2 + tau).is_finite() || t0 + tau <= 0.0 {
        return None;
    }
    let kappa = -d2 * (t1 + tau) * (t2 + tau) / (t2 - t1);
    let limit = v2 - kappa / (t2 + tau);
    if (limit - v2).abs() > 4.0 * ((v1 - v0).abs() + (v2 - v1).abs()) {
        return None;
    }
    Some(limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LadderMethod {
    Plain,
    Aitken,
    Rational,
    /// Iterated Aitken: removes two decay modes, needs five rungs.
    Shanks2,
}

/// One Aitken sweep over every consecutive triple.
fn aitken_sweep(vs: &[f64]) -> Option<Vec<f64>> {
    if vs.len() < 3 {
        return None;
    }
    let mut out = Vec::with_capacity(vs.len() - 2);
    for w in vs.windows(3) {
        let denom = w[2] - 2.0 * w[1] + w[0];
        if denom.abs() < 1e-13 * (1.0 + w[2].abs()) {
            return None;
        }
        out.push(w[2] - (w[2] - w[1]) * (w[2] - w[1]) / denom);
    }
    Some(out)
}

fn shanks2_limit(_ts: &[f64], vs: &[f64]) -> Option<f64> {
    if vs.len() < 5 {
        return None;
    }
    let first = aitken_sweep(&vs[vs.len() - 5..])?;
    let second = aitken_sweep(&first)?;
    let limit = *second.last().unwrap();
    let n = vs.len();
    if (limit - vs[n - 1]).abs() > 4.0 * ((vs[n - 2] - vs[n - 3]).abs() + (vs[n - 1] - vs[n - 2]).abs())
    {
        return None;
    }
    Some(limit)
}

/// One extrapolation method applied to a ladder, self-validated by running
/// it on the full window and on the window with the last rung dropped.
/// Returns (limit, spread between the two windows).
fn method_limit(method: LadderMethod, ts: &[f64], vs: &[f64]) -> Option<(f64, f64)> {
    let n = vs.len();
    let apply = |ts: &[f64], vs: &[f64]| -> Option<f64> {
        match method {
            LadderMethod::Plain => vs.last().copied(),
            LadderMethod::Aitken => aitken_limit(ts, vs),
            LadderMethod::Rational => rational_limit(ts, vs),
            LadderMethod::Shanks2 => shanks2_limit(ts, vs),
        }
    };
    let full = apply(ts, vs)?;
    if n >= 4 {
        let part = apply(&ts[..n - 1], &vs[..n - 1])?;
        Some((full, (full - part).abs()))
    } else if n >= 2 {
        Some((full, (vs[n - 1] - vs[n - 2]).abs()))
    } else {
        Some((full, f64::INFINITY))
    }
}

/// Extrapolated limit of a ladder with a self-validated method choice.
/// Returns (limit, spread).
fn ladder_limit(ts: &[f64], vs: &[f64]) -> (f64, f64) {
    let mut best = method_limit(LadderMethod::Plain, ts, vs).expect("plain always applies");
    for method in [LadderMethod::Aitken, LadderMethod::Rational, LadderMethod::Shanks2] {
        if let Some(cand) = method_limit(method, ts, vs) {
            if cand.1 < best.1 {
                best = cand;
            }
        }
    }
    best
}

/// A memoised scalar function of the first covariate.
struct Cached<'m> {
    f: Box<dyn Fn(f64) -> f64 + 'm>,
    cache: RefCell<HashMap<u64, f64>>,
}

impl<'m> Cached<'m> {
    fn new(f: impl Fn(f64) -> f64 + 'm) -> Rc<Self> {
        Rc::new(Cached { f: Box::new(f), cache: RefCell::new(HashMap::new()) })
    }

    fn get(&self, x1: f64) -> f64 {
        let key = x1.to_bits();
        if let Some(v) = self.cache.borrow().get(&key) {
            return *v;
        }
        let v = (self.f)(x1);
        self.cache.borrow_mut().insert(key, v);
        v
    }
}

/// A recovered slope function m_j(., rest) - m_j(x_b): the raw first-level
/// limit plus a cumulative polynomial increment (centred at the base point)
/// for the higher levels. Polynomial storage keeps the function smooth; a
/// pointwise rule would hand its extrapolation noise to the next
/// differentiation level multiplied by 1/h.
enum SlopeShape<'m> {
    Raw(Rc<Cached<'m>>),
    Analytic(Box<dyn Fn(f64) -> f64 + 'm>, Box<dyn Fn(f64) -> f64 + 'm>),
}

struct SlopeRepr<'m> {
    shape: SlopeShape<'m>,
    poly: Vec<f64>,
    centre: f64,
    err: f64,
    /// Uncertainty of the first derivative of the recovered part.
    err_d1: f64,
}

impl SlopeRepr<'_> {
    fn value(&self, x1: f64) -> f64 {
        let base = match &self.shape {
            SlopeShape::Raw(c) => c.get(x1),
            SlopeShape::Analytic(f, _) => f(x1),
        };
        let u = x1 - self.centre;
        base + self.poly.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    fn d1(&self, x1: f64, step: f64) -> f64 {
        let base = match &self.shape {
            SlopeShape::Raw(c) => {
                let c = Rc::clone(c);
                central_deriv(move |u| c.get(u), x1, step).value
            }
            SlopeShape::Analytic(_, g) => g(x1),
        };
        let u = x1 - self.centre;
        let mut dp = 0.0;
        for (i, &c) in self.poly.iter().enumerate().skip(1) {
            dp += c * i as f64 * u.powi(i as i32 - 1);
        }
        base + dp
    }
}

/// Component mean functions as seen by the recursion factors: either the
/// analytic means of a model (representation side) or recovered slope
/// functions (observable side). Only differences of first derivatives enter
/// the factors, so the two agree up to additive constants.
enum Funcs<'a, 'm> {
    Model { model: &'m MixtureModel, x_rest: &'a [f64] },
    Slopes(&'a [Rc<SlopeRepr<'m>>]),
}

impl Funcs<'_, '_> {
    /// First derivative of the j-th (1-based) function at x1.
    fn d1(&self, j: usize, x1: f64, fd: &FdConfig) -> f64 {
        match self {
            Funcs::Model { model, x_rest } => {
                let mut x = Vec::with_capacity(x_rest.len() + 1);
                x.push(x1);
                x.extend_from_slice(x_rest);
                model.components()[j - 1].mean.gradient(&x)[0]
            }
            Funcs::Slopes(s) => s[j - 1].d1(x1, fd.step(x1, 1)),
        }
    }
}

/// The polynomial factors of the recursion, built level by level:
/// level 2 is t (d1 m_j - d1 m_1); each further level divides by the
/// diagonal factor, differentiates the ratio in x1 and adds the slope term.
fn r_factor(funcs: &Funcs, k: usize, j: usize, t: f64, x1: f64, fd: &FdConfig) -> f64 {
    if k == 2 {
        return t * (funcs.d1(j, x1, fd) - funcs.d1(1, x1, fd));
    }
    let ratio = |u: f64| {
        r_factor(funcs, k - 1, j, t, u, fd) / r_factor(funcs, k - 1, k - 1, t, u, fd)
    };
    let d_ratio = central_deriv(ratio, x1, fd.step(x1, (k - 2).max(1))).value;
    d_ratio + t * ratio(x1) * (funcs.d1(j, x1, fd) - funcs.d1(k - 1, x1, fd))
}

/// Sum of log-scaled terms on a common scale.
fn scaled_sum(terms: &[Scaled]) -> Scaled {
    let c = terms
        .iter()
        .filter(|t| t.frac != 0.0)
        .map(|t| t.ln_abs())
        .fold(f64::NEG_INFINITY, f64::max);
    if c == f64::NEG_INFINITY {
        return Scaled::new(0.0, 0.0, 0.0);
    }
    let mut frac = 0.0;
    let mut err = 0.0;
    for t in terms {
        let shift = (t.ln_scale - c).exp();
        frac += t.frac * shift;
        err += t.err * shift;
    }
    Scaled::new(c, frac, err)
}

/// Independent reference evaluation of the recursion output from the true
/// mixture ingredients: Q_k = sum_{j >= k} lambda_j R_k^j(t, x_a)
/// exp(t [m_j(x_a) - slope_{k-1}]) M_j(t).
pub fn q_representation(
    model: &MixtureModel,
    x_a: &[f64],
    x_b: &[f64],
    k: usize,
    t: f64,
    fd: &FdConfig,
) -> Result<Scaled> {
    let lambda = match model.weights() {
        Weights::Constant(w) => w.clone(),
        Weights::Covariate(_) => {
            return Err(Error::Config("the recursion requires constant weights".into()))
        }
    };
    let j_total = model.n_components();
    if !(2..=j_total).contains(&k) {
        return Err(Error::Config(format!("representation needs 2 <= k <= {j_total}")));
    }
    let x_rest = &x_a[1..];
    let funcs = Funcs::Model { model, x_rest };
    let slope_prev = model.mean_value(k - 2, x_a) - model.mean_value(k - 2, x_b);
    let mut terms = Vec::new();
    for j in k..=j_total {
        let ln = lambda[j - 1].ln()
            + t * (model.mean_value(j - 1, x_a) - slope_prev)
            + model.components()[j - 1].error.log_mgf(t)?;
        let frac = r_factor(&funcs, k, j, t, x_a[0], fd);
        terms.push(Scaled::new(ln, frac, 0.0));
    }
    Ok(scaled_sum(&terms))
}

/// Observable-side recursion engine at a pair of points differing in the
/// first covariate only.
pub struct QMachine<'m> {
    model: &'m MixtureModel,
    x_rest: Vec<f64>,
    x_a1: f64,
    x_b1: f64,
    cfg: QConfig,
    /// Recovered slope functions, 1-based component order, grown level by
    /// level.
    slopes: Vec<Rc<SlopeRepr<'m>>>,
    /// Stabilisation residuals attached to each recovered slope.
    residuals: Vec<f64>,
}

impl<'m> QMachine<'m> {
    pub fn new(model: &'m MixtureModel, x_a: &[f64], x_b: &[f64], cfg: QConfig) -> Result<Self> {
        if matches!(model.weights(), Weights::Covariate(_)) {
            return Err(Error::Config("the recursion requires constant weights".into()));
        }
        if x_a.len() != model.covariate_dim() || x_b.len() != x_a.len() {
            return Err(Error::Config("evaluation point dimensions do not match".into()));
        }
        if x_a[1..] != x_b[1..] {
            return Err(Error::Config(
                "the two points may differ in the first covariate only".into(),
            ));
        }
        if x_a[0] == x_b[0] {
            return Err(Error::Config("evaluation points must differ".into()));
        }
        for c in model.components() {
            let (lo, hi) = c.error.mgf_domain();
            if lo != f64::NEG_INFINITY || hi != f64::INFINITY {
                return Err(Error::Domain(
                    "the recursion requires component MGFs on the whole line".into(),
                ));
            }
        }
        let mut machine = QMachine {
            model,
            x_rest: x_a[1..].to_vec(),
            x_a1: x_a[0],
            x_b1: x_b[0],
            cfg,
            slopes: Vec::new(),
            residuals: Vec::new(),
        };
        machine.push_first_slope();
        Ok(machine)
    }

    /// Bypass slope recovery and take the slope functions from the model's
    /// analytic means. Useful for isolating the differentiation error of the
    /// recursion itself from the recovery error of its slope inputs.
    pub fn with_analytic_slopes(
        model: &'m MixtureModel,
        x_a: &[f64],
        x_b: &[f64],
        cfg: QConfig,
        levels: usize,
    ) -> Result<Self> {
        let mut machine = Self::new(model, x_a, x_b, cfg)?;
        machine.slopes.clear();
        machine.residuals.clear();
        let x_rest = machine.x_rest.clone();
        let x_b_full = machine.full_x(machine.x_b1);
        for j in 0..levels.min(model.n_components()) {
            let base = model.mean_value(j, &x_b_full);
            let rest_v = x_rest.clone();
            let value = move |x1: f64| {
                let mut x = Vec::with_capacity(rest_v.len() + 1);
                x.push(x1);
                x.extend_from_slice(&rest_v);
                model.mean_value(j, &x) - base
            };
            let rest_g = x_rest.clone();
            let grad = move |x1: f64| {
                let mut x = Vec::with_capacity(rest_g.len() + 1);
                x.push(x1);
                x.extend_from_slice(&rest_g);
                model.components()[j].mean.gradient(&x)[0]
            };
            machine.slopes.push(Rc::new(SlopeRepr {
                shape: SlopeShape::Analytic(Box::new(value), Box::new(grad)),
                poly: Vec::new(),
                centre: machine.x_a1,
                err: 1e-15,
                err_d1: 1e-15,
            }));
            machine.residuals.push(0.0);
        }
        Ok(machine)
    }

    /// Ordering preconditions across the working window: strictly decreasing
    /// means with a minimum gap, and distinct first derivatives.
    pub fn check_orderings(&self) -> Result<()> {
        let j = self.model.n_components();
        let lo = self.x_a1.min(self.x_b1);
        let hi = self.x_a1.max(self.x_b1);
        for i in 0..=10 {
            let x1 = lo + (hi - lo) * i as f64 / 10.0;
            let x = self.full_x(x1);
            for a in 0..j {
                for b in (a + 1)..j {
                    let gap = self.model.mean_value(a, &x) - self.model.mean_value(b, &x);
                    if gap < self.cfg.mean_gap_floor {
                        return Err(Error::Config(format!(
                            "component means must be strictly decreasing on the window \
                             with gap > {}: m{}-m{} = {gap} at x1 = {x1}",
                            self.cfg.mean_gap_floor,
                            a + 1,
                            b + 1
                        )));
                    }
                }
            }
            let d1: Vec<f64> = (0..j)
                .map(|i| self.model.components()[i].mean.gradient(&x)[0])
                .collect();
            for a in 0..j {
                for b in (a + 1)..j {
                    if (d1[a] - d1[b]).abs() < 1e-6 {
                        return Err(Error::Config(format!(
                            "first derivatives of m{} and m{} coincide at x1 = {x1}",
                            a + 1,
                            b + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn full_x(&self, x1: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.x_rest.len() + 1);
        x.push(x1);
        x.extend_from_slice(&self.x_rest);
        x
    }

    fn log_mgf(&self, t: f64, x1: f64) -> f64 {
        self.model
            .log_cond_mgf(t, &self.full_x(x1))
            .expect("entire MGF domain checked at construction")
    }

    fn push_first_slope(&mut self) {
        let model = self.model;
        let x_rest = self.x_rest.clone();
        let t = self.cfg.slope_t;
        let base = self.log_mgf(t, self.x_b1);
        let f = move |x1: f64| {
            let mut x = Vec::with_capacity(x_rest.len() + 1);
            x.push(x1);
            x.extend_from_slice(&x_rest);
            (model.log_cond_mgf(t, &x).expect("domain checked") - base) / t
        };
        // Residual of the slope limit at the base point.
        let v1 = f(self.x_a1);
        let base2 = self.log_mgf(2.0 * t, self.x_b1);
        let v2 = (self.log_mgf(2.0 * t, self.x_a1) - base2) / (2.0 * t);
        let residual = (v2 - v1).abs();
        self.slopes.push(Rc::new(SlopeRepr {
            shape: SlopeShape::Raw(Cached::new(f)),
            poly: Vec::new(),
            centre: self.x_a1,
            err: residual.max(1e-14),
            err_d1: 1e-12,
        }));
        self.residuals.push(residual);
    }

    /// Number of slope levels recovered so far.
    pub fn levels(&self) -> usize {
        self.slopes.len()
    }

    /// Recovered slope difference m_j(x_a) - m_j(x_b) for 1-based j.
    pub fn slope(&self, j: usize) -> f64 {
        self.slopes[j - 1].value(self.x_a1)
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Evaluate the recursion at level k (k >= 2) as a log-scaled value.
    /// Requires k-2 recovered slope levels beyond the first.
    pub fn q(&self, k: usize, x1: f64, t: f64) -> Result<Scaled> {
        if k < 2 || k > self.cfg.fd.k_max {
            return Err(Error::Config(format!(
                "recursion level {k} outside the supported range 2..={}",
                self.cfg.fd.k_max
            )));
        }
        if self.slopes.len() < k - 1 {
            return Err(Error::IllConditioned(format!(
                "level {k} needs {} recovered slopes, have {}",
                k - 1,
                self.slopes.len()
            )));
        }
        let fd = self.cfg.fd;
        Ok(self.q_impl(k, x1, t, &fd))
    }

    fn q_impl(&self, k: usize, x1: f64, t: f64, fd: &FdConfig) -> Scaled {
        if k == 2 {
            let s1 = Rc::clone(&self.slopes[0]);
            let integrand = |u: f64| {
                let ln = -t * s1.value(u) + self.log_mgf(t, u);
                Scaled::new(ln, 1.0, 1e-13)
            };
            return central_deriv_scaled(integrand, x1, fd.step(x1, 1));
        }
        let s_hi = Rc::clone(&self.slopes[k - 2]);
        let s_lo = Rc::clone(&self.slopes[k - 3]);
        let funcs_slice = &self.slopes[..k - 1];
        // Recovered-slope errors are smooth over the stencil by construction
        // (polynomial increments), so they bias the level rather than feed
        // the noise the outer difference amplifies; the error estimate
        // carries only rounding and propagated differencing noise.
        let u_fn = |u: f64| {
            let q = self.q_impl(k - 1, u, t, fd);
            let funcs = Funcs::Slopes(funcs_slice);
            let r = r_factor(&funcs, k - 1, k - 1, t, u, fd);
            let ln = q.ln_scale - t * (s_hi.value(u) - s_lo.value(u));
            Scaled::new(ln, q.frac / r, q.err / r.abs())
        };
        let mut out = central_deriv_scaled(u_fn, x1, fd.step(x1, k - 1));
        // Smooth slope-fit errors bias the integrand by a factor whose
        // x-slope the outer derivative picks up as a spurious signal; the
        // error estimate carries that floor so downstream logic can tell a
        // genuine next component from slope-recovery artifacts.
        let funcs = Funcs::Slopes(funcs_slice);
        let d1_gap = (funcs.d1(k - 1, x1, fd) - funcs.d1(k - 2, x1, fd)).abs().max(1e-6);
        let d1_err: f64 = s_hi.err_d1 + s_lo.err_d1;
        out.err += t.abs() * d1_err + d1_err / d1_gap;
        out
    }

    /// d/dt log |Q_k| at (x1, t), via a Richardson central difference in t
    /// on the slope-path steps.
    fn dlog_q_dt(&self, k: usize, x1: f64, t: f64) -> f64 {
        let fd = self.cfg.slope_fd;
        central_deriv(|u| self.q_impl(k, x1, u, &fd).ln_abs(), t, self.cfg.dlog_step).value
    }

    /// Ladder rungs on which level k carries signal at both working points.
    fn usable_rungs(&self, k: usize) -> Vec<f64> {
        let fd = self.cfg.slope_fd;
        let mut kept = Vec::new();
        for &t in &self.cfg.candidate_rungs() {
            let snr_a = self.q_impl(k, self.x_a1, t, &fd).snr();
            let snr_b = self.q_impl(k, self.x_b1, t, &fd).snr();
            if snr_a.min(snr_b) >= self.cfg.rung_snr {
                kept.push(t);
            }
        }
        if kept.len() < 2 {
            // Fall back to the two lowest candidates: small t maximises the
            // distance to the purged component's scale.
            kept = self.cfg.candidate_rungs().into_iter().take(2).collect();
        }
        kept
    }

    /// Recover the next slope level from the log-derivative limit of the
    /// level-k ratio: slope_k = slope_{k-1} + lim_t d/dt log(Q_k(x)/Q_k(x_b)),
    /// fitted as a polynomial increment over the working window.
    pub fn recover_next_slope(&mut self) -> Result<()> {
        let k = self.slopes.len() + 1;
        if k > self.cfg.slope_fd.k_max {
            return Err(Error::Config(format!("slope level {k} beyond the nesting cap")));
        }
        let rungs = self.usable_rungs(k);
        let base: Vec<f64> = rungs.iter().map(|&t| self.dlog_q_dt(k, self.x_b1, t)).collect();

        // Node window covering both points plus the stencils that the next
        // level will evaluate; Chebyshev spacing keeps the least-squares
        // polynomial from oscillating at the edges, where its derivative
        // would otherwise corrupt the next level.
        let lo = self.x_a1.min(self.x_b1);
        let hi = self.x_a1.max(self.x_b1);
        let margin = self.cfg.slope_window_margin * (1.0 + self.x_a1.abs());
        let (wlo, whi) = (lo - margin, hi + margin);
        let n_nodes = self.cfg.slope_nodes.max(4);
        let mut nodes = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let theta = std::f64::consts::PI * (2.0 * i as f64 + 1.0) / (2.0 * n_nodes as f64);
            nodes.push(0.5 * (wlo + whi) + 0.5 * (whi - wlo) * theta.cos());
        }

        let mut increments = Vec::with_capacity(nodes.len() + 1);
        let mut spread_at_a = 0.0;
        let mut nearest_a = f64::INFINITY;
        for &node in &nodes {
            let diffs: Vec<f64> = rungs
                .iter()
                .zip(&base)
                .map(|(&t, b)| self.dlog_q_dt(k, node, t) - b)
                .collect();
            let (limit, spread) = ladder_limit(&rungs, &diffs);
            increments.push((node, limit, spread));
            if (node - self.x_a1).abs() < nearest_a {
                nearest_a = (node - self.x_a1).abs();
                spread_at_a = spread;
            }
        }
        // The increment vanishes at the base point by construction.
        increments.push((self.x_b1, 0.0, 0.0));

        // Spread-weighted least-squares polynomial fit of the increment
        // about the centre.
        let degree = self.cfg.slope_degree.min(increments.len().saturating_sub(2)).max(1);
        let rows = increments.len();
        // Cap the weight ratio: wildly uneven weights make the fitted
        // polynomial interpolate its best nodes and oscillate elsewhere.
        let spread_floor = increments
            .iter()
            .map(|(_, _, s)| *s)
            .fold(0.0_f64, f64::max)
            .mul_add(0.01, 1e-12);
        let mut design = DMatrix::zeros(rows, degree + 1);
        let mut rhs = DVector::zeros(rows);
        for (r, (node, value, spread)) in increments.iter().enumerate() {
            let u = node - self.x_a1;
            let w = 1.0 / (spread + spread_floor);
            for c in 0..=degree {
                design[(r, c)] = w * u.powi(c as i32);
            }
            rhs[r] = w * value;
        }
        let svd = design.clone().svd(true, true);
        let coef = svd
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::IllConditioned(format!("slope fit: {e}")))?;
        let scaled_residual = (&design * &coef - &rhs).abs();
        // Derivative-error proxy from the core of the window only: the edge
        // nodes are there for support and may be much noisier.
        let mut core_residuals: Vec<f64> = increments
            .iter()
            .enumerate()
            .filter(|(_, (node, _, _))| (lo..=hi).contains(node))
            .map(|(r, (_, _, spread))| scaled_residual[r] * (spread + spread_floor))
            .collect();
        core_residuals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let core_residual = core_residuals.get(core_residuals.len() / 2).copied().unwrap_or(0.0);
        let fit_residual = increments
            .iter()
            .enumerate()
            .map(|(r, (_, _, spread))| scaled_residual[r] * (spread + spread_floor))
            .fold(0.0_f64, f64::max);

        let prev = Rc::clone(&self.slopes[k - 2]);
        let mut poly = prev.poly.clone();
        poly.resize(poly.len().max(degree + 1), 0.0);
        for (i, c) in coef.iter().enumerate() {
            poly[i] += c;
        }
        let residual = spread_at_a.max(fit_residual);
        let shape = match &prev.shape {
            SlopeShape::Raw(c) => SlopeShape::Raw(Rc::clone(c)),
            SlopeShape::Analytic(..) => {
                return Err(Error::Config(
                    "cannot extend analytic slopes with recovered levels".into(),
                ))
            }
        };
        let window = whi - wlo;
        let err_d1 = (core_residual + spread_at_a) / (0.25 * window) + prev.err_d1;
        self.slopes.push(Rc::new(SlopeRepr {
            shape,
            poly,
            centre: self.x_a1,
            err: (residual + prev.err).max(1e-14),
            err_d1: err_d1.max(1e-12),
        }));
        self.residuals.push(residual);
        Ok(())
    }

    /// Recursion value on the slope-path steps with its noise diagnostics;
    /// used by the detection logic.
    fn q_detect(&self, k: usize, t: f64) -> Scaled {
        let fd = self.cfg.slope_fd;
        self.q_impl(k, self.x_a1, t, &fd)
    }

    /// Slope of the smallest-mean component from the (t -> -inf) tail of the
    /// MGF ratio: the mirror of the first-component limit. Returns false (and
    /// recovers nothing) when the tail does not stabilise.
    pub fn recover_last_slope_via_negative_tail(&mut self) -> bool {
        let model = self.model;
        let x_rest = self.x_rest.clone();
        let t = -self.cfg.slope_t;
        let base = self.log_mgf(t, self.x_b1);
        let f = move |x1: f64| {
            let mut x = Vec::with_capacity(x_rest.len() + 1);
            x.push(x1);
            x.extend_from_slice(&x_rest);
            (model.log_cond_mgf(t, &x).expect("domain checked") - base) / t
        };
        let v1 = f(self.x_a1);
        let base2 = self.log_mgf(2.0 * t, self.x_b1);
        let v2 = (self.log_mgf(2.0 * t, self.x_a1) - base2) / (2.0 * t);
        let residual = (v2 - v1).abs();
        if residual > 1e-6 * (1.0 + v1.abs()) {
            return false;
        }
        // The opposite tail must expose a component not seen yet; with very
        // unequal MGF tails (e.g. dominant variance) the same component rules
        // both directions and the nested route has to take over.
        for s in &self.slopes {
            if (s.value(self.x_a1) - v1).abs() < 1e-4 * (1.0 + v1.abs()) {
                return false;
            }
        }
        self.slopes.push(Rc::new(SlopeRepr {
            shape: SlopeShape::Raw(Cached::new(f)),
            poly: Vec::new(),
            centre: self.x_a1,
            err: residual.max(1e-14),
            err_d1: 1e-12,
        }));
        self.residuals.push(residual);
        true
    }

}

/// Tabulated recursion values.
#[derive(Debug, Clone)]
pub struct QTables {
    pub t_grid: Vec<f64>,
    /// Levels actually computed (2..=k_max).
    pub k_levels: Vec<usize>,
    /// `values[k_index][t_index]`.
    pub values: Vec<Vec<Scaled>>,
}

/// Run the recursion up to `k_max` on a t-grid, recovering intermediate
/// slopes from the tables themselves. Errors with an ill-conditioning report
/// when the requested level has no significant digits left.
pub fn q_recursion(
    model: &MixtureModel,
    x_a: &[f64],
    x_b: &[f64],
    k_max: usize,
    t_grid: &[f64],
    cfg: &QConfig,
) -> Result<QTables> {
    let mut machine = QMachine::new(model, x_a, x_b, *cfg)?;
    machine.check_orderings()?;
    let mut tables = QTables { t_grid: t_grid.to_vec(), k_levels: Vec::new(), values: Vec::new() };
    for k in 2..=k_max {
        while machine.levels() < k - 1 {
            machine.recover_next_slope()?;
        }
        let mut row = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            row.push(machine.q(k, x_a[0], t)?);
        }
        if k == k_max {
            let best = row.iter().map(Scaled::snr).fold(0.0, f64::max);
            if best < cfg.min_snr {
                return Err(Error::IllConditioned(format!(
                    "level {k} signal-to-noise {best:.2} below {}",
                    cfg.min_snr
                )));
            }
        }
        tables.k_levels.push(k);
        tables.values.push(row);
    }
    Ok(tables)
}

/// Recovered slope differences m_j(x_a) - m_j(x_b) for j = 1..=j_levels,
/// with their stabilisation residuals.
#[derive(Debug, Clone)]
pub struct SlopeRecovery {
    pub slopes: Vec<f64>,
    pub residuals: Vec<f64>,
}

pub fn slope_recovery_j(
    model: &MixtureModel,
    x_a: &[f64],
    x_b: &[f64],
    j_levels: usize,
    cfg: &QConfig,
) -> Result<SlopeRecovery> {
    if j_levels > model.n_components() {
        return Err(Error::Config(format!(
            "cannot recover {j_levels} slopes from a {}-component model",
            model.n_components()
        )));
    }
    let mut machine = QMachine::new(model, x_a, x_b, *cfg)?;
    machine.check_orderings()?;
    while machine.levels() < j_levels {
        // The smallest-mean component is read off the opposite MGF tail when
        // that tail stabilises; the nested route stays as the fallback.
        if machine.levels() == j_levels - 1
            && j_levels == model.n_components()
            && j_levels >= 2
            && machine.recover_last_slope_via_negative_tail()
        {
            break;
        }
        machine.recover_next_slope()?;
    }
    Ok(SlopeRecovery {
        slopes: (1..=j_levels).map(|j| machine.slope(j)).collect(),
        residuals: machine.residuals()[..j_levels].to_vec(),
    })
}

/// Number-of-components detection: the largest level (up to `j_max`) whose
/// recursion output is distinguishable from finite-difference noise on the
/// t-grid; level one is the conditional MGF itself and always present.
pub fn detect_j(
    model: &MixtureModel,
    x_a: &[f64],
    x_b: &[f64],
    j_max: usize,
    t_grid: &[f64],
    cfg: &QConfig,
) -> Result<(usize, bool)> {
    let mut machine = QMachine::new(model, x_a, x_b, *cfg)?;
    let cap = j_max.min(cfg.slope_fd.k_max);
    for j in 2..=cap {
        let mut best = 0.0_f64;
        for &t in t_grid {
            best = best.max(machine.q_detect(j, t).snr());
        }
        if best < cfg.zero_tol {
            return Ok((j - 1, false));
        }
        if j < cap {
            machine.recover_next_slope()?;
        }
    }
    Ok((cap, true))
}

/// Full population recovery for a J-component mixture at x0 from J-1
/// auxiliary points.
#[derive(Debug, Clone)]
pub struct JIdentification {
    pub j: usize,
    /// `slopes[i][j]` = m_{j+1}(x0) - m_{j+1}(x_i).
    pub slopes: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub levels: Vec<f64>,
    pub mgf_table: MgfTable,
    /// Relative determinants of the weight and level systems.
    pub det_weights: f64,
    pub det_levels: f64,
}

/// Recover weights, levels and component MGFs at `x0` using auxiliary points
/// `xs` (each differing from x0 in the first covariate only). Slope inputs
/// are recovered from the recursion unless `injected_slopes` supplies them.
pub fn recover_j_parameters(
    model: &MixtureModel,
    x0: &[f64],
    xs: &[Vec<f64>],
    t_grid: &[f64],
    cfg: &QConfig,
    injected_slopes: Option<&[Vec<f64>]>,
) -> Result<JIdentification> {
    let j = model.n_components();
    if xs.len() != j - 1 {
        return Err(Error::Config(format!(
            "need {} auxiliary points for a {j}-component model, got {}",
            j - 1,
            xs.len()
        )));
    }
    let slopes: Vec<Vec<f64>> = match injected_slopes {
        Some(s) => {
            if s.len() != xs.len() || s.iter().any(|row| row.len() != j) {
                return Err(Error::Config("injected slope table has wrong shape".into()));
            }
            s.to_vec()
        }
        None => xs
            .iter()
            .map(|xi| slope_recovery_j(model, x0, xi, j, cfg).map(|r| r.slopes))
            .collect::<Result<_>>()?,
    };

    // Weight system: A[i][l] = slope_i(l) - slope_i(J).
    let jm = j - 1;
    let mut a = DMatrix::zeros(jm, jm);
    let mut rhs = DVector::zeros(jm);
    for i in 0..jm {
        let mean_diff = model.cond_mean(x0) - model.cond_mean(&xs[i]);
        for l in 0..jm {
            a[(i, l)] = slopes[i][l] - slopes[i][j - 1];
        }
        rhs[i] = mean_diff - slopes[i][j - 1];
    }
    let det_weights = relative_det(&a);
    let head = solve_dense(&a, &rhs, "j-weights", DET_FLOOR)?;
    let mut lambda: Vec<f64> = head.iter().cloned().collect();
    let tail = 1.0 - lambda.iter().sum::<f64>();
    lambda.push(tail);
    if lambda.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return Err(Error::Config(format!("recovered weights leave (0,1): {lambda:?}")));
    }

    // Level system: rows of slope differences plus the all-ones row.
    let mut b = DMatrix::zeros(j, j);
    let mut rhs2 = DVector::zeros(j);
    for i in 0..jm {
        let c = 0.5
            * (model.cond_m2(x0) - model.cond_m2(&xs[i])
                + (0..j).map(|l| lambda[l] * slopes[i][l] * slopes[i][l]).sum::<f64>());
        for l in 0..j {
            b[(i, l)] = slopes[i][l];
        }
        rhs2[i] = c;
    }
    for l in 0..j {
        b[(jm, l)] = 1.0;
    }
    rhs2[jm] = model.cond_mean(x0);
    let det_levels = relative_det(&b);
    let y = solve_dense(&b, &rhs2, "j-levels", DET_FLOOR)?;
    let levels: Vec<f64> = (0..j).map(|l| y[l] / lambda[l]).collect();

    // Component MGFs from the exponential system over (x0, xs...).
    let mut means = vec![levels.clone()];
    for row in &slopes {
        means.push((0..j).map(|l| levels[l] - row[l]).collect());
    }
    let mut columns = vec![vec![f64::NAN; t_grid.len()]; j];
    let mut skipped = Vec::new();
    for (ti, &t) in t_grid.iter().enumerate() {
        let mut d = DMatrix::zeros(j, j);
        let mut rhs3 = DVector::zeros(j);
        for row in 0..j {
            let x_row: &[f64] = if row == 0 { x0 } else { &xs[row - 1] };
            let scale = t * means[row].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for col in 0..j {
                d[(row, col)] = lambda[col] * (t * means[row][col] - scale).exp();
            }
            rhs3[row] = (model.log_cond_mgf(t, x_row)? - scale).exp();
        }
        match solve_dense(&d, &rhs3, "j-mgf", DET_FLOOR) {
            Ok(sol) => {
                for col in 0..j {
                    columns[col][ti] = sol[col];
                }
            }
            Err(Error::SingularSystem { .. }) => skipped.push(ti),
            Err(e) => return Err(e),
        }
    }
    for col in columns.iter_mut() {
        interpolate_column(t_grid, col, &skipped)?;
    }

    Ok(JIdentification {
        j,
        slopes,
        lambda,
        levels,
        mgf_table: MgfTable { t: t_grid.to_vec(), m: columns, skipped },
        det_weights,
        det_levels,
    })
}

fn relative_det(a: &DMatrix<f64>) -> f64 {
    let det = a.clone().lu().determinant();
    let norm: f64 = a
        .row_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300))
        .product();
    det.abs() / norm
}

fn interpolate_column(t: &[f64], values: &mut [f64], skipped: &[usize]) -> Result<()> {
    for &i in skipped {
        let left = (0..i).rev().find(|j| !skipped.contains(j));
        let right = (i + 1..t.len()).find(|j| !skipped.contains(j));
        values[i] = match (left, right) {
            (Some(l), Some(r)) => {
                let w = (t[i] - t[l]) / (t[r] - t[l]);
                values[l] * (1.0 - w) + values[r] * w
            }
            (Some(l), None) => values[l],
            (None, Some(r)) => values[r],
            (None, None) => return Err(Error::SingularSystem { system: "j-mgf", det: 0.0 }),
        };
    }
    Ok(())
}
