//! Analytic mixture specifications and their exact population functionals.
//!
//! A [`MixtureModel`] is a finite list of (regression function, error law)
//! components together with mixing weights that are either constant or, for
//! the two-component fixed-effects variant, a function of the covariate.
//! Everything downstream — the identification oracle and the sampling DGP —
//! consumes models only through the population functionals defined here:
//! conditional MGF (log domain), CF, CDF, low-order moments and the ratio
//! transforms built from them.
//!
//! All MGF arithmetic is carried out in the log domain with log-sum-exp so
//! that probe arguments far into the tails stay representable.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::numeric::{logsumexp, normal_cdf};

/// Modulus floor applied to characteristic-function denominators.
pub const CF_MODULUS_FLOOR: f64 = 1e-300;

/// Mean-zero error laws with closed-form transforms.
///
/// Each variant declares the open interval on which its MGF exists; the
/// Gaussian and two-point-normal families are entire, the shifted
/// exponential only covers `(-rate, inf)` and exercises the one-sided
/// (t -> +inf) identification route.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorDistribution {
    /// N(0, sigma^2).
    Gaussian { sigma: f64 },
    /// Location mixture q N(-a, sigma^2) + (1-q) N(b, sigma^2) with
    /// q = b/(a+b), so the mean is zero. Skewed right for a < b; `mirrored`
    /// reflects the law about zero (skewed left).
    TwoPointNormal {
        a: f64,
        b: f64,
        sigma: f64,
        mirrored: bool,
    },
    /// 1/rate - Exp(rate): mean zero, MGF domain (-rate, inf).
    ShiftedExponential { rate: f64 },
}

impl ErrorDistribution {
    pub fn gaussian(sigma: f64) -> Self {
        assert!(sigma > 0.0, "sigma must be positive");
        ErrorDistribution::Gaussian { sigma }
    }

    /// The opposite-skew pair (right-skewed, left-skewed), sharing variance.
    pub fn skew_pair(a: f64, b: f64, sigma: f64) -> (Self, Self) {
        assert!(a > 0.0 && b > a, "require 0 < a < b for a right-skewed law");
        (
            ErrorDistribution::TwoPointNormal { a, b, sigma, mirrored: false },
            ErrorDistribution::TwoPointNormal { a, b, sigma, mirrored: true },
        )
    }

    fn two_point_weight(a: f64, b: f64) -> f64 {
        b / (a + b)
    }

    /// Declared MGF domain (open at a finite endpoint).
    pub fn mgf_domain(&self) -> (f64, f64) {
        match self {
            ErrorDistribution::Gaussian { .. } | ErrorDistribution::TwoPointNormal { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            ErrorDistribution::ShiftedExponential { rate } => (-rate, f64::INFINITY),
        }
    }

    pub fn contains_mgf_arg(&self, t: f64) -> bool {
        let (lo, hi) = self.mgf_domain();
        t > lo && t < hi
    }

    /// log E[exp(t eps)].
    pub fn log_mgf(&self, t: f64) -> Result<f64> {
        if !self.contains_mgf_arg(t) {
            return Err(Error::Domain(format!(
                "mgf argument {t} outside declared domain {:?}",
                self.mgf_domain()
            )));
        }
        Ok(match self {
            ErrorDistribution::Gaussian { sigma } => 0.5 * sigma * sigma * t * t,
            ErrorDistribution::TwoPointNormal { a, b, sigma, mirrored } => {
                let q = Self::two_point_weight(*a, *b);
                let t_eff = if *mirrored { -t } else { t };
                0.5 * sigma * sigma * t * t
                    + logsumexp(&[q.ln() - a * t_eff, (1.0 - q).ln() + b * t_eff])
            }
            ErrorDistribution::ShiftedExponential { rate } => t / rate - (1.0 + t / rate).ln(),
        })
    }

    /// E[exp(i s eps)].
    pub fn cf(&self, s: f64) -> Complex64 {
        match self {
            ErrorDistribution::Gaussian { sigma } => {
                Complex64::new((-0.5 * sigma * sigma * s * s).exp(), 0.0)
            }
            ErrorDistribution::TwoPointNormal { a, b, sigma, mirrored } => {
                let q = Self::two_point_weight(*a, *b);
                let s_eff = if *mirrored { -s } else { s };
                let gauss = (-0.5 * sigma * sigma * s * s).exp();
                let atom1 = Complex64::from_polar(q, -a * s_eff);
                let atom2 = Complex64::from_polar(1.0 - q, b * s_eff);
                let v = atom1 + atom2;
                if *mirrored {
                    v.conj() * gauss
                } else {
                    v * gauss
                }
            }
            ErrorDistribution::ShiftedExponential { rate } => {
                // eps = 1/rate - E, E ~ Exp(rate): phi(s) = e^{is/rate} * rate/(rate + is)
                Complex64::from_polar(1.0, s / rate) * rate / Complex64::new(*rate, s)
            }
        }
    }

    /// P(eps <= z).
    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            ErrorDistribution::Gaussian { sigma } => normal_cdf(z / sigma),
            ErrorDistribution::TwoPointNormal { a, b, sigma, mirrored } => {
                let q = Self::two_point_weight(*a, *b);
                if *mirrored {
                    q * normal_cdf((z - a) / sigma) + (1.0 - q) * normal_cdf((z + b) / sigma)
                } else {
                    q * normal_cdf((z + a) / sigma) + (1.0 - q) * normal_cdf((z - b) / sigma)
                }
            }
            ErrorDistribution::ShiftedExponential { rate } => {
                // P(1/rate - E <= z) = P(E >= 1/rate - z)
                let u = 1.0 / rate - z;
                if u <= 0.0 {
                    1.0
                } else {
                    (-rate * u).exp()
                }
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            ErrorDistribution::Gaussian { sigma } => sigma * sigma,
            ErrorDistribution::TwoPointNormal { a, b, sigma, .. } => {
                let q = Self::two_point_weight(*a, *b);
                sigma * sigma + q * a * a + (1.0 - q) * b * b
            }
            ErrorDistribution::ShiftedExponential { rate } => 1.0 / (rate * rate),
        }
    }

    /// Draw one realisation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ErrorDistribution::Gaussian { sigma } => {
                Normal::new(0.0, *sigma).unwrap().sample(rng)
            }
            ErrorDistribution::TwoPointNormal { a, b, sigma, mirrored } => {
                let q = Self::two_point_weight(*a, *b);
                let u: f64 = rng.random();
                let loc = if u < q { -a } else { *b };
                let v = loc + Normal::new(0.0, *sigma).unwrap().sample(rng);
                if *mirrored {
                    -v
                } else {
                    v
                }
            }
            ErrorDistribution::ShiftedExponential { rate } => {
                1.0 / rate - Exp::new(*rate).unwrap().sample(rng)
            }
        }
    }
}

/// Component mean regression functions with analytic gradients.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressionFunction {
    /// Polynomial in the first covariate: c0 + c1 x1 + c2 x1^2 + ...
    Polynomial(Vec<f64>),
    /// Affine in the full covariate vector: c0 + b . x.
    Linear { intercept: f64, slopes: Vec<f64> },
}

impl RegressionFunction {
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        RegressionFunction::Polynomial(coeffs)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            RegressionFunction::Polynomial(c) => {
                let x1 = x[0];
                c.iter().rev().fold(0.0, |acc, &ci| acc * x1 + ci)
            }
            RegressionFunction::Linear { intercept, slopes } => {
                intercept + slopes.iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>()
            }
        }
    }

    /// Analytic gradient with respect to each covariate.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            RegressionFunction::Polynomial(c) => {
                let x1 = x[0];
                let mut d = 0.0;
                for (i, &ci) in c.iter().enumerate().skip(1) {
                    d += ci * i as f64 * x1.powi(i as i32 - 1);
                }
                let mut g = vec![0.0; x.len()];
                g[0] = d;
                g
            }
            RegressionFunction::Linear { slopes, .. } => {
                let mut g = vec![0.0; x.len()];
                for (gi, b) in g.iter_mut().zip(slopes) {
                    *gi = *b;
                }
                g
            }
        }
    }
}

/// Mixing weights: a fixed probability vector, or (J = 2 only) a weight
/// function lambda(x) for the first component, polynomial in x1.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Constant(Vec<f64>),
    Covariate(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct Component {
    pub mean: RegressionFunction,
    pub error: ErrorDistribution,
}

/// An analytic finite mixture regression specification.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    components: Vec<Component>,
    weights: Weights,
    covariate_dim: usize,
}

impl MixtureModel {
    pub fn new(components: Vec<Component>, weights: Weights, covariate_dim: usize) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("model must have at least one component".into()));
        }
        match &weights {
            Weights::Constant(w) => {
                if w.len() != components.len() {
                    return Err(Error::Config(format!(
                        "{} weights for {} components",
                        w.len(),
                        components.len()
                    )));
                }
                if w.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Config("weights must be strictly positive".into()));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!("weights sum to {sum}, not 1")));
                }
            }
            Weights::Covariate(_) => {
                if components.len() != 2 {
                    return Err(Error::Config(
                        "covariate-dependent weights require exactly two components".into(),
                    ));
                }
            }
        }
        Ok(MixtureModel { components, weights, covariate_dim })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn has_covariate_weights(&self) -> bool {
        matches!(self.weights, Weights::Covariate(_))
    }

    /// Weight of component `j` at covariate `x`.
    pub fn weight_at(&self, j: usize, x: &[f64]) -> f64 {
        match &self.weights {
            Weights::Constant(w) => w[j],
            Weights::Covariate(coeffs) => {
                let lam = coeffs.iter().rev().fold(0.0, |acc, &c| acc * x[0] + c);
                if j == 0 {
                    lam
                } else {
                    1.0 - lam
                }
            }
        }
    }

    /// Check that an x-dependent weight stays inside (0, 1] on a probe grid.
    pub fn validate_weight_range(&self, lo: f64, hi: f64, probes: usize) -> Result<()> {
        if let Weights::Covariate(_) = self.weights {
            for i in 0..probes {
                let x1 = lo + (hi - lo) * i as f64 / (probes - 1).max(1) as f64;
                let lam = self.weight_at(0, &[x1]);
                if !(lam > 0.0 && lam <= 1.0) {
                    return Err(Error::Config(format!(
                        "weight function leaves (0,1] at x1 = {x1}: lambda = {lam}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mean_value(&self, j: usize, x: &[f64]) -> f64 {
        self.components[j].mean.value(x)
    }

    /// log M(t|x) via log-sum-exp across components.
    pub fn log_cond_mgf(&self, t: f64, x: &[f64]) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.components.len());
        for (j, c) in self.components.iter().enumerate() {
            let lw = self.weight_at(j, x).max(0.0);
            if lw == 0.0 {
                continue;
            }
            terms.push(lw.ln() + t * c.mean.value(x) + c.error.log_mgf(t)?);
        }
        Ok(logsumexp(&terms))
    }

    /// phi(s|x) = sum_j lambda_j e^{i s m_j(x)} phi_j(s).
    pub fn cond_cf(&self, s: f64, x: &[f64]) -> Complex64 {
        self.components
            .iter()
            .enumerate()
            .map(|(j, c)| {
                Complex64::from_polar(self.weight_at(j, x), s * c.mean.value(x)) * c.error.cf(s)
            })
            .sum()
    }

    /// F(z|x) = sum_j lambda_j F_j(z - m_j(x)).
    pub fn cond_cdf(&self, z: f64, x: &[f64]) -> f64 {
        self.components
            .iter()
            .enumerate()
            .map(|(j, c)| self.weight_at(j, x) * c.error.cdf(z - c.mean.value(x)))
            .sum()
    }

    /// E[z|x].
    pub fn cond_mean(&self, x: &[f64]) -> f64 {
        self.components
            .iter()
            .enumerate()
            .map(|(j, c)| self.weight_at(j, x) * c.mean.value(x))
            .sum()
    }

    /// E[z^2|x] = sum_j lambda_j (m_j(x)^2 + var_j).
    pub fn cond_m2(&self, x: &[f64]) -> f64 {
        self.components
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let m = c.mean.value(x);
                self.weight_at(j, x) * (m * m + c.error.variance())
            })
            .sum()
    }

    /// log R(t, x) = log M(t|x) - log M(t|x0).
    pub fn log_ratio(&self, t: f64, x: &[f64], x0: &[f64]) -> Result<f64> {
        Ok(self.log_cond_mgf(t, x)? - self.log_cond_mgf(t, x0)?)
    }

    /// rho(x, s) = phi(s|x) / phi(s|x0), guarded by the CF modulus floor.
    pub fn rho(&self, s: f64, x: &[f64], x0: &[f64]) -> Result<Complex64> {
        let den = self.cond_cf(s, x0);
        let modulus = den.norm();
        if modulus < CF_MODULUS_FLOOR {
            return Err(Error::DegenerateDenominator { modulus, floor: CF_MODULUS_FLOOR });
        }
        // Rescale by the denominator modulus first: the naive complex
        // division squares it and underflows long before the floor.
        Ok((self.cond_cf(s, x) / modulus) / (den / modulus))
    }
}

/// Reference models used across tests, examples and built-in configs.
pub mod fixtures {
    use super::*;

    /// Two Gaussian components with unequal variances and non-parallel
    /// linear means: lambda = 0.6, m1 = 1 + 2x, m2 = -1 + x,
    /// eps1 ~ N(0, 1.5^2), eps2 ~ N(0, 0.5^2), scalar covariate.
    pub fn gm1() -> MixtureModel {
        MixtureModel::new(
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
            Weights::Constant(vec![0.6, 0.4]),
            1,
        )
        .unwrap()
    }

    /// Opposite-skew equal-variance pair with entire MGFs whose ratio
    /// vanishes in opposite tail directions, so both directional MGF limits
    /// are informative: lambda = 0.7, m1 = 1 + x, m2 = -1 + 0.5x.
    pub fn sk1() -> MixtureModel {
        sk1_with_lambda(0.7)
    }

    pub fn sk1_with_lambda(lambda: f64) -> MixtureModel {
        let (right, left) = ErrorDistribution::skew_pair(0.5, 1.5, 0.5);
        MixtureModel::new(
            vec![
                Component {
                    mean: RegressionFunction::polynomial(vec![1.0, 1.0]),
                    error: right,
                },
                Component {
                    mean: RegressionFunction::polynomial(vec![-1.0, 0.5]),
                    error: left,
                },
            ],
            Weights::Constant(vec![lambda, 1.0 - lambda]),
            1,
        )
        .unwrap()
    }

    /// Three-component Gaussian mixture with one curved mean, used by the
    /// general-J machinery: lambda = (0.5, 0.3, 0.2), m1 = 3 + x,
    /// m2 = 0.3x^2, m3 = -3 + 2x, all errors N(0,1).
    pub fn gm3() -> MixtureModel {
        MixtureModel::new(
            vec![
                Component {
                    mean: RegressionFunction::polynomial(vec![3.0, 1.0]),
                    error: ErrorDistribution::gaussian(1.0),
                },
                Component {
                    mean: RegressionFunction::polynomial(vec![0.0, 0.0, 0.3]),
                    error: ErrorDistribution::gaussian(1.0),
                },
                Component {
                    mean: RegressionFunction::polynomial(vec![-3.0, 2.0]),
                    error: ErrorDistribution::gaussian(1.0),
                },
            ],
            Weights::Constant(vec![0.5, 0.3, 0.2]),
            1,
        )
        .unwrap()
    }

    /// Degenerate single-component model (lambda = 1): m = 1 + 2x, N(0,1).
    pub fn degenerate() -> MixtureModel {
        MixtureModel::new(
            vec![Component {
                mean: RegressionFunction::polynomial(vec![1.0, 2.0]),
                error: ErrorDistribution::gaussian(1.0),
            }],
            Weights::Constant(vec![1.0]),
            1,
        )
        .unwrap()
    }

    /// Identical components (F1 = F2, same law) with non-parallel means and
    /// lambda = 0.5. Identified through the two-sided MGF route only.
    pub fn identical_components() -> MixtureModel {
        MixtureModel::new(
            vec![
                Component {
                    mean: RegressionFunction::polynomial(vec![1.0, 2.0]),
                    error: ErrorDistribution::gaussian(1.0),
                },
                Component {
                    mean: RegressionFunction::polynomial(vec![-1.0, 1.0]),
                    error: ErrorDistribution::gaussian(1.0),
                },
            ],
            Weights::Constant(vec![0.5, 0.5]),
            1,
        )
        .unwrap()
    }

    /// Fixed-effects variant of the skew pair: lambda(x) = 0.5 + 0.2 x.
    pub fn fe_sk1() -> MixtureModel {
        let (right, left) = ErrorDistribution::skew_pair(0.5, 1.5, 0.5);
        MixtureModel::new(
            vec![
                Component {
                    mean: RegressionFunction::polynomial(vec![1.0, 1.0]),
                    error: right,
                },
                Component {
                    mean: RegressionFunction::polynomial(vec![-1.0, 0.5]),
                    error: left,
                },
            ],
            Weights::Covariate(vec![0.5, 0.2]),
            1,
        )
        .unwrap()
    }
}
