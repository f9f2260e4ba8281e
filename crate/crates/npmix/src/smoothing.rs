//! Product-kernel machinery and Nadaraya-Watson estimators of conditional
//! transforms: MGF (log domain), CF, mean, second moment and CDF.
//!
//! Two kernel families are provided. The Gaussian kernel carries the
//! exponential-moment conditions the MGF/CF transforms need; the compactly
//! supported quartic kernel (support [-1/2, 1/2] per coordinate) backs the
//! conditional CDF estimator. Both are nonnegative — signed kernels are not
//! representable here because the log-domain MGF path requires nonnegative
//! weights.

use num_complex::Complex64;

use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::numeric::logsumexp;

/// Denominator-mass floor below which a window is declared empty.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    QuarticCompact,
}

/// A product-form kernel with per-coordinate bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: Vec<f64>,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: Vec<f64>) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth)
    }

    pub fn quartic(bandwidth: Vec<f64>) -> Result<Self> {
        Self::new(KernelFamily::QuarticCompact, bandwidth)
    }

    pub fn new(family: KernelFamily, bandwidth: Vec<f64>) -> Result<Self> {
        if bandwidth.is_empty() || bandwidth.iter().any(|h| h.is_nan() || *h <= 0.0) {
            return Err(Error::Config("bandwidths must be positive".into()));
        }
        Ok(KernelSpec { family, bandwidth })
    }

    fn uni(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
            }
            KernelFamily::QuarticCompact => {
                // support [-1/2, 1/2], integrates to one
                if u.abs() > 0.5 {
                    0.0
                } else {
                    let w = 1.0 - 4.0 * u * u;
                    1.875 * w * w
                }
            }
        }
    }

    /// Product kernel weight K((xp - x)/h) for one observation.
    pub fn weight(&self, xp: &[f64], x: &[f64]) -> f64 {
        xp.iter()
            .zip(x)
            .zip(&self.bandwidth)
            .map(|((a, b), h)| self.uni((a - b) / h))
            .product()
    }

    fn bandwidth_volume(&self) -> f64 {
        self.bandwidth.iter().product()
    }
}

/// A Nadaraya-Watson estimate with its window diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct NWEstimate<T> {
    pub value: T,
    /// Sum of kernel weights / (n * prod(h)), an estimate of the design density.
    pub denominator_mass: f64,
    /// Kish effective sample size of the weights.
    pub effective_count: f64,
}

fn weights_at(data: &Dataset, x: &[f64], kernel: &KernelSpec) -> Result<Vec<f64>> {
    if data.n() == 0 {
        return Err(Error::Config("empty dataset".into()));
    }
    if x.len() != data.covariate_dim() || kernel.bandwidth.len() != data.covariate_dim() {
        return Err(Error::Config(format!(
            "dimension mismatch: data k={}, x has {}, kernel has {}",
            data.covariate_dim(),
            x.len(),
            kernel.bandwidth.len()
        )));
    }
    Ok((0..data.n()).map(|i| kernel.weight(data.x_row(i), x)).collect())
}

fn window_diag(
    data: &Dataset,
    x: &[f64],
    kernel: &KernelSpec,
    w: &[f64],
) -> Result<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|v| v * v).sum();
    let mass = sw / (data.n() as f64 * kernel.bandwidth_volume());
    if mass.is_nan() || mass <= DENOMINATOR_FLOOR {
        return Err(Error::EmptyWindow { at: x.to_vec(), mass });
    }
    Ok((mass, sw * sw / sw2))
}

/// log M-hat(t|x): kernel-weighted log-sum-exp of t * z, normalised so that
/// the estimate is exactly one at t = 0.
pub fn nw_cond_mgf(
    data: &Dataset,
    x: &[f64],
    t: f64,
    kernel: &KernelSpec,
) -> Result<NWEstimate<f64>> {
    let w = weights_at(data, x, kernel)?;
    let (mass, eff) = window_diag(data, x, kernel, &w)?;
    let log_w: Vec<f64> = w.iter().map(|v| v.ln()).collect();
    let num: Vec<f64> = log_w
        .iter()
        .zip(data.z())
        .map(|(lw, z)| lw + t * z)
        .collect();
    let value = logsumexp(&num) - logsumexp(&log_w);
    Ok(NWEstimate { value, denominator_mass: mass, effective_count: eff })
}

/// phi-hat(s|x): kernel-weighted average of unit-modulus phases.
pub fn nw_cond_cf(
    data: &Dataset,
    x: &[f64],
    s: f64,
    kernel: &KernelSpec,
) -> Result<NWEstimate<Complex64>> {
    let w = weights_at(data, x, kernel)?;
    let (mass, eff) = window_diag(data, x, kernel, &w)?;
    let sw: f64 = w.iter().sum();
    let num: Complex64 = w
        .iter()
        .zip(data.z())
        .map(|(wi, z)| Complex64::from_polar(*wi, s * z))
        .sum();
    Ok(NWEstimate { value: num / sw, denominator_mass: mass, effective_count: eff })
}

fn nw_regress(
    data: &Dataset,
    x: &[f64],
    kernel: &KernelSpec,
    f: impl Fn(f64) -> f64,
) -> Result<NWEstimate<f64>> {
    let w = weights_at(data, x, kernel)?;
    let (mass, eff) = window_diag(data, x, kernel, &w)?;
    let sw: f64 = w.iter().sum();
    let num: f64 = w.iter().zip(data.z()).map(|(wi, z)| wi * f(*z)).sum();
    Ok(NWEstimate { value: num / sw, denominator_mass: mass, effective_count: eff })
}

/// E-hat(Z | X = x).
pub fn nw_cond_mean(data: &Dataset, x: &[f64], kernel: &KernelSpec) -> Result<NWEstimate<f64>> {
    nw_regress(data, x, kernel, |z| z)
}

/// E-hat(Z^2 | X = x).
pub fn nw_cond_m2(data: &Dataset, x: &[f64], kernel: &KernelSpec) -> Result<NWEstimate<f64>> {
    nw_regress(data, x, kernel, |z| z * z)
}

/// F-hat(z|x): kernel-weighted empirical conditional CDF. Requires the
/// compactly supported kernel.
pub fn nw_cond_cdf(
    data: &Dataset,
    x: &[f64],
    z: f64,
    kernel: &KernelSpec,
) -> Result<NWEstimate<f64>> {
    if kernel.family != KernelFamily::QuarticCompact {
        return Err(Error::Config(
            "conditional CDF estimation requires the compactly supported kernel".into(),
        ));
    }
    nw_regress(data, x, kernel, |zi| f64::from(zi <= z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::Dataset;

    fn two_point() -> Dataset {
        Dataset::from_rows(1, vec![0.0, 0.5], vec![0.0, 1.0], None).unwrap()
    }

    #[test]
    fn mgf_normalisation_is_exact() {
        let d = two_point();
        let k = KernelSpec::gaussian(vec![0.3]).unwrap();
        let e = nw_cond_mgf(&d, &[0.2], 0.0, &k).unwrap();
        assert_eq!(e.value, 0.0);
        let c = nw_cond_cf(&d, &[0.2], 0.0, &k).unwrap();
        assert!((c.value - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_point_hand_weights() {
        let d = two_point();
        let k = KernelSpec::gaussian(vec![0.1]).unwrap();
        // At x = 0.5 the far point carries weight e^{-12.5}.
        let m = nw_cond_mgf(&d, &[0.5], 2.0, &k).unwrap();
        assert!((m.value - 2.0).abs() < 1e-5);
        // At x = 0 the mean is approximately 0.
        let mean = nw_cond_mean(&d, &[0.0], &k).unwrap();
        assert!(mean.value.abs() < 1e-5);
        // Single point: CF is the unit phase of that observation.
        let single = Dataset::from_rows(1, vec![0.3], vec![1.7], None).unwrap();
        let c = nw_cond_cf(&single, &[0.3], 2.2, &k).unwrap();
        assert!((c.value - Complex64::from_polar(1.0, 2.2 * 1.7)).norm() < 1e-14);
    }

    #[test]
    fn constant_outcome_regression_is_exact() {
        let d = Dataset::from_rows(1, vec![-0.5, 0.1, 0.4], vec![3.0, 3.0, 3.0], None).unwrap();
        let k = KernelSpec::gaussian(vec![0.5]).unwrap();
        let mean = nw_cond_mean(&d, &[0.0], &k).unwrap();
        let m2 = nw_cond_m2(&d, &[0.0], &k).unwrap();
        assert!((mean.value - 3.0).abs() < 1e-12);
        assert!((m2.value - 9.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_estimator_bounds_and_kernel_requirement() {
        let d = two_point();
        let q = KernelSpec::quartic(vec![0.1]).unwrap();
        // Only the z = 0 observation has weight at x = 0.
        let c = nw_cond_cdf(&d, &[0.0], 0.5, &q).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12);
        // Below/above the sample.
        let g = KernelSpec::quartic(vec![2.0]).unwrap();
        assert_eq!(nw_cond_cdf(&d, &[0.2], -5.0, &g).unwrap().value, 0.0);
        assert_eq!(nw_cond_cdf(&d, &[0.2], 5.0, &g).unwrap().value, 1.0);
        // Gaussian kernel is rejected for the CDF path.
        let k = KernelSpec::gaussian(vec![0.1]).unwrap();
        assert!(matches!(nw_cond_cdf(&d, &[0.0], 0.5, &k), Err(Error::Config(_))));
    }

    #[test]
    fn empty_window_is_detected() {
        let d = two_point();
        let q = KernelSpec::quartic(vec![0.1]).unwrap();
        let r = nw_cond_mean(&d, &[5.0], &q);
        assert!(matches!(r, Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn location_equivariance_of_mgf() {
        let d = Dataset::from_rows(1, vec![0.0, 0.2, 0.4], vec![0.3, -0.1, 0.8], None).unwrap();
        let shifted = Dataset::from_rows(
            1,
            vec![0.0, 0.2, 0.4],
            vec![0.3 + 2.5, -0.1 + 2.5, 0.8 + 2.5],
            None,
        )
        .unwrap();
        let k = KernelSpec::gaussian(vec![0.2]).unwrap();
        let t = 1.3;
        let a = nw_cond_mgf(&d, &[0.2], t, &k).unwrap().value;
        let b = nw_cond_mgf(&shifted, &[0.2], t, &k).unwrap().value;
        assert!((b - a - t * 2.5).abs() < 1e-10);
    }

    #[test]
    fn kernels_integrate_to_one() {
        // crude Riemann check on both families
        for fam in [KernelFamily::Gaussian, KernelFamily::QuarticCompact] {
            let k = KernelSpec::new(fam, vec![1.0]).unwrap();
            let step = 1e-3;
            let total: f64 = (-8000..8000).map(|i| k.uni(i as f64 * step) * step).sum();
            assert!((total - 1.0).abs() < 1e-6, "{fam:?}: {total}");
        }
    }
}
