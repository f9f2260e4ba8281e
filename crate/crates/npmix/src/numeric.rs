//! Shared numeric utilities: stable log-sum-exp, Gaussian tail functions,
//! Richardson-extrapolated central differences (plain and log-scaled),
//! isotonic projection and small deterministic helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// log(sum(exp(v))) over a slice, stable for large magnitudes.
/// `-inf` entries are permitted and contribute nothing.
pub fn logsumexp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + s.ln()
}

/// Standard normal CDF, accurate into the far tails via `erfc`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail 1 - Phi(x) without cancellation for large x.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// A derivative value together with a propagated error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Deriv {
    pub value: f64,
    pub err: f64,
}

/// Central difference with one Richardson step (O(h^4) truncation).
///
/// The error estimate combines the Richardson defect with a rounding bound
/// driven by the magnitude of the sampled values.
pub fn central_deriv<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> Deriv {
    let fp = f(x + h);
    let fm = f(x - h);
    let fph = f(x + 0.5 * h);
    let fmh = f(x - 0.5 * h);
    let d_h = (fp - fm) / (2.0 * h);
    let d_h2 = (fph - fmh) / h;
    let value = (4.0 * d_h2 - d_h) / 3.0;
    let scale = fp.abs().max(fm.abs()).max(fph.abs()).max(fmh.abs());
    let rounding = f64::EPSILON * scale / h;
    Deriv {
        value,
        err: ((d_h2 - d_h) / 3.0).abs() + rounding,
    }
}

/// A signed quantity stored as `frac * exp(ln_scale)` so that nested
/// exponential magnitudes never overflow f64, plus an error estimate for
/// `frac` on the same scale.
#[derive(Debug, Clone, Copy)]
pub struct Scaled {
    pub ln_scale: f64,
    pub frac: f64,
    pub err: f64,
}

impl Scaled {
    pub fn new(ln_scale: f64, frac: f64, err: f64) -> Self {
        Scaled { ln_scale, frac, err }
    }

    /// ln|value|; `-inf` when the fraction vanishes.
    pub fn ln_abs(&self) -> f64 {
        self.ln_scale + self.frac.abs().ln()
    }

    pub fn signum(&self) -> f64 {
        self.frac.signum()
    }

    /// Plain f64 value; may overflow to +-inf for extreme scales.
    pub fn value(&self) -> f64 {
        self.frac * self.ln_scale.exp()
    }

    /// Re-express on a different log-scale.
    pub fn rescale(&self, ln_scale: f64) -> Scaled {
        let shift = (self.ln_scale - ln_scale).exp();
        Scaled::new(ln_scale, self.frac * shift, self.err * shift)
    }

    /// Signal-to-noise ratio |frac| / err (inf when err is zero).
    pub fn snr(&self) -> f64 {
        if self.err == 0.0 {
            f64::INFINITY
        } else {
            self.frac.abs() / self.err
        }
    }
}

/// Central difference with two Richardson stages for a log-scaled integrand
/// (stencil h, h/2, h/4; truncation O(h^6)).
///
/// All stencil values are re-expressed on the scale of the centre point and
/// the difference quotients are formed on the fractions. The error estimate
/// combines the defect between the two O(h^4) extrapolants with the rounding
/// and stencil noise amplified by the 1/h of a first difference; for an
/// integrand whose true derivative vanishes, value and error share the same
/// noise scale, which is what the zero-detection logic relies on.
pub fn central_deriv_scaled<F: FnMut(f64) -> Scaled>(mut f: F, x: f64, h: f64) -> Scaled {
    let centre = f(x);
    let c = centre.ln_scale + centre.frac.abs().max(1e-300).ln();
    let mut scale: f64 = 0.0;
    let mut stencil_err: f64 = 0.0;
    let mut d = [0.0_f64; 3];
    for (i, frac) in [1.0_f64, 0.5, 0.25].iter().enumerate() {
        let hi = h * frac;
        let vp = f(x + hi).rescale(c);
        let vm = f(x - hi).rescale(c);
        d[i] = (vp.frac - vm.frac) / (2.0 * hi);
        scale = scale.max(vp.frac.abs()).max(vm.frac.abs());
        stencil_err = stencil_err.max(vp.err).max(vm.err);
    }
    let r1a = (4.0 * d[1] - d[0]) / 3.0;
    let r1b = (4.0 * d[2] - d[1]) / 3.0;
    let value = (16.0 * r1b - r1a) / 15.0;
    let err = (r1b - r1a).abs() + 4.0 * (f64::EPSILON * scale + stencil_err) / h;
    Scaled::new(c, value, err)
}

/// Pool-adjacent-violators projection onto nondecreasing sequences,
/// followed by clipping to [0, 1]. Idempotent and order preserving.
pub fn isotonic_unit_projection(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n == 0 {
        return Vec::new();
    }
    // Blocks of (mean, weight) merged right-to-left violations.
    let mut means: Vec<f64> = Vec::with_capacity(n);
    let mut weights: Vec<usize> = Vec::with_capacity(n);
    for &v in y {
        means.push(v);
        weights.push(1);
        while means.len() > 1 {
            let m = means.len();
            if means[m - 2] <= means[m - 1] {
                break;
            }
            let w = weights[m - 2] + weights[m - 1];
            let merged =
                (means[m - 2] * weights[m - 2] as f64 + means[m - 1] * weights[m - 1] as f64) / w as f64;
            means.truncate(m - 1);
            weights.truncate(m - 1);
            means[m - 2] = merged;
            weights[m - 2] = w;
        }
    }
    let mut out = Vec::with_capacity(n);
    for (m, w) in means.iter().zip(weights.iter()) {
        for _ in 0..*w {
            out.push(m.clamp(0.0, 1.0));
        }
    }
    out
}

/// Solve a small dense system `A x = b` with LU, guarding on the determinant
/// relative to the row norms.
pub fn solve_dense(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    system: &'static str,
    rel_floor: f64,
) -> Result<DVector<f64>> {
    let det = a.clone().lu().determinant();
    let row_norm_product: f64 = a
        .row_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300))
        .product();
    let rel = det.abs() / row_norm_product;
    if !rel.is_finite() || rel < rel_floor {
        return Err(Error::SingularSystem { system, det: rel });
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularSystem { system, det: rel })
}

/// Least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Evenly spaced grid including both endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Median of a slice (not in place); NaNs are not expected.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// SplitMix64 scramble, used to derive independent seeds from (seed, index).
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
