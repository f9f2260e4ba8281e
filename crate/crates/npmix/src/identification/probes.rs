//! Numerical realisation of t -> +-inf limits: geometric probe grids with
//! explicit stabilisation residuals.

use crate::error::Result;

/// A geometric grid of probe arguments, e.g. {T, 2T, 4T}.
#[derive(Debug, Clone, Copy)]
pub struct ProbeGrid {
    pub base: f64,
    pub factor: f64,
    pub levels: usize,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        ProbeGrid { base: 10.0, factor: 2.0, levels: 3 }
    }
}

impl ProbeGrid {
    pub fn args(&self) -> Vec<f64> {
        (0..self.levels).map(|i| self.base * self.factor.powi(i as i32)).collect()
    }
}

/// Values of a transform along a probe grid, the extrapolated limit (the
/// value at the largest argument) and the residual between the two largest
/// arguments.
#[derive(Debug, Clone)]
pub struct LimitProbe {
    pub args: Vec<f64>,
    pub values: Vec<f64>,
    pub limit: f64,
    pub residual: f64,
}

impl LimitProbe {
    pub fn evaluate<F: FnMut(f64) -> Result<f64>>(args: Vec<f64>, mut f: F) -> Result<Self> {
        assert!(args.len() >= 2, "probe grids need at least two arguments");
        let mut values = Vec::with_capacity(args.len());
        for &a in &args {
            values.push(f(a)?);
        }
        let limit = *values.last().unwrap();
        let residual = (values[values.len() - 1] - values[values.len() - 2]).abs();
        Ok(LimitProbe { args, values, limit, residual })
    }

    pub fn stabilized(&self, tol: f64) -> bool {
        self.residual < tol
    }
}
