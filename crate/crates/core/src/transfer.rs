//! The transfer operator `Uf(x) = Σ_i P_i(x) f(u_i(x))` acting on
//! piecewise-linear grid functions over `[0, θ]`.

use serde::Serialize;

use crate::error::{Result, ThetaError};
use crate::expansion::ThetaParams;
use crate::measures::{p_kernel, tail_kernel};

/// Samples of a function at `x_k = kθ/n_cells`, read as its piecewise-linear
/// interpolant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    pub n_cells: usize,
    pub theta: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(p: &ThetaParams, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(ThetaError::InvalidParameter {
                name: "values",
                reason: "a grid function needs at least two samples".into(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(ThetaError::InvalidParameter {
                name: "values",
                reason: format!("non-finite sample {v}"),
            });
        }
        Ok(Self {
            n_cells: values.len() - 1,
            theta: p.theta,
            values,
        })
    }

    pub fn from_fn(p: &ThetaParams, n_cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n_cells == 0 {
            return Err(ThetaError::InvalidParameter {
                name: "n_cells",
                reason: "must be positive".into(),
            });
        }
        let h = p.theta / n_cells as f64;
        Self::new(p, (0..=n_cells).map(|k| f(k as f64 * h)).collect())
    }

    pub fn step(&self) -> f64 {
        self.theta / self.n_cells as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_cells {
            self.theta
        } else {
            k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_cells).map(|k| self.node(k))
    }

    /// Linear interpolation; arguments are clamped into `[0, θ]`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let t = (x / self.step()).clamp(0.0, self.n_cells as f64);
        let k = (t as usize).min(self.n_cells - 1);
        let fr = t - k as f64;
        self.values[k] + fr * (self.values[k + 1] - self.values[k])
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

/// One application of `U`, with the branch sum cut at `i_max`. The mass of
/// the remaining branches is exact and is placed at a single representative
/// point, so constants are reproduced exactly.
pub fn apply_u(p: &ThetaParams, f: &GridFunction, i_max: u64) -> Result<GridFunction> {
    if i_max < p.m {
        return Err(ThetaError::InvalidParameter {
            name: "i_max",
            reason: format!("{i_max} is below m = {}", p.m),
        });
    }
    let th = p.theta;
    let tail_i = (i_max + 1) as f64;
    let values = f
        .nodes()
        .map(|x| {
            let mut acc = 0.0;
            for i in p.m..=i_max {
                let i = i as f64;
                acc += p_kernel(th, i, x) * f.eval(1.0 / (x + i * th));
            }
            acc + tail_kernel(th, tail_i, x) * f.eval(1.0 / (x + tail_i * th + 0.5 * th))
        })
        .collect();
    GridFunction::new(p, values)
}

/// Mass of the branches beyond `i_max`, largest at `x = 0`.
pub fn tail_mass(p: &ThetaParams, i_max: u64) -> f64 {
    tail_kernel(p.theta, (i_max + 1) as f64, 0.0)
}

/// `∫ f dγ` for the piecewise-linear interpolant, integrated exactly cell by
/// cell against the density `θ/((1+θx) ln(1+θ²))`.
pub fn u_infinity(p: &ThetaParams, f: &GridFunction) -> f64 {
    let th = p.theta;
    let mut acc = 0.0;
    for k in 0..f.n_cells {
        let (x0, x1) = (f.node(k), f.node(k + 1));
        let (f0, f1) = (f.values[k], f.values[k + 1]);
        let h = x1 - x0;
        let slope = (f1 - f0) / h;
        // ∫ θ/(1+θx) and ∫ θx/(1+θx) over the cell
        let d_log = (th * h / (1.0 + th * x0)).ln_1p();
        let d_lin = h - d_log / th;
        acc += (f0 - slope * x0) * d_log + slope * d_lin;
    }
    acc / p.log_norm
}

pub fn variation(f: &GridFunction) -> f64 {
    f.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub n_steps: usize,
    pub n_cells: usize,
    pub i_max: u64,
    /// `U_∞ f`.
    pub limit: f64,
    /// `var U^k f` for `k = 0..=n`.
    pub variations: Vec<f64>,
    /// `sup_x |U^k f(x) - U_∞ f|` over the grid.
    pub sup_deviations: Vec<f64>,
    /// `var f / (m+1)^k`.
    pub bounds: Vec<f64>,
    /// Absolute allowance per step: `|U_∞ U^k f - U_∞ f|`, the drift of the
    /// invariant functional caused by interpolation and the tail
    /// representative, plus a roundoff floor.
    pub allowances: Vec<f64>,
    pub relative_slack: f64,
    pub all_pass: bool,
}

pub const CONTRACTION_RELATIVE_SLACK: f64 = 1e-6;

pub fn contraction_report(
    p: &ThetaParams,
    f: &GridFunction,
    n: usize,
    i_max: u64,
) -> Result<ContractionReport> {
    if n == 0 {
        return Err(ThetaError::InvalidParameter {
            name: "n",
            reason: "at least one step is required".into(),
        });
    }
    let limit = u_infinity(p, f);
    let var0 = variation(f);
    let contraction = 1.0 / (p.mf() + 1.0);
    let roundoff = 1e-12 * f.sup_abs().max(var0).max(1.0);
    let mut g = f.clone();
    let mut report = ContractionReport {
        n_steps: n,
        n_cells: f.n_cells,
        i_max,
        limit,
        variations: Vec::with_capacity(n + 1),
        sup_deviations: Vec::with_capacity(n + 1),
        bounds: Vec::with_capacity(n + 1),
        allowances: Vec::with_capacity(n + 1),
        relative_slack: CONTRACTION_RELATIVE_SLACK,
        all_pass: true,
    };
    for k in 0..=n {
        if k > 0 {
            g = apply_u(p, &g, i_max)?;
        }
        let var = variation(&g);
        let dev = g
            .values
            .iter()
            .fold(0.0f64, |a, v| a.max((v - limit).abs()));
        let bound = var0 * contraction.powi(k as i32);
        let allowance = (u_infinity(p, &g) - limit).abs() + roundoff;
        let cap = bound * (1.0 + CONTRACTION_RELATIVE_SLACK) + allowance;
        report.all_pass &= var <= cap && dev <= cap;
        report.variations.push(var);
        report.sup_deviations.push(dev);
        report.bounds.push(bound);
        report.allowances.push(allowance);
    }
    Ok(report)
}
