//! The invariant measure `γ`, its planar extension `γ̄`, the conditional
//! family `γ_a`, digit transition probabilities and the chain `s_{n,a}`.

use serde::Serialize;

use crate::error::{Result, ThetaError};
use crate::expansion::{check_digits, ThetaParams};

/// The corner rectangle `[0, x_max] × [0, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(p: &ThetaParams, x_max: f64, y_max: f64) -> Result<Self> {
        Ok(Self {
            x_max: p.check_unit("x_max", x_max)?,
            y_max: p.check_unit("y_max", y_max)?,
        })
    }

    pub fn full(p: &ThetaParams) -> Self {
        Self {
            x_max: p.theta,
            y_max: p.theta,
        }
    }
}

pub fn gamma_cdf(p: &ThetaParams, x: f64) -> Result<f64> {
    let x = p.check_unit("x", x)?;
    Ok((p.theta * x).ln_1p() / p.log_norm)
}

/// Density of `γ` with respect to Lebesgue measure.
pub fn gamma_density(p: &ThetaParams, x: f64) -> f64 {
    p.theta / ((1.0 + p.theta * x) * p.log_norm)
}

pub fn gamma_bar(p: &ThetaParams, rect: Rect) -> Result<f64> {
    let x = p.check_unit("x_max", rect.x_max)?;
    let y = p.check_unit("y_max", rect.y_max)?;
    Ok((x * y).ln_1p() / p.log_norm)
}

/// `γ̄` of a general box `[x0, x1] × [y0, y1]`. The density `(1+xy)^{-2}`
/// has `ln(1+xy)` as mixed antiderivative, so inclusion-exclusion is exact.
pub fn gamma_bar_box(p: &ThetaParams, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<f64> {
    let [x0, x1, y0, y1] = [
        p.check_unit("x0", x0)?,
        p.check_unit("x1", x1)?,
        p.check_unit("y0", y0)?,
        p.check_unit("y1", y1)?,
    ];
    if x1 < x0 || y1 < y0 {
        return Err(ThetaError::InvalidParameter {
            name: "box",
            reason: format!("empty box [{x0}, {x1}] x [{y0}, {y1}]"),
        });
    }
    let g = |x: f64, y: f64| (x * y).ln_1p();
    // ln((1+x1y1)(1+x0y0)/((1+x1y0)(1+x0y1))), kept as sums of ln_1p
    let v = (g(x1, y1) - g(x1, y0)) - (g(x0, y1) - g(x0, y0));
    Ok(v.max(0.0) / p.log_norm)
}

/// Distribution function of `γ_a`: `(aθ+1)x / ((ax+1)θ)`.
pub fn gamma_a_cdf(p: &ThetaParams, a: f64, x: f64) -> Result<f64> {
    let a = p.check_unit("a", a)?;
    let x = p.check_unit("x", x)?;
    Ok(g_kernel(p.theta, a, x))
}

/// Conditional law of `T^n` given the first `n` digits, indexed by
/// `s = s_{n,a}`. Same kernel as [`gamma_a_cdf`].
pub fn conditional_tn_cdf(p: &ThetaParams, s: f64, x: f64) -> Result<f64> {
    let s = p.check_unit("s", s)?;
    let x = p.check_unit("x", x)?;
    Ok(g_kernel(p.theta, s, x))
}

#[inline]
pub(crate) fn g_kernel(theta: f64, a: f64, x: f64) -> f64 {
    (a * theta + 1.0) * x / ((a * x + 1.0) * theta)
}

/// `P_i(x) = (xθ+1) / ((x+iθ)(x+(i+1)θ))`.
pub fn transition_prob(p: &ThetaParams, i: u64, x: f64) -> Result<f64> {
    if i < p.m {
        return Err(ThetaError::DigitBelowM {
            digit: i,
            position: 0,
            m: p.m,
        });
    }
    let x = p.check_unit("x", x)?;
    Ok(p_kernel(p.theta, i as f64, x))
}

#[inline]
pub(crate) fn p_kernel(theta: f64, i: f64, x: f64) -> f64 {
    (x * theta + 1.0) / ((x + i * theta) * (x + (i + 1.0) * theta))
}

/// `Σ_{i ≥ i0} P_i(x) = (xθ+1) / (θ(x + i0 θ))`, by telescoping.
pub fn transition_tail(p: &ThetaParams, i0: u64, x: f64) -> Result<f64> {
    let x = p.check_unit("x", x)?;
    Ok(tail_kernel(p.theta, i0 as f64, x))
}

#[inline]
pub(crate) fn tail_kernel(theta: f64, i0: f64, x: f64) -> f64 {
    (x * theta + 1.0) / (theta * (x + i0 * theta))
}

/// `P_{i_1}(a) P_{i_2}(u_{i_1}(a)) ... P_{i_n}(u_{i_{n-1}} ... u_{i_1}(a))`.
pub fn transition_product(p: &ThetaParams, digits: &[u64], a: f64) -> Result<f64> {
    if digits.is_empty() {
        return Err(ThetaError::EmptyDigits);
    }
    check_digits(p, digits)?;
    let mut x = p.check_unit("a", a)?;
    let mut prob = 1.0;
    for &d in digits {
        let i = d as f64;
        prob *= p_kernel(p.theta, i, x);
        x = p.branch(i, x);
    }
    Ok(prob)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SChainState {
    pub a: f64,
    /// `s_1, ..., s_n`.
    pub values: Vec<f64>,
}

impl SChainState {
    pub fn last(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.a)
    }
}

/// `s_0 = a`, `s_k = 1/(a_k θ + s_{k-1})`.
pub fn s_chain(p: &ThetaParams, a: f64, digits: &[u64]) -> Result<SChainState> {
    check_digits(p, digits)?;
    let a = p.check_unit("a", a)?;
    let mut s = a;
    let values = digits
        .iter()
        .map(|&d| {
            s = p.branch(d as f64, s);
            s
        })
        .collect();
    Ok(SChainState { a, values })
}
