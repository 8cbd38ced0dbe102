//! The θ-expansion map `T(x) = 1/x - θ⌊1/(xθ)⌋` on `[0, θ]`, its digits,
//! convergents and cylinders.

use serde::Serialize;

use crate::error::{Result, ThetaError};

/// Largest digit we hand out as an integer. Beyond this the float orbit has
/// no meaningful resolution left anyway.
pub const MAX_DIGIT: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaParams {
    pub m: u64,
    pub theta: f64,
    /// `ln(1 + θ²)`, the normalizer of the invariant measure.
    pub log_norm: f64,
}

impl ThetaParams {
    pub fn new(m: u64) -> Result<Self> {
        if m == 0 {
            return Err(ThetaError::InvalidParameter {
                name: "m",
                reason: "must be at least 1".into(),
            });
        }
        let theta = 1.0 / (m as f64).sqrt();
        Ok(Self {
            m,
            theta,
            log_norm: (theta * theta).ln_1p(),
        })
    }

    pub fn mf(&self) -> f64 {
        self.m as f64
    }

    /// Validates a point of `[0, θ]`, absorbing a few ulps of rounding at
    /// either end.
    pub fn check_unit(&self, name: &'static str, x: f64) -> Result<f64> {
        let tol = 4.0 * f64::EPSILON * self.theta;
        if x.is_nan() || x < -tol || x > self.theta + tol {
            return Err(ThetaError::Domain {
                name,
                value: x,
                upper: self.theta,
            });
        }
        Ok(x.clamp(0.0, self.theta))
    }

    /// Inverse branch `u_i(x) = 1/(x + iθ)`.
    #[inline]
    pub fn branch(&self, i: f64, x: f64) -> f64 {
        1.0 / (x + i * self.theta)
    }

    /// Digit and image of `x > 0` under the map, robust to rounding at
    /// cylinder endpoints: a quotient within a few ulps below an integer is
    /// snapped up, and a remainder within rounding noise of 0 becomes 0.
    pub(crate) fn split(&self, x: f64) -> (f64, f64) {
        debug_assert!(x > 0.0);
        let q = 1.0 / (x * self.theta);
        let mut k = q.floor();
        if q - k > 1.0 - 4.0 * f64::EPSILON * q {
            k += 1.0;
        }
        let k = k.max(self.mf());
        let mut r = 1.0 / x - k * self.theta;
        if r <= 4.0 * f64::EPSILON / x {
            r = 0.0;
        }
        (k, r.min(self.theta))
    }
}

pub fn new_params(m: u64) -> Result<ThetaParams> {
    ThetaParams::new(m)
}

pub fn gauss_map(p: &ThetaParams, x: f64) -> Result<f64> {
    let x = p.check_unit("x", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(p.split(x).1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DigitIndex {
    Finite(u64),
    Infinity,
}

impl DigitIndex {
    pub fn finite(self) -> Option<u64> {
        match self {
            DigitIndex::Finite(d) => Some(d),
            DigitIndex::Infinity => None,
        }
    }
}

pub fn digit_index(p: &ThetaParams, x: f64) -> Result<DigitIndex> {
    let x = p.check_unit("x", x)?;
    if x == 0.0 {
        return Ok(DigitIndex::Infinity);
    }
    let (k, _) = p.split(x);
    if k > MAX_DIGIT {
        return Err(ThetaError::DigitOverflow { x });
    }
    Ok(DigitIndex::Finite(k as u64))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct DigitSequence {
    pub digits: Vec<u64>,
    /// The orbit reached 0 before the requested number of digits.
    pub terminated: bool,
}

impl DigitSequence {
    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }
}

/// First `n` digits of `x` together with the last computed iterate.
pub fn expand_with_remainder(p: &ThetaParams, x: f64, n: usize) -> Result<(DigitSequence, f64)> {
    let mut z = p.check_unit("x", x)?;
    let mut seq = DigitSequence::default();
    for _ in 0..n {
        if z == 0.0 {
            seq.terminated = true;
            break;
        }
        let (k, r) = p.split(z);
        if k > MAX_DIGIT {
            return Err(ThetaError::DigitOverflow { x: z });
        }
        seq.digits.push(k as u64);
        z = r;
    }
    Ok((seq, z))
}

pub fn expand_digits(p: &ThetaParams, x: f64, n: usize) -> Result<DigitSequence> {
    expand_with_remainder(p, x, n).map(|(s, _)| s)
}

pub(crate) fn check_digits(p: &ThetaParams, digits: &[u64]) -> Result<()> {
    match digits.iter().position(|&d| d < p.m) {
        Some(position) => Err(ThetaError::DigitBelowM {
            digit: digits[position],
            position,
            m: p.m,
        }),
        None => Ok(()),
    }
}

fn check_nonempty(p: &ThetaParams, digits: &[u64]) -> Result<()> {
    if digits.is_empty() {
        return Err(ThetaError::EmptyDigits);
    }
    check_digits(p, digits)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convergent {
    pub index: i64,
    pub p: f64,
    pub q: f64,
}

impl Convergent {
    pub fn value(&self) -> f64 {
        self.p / self.q
    }
}

/// `(p_k, q_k)` for `k = 1..=n`.
pub fn convergents(p: &ThetaParams, digits: &[u64]) -> Result<Vec<Convergent>> {
    check_nonempty(p, digits)?;
    let (mut p2, mut p1) = (1.0, 0.0);
    let (mut q2, mut q1) = (0.0, 1.0);
    let mut out = Vec::with_capacity(digits.len());
    for (k, &d) in digits.iter().enumerate() {
        let a = d as f64 * p.theta;
        let pn = a * p1 + p2;
        let qn = a * q1 + q2;
        out.push(Convergent {
            index: k as i64 + 1,
            p: pn,
            q: qn,
        });
        (p2, p1, q2, q1) = (p1, pn, q1, qn);
    }
    Ok(out)
}

/// `[a_1θ, ..., a_{n-1}θ, a_nθ + tail]`.
pub fn cf_eval(p: &ThetaParams, digits: &[u64], tail: f64) -> Result<f64> {
    check_nonempty(p, digits)?;
    let tail = p.check_unit("tail", tail)?;
    Ok(cf_fold(p.theta, digits.iter().map(|&d| d as f64), tail))
}

/// Innermost-out evaluation for digits given in forward order.
pub(crate) fn cf_fold<I>(theta: f64, digits: I, tail: f64) -> f64
where
    I: DoubleEndedIterator<Item = f64>,
{
    digits.rev().fold(tail, |v, d| 1.0 / (d * theta + v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderInterval {
    pub digits: Vec<u64>,
    pub lower: f64,
    pub upper: f64,
}

impl CylinderInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }
}

pub fn cylinder_interval(p: &ThetaParams, digits: &[u64]) -> Result<CylinderInterval> {
    let a = cf_eval(p, digits, 0.0)?;
    let b = cf_eval(p, digits, p.theta)?;
    Ok(CylinderInterval {
        digits: digits.to_vec(),
        lower: a.min(b),
        upper: a.max(b),
    })
}
