//! The planar map `T̄(x, y) = (T x, 1/(y + η(x)θ))` and the two-dimensional
//! Gauss-Kuzmin quantities `F̄_n(x, y) = λ̄(T̄^n ∈ [0,x]×[0,y])`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cylinder::{check_depth, joint_mass, Collocation, SeededLaw, Terminal};
use crate::error::{Result, ThetaError};
use crate::expansion::{ThetaParams, MAX_DIGIT};
use crate::measures::{gamma_bar, gamma_bar_box, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub fn new(p: &ThetaParams, x: f64, y: f64) -> Result<Self> {
        Ok(Self {
            x: p.check_unit("x", x)?,
            y: p.check_unit("y", y)?,
        })
    }
}

fn forward(p: &ThetaParams, pt: PlanePoint, step: i64) -> Result<PlanePoint> {
    if pt.x <= 0.0 {
        return Err(ThetaError::ExcludedState { step });
    }
    let (k, tx) = p.split(pt.x);
    Ok(PlanePoint {
        x: tx,
        y: p.branch(k, pt.y),
    })
}

fn backward(p: &ThetaParams, pt: PlanePoint, step: i64) -> Result<PlanePoint> {
    if pt.y <= 0.0 {
        return Err(ThetaError::ExcludedState { step });
    }
    let (k, ty) = p.split(pt.y);
    Ok(PlanePoint {
        x: p.branch(k, pt.x),
        y: ty,
    })
}

pub fn nat_ext_step(p: &ThetaParams, pt: PlanePoint) -> Result<PlanePoint> {
    forward(p, PlanePoint::new(p, pt.x, pt.y)?, 1)
}

pub fn nat_ext_inverse(p: &ThetaParams, pt: PlanePoint) -> Result<PlanePoint> {
    backward(p, PlanePoint::new(p, pt.x, pt.y)?, -1)
}

/// `T̄^n` for `n > 0`, `T̄^{-|n|}` for `n < 0`. A failing step is reported
/// with its signed index.
pub fn nat_ext_iterate(p: &ThetaParams, pt: PlanePoint, n: i64) -> Result<PlanePoint> {
    let mut cur = PlanePoint::new(p, pt.x, pt.y)?;
    for k in 1..=n.unsigned_abs() as i64 {
        cur = if n > 0 {
            forward(p, cur, k)?
        } else {
            backward(p, cur, -k)?
        };
    }
    Ok(cur)
}

/// `ā_l(x, y) = η(first coordinate of T̄^{l-1}(x, y))`.
pub fn extended_digit(p: &ThetaParams, pt: PlanePoint, l: i64) -> Result<u64> {
    let q = nat_ext_iterate(p, pt, l - 1)?;
    if q.x <= 0.0 {
        return Err(ThetaError::ExcludedState { step: l });
    }
    let (k, _) = p.split(q.x);
    if k > MAX_DIGIT {
        return Err(ThetaError::DigitOverflow { x: q.x });
    }
    Ok(k as u64)
}

/// `γ̄(T̄ R)` for a corner rectangle, summing the images of the order-1
/// cylinders; branches beyond the first digit of `x_max` map onto full
/// vertical strips and are telescoped in closed form.
pub fn pushforward_corner(p: &ThetaParams, rect: Rect) -> Result<f64> {
    let rect = Rect::new(p, rect.x_max, rect.y_max)?;
    if rect.x_max == 0.0 {
        return Ok(0.0);
    }
    let th = p.theta;
    let (l, tx) = p.split(rect.x_max);
    let y = rect.y_max;
    // Σ_{i>l} [ln(1+θu_i(0)) - ln(1+θu_i(y))] = ln(((l+1)θ + y)/((l+1)θ))
    let strips = (y / ((l + 1.0) * th)).ln_1p() / p.log_norm;
    let partial = gamma_bar_box(p, tx, th, p.branch(l, y), p.branch(l, 0.0))?;
    Ok(strips + partial)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fbar2DMethod {
    ExactCylinder,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fbar2DResult {
    pub n: usize,
    pub rect: Rect,
    pub estimate: f64,
    pub method: Fbar2DMethod,
    /// Half-width of the error interval of the exact method.
    pub truncation_mass: f64,
    pub std_error: f64,
    /// `ln(1 + x y) / ln(1 + θ²)`.
    pub limit: f64,
    pub samples: u64,
    /// Monte Carlo points whose orbit hit an excluded zero coordinate.
    pub discarded: u64,
}

pub fn fbar_exact(p: &ThetaParams, n: usize, rect: Rect) -> Result<Fbar2DResult> {
    let colloc = Collocation::with_defaults(p);
    fbar_exact_with(p, &colloc, n, rect)
}

/// [`fbar_exact`] reusing a prepared collocation.
pub fn fbar_exact_with(
    p: &ThetaParams,
    colloc: &Collocation,
    n: usize,
    rect: Rect,
) -> Result<Fbar2DResult> {
    check_depth(n)?;
    let rect = Rect::new(p, rect.x_max, rect.y_max)?;
    let law = SeededLaw::new(colloc, 0.0, n);
    let estimate = joint_mass(p, &law, n, rect.x_max, rect.y_max, Terminal::Uniform);
    Ok(Fbar2DResult {
        n,
        rect,
        estimate: estimate.clamp(0.0, 1.0),
        method: Fbar2DMethod::ExactCylinder,
        truncation_mass: law.error_bound(n),
        std_error: 0.0,
        limit: gamma_bar(p, rect)?,
        samples: 0,
        discarded: 0,
    })
}

const MC_BLOCK: u64 = 4096;
/// 32-bit words consumed per sample (two `f64` draws).
const WORDS_PER_SAMPLE: u64 = 4;

/// Monte Carlo estimate of `F̄_n`. Sample `k` always reads the same stretch
/// of the ChaCha keystream, so results do not depend on how the range is
/// split up.
pub fn fbar_mc(
    p: &ThetaParams,
    n: usize,
    rect: Rect,
    samples: u64,
    seed: u64,
) -> Result<Fbar2DResult> {
    if samples == 0 {
        return Err(ThetaError::InvalidParameter {
            name: "samples",
            reason: "must be at least 1".into(),
        });
    }
    let rect = Rect::new(p, rect.x_max, rect.y_max)?;
    let (hits, discarded) = mc_count(p, n, rect, seed, 0, samples);
    let used = samples - discarded;
    let (estimate, std_error) = if used == 0 {
        (0.0, f64::INFINITY)
    } else {
        let ph = hits as f64 / used as f64;
        (ph, (ph * (1.0 - ph) / used as f64).sqrt())
    };
    Ok(Fbar2DResult {
        n,
        rect,
        estimate,
        method: Fbar2DMethod::MonteCarlo,
        truncation_mass: 0.0,
        std_error,
        limit: gamma_bar(p, rect)?,
        samples,
        discarded,
    })
}

/// Hits and discards over the sample indices `start..end`.
pub fn mc_count(
    p: &ThetaParams,
    n: usize,
    rect: Rect,
    seed: u64,
    start: u64,
    end: u64,
) -> (u64, u64) {
    let th = p.theta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut hits, mut discarded) = (0u64, 0u64);
    let mut k = start;
    while k < end {
        rng.set_word_pos(u128::from(k) * u128::from(WORDS_PER_SAMPLE));
        let block_end = end.min((k / MC_BLOCK + 1) * MC_BLOCK);
        for _ in k..block_end {
            let mut u = th * rng.random::<f64>();
            let mut v = th * rng.random::<f64>();
            let mut ok = true;
            for _ in 0..n {
                if u <= 0.0 {
                    ok = false;
                    break;
                }
                let (d, tu) = p.split(u);
                v = p.branch(d, v);
                u = tu;
            }
            if !ok {
                discarded += 1;
            } else if u <= rect.x_max && v <= rect.y_max {
                hits += 1;
            }
        }
        k = block_end;
    }
    (hits, discarded)
}

/// Right side of the two-dimensional Gauss-Kuzmin equation applied to `f`,
/// with the digit series cut at `i_max`.
pub fn gk2d_rhs(
    p: &ThetaParams,
    f: impl Fn(f64, f64) -> f64,
    x: f64,
    y: f64,
    i_max: u64,
) -> Result<f64> {
    let x = p.check_unit("x", x)?;
    let y = p.check_unit("y", y)?;
    if y <= 0.0 {
        return Err(ThetaError::InvalidParameter {
            name: "y",
            reason: "must be positive".into(),
        });
    }
    let th = p.theta;
    let (l, ty) = p.split(y);
    let mut sum = 0.0;
    let mut i = l;
    while i <= i_max as f64 {
        sum += f(1.0 / (i * th), th) - f(1.0 / (i * th + x), th);
        i += 1.0;
    }
    Ok(sum - (f(1.0 / (l * th), ty) - f(1.0 / (l * th + x), ty)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResidual {
    pub residual: f64,
    /// `sup|∂F| x / (θ² i_max)` at the largest `x` in the grid.
    pub tail_bound: f64,
    pub i_max: u64,
    pub points: usize,
}

/// Largest deviation of the right side from `ln(1 + xy)` when `ln(1 + xy)`
/// is plugged in.
pub fn gk2d_fixed_point_residual(
    p: &ThetaParams,
    rects: &[Rect],
    i_max: u64,
) -> Result<FixedPointResidual> {
    if i_max < p.m {
        return Err(ThetaError::InvalidParameter {
            name: "i_max",
            reason: format!("{i_max} is below m = {}", p.m),
        });
    }
    let f = |x: f64, y: f64| (x * y).ln_1p();
    let mut residual = 0.0f64;
    let mut x_top = 0.0f64;
    for r in rects {
        let v = gk2d_rhs(p, f, r.x_max, r.y_max, i_max)?;
        residual = residual.max((v - f(r.x_max, r.y_max)).abs());
        x_top = x_top.max(r.x_max);
    }
    // ∂_u ln(1 + uθ) ≤ θ
    let tail_bound = p.theta * x_top / (p.theta * p.theta * i_max as f64);
    Ok(FixedPointResidual {
        residual,
        tail_bound,
        i_max,
        points: rects.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hand_steps() {
        let p = ThetaParams::new(2).unwrap();
        let q = nat_ext_step(&p, PlanePoint { x: 0.5, y: 0.3 }).unwrap();
        assert_relative_eq!(q.x, 0.5857864, epsilon = 1e-7);
        assert_relative_eq!(q.y, 1.0 / (0.3 + 2.0 * p.theta), epsilon = 1e-15);
        assert_relative_eq!(q.y, 0.5833568, epsilon = 2e-6);
        let back = nat_ext_inverse(&p, q).unwrap();
        assert_relative_eq!(back.x, 0.5, epsilon = 1e-12);
        assert_relative_eq!(back.y, 0.3, epsilon = 1e-12);
        let q = nat_ext_step(&p, PlanePoint { x: p.theta, y: 0.2 }).unwrap();
        assert_eq!(q.x, 0.0);
        assert_relative_eq!(q.y, 1.0 / (0.2 + 2.0 * p.theta), epsilon = 1e-15);
        let q = nat_ext_inverse(&p, PlanePoint { x: 0.1, y: p.theta }).unwrap();
        assert_eq!(q.y, 0.0);
        assert_relative_eq!(q.x, 1.0 / (0.1 + 2.0 * p.theta), epsilon = 1e-15);
        assert!(nat_ext_inverse(&p, PlanePoint { x: 0.1, y: 0.0 }).is_err());
        assert!(nat_ext_step(&p, PlanePoint { x: 0.0, y: 0.1 }).is_err());
    }

    #[test]
    fn iterates() {
        let p = ThetaParams::new(2).unwrap();
        let pt = PlanePoint { x: 0.3, y: 0.2 };
        assert_eq!(nat_ext_iterate(&p, pt, 0).unwrap(), pt);
        let two = nat_ext_iterate(&p, pt, 2).unwrap();
        let want = 1.0 / (2.0 * p.theta + 1.0 / (4.0 * p.theta + 0.2));
        assert_relative_eq!(two.y, want, epsilon = 1e-15);
        let composed = nat_ext_step(&p, nat_ext_step(&p, pt).unwrap()).unwrap();
        assert_eq!(two, composed);
        let round = nat_ext_iterate(&p, nat_ext_iterate(&p, pt, -1).unwrap(), 1).unwrap();
        assert_relative_eq!(round.x, 0.3, epsilon = 1e-12);
        assert_relative_eq!(round.y, 0.2, epsilon = 1e-12);
        let err = nat_ext_iterate(&p, PlanePoint { x: p.theta, y: 0.2 }, 3).unwrap_err();
        assert_eq!(err, ThetaError::ExcludedState { step: 2 });
    }

    #[test]
    fn extended_digits() {
        let p = ThetaParams::new(2).unwrap();
        let pt = PlanePoint { x: 0.3, y: 0.5 };
        assert_eq!(extended_digit(&p, pt, 1).unwrap(), 4);
        assert_eq!(extended_digit(&p, pt, 0).unwrap(), 2);
        assert_eq!(extended_digit(&p, pt, -1).unwrap(), 2);
        assert_eq!(extended_digit(&p, pt, 2).unwrap(), 2);
    }

    #[test]
    fn mc_degenerate_rectangles() {
        let p = ThetaParams::new(2).unwrap();
        let full = fbar_mc(&p, 3, Rect::full(&p), 2000, 7).unwrap();
        assert_eq!(full.estimate, 1.0);
        let empty = fbar_mc(&p, 3, Rect::new(&p, 0.4, 0.0).unwrap(), 2000, 7).unwrap();
        assert_eq!(empty.estimate, 0.0);
        assert!(fbar_mc(&p, 3, Rect::full(&p), 0, 7).is_err());
    }

    #[test]
    fn mc_is_split_invariant() {
        let p = ThetaParams::new(3).unwrap();
        let r = Rect::new(&p, 0.3, 0.4).unwrap();
        let whole = mc_count(&p, 4, r, 11, 0, 10_000);
        let a = mc_count(&p, 4, r, 11, 0, 3_333);
        let b = mc_count(&p, 4, r, 11, 3_333, 10_000);
        assert_eq!(whole, (a.0 + b.0, a.1 + b.1));
    }

    #[test]
    fn rhs_of_zero_is_zero() {
        let p = ThetaParams::new(2).unwrap();
        assert_eq!(gk2d_rhs(&p, |_, _| 0.0, 0.4, 0.3, 100).unwrap(), 0.0);
    }
}
