//! One-dimensional Gauss-Kuzmin iteration, the error term `e_{n,a}` of the
//! joint law of `(T^n, s_{n,a})`, and the explicit rate bounds.

use serde::Serialize;
use statrs::function::gamma::digamma;

use crate::cylinder::{check_depth, joint_mass, Collocation, SeededLaw, Terminal};
use crate::error::{Result, ThetaError};
use crate::expansion::ThetaParams;
use crate::measures::{gamma_cdf, s_chain, transition_product};
use crate::transfer::GridFunction;

/// Largest grid accepted by the grid-based reports.
pub const MAX_GRID: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gk1dStep {
    pub f: GridFunction,
    /// `sup|F'| θ / (θ² i_max)`; zero when the series is summed in full.
    pub tail_bound: f64,
}

/// `F_{n+1}(x) = Σ_{i≥m} [F(1/(iθ)) - F(1/(iθ+x))]` for the piecewise-linear
/// `F`. With `i_max = None` the whole series is summed: branches landing in
/// the same grid cell are grouped and summed with digamma differences.
pub fn gk1d_step(p: &ThetaParams, f: &GridFunction, i_max: Option<u64>) -> Result<Gk1dStep> {
    if let Some(i) = i_max {
        if i < p.m {
            return Err(ThetaError::InvalidParameter {
                name: "i_max",
                reason: format!("{i} is below m = {}", p.m),
            });
        }
    }
    let f0 = f.values[0];
    let shifted: Vec<f64> = f.values.iter().map(|v| v - f0).collect();
    let cut = i_max.map(|i| i as f64);
    let base = branch_sum(p, &shifted, f.step(), 0.0, cut);
    let mut values: Vec<f64> = f
        .nodes()
        .map(|x| base - branch_sum(p, &shifted, f.step(), x, cut))
        .collect();
    values[0] = 0.0;
    let tail_bound = match i_max {
        None => 0.0,
        Some(i) => {
            let slope = f
                .values
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(0.0, f64::max)
                / f.step();
            slope * p.theta / (p.theta * p.theta * i as f64)
        }
    };
    Ok(Gk1dStep {
        f: GridFunction::new(p, values)?,
        tail_bound,
    })
}

/// `Σ_{i=m}^{cut} F̃(1/(iθ+x))` for grid samples `ft` with `ft[0] = 0`. The
/// infinite sum is regularized by dropping the common `ln(K)/θ` growth,
/// which cancels between `x` and `0`.
fn branch_sum(p: &ThetaParams, ft: &[f64], h: f64, x: f64, cut: Option<f64>) -> f64 {
    let th = p.theta;
    let n = ft.len() - 1;
    let m = p.mf();
    let interp = |z: f64| {
        let t = (z / h).clamp(0.0, n as f64);
        let k = (t as usize).min(n - 1);
        ft[k] + (t - k as f64) * (ft[k + 1] - ft[k])
    };
    let mut direct_top = ((n as f64 * m).sqrt().ceil() + m).floor();
    if let Some(c) = cut {
        direct_top = direct_top.min(c);
    }
    let mut total = 0.0;
    let mut i = m;
    while i <= direct_top {
        total += interp(1.0 / (i * th + x));
        i += 1.0;
    }
    let z_top = 1.0 / ((direct_top + 1.0) * th + x);
    let j_top = ((z_top / h) as usize).min(n - 1);
    let c = x / th;
    let alpha = |j: usize| (1.0 / (j as f64 * h) - x) / th;
    for j in (0..=j_top).rev() {
        let slope = (ft[j + 1] - ft[j]) / h;
        let lo = (direct_top + 1.0).max(alpha(j + 1).floor() + 1.0);
        let hi = if j == 0 {
            match cut {
                None => {
                    total += slope * (-digamma(lo + c) / th);
                    continue;
                }
                Some(cut) => cut,
            }
        } else {
            let hi = alpha(j).floor();
            cut.map_or(hi, |cut| hi.min(cut))
        };
        if hi < lo {
            continue;
        }
        let offset = ft[j] - slope * j as f64 * h;
        total += offset * (hi - lo + 1.0) + slope * (digamma(hi + 1.0 + c) - digamma(lo + c)) / th;
    }
    total
}

/// The same series for a function given in closed form.
pub fn gk1d_series(p: &ThetaParams, f: impl Fn(f64) -> f64, x: f64, i_max: u64) -> Result<f64> {
    let x = p.check_unit("x", x)?;
    let th = p.theta;
    Ok((p.m..=i_max)
        .map(|i| {
            let i = i as f64;
            f(1.0 / (i * th)) - f(1.0 / (i * th + x))
        })
        .sum())
}

/// `F_0, F_1, ..., F_n` by repeated [`gk1d_step`].
pub fn gk1d_iterate(
    p: &ThetaParams,
    f0: GridFunction,
    n: usize,
    i_max: Option<u64>,
) -> Result<Vec<GridFunction>> {
    let mut out = vec![f0];
    for _ in 0..n {
        let next = gk1d_step(p, out.last().expect("nonempty"), i_max)?.f;
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValue {
    pub value: f64,
    /// Half-width of the error interval.
    pub error: f64,
}

/// `F_n(x) = λ(T^n ≤ x)/θ` by exact cylinder sums.
pub fn fn_oracle(p: &ThetaParams, n: usize, x: f64) -> Result<OracleValue> {
    joint_dist(p, 0.0, n, x, p.theta)
}

/// `γ_a(T^n ≤ x, s_{n,a} ≤ y)`.
pub fn joint_dist(p: &ThetaParams, a: f64, n: usize, x: f64, y: f64) -> Result<OracleValue> {
    check_depth(n)?;
    let colloc = Collocation::with_defaults(p);
    let law = SeededLaw::new(&colloc, p.check_unit("a", a)?, n);
    joint_with(p, &law, n, x, y)
}

/// [`joint_dist`] for a prepared seeded law.
pub fn joint_with(
    p: &ThetaParams,
    law: &SeededLaw,
    n: usize,
    x: f64,
    y: f64,
) -> Result<OracleValue> {
    let x = p.check_unit("x", x)?;
    let y = p.check_unit("y", y)?;
    let value = joint_mass(p, law, n, x, y, Terminal::Atom);
    Ok(OracleValue {
        value: value.clamp(0.0, 1.0),
        error: law.error_bound(n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub n: usize,
    pub sup_deviation: f64,
    /// `ln(1+θ²)/(m+1)^n`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub grid: usize,
    pub deviations: Vec<DecayPoint>,
    /// `exp` of the least-squares slope of `ln sup|F_n - γ|` over `n ≥ 1`.
    pub fitted_rate: f64,
}

pub fn decay_estimate(p: &ThetaParams, n_max: usize, grid: usize) -> Result<DecayReport> {
    if n_max < 2 {
        return Err(ThetaError::InvalidParameter {
            name: "n_max",
            reason: "need at least two steps to fit a rate".into(),
        });
    }
    check_grid(grid)?;
    let th = p.theta;
    let f0 = GridFunction::from_fn(p, grid, |x| x / th)?;
    let limit = GridFunction::from_fn(p, grid, |x| (th * x).ln_1p() / p.log_norm)?;
    let iterates = gk1d_iterate(p, f0, n_max, None)?;
    let deviations: Vec<DecayPoint> = iterates
        .iter()
        .enumerate()
        .map(|(n, f)| DecayPoint {
            n,
            sup_deviation: f
                .values
                .iter()
                .zip(&limit.values)
                .fold(0.0, |a, (u, v)| a.max((u - v).abs())),
            bound: p.log_norm / (p.mf() + 1.0).powi(n as i32),
        })
        .collect();
    let pts: Vec<(f64, f64)> = deviations[1..]
        .iter()
        .map(|d| (d.n as f64, d.sup_deviation.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|q| q.0).sum::<f64>() / k;
    let my = pts.iter().map(|q| q.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|q| (q.0 - mx).powi(2)).sum();
    Ok(DecayReport {
        grid,
        deviations,
        fitted_rate: (sxy / sxx).exp(),
    })
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < 2 {
        return Err(ThetaError::InvalidParameter {
            name: "grid",
            reason: "must be at least 2".into(),
        });
    }
    if grid > MAX_GRID {
        return Err(ThetaError::ResourceBudget {
            what: "grid",
            requested: grid as u64,
            limit: MAX_GRID as u64,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSurface {
    pub n: usize,
    pub a: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[i][j] = e_{n,a}(xs[i], ys[j])`.
    pub values: Vec<Vec<f64>>,
    pub sup_abs: f64,
    pub argmax: (f64, f64),
    pub truncation_bound: f64,
}

/// `grid` equally spaced points covering `[0, θ]`, both ends included.
pub fn uniform_points(p: &ThetaParams, grid: usize) -> Vec<f64> {
    let h = p.theta / (grid - 1) as f64;
    (0..grid)
        .map(|k| if k + 1 == grid { p.theta } else { k as f64 * h })
        .collect()
}

pub fn error_surface(p: &ThetaParams, a: f64, n: usize, grid: usize) -> Result<ErrorSurface> {
    check_grid(grid)?;
    check_depth(n)?;
    let colloc = Collocation::with_defaults(p);
    let pts = uniform_points(p, grid);
    surface_on(p, &colloc, a, n, &pts, &pts)
}

fn surface_on(
    p: &ThetaParams,
    colloc: &Collocation,
    a: f64,
    n: usize,
    xs: &[f64],
    ys: &[f64],
) -> Result<ErrorSurface> {
    let a = p.check_unit("a", a)?;
    let law = SeededLaw::new(colloc, a, n);
    let mut values = Vec::with_capacity(xs.len());
    let mut sup_abs = 0.0f64;
    let mut argmax = (0.0, 0.0);
    for &x in xs {
        let row: Vec<f64> = ys
            .iter()
            .map(|&y| joint_mass(p, &law, n, x, y, Terminal::Atom) - (x * y).ln_1p() / p.log_norm)
            .collect();
        for (&y, &e) in ys.iter().zip(&row) {
            if e.abs() > sup_abs {
                sup_abs = e.abs();
                argmax = (x, y);
            }
        }
        values.push(row);
    }
    Ok(ErrorSurface {
        n,
        a,
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        values,
        sup_abs,
        argmax,
        truncation_bound: law.error_bound(n),
    })
}

/// `P_{m(n)}(a)`: the transition product along `n` digits all equal to `m`.
pub fn p_mn(p: &ThetaParams, n: usize, a: f64) -> Result<f64> {
    if n == 0 {
        return Err(ThetaError::InvalidParameter {
            name: "n",
            reason: "must be at least 1".into(),
        });
    }
    transition_product(p, &vec![p.m; n], a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PmnClosed {
    /// `(m+1)/(q_{n+1} q_{n+2})`.
    pub closed: f64,
    /// `p_mn(n, θ)`.
    pub product: f64,
    pub ratio: f64,
}

pub fn p_mn_closed(p: &ThetaParams, n: usize) -> Result<PmnClosed> {
    let product = p_mn(p, n, p.theta)?;
    let closed = (p.mf() + 1.0) / (q_recurrence(p, n as i64 + 1) * q_recurrence(p, n as i64 + 2));
    Ok(PmnClosed {
        closed,
        product,
        ratio: closed / product,
    })
}

/// `q_k = mθ q_{k-1} + q_{k-2}`, `q_{-1} = 0`, `q_0 = 1`.
pub fn q_recurrence(p: &ThetaParams, n: i64) -> f64 {
    let a = p.mf() * p.theta;
    let (mut prev, mut cur) = (0.0, 1.0);
    if n < 0 {
        return prev;
    }
    for _ in 0..n {
        (prev, cur) = (cur, a * cur + prev);
    }
    cur
}

/// Binet form `θ/√(1+4θ²) [λ₊^{n+1} - λ₋^{n+1}]`, `λ± = (1 ± √(1+4θ²))/(2θ)`.
pub fn q_closed_form(p: &ThetaParams, n: i64) -> Result<f64> {
    if n < -1 {
        return Err(ThetaError::InvalidParameter {
            name: "n",
            reason: "must be at least -1".into(),
        });
    }
    let th = p.theta;
    let r = (1.0 + 4.0 * th * th).sqrt();
    let plus = (1.0 + r) / (2.0 * th);
    let minus = (1.0 - r) / (2.0 * th);
    let k = (n + 1) as i32;
    Ok(th / r * (plus.powi(k) - minus.powi(k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsRow {
    pub m: u64,
    pub theta: f64,
    pub lower_limit: f64,
    pub upper_limit: f64,
}

pub fn rate_limits(p: &ThetaParams) -> BoundsRow {
    let t2 = p.theta * p.theta;
    BoundsRow {
        m: p.m,
        theta: p.theta,
        lower_limit: 2.0 * t2 / (1.0 + 2.0 * t2 + (1.0 + 4.0 * t2).sqrt()),
        upper_limit: 1.0 / (p.mf() + 1.0),
    }
}

/// `(½ P_{m(n)}(θ))^{1/n}`, which tends to the lower rate limit.
pub fn empirical_lower_rate(p: &ThetaParams, n: usize) -> Result<f64> {
    Ok((0.5 * p_mn(p, n, p.theta)?).powf(1.0 / n as f64))
}

/// `P_{m(n+1)}(θ) / P_{m(n)}(θ)`, which converges to the lower rate limit
/// geometrically fast.
pub fn lower_rate_ratio(p: &ThetaParams, n: usize) -> Result<f64> {
    Ok(p_mn(p, n + 1, p.theta)? / p_mn(p, n, p.theta)?)
}

pub fn bounds_table(ms: &[u64]) -> Result<Vec<BoundsRow>> {
    ms.iter()
        .map(|&m| ThetaParams::new(m).map(|p| rate_limits(&p)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichRow {
    pub a: f64,
    pub sup_error: f64,
    pub argmax: (f64, f64),
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub m: u64,
    pub n: usize,
    pub grid: usize,
    /// `½ P_{m(n)}(θ)`.
    pub lower: f64,
    /// `(m+1)^{-n}`.
    pub upper: f64,
    /// Largest `sup|e_{n,a}|` over `a_list`.
    pub sup_error: f64,
    pub truncation_bound: f64,
    pub grid_allowance: f64,
    pub slack: f64,
    pub rows: Vec<SandwichRow>,
    pub pass: bool,
}

/// Relative offset of the two extra `y` points placed around the atom of
/// `s_{n,a}` at the all-`m` digit string.
pub const STRADDLE: f64 = 1e-9;

/// Compares `sup_{x,y} |e_{n,a}|` for each `a` with the window
/// `[½ P_{m(n)}(θ), (m+1)^{-n}]`. The `y` grid is augmented with two points
/// straddling the largest atom of `s_{n,a}`, where the jump of size at least
/// `P_{m(n)}(θ)` sits.
pub fn sandwich_check(
    p: &ThetaParams,
    n: usize,
    a_list: &[f64],
    grid: usize,
) -> Result<SandwichReport> {
    if n == 0 {
        return Err(ThetaError::InvalidParameter {
            name: "n",
            reason: "must be at least 1".into(),
        });
    }
    if a_list.is_empty() {
        return Err(ThetaError::InvalidParameter {
            name: "a_list",
            reason: "must not be empty".into(),
        });
    }
    check_grid(grid)?;
    check_depth(n)?;
    let colloc = Collocation::with_defaults(p);
    let lower = 0.5 * p_mn(p, n, p.theta)?;
    let upper = (p.mf() + 1.0).powi(-(n as i32));
    let xs = uniform_points(p, grid);
    let mut truncation_bound = 0.0f64;
    let mut grid_allowance = 0.0f64;
    let mut surfaces = Vec::with_capacity(a_list.len());
    for &a in a_list {
        let a = p.check_unit("a", a)?;
        let atom = s_chain(p, a, &vec![p.m; n])?.last();
        let mut ys = xs.clone();
        let below = atom * (1.0 - STRADDLE);
        let above = atom * (1.0 + STRADDLE);
        ys.push(below);
        if above <= p.theta {
            ys.push(above);
        }
        ys.sort_by(f64::total_cmp);
        // the limit term moves by at most this much across the straddle
        grid_allowance = grid_allowance
            .max(((p.theta * above).ln_1p() - (p.theta * below).ln_1p()) / p.log_norm);
        let s = surface_on(p, &colloc, a, n, &xs, &ys)?;
        truncation_bound = truncation_bound.max(s.truncation_bound);
        surfaces.push(s);
    }
    let slack = truncation_bound + grid_allowance;
    let rows: Vec<SandwichRow> = surfaces
        .iter()
        .map(|s| SandwichRow {
            a: s.a,
            sup_error: s.sup_abs,
            argmax: s.argmax,
            pass: lower - slack <= s.sup_abs && s.sup_abs <= upper + slack,
        })
        .collect();
    Ok(SandwichReport {
        m: p.m,
        n,
        grid,
        lower,
        upper,
        sup_error: rows.iter().map(|r| r.sup_error).fold(0.0, f64::max),
        truncation_bound,
        grid_allowance,
        slack,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

/// `sup_x |F(x) - γ([0, x])|` over the grid nodes.
pub fn sup_distance_to_gamma(p: &ThetaParams, f: &GridFunction) -> Result<f64> {
    f.nodes().zip(&f.values).try_fold(0.0f64, |acc, (x, v)| {
        Ok(acc.max((v - gamma_cdf(p, x)?).abs()))
    })
}
