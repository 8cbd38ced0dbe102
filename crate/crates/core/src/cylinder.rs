//! Exact cylinder sums for the joint law of `(T^n, s_{n,a})`.
//!
//! Conditioning `s_n ≤ y` is resolved along the digits of `y` itself: at each
//! level either a whole range of digits qualifies (summed in closed form with
//! digamma differences) or exactly one digit passes the condition on to the
//! previous level with the inequality flipped. The free digit prefix is
//! integrated against the law of `s_j`, propagated by Chebyshev collocation
//! of the transfer operator.

use gauss_quad::GaussLegendre;
use statrs::function::gamma::digamma;

use crate::error::{Result, ThetaError};
use crate::expansion::ThetaParams;
use crate::measures::{g_kernel, p_kernel};

pub const DEFAULT_NODES: usize = 24;
pub const DEFAULT_BRANCH_CUT: u64 = 10_000;
/// Largest depth accepted by the engine.
pub const MAX_DEPTH: usize = 4096;

const DIRECT_RANGE: f64 = 16.0;
const ROUNDOFF_PER_LEVEL: f64 = 1e-13;

/// Collocation of the transfer operator on Chebyshev nodes of `[0, θ]`.
#[derive(Debug, Clone)]
pub struct Collocation {
    nodes: Vec<f64>,
    bary: Vec<f64>,
    /// Row-major `M[q][r] = (U ℓ_r)(τ_q)`.
    matrix: Vec<f64>,
    step_error: f64,
}

impl Collocation {
    pub fn new(p: &ThetaParams, n_nodes: usize, branch_cut: u64) -> Result<Self> {
        if n_nodes < 2 {
            return Err(ThetaError::InvalidParameter {
                name: "n_nodes",
                reason: "need at least two collocation nodes".into(),
            });
        }
        if branch_cut < 4 * p.m {
            return Err(ThetaError::InvalidParameter {
                name: "branch_cut",
                reason: format!("{branch_cut} is below 4m"),
            });
        }
        let q = n_nodes as f64;
        let half = std::f64::consts::PI / (2.0 * q);
        let nodes = (0..n_nodes)
            .map(|k| 0.5 * p.theta * (1.0 - ((2 * k + 1) as f64 * half).cos()))
            .collect();
        let bary = (0..n_nodes)
            .map(|k| {
                let s = ((2 * k + 1) as f64 * half).sin();
                if k % 2 == 0 {
                    s
                } else {
                    -s
                }
            })
            .collect();
        let mut c = Self {
            nodes,
            bary,
            matrix: Vec::new(),
            step_error: 0.0,
        };
        let fine = c.operator_matrix(p, branch_cut);
        let coarse = c.operator_matrix(p, branch_cut / 4);
        // the branch-cut error decays like cut^{-3}
        c.step_error = fine
            .chunks(n_nodes)
            .zip(coarse.chunks(n_nodes))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .fold(0.0, f64::max)
            / 63.0;
        c.matrix = fine;
        Ok(c)
    }

    pub fn with_defaults(p: &ThetaParams) -> Self {
        Self::new(p, DEFAULT_NODES, DEFAULT_BRANCH_CUT)
            .expect("default collocation parameters are valid")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Estimated error of one application of the collocated operator, per
    /// unit of weight.
    pub fn step_error(&self) -> f64 {
        self.step_error
    }

    /// Barycentric Lagrange basis at `z`.
    fn basis(&self, z: f64, out: &mut [f64]) {
        if let Some(k) = self.nodes.iter().position(|&t| t == z) {
            out.fill(0.0);
            out[k] = 1.0;
            return;
        }
        let mut total = 0.0;
        for ((o, &t), &w) in out.iter_mut().zip(&self.nodes).zip(&self.bary) {
            *o = w / (z - t);
            total += *o;
        }
        out.iter_mut().for_each(|o| *o /= total);
    }

    fn operator_matrix(&self, p: &ThetaParams, cut: u64) -> Vec<f64> {
        let n = self.len();
        let th = p.theta;
        let gl = GaussLegendre::new(8.try_into().expect("8 is nonzero"));
        let mut m = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        for (q, &t) in self.nodes.iter().enumerate() {
            let row = &mut m[q * n..(q + 1) * n];
            for i in p.m..=cut {
                let i = i as f64;
                let w = p_kernel(th, i, t);
                self.basis(1.0 / (t + i * th), &mut b);
                row.iter_mut().zip(&b).for_each(|(r, v)| *r += w * v);
            }
            // remaining branches as a Riemann sum of c(t) ∫_0^{u_{cut+1}} ℓ_r
            let c = (t * th + 1.0) / th;
            let top = 1.0 / (t + (cut + 1) as f64 * th);
            for (r, cell) in row.iter_mut().enumerate() {
                *cell += c * gl.integrate(0.0, top, |u| {
                    let mut bb = vec![0.0; n];
                    self.basis(u, &mut bb);
                    bb[r]
                });
            }
        }
        m
    }
}

/// The laws of `s_{0,a}, ..., s_{depth,a}` under `γ_a`.
#[derive(Debug, Clone)]
pub struct SeededLaw<'c> {
    colloc: &'c Collocation,
    seed: f64,
    weights: Vec<Vec<f64>>,
}

impl<'c> SeededLaw<'c> {
    pub fn new(colloc: &'c Collocation, seed: f64, depth: usize) -> Self {
        let n = colloc.len();
        let mut w0 = vec![0.0; n];
        colloc.basis(seed, &mut w0);
        let mut weights = vec![w0];
        for _ in 0..depth {
            let prev = weights.last().expect("nonempty");
            let next = (0..n)
                .map(|r| (0..n).map(|q| colloc.matrix[q * n + r] * prev[q]).sum())
                .collect();
            weights.push(next);
        }
        Self {
            colloc,
            seed,
            weights,
        }
    }

    pub fn seed(&self) -> f64 {
        self.seed
    }

    pub fn depth(&self) -> usize {
        self.weights.len() - 1
    }

    /// `∫ h d(law of s_j)`.
    pub fn integrate(&self, j: usize, mut h: impl FnMut(f64) -> f64) -> f64 {
        if j == 0 {
            return h(self.seed);
        }
        self.weights[j]
            .iter()
            .zip(&self.colloc.nodes)
            .map(|(w, &t)| w * h(t))
            .sum()
    }

    fn weight_norm(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| w.iter().map(|v| v.abs()).sum::<f64>())
            .fold(1.0, f64::max)
    }

    /// Error allowance for a depth-`n` cylinder sum.
    pub fn error_bound(&self, n: usize) -> f64 {
        n as f64 * (self.colloc.step_error * self.weight_norm() + ROUNDOFF_PER_LEVEL)
    }
}

/// How the seed coordinate enters once every digit has been fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// The seed is the point `a`.
    Atom,
    /// The seed is uniform on `[0, θ]`.
    Uniform,
}

/// `c(t) |Σ_{i0 ≤ i < i1} 1/(t+iθ+A) - 1/(t+iθ+B)|`; `i1 = None` is an
/// infinite range.
fn range_mass(theta: f64, t: f64, a_end: f64, b_end: f64, i0: f64, i1: Option<f64>) -> f64 {
    let c = (t * theta + 1.0) / theta;
    let (ta, tb) = (t + a_end, t + b_end);
    let diff = match i1 {
        Some(i1) if i1 - i0 <= DIRECT_RANGE => {
            let mut s = 0.0;
            let mut i = i0;
            while i < i1 {
                s += 1.0 / (ta + i * theta) - 1.0 / (tb + i * theta);
                i += 1.0;
            }
            s
        }
        _ => {
            let lead = (digamma(i0 + tb / theta) - digamma(i0 + ta / theta)) / theta;
            match i1 {
                Some(i1) => lead - (digamma(i1 + tb / theta) - digamma(i1 + ta / theta)) / theta,
                None => lead,
            }
        }
    };
    c * diff.abs()
}

/// `cf(D, 0)` and `cf(D, x)` for the fixed digits `D` (stored innermost
/// first).
fn ends(theta: f64, fixed: &[f64], x: f64) -> (f64, f64) {
    let fold = |tail: f64| fixed.iter().fold(tail, |v, &d| 1.0 / (d * theta + v));
    (fold(0.0), fold(x))
}

/// Probability that `T^n ≤ x` and `s_n ≤ y`, with the seed distributed as
/// `terminal` says (for [`Terminal::Uniform`] the law must be seeded at 0).
pub fn joint_mass(
    p: &ThetaParams,
    law: &SeededLaw,
    n: usize,
    x: f64,
    y: f64,
    terminal: Terminal,
) -> f64 {
    debug_assert!(law.depth() + 1 >= n);
    let th = p.theta;
    let m = p.mf();
    let mut total = 0.0;
    let mut fixed: Vec<f64> = Vec::with_capacity(n);
    let mut z = y;
    let mut le = true;
    for r in (1..=n).rev() {
        let (a_end, b_end) = ends(th, &fixed, x);
        let j = r - 1;
        let whole = |t: f64| range_mass(th, t, a_end, b_end, m, None);
        if le {
            if z >= th {
                return total + law.integrate(j, whole);
            }
            if z <= 0.0 {
                return total;
            }
            let (l, next) = p.split(z);
            total += law.integrate(j, |t| range_mass(th, t, a_end, b_end, l + 1.0, None));
            fixed.push(l);
            z = next;
        } else {
            if z <= 0.0 {
                return total + law.integrate(j, whole);
            }
            let (l, next) = p.split(z);
            if l > m {
                total += law.integrate(j, |t| range_mass(th, t, a_end, b_end, m, Some(l)));
            }
            fixed.push(l);
            z = next;
        }
        le = !le;
    }
    let (a_end, b_end) = ends(th, &fixed, x);
    match terminal {
        Terminal::Atom => {
            let a = law.seed();
            let passes = if le { a <= z } else { a >= z };
            if passes {
                total += (g_kernel(th, a, a_end) - g_kernel(th, a, b_end)).abs();
            }
        }
        Terminal::Uniform => {
            let frac = if le { z / th } else { 1.0 - z / th };
            total += (a_end - b_end).abs() / th * frac;
        }
    }
    total
}

pub(crate) fn check_depth(n: usize) -> Result<()> {
    if n > MAX_DEPTH {
        return Err(ThetaError::ResourceBudget {
            what: "depth",
            requested: n as u64,
            limit: MAX_DEPTH as u64,
        });
    }
    Ok(())
}
