//! Confined mean-field equilibrium on a truncated line [-L, L] (d = 1):
//! the fixed-point map S_beta(rho) = e^{-beta V - beta W*rho} / normalization,
//! its Picard iteration with contraction diagnostics, the reference-measure
//! norm monotonicity, and the rho*-centered interaction kernel with its
//! cancellation property.
//!
//! The whole-space problem is truncated to [-L, L]; L must be chosen so the
//! reference measure's tail outside the box is below budget (the constructor
//! enforces a crude version of this via e^{-beta V} decay at the endpoints).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Confining potentials from a small expression set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConfiningPotential {
    /// a x^2
    Quadratic { a: f64 },
    /// a x^4 + b x^2
    Quartic { a: f64, b: f64 },
    /// a (x^2 - b)^2
    DoubleWell { a: f64, b: f64 },
    Constant,
}

impl ConfiningPotential {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ConfiningPotential::Quadratic { a } => a * x * x,
            ConfiningPotential::Quartic { a, b } => a * x.powi(4) + b * x * x,
            ConfiningPotential::DoubleWell { a, b } => {
                let d = x * x - b;
                a * d * d
            }
            ConfiningPotential::Constant => 0.0,
        }
    }
}

/// Pair interactions from a small expression set (even, bounded negative part).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PairPotential {
    /// amp e^{-(x/width)^2}
    Gaussian { amp: f64, width: f64 },
    /// amp e^{-(x/width)^2} cos(freq x)
    CosineLocalized { amp: f64, width: f64, freq: f64 },
    Zero,
}

impl PairPotential {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PairPotential::Gaussian { amp, width } => amp * (-(x / width).powi(2)).exp(),
            PairPotential::CosineLocalized { amp, width, freq } => {
                amp * (-(x / width).powi(2)).exp() * (freq * x).cos()
            }
            PairPotential::Zero => 0.0,
        }
    }
}

/// Discretized confined problem on a uniform grid over [-L, L] with trapezoid
/// weights.
#[derive(Debug, Clone)]
pub struct ConfinedProblem {
    pub v: ConfiningPotential,
    pub w: PairPotential,
    pub beta: f64,
    pub l: f64,
    pub grid: Vec<f64>,
    weights: Vec<f64>,
    /// W(x_i - x_j) table (n x n).
    w_table: Vec<f64>,
}

impl ConfinedProblem {
    pub fn new(
        v: ConfiningPotential,
        w: PairPotential,
        beta: f64,
        l: f64,
        n: usize,
    ) -> Result<Self> {
        if beta < 0.0 {
            return Err(Error::invalid("beta must be >= 0"));
        }
        if n < 8 || l <= 0.0 {
            return Err(Error::invalid("need n >= 8 grid points and L > 0"));
        }
        let grid: Vec<f64> = (0..n)
            .map(|i| -l + 2.0 * l * i as f64 / (n - 1) as f64)
            .collect();
        let h = 2.0 * l / (n - 1) as f64;
        let weights: Vec<f64> = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
            .collect();
        // Tail budget: the truncated reference must carry essentially all of
        // e^{-beta V}; compare endpoint density to the max.
        if beta > 0.0 {
            let vals: Vec<f64> = grid.iter().map(|&x| (-beta * v.eval(x)).exp()).collect();
            let vmax = vals.iter().cloned().fold(0.0f64, f64::max);
            let edge = vals[0].max(vals[n - 1]);
            if edge > 1e-6 * vmax {
                return Err(Error::invalid(format!(
                    "domain too small: e^(-beta V) at the boundary is {:.2e} of its max",
                    edge / vmax
                )));
            }
        }
        let mut w_table = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                w_table[i * n + j] = w.eval(grid[i] - grid[j]);
            }
        }
        Ok(ConfinedProblem {
            v,
            w,
            beta,
            l,
            grid,
            weights,
            w_table,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn quad(&self, f: &[f64]) -> f64 {
        f.iter().zip(self.weights.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn l1_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b.iter())
            .zip(self.weights.iter())
            .map(|((x, y), w)| (x - y).abs() * w)
            .sum()
    }

    /// Discrete convolution (W * rho)(x_i) by quadrature.
    pub fn convolve(&self, rho: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.w_table[i * n + j] * rho[j] * self.weights[j];
            }
            *o = acc;
        }
        out
    }

    /// Normalized reference measure eta_beta = e^{-beta V} / int e^{-beta V}.
    pub fn eta(&self) -> Vec<f64> {
        self.eta_at(self.beta)
    }

    pub fn eta_at(&self, beta: f64) -> Vec<f64> {
        let vals: Vec<f64> = self.grid.iter().map(|&x| (-beta * self.v.eval(x)).exp()).collect();
        let mass = self.quad(&vals);
        vals.into_iter().map(|v| v / mass).collect()
    }

    /// L^q norm of a density by quadrature.
    pub fn lq_norm(&self, f: &[f64], q: f64) -> f64 {
        self.quad(&f.iter().map(|v| v.abs().powf(q)).collect::<Vec<_>>())
            .powf(1.0 / q)
    }
}

/// One application of the fixed-point map, with log-sum-exp normalization
/// guarding the exponent.
pub fn apply_s(problem: &ConfinedProblem, rho: &[f64]) -> Vec<f64> {
    let conv = problem.convolve(rho);
    let exponent: Vec<f64> = problem
        .grid
        .iter()
        .zip(conv.iter())
        .map(|(&x, &c)| -problem.beta * (problem.v.eval(x) + c))
        .collect();
    let emax = exponent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vals: Vec<f64> = exponent.iter().map(|e| (e - emax).exp()).collect();
    let mass = problem.quad(&vals);
    vals.into_iter().map(|v| v / mass).collect()
}

/// Result of the Picard iteration.
#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub rho: Vec<f64>,
    /// L1 update distances per iteration.
    pub iterates: Vec<f64>,
    /// Successive ratios d_{n+1}/d_n.
    pub contraction_ratios: Vec<f64>,
    /// ||rho - S(rho)||_{L1} at the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

/// Picard iteration from eta_beta; stops when the L1 update is below tol.
/// Signals non-contraction if the update ratio exceeds 1 for 5 consecutive
/// iterations (beta too large for the contraction regime).
pub fn solve_fixed_point(
    problem: &ConfinedProblem,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    if tol <= 0.0 {
        return Err(Error::invalid("tol must be > 0"));
    }
    let mut rho = problem.eta();
    let mut iterates = Vec::new();
    let mut ratios = Vec::new();
    let mut bad_streak = 0usize;
    let mut prev_dist: Option<f64> = None;
    for _ in 0..max_iter {
        let next = apply_s(problem, &rho);
        let dist = problem.l1_distance(&next, &rho);
        iterates.push(dist);
        if let Some(pd) = prev_dist {
            if pd > 0.0 {
                let ratio = dist / pd;
                ratios.push(ratio);
                if ratio > 1.0 {
                    bad_streak += 1;
                    if bad_streak >= 5 {
                        return Err(Error::NonConvergence(
                            "Picard iteration not contracting (5 consecutive expanding steps); beta beyond the contraction regime".into(),
                        ));
                    }
                } else {
                    bad_streak = 0;
                }
            }
        }
        prev_dist = Some(dist);
        rho = next;
        if dist < tol {
            let residual = problem.l1_distance(&apply_s(problem, &rho), &rho);
            return Ok(FixedPointResult {
                rho,
                iterates,
                contraction_ratios: ratios,
                residual,
                converged: true,
            });
        }
    }
    let residual = problem.l1_distance(&apply_s(problem, &rho), &rho);
    Ok(FixedPointResult {
        rho,
        iterates,
        contraction_ratios: ratios,
        residual,
        converged: false,
    })
}

/// ||eta_beta||_{L^q} over an increasing beta grid; nondecreasing in beta.
pub fn eta_norm_sweep(
    problem: &ConfinedProblem,
    q: f64,
    beta_grid: &[f64],
) -> Result<Vec<f64>> {
    if q < 1.0 {
        return Err(Error::invalid("q must be >= 1"));
    }
    if beta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("beta grid must be strictly increasing"));
    }
    Ok(beta_grid
        .iter()
        .map(|&b| problem.lq_norm(&problem.eta_at(b), q))
        .collect())
}

/// The rho*-centered interaction kernel
/// W_beta(x,y) = W(x-y) - (W*rho*)(x) - (W*rho*)(y) + double integral,
/// tabulated on the grid.
#[derive(Debug, Clone)]
pub struct CenteredKernel {
    pub table: Vec<f64>,
    pub n: usize,
    pub double_integral: f64,
}

pub fn centered_kernel(problem: &ConfinedProblem, rho_star: &[f64]) -> CenteredKernel {
    let n = problem.n();
    let conv = problem.convolve(rho_star);
    let double_integral = problem.quad(
        &conv
            .iter()
            .zip(rho_star.iter())
            .map(|(c, r)| c * r)
            .collect::<Vec<_>>(),
    );
    let mut table = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // Grouped so the arithmetic is bitwise symmetric in (i, j).
            table[i * n + j] =
                problem.w_table[i * n + j] - (conv[i] + conv[j]) + double_integral;
        }
    }
    CenteredKernel {
        table,
        n,
        double_integral,
    }
}

impl CenteredKernel {
    /// max_x | integral W_beta(x, y) rho*(y) dy | (the cancellation property).
    pub fn cancellation_sup(&self, problem: &ConfinedProblem, rho_star: &[f64]) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.table[i * n + j] * rho_star[j] * problem.weights[j];
            }
            worst = worst.max(acc.abs());
        }
        worst
    }
}

/// M_beta(x, v) = gamma_beta(v) rho*(x) with the Maxwellian velocity factor.
pub fn maxwellian_equilibrium(
    problem: &ConfinedProblem,
    rho_star: &[f64],
    x: f64,
    v: f64,
) -> f64 {
    let gamma =
        (problem.beta / (2.0 * std::f64::consts::PI)).sqrt() * (-0.5 * problem.beta * v * v).exp();
    // Linear interpolation of rho* at x.
    let n = problem.n();
    let h = 2.0 * problem.l / (n - 1) as f64;
    let pos = ((x + problem.l) / h).clamp(0.0, (n - 1) as f64);
    let i = (pos.floor() as usize).min(n - 2);
    let frac = pos - i as f64;
    gamma * (rho_star[i] * (1.0 - frac) + rho_star[i + 1] * frac)
}

/// Self-consistency residual of the fixed-point equation at (x, v): plugging
/// gamma rho* into the defining right-hand side must reproduce the value.
pub fn self_consistency_residual(
    problem: &ConfinedProblem,
    rho_star: &[f64],
    xs: &[f64],
    vs: &[f64],
) -> f64 {
    let s_rho = apply_s(problem, rho_star);
    let mut worst: f64 = 0.0;
    for &x in xs {
        for &v in vs {
            let lhs = maxwellian_equilibrium(problem, rho_star, x, v);
            let rhs = maxwellian_equilibrium(problem, &s_rho, x, v);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}
