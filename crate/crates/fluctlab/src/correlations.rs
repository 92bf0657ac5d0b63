//! Hoeffding correlation functions H_{N,m} computed exactly on small tensor
//! grids over (T^1 x [-v_max, v_max])^m, and Monte Carlo estimators for pair
//! pairings and the Vlasov remainder term from weighted ensembles.
//!
//! The grid algebra is closed: the discrete reference Maxwellian is
//! normalized so its quadrature mass is exactly 1, which turns the
//! inclusion-exclusion formula, the tensored projection route and the
//! orthogonality identity into exact finite-dimensional linear algebra
//! (equalities to rounding, not to discretization error).

use crate::error::{Error, Result};
use crate::kernels::FourierKernel;
use crate::numerics::mean_stderr;
use crate::observables::Observable;
use crate::dynamics::{u_stat_order1, u_stat_order2, ParticleState};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Shared one-particle grid: nx uniform torus points, nv+1 trapezoid points on
/// [-v_max, v_max], with the normalized discrete Maxwellian as reference.
#[derive(Debug, Clone)]
pub struct PhaseGrid {
    pub beta: f64,
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
    /// Per-point quadrature weight (length nx*(nv+1)).
    weight: Vec<f64>,
    /// Normalized reference Maxwellian values (length nx*(nv+1)).
    reference: Vec<f64>,
    xs: Vec<f64>,
    vs: Vec<f64>,
}

impl PhaseGrid {
    pub fn new(beta: f64, nx: usize, nv: usize, v_max: f64) -> Result<Self> {
        if beta <= 0.0 {
            return Err(Error::invalid("beta must be > 0"));
        }
        if v_max < 6.0 / beta.sqrt() {
            return Err(Error::invalid(
                "v_max must be >= 6/sqrt(beta) (Gaussian tail budget)",
            ));
        }
        if nx < 2 || nv < 2 {
            return Err(Error::invalid("grid must have at least 2 points per axis"));
        }
        let xs: Vec<f64> = (0..nx).map(|i| i as f64 / nx as f64).collect();
        let vs: Vec<f64> = (0..=nv)
            .map(|j| -v_max + 2.0 * v_max * j as f64 / nv as f64)
            .collect();
        let dv = 2.0 * v_max / nv as f64;
        let mut weight = Vec::with_capacity(nx * (nv + 1));
        let mut reference = Vec::with_capacity(nx * (nv + 1));
        for _ in 0..nx {
            for (j, &v) in vs.iter().enumerate() {
                let wv = if j == 0 || j == nv { 0.5 } else { 1.0 };
                weight.push(wv * dv / nx as f64);
                reference.push((beta / TWO_PI).sqrt() * (-0.5 * beta * v * v).exp());
            }
        }
        // Normalize the reference so the discrete mass is exactly 1.
        let mass: f64 = weight
            .iter()
            .zip(reference.iter())
            .map(|(w, r)| w * r)
            .sum();
        reference.iter_mut().for_each(|r| *r /= mass);
        Ok(PhaseGrid {
            beta,
            nx,
            nv,
            v_max,
            weight,
            reference,
            xs,
            vs,
        })
    }

    pub fn points(&self) -> usize {
        self.nx * (self.nv + 1)
    }

    pub fn coords(&self, p: usize) -> (f64, f64) {
        (self.xs[p / (self.nv + 1)], self.vs[p % (self.nv + 1)])
    }

    pub fn weight_at(&self, p: usize) -> f64 {
        self.weight[p]
    }

    pub fn reference_at(&self, p: usize) -> f64 {
        self.reference[p]
    }
}

/// An m-particle density sampled on the tensor grid.
#[derive(Debug, Clone)]
pub struct GridDensity {
    pub grid: PhaseGrid,
    pub m: usize,
    /// Flat index p_1 + P p_2 + ... + P^{m-1} p_m.
    pub values: Vec<f64>,
}

impl GridDensity {
    /// Tabulate an m-particle density from a callable on phase-space tuples.
    pub fn from_fn<F>(grid: &PhaseGrid, m: usize, f: F) -> Result<Self>
    where
        F: Fn(&[(f64, f64)]) -> f64,
    {
        if m == 0 || m > 3 {
            return Err(Error::Unsupported("GridDensity supports 1 <= m <= 3".into()));
        }
        let p = grid.points();
        let total = p.pow(m as u32);
        let mut values = Vec::with_capacity(total);
        let mut zs = vec![(0.0, 0.0); m];
        for flat in 0..total {
            let mut rem = flat;
            for slot in zs.iter_mut() {
                *slot = grid.coords(rem % p);
                rem /= p;
            }
            values.push(f(&zs));
        }
        Ok(GridDensity {
            grid: grid.clone(),
            m,
            values,
        })
    }

    /// Discrete integral over all variables.
    pub fn mass(&self) -> f64 {
        let p = self.grid.points();
        let mut acc = 0.0;
        for (flat, &v) in self.values.iter().enumerate() {
            let mut rem = flat;
            let mut w = 1.0;
            for _ in 0..self.m {
                w *= self.grid.weight_at(rem % p);
                rem /= p;
            }
            acc += w * v;
        }
        acc
    }

    /// Marginal onto the first `j` coordinates.
    pub fn marginal(&self, j: usize) -> Result<GridDensity> {
        if j == 0 || j > self.m {
            return Err(Error::invalid("marginal order must satisfy 1 <= j <= m"));
        }
        if j == self.m {
            return Ok(self.clone());
        }
        let p = self.grid.points();
        let keep = p.pow(j as u32);
        let drop = p.pow((self.m - j) as u32);
        let mut values = vec![0.0; keep];
        for hi in 0..drop {
            let mut rem = hi;
            let mut w = 1.0;
            for _ in 0..(self.m - j) {
                w *= self.grid.weight_at(rem % p);
                rem /= p;
            }
            let base = hi * keep;
            for lo in 0..keep {
                values[lo] += w * self.values[base + lo];
            }
        }
        Ok(GridDensity {
            grid: self.grid.clone(),
            m: j,
            values,
        })
    }

    /// Apply (Id - pi) on coordinate `coord`, where pi h = M_ref * integral h.
    fn project_out_reference(&mut self, coord: usize) {
        let p = self.grid.points();
        let inner = p.pow(coord as u32);
        let outer = p.pow((self.m - 1 - coord) as u32);
        for o in 0..outer {
            for i in 0..inner {
                // Integrate along the coord axis.
                let mut integral = 0.0;
                for q in 0..p {
                    let idx = o * inner * p + q * inner + i;
                    integral += self.grid.weight_at(q) * self.values[idx];
                }
                for q in 0..p {
                    let idx = o * inner * p + q * inner + i;
                    self.values[idx] -= self.grid.reference_at(q) * integral;
                }
            }
        }
    }

    /// Weighted square norm  integral |F|^2 / M_ref^{(x) m}.
    pub fn weighted_l2_sq(&self) -> f64 {
        let p = self.grid.points();
        let mut acc = 0.0;
        for (flat, &v) in self.values.iter().enumerate() {
            let mut rem = flat;
            let mut w = 1.0;
            let mut r = 1.0;
            for _ in 0..self.m {
                w *= self.grid.weight_at(rem % p);
                r *= self.grid.reference_at(rem % p);
                rem /= p;
            }
            acc += w * v * v / r;
        }
        acc
    }

    /// Pairing  integral  prod_i phi_i(z_i)  F(z_1..z_m)  dz.
    pub fn pair_with(&self, phis: &[&Observable]) -> Result<f64> {
        if phis.len() != self.m {
            return Err(Error::invalid("need one test function per coordinate"));
        }
        let p = self.grid.points();
        // Precompute phi tables per coordinate.
        let tables: Vec<Vec<f64>> = phis
            .iter()
            .map(|phi| {
                (0..p)
                    .map(|q| {
                        let (x, v) = self.grid.coords(q);
                        phi.eval(x, v)
                    })
                    .collect()
            })
            .collect();
        let mut acc = 0.0;
        for (flat, &val) in self.values.iter().enumerate() {
            let mut rem = flat;
            let mut w = 1.0;
            let mut t = 1.0;
            for table in tables.iter() {
                let q = rem % p;
                w *= self.grid.weight_at(q);
                t *= table[q];
                rem /= p;
            }
            acc += w * t * val;
        }
        Ok(acc)
    }
}

/// (Id - pi) h = h - M_ref * (discrete mass of h), for one-particle densities.
pub fn project_centered(density: &GridDensity) -> Result<GridDensity> {
    if density.m != 1 {
        return Err(Error::invalid("project_centered expects a 1-particle density"));
    }
    let mut out = density.clone();
    out.project_out_reference(0);
    Ok(out)
}

/// Hoeffding coefficient H_{N,m} of an N-particle grid density (N <= 3) viaexplicit
/// inclusion-exclusion over marginals, cross-checked internally against the
/// tensored projection (Id - pi)^{(x) m} applied to F_{N,m}.
pub fn hoeffding_exact(f_n: &GridDensity, m: usize) -> Result<GridDensity> {
    let n = f_n.m;
    if n > 3 {
        return Err(Error::Unsupported("hoeffding_exact covers N <= 3".into()));
    }
    if m == 0 || m > n {
        return Err(Error::invalid("need 1 <= m <= N"));
    }
    let p = f_n.grid.points();
    // Marginals F_{N,j} for j <= m.
    let marginals: Vec<GridDensity> = (1..=m).map(|j| f_n.marginal(j).unwrap()).collect();
    let f0 = f_n.mass();

    // Inclusion-exclusion: H_m(z_1..z_m) =
    //   sum_{j=0}^m (-1)^{m-j} sum_{|sigma|=j} F_j(z_sigma) prod_{rest} M_ref.
    let total = p.pow(m as u32);
    let mut values = vec![0.0; total];
    let subsets: Vec<Vec<usize>> = (0..(1usize << m)).map(|mask| (0..m).filter(|i| mask >> i & 1 == 1).collect()).collect();
    let mut point = vec![0usize; m];
    for (flat, value) in values.iter_mut().enumerate() {
        let mut rem = flat;
        for slot in point.iter_mut() {
            *slot = rem % p;
            rem /= p;
        }
        let mut acc = 0.0;
        for sigma in &subsets {
            let j = sigma.len();
            let sign = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
            let fj = if j == 0 {
                f0
            } else {
                // Flat index of F_j at (z_{sigma_1}, .., z_{sigma_j}).
                let mut idx = 0usize;
                for (slot, &coord) in sigma.iter().enumerate() {
                    idx += point[coord] * p.pow(slot as u32);
                }
                marginals[j - 1].values[idx]
            };
            let mut rest = 1.0;
            for i in 0..m {
                if !sigma.contains(&i) {
                    rest *= f_n.grid.reference_at(point[i]);
                }
            }
            acc += sign * fj * rest;
        }
        *value = acc;
    }
    let by_inclusion = GridDensity {
        grid: f_n.grid.clone(),
        m,
        values,
    };

    // Independent route: tensored projection of F_{N,m}.
    let mut by_projection = marginals[m - 1].clone();
    for coord in 0..m {
        by_projection.project_out_reference(coord);
    }
    let max_diff = by_inclusion
        .values
        .iter()
        .zip(by_projection.values.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if max_diff > 1e-10 {
        return Err(Error::Instability(format!(
            "hoeffding routes disagree by {max_diff:.3e}"
        )));
    }
    Ok(by_inclusion)
}

/// Both sides of the orthogonality identity
///   sum_{m=0}^N binom(N,m) ||H_{N,m}||^2_{1/M^m}  =  ||F_N||^2_{1/M^N},
/// with the m = 0 mass term (integral F_N)^2 included so the identity holds
/// for arbitrary exchangeable F_N.
pub fn orthogonality_check(f_n: &GridDensity) -> Result<(f64, f64)> {
    let n = f_n.m;
    let mut lhs = f_n.mass().powi(2);
    for m in 1..=n {
        let h = hoeffding_exact(f_n, m)?;
        lhs += crate::cluster::binomial(n, m) * h.weighted_l2_sq();
    }
    let rhs = f_n.weighted_l2_sq();
    Ok((lhs, rhs))
}

/// A pair pairing <psi (x) chi, H_{N,2}> with its uncertainty.
#[derive(Debug, Clone)]
pub struct PairPairing {
    pub value: f64,
    /// Plain replica stderr.
    pub stderr: f64,
    /// Bootstrap stderr over replicas (seeded).
    pub bootstrap_stderr: f64,
}

/// Monte Carlo estimate of <psi (x) chi, H_{N,2}(t)> from one ensemble
/// snapshot:
///   <psi x chi, F_2> - <psi, F_1><chi, M> - <psi, M><chi, F_1>
/// (the m = 0 term vanishes because the fluctuation data has zero total mass);
/// Maxwellian pairings are analytic for expression-set observables.
pub fn pair_pairing_estimate(
    states: &[ParticleState],
    weights: &[f64],
    psi: &Observable,
    chi: &Observable,
    bootstrap_resamples: usize,
    seed: u64,
) -> PairPairing {
    let vals: Vec<f64> = states
        .iter()
        .zip(weights.iter())
        .map(|(s, &w)| pair_pairing_replica_value(s, w, psi, chi))
        .collect();
    pair_pairing_from_values(&vals, bootstrap_resamples, seed)
}

/// Single-replica contribution to the H_{N,2} pairing estimator.
pub fn pair_pairing_replica_value(
    state: &ParticleState,
    weight: f64,
    psi: &Observable,
    chi: &Observable,
) -> f64 {
    let psi_m = psi.maxwellian_pairing();
    let chi_m = chi.maxwellian_pairing();
    let mut v = u_stat_order2(state, psi, chi);
    if chi_m != 0.0 {
        v -= u_stat_order1(state, psi) * chi_m;
    }
    if psi_m != 0.0 {
        v -= psi_m * u_stat_order1(state, chi);
    }
    weight * v
}

/// Aggregate replica values into a pairing estimate.
pub fn pair_pairing_from_values(vals: &[f64], bootstrap_resamples: usize, seed: u64) -> PairPairing {
    let (value, stderr) = mean_stderr(vals);
    let bootstrap_stderr = bootstrap_stderr(vals, bootstrap_resamples, seed);
    PairPairing {
        value,
        stderr,
        bootstrap_stderr,
    }
}

fn bootstrap_stderr(vals: &[f64], resamples: usize, seed: u64) -> f64 {
    if vals.is_empty() || resamples == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = vals.len();
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += vals[rng.gen_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    let (mean, _) = mean_stderr(&means);
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (resamples as f64 - 1.0);
    var.sqrt()
}

/// Weak Vlasov-remainder diagnostic: estimate of
///   R(t) = < grad_v phi, int K(x - x_*) H_{N,2}(z, z_*) dz_* >
/// via the pair U-statistic with signed weights. The F_1-correction uses the
/// analytic kernel-smoothed observable; the second Hoeffding correction
/// vanishes because K is centered.
pub fn vlasov_remainder_estimate(
    states: &[ParticleState],
    weights: &[f64],
    test: &Observable,
    kernel: &FourierKernel,
) -> (f64, f64) {
    let q = test.force_smoothed_correction(kernel);
    let vals: Vec<f64> = states
        .iter()
        .zip(weights.iter())
        .map(|(state, &w)| vlasov_remainder_replica_value(state, w, test, &q, kernel))
        .collect();
    mean_stderr(&vals)
}

/// Single-replica contribution to the remainder estimator; `q` must be
/// `test.force_smoothed_correction(kernel)` (hoisted by callers in loops).
pub fn vlasov_remainder_replica_value(
    state: &ParticleState,
    weight: f64,
    test: &Observable,
    q: &Observable,
    kernel: &FourierKernel,
) -> f64 {
    let n = state.n;
    let mut forces = vec![0.0; n];
    crate::dynamics::force_all(kernel, state, &mut forces);
    // (1/(N(N-1))) sum_{j != l} grad_v phi(z_j) K(x_j - x_l)
    //   = (1/(N-1)) sum_j grad_v phi(z_j) F_j.
    let mut pair = 0.0;
    for j in 0..n {
        pair += test.grad_v(state.positions[j], state.velocities[j]) * forces[j];
    }
    pair /= (n - 1) as f64;
    let corr = u_stat_order1(state, q);
    weight * (pair - corr)
}
