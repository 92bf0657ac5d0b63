//! N-particle Newtonian dynamics on torus phase space with mean-field forces
//! F_j = (1/N) sum_{l != j} K(x_j - x_l), and signed-weight fluctuation
//! ensembles over the Gibbs equilibrium.
//!
//! Forces use the spectral identity sum_l sin(2 pi xi.(x_j - x_l)) =
//! sin_j C_xi - cos_j S_xi with per-mode particle sums, so a force pass costs
//! O(N * #modes) instead of O(N^2); the self term vanishes since K(0) = 0.
//! Signed initial fluctuation data rides along the flow as importance weights
//! w_r = sum_j f0(z_j) fixed at t = 0 (phase-volume preservation makes the
//! weighted pushforward exact).

use crate::error::{Error, Result};
use crate::gibbs::{energy_pairwise, GibbsChain};
use crate::kernels::FourierKernel;
use crate::numerics::{mean_stderr, wrap_unit};
use crate::observables::Observable;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Phase-space state of N particles in d dimensions (row-major N x d).
#[derive(Debug, Clone)]
pub struct ParticleState {
    pub n: usize,
    pub dim: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub time: f64,
}

impl ParticleState {
    pub fn new(n: usize, dim: usize, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        if positions.len() != n * dim || velocities.len() != n * dim {
            return Err(Error::invalid("state arrays must be N x d"));
        }
        let positions = positions.into_iter().map(wrap_unit).collect();
        Ok(ParticleState {
            n,
            dim,
            positions,
            velocities,
            time: 0.0,
        })
    }

    pub fn total_momentum(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        for j in 0..self.n {
            for a in 0..self.dim {
                p[a] += self.velocities[j * self.dim + a];
            }
        }
        p
    }
}

/// Mean-field forces for all particles via per-mode sums.
pub fn force_all(kernel: &FourierKernel, state: &ParticleState, out: &mut [f64]) {
    let n = state.n;
    let d = state.dim;
    debug_assert_eq!(out.len(), n * d);
    out.iter_mut().for_each(|o| *o = 0.0);
    let inv_n = 1.0 / n as f64;
    let mut args = vec![0.0f64; n];
    let mut sins = vec![0.0f64; n];
    let mut coss = vec![0.0f64; n];
    for (xi, w) in kernel.modes() {
        for j in 0..n {
            let mut dot = 0.0;
            for a in 0..d {
                dot += xi[a] as f64 * state.positions[j * d + a];
            }
            args[j] = TWO_PI * dot;
        }
        let mut c_sum = 0.0;
        let mut s_sum = 0.0;
        for j in 0..n {
            let (s, c) = args[j].sin_cos();
            sins[j] = s;
            coss[j] = c;
            s_sum += s;
            c_sum += c;
        }
        for j in 0..n {
            let pair = sins[j] * c_sum - coss[j] * s_sum;
            for a in 0..d {
                out[j * d + a] += w * TWO_PI * xi[a] as f64 * pair * inv_n;
            }
        }
    }
}

/// Direct O(N^2) pairwise forces (validation path).
pub fn force_all_pairwise(kernel: &FourierKernel, state: &ParticleState, out: &mut [f64]) {
    let n = state.n;
    let d = state.dim;
    out.iter_mut().for_each(|o| *o = 0.0);
    let inv_n = 1.0 / n as f64;
    let mut diff = [0.0f64; 3];
    let mut f = [0.0f64; 3];
    for i in 0..n {
        for j in (i + 1)..n {
            for a in 0..d {
                diff[a] = state.positions[i * d + a] - state.positions[j * d + a];
            }
            kernel.force(&diff[..d], &mut f[..d]);
            for a in 0..d {
                out[i * d + a] += f[a] * inv_n;
                out[j * d + a] -= f[a] * inv_n;
            }
        }
    }
}

/// One velocity-Verlet step (half kick, drift with wrap, half kick).
pub fn verlet_step(state: &mut ParticleState, kernel: &FourierKernel, dt: f64) {
    let nd = state.n * state.dim;
    let mut f = vec![0.0; nd];
    force_all(kernel, state, &mut f);
    verlet_step_cached(state, kernel, dt, &mut f);
}

/// Verlet step reusing the force array of the previous step; on exit `forces`
/// holds the forces at the new positions.
pub fn verlet_step_cached(
    state: &mut ParticleState,
    kernel: &FourierKernel,
    dt: f64,
    forces: &mut [f64],
) {
    let nd = state.n * state.dim;
    for i in 0..nd {
        state.velocities[i] += 0.5 * dt * forces[i];
    }
    for i in 0..nd {
        state.positions[i] = wrap_unit(state.positions[i] + dt * state.velocities[i]);
    }
    force_all(kernel, state, forces);
    for i in 0..nd {
        state.velocities[i] += 0.5 * dt * forces[i];
    }
    state.time += dt;
}

/// H = sum_j |v_j|^2 / 2 + (1/2N) sum_{i != j} W(x_i - x_j).
pub fn total_energy(state: &ParticleState, kernel: &FourierKernel) -> f64 {
    let kinetic: f64 = state.velocities.iter().map(|v| 0.5 * v * v).sum();
    kinetic + energy_pairwise(kernel, &state.positions, state.n)
}

/// Signed-weight replica ensemble at Gibbs equilibrium.
#[derive(Debug, Clone)]
pub struct WeightedEnsemble {
    pub beta: f64,
    pub replicas: Vec<ParticleState>,
    /// w_r = sum_j f0(z_j^{(r)}) at t = 0; fixed along the flow.
    pub weights: Vec<f64>,
    /// Velocity-seed lineage per replica.
    pub seeds: Vec<u64>,
}

/// Thinning/burn-in controls for ensemble construction, in units of sweeps
/// (one sweep = N single-particle proposals).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams {
    pub burnin_sweeps: usize,
    /// Sweeps between retained replicas (>= 10 per the decorrelation contract).
    pub thin_sweeps: usize,
    pub initial_step: f64,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        EnsembleParams {
            burnin_sweeps: 100,
            thin_sweeps: 10,
            initial_step: 0.25,
        }
    }
}

/// Draw R replicas: positions from a thinned Gibbs chain, velocities i.i.d.
/// Maxwellian, weight w_r = sum_j f0(z_j). Rejects f0 that is not centered
/// against the Maxwellian (quadrature check to 1e-8).
pub fn make_fluctuation_ensemble(
    kernel: &FourierKernel,
    n: usize,
    beta: f64,
    f0: &Observable,
    r_replicas: usize,
    params: &EnsembleParams,
    seed: u64,
) -> Result<WeightedEnsemble> {
    if kernel.dimension() != 1 {
        return Err(Error::Unsupported(
            "fluctuation ensembles are implemented for d=1".into(),
        ));
    }
    if (f0.beta - beta).abs() > 1e-12 {
        return Err(Error::invalid("f0 beta must match the ensemble beta"));
    }
    f0.check_centered_quadrature(1e-8)?;

    let mut chain = GibbsChain::new(kernel, n, beta, seed)?;
    chain.step_size = params.initial_step;
    for _ in 0..params.burnin_sweeps * n {
        chain.step();
    }
    chain.freeze();

    let mut replicas = Vec::with_capacity(r_replicas);
    let mut weights = Vec::with_capacity(r_replicas);
    let mut seeds = Vec::with_capacity(r_replicas);
    let normal = Normal::new(0.0, (1.0 / beta).sqrt()).unwrap();
    for r in 0..r_replicas {
        for _ in 0..params.thin_sweeps * n {
            chain.step();
        }
        let vseed = seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(r as u64 + 1);
        let mut vrng = ChaCha8Rng::seed_from_u64(vseed);
        let velocities: Vec<f64> = (0..n).map(|_| normal.sample(&mut vrng)).collect();
        let positions = chain.config.positions.clone();
        let w: f64 = positions
            .iter()
            .zip(velocities.iter())
            .map(|(&x, &v)| f0.eval(x, v))
            .sum();
        replicas.push(ParticleState {
            n,
            dim: 1,
            positions,
            velocities,
            time: 0.0,
        });
        weights.push(w);
        seeds.push(vseed);
    }
    Ok(WeightedEnsemble {
        beta,
        replicas,
        weights,
        seeds,
    })
}

/// A snapshot of the full ensemble at one time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub states: Vec<ParticleState>,
    pub weights: Vec<f64>,
}

/// Integrate every replica, retaining full snapshots at the requested times
/// (which must be multiples of dt, ordered increasing). Replicas integrate
/// independently and in parallel; outputs depend only on (ensemble, dt).
pub fn simulate(
    ensemble: &WeightedEnsemble,
    kernel: &FourierKernel,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<Vec<Snapshot>> {
    let per_replica: Vec<Vec<ParticleState>> = map_replicas(ensemble, kernel, dt, snapshot_times, |s, _| s.clone())?;
    Ok(snapshot_times
        .iter()
        .enumerate()
        .map(|(si, &t)| Snapshot {
            time: t,
            states: per_replica.iter().map(|r| r[si].clone()).collect(),
            weights: ensemble.weights.clone(),
        })
        .collect())
}

/// Streaming variant of `simulate`: applies `measure` to each replica at each
/// snapshot time and returns, per replica, the measured values in snapshot
/// order. Deterministic for fixed (ensemble, dt) at any worker count: replica
/// integrations are independent and results are collected in replica order.
pub fn map_replicas<T, F>(
    ensemble: &WeightedEnsemble,
    kernel: &FourierKernel,
    dt: f64,
    snapshot_times: &[f64],
    measure: F,
) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(&ParticleState, f64) -> T + Sync,
{
    if dt <= 0.0 {
        return Err(Error::invalid("dt must be > 0"));
    }
    let mut steps_at = Vec::with_capacity(snapshot_times.len());
    let mut prev = 0usize;
    for &t in snapshot_times {
        let steps = (t / dt).round() as usize;
        if ((steps as f64) * dt - t).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "snapshot time {t} is not a multiple of dt = {dt}"
            )));
        }
        if steps < prev {
            return Err(Error::invalid("snapshot times must be non-decreasing"));
        }
        steps_at.push(steps);
        prev = steps;
    }
    Ok(ensemble
        .replicas
        .par_iter()
        .zip(ensemble.weights.par_iter())
        .map(|(initial, &w)| {
            let mut state = initial.clone();
            let mut forces = vec![0.0; state.n * state.dim];
            force_all(kernel, &state, &mut forces);
            let mut out = Vec::with_capacity(steps_at.len());
            let mut step = 0usize;
            for &target in &steps_at {
                while step < target {
                    verlet_step_cached(&mut state, kernel, dt, &mut forces);
                    step += 1;
                }
                out.push(measure(&state, w));
            }
            out
        })
        .collect())
}

/// Symmetrized one-particle U-statistic (1/N) sum_j phi(z_j), d = 1.
pub fn u_stat_order1(state: &ParticleState, obs: &Observable) -> f64 {
    debug_assert_eq!(state.dim, 1);
    state
        .positions
        .iter()
        .zip(state.velocities.iter())
        .map(|(&x, &v)| obs.eval(x, v))
        .sum::<f64>()
        / state.n as f64
}

/// Symmetrized two-particle U-statistic over distinct ordered pairs:
/// (1/(N(N-1))) sum_{j != l} psi(z_j) chi(z_l), computed in O(N).
pub fn u_stat_order2(state: &ParticleState, psi: &Observable, chi: &Observable) -> f64 {
    debug_assert_eq!(state.dim, 1);
    let n = state.n as f64;
    let mut sum_psi = 0.0;
    let mut sum_chi = 0.0;
    let mut sum_diag = 0.0;
    for (&x, &v) in state.positions.iter().zip(state.velocities.iter()) {
        let p = psi.eval(x, v);
        let c = chi.eval(x, v);
        sum_psi += p;
        sum_chi += c;
        sum_diag += p * c;
    }
    (sum_psi * sum_chi - sum_diag) / (n * (n - 1.0))
}

/// Monte Carlo pairing <phi, F_{N,m}(t)> from one snapshot:
/// mean over replicas of w_r * U_m(phi), with the plain replica stderr.
pub fn weighted_observable(
    states: &[ParticleState],
    weights: &[f64],
    obs: &Observable,
) -> (f64, f64) {
    let vals: Vec<f64> = states
        .iter()
        .zip(weights.iter())
        .map(|(s, &w)| w * u_stat_order1(s, obs))
        .collect();
    mean_stderr(&vals)
}

/// <psi (x) chi, F_{N,2}(t)> estimator (order m = 2).
pub fn weighted_pair_observable(
    states: &[ParticleState],
    weights: &[f64],
    psi: &Observable,
    chi: &Observable,
) -> (f64, f64) {
    let vals: Vec<f64> = states
        .iter()
        .zip(weights.iter())
        .map(|(s, &w)| w * u_stat_order2(s, psi, chi))
        .collect();
    mean_stderr(&vals)
}
