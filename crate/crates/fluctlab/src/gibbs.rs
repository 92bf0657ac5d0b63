//! Spatial Gibbs measure on (T^d)^N: single-particle Metropolis sampling,
//! mean-energy and thermodynamic-integration estimators of the partition
//! function, exact small-N quadrature, the N -> infinity limit formula and the
//! theoretical bound calculators.
//!
//! The sampler and energy bookkeeping exploit the spectral identity
//!   sum_{i!=j} W(x_i - x_j) = sum_xi W^(xi) (|rho_xi|^2 - N),
//! with rho_xi = sum_j e^{2 pi i xi.x_j}, so a single-particle move costs
//! O(#modes) instead of O(N).

use crate::error::{Error, Result};
use crate::kernels::{FourierKernel, KernelFamily};
use crate::numerics::{gauss_legendre, mean_stderr, wrap_unit};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Positions of N particles on T^d with the cached interaction energy
/// U = (1/2N) sum_{i!=j} W(x_i - x_j).
#[derive(Debug, Clone)]
pub struct SpatialConfig {
    /// Row-major N x d.
    pub positions: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub cached_energy: f64,
}

/// Per-mode sums rho_xi = sum_j e^{2 pi i xi.x_j}, kept incrementally.
#[derive(Debug, Clone)]
struct ModeSums {
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Metropolis chain targeting the spatial Gibbs density
/// prop-to exp(-(beta/2N) sum_{i!=j} W(x_i - x_j)).
#[derive(Debug, Clone)]
pub struct GibbsChain {
    pub config: SpatialConfig,
    pub beta: f64,
    kernel: FourierKernel,
    pub step_size: f64,
    rng: ChaCha8Rng,
    sums: ModeSums,
    pub accept_count: u64,
    pub total_count: u64,
    /// When true the step size is still being adapted (Robbins-Monro on the
    /// log step size toward 30% acceptance); frozen afterwards so the
    /// post-burn-in chain is exactly Markov.
    pub adapting: bool,
    moves_since_refresh: u64,
}

/// MCMC control parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcParams {
    /// Proposals discarded before measurement; step-size adaptation runs here.
    pub burnin: usize,
    /// Retained measurement samples.
    pub samples: usize,
    /// Proposals between retained samples.
    pub thinning: usize,
    pub initial_step: f64,
}

impl Default for McmcParams {
    fn default() -> Self {
        McmcParams {
            burnin: 20_000,
            samples: 20_000,
            thinning: 4,
            initial_step: 0.25,
        }
    }
}

/// Partition-function estimate with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionEstimate {
    pub log_z: f64,
    pub stderr: f64,
    pub method: PartitionMethod,
    pub lambda_grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMethod {
    ThermoIntegration,
    ExactQuadrature,
}

impl PartitionEstimate {
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }
}

impl GibbsChain {
    /// Fresh chain from uniform positions.
    pub fn new(kernel: &FourierKernel, n: usize, beta: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("chain needs at least one particle"));
        }
        if beta < 0.0 {
            return Err(Error::invalid("beta must be >= 0"));
        }
        let dim = kernel.dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions: Vec<f64> = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
        let mut chain = GibbsChain {
            config: SpatialConfig {
                positions,
                n,
                dim,
                cached_energy: 0.0,
            },
            beta,
            kernel: kernel.clone(),
            step_size: 0.25,
            rng,
            sums: ModeSums {
                re: vec![0.0; kernel.n_modes()],
                im: vec![0.0; kernel.n_modes()],
            },
            accept_count: 0,
            total_count: 0,
            adapting: true,
            moves_since_refresh: 0,
        };
        chain.refresh_sums();
        Ok(chain)
    }

    fn phases(&self, x: &[f64]) -> impl Iterator<Item = (usize, f64)> + '_ {
        let x = x.to_vec();
        self.kernel.modes().enumerate().map(move |(m, (xi, _))| {
            let mut dot = 0.0;
            for (a, &xa) in x.iter().enumerate() {
                dot += xi[a] as f64 * xa;
            }
            (m, TWO_PI * dot)
        })
    }

    /// Recompute mode sums and cached energy from scratch.
    pub fn refresh_sums(&mut self) {
        let n = self.config.n;
        let d = self.config.dim;
        self.sums.re.iter_mut().for_each(|v| *v = 0.0);
        self.sums.im.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            let x = &self.config.positions[j * d..(j + 1) * d];
            for (m, arg) in self.phases(x).collect::<Vec<_>>() {
                let (s, c) = arg.sin_cos();
                self.sums.re[m] += c;
                self.sums.im[m] += s;
            }
        }
        self.config.cached_energy = self.energy_from_sums();
        self.moves_since_refresh = 0;
    }

    /// U = (1/2N) sum_xi W^(xi) (|rho_xi|^2 - N).
    fn energy_from_sums(&self) -> f64 {
        let n = self.config.n as f64;
        let mut acc = 0.0;
        for (m, (_, w)) in self.kernel.modes().enumerate() {
            let r2 = self.sums.re[m] * self.sums.re[m] + self.sums.im[m] * self.sums.im[m];
            acc += w * (r2 - n);
        }
        acc / (2.0 * n)
    }

    /// Direct O(N^2) recomputation of U (validation path).
    pub fn energy_pairwise(&self) -> f64 {
        energy_pairwise(&self.kernel, &self.config.positions, self.config.n)
    }

    /// One single-particle random-walk Metropolis proposal.
    pub fn step(&mut self) {
        let n = self.config.n;
        let d = self.config.dim;
        let i = self.rng.gen_range(0..n);
        let normal = Normal::new(0.0, self.step_size).unwrap();
        let mut new_x = [0.0f64; 3];
        let old_x: Vec<f64> = self.config.positions[i * d..(i + 1) * d].to_vec();
        for a in 0..d {
            new_x[a] = wrap_unit(old_x[a] + normal.sample(&mut self.rng));
        }

        // Update mode sums for the tentative move and evaluate Delta U.
        let old_energy = self.config.cached_energy;
        let old_phases: Vec<(usize, f64)> = self.phases(&old_x).collect();
        let new_phases: Vec<(usize, f64)> = self.phases(&new_x[..d]).collect();
        let mut saved = Vec::with_capacity(old_phases.len());
        for (&(m, a_old), &(_, a_new)) in old_phases.iter().zip(new_phases.iter()) {
            saved.push((self.sums.re[m], self.sums.im[m]));
            let (so, co) = a_old.sin_cos();
            let (sn, cn) = a_new.sin_cos();
            self.sums.re[m] += cn - co;
            self.sums.im[m] += sn - so;
        }
        let new_energy = self.energy_from_sums();
        let delta = new_energy - old_energy;
        let accept = if self.beta * delta <= 0.0 {
            true
        } else {
            self.rng.gen::<f64>() < (-self.beta * delta).exp()
        };
        self.total_count += 1;
        if accept {
            self.accept_count += 1;
            self.config.positions[i * d..(i + 1) * d].copy_from_slice(&new_x[..d]);
            self.config.cached_energy = new_energy;
            self.moves_since_refresh += 1;
            // Periodic refresh bounds floating-point drift of the running sums.
            if self.moves_since_refresh >= (32 * n) as u64 {
                self.refresh_sums();
            }
        } else {
            for (&(m, _), &(re, im)) in old_phases.iter().zip(saved.iter()) {
                self.sums.re[m] = re;
                self.sums.im[m] = im;
            }
        }
        if self.adapting {
            let rate = if accept { 1.0 } else { 0.0 };
            let gain = 0.02;
            self.step_size = (self.step_size.ln() + gain * (rate - 0.30))
                .exp()
                .clamp(1e-4, 0.5);
        }
    }

    /// Freeze adaptation (end of burn-in).
    pub fn freeze(&mut self) {
        self.adapting = false;
        self.accept_count = 0;
        self.total_count = 0;
    }

    pub fn acceptance_ratio(&self) -> f64 {
        if self.total_count == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.total_count as f64
        }
    }
}

/// O(N^2) energy U = (1/2N) sum_{i!=j} W(x_i-x_j) for row-major positions.
pub fn energy_pairwise(kernel: &FourierKernel, positions: &[f64], n: usize) -> f64 {
    let d = kernel.dimension();
    let mut acc = 0.0;
    let mut diff = [0.0f64; 3];
    for i in 0..n {
        for j in (i + 1)..n {
            for a in 0..d {
                diff[a] = positions[i * d + a] - positions[j * d + a];
            }
            acc += kernel.potential(&diff[..d]);
        }
    }
    acc / n as f64
}

/// i.i.d. Maxwellian velocities: N centered Gaussians of variance 1/beta per
/// component, row-major N x d.
pub fn sample_velocities(n: usize, dim: usize, beta: f64, seed: u64) -> Result<Vec<f64>> {
    if beta <= 0.0 {
        return Err(Error::invalid("beta must be > 0 to sample velocities"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, (1.0 / beta).sqrt()).unwrap();
    Ok((0..n * dim).map(|_| normal.sample(&mut rng)).collect())
}

/// Mean interaction energy <U> under the spatial Gibbs measure with batch-means
/// stderr.
///
/// Stationarity heuristic (documented contract): the retained samples are split
/// into 32 batches; a Geweke-style z-score compares the means of the first and
/// last 8 batches using the batch-mean variance, and |z| >= 5 signals
/// non-convergence.
pub fn mean_energy(
    kernel: &FourierKernel,
    n: usize,
    beta: f64,
    params: &McmcParams,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut chain = GibbsChain::new(kernel, n, beta, seed)?;
    chain.step_size = params.initial_step;
    for _ in 0..params.burnin {
        chain.step();
    }
    chain.freeze();
    let mut samples = Vec::with_capacity(params.samples);
    for _ in 0..params.samples {
        for _ in 0..params.thinning {
            chain.step();
        }
        samples.push(chain.config.cached_energy);
    }
    batch_means(&samples)
}

/// Batch means with the stationarity gate described on `mean_energy`.
fn batch_means(samples: &[f64]) -> Result<(f64, f64)> {
    let nb = 32usize;
    let bs = samples.len() / nb;
    if bs == 0 {
        return Err(Error::invalid("too few MCMC samples for batch means"));
    }
    let bmeans: Vec<f64> = (0..nb)
        .map(|b| samples[b * bs..(b + 1) * bs].iter().sum::<f64>() / bs as f64)
        .collect();
    let (mean, stderr) = mean_stderr(&bmeans);
    let head: f64 = bmeans[..8].iter().sum::<f64>() / 8.0;
    let tail: f64 = bmeans[nb - 8..].iter().sum::<f64>() / 8.0;
    let bvar = bmeans
        .iter()
        .map(|b| (b - mean) * (b - mean))
        .sum::<f64>()
        / (nb as f64 - 1.0);
    if bvar > 0.0 {
        let z = (head - tail) / (bvar / 8.0 + bvar / 8.0).sqrt();
        if z.abs() >= 5.0 {
            return Err(Error::NonConvergence(format!(
                "batch-mean drift z = {z:.2} (head {head:.4e} vs tail {tail:.4e})"
            )));
        }
    }
    Ok((mean, stderr))
}

/// log Zbar_{N,beta} = -int_0^beta <U>_lambda d lambda by Gauss-Legendre
/// quadrature with one MCMC estimate per node.
pub fn estimate_log_z_thermo(
    kernel: &FourierKernel,
    n: usize,
    beta: f64,
    n_lambda: usize,
    params: &McmcParams,
    seed: u64,
) -> Result<PartitionEstimate> {
    if n_lambda < 4 {
        return Err(Error::invalid("n_lambda must be >= 4"));
    }
    if beta == 0.0 {
        return Ok(PartitionEstimate {
            log_z: 0.0,
            stderr: 0.0,
            method: PartitionMethod::ThermoIntegration,
            lambda_grid: Vec::new(),
        });
    }
    let rule = gauss_legendre(n_lambda, 0.0, beta);
    let mut log_z = 0.0;
    let mut var = 0.0;
    let mut grid = Vec::with_capacity(n_lambda);
    for (idx, (lambda, weight)) in rule.iter().enumerate() {
        let (mean, stderr) = mean_energy(kernel, n, *lambda, params, seed ^ (idx as u64) << 20)?;
        log_z -= weight * mean;
        var += (weight * stderr) * (weight * stderr);
        grid.push(*lambda);
    }
    Ok(PartitionEstimate {
        log_z,
        stderr: var.sqrt(),
        method: PartitionMethod::ThermoIntegration,
        lambda_grid: grid,
    })
}

/// Exact tensor quadrature of Zbar_{N,beta} for d=1 and N in {2,3}.
///
/// N=2 reduces to the single integral int_T e^{-(beta/2) W(y)} dy; N=3 uses
/// translation invariance to a 2-dimensional integral.
pub fn exact_z_small_n(
    kernel: &FourierKernel,
    n: usize,
    beta: f64,
    grid_size: usize,
) -> Result<PartitionEstimate> {
    if kernel.dimension() != 1 {
        return Err(Error::Unsupported(
            "exact_z_small_n is implemented for d=1 only".into(),
        ));
    }
    if !(n == 2 || n == 3) {
        return Err(Error::Unsupported(
            "exact_z_small_n covers N in {2, 3} only".into(),
        ));
    }
    let g = grid_size.max(16);
    let z = match n {
        2 => {
            let mut acc = 0.0;
            for i in 0..g {
                let y = i as f64 / g as f64;
                acc += (-(beta / 2.0) * kernel.potential(&[y])).exp();
            }
            acc / g as f64
        }
        _ => {
            // Zbar_3 = int int exp(-(beta/3)[W(y1)+W(y2)+W(y1-y2)]) dy1 dy2.
            let w: Vec<f64> = (0..g)
                .map(|i| kernel.potential(&[i as f64 / g as f64]))
                .collect();
            let mut acc = 0.0;
            for i in 0..g {
                for j in 0..g {
                    let diff = (i + g - j) % g;
                    acc += (-(beta / 3.0) * (w[i] + w[j] + w[diff])).exp();
                }
            }
            acc / (g * g) as f64
        }
    };
    Ok(PartitionEstimate {
        log_z: z.ln(),
        stderr: 0.0,
        method: PartitionMethod::ExactQuadrature,
        lambda_grid: Vec::new(),
    })
}

/// Output of the limit formula: value, its exponent, and a cutoff-tail
/// estimate for the built-in families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitZ {
    pub value: f64,
    pub exponent: f64,
    pub tail_estimate: Option<f64>,
}

/// N -> infinity limit of the spatial partition function over the retained
/// modes:
///
///   lim Zbar_{N,beta} = exp( sum_{xi != 0} [ (beta/2) W^(xi) - (1/2) log(1 + beta W^(xi)) ] ),
///
/// equivalently e^{beta W(0)/2} det(Id + beta W*)^{-1/2}. The second-order
/// expansion of the exponent is (beta^2/4) ||W||_{L2}^2, matching the exact
/// small-beta variance of the energy; the finite-N trend tests in this crate
/// pin the constants.
pub fn limit_z(kernel: &FourierKernel, beta: f64) -> Result<LimitZ> {
    let mut exponent = 0.0;
    for (_, w) in kernel.modes() {
        let arg = 1.0 + beta * w;
        if arg <= 0.0 {
            return Err(Error::Domain(format!(
                "limit formula undefined: 1 + beta*W^ = {arg:.3e} <= 0 (non-H-stable blow-up)"
            )));
        }
        exponent += 0.5 * beta * w - 0.5 * arg.ln();
    }
    let tail_estimate = tail_beyond_cutoff(kernel, beta);
    Ok(LimitZ {
        value: exponent.exp(),
        exponent,
        tail_estimate,
    })
}

/// Estimate of the dropped exponent mass sum_{|xi|>Lambda} (beta^2/4) W^(xi)^2
/// for the built-in families: direct lattice sums over an 8x window plus an
/// integral bound for the remainder (d=1).
fn tail_beyond_cutoff(kernel: &FourierKernel, beta: f64) -> Option<f64> {
    let spec = kernel.spec();
    let exponent_for = |p: f64| -> f64 {
        // coefficient |xi|^p with p < -1/2 summed over |xi|_inf > Lambda.
        let d = spec.dimension as i64;
        let lam = spec.cutoff;
        let horizon = 8 * lam;
        let mut acc = 0.0;
        match d {
            1 => {
                for k in (lam + 1)..=horizon {
                    acc += 2.0 * (k as f64).powf(2.0 * p);
                }
                // integral remainder of 2 k^{2p} beyond the horizon
                if 2.0 * p < -1.0 {
                    acc += 2.0 * (horizon as f64).powf(2.0 * p + 1.0) / -(2.0 * p + 1.0);
                }
            }
            _ => {
                let h = horizon;
                let mut xi = [0i64; 3];
                for a in -h..=h {
                    for b in -(h * (d >= 2) as i64)..=(h * (d >= 2) as i64) {
                        for c in -(h * (d >= 3) as i64)..=(h * (d >= 3) as i64) {
                            xi = [a, b, c];
                            let linf = xi.iter().map(|v| v.abs()).max().unwrap();
                            if linf <= lam || linf > h {
                                continue;
                            }
                            let norm2 = (a * a + b * b + c * c) as f64;
                            acc += norm2.powf(p);
                        }
                    }
                }
                let _ = xi;
            }
        }
        beta * beta / 4.0 * acc
    };
    match &spec.family {
        KernelFamily::Riesz { s } => Some(exponent_for(s - spec.dimension as f64)),
        KernelFamily::Log => Some(exponent_for(-(spec.dimension as f64))),
        KernelFamily::FourierTable(_) => None,
    }
}

/// Both sides of the weighted-moment identity
/// int |M_{N,beta}|^p / |M_beta^{(x) N}|^{p-1} = Zbar_{N,p beta} / Zbar_{N,beta}^p
/// (velocity Gaussians cancel analytically; both sides are purely spatial).
pub fn moment_identity_check(
    kernel: &FourierKernel,
    n: usize,
    beta: f64,
    p: f64,
    grid_size: usize,
) -> Result<(f64, f64)> {
    if p < 1.0 {
        return Err(Error::invalid("moment exponent p must be >= 1"));
    }
    if kernel.dimension() != 1 || !(n == 2 || n == 3) {
        return Err(Error::Unsupported(
            "moment_identity_check needs d=1 and N in {2,3}".into(),
        ));
    }
    let z_beta = exact_z_small_n(kernel, n, beta, grid_size)?.z();
    // lhs: full-dimensional tensor quadrature of (exp(-(beta/2N) sum W)/Z)^p,
    // deliberately not reusing the translation-reduced route.
    let g = grid_size.max(16).min(if n == 2 { 4096 } else { 256 });
    let w: Vec<f64> = (0..g)
        .map(|i| kernel.potential(&[i as f64 / g as f64]))
        .collect();
    let lhs = match n {
        2 => {
            let mut acc = 0.0;
            for i in 0..g {
                for j in 0..g {
                    let u = w[(i + g - j) % g] / 2.0;
                    acc += ((-beta * u).exp() / z_beta).powf(p);
                }
            }
            acc / (g * g) as f64
        }
        _ => {
            let mut acc = 0.0;
            for i in 0..g {
                for j in 0..g {
                    for k in 0..g {
                        let u = (w[(i + g - j) % g] + w[(i + g - k) % g] + w[(j + g - k) % g])
                            / 3.0;
                        acc += ((-beta * u).exp() / z_beta).powf(p);
                    }
                }
            }
            acc / (g * g * g) as f64
        }
    };
    let z_pbeta = exact_z_small_n(kernel, n, p * beta, grid_size)?.z();
    let rhs = z_pbeta / z_beta.powf(p);
    Ok((lhs, rhs))
}

/// Cancellation-free upper bound exp(beta N ||W_-||_{L1} e^{beta ||W_-||_inf})
/// evaluated from the kernel's quadrature norms.
pub fn naive_bound(kernel: &FourierKernel, n: usize, beta: f64, grid_size: usize) -> Result<f64> {
    let norms = kernel.norms(grid_size)?;
    Ok((beta * n as f64 * norms.neg_l1 * (beta * norms.neg_sup).exp()).exp())
}

/// Riesz regime classification for the high-temperature bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RieszRegime {
    BelowHalf,
    Critical,
    AboveHalf,
}

/// The three theoretical right-hand sides evaluated with an
/// experimenter-supplied constant C (the underlying constants are
/// non-constructive, so experiments report the smallest C making the bound
/// hold rather than asserting a fixed one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalBounds {
    /// exp(C beta^2 ||W||_{L2}^2)
    pub bound_l2: f64,
    /// C N^{C beta^2 ||W||_{L2,inf}^2}
    pub bound_weak_l2: f64,
    /// Riesz-family bound with its regime tag, when applicable.
    pub bound_riesz: Option<(f64, RieszRegime)>,
}

pub fn theoretical_bounds(
    kernel: &FourierKernel,
    n: usize,
    beta: f64,
    c: f64,
    grid_size: usize,
) -> Result<TheoreticalBounds> {
    let norms = kernel.norms(grid_size)?;
    let weak = kernel.weak_l2_quadrature(grid_size);
    let nf = n as f64;
    let bound_l2 = (c * beta * beta * norms.l2 * norms.l2).exp();
    let bound_weak_l2 = c * nf.powf(c * beta * beta * weak * weak);
    let bound_riesz = match kernel.spec().family {
        KernelFamily::Riesz { s } => {
            let d = kernel.dimension() as f64;
            let (value, regime) = if s < d / 2.0 {
                (c, RieszRegime::BelowHalf)
            } else if s == d / 2.0 {
                (c * nf.powf(c * beta * beta), RieszRegime::Critical)
            } else {
                (
                    c * (c * beta.powf(d / s) * nf.powf(2.0 - d / s)).exp(),
                    RieszRegime::AboveHalf,
                )
            };
            Some((value, regime))
        }
        _ => None,
    };
    Ok(TheoreticalBounds {
        bound_l2,
        bound_weak_l2,
        bound_riesz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_kernel, KernelSpec};

    // Oracle: I_nu(z) for nu in {0,1} by power series (test-only).
    fn bessel_i(nu: usize, z: f64) -> f64 {
        let mut term = (z / 2.0).powi(nu as i32)
            / (1..=nu).map(|k| k as f64).product::<f64>().max(1.0);
        let mut acc = term;
        for k in 1..60 {
            term *= (z * z / 4.0) / (k as f64 * (k + nu) as f64);
            acc += term;
        }
        acc
    }

    fn cosine() -> FourierKernel {
        make_kernel(&KernelSpec::cosine()).unwrap()
    }

    #[test]
    fn exact_z_n2_is_bessel_i0() {
        let z = exact_z_small_n(&cosine(), 2, 1.0, 1 << 14).unwrap().z();
        assert!((z - bessel_i(0, 0.5)).abs() < 1e-12, "z = {z}");
        // Frozen oracle value I_0(0.5):
        assert!((z - 1.0634833707413236).abs() < 1e-9);
        let z0 = exact_z_small_n(&cosine(), 2, 0.0, 1024).unwrap().z();
        assert!((z0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exact_z_n3_grid_refinement_converges() {
        let coarse = exact_z_small_n(&cosine(), 3, 1.0, 256).unwrap().z();
        let fine = exact_z_small_n(&cosine(), 3, 1.0, 512).unwrap().z();
        assert!((coarse - fine).abs() < 1e-8);
        // Frozen oracle value (independent Bessel-transform identity).
        assert!((fine - 1.0766361103441136).abs() < 1e-9);
    }

    #[test]
    fn exact_z_rejects_out_of_range() {
        assert!(exact_z_small_n(&cosine(), 4, 1.0, 64).is_err());
        let k2 = make_kernel(&KernelSpec::riesz(2, 1.0, 2)).unwrap();
        assert!(exact_z_small_n(&k2, 2, 1.0, 64).is_err());
    }

    #[test]
    fn limit_z_cosine_matches_closed_form() {
        // For W = cos(2 pi x): exponent = beta/2 - log(1 + beta/2), i.e.
        // lim Zbar = e^{beta/2}/(1 + beta/2).
        for beta in [0.5, 1.0, 2.0] {
            let l = limit_z(&cosine(), beta).unwrap();
            let oracle = (beta / 2.0).exp() / (1.0 + beta / 2.0);
            assert!((l.value - oracle).abs() < 1e-12, "beta={beta}");
        }
        let l0 = limit_z(&cosine(), 0.0).unwrap();
        assert!((l0.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn limit_z_signals_blowup() {
        // Attractive single mode with beta large enough that 1 + beta W^ <= 0.
        let spec = KernelSpec::table(1, &[([1, 0, 0], -0.5), ([-1, 0, 0], -0.5)], 1);
        let k = make_kernel(&spec).unwrap();
        // 1 + beta * (-1/2) <= 0 exactly at beta >= 2.
        assert!(limit_z(&k, 2.0).is_err());
        assert!(limit_z(&k, 2.5).is_err());
        assert!(limit_z(&k, 1.0).is_ok());
    }

    #[test]
    fn limit_z_log_kernel_tail_shrinks_with_cutoff() {
        let beta = 1.0;
        let k3 = make_kernel(&KernelSpec::log(1, 1000)).unwrap();
        let k4 = make_kernel(&KernelSpec::log(1, 10_000)).unwrap();
        let l3 = limit_z(&k3, beta).unwrap();
        let l4 = limit_z(&k4, beta).unwrap();
        let diff = (l4.exponent - l3.exponent).abs();
        // Tail oracle: sum_{k>Lambda} 2 (beta^2/4) k^{-2} ~ beta^2/(2 Lambda).
        assert!(diff < beta * beta / (2.0 * 1000.0) * 2.0);
        assert!(l3.tail_estimate.unwrap() > diff * 0.2);
    }

    #[test]
    fn divergence_probe_weak_l2_family() {
        // W^(k) = |k|^{-1/2} (riesz s = 1/2, d = 1) is not square-summable:
        // the limit exponent must grow without bound in the cutoff.
        let beta = 1.0;
        let mut prev = 0.0;
        let mut increments = Vec::new();
        for lam in [8, 32, 128, 512] {
            let k = make_kernel(&KernelSpec::riesz(1, 0.5, lam)).unwrap();
            let l = limit_z(&k, beta).unwrap();
            assert!(l.exponent > prev, "exponent must increase with cutoff");
            increments.push(l.exponent - prev);
            prev = l.exponent;
        }
        // Log-divergence signature: increments stay comparable between
        // successive 4x cutoff steps instead of shrinking to zero.
        let r1 = increments[2] / increments[1];
        let r2 = increments[3] / increments[2];
        assert!(r1 > 0.5 && r1 < 1.5 && r2 > 0.5 && r2 < 1.5, "{increments:?}");
    }

    #[test]
    fn mcmc_beta_zero_accepts_everything() {
        let k = cosine();
        let mut chain = GibbsChain::new(&k, 8, 0.0, 1).unwrap();
        chain.freeze();
        for _ in 0..500 {
            chain.step();
        }
        assert_eq!(chain.accept_count, chain.total_count);
    }

    #[test]
    fn mcmc_single_particle_is_uniform_target() {
        let k = cosine();
        let mut chain = GibbsChain::new(&k, 1, 3.0, 2).unwrap();
        chain.freeze();
        for _ in 0..500 {
            chain.step();
        }
        // No pair terms: energy identically zero, every proposal accepted.
        assert_eq!(chain.accept_count, chain.total_count);
        assert!(chain.config.cached_energy.abs() < 1e-12);
    }

    #[test]
    fn cached_energy_tracks_pairwise_recomputation() {
        let k = make_kernel(&KernelSpec::log(1, 4)).unwrap();
        let mut chain = GibbsChain::new(&k, 12, 1.5, 3).unwrap();
        for step in 0..2000 {
            chain.step();
            if step % 500 == 0 {
                let direct = chain.energy_pairwise();
                assert!(
                    (chain.config.cached_energy - direct).abs() < 1e-10,
                    "step {step}: cached {} vs direct {}",
                    chain.config.cached_energy,
                    direct
                );
            }
        }
    }

    #[test]
    fn acceptance_ratio_lands_in_window_after_adaptation() {
        // Step-size control only binds when the single-particle conditional is
        // informative; at weak coupling the mean-field target is near-uniform
        // and acceptance stays near 1 for any step. Use a strongly coupled
        // pair (the conditional density spans e^{8} here).
        let k = cosine();
        let mut chain = GibbsChain::new(&k, 2, 8.0, 5).unwrap();
        for _ in 0..20_000 {
            chain.step();
        }
        chain.freeze();
        for _ in 0..20_000 {
            chain.step();
        }
        let r = chain.acceptance_ratio();
        assert!(r > 0.15 && r < 0.6, "acceptance {r}");
    }

    #[test]
    fn detailed_balance_two_particle_histogram() {
        // N=2, beta=1, cosine: separation density prop-to e^{-0.5 cos(2 pi y)};
        // chi-square goodness of fit at 1%.
        let k = cosine();
        let mut chain = GibbsChain::new(&k, 2, 1.0, 7).unwrap();
        for _ in 0..10_000 {
            chain.step();
        }
        chain.freeze();
        let bins = 40;
        let mut counts = vec![0u64; bins];
        let steps = 400_000usize;
        for _ in 0..steps {
            chain.step();
            let y = wrap_unit(chain.config.positions[0] - chain.config.positions[1]);
            counts[(y * bins as f64) as usize % bins] += 1;
        }
        // Analytic bin masses by fine quadrature.
        let fine = 4000;
        let mut mass = vec![0.0f64; bins];
        let mut total = 0.0;
        for i in 0..fine {
            let y = (i as f64 + 0.5) / fine as f64;
            let p = (-0.5 * (TWO_PI * y).cos()).exp();
            mass[(y * bins as f64) as usize % bins] += p;
            total += p;
        }
        let mut chi2 = 0.0;
        for b in 0..bins {
            let expected = steps as f64 * mass[b] / total;
            let diff = counts[b] as f64 - expected;
            chi2 += diff * diff / expected;
        }
        let crit = crate::numerics::chi2_critical(bins - 1, 0.01);
        assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
    }

    #[test]
    fn velocities_have_maxwellian_moments() {
        let v = sample_velocities(100_000, 1, 4.0, 11).unwrap();
        let (mean, _) = mean_stderr(&v);
        let var = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 4.0 * (0.25f64 / v.len() as f64).sqrt());
        assert!((var - 0.25).abs() < 0.005);
    }

    #[test]
    fn mean_energy_beta_zero_is_centered() {
        let k = cosine();
        let params = McmcParams {
            burnin: 2000,
            samples: 8000,
            thinning: 2,
            initial_step: 0.25,
        };
        let (mean, stderr) = mean_energy(&k, 6, 0.0, &params, 13).unwrap();
        assert!(mean.abs() < 4.0 * stderr.max(1e-4), "mean {mean} stderr {stderr}");
    }

    #[test]
    fn mean_energy_n2_matches_bessel_ratio() {
        let k = cosine();
        let params = McmcParams {
            burnin: 5000,
            samples: 40_000,
            thinning: 3,
            initial_step: 0.25,
        };
        let (mean, stderr) = mean_energy(&k, 2, 1.0, &params, 17).unwrap();
        // Oracle: <U> = -I_1(0.5) / (2 I_0(0.5)) = -0.1212498...
        let oracle = -bessel_i(1, 0.5) / (2.0 * bessel_i(0, 0.5));
        assert!((oracle + 0.12124980629040098).abs() < 1e-12);
        assert!(
            (mean - oracle).abs() < 4.0 * stderr,
            "mean {mean} oracle {oracle} stderr {stderr}"
        );
    }

    #[test]
    fn thermo_integration_agrees_with_exact_small_n() {
        let k = cosine();
        let params = McmcParams {
            burnin: 4000,
            samples: 20_000,
            thinning: 2,
            initial_step: 0.25,
        };
        let est = estimate_log_z_thermo(&k, 2, 1.0, 6, &params, 19).unwrap();
        let exact = exact_z_small_n(&k, 2, 1.0, 1 << 14).unwrap();
        assert!(
            (est.log_z - exact.log_z).abs() < 3.0 * est.stderr,
            "thermo {} exact {} stderr {}",
            est.log_z,
            exact.log_z,
            est.stderr
        );
        assert!(est.z() >= 1.0 - 3.0 * est.stderr);
    }

    #[test]
    fn moment_identity_small_n() {
        let k = cosine();
        // p = 1 and beta = 0 are exact normalization checks.
        let (l, r) = moment_identity_check(&k, 2, 0.0, 2.0, 512).unwrap();
        assert!((l - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
        let (l, r) = moment_identity_check(&k, 2, 1.0, 1.0, 2048).unwrap();
        assert!((l - r).abs() < 1e-10);
        // p = 2: rhs has the closed form I_0(1)/I_0(0.5)^2.
        let (l, r) = moment_identity_check(&k, 2, 1.0, 2.0, 2048).unwrap();
        let oracle = bessel_i(0, 1.0) / bessel_i(0, 0.5).powi(2);
        assert!((oracle - 1.1194247307980119).abs() < 1e-12);
        assert!((r - oracle).abs() < 1e-9);
        assert!((l - r).abs() < 1e-8, "lhs {l} rhs {r}");
        let (l3, r3) = moment_identity_check(&k, 3, 0.5, 2.0, 160).unwrap();
        assert!((l3 - r3).abs() < 1e-8, "N=3 lhs {l3} rhs {r3}");
    }

    #[test]
    fn naive_bound_example_and_domination() {
        let k = cosine();
        // exp(0.5 * 4 * (1/pi) * e^{0.5}) = 2.8566...
        let b = naive_bound(&k, 4, 0.5, 4096).unwrap();
        let oracle = (0.5 * 4.0 / std::f64::consts::PI * 0.5f64.exp()).exp();
        assert!((b - oracle).abs() / oracle < 1e-3, "bound {b} oracle {oracle}");
        assert!((naive_bound(&k, 4, 0.0, 256).unwrap() - 1.0).abs() < 1e-14);
        // exact Z respects the bound at small N.
        let z = exact_z_small_n(&k, 2, 0.5, 4096).unwrap().z();
        assert!(z <= naive_bound(&k, 2, 0.5, 4096).unwrap());
    }

    #[test]
    fn theoretical_bounds_examples() {
        let k = cosine();
        let b = theoretical_bounds(&k, 8, 1.0, 1.0, 1024).unwrap();
        assert!((b.bound_l2 - 0.5f64.exp()).abs() < 1e-12);
        assert!(b.bound_riesz.is_none());
        let kr = make_kernel(&KernelSpec::riesz(2, 1.0, 2)).unwrap();
        let br = theoretical_bounds(&kr, 8, 1.0, 1.0, 32).unwrap();
        let (_, regime) = br.bound_riesz.unwrap();
        assert_eq!(regime, RieszRegime::Critical);
        let b0 = theoretical_bounds(&k, 8, 0.0, 1.0, 1024).unwrap();
        assert!(b0.bound_l2 >= 1.0 && (b0.bound_l2 - 1.0).abs() < 1e-14);
    }
}
