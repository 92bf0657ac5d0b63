//! Linearized Vlasov equation around the Maxwellian on T^1 x R,
//!
//!   d_t f + v d_x f + (K * f) d_v M_beta = 0,
//!
//! solved by two independent discretizations that certify each other:
//! a Fourier(x) x Hermite(v) spectral ladder integrated with RK4, and a
//! per-mode Volterra integral equation for the density modes with a
//! trapezoidal quadrature. Free transport (K = 0) has exact characteristics
//! and serves as a third reference.
//!
//! Hermite scaling uses the equilibrium variance 1/beta, so M_beta is exactly
//! the n = 0 basis element and the forcing occupies the single mode n = 1:
//!
//!   d_t c_{k,n} = -(2 pi i k/sqrt(beta)) (sqrt(n) c_{k,n-1} + sqrt(n+1) c_{k,n+1})
//!                 - delta_{n,1} 2 pi i k sqrt(beta) W^(k) c_{k,0}.

use crate::error::{Error, Result};
use crate::kernels::FourierKernel;
use crate::observables::{Observable, XMode};
use num_complex::Complex64;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Fourier x Hermite coefficient array c_{k,n} representing
/// f(x,v) = M_beta(v) sum_{k,n} c_{k,n} e^{2 pi i k x} He_n(sqrt(beta) v)/sqrt(n!).
#[derive(Debug, Clone)]
pub struct HermiteField {
    pub beta: f64,
    /// Retained spatial modes |k| <= k_modes.
    pub k_modes: i64,
    pub n_hermite: usize,
    /// Row-major [k + k_modes][n].
    pub coeffs: Vec<Complex64>,
    pub time: f64,
}

impl HermiteField {
    pub fn zeros(beta: f64, k_modes: i64, n_hermite: usize) -> Self {
        HermiteField {
            beta,
            k_modes,
            n_hermite,
            coeffs: vec![Complex64::new(0.0, 0.0); (2 * k_modes + 1) as usize * n_hermite],
            time: 0.0,
        }
    }

    #[inline]
    pub fn idx(&self, k: i64, n: usize) -> usize {
        ((k + self.k_modes) as usize) * self.n_hermite + n
    }

    pub fn coeff(&self, k: i64, n: usize) -> Complex64 {
        if k.abs() > self.k_modes || n >= self.n_hermite {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[self.idx(k, n)]
        }
    }

    /// Density mode rho_k = c_{k,0}.
    pub fn rho(&self, k: i64) -> Complex64 {
        self.coeff(k, 0)
    }

    /// Populate from a perturbation profile g (initial datum f = g * M_beta).
    pub fn from_profile(profile: &Observable, k_modes: i64, n_hermite: usize) -> Result<Self> {
        if profile.max_k() > k_modes {
            return Err(Error::invalid(
                "profile has spatial modes beyond k_modes".to_string(),
            ));
        }
        if profile.max_hermite() + 1 >= n_hermite {
            return Err(Error::invalid(
                "profile has Hermite content too close to the truncation".to_string(),
            ));
        }
        let mut field = HermiteField::zeros(profile.beta, k_modes, n_hermite);
        for t in &profile.terms {
            let scale = ((1..=t.hermite).map(|m| m as f64).product::<f64>().max(1.0)).sqrt();
            let entries: Vec<(i64, Complex64)> = match t.xmode {
                XMode::One => vec![(0, Complex64::new(t.coeff, 0.0))],
                XMode::Cos(k0) => vec![
                    (k0, Complex64::new(0.5 * t.coeff, 0.0)),
                    (-k0, Complex64::new(0.5 * t.coeff, 0.0)),
                ],
                XMode::Sin(k0) => vec![
                    (k0, Complex64::new(0.0, -0.5 * t.coeff)),
                    (-k0, Complex64::new(0.0, 0.5 * t.coeff)),
                ],
            };
            for (k, c) in entries {
                let i = field.idx(k, t.hermite);
                field.coeffs[i] += c * scale;
            }
        }
        Ok(field)
    }

    /// Evaluate f(x, v) from the coefficients.
    pub fn eval(&self, x: f64, v: f64) -> f64 {
        let u = self.beta.sqrt() * v;
        let gamma = (self.beta / TWO_PI).sqrt() * (-0.5 * self.beta * v * v).exp();
        // Normalized Hermite functions by stable recurrence.
        let mut psi = vec![0.0f64; self.n_hermite];
        psi[0] = 1.0;
        if self.n_hermite > 1 {
            psi[1] = u;
        }
        for n in 1..self.n_hermite.saturating_sub(1) {
            psi[n + 1] = (u * psi[n] - (n as f64).sqrt() * psi[n - 1]) / ((n + 1) as f64).sqrt();
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for k in -self.k_modes..=self.k_modes {
            let phase = Complex64::from_polar(1.0, TWO_PI * k as f64 * x);
            let mut vsum = Complex64::new(0.0, 0.0);
            for n in 0..self.n_hermite {
                vsum += self.coeffs[self.idx(k, n)] * psi[n];
            }
            acc += phase * vsum;
        }
        gamma * acc.re
    }

    /// <phi, f> for an expression-set test function:
    /// cos_k He_m pairs to sqrt(m!) Re c_{k,m}, sin_k He_m to -sqrt(m!) Im c_{k,m}.
    pub fn pair_observable(&self, phi: &Observable) -> f64 {
        let mut acc = 0.0;
        for t in &phi.terms {
            let scale = ((1..=t.hermite).map(|m| m as f64).product::<f64>().max(1.0)).sqrt();
            acc += match t.xmode {
                XMode::One => t.coeff * scale * self.coeff(0, t.hermite).re,
                XMode::Cos(k0) => t.coeff * scale * self.coeff(k0, t.hermite).re,
                XMode::Sin(k0) => -t.coeff * scale * self.coeff(k0, t.hermite).im,
            };
        }
        acc
    }

    /// Max |c| over the array (instability guard input).
    fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Optional exponential high-n filter, off by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteFilter {
    pub strength: f64,
    pub order: i32,
}

/// Hermite solver output: recorded density modes plus full coefficient
/// snapshots at requested times.
#[derive(Debug, Clone)]
pub struct HermiteTrajectory {
    pub beta: f64,
    pub k_modes: i64,
    pub times: Vec<f64>,
    /// rho[k_idx][time_idx] for k = -k_modes..=k_modes.
    pub rho: Vec<Vec<Complex64>>,
    pub snapshots: Vec<HermiteField>,
    /// Mass mode c_{0,0}(t) and momentum mode c_{0,1}(t) drift diagnostics.
    pub mass_drift: f64,
    pub momentum_drift: f64,
}

impl HermiteTrajectory {
    pub fn rho_series(&self, k: i64) -> &[Complex64] {
        &self.rho[(k + self.k_modes) as usize]
    }
}

fn ladder_rhs(field: &HermiteField, kernel: &FourierKernel, out: &mut [Complex64]) {
    let nh = field.n_hermite;
    let sb = field.beta.sqrt();
    for k in -field.k_modes..=field.k_modes {
        let base = field.idx(k, 0);
        let row = &field.coeffs[base..base + nh];
        let tk = Complex64::new(0.0, TWO_PI * k as f64);
        let adv = -tk / sb;
        for n in 0..nh {
            let mut acc = Complex64::new(0.0, 0.0);
            if n > 0 {
                acc += row[n - 1] * (n as f64).sqrt();
            }
            if n + 1 < nh {
                acc += row[n + 1] * ((n + 1) as f64).sqrt();
            }
            out[base + n] = adv * acc;
        }
        let w = kernel.coefficient_1d(k);
        if w != 0.0 {
            out[base + 1] -= tk * sb * w * row[0];
        }
    }
}

/// Integrate the Hermite ladder with RK4, recording density modes every step
/// and full fields at `snapshot_times` (must be multiples of dt).
#[allow(clippy::too_many_arguments)]
pub fn solve_hermite(
    kernel: &FourierKernel,
    beta: f64,
    profile: &Observable,
    t_max: f64,
    dt: f64,
    k_modes: i64,
    n_hermite: usize,
    filter: Option<HermiteFilter>,
    snapshot_times: &[f64],
) -> Result<HermiteTrajectory> {
    if kernel.dimension() != 1 {
        return Err(Error::Unsupported("vlasov solver is d=1".into()));
    }
    if (profile.beta - beta).abs() > 1e-12 {
        return Err(Error::invalid("profile beta must match solver beta"));
    }
    let mut field = HermiteField::from_profile(profile, k_modes, n_hermite)?;
    let steps = (t_max / dt).round() as usize;
    let snap_steps: Vec<usize> = snapshot_times
        .iter()
        .map(|&t| {
            let s = (t / dt).round() as usize;
            if ((s as f64) * dt - t).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "snapshot time {t} is not a multiple of dt"
                )));
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;

    let size = field.coeffs.len();
    let mut k1 = vec![Complex64::new(0.0, 0.0); size];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut work = field.clone();

    let mass0 = field.coeff(0, 0);
    let mom0 = field.coeff(0, 1);
    let mut mass_drift: f64 = 0.0;
    let mut momentum_drift: f64 = 0.0;

    let nk = (2 * k_modes + 1) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut rho = vec![Vec::with_capacity(steps + 1); nk];
    let mut snapshots = Vec::new();

    let record = |field: &HermiteField, times: &mut Vec<f64>, rho: &mut Vec<Vec<Complex64>>| {
        times.push(field.time);
        for k in -k_modes..=k_modes {
            rho[(k + k_modes) as usize].push(field.rho(k));
        }
    };
    record(&field, &mut times, &mut rho);
    if snap_steps.contains(&0) {
        snapshots.push(field.clone());
    }

    for step in 1..=steps {
        ladder_rhs(&field, kernel, &mut k1);
        for i in 0..size {
            work.coeffs[i] = field.coeffs[i] + 0.5 * dt * k1[i];
        }
        ladder_rhs(&work, kernel, &mut k2);
        for i in 0..size {
            work.coeffs[i] = field.coeffs[i] + 0.5 * dt * k2[i];
        }
        ladder_rhs(&work, kernel, &mut k3);
        for i in 0..size {
            work.coeffs[i] = field.coeffs[i] + dt * k3[i];
        }
        ladder_rhs(&work, kernel, &mut k4);
        for i in 0..size {
            field.coeffs[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let Some(f) = filter {
            for k in -k_modes..=k_modes {
                for n in 0..n_hermite {
                    let frac = n as f64 / (n_hermite - 1) as f64;
                    let damp = (-f.strength * frac.powi(f.order)).exp();
                    let i = field.idx(k, n);
                    field.coeffs[i] *= damp;
                }
            }
        }
        field.time = step as f64 * dt;
        record(&field, &mut times, &mut rho);
        mass_drift = mass_drift.max((field.coeff(0, 0) - mass0).norm());
        momentum_drift = momentum_drift.max((field.coeff(0, 1) - mom0).norm());
        if snap_steps.contains(&step) {
            snapshots.push(field.clone());
        }
        if step % 64 == 0 && field.max_abs() > 1e6 {
            return Err(Error::Instability(format!(
                "hermite coefficients exceeded 1e6 at t = {}",
                field.time
            )));
        }
    }
    Ok(HermiteTrajectory {
        beta,
        k_modes,
        times,
        rho,
        snapshots,
        mass_drift,
        momentum_drift,
    })
}

/// Volterra solution: density modes rho_k(t) for k = 1..=k_max (negative modes
/// by conjugation), with the free-streaming source kept alongside.
#[derive(Debug, Clone)]
pub struct VolterraSolution {
    pub beta: f64,
    pub k_max: i64,
    pub times: Vec<f64>,
    /// rho[k-1][time_idx] for k = 1..=k_max.
    pub rho: Vec<Vec<Complex64>>,
    pub source: Vec<Vec<Complex64>>,
}

impl VolterraSolution {
    pub fn rho_series(&self, k: i64) -> Vec<Complex64> {
        assert!(k != 0 && k.abs() <= self.k_max);
        if k > 0 {
            self.rho[(k - 1) as usize].clone()
        } else {
            self.rho[(-k - 1) as usize].iter().map(|c| c.conj()).collect()
        }
    }
}

/// Free-streaming source S_k(t) = int f^0(k, v) e^{-2 pi i k v t} dv for an
/// expression-set profile times the Maxwellian: each Hermite factor
/// contributes (-i a)^n e^{-a^2/2} with a = 2 pi k t / sqrt(beta).
pub fn volterra_source(profile: &Observable, k: i64, t: f64) -> Complex64 {
    let beta = profile.beta;
    let a = TWO_PI * k as f64 * t / beta.sqrt();
    let decay = (-0.5 * a * a).exp();
    let mia = Complex64::new(0.0, -a);
    let mut acc = Complex64::new(0.0, 0.0);
    for term in &profile.terms {
        let xcoeff = match term.xmode {
            XMode::One => {
                if k == 0 {
                    Complex64::new(term.coeff, 0.0)
                } else {
                    continue;
                }
            }
            XMode::Cos(k0) => {
                if k == k0 || k == -k0 {
                    Complex64::new(0.5 * term.coeff, 0.0)
                } else {
                    continue;
                }
            }
            XMode::Sin(k0) => {
                if k == k0 {
                    Complex64::new(0.0, -0.5 * term.coeff)
                } else if k == -k0 {
                    Complex64::new(0.0, 0.5 * term.coeff)
                } else {
                    continue;
                }
            }
        };
        acc += xcoeff * mia.powu(term.hermite as u32);
    }
    acc * decay
}

/// Memory kernel G_k(tau) = -(2 pi k)^2 W^(k) tau e^{-(2 pi k)^2 tau^2/(2 beta)}
/// (Duhamel along free characteristics; the Gaussian is the Fourier transform
/// of the Maxwellian).
pub fn volterra_kernel(kernel: &FourierKernel, beta: f64, k: i64, tau: f64) -> f64 {
    let w = kernel.coefficient_1d(k);
    let om = TWO_PI * k as f64;
    -om * om * w * tau * (-om * om * tau * tau / (2.0 * beta)).exp()
}

/// Solve rho_k(t) = S_k(t) + int_0^t G_k(t-s) rho_k(s) ds for each mode
/// 1 <= k <= k_max by trapezoidal quadrature (G_k(0) = 0 keeps it explicit;
/// second order in dt).
pub fn solve_volterra(
    kernel: &FourierKernel,
    beta: f64,
    profile: &Observable,
    t_max: f64,
    dt: f64,
    k_max: i64,
) -> Result<VolterraSolution> {
    if kernel.dimension() != 1 {
        return Err(Error::Unsupported("vlasov solver is d=1".into()));
    }
    if (profile.beta - beta).abs() > 1e-12 {
        return Err(Error::invalid("profile beta must match solver beta"));
    }
    let steps = (t_max / dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
    let mut rho_all = Vec::with_capacity(k_max as usize);
    let mut src_all = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let src: Vec<Complex64> = times.iter().map(|&t| volterra_source(profile, k, t)).collect();
        let g: Vec<f64> = times
            .iter()
            .map(|&t| volterra_kernel(kernel, beta, k, t))
            .collect();
        let mut rho: Vec<Complex64> = Vec::with_capacity(steps + 1);
        rho.push(src[0]);
        for j in 1..=steps {
            // trapezoid: 0.5 G(t_j) rho_0 + sum_{i=1}^{j-1} G(t_j - t_i) rho_i
            // (+ 0.5 G(0) rho_j which vanishes).
            let mut acc = 0.5 * g[j] * rho[0];
            for i in 1..j {
                acc += g[j - i] * rho[i];
            }
            rho.push(src[j] + dt * acc);
        }
        rho_all.push(rho);
        src_all.push(src);
    }
    Ok(VolterraSolution {
        beta,
        k_max,
        times,
        rho: rho_all,
        source: src_all,
    })
}

/// Exact free transport f(t, x, v) = f0(x - v t mod 1, v) for an initial datum
/// given as profile * Maxwellian.
pub fn free_transport_exact(profile: &Observable, x: f64, v: f64, t: f64) -> f64 {
    let beta = profile.beta;
    let gamma = (beta / TWO_PI).sqrt() * (-0.5 * beta * v * v).exp();
    profile.eval(crate::numerics::wrap_unit(x - v * t), v) * gamma
}

/// Density and force field on a uniform x-grid from the n = 0 coefficients;
/// force modes are -2 pi i k W^(k) rho_k (K = -grad W).
pub fn density_and_force(
    field: &HermiteField,
    kernel: &FourierKernel,
    grid_size: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut rho = vec![0.0; grid_size];
    let mut force = vec![0.0; grid_size];
    for (i, (r, f)) in rho.iter_mut().zip(force.iter_mut()).enumerate() {
        let x = i as f64 / grid_size as f64;
        let mut racc = Complex64::new(0.0, 0.0);
        let mut facc = Complex64::new(0.0, 0.0);
        for k in -field.k_modes..=field.k_modes {
            let phase = Complex64::from_polar(1.0, TWO_PI * k as f64 * x);
            let rk = field.rho(k);
            racc += rk * phase;
            let w = kernel.coefficient_1d(k);
            if w != 0.0 {
                facc += Complex64::new(0.0, -TWO_PI * k as f64 * w) * rk * phase;
            }
        }
        *r = racc.re;
        *f = facc.re;
    }
    (rho, force)
}

/// L2(dx dv) distance between a Hermite field and exact free transport on a
/// tensor grid (velocity truncated at 8/sqrt(beta)).
pub fn free_transport_l2_error(
    field: &HermiteField,
    profile: &Observable,
    nx: usize,
    nv: usize,
) -> f64 {
    let vmax = 8.0 / field.beta.sqrt();
    let mut acc = 0.0;
    for i in 0..nx {
        let x = i as f64 / nx as f64;
        for j in 0..=nv {
            let v = -vmax + 2.0 * vmax * j as f64 / nv as f64;
            let wv = if j == 0 || j == nv { 0.5 } else { 1.0 };
            let d = field.eval(x, v) - free_transport_exact(profile, x, v, field.time);
            acc += wv * d * d;
        }
    }
    (acc * (2.0 * vmax / nv as f64) / nx as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_kernel, KernelSpec};
    use crate::observables::hermite_he;

    fn cosine() -> FourierKernel {
        make_kernel(&KernelSpec::cosine()).unwrap()
    }

    fn cos_profile(beta: f64) -> Observable {
        Observable::cos_x(beta, 1)
    }

    #[test]
    fn velocity_only_profile_is_stationary() {
        let k = cosine();
        let profile = Observable::hermite_v(1.0, 2);
        let traj = solve_hermite(&k, 1.0, &profile, 0.5, 1e-3, 2, 16, None, &[0.5]).unwrap();
        let f = &traj.snapshots[0];
        let f0 = HermiteField::from_profile(&profile, 2, 16).unwrap();
        for (a, b) in f.coeffs.iter().zip(f0.coeffs.iter()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_profile_stays_zero() {
        let k = cosine();
        let profile = Observable::zero(1.0);
        let traj = solve_hermite(&k, 1.0, &profile, 0.3, 1e-3, 1, 8, None, &[]).unwrap();
        assert!(traj.rho_series(1).iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn source_formula_matches_velocity_quadrature() {
        // S_1(t) for f0 = cos(2 pi x) M_beta must equal (1/2) e^{-(2 pi t)^2/(2 beta)},
        // and for Hermite content the quadrature of the oscillatory integral.
        let beta = 1.3;
        let profile = Observable::cos_hermite(beta, 1, 2);
        for &t in &[0.0, 0.2, 0.5] {
            let analytic = volterra_source(&profile, 1, t);
            // Quadrature: int (1/2) He_2(sqrt(b) v) gamma(v) e^{-2 pi i v t} dv.
            let nv = 6000;
            let vmax = 10.0 / beta.sqrt();
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=nv {
                let v = -vmax + 2.0 * vmax * j as f64 / nv as f64;
                let wv = if j == 0 || j == nv { 0.5 } else { 1.0 };
                let gamma = (beta / TWO_PI).sqrt() * (-0.5 * beta * v * v).exp();
                let phase = Complex64::from_polar(1.0, -TWO_PI * v * t);
                acc += wv * 0.5 * hermite_he(2, beta.sqrt() * v) * gamma * phase;
            }
            acc *= 2.0 * vmax / nv as f64;
            assert!(
                (acc - analytic).norm() < 1e-8,
                "t={t}: quad {acc} vs analytic {analytic}"
            );
        }
        let simple = cos_profile(1.0);
        let s = volterra_source(&simple, 1, 0.3);
        let expect = 0.5 * (-(TWO_PI * 0.3).powi(2) / 2.0).exp();
        assert!((s.re - expect).abs() < 1e-15 && s.im.abs() < 1e-15);
    }

    #[test]
    fn volterra_reduces_to_source_without_kernel() {
        let k = make_kernel(&KernelSpec::zero(1)).unwrap();
        let profile = cos_profile(1.0);
        let sol = solve_volterra(&k, 1.0, &profile, 1.0, 1e-3, 2).unwrap();
        for (r, s) in sol.rho[0].iter().zip(sol.source[0].iter()) {
            assert_eq!(r, s);
        }
        // Mode 2 has no initial content: identically zero.
        assert!(sol.rho[1].iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn free_transport_matches_exact_characteristics() {
        let k = make_kernel(&KernelSpec::zero(1)).unwrap();
        let profile = cos_profile(1.0);
        let traj = solve_hermite(&k, 1.0, &profile, 1.0, 1e-3, 1, 256, None, &[1.0]).unwrap();
        let err = free_transport_l2_error(&traj.snapshots[0], &profile, 64, 160);
        assert!(err < 1e-4, "L2 error {err}");
    }

    #[test]
    fn doubling_hermite_resolution_cuts_free_error() {
        let k = make_kernel(&KernelSpec::zero(1)).unwrap();
        let profile = cos_profile(1.0);
        // t = 1: packet peak at n ~ (2 pi)^2 = 39.5.
        let coarse = solve_hermite(&k, 1.0, &profile, 1.0, 1e-3, 1, 48, None, &[1.0]).unwrap();
        let fine = solve_hermite(&k, 1.0, &profile, 1.0, 1e-3, 1, 96, None, &[1.0]).unwrap();
        let e_coarse = free_transport_l2_error(&coarse.snapshots[0], &profile, 64, 160);
        let e_fine = free_transport_l2_error(&fine.snapshots[0], &profile, 64, 160);
        assert!(
            e_coarse > 10.0 * e_fine,
            "coarse {e_coarse} fine {e_fine}"
        );
    }

    #[test]
    fn rk4_error_scales_fourth_order() {
        let k = cosine();
        let profile = cos_profile(1.0);
        let reference = solve_hermite(&k, 1.0, &profile, 0.5, 6.25e-5, 1, 64, None, &[])
            .unwrap()
            .rho_series(1)
            .last()
            .copied()
            .unwrap();
        let err = |dt: f64| {
            let r = solve_hermite(&k, 1.0, &profile, 0.5, dt, 1, 64, None, &[])
                .unwrap()
                .rho_series(1)
                .last()
                .copied()
                .unwrap();
            (r - reference).norm()
        };
        let e1 = err(2e-3);
        let e2 = err(1e-3);
        let ratio = e1 / e2;
        assert!(
            (10.0..=24.0).contains(&ratio),
            "RK4 ratio {ratio} (e1={e1:.3e}, e2={e2:.3e})"
        );
    }

    #[test]
    fn cross_method_agreement_short_horizon() {
        let k = cosine();
        let profile = cos_profile(1.0);
        let dt = 5e-4;
        let hermite = solve_hermite(&k, 1.0, &profile, 1.5, dt, 1, 256, None, &[]).unwrap();
        let volterra = solve_volterra(&k, 1.0, &profile, 1.5, dt, 1).unwrap();
        let mut sup: f64 = 0.0;
        for (h, v) in hermite.rho_series(1).iter().zip(volterra.rho[0].iter()) {
            sup = sup.max((h - v).norm());
        }
        assert!(sup < 1e-3, "sup diff {sup}");
    }

    #[test]
    fn conservation_and_reality() {
        let k = cosine();
        let profile = Observable::new(
            1.0,
            vec![
                crate::observables::PhaseTerm {
                    coeff: 1.0,
                    xmode: XMode::Cos(1),
                    hermite: 0,
                },
                crate::observables::PhaseTerm {
                    coeff: 0.3,
                    xmode: XMode::Sin(1),
                    hermite: 1,
                },
            ],
        )
        .unwrap();
        let traj = solve_hermite(&k, 1.0, &profile, 1.0, 1e-3, 2, 64, None, &[1.0]).unwrap();
        assert!(traj.mass_drift < 1e-12);
        assert!(traj.momentum_drift < 1e-10);
        let f = &traj.snapshots[0];
        for kk in 0..=2i64 {
            for n in 0..8 {
                let a = f.coeff(kk, n);
                let b = f.coeff(-kk, n).conj();
                assert!((a - b).norm() < 1e-12, "reality at k={kk} n={n}");
            }
        }
    }

    #[test]
    fn density_force_consistency_with_convolution() {
        // Single mode rho_1 = 1: force must equal the convolution K * rho by
        // direct quadrature.
        let k = cosine();
        let mut field = HermiteField::zeros(1.0, 2, 4);
        let i1 = field.idx(1, 0);
        field.coeffs[i1] = Complex64::new(1.0, 0.0);
        let im1 = field.idx(-1, 0);
        field.coeffs[im1] = Complex64::new(1.0, 0.0);
        let grid = 128;
        let (rho, force) = density_and_force(&field, &k, grid);
        for (i, (&r, &f)) in rho.iter().zip(force.iter()).enumerate() {
            let x = i as f64 / grid as f64;
            assert!((r - 2.0 * (TWO_PI * x).cos()).abs() < 1e-12);
            // quadrature convolution
            let m = 2048;
            let mut conv = 0.0;
            for j in 0..m {
                let y = j as f64 / m as f64;
                conv += k.force_1d(x - y) * 2.0 * (TWO_PI * y).cos();
            }
            conv /= m as f64;
            assert!((f - conv).abs() < 1e-10, "x={x}: {f} vs {conv}");
        }
        // rho real even => force odd.
        for i in 1..grid / 2 {
            assert!((force[i] + force[grid - i]).abs() < 1e-12);
        }
        // k=0-only content exerts no force.
        let mut f0 = HermiteField::zeros(1.0, 1, 4);
        let i0 = f0.idx(0, 0);
        f0.coeffs[i0] = Complex64::new(1.0, 0.0);
        let (_, force0) = density_and_force(&f0, &k, 32);
        assert!(force0.iter().all(|f| f.abs() < 1e-15));
    }

    #[test]
    fn instability_guard_trips_on_absurd_dt() {
        let k = cosine();
        let profile = cos_profile(1.0);
        let res = solve_hermite(&k, 1.0, &profile, 50.0, 0.5, 1, 64, None, &[]);
        assert!(matches!(res, Err(Error::Instability(_))));
    }
}
