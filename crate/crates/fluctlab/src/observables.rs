//! One-particle phase-space test functions on T^1 x R built from a small
//! expression set: Fourier modes in x times probabilists' Hermite polynomials
//! in sqrt(beta) v. The Maxwellian pairing, velocity gradient and kernel
//! convolution of such functions stay inside the set, which keeps every
//! estimator correction analytic.

use crate::error::{Error, Result};
use crate::kernels::FourierKernel;
use serde::{Deserialize, Serialize};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Spatial factor of a term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XMode {
    /// Constant 1.
    One,
    /// cos(2 pi k x)
    Cos(i64),
    /// sin(2 pi k x)
    Sin(i64),
}

impl XMode {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            XMode::One => 1.0,
            XMode::Cos(k) => (TWO_PI * *k as f64 * x).cos(),
            XMode::Sin(k) => (TWO_PI * *k as f64 * x).sin(),
        }
    }

    /// Spatial mean over the torus.
    fn mean(&self) -> f64 {
        match self {
            XMode::One => 1.0,
            XMode::Cos(k) | XMode::Sin(k) => {
                if *k == 0 {
                    self.eval(0.0)
                } else {
                    0.0
                }
            }
        }
    }
}

/// One additive term: coeff * xmode(x) * He_n(sqrt(beta) v).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTerm {
    pub coeff: f64,
    pub xmode: XMode,
    /// Hermite degree (probabilists' convention, un-normalized He_n).
    pub hermite: usize,
}

/// A test function phi(z) = sum of terms, tied to an inverse temperature beta
/// through the Hermite velocity scaling u = sqrt(beta) v.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub beta: f64,
    pub terms: Vec<PhaseTerm>,
}

/// He_n(u), probabilists' Hermite polynomial (He_0=1, He_1=u, He_2=u^2-1, ...).
pub fn hermite_he(n: usize, u: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => u,
        _ => {
            let mut hm = 1.0;
            let mut h = u;
            for k in 1..n {
                let next = u * h - k as f64 * hm;
                hm = h;
                h = next;
            }
            h
        }
    }
}

impl Observable {
    pub fn new(beta: f64, terms: Vec<PhaseTerm>) -> Result<Self> {
        if beta <= 0.0 {
            return Err(Error::invalid("observable beta must be > 0"));
        }
        Ok(Observable { beta, terms })
    }

    /// cos(2 pi k x)
    pub fn cos_x(beta: f64, k: i64) -> Self {
        Observable {
            beta,
            terms: vec![PhaseTerm {
                coeff: 1.0,
                xmode: XMode::Cos(k),
                hermite: 0,
            }],
        }
    }

    /// sin(2 pi k x)
    pub fn sin_x(beta: f64, k: i64) -> Self {
        Observable {
            beta,
            terms: vec![PhaseTerm {
                coeff: 1.0,
                xmode: XMode::Sin(k),
                hermite: 0,
            }],
        }
    }

    /// He_n(sqrt(beta) v), velocity-only.
    pub fn hermite_v(beta: f64, n: usize) -> Self {
        Observable {
            beta,
            terms: vec![PhaseTerm {
                coeff: 1.0,
                xmode: XMode::One,
                hermite: n,
            }],
        }
    }

    /// cos(2 pi k x) * He_n(sqrt(beta) v).
    pub fn cos_hermite(beta: f64, k: i64, n: usize) -> Self {
        Observable {
            beta,
            terms: vec![PhaseTerm {
                coeff: 1.0,
                xmode: XMode::Cos(k),
                hermite: n,
            }],
        }
    }

    pub fn zero(beta: f64) -> Self {
        Observable {
            beta,
            terms: Vec::new(),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, v: f64) -> f64 {
        let u = self.beta.sqrt() * v;
        self.terms
            .iter()
            .map(|t| t.coeff * t.xmode.eval(x) * hermite_he(t.hermite, u))
            .sum()
    }

    /// d/dv phi, using He_n' = n He_{n-1}.
    #[inline]
    pub fn grad_v(&self, x: f64, v: f64) -> f64 {
        let su = self.beta.sqrt();
        let u = su * v;
        self.terms
            .iter()
            .filter(|t| t.hermite >= 1)
            .map(|t| {
                t.coeff
                    * t.xmode.eval(x)
                    * su
                    * t.hermite as f64
                    * hermite_he(t.hermite - 1, u)
            })
            .sum()
    }

    /// Exact Maxwellian pairing  integral phi(z) M_beta(z) dz  (the Gaussian
    /// kills every Hermite degree >= 1 and the torus kills every k != 0 mode).
    pub fn maxwellian_pairing(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.hermite == 0)
            .map(|t| t.coeff * t.xmode.mean())
            .sum()
    }

    /// Verify the centering integral phi M_beta = 0 by quadrature to `tol`.
    pub fn check_centered_quadrature(&self, tol: f64) -> Result<()> {
        let nx = 256;
        let nv = 400;
        let vmax = 8.0 / self.beta.sqrt();
        let gamma = |v: f64| (self.beta / TWO_PI).sqrt() * (-0.5 * self.beta * v * v).exp();
        let mut acc = 0.0;
        for i in 0..nx {
            let x = i as f64 / nx as f64;
            for j in 0..=nv {
                let v = -vmax + 2.0 * vmax * j as f64 / nv as f64;
                let wv = if j == 0 || j == nv { 0.5 } else { 1.0 };
                acc += wv * self.eval(x, v) * gamma(v);
            }
        }
        acc *= (2.0 * vmax / nv as f64) / nx as f64;
        if acc.abs() > tol {
            return Err(Error::invalid(format!(
                "observable is not centered against the Maxwellian: integral = {acc:.3e}"
            )));
        }
        Ok(())
    }

    /// Max spatial frequency appearing in the expression.
    pub fn max_k(&self) -> i64 {
        self.terms
            .iter()
            .map(|t| match t.xmode {
                XMode::One => 0,
                XMode::Cos(k) | XMode::Sin(k) => k.abs(),
            })
            .max()
            .unwrap_or(0)
    }

    /// Max Hermite degree appearing in the expression.
    pub fn max_hermite(&self) -> usize {
        self.terms.iter().map(|t| t.hermite).max().unwrap_or(0)
    }

    /// The order-1 function  q(z) = integral  (d/dv' phi)(z') K(x' - x) M_beta(z') dz',
    /// expressed back in the expression set. Only He_1 terms survive the velocity
    /// integral; the spatial convolution maps cos_k -> -2 pi k W^(k) sin_k and
    /// sin_k -> 2 pi k W^(k) cos_k (with the sign from K(x'-x) = -K(x-x')).
    pub fn force_smoothed_correction(&self, kernel: &FourierKernel) -> Observable {
        let su = self.beta.sqrt();
        let mut terms = Vec::new();
        for t in &self.terms {
            if t.hermite != 1 {
                continue;
            }
            match t.xmode {
                XMode::One => {}
                XMode::Cos(k) => {
                    let c = kernel.coefficient_1d(k);
                    if c != 0.0 {
                        terms.push(PhaseTerm {
                            coeff: -t.coeff * su * TWO_PI * k as f64 * c,
                            xmode: XMode::Sin(k),
                            hermite: 0,
                        });
                    }
                }
                XMode::Sin(k) => {
                    let c = kernel.coefficient_1d(k);
                    if c != 0.0 {
                        terms.push(PhaseTerm {
                            coeff: t.coeff * su * TWO_PI * k as f64 * c,
                            xmode: XMode::Cos(k),
                            hermite: 0,
                        });
                    }
                }
            }
        }
        Observable {
            beta: self.beta,
            terms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_kernel, KernelSpec};

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_he(0, 0.7), 1.0);
        assert_eq!(hermite_he(1, 0.7), 0.7);
        assert!((hermite_he(2, 0.7) - (0.49 - 1.0)).abs() < 1e-15);
        assert!((hermite_he(3, 0.7) - (0.343 - 3.0 * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn maxwellian_pairing_is_analytic() {
        let phi = Observable::cos_x(1.0, 1);
        assert_eq!(phi.maxwellian_pairing(), 0.0);
        phi.check_centered_quadrature(1e-8).unwrap();
        let he2 = Observable::hermite_v(2.0, 2);
        assert_eq!(he2.maxwellian_pairing(), 0.0);
        he2.check_centered_quadrature(1e-8).unwrap();
        let mass = Observable::new(
            1.0,
            vec![PhaseTerm {
                coeff: 2.5,
                xmode: XMode::One,
                hermite: 0,
            }],
        )
        .unwrap();
        assert_eq!(mass.maxwellian_pairing(), 2.5);
        assert!(mass.check_centered_quadrature(1e-8).is_err());
    }

    #[test]
    fn grad_v_matches_finite_differences() {
        let phi = Observable::new(
            0.7,
            vec![
                PhaseTerm {
                    coeff: 0.9,
                    xmode: XMode::Cos(1),
                    hermite: 2,
                },
                PhaseTerm {
                    coeff: -0.4,
                    xmode: XMode::Sin(2),
                    hermite: 1,
                },
            ],
        )
        .unwrap();
        let h = 1e-6;
        for (x, v) in [(0.13, 0.4), (0.77, -1.3), (0.5, 2.0)] {
            let fd = (phi.eval(x, v + h) - phi.eval(x, v - h)) / (2.0 * h);
            assert!((phi.grad_v(x, v) - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn force_smoothed_correction_matches_quadrature() {
        // q(x) = int dphi/dv'(z') K(x'-x) M(z') dz' for phi = cos(2 pi x) He_1.
        let beta = 1.3;
        let phi = Observable::cos_hermite(beta, 1, 1);
        let kernel = make_kernel(&KernelSpec::cosine()).unwrap();
        let q = phi.force_smoothed_correction(&kernel);
        // Quadrature oracle over (x', v').
        let nx = 512;
        let nv = 400;
        let vmax = 8.0 / beta.sqrt();
        let gamma = |v: f64| (beta / TWO_PI).sqrt() * (-0.5 * beta * v * v).exp();
        for x in [0.1, 0.37, 0.66] {
            let mut acc = 0.0;
            for i in 0..nx {
                let xp = i as f64 / nx as f64;
                let kval = kernel.force_1d(xp - x);
                for j in 0..=nv {
                    let vp = -vmax + 2.0 * vmax * j as f64 / nv as f64;
                    let wv = if j == 0 || j == nv { 0.5 } else { 1.0 };
                    acc += wv * phi.grad_v(xp, vp) * kval * gamma(vp);
                }
            }
            acc *= (2.0 * vmax / nv as f64) / nx as f64;
            assert!(
                (acc - q.eval(x, 0.0)).abs() < 1e-8,
                "x={x}: quad={acc} analytic={}",
                q.eval(x, 0.0)
            );
        }
    }
}
