//! Even, centered periodic pair potentials on the unit torus T^d defined by
//! truncated Fourier data, with forces K = -grad W.
//!
//! All built-in families are represented through a finite cutoff Lambda in the
//! l-infinity frequency ball; the truncated sum is the regularization used by
//! every downstream quadrature and simulation.

use crate::error::{Error, Result};
use crate::numerics::wrap_sym;
use std::collections::BTreeMap;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Interaction family: Riesz coefficients |xi|^{s-d}, logarithmic |xi|^{-d},
/// or an explicit symmetric coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    Riesz { s: f64 },
    Log,
    /// Explicit coefficients keyed by frequency vector (padded to 3 entries).
    /// Must be even in xi, real, and carry no xi = 0 entry.
    FourierTable(BTreeMap<[i64; 3], f64>),
}

/// Declarative kernel description.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub dimension: usize,
    pub family: KernelFamily,
    /// Max l-infinity norm of retained frequencies.
    pub cutoff: i64,
}

impl KernelSpec {
    pub fn riesz(dimension: usize, s: f64, cutoff: i64) -> Self {
        KernelSpec {
            dimension,
            family: KernelFamily::Riesz { s },
            cutoff,
        }
    }

    pub fn log(dimension: usize, cutoff: i64) -> Self {
        KernelSpec {
            dimension,
            family: KernelFamily::Log,
            cutoff,
        }
    }

    pub fn table(dimension: usize, entries: &[([i64; 3], f64)], cutoff: i64) -> Self {
        KernelSpec {
            dimension,
            family: KernelFamily::FourierTable(entries.iter().cloned().collect()),
            cutoff,
        }
    }

    /// W(x) = cos(2 pi x) on T^1: coefficients 1/2 at xi = +-1.
    pub fn cosine() -> Self {
        Self::table(1, &[([1, 0, 0], 0.5), ([-1, 0, 0], 0.5)], 1)
    }

    /// The zero kernel (free dynamics).
    pub fn zero(dimension: usize) -> Self {
        KernelSpec {
            dimension,
            family: KernelFamily::FourierTable(BTreeMap::new()),
            cutoff: 1,
        }
    }
}

/// Cached norms of a kernel; L2 is exact via Parseval, the rest are grid
/// quadrature values at the stated grid size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelNorms {
    pub l1: f64,
    pub l2: f64,
    /// sup of the negative part W_- = max(-W, 0) over the sample grid.
    pub neg_sup: f64,
    /// L1 norm of the negative part.
    pub neg_l1: f64,
}

/// Optional sampled real-space table for d=1 kernels (linear interpolation).
#[derive(Debug, Clone)]
struct RealspaceTable {
    n: usize,
    w: Vec<f64>,
    k: Vec<f64>,
}

/// A centered even periodic potential given by its retained Fourier modes.
///
/// Immutable after construction; shared freely across workers.
#[derive(Debug, Clone)]
pub struct FourierKernel {
    spec: KernelSpec,
    /// All retained frequencies with 0 < |xi|_inf <= Lambda (both signs stored).
    freqs: Vec<[i64; 3]>,
    coeffs: Vec<f64>,
    table: Option<RealspaceTable>,
}

fn lattice_points(d: usize, cutoff: i64) -> Vec<[i64; 3]> {
    let range = |on: bool| -> Vec<i64> {
        if on {
            (-cutoff..=cutoff).collect()
        } else {
            vec![0]
        }
    };
    let mut out = Vec::new();
    for &a in &range(true) {
        for &b in &range(d >= 2) {
            for &c in &range(d >= 3) {
                if a == 0 && b == 0 && c == 0 {
                    continue;
                }
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn euclid_norm(xi: &[i64; 3]) -> f64 {
    ((xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) as f64).sqrt()
}

/// Build a kernel from its spec, validating the spec invariants.
pub fn make_kernel(spec: &KernelSpec) -> Result<FourierKernel> {
    if !(1..=3).contains(&spec.dimension) {
        return Err(Error::invalid(format!(
            "kernel dimension must be 1..=3, got {}",
            spec.dimension
        )));
    }
    if spec.cutoff < 1 {
        return Err(Error::invalid("kernel cutoff must be >= 1"));
    }
    let d = spec.dimension;
    let (freqs, coeffs) = match &spec.family {
        KernelFamily::Riesz { s } => {
            if !(*s > 0.0 && *s < d as f64) {
                return Err(Error::invalid(format!(
                    "riesz exponent must satisfy 0 < s < d, got s={s}, d={d}"
                )));
            }
            let freqs = lattice_points(d, spec.cutoff);
            let coeffs = freqs
                .iter()
                .map(|xi| euclid_norm(xi).powf(*s - d as f64))
                .collect();
            (freqs, coeffs)
        }
        KernelFamily::Log => {
            let freqs = lattice_points(d, spec.cutoff);
            let coeffs = freqs
                .iter()
                .map(|xi| euclid_norm(xi).powi(-(d as i32)))
                .collect();
            (freqs, coeffs)
        }
        KernelFamily::FourierTable(map) => {
            let mut freqs = Vec::new();
            let mut coeffs = Vec::new();
            for (xi, w) in map {
                if *xi == [0, 0, 0] {
                    if *w != 0.0 {
                        return Err(Error::invalid(
                            "fourier_table has a nonzero xi=0 entry (centering violated)",
                        ));
                    }
                    continue;
                }
                for (axis, &component) in xi.iter().enumerate() {
                    if axis >= d && component != 0 {
                        return Err(Error::invalid(format!(
                            "frequency {xi:?} uses axis {axis} beyond dimension {d}"
                        )));
                    }
                }
                if xi.iter().map(|c| c.abs()).max().unwrap() > spec.cutoff {
                    return Err(Error::invalid(format!(
                        "frequency {xi:?} exceeds cutoff {}",
                        spec.cutoff
                    )));
                }
                let neg = [-xi[0], -xi[1], -xi[2]];
                match map.get(&neg) {
                    Some(wneg) if *wneg == *w => {}
                    _ => {
                        return Err(Error::invalid(format!(
                            "fourier_table asymmetric at {xi:?}: W(xi) must equal W(-xi)"
                        )));
                    }
                }
                freqs.push(*xi);
                coeffs.push(*w);
            }
            (freqs, coeffs)
        }
    };
    Ok(FourierKernel {
        spec: spec.clone(),
        freqs,
        coeffs,
        table: None,
    })
}

impl FourierKernel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn cutoff(&self) -> i64 {
        self.spec.cutoff
    }

    /// Retained frequencies (both signs) with their coefficients.
    pub fn modes(&self) -> impl Iterator<Item = (&[i64; 3], f64)> {
        self.freqs.iter().zip(self.coeffs.iter().copied())
    }

    pub fn n_modes(&self) -> usize {
        self.freqs.len()
    }

    /// Coefficient at a given frequency vector (0 if not retained).
    pub fn coefficient(&self, xi: &[i64; 3]) -> f64 {
        self.freqs
            .iter()
            .position(|f| f == xi)
            .map(|i| self.coeffs[i])
            .unwrap_or(0.0)
    }

    /// Coefficient at scalar frequency k (d=1 convenience).
    pub fn coefficient_1d(&self, k: i64) -> f64 {
        self.coefficient(&[k, 0, 0])
    }

    /// W(x) as the truncated sum  sum_xi  W^(xi) cos(2 pi xi . x).
    ///
    /// The argument of cos is folded through |.| so W(x) = W(-x) bit-for-bit.
    pub fn potential(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension());
        let mut acc = 0.0;
        for (xi, w) in self.modes() {
            let mut dot = 0.0;
            for (a, &xa) in x.iter().enumerate() {
                dot += xi[a] as f64 * wrap_sym(xa);
            }
            acc += w * (TWO_PI * dot).abs().cos();
        }
        acc
    }

    /// K(x) = -grad W(x) =  sum_xi  W^(xi) 2 pi xi sin(2 pi xi . x).
    ///
    /// sin is evaluated on |arg| with the sign restored so K(-x) = -K(x)
    /// bit-for-bit.
    pub fn force(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dimension());
        debug_assert_eq!(out.len(), self.dimension());
        out.iter_mut().for_each(|o| *o = 0.0);
        for (xi, w) in self.modes() {
            let mut dot = 0.0;
            for (a, &xa) in x.iter().enumerate() {
                dot += xi[a] as f64 * wrap_sym(xa);
            }
            let arg = TWO_PI * dot;
            let s = arg.abs().sin() * arg.signum();
            for (a, o) in out.iter_mut().enumerate() {
                *o += w * TWO_PI * xi[a] as f64 * s;
            }
        }
    }

    /// d=1 force as a scalar.
    pub fn force_1d(&self, x: f64) -> f64 {
        let mut out = [0.0];
        self.force(&[x], &mut out);
        out[0]
    }

    /// Quadrature/Parseval norms on a uniform tensor grid of `grid_size`
    /// points per axis. `grid_size >= 2*cutoff + 1` required so the grid
    /// resolves every retained mode.
    pub fn norms(&self, grid_size: usize) -> Result<KernelNorms> {
        if (grid_size as i64) < 2 * self.cutoff() + 1 {
            return Err(Error::invalid(format!(
                "grid_size {} too small for cutoff {}",
                grid_size,
                self.cutoff()
            )));
        }
        let d = self.dimension();
        let n = grid_size;
        let total = n.pow(d as u32);
        let mut l1 = 0.0;
        let mut neg_sup: f64 = 0.0;
        let mut neg_l1 = 0.0;
        let mut x = [0.0f64; 3];
        for flat in 0..total {
            let mut rem = flat;
            for a in 0..d {
                x[a] = (rem % n) as f64 / n as f64;
                rem /= n;
            }
            let w = self.potential(&x[..d]);
            l1 += w.abs();
            if w < 0.0 {
                neg_sup = neg_sup.max(-w);
                neg_l1 += -w;
            }
        }
        let cell = 1.0 / total as f64;
        let l2_sq: f64 = self.coeffs.iter().map(|c| c * c).sum();
        Ok(KernelNorms {
            l1: l1 * cell,
            l2: l2_sq.sqrt(),
            neg_sup,
            neg_l1: neg_l1 * cell,
        })
    }

    /// Grid quadrature of the squared potential (for the Parseval check).
    pub fn l2_sq_quadrature(&self, grid_size: usize) -> f64 {
        let d = self.dimension();
        let n = grid_size;
        let total = n.pow(d as u32);
        let mut acc = 0.0;
        let mut x = [0.0f64; 3];
        for flat in 0..total {
            let mut rem = flat;
            for a in 0..d {
                x[a] = (rem % n) as f64 / n as f64;
                rem /= n;
            }
            let w = self.potential(&x[..d]);
            acc += w * w;
        }
        acc / total as f64
    }

    /// Weak-L2 quasinorm estimated from the empirical layer-cake on a d-dim
    /// sample grid: sup_k |W|_(k) * (k/n)^{1/2} over sorted magnitudes.
    pub fn weak_l2_quadrature(&self, grid_size: usize) -> f64 {
        let d = self.dimension();
        let n = grid_size;
        let total = n.pow(d as u32);
        let mut vals = Vec::with_capacity(total);
        let mut x = [0.0f64; 3];
        for flat in 0..total {
            let mut rem = flat;
            for a in 0..d {
                x[a] = (rem % n) as f64 / n as f64;
                rem /= n;
            }
            vals.push(self.potential(&x[..d]).abs());
        }
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        vals.iter()
            .enumerate()
            .map(|(i, v)| v * ((i + 1) as f64 / total as f64).sqrt())
            .fold(0.0, f64::max)
    }

    /// Attach a sampled real-space table (d=1 only) used by `potential_fast`
    /// and `force_fast`. Interpolation error is O(h^2 (2 pi Lambda)^2 ||W||).
    pub fn with_table(mut self, n: usize) -> Result<Self> {
        if self.dimension() != 1 {
            return Err(Error::Unsupported(
                "real-space table only implemented for d=1".into(),
            ));
        }
        let mut w = Vec::with_capacity(n + 1);
        let mut k = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = i as f64 / n as f64;
            w.push(self.potential(&[x]));
            k.push(self.force_1d(x));
        }
        self.table = Some(RealspaceTable { n, w, k });
        Ok(self)
    }

    /// Table-interpolated potential (falls back to the exact sum without a table).
    pub fn potential_fast(&self, x: f64) -> f64 {
        match &self.table {
            Some(t) => {
                let y = crate::numerics::wrap_unit(x) * t.n as f64;
                let i = y.floor() as usize;
                let frac = y - i as f64;
                t.w[i] * (1.0 - frac) + t.w[i + 1] * frac
            }
            None => self.potential(&[x]),
        }
    }

    /// Table-interpolated force (d=1).
    pub fn force_fast(&self, x: f64) -> f64 {
        match &self.table {
            Some(t) => {
                let y = crate::numerics::wrap_unit(x) * t.n as f64;
                let i = y.floor() as usize;
                let frac = y - i as f64;
                t.k[i] * (1.0 - frac) + t.k[i + 1] * frac
            }
            None => self.force_1d(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn cosine() -> FourierKernel {
        make_kernel(&KernelSpec::cosine()).unwrap()
    }

    #[test]
    fn cosine_kernel_is_cos_2pi_x() {
        let k = cosine();
        assert!((k.potential(&[0.0]) - 1.0).abs() < 1e-15);
        assert!(k.potential(&[0.25]).abs() < 1e-15);
        assert!((k.potential(&[0.5]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_kernel_coefficients_and_half_point() {
        let k = make_kernel(&KernelSpec::log(1, 4)).unwrap();
        for (kk, expected) in [(1, 1.0), (2, 0.5), (3, 1.0 / 3.0), (4, 0.25)] {
            assert!((k.coefficient_1d(kk) - expected).abs() < 1e-15);
            assert!((k.coefficient_1d(-kk) - expected).abs() < 1e-15);
        }
        // W(1/2) = 2 sum_k (1/k) cos(pi k) = 2(-1 + 1/2 - 1/3 + 1/4) = -7/6.
        assert!((k.potential(&[0.5]) - (-7.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn riesz_2d_coefficient_value() {
        let k = make_kernel(&KernelSpec::riesz(2, 1.0, 2)).unwrap();
        // |xi| = sqrt(2) at (1,1): coefficient |xi|^{s-d} = 2^{-1/2}.
        assert!((k.coefficient(&[1, 1, 0]) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(make_kernel(&KernelSpec::riesz(1, 1.0, 4)).is_err());
        assert!(make_kernel(&KernelSpec::riesz(1, -0.2, 4)).is_err());
        assert!(make_kernel(&KernelSpec::table(1, &[([0, 0, 0], 0.3)], 1)).is_err());
        assert!(make_kernel(&KernelSpec::table(1, &[([1, 0, 0], 0.5)], 1)).is_err());
        assert!(
            make_kernel(&KernelSpec::table(
                1,
                &[([1, 0, 0], 0.5), ([-1, 0, 0], 0.25)],
                1
            ))
            .is_err()
        );
    }

    #[test]
    fn force_examples() {
        let k = cosine();
        // K = 2 pi sin(2 pi x).
        assert!((k.force_1d(0.25) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(k.force_1d(0.0).abs() == 0.0);
        assert!((k.force_1d(0.1) - 2.0 * std::f64::consts::PI * (0.2 * std::f64::consts::PI).sin()).abs() < 1e-12);
    }

    #[test]
    fn symmetry_is_bitwise() {
        let k = make_kernel(&KernelSpec::log(1, 8)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x: f64 = rng.gen_range(-0.5..0.5);
            assert_eq!(k.potential(&[x]), k.potential(&[-x]));
            assert_eq!(k.force_1d(x), -k.force_1d(-x));
        }
        let k2 = make_kernel(&KernelSpec::riesz(2, 0.8, 3)).unwrap();
        for _ in 0..20 {
            let x = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let xm = [-x[0], -x[1]];
            assert_eq!(k2.potential(&x), k2.potential(&xm));
            let mut f = [0.0; 2];
            let mut fm = [0.0; 2];
            k2.force(&x, &mut f);
            k2.force(&xm, &mut fm);
            assert_eq!(f[0], -fm[0]);
            assert_eq!(f[1], -fm[1]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = make_kernel(&KernelSpec::log(1, 6)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..100 {
            let x: f64 = rng.gen_range(0.02..0.98);
            let fd = -(k.potential(&[x + h]) - k.potential(&[x - h])) / (2.0 * h);
            let f = k.force_1d(x);
            let denom = f.abs().max(1.0);
            assert!(
                (f - fd).abs() / denom < 1e-6,
                "x={x} force={f} fd={fd}"
            );
        }
    }

    #[test]
    fn centering_quadrature_mean_vanishes() {
        for spec in [
            KernelSpec::cosine(),
            KernelSpec::log(1, 8),
            KernelSpec::riesz(2, 1.0, 2),
        ] {
            let k = make_kernel(&spec).unwrap();
            let n = 64usize;
            let d = k.dimension();
            let total = n.pow(d as u32);
            let mut acc = 0.0;
            let mut x = [0.0f64; 3];
            for flat in 0..total {
                let mut rem = flat;
                for a in 0..d {
                    x[a] = (rem % n) as f64 / n as f64;
                    rem /= n;
                }
                acc += k.potential(&x[..d]);
            }
            assert!((acc / total as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_agrees_with_grid_quadrature() {
        for spec in [KernelSpec::cosine(), KernelSpec::log(1, 8)] {
            let k = make_kernel(&spec).unwrap();
            let grid = (4 * k.cutoff()) as usize;
            let quad = k.l2_sq_quadrature(grid.max(16));
            let exact: f64 = k.norms(grid.max(16)).unwrap().l2.powi(2);
            assert!(
                ((quad - exact) / exact).abs() < 1e-8,
                "quad={quad} exact={exact}"
            );
        }
    }

    #[test]
    fn norms_of_cosine() {
        let k = cosine();
        let n = k.norms(256).unwrap();
        assert!((n.l2 - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((n.neg_sup - 1.0).abs() < 1e-3);
        // ||cos_-||_{L1} = 1/pi.
        assert!((n.neg_l1 - 1.0 / std::f64::consts::PI).abs() < 1e-4);
    }

    #[test]
    fn log_kernel_l2_partial_sum() {
        let k = make_kernel(&KernelSpec::log(1, 64)).unwrap();
        let l2_sq = k.norms(129 + 127).unwrap().l2.powi(2);
        // Oracle: direct partial sum of 2/k^2.
        let oracle: f64 = (1..=64).map(|kk| 2.0 / (kk as f64 * kk as f64)).sum();
        assert!((l2_sq - oracle).abs() < 1e-12);
        assert!(l2_sq < std::f64::consts::PI.powi(2) / 3.0);
    }

    #[test]
    fn realspace_table_interpolates_within_documented_error() {
        let k = cosine().with_table(4096).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x: f64 = rng.gen_range(0.0..1.0);
            let h: f64 = 1.0 / 4096.0;
            let bound = h * h * (TWO_PI).powi(2); // h^2 (2 pi Lambda)^2 / 8 with margin
            assert!((k.potential_fast(x) - k.potential(&[x])).abs() < bound);
            assert!((k.force_fast(x) - k.force_1d(x)).abs() < bound * TWO_PI);
        }
    }
}
