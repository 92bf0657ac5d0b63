//! Python bindings exposing the main fluctlab types and operations:
//! kernels, partition-function tools, cluster combinatorics, dynamics
//! diagnostics, the two Vlasov solvers and the confined mean-field solver.

use fluctlab::cluster;
use fluctlab::dynamics::{self, ParticleState};
use fluctlab::gibbs::{self, McmcParams};
use fluctlab::kernels::{make_kernel, FourierKernel, KernelSpec};
use fluctlab::meanfield;
use fluctlab::observables::{Observable, PhaseTerm, XMode};
use fluctlab::vlasov;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An even centered periodic interaction potential defined by Fourier data.
#[pyclass(name = "Kernel", from_py_object)]
#[derive(Clone)]
struct PyKernel {
    inner: FourierKernel,
}

#[pymethods]
impl PyKernel {
    /// Kernel('cosine' | 'zero' | 'log' | 'riesz' | 'table', dimension=1,
    /// cutoff=1, s=None, coefficients=[([k,...], w), ...]).
    #[new]
    #[pyo3(signature = (family, dimension=1, cutoff=1, s=None, coefficients=None))]
    fn new(
        family: &str,
        dimension: usize,
        cutoff: i64,
        s: Option<f64>,
        coefficients: Option<Vec<(Vec<i64>, f64)>>,
    ) -> PyResult<Self> {
        let spec = match family {
            "cosine" => KernelSpec::cosine(),
            "zero" => KernelSpec::zero(dimension),
            "log" => KernelSpec::log(dimension, cutoff),
            "riesz" => KernelSpec::riesz(
                dimension,
                s.ok_or_else(|| err("riesz kernel needs s"))?,
                cutoff,
            ),
            "table" => {
                let entries = coefficients.ok_or_else(|| err("table kernel needs coefficients"))?;
                let mut list = Vec::with_capacity(entries.len());
                for (xi, w) in entries {
                    if xi.is_empty() || xi.len() > 3 {
                        return Err(err("frequency vectors must have 1..=3 components"));
                    }
                    let mut padded = [0i64; 3];
                    for (a, &v) in xi.iter().enumerate() {
                        padded[a] = v;
                    }
                    list.push((padded, w));
                }
                KernelSpec::table(dimension, &list, cutoff)
            }
            other => return Err(err(format!("unknown family '{other}'"))),
        };
        Ok(PyKernel {
            inner: make_kernel(&spec).map_err(err)?,
        })
    }

    fn potential(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.dimension() {
            return Err(err("point dimension mismatch"));
        }
        Ok(self.inner.potential(&x))
    }

    fn force(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if x.len() != self.inner.dimension() {
            return Err(err("point dimension mismatch"));
        }
        let mut out = vec![0.0; x.len()];
        self.inner.force(&x, &mut out);
        Ok(out)
    }

    fn coefficient(&self, xi: Vec<i64>) -> f64 {
        let mut padded = [0i64; 3];
        for (a, &v) in xi.iter().take(3).enumerate() {
            padded[a] = v;
        }
        self.inner.coefficient(&padded)
    }

    fn norms<'py>(&self, py: Python<'py>, grid_size: usize) -> PyResult<Bound<'py, PyDict>> {
        let n = self.inner.norms(grid_size).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("l1", n.l1)?;
        d.set_item("l2", n.l2)?;
        d.set_item("neg_sup", n.neg_sup)?;
        d.set_item("neg_l1", n.neg_l1)?;
        Ok(d)
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn cutoff(&self) -> i64 {
        self.inner.cutoff()
    }
}

fn observable_from_py(beta: f64, terms: Vec<(f64, String, i64, usize)>) -> PyResult<Observable> {
    let mut parsed = Vec::with_capacity(terms.len());
    for (coeff, mode, k, hermite) in terms {
        let xmode = match mode.as_str() {
            "one" => XMode::One,
            "cos" => XMode::Cos(k),
            "sin" => XMode::Sin(k),
            other => return Err(err(format!("unknown x-mode '{other}'"))),
        };
        parsed.push(PhaseTerm {
            coeff,
            xmode,
            hermite,
        });
    }
    Observable::new(beta, parsed).map_err(err)
}

/// Exact small-N spatial partition function (d = 1, N in {2, 3}).
#[pyfunction]
#[pyo3(signature = (kernel, n, beta, grid_size=4096))]
fn exact_z_small_n(kernel: &PyKernel, n: usize, beta: f64, grid_size: usize) -> PyResult<f64> {
    Ok(gibbs::exact_z_small_n(&kernel.inner, n, beta, grid_size)
        .map_err(err)?
        .z())
}

/// Thermodynamic-integration estimate of log Zbar; returns (log_z, stderr).
#[pyfunction]
#[pyo3(signature = (kernel, n, beta, seed, n_lambda=8, burnin=10000, samples=30000, thinning=2))]
#[allow(clippy::too_many_arguments)]
fn estimate_log_z_thermo(
    kernel: &PyKernel,
    n: usize,
    beta: f64,
    seed: u64,
    n_lambda: usize,
    burnin: usize,
    samples: usize,
    thinning: usize,
) -> PyResult<(f64, f64)> {
    let params = McmcParams {
        burnin,
        samples,
        thinning,
        initial_step: 0.25,
    };
    let est = gibbs::estimate_log_z_thermo(&kernel.inner, n, beta, n_lambda, &params, seed)
        .map_err(err)?;
    Ok((est.log_z, est.stderr))
}

/// N -> infinity limit of the partition function over the retained modes.
#[pyfunction]
fn limit_z<'py>(py: Python<'py>, kernel: &PyKernel, beta: f64) -> PyResult<Bound<'py, PyDict>> {
    let l = gibbs::limit_z(&kernel.inner, beta).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("value", l.value)?;
    d.set_item("exponent", l.exponent)?;
    d.set_item("tail_estimate", l.tail_estimate)?;
    Ok(d)
}

/// Both sides of the weighted moment identity; returns (lhs, rhs).
#[pyfunction]
#[pyo3(signature = (kernel, n, beta, p, grid_size=1024))]
fn moment_identity(
    kernel: &PyKernel,
    n: usize,
    beta: f64,
    p: f64,
    grid_size: usize,
) -> PyResult<(f64, f64)> {
    gibbs::moment_identity_check(&kernel.inner, n, beta, p, grid_size).map_err(err)
}

/// Cancellation-free partition bound exp(beta N ||W_-||_1 e^{beta ||W_-||_inf}).
#[pyfunction]
#[pyo3(signature = (kernel, n, beta, grid_size=1024))]
fn naive_bound(kernel: &PyKernel, n: usize, beta: f64, grid_size: usize) -> PyResult<f64> {
    gibbs::naive_bound(&kernel.inner, n, beta, grid_size).map_err(err)
}

/// Number of connected simple graphs on k labeled vertices (k <= 5).
#[pyfunction]
fn connected_graph_count(k: usize) -> PyResult<usize> {
    Ok(cluster::enumerate_connected_graphs(k).map_err(err)?.len())
}

/// Number of labeled trees on k vertices by explicit enumeration (k <= 7).
#[pyfunction]
fn cayley_count(k: usize) -> PyResult<u64> {
    cluster::cayley_count(k).map_err(err)
}

/// Sum over connected graphs of prod h_e for a symmetric weight matrix.
#[pyfunction]
fn connected_graph_sum(h: Vec<Vec<f64>>) -> PyResult<f64> {
    let k = h.len();
    let w = cluster::EdgeWeights::new(k, h).map_err(err)?;
    cluster::connected_graph_sum(&w).map_err(err)
}

/// Penrose tree-graph sum; equals connected_graph_sum for every input.
#[pyfunction]
fn penrose_tree_sum(h: Vec<Vec<f64>>) -> PyResult<f64> {
    let k = h.len();
    let w = cluster::EdgeWeights::new(k, h).map_err(err)?;
    cluster::penrose_tree_sum(&w).map_err(err)
}

/// Mayer c0 = int (e^{-beta W / N} - 1) by quadrature.
#[pyfunction]
#[pyo3(signature = (kernel, n, beta, grid_size=4096))]
fn mayer_c0(kernel: &PyKernel, n: usize, beta: f64, grid_size: usize) -> PyResult<f64> {
    Ok(cluster::mayer_functions(&kernel.inner, n, beta, grid_size)
        .map_err(err)?
        .c0)
}

/// Verlet integrator diagnostics on a seeded random state: reversibility
/// error, worst per-step momentum drift and max energy deviation.
#[pyfunction]
#[pyo3(signature = (kernel, n, t_max, dt, seed, beta=1.0))]
fn dynamics_diagnostics<'py>(
    py: Python<'py>,
    kernel: &PyKernel,
    n: usize,
    t_max: f64,
    dt: f64,
    seed: u64,
    beta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    if kernel.inner.dimension() != 1 {
        return Err(err("dynamics diagnostics are d=1"));
    }
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let velocities = gibbs::sample_velocities(n, 1, beta, seed ^ 0x51).map_err(err)?;
    let mut state = ParticleState::new(n, 1, positions.clone(), velocities.clone()).map_err(err)?;
    let steps = (t_max / dt).round() as usize;
    let h0 = dynamics::total_energy(&state, &kernel.inner);
    let p0 = state.total_momentum()[0];
    let mut energy_dev: f64 = 0.0;
    let mut momentum_dev: f64 = 0.0;
    for i in 0..steps {
        dynamics::verlet_step(&mut state, &kernel.inner, dt);
        momentum_dev = momentum_dev.max((state.total_momentum()[0] - p0).abs());
        if i % 20 == 0 || i + 1 == steps {
            energy_dev =
                energy_dev.max((dynamics::total_energy(&state, &kernel.inner) - h0).abs());
        }
    }
    state.velocities.iter_mut().for_each(|v| *v = -*v);
    for _ in 0..steps {
        dynamics::verlet_step(&mut state, &kernel.inner, dt);
    }
    let mut reversal: f64 = 0.0;
    for j in 0..n {
        let dx = (state.positions[j] - positions[j] + 0.5).rem_euclid(1.0) - 0.5;
        reversal = reversal.max(dx.abs());
    }
    let d = PyDict::new(py);
    d.set_item("reversal_error", reversal)?;
    d.set_item("energy_deviation", energy_dev)?;
    d.set_item("momentum_per_step", momentum_dev / steps.max(1) as f64)?;
    Ok(d)
}

/// Hermite-ladder density mode rho_k(t); returns (times, re, im).
#[pyfunction]
#[pyo3(signature = (kernel, beta, f0, k, t_max, dt, k_modes=2, n_hermite=256))]
#[allow(clippy::too_many_arguments)]
fn hermite_density_mode(
    kernel: &PyKernel,
    beta: f64,
    f0: Vec<(f64, String, i64, usize)>,
    k: i64,
    t_max: f64,
    dt: f64,
    k_modes: i64,
    n_hermite: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let profile = observable_from_py(beta, f0)?;
    let traj = vlasov::solve_hermite(
        &kernel.inner,
        beta,
        &profile,
        t_max,
        dt,
        k_modes,
        n_hermite,
        None,
        &[],
    )
    .map_err(err)?;
    let series = traj.rho_series(k);
    Ok((
        traj.times.clone(),
        series.iter().map(|c| c.re).collect(),
        series.iter().map(|c| c.im).collect(),
    ))
}

/// Volterra density mode rho_k(t); returns (times, re, im).
#[pyfunction]
#[pyo3(signature = (kernel, beta, f0, k, t_max, dt, k_max=2))]
fn volterra_density_mode(
    kernel: &PyKernel,
    beta: f64,
    f0: Vec<(f64, String, i64, usize)>,
    k: i64,
    t_max: f64,
    dt: f64,
    k_max: i64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let profile = observable_from_py(beta, f0)?;
    let sol =
        vlasov::solve_volterra(&kernel.inner, beta, &profile, t_max, dt, k_max).map_err(err)?;
    let series = sol.rho_series(k);
    Ok((
        sol.times.clone(),
        series.iter().map(|c| c.re).collect(),
        series.iter().map(|c| c.im).collect(),
    ))
}

/// Confined mean-field fixed point (d = 1); returns convergence diagnostics.
#[pyfunction]
#[pyo3(signature = (beta, l=8.0, grid_n=401, v_quadratic=1.0, w_amp=0.1, w_width=1.0, tol=1e-12, max_iter=300))]
#[allow(clippy::too_many_arguments)]
fn meanfield_fixed_point<'py>(
    py: Python<'py>,
    beta: f64,
    l: f64,
    grid_n: usize,
    v_quadratic: f64,
    w_amp: f64,
    w_width: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let problem = meanfield::ConfinedProblem::new(
        meanfield::ConfiningPotential::Quadratic { a: v_quadratic },
        meanfield::PairPotential::Gaussian {
            amp: w_amp,
            width: w_width,
        },
        beta,
        l,
        grid_n,
    )
    .map_err(err)?;
    let r = meanfield::solve_fixed_point(&problem, tol, max_iter).map_err(err)?;
    let ck = meanfield::centered_kernel(&problem, &r.rho);
    let d = PyDict::new(py);
    d.set_item("converged", r.converged)?;
    d.set_item("residual", r.residual)?;
    d.set_item("iterations", r.iterates.len())?;
    d.set_item(
        "terminal_ratio",
        r.contraction_ratios.last().copied().unwrap_or(f64::NAN),
    )?;
    d.set_item("cancellation_sup", ck.cancellation_sup(&problem, &r.rho))?;
    d.set_item("grid", problem.grid.clone())?;
    d.set_item("rho", r.rho)?;
    Ok(d)
}

#[pymodule]
fn fluctlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_function(wrap_pyfunction!(exact_z_small_n, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_log_z_thermo, m)?)?;
    m.add_function(wrap_pyfunction!(limit_z, m)?)?;
    m.add_function(wrap_pyfunction!(moment_identity, m)?)?;
    m.add_function(wrap_pyfunction!(naive_bound, m)?)?;
    m.add_function(wrap_pyfunction!(connected_graph_count, m)?)?;
    m.add_function(wrap_pyfunction!(cayley_count, m)?)?;
    m.add_function(wrap_pyfunction!(connected_graph_sum, m)?)?;
    m.add_function(wrap_pyfunction!(penrose_tree_sum, m)?)?;
    m.add_function(wrap_pyfunction!(mayer_c0, m)?)?;
    m.add_function(wrap_pyfunction!(dynamics_diagnostics, m)?)?;
    m.add_function(wrap_pyfunction!(hermite_density_mode, m)?)?;
    m.add_function(wrap_pyfunction!(volterra_density_mode, m)?)?;
    m.add_function(wrap_pyfunction!(meanfield_fixed_point, m)?)?;
    Ok(())
}
