//! The eight experiment drivers. Each consumes a validated config, derives
//! its stage seeds, runs the module machinery, emits CSV tables through the
//! `OutputWriter` and returns metrics plus a list of failed numerical checks
//! (empty list = all checks passed).

use super::config::{observable_from_terms, ExperimentConfig};
use super::output::{Cell, OutputWriter};
use super::seeds::stage_seed;
use crate::cluster;
use crate::correlations;
use crate::dynamics::{
    self, make_fluctuation_ensemble, map_replicas, u_stat_order1, u_stat_order2, EnsembleParams,
    ParticleState,
};
use crate::error::{Error, Result};
use crate::gibbs::{self, McmcParams};
use crate::kernels::{make_kernel, FourierKernel, KernelFamily};
use crate::meanfield;
use crate::numerics::{linear_fit, mean_stderr, wrap_unit};
use crate::observables::{Observable, PhaseTerm, XMode};
use crate::vlasov;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;

pub struct ExperimentReport {
    pub metrics: Map<String, Value>,
    pub failures: Vec<String>,
    pub stage_seeds: BTreeMap<String, u64>,
}

impl ExperimentReport {
    fn new() -> Self {
        ExperimentReport {
            metrics: Map::new(),
            failures: Vec::new(),
            stage_seeds: BTreeMap::new(),
        }
    }

    fn check(&mut self, ok: bool, message: impl Into<String>) {
        if !ok {
            self.failures.push(message.into());
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<ExperimentReport> {
    use super::config::ExperimentKind::*;
    match cfg.experiment {
        Partition => run_partition(cfg, out),
        Limit => run_limit(cfg, out),
        ClusterVerify => run_cluster_verify(cfg, out),
        DynamicsCheck => run_dynamics_check(cfg, out),
        Theorem1 => run_theorem1(cfg, out),
        CorrelationsDecay => run_correlations_decay(cfg, out),
        VlasovCheck => run_vlasov_check(cfg, out),
        Meanfield => run_meanfield(cfg, out),
    }
}

// ---------------------------------------------------------------------------
// partition
// ---------------------------------------------------------------------------

fn run_partition(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new();
    let kernel = make_kernel(&cfg.kernel.to_spec()?)?;
    let p = &cfg.partition;
    let norms = kernel.norms(p.norm_grid)?;
    let mcmc = McmcParams {
        burnin: p.mcmc_burnin,
        samples: p.mcmc_samples,
        thinning: p.mcmc_thinning,
        initial_step: 0.25,
    };

    let mut rows = Vec::new();
    let mut minimal_c_l2: f64 = 0.0;
    for &beta in &p.betas {
        let limit = gibbs::limit_z(&kernel, beta).ok();
        let mut errors_vs_limit: Vec<(usize, f64, f64)> = Vec::new();
        for &n in &p.n_values {
            let seed = stage_seed(cfg.master_seed, "partition-thermo", (n as u64) << 8 | 1);
            report
                .stage_seeds
                .insert(format!("thermo-n{n}-beta{beta}"), seed);
            let est = gibbs::estimate_log_z_thermo(&kernel, n, beta, p.n_lambda, &mcmc, seed)?;
            let exact = if kernel.dimension() == 1 && (n == 2 || n == 3) {
                Some(gibbs::exact_z_small_n(&kernel, n, beta, p.exact_grid)?)
            } else {
                None
            };
            let bounds = gibbs::theoretical_bounds(&kernel, n, beta, p.bound_constant, p.norm_grid)?;
            let naive = gibbs::naive_bound(&kernel, n, beta, p.norm_grid)?;
            let z = est.z();
            report.check(
                z >= 1.0 - 3.0 * est.stderr * z,
                format!("Jensen bound violated at N={n}, beta={beta}: Z={z}"),
            );
            if let Some(e) = &exact {
                report.check(
                    e.z() >= 1.0 - 1e-12,
                    format!("Jensen bound violated by quadrature at N={n}, beta={beta}"),
                );
                report.check(
                    (est.log_z - e.log_z).abs() <= 3.0 * est.stderr.max(1e-6),
                    format!(
                        "thermo vs exact mismatch at N={n}, beta={beta}: {} vs {}",
                        est.log_z, e.log_z
                    ),
                );
            }
            if beta > 0.0 && norms.l2 > 0.0 {
                minimal_c_l2 = minimal_c_l2.max(est.log_z / (beta * beta * norms.l2 * norms.l2));
            }
            if let Some(l) = &limit {
                errors_vs_limit.push((n, (z - l.value).abs(), est.stderr * z));
            }
            rows.push(vec![
                Cell::from(n),
                Cell::from(beta),
                Cell::from("thermo_integration"),
                Cell::from(est.log_z),
                Cell::from(est.stderr),
                Cell::from(z),
                Cell::from(limit.as_ref().map(|l| l.value).unwrap_or(f64::NAN)),
                Cell::from(naive),
                Cell::from(bounds.bound_l2),
                Cell::from(bounds.bound_weak_l2),
            ]);
            if let Some(e) = exact {
                rows.push(vec![
                    Cell::from(n),
                    Cell::from(beta),
                    Cell::from("exact_quadrature"),
                    Cell::from(e.log_z),
                    Cell::from(0.0),
                    Cell::from(e.z()),
                    Cell::from(limit.as_ref().map(|l| l.value).unwrap_or(f64::NAN)),
                    Cell::from(naive),
                    Cell::from(bounds.bound_l2),
                    Cell::from(bounds.bound_weak_l2),
                ]);
            }
        }
        // Monotone approach to the limit value across increasing N.
        if let Some(l) = &limit {
            for w in errors_vs_limit.windows(2) {
                let (n0, e0, s0) = w[0];
                let (n1, e1, s1) = w[1];
                report.check(
                    e1 <= e0 + 3.0 * (s0 * s0 + s1 * s1).sqrt(),
                    format!(
                        "error vs limit {} not improving from N={n0} ({e0:.4e}) to N={n1} ({e1:.4e})",
                        l.value
                    ),
                );
            }
            report
                .metrics
                .insert(format!("limit_z_beta{beta}"), json!(l.value));
        }
    }
    out.write_csv(
        "partition",
        &[
            "n",
            "beta",
            "method",
            "log_z",
            "stderr",
            "z",
            "limit_value",
            "naive_bound",
            "bound_l2",
            "bound_weak_l2",
        ],
        &rows,
    )?;
    out.add_plot("partition function vs N", "partition", "1:6", "Z");
    report
        .metrics
        .insert("minimal_c_l2".into(), json!(minimal_c_l2));

    // Riesz trend panel over cutoffs, when requested and applicable.
    if let KernelFamily::Riesz { s } = kernel.spec().family {
        if !p.riesz_cutoffs.is_empty() {
            let mut panel = Vec::new();
            for &lam in &p.riesz_cutoffs {
                let spec = crate::kernels::KernelSpec::riesz(kernel.dimension(), s, lam);
                let k = make_kernel(&spec)?;
                for &n in &p.n_values {
                    let seed =
                        stage_seed(cfg.master_seed, "partition-riesz", (lam as u64) << 16 | n as u64);
                    let est =
                        gibbs::estimate_log_z_thermo(&k, n, p.betas[0], p.n_lambda, &mcmc, seed)?;
                    let bounds =
                        gibbs::theoretical_bounds(&k, n, p.betas[0], p.bound_constant, p.norm_grid)?;
                    let (riesz_bound, regime) = bounds
                        .bound_riesz
                        .map(|(b, r)| (b, format!("{r:?}")))
                        .unwrap_or((f64::NAN, "none".into()));
                    panel.push(vec![
                        Cell::from(lam),
                        Cell::from(n),
                        Cell::from(est.z()),
                        Cell::from(est.stderr),
                        Cell::from(riesz_bound),
                        Cell::from(regime),
                    ]);
                }
            }
            out.write_csv(
                "riesz-panel",
                &["cutoff", "n", "z", "stderr", "riesz_bound", "regime"],
                &panel,
            )?;
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// limit
// ---------------------------------------------------------------------------

fn run_limit(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new();
    let l = &cfg.limit;
    let mut rows = Vec::new();
    for &beta in &l.betas {
        // Configured family across cutoffs.
        let mut prev_exponent: Option<f64> = None;
        for &lam in &l.cutoffs {
            let mut kc = cfg.kernel.clone();
            kc.cutoff = lam;
            let kernel = make_kernel(&kc.to_spec()?)?;
            match gibbs::limit_z(&kernel, beta) {
                Ok(lz) => {
                    rows.push(vec![
                        Cell::from(cfg.kernel.family.as_str()),
                        Cell::from(beta),
                        Cell::from(lam),
                        Cell::from(lz.exponent),
                        Cell::from(lz.value),
                        Cell::from(lz.tail_estimate.unwrap_or(f64::NAN)),
                    ]);
                    prev_exponent = Some(lz.exponent);
                }
                Err(e) => {
                    rows.push(vec![
                        Cell::from(cfg.kernel.family.as_str()),
                        Cell::from(beta),
                        Cell::from(lam),
                        Cell::from(f64::NAN),
                        Cell::from(f64::NAN),
                        Cell::from(format!("domain error: {e}")),
                    ]);
                }
            }
        }
        let _ = prev_exponent;

        // Divergence probe: W^(k) = |k|^{s-1} with s = divergence_s (d = 1).
        let mut exponents = Vec::new();
        for &lam in &l.cutoffs {
            let spec = crate::kernels::KernelSpec::riesz(1, l.divergence_s, lam);
            let kernel = make_kernel(&spec)?;
            let lz = gibbs::limit_z(&kernel, beta)?;
            exponents.push(lz.exponent);
            rows.push(vec![
                Cell::from(format!("riesz-divergence(s={})", l.divergence_s)),
                Cell::from(beta),
                Cell::from(lam),
                Cell::from(lz.exponent),
                Cell::from(lz.value),
                Cell::from(lz.tail_estimate.unwrap_or(f64::NAN)),
            ]);
        }
        for w in exponents.windows(2) {
            report.check(
                w[1] > w[0],
                format!("divergence probe exponent not increasing at beta={beta}"),
            );
        }
        report.metrics.insert(
            format!("divergence_exponents_beta{beta}"),
            json!(exponents),
        );
    }
    out.write_csv(
        "limit",
        &["family", "beta", "cutoff", "exponent", "value", "tail_estimate"],
        &rows,
    )?;
    out.add_plot("limit exponent vs cutoff", "limit", "3:4", "exponent");
    Ok(report)
}

// ---------------------------------------------------------------------------
// cluster-verify
// ---------------------------------------------------------------------------

fn run_cluster_verify(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new();
    let kernel = make_kernel(&cfg.kernel.to_spec()?)?;
    if kernel.dimension() != 1 {
        return Err(Error::Unsupported("cluster-verify needs a d=1 kernel".into()));
    }
    let c = &cfg.cluster;
    let mut rows: Vec<Vec<Cell>> = Vec::new();
    let add = |rows: &mut Vec<Vec<Cell>>,
                   report: &mut ExperimentReport,
                   check: &str,
                   param: String,
                   value: f64,
                   threshold: f64,
                   pass: bool| {
        rows.push(vec![
            Cell::from(check),
            Cell::from(param),
            Cell::from(value),
            Cell::from(threshold),
            Cell::from(pass),
        ]);
        report.check(pass, format!("{check} failed ({value:.3e} vs {threshold:.3e})"));
    };

    // Penrose identity on random weight matrices.
    let seed = stage_seed(cfg.master_seed, "cluster-penrose", 0);
    report.stage_seeds.insert("penrose".into(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 2..=5usize {
        let mut worst: f64 = 0.0;
        for _ in 0..c.random_matrices {
            let mut h = vec![vec![0.0; k]; k];
            for i in 0..k {
                for j in (i + 1)..k {
                    let v = rng.gen_range(-1.0..1.0);
                    h[i][j] = v;
                    h[j][i] = v;
                }
            }
            let w = cluster::EdgeWeights::new(k, h)?;
            let conn = cluster::connected_graph_sum(&w)?;
            let tree = cluster::penrose_tree_sum(&w)?;
            worst = worst.max((conn - tree).abs());
        }
        add(
            &mut rows,
            &mut report,
            "penrose_identity",
            format!("k={k}"),
            worst,
            1e-12,
            worst < 1e-12,
        );
    }

    // Cayley counts.
    for k in 2..=7usize {
        let count = cluster::cayley_count(k)? as f64;
        let expected = (k as f64).powi(k as i32 - 2);
        add(
            &mut rows,
            &mut report,
            "cayley_count",
            format!("k={k}"),
            count,
            expected,
            count == expected,
        );
    }

    // Connected-graph counts.
    for (k, expected) in [(2usize, 1.0), (3, 4.0), (4, 38.0), (5, 728.0)] {
        let got = cluster::enumerate_connected_graphs(k)?.len() as f64;
        add(
            &mut rows,
            &mut report,
            "connected_count",
            format!("k={k}"),
            got,
            expected,
            got == expected,
        );
    }

    // Mayer reconstruction and truncated series at the configured (N, beta).
    let (lhs, rhs) = cluster::reconstruction_check(&kernel, 2, c.beta, c.grid.max(2048))?;
    add(
        &mut rows,
        &mut report,
        "reconstruction_n2",
        format!("beta={}", c.beta),
        (lhs - rhs).abs(),
        1e-8,
        (lhs - rhs).abs() < 1e-8,
    );
    let (lhs3, rhs3) = cluster::reconstruction_check(&kernel, 3, c.beta, c.phi_grid)?;
    add(
        &mut rows,
        &mut report,
        "reconstruction_n3",
        format!("beta={}", c.beta),
        (lhs3 - rhs3).abs(),
        1e-8,
        (lhs3 - rhs3).abs() < 1e-8,
    );

    let mayer = cluster::mayer_functions(&kernel, c.n, c.beta, c.grid)?;
    add(
        &mut rows,
        &mut report,
        "h_centering",
        format!("grid={}", c.grid),
        mayer.h_mean().abs(),
        1e-10,
        mayer.h_mean().abs() < 1e-10,
    );
    let trunc = cluster::log_zh_truncated(&mayer, c.kmax, c.n, c.phi_grid)?;
    let zbar = gibbs::exact_z_small_n(&kernel, c.n, c.beta, c.phi_grid)?.z();
    let reconstructed = (1.0 + mayer.c0).powf(cluster::binomial(c.n, 2)) * trunc.log_zh.exp();
    let rel = ((reconstructed - zbar) / zbar).abs();
    add(
        &mut rows,
        &mut report,
        "truncated_series_vs_exact",
        format!("n={} kmax={}", c.n, c.kmax),
        rel,
        1e-6,
        rel < 1e-6,
    );
    report
        .metrics
        .insert("truncated_rel_error".into(), json!(rel));

    // Subset-sum bound: minimal C per order.
    for k in 2..=c.kmax.min(4) {
        let b = cluster::varphi_bound_check(&mayer, &kernel, k, c.bound_constant, c.phi_grid)?;
        add(
            &mut rows,
            &mut report,
            "varphi_bound",
            format!("k={k} C={}", c.bound_constant),
            b.lhs,
            b.rhs,
            b.lhs <= b.rhs,
        );
        report
            .metrics
            .insert(format!("varphi_minimal_c_k{k}"), json!(b.minimal_c));
    }

    out.write_csv(
        "cluster-verify",
        &["check", "parameter", "value", "threshold", "pass"],
        &rows,
    )?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// dynamics-check
// ---------------------------------------------------------------------------

fn run_dynamics_check(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new();
    let kernel = make_kernel(&cfg.kernel.to_spec()?)?;
    let d = &cfg.dynamics;
    let mut rows = Vec::new();

    // Reversibility + per-step momentum drift.
    let seed = stage_seed(cfg.master_seed, "dynamics-init", 0);
    report.stage_seeds.insert("dynamics-init".into(), seed);
    let positions: Vec<f64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..d.n).map(|_| rng.gen::<f64>()).collect()
    };
    let velocities = gibbs::sample_velocities(d.n, 1, 1.0, seed ^ 0xabcd)?;
    let mut state = ParticleState::new(d.n, 1, positions.clone(), velocities.clone())?;
    let steps = (d.t_max / d.dt).round() as usize;
    let mut max_momentum_drift: f64 = 0.0;
    let p0 = state.total_momentum()[0];
    for _ in 0..steps {
        dynamics::verlet_step(&mut state, &kernel, d.dt);
        max_momentum_drift = max_momentum_drift.max((state.total_momentum()[0] - p0).abs());
    }
    state.velocities.iter_mut().for_each(|v| *v = -*v);
    for _ in 0..steps {
        dynamics::verlet_step(&mut state, &kernel, d.dt);
    }
    let mut reversal_error: f64 = 0.0;
    for j in 0..d.n {
        let dx = (state.positions[j] - positions[j] + 0.5).rem_euclid(1.0) - 0.5;
        reversal_error = reversal_error.max(dx.abs());
        reversal_error = reversal_error.max((-state.velocities[j] - velocities[j]).abs());
    }
    rows.push(vec![
        Cell::from("reversibility"),
        Cell::from(reversal_error),
        Cell::from(1e-8),
        Cell::from(reversal_error < 1e-8),
    ]);
    report.check(reversal_error < 1e-8, "reversibility above 1e-8");
    let per_step_momentum = max_momentum_drift / steps.max(1) as f64;
    rows.push(vec![
        Cell::from("momentum_per_step"),
        Cell::from(per_step_momentum),
        Cell::from(1e-12),
        Cell::from(per_step_momentum < 1e-12),
    ]);
    report.check(per_step_momentum < 1e-12, "momentum drift above 1e-12 per step");

    // Energy-drift order.
    let seed2 = stage_seed(cfg.master_seed, "dynamics-drift", 0);
    let dpositions: Vec<f64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed2);
        (0..d.drift_n).map(|_| rng.gen::<f64>()).collect()
    };
    let dvel = gibbs::sample_velocities(d.drift_n, 1, 1.0, seed2 ^ 0x77)?;
    let drift_at = |dt: f64| -> f64 {
        let mut s = ParticleState::new(d.drift_n, 1, dpositions.clone(), dvel.clone()).unwrap();
        let h0 = dynamics::total_energy(&s, &kernel);
        let steps = (d.drift_t / dt).round() as usize;
        let mut worst: f64 = 0.0;
        for i in 0..steps {
            dynamics::verlet_step(&mut s, &kernel, dt);
            if i % 40 == 0 || i + 1 == steps {
                worst = worst.max((dynamics::total_energy(&s, &kernel) - h0).abs());
            }
        }
        worst
    };
    let d1 = drift_at(d.dt);
    let d2 = drift_at(d.dt / 2.0);
    let ratio = d1 / d2;
    rows.push(vec![
        Cell::from("energy_drift_ratio"),
        Cell::from(ratio),
        Cell::from(4.0),
        Cell::from((3.0..=5.0).contains(&ratio)),
    ]);
    report.check(
        (3.0..=5.0).contains(&ratio),
        format!("energy drift ratio {ratio} outside [3,5]"),
    );
    let rel_drift = d1 / (dynamics::total_energy(
        &ParticleState::new(d.drift_n, 1, dpositions.clone(), dvel.clone())?,
        &kernel,
    )
    .abs()
        + 1.0);
    rows.push(vec![
        Cell::from("relative_energy_drift"),
        Cell::from(rel_drift),
        Cell::from(1e-5),
        Cell::from(rel_drift < 1e-5),
    ]);
    report.check(rel_drift < 1e-5, "relative energy drift above 1e-5");

    out.write_csv(
        "dynamics-check",
        &["check", "value", "threshold", "pass"],
        &rows,
    )?;
    report.metrics.insert("reversal_error".into(), json!(reversal_error));
    report.metrics.insert("energy_drift_ratio".into(), json!(ratio));

    // Optional snapshot dump: one row per (replica, time, particle).
    if d.dump_replicas > 0 {
        let f0 = observable_from_terms(d.beta, &d.f0)?;
        let dump_seed = stage_seed(cfg.master_seed, "dynamics-dump", 0);
        report.stage_seeds.insert("dynamics-dump".into(), dump_seed);
        let ensemble = make_fluctuation_ensemble(
            &kernel,
            d.n,
            d.beta,
            &f0,
            d.dump_replicas,
            &EnsembleParams::default(),
            dump_seed,
        )?;
        let snaps = dynamics::simulate(&ensemble, &kernel, d.dt, &d.dump_times)?;
        let mut dump_rows = Vec::new();
        for snap in &snaps {
            for (r, state) in snap.states.iter().enumerate() {
                for j in 0..state.n {
                    dump_rows.push(vec![
                        Cell::from(r),
                        Cell::from(snap.time),
                        Cell::from(j),
                        Cell::from(state.positions[j]),
                        Cell::from(state.velocities[j]),
                        Cell::from(snap.weights[r]),
                    ]);
                }
            }
        }
        out.write_csv(
            "snapshots",
            &["replica", "t", "particle", "x", "v", "weight"],
            &dump_rows,
        )?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// theorem1
// ---------------------------------------------------------------------------

/// The fixed dual test panel probing position, mixed and velocity content.
pub fn theorem1_panel(beta: f64) -> Vec<(String, Observable)> {
    vec![
        ("cos_x".into(), Observable::cos_x(beta, 1)),
        ("sin_x".into(), Observable::sin_x(beta, 1)),
        ("cos_x_he1".into(), Observable::cos_hermite(beta, 1, 1)),
        ("he2".into(), Observable::hermite_v(beta, 2)),
    ]
}

/// Static screening of the spatial part of the initial profile: the Gibbs
/// equilibrium carries pair correlations that replace each spatial mode
/// amplitude a_k by a_k/(1 + beta W^(k)) in the t=0 one-particle marginal;
/// evolving this screened profile gives the second prediction column.
pub fn screened_profile(profile: &Observable, kernel: &FourierKernel) -> Observable {
    let beta = profile.beta;
    let mut terms = profile.terms.clone();
    for t in &profile.terms {
        if t.hermite != 0 {
            continue;
        }
        let k = match t.xmode {
            XMode::Cos(k) | XMode::Sin(k) => k,
            XMode::One => continue,
        };
        let w = kernel.coefficient_1d(k);
        if w != 0.0 {
            terms.push(PhaseTerm {
                coeff: -t.coeff * beta * w / (1.0 + beta * w),
                xmode: t.xmode,
                hermite: t.hermite,
            });
        }
    }
    Observable { beta, terms }
}

fn run_theorem1(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new();
    let kernel = make_kernel(&cfg.kernel.to_spec()?)?;
    let t1 = &cfg.theorem1;
    let beta = t1.beta;
    let f0 = observable_from_terms(beta, &t1.f0)?;
    let panel = theorem1_panel(beta);
    let t_max = t1.times.iter().cloned().fold(0.0, f64::max);

    // Vlasov reference with both solvers; cross-method disagreement beyond
    // 1e-3 sup-norm is a hard failure of the run.
    let hermite = vlasov::solve_hermite(
        &kernel,
        beta,
        &f0,
        t_max,
        t1.vlasov_dt,
        t1.k_modes,
        t1.n_hermite,
        None,
        &t1.times,
    )?;
    let volterra = vlasov::solve_volterra(&kernel, beta, &f0, t_max, t1.vlasov_dt, t1.k_modes)?;
    let mut cross_sup: f64 = 0.0;
    for k in 1..=t1.k_modes {
        let hs = hermite.rho_series(k);
        for (h, v) in hs.iter().zip(volterra.rho[(k - 1) as usize].iter()) {
            cross_sup = cross_sup.max((h - v).norm());
        }
    }
    report.check(
        cross_sup < 1e-3,
        format!("vlasov cross-method disagreement {cross_sup:.3e} >= 1e-3"),
    );
    report.metrics.insert("vlasov_cross_sup".into(), json!(cross_sup));

    let screened = screened_profile(&f0, &kernel);
    let hermite_screened = vlasov::solve_hermite(
        &kernel,
        beta,
        &screened,
        t_max,
        t1.vlasov_dt,
        t1.k_modes,
        t1.n_hermite,
        None,
        &t1.times,
    )?;

    // Monte Carlo marginals per N.
    let params = EnsembleParams {
        burnin_sweeps: t1.burnin_sweeps,
        thin_sweeps: t1.thin_sweeps,
        initial_step: 0.25,
    };
    let pair_psi = Observable::cos_x(beta, 1);
    let pair_chi = Observable::hermite_v(beta, 2);
    let mass_obs = Observable::new(
        beta,
        vec![PhaseTerm {
            coeff: 1.0,
            xmode: XMode::One,
            hermite: 0,
        }],
    )?;

    let mut marginal_rows = Vec::new();
    // per (time, phi) -> per N (mean, stderr)
    let mut table: BTreeMap<(usize, usize), Vec<(usize, f64, f64)>> = BTreeMap::new();
    for &n in &t1.n_values {
        let seed = stage_seed(cfg.master_seed, "theorem1-ensemble", n as u64);
        report.stage_seeds.insert(format!("ensemble-n{n}"), seed);
        let ensemble =
            make_fluctuation_ensemble(&kernel, n, beta, &f0, t1.r_replicas, &params, seed)?;
        let n_obs = panel.len() + 2;
        let values = map_replicas(&ensemble, &kernel, t1.dt, &t1.times, |state, w| {
            let mut row = Vec::with_capacity(n_obs);
            for (_, phi) in &panel {
                row.push(w * u_stat_order1(state, phi));
            }
            row.push(w * u_stat_order2(state, &pair_psi, &pair_chi));
            row.push(w * u_stat_order1(state, &mass_obs));
            row
        })?;
        for (ti, &t) in t1.times.iter().enumerate() {
            for oi in 0..n_obs {
                let vals: Vec<f64> = values.iter().map(|per_rep| per_rep[ti][oi]).collect();
                let (mean, stderr) = mean_stderr(&vals);
                if oi < panel.len() {
                    let vl = hermite.snapshots[ti].pair_observable(&panel[oi].1);
                    let vscr = hermite_screened.snapshots[ti].pair_observable(&panel[oi].1);
                    marginal_rows.push(vec![
                        Cell::from(n),
                        Cell::from(t),
                        Cell::from(panel[oi].0.as_str()),
                        Cell::from(1i64),
                        Cell::from(mean),
                        Cell::from(stderr),
                        Cell::from(vl),
                        Cell::from(vscr),
                        Cell::from((mean - vl).abs()),
                        Cell::from((mean - vscr).abs()),
                    ]);
                    table.entry((ti, oi)).or_default().push((n, mean, stderr));
                } else if oi == panel.len() {
                    // m = 2 pair check: limiting prediction is
                    // <psi, f><chi, M> + <psi, M><chi, f> = 0 for centered tests.
                    marginal_rows.push(vec![
                        Cell::from(n),
                        Cell::from(t),
                        Cell::from("pair:cos_x*he2"),
                        Cell::from(2i64),
                        Cell::from(mean),
                        Cell::from(stderr),
                        Cell::from(0.0),
                        Cell::from(0.0),
                        Cell::from(mean.abs()),
                        Cell::from(mean.abs()),
                    ]);
                } else {
                    // Mass conservation of the fluctuation: <1, F_{N,1}> = 0.
                    report.check(
                        mean.abs() <= 4.0 * stderr.max(1e-12),
                        format!("mass pairing nonzero at N={n}, t={t}: {mean:.3e}"),
                    );
                    marginal_rows.push(vec![
                        Cell::from(n),
                        Cell::from(t),
                        Cell::from("one"),
                        Cell::from(1i64),
                        Cell::from(mean),
                        Cell::from(stderr),
                        Cell::from(0.0),
                        Cell::from(0.0),
                        Cell::from(mean.abs()),
                        Cell::from(mean.abs()),
                    ]);
                }
            }
        }
    }
    out.write_csv(
        "marginals",
        &[
            "n",
            "t",
            "phi",
            "order",
            "mc",
            "stderr",
            "vlasov",
            "vlasov_screened",
            "delta",
            "delta_screened",
        ],
        &marginal_rows,
    )?;

    // Mode time series from both solvers.
    let mut mode_rows = Vec::new();
    let stride = (hermite.times.len() / 400).max(1);
    for (i, &t) in hermite.times.iter().enumerate().step_by(stride) {
        for k in 1..=t1.k_modes {
            let h = hermite.rho_series(k)[i];
            let v = volterra.rho[(k - 1) as usize][i];
            mode_rows.push(vec![
                Cell::from(t),
                Cell::from(k),
                Cell::from(h.re),
                Cell::from(h.im),
                Cell::from(v.re),
                Cell::from(v.im),
            ]);
        }
    }
    out.write_csv(
        "vlasov_modes",
        &["t", "k", "hermite_re", "hermite_im", "volterra_re", "volterra_im"],
        &mode_rows,
    )?;

    // Discrepancy trend: smallest vs largest N per (t, phi).
    let n_small = *t1.n_values.iter().min().unwrap();
    let n_big = *t1.n_values.iter().max().unwrap();
    let mut disc_rows = Vec::new();
    let mut phi_pass = vec![true; panel.len()];
    for ((ti, oi), entries) in &table {
        let t = t1.times[*ti];
        let vl = hermite.snapshots[*ti].pair_observable(&panel[*oi].1);
        let small = entries.iter().find(|(n, _, _)| *n == n_small).unwrap();
        let big = entries.iter().find(|(n, _, _)| *n == n_big).unwrap();
        let delta_small = (small.1 - vl).abs();
        let delta_big = (big.1 - vl).abs();
        let sigma = (small.2 * small.2 + big.2 * big.2).sqrt();
        let improved = delta_small - delta_big > 2.0 * sigma;
        let at_floor = delta_big <= 2.0 * big.2;
        let pass = improved || at_floor;
        if !pass {
            phi_pass[*oi] = false;
        }
        disc_rows.push(vec![
            Cell::from(t),
            Cell::from(panel[*oi].0.as_str()),
            Cell::from(n_small),
            Cell::from(delta_small),
            Cell::from(n_big),
            Cell::from(delta_big),
            Cell::from(sigma),
            Cell::from(if improved {
                "improved"
            } else if at_floor {
                "noise_floor"
            } else {
                "failed"
            }),
        ]);
    }
    out.write_csv(
        "discrepancy",
        &[
            "t",
            "phi",
            "n_small",
            "delta_small",
            "n_big",
            "delta_big",
            "sigma_comb",
            "mode",
        ],
        &disc_rows,
    )?;
    out.add_plot("marginal discrepancy", "discrepancy", "1:4", "delta");
    let passed = phi_pass.iter().filter(|p| **p).count();
    report.metrics.insert("panel_passed".into(), json!(passed));
    report.check(
        passed >= 3,
        format!("theorem-1 trend holds for only {passed} of {} panel functions", panel.len()),
    );
    Ok(report)
}

// ---------------------------------------------------------------------------
// correlations-decay
// ---------------------------------------------------------------------------

/// The fixed (psi, chi) panel. Total Fourier phase with the mode-1 initial
/// data must vanish for a nonzero pairing, hence the mode choices.
pub fn correlation_pairs(beta: f64) -> Vec<(String, Observable, Observable)> {
    vec![
        (
            "cosx*he2".into(),
            Observable::cos_x(beta, 1),
            Observable::hermite_v(beta, 2),
        ),
        (
            "cos2x*cosx".into(),
            Observable::cos_x(beta, 2),
            Observable::cos_x(beta, 1),
        ),
    ]
}

fn run_correlations_decay(
    cfg: &ExperimentConfig,
    out: &mut OutputWriter,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new();
    let kernel = make_kernel(&cfg.kernel.to_spec()?)?;
    let c = &cfg.correlations;
    let beta = c.beta;
    let f0 = observable_from_terms(beta, &c.f0)?;
    let pairs = correlation_pairs(beta);
    let remainder_test = Observable::cos_hermite(beta, 1, 1);
    let remainder_q = remainder_test.force_smoothed_correction(&kernel);
    let params = EnsembleParams {
        burnin_sweeps: c.burnin_sweeps,
        thin_sweeps: c.thin_sweeps,
        initial_step: 0.25,
    };

    let mut rows = Vec::new();
    let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); pairs.len()];
    let mut remainder_series: Vec<(usize, f64, f64)> = Vec::new();
    for &n in &c.n_values {
        let seed = stage_seed(cfg.master_seed, "correlations-ensemble", n as u64);
        report.stage_seeds.insert(format!("ensemble-n{n}"), seed);
        let ensemble = make_fluctuation_ensemble(&kernel, n, beta, &f0, c.r_replicas, &params, seed)?;
        let values = map_replicas(&ensemble, &kernel, c.dt, &[c.t], |state, w| {
            let mut row = Vec::with_capacity(pairs.len() + 1);
            for (_, psi, chi) in &pairs {
                row.push(correlations::pair_pairing_replica_value(state, w, psi, chi));
            }
            row.push(correlations::vlasov_remainder_replica_value(
                state,
                w,
                &remainder_test,
                &remainder_q,
                &kernel,
            ));
            row
        })?;
        for (pi, (name, _, _)) in pairs.iter().enumerate() {
            let vals: Vec<f64> = values.iter().map(|r| r[0][pi]).collect();
            let est = correlations::pair_pairing_from_values(
                &vals,
                c.bootstrap,
                stage_seed(cfg.master_seed, "correlations-bootstrap", (n as u64) << 8 | pi as u64),
            );
            rows.push(vec![
                Cell::from(n),
                Cell::from(name.as_str()),
                Cell::from(est.value),
                Cell::from(est.stderr),
                Cell::from(est.bootstrap_stderr),
            ]);
            series[pi].push((n as f64, est.value));
        }
        let rem: Vec<f64> = values.iter().map(|r| r[0][pairs.len()]).collect();
        let (rmean, rstderr) = mean_stderr(&rem);
        rows.push(vec![
            Cell::from(n),
            Cell::from("vlasov_remainder"),
            Cell::from(rmean),
            Cell::from(rstderr),
            Cell::from(rstderr),
        ]);
        remainder_series.push((n, rmean, rstderr));
    }
    out.write_csv(
        "decay",
        &["n", "pair", "value", "stderr", "bootstrap_stderr"],
        &rows,
    )?;
    out.add_plot("pair pairing decay", "decay", "1:3", "pairing");

    // Log-log slope fits. The paper-level norm bound targets N^{-1/2}; the
    // observed pairing decay rate is reported alongside (see README for the
    // pairing-vs-norm caveat).
    let mut slope_rows = Vec::new();
    for (pi, (name, _, _)) in pairs.iter().enumerate() {
        let xs: Vec<f64> = series[pi].iter().map(|(n, _)| n.ln()).collect();
        let ys: Vec<f64> = series[pi]
            .iter()
            .map(|(_, v)| v.abs().max(1e-300).ln())
            .collect();
        let (slope, _, r2) = linear_fit(&xs, &ys);
        let in_window = (-0.75..=-0.25).contains(&slope);
        slope_rows.push(vec![
            Cell::from(name.as_str()),
            Cell::from(slope),
            Cell::from(r2),
            Cell::from(in_window),
        ]);
        report.metrics.insert(format!("slope_{name}"), json!(slope));
        report.check(
            in_window,
            format!("pairing decay slope for {name} = {slope:.3} outside [-0.75, -0.25]"),
        );
    }
    // Remainder trend: |R| decreasing in N beyond 2 stderr between the ends.
    if remainder_series.len() >= 2 {
        let first = remainder_series.first().unwrap();
        let last = remainder_series.last().unwrap();
        let decreased = first.1.abs() - last.1.abs()
            > 2.0 * (first.2 * first.2 + last.2 * last.2).sqrt();
        let at_floor = last.1.abs() <= 2.0 * last.2;
        report.check(
            decreased || at_floor,
            format!(
                "vlasov remainder not decreasing: |R({})| = {:.3e} vs |R({})| = {:.3e}",
                first.0,
                first.1.abs(),
                last.0,
                last.1.abs()
            ),
        );
        slope_rows.push(vec![
            Cell::from("vlasov_remainder"),
            Cell::from(if decreased { 1.0 } else { 0.0 }),
            Cell::from(if at_floor { 1.0 } else { 0.0 }),
            Cell::from(decreased || at_floor),
        ]);
    }
    out.write_csv("slopes", &["pair", "slope", "r2", "in_window"], &slope_rows)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// vlasov-check
// ---------------------------------------------------------------------------

fn run_vlasov_check(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new();
    let kernel = make_kernel(&cfg.kernel.to_spec()?)?;
    let v = &cfg.vlasov;
    let f0 = observable_from_terms(v.beta, &v.f0)?;
    let filter = if v.filter_strength > 0.0 {
        Some(vlasov::HermiteFilter {
            strength: v.filter_strength,
            order: 8,
        })
    } else {
        None
    };

    let hermite = vlasov::solve_hermite(
        &kernel,
        v.beta,
        &f0,
        v.t_max,
        v.dt,
        v.k_modes,
        v.n_hermite,
        filter,
        &[],
    )?;
    let volterra = vlasov::solve_volterra(&kernel, v.beta, &f0, v.t_max, v.dt, v.k_modes)?;

    let mut sup: f64 = 0.0;
    let mut rows = Vec::new();
    for (i, &t) in hermite.times.iter().enumerate() {
        for k in 1..=v.k_modes {
            let h = hermite.rho_series(k)[i];
            let vv = volterra.rho[(k - 1) as usize][i];
            sup = sup.max((h - vv).norm());
            if i % v.record_stride == 0 {
                rows.push(vec![
                    Cell::from(t),
                    Cell::from(k),
                    Cell::from(h.re),
                    Cell::from(h.im),
                    Cell::from(vv.re),
                    Cell::from(vv.im),
                ]);
            }
        }
    }
    out.write_csv(
        "modes",
        &["t", "k", "hermite_re", "hermite_im", "volterra_re", "volterra_im"],
        &rows,
    )?;
    out.add_plot("density mode 1", "modes", "1:3", "Re rho_1");

    report.check(
        sup < 1e-3,
        format!("hermite/volterra sup distance {sup:.3e} >= 1e-3"),
    );
    let mass_rate = hermite.mass_drift / v.t_max;
    let momentum_rate = hermite.momentum_drift / v.t_max;
    report.check(mass_rate < 1e-10, format!("mass drift {mass_rate:.3e} per unit time"));
    report.check(
        momentum_rate < 1e-10,
        format!("momentum drift {momentum_rate:.3e} per unit time"),
    );

    // Free transport reference (zero kernel) at the same resolution, t <= 2.
    let zero = make_kernel(&crate::kernels::KernelSpec::zero(1))?;
    let free = vlasov::solve_hermite(&zero, v.beta, &f0, 2.0, 1e-3, v.k_modes, 512, None, &[2.0])?;
    let ft_err = vlasov::free_transport_l2_error(&free.snapshots[0], &f0, 64, 160);
    report.check(
        ft_err < 1e-4,
        format!("free-transport L2 error {ft_err:.3e} >= 1e-4"),
    );

    let mut summary = Vec::new();
    summary.push(vec![
        Cell::from("cross_method_sup"),
        Cell::from(sup),
        Cell::from(1e-3),
        Cell::from(sup < 1e-3),
    ]);
    summary.push(vec![
        Cell::from("mass_drift_rate"),
        Cell::from(mass_rate),
        Cell::from(1e-10),
        Cell::from(mass_rate < 1e-10),
    ]);
    summary.push(vec![
        Cell::from("momentum_drift_rate"),
        Cell::from(momentum_rate),
        Cell::from(1e-10),
        Cell::from(momentum_rate < 1e-10),
    ]);
    summary.push(vec![
        Cell::from("free_transport_l2"),
        Cell::from(ft_err),
        Cell::from(1e-4),
        Cell::from(ft_err < 1e-4),
    ]);
    out.write_csv("summary", &["check", "value", "threshold", "pass"], &summary)?;
    report.metrics.insert("cross_method_sup".into(), json!(sup));
    report.metrics.insert("free_transport_l2".into(), json!(ft_err));
    Ok(report)
}

// ---------------------------------------------------------------------------
// meanfield
// ---------------------------------------------------------------------------

fn run_meanfield(cfg: &ExperimentConfig, out: &mut OutputWriter) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new();
    let m = &cfg.meanfield;
    let problem = meanfield::ConfinedProblem::new(m.v, m.w, m.beta, m.l, m.grid_n)?;
    let result = meanfield::solve_fixed_point(&problem, m.tol, m.max_iter)?;
    report.check(result.converged, "fixed-point iteration did not converge");
    report.check(
        result.residual < 1e-10,
        format!("fixed-point residual {:.3e} >= 1e-10", result.residual),
    );

    let mut iter_rows = Vec::new();
    for (i, &d) in result.iterates.iter().enumerate() {
        let ratio = if i == 0 {
            f64::NAN
        } else {
            result.contraction_ratios.get(i - 1).copied().unwrap_or(f64::NAN)
        };
        iter_rows.push(vec![Cell::from(i), Cell::from(d), Cell::from(ratio)]);
    }
    out.write_csv("iterates", &["iteration", "l1_update", "ratio"], &iter_rows)?;
    out.add_plot("Picard updates", "iterates", "1:2", "L1 update");

    report.check(
        result.contraction_ratios.iter().all(|&r| r < 1.0),
        "contraction ratio reached 1",
    );
    let usable: Vec<(f64, f64)> = result
        .iterates
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 1e-13)
        .map(|(i, &d)| (i as f64, d.ln()))
        .collect();
    let (slope, _, r2) = linear_fit(
        &usable.iter().map(|p| p.0).collect::<Vec<_>>(),
        &usable.iter().map(|p| p.1).collect::<Vec<_>>(),
    );
    report.check(r2 > 0.99, format!("geometric-decay fit R^2 = {r2:.4}"));
    report.metrics.insert("contraction_rate".into(), json!(slope.exp()));
    report.metrics.insert("geometric_fit_r2".into(), json!(r2));
    report.metrics.insert("residual".into(), json!(result.residual));

    // Reference-measure norm monotonicity.
    let mut norm_rows = Vec::new();
    for &q in &m.q_norms {
        let norms = meanfield::eta_norm_sweep(&problem, q, &m.beta_grid)?;
        for w in norms.windows(2) {
            report.check(
                w[1] >= w[0] - 1e-12,
                format!("eta L^{q} norm not monotone in beta"),
            );
        }
        for (b, v) in m.beta_grid.iter().zip(norms.iter()) {
            norm_rows.push(vec![Cell::from(*b), Cell::from(q), Cell::from(*v)]);
        }
    }
    out.write_csv("norms", &["beta", "q", "norm"], &norm_rows)?;

    // Centered kernel cancellation.
    let ck = meanfield::centered_kernel(&problem, &result.rho);
    let cancel = ck.cancellation_sup(&problem, &result.rho);
    report.check(
        cancel < 1e-7,
        format!("centered-kernel cancellation {cancel:.3e} >= 1e-7"),
    );
    report.metrics.insert("cancellation_sup".into(), json!(cancel));

    // Self-consistency of the Maxwellian equilibrium.
    let xs: Vec<f64> = (0..20).map(|i| -m.l * 0.9 + 1.8 * m.l * i as f64 / 19.0).collect();
    let vs: Vec<f64> = (0..10).map(|i| -3.0 + 6.0 * i as f64 / 9.0).collect();
    let sc = meanfield::self_consistency_residual(&problem, &result.rho, &xs, &vs);
    report.check(sc < 1e-8, format!("self-consistency residual {sc:.3e} >= 1e-8"));

    let mut density_rows = Vec::new();
    for (i, &x) in problem.grid.iter().enumerate() {
        density_rows.push(vec![Cell::from(x), Cell::from(result.rho[i])]);
    }
    out.write_csv("density", &["x", "rho"], &density_rows)?;
    out.add_plot("fixed-point density", "density", "1:2", "rho*");
    Ok(report)
}

// ---------------------------------------------------------------------------
// helpers shared with the acceptance suite
// ---------------------------------------------------------------------------

/// Free-streaming reference value <phi, F_{N,1}(t)> for the zero kernel:
/// positions uniform, velocities Maxwellian, exact for any N.
pub fn free_streaming_reference(phi: &Observable, f0: &Observable, t: f64) -> f64 {
    // <phi, e^{tL_free}(M f0-marginal structure)>: by the estimator identity
    // this equals int phi(x + v t, v) f0(x, v) M_beta(v) dv dx (same-particle
    // term; cross terms vanish for centered f0 under the product measure).
    let beta = phi.beta;
    let nx = 256;
    let nv = 500;
    let vmax = 8.0 / beta.sqrt();
    let gamma = |v: f64| (beta / (2.0 * std::f64::consts::PI)).sqrt()
        * (-0.5 * beta * v * v).exp();
    let mut acc = 0.0;
    for i in 0..nx {
        let x = i as f64 / nx as f64;
        for j in 0..=nv {
            let v = -vmax + 2.0 * vmax * j as f64 / nv as f64;
            let wv = if j == 0 || j == nv { 0.5 } else { 1.0 };
            acc += wv * phi.eval(wrap_unit(x + v * t), v) * f0.eval(x, v) * gamma(v);
        }
    }
    acc * (2.0 * vmax / nv as f64) / nx as f64
}
