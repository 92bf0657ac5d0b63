//! Experiment configuration: a TOML file with one section per module.
//! Every field is validated before compute starts and unknown keys are
//! rejected at parse time.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::observables::{Observable, PhaseTerm};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Partition,
    Limit,
    ClusterVerify,
    DynamicsCheck,
    Theorem1,
    CorrelationsDecay,
    VlasovCheck,
    Meanfield,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Partition => "partition",
            ExperimentKind::Limit => "limit",
            ExperimentKind::ClusterVerify => "cluster-verify",
            ExperimentKind::DynamicsCheck => "dynamics-check",
            ExperimentKind::Theorem1 => "theorem1",
            ExperimentKind::CorrelationsDecay => "correlations-decay",
            ExperimentKind::VlasovCheck => "vlasov-check",
            ExperimentKind::Meanfield => "meanfield",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "partition" => Ok(ExperimentKind::Partition),
            "limit" => Ok(ExperimentKind::Limit),
            "cluster-verify" => Ok(ExperimentKind::ClusterVerify),
            "dynamics-check" => Ok(ExperimentKind::DynamicsCheck),
            "theorem1" => Ok(ExperimentKind::Theorem1),
            "correlations-decay" => Ok(ExperimentKind::CorrelationsDecay),
            "vlasov-check" => Ok(ExperimentKind::VlasovCheck),
            "meanfield" => Ok(ExperimentKind::Meanfield),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffEntry {
    pub xi: Vec<i64>,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    /// One of "cosine", "zero", "log", "riesz", "table".
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default = "default_cutoff")]
    pub cutoff: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<CoeffEntry>>,
}

fn default_dimension() -> usize {
    1
}
fn default_cutoff() -> i64 {
    1
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            dimension: 1,
            family: "cosine".into(),
            s: None,
            cutoff: 1,
            coefficients: None,
        }
    }
}

impl KernelConfig {
    pub fn to_spec(&self) -> Result<KernelSpec> {
        match self.family.as_str() {
            "cosine" => Ok(KernelSpec::cosine()),
            "zero" => Ok(KernelSpec::zero(self.dimension)),
            "log" => Ok(KernelSpec::log(self.dimension, self.cutoff)),
            "riesz" => {
                let s = self
                    .s
                    .ok_or_else(|| Error::Config("riesz kernel needs 's'".into()))?;
                Ok(KernelSpec::riesz(self.dimension, s, self.cutoff))
            }
            "table" => {
                let entries = self
                    .coefficients
                    .as_ref()
                    .ok_or_else(|| Error::Config("table kernel needs 'coefficients'".into()))?;
                let mut list = Vec::with_capacity(entries.len());
                for e in entries {
                    if e.xi.is_empty() || e.xi.len() > 3 {
                        return Err(Error::Config("coefficient xi must have 1..=3 entries".into()));
                    }
                    let mut xi = [0i64; 3];
                    for (a, &v) in e.xi.iter().enumerate() {
                        xi[a] = v;
                    }
                    list.push((xi, e.w));
                }
                Ok(KernelSpec::table(self.dimension, &list, self.cutoff))
            }
            other => Err(Error::Config(format!("unknown kernel family '{other}'"))),
        }
    }
}

fn default_f0() -> Vec<PhaseTerm> {
    vec![PhaseTerm {
        coeff: 1.0,
        xmode: crate::observables::XMode::Cos(1),
        hermite: 0,
    }]
}

pub fn observable_from_terms(beta: f64, terms: &[PhaseTerm]) -> Result<Observable> {
    Observable::new(beta, terms.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionSection {
    pub n_values: Vec<usize>,
    pub betas: Vec<f64>,
    pub n_lambda: usize,
    pub mcmc_burnin: usize,
    pub mcmc_samples: usize,
    pub mcmc_thinning: usize,
    pub exact_grid: usize,
    pub bound_constant: f64,
    pub norm_grid: usize,
    /// Extra cutoffs for the Riesz trend panel (empty disables it).
    pub riesz_cutoffs: Vec<i64>,
}

impl Default for PartitionSection {
    fn default() -> Self {
        PartitionSection {
            n_values: vec![2, 8, 64],
            betas: vec![1.0],
            n_lambda: 8,
            mcmc_burnin: 20_000,
            mcmc_samples: 40_000,
            mcmc_thinning: 2,
            exact_grid: 1 << 14,
            bound_constant: 1.0,
            norm_grid: 512,
            riesz_cutoffs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitSection {
    pub betas: Vec<f64>,
    pub cutoffs: Vec<i64>,
    /// Riesz exponent for the divergence probe (W^ = |k|^{s-1}, d = 1).
    pub divergence_s: f64,
}

impl Default for LimitSection {
    fn default() -> Self {
        LimitSection {
            betas: vec![1.0],
            cutoffs: vec![8, 32, 128, 512],
            divergence_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSection {
    pub n: usize,
    pub beta: f64,
    pub grid: usize,
    pub phi_grid: usize,
    pub kmax: usize,
    pub bound_constant: f64,
    pub random_matrices: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            n: 3,
            beta: 0.5,
            grid: 1024,
            phi_grid: 512,
            kmax: 3,
            bound_constant: 8.0,
            random_matrices: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub n: usize,
    pub t_max: f64,
    pub dt: f64,
    pub drift_n: usize,
    pub drift_t: f64,
    /// When > 0, integrate this many weighted replicas and dump one CSV row
    /// per (replica, snapshot time, particle) with positions, velocities and
    /// the replica weight.
    pub dump_replicas: usize,
    pub dump_times: Vec<f64>,
    pub beta: f64,
    pub f0: Vec<PhaseTerm>,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        DynamicsSection {
            n: 16,
            t_max: 1.0,
            dt: 1e-3,
            drift_n: 64,
            drift_t: 2.0,
            dump_replicas: 0,
            dump_times: vec![0.0, 0.5, 1.0],
            beta: 1.0,
            f0: default_f0(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Theorem1Section {
    pub n_values: Vec<usize>,
    pub r_replicas: usize,
    pub beta: f64,
    pub times: Vec<f64>,
    pub dt: f64,
    pub f0: Vec<PhaseTerm>,
    pub k_modes: i64,
    pub n_hermite: usize,
    pub vlasov_dt: f64,
    pub burnin_sweeps: usize,
    pub thin_sweeps: usize,
}

impl Default for Theorem1Section {
    fn default() -> Self {
        Theorem1Section {
            n_values: vec![8, 32, 128],
            r_replicas: 10_000,
            beta: 1.0,
            times: vec![0.5, 1.0, 2.0],
            dt: 1e-3,
            f0: default_f0(),
            k_modes: 2,
            n_hermite: 512,
            vlasov_dt: 2.5e-4,
            burnin_sweeps: 100,
            thin_sweeps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationsSection {
    pub n_values: Vec<usize>,
    pub r_replicas: usize,
    pub beta: f64,
    pub t: f64,
    pub dt: f64,
    pub f0: Vec<PhaseTerm>,
    pub bootstrap: usize,
    pub burnin_sweeps: usize,
    pub thin_sweeps: usize,
}

impl Default for CorrelationsSection {
    fn default() -> Self {
        // Defaults sized so the pairings are resolved at 15-50 sigma: stronger
        // coupling and a pre-damping time (by t ~ 1 at beta = 1 the seeded
        // perturbation has phase-mixed away and the pairings drop to the
        // 1e-4 scale, unmeasurable at desk-scale replica counts).
        CorrelationsSection {
            n_values: vec![8, 16, 32, 64, 128],
            r_replicas: 100_000,
            beta: 2.0,
            t: 0.25,
            dt: 1.25e-3,
            f0: default_f0(),
            bootstrap: 200,
            burnin_sweeps: 100,
            thin_sweeps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VlasovSection {
    pub beta: f64,
    pub t_max: f64,
    pub dt: f64,
    pub k_modes: i64,
    pub n_hermite: usize,
    pub f0: Vec<PhaseTerm>,
    pub filter_strength: f64,
    pub record_stride: usize,
}

impl Default for VlasovSection {
    fn default() -> Self {
        VlasovSection {
            beta: 1.0,
            t_max: 5.0,
            dt: 2.5e-4,
            k_modes: 2,
            n_hermite: 512,
            f0: default_f0(),
            filter_strength: 0.0,
            record_stride: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanfieldSection {
    pub beta: f64,
    pub l: f64,
    pub grid_n: usize,
    pub v: crate::meanfield::ConfiningPotential,
    pub w: crate::meanfield::PairPotential,
    pub tol: f64,
    pub max_iter: usize,
    pub q_norms: Vec<f64>,
    pub beta_grid: Vec<f64>,
}

impl Default for MeanfieldSection {
    fn default() -> Self {
        MeanfieldSection {
            beta: 0.5,
            l: 8.0,
            grid_n: 401,
            v: crate::meanfield::ConfiningPotential::Quadratic { a: 1.0 },
            w: crate::meanfield::PairPotential::Gaussian {
                amp: 0.1,
                width: 1.0,
            },
            tol: 1e-12,
            max_iter: 300,
            q_norms: vec![2.0, 64.0],
            beta_grid: (1..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_outdir")]
    pub output_dir: String,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub partition: PartitionSection,
    #[serde(default)]
    pub limit: LimitSection,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub theorem1: Theorem1Section,
    #[serde(default)]
    pub correlations: CorrelationsSection,
    #[serde(default)]
    pub vlasov: VlasovSection,
    #[serde(default)]
    pub meanfield: MeanfieldSection,
}

fn default_seed() -> u64 {
    42
}
fn default_outdir() -> String {
    "out".into()
}
fn default_workers() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn run_id(&self) -> String {
        format!("{}-{:08x}", self.experiment.as_str(), self.master_seed)
    }

    /// Validate every field up front (kernel spec, positivity, list shapes).
    pub fn validate(&self) -> Result<()> {
        self.kernel.to_spec()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        let positive = |v: f64, name: &str| -> Result<()> {
            if v <= 0.0 {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
            Ok(())
        };
        match self.experiment {
            ExperimentKind::Partition => {
                if self.partition.n_values.is_empty() || self.partition.betas.is_empty() {
                    return Err(Error::Config("partition needs n_values and betas".into()));
                }
                if self.partition.n_lambda < 4 {
                    return Err(Error::Config("partition.n_lambda must be >= 4".into()));
                }
                for &b in &self.partition.betas {
                    if b < 0.0 {
                        return Err(Error::Config("partition betas must be >= 0".into()));
                    }
                }
            }
            ExperimentKind::Limit => {
                if self.limit.cutoffs.is_empty() {
                    return Err(Error::Config("limit.cutoffs must be nonempty".into()));
                }
                if !(0.0..1.0).contains(&self.limit.divergence_s) {
                    return Err(Error::Config("limit.divergence_s must be in (0,1)".into()));
                }
            }
            ExperimentKind::ClusterVerify => {
                if !(2..=4).contains(&self.cluster.n) {
                    return Err(Error::Config("cluster.n must be in 2..=4".into()));
                }
                positive(self.cluster.beta, "cluster.beta")?;
            }
            ExperimentKind::DynamicsCheck => {
                positive(self.dynamics.dt, "dynamics.dt")?;
                positive(self.dynamics.t_max, "dynamics.t_max")?;
            }
            ExperimentKind::Theorem1 => {
                positive(self.theorem1.beta, "theorem1.beta")?;
                positive(self.theorem1.dt, "theorem1.dt")?;
                if self.theorem1.n_values.len() < 2 {
                    return Err(Error::Config(
                        "theorem1 needs at least two N values for the trend".into(),
                    ));
                }
                observable_from_terms(self.theorem1.beta, &self.theorem1.f0)?;
            }
            ExperimentKind::CorrelationsDecay => {
                positive(self.correlations.beta, "correlations.beta")?;
                if self.correlations.n_values.len() < 3 {
                    return Err(Error::Config(
                        "correlations-decay needs >= 3 N values for a slope".into(),
                    ));
                }
                observable_from_terms(self.correlations.beta, &self.correlations.f0)?;
            }
            ExperimentKind::VlasovCheck => {
                positive(self.vlasov.beta, "vlasov.beta")?;
                positive(self.vlasov.dt, "vlasov.dt")?;
                if self.vlasov.n_hermite < 8 {
                    return Err(Error::Config("vlasov.n_hermite must be >= 8".into()));
                }
                observable_from_terms(self.vlasov.beta, &self.vlasov.f0)?;
            }
            ExperimentKind::Meanfield => {
                positive(self.meanfield.tol, "meanfield.tol")?;
                positive(self.meanfield.l, "meanfield.l")?;
                if self.meanfield.beta_grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config(
                        "meanfield.beta_grid must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"partition\"\n[kernel]\nfamily = \"cosine\"\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Partition);
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.partition.n_values, vec![2, 8, 64]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_toml_str(
            "experiment = \"partition\"\nnot_a_key = 3\n",
        );
        assert!(err.is_err());
        let err2 = ExperimentConfig::from_toml_str(
            "experiment = \"partition\"\n[partition]\nbogus = 1\n",
        );
        assert!(err2.is_err());
    }

    #[test]
    fn config_round_trips() {
        let mut cfg = ExperimentConfig::from_toml_str(
            "experiment = \"theorem1\"\nmaster_seed = 7\n[kernel]\nfamily = \"log\"\ncutoff = 4\n",
        )
        .unwrap();
        cfg.theorem1.n_values = vec![8, 128];
        let text = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn invalid_configs_rejected() {
        // riesz without s
        assert!(ExperimentConfig::from_toml_str(
            "experiment = \"partition\"\n[kernel]\nfamily = \"riesz\"\n"
        )
        .is_err());
        // bad experiment
        assert!(ExperimentConfig::from_toml_str("experiment = \"nope\"\n").is_err());
        // zero workers
        assert!(ExperimentConfig::from_toml_str(
            "experiment = \"partition\"\nworkers = 0\n"
        )
        .is_err());
    }

    #[test]
    fn table_kernel_config_builds() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
experiment = "partition"
[kernel]
family = "table"
coefficients = [{ xi = [1], w = 0.5 }, { xi = [-1], w = 0.5 }]
"#,
        )
        .unwrap();
        let spec = cfg.kernel.to_spec().unwrap();
        assert_eq!(spec, crate::kernels::KernelSpec::cosine());
    }
}
