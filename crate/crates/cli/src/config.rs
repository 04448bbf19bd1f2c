//! Run configuration: a TOML file in which unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hyperplane_moments::simulator::{
    DirectionLaw, EstimatorKind, ExperimentConfig, Target, DEFAULT_ENUMERATION_LIMIT,
    DEFAULT_RETRY_CAP, DEFAULT_WINDOW_FACTOR,
};
use hyperplane_moments::validation::{KappaTable, ValidationOptions};
use hyperplane_moments::{DirectionalDistribution, ExecutionMode};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_Z_MAX: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub intensity: f64,
    pub k: Vec<usize>,
    /// `(r, s)` pairs applied to every `k` they fit.
    #[serde(default)]
    pub pairs: Vec<[usize; 2]>,
    /// Also estimate the first moments `E L_r` for every `r <= k`.
    #[serde(default)]
    pub first_moments: bool,
    pub distribution: DistributionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    IsotropicClosedForm {},
    Atoms { atoms: Vec<AtomSpec> },
    Cuboid {},
    IsotropicDiscretized { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub direction: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_window_factor")]
    pub window_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_retry_cap")]
    pub retry_cap: u32,
    #[serde(default = "default_enumeration_limit")]
    pub enumeration_limit: usize,
    /// Restricts the estimators run; all applicable ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<String>>,
}

fn default_window_factor() -> f64 {
    DEFAULT_WINDOW_FACTOR
}

fn default_retry_cap() -> u32 {
    DEFAULT_RETRY_CAP
}

fn default_enumeration_limit() -> usize {
    DEFAULT_ENUMERATION_LIMIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationBlock {
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Replacement values for `kappa_j`, keyed by `j`. Only useful to check
    /// that the bound checks notice a wrong constant.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub kappa_overrides: BTreeMap<String, f64>,
}

fn default_realizations() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Largest `|z|` accepted by `simulate`.
    #[serde(default = "default_z_max")]
    pub z_max: f64,
    /// Per-check overrides for `validate`, keyed by check name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub checks: BTreeMap<String, f64>,
}

fn default_z_max() -> f64 {
    DEFAULT_Z_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Fill the `wall_time` column. Off by default so that reports are byte
    /// stable across runs.
    #[serde(default)]
    pub wall_time: bool,
}

/// Names of the checks `validate` may run; tolerance overrides must use one
/// of these.
pub const CHECK_NAMES: &[&str] = &[
    "zonoid.nabla_integral_identity",
    "zonoid.volume_product_sandwich",
    "oracle.symmetry",
    "oracle.intensity_scaling",
    "oracle.rotation_invariance",
    "oracle.direct_cell_moment",
    "oracle.segment_vertex_moment",
    "oracle.mean_vertex_number",
    "oracle.covariance_psd",
    "oracle.table_symmetry",
    "oracle.volume_variance_ratio",
    "oracle.isotropic_gamma_form",
    "oracle.cuboid_prefactor.d2",
    "oracle.cuboid_prefactor.d3",
    "oracle.cuboid_volume_variance.d2",
    "oracle.cuboid_volume_variance.d3",
    "oracle.cuboid_vertex_variance.d2",
    "oracle.cuboid_vertex_variance.d3",
    "bounds.vertex_variance",
    "bounds.upper_is_isotropic_variance",
    "bounds.stability_functional",
    "bounds.stability_identity",
    "bounds.isotropic_attains_upper",
    "simulator.counting_identity",
    "geometry.euler_relation",
];

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Canonical form: every defaulted field written out, fixed key order.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = self.dimension;
        if d == 0 || d > 4 {
            return Err(invalid("dimension", format!("must be in 1..=4, got {d}")));
        }
        if !(self.intensity.is_finite() && self.intensity > 0.0) {
            return Err(invalid(
                "intensity",
                format!("must be positive, got {}", self.intensity),
            ));
        }
        if self.k.is_empty() {
            return Err(invalid("k", "list is empty"));
        }
        for (i, &k) in self.k.iter().enumerate() {
            if k == 0 || k > d {
                return Err(invalid(
                    &format!("k[{i}]"),
                    format!("must be in 1..={d}, got {k}"),
                ));
            }
        }
        let k_max = *self.k.iter().max().unwrap();
        for (i, &[r, s]) in self.pairs.iter().enumerate() {
            if r > k_max || s > k_max {
                return Err(invalid(
                    &format!("pairs[{i}]"),
                    format!("({r}, {s}) exceeds every k"),
                ));
            }
        }
        if let Some(sim) = &self.simulation {
            if sim.replicates == 0 {
                return Err(invalid("simulation.replicates", "must be positive"));
            }
            if !(sim.window_factor.is_finite() && sim.window_factor > 0.0) {
                return Err(invalid("simulation.window_factor", "must be positive"));
            }
            if sim.workers == Some(0) {
                return Err(invalid("simulation.workers", "must be positive"));
            }
            if sim.enumeration_limit == 0 {
                return Err(invalid("simulation.enumeration_limit", "must be positive"));
            }
            if let Some(est) = &sim.estimators {
                for (i, e) in est.iter().enumerate() {
                    parse_estimator(e).ok_or_else(|| {
                        invalid(
                            &format!("simulation.estimators[{i}]"),
                            format!("unknown estimator {e:?}; expected kface, typical-cell, first-moment or lowest-vertex"),
                        )
                    })?;
                }
            }
        }
        if let Some(v) = &self.validation {
            if v.realizations == 0 {
                return Err(invalid("validation.realizations", "must be positive"));
            }
            self.kappa_table()?;
        }
        if let Some(t) = &self.tolerances {
            if !(t.z_max.is_finite() && t.z_max > 0.0) {
                return Err(invalid("tolerances.z_max", "must be positive"));
            }
            for (name, &tol) in &t.checks {
                if !CHECK_NAMES.contains(&name.as_str()) {
                    return Err(invalid(
                        &format!("tolerances.checks.{name:?}"),
                        "unknown check",
                    ));
                }
                if !(tol.is_finite() && tol >= 0.0) {
                    return Err(invalid(
                        &format!("tolerances.checks.{name:?}"),
                        "must be non-negative",
                    ));
                }
            }
        }
        if let DistributionSpec::IsotropicDiscretized { n } = self.distribution {
            if n < d {
                return Err(invalid(
                    "distribution.n",
                    format!("need at least {d} directions"),
                ));
            }
        }
        self.direction_law()?;
        Ok(())
    }

    pub fn distribution(&self) -> Result<Option<DirectionalDistribution>, CliError> {
        let d = self.dimension;
        let gh = self.intensity;
        let dist = match &self.distribution {
            DistributionSpec::IsotropicClosedForm {} => return Ok(None),
            DistributionSpec::Atoms { atoms } => {
                for (i, a) in atoms.iter().enumerate() {
                    if a.direction.len() != d {
                        return Err(invalid(
                            &format!("distribution.atoms[{i}].direction"),
                            format!("has {} coordinates, expected {d}", a.direction.len()),
                        ));
                    }
                }
                DirectionalDistribution::new(
                    d,
                    gh,
                    atoms
                        .iter()
                        .map(|a| (a.direction.clone(), a.weight))
                        .collect(),
                )
            }
            DistributionSpec::Cuboid {} => DirectionalDistribution::cuboid(d, gh),
            DistributionSpec::IsotropicDiscretized { n } => {
                DirectionalDistribution::isotropic_discretized(d, *n, gh)
            }
        };
        dist.map(Some).map_err(|e| invalid("distribution", e))
    }

    pub fn direction_law(&self) -> Result<DirectionLaw, CliError> {
        Ok(match self.distribution()? {
            Some(dist) => DirectionLaw::Discrete(dist),
            None => DirectionLaw::Isotropic {
                d: self.dimension,
                intensity: self.intensity,
            },
        })
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|&[r, s]| (r, s)).collect()
    }

    pub fn z_max(&self) -> f64 {
        self.tolerances.as_ref().map_or(DEFAULT_Z_MAX, |t| t.z_max)
    }

    pub fn wall_time(&self) -> bool {
        self.output.as_ref().is_some_and(|o| o.wall_time)
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.output.as_ref().and_then(|o| o.dir.as_deref())
    }

    pub fn kappa_table(&self) -> Result<KappaTable, CliError> {
        let mut table = KappaTable::default();
        if let Some(v) = &self.validation {
            for (key, &value) in &v.kappa_overrides {
                let j: usize = key.parse().map_err(|_| {
                    invalid(
                        &format!("validation.kappa_overrides.{key:?}"),
                        "key must be an integer",
                    )
                })?;
                if !(value.is_finite() && value > 0.0) {
                    return Err(invalid(
                        &format!("validation.kappa_overrides.{key:?}"),
                        "must be positive",
                    ));
                }
                table.overrides.insert(j, value);
            }
        }
        Ok(table)
    }

    pub fn validation_options(&self, mode: ExecutionMode) -> Result<ValidationOptions, CliError> {
        let mut opts = ValidationOptions {
            kappa: self.kappa_table()?,
            mode,
            ..ValidationOptions::default()
        };
        if let Some(v) = &self.validation {
            opts.realizations = v.realizations;
            if let Some(seed) = v.seed {
                opts.seed = seed;
            }
        }
        Ok(opts)
    }

    /// The experiment described by the simulation block.
    pub fn experiment(&self, mode: ExecutionMode) -> Result<ExperimentConfig, CliError> {
        let sim = self
            .simulation
            .as_ref()
            .ok_or_else(|| invalid("simulation", "block is required for simulate"))?;
        let wanted: Option<Vec<EstimatorKind>> = sim
            .estimators
            .as_ref()
            .map(|v| v.iter().filter_map(|e| parse_estimator(e)).collect());
        let targets: Vec<Target> = hyperplane_moments::simulator::standard_targets(
            self.dimension,
            &self.k,
            &self.pairs(),
            self.first_moments,
        )
        .into_iter()
        .filter(|t| wanted.as_ref().is_none_or(|w| w.contains(&t.estimator)))
        .collect();
        if targets.is_empty() {
            return Err(invalid(
                "simulation",
                "no estimable targets for the given k, pairs and estimators",
            ));
        }
        let mut cfg = ExperimentConfig::new(targets, sim.replicates, sim.seed);
        cfg.window_factor = sim.window_factor;
        cfg.retry_cap = sim.retry_cap;
        cfg.enumeration_limit = sim.enumeration_limit;
        cfg.workers = sim.workers;
        cfg.mode = mode;
        Ok(cfg)
    }
}

pub fn parse_estimator(id: &str) -> Option<EstimatorKind> {
    [
        EstimatorKind::KFace,
        EstimatorKind::TypicalCell,
        EstimatorKind::FirstMoment,
        EstimatorKind::LowestVertex,
    ]
    .into_iter()
    .find(|e| e.id() == id)
}
