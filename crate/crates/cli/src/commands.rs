use std::path::Path;

use hyperplane_moments::oracle::{
    build_moment_table, variance_bounds, volume_variance_ratio, DiscreteOracle, IsotropicOracle,
    MomentSource,
};
use hyperplane_moments::simulator::run_experiment;
use hyperplane_moments::validation::{
    validate_cuboid_prefactor, validate_distribution, validate_isotropic, ValidationReport,
};
use hyperplane_moments::{EstimateSummary, ExecutionMode};
use log::{info, warn};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{self, BoundsDocument, BoundsFile};

pub fn moment_source(
    cfg: &RunConfig,
    mode: ExecutionMode,
) -> Result<Box<dyn MomentSource>, CliError> {
    Ok(match cfg.distribution()? {
        Some(dist) => Box::new(DiscreteOracle::with_mode(&dist, mode)?),
        None => Box::new(IsotropicOracle::new(cfg.dimension, cfg.intensity)?),
    })
}

/// Writes `moments_k<k>.toml` for every configured `k`.
pub fn cmd_oracle(
    cfg: &RunConfig,
    out: &Path,
    mode: ExecutionMode,
) -> Result<Vec<String>, CliError> {
    let src = moment_source(cfg, mode)?;
    let mut written = Vec::new();
    for &k in &cfg.k {
        let table = build_moment_table(src.as_ref(), k)?;
        let bounds = variance_bounds(src.as_ref(), k)?;
        let name = format!("moments_k{k}.toml");
        report::write_file(
            &out.join(&name),
            report::moment_file_text(&table, &bounds).as_bytes(),
        )?;
        info!(
            "k = {k}: E f_0^2 = {}, Var f_0 = {}",
            table.second_moments[0][0],
            table.variance(0)
        );
        written.push(name);
    }
    Ok(written)
}

/// Writes `bounds.toml` and returns it.
pub fn cmd_bounds(cfg: &RunConfig, out: &Path, mode: ExecutionMode) -> Result<String, CliError> {
    let src = moment_source(cfg, mode)?;
    let bounds = cfg
        .k
        .iter()
        .map(|&k| variance_bounds(src.as_ref(), k).map(|b| BoundsFile::from(&b)))
        .collect::<Result<Vec<_>, _>>()?;
    let doc = BoundsDocument {
        d: cfg.dimension,
        intensity: cfg.intensity,
        volume_product: src.volume_product()?,
        volume_variance_ratio: volume_variance_ratio(src.as_ref())?,
        bounds,
    };
    let text = toml::to_string(&doc).expect("bounds serialise");
    report::write_file(&out.join("bounds.toml"), text.as_bytes())?;
    Ok(text)
}

pub struct SimulationOutcome {
    pub rows: Vec<EstimateSummary>,
    pub disagreements: usize,
}

/// Writes `report.csv`. Estimates further than `z_max` standard errors
/// from their oracle value are counted as disagreements.
pub fn cmd_simulate(
    cfg: &RunConfig,
    out: &Path,
    mode: ExecutionMode,
) -> Result<SimulationOutcome, CliError> {
    let exp = cfg.experiment(mode)?;
    let law = cfg.direction_law()?;
    let src = moment_source(cfg, mode)?;
    info!(
        "{} targets, {} replicates",
        exp.targets.len(),
        exp.replicates
    );
    let rows = run_experiment(&law, Some(src.as_ref()), &exp)?;
    let mut buf = Vec::new();
    report::write_csv(&mut buf, &rows, cfg.wall_time()).map_err(|e| CliError::Io {
        path: "report.csv".into(),
        source: e.into(),
    })?;
    report::write_file(&out.join("report.csv"), &buf)?;
    let z_max = cfg.z_max();
    let mut disagreements = 0;
    for e in &rows {
        if e.oracle_value.is_some() && !e.agrees(z_max) {
            warn!(
                "{}: mean {} vs oracle {:?}, z = {:?}",
                e.target.label(),
                e.mean,
                e.oracle_value,
                e.z_score
            );
            disagreements += 1;
        }
    }
    Ok(SimulationOutcome {
        rows,
        disagreements,
    })
}

/// Runs the invariant suite for the configured law, plus the cuboid
/// prefactor resolution, and writes `validation.toml`.
pub fn cmd_validate(
    cfg: &RunConfig,
    out: &Path,
    mode: ExecutionMode,
) -> Result<ValidationReport, CliError> {
    let opts = cfg.validation_options(mode)?;
    let mut rep = match cfg.distribution()? {
        Some(dist) => validate_distribution(&dist, &opts)?,
        None => validate_isotropic(cfg.dimension, cfg.intensity, &opts)?,
    };
    rep.checks
        .extend(validate_cuboid_prefactor(cfg.intensity, mode)?.checks);
    if let Some(t) = &cfg.tolerances {
        for c in &mut rep.checks {
            if let Some(&tol) = t.checks.get(&c.name) {
                c.tolerance = tol;
                c.passed = c.measured <= tol;
            }
        }
    }
    report::write_file(
        &out.join("validation.toml"),
        report::validation_text(&rep).as_bytes(),
    )?;
    Ok(rep)
}
