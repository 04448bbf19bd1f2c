//! Invariant suite: each check reports the measured discrepancy, the
//! tolerance it was held to, and whether it passed.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{OracleError, SimulationError};
use crate::geometry::{self, FaceLattice};
use crate::linalg;
use crate::oracle::{
    self, build_moment_table, isotropic_closed_form, isotropic_gamma_form_value,
    resolve_cuboid_prefactor, stability_functional, variance_bounds_with, volume_variance_ratio,
    CuboidPrefactor, DiscreteOracle, IsotropicOracle, MomentSource,
};
use crate::par::ExecutionMode;
use crate::simulator::{
    sample_zero_cell, DirectionLaw, HyperplaneSampler, DEFAULT_RETRY_CAP, DEFAULT_WINDOW_FACTOR,
};
use crate::special::{factorial, for_each_combination, kappa, rel_diff};
use crate::zonoid::{random_rotation, DirectionalDistribution};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    /// Largest observed discrepancy (relative unless the name says
    /// otherwise).
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn le(name: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            measured,
            tolerance,
            passed: measured <= tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// `kappa_j` with optional replacements, for mutation testing of the bound
/// checks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KappaTable {
    pub overrides: BTreeMap<usize, f64>,
}

impl KappaTable {
    pub fn get(&self, j: usize) -> f64 {
        self.overrides.get(&j).copied().unwrap_or_else(|| kappa(j))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub seed: u64,
    /// Random realisations for the per-realisation counting identity.
    pub realizations: usize,
    pub kappa: KappaTable,
    pub mode: ExecutionMode,
    /// Cap on the number of projections examined per dimension in the
    /// volume-product sandwich check.
    pub max_projections: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            seed: 1,
            realizations: 100,
            kappa: KappaTable::default(),
            mode: ExecutionMode::default(),
            max_projections: 2000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

impl From<crate::error::ZonoidError> for ValidationError {
    fn from(e: crate::error::ZonoidError) -> Self {
        ValidationError::Oracle(e.into())
    }
}

fn max_rel<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> f64 {
    pairs
        .into_iter()
        .map(|(a, b)| rel_diff(a, b))
        .fold(0.0, f64::max)
}

/// Full suite for a discrete directional distribution.
pub fn validate_distribution(
    dist: &DirectionalDistribution,
    opts: &ValidationOptions,
) -> Result<ValidationReport, ValidationError> {
    let d = dist.d();
    let o = DiscreteOracle::with_mode(dist, opts.mode)?;
    let mut checks = Vec::new();

    // discrete tuple identity for the parallelepiped integral
    let nabla = max_rel((0..d).map(|s| {
        (
            o.weighted_nabla_sum(s),
            factorial(d - s) * o.zonoid_intrinsic_volume(d - s),
        )
    }));
    checks.push(CheckResult::le(
        "zonoid.nabla_integral_identity",
        nabla,
        1e-12,
        format!("s = 0..{}", d - 1),
    ));

    checks.push(vp_sandwich(&o, opts)?);

    let mut sym: f64 = 0.0;
    for k in 1..=d {
        for r in 0..=k {
            for s in r + 1..=k {
                sym = sym.max(rel_diff(
                    o.second_moment(k, r, s)?,
                    o.second_moment(k, s, r)?,
                ));
            }
        }
    }
    checks.push(CheckResult::le(
        "oracle.symmetry",
        sym,
        1e-8,
        "E(L_r L_s) vs E(L_s L_r), all k".into(),
    ));

    let mut scaling: f64 = 0.0;
    for lambda in [0.5, 2.0, 7.0] {
        let scaled = DiscreteOracle::with_mode(&dist.scaled_intensity(lambda)?, opts.mode)?;
        for k in 1..=d {
            for r in 0..=k {
                for s in 0..=k {
                    let want = o.second_moment(k, r, s)? * lambda.powi(-((r + s) as i32));
                    scaling = scaling.max(rel_diff(scaled.second_moment(k, r, s)?, want));
                }
            }
        }
    }
    checks.push(CheckResult::le(
        "oracle.intensity_scaling",
        scaling,
        1e-9,
        "lambda in {0.5, 2, 7}".into(),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let rot = random_rotation(d, &mut rng);
    let rotated = DiscreteOracle::with_mode(&dist.rotated(&rot)?, opts.mode)?;
    let mut rotation: f64 = 0.0;
    for k in 1..=d {
        for r in 0..=k {
            for s in 0..=k {
                rotation = rotation.max(rel_diff(
                    rotated.second_moment(k, r, s)?,
                    o.second_moment(k, r, s)?,
                ));
            }
        }
    }
    checks.push(CheckResult::le(
        "oracle.rotation_invariance",
        rotation,
        1e-9,
        "one random rotation".into(),
    ));

    let direct = max_rel(
        (0..=d)
            .map(|r| Ok((o.second_moment(d, r, d)?, o.typical_cell_moment_direct(r)?)))
            .collect::<Result<Vec<_>, OracleError>>()?,
    );
    checks.push(CheckResult::le(
        "oracle.direct_cell_moment",
        direct,
        1e-9,
        "s = d reading vs direct form".into(),
    ));

    checks.push(CheckResult::le(
        "oracle.segment_vertex_moment",
        rel_diff(o.second_moment(1, 0, 0)?, 4.0),
        1e-9,
        "E f_0^2 of the typical edge".into(),
    ));

    checks.extend(table_checks(&o, opts)?);
    checks.extend(bounds_checks(&o, opts)?);

    let vvr = volume_variance_ratio(&o)?;
    let table = build_moment_table(&o, d)?;
    let assembled = table.variance(d) / table.first_moments[d].powi(2);
    checks.push(CheckResult::le(
        "oracle.volume_variance_ratio",
        rel_diff(vvr, assembled),
        1e-9,
        format!("ratio {vvr}"),
    ));

    checks.push(counting_identity(
        &DirectionLaw::Discrete(dist.clone()),
        opts,
    )?);
    checks.push(euler_relation(&DirectionLaw::Discrete(dist.clone()), opts)?);
    Ok(ValidationReport { checks })
}

/// Checks for the exactly isotropic law, which has no atoms.
pub fn validate_isotropic(
    d: usize,
    gamma_hat: f64,
    opts: &ValidationOptions,
) -> Result<ValidationReport, ValidationError> {
    let o = IsotropicOracle::new(d, gamma_hat)?;
    let mut checks = Vec::new();
    checks.push(gamma_form_agreement(d.max(4)));
    let mut scaling: f64 = 0.0;
    for lambda in [0.5, 2.0, 7.0] {
        let scaled = IsotropicOracle::new(d, gamma_hat * lambda)?;
        for k in 1..=d {
            for r in 0..=k {
                for s in 0..=k {
                    let want = o.second_moment(k, r, s)? * lambda.powi(-((r + s) as i32));
                    scaling = scaling.max(rel_diff(scaled.second_moment(k, r, s)?, want));
                }
            }
        }
    }
    checks.push(CheckResult::le(
        "oracle.intensity_scaling",
        scaling,
        1e-9,
        "lambda in {0.5, 2, 7}".into(),
    ));
    checks.extend(table_checks(&o, opts)?);
    checks.extend(bounds_checks(&o, opts)?);
    let mut equality: f64 = 0.0;
    for k in 1..=d {
        let b = variance_bounds_with(&o, k, &|j| opts.kappa.get(j))?;
        equality = equality.max((b.variance - b.upper).abs());
    }
    checks.push(CheckResult::le(
        "bounds.isotropic_attains_upper",
        equality,
        1e-9,
        "absolute gap between variance and upper bound".into(),
    ));
    checks.push(counting_identity(
        &DirectionLaw::Isotropic {
            d,
            intensity: gamma_hat,
        },
        opts,
    )?);
    Ok(ValidationReport { checks })
}

/// Both cuboid prefactors against the general evaluator for `d = 2, 3`.
pub fn validate_cuboid_prefactor(
    gamma_hat: f64,
    mode: ExecutionMode,
) -> Result<ValidationReport, ValidationError> {
    let mut checks = Vec::new();
    for d in 2..=3 {
        let res = resolve_cuboid_prefactor(gamma_hat, d, 1e-9, mode)?;
        let matched = res.matched.map_or("none", CuboidPrefactor::label);
        checks.push(CheckResult {
            name: format!("oracle.cuboid_prefactor.d{d}"),
            measured: res.derived_max_rel.min(res.printed_max_rel),
            tolerance: 1e-9,
            passed: res.matched.is_some(),
            detail: format!(
                "matched={matched} derived_max_rel={:e} printed_max_rel={:e}",
                res.derived_max_rel, res.printed_max_rel
            ),
        });
        let dist = DirectionalDistribution::cuboid(d, gamma_hat)?;
        let o = DiscreteOracle::with_mode(&dist, mode)?;
        let vvr = volume_variance_ratio(&o)?;
        checks.push(CheckResult::le(
            &format!("oracle.cuboid_volume_variance.d{d}"),
            rel_diff(vvr, 2f64.powi(d as i32) - 1.0),
            1e-9,
            format!("ratio {vvr}"),
        ));
        let var = build_moment_table(&o, d)?.variance(0);
        checks.push(CheckResult::le(
            &format!("oracle.cuboid_vertex_variance.d{d}"),
            var.abs(),
            1e-9,
            "absolute".into(),
        ));
    }
    Ok(ValidationReport { checks })
}

/// Kappa form against the Gamma-function form for all `k <= d <= d_max`.
pub fn gamma_form_agreement(d_max: usize) -> CheckResult {
    let mut worst: f64 = 0.0;
    for d in 1..=d_max {
        for k in 1..=d {
            for r in 0..=k {
                for s in 0..=k {
                    for gh in [0.7, 1.0, 3.0] {
                        worst = worst.max(rel_diff(
                            isotropic_closed_form(gh, d, k, r, s),
                            isotropic_gamma_form_value(gh, d, k, r, s),
                        ));
                    }
                }
            }
        }
    }
    CheckResult::le(
        "oracle.isotropic_gamma_form",
        worst,
        1e-12,
        format!("d <= {d_max}"),
    )
}

fn table_checks(
    src: &dyn MomentSource,
    _opts: &ValidationOptions,
) -> Result<Vec<CheckResult>, ValidationError> {
    let d = src.d();
    let mut f0: f64 = 0.0;
    let mut psd: f64 = 0.0;
    let mut sym: f64 = 0.0;
    for k in 1..=d {
        let t = build_moment_table(src, k)?;
        f0 = f0.max(rel_diff(t.first_moments[0], 2f64.powi(k as i32)));
        let trace: f64 = (0..=k).map(|r| t.covariances[r][r]).sum();
        psd = psd.max(-t.min_covariance_eigenvalue / trace.abs().max(f64::MIN_POSITIVE));
        sym = sym.max(t.symmetry_discrepancy);
    }
    Ok(vec![
        CheckResult::le(
            "oracle.mean_vertex_number",
            f0,
            1e-9,
            "E f_0(Z^(k)) = 2^k".into(),
        ),
        CheckResult::le(
            "oracle.covariance_psd",
            psd.max(0.0),
            1e-8,
            "-min eigenvalue / trace".into(),
        ),
        CheckResult::le(
            "oracle.table_symmetry",
            sym,
            1e-8,
            "pre-averaging gap".into(),
        ),
    ])
}

fn bounds_checks(
    src: &dyn MomentSource,
    opts: &ValidationOptions,
) -> Result<Vec<CheckResult>, ValidationError> {
    let d = src.d();
    let kap = |j: usize| opts.kappa.get(j);
    let mut excess: f64 = 0.0;
    let mut detail = Vec::new();
    let mut upper_gap: f64 = 0.0;
    for k in 1..=d {
        let b = variance_bounds_with(src, k, &kap)?;
        excess = excess.max(b.lower - b.variance).max(b.variance - b.upper);
        detail.push(format!("k={k}: {:.12} in [0, {:.12}]", b.variance, b.upper));
        // the upper bound is the isotropic variance
        upper_gap = upper_gap
            .max((b.upper - (isotropic_closed_form(1.0, d, k, 0, 0) - 4f64.powi(k as i32))).abs());
    }
    let (phi, _, _) = stability_functional(src)?;
    let (lo, hi) = oracle::stability_bounds_with(d, &kap);
    let phi_excess = (lo - phi).max(phi - hi);
    let var = src.second_moment(d, 0, 0)? - 4f64.powi(d as i32);
    let identity = rel_diff(
        var + 1.0,
        factorial(d) / 2f64.powi(d as i32) * (src.volume_product()? + phi) + 1.0,
    );
    Ok(vec![
        CheckResult::le(
            "bounds.vertex_variance",
            excess.max(0.0),
            1e-8,
            format!("absolute excess; {}", detail.join("; ")),
        ),
        CheckResult::le(
            "bounds.upper_is_isotropic_variance",
            upper_gap,
            1e-9,
            "absolute gap between the bound and the isotropic variance".into(),
        ),
        CheckResult::le(
            "bounds.stability_functional",
            phi_excess.max(0.0),
            1e-8 * phi.abs().max(1.0),
            format!("phi = {phi}, [c_d, C_d] = [{lo}, {hi}]"),
        ),
        CheckResult::le(
            "bounds.stability_identity",
            identity,
            1e-9,
            "Var f_0 against 2^-d d! (vp + phi), compared as 1 + value".into(),
        ),
    ])
}

fn vp_sandwich(
    o: &DiscreteOracle,
    opts: &ValidationOptions,
) -> Result<CheckResult, ValidationError> {
    let d = o.d();
    let dist = o.distribution();
    let atoms = dist.atoms();
    let idx: Vec<usize> = (0..atoms.len()).collect();
    let mut worst: f64 = 0.0;
    let mut examined = 0usize;
    for j in 1..=d {
        let p = d - j;
        let total = crate::special::binomial(atoms.len(), p);
        let stride = (total / opts.max_projections as f64).ceil().max(1.0) as usize;
        let mut count = 0usize;
        let mut err = None;
        for_each_combination(&idx, p, |a| {
            count += 1;
            if err.is_some() || !(count - 1).is_multiple_of(stride) {
                return;
            }
            let dirs: Vec<&[f64]> = a.iter().map(|&i| atoms[i].direction.as_slice()).collect();
            let proj = if p == 0 {
                o.zonotope().clone()
            } else {
                match linalg::orthogonal_complement(&dirs, d, 1e-10) {
                    Some(b) => o.zonotope().project(&b),
                    None => return,
                }
            };
            match proj.volume_product() {
                Ok(vp) => {
                    let lo = 4f64.powi(j as i32) / factorial(j);
                    let hi = opts.kappa.get(j).powi(2);
                    worst = worst.max(lo - 1e-9 - vp).max(vp - hi - 1e-9);
                    examined += 1;
                }
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e.into());
        }
    }
    Ok(CheckResult::le(
        "zonoid.volume_product_sandwich",
        worst.max(0.0),
        0.0,
        format!("{examined} projections, absolute excess beyond 1e-9 slack"),
    ))
}

fn counting_identity(
    law: &DirectionLaw,
    opts: &ValidationOptions,
) -> Result<CheckResult, ValidationError> {
    let d = law.d();
    let sampler = HyperplaneSampler::new(law.clone())?;
    let r0 = DEFAULT_WINDOW_FACTOR * d as f64 / law.intensity();
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;
    for i in 0..opts.realizations {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64);
        let cell = sample_zero_cell(&sampler, r0, DEFAULT_RETRY_CAP, &mut rng)?;
        for s in 0..d {
            let added: Vec<Vec<f64>> = (0..d - s)
                .map(|_| crate::zonoid::random_unit_vector(d, &mut rng))
                .collect();
            for k in s.max(1)..=d {
                for r in 0..=k {
                    let (lhs, rhs) =
                        crate::simulator::check_counting_identity(&cell, &added, k, r)?;
                    worst = worst.max(rel_diff(lhs, rhs));
                    cases += 1;
                }
            }
        }
    }
    Ok(CheckResult::le(
        "simulator.counting_identity",
        worst,
        1e-7,
        format!("{cases} cases on {} realisations", opts.realizations),
    ))
}

fn euler_relation(
    law: &DirectionLaw,
    opts: &ValidationOptions,
) -> Result<CheckResult, ValidationError> {
    let d = law.d();
    let sampler = HyperplaneSampler::new(law.clone())?;
    let r0 = DEFAULT_WINDOW_FACTOR * d as f64 / law.intensity();
    let mut worst: f64 = 0.0;
    let n = opts.realizations.min(50);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
        rng.set_stream(i as u64);
        let cell = sample_zero_cell(&sampler, r0, DEFAULT_RETRY_CAP, &mut rng)?;
        let f = FaceLattice::new(&cell.polytope).f_vector();
        let chi: i64 = f
            .iter()
            .enumerate()
            .map(|(r, &c)| if r % 2 == 0 { c as i64 } else { -(c as i64) })
            .sum();
        worst = worst.max((chi - 1).abs() as f64);
        let l0 = geometry::face_content(&cell.polytope, 0);
        worst = worst.max((l0 - cell.polytope.vertex_count() as f64).abs());
    }
    Ok(CheckResult::le(
        "geometry.euler_relation",
        worst,
        0.0,
        format!("{n} zero cells, absolute deviation of the Euler characteristic"),
    ))
}
