//! Closed-form moments of the face contents of the typical k-face.
//!
//! Two evaluators implement [`MomentSource`]:
//!
//! * [`DiscreteOracle`] evaluates the general second-moment formula for a
//!   discrete directional distribution. The integral over ordered direction
//!   tuples becomes an exact weighted sum over distinct atom tuples. For a
//!   fixed `j` the integrand only depends on the set `A` of the first
//!   `d - j` directions (through `L = A^⊥`) and on the whole tuple through
//!   the parallelepiped volume, so the ordered sum factorises as
//!   `p! q! sum_A w_A G(A) sum_{B disjoint from A, |B| = q} w_B ∇(A ∪ B)`
//!   with `p = d - j` and `q = j - s`.
//! * [`IsotropicOracle`] evaluates the rotation invariant closed form.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::OracleError;
use crate::linalg;
use crate::par::{self, ExecutionMode};
use crate::special::{
    binomial, factorial, falling_factorial, for_each_combination, kappa, ln_gamma,
};
use crate::zonoid::{associated_zonotope, DirectionalDistribution, Zonotope};

const INDEPENDENCE_TOL: f64 = 1e-10;

/// Anything that can produce first and second moments of `L_r(Z^(k))`.
pub trait MomentSource: Sync {
    fn d(&self) -> usize;
    /// `gamma_hat`.
    fn intensity(&self) -> f64;
    /// Cell intensity `gamma = V_d(Pi)`.
    fn cell_intensity(&self) -> f64;
    fn first_moment(&self, k: usize, r: usize) -> Result<f64, OracleError>;
    fn second_moment(&self, k: usize, r: usize, s: usize) -> Result<f64, OracleError>;
    /// `vp(Pi)`.
    fn volume_product(&self) -> Result<f64, OracleError>;
    /// `gamma_hat^d / (gamma d!) * integral of vp(Pi | u_1^⊥ ∩ ... ∩ u_{d-j}^⊥) ∇_d`.
    fn vp_integral(&self, j: usize) -> Result<f64, OracleError>;
}

fn check_indices(d: usize, k: usize, r: usize, s: usize) -> Result<(), OracleError> {
    if k == 0 || k > d {
        return Err(OracleError::InvalidArguments(format!(
            "k = {k} outside 1..={d}"
        )));
    }
    if r > k || s > k {
        return Err(OracleError::InvalidArguments(format!(
            "r = {r}, s = {s} must not exceed k = {k}"
        )));
    }
    Ok(())
}

/// `2^{k-r} C(k,r) V_{d-r}(Pi) / (gamma C(d,r))`.
fn first_moment_from(d: usize, k: usize, r: usize, v_dr: f64, gamma: f64) -> f64 {
    2f64.powi((k - r) as i32) * binomial(k, r) * v_dr / (gamma * binomial(d, r))
}

/// Per-`j` sums `T[r][q] = sum_A w_A V_{j-r}(Pi|L_A) V_j((Pi|L_A)°) C_q(A)`
/// over unordered independent `(d-j)`-subsets `A`, where `C_q(A)` is the
/// weighted completion sum over disjoint `q`-subsets.
#[derive(Debug, Clone)]
struct JTable {
    j: usize,
    t: Vec<f64>,
}

impl JTable {
    fn get(&self, r: usize, q: usize) -> f64 {
        self.t[r * (self.j + 1) + q]
    }
}

/// Exact evaluator for a discrete directional distribution.
#[derive(Debug)]
pub struct DiscreteOracle {
    dist: DirectionalDistribution,
    zonotope: Zonotope,
    gamma: f64,
    intrinsic: Vec<f64>,
    mode: ExecutionMode,
    tables: Vec<OnceLock<Result<JTable, OracleError>>>,
    polar_volume: OnceLock<Result<f64, OracleError>>,
}

impl DiscreteOracle {
    pub fn new(dist: &DirectionalDistribution) -> Result<Self, OracleError> {
        Self::with_mode(dist, ExecutionMode::default())
    }

    pub fn with_mode(
        dist: &DirectionalDistribution,
        mode: ExecutionMode,
    ) -> Result<Self, OracleError> {
        let zonotope = associated_zonotope(dist);
        let d = dist.d();
        let intrinsic: Vec<f64> = (0..=d).map(|j| zonotope.intrinsic_volume(j)).collect();
        let gamma = intrinsic[d];
        let scale = dist.intensity().powi(d as i32);
        if gamma.is_nan() || gamma <= 1e-12 * scale {
            return Err(OracleError::DegenerateDistribution(format!(
                "cell intensity {gamma} vanishes"
            )));
        }
        Ok(DiscreteOracle {
            dist: dist.clone(),
            zonotope,
            gamma,
            intrinsic,
            mode,
            tables: (0..=d).map(|_| OnceLock::new()).collect(),
            polar_volume: OnceLock::new(),
        })
    }

    pub fn distribution(&self) -> &DirectionalDistribution {
        &self.dist
    }

    pub fn zonotope(&self) -> &Zonotope {
        &self.zonotope
    }

    /// `V_j(Pi)`.
    pub fn zonoid_intrinsic_volume(&self, j: usize) -> f64 {
        self.intrinsic[j]
    }

    /// `V_d(Pi°)`.
    pub fn polar_volume(&self) -> Result<f64, OracleError> {
        self.polar_volume
            .get_or_init(|| self.zonotope.polar_volume().map_err(OracleError::from))
            .clone()
    }

    /// The `s = d` moment evaluated directly:
    /// `d! / (2^d gamma) V_{d-r}(Pi) V_d(Pi°)`.
    pub fn typical_cell_moment_direct(&self, r: usize) -> Result<f64, OracleError> {
        let d = self.d();
        check_indices(d, d, r, d)?;
        Ok(factorial(d) / (2f64.powi(d as i32) * self.gamma)
            * self.intrinsic[d - r]
            * self.polar_volume()?)
    }

    /// Ordered sum `gamma_hat^{d-s} sum_{tuples} w ∇_{d-s}`; equals
    /// `(d-s)! V_{d-s}(Pi)` exactly.
    pub fn weighted_nabla_sum(&self, s: usize) -> f64 {
        let d = self.d();
        assert!(s <= d);
        let m = d - s;
        let atoms = self.dist.atoms();
        let idx: Vec<usize> = (0..atoms.len()).collect();
        let mut acc = 0.0;
        let mut buf: Vec<&[f64]> = Vec::with_capacity(m);
        for_each_combination(&idx, m, |c| {
            buf.clear();
            buf.extend(c.iter().map(|&i| atoms[i].direction.as_slice()));
            let w: f64 = c.iter().map(|&i| atoms[i].weight).product();
            acc += w * linalg::parallelepiped_volume(&buf);
        });
        self.dist.intensity().powi(m as i32) * factorial(m) * acc
    }

    fn table(&self, j: usize) -> Result<&JTable, OracleError> {
        self.tables[j]
            .get_or_init(|| self.build_table(j))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn build_table(&self, j: usize) -> Result<JTable, OracleError> {
        let d = self.d();
        let p = d - j;
        let n = self.dist.len();
        let width = (j + 1) * (j + 1);
        // one task per smallest element of A; p = 0 is a single task
        let tasks = if p == 0 { 1 } else { n };
        let partials =
            par::map_indexed(self.mode, tasks, |first| -> Result<Vec<f64>, OracleError> {
                let mut out = vec![0.0; width];
                if p == 0 {
                    self.accumulate_subset(&[], j, &mut out)?;
                    return Ok(out);
                }
                let rest: Vec<usize> = (first + 1..n).collect();
                let mut a = Vec::with_capacity(p);
                let mut err = None;
                for_each_combination(&rest, p - 1, |tail| {
                    if err.is_some() {
                        return;
                    }
                    a.clear();
                    a.push(first);
                    a.extend_from_slice(tail);
                    if let Err(e) = self.accumulate_subset(&a, j, &mut out) {
                        err = Some(e);
                    }
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(out),
                }
            });
        let mut t = vec![0.0; width];
        for part in partials {
            for (acc, v) in t.iter_mut().zip(part?) {
                *acc += v;
            }
        }
        Ok(JTable { j, t })
    }

    fn accumulate_subset(&self, a: &[usize], j: usize, out: &mut [f64]) -> Result<(), OracleError> {
        let d = self.d();
        let atoms = self.dist.atoms();
        let dirs: Vec<&[f64]> = a.iter().map(|&i| atoms[i].direction.as_slice()).collect();
        let w_a: f64 = a.iter().map(|&i| atoms[i].weight).product();
        if j == 0 {
            // L = {0}: the projection is a point with V_0 = vp = 1
            out[0] += w_a * linalg::parallelepiped_volume(&dirs);
            return Ok(());
        }
        let (vols, polar) = if a.is_empty() {
            (self.intrinsic.clone(), self.polar_volume()?)
        } else {
            let Some(basis) = linalg::orthogonal_complement(&dirs, d, INDEPENDENCE_TOL) else {
                return Ok(());
            };
            let proj = self.zonotope.project(&basis);
            let vols: Vec<f64> = (0..=j).map(|i| proj.intrinsic_volume(i)).collect();
            (vols, proj.polar_volume()?)
        };
        let in_a = |i: usize| a.contains(&i);
        let complement: Vec<usize> = (0..atoms.len()).filter(|&i| !in_a(i)).collect();
        let mut completion = vec![0.0; j + 1];
        let mut buf: Vec<&[f64]> = Vec::with_capacity(d);
        for (q, c) in completion.iter_mut().enumerate() {
            let mut acc = 0.0;
            for_each_combination(&complement, q, |b| {
                buf.clear();
                buf.extend_from_slice(&dirs);
                buf.extend(b.iter().map(|&i| atoms[i].direction.as_slice()));
                let w_b: f64 = b.iter().map(|&i| atoms[i].weight).product();
                acc += w_b * linalg::parallelepiped_volume(&buf);
            });
            *c = acc;
        }
        for r in 0..=j {
            let g = w_a * vols[j - r] * polar;
            for q in 0..=j {
                out[r * (j + 1) + q] += g * completion[q];
            }
        }
        Ok(())
    }
}

impl MomentSource for DiscreteOracle {
    fn d(&self) -> usize {
        self.dist.d()
    }

    fn intensity(&self) -> f64 {
        self.dist.intensity()
    }

    fn cell_intensity(&self) -> f64 {
        self.gamma
    }

    fn first_moment(&self, k: usize, r: usize) -> Result<f64, OracleError> {
        let d = self.d();
        check_indices(d, k, r, 0)?;
        Ok(first_moment_from(
            d,
            k,
            r,
            self.intrinsic[d - r],
            self.gamma,
        ))
    }

    fn second_moment(&self, k: usize, r: usize, s: usize) -> Result<f64, OracleError> {
        let d = self.d();
        check_indices(d, k, r, s)?;
        let gh = self.intensity();
        let mut total = 0.0;
        for j in r.max(s)..=k {
            let table = self.table(j)?;
            let q = j - s;
            // k! j! / ((k-j)! (j-s)!) 2^{k-2j} * gh^{d-s} / (gamma d!) * (d-j)! (j-s)!
            let coef = factorial(k) * factorial(j) * factorial(d - j)
                / (factorial(k - j) * factorial(d))
                * 2f64.powi(k as i32 - 2 * j as i32)
                * gh.powi((d - s) as i32)
                / self.gamma;
            total += coef * table.get(r, q);
        }
        Ok(total)
    }

    fn volume_product(&self) -> Result<f64, OracleError> {
        Ok(self.intrinsic[self.d()] * self.polar_volume()?)
    }

    fn vp_integral(&self, j: usize) -> Result<f64, OracleError> {
        let d = self.d();
        if j > d {
            return Err(OracleError::InvalidArguments(format!(
                "j = {j} exceeds d = {d}"
            )));
        }
        let table = self.table(j)?;
        let ordered = factorial(d - j) * factorial(j) * table.get(0, j);
        Ok(self.intensity().powi(d as i32) / (self.gamma * factorial(d)) * ordered)
    }
}

/// Rotation invariant process: the associated zonoid is a ball of radius
/// `gamma_hat kappa_{d-1} / (d kappa_d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicOracle {
    d: usize,
    gamma_hat: f64,
}

impl IsotropicOracle {
    pub fn new(d: usize, gamma_hat: f64) -> Result<Self, OracleError> {
        if d == 0 || d > linalg::MAX_DIM {
            return Err(OracleError::InvalidArguments(format!(
                "dimension {d} not supported"
            )));
        }
        if !(gamma_hat.is_finite() && gamma_hat > 0.0) {
            return Err(OracleError::InvalidArguments(format!(
                "intensity must be positive, got {gamma_hat}"
            )));
        }
        Ok(IsotropicOracle { d, gamma_hat })
    }

    pub fn zonoid_radius(&self) -> f64 {
        self.gamma_hat * kappa(self.d - 1) / (self.d as f64 * kappa(self.d))
    }
}

impl MomentSource for IsotropicOracle {
    fn d(&self) -> usize {
        self.d
    }

    fn intensity(&self) -> f64 {
        self.gamma_hat
    }

    fn cell_intensity(&self) -> f64 {
        self.zonoid_radius().powi(self.d as i32) * kappa(self.d)
    }

    fn first_moment(&self, k: usize, r: usize) -> Result<f64, OracleError> {
        check_indices(self.d, k, r, 0)?;
        let big_r = self.zonoid_radius();
        let v_dr = big_r.powi((self.d - r) as i32) * binomial(self.d, r) * kappa(self.d) / kappa(r);
        Ok(first_moment_from(self.d, k, r, v_dr, self.cell_intensity()))
    }

    fn second_moment(&self, k: usize, r: usize, s: usize) -> Result<f64, OracleError> {
        check_indices(self.d, k, r, s)?;
        Ok(isotropic_closed_form(self.gamma_hat, self.d, k, r, s))
    }

    fn volume_product(&self) -> Result<f64, OracleError> {
        Ok(kappa(self.d).powi(2))
    }

    fn vp_integral(&self, j: usize) -> Result<f64, OracleError> {
        Ok(kappa(j).powi(2))
    }
}

/// Isotropic closed form in terms of unit-ball volumes.
pub fn isotropic_closed_form(gamma_hat: f64, d: usize, k: usize, r: usize, s: usize) -> f64 {
    let base = d as f64 * kappa(d) / (kappa(d - 1) * gamma_hat);
    let sum: f64 = (r.max(s)..=k)
        .map(|j| {
            kappa(j).powi(2) * binomial(j, r) * binomial(j, s)
                / (4f64.powi(j as i32) * factorial(k - j))
        })
        .sum();
    2f64.powi(k as i32) * factorial(k) / (kappa(r) * kappa(s)) * base.powi((r + s) as i32) * sum
}

/// The same quantity in the Gamma-function parametrisation.
pub fn isotropic_gamma_form_value(gamma_hat: f64, d: usize, k: usize, r: usize, s: usize) -> f64 {
    let g = |x: f64| ln_gamma(x).exp();
    let half = |n: usize| n as f64 / 2.0;
    let base = g(half(d + 1)) / (g(half(d)) * gamma_hat);
    let sum: f64 = (r.max(s)..=k)
        .map(|j| {
            binomial(k, j)
                * (std::f64::consts::FRAC_PI_2).powi(j as i32)
                * (ln_gamma(half(j + 1)) - ln_gamma(half(j) + 1.0)).exp()
                * falling_factorial(j, r)
                * falling_factorial(j, s)
        })
        .sum();
    2f64.powi(k as i32) * std::f64::consts::PI.sqrt() / (g(half(r + 1)) * g(half(s + 1)))
        * base.powi((r + s) as i32)
        * sum
}

/// The two candidate prefactors of the quasi-isotropic cuboid closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CuboidPrefactor {
    /// Cube edge `gamma_hat / d`, from the support function of the zonoid.
    Derived,
    /// Cube edge `2^{-d} gamma_hat`.
    Printed,
}

impl CuboidPrefactor {
    pub fn edge(self, gamma_hat: f64, d: usize) -> f64 {
        match self {
            CuboidPrefactor::Derived => gamma_hat / d as f64,
            CuboidPrefactor::Printed => gamma_hat / 2f64.powi(d as i32),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CuboidPrefactor::Derived => "derived",
            CuboidPrefactor::Printed => "printed",
        }
    }
}

/// `2^d a^{-(r+s)} sum_{j >= max(r,s)} C(d,j) C(j,r) C(j,s)` for `k = d`.
pub fn cuboid_closed_form(
    gamma_hat: f64,
    d: usize,
    r: usize,
    s: usize,
    variant: CuboidPrefactor,
) -> Result<f64, OracleError> {
    if d < 2 {
        return Err(OracleError::InvalidArguments(format!(
            "cuboid closed form needs d >= 2, got {d}"
        )));
    }
    check_indices(d, d, r, s)?;
    if !(gamma_hat.is_finite() && gamma_hat > 0.0) {
        return Err(OracleError::InvalidArguments(format!(
            "intensity must be positive, got {gamma_hat}"
        )));
    }
    let a = variant.edge(gamma_hat, d);
    let sum: f64 = (r.max(s)..=d)
        .map(|j| binomial(d, j) * binomial(j, r) * binomial(j, s))
        .sum();
    Ok(2f64.powi(d as i32) * a.powi(-((r + s) as i32)) * sum)
}

/// Outcome of comparing both cuboid prefactors with the general evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct CuboidResolution {
    pub d: usize,
    pub gamma_hat: f64,
    /// Largest relative deviation over all `(r, s)` for each variant.
    pub derived_max_rel: f64,
    pub printed_max_rel: f64,
    /// The variant that agrees to `tol`, if exactly one does.
    pub matched: Option<CuboidPrefactor>,
}

pub fn resolve_cuboid_prefactor(
    gamma_hat: f64,
    d: usize,
    tol: f64,
    mode: ExecutionMode,
) -> Result<CuboidResolution, OracleError> {
    let dist = DirectionalDistribution::cuboid(d, gamma_hat)?;
    let oracle = DiscreteOracle::with_mode(&dist, mode)?;
    let mut derived_max_rel: f64 = 0.0;
    let mut printed_max_rel: f64 = 0.0;
    for r in 0..=d {
        for s in 0..=d {
            let general = oracle.second_moment(d, r, s)?;
            let rel = |v: f64| crate::special::rel_diff(v, general);
            derived_max_rel = derived_max_rel.max(rel(cuboid_closed_form(
                gamma_hat,
                d,
                r,
                s,
                CuboidPrefactor::Derived,
            )?));
            printed_max_rel = printed_max_rel.max(rel(cuboid_closed_form(
                gamma_hat,
                d,
                r,
                s,
                CuboidPrefactor::Printed,
            )?));
        }
    }
    let matched = match (derived_max_rel <= tol, printed_max_rel <= tol) {
        (true, false) => Some(CuboidPrefactor::Derived),
        (false, true) => Some(CuboidPrefactor::Printed),
        _ => None,
    };
    Ok(CuboidResolution {
        d,
        gamma_hat,
        derived_max_rel,
        printed_max_rel,
        matched,
    })
}

/// `2^k k! sum_{j=0}^k kappa_j^2 / (4^j (k-j)!) - 4^k` with a pluggable
/// `kappa`.
pub fn variance_upper_bound_with(k: usize, kappa: &dyn Fn(usize) -> f64) -> f64 {
    let sum: f64 = (0..=k)
        .map(|j| kappa(j).powi(2) / (4f64.powi(j as i32) * factorial(k - j)))
        .sum();
    2f64.powi(k as i32) * factorial(k) * sum - 4f64.powi(k as i32)
}

pub fn variance_upper_bound(k: usize) -> f64 {
    variance_upper_bound_with(k, &kappa)
}

/// `(c_d, C_d)` with a pluggable `kappa`.
pub fn stability_bounds_with(d: usize, kappa: &dyn Fn(usize) -> f64) -> (f64, f64) {
    let lower = -4f64.powi(d as i32) / factorial(d);
    let upper = (0..d)
        .map(|j| 2f64.powi(2 * (d - j) as i32) * kappa(j).powi(2) / factorial(d - j))
        .sum::<f64>()
        - 2f64.powi(3 * d as i32) / factorial(d);
    (lower, upper)
}

pub fn stability_bounds(d: usize) -> (f64, f64) {
    stability_bounds_with(d, &kappa)
}

/// Variance of the vertex number of the typical k-face with its sharp
/// bounds, and for `k = d` the stability functional with its range.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub k: usize,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
    pub phi: Option<f64>,
    pub phi_lower: Option<f64>,
    pub phi_upper: Option<f64>,
}

impl BoundsReport {
    /// Whether variance (and `phi`, if present) lie within their bounds up
    /// to `slack`.
    pub fn within_bounds(&self, slack: f64) -> bool {
        let var_ok = self.lower - slack <= self.variance && self.variance <= self.upper + slack;
        let phi_ok = match (self.phi, self.phi_lower, self.phi_upper) {
            (Some(p), Some(lo), Some(hi)) => lo - slack <= p && p <= hi + slack,
            _ => true,
        };
        var_ok && phi_ok
    }
}

/// Stability functional `Phi` and its bounds `(c_d, C_d)`.
pub fn stability_functional(src: &dyn MomentSource) -> Result<(f64, f64, f64), OracleError> {
    let d = src.d();
    let mut phi = 0.0;
    for j in 0..d {
        phi += 2f64.powi(2 * (d - j) as i32) / factorial(d - j) * src.vp_integral(j)?;
    }
    phi -= 2f64.powi(3 * d as i32) / factorial(d);
    let (lo, hi) = stability_bounds(d);
    Ok((phi, lo, hi))
}

pub fn variance_bounds(src: &dyn MomentSource, k: usize) -> Result<BoundsReport, OracleError> {
    variance_bounds_with(src, k, &kappa)
}

pub fn variance_bounds_with(
    src: &dyn MomentSource,
    k: usize,
    kappa: &dyn Fn(usize) -> f64,
) -> Result<BoundsReport, OracleError> {
    let d = src.d();
    check_indices(d, k, 0, 0)?;
    let variance = src.second_moment(k, 0, 0)? - 4f64.powi(k as i32);
    let (phi, phi_lower, phi_upper) = if k == d {
        let (phi, _, _) = stability_functional(src)?;
        let (lo, hi) = stability_bounds_with(d, kappa);
        (Some(phi), Some(lo), Some(hi))
    } else {
        (None, None, None)
    };
    Ok(BoundsReport {
        k,
        variance,
        lower: 0.0,
        upper: variance_upper_bound_with(k, kappa),
        phi,
        phi_lower,
        phi_upper,
    })
}

/// `2^{-d} d! vp(Pi) - 1`, the squared coefficient of variation of the
/// volume of the typical cell.
pub fn volume_variance_ratio(src: &dyn MomentSource) -> Result<f64, OracleError> {
    let d = src.d();
    Ok(factorial(d) / 2f64.powi(d as i32) * src.volume_product()? - 1.0)
}

/// First and second moments and the covariance matrix of
/// `(L_0, ..., L_k)(Z^(k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub k: usize,
    pub d: usize,
    pub intensity: f64,
    pub cell_intensity: f64,
    pub first_moments: Vec<f64>,
    pub second_moments: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
    /// Largest relative gap between the `(r, s)` and `(s, r)` evaluations
    /// before averaging.
    pub symmetry_discrepancy: f64,
    pub min_covariance_eigenvalue: f64,
}

impl MomentTable {
    pub fn variance(&self, r: usize) -> f64 {
        self.covariances[r][r]
    }
}

pub fn build_moment_table(src: &dyn MomentSource, k: usize) -> Result<MomentTable, OracleError> {
    let d = src.d();
    check_indices(d, k, 0, 0)?;
    let first: Vec<f64> = (0..=k)
        .map(|r| src.first_moment(k, r))
        .collect::<Result<_, _>>()?;
    let mut raw = vec![vec![0.0; k + 1]; k + 1];
    for (r, row) in raw.iter_mut().enumerate() {
        for (s, v) in row.iter_mut().enumerate() {
            *v = src.second_moment(k, r, s)?;
        }
    }
    let mut second = raw.clone();
    let mut discrepancy: f64 = 0.0;
    for r in 0..=k {
        for s in r + 1..=k {
            discrepancy = discrepancy.max(crate::special::rel_diff(raw[r][s], raw[s][r]));
            let avg = 0.5 * (raw[r][s] + raw[s][r]);
            second[r][s] = avg;
            second[s][r] = avg;
        }
    }
    let cov: Vec<Vec<f64>> = (0..=k)
        .map(|r| {
            (0..=k)
                .map(|s| second[r][s] - first[r] * first[s])
                .collect()
        })
        .collect();
    let m = DMatrix::from_fn(k + 1, k + 1, |r, s| cov[r][s]);
    let trace: f64 = (0..=k).map(|r| cov[r][r]).sum();
    let min_eig = m
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);

    if discrepancy >= 1e-8 {
        return Err(OracleError::InvariantViolated(format!(
            "second moments not symmetric: relative gap {discrepancy:e}"
        )));
    }
    if (first[0] - 2f64.powi(k as i32)).abs() > 1e-9 * 2f64.powi(k as i32) {
        return Err(OracleError::InvariantViolated(format!(
            "E f_0 = {} differs from 2^{k}",
            first[0]
        )));
    }
    if min_eig < -1e-8 * trace.abs() {
        return Err(OracleError::InvariantViolated(format!(
            "covariance matrix not positive semidefinite: eigenvalue {min_eig:e}, trace {trace:e}"
        )));
    }
    Ok(MomentTable {
        k,
        d,
        intensity: src.intensity(),
        cell_intensity: src.cell_intensity(),
        first_moments: first,
        second_moments: second,
        covariances: cov,
        symmetry_discrepancy: discrepancy,
        min_covariance_eigenvalue: min_eig,
    })
}
