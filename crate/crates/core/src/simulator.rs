//! Monte Carlo estimators built on the zero cell of a sampled process.
//!
//! A replicate samples the hyperplanes hitting a ball around the origin,
//! builds the zero cell from the nearest ones, and evaluates every
//! requested estimator on that one cell (common random numbers). Replicate
//! `i` draws from stream `i` of a ChaCha generator keyed by the master
//! seed, and replicate results are reduced in index order, so the output
//! does not depend on the worker count.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;

use crate::error::{GeometryError, SimulationError};
use crate::geometry::{self, Halfspace, Hyperplane, Intersection, VPolytope, Vector};
use crate::linalg;
use crate::oracle::MomentSource;
use crate::par::{self, ExecutionMode};
use crate::special::{binomial, factorial, for_each_combination, kappa};
use crate::zonoid::{associated_zonotope, random_unit_vector, DirectionalDistribution};

/// Offsets closer to zero than this are redrawn.
pub const MIN_OFFSET: f64 = 1e-12;
pub const DEFAULT_WINDOW_FACTOR: f64 = 10.0;
pub const DEFAULT_RETRY_CAP: u32 = 6;
pub const DEFAULT_ENUMERATION_LIMIT: usize = 4;

const INDEPENDENCE_TOL: f64 = 1e-10;

/// Directional law of the simulated process.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectionLaw {
    Discrete(DirectionalDistribution),
    /// Uniform directions on the sphere.
    Isotropic {
        d: usize,
        intensity: f64,
    },
}

impl DirectionLaw {
    pub fn d(&self) -> usize {
        match self {
            DirectionLaw::Discrete(dist) => dist.d(),
            DirectionLaw::Isotropic { d, .. } => *d,
        }
    }

    pub fn intensity(&self) -> f64 {
        match self {
            DirectionLaw::Discrete(dist) => dist.intensity(),
            DirectionLaw::Isotropic { intensity, .. } => *intensity,
        }
    }

    /// `gamma = V_d(Pi)`.
    pub fn cell_intensity(&self) -> f64 {
        match self {
            DirectionLaw::Discrete(dist) => associated_zonotope(dist).intrinsic_volume(dist.d()),
            DirectionLaw::Isotropic { d, intensity } => {
                let r = intensity * kappa(d - 1) / (*d as f64 * kappa(*d));
                r.powi(*d as i32) * kappa(*d)
            }
        }
    }
}

/// Draws directions and hyperplanes for one law.
#[derive(Debug, Clone)]
pub struct HyperplaneSampler {
    law: DirectionLaw,
    index: Option<WeightedIndex<f64>>,
}

impl HyperplaneSampler {
    pub fn new(law: DirectionLaw) -> Result<Self, SimulationError> {
        let index = match &law {
            DirectionLaw::Discrete(dist) => Some(
                WeightedIndex::new(dist.atoms().iter().map(|a| a.weight))
                    .map_err(|e| SimulationError::InvalidConfig(format!("atom weights: {e}")))?,
            ),
            DirectionLaw::Isotropic { d, intensity } => {
                if *d < 1 || *d > linalg::MAX_DIM || !(intensity.is_finite() && *intensity > 0.0) {
                    return Err(SimulationError::InvalidConfig(format!(
                        "isotropic law needs 1 <= d <= {} and positive intensity",
                        linalg::MAX_DIM
                    )));
                }
                None
            }
        };
        Ok(HyperplaneSampler { law, index })
    }

    pub fn law(&self) -> &DirectionLaw {
        &self.law
    }

    /// A direction from the spherical law: an atom chosen by weight with a
    /// fair sign, or a uniform unit vector.
    pub fn direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        match (&self.law, &self.index) {
            (DirectionLaw::Discrete(dist), Some(index)) => {
                let atom = &dist.atoms()[index.sample(rng)];
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                linalg::scale(&atom.direction, sign)
            }
            _ => random_unit_vector(self.law.d(), rng),
        }
    }

    /// Atom index drawn by weight (discrete laws only).
    fn atom<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        self.index.as_ref().map(|i| i.sample(rng))
    }

    pub fn sample<R: Rng + ?Sized>(&self, window_radius: f64, rng: &mut R) -> ProcessSample {
        let mut sample = ProcessSample {
            hyperplanes: Vec::new(),
            window_radius: 0.0,
            replicate: None,
        };
        self.extend(&mut sample, window_radius, rng);
        sample
    }

    /// Adds the hyperplanes with `window_radius < |offset| <= new_radius`,
    /// turning `sample` into a sample for the larger window.
    pub fn extend<R: Rng + ?Sized>(
        &self,
        sample: &mut ProcessSample,
        new_radius: f64,
        rng: &mut R,
    ) {
        let inner = sample.window_radius;
        let mean = 2.0 * (new_radius - inner) * self.law.intensity();
        let count = if mean > 0.0 {
            Poisson::new(mean)
                .map(|p| p.sample(rng) as usize)
                .unwrap_or(0)
        } else {
            0
        };
        for _ in 0..count {
            let normal = self.direction(rng);
            let magnitude = loop {
                let u = rng.random_range(inner..=new_radius);
                if u > inner && u >= MIN_OFFSET {
                    break u;
                }
            };
            let offset = if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            };
            sample.hyperplanes.push(Hyperplane { normal, offset });
        }
        sample.window_radius = sample.window_radius.max(new_radius);
    }
}

/// The hyperplanes of one realisation that hit `B(0, window_radius)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSample {
    pub hyperplanes: Vec<Hyperplane>,
    pub window_radius: f64,
    pub replicate: Option<u64>,
}

pub fn sample_process<R: Rng + ?Sized>(
    law: &DirectionLaw,
    window_radius: f64,
    rng: &mut R,
) -> Result<ProcessSample, SimulationError> {
    if !(window_radius.is_finite() && window_radius > 0.0) {
        return Err(SimulationError::InvalidConfig(format!(
            "window radius {window_radius}"
        )));
    }
    Ok(HyperplaneSampler::new(law.clone())?.sample(window_radius, rng))
}

/// The zero cell with the halfspaces of its facets.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCell {
    pub polytope: VPolytope,
    /// Facet halfspaces, each containing the origin in its interior.
    pub halfspaces: Vec<Halfspace>,
    pub window_radius: f64,
}

impl ZeroCell {
    pub fn dim(&self) -> usize {
        self.polytope.ambient_dim()
    }
}

/// Builds the zero cell from the nearest hyperplanes first. Once a bounded
/// cell is found, the remaining hyperplanes are visited by distance and
/// clip the cell only if they cut off a vertex; the scan stops at the first
/// hyperplane farther away than the cell's circumradius.
pub fn zero_cell(sample: &ProcessSample, d: usize) -> Result<ZeroCell, SimulationError> {
    let mut hs: Vec<Halfspace> = sample
        .hyperplanes
        .iter()
        .map(Hyperplane::halfspace_containing_origin)
        .collect();
    if hs.iter().any(|h| h.dim() != d) {
        return Err(SimulationError::InvalidConfig(
            "hyperplane dimension mismatch".into(),
        ));
    }
    hs.sort_by(|a, b| a.offset.total_cmp(&b.offset));
    let sampled = hs.len();
    // a halfspace with the same normal as a nearer one is redundant; for
    // discrete laws this leaves at most two per atom
    let mut kept: Vec<Halfspace> = Vec::with_capacity(hs.len());
    for h in hs {
        if !kept
            .iter()
            .any(|k| linalg::dot(&k.normal, &h.normal) > 1.0 - 1e-12)
        {
            kept.push(h);
        }
    }
    let hs = kept;
    let n = hs.len();
    if n <= d {
        return Err(too_small_or_unbounded(
            &hs,
            sampled,
            d,
            sample.window_radius,
        ));
    }
    let mut m = (2 * d + 2).min(n);
    let (mut facets, mut cell) = loop {
        match bounded_on_facets(&hs[..m], d) {
            Err(SimulationError::Geometry(GeometryError::Unbounded)) => {
                if m == n {
                    return Err(too_small_or_unbounded(
                        &hs,
                        sampled,
                        d,
                        sample.window_radius,
                    ));
                }
                m = (2 * m).min(n);
            }
            other => break other?,
        }
    };
    let mut rho = cell.circumradius_about_origin();
    for h in &hs[m..] {
        if h.offset > rho * (1.0 + 1e-9) {
            break;
        }
        let cuts = cell
            .vertices()
            .iter()
            .any(|v| h.slack(v) < -1e-12 * (1.0 + rho));
        if cuts {
            facets.push(h.clone());
            (facets, cell) = bounded_on_facets(&facets, d)?;
            rho = cell.circumradius_about_origin();
        }
    }
    if rho > 0.5 * sample.window_radius {
        return Err(SimulationError::WindowTooSmall {
            radius: sample.window_radius,
        });
    }
    Ok(ZeroCell {
        polytope: cell,
        halfspaces: facets,
        window_radius: sample.window_radius,
    })
}

/// Intersection of `hs`, rebuilt on the halfspaces that support a facet.
fn bounded_on_facets(
    hs: &[Halfspace],
    d: usize,
) -> Result<(Vec<Halfspace>, VPolytope), SimulationError> {
    let empty =
        || SimulationError::from(GeometryError::DegenerateInput("zero cell is empty".into()));
    let Intersection::Polytope(p) = geometry::intersect_halfspaces(hs, d)? else {
        return Err(empty());
    };
    let mut used = vec![false; hs.len()];
    for inc in p.incidence() {
        for &i in inc {
            used[i] = true;
        }
    }
    if used.iter().all(|&u| u) {
        return Ok((hs.to_vec(), p));
    }
    let facets: Vec<Halfspace> = hs
        .iter()
        .zip(&used)
        .filter(|(_, &u)| u)
        .map(|(h, _)| h.clone())
        .collect();
    match geometry::intersect_halfspaces(&facets, d)? {
        Intersection::Polytope(p) => Ok((facets, p)),
        Intersection::Empty => Err(empty()),
    }
}

/// `sampled` is the number of hyperplanes before redundant ones were
/// dropped.
fn too_small_or_unbounded(
    hs: &[Halfspace],
    sampled: usize,
    d: usize,
    radius: f64,
) -> SimulationError {
    let normals: Vec<&[f64]> = hs.iter().map(|h| h.normal.as_slice()).collect();
    if sampled > d && linalg::rank(&normals, INDEPENDENCE_TOL) < d {
        // no window can help: the sampled directions do not span
        return SimulationError::Geometry(GeometryError::Unbounded);
    }
    SimulationError::WindowTooSmall { radius }
}

/// Grows the observation window `r0, 2 r0, 4 r0, ...` until the zero cell
/// lies in the inner half of the window. Each doubling keeps the sampled
/// hyperplanes and adds an independent sample for the new annulus, so the
/// result is an exact sample of the process, not one conditioned on a small
/// zero cell.
pub fn sample_zero_cell<R: Rng + ?Sized>(
    sampler: &HyperplaneSampler,
    r0: f64,
    retry_cap: u32,
    rng: &mut R,
) -> Result<ZeroCell, SimulationError> {
    let d = sampler.law().d();
    let mut sample = sampler.sample(r0, rng);
    for attempt in 0..=retry_cap {
        match zero_cell(&sample, d) {
            Ok(cell) => return Ok(cell),
            Err(SimulationError::WindowTooSmall { .. })
            | Err(SimulationError::Geometry(GeometryError::Unbounded)) => {
                if attempt < retry_cap {
                    let grown = 2.0 * sample.window_radius;
                    sampler.extend(&mut sample, grown, rng);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Err(SimulationError::RetryCapExceeded { retries: retry_cap })
}

fn check_added(added: &[Vector], d: usize) -> Result<(), SimulationError> {
    if added.len() > d || added.iter().any(|u| u.len() != d) {
        return Err(SimulationError::DegeneratePosition);
    }
    if linalg::rank(added, INDEPENDENCE_TOL) < added.len() {
        return Err(SimulationError::DegeneratePosition);
    }
    Ok(())
}

/// The `k`-faces containing the origin of the arrangement formed by the
/// process and the hyperplanes `u^⊥` for `u` in `added` (`d - s` of them).
/// Each face is returned in the coordinates of an orthonormal basis of its
/// linear hull.
pub fn origin_k_faces(
    cell: &ZeroCell,
    added: &[Vector],
    k: usize,
) -> Result<Vec<VPolytope>, SimulationError> {
    let d = cell.dim();
    check_added(added, d)?;
    let m = added.len();
    if k == 0 || k > d || d - k > m {
        return Err(SimulationError::InvalidConfig(format!(
            "k = {k} needs 1 <= k <= {d} and at least d - k added hyperplanes"
        )));
    }
    let idx: Vec<usize> = (0..m).collect();
    let mut out = Vec::new();
    let mut err = None;
    for_each_combination(&idx, d - k, |subset| {
        if err.is_some() {
            return;
        }
        match pieces_in_section(cell, added, subset, k) {
            Ok(mut p) => out.append(&mut p),
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn section_basis(
    added: &[Vector],
    subset: &[usize],
    d: usize,
) -> Result<Vec<Vector>, SimulationError> {
    if subset.is_empty() {
        return Ok((0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                e
            })
            .collect());
    }
    let rows: Vec<&[f64]> = subset.iter().map(|&i| added[i].as_slice()).collect();
    linalg::orthogonal_complement(&rows, d, INDEPENDENCE_TOL)
        .ok_or(SimulationError::DegeneratePosition)
}

fn pieces_in_section(
    cell: &ZeroCell,
    added: &[Vector],
    subset: &[usize],
    k: usize,
) -> Result<Vec<VPolytope>, SimulationError> {
    let d = cell.dim();
    let basis = section_basis(added, subset, d)?;
    let sec = geometry::section(&cell.halfspaces, &basis)?;
    let cuts: Vec<Vector> = (0..added.len())
        .filter(|i| !subset.contains(i))
        .map(|i| linalg::coordinates(&added[i], &basis))
        .collect();
    let mut pieces = Vec::with_capacity(1 << cuts.len());
    for mask in 0..(1usize << cuts.len()) {
        let mut hs = sec.clone();
        for (b, c) in cuts.iter().enumerate() {
            let sign = if mask >> b & 1 == 1 { 1.0 } else { -1.0 };
            hs.push(Halfspace::from_raw(&linalg::scale(c, sign), 0.0)?);
        }
        match geometry::intersect_halfspaces(&hs, k)? {
            Intersection::Polytope(p) if p.dim() == k => pieces.push(p),
            _ => return Err(SimulationError::DegeneratePosition),
        }
    }
    Ok(pieces)
}

/// Both sides of the per-realisation counting identity
/// `sum_{K in C_k} L_r(K) = sum_j C(d-j, k-j) 2^{k-j} sum_{P in Z_j} L_r(P)`.
pub fn check_counting_identity(
    cell: &ZeroCell,
    added: &[Vector],
    k: usize,
    r: usize,
) -> Result<(f64, f64), SimulationError> {
    let d = cell.dim();
    if r > k {
        return Err(SimulationError::InvalidConfig(format!(
            "r = {r} exceeds k = {k}"
        )));
    }
    let pieces = origin_k_faces(cell, added, k)?;
    let lhs: f64 = pieces.iter().map(|p| geometry::face_content(p, r)).sum();
    let s = d - added.len();
    let idx: Vec<usize> = (0..added.len()).collect();
    let mut rhs = 0.0;
    for j in r.max(s)..=k {
        let coef = binomial(d - j, k - j) * 2f64.powi((k - j) as i32);
        let mut inner = 0.0;
        let mut err = None;
        for_each_combination(&idx, d - j, |subset| {
            if err.is_some() {
                return;
            }
            if j == 0 {
                // the section is the origin itself
                inner += if r == 0 { 1.0 } else { 0.0 };
                return;
            }
            let res = section_basis(added, subset, d).and_then(|basis| {
                let sec = geometry::section(&cell.halfspaces, &basis)?;
                match geometry::intersect_halfspaces(&sec, j)? {
                    Intersection::Polytope(p) => Ok(geometry::face_content(&p, r)),
                    Intersection::Empty => Err(SimulationError::DegeneratePosition),
                }
            });
            match res {
                Ok(v) => inner += v,
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        rhs += coef * inner;
    }
    Ok((lhs, rhs))
}

/// Normals of the `d` hyperplanes through a typical vertex: directions
/// drawn independently from the law and accepted with probability
/// `∇_d(u_1, ..., u_d)`, so a set of atoms is chosen with probability
/// proportional to its weight times `∇_d`.
pub fn typical_vertex_normals<R: Rng + ?Sized>(
    sampler: &HyperplaneSampler,
    rng: &mut R,
) -> Vec<Vector> {
    let d = sampler.law().d();
    loop {
        let dirs: Vec<Vector> = (0..d).map(|_| sampler.direction(rng)).collect();
        if rng.random::<f64>() < linalg::parallelepiped_volume(&dirs) {
            return dirs;
        }
    }
}

/// The face of the arrangement of the cell's hyperplanes and the
/// hyperplanes `u^⊥`, `u` in `flat` or `cuts`, that lies in the flat
/// `∩ u^⊥ (u in flat)` and has the origin as its lowest vertex in
/// `direction`. Its dimension is `cuts.len()`; it is returned in the
/// coordinates of an orthonormal basis of the flat.
///
/// With the normals from [`typical_vertex_normals`] and the flat chosen
/// uniformly among their `(d - k)`-subsets, the face is an exact sample of
/// the typical `k`-face: every vertex is the lowest vertex of exactly one
/// of its `k`-faces in each of the `C(d, k)` flats through it.
pub fn lowest_vertex_face(
    cell: &ZeroCell,
    flat: &[Vector],
    cuts: &[Vector],
    direction: &[f64],
) -> Result<VPolytope, SimulationError> {
    let d = cell.dim();
    let k = cuts.len();
    if k == 0 || flat.len() + k != d || direction.len() != d {
        return Err(SimulationError::InvalidConfig(format!(
            "need d = {d} normals with at least one cut, got {} + {k}",
            flat.len()
        )));
    }
    let all: Vec<Vector> = flat.iter().chain(cuts).cloned().collect();
    check_added(&all, d)?;
    let idx: Vec<usize> = (0..flat.len()).collect();
    let basis = section_basis(flat, &idx, d)?;
    let mut hs = geometry::section(&cell.halfspaces, &basis)?;
    let n: Vec<Vector> = cuts
        .iter()
        .map(|u| linalg::coordinates(u, &basis))
        .collect();
    // edge j of the cone {x : s_i <n_i, x> >= 0} is s_j times column j of
    // N^-1, so its height is s_j y_j with N^T y = e
    let nt: Vec<f64> = (0..k)
        .flat_map(|i| n.iter().map(move |row| row[i]))
        .collect();
    let e = linalg::coordinates(direction, &basis);
    let y =
        linalg::solve(&nt, &e, k, INDEPENDENCE_TOL).ok_or(SimulationError::DegeneratePosition)?;
    for (ni, yi) in n.iter().zip(&y) {
        if *yi == 0.0 {
            return Err(SimulationError::DegeneratePosition);
        }
        hs.push(Halfspace::from_raw(&linalg::scale(ni, -yi.signum()), 0.0)?);
    }
    match geometry::intersect_halfspaces(&hs, k)? {
        Intersection::Polytope(p) if p.dim() == k => Ok(p),
        _ => Err(SimulationError::DegeneratePosition),
    }
}

/// Which estimator produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EstimatorKind {
    /// `E(L_r L_s)(Z^(k))` from the faces through the origin after adding
    /// `d - s` hyperplanes through it.
    KFace,
    /// `E(L_r L_s)(Z)` as `E[L_r L_s / V_d](Z_0) / gamma`.
    TypicalCell,
    /// `E L_r(Z^(k))` with weight `L_k` and `h = L_r / L_k`.
    FirstMoment,
    /// Exact typical `k`-faces through a typical vertex; first moments
    /// when `s` is absent.
    LowestVertex,
}

impl EstimatorKind {
    pub fn id(self) -> &'static str {
        match self {
            EstimatorKind::KFace => "kface",
            EstimatorKind::TypicalCell => "typical-cell",
            EstimatorKind::FirstMoment => "first-moment",
            EstimatorKind::LowestVertex => "lowest-vertex",
        }
    }
}

/// One requested expectation. `s` is `None` for first moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Target {
    pub k: usize,
    pub r: usize,
    pub s: Option<usize>,
    pub estimator: EstimatorKind,
}

impl Target {
    pub fn label(&self) -> String {
        match self.s {
            Some(s) => format!("{}(k={},r={},s={})", self.estimator.id(), self.k, self.r, s),
            None => format!("{}(k={},r={})", self.estimator.id(), self.k, self.r),
        }
    }
}

/// Monte Carlo estimate with its standard error and oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSummary {
    pub target: Target,
    pub mean: f64,
    pub std_error: f64,
    pub replicates: usize,
    pub oracle_value: Option<f64>,
    pub z_score: Option<f64>,
    pub wall_time: f64,
}

impl EstimateSummary {
    pub fn from_values(
        target: Target,
        values: &[f64],
        oracle_value: Option<f64>,
        wall_time: f64,
    ) -> Self {
        let n = values.len();
        let mean = par::ordered_sum(values) / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let std_error = (var / n as f64).sqrt();
        // a spread at rounding level means the estimator is constant
        let z_score = oracle_value.and_then(|o| {
            if std_error > 1e-12 * mean.abs() {
                Some((mean - o) / std_error)
            } else if (mean - o).abs() <= 1e-9 * o.abs().max(1.0) {
                Some(0.0)
            } else {
                None
            }
        });
        EstimateSummary {
            target,
            mean,
            std_error,
            replicates: n,
            oracle_value,
            z_score,
            wall_time,
        }
    }

    /// True when the oracle value is within `z_max` standard errors.
    pub fn agrees(&self, z_max: f64) -> bool {
        matches!(self.z_score, Some(z) if z.abs() <= z_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub targets: Vec<Target>,
    pub replicates: usize,
    pub seed: u64,
    /// Initial window radius is `window_factor * d / gamma_hat`.
    pub window_factor: f64,
    pub retry_cap: u32,
    /// Atom subsets are enumerated exactly when at most this many have a
    /// nonzero parallelepiped volume; otherwise one tuple is sampled.
    pub enumeration_limit: usize,
    pub mode: ExecutionMode,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(targets: Vec<Target>, replicates: usize, seed: u64) -> Self {
        ExperimentConfig {
            targets,
            replicates,
            seed,
            window_factor: DEFAULT_WINDOW_FACTOR,
            retry_cap: DEFAULT_RETRY_CAP,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
            mode: ExecutionMode::default(),
            workers: None,
        }
    }
}

/// Every estimator applicable to the given `k` values and `(r, s)` pairs:
/// k-face estimates for `s < d`, typical-cell estimates for `k = d`,
/// lowest-vertex estimates throughout, and first moments for each `r <= k`
/// when `first_moments` is set.
pub fn standard_targets(
    d: usize,
    ks: &[usize],
    pairs: &[(usize, usize)],
    first_moments: bool,
) -> Vec<Target> {
    let mut out = Vec::new();
    for &k in ks {
        for &(r, s) in pairs {
            if r > k || s > k {
                continue;
            }
            if s < d {
                out.push(Target {
                    k,
                    r,
                    s: Some(s),
                    estimator: EstimatorKind::KFace,
                });
            }
            if k == d {
                out.push(Target {
                    k,
                    r,
                    s: Some(s),
                    estimator: EstimatorKind::TypicalCell,
                });
            }
            out.push(Target {
                k,
                r,
                s: Some(s),
                estimator: EstimatorKind::LowestVertex,
            });
        }
        if first_moments {
            for r in 0..=k {
                for estimator in [EstimatorKind::FirstMoment, EstimatorKind::LowestVertex] {
                    out.push(Target {
                        k,
                        r,
                        s: None,
                        estimator,
                    });
                }
            }
        }
    }
    out
}

fn validate_targets(d: usize, targets: &[Target]) -> Result<(), SimulationError> {
    for t in targets {
        let bad = t.k == 0
            || t.k > d
            || t.r > t.k
            || t.s.is_some_and(|s| s > t.k)
            || match t.estimator {
                EstimatorKind::KFace => t.s.is_none_or(|s| s >= d),
                EstimatorKind::TypicalCell => t.k != d || t.s.is_none(),
                EstimatorKind::FirstMoment => t.s.is_some(),
                EstimatorKind::LowestVertex => false,
            };
        if bad {
            return Err(SimulationError::InvalidConfig(format!(
                "target {} not estimable in d = {d}",
                t.label()
            )));
        }
    }
    Ok(())
}

/// Sums over the faces through the origin for one `(k, s)` group.
#[derive(Debug, Clone)]
struct GroupSums {
    /// `sum w * sum_K L_r(K)`, indexed by `r`.
    kface: Vec<f64>,
    /// `sum w * sum_K L_r(K) / L_k(K)`, indexed by `r`.
    ratio: Vec<f64>,
}

/// Exact or sampled direction tuples for one `s`.
#[derive(Debug, Clone)]
enum TupleSource {
    /// `(atom indices, (d-s)! w_T ∇(T))` over unordered subsets.
    Exact(Vec<(Vec<usize>, f64)>),
    Sampled,
}

struct Context<'a> {
    sampler: HyperplaneSampler,
    d: usize,
    gamma_hat: f64,
    gamma: f64,
    r0: f64,
    cfg: &'a ExperimentConfig,
    /// `(k, s)` groups in evaluation order.
    groups: Vec<(usize, usize)>,
    tuples: BTreeMap<usize, TupleSource>,
    need_cell_contents: bool,
    /// `k` values with lowest-vertex targets.
    vertex_ks: Vec<usize>,
}

impl Context<'_> {
    fn prefactor(&self, k: usize, s: usize) -> f64 {
        let m = self.d - s;
        self.gamma_hat.powi(m as i32) / (self.gamma * factorial(m) * binomial(self.d, k))
    }

    fn exact_tuples(&self, s: usize) -> TupleSource {
        let DirectionLaw::Discrete(dist) = self.sampler.law() else {
            return TupleSource::Sampled;
        };
        let m = self.d - s;
        let atoms = dist.atoms();
        let idx: Vec<usize> = (0..atoms.len()).collect();
        let mut out = Vec::new();
        let mut overflow = false;
        for_each_combination(&idx, m, |c| {
            if overflow {
                return;
            }
            let dirs: Vec<&[f64]> = c.iter().map(|&i| atoms[i].direction.as_slice()).collect();
            let nabla = linalg::parallelepiped_volume(&dirs);
            if nabla > INDEPENDENCE_TOL {
                if out.len() == self.cfg.enumeration_limit {
                    overflow = true;
                    return;
                }
                let w: f64 = c.iter().map(|&i| atoms[i].weight).product();
                out.push((c.to_vec(), factorial(m) * w * nabla));
            }
        });
        if overflow {
            TupleSource::Sampled
        } else {
            TupleSource::Exact(out)
        }
    }

    fn group<R: Rng + ?Sized>(
        &self,
        cell: &ZeroCell,
        k: usize,
        s: usize,
        rng: &mut R,
    ) -> Result<GroupSums, SimulationError> {
        let m = self.d - s;
        let mut sums = GroupSums {
            kface: vec![0.0; k + 1],
            ratio: vec![0.0; k + 1],
        };
        let mut add = |dirs: &[Vector], w: f64| -> Result<(), SimulationError> {
            for p in origin_k_faces(cell, dirs, k)? {
                let c = geometry::face_contents(&p);
                for r in 0..=k {
                    sums.kface[r] += w * c[r];
                    if s == k {
                        sums.ratio[r] += w * c[r] / c[k];
                    }
                }
            }
            Ok(())
        };
        match &self.tuples[&s] {
            TupleSource::Exact(list) => {
                let DirectionLaw::Discrete(dist) = self.sampler.law() else {
                    unreachable!("exact tuples only exist for discrete laws")
                };
                for (idx, w) in list {
                    let dirs: Vec<Vector> = idx
                        .iter()
                        .map(|&i| dist.atoms()[i].direction.clone())
                        .collect();
                    add(&dirs, *w)?;
                }
            }
            TupleSource::Sampled => {
                let dirs: Vec<Vector> = match self.sampler.law() {
                    DirectionLaw::Discrete(dist) => (0..m)
                        .map(|_| {
                            dist.atoms()[self.sampler.atom(rng).expect("discrete law")]
                                .direction
                                .clone()
                        })
                        .collect(),
                    DirectionLaw::Isotropic { .. } => {
                        (0..m).map(|_| self.sampler.direction(rng)).collect()
                    }
                };
                let nabla = linalg::parallelepiped_volume(&dirs);
                if nabla > INDEPENDENCE_TOL {
                    add(&dirs, nabla)?;
                }
            }
        }
        Ok(sums)
    }

    fn replicate(&self, i: usize) -> Result<Vec<f64>, SimulationError> {
        let d = self.d;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(i as u64);
        let cell = sample_zero_cell(&self.sampler, self.r0, self.cfg.retry_cap, &mut rng)?;
        let contents = if self.need_cell_contents {
            geometry::face_contents(&cell.polytope)
        } else {
            Vec::new()
        };
        let mut groups = BTreeMap::new();
        for &(k, s) in &self.groups {
            groups.insert((k, s), self.group(&cell, k, s, &mut rng)?);
        }
        let mut faces = BTreeMap::new();
        if !self.vertex_ks.is_empty() {
            let normals = typical_vertex_normals(&self.sampler, &mut rng);
            let e = random_unit_vector(d, &mut rng);
            for &k in &self.vertex_ks {
                let mut order: Vec<usize> = (0..d).collect();
                order.shuffle(&mut rng);
                let flat: Vec<Vector> =
                    order[..d - k].iter().map(|&i| normals[i].clone()).collect();
                let cuts: Vec<Vector> =
                    order[d - k..].iter().map(|&i| normals[i].clone()).collect();
                let face = lowest_vertex_face(&cell, &flat, &cuts, &e)?;
                faces.insert(k, geometry::face_contents(&face));
            }
        }
        Ok(self
            .cfg
            .targets
            .iter()
            .map(|t| match (t.estimator, t.s) {
                (EstimatorKind::TypicalCell, Some(s)) => {
                    contents[t.r] * contents[s] / (contents[d] * self.gamma)
                }
                (EstimatorKind::KFace, Some(s)) => {
                    self.prefactor(t.k, s) * groups[&(t.k, s)].kface[t.r]
                }
                (EstimatorKind::FirstMoment, _) if t.k == d => {
                    contents[t.r] / (contents[d] * self.gamma)
                }
                (EstimatorKind::FirstMoment, _) => {
                    self.prefactor(t.k, t.k) * groups[&(t.k, t.k)].ratio[t.r]
                }
                (EstimatorKind::LowestVertex, None) => faces[&t.k][t.r],
                (EstimatorKind::LowestVertex, Some(s)) => faces[&t.k][t.r] * faces[&t.k][s],
                _ => unreachable!("targets validated"),
            })
            .collect())
    }
}

/// Runs all targets of `cfg` on one set of replicates. `oracle` supplies
/// the comparison values.
pub fn run_experiment(
    law: &DirectionLaw,
    oracle: Option<&dyn MomentSource>,
    cfg: &ExperimentConfig,
) -> Result<Vec<EstimateSummary>, SimulationError> {
    let d = law.d();
    if cfg.replicates == 0 {
        return Err(SimulationError::InvalidConfig(
            "replicates must be positive".into(),
        ));
    }
    if !(cfg.window_factor.is_finite() && cfg.window_factor > 0.0) {
        return Err(SimulationError::InvalidConfig(format!(
            "window factor {}",
            cfg.window_factor
        )));
    }
    validate_targets(d, &cfg.targets)?;
    let start = Instant::now();
    let sampler = HyperplaneSampler::new(law.clone())?;
    let gamma_hat = law.intensity();
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for t in &cfg.targets {
        let g = match (t.estimator, t.s) {
            (EstimatorKind::KFace, Some(s)) => Some((t.k, s)),
            (EstimatorKind::FirstMoment, None) if t.k < d => Some((t.k, t.k)),
            _ => None,
        };
        if let Some(g) = g {
            if !groups.contains(&g) {
                groups.push(g);
            }
        }
    }
    groups.sort();
    let need_cell_contents = cfg.targets.iter().any(|t| {
        t.estimator == EstimatorKind::TypicalCell
            || (t.estimator == EstimatorKind::FirstMoment && t.k == d)
    });
    let mut vertex_ks: Vec<usize> = cfg
        .targets
        .iter()
        .filter(|t| t.estimator == EstimatorKind::LowestVertex)
        .map(|t| t.k)
        .collect();
    vertex_ks.sort_unstable();
    vertex_ks.dedup();
    let mut ctx = Context {
        sampler,
        d,
        gamma_hat,
        gamma: law.cell_intensity(),
        r0: cfg.window_factor * d as f64 / gamma_hat,
        cfg,
        groups,
        tuples: BTreeMap::new(),
        need_cell_contents,
        vertex_ks,
    };
    let ss: Vec<usize> = ctx.groups.iter().map(|g| g.1).collect();
    for s in ss {
        if !ctx.tuples.contains_key(&s) {
            let src = ctx.exact_tuples(s);
            ctx.tuples.insert(s, src);
        }
    }
    let ctx = &ctx;
    let rows = par::with_workers(cfg.mode, cfg.workers, || {
        par::map_indexed(cfg.mode, cfg.replicates, |i| ctx.replicate(i))
    });
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_, _>>()?;
    let elapsed = start.elapsed().as_secs_f64();
    cfg.targets
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            let values: Vec<f64> = rows.iter().map(|row| row[ti]).collect();
            let oracle_value = match oracle {
                Some(o) => Some(match t.s {
                    Some(s) => o.second_moment(t.k, t.r, s)?,
                    None => o.first_moment(t.k, t.r)?,
                }),
                None => None,
            };
            Ok(EstimateSummary::from_values(
                *t,
                &values,
                oracle_value,
                elapsed,
            ))
        })
        .collect()
}

/// `E(L_r L_s)(Z)` from the zero cell.
pub fn estimate_typical_cell_moment(
    law: &DirectionLaw,
    oracle: Option<&dyn MomentSource>,
    r: usize,
    s: usize,
    replicates: usize,
    seed: u64,
) -> Result<EstimateSummary, SimulationError> {
    let d = law.d();
    let target = Target {
        k: d,
        r,
        s: Some(s),
        estimator: EstimatorKind::TypicalCell,
    };
    let cfg = ExperimentConfig::new(vec![target], replicates, seed);
    Ok(run_experiment(law, oracle, &cfg)?.remove(0))
}

/// `E(L_r L_s)(Z^(k))` from the faces through the origin.
pub fn estimate_kface_moment(
    law: &DirectionLaw,
    oracle: Option<&dyn MomentSource>,
    k: usize,
    r: usize,
    s: usize,
    replicates: usize,
    seed: u64,
) -> Result<EstimateSummary, SimulationError> {
    let target = Target {
        k,
        r,
        s: Some(s),
        estimator: EstimatorKind::KFace,
    };
    let cfg = ExperimentConfig::new(vec![target], replicates, seed);
    Ok(run_experiment(law, oracle, &cfg)?.remove(0))
}
