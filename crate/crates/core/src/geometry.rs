//! Convex polytope kernel: halfspace intersection by exhaustive vertex
//! enumeration, face lattices from active-constraint incidences, face
//! contents `L_r` and Hausdorff measures by recursive pyramid decomposition.
//!
//! Instances are small (tens of halfspaces, dimension at most four), so
//! every `d`-subset of constraints is tried and feasible solutions are kept.
//! Constraints are assumed to be in general position; numerically singular
//! subsets are skipped and coincident vertices are merged.

use std::collections::{BTreeSet, HashMap};

use itertools::Itertools;

use crate::error::GeometryError;
use crate::linalg::{self, dot, norm, orthonormal_basis};

pub type Vector = Vec<f64>;

/// Numerical tolerances of the polytope kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative pivot threshold below which a `d x d` system is singular.
    pub pivot: f64,
    /// Vertices closer than `merge * (1 + |v|)` are merged.
    pub merge: f64,
    /// A constraint is satisfied (active) within `feasibility * (1 + |x|)`.
    pub feasibility: f64,
    /// Relative threshold for affine rank decisions.
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pivot: 1e-10,
            merge: 1e-9,
            feasibility: 1e-9,
            rank: 1e-9,
        }
    }
}

/// The closed halfspace `{x : <x, normal> <= offset}` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vector,
    pub offset: f64,
}

impl Halfspace {
    /// Requires `|normal| = 1` within `1e-9`.
    pub fn new(normal: Vector, offset: f64) -> Result<Self, GeometryError> {
        let n = norm(&normal);
        if !offset.is_finite() || normal.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::InvalidArgument(
                "non-finite halfspace".into(),
            ));
        }
        if (n - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidArgument(format!(
                "halfspace normal has length {n}, expected 1"
            )));
        }
        Ok(Halfspace { normal, offset })
    }

    /// `{x : <x, a> <= b}` for any nonzero `a`, rescaled to a unit normal.
    pub fn from_raw(a: &[f64], b: f64) -> Result<Self, GeometryError> {
        let n = norm(a);
        if n == 0.0 || !n.is_finite() {
            return Err(GeometryError::InvalidArgument(
                "zero halfspace normal".into(),
            ));
        }
        Halfspace::new(a.iter().map(|x| x / n).collect(), b / n)
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn slack(&self, x: &[f64]) -> f64 {
        self.offset - dot(&self.normal, x)
    }
}

/// The hyperplane `{x : <x, normal> = offset}` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vector,
    pub offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Vector, offset: f64) -> Result<Self, GeometryError> {
        let h = Halfspace::new(normal, offset)?;
        Ok(Hyperplane {
            normal: h.normal,
            offset: h.offset,
        })
    }

    /// The closed side of the hyperplane that contains the origin.
    pub fn halfspace_containing_origin(&self) -> Halfspace {
        if self.offset >= 0.0 {
            Halfspace {
                normal: self.normal.clone(),
                offset: self.offset,
            }
        } else {
            Halfspace {
                normal: self.normal.iter().map(|x| -x).collect(),
                offset: -self.offset,
            }
        }
    }
}

/// A bounded convex polytope given by its vertices. Each vertex carries the
/// sorted indices of the constraints (from the generating halfspace list)
/// that are active at it; faces are recovered from these incidences.
#[derive(Debug, Clone, PartialEq)]
pub struct VPolytope {
    vertices: Vec<Vector>,
    incidence: Vec<Vec<usize>>,
    dim: usize,
}

impl VPolytope {
    pub fn point(p: Vector) -> Self {
        VPolytope {
            vertices: vec![p],
            incidence: vec![Vec::new()],
            dim: 0,
        }
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn incidence(&self) -> &[Vec<usize>] {
        &self.incidence
    }

    /// Affine dimension of the vertex set.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.vertices.first().map_or(0, Vec::len)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Largest Euclidean norm of a vertex.
    pub fn circumradius_about_origin(&self) -> f64 {
        self.vertices.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }

    fn subset(&self, idx: &[usize], dim: usize) -> VPolytope {
        VPolytope {
            vertices: idx.iter().map(|&i| self.vertices[i].clone()).collect(),
            incidence: idx.iter().map(|&i| self.incidence[i].clone()).collect(),
            dim,
        }
    }
}

/// Outcome of a halfspace intersection.
#[derive(Debug, Clone, PartialEq)]
pub enum Intersection {
    Empty,
    Polytope(VPolytope),
}

impl Intersection {
    pub fn into_polytope(self) -> Option<VPolytope> {
        match self {
            Intersection::Empty => None,
            Intersection::Polytope(p) => Some(p),
        }
    }
}

/// Vertex representation of the intersection of `halfspaces` in `R^d`.
pub fn intersect_halfspaces(
    halfspaces: &[Halfspace],
    d: usize,
) -> Result<Intersection, GeometryError> {
    intersect_halfspaces_with(halfspaces, d, &Tolerances::default())
}

pub fn intersect_halfspaces_with(
    halfspaces: &[Halfspace],
    d: usize,
    tol: &Tolerances,
) -> Result<Intersection, GeometryError> {
    if d == 0 || d > linalg::MAX_DIM {
        return Err(GeometryError::InvalidArgument(format!(
            "unsupported dimension {d}"
        )));
    }
    if halfspaces.is_empty() {
        return Err(GeometryError::Unbounded);
    }
    if let Some(h) = halfspaces.iter().find(|h| h.dim() != d) {
        return Err(GeometryError::InvalidArgument(format!(
            "halfspace of dimension {} in R^{d}",
            h.dim()
        )));
    }
    let normals: Vec<&[f64]> = halfspaces.iter().map(|h| h.normal.as_slice()).collect();
    let span = orthonormal_basis(&normals, tol.rank);
    if span.len() < d {
        // The polyhedron contains a line; it is either empty or unbounded.
        let reduced: Vec<Halfspace> = halfspaces
            .iter()
            .map(|h| Halfspace {
                normal: linalg::coordinates(&h.normal, &span),
                offset: h.offset,
            })
            .collect();
        return match intersect_halfspaces_with(&reduced, span.len(), tol) {
            Ok(Intersection::Empty) => Ok(Intersection::Empty),
            _ => Err(GeometryError::Unbounded),
        };
    }

    let vertices = enumerate_vertices(halfspaces, d, tol);
    if vertices.is_empty() {
        // pointed and without vertices: infeasible
        return Ok(Intersection::Empty);
    }
    if has_recession_ray(halfspaces, d, tol) {
        return Err(GeometryError::Unbounded);
    }
    let (vertices, incidence): (Vec<_>, Vec<_>) = vertices.into_iter().unzip();
    let dim = affine_dim(&vertices, tol.rank);
    Ok(Intersection::Polytope(VPolytope {
        vertices,
        incidence,
        dim,
    }))
}

fn within(h: &Halfspace, x: &[f64], tol: &Tolerances) -> bool {
    h.slack(x) >= -tol.feasibility * (1.0 + norm(x))
}

fn active(h: &Halfspace, x: &[f64], tol: &Tolerances) -> bool {
    h.slack(x).abs() <= tol.feasibility * (1.0 + norm(x))
}

fn enumerate_vertices(
    halfspaces: &[Halfspace],
    d: usize,
    tol: &Tolerances,
) -> Vec<(Vector, Vec<usize>)> {
    let mut out: Vec<(Vector, Vec<usize>)> = Vec::new();
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    for combo in (0..halfspaces.len()).combinations(d) {
        for (row, &i) in combo.iter().enumerate() {
            a[row * d..(row + 1) * d].copy_from_slice(&halfspaces[i].normal);
            b[row] = halfspaces[i].offset;
        }
        let Some(x) = linalg::solve(&a, &b, d, tol.pivot) else {
            continue;
        };
        if !halfspaces.iter().all(|h| within(h, &x, tol)) {
            continue;
        }
        let act: Vec<usize> = (0..halfspaces.len())
            .filter(|&i| active(&halfspaces[i], &x, tol))
            .collect();
        let scale = tol.merge * (1.0 + norm(&x));
        if let Some(existing) = out
            .iter_mut()
            .find(|(v, _)| linalg::norm(&linalg::sub(v, &x)) <= scale)
        {
            let merged: BTreeSet<usize> = existing.1.iter().chain(&act).copied().collect();
            existing.1 = merged.into_iter().collect();
        } else {
            out.push((x, act));
        }
    }
    out
}

/// True if some nonzero direction `y` satisfies `<n_i, y> <= 0` for all
/// constraints. Assumes the normals span `R^d`, so the recession cone is
/// pointed and any nontrivial cone has an extreme ray cut out by `d - 1`
/// constraints.
fn has_recession_ray(halfspaces: &[Halfspace], d: usize, tol: &Tolerances) -> bool {
    for combo in (0..halfspaces.len()).combinations(d - 1) {
        let rows: Vec<&[f64]> = combo
            .iter()
            .map(|&i| halfspaces[i].normal.as_slice())
            .collect();
        let Some(null) = linalg::orthogonal_complement(&rows, d, tol.rank) else {
            continue;
        };
        if null.len() != 1 {
            continue;
        }
        for sign in [1.0, -1.0] {
            let y: Vec<f64> = null[0].iter().map(|v| v * sign).collect();
            if halfspaces
                .iter()
                .all(|h| dot(&h.normal, &y) <= tol.feasibility)
            {
                return true;
            }
        }
    }
    false
}

/// Affine dimension of a point set.
pub fn affine_dim<V: AsRef<[f64]>>(points: &[V], rel_tol: f64) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let base = points[0].as_ref();
    let diffs: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|p| linalg::sub(p.as_ref(), base))
        .collect();
    orthonormal_basis(&diffs, rel_tol).len()
}

/// Faces of a polytope grouped by dimension; `levels[r]` lists the
/// vertex-index sets of the `r`-faces.
#[derive(Debug, Clone)]
pub struct FaceLattice {
    levels: Vec<Vec<Vec<usize>>>,
    children: Vec<Vec<Vec<usize>>>,
}

impl FaceLattice {
    pub fn new(p: &VPolytope) -> Self {
        Self::with_tolerances(p, &Tolerances::default())
    }

    pub fn with_tolerances(p: &VPolytope, tol: &Tolerances) -> Self {
        let m = p.dim;
        let nv = p.vertices.len();
        let mut levels: Vec<Vec<Vec<usize>>> = vec![Vec::new(); m + 1];
        levels[m] = vec![(0..nv).collect()];
        if m == 0 {
            return FaceLattice {
                levels,
                children: vec![Vec::new()],
            };
        }
        let dim_of = |set: &[usize]| {
            let pts: Vec<&[f64]> = set.iter().map(|&i| p.vertices[i].as_slice()).collect();
            affine_dim(&pts, tol.rank)
        };

        let mut by_constraint: HashMap<usize, Vec<usize>> = HashMap::new();
        for (v, act) in p.incidence.iter().enumerate() {
            for &c in act {
                by_constraint.entry(c).or_default().push(v);
            }
        }
        let mut facets: BTreeSet<Vec<usize>> = BTreeSet::new();
        for set in by_constraint.into_values() {
            if set.len() >= m && set.len() < nv && dim_of(&set) == m - 1 {
                facets.insert(set);
            }
        }
        let facets: Vec<Vec<usize>> = facets.into_iter().collect();
        levels[m - 1] = facets.clone();

        for r in (0..m.saturating_sub(1)).rev() {
            let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
            for upper in &levels[r + 1] {
                for g in &facets {
                    let inter = sorted_intersection(upper, g);
                    if inter.len() < r + 1 || inter.len() == upper.len() || found.contains(&inter) {
                        continue;
                    }
                    if dim_of(&inter) == r {
                        found.insert(inter);
                    }
                }
            }
            levels[r] = found.into_iter().collect();
        }

        let mut children = vec![Vec::new(); m + 1];
        for r in 1..=m {
            children[r] = levels[r]
                .iter()
                .map(|f| {
                    levels[r - 1]
                        .iter()
                        .enumerate()
                        .filter(|(_, g)| is_sorted_subset(g, f))
                        .map(|(i, _)| i)
                        .collect()
                })
                .collect();
        }
        FaceLattice { levels, children }
    }

    pub fn dim(&self) -> usize {
        self.levels.len() - 1
    }

    /// Vertex-index sets of the `r`-faces.
    pub fn faces(&self, r: usize) -> &[Vec<usize>] {
        self.levels.get(r).map_or(&[], |l| l.as_slice())
    }

    /// f-vector `(f_0, ..., f_m)`.
    pub fn f_vector(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn is_sorted_subset(small: &[usize], big: &[usize]) -> bool {
    sorted_intersection(small, big).len() == small.len()
}

/// Which vertex of each face serves as the apex of its pyramid
/// decomposition. Both choices give the same volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Apex {
    First,
    Last,
}

struct VolumeEval<'a> {
    p: &'a VPolytope,
    lattice: &'a FaceLattice,
    apex: Apex,
    rank_tol: f64,
    memo: Vec<Vec<Option<f64>>>,
}

impl VolumeEval<'_> {
    fn volume(&mut self, r: usize, idx: usize) -> f64 {
        if let Some(v) = self.memo[r][idx] {
            return v;
        }
        let face = &self.lattice.levels[r][idx];
        let v = match r {
            0 => 1.0,
            1 => {
                let mut best = 0.0f64;
                for (a, b) in face.iter().tuple_combinations() {
                    best = best.max(norm(&linalg::sub(
                        &self.p.vertices[*a],
                        &self.p.vertices[*b],
                    )));
                }
                best
            }
            _ => {
                let apex_idx = match self.apex {
                    Apex::First => face[0],
                    Apex::Last => face[face.len() - 1],
                };
                let apex = self.p.vertices[apex_idx].clone();
                let children = self.lattice.children[r][idx].clone();
                let mut acc = 0.0;
                for c in children {
                    let child = &self.lattice.levels[r - 1][c];
                    if child.binary_search(&apex_idx).is_ok() {
                        continue;
                    }
                    let h = distance_to_affine_hull(&apex, child, &self.p.vertices, self.rank_tol);
                    acc += h * self.volume(r - 1, c) / r as f64;
                }
                acc
            }
        };
        self.memo[r][idx] = Some(v);
        v
    }
}

fn distance_to_affine_hull(x: &[f64], set: &[usize], vertices: &[Vector], rank_tol: f64) -> f64 {
    let base = &vertices[set[0]];
    let diffs: Vec<Vec<f64>> = set[1..]
        .iter()
        .map(|&i| linalg::sub(&vertices[i], base))
        .collect();
    let basis = orthonormal_basis(&diffs, rank_tol);
    let mut res = linalg::sub(x, base);
    for b in &basis {
        let c = dot(&res, b);
        for (r, bx) in res.iter_mut().zip(b) {
            *r -= c * bx;
        }
    }
    norm(&res)
}

/// The `r`-faces of `p` as polytopes.
pub fn faces(p: &VPolytope, r: usize) -> Vec<VPolytope> {
    if r > p.dim {
        return Vec::new();
    }
    let lattice = FaceLattice::new(p);
    lattice.levels[r]
        .iter()
        .map(|set| p.subset(set, r))
        .collect()
}

/// `L_r(p)`: total `r`-dimensional Hausdorff measure of the `r`-faces.
pub fn face_content(p: &VPolytope, r: usize) -> f64 {
    if r > p.dim {
        return 0.0;
    }
    face_contents(p)[r]
}

/// `(L_0(p), ..., L_dim(p))`, sharing one face lattice.
pub fn face_contents(p: &VPolytope) -> Vec<f64> {
    let lattice = FaceLattice::new(p);
    face_contents_from_lattice(p, &lattice, Apex::First)
}

pub fn face_contents_from_lattice(p: &VPolytope, lattice: &FaceLattice, apex: Apex) -> Vec<f64> {
    let mut eval = VolumeEval {
        p,
        lattice,
        apex,
        rank_tol: Tolerances::default().rank,
        memo: lattice.levels.iter().map(|l| vec![None; l.len()]).collect(),
    };
    (0..lattice.levels.len())
        .map(|r| {
            (0..lattice.levels[r].len())
                .map(|i| eval.volume(r, i))
                .sum()
        })
        .collect()
}

/// Intrinsic-dimensional volume of `p`; a point has measure 1.
pub fn hausdorff_measure(p: &VPolytope) -> f64 {
    hausdorff_measure_with_apex(p, Apex::First)
}

pub fn hausdorff_measure_with_apex(p: &VPolytope, apex: Apex) -> f64 {
    if p.dim == 0 {
        return 1.0;
    }
    let lattice = FaceLattice::new(p);
    let mut eval = VolumeEval {
        p,
        lattice: &lattice,
        apex,
        rank_tol: Tolerances::default().rank,
        memo: lattice.levels.iter().map(|l| vec![None; l.len()]).collect(),
    };
    eval.volume(p.dim, 0)
}

/// `j`-volume of the parallelepiped spanned by `vectors`.
pub fn parallelepiped_volume<V: AsRef<[f64]>>(vectors: &[V]) -> f64 {
    linalg::parallelepiped_volume(vectors)
}

/// Restricts halfspaces to the linear subspace spanned by the orthonormal
/// `basis`, expressing them in basis coordinates with unit normals.
///
/// Halfspaces whose normal is orthogonal to the subspace are dropped when
/// they contain it and make the section empty otherwise.
pub fn section(
    halfspaces: &[Halfspace],
    basis: &[Vector],
) -> Result<Vec<Halfspace>, GeometryError> {
    section_with(halfspaces, basis, 1e-10)
}

pub fn section_with(
    halfspaces: &[Halfspace],
    basis: &[Vector],
    zero_tol: f64,
) -> Result<Vec<Halfspace>, GeometryError> {
    let mut out = Vec::with_capacity(halfspaces.len());
    for h in halfspaces {
        let c = linalg::coordinates(&h.normal, basis);
        let n = norm(&c);
        if n <= zero_tol {
            if h.offset >= 0.0 {
                continue;
            }
            return Err(GeometryError::EmptySection);
        }
        out.push(Halfspace {
            normal: c.iter().map(|x| x / n).collect(),
            offset: h.offset / n,
        });
    }
    Ok(out)
}
