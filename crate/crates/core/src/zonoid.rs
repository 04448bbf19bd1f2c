//! Directional distributions, associated zonotopes and their polar bodies.
//!
//! A discrete even directional distribution is stored with one direction
//! per antipodal pair, the atom weight being the mass of the whole pair.
//! Its associated zonoid has support function
//! `h(u) = (gamma_hat / 2) * sum_i w_i |<u, v_i>|`, which is the zonotope
//! `sum_i [-z_i, z_i]` with `z_i = (gamma_hat * w_i / 2) v_i`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::ZonoidError;
use crate::geometry::{self, Halfspace, Intersection, Vector};
use crate::linalg::{self, dot, norm};
use crate::special::for_each_combination;

/// Default cap on the generator count for sign-vector vertex enumeration.
pub const DEFAULT_GENERATOR_CAP: usize = 22;

const WEIGHT_SUM_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

/// One antipodal pair `{+direction, -direction}` carrying mass `weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub direction: Vector,
    pub weight: f64,
}

/// Intensity and discrete even spherical directional distribution of a
/// stationary Poisson hyperplane process.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalDistribution {
    d: usize,
    intensity: f64,
    atoms: Vec<Atom>,
}

impl DirectionalDistribution {
    /// Directions are normalised. Weights must be positive and sum to one,
    /// directions must be pairwise distinct up to sign and span `R^d`.
    pub fn new(d: usize, intensity: f64, atoms: Vec<(Vector, f64)>) -> Result<Self, ZonoidError> {
        let bad = |m: String| Err(ZonoidError::InvalidDistribution(m));
        if d == 0 || d > linalg::MAX_DIM {
            return bad(format!("dimension {d} not supported"));
        }
        if !(intensity.is_finite() && intensity > 0.0) {
            return bad(format!("intensity must be positive, got {intensity}"));
        }
        if atoms.is_empty() {
            return bad("no atoms".into());
        }
        let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
        for (i, (dir, w)) in atoms.into_iter().enumerate() {
            if dir.len() != d {
                return bad(format!(
                    "atom {i} has dimension {}, expected {d}",
                    dir.len()
                ));
            }
            let n = norm(&dir);
            if !(n.is_finite() && n > 0.0) {
                return bad(format!("atom {i} has a zero or non-finite direction"));
            }
            if !(w.is_finite() && w > 0.0) {
                return bad(format!("atom {i} has non-positive weight {w}"));
            }
            let u: Vector = dir.iter().map(|x| x / n).collect();
            if let Some(j) = out
                .iter()
                .position(|a| dot(&a.direction, &u).abs() >= 1.0 - 1e-12)
            {
                return bad(format!("atoms {j} and {i} are equal or antipodal"));
            }
            out.push(Atom {
                direction: u,
                weight: w,
            });
        }
        let total: f64 = out.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return bad(format!("weights sum to {total}, expected 1"));
        }
        let dirs: Vec<&[f64]> = out.iter().map(|a| a.direction.as_slice()).collect();
        if linalg::rank(&dirs, RANK_TOL) < d {
            return bad("directions do not span the space".into());
        }
        Ok(DirectionalDistribution {
            d,
            intensity,
            atoms: out,
        })
    }

    /// Equal weights on `±e_1, ..., ±e_d`.
    pub fn cuboid(d: usize, intensity: f64) -> Result<Self, ZonoidError> {
        let atoms = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                (e, 1.0 / d as f64)
            })
            .collect();
        Self::new(d, intensity, atoms)
    }

    /// `n` equally weighted directions at angles `pi * i / n` in the plane.
    pub fn uniform_circle(n: usize, intensity: f64) -> Result<Self, ZonoidError> {
        let atoms = (0..n)
            .map(|i| {
                let t = PI * i as f64 / n as f64;
                (vec![t.cos(), t.sin()], 1.0 / n as f64)
            })
            .collect();
        Self::new(2, intensity, atoms)
    }

    /// `n` equally weighted, nearly uniform directions on the upper
    /// hemisphere of `S^2`: equal-area heights with golden-angle azimuths.
    pub fn near_uniform_hemisphere(n: usize, intensity: f64) -> Result<Self, ZonoidError> {
        let golden = PI * (3.0 - 5f64.sqrt());
        let atoms = (0..n)
            .map(|i| {
                let z = (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                (vec![r * phi.cos(), r * phi.sin(), z], 1.0 / n as f64)
            })
            .collect();
        Self::new(3, intensity, atoms)
    }

    /// Equal-weight discretisation of the rotation invariant distribution
    /// (`d = 2` uniform half-circle, `d = 3` near uniform hemisphere).
    pub fn isotropic_discretized(d: usize, n: usize, intensity: f64) -> Result<Self, ZonoidError> {
        match d {
            2 => Self::uniform_circle(n, intensity),
            3 => Self::near_uniform_hemisphere(n, intensity),
            _ => Err(ZonoidError::InvalidDistribution(format!(
                "isotropic discretisation only available for d = 2, 3 (got {d})"
            ))),
        }
    }

    /// Random directions (Gaussian, normalised) with random weights in
    /// `[0.2, 1]` renormalised to sum one. Resamples until the directions
    /// span the space.
    pub fn random<R: Rng + ?Sized>(
        d: usize,
        n_atoms: usize,
        intensity: f64,
        rng: &mut R,
    ) -> Result<Self, ZonoidError> {
        if n_atoms < d {
            return Err(ZonoidError::InvalidDistribution(format!(
                "{n_atoms} atoms cannot span R^{d}"
            )));
        }
        loop {
            let dirs: Vec<Vector> = (0..n_atoms).map(|_| random_unit_vector(d, rng)).collect();
            let raw: Vec<f64> = (0..n_atoms).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            // push the rounding residue into the last weight
            let resid = 1.0 - weights.iter().sum::<f64>();
            *weights.last_mut().unwrap() += resid;
            if let Ok(dist) = Self::new(d, intensity, dirs.into_iter().zip(weights).collect()) {
                return Ok(dist);
            }
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Same directions, intensity multiplied by `factor`.
    pub fn scaled_intensity(&self, factor: f64) -> Result<Self, ZonoidError> {
        let mut out = self.clone();
        if !(factor.is_finite() && factor > 0.0) {
            return Err(ZonoidError::InvalidDistribution(format!(
                "bad intensity factor {factor}"
            )));
        }
        out.intensity *= factor;
        Ok(out)
    }

    /// Directions mapped by the orthogonal matrix with rows `rotation`.
    pub fn rotated(&self, rotation: &[Vector]) -> Result<Self, ZonoidError> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                (
                    rotation.iter().map(|row| dot(row, &a.direction)).collect(),
                    a.weight,
                )
            })
            .collect();
        Self::new(self.d, self.intensity, atoms)
    }
}

pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    loop {
        let v: Vector = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = norm(&v);
        if n > 1e-8 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Haar-ish random orthogonal matrix (rows), from Gram–Schmidt on Gaussian
/// vectors.
pub fn random_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Vector> {
    loop {
        let vs: Vec<Vector> = (0..d)
            .map(|_| {
                (0..d)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let q = linalg::orthonormal_basis(&vs, 1e-6);
        if q.len() == d {
            return q;
        }
    }
}

/// The centred zonotope `sum_i [-z_i, z_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    generators: Vec<Vector>,
    ambient_dim: usize,
}

/// Associated zonoid of the process: generators `(gamma_hat w_i / 2) v_i`.
pub fn associated_zonotope(dist: &DirectionalDistribution) -> Zonotope {
    let generators = dist
        .atoms
        .iter()
        .map(|a| linalg::scale(&a.direction, dist.intensity * a.weight / 2.0))
        .collect();
    Zonotope {
        generators,
        ambient_dim: dist.d,
    }
}

impl Zonotope {
    pub fn new(generators: Vec<Vector>, ambient_dim: usize) -> Self {
        debug_assert!(generators.iter().all(|g| g.len() == ambient_dim));
        Zonotope {
            generators,
            ambient_dim,
        }
    }

    pub fn generators(&self) -> &[Vector] {
        &self.generators
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Dimension of the linear hull.
    pub fn dimension(&self) -> usize {
        linalg::rank(&self.generators, RANK_TOL)
    }

    pub fn support(&self, u: &[f64]) -> f64 {
        self.generators.iter().map(|g| dot(g, u).abs()).sum()
    }

    /// Orthogonal projection onto the subspace with orthonormal `basis`,
    /// expressed in basis coordinates.
    pub fn project(&self, basis: &[Vector]) -> Zonotope {
        Zonotope {
            generators: self
                .generators
                .iter()
                .map(|g| linalg::coordinates(g, basis))
                .collect(),
            ambient_dim: basis.len(),
        }
    }

    /// `V_j = 2^j * sum over j-subsets of generators of their parallelepiped
    /// volume`.
    pub fn intrinsic_volume(&self, j: usize) -> f64 {
        assert!(
            j <= self.ambient_dim,
            "intrinsic volume index {j} exceeds dimension"
        );
        if j == 0 {
            return 1.0;
        }
        let idx: Vec<usize> = (0..self.generators.len()).collect();
        let mut acc = 0.0;
        let mut buf: Vec<&[f64]> = Vec::with_capacity(j);
        for_each_combination(&idx, j, |c| {
            buf.clear();
            buf.extend(c.iter().map(|&i| self.generators[i].as_slice()));
            acc += linalg::parallelepiped_volume(&buf);
        });
        2f64.powi(j as i32) * acc
    }

    fn nonzero_generators(&self) -> Vec<&Vector> {
        let scale = self.generators.iter().map(|g| norm(g)).fold(0.0, f64::max);
        self.generators
            .iter()
            .filter(|g| norm(g) > 1e-14 * scale)
            .collect()
    }

    fn check_full_dimensional(&self) -> Result<(), ZonoidError> {
        let rank = self.dimension();
        if rank < self.ambient_dim {
            return Err(ZonoidError::DegenerateZonotope {
                rank,
                dim: self.ambient_dim,
            });
        }
        Ok(())
    }

    /// Vertices of the zonotope. For each `(j-1)`-subset of generators the
    /// normal line they span is followed in both directions; the sign
    /// patterns of the generators orthogonal to it enumerate the vertices
    /// of the corresponding face. Non-extreme points can appear only for
    /// degenerate generator sets; they lie inside the body.
    pub fn vertices(&self, cap: usize) -> Result<Vec<Vector>, ZonoidError> {
        let gens = self.nonzero_generators();
        if gens.len() > cap {
            return Err(ZonoidError::TooManyGenerators {
                count: gens.len(),
                cap,
            });
        }
        self.check_full_dimensional()?;
        let j = self.ambient_dim;
        if j == 0 {
            return Ok(vec![Vec::new()]);
        }
        let scale: f64 = gens.iter().map(|g| norm(g)).sum();
        let mut out: Vec<Vector> = Vec::new();
        let push = |v: Vector, out: &mut Vec<Vector>| {
            if !out
                .iter()
                .any(|w| norm(&linalg::sub(w, &v)) <= 1e-10 * scale)
            {
                out.push(v);
            }
        };
        let idx: Vec<usize> = (0..gens.len()).collect();
        let mut candidates: Vec<Vector> = Vec::new();
        for_each_combination(&idx, j - 1, |subset| {
            let rows: Vec<&[f64]> = subset.iter().map(|&i| gens[i].as_slice()).collect();
            let Some(null) = linalg::orthogonal_complement(&rows, j, RANK_TOL) else {
                return;
            };
            if null.len() != 1 {
                return;
            }
            for sign in [1.0, -1.0] {
                let x: Vec<f64> = null[0].iter().map(|v| v * sign).collect();
                let mut base = vec![0.0; j];
                let mut free: Vec<usize> = Vec::new();
                for (l, g) in gens.iter().enumerate() {
                    let p = dot(&x, g);
                    if p.abs() <= 1e-12 * norm(g) {
                        free.push(l);
                    } else {
                        let s = p.signum();
                        for (b, gx) in base.iter_mut().zip(g.iter()) {
                            *b += s * gx;
                        }
                    }
                }
                for mask in 0..(1u64 << free.len()) {
                    let mut v = base.clone();
                    for (bit, &l) in free.iter().enumerate() {
                        let s = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                        for (vx, gx) in v.iter_mut().zip(gens[l].iter()) {
                            *vx += s * gx;
                        }
                    }
                    candidates.push(v);
                }
            }
        });
        if j == 1 {
            let h: f64 = gens.iter().map(|g| g[0].abs()).sum();
            candidates = vec![vec![h], vec![-h]];
        }
        for c in candidates {
            push(c, &mut out);
        }
        Ok(out)
    }

    /// Polar body `{x : <x, v> <= 1 for every vertex v}` in the zonotope's
    /// coordinates.
    pub fn polar(&self) -> Result<PolarBody, ZonoidError> {
        self.polar_with_cap(DEFAULT_GENERATOR_CAP)
    }

    pub fn polar_with_cap(&self, cap: usize) -> Result<PolarBody, ZonoidError> {
        if self.ambient_dim == 0 {
            return Err(ZonoidError::DegenerateZonotope { rank: 0, dim: 0 });
        }
        let verts = self.vertices(cap)?;
        let halfspaces = verts
            .iter()
            .map(|v| Halfspace::from_raw(v, 1.0))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PolarBody {
            halfspaces,
            dim: self.ambient_dim,
        })
    }

    /// `V_j` of the polar body, `j = ambient_dim`. Dimensions one to three
    /// use exact chamber decompositions of `{x : h(x) <= 1}`; higher
    /// dimensions go through [`Zonotope::polar`].
    pub fn polar_volume(&self) -> Result<f64, ZonoidError> {
        match self.ambient_dim {
            0 => Ok(1.0),
            1 => {
                self.check_full_dimensional()?;
                Ok(2.0 / self.support(&[1.0]))
            }
            2 => {
                self.check_full_dimensional()?;
                Ok(self.polar_area_planar())
            }
            3 => {
                self.check_full_dimensional()?;
                Ok(self.polar_volume_spatial())
            }
            _ => self.polar_volume_generic(DEFAULT_GENERATOR_CAP),
        }
    }

    /// Polar volume through vertex enumeration of the polar H-representation.
    pub fn polar_volume_generic(&self, cap: usize) -> Result<f64, ZonoidError> {
        if self.ambient_dim == 0 {
            return Ok(1.0);
        }
        self.polar_with_cap(cap)?.volume()
    }

    /// `vp = V_j(Z) V_j(Z°)` with `j = ambient_dim`; a point has `vp = 1`.
    pub fn volume_product(&self) -> Result<f64, ZonoidError> {
        if self.ambient_dim == 0 {
            return Ok(1.0);
        }
        Ok(self.intrinsic_volume(self.ambient_dim) * self.polar_volume()?)
    }

    // Sectors between consecutive lines g^⊥; on each, h is linear and the
    // polar region is a triangle.
    fn polar_area_planar(&self) -> f64 {
        let mut angles: Vec<f64> = Vec::with_capacity(2 * self.generators.len());
        for g in self.nonzero_generators() {
            let t = g[0].atan2(-g[1]);
            angles.push(t);
            angles.push(if t > 0.0 { t - PI } else { t + PI });
        }
        angles.sort_by(f64::total_cmp);
        let n = angles.len();
        let mut area = 0.0;
        for i in 0..n {
            let a = angles[i];
            let b = if i + 1 < n {
                angles[i + 1]
            } else {
                angles[0] + 2.0 * PI
            };
            let delta = b - a;
            if delta <= 0.0 {
                continue;
            }
            let ua = [a.cos(), a.sin()];
            let ub = [b.cos(), b.sin()];
            area += 0.5 * delta.sin() / (self.support(&ua) * self.support(&ub));
        }
        area
    }

    // Chambers of the great-circle arrangement {g^⊥}. Each chamber cone c
    // meets the polar body in a pyramid over the polygon c ∩ {<x, v_c> = 1}.
    // The polygon area is assembled edge by edge from signed distances of
    // the foot point v_c / |v_c|^2; every arc of every circle is an edge of
    // the two chambers on either side of it.
    fn polar_volume_spatial(&self) -> f64 {
        let gens = merge_parallel(&self.nonzero_generators());
        let m = gens.len();
        let mut total = 0.0;
        let cross = |a: &[f64], b: &[f64]| {
            [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ]
        };
        let h = |x: &[f64]| gens.iter().map(|g| dot(g, x).abs()).sum::<f64>();
        for i in 0..m {
            let zi = &gens[i];
            let frame = linalg::orthogonal_complement(&[zi.as_slice()], 3, RANK_TOL)
                .expect("nonzero generator");
            let (e1, e2) = (&frame[0], &frame[1]);
            let mut angles: Vec<f64> = Vec::with_capacity(2 * m);
            for (j, gj) in gens.iter().enumerate() {
                if j == i {
                    continue;
                }
                let c = cross(zi, gj);
                let t = dot(&c, e2).atan2(dot(&c, e1));
                angles.push(t);
                angles.push(if t > 0.0 { t - PI } else { t + PI });
            }
            angles.sort_by(f64::total_cmp);
            let n = angles.len();
            let zz = dot(zi, zi);
            for k in 0..n {
                let a = angles[k];
                let b = if k + 1 < n {
                    angles[k + 1]
                } else {
                    angles[0] + 2.0 * PI
                };
                if b - a <= 1e-15 {
                    continue;
                }
                let at = |t: f64| -> [f64; 3] {
                    let (s, c) = t.sin_cos();
                    [
                        c * e1[0] + s * e2[0],
                        c * e1[1] + s * e2[1],
                        c * e1[2] + s * e2[2],
                    ]
                };
                let ua = at(a);
                let ub = at(b);
                let mid = at(0.5 * (a + b));
                let pa = linalg::scale(&ua, 1.0 / h(&ua));
                let pb = linalg::scale(&ub, 1.0 / h(&ub));
                let edge = norm(&linalg::sub(&pa, &pb));
                let mut base = [0.0; 3];
                for (l, g) in gens.iter().enumerate() {
                    if l == i {
                        continue;
                    }
                    let s = dot(&mid, g).signum();
                    for c in 0..3 {
                        base[c] += s * g[c];
                    }
                }
                for sigma in [1.0, -1.0] {
                    let v = [
                        base[0] + sigma * zi[0],
                        base[1] + sigma * zi[1],
                        base[2] + sigma * zi[2],
                    ];
                    let vv = dot(&v, &v);
                    let zv = dot(zi, &v);
                    let w = (zz - zv * zv / vv).max(0.0).sqrt();
                    if w == 0.0 {
                        continue;
                    }
                    let signed_dist = sigma * zv / (vv * w);
                    total += edge * signed_dist / (6.0 * vv.sqrt());
                }
            }
        }
        total
    }
}

/// Sums generators that are parallel (up to sign) into one.
fn merge_parallel(gens: &[&Vector]) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::new();
    for g in gens {
        let ng = norm(g);
        if let Some(existing) = out.iter_mut().find(|e| {
            let c = dot(e, g) / (norm(e) * ng);
            c.abs() >= 1.0 - 1e-13
        }) {
            let s = dot(existing, g).signum();
            for (x, gx) in existing.iter_mut().zip(g.iter()) {
                *x += s * gx;
            }
        } else {
            out.push((*g).clone());
        }
    }
    out
}

/// Polar body of a centred zonotope, as halfspaces in the zonotope's
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarBody {
    pub halfspaces: Vec<Halfspace>,
    pub dim: usize,
}

impl PolarBody {
    pub fn volume(&self) -> Result<f64, ZonoidError> {
        match geometry::intersect_halfspaces(&self.halfspaces, self.dim)? {
            Intersection::Polytope(p) => Ok(geometry::hausdorff_measure(&p)),
            Intersection::Empty => Err(ZonoidError::DegenerateZonotope {
                rank: 0,
                dim: self.dim,
            }),
        }
    }
}
