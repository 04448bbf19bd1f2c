use approx::assert_relative_eq;
use hyperplane_moments::geometry::{
    face_contents, face_contents_from_lattice, hausdorff_measure, intersect_halfspaces,
    parallelepiped_volume, section, Apex, FaceLattice,
};
use hyperplane_moments::linalg::{dot, orthonormal_basis};
use hyperplane_moments::zonoid::{random_rotation, random_unit_vector};
use hyperplane_moments::{Halfspace, Intersection, VPolytope};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cube(d: usize, a: f64) -> Vec<Halfspace> {
    let mut hs = Vec::new();
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut n = vec![0.0; d];
            n[i] = sign;
            hs.push(Halfspace::new(n, a).unwrap());
        }
    }
    hs
}

fn polytope(hs: &[Halfspace], d: usize) -> VPolytope {
    match intersect_halfspaces(hs, d).unwrap() {
        Intersection::Polytope(p) => p,
        Intersection::Empty => panic!("empty intersection"),
    }
}

/// A random polytope around the origin: a box cut by random halfspaces.
fn random_polytope(d: usize, cuts: usize, seed: u64) -> Vec<Halfspace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hs = cube(d, 2.0);
    for i in 0..cuts {
        let offset = 0.4 + 0.2 * i as f64 / cuts as f64 + 0.1 * (seed % 7) as f64;
        hs.push(Halfspace::new(random_unit_vector(d, &mut rng), offset).unwrap());
    }
    hs
}

fn rotate(x: &[f64], q: &[Vec<f64>]) -> Vec<f64> {
    q.iter().map(|row| dot(row, x)).collect()
}

#[test]
fn cube_face_numbers_and_contents() {
    let p = polytope(&cube(3, 0.5), 3);
    assert_eq!(FaceLattice::new(&p).f_vector(), vec![8, 12, 6, 1]);
    let l = face_contents(&p);
    assert_relative_eq!(l[0], 8.0);
    assert_relative_eq!(l[1], 12.0, max_relative = 1e-12);
    assert_relative_eq!(l[2], 6.0, max_relative = 1e-12);
    assert_relative_eq!(l[3], 1.0, max_relative = 1e-12);
}

#[test]
fn simplex_volume() {
    let mut hs: Vec<Halfspace> = (0..3)
        .map(|i| {
            let mut n = vec![0.0; 3];
            n[i] = -1.0;
            Halfspace::new(n, 0.0).unwrap()
        })
        .collect();
    hs.push(Halfspace::from_raw(&[1.0, 1.0, 1.0], 1.0).unwrap());
    let p = polytope(&hs, 3);
    assert_eq!(p.vertex_count(), 4);
    assert_relative_eq!(hausdorff_measure(&p), 1.0 / 6.0, max_relative = 1e-12);
}

#[test]
fn contradictory_halfspaces_are_empty() {
    let hs = vec![
        Halfspace::new(vec![1.0, 0.0], -1.0).unwrap(),
        Halfspace::new(vec![-1.0, 0.0], -1.0).unwrap(),
        Halfspace::new(vec![0.0, 1.0], 1.0).unwrap(),
        Halfspace::new(vec![0.0, -1.0], 1.0).unwrap(),
    ];
    assert_eq!(intersect_halfspaces(&hs, 2).unwrap(), Intersection::Empty);
}

#[test]
fn open_halfspace_set_is_unbounded() {
    let hs = vec![
        Halfspace::new(vec![1.0, 0.0], 1.0).unwrap(),
        Halfspace::new(vec![0.0, 1.0], 1.0).unwrap(),
    ];
    assert!(intersect_halfspaces(&hs, 2).is_err());
}

#[test]
fn non_unit_normals_are_rejected() {
    assert!(Halfspace::new(vec![2.0, 0.0], 1.0).is_err());
    assert!(Halfspace::new(vec![f64::NAN, 0.0], 1.0).is_err());
}

#[test]
fn section_of_cube_through_diagonal_plane() {
    // the plane x = y meets [-1,1]^3 in a sqrt(2) x 1 rectangle scaled by 2
    let basis = orthonormal_basis(&[vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], 1e-12);
    let sec = section(&cube(3, 1.0), &basis).unwrap();
    let p = polytope(&sec, 2);
    assert_relative_eq!(
        hausdorff_measure(&p),
        4.0 * 2f64.sqrt(),
        max_relative = 1e-12
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn euler_relation(d in 2usize..=4, cuts in 0usize..10, seed in any::<u64>()) {
        let p = polytope(&random_polytope(d, cuts, seed), d);
        let f = FaceLattice::new(&p).f_vector();
        prop_assert_eq!(f.len(), d + 1);
        let chi: i64 = f.iter().enumerate().map(|(i, &n)| if i % 2 == 0 { n as i64 } else { -(n as i64) }).sum();
        prop_assert_eq!(chi, 1);
    }

    #[test]
    fn contents_are_invariant_under_rigid_motions(d in 2usize..=3, cuts in 1usize..8, seed in any::<u64>()) {
        let hs = random_polytope(d, cuts, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let q = random_rotation(d, &mut rng);
        let t: Vec<f64> = random_unit_vector(d, &mut rng).iter().map(|x| 3.0 * x).collect();
        let moved: Vec<Halfspace> = hs
            .iter()
            .map(|h| {
                let n = rotate(&h.normal, &q);
                let off = h.offset + dot(&n, &t);
                Halfspace::from_raw(&n, off).unwrap()
            })
            .collect();
        let a = face_contents(&polytope(&hs, d));
        let b = face_contents(&polytope(&moved, d));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{:?} vs {:?}", a, b);
        }
    }

    #[test]
    fn pyramid_apex_choice_does_not_matter(d in 2usize..=4, cuts in 0usize..10, seed in any::<u64>()) {
        let p = polytope(&random_polytope(d, cuts, seed), d);
        let lattice = FaceLattice::new(&p);
        let a = face_contents_from_lattice(&p, &lattice, Apex::First);
        let b = face_contents_from_lattice(&p, &lattice, Apex::Last);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn facet_areas_sum_to_the_surface_measure(cuts in 0usize..10, seed in any::<u64>()) {
        // in the plane L_1 is the perimeter, which the edges must add up to
        let p = polytope(&random_polytope(2, cuts, seed), 2);
        let lattice = FaceLattice::new(&p);
        let perimeter: f64 = lattice
            .faces(1)
            .iter()
            .map(|e| {
                let (a, b) = (&p.vertices()[e[0]], &p.vertices()[e[1]]);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            })
            .sum();
        prop_assert!((face_contents(&p)[1] - perimeter).abs() <= 1e-9 * perimeter);
    }

    #[test]
    fn parallelepiped_symmetry_and_homogeneity(seed in any::<u64>(), d in 1usize..=4, lambda in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vs: Vec<Vec<f64>> = (0..d).map(|_| random_unit_vector(4, &mut rng)).collect();
        let v = parallelepiped_volume(&vs);
        prop_assert!(v >= 0.0);
        vs.reverse();
        prop_assert!((parallelepiped_volume(&vs) - v).abs() <= 1e-12);
        for x in vs[0].iter_mut() {
            *x *= -lambda;
        }
        prop_assert!((parallelepiped_volume(&vs) - lambda * v).abs() <= 1e-12 * lambda.max(1.0));
        let dup = vec![vs[0].clone(), vs[0].clone()];
        prop_assert!(parallelepiped_volume(&dup) <= 1e-12);
    }
}
