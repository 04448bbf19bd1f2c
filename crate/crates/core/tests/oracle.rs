use approx::assert_relative_eq;
use hyperplane_moments::oracle::{
    build_moment_table, cuboid_closed_form, isotropic_closed_form, stability_bounds,
    variance_bounds, variance_upper_bound, volume_variance_ratio, CuboidPrefactor, DiscreteOracle,
    IsotropicOracle, MomentSource,
};
use hyperplane_moments::special::rel_diff;
use hyperplane_moments::zonoid::random_rotation;
use hyperplane_moments::{DirectionalDistribution, ExecutionMode, OracleError};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_dist(d: usize, seed: u64) -> DirectionalDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(d.max(3)..=7);
    let intensity = rng.random_range(0.3..3.0);
    DirectionalDistribution::random(d, n, intensity, &mut rng).unwrap()
}

#[test]
fn planar_isotropic_vertex_moments() {
    let o = IsotropicOracle::new(2, 1.0).unwrap();
    assert_relative_eq!(o.first_moment(2, 0).unwrap(), 4.0, max_relative = 1e-12);
    assert_relative_eq!(
        o.second_moment(2, 0, 0).unwrap(),
        12.0 + PI * PI / 2.0,
        max_relative = 1e-12
    );
}

#[test]
fn vertex_number_mean_is_two_to_the_k() {
    for seed in 0..6 {
        let o = DiscreteOracle::new(&random_dist(2 + seed as usize % 2, seed)).unwrap();
        for k in 1..=o.d() {
            assert_relative_eq!(
                o.first_moment(k, 0).unwrap(),
                2f64.powi(k as i32),
                max_relative = 1e-12
            );
        }
    }
}

#[test]
fn cuboid_faces_are_boxes_without_vertex_variance() {
    for d in 2..=3 {
        let o = DiscreteOracle::new(&DirectionalDistribution::cuboid(d, 1.7).unwrap()).unwrap();
        for k in 1..=d {
            let t = build_moment_table(&o, k).unwrap();
            assert!(t.variance(0).abs() <= 1e-12, "Var f_0 = {}", t.variance(0));
        }
        // the typical cell is a cube of edge gamma_hat / d
        let t = build_moment_table(&o, d).unwrap();
        for r in 0..=d {
            for s in 0..=d {
                let want = cuboid_closed_form(1.7, d, r, s, CuboidPrefactor::Derived).unwrap();
                assert!(rel_diff(t.second_moments[r][s], want) <= 1e-9);
            }
        }
    }
}

#[test]
fn cuboid_volume_variance_ratio() {
    for d in 2..=4 {
        let o = DiscreteOracle::new(&DirectionalDistribution::cuboid(d, 1.0).unwrap()).unwrap();
        assert_relative_eq!(
            volume_variance_ratio(&o).unwrap(),
            2f64.powi(d as i32) - 1.0,
            max_relative = 1e-12
        );
    }
}

#[test]
fn isotropic_oracle_attains_the_upper_bound() {
    for d in 2..=4 {
        let o = IsotropicOracle::new(d, 1.0).unwrap();
        for k in 1..=d {
            let b = variance_bounds(&o, k).unwrap();
            assert!(rel_diff(b.variance, variance_upper_bound(k)) <= 1e-12 || b.upper < 1e-12);
        }
    }
}

#[test]
fn isotropic_oracle_agrees_with_closed_form() {
    for d in 1..=4 {
        let o = IsotropicOracle::new(d, 2.0).unwrap();
        for k in 1..=d {
            for r in 0..=k {
                for s in 0..=k {
                    let got = o.second_moment(k, r, s).unwrap();
                    assert!(rel_diff(got, isotropic_closed_form(2.0, d, k, r, s)) <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn fine_discretisation_approaches_isotropy() {
    let coarse =
        DiscreteOracle::new(&DirectionalDistribution::uniform_circle(20, 1.0).unwrap()).unwrap();
    let fine =
        DiscreteOracle::new(&DirectionalDistribution::uniform_circle(200, 1.0).unwrap()).unwrap();
    let exact = isotropic_closed_form(1.0, 2, 2, 2, 2);
    let e_coarse = rel_diff(coarse.second_moment(2, 2, 2).unwrap(), exact);
    let e_fine = rel_diff(fine.second_moment(2, 2, 2).unwrap(), exact);
    assert!(
        e_fine < e_coarse && e_fine < 1e-3,
        "{e_coarse} then {e_fine}"
    );
}

#[test]
fn invalid_indices_are_rejected() {
    let o = DiscreteOracle::new(&DirectionalDistribution::cuboid(2, 1.0).unwrap()).unwrap();
    assert!(matches!(
        o.second_moment(3, 0, 0),
        Err(OracleError::InvalidArguments(_))
    ));
    assert!(matches!(
        o.second_moment(0, 0, 0),
        Err(OracleError::InvalidArguments(_))
    ));
    assert!(matches!(
        o.second_moment(1, 2, 0),
        Err(OracleError::InvalidArguments(_))
    ));
}

#[test]
fn sequential_and_parallel_tables_are_identical() {
    let dist = DirectionalDistribution::isotropic_discretized(3, 40, 1.0).unwrap();
    let a = build_moment_table(
        &DiscreteOracle::with_mode(&dist, ExecutionMode::Sequential).unwrap(),
        3,
    )
    .unwrap();
    let b = build_moment_table(
        &DiscreteOracle::with_mode(&dist, ExecutionMode::Parallel).unwrap(),
        3,
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn stability_functional_bounds_are_ordered() {
    for d in 2..=4 {
        let (lo, hi) = stability_bounds(d);
        assert!(lo <= hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn second_moments_are_symmetric(d in 2usize..=3, seed in any::<u64>()) {
        let o = DiscreteOracle::new(&random_dist(d, seed)).unwrap();
        for k in 1..=d {
            for r in 0..=k {
                for s in 0..r {
                    let (a, b) = (o.second_moment(k, r, s).unwrap(), o.second_moment(k, s, r).unwrap());
                    prop_assert!(rel_diff(a, b) <= 1e-8, "k={} r={} s={}: {} vs {}", k, r, s, a, b);
                }
            }
        }
    }

    #[test]
    fn moments_scale_with_intensity(d in 2usize..=3, seed in any::<u64>(), lambda in 0.2f64..8.0) {
        let dist = random_dist(d, seed);
        let o = DiscreteOracle::new(&dist).unwrap();
        let so = DiscreteOracle::new(&dist.scaled_intensity(lambda).unwrap()).unwrap();
        for k in 1..=d {
            for r in 0..=k {
                let f = lambda.powi(-(r as i32));
                prop_assert!(rel_diff(so.first_moment(k, r).unwrap(), f * o.first_moment(k, r).unwrap()) <= 1e-9);
                for s in 0..=k {
                    let want = o.second_moment(k, r, s).unwrap() * lambda.powi(-((r + s) as i32));
                    prop_assert!(rel_diff(so.second_moment(k, r, s).unwrap(), want) <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn moments_are_rotation_invariant(d in 2usize..=3, seed in any::<u64>()) {
        let dist = random_dist(d, seed);
        let q = random_rotation(d, &mut ChaCha8Rng::seed_from_u64(seed ^ 3));
        let o = DiscreteOracle::new(&dist).unwrap();
        let ro = DiscreteOracle::new(&dist.rotated(&q).unwrap()).unwrap();
        for k in 1..=d {
            for r in 0..=k {
                for s in 0..=k {
                    prop_assert!(rel_diff(ro.second_moment(k, r, s).unwrap(), o.second_moment(k, r, s).unwrap()) <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn covariance_is_psd_and_variance_within_bounds(d in 2usize..=3, seed in any::<u64>()) {
        let o = DiscreteOracle::new(&random_dist(d, seed)).unwrap();
        for k in 1..=d {
            let t = build_moment_table(&o, k).unwrap();
            let trace: f64 = (0..=k).map(|r| t.variance(r)).sum();
            prop_assert!(t.min_covariance_eigenvalue >= -1e-8 * trace);
            prop_assert!(variance_bounds(&o, k).unwrap().within_bounds(1e-8));
        }
    }

    #[test]
    fn mean_cell_volume_is_reciprocal_intensity(d in 2usize..=3, seed in any::<u64>()) {
        let o = DiscreteOracle::new(&random_dist(d, seed)).unwrap();
        prop_assert!(rel_diff(o.first_moment(d, d).unwrap(), 1.0 / o.cell_intensity()) <= 1e-12);
    }
}
