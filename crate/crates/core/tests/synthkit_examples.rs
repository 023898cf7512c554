use eigenorient::synthkit::{
    ellipsoid_cloud, flip_columns, random_orthonormal, regression_stream, wobble_ensemble, EllipsoidSpec,
    FlippingDecomposer,
};
use eigenorient::{generate_oriented_eigenvectors, orient_eigenvectors, orthonormality_residual, AngleMatrix, EigenSystem};
use nalgebra::{DMatrix, DVector};

fn theta3() -> AngleMatrix {
    AngleMatrix::from_degrees(DMatrix::from_row_slice(3, 3, &[0.0, 20.0, -15.0, 0.0, 0.0, 35.0, 0.0, 0.0, 0.0])).unwrap()
}

#[test]
fn thousand_orthonormal_draws() {
    let worst = (0..1000u64)
        .map(|seed| orthonormality_residual(&random_orthonormal(1 + (seed % 12) as usize, seed)))
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn draws_are_seeded() {
    assert_eq!(random_orthonormal(5, 3), random_orthonormal(5, 3));
    assert_ne!(random_orthonormal(5, 3), random_orthonormal(5, 4));
    let s = EllipsoidSpec {
        axis_lengths: vec![3.0, 2.0, 1.0],
        rotation_theta: theta3(),
        m: 50,
        noise_sigma: 0.1,
        seed: 8,
    };
    assert_eq!(ellipsoid_cloud(&s).unwrap(), ellipsoid_cloud(&s).unwrap());
    assert_eq!(
        wobble_ensemble(&theta3(), 20.0, 10, 1).unwrap().members(),
        wobble_ensemble(&theta3(), 20.0, 10, 1).unwrap().members()
    );
    let f = FlippingDecomposer::new(5);
    assert_eq!(f.mask(7, 6), f.mask(7, 6));
}

#[test]
fn flipped_then_oriented_equals_oriented() {
    let v = random_orthonormal(6, 21);
    let l = DVector::from_vec(vec![6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
    let a = orient_eigenvectors(&EigenSystem::new(v.clone(), l.clone()).unwrap()).unwrap();
    let flipped = flip_columns(&v, &[true, false, true, true, false, false]);
    assert_eq!((&flipped + &v).column(0).amax(), 0.0);
    let b = orient_eigenvectors(&EigenSystem::new(flipped, l).unwrap()).unwrap();
    assert_eq!(a.vor, b.vor);
    assert_eq!(a.theta, b.theta);
}

#[test]
fn cloud_covariance_matches_spec() {
    let s = EllipsoidSpec {
        axis_lengths: vec![3.0, 2.0, 1.0],
        rotation_theta: theta3(),
        m: 100_000,
        noise_sigma: 0.5,
        seed: 2,
    };
    let p = ellipsoid_cloud(&s).unwrap();
    assert!(p.is_centered());
    assert!(p.column_means().amax() < 1e-10);
    let cov = p.data().transpose() * p.data() / (s.m as f64 - 1.0);
    let g = generate_oriented_eigenvectors(&s.rotation_theta, None).unwrap();
    let expected = &g * DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 4.0, 1.0])) * g.transpose()
        + DMatrix::identity(3, 3) * 0.25;
    assert!((cov - expected).amax() < 0.1);
}

#[test]
fn invalid_specs_are_rejected() {
    let good = EllipsoidSpec {
        axis_lengths: vec![3.0, 2.0, 1.0],
        rotation_theta: theta3(),
        m: 10,
        noise_sigma: 0.0,
        seed: 0,
    };
    assert!(good.validate().is_ok());
    for bad in [
        EllipsoidSpec { axis_lengths: vec![3.0, 3.0, 1.0], ..good.clone() },
        EllipsoidSpec { axis_lengths: vec![3.0, 2.0, -1.0], ..good.clone() },
        EllipsoidSpec { m: 3, ..good.clone() },
        EllipsoidSpec { noise_sigma: -1.0, ..good.clone() },
        EllipsoidSpec { rotation_theta: AngleMatrix::zeros(4), ..good.clone() },
    ] {
        assert!(ellipsoid_cloud(&bad).is_err());
    }
    assert!(regression_stream(&good, 2, &[1.0], 0.0).is_err());
}

#[test]
fn wobble_members_are_valid_oriented_bases() {
    let ens = wobble_ensemble(&theta3(), 5.0, 200, 4).unwrap();
    assert_eq!(ens.len(), 200);
    for m in ens.members() {
        assert!(m.residual() < 1e-9);
        assert!(m.signs.iter().all(|&s| s == 1));
        // Re-orienting a member reproduces its angles.
        let again = orient_eigenvectors(&EigenSystem::new(m.vor.clone(), m.eor.clone()).unwrap()).unwrap();
        assert!(again.theta.max_abs_diff(&m.theta) < 1e-9);
    }
}

#[test]
fn unbounded_concentration_copies_the_mean() {
    let ens = wobble_ensemble(&theta3(), f64::INFINITY, 4, 0).unwrap();
    let g = generate_oriented_eigenvectors(&theta3(), None).unwrap();
    assert!(ens.members().iter().all(|m| (m.vor.clone() - &g).amax() < 1e-15));
    assert!(wobble_ensemble(&theta3(), -1.0, 4, 0).is_err());
}
