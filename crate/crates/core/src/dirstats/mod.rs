//! Directional statistics over sequences of oriented eigenbases.
//!
//! Location is summarised by the mean eigenbasis `V̄` (column-normalised sum
//! of the oriented bases) and its polar form `θ̄`. Dispersion is measured per
//! descending subspace: subspace `k` contributes the unit vector formed by
//! rows `k..n` of column `k` of `R_k = G(θ, k)`, which lives in `R^{n-k}`.

mod vmf;

pub use vmf::{bessel_ratio, kappa_approx, kappa_mle, ln_bessel_i, vmf_sample, VonMisesFisher, KAPPA_MAX};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::givens::{build_subspace_rotation, AngleMatrix};
use crate::orient::{orient_basis, OrientOptions, OrientedEigensystem};

/// Resultant norms below this leave the mean direction undefined.
pub const RESULTANT_FLOOR: f64 = 1e-12;
const UNIT_NORM_TOL: f64 = 1e-8;

/// Ordered sequence of oriented eigensystems of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisEnsemble {
    members: Vec<OrientedEigensystem>,
    labels: Option<Vec<String>>,
}

impl BasisEnsemble {
    pub fn new(members: Vec<OrientedEigensystem>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidEnsemble("ensemble is empty".into()));
        };
        let n = first.dim();
        if let Some((i, m)) = members.iter().enumerate().find(|(_, m)| m.dim() != n) {
            return Err(Error::InvalidEnsemble(format!(
                "member {i} has dimension {}, expected {n}",
                m.dim()
            )));
        }
        Ok(Self { members, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.members.len() {
            return Err(Error::InvalidEnsemble(format!(
                "{} labels for {} members",
                labels.len(),
                self.members.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn members(&self) -> &[OrientedEigensystem] {
        &self.members
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanDirection {
    pub direction: DVector<f64>,
    /// `‖x_S‖`, the length of the vector sum.
    pub resultant_norm: f64,
}

/// Unit-normalised vector sum of an ensemble of unit vectors.
pub fn mean_direction(vectors: &[DVector<f64>]) -> Result<MeanDirection> {
    let Some(first) = vectors.first() else {
        return Err(Error::InvalidParameter("mean direction of an empty list".into()));
    };
    let d = first.len();
    let mut sum = DVector::zeros(d);
    for (i, x) in vectors.iter().enumerate() {
        if x.len() != d {
            return Err(Error::DimensionMismatch(format!("vector {i} has length {}, expected {d}", x.len())));
        }
        if (x.norm() - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidParameter(format!("vector {i} is not unit norm")));
        }
        sum += x;
    }
    let norm = sum.norm();
    if norm < RESULTANT_FLOOR {
        return Err(Error::UndefinedMeanDirection { norm });
    }
    Ok(MeanDirection {
        direction: sum / norm,
        resultant_norm: norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanBasisOptions {
    /// Largest accepted `max |Q - V̄|` where `Q` is the polar factor of `V̄`.
    pub correction_tol: f64,
    pub orient: OrientOptions,
}

impl Default for MeanBasisOptions {
    fn default() -> Self {
        Self {
            correction_tol: 0.1,
            orient: OrientOptions::default(),
        }
    }
}

/// Location summary of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanBasisReport {
    /// Column-normalised sum of the oriented bases.
    pub v_bar: DMatrix<f64>,
    /// Polar form of the orthogonal factor of `V̄`.
    pub theta_bar: AngleMatrix,
    /// Reflection signs found when orienting the orthogonal factor; all `+1`
    /// for any reasonable ensemble.
    pub signs_bar: Vec<i8>,
    /// Arithmetic mean of the sorted eigenvalues.
    pub lambda_bar: DVector<f64>,
    /// Sample covariance of the sorted eigenvalues (zero for one member).
    pub lambda_cov: DMatrix<f64>,
    /// `‖v_{S,k}‖` per column.
    pub resultant_norms: DVector<f64>,
    /// `max |Q - V̄|` applied before extracting `θ̄`.
    pub polar_correction: f64,
}

pub fn mean_eigenbasis(ensemble: &BasisEnsemble) -> Result<MeanBasisReport> {
    mean_eigenbasis_with(ensemble, &MeanBasisOptions::default())
}

pub fn mean_eigenbasis_with(ensemble: &BasisEnsemble, opts: &MeanBasisOptions) -> Result<MeanBasisReport> {
    let n = ensemble.dim();
    let count = ensemble.len() as f64;

    let mut v_sum = DMatrix::zeros(n, n);
    let mut lambda_sum = DVector::zeros(n);
    for m in ensemble.members() {
        v_sum += &m.vor;
        lambda_sum += &m.eor;
    }
    let mut v_bar = v_sum;
    let mut resultant_norms = DVector::zeros(n);
    for (k, mut col) in v_bar.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm < RESULTANT_FLOOR {
            return Err(Error::UndefinedMeanDirection { norm });
        }
        resultant_norms[k] = norm;
        col /= norm;
    }
    let lambda_bar = lambda_sum / count;

    let mut lambda_cov = DMatrix::zeros(n, n);
    if ensemble.len() > 1 {
        for m in ensemble.members() {
            let dev = &m.eor - &lambda_bar;
            lambda_cov += &dev * dev.transpose();
        }
        lambda_cov /= count - 1.0;
    }

    let polar = polar_factor(&v_bar);
    let polar_correction = (&polar - &v_bar).amax();
    if polar_correction > opts.correction_tol {
        return Err(Error::NonOrthogonalMean {
            correction: polar_correction,
            tolerance: opts.correction_tol,
        });
    }
    let (signs_bar, theta_bar, _) = orient_basis(&polar, &opts.orient)?;

    Ok(MeanBasisReport {
        v_bar,
        theta_bar,
        signs_bar,
        lambda_bar,
        lambda_cov,
        resultant_norms,
        polar_correction,
    })
}

/// Orthogonal factor `U Wᵀ` of the polar decomposition, from the SVD
/// `M = U Σ Wᵀ`.
pub fn polar_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    u * v_t
}

/// Subspace vectors `x_k[i]`: rows `k..n` of column `k` of `G(θ[i], k)`.
pub fn subspace_vectors(ensemble: &BasisEnsemble, k: usize) -> Result<Vec<DVector<f64>>> {
    let n = ensemble.dim();
    if k >= n {
        return Err(Error::SubspaceOutOfRange { n, k });
    }
    ensemble
        .members()
        .iter()
        .map(|m| subspace_vector(&m.theta, k))
        .collect()
}

pub(crate) fn subspace_vector(theta: &AngleMatrix, k: usize) -> Result<DVector<f64>> {
    let rk = build_subspace_rotation(theta, k)?;
    Ok(rk.view((k, k), (theta.dim() - k, 1)).column(0).into_owned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DispersionOptions {
    /// Refine the closed-form concentration estimate by Newton iteration on
    /// `A_d(κ) = r̄`.
    pub refine: bool,
}

/// Per-subspace dispersion of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    /// Mean resultant length per subspace, in `[0, 1]`.
    pub r_bar: DVector<f64>,
    pub circular_variance: DVector<f64>,
    /// vMF concentration per subspace; [`KAPPA_MAX`] where `r̄ = 1`.
    pub kappa_basis: DVector<f64>,
    pub kappa_capped: Vec<bool>,
    /// Dimension `n - k` of each subspace sphere.
    pub dims: Vec<usize>,
    pub counts: Vec<usize>,
}

pub fn dispersion(ensemble: &BasisEnsemble) -> Result<DispersionReport> {
    dispersion_with(ensemble, &DispersionOptions::default())
}

pub fn dispersion_with(ensemble: &BasisEnsemble, opts: &DispersionOptions) -> Result<DispersionReport> {
    if ensemble.len() < 2 {
        return Err(Error::InvalidEnsemble(format!(
            "dispersion needs at least 2 members, got {}",
            ensemble.len()
        )));
    }
    let n = ensemble.dim();
    let count = ensemble.len();
    let mut r_bar = DVector::zeros(n);
    let mut kappa_basis = DVector::zeros(n);
    let mut kappa_capped = vec![false; n];
    let mut dims = Vec::with_capacity(n);
    for k in 0..n {
        let d = n - k;
        dims.push(d);
        let xs = subspace_vectors(ensemble, k)?;
        let sum = xs.iter().fold(DVector::zeros(d), |acc, x| acc + x);
        let norm = sum.norm();
        if norm < RESULTANT_FLOOR {
            return Err(Error::DegenerateEnsemble { subspace: k, norm });
        }
        let r = (norm / count as f64).clamp(0.0, 1.0);
        r_bar[k] = r;
        let (kappa, capped) = if d < 2 {
            (KAPPA_MAX, true)
        } else if opts.refine {
            kappa_mle(r, d)
        } else {
            let kappa = kappa_approx(r, d);
            (kappa, kappa >= KAPPA_MAX)
        };
        kappa_basis[k] = kappa;
        kappa_capped[k] = capped;
    }
    let circular_variance = r_bar.map(|r| 1.0 - r);
    Ok(DispersionReport {
        r_bar,
        circular_variance,
        kappa_basis,
        kappa_capped,
        dims,
        counts: vec![count; n],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::givens::generate_oriented_eigenvectors;

    fn theta3(a: f64, b: f64, c: f64) -> AngleMatrix {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = a;
        m[(0, 2)] = b;
        m[(1, 2)] = c;
        AngleMatrix::from_matrix(m).unwrap()
    }

    fn member(theta: AngleMatrix) -> OrientedEigensystem {
        let n = theta.dim();
        OrientedEigensystem::from_angles(theta, DVector::from_fn(n, |i, _| (n - i) as f64)).unwrap()
    }

    #[test]
    fn mean_of_copies() {
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let m = mean_direction(&vec![e1.clone(); 5]).unwrap();
        assert_eq!(m.direction, e1);
        assert_eq!(m.resultant_norm, 5.0);
    }

    #[test]
    fn antipodal_mean_is_undefined() {
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let err = mean_direction(&[e1.clone(), -e1]).unwrap_err();
        assert!(matches!(err, Error::UndefinedMeanDirection { .. }));
    }

    #[test]
    fn mean_direction_checks_inputs() {
        assert!(mean_direction(&[]).is_err());
        assert!(mean_direction(&[DVector::from_vec(vec![2.0, 0.0])]).is_err());
        let a = DVector::from_vec(vec![1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!(matches!(mean_direction(&[a, b]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn ensemble_validation() {
        assert!(BasisEnsemble::new(vec![]).is_err());
        let a = member(AngleMatrix::zeros(3));
        let b = member(AngleMatrix::zeros(2));
        assert!(BasisEnsemble::new(vec![a.clone(), b]).is_err());
        let e = BasisEnsemble::new(vec![a.clone(), a]).unwrap();
        assert!(e.clone().with_labels(vec!["x".into()]).is_err());
        assert!(e.with_labels(vec!["x".into(), "y".into()]).is_ok());
    }

    #[test]
    fn identical_members_have_their_own_mean() {
        let theta = theta3(0.3, -0.4, 0.7);
        let ens = BasisEnsemble::new(vec![member(theta.clone()); 4]).unwrap();
        let report = mean_eigenbasis(&ens).unwrap();
        let g = generate_oriented_eigenvectors(&theta, None).unwrap();
        assert!((&report.v_bar - &g).amax() < 1e-12);
        assert!(report.theta_bar.max_abs_diff(&theta) < 1e-9);
        assert!(report.signs_bar.iter().all(|&s| s == 1));
        assert!(report.lambda_cov.amax() < 1e-15);
        assert_eq!(report.lambda_bar.as_slice(), &[3.0, 2.0, 1.0]);
        assert!(report.resultant_norms.iter().all(|&r| (r - 4.0).abs() < 1e-12));
    }

    #[test]
    fn symmetric_pair_is_bisected() {
        // Rotate e1 by ±10° in the (0,1) plane.
        let alpha = 10f64.to_radians();
        let ens = BasisEnsemble::new(vec![
            member(theta3(alpha, 0.0, 0.0)),
            member(theta3(-alpha, 0.0, 0.0)),
        ])
        .unwrap();
        let report = mean_eigenbasis(&ens).unwrap();
        assert!((&report.v_bar - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
        assert!((report.resultant_norms[0] - 2.0 * alpha.cos()).abs() < 1e-12);
        assert!(report.theta_bar.max_abs_diff(&AngleMatrix::zeros(3)) < 1e-12);
    }

    #[test]
    fn eigenvalue_mean_and_covariance() {
        let t = AngleMatrix::zeros(2);
        let a = OrientedEigensystem::from_angles(t.clone(), DVector::from_vec(vec![4.0, 1.0])).unwrap();
        let b = OrientedEigensystem::from_angles(t, DVector::from_vec(vec![2.0, 3.0])).unwrap();
        let report = mean_eigenbasis(&BasisEnsemble::new(vec![a, b]).unwrap()).unwrap();
        assert_eq!(report.lambda_bar.as_slice(), &[3.0, 2.0]);
        assert_eq!(report.lambda_cov, DMatrix::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]));
    }

    #[test]
    fn wildly_spread_ensemble_is_rejected() {
        let ens = BasisEnsemble::new(vec![
            member(theta3(1.2, 0.0, 0.0)),
            member(theta3(-1.2, 0.0, 0.0)),
            member(theta3(0.0, 1.3, -1.4)),
        ])
        .unwrap();
        assert!(matches!(mean_eigenbasis(&ens), Err(Error::NonOrthogonalMean { .. })));
    }

    #[test]
    fn subspace_vectors_of_identity_are_leading_axes() {
        let ens = BasisEnsemble::new(vec![member(AngleMatrix::zeros(4)); 3]).unwrap();
        for k in 0..4 {
            for x in subspace_vectors(&ens, k).unwrap() {
                assert_eq!(x.len(), 4 - k);
                assert_eq!(x[0], 1.0);
                assert!(x.iter().skip(1).all(|&v| v == 0.0));
            }
        }
        assert!(subspace_vectors(&ens, 4).is_err());
    }

    #[test]
    fn identical_members_saturate_dispersion() {
        let ens = BasisEnsemble::new(vec![member(theta3(0.2, 0.1, -0.3)); 3]).unwrap();
        let report = dispersion(&ens).unwrap();
        for k in 0..3 {
            assert!((report.r_bar[k] - 1.0).abs() < 1e-12);
            assert!(report.circular_variance[k].abs() < 1e-12);
            assert_eq!(report.kappa_basis[k], KAPPA_MAX);
            assert!(report.kappa_capped[k]);
        }
        assert_eq!(report.dims, vec![3, 2, 1]);
        assert_eq!(report.counts, vec![3, 3, 3]);
    }

    #[test]
    fn dispersion_needs_two_members() {
        let ens = BasisEnsemble::new(vec![member(AngleMatrix::zeros(3))]).unwrap();
        assert!(matches!(dispersion(&ens), Err(Error::InvalidEnsemble(_))));
    }

    #[test]
    fn opposite_subspace_vectors_are_degenerate() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        // Subspace-1 vectors (0, ±1) cancel.
        let ens = BasisEnsemble::new(vec![member(theta3(0.0, 0.0, half_pi)), member(theta3(0.0, 0.0, -half_pi))])
            .unwrap();
        assert!(matches!(
            dispersion(&ens),
            Err(Error::DegenerateEnsemble { subspace: 1, .. })
        ));
    }

    #[test]
    fn refined_and_approximate_estimates_agree_when_concentrated() {
        let mut members = Vec::new();
        for i in 0..50 {
            let t = (i as f64 / 50.0 - 0.5) * 0.2;
            members.push(member(theta3(t, -t / 2.0, t / 3.0)));
        }
        let ens = BasisEnsemble::new(members).unwrap();
        let approx = dispersion(&ens).unwrap();
        let refined = dispersion_with(&ens, &DispersionOptions { refine: true }).unwrap();
        for k in 0..2 {
            let a = approx.kappa_basis[k];
            let b = refined.kappa_basis[k];
            assert!((a - b).abs() / b < 0.02, "k={k}: {a} vs {b}");
            assert!((bessel_ratio(approx.dims[k], b) - approx.r_bar[k]).abs() < 1e-9);
        }
    }
}
