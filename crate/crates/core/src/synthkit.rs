//! Ground-truth generators: random orthonormal bases, sign-flip injection,
//! rotated ellipsoid point clouds and vMF wobble ensembles.
//!
//! Every generator is a pure function of its seed.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dirstats::{subspace_vector, BasisEnsemble, VonMisesFisher};
use crate::eigenflow::{decompose_panel, Panel, PanelDecomposer, PanelDecomposition};
use crate::error::{Error, Result};
use crate::givens::{generate_oriented_eigenvectors, AngleMatrix};
use crate::orient::{solve_subspace_angles, OrientedEigensystem};

/// Draws per subspace before a wobble sample with a negative pivot is
/// mirrored instead of redrawn.
const WOBBLE_MAX_REDRAWS: usize = 1000;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Haar-distributed orthonormal matrix: Q of a Gaussian matrix with the
/// column signs fixed by `diag(R) > 0`.
pub fn random_orthonormal(n: usize, seed: u64) -> DMatrix<f64> {
    random_orthonormal_with(&mut rng_from_seed(seed), n)
}

pub fn random_orthonormal_with<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    crate::orient::reorthonormalize(&gaussian_matrix(rng, n, n))
}

/// Negates the columns where `mask` is `true`.
pub fn flip_columns(v: &DMatrix<f64>, mask: &[bool]) -> DMatrix<f64> {
    let mut out = v.clone();
    for (c, &flip) in mask.iter().enumerate().take(v.ncols()) {
        if flip {
            out.column_mut(c).neg_mut();
        }
    }
    out
}

pub fn random_flip_mask<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random::<bool>()).collect()
}

/// Uniformly random angle matrix with every angle in `[-max_abs, max_abs]`.
pub fn random_angles<R: Rng + ?Sized>(rng: &mut R, n: usize, max_abs: f64) -> AngleMatrix {
    let bound = max_abs.min(std::f64::consts::FRAC_PI_2);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            m[(i, j)] = rng.random_range(-bound..=bound);
        }
    }
    AngleMatrix::from_matrix(m).expect("angles in range")
}

/// Gaussian point cloud shaped like a rotated ellipsoid.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidSpec {
    /// Standard deviations along the principal axes, strictly descending.
    pub axis_lengths: Vec<f64>,
    /// Ground-truth orientation of the principal axes.
    pub rotation_theta: AngleMatrix,
    pub m: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl EllipsoidSpec {
    pub fn n(&self) -> usize {
        self.axis_lengths.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.rotation_theta.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} axis lengths with a {}x{} angle matrix",
                n,
                self.rotation_theta.dim(),
                self.rotation_theta.dim()
            )));
        }
        if self.axis_lengths.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidParameter("axis lengths must be positive".into()));
        }
        if self.axis_lengths.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidParameter("axis lengths must be strictly descending".into()));
        }
        if self.m <= n {
            return Err(Error::InvalidParameter(format!("need more than {n} observations, got {}", self.m)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter("noise sigma must be nonnegative".into()));
        }
        Ok(())
    }

    /// True principal axes `G(θ)`, columns in descending axis order.
    pub fn axes(&self) -> DMatrix<f64> {
        generate_oriented_eigenvectors(&self.rotation_theta, None).expect("validated dimension")
    }
}

/// Rows `G(θ) diag(a) z + σ ε` with `z, ε ~ N(0, I)`, then column-centred.
pub fn ellipsoid_cloud(cloud: &EllipsoidSpec) -> Result<Panel> {
    cloud.validate()?;
    let n = cloud.n();
    let mut rng = rng_from_seed(cloud.seed);
    let z = gaussian_matrix(&mut rng, cloud.m, n);
    let scale = DMatrix::from_diagonal(&DVector::from_column_slice(&cloud.axis_lengths));
    let mut data = z * scale * cloud.axes().transpose();
    if cloud.noise_sigma > 0.0 {
        data += gaussian_matrix(&mut rng, cloud.m, n) * cloud.noise_sigma;
    }
    Ok(Panel::from_matrix(data)?.centered().0)
}

/// Panels plus responses `y = P G(θ) w + noise` for each window, every window
/// drawn with its own seed.
pub fn regression_stream(
    cloud: &EllipsoidSpec,
    windows: usize,
    factor_weights: &[f64],
    y_noise: f64,
) -> Result<(Vec<Panel>, Vec<DVector<f64>>)> {
    cloud.validate()?;
    if factor_weights.len() != cloud.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} factor weights for dimension {}",
            factor_weights.len(),
            cloud.n()
        )));
    }
    let weights = cloud.axes() * DVector::from_column_slice(factor_weights);
    let mut panels = Vec::with_capacity(windows);
    let mut ys = Vec::with_capacity(windows);
    for w in 0..windows {
        let window_spec = EllipsoidSpec {
            seed: cloud.seed.wrapping_add(w as u64 * 0x9E37_79B9),
            ..cloud.clone()
        };
        let panel = ellipsoid_cloud(&window_spec)?;
        let mut rng = rng_from_seed(window_spec.seed ^ 0x5DEE_CE66);
        let noise = DVector::from_fn(cloud.m, |_, _| rng.sample::<f64, _>(StandardNormal) * y_noise);
        ys.push(panel.data() * &weights + noise);
        panels.push(panel);
    }
    Ok((panels, ys))
}

/// SVD whose eigenvector signs are scrambled per window: a seeded random
/// subset of columns of both `V` and `U` is negated. `P = U Λ^{1/2} Vᵀ` is
/// preserved, so any sign-consistent consumer must be unaffected.
#[derive(Debug, Clone, Copy)]
pub struct FlippingDecomposer {
    pub seed: u64,
    pub auto_center: bool,
}

impl FlippingDecomposer {
    pub fn new(seed: u64) -> Self {
        Self { seed, auto_center: true }
    }

    pub fn mask(&self, window: usize, n: usize) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(window as u64);
        random_flip_mask(&mut rng, n)
    }
}

impl PanelDecomposer for FlippingDecomposer {
    fn decompose(&self, window: usize, panel: &Panel) -> Result<PanelDecomposition> {
        let mut d = decompose_panel(panel, self.auto_center)?;
        let mask = self.mask(window, panel.ncols());
        d.flip_columns(&mask);
        Ok(d)
    }
}

/// `count` oriented bases scattered around `G(θ̄)`.
///
/// For each member and each subspace `k` with sphere dimension `n - k ≥ 2`,
/// a subspace vector is drawn from `vMF(x̄_k, κ)` where `x̄_k` is the subspace
/// vector of `θ̄`, and row `k` of the member's angles is solved from it. The
/// subspace vectors seen by dispersion estimation are therefore exactly the
/// vMF draws. Draws with a negative pivot (outside the representable
/// hemisphere) are redrawn. `κ = ∞` returns copies of `G(θ̄)`.
///
/// Eigenvalues are set to `n, n-1, …, 1`.
pub fn wobble_ensemble(theta_bar: &AngleMatrix, kappa: f64, count: usize, seed: u64) -> Result<BasisEnsemble> {
    let n = theta_bar.dim();
    if !(kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!("concentration must be >= 0, got {kappa}")));
    }
    if count == 0 || n == 0 {
        return Err(Error::InvalidEnsemble("wobble ensemble needs at least one member and dimension".into()));
    }
    let eigenvalues = DVector::from_fn(n, |i, _| (n - i) as f64);
    if kappa.is_infinite() {
        let member = OrientedEigensystem::from_angles(theta_bar.clone(), eigenvalues)?;
        return BasisEnsemble::new(vec![member; count]);
    }

    let mut samplers = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n.saturating_sub(1) {
        let mean = subspace_vector(theta_bar, k)?;
        samplers.push(VonMisesFisher::new(mean, kappa)?);
    }

    let mut rng = rng_from_seed(seed);
    let mut members = Vec::with_capacity(count);
    for _ in 0..count {
        let mut angles = DMatrix::zeros(n, n);
        for (k, sampler) in samplers.iter().enumerate() {
            let mut x = sampler.sample(&mut rng);
            let mut redraws = 0;
            while x[0] < 0.0 && redraws < WOBBLE_MAX_REDRAWS {
                x = sampler.sample(&mut rng);
                redraws += 1;
            }
            x[0] = x[0].abs();
            let mut column = vec![0.0; n];
            column[k..].copy_from_slice(x.as_slice());
            for (offset, a) in solve_subspace_angles(&column, k)?.into_iter().enumerate() {
                angles[(k, k + 1 + offset)] = a;
            }
        }
        let theta = AngleMatrix::from_matrix(angles)?;
        members.push(OrientedEigensystem::from_angles(theta, eigenvalues.clone())?);
    }
    BasisEnsemble::new(members)
}
