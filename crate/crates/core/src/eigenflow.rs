//! Evolving-data pipeline: panel decomposition, oriented principal-component
//! regression, averaged variants and rolling-window tracking.
//!
//! Scaling convention: a centred `m × n` panel with thin SVD
//! `P = U₀ Σ Wᵀ` is reported as `U = √(m-1) U₀`, `√λ = σ / √(m-1)`, `V = W`,
//! so `P = U diag(√λ) Vᵀ` and `λ` are the eigenvalues of the sample
//! covariance `PᵀP / (m-1)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orient::{
    orient_eigenvectors_with, orthonormality_residual, sort_eigensystem, EigenSystem, OrientOptions,
    OrientedEigensystem,
};

/// Column means above this reject a panel flagged as centred.
pub const CENTERING_TOL: f64 = 1e-10;
/// Singular values below `RANK_TOL · σ_max` mark the panel rank deficient.
pub const RANK_TOL: f64 = 1e-12;
/// Retained `√λ` below this make the regression design singular.
pub const SINGULAR_DESIGN_TOL: f64 = 1e-12;

/// Observations in rows, features in columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    data: DMatrix<f64>,
    column_names: Vec<String>,
    centered: bool,
}

impl Panel {
    pub fn new(data: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        if column_names.len() != data.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} column names for {} columns",
                column_names.len(),
                data.ncols()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("panel contains non-finite entries".into()));
        }
        Ok(Self {
            data,
            column_names,
            centered: false,
        })
    }

    /// Panel with generated names `x0, x1, …`.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        let names = (0..data.ncols()).map(|i| format!("x{i}")).collect();
        Self::new(data, names)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn column_means(&self) -> DVector<f64> {
        let m = self.data.nrows().max(1) as f64;
        DVector::from_iterator(self.data.ncols(), self.data.column_iter().map(|c| c.sum() / m))
    }

    /// Subtracts column means; returns the centred panel and the means removed.
    pub fn centered(&self) -> (Panel, DVector<f64>) {
        let means = self.column_means();
        let mut data = self.data.clone();
        for (mut col, mean) in data.column_iter_mut().zip(means.iter()) {
            col.add_scalar_mut(-mean);
        }
        let panel = Panel {
            data,
            column_names: self.column_names.clone(),
            centered: true,
        };
        (panel, means)
    }

    /// Rows `start..start+len`.
    pub fn rows(&self, start: usize, len: usize) -> Panel {
        Panel {
            data: self.data.rows(start, len).into_owned(),
            column_names: self.column_names.clone(),
            centered: false,
        }
    }
}

/// Output of [`decompose_panel`].
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDecomposition {
    /// Factor scores, `m × n`, columns aligned with `system` eigenvectors.
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub sqrt_lambdas: DVector<f64>,
    pub system: EigenSystem,
    pub rank_deficient: bool,
}

impl PanelDecomposition {
    /// Right-multiplies both `V` and `U` by `diag(flips)`; `P` is unchanged.
    pub fn flip_columns(&mut self, flips: &[bool]) {
        let mut v = self.system.vectors().clone();
        for (c, &flip) in flips.iter().enumerate() {
            if flip {
                v.column_mut(c).neg_mut();
                self.u.column_mut(c).neg_mut();
            }
        }
        self.system = EigenSystem::new(v, self.system.values().clone()).expect("shape unchanged");
    }

    /// `U diag(√λ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.sqrt_lambdas) * self.system.vectors().transpose()
    }
}

/// Thin SVD of a centred panel. With `auto_center` the panel is centred
/// first; otherwise an uncentred panel is rejected.
pub fn decompose_panel(panel: &Panel, auto_center: bool) -> Result<PanelDecomposition> {
    let (m, n) = (panel.nrows(), panel.ncols());
    if n == 0 || m <= n {
        return Err(Error::DimensionMismatch(format!(
            "panel is {m}x{n}; decomposition needs more rows than columns"
        )));
    }
    let centered;
    let panel = if auto_center {
        centered = panel.centered().0;
        &centered
    } else {
        let worst = panel.column_means().amax();
        if worst > CENTERING_TOL {
            return Err(Error::InvalidParameter(format!(
                "panel is not centred (largest column mean {worst:.3e}); enable auto-centring"
            )));
        }
        panel
    };

    let svd = panel.data.clone().svd(true, true);
    let u0 = svd.u.expect("requested U");
    let w = svd.v_t.expect("requested Vᵀ").transpose();
    let sigma = svd.singular_values;

    let scale = ((m - 1) as f64).sqrt();
    let sqrt_lambdas = &sigma / scale;
    let lambdas = sqrt_lambdas.map(|s| s * s);
    let sigma_max = sigma.amax();
    let rank_deficient = sigma.iter().any(|&s| s < RANK_TOL * sigma_max) || sigma_max == 0.0;
    Ok(PanelDecomposition {
        u: u0 * scale,
        singular_values: sigma,
        sqrt_lambdas,
        system: EigenSystem::new(w, lambdas)?,
        rank_deficient,
    })
}

/// Source of eigendecompositions for the rolling tracker. The window index
/// is passed so wrappers can vary their behaviour per window.
pub trait PanelDecomposer: Sync {
    fn decompose(&self, window: usize, panel: &Panel) -> Result<PanelDecomposition>;
}

/// Plain [`decompose_panel`].
#[derive(Debug, Clone, Copy)]
pub struct SvdDecomposer {
    pub auto_center: bool,
}

impl Default for SvdDecomposer {
    fn default() -> Self {
        Self { auto_center: true }
    }
}

impl PanelDecomposer for SvdDecomposer {
    fn decompose(&self, _window: usize, panel: &Panel) -> Result<PanelDecomposition> {
        decompose_panel(panel, self.auto_center)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationKind {
    /// Oriented basis `R` of a single window.
    Oriented,
    /// Ensemble mean basis `V̄`; not exactly orthogonal.
    MeanBasis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub beta_hat: DVector<f64>,
    pub q: usize,
    pub signs_used: Vec<i8>,
    pub lambda_used: DVector<f64>,
    pub rotation_used: DMatrix<f64>,
    pub rotation_kind: RotationKind,
    pub residual_rms: f64,
}

/// Least squares of `y` on the first `q` columns of `U · diag(signs) · diag(√λ)`.
///
/// `u`, `signs` and `lambdas` must already be in rank order (see
/// [`sorted_scores`]). `rotation` is kept for prediction.
///
/// No correction is applied to the direction of `y`. A correction would go
/// on `y` before this call, leaving the design untouched.
pub fn fit(
    y: &DVector<f64>,
    u: &DMatrix<f64>,
    signs: &[i8],
    lambdas: &DVector<f64>,
    rotation: &DMatrix<f64>,
    q: usize,
) -> Result<RegressionModel> {
    let model = fit_design(y, u, signs, lambdas, rotation, q)?;
    let residual = orthonormality_residual(rotation);
    if residual > 1e-8 {
        return Err(Error::NonOrthonormalInput {
            residual,
            tolerance: 1e-8,
        });
    }
    Ok(model)
}

/// [`fit`] with the ensemble-average eigenvalues `λ̄` and mean basis `V̄`.
pub fn fit_averaged(
    y: &DVector<f64>,
    u: &DMatrix<f64>,
    signs: &[i8],
    lambda_bar: &DVector<f64>,
    v_bar: &DMatrix<f64>,
    q: usize,
) -> Result<RegressionModel> {
    let mut model = fit_design(y, u, signs, lambda_bar, v_bar, q)?;
    model.rotation_kind = RotationKind::MeanBasis;
    Ok(model)
}

fn fit_design(
    y: &DVector<f64>,
    u: &DMatrix<f64>,
    signs: &[i8],
    lambdas: &DVector<f64>,
    rotation: &DMatrix<f64>,
    q: usize,
) -> Result<RegressionModel> {
    let (m, n) = (u.nrows(), u.ncols());
    if y.len() != m {
        return Err(Error::DimensionMismatch(format!("y has {} entries, U has {m} rows", y.len())));
    }
    if signs.len() != n || lambdas.len() != n || rotation.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "U has {n} columns but got {} signs, {} eigenvalues, {}x{} rotation",
            signs.len(),
            lambdas.len(),
            rotation.nrows(),
            rotation.ncols()
        )));
    }
    if q == 0 || q > n {
        return Err(Error::InvalidParameter(format!("retained dimension q = {q} must be in 1..={n}")));
    }
    if m < q {
        return Err(Error::DimensionMismatch(format!("{m} observations for {q} regressors")));
    }
    let mut design = u.columns(0, q).into_owned();
    for c in 0..q {
        let root = lambdas[c].max(0.0).sqrt();
        if !(lambdas[c] > 0.0) || root < SINGULAR_DESIGN_TOL {
            return Err(Error::SingularDesign { component: c, value: root });
        }
        design.column_mut(c).scale_mut(f64::from(signs[c]) * root);
    }
    let beta_hat = least_squares(&design, y)?;
    let residual = y - &design * &beta_hat;
    let residual_rms = (residual.norm_squared() / m as f64).sqrt();
    Ok(RegressionModel {
        beta_hat,
        q,
        signs_used: signs[..q].to_vec(),
        lambda_used: lambdas.rows(0, q).into_owned(),
        rotation_used: rotation.clone(),
        rotation_kind: RotationKind::Oriented,
        residual_rms,
    })
}

/// QR least squares for a tall full-column-rank design.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    for c in 0..r.nrows() {
        if r[(c, c)].abs() <= 1e-13 * scale {
            return Err(Error::SingularDesign {
                component: c,
                value: r[(c, c)].abs(),
            });
        }
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign { component: 0, value: 0.0 })
}

/// `E y = (P_out · R)[:, ..q] · β̂`.
pub fn predict(panel_out: &Panel, model: &RegressionModel) -> Result<DVector<f64>> {
    project(panel_out, &model.rotation_used, model)
}

/// `E y = (P_out · V̄)[:, ..q] · β̂`.
pub fn predict_averaged(panel_out: &Panel, v_bar: &DMatrix<f64>, model: &RegressionModel) -> Result<DVector<f64>> {
    project(panel_out, v_bar, model)
}

fn project(panel_out: &Panel, rotation: &DMatrix<f64>, model: &RegressionModel) -> Result<DVector<f64>> {
    let n = rotation.nrows();
    if panel_out.ncols() != n || rotation.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "panel has {} columns, model expects {n}",
            panel_out.ncols()
        )));
    }
    let scores = panel_out.data() * rotation.columns(0, model.q);
    Ok(scores * &model.beta_hat)
}

/// `U` columns permuted into the rank order of `oriented`.
pub fn sorted_scores(decomposition: &PanelDecomposition, oriented: &OrientedEigensystem) -> DMatrix<f64> {
    decomposition.u.select_columns(oriented.sort_indices.iter())
}

/// Decompose-free half of the pipeline: orient then regress.
pub fn fit_oriented(
    y: &DVector<f64>,
    decomposition: &PanelDecomposition,
    oriented: &OrientedEigensystem,
    q: usize,
) -> Result<RegressionModel> {
    let u = sorted_scores(decomposition, oriented);
    fit(y, &u, &oriented.signs, &oriented.eor, &oriented.vor, q)
}

/// Window length and stride over a single long panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub len: usize,
    pub stride: usize,
}

impl WindowConfig {
    /// Non-overlapping windows of `8 n` rows.
    pub fn default_for(n: usize) -> Self {
        Self {
            len: 8 * n,
            stride: 8 * n,
        }
    }
}

/// Cuts `panel` and `y` into windows; a trailing partial window is dropped.
pub fn split_windows(panel: &Panel, y: &DVector<f64>, config: WindowConfig) -> Result<Vec<(Panel, DVector<f64>)>> {
    if config.len == 0 || config.stride == 0 {
        return Err(Error::InvalidParameter("window length and stride must be positive".into()));
    }
    if y.len() != panel.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "y has {} entries, panel has {} rows",
            y.len(),
            panel.nrows()
        )));
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + config.len <= panel.nrows() {
        out.push((panel.rows(start, config.len), y.rows(start, config.len).into_owned()));
        start += config.stride;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOptions {
    /// Skip orientation to obtain the unoriented baseline: raw decomposition
    /// signs, rank order by `|λ|`.
    pub orient: bool,
    pub orient_options: OrientOptions,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            orient: true,
            orient_options: OrientOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackEntry {
    pub window: usize,
    /// Basis used for regression (oriented, or raw when orientation is off).
    pub basis: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub signs: Vec<i8>,
    /// `None` for the unoriented baseline.
    pub oriented: Option<OrientedEigensystem>,
    pub beta_hat: DVector<f64>,
    pub residual_rms: f64,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub entries: Vec<TrackEntry>,
    pub q: usize,
}

impl TrackRecord {
    /// Number of sign changes along the `β̂` series of each component.
    pub fn beta_sign_changes(&self) -> Vec<usize> {
        (0..self.q)
            .map(|c| {
                self.entries
                    .windows(2)
                    .filter(|w| (w[0].beta_hat[c] >= 0.0) != (w[1].beta_hat[c] >= 0.0))
                    .count()
            })
            .collect()
    }

    /// Oriented systems as an ensemble; fails for the unoriented baseline.
    pub fn ensemble(&self) -> Result<crate::dirstats::BasisEnsemble> {
        let members = self
            .entries
            .iter()
            .map(|e| {
                e.oriented
                    .clone()
                    .ok_or_else(|| Error::InvalidEnsemble("track was run without orientation".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        crate::dirstats::BasisEnsemble::new(members)
    }
}

/// Per window: decompose, orient, fit. Windows run in parallel; entries come
/// back in window order and the first failing window (lowest index) wins.
pub fn rolling_track(
    decomposer: &dyn PanelDecomposer,
    panels: &[Panel],
    ys: &[DVector<f64>],
    q: usize,
    opts: &TrackOptions,
) -> Result<TrackRecord> {
    if panels.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} panels but {} response vectors",
            panels.len(),
            ys.len()
        )));
    }
    if let Some(first) = panels.first() {
        let n = first.ncols();
        if let Some(w) = panels.iter().position(|p| p.ncols() != n) {
            return Err(Error::DimensionMismatch(format!("window has {} columns, expected {n}", panels[w].ncols()))
                .in_window(w));
        }
    }
    let results: Vec<Result<TrackEntry>> = panels
        .par_iter()
        .zip(ys.par_iter())
        .enumerate()
        .map(|(window, (panel, y))| track_window(decomposer, window, panel, y, q, opts).map_err(|e| e.in_window(window)))
        .collect();
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(TrackRecord { entries, q })
}

fn track_window(
    decomposer: &dyn PanelDecomposer,
    window: usize,
    panel: &Panel,
    y: &DVector<f64>,
    q: usize,
    opts: &TrackOptions,
) -> Result<TrackEntry> {
    let decomposition = decomposer.decompose(window, panel)?;
    if opts.orient {
        let oriented = orient_eigenvectors_with(&decomposition.system, &opts.orient_options)?;
        let model = fit_oriented(y, &decomposition, &oriented, q)?;
        Ok(TrackEntry {
            window,
            basis: oriented.vor.clone(),
            eigenvalues: oriented.eor.clone(),
            signs: oriented.signs.clone(),
            oriented: Some(oriented),
            beta_hat: model.beta_hat,
            residual_rms: model.residual_rms,
            rank_deficient: decomposition.rank_deficient,
        })
    } else {
        let sorted = sort_eigensystem(&decomposition.system);
        let u = decomposition.u.select_columns(sorted.indices.iter());
        let signs = vec![1_i8; sorted.indices.len()];
        let model = fit(y, &u, &signs, &sorted.values, &sorted.vectors, q)?;
        Ok(TrackEntry {
            window,
            basis: sorted.vectors,
            eigenvalues: sorted.values,
            signs,
            oriented: None,
            beta_hat: model.beta_hat,
            residual_rms: model.residual_rms,
            rank_deficient: decomposition.rank_deficient,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn known_panel() -> (Panel, DMatrix<f64>, DMatrix<f64>) {
        // Orthonormal U0 (6x3) with zero column means, V0 a rotation.
        let raw = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 1.0, 1.0, //
                -1.0, 1.0, 0.0, //
                1.0, -1.0, -1.0, //
                -1.0, -1.0, 0.0, //
                0.5, 0.0, 1.0, //
                -0.5, 0.0, -1.0,
            ],
        );
        let centered = Panel::from_matrix(raw).unwrap().centered().0;
        let u0 = centered.data().clone().qr().q();
        let v0 = crate::synthkit::random_orthonormal(3, 5);
        let data = &u0 * DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0])) * v0.transpose();
        (Panel::from_matrix(data).unwrap(), u0, v0)
    }

    #[test]
    fn exact_factorization_recovers_singular_values() {
        let (panel, _, _) = known_panel();
        let d = decompose_panel(&panel, false).unwrap();
        let mut sv: Vec<f64> = d.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        for (got, want) in sv.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!((d.reconstruct() - panel.data()).norm() / panel.data().norm() < 1e-12);
        for (l, s) in d.system.values().iter().zip(d.singular_values.iter()) {
            assert!((l - s * s / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uncentred_panel_is_rejected_unless_auto_centred() {
        let data = DMatrix::from_fn(10, 2, |i, j| (i * (j + 1)) as f64 + 3.0);
        let panel = Panel::from_matrix(data).unwrap();
        assert!(decompose_panel(&panel, false).is_err());
        assert!(decompose_panel(&panel, true).is_ok());
    }

    #[test]
    fn wide_panel_is_rejected() {
        let panel = Panel::from_matrix(DMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(decompose_panel(&panel, true), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rank_deficiency_is_flagged() {
        let data = DMatrix::from_fn(10, 3, |i, j| if j == 2 { 0.0 } else { ((i * 7 + j * 3) % 5) as f64 });
        let d = decompose_panel(&Panel::from_matrix(data).unwrap(), true).unwrap();
        assert!(d.rank_deficient);
    }

    #[test]
    fn centering_removes_means() {
        let data = DMatrix::from_fn(7, 3, |i, j| (i as f64).powi(2) + 10.0 * j as f64);
        let (c, means) = Panel::from_matrix(data).unwrap().centered();
        assert!(c.column_means().amax() < 1e-12);
        assert!(c.is_centered());
        assert!((means[1] - (91.0 / 7.0 + 10.0)).abs() < 1e-12);
    }

    #[test]
    fn singular_design_is_rejected() {
        let u = DMatrix::identity(4, 2);
        let y = DVector::zeros(4);
        let err = fit(&y, &u, &[1, 1], &DVector::from_vec(vec![1.0, 0.0]), &DMatrix::identity(2, 2), 2).unwrap_err();
        assert!(matches!(err, Error::SingularDesign { component: 1, .. }));
    }

    #[test]
    fn fit_checks_dimensions() {
        let u = DMatrix::identity(4, 2);
        let l = DVector::from_vec(vec![2.0, 1.0]);
        let r = DMatrix::identity(2, 2);
        assert!(fit(&DVector::zeros(3), &u, &[1, 1], &l, &r, 2).is_err());
        assert!(fit(&DVector::zeros(4), &u, &[1, 1], &l, &r, 3).is_err());
        assert!(fit(&DVector::zeros(4), &u, &[1, 1], &l, &r, 0).is_err());
        assert!(fit(&DVector::zeros(4), &u, &[1], &l, &r, 1).is_err());
    }

    #[test]
    fn predict_checks_width() {
        let u = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let model = fit(
            &DVector::from_vec(vec![1.0, 2.0, 3.0]),
            &u,
            &[1, 1],
            &DVector::from_vec(vec![1.0, 1.0]),
            &DMatrix::identity(2, 2),
            2,
        )
        .unwrap();
        let wrong = Panel::from_matrix(DMatrix::zeros(1, 3)).unwrap();
        assert!(matches!(predict(&wrong, &model), Err(Error::DimensionMismatch(_))));
        let one = Panel::from_matrix(DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap();
        assert_eq!(predict(&one, &model).unwrap().len(), 1);
    }

    #[test]
    fn windows_are_cut_in_order() {
        let panel = Panel::from_matrix(DMatrix::from_fn(10, 1, |i, _| i as f64)).unwrap();
        let y = DVector::from_fn(10, |i, _| i as f64);
        let w = split_windows(&panel, &y, WindowConfig { len: 4, stride: 3 }).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[2].0.data()[(0, 0)], 6.0);
        assert_eq!(w[2].1[3], 9.0);
        assert!(split_windows(&panel, &y, WindowConfig { len: 0, stride: 1 }).is_err());
        assert_eq!(WindowConfig::default_for(3), WindowConfig { len: 24, stride: 24 });
    }
}
