//! Eigenvalue sorting, reflection signs and the subspace-descending loop that
//! solves `Rᵀ V S = I`.
//!
//! For each subspace `k` the working column is first reflected so its pivot
//! is nonnegative, then the Givens angles that carry the pivot axis onto the
//! column are solved bottom-up with arcsines, and the working matrix is
//! rotated back by `R_kᵀ`. Once every subspace is resolved, the oriented basis
//! is available both as `Vsort · diag(signs)` and as `G(θ)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::givens::{apply_subspace_rotation_transpose, generate_oriented_eigenvectors, AngleMatrix};

/// Tunable tolerances of the orientation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientOptions {
    /// Largest accepted `max |VᵀV - I|`.
    pub ortho_tol: f64,
    /// Running cosine products below this are treated as zero.
    pub r_floor: f64,
    /// How far `|a_j|` may exceed the running cosine product before the input
    /// is rejected instead of clamped.
    pub clamp_tol: f64,
    /// A pivot below `-pivot_tol` means the reflection step was skipped.
    pub pivot_tol: f64,
    /// Replace `V` by the Q factor of its QR decomposition (column signs kept)
    /// before validating.
    pub reorthonormalize: bool,
}

impl Default for OrientOptions {
    fn default() -> Self {
        Self {
            ortho_tol: 1e-8,
            r_floor: 1e-12,
            clamp_tol: 1e-9,
            pivot_tol: 1e-12,
            reorthonormalize: false,
        }
    }
}

/// Raw output of an eigendecomposition: columns of `vectors` are eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl EigenSystem {
    /// Checks shape and finiteness. Orthonormality is checked by
    /// [`orient_eigenvectors`], where its tolerance is configurable.
    pub fn new(vectors: DMatrix<f64>, values: DVector<f64>) -> Result<Self> {
        if !vectors.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "eigenvector matrix is {}x{}, expected square",
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        let n = vectors.nrows();
        if n == 0 {
            return Err(Error::DimensionMismatch("empty eigensystem".into()));
        }
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues for a {n}x{n} eigenvector matrix",
                values.len()
            )));
        }
        if vectors.iter().chain(values.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("eigensystem contains non-finite entries".into()));
        }
        Ok(Self { vectors, values })
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn orthonormality_residual(&self) -> f64 {
        orthonormality_residual(&self.vectors)
    }
}

/// `max |MᵀM - I|`.
pub fn orthonormality_residual(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    let n = gram.nrows();
    (gram - DMatrix::<f64>::identity(n, n)).amax()
}

/// Eigensystem reordered by descending `|λ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedEigensystem {
    pub vectors: DMatrix<f64>,
    pub values: DVector<f64>,
    /// `vectors` column `c` is input column `indices[c]`.
    pub indices: Vec<usize>,
}

/// Stable sort of the eigenpairs by descending absolute eigenvalue. Signed
/// values are kept.
pub fn sort_eigensystem(sys: &EigenSystem) -> SortedEigensystem {
    let values = sys.values();
    let mut indices: Vec<usize> = (0..sys.dim()).collect();
    indices.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    let vectors = sys.vectors().select_columns(indices.iter());
    let values = DVector::from_iterator(indices.len(), indices.iter().map(|&i| values[i]));
    SortedEigensystem {
        vectors,
        values,
        indices,
    }
}

/// Consistently oriented eigenbasis with its polar form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedEigensystem {
    /// Oriented basis `Vsort · diag(signs)`.
    pub vor: DMatrix<f64>,
    /// Signed eigenvalues ordered by descending magnitude.
    pub eor: DVector<f64>,
    pub signs: Vec<i8>,
    pub theta: AngleMatrix,
    pub sort_indices: Vec<usize>,
}

impl OrientedEigensystem {
    pub fn dim(&self) -> usize {
        self.vor.nrows()
    }

    /// Oriented system generated directly from angles: `Vor = G(θ)`, all
    /// signs `+1`, identity sort.
    pub fn from_angles(theta: AngleMatrix, eigenvalues: DVector<f64>) -> Result<Self> {
        let n = theta.dim();
        if eigenvalues.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues for {n}x{n} angle matrix",
                eigenvalues.len()
            )));
        }
        let vor = generate_oriented_eigenvectors(&theta, None)?;
        Ok(Self {
            vor,
            eor: eigenvalues,
            signs: vec![1; n],
            theta,
            sort_indices: (0..n).collect(),
        })
    }

    pub fn sign_matrix(&self) -> DMatrix<f64> {
        sign_matrix(&self.signs)
    }

    /// `max |G(θ)ᵀ · Vsort · diag(signs) - I|`, i.e. `max |G(θ)ᵀ Vor - I|`.
    pub fn residual(&self) -> f64 {
        let r = generate_oriented_eigenvectors(&self.theta, None).expect("dimension is consistent");
        let n = self.dim();
        (r.transpose() * &self.vor - DMatrix::<f64>::identity(n, n)).amax()
    }
}

pub(crate) fn sign_matrix(signs: &[i8]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(signs.len(), signs.iter().map(|&s| f64::from(s))))
}

/// One subspace step of the orientation loop.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientStep {
    pub subspace: usize,
    /// Pivot `(k, k)` of the working matrix before reflection.
    pub pivot: f64,
    pub sign: i8,
    /// Working matrix after the reflection `S_k`.
    pub reflected: DMatrix<f64>,
    /// Working matrix after the rotation `R_kᵀ`.
    pub rotated: DMatrix<f64>,
    pub angles: Vec<f64>,
}

/// Solves the Givens angles of subspace `k` for one working column.
///
/// Works bottom-up: `θ_{n-1} = asin(a_{n-1})`, then each angle divides by the
/// running product of the cosines already solved. Returns angles for
/// columns `k+1..n` of the angle matrix.
pub fn solve_subspace_angles(column: &[f64], k: usize) -> Result<Vec<f64>> {
    solve_subspace_angles_with(column, k, &OrientOptions::default())
}

pub fn solve_subspace_angles_with(column: &[f64], k: usize, opts: &OrientOptions) -> Result<Vec<f64>> {
    let n = column.len();
    if k >= n {
        return Err(Error::SubspaceOutOfRange { n, k });
    }
    let pivot = column[k];
    if pivot < -opts.pivot_tol {
        return Err(Error::PivotNegative { value: pivot });
    }
    let mut angles = vec![0.0; n - k - 1];
    let mut r = 1.0_f64;
    for j in (k + 1..n).rev() {
        let y = column[j];
        let angle = if r.abs() < opts.r_floor {
            0.0
        } else {
            if y.abs() > r.abs() + opts.clamp_tol {
                return Err(Error::NonOrthonormalInput {
                    residual: y.abs() - r.abs(),
                    tolerance: opts.clamp_tol,
                });
            }
            (y / r).clamp(-1.0, 1.0).asin()
        };
        angles[j - k - 1] = angle;
        r *= angle.cos();
    }
    Ok(angles)
}

/// Orients the output of any eigendecomposition.
pub fn orient_eigenvectors(sys: &EigenSystem) -> Result<OrientedEigensystem> {
    orient_eigenvectors_with(sys, &OrientOptions::default())
}

pub fn orient_eigenvectors_with(sys: &EigenSystem, opts: &OrientOptions) -> Result<OrientedEigensystem> {
    orient_traced(sys, opts, false).map(|(oriented, _)| oriented)
}

/// Same as [`orient_eigenvectors_with`], also returning every intermediate
/// working matrix.
pub fn orient_eigenvectors_traced(
    sys: &EigenSystem,
    opts: &OrientOptions,
) -> Result<(OrientedEigensystem, Vec<OrientStep>)> {
    orient_traced(sys, opts, true)
}

fn orient_traced(
    sys: &EigenSystem,
    opts: &OrientOptions,
    trace: bool,
) -> Result<(OrientedEigensystem, Vec<OrientStep>)> {
    let sorted = sort_eigensystem(sys);
    let (signs, theta, vor, steps) = orient_basis_traced(&sorted.vectors, opts, trace)?;
    Ok((
        OrientedEigensystem {
            vor,
            eor: sorted.values,
            signs,
            theta,
            sort_indices: sorted.indices,
        },
        steps,
    ))
}

/// Orients a basis whose columns are already in rank order (no sorting).
/// Returns `(signs, θ, Vor)`.
pub fn orient_basis(vectors: &DMatrix<f64>, opts: &OrientOptions) -> Result<(Vec<i8>, AngleMatrix, DMatrix<f64>)> {
    orient_basis_traced(vectors, opts, false).map(|(s, t, v, _)| (s, t, v))
}

type Traced = (Vec<i8>, AngleMatrix, DMatrix<f64>, Vec<OrientStep>);

fn orient_basis_traced(vectors: &DMatrix<f64>, opts: &OrientOptions, trace: bool) -> Result<Traced> {
    if !vectors.is_square() || vectors.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "basis is {}x{}, expected nonempty square",
            vectors.nrows(),
            vectors.ncols()
        )));
    }
    let basis = if opts.reorthonormalize {
        reorthonormalize(vectors)
    } else {
        vectors.clone()
    };
    let residual = orthonormality_residual(&basis);
    if !(residual <= opts.ortho_tol) {
        return Err(Error::NonOrthonormalInput {
            residual,
            tolerance: opts.ortho_tol,
        });
    }

    let n = basis.nrows();
    let mut work = basis.clone();
    let mut signs = vec![1_i8; n];
    let mut theta = AngleMatrix::zeros(n);
    let mut steps = Vec::new();
    for k in 0..n {
        let pivot = work[(k, k)];
        // sign(0) = +1
        if pivot < 0.0 {
            signs[k] = -1;
            work.column_mut(k).neg_mut();
        }
        let reflected = trace.then(|| work.clone());
        let column: Vec<f64> = work.column(k).iter().copied().collect();
        let angles = solve_subspace_angles_with(&column, k, opts)?;
        apply_subspace_rotation_transpose(&mut work, k, &angles);
        theta.set_row(k, &angles);
        if let Some(reflected) = reflected {
            steps.push(OrientStep {
                subspace: k,
                pivot,
                sign: signs[k],
                reflected,
                rotated: work.clone(),
                angles,
            });
        }
    }
    let vor = basis * sign_matrix(&signs);
    Ok((signs, theta, vor, steps))
}

/// Q factor of `V = QR` with Q's columns signed to match `V`'s.
pub fn reorthonormalize(v: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = v.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for (c, mut col) in q.column_iter_mut().enumerate() {
        if r[(c, c)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}
