//! Givens rotations, the angle matrix, and the generator that rebuilds a
//! rotation from its angles.
//!
//! Rotation `R_k` for subspace `k` (0-based) is the cascade
//! `G(k, k+1) · G(k, k+2) · … · G(k, n-1)`, innermost index ascending, and the
//! full basis rotation is `R = R_0 · R_1 · … · R_{n-1}`. Every caller in the
//! crate goes through this one ordering; angles are meaningless under any
//! other.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the `[-π/2, π/2]` bound when validating stored angles
/// (text round trips can land one ulp outside).
const ANGLE_RANGE_SLACK: f64 = 1e-12;

/// Strictly upper-triangular matrix of Givens angles in radians.
///
/// Row `k` holds the angles of the cascade that aligns basis vector `k` with
/// constituent axis `k`; entry `(k, j)` rotates in the `(k, j)` plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleMatrix {
    angles: DMatrix<f64>,
}

impl AngleMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            angles: DMatrix::zeros(n, n),
        }
    }

    /// Validates shape, triangularity and range. Entries a hair outside
    /// `[-π/2, π/2]` are clamped back in.
    pub fn from_matrix(angles: DMatrix<f64>) -> Result<Self> {
        if !angles.is_square() {
            return Err(Error::InvalidAngles(format!(
                "expected a square matrix, got {}x{}",
                angles.nrows(),
                angles.ncols()
            )));
        }
        let n = angles.nrows();
        let mut angles = angles;
        for i in 0..n {
            for j in 0..n {
                let a = angles[(i, j)];
                if !a.is_finite() {
                    return Err(Error::InvalidAngles(format!("entry ({i}, {j}) is not finite")));
                }
                if i >= j {
                    if a != 0.0 {
                        return Err(Error::InvalidAngles(format!(
                            "entry ({i}, {j}) = {a} lies on or below the diagonal"
                        )));
                    }
                    continue;
                }
                if a.abs() > FRAC_PI_2 + ANGLE_RANGE_SLACK {
                    return Err(Error::InvalidAngles(format!(
                        "entry ({i}, {j}) = {a} outside [-pi/2, pi/2]"
                    )));
                }
                angles[(i, j)] = a.clamp(-FRAC_PI_2, FRAC_PI_2);
            }
        }
        Ok(Self { angles })
    }

    pub fn from_degrees(degrees: DMatrix<f64>) -> Result<Self> {
        Self::from_matrix(degrees.map(f64::to_radians))
    }

    pub fn dim(&self) -> usize {
        self.angles.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.angles[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.angles
    }

    pub fn to_degrees(&self) -> DMatrix<f64> {
        self.angles.map(f64::to_degrees)
    }

    /// Angles of row `k` for columns `k+1..n`.
    pub fn row(&self, k: usize) -> Vec<f64> {
        (k + 1..self.dim()).map(|j| self.angles[(k, j)]).collect()
    }

    /// Overwrites row `k`, columns `k+1..n`. Callers guarantee the range.
    pub(crate) fn set_row(&mut self, k: usize, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim() - k - 1);
        for (offset, &a) in row.iter().enumerate() {
            self.angles[(k, k + 1 + offset)] = a;
        }
    }

    /// Largest absolute angle difference.
    pub fn max_abs_diff(&self, other: &AngleMatrix) -> f64 {
        (&self.angles - &other.angles).amax()
    }
}

/// Left-multiplies `m` in place by the Givens rotation with cosine `c` and
/// sine `s` acting on rows `i` and `j`.
pub(crate) fn rotate_rows(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for col in 0..m.ncols() {
        let a = m[(i, col)];
        let b = m[(j, col)];
        m[(i, col)] = c * a - s * b;
        m[(j, col)] = s * a + c * b;
    }
}

/// Right-multiplies `m` in place by the Givens rotation acting on columns `i`
/// and `j`.
fn rotate_cols(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for row in 0..m.nrows() {
        let a = m[(row, i)];
        let b = m[(row, j)];
        m[(row, i)] = c * a + s * b;
        m[(row, j)] = -s * a + c * b;
    }
}

/// Planar rotation by `angle` in the `(i, j)` plane of `R^n`.
///
/// Entries `(i,i) = (j,j) = cos θ`, `(i,j) = -sin θ`, `(j,i) = +sin θ`, so a
/// positive angle carries axis `i` toward axis `j`.
pub fn givens_rotation(n: usize, i: usize, j: usize, angle: f64) -> Result<DMatrix<f64>> {
    if i >= j || j >= n {
        return Err(Error::AxisOutOfRange { n, i, j });
    }
    let (s, c) = angle.sin_cos();
    let mut r = DMatrix::identity(n, n);
    r[(i, i)] = c;
    r[(j, j)] = c;
    r[(i, j)] = -s;
    r[(j, i)] = s;
    Ok(r)
}

/// Rotation `R_k` built from row `k` of the angle matrix.
pub fn build_subspace_rotation(theta: &AngleMatrix, k: usize) -> Result<DMatrix<f64>> {
    let n = theta.dim();
    if k >= n {
        return Err(Error::SubspaceOutOfRange { n, k });
    }
    let mut r = DMatrix::identity(n, n);
    apply_subspace_rotation(&mut r, theta, k);
    Ok(r)
}

/// `m ← m · R_k`.
fn apply_subspace_rotation(m: &mut DMatrix<f64>, theta: &AngleMatrix, k: usize) {
    for j in k + 1..theta.dim() {
        let (s, c) = theta.get(k, j).sin_cos();
        rotate_cols(m, k, j, c, s);
    }
}

/// `m ← R_kᵀ · m`.
pub(crate) fn apply_subspace_rotation_transpose(m: &mut DMatrix<f64>, k: usize, angles: &[f64]) {
    // R_kᵀ = G(k,n-1)ᵀ ··· G(k,k+1)ᵀ; the rightmost factor acts first.
    for (offset, &a) in angles.iter().enumerate() {
        let (s, c) = a.sin_cos();
        rotate_rows(m, k, k + 1 + offset, c, -s);
    }
}

/// Generator: `R_0 · R_1 · … · R_{n-1}` when `upto` is `None`, or `R_k` alone
/// when `upto = Some(k)`.
pub fn generate_oriented_eigenvectors(theta: &AngleMatrix, upto: Option<usize>) -> Result<DMatrix<f64>> {
    match upto {
        Some(k) => build_subspace_rotation(theta, k),
        None => Ok(cumulative_rotation(theta, theta.dim())),
    }
}

/// Partial product `R_0 · … · R_{count-1}`; `count = n` gives the full basis.
pub fn cumulative_rotation(theta: &AngleMatrix, count: usize) -> DMatrix<f64> {
    let n = theta.dim();
    let mut r = DMatrix::identity(n, n);
    for k in 0..count.min(n) {
        apply_subspace_rotation(&mut r, theta, k);
    }
    r
}
