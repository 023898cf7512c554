//! Staged walkthroughs of the orientation algorithm with Markdown output.
//!
//! [`walkthrough_r3`] follows a left-handed basis in `R³` through
//! `V → V S₁ → R₁ᵀ V S₁ → R₁ᵀ V S₁ S₂ → …`; [`reconstruction_r4`] rebuilds an
//! oriented `R⁴` basis one subspace rotation at a time.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::givens::{build_subspace_rotation, cumulative_rotation};
use crate::orient::{orient_eigenvectors_traced, EigenSystem, OrientOptions, OrientedEigensystem};

/// One labelled matrix in a transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub label: String,
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub title: String,
    pub stages: Vec<Stage>,
    pub oriented: OrientedEigensystem,
}

impl Transcript {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("# {}\n\n", self.title);
        for stage in &self.stages {
            let _ = writeln!(out, "## {}\n\n{}", stage.label, matrix_block(&stage.matrix));
        }
        let signs: Vec<String> = self.oriented.signs.iter().map(|s| format!("{s:+}")).collect();
        let _ = writeln!(out, "## Result\n\nsigns = ({})\n", signs.join(", "));
        let _ = writeln!(out, "theta (deg):\n\n{}", matrix_block(&self.oriented.theta.to_degrees()));
        out
    }
}

fn matrix_block(m: &DMatrix<f64>) -> String {
    let mut out = String::from("```text\n");
    for row in m.row_iter() {
        let cells: Vec<String> = row
            .iter()
            .map(|&x| {
                let x = if x.abs() < 5e-4 { 0.0 } else { x };
                format!("{x:>8.3}")
            })
            .collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out.push_str("```\n");
    out
}

/// Left-handed basis in `R³` whose second eigenvector needs reflection:
/// a proper rotation with its middle column negated.
pub fn left_handed_fixture() -> DMatrix<f64> {
    let (a, b, c) = (30f64.to_radians(), 20f64.to_radians(), 25f64.to_radians());
    let mut theta = DMatrix::zeros(3, 3);
    theta[(0, 1)] = a;
    theta[(0, 2)] = b;
    theta[(1, 2)] = c;
    let theta = crate::givens::AngleMatrix::from_matrix(theta).expect("angles in range");
    let mut v = cumulative_rotation(&theta, 3);
    v.column_mut(1).neg_mut();
    v
}

/// Stages of orienting `v` (eigenvalues `n, n-1, …, 1`).
pub fn walkthrough(title: &str, v: &DMatrix<f64>) -> Result<Transcript> {
    let n = v.nrows();
    let values = DVector::from_fn(n, |i, _| (n - i) as f64);
    let sys = EigenSystem::new(v.clone(), values)?;
    let (oriented, steps) = orient_eigenvectors_traced(&sys, &OrientOptions::default())?;

    let mut stages = vec![Stage {
        label: "V".into(),
        matrix: v.clone(),
    }];
    let mut prefix_rot = String::new();
    let mut suffix_refl = String::new();
    for step in steps {
        let k = step.subspace + 1;
        suffix_refl.push_str(&format!(" S{k}"));
        stages.push(Stage {
            label: format!("{prefix_rot}V{suffix_refl}  (s{k} = {:+})", step.sign),
            matrix: step.reflected,
        });
        prefix_rot = format!("R{k}ᵀ {prefix_rot}");
        stages.push(Stage {
            label: format!("{prefix_rot}V{suffix_refl}"),
            matrix: step.rotated,
        });
    }
    Ok(Transcript {
        title: title.to_string(),
        stages,
        oriented,
    })
}

/// Walkthrough of [`left_handed_fixture`].
pub fn walkthrough_r3() -> Result<Transcript> {
    walkthrough("Orienting a left-handed basis in R3", &left_handed_fixture())
}

/// Q factor of the identity with its first column replaced by
/// `(1, …, 1)/√n`, signs as produced by a Householder QR.
pub fn reference_basis(n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::identity(n, n);
    a.column_mut(0).fill(1.0 / (n as f64).sqrt());
    a.qr().q()
}

/// Oriented `R⁴` reference basis rebuilt subspace by subspace: stages
/// `R₁`, `R₁R₂`, `R₁R₂R₃`, `R₁R₂R₃R₄`, each also listed with its factor `R_k`.
pub fn reconstruction_r4() -> Result<Transcript> {
    let v = reference_basis(4);
    let values = DVector::from_vec(vec![3.0, 2.0, 1.0, 0.0]);
    let (oriented, _) = orient_eigenvectors_traced(&EigenSystem::new(v, values)?, &OrientOptions::default())?;
    let mut stages = Vec::new();
    let mut label = String::new();
    for k in 0..4 {
        label.push_str(&format!("R{}", k + 1));
        stages.push(Stage {
            label: format!("R{} = G(theta, {})", k + 1, k + 1),
            matrix: build_subspace_rotation(&oriented.theta, k)?,
        });
        stages.push(Stage {
            label: label.clone(),
            matrix: cumulative_rotation(&oriented.theta, k + 1),
        });
    }
    Ok(Transcript {
        title: "Rebuilding an oriented basis in R4 from its angles".into(),
        stages,
        oriented,
    })
}
