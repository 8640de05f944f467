//! Information on the treatment effect, computed three ways.
//!
//! All values are in "effective observations", i.e. multiplied by σ², so a
//! design attaining `m` is optimal:
//!
//! * full model: `Aᵀ P⊥([B1|B2]) A` by explicit projection,
//! * reduced model (no patient effects): `Aᵀ P⊥(B1) A` by projection,
//! * closed form: `m − qᵀRq`.

use serde::Serialize;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrices::{self, Matrix, QVector};

/// Relative singular-value cutoff for generalized inverses.
pub const RANK_RTOL: f64 = 1e-12;
/// Tolerance for the orthogonality comparison.
pub const ORTHOGONALITY_TOL: f64 = 1e-9;
/// Tolerance for `info_full == m` in the verdict cross-check.
pub const OPTIMALITY_TOL: f64 = 1e-6;

/// Orthonormal basis of the column space of `x`.
pub fn column_basis(x: &Matrix) -> Matrix {
    linalg::column_basis(x, RANK_RTOL)
}

/// `P(X) = X(XᵀX)⁻Xᵀ`, the orthogonal projector onto the columns of `x`.
pub fn projector(x: &Matrix) -> Matrix {
    let u = column_basis(x);
    &u * u.transpose()
}

/// Projector onto the columns of `x`, where `x` is a projection residual of
/// a matrix with Frobenius norm `scale`; see [`linalg::column_basis_scaled`].
pub fn residual_projector(x: &Matrix, scale: f64) -> Matrix {
    let u = linalg::column_basis_scaled(x, RANK_RTOL, scale);
    &u * u.transpose()
}

/// `P⊥(X) = I − P(X)`.
pub fn complement_projector(x: &Matrix) -> Matrix {
    Matrix::identity(x.nrows(), x.nrows()) - projector(x)
}

fn float(design_matrix: matrices::IntMatrix) -> Matrix {
    design_matrix.map(|v| v as f64)
}

fn quadratic(a: &Matrix, p: &Matrix) -> f64 {
    (a.transpose() * p * a)[(0, 0)]
}

/// `[B1 | B2]` as floats.
pub fn nuisance_matrix(design: &Design) -> Matrix {
    let b1 = float(matrices::build_b1(design));
    let b2 = float(matrices::build_b2(design));
    let mut x = Matrix::zeros(b1.nrows(), b1.ncols() + b2.ncols());
    x.columns_mut(0, b1.ncols()).copy_from(&b1);
    x.columns_mut(b1.ncols(), b2.ncols()).copy_from(&b2);
    x
}

/// `σ²·I1 = Aᵀ P⊥([B1|B2]) A`, by explicit projection.
pub fn info_full(design: &Design) -> f64 {
    let a = float(matrices::build_a(design));
    quadratic(&a, &complement_projector(&nuisance_matrix(design)))
}

/// `P⊥(B1) − P(P⊥(B1)B2)`, the right-hand side of the projection identity.
pub fn full_complement_via_identity(design: &Design) -> Matrix {
    let b1 = float(matrices::build_b1(design));
    let b2 = float(matrices::build_b2(design));
    let perp_b1 = complement_projector(&b1);
    let residualized = &perp_b1 * &b2;
    perp_b1 - residual_projector(&residualized, b2.norm())
}

/// `σ²·I1` computed through the projection identity instead of `[B1|B2]`.
pub fn info_full_via_identity(design: &Design) -> f64 {
    let a = float(matrices::build_a(design));
    quadratic(&a, &full_complement_via_identity(design))
}

/// `σ²·I2 = Aᵀ P⊥(B1) A`, by explicit projection.
pub fn info_reduced(design: &Design) -> f64 {
    let a = float(matrices::build_a(design));
    let b1 = float(matrices::build_b1(design));
    quadratic(&a, &complement_projector(&b1))
}

/// `m − qᵀRq` with `0²/0` read as 0.
pub fn info_closed(design: &Design) -> Result<f64> {
    let q = matrices::q_vector(design);
    info_closed_from(
        &q,
        design.observations(),
        design.n3(),
        design.n2(),
        design.weeks(),
    )
}

pub fn info_closed_from(q: &QVector, m: usize, n3: usize, n2: usize, w: usize) -> Result<f64> {
    const NAMES: [&str; 4] = ["q3_mon", "q3_wed", "q3_fri+q2_fri", "q2_mon"];
    let qc = q.contracted();
    let denominators = [n3, n3, n3 + n2, n2];
    let mut penalty = 0.0;
    for k in 0..4 {
        let denom = denominators[k] * w;
        if denom == 0 {
            if qc[k] != 0 {
                return Err(Error::EmptyStratumImbalance {
                    component: NAMES[k],
                    value: qc[k],
                });
            }
            continue;
        }
        penalty += (qc[k] * qc[k]) as f64 / denom as f64;
    }
    Ok(m as f64 - penalty)
}

/// `AᵀB2` by matrix product.
pub fn a_t_b2(design: &Design) -> Vec<f64> {
    let a = float(matrices::build_a(design));
    let b2 = float(matrices::build_b2(design));
    (a.transpose() * b2).iter().copied().collect()
}

/// `Aᵀ P(B1) B2` by explicit projection.
pub fn a_proj_b1_b2(design: &Design) -> Vec<f64> {
    let a = float(matrices::build_a(design));
    let b1 = float(matrices::build_b1(design));
    let b2 = float(matrices::build_b2(design));
    (a.transpose() * projector(&b1) * b2)
        .iter()
        .copied()
        .collect()
}

/// Whether `AᵀB2 = AᵀP(B1)B2` holds, i.e. whether dropping patient effects
/// loses no information.
pub fn check_orthogonality(design: &Design) -> bool {
    a_t_b2(design)
        .iter()
        .zip(a_proj_b1_b2(design))
        .all(|(l, r)| (l - r).abs() < ORTHOGONALITY_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InformationReport {
    pub m: usize,
    pub n3: usize,
    pub n2: usize,
    pub weeks: usize,
    pub info_full: f64,
    pub info_reduced: f64,
    pub info_closed: f64,
    pub q: QVector,
    pub q_contracted: [i64; 4],
    pub patient_imbalance: Vec<i64>,
    /// `AᵀB2 = AᵀP(B1)B2`.
    pub orthogonal: bool,
    /// `AᵀB2 = 0`.
    pub patient_balanced: bool,
    /// `q = 0` and every patient balanced.
    pub optimal: bool,
    /// `|info_full − m| < 1e-6`; always equal to `optimal`.
    pub attains_bound: bool,
}

/// Full information report with optimality verdict.
pub fn verdict(design: &Design) -> Result<InformationReport> {
    design.ensure_valid()?;
    let q = matrices::q_vector(design);
    let m = design.observations();
    let imbalance = matrices::patient_imbalances(design);
    let patient_balanced = imbalance.iter().all(|&v| v == 0);
    let info_full = info_full(design);
    let optimal = q.is_zero() && patient_balanced;
    let attains_bound = (info_full - m as f64).abs() < OPTIMALITY_TOL;
    debug_assert_eq!(optimal, attains_bound, "verdict disagrees with projection");
    Ok(InformationReport {
        m,
        n3: design.n3(),
        n2: design.n2(),
        weeks: design.weeks(),
        info_full,
        info_reduced: info_reduced(design),
        info_closed: info_closed(design)?,
        q,
        q_contracted: q.contracted(),
        patient_imbalance: imbalance,
        orthogonal: check_orthogonality(design),
        patient_balanced,
        optimal,
        attains_bound,
    })
}
