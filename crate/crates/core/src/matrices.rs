//! Design matrices of the crossover model and their structured products.
//!
//! Rows follow the canonical order of [`Design::cells`]: thrice-weekly
//! patients first, each patient's sessions chronological. Columns of `B1`
//! are the four period classes
//!
//! | column | thrice-weekly | twice-weekly |
//! |--------|---------------|--------------|
//! | 0      | Mon           |              |
//! | 1      | Wed           |              |
//! | 2      | Fri           | Fri          |
//! | 3      |               | Mon          |
//!
//! and columns of `B2` are patients. Everything that is a count is built
//! and multiplied in `i64` so the exact identities stay exact.

use std::io::Write;

use nalgebra::{DMatrix, Scalar};
use num_traits::{One, Zero};
use serde::Serialize;

use crate::design::{Day, Design, Schedule};
use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type IntMatrix = DMatrix<i64>;

pub const PERIOD_CLASSES: usize = 4;

/// Column of `B1` for a session held on `day` by a patient on `schedule`.
pub fn period_class(schedule: Schedule, day: Day) -> usize {
    match (schedule, day) {
        (Schedule::Thrice, Day::Mon) => 0,
        (Schedule::Thrice, Day::Wed) => 1,
        (_, Day::Fri) => 2,
        (Schedule::Twice, Day::Mon) => 3,
        // A twice-weekly Wednesday cannot be represented.
        (Schedule::Twice, Day::Wed) => {
            unreachable!("twice-weekly patients do not attend on Wednesday")
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T>
where
    T: Scalar + Copy + Zero + std::ops::Mul<Output = T>,
{
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

fn ones<T: Scalar + Zero + One>(n: usize) -> DMatrix<T> {
    DMatrix::from_element(n, 1, T::one())
}

/// Treatment column `A` (m × 1), entries ±1.
pub fn build_a(design: &Design) -> IntMatrix {
    let cells = design.cells();
    IntMatrix::from_iterator(cells.len(), 1, cells.iter().map(|c| c.treatment.signed()))
}

/// Period indicator matrix `B1` (m × 4).
pub fn build_b1(design: &Design) -> IntMatrix {
    let cells = design.cells();
    let mut b1 = IntMatrix::zeros(cells.len(), PERIOD_CLASSES);
    for (row, cell) in cells.iter().enumerate() {
        b1[(row, period_class(cell.schedule, cell.day))] = 1;
    }
    b1
}

/// Patient indicator matrix `B2` (m × (N3 + N2)).
pub fn build_b2(design: &Design) -> IntMatrix {
    let cells = design.cells();
    let mut b2 = IntMatrix::zeros(cells.len(), design.plans().len());
    for (row, cell) in cells.iter().enumerate() {
        b2[(row, cell.patient)] = 1;
    }
    b2
}

/// `B1` assembled from Kronecker blocks: `(1_{wN3} ⊗ I3, 0; 0, 1_{wN2} ⊗ K)`,
/// the twice-weekly block occupying the last two columns.
pub fn b1_kron(n3: usize, n2: usize, w: usize) -> IntMatrix {
    let k = IntMatrix::from_row_slice(2, 2, &[0, 1, 1, 0]);
    let p = kron(&ones(w * n3), &IntMatrix::identity(3, 3));
    let q = kron(&ones(w * n2), &k);
    let mut b1 = IntMatrix::zeros(3 * w * n3 + 2 * w * n2, PERIOD_CLASSES);
    place(&mut b1, (0, 0), &p);
    place(&mut b1, (3 * w * n3, 2), &q);
    b1
}

/// `B2` assembled from Kronecker blocks: `diag(I_{N3} ⊗ 1_{3w}, I_{N2} ⊗ 1_{2w})`.
pub fn b2_kron(n3: usize, n2: usize, w: usize) -> IntMatrix {
    let top = kron(&IntMatrix::identity(n3, n3), &kron(&ones(w), &ones(3)));
    let bottom = kron(&IntMatrix::identity(n2, n2), &kron(&ones(w), &ones(2)));
    let mut b2 = IntMatrix::zeros(top.nrows() + bottom.nrows(), n3 + n2);
    place(&mut b2, (0, 0), &top);
    place(&mut b2, (top.nrows(), n3), &bottom);
    b2
}

/// Copies `block` into `target` at `at`; empty blocks are skipped because
/// nalgebra rejects views starting at the edge.
fn place(target: &mut IntMatrix, at: (usize, usize), block: &IntMatrix) {
    if !block.is_empty() {
        target.view_mut(at, block.shape()).copy_from(block);
    }
}

/// `B1ᵀB1 = w·diag(N3, N3, N3+N2, N2)`.
pub fn b1tb1_closed(n3: usize, n2: usize, w: usize) -> IntMatrix {
    let d = [n3, n3, n3 + n2, n2].map(|v| (w * v) as i64);
    IntMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&d))
}

/// Column of `B1ᵀB2` belonging to a patient on `schedule`, divided by `w`:
/// `P3 = (1,1,1,0)ᵀ` or `P2 = (0,0,1,1)ᵀ`.
pub fn schedule_profile(schedule: Schedule) -> [i64; PERIOD_CLASSES] {
    match schedule {
        Schedule::Thrice => [1, 1, 1, 0],
        Schedule::Twice => [0, 0, 1, 1],
    }
}

/// `B1ᵀB2` in closed form: column `i` is `w·P3` or `w·P2`.
pub fn b1tb2_closed(design: &Design) -> IntMatrix {
    let w = design.weeks() as i64;
    let plans = design.canonical_plans();
    let mut out = IntMatrix::zeros(PERIOD_CLASSES, plans.len());
    for (i, plan) in plans.iter().enumerate() {
        for (r, v) in schedule_profile(plan.schedule()).iter().enumerate() {
            out[(r, i)] = w * v;
        }
    }
    out
}

/// Per-(day, schedule) allocation imbalances, H count minus A count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct QVector {
    pub q3_mon: i64,
    pub q3_wed: i64,
    pub q3_fri: i64,
    pub q2_fri: i64,
    pub q2_mon: i64,
}

impl QVector {
    /// `qᵀ = (q3_M, q3_W, q3_F + q2_F, q2_M)`, which equals `AᵀB1`.
    pub fn contracted(&self) -> [i64; PERIOD_CLASSES] {
        [
            self.q3_mon,
            self.q3_wed,
            self.q3_fri + self.q2_fri,
            self.q2_mon,
        ]
    }

    pub fn is_zero(&self) -> bool {
        self.contracted() == [0; PERIOD_CLASSES]
    }
}

pub fn q_vector(design: &Design) -> QVector {
    let mut q = QVector::default();
    for cell in design.cells() {
        let s = cell.treatment.signed();
        let slot = match (cell.schedule, cell.day) {
            (Schedule::Thrice, Day::Mon) => &mut q.q3_mon,
            (Schedule::Thrice, Day::Wed) => &mut q.q3_wed,
            (Schedule::Thrice, Day::Fri) => &mut q.q3_fri,
            (Schedule::Twice, Day::Fri) => &mut q.q2_fri,
            (Schedule::Twice, Day::Mon) => &mut q.q2_mon,
            (Schedule::Twice, Day::Wed) => unreachable!(),
        };
        *slot += s;
    }
    q
}

/// `AᵀB2` by counting: H minus A per patient, canonical order.
pub fn patient_imbalances(design: &Design) -> Vec<i64> {
    design
        .canonical_plans()
        .iter()
        .map(|p| p.imbalance())
        .collect()
}

/// Generalized inverse of `B1ᵀB1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RMatrix {
    pub matrix: Matrix,
    /// Set when a stratum is empty, so `B1ᵀB1` is singular and zeros were
    /// placed on the matching diagonal entries.
    pub degenerate: bool,
}

pub fn r_matrix(design: &Design) -> RMatrix {
    r_matrix_for(design.n3(), design.n2(), design.weeks())
}

/// `R = w⁻¹ diag(1/N3, 1/N3, 1/(N3+N2), 1/N2)` with `1/0` read as 0.
pub fn r_matrix_for(n3: usize, n2: usize, w: usize) -> RMatrix {
    let counts = [n3, n3, n3 + n2, n2].map(|n| n * w);
    let degenerate = counts.contains(&0);
    let diag = counts.map(|c| if c == 0 { 0.0 } else { 1.0 / c as f64 });
    RMatrix {
        matrix: Matrix::from_diagonal(&nalgebra::DVector::from_row_slice(&diag)),
        degenerate,
    }
}

/// `AᵀP(B1)B2` in closed form, one entry per patient in canonical order.
///
/// Since `P(B1) = B1 R B1ᵀ` and `AᵀB1 = qᵀ`, each entry is
/// `qᵀR(B1ᵀB2)_i = w·qᵀR·P_ℓ` with `P_ℓ` the schedule profile.
pub fn a_proj_b1_b2_closed(design: &Design) -> Vec<f64> {
    let q = q_vector(design).contracted();
    let r = r_matrix(design);
    let w = design.weeks() as f64;
    design
        .canonical_plans()
        .iter()
        .map(|p| {
            let profile = schedule_profile(p.schedule());
            (0..PERIOD_CLASSES)
                .map(|k| q[k] as f64 * r.matrix[(k, k)] * profile[k] as f64)
                .sum::<f64>()
                * w
        })
        .collect()
}

/// Writes a matrix as CSV: a `# rows=R cols=C` line, then one line per row.
pub fn write_matrix_csv<T, W>(matrix: &DMatrix<T>, mut out: W) -> Result<()>
where
    T: Scalar + std::fmt::Display,
    W: Write,
{
    writeln!(out, "# rows={} cols={}", matrix.nrows(), matrix.ncols()).map_err(Error::Io)?;
    for row in matrix.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(",")).map_err(Error::Io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::PatientPlan;

    fn single(labels: &[&str]) -> Design {
        Design::new(
            labels.len(),
            vec![PatientPlan::from_labels("1", labels).unwrap()],
        )
    }

    #[test]
    fn a_is_signed_allocation() {
        let d = single(&["HAH"]);
        assert_eq!(build_a(&d).as_slice(), &[1, -1, 1]);
        let all_h = single(&["HHH", "HHH"]);
        assert_eq!(build_a(&all_h).sum(), 6);
    }

    #[test]
    fn b1_rows_indicate_period_class() {
        let d = Design::new(
            1,
            vec![
                PatientPlan::from_labels("t", &["AHA"]).unwrap(),
                PatientPlan::from_labels("b", &["AH"]).unwrap(),
            ],
        );
        let b1 = build_b1(&d);
        // Thrice-weekly Wednesday.
        assert_eq!(
            b1.row(1).iter().copied().collect::<Vec<_>>(),
            vec![0, 1, 0, 0]
        );
        // Twice-weekly Monday, then Friday.
        assert_eq!(
            b1.row(3).iter().copied().collect::<Vec<_>>(),
            vec![0, 0, 0, 1]
        );
        assert_eq!(
            b1.row(4).iter().copied().collect::<Vec<_>>(),
            vec![0, 0, 1, 0]
        );
    }

    #[test]
    fn b1_kron_explicit_rows() {
        // One thrice-weekly and one twice-weekly patient, one week.
        let expect = IntMatrix::from_row_slice(
            5,
            4,
            &[
                1, 0, 0, 0, //
                0, 1, 0, 0, //
                0, 0, 1, 0, //
                0, 0, 0, 1, // twice-weekly Monday -> π4
                0, 0, 1, 0, // twice-weekly Friday -> π3
            ],
        );
        assert_eq!(b1_kron(1, 1, 1), expect);
        assert_eq!(b1_kron(0, 2, 1).nrows(), 4);
        assert_eq!(b1_kron(2, 0, 3).nrows(), 18);
    }

    #[test]
    fn kron_small_cases() {
        let i2 = IntMatrix::identity(2, 2);
        let got = kron(&i2, &ones::<i64>(2));
        assert_eq!(
            got,
            IntMatrix::from_row_slice(4, 2, &[1, 0, 1, 0, 0, 1, 0, 1])
        );

        let k = IntMatrix::from_row_slice(2, 2, &[0, 1, 1, 0]);
        assert_eq!(k.transpose() * &k, IntMatrix::identity(2, 2));
    }

    #[test]
    fn kron_matches_double_loop() {
        let a = Matrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, 4.0]);
        let b = Matrix::from_row_slice(3, 2, &[0.0, 1.0, 2.0, -1.0, 5.0, 7.0]);
        let got = kron(&a, &b);
        let mut expected = Matrix::zeros(6, 6);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..2 {
                        expected[(i * 3 + k, j * 2 + l)] = a[(i, j)] * b[(k, l)];
                    }
                }
            }
        }
        assert_eq!(got, expected);
        assert_eq!(got, a.kronecker(&b));
    }

    #[test]
    fn stacked_ones_identity_matches_loop() {
        let got = kron(&ones::<i64>(2), &IntMatrix::identity(3, 3));
        let mut expected = IntMatrix::zeros(6, 3);
        for block in 0..2 {
            for d in 0..3 {
                expected[(block * 3 + d, d)] = 1;
            }
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn r_matrix_substitution() {
        let r = r_matrix_for(2, 1, 4);
        let expected = [0.25 / 2.0, 0.25 / 2.0, 0.25 / 3.0, 0.25];
        for (k, e) in expected.iter().enumerate() {
            assert!((r.matrix[(k, k)] - e).abs() < 1e-15);
        }
        assert!(!r.degenerate);

        let r0 = r_matrix_for(3, 0, 2);
        assert!(r0.degenerate);
        assert_eq!(r0.matrix[(3, 3)], 0.0);
    }

    #[test]
    fn r_is_inverse_on_nonzero_strata() {
        for (n3, n2, w) in [(2, 1, 4), (3, 0, 2), (0, 2, 3)] {
            let r = r_matrix_for(n3, n2, w);
            let prod = &r.matrix * b1tb1_closed(n3, n2, w).map(|v| v as f64);
            for k in 0..4 {
                let nonzero = [n3, n3, n3 + n2, n2][k] > 0;
                let expected = if nonzero { 1.0 } else { 0.0 };
                assert!((prod[(k, k)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn q_vector_examples() {
        let q = q_vector(&single(&["AAH", "HHA"]));
        assert_eq!((q.q3_mon, q.q3_wed, q.q3_fri), (0, 0, 0));
        assert!(q.is_zero());

        let q = q_vector(&single(&["HHH", "HHH"]));
        assert_eq!((q.q3_mon, q.q3_wed, q.q3_fri), (2, 2, 2));
        assert_eq!(q.contracted(), [2, 2, 2, 0]);
    }

    #[test]
    fn b2_single_patient() {
        let b2 = build_b2(&single(&["AHA"]));
        assert_eq!(b2, IntMatrix::from_element(3, 1, 1));
    }

    #[test]
    fn matrix_csv_dump() {
        let mut buf = Vec::new();
        write_matrix_csv(&IntMatrix::from_row_slice(2, 2, &[1, 0, -1, 1]), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# rows=2 cols=2\n1,0\n-1,1\n"
        );
    }
}
