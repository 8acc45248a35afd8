//! Dense linear algebra kernel: pivoted LU with reported pivots, orthonormal
//! nullspace bases, subspace-restricted eigenvalues, a Bland-rule simplex and
//! polyhedral cone utilities.

pub mod cone;
pub mod lp;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use cone::{ConeKind, ConeStructure, PolyhedralCone};
pub use lp::{solve_lp, LpProblem, LpSolution, LpStatus};

/// Row-major dense real matrix used throughout the crate.
pub type DenseMatrix = DMatrix<f64>;

/// Relative pivot threshold for LU factorizations.
pub const PIVOT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to tolerance: pivot {pivot:e} at step {step} is below {threshold:e}")]
    Singular { step: usize, pivot: f64, threshold: f64 },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("simplex iteration cap of {0} reached")]
    IterationCap(usize),
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
    min_pivot: f64,
    scale: f64,
}

impl LuFactors {
    /// Smallest pivot magnitude encountered.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// Largest absolute row entry of the factored matrix.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut z = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * z[j];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * z[j];
            }
            z[i] = s / self.lu[(i, i)];
        }
        z
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            let col = self.solve(&b.column(j).into_owned());
            out.set_column(j, &col);
        }
        out
    }

    /// Solve `Aᵀ z = b`.
    pub fn solve_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        // Uᵀ w = b
        let mut w = b.clone();
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= self.lu[(j, i)] * w[j];
            }
            w[i] = s / self.lu[(i, i)];
        }
        // Lᵀ v = w
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= self.lu[(j, i)] * w[j];
            }
            w[i] = s;
        }
        let mut z = DVector::zeros(n);
        for i in 0..n {
            z[self.perm[i]] = w[i];
        }
        z
    }
}

/// Factor a square matrix. Fails when a pivot falls below
/// `PIVOT_RTOL` times the largest absolute entry.
pub fn lu_factor(a: &DMatrix<f64>) -> Result<LuFactors, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::Dimension(format!(
            "LU needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let threshold = PIVOT_RTOL * scale;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= threshold || pivot == 0.0 {
            return Err(LinalgError::Singular {
                step: k,
                pivot,
                threshold,
            });
        }
        min_pivot = min_pivot.min(pivot);
        if p != k {
            lu.swap_rows(p, k);
            perm.swap(p, k);
        }
        let d = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / d;
            lu[(i, k)] = factor;
            if factor != 0.0 {
                for j in k + 1..n {
                    lu[(i, j)] -= factor * lu[(k, j)];
                }
            }
        }
    }
    Ok(LuFactors {
        lu,
        perm,
        min_pivot,
        scale,
    })
}

/// Solve `A z = b` by partial-pivoted elimination.
pub fn solve_linear(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    if b.len() != a.nrows() {
        return Err(LinalgError::Dimension(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            a.nrows()
        )));
    }
    Ok(lu_factor(a)?.solve(b))
}

/// Singular values of `a`, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|p, q| q.total_cmp(p));
    s
}

/// Smallest singular value of the row set of `a`, measuring linear
/// independence of its rows. `+∞` for zero rows, `0` when rows outnumber columns.
pub fn row_independence(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    if a.nrows() > a.ncols() {
        return 0.0;
    }
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Orthonormal basis (as columns) of `{d : A d = 0}`. Directions whose
/// singular value is at most `tol` count as null.
pub fn nullspace_basis(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let c = a.ncols();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return DMatrix::identity(c, c);
    }
    // Pad with zero rows so the SVD exposes all c right singular vectors.
    let padded = if a.nrows() < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (a.nrows(), c)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut cols: Vec<(f64, DVector<f64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= tol)
        .map(|(i, s)| (*s, v_t.row(i).transpose()))
        .collect();
    cols.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut basis = DMatrix::zeros(c, cols.len());
    for (j, (_, v)) in cols.into_iter().enumerate() {
        // Fix the sign so the first significant entry is positive.
        let sign = v.iter().find(|t| t.abs() > 1e-12).map_or(1.0, |t| t.signum());
        basis.set_column(j, &(v * sign));
    }
    basis
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Check that `m` is square and symmetric to `1e-10` (relative to its size).
pub fn require_symmetric(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let asym = max_asymmetry(m);
    if asym > 1e-10 * scale {
        return Err(LinalgError::Asymmetric(asym));
    }
    Ok(())
}

/// Eigen-pair of `basisᵀ M basis` mapped back to the ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceEigen {
    pub value: f64,
    /// Unit vector in the ambient space attaining `value`.
    pub vector: DVector<f64>,
}

fn reduced(m: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    require_symmetric(m)?;
    if basis.nrows() != m.nrows() {
        return Err(LinalgError::Dimension(format!(
            "basis has {} rows, matrix has order {}",
            basis.nrows(),
            m.nrows()
        )));
    }
    let r = basis.transpose() * m * basis;
    Ok((&r + r.transpose()) * 0.5)
}

fn extreme_eigen(m: &DMatrix<f64>, basis: &DMatrix<f64>, largest: bool) -> Result<Option<SubspaceEigen>, LinalgError> {
    if basis.ncols() == 0 {
        return Ok(None);
    }
    let r = reduced(m, basis)?;
    let eig = r.symmetric_eigen();
    let idx = (0..eig.eigenvalues.len())
        .reduce(|a, b| {
            let better = if largest {
                eig.eigenvalues[b] > eig.eigenvalues[a]
            } else {
                eig.eigenvalues[b] < eig.eigenvalues[a]
            };
            if better {
                b
            } else {
                a
            }
        })
        .expect("nonempty spectrum");
    let v = basis * eig.eigenvectors.column(idx);
    let norm = v.norm();
    Ok(Some(SubspaceEigen {
        value: eig.eigenvalues[idx],
        vector: if norm > 0.0 { v / norm } else { v },
    }))
}

/// Largest eigenvalue of `basisᵀ M basis`; `-∞` for an empty basis.
pub fn max_eigenvalue_on_subspace(m: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<f64, LinalgError> {
    Ok(extreme_eigen(m, basis, true)?.map_or(f64::NEG_INFINITY, |e| e.value))
}

/// Smallest eigenvalue of `basisᵀ M basis`; `+∞` for an empty basis.
pub fn min_eigenvalue_on_subspace(m: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<f64, LinalgError> {
    Ok(extreme_eigen(m, basis, false)?.map_or(f64::INFINITY, |e| e.value))
}

/// Largest eigen-pair on the subspace, `None` for an empty basis.
pub fn max_eigen_on_subspace(m: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<Option<SubspaceEigen>, LinalgError> {
    extreme_eigen(m, basis, true)
}

/// Smallest eigen-pair on the subspace, `None` for an empty basis.
pub fn min_eigen_on_subspace(m: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<Option<SubspaceEigen>, LinalgError> {
    extreme_eigen(m, basis, false)
}

/// 2-norm condition number estimate from the singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Stack matrices with equal column counts vertically.
pub fn vstack(blocks: &[&DMatrix<f64>], cols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        if b.nrows() > 0 {
            out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        }
        r += b.nrows();
    }
    out
}

/// Rows of `a` selected by `idx`.
pub fn select_rows(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), a.ncols(), |i, j| a[(idx[i], j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_solve() {
        let z = solve_linear(&DMatrix::identity(3, 3), &DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(z.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn p1_sensitivity_matrix_solve() {
        // det = 4; first entry of K⁻¹ e₁ is -1
        let k = DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 1.0, 0.0, 0.0, 2.0, 1.0, 2.0, 0.0]);
        let z = solve_linear(&k, &DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert!((z[0] + 1.0).abs() < 1e-15);
        assert!((k.determinant() - 4.0).abs() < 1e-12);
        let zt = lu_factor(&k)
            .unwrap()
            .solve_transpose(&DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert!((k.transpose() * zt - DVector::from_vec(vec![1.0, 0.0, 0.0])).amax() < 1e-14);
    }

    #[test]
    fn singular_reports_pivot() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match solve_linear(&a, &DVector::from_vec(vec![1.0, 0.0])) {
            Err(LinalgError::Singular { step, pivot, .. }) => {
                assert_eq!(step, 1);
                assert_eq!(pivot, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nullspace_examples() {
        let b = nullspace_basis(&DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), 1e-10);
        assert_eq!(b.ncols(), 1);
        assert!(b[(0, 0)].abs() < 1e-15 && (b[(1, 0)].abs() - 1.0).abs() < 1e-15);

        let b = nullspace_basis(&DMatrix::zeros(1, 2), 1e-10);
        assert_eq!(b.ncols(), 2);
        assert!((b.transpose() * &b - DMatrix::identity(2, 2)).amax() < 1e-12);

        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = nullspace_basis(&a, 1e-10);
        assert_eq!(b.ncols(), 1);
        assert!((&a * &b).amax() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b[(0, 0)] - s).abs() < 1e-12 && (b[(1, 0)] + s).abs() < 1e-12);
    }

    #[test]
    fn subspace_eigen_examples() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 5.0]));
        let basis = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(max_eigenvalue_on_subspace(&m, &basis).unwrap(), -2.0);

        let m = DMatrix::from_element(1, 1, -2.0);
        assert_eq!(max_eigenvalue_on_subspace(&m, &DMatrix::identity(1, 1)).unwrap(), -2.0);

        assert_eq!(
            max_eigenvalue_on_subspace(&m, &DMatrix::zeros(1, 0)).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            max_eigenvalue_on_subspace(&m, &DMatrix::identity(2, 2)),
            Err(LinalgError::Asymmetric(_))
        ));
    }

    fn well_conditioned(n: usize) -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>)> {
        (
            proptest::collection::vec(-1.0f64..1.0, n * n),
            proptest::collection::vec(-10.0f64..10.0, n),
        )
            .prop_map(move |(a, b)| {
                // Diagonal shift keeps the condition number moderate.
                let mut m = DMatrix::from_row_slice(n, n, &a);
                for i in 0..n {
                    m[(i, i)] += if m[(i, i)] >= 0.0 { n as f64 } else { -(n as f64) };
                }
                (m, DVector::from_vec(b))
            })
    }

    proptest! {
        #[test]
        fn solve_residual_is_small((a, b) in (1usize..7).prop_flat_map(well_conditioned)) {
            prop_assume!(condition_number(&a) <= 1e6);
            let z = solve_linear(&a, &b).unwrap();
            let r = (&a * z - &b).amax();
            prop_assert!(r <= 1e-8 * b.amax().max(1e-300));
        }

        #[test]
        fn nullspace_is_orthonormal(rows in 0usize..4, cols in 1usize..6, seed in proptest::collection::vec(-2.0f64..2.0, 24)) {
            let a = DMatrix::from_fn(rows, cols, |i, j| seed[(i * cols + j) % seed.len()]);
            let b = nullspace_basis(&a, 1e-10);
            prop_assert!((b.transpose() * &b - DMatrix::identity(b.ncols(), b.ncols())).amax() < 1e-10);
            if b.ncols() > 0 && rows > 0 {
                prop_assert!((&a * &b).amax() <= 1e-10);
            }
        }
    }
}
