//! Polyhedral cones `{d : E d = 0, F d <= 0}`: implicit equalities, face
//! structure and deterministic direction sampling.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{nullspace_basis, select_rows, solve_lp, vstack, LinalgError, LpProblem, LpStatus};

const NULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralCone {
    pub eq: DMatrix<f64>,
    pub ineq: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    /// Only the origin.
    Trivial,
    /// A linear subspace of positive dimension.
    Subspace,
    /// A cone that is not a subspace.
    General,
}

#[derive(Debug, Clone)]
pub struct ConeStructure {
    pub kind: ConeKind,
    /// Inequality rows that hold with equality on the whole cone.
    pub implicit: Vec<usize>,
    /// Orthonormal basis of `{E d = 0, F_implicit d = 0}`, the linear span of the cone.
    pub span: DMatrix<f64>,
}

impl PolyhedralCone {
    pub fn new(eq: DMatrix<f64>, ineq: DMatrix<f64>) -> Self {
        assert_eq!(eq.ncols(), ineq.ncols(), "cone rows must share the ambient dimension");
        PolyhedralCone { eq, ineq }
    }

    pub fn whole_space(dim: usize) -> Self {
        PolyhedralCone::new(DMatrix::zeros(0, dim), DMatrix::zeros(0, dim))
    }

    pub fn dim(&self) -> usize {
        self.eq.ncols()
    }

    pub fn contains(&self, d: &DVector<f64>, tol: f64) -> bool {
        let scale = tol * d.norm().max(1.0);
        (self.eq.nrows() == 0 || (&self.eq * d).amax() <= scale)
            && (self.ineq.nrows() == 0 || (&self.ineq * d).max() <= scale)
    }

    /// Inequality rows `i` with `F_i d = 0` for every `d` in the cone.
    pub fn implicit_equalities(&self, tol: f64) -> Result<Vec<usize>, LinalgError> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..self.ineq.nrows() {
            let c = -self.ineq.row(i).transpose();
            let p = LpProblem::new(c)
                .with_equalities(self.eq.clone(), DVector::zeros(self.eq.nrows()))
                .with_inequalities(self.ineq.clone(), DVector::zeros(self.ineq.nrows()))
                .with_bounds(vec![-1.0; n], vec![1.0; n]);
            let s = solve_lp(&p)?;
            if s.status == LpStatus::Optimal && s.value <= tol {
                out.push(i);
            }
        }
        Ok(out)
    }

    pub fn structure(&self, tol: f64) -> Result<ConeStructure, LinalgError> {
        let implicit = self.implicit_equalities(tol)?;
        let f_eq = select_rows(&self.ineq, &implicit);
        let span = nullspace_basis(&vstack(&[&self.eq, &f_eq], self.dim()), NULL_TOL);
        let kind = if span.ncols() == 0 {
            ConeKind::Trivial
        } else if implicit.len() == self.ineq.nrows() {
            ConeKind::Subspace
        } else {
            ConeKind::General
        };
        Ok(ConeStructure { kind, implicit, span })
    }

    /// Move `d` into the cone by successively forcing the most violated
    /// inequality to equality. Returns a unit vector or `None` if it collapses.
    pub fn pull_into(&self, d: &DVector<f64>, structure: &ConeStructure, tol: f64) -> Option<DVector<f64>> {
        let n = self.dim();
        let free: Vec<usize> = (0..self.ineq.nrows())
            .filter(|i| !structure.implicit.contains(i))
            .collect();
        let mut forced: Vec<usize> = structure.implicit.clone();
        let mut cur = &structure.span * (structure.span.transpose() * d);
        loop {
            let norm = cur.norm();
            if norm <= 1e-12 {
                return None;
            }
            let worst = free
                .iter()
                .filter(|i| !forced.contains(i))
                .map(|&i| (i, self.ineq.row(i).dot(&cur.transpose()) / norm))
                .filter(|&(_, v)| v > tol)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                None => return Some(cur / norm),
                Some((i, _)) => {
                    forced.push(i);
                    let rows = select_rows(&self.ineq, &forced);
                    let basis = nullspace_basis(&vstack(&[&self.eq, &rows], n), NULL_TOL);
                    if basis.ncols() == 0 {
                        return None;
                    }
                    cur = &basis * (basis.transpose() * d);
                }
            }
        }
    }

    /// Deterministic unit directions in the cone: signed span-basis vectors
    /// that lie in the cone, followed by Gaussian samples pulled onto the cone.
    pub fn sample_directions(&self, structure: &ConeStructure, count: usize, seed: u64, tol: f64) -> Vec<DVector<f64>> {
        let mut out: Vec<DVector<f64>> = Vec::with_capacity(count);
        if structure.kind == ConeKind::Trivial || count == 0 {
            return out;
        }
        let k = structure.span.ncols();
        for j in 0..k {
            for sign in [1.0, -1.0] {
                let d = structure.span.column(j) * sign;
                if self.contains(&d, tol) && out.len() < count {
                    out.push(d);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut attempts = 0;
        while out.len() < count && attempts < 20 * count {
            attempts += 1;
            let t = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            let d = &structure.span * t;
            if let Some(p) = self.pull_into(&d, structure, tol) {
                out.push(p);
            }
        }
        out
    }
}
