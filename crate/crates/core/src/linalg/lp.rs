//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Problems are stated as `maximize cᵀz` subject to `A_eq z = b_eq`,
//! `A_in z <= b_in` and per-variable bounds (infinite bounds allowed).

use nalgebra::{DMatrix, DVector};

use super::{lu_factor, LinalgError};

const PIVOT_EPS: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const MAX_ITER: usize = 50_000;

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub c: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// Maximize `cᵀz` over free variables with no constraints.
    pub fn new(c: DVector<f64>) -> Self {
        let n = c.len();
        LpProblem {
            c,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn bound(mut self, var: usize, lower: f64, upper: f64) -> Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    fn validate(&self) -> Result<(), LinalgError> {
        let n = self.num_vars();
        let ok = self.a_eq.ncols() == n
            && self.a_in.ncols() == n
            && self.a_eq.nrows() == self.b_eq.len()
            && self.a_in.nrows() == self.b_in.len()
            && self.lower.len() == n
            && self.upper.len() == n;
        if !ok {
            return Err(LinalgError::Dimension("inconsistent LP dimensions".into()));
        }
        Ok(())
    }

    /// Largest violation of the constraints and bounds at `z`.
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let mut worst = 0.0f64;
        if self.a_eq.nrows() > 0 {
            worst = worst.max((&self.a_eq * z - &self.b_eq).amax());
        }
        if self.a_in.nrows() > 0 {
            let r = &self.a_in * z - &self.b_in;
            worst = worst.max(r.iter().fold(0.0f64, |a, v| a.max(*v)));
        }
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - z[j]).max(z[j] - self.upper[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point (zeros unless `status == Optimal`).
    pub z: DVector<f64>,
    /// Optimal value (`±∞` / NaN for unbounded / infeasible).
    pub value: f64,
    /// Objective reproduced from the dual multipliers of the final basis.
    pub dual_value: f64,
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// z = offset + s
    Shift { col: usize, offset: f64 },
    /// z = offset - s
    Reflect { col: usize, offset: f64 },
    /// z = s⁺ - s⁻
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    c_offset: f64,
    maps: Vec<VarMap>,
}

fn to_standard(p: &LpProblem) -> StandardForm {
    let n = p.num_vars();
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut box_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (p.lower[j], p.upper[j]);
        let map = if l.is_finite() {
            if u.is_finite() {
                box_rows.push((ncols, u - l));
            }
            VarMap::Shift { col: ncols, offset: l }
        } else if u.is_finite() {
            VarMap::Reflect { col: ncols, offset: u }
        } else {
            ncols += 1;
            VarMap::Split {
                pos: ncols - 1,
                neg: ncols,
            }
        };
        ncols += 1;
        maps.push(map);
    }
    let n_eq = p.a_eq.nrows();
    let n_in = p.a_in.nrows() + box_rows.len();
    let total_cols = ncols + n_in;
    let rows = n_eq + n_in;
    let mut a = DMatrix::zeros(rows, total_cols);
    let mut b = DVector::zeros(rows);

    let put_row = |r: usize, coeffs: &dyn Fn(usize) -> f64, rhs: f64, a: &mut DMatrix<f64>, b: &mut DVector<f64>| {
        let mut rhs = rhs;
        for (j, map) in maps.iter().enumerate() {
            let v = coeffs(j);
            if v == 0.0 {
                continue;
            }
            match *map {
                VarMap::Shift { col, offset } => {
                    a[(r, col)] += v;
                    rhs -= v * offset;
                }
                VarMap::Reflect { col, offset } => {
                    a[(r, col)] -= v;
                    rhs -= v * offset;
                }
                VarMap::Split { pos, neg } => {
                    a[(r, pos)] += v;
                    a[(r, neg)] -= v;
                }
            }
        }
        b[r] = rhs;
    };
    for i in 0..n_eq {
        put_row(i, &|j| p.a_eq[(i, j)], p.b_eq[i], &mut a, &mut b);
    }
    for i in 0..p.a_in.nrows() {
        let r = n_eq + i;
        put_row(r, &|j| p.a_in[(i, j)], p.b_in[i], &mut a, &mut b);
        a[(r, ncols + i)] = 1.0;
    }
    for (k, &(col, width)) in box_rows.iter().enumerate() {
        let r = n_eq + p.a_in.nrows() + k;
        a[(r, col)] = 1.0;
        a[(r, ncols + p.a_in.nrows() + k)] = 1.0;
        b[r] = width;
    }

    let mut c = DVector::zeros(total_cols);
    let mut c_offset = 0.0;
    for (j, map) in maps.iter().enumerate() {
        let v = p.c[j];
        match *map {
            VarMap::Shift { col, offset } => {
                c[col] += v;
                c_offset += v * offset;
            }
            VarMap::Reflect { col, offset } => {
                c[col] -= v;
                c_offset += v * offset;
            }
            VarMap::Split { pos, neg } => {
                c[pos] += v;
                c[neg] -= v;
            }
        }
    }
    // Nonnegative right-hand side.
    for r in 0..rows {
        if b[r] < 0.0 {
            b[r] = -b[r];
            for j in 0..total_cols {
                a[(r, j)] = -a[(r, j)];
            }
        }
    }
    StandardForm {
        a,
        b,
        c,
        c_offset,
        maps,
    }
}

struct Tableau {
    /// rows × (cols + 1); last column is the right-hand side.
    t: DMatrix<f64>,
    /// Reduced-cost row, length cols + 1 (last entry = -objective).
    obj: DVector<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.t.ncols();
        let p = self.t[(r, col)];
        for j in 0..w {
            self.t[(r, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i != r {
                let f = self.t[(i, col)];
                if f != 0.0 {
                    for j in 0..w {
                        let v = self.t[(r, j)];
                        self.t[(i, j)] -= f * v;
                    }
                }
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for j in 0..w {
                self.obj[j] -= f * self.t[(r, j)];
            }
        }
        self.basis[r] = col;
    }

    fn set_costs(&mut self, c: &DVector<f64>) {
        let w = self.t.ncols();
        self.obj = DVector::zeros(w);
        for j in 0..self.cols {
            self.obj[j] = c[j];
        }
        for (i, &bcol) in self.basis.iter().enumerate() {
            let cb = c[bcol];
            if cb != 0.0 {
                for j in 0..w {
                    self.obj[j] -= cb * self.t[(i, j)];
                }
            }
        }
    }

    /// Run Bland-rule iterations. Returns false when unbounded.
    fn optimize(&mut self, allowed: &dyn Fn(usize) -> bool, iters: &mut usize) -> Result<bool, LinalgError> {
        let rhs = self.t.ncols() - 1;
        loop {
            let Some(enter) = (0..self.cols).find(|&j| allowed(j) && self.obj[j] > PIVOT_EPS) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.nrows() {
                let a = self.t[(i, enter)];
                if a > PIVOT_EPS {
                    let ratio = self.t[(i, rhs)] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12 || ((ratio - br).abs() <= 1e-12 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, enter);
            *iters += 1;
            if *iters > MAX_ITER {
                return Err(LinalgError::IterationCap(MAX_ITER));
            }
        }
    }
}

/// Solve an LP by two-phase simplex with Bland's rule.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LinalgError> {
    p.validate()?;
    let n = p.num_vars();
    let sf = to_standard(p);
    let rows = sf.a.nrows();
    let cols = sf.a.ncols();
    let fail = |status: LpStatus| LpSolution {
        status,
        z: DVector::zeros(n),
        value: if status == LpStatus::Unbounded {
            f64::INFINITY
        } else {
            f64::NAN
        },
        dual_value: f64::NAN,
    };

    // Phase 1 with one artificial per row.
    let total = cols + rows;
    let mut t = DMatrix::zeros(rows, total + 1);
    t.view_mut((0, 0), (rows, cols)).copy_from(&sf.a);
    for i in 0..rows {
        t[(i, cols + i)] = 1.0;
        t[(i, total)] = sf.b[i];
    }
    let mut tab = Tableau {
        t,
        obj: DVector::zeros(total + 1),
        basis: (cols..total).collect(),
        cols: total,
    };
    let mut phase1_cost = DVector::zeros(total);
    for i in 0..rows {
        phase1_cost[cols + i] = -1.0;
    }
    tab.set_costs(&phase1_cost);
    let mut iters = 0;
    tab.optimize(&|_| true, &mut iters)?;
    let infeas = tab.obj[total];
    let bscale = sf.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if infeas > FEAS_TOL * bscale {
        return Ok(fail(LpStatus::Infeasible));
    }

    // Drive artificials out of the basis, dropping redundant rows.
    let mut row_ids: Vec<usize> = (0..rows).collect();
    let mut r = 0;
    while r < tab.t.nrows() {
        if tab.basis[r] >= cols {
            if let Some(j) = (0..cols).find(|&j| tab.t[(r, j)].abs() > PIVOT_EPS) {
                tab.pivot(r, j);
                r += 1;
            } else {
                tab.t = tab.t.clone().remove_row(r);
                tab.basis.remove(r);
                row_ids.remove(r);
            }
        } else {
            r += 1;
        }
    }

    let mut phase2_cost = DVector::zeros(total);
    phase2_cost.rows_mut(0, cols).copy_from(&sf.c);
    tab.set_costs(&phase2_cost);
    let bounded = tab.optimize(&|j| j < cols, &mut iters)?;
    if !bounded {
        return Ok(fail(LpStatus::Unbounded));
    }

    let mut s = DVector::zeros(cols);
    for (i, &bcol) in tab.basis.iter().enumerate() {
        s[bcol] = tab.t[(i, total)].max(0.0);
    }
    let z = DVector::from_iterator(
        n,
        sf.maps.iter().map(|m| match *m {
            VarMap::Shift { col, offset } => offset + s[col],
            VarMap::Reflect { col, offset } => offset - s[col],
            VarMap::Split { pos, neg } => s[pos] - s[neg],
        }),
    );
    let value = p.c.dot(&z);

    // Dual multipliers of the final basis: Bᵀ y = c_B over the kept rows.
    let dual_value = {
        let kept = &row_ids;
        let m = tab.basis.len();
        if m == 0 {
            sf.c_offset
        } else {
            let bmat = DMatrix::from_fn(m, m, |i, k| sf.a[(kept[i], tab.basis[k])]);
            let cb = DVector::from_iterator(m, tab.basis.iter().map(|&j| sf.c[j]));
            match lu_factor(&bmat) {
                Ok(lu) => {
                    let y = lu.solve_transpose(&cb);
                    let bk = DVector::from_iterator(m, kept.iter().map(|&i| sf.b[i]));
                    bk.dot(&y) + sf.c_offset
                }
                Err(_) => f64::NAN,
            }
        }
    };

    Ok(LpSolution {
        status: LpStatus::Optimal,
        z,
        value,
        dual_value,
    })
}
