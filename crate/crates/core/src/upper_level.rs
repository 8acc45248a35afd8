//! First- and second-order conditions on the outer minimization over `Φ`,
//! built on MFCQ and the multiplier polytope `Λ(x*)`.

use nalgebra::{DMatrix, DVector};

use crate::config::CheckConfig;
use crate::error::{Error, Result};
use crate::generalized_jacobian::{clarke_selectors, enumerate_b_selectors, phi_candidate_gradient, WSelector};
use crate::linalg::{
    min_eigen_on_subspace, row_independence, select_rows, solve_lp, vstack, ConeKind, ConeStructure, LpProblem,
    LpStatus, PolyhedralCone,
};
use crate::lower_level::{classify_partition, KktSolution};
use crate::problem::{FunctionEval, ProblemSpec};
use crate::report::{ConditionResult, Method, Role, Status};
use crate::value_function::phi_hessian;

pub mod names {
    pub const MFCQ: &str = "upper.mfcq";
    pub const FIRST_ORDER: &str = "upper.first_order";
    pub const SECOND_ORDER_NECESSARY: &str = "upper.second_order_necessary";
    pub const SECOND_ORDER_SUFFICIENT: &str = "upper.second_order_sufficient";
    pub const NONSMOOTH_FIRST_ORDER: &str = "upper.nonsmooth_first_order";
}

/// Column-rank threshold for vertex bases, relative to the column scale.
const BASIS_RTOL: f64 = 1e-10;

/// Values and derivatives of `H` and `G` at one `x`.
#[derive(Debug, Clone)]
pub struct UpperData {
    pub eq: Vec<FunctionEval>,
    pub ineq: Vec<FunctionEval>,
    /// `J H` (n1 × n).
    pub jac_eq: DMatrix<f64>,
    /// `J G` (n2 × n).
    pub jac_ineq: DMatrix<f64>,
}

impl UpperData {
    pub fn new(spec: &ProblemSpec, x: &[f64]) -> Result<Self> {
        let (eq, ineq) = spec.eval_upper(x)?;
        let n = x.len();
        let rows = |v: &[FunctionEval]| DMatrix::from_fn(v.len(), n, |i, j| v[i].grad_x[j]);
        Ok(UpperData {
            jac_eq: rows(&eq),
            jac_ineq: rows(&ineq),
            eq,
            ineq,
        })
    }

    pub fn n(&self) -> usize {
        self.jac_eq.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpperActiveSet {
    /// `I(x) = {i : |G_i(x)| <= tol_act}`.
    pub active: Vec<usize>,
    pub n1: usize,
}

pub fn upper_active_set(data: &UpperData, tol_act: f64) -> Result<UpperActiveSet> {
    for (j, e) in data.eq.iter().enumerate() {
        if e.value.abs() > tol_act {
            return Err(Error::Infeasible(format!("H{} = {:e} is not zero", j + 1, e.value)));
        }
    }
    let mut active = Vec::new();
    for (i, e) in data.ineq.iter().enumerate() {
        if e.value > tol_act {
            return Err(Error::Infeasible(format!("G{} = {:e} is positive", i + 1, e.value)));
        }
        if e.value >= -tol_act {
            active.push(i);
        }
    }
    Ok(UpperActiveSet {
        active,
        n1: data.eq.len(),
    })
}

#[derive(Debug, Clone)]
pub struct MfcqReport {
    pub result: ConditionResult,
    /// Optimal `t` of the direction LP.
    pub t_star: f64,
    /// Smallest singular value of `J H`.
    pub rank_sigma: f64,
    pub witness: Option<DVector<f64>>,
}

/// Rank of `J H` plus the LP `max t` s.t. `J H d = 0`, `∇G_i d + t <= 0`
/// (`i ∈ I`), `|d| <= 1`, `t <= 1`.
pub fn check_mfcq(spec: &ProblemSpec, x: &[f64], config: &CheckConfig) -> Result<MfcqReport> {
    let data = UpperData::new(spec, x)?;
    let act = upper_active_set(&data, config.tol_act)?;
    let n = data.n();
    let rank_sigma = row_independence(&data.jac_eq);
    let ga = select_rows(&data.jac_ineq, &act.active);
    let mut a_in = DMatrix::zeros(ga.nrows(), n + 1);
    a_in.view_mut((0, 0), (ga.nrows(), n)).copy_from(&ga);
    a_in.column_mut(n).fill(1.0);
    let mut a_eq = DMatrix::zeros(act.n1, n + 1);
    a_eq.view_mut((0, 0), (act.n1, n)).copy_from(&data.jac_eq);
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    let mut lower = vec![-1.0; n + 1];
    let mut upper = vec![1.0; n + 1];
    lower[n] = f64::NEG_INFINITY;
    upper[n] = 1.0;
    let lp = LpProblem::new(c)
        .with_equalities(a_eq, DVector::zeros(act.n1))
        .with_inequalities(a_in, DVector::zeros(ga.nrows()))
        .with_bounds(lower, upper);
    let sol = solve_lp(&lp)?;
    let (t_star, witness) = match sol.status {
        LpStatus::Optimal => (sol.value, Some(sol.z.rows(0, n).into_owned())),
        _ => (f64::NEG_INFINITY, None),
    };
    let rank_ok = rank_sigma >= config.tol_licq;
    let status = if rank_ok && t_star > config.tol_mfcq {
        Status::Satisfied
    } else {
        Status::Violated
    };
    let mut result = ConditionResult::new(
        names::MFCQ,
        Role::Qualification,
        Method::Lp,
        status,
        if rank_ok { t_star } else { rank_sigma },
        config.tol_mfcq,
    )
    .with_detail(format!(
        "|I| = {}, smallest singular value of J H = {rank_sigma:e}, optimal t = {t_star:e}",
        act.active.len()
    ));
    if let Some(d) = &witness {
        result = result.with_witness(d.iter().copied());
    }
    Ok(MfcqReport {
        result,
        t_star,
        rank_sigma,
        witness,
    })
}

/// `Λ = {(u, v) : J Hᵀ u + J Gᵀ v = −r₀, v_I >= 0, v_i = 0 off I}`.
#[derive(Debug, Clone)]
pub struct LambdaPolytope {
    pub r0: DVector<f64>,
    pub active: Vec<usize>,
    pub n1: usize,
    pub n2: usize,
    /// `[J Hᵀ, J G_Iᵀ]`.
    pub columns: DMatrix<f64>,
    /// `min ‖J Hᵀ u + J G_Iᵀ v_I + r₀‖∞` over `v_I >= 0`.
    pub distance: f64,
    /// A minimizer of `distance`, as `(u, v)` with `v` of length `n2`.
    pub point: Option<(DVector<f64>, DVector<f64>)>,
    pub vertices: Vec<(DVector<f64>, DVector<f64>)>,
    /// False when `n1 + |I|` exceeds the enumeration cap.
    pub enumerated: bool,
    pub bounded: bool,
    tol: f64,
}

impl LambdaPolytope {
    pub fn is_nonempty(&self) -> bool {
        self.distance <= self.tol
    }

    pub fn is_singleton(&self) -> bool {
        self.is_nonempty() && self.bounded && self.enumerated && self.vertices.len() == 1
    }

    fn split(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let u = z.rows(0, self.n1).into_owned();
        let mut v = DVector::zeros(self.n2);
        for (k, &i) in self.active.iter().enumerate() {
            v[i] = z[self.n1 + k];
        }
        (u, v)
    }

    /// `max cᵤᵀu + c_vᵀv` over `Λ` (`+∞` if unbounded, `−∞` if empty).
    pub fn max_linear(&self, cu: &DVector<f64>, cv: &DVector<f64>) -> Result<f64> {
        if !self.is_nonempty() {
            return Ok(f64::NEG_INFINITY);
        }
        let eval = |u: &DVector<f64>, v: &DVector<f64>| cu.dot(u) + cv.dot(v);
        if self.enumerated && self.bounded && !self.vertices.is_empty() {
            return Ok(self
                .vertices
                .iter()
                .map(|(u, v)| eval(u, v))
                .fold(f64::NEG_INFINITY, f64::max));
        }
        let k = self.columns.ncols();
        let c = DVector::from_fn(k, |j, _| {
            if j < self.n1 {
                cu[j]
            } else {
                cv[self.active[j - self.n1]]
            }
        });
        let mut lower = vec![f64::NEG_INFINITY; k];
        for l in lower.iter_mut().skip(self.n1) {
            *l = 0.0;
        }
        // Relax the equality by the attained distance so numerically
        // nonempty polytopes stay feasible.
        let slack = self.distance.max(0.0) + 1e-12 * (1.0 + self.r0.amax());
        let a = vstack(&[&self.columns, &(-&self.columns)], k);
        let b = vstack_vec2(&(-&self.r0).add_scalar(slack), &self.r0.add_scalar(slack));
        let lp = LpProblem::new(c)
            .with_inequalities(a, b)
            .with_bounds(lower, vec![f64::INFINITY; k]);
        let s = solve_lp(&lp)?;
        Ok(match s.status {
            LpStatus::Optimal => s.value,
            LpStatus::Unbounded => f64::INFINITY,
            LpStatus::Infeasible => f64::NEG_INFINITY,
        })
    }
}

fn vstack_vec2(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

fn full_column_rank(a: &DMatrix<f64>) -> bool {
    if a.ncols() == 0 {
        return true;
    }
    row_independence(&a.transpose()) > BASIS_RTOL * a.amax().max(1.0)
}

pub fn upper_kkt_and_polytope(
    spec: &ProblemSpec,
    x: &[f64],
    working_grad: &DVector<f64>,
    config: &CheckConfig,
) -> Result<LambdaPolytope> {
    let data = UpperData::new(spec, x)?;
    let act = upper_active_set(&data, config.tol_act)?;
    polytope_from(&data, &act, working_grad, config)
}

pub(crate) fn polytope_from(
    data: &UpperData,
    act: &UpperActiveSet,
    r0: &DVector<f64>,
    config: &CheckConfig,
) -> Result<LambdaPolytope> {
    let n = data.n();
    if r0.len() != n {
        return Err(Error::Dimension(format!(
            "working gradient has length {}, expected {n}",
            r0.len()
        )));
    }
    let n1 = act.n1;
    let columns = vstack(&[&data.jac_eq, &select_rows(&data.jac_ineq, &act.active)], n).transpose();
    let k = columns.ncols();
    let mut poly = LambdaPolytope {
        r0: r0.clone(),
        active: act.active.clone(),
        n1,
        n2: data.ineq.len(),
        columns: columns.clone(),
        distance: f64::INFINITY,
        point: None,
        vertices: Vec::new(),
        enumerated: false,
        bounded: false,
        tol: config.tol_kkt,
    };

    // Distance LP over (z, s): min s with |columns z + r0| <= s, v >= 0.
    let mut a = DMatrix::zeros(2 * n, k + 1);
    a.view_mut((0, 0), (n, k)).copy_from(&columns);
    a.view_mut((n, 0), (n, k)).copy_from(&(-&columns));
    a.column_mut(k).fill(-1.0);
    let b = vstack_vec2(&(-r0), r0);
    let mut c = DVector::zeros(k + 1);
    c[k] = -1.0;
    let mut lower = vec![f64::NEG_INFINITY; k + 1];
    for l in lower.iter_mut().skip(n1) {
        *l = 0.0;
    }
    let lp = LpProblem::new(c)
        .with_inequalities(a, b)
        .with_bounds(lower, vec![f64::INFINITY; k + 1]);
    let s = solve_lp(&lp)?;
    if s.status == LpStatus::Optimal {
        let z = s.z.rows(0, k).into_owned();
        poly.distance = (&columns * &z + r0).amax();
        poly.point = Some(poly.split(&z));
    }
    if !poly.is_nonempty() {
        return Ok(poly);
    }

    // Boundedness: J Hᵀ injective and no nonzero v >= 0 in the recession cone.
    let eq_cols = columns.columns(0, n1).into_owned();
    let mut bounded = full_column_rank(&eq_cols);
    if bounded && k > n1 {
        let mut c = DVector::zeros(k);
        for j in n1..k {
            c[j] = 1.0;
        }
        let mut lower = vec![f64::NEG_INFINITY; k];
        for l in lower.iter_mut().skip(n1) {
            *l = 0.0;
        }
        let mut a_in = DMatrix::zeros(1, k);
        for j in n1..k {
            a_in[(0, j)] = 1.0;
        }
        let lp = LpProblem::new(c)
            .with_equalities(columns.clone(), DVector::zeros(n))
            .with_inequalities(a_in, DVector::from_element(1, 1.0))
            .with_bounds(lower, vec![f64::INFINITY; k]);
        let s = solve_lp(&lp)?;
        bounded = s.status == LpStatus::Optimal && s.value <= 1e-9;
    }
    poly.bounded = bounded;

    if n1 + act.active.len() <= config.vertex_cap {
        poly.enumerated = true;
        let ni = act.active.len();
        let vtol = 1e-9 * (1.0 + r0.amax());
        for mask in 0u64..(1 << ni) {
            let support: Vec<usize> = (0..n1)
                .chain((0..ni).filter(|&t| (mask >> t) & 1 == 1).map(|t| n1 + t))
                .collect();
            let sub = DMatrix::from_fn(n, support.len(), |i, j| columns[(i, support[j])]);
            if !full_column_rank(&sub) {
                continue;
            }
            let zs = if sub.ncols() == 0 {
                DVector::zeros(0)
            } else {
                match sub.clone().svd(true, true).solve(&(-r0), 1e-14) {
                    Ok(z) => z,
                    Err(_) => continue,
                }
            };
            let resid = if sub.ncols() == 0 {
                r0.amax()
            } else {
                (&sub * &zs + r0).amax()
            };
            if resid > vtol || zs.iter().skip(n1).any(|&v| v < -vtol) {
                continue;
            }
            let mut z = DVector::zeros(k);
            for (j, &col) in support.iter().enumerate() {
                z[col] = if col >= n1 { zs[j].max(0.0) } else { zs[j] };
            }
            let vert = poly.split(&z);
            let dup = poly
                .vertices
                .iter()
                .any(|(u, v)| (u - &vert.0).amax().max((v - &vert.1).amax()) <= vtol);
            if !dup {
                poly.vertices.push(vert);
            }
        }
    }
    Ok(poly)
}

/// Upper-level critical cone.
#[derive(Debug, Clone)]
pub struct UpperCone {
    /// `{d : J H d = 0, ∇G_I d <= 0, r₀ᵀd <= 0}`.
    pub literal: PolyhedralCone,
    /// The same cone with `∇G_i d = 0` for every `i` carrying a positive
    /// multiplier in `Λ`.
    pub reduced: PolyhedralCone,
    pub strongly_active: Vec<usize>,
}

pub fn critical_cone_upper(
    spec: &ProblemSpec,
    x: &[f64],
    working_grad: &DVector<f64>,
    polytope: Option<&LambdaPolytope>,
    config: &CheckConfig,
) -> Result<UpperCone> {
    let data = UpperData::new(spec, x)?;
    let act = upper_active_set(&data, config.tol_act)?;
    Ok(cone_from(&data, &act, working_grad, polytope, config))
}

pub(crate) fn cone_from(
    data: &UpperData,
    act: &UpperActiveSet,
    r0: &DVector<f64>,
    polytope: Option<&LambdaPolytope>,
    config: &CheckConfig,
) -> UpperCone {
    let n = data.n();
    let ga = select_rows(&data.jac_ineq, &act.active);
    let r_row = DMatrix::from_row_slice(1, n, r0.as_slice());
    let literal = PolyhedralCone::new(data.jac_eq.clone(), vstack(&[&ga, &r_row], n));
    let mut strongly_active = Vec::new();
    if let Some(p) = polytope.filter(|p| p.is_nonempty()) {
        let mut pts: Vec<&(DVector<f64>, DVector<f64>)> = p.vertices.iter().collect();
        if let Some(pt) = &p.point {
            pts.push(pt);
        }
        for &i in &act.active {
            if pts.iter().any(|(_, v)| v[i] > config.tol_act) {
                strongly_active.push(i);
            }
        }
    }
    let weak: Vec<usize> = act
        .active
        .iter()
        .copied()
        .filter(|i| !strongly_active.contains(i))
        .collect();
    let eq = vstack(&[&data.jac_eq, &select_rows(&data.jac_ineq, &strongly_active)], n);
    let ineq = vstack(&[&select_rows(&data.jac_ineq, &weak), &r_row], n);
    UpperCone {
        literal,
        reduced: PolyhedralCone::new(eq, ineq),
        strongly_active,
    }
}

/// Second-order form `q(d) = max_Λ ⟨[Σ u_j ∇²H_j + Σ v_i ∇²G_i] d, d⟩ + ⟨∇²φ d, d⟩`.
struct SecondOrderForm<'a> {
    data: &'a UpperData,
    hess_phi: &'a DMatrix<f64>,
    polytope: &'a LambdaPolytope,
}

impl SecondOrderForm<'_> {
    fn q(&self, d: &DVector<f64>) -> Result<f64> {
        let quad = |e: &FunctionEval| (d.transpose() * &e.hess_xx * d)[(0, 0)];
        let cu = DVector::from_iterator(self.data.eq.len(), self.data.eq.iter().map(quad));
        let cv = DVector::from_iterator(self.data.ineq.len(), self.data.ineq.iter().map(quad));
        Ok(self.polytope.max_linear(&cu, &cv)? + (d.transpose() * self.hess_phi * d)[(0, 0)])
    }

    /// The constant matrix when `Λ` is a single point.
    fn singleton_matrix(&self) -> Option<DMatrix<f64>> {
        if !self.polytope.is_singleton() {
            return None;
        }
        let (u, v) = &self.polytope.vertices[0];
        let mut m = self.hess_phi.clone();
        for (j, e) in self.data.eq.iter().enumerate() {
            m += &e.hess_xx * u[j];
        }
        for (i, e) in self.data.ineq.iter().enumerate() {
            m += &e.hess_xx * v[i];
        }
        Some((&m + m.transpose()) * 0.5)
    }
}

/// Exact minimum of `dᵀ M d` over unit `d` in the span, when applicable.
fn exact_min(form: &SecondOrderForm, st: &ConeStructure) -> Result<Option<(f64, DVector<f64>)>> {
    if st.kind != ConeKind::Subspace {
        return Ok(None);
    }
    let Some(m) = form.singleton_matrix() else {
        return Ok(None);
    };
    Ok(min_eigen_on_subspace(&m, &st.span)?.map(|e| (e.value, e.vector)))
}

fn sampled_min(
    form: &SecondOrderForm,
    cone: &PolyhedralCone,
    st: &ConeStructure,
    config: &CheckConfig,
) -> Result<(f64, DVector<f64>, usize)> {
    let dirs = cone.sample_directions(st, config.upper_cone_samples, config.seed, config.tol_act);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for d in &dirs {
        let q = form.q(d)?;
        if best.as_ref().is_none_or(|b| q < b.0) {
            best = Some((q, d.clone()));
        }
    }
    let (mut q, mut d) =
        best.ok_or_else(|| Error::Precondition("no directions could be sampled from the cone".into()))?;
    // Coordinate search in the span, pulled back onto the cone.
    let mut step = 0.1;
    while step > 1e-4 {
        let mut improved = false;
        for j in 0..st.span.ncols() {
            for sign in [1.0, -1.0] {
                let trial = &d + st.span.column(j) * (sign * step);
                if let Some(t) = cone.pull_into(&trial, st, config.tol_act) {
                    let qt = form.q(&t)?;
                    if qt < q {
                        q = qt;
                        d = t;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((q, d, dirs.len()))
}

fn smooth_inputs(spec: &ProblemSpec, x: &[f64], sol: &KktSolution) -> Result<(UpperData, DMatrix<f64>)> {
    if sol.x.as_slice() != x {
        return Err(Error::Precondition("solution was computed at a different x".into()));
    }
    let data = UpperData::new(spec, x)?;
    let hess = phi_hessian(spec, sol)?.matrix;
    Ok((data, hess))
}

pub fn second_order_necessary(
    spec: &ProblemSpec,
    x: &[f64],
    sol: &KktSolution,
    polytope: &LambdaPolytope,
    cone: &UpperCone,
    config: &CheckConfig,
) -> Result<ConditionResult> {
    let name = names::SECOND_ORDER_NECESSARY;
    if !polytope.is_nonempty() {
        return Ok(ConditionResult::skipped(name, Role::Necessary, "Λ is empty"));
    }
    let st = cone.reduced.structure(config.tol_act)?;
    let tol = config.tol_pd;
    if st.kind == ConeKind::Trivial {
        return Ok(ConditionResult::new(
            name,
            Role::Necessary,
            Method::Exact,
            Status::Satisfied,
            f64::INFINITY,
            tol,
        )
        .with_detail("critical cone is {0}"));
    }
    let (data, hess_phi) = smooth_inputs(spec, x, sol)?;
    let form = SecondOrderForm {
        data: &data,
        hess_phi: &hess_phi,
        polytope,
    };
    if let Some((v, d)) = exact_min(&form, &st)? {
        let status = if v >= -tol { Status::Satisfied } else { Status::Violated };
        let mut r = ConditionResult::new(name, Role::Necessary, Method::Exact, status, v, tol).with_detail(format!(
            "smallest eigenvalue of the reduced second-order matrix on a {}-dimensional subspace, Λ a single point",
            st.span.ncols()
        ));
        if status == Status::Violated {
            r = r.with_witness(d.iter().copied());
        }
        return Ok(r);
    }
    let (q, d, count) = sampled_min(&form, &cone.reduced, &st, config)?;
    let status = if q >= -tol { Status::Satisfied } else { Status::Violated };
    let mut r = ConditionResult::new(name, Role::Necessary, Method::Sampled, status, q, tol).with_detail(format!(
        "minimum of q(d) over {count} sampled unit cone directions after refinement"
    ));
    if status == Status::Violated {
        r = r.with_witness(d.iter().copied());
    }
    Ok(r)
}

pub fn second_order_sufficient(
    spec: &ProblemSpec,
    x: &[f64],
    sol: &KktSolution,
    polytope: &LambdaPolytope,
    cone: &UpperCone,
    config: &CheckConfig,
) -> Result<ConditionResult> {
    let name = names::SECOND_ORDER_SUFFICIENT;
    if !polytope.is_nonempty() {
        return Ok(ConditionResult::skipped(name, Role::Sufficient, "Λ is empty"));
    }
    let st = cone.reduced.structure(config.tol_act)?;
    let tol = config.tol_pd;
    if st.kind == ConeKind::Trivial {
        return Ok(ConditionResult::new(
            name,
            Role::Sufficient,
            Method::Exact,
            Status::Satisfied,
            f64::INFINITY,
            tol,
        )
        .with_detail("critical cone is {0}; the condition holds vacuously"));
    }
    let (data, hess_phi) = smooth_inputs(spec, x, sol)?;
    let form = SecondOrderForm {
        data: &data,
        hess_phi: &hess_phi,
        polytope,
    };
    if let Some((v, d)) = exact_min(&form, &st)? {
        let status = if v >= tol { Status::Satisfied } else { Status::Violated };
        let mut r = ConditionResult::new(name, Role::Sufficient, Method::Exact, status, v, tol).with_detail(format!(
            "smallest eigenvalue of the reduced second-order matrix on a {}-dimensional subspace; growth constant estimate {v:e}",
            st.span.ncols()
        ));
        if status == Status::Violated {
            r = r.with_witness(d.iter().copied());
        }
        return Ok(r);
    }
    let (q, d, count) = sampled_min(&form, &cone.reduced, &st, config)?;
    let status = if q >= tol {
        Status::Satisfied
    } else {
        Status::Inconclusive
    };
    let mut r = ConditionResult::new(name, Role::Sufficient, Method::Sampled, status, q, tol).with_detail(format!(
        "sampled over {count} unit cone directions after refinement; minimum (growth constant estimate) {q:e}"
    ));
    if status == Status::Inconclusive {
        r = r.with_witness(d.iter().copied());
    }
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct NonsmoothFirstOrder {
    pub result: ConditionResult,
    /// `(W, u, v)` satisfying the stationarity system, when found.
    pub certificate: Option<(WSelector, DVector<f64>, DVector<f64>)>,
    /// Distance from `−r(W)` to the multiplier cone, per tested selector.
    pub per_selector: Vec<(WSelector, f64)>,
}

/// Search over selectors for `W` with `r(W) + J Hᵀu + J Gᵀv = 0`, `v_I >= 0`.
pub fn first_order_nonsmooth_necessary(
    spec: &ProblemSpec,
    x: &[f64],
    sol: &KktSolution,
    config: &CheckConfig,
) -> Result<NonsmoothFirstOrder> {
    if sol.x.as_slice() != x {
        return Err(Error::Precondition("solution was computed at a different x".into()));
    }
    let (_, g) = spec.lower_constraint_values(x, sol.y.as_slice())?;
    let part = classify_partition(g.as_slice(), sol.lambda.as_slice(), config.tol_act)?;
    let data = UpperData::new(spec, x)?;
    let act = upper_active_set(&data, config.tol_act)?;
    let mut selectors = enumerate_b_selectors(&part, config.beta_cap)?;
    for w in clarke_selectors(&part, config.clarke_resolution, config.beta_cap)? {
        if !selectors.contains(&w) {
            selectors.push(w);
        }
    }
    let mut per_selector = Vec::new();
    let mut best: Option<(f64, WSelector, LambdaPolytope)> = None;
    let mut singular = 0;
    for w in selectors {
        let r = match phi_candidate_gradient(spec, sol, &w) {
            Ok(r) => r,
            Err(Error::Linalg(_)) => {
                singular += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let poly = polytope_from(&data, &act, &r, config)?;
        per_selector.push((w.clone(), poly.distance));
        let found = poly.is_nonempty();
        if best.as_ref().is_none_or(|b| poly.distance < b.0) {
            best = Some((poly.distance, w, poly));
        }
        if found {
            break;
        }
    }
    let Some((dist, w, poly)) = best else {
        return Err(Error::Precondition(format!(
            "A(x, W) is singular for all {singular} selectors"
        )));
    };
    let name = names::NONSMOOTH_FIRST_ORDER;
    let tol = config.tol_kkt;
    if poly.is_nonempty() {
        let (u, v) = poly.point.clone().expect("nonempty polytope has a point");
        let result = ConditionResult::new(name, Role::Necessary, Method::Enumeration, Status::Satisfied, dist, tol)
            .with_witness(w.diag.iter().copied())
            .with_detail(format!(
                "selector W = {:?} admits multipliers u = {:?}, v = {:?}",
                w.diag,
                u.as_slice(),
                v.as_slice()
            ));
        return Ok(NonsmoothFirstOrder {
            result,
            certificate: Some((w, u, v)),
            per_selector,
        });
    }
    let exhaustive = part.beta.is_empty();
    let result = if exhaustive {
        ConditionResult::new(name, Role::Necessary, Method::Exact, Status::Violated, dist, tol)
            .with_detail("the selector is unique and the stationarity system has no solution")
    } else {
        ConditionResult::new(name, Role::Necessary, Method::Sampled, Status::Inconclusive, dist, tol).with_detail(
            format!(
                "no multipliers found for {} sampled selectors; not a disproof",
                per_selector.len()
            ),
        )
    };
    Ok(NonsmoothFirstOrder {
        result,
        certificate: None,
        per_selector,
    })
}
