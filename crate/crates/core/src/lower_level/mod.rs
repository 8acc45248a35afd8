//! The inner maximization `max_y f(x, y)` over `Y(x)`: Lagrangian, KKT
//! residuals, active partitions, critical cones, Jacobian uniqueness,
//! Assumption A and a Newton solver.

mod solve;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::CheckConfig;
use crate::error::{Error, Result};
use crate::linalg::{
    max_eigen_on_subspace, nullspace_basis, row_independence, select_rows, vstack, ConeKind, PolyhedralCone,
};
use crate::problem::{eval_bundle, DerivativeBundle, ProblemSpec};
use crate::report::{at_least, at_most, ConditionResult, Method, Role, Status};

pub use solve::{solve_lower, KktSolution, LowerSeed, PathTag, SolveMethod};

/// Names of the lower-level condition results.
pub mod names {
    pub const KKT: &str = "lower.kkt";
    pub const LICQ: &str = "lower.licq";
    pub const STRICT_COMPLEMENTARITY: &str = "lower.strict_complementarity";
    pub const SOSC: &str = "lower.sosc";
    pub const JACOBIAN_UNIQUENESS: &str = "lower.jacobian_uniqueness";
    pub const MULTIPLIERS: &str = "lower.multipliers";
    pub const STRONG_SOSC: &str = "lower.strong_sosc";
    pub const ASSUMPTION_A: &str = "lower.assumption_a";
}

/// Null-space threshold used when building cone bases.
pub(crate) const NULL_TOL: f64 = 1e-10;

/// `𝓛(x; y, μ, λ) = f + μᵀh − λᵀg` and its derivative blocks.
#[derive(Debug, Clone)]
pub struct LagrangianEval {
    pub value: f64,
    pub grad_y: DVector<f64>,
    pub grad_x: DVector<f64>,
    pub hess_yy: DMatrix<f64>,
    /// `∇²_{yx}𝓛` (m × n).
    pub hess_yx: DMatrix<f64>,
    pub hess_xx: DMatrix<f64>,
}

impl LagrangianEval {
    pub fn from_bundle(b: &DerivativeBundle, mu: &DVector<f64>, lambda: &DVector<f64>) -> Self {
        let mut l = LagrangianEval {
            value: b.f.value,
            grad_y: b.f.grad_y.clone(),
            grad_x: b.f.grad_x.clone(),
            hess_yy: b.f.hess_yy.clone(),
            hess_yx: b.f.hess_yx.clone(),
            hess_xx: b.f.hess_xx.clone(),
        };
        let terms =
            b.h.iter()
                .zip(mu.iter().copied())
                .chain(b.g.iter().zip(lambda.iter().map(|l| -l)));
        for (e, c) in terms {
            l.value += c * e.value;
            l.grad_y += &e.grad_y * c;
            l.grad_x += &e.grad_x * c;
            l.hess_yy += &e.hess_yy * c;
            l.hess_yx += &e.hess_yx * c;
            l.hess_xx += &e.hess_xx * c;
        }
        l
    }

    /// `∇²_{xy}𝓛` (n × m).
    pub fn hess_xy(&self) -> DMatrix<f64> {
        self.hess_yx.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual {
    /// `(∇_y𝓛; h; g − Π₋(λ + g))`.
    pub vector: DVector<f64>,
    /// Infinity norm of `vector` (0 when empty).
    pub norm: f64,
}

pub(crate) fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |a, t| a.max(t.abs()))
}

pub fn kkt_residual_from_bundle(b: &DerivativeBundle, mu: &DVector<f64>, lambda: &DVector<f64>) -> KktResidual {
    let l = LagrangianEval::from_bundle(b, mu, lambda);
    let h = b.h_values();
    let g = b.g_values();
    let comp = DVector::from_fn(g.len(), |i, _| g[i] - (lambda[i] + g[i]).min(0.0));
    let vector = vstack_vec(&[&l.grad_y, &h, &comp]);
    let norm = inf_norm(&vector);
    KktResidual { vector, norm }
}

pub fn kkt_residual_lower(spec: &ProblemSpec, x: &[f64], y: &[f64], mu: &[f64], lambda: &[f64]) -> Result<KktResidual> {
    check_multiplier_dims(spec, mu, lambda)?;
    let b = eval_bundle(spec, x, y)?;
    Ok(kkt_residual_from_bundle(
        &b,
        &DVector::from_column_slice(mu),
        &DVector::from_column_slice(lambda),
    ))
}

pub(crate) fn vstack_vec(parts: &[&DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(
        parts.iter().map(|p| p.len()).sum(),
        parts.iter().flat_map(|p| p.iter().copied()),
    )
}

pub(crate) fn check_multiplier_dims(spec: &ProblemSpec, mu: &[f64], lambda: &[f64]) -> Result<()> {
    let d = spec.dims();
    if mu.len() != d.m1 || lambda.len() != d.m2 {
        return Err(Error::Dimension(format!(
            "multipliers have lengths ({}, {}), expected ({}, {})",
            mu.len(),
            lambda.len(),
            d.m1,
            d.m2
        )));
    }
    Ok(())
}

/// `(α, β, γ)`: active with positive multiplier, active with zero
/// multiplier, inactive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivePartition {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub gamma: Vec<usize>,
    pub len: usize,
}

impl ActivePartition {
    /// `I = α ∪ β`, ascending.
    pub fn active(&self) -> Vec<usize> {
        let mut a: Vec<usize> = self.alpha.iter().chain(&self.beta).copied().collect();
        a.sort_unstable();
        a
    }

    pub fn is_strictly_complementary(&self) -> bool {
        self.beta.is_empty()
    }
}

pub fn classify_partition(g: &[f64], lambda: &[f64], tol_act: f64) -> Result<ActivePartition> {
    if g.len() != lambda.len() {
        return Err(Error::Dimension(format!(
            "g has {} entries but λ has {}",
            g.len(),
            lambda.len()
        )));
    }
    let mut p = ActivePartition {
        alpha: Vec::new(),
        beta: Vec::new(),
        gamma: Vec::new(),
        len: g.len(),
    };
    for (i, (&gi, &li)) in g.iter().zip(lambda).enumerate() {
        let fail = |reason: String| Err(Error::Classification { index: i, reason });
        if !(gi.is_finite() && li.is_finite()) {
            return fail(format!("non-finite data g = {gi}, λ = {li}"));
        }
        if gi > tol_act {
            return fail(format!("inequality is violated, g = {gi:e}"));
        }
        if li < -tol_act {
            return fail(format!("multiplier is negative, λ = {li:e}"));
        }
        if gi >= -tol_act {
            if li > tol_act {
                p.alpha.push(i);
            } else {
                p.beta.push(i);
            }
        } else if li <= tol_act {
            p.gamma.push(i);
        } else {
            return fail(format!(
                "inactive inequality (g = {gi:e}) carries multiplier λ = {li:e}"
            ));
        }
    }
    Ok(p)
}

/// Lower-level critical cone.
#[derive(Debug, Clone)]
pub struct LowerCone {
    /// `{d : [J_y h; ∇_y g_α] d = 0, ∇_y g_β d ≤ 0}`.
    pub cone: PolyhedralCone,
    /// Rows whose kernel is `aff 𝓒`.
    pub aff_rows: DMatrix<f64>,
    /// `{d : J_y h d = 0, ∇_y g_I d ≤ 0, ∇_y f d ≤ 0}`.
    pub literal: PolyhedralCone,
}

impl LowerCone {
    pub fn aff_basis(&self) -> DMatrix<f64> {
        nullspace_basis(&self.aff_rows, NULL_TOL)
    }
}

pub(crate) fn lower_cone_from_bundle(b: &DerivativeBundle, part: &ActivePartition) -> LowerCone {
    let m = b.y.len();
    let jh = b.jac_y_h();
    let jg = b.jac_y_g();
    let e = vstack(&[&jh, &select_rows(&jg, &part.alpha)], m);
    let f = select_rows(&jg, &part.beta);
    let grad_f = DMatrix::from_row_slice(1, m, b.f.grad_y.as_slice());
    let literal_ineq = vstack(&[&select_rows(&jg, &part.active()), &grad_f], m);
    LowerCone {
        cone: PolyhedralCone::new(e.clone(), f),
        aff_rows: e,
        literal: PolyhedralCone::new(jh, literal_ineq),
    }
}

pub fn critical_cone_lower(
    spec: &ProblemSpec,
    x: &[f64],
    y: &[f64],
    mu: &[f64],
    lambda: &[f64],
    partition: &ActivePartition,
    tol_kkt: f64,
) -> Result<LowerCone> {
    check_multiplier_dims(spec, mu, lambda)?;
    let b = eval_bundle(spec, x, y)?;
    let r = kkt_residual_from_bundle(&b, &DVector::from_column_slice(mu), &DVector::from_column_slice(lambda));
    if r.norm > tol_kkt {
        return Err(Error::Precondition(format!(
            "critical cone needs a KKT point, residual is {:e}",
            r.norm
        )));
    }
    Ok(lower_cone_from_bundle(&b, partition))
}

#[derive(Debug, Clone)]
pub struct MultiplierRecovery {
    pub mu: DVector<f64>,
    pub lambda: DVector<f64>,
    /// Indices with `|g_i| <= tol_act`.
    pub active: Vec<usize>,
    /// KKT residual norm at the recovered multipliers.
    pub residual: f64,
    /// Smallest singular value of `[J_y h; ∇_y g_I]`.
    pub licq_sigma: f64,
}

/// Least-squares multipliers from stationarity over the active constraints.
pub fn recover_multipliers(spec: &ProblemSpec, x: &[f64], y: &[f64], tol_act: f64) -> Result<MultiplierRecovery> {
    let b = eval_bundle(spec, x, y)?;
    Ok(recover_from_bundle(&b, tol_act))
}

pub(crate) fn active_indices(g: &DVector<f64>, tol_act: f64) -> Vec<usize> {
    (0..g.len()).filter(|&i| g[i].abs() <= tol_act).collect()
}

pub(crate) fn licq_rows(b: &DerivativeBundle, active: &[usize]) -> DMatrix<f64> {
    vstack(&[&b.jac_y_h(), &select_rows(&b.jac_y_g(), active)], b.y.len())
}

pub(crate) fn recover_from_bundle(b: &DerivativeBundle, tol_act: f64) -> MultiplierRecovery {
    let m1 = b.h.len();
    let m2 = b.g.len();
    let g = b.g_values();
    let active = active_indices(&g, tol_act);
    let rows = licq_rows(b, &active);
    let licq_sigma = row_independence(&rows);
    // Stationarity: ∇_y f + J_hᵀ μ − ∇g_Iᵀ λ_I = 0.
    let mut cols = rows.transpose();
    for j in m1..cols.ncols() {
        cols.column_mut(j).neg_mut();
    }
    let z = if cols.ncols() == 0 || cols.nrows() == 0 {
        DVector::zeros(cols.ncols())
    } else {
        let rhs = -&b.f.grad_y;
        cols.clone()
            .svd(true, true)
            .solve(&rhs, 1e-12 * cols.amax().max(1.0))
            .unwrap_or_else(|_| DVector::zeros(cols.ncols()))
    };
    let mu = DVector::from_fn(m1, |i, _| z[i]);
    let mut lambda = DVector::zeros(m2);
    for (k, &i) in active.iter().enumerate() {
        lambda[i] = z[m1 + k];
    }
    let residual = kkt_residual_from_bundle(b, &mu, &lambda).norm;
    MultiplierRecovery {
        mu,
        lambda,
        active,
        residual,
        licq_sigma,
    }
}

#[derive(Debug, Clone)]
pub struct LowerConditionsReport {
    pub results: Vec<ConditionResult>,
    /// Partition at the tested multipliers, when they could be classified.
    pub partition: Option<ActivePartition>,
    pub mu: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl LowerConditionsReport {
    pub fn get(&self, name: &str) -> Option<&ConditionResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn holds(&self, name: &str) -> bool {
        self.get(name).is_some_and(|r| r.satisfied())
    }

    /// The first component check that is not satisfied.
    pub fn first_failure(&self) -> Option<&ConditionResult> {
        self.results.iter().find(|r| !r.satisfied())
    }
}

fn licq_result(b: &DerivativeBundle, config: &CheckConfig) -> ConditionResult {
    let active = active_indices(&b.g_values(), config.tol_act);
    let sigma = row_independence(&licq_rows(b, &active));
    ConditionResult::new(
        names::LICQ,
        Role::Precondition,
        Method::Exact,
        at_least(sigma, config.tol_licq),
        sigma,
        config.tol_licq,
    )
    .with_detail(format!(
        "smallest singular value of the {} active constraint gradients",
        b.h.len() + active.len()
    ))
}

fn strict_complementarity_margin(g: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    (0..g.len()).map(|i| lambda[i] - g[i]).fold(f64::INFINITY, f64::min)
}

/// Largest sampled `dᵀ M d` over unit directions of `cone`.
fn sampled_max_quadratic(
    m: &DMatrix<f64>,
    cone: &PolyhedralCone,
    config: &CheckConfig,
    samples: usize,
) -> Result<Option<(f64, DVector<f64>)>> {
    let st = cone.structure(config.tol_act)?;
    if st.kind == ConeKind::Trivial {
        return Ok(None);
    }
    let dirs = cone.sample_directions(&st, samples, config.seed, config.tol_act);
    Ok(dirs
        .into_iter()
        .map(|d| ((d.transpose() * m * &d)[(0, 0)], d))
        .max_by(|a, b| a.0.total_cmp(&b.0)))
}

/// Negative definiteness of `hess` on the critical cone: exact on the
/// affine hull, sampled on the cone when the hull test fails.
fn sosc_result(hess: &DMatrix<f64>, cone: &LowerCone, config: &CheckConfig) -> Result<ConditionResult> {
    let aff = cone.aff_basis();
    let top = max_eigen_on_subspace(hess, &aff)?;
    let aff_value = top.as_ref().map_or(f64::NEG_INFINITY, |e| e.value);
    if aff_value <= -config.tol_pd {
        return Ok(ConditionResult::new(
            names::SOSC,
            Role::Precondition,
            Method::Exact,
            Status::Satisfied,
            aff_value,
            config.tol_pd,
        )
        .with_detail(format!(
            "largest eigenvalue of ∇²_yy𝓛 on a {}-dimensional subspace containing the critical cone",
            aff.ncols()
        )));
    }
    if cone.cone.ineq.nrows() == 0 {
        let w = top.expect("nonempty subspace when the bound fails");
        return Ok(ConditionResult::new(
            names::SOSC,
            Role::Precondition,
            Method::Exact,
            Status::Violated,
            aff_value,
            config.tol_pd,
        )
        .with_witness(w.vector.iter().copied())
        .with_detail("critical cone is a subspace; witness is the top eigenvector"));
    }
    match sampled_max_quadratic(hess, &cone.cone, config, config.lower_cone_samples)? {
        None => Ok(ConditionResult::new(
            names::SOSC,
            Role::Precondition,
            Method::Exact,
            Status::Satisfied,
            f64::NEG_INFINITY,
            config.tol_pd,
        )
        .with_detail("critical cone is {0}")),
        Some((q, d)) if q > -config.tol_pd => Ok(ConditionResult::new(
            names::SOSC,
            Role::Precondition,
            Method::Sampled,
            Status::Violated,
            q,
            config.tol_pd,
        )
        .with_witness(d.iter().copied())
        .with_detail("sampled cone direction with nonnegative curvature")),
        Some((q, _)) => Ok(ConditionResult::new(
            names::SOSC,
            Role::Precondition,
            Method::Sampled,
            Status::Inconclusive,
            q,
            config.tol_pd,
        )
        .with_detail(format!(
            "all {} sampled cone directions have negative curvature but the affine hull test fails (eigenvalue {aff_value:e})",
            config.lower_cone_samples
        ))),
    }
}

fn aggregate(name: &str, parts: &[&ConditionResult], margin: f64, tol: f64, what: &str) -> ConditionResult {
    let status = if parts.iter().all(|r| r.satisfied()) {
        Status::Satisfied
    } else if parts.iter().any(|r| r.violated()) {
        Status::Violated
    } else {
        Status::Inconclusive
    };
    let failing: Vec<&str> = parts
        .iter()
        .filter(|r| !r.satisfied())
        .map(|r| r.name.as_str())
        .collect();
    let detail = if failing.is_empty() {
        format!("{what}: all components hold")
    } else {
        format!("{what}: failing components {}", failing.join(", "))
    };
    ConditionResult::new(name, Role::Precondition, Method::Exact, status, margin, tol).with_detail(detail)
}

/// KKT, LICQ, strict complementarity and second-order sufficiency at `(y, μ, λ)`.
pub fn check_jacobian_uniqueness(
    spec: &ProblemSpec,
    x: &[f64],
    y: &[f64],
    mu: &[f64],
    lambda: &[f64],
    config: &CheckConfig,
) -> Result<LowerConditionsReport> {
    spec.require_smooth()?;
    check_multiplier_dims(spec, mu, lambda)?;
    let b = eval_bundle(spec, x, y)?;
    let mu = DVector::from_column_slice(mu);
    let lambda = DVector::from_column_slice(lambda);
    jacobian_uniqueness_from_bundle(&b, &mu, &lambda, config)
}

pub(crate) fn jacobian_uniqueness_from_bundle(
    b: &DerivativeBundle,
    mu: &DVector<f64>,
    lambda: &DVector<f64>,
    config: &CheckConfig,
) -> Result<LowerConditionsReport> {
    let r = kkt_residual_from_bundle(b, mu, lambda);
    let kkt = ConditionResult::new(
        names::KKT,
        Role::Precondition,
        Method::Exact,
        at_most(r.norm, config.tol_kkt),
        r.norm,
        config.tol_kkt,
    )
    .with_detail("infinity norm of (∇_y𝓛; h; g − min(λ + g, 0))");
    let licq = licq_result(b, config);
    let mut partition = None;
    let (sc, sosc) = if kkt.satisfied() {
        let g = b.g_values();
        let part = classify_partition(g.as_slice(), lambda.as_slice(), config.tol_act)?;
        let margin = strict_complementarity_margin(&g, lambda);
        let sc = ConditionResult::new(
            names::STRICT_COMPLEMENTARITY,
            Role::Precondition,
            Method::Exact,
            at_least(margin, config.tol_sc),
            margin,
            config.tol_sc,
        )
        .with_detail(format!(
            "min_i (λ_i − g_i); partition |α| = {}, |β| = {}, |γ| = {}",
            part.alpha.len(),
            part.beta.len(),
            part.gamma.len()
        ));
        let cone = lower_cone_from_bundle(b, &part);
        let l = LagrangianEval::from_bundle(b, mu, lambda);
        let sosc = sosc_result(&l.hess_yy, &cone, config)?;
        partition = Some(part);
        (sc, sosc)
    } else {
        let why = "not evaluated: KKT residual exceeds tolerance";
        (
            ConditionResult::skipped(names::STRICT_COMPLEMENTARITY, Role::Precondition, why),
            ConditionResult::skipped(names::SOSC, Role::Precondition, why),
        )
    };
    let all = aggregate(
        names::JACOBIAN_UNIQUENESS,
        &[&kkt, &licq, &sc, &sosc],
        sc.margin,
        config.tol_sc,
        "Jacobian uniqueness",
    );
    Ok(LowerConditionsReport {
        results: vec![kkt, licq, sc, sosc, all],
        partition,
        mu: mu.clone(),
        lambda: lambda.clone(),
    })
}

/// Nonempty multiplier set, LICQ and strong second-order sufficiency on
/// `aff 𝓒 = ker [J_y h; ∇_y g_α]`, with multipliers recovered from `(x, y)`.
pub fn check_assumption_a(
    spec: &ProblemSpec,
    x: &[f64],
    y: &[f64],
    config: &CheckConfig,
) -> Result<LowerConditionsReport> {
    spec.require_smooth()?;
    let b = eval_bundle(spec, x, y)?;
    assumption_a_from_bundle(&b, config)
}

pub(crate) fn assumption_a_from_bundle(b: &DerivativeBundle, config: &CheckConfig) -> Result<LowerConditionsReport> {
    let rec = recover_from_bundle(b, config.tol_act);
    let g = b.g_values();
    let classified = classify_partition(g.as_slice(), rec.lambda.as_slice(), config.tol_act);
    let mut mult = ConditionResult::new(
        names::MULTIPLIERS,
        Role::Precondition,
        Method::Exact,
        at_most(rec.residual, config.tol_kkt),
        rec.residual,
        config.tol_kkt,
    )
    .with_detail("KKT residual at least-squares multipliers over the active set");
    if let Err(e) = &classified {
        if mult.satisfied() {
            mult.status = Status::Violated;
        }
        mult.detail = format!("{}; {e}", mult.detail);
    }
    let licq = licq_result(b, config);
    let strong = match &classified {
        Ok(part) if mult.satisfied() => {
            let cone = lower_cone_from_bundle(b, part);
            let l = LagrangianEval::from_bundle(b, &rec.mu, &rec.lambda);
            let aff = cone.aff_basis();
            let top = max_eigen_on_subspace(&l.hess_yy, &aff)?;
            let value = top.as_ref().map_or(f64::NEG_INFINITY, |e| e.value);
            let mut r = ConditionResult::new(
                names::STRONG_SOSC,
                Role::Precondition,
                Method::Exact,
                at_most(value, -config.tol_pd),
                value,
                config.tol_pd,
            )
            .with_detail(format!(
                "largest eigenvalue of ∇²_yy𝓛 on aff 𝓒 (dimension {})",
                aff.ncols()
            ));
            if r.violated() {
                if let Some(e) = top {
                    r = r.with_witness(e.vector.iter().copied());
                }
            }
            r
        }
        _ => ConditionResult::skipped(
            names::STRONG_SOSC,
            Role::Precondition,
            "not evaluated: no valid multipliers",
        ),
    };
    let all = aggregate(
        names::ASSUMPTION_A,
        &[&mult, &licq, &strong],
        strong.margin,
        config.tol_pd,
        "Assumption A",
    );
    Ok(LowerConditionsReport {
        results: vec![mult, licq, strong, all],
        partition: classified.ok(),
        mu: rec.mu,
        lambda: rec.lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{p1, p2};
    use crate::problem::parse_problem;
    use proptest::prelude::*;

    fn cfg() -> CheckConfig {
        CheckConfig::default()
    }

    #[test]
    fn residual_examples() {
        assert_eq!(
            kkt_residual_lower(&p1(), &[0.0], &[0.0], &[], &[0.0]).unwrap().norm,
            0.0
        );
        assert_eq!(
            kkt_residual_lower(&p2(), &[0.0], &[0.0], &[], &[0.0]).unwrap().norm,
            0.0
        );
        let r = kkt_residual_lower(&p1(), &[0.0], &[0.5], &[], &[0.0]).unwrap();
        assert!((r.norm - 0.5).abs() < 1e-15);
        assert!((r.vector[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn lagrangian_combines_terms() {
        // P1 at (x, y) = (0.3, 0.2) with λ = 0.5: ∇_y𝓛 = x − y − λ.
        let b = eval_bundle(&p1(), &[0.3], &[0.2]).unwrap();
        let l = LagrangianEval::from_bundle(&b, &DVector::zeros(0), &DVector::from_element(1, 0.5));
        assert!((l.grad_y[0] - (0.3 - 0.2 - 0.5)).abs() < 1e-15);
        assert!((l.value - (0.06 - 0.02 - 0.5 * (0.2 - 1.0))).abs() < 1e-15);
        assert_eq!(l.hess_yy[(0, 0)], -1.0);
        assert_eq!(l.hess_yx[(0, 0)], 1.0);
    }

    #[test]
    fn recovery_examples() {
        let r = recover_multipliers(&p1(), &[0.0], &[0.0], 1e-8).unwrap();
        assert!(r.active.is_empty());
        assert_eq!(r.lambda[0], 0.0);
        let r = recover_multipliers(&p2(), &[0.0], &[0.0], 1e-8).unwrap();
        assert_eq!(r.active, vec![0]);
        assert!(r.lambda[0].abs() < 1e-14);
        let r = recover_multipliers(&p2(), &[0.5], &[0.0], 1e-8).unwrap();
        assert!((r.lambda[0] - 1.0).abs() < 1e-12);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn partition_examples() {
        assert_eq!(classify_partition(&[0.0], &[1.0], 1e-8).unwrap().alpha, vec![0]);
        assert_eq!(classify_partition(&[0.0], &[0.0], 1e-8).unwrap().beta, vec![0]);
        assert_eq!(classify_partition(&[-1.0], &[0.0], 1e-8).unwrap().gamma, vec![0]);
        assert!(matches!(
            classify_partition(&[1.0], &[0.0], 1e-8),
            Err(Error::Classification { index: 0, .. })
        ));
        assert!(classify_partition(&[0.0], &[-1.0], 1e-8).is_err());
        assert!(classify_partition(&[-1.0], &[1.0], 1e-8).is_err());
    }

    #[test]
    fn lower_cone_examples() {
        let part = classify_partition(&[-1.0], &[0.0], 1e-8).unwrap();
        let c = critical_cone_lower(&p1(), &[0.0], &[0.0], &[], &[0.0], &part, 1e-8).unwrap();
        assert_eq!(c.cone.structure(1e-9).unwrap().kind, ConeKind::Subspace);
        assert_eq!(c.aff_basis().ncols(), 1);

        let part = classify_partition(&[0.0], &[0.0], 1e-8).unwrap();
        let c = critical_cone_lower(&p2(), &[0.0], &[0.0], &[], &[0.0], &part, 1e-8).unwrap();
        assert_eq!(c.cone.structure(1e-9).unwrap().kind, ConeKind::General);
        assert!(c.cone.contains(&DVector::from_element(1, -1.0), 1e-12));
        assert!(!c.cone.contains(&DVector::from_element(1, 1.0), 1e-12));
        assert_eq!(c.aff_basis().ncols(), 1);

        // An α index adds an equality row.
        let part = classify_partition(&[0.0], &[1.0], 1e-8).unwrap();
        let c = critical_cone_lower(&p2(), &[0.5], &[0.0], &[], &[1.0], &part, 1e-8).unwrap();
        assert_eq!(c.aff_basis().ncols(), 0);

        let part = classify_partition(&[-0.5], &[0.0], 1e-8).unwrap();
        assert!(critical_cone_lower(&p1(), &[0.0], &[0.5], &[], &[0.0], &part, 1e-8).is_err());
    }

    #[test]
    fn jacobian_uniqueness_examples() {
        let r = check_jacobian_uniqueness(&p1(), &[0.0], &[0.0], &[], &[0.0], &cfg()).unwrap();
        assert!(r.holds(names::JACOBIAN_UNIQUENESS), "{:?}", r.results);
        assert_eq!(r.get(names::STRICT_COMPLEMENTARITY).unwrap().margin, 1.0);
        assert_eq!(r.get(names::SOSC).unwrap().margin, -1.0);
        assert_eq!(r.partition.as_ref().unwrap().gamma, vec![0]);

        let r = check_jacobian_uniqueness(&p2(), &[0.0], &[0.0], &[], &[0.0], &cfg()).unwrap();
        let sc = r.get(names::STRICT_COMPLEMENTARITY).unwrap();
        assert_eq!(sc.status, Status::Violated);
        assert_eq!(sc.margin, 0.0);
        assert!(r.holds(names::SOSC));

        let r = check_jacobian_uniqueness(&p1(), &[0.0], &[0.5], &[], &[0.0], &cfg()).unwrap();
        assert_eq!(r.get(names::KKT).unwrap().status, Status::Violated);
        assert_eq!(r.get(names::SOSC).unwrap().status, Status::Inconclusive);
        assert_eq!(r.get(names::JACOBIAN_UNIQUENESS).unwrap().status, Status::Violated);
    }

    #[test]
    fn assumption_a_examples() {
        let r = check_assumption_a(&p2(), &[0.0], &[0.0], &cfg()).unwrap();
        assert!(r.holds(names::ASSUMPTION_A));
        assert_eq!(r.get(names::STRONG_SOSC).unwrap().margin, -2.0);
        let r = check_assumption_a(&p1(), &[0.0], &[0.0], &cfg()).unwrap();
        assert!(r.holds(names::ASSUMPTION_A));

        let convex = parse_problem("dims 1 1 0 1 0 0\nf = (y1 - x1)^2\ng1 = y1\n").unwrap();
        let r = check_assumption_a(&convex, &[0.0], &[0.0], &cfg()).unwrap();
        let s = r.get(names::STRONG_SOSC).unwrap();
        assert_eq!(s.status, Status::Violated);
        assert_eq!(s.margin, 2.0);
        assert_eq!(r.get(names::ASSUMPTION_A).unwrap().status, Status::Violated);
    }

    #[test]
    fn degenerate_cone_uses_sampling() {
        // f = -y1^2 + y2^2 with g = (y1, y2): both active and degenerate at 0.
        // On the cone {d <= 0} the curvature of d2 is positive.
        let spec = parse_problem("dims 1 2 0 2 0 0\nf = -y1^2 + y2^2 + x1*y1\ng1 = y1\ng2 = y2\n").unwrap();
        let r = check_jacobian_uniqueness(&spec, &[0.0], &[0.0, 0.0], &[], &[0.0, 0.0], &cfg()).unwrap();
        let s = r.get(names::SOSC).unwrap();
        assert_eq!(s.status, Status::Violated);
        assert_eq!(s.method, Method::Sampled);
        let w = s.witness.as_ref().unwrap();
        assert!(w[0] <= 1e-12 && w[1] <= 1e-12);
    }

    #[test]
    fn standard_cone_lies_inside_literal_cone() {
        // P2 at x = 0.5: y = 0 with λ = 1 (α), and a degenerate variant.
        for (x, lambda) in [(0.5, 1.0), (0.0, 0.0)] {
            let part = classify_partition(&[0.0], &[lambda], 1e-8).unwrap();
            let c = critical_cone_lower(&p2(), &[x], &[0.0], &[], &[lambda], &part, 1e-8).unwrap();
            let st = c.cone.structure(1e-9).unwrap();
            for d in c.cone.sample_directions(&st, 32, 1, 1e-9) {
                assert!(c.literal.contains(&d, 1e-9));
            }
        }
    }

    proptest! {
        #[test]
        fn partition_commutes_with_permutation(
            raw in prop::collection::vec((0u8..3, 0.1f64..5.0), 1..8),
            seed in any::<u64>(),
        ) {
            let mut g = Vec::new();
            let mut l = Vec::new();
            for (class, mag) in &raw {
                match class {
                    0 => { g.push(0.0); l.push(*mag); }
                    1 => { g.push(0.0); l.push(0.0); }
                    _ => { g.push(-*mag); l.push(0.0); }
                }
            }
            let n = g.len();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let gp: Vec<f64> = perm.iter().map(|&i| g[i]).collect();
            let lp: Vec<f64> = perm.iter().map(|&i| l[i]).collect();
            let base = classify_partition(&g, &l, 1e-8).unwrap();
            let moved = classify_partition(&gp, &lp, 1e-8).unwrap();
            let map = |set: &Vec<usize>| {
                let mut v: Vec<usize> = set.iter().map(|&k| perm[k]).collect();
                v.sort_unstable();
                v
            };
            prop_assert_eq!(map(&moved.alpha), base.alpha);
            prop_assert_eq!(map(&moved.beta), base.beta);
            prop_assert_eq!(map(&moved.gamma), base.gamma);
        }
    }
}
