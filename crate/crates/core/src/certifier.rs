//! Full certification pipeline for one candidate point.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::CheckConfig;
use crate::error::{Error, Result};
use crate::generalized_jacobian::{a_nonsingularity, clarke_selectors, enumerate_b_selectors, SIGN_CONVENTION};
use crate::lower_level::{
    check_assumption_a, check_jacobian_uniqueness, classify_partition, kkt_residual_lower, names as lower_names,
    recover_multipliers, solve_lower, KktSolution, LowerSeed, PathTag, SolveMethod,
};
use crate::oracle::{verify_minimax_definition, GridSpec};
use crate::problem::{CandidatePoint, ProblemSpec};
use crate::report::{real_vec, ConditionResult, Method, Role, Status};
use crate::upper_level::{
    check_mfcq, cone_from, first_order_nonsmooth_necessary, names as upper_names, polytope_from,
    second_order_necessary, second_order_sufficient, upper_active_set, LambdaPolytope, UpperData,
};
use crate::value_function::{assemble_sensitivity_system, phi_gradient, phi_hessian};

pub const REPORT_VERSION: &str = "lmcert-report/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Smallest LU pivot accepted for a selector matrix `A(x, W)`.
pub const SELECTOR_PIVOT_TOL: f64 = 1e-8;

pub mod names {
    pub const FEASIBILITY: &str = "candidate.feasibility";
    pub const LOWER_FIRST_ORDER: &str = "lower.first_order_necessary";
    pub const NEWTON: &str = "lower.newton_refinement";
    pub const SENSITIVITY: &str = "value_function.sensitivity";
    pub const PHI_GRADIENT: &str = "value_function.gradient";
    pub const PHI_HESSIAN: &str = "value_function.hessian";
    pub const SELECTORS: &str = "nonsmooth.selector_nonsingularity";
    pub const SUPPLIED_UPPER: &str = "upper.supplied_multipliers";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertPath {
    Smooth,
    Nonsmooth,
    Invalid,
}

impl CertPath {
    pub fn as_str(self) -> &'static str {
        match self {
            CertPath::Smooth => "smooth",
            CertPath::Nonsmooth => "nonsmooth",
            CertPath::Invalid => "invalid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedLocalMinimax,
    NecessaryConditionsPass,
    Refuted,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::CertifiedLocalMinimax => "certified-local-minimax",
            Verdict::NecessaryConditionsPass => "necessary-conditions-pass",
            Verdict::Refuted => "refuted",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// The overall verdict as a function of the condition results alone.
pub fn verdict_from(results: &[ConditionResult]) -> Verdict {
    let necessary: Vec<&ConditionResult> = results.iter().filter(|r| r.role == Role::Necessary).collect();
    if necessary.iter().any(|r| r.violated()) {
        Verdict::Refuted
    } else if results.iter().any(|r| r.role == Role::Sufficient && r.satisfied()) {
        Verdict::CertifiedLocalMinimax
    } else if !necessary.is_empty() && necessary.iter().all(|r| r.satisfied()) {
        Verdict::NecessaryConditionsPass
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    #[serde(default, skip_serializing_if = "Option::is_none", with = "real_vec")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "real_vec")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "real_vec")]
    pub u: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "real_vec")]
    pub v: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub version: String,
    pub tool_version: String,
    pub problem_digest: String,
    pub command: String,
    pub candidate: CandidatePoint,
    pub path: CertPath,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_reason: Option<String>,
    pub sign_convention: String,
    pub config: CheckConfig,
    pub results: Vec<ConditionResult>,
    pub verdict: Verdict,
    /// Multipliers the checks ran with.
    pub multipliers: Multipliers,
    pub notes: Vec<String>,
    /// Stages that failed, as `stage: message`.
    pub errors: Vec<String>,
}

impl CertificateReport {
    pub fn result(&self, name: &str) -> Option<&ConditionResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only serializable values")
    }

    /// Parse a report, rejecting other schema versions and verdicts that do
    /// not follow from the results.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: CertificateReport = serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
        if r.version != REPORT_VERSION {
            return Err(Error::Report(format!(
                "schema version `{}` is not supported, expected `{REPORT_VERSION}`",
                r.version
            )));
        }
        let expected = verdict_from(&r.results);
        if r.verdict != expected {
            return Err(Error::Report(format!(
                "verdict `{}` does not follow from the results (expected `{}`)",
                r.verdict.as_str(),
                expected.as_str()
            )));
        }
        Ok(r)
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Plain-text summary of a report.
pub fn render_summary(r: &CertificateReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verdict: {}", r.verdict.as_str());
    match &r.path_reason {
        Some(why) => {
            let _ = writeln!(s, "path: {} ({why})", r.path.as_str());
        }
        None => {
            let _ = writeln!(s, "path: {}", r.path.as_str());
        }
    }
    let _ = writeln!(s, "problem: {}", r.problem_digest);
    let _ = writeln!(
        s,
        "candidate: x = {}, y = {}",
        fmt_vec(&r.candidate.x),
        fmt_vec(&r.candidate.y)
    );
    for (label, v) in [
        ("mu", &r.multipliers.mu),
        ("lambda", &r.multipliers.lambda),
        ("u", &r.multipliers.u),
        ("v", &r.multipliers.v),
    ] {
        if let Some(v) = v {
            let _ = writeln!(s, "  {label} = {}", fmt_vec(v));
        }
    }
    let _ = writeln!(s, "results:");
    let width = r.results.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &r.results {
        let status = match c.status {
            Status::Satisfied => "ok  ",
            Status::Violated => "FAIL",
            Status::Inconclusive => "??  ",
        };
        let _ = writeln!(
            s,
            "  {status} {:width$}  margin {:e}  tol {:e}  [{:?}, {:?}]",
            c.name, c.margin, c.tolerance, c.method, c.role
        );
        if !c.detail.is_empty() {
            let _ = writeln!(s, "       {}", c.detail);
        }
        if let Some(w) = &c.witness {
            let _ = writeln!(s, "       witness {}", fmt_vec(w));
        }
    }
    for n in &r.notes {
        let _ = writeln!(s, "note: {n}");
    }
    for e in &r.errors {
        let _ = writeln!(s, "error: {e}");
    }
    s
}

/// Outcome of [`classify_path`].
#[derive(Debug, Clone)]
pub struct PathClassification {
    pub path: CertPath,
    /// The first failing lower-level condition on the invalid path.
    pub reason: Option<String>,
    pub results: Vec<ConditionResult>,
    pub mu: DVector<f64>,
    pub lambda: DVector<f64>,
    pub notes: Vec<String>,
}

/// Largest constraint violation of `(x, y)`; satisfied within `tol_act`.
pub fn candidate_feasibility(spec: &ProblemSpec, c: &CandidatePoint, config: &CheckConfig) -> Result<ConditionResult> {
    let (hu, gu) = spec.upper_constraint_values(&c.x)?;
    let (hl, gl) = spec.lower_constraint_values(&c.x, &c.y)?;
    let mut worst = (0.0f64, String::from("no constraint is violated"));
    let mut see = |v: f64, what: String| {
        if v > worst.0 {
            worst = (v, what);
        }
    };
    for (j, v) in hu.iter().enumerate() {
        see(v.abs(), format!("|H{}| = {:e}", j + 1, v.abs()));
    }
    for (i, v) in gu.iter().enumerate() {
        see(*v, format!("G{} = {v:e}", i + 1));
    }
    for (j, v) in hl.iter().enumerate() {
        see(v.abs(), format!("|h{}| = {:e}", j + 1, v.abs()));
    }
    for (i, v) in gl.iter().enumerate() {
        see(*v, format!("g{} = {v:e}", i + 1));
    }
    let ok = worst.0 <= config.tol_act;
    // Feasibility is a hypothesis of every later check; an infeasible
    // candidate is refuted outright.
    let (status, role) = if ok {
        (Status::Satisfied, Role::Precondition)
    } else {
        (Status::Violated, Role::Necessary)
    };
    Ok(
        ConditionResult::new(names::FEASIBILITY, role, Method::Exact, status, worst.0, config.tol_act)
            .with_detail(format!("largest violation: {}", worst.1)),
    )
}

/// Supplied multipliers when they satisfy KKT, recovered ones otherwise.
fn choose_multipliers(
    spec: &ProblemSpec,
    c: &CandidatePoint,
    config: &CheckConfig,
) -> Result<(DVector<f64>, DVector<f64>, Vec<String>)> {
    let rec = recover_multipliers(spec, &c.x, &c.y, config.tol_act)?;
    if c.mu.is_none() && c.lambda.is_none() {
        return Ok((rec.mu, rec.lambda, Vec::new()));
    }
    let mu = c.mu.clone().unwrap_or_else(|| rec.mu.as_slice().to_vec());
    let lambda = c.lambda.clone().unwrap_or_else(|| rec.lambda.as_slice().to_vec());
    let supplied = kkt_residual_lower(spec, &c.x, &c.y, &mu, &lambda)?.norm;
    if supplied <= config.tol_kkt {
        return Ok((DVector::from_vec(mu), DVector::from_vec(lambda), Vec::new()));
    }
    let note = format!(
        "supplied lower multipliers mu = {}, lambda = {} give KKT residual {supplied:e} > {:e}; using recovered mu = {}, lambda = {} (residual {:e})",
        fmt_vec(&mu),
        fmt_vec(&lambda),
        config.tol_kkt,
        fmt_vec(rec.mu.as_slice()),
        fmt_vec(rec.lambda.as_slice()),
        rec.residual
    );
    Ok((rec.mu, rec.lambda, vec![note]))
}

fn push_unique(results: &mut Vec<ConditionResult>, more: Vec<ConditionResult>) {
    for r in more {
        if !results.iter().any(|q| q.name == r.name) {
            results.push(r);
        }
    }
}

fn classify_feasible(spec: &ProblemSpec, c: &CandidatePoint, config: &CheckConfig) -> Result<PathClassification> {
    let (mu, lambda, notes) = choose_multipliers(spec, c, config)?;
    let ju = check_jacobian_uniqueness(spec, &c.x, &c.y, mu.as_slice(), lambda.as_slice(), config)?;
    if ju.holds(lower_names::JACOBIAN_UNIQUENESS) {
        return Ok(PathClassification {
            path: CertPath::Smooth,
            reason: None,
            results: ju.results,
            mu,
            lambda,
            notes,
        });
    }
    let a = check_assumption_a(spec, &c.x, &c.y, config)?;
    let mut results = ju.results.clone();
    push_unique(&mut results, a.results.clone());
    if a.holds(lower_names::ASSUMPTION_A) {
        return Ok(PathClassification {
            path: CertPath::Nonsmooth,
            reason: None,
            results,
            mu: a.mu,
            lambda: a.lambda,
            notes,
        });
    }
    let first = ju
        .get(lower_names::KKT)
        .filter(|r| !r.satisfied())
        .or_else(|| a.first_failure())
        .or_else(|| ju.first_failure())
        .map(|r| r.name.clone());
    Ok(PathClassification {
        path: CertPath::Invalid,
        reason: first,
        results,
        mu,
        lambda,
        notes,
    })
}

/// Decide which theory applies at a feasible candidate.
pub fn classify_path(spec: &ProblemSpec, c: &CandidatePoint, config: &CheckConfig) -> Result<PathClassification> {
    spec.require_smooth()?;
    c.validate(spec)?;
    let feas = candidate_feasibility(spec, c, config)?;
    if !feas.satisfied() {
        return Err(Error::Infeasible(feas.detail));
    }
    classify_feasible(spec, c, config)
}

/// Under LICQ the inner KKT conditions are necessary for `y*` to be a local
/// maximizer, so a KKT failure refutes the candidate.
fn lower_first_order_refutation(
    spec: &ProblemSpec,
    c: &CandidatePoint,
    config: &CheckConfig,
) -> Result<Option<ConditionResult>> {
    let rec = recover_multipliers(spec, &c.x, &c.y, config.tol_act)?;
    if rec.licq_sigma < config.tol_licq || rec.residual <= config.tol_kkt {
        return Ok(None);
    }
    Ok(Some(
        ConditionResult::new(
            names::LOWER_FIRST_ORDER,
            Role::Necessary,
            Method::Exact,
            Status::Violated,
            rec.residual,
            config.tol_kkt,
        )
        .with_detail(format!(
            "LICQ holds (smallest singular value {:e}) and the unique multiplier estimate leaves KKT residual {:e}",
            rec.licq_sigma, rec.residual
        )),
    ))
}

/// Upper-level necessary conditions need MFCQ; without it their violations
/// do not refute.
fn demote_without_mfcq(results: &mut [ConditionResult]) {
    let mfcq = results
        .iter()
        .find(|r| r.name == upper_names::MFCQ)
        .is_some_and(|r| r.satisfied());
    if mfcq {
        return;
    }
    for r in results
        .iter_mut()
        .filter(|r| r.role == Role::Necessary && r.name.starts_with("upper.") && r.violated())
    {
        r.status = Status::Inconclusive;
        r.detail
            .push_str("; MFCQ does not hold, so this violation does not refute the candidate");
    }
}

struct Builder<'a> {
    spec: &'a ProblemSpec,
    config: &'a CheckConfig,
    candidate: &'a CandidatePoint,
    path: CertPath,
    path_reason: Option<String>,
    results: Vec<ConditionResult>,
    multipliers: Multipliers,
    notes: Vec<String>,
    errors: Vec<String>,
}

impl<'a> Builder<'a> {
    fn fail(&mut self, stage: &str, e: &Error) {
        self.errors.push(format!("{stage}: {e}"));
        self.results.push(ConditionResult::skipped(
            stage,
            Role::Diagnostic,
            format!("stage failed: {e}"),
        ));
    }

    fn finish(mut self) -> CertificateReport {
        demote_without_mfcq(&mut self.results);
        CertificateReport {
            version: REPORT_VERSION.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            problem_digest: self.spec.digest(),
            command: "certify".to_string(),
            candidate: self.candidate.clone(),
            path: self.path,
            path_reason: self.path_reason,
            sign_convention: SIGN_CONVENTION.to_string(),
            config: self.config.clone(),
            verdict: verdict_from(&self.results),
            results: self.results,
            multipliers: self.multipliers,
            notes: self.notes,
            errors: self.errors,
        }
    }

    /// Newton polish of the lower solution; falls back to the candidate.
    fn refine(&mut self, mu: &DVector<f64>, lambda: &DVector<f64>, path: PathTag) -> Result<KktSolution> {
        let c = self.candidate;
        let method = match path {
            PathTag::Smooth => SolveMethod::Smooth,
            PathTag::Nonsmooth => SolveMethod::Nonsmooth,
        };
        let seed = LowerSeed::with_multipliers(c.y.clone(), mu.as_slice().to_vec(), lambda.as_slice().to_vec());
        let fallback = || KktSolution::at_point(self.spec, &c.x, &c.y, mu.as_slice(), lambda.as_slice(), path);
        let tol = self.config.tol_newton;
        let r = match solve_lower(self.spec, &c.x, &seed, self.config, method) {
            Ok(sol) => {
                let moved = sol.y.iter().zip(&c.y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let allowed = 1e3 * self.config.tol_kkt * (1.0 + c.y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                if moved <= allowed {
                    let r = ConditionResult::new(
                        names::NEWTON,
                        Role::Diagnostic,
                        Method::Newton,
                        Status::Satisfied,
                        sol.residual,
                        tol,
                    )
                    .with_detail(format!(
                        "converged in {} iterations, moving y by {moved:e}",
                        sol.trace.len() - 1
                    ));
                    self.results.push(r);
                    return Ok(sol);
                }
                ConditionResult::new(
                    names::NEWTON,
                    Role::Diagnostic,
                    Method::Newton,
                    Status::Inconclusive,
                    sol.residual,
                    tol,
                )
                .with_detail(format!(
                    "Newton moved y by {moved:e}, more than {allowed:e}; using the candidate as given"
                ))
            }
            Err(e) => ConditionResult::skipped(
                names::NEWTON,
                Role::Diagnostic,
                format!("Newton failed ({e}); using the candidate as given"),
            ),
        };
        self.results.push(r);
        fallback()
    }

    fn supplied_upper_check(&mut self, poly: &LambdaPolytope) {
        let c = self.candidate;
        if c.u.is_none() && c.v.is_none() {
            return;
        }
        let u = DVector::from_vec(c.u.clone().unwrap_or_else(|| vec![0.0; poly.n1]));
        let v = DVector::from_vec(c.v.clone().unwrap_or_else(|| vec![0.0; poly.n2]));
        let mut z = DVector::zeros(poly.columns.ncols());
        z.rows_mut(0, poly.n1).copy_from(&u);
        for (k, &i) in poly.active.iter().enumerate() {
            z[poly.n1 + k] = v[i];
        }
        let stat = (&poly.columns * &z + &poly.r0).amax();
        let sign = v.iter().fold(0.0f64, |m, &t| m.max(-t));
        let off = (0..poly.n2)
            .filter(|i| !poly.active.contains(i))
            .fold(0.0f64, |m, i| m.max(v[i].abs()));
        let margin = stat.max(sign).max(off);
        let tol = self.config.tol_kkt;
        let status = if margin <= tol {
            Status::Satisfied
        } else {
            Status::Inconclusive
        };
        self.results.push(
            ConditionResult::new(
                names::SUPPLIED_UPPER,
                Role::Diagnostic,
                Method::Exact,
                status,
                margin,
                tol,
            )
            .with_detail(format!(
                "stationarity residual {stat:e}, sign violation {sign:e}, inactive multiplier {off:e}"
            )),
        );
    }

    fn oracle(&mut self) {
        if !self.config.oracle {
            return;
        }
        let c = self.candidate;
        match verify_minimax_definition(self.spec, &c.x, &c.y, &GridSpec::from_config(self.config)) {
            Ok(check) => self.results.push(check.to_result()),
            Err(e) => self.results.push(ConditionResult::skipped(
                crate::oracle::DEFINITION_CHECK,
                Role::Diagnostic,
                format!("not run: {e}"),
            )),
        }
    }

    fn mfcq(&mut self) {
        match check_mfcq(self.spec, &self.candidate.x, self.config) {
            Ok(m) => self.results.push(m.result),
            Err(e) => self.fail(upper_names::MFCQ, &e),
        }
    }

    fn smooth(&mut self, mu: &DVector<f64>, lambda: &DVector<f64>) {
        let sol = match self.refine(mu, lambda, PathTag::Smooth) {
            Ok(s) => s,
            Err(e) => return self.fail(names::NEWTON, &e),
        };
        self.multipliers.mu = Some(sol.mu.as_slice().to_vec());
        self.multipliers.lambda = Some(sol.lambda.as_slice().to_vec());
        let sys = match assemble_sensitivity_system(self.spec, &sol) {
            Ok(s) => s,
            Err(e) => return self.fail(names::SENSITIVITY, &e),
        };
        let cw = self.config.condition_warning;
        let status = if sys.condition <= cw {
            Status::Satisfied
        } else {
            Status::Inconclusive
        };
        self.results.push(
            ConditionResult::new(
                names::SENSITIVITY,
                Role::Diagnostic,
                Method::Exact,
                status,
                sys.condition,
                cw,
            )
            .with_detail(format!(
                "condition number of K; smallest LU pivot {:e}{}",
                sys.min_pivot(),
                if status == Status::Satisfied {
                    ""
                } else {
                    "; derivatives may be inaccurate"
                }
            )),
        );
        let grad = match phi_gradient(self.spec, &sol) {
            Ok(g) => g,
            Err(e) => return self.fail(names::PHI_GRADIENT, &e),
        };
        self.results.push(
            ConditionResult::new(
                names::PHI_GRADIENT,
                Role::Diagnostic,
                Method::Exact,
                Status::Satisfied,
                grad.amax(),
                0.0,
            )
            .with_witness(grad.iter().copied())
            .with_detail("∇φ = ∇_x𝓛; margin is its infinity norm"),
        );
        let hess = match phi_hessian(self.spec, &sol) {
            Ok(h) => h,
            Err(e) => return self.fail(names::PHI_HESSIAN, &e),
        };
        let sym = (&hess.matrix + hess.matrix.transpose()) * 0.5;
        let min_eig = if sym.nrows() == 0 {
            f64::INFINITY
        } else {
            sym.clone().symmetric_eigen().eigenvalues.min()
        };
        self.results.push(
            ConditionResult::new(
                names::PHI_HESSIAN,
                Role::Diagnostic,
                Method::Exact,
                Status::Satisfied,
                min_eig,
                0.0,
            )
            .with_witness(sym.transpose().iter().copied())
            .with_detail(format!(
                "∇²φ = ∇²_xx𝓛 − Nᵀ K⁻¹ N, row-major in the witness; margin is its smallest eigenvalue; asymmetry {:e}",
                hess.asymmetry
            )),
        );
        self.mfcq();

        let x = &self.candidate.x;
        let data = match UpperData::new(self.spec, x) {
            Ok(d) => d,
            Err(e) => return self.fail(upper_names::FIRST_ORDER, &e),
        };
        let act = match upper_active_set(&data, self.config.tol_act) {
            Ok(a) => a,
            Err(e) => return self.fail(upper_names::FIRST_ORDER, &e),
        };
        let poly = match polytope_from(&data, &act, &grad, self.config) {
            Ok(p) => p,
            Err(e) => return self.fail(upper_names::FIRST_ORDER, &e),
        };
        let tol = self.config.tol_kkt;
        let mut fo = ConditionResult::new(
            upper_names::FIRST_ORDER,
            Role::Necessary,
            Method::Lp,
            if poly.is_nonempty() {
                Status::Satisfied
            } else {
                Status::Violated
            },
            poly.distance,
            tol,
        );
        let shape = if !poly.is_nonempty() {
            "Λ is empty".to_string()
        } else if !poly.bounded {
            "Λ is unbounded".to_string()
        } else if poly.enumerated {
            format!("Λ is bounded with {} vertices", poly.vertices.len())
        } else {
            "Λ is bounded; vertices not enumerated".to_string()
        };
        fo = fo.with_detail(format!(
            "distance from −∇φ to the cone of active constraint gradients; |I| = {}; {shape}",
            act.active.len()
        ));
        if let Some((u, v)) = &poly.point {
            if poly.is_nonempty() {
                fo = fo.with_witness(u.iter().chain(v.iter()).copied());
                self.multipliers.u = Some(u.as_slice().to_vec());
                self.multipliers.v = Some(v.as_slice().to_vec());
            }
        }
        if !poly.is_nonempty() {
            fo = fo.with_witness(grad.iter().copied());
        }
        self.results.push(fo);
        self.supplied_upper_check(&poly);

        let cone = cone_from(&data, &act, &grad, Some(&poly), self.config);
        match second_order_necessary(self.spec, x, &sol, &poly, &cone, self.config) {
            Ok(r) => self.results.push(r),
            Err(e) => self.fail(upper_names::SECOND_ORDER_NECESSARY, &e),
        }
        match second_order_sufficient(self.spec, x, &sol, &poly, &cone, self.config) {
            Ok(r) => self.results.push(r),
            Err(e) => self.fail(upper_names::SECOND_ORDER_SUFFICIENT, &e),
        }
    }

    fn nonsmooth(&mut self, mu: &DVector<f64>, lambda: &DVector<f64>) {
        let sol = match self.refine(mu, lambda, PathTag::Nonsmooth) {
            Ok(s) => s,
            Err(e) => return self.fail(names::NEWTON, &e),
        };
        self.multipliers.mu = Some(sol.mu.as_slice().to_vec());
        self.multipliers.lambda = Some(sol.lambda.as_slice().to_vec());
        if let Err(e) = self.selectors(&sol) {
            self.fail(names::SELECTORS, &e);
        }
        self.mfcq();
        match first_order_nonsmooth_necessary(self.spec, &self.candidate.x, &sol, self.config) {
            Ok(r) => {
                if let Some((_, u, v)) = &r.certificate {
                    self.multipliers.u = Some(u.as_slice().to_vec());
                    self.multipliers.v = Some(v.as_slice().to_vec());
                }
                self.results.push(r.result);
            }
            Err(e) => self.fail(upper_names::NONSMOOTH_FIRST_ORDER, &e),
        }
        self.results.push(ConditionResult::skipped(
            upper_names::SECOND_ORDER_SUFFICIENT,
            Role::Sufficient,
            "no second-order sufficient condition is available when strict complementarity fails",
        ));
    }

    fn selectors(&mut self, sol: &KktSolution) -> Result<()> {
        let (_, g) = self.spec.lower_constraint_values(&self.candidate.x, sol.y.as_slice())?;
        let part = classify_partition(g.as_slice(), sol.lambda.as_slice(), self.config.tol_act)?;
        let mut sel = enumerate_b_selectors(&part, self.config.beta_cap)?;
        let b_count = sel.len();
        for w in clarke_selectors(&part, self.config.clarke_resolution, self.config.beta_cap)? {
            if !sel.contains(&w) {
                sel.push(w);
            }
        }
        let checks = a_nonsingularity(self.spec, sol, &sel)?;
        let worst = checks
            .iter()
            .min_by(|a, b| a.min_pivot.total_cmp(&b.min_pivot))
            .expect("at least one selector");
        let ok = checks
            .iter()
            .all(|c| c.nonsingular && c.min_pivot >= SELECTOR_PIVOT_TOL);
        let mut r = ConditionResult::new(
            names::SELECTORS,
            Role::Precondition,
            Method::Enumeration,
            if ok { Status::Satisfied } else { Status::Violated },
            worst.min_pivot,
            SELECTOR_PIVOT_TOL,
        )
        .with_detail(format!(
            "smallest LU pivot of A(x, W) over {b_count} B-selectors and {} Clarke samples (|β| = {})",
            checks.len() - b_count,
            part.beta.len()
        ));
        if !ok {
            r = r.with_witness(worst.selector.diag.iter().copied());
        }
        self.results.push(r);
        Ok(())
    }
}

/// Run every applicable check at `candidate`. Stage failures are recorded
/// in the report rather than returned.
pub fn certify(spec: &ProblemSpec, candidate: &CandidatePoint, config: &CheckConfig) -> CertificateReport {
    let mut b = Builder {
        spec,
        config,
        candidate,
        path: CertPath::Invalid,
        path_reason: None,
        results: Vec::new(),
        multipliers: Multipliers::default(),
        notes: Vec::new(),
        errors: Vec::new(),
    };
    let pre = config
        .validate()
        .map_err(|e| ("config", e))
        .and_then(|_| spec.require_smooth().map_err(|e| ("problem", e)))
        .and_then(|_| candidate.validate(spec).map_err(|e| ("candidate", e)));
    if let Err((stage, e)) = pre {
        b.path_reason = Some(stage.to_string());
        b.fail(stage, &e);
        return b.finish();
    }
    match candidate_feasibility(spec, candidate, config) {
        Ok(r) => {
            let ok = r.satisfied();
            b.results.push(r);
            if !ok {
                b.path_reason = Some(names::FEASIBILITY.to_string());
                return b.finish();
            }
        }
        Err(e) => {
            b.fail(names::FEASIBILITY, &e);
            return b.finish();
        }
    }
    let class = match classify_feasible(spec, candidate, config) {
        Ok(c) => c,
        Err(e) => {
            b.fail("classification", &e);
            return b.finish();
        }
    };
    b.path = class.path;
    b.path_reason = class.reason;
    b.notes.extend(class.notes);
    b.results.extend(class.results);
    match class.path {
        CertPath::Smooth => b.smooth(&class.mu, &class.lambda),
        CertPath::Nonsmooth => b.nonsmooth(&class.mu, &class.lambda),
        CertPath::Invalid => {
            b.multipliers.mu = Some(class.mu.as_slice().to_vec());
            b.multipliers.lambda = Some(class.lambda.as_slice().to_vec());
            match lower_first_order_refutation(spec, candidate, config) {
                Ok(Some(r)) => b.results.push(r),
                Ok(None) => {}
                Err(e) => b.fail(names::LOWER_FIRST_ORDER, &e),
            }
        }
    }
    b.oracle();
    b.finish()
}
