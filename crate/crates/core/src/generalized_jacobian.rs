//! Generalized derivatives of the lower-level KKT map on the nonsmooth path.
//!
//! Each selector `W ∈ ∂Π₋(λ + g)` gives matrices `A(x, W)` and `H(x, W)`;
//! candidate directional derivatives and elements of `∂φ` are built from them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::CheckConfig;
use crate::error::{Error, Result};
use crate::linalg::{lu_factor, vstack, LinalgError};
use crate::lower_level::{classify_partition, ActivePartition, KktSolution, LagrangianEval};
use crate::problem::{eval_bundle, DerivativeBundle, ProblemSpec};

/// Sign of the `J_y gᵀ` and `W` blocks relative to the displayed form of
/// `A(x, W)`. With `-1` every row of `A` is the exact derivative of the
/// semismooth KKT map, so solutions carry the true `λ'`.
pub const LAMBDA_BLOCK_SIGN: f64 = -1.0;

/// Human-readable record of the convention, attached to reports.
pub const SIGN_CONVENTION: &str =
    "A(x,W) = [[∇²yy𝓛, J_y hᵀ, −J_y gᵀ], [J_y h, 0, 0], [(I−W) J_y g, 0, −W]] (exact derivative of the semismooth KKT map)";

pub fn project_nonpositive(v: &DVector<f64>) -> DVector<f64> {
    v.map(|t| t.min(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorOrigin {
    /// `i ∈ α`, entry fixed to 0.
    ForcedZero,
    /// `i ∈ γ`, entry fixed to 1.
    ForcedOne,
    /// `i ∈ β`, entry chosen from `[0, 1]`.
    Free,
}

/// Diagonal of an element of `∂Π₋(λ + g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WSelector {
    pub diag: Vec<f64>,
    pub origin: Vec<SelectorOrigin>,
}

impl WSelector {
    /// Selector with every free entry set to `fill`.
    pub fn from_partition(p: &ActivePartition, fill: f64) -> Self {
        let mut diag = vec![0.0; p.len];
        let mut origin = vec![SelectorOrigin::ForcedZero; p.len];
        for &i in &p.gamma {
            diag[i] = 1.0;
            origin[i] = SelectorOrigin::ForcedOne;
        }
        for &i in &p.beta {
            diag[i] = fill;
            origin[i] = SelectorOrigin::Free;
        }
        WSelector { diag, origin }
    }

    pub fn is_valid(&self) -> bool {
        self.diag.iter().zip(&self.origin).all(|(&w, o)| match o {
            SelectorOrigin::ForcedZero => w == 0.0,
            SelectorOrigin::ForcedOne => w == 1.0,
            SelectorOrigin::Free => (0.0..=1.0).contains(&w),
        })
    }

    pub fn is_binary(&self) -> bool {
        self.diag.iter().all(|&w| w == 0.0 || w == 1.0)
    }
}

fn check_cap(p: &ActivePartition, cap: usize) -> Result<()> {
    if p.beta.len() > cap {
        return Err(Error::EnumerationCap {
            size: p.beta.len(),
            cap,
        });
    }
    Ok(())
}

/// All `2^|β|` binary selectors; bit `k` of the mask sets `β[k]` to 1.
pub fn enumerate_b_selectors(p: &ActivePartition, cap: usize) -> Result<Vec<WSelector>> {
    check_cap(p, cap)?;
    let base = WSelector::from_partition(p, 0.0);
    Ok((0u64..1 << p.beta.len())
        .map(|mask| {
            let mut w = base.clone();
            for (k, &i) in p.beta.iter().enumerate() {
                w.diag[i] = ((mask >> k) & 1) as f64;
            }
            w
        })
        .collect())
}

/// Largest tensor grid sampled on the `β`-box before switching to sweeps.
const CLARKE_GRID_LIMIT: usize = 4096;

/// Selectors sampling the Clarke box `[0, 1]^β` with `resolution` points per
/// free index. The full tensor grid is used when it has at most 4096 points;
/// otherwise each free index is swept with the others held at 1/2.
pub fn clarke_selectors(p: &ActivePartition, resolution: usize, cap: usize) -> Result<Vec<WSelector>> {
    check_cap(p, cap)?;
    let res = resolution.max(2);
    let grid: Vec<f64> = (0..res).map(|k| k as f64 / (res - 1) as f64).collect();
    let nb = p.beta.len();
    let full = (res as f64).powi(nb as i32) <= CLARKE_GRID_LIMIT as f64;
    let mut out = Vec::new();
    if full {
        let total = res.pow(nb as u32);
        for idx in 0..total {
            let mut w = WSelector::from_partition(p, 0.0);
            let mut r = idx;
            for &i in &p.beta {
                w.diag[i] = grid[r % res];
                r /= res;
            }
            out.push(w);
        }
    } else {
        for &i in &p.beta {
            for &t in &grid {
                let mut w = WSelector::from_partition(p, 0.5);
                w.diag[i] = t;
                out.push(w);
            }
        }
    }
    Ok(out)
}

pub(crate) fn a_matrix_from_parts(
    hess_yy: &DMatrix<f64>,
    jh: &DMatrix<f64>,
    jg: &DMatrix<f64>,
    w: &[f64],
    m: usize,
    m1: usize,
    m2: usize,
) -> DMatrix<f64> {
    let o = m + m1 + m2;
    let s = LAMBDA_BLOCK_SIGN;
    let mut a = DMatrix::zeros(o, o);
    a.view_mut((0, 0), (m, m)).copy_from(hess_yy);
    a.view_mut((0, m), (m, m1)).copy_from(&jh.transpose());
    a.view_mut((0, m + m1), (m, m2)).copy_from(&(jg.transpose() * s));
    a.view_mut((m, 0), (m1, m)).copy_from(jh);
    for i in 0..m2 {
        for j in 0..m {
            a[(m + m1 + i, j)] = (1.0 - w[i]) * jg[(i, j)];
        }
        a[(m + m1 + i, m + m1 + i)] = s * w[i];
    }
    a
}

fn require_solution(sol: &KktSolution) -> Result<()> {
    if sol.residual.is_nan() || sol.residual > crate::value_function::SOLUTION_TOL {
        return Err(Error::Precondition(format!(
            "lower-level residual {:e} exceeds tolerance",
            sol.residual
        )));
    }
    Ok(())
}

struct Workspace {
    b: DerivativeBundle,
    l: LagrangianEval,
}

fn workspace(spec: &ProblemSpec, sol: &KktSolution) -> Result<Workspace> {
    require_solution(sol)?;
    let b = eval_bundle(spec, sol.x.as_slice(), sol.y.as_slice())?;
    if sol.lambda.len() != b.g.len() || sol.mu.len() != b.h.len() {
        return Err(Error::Dimension("multipliers do not match the problem".into()));
    }
    let l = LagrangianEval::from_bundle(&b, &sol.mu, &sol.lambda);
    Ok(Workspace { b, l })
}

fn check_selector(ws: &Workspace, w: &WSelector) -> Result<()> {
    if w.diag.len() != ws.b.g.len() {
        return Err(Error::Dimension(format!(
            "selector has {} entries, problem has {} inequalities",
            w.diag.len(),
            ws.b.g.len()
        )));
    }
    Ok(())
}

fn a_of(ws: &Workspace, w: &WSelector) -> DMatrix<f64> {
    a_matrix_from_parts(
        &ws.l.hess_yy,
        &ws.b.jac_y_h(),
        &ws.b.jac_y_g(),
        &w.diag,
        ws.b.y.len(),
        ws.b.h.len(),
        ws.b.g.len(),
    )
}

/// `[∇²_yx𝓛; J_x h; (I − W) J_x g]`.
fn rhs_of(ws: &Workspace, w: &WSelector) -> DMatrix<f64> {
    let n = ws.b.x.len();
    let mut jxg = ws.b.jac_x_g();
    for i in 0..jxg.nrows() {
        jxg.row_mut(i).scale_mut(1.0 - w.diag[i]);
    }
    vstack(&[&ws.l.hess_yx, &ws.b.jac_x_h(), &jxg], n)
}

pub fn assemble_a(spec: &ProblemSpec, sol: &KktSolution, w: &WSelector) -> Result<DMatrix<f64>> {
    let ws = workspace(spec, sol)?;
    check_selector(&ws, w)?;
    Ok(a_of(&ws, w))
}

/// Pivot evidence for the nonsingularity of one `A(x, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonsingularity {
    pub selector: WSelector,
    /// Smallest LU pivot, 0 when elimination broke down.
    pub min_pivot: f64,
    pub determinant: f64,
    pub nonsingular: bool,
}

pub fn a_nonsingularity(spec: &ProblemSpec, sol: &KktSolution, selectors: &[WSelector]) -> Result<Vec<Nonsingularity>> {
    let ws = workspace(spec, sol)?;
    selectors
        .iter()
        .map(|w| {
            check_selector(&ws, w)?;
            let a = a_of(&ws, w);
            let determinant = a.determinant();
            Ok(match lu_factor(&a) {
                Ok(lu) => Nonsingularity {
                    selector: w.clone(),
                    min_pivot: lu.min_pivot(),
                    determinant,
                    nonsingular: true,
                },
                Err(LinalgError::Singular { pivot, .. }) => Nonsingularity {
                    selector: w.clone(),
                    min_pivot: pivot,
                    determinant,
                    nonsingular: false,
                },
                Err(e) => return Err(e.into()),
            })
        })
        .collect()
}

/// `H(x, W) = A(x, W)⁻¹ [∇²_yx𝓛; J_x h; (I − W) J_x g]`.
pub fn assemble_h(spec: &ProblemSpec, sol: &KktSolution, w: &WSelector) -> Result<DMatrix<f64>> {
    let ws = workspace(spec, sol)?;
    check_selector(&ws, w)?;
    h_of(&ws, w)
}

fn h_of(ws: &Workspace, w: &WSelector) -> Result<DMatrix<f64>> {
    Ok(lu_factor(&a_of(ws, w))?.solve_matrix(&rhs_of(ws, w)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeKind {
    Directional,
    BSubdifferential,
    ClarkeSample,
    OuterApprox,
}

#[derive(Debug, Clone)]
pub struct GeneralizedDerivativeSet {
    pub kind: DerivativeKind,
    pub members: Vec<(WSelector, DVector<f64>)>,
    /// Selectors whose `A(x, W)` was singular, with the error.
    pub failures: Vec<(WSelector, String)>,
}

impl GeneralizedDerivativeSet {
    /// Distance (infinity norm) from `v` to the nearest member.
    pub fn distance_to(&self, v: &DVector<f64>) -> f64 {
        self.members
            .iter()
            .map(|(_, m)| (m - v).amax())
            .fold(f64::INFINITY, f64::min)
    }
}

fn partition_of(ws: &Workspace, sol: &KktSolution, config: &CheckConfig) -> Result<ActivePartition> {
    classify_partition(ws.b.g_values().as_slice(), sol.lambda.as_slice(), config.tol_act)
}

/// Candidates `(y'; μ'; λ') = −H(x, W) d_x` over all binary selectors.
pub fn kkt_map_directional(
    spec: &ProblemSpec,
    sol: &KktSolution,
    d_x: &DVector<f64>,
    config: &CheckConfig,
) -> Result<GeneralizedDerivativeSet> {
    let ws = workspace(spec, sol)?;
    if d_x.len() != ws.b.x.len() {
        return Err(Error::Dimension(format!("direction has length {}", d_x.len())));
    }
    let part = partition_of(&ws, sol, config)?;
    let mut set = GeneralizedDerivativeSet {
        kind: DerivativeKind::Directional,
        members: Vec::new(),
        failures: Vec::new(),
    };
    for w in enumerate_b_selectors(&part, config.beta_cap)? {
        match h_of(&ws, &w) {
            Ok(h) => set.members.push((w, -(h * d_x))),
            Err(e) => set.failures.push((w, e.to_string())),
        }
    }
    if set.members.is_empty() {
        return Err(Error::Precondition("A(x, W) is singular for every selector".into()));
    }
    Ok(set)
}

/// `(∇_y𝓛; h; −g)`, the gradient of `𝓛` in `(y, μ, λ)`.
fn grad_ymulambda(ws: &Workspace) -> DVector<f64> {
    crate::lower_level::vstack_vec(&[&ws.l.grad_y, &ws.b.h_values(), &(-ws.b.g_values())])
}

/// Candidate gradient `∇_x𝓛 − H(x, W)ᵀ (∇_y𝓛; h; −g)` for one selector.
pub fn phi_candidate_gradient(spec: &ProblemSpec, sol: &KktSolution, w: &WSelector) -> Result<DVector<f64>> {
    let ws = workspace(spec, sol)?;
    check_selector(&ws, w)?;
    Ok(&ws.l.grad_x - h_of(&ws, w)?.transpose() * grad_ymulambda(&ws))
}

/// Candidate gradients of `φ` over binary selectors, or over binary
/// selectors plus a Clarke-box grid for [`DerivativeKind::OuterApprox`].
pub fn phi_generalized_gradients(
    spec: &ProblemSpec,
    sol: &KktSolution,
    kind: DerivativeKind,
    config: &CheckConfig,
) -> Result<GeneralizedDerivativeSet> {
    let ws = workspace(spec, sol)?;
    let part = partition_of(&ws, sol, config)?;
    let mut selectors = match kind {
        DerivativeKind::BSubdifferential => enumerate_b_selectors(&part, config.beta_cap)?,
        DerivativeKind::ClarkeSample => clarke_selectors(&part, config.clarke_resolution, config.beta_cap)?,
        DerivativeKind::OuterApprox => {
            let mut s = enumerate_b_selectors(&part, config.beta_cap)?;
            for w in clarke_selectors(&part, config.clarke_resolution, config.beta_cap)? {
                if !s.contains(&w) {
                    s.push(w);
                }
            }
            s
        }
        DerivativeKind::Directional => {
            return Err(Error::Precondition(
                "directional sets are built by kkt_map_directional".into(),
            ))
        }
    };
    selectors.dedup();
    let r = grad_ymulambda(&ws);
    let mut set = GeneralizedDerivativeSet {
        kind,
        members: Vec::new(),
        failures: Vec::new(),
    };
    for w in selectors {
        match h_of(&ws, &w) {
            Ok(h) => {
                let v = &ws.l.grad_x - h.transpose() * &r;
                set.members.push((w, v));
            }
            Err(e) => set.failures.push((w, e.to_string())),
        }
    }
    if set.members.is_empty() {
        return Err(Error::Precondition("A(x, W) is singular for every selector".into()));
    }
    Ok(set)
}
