//! Local Newton methods for the lower-level KKT system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_multiplier_dims, inf_norm, kkt_residual_from_bundle, vstack_vec, LagrangianEval};
use crate::config::CheckConfig;
use crate::error::{Error, Result};
use crate::linalg::lu_factor;
use crate::problem::{eval_bundle, DerivativeBundle, ProblemSpec};

/// Initial squared slack at seeds where both `g_i` and `λ_i` vanish, which
/// would otherwise make the Newton matrix singular.
const SLACK_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathTag {
    Smooth,
    Nonsmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Newton on the squared-slack system `(∇_y𝓛, −2λ∘w, h, g + w∘w) = 0`.
    Smooth,
    /// Semismooth Newton on `(∇_y𝓛, h, g − min(λ + g, 0)) = 0`.
    Nonsmooth,
    /// Semismooth Newton, then a squared-slack polish when the limit is
    /// strictly complementary.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerSeed {
    pub y: Vec<f64>,
    /// Defaults to zeros.
    pub mu: Option<Vec<f64>>,
    /// Defaults to zeros.
    pub lambda: Option<Vec<f64>>,
}

impl LowerSeed {
    pub fn new(y: Vec<f64>) -> Self {
        LowerSeed {
            y,
            mu: None,
            lambda: None,
        }
    }

    pub fn with_multipliers(y: Vec<f64>, mu: Vec<f64>, lambda: Vec<f64>) -> Self {
        LowerSeed {
            y,
            mu: Some(mu),
            lambda: Some(lambda),
        }
    }
}

/// A lower-level KKT point `(y, w, μ, λ)` at a fixed `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    /// Slacks with `w_i² = −g_i` at solutions.
    pub w: DVector<f64>,
    pub mu: DVector<f64>,
    pub lambda: DVector<f64>,
    /// Infinity norm of the residual of the system that was solved.
    pub residual: f64,
    pub path: PathTag,
    /// Residual norm at every iterate, starting with the seed.
    pub trace: Vec<f64>,
}

impl KktSolution {
    /// Wrap a known point without iterating; the residual is the KKT
    /// residual and slacks are `sqrt(max(0, −g))`.
    pub fn at_point(
        spec: &ProblemSpec,
        x: &[f64],
        y: &[f64],
        mu: &[f64],
        lambda: &[f64],
        path: PathTag,
    ) -> Result<Self> {
        check_multiplier_dims(spec, mu, lambda)?;
        let b = eval_bundle(spec, x, y)?;
        let mu = DVector::from_column_slice(mu);
        let lambda = DVector::from_column_slice(lambda);
        let residual = kkt_residual_from_bundle(&b, &mu, &lambda).norm;
        let g = b.g_values();
        Ok(KktSolution {
            x: b.x,
            y: b.y,
            w: g.map(|gi| (-gi).max(0.0).sqrt()),
            mu,
            lambda,
            residual,
            path,
            trace: vec![residual],
        })
    }
}

struct Unknowns {
    y: DVector<f64>,
    w: DVector<f64>,
    mu: DVector<f64>,
    lambda: DVector<f64>,
}

/// `T(y, w, μ, λ)` of the squared-slack system.
fn smooth_residual(b: &DerivativeBundle, z: &Unknowns) -> DVector<f64> {
    let l = LagrangianEval::from_bundle(b, &z.mu, &z.lambda);
    let g = b.g_values();
    let slack = DVector::from_fn(g.len(), |i, _| -2.0 * z.lambda[i] * z.w[i]);
    let feas = DVector::from_fn(g.len(), |i, _| g[i] + z.w[i] * z.w[i]);
    vstack_vec(&[&l.grad_y, &slack, &b.h_values(), &feas])
}

/// Exact Jacobian of `T` in the order `(y, w, μ, λ)`.
fn smooth_jacobian(b: &DerivativeBundle, z: &Unknowns) -> DMatrix<f64> {
    let (m, m1, m2) = (b.y.len(), b.h.len(), b.g.len());
    let l = LagrangianEval::from_bundle(b, &z.mu, &z.lambda);
    let jh = b.jac_y_h();
    let jg = b.jac_y_g();
    let (oy, ow, omu, ol) = (0, m, m + m2, m + m2 + m1);
    let mut j = DMatrix::zeros(m + 2 * m2 + m1, m + 2 * m2 + m1);
    j.view_mut((oy, oy), (m, m)).copy_from(&l.hess_yy);
    j.view_mut((oy, omu), (m, m1)).copy_from(&jh.transpose());
    j.view_mut((oy, ol), (m, m2)).copy_from(&(-jg.transpose()));
    for i in 0..m2 {
        j[(ow + i, ow + i)] = -2.0 * z.lambda[i];
        j[(ow + i, ol + i)] = -2.0 * z.w[i];
        j[(ol + i, ow + i)] = 2.0 * z.w[i];
    }
    j.view_mut((omu, oy), (m1, m)).copy_from(&jh);
    j.view_mut((ol, oy), (m2, m)).copy_from(&jg);
    j
}

fn newton_smooth(
    spec: &ProblemSpec,
    x: &[f64],
    mut z: Unknowns,
    config: &CheckConfig,
    max_iter: usize,
) -> Result<KktSolution> {
    let (m, m1, m2) = (z.y.len(), z.mu.len(), z.lambda.len());
    let mut trace = Vec::new();
    for k in 0..=max_iter {
        let b = eval_bundle(spec, x, z.y.as_slice())?;
        let t = smooth_residual(&b, &z);
        let r = inf_norm(&t);
        trace.push(r);
        if !r.is_finite() {
            break;
        }
        if r <= config.tol_newton {
            return Ok(KktSolution {
                x: b.x,
                y: z.y,
                w: z.w,
                mu: z.mu,
                lambda: z.lambda,
                residual: r,
                path: PathTag::Smooth,
                trace,
            });
        }
        if k == max_iter {
            break;
        }
        let step = lu_factor(&smooth_jacobian(&b, &z))?.solve(&t);
        z.y -= step.rows(0, m);
        z.w -= step.rows(m, m2);
        z.mu -= step.rows(m + m2, m1);
        z.lambda -= step.rows(m + m2 + m1, m2);
    }
    Err(Error::NoConvergence {
        iterations: trace.len() - 1,
        residual: *trace.last().unwrap_or(&f64::NAN),
    })
}

/// Newton matrix of the semismooth system for the selector `W_i = [λ_i + g_i < 0]`.
fn semismooth_matrix(b: &DerivativeBundle, l: &LagrangianEval, lambda: &DVector<f64>) -> DMatrix<f64> {
    let (m, m1, m2) = (b.y.len(), b.h.len(), b.g.len());
    let g = b.g_values();
    let w: Vec<f64> = (0..m2)
        .map(|i| if lambda[i] + g[i] < 0.0 { 1.0 } else { 0.0 })
        .collect();
    crate::generalized_jacobian::a_matrix_from_parts(&l.hess_yy, &b.jac_y_h(), &b.jac_y_g(), &w, m, m1, m2)
}

fn newton_nonsmooth(
    spec: &ProblemSpec,
    x: &[f64],
    mut y: DVector<f64>,
    mut mu: DVector<f64>,
    mut lambda: DVector<f64>,
    config: &CheckConfig,
) -> Result<KktSolution> {
    let (m, m1, m2) = (y.len(), mu.len(), lambda.len());
    let mut trace = Vec::new();
    for k in 0..=config.max_iter {
        let b = eval_bundle(spec, x, y.as_slice())?;
        let res = kkt_residual_from_bundle(&b, &mu, &lambda);
        trace.push(res.norm);
        if !res.norm.is_finite() {
            break;
        }
        if res.norm <= config.tol_newton {
            let g = b.g_values();
            return Ok(KktSolution {
                x: b.x,
                y,
                w: g.map(|gi| (-gi).max(0.0).sqrt()),
                mu,
                lambda,
                residual: res.norm,
                path: PathTag::Nonsmooth,
                trace,
            });
        }
        if k == config.max_iter {
            break;
        }
        let l = LagrangianEval::from_bundle(&b, &mu, &lambda);
        let step = lu_factor(&semismooth_matrix(&b, &l, &lambda))?.solve(&res.vector);
        y -= step.rows(0, m);
        mu -= step.rows(m, m1);
        lambda -= step.rows(m + m1, m2);
    }
    Err(Error::NoConvergence {
        iterations: trace.len() - 1,
        residual: *trace.last().unwrap_or(&f64::NAN),
    })
}

fn seed_vectors(spec: &ProblemSpec, x: &[f64], seed: &LowerSeed) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let d = spec.dims();
    let mu = seed.mu.clone().unwrap_or_else(|| vec![0.0; d.m1]);
    let lambda = seed.lambda.clone().unwrap_or_else(|| vec![0.0; d.m2]);
    check_multiplier_dims(spec, &mu, &lambda)?;
    spec.check_point(x, &seed.y)?;
    Ok((
        DVector::from_column_slice(&seed.y),
        DVector::from_column_slice(&mu),
        DVector::from_column_slice(&lambda),
    ))
}

fn smooth_from(
    spec: &ProblemSpec,
    x: &[f64],
    y: DVector<f64>,
    mu: DVector<f64>,
    lambda: DVector<f64>,
) -> Result<Unknowns> {
    let (_, g) = spec.lower_constraint_values(x, y.as_slice())?;
    let w = DVector::from_fn(g.len(), |i, _| {
        if -g[i] > 0.0 || lambda[i] != 0.0 {
            (-g[i]).max(0.0).sqrt()
        } else {
            SLACK_FLOOR.sqrt()
        }
    });
    Ok(Unknowns { w, y, mu, lambda })
}

/// Solve the lower-level KKT system at `x` from `seed`.
pub fn solve_lower(
    spec: &ProblemSpec,
    x: &[f64],
    seed: &LowerSeed,
    config: &CheckConfig,
    method: SolveMethod,
) -> Result<KktSolution> {
    spec.require_smooth()?;
    let (y, mu, lambda) = seed_vectors(spec, x, seed)?;
    match method {
        SolveMethod::Smooth => newton_smooth(spec, x, smooth_from(spec, x, y, mu, lambda)?, config, config.max_iter),
        SolveMethod::Nonsmooth => newton_nonsmooth(spec, x, y, mu, lambda, config),
        SolveMethod::Auto => {
            let ns = newton_nonsmooth(spec, x, y, mu, lambda, config)?;
            let (_, g) = spec.lower_constraint_values(x, ns.y.as_slice())?;
            let sc = (0..g.len()).map(|i| ns.lambda[i] - g[i]).fold(f64::INFINITY, f64::min);
            if sc <= config.tol_sc {
                return Ok(ns);
            }
            let z = Unknowns {
                y: ns.y.clone(),
                w: ns.w.clone(),
                mu: ns.mu.clone(),
                lambda: ns.lambda.clone(),
            };
            match newton_smooth(spec, x, z, config, config.max_iter) {
                Ok(mut s) => {
                    let mut trace = ns.trace.clone();
                    trace.extend(s.trace.iter().skip(1));
                    s.trace = trace;
                    Ok(s)
                }
                Err(_) => Ok(ns),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{p1, p2};

    fn cfg() -> CheckConfig {
        CheckConfig::default()
    }

    #[test]
    fn p1_smooth_newton_interior() {
        let s = solve_lower(&p1(), &[0.3], &LowerSeed::new(vec![0.0]), &cfg(), SolveMethod::Smooth).unwrap();
        assert!((s.y[0] - 0.3).abs() < 1e-12);
        assert!(s.lambda[0].abs() < 1e-12);
        assert!((s.w[0] - 0.7f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.path, PathTag::Smooth);
        assert!(s.residual <= 1e-10);
        // First two residuals by hand: the seed misses stationarity by 0.3,
        // the first step leaves slack error (0.3/2)^2.
        assert!((s.trace[0] - 0.3).abs() < 1e-15);
        assert!((s.trace[1] - 0.0225).abs() < 1e-12);
        assert!(s.trace.len() <= 11);
    }

    #[test]
    fn p2_interior_and_boundary() {
        let s = solve_lower(&p2(), &[-0.5], &LowerSeed::new(vec![0.0]), &cfg(), SolveMethod::Auto).unwrap();
        assert!((s.y[0] + 0.5).abs() < 1e-12);
        assert!(s.lambda[0].abs() < 1e-12);
        assert_eq!(s.path, PathTag::Smooth);

        let s = solve_lower(&p2(), &[0.5], &LowerSeed::new(vec![0.0]), &cfg(), SolveMethod::Auto).unwrap();
        assert!(s.y[0].abs() < 1e-12);
        assert!((s.lambda[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_point_stays_nonsmooth() {
        let s = solve_lower(&p2(), &[0.0], &LowerSeed::new(vec![0.0]), &cfg(), SolveMethod::Auto).unwrap();
        assert_eq!(s.path, PathTag::Nonsmooth);
        assert_eq!(s.residual, 0.0);
    }

    #[test]
    fn smooth_jacobian_matches_differences() {
        let spec = p1();
        let x = [0.2];
        let z = Unknowns {
            y: DVector::from_element(1, 0.4),
            w: DVector::from_element(1, 0.6),
            mu: DVector::zeros(0),
            lambda: DVector::from_element(1, 0.3),
        };
        let b = eval_bundle(&spec, &x, z.y.as_slice()).unwrap();
        let j = smooth_jacobian(&b, &z);
        let pack = |z: &Unknowns| vstack_vec(&[&z.y, &z.w, &z.mu, &z.lambda]);
        let unpack = |v: &DVector<f64>| Unknowns {
            y: v.rows(0, 1).into(),
            w: v.rows(1, 1).into(),
            mu: DVector::zeros(0),
            lambda: v.rows(2, 1).into(),
        };
        let base = pack(&z);
        let h = 1e-6;
        for c in 0..base.len() {
            let mut p = base.clone();
            p[c] += h;
            let mut q = base.clone();
            q[c] -= h;
            let (zp, zq) = (unpack(&p), unpack(&q));
            let tp = smooth_residual(&eval_bundle(&spec, &x, zp.y.as_slice()).unwrap(), &zp);
            let tq = smooth_residual(&eval_bundle(&spec, &x, zq.y.as_slice()).unwrap(), &zq);
            let col = (tp - tq) / (2.0 * h);
            for r in 0..base.len() {
                assert!((col[r] - j[(r, c)]).abs() < 1e-8, "entry ({r},{c})");
            }
        }
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut c = cfg();
        c.max_iter = 1;
        let e = solve_lower(&p1(), &[0.3], &LowerSeed::new(vec![0.0]), &c, SolveMethod::Smooth).unwrap_err();
        assert!(matches!(e, Error::NoConvergence { iterations: 1, .. }));
    }
}
