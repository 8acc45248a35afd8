//! Brute-force references: central finite differences, grid maximization
//! of the inner problem, and a grid test of the local minimax definition.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::CheckConfig;
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::report::{real, real_seq, ConditionResult, Method, Role, Status};

pub const DEFINITION_CHECK: &str = "oracle.local_minimax_definition";

/// Largest number of `(x, z)` pairs evaluated per ladder level before the
/// grid step is coarsened.
const PAIR_BUDGET: usize = 4_000_000;

/// Largest `n` and `m` the grid checks accept.
pub const MAX_GRID_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    pub gradient: f64,
    pub hessian: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            gradient: 1e-5,
            hessian: 1e-4,
        }
    }
}

impl FdSteps {
    pub fn from_config(config: &CheckConfig) -> Self {
        FdSteps {
            gradient: config.fd_step_gradient,
            hessian: config.fd_step_hessian,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdDerivatives {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Central-difference gradient and Hessian of a scalar field.
pub fn fd_derivatives<F>(f: F, point: &[f64], steps: FdSteps) -> Result<FdDerivatives>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = point.len();
    let at = |shifts: &[(usize, f64)]| {
        let mut p = point.to_vec();
        for &(i, s) in shifts {
            p[i] += s;
        }
        f(&p)
    };
    let value = f(point)?;
    let h = steps.gradient;
    let mut gradient = DVector::zeros(n);
    for i in 0..n {
        gradient[i] = (at(&[(i, h)])? - at(&[(i, -h)])?) / (2.0 * h);
    }
    let h = steps.hessian;
    let mut hessian = DMatrix::zeros(n, n);
    for i in 0..n {
        hessian[(i, i)] = (at(&[(i, h)])? - 2.0 * value + at(&[(i, -h)])?) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                + at(&[(i, -h), (j, -h)])?)
                / (4.0 * h * h);
            hessian[(i, j)] = v;
            hessian[(j, i)] = v;
        }
    }
    Ok(FdDerivatives {
        value,
        gradient,
        hessian,
    })
}

/// Lattice offsets `step·k` inside the closed Euclidean ball of `radius`.
fn ball_offsets(dim: usize, radius: f64, step: f64) -> Vec<Vec<f64>> {
    let k = (radius / step + 1e-9).floor() as i64;
    let r2 = (radius / step) * (radius / step) * (1.0 + 1e-12);
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-k..=k).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .filter(|q| q.iter().map(|&c| (c * c) as f64).sum::<f64>() <= r2)
            .collect();
    }
    out.into_iter()
        .map(|q| q.into_iter().map(|c| c as f64 * step).collect())
        .collect()
}

fn shifted(center: &[f64], offset: &[f64]) -> Vec<f64> {
    center.iter().zip(offset).map(|(c, o)| c + o).collect()
}

fn lower_feasible(spec: &ProblemSpec, x: &[f64], y: &[f64], tol: f64) -> Result<bool> {
    let (h, g) = spec.lower_constraint_values(x, y)?;
    Ok(h.iter().all(|v| v.abs() <= tol) && g.iter().all(|&v| v <= tol))
}

fn upper_feasible(spec: &ProblemSpec, x: &[f64], tol: f64) -> Result<bool> {
    let (h, g) = spec.upper_constraint_values(x)?;
    Ok(h.iter().all(|v| v.abs() <= tol) && g.iter().all(|&v| v <= tol))
}

fn require_grid_dims(spec: &ProblemSpec) -> Result<()> {
    let d = spec.dims();
    if d.n > MAX_GRID_DIM || d.m > MAX_GRID_DIM {
        return Err(Error::Precondition(format!(
            "grid oracles need n, m <= {MAX_GRID_DIM}, problem has n = {}, m = {}",
            d.n, d.m
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMax {
    pub y: Vec<f64>,
    pub value: f64,
    pub feasible_points: usize,
    pub step: f64,
}

fn maximize_on_offsets(
    spec: &ProblemSpec,
    x: &[f64],
    center: &[f64],
    offsets: &[Vec<f64>],
    feas_tol: f64,
) -> Result<Option<(Vec<f64>, f64, usize)>> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut feasible = 0;
    for off in offsets {
        let y = shifted(center, off);
        if !lower_feasible(spec, x, &y, feas_tol)? {
            continue;
        }
        feasible += 1;
        let v = spec.objective_value(x, &y)?;
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((y, v));
        }
    }
    Ok(best.map(|(y, v)| (y, v, feasible)))
}

/// Best `f(x, ·)` over a lattice with `points_per_axis` points across the
/// ball of `radius` around `center`, restricted to `Y(x)`.
pub fn grid_local_maximize(
    spec: &ProblemSpec,
    x: &[f64],
    center: &[f64],
    radius: f64,
    points_per_axis: usize,
    feas_tol: f64,
) -> Result<GridMax> {
    require_grid_dims(spec)?;
    spec.check_point(x, center)?;
    if radius.is_nan() || radius <= 0.0 || points_per_axis < 3 {
        return Err(Error::Precondition(format!(
            "grid needs radius > 0 and at least 3 points per axis, got {radius} and {points_per_axis}"
        )));
    }
    let step = 2.0 * radius / (points_per_axis - 1) as f64;
    let offsets = ball_offsets(center.len(), radius, step);
    match maximize_on_offsets(spec, x, center, &offsets, feas_tol)? {
        Some((y, value, feasible_points)) => Ok(GridMax {
            y,
            value,
            feasible_points,
            step,
        }),
        None => Err(Error::EmptyGrid(format!(
            "no point of Y(x) within {radius} of the center at x = {x:?}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Largest ball radius `δ₀`.
    pub radius: f64,
    /// Lattice spacing; coarsened per level when the pair budget is exceeded.
    pub step: f64,
    /// `η(δ) = eta_factor · δ`.
    pub eta_factor: f64,
    pub tol: f64,
    /// Number of radii `δ₀, δ₀/2, …` tested.
    pub levels: usize,
    pub feas_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            radius: 0.1,
            step: 1e-3,
            eta_factor: 2.0,
            tol: 1e-9,
            levels: 4,
            feas_tol: 1e-9,
        }
    }
}

impl GridSpec {
    pub fn from_config(config: &CheckConfig) -> Self {
        GridSpec {
            radius: config.oracle_radius,
            step: config.oracle_step,
            eta_factor: config.oracle_eta,
            tol: config.oracle_tol,
            ..GridSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.radius > 0.0
            && self.step > 0.0
            && self.step <= self.radius
            && self.eta_factor > 0.0
            && self.tol >= 0.0
            && self.feas_tol >= 0.0
            && self.levels >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "grid needs radius > 0, 0 < step <= radius, eta factor > 0, tolerances >= 0 and at least one level: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `f(x*, y) <= f(x*, y*)` for `y ∈ Y(x*)` near `y*`.
    Left,
    /// `f(x*, y*) <= max f(x, z)` over `z ∈ Y(x)` within `η(δ)` of `y*`.
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub side: Side,
    #[serde(with = "real")]
    pub delta: f64,
    #[serde(with = "real_seq")]
    pub x: Vec<f64>,
    #[serde(with = "real_seq")]
    pub y: Vec<f64>,
    /// Positive when the inequality fails.
    #[serde(with = "real")]
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOutcome {
    #[serde(with = "real")]
    pub delta: f64,
    #[serde(with = "real")]
    pub eta: f64,
    #[serde(with = "real")]
    pub step: f64,
    #[serde(with = "real")]
    pub left_worst: f64,
    #[serde(with = "real")]
    pub right_worst: f64,
    pub x_points: usize,
    /// Feasible `x` whose inner ball contained no feasible grid point.
    pub empty_inner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitionCheck {
    pub passed: bool,
    #[serde(with = "real")]
    pub tol: f64,
    /// The largest inequality gap found, violating or not.
    pub worst: Option<Violation>,
    pub levels: Vec<LevelOutcome>,
}

impl DefinitionCheck {
    pub fn worst_amount(&self) -> f64 {
        self.worst.as_ref().map_or(f64::NEG_INFINITY, |v| v.amount)
    }

    pub fn passes_at(&self, tol: f64) -> bool {
        self.worst_amount() <= tol
    }

    pub fn to_result(&self) -> ConditionResult {
        let status = if self.passed {
            Status::Satisfied
        } else {
            Status::Violated
        };
        let steps: Vec<String> = self.levels.iter().map(|l| format!("{:e}", l.step)).collect();
        let mut r = ConditionResult::new(
            DEFINITION_CHECK,
            Role::Diagnostic,
            Method::Grid,
            status,
            self.worst_amount(),
            self.tol,
        )
        .with_detail(format!(
            "{} radii from {:e}, grid steps [{}]",
            self.levels.len(),
            self.levels.first().map_or(f64::NAN, |l| l.delta),
            steps.join(", ")
        ));
        if let Some(v) = self.worst.as_ref().filter(|_| !self.passed) {
            r = r.with_witness(v.x.iter().chain(&v.y).copied());
        }
        r
    }
}

fn record(worst: &mut Option<Violation>, v: Violation) {
    if worst.as_ref().is_none_or(|w| v.amount > w.amount) {
        *worst = Some(v);
    }
}

/// Grid test of both inequalities of the local minimax definition over a
/// ladder of radii `δ₀ 2^{-k}`.
pub fn verify_minimax_definition(
    spec: &ProblemSpec,
    x_star: &[f64],
    y_star: &[f64],
    grid: &GridSpec,
) -> Result<DefinitionCheck> {
    grid.validate()?;
    require_grid_dims(spec)?;
    spec.check_point(x_star, y_star)?;
    if !upper_feasible(spec, x_star, grid.feas_tol)? || !lower_feasible(spec, x_star, y_star, grid.feas_tol)? {
        return Err(Error::Infeasible(format!(
            "({x_star:?}, {y_star:?}) is not feasible to {:e}",
            grid.feas_tol
        )));
    }
    let f_star = spec.objective_value(x_star, y_star)?;
    let d = spec.dims();
    let mut worst = None;
    let mut levels = Vec::with_capacity(grid.levels);
    for k in 0..grid.levels {
        let delta = grid.radius / 2f64.powi(k as i32);
        let eta = grid.eta_factor * delta;
        let mut step = grid.step.min(delta);
        let (xs, zs) = loop {
            let xs = ball_offsets(d.n, delta, step);
            let zs = ball_offsets(d.m, eta, step);
            if xs.len().saturating_mul(zs.len()) <= PAIR_BUDGET {
                break (xs, zs);
            }
            step *= 1.5;
        };

        let mut left_worst = f64::NEG_INFINITY;
        for off in &ball_offsets(d.m, delta, step) {
            let y = shifted(y_star, off);
            if !lower_feasible(spec, x_star, &y, grid.feas_tol)? {
                continue;
            }
            let amount = spec.objective_value(x_star, &y)? - f_star;
            left_worst = left_worst.max(amount);
            record(
                &mut worst,
                Violation {
                    side: Side::Left,
                    delta,
                    x: x_star.to_vec(),
                    y,
                    amount,
                },
            );
        }

        let mut right_worst = f64::NEG_INFINITY;
        let mut x_points = 0;
        let mut empty_inner = 0;
        for off in &xs {
            let x = shifted(x_star, off);
            if !upper_feasible(spec, &x, grid.feas_tol)? {
                continue;
            }
            x_points += 1;
            let Some((z, best, _)) = maximize_on_offsets(spec, &x, y_star, &zs, grid.feas_tol)? else {
                empty_inner += 1;
                continue;
            };
            let amount = f_star - best;
            right_worst = right_worst.max(amount);
            record(
                &mut worst,
                Violation {
                    side: Side::Right,
                    delta,
                    x,
                    y: z,
                    amount,
                },
            );
        }
        levels.push(LevelOutcome {
            delta,
            eta,
            step,
            left_worst,
            right_worst,
            x_points,
            empty_inner,
        });
    }
    let passed = worst.as_ref().is_none_or(|v| v.amount <= grid.tol);
    Ok(DefinitionCheck {
        passed,
        tol: grid.tol,
        worst,
        levels,
    })
}
