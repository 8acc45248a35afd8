//! Constrained minimax instances: `min_{x in Phi} max_{y in Y(x)} f(x, y)` with
//! `Phi = {x : H(x) = 0, G(x) <= 0}` and `Y(x) = {y : h(x, y) = 0, g(x, y) <= 0}`.

pub mod expr;
pub mod parse;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use expr::{EvalError, Expr, Func, Var};
pub use parse::{parse_expr, parse_problem, ParseError, ParseErrorKind, Scope};

use crate::error::{Error, Result};

/// Problem dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Upper-level variables `x`.
    pub n: usize,
    /// Lower-level variables `y`.
    pub m: usize,
    /// Lower equality constraints `h`.
    pub m1: usize,
    /// Lower inequality constraints `g`.
    pub m2: usize,
    /// Upper equality constraints `H`.
    pub n1: usize,
    /// Upper inequality constraints `G`.
    pub n2: usize,
}

/// An expression together with its symbolic gradient and Hessian, ordered
/// `(x_1..x_n, y_1..y_m)`.
#[derive(Debug, Clone)]
struct Compiled {
    expr: Expr,
    grad: Vec<Expr>,
    /// Upper triangle, row-major.
    hess: Vec<Expr>,
}

impl Compiled {
    fn new(expr: Expr, dims: &Dims) -> Self {
        let vars = all_vars(dims);
        let grad: Vec<Expr> = vars.iter().map(|&v| expr.differentiate(v)).collect();
        let mut hess = Vec::with_capacity(vars.len() * (vars.len() + 1) / 2);
        for (i, gi) in grad.iter().enumerate() {
            for &v in &vars[i..] {
                hess.push(gi.differentiate(v));
            }
        }
        Compiled { expr, grad, hess }
    }

    fn eval(&self, dims: &Dims, x: &[f64], y: &[f64]) -> Result<FunctionEval> {
        let (n, m) = (dims.n, dims.m);
        let k = n + m;
        let value = self.expr.eval(x, y)?;
        let mut grad = DVector::zeros(k);
        for (i, g) in self.grad.iter().enumerate() {
            grad[i] = g.eval(x, y)?;
        }
        let mut hess = DMatrix::zeros(k, k);
        let mut idx = 0;
        for i in 0..k {
            for j in i..k {
                let v = self.hess[idx].eval(x, y)?;
                hess[(i, j)] = v;
                hess[(j, i)] = v;
                idx += 1;
            }
        }
        Ok(FunctionEval {
            value,
            grad_x: grad.rows(0, n).into_owned(),
            grad_y: grad.rows(n, m).into_owned(),
            hess_xx: hess.view((0, 0), (n, n)).into_owned(),
            hess_yx: hess.view((n, 0), (m, n)).into_owned(),
            hess_yy: hess.view((n, n), (m, m)).into_owned(),
        })
    }
}

fn all_vars(dims: &Dims) -> Vec<Var> {
    (0..dims.n).map(Var::X).chain((0..dims.m).map(Var::Y)).collect()
}

/// A validated minimax instance with precompiled exact derivatives.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    dims: Dims,
    f: Compiled,
    h: Vec<Compiled>,
    g: Vec<Compiled>,
    upper_eq: Vec<Compiled>,
    upper_ineq: Vec<Compiled>,
}

impl ProblemSpec {
    pub fn new(
        dims: Dims,
        f: Expr,
        h: Vec<Expr>,
        g: Vec<Expr>,
        upper_eq: Vec<Expr>,
        upper_ineq: Vec<Expr>,
    ) -> Result<Self> {
        let check_len = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Dimension(format!(
                    "{name}: {got} expressions declared, dims say {want}"
                )))
            }
        };
        check_len("h", h.len(), dims.m1)?;
        check_len("g", g.len(), dims.m2)?;
        check_len("H", upper_eq.len(), dims.n1)?;
        check_len("G", upper_ineq.len(), dims.n2)?;

        let mut bad: Option<String> = None;
        let mut check_vars = |label: String, e: &Expr, allow_y: bool| {
            e.for_each_var(&mut |v| {
                let ok = match v {
                    Var::X(i) => i < dims.n,
                    Var::Y(j) => allow_y && j < dims.m,
                };
                if !ok && bad.is_none() {
                    bad = Some(format!("{label}: variable {v} not allowed"));
                }
            });
        };
        check_vars("f".into(), &f, true);
        for (k, e) in h.iter().enumerate() {
            check_vars(format!("h{}", k + 1), e, true);
        }
        for (k, e) in g.iter().enumerate() {
            check_vars(format!("g{}", k + 1), e, true);
        }
        for (k, e) in upper_eq.iter().enumerate() {
            check_vars(format!("H{}", k + 1), e, false);
        }
        for (k, e) in upper_ineq.iter().enumerate() {
            check_vars(format!("G{}", k + 1), e, false);
        }
        if let Some(msg) = bad {
            return Err(Error::Dimension(msg));
        }

        let compile = |v: Vec<Expr>| v.into_iter().map(|e| Compiled::new(e, &dims)).collect();
        Ok(ProblemSpec {
            dims,
            f: Compiled::new(f, &dims),
            h: compile(h),
            g: compile(g),
            upper_eq: compile(upper_eq),
            upper_ineq: compile(upper_ineq),
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, ParseError> {
        parse_problem(text)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn objective(&self) -> &Expr {
        &self.f.expr
    }

    pub fn lower_eq(&self) -> Vec<&Expr> {
        self.h.iter().map(|c| &c.expr).collect()
    }

    pub fn lower_ineq(&self) -> Vec<&Expr> {
        self.g.iter().map(|c| &c.expr).collect()
    }

    pub fn upper_eq(&self) -> Vec<&Expr> {
        self.upper_eq.iter().map(|c| &c.expr).collect()
    }

    pub fn upper_ineq(&self) -> Vec<&Expr> {
        self.upper_ineq.iter().map(|c| &c.expr).collect()
    }

    fn all_compiled(&self) -> impl Iterator<Item = &Compiled> {
        std::iter::once(&self.f)
            .chain(&self.h)
            .chain(&self.g)
            .chain(&self.upper_eq)
            .chain(&self.upper_ineq)
    }

    /// True if any expression uses `abs`.
    pub fn uses_abs(&self) -> bool {
        self.all_compiled().any(|c| c.expr.contains_func(Func::Abs))
    }

    /// Fail when an expression is not twice continuously differentiable.
    pub fn require_smooth(&self) -> Result<()> {
        if let Some(c) = self.all_compiled().find(|c| c.expr.contains_func(Func::Abs)) {
            return Err(Error::NonSmooth(c.expr.to_string()));
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields an identical spec.
    pub fn to_text(&self) -> String {
        let d = self.dims;
        let mut out = format!("dims {} {} {} {} {} {}\n", d.n, d.m, d.m1, d.m2, d.n1, d.n2);
        let _ = writeln!(out, "f = {}", self.f.expr);
        for (prefix, list) in [
            ("h", &self.h),
            ("g", &self.g),
            ("H", &self.upper_eq),
            ("G", &self.upper_ineq),
        ] {
            for (k, c) in list.iter().enumerate() {
                let _ = writeln!(out, "{prefix}{} = {}", k + 1, c.expr);
            }
        }
        out
    }

    /// SHA-256 of the canonical text.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn check_point(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.dims.n || y.len() != self.dims.m {
            return Err(Error::Dimension(format!(
                "point has |x| = {}, |y| = {}; problem has n = {}, m = {}",
                x.len(),
                y.len(),
                self.dims.n,
                self.dims.m
            )));
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.f.expr.eval(x, y)?)
    }

    /// `(h(x, y), g(x, y))`.
    pub fn lower_constraint_values(&self, x: &[f64], y: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        let h = self
            .h
            .iter()
            .map(|c| c.expr.eval(x, y))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let g = self
            .g
            .iter()
            .map(|c| c.expr.eval(x, y))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok((DVector::from_vec(h), DVector::from_vec(g)))
    }

    /// Values and derivatives of `H` and `G` at `x`.
    pub fn eval_upper(&self, x: &[f64]) -> Result<(Vec<FunctionEval>, Vec<FunctionEval>)> {
        let y0 = vec![0.0; self.dims.m];
        self.check_point(x, &y0)?;
        let ev = |list: &[Compiled]| -> Result<Vec<FunctionEval>> {
            list.iter().map(|c| c.eval(&self.dims, x, &y0)).collect()
        };
        Ok((ev(&self.upper_eq)?, ev(&self.upper_ineq)?))
    }

    /// `(H(x), G(x))`.
    pub fn upper_constraint_values(&self, x: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        let y0 = vec![0.0; self.dims.m];
        let he = self
            .upper_eq
            .iter()
            .map(|c| c.expr.eval(x, &y0))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let ge = self
            .upper_ineq
            .iter()
            .map(|c| c.expr.eval(x, &y0))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok((DVector::from_vec(he), DVector::from_vec(ge)))
    }
}

/// Value, gradient and Hessian blocks of one scalar function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionEval {
    pub value: f64,
    pub grad_x: DVector<f64>,
    pub grad_y: DVector<f64>,
    pub hess_xx: DMatrix<f64>,
    /// `∇²_{yx}` (m × n).
    pub hess_yx: DMatrix<f64>,
    pub hess_yy: DMatrix<f64>,
}

impl FunctionEval {
    /// `∇²_{xy}` (n × m), the transpose of `hess_yx`.
    pub fn hess_xy(&self) -> DMatrix<f64> {
        self.hess_yx.transpose()
    }
}

/// All values and exact first/second derivatives needed at a point `(x, y)`.
#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub f: FunctionEval,
    pub h: Vec<FunctionEval>,
    pub g: Vec<FunctionEval>,
    pub upper_eq: Vec<FunctionEval>,
    pub upper_ineq: Vec<FunctionEval>,
}

fn stack_rows(evals: &[FunctionEval], cols: usize, pick: impl Fn(&FunctionEval) -> &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(evals.len(), cols, |i, j| pick(&evals[i])[j])
}

impl DerivativeBundle {
    pub fn h_values(&self) -> DVector<f64> {
        DVector::from_iterator(self.h.len(), self.h.iter().map(|e| e.value))
    }
    pub fn g_values(&self) -> DVector<f64> {
        DVector::from_iterator(self.g.len(), self.g.iter().map(|e| e.value))
    }
    pub fn upper_eq_values(&self) -> DVector<f64> {
        DVector::from_iterator(self.upper_eq.len(), self.upper_eq.iter().map(|e| e.value))
    }
    pub fn upper_ineq_values(&self) -> DVector<f64> {
        DVector::from_iterator(self.upper_ineq.len(), self.upper_ineq.iter().map(|e| e.value))
    }
    /// `J_y h` (m1 × m).
    pub fn jac_y_h(&self) -> DMatrix<f64> {
        stack_rows(&self.h, self.y.len(), |e| &e.grad_y)
    }
    /// `J_x h` (m1 × n).
    pub fn jac_x_h(&self) -> DMatrix<f64> {
        stack_rows(&self.h, self.x.len(), |e| &e.grad_x)
    }
    /// `J_y g` (m2 × m).
    pub fn jac_y_g(&self) -> DMatrix<f64> {
        stack_rows(&self.g, self.y.len(), |e| &e.grad_y)
    }
    /// `J_x g` (m2 × n).
    pub fn jac_x_g(&self) -> DMatrix<f64> {
        stack_rows(&self.g, self.x.len(), |e| &e.grad_x)
    }
    /// `J H` (n1 × n).
    pub fn jac_upper_eq(&self) -> DMatrix<f64> {
        stack_rows(&self.upper_eq, self.x.len(), |e| &e.grad_x)
    }
    /// `J G` (n2 × n).
    pub fn jac_upper_ineq(&self) -> DMatrix<f64> {
        stack_rows(&self.upper_ineq, self.x.len(), |e| &e.grad_x)
    }
}

/// Evaluate every function of `spec` and its exact derivatives at `(x, y)`.
pub fn eval_bundle(spec: &ProblemSpec, x: &[f64], y: &[f64]) -> Result<DerivativeBundle> {
    spec.check_point(x, y)?;
    let d = &spec.dims;
    let ev = |list: &[Compiled]| -> Result<Vec<FunctionEval>> { list.iter().map(|c| c.eval(d, x, y)).collect() };
    Ok(DerivativeBundle {
        x: DVector::from_column_slice(x),
        y: DVector::from_column_slice(y),
        f: spec.f.eval(d, x, y)?,
        h: ev(&spec.h)?,
        g: ev(&spec.g)?,
        upper_eq: ev(&spec.upper_eq)?,
        upper_ineq: ev(&spec.upper_ineq)?,
    })
}

/// A candidate `(x*, y*)` with optional multipliers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidatePoint {
    #[serde(with = "crate::report::real_seq")]
    pub x: Vec<f64>,
    #[serde(with = "crate::report::real_seq")]
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::report::real_vec")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::report::real_vec")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::report::real_vec")]
    pub u: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::report::real_vec")]
    pub v: Option<Vec<f64>>,
}

impl CandidatePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        CandidatePoint {
            x,
            y,
            ..Default::default()
        }
    }

    /// Check dimensions against `spec` and finiteness of all entries.
    pub fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        let d = spec.dims();
        let check = |name: &str, v: Option<&Vec<f64>>, want: usize| -> Result<()> {
            if let Some(v) = v {
                if v.len() != want {
                    return Err(Error::Dimension(format!(
                        "candidate {name} has length {}, expected {want}",
                        v.len()
                    )));
                }
                if v.iter().any(|t| !t.is_finite()) {
                    return Err(Error::Dimension(format!("candidate {name} has non-finite entries")));
                }
            }
            Ok(())
        };
        check("x", Some(&self.x), d.n)?;
        check("y", Some(&self.y), d.m)?;
        check("mu", self.mu.as_ref(), d.m1)?;
        check("lambda", self.lambda.as_ref(), d.m2)?;
        check("u", self.u.as_ref(), d.n1)?;
        check("v", self.v.as_ref(), d.n2)?;
        Ok(())
    }
}
