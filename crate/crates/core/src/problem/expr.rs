//! Scalar expression trees with exact symbolic differentiation.

use std::fmt;

use thiserror::Error;

/// A decision variable: `X(i)` is `x_{i+1}`, `Y(j)` is `y_{j+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X(usize),
    Y(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::Y(j) => write!(f, "y{}", j + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    /// Derivative of `abs`; only produced by differentiation.
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// Closed-form scalar expression over `x` and `y` variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("{op} outside its domain in `{expr}`")]
    Domain { op: &'static str, expr: String },
    #[error("abs is not differentiable at 0 in `{expr}`")]
    NonDifferentiable { expr: String },
    #[error("variable {var} is out of range for the evaluation point")]
    VarOutOfRange { var: Var },
    #[error("non-finite value in `{expr}`")]
    NonFinite { expr: String },
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_const(&self, v: f64) -> bool {
        self.as_const() == Some(v)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(p), Some(q)) => Expr::Const(p + q),
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(p), Some(q)) => Expr::Const(p - q),
            (_, Some(0.0)) => a,
            (Some(0.0), _) => Expr::neg(b),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_const(0.0) || b.is_const(0.0) {
            return Expr::Const(0.0);
        }
        match (a.as_const(), b.as_const()) {
            (Some(p), Some(q)) => Expr::Const(p * q),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            (Some(-1.0), _) => Expr::neg(b),
            (_, Some(-1.0)) => Expr::neg(a),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(p), Some(q)) if q != 0.0 => Expr::Const(p / q),
            (_, Some(1.0)) => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        match (base.as_const(), exponent.as_const()) {
            (_, Some(0.0)) => Expr::Const(1.0),
            (_, Some(1.0)) => base,
            (Some(b), Some(e)) => {
                let v = pow_value(b, e);
                if v.is_finite() {
                    Expr::Const(v)
                } else {
                    Expr::Pow(Box::new(base), Box::new(exponent))
                }
            }
            _ => Expr::Pow(Box::new(base), Box::new(exponent)),
        }
    }

    pub fn func(f: Func, a: Expr) -> Expr {
        Expr::Func(f, Box::new(a))
    }

    /// Visit every variable occurring in the tree.
    pub fn for_each_var(&self, visit: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => visit(*v),
            Expr::Neg(a) | Expr::Func(_, a) => a.for_each_var(visit),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.for_each_var(visit);
                b.for_each_var(visit);
            }
        }
    }

    pub fn uses_y(&self) -> bool {
        let mut found = false;
        self.for_each_var(&mut |v| found |= matches!(v, Var::Y(_)));
        found
    }

    pub fn contains_func(&self, target: Func) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Func(f, a) => *f == target || a.contains_func(target),
            Expr::Neg(a) => a.contains_func(target),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.contains_func(target) || b.contains_func(target)
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Func(_, a) => 1 + a.node_count(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }

    /// Evaluate at `(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(var) => match *var {
                Var::X(i) => *x.get(i).ok_or(EvalError::VarOutOfRange { var: *var })?,
                Var::Y(j) => *y.get(j).ok_or(EvalError::VarOutOfRange { var: *var })?,
            },
            Expr::Neg(a) => -a.eval(x, y)?,
            Expr::Add(a, b) => a.eval(x, y)? + b.eval(x, y)?,
            Expr::Sub(a, b) => a.eval(x, y)? - b.eval(x, y)?,
            Expr::Mul(a, b) => a.eval(x, y)? * b.eval(x, y)?,
            Expr::Div(a, b) => {
                let den = b.eval(x, y)?;
                if den == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                a.eval(x, y)? / den
            }
            Expr::Pow(a, b) => {
                let base = a.eval(x, y)?;
                let exp = b.eval(x, y)?;
                if base < 0.0 && exp.fract() != 0.0 {
                    return Err(self.domain("fractional power of a negative base"));
                }
                if base == 0.0 && exp < 0.0 {
                    return Err(self.domain("negative power of zero"));
                }
                pow_value(base, exp)
            }
            Expr::Func(f, a) => {
                let u = a.eval(x, y)?;
                match f {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= 0.0 {
                            return Err(self.domain("log of a nonpositive value"));
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(self.domain("sqrt of a negative value"));
                        }
                        u.sqrt()
                    }
                    Func::Abs => u.abs(),
                    Func::Sign => {
                        if u == 0.0 {
                            return Err(EvalError::NonDifferentiable { expr: self.to_string() });
                        }
                        u.signum()
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(EvalError::NonFinite { expr: self.to_string() });
        }
        Ok(v)
    }

    fn domain(&self, op: &'static str) -> EvalError {
        EvalError::Domain {
            op,
            expr: self.to_string(),
        }
    }

    /// Exact partial derivative with respect to `var`, simplified by constant folding.
    pub fn differentiate(&self, var: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.differentiate(var)),
            Expr::Add(a, b) => Expr::add(a.differentiate(var), b.differentiate(var)),
            Expr::Sub(a, b) => Expr::sub(a.differentiate(var), b.differentiate(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.differentiate(var), (**b).clone()),
                Expr::mul((**a).clone(), b.differentiate(var)),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = Expr::sub(
                    Expr::mul(a.differentiate(var), (**b).clone()),
                    Expr::mul((**a).clone(), b.differentiate(var)),
                );
                Expr::div(num, Expr::pow((**b).clone(), Expr::Const(2.0)))
            }
            Expr::Pow(a, b) => {
                let da = a.differentiate(var);
                if let Some(c) = b.as_const() {
                    Expr::mul(
                        Expr::mul(Expr::Const(c), Expr::pow((**a).clone(), Expr::Const(c - 1.0))),
                        da,
                    )
                } else {
                    // a^b * (b' ln a + b a'/a)
                    let db = b.differentiate(var);
                    let inner = Expr::add(
                        Expr::mul(db, Expr::func(Func::Log, (**a).clone())),
                        Expr::div(Expr::mul((**b).clone(), da), (**a).clone()),
                    );
                    Expr::mul(self.clone(), inner)
                }
            }
            Expr::Func(f, a) => {
                let da = a.differentiate(var);
                if da.is_const(0.0) {
                    return Expr::Const(0.0);
                }
                let u = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::func(Func::Cos, u),
                    Func::Cos => Expr::neg(Expr::func(Func::Sin, u)),
                    Func::Exp => Expr::func(Func::Exp, u),
                    Func::Log => Expr::div(Expr::Const(1.0), u),
                    Func::Sqrt => Expr::div(Expr::Const(0.5), Expr::func(Func::Sqrt, u)),
                    Func::Abs => Expr::func(Func::Sign, u),
                    Func::Sign => return Expr::Const(0.0),
                };
                Expr::mul(outer, da)
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            Expr::Const(_) | Expr::Var(_) | Expr::Func(..) => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

fn pow_value(base: f64, exp: f64) -> f64 {
    if exp.fract() == 0.0 && exp.abs() <= 64.0 {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    }
}

/// Precedence-aware printing; the output re-parses to an identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_child(f, 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " {} ", if matches!(self, Expr::Add(..)) { '+' } else { '-' })?;
                b.fmt_child(f, 2)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, " {} ", if matches!(self, Expr::Mul(..)) { '*' } else { '/' })?;
                b.fmt_child(f, 3)
            }
            Expr::Pow(a, b) => {
                a.fmt_child(f, 5)?;
                write!(f, "^")?;
                b.fmt_child(f, 3)
            }
            Expr::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::var(Var::X(i))
    }
    fn y(j: usize) -> Expr {
        Expr::var(Var::Y(j))
    }

    #[test]
    fn polynomial_rule() {
        // x1*y1 - 0.5*y1^2
        let e = Expr::sub(
            Expr::mul(x(0), y(0)),
            Expr::mul(Expr::constant(0.5), Expr::pow(y(0), Expr::constant(2.0))),
        );
        let d = e.differentiate(Var::Y(0));
        for &(a, b) in &[(0.0, 0.0), (1.0, 2.0), (-0.3, 0.7)] {
            assert!((d.eval(&[a], &[b]).unwrap() - (a - b)).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_rule() {
        assert_eq!(Expr::constant(3.0).differentiate(Var::X(0)), Expr::Const(0.0));
    }

    #[test]
    fn exp_chain_rule_matches_central_difference() {
        let e = Expr::func(Func::Exp, Expr::mul(x(0), y(0)));
        let d = e.differentiate(Var::X(0)).eval(&[1.0], &[2.0]).unwrap();
        let h = 1e-6;
        let fd = (e.eval(&[1.0 + h], &[2.0]).unwrap() - e.eval(&[1.0 - h], &[2.0]).unwrap()) / (2.0 * h);
        assert!((d - fd).abs() / fd.abs() < 1e-8);
        assert!((d - 2.0 * 2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn domain_errors_name_the_expression() {
        let e = Expr::func(Func::Log, x(0));
        match e.eval(&[0.0], &[]) {
            Err(EvalError::Domain { expr, .. }) => assert_eq!(expr, "log(x1)"),
            other => panic!("unexpected {other:?}"),
        }
        let d = Expr::div(Expr::constant(1.0), x(0));
        assert!(matches!(d.eval(&[0.0], &[]), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn abs_derivative_flags_zero() {
        let e = Expr::func(Func::Abs, x(0));
        let d = e.differentiate(Var::X(0));
        assert_eq!(d.eval(&[-2.0], &[]).unwrap(), -1.0);
        assert!(matches!(d.eval(&[0.0], &[]), Err(EvalError::NonDifferentiable { .. })));
    }

    #[test]
    fn variable_power_rule() {
        // x1^y1 at (2, 3): d/dy = 8 ln 2
        let e = Expr::pow(x(0), y(0));
        let d = e.differentiate(Var::Y(0)).eval(&[2.0], &[3.0]).unwrap();
        assert!((d - 8.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn display_is_precedence_aware() {
        let e = Expr::neg(Expr::pow(Expr::sub(y(0), x(0)), Expr::constant(2.0)));
        assert_eq!(e.to_string(), "-(y1 - x1)^2.0");
        let e = Expr::sub(x(0), Expr::sub(y(0), x(0)));
        assert_eq!(e.to_string(), "x1 - (y1 - x1)");
    }
}
