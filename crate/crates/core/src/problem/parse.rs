//! Parser for the line-oriented problem-file format.
//!
//! ```text
//! # comment
//! dims n m m1 m2 n1 n2
//! f  = <expr>
//! h1 = <expr>      # lower equality,   h_k(x, y) = 0
//! g1 = <expr>      # lower inequality, g_k(x, y) <= 0
//! H1 = <expr>      # upper equality,   H_k(x) = 0
//! G1 = <expr>      # upper inequality, G_k(x) <= 0
//! ```
//!
//! Expressions use `+ - * / ^`, parentheses, `sin cos exp log sqrt abs`,
//! variables `x1..xn`, `y1..ym` and decimal literals. `^` binds tighter than
//! unary minus and is right associative.

use thiserror::Error;

use super::expr::{Expr, Func, Var};
use super::{Dims, ProblemSpec};

#[derive(Debug, Clone, Error, PartialEq)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("y-variable `{0}` appears in an upper-level constraint")]
    YInUpper(String),
}

impl ParseError {
    fn syntax(line: usize, column: usize, msg: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            kind: ParseErrorKind::Syntax(msg.into()),
        }
    }

    fn dimension(line: usize, column: usize, msg: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            kind: ParseErrorKind::Dimension(msg.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col_offset: usize,
}

fn tokenize(text: &str, line: usize, col_offset: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut lx = Lexer {
        src: text.as_bytes(),
        pos: 0,
        line,
        col_offset,
    };
    let mut out = Vec::new();
    while let Some(t) = lx.next_token()? {
        out.push(t);
    }
    Ok(out)
}

impl Lexer<'_> {
    fn column(&self, pos: usize) -> usize {
        self.col_offset + pos + 1
    }

    fn next_token(&mut self) -> Result<Option<(Tok, usize)>, ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let Some(&c) = self.src.get(self.pos) else {
            return Ok(None);
        };
        let start = self.pos;
        let col = self.column(start);
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' | b'=' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => {
                self.eat_digits();
                if self.peek() == Some(b'.') {
                    self.pos += 1;
                    self.eat_digits();
                }
                if matches!(self.peek(), Some(b'e' | b'E')) {
                    let save = self.pos;
                    self.pos += 1;
                    if matches!(self.peek(), Some(b'+' | b'-')) {
                        self.pos += 1;
                    }
                    let before = self.pos;
                    self.eat_digits();
                    if before == self.pos {
                        self.pos = save;
                    }
                }
                let lit = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let v: f64 = lit
                    .parse()
                    .map_err(|_| ParseError::syntax(self.line, col, format!("invalid number `{lit}`")))?;
                Tok::Num(v)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                Tok::Ident(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
            }
            _ => {
                let ch = std::str::from_utf8(&self.src[start..])
                    .ok()
                    .and_then(|s| s.chars().next())
                    .unwrap_or('?');
                return Err(ParseError::syntax(
                    self.line,
                    col,
                    format!("unexpected character `{ch}`"),
                ));
            }
        };
        Ok(Some((tok, col)))
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat_digits(&mut self) {
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
    }
}

/// Variable scope for one expression.
#[derive(Debug, Clone, Copy)]
pub struct Scope {
    pub n: usize,
    pub m: usize,
    pub allow_y: bool,
}

struct ExprParser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
    scope: Scope,
}

impl ExprParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::syntax(self.line, self.col(), msg)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(Tok::LParen) = self.peek() {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| ParseError::syntax(self.line, col, format!("unknown function `{name}`")))?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Func(func, Box::new(arg)));
                }
                self.variable(&name, col).map(Expr::Var)
            }
            Some(other) => Err(self.err(format!("unexpected token {other:?}"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn variable(&self, name: &str, col: usize) -> Result<Var, ParseError> {
        let (kind, digits) = name.split_at(1);
        let index: usize = match digits.parse() {
            Ok(i) if i >= 1 && !digits.starts_with('0') => i,
            _ => {
                return Err(ParseError::syntax(
                    self.line,
                    col,
                    format!("unknown identifier `{name}`"),
                ))
            }
        };
        match kind {
            "x" if index <= self.scope.n => Ok(Var::X(index - 1)),
            "x" => Err(ParseError::dimension(
                self.line,
                col,
                format!("`{name}` exceeds n = {}", self.scope.n),
            )),
            "y" if !self.scope.allow_y => Err(ParseError {
                line: self.line,
                column: col,
                kind: ParseErrorKind::YInUpper(name.to_string()),
            }),
            "y" if index <= self.scope.m => Ok(Var::Y(index - 1)),
            "y" => Err(ParseError::dimension(
                self.line,
                col,
                format!("`{name}` exceeds m = {}", self.scope.m),
            )),
            _ => Err(ParseError::syntax(
                self.line,
                col,
                format!("unknown identifier `{name}`"),
            )),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err("expected `)`")),
        }
    }
}

fn parse_expr_tokens(text: &str, line: usize, col_offset: usize, scope: Scope) -> Result<Expr, ParseError> {
    let toks = tokenize(text, line, col_offset)?;
    let mut p = ExprParser {
        toks,
        pos: 0,
        line,
        end_col: col_offset + text.len() + 1,
        scope,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input after expression"));
    }
    Ok(e)
}

/// Parse a single expression (reported as line 1).
pub fn parse_expr(text: &str, scope: Scope) -> Result<Expr, ParseError> {
    parse_expr_tokens(text, 1, 0, scope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    F,
    LowerEq(usize),
    LowerIneq(usize),
    UpperEq(usize),
    UpperIneq(usize),
}

fn parse_target(name: &str, dims: &Dims) -> Option<Result<Target, String>> {
    if name == "f" {
        return Some(Ok(Target::F));
    }
    let (head, digits) = name.split_at(1.min(name.len()));
    let k: usize = digits.parse().ok().filter(|&k| k >= 1)?;
    let (target, limit, label) = match head {
        "h" => (Target::LowerEq(k - 1), dims.m1, "m1"),
        "g" => (Target::LowerIneq(k - 1), dims.m2, "m2"),
        "H" => (Target::UpperEq(k - 1), dims.n1, "n1"),
        "G" => (Target::UpperIneq(k - 1), dims.n2, "n2"),
        _ => return None,
    };
    if k > limit {
        return Some(Err(format!("`{name}` exceeds {label} = {limit}")));
    }
    Some(Ok(target))
}

/// Parse a full problem file into a validated [`ProblemSpec`].
pub fn parse_problem(text: &str) -> Result<ProblemSpec, ParseError> {
    let mut dims: Option<(Dims, usize)> = None;
    let mut f: Option<Expr> = None;
    let mut slots: [Vec<Option<Expr>>; 4] = Default::default();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        let content = line.trim();

        let Some((d, _)) = dims.as_ref() else {
            let mut words = content.split_whitespace();
            if words.next() != Some("dims") {
                return Err(ParseError::syntax(
                    line_no,
                    indent + 1,
                    "first line must be `dims n m m1 m2 n1 n2`",
                ));
            }
            let nums: Result<Vec<usize>, _> = words.map(str::parse::<usize>).collect();
            let nums =
                nums.map_err(|_| ParseError::syntax(line_no, indent + 1, "dims expects six nonnegative integers"))?;
            if nums.len() != 6 {
                return Err(ParseError::syntax(
                    line_no,
                    indent + 1,
                    format!("dims expects six integers, found {}", nums.len()),
                ));
            }
            let d = Dims {
                n: nums[0],
                m: nums[1],
                m1: nums[2],
                m2: nums[3],
                n1: nums[4],
                n2: nums[5],
            };
            slots = [vec![None; d.m1], vec![None; d.m2], vec![None; d.n1], vec![None; d.n2]];
            dims = Some((d, line_no));
            continue;
        };
        let d = *d;

        let Some(eq) = content.find('=') else {
            return Err(ParseError::syntax(
                line_no,
                indent + 1,
                "expected an assignment `name = expression`",
            ));
        };
        let name = content[..eq].trim();
        let target = match parse_target(name, &d) {
            Some(Ok(t)) => t,
            Some(Err(msg)) => return Err(ParseError::dimension(line_no, indent + 1, msg)),
            None => {
                return Err(ParseError::syntax(
                    line_no,
                    indent + 1,
                    format!("unknown assignment target `{name}`"),
                ))
            }
        };
        let allow_y = !matches!(target, Target::UpperEq(_) | Target::UpperIneq(_));
        let scope = Scope {
            n: d.n,
            m: d.m,
            allow_y,
        };
        let rhs = &content[eq + 1..];
        let expr = parse_expr_tokens(rhs, line_no, indent + eq + 1, scope)?;

        let slot = match target {
            Target::F => &mut f,
            Target::LowerEq(k) => &mut slots[0][k],
            Target::LowerIneq(k) => &mut slots[1][k],
            Target::UpperEq(k) => &mut slots[2][k],
            Target::UpperIneq(k) => &mut slots[3][k],
        };
        if slot.is_some() {
            return Err(ParseError::syntax(
                line_no,
                indent + 1,
                format!("duplicate assignment to `{name}`"),
            ));
        }
        *slot = Some(expr);
    }

    let Some((dims, _)) = dims else {
        return Err(ParseError::syntax(last_line.max(1), 1, "missing `dims` line"));
    };
    let end = last_line + 1;
    let f = f.ok_or_else(|| ParseError::dimension(end, 1, "missing objective `f`"))?;
    let [h, g, upper_eq, upper_ineq] = slots;
    let collect = |v: Vec<Option<Expr>>, prefix: &str| -> Result<Vec<Expr>, ParseError> {
        v.into_iter()
            .enumerate()
            .map(|(k, e)| {
                e.ok_or_else(|| ParseError::dimension(end, 1, format!("missing assignment `{prefix}{}`", k + 1)))
            })
            .collect()
    };
    let h = collect(h, "h")?;
    let g = collect(g, "g")?;
    let upper_eq = collect(upper_eq, "H")?;
    let upper_ineq = collect(upper_ineq, "G")?;
    ProblemSpec::new(dims, f, h, g, upper_eq, upper_ineq).map_err(|e| ParseError::dimension(end, 1, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const P1: &str = "dims 1 1 0 1 0 1\nf = x1*y1 - 0.5*y1^2\ng1 = y1 - 1\nG1 = x1 - 2\n";

    #[test]
    fn parses_reference_fixture() {
        let spec = parse_problem(P1).unwrap();
        assert_eq!(spec.dims().n, 1);
        assert_eq!(spec.lower_ineq().len(), 1);
        assert_eq!(spec.objective().eval(&[1.0], &[1.0]).unwrap(), 0.5);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let spec = parse_problem("dims 1 1 0 1 0 0\nf = -(y1-x1)^2\ng1 = y1\n").unwrap();
        assert_eq!(spec.objective().eval(&[0.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(spec.objective().eval(&[0.0], &[2.0]).unwrap(), -4.0);
    }

    #[test]
    fn rejects_y_in_upper_constraint() {
        let err = parse_problem("dims 1 1 0 0 0 1\nf = x1\nG1 = y1\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert_eq!(err.column, 6);
        assert!(matches!(err.kind, ParseErrorKind::YInUpper(_)));
    }

    #[test]
    fn reports_syntax_position() {
        let err = parse_problem("dims 1 1 0 0 0 0\nf = x1 * * y1\n").unwrap_err();
        assert_eq!((err.line, err.column), (2, 10));
    }

    #[test]
    fn missing_and_out_of_range_assignments() {
        let err = parse_problem("dims 1 1 0 2 0 0\nf = x1\ng1 = y1\n").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Dimension(_)));
        let err = parse_problem("dims 1 1 0 1 0 0\nf = x1\ng2 = y1\n").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Dimension(_)));
        let err = parse_problem("dims 1 1 0 0 0 0\nf = x2\n").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Dimension(_)));
    }

    #[test]
    fn comments_and_scientific_literals() {
        let spec = parse_problem("# header\ndims 1 0 0 0 0 0 # trailing\n\nf = 1e-3*x1 + 2.5E+1\n").unwrap();
        assert_eq!(spec.objective().eval(&[1.0], &[]).unwrap(), 25.001);
    }
}
