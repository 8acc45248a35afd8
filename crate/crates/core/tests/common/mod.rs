//! Generators and reference candidates shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use lmcert_core::fixtures::{p1, p2, p3, p4};
use lmcert_core::problem::{parse_expr, Expr, Scope, Var};
use lmcert_core::{parse_problem, CandidatePoint, ProblemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The reference candidates of the shipped fixtures.
pub fn fixture_candidates() -> Vec<(&'static str, ProblemSpec, CandidatePoint)> {
    vec![
        ("P1", p1(), CandidatePoint::new(vec![0.0], vec![0.0])),
        ("P2", p2(), CandidatePoint::new(vec![0.0], vec![0.0])),
        ("P3", p3(), CandidatePoint::new(vec![0.0], vec![0.0])),
        ("P4", p4(), CandidatePoint::new(vec![1.0], vec![1.0])),
    ]
}

/// A random polynomial of total degree at most 4 in `nx + ny <= 3`
/// variables, returned as source text and parsed expression.
pub struct RandomPolynomial {
    pub text: String,
    pub expr: Expr,
    pub nx: usize,
    pub ny: usize,
}

fn var_name(k: usize, nx: usize) -> String {
    if k < nx {
        format!("x{}", k + 1)
    } else {
        format!("y{}", k - nx + 1)
    }
}

pub fn random_polynomial(rng: &mut ChaCha8Rng) -> RandomPolynomial {
    let k = rng.random_range(1..=3usize);
    let nx = rng.random_range(0..=k);
    let ny = k - nx;
    let terms = rng.random_range(1..=5usize);
    let mut parts = Vec::with_capacity(terms);
    for _ in 0..terms {
        let coef = (rng.random_range(-3.0..3.0f64) * 1000.0).round() / 1000.0;
        let mut budget = rng.random_range(0..=4usize);
        let mut factors = vec![format!("({coef})")];
        for v in 0..k {
            if budget == 0 {
                break;
            }
            let e = rng.random_range(0..=budget);
            budget -= e;
            match e {
                0 => {}
                1 => factors.push(var_name(v, nx)),
                _ => factors.push(format!("{}^{e}", var_name(v, nx))),
            }
        }
        parts.push(factors.join("*"));
    }
    let text = parts.join(" + ");
    let expr = parse_expr(
        &text,
        Scope {
            n: nx,
            m: ny,
            allow_y: true,
        },
    )
    .expect("generated polynomial parses");
    RandomPolynomial { text, expr, nx, ny }
}

/// `|a − b| / max(1, |a|, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Largest relative error between the symbolic gradient and central
/// differences with step `h`.
pub fn gradient_check(p: &RandomPolynomial, x: &[f64], y: &[f64], h: f64) -> f64 {
    let vars: Vec<Var> = (0..p.nx).map(Var::X).chain((0..p.ny).map(Var::Y)).collect();
    let mut worst = 0.0f64;
    for (k, &v) in vars.iter().enumerate() {
        let sym = p.expr.differentiate(v).eval(x, y).unwrap();
        let shift = |s: f64| {
            let (mut xs, mut ys) = (x.to_vec(), y.to_vec());
            if k < p.nx {
                xs[k] += s;
            } else {
                ys[k - p.nx] += s;
            }
            p.expr.eval(&xs, &ys).unwrap()
        };
        let fd = (shift(h) - shift(-h)) / (2.0 * h);
        worst = worst.max(rel_err(sym, fd));
    }
    worst
}

/// A smooth random instance with a known strictly complementary lower
/// solution at `(x0, y0, λ0)`.
pub struct QuadraticInstance {
    pub spec: ProblemSpec,
    pub text: String,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub lambda0: Vec<f64>,
}

fn lit(v: f64) -> String {
    format!("({v:e})")
}

/// `f = ½yᵀQy + yᵀBx + ½xᵀPx + cᵀy` with `Q` negative definite and affine
/// `g`; `c` and the offsets of `g` are chosen so that KKT holds at the
/// sampled point with multipliers in `[0.5, 2]` or slacks in `[0.5, 2]`.
pub fn random_quadratic_instance(rng: &mut ChaCha8Rng) -> QuadraticInstance {
    let n = rng.random_range(1..=3usize);
    let m = rng.random_range(1..=3usize);
    let m2 = rng.random_range(0..=2usize);
    let mut u = |a: f64, b: f64| rng.random_range(a..b);
    let l: Vec<Vec<f64>> = (0..m).map(|_| (0..m).map(|_| u(-1.0, 1.0)).collect()).collect();
    let q: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| -(0..m).map(|k| l[i][k] * l[j][k]).sum::<f64>() - if i == j { 0.5 } else { 0.0 })
                .collect()
        })
        .collect();
    let b: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| u(-1.0, 1.0)).collect()).collect();
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = u(-1.0, 1.0);
            p[i][j] = v;
            p[j][i] = v;
        }
    }
    let x0: Vec<f64> = (0..n).map(|_| u(-1.0, 1.0)).collect();
    let y0: Vec<f64> = (0..m).map(|_| u(-1.0, 1.0)).collect();
    let a: Vec<Vec<f64>> = (0..m2).map(|_| (0..m).map(|_| u(-1.0, 1.0)).collect()).collect();
    let d: Vec<Vec<f64>> = (0..m2).map(|_| (0..n).map(|_| u(-1.0, 1.0)).collect()).collect();
    let mut lambda0 = vec![0.0; m2];
    let mut offsets = vec![0.0; m2];
    let mut n_active = 0;
    for i in 0..m2 {
        let base: f64 = (0..m).map(|j| a[i][j] * y0[j]).sum::<f64>() + (0..n).map(|k| d[i][k] * x0[k]).sum::<f64>();
        let active = n_active < m && u(0.0, 1.0) < 0.5;
        if active {
            n_active += 1;
            lambda0[i] = u(0.5, 2.0);
            offsets[i] = base;
        } else {
            offsets[i] = base + u(0.5, 2.0);
        }
    }
    // Stationarity: Q y0 + B x0 + c = Σ λ_i a_i.
    let c: Vec<f64> = (0..m)
        .map(|j| {
            (0..m2).map(|i| lambda0[i] * a[i][j]).sum::<f64>()
                - (0..m).map(|k| q[j][k] * y0[k]).sum::<f64>()
                - (0..n).map(|k| b[j][k] * x0[k]).sum::<f64>()
        })
        .collect();

    let mut f = Vec::new();
    for j in 0..m {
        for k in 0..m {
            f.push(format!("{}*y{}*y{}", lit(0.5 * q[j][k]), j + 1, k + 1));
        }
        for k in 0..n {
            f.push(format!("{}*y{}*x{}", lit(b[j][k]), j + 1, k + 1));
        }
        f.push(format!("{}*y{}", lit(c[j]), j + 1));
    }
    for j in 0..n {
        for k in 0..n {
            f.push(format!("{}*x{}*x{}", lit(0.5 * p[j][k]), j + 1, k + 1));
        }
    }
    let mut text = format!("dims {n} {m} 0 {m2} 0 0\nf = {}\n", f.join(" + "));
    for i in 0..m2 {
        let mut terms: Vec<String> = (0..m).map(|j| format!("{}*y{}", lit(a[i][j]), j + 1)).collect();
        terms.extend((0..n).map(|k| format!("{}*x{}", lit(d[i][k]), k + 1)));
        terms.push(lit(-offsets[i]));
        text.push_str(&format!("g{} = {}\n", i + 1, terms.join(" + ")));
    }
    let spec = parse_problem(&text).expect("generated instance parses");
    QuadraticInstance {
        spec,
        text,
        x0,
        y0,
        lambda0,
    }
}
