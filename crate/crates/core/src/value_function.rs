//! The local value function `φ(x) = f(x, y(x))` on the smooth path: the
//! squared-slack sensitivity system and exact first and second derivatives.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::config::CheckConfig;
use crate::error::{Error, Result};
use crate::linalg::{condition_number, lu_factor, vstack, LuFactors};
use crate::lower_level::{solve_lower, LagrangianEval, LowerSeed, SolveMethod};
use crate::problem::{eval_bundle, DerivativeBundle, ProblemSpec};

pub use crate::lower_level::{KktSolution, PathTag};

/// Largest KKT residual accepted as a solution of the lower level.
pub const SOLUTION_TOL: f64 = 1e-8;

/// Row and column ranges of the blocks of `K`, in the order `(y, w, μ, λ)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMap {
    pub y: Range<usize>,
    pub w: Range<usize>,
    pub mu: Range<usize>,
    pub lambda: Range<usize>,
}

impl BlockMap {
    pub fn new(m: usize, m1: usize, m2: usize) -> Self {
        BlockMap {
            y: 0..m,
            w: m..m + m2,
            mu: m + m2..m + m2 + m1,
            lambda: m + m2 + m1..m + 2 * m2 + m1,
        }
    }

    pub fn order(&self) -> usize {
        self.lambda.end
    }
}

/// Symmetric `K` and the cross-derivative stack `N`.
///
/// `K = [[∇²_yy𝓛, 0, J_hᵀ, J_gᵀ], [0, −2Λ, 0, 2W], [J_h, 0, 0, 0], [J_g, 2W, 0, 0]]`
/// with `Λ = Diag(λ)` and `W = Diag(w)`; `N = [∇²_yx𝓛; 0; J_x h; J_x g]`.
#[derive(Debug, Clone)]
pub struct SensitivitySystem {
    pub k: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub blocks: BlockMap,
    pub condition: f64,
    lu: LuFactors,
}

impl SensitivitySystem {
    /// `K⁻¹ N`.
    pub fn k_inv_n(&self) -> DMatrix<f64> {
        self.lu.solve_matrix(&self.n)
    }

    pub fn min_pivot(&self) -> f64 {
        self.lu.min_pivot()
    }
}

fn require_solution(sol: &KktSolution) -> Result<()> {
    if sol.residual.is_nan() || sol.residual > SOLUTION_TOL {
        return Err(Error::Precondition(format!(
            "lower-level residual {:e} exceeds {SOLUTION_TOL:e}",
            sol.residual
        )));
    }
    Ok(())
}

fn bundle_at(spec: &ProblemSpec, sol: &KktSolution) -> Result<DerivativeBundle> {
    let d = spec.dims();
    if sol.w.len() != d.m2 || sol.mu.len() != d.m1 || sol.lambda.len() != d.m2 {
        return Err(Error::Dimension(
            "solution does not match the problem dimensions".into(),
        ));
    }
    eval_bundle(spec, sol.x.as_slice(), sol.y.as_slice())
}

pub(crate) fn k_and_n(b: &DerivativeBundle, sol: &KktSolution) -> (DMatrix<f64>, DMatrix<f64>, BlockMap) {
    let (n, m, m1, m2) = (b.x.len(), b.y.len(), b.h.len(), b.g.len());
    let blocks = BlockMap::new(m, m1, m2);
    let l = LagrangianEval::from_bundle(b, &sol.mu, &sol.lambda);
    let jh = b.jac_y_h();
    let jg = b.jac_y_g();
    let o = blocks.order();
    let mut k = DMatrix::zeros(o, o);
    k.view_mut((0, 0), (m, m)).copy_from(&l.hess_yy);
    k.view_mut((0, blocks.mu.start), (m, m1)).copy_from(&jh.transpose());
    k.view_mut((blocks.mu.start, 0), (m1, m)).copy_from(&jh);
    k.view_mut((0, blocks.lambda.start), (m, m2)).copy_from(&jg.transpose());
    k.view_mut((blocks.lambda.start, 0), (m2, m)).copy_from(&jg);
    for i in 0..m2 {
        let (wi, li) = (blocks.w.start + i, blocks.lambda.start + i);
        k[(wi, wi)] = -2.0 * sol.lambda[i];
        k[(wi, li)] = 2.0 * sol.w[i];
        k[(li, wi)] = 2.0 * sol.w[i];
    }
    let zero = DMatrix::zeros(m2, n);
    let nm = vstack(&[&l.hess_yx, &zero, &b.jac_x_h(), &b.jac_x_g()], n);
    (k, nm, blocks)
}

pub fn assemble_sensitivity_system(spec: &ProblemSpec, sol: &KktSolution) -> Result<SensitivitySystem> {
    require_solution(sol)?;
    let b = bundle_at(spec, sol)?;
    let (k, n, blocks) = k_and_n(&b, sol);
    let lu = lu_factor(&k)?;
    Ok(SensitivitySystem {
        condition: condition_number(&k),
        k,
        n,
        blocks,
        lu,
    })
}

/// `∇φ(x) = ∇_x𝓛(x; y(x), μ(x), λ(x))`.
pub fn phi_gradient(spec: &ProblemSpec, sol: &KktSolution) -> Result<DVector<f64>> {
    require_solution(sol)?;
    let b = bundle_at(spec, sol)?;
    Ok(LagrangianEval::from_bundle(&b, &sol.mu, &sol.lambda).grad_x)
}

#[derive(Debug, Clone)]
pub struct PhiHessian {
    /// Symmetrized `∇²_xx𝓛 − Nᵀ K⁻¹ N`.
    pub matrix: DMatrix<f64>,
    /// Largest asymmetry before symmetrization.
    pub asymmetry: f64,
    pub condition: f64,
}

pub fn phi_hessian(spec: &ProblemSpec, sol: &KktSolution) -> Result<PhiHessian> {
    let sys = assemble_sensitivity_system(spec, sol)?;
    let b = bundle_at(spec, sol)?;
    let l = LagrangianEval::from_bundle(&b, &sol.mu, &sol.lambda);
    Ok(hessian_from(&l.hess_xx, &sys))
}

pub(crate) fn hessian_from(hess_xx: &DMatrix<f64>, sys: &SensitivitySystem) -> PhiHessian {
    let raw = hess_xx - sys.n.transpose() * sys.k_inv_n();
    let asymmetry = (&raw - raw.transpose()).amax();
    PhiHessian {
        matrix: (&raw + raw.transpose()) * 0.5,
        asymmetry,
        condition: sys.condition,
    }
}

/// Tracks `φ` near an anchor solution by re-solving the lower level from it.
#[derive(Debug, Clone)]
pub struct ValueFunction<'a> {
    spec: &'a ProblemSpec,
    config: CheckConfig,
    anchor: KktSolution,
    method: SolveMethod,
}

impl<'a> ValueFunction<'a> {
    pub fn new(spec: &'a ProblemSpec, anchor: KktSolution, config: &CheckConfig) -> Self {
        ValueFunction {
            spec,
            config: config.clone(),
            anchor,
            method: SolveMethod::Auto,
        }
    }

    pub fn with_method(mut self, method: SolveMethod) -> Self {
        self.method = method;
        self
    }

    pub fn anchor(&self) -> &KktSolution {
        &self.anchor
    }

    pub fn solve(&self, x: &[f64]) -> Result<KktSolution> {
        let seed = LowerSeed::with_multipliers(
            self.anchor.y.iter().copied().collect(),
            self.anchor.mu.iter().copied().collect(),
            self.anchor.lambda.iter().copied().collect(),
        );
        solve_lower(self.spec, x, &seed, &self.config, self.method)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let s = self.solve(x)?;
        self.spec.objective_value(x, s.y.as_slice())
    }

    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        phi_gradient(self.spec, &self.solve(x)?)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<PhiHessian> {
        phi_hessian(self.spec, &self.solve(x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{p1, p2};
    use crate::problem::parse_problem;

    fn p1_at(x: f64) -> KktSolution {
        solve_lower(
            &p1(),
            &[x],
            &LowerSeed::new(vec![0.0]),
            &CheckConfig::default(),
            SolveMethod::Smooth,
        )
        .unwrap()
    }

    #[test]
    fn p1_system_at_origin() {
        let s = assemble_sensitivity_system(&p1(), &p1_at(0.0)).unwrap();
        let k = DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 1.0, 0.0, 0.0, 2.0, 1.0, 2.0, 0.0]);
        assert!((&s.k - k).amax() < 1e-12);
        assert_eq!(s.n, DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]));
        assert_eq!(s.blocks, BlockMap::new(1, 0, 1));
        assert!((s.k.determinant() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_dimensions_collapse() {
        let spec = parse_problem("dims 1 1 0 0 0 0\nf = -(y1 - x1)^2\n").unwrap();
        let sol = KktSolution::at_point(&spec, &[0.2], &[0.2], &[], &[], PathTag::Smooth).unwrap();
        let s = assemble_sensitivity_system(&spec, &sol).unwrap();
        assert_eq!(s.k, DMatrix::from_element(1, 1, -2.0));
        let h = phi_hessian(&spec, &sol).unwrap();
        assert!(h.matrix[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn active_blocks_follow_multipliers() {
        let sol = KktSolution::at_point(&p2(), &[0.5], &[0.0], &[], &[1.0], PathTag::Smooth).unwrap();
        let s = assemble_sensitivity_system(&p2(), &sol).unwrap();
        let b = &s.blocks;
        assert_eq!(s.k[(b.w.start, b.w.start)], -2.0);
        assert_eq!(s.k[(b.w.start, b.lambda.start)], 0.0);
    }

    #[test]
    fn p1_derivatives() {
        assert!((phi_gradient(&p1(), &p1_at(0.3)).unwrap()[0] - 0.3).abs() < 1e-12);
        assert!(phi_gradient(&p1(), &p1_at(0.0)).unwrap()[0].abs() < 1e-15);
        for x in [0.0, 0.5] {
            let h = phi_hessian(&p1(), &p1_at(x)).unwrap();
            assert!((h.matrix[(0, 0)] - 1.0).abs() < 1e-12);
            assert!(h.asymmetry < 1e-12);
        }
    }

    #[test]
    fn p2_gradient_in_interior_region() {
        let sol = solve_lower(
            &p2(),
            &[-0.5],
            &LowerSeed::new(vec![0.0]),
            &CheckConfig::default(),
            SolveMethod::Auto,
        )
        .unwrap();
        assert!(phi_gradient(&p2(), &sol).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn singular_k_is_reported() {
        // β ≠ ∅: w = 0 and λ = 0 make the slack row of K vanish.
        let sol = KktSolution::at_point(&p2(), &[0.0], &[0.0], &[], &[0.0], PathTag::Nonsmooth).unwrap();
        assert!(matches!(
            assemble_sensitivity_system(&p2(), &sol),
            Err(Error::Linalg(_))
        ));
    }

    #[test]
    fn far_from_solution_is_rejected() {
        let sol = KktSolution::at_point(&p1(), &[0.0], &[0.5], &[], &[0.0], PathTag::Smooth).unwrap();
        assert!(matches!(phi_gradient(&p1(), &sol), Err(Error::Precondition(_))));
    }

    #[test]
    fn flipping_lambda_sign_keeps_schur_term() {
        let spec = parse_problem(
            "dims 2 2 1 1 0 0\nf = x1*y1 + x2*y2 - y1^2 - 0.5*y2^2 + x1*x2*y2\nh1 = y1 + y2 - x1\ng1 = y1 - x2 - 0.1\n",
        )
        .unwrap();
        let tracker_seed = LowerSeed::new(vec![0.0, 0.0]);
        let sol = solve_lower(
            &spec,
            &[0.3, 0.2],
            &tracker_seed,
            &CheckConfig::default(),
            SolveMethod::Auto,
        )
        .unwrap();
        let s = assemble_sensitivity_system(&spec, &sol).unwrap();
        let base = s.n.transpose() * s.k_inv_n();
        let mut d = DMatrix::identity(s.k.nrows(), s.k.nrows());
        for i in s.blocks.lambda.clone() {
            d[(i, i)] = -1.0;
        }
        let k2 = &d * &s.k * &d;
        let n2 = &d * &s.n;
        let flipped = n2.transpose() * lu_factor(&k2).unwrap().solve_matrix(&n2);
        assert!((base - flipped).amax() < 1e-10);
    }

    #[test]
    fn tracker_follows_the_solution_map() {
        let spec = p1();
        let cfg = CheckConfig::default();
        let vf = ValueFunction::new(&spec, p1_at(0.0), &cfg);
        assert!((vf.value(&[0.4]).unwrap() - 0.08).abs() < 1e-12);
        assert!((vf.gradient(&[0.4]).unwrap()[0] - 0.4).abs() < 1e-12);
        assert!((vf.hessian(&[0.4]).unwrap().matrix[(0, 0)] - 1.0).abs() < 1e-10);
    }
}
