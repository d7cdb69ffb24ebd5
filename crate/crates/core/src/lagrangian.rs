//! Second-order Lagrangians, their metric tensor and Cartan–Poincaré forms.

use std::fmt;

use crate::bundle::{apply_jstar, CotangentVecT2M, Jet2Point, TangentVecT2M};
use crate::calculus::ScalarField;
use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::jet::TaylorJet;
use crate::linalg::Mat;
use crate::scalar::{Real, Scalar};
use crate::semi_riemannian::SemiRiemannianSpec;

/// Default lower bound on the reciprocal condition number of `g`.
pub const DEFAULT_REGULARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum LagrangianKind {
    Expression(Expr),
    /// `L₂ = g_ij z⁽²⁾ⁱ z⁽²⁾ʲ` built from a base metric.
    SemiRiemannian(SemiRiemannianSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianSpec {
    name: String,
    n: usize,
    kind: LagrangianKind,
}

impl LagrangianSpec {
    pub fn expression(src: &str, n: usize) -> Result<Self> {
        Ok(Self::from_expr(src.trim(), parse_expression(src, n)?, n))
    }

    pub fn from_expr(name: impl Into<String>, expr: Expr, n: usize) -> Self {
        LagrangianSpec { name: name.into(), n, kind: LagrangianKind::Expression(expr) }
    }

    pub fn semi_riemannian(spec: SemiRiemannianSpec) -> Self {
        LagrangianSpec { name: spec.name().to_string(), n: spec.dim(), kind: LagrangianKind::SemiRiemannian(spec) }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &LagrangianKind {
        &self.kind
    }

    pub fn as_semi_riemannian(&self) -> Option<&SemiRiemannianSpec> {
        match &self.kind {
            LagrangianKind::SemiRiemannian(s) => Some(s),
            LagrangianKind::Expression(_) => None,
        }
    }
}

impl ScalarField for LagrangianSpec {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval<S: Scalar>(&self, z: &[S]) -> Result<S> {
        if z.len() != 3 * self.n {
            return Err(Error::Dimension { expected: 3 * self.n, found: z.len() });
        }
        match &self.kind {
            LagrangianKind::Expression(e) => e.eval(z),
            LagrangianKind::SemiRiemannian(s) => s.l2(z),
        }
    }
}

impl fmt::Display for LagrangianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LagrangianKind::Expression(e) => write!(f, "{e}"),
            LagrangianKind::SemiRiemannian(s) => write!(f, "L2[{}]", s.name()),
        }
    }
}

/// Metric tensor at a point, with its inverse when regular.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric<T> {
    pub g: Mat<T>,
    pub inverse: Option<Mat<T>>,
    /// Reciprocal 1-norm condition number of `g`.
    pub rcond: T,
}

fn check_dim<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<()> {
    if l.dim() != p.dim() {
        return Err(Error::Dimension { expected: l.dim(), found: p.dim() });
    }
    Ok(())
}

fn jets_at<T: Real>(p: &Jet2Point<T>, order: usize) -> Vec<TaylorJet<T>> {
    let all: Vec<usize> = (0..3 * p.dim()).collect();
    TaylorJet::seed(&p.flat(), &all, order)
}

/// `g_ij = ½ ∂²L/∂y2ⁱ∂y2ʲ`, symmetrized.
pub fn metric_tensor<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<Mat<T>> {
    check_dim(l, p)?;
    let n = p.dim();
    let seeded: Vec<usize> = (2 * n..3 * n).collect();
    let jets = TaylorJet::seed(&p.flat(), &seeded, 2);
    let v = l.eval(&jets)?;
    let half = T::lit(0.5);
    let g = Mat::from_fn(n, n, |i, j| {
        let mut e = vec![0u8; n];
        e[i] += 1;
        e[j] += 1;
        half * v.partial(&e).expect("order 2")
    });
    Ok(g.symmetrize())
}

/// Metric with inverse, or `DegenerateLagrangian` when the reciprocal
/// condition number is not above `tol`.
pub fn check_regularity<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>, tol: f64) -> Result<Metric<T>> {
    let g = metric_tensor(l, p)?;
    regular_metric(g, tol)
}

pub(crate) fn regular_metric<T: Real>(g: Mat<T>, tol: f64) -> Result<Metric<T>> {
    let (rcond, inverse) = g.rcond_with_inverse();
    if !(rcond.to_f64_lossy() > tol) || inverse.is_none() {
        return Err(Error::DegenerateLagrangian { rcond: rcond.to_f64_lossy(), tolerance: tol });
    }
    Ok(Metric { g, inverse, rcond })
}

/// `dL` as a covector.
pub fn differential<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<CotangentVecT2M<T>> {
    check_dim(l, p)?;
    let v = l.eval(&jets_at(p, 1))?;
    let comps: Vec<T> = (0..3 * p.dim()).map(|k| v.gradient_entry(k)).collect();
    CotangentVecT2M::from_flat(p.clone(), &comps)
}

/// `θ¹ = J*(dL) = ∂L/∂y1ⁱ dxⁱ + ∂L/∂y2ⁱ dy1ⁱ`.
pub fn theta1<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<CotangentVecT2M<T>> {
    Ok(apply_jstar(&differential(l, p)?))
}

/// `θ² = (J*)²(dL) = ∂L/∂y2ⁱ dxⁱ`.
pub fn theta2<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<CotangentVecT2M<T>> {
    Ok(apply_jstar(&apply_jstar(&differential(l, p)?)))
}

/// A two-form at a point: skew matrix `W` with `ω(u, v) = uᵀ W v`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoForm<T> {
    pub w: Mat<T>,
}

impl<T: Real> TwoForm<T> {
    pub fn eval(&self, u: &TangentVecT2M<T>, v: &TangentVecT2M<T>) -> T {
        self.eval_flat(&u.flat(), &v.flat())
    }

    pub fn eval_flat(&self, u: &[T], v: &[T]) -> T {
        let wv = self.w.matvec(v);
        u.iter().zip(wv).map(|(&a, b)| a * b).fold(T::zero(), |s, t| s + t)
    }

    /// Interior product `(i_u ω)_ν = u^μ W_μν`.
    pub fn contract(&self, u: &[T]) -> Vec<T> {
        self.w.transpose().matvec(u)
    }

    pub fn skew_defect(&self) -> T {
        self.w.add(&self.w.transpose()).norm_inf()
    }

    /// Components in another frame: `Fᵀ W F` for frame vectors as columns.
    pub fn in_frame(&self, frame: &Mat<T>) -> Mat<T> {
        frame.transpose().matmul(&self.w).matmul(frame)
    }
}

/// Exterior derivative of a one-form given by jet components:
/// `W_μν = ∂_μ θ_ν − ∂_ν θ_μ`, as jets one order lower.
pub fn curl<T: Real>(theta: &[TaylorJet<T>]) -> Mat<TaylorJet<T>> {
    let m = theta.len();
    let d: Vec<Vec<TaylorJet<T>>> = theta.iter().map(|t| (0..m).map(|mu| t.derivative(mu)).collect()).collect();
    Mat::from_fn(m, m, |mu, nu| &d[nu][mu] - &d[mu][nu])
}

fn form_jets<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>, power: usize) -> Result<Vec<TaylorJet<T>>> {
    check_dim(l, p)?;
    let n = p.dim();
    let v = l.eval(&jets_at(p, 2))?;
    let mut comps: Vec<TaylorJet<T>> = (0..3 * n).map(|k| v.derivative(k)).collect();
    for _ in 0..power {
        comps.drain(..n);
        comps.extend((0..n).map(|_| TaylorJet::constant(T::zero())));
    }
    Ok(comps)
}

/// `ω² = dθ²`.
pub fn omega2<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<TwoForm<T>> {
    Ok(TwoForm { w: curl(&form_jets(l, p, 2)?).map(|e| e.value()) })
}

/// `ω¹ = dθ¹`.
pub fn omega1<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<TwoForm<T>> {
    Ok(TwoForm { w: curl(&form_jets(l, p, 1)?).map(|e| e.value()) })
}

/// The expanded block formula `ω² = ∂²L/∂xʲ∂y2ⁱ dxʲ∧dxⁱ +
/// ∂²L/∂y1ʲ∂y2ⁱ dy1ʲ∧dxⁱ + ∂²L/∂y2ʲ∂y2ⁱ dy2ʲ∧dxⁱ`, assembled from second
/// partials without going through a curl.
pub fn omega2_block_formula<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<TwoForm<T>> {
    check_dim(l, p)?;
    let n = p.dim();
    let v = l.eval(&jets_at(p, 2))?;
    let h = |a: usize, b: usize| {
        let mut e = vec![0u8; 3 * n];
        e[a] += 1;
        e[b] += 1;
        v.partial(&e).expect("order 2")
    };
    let mut w = Mat::<T>::zeros(3 * n, 3 * n);
    for i in 0..n {
        for mu in 0..3 * n {
            // c · (dz^μ ∧ dx^i) adds c at (μ, i) and −c at (i, μ).
            let c = h(mu, 2 * n + i);
            w[(mu, i)] += c;
            w[(i, mu)] -= c;
        }
    }
    Ok(TwoForm { w })
}

/// Largest `|g g⁻¹ − I|` entry.
pub fn inverse_defect<T: Real>(m: &Metric<T>) -> T {
    match &m.inverse {
        Some(inv) => m.g.matmul(inv).sub(&Mat::identity(m.g.rows())).norm_inf(),
        None => T::infinity(),
    }
}

/// Maximum entry of `|W|` over the given pair of frames.
pub fn max_pairing<T: Real>(form: &TwoForm<T>, a: &Mat<T>, b: &Mat<T>) -> T {
    a.transpose().matmul(&form.w).matmul(b).norm_inf()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::j_matrix;
    use crate::linalg::rank;

    fn pt(x: &[f64], y1: &[f64], y2: &[f64]) -> Jet2Point<f64> {
        Jet2Point::new(x.to_vec(), y1.to_vec(), y2.to_vec()).unwrap()
    }

    #[test]
    fn flat_forms() {
        let l = LagrangianSpec::expression("y2_1^2", 1).unwrap();
        let p = pt(&[0.3], &[0.1], &[1.5]);
        assert_eq!(theta2(&l, &p).unwrap().flat(), vec![3.0, 0.0, 0.0]);
        assert_eq!(theta1(&l, &p).unwrap().flat(), vec![0.0, 3.0, 0.0]);
        let w = omega2(&l, &p).unwrap().w;
        assert_eq!(w[(2, 0)], 2.0);
        assert_eq!(w[(0, 2)], -2.0);
        assert_eq!(w.norm_inf(), 2.0);
        assert_eq!(rank(&w, 1e-10), 2);
        assert_eq!(metric_tensor(&l, &p).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn degenerate_lagrangian() {
        let l = LagrangianSpec::expression("y1_1*y2_1", 1).unwrap();
        let p = pt(&[0.0], &[1.0], &[1.0]);
        assert!(matches!(check_regularity(&l, &p, 1e-10), Err(Error::DegenerateLagrangian { .. })));
    }

    #[test]
    fn conformal_metric_at_origin() {
        let l = LagrangianSpec::expression("exp(2*x_1)*(y2_1 + y1_1^2/2)^2", 1).unwrap();
        let m = check_regularity(&l, &pt(&[0.0], &[0.8], &[-0.3]), 1e-10).unwrap();
        assert!((m.g[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((m.rcond - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diag_exp_regular_on_range() {
        let l = LagrangianSpec::semi_riemannian(SemiRiemannianSpec::diag_exp(2));
        for x in [-5.0, -2.5, 0.0, 2.5, 5.0] {
            let m = check_regularity(&l, &pt(&[x, 0.2], &[0.3, -0.1], &[0.5, 0.5]), 1e-10).unwrap();
            assert!((m.g[(0, 0)] - (2.0 * x).exp()).abs() < 1e-12 * (2.0 * x).exp());
            assert!(inverse_defect(&m) < 1e-10);
        }
    }

    #[test]
    fn block_formula_agrees_with_curl() {
        let l = LagrangianSpec::expression("(1 + y1_1^2)*y2_1^2 + x_1*y1_1*y2_2 + sin(x_2)*y2_2^2 + y1_2^3*y2_1", 2)
            .unwrap();
        let p = pt(&[0.2, -0.4], &[0.7, 0.1], &[-0.3, 0.9]);
        let a = omega2(&l, &p).unwrap();
        let b = omega2_block_formula(&l, &p).unwrap();
        assert!(a.w.max_abs_diff(&b.w) < 1e-13);
        assert_eq!(a.skew_defect(), 0.0);
        let j = j_matrix::<f64>(2);
        assert!(max_pairing(&a, &j, &j) < 1e-13);
    }
}
