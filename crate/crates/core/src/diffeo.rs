//! Coordinate changes on the base and their induced action on 2-jets.

use num_traits::{Float, Zero};

use crate::bundle::{Block, Coord, Jet2Point};
use crate::error::{Error, Result};
use crate::expr::{parse_base_expression, Expr};
use crate::jet::TaylorJet;
use crate::lagrangian::{metric_tensor, LagrangianSpec};
use crate::linalg::Mat;
use crate::scalar::{Real, Scalar};
use crate::semi_riemannian::{christoffels_from_metric_jets, z2_from, SemiRiemannianSpec};

/// Smallest `|det Dφ|` accepted.
pub const DEFAULT_JACOBIAN_TOL: f64 = 1e-12;

const NEWTON_MAX_ITER: usize = 60;

/// A map `φ: ℝⁿ → ℝⁿ` given by one expression in `x_1..x_n` per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffeo2 {
    comps: Vec<Expr>,
    tol: f64,
}

impl Diffeo2 {
    pub fn new(comps: Vec<Expr>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::Invalid("diffeomorphism needs at least one component".into()));
        }
        if comps.iter().any(|c| c.uses_block(Block::Y1) || c.uses_block(Block::Y2)) {
            return Err(Error::Invalid("diffeomorphism components may only use x_i".into()));
        }
        Ok(Diffeo2 { comps, tol: DEFAULT_JACOBIAN_TOL })
    }

    pub fn parse<S: AsRef<str>>(srcs: &[S]) -> Result<Self> {
        let n = srcs.len();
        let comps = srcs.iter().map(|s| parse_base_expression(s.as_ref(), n)).collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn identity(n: usize) -> Self {
        Diffeo2 { comps: (0..n).map(|i| Expr::var(Coord::x(i))).collect(), tol: DEFAULT_JACOBIAN_TOL }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Diffeo2) -> Result<Diffeo2> {
        if inner.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: inner.dim() });
        }
        Ok(Diffeo2 { comps: self.comps.iter().map(|c| c.substitute(&inner.comps)).collect(), tol: self.tol })
    }

    pub fn apply<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: x.len() });
        }
        // Components only read the x block of the flat coordinates.
        let mut z = x.to_vec();
        z.resize(3 * x.len(), S::constant(S::Real::zero()));
        self.comps.iter().map(|c| c.eval(&z)).collect()
    }

    /// `Dφ(x)`, row `i` holding `∂φⁱ/∂xʲ`.
    pub fn jacobian<T: Real>(&self, x: &[T]) -> Result<Mat<T>> {
        let n = self.dim();
        let seeded: Vec<usize> = (0..n).collect();
        let phi = self.apply(&TaylorJet::seed(x, &seeded, 1))?;
        Ok(Mat::from_fn(n, n, |i, j| phi[i].gradient_entry(j)))
    }

    /// `Dφ(x)`, failing with [`Error::SingularJacobian`] when `|det| < tol`.
    pub fn checked_jacobian<T: Real>(&self, x: &[T]) -> Result<Mat<T>> {
        let j = self.jacobian(x)?;
        let det = j.determinant().to_f64_lossy();
        if !(det.abs() >= self.tol) {
            return Err(Error::SingularJacobian { det });
        }
        Ok(j)
    }

    /// Induced map on 2-jets: `x̃ = φ(x)`, `ỹ1 = Dφ y1`,
    /// `ỹ2 = ½ D²φ[y1, y1] + Dφ y2`. Computed by pushing the curve
    /// `x + t y1 + t² y2` through `φ`.
    pub fn jet_transform<T: Real>(&self, p: &Jet2Point<T>) -> Result<Jet2Point<T>> {
        if p.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: p.dim() });
        }
        self.checked_jacobian(p.x())?;
        let t = TaylorJet::seed(&[T::zero()], &[0], 2).remove(0);
        let t2 = &t * &t;
        let curve: Vec<TaylorJet<T>> =
            (0..self.dim()).map(|i| TaylorJet::constant(p.x()[i]) + t.scale(p.y1()[i]) + t2.scale(p.y2()[i])).collect();
        let image = self.apply(&curve)?;
        let x = image.iter().map(|c| c.value()).collect();
        let y1 = image.iter().map(|c| c.gradient_entry(0)).collect();
        let y2 = image.iter().map(|c| c.partial(&[2]).expect("order 2") * T::lit(0.5)).collect();
        Jet2Point::new(x, y1, y2)
    }

    /// Solve `φ(x) = target` by Newton's method from `guess`.
    pub fn invert_point<T: Real>(&self, target: &[T], guess: &[T]) -> Result<Vec<T>> {
        let mut x = guess.to_vec();
        for _ in 0..NEWTON_MAX_ITER {
            let j = self.checked_jacobian(&x)?;
            let r: Vec<T> = self.apply(&x)?.iter().zip(target).map(|(&a, &b)| a - b).collect();
            let dx = j.solve(&r).ok_or(Error::SingularJacobian { det: 0.0 })?;
            let mut step = T::zero();
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi -= *di;
                step = step.max(Float::abs(*di) / T::one().max(Float::abs(*xi)));
            }
            if step <= T::epsilon() * T::lit(4.0) {
                return Ok(x);
            }
        }
        let r: Vec<T> = self.apply(&x)?.iter().zip(target).map(|(&a, &b)| a - b).collect();
        let res = r.iter().fold(T::zero(), |m, &v| m.max(Float::abs(v)));
        if res <= T::lit(1e-12) * T::one().max(target.iter().fold(T::zero(), |m, &v| m.max(Float::abs(v)))) {
            Ok(x)
        } else {
            Err(Error::Domain(format!("inverse did not converge (residual {:e})", res.to_f64_lossy())))
        }
    }

    /// Taylor expansion of `ψ = φ⁻¹` at `target` to `order`, as jets in
    /// the target coordinates. Each Newton sweep on jets fixes one more
    /// order.
    pub fn inverse_jets<T: Real>(&self, target: &[T], guess: &[T], order: usize) -> Result<Vec<TaylorJet<T>>> {
        let n = self.dim();
        let x0 = self.invert_point(target, guess)?;
        let jinv = self.checked_jacobian(&x0)?.inverse().ok_or(Error::SingularJacobian { det: 0.0 })?;
        let seeded: Vec<usize> = (0..n).collect();
        let xt = TaylorJet::seed(target, &seeded, order);
        let mut x: Vec<TaylorJet<T>> = x0.iter().map(|&v| TaylorJet::constant(v)).collect();
        for _ in 0..=order {
            let phi = self.apply(&x)?;
            let r: Vec<TaylorJet<T>> = phi.iter().zip(&xt).map(|(a, b)| a - b).collect();
            x = (0..n)
                .map(|i| {
                    let mut acc = x[i].clone();
                    for (k, rk) in r.iter().enumerate() {
                        acc = acc - rk.scale(jinv[(i, k)]);
                    }
                    acc
                })
                .collect();
        }
        Ok(x)
    }

    /// `jet(φ⁻¹)(p̃)` from the Taylor expansion of the inverse map.
    pub fn inverse_jet_transform<T: Real>(&self, pt: &Jet2Point<T>, guess: &[T]) -> Result<Jet2Point<T>> {
        let (x, dpsi, d2psi) = self.inverse_derivatives(pt.x(), guess)?;
        let (y1, y2) = push_velocities(&dpsi, &d2psi, pt.y1(), pt.y2());
        Jet2Point::new(x, y1, y2)
    }

    /// `ψ(x̃)`, `Dψ(x̃)` and `D²ψ(x̃)` (`d2[i][(j, k)] = ∂²ψⁱ/∂x̃ʲ∂x̃ᵏ`).
    #[allow(clippy::type_complexity)]
    fn inverse_derivatives<T: Real>(&self, xt: &[T], guess: &[T]) -> Result<(Vec<T>, Mat<T>, Vec<Mat<T>>)> {
        let n = self.dim();
        let psi = self.inverse_jets(xt, guess, 2)?;
        let x = psi.iter().map(|c| c.value()).collect();
        let d = Mat::from_fn(n, n, |i, j| psi[i].gradient_entry(j));
        let d2 = psi
            .iter()
            .map(|c| {
                Mat::from_fn(n, n, |j, k| {
                    let mut e = vec![0u8; n];
                    e[j] += 1;
                    e[k] += 1;
                    c.partial(&e).expect("order 2")
                })
            })
            .collect();
        Ok((x, d, d2))
    }
}

/// `(D y1, ½ D²[y1, y1] + D y2)` for any scalar type of the velocities.
fn push_velocities<T: Real, S: Scalar<Real = T>>(d: &Mat<T>, d2: &[Mat<T>], y1: &[S], y2: &[S]) -> (Vec<S>, Vec<S>) {
    let n = d.rows();
    let mut o1 = Vec::with_capacity(n);
    let mut o2 = Vec::with_capacity(n);
    for i in 0..n {
        let mut a = S::constant(T::zero());
        let mut b = S::constant(T::zero());
        for j in 0..n {
            a = a + y1[j].scale(d[(i, j)]);
            b = b + y2[j].scale(d[(i, j)]);
            for k in 0..n {
                b = b + (y1[j].clone() * y1[k].clone()).scale(T::lit(0.5) * d2[i][(j, k)]);
            }
        }
        o1.push(a);
        o2.push(b);
    }
    (o1, o2)
}

pub fn jet_transform<T: Real>(phi: &Diffeo2, p: &Jet2Point<T>) -> Result<Jet2Point<T>> {
    phi.jet_transform(p)
}

/// Deviation of the metric from the (0,2) tensor law. The metric of the
/// transformed Lagrangian `L̃ = L ∘ jet(φ⁻¹)` at `jet(φ)(p)` is compared with
/// `Dφ⁻ᵀ g(p) Dφ⁻¹`.
pub fn metric_law_defect<T: Real>(l: &LagrangianSpec, phi: &Diffeo2, p: &Jet2Point<T>) -> Result<T> {
    let n = p.dim();
    let pt = phi.jet_transform(p)?;
    let (x, dpsi, d2psi) = phi.inverse_derivatives(pt.x(), p.x())?;
    // L̃ as a jet in ỹ2 only; x and y1 stay constant.
    let seeded: Vec<usize> = (0..n).collect();
    let yt2 = TaylorJet::seed(pt.y2(), &seeded, 2);
    let yt1: Vec<TaylorJet<T>> = pt.y1().iter().map(|&v| TaylorJet::constant(v)).collect();
    let (y1, y2) = push_velocities(&dpsi, &d2psi, &yt1, &yt2);
    let mut z: Vec<TaylorJet<T>> = x.iter().map(|&v| TaylorJet::constant(v)).collect();
    z.extend(y1);
    z.extend(y2);
    let lt = crate::calculus::ScalarField::eval(l, &z)?;
    let half = T::lit(0.5);
    let g_new = Mat::from_fn(n, n, |i, j| {
        let mut e = vec![0u8; n];
        e[i] += 1;
        e[j] += 1;
        lt.partial(&e).expect("order 2") * half
    });
    let g = metric_tensor(l, p)?;
    let jinv = phi.checked_jacobian(p.x())?.inverse().ok_or(Error::SingularJacobian { det: 0.0 })?;
    let expected = jinv.transpose().matmul(&g).matmul(&jinv);
    Ok(g_new.max_abs_diff(&expected))
}

/// Deviation of `z⁽²⁾ = y2 + ½γ(y1, y1)` from the vector law
/// `z̃⁽²⁾ = Dφ z⁽²⁾`, with `z̃⁽²⁾` built from the pulled-back base metric
/// `g̃ = Dψᵀ g(ψ) Dψ` at `jet(φ)(p)`.
pub fn z2_law_defect<T: Real>(spec: &SemiRiemannianSpec, phi: &Diffeo2, p: &Jet2Point<T>) -> Result<T> {
    let n = p.dim();
    let pt = phi.jet_transform(p)?;
    let psi = phi.inverse_jets(pt.x(), p.x(), 2)?;
    let dpsi: Mat<TaylorJet<T>> = Mat::from_fn(n, n, |i, j| psi[i].derivative(j));
    let g = spec.metric(&psi)?;
    let g_new = dpsi.transpose().matmul(&g).matmul(&dpsi);
    let gam = christoffels_from_metric_jets(&g_new)?;
    let z_new = z2_from(&gam, pt.y1(), pt.y2());
    let expected = phi.jacobian(p.x())?.matvec(&spec.z2(p)?);
    Ok(z_new.iter().zip(&expected).fold(T::zero(), |m, (&a, &b)| m.max(Float::abs(a - b))))
}
