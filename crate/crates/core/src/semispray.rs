//! The canonical semispray `S = y1 ∂/∂x + 2y2 ∂/∂y1 − 3G ∂/∂y2` and the
//! identities relating it to the Cartan–Poincaré forms.
//!
//! All residual functions take a [`PointModel`]; a model built with
//! [`PointModel::with_coeff_perturbation`] gives the same quantities for a
//! non-canonical semispray.

use num_traits::Float;

use crate::bundle::{j_matrix, Coord, Jet2Point, TangentVecT2M};
use crate::calculus::ScalarField;
use crate::error::Result;
use crate::jet::TaylorJet;
use crate::lagrangian::{curl, LagrangianSpec, DEFAULT_REGULARITY_TOL};
use crate::linalg::Mat;
use crate::model::PointModel;
use crate::scalar::{Real, Scalar};

/// Semispray coefficients `Gⁱ` at a point.
pub fn semispray_coeffs<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<Vec<T>> {
    Ok(PointModel::new(l, p, 2, DEFAULT_REGULARITY_TOL)?.coeffs())
}

/// `S = (y1, 2y2, −3G)` in the natural frame.
pub fn semispray_vector<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<TangentVecT2M<T>> {
    let m = PointModel::new(l, p, 2, DEFAULT_REGULARITY_TOL)?;
    TangentVecT2M::from_flat(p.clone(), &m.semispray())
}

/// `S(f)` at a point.
pub fn apply_s<F: ScalarField, T: Real>(l: &LagrangianSpec, f: &F, p: &Jet2Point<T>) -> Result<T> {
    let m = PointModel::new(l, p, 2, DEFAULT_REGULARITY_TOL)?;
    Ok(m.apply_s(&m.expand(f)?).value())
}

/// `S²(f) = S^ν ∂_ν(S^μ ∂_μ f)`, expanded through jets of `f` and `G`.
pub fn apply_s2<F: ScalarField, T: Real>(l: &LagrangianSpec, f: &F, p: &Jet2Point<T>) -> Result<T> {
    let m = PointModel::new(l, p, 3, DEFAULT_REGULARITY_TOL)?;
    let sf = m.apply_s(&m.expand(f)?);
    Ok(m.apply_s(&sf).value())
}

fn zero<T: Real>() -> TaylorJet<T> {
    TaylorJet::constant(T::zero())
}

/// Components of `θ¹ = (∂L/∂y1, ∂L/∂y2, 0)` as jets.
pub fn theta1_jets<T: Real>(m: &PointModel<T>) -> Vec<TaylorJet<T>> {
    let n = m.dim();
    (0..3 * n).map(|mu| if mu < 2 * n { m.dl(mu + n).clone() } else { zero() }).collect()
}

/// Components of `θ² = (∂L/∂y2, 0, 0)` as jets.
pub fn theta2_jets<T: Real>(m: &PointModel<T>) -> Vec<TaylorJet<T>> {
    let n = m.dim();
    (0..3 * n).map(|mu| if mu < n { m.dl(mu + 2 * n).clone() } else { zero() }).collect()
}

fn values<T: Real>(v: &[TaylorJet<T>]) -> Vec<T> {
    v.iter().map(TaylorJet::value).collect()
}

/// `i_S ω` as jets, `(i_S ω)_ν = S^μ W_μν`.
pub fn interior<T: Real>(m: &PointModel<T>, w: &Mat<TaylorJet<T>>) -> Vec<TaylorJet<T>> {
    let s = m.semispray_jets();
    (0..w.cols())
        .map(|nu| {
            let mut acc = zero();
            for (mu, smu) in s.iter().enumerate() {
                acc = acc + smu * &w[(mu, nu)];
            }
            acc
        })
        .collect()
}

/// Lie derivative of a one-form from its components:
/// `(ℒ_S θ)_μ = S^ν ∂_ν θ_μ + θ_ν ∂_μ S^ν`.
pub fn lie_one_form<T: Real>(m: &PointModel<T>, theta: &[TaylorJet<T>]) -> Vec<T> {
    let s = m.semispray_jets();
    let dim = theta.len();
    (0..dim)
        .map(|mu| {
            let mut acc = T::zero();
            for nu in 0..dim {
                acc += s[nu].value() * theta[mu].gradient_entry(nu);
                acc += theta[nu].value() * s[nu].gradient_entry(mu);
            }
            acc
        })
        .collect()
}

/// Lie derivative of a two-form from its components:
/// `(ℒ_S ω)_μν = S^λ ∂_λ W_μν + W_λν ∂_μ S^λ + W_μλ ∂_ν S^λ`.
pub fn lie_two_form<T: Real>(m: &PointModel<T>, w: &Mat<TaylorJet<T>>) -> Mat<T> {
    let s = m.semispray_jets();
    let dim = w.rows();
    Mat::from_fn(dim, dim, |mu, nu| {
        let mut acc = T::zero();
        for lam in 0..dim {
            acc += s[lam].value() * w[(mu, nu)].gradient_entry(lam);
            acc += w[(lam, nu)].value() * s[lam].gradient_entry(mu);
            acc += w[(mu, lam)].value() * s[lam].gradient_entry(nu);
        }
        acc
    })
}

/// `ℒ_S θ²` from its local expression: `[d_T(∂L/∂y2ᵢ) − 6 g_ji Gʲ] dxⁱ +
/// ∂L/∂y2ᵢ dy1ⁱ`.
pub fn lie_theta2<T: Real>(m: &PointModel<T>) -> Vec<T> {
    let n = m.dim();
    let p = m.point();
    let g = &m.metric().g;
    let coeffs = m.coeffs();
    let mut out = vec![T::zero(); 3 * n];
    for i in 0..n {
        let l2i = m.dl_at(Coord::y2(i));
        let mut dt = T::zero();
        for k in 0..n {
            dt += p.y1()[k] * l2i.gradient_entry(k) + T::lit(2.0) * p.y2()[k] * l2i.gradient_entry(n + k);
        }
        let mut gg = T::zero();
        for j in 0..n {
            gg += g[(j, i)] * coeffs[j];
        }
        out[i] = dt - T::lit(6.0) * gg;
        out[n + i] = l2i.value();
    }
    out
}

fn max_gap<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |m, (&x, &y)| m.max(Float::abs(x - y)))
}

/// `‖ℒ_S θ² − θ¹‖∞`, taking the worse of the local expression and the
/// component formula for the Lie derivative.
pub fn lie_theta2_residual<T: Real>(m: &PointModel<T>) -> T {
    let theta1 = values(&theta1_jets(m));
    let local = max_gap(&lie_theta2(m), &theta1);
    let comp = max_gap(&lie_one_form(m, &theta2_jets(m)), &theta1);
    local.max(comp)
}

/// `𝔺₁(L) = y1ⁱ ∂L/∂y2ⁱ` as a jet.
pub fn c1_l<T: Real>(m: &PointModel<T>) -> TaylorJet<T> {
    let n = m.dim();
    let mut acc = zero();
    for i in 0..n {
        acc = acc + m.coord(Coord::y1(i)) * m.dl_at(Coord::y2(i));
    }
    acc
}

/// `𝔺₂(L) = y1ⁱ ∂L/∂y1ⁱ + 2 y2ⁱ ∂L/∂y2ⁱ` as a jet.
pub fn c2_l<T: Real>(m: &PointModel<T>) -> TaylorJet<T> {
    let n = m.dim();
    let mut acc = zero();
    for i in 0..n {
        acc = acc + m.coord(Coord::y1(i)) * m.dl_at(Coord::y1(i));
        acc = acc + (m.coord(Coord::y2(i)) * m.dl_at(Coord::y2(i))).scale(T::lit(2.0));
    }
    acc
}

fn gradient<T: Real>(f: &TaylorJet<T>, dim: usize) -> Vec<T> {
    (0..dim).map(|k| f.gradient_entry(k)).collect()
}

/// `‖i_S ω² + d(𝔺₁L) − θ¹‖∞`.
pub fn verify_isomega<T: Real>(m: &PointModel<T>) -> Result<T> {
    m.require_order(3, "isomega")?;
    let dim = 3 * m.dim();
    let w2 = curl(&theta2_jets(m));
    let is = values(&interior(m, &w2));
    let dc1 = gradient(&c1_l(m), dim);
    let lhs: Vec<T> = is.iter().zip(&dc1).map(|(&a, &b)| a + b).collect();
    Ok(max_gap(&lhs, &values(&theta1_jets(m))))
}

/// `‖ℒ_S ω² − ω¹‖∞` with `ℒ_S ω² = d(i_S ω²)` (ω² is closed).
pub fn lie_omega2_equals_omega1<T: Real>(m: &PointModel<T>) -> Result<T> {
    m.require_order(4, "lie_omega2")?;
    let w2 = curl(&theta2_jets(m));
    let lie = curl(&interior(m, &w2)).map(|e| e.value());
    let w1 = curl(&theta1_jets(m)).map(|e| e.value());
    Ok(lie.max_abs_diff(&w1))
}

/// `|S(𝔺₁L) − 𝔺₂L|`.
pub fn liouville_identity<T: Real>(m: &PointModel<T>) -> Result<T> {
    m.require_order(3, "S(C1 L)")?;
    Ok(Float::abs(m.apply_s(&c1_l(m)).value() - c2_l(m).value()))
}

/// Residuals of the three Cartan–Poincaré identities at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartanResiduals<T> {
    /// `ω²(JX, JY)`, `ω²(J²X, J²Y)` and `ω¹(J²X, J²Y)`.
    pub lagrangian_subbundles: T,
    /// `θ¹(S) − 𝔺₂L` and `θ²(S) − 𝔺₁L`.
    pub contractions: T,
    /// `ℒ_S θ¹ − i_S ω¹ − d(𝔺₂L)` and `ℒ_S θ² − i_S ω² − d(𝔺₁L)`.
    pub lie_derivatives: T,
}

pub fn cartan_identities<T: Real>(m: &PointModel<T>) -> Result<CartanResiduals<T>> {
    m.require_order(3, "Cartan identities")?;
    let n = m.dim();
    let dim = 3 * n;
    let th1 = theta1_jets(m);
    let th2 = theta2_jets(m);
    let w1j = curl(&th1);
    let w2j = curl(&th2);
    let w1 = w1j.map(|e| e.value());
    let w2 = w2j.map(|e| e.value());
    let j = j_matrix::<T>(n);
    let j2 = j.matmul(&j);
    let pull = |w: &Mat<T>, a: &Mat<T>| a.transpose().matmul(w).matmul(a).norm_inf();
    let sub = pull(&w2, &j).max(pull(&w2, &j2)).max(pull(&w1, &j2));

    let s = m.semispray();
    let dot = |a: &[TaylorJet<T>]| a.iter().zip(&s).fold(T::zero(), |acc, (x, &y)| acc + x.value() * y);
    let c1 = c1_l(m);
    let c2 = c2_l(m);
    let contractions = Float::abs(dot(&th1) - c2.value()).max(Float::abs(dot(&th2) - c1.value()));

    let mut lie = T::zero();
    for (theta, wj, c) in [(&th1, &w1j, &c2), (&th2, &w2j, &c1)] {
        let lhs = lie_one_form(m, theta);
        let is = values(&interior(m, wj));
        let dc = gradient(c, dim);
        let rhs: Vec<T> = is.iter().zip(&dc).map(|(&a, &b)| a + b).collect();
        lie = lie.max(max_gap(&lhs, &rhs));
    }
    Ok(CartanResiduals { lagrangian_subbundles: sub, contractions, lie_derivatives: lie })
}

/// `max_i |S(∂L/∂y2ᵢ) − ∂L/∂y1ᵢ|`.
pub fn sl2_residual<T: Real>(m: &PointModel<T>) -> Result<T> {
    m.require_order(3, "sl2")?;
    let n = m.dim();
    Ok((0..n).fold(T::zero(), |acc, i| {
        let lhs = m.apply_s(m.dl_at(Coord::y2(i))).value();
        acc.max(Float::abs(lhs - m.dl_at(Coord::y1(i)).value()))
    }))
}

/// `‖J S − 𝔺₂‖∞`; zero by construction.
pub fn js_defect<T: Real>(m: &PointModel<T>) -> T {
    let n = m.dim();
    let s = m.semispray();
    let p = m.point();
    let mut d = T::zero();
    for i in 0..n {
        d = d.max(Float::abs(s[i] - p.y1()[i]));
        d = d.max(Float::abs(s[n + i] - T::lit(2.0) * p.y2()[i]));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::FieldExpr;
    use crate::registry;
    use crate::semi_riemannian::SemiRiemannianSpec;

    fn pt(x: &[f64], y1: &[f64], y2: &[f64]) -> Jet2Point<f64> {
        Jet2Point::new(x.to_vec(), y1.to_vec(), y2.to_vec()).unwrap()
    }

    fn conformal() -> LagrangianSpec {
        LagrangianSpec::semi_riemannian(SemiRiemannianSpec::conformal1d())
    }

    #[test]
    fn flat_has_zero_coefficients() {
        let l = registry::flat(2);
        let p = pt(&[0.3, 0.1], &[1.0, -2.0], &[0.5, 0.25]);
        assert_eq!(semispray_coeffs(&l, &p).unwrap(), vec![0.0, 0.0]);
        let s = semispray_vector(&registry::flat(1), &pt(&[0.0], &[1.0], &[1.0])).unwrap();
        assert_eq!(s.flat(), vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn conformal_closed_values() {
        let g = semispray_coeffs(&conformal(), &pt(&[0.0], &[1.0], &[0.0])).unwrap();
        assert!((g[0] - 1.0 / 6.0).abs() < 1e-15);
        let g = semispray_coeffs(&conformal(), &pt(&[0.0], &[2.0], &[1.0])).unwrap();
        assert!((g[0] - 10.0 / 3.0).abs() < 1e-14);
        let s = semispray_vector(&conformal(), &pt(&[0.0], &[1.0], &[0.0])).unwrap();
        assert!((s.cy2[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn quartic_inspect_value() {
        let l = LagrangianSpec::expression("y2_1^2 + y1_1^4", 1).unwrap();
        let g = semispray_coeffs(&l, &pt(&[0.0], &[1.0], &[1.0])).unwrap();
        assert!((g[0] + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_operators() {
        let l = registry::flat(1);
        let p = pt(&[0.2], &[0.7], &[-0.4]);
        let x = FieldExpr::parse("x_1", 1).unwrap();
        let y2 = FieldExpr::parse("y2_1", 1).unwrap();
        assert_eq!(apply_s(&l, &x, &p).unwrap(), 0.7);
        assert_eq!(apply_s2(&l, &x, &p).unwrap(), -0.8);
        assert_eq!(apply_s(&l, &y2, &p).unwrap(), 0.0);
    }

    #[test]
    fn flat_lie_theta2() {
        let m = PointModel::new(&registry::flat(1), &pt(&[0.0], &[1.0], &[1.0]), 4, 1e-10).unwrap();
        assert_eq!(lie_theta2(&m), vec![0.0, 2.0, 0.0]);
        assert_eq!(lie_theta2_residual(&m), 0.0);
        assert_eq!(verify_isomega(&m).unwrap(), 0.0);
        assert_eq!(lie_omega2_equals_omega1(&m).unwrap(), 0.0);
    }

    #[test]
    fn perturbation_shifts_dx_block() {
        let l = registry::coupled(2);
        let p = pt(&[0.3, -0.2], &[0.4, 0.1], &[-0.6, 0.8]);
        let m = PointModel::new(&l, &p, 4, 1e-10).unwrap();
        let eps = 1e-3;
        let d = [TaylorJet::constant(eps), TaylorJet::constant(0.0)];
        let mp = m.with_coeff_perturbation(&d);
        let a = lie_theta2(&m);
        let b = lie_theta2(&mp);
        let g = &m.metric().g;
        for i in 0..2 {
            assert!((b[i] - a[i] + 6.0 * g[(0, i)] * eps).abs() < 1e-12);
        }
    }

    #[test]
    fn identities_hold_for_builtins() {
        let p = pt(&[0.3, -0.2], &[0.4, 0.1], &[-0.6, 0.8]);
        for e in registry::entries(2) {
            let m = PointModel::new(&e.spec, &p, 4, 1e-10).unwrap();
            let r = cartan_identities(&m).unwrap();
            assert!(r.lagrangian_subbundles < 1e-12, "{}", e.name());
            assert!(r.contractions < 1e-12, "{}", e.name());
            assert!(r.lie_derivatives < 1e-12, "{}", e.name());
            assert!(lie_theta2_residual(&m) < 1e-12, "{}", e.name());
            assert!(verify_isomega(&m).unwrap() < 1e-12, "{}", e.name());
            assert!(lie_omega2_equals_omega1(&m).unwrap() < 1e-12, "{}", e.name());
            assert!(liouville_identity(&m).unwrap() < 1e-12, "{}", e.name());
            assert!(sl2_residual(&m).unwrap() < 1e-12, "{}", e.name());
            assert_eq!(js_defect(&m), 0.0);
        }
    }

    #[test]
    fn two_form_lie_matches_exterior_formula() {
        let p = pt(&[0.3, -0.2], &[0.4, 0.1], &[-0.6, 0.8]);
        let m = PointModel::new(&registry::coupled(2), &p, 4, 1e-10).unwrap();
        let w2 = curl(&theta2_jets(&m));
        let comp = lie_two_form(&m, &w2);
        let cartan = curl(&interior(&m, &w2)).map(|e| e.value());
        assert!(comp.max_abs_diff(&cartan) < 1e-12);
    }

    #[test]
    fn point_dependent_perturbation_breaks_lie_omega2() {
        let p = pt(&[0.3, -0.2], &[0.4, 0.1], &[-0.6, 0.8]);
        let m = PointModel::new(&registry::coupled(2), &p, 4, 1e-10).unwrap();
        let d: Vec<_> = (0..2).map(|i| m.coord(Coord::y2(i)).scale(1e-3)).collect();
        let mp = m.with_coeff_perturbation(&d);
        assert!(lie_omega2_equals_omega1(&mp).unwrap() > 1e-5);
        assert!(lie_theta2_residual(&mp) > 1e-5);
    }
}
