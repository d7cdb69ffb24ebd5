//! Semi-Riemannian base metrics and the Lagrangians they induce.
//!
//! A metric is given entrywise by expressions in `x`. Its first derivatives
//! are differentiated symbolically once at construction, so the
//! Christoffel symbols (and hence `L₂`) can be evaluated over Taylor jets of
//! any order without losing an order to differentiation.

use crate::bundle::{Coord, Jet2Point};
use crate::error::{Error, Result};
use crate::expr::{parse_base_expression, Expr};
use crate::jet::TaylorJet;
use crate::linalg::Mat;
use crate::scalar::{Real, Scalar};

/// Default bound on the reciprocal condition number of `g(x)`.
pub const DEFAULT_METRIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SemiRiemannianSpec {
    name: String,
    n: usize,
    g: Mat<Expr>,
    /// `dg[k] = ∂g/∂x^k`.
    dg: Vec<Mat<Expr>>,
    pub tolerance: f64,
}

/// `γ[i][(j, k)] = γⁱ_jk`.
pub type Christoffel<S> = Vec<Mat<S>>;

impl SemiRiemannianSpec {
    /// Build from the upper triangle of `entries` (row-major, `n × n`);
    /// the lower triangle is ignored so the metric is symmetric by
    /// construction.
    pub fn new(name: impl Into<String>, entries: &[Vec<Expr>]) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("metric must be a non-empty square array".into()));
        }
        if entries.iter().flatten().any(|e| e.uses_block(crate::Block::Y1) || e.uses_block(crate::Block::Y2)) {
            return Err(Error::Invalid("metric entries may depend on x only".into()));
        }
        let g = Mat::from_fn(n, n, |i, j| entries[i.min(j)][i.max(j)].clone());
        let dg = (0..n).map(|k| g.map(|e| e.diff(Coord::x(k)))).collect();
        Ok(SemiRiemannianSpec { name: name.into(), n, g, dg, tolerance: DEFAULT_METRIC_TOL })
    }

    /// Parse entries written in the base-expression language.
    pub fn parse(name: impl Into<String>, entries: &[Vec<String>]) -> Result<Self> {
        let n = entries.len();
        let parsed = entries
            .iter()
            .map(|row| row.iter().map(|s| parse_base_expression(s, n)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, &parsed)
    }

    pub fn euclidean(n: usize) -> Self {
        Self::diagonal("euclidean", &vec!["1"; n])
    }

    /// `g = e^{2x}` on the line.
    pub fn conformal1d() -> Self {
        Self::diagonal("conformal1d", &["exp(2*x_1)"])
    }

    /// `g = diag(e^{2x¹}, 1, …, 1)`.
    pub fn diag_exp(n: usize) -> Self {
        let mut d = vec!["1"; n];
        d[0] = "exp(2*x_1)";
        Self::diagonal("diag-exp", &d)
    }

    /// `g = diag(1, (x¹)²)`, meaningful for `x¹ > 0`.
    pub fn polar2d() -> Self {
        Self::diagonal("polar2d", &["1", "x_1^2"])
    }

    fn diagonal(name: &str, diag: &[&str]) -> Self {
        let n = diag.len();
        let entries: Vec<Vec<String>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { diag[i].to_string() } else { "0".into() }).collect()).collect();
        Self::parse(name, &entries).expect("built-in metric parses")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &Mat<Expr> {
        &self.g
    }

    fn pad<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut z = x.to_vec();
        z.resize(3 * self.n, S::lit(0.0));
        z
    }

    pub fn metric<S: Scalar>(&self, x: &[S]) -> Result<Mat<S>> {
        let z = self.pad(x);
        let rows = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.g[(i, j)].eval(&z)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Mat::from_rows(&rows))
    }

    pub fn metric_derivatives<S: Scalar>(&self, x: &[S]) -> Result<Vec<Mat<S>>> {
        let z = self.pad(x);
        self.dg
            .iter()
            .map(|d| {
                let rows = (0..self.n)
                    .map(|i| (0..self.n).map(|j| d[(i, j)].eval(&z)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                Ok(Mat::from_rows(&rows))
            })
            .collect()
    }

    /// Christoffel symbols over any scalar type.
    pub fn christoffels_scalar<S: Scalar>(&self, x: &[S]) -> Result<Christoffel<S>> {
        let g = self.metric(x)?;
        self.check_metric(&g)?;
        let dg = self.metric_derivatives(x)?;
        christoffels_from(&g, &dg)
    }

    fn check_metric<S: Scalar>(&self, g: &Mat<S>) -> Result<()> {
        let (rc, _) = g.real().rcond_with_inverse();
        let tol = <S::Real as Scalar>::lit(self.tolerance);
        if !(rc > tol) {
            return Err(Error::SingularMetric { rcond: rc.to_f64_lossy() });
        }
        Ok(())
    }

    pub fn christoffels<T: Real>(&self, x: &[T]) -> Result<Christoffel<T>> {
        self.christoffels_scalar(x)
    }

    /// Christoffel symbols together with their first derivatives,
    /// `dgamma[m][i][(j, k)] = ∂_m γⁱ_jk`.
    pub fn christoffels_with_derivatives<T: Real>(&self, x: &[T]) -> Result<(Christoffel<T>, Vec<Christoffel<T>>)> {
        let seeded: Vec<usize> = (0..self.n).collect();
        let xj = TaylorJet::seed(x, &seeded, 1);
        let gam = self.christoffels_scalar(&xj)?;
        let values = gam.iter().map(|m| m.map(|e| e.value())).collect();
        let derivs = (0..self.n).map(|m| gam.iter().map(|gi| gi.map(|e| e.gradient_entry(m))).collect()).collect();
        Ok((values, derivs))
    }

    /// `z⁽²⁾ⁱ = y2ⁱ + ½ γⁱ_jk y1ʲ y1ᵏ`.
    pub fn z2<T: Real>(&self, p: &Jet2Point<T>) -> Result<Vec<T>> {
        let gam = self.christoffels(p.x())?;
        Ok(z2_from(&gam, p.y1(), p.y2()))
    }

    /// `L₁ = g_ij(x) y1ⁱ y1ʲ`.
    pub fn l1<T: Real>(&self, x: &[T], y1: &[T]) -> Result<T> {
        let g = self.metric(x)?;
        Ok(quad_form(&g, y1, y1))
    }

    /// `L₂ = g_ij(x) z⁽²⁾ⁱ z⁽²⁾ʲ` over the flat coordinates `z`.
    pub fn l2<S: Scalar>(&self, z: &[S]) -> Result<S> {
        let n = self.n;
        if z.len() != 3 * n {
            return Err(Error::Dimension { expected: 3 * n, found: z.len() });
        }
        let x = &z[..n];
        let g = self.metric(x)?;
        self.check_metric(&g)?;
        let dg = self.metric_derivatives(x)?;
        let gam = christoffels_from(&g, &dg)?;
        let zz = z2_from(&gam, &z[n..2 * n], &z[2 * n..]);
        Ok(quad_form(&g, &zz, &zz))
    }

    /// Closed form `3Gⁱ = ½(∂_m γⁱ_jk + γⁱ_pj γᵖ_km) y1ʲy1ᵏy1ᵐ + 3γⁱ_jk y1ʲ y2ᵏ`,
    /// returned as `Gⁱ`.
    pub fn closed_form_g<T: Real>(&self, p: &Jet2Point<T>) -> Result<Vec<T>> {
        let n = self.n;
        let (gam, dgam) = self.christoffels_with_derivatives(p.x())?;
        let (y1, y2) = (p.y1(), p.y2());
        let half = T::lit(0.5);
        let three = T::lit(3.0);
        Ok((0..n)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..n {
                    for k in 0..n {
                        for m in 0..n {
                            let mut c = dgam[m][i][(j, k)];
                            for q in 0..n {
                                c += gam[i][(q, j)] * gam[q][(k, m)];
                            }
                            acc += half * c * y1[j] * y1[k] * y1[m];
                        }
                        acc += three * gam[i][(j, k)] * y1[j] * y2[k];
                    }
                }
                acc / three
            })
            .collect())
    }

    /// Closed form `N⁽¹⁾ⁱ_j = γⁱ_jk y1ᵏ`.
    pub fn closed_form_n1<T: Real>(&self, p: &Jet2Point<T>) -> Result<Mat<T>> {
        let gam = self.christoffels(p.x())?;
        let n = self.n;
        Ok(Mat::from_fn(n, n, |i, j| (0..n).map(|k| gam[i][(j, k)] * p.y1()[k]).sum()))
    }

    /// Levi-Civita derivative along a curve of a vector with time
    /// derivative `dv`: `dvⁱ + γⁱ_jk ẋʲ vᵏ`.
    pub fn covariant_along<T: Real>(gam: &Christoffel<T>, xdot: &[T], v: &[T], dv: &[T]) -> Vec<T> {
        let n = xdot.len();
        (0..n)
            .map(|i| {
                let mut acc = dv[i];
                for j in 0..n {
                    for k in 0..n {
                        acc += gam[i][(j, k)] * xdot[j] * v[k];
                    }
                }
                acc
            })
            .collect()
    }
}

/// `γⁱ_jk = ½ gⁱᵐ (∂_j g_mk + ∂_k g_mj − ∂_m g_jk)`.
pub fn christoffels_from<S: Scalar>(g: &Mat<S>, dg: &[Mat<S>]) -> Result<Christoffel<S>> {
    let n = g.rows();
    let ginv = g.inverse().ok_or(Error::SingularMetric { rcond: 0.0 })?;
    let half = <S::Real as Scalar>::lit(0.5);
    // Lowered symbols Γ_mjk first, then raise.
    let lowered: Vec<Mat<S>> = (0..n)
        .map(|m| {
            Mat::from_fn(n, n, |j, k| {
                (dg[j][(m, k)].clone() + dg[k][(m, j)].clone() - dg[m][(j, k)].clone()).scale(half)
            })
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            Mat::from_fn(n, n, |j, k| {
                let mut acc = S::lit(0.0);
                for (m, low) in lowered.iter().enumerate() {
                    acc = acc + ginv[(i, m)].clone() * low[(j, k)].clone();
                }
                acc
            })
        })
        .collect())
}

/// Christoffel symbols from a metric given as first-order jets in `x`.
pub fn christoffels_from_metric_jets<T: Real>(g: &Mat<TaylorJet<T>>) -> Result<Christoffel<T>> {
    let n = g.rows();
    let gv = g.map(|e| e.value());
    let dg: Vec<Mat<T>> = (0..n).map(|k| g.map(|e| e.gradient_entry(k))).collect();
    christoffels_from(&gv, &dg)
}

pub fn z2_from<S: Scalar>(gam: &Christoffel<S>, y1: &[S], y2: &[S]) -> Vec<S> {
    let n = y1.len();
    let half = <S::Real as Scalar>::lit(0.5);
    (0..n)
        .map(|i| {
            let mut acc = S::lit(0.0);
            for j in 0..n {
                for k in 0..n {
                    acc = acc + gam[i][(j, k)].clone() * y1[j].clone() * y1[k].clone();
                }
            }
            y2[i].clone() + acc.scale(half)
        })
        .collect()
}

pub fn quad_form<S: Scalar>(g: &Mat<S>, u: &[S], v: &[S]) -> S {
    let mut acc = S::lit(0.0);
    for i in 0..u.len() {
        for j in 0..v.len() {
            acc = acc + g[(i, j)].clone() * u[i].clone() * v[j].clone();
        }
    }
    acc
}

/// Largest absolute asymmetry `|γⁱ_jk − γⁱ_kj|`.
pub fn christoffel_asymmetry<T: Real>(gam: &Christoffel<T>) -> T {
    gam.iter().fold(T::zero(), |m, gi| m.max(gi.max_abs_diff(&gi.transpose())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], y1: &[f64], y2: &[f64]) -> Jet2Point<f64> {
        Jet2Point::new(x.to_vec(), y1.to_vec(), y2.to_vec()).unwrap()
    }

    #[test]
    fn flat_christoffels_vanish() {
        let s = SemiRiemannianSpec::euclidean(3);
        let gam = s.christoffels(&[0.3, -1.0, 2.0]).unwrap();
        assert!(gam.iter().all(|m| m.norm_inf() == 0.0));
        let p = pt(&[0.1, 0.2, 0.3], &[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert_eq!(s.z2(&p).unwrap(), vec![4.0, 5.0, 6.0]);
        assert_eq!(s.closed_form_g(&p).unwrap(), vec![0.0; 3]);
        assert_eq!(s.closed_form_n1(&p).unwrap().norm_inf(), 0.0);
    }

    #[test]
    fn conformal_values() {
        let s = SemiRiemannianSpec::conformal1d();
        for x in [-1.0f64, 0.0, 0.7] {
            let gam = s.christoffels(&[x]).unwrap();
            assert!((gam[0][(0, 0)] - 1.0).abs() < 1e-15);
        }
        let z = s.z2(&pt(&[0.0], &[2.0], &[1.0])).unwrap();
        assert_eq!(z, vec![3.0]);
        let p = pt(&[0.0], &[1.0], &[0.0]);
        assert!((s.closed_form_g(&p).unwrap()[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((s.closed_form_n1(&p).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        let g = s.closed_form_g(&pt(&[0.0], &[2.0], &[1.0])).unwrap();
        assert!((g[0] - 10.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn polar_christoffels() {
        let s = SemiRiemannianSpec::polar2d();
        let r: f64 = 1.7;
        let gam = s.christoffels(&[r, 0.4]).unwrap();
        // γ¹₂₂ = −r, γ²₁₂ = γ²₂₁ = 1/r.
        assert!((gam[0][(1, 1)] + r).abs() < 1e-14);
        assert!((gam[1][(0, 1)] - 1.0 / r).abs() < 1e-14);
        assert!((gam[1][(1, 0)] - 1.0 / r).abs() < 1e-14);
        assert_eq!(christoffel_asymmetry(&gam), 0.0);
        assert!(matches!(s.christoffels(&[0.0, 0.0]), Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn l2_values() {
        let s = SemiRiemannianSpec::euclidean(2);
        let v: f64 = s.l2(&[0.3, 0.1, 9.0, -4.0, 1.0, 2.0]).unwrap();
        assert_eq!(v, 5.0);
        let c = SemiRiemannianSpec::conformal1d();
        let v: f64 = c.l2(&[0.0, 2.0, 1.0]).unwrap();
        assert_eq!(v, 9.0);
        assert_eq!(c.l1(&[0.0], &[2.0]).unwrap(), 4.0);
    }

    #[test]
    fn rejects_fiber_dependence() {
        let e = crate::parse_expression("y1_1", 1).unwrap();
        assert!(SemiRiemannianSpec::new("bad", &[vec![e]]).is_err());
    }
}
