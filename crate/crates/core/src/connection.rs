//! The nonlinear connection fixed by `∇²g = 0` and the adapted form of ω²,
//! with its frames, projectors and dynamical covariant derivatives.
//!
//! Index convention: in `N⁽ᵅ⁾ⁱ_j` the row is the fiber index `i`; lowered
//! coefficients use the first slot of `g`, `N_ij = g_ik Nᵏ_j`.

use num_traits::Float;

use crate::bundle::{Block, Coord, Jet2Point};
use crate::calculus::ScalarField;
use crate::error::Result;
use crate::lagrangian::{curl, LagrangianSpec, DEFAULT_REGULARITY_TOL};
use crate::linalg::Mat;
use crate::model::PointModel;
use crate::scalar::Real;
use crate::semispray::theta2_jets;

/// Connection coefficients at a point, with the metric and semispray
/// coefficients they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionData<T> {
    pub n1: Mat<T>,
    pub n2: Mat<T>,
    pub m1: Mat<T>,
    pub m2: Mat<T>,
    pub g: Mat<T>,
    pub coeffs: Vec<T>,
    /// `S(g_ij)`.
    pub sg: Mat<T>,
    /// `S²(g_ij)`.
    pub s2g: Mat<T>,
}

fn sum<T: Real>(n: usize, f: impl Fn(usize) -> T) -> T {
    (0..n).fold(T::zero(), |acc, k| acc + f(k))
}

impl<T: Real> ConnectionData<T> {
    /// Build the connection from an order-4 model.
    pub fn from_model(m: &PointModel<T>) -> Result<Self> {
        m.require_order(4, "connection")?;
        let n = m.dim();
        let g = m.metric().g.clone();
        let n1 = n1_from_model(m);
        let gj = m.metric_jets();
        let sgj = Mat::from_fn(n, n, |i, j| m.apply_s(&gj[(i, j)]));
        let sg = sgj.map(|e| e.value());
        let s2g = sgj.map(|e| m.apply_s(e).value());

        let a = Mat::from_fn(n, n, |i, j| {
            s2g[(i, j)]
                - T::lit(2.0) * sum(n, |k| sg[(i, k)] * n1[(k, j)])
                - T::lit(2.0) * sum(n, |k| sg[(k, j)] * n1[(k, i)])
                + T::lit(2.0) * sum(n, |k| sum(n, |mm| g[(mm, k)] * n1[(k, j)] * n1[(mm, i)]))
        });
        let l2x = |i: usize, j: usize| m.d2l(Coord::y2(i), Coord::x(j));
        let l21 = |i: usize, k: usize| m.d2l(Coord::y2(i), Coord::y1(k));
        let b = Mat::from_fn(n, n, |i, j| {
            l2x(i, j) - l2x(j, i) - sum(n, |k| n1[(k, j)] * l21(i, k)) + sum(n, |k| n1[(k, i)] * l21(j, k))
        });
        let n2_low = a.add(&b).scale(T::lit(0.25));
        let n2 = m.g_inverse().matmul(&n2_low);
        Ok(Self::assemble(n1, n2, g, m.coeffs(), sg, s2g))
    }

    pub fn new(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<Self> {
        Self::from_model(&PointModel::new(l, p, 4, DEFAULT_REGULARITY_TOL)?)
    }

    fn assemble(n1: Mat<T>, n2: Mat<T>, g: Mat<T>, coeffs: Vec<T>, sg: Mat<T>, s2g: Mat<T>) -> Self {
        let m2 = n2.add(&n1.matmul(&n1));
        ConnectionData { m1: n1.clone(), n1, n2, m2, g, coeffs, sg, s2g }
    }

    /// Same connection with `N⁽²⁾` shifted by `eps·I` (and `M⁽²⁾` rebuilt).
    pub fn with_n2_perturbation(&self, eps: T) -> Self {
        let n = self.dim();
        let n2 = self.n2.add(&Mat::identity(n).scale(eps));
        Self::assemble(self.n1.clone(), n2, self.g.clone(), self.coeffs.clone(), self.sg.clone(), self.s2g.clone())
    }

    pub fn dim(&self) -> usize {
        self.g.rows()
    }

    /// `g_ik Nᵏ_j`.
    pub fn n1_lowered(&self) -> Mat<T> {
        self.g.matmul(&self.n1)
    }

    pub fn n2_lowered(&self) -> Mat<T> {
        self.g.matmul(&self.n2)
    }

    /// `‖M⁽¹⁾ − N⁽¹⁾‖` and `‖M⁽²⁾ − N⁽²⁾ − N⁽¹⁾N⁽¹⁾‖`.
    pub fn nm_relation_defect(&self) -> T {
        let a = self.m1.max_abs_diff(&self.n1);
        let b = self.m2.max_abs_diff(&self.n2.add(&self.n1.matmul(&self.n1)));
        a.max(b)
    }
}

fn n1_from_model<T: Real>(m: &PointModel<T>) -> Mat<T> {
    let n = m.dim();
    let c = m.coeff_jets();
    Mat::from_fn(n, n, |i, j| c[i].gradient_entry(Coord::y2(j).flat(n)))
}

/// `N⁽¹⁾ⁱ_j = ∂Gⁱ/∂y2ʲ`.
pub fn n1_coeffs<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<Mat<T>> {
    Ok(n1_from_model(&PointModel::new(l, p, 3, DEFAULT_REGULARITY_TOL)?))
}

/// `N⁽²⁾` from the full construction.
pub fn n2_coeffs<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<Mat<T>> {
    Ok(ConnectionData::new(l, p)?.n2)
}

/// Lowered `N⁽¹⁾_ij = ⅓S(g_ij) + ⅓∂²L/∂y2ⁱ∂y1ʲ − ⅙∂²L/∂y2ʲ∂y1ⁱ`, solved
/// from the symmetry conditions rather than by differentiating `G`.
pub fn n1_lowered_from_conditions<T: Real>(m: &PointModel<T>, sg: &Mat<T>) -> Mat<T> {
    let n = m.dim();
    let third = T::lit(1.0 / 3.0);
    let sixth = T::lit(1.0 / 6.0);
    Mat::from_fn(n, n, |i, j| {
        third * sg[(i, j)] + third * m.d2l(Coord::y2(i), Coord::y1(j)) - sixth * m.d2l(Coord::y2(j), Coord::y1(i))
    })
}

/// `max |Nᵢⱼ(∂G/∂y2) − g⁻¹·N_ij(conditions)|`.
pub fn n1_agreement_residual<T: Real>(m: &PointModel<T>, c: &ConnectionData<T>) -> T {
    let raised = m.g_inverse().matmul(&n1_lowered_from_conditions(m, &c.sg));
    raised.max_abs_diff(&c.n1)
}

/// Asymmetry of `δ/δy1ⁱ(∂L/∂y2ʲ) = ∂²L/∂y1ⁱ∂y2ʲ − N⁽¹⁾ᵏ_i ∂²L/∂y2ᵏ∂y2ʲ`.
pub fn delta_y1_l2_asymmetry<T: Real>(m: &PointModel<T>, c: &ConnectionData<T>) -> T {
    let n = m.dim();
    let e = delta_y1_l2(m, c);
    let mut d = T::zero();
    for i in 0..n {
        for j in 0..n {
            d = d.max(Float::abs(e[(i, j)] - e[(j, i)]));
        }
    }
    d
}

fn delta_y1_l2<T: Real>(m: &PointModel<T>, c: &ConnectionData<T>) -> Mat<T> {
    let n = m.dim();
    Mat::from_fn(n, n, |i, j| {
        m.d2l(Coord::y1(i), Coord::y2(j)) - sum(n, |k| c.n1[(k, i)] * m.d2l(Coord::y2(k), Coord::y2(j)))
    })
}

/// `max |2(N_ij − N_ji) − (∂²L/∂y2ⁱ∂y1ʲ − ∂²L/∂y2ʲ∂y1ⁱ)|`.
pub fn n1_skew_residual<T: Real>(m: &PointModel<T>, c: &ConnectionData<T>) -> T {
    let n = m.dim();
    let low = c.n1_lowered();
    let mut d = T::zero();
    for i in 0..n {
        for j in 0..n {
            let lhs = T::lit(2.0) * (low[(i, j)] - low[(j, i)]);
            let rhs = m.d2l(Coord::y2(i), Coord::y1(j)) - m.d2l(Coord::y2(j), Coord::y1(i));
            d = d.max(Float::abs(lhs - rhs));
        }
    }
    d
}

/// Natural-to-adapted change of basis. Columns of `frame` are
/// `(δ/δx, δ/δy1, ∂/∂y2)`; rows of `coframe` are `(dx, δy1, δy2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedFrame<T> {
    pub frame: Mat<T>,
    pub coframe: Mat<T>,
}

impl<T: Real> AdaptedFrame<T> {
    pub fn new(c: &ConnectionData<T>) -> Self {
        let n = c.dim();
        let mut frame = Mat::identity(3 * n);
        let neg = |a: &Mat<T>| a.scale(-T::one());
        frame.set_block(n, 0, &neg(&c.n1));
        frame.set_block(2 * n, 0, &neg(&c.n2));
        frame.set_block(2 * n, n, &neg(&c.n1));
        let mut coframe = Mat::identity(3 * n);
        coframe.set_block(n, 0, &c.m1);
        coframe.set_block(2 * n, 0, &c.m2);
        coframe.set_block(2 * n, n, &c.m1);
        AdaptedFrame { frame, coframe }
    }

    pub fn dim(&self) -> usize {
        self.frame.rows() / 3
    }

    /// `‖coframe · frame − I‖∞`.
    pub fn duality_defect(&self) -> T {
        let k = self.frame.rows();
        self.coframe.matmul(&self.frame).max_abs_diff(&Mat::identity(k))
    }

    /// Column `c` of the frame as a natural-frame vector.
    pub fn vector(&self, c: Coord) -> Vec<T> {
        let k = c.flat(self.dim());
        (0..self.frame.rows()).map(|r| self.frame[(r, k)]).collect()
    }

    /// Projector onto the span of one block of the frame.
    pub fn projector(&self, b: Block) -> Mat<T> {
        let n = self.dim();
        let mut sel = Mat::zeros(3 * n, 3 * n);
        let off = b.offset(n);
        for i in off..off + n {
            sel[(i, i)] = T::one();
        }
        self.frame.matmul(&sel).matmul(&self.coframe)
    }

    /// `(h, v1, v2)`.
    pub fn projectors(&self) -> (Mat<T>, Mat<T>, Mat<T>) {
        (self.projector(Block::X), self.projector(Block::Y1), self.projector(Block::Y2))
    }

    /// Components of a bilinear form in the adapted frame, `Fᵀ W F`.
    pub fn congruence(&self, w: &Mat<T>) -> Mat<T> {
        self.frame.transpose().matmul(w).matmul(&self.frame)
    }
}

/// `∇Xⁱ = S(Xⁱ) + M⁽¹⁾ⁱ_j Xʲ`.
pub fn nabla1<F: ScalarField, T: Real>(m: &PointModel<T>, c: &ConnectionData<T>, x: &[F]) -> Result<Vec<T>> {
    let (x0, sx, _) = lift_parts(m, x)?;
    Ok(c.m1.matvec(&x0).iter().zip(&sx).map(|(&a, &b)| a + b).collect())
}

/// `∇²Xⁱ = S²(Xⁱ) + 2M⁽¹⁾ⁱ_j S(Xʲ) + 2M⁽²⁾ⁱ_j Xʲ`.
pub fn nabla2<F: ScalarField, T: Real>(m: &PointModel<T>, c: &ConnectionData<T>, x: &[F]) -> Result<Vec<T>> {
    m.require_order(3, "nabla2")?;
    let (x0, sx, s2x) = lift_parts(m, x)?;
    let a = c.m1.matvec(&sx);
    let b = c.m2.matvec(&x0);
    Ok((0..x0.len()).map(|i| s2x[i] + T::lit(2.0) * (a[i] + b[i])).collect())
}

/// `(X, S(X), S²(X))` at the model point; `S²` needs an order-3 model.
fn lift_parts<F: ScalarField, T: Real>(m: &PointModel<T>, x: &[F]) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if x.len() != m.dim() {
        return Err(crate::error::Error::Dimension { expected: m.dim(), found: x.len() });
    }
    let mut v = Vec::new();
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    for f in x {
        let j = m.expand(f)?;
        let sj = m.apply_s(&j);
        v.push(j.value());
        s2.push(if m.order() >= 3 { m.apply_s(&sj).value() } else { T::nan() });
        s1.push(sj.value());
    }
    Ok((v, s1, s2))
}

/// `max |Xᶜ_adapted − coframe · Xᶜ_natural|` for the complete lift
/// `Xᶜ = Xⁱ∂/∂xⁱ + S(Xⁱ)∂/∂y1ⁱ + ½S²(Xⁱ)∂/∂y2ⁱ`.
pub fn complete_lift_defect<F: ScalarField, T: Real>(m: &PointModel<T>, c: &ConnectionData<T>, x: &[F]) -> Result<T> {
    m.require_order(3, "complete lift")?;
    let (x0, sx, s2x) = lift_parts(m, x)?;
    let half = T::lit(0.5);
    let mut natural = x0.clone();
    natural.extend(sx);
    natural.extend(s2x.iter().map(|&v| half * v));
    let n1x = nabla1(m, c, x)?;
    let n2x = nabla2(m, c, x)?;
    let mut adapted = x0;
    adapted.extend(n1x);
    adapted.extend(n2x.iter().map(|&v| half * v));
    let got = AdaptedFrame::new(c).coframe.matvec(&natural);
    Ok(got.iter().zip(&adapted).fold(T::zero(), |d, (&a, &b)| d.max(Float::abs(a - b))))
}

/// `∇g_ij = S(g_ij) − N⁽¹⁾ᵏ_i g_kj − N⁽¹⁾ᵏ_j g_ik`.
pub fn nabla_g<T: Real>(c: &ConnectionData<T>) -> Mat<T> {
    let n = c.dim();
    Mat::from_fn(n, n, |i, j| {
        c.sg[(i, j)] - sum(n, |k| c.n1[(k, i)] * c.g[(k, j)]) - sum(n, |k| c.n1[(k, j)] * c.g[(i, k)])
    })
}

/// `∇²g_ij = S²(g_ij) − 2N⁽¹⁾ᵏ_i S(g_kj) − 2N⁽¹⁾ᵏ_j S(g_ik) − 2N⁽²⁾ᵏ_i g_kj
/// − 2N⁽²⁾ᵏ_j g_ik + 2g_mk N⁽¹⁾ᵏ_j N⁽¹⁾ᵐ_i`.
pub fn nabla2_g<T: Real>(c: &ConnectionData<T>) -> Mat<T> {
    let n = c.dim();
    let two = T::lit(2.0);
    Mat::from_fn(n, n, |i, j| {
        c.s2g[(i, j)]
            - two * sum(n, |k| c.n1[(k, i)] * c.sg[(k, j)])
            - two * sum(n, |k| c.n1[(k, j)] * c.sg[(i, k)])
            - two * sum(n, |k| c.n2[(k, i)] * c.g[(k, j)])
            - two * sum(n, |k| c.n2[(k, j)] * c.g[(i, k)])
            + two * sum(n, |k| sum(n, |mm| c.g[(mm, k)] * c.n1[(k, j)] * c.n1[(mm, i)]))
    })
}

/// Lay out the lifted metric with blocks `(x,y2) = (y2,x) = g`,
/// `(y1,y1) = g`, `(x,y1) = (y1,x) = d1`, `(x,x) = ½ d2`.
fn lifted_blocks<T: Real>(g: &Mat<T>, d1: &Mat<T>, d2: &Mat<T>) -> Mat<T> {
    let n = g.rows();
    let mut out = Mat::zeros(3 * n, 3 * n);
    out.set_block(0, 2 * n, g);
    out.set_block(2 * n, 0, g);
    out.set_block(n, n, g);
    out.set_block(0, n, d1);
    out.set_block(n, 0, d1);
    out.set_block(0, 0, &d2.scale(T::lit(0.5)));
    out
}

/// `gᶜ` in the natural frame.
pub fn gc_metric<T: Real>(c: &ConnectionData<T>) -> Mat<T> {
    lifted_blocks(&c.g, &c.sg, &c.s2g)
}

/// `gᶜ` as it should read in the adapted frame: `S(g)` and `S²(g)` replaced
/// by `∇g` and `∇²g`.
pub fn gc_metric_adapted<T: Real>(c: &ConnectionData<T>) -> Mat<T> {
    lifted_blocks(&c.g, &nabla_g(c), &nabla2_g(c))
}

/// `‖Fᵀ gᶜ F − gᶜ_adapted‖∞`.
pub fn gc_congruence_defect<T: Real>(c: &ConnectionData<T>) -> T {
    AdaptedFrame::new(c).congruence(&gc_metric(c)).max_abs_diff(&gc_metric_adapted(c))
}

/// Expected adapted components of ω²: `2∇g_ij` on `dxⁱ ∧ δy1ʲ` and
/// `2g_ij` on `δy2ʲ ∧ dxⁱ`, zero elsewhere.
pub fn adapted_omega2_expected<T: Real>(c: &ConnectionData<T>) -> Mat<T> {
    let n = c.dim();
    let ng = nabla_g(c).scale(T::lit(2.0));
    let g2 = c.g.scale(T::lit(2.0));
    let mut e = Mat::zeros(3 * n, 3 * n);
    e.set_block(0, n, &ng);
    e.set_block(n, 0, &ng.transpose().scale(-T::one()));
    e.set_block(2 * n, 0, &g2.transpose());
    e.set_block(0, 2 * n, &g2.scale(-T::one()));
    e
}

/// Residuals of the defining conditions of the connection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionResiduals<T> {
    /// `ω²(δ/δxⁱ, δ/δy1ʲ) − 2gᶜ(δ/δxⁱ, δ/δy1ʲ)`.
    pub condition1: T,
    /// `max |∇²g|`.
    pub nabla2_g: T,
    /// ω² restricted to `h`, `v1` and `v2`.
    pub subbundles: T,
    /// Adapted components of ω² against the expected form.
    pub adapted_omega: T,
}

impl<T: Real> ConnectionResiduals<T> {
    pub fn max(&self) -> T {
        self.condition1.max(self.nabla2_g).max(self.subbundles).max(self.adapted_omega)
    }
}

/// Adapted components of ω² at the model point, `Fᵀ W F`.
pub fn adapted_omega2<T: Real>(m: &PointModel<T>, c: &ConnectionData<T>) -> Mat<T> {
    let w = curl(&theta2_jets(m)).map(|e| e.value());
    AdaptedFrame::new(c).congruence(&w)
}

pub fn connection_residuals<T: Real>(m: &PointModel<T>, c: &ConnectionData<T>) -> ConnectionResiduals<T> {
    let n = m.dim();
    let wa = adapted_omega2(m, c);
    let gca = AdaptedFrame::new(c).congruence(&gc_metric(c));
    let two = T::lit(2.0);
    let mut cond1 = T::zero();
    for i in 0..n {
        for j in 0..n {
            cond1 = cond1.max(Float::abs(wa[(i, n + j)] - two * gca[(i, n + j)]));
        }
    }
    let mut sub = T::zero();
    for b in Block::ALL {
        let o = b.offset(n);
        sub = sub.max(wa.block(o, o, n, n).norm_inf());
    }
    ConnectionResiduals {
        condition1: cond1,
        nabla2_g: nabla2_g(c).norm_inf(),
        subbundles: sub,
        adapted_omega: wa.max_abs_diff(&adapted_omega2_expected(c)),
    }
}

/// Build the connection at `p` and evaluate every defining condition.
pub fn verify_connection<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<ConnectionResiduals<T>> {
    let m = PointModel::new(l, p, 4, DEFAULT_REGULARITY_TOL)?;
    let c = ConnectionData::from_model(&m)?;
    Ok(connection_residuals(&m, &c))
}
