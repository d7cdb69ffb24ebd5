//! Taylor expansion of a Lagrangian and its derived quantities at a point.
//!
//! The Lagrangian is expanded to order `K` in all `3n` coordinates. Each
//! derived quantity is again a jet, valid to a lower order:
//!
//! | quantity            | valid order |
//! |---------------------|-------------|
//! | `L`                 | `K`         |
//! | `∂L/∂z`             | `K − 1`     |
//! | `g`, `g⁻¹`, `G`, `S`| `K − 2`     |
//!
//! so `K = 2` gives the semispray at the point, `K = 3` its first
//! derivatives, and `K = 4` everything the connection needs.

use crate::bundle::{Block, Coord, Jet2Point};
use crate::calculus::ScalarField;
use crate::error::{Error, Result};
use crate::jet::{TaylorJet, MAX_ORDER};
use crate::lagrangian::{regular_metric, LagrangianSpec, Metric};
use crate::linalg::Mat;
use crate::scalar::{Real, Scalar};

#[derive(Debug, Clone)]
pub struct PointModel<T: Real> {
    n: usize,
    order: usize,
    point: Jet2Point<T>,
    z: Vec<TaylorJet<T>>,
    l: TaylorJet<T>,
    dl: Vec<TaylorJet<T>>,
    g: Mat<TaylorJet<T>>,
    ginv: Mat<TaylorJet<T>>,
    metric: Metric<T>,
    coeffs: Vec<TaylorJet<T>>,
    s: Vec<TaylorJet<T>>,
}

impl<T: Real> PointModel<T> {
    pub fn new(l: &LagrangianSpec, p: &Jet2Point<T>, order: usize, tol: f64) -> Result<Self> {
        let n = p.dim();
        if l.dim() != n {
            return Err(Error::Dimension { expected: l.dim(), found: n });
        }
        if !(2..=MAX_ORDER).contains(&order) {
            return Err(Error::Invalid(format!("expansion order {order} outside 2..={MAX_ORDER}")));
        }
        let seeded: Vec<usize> = (0..3 * n).collect();
        let z = TaylorJet::seed(&p.flat(), &seeded, order);
        let lj = l.eval(&z)?;
        let dl: Vec<TaylorJet<T>> = (0..3 * n).map(|k| lj.derivative(k)).collect();
        let half = T::lit(0.5);
        let g = Mat::from_fn(n, n, |i, j| dl[2 * n + i].derivative(2 * n + j).scale(half)).symmetrize();
        let metric = regular_metric(g.map(|e| e.value()), tol)?;
        let ginv = g.inverse().ok_or(Error::DegenerateLagrangian { rcond: 0.0, tolerance: tol })?;

        // 3Gʲ = ½ gʲⁱ [d_T(∂L/∂y2ⁱ) − ∂L/∂y1ⁱ]
        let bracket: Vec<TaylorJet<T>> = (0..n)
            .map(|i| {
                let l2i = &dl[2 * n + i];
                let mut acc = -&dl[n + i];
                for k in 0..n {
                    acc = acc + &z[n + k] * &l2i.derivative(k);
                    acc = acc + (&z[2 * n + k] * &l2i.derivative(n + k)).scale(T::lit(2.0));
                }
                acc
            })
            .collect();
        let sixth = T::lit(1.0 / 6.0);
        let coeffs: Vec<TaylorJet<T>> = (0..n)
            .map(|j| {
                let mut acc = TaylorJet::constant(T::zero());
                for (i, b) in bracket.iter().enumerate() {
                    acc = acc + &ginv[(j, i)] * b;
                }
                acc.scale(sixth)
            })
            .collect();
        let mut model = PointModel { n, order, point: p.clone(), z, l: lj, dl, g, ginv, metric, coeffs, s: Vec::new() };
        model.rebuild_semispray();
        Ok(model)
    }

    fn rebuild_semispray(&mut self) {
        let n = self.n;
        let mut s = Vec::with_capacity(3 * n);
        s.extend(self.z[n..2 * n].iter().cloned());
        s.extend(self.z[2 * n..].iter().map(|y| y.scale(T::lit(2.0))));
        s.extend(self.coeffs.iter().map(|g| g.scale(T::lit(-3.0))));
        self.s = s;
    }

    /// Replace `G` by `G + δ` (for sensitivity tests); `δ` is typically
    /// built from [`PointModel::coord`] jets.
    pub fn with_coeff_perturbation(&self, delta: &[TaylorJet<T>]) -> Self {
        let mut m = self.clone();
        for (g, d) in m.coeffs.iter_mut().zip(delta) {
            *g = &*g + d;
        }
        m.rebuild_semispray();
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn point(&self) -> &Jet2Point<T> {
        &self.point
    }

    /// Coordinate function as a jet.
    pub fn coord(&self, c: Coord) -> &TaylorJet<T> {
        &self.z[c.flat(self.n)]
    }

    pub fn coords(&self) -> &[TaylorJet<T>] {
        &self.z
    }

    pub fn lagrangian(&self) -> &TaylorJet<T> {
        &self.l
    }

    /// `∂L/∂z^μ` for flat index `μ`.
    pub fn dl(&self, mu: usize) -> &TaylorJet<T> {
        &self.dl[mu]
    }

    /// `∂L/∂c`.
    pub fn dl_at(&self, c: Coord) -> &TaylorJet<T> {
        &self.dl[c.flat(self.n)]
    }

    /// Second partial `∂²L/∂a∂b` at the point.
    pub fn d2l(&self, a: Coord, b: Coord) -> T {
        self.dl[a.flat(self.n)].gradient_entry(b.flat(self.n))
    }

    pub fn metric(&self) -> &Metric<T> {
        &self.metric
    }

    pub fn metric_jets(&self) -> &Mat<TaylorJet<T>> {
        &self.g
    }

    pub fn inverse_metric_jets(&self) -> &Mat<TaylorJet<T>> {
        &self.ginv
    }

    pub fn g_inverse(&self) -> Mat<T> {
        self.metric.inverse.clone().expect("regular by construction")
    }

    /// Semispray coefficients `Gⁱ` as jets.
    pub fn coeff_jets(&self) -> &[TaylorJet<T>] {
        &self.coeffs
    }

    pub fn coeffs(&self) -> Vec<T> {
        self.coeffs.iter().map(|g| g.value()).collect()
    }

    /// Semispray components `(y1, 2 y2, −3G)` as jets.
    pub fn semispray_jets(&self) -> &[TaylorJet<T>] {
        &self.s
    }

    pub fn semispray(&self) -> Vec<T> {
        self.s.iter().map(|c| c.value()).collect()
    }

    /// `S(f) = S^μ ∂f/∂z^μ` as a jet one order below `f` (and no higher
    /// than `S` itself).
    pub fn apply_s(&self, f: &TaylorJet<T>) -> TaylorJet<T> {
        let mut acc = TaylorJet::constant(T::zero());
        if f.layout().is_some() {
            for (mu, s) in self.s.iter().enumerate() {
                acc = acc + s * &f.derivative(mu);
            }
        }
        acc
    }

    /// Expand a field on the coordinate jets of this model.
    pub fn expand<F: ScalarField>(&self, f: &F) -> Result<TaylorJet<T>> {
        if f.dim() != self.n {
            return Err(Error::Dimension { expected: self.n, found: f.dim() });
        }
        f.eval(&self.z)
    }

    /// Flat indices of one block.
    pub fn block_range(&self, b: Block) -> std::ops::Range<usize> {
        b.offset(self.n)..b.offset(self.n) + self.n
    }

    pub(crate) fn require_order(&self, needed: usize, what: &str) -> Result<()> {
        if self.order < needed {
            return Err(Error::Invalid(format!("{what} needs expansion order {needed}, model has {}", self.order)));
        }
        Ok(())
    }
}
