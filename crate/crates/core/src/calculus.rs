//! Partial derivatives of scalar fields on T²M.
//!
//! Production derivatives come from Taylor jets seeded on just the
//! coordinates a request touches. [`fd_oracle_partial`] is an independent
//! finite-difference estimate kept for cross-checking.

use num_traits::Float;

use crate::bundle::{Coord, Jet2Point};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{TaylorJet, MAX_ORDER};
use crate::scalar::{Real, Scalar};

/// A function of the flat coordinates `[x, y1, y2]` that can be evaluated
/// over any [`Scalar`].
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval<S: Scalar>(&self, z: &[S]) -> Result<S>;
}

/// An expression together with the dimension it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExpr {
    pub expr: Expr,
    pub n: usize,
}

impl FieldExpr {
    pub fn parse(src: &str, n: usize) -> Result<Self> {
        Ok(FieldExpr { expr: crate::expr::parse_expression(src, n)?, n })
    }
}

impl ScalarField for FieldExpr {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval<S: Scalar>(&self, z: &[S]) -> Result<S> {
        self.expr.eval(z)
    }
}

/// Multi-index over the `3n` coordinates with total order at most 4.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialRequest {
    exponents: Vec<u8>,
}

impl PartialRequest {
    pub fn new(exponents: Vec<u8>) -> Result<Self> {
        let total: usize = exponents.iter().map(|&e| e as usize).sum();
        if total > MAX_ORDER {
            return Err(Error::Invalid(format!("partial of order {total} exceeds {MAX_ORDER}")));
        }
        Ok(PartialRequest { exponents })
    }

    /// `∂^k / ∂c₁ … ∂c_k` for the listed coordinates (repeats allowed).
    pub fn of(coords: &[Coord], n: usize) -> Result<Self> {
        let mut e = vec![0u8; 3 * n];
        for c in coords {
            if c.index >= n {
                return Err(Error::Index { index: c.index + 1, dimension: n });
            }
            e[c.flat(n)] += 1;
        }
        Self::new(e)
    }

    pub fn exponents(&self) -> &[u8] {
        &self.exponents
    }

    pub fn order(&self) -> usize {
        self.exponents.iter().map(|&e| e as usize).sum()
    }

    /// Every multi-index of total order `1..=max_order` over `nvars` slots.
    pub fn all_up_to(nvars: usize, max_order: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut cur = vec![0u8; nvars];
        fn rec(out: &mut Vec<PartialRequest>, cur: &mut Vec<u8>, var: usize, left: usize, max: usize) {
            if var == cur.len() {
                let total: usize = cur.iter().map(|&e| e as usize).sum();
                if total > 0 {
                    out.push(PartialRequest { exponents: cur.clone() });
                }
                return;
            }
            for e in 0..=left.min(max) {
                cur[var] = e as u8;
                rec(out, cur, var + 1, left - e, max);
            }
            cur[var] = 0;
        }
        rec(&mut out, &mut cur, 0, max_order, max_order);
        out
    }
}

fn check_dim<F: ScalarField, T: Real>(f: &F, p: &Jet2Point<T>) -> Result<()> {
    if f.dim() != p.dim() {
        return Err(Error::Dimension { expected: f.dim(), found: p.dim() });
    }
    Ok(())
}

/// Exact partial derivatives, in request order.
pub fn partials<F: ScalarField, T: Real>(f: &F, p: &Jet2Point<T>, reqs: &[PartialRequest]) -> Result<Vec<T>> {
    check_dim(f, p)?;
    let nz = 3 * p.dim();
    if let Some(r) = reqs.iter().find(|r| r.exponents.len() != nz) {
        return Err(Error::Dimension { expected: nz, found: r.exponents.len() });
    }
    let seeded: Vec<usize> = (0..nz).filter(|&v| reqs.iter().any(|r| r.exponents[v] > 0)).collect();
    let order = reqs.iter().map(PartialRequest::order).max().unwrap_or(0);
    let jets = TaylorJet::seed(&p.flat(), &seeded, order);
    let v = f.eval(&jets)?;
    Ok(reqs
        .iter()
        .map(|r| {
            let local: Vec<u8> = seeded.iter().map(|&s| r.exponents[s]).collect();
            v.partial(&local).expect("request within seeded order")
        })
        .collect())
}

pub fn partial<F: ScalarField, T: Real>(f: &F, p: &Jet2Point<T>, req: &PartialRequest) -> Result<T> {
    Ok(partials(f, p, std::slice::from_ref(req))?[0])
}

/// Base step of the finite-difference oracle for a partial of total order
/// `k`, before scaling by `max(1, |z|)`. Higher orders divide by `h^k`, so
/// the step grows with the order to keep rounding below truncation.
pub fn fd_base_step(order: usize) -> f64 {
    match order {
        0..=2 => 1e-2,
        3 => 2e-2,
        _ => 1e-1,
    }
}

/// Central-difference weights `(offset, weight)` for the `m`-th derivative
/// with unit step, all second-order accurate.
fn stencil(m: u8) -> &'static [(i32, f64)] {
    match m {
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => unreachable!("order checked by PartialRequest"),
    }
}

fn fd_once<F: ScalarField>(f: &F, z: &[f64], exps: &[u8], steps: &[f64]) -> Result<f64> {
    let vars: Vec<usize> = (0..z.len()).filter(|&v| exps[v] > 0).collect();
    let mut acc = 0.0;
    let mut idx = vec![0usize; vars.len()];
    let mut zz = z.to_vec();
    'outer: loop {
        let mut w = 1.0;
        for (slot, &v) in vars.iter().enumerate() {
            let (off, wt) = stencil(exps[v])[idx[slot]];
            zz[v] = z[v] + off as f64 * steps[v];
            w *= wt;
        }
        acc += w * f.eval(&zz)?;
        for slot in 0..vars.len() {
            idx[slot] += 1;
            if idx[slot] < stencil(exps[vars[slot]]).len() {
                continue 'outer;
            }
            idx[slot] = 0;
        }
        break;
    }
    let denom: f64 = vars.iter().map(|&v| steps[v].powi(exps[v] as i32)).product();
    Ok(acc / denom)
}

/// Finite-difference estimate of a partial: tensor-product central
/// stencils at steps `h, h/2, h/4` with two levels of Richardson
/// extrapolation (`h = fd_base_step(k) · max(1, |z_v|)` per coordinate).
/// Evaluated in `f64` whatever the caller's scalar type.
pub fn fd_oracle_partial<F: ScalarField, T: Real>(f: &F, p: &Jet2Point<T>, req: &PartialRequest) -> Result<f64> {
    check_dim(f, p)?;
    let z: Vec<f64> = p.flat().iter().map(|v| v.to_f64_lossy()).collect();
    if req.exponents.len() != z.len() {
        return Err(Error::Dimension { expected: z.len(), found: req.exponents.len() });
    }
    if req.order() == 0 {
        return f.eval(&z);
    }
    let base = fd_base_step(req.order());
    let steps = |scale: f64| -> Vec<f64> { z.iter().map(|v| base * scale * v.abs().max(1.0)).collect() };
    let d0 = fd_once(f, &z, &req.exponents, &steps(1.0))?;
    let d1 = fd_once(f, &z, &req.exponents, &steps(0.5))?;
    let d2 = fd_once(f, &z, &req.exponents, &steps(0.25))?;
    let r0 = (4.0 * d1 - d0) / 3.0;
    let r1 = (4.0 * d2 - d1) / 3.0;
    Ok((16.0 * r1 - r0) / 15.0)
}

/// Tulczyjew operator `d_T f = y1ⁱ ∂f/∂xⁱ + 2 y2ⁱ ∂f/∂y1ⁱ`.
pub fn tulczyjew_dt<F: ScalarField, T: Real>(f: &F, p: &Jet2Point<T>) -> Result<T> {
    let n = p.dim();
    let mut v = vec![T::zero(); 3 * n];
    for i in 0..n {
        v[i] = p.y1()[i];
        v[n + i] = T::lit(2.0) * p.y2()[i];
    }
    directional_derivative(f, p, &v)
}

/// `Σ v^μ ∂f/∂z^μ`.
pub fn directional_derivative<F: ScalarField, T: Real>(f: &F, p: &Jet2Point<T>, v: &[T]) -> Result<T> {
    check_dim(f, p)?;
    let nz = 3 * p.dim();
    let seeded: Vec<usize> = (0..nz).collect();
    let jets = TaylorJet::seed(&p.flat(), &seeded, 1);
    let fv = f.eval(&jets)?;
    Ok((0..nz).map(|k| v[k] * fv.gradient_entry(k)).fold(T::zero(), |a, b| a + b))
}

/// Relative agreement used when comparing jets against the oracle:
/// `|a − b| / max(1, |a|)`.
pub fn relative_gap<T: Real>(a: T, b: T) -> T {
    Float::abs(a - b) / Float::abs(a).max(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], y1: &[f64], y2: &[f64]) -> Jet2Point<f64> {
        Jet2Point::new(x.to_vec(), y1.to_vec(), y2.to_vec()).unwrap()
    }

    #[test]
    fn quadratic_hessian() {
        let f = FieldExpr::parse("y2_1^2", 1).unwrap();
        let r = PartialRequest::of(&[Coord::y2(0), Coord::y2(0)], 1).unwrap();
        for y in [-3.0, 0.0, 5.0] {
            assert_eq!(partial(&f, &pt(&[1.0], &[2.0], &[y]), &r).unwrap(), 2.0);
        }
    }

    #[test]
    fn conformal_third_partial() {
        let f = FieldExpr::parse("exp(2*x_1)*y2_1^2", 1).unwrap();
        let r = PartialRequest::of(&[Coord::x(0), Coord::y2(0), Coord::y2(0)], 1).unwrap();
        let v = partial(&f, &pt(&[0.0], &[0.3], &[0.7]), &r).unwrap();
        assert!((v - 4.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_examples() {
        let f = FieldExpr::parse("x_1*y1_1", 1).unwrap();
        let r = PartialRequest::of(&[Coord::x(0), Coord::y1(0)], 1).unwrap();
        let v = fd_oracle_partial(&f, &pt(&[0.4], &[-1.3], &[2.0]), &r).unwrap();
        assert!((v - 1.0).abs() < 1e-8);

        let f = FieldExpr::parse("y2_1^4", 1).unwrap();
        let r = PartialRequest::of(&[Coord::y2(0); 4], 1).unwrap();
        let v = fd_oracle_partial(&f, &pt(&[0.0], &[0.0], &[1.0]), &r).unwrap();
        assert!((v - 24.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn tulczyjew_examples() {
        let p = pt(&[2.0], &[3.0], &[5.0]);
        let x = FieldExpr::parse("x_1", 1).unwrap();
        let y1 = FieldExpr::parse("y1_1", 1).unwrap();
        let xy = FieldExpr::parse("x_1*y1_1", 1).unwrap();
        assert_eq!(tulczyjew_dt(&x, &p).unwrap(), 3.0);
        assert_eq!(tulczyjew_dt(&y1, &p).unwrap(), 10.0);
        assert_eq!(tulczyjew_dt(&xy, &p).unwrap(), 29.0);
    }

    #[test]
    fn rejects_high_order() {
        assert!(PartialRequest::new(vec![5, 0, 0]).is_err());
        assert!(PartialRequest::of(&[Coord::x(0); 5], 1).is_err());
    }

    #[test]
    fn enumerates_multi_indices() {
        // C(3 + 4, 4) − 1 = 34 multi-indices of order 1..=4 over 3 slots.
        assert_eq!(PartialRequest::all_up_to(3, 4).len(), 34);
        assert_eq!(PartialRequest::all_up_to(6, 2).len(), 27);
    }
}
