//! Coordinates on the second-order tangent bundle.
//!
//! A point carries base coordinates `x` and the jet coordinates `y1`, `y2`
//! (first derivative and half the second derivative of a curve through the
//! point). Tangent and cotangent vectors are stored in the natural frame,
//! block by block. The flat ordering used throughout the crate is
//! `[x_1..x_n, y1_1..y1_n, y2_1..y2_n]`.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which coordinate block a flat index belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    X,
    Y1,
    Y2,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::X, Block::Y1, Block::Y2];

    pub fn offset(self, n: usize) -> usize {
        match self {
            Block::X => 0,
            Block::Y1 => n,
            Block::Y2 => 2 * n,
        }
    }

    pub fn prefix(self) -> &'static str {
        match self {
            Block::X => "x",
            Block::Y1 => "y1",
            Block::Y2 => "y2",
        }
    }
}

/// A single coordinate function, 0-based component index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub block: Block,
    pub index: usize,
}

impl Coord {
    pub fn x(index: usize) -> Self {
        Coord { block: Block::X, index }
    }
    pub fn y1(index: usize) -> Self {
        Coord { block: Block::Y1, index }
    }
    pub fn y2(index: usize) -> Self {
        Coord { block: Block::Y2, index }
    }

    pub fn flat(self, n: usize) -> usize {
        self.block.offset(n) + self.index
    }

    pub fn from_flat(flat: usize, n: usize) -> Self {
        let block = Block::ALL[flat / n];
        Coord { block, index: flat % n }
    }
}

/// A point of T²M in the single global chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2Point<T> {
    x: Vec<T>,
    y1: Vec<T>,
    y2: Vec<T>,
}

impl<T: Real> Jet2Point<T> {
    pub fn new(x: Vec<T>, y1: Vec<T>, y2: Vec<T>) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::Invalid("dimension must be at least 1".into()));
        }
        for block in [&y1, &y2] {
            if block.len() != n {
                return Err(Error::Dimension { expected: n, found: block.len() });
            }
        }
        if x.iter().chain(&y1).chain(&y2).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("point has non-finite components".into()));
        }
        Ok(Jet2Point { x, y1, y2 })
    }

    /// The zero-section point over `x`.
    pub fn over(x: Vec<T>) -> Result<Self> {
        let n = x.len();
        Self::new(x, vec![T::zero(); n], vec![T::zero(); n])
    }

    pub fn from_flat(flat: &[T], n: usize) -> Result<Self> {
        if flat.len() != 3 * n {
            return Err(Error::Dimension { expected: 3 * n, found: flat.len() });
        }
        Self::new(flat[..n].to_vec(), flat[n..2 * n].to_vec(), flat[2 * n..].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }
    pub fn y1(&self) -> &[T] {
        &self.y1
    }
    pub fn y2(&self) -> &[T] {
        &self.y2
    }

    pub fn flat(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(3 * self.dim());
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.y1);
        v.extend_from_slice(&self.y2);
        v
    }

    pub fn get(&self, c: Coord) -> T {
        match c.block {
            Block::X => self.x[c.index],
            Block::Y1 => self.y1[c.index],
            Block::Y2 => self.y2[c.index],
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.flat().iter().zip(other.flat()).fold(T::zero(), |m, (&a, b)| m.max(Float::abs(a - b)))
    }
}

/// Tangent vector at a point, natural-frame components by block.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVecT2M<T> {
    pub base: Jet2Point<T>,
    pub cx: Vec<T>,
    pub cy1: Vec<T>,
    pub cy2: Vec<T>,
}

impl<T: Real> TangentVecT2M<T> {
    pub fn new(base: Jet2Point<T>, cx: Vec<T>, cy1: Vec<T>, cy2: Vec<T>) -> Result<Self> {
        let n = base.dim();
        for b in [&cx, &cy1, &cy2] {
            if b.len() != n {
                return Err(Error::Dimension { expected: n, found: b.len() });
            }
        }
        if cx.iter().chain(&cy1).chain(&cy2).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("tangent vector has non-finite components".into()));
        }
        Ok(TangentVecT2M { base, cx, cy1, cy2 })
    }

    pub fn zero(base: Jet2Point<T>) -> Self {
        let n = base.dim();
        TangentVecT2M { base, cx: vec![T::zero(); n], cy1: vec![T::zero(); n], cy2: vec![T::zero(); n] }
    }

    pub fn from_flat(base: Jet2Point<T>, flat: &[T]) -> Result<Self> {
        let n = base.dim();
        if flat.len() != 3 * n {
            return Err(Error::Dimension { expected: 3 * n, found: flat.len() });
        }
        Self::new(base, flat[..n].to_vec(), flat[n..2 * n].to_vec(), flat[2 * n..].to_vec())
    }

    pub fn flat(&self) -> Vec<T> {
        [self.cx.as_slice(), &self.cy1, &self.cy2].concat()
    }
}

/// Cotangent vector at a point, components on `dx`, `dy1`, `dy2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentVecT2M<T> {
    pub base: Jet2Point<T>,
    pub ax: Vec<T>,
    pub ay1: Vec<T>,
    pub ay2: Vec<T>,
}

impl<T: Real> CotangentVecT2M<T> {
    pub fn new(base: Jet2Point<T>, ax: Vec<T>, ay1: Vec<T>, ay2: Vec<T>) -> Result<Self> {
        let n = base.dim();
        for b in [&ax, &ay1, &ay2] {
            if b.len() != n {
                return Err(Error::Dimension { expected: n, found: b.len() });
            }
        }
        if ax.iter().chain(&ay1).chain(&ay2).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("covector has non-finite components".into()));
        }
        Ok(CotangentVecT2M { base, ax, ay1, ay2 })
    }

    pub fn from_flat(base: Jet2Point<T>, flat: &[T]) -> Result<Self> {
        let n = base.dim();
        if flat.len() != 3 * n {
            return Err(Error::Dimension { expected: 3 * n, found: flat.len() });
        }
        Self::new(base, flat[..n].to_vec(), flat[n..2 * n].to_vec(), flat[2 * n..].to_vec())
    }

    pub fn flat(&self) -> Vec<T> {
        [self.ax.as_slice(), &self.ay1, &self.ay2].concat()
    }

    /// `ω(v)`.
    pub fn pair(&self, v: &TangentVecT2M<T>) -> T {
        self.flat().iter().zip(v.flat()).map(|(&a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.flat().iter().zip(other.flat()).fold(T::zero(), |m, (&a, b)| m.max(Float::abs(a - b)))
    }
}

/// Tangent structure `J`: `(cx, cy1, cy2) ↦ (0, cx, cy1)`.
pub fn apply_j<T: Real>(v: &TangentVecT2M<T>) -> TangentVecT2M<T> {
    let n = v.base.dim();
    TangentVecT2M { base: v.base.clone(), cx: vec![T::zero(); n], cy1: v.cx.clone(), cy2: v.cy1.clone() }
}

/// Cotangent structure `J*`: `(ax, ay1, ay2) ↦ (ay1, ay2, 0)`, the adjoint of `J`.
pub fn apply_jstar<T: Real>(w: &CotangentVecT2M<T>) -> CotangentVecT2M<T> {
    let n = w.base.dim();
    CotangentVecT2M { base: w.base.clone(), ax: w.ay1.clone(), ay1: w.ay2.clone(), ay2: vec![T::zero(); n] }
}

/// Liouville field `𝔺₂ = y1·∂/∂y1 + 2 y2·∂/∂y2`.
pub fn liouville_c2<T: Real>(p: &Jet2Point<T>) -> TangentVecT2M<T> {
    let two = T::one() + T::one();
    TangentVecT2M {
        base: p.clone(),
        cx: vec![T::zero(); p.dim()],
        cy1: p.y1.clone(),
        cy2: p.y2.iter().map(|&v| two * v).collect(),
    }
}

/// Liouville field `𝔺₁ = J(𝔺₂) = y1·∂/∂y2`.
pub fn liouville_c1<T: Real>(p: &Jet2Point<T>) -> TangentVecT2M<T> {
    TangentVecT2M { base: p.clone(), cx: vec![T::zero(); p.dim()], cy1: vec![T::zero(); p.dim()], cy2: p.y1.clone() }
}

/// `3n × 3n` matrix of `J` in the natural frame.
pub fn j_matrix<T: Real>(n: usize) -> crate::linalg::Mat<T> {
    crate::linalg::Mat::from_fn(3 * n, 3 * n, |r, c| if r >= n && c + n == r { T::one() } else { T::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rank;

    fn pt(x: &[f64], y1: &[f64], y2: &[f64]) -> Jet2Point<f64> {
        Jet2Point::new(x.to_vec(), y1.to_vec(), y2.to_vec()).unwrap()
    }

    #[test]
    fn j_shifts_blocks() {
        let p = pt(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]);
        let v = TangentVecT2M::new(p.clone(), vec![1.0, 0.0], vec![0.0; 2], vec![0.0; 2]).unwrap();
        let jv = apply_j(&v);
        assert_eq!(jv.cy1, vec![1.0, 0.0]);
        assert_eq!(jv.cx, vec![0.0, 0.0]);
        let w = TangentVecT2M::new(p, vec![0.0; 2], vec![0.0; 2], vec![1.0, 0.0]).unwrap();
        assert_eq!(apply_j(&w).flat(), vec![0.0; 6]);
    }

    #[test]
    fn jstar_is_adjoint_and_kills_dx_after_two() {
        let p = pt(&[0.1, 0.2], &[0.3, 0.4], &[0.5, 0.6]);
        let w = CotangentVecT2M::new(p.clone(), vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]).unwrap();
        let v = TangentVecT2M::new(p, vec![0.7, -0.2], vec![1.5, 0.25], vec![-3.0, 2.0]).unwrap();
        assert_eq!(apply_jstar(&w).pair(&v) - w.pair(&apply_j(&v)), 0.0);
        let w2 = apply_jstar(&apply_jstar(&w));
        assert_eq!(w2.ax, vec![5.0, 6.0]);
        assert_eq!(w2.ay1, vec![0.0, 0.0]);
        assert_eq!(w2.ay2, vec![0.0, 0.0]);
    }

    #[test]
    fn liouville_fields() {
        let p = pt(&[7.0], &[3.0], &[5.0]);
        assert_eq!(liouville_c2(&p).flat(), vec![0.0, 3.0, 10.0]);
        assert_eq!(liouville_c1(&p).flat(), vec![0.0, 0.0, 3.0]);
        let z = pt(&[7.0], &[0.0], &[0.0]);
        assert_eq!(liouville_c2(&z).flat(), vec![0.0; 3]);
        assert_eq!(liouville_c1(&z).flat(), vec![0.0; 3]);
    }

    #[test]
    fn j_cubed_vanishes_and_image_kernel() {
        let n = 3;
        let j = j_matrix::<f64>(n);
        let j2 = j.matmul(&j);
        let j3 = j2.matmul(&j);
        assert_eq!(j3.norm_inf(), 0.0);
        assert_eq!(rank(&j, 1e-12), 2 * n);
        assert_eq!(rank(&j2, 1e-12), n);
        // Im J² = Ker J: J·J² = 0 and rank J² = 3n − rank J.
        assert_eq!(j.matmul(&j2).norm_inf(), 0.0);
        assert_eq!(rank(&j2, 1e-12), 3 * n - rank(&j, 1e-12));
    }

    #[test]
    fn rejects_bad_points() {
        assert!(Jet2Point::<f64>::new(vec![], vec![], vec![]).is_err());
        assert!(Jet2Point::new(vec![1.0], vec![1.0, 2.0], vec![0.0]).is_err());
        assert!(Jet2Point::new(vec![f64::NAN], vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn coord_flat_roundtrip() {
        for flat in 0..9 {
            assert_eq!(Coord::from_flat(flat, 3).flat(3), flat);
        }
        assert_eq!(Coord::y2(1).flat(3), 7);
    }
}
