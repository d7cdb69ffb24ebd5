//! Truncated multivariate Taylor arithmetic.
//!
//! A [`TaylorJet`] stores the Taylor coefficients `c_a = ∂^a f / a!` of a
//! function of `m` seeded variables for every multi-index `|a| ≤ order`.
//! Arithmetic and the elementary functions propagate the coefficients
//! exactly (up to rounding) by truncated composition, so mixed partials are
//! symmetric by construction.
//!
//! Each jet tracks the order up to which its coefficients are valid. Taking a
//! partial derivative lowers it by one and products keep the smaller of the
//! two, so a pipeline that differentiates too often fails loudly instead of
//! returning truncated garbage.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{Float, Zero};

use crate::scalar::{Real, Scalar};

/// Highest derivative order supported by the substrate.
pub const MAX_ORDER: usize = 4;

const CONST_ORDER: u8 = u8::MAX;

/// Monomial bookkeeping shared by every jet over the same variable count and
/// maximum order.
pub struct Layout {
    nvars: usize,
    max_order: usize,
    monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `degree_end[d]` is one past the last monomial of degree `d`.
    degree_end: Vec<usize>,
    /// Product triples `(i, j, k)` with `deg k = deg i + deg j`, sorted by `deg k`.
    mul: Vec<(u32, u32, u32)>,
    /// Number of product triples whose result degree is `≤ d`.
    mul_end: Vec<usize>,
    /// Per-variable `(src, dst, factor)` with `factor = a_v` of the source.
    diff: Vec<Vec<(u32, u32, u32)>>,
    /// `a!` per monomial.
    factorial: Vec<f64>,
}

impl fmt::Debug for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Layout")
            .field("nvars", &self.nvars)
            .field("max_order", &self.max_order)
            .field("len", &self.monomials.len())
            .finish()
    }
}

impl Layout {
    /// Shared layout for `nvars` variables up to `max_order`.
    ///
    /// # Panics
    /// If `max_order > MAX_ORDER`.
    pub fn shared(nvars: usize, max_order: usize) -> Arc<Layout> {
        assert!(max_order <= MAX_ORDER, "jet order {max_order} exceeds {MAX_ORDER}");
        type Cache = Mutex<HashMap<(usize, usize), Arc<Layout>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("layout cache poisoned");
        guard.entry((nvars, max_order)).or_insert_with(|| Arc::new(Layout::build(nvars, max_order))).clone()
    }

    fn build(nvars: usize, max_order: usize) -> Layout {
        let mut monomials: Vec<Vec<u8>> = Vec::new();
        let mut degree_end = Vec::with_capacity(max_order + 1);
        for d in 0..=max_order {
            let mut cur = vec![0u8; nvars];
            push_degree(&mut monomials, &mut cur, 0, d);
            degree_end.push(monomials.len());
        }
        let index: HashMap<Vec<u8>, usize> = monomials.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let degree = |m: &[u8]| m.iter().map(|&e| e as usize).sum::<usize>();

        let mut mul = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            let da = degree(a);
            for (j, b) in monomials.iter().enumerate() {
                if da + degree(b) > max_order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul.push((i as u32, j as u32, index[&sum] as u32));
            }
        }
        mul.sort_by_key(|&(_, _, k)| k);
        let mut mul_end = vec![0; max_order + 1];
        for (d, end) in mul_end.iter_mut().enumerate() {
            *end = mul.partition_point(|&(_, _, k)| (k as usize) < degree_end[d]);
        }

        let diff = (0..nvars)
            .map(|v| {
                let mut table = Vec::new();
                for (src, a) in monomials.iter().enumerate() {
                    if a[v] == 0 {
                        continue;
                    }
                    let mut lower = a.clone();
                    lower[v] -= 1;
                    table.push((src as u32, index[&lower] as u32, a[v] as u32));
                }
                table
            })
            .collect();

        let factorial =
            monomials.iter().map(|m| m.iter().map(|&e| (1..=e as u32).product::<u32>() as f64).product()).collect();

        Layout { nvars, max_order, monomials, index, degree_end, mul, mul_end, diff, factorial }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomial_index(&self, exponents: &[u8]) -> Option<usize> {
        self.index.get(exponents).copied()
    }

    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monomials
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, cur: &mut [u8], var: usize, remaining: usize) {
    if var + 1 == cur.len() {
        cur[var] = remaining as u8;
        out.push(cur.to_vec());
        cur[var] = 0;
        return;
    }
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for e in (0..=remaining).rev() {
        cur[var] = e as u8;
        push_degree(out, cur, var + 1, remaining - e);
    }
    cur[var] = 0;
}

/// Truncated Taylor expansion of a scalar function at a point.
#[derive(Clone)]
pub struct TaylorJet<T> {
    layout: Option<Arc<Layout>>,
    order: u8,
    coeffs: Vec<T>,
}

impl<T: Real> fmt::Debug for TaylorJet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.layout {
            None => write!(f, "TaylorJet::const({})", self.coeffs[0]),
            Some(l) => f
                .debug_struct("TaylorJet")
                .field("nvars", &l.nvars)
                .field("order", &self.order)
                .field("value", &self.coeffs[0])
                .finish(),
        }
    }
}

impl<T: Real> TaylorJet<T> {
    pub fn constant(v: T) -> Self {
        TaylorJet { layout: None, order: CONST_ORDER, coeffs: vec![v] }
    }

    /// The coordinate function `z_var` expanded at `value`.
    pub fn variable(layout: &Arc<Layout>, var: usize, value: T) -> Self {
        assert!(var < layout.nvars, "variable {var} out of range");
        let mut coeffs = vec![T::zero(); layout.len()];
        coeffs[0] = value;
        if layout.max_order >= 1 {
            let mut e = vec![0u8; layout.nvars];
            e[var] = 1;
            coeffs[layout.index[&e]] = T::one();
        }
        TaylorJet { layout: Some(layout.clone()), order: layout.max_order as u8, coeffs }
    }

    /// Expand every entry of `values` at order `order`, seeding the
    /// positions listed in `seeded` as independent variables (in that order)
    /// and treating the rest as constants.
    pub fn seed(values: &[T], seeded: &[usize], order: usize) -> Vec<Self> {
        let layout = Layout::shared(seeded.len(), order);
        let mut out: Vec<Self> = values.iter().map(|&v| Self::constant(v)).collect();
        for (var, &pos) in seeded.iter().enumerate() {
            out[pos] = Self::variable(&layout, var, values[pos]);
        }
        out
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    /// Order up to which the stored coefficients are valid; `None` for a
    /// constant (valid to every order).
    pub fn order(&self) -> Option<usize> {
        if self.layout.is_none() {
            None
        } else {
            Some(self.order as usize)
        }
    }

    pub fn layout(&self) -> Option<&Arc<Layout>> {
        self.layout.as_ref()
    }

    /// Partial derivative `∂^a f` at the expansion point for an exponent
    /// vector `a`, or `None` if `|a|` exceeds the valid order.
    pub fn partial(&self, exponents: &[u8]) -> Option<T> {
        let total: usize = exponents.iter().map(|&e| e as usize).sum();
        match &self.layout {
            None => Some(if total == 0 { self.coeffs[0] } else { T::zero() }),
            Some(l) => {
                if total > self.order as usize {
                    return None;
                }
                let idx = l.monomial_index(exponents)?;
                Some(self.coeffs[idx] * T::lit(l.factorial[idx]))
            }
        }
    }

    /// First partial `∂f/∂z_var` as a value.
    pub fn gradient_entry(&self, var: usize) -> T {
        match &self.layout {
            None => T::zero(),
            Some(l) => {
                assert!(self.order >= 1, "first derivative of an order-0 jet");
                let mut e = vec![0u8; l.nvars];
                e[var] = 1;
                self.coeffs[l.index[&e]]
            }
        }
    }

    /// The jet of `∂f/∂z_var`, valid to one order less.
    ///
    /// # Panics
    /// If the jet is already truncated at order zero.
    pub fn derivative(&self, var: usize) -> Self {
        let Some(l) = &self.layout else {
            return Self::constant(T::zero());
        };
        assert!(self.order >= 1, "derivative of an order-0 jet: expansion order too low");
        let order = self.order - 1;
        let end = l.degree_end[order as usize];
        let mut coeffs = vec![T::zero(); l.len()];
        for &(src, dst, factor) in &l.diff[var] {
            if (dst as usize) < end {
                coeffs[dst as usize] += self.coeffs[src as usize] * T::lit(factor as f64);
            }
        }
        TaylorJet { layout: Some(l.clone()), order, coeffs }
    }

    /// Drop validity beyond `order` (no-op if already lower).
    pub fn truncate(&self, order: usize) -> Self {
        let Some(l) = &self.layout else { return self.clone() };
        let order = order.min(self.order as usize);
        let mut out = self.clone();
        for c in out.coeffs.iter_mut().skip(l.degree_end[order]) {
            *c = T::zero();
        }
        out.order = order as u8;
        out
    }

    fn valid_end(&self) -> usize {
        match &self.layout {
            None => 1,
            Some(l) => l.degree_end[self.order as usize],
        }
    }

    fn check_compatible(a: &Arc<Layout>, b: &Arc<Layout>) {
        assert!(
            Arc::ptr_eq(a, b) || (a.nvars == b.nvars && a.max_order == b.max_order),
            "mixing jets over different layouts"
        );
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Self {
        match (&self.layout, &rhs.layout) {
            (None, None) => Self::constant(f(self.coeffs[0], rhs.coeffs[0])),
            (Some(_), None) => {
                let mut out = self.clone();
                out.coeffs[0] = f(self.coeffs[0], rhs.coeffs[0]);
                for c in out.coeffs.iter_mut().skip(1) {
                    *c = f(*c, T::zero());
                }
                out
            }
            (None, Some(_)) => {
                let mut out = rhs.clone();
                out.coeffs[0] = f(self.coeffs[0], rhs.coeffs[0]);
                for c in out.coeffs.iter_mut().skip(1) {
                    *c = f(T::zero(), *c);
                }
                out
            }
            (Some(la), Some(lb)) => {
                Self::check_compatible(la, lb);
                let order = self.order.min(rhs.order);
                let end = la.degree_end[order as usize];
                let mut coeffs = vec![T::zero(); la.len()];
                for (k, c) in coeffs.iter_mut().enumerate().take(end) {
                    *c = f(self.coeffs[k], rhs.coeffs[k]);
                }
                TaylorJet { layout: Some(la.clone()), order, coeffs }
            }
        }
    }

    fn map_coeffs(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        let end = out.valid_end();
        for c in out.coeffs.iter_mut().take(end) {
            *c = f(*c);
        }
        out
    }

    fn mul_jet(&self, rhs: &Self) -> Self {
        match (&self.layout, &rhs.layout) {
            (None, _) => {
                let k = self.coeffs[0];
                rhs.map_coeffs(|c| c * k)
            }
            (_, None) => {
                let k = rhs.coeffs[0];
                self.map_coeffs(|c| c * k)
            }
            (Some(la), Some(lb)) => {
                Self::check_compatible(la, lb);
                let order = self.order.min(rhs.order);
                let mut coeffs = vec![T::zero(); la.len()];
                for &(i, j, k) in &la.mul[..la.mul_end[order as usize]] {
                    coeffs[k as usize] += self.coeffs[i as usize] * rhs.coeffs[j as usize];
                }
                TaylorJet { layout: Some(la.clone()), order, coeffs }
            }
        }
    }

    /// `f(self)` given the univariate Taylor coefficients
    /// `f(a), f'(a), f''(a)/2!, …` at `a = self.value()`.
    fn compose(&self, taylor: &[T]) -> Self {
        let Some(_) = &self.layout else {
            return Self::constant(taylor[0]);
        };
        let r = (self.order as usize).min(taylor.len() - 1);
        let mut h = self.clone();
        h.coeffs[0] = T::zero();
        let mut acc = Self::constant(taylor[r]);
        for k in (0..r).rev() {
            acc = acc.mul_jet(&h);
            acc.coeffs[0] += taylor[k];
        }
        // Constant leading coefficient never carries the jet's order.
        if acc.layout.is_none() {
            let mut out = h.map_coeffs(|_| T::zero());
            out.coeffs[0] = acc.coeffs[0];
            return out;
        }
        acc
    }

    fn compose_order(&self) -> usize {
        match &self.layout {
            None => 0,
            Some(_) => self.order as usize,
        }
    }

    pub fn recip(&self) -> Self {
        let a = self.value();
        let r = self.compose_order();
        let inv = T::one() / a;
        let mut coeffs = Vec::with_capacity(r + 1);
        let mut p = inv;
        for k in 0..=r {
            coeffs.push(if k % 2 == 0 { p } else { -p });
            p *= inv;
        }
        self.compose(&coeffs)
    }
}

impl<T: Real> PartialEq for TaylorJet<T> {
    fn eq(&self, other: &Self) -> bool {
        let end = self.valid_end().max(other.valid_end());
        let get = |j: &Self, k: usize| if k < j.valid_end() { j.coeffs[k] } else { T::zero() };
        self.order() == other.order() && (0..end).all(|k| get(self, k) == get(other, k))
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl<T: Real> $trait<&TaylorJet<T>> for &TaylorJet<T> {
            type Output = TaylorJet<T>;
            fn $method(self, rhs: &TaylorJet<T>) -> TaylorJet<T> {
                let f: fn(&TaylorJet<T>, &TaylorJet<T>) -> TaylorJet<T> = $body;
                f(self, rhs)
            }
        }
        impl<T: Real> $trait<TaylorJet<T>> for TaylorJet<T> {
            type Output = TaylorJet<T>;
            fn $method(self, rhs: TaylorJet<T>) -> TaylorJet<T> {
                (&self).$method(&rhs)
            }
        }
        impl<T: Real> $trait<&TaylorJet<T>> for TaylorJet<T> {
            type Output = TaylorJet<T>;
            fn $method(self, rhs: &TaylorJet<T>) -> TaylorJet<T> {
                (&self).$method(rhs)
            }
        }
        impl<T: Real> $trait<TaylorJet<T>> for &TaylorJet<T> {
            type Output = TaylorJet<T>;
            fn $method(self, rhs: TaylorJet<T>) -> TaylorJet<T> {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| a.zip_with(b, |x, y| x + y));
forward_binop!(Sub, sub, |a, b| a.zip_with(b, |x, y| x - y));
forward_binop!(Mul, mul, |a, b| a.mul_jet(b));
forward_binop!(Div, div, |a, b| {
    if b.layout.is_none() {
        let k = b.coeffs[0];
        a.map_coeffs(|c| c / k)
    } else {
        a.mul_jet(&b.recip())
    }
});

impl<T: Real> Neg for TaylorJet<T> {
    type Output = TaylorJet<T>;
    fn neg(self) -> TaylorJet<T> {
        self.map_coeffs(|c| -c)
    }
}

impl<T: Real> Neg for &TaylorJet<T> {
    type Output = TaylorJet<T>;
    fn neg(self) -> TaylorJet<T> {
        self.map_coeffs(|c| -c)
    }
}

impl<T: Real> Scalar for TaylorJet<T> {
    type Real = T;

    fn constant(v: T) -> Self {
        TaylorJet::constant(v)
    }

    fn real(&self) -> T {
        self.value()
    }

    fn is_constant(&self) -> bool {
        self.layout.is_none()
    }

    fn exp(&self) -> Self {
        let e = Float::exp(self.value());
        let r = self.compose_order();
        let mut coeffs = Vec::with_capacity(r + 1);
        let mut fact = T::one();
        for k in 0..=r {
            if k > 0 {
                fact *= T::lit(k as f64);
            }
            coeffs.push(e / fact);
        }
        self.compose(&coeffs)
    }

    fn ln(&self) -> Self {
        let a = self.value();
        let r = self.compose_order();
        let mut coeffs = vec![Float::ln(a)];
        for k in 1..=r {
            let sign = if k % 2 == 1 { T::one() } else { -T::one() };
            coeffs.push(sign / (T::lit(k as f64) * Float::powi(a, k as i32)));
        }
        self.compose(&coeffs)
    }

    fn sin(&self) -> Self {
        let (s, c) = (Float::sin(self.value()), Float::cos(self.value()));
        let cycle = [s, c, -s, -c];
        self.compose(&trig_coeffs(&cycle, self.compose_order()))
    }

    fn cos(&self) -> Self {
        let (s, c) = (Float::sin(self.value()), Float::cos(self.value()));
        let cycle = [c, -s, -c, s];
        self.compose(&trig_coeffs(&cycle, self.compose_order()))
    }

    fn sqrt(&self) -> Self {
        self.powf(T::lit(0.5))
    }

    fn powi(&self, k: i32) -> Self {
        if k < 0 {
            return self.recip().powi(-k);
        }
        let mut base = self.clone();
        let mut acc = Self::constant(T::one());
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        if acc.layout.is_none() && self.layout.is_some() {
            // x^0 keeps the argument's layout and order.
            let mut out = self.map_coeffs(|_| T::zero());
            out.coeffs[0] = T::one();
            return out;
        }
        acc
    }

    fn powf(&self, p: T) -> Self {
        let a = self.value();
        let r = self.compose_order();
        let mut coeffs = Vec::with_capacity(r + 1);
        let mut binom = T::one();
        for k in 0..=r {
            if k > 0 {
                binom = binom * (p - T::lit((k - 1) as f64)) / T::lit(k as f64);
            }
            coeffs.push(binom * Float::powf(a, p - T::lit(k as f64)));
        }
        self.compose(&coeffs)
    }
}

fn trig_coeffs<T: Real>(cycle: &[T; 4], r: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(r + 1);
    let mut fact = T::one();
    for k in 0..=r {
        if k > 0 {
            fact *= T::lit(k as f64);
        }
        out.push(cycle[k % 4] / fact);
    }
    out
}

impl<T: Real> Zero for TaylorJet<T> {
    fn zero() -> Self {
        Self::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.coeffs[..self.valid_end()].iter().all(|c| c.is_zero())
    }
}
