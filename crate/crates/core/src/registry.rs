//! Built-in Lagrangians, each with the box that random samples are drawn
//! from.

use crate::bundle::Jet2Point;
use crate::error::{Error, Result};
use crate::lagrangian::LagrangianSpec;
use crate::semi_riemannian::SemiRiemannianSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry {
    pub spec: LagrangianSpec,
    /// Per-coordinate bounds for `x`.
    pub x_box: Vec<(f64, f64)>,
    /// Bounds shared by every `y1` and `y2` component.
    pub y_box: (f64, f64),
}

impl RegistryEntry {
    fn new(spec: LagrangianSpec) -> Self {
        let n = crate::calculus::ScalarField::dim(&spec);
        RegistryEntry { spec, x_box: vec![(-1.0, 1.0); n], y_box: (-1.0, 1.0) }
    }

    pub fn name(&self) -> &str {
        self.spec.name()
    }

    /// Map `3n` numbers in `[0, 1)` onto a point of the sampling box.
    pub fn point_from_unit(&self, u: &[f64]) -> Result<Jet2Point<f64>> {
        let n = self.x_box.len();
        if u.len() != 3 * n {
            return Err(Error::Dimension { expected: 3 * n, found: u.len() });
        }
        let lerp = |(a, b): (f64, f64), t: f64| a + (b - a) * t;
        let x = (0..n).map(|i| lerp(self.x_box[i], u[i])).collect();
        let y1 = (0..n).map(|i| lerp(self.y_box, u[n + i])).collect();
        let y2 = (0..n).map(|i| lerp(self.y_box, u[2 * n + i])).collect();
        Jet2Point::new(x, y1, y2)
    }
}

fn sum(n: usize, term: impl Fn(usize) -> String) -> String {
    (1..=n).map(term).collect::<Vec<_>>().join(" + ")
}

/// `Σ (y2ⁱ)²`.
pub fn flat(n: usize) -> LagrangianSpec {
    let src = sum(n, |i| format!("y2_{i}^2"));
    LagrangianSpec::expression(&src, n).expect("flat parses").with_name("flat")
}

/// `Σ (y2ⁱ)² + (Σ (y1ⁱ)²)²`: regular but not of semi-Riemannian type.
pub fn quartic(n: usize) -> LagrangianSpec {
    let src = format!("{} + ({})^2", sum(n, |i| format!("y2_{i}^2")), sum(n, |i| format!("y1_{i}^2")));
    LagrangianSpec::expression(&src, n).expect("quartic parses").with_name("quartic")
}

/// `(1 + |y1|²/4)|y2|² + x¹ ⟨y1, y2⟩ + sin(x¹)|y1|²`: metric depends on
/// `y1`, so the dynamical derivative of `g` does not vanish.
pub fn coupled(n: usize) -> LagrangianSpec {
    let y1sq = sum(n, |i| format!("y1_{i}^2"));
    let src = format!(
        "(1 + ({y1sq})/4)*({}) + x_1*({}) + sin(x_1)*({y1sq})",
        sum(n, |i| format!("y2_{i}^2")),
        sum(n, |i| format!("y1_{i}*y2_{i}")),
    );
    LagrangianSpec::expression(&src, n).expect("coupled parses").with_name("coupled")
}

/// Every built-in entry available in dimension `n`.
pub fn entries(n: usize) -> Vec<RegistryEntry> {
    let mut out = vec![
        RegistryEntry::new(flat(n)),
        RegistryEntry::new(quartic(n)),
        RegistryEntry::new(coupled(n)),
        RegistryEntry::new(LagrangianSpec::semi_riemannian(SemiRiemannianSpec::euclidean(n))),
    ];
    if n == 1 {
        out.push(RegistryEntry::new(LagrangianSpec::semi_riemannian(SemiRiemannianSpec::conformal1d())));
    }
    if n >= 2 {
        out.push(RegistryEntry::new(LagrangianSpec::semi_riemannian(SemiRiemannianSpec::diag_exp(n))));
    }
    if n == 2 {
        let mut e = RegistryEntry::new(LagrangianSpec::semi_riemannian(SemiRiemannianSpec::polar2d()));
        e.x_box[0] = (0.5, 3.0);
        out.push(e);
    }
    out
}

/// Semi-Riemannian entries only.
pub fn semi_riemannian_entries(n: usize) -> Vec<RegistryEntry> {
    entries(n).into_iter().filter(|e| e.spec.as_semi_riemannian().is_some()).collect()
}

pub fn names(n: usize) -> Vec<String> {
    entries(n).iter().map(|e| e.name().to_string()).collect()
}

/// Look up an entry by name; `diag-exp-2d` is accepted for `diag-exp` at
/// `n = 2`.
pub fn lookup(name: &str, n: usize) -> Result<RegistryEntry> {
    let key = if name == "diag-exp-2d" && n == 2 { "diag-exp" } else { name };
    entries(n).into_iter().find(|e| e.name() == key).ok_or_else(|| {
        Error::Config(format!("unknown builtin `{name}` for n = {n} (available: {})", names(n).join(", ")))
    })
}
