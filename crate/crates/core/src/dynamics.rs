//! Craig–Synge trajectories as integral curves of the semispray, trajectory
//! monitors, and the variational check of the Craig–Synge covector.

use std::fmt;
use std::io::Write;

use num_traits::Float;

use crate::bundle::{Coord, Jet2Point};
use crate::calculus::ScalarField;
use crate::error::{Error, Result};
use crate::expr::{parse_curve_expression, Expr};
use crate::jet::TaylorJet;
use crate::lagrangian::{LagrangianSpec, DEFAULT_REGULARITY_TOL};
use crate::model::PointModel;
use crate::scalar::Real;
use crate::semi_riemannian::{quad_form, SemiRiemannianSpec};

/// Uniformly sampled solution with optional monitor channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    dt: T,
    times: Vec<T>,
    points: Vec<Jet2Point<T>>,
    monitors: Vec<(String, Vec<T>)>,
}

impl<T: Real> Trajectory<T> {
    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn points(&self) -> &[Jet2Point<T>] {
        &self.points
    }

    pub fn last(&self) -> &Jet2Point<T> {
        self.points.last().expect("trajectory has at least the initial point")
    }

    pub fn monitors(&self) -> &[(String, Vec<T>)] {
        &self.monitors
    }

    pub fn monitor(&self, name: &str) -> Option<&[T]> {
        self.monitors.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Attach a channel; replaces an existing one of the same name.
    pub fn add_monitor(&mut self, name: impl Into<String>, values: Vec<T>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), found: values.len() });
        }
        let name = name.into();
        self.monitors.retain(|(n, _)| *n != name);
        self.monitors.push((name, values));
        Ok(())
    }

    /// Evaluate and attach each monitor.
    pub fn with_monitors(mut self, l: &LagrangianSpec, monitors: &[Monitor]) -> Result<Self> {
        for m in monitors {
            let v = m.evaluate(l, &self)?;
            self.add_monitor(m.name(), v)?;
        }
        Ok(self)
    }

    /// CSV with header `t, x_*, y1_*, y2_*, monitors…`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.dim();
        let mut header = vec!["t".to_string()];
        for b in ["x", "y1", "y2"] {
            header.extend((1..=n).map(|i| format!("{b}_{i}")));
        }
        header.extend(self.monitors.iter().map(|(name, _)| name.clone()));
        writeln!(out, "{}", header.join(","))?;
        for (k, p) in self.points.iter().enumerate() {
            let mut row = vec![self.times[k]];
            row.extend(p.flat());
            row.extend(self.monitors.iter().map(|(_, v)| v[k]));
            let cells: Vec<String> = row.iter().map(|v| format!("{:.16e}", v.to_f64_lossy())).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Integration stopped early; `partial` holds every accepted sample.
#[derive(Debug, Clone)]
pub struct IntegrationFailure<T> {
    pub partial: Trajectory<T>,
    pub error: Error,
}

impl<T: Real> fmt::Display for IntegrationFailure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "integration stopped after {} samples: {}", self.partial.len(), self.error)
    }
}

impl<T: Real> std::error::Error for IntegrationFailure<T> {}

/// `(y1, 2y2, −3G)` at `p`.
pub fn semispray_field<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>) -> Result<Vec<T>> {
    Ok(PointModel::new(l, p, 2, DEFAULT_REGULARITY_TOL)?.semispray())
}

fn axpy<T: Real>(z: &[T], h: T, k: &[T]) -> Vec<T> {
    z.iter().zip(k).map(|(&a, &b)| a + h * b).collect()
}

/// One classical Runge–Kutta step of the semispray flow.
pub fn rk4_step<T: Real>(l: &LagrangianSpec, p: &Jet2Point<T>, h: T) -> Result<Jet2Point<T>> {
    let n = p.dim();
    let z = p.flat();
    let f = |z: &[T]| -> Result<Vec<T>> { semispray_field(l, &Jet2Point::from_flat(z, n)?) };
    let half = T::lit(0.5);
    let k1 = f(&z)?;
    let k2 = f(&axpy(&z, half * h, &k1))?;
    let k3 = f(&axpy(&z, half * h, &k2))?;
    let k4 = f(&axpy(&z, h, &k3))?;
    let sixth = h / T::lit(6.0);
    let next: Vec<T> = (0..z.len()).map(|i| z[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i])).collect();
    Jet2Point::from_flat(&next, n)
}

/// Integrate the Craig–Synge system `x‴ + 6G(x, ẋ, ½ẍ) = 0` from `p0` over
/// `[t0, t1]`. The step is `(t1 − t0)/N` with `N = round((t1 − t0)/dt)`.
pub fn integrate_craig_synge<T: Real>(
    l: &LagrangianSpec,
    p0: &Jet2Point<T>,
    t0: T,
    t1: T,
    dt: T,
) -> std::result::Result<Trajectory<T>, IntegrationFailure<T>> {
    let empty = |error: Error| IntegrationFailure {
        partial: Trajectory { dt, times: vec![t0], points: vec![p0.clone()], monitors: Vec::new() },
        error,
    };
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(empty(Error::Invalid("dt must be positive and finite".into())));
    }
    if !(t1 > t0) {
        return Err(empty(Error::Invalid("t1 must exceed t0".into())));
    }
    let steps = ((t1 - t0) / dt).round().to_f64_lossy().max(1.0) as usize;
    let h = (t1 - t0) / T::from_usize(steps).expect("step count fits");
    let mut traj = Trajectory { dt: h, times: vec![t0], points: vec![p0.clone()], monitors: Vec::new() };
    if let Err(error) = semispray_field(l, p0) {
        return Err(IntegrationFailure { partial: traj, error });
    }
    for k in 1..=steps {
        let t = t0 + h * T::from_usize(k).expect("step index fits");
        match rk4_step(l, traj.last(), h) {
            Ok(p) => {
                traj.times.push(t);
                traj.points.push(p);
            }
            // Non-finite stage values or a domain violation of L mid-step.
            Err(Error::Domain(msg) | Error::Invalid(msg)) => {
                let error = Error::Step { t: t.to_f64_lossy(), message: msg };
                return Err(IntegrationFailure { partial: traj, error });
            }
            Err(error) => return Err(IntegrationFailure { partial: traj, error }),
        }
    }
    Ok(traj)
}

/// Initial data with `z⁽²⁾ = 0`, i.e. `y2 = −½ γ(y1, y1)`.
pub fn geodesic_initial_point<T: Real>(spec: &SemiRiemannianSpec, x: &[T], y1: &[T]) -> Result<Jet2Point<T>> {
    let zero = vec![T::zero(); x.len()];
    let p = Jet2Point::new(x.to_vec(), y1.to_vec(), zero)?;
    let z = spec.z2(&p)?;
    Jet2Point::new(x.to_vec(), y1.to_vec(), z.iter().map(|&v| -v).collect())
}

/// Estimated convergence orders `log₂(e_k / e_{k+1})` from endpoint errors
/// at successively halved steps, against a run at `ref_dt`.
pub fn convergence_orders<T: Real>(
    l: &LagrangianSpec,
    p0: &Jet2Point<T>,
    t1: T,
    dts: &[T],
    ref_dt: T,
) -> Result<Vec<T>> {
    let run = |dt: T| integrate_craig_synge(l, p0, T::zero(), t1, dt).map(|tr| tr.last().clone()).map_err(|f| f.error);
    let reference = run(ref_dt)?;
    let errs: Vec<T> = dts.iter().map(|&dt| run(dt).map(|p| p.max_abs_diff(&reference))).collect::<Result<_>>()?;
    Ok(errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Second-order accurate first derivative of uniformly spaced samples,
/// one-sided at the ends.
pub fn sample_derivative<T: Real>(f: &[T], dt: T) -> Result<Vec<T>> {
    let m = f.len();
    if m < 3 {
        return Err(Error::Invalid("need at least 3 samples to difference".into()));
    }
    let two = T::lit(2.0);
    let mut out = Vec::with_capacity(m);
    out.push((T::lit(-3.0) * f[0] + T::lit(4.0) * f[1] - f[2]) / (two * dt));
    for k in 1..m - 1 {
        out.push((f[k + 1] - f[k - 1]) / (two * dt));
    }
    out.push((T::lit(3.0) * f[m - 1] - T::lit(4.0) * f[m - 2] + f[m - 3]) / (two * dt));
    Ok(out)
}

/// Second-order accurate second derivative, one-sided at the ends.
pub fn sample_second_derivative<T: Real>(f: &[T], dt: T) -> Result<Vec<T>> {
    let m = f.len();
    if m < 4 {
        return Err(Error::Invalid("need at least 4 samples for a second difference".into()));
    }
    let dt2 = dt * dt;
    let (two, four, five) = (T::lit(2.0), T::lit(4.0), T::lit(5.0));
    let mut out = Vec::with_capacity(m);
    out.push((two * f[0] - five * f[1] + four * f[2] - f[3]) / dt2);
    for k in 1..m - 1 {
        out.push((f[k + 1] - two * f[k] + f[k - 1]) / dt2);
    }
    out.push((two * f[m - 1] - five * f[m - 2] + four * f[m - 3] - f[m - 4]) / dt2);
    Ok(out)
}

fn columns<T: Real>(rows: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = rows[0].len();
    (0..n).map(|i| rows.iter().map(|r| r[i]).collect()).collect()
}

fn differentiate_rows<T: Real>(rows: &[Vec<T>], dt: T) -> Result<Vec<Vec<T>>> {
    let cols = columns(rows).iter().map(|c| sample_derivative(c, dt)).collect::<Result<Vec<_>>>()?;
    Ok(columns(&cols))
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(Float::abs(x)))
}

/// `max_i |∂L/∂y1ᵢ − d/dt(∂L/∂y2ᵢ)|` per sample, the derivative taken by
/// differencing `∂L/∂y2` along the samples.
pub fn craig_synge_residual<T: Real>(l: &LagrangianSpec, traj: &Trajectory<T>) -> Result<Vec<T>> {
    let n = traj.dim();
    let mut l1 = Vec::with_capacity(traj.len());
    let mut l2 = Vec::with_capacity(traj.len());
    for p in traj.points() {
        let m = PointModel::new(l, p, 2, DEFAULT_REGULARITY_TOL)?;
        l1.push((0..n).map(|i| m.dl_at(Coord::y1(i)).value()).collect::<Vec<_>>());
        l2.push((0..n).map(|i| m.dl_at(Coord::y2(i)).value()).collect::<Vec<_>>());
    }
    let dl2 = differentiate_rows(&l2, traj.dt())?;
    Ok(l1.iter().zip(&dl2).map(|(a, b)| max_abs(&a.iter().zip(b).map(|(&x, &y)| x - y).collect::<Vec<_>>())).collect())
}

fn require_semi_riemannian<'a>(l: &'a LagrangianSpec, what: &str) -> Result<&'a SemiRiemannianSpec> {
    l.as_semi_riemannian()
        .ok_or_else(|| Error::Config(format!("monitor `{what}` requires a semi-Riemannian Lagrangian")))
}

/// Along-curve Levi-Civita quantities at every sample: `ẋ`, `∇ẋ = 2z⁽²⁾`
/// and `∇∇ẋ`, the last by differencing `∇ẋ`.
#[allow(clippy::type_complexity)]
pub fn covariant_derivatives<T: Real>(
    spec: &SemiRiemannianSpec,
    traj: &Trajectory<T>,
) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>, Vec<Vec<T>>)> {
    let two = T::lit(2.0);
    let mut gams = Vec::with_capacity(traj.len());
    let mut xdot = Vec::with_capacity(traj.len());
    let mut nab = Vec::with_capacity(traj.len());
    for p in traj.points() {
        let gam = spec.christoffels(p.x())?;
        let z = crate::semi_riemannian::z2_from(&gam, p.y1(), p.y2());
        xdot.push(p.y1().to_vec());
        nab.push(z.iter().map(|&v| two * v).collect::<Vec<_>>());
        gams.push(gam);
    }
    let dnab = differentiate_rows(&nab, traj.dt())?;
    let nab2 =
        (0..traj.len()).map(|k| SemiRiemannianSpec::covariant_along(&gams[k], &xdot[k], &nab[k], &dnab[k])).collect();
    Ok((xdot, nab, nab2))
}

/// `‖∇∇ẋ‖∞` per sample.
pub fn nabla2_xdot<T: Real>(spec: &SemiRiemannianSpec, traj: &Trajectory<T>) -> Result<Vec<T>> {
    let (_, _, nab2) = covariant_derivatives(spec, traj)?;
    Ok(nab2.iter().map(|v| max_abs(v)).collect())
}

/// `d²/dt² g(ẋ, ẋ) − 2 g(∇ẋ, ∇ẋ) − 2 g(ẋ, ∇∇ẋ)` per sample.
pub fn energy_identity<T: Real>(spec: &SemiRiemannianSpec, traj: &Trajectory<T>) -> Result<Vec<T>> {
    let (xdot, nab, nab2) = covariant_derivatives(spec, traj)?;
    let mut e = Vec::with_capacity(traj.len());
    let mut rest = Vec::with_capacity(traj.len());
    for (k, p) in traj.points().iter().enumerate() {
        let g = spec.metric(p.x())?;
        e.push(quad_form(&g, &xdot[k], &xdot[k]));
        let two = T::lit(2.0);
        rest.push(two * quad_form(&g, &nab[k], &nab[k]) + two * quad_form(&g, &xdot[k], &nab2[k]));
    }
    let e2 = sample_second_derivative(&e, traj.dt())?;
    Ok(e2.iter().zip(&rest).map(|(&a, &b)| a - b).collect())
}

/// Trajectory monitor channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monitor {
    CraigSynge,
    EnergyIdentity,
    Nabla2Xdot,
    L1,
    L2,
}

impl Monitor {
    pub const ALL: [Monitor; 5] =
        [Monitor::CraigSynge, Monitor::EnergyIdentity, Monitor::Nabla2Xdot, Monitor::L1, Monitor::L2];

    pub fn name(self) -> &'static str {
        match self {
            Monitor::CraigSynge => "craig_synge_residual",
            Monitor::EnergyIdentity => "energy_identity",
            Monitor::Nabla2Xdot => "nabla2_xdot",
            Monitor::L1 => "L1",
            Monitor::L2 => "L2",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Monitor::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown monitor `{name}`")))
    }

    /// One value per sample. `L2` is the Lagrangian itself; `L1` needs a
    /// semi-Riemannian Lagrangian, as do the covariant monitors.
    pub fn evaluate<T: Real>(self, l: &LagrangianSpec, traj: &Trajectory<T>) -> Result<Vec<T>> {
        match self {
            Monitor::CraigSynge => craig_synge_residual(l, traj),
            Monitor::EnergyIdentity => energy_identity(require_semi_riemannian(l, self.name())?, traj),
            Monitor::Nabla2Xdot => nabla2_xdot(require_semi_riemannian(l, self.name())?, traj),
            Monitor::L1 => {
                let s = require_semi_riemannian(l, self.name())?;
                traj.points().iter().map(|p| s.l1(p.x(), p.y1())).collect()
            }
            Monitor::L2 => traj.points().iter().map(|p| l.eval(&p.flat())).collect(),
        }
    }
}

/// A smooth curve on `[0, 1]` with its first three derivatives.
pub trait Curve: Send + Sync {
    fn dim(&self) -> usize;

    /// `[x, ẋ, ẍ, x‴]` at `t`.
    fn derivatives(&self, t: f64) -> Result<[Vec<f64>; 4]>;

    /// Holonomic lift `(x, ẋ, ½ẍ)`.
    fn lift(&self, t: f64) -> Result<Jet2Point<f64>> {
        let [x, v, a, _] = self.derivatives(t)?;
        Jet2Point::new(x, v, a.iter().map(|c| 0.5 * c).collect())
    }
}

/// Polynomial curve, `coeffs[i][k]` multiplying `tᵏ` in component `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCurve {
    pub coeffs: Vec<Vec<f64>>,
}

impl Curve for PolyCurve {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn derivatives(&self, t: f64) -> Result<[Vec<f64>; 4]> {
        let mut out: [Vec<f64>; 4] = Default::default();
        for c in &self.coeffs {
            let mut d = c.clone();
            for slot in out.iter_mut() {
                slot.push(d.iter().rev().fold(0.0, |acc, &a| acc * t + a));
                d = d.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect();
            }
        }
        Ok(out)
    }
}

/// Curve given by one expression in `t` per component.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprCurve {
    comps: Vec<Expr>,
}

impl ExprCurve {
    pub fn parse<S: AsRef<str>>(srcs: &[S]) -> Result<Self> {
        let comps = srcs.iter().map(|s| parse_curve_expression(s.as_ref())).collect::<Result<Vec<_>>>()?;
        if comps.is_empty() {
            return Err(Error::Invalid("curve needs at least one component".into()));
        }
        Ok(ExprCurve { comps })
    }
}

impl Curve for ExprCurve {
    fn dim(&self) -> usize {
        self.comps.len()
    }

    fn derivatives(&self, t: f64) -> Result<[Vec<f64>; 4]> {
        let tj = TaylorJet::seed(&[t], &[0], 3).remove(0);
        let mut out: [Vec<f64>; 4] = Default::default();
        for c in &self.comps {
            let v = c.eval_curve(&tj)?;
            for (k, slot) in out.iter_mut().enumerate() {
                slot.push(v.partial(&[k as u8]).expect("order 3"));
            }
        }
        Ok(out)
    }
}

/// Craig–Synge solution through `p0` at `t = 0`, sampled on a grid and
/// evaluated between grid points by one partial RK4 step.
#[derive(Debug, Clone)]
pub struct FlowCurve {
    l: LagrangianSpec,
    traj: Trajectory<f64>,
}

impl FlowCurve {
    pub fn new(l: &LagrangianSpec, p0: &Jet2Point<f64>, t1: f64, dt: f64) -> Result<Self> {
        let traj = integrate_craig_synge(l, p0, 0.0, t1, dt).map_err(|f| f.error)?;
        Ok(FlowCurve { l: l.clone(), traj })
    }

    pub fn trajectory(&self) -> &Trajectory<f64> {
        &self.traj
    }
}

impl Curve for FlowCurve {
    fn dim(&self) -> usize {
        self.traj.dim()
    }

    fn derivatives(&self, t: f64) -> Result<[Vec<f64>; 4]> {
        let h = self.traj.dt();
        let k = ((t / h).floor().max(0.0) as usize).min(self.traj.len() - 1);
        let rem = t - self.traj.times()[k];
        let p = if rem.abs() > 0.0 {
            rk4_step(&self.l, &self.traj.points()[k], rem)?
        } else {
            self.traj.points()[k].clone()
        };
        let s = semispray_field(&self.l, &p)?;
        let n = p.dim();
        Ok([p.x().to_vec(), p.y1().to_vec(), s[n..2 * n].to_vec(), s[2 * n..].iter().map(|g| 2.0 * g).collect()])
    }
}

/// `Vⁱ(t) = Σ_k c[i][k] sin((k+1)πt) + drift[i]·t`. With zero drift the
/// field vanishes at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationField {
    sine: Vec<Vec<f64>>,
    drift: Vec<f64>,
}

impl VariationField {
    pub fn sine(coeffs: Vec<Vec<f64>>) -> Self {
        let n = coeffs.len();
        VariationField { sine: coeffs, drift: vec![0.0; n] }
    }

    /// Adds `drift·t`, so `V(1) = drift`.
    pub fn with_drift(mut self, drift: Vec<f64>) -> Self {
        self.drift = drift;
        self
    }

    pub fn dim(&self) -> usize {
        self.sine.len()
    }

    /// `(V(t), V'(t))`; exactly zero at the ends when there is no drift.
    pub fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let pi = std::f64::consts::PI;
        let mut v = Vec::with_capacity(self.dim());
        let mut dv = Vec::with_capacity(self.dim());
        for (c, &a) in self.sine.iter().zip(&self.drift) {
            let mut s = a * t;
            let mut ds = a;
            if t != 0.0 && t != 1.0 {
                for (k, &ck) in c.iter().enumerate() {
                    s += ck * ((k + 1) as f64 * pi * t).sin();
                }
            }
            for (k, &ck) in c.iter().enumerate() {
                let w = (k + 1) as f64 * pi;
                ds += ck * w * (w * t).cos();
            }
            v.push(s);
            dv.push(ds);
        }
        (v, dv)
    }
}

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_m(x), p0 = P_{m-1}(x)
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Points per Gauss–Legendre panel.
pub const GAUSS_POINTS: usize = 8;

/// Composite rule on `[0, 1]` with `quad_n` nodes in panels of
/// [`GAUSS_POINTS`].
pub fn composite_rule(quad_n: usize) -> Result<Vec<(f64, f64)>> {
    if quad_n == 0 || !quad_n.is_multiple_of(GAUSS_POINTS) {
        return Err(Error::Invalid(format!("quad_n must be a positive multiple of {GAUSS_POINTS}")));
    }
    let panels = quad_n / GAUSS_POINTS;
    let (x, w) = gauss_legendre(GAUSS_POINTS);
    let h = 1.0 / panels as f64;
    let mut out = Vec::with_capacity(quad_n);
    for p in 0..panels {
        let a = p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((a + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    Ok(out)
}

/// Step used for the centered difference in `ε`.
pub const VARIATION_EPS: f64 = 1e-5;

/// Both sides of the first-variation identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationCheck {
    /// `dI/dε` at `ε = 0` by centered difference.
    pub lhs: f64,
    /// `∫ [∂L/∂y1ᵢ − d/dt(∂L/∂y2ᵢ)] Vⁱ dt`.
    pub rhs: f64,
    /// `(∂L/∂y2ᵢ Vⁱ)|₀¹`.
    pub boundary: f64,
}

impl VariationCheck {
    /// `|lhs − rhs − boundary|`.
    pub fn defect(&self) -> f64 {
        (self.lhs - self.rhs - self.boundary).abs()
    }
}

/// Vary the fiber components of the lift, `(x, ẋ + εV, ½ẍ + εV')`, and
/// compare `dI/dε` with the integrated Craig–Synge covector.
pub fn action_variation_check<C: Curve + ?Sized>(
    l: &LagrangianSpec,
    c: &C,
    v: &VariationField,
    quad_n: usize,
) -> Result<VariationCheck> {
    let n = c.dim();
    if l.dim() != n || v.dim() != n {
        return Err(Error::Dimension { expected: n, found: if l.dim() != n { l.dim() } else { v.dim() } });
    }
    let rule = composite_rule(quad_n)?;
    let action = |eps: f64| -> Result<f64> {
        let mut acc = 0.0;
        for &(t, w) in &rule {
            let [x, xd, xdd, _] = c.derivatives(t)?;
            let (vv, dv) = v.eval(t);
            let mut z = x;
            z.extend((0..n).map(|i| xd[i] + eps * vv[i]));
            z.extend((0..n).map(|i| 0.5 * xdd[i] + eps * dv[i]));
            acc += w * l.eval(&z)?;
        }
        Ok(acc)
    };
    let lhs = (action(VARIATION_EPS)? - action(-VARIATION_EPS)?) / (2.0 * VARIATION_EPS);

    let mut rhs = 0.0;
    for &(t, w) in &rule {
        let bracket = craig_synge_covector(l, c, t)?;
        let (vv, _) = v.eval(t);
        rhs += w * bracket.iter().zip(&vv).map(|(a, b)| a * b).sum::<f64>();
    }
    let mut boundary = 0.0;
    for (t, sign) in [(1.0, 1.0), (0.0, -1.0)] {
        let m = PointModel::new(l, &c.lift(t)?, 2, DEFAULT_REGULARITY_TOL)?;
        let (vv, _) = v.eval(t);
        boundary += sign * (0..n).map(|i| m.dl_at(Coord::y2(i)).value() * vv[i]).sum::<f64>();
    }
    Ok(VariationCheck { lhs, rhs, boundary })
}

/// `∂L/∂y1ᵢ − d/dt(∂L/∂y2ᵢ)` along the lift of `c`, the time derivative by
/// the chain rule `∂²L/∂y2ᵢ∂xᵏ ẋᵏ + ∂²L/∂y2ᵢ∂y1ᵏ ẍᵏ + ∂²L/∂y2ᵢ∂y2ᵏ ½x‴ᵏ`.
pub fn craig_synge_covector<C: Curve + ?Sized>(l: &LagrangianSpec, c: &C, t: f64) -> Result<Vec<f64>> {
    let n = c.dim();
    let [x, xd, xdd, xddd] = c.derivatives(t)?;
    let p = Jet2Point::new(x, xd.clone(), xdd.iter().map(|a| 0.5 * a).collect())?;
    let m = PointModel::new(l, &p, 2, DEFAULT_REGULARITY_TOL)?;
    Ok((0..n)
        .map(|i| {
            let l2 = Coord::y2(i);
            let mut dt = 0.0;
            for k in 0..n {
                dt += m.d2l(l2, Coord::x(k)) * xd[k]
                    + m.d2l(l2, Coord::y1(k)) * xdd[k]
                    + m.d2l(l2, Coord::y2(k)) * 0.5 * xddd[k];
            }
            m.dl_at(Coord::y1(i)).value() - dt
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    fn pt(x: &[f64], y1: &[f64], y2: &[f64]) -> Jet2Point<f64> {
        Jet2Point::new(x.to_vec(), y1.to_vec(), y2.to_vec()).unwrap()
    }

    fn conformal() -> LagrangianSpec {
        LagrangianSpec::semi_riemannian(SemiRiemannianSpec::conformal1d())
    }

    #[test]
    fn flat_is_exact_quadratic() {
        let tr = integrate_craig_synge(&registry::flat(1), &pt(&[0.0], &[1.0], &[1.0]), 0.0, 1.0, 1e-3).unwrap();
        assert_eq!(tr.len(), 1001);
        let p = tr.last();
        assert!((p.x()[0] - 2.0).abs() < 1e-12);
        assert!((p.y1()[0] - 3.0).abs() < 1e-12);
        assert!((p.y2()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_step_rejected() {
        let e = integrate_craig_synge(&registry::flat(1), &pt(&[0.0], &[1.0], &[1.0]), 0.0, 1.0, 0.0).unwrap_err();
        assert!(matches!(e.error, Error::Invalid(_)));
        assert_eq!(e.partial.len(), 1);
    }

    #[test]
    fn blow_up_is_a_step_error_with_partial_output() {
        // v = ẋ obeys v'' = 4v³, which blows up in finite time.
        let l = LagrangianSpec::expression("y2_1^2 + y1_1^4", 1).unwrap();
        let e = integrate_craig_synge(&l, &pt(&[0.0], &[3.0], &[0.0]), 0.0, 5.0, 1e-2).unwrap_err();
        assert!(matches!(e.error, Error::Step { .. }), "{:?}", e.error);
        assert!(e.partial.len() > 1);
    }

    #[test]
    fn degenerate_start_reports_error() {
        let l = LagrangianSpec::expression("y1_1*y2_1", 1).unwrap();
        let e = integrate_craig_synge(&l, &pt(&[0.0], &[1.0], &[1.0]), 0.0, 1.0, 0.1).unwrap_err();
        assert!(matches!(e.error, Error::DegenerateLagrangian { .. }));
    }

    #[test]
    fn rk4_order_on_conformal() {
        let orders =
            convergence_orders(&conformal(), &pt(&[0.0], &[1.0], &[0.0]), 1.0, &[1e-2, 5e-3, 2.5e-3], 2.5e-3 / 16.0)
                .unwrap();
        for o in orders {
            assert!((3.7..=4.3).contains(&o), "order {o}");
        }
    }

    #[test]
    fn conformal_monitors() {
        let l = conformal();
        let tr = integrate_craig_synge(&l, &pt(&[0.0], &[1.0], &[0.0]), 0.0, 1.0, 1e-3)
            .unwrap()
            .with_monitors(&l, &Monitor::ALL)
            .unwrap();
        assert!(max_abs(tr.monitor("nabla2_xdot").unwrap()) < 1e-5);
        assert!(max_abs(tr.monitor("energy_identity").unwrap()) < 1e-5);
        assert!(max_abs(tr.monitor("craig_synge_residual").unwrap()) < 1e-5);
        // 8 L₂ = 2‖∇ẋ‖² pointwise.
        let spec = l.as_semi_riemannian().unwrap();
        let (_, nab, _) = covariant_derivatives(spec, &tr).unwrap();
        for (k, p) in tr.points().iter().enumerate() {
            let g = spec.metric(p.x()).unwrap();
            assert!((8.0 * tr.monitor("L2").unwrap()[k] - 2.0 * quad_form(&g, &nab[k], &nab[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn geodesic_data_stays_geodesic() {
        let spec = SemiRiemannianSpec::polar2d();
        let l = LagrangianSpec::semi_riemannian(spec.clone());
        let p0 = geodesic_initial_point(&spec, &[1.5, 0.2], &[0.3, 0.4]).unwrap();
        let tr = integrate_craig_synge(&l, &p0, 0.0, 1.0, 1e-3).unwrap();
        let (_, nab, _) = covariant_derivatives(&spec, &tr).unwrap();
        assert!(nab.iter().all(|v| max_abs(v) < 1e-6));
        let l1 = Monitor::L1.evaluate(&l, &tr).unwrap();
        assert!(l1.iter().all(|e| (e - l1[0]).abs() < 1e-6));
    }

    #[test]
    fn monitors_need_semi_riemannian() {
        let l = registry::quartic(1);
        let tr = integrate_craig_synge(&l, &pt(&[0.0], &[0.5], &[0.1]), 0.0, 0.1, 1e-2).unwrap();
        assert!(matches!(Monitor::EnergyIdentity.evaluate(&l, &tr), Err(Error::Config(_))));
        assert!(Monitor::CraigSynge.evaluate(&l, &tr).is_ok());
        assert!(matches!(Monitor::from_name("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn csv_layout() {
        let l = registry::flat(2);
        let tr = integrate_craig_synge(&l, &pt(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]), 0.0, 0.02, 1e-2)
            .unwrap()
            .with_monitors(&l, &[Monitor::L2])
            .unwrap();
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1,x_2,y1_1,y1_2,y2_1,y2_2,L2");
        assert_eq!(lines.count(), 3);
        assert!(csv.contains("1.0000000000000000e0"));
    }

    #[test]
    fn finite_differences() {
        let f: Vec<f64> = (0..10).map(|k| (0.1 * k as f64).powi(2)).collect();
        let d = sample_derivative(&f, 0.1).unwrap();
        let d2 = sample_second_derivative(&f, 0.1).unwrap();
        for k in 0..10 {
            assert!((d[k] - 0.2 * k as f64).abs() < 1e-12);
            assert!((d2[k] - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((i - 2.0 / 15.0).abs() < 1e-14);
        let r = composite_rule(64).unwrap();
        let i: f64 = r.iter().map(|(t, w)| w * (std::f64::consts::PI * t).sin()).sum();
        assert!((i - 2.0 / std::f64::consts::PI).abs() < 1e-14);
        assert!(composite_rule(10).is_err());
    }

    #[test]
    fn curves_agree() {
        let pc = PolyCurve { coeffs: vec![vec![0.0, 1.0, 0.5]] };
        let ec = ExprCurve::parse(&["t + t^2/2"]).unwrap();
        let a = pc.derivatives(0.3).unwrap();
        let b = ec.derivatives(0.3).unwrap();
        for k in 0..4 {
            assert!((a[k][0] - b[k][0]).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_variation() {
        let l = registry::flat(1);
        let v = VariationField::sine(vec![vec![1.0]]);
        let cubic = PolyCurve { coeffs: vec![vec![0.0, 1.0, 0.5, 0.3]] };
        let r = action_variation_check(&l, &cubic, &v, 64).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-8);
        assert!(r.rhs.abs() > 1e-2);
        let quad = PolyCurve { coeffs: vec![vec![0.0, 1.0, 0.5]] };
        let r = action_variation_check(&l, &quad, &v, 64).unwrap();
        assert!(r.lhs.abs() < 1e-8 && r.rhs.abs() < 1e-8);
    }

    #[test]
    fn conformal_variation_and_boundary() {
        let l = conformal();
        let c = ExprCurve::parse(&["t + t^2/2"]).unwrap();
        let v = VariationField::sine(vec![vec![0.0, 1.0]]);
        let r = action_variation_check(&l, &c, &v, 64).unwrap();
        assert!(r.defect() < 1e-7, "{r:?}");
        let vd = v.clone().with_drift(vec![0.7]);
        let r = action_variation_check(&l, &c, &vd, 64).unwrap();
        assert!(r.boundary.abs() > 1e-2);
        assert!(r.defect() < 1e-7, "{r:?}");
        assert!((r.lhs - r.rhs).abs() > 1e-2);
    }

    #[test]
    fn variation_vanishes_along_solutions() {
        let l = conformal();
        let c = FlowCurve::new(&l, &pt(&[0.0], &[1.0], &[0.0]), 1.0, 1e-3).unwrap();
        let v = VariationField::sine(vec![vec![1.0, -0.5]]);
        let r = action_variation_check(&l, &c, &v, 64).unwrap();
        assert!(r.lhs.abs() < 1e-7 && r.rhs.abs() < 1e-7, "{r:?}");
    }
}
