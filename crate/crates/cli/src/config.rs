//! Run configuration: a single JSON document, validated before anything
//! is computed.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use t2m::diffeo::Diffeo2;
use t2m::dynamics::Monitor;
use t2m::registry::{self, RegistryEntry};
use t2m::{LagrangianSpec, Point, SemiRiemannianSpec};

use crate::CliError;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_SAMPLE_COUNT: usize = 16;
const MAX_DIM: usize = 6;
const MAX_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub lagrangian: LagrangianConfig,
    /// Single explicit point; shorthand for `points.explicit` with one entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<PointSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<PointsConfig>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrate: Option<IntegrateConfig>,
    /// Components `φⁱ(x)` of a base diffeomorphism, for `transform-check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffeo: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LagrangianConfig {
    Expression {
        formula: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        parameters: BTreeMap<String, f64>,
    },
    Builtin {
        name: String,
    },
    /// `L₂` of a base metric given entry by entry as expressions in `x_i`.
    SemiRiemannian {
        metric: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub x: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PointsConfig {
    Explicit(Vec<PointSpec>),
    Random(RandomPoints),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPoints {
    pub count: usize,
    pub seed: u64,
    /// Bounds for `x`: one pair shared by every component, or one per
    /// component. Defaults to the builtin's box, else `[-1, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_box: Option<Vec<[f64; 2]>>,
    /// Bounds shared by every `y1` and `y2` component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_box: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateConfig {
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    #[serde(default)]
    pub monitors: Vec<String>,
    /// Initial point; defaults to the first configured point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<PointSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{field}`: {msg}"))
}

impl RunConfig {
    pub fn from_json(src: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(src).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field that can be checked without doing geometry.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 || self.n > MAX_DIM {
            return Err(bad("n", format!("must be in 1..={MAX_DIM}, got {}", self.n)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(bad("tolerance", "must be positive and finite"));
        }
        if self.point.is_some() && self.points.is_some() {
            return Err(bad("point", "give either `point` or `points`, not both"));
        }
        if let Some(p) = &self.point {
            p.to_point(self.n, "point")?;
        }
        match &self.points {
            Some(PointsConfig::Explicit(ps)) => {
                if ps.is_empty() {
                    return Err(bad("points.explicit", "must not be empty"));
                }
                for (k, p) in ps.iter().enumerate() {
                    p.to_point(self.n, &format!("points.explicit[{k}]"))?;
                }
            }
            Some(PointsConfig::Random(r)) => r.validate(self.n)?,
            None => {}
        }
        if let Some(int) = &self.integrate {
            int.validate(self.n)?;
            if int.initial.is_none() && self.explicit_points().is_none() {
                return Err(bad("integrate.initial", "required when no explicit point is configured"));
            }
        }
        if let Some(d) = &self.diffeo {
            if d.len() != self.n {
                return Err(bad("diffeo", format!("expected {} components, got {}", self.n, d.len())));
            }
            Diffeo2::parse(d).map_err(|e| bad("diffeo", e))?;
        }
        self.lagrangian_spec()?;
        Ok(())
    }

    fn explicit_points(&self) -> Option<Vec<&PointSpec>> {
        match (&self.point, &self.points) {
            (Some(p), _) => Some(vec![p]),
            (None, Some(PointsConfig::Explicit(ps))) => Some(ps.iter().collect()),
            _ => None,
        }
    }

    fn registry_entry(&self) -> Result<Option<RegistryEntry>, CliError> {
        match &self.lagrangian {
            LagrangianConfig::Builtin { name } => {
                registry::lookup(name, self.n).map(Some).map_err(|e| bad("lagrangian.name", e))
            }
            _ => Ok(None),
        }
    }

    pub fn lagrangian_spec(&self) -> Result<LagrangianSpec, CliError> {
        match &self.lagrangian {
            LagrangianConfig::Builtin { .. } => Ok(self.registry_entry()?.expect("builtin").spec),
            LagrangianConfig::Expression { formula, parameters } => {
                let src = substitute_parameters(formula, parameters)?;
                LagrangianSpec::expression(&src, self.n)
                    .map(|l| l.with_name(formula.trim()))
                    .map_err(|e| bad("lagrangian.formula", e))
            }
            LagrangianConfig::SemiRiemannian { metric, name } => {
                if metric.len() != self.n || metric.iter().any(|r| r.len() != self.n) {
                    return Err(bad("lagrangian.metric", format!("must be {0}x{0}", self.n)));
                }
                let spec = SemiRiemannianSpec::parse(name.clone().unwrap_or_else(|| "metric".into()), metric)
                    .map_err(|e| bad("lagrangian.metric", e))?;
                Ok(LagrangianSpec::semi_riemannian(spec))
            }
        }
    }

    /// The sample points, in a fixed order.
    pub fn sample_points(&self) -> Result<Vec<Point>, CliError> {
        if let Some(ps) = self.explicit_points() {
            return ps.iter().enumerate().map(|(k, p)| p.to_point(self.n, &format!("points[{k}]"))).collect();
        }
        let default = RandomPoints { count: DEFAULT_SAMPLE_COUNT, seed: 0, x_box: None, y_box: None };
        let r = match &self.points {
            Some(PointsConfig::Random(r)) => r,
            _ => &default,
        };
        let entry = self.registry_entry()?;
        let x_box: Vec<(f64, f64)> = match &r.x_box {
            Some(b) if b.len() == 1 => vec![(b[0][0], b[0][1]); self.n],
            Some(b) => b.iter().map(|p| (p[0], p[1])).collect(),
            None => entry.as_ref().map(|e| e.x_box.clone()).unwrap_or_else(|| vec![(-1.0, 1.0); self.n]),
        };
        let y_box = match r.y_box {
            Some(b) => (b[0], b[1]),
            None => entry.as_ref().map(|e| e.y_box).unwrap_or((-1.0, 1.0)),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
        let lerp = |(a, b): (f64, f64), t: f64| a + (b - a) * t;
        (0..r.count)
            .map(|_| {
                let x = x_box.iter().map(|&bx| lerp(bx, rng.gen())).collect();
                let y1 = (0..self.n).map(|_| lerp(y_box, rng.gen())).collect();
                let y2 = (0..self.n).map(|_| lerp(y_box, rng.gen())).collect();
                Point::new(x, y1, y2).map_err(|e| bad("points.random", e))
            })
            .collect()
    }

    pub fn initial_point(&self) -> Result<Point, CliError> {
        let int = self.integrate.as_ref().ok_or_else(|| bad("integrate", "missing"))?;
        match &int.initial {
            Some(p) => p.to_point(self.n, "integrate.initial"),
            None => self.sample_points()?.into_iter().next().ok_or_else(|| bad("integrate.initial", "missing")),
        }
    }

    pub fn monitors(&self) -> Result<Vec<Monitor>, CliError> {
        let Some(int) = &self.integrate else { return Ok(Vec::new()) };
        int.monitors
            .iter()
            .enumerate()
            .map(|(k, m)| Monitor::from_name(m).map_err(|e| bad(&format!("integrate.monitors[{k}]"), e)))
            .collect()
    }

    pub fn diffeo(&self) -> Result<Diffeo2, CliError> {
        let d = self.diffeo.as_ref().ok_or_else(|| bad("diffeo", "required by transform-check"))?;
        Diffeo2::parse(d).map_err(|e| bad("diffeo", e))
    }
}

impl PointSpec {
    fn to_point(&self, n: usize, field: &str) -> Result<Point, CliError> {
        for (name, v) in [("x", &self.x), ("y1", &self.y1), ("y2", &self.y2)] {
            if v.len() != n {
                return Err(bad(&format!("{field}.{name}"), format!("expected {n} components, got {}", v.len())));
            }
        }
        Point::new(self.x.clone(), self.y1.clone(), self.y2.clone()).map_err(|e| bad(field, e))
    }
}

fn check_interval(field: &str, [a, b]: [f64; 2]) -> Result<(), CliError> {
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(bad(field, format!("invalid interval [{a}, {b}]")));
    }
    Ok(())
}

impl RandomPoints {
    fn validate(&self, n: usize) -> Result<(), CliError> {
        if self.count == 0 || self.count > MAX_SAMPLES {
            return Err(bad("points.random.count", format!("must be in 1..={MAX_SAMPLES}")));
        }
        if let Some(b) = &self.x_box {
            if b.len() != 1 && b.len() != n {
                return Err(bad("points.random.x_box", format!("expected 1 or {n} intervals")));
            }
            for &iv in b {
                check_interval("points.random.x_box", iv)?;
            }
        }
        if let Some(iv) = self.y_box {
            check_interval("points.random.y_box", iv)?;
        }
        Ok(())
    }
}

impl IntegrateConfig {
    fn validate(&self, n: usize) -> Result<(), CliError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(bad("integrate.dt", format!("must be positive and finite, got {}", self.dt)));
        }
        if !self.t0.is_finite() {
            return Err(bad("integrate.t0", "must be finite"));
        }
        if !(self.t1.is_finite() && self.t1 > self.t0) {
            return Err(bad("integrate.t1", "must be finite and greater than t0"));
        }
        if (self.t1 - self.t0) / self.dt > 1e7 {
            return Err(bad("integrate.dt", "more than 1e7 steps requested"));
        }
        for (k, m) in self.monitors.iter().enumerate() {
            Monitor::from_name(m).map_err(|e| bad(&format!("integrate.monitors[{k}]"), e))?;
        }
        if let Some(p) = &self.initial {
            p.to_point(n, "integrate.initial")?;
        }
        Ok(())
    }
}

/// Replace each named parameter in `formula` by its literal value.
pub fn substitute_parameters(formula: &str, params: &BTreeMap<String, f64>) -> Result<String, CliError> {
    for (name, v) in params {
        let valid = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid {
            return Err(bad("lagrangian.parameters", format!("invalid name `{name}`")));
        }
        if !v.is_finite() {
            return Err(bad("lagrangian.parameters", format!("`{name}` must be finite")));
        }
    }
    let mut out = String::with_capacity(formula.len());
    let mut used = std::collections::BTreeSet::new();
    let mut chars = formula.char_indices().peekable();
    while let Some((start, c)) = chars.next() {
        if c.is_ascii_alphabetic() || c == '_' {
            let mut end = start + c.len_utf8();
            while let Some(&(i, d)) = chars.peek() {
                if d.is_ascii_alphanumeric() || d == '_' {
                    end = i + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let ident = &formula[start..end];
            match params.get(ident) {
                Some(v) => {
                    used.insert(ident);
                    out.push_str(&format!("({v:?})"));
                }
                None => out.push_str(ident),
            }
        } else if c.is_ascii_digit() || c == '.' {
            // Numbers (including exponents such as `1e-3`) pass through whole.
            let mut end = start + 1;
            let bytes = formula.as_bytes();
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    end = k;
                    while end < bytes.len() && bytes[end].is_ascii_digit() {
                        end += 1;
                    }
                }
            }
            out.push_str(&formula[start..end]);
            while chars.peek().is_some_and(|&(i, _)| i < end) {
                chars.next();
            }
        } else {
            out.push(c);
        }
    }
    if let Some(unused) = params.keys().find(|k| !used.contains(k.as_str())) {
        return Err(bad("lagrangian.parameters", format!("`{unused}` does not occur in the formula")));
    }
    Ok(out)
}
