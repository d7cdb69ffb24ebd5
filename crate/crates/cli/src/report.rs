//! Machine-readable output.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One named quantity with its acceptance threshold, if it has one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub name: String,
    /// Non-finite values are written as `null`.
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_as_nan")]
    pub value: f64,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl ResultEntry {
    /// A residual that passes when `value <= tolerance`.
    pub fn residual(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        ResultEntry { name: name.into(), value, tolerance: Some(tolerance), pass: value <= tolerance }
    }

    /// A reported value with no threshold.
    pub fn info(name: impl Into<String>, value: f64) -> Self {
        ResultEntry { name: name.into(), value, tolerance: None, pass: true }
    }
}

/// Trajectory samples in column form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config_digest: String,
    pub results: Vec<ResultEntry>,
    pub exit: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectoryTable>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(src: &str) -> serde_json::Result<Self> {
        serde_json::from_str(src)
    }

    /// `name,value,tolerance,pass`, one row per result.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,value,tolerance,pass\n");
        for r in &self.results {
            let tol = r.tolerance.map(|t| format!("{t:e}")).unwrap_or_default();
            s.push_str(&format!("{},{:.16e},{},{}\n", r.name, r.value, tol, r.pass));
        }
        s
    }

    /// Aligned table for humans.
    pub fn to_table(&self) -> String {
        let width = self.results.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        let mut s = format!("{:width$}  {:>24}  {:>9}  status\n", "name", "value", "tolerance");
        for r in &self.results {
            let tol = r.tolerance.map(|t| format!("{t:.1e}")).unwrap_or_else(|| "-".into());
            let status = match (r.tolerance, r.pass) {
                (None, _) => "",
                (Some(_), true) => "PASS",
                (Some(_), false) => "FAIL",
            };
            s.push_str(&format!("{:width$}  {:>24.16e}  {:>9}  {status}\n", r.name, r.value, tol));
        }
        if let Some(e) = &self.error {
            s.push_str(&format!("error: {e}\n"));
        }
        s.push_str(&format!("exit {}\n", self.exit));
        s
    }
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn null_as_nan<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}
