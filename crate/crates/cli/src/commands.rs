//! The four commands. Each returns its result entries, plus the trajectory
//! for `integrate`.

use rayon::prelude::*;
use t2m::connection::{connection_residuals, n1_agreement_residual, ConnectionData};
use t2m::diffeo::{metric_law_defect, z2_law_defect, Diffeo2, DEFAULT_JACOBIAN_TOL};
use t2m::dynamics::{integrate_craig_synge, Trajectory};
use t2m::lagrangian::{theta1, theta2, DEFAULT_REGULARITY_TOL};
use t2m::semispray::{cartan_identities, lie_omega2_equals_omega1, lie_theta2_residual, sl2_residual, verify_isomega};
use t2m::{Error, LagrangianSpec, Matrix, Point, PointModel};

use crate::config::RunConfig;
use crate::report::{ResultEntry, TrajectoryTable};
use crate::CliError;

fn coord_name(flat: usize, n: usize) -> String {
    let block = ["x", "y1", "y2"][flat / n];
    format!("{block}_{}", flat % n + 1)
}

fn push_matrix(out: &mut Vec<ResultEntry>, prefix: &str, name: &str, m: &Matrix) {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            out.push(ResultEntry::info(format!("{prefix}.{name}[{},{}]", i + 1, j + 1), m[(i, j)]));
        }
    }
}

pub fn inspect(cfg: &RunConfig, l: &LagrangianSpec) -> Result<Vec<ResultEntry>, CliError> {
    let n = cfg.n;
    let mut out = Vec::new();
    for (k, p) in cfg.sample_points()?.iter().enumerate() {
        let prefix = format!("point[{k}]");
        let m = PointModel::new(l, p, 4, DEFAULT_REGULARITY_TOL)?;
        let c = ConnectionData::from_model(&m)?;
        for (i, v) in p.flat().iter().enumerate() {
            out.push(ResultEntry::info(format!("{prefix}.{}", coord_name(i, n)), *v));
        }
        out.push(ResultEntry::info(format!("{prefix}.rcond"), m.metric().rcond));
        push_matrix(&mut out, &prefix, "g", &m.metric().g);
        push_matrix(&mut out, &prefix, "g_inv", &m.g_inverse());
        for (i, g) in m.coeffs().iter().enumerate() {
            out.push(ResultEntry::info(format!("{prefix}.G[{}]", i + 1), *g));
        }
        push_matrix(&mut out, &prefix, "N1", &c.n1);
        push_matrix(&mut out, &prefix, "N2", &c.n2);
        push_matrix(&mut out, &prefix, "M1", &c.m1);
        push_matrix(&mut out, &prefix, "M2", &c.m2);
        for (name, form) in [("theta1", theta1(l, p)?), ("theta2", theta2(l, p)?)] {
            for (i, v) in form.flat().iter().enumerate() {
                out.push(ResultEntry::info(format!("{prefix}.{name}.d{}", coord_name(i, n)), *v));
            }
        }
    }
    Ok(out)
}

/// Names of the verify residuals, in report order.
pub const VERIFY_NAMES: [&str; 12] = [
    "prop1.1",
    "prop1.2",
    "prop1.3",
    "thm1.lstheta",
    "cor.isomega",
    "cor.lieomega",
    "thm2.cond1",
    "thm2.nabla2g",
    "thm2.dhtheta",
    "thm2.adaptedomega",
    "prop2.n1",
    "sl2",
];

fn verify_point(l: &LagrangianSpec, p: &Point, perturb: Option<f64>) -> t2m::Result<[f64; 12]> {
    let m = PointModel::new(l, p, 4, DEFAULT_REGULARITY_TOL)?;
    let p1 = cartan_identities(&m)?;
    let mut c = ConnectionData::from_model(&m)?;
    if let Some(eps) = perturb {
        c = c.with_n2_perturbation(eps);
    }
    let t2 = connection_residuals(&m, &c);
    Ok([
        p1.lagrangian_subbundles,
        p1.contractions,
        p1.lie_derivatives,
        lie_theta2_residual(&m),
        verify_isomega(&m)?,
        lie_omega2_equals_omega1(&m)?,
        t2.condition1,
        t2.nabla2_g,
        t2.subbundles,
        t2.adapted_omega,
        n1_agreement_residual(&m, &c),
        sl2_residual(&m)?,
    ])
}

/// Maximum of each residual over the sample. Points are evaluated in
/// parallel; the first failing point (by index) decides the error.
pub fn verify(cfg: &RunConfig, l: &LagrangianSpec, perturb: Option<f64>) -> Result<Vec<ResultEntry>, CliError> {
    let points = cfg.sample_points()?;
    let per_point: Vec<t2m::Result<[f64; 12]>> = points.par_iter().map(|p| verify_point(l, p, perturb)).collect();
    let mut worst = [0.0f64; 12];
    for r in per_point {
        for (w, v) in worst.iter_mut().zip(r?) {
            // NaN propagates so that it fails the comparison below.
            *w = if v.is_nan() || w.is_nan() { f64::NAN } else { w.max(v) };
        }
    }
    Ok(VERIFY_NAMES.iter().zip(worst).map(|(name, v)| ResultEntry::residual(*name, v, cfg.tolerance)).collect())
}

/// `SingularJacobian` if `Dφ` is singular at a sample or its determinant
/// changes sign between samples (then it vanishes somewhere in between).
pub fn check_jacobians(phi: &Diffeo2, points: &[Point]) -> t2m::Result<()> {
    let mut sign = 0.0f64;
    for p in points {
        let det = phi.jacobian(p.x())?.determinant();
        if det.is_nan() || det.abs() <= DEFAULT_JACOBIAN_TOL {
            return Err(Error::SingularJacobian { det });
        }
        if sign != 0.0 && det.signum() != sign {
            // By continuity det Dφ vanishes between the two samples.
            return Err(Error::SingularJacobian { det: 0.0 });
        }
        sign = det.signum();
    }
    Ok(())
}

pub fn transform_check(cfg: &RunConfig, l: &LagrangianSpec) -> Result<Vec<ResultEntry>, CliError> {
    let phi = cfg.diffeo()?;
    let points = cfg.sample_points()?;
    check_jacobians(&phi, &points)?;
    let metric: Vec<t2m::Result<f64>> = points.par_iter().map(|p| metric_law_defect(l, &phi, p)).collect();
    let mut out = vec![ResultEntry::residual("transform.metric_law", max_of(metric)?, cfg.tolerance)];
    if let Some(sr) = l.as_semi_riemannian() {
        let z2: Vec<t2m::Result<f64>> = points.par_iter().map(|p| z2_law_defect(sr, &phi, p)).collect();
        out.push(ResultEntry::residual("transform.z2_law", max_of(z2)?, cfg.tolerance));
    }
    Ok(out)
}

fn max_of(values: Vec<t2m::Result<f64>>) -> t2m::Result<f64> {
    let mut m = 0.0f64;
    for v in values {
        let v = v?;
        m = if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) };
    }
    Ok(m)
}

/// Integration outcome; `error` is set when the run stopped early.
pub struct IntegrateRun {
    pub trajectory: Trajectory<f64>,
    pub results: Vec<ResultEntry>,
    pub error: Option<Error>,
}

pub fn integrate(cfg: &RunConfig, l: &LagrangianSpec) -> Result<IntegrateRun, CliError> {
    let int = cfg.integrate.as_ref().ok_or_else(|| CliError::Config("`integrate`: missing".into()))?;
    let p0 = cfg.initial_point()?;
    let monitors = cfg.monitors()?;
    let (traj, error) = match integrate_craig_synge(l, &p0, int.t0, int.t1, int.dt) {
        Ok(t) => (t, None),
        // Nothing was integrated: the initial point itself is unusable.
        Err(f) if f.partial.len() == 1 && !matches!(f.error, Error::Step { .. }) => return Err(f.error.into()),
        Err(f) => (f.partial, Some(f.error)),
    };
    let traj = match traj.clone().with_monitors(l, &monitors) {
        Ok(t) => t,
        Err(e) if error.is_none() => return Err(e.into()),
        // Too few samples for the monitors of a partial run.
        Err(_) => traj,
    };
    let mut results = vec![ResultEntry::info("samples", traj.len() as f64)];
    results.push(ResultEntry::info("t_final", *traj.times().last().expect("non-empty")));
    for (i, v) in traj.last().flat().iter().enumerate() {
        results.push(ResultEntry::info(format!("final.{}", coord_name(i, cfg.n)), *v));
    }
    for (name, values) in traj.monitors() {
        let m = values.iter().fold(0.0f64, |a, v| if v.is_nan() || a.is_nan() { f64::NAN } else { a.max(v.abs()) });
        results.push(ResultEntry::info(format!("max_abs.{name}"), m));
    }
    Ok(IntegrateRun { trajectory: traj, results, error })
}

pub fn trajectory_table(traj: &Trajectory<f64>) -> TrajectoryTable {
    let n = traj.dim();
    let mut columns = vec!["t".to_string()];
    columns.extend((0..3 * n).map(|i| coord_name(i, n)));
    columns.extend(traj.monitors().iter().map(|(name, _)| name.clone()));
    let rows = traj
        .points()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut row = vec![traj.times()[k]];
            row.extend(p.flat());
            row.extend(traj.monitors().iter().map(|(_, v)| v[k]));
            row
        })
        .collect();
    TrajectoryTable { columns, rows }
}
