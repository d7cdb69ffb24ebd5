//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use t2m::calculus::{fd_oracle_partial, partials, relative_gap, PartialRequest};
use t2m::connection::{
    adapted_omega2, connection_residuals, gc_metric, n1_agreement_residual, nabla2_g, nabla_g, AdaptedFrame,
    ConnectionData,
};
use t2m::diffeo::{metric_law_defect, z2_law_defect, Diffeo2};
use t2m::dynamics::{
    action_variation_check, convergence_orders, energy_identity, integrate_craig_synge, nabla2_xdot, FlowCurve,
    PolyCurve, VariationField,
};
use t2m::lagrangian::{omega2, DEFAULT_REGULARITY_TOL};
use t2m::linalg::rank;
use t2m::registry::{self, RegistryEntry};
use t2m::semispray::{cartan_identities, lie_theta2_residual, verify_isomega};
use t2m::{Matrix, Point, PointModel, Result, TaylorJet};

type Criterion = fn() -> Result<Verdict>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn samples(entry: &RegistryEntry, count: usize, seed: u64) -> Result<Vec<Point>> {
    let n = entry.x_box.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: Vec<f64> = (0..3 * n).map(|_| rng.gen()).collect();
            entry.point_from_unit(&u)
        })
        .collect()
}

fn all_entries() -> Vec<RegistryEntry> {
    [1, 2].into_iter().flat_map(registry::entries).collect()
}

fn label(e: &RegistryEntry) -> String {
    format!("{}/n={}", e.name(), e.x_box.len())
}

/// Largest value and where it occurred.
#[derive(Default)]
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    /// A NaN, once seen, is kept so that the criterion fails.
    fn see(&mut self, v: f64, at: impl FnOnce() -> String) {
        if self.value.is_nan() {
            return;
        }
        if v.is_nan() || v > self.value || self.at.is_empty() {
            self.value = v;
            self.at = at();
        }
    }
}

/// `ℒ_S θ² = θ¹`, `i_S ω² + d(𝔺₁L) = θ¹`, and sensitivity of the former to
/// a shift of `G`.
fn criterion_1() -> Result<Verdict> {
    let (mut lie, mut iso) = (Worst::default(), Worst::default());
    let mut min_perturbed = f64::INFINITY;
    for e in all_entries() {
        let n = e.x_box.len();
        for p in samples(&e, 100, 101)? {
            let m = PointModel::new(&e.spec, &p, 3, DEFAULT_REGULARITY_TOL)?;
            lie.see(lie_theta2_residual(&m), || label(&e));
            iso.see(verify_isomega(&m)?, || label(&e));
            let mut delta = vec![TaylorJet::constant(0.0); n];
            delta[0] = TaylorJet::constant(1e-3);
            min_perturbed = min_perturbed.min(lie_theta2_residual(&m.with_coeff_perturbation(&delta)));
        }
    }
    verdict(
        lie.value <= 1e-8 && iso.value <= 1e-8 && min_perturbed > 1e-5,
        format!(
            "max |L_S theta2 - theta1| = {:.2e} ({}), max isomega = {:.2e} ({}), tol 1e-8; \
             min residual with G + 1e-3 e1 = {:.2e} > 1e-5",
            lie.value, lie.at, iso.value, iso.at, min_perturbed
        ),
    )
}

/// The three identities for the Cartan forms and `rank ω² = 2n`.
fn criterion_2() -> Result<Verdict> {
    let mut worst = [Worst::default(), Worst::default(), Worst::default()];
    let mut bad_rank = Vec::new();
    for e in all_entries() {
        let n = e.x_box.len();
        for p in samples(&e, 100, 101)? {
            let m = PointModel::new(&e.spec, &p, 3, DEFAULT_REGULARITY_TOL)?;
            let r = cartan_identities(&m)?;
            for (w, v) in worst.iter_mut().zip([r.lagrangian_subbundles, r.contractions, r.lie_derivatives]) {
                w.see(v, || label(&e));
            }
            let k = rank(&omega2(&e.spec, &p)?.w, 1e-10);
            if k != 2 * n {
                bad_rank.push(format!("{} rank {k}", label(&e)));
            }
        }
    }
    let max = worst.iter().map(|w| w.value).fold(0.0, f64::max);
    verdict(
        max <= 1e-8 && bad_rank.is_empty(),
        format!(
            "subbundles {:.2e}, contractions {:.2e}, Lie derivatives {:.2e} (tol 1e-8); rank(omega2) = 2n at all {} points{}",
            worst[0].value,
            worst[1].value,
            worst[2].value,
            all_entries().len() * 100,
            if bad_rank.is_empty() { String::new() } else { format!(", violations: {}", bad_rank.join(", ")) }
        ),
    )
}

/// Defining conditions of the nonlinear connection and agreement of the
/// two `N⁽¹⁾` computations.
fn criterion_3() -> Result<Verdict> {
    let mut w = [Worst::default(), Worst::default(), Worst::default(), Worst::default()];
    let mut n1 = Worst::default();
    for e in all_entries() {
        for p in samples(&e, 100, 103)? {
            let m = PointModel::new(&e.spec, &p, 4, DEFAULT_REGULARITY_TOL)?;
            let c = ConnectionData::from_model(&m)?;
            let r = connection_residuals(&m, &c);
            for (slot, v) in w.iter_mut().zip([r.condition1, r.nabla2_g, r.subbundles, r.adapted_omega]) {
                slot.see(v, || label(&e));
            }
            n1.see(n1_agreement_residual(&m, &c), || label(&e));
        }
    }
    let max = w.iter().map(|x| x.value).fold(0.0, f64::max);
    verdict(
        max <= 1e-8 && n1.value <= 1e-9,
        format!(
            "condition 1 {:.2e}, nabla2 g {:.2e}, subbundles {:.2e}, adapted omega2 {:.2e} (tol 1e-8); \
             N1 agreement {:.2e} (tol 1e-9)",
            w[0].value, w[1].value, w[2].value, w[3].value, n1.value
        ),
    )
}

fn max_vec_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Generic pipeline against the semi-Riemannian closed forms.
fn criterion_4() -> Result<Verdict> {
    let mut w = [0.0f64; 6];
    for e in [registry::lookup("conformal1d", 1)?, registry::lookup("diag-exp-2d", 2)?] {
        let sr = e.spec.as_semi_riemannian().expect("semi-Riemannian entry");
        let n = e.x_box.len();
        for p in samples(&e, 200, 104)? {
            let m = PointModel::new(&e.spec, &p, 4, DEFAULT_REGULARITY_TOL)?;
            let c = ConnectionData::from_model(&m)?;
            let mut omega = Matrix::zeros(3 * n, 3 * n);
            omega.set_block(2 * n, 0, &c.g.scale(2.0));
            omega.set_block(0, 2 * n, &c.g.scale(-2.0));
            let mut gc = Matrix::zeros(3 * n, 3 * n);
            gc.set_block(0, 2 * n, &c.g);
            gc.set_block(2 * n, 0, &c.g);
            gc.set_block(n, n, &c.g);
            let vals = [
                max_vec_gap(&sr.closed_form_g(&p)?, &m.coeffs()),
                sr.closed_form_n1(&p)?.max_abs_diff(&c.n1),
                nabla_g(&c).norm_inf(),
                nabla2_g(&c).norm_inf(),
                adapted_omega2(&m, &c).max_abs_diff(&omega),
                AdaptedFrame::new(&c).congruence(&gc_metric(&c)).max_abs_diff(&gc),
            ];
            for (slot, v) in w.iter_mut().zip(vals) {
                *slot = slot.max(v);
            }
        }
    }
    verdict(
        w.iter().all(|&v| v <= 1e-8),
        format!(
            "G {:.2e}, N1 {:.2e}, nabla g {:.2e}, nabla2 g {:.2e}, adapted omega2 {:.2e}, adapted g^c {:.2e} \
             over 200 points on conformal1d and diag-exp-2d (tol 1e-8)",
            w[0], w[1], w[2], w[3], w[4], w[5]
        ),
    )
}

/// Exact quadratics for the flat Lagrangian, fourth-order convergence and
/// the along-curve identities for conformal1d.
fn criterion_5() -> Result<Verdict> {
    let mut flat_err = 0.0f64;
    for n in [1, 2] {
        let x: Vec<f64> = (0..n).map(|i| 0.3 * i as f64).collect();
        let y1: Vec<f64> = (0..n).map(|i| 1.0 - 0.5 * i as f64).collect();
        let y2: Vec<f64> = (0..n).map(|i| 1.0 + 0.25 * i as f64).collect();
        let p0 = Point::new(x.clone(), y1.clone(), y2.clone())?;
        let traj = integrate_craig_synge(&registry::flat(n), &p0, 0.0, 1.0, 1e-3).map_err(|f| f.error)?;
        let exact: Vec<f64> = (0..n)
            .map(|i| x[i] + y1[i] + y2[i])
            .chain((0..n).map(|i| y1[i] + 2.0 * y2[i]))
            .chain(y2.iter().copied())
            .collect();
        flat_err = flat_err.max(max_vec_gap(&traj.last().flat(), &exact));
    }

    let conformal = registry::lookup("conformal1d", 1)?.spec;
    let coupled = registry::coupled(2);
    let mut orders = convergence_orders(
        &conformal,
        &Point::new(vec![0.0], vec![1.0], vec![0.0])?,
        1.0,
        &[1e-2, 5e-3, 2.5e-3],
        2.5e-3 / 16.0,
    )?;
    orders.extend(convergence_orders(
        &coupled,
        &Point::new(vec![0.1, -0.2], vec![0.4, 0.3], vec![0.2, -0.1])?,
        1.0,
        &[2e-2, 1e-2, 5e-3],
        5e-3 / 16.0,
    )?);
    let orders_ok = orders.iter().all(|o| (3.7..=4.3).contains(o));

    let sr = conformal.as_semi_riemannian().expect("semi-Riemannian");
    let (mut nab, mut energy) = (0.0f64, 0.0f64);
    for p0 in [[0.0, 1.0, 0.0], [0.4, -0.7, 0.3], [-0.5, 0.6, -0.4]] {
        let p0 = Point::new(vec![p0[0]], vec![p0[1]], vec![p0[2]])?;
        let traj = integrate_craig_synge(&conformal, &p0, 0.0, 1.0, 1e-3).map_err(|f| f.error)?;
        nab = nabla2_xdot(sr, &traj)?.iter().fold(nab, |a, v| a.max(v.abs()));
        energy = energy_identity(sr, &traj)?.iter().fold(energy, |a, v| a.max(v.abs()));
    }
    let fmt_orders: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
    verdict(
        flat_err <= 1e-10 && orders_ok && nab <= 1e-5 && energy <= 1e-5,
        format!(
            "flat endpoint error {flat_err:.2e} (tol 1e-10); RK4 orders [{}] within [3.7, 4.3]; \
             conformal1d max |nabla2 xdot| {nab:.2e}, max energy residual {energy:.2e} (tol 1e-5)",
            fmt_orders.join(", ")
        ),
    )
}

/// First variation of the action against the integrated Craig-Synge
/// covector.
fn criterion_6() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut defect = Worst::default();
    let mut on_solution = Worst::default();
    for e in all_entries() {
        let n = e.x_box.len();
        for _ in 0..5 {
            let coeffs = (0..n)
                .map(|i| {
                    let (lo, hi) = e.x_box[i];
                    let mid = 0.5 * (lo + hi) + 0.1 * (hi - lo) * (rng.gen::<f64>() - 0.5);
                    let mut c = vec![mid];
                    c.extend((0..3).map(|_| 0.6 * (rng.gen::<f64>() - 0.5)));
                    c
                })
                .collect();
            let curve = PolyCurve { coeffs };
            let v = VariationField::sine((0..n).map(|_| (0..3).map(|_| rng.gen::<f64>() - 0.5).collect()).collect());
            let r = action_variation_check(&e.spec, &curve, &v, 64)?;
            defect.see(r.defect(), || label(&e));
        }
        // Half-size fibre data keeps the quartic flow bounded on [0, 1].
        let u: Vec<f64> =
            (0..3 * n).map(|k| if k < n { rng.gen::<f64>() } else { 0.25 + 0.5 * rng.gen::<f64>() }).collect();
        let p0 = e.point_from_unit(&u)?;
        let flow = FlowCurve::new(&e.spec, &p0, 1.0, 1e-3)?;
        let v = VariationField::sine((0..n).map(|_| (0..3).map(|_| rng.gen::<f64>() - 0.5).collect()).collect());
        let r = action_variation_check(&e.spec, &flow, &v, 64)?;
        on_solution.see(r.lhs.abs().max(r.rhs.abs()), || label(&e));
    }
    verdict(
        defect.value <= 1e-7 && on_solution.value <= 1e-7,
        format!(
            "max |dI/de - integral| = {:.2e} ({}) over 5 pairs per Lagrangian; \
             along solutions max(|dI/de|, |integral|) = {:.2e} ({}) (tol 1e-7)",
            defect.value, defect.at, on_solution.value, on_solution.at
        ),
    )
}

/// Every partial of order at most 4 against the finite-difference oracle.
fn criterion_7() -> Result<Verdict> {
    let mut worst = Worst::default();
    let mut count = 0usize;
    for e in all_entries() {
        let n = e.x_box.len();
        let reqs = PartialRequest::all_up_to(3 * n, 4);
        for p in samples(&e, 50, 107)? {
            let exact = partials(&e.spec, &p, &reqs)?;
            for (r, &a) in reqs.iter().zip(&exact) {
                let b = fd_oracle_partial(&e.spec, &p, r)?;
                worst.see(relative_gap(a, b), || format!("{} {:?}", label(&e), r.exponents()));
                count += 1;
            }
        }
    }
    verdict(
        worst.value <= 1e-6,
        format!("{count} partials, max relative gap {:.2e} at {} (tol 1e-6)", worst.value, worst.at),
    )
}

/// Tensor laws of `g` and `z⁽²⁾` under two base diffeomorphisms.
fn criterion_8() -> Result<Verdict> {
    let maps =
        [(1, Diffeo2::parse(&["x_1 + x_1^3/10"])?), (2, Diffeo2::parse(&["x_1 + x_2^3/10", "x_2 + sin(x_1)/2"])?)];
    let (mut metric, mut z2) = (Worst::default(), Worst::default());
    let mut z2_cases = 0usize;
    for (n, phi) in &maps {
        for e in registry::entries(*n) {
            for p in samples(&e, 50, 108)? {
                metric.see(metric_law_defect(&e.spec, phi, &p)?, || label(&e));
                if let Some(sr) = e.spec.as_semi_riemannian() {
                    z2.see(z2_law_defect(sr, phi, &p)?, || label(&e));
                    z2_cases += 1;
                }
            }
        }
    }
    verdict(
        metric.value <= 1e-8 && z2.value <= 1e-8 && z2_cases > 0,
        format!(
            "metric congruence {:.2e} ({}), z2 vector law {:.2e} ({}) under x + x^3/10 and a 2d polynomial-trig map (tol 1e-8)",
            metric.value, metric.at, z2.value, z2.at
        ),
    )
}

/// End-to-end CLI run: determinism over the four commands and the exit
/// code contract.
fn criterion_9() -> Result<Verdict> {
    let dir = std::env::temp_dir().join(format!("t2m-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| t2m::Error::Invalid(e.to_string()))?;
    let cfg = |name: &str, body: &str| -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).expect("write config");
        p
    };
    let run = |cmd: &str, path: &PathBuf, extra: &[&str]| {
        let mut args = vec!["t2m".to_string(), cmd.to_string(), "--config".into(), path.display().to_string()];
        args.extend(["--quiet".to_string()]);
        args.extend(extra.iter().map(|s| s.to_string()));
        t2m_cli::run_args(args)
    };

    let mut failures = Vec::new();
    let main = cfg(
        "main.json",
        r#"{"n": 2, "lagrangian": {"kind": "builtin", "name": "diag-exp-2d"},
            "points": {"random": {"count": 25, "seed": 2024}},
            "integrate": {"t1": 1, "dt": 1e-2, "initial": {"x": [0.1, 0.2], "y1": [0.5, -0.3], "y2": [0.0, 0.1]},
                          "monitors": ["craig_synge_residual", "energy_identity", "nabla2_xdot", "L1", "L2"]},
            "diffeo": ["x_1", "x_2 + x_1^2"]}"#,
    );
    let csv = cfg(
        "csv.json",
        &format!(
            r#"{{"n": 1, "lagrangian": {{"kind": "builtin", "name": "conformal1d"}}, "point": {{"x": [0], "y1": [1], "y2": [0]}},
                 "integrate": {{"t1": 1, "dt": 1e-3, "monitors": ["nabla2_xdot"]}}, "format": "csv",
                 "output": {:?}}}"#,
            dir.join("traj.csv").display().to_string()
        ),
    );
    for cmd in ["inspect", "verify", "integrate", "transform-check"] {
        let (a, b) = (run(cmd, &main, &[]), run(cmd, &main, &[]));
        if a.exit != 0 || a.stdout != b.stdout || a.stdout.is_empty() {
            failures.push(format!("{cmd}: exit {} / deterministic {}", a.exit, a.stdout == b.stdout));
        }
    }
    let first = run("integrate", &csv, &[]);
    let bytes_a = std::fs::read(dir.join("traj.csv")).unwrap_or_default();
    let second = run("integrate", &csv, &[]);
    let bytes_b = std::fs::read(dir.join("traj.csv")).unwrap_or_default();
    if first.exit != 0 || second.exit != 0 || bytes_a.is_empty() || bytes_a != bytes_b {
        failures.push("integrate csv not byte-identical".into());
    }

    let perturbed = run("verify", &main, &["--perturb", "1e-3"]);
    let bad_dt = run(
        "integrate",
        &cfg(
            "bad_dt.json",
            r#"{"n": 1, "lagrangian": {"kind": "builtin", "name": "flat"}, "point": {"x": [0], "y1": [1], "y2": [1]},
                "integrate": {"t1": 1, "dt": 0}}"#,
        ),
        &[],
    );
    let degenerate = run(
        "inspect",
        &cfg(
            "degenerate.json",
            r#"{"n": 1, "lagrangian": {"kind": "expression", "formula": "y1_1*y2_1"}, "point": {"x": [0], "y1": [1], "y2": [1]}}"#,
        ),
        &[],
    );
    let singular = run(
        "transform-check",
        &cfg(
            "square.json",
            r#"{"n": 1, "lagrangian": {"kind": "builtin", "name": "conformal1d"}, "diffeo": ["x_1^2"],
                "points": {"random": {"count": 20, "seed": 3}}}"#,
        ),
        &[],
    );
    let blow_up = run(
        "integrate",
        &cfg(
            "blowup.json",
            r#"{"n": 1, "lagrangian": {"kind": "expression", "formula": "y2_1^2 + y1_1^4"},
                "point": {"x": [0], "y1": [3], "y2": [0]}, "integrate": {"t1": 5, "dt": 1e-2}, "format": "csv"}"#,
        ),
        &[],
    );
    let partial_rows = blow_up.stdout.lines().count();
    let mut codes = String::new();
    for (what, got, want) in [
        ("perturbed verify", perturbed.exit, 1),
        ("dt = 0", bad_dt.exit, 1),
        ("degenerate", degenerate.exit, 2),
        ("singular Jacobian", singular.exit, 2),
        ("blow-up", blow_up.exit, 3),
    ] {
        let _ = write!(codes, "{what} {got}, ");
        if got != want {
            failures.push(format!("{what}: exit {got}, expected {want}"));
        }
    }
    if !bad_dt.stderr.contains("integrate.dt") {
        failures.push("dt error does not name the field".into());
    }
    if partial_rows < 3 {
        failures.push("blow-up kept no partial trajectory".into());
    }
    let _ = std::fs::remove_dir_all(&dir);
    verdict(
        failures.is_empty(),
        format!(
            "four commands byte-identical on rerun; exit codes: {codes}partial rows {partial_rows}{}",
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join("; ")) }
        ),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("semispray uniqueness", criterion_1),
        ("Cartan form identities", criterion_2),
        ("nonlinear connection", criterion_3),
        ("semi-Riemannian closed forms", criterion_4),
        ("Craig-Synge dynamics", criterion_5),
        ("first variation", criterion_6),
        ("jets vs finite differences", criterion_7),
        ("d-tensor laws", criterion_8),
        ("CLI contract", criterion_9),
    ];
    let start = std::time::Instant::now();
    let results: Vec<(Result<Verdict>, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let t = std::time::Instant::now();
                    (f(), t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let mut failed = 0;
    for (k, ((name, _), (res, secs))) in criteria.iter().zip(results).enumerate() {
        let (pass, detail) = match res {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {} ({name}): {} [{secs:.1}s] {detail}", k + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {}/9 passed in {:.1}s", 9 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
