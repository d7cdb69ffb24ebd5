use proptest::prelude::*;
use t2m::bundle::{apply_j, apply_jstar, liouville_c1, liouville_c2};
use t2m::calculus::{partials, PartialRequest};
use t2m::connection::{connection_residuals, AdaptedFrame, ConnectionData};
use t2m::diffeo::Diffeo2;
use t2m::dynamics::integrate_craig_synge;
use t2m::lagrangian::DEFAULT_REGULARITY_TOL;
use t2m::registry;
use t2m::semispray::{c2_l, js_defect, lie_theta2_residual, liouville_identity, sl2_residual};
use t2m::{CotangentVecT2M, LagrangianSpec, Point, PointModel, ScalarField, TangentVecT2M};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

fn unit(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 3 * n)
}

fn vec3n(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 3 * n)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn j_is_nilpotent_and_dual_to_jstar(v in vec3n(2), w in vec3n(2), base in vec3n(2)) {
        let p = Point::from_flat(&base, 2).unwrap();
        let tv = TangentVecT2M::from_flat(p.clone(), &v).unwrap();
        let cw = CotangentVecT2M::from_flat(p.clone(), &w).unwrap();
        let j3 = apply_j(&apply_j(&apply_j(&tv)));
        prop_assert!(j3.flat().iter().all(|&c| c == 0.0));
        let lhs = apply_jstar(&cw).pair(&tv);
        let rhs = cw.pair(&apply_j(&tv));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        // J maps the second Liouville field to the first.
        prop_assert_eq!(apply_j(&liouville_c2(&p)).flat(), liouville_c1(&p).flat());
    }

    #[test]
    fn jet_partials_are_independent_of_request_set(u in unit(2)) {
        let e = registry::lookup("coupled", 2).unwrap();
        let p = e.point_from_unit(&u).unwrap();
        let all = PartialRequest::all_up_to(6, 3);
        let full = partials(&e.spec, &p, &all).unwrap();
        let value = partials(&e.spec, &p, &[PartialRequest::new(vec![0; 6]).unwrap()]).unwrap()[0];
        prop_assert_eq!(value, e.spec.eval(&p.flat()).unwrap());
        // A single request seeds fewer variables but must agree.
        for (r, &v) in all.iter().zip(&full).step_by(7) {
            let one = partials(&e.spec, &p, std::slice::from_ref(r)).unwrap()[0];
            prop_assert!((one - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn semispray_identities_hold_everywhere(u in unit(2), which in 0usize..6) {
        let e = &registry::entries(2)[which];
        let p = e.point_from_unit(&u).unwrap();
        let m = PointModel::new(&e.spec, &p, 3, DEFAULT_REGULARITY_TOL).unwrap();
        prop_assert_eq!(js_defect(&m), 0.0);
        prop_assert!(lie_theta2_residual(&m) <= 1e-10);
        prop_assert!(liouville_identity(&m).unwrap() <= 1e-10);
        prop_assert!(sl2_residual(&m).unwrap() <= 1e-10);
    }

    #[test]
    fn semi_riemannian_lagrangian_has_weight_four(u in unit(2), which in 0usize..3) {
        // L₂ = g(z⁽²⁾, z⁽²⁾) scales by λ⁴ under (y1, y2) ↦ (λy1, λ²y2), so
        // Euler's relation gives 𝔺₂L = 4L.
        let e = &registry::semi_riemannian_entries(2)[which];
        let p = e.point_from_unit(&u).unwrap();
        let m = PointModel::new(&e.spec, &p, 3, DEFAULT_REGULARITY_TOL).unwrap();
        let l = m.lagrangian().value();
        prop_assert!((c2_l(&m).value() - 4.0 * l).abs() <= 1e-11 * (1.0 + l.abs()));
    }

    #[test]
    fn connection_relations(u in unit(2), which in 0usize..6) {
        let e = &registry::entries(2)[which];
        let p = e.point_from_unit(&u).unwrap();
        let m = PointModel::new(&e.spec, &p, 4, DEFAULT_REGULARITY_TOL).unwrap();
        let c = ConnectionData::from_model(&m).unwrap();
        prop_assert!(c.nm_relation_defect() <= 1e-12);
        prop_assert!(AdaptedFrame::new(&c).duality_defect() <= 1e-12);
        prop_assert!(connection_residuals(&m, &c).max() <= 1e-9);
    }

    #[test]
    fn jet_transform_round_trips(base in vec3n(2)) {
        let phi = Diffeo2::parse(&["x_1 + x_2^3/10", "x_2 + sin(x_1)/2"]).unwrap();
        let p = Point::from_flat(&base, 2).unwrap();
        let q = phi.jet_transform(&p).unwrap();
        let back = phi.inverse_jet_transform(&q, p.x()).unwrap();
        prop_assert!(back.max_abs_diff(&p) <= 1e-10);
    }

    #[test]
    fn jet_transform_is_functorial(base in vec3n(1)) {
        let a = Diffeo2::parse(&["x_1 + x_1^3/10"]).unwrap();
        let b = Diffeo2::parse(&["2*x_1 + sin(x_1)/3"]).unwrap();
        let p = Point::from_flat(&base, 1).unwrap();
        let two_steps = b.jet_transform(&a.jet_transform(&p).unwrap()).unwrap();
        let composed = b.compose(&a).unwrap().jet_transform(&p).unwrap();
        prop_assert!(two_steps.max_abs_diff(&composed) <= 1e-11 * (1.0 + two_steps.flat().iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn flat_flow_is_a_quadratic(base in vec3n(2)) {
        let p0 = Point::from_flat(&base, 2).unwrap();
        let traj = integrate_craig_synge(&registry::flat(2), &p0, 0.0, 1.0, 1e-2).unwrap();
        for (t, p) in traj.times().iter().zip(traj.points()).step_by(10) {
            for i in 0..2 {
                let x = p0.x()[i] + p0.y1()[i] * t + p0.y2()[i] * t * t;
                prop_assert!((p.x()[i] - x).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn expression_and_builtin_agree(u in unit(1)) {
        // The same Lagrangian entered as text must give the same semispray.
        let e = registry::lookup("quartic", 1).unwrap();
        let text = LagrangianSpec::expression("y2_1^2 + y1_1^4", 1).unwrap();
        let p = e.point_from_unit(&u).unwrap();
        let a = PointModel::new(&e.spec, &p, 2, DEFAULT_REGULARITY_TOL).unwrap().coeffs();
        let b = PointModel::new(&text, &p, 2, DEFAULT_REGULARITY_TOL).unwrap().coeffs();
        prop_assert!((a[0] - b[0]).abs() <= 1e-14);
        // With d_T(2 y2) = 0 this is 3G = -2 y1³.
        prop_assert!((a[0] + 2.0 * p.y1()[0].powi(3) / 3.0).abs() <= 1e-14);
    }
}
