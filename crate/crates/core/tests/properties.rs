use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use lfslab::feature_size::surface_sample;
use lfslab::projection::{distance, level_set_curvatures, offset_point, project, Side};
use lfslab::surface::tangent_basis;
use lfslab::verifier::{chord_sphere_point, integrate_theta, verify_pair};
use lfslab::{ImplicitSurface, LfsMode, SurfaceModel, Vec3};

fn torus() -> ImplicitSurface {
    ImplicitSurface::torus(2.0, 1.0).unwrap()
}

fn on_sphere(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

fn on_torus(u: f64, v: f64) -> Vec3 {
    let rho = 2.0 + v.cos();
    Vec3::new(rho * u.cos(), rho * u.sin(), v.sin())
}

fn point_in(lo: f64, hi: f64) -> impl Strategy<Value = Vec3> {
    (lo..hi, lo..hi, lo..hi).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sphere_distance_matches_radius_gap(x in point_in(-2.0, 2.0)) {
        prop_assume!(x.norm() > 0.05);
        let s = ImplicitSurface::unit_sphere();
        let r = project(&s, &x).unwrap();
        prop_assert!((r.distance - (x.norm() - 1.0).abs()).abs() < 1e-12);
        prop_assert!((r.foot - x.normalize()).norm() < 1e-12);
        prop_assert_eq!(r.side, if x.norm() < 1.0 { Side::Inside } else { Side::Outside });
    }

    #[test]
    fn torus_distance_matches_tube_gap(x in point_in(-4.0, 4.0), z in -1.9f64..1.9) {
        let x = Vec3::new(x.x, x.y, z);
        let rho = x.xy().norm();
        let tube = ((rho - 2.0).powi(2) + x.z * x.z).sqrt();
        // Stay clear of the core circle and the axis, where the closest
        // point is not unique.
        prop_assume!(tube > 0.05 && rho > 0.05);
        let r = project(&torus(), &x).unwrap();
        prop_assert!((r.distance - (tube - 1.0).abs()).abs() < 1e-11, "{} vs {}", r.distance, (tube - 1.0).abs());
    }

    #[test]
    fn projection_is_idempotent(x in point_in(-2.2, 2.2)) {
        let s = ImplicitSurface::ellipsoid(2.0, 1.5, 1.0).unwrap();
        let Ok(r) = project(&s, &x) else { return Ok(()) };
        let again = project(&s, &r.foot).unwrap();
        prop_assert!(again.distance < 1e-10);
        prop_assert!((again.foot - r.foot).norm() < 1e-10);
    }

    #[test]
    fn offset_points_sit_on_their_level(u in 0.0..TAU, v in 0.0..TAU, frac in 0.01f64..0.95, inside: bool) {
        let s = torus();
        let model = SurfaceModel::analytic(s.clone()).unwrap();
        let foot = on_torus(u, v);
        let f = model.lfs(&foot).unwrap();
        let side = if inside { Side::Inside } else { Side::Outside };
        let p = offset_point(&s, &foot, frac * f, side).unwrap();
        let r = project(&s, &p).unwrap();
        prop_assert!((r.distance - frac * f).abs() < 1e-11);
        prop_assert!((r.foot - foot).norm() < 1e-9);
        prop_assert_eq!(r.side, side);
    }

    #[test]
    fn curvature_never_exceeds_inverse_feature_size(u in 0.0..TAU, v in 0.0..TAU) {
        let model = SurfaceModel::analytic(torus()).unwrap();
        let p = on_torus(u, v);
        let k = model.surface().kappa_max(&p).unwrap();
        prop_assert!(k * model.lfs(&p).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn torus_curvatures_match_closed_form(u in 0.0..TAU, v in 0.0..TAU) {
        // Tube curvature 1/r, and cos(v)/(R + r cos v) around the axis.
        let (k1, k2) = torus().principal_curvatures(&on_torus(u, v)).unwrap();
        let (a, b): (f64, f64) = (1.0, v.cos() / (2.0 + v.cos()));
        prop_assert!((k1 - a.max(b)).abs() < 1e-10 && (k2 - a.min(b)).abs() < 1e-10);
    }

    #[test]
    fn sphere_offset_curvatures(x in point_in(-1.8, 1.8)) {
        prop_assume!(x.norm() > 0.1);
        let (k1, k2) = level_set_curvatures(&ImplicitSurface::unit_sphere(), &x).unwrap();
        prop_assert!((k1 - 1.0 / x.norm()).abs() < 1e-10 && (k2 - 1.0 / x.norm()).abs() < 1e-10);
    }

    #[test]
    fn field_derivatives_match_differences(x in point_in(-1.2, 1.2)) {
        let s = ImplicitSurface::from_shape(&lfslab::config::parse_surface("metaball_blend", &[]).unwrap()).unwrap();
        let e = s.evaluate(&x).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut d = Vec3::zeros();
            d[i] = h;
            let (p, m) = (s.evaluate(&(x + d)).unwrap(), s.evaluate(&(x - d)).unwrap());
            let g = (p.value - m.value) / (2.0 * h);
            prop_assert!((g - e.gradient[i]).abs() < 1e-6 * (1.0 + g.abs()));
            let col = (p.gradient - m.gradient) / (2.0 * h);
            for j in 0..3 {
                prop_assert!((col[j] - e.hessian[(j, i)]).abs() < 1e-5 * (1.0 + col[j].abs()));
            }
        }
    }

    #[test]
    fn sphere_angles_follow_the_chord(t1 in 0.3..PI - 0.3, p1 in 0.0..TAU, dt in -0.2f64..0.2, dp in -0.2f64..0.2) {
        let model = SurfaceModel::analytic(ImplicitSurface::unit_sphere()).unwrap();
        let (q, qp) = (on_sphere(t1, p1), on_sphere(t1 + dt, p1 + dp));
        let d = (q - qp).norm();
        prop_assume!(d <= 1.0 / 3.0);
        let r = verify_pair(&model, &q, &qp).unwrap();
        prop_assert!((r.angle - 2.0 * (d / 2.0).asin()).abs() < 1e-12);
        prop_assert!(r.passed());
        let back = verify_pair(&model, &qp, &q).unwrap();
        prop_assert_eq!(r.angle, back.angle);
        prop_assert_eq!(r.eps_ab, back.eps_ab);
    }

    #[test]
    fn torus_pairs_respect_both_bounds(u in 0.0..TAU, v in 0.0..TAU, phi in 0.0..TAU, frac in 0.001f64..=1.0) {
        let model = SurfaceModel::analytic(torus()).unwrap();
        let q = on_torus(u, v);
        let sp = model.surface_point(&q).unwrap();
        let (e1, e2) = tangent_basis(&sp.normal);
        let t = phi.cos() * e1 + phi.sin() * e2;
        let qp = chord_sphere_point(model.surface(), &q, &sp.normal, &t, frac / 3.0 * sp.lfs).unwrap();
        let r = verify_pair(&model, &q, &qp).unwrap();
        prop_assert!(r.passed(), "{r:?}");
        prop_assert!(r.eps_thm <= 1.0 / 3.0 + 1e-12);
        if let Some(ab) = r.bound_ab {
            prop_assert!(r.bound_new <= ab + 1e-15 || r.eps_ab < r.eps_thm);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn traces_integrate_to_the_end_angle(u in 0.0..TAU, v in 0.0..TAU, phi in 0.0..TAU, frac in 0.05f64..=1.0) {
        let model = SurfaceModel::analytic(torus()).unwrap();
        let q = on_torus(u, v);
        let sp = model.surface_point(&q).unwrap();
        let (e1, e2) = tangent_basis(&sp.normal);
        let t = phi.cos() * e1 + phi.sin() * e2;
        let qp = chord_sphere_point(model.surface(), &q, &sp.normal, &t, frac / 3.0 * sp.lfs).unwrap();
        let trace = integrate_theta(&model, &q, &qp, 400).unwrap();
        prop_assert!(trace.all_ok(), "error {} tol {}", trace.integration_error(), trace.integration_tol());
    }
}

#[test]
fn numeric_feature_size_tracks_the_analytic_one_on_the_sphere() {
    let s = ImplicitSurface::unit_sphere();
    let numeric = SurfaceModel::new(s.clone(), LfsMode::Numeric, 300, 9).unwrap();
    for p in surface_sample(&s, 50, 10) {
        let raw = numeric.feature().raw_lfs(&p).unwrap();
        assert!((raw - 1.0).abs() < 0.02, "{raw}");
        assert!(numeric.lfs(&p).unwrap() < raw);
    }
}

#[test]
fn distance_is_one_lipschitz_in_space() {
    let s = torus();
    let pts = surface_sample(&s, 200, 11);
    for w in pts.windows(2) {
        let (a, b) = (w[0] * 1.3, w[1] * 0.8);
        let gap = (distance(&s, &a).unwrap() - distance(&s, &b).unwrap()).abs();
        assert!(gap <= (a - b).norm() + 1e-12);
    }
}
