use hetcycle::contraction::{picard_step_bound, solve_scalar, solve_system, ImplicitScalarProblem, ImplicitSystemProblem, SampleBox};
use hetcycle::fixed_point::{classify, locus_point, multipliers, ns_locus_solve, trace_interval, LocusOptions, MultiplierSet};
use hetcycle::hopf::{complex_coefficients, lyapunov_coefficient, planar_from_complex, ComplexTaylorMap};
use hetcycle::invariance::{det_law_residuals, BlockModel};
use hetcycle::map::{first_return_eval, jacobian_fd, AffineMap, Chart, ClosureMap, MapModel, ParamTriple, StatePoint, ToyUnfolding, Unfolding, TOY_Y_MINUS};
use hetcycle::tangency::{e_k_quantity, expanding_quantity, extract_global_coefficients, splitting_mu, window_center};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn toy() -> ToyUnfolding {
    ToyUnfolding::new(0.2).unwrap()
}

fn base() -> ParamTriple {
    ParamTriple::new(0.0, PI / 6.0, 0.0).unwrap()
}

fn cmap(psi: f64, coeffs: &[(f64, f64)]) -> ComplexTaylorMap {
    let mut c = ComplexTaylorMap::new(psi);
    let monos = [(2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];
    for ((p, q), (re, im)) in monos.iter().zip(coeffs) {
        c.set(*p, *q, Complex64::new(*re, *im));
    }
    c
}

fn psi_strategy() -> impl Strategy<Value = f64> {
    (0.2f64..PI - 0.2).prop_filter("away from strong resonances", |p| (p - PI / 2.0).abs() > 0.05 && (p - 2.0 * PI / 3.0).abs() > 0.05)
}

fn coeff_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn toy_local_is_linear(p in prop::array::uniform3(-2.0f64..2.0), q in prop::array::uniform3(-2.0f64..2.0), a in -3.0f64..3.0, b in -3.0f64..3.0, omega in 0.1f64..3.0, rho in -0.5f64..0.5) {
        let l = toy().local(&ParamTriple::new(0.0, omega, rho).unwrap());
        let (p, q) = (Vector3::from(p), Vector3::from(q));
        let lhs = l.eval(&(a * p + b * q)).unwrap();
        let rhs = a * l.eval(&p).unwrap() + b * l.eval(&q).unwrap();
        prop_assert!((lhs - rhs).amax() <= 1e-14 * (1.0 + rhs.amax()));
    }

    #[test]
    fn first_return_matches_closed_form(k in 1usize..8, x1 in -0.5f64..0.5, dx2 in -0.5f64..0.5, s in 2.05f64..2.95) {
        let fam = ToyUnfolding { delta_dom: 3.0, ..toy() };
        let e = base();
        let spec = fam.first_return(k, &e).unwrap();
        let g3 = 3f64.powi(k as i32);
        let p = StatePoint::new(x1, 2.0 + dx2, s / g3, Chart::ReturnSection);
        let got = first_return_eval(&spec, p).unwrap().coords();
        let (sn, cs) = (k as f64 * PI / 6.0).sin_cos();
        let xs = [(cs * x1 - sn * (2.0 + dx2)) / g3, (sn * x1 + cs * (2.0 + dx2)) / g3];
        let t = g3 * (s / g3) - TOY_Y_MINUS;
        let eps = 0.2;
        let want = Vector3::new(2.0 / eps * t - 4.0 / (eps * eps) * t * t, -eps * xs[1] + 2.0, eps * xs[0] + 4.0 / (eps * eps) * t * t);
        prop_assert!((got - want).amax() <= 1e-13, "{got} vs {want}");
    }

    #[test]
    fn classify_ignores_labelling(a in 0.05f64..0.9, th in 0.1f64..3.0, g in 1.1f64..5.0, perm in 0usize..6, real in any::<bool>()) {
        let vals = if real {
            [Complex64::new(a, 0.0), Complex64::new(a * 0.5, 0.0), Complex64::new(g, 0.0)]
        } else {
            [Complex64::from_polar(a, th), Complex64::from_polar(a, -th), Complex64::new(g, 0.0)]
        };
        let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let reference = classify(&MultiplierSet::from_values(&vals).unwrap()).unwrap();
        let o = orders[perm];
        let shuffled = [vals[o[0]], vals[o[1]], vals[o[2]]];
        let c = classify(&MultiplierSet::from_values(&shuffled).unwrap()).unwrap();
        prop_assert_eq!(c.tag, reference.tag);
        prop_assert!((c.product - reference.product).abs() <= 1e-15 * reference.product);
    }

    #[test]
    fn expanding_quantity_is_coordinate_free(theta in 0.0f64..TAU, s in 0.2f64..5.0, u in 0.2f64..5.0) {
        let fam = toy();
        let g = fam.global(&base());
        let (sn, cs) = theta.sin_cos();
        let to = Matrix3::new(s * cs, -s * sn, 0.0, s * sn, s * cs, 0.0, 0.0, 0.0, u);
        let from = to.try_inverse().unwrap();
        let gt = ClosureMap::new(move |p: &Vector3<f64>| to * g.eval(&(from * p)).unwrap());
        let m = to * fam.m_minus();
        let plus = gt.eval(&m).unwrap();
        let c = extract_global_coefficients(&gt, &StatePoint::from_vector(&m, Chart::GlobalNeighborhood), &StatePoint::from_vector(&plus, Chart::ReturnSection)).unwrap();
        prop_assert!((expanding_quantity(&c) - 2.0).abs() < 1e-10, "{}", expanding_quantity(&c));
    }

    #[test]
    fn e_k_bounded_by_expanding_quantity(k in 1usize..40, omega in 0.0f64..PI) {
        let fam = toy();
        let g = fam.global(&base());
        let m = fam.m_minus();
        let c = extract_global_coefficients(&g, &StatePoint::from_vector(&m, Chart::GlobalNeighborhood), &StatePoint::from_vector(&g.eval(&m).unwrap(), Chart::ReturnSection)).unwrap();
        let e = e_k_quantity(&c, k, omega);
        let big = expanding_quantity(&c);
        prop_assert!(e.abs() <= big * (1.0 + 1e-15));
        let phase = (k as f64 * omega + c.eta_star()).sin();
        prop_assert!((e.abs() - big * phase.abs()).abs() < 1e-12);
    }

    #[test]
    fn splitting_is_linear_in_mu(mu in -0.1f64..0.1) {
        let fam = toy();
        let m = StatePoint::from_vector(&fam.m_minus(), Chart::GlobalNeighborhood);
        let at = |mu: f64| splitting_mu(&fam.global(&ParamTriple { mu, ..base() }), &m).unwrap();
        prop_assert!((at(mu) - at(0.0) - mu).abs() <= 1e-15);
    }

    #[test]
    fn lc_invariant_under_basis_rotation(psi in psi_strategy(), z in coeff_strategy(), theta in 0.0f64..TAU) {
        let c = cmap(psi, &z);
        let mut r = ComplexTaylorMap::new(psi);
        let monos = [(2u8, 0u8), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];
        for (p, q) in monos {
            let e = Complex64::from_polar(1.0, theta * (p as f64 - q as f64 - 1.0));
            r.set(p, q, c.coeff(p, q) * e);
        }
        let a = lyapunov_coefficient(&complex_coefficients(&planar_from_complex(&c))).unwrap();
        let b = lyapunov_coefficient(&complex_coefficients(&planar_from_complex(&r))).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn complex_planar_round_trip(psi in psi_strategy(), z in coeff_strategy()) {
        let c = cmap(psi, &z);
        let back = complex_coefficients(&planar_from_complex(&c));
        for (p, q) in [(2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)] {
            prop_assert!((back.coeff(p, q) - c.coeff(p, q)).norm() < 1e-12);
        }
        prop_assert!((back.nu - c.nu).norm() < 1e-12);
    }

    #[test]
    fn radius_law_in_normal_form(psi in psi_strategy(), a in (-1.0f64..1.0, -1.0f64..1.0), r in 1e-3f64..1e-2, th in 0.0f64..TAU) {
        let mut c = ComplexTaylorMap::new(psi);
        c.set(2, 1, Complex64::new(a.0, a.1));
        let lc = lyapunov_coefficient(&c).unwrap();
        let p = planar_from_complex(&c);
        let (u, v) = p.eval(r * th.cos(), r * th.sin());
        let got = u.hypot(v);
        prop_assert!((got - (r - lc * r.powi(3))).abs() <= 4.0 * r.powi(4), "{got} {lc}");
    }

    #[test]
    fn determinant_law_is_cubic(psi in psi_strategy(), z in coeff_strategy()) {
        let c = cmap(psi, &z);
        let radii = [2.5e-3, 5e-3, 1e-2];
        let (_, res) = det_law_residuals(&planar_from_complex(&c), &radii, 32).unwrap();
        for (r, e) in res {
            prop_assert!(e <= 1e4 * r.powi(3), "residual {e:e} at r = {r}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ns_points_sit_on_the_unit_circle(k in prop::sample::select(vec![6usize, 8, 10]), shift in -0.3f64..0.3, frac in 0.15f64..0.85) {
        let fam = toy();
        let opts = LocusOptions::default();
        let omega = window_center(k, PI / 2.0, PI / k as f64) + shift / k as f64;
        let (lo, hi) = trace_interval(&fam, k, omega, &opts).unwrap();
        let t = lo + frac * (hi - lo);
        prop_assume!((t - 0.5 * (lo + hi)).abs() > 0.02 * (hi - lo));
        let s = match ns_locus_solve(&fam, k, t, omega, &opts) {
            Ok(s) => s,
            Err(hetcycle::Error::ResonanceGuard { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let map = fam.first_return(k, &s.params).unwrap();
        let p = s.fixed_point.point.coords();
        prop_assert!((map.eval(&p).unwrap() - p).amax() <= opts.newton.tol * p.amax().max(1.0));
        let m = multipliers(&map, &s.fixed_point.point).unwrap();
        prop_assert!((m.pair_product() - 1.0).abs() < 1e-9);
        prop_assert!(m.nu3.norm() < 1.0);
    }

    #[test]
    fn trace_interval_pair_trace_is_plus_minus_two(k in prop::sample::select(vec![6usize, 8, 10]), shift in -0.3f64..0.3) {
        let fam = toy();
        let opts = LocusOptions::default();
        let omega = window_center(k, PI / 2.0, PI / k as f64) + shift / k as f64;
        let (lo, hi) = trace_interval(&fam, k, omega, &opts).unwrap();
        for (t, target) in [(hi, 2.0), (lo, -2.0)] {
            let s = locus_point(&fam, k, t, omega, &opts).unwrap();
            prop_assert!((s.mults.pair_trace() - target).abs() < 1e-7, "t = {t}: trace {}", s.mults.pair_trace());
            prop_assert!((s.mults.pair_product() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_interval_ends_at_plus_minus_one(k in prop::sample::select(vec![6usize, 8, 10]), shift in -0.3f64..0.3) {
        let fam = toy();
        let opts = LocusOptions::default();
        let omega = window_center(k, PI / 2.0, PI / k as f64) + shift / k as f64;
        let (lo, hi) = trace_interval(&fam, k, omega, &opts).unwrap();
        for (t, target) in [(hi, 1.0), (lo, -1.0)] {
            let s = locus_point(&fam, k, t, omega, &opts).unwrap();
            let dist = s.mults.values().iter().map(|z| (z - Complex64::new(target, 0.0)).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(dist < 1e-6, "t = {t}: distance {dist:e} to {target}");
        }
    }
}

fn componentwise_close(a: &Matrix3<f64>, b: &Matrix3<f64>) -> bool {
    a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-6 * x.abs().max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn analytic_jacobians_match_finite_differences(p in prop::array::uniform3(-1.0f64..1.0), y in 0.05f64..0.95, m in prop::array::uniform3(-1.0f64..1.0)) {
        let fam = ToyUnfolding { delta_dom: 3.0, ..toy() };
        let e = ParamTriple::new(0.01, 0.4, -0.05).unwrap();
        let h = 1e-5;
        let q = Vector3::new(2.0 * p[0], 2.0 * p[1], 3.0 * y);
        let local = fam.local(&e);
        prop_assert!(componentwise_close(&local.jacobian(&q).unwrap(), &jacobian_fd(&local, &q, h).unwrap()));
        let g = fam.global(&e);
        let qg = Vector3::new(2.0 * p[0], 2.0 * p[1], 2.0 + y);
        prop_assert!(componentwise_close(&g.jacobian(&qg).unwrap(), &jacobian_fd(&g, &qg, h).unwrap()));
        let k = 6;
        let tk = fam.first_return(k, &e).unwrap();
        let c = tk.m_plus();
        let qs = Vector3::new(c[0] + 0.3 * p[0], c[1] + 0.3 * p[1], (2.1 + 0.8 * y) / 3f64.powi(k as i32));
        prop_assert!(componentwise_close(&tk.jacobian(&qs).unwrap(), &jacobian_fd(&tk, &qs, h).unwrap()));
        let b = BlockModel { gamma: 2.0 + m[0], lambda: 0.5 + 0.4 * m[1], a: m[2], b: -m[0] };
        prop_assert!(componentwise_close(&b.jacobian(&q).unwrap(), &jacobian_fd(&b, &q, h).unwrap()));
        let a = AffineMap { a: Matrix3::from_fn(|i, j| m[(i + j) % 3] * (i as f64 - j as f64 + 0.5)), b: Vector3::from(m) };
        prop_assert!(componentwise_close(&a.jacobian(&q).unwrap(), &jacobian_fd(&a, &q, h).unwrap()));
    }

    #[test]
    fn picard_count_within_bound(g0 in -1.0f64..1.0, a in 0.01f64..1.0, b in 0.01f64..0.45, x in -1.0f64..1.0) {
        let b = b / a;
        let prob = ImplicitScalarProblem::new(move |x: &[f64]| g0 + 0.3 * x[0], move |x: &[f64], y: f64| a * (b * y - x[0]).sin(), SampleBox { x: vec![(-1.0, 1.0)], y: vec![(-10.0, 10.0)] });
        let s = solve_scalar(&prob, &[x], 1e-13).unwrap();
        let g = g0 + 0.3 * x;
        let allowed = picard_step_bound(1e-13, (a * (b * g - x).sin()).abs(), s.bounds.sup_hy);
        prop_assert!(s.iterations as f64 <= allowed.ceil());
        prop_assert!(s.correction.abs() <= 2.0 * a);
        prop_assert!((s.y - g - a * (b * s.y - x).sin()).abs() < 1e-12);
    }

    #[test]
    fn system_matches_damped_iteration(m in 2usize..=5, w in prop::collection::vec(0.0f64..1.0, 25), shift in prop::collection::vec(-1.0f64..1.0, 5), x in -1.0f64..1.0) {
        let coef: Vec<Vec<f64>> = (0..m).map(|j| {
            let row: Vec<f64> = (0..m).map(|i| w[j * 5 + i] + 0.01).collect();
            let sum: f64 = row.iter().sum();
            row.iter().map(|v| 0.4 * v / sum).collect()
        }).collect();
        let (c2, s2) = (coef.clone(), shift.clone());
        let h = move |x: &[f64], y: &[f64]| -> Vec<f64> {
            (0..c2.len()).map(|j| (0..c2.len()).map(|i| c2[j][i] * (y[i] + s2[j] * x[0]).sin()).sum::<f64>()).collect()
        };
        let hh = h.clone();
        let g: Vec<f64> = shift[..m].to_vec();
        let g2 = g.clone();
        let prob = ImplicitSystemProblem::new(m, move |_: &[f64]| g2.clone(), h, SampleBox { x: vec![(-1.0, 1.0)], y: vec![(-10.0, 10.0); m] });
        let tol = 1e-13;
        let s = solve_system(&prob, &[x], tol).unwrap();
        let mut y = g.clone();
        for _ in 0..2000 {
            let n = hh(&[x], &y);
            for j in 0..m {
                y[j] = 0.5 * y[j] + 0.5 * (g[j] + n[j]);
            }
        }
        for j in 0..m {
            prop_assert!((s.y[j] - y[j]).abs() <= 10.0 * tol, "component {j}: {} vs {}", s.y[j], y[j]);
        }
    }
}
