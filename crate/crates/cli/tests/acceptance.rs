//! End-to-end acceptance run: one line per criterion, failure if any is red.

use hetcycle::contraction::{solve_scalar, solve_system, ImplicitScalarProblem, ImplicitSystemProblem, SampleBox};
use hetcycle::fixed_point::{multipliers, ns_locus_solve, repelling_window, rho_value, trace_interval, LocusOptions, NsLocusPoint};
use hetcycle::hopf::{complex_coefficients, lyapunov_coefficient, ns_report, planar_from_complex, reference_curve, ComplexTaylorMap, NSReport};
use hetcycle::invariance::{
    calibrate_aperture, cone_invariance_check, det_law_residuals, grow_unstable_set_run, loglog_slope, BlockModel, ConeFrame, ConeKind, ConeSpec,
    GrowthOptions,
};
use hetcycle::map::{AffineMap, Box3, Chart, ClosureMap, MapModel, PolynomialMap, StatePoint, ToyUnfolding, Unfolding};
use hetcycle::poly::{Jet3, Poly3, N_MONOMIALS};
use hetcycle::tangency::{expanding_quantity, extract_global_coefficients, omega_window_contains, quadratic_tangency_find, window_center, OmegaWindow, WindowKind};
use hetcycle::Error;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn toy() -> ToyUnfolding {
    ToyUnfolding::new(0.2).unwrap()
}

fn eta_star(fam: &ToyUnfolding) -> f64 {
    let e = hetcycle::map::ParamTriple::new(0.0, PI / 6.0, 0.0).unwrap();
    let g = fam.global(&e);
    let m = fam.m_minus();
    let plus = g.eval(&m).unwrap();
    extract_global_coefficients(&g, &StatePoint::from_vector(&m, Chart::GlobalNeighborhood), &StatePoint::from_vector(&plus, Chart::ReturnSection))
        .unwrap()
        .eta_star()
}

/// Window centre and the midpoint of the repelling sub-window of the trace interval.
fn ns_point(k: usize) -> hetcycle::Result<(NsLocusPoint, NSReport)> {
    ns_point_at(k, window_center(k, eta_star(&toy()), PI / k as f64))
}

fn ns_point_at(k: usize, omega: f64) -> hetcycle::Result<(NsLocusPoint, NSReport)> {
    let fam = toy();
    let opts = LocusOptions::default();
    let (a, b) = repelling_window(&fam, k, omega, &opts)?;
    let s = ns_locus_solve(&fam, k, 0.5 * (a + b), omega, &opts)?;
    let map = fam.first_return(k, &s.params)?;
    let r = ns_report(&map, &s.fixed_point.point)?;
    Ok((s, r))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let fam = toy();
    let e = hetcycle::map::ParamTriple::new(0.0, PI / 6.0, 0.0).unwrap();
    let m = multipliers(&fam.local(&e), &StatePoint::new(0.0, 0.0, 0.0, Chart::LocalCylinder)).unwrap();
    let nu = Complex64::from_polar(1.0 / 3.0, PI / 6.0);
    let mut got = [m.nu1, m.nu2];
    got.sort_by(|a, b| b.im.total_cmp(&a.im));
    let mult_err = (got[0] - nu).norm().max((got[1] - nu.conj()).norm()).max((m.nu3 - Complex64::new(3.0, 0.0)).norm());
    let rho = rho_value(fam.lambda_mod(&e).unwrap(), 3.0).unwrap();
    let g = fam.global(&e);
    let mm = fam.m_minus();
    let plus = g.eval(&mm).unwrap();
    let c = extract_global_coefficients(&g, &StatePoint::from_vector(&mm, Chart::GlobalNeighborhood), &StatePoint::from_vector(&plus, Chart::ReturnSection)).unwrap();
    let eq = expanding_quantity(&c);
    let curve = |t: f64| g.eval(&(mm + Vector3::new(0.0, 0.0, t))).unwrap_or_else(|_| Vector3::repeat(f64::NAN));
    let cert = quadratic_tangency_find(curve, 2, (-0.05, 0.05)).unwrap();
    let p = cert.point.coords();
    let pt_err = (p - Vector3::new(0.0, 2.0, 0.0)).abs().max().max(cert.t_star.abs());
    let secs = start.elapsed().as_secs_f64();
    let pass = mult_err < 1e-12 && rho.abs() < 1e-14 && (eq - 2.0).abs() < 1e-10 && pt_err < 1e-8 && (cert.d_coeff - 100.0).abs() < 1e-6 && secs < 1.0;
    outcome(pass, format!("mult err {mult_err:.1e}, rho {rho:.1e}, E {eq}, tangency err {pt_err:.1e}, d {:.10}, {secs:.3}s", cert.d_coeff))
}

fn random_cmap(rng: &mut ChaCha8Rng, quadratic: bool) -> ComplexTaylorMap {
    let psi = loop {
        let psi: f64 = rng.gen_range(0.15..PI - 0.15);
        if (psi - PI / 2.0).abs() > 0.05 && (psi - 2.0 * PI / 3.0).abs() > 0.05 {
            break psi;
        }
    };
    let mut c = ComplexTaylorMap::new(psi);
    let mut z = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    for (p, q) in [(2, 0), (1, 1), (0, 2)] {
        let v = z();
        if quadratic {
            c.set(p, q, v);
        }
    }
    for (p, q) in [(3, 0), (2, 1), (1, 2), (0, 3)] {
        c.set(p, q, z());
    }
    c
}

/// Mean radius over iterations `[0, w)` and `[n − w, n)`; escape beyond 0.1 counts as growth.
fn radial_drift(c: &ComplexTaylorMap, r0: f64, n: usize, w: usize) -> f64 {
    let p = planar_from_complex(c);
    let (mut u, mut v) = (r0, 0.0);
    let (mut head, mut tail) = (0.0, 0.0);
    for i in 0..n {
        let r = u.hypot(v);
        if !(r < 0.1) {
            return 1.0;
        }
        if i < w {
            head += r;
        }
        if i >= n - w {
            tail += r;
        }
        (u, v) = p.eval(u, v);
    }
    (tail - head) / w as f64
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut formula_err = 0.0f64;
    let (mut checked, mut mismatched) = (0, 0);
    for i in 0..200 {
        let c = random_cmap(&mut rng, i % 2 == 1);
        let lc = lyapunov_coefficient(&complex_coefficients(&planar_from_complex(&c))).unwrap();
        if i % 2 == 0 {
            let oracle = -(c.nu.conj() * c.coeff(2, 1)).re;
            formula_err = formula_err.max((lc - oracle).abs());
        }
        if lc.abs() > 1e-4 {
            checked += 1;
            let drift = radial_drift(&c, 1e-2, 10_000, 1000);
            if drift.signum() != -lc.signum() {
                mismatched += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = formula_err < 1e-8 && mismatched == 0 && secs < 10.0;
    outcome(pass, format!("cubic-only LC err {formula_err:.1e}; drift sign mismatches {mismatched}/{checked}; {secs:.2}s"))
}

fn criterion_3() -> Outcome {
    let at = reference_curve(PI / 3.0).unwrap();
    let top = PI / 2.0 - PI / 20.0;
    let max = (1..=1000).map(|i| reference_curve(top * i as f64 / 1000.0).unwrap()).fold(f64::NEG_INFINITY, f64::max);
    outcome((at + 1.5).abs() < 1e-12 && max < 0.0, format!("L(pi/3) = {at}, grid max {max:.4}"))
}

/// Alternative closed form for alpha, kept only for comparison.
fn alt_closed_form_lc(c: &ComplexTaylorMap) -> f64 {
    let nu = c.nu;
    let nb = nu.conj();
    let one = Complex64::new(1.0, 0.0);
    let v = -c.coeff(2, 1) * nb + c.coeff(0, 2).norm_sqr() * (-4.0 + 2.0 * nb.powi(3)) / (-2.0 + nu.powi(3) + nb.powi(3))
        + c.coeff(1, 1).norm_sqr() * (-2.0 * nb + nb * nb) / (nb - one).powi(2)
        + c.coeff(1, 1) * c.coeff(2, 0) * (2.0 - 6.0 * nb + nb * nb) / (nu - one).powi(2);
    v.re
}

fn criterion_4() -> Outcome {
    let grid: Vec<f64> = (1..=60)
        .map(|i| PI * i as f64 / 61.0)
        .filter(|p| [PI / 2.0, 2.0 * PI / 3.0].iter().all(|r| (p - r).abs() > 0.02))
        .take(50)
        .collect();
    let (mut worst, mut worst_alt) = (0.0f64, 0.0f64);
    for &psi in &grid {
        let mut c = ComplexTaylorMap::new(psi);
        let nu = c.nu;
        c.set(2, 0, nu);
        c.set(0, 2, nu);
        c.set(1, 1, -2.0 * nu);
        let target = reference_curve(psi).unwrap();
        worst = worst.max((lyapunov_coefficient(&c).unwrap() - target).abs());
        worst_alt = worst_alt.max((alt_closed_form_lc(&c) - target).abs());
    }
    outcome(
        worst < 1e-10,
        format!("{} psi values: max |LC - L| = {worst:.3e} (LC of this area-preserving limit map is 0); alternative closed form reproduces L to {worst_alt:.1e}", grid.len()),
    )
}

fn criterion_5_6() -> (Outcome, Outcome) {
    let start = Instant::now();
    let mut lines = Vec::new();
    let (mut ok5, mut ok6) = (true, true);
    let mut scaled = Vec::new();
    let fam = toy();
    for k in [6usize, 8, 10] {
        match ns_point(k) {
            Ok((s, r)) => {
                let m = r.mults;
                let unit = (m.pair_product() - 1.0).abs();
                let in_ps = omega_window_contains(&OmegaWindow::new(WindowKind::Ps, k, &coeffs(&fam)), s.params.omega);
                let in_ex = omega_window_contains(&OmegaWindow::new(WindowKind::Ex, k, &coeffs(&fam)), s.params.omega);
                ok5 &= in_ps && unit < 1e-9 && m.nu3.norm() < 1.0 && r.lc < 0.0;
                ok6 &= in_ex && s.params.rho < 0.0;
                scaled.push(s.params.rho.abs() * k as f64);
                lines.push(format!("k={k}: ||nu1 nu2|-1| {unit:.1e}, |nu3| {:.2e}, LC {:+.3e}, rho {:+.4e}", m.nu3.norm(), r.lc, s.params.rho));
            }
            Err(e) => {
                ok5 = false;
                ok6 = false;
                lines.push(format!("k={k}: {e}"));
            }
        }
    }
    let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let secs = start.elapsed().as_secs_f64();
    ok5 &= scaled.len() == 3 && spread <= 4.0 && secs < 60.0;
    let detail = lines.join("; ");
    (outcome(ok5, format!("{detail}; |rho_k| k spread {spread:.3}; {secs:.2}s")), outcome(ok6, detail))
}

fn coeffs(fam: &ToyUnfolding) -> hetcycle::tangency::GlobalMapCoefficients {
    let e = hetcycle::map::ParamTriple::new(0.0, PI / 6.0, 0.0).unwrap();
    let g = fam.global(&e);
    let m = fam.m_minus();
    let plus = g.eval(&m).unwrap();
    extract_global_coefficients(&g, &StatePoint::from_vector(&m, Chart::GlobalNeighborhood), &StatePoint::from_vector(&plus, Chart::ReturnSection)).unwrap()
}

fn criterion_7() -> Outcome {
    let (_, r) = match ns_point(6) {
        Ok(v) => v,
        Err(e) => return outcome(false, e.to_string()),
    };
    let radii: Vec<f64> = (0..=10).map(|i| 1e-3 * 10f64.powf(i as f64 / 10.0)).collect();
    match det_law_residuals(&r.planar, &radii, 64) {
        Ok((lc, res)) => {
            let slope = loglog_slope(&res);
            outcome(slope >= 2.7, format!("k=6 planar restriction, LC {lc:+.3e}, residual {:.2e}..{:.2e}, slope {slope:.3}", res[0].1, res[res.len() - 1].1))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn cone_pair<M: MapModel>(map: &M, frame: &ConeFrame, spec: &ConeSpec, region: &Box3, seed: u64) -> (bool, String) {
    let kind = spec.kind;
    match calibrate_aperture(map, frame, spec, region, seed) {
        Ok(k) => {
            let at = cone_invariance_check(map, frame, &spec.with_aperture(k), region, 10_000, seed + 100);
            let low = cone_invariance_check(map, frame, &spec.with_aperture(k / 100.0), region, 10_000, seed + 100);
            match (at, low) {
                (Ok(a), Ok(l)) => (a.violations == 0 && l.violations > 0, format!("{kind:?} K={k:.2e}: {} at K, {} at K/100", a.violations, l.violations)),
                (Err(e), _) | (_, Err(e)) => (false, format!("{kind:?}: {e}")),
            }
        }
        Err(e) => (false, format!("{kind:?}: {e}")),
    }
}

fn criterion_8() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    let id = ConeFrame::identity();
    let unit = Box3::centered(&Vector3::zeros(), [1.0, 1.0, 1.0]);
    let cu = BlockModel { gamma: 2.0, lambda: 0.4, a: 0.8, b: 0.0 };
    let ss = BlockModel { gamma: 2.0, lambda: 0.4, a: 0.0, b: 0.8 };
    let spec = |kind| ConeSpec { kind, aperture: 1.0, delta_dom: 0.1, k: 1, lambda_k: 1.0, gamma_k: 1.0 };
    for (m, kind) in [(ss, ConeKind::SS), (cu, ConeKind::CU)] {
        let (ok, s) = cone_pair(&m, &id, &spec(kind), &unit, 8);
        pass &= ok;
        lines.push(format!("block {s}"));
    }

    // off the window centre, where kω = π would decouple w from z exactly
    let k = 10;
    match ns_point_at(k, (PI + 0.3) / k as f64) {
        Ok((s, _)) => {
            let fam = toy();
            let map = fam.first_return(k, &s.params).unwrap();
            let q = s.fixed_point.point.coords();
            let gk = fam.gamma.powi(k as i32);
            let lk = (s.params.rho.exp() / fam.gamma).powi(k as i32);
            let frame = ConeFrame::toy(k, fam.gamma, hetcycle::map::TOY_Y_MINUS);
            // small enough that the quadratic part of T keeps most images inside
            let region = Box3::centered(&q, [1e-5, 1e-5, 1e-6 / gk]);
            for kind in [ConeKind::SS, ConeKind::CU] {
                let spec = ConeSpec { kind, aperture: 1.0, delta_dom: 1e-2, k, lambda_k: lk, gamma_k: gk };
                let (ok, s) = cone_pair(&map, &frame, &spec, &region, 80);
                pass &= ok;
                lines.push(format!("toy T_10 {s}"));
            }
        }
        Err(e) => {
            pass = false;
            lines.push(format!("toy T_10: {e}"));
        }
    }
    outcome(pass, lines.join("; "))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_res, mut bound_ok, mut solved) = (0.0f64, true, 0);
    let (mut rejected, mut expected_rejections, mut wrong) = (0, 0, 0);
    for i in 0..100 {
        let contractive = i % 4 != 3;
        let factor = if contractive { rng.gen_range(0.02..0.45) } else { rng.gen_range(0.55..3.0) };
        if i % 2 == 0 {
            let (g0, g1) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let a: f64 = rng.gen_range(0.05..1.0);
            let b = factor / a;
            let c: f64 = rng.gen_range(-1.0..1.0);
            let h = move |x: &[f64], y: f64| a * (b * y + c * x[0]).sin();
            let prob = ImplicitScalarProblem::new(move |x: &[f64]| g0 + g1 * x[0], h, SampleBox { x: vec![(-1.0, 1.0)], y: vec![(-10.0, 10.0)] });
            let x = [rng.gen_range(-1.0..1.0)];
            let sampled = prob.bounds().unwrap().sup_hy;
            match solve_scalar(&prob, &x, 1e-14) {
                Ok(s) => {
                    solved += 1;
                    worst_res = worst_res.max((s.y - (g0 + g1 * x[0]) - h(&x, s.y)).abs());
                    bound_ok &= (s.y - g0 - g1 * x[0]).abs() <= 2.0 * a;
                    if sampled >= 0.5 {
                        wrong += 1;
                    }
                }
                Err(Error::NotContractive(_)) => rejected += 1,
                Err(_) => wrong += 1,
            }
            expected_rejections += usize::from(sampled >= 0.5);
        } else {
            let m = 2 + i % 3;
            let mut a = vec![vec![0.0; m]; m];
            for row in a.iter_mut() {
                let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
                let sum: f64 = w.iter().sum();
                for (j, v) in w.iter().enumerate() {
                    row[j] = factor * v / sum;
                }
            }
            let g: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let shift: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a2, g2, s2) = (a.clone(), g.clone(), shift.clone());
            let h = move |x: &[f64], y: &[f64]| -> Vec<f64> { (0..a2.len()).map(|j| (0..y.len()).map(|i| a2[j][i] * (y[i] + s2[j] * x[0]).sin()).sum()).collect() };
            let hh = h.clone();
            let prob = ImplicitSystemProblem::new(m, move |_: &[f64]| g2.clone(), h, SampleBox { x: vec![(-1.0, 1.0)], y: vec![(-10.0, 10.0); m] });
            let x = [rng.gen_range(-1.0..1.0)];
            let (_, shy) = prob.bounds().unwrap();
            let sampled = shy.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
            match solve_system(&prob, &x, 1e-14) {
                Ok(s) => {
                    solved += 1;
                    let hv = hh(&x, &s.y);
                    for j in 0..m {
                        worst_res = worst_res.max((s.y[j] - g[j] - hv[j]).abs());
                        let sup_h: f64 = a[j].iter().sum();
                        bound_ok &= (s.y[j] - g[j]).abs() <= 2.0 * sup_h;
                    }
                    if sampled >= 0.5 {
                        wrong += 1;
                    }
                }
                Err(Error::NotContractive(_)) => rejected += 1,
                Err(_) => wrong += 1,
            }
            expected_rejections += usize::from(sampled >= 0.5);
        }
    }
    let pass = worst_res < 1e-12 && bound_ok && wrong == 0 && rejected == expected_rejections;
    outcome(pass, format!("{solved} solved, max residual {worst_res:.1e}, |I| bound {}, NotContractive {rejected}/{expected_rejections}, unexpected {wrong}", if bound_ok { "held" } else { "broken" }))
}

/// Five-point central differences with per-coordinate steps.
fn fd_jacobian<M: MapModel>(m: &M, p: &Vector3<f64>, steps: [f64; 3]) -> Matrix3<f64> {
    let mut j = Matrix3::zeros();
    for c in 0..3 {
        let h = steps[c];
        let at = |s: f64| {
            let mut q = *p;
            q[c] += s * h;
            m.eval(&q).unwrap()
        };
        let col = (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h);
        j.set_column(c, &col);
    }
    j
}

fn rel_err(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut check = |name: &str, f: &mut dyn FnMut(&mut ChaCha8Rng) -> f64| {
        let w = (0..100).map(|_| f(&mut rng)).fold(0.0, f64::max);
        worst.push((name.to_string(), w));
    };
    let fam = toy();
    let e = hetcycle::map::ParamTriple::new(0.01, 0.4, -0.05).unwrap();
    let local = fam.local(&e);
    check("toy local", &mut |r| {
        let p = Vector3::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(0.0..1.0));
        rel_err(&local.jacobian(&p).unwrap(), &fd_jacobian(&local, &p, [1e-3; 3]))
    });
    let global = fam.global(&e);
    check("toy global", &mut |r| {
        let p = Vector3::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(2.0..3.0));
        rel_err(&global.jacobian(&p).unwrap(), &fd_jacobian(&global, &p, [1e-3; 3]))
    });
    let k = 6;
    let tk = fam.first_return(k, &e).unwrap();
    let gk = fam.gamma.powi(k as i32);
    let centre = tk.m_plus();
    check("toy T_6", &mut |r| loop {
        let p = Vector3::new(centre[0] + r.gen_range(-0.3..0.3), centre[1] + r.gen_range(-0.3..0.3), r.gen_range(2.1..2.9) / gk);
        if let Ok(j) = tk.jacobian(&p) {
            return rel_err(&j, &fd_jacobian(&tk, &p, [1e-4, 1e-4, 1e-4 / gk]));
        }
    });
    check("block", &mut |r| {
        let m = BlockModel { gamma: r.gen_range(1.5..4.0), lambda: r.gen_range(0.1..0.9), a: r.gen_range(-1.0..1.0), b: r.gen_range(-1.0..1.0) };
        let p = Vector3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        rel_err(&m.jacobian(&p).unwrap(), &fd_jacobian(&m, &p, [1e-3; 3]))
    });
    check("affine", &mut |r| {
        let m = AffineMap { a: Matrix3::from_fn(|_, _| r.gen_range(-2.0..2.0)), b: Vector3::from_fn(|_, _| r.gen_range(-1.0..1.0)) };
        let p = Vector3::from_fn(|_, _| r.gen_range(-1.0..1.0));
        rel_err(&m.jacobian(&p).unwrap(), &fd_jacobian(&m, &p, [1e-3; 3]))
    });
    check("polynomial", &mut |r| {
        let mut poly = || {
            let mut c = [0.0; N_MONOMIALS];
            for v in c.iter_mut() {
                *v = r.gen_range(-1.0..1.0);
            }
            Poly3 { c }
        };
        let jet = Jet3::new([poly(), poly(), poly()]);
        let m = PolynomialMap { base: Vector3::from_fn(|_, _| r.gen_range(-0.5..0.5)), jet };
        let p = Vector3::from_fn(|_, _| r.gen_range(-1.0..1.0));
        rel_err(&m.jacobian(&p).unwrap(), &fd_jacobian(&m, &p, [1e-3; 3]))
    });
    let pass = worst.iter().all(|(_, w)| *w < 1e-6);
    outcome(pass, worst.iter().map(|(n, w)| format!("{n} {w:.1e}")).collect::<Vec<_>>().join(", "))
}

fn synthetic(lc: f64) -> ClosureMap<impl Fn(&Vector3<f64>) -> Vector3<f64> + Send + Sync> {
    let mut c = ComplexTaylorMap::new(1.0);
    c.set(2, 1, -c.nu * lc);
    let p = planar_from_complex(&c);
    ClosureMap::new(move |x: &Vector3<f64>| {
        let (u, v) = p.eval(x[0], x[1]);
        Vector3::new(u, v, 0.5 * x[2])
    })
}

fn criterion_11() -> Outcome {
    let k = 6;
    let fam = toy();
    let opts = LocusOptions::default();
    let omega = window_center(k, eta_star(&fam), PI / k as f64);
    let mut lcs = Vec::new();
    let mut repelling = None;
    if let Ok((a, b)) = trace_interval(&fam, k, omega, &opts) {
        for i in 1..=40 {
            let t = a + (b - a) * i as f64 / 41.0;
            let Ok(s) = ns_locus_solve(&fam, k, t, omega, &opts) else { continue };
            let map = fam.first_return(k, &s.params).unwrap();
            let Ok(r) = ns_report(&map, &s.fixed_point.point) else { continue };
            lcs.push(r.lc);
            if r.lc < 0.0 && repelling.is_none() {
                repelling = Some((s, r));
            }
        }
    }
    let lc_min = lcs.iter().cloned().fold(f64::INFINITY, f64::min);
    let lc_max = lcs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let frame = ConeFrame::identity().with_y(Vector3::new(0.0, 1.0, 0.0), 0.0);
    let region = Box3::centered(&Vector3::zeros(), [0.5, 0.5, 0.5]);
    let opts_g = GrowthOptions { resolution: 1e-3, delta_prime: 0.3, ..GrowthOptions::default() };
    let origin = StatePoint::new(0.0, 0.0, 0.0, Chart::ReturnSection);
    let control = grow_unstable_set_run(&synthetic(1.0), &frame, &origin, (&Vector3::x(), &Vector3::y()), 0.02, 2000, &region, &opts_g).unwrap();
    let control_ok = !control.cloud.reached;

    let toy_part = match repelling {
        None => (false, format!("no solved repelling NS point among {} on the k=6 trace interval (LC in [{lc_min:.2e}, {lc_max:.2e}])", lcs.len())),
        Some((s, r)) => {
            let map = fam.first_return(k, &s.params).unwrap();
            let q = s.fixed_point.point;
            let e1: Vector3<f64> = r.basis.column(0).normalize();
            let e2: Vector3<f64> = r.basis.column(1).normalize();
            let tf = ConeFrame::toy(k, fam.gamma, hetcycle::map::TOY_Y_MINUS);
            let qc = tf.point_coords(&q.coords());
            let go = GrowthOptions::default();
            let dp = go.delta_prime;
            let region = Box3::centered(&Vector3::new(qc[0], 0.0, qc[2]), [dp; 3]);
            let span = tf.y_row.dot(&e1).hypot(tf.y_row.dot(&e2));
            match grow_unstable_set_run(&map, &tf, &q, (&e1, &e2), 1e-2 * dp * dp / span, 5000, &region, &go) {
                Ok(run) => (run.cloud.reached && !run.exploded, format!("toy reached {} with {} points", run.cloud.reached, run.cloud.len())),
                Err(e) => (false, e.to_string()),
            }
        }
    };
    outcome(toy_part.0 && control_ok, format!("{}; attracting control reached {}", toy_part.1, control.cloud.reached))
}

fn criterion_12() -> Outcome {
    let dir = std::env::temp_dir().join(format!("hetcycle-acceptance-{}", std::process::id()));
    let cfg = dir.join("scan.json");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(&cfg, r#"{"model": "toy", "sweep": {"k": [6, 8], "t_points": 8}, "seed": 12}"#).unwrap();
    let run = |sub: &str, jobs: &str| {
        let out = dir.join(sub);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_hetcycle"))
            .args(["ns-scan", "--config", cfg.to_str().unwrap(), "--seed", "12", "--jobs", jobs, "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        (status.success(), std::fs::read(out.join("ns_scan.csv")).unwrap_or_default())
    };
    let (ok_a, a) = run("a", "4");
    let (ok_b, b) = run("b", "4");
    let _ = std::fs::remove_dir_all(&dir);
    let rows = a.iter().filter(|c| **c == b'\n').count();
    outcome(ok_a && ok_b && !a.is_empty() && a == b, format!("{rows} lines, identical {}", a == b))
}

#[test]
fn acceptance() {
    let (c5, c6) = criterion_5_6();
    let results = [
        ("toy golden values", criterion_1()),
        ("LC formula vs oracle", criterion_2()),
        ("reference curve", criterion_3()),
        ("limit-coefficient consistency", criterion_4()),
        ("NS locus on toy unfolding", c5),
        ("EC sign", c6),
        ("determinant law", criterion_7()),
        ("cone invariance", criterion_8()),
        ("contraction solver", criterion_9()),
        ("Jacobian consistency", criterion_10()),
        ("manifold growth", criterion_11()),
        ("determinism", criterion_12()),
    ];
    for (i, (name, o)) in results.iter().enumerate() {
        println!("criterion {:>2} [{}] {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, (_, o))| !o.pass).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
