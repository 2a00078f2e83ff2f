use crate::config::{ModelKind, Scenario};
use crate::failure::{CmdResult, Failure};
use crate::output::{fmt_f64, write_json, Outputs};
use hetcycle::fixed_point::{multipliers, ns_locus_solve, rho_value, trace_interval, LocusOptions, NewtonOptions};
use hetcycle::hopf::{ns_report, Verdict};
use hetcycle::map::{Chart, MapModel, ParamTriple, StatePoint, ToyUnfolding, Unfolding};
use hetcycle::tangency::{
    check_ec, expanding_quantity, extract_global_coefficients, omega_window_contains, quadratic_tangency_find, window_center,
    GlobalMapCoefficients, OmegaWindow, WindowKind,
};
use hetcycle::Error;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

/// Toy family and base parameters from the scenario.
pub struct ToySetup {
    pub family: ToyUnfolding,
    pub params: ParamTriple,
}

impl ToySetup {
    pub fn from_scenario(s: &Scenario) -> CmdResult<Self> {
        if s.model != ModelKind::Toy {
            return Err(Failure::Config(format!("model {:?} is not the toy model", s.model)));
        }
        let p = &s.params;
        let mut family = ToyUnfolding::new(p.eps.unwrap_or(0.2)).map_err(|e| Failure::Config(e.to_string()))?;
        if let Some(g) = p.gamma {
            family.gamma = g;
        }
        if let Some(d) = p.delta_dom {
            family.delta_dom = d;
        }
        let rho = match (p.rho, p.lambda) {
            (Some(r), None) => r,
            (None, Some(l)) if l > 0.0 => (l * family.gamma).ln(),
            (None, None) => 0.0,
            (Some(r), Some(l)) if ((l * family.gamma).ln() - r).abs() < 1e-12 => r,
            _ => return Err(Failure::Config("inconsistent lambda and rho".into())),
        };
        let params = ParamTriple::new(p.mu.unwrap_or(0.0), p.omega.unwrap_or(PI / 6.0), rho).map_err(|e| Failure::Config(e.to_string()))?;
        family.config(&params).validate().map_err(|e| Failure::Config(e.to_string()))?;
        if !(family.delta_dom > 0.0) {
            return Err(Failure::Config("delta_dom must be positive".into()));
        }
        Ok(Self { family, params })
    }

    pub fn coefficients(&self, params: &ParamTriple) -> hetcycle::Result<GlobalMapCoefficients> {
        let g = self.family.global(params);
        let m = self.family.m_minus();
        let plus = g.eval(&m)?;
        extract_global_coefficients(&g, &StatePoint::from_vector(&m, Chart::GlobalNeighborhood), &StatePoint::from_vector(&plus, Chart::ReturnSection))
    }
}

pub fn locus_options(s: &Scenario) -> LocusOptions {
    let d = LocusOptions::default();
    LocusOptions {
        newton: NewtonOptions { tol: s.solver.newton_tol.unwrap_or(d.newton.tol), ..d.newton },
        product_tol: s.solver.product_tol.unwrap_or(d.product_tol),
        max_outer: s.solver.max_outer.unwrap_or(d.max_outer),
    }
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self { name, value, expected, tolerance, pass: (value - expected).abs() <= tolerance }
    }
}

#[derive(Debug, Serialize)]
pub struct ToyReport {
    pub eps: f64,
    pub params: ParamTriple,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Multipliers, ρ, 𝓔 and the tangency certificate of the toy model.
pub fn toy_checks(setup: &ToySetup) -> hetcycle::Result<ToyReport> {
    let e = setup.params;
    let fam = &setup.family;
    let cfg = fam.config(&e);
    let mut checks = Vec::new();

    let m = multipliers(&fam.local(&e), &StatePoint::from_vector(&fam.saddle(), Chart::LocalCylinder))?;
    let want = num_complex::Complex64::from_polar(cfg.lambda, cfg.omega);
    checks.push(Check::new("nu1_re", m.nu1.re, want.re, 1e-12));
    checks.push(Check::new("nu1_im", m.nu1.im, want.im, 1e-12));
    checks.push(Check::new("nu2_im", m.nu2.im, -want.im, 1e-12));
    checks.push(Check::new("nu3", m.nu3.re, cfg.gamma, 1e-12));

    checks.push(Check::new("rho", rho_value(fam.lambda_mod(&e)?, cfg.gamma)?, e.rho, 1e-14));

    let c = setup.coefficients(&e)?;
    checks.push(Check::new("expanding_quantity", expanding_quantity(&c), 2.0, 1e-10));
    checks.push(Check::new("expanding_condition", f64::from(u8::from(check_ec(&c))), 1.0, 0.0));

    let g = fam.global(&e);
    let m_minus = fam.m_minus();
    let curve = |t: f64| g.eval(&(m_minus + Vector3::new(0.0, 0.0, t))).unwrap_or_else(|_| Vector3::repeat(f64::NAN));
    let cert = quadratic_tangency_find(curve, 2, (-0.05, 0.05))?;
    let p = cert.point.coords();
    let d = 4.0 / (cfg.eps * cfg.eps);
    checks.push(Check::new("tangency_t", cert.t_star, 0.0, 1e-8));
    checks.push(Check::new("tangency_x1", p[0], 0.0, 1e-8));
    checks.push(Check::new("tangency_x2", p[1], 2.0, 1e-8));
    checks.push(Check::new("tangency_y", p[2], e.mu, 1e-8));
    checks.push(Check::new("d_coeff", cert.d_coeff, d, 1e-8 * d));

    let pass = checks.iter().all(|c| c.pass);
    Ok(ToyReport { eps: cfg.eps, params: e, checks, pass })
}

pub fn cmd_toy_verify(s: &Scenario, out: &Outputs) -> CmdResult {
    let setup = ToySetup::from_scenario(s)?;
    let report = toy_checks(&setup).map_err(Failure::from_setup)?;
    let path = out.path(s.output.json.as_deref(), "toy_verify.json");
    write_json(&path, &report)?;
    for c in &report.checks {
        eprintln!("{:<20} {:>24} {}", c.name, fmt_f64(c.value), if c.pass { "ok" } else { "FAIL" });
    }
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Check("toy verification".into()))
    }
}

pub const NS_HEADER: &str = "k,t,omega,mu,rho,psi,nu1_re,nu1_im,nu3,lc,verdict,e_k,E_quantity,flags";

fn error_flag(e: &Error) -> &'static str {
    match e {
        Error::ResonanceGuard { .. } => "resonance_guard",
        Error::WindowViolation { .. } => "window_violation",
        Error::NoFixedPoint(_) | Error::NoConvergence(_) | Error::SingularJacobian(_) => "no_fixed_point",
        Error::NotBracketed(_) => "not_bracketed",
        Error::SingularHomological(_) => "singular_homological",
        Error::LeftChart(_) | Error::NotInSection => "left_chart",
        _ => "error",
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::WeaklyRepelling => "weakly_repelling",
        Verdict::WeaklyAttracting => "weakly_attracting",
        Verdict::Degenerate => "degenerate",
    }
}

/// One grid point of an NS scan; numeric fields are NaN on failure.
#[derive(Debug, Clone, PartialEq)]
pub struct NsRow {
    pub k: usize,
    pub t: f64,
    pub omega: f64,
    pub mu: f64,
    pub rho: f64,
    pub psi: f64,
    pub nu1_re: f64,
    pub nu1_im: f64,
    pub nu3: f64,
    pub lc: f64,
    pub verdict: String,
    pub e_k: f64,
    pub e_quantity: f64,
    pub flags: Vec<String>,
}

impl NsRow {
    fn failed(k: usize, t: f64, omega: f64, flags: Vec<String>) -> Self {
        let n = f64::NAN;
        Self { k, t, omega, mu: n, rho: n, psi: n, nu1_re: n, nu1_im: n, nu3: n, lc: n, verdict: "nan".into(), e_k: n, e_quantity: n, flags }
    }

    pub fn csv(&self) -> String {
        let f = fmt_f64;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.k,
            f(self.t),
            f(self.omega),
            f(self.mu),
            f(self.rho),
            f(self.psi),
            f(self.nu1_re),
            f(self.nu1_im),
            f(self.nu3),
            f(self.lc),
            self.verdict,
            f(self.e_k),
            f(self.e_quantity),
            self.flags.join("|")
        )
    }
}

fn scan_row(setup: &ToySetup, opts: &LocusOptions, k: usize, omega: f64, t: f64, window_flags: &[String]) -> NsRow {
    let fam = &setup.family;
    let mut flags = window_flags.to_vec();
    let solved = ns_locus_solve(fam, k, t, omega, opts).and_then(|s| {
        let map = fam.first_return(k, &s.params)?;
        let r = ns_report(&map, &s.fixed_point.point)?;
        let c = setup.coefficients(&s.params)?;
        Ok((s, r, expanding_quantity(&c)))
    });
    match solved {
        Ok((s, r, eq)) => {
            if r.resonance_flag {
                flags.push("near_resonance".into());
            }
            NsRow {
                k,
                t,
                omega,
                mu: s.params.mu,
                rho: s.params.rho,
                psi: r.psi,
                nu1_re: r.mults.nu1.re,
                nu1_im: r.mults.nu1.im,
                nu3: r.mults.nu3.re,
                lc: r.lc,
                verdict: verdict_name(r.verdict).into(),
                e_k: s.e_k,
                e_quantity: eq,
                flags,
            }
        }
        Err(e) => {
            flags.push(error_flag(&e).into());
            NsRow::failed(k, t, omega, flags)
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Rows of the scan in grid order `(k, ω, t)`.
pub fn ns_scan_rows(s: &Scenario) -> CmdResult<Vec<NsRow>> {
    let setup = ToySetup::from_scenario(s)?;
    let opts = locus_options(s);
    let ks = s.sweep.k.clone().unwrap_or_else(|| vec![6, 8, 10]);
    if let Some(k) = ks.iter().find(|k| **k == 0 || **k % 2 == 1) {
        return Err(Failure::Config(format!("k = {k} must be a positive even integer")));
    }
    let n_t = s.sweep.t_points.unwrap_or(20);
    let c0 = setup.coefficients(&setup.params).map_err(Failure::from_setup)?;

    let mut cells: Vec<(usize, f64)> = Vec::new();
    for &k in &ks {
        let omegas = match s.sweep.omega_range {
            Some([a, b]) if a <= b => linspace(a, b, s.sweep.omega_points.unwrap_or(1)),
            Some(_) => vec![],
            None => vec![window_center(k, c0.eta_star(), PI / k as f64)],
        };
        if let Some(w) = omegas.iter().find(|w| !(**w > 0.0 && **w < PI)) {
            return Err(Failure::Config(format!("omega = {w} not in (0, pi)")));
        }
        cells.extend(omegas.into_iter().map(|w| (k, w)));
    }

    let grids: Vec<(usize, f64, Vec<String>, Result<Vec<f64>, Error>)> = cells
        .par_iter()
        .map(|&(k, w)| {
            let mut flags = Vec::new();
            if let Ok(c) = setup.coefficients(&ParamTriple { omega: w, ..setup.params }) {
                if omega_window_contains(&OmegaWindow::new(WindowKind::Ex, k, &c), w) {
                    flags.push("ex".to_string());
                }
            }
            let ts = match s.sweep.t_range {
                Some([a, b]) => Ok(linspace(a, b, n_t)),
                None => trace_interval(&setup.family, k, w, &opts).map(|(lo, hi)| (1..=n_t).map(|i| lo + (hi - lo) * i as f64 / (n_t + 1) as f64).collect()),
            };
            (k, w, flags, ts)
        })
        .collect();

    let mut tasks: Vec<(usize, f64, f64, Vec<String>)> = Vec::new();
    let mut failed: Vec<(usize, NsRow)> = Vec::new();
    for (k, w, flags, ts) in grids {
        match ts {
            Ok(ts) => tasks.extend(ts.into_iter().map(|t| (k, w, t, flags.clone()))),
            Err(e) => {
                let mut f = flags.clone();
                f.push(error_flag(&e).into());
                failed.push((tasks.len(), NsRow::failed(k, f64::NAN, w, f)));
                tasks.push((k, w, f64::NAN, vec![]));
            }
        }
    }
    let mut rows: Vec<NsRow> = tasks
        .par_iter()
        .map(|(k, w, t, flags)| if t.is_nan() { NsRow::failed(*k, *t, *w, vec![]) } else { scan_row(&setup, &opts, *k, *w, *t, flags) })
        .collect();
    for (i, row) in failed {
        rows[i] = row;
    }
    Ok(rows)
}

pub fn cmd_ns_scan(s: &Scenario, out: &Outputs) -> CmdResult {
    let rows = ns_scan_rows(s)?;
    let path = out.path(s.output.csv.as_deref(), "ns_scan.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?);
    writeln!(f, "{NS_HEADER}")?;
    for r in &rows {
        writeln!(f, "{}", r.csv())?;
    }
    f.flush()?;
    let solved = rows.iter().filter(|r| r.lc.is_finite()).count();
    eprintln!("{} rows ({solved} solved) -> {}", rows.len(), path.display());
    Ok(())
}
