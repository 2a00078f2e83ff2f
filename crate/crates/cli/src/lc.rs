use crate::config::{ModelKind, Scenario};
use crate::failure::{CmdResult, Failure};
use crate::output::{write_json, Outputs};
use hetcycle::hopf::{kill_quadratic, lc_condition, lyapunov_coefficient, reference_curve, ComplexTaylorMap};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

const KEYS: [(&str, (u8, u8)); 7] = [("20", (2, 0)), ("11", (1, 1)), ("02", (0, 2)), ("30", (3, 0)), ("21", (2, 1)), ("12", (1, 2)), ("03", (0, 3))];

#[derive(Debug, Serialize)]
pub struct LcReport {
    pub psi: f64,
    pub alpha: [f64; 2],
    pub lc: f64,
    pub condition: f64,
    pub reference_curve: Option<f64>,
}

/// Complex Taylor map described by the scenario.
pub fn scenario_map(s: &Scenario) -> CmdResult<ComplexTaylorMap> {
    let p = &s.params;
    match s.model {
        ModelKind::Toy => Err(Failure::Config("lc needs model normal_form_test or user_coefficients".into())),
        ModelKind::NormalFormTest => {
            if p.coefficients.is_some() {
                return Err(Failure::Config("normal_form_test takes no coefficients".into()));
            }
            let mut c = ComplexTaylorMap::new(p.psi.unwrap_or(PI / 3.0));
            let nu = c.nu;
            c.set(2, 0, nu);
            c.set(0, 2, nu);
            c.set(1, 1, -2.0 * nu);
            Ok(c)
        }
        ModelKind::UserCoefficients => {
            let psi = p.psi.ok_or_else(|| Failure::Config("user_coefficients needs params.psi".into()))?;
            let mut c = ComplexTaylorMap::new(psi);
            for (key, [re, im]) in p.coefficients.iter().flatten() {
                let (_, (a, b)) = KEYS.iter().find(|(k, _)| k == key).ok_or_else(|| Failure::Config(format!("unknown coefficient key {key:?}")))?;
                c.set(*a, *b, Complex64::new(*re, *im));
            }
            Ok(c)
        }
    }
}

pub fn lc_report(c: &ComplexTaylorMap) -> CmdResult<LcReport> {
    let psi = c.psi();
    if !psi.is_finite() {
        return Err(Failure::Config("psi must be finite".into()));
    }
    let alpha = kill_quadratic(c).map_err(Failure::from_setup)?;
    let lc = lyapunov_coefficient(c).map_err(Failure::from_setup)?;
    let condition = lc_condition(c).map_err(Failure::from_setup)?;
    Ok(LcReport { psi, alpha: [alpha.re, alpha.im], lc, condition, reference_curve: reference_curve(psi).ok() })
}

pub fn cmd_lc(s: &Scenario, out: &Outputs) -> CmdResult {
    let report = lc_report(&scenario_map(s)?)?;
    write_json(&out.path(s.output.json.as_deref(), "lc.json"), &report)?;
    eprintln!("psi = {:.6}  LC = {:.6e}  alpha = ({:.6e}, {:.6e})", report.psi, report.lc, report.alpha[0], report.alpha[1]);
    Ok(())
}
