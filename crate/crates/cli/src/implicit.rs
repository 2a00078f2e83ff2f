use crate::config::Scenario;
use crate::expr::Expr;
use crate::failure::{CmdResult, Failure};
use crate::output::{write_json, Outputs};
use hetcycle::contraction::{solve_scalar, solve_system, ImplicitScalarProblem, ImplicitSystemProblem, SampleBox};
use hetcycle::Error;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Serialize)]
pub struct ImplicitReport {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub corrections: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sup_h: Vec<f64>,
    pub contraction: f64,
    pub iterations: Option<usize>,
}

fn exprs(list: &Option<Vec<String>>, name: &str) -> CmdResult<Vec<Expr>> {
    let list = list.as_ref().ok_or_else(|| Failure::Config(format!("solver.{name} is required")))?;
    list.iter().map(|s| Expr::parse(s).map_err(Failure::Config)).collect()
}

fn solve_error(e: Error) -> Failure {
    match e {
        Error::InvalidInput(_) => Failure::Config(e.to_string()),
        _ => Failure::Check(e.to_string()),
    }
}

pub fn implicit_report(s: &Scenario) -> CmdResult<ImplicitReport> {
    let sv = &s.solver;
    let g = exprs(&sv.g, "g")?;
    let h = exprs(&sv.h, "h")?;
    let m = g.len();
    if m == 0 || h.len() != m {
        return Err(Failure::Config(format!("need equally many g and h expressions, got {} and {}", g.len(), h.len())));
    }
    let x = sv.x.clone().unwrap_or_default();
    let x_box: Vec<(f64, f64)> = match &sv.x_box {
        Some(b) => b.iter().map(|[a, c]| (*a, *c)).collect(),
        None => x.iter().map(|v| (*v, *v)).collect(),
    };
    let y_box: Vec<(f64, f64)> = match &sv.y_box {
        Some(b) => b.iter().map(|[a, c]| (*a, *c)).collect(),
        None => vec![(-1.0, 1.0); m],
    };
    if x_box.len() != x.len() || y_box.len() != m {
        return Err(Failure::Config("x_box must match x and y_box must have one side per equation".into()));
    }
    let y_mid: Vec<f64> = y_box.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    for e in g.iter().chain(&h) {
        e.try_eval(&x, &y_mid).map_err(Failure::Config)?;
    }
    let tol = sv.tol.unwrap_or(1e-12);
    let domain = SampleBox { x: x_box, y: y_box };
    let (g, h) = (Arc::new(g), Arc::new(h));

    if m == 1 {
        let mut prob = ImplicitScalarProblem::new(move |x: &[f64]| g[0].eval(x, &[]), move |x: &[f64], y: f64| h[0].eval(x, &[y]), domain);
        prob.sup_h = sv.sup_h;
        prob.sup_hy = sv.sup_hy;
        let r = solve_scalar(&prob, &x, tol).map_err(solve_error)?;
        return Ok(ImplicitReport {
            x,
            y: vec![r.y],
            corrections: vec![r.correction],
            residuals: vec![r.residual],
            sup_h: vec![r.bounds.sup_h],
            contraction: r.bounds.sup_hy,
            iterations: Some(r.iterations),
        });
    }
    let mut prob = ImplicitSystemProblem::new(
        m,
        move |x: &[f64]| g.iter().map(|e| e.eval(x, &[])).collect(),
        move |x: &[f64], y: &[f64]| h.iter().map(|e| e.eval(x, y)).collect(),
        domain,
    );
    prob.sup_h = sv.sup_h.map(|b| vec![b; m]);
    prob.sup_hy = sv.sup_hy.map(|b| vec![vec![b; m]; m]);
    let r = solve_system(&prob, &x, tol).map_err(solve_error)?;
    Ok(ImplicitReport { x, y: r.y, corrections: r.corrections, residuals: r.residuals, sup_h: r.sup_h, contraction: r.contraction, iterations: None })
}

pub fn cmd_solve_implicit(s: &Scenario, out: &Outputs) -> CmdResult {
    let r = implicit_report(s)?;
    write_json(&out.path(s.output.json.as_deref(), "implicit.json"), &r)?;
    for (j, y) in r.y.iter().enumerate() {
        eprintln!("y{} = {y:.16e}  (|I| = {:.3e})", j + 1, r.corrections[j].abs());
    }
    Ok(())
}
