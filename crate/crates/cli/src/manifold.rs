use crate::config::{ModelKind, Scenario};
use crate::failure::{CmdResult, Failure};
use crate::output::{write_json, Outputs};
use crate::toy::{locus_options, ToySetup};
use hetcycle::fixed_point::{ns_locus_solve, repelling_window};
use hetcycle::hopf::{center_basis, planar_from_complex, ComplexTaylorMap, PlanarTaylorMap};
use hetcycle::invariance::{grow_unstable_set_run, stable_manifold_distance, ConeFrame, GrowthOptions, GrowthRun};
use hetcycle::map::{Box3, Chart, ClosureMap, MapModel, StatePoint, Unfolding, TOY_Y_MINUS};
use hetcycle::tangency::window_center;
use nalgebra::Vector3;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

#[derive(Debug, Serialize)]
pub struct ManifoldSummary {
    pub model: String,
    pub y_extent_reached: bool,
    pub y_extent: [f64; 2],
    pub threshold: f64,
    pub generations: usize,
    pub points: usize,
    pub exploded: bool,
    pub stable_y: f64,
    pub min_stable_distance: Option<f64>,
    pub sign_change: bool,
    pub evidence: bool,
}

/// Planar map with rotation `psi` and cubic coefficient giving the requested LC.
pub fn synthetic_planar(lc: f64, psi: f64) -> PlanarTaylorMap {
    let mut c = ComplexTaylorMap::new(psi);
    c.set(2, 1, -c.nu * lc);
    planar_from_complex(&c)
}

/// `(u, v, w) ↦ (P(u, v), w/2)`.
pub fn synthetic_map(p: PlanarTaylorMap) -> ClosureMap<impl Fn(&Vector3<f64>) -> Vector3<f64> + Send + Sync> {
    ClosureMap::new(move |x: &Vector3<f64>| {
        let (u, v) = p.eval(x[0], x[1]);
        Vector3::new(u, v, 0.5 * x[2])
    })
}

fn growth_options(s: &Scenario, resolution: f64, delta_prime: f64) -> GrowthOptions {
    let d = GrowthOptions::default();
    GrowthOptions {
        resolution: s.solver.resolution.unwrap_or(resolution),
        budget: s.solver.budget.unwrap_or(d.budget),
        delta_prime: s.solver.delta_prime.unwrap_or(delta_prime),
        ..d
    }
}

/// Growth run and the stable level used for the distance check.
pub fn manifold_run(s: &Scenario) -> CmdResult<(GrowthRun, f64, f64)> {
    let gens = s.solver.max_generations.unwrap_or(2000);
    match s.model {
        ModelKind::Toy => {
            let setup = ToySetup::from_scenario(s)?;
            let fam = &setup.family;
            let opts = locus_options(s);
            let k = match s.sweep.k.as_deref() {
                None => 6,
                Some([k]) if *k > 0 && k % 2 == 0 => *k,
                Some(_) => return Err(Failure::Config("manifold takes a single positive even k".into())),
            };
            let c0 = setup.coefficients(&setup.params).map_err(Failure::from_setup)?;
            let omega = s.params.omega.unwrap_or_else(|| window_center(k, c0.eta_star(), PI / k as f64));
            let t = match s.sweep.t {
                Some(t) => t,
                None => {
                    let (a, b) = repelling_window(fam, k, omega, &opts).map_err(Failure::from_setup)?;
                    0.5 * (a + b)
                }
            };
            let sol = ns_locus_solve(fam, k, t, omega, &opts).map_err(Failure::from_setup)?;
            let map = fam.first_return(k, &sol.params).map_err(Failure::from_setup)?;
            let q = sol.fixed_point.point;
            let j = map.jacobian(&q.coords()).map_err(Failure::from_setup)?;
            let cb = center_basis(&j).map_err(Failure::from_setup)?;
            let e1: Vector3<f64> = cb.basis.column(0).normalize();
            let e2: Vector3<f64> = cb.basis.column(1).normalize();
            let frame = ConeFrame::toy(k, fam.gamma, TOY_Y_MINUS);
            let go = growth_options(s, GrowthOptions::default().resolution, 0.01);
            let qc = frame.point_coords(&q.coords());
            let dp = go.delta_prime;
            let region = Box3::centered(&Vector3::new(qc[0], 0.0, qc[2]), [dp, dp, dp]);
            // seed disk spans a hundredth of the target |Y| = δ′²
            let y_span = frame.y_row.dot(&e1).hypot(frame.y_row.dot(&e2));
            let seed = s.solver.seed_radius.unwrap_or((1e-2 * dp * dp / y_span).min(1e-3 * dp));
            let run = grow_unstable_set_run(&map, &frame, &q, (&e1, &e2), seed, gens, &region, &go).map_err(Failure::from_setup)?;
            // pulled-back homoclinic piece Y = y⁻σ − y⁻ with σ = 1
            Ok((run, s.solver.stable_y.unwrap_or(0.0), dp * dp))
        }
        ModelKind::NormalFormTest => {
            let p = &s.params;
            let map = synthetic_map(synthetic_planar(p.lc.unwrap_or(-1.0), p.psi.unwrap_or(1.0)));
            let frame = ConeFrame::identity().with_y(Vector3::new(0.0, 1.0, 0.0), 0.0);
            let region = Box3::centered(&Vector3::zeros(), [0.5, 0.5, 0.5]);
            let go = growth_options(s, 1e-3, 0.3);
            let q = StatePoint::new(0.0, 0.0, 0.0, Chart::ReturnSection);
            let seed = s.solver.seed_radius.unwrap_or(0.02);
            let run = grow_unstable_set_run(&map, &frame, &q, (&Vector3::x(), &Vector3::y()), seed, gens, &region, &go).map_err(Failure::from_setup)?;
            let dp = go.delta_prime;
            Ok((run, s.solver.stable_y.unwrap_or(dp * dp), dp * dp))
        }
        ModelKind::UserCoefficients => Err(Failure::Config("manifold needs model toy or normal_form_test".into())),
    }
}

pub fn cmd_manifold(s: &Scenario, out: &Outputs) -> CmdResult {
    let (run, stable_y, threshold) = manifold_run(s)?;
    let cloud = &run.cloud;
    let csv = out.path(s.output.csv.as_deref(), "manifold.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&csv).map_err(|e| Failure::Io(format!("{}: {e}", csv.display())))?);
    cloud.write_csv(&mut f)?;
    f.flush()?;

    let dist = stable_manifold_distance(cloud, |_, _| stable_y).ok();
    let summary = ManifoldSummary {
        model: format!("{:?}", s.model),
        y_extent_reached: cloud.reached,
        y_extent: [cloud.y_extent.0, cloud.y_extent.1],
        threshold,
        generations: cloud.generation,
        points: cloud.len(),
        exploded: run.exploded,
        stable_y,
        min_stable_distance: dist.as_ref().map(|d| d.min_distance),
        sign_change: dist.as_ref().is_some_and(|d| d.sign_change),
        evidence: dist.as_ref().is_some_and(|d| d.is_evidence(10.0 * cloud.resolution)),
    };
    write_json(&out.path(s.output.json.as_deref(), "manifold.json"), &summary)?;
    eprintln!("{} points, {} generations, Y in [{:.4e}, {:.4e}], reached = {}", summary.points, summary.generations, summary.y_extent[0], summary.y_extent[1], summary.y_extent_reached);
    if run.exploded {
        return Err(Failure::Budget(format!("point budget of {} exhausted", s.solver.budget.unwrap_or(GrowthOptions::default().budget))));
    }
    Ok(())
}
