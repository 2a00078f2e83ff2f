//! Sampling checks: cone-field invariance, area expansion of the planar
//! restriction, unstable-set growth and distance to a stable surface.

use crate::contraction::halton;
use crate::error::{Error, Result};
use crate::hopf::{complex_coefficients, lyapunov_coefficient, normal_form, PlanarTaylorMap};
use crate::map::{Box3, Chart, MapModel, StatePoint};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    /// Strong-stable: `|z| + |y| < K δ |w|`, backward invariant.
    SS,
    /// Center-unstable: `|w| < K((|Y| + λ_k)|z| + |y|/γ_k)`, forward invariant.
    CU,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    #[serde(rename = "K")]
    pub aperture: f64,
    pub delta_dom: f64,
    pub k: usize,
    /// `|λ|ᵏ`.
    pub lambda_k: f64,
    /// `|γ|ᵏ`.
    pub gamma_k: f64,
}

impl ConeSpec {
    pub fn with_aperture(&self, aperture: f64) -> Self {
        Self { aperture, ..*self }
    }

    /// Signed distance into the cone, relative to `‖c‖₁`; positive inside.
    pub fn margin(&self, c: &Vector3<f64>, big_y: f64) -> f64 {
        let (z, y, w) = (c[0].abs(), c[1].abs(), c[2].abs());
        let m = match self.kind {
            ConeKind::SS => self.aperture * self.delta_dom * w - z - y,
            ConeKind::CU => self.aperture * ((big_y.abs() + self.lambda_k) * z + y / self.gamma_k) - w,
        };
        let n = z + y + w;
        if n == 0.0 {
            0.0
        } else {
            m / n
        }
    }
}

/// Linear change from tangent vectors to cone coordinates `(z, y, w)`, and
/// the section coordinate `Y(p) = y_row·p + y_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeFrame {
    pub to_cone: Matrix3<f64>,
    pub y_row: Vector3<f64>,
    pub y_offset: f64,
}

impl ConeFrame {
    /// Cone coordinates equal state coordinates; `Y ≡ 0`.
    pub fn identity() -> Self {
        Self { to_cone: Matrix3::identity(), y_row: Vector3::zeros(), y_offset: 0.0 }
    }

    /// Frame for the toy `T_k`: `z = dx₁`, `y = dy`, `w = dx₂`, `Y = γᵏ y − y⁻`.
    pub fn toy(k: usize, gamma: f64, y_minus: f64) -> Self {
        let gk = gamma.powi(k as i32);
        Self {
            to_cone: Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0),
            y_row: Vector3::new(0.0, 0.0, gk),
            y_offset: -y_minus,
        }
    }

    pub fn cone_coords(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.to_cone * v
    }

    pub fn from_cone(&self, c: &Vector3<f64>) -> Result<Vector3<f64>> {
        self.to_cone.lu().solve(c).ok_or_else(|| Error::InvalidInput("singular cone frame".into()))
    }

    pub fn big_y(&self, p: &Vector3<f64>) -> f64 {
        self.y_row.dot(p) + self.y_offset
    }

    /// `(Z, Y, W)` of a point: cone rows for `Z`, `W` and the section coordinate.
    pub fn point_coords(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let c = self.to_cone * p;
        Vector3::new(c[0], self.big_y(p), c[2])
    }

    pub fn with_y(&self, y_row: Vector3<f64>, y_offset: f64) -> Self {
        Self { y_row, y_offset, ..*self }
    }
}

/// Linear model `z′ = γz`, `y′ = γy + b w`, `w′ = λw + a z` in cone coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockModel {
    pub gamma: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
}

impl BlockModel {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.gamma, 0.0, 0.0, 0.0, self.gamma, self.b, self.a, 0.0, self.lambda)
    }

    /// Smallest CU aperture for `b = 0`, with `λ_k = γ_k = 1`.
    pub fn cu_threshold(&self) -> f64 {
        self.a.abs() / (self.gamma - self.lambda)
    }

    /// Smallest SS aperture for `a = 0`.
    pub fn ss_threshold(&self, delta: f64) -> f64 {
        self.b.abs() / ((self.gamma - self.lambda) * delta)
    }
}

impl MapModel for BlockModel {
    fn eval(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.matrix() * p)
    }
    fn jacobian(&self, _p: &Vector3<f64>) -> Result<Matrix3<f64>> {
        Ok(self.matrix())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub violations: usize,
    pub worst_margin: f64,
    pub samples: usize,
    /// Drawn base points rejected because their image left the region.
    pub rejected: usize,
}

fn sample_l1_disc<R: Rng>(rng: &mut R) -> (f64, f64) {
    loop {
        let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if a.abs() + b.abs() < 1.0 {
            return (a, b);
        }
    }
}

/// Sample `(p, v)` pairs and test the cone's invariance under `DT`
/// (backward for SS, forward for CU).
pub fn cone_invariance_check<M: MapModel + ?Sized>(map: &M, frame: &ConeFrame, cone: &ConeSpec, region: &Box3, n_samples: usize, seed: u64) -> Result<ConeReport> {
    if !(cone.aperture > 0.0) {
        return Err(Error::InvalidInput(format!("aperture {} must be positive", cone.aperture)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ConeReport { violations: 0, worst_margin: f64::INFINITY, samples: 0, rejected: 0 };
    let max_draws = 100 * n_samples.max(1);
    let mut draws = 0;
    while report.samples < n_samples {
        draws += 1;
        if draws > max_draws {
            return Err(Error::DomainError(format!("only {} of {n_samples} base points map into the region", report.samples)));
        }
        let p = region.sample(&mut rng);
        let q = match map.eval(&p) {
            Ok(q) => q,
            Err(_) => {
                report.rejected += 1;
                continue;
            }
        };
        if !region.contains(&q) {
            report.rejected += 1;
            continue;
        }
        let j = map.jacobian(&p)?;
        let margin = match cone.kind {
            ConeKind::SS => {
                let (z, y) = sample_l1_disc(&mut rng);
                let r = cone.aperture * cone.delta_dom;
                let w = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let v_img = frame.from_cone(&Vector3::new(z * r, y * r, w))?;
                let v = j.lu().solve(&v_img).ok_or(Error::SingularJacobian(f64::INFINITY))?;
                cone.margin(&frame.cone_coords(&v), frame.big_y(&p))
            }
            ConeKind::CU => {
                let (z, y): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let big_y = frame.big_y(&p);
                let width = cone.aperture * ((big_y.abs() + cone.lambda_k) * z.abs() + y.abs() / cone.gamma_k);
                let w = rng.gen_range(-1.0..1.0) * width;
                let v = frame.from_cone(&Vector3::new(z, y, w))?;
                cone.margin(&frame.cone_coords(&(j * v)), frame.big_y(&q))
            }
        };
        if !margin.is_finite() {
            return Err(Error::NonFinite("cone margin"));
        }
        report.samples += 1;
        report.worst_margin = report.worst_margin.min(margin);
        if margin <= 0.0 {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Smallest aperture on a geometric grid over `[1e−12, 1e6]` whose
/// 10³-sample pilot passes, times 2.
pub fn calibrate_aperture<M: MapModel + ?Sized>(map: &M, frame: &ConeFrame, cone: &ConeSpec, region: &Box3, seed: u64) -> Result<f64> {
    for j in 0..=144 {
        let k = 1e-12 * 10f64.powf(j as f64 / 8.0);
        let r = cone_invariance_check(map, frame, &cone.with_aperture(k), region, 1000, seed)?;
        if r.violations == 0 {
            return Ok(2.0 * k);
        }
    }
    Err(Error::DomainError("no aperture up to 1e6 passes the pilot".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetReport {
    pub min_abs_det_product: f64,
    pub max_abs_det_product: f64,
    /// Samples whose orbit left the chart `|w| ≤ chart_radius` before `n_iter`.
    pub left_chart: usize,
    pub samples: usize,
}

/// Products of `|det DT|` along `n_iter` steps of the planar map from
/// Halton points of the annulus; orbits stop when they leave `|w| ≤ 1`.
pub fn det_expansion_check(planar: &PlanarTaylorMap, annulus: (f64, f64), n_iter: usize, n_samples: usize) -> Result<DetReport> {
    let (r_in, r_out) = annulus;
    if !(r_in > 0.0 && r_in <= r_out) {
        return Err(Error::InvalidInput(format!("bad annulus ({r_in}, {r_out})")));
    }
    let chart_radius = 1.0;
    let mut rep = DetReport { min_abs_det_product: f64::INFINITY, max_abs_det_product: 0.0, left_chart: 0, samples: n_samples };
    for i in 0..n_samples {
        let r = (r_in * r_in + (r_out * r_out - r_in * r_in) * halton(i + 1, 2)).sqrt();
        let th = std::f64::consts::TAU * halton(i + 1, 3);
        let (mut u, mut v) = (r * th.cos(), r * th.sin());
        let mut prod = 1.0;
        for _ in 0..n_iter {
            prod *= planar.jacobian(u, v).determinant().abs();
            (u, v) = planar.eval(u, v);
            if !(u.hypot(v) <= chart_radius) {
                rep.left_chart += 1;
                break;
            }
        }
        rep.min_abs_det_product = rep.min_abs_det_product.min(prod);
        rep.max_abs_det_product = rep.max_abs_det_product.max(prod);
    }
    Ok(rep)
}

/// `(|w|, max over angles of ||det| − (1 − 4 LC |w|²)|)` for the normal form
/// of `planar`, conjugated from the untruncated cubic map.
pub fn det_law_residuals(planar: &PlanarTaylorMap, radii: &[f64], n_angles: usize) -> Result<(f64, Vec<(f64, f64)>)> {
    let cmap = complex_coefficients(planar);
    let lc = lyapunov_coefficient(&cmap)?;
    let nf = normal_form(&cmap)?;
    let g = cmap.to_poly();
    let out = radii
        .iter()
        .map(|&r| {
            let worst = (0..n_angles)
                .map(|i| {
                    let w = Complex64::from_polar(r, std::f64::consts::TAU * (i as f64 + 0.5) / n_angles as f64);
                    (nf.conjugated_det(&g, w) - (1.0 - 4.0 * lc * r * r)).abs()
                })
                .fold(0.0f64, f64::max);
            (r, worst)
        })
        .collect();
    Ok((lc, out))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthOptions {
    /// Target segment length in frame coordinates.
    pub resolution: f64,
    pub refine_factor: f64,
    pub budget: usize,
    pub rings: usize,
    pub ring_points: usize,
    /// `δ′_dom`; growth stops once `|Y|` reaches `δ′_dom²`.
    pub delta_prime: f64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self { resolution: 1e-4, refine_factor: 3.0, budget: 1_000_000, rings: 4, ring_points: 64, delta_prime: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldCloud {
    pub points: Vec<StatePoint>,
    /// Generation of each point (0 = seed disk).
    pub generations: Vec<usize>,
    /// `(Z, Y, W)` of each point.
    pub frame_coords: Vec<Vector3<f64>>,
    /// Consecutive points of a polyline, as index pairs.
    pub segments: Vec<(usize, usize)>,
    pub generation: usize,
    /// Union of the Y-ranges of all generations.
    pub y_extent: (f64, f64),
    pub extent_history: Vec<(f64, f64)>,
    pub resolution: f64,
    pub reached: bool,
}

impl ManifoldCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with header `generation,Z,Y,W`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "generation,Z,Y,W")?;
        for (g, c) in self.generations.iter().zip(self.frame_coords.iter()) {
            writeln!(out, "{g},{:.16e},{:.16e},{:.16e}", c[0], c[1], c[2])?;
        }
        Ok(())
    }
}

/// Result of a growth run: the cloud so far and whether the budget ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRun {
    pub cloud: ManifoldCloud,
    pub exploded: bool,
}

/// Concentric rings of radius `seed_radius·i/rings` in the plane of `e1, e2` at `q`.
fn seed_disk(q: &Vector3<f64>, e1: &Vector3<f64>, e2: &Vector3<f64>, seed_radius: f64, opts: &GrowthOptions) -> Vec<Vec<Vector3<f64>>> {
    (1..=opts.rings)
        .map(|i| {
            let r = seed_radius * i as f64 / opts.rings as f64;
            (0..=opts.ring_points)
                .map(|j| {
                    let th = std::f64::consts::TAU * j as f64 / opts.ring_points as f64;
                    q + (e1 * th.cos() + e2 * th.sin()) * r
                })
                .collect()
        })
        .collect()
}

/// Image of a polyline with adaptive refinement; pieces leaving the box or
/// the map's domain are cut out.
fn advance<M: MapModel + ?Sized>(map: &M, frame: &ConeFrame, region: &Box3, line: &[Vector3<f64>], opts: &GrowthOptions, count: &mut usize) -> Vec<Vec<Vector3<f64>>> {
    let image = |p: &Vector3<f64>| -> Option<Vector3<f64>> {
        let q = map.eval(p).ok()?;
        region.contains(&frame.point_coords(&q)).then_some(q)
    };
    let limit = opts.refine_factor * opts.resolution;
    let mut out = Vec::new();
    let mut cur: Vec<Vector3<f64>> = Vec::new();
    let mut prev: Option<(Vector3<f64>, Vector3<f64>)> = None;
    for p in line {
        let Some(img) = image(p) else {
            if cur.len() > 1 {
                out.push(std::mem::take(&mut cur));
            }
            cur.clear();
            prev = None;
            continue;
        };
        if let Some((pp, pi)) = prev {
            // bisect in the preimage until image segments are short
            let mut stack = vec![(pp, pi, *p, img, 0u32)];
            let mut pieces = Vec::new();
            while let Some((a, ia, b, ib, depth)) = stack.pop() {
                let len = (frame.point_coords(&ib) - frame.point_coords(&ia)).amax();
                if len <= limit || depth >= 40 || *count > opts.budget {
                    pieces.push(ib);
                    continue;
                }
                let m = (a + b) * 0.5;
                match image(&m) {
                    Some(im) => {
                        *count += 1;
                        stack.push((m, im, b, ib, depth + 1));
                        stack.push((a, ia, m, im, depth + 1));
                    }
                    None => pieces.push(ib),
                }
            }
            cur.extend(pieces);
        } else {
            cur.push(img);
        }
        *count += 1;
        prev = Some((*p, img));
    }
    if cur.len() > 1 {
        out.push(cur);
    }
    out
}

/// Iterate a meshed disk around `q` in the plane of `e1, e2`, clipping to
/// `region` (in frame coordinates `(Z, Y, W)`).
pub fn grow_unstable_set_run<M: MapModel + ?Sized>(
    map: &M,
    frame: &ConeFrame,
    q: &StatePoint,
    plane: (&Vector3<f64>, &Vector3<f64>),
    seed_radius: f64,
    max_generations: usize,
    region: &Box3,
    opts: &GrowthOptions,
) -> Result<GrowthRun> {
    if !(seed_radius > 0.0 && opts.resolution > 0.0) {
        return Err(Error::InvalidInput("seed radius and resolution must be positive".into()));
    }
    let threshold = opts.delta_prime * opts.delta_prime;
    let mut lines = seed_disk(&q.coords(), plane.0, plane.1, seed_radius, opts);
    let mut cloud = ManifoldCloud {
        points: Vec::new(),
        generations: Vec::new(),
        frame_coords: Vec::new(),
        segments: Vec::new(),
        generation: 0,
        y_extent: (f64::INFINITY, f64::NEG_INFINITY),
        extent_history: Vec::new(),
        resolution: opts.resolution,
        reached: false,
    };
    let mut count = 0usize;
    let mut exploded = false;
    for gen in 0..=max_generations {
        if gen > 0 {
            let mut next = Vec::new();
            for line in &lines {
                next.extend(advance(map, frame, region, line, opts, &mut count));
                if count > opts.budget {
                    exploded = true;
                    break;
                }
            }
            lines = next;
        }
        let mut ext = (f64::INFINITY, f64::NEG_INFINITY);
        for line in &lines {
            let start = cloud.points.len();
            for (i, p) in line.iter().enumerate() {
                let c = frame.point_coords(p);
                ext = (ext.0.min(c[1]), ext.1.max(c[1]));
                cloud.points.push(StatePoint::from_vector(p, Chart::ReturnSection));
                cloud.generations.push(gen);
                cloud.frame_coords.push(c);
                if i > 0 {
                    cloud.segments.push((start + i - 1, start + i));
                }
            }
        }
        cloud.generation = gen;
        cloud.y_extent = (cloud.y_extent.0.min(ext.0), cloud.y_extent.1.max(ext.1));
        cloud.extent_history.push(ext);
        if cloud.y_extent.1 >= threshold || cloud.y_extent.0 <= -threshold {
            cloud.reached = true;
            break;
        }
        if exploded || lines.is_empty() || cloud.points.len() > opts.budget {
            exploded |= cloud.points.len() > opts.budget;
            break;
        }
    }
    Ok(GrowthRun { cloud, exploded })
}

/// As [`grow_unstable_set_run`], failing with `MeshExplosion` when the budget runs out.
pub fn grow_unstable_set<M: MapModel + ?Sized>(
    map: &M,
    frame: &ConeFrame,
    q: &StatePoint,
    plane: (&Vector3<f64>, &Vector3<f64>),
    seed_radius: f64,
    max_generations: usize,
    region: &Box3,
    opts: &GrowthOptions,
) -> Result<ManifoldCloud> {
    let run = grow_unstable_set_run(map, frame, q, plane, seed_radius, max_generations, region, opts)?;
    if run.exploded {
        return Err(Error::MeshExplosion(opts.budget));
    }
    Ok(run.cloud)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableDistance {
    /// Smallest `|Y − g(Z, W)|` over the cloud.
    pub min_distance: f64,
    /// `(Z, Y, W)` of the closest cloud point and its foot on the surface.
    pub pair: (Vector3<f64>, Vector3<f64>),
    /// A polyline segment changes side of the surface.
    pub sign_change: bool,
    /// Crossing point interpolated on the first sign-changing segment.
    pub crossing: Option<Vector3<f64>>,
}

impl StableDistance {
    pub fn is_evidence(&self, tol: f64) -> bool {
        self.sign_change || self.min_distance < tol
    }
}

/// Distance from the cloud to the surface `Y = g(Z, W)`.
pub fn stable_manifold_distance<G>(cloud: &ManifoldCloud, surface: G) -> Result<StableDistance>
where
    G: Fn(f64, f64) -> f64,
{
    if cloud.frame_coords.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let gap = |c: &Vector3<f64>| c[1] - surface(c[0], c[2]);
    let mut best = (f64::INFINITY, 0usize);
    for (i, c) in cloud.frame_coords.iter().enumerate() {
        let d = gap(c).abs();
        if d < best.0 {
            best = (d, i);
        }
    }
    let c = cloud.frame_coords[best.1];
    let foot = Vector3::new(c[0], surface(c[0], c[2]), c[2]);
    let mut crossing = None;
    for &(i, j) in &cloud.segments {
        let (a, b) = (cloud.frame_coords[i], cloud.frame_coords[j]);
        let (ga, gb) = (gap(&a), gap(&b));
        if ga * gb < 0.0 {
            crossing = Some(a + (b - a) * (ga / (ga - gb)));
            break;
        }
    }
    Ok(StableDistance { min_distance: best.0, pair: (c, foot), sign_change: crossing.is_some(), crossing })
}
