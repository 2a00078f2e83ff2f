use super::{FixedPointResult, MultiplierSet, NewtonOptions};
use crate::error::{Error, Result, WindowName};
use crate::map::{Chart, MapModel, ParamTriple, StatePoint, Unfolding};
use crate::tangency::{e_k_quantity, extract_global_coefficients, omega_window_contains, GlobalMapCoefficients, OmegaWindow, WindowKind};
use nalgebra::{Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Distance of the repelling window's edge from `π/2`.
pub const PSI_BD: f64 = PI / 20.0;

const RESONANCE_GUARD: f64 = 1e-3;

/// `arccos(σ/2)` and whether it sits within the guard band of `π/2` or `2π/3`.
pub fn psi_of_trace(sigma: f64) -> Result<(f64, bool)> {
    if !(sigma.abs() < 2.0) {
        return Err(Error::DomainError(format!("|trace| = {} is not below 2", sigma.abs())));
    }
    let psi = (sigma / 2.0).acos();
    let flagged = [PI / 2.0, 2.0 * PI / 3.0].iter().any(|r| (psi - r).abs() < RESONANCE_GUARD);
    Ok((psi, flagged))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocusOptions {
    pub newton: NewtonOptions,
    /// Target for `|log|ν₁ν₂||`.
    pub product_tol: f64,
    pub max_outer: usize,
}

impl Default for LocusOptions {
    fn default() -> Self {
        Self { newton: NewtonOptions::default(), product_tol: 1e-12, max_outer: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsLocusPoint {
    pub k: usize,
    pub t: f64,
    /// Solved `(μ, ω, ρ)`.
    pub params: ParamTriple,
    pub fixed_point: FixedPointResult,
    pub mults: MultiplierSet,
    pub e_k: f64,
    /// Section coordinate `Y_Q = (E_k/2d) λᵏ t` imposed on the fixed point.
    pub y_target: f64,
    pub outer_iterations: usize,
}

impl NsLocusPoint {
    pub fn rho(&self) -> f64 {
        self.params.rho
    }
}

pub(crate) fn family_coefficients<U: Unfolding>(family: &U, omega: f64, rho: f64) -> Result<GlobalMapCoefficients> {
    let e = ParamTriple { mu: 0.0, omega, rho };
    let g = family.global(&e);
    let m_minus = family.m_minus();
    let m_plus = g.eval(&m_minus)?;
    extract_global_coefficients(
        &g,
        &StatePoint::from_vector(&m_minus, Chart::GlobalNeighborhood),
        &StatePoint::from_vector(&m_plus, Chart::ReturnSection),
    )
}

struct Placement {
    p: Vector3<f64>,
    mu: f64,
    residual: f64,
    iterations: usize,
}

/// Newton on `(x, μ)` for `T_k(x) = x`, `Y(x) = y_target` at fixed `(ω, ρ)`.
fn solve_placement<U: Unfolding>(family: &U, k: usize, omega: f64, rho: f64, y_target: f64, p0: Vector3<f64>, mu0: f64, opts: &NewtonOptions) -> Result<Placement> {
    let eval = |p: &Vector3<f64>, mu: f64| -> Result<Vector4<f64>> {
        let spec = family.first_return(k, &ParamTriple { mu, omega, rho })?;
        let f = spec.eval(p)? - p;
        Ok(Vector4::new(f[0], f[1], f[2], spec.section_y(p)? - y_target))
    };
    let (mut p, mut mu) = (p0, mu0);
    let mut f = eval(&p, mu)?;
    let mut r = f.amax();
    for it in 0..=opts.max_iter {
        if r <= opts.tol {
            return Ok(Placement { p, mu, residual: r, iterations: it });
        }
        if it == opts.max_iter {
            break;
        }
        let spec = family.first_return(k, &ParamTriple { mu, omega, rho })?;
        let j = spec.jacobian(&p)?;
        let gy = spec.section_y_gradient(&p)?;
        let hmu = 1e-6 * mu.abs().max(1e-3);
        let tp = family.first_return(k, &ParamTriple { mu: mu + hmu, omega, rho })?.eval(&p)?;
        let tm = family.first_return(k, &ParamTriple { mu: mu - hmu, omega, rho })?.eval(&p)?;
        let dmu = (tp - tm) / (2.0 * hmu);
        let mut a = Matrix4::zeros();
        for i in 0..3 {
            for c in 0..3 {
                a[(i, c)] = j[(i, c)] - if i == c { 1.0 } else { 0.0 };
            }
            a[(i, 3)] = dmu[i];
            a[(3, i)] = gy[i];
        }
        let step = a.lu().solve(&(-f)).ok_or(Error::SingularJacobian(f64::INFINITY))?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let tp = p + Vector3::new(step[0], step[1], step[2]) * alpha;
            let tmu = mu + step[3] * alpha;
            if let Ok(ft) = eval(&tp, tmu) {
                let rt = ft.amax();
                if rt < r || rt <= opts.tol {
                    (p, mu, f, r) = (tp, tmu, ft, rt);
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            if r <= 1e3 * opts.tol {
                // stalled at the rounding floor
                return Ok(Placement { p, mu, residual: r, iterations: it });
            }
            return Err(Error::NoConvergence(it + 1));
        }
    }
    Err(Error::NoConvergence(opts.max_iter))
}

/// Solve the NS conditions without window or resonance checks.
///
/// Outer secant on ρ for `|ν₁ν₂| = 1`; inner Newton places the fixed point.
pub fn locus_point<U: Unfolding>(family: &U, k: usize, t: f64, omega: f64, opts: &LocusOptions) -> Result<NsLocusPoint> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let coeffs = family_coefficients(family, omega, 0.0)?;
    let e_k = e_k_quantity(&coeffs, k, omega);
    let kf = k as f64;
    let lam_k = |rho: f64| -> Result<f64> {
        Ok(family.lambda_mod(&ParamTriple { mu: 0.0, omega, rho })?.powi(k as i32))
    };
    let target = |rho: f64| -> Result<f64> { Ok(e_k / (2.0 * coeffs.d) * lam_k(rho)? * t) };

    // starting point on the section with the requested height
    let spec0 = family.first_return(k, &ParamTriple { mu: 0.0, omega, rho: 0.0 })?;
    let m_plus = spec0.m_plus();
    let start = |rho: f64| -> Result<Vector3<f64>> {
        let spec = family.first_return(k, &ParamTriple { mu: 0.0, omega, rho })?;
        let g = spec.section_y_gradient(&m_plus)?;
        let y = spec.section_y(&m_plus)?;
        Ok(m_plus + g * ((target(rho)? - y) / g.norm_squared()))
    };

    let mut state: Option<(Vector3<f64>, f64)> = None;
    let mut solve = |rho: f64| -> Result<(Placement, MultiplierSet, f64)> {
        let (p0, mu0) = match state {
            Some(s) => s,
            None => (start(rho)?, 0.0),
        };
        let pl = solve_placement(family, k, omega, rho, target(rho)?, p0, mu0, &opts.newton)?;
        state = Some((pl.p, pl.mu));
        let spec = family.first_return(k, &ParamTriple { mu: pl.mu, omega, rho })?;
        let m = MultiplierSet::from_matrix(&spec.jacobian(&pl.p)?)?;
        let r = m.pair_product().ln();
        if !r.is_finite() {
            return Err(Error::NonFinite("multiplier product"));
        }
        Ok((pl, m, r))
    };

    let mut rho0 = if e_k > 0.0 { -e_k.ln() / kf } else { 0.0 };
    let (mut pl0, mut m0, mut r0) = solve(rho0)?;
    let mut rho1 = rho0 - r0 / kf;
    for outer in 0..opts.max_outer {
        let (pl1, m1, r1) = solve(rho1)?;
        if r1.abs() <= opts.product_tol {
            let point = StatePoint::from_vector(&pl1.p, Chart::ReturnSection);
            return Ok(NsLocusPoint {
                k,
                t,
                params: ParamTriple { mu: pl1.mu, omega, rho: rho1 },
                fixed_point: FixedPointResult { point, residual: pl1.residual, newton_iterations: pl1.iterations },
                mults: m1,
                e_k,
                y_target: target(rho1)?,
                outer_iterations: outer + 1,
            });
        }
        let slope = if r1 != r0 && rho1 != rho0 { (r1 - r0) / (rho1 - rho0) } else { kf };
        let slope = if slope.is_finite() && slope.abs() > 1e-3 * kf { slope } else { kf };
        let next = rho1 - r1 / slope;
        (rho0, pl0, m0, r0) = (rho1, pl1, m1, r1);
        rho1 = next;
    }
    let _ = (pl0, m0);
    Err(Error::NoConvergence(opts.max_outer))
}

/// NS fixed point of `T_k` at trace parameter `t`, with the ω-window and
/// resonance guards of the public contract.
pub fn ns_locus_solve<U: Unfolding>(family: &U, k: usize, t: f64, omega: f64, opts: &LocusOptions) -> Result<NsLocusPoint> {
    if k % 2 != 0 {
        return Err(Error::InvalidInput(format!("k = {k} must be even")));
    }
    let coeffs = family_coefficients(family, omega, 0.0)?;
    if !omega_window_contains(&OmegaWindow::new(WindowKind::Ps, k, &coeffs), omega) {
        return Err(Error::WindowViolation { window: WindowName::Ps, omega });
    }
    let sol = locus_point(family, k, t, omega, opts).map_err(|e| match e {
        Error::NoConvergence(_) | Error::SingularJacobian(_) | Error::LeftChart(_) | Error::NotInSection => {
            Error::NoFixedPoint(e.to_string())
        }
        other => other,
    })?;
    if sol.mults.is_complex_pair() {
        let (psi, flagged) = psi_of_trace(sol.mults.pair_trace())?;
        if flagged {
            let resonance = if (psi - PI / 2.0).abs() < RESONANCE_GUARD { PI / 2.0 } else { 2.0 * PI / 3.0 };
            return Err(Error::ResonanceGuard { psi, resonance });
        }
    }
    Ok(sol)
}

fn sigma_at<U: Unfolding>(family: &U, k: usize, t: f64, omega: f64, opts: &LocusOptions) -> Option<f64> {
    locus_point(family, k, t, omega, opts).ok().map(|s| s.mults.pair_trace())
}

/// Bisection for `Σ(t) = level` inside `[lo, hi]` with `Σ(lo) < level ≤ Σ(hi)`
/// (or the reverse).
fn bisect_level<U: Unfolding>(family: &U, k: usize, omega: f64, level: f64, mut lo: f64, mut hi: f64, opts: &LocusOptions) -> Result<f64> {
    let s_lo = sigma_at(family, k, lo, omega, opts).ok_or(Error::NotBracketed(level))?;
    let increasing = s_lo < level;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let s = sigma_at(family, k, mid, omega, opts).ok_or(Error::NotBracketed(level))?;
        if (s < level) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Scan outward from `t = 0` for the first crossing of `level`, then bisect.
fn crossing<U: Unfolding>(family: &U, k: usize, omega: f64, level: f64, t_max: f64, opts: &LocusOptions) -> Result<f64> {
    let s0 = sigma_at(family, k, 0.0, omega, opts).ok_or(Error::NotBracketed(level))?;
    let mut best: Option<f64> = None;
    for dir in [1.0, -1.0] {
        let mut prev = (0.0, s0);
        let mut t = 1e-3;
        while t <= t_max {
            let Some(s) = sigma_at(family, k, dir * t, omega, opts) else { break };
            if (prev.1 - level) * (s - level) <= 0.0 {
                let root = bisect_level(family, k, omega, level, prev.0, dir * t, opts)?;
                if best.map_or(true, |b: f64| root.abs() < b.abs()) {
                    best = Some(root);
                }
                break;
            }
            prev = (dir * t, s);
            t *= 1.5;
        }
    }
    best.ok_or(Error::NotBracketed(level))
}

fn scan_limit<U: Unfolding>(family: &U, k: usize, omega: f64) -> Result<f64> {
    let coeffs = family_coefficients(family, omega, 0.0)?;
    let e_k = e_k_quantity(&coeffs, k, omega);
    let lam = family.lambda_mod(&ParamTriple { mu: 0.0, omega, rho: 0.0 })?;
    Ok(4.0 * (2.0 * (2.0 * coeffs.d / e_k).abs() * lam.powi(-(k as i32))).max(1.0))
}

/// `(t⁻, t⁺)` with `Σ(t⁻) = −2` and `Σ(t⁺) = +2` on the NS locus.
pub fn trace_interval<U: Unfolding>(family: &U, k: usize, omega: f64, opts: &LocusOptions) -> Result<(f64, f64)> {
    let t_max = scan_limit(family, k, omega)?;
    let t_plus = crossing(family, k, omega, 2.0, t_max, opts)?;
    let t_minus = crossing(family, k, omega, -2.0, t_max, opts)?;
    Ok((t_minus, t_plus))
}

/// The part of the trace interval where `ψ ∈ (0, π/2 − ψ_bd)`:
/// `(t⁺⁰, t⁺)` with `Σ(t⁺⁰) = 2 sin ψ_bd`.
pub fn repelling_window<U: Unfolding>(family: &U, k: usize, omega: f64, opts: &LocusOptions) -> Result<(f64, f64)> {
    let t_max = scan_limit(family, k, omega)?;
    let t_plus = crossing(family, k, omega, 2.0, t_max, opts)?;
    let t0 = crossing(family, k, omega, 2.0 * PSI_BD.sin(), t_max, opts)?;
    Ok((t0.min(t_plus), t0.max(t_plus)))
}
