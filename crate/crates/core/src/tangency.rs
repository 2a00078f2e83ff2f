//! Tangency data of the global map: Taylor coefficients, the expanding
//! quantity 𝓔, splitting, quadratic-contact certificates, `E_k` and the
//! ω-windows.

use crate::error::{Error, Result};
use crate::map::{Chart, MapModel, StatePoint};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Half-width parameter of the bounded-away window.
pub const E_BD: f64 = 1.0 / 20.0;

/// Taylor data of `T₁` at `M⁻`:
/// `x̄ − x⁺ = A x̃ + b (ỹ − y⁻) + …`, `ȳ = μ + c·x̃ + d (ỹ − y⁻)² + …`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalMapCoefficients {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub d: f64,
    pub x_plus: [f64; 2],
    pub y_minus: f64,
    pub mu: f64,
}

impl GlobalMapCoefficients {
    pub fn b_norm(&self) -> f64 {
        self.b1.hypot(self.b2)
    }

    pub fn c_norm(&self) -> f64 {
        self.c1.hypot(self.c2)
    }

    /// `atan2(c₁, c₂)` in `[0, 2π)`, so that `c₁ cos θ + c₂ sin θ = |c| sin(θ + η*)`.
    pub fn eta_star(&self) -> f64 {
        self.c1.atan2(self.c2).rem_euclid(TAU)
    }
}

const ALIGN_TOL: f64 = 1e-8;

/// Read off the coefficients from the jet of `global` at `m_minus`.
pub fn extract_global_coefficients<G: MapModel + ?Sized>(global: &G, m_minus: &StatePoint, m_plus: &StatePoint) -> Result<GlobalMapCoefficients> {
    let p = m_minus.coords();
    let jet = global.jet(&p)?;
    let v = jet.value();
    let target = m_plus.coords();
    let miss = (v[0] - target[0]).abs().max((v[1] - target[1]).abs());
    if miss > 1e-10 * target.amax().max(1.0) {
        return Err(Error::InvalidInput(format!("global(M-) misses M+ by {miss:e}")));
    }
    let j = jet.linear();
    if j[(2, 2)].abs() > ALIGN_TOL {
        return Err(Error::NotAligned(j[(2, 2)]));
    }
    let c = GlobalMapCoefficients {
        a11: j[(0, 0)],
        a12: j[(0, 1)],
        a21: j[(1, 0)],
        a22: j[(1, 1)],
        b1: j[(0, 2)],
        b2: j[(1, 2)],
        c1: j[(2, 0)],
        c2: j[(2, 1)],
        d: jet.comp[2].coeff([0, 0, 2]),
        x_plus: [target[0], target[1]],
        y_minus: p[2],
        mu: v[2] - target[2],
    };
    if c.b_norm() == 0.0 || c.c_norm() == 0.0 {
        return Err(Error::DomainError("b or c vanishes".into()));
    }
    Ok(c)
}

/// 𝓔 = |b|·|c|.
pub fn expanding_quantity(c: &GlobalMapCoefficients) -> f64 {
    c.b_norm() * c.c_norm()
}

pub fn check_ec(c: &GlobalMapCoefficients) -> bool {
    expanding_quantity(c) > 1.0
}

/// `δ′ = (𝓔 − 1)/(6𝓔)`.
pub fn delta_prime(c: &GlobalMapCoefficients) -> f64 {
    let e = expanding_quantity(c);
    (e - 1.0) / (6.0 * e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangencyCertificate {
    pub t_star: f64,
    pub point: StatePoint,
    pub d_coeff: f64,
    /// `(g(t*), g′(t*))`.
    pub residuals: (f64, f64),
}

fn richardson(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    // f is a difference quotient with an O(h²) leading error
    (4.0 * f(h / 2.0) - f(h)) / 3.0
}

/// Find `t*` in the bracket where `g = curve(t)[coord]` has a double zero.
pub fn quadratic_tangency_find<C>(curve: C, coord: usize, bracket: (f64, f64)) -> Result<TangencyCertificate>
where
    C: Fn(f64) -> Vector3<f64>,
{
    let (a, b) = bracket;
    if coord > 2 || !(a < b) {
        return Err(Error::InvalidInput(format!("bad coordinate {coord} or bracket ({a}, {b})")));
    }
    let g = |t: f64| curve(t)[coord];
    let n = 200;
    let grid: Vec<(f64, f64)> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).map(|t| (t, g(t))).collect();
    if grid.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite("tangency curve"));
    }
    let scale = 1.0 + grid.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    let h = 1e-3 * (b - a);
    let d1 = |t: f64| richardson(|h| (g(t + h) - g(t - h)) / (2.0 * h), h);
    let d2 = |t: f64| richardson(|h| (g(t + h) - 2.0 * g(t) + g(t - h)) / (h * h), h);
    let mut t = grid.iter().min_by(|x, y| x.1.abs().total_cmp(&y.1.abs())).unwrap().0;
    for _ in 0..100 {
        let (gp, gpp) = (d1(t), d2(t));
        if gp == 0.0 || gpp == 0.0 {
            break;
        }
        let step = gp / gpp;
        t = (t - step).clamp(a, b);
        if step.abs() <= 1e-15 * (1.0 + t.abs()) {
            break;
        }
    }
    let (gv, gp) = (g(t), d1(t));
    let tol = 1e-8 * scale;
    if gv.abs() > tol || gp.abs() > tol {
        return Err(Error::NoTangency);
    }
    let d_coeff = 0.5 * d2(t);
    if d_coeff.abs() < 1e-6 * scale {
        return Err(Error::DegenerateContact(d_coeff));
    }
    Ok(TangencyCertificate {
        t_star: t,
        point: StatePoint::from_vector(&curve(t), Chart::ReturnSection),
        d_coeff,
        residuals: (gv, gp),
    })
}

/// Signed extremal height of the image of the unstable line through `m_minus`.
pub fn splitting_mu<G: MapModel + ?Sized>(global: &G, m_minus: &StatePoint) -> Result<f64> {
    let base = m_minus.coords();
    let mut t = 0.0;
    for _ in 0..50 {
        let jet = global.jet(&(base + Vector3::new(0.0, 0.0, t)))?;
        let g1 = jet.comp[2].coeff([0, 0, 1]);
        let g2 = 2.0 * jet.comp[2].coeff([0, 0, 2]);
        if g2.abs() < 1e-12 {
            return Err(Error::NotAligned(g1));
        }
        let step = g1 / g2;
        t -= step;
        if step.abs() <= 1e-15 * (1.0 + t.abs()) {
            break;
        }
    }
    let v = global.eval(&(base + Vector3::new(0.0, 0.0, t)))?;
    if !v[2].is_finite() {
        return Err(Error::NonFinite("splitting"));
    }
    Ok(v[2])
}

/// `E_k = −|b|(c₁ cos kω + c₂ sin kω)`.
pub fn e_k_quantity(c: &GlobalMapCoefficients, k: usize, omega: f64) -> f64 {
    let th = k as f64 * omega;
    -c.b_norm() * (c.c1 * th.cos() + c.c2 * th.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowKind {
    Bd,
    Ps,
    Ex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaWindow {
    pub kind: WindowKind,
    pub k: usize,
    pub eta_star: f64,
    pub e_bd: f64,
    pub delta_prime_half: f64,
}

impl OmegaWindow {
    pub fn new(kind: WindowKind, k: usize, c: &GlobalMapCoefficients) -> Self {
        Self { kind, k, eta_star: c.eta_star(), e_bd: E_BD, delta_prime_half: delta_prime(c) / 2.0 }
    }

    pub fn phase(&self, omega: f64) -> f64 {
        (self.k as f64 * omega + self.eta_star).sin()
    }
}

pub fn omega_window_contains(w: &OmegaWindow, omega: f64) -> bool {
    let s = w.phase(omega);
    match w.kind {
        WindowKind::Bd => s.abs() > 2.0 * w.e_bd,
        WindowKind::Ps => s < -2.0 * w.e_bd,
        WindowKind::Ex => s + 1.0 < w.delta_prime_half,
    }
}

/// The ω in `(0, π)` nearest `reference` with `kω + η* ≡ 3π/2`, the
/// common centre of all three windows.
pub fn window_center(k: usize, eta_star: f64, reference: f64) -> f64 {
    let kf = k as f64;
    let base = (1.5 * PI - eta_star).rem_euclid(TAU) / kf;
    let step = TAU / kf;
    let mut best = base;
    let mut w = base;
    while w < PI {
        if w > 0.0 && (w - reference).abs() < (best - reference).abs() {
            best = w;
        }
        w += step;
    }
    best
}
