//! Center-manifold reduction at a Neimark–Sacker fixed point and the first
//! Lyapunov coefficient.
//!
//! Pipeline: [`center_basis`] → [`center_jet`] → [`center_manifold_quadratic`]
//! → [`planar_restriction`] → [`complex_coefficients`] → [`lyapunov_coefficient`].

use crate::eigen::{eigenvalues3, eigenvector, PAIRING_TOL};
use crate::error::{Error, Result};
use crate::fixed_point::MultiplierSet;
use crate::map::{MapModel, StatePoint};
use crate::poly::{ComplexPoly, Jet3, Poly3};
use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Exponents `(p, q)` of `uᵖvᵠ` (or `zᵖz̄ᵠ`) carried by the planar maps.
pub const PLANAR_MONOMIALS: [(u8, u8); 7] = [(2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

pub const RESONANCE_GUARD: f64 = 1e-3;
pub const DEGENERATE_LC: f64 = 1e-8;
const UNIT_CIRCLE_TOL: f64 = 1e-8;

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterBasis {
    /// Columns `(Re v, −Im v, e₃)`; in these coordinates `J = R(ψ) ⊕ ν₃`.
    pub basis: Matrix3<f64>,
    pub psi: f64,
    pub nu3: Complex64,
    /// `||ν₁| − 1|`, removed by projecting ν₁ onto the unit circle.
    pub projection: f64,
}

/// Basis bringing `j` to block-diagonal `R(ψ) ⊕ ν₃`.
pub fn center_basis(j: &Matrix3<f64>) -> Result<CenterBasis> {
    let [nu1, _, nu3] = eigenvalues3(j)?;
    if nu1.im <= PAIRING_TOL {
        return Err(Error::SpectrumMismatch("no complex multiplier pair".into()));
    }
    let projection = (nu1.norm() - 1.0).abs();
    if projection > UNIT_CIRCLE_TOL {
        return Err(Error::SpectrumMismatch(format!("|nu1| - 1 = {:e}", nu1.norm() - 1.0)));
    }
    if !(nu3.norm() < 1.0) {
        return Err(Error::SpectrumMismatch(format!("|nu3| = {} is not below 1", nu3.norm())));
    }
    let v = eigenvector(j, nu1)?;
    let a = v.map(|z| z.re);
    let b = v.map(|z| z.im);
    let th = 0.5 * (-2.0 * a.dot(&b)).atan2(a.norm_squared() - b.norm_squared());
    let (s, c) = th.sin_cos();
    let (a, b) = (a * c - b * s, a * s + b * c);
    let scale = a.norm().max(b.norm());
    let e3 = eigenvector(j, nu3)?.map(|z| z.re);
    let p = Matrix3::from_columns(&[a / scale, -b / scale, e3]);
    let pinv = p.try_inverse().ok_or_else(|| Error::SpectrumMismatch("degenerate eigenbasis".into()))?;
    let psi = nu1.arg();
    let (sp, cp) = psi.sin_cos();
    let target = Matrix3::new(cp, -sp, 0.0, sp, cp, 0.0, 0.0, 0.0, nu3.re);
    let err = (pinv * j * p - target).amax();
    let tol = 1e-8 * j.amax().max(1.0);
    if !(err <= tol) {
        return Err(Error::SpectrumMismatch(format!("block-diagonal residual {err:e}")));
    }
    Ok(CenterBasis { basis: p, psi, nu3, projection })
}

/// Jet of `ξ ↦ P⁻¹(T(fp + Pξ) − fp)` with the linear part set to exactly `R(ψ) ⊕ ν₃`.
pub fn center_jet<M: MapModel + ?Sized>(map: &M, fp: &StatePoint, cb: &CenterBasis) -> Result<Jet3> {
    let pinv = cb.basis.try_inverse().ok_or_else(|| Error::SpectrumMismatch("singular basis".into()))?;
    let jet = map.jet(&fp.coords())?.with_value(&Vector3::zeros()).in_basis(&cb.basis).map_output(&pinv);
    Ok(with_linear_part(&jet, cb.psi, cb.nu3.re))
}

fn with_linear_part(jet: &Jet3, psi: f64, nu3: f64) -> Jet3 {
    let (s, c) = psi.sin_cos();
    let l = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, nu3);
    let mut out = *jet;
    for i in 0..3 {
        for k in 0..3 {
            out.comp[i].c[1 + k] = l[(i, k)];
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterManifoldQuad {
    pub w20: f64,
    pub w11: f64,
    pub w02: f64,
    /// Largest order-2 coefficient of `w(F₁, F₂) − F₃(u, v, w(u, v))`, relative.
    pub residual: f64,
}

impl CenterManifoldQuad {
    pub fn zero() -> Self {
        Self { w20: 0.0, w11: 0.0, w02: 0.0, residual: 0.0 }
    }

    pub fn poly(&self) -> Poly3 {
        let mut h = Poly3::zero();
        h.set([2, 0, 0], self.w20);
        h.set([1, 1, 0], self.w11);
        h.set([0, 2, 0], self.w02);
        h
    }
}

fn linear_data(jet: &Jet3) -> (f64, f64, f64) {
    let l = jet.linear();
    (l[(0, 0)], l[(1, 0)], l[(2, 2)])
}

/// Order-2 graph `w = w₂₀u² + w₁₁uv + w₀₂v²` of the center manifold of a
/// jet whose linear part is `R(ψ) ⊕ ν₃`.
pub fn center_manifold_quadratic(jet: &Jet3) -> Result<CenterManifoldQuad> {
    let (c, s, nu3) = linear_data(jet);
    if !(nu3.abs() < 1.0 - 1e-6) {
        return Err(Error::SingularHomological(nu3));
    }
    let m = Matrix3::new(
        c * c - nu3,
        c * s,
        s * s,
        -2.0 * c * s,
        c * c - s * s - nu3,
        2.0 * c * s,
        s * s,
        -c * s,
        c * c - nu3,
    );
    let f3 = &jet.comp[2];
    let q = Vector3::new(f3.coeff([2, 0, 0]), f3.coeff([1, 1, 0]), f3.coeff([0, 2, 0]));
    let w = m.lu().solve(&q).ok_or(Error::SingularHomological(nu3))?;
    if !w.iter().all(|x| x.is_finite()) {
        return Err(Error::SingularHomological(nu3));
    }
    let mut quad = CenterManifoldQuad { w20: w[0], w11: w[1], w02: w[2], residual: 0.0 };
    quad.residual = invariance_residual(jet, &quad);
    Ok(quad)
}

fn invariance_residual(jet: &Jet3, quad: &CenterManifoldQuad) -> f64 {
    let h = quad.poly();
    let u = Poly3::var(0);
    let v = Poly3::var(1);
    let lhs = h.compose(&[jet.comp[0], jet.comp[1], Poly3::zero()]);
    let rhs = jet.comp[2].compose(&[u, v, h]);
    let diff = (lhs - rhs).homogeneous(2);
    let scale = jet.comp[2].homogeneous(2).max_abs().max(1.0);
    diff.max_abs() / scale
}

/// `(ū, v̄) = R(ψ)(u, v) + Σ (ū^{(pq)}, v̄^{(pq)}) uᵖvᵠ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarTaylorMap {
    pub psi: f64,
    pub coeffs_u: [f64; 7],
    pub coeffs_v: [f64; 7],
}

impl PlanarTaylorMap {
    pub fn rotation(psi: f64) -> Self {
        Self { psi, coeffs_u: [0.0; 7], coeffs_v: [0.0; 7] }
    }

    pub fn coeff(&self, p: u8, q: u8) -> (f64, f64) {
        let i = PLANAR_MONOMIALS.iter().position(|m| *m == (p, q)).expect("planar monomial");
        (self.coeffs_u[i], self.coeffs_v[i])
    }

    pub fn eval(&self, u: f64, v: f64) -> (f64, f64) {
        let (s, c) = self.psi.sin_cos();
        let mut x = c * u - s * v;
        let mut y = s * u + c * v;
        for (i, &(p, q)) in PLANAR_MONOMIALS.iter().enumerate() {
            let m = u.powi(p as i32) * v.powi(q as i32);
            x += self.coeffs_u[i] * m;
            y += self.coeffs_v[i] * m;
        }
        (x, y)
    }

    pub fn jacobian(&self, u: f64, v: f64) -> Matrix2<f64> {
        let (s, c) = self.psi.sin_cos();
        let mut j = Matrix2::new(c, -s, s, c);
        for (i, &(p, q)) in PLANAR_MONOMIALS.iter().enumerate() {
            let du = if p > 0 { p as f64 * u.powi(p as i32 - 1) * v.powi(q as i32) } else { 0.0 };
            let dv = if q > 0 { q as f64 * u.powi(p as i32) * v.powi(q as i32 - 1) } else { 0.0 };
            j[(0, 0)] += self.coeffs_u[i] * du;
            j[(0, 1)] += self.coeffs_u[i] * dv;
            j[(1, 0)] += self.coeffs_v[i] * du;
            j[(1, 1)] += self.coeffs_v[i] * dv;
        }
        j
    }

    /// Coordinates scaled by `κ`: quadratic terms divide by `κ`, cubic by `κ²`.
    pub fn scaled(&self, kappa: f64) -> Self {
        let mut out = *self;
        for i in 0..7 {
            let d = if i < 3 { kappa } else { kappa * kappa };
            out.coeffs_u[i] /= d;
            out.coeffs_v[i] /= d;
        }
        out
    }

    /// `max(max|quadratic|, √max|cubic|)`; scaling by it makes both at most 1.
    pub fn natural_scale(&self) -> f64 {
        let q = (0..3).fold(0.0f64, |m, i| m.max(self.coeffs_u[i].abs()).max(self.coeffs_v[i].abs()));
        let c = (3..7).fold(0.0f64, |m, i| m.max(self.coeffs_u[i].abs()).max(self.coeffs_v[i].abs()));
        q.max(c.sqrt())
    }
}

/// Restrict the jet to the graph `w = h(u, v)` and keep terms through order 3.
pub fn planar_restriction(jet: &Jet3, quad: &CenterManifoldQuad) -> PlanarTaylorMap {
    let (c, s, _) = linear_data(jet);
    let subs = [Poly3::var(0), Poly3::var(1), quad.poly()];
    let g0 = jet.comp[0].compose(&subs);
    let g1 = jet.comp[1].compose(&subs);
    let mut out = PlanarTaylorMap::rotation(s.atan2(c));
    for (i, &(p, q)) in PLANAR_MONOMIALS.iter().enumerate() {
        out.coeffs_u[i] = g0.coeff([p, q, 0]);
        out.coeffs_v[i] = g1.coeff([p, q, 0]);
    }
    out
}

/// `z̃ = νz + Σ z̃^{(pq)} zᵖz̄ᵠ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexTaylorMap {
    pub nu: Complex64,
    pub z_coeffs: [Complex64; 7],
}

impl ComplexTaylorMap {
    pub fn new(psi: f64) -> Self {
        Self { nu: Complex64::from_polar(1.0, psi), z_coeffs: [c0(); 7] }
    }

    pub fn coeff(&self, p: u8, q: u8) -> Complex64 {
        let i = PLANAR_MONOMIALS.iter().position(|m| *m == (p, q)).expect("planar monomial");
        self.z_coeffs[i]
    }

    pub fn set(&mut self, p: u8, q: u8, v: Complex64) {
        let i = PLANAR_MONOMIALS.iter().position(|m| *m == (p, q)).expect("planar monomial");
        self.z_coeffs[i] = v;
    }

    pub fn psi(&self) -> f64 {
        self.nu.arg()
    }

    pub fn to_poly(&self) -> ComplexPoly {
        let mut out = ComplexPoly::zero();
        out.set(1, 0, self.nu);
        for (i, &(p, q)) in PLANAR_MONOMIALS.iter().enumerate() {
            out.set(p, q, self.z_coeffs[i]);
        }
        out
    }
}

/// Rewrite the planar map in `z = u + iv`.
pub fn complex_coefficients(planar: &PlanarTaylorMap) -> ComplexTaylorMap {
    let half = Complex64::new(0.5, 0.0);
    let u = (ComplexPoly::z() + ComplexPoly::zbar()).scale(half);
    let v = (ComplexPoly::z() - ComplexPoly::zbar()).scale(Complex64::new(0.0, -0.5));
    let mut total = ComplexPoly::zero();
    for (i, &(p, q)) in PLANAR_MONOMIALS.iter().enumerate() {
        let mut m = ComplexPoly::constant(Complex64::new(1.0, 0.0));
        for _ in 0..p {
            m = m * u;
        }
        for _ in 0..q {
            m = m * v;
        }
        total = total + m.scale(Complex64::new(planar.coeffs_u[i], planar.coeffs_v[i]));
    }
    let mut out = ComplexTaylorMap::new(planar.psi);
    for (i, &(p, q)) in PLANAR_MONOMIALS.iter().enumerate() {
        out.z_coeffs[i] = total.coeff(p, q);
    }
    out
}

/// Inverse of [`complex_coefficients`]: `ū = Re z̃`, `v̄ = Im z̃` as polynomials in `(u, v)`.
pub fn planar_from_complex(cmap: &ComplexTaylorMap) -> PlanarTaylorMap {
    // z = u + iv and z̄ = u − iv as pairs of real polynomials
    let (u, v) = (Poly3::var(0), Poly3::var(1));
    let z = (u, v);
    let zb = (u, -v);
    let mul = |a: (Poly3, Poly3), b: (Poly3, Poly3)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
    let mut out = PlanarTaylorMap::rotation(cmap.psi());
    let mut re = Poly3::zero();
    let mut im = Poly3::zero();
    for (i, &(p, q)) in PLANAR_MONOMIALS.iter().enumerate() {
        let mut m = (Poly3::constant(1.0), Poly3::zero());
        for _ in 0..p {
            m = mul(m, z);
        }
        for _ in 0..q {
            m = mul(m, zb);
        }
        let c = cmap.z_coeffs[i];
        re = re + m.0.scale(c.re) - m.1.scale(c.im);
        im = im + m.0.scale(c.im) + m.1.scale(c.re);
    }
    for (i, &(p, q)) in PLANAR_MONOMIALS.iter().enumerate() {
        out.coeffs_u[i] = re.coeff([p, q, 0]);
        out.coeffs_v[i] = im.coeff([p, q, 0]);
    }
    out
}

fn guard(psi: f64) -> Result<()> {
    for r in [PI / 2.0, 2.0 * PI / 3.0] {
        if (psi.abs() - r).abs() < RESONANCE_GUARD {
            return Err(Error::ResonanceGuard { psi, resonance: r });
        }
    }
    for r in [0.0, PI] {
        if (psi.abs() - r).abs() < RESONANCE_GUARD {
            return Err(Error::ResonanceGuard { psi, resonance: r });
        }
    }
    Ok(())
}

/// The four summands of `α`: `z̃²¹`, the `z̃²⁰z̃¹¹`, `|z̃¹¹|²` and `|z̃⁰²|²` terms.
pub fn alpha_terms(cmap: &ComplexTaylorMap) -> Result<[Complex64; 4]> {
    guard(cmap.psi())?;
    let nu = cmap.nu / cmap.nu.norm();
    let nb = nu.conj();
    let one = Complex64::new(1.0, 0.0);
    let (z20, z11, z02, z21) = (cmap.coeff(2, 0), cmap.coeff(1, 1), cmap.coeff(0, 2), cmap.coeff(2, 1));
    Ok([
        z21,
        z20 * z11 * (nb - 3.0 + 2.0 * nu) / ((nu * nu - nu) * (nb - one)),
        Complex64::new(z11.norm_sqr(), 0.0) / (one - nb),
        Complex64::new(2.0 * z02.norm_sqr(), 0.0) / (nu * nu - nb),
    ])
}

/// `α`, the `z²z̄` coefficient after the quadratic terms are removed.
pub fn kill_quadratic(cmap: &ComplexTaylorMap) -> Result<Complex64> {
    Ok(alpha_terms(cmap)?.iter().sum())
}

/// `LC = −Re(ν̄α)`.
pub fn lyapunov_coefficient(cmap: &ComplexTaylorMap) -> Result<f64> {
    let nu = cmap.nu / cmap.nu.norm();
    Ok(-(nu.conj() * kill_quadratic(cmap)?).re)
}

/// `Σ|Re(ν̄·termᵢ)| / |LC|`: amplification of relative coefficient errors.
pub fn lc_condition(cmap: &ComplexTaylorMap) -> Result<f64> {
    let nb = (cmap.nu / cmap.nu.norm()).conj();
    let terms = alpha_terms(cmap)?;
    let sum: f64 = terms.iter().map(|t| (nb * t).re.abs()).sum();
    let lc = -(nb * terms.iter().sum::<Complex64>()).re;
    Ok(if lc == 0.0 { f64::INFINITY } else { sum / lc.abs() })
}

/// `𝓛(ψ) = 4 cos ψ (1 + cos ψ) / ((cos ψ − 1)(1 + 2 cos ψ)²)`.
pub fn reference_curve(psi: f64) -> Result<f64> {
    if !(psi > 0.0 && psi < PI) {
        return Err(Error::DomainError(format!("psi = {psi} not in (0, pi)")));
    }
    let c = psi.cos();
    let den = (c - 1.0) * (1.0 + 2.0 * c).powi(2);
    if den.abs() < 1e-14 {
        return Err(Error::DomainError("pole at 2pi/3".into()));
    }
    Ok(4.0 * c * (1.0 + c) / den)
}

/// Series inverse of a near-identity polynomial, truncated at order 3.
fn near_identity_inverse(phi: &ComplexPoly) -> ComplexPoly {
    let h = *phi - ComplexPoly::z();
    let mut g = ComplexPoly::z();
    for _ in 0..3 {
        g = ComplexPoly::z() - h.compose(&g);
    }
    g
}

/// Cubic normal form `N = Φ ∘ G ∘ Φ⁻¹ = νw + αw²w̄ + O(|w|⁴)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalForm {
    pub map: ComplexPoly,
    /// Near-identity coordinate change `w = Φ(z)`.
    pub phi: ComplexPoly,
    /// `z²z̄` coefficient obtained by composition.
    pub alpha: Complex64,
}

/// Remove quadratic and non-resonant cubic terms by explicit composition.
pub fn normal_form(cmap: &ComplexTaylorMap) -> Result<NormalForm> {
    guard(cmap.psi())?;
    let nu = cmap.nu / cmap.nu.norm();
    let mut g = cmap.to_poly();
    g.set(1, 0, nu);
    let nb = nu.conj();
    let denom = |p: u8, q: u8| nu - nu.powu(p as u32) * nb.powu(q as u32);

    let mut phi2 = ComplexPoly::z();
    for (p, q) in [(2, 0), (1, 1), (0, 2)] {
        phi2.set(p, q, g.coeff(p, q) / denom(p, q));
    }
    let n2 = phi2.compose(&g.compose(&near_identity_inverse(&phi2)));

    let mut phi3 = ComplexPoly::z();
    for (p, q) in [(3, 0), (1, 2), (0, 3)] {
        phi3.set(p, q, n2.coeff(p, q) / denom(p, q));
    }
    let phi = phi3.compose(&phi2);
    let n3 = phi.compose(&g.compose(&near_identity_inverse(&phi)));
    Ok(NormalForm { map: n3, phi, alpha: n2.coeff(2, 1) })
}

impl NormalForm {
    /// Exact inverse of `Φ` near the origin, by Newton on the Wirtinger derivatives.
    pub fn phi_inverse(&self, w: Complex64) -> Complex64 {
        let mut z = w;
        for _ in 0..50 {
            let r = self.phi.eval(z) - w;
            if r.norm() <= 1e-17 * (1.0 + w.norm()) {
                break;
            }
            let (a, b) = self.phi.wirtinger(z);
            // solve a δ + b δ̄ = −r
            let den = a.norm_sqr() - b.norm_sqr();
            let d = (-r * a.conj() + r.conj() * b) / den;
            z += d;
        }
        z
    }

    /// `|det D(Φ ∘ G ∘ Φ⁻¹)(w)|` with the untruncated planar map `g`.
    pub fn conjugated_det(&self, g: &ComplexPoly, w: Complex64) -> f64 {
        let z = self.phi_inverse(w);
        let y = g.eval(z);
        (self.phi.jacobian_det(y) * g.jacobian_det(z) / self.phi.jacobian_det(z)).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    WeaklyRepelling,
    WeaklyAttracting,
    Degenerate,
}

pub fn verdict_of(lc: f64) -> Verdict {
    if lc.abs() < DEGENERATE_LC {
        Verdict::Degenerate
    } else if lc < 0.0 {
        Verdict::WeaklyRepelling
    } else {
        Verdict::WeaklyAttracting
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NSReport {
    pub fixed_point: StatePoint,
    pub mults: MultiplierSet,
    pub psi: f64,
    /// LC of the planar restriction in coordinates scaled by `lc_scale`.
    pub lc: f64,
    pub lc_scale: f64,
    pub lc_condition: f64,
    pub verdict: Verdict,
    /// ψ within 1e−2 of π/2 or 2π/3 (outside the hard guard, but amplified).
    pub resonance_flag: bool,
    pub projection: f64,
    pub basis: Matrix3<f64>,
    pub quad: CenterManifoldQuad,
    /// Planar restriction in the scaled coordinates.
    pub planar: PlanarTaylorMap,
}

/// Full NS analysis of `map` at the fixed point `fp`.
pub fn ns_report<M: MapModel + ?Sized>(map: &M, fp: &StatePoint) -> Result<NSReport> {
    let j = map.jacobian(&fp.coords())?;
    let mults = MultiplierSet::from_matrix(&j)?;
    let cb = center_basis(&j)?;
    let jet = center_jet(map, fp, &cb)?;
    let quad = center_manifold_quadratic(&jet)?;
    let raw = planar_restriction(&jet, &quad);
    let kappa = raw.natural_scale();
    let planar = if kappa > 0.0 { raw.scaled(kappa) } else { raw };
    let cmap = complex_coefficients(&planar);
    let lc = lyapunov_coefficient(&cmap)?;
    let psi = cb.psi.abs();
    let resonance_flag = [PI / 2.0, 2.0 * PI / 3.0].iter().any(|r| (psi - r).abs() < 1e-2);
    Ok(NSReport {
        fixed_point: *fp,
        mults,
        psi,
        lc,
        lc_scale: if kappa > 0.0 { kappa } else { 1.0 },
        lc_condition: lc_condition(&cmap)?,
        verdict: verdict_of(lc),
        resonance_flag,
        projection: cb.projection,
        basis: cb.basis,
        quad,
        planar,
    })
}
