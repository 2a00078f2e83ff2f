//! Differentiable self-maps of a 3D chart, the toy focus-saddle model and
//! the first-return composition `T_k = T₁ ∘ T₀ᵏ`.

mod first_return;
mod toy;
mod unfolding;

pub use first_return::{first_return_eval, FirstReturnMap, FirstReturnSpec};
pub use toy::{
    eval_toy_global, eval_toy_local, ToyGlobal, ToyLocal, ToyModelConfig, ToyUnfolding,
    GLOBAL_CHART_HALF_WIDTH, LOCAL_CHART_RADIUS, LOCAL_CHART_Y_MAX, TOY_Y_MINUS,
};
pub use unfolding::{measure_unfolding, unfolding_jacobian, FrozenMu, Unfolding};

use crate::error::{finite, Error, Result};
use crate::poly::{Jet3, Poly3, MONOMIALS};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    LocalCylinder,
    GlobalNeighborhood,
    ReturnSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePoint {
    pub x1: f64,
    pub x2: f64,
    pub y: f64,
    pub chart: Chart,
}

impl StatePoint {
    pub fn new(x1: f64, x2: f64, y: f64, chart: Chart) -> Self {
        Self { x1, x2, y, chart }
    }

    pub fn from_vector(v: &Vector3<f64>, chart: Chart) -> Self {
        Self::new(v[0], v[1], v[2], chart)
    }

    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.x1, self.x2, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.y.is_finite()
    }
}

/// Unfolding parameters: splitting `mu`, stable rotation `omega`, `rho = log|λγ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamTriple {
    pub mu: f64,
    pub omega: f64,
    pub rho: f64,
}

impl ParamTriple {
    pub fn new(mu: f64, omega: f64, rho: f64) -> Result<Self> {
        if !(mu.is_finite() && omega.is_finite() && rho.is_finite()) {
            return Err(Error::NonFinite("parameter triple"));
        }
        if !(omega > 0.0 && omega < std::f64::consts::PI) {
            return Err(Error::DomainError(format!("omega = {omega} not in (0, π)")));
        }
        Ok(Self { mu, omega, rho })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.mu, self.omega, self.rho]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { mu: a[0], omega: a[1], rho: a[2] }
    }
}

/// Axis-aligned box in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Box3 {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Self {
        Self { lo, hi }
    }

    pub fn centered(c: &Vector3<f64>, half: [f64; 3]) -> Self {
        Self::new(
            [c[0] - half[0], c[1] - half[1], c[2] - half[2]],
            [c[0] + half[0], c[1] + half[1], c[2] + half[2]],
        )
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.lo[i] && p[i] <= self.hi[i])
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vector3<f64> {
        Vector3::from_fn(|i, _| rng.gen_range(self.lo[i]..=self.hi[i]))
    }
}

/// A differentiable self-map of a 3D chart.
///
/// `jet` returns the Taylor expansion through order 3; models without
/// analytic derivatives fall back to Richardson-extrapolated differences.
pub trait MapModel: Send + Sync {
    fn eval(&self, p: &Vector3<f64>) -> Result<Vector3<f64>>;

    fn jacobian(&self, p: &Vector3<f64>) -> Result<Matrix3<f64>> {
        richardson_jacobian(self, p, self.derivative_scale())
    }

    fn jet(&self, p: &Vector3<f64>) -> Result<Jet3> {
        fd_jet3(self, p, self.derivative_scale())
    }

    /// Length scale used to size finite-difference steps.
    fn derivative_scale(&self) -> f64 {
        1.0
    }

    /// Whether `p` lies in the chart where the map's formula is valid.
    fn in_domain(&self, _p: &Vector3<f64>) -> bool {
        true
    }
}

impl<M: MapModel + ?Sized> MapModel for &M {
    fn eval(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        (**self).eval(p)
    }
    fn jacobian(&self, p: &Vector3<f64>) -> Result<Matrix3<f64>> {
        (**self).jacobian(p)
    }
    fn jet(&self, p: &Vector3<f64>) -> Result<Jet3> {
        (**self).jet(p)
    }
    fn derivative_scale(&self) -> f64 {
        (**self).derivative_scale()
    }
    fn in_domain(&self, p: &Vector3<f64>) -> bool {
        (**self).in_domain(p)
    }
}

impl<M: MapModel + ?Sized> MapModel for Box<M> {
    fn eval(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        (**self).eval(p)
    }
    fn jacobian(&self, p: &Vector3<f64>) -> Result<Matrix3<f64>> {
        (**self).jacobian(p)
    }
    fn jet(&self, p: &Vector3<f64>) -> Result<Jet3> {
        (**self).jet(p)
    }
    fn derivative_scale(&self) -> f64 {
        (**self).derivative_scale()
    }
    fn in_domain(&self, p: &Vector3<f64>) -> bool {
        (**self).in_domain(p)
    }
}

/// Affine map `p ↦ A p + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
}

impl AffineMap {
    pub fn linear(a: Matrix3<f64>) -> Self {
        Self { a, b: Vector3::zeros() }
    }

    pub fn identity() -> Self {
        Self::linear(Matrix3::identity())
    }
}

impl MapModel for AffineMap {
    fn eval(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.a * p + self.b)
    }
    fn jacobian(&self, _p: &Vector3<f64>) -> Result<Matrix3<f64>> {
        Ok(self.a)
    }
    fn jet(&self, p: &Vector3<f64>) -> Result<Jet3> {
        Ok(Jet3::affine(&(self.a * p + self.b), &self.a))
    }
}

/// Map given by a polynomial jet about a fixed base point, exact through order 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialMap {
    pub base: Vector3<f64>,
    pub jet: Jet3,
}

impl MapModel for PolynomialMap {
    fn eval(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        let v = self.jet.eval(&(p - self.base));
        finite(&v, "polynomial map")?;
        Ok(v)
    }
    fn jet(&self, p: &Vector3<f64>) -> Result<Jet3> {
        let d = p - self.base;
        let shift = [
            Poly3::var(0) + Poly3::constant(d[0]),
            Poly3::var(1) + Poly3::constant(d[1]),
            Poly3::var(2) + Poly3::constant(d[2]),
        ];
        // composition with a shifted argument is exact for cubic polynomials
        let mut out = [Poly3::zero(); 3];
        for i in 0..3 {
            out[i] = shifted_compose(&self.jet.comp[i], &shift);
        }
        Ok(Jet3::new(out))
    }
    fn jacobian(&self, p: &Vector3<f64>) -> Result<Matrix3<f64>> {
        Ok(self.jet(p)?.linear())
    }
}

fn shifted_compose(f: &Poly3, subs: &[Poly3; 3]) -> Poly3 {
    let mut out = Poly3::zero();
    for (e, c) in MONOMIALS.iter().zip(f.c.iter()) {
        if *c == 0.0 {
            continue;
        }
        let mut term = Poly3::constant(*c);
        for i in 0..3 {
            for _ in 0..e[i] {
                term = term * subs[i];
            }
        }
        out = out + term;
    }
    out
}

/// User map given as a closure; derivatives by finite differences.
pub struct ClosureMap<F> {
    f: F,
    scale: f64,
}

impl<F> ClosureMap<F>
where
    F: Fn(&Vector3<f64>) -> Vector3<f64> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f, scale: 1.0 }
    }

    pub fn with_scale(f: F, scale: f64) -> Self {
        Self { f, scale }
    }
}

impl<F> MapModel for ClosureMap<F>
where
    F: Fn(&Vector3<f64>) -> Vector3<f64> + Send + Sync,
{
    fn eval(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        let v = (self.f)(p);
        finite(&v, "closure map")?;
        Ok(v)
    }
    fn derivative_scale(&self) -> f64 {
        self.scale
    }
}

/// Central-difference Jacobian with step `h`.
pub fn jacobian_fd<M: MapModel + ?Sized>(map: &M, p: &Vector3<f64>, h: f64) -> Result<Matrix3<f64>> {
    if !(h > 0.0) {
        return Err(Error::DomainError(format!("step h = {h} must be positive")));
    }
    let mut j = Matrix3::zeros();
    for c in 0..3 {
        let mut e = Vector3::zeros();
        e[c] = h;
        let fp = map.eval(&(p + e))?;
        let fm = map.eval(&(p - e))?;
        let col = (fp - fm) / (2.0 * h);
        finite(&col, "finite-difference Jacobian")?;
        j.set_column(c, &col);
    }
    Ok(j)
}

fn step(order: i32, scale: f64) -> f64 {
    // optimal for a fourth-order (Richardson) difference of the given order
    f64::EPSILON.powf(1.0 / (order as f64 + 4.0)) * scale
}

/// Jacobian by Richardson extrapolation of central differences.
pub fn richardson_jacobian<M: MapModel + ?Sized>(map: &M, p: &Vector3<f64>, scale: f64) -> Result<Matrix3<f64>> {
    let h = step(1, scale);
    let a = jacobian_fd(map, p, h)?;
    let b = jacobian_fd(map, p, h / 2.0)?;
    Ok((b * 4.0 - a) / 3.0)
}

/// Third-order jet by Richardson-extrapolated central differences.
///
/// Each derivative is estimated with steps `h` and `h/2` and combined to
/// cancel the `h²` error term; the step grows with the derivative order.
pub fn fd_jet3<M: MapModel + ?Sized>(map: &M, p: &Vector3<f64>, scale: f64) -> Result<Jet3> {
    let f0 = map.eval(p)?;
    let mut comp = [Poly3::zero(); 3];
    for i in 0..3 {
        comp[i].c[0] = f0[i];
    }
    for (idx, e) in MONOMIALS.iter().enumerate().skip(1) {
        let order = (e[0] + e[1] + e[2]) as i32;
        let h = step(order, scale);
        let d1 = mixed_difference(map, p, *e, h)?;
        let d2 = mixed_difference(map, p, *e, h / 2.0)?;
        let d = (d2 * 4.0 - d1) / 3.0;
        let fact: f64 = e.iter().map(|&k| (1..=k as u32).product::<u32>() as f64).product();
        for i in 0..3 {
            comp[i].c[idx] = d[i] / fact;
        }
    }
    Ok(Jet3::new(comp))
}

/// Central-difference estimate of the mixed partial with exponent `e`.
fn mixed_difference<M: MapModel + ?Sized>(map: &M, p: &Vector3<f64>, e: [u8; 3], h: f64) -> Result<Vector3<f64>> {
    // stencil weights of the one-dimensional central difference of order n
    fn stencil(n: u8) -> &'static [(f64, f64)] {
        match n {
            0 => &[(0.0, 1.0)],
            1 => &[(1.0, 0.5), (-1.0, -0.5)],
            2 => &[(1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)],
            _ => &[(2.0, 0.5), (1.0, -1.0), (-1.0, 1.0), (-2.0, -0.5)],
        }
    }
    let mut acc = Vector3::zeros();
    for &(s0, w0) in stencil(e[0]) {
        for &(s1, w1) in stencil(e[1]) {
            for &(s2, w2) in stencil(e[2]) {
                let q = p + Vector3::new(s0 * h, s1 * h, s2 * h);
                acc += map.eval(&q)? * (w0 * w1 * w2);
            }
        }
    }
    let order = (e[0] + e[1] + e[2]) as i32;
    let v = acc / h.powi(order);
    finite(&v, "finite-difference jet")?;
    Ok(v)
}
