//! The explicit focus-saddle toy diffeomorphism and its three-parameter unfolding.
//!
//! Local map on the cylinder around the saddle `O = 0`:
//! `(x, y) ↦ (λ R(ω) x, γ y)`; global map near `M⁻ = (0, 0, 2.5)`:
//! `(x₁, x₂, y) ↦ (2ε⁻¹t − 4ε⁻²t², −εx₂ + 2, μ + εx₁ + 4ε⁻²t²)` with `t = y − 2.5`.

use super::{Chart, MapModel, ParamTriple, StatePoint};
use crate::error::{Error, Result};
use crate::poly::{Jet3, Poly3};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const LOCAL_CHART_RADIUS: f64 = 3.0;
pub const LOCAL_CHART_Y_MAX: f64 = 3.0;
/// Upper end of the part of the cylinder where the local formula is used.
pub const LOCAL_INPUT_Y_MAX: f64 = 1.0;
pub const GLOBAL_CHART_HALF_WIDTH: f64 = 0.5;
pub const TOY_Y_MINUS: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyModelConfig {
    pub eps: f64,
    pub lambda: f64,
    pub omega: f64,
    pub gamma: f64,
    pub mu: f64,
}

impl Default for ToyModelConfig {
    fn default() -> Self {
        Self { eps: 0.2, lambda: 1.0 / 3.0, omega: PI / 6.0, gamma: 3.0, mu: 0.0 }
    }
}

impl ToyModelConfig {
    pub fn with_eps(eps: f64) -> Self {
        Self { eps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.eps, self.lambda, self.omega, self.gamma, self.mu];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("toy configuration"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0 / 3.0) {
            return Err(Error::DomainError(format!("eps = {} not in (0, 1/3)", self.eps)));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::DomainError(format!("lambda = {} not in (0, 1)", self.lambda)));
        }
        if !(self.lambda * self.gamma > 0.0) || self.gamma <= 1.0 {
            return Err(Error::DomainError(format!("gamma = {} must exceed 1", self.gamma)));
        }
        Ok(())
    }

    pub fn local(&self) -> ToyLocal {
        ToyLocal { lambda: self.lambda, omega: self.omega, gamma: self.gamma }
    }

    pub fn global(&self) -> ToyGlobal {
        ToyGlobal { eps: self.eps, mu: self.mu }
    }
}

/// `(x₁, x₂, y) ↦ (λ(x₁cos ω − x₂ sin ω), λ(x₁ sin ω + x₂ cos ω), γ y)`.
pub fn eval_toy_local(p: StatePoint, cfg: &ToyModelConfig) -> StatePoint {
    let v = cfg.local().apply(&p.coords());
    StatePoint::from_vector(&v, Chart::LocalCylinder)
}

/// The global map, with the splitting `μ` added to the `ȳ` equation.
pub fn eval_toy_global(p: StatePoint, cfg: &ToyModelConfig) -> StatePoint {
    let v = cfg.global().apply(&p.coords());
    StatePoint::from_vector(&v, Chart::ReturnSection)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyLocal {
    pub lambda: f64,
    pub omega: f64,
    pub gamma: f64,
}

impl ToyLocal {
    pub fn matrix(&self) -> Matrix3<f64> {
        let (s, c) = self.omega.sin_cos();
        let l = self.lambda;
        Matrix3::new(l * c, -l * s, 0.0, l * s, l * c, 0.0, 0.0, 0.0, self.gamma)
    }

    fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.matrix() * p
    }

    /// Inputs must lie in the lower cylinder where the linear formula holds.
    pub fn contains(p: &Vector3<f64>) -> bool {
        p[0] * p[0] + p[1] * p[1] <= LOCAL_CHART_RADIUS * LOCAL_CHART_RADIUS
            && p[2] >= 0.0
            && p[2] <= LOCAL_INPUT_Y_MAX
    }
}

impl MapModel for ToyLocal {
    fn eval(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.apply(p))
    }
    fn jacobian(&self, _p: &Vector3<f64>) -> Result<Matrix3<f64>> {
        Ok(self.matrix())
    }
    fn jet(&self, p: &Vector3<f64>) -> Result<Jet3> {
        Ok(Jet3::affine(&self.apply(p), &self.matrix()))
    }
    fn in_domain(&self, p: &Vector3<f64>) -> bool {
        Self::contains(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyGlobal {
    pub eps: f64,
    pub mu: f64,
}

impl ToyGlobal {
    fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let e = self.eps;
        let t = p[2] - TOY_Y_MINUS;
        Vector3::new(
            2.0 / e * t - 4.0 / (e * e) * t * t,
            -e * p[1] + 2.0,
            self.mu + e * p[0] + 4.0 / (e * e) * t * t,
        )
    }

    /// Upper cylinder `|y − 2.5| ≤ 0.5`, radius at most 3.
    pub fn contains(p: &Vector3<f64>) -> bool {
        p[0] * p[0] + p[1] * p[1] <= LOCAL_CHART_RADIUS * LOCAL_CHART_RADIUS
            && (p[2] - TOY_Y_MINUS).abs() <= GLOBAL_CHART_HALF_WIDTH
    }
}

impl MapModel for ToyGlobal {
    fn eval(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.apply(p))
    }
    fn jacobian(&self, p: &Vector3<f64>) -> Result<Matrix3<f64>> {
        let e = self.eps;
        let t = p[2] - TOY_Y_MINUS;
        Ok(Matrix3::new(
            0.0,
            0.0,
            2.0 / e - 8.0 / (e * e) * t,
            0.0,
            -e,
            0.0,
            e,
            0.0,
            8.0 / (e * e) * t,
        ))
    }
    fn jet(&self, p: &Vector3<f64>) -> Result<Jet3> {
        let e = self.eps;
        let t = p[2] - TOY_Y_MINUS;
        let v = self.apply(p);
        let mut x1 = Poly3::constant(v[0]);
        x1.set([0, 0, 1], 2.0 / e - 8.0 / (e * e) * t);
        x1.set([0, 0, 2], -4.0 / (e * e));
        let mut x2 = Poly3::constant(v[1]);
        x2.set([0, 1, 0], -e);
        let mut y = Poly3::constant(v[2]);
        y.set([1, 0, 0], e);
        y.set([0, 0, 1], 8.0 / (e * e) * t);
        y.set([0, 0, 2], 4.0 / (e * e));
        Ok(Jet3::new([x1, x2, y]))
    }
    fn in_domain(&self, p: &Vector3<f64>) -> bool {
        Self::contains(p)
    }
}

/// The toy model with `ε = (μ, ω, ρ)` as parameters: `λ = e^ρ/γ`, `γ` fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyUnfolding {
    pub eps: f64,
    pub gamma: f64,
    pub delta_dom: f64,
}

impl Default for ToyUnfolding {
    fn default() -> Self {
        Self { eps: 0.2, gamma: 3.0, delta_dom: GLOBAL_CHART_HALF_WIDTH }
    }
}

impl ToyUnfolding {
    pub fn new(eps: f64) -> Result<Self> {
        let u = Self { eps, ..Self::default() };
        u.config(&ParamTriple { mu: 0.0, omega: PI / 6.0, rho: 0.0 }).validate()?;
        Ok(u)
    }

    pub fn config(&self, e: &ParamTriple) -> ToyModelConfig {
        ToyModelConfig {
            eps: self.eps,
            lambda: e.rho.exp() / self.gamma,
            omega: e.omega,
            gamma: self.gamma,
            mu: e.mu,
        }
    }
}
