use super::{Chart, FirstReturnSpec, MapModel, ParamTriple, StatePoint, ToyGlobal, ToyLocal, ToyUnfolding, TOY_Y_MINUS};
use crate::error::{Error, Result};
use crate::fixed_point::{multipliers, newton_fixed_point, NewtonOptions};
use crate::tangency::splitting_mu;
use nalgebra::{Matrix3, Vector3};

/// A three-parameter family of (local, global) map pairs near a tangency.
pub trait Unfolding: Send + Sync {
    type Local: MapModel + Clone;
    type Global: MapModel + Clone;

    fn local(&self, e: &ParamTriple) -> Self::Local;
    fn global(&self, e: &ParamTriple) -> Self::Global;
    /// The saddle `O` of the local map.
    fn saddle(&self) -> Vector3<f64>;
    /// Point of the unstable manifold whose global image is the tangency point.
    fn m_minus(&self) -> Vector3<f64>;
    fn delta_dom(&self) -> f64;

    /// Modulus of the stable multiplier pair of `O`.
    fn lambda_mod(&self, e: &ParamTriple) -> Result<f64> {
        let m = multipliers(&self.local(e), &StatePoint::from_vector(&self.saddle(), Chart::LocalCylinder))?;
        Ok(m.nu1.norm())
    }

    fn first_return(&self, k: usize, e: &ParamTriple) -> Result<FirstReturnSpec<Self::Local, Self::Global>> {
        FirstReturnSpec::new(k, self.local(e), self.global(e), self.delta_dom(), self.m_minus())
    }
}

impl Unfolding for ToyUnfolding {
    type Local = ToyLocal;
    type Global = ToyGlobal;

    fn local(&self, e: &ParamTriple) -> ToyLocal {
        self.config(e).local()
    }
    fn global(&self, e: &ParamTriple) -> ToyGlobal {
        self.config(e).global()
    }
    fn saddle(&self) -> Vector3<f64> {
        Vector3::zeros()
    }
    fn m_minus(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, TOY_Y_MINUS)
    }
    fn delta_dom(&self) -> f64 {
        self.delta_dom
    }
    fn lambda_mod(&self, e: &ParamTriple) -> Result<f64> {
        Ok(e.rho.exp() / self.gamma)
    }
}

/// Wrapper that ignores the splitting parameter (a degenerate family).
#[derive(Debug, Clone, Copy)]
pub struct FrozenMu<U>(pub U);

impl<U: Unfolding> Unfolding for FrozenMu<U> {
    type Local = U::Local;
    type Global = U::Global;

    fn local(&self, e: &ParamTriple) -> Self::Local {
        self.0.local(e)
    }
    fn global(&self, e: &ParamTriple) -> Self::Global {
        self.0.global(&ParamTriple { mu: 0.0, ..*e })
    }
    fn saddle(&self) -> Vector3<f64> {
        self.0.saddle()
    }
    fn m_minus(&self) -> Vector3<f64> {
        self.0.m_minus()
    }
    fn delta_dom(&self) -> f64 {
        self.0.delta_dom()
    }
}

/// Measure `(μ, ω, ρ)` of the maps at family parameter `e`.
pub fn measure_unfolding<U: Unfolding>(family: &U, e: &ParamTriple) -> Result<ParamTriple> {
    let global = family.global(e);
    let mu = splitting_mu(&global, &StatePoint::from_vector(&family.m_minus(), Chart::GlobalNeighborhood))?;
    let local = family.local(e);
    let guess = StatePoint::from_vector(&family.saddle(), Chart::LocalCylinder);
    let o = newton_fixed_point(&local, &guess, &NewtonOptions::default())?;
    let m = multipliers(&local, &o.point)?;
    if m.nu1.im.abs() <= 1e-10 {
        return Err(Error::SpectrumMismatch("saddle has no complex stable pair".into()));
    }
    Ok(ParamTriple { mu, omega: m.nu1.arg().abs(), rho: (m.nu1.norm() * m.nu3.norm()).ln() })
}

/// Determinant of `∂(μ, ω, ρ)/∂ε` at `eps0`, by central differences with step `h`.
pub fn unfolding_jacobian<U: Unfolding>(family: &U, eps0: &ParamTriple, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::DomainError(format!("step h = {h} must be positive")));
    }
    let mut jac = Matrix3::zeros();
    for c in 0..3 {
        let mut plus = eps0.as_array();
        let mut minus = plus;
        plus[c] += h;
        minus[c] -= h;
        let fp = measure_unfolding(family, &ParamTriple::from_array(plus))?.as_array();
        let fm = measure_unfolding(family, &ParamTriple::from_array(minus))?.as_array();
        for r in 0..3 {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    let d = jac.determinant();
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFinite("unfolding Jacobian"))
    }
}
