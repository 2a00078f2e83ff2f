use super::{Chart, MapModel, StatePoint};
use crate::error::{finite, Error, Result};
use crate::poly::Jet3;
use nalgebra::{Matrix3, Vector3};

/// `T_k = T₁ ∘ T₀ᵏ` on the return section around `M⁺ = T₁(M⁻)`.
#[derive(Debug, Clone)]
pub struct FirstReturnSpec<L, G> {
    pub k: usize,
    pub local: L,
    pub global: G,
    pub delta_dom: f64,
    pub m_minus: Vector3<f64>,
    m_plus: Vector3<f64>,
}

pub type FirstReturnMap<L, G> = FirstReturnSpec<L, G>;

impl<L: MapModel, G: MapModel> FirstReturnSpec<L, G> {
    pub fn new(k: usize, local: L, global: G, delta_dom: f64, m_minus: Vector3<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if !(delta_dom > 0.0) {
            return Err(Error::InvalidInput(format!("delta_dom = {delta_dom} must be positive")));
        }
        let m_plus = global.eval(&m_minus)?;
        Ok(Self { k, local, global, delta_dom, m_minus, m_plus })
    }

    pub fn m_plus(&self) -> Vector3<f64> {
        self.m_plus
    }

    pub fn in_section(&self, p: &Vector3<f64>) -> bool {
        (p - self.m_plus).abs().max() <= self.delta_dom
    }

    /// `T₀ᵏ(p)` with the chart checked before every local step.
    pub fn local_orbit(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        let mut x = *p;
        for step in 0..self.k {
            if !self.local.in_domain(&x) {
                return Err(Error::LeftChart(step));
            }
            x = self.local.eval(&x)?;
        }
        if !self.global.in_domain(&x) {
            return Err(Error::LeftChart(self.k));
        }
        Ok(x)
    }

    /// Section coordinate `Y = ỹ − y⁻`, where `ỹ` is the height after the local passage.
    pub fn section_y(&self, p: &Vector3<f64>) -> Result<f64> {
        let mut x = *p;
        for _ in 0..self.k {
            x = self.local.eval(&x)?;
        }
        Ok(x[2] - self.m_minus[2])
    }

    /// Gradient of [`section_y`](Self::section_y).
    pub fn section_y_gradient(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        let mut x = *p;
        let mut d = Matrix3::identity();
        for _ in 0..self.k {
            d = self.local.jacobian(&x)? * d;
            x = self.local.eval(&x)?;
        }
        Ok(d.row(2).transpose())
    }

    fn check_section(&self, p: &Vector3<f64>) -> Result<()> {
        finite(p, "first-return input")?;
        if self.in_section(p) {
            Ok(())
        } else {
            Err(Error::NotInSection)
        }
    }
}

impl<L: MapModel, G: MapModel> MapModel for FirstReturnSpec<L, G> {
    fn eval(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        self.check_section(p)?;
        let q = self.local_orbit(p)?;
        let v = self.global.eval(&q)?;
        finite(&v, "first-return image")?;
        Ok(v)
    }

    fn jacobian(&self, p: &Vector3<f64>) -> Result<Matrix3<f64>> {
        self.check_section(p)?;
        let mut x = *p;
        let mut d = Matrix3::identity();
        for step in 0..self.k {
            if !self.local.in_domain(&x) {
                return Err(Error::LeftChart(step));
            }
            d = self.local.jacobian(&x)? * d;
            x = self.local.eval(&x)?;
        }
        if !self.global.in_domain(&x) {
            return Err(Error::LeftChart(self.k));
        }
        Ok(self.global.jacobian(&x)? * d)
    }

    fn jet(&self, p: &Vector3<f64>) -> Result<Jet3> {
        self.check_section(p)?;
        let mut jet = Jet3::affine(p, &Matrix3::identity());
        let mut x = *p;
        for step in 0..self.k {
            if !self.local.in_domain(&x) {
                return Err(Error::LeftChart(step));
            }
            jet = Jet3::compose(&self.local.jet(&x)?, &jet);
            x = self.local.eval(&x)?;
        }
        if !self.global.in_domain(&x) {
            return Err(Error::LeftChart(self.k));
        }
        Ok(Jet3::compose(&self.global.jet(&x)?, &jet))
    }

    fn derivative_scale(&self) -> f64 {
        self.local.derivative_scale().min(self.global.derivative_scale())
    }

    fn in_domain(&self, p: &Vector3<f64>) -> bool {
        self.in_section(p)
    }
}

/// Evaluate `T_k` at a point of the return section.
pub fn first_return_eval<L: MapModel, G: MapModel>(spec: &FirstReturnSpec<L, G>, p: StatePoint) -> Result<StatePoint> {
    let v = spec.eval(&p.coords())?;
    Ok(StatePoint::from_vector(&v, Chart::ReturnSection))
}
