//! Fixed points of first-return maps, their multipliers and classification,
//! and the Neimark–Sacker locus of the toy unfolding.

mod ns;

pub use ns::{
    locus_point, ns_locus_solve, psi_of_trace, repelling_window, trace_interval, LocusOptions,
    NsLocusPoint, PSI_BD,
};

use crate::eigen::{balance, eigenvalues3, PAIRING_TOL};
use crate::error::{Error, Result};
use crate::map::{MapModel, StatePoint};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub point: StatePoint,
    pub residual: f64,
    pub newton_iterations: usize,
}

const MAX_CONDITION: f64 = 1e13;
const MAX_HALVINGS: usize = 40;

fn residual<M: MapModel + ?Sized>(map: &M, p: &Vector3<f64>) -> Result<(Vector3<f64>, f64)> {
    let f = map.eval(p)? - p;
    let r = f.amax();
    if !r.is_finite() {
        return Err(Error::NonFinite("fixed-point residual"));
    }
    Ok((f, r))
}

/// Condition number of `a` after diagonal balancing, in the 1-norm.
fn balanced_condition(a: &Matrix3<f64>) -> f64 {
    let d = balance(a);
    let b = Matrix3::from_fn(|i, j| a[(i, j)] * d[j] / d[i]);
    match b.try_inverse() {
        Some(inv) => b.abs().row_sum().max() * inv.abs().row_sum().max(),
        None => f64::INFINITY,
    }
}

/// Safeguarded Newton iteration for `T(p) = p`.
///
/// A step is halved while it fails to reduce the sup-norm residual or
/// leaves the map's chart.
pub fn newton_fixed_point<M: MapModel + ?Sized>(map: &M, guess: &StatePoint, opts: &NewtonOptions) -> Result<FixedPointResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {} must be positive", opts.tol)));
    }
    let mut p = guess.coords();
    let (mut f, mut r) = residual(map, &p)?;
    for it in 0..=opts.max_iter {
        if r <= opts.tol {
            return Ok(FixedPointResult {
                point: StatePoint::from_vector(&p, guess.chart),
                residual: r,
                newton_iterations: it,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let a = map.jacobian(&p)? - Matrix3::identity();
        let cond = balanced_condition(&a);
        if !(cond < MAX_CONDITION) {
            return Err(Error::SingularJacobian(cond));
        }
        let step = a.lu().solve(&(-f)).ok_or(Error::SingularJacobian(f64::INFINITY))?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = p + step * alpha;
            if let Ok((ft, rt)) = residual(map, &trial) {
                if rt < r || rt <= opts.tol {
                    p = trial;
                    f = ft;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence(it + 1));
        }
    }
    Err(Error::NoConvergence(opts.max_iter))
}

/// Three multipliers of a fixed point, a complex pair (if any) first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSet {
    pub nu1: Complex64,
    pub nu2: Complex64,
    pub nu3: Complex64,
    /// `arg ν₁` when the pair is complex and within 1e−6 of the unit circle.
    pub psi: Option<f64>,
}

impl MultiplierSet {
    pub fn from_matrix(j: &Matrix3<f64>) -> Result<Self> {
        let [nu1, nu2, nu3] = eigenvalues3(j)?;
        Ok(Self::assemble(nu1, nu2, nu3))
    }

    /// Build from explicit values; anything but exactly three is rejected.
    pub fn from_values(values: &[Complex64]) -> Result<Self> {
        if values.len() != 3 {
            return Err(Error::InvalidInput(format!("expected 3 multipliers, got {}", values.len())));
        }
        let mut v = [values[0], values[1], values[2]];
        let complex: Vec<usize> = (0..3).filter(|&i| v[i].im.abs() > PAIRING_TOL).collect();
        match complex.len() {
            0 => {
                v.iter_mut().for_each(|z| z.im = 0.0);
                let lm: Vec<f64> = v.iter().map(|z| z.norm().max(1e-300).ln()).collect();
                let odd = (0..3)
                    .max_by(|&i, &j| {
                        let di = (lm[i] - (lm[(i + 1) % 3] + lm[(i + 2) % 3]) / 2.0).abs();
                        let dj = (lm[j] - (lm[(j + 1) % 3] + lm[(j + 2) % 3]) / 2.0).abs();
                        di.total_cmp(&dj).then(j.cmp(&i))
                    })
                    .unwrap();
                let mut rest: Vec<Complex64> = (0..3).filter(|&i| i != odd).map(|i| v[i]).collect();
                rest.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
                Ok(Self::assemble(rest[0], rest[1], v[odd]))
            }
            2 => {
                let (a, b) = (v[complex[0]], v[complex[1]]);
                if (a - b.conj()).norm() > 1e-8 * a.norm().max(1.0) {
                    return Err(Error::InvalidInput("complex multipliers must be conjugate".into()));
                }
                let z = if a.im > 0.0 { a } else { b };
                let real = (0..3).find(|i| !complex.contains(i)).unwrap();
                Ok(Self::assemble(z, z.conj(), Complex64::new(v[real].re, 0.0)))
            }
            _ => Err(Error::InvalidInput("a real 3x3 spectrum has 0 or 2 non-real values".into())),
        }
    }

    fn assemble(nu1: Complex64, nu2: Complex64, nu3: Complex64) -> Self {
        let psi = (nu1.im > PAIRING_TOL && (nu1.norm() - 1.0).abs() < 1e-6).then(|| nu1.arg());
        Self { nu1, nu2, nu3, psi }
    }

    pub fn is_complex_pair(&self) -> bool {
        self.nu1.im > PAIRING_TOL
    }

    /// `|ν₁ ν₂|`.
    pub fn pair_product(&self) -> f64 {
        (self.nu1 * self.nu2).norm()
    }

    /// `ν₁ + ν₂` (real).
    pub fn pair_trace(&self) -> f64 {
        (self.nu1 + self.nu2).re
    }

    pub fn values(&self) -> [Complex64; 3] {
        [self.nu1, self.nu2, self.nu3]
    }
}

/// Multipliers of `map` at the fixed point `fp`.
pub fn multipliers<M: MapModel + ?Sized>(map: &M, fp: &StatePoint) -> Result<MultiplierSet> {
    let p = fp.coords();
    let r = (map.eval(&p)? - p).amax();
    if !(r <= 1e-8 * p.amax().max(1.0)) {
        return Err(Error::NoFixedPoint(format!("residual {r:e} at the supplied point")));
    }
    MultiplierSet::from_matrix(&map.jacobian(&p)?)
}

/// `log(|λ| |γ|)`.
pub fn rho_value(lambda_mod: f64, gamma_mod: f64) -> Result<f64> {
    if !(lambda_mod > 0.0 && gamma_mod > 0.0) {
        return Err(Error::DomainError(format!("moduli must be positive, got ({lambda_mod}, {gamma_mod})")));
    }
    Ok((lambda_mod * gamma_mod).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TangencyTag {
    Saddle11,
    SaddleFocus12,
    FocusSaddle21,
    BiFocus22,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangencyClass {
    pub tag: TangencyTag,
    /// `|λ₁ γ₁|` for the leading stable and unstable multipliers.
    pub product: f64,
}

/// Classify a saddle by the realness of its leading multipliers.
pub fn classify(mults: &MultiplierSet) -> Result<TangencyClass> {
    let v = mults.values();
    if let Some(d) = v.iter().map(|z| (z.norm() - 1.0).abs()).find(|d| *d < 1e-10) {
        return Err(Error::Ambiguous(d));
    }
    let stable: Vec<Complex64> = v.iter().copied().filter(|z| z.norm() < 1.0).collect();
    let unstable: Vec<Complex64> = v.iter().copied().filter(|z| z.norm() > 1.0).collect();
    let lead_s = stable.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm()));
    let lead_u = unstable.iter().copied().min_by(|a, b| a.norm().total_cmp(&b.norm()));
    let (Some(ls), Some(lu)) = (lead_s, lead_u) else {
        return Err(Error::DomainError("not a saddle: all multipliers on one side of the unit circle".into()));
    };
    let is_c = |z: Complex64| z.im.abs() > PAIRING_TOL;
    let tag = match (is_c(ls), is_c(lu)) {
        (false, false) => TangencyTag::Saddle11,
        (false, true) => TangencyTag::SaddleFocus12,
        (true, false) => TangencyTag::FocusSaddle21,
        (true, true) => TangencyTag::BiFocus22,
    };
    Ok(TangencyClass { tag, product: ls.norm() * lu.norm() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{AffineMap, Chart, ClosureMap, ToyModelConfig};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn newton_finds_origin_of_toy_local() {
        let local = ToyModelConfig::default().local();
        let r = newton_fixed_point(&local, &StatePoint::new(0.1, -0.1, 0.05, Chart::LocalCylinder), &NewtonOptions::default()).unwrap();
        assert!(r.point.coords().amax() < 1e-12);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn newton_without_nearby_fixed_point_fails() {
        let m = ClosureMap::new(|p: &Vector3<f64>| p + Vector3::new(1.0 + p[0] * p[0], p[1], p[2]));
        let r = newton_fixed_point(&m, &StatePoint::new(50.0, 1.0, 1.0, Chart::ReturnSection), &NewtonOptions::default());
        assert!(matches!(r, Err(Error::NoConvergence(_)) | Err(Error::SingularJacobian(_))), "{r:?}");
    }

    #[test]
    fn multiplier_examples() {
        let o = StatePoint::new(0.0, 0.0, 0.0, Chart::LocalCylinder);
        let m = multipliers(&ToyModelConfig::default().local(), &o).unwrap();
        assert!((m.nu1 - Complex64::from_polar(1.0 / 3.0, PI / 6.0)).norm() < 1e-14);
        assert_eq!(m.nu2, m.nu1.conj());
        assert!((m.nu3.re - 3.0).abs() < 1e-14);

        let id = multipliers(&AffineMap::identity(), &o).unwrap();
        for z in id.values() {
            assert!((z - c(1.0, 0.0)).norm() < 1e-7);
        }
        let d = multipliers(&AffineMap::linear(Matrix3::from_diagonal(&Vector3::new(0.5, 0.5, 2.0))), &o).unwrap();
        assert!((d.nu1.re - 0.5).abs() < 1e-7 && (d.nu2.re - 0.5).abs() < 1e-7);
        assert!((d.nu3.re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rho_examples() {
        assert!(rho_value(1.0 / 3.0, 3.0).unwrap().abs() < 1e-15);
        assert!((rho_value(0.25, 2.0).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(rho_value(1.0, 1.0).unwrap(), 0.0);
        assert!(rho_value(0.0, 1.0).is_err());
    }

    #[test]
    fn classify_examples() {
        let z = Complex64::from_polar(1.0 / 3.0, PI / 6.0);
        let fs = classify(&MultiplierSet::from_values(&[z, z.conj(), c(3.0, 0.0)]).unwrap()).unwrap();
        assert_eq!(fs.tag, TangencyTag::FocusSaddle21);
        assert!((fs.product - 1.0).abs() < 1e-14);
        let s = classify(&MultiplierSet::from_values(&[c(0.5, 0.0), c(0.3, 0.0), c(2.0, 0.0)]).unwrap()).unwrap();
        assert_eq!(s.tag, TangencyTag::Saddle11);
        assert!((s.product - 1.0).abs() < 1e-15);
        let four = [Complex64::from_polar(0.5, 0.3), Complex64::from_polar(0.5, -0.3), Complex64::from_polar(2.0, 0.4), Complex64::from_polar(2.0, -0.4)];
        assert!(MultiplierSet::from_values(&four).is_err());
        let sf = classify(&MultiplierSet::from_values(&[c(0.5, 0.0), Complex64::from_polar(2.0, 0.4), Complex64::from_polar(2.0, -0.4)]).unwrap()).unwrap();
        assert_eq!(sf.tag, TangencyTag::SaddleFocus12);
    }

    #[test]
    fn classify_rejects_unit_circle() {
        let m = MultiplierSet::from_values(&[c(1.0, 0.0), c(0.3, 0.0), c(2.0, 0.0)]).unwrap();
        assert!(matches!(classify(&m), Err(Error::Ambiguous(_))));
    }
}
