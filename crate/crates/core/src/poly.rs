//! Truncated polynomials used to carry third-order Taylor data.
//!
//! [`Poly3`] is a real polynomial in three variables truncated at total
//! degree 3, [`Jet3`] bundles three of them into the Taylor expansion of a
//! map at a base point, and [`ComplexPoly`] is a polynomial in `(z, z̄)`
//! truncated at degree 3.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

pub const MAX_DEGREE: usize = 3;
pub const N_MONOMIALS: usize = 20;

/// Exponent triples in graded order.
pub const MONOMIALS: [[u8; 3]; N_MONOMIALS] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [2, 0, 0],
    [1, 1, 0],
    [1, 0, 1],
    [0, 2, 0],
    [0, 1, 1],
    [0, 0, 2],
    [3, 0, 0],
    [2, 1, 0],
    [2, 0, 1],
    [1, 2, 0],
    [1, 1, 1],
    [1, 0, 2],
    [0, 3, 0],
    [0, 2, 1],
    [0, 1, 2],
    [0, 0, 3],
];

/// Index of an exponent triple in [`MONOMIALS`], if its degree is at most 3.
pub fn monomial_index(e: [u8; 3]) -> Option<usize> {
    MONOMIALS.iter().position(|m| *m == e)
}

fn degree(e: [u8; 3]) -> usize {
    (e[0] + e[1] + e[2]) as usize
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).product::<u32>() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poly3 {
    pub c: [f64; N_MONOMIALS],
}

impl Default for Poly3 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Poly3 {
    pub fn zero() -> Self {
        Self { c: [0.0; N_MONOMIALS] }
    }

    pub fn constant(v: f64) -> Self {
        let mut p = Self::zero();
        p.c[0] = v;
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(i: usize) -> Self {
        let mut p = Self::zero();
        p.c[1 + i] = 1.0;
        p
    }

    /// Linear form `Σ a_i x_i`.
    pub fn linear(a: [f64; 3]) -> Self {
        let mut p = Self::zero();
        p.c[1..4].copy_from_slice(&a);
        p
    }

    pub fn coeff(&self, e: [u8; 3]) -> f64 {
        monomial_index(e).map_or(0.0, |i| self.c[i])
    }

    pub fn set(&mut self, e: [u8; 3], v: f64) {
        let i = monomial_index(e).expect("degree above 3");
        self.c[i] = v;
    }

    /// Mixed partial derivative at the base point, e.g. `[1,0,2]` for ∂³/∂x∂z².
    pub fn partial(&self, e: [u8; 3]) -> f64 {
        self.coeff(e) * e.iter().map(|&k| factorial(k)).product::<f64>()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = *self;
        p.c.iter_mut().for_each(|v| *v *= s);
        p
    }

    /// Part of homogeneous degree `d`.
    pub fn homogeneous(&self, d: usize) -> Self {
        let mut p = Self::zero();
        for (i, e) in MONOMIALS.iter().enumerate() {
            if degree(*e) == d {
                p.c[i] = self.c[i];
            }
        }
        p
    }

    pub fn gradient(&self) -> [f64; 3] {
        [self.c[1], self.c[2], self.c[3]]
    }

    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        MONOMIALS
            .iter()
            .zip(self.c.iter())
            .filter(|(_, c)| **c != 0.0)
            .map(|(e, c)| c * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32))
            .sum()
    }

    /// Substitute `x_i ↦ subs[i]` and truncate at degree 3.
    ///
    /// The substitutes should have zero constant term, otherwise the
    /// truncation discards contributions of the dropped higher orders.
    pub fn compose(&self, subs: &[Poly3; 3]) -> Poly3 {
        let mut powers = [[Poly3::constant(1.0); 4]; 3];
        for i in 0..3 {
            for k in 1..4 {
                powers[i][k] = powers[i][k - 1] * subs[i];
            }
        }
        let mut out = Poly3::zero();
        for (e, c) in MONOMIALS.iter().zip(self.c.iter()) {
            if *c == 0.0 {
                continue;
            }
            let term = powers[0][e[0] as usize] * powers[1][e[1] as usize] * powers[2][e[2] as usize];
            out = out + term.scale(*c);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Add for Poly3 {
    type Output = Poly3;
    fn add(self, rhs: Poly3) -> Poly3 {
        let mut p = self;
        p.c.iter_mut().zip(rhs.c.iter()).for_each(|(a, b)| *a += b);
        p
    }
}

impl Sub for Poly3 {
    type Output = Poly3;
    fn sub(self, rhs: Poly3) -> Poly3 {
        self + (-rhs)
    }
}

impl Neg for Poly3 {
    type Output = Poly3;
    fn neg(self) -> Poly3 {
        self.scale(-1.0)
    }
}

impl Mul for Poly3 {
    type Output = Poly3;
    fn mul(self, rhs: Poly3) -> Poly3 {
        let mut out = Poly3::zero();
        for (i, ea) in MONOMIALS.iter().enumerate() {
            let a = self.c[i];
            if a == 0.0 {
                continue;
            }
            for (j, eb) in MONOMIALS.iter().enumerate() {
                let b = rhs.c[j];
                if b == 0.0 || degree(*ea) + degree(*eb) > MAX_DEGREE {
                    continue;
                }
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                out.c[monomial_index(e).unwrap()] += a * b;
            }
        }
        out
    }
}

/// Third-order Taylor expansion of a map `R³ → R³` at a base point `p`:
/// component `i` is the polynomial `δ ↦ F_i(p + δ)` truncated at degree 3.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet3 {
    pub comp: [Poly3; 3],
}

impl Jet3 {
    pub fn new(comp: [Poly3; 3]) -> Self {
        Self { comp }
    }

    /// Jet of the affine map `δ ↦ v + A δ`.
    pub fn affine(v: &Vector3<f64>, a: &Matrix3<f64>) -> Self {
        let row = |i: usize| {
            let mut p = Poly3::linear([a[(i, 0)], a[(i, 1)], a[(i, 2)]]);
            p.c[0] = v[i];
            p
        };
        Self::new([row(0), row(1), row(2)])
    }

    pub fn value(&self) -> Vector3<f64> {
        Vector3::new(self.comp[0].c[0], self.comp[1].c[0], self.comp[2].c[0])
    }

    pub fn linear(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.comp[i].c[1 + j])
    }

    /// Jet of `outer ∘ inner`, where `outer` is expanded at `inner.value()`.
    pub fn compose(outer: &Jet3, inner: &Jet3) -> Jet3 {
        let mut shifted = inner.comp;
        for p in shifted.iter_mut() {
            p.c[0] = 0.0;
        }
        Jet3::new([
            outer.comp[0].compose(&shifted),
            outer.comp[1].compose(&shifted),
            outer.comp[2].compose(&shifted),
        ])
    }

    /// Expansion in new variables `ξ` with `δ = P ξ`.
    pub fn in_basis(&self, p: &Matrix3<f64>) -> Jet3 {
        let subs = [
            Poly3::linear([p[(0, 0)], p[(0, 1)], p[(0, 2)]]),
            Poly3::linear([p[(1, 0)], p[(1, 1)], p[(1, 2)]]),
            Poly3::linear([p[(2, 0)], p[(2, 1)], p[(2, 2)]]),
        ];
        Jet3::new([
            self.comp[0].compose(&subs),
            self.comp[1].compose(&subs),
            self.comp[2].compose(&subs),
        ])
    }

    /// Left-multiply the output by `m`.
    pub fn map_output(&self, m: &Matrix3<f64>) -> Jet3 {
        let mut out = [Poly3::zero(); 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i] = out[i] + self.comp[j].scale(m[(i, j)]);
            }
        }
        Jet3::new(out)
    }

    /// Replace the constant term (value) of every component.
    pub fn with_value(&self, v: &Vector3<f64>) -> Jet3 {
        let mut j = *self;
        for i in 0..3 {
            j.comp[i].c[0] = v[i];
        }
        j
    }

    pub fn eval(&self, d: &Vector3<f64>) -> Vector3<f64> {
        let x = [d[0], d[1], d[2]];
        Vector3::new(self.comp[0].eval(&x), self.comp[1].eval(&x), self.comp[2].eval(&x))
    }
}

/// Exponent pairs `(p, q)` of `zᵖ z̄ᵠ` with `p + q ≤ 3`, graded.
pub const CMONOMIALS: [(u8, u8); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

pub fn cmonomial_index(p: u8, q: u8) -> Option<usize> {
    CMONOMIALS.iter().position(|m| *m == (p, q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPoly {
    pub c: [Complex64; 10],
}

impl Default for ComplexPoly {
    fn default() -> Self {
        Self::zero()
    }
}

impl ComplexPoly {
    pub fn zero() -> Self {
        Self { c: [Complex64::new(0.0, 0.0); 10] }
    }

    pub fn constant(v: Complex64) -> Self {
        let mut p = Self::zero();
        p.c[0] = v;
        p
    }

    pub fn z() -> Self {
        let mut p = Self::zero();
        p.c[1] = Complex64::new(1.0, 0.0);
        p
    }

    pub fn zbar() -> Self {
        let mut p = Self::zero();
        p.c[2] = Complex64::new(1.0, 0.0);
        p
    }

    pub fn coeff(&self, p: u8, q: u8) -> Complex64 {
        cmonomial_index(p, q).map_or(Complex64::new(0.0, 0.0), |i| self.c[i])
    }

    pub fn set(&mut self, p: u8, q: u8, v: Complex64) {
        self.c[cmonomial_index(p, q).expect("degree above 3")] = v;
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut p = *self;
        p.c.iter_mut().for_each(|v| *v *= s);
        p
    }

    /// The polynomial whose value is the complex conjugate of this one's.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero();
        for (i, &(p, q)) in CMONOMIALS.iter().enumerate() {
            out.set(q, p, self.c[i].conj());
        }
        out
    }

    /// `self(inner(z), conj(inner(z)))`, truncated; `inner` should vanish at 0.
    pub fn compose(&self, inner: &ComplexPoly) -> ComplexPoly {
        let mut zi = *inner;
        zi.c[0] = Complex64::new(0.0, 0.0);
        let zb = zi.conj();
        let mut pz = [ComplexPoly::constant(Complex64::new(1.0, 0.0)); 4];
        let mut pb = pz;
        for k in 1..4 {
            pz[k] = pz[k - 1] * zi;
            pb[k] = pb[k - 1] * zb;
        }
        let mut out = ComplexPoly::zero();
        for (i, &(p, q)) in CMONOMIALS.iter().enumerate() {
            if self.c[i] == Complex64::new(0.0, 0.0) {
                continue;
            }
            out = out + (pz[p as usize] * pb[q as usize]).scale(self.c[i]);
        }
        out
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let zb = z.conj();
        CMONOMIALS
            .iter()
            .zip(self.c.iter())
            .map(|(&(p, q), c)| c * z.powu(p as u32) * zb.powu(q as u32))
            .sum()
    }

    /// Wirtinger derivatives `(∂/∂z, ∂/∂z̄)` at `z`.
    pub fn wirtinger(&self, z: Complex64) -> (Complex64, Complex64) {
        let zb = z.conj();
        let mut dz = Complex64::new(0.0, 0.0);
        let mut dzb = Complex64::new(0.0, 0.0);
        for (&(p, q), c) in CMONOMIALS.iter().zip(self.c.iter()) {
            if p > 0 {
                dz += c * (p as f64) * z.powu(p as u32 - 1) * zb.powu(q as u32);
            }
            if q > 0 {
                dzb += c * (q as f64) * z.powu(p as u32) * zb.powu(q as u32 - 1);
            }
        }
        (dz, dzb)
    }

    /// Real Jacobian determinant of `z ↦ self(z)` viewed as a planar map.
    pub fn jacobian_det(&self, z: Complex64) -> f64 {
        let (a, b) = self.wirtinger(z);
        a.norm_sqr() - b.norm_sqr()
    }
}

impl Add for ComplexPoly {
    type Output = ComplexPoly;
    fn add(self, rhs: ComplexPoly) -> ComplexPoly {
        let mut p = self;
        p.c.iter_mut().zip(rhs.c.iter()).for_each(|(a, b)| *a += b);
        p
    }
}

impl Sub for ComplexPoly {
    type Output = ComplexPoly;
    fn sub(self, rhs: ComplexPoly) -> ComplexPoly {
        self + rhs.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for ComplexPoly {
    type Output = ComplexPoly;
    fn mul(self, rhs: ComplexPoly) -> ComplexPoly {
        let mut out = ComplexPoly::zero();
        for (i, &(p1, q1)) in CMONOMIALS.iter().enumerate() {
            if self.c[i] == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (j, &(p2, q2)) in CMONOMIALS.iter().enumerate() {
                if (p1 + q1 + p2 + q2) as usize > MAX_DEGREE {
                    continue;
                }
                let k = cmonomial_index(p1 + p2, q1 + q2).unwrap();
                out.c[k] += self.c[i] * rhs.c[j];
            }
        }
        out
    }
}
