//! Spectra of real 3×3 matrices.
//!
//! Eigenvalues come from a Schur decomposition of the balanced matrix; the
//! isolated real eigenvalue is then polished on the characteristic cubic and
//! the remaining pair is rebuilt from its trace and product, which are
//! obtained from principal minors and stay accurate when `|ν₃| ≪ 1`.

use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

/// Imaginary parts at or below this are treated as zero.
pub const PAIRING_TOL: f64 = 1e-10;

/// Coefficients `(a2, a1, a0)` of `ν³ + a2 ν² + a1 ν + a0`.
pub fn char_poly(m: &Matrix3<f64>) -> (f64, f64, f64) {
    let tr = m.trace();
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
        + m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)];
    (-tr, minors, -m.determinant())
}

fn poly_eval(c: (f64, f64, f64), x: f64) -> (f64, f64) {
    let (a2, a1, a0) = c;
    let p = ((x + a2) * x + a1) * x + a0;
    let dp = (3.0 * x + 2.0 * a2) * x + a1;
    (p, dp)
}

fn polish_real(c: (f64, f64, f64), mut x: f64) -> f64 {
    let (mut p, _) = poly_eval(c, x);
    for _ in 0..8 {
        let (_, dp) = poly_eval(c, x);
        if dp == 0.0 || p == 0.0 {
            break;
        }
        let nx = x - p / dp;
        let (np, _) = poly_eval(c, nx);
        if !(np.abs() < p.abs()) {
            break;
        }
        x = nx;
        p = np;
    }
    x
}

/// Diagonal `d` with `D⁻¹ M D` balanced (row and column norms comparable).
pub fn balance(m: &Matrix3<f64>) -> Vector3<f64> {
    let mut d = Vector3::repeat(1.0);
    let mut a = *m;
    for _ in 0..40 {
        let mut done = true;
        for i in 0..3 {
            let c: f64 = (0..3).filter(|&j| j != i).map(|j| a[(j, i)].abs()).sum();
            let r: f64 = (0..3).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let f = (r / c).sqrt();
            let f = 2f64.powi(f.log2().round() as i32);
            if f != 1.0 && (c * f + r / f) < 0.95 * (c + r) {
                done = false;
                d[i] *= f;
                for j in 0..3 {
                    a[(j, i)] *= f;
                    a[(i, j)] /= f;
                }
            }
        }
        if done {
            break;
        }
    }
    d
}

/// Eigenvalues in the order `(ν₁, ν₂, ν₃)` with a complex pair first.
///
/// For a complex pair `ν₁` has positive imaginary part and `ν₂ = ν̄₁`
/// exactly. For a real spectrum `ν₃` is the eigenvalue whose log-modulus
/// is farthest from the other two and `|ν₁| ≥ |ν₂|`.
pub fn eigenvalues3(m: &Matrix3<f64>) -> Result<[Complex64; 3]> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("non-finite matrix entry".into()));
    }
    let d = balance(m);
    let b = Matrix3::from_fn(|i, j| m[(i, j)] * d[j] / d[i]);
    let raw = b.complex_eigenvalues();
    if raw.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::EigenFailure("Schur iteration did not converge".into()));
    }
    let c = char_poly(&b);
    let tr = b.trace();
    let (_, a1, _) = c;
    let max_im = raw.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
    let idx3 = if max_im > PAIRING_TOL {
        (0..3).min_by(|&i, &j| raw[i].im.abs().total_cmp(&raw[j].im.abs())).unwrap()
    } else {
        let lm: Vec<f64> = raw.iter().map(|z| z.re.abs().max(1e-300).ln()).collect();
        (0..3)
            .max_by(|&i, &j| {
                let di = (lm[i] - (lm[(i + 1) % 3] + lm[(i + 2) % 3]) / 2.0).abs();
                let dj = (lm[j] - (lm[(j + 1) % 3] + lm[(j + 2) % 3]) / 2.0).abs();
                di.total_cmp(&dj)
            })
            .unwrap()
    };
    let nu3 = polish_real(c, raw[idx3].re);
    let s = tr - nu3;
    let p = a1 - nu3 * s;
    let disc = s * s / 4.0 - p;
    let (nu1, nu2) = if disc < 0.0 {
        let im = (-disc).sqrt();
        if im > PAIRING_TOL {
            let z = Complex64::new(s / 2.0, im);
            (z, z.conj())
        } else {
            (Complex64::new(s / 2.0, 0.0), Complex64::new(s / 2.0, 0.0))
        }
    } else {
        let r = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = s / 2.0 + r.copysign(s);
        let small = if big != 0.0 { p / big } else { 0.0 };
        let (a, b) = if big.abs() >= small.abs() { (big, small) } else { (small, big) };
        (Complex64::new(a, 0.0), Complex64::new(b, 0.0))
    };
    Ok([nu1, nu2, Complex64::new(nu3, 0.0)])
}

/// Complex eigenvector for eigenvalue `nu`, normalised to unit length.
pub fn eigenvector(m: &Matrix3<f64>, nu: Complex64) -> Result<nalgebra::Vector3<Complex64>> {
    let a = m.map(|v| Complex64::new(v, 0.0)) - nalgebra::Matrix3::<Complex64>::identity() * nu;
    let rows = [a.row(0).transpose(), a.row(1).transpose(), a.row(2).transpose()];
    let mut best = nalgebra::Vector3::<Complex64>::zeros();
    let mut best_norm = 0.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (r, s) = (&rows[i], &rows[j]);
        let v = nalgebra::Vector3::new(
            r[1] * s[2] - r[2] * s[1],
            r[2] * s[0] - r[0] * s[2],
            r[0] * s[1] - r[1] * s[0],
        );
        let n = v.norm();
        if n > best_norm {
            best_norm = n;
            best = v;
        }
    }
    if !(best_norm > 0.0) || !best_norm.is_finite() {
        return Err(Error::EigenFailure("eigenvector is not isolated".into()));
    }
    Ok(best / Complex64::new(best_norm, 0.0))
}
