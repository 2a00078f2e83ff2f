//! Solvers for implicit equations `y = G(x) + H(x, y)` with a contractive
//! perturbation `H`, and systems of them solved by recursive elimination.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;

/// Threshold on `sup |∂H/∂y|`.
pub const CONTRACTION_LIMIT: f64 = 0.5;
/// Constant in `|I| ≤ C sup |H|` and `|dI/dx| ≤ C sup |H_x|`.
pub const BOUND_CONSTANT: f64 = 2.0;
/// Quasi-random points used to sample the sups.
pub const SUP_SAMPLES: usize = 1000;
const MAX_ITER: usize = 500;
const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// `index`-th element of the van der Corput sequence in `base`.
pub fn halton(mut index: usize, base: u32) -> f64 {
    let b = base as usize;
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % b) as f64;
        index /= b;
    }
    r
}

/// Box over which sups are sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub x: Vec<(f64, f64)>,
    pub y: Vec<(f64, f64)>,
}

impl SampleBox {
    fn points(&self, n: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let dim = self.x.len() + self.y.len();
        if dim > PRIMES.len() {
            return Err(Error::InvalidInput(format!("sample box of dimension {dim} exceeds {}", PRIMES.len())));
        }
        if self.x.iter().chain(self.y.iter()).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidInput("sample box has an empty side".into()));
        }
        let at = |i: usize, d: usize, (a, b): (f64, f64)| a + (b - a) * halton(i + 1, PRIMES[d]);
        Ok((0..n)
            .map(|i| {
                let x = self.x.iter().enumerate().map(|(d, s)| at(i, d, *s)).collect();
                let y = self.y.iter().enumerate().map(|(d, s)| at(i, d + self.x.len(), *s)).collect();
                (x, y)
            })
            .collect())
    }
}

fn fd_step(v: f64) -> f64 {
    1e-6 * (1.0 + v.abs())
}

type ScalarG = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type ScalarH = Box<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// `y = G(x) + H(x, y)` for scalar `y`.
pub struct ImplicitScalarProblem {
    pub g: ScalarG,
    pub h: ScalarH,
    /// Analytic `sup |H|`; sampled over `domain` when absent.
    pub sup_h: Option<f64>,
    /// Analytic `sup |∂H/∂y|`; sampled over `domain` when absent.
    pub sup_hy: Option<f64>,
    /// `y` has one side.
    pub domain: SampleBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub sup_h: f64,
    pub sup_hy: f64,
}

impl ImplicitScalarProblem {
    pub fn new<G, H>(g: G, h: H, domain: SampleBox) -> Self
    where
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        H: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self { g: Box::new(g), h: Box::new(h), sup_h: None, sup_hy: None, domain }
    }

    pub fn with_bounds(mut self, sup_h: f64, sup_hy: f64) -> Self {
        self.sup_h = Some(sup_h);
        self.sup_hy = Some(sup_hy);
        self
    }

    /// Given or sampled `(sup |H|, sup |H_y|)`.
    pub fn bounds(&self) -> Result<Bounds> {
        if let (Some(sup_h), Some(sup_hy)) = (self.sup_h, self.sup_hy) {
            return Ok(Bounds { sup_h, sup_hy });
        }
        if self.domain.y.len() != 1 {
            return Err(Error::InvalidInput("scalar problem needs a one-sided y box".into()));
        }
        let mut b = Bounds { sup_h: 0.0, sup_hy: 0.0 };
        for (x, y) in self.domain.points(SUP_SAMPLES)? {
            let y = y[0];
            let d = fd_step(y);
            b.sup_h = b.sup_h.max((self.h)(&x, y).abs());
            b.sup_hy = b.sup_hy.max((((self.h)(&x, y + d) - (self.h)(&x, y - d)) / (2.0 * d)).abs());
        }
        if !(b.sup_h.is_finite() && b.sup_hy.is_finite()) {
            return Err(Error::NonFinite("sampled sup"));
        }
        Ok(Bounds { sup_h: self.sup_h.unwrap_or(b.sup_h), sup_hy: self.sup_hy.unwrap_or(b.sup_hy) })
    }

    /// Sampled `sup |∂H/∂xᵢ|` over the domain, maximised over `i`.
    pub fn sup_hx(&self) -> Result<f64> {
        let mut s = 0.0f64;
        for (x, y) in self.domain.points(SUP_SAMPLES)? {
            for i in 0..x.len() {
                let d = fd_step(x[i]);
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += d;
                xm[i] -= d;
                s = s.max((((self.h)(&xp, y[0]) - (self.h)(&xm, y[0])) / (2.0 * d)).abs());
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarSolution {
    pub y: f64,
    /// `I(x) = y − G(x)`.
    pub correction: f64,
    pub iterations: usize,
    pub residual: f64,
    pub bounds: Bounds,
}

/// Upper bound on Picard steps to bring the residual from `initial` to `tol`.
pub fn picard_step_bound(tol: f64, initial: f64, ratio: f64) -> f64 {
    if initial <= tol {
        return 0.0;
    }
    if ratio <= 0.0 {
        return 1.0;
    }
    (tol / initial).ln() / ratio.ln() + 1.0
}

/// Picard iteration for `y = φ(y)` with Aitken extrapolation once three
/// consecutive residuals decay log-linearly. Returns `(y, residual, steps)`.
fn fixed_point_1d<F: FnMut(f64) -> Result<f64>>(mut phi: F, y0: f64, tol: f64, ratio_cap: f64) -> Result<(f64, f64, usize)> {
    let mut y = y0;
    let mut fy = phi(y)?;
    let mut res = (fy - y).abs();
    let mut history: Vec<(f64, f64)> = vec![(y, res)];
    for it in 0..MAX_ITER {
        if !res.is_finite() {
            return Err(Error::NonFinite("implicit iteration"));
        }
        let floor = 4.0 * f64::EPSILON * (1.0 + y.abs());
        if res < tol || res <= floor {
            return Ok((y, res, it));
        }
        let mut next = fy;
        let mut f_next = phi(next)?;
        let mut r_next = (f_next - next).abs();
        if r_next > ratio_cap * res && r_next > floor.max(100.0 * tol) {
            return Err(Error::NotContractive(r_next / res));
        }
        if let [.., (y0, r0), (y1, r1)] = history[..] {
            let (q1, q2) = (r1 / r0, r_next / r1);
            if r0 > 0.0 && r1 > 0.0 && (q1 - q2).abs() <= 0.1 * q1.max(q2) {
                let den = next - 2.0 * y1 + y0;
                if den != 0.0 {
                    let ya = y0 - (y1 - y0).powi(2) / den;
                    let fa = phi(ya)?;
                    let ra = (fa - ya).abs();
                    if ra < r_next {
                        next = ya;
                        f_next = fa;
                        r_next = ra;
                        history.clear();
                    }
                }
            }
        }
        y = next;
        fy = f_next;
        res = r_next;
        history.push((y, res));
    }
    Err(Error::NoConvergence(MAX_ITER))
}

/// Solve `y = G(x) + H(x, y)` from `y₀ = G(x)`.
pub fn solve_scalar(prob: &ImplicitScalarProblem, x: &[f64], tol: f64) -> Result<ScalarSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    let bounds = prob.bounds()?;
    if !(bounds.sup_hy < CONTRACTION_LIMIT) {
        return Err(Error::NotContractive(bounds.sup_hy));
    }
    let g = (prob.g)(x);
    let initial = (prob.h)(x, g).abs();
    let (y, residual, iterations) = fixed_point_1d(|y| Ok(g + (prob.h)(x, y)), g, tol, CONTRACTION_LIMIT)?;
    let allowed = picard_step_bound(tol, initial, bounds.sup_hy);
    if iterations as f64 > allowed.ceil() {
        return Err(Error::NoConvergence(iterations));
    }
    let correction = y - g;
    if correction.abs() > BOUND_CONSTANT * bounds.sup_h + tol {
        return Err(Error::DomainError(format!("|I| = {} exceeds 2 sup|H| = {}", correction.abs(), 2.0 * bounds.sup_h)));
    }
    Ok(ScalarSolution { y, correction, iterations, residual, bounds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeProbe {
    /// Central-difference `∂I/∂xᵢ`.
    pub di_dx: Vec<f64>,
    /// `2 sup |H_x|` over the domain.
    pub bound: f64,
}

/// Finite-difference derivative of the correction for constant `G`,
/// checked against `2 sup |∂H/∂x|`.
pub fn derivative_bound_probe(prob: &ImplicitScalarProblem, x: &[f64], h: f64) -> Result<DerivativeProbe> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("step {h} must be positive")));
    }
    let g0 = (prob.g)(x);
    for (xs, _) in prob.domain.points(64)? {
        if ((prob.g)(&xs) - g0).abs() > 1e-14 * (1.0 + g0.abs()) {
            return Err(Error::InvalidInput("derivative bound needs constant G".into()));
        }
    }
    let tol = 1e-14;
    let mut di_dx = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[i] += h;
        xm[i] -= h;
        let ip = solve_scalar(prob, &xp, tol)?.correction;
        let im = solve_scalar(prob, &xm, tol)?.correction;
        di_dx.push((ip - im) / (2.0 * h));
    }
    let bound = BOUND_CONSTANT * prob.sup_hx()?;
    let slack = 10.0 * tol / h + 1e-6 * bound;
    if let Some(d) = di_dx.iter().find(|d| d.abs() > bound + slack) {
        return Err(Error::DomainError(format!("|dI/dx| = {} exceeds {bound}", d.abs())));
    }
    Ok(DerivativeProbe { di_dx, bound })
}

type SystemG = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type SystemH = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// `yⱼ = Gⱼ(x) + Hⱼ(x, y)`, `j = 1..m`, coupled through the full `y`.
pub struct ImplicitSystemProblem {
    pub m: usize,
    pub g: SystemG,
    pub h: SystemH,
    pub sup_h: Option<Vec<f64>>,
    /// Analytic bounds `sup |∂Hⱼ/∂yᵢ|`, row `j`.
    pub sup_hy: Option<Vec<Vec<f64>>>,
    pub domain: SampleBox,
}

impl ImplicitSystemProblem {
    pub fn new<G, H>(m: usize, g: G, h: H, domain: SampleBox) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        H: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { m, g: Box::new(g), h: Box::new(h), sup_h: None, sup_hy: None, domain }
    }

    fn eval_h(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let v = (self.h)(x, y);
        if v.len() != self.m {
            return Err(Error::InvalidInput(format!("H returned {} components, expected {}", v.len(), self.m)));
        }
        Ok(v)
    }

    /// Per-component `sup |Hⱼ|` and the matrix of `sup |∂Hⱼ/∂yᵢ|`.
    pub fn bounds(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if self.domain.y.len() != self.m {
            return Err(Error::InvalidInput(format!("y box has {} sides, expected {}", self.domain.y.len(), self.m)));
        }
        let mut sh = vec![0.0f64; self.m];
        let mut shy = vec![vec![0.0f64; self.m]; self.m];
        if self.sup_h.is_none() || self.sup_hy.is_none() {
            for (x, y) in self.domain.points(SUP_SAMPLES)? {
                let h0 = self.eval_h(&x, &y)?;
                for j in 0..self.m {
                    sh[j] = sh[j].max(h0[j].abs());
                }
                for i in 0..self.m {
                    let d = fd_step(y[i]);
                    let (mut yp, mut ym) = (y.clone(), y.clone());
                    yp[i] += d;
                    ym[i] -= d;
                    let (hp, hm) = (self.eval_h(&x, &yp)?, self.eval_h(&x, &ym)?);
                    for j in 0..self.m {
                        shy[j][i] = shy[j][i].max(((hp[j] - hm[j]) / (2.0 * d)).abs());
                    }
                }
            }
        }
        let sh = self.sup_h.clone().unwrap_or(sh);
        let shy = self.sup_hy.clone().unwrap_or(shy);
        if sh.iter().chain(shy.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sampled sup"));
        }
        Ok((sh, shy))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSolution {
    pub y: Vec<f64>,
    pub corrections: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sup_h: Vec<f64>,
    /// Largest row sum of the sampled `|∂H/∂y|` bounds.
    pub contraction: f64,
}

struct Eliminator<'a> {
    prob: &'a ImplicitSystemProblem,
    x: &'a [f64],
    g: Vec<f64>,
    tol: f64,
    /// Last solution of every level, used as a warm start.
    warm: RefCell<Vec<f64>>,
}

impl Eliminator<'_> {
    /// Given `y₀..y_{j−1}`, solve components `j..m` and return them.
    fn tail(&self, prefix: &[f64]) -> Result<Vec<f64>> {
        let j = prefix.len();
        if j == self.prob.m {
            return Ok(Vec::new());
        }
        let start = self.warm.borrow()[j];
        let mut full = prefix.to_vec();
        let mut phi = |yj: f64| -> Result<f64> {
            full.truncate(j);
            full.push(yj);
            let rest = self.tail(&full)?;
            full.extend(rest);
            Ok(self.g[j] + self.prob.eval_h(self.x, &full)?[j])
        };
        let (yj, _, _) = fixed_point_1d(&mut phi, start, self.tol, CONTRACTION_LIMIT)?;
        self.warm.borrow_mut()[j] = yj;
        let mut out = prefix.to_vec();
        out.push(yj);
        let rest = self.tail(&out)?;
        let mut result = vec![yj];
        result.extend(rest);
        Ok(result)
    }
}

/// Solve the system by eliminating the last component first, then
/// substituting into the remaining equations.
pub fn solve_system(prob: &ImplicitSystemProblem, x: &[f64], tol: f64) -> Result<SystemSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    if prob.m == 0 {
        return Err(Error::InvalidInput("empty system".into()));
    }
    let (sup_h, sup_hy) = prob.bounds()?;
    for (j, row) in sup_hy.iter().enumerate() {
        if !(row[j] < CONTRACTION_LIMIT) {
            return Err(Error::NotContractive(row[j]));
        }
    }
    let contraction = sup_hy.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
    if !(contraction < CONTRACTION_LIMIT) {
        return Err(Error::NotContractive(contraction));
    }
    let g = (prob.g)(x);
    if g.len() != prob.m {
        return Err(Error::InvalidInput(format!("G returned {} components, expected {}", g.len(), prob.m)));
    }
    let inner_tol = (tol * 1e-2).max(f64::EPSILON);
    let elim = Eliminator { prob, x, g: g.clone(), tol: inner_tol, warm: RefCell::new(g.clone()) };
    let y = elim.tail(&[])?;
    let h = prob.eval_h(x, &y)?;
    let residuals: Vec<f64> = (0..prob.m).map(|j| (y[j] - g[j] - h[j]).abs()).collect();
    if let Some(r) = residuals.iter().find(|r| !(**r < tol)) {
        return Err(Error::DomainError(format!("residual {r:e} after elimination")));
    }
    let corrections: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - b).collect();
    for (c, s) in corrections.iter().zip(&sup_h) {
        if c.abs() > BOUND_CONSTANT * s + tol {
            return Err(Error::DomainError(format!("|I| = {} exceeds 2 sup|H| = {}", c.abs(), 2.0 * s)));
        }
    }
    Ok(SystemSolution { y, corrections, residuals, sup_h, contraction })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ybox(r: f64) -> SampleBox {
        SampleBox { x: vec![(-1.0, 1.0)], y: vec![(-r, r)] }
    }

    #[test]
    fn halton_base_two() {
        let v: Vec<f64> = (1..5).map(|i| halton(i, 2)).collect();
        assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn zero_perturbation() {
        let p = ImplicitScalarProblem::new(|x| 2.0 * x[0], |_, _| 0.0, ybox(2.0));
        let s = solve_scalar(&p, &[0.3], 1e-12).unwrap();
        assert_eq!(s.y, 0.6);
        assert_eq!(s.correction, 0.0);
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn sine_example_matches_picard() {
        let p = ImplicitScalarProblem::new(|_| 0.5, |_, y: f64| 0.1 * y.sin(), ybox(2.0));
        let s = solve_scalar(&p, &[0.0], 1e-12).unwrap();
        let mut y: f64 = 0.5;
        for _ in 0..200 {
            y = 0.5 + 0.1 * y.sin();
        }
        assert!((s.y - y).abs() < 1e-12);
        assert!((s.y - 0.552_479_986_906_570).abs() < 1e-12);
        assert!(s.correction.abs() <= 2.0 * s.bounds.sup_h);
    }

    #[test]
    fn tanh_example() {
        let p = ImplicitScalarProblem::new(|_| 0.0, |_, y: f64| 0.2 * y.tanh(), ybox(2.0));
        let s = solve_scalar(&p, &[0.0], 1e-12).unwrap();
        assert_eq!(s.y, 0.0);
        assert!(s.correction.abs() <= 0.4);
    }

    #[test]
    fn not_contractive() {
        let p = ImplicitScalarProblem::new(|_| 0.0, |_, y: f64| 0.9 * y, ybox(1.0));
        assert!(matches!(solve_scalar(&p, &[0.0], 1e-12), Err(Error::NotContractive(_))));
        let q = ImplicitScalarProblem::new(|_| 0.0, |_, y: f64| 0.1 * y, ybox(1.0)).with_bounds(0.1, 0.6);
        assert!(matches!(solve_scalar(&q, &[0.0], 1e-12), Err(Error::NotContractive(_))));
    }

    fn sys_box(m: usize) -> SampleBox {
        SampleBox { x: vec![(-1.0, 1.0)], y: vec![(-2.0, 2.0); m] }
    }

    #[test]
    fn decoupled_system() {
        let p = ImplicitSystemProblem::new(3, |_| vec![0.5; 3], |_, y: &[f64]| y.iter().map(|v| 0.1 * v.sin()).collect(), sys_box(3));
        let s = solve_system(&p, &[0.0], 1e-12).unwrap();
        let sc = solve_scalar(&ImplicitScalarProblem::new(|_| 0.5, |_, y: f64| 0.1 * y.sin(), ybox(2.0)), &[0.0], 1e-13).unwrap();
        for v in &s.y {
            assert!((v - sc.y).abs() < 1e-12);
        }
    }

    #[test]
    fn coupled_pair_matches_damped_iteration() {
        let p = ImplicitSystemProblem::new(2, |_| vec![0.0, 0.0], |_, y: &[f64]| vec![0.1 * y[1].sin(), 0.1 * y[0].cos()], sys_box(2));
        let s = solve_system(&p, &[0.0], 1e-13).unwrap();
        let mut y = [0.0f64, 0.0];
        for _ in 0..500 {
            let n = [0.1 * y[1].sin(), 0.1 * y[0].cos()];
            y = [0.5 * y[0] + 0.5 * n[0], 0.5 * y[1] + 0.5 * n[1]];
        }
        assert!((s.y[0] - y[0]).abs() < 1e-12 && (s.y[1] - y[1]).abs() < 1e-12);
    }

    #[test]
    fn system_component_not_contractive() {
        let p = ImplicitSystemProblem::new(2, |_| vec![0.0, 0.0], |_, y: &[f64]| vec![0.1 * y[1], 0.9 * y[1]], sys_box(2));
        assert!(matches!(solve_system(&p, &[0.0], 1e-12), Err(Error::NotContractive(_))));
    }

    #[test]
    fn probe_examples() {
        let indep = ImplicitScalarProblem::new(|_| 0.0, |_, y: f64| 0.2 * y.tanh(), ybox(2.0));
        let d = derivative_bound_probe(&indep, &[0.3], 1e-4).unwrap();
        assert!(d.di_dx[0].abs() < 1e-9);

        let s = ImplicitScalarProblem::new(|_| 0.0, |x: &[f64], y: f64| 0.1 * (x[0] + y).sin(), ybox(2.0));
        for x in [-0.9, -0.3, 0.0, 0.4, 0.8] {
            let d = derivative_bound_probe(&s, &[x], 1e-4).unwrap();
            assert!(d.di_dx[0].abs() <= 0.2 + 1e-9);
        }

        let slopes: Vec<f64> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&a| {
                let p = ImplicitScalarProblem::new(|_| 0.5, move |x: &[f64], y: f64| a * x[0] * y.tanh(), ybox(2.0));
                derivative_bound_probe(&p, &[0.5], 1e-4).unwrap().di_dx[0] / a
            })
            .collect();
        assert!((slopes[0] - slopes[1]).abs() < 1e-2 * slopes[0].abs());
        assert!((slopes[1] - slopes[2]).abs() < 0.1 * slopes[0].abs());

        let moving = ImplicitScalarProblem::new(|x: &[f64]| x[0], |_, y: f64| 0.1 * y.sin(), ybox(2.0));
        assert!(matches!(derivative_bound_probe(&moving, &[0.0], 1e-4), Err(Error::InvalidInput(_))));
    }
}
