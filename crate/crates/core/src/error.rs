use thiserror::Error;

/// Which omega window a parameter failed to lie in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowName {
    Bd,
    Ps,
    Ex,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("non-finite value encountered ({0})")]
    NonFinite(&'static str),
    #[error("orbit left the chart at local step {0}")]
    LeftChart(usize),
    #[error("point is outside the return section")]
    NotInSection,
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("singular Jacobian (condition number {0:.3e})")]
    SingularJacobian(f64),
    #[error("eigenvalue computation failed: {0}")]
    EigenFailure(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("multiplier within {0:e} of the unit circle")]
    Ambiguous(f64),
    #[error("no fixed point: {0}")]
    NoFixedPoint(String),
    #[error("rotation angle {psi} is within the resonance guard of {resonance}")]
    ResonanceGuard { psi: f64, resonance: f64 },
    #[error("omega = {omega} lies outside the {window:?} window")]
    WindowViolation { window: WindowName, omega: f64 },
    #[error("trace does not cross {0} on the scan range")]
    NotBracketed(f64),
    #[error("spectrum mismatch: {0}")]
    SpectrumMismatch(String),
    #[error("homological equation is singular (nu3 = {0})")]
    SingularHomological(f64),
    #[error("base points are not aligned with a tangency (dy/dy = {0:e})")]
    NotAligned(f64),
    #[error("no tangency in the bracket")]
    NoTangency,
    #[error("degenerate contact (d = {0:e})")]
    DegenerateContact(f64),
    #[error("not contractive: sup |dH/dy| = {0} >= 1/2")]
    NotContractive(f64),
    #[error("mesh exceeded the point budget of {0}")]
    MeshExplosion(usize),
    #[error("empty manifold cloud")]
    EmptyCloud,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn finite(v: &nalgebra::Vector3<f64>, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
